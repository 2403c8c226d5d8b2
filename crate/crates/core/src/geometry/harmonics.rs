//! Real spherical harmonics used by the presets and the spectral oracles.

use crate::mesh::Vec3;

/// Real harmonic of degree `l` and order `m` evaluated at the direction of `x`.
///
/// Schmidt semi-normalised: `sqrt((2-δ_m0)(l-|m|)!/(l+|m|)!) P_l^|m|(cos θ)`
/// times `cos(mφ)` for `m ≥ 0` and `sin(|m|φ)` for `m < 0`. Then `|Y| ≤ 1`,
/// `Y_11 = x`, `Y_1,-1 = y` and `Y_20 = (3z²-1)/2`.
pub fn real_harmonic(l: u32, m: i32, x: &Vec3) -> f64 {
    let am = m.unsigned_abs();
    assert!(am <= l, "harmonic order |m| = {am} exceeds degree {l}");
    let r = x.norm();
    if r == 0.0 {
        return 0.0;
    }
    let u = x / r;
    let ct = u.z.clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let p = assoc_legendre(l, am, ct, st);
    let mut scale = if am == 0 { 1.0 } else { 2.0 };
    for k in (l - am + 1)..=(l + am) {
        scale /= k as f64;
    }
    let phi = u.y.atan2(u.x);
    let ang = if m >= 0 {
        (am as f64 * phi).cos()
    } else {
        (am as f64 * phi).sin()
    };
    scale.sqrt() * p * ang
}

/// `P_l^m(ct)` without the Condon–Shortley phase; `st = sqrt(1-ct²)`.
fn assoc_legendre(l: u32, m: u32, ct: f64, st: f64) -> f64 {
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * st;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = ct * (2 * m + 1) as f64 * pmm;
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * ct * pm1 - (ll + m - 1) as f64 * pm2) / (ll - m) as f64;
        pm2 = pm1;
        pm1 = next;
    }
    pm1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let x = Vec3::new(0.3, -0.5, 0.7).normalize();
        assert!((real_harmonic(0, 0, &x) - 1.0).abs() < 1e-15);
        assert!((real_harmonic(1, 0, &x) - x.z).abs() < 1e-15);
        assert!((real_harmonic(1, 1, &x) - x.x).abs() < 1e-15);
        assert!((real_harmonic(1, -1, &x) - x.y).abs() < 1e-15);
        assert!((real_harmonic(2, 0, &x) - 0.5 * (3.0 * x.z * x.z - 1.0)).abs() < 1e-15);
        // sqrt(1/24) * 3 sin²θ cos 2φ = (sqrt 3 / 2)(x² - y²)
        let y22 = 0.5 * 3f64.sqrt() * (x.x * x.x - x.y * x.y);
        assert!((real_harmonic(2, 2, &x) - y22).abs() < 1e-14);
        let y21 = 3f64.sqrt() * x.x * x.z;
        assert!((real_harmonic(2, 1, &x) - y21).abs() < 1e-14);
    }

    #[test]
    fn scale_invariant_in_radius() {
        let x = Vec3::new(1.0, 2.0, -0.5);
        let a = real_harmonic(3, -2, &x);
        let b = real_harmonic(3, -2, &(x * 7.5));
        assert!((a - b).abs() < 1e-14);
    }
}
