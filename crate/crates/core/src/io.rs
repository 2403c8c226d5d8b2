//! Configuration files, run manifests and the VTK/CSV writers and readers.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which the
//! readers parse back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{BalanceRow, DiagRow, BALANCE_HEADER, DIAG_HEADER};
use crate::error::{Error, Result};
use crate::mesh::Vec3;
use crate::stepper::{AbortRecord, RunOutcome, SimConfig, Simulation, StepEvents, StepState};

/// Parses and validates a TOML configuration file. Missing keys take their
/// defaults; unknown keys and malformed values are reported with their line.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// [`parse_config`] on text.
pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    let config: SimConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        match line {
            Some(l) => Error::Parse(format!("line {l}: {}", e.message())),
            None => Error::Parse(e.message().to_string()),
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// TOML text of a resolved configuration, with every default spelled out.
pub fn config_to_toml(config: &SimConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))
}

/// Record of one run, written once per run directory as `manifest.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub steps_completed: usize,
    pub events: StepEvents,
    pub abort: Option<AbortRecord>,
    /// Resolved configuration.
    pub config: SimConfig,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self)
            .map_err(|e| Error::Parse(format!("cannot serialize manifest: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.message().to_string(),
        })
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn fmt_f64(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

/// Point data fields in file order.
pub const VTK_SCALARS: [&str; 6] = ["phi", "mu", "pi", "H", "K", "vn"];
pub const VTK_VECTORS: [&str; 4] = ["V", "u_hat", "v_total", "normal"];

/// Contents of a legacy VTK polydata snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSnapshot {
    pub title: String,
    pub points: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// In [`VTK_SCALARS`] order.
    pub scalars: Vec<(String, Vec<f64>)>,
    /// In [`VTK_VECTORS`] order.
    pub vectors: Vec<(String, Vec<Vec3>)>,
}

impl VtkSnapshot {
    pub fn from_state(s: &StepState) -> Self {
        let sf = &s.surface;
        let scalars = [&s.phi, &s.mu, &s.pi, &sf.mean_curv, &sf.gauss_curv, &sf.v_n];
        let vectors = [&s.v, &s.u_hat, &s.v_total, &sf.normals];
        VtkSnapshot {
            title: format!("evochns step {} t {:.16e}", s.step, s.t()),
            points: sf.positions.clone(),
            triangles: sf.mesh.faces.clone(),
            scalars: VTK_SCALARS
                .iter()
                .zip(scalars)
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect(),
            vectors: VTK_VECTORS
                .iter()
                .zip(vectors)
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let np = self.points.len();
        let nf = self.triangles.len();
        let mut out = String::with_capacity(64 * np * (3 + VTK_SCALARS.len() + 3 * VTK_VECTORS.len()));
        out.push_str("# vtk DataFile Version 3.0\n");
        out.push_str(self.title.lines().next().unwrap_or(""));
        out.push_str("\nASCII\nDATASET POLYDATA\n");
        let _ = writeln!(out, "POINTS {np} double");
        let vec_line = |out: &mut String, v: &Vec3| {
            fmt_f64(out, v.x);
            out.push(' ');
            fmt_f64(out, v.y);
            out.push(' ');
            fmt_f64(out, v.z);
            out.push('\n');
        };
        for p in &self.points {
            vec_line(&mut out, p);
        }
        let _ = writeln!(out, "POLYGONS {nf} {}", 4 * nf);
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "3 {a} {b} {c}");
        }
        let _ = writeln!(out, "POINT_DATA {np}");
        for (name, vals) in &self.scalars {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in vals {
                fmt_f64(&mut out, *v);
                out.push('\n');
            }
        }
        for (name, vals) in &self.vectors {
            let _ = writeln!(out, "VECTORS {name} double");
            for v in vals {
                vec_line(&mut out, v);
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Reads a file produced by [`VtkSnapshot::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|message| Error::Format {
            path: path.display().to_string(),
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut c = Cursor(text.lines().enumerate());
        let (_, magic) = c.next("header")?;
        if !magic.starts_with("# vtk DataFile") {
            return Err("line 1: not a legacy VTK file".into());
        }
        let title = c.next("title")?.1.to_string();
        for expect in ["ASCII", "DATASET POLYDATA"] {
            let (i, l) = c.next(expect)?;
            if l.trim() != expect {
                return Err(format!("line {i}: expected `{expect}`"));
            }
        }
        let np = c.count("POINTS")?;
        let points = c.vec3s(np)?;
        let nf = c.count("POLYGONS")?;
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (i, l) = c.next("polygon")?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| format!("line {i}: bad index")))
                .collect::<std::result::Result<_, _>>()?;
            if v.len() != 4 || v[0] != 3 || v[1..].iter().any(|&v| v >= np) {
                return Err(format!("line {i}: expected a triangle of valid points"));
            }
            triangles.push([v[1], v[2], v[3]]);
        }
        if c.count("POINT_DATA")? != np {
            return Err("POINT_DATA count differs from POINTS".into());
        }
        let mut scalars = vec![];
        let mut vectors = vec![];
        while let Ok((i, l)) = c.next("field") {
            let w: Vec<&str> = l.split_whitespace().collect();
            match w.first() {
                Some(&"SCALARS") if w.len() >= 2 => {
                    let (j, lt) = c.next("LOOKUP_TABLE")?;
                    if !lt.starts_with("LOOKUP_TABLE") {
                        return Err(format!("line {j}: expected LOOKUP_TABLE"));
                    }
                    let vals = (0..np)
                        .map(|_| c.next("scalar").and_then(|(j, l)| float(j, l.trim())))
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    scalars.push((w[1].to_string(), vals));
                }
                Some(&"VECTORS") if w.len() >= 2 => vectors.push((w[1].to_string(), c.vec3s(np)?)),
                None => {}
                _ => return Err(format!("line {i}: unexpected `{l}`")),
            }
        }
        Ok(VtkSnapshot {
            title,
            points,
            triangles,
            scalars,
            vectors,
        })
    }
}

fn float(line: usize, s: &str) -> std::result::Result<f64, String> {
    s.parse()
        .map_err(|_| format!("line {line}: bad number `{s}`"))
}

/// Line reader reporting 1-based line numbers.
struct Cursor<'a>(std::iter::Enumerate<std::str::Lines<'a>>);

impl<'a> Cursor<'a> {
    fn next(&mut self, what: &str) -> std::result::Result<(usize, &'a str), String> {
        self.0
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| format!("unexpected end of file, expected {what}"))
    }

    /// `KEY n ...` header line.
    fn count(&mut self, key: &str) -> std::result::Result<usize, String> {
        let (i, l) = self.next(key)?;
        let mut w = l.split_whitespace();
        if w.next() != Some(key) {
            return Err(format!("line {i}: expected `{key}`"));
        }
        w.next()
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| format!("line {i}: bad count"))
    }

    fn vec3s(&mut self, n: usize) -> std::result::Result<Vec<Vec3>, String> {
        (0..n)
            .map(|_| {
                let (i, l) = self.next("vector")?;
                let c: Vec<&str> = l.split_whitespace().collect();
                if c.len() != 3 {
                    return Err(format!("line {i}: expected 3 components"));
                }
                Ok(Vec3::new(float(i, c[0])?, float(i, c[1])?, float(i, c[2])?))
            })
            .collect()
    }
}

/// Writes the VTK snapshot of `state`.
pub fn write_vtk(state: &StepState, path: &Path) -> Result<()> {
    VtkSnapshot::from_state(state).write(path)
}

/// CSV text of diagnostics rows under [`DIAG_HEADER`].
pub fn diagnostics_csv(rows: &[DiagRow]) -> String {
    let mut out = DIAG_HEADER.join(",");
    out.push('\n');
    for r in rows {
        for (k, v) in r.values().iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            if DIAG_HEADER[k] == "picard_iters" {
                let _ = write!(out, "{}", r.picard_iters);
            } else {
                fmt_f64(&mut out, *v);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[DiagRow], path: &Path) -> Result<()> {
    fs::write(path, diagnostics_csv(rows)).map_err(|e| Error::io(path, e))
}

fn csv_records(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.display().to_string(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(header.join(",").as_str()) {
        return Err(bad("line 1: unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            if vals.len() != header.len() {
                return Err(bad(format!("line {}: expected {} fields", i + 2, header.len())));
            }
            Ok(vals)
        })
        .collect()
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<DiagRow>> {
    Ok(csv_records(path, &DIAG_HEADER)?
        .into_iter()
        .map(|v| DiagRow {
            t: v[0],
            mass: v[1],
            area: v[2],
            energy: v[3],
            kinetic: v[4],
            potential: v[5],
            gradient: v[6],
            max_abs_phi: v[7],
            separation_margin: v[8],
            div_residual: v[9],
            constraint_residual: v[10],
            tangency_max: v[11],
            picard_iters: v[12] as usize,
            wall_time: v[13],
        })
        .collect())
}

pub fn write_balance_csv(rows: &[BalanceRow], path: &Path) -> Result<()> {
    let mut out = BALANCE_HEADER.join(",");
    out.push('\n');
    for r in rows {
        for (k, v) in [r.t, r.energy, r.dissipation, r.residual].iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            fmt_f64(&mut out, *v);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_balance_csv(path: &Path) -> Result<Vec<BalanceRow>> {
    Ok(csv_records(path, &BALANCE_HEADER)?
        .into_iter()
        .map(|v| BalanceRow {
            t: v[0],
            energy: v[1],
            dissipation: v[2],
            residual: v[3],
        })
        .collect())
}

/// File names inside a run directory.
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const BALANCE_FILE: &str = "energy_balance.csv";

/// Snapshot path for output step `step`.
pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snapshot_{step:06}.vtk"))
}

/// Runs `config` and writes the manifest, `diagnostics.csv`,
/// `energy_balance.csv` and (if enabled) one VTK snapshot per output step
/// into `dir`, which is created if needed. A numerical abort is recorded in
/// the manifest and the outcome rather than returned as an error.
pub fn run_to_dir(config: &SimConfig, dir: &Path) -> Result<RunOutcome> {
    let started = unix_now();
    let mut sim = Simulation::new(config.clone())?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let vtk = config.output.vtk;
    let outcome = sim.run(|state, _| {
        if vtk {
            write_vtk(state, &snapshot_path(dir, state.step))?;
        }
        Ok(())
    })?;
    write_csv(&outcome.rows, &dir.join(DIAGNOSTICS_FILE))?;
    write_balance_csv(&outcome.balance, &dir.join(BALANCE_FILE))?;
    RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: unix_now(),
        steps_completed: outcome.final_state.step,
        events: outcome.event_totals,
        abort: outcome.abort.clone(),
        config: config.clone(),
    }
    .write(&dir.join(MANIFEST_FILE))?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use crate::stepper::PresetKind;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = parse_config_str("[geometry]\npreset = \"stationary_sphere\"\n").unwrap();
        assert_eq!(c, SimConfig::default());
        let text = config_to_toml(&c).unwrap();
        for section in ["[geometry]", "[material]", "[potential]", "[numerics]", "[output]", "[initial]"] {
            assert!(text.contains(section), "{section} missing from\n{text}");
        }
    }

    #[test]
    fn errors_carry_line_or_key() {
        match parse_config_str("[geometry]\npreset = \"stationary_sphere\"\n\n[numerics]\nbogus = 1\n") {
            Err(Error::Parse(m)) => assert!(m.starts_with("line 5"), "{m}"),
            other => panic!("{other:?}"),
        }
        match parse_config_str("[numerics]\ndt = \"fast\"\n") {
            Err(Error::Parse(m)) => assert!(m.starts_with("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
        match parse_config_str("[numerics]\ndt = -1\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "numerics.dt"),
            other => panic!("{other:?}"),
        }
        match parse_config(Path::new("/nonexistent/evochns.toml")) {
            Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("/nonexistent/evochns.toml")),
            other => panic!("{other:?}"),
        }
    }

    fn arb_config() -> impl Strategy<Value = SimConfig> {
        (
            (0u32..=5, 0.1f64..10.0, -0.2f64..0.2, 0.1f64..20.0, 1u32..=4),
            (1e-5f64..1.0, 0.0f64..5.0, 1usize..=5, 1usize..=50, any::<bool>()),
            (0.01f64..100.0, 0.01f64..100.0, 1e-3f64..1.0, 0.01f64..0.45),
            prop_oneof![
                Just(PresetKind::StationarySphere),
                Just(PresetKind::OscillatingHarmonicSphere)
            ],
        )
            .prop_map(|(g, n, m, preset)| {
                let mut c = SimConfig::default();
                c.geometry.preset = preset;
                c.geometry.subdivisions = g.0;
                c.geometry.radius = g.1;
                c.geometry.amplitude = g.2;
                c.geometry.frequency = g.3;
                c.geometry.l = g.4;
                c.numerics.dt = n.0;
                c.numerics.t_end = n.1;
                c.numerics.picard_max = n.2;
                c.output.cadence = n.3;
                c.output.vtk = n.4;
                c.material.rho1 = m.0;
                c.material.rho2 = m.1;
                c.material.nu1 = m.2;
                c.initial.delta0 = m.3;
                c
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn config_text_round_trips(c in arb_config()) {
            let text = config_to_toml(&c).unwrap();
            prop_assert_eq!(parse_config_str(&text).unwrap(), c);
        }

        #[test]
        fn vtk_text_round_trips_bit_exactly(
            vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 12 * 18)
        ) {
            let mesh = make_icosphere(0, 1.0).unwrap();
            let mut it = vals.chunks(18);
            let mut scalars: Vec<(String, Vec<f64>)> = VTK_SCALARS.iter().map(|n| (n.to_string(), vec![])).collect();
            let mut vectors: Vec<(String, Vec<Vec3>)> = VTK_VECTORS.iter().map(|n| (n.to_string(), vec![])).collect();
            let mut points = vec![];
            for _ in 0..12 {
                let c = it.next().unwrap();
                points.push(Vec3::new(c[0], c[1], c[2]));
                for k in 0..6 { scalars[k].1.push(c[3 + k]); }
                for k in 0..3 { vectors[k].1.push(Vec3::new(c[9 + 3 * k], c[10 + 3 * k], c[11 + 3 * k])); }
                vectors[3].1.push(mesh.vertices[points.len() - 1]);
            }
            let snap = VtkSnapshot { title: "t".into(), points, triangles: mesh.faces.clone(), scalars, vectors };
            let back = VtkSnapshot::parse(&snap.to_text()).unwrap();
            prop_assert_eq!(back, snap);
        }
    }

    #[test]
    fn icosahedron_snapshot_layout() {
        let mut c = SimConfig::default();
        c.geometry.subdivisions = 0;
        let mut sim = Simulation::new(c).unwrap();
        let st = sim.initial_state().unwrap();
        let text = VtkSnapshot::from_state(&st).to_text();
        assert!(text.contains("POINTS 12 double\n"));
        assert!(text.contains("POLYGONS 20 80\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("3 ")).count(), 20);
        let names: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("SCALARS") || l.starts_with("VECTORS"))
            .map(|l| l.split_whitespace().nth(1).unwrap())
            .collect();
        assert_eq!(names, ["phi", "mu", "pi", "H", "K", "vn", "V", "u_hat", "v_total", "normal"]);
        assert_eq!(text, VtkSnapshot::from_state(&st).to_text());
    }

    #[test]
    fn csv_round_trips_and_empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_csv(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), format!("{}\n", DIAG_HEADER.join(",")));
        let row = DiagRow {
            t: 0.1,
            mass: -1.0 / 3.0,
            area: 4.0 * std::f64::consts::PI,
            energy: 1e-300,
            kinetic: 0.0,
            potential: -0.0,
            gradient: 7.5e12,
            max_abs_phi: 0.9,
            separation_margin: 0.1,
            div_residual: 1e-17,
            constraint_residual: 2.2e-16,
            tangency_max: 3.0,
            picard_iters: 3,
            wall_time: 12.5,
        };
        write_csv(&[row, row], &p).unwrap();
        assert_eq!(read_csv(&p).unwrap(), vec![row, row]);
        let b = BalanceRow { t: 0.1, energy: 1.0 / 7.0, dissipation: 2.0, residual: -1e-9 };
        write_balance_csv(&[b], &p).unwrap();
        assert_eq!(read_balance_csv(&p).unwrap(), vec![b]);
    }

    fn strip_wall_time(csv: &str) -> String {
        csv.lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn run_directory_is_complete_and_deterministic() {
        let mut c = SimConfig::default();
        c.geometry.preset = PresetKind::OscillatingHarmonicSphere;
        c.geometry.subdivisions = 2;
        c.numerics.dt = 0.01;
        c.numerics.t_end = 0.05;
        c.output.cadence = 2;
        c.initial.phi0 = "0.3*z".into();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let out = run_to_dir(&c, d.path()).unwrap();
            assert!(out.abort.is_none());
        }
        let (a, b) = (dirs[0].path(), dirs[1].path());
        let m = RunManifest::read(&a.join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.config, c);
        assert_eq!(m.steps_completed, 5);
        // floor(T_end / (dt · cadence)) + 1
        let rows = read_csv(&a.join(DIAGNOSTICS_FILE)).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(read_balance_csv(&a.join(BALANCE_FILE)).unwrap().len(), 5);
        for step in [0, 2, 4] {
            let (pa, pb) = (snapshot_path(a, step), snapshot_path(b, step));
            assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
            let snap = VtkSnapshot::read(&pa).unwrap();
            assert_eq!(snap.to_text(), fs::read_to_string(&pa).unwrap());
        }
        let csv = |d: &Path| strip_wall_time(&fs::read_to_string(d.join(DIAGNOSTICS_FILE)).unwrap());
        assert_eq!(csv(a), csv(b));
        assert_eq!(
            fs::read(a.join(BALANCE_FILE)).unwrap(),
            fs::read(b.join(BALANCE_FILE)).unwrap()
        );
    }
}
