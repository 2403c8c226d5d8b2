//! Sparse direct factorisation with small dense node blocks.
//!
//! The matrix is viewed as an `n/b × n/b` grid of `b×b` blocks (all unknowns
//! of one mesh vertex form a block). Elimination uses a symmetric block
//! pattern, a nested-dissection ordering and dense block pivots, so saddle
//! systems whose vertex blocks are nonsingular need no further pivoting.
//! For symmetric input the factors satisfy `U = D Lᵀ`, i.e. this is block LDLᵀ.

use super::sparse::SparseOperator;
use crate::error::{Error, Result};

type Blk<const B: usize> = [[f64; B]; B];

#[inline(always)]
fn zero<const B: usize>() -> Blk<B> {
    [[0.0; B]; B]
}

/// `c -= a · b`
#[inline(always)]
fn sub_mul<const B: usize>(c: &mut Blk<B>, a: &Blk<B>, b: &Blk<B>) {
    for i in 0..B {
        for k in 0..B {
            let aik = a[i][k];
            for j in 0..B {
                c[i][j] -= aik * b[k][j];
            }
        }
    }
}

#[inline(always)]
fn mul<const B: usize>(a: &Blk<B>, b: &Blk<B>) -> Blk<B> {
    let mut c = zero::<B>();
    for i in 0..B {
        for k in 0..B {
            for j in 0..B {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Gauss–Jordan inverse with partial pivoting; `None` if a pivot is below `tol`.
fn invert<const B: usize>(a: &Blk<B>, tol: f64) -> Option<Blk<B>> {
    let mut m = *a;
    let mut inv = zero::<B>();
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in 0..B {
        let p = (c..B).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if !(m[p][c].abs() > tol) {
            return None;
        }
        m.swap(c, p);
        inv.swap(c, p);
        let d = 1.0 / m[c][c];
        for j in 0..B {
            m[c][j] *= d;
            inv[c][j] *= d;
        }
        for r in 0..B {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..B {
                        m[r][j] -= f * m[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Symmetric block adjacency of a square operator (without the diagonal).
pub fn block_graph(a: &SparseOperator, b: usize) -> Vec<Vec<usize>> {
    let n = a.nrows / b;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..a.nrows {
        let bi = i / b;
        for (j, _) in a.row(i) {
            let bj = j / b;
            if bi != bj {
                adj[bi].push(bj);
                adj[bj].push(bi);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    adj
}

/// Nested-dissection ordering from BFS level structures (`perm[new] = old`).
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut out = Vec::with_capacity(n);
    let mut stamp = vec![0u32; n];
    let mut level = vec![u32::MAX; n];
    let mut counter = 0u32;
    let all: Vec<usize> = (0..n).collect();
    dissect(adj, &all, &mut stamp, &mut level, &mut counter, &mut out);
    debug_assert_eq!(out.len(), n);
    out
}

const ND_LEAF: usize = 48;

fn bfs(
    adj: &[Vec<usize>],
    start: usize,
    stamp: &[u32],
    id: u32,
    level: &mut [u32],
    order: &mut Vec<usize>,
) {
    order.clear();
    level[start] = 0;
    order.push(start);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &adj[v] {
            if stamp[w] == id && level[w] == u32::MAX {
                level[w] = level[v] + 1;
                order.push(w);
            }
        }
    }
}

fn dissect(
    adj: &[Vec<usize>],
    nodes: &[usize],
    stamp: &mut Vec<u32>,
    level: &mut Vec<u32>,
    counter: &mut u32,
    out: &mut Vec<usize>,
) {
    if nodes.len() <= ND_LEAF {
        out.extend_from_slice(nodes);
        return;
    }
    *counter += 1;
    let id = *counter;
    for &v in nodes {
        stamp[v] = id;
        level[v] = u32::MAX;
    }
    let mut order = Vec::with_capacity(nodes.len());
    bfs(adj, nodes[0], stamp, id, level, &mut order);
    if order.len() < nodes.len() {
        // disconnected: split off the component just found
        let comp = order.clone();
        let rest: Vec<usize> = nodes
            .iter()
            .copied()
            .filter(|&v| level[v] == u32::MAX)
            .collect();
        dissect(adj, &comp, stamp, level, counter, out);
        dissect(adj, &rest, stamp, level, counter, out);
        return;
    }
    // pseudo-peripheral start: restart from the last node reached
    let far = *order.last().unwrap();
    for &v in nodes {
        level[v] = u32::MAX;
    }
    bfs(adj, far, stamp, id, level, &mut order);
    let depth = level[*order.last().unwrap()] as usize;
    if depth < 2 {
        out.extend_from_slice(nodes);
        return;
    }
    let mut counts = vec![0usize; depth + 1];
    for &v in nodes {
        counts[level[v] as usize] += 1;
    }
    let half = nodes.len() / 2;
    let mut cum = 0;
    let mut sep_level = depth / 2;
    for (l, c) in counts.iter().enumerate() {
        cum += c;
        if cum >= half {
            sep_level = l.clamp(1, depth - 1);
            break;
        }
    }
    let sl = sep_level as u32;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut sep = Vec::new();
    for &v in nodes {
        match level[v].cmp(&sl) {
            std::cmp::Ordering::Less => left.push(v),
            std::cmp::Ordering::Equal => sep.push(v),
            std::cmp::Ordering::Greater => right.push(v),
        }
    }
    dissect(adj, &left, stamp, level, counter, out);
    dissect(adj, &right, stamp, level, counter, out);
    out.extend_from_slice(&sep);
}

struct Factors<const B: usize> {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    /// `L` and `U` blocks of each stored off-diagonal position.
    lx: Vec<Blk<B>>,
    ux: Vec<Blk<B>>,
    dinv: Vec<Blk<B>>,
}

impl<const B: usize> Factors<B> {
    fn factor(a: &SparseOperator, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows / B;
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        // Permuted block rows with symmetric pattern: for each new node k the
        // list of (j, A(k,j), A(j,k)).
        let graph = block_graph(a, B);
        let mut rows: Vec<Vec<(usize, Blk<B>, Blk<B>)>> = vec![Vec::new(); n];
        let mut diag = vec![zero::<B>(); n];
        for (old, nb) in graph.iter().enumerate() {
            let k = iperm[old];
            rows[k] = nb.iter().map(|&o| (iperm[o], zero(), zero())).collect();
            rows[k].sort_unstable_by_key(|e| e.0);
        }
        for i in 0..a.nrows {
            let (bi, ci) = (i / B, i % B);
            let ki = iperm[bi];
            for (j, v) in a.row(i) {
                let (bj, cj) = (j / B, j % B);
                let kj = iperm[bj];
                if ki == kj {
                    diag[ki][ci][cj] += v;
                } else {
                    let p = rows[ki].binary_search_by_key(&kj, |e| e.0).unwrap();
                    rows[ki][p].1[ci][cj] += v;
                    let q = rows[kj].binary_search_by_key(&ki, |e| e.0).unwrap();
                    rows[kj][q].2[ci][cj] += v;
                }
            }
        }
        let mut parent = vec![usize::MAX; n];
        let mut ancestor = vec![usize::MAX; n];
        for k in 0..n {
            for &(j, _, _) in &rows[k] {
                if j >= k {
                    break;
                }
                let mut i = j;
                while i != usize::MAX && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == usize::MAX {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }
        let mut lnz = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        for k in 0..n {
            flag[k] = k;
            for &(j, _, _) in &rows[k] {
                if j >= k {
                    break;
                }
                let mut i = j;
                while flag[i] != k {
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let total = lp[n];
        let mut li = vec![0u32; total];
        let mut lx = vec![zero::<B>(); total];
        let mut ux = vec![zero::<B>(); total];
        let mut dinv = vec![zero::<B>(); n];
        let mut fill = vec![0usize; n];
        // (column part, row part) of the current row being eliminated
        let mut yz = vec![(zero::<B>(), zero::<B>()); n];
        let mut pattern = vec![0usize; n];
        let mut stack = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = usize::MAX);

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for &(j, akj, ajk) in &rows[k] {
                if j >= k {
                    break;
                }
                yz[j] = (ajk, akj);
                let mut len = 0;
                let mut i = j;
                while flag[i] != k {
                    stack[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = stack[len];
                }
            }
            let mut d = diag[k];
            for &i in &pattern[top..n] {
                let (yi, zi) = std::mem::replace(&mut yz[i], (zero(), zero()));
                let lki = mul(&zi, &dinv[i]);
                let col = lp[i]..lp[i] + fill[i];
                for ((&m, l), u) in li[col.clone()].iter().zip(&lx[col.clone()]).zip(&ux[col]) {
                    let t = &mut yz[m as usize];
                    sub_mul(&mut t.0, l, &yi);
                    sub_mul(&mut t.1, &lki, u);
                }
                sub_mul(&mut d, &lki, &yi);
                let q = lp[i] + fill[i];
                li[q] = k as u32;
                lx[q] = lki;
                ux[q] = yi;
                fill[i] += 1;
            }
            let scale = diag[k]
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            dinv[k] = invert(&d, 1e-13 * scale).ok_or_else(|| Error::Solver {
                method: "direct",
                message: format!("zero pivot at block {k} (node {})", perm[k]),
                history: vec![],
            })?;
        }
        Ok(Factors {
            n,
            perm,
            lp,
            li,
            lx,
            ux,
            dinv,
        })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<[f64; B]> = (0..n)
            .map(|k| {
                let mut v = [0.0; B];
                v.copy_from_slice(&rhs[self.perm[k] * B..self.perm[k] * B + B]);
                v
            })
            .collect();
        for i in 0..n {
            let xi = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                let m = self.li[q] as usize;
                let l = &self.lx[q];
                for r in 0..B {
                    let mut s = 0.0;
                    for c in 0..B {
                        s += l[r][c] * xi[c];
                    }
                    x[m][r] -= s;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for q in self.lp[i]..self.lp[i + 1] {
                let m = self.li[q] as usize;
                let u = &self.ux[q];
                for r in 0..B {
                    for c in 0..B {
                        s[r] -= u[r][c] * x[m][c];
                    }
                }
            }
            let d = &self.dinv[i];
            let mut out = [0.0; B];
            for r in 0..B {
                for c in 0..B {
                    out[r] += d[r][c] * s[c];
                }
            }
            x[i] = out;
        }
        let mut sol = vec![0.0; n * B];
        for k in 0..n {
            sol[self.perm[k] * B..self.perm[k] * B + B].copy_from_slice(&x[k]);
        }
        sol
    }
}

enum Inner {
    B1(Factors<1>),
    B2(Factors<2>),
    B3(Factors<3>),
    B4(Factors<4>),
}

/// Factored operator, reusable for many right-hand sides.
pub struct DirectSolver {
    inner: Inner,
    dim: usize,
    /// Number of stored off-diagonal blocks in `L`.
    pub fill: usize,
}

impl DirectSolver {
    /// Factors `a` with node blocks of size `block` (1 to 4).
    pub fn factor(a: &SparseOperator, block: usize) -> Result<Self> {
        if a.nrows != a.ncols || block == 0 || a.nrows % block != 0 {
            return Err(Error::Contract(format!(
                "cannot factor {}x{} with block size {block}",
                a.nrows, a.ncols
            )));
        }
        let perm = nested_dissection(&block_graph(a, block));
        let inner = match block {
            1 => Inner::B1(Factors::factor(a, perm)?),
            2 => Inner::B2(Factors::factor(a, perm)?),
            3 => Inner::B3(Factors::factor(a, perm)?),
            4 => Inner::B4(Factors::factor(a, perm)?),
            _ => {
                return Err(Error::Contract(format!(
                    "block size {block} unsupported (1..=4)"
                )))
            }
        };
        let fill = match &inner {
            Inner::B1(f) => f.lp[f.n],
            Inner::B2(f) => f.lp[f.n],
            Inner::B3(f) => f.lp[f.n],
            Inner::B4(f) => f.lp[f.n],
        };
        Ok(DirectSolver {
            inner,
            dim: a.nrows,
            fill,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim, "rhs dimension mismatch");
        match &self.inner {
            Inner::B1(f) => f.solve(rhs),
            Inner::B2(f) => f.solve(rhs),
            Inner::B3(f) => f.solve(rhs),
            Inner::B4(f) => f.solve(rhs),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::{norm, TripletBuilder};
    use proptest::prelude::*;

    /// 2D grid Laplacian plus shift, `b` copies coupled per node.
    fn grid(nx: usize, b: usize, unsym: f64) -> SparseOperator {
        let n = nx * nx;
        let mut t = TripletBuilder::new(n * b, n * b);
        for i in 0..nx {
            for j in 0..nx {
                let v = i * nx + j;
                for c in 0..b {
                    t.push(v * b + c, v * b + c, 4.5 + c as f64);
                    for c2 in 0..b {
                        if c2 != c {
                            t.push(v * b + c, v * b + c2, 0.3 + unsym * c as f64);
                        }
                    }
                }
                let mut nb = vec![];
                if i > 0 {
                    nb.push(v - nx);
                }
                if i + 1 < nx {
                    nb.push(v + nx);
                }
                if j > 0 {
                    nb.push(v - 1);
                }
                if j + 1 < nx {
                    nb.push(v + 1);
                }
                for w in nb {
                    for c in 0..b {
                        t.push(v * b + c, w * b + c, -1.0 + unsym * (v % 3) as f64);
                    }
                }
            }
        }
        t.build(unsym == 0.0)
    }

    #[test]
    fn nested_dissection_is_a_permutation() {
        let a = grid(30, 1, 0.0);
        let mut p = nested_dissection(&block_graph(&a, 1));
        p.sort_unstable();
        assert_eq!(p, (0..900).collect::<Vec<_>>());
    }

    #[test]
    fn solves_match_dense() {
        for (b, unsym) in [(1, 0.0), (2, 0.0), (3, 0.1), (4, 0.05)] {
            let a = grid(12, b, unsym);
            let x: Vec<f64> = (0..a.nrows).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
            let rhs = a.matvec(&x);
            let f = DirectSolver::factor(&a, b).unwrap();
            let sol = f.solve(&rhs);
            let err: f64 = sol
                .iter()
                .zip(&x)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "b = {b}: {err}");
        }
    }

    #[test]
    fn saddle_blocks_without_pivoting() {
        // [[I, Bᵀ], [B, 0]] per node with a coupling: only block pivots work.
        let n = 50;
        let mut t = TripletBuilder::new(2 * n, 2 * n);
        for v in 0..n {
            t.push(2 * v, 2 * v, 2.0);
            t.push(2 * v, 2 * v + 1, 1.0);
            t.push(2 * v + 1, 2 * v, 1.0);
            if v + 1 < n {
                t.push(2 * v, 2 * v + 2, -0.5);
                t.push(2 * v + 2, 2 * v, -0.5);
                t.push(2 * v + 1, 2 * v + 2, 0.2);
                t.push(2 * v + 2, 2 * v + 1, 0.2);
            }
        }
        let a = t.build(true);
        let x: Vec<f64> = (0..2 * n).map(|i| (i as f64).sin()).collect();
        let rhs = a.matvec(&x);
        let sol = DirectSolver::factor(&a, 2).unwrap().solve(&rhs);
        let r: Vec<f64> = a
            .matvec(&sol)
            .iter()
            .zip(&rhs)
            .map(|(p, q)| p - q)
            .collect();
        assert!(norm(&r) < 1e-12 * norm(&rhs), "{} {}", norm(&r), norm(&rhs));
    }

    #[test]
    fn singular_matrix_reports_zero_pivot() {
        let mut t = TripletBuilder::new(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                t.push(i, j, 1.0);
            }
        }
        assert!(matches!(
            DirectSolver::factor(&t.build(true), 1),
            Err(Error::Solver { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_diagonally_dominant_systems(
            seed_entries in prop::collection::vec((0usize..40, 0usize..40, -1.0f64..1.0), 0..120),
            x in prop::collection::vec(-1.0f64..1.0, 40),
        ) {
            let mut t = TripletBuilder::new(40, 40);
            for &(i, j, v) in &seed_entries {
                if i != j { t.push(i, j, v); }
            }
            let a0 = t.build(false);
            let mut t = TripletBuilder::new(40, 40);
            t.push_operator(&a0, 1.0, |i| i, |j| j);
            for i in 0..40 {
                let s: f64 = a0.row(i).map(|(_, v)| v.abs()).sum::<f64>()
                    + a0.transpose().row(i).map(|(_, v)| v.abs()).sum::<f64>();
                t.push(i, i, s + 1.0);
            }
            let a = t.build(false);
            let rhs = a.matvec(&x);
            let sol = DirectSolver::factor(&a, 1).unwrap().solve(&rhs);
            for (p, q) in sol.iter().zip(&x) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }
}
