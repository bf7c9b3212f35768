//! Smallest eigenpairs of a sparse symmetric pencil `K x = lambda M x`.
//!
//! Shift-invert Lanczos in the `M` inner product with full
//! reorthogonalization. Converged pairs are locked and the iteration restarts
//! in their `M`-orthogonal complement until the requested eigenvalues stop
//! changing, which resolves repeated eigenvalues that a single Krylov space
//! cannot see.

use crate::fem::SparseSym;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 500;
const SEED: u64 = 0x5eed_1a2c_05;
const NONE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("near-zero pivot {pivot:e} at row {row}")]
    SingularPivot { row: usize, pivot: f64 },
    #[error("mass matrix is not positive definite (pivot {pivot:e} at row {row})")]
    MassNotSPD { row: usize, pivot: f64 },
    #[error("not converged after {iterations} Lanczos steps: {converged}/{requested} pairs, worst residual {worst_residual:e}")]
    NotConverged {
        requested: usize,
        converged: usize,
        iterations: usize,
        worst_residual: f64,
        residuals: Vec<f64>,
    },
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("requested {count} eigenpairs of a pencil of dimension {dim}")]
    BadCount { count: usize, dim: usize },
}

/// Reverse Cuthill-McKee ordering. `perm[new] = old`.
pub fn rcm_ordering(a: &SparseSym) -> Vec<usize> {
    let n = a.dim();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let degree: Vec<usize> = adj.iter().map(|v| v.len()).collect();
    for v in adj.iter_mut() {
        v.sort_by_key(|&j| (degree[j], j));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![0usize; n];
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = peripheral_node(&adj, seed, &mut level);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Pseudo-peripheral node of the component containing `seed`.
fn peripheral_node(adj: &[Vec<usize>], seed: usize, level: &mut [usize]) -> usize {
    let bfs = |root: usize, level: &mut [usize]| -> (Vec<usize>, usize) {
        let mut seen = vec![root];
        level[root] = 1;
        let mut head = 0;
        while head < seen.len() {
            let v = seen[head];
            head += 1;
            for &w in &adj[v] {
                if level[w] == 0 {
                    level[w] = level[v] + 1;
                    seen.push(w);
                }
            }
        }
        let depth = level[*seen.last().unwrap()];
        (seen, depth)
    };
    let mut root = seed;
    let mut best_depth = 0;
    for _ in 0..8 {
        let (seen, depth) = bfs(root, level);
        // deepest level, minimum degree
        let far = *seen
            .iter()
            .filter(|&&v| level[v] == depth)
            .min_by_key(|&&v| (adj[v].len(), v))
            .unwrap();
        for &v in &seen {
            level[v] = 0;
        }
        if depth <= best_depth {
            break;
        }
        best_depth = depth;
        root = far;
    }
    root
}

/// Sparse `L D L^T` factorization under a fill-reducing ordering.
#[derive(Debug, Clone)]
pub struct Factor {
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
}

impl Factor {
    pub fn new(a: &SparseSym) -> Result<Self, EigenError> {
        let n = a.dim();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let pa = a.permuted(&inv);

        // upper triangle by columns
        let mut ap = vec![0usize; n + 1];
        for i in 0..n {
            for (j, _) in pa.row(i) {
                ap[j + 1] += 1;
            }
        }
        for j in 0..n {
            ap[j + 1] += ap[j];
        }
        let mut ai = vec![0usize; ap[n]];
        let mut ax = vec![0.0; ap[n]];
        let mut next = ap.clone();
        for i in 0..n {
            for (j, v) in pa.row(i) {
                ai[next[j]] = i;
                ax[next[j]] = v;
                next[j] += 1;
            }
        }

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &row in &ai[ap[j]..ap[j + 1]] {
                let mut i = row;
                if i >= j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut dinv = vec![0.0; n];

        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let tiny = scale * 1e-14;

        let mut marked = vec![false; n];
        let mut yvals = vec![0.0; n];
        let mut yidx = Vec::with_capacity(n);
        let mut elim = Vec::with_capacity(n);
        let mut next_space: Vec<usize> = lp[..n].to_vec();
        for k in 0..n {
            yidx.clear();
            d[k] = 0.0;
            for p in ap[k]..ap[k + 1] {
                let b = ai[p];
                if b == k {
                    d[k] = ax[p];
                    continue;
                }
                yvals[b] = ax[p];
                if marked[b] {
                    continue;
                }
                marked[b] = true;
                elim.clear();
                elim.push(b);
                let mut nx = etree[b];
                while nx != NONE && nx < k {
                    if marked[nx] {
                        break;
                    }
                    marked[nx] = true;
                    elim.push(nx);
                    nx = etree[nx];
                }
                while let Some(e) = elim.pop() {
                    yidx.push(e);
                }
            }
            for &c in yidx.iter().rev() {
                let tmp = next_space[c];
                let yc = yvals[c];
                for j in lp[c]..tmp {
                    yvals[li[j]] -= lx[j] * yc;
                }
                li[tmp] = k;
                lx[tmp] = yc * dinv[c];
                d[k] -= yc * lx[tmp];
                next_space[c] += 1;
                yvals[c] = 0.0;
                marked[c] = false;
            }
            if !(d[k].abs() > tiny) {
                return Err(EigenError::SingularPivot {
                    row: perm[k],
                    pivot: d[k],
                });
            }
            dinv[k] = 1.0 / d[k];
        }
        Ok(Factor {
            perm,
            lp,
            li,
            lx,
            d,
            dinv,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of negative pivots, i.e. eigenvalues of the factored matrix
    /// below zero (Sylvester's law of inertia).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn fill(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: DEFAULT_MAX_ITER,
            seed: SEED,
        }
    }
}

#[derive(Debug, Clone)]
struct Pair {
    value: f64,
    x: Vec<f64>,
    mx: Vec<f64>,
    residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Krylov basis for `(K - sigma M)^{-1} M` in the complement of `locked`.
struct Lanczos<'a> {
    op: &'a Factor,
    m: &'a SparseSym,
    locked: &'a [Pair],
    q: Vec<Vec<f64>>,
    mq: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    exhausted: bool,
}

impl<'a> Lanczos<'a> {
    fn new(op: &'a Factor, m: &'a SparseSym, locked: &'a [Pair], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut s = Lanczos {
            op,
            m,
            locked,
            q: Vec::new(),
            mq: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            exhausted: false,
        };
        s.orthogonalize(&mut v);
        let mv = m.mul_vec(&v);
        let nrm = dot(&v, &mv).max(0.0).sqrt();
        if nrm == 0.0 {
            s.exhausted = true;
        } else {
            s.q.push(v.iter().map(|x| x / nrm).collect());
            s.mq.push(mv.iter().map(|x| x / nrm).collect());
        }
        s
    }

    fn orthogonalize(&self, w: &mut [f64]) {
        for _ in 0..2 {
            for p in self.locked {
                let c = dot(&p.mx, w);
                axpy(w, -c, &p.x);
            }
            for (q, mq) in self.q.iter().zip(&self.mq) {
                let c = dot(mq, w);
                axpy(w, -c, q);
            }
        }
    }

    fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// One Lanczos step; afterwards `alpha` has one more entry.
    fn step(&mut self) {
        let j = self.alpha.len();
        let mut w = self.op.solve(&self.mq[j]);
        if j > 0 {
            axpy(&mut w, -self.beta[j - 1], &self.q[j - 1]);
        }
        let a = dot(&self.mq[j], &w);
        self.alpha.push(a);
        axpy(&mut w, -a, &self.q[j]);
        self.orthogonalize(&mut w);
        let mw = self.m.mul_vec(&w);
        let b = dot(&w, &mw).max(0.0).sqrt();
        let scale = self.alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let room = self.op.dim() - self.locked.len();
        if !(b > 1e-13 * scale) || self.q.len() >= room {
            self.exhausted = true;
            return;
        }
        self.beta.push(b);
        self.q.push(w.iter().map(|x| x / b).collect());
        self.mq.push(mw.iter().map(|x| x / b).collect());
    }

    /// Ritz values of the operator (largest first) with their coordinate vectors.
    fn ritz(&self) -> Vec<(f64, Vec<f64>)> {
        let k = self.steps();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut out: Vec<(f64, Vec<f64>)> = (0..k)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .collect();
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    fn vector(&self, s: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.op.dim()];
        for (c, q) in s.iter().zip(&self.q) {
            axpy(&mut x, *c, q);
        }
        x
    }
}

fn make_pair(k: &SparseSym, m: &SparseSym, value: f64, mut x: Vec<f64>) -> Pair {
    let mut mx = m.mul_vec(&x);
    let nrm = dot(&x, &mx).max(0.0).sqrt();
    x.iter_mut().for_each(|v| *v /= nrm);
    mx.iter_mut().for_each(|v| *v /= nrm);
    // first significant component positive
    let big = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-8 * big) {
        if *first < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
            mx.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let kx = k.mul_vec(&x);
    let residual = kx
        .iter()
        .zip(&mx)
        .map(|(a, b)| (a - value * b).powi(2))
        .sum::<f64>()
        .sqrt();
    Pair {
        value,
        x,
        mx,
        residual,
    }
}

/// Smallest `need` pairs in the complement of `locked`.
#[allow(clippy::too_many_arguments)]
fn lanczos_run(
    k: &SparseSym,
    m: &SparseSym,
    op: &Factor,
    shift: f64,
    locked: &[Pair],
    need: usize,
    tol: f64,
    opts: &LanczosOptions,
    seed: u64,
) -> Result<(Vec<Pair>, usize), EigenError> {
    let mut lz = Lanczos::new(op, m, locked, seed);
    if lz.exhausted {
        return Ok((Vec::new(), 0));
    }
    let mut best: Vec<Pair> = Vec::new();
    while lz.steps() < opts.max_iter {
        lz.step();
        let steps = lz.steps();
        let check = lz.exhausted || steps == opts.max_iter || (steps >= need && (steps - need) % 4 == 0);
        if !check {
            continue;
        }
        let ritz = lz.ritz();
        let b = lz.beta.get(steps - 1).copied().unwrap_or(0.0);
        // cheap bound first: |beta * s_last| is the operator residual
        let cheap_ok = ritz
            .iter()
            .take(need)
            .all(|(theta, s)| (b * s[steps - 1]).abs() <= 1e-4 * theta.abs() || lz.exhausted);
        if !(cheap_ok || lz.exhausted || steps == opts.max_iter) {
            continue;
        }
        let pairs: Vec<Pair> = ritz
            .iter()
            .take(need)
            .filter(|(theta, _)| *theta > 0.0)
            .map(|(theta, s)| make_pair(k, m, shift + 1.0 / theta, lz.vector(s)))
            .collect();
        let done = pairs.len() == need.min(ritz.len()) && pairs.iter().all(|p| p.residual <= tol);
        if done || lz.exhausted {
            if pairs.iter().any(|p| p.residual > tol) {
                return Err(not_converged(need, &pairs, steps, tol));
            }
            return Ok((pairs, steps));
        }
        best = pairs;
    }
    Err(not_converged(need, &best, lz.steps(), tol))
}

fn not_converged(need: usize, pairs: &[Pair], iterations: usize, tol: f64) -> EigenError {
    let residuals: Vec<f64> = pairs.iter().map(|p| p.residual).collect();
    EigenError::NotConverged {
        requested: need,
        converged: residuals.iter().filter(|r| **r <= tol).count(),
        iterations,
        worst_residual: residuals.iter().fold(f64::NAN, |a, &b| a.max(b)),
        residuals,
    }
}

pub fn smallest_eigs(
    k: &SparseSym,
    m: &SparseSym,
    count: usize,
    shift: f64,
    tol: f64,
) -> Result<EigenResult, EigenError> {
    smallest_eigs_with(k, m, count, shift, tol, &LanczosOptions::default())
}

/// Shifted factorization, re-shifting once below the spectrum if `shift`
/// sits on an eigenvalue.
fn shifted_factor(k: &SparseSym, m: &SparseSym, shift: f64) -> Result<(Factor, f64), EigenError> {
    match Factor::new(&k.add_scaled(m, -shift)) {
        Ok(f) => Ok((f, shift)),
        Err(EigenError::SingularPivot { .. }) => {
            let max_diag = k.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let s = shift - max_diag * 1e-8;
            Ok((Factor::new(&k.add_scaled(m, -s))?, s))
        }
        Err(e) => Err(e),
    }
}

pub fn smallest_eigs_with(
    k: &SparseSym,
    m: &SparseSym,
    count: usize,
    shift: f64,
    tol: f64,
    opts: &LanczosOptions,
) -> Result<EigenResult, EigenError> {
    let n = k.dim();
    if m.dim() != n {
        return Err(EigenError::DimensionMismatch(n, m.dim()));
    }
    if count == 0 || count > n {
        return Err(EigenError::BadCount { count, dim: n });
    }
    match Factor::new(m) {
        Ok(f) if f.negative_pivots() == 0 => {}
        Ok(f) => {
            let k = f.d.iter().position(|&v| v < 0.0).unwrap();
            return Err(EigenError::MassNotSPD {
                row: f.perm[k],
                pivot: f.d[k],
            });
        }
        Err(EigenError::SingularPivot { row, pivot }) => return Err(EigenError::MassNotSPD { row, pivot }),
        Err(e) => return Err(e),
    }
    let (op, shift) = shifted_factor(k, m, shift)?;

    let mut locked: Vec<Pair> = Vec::new();
    let mut iterations = 0;
    let mut run = 0u64;
    while locked.len() < n {
        let need = if locked.is_empty() { count } else { 1 }.min(n - locked.len());
        let threshold = (locked.len() >= count).then(|| locked[count - 1].value);
        let (pairs, steps) = lanczos_run(k, m, &op, shift, &locked, need, tol, opts, opts.seed.wrapping_add(run))
            .map_err(|e| match e {
                EigenError::NotConverged {
                    requested,
                    converged,
                    worst_residual,
                    residuals,
                    ..
                } => EigenError::NotConverged {
                    requested: requested.max(count),
                    converged: converged + locked.len(),
                    iterations: iterations + opts.max_iter,
                    worst_residual,
                    residuals,
                },
                other => other,
            })?;
        iterations += steps;
        run += 1;
        if pairs.is_empty() {
            break;
        }
        let smallest_new = pairs.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        locked.extend(pairs);
        locked.sort_by(|a, b| a.value.total_cmp(&b.value));
        if let Some(th) = threshold {
            if smallest_new >= th {
                break;
            }
        }
    }
    if locked.len() < count {
        return Err(not_converged(count, &locked, iterations, tol));
    }
    locked.truncate(count);
    Ok(EigenResult {
        values: locked.iter().map(|p| p.value).collect(),
        residuals: locked.iter().map(|p| p.residual).collect(),
        vectors: locked.into_iter().map(|p| p.x).collect(),
        iterations,
    })
}

/// Smallest Ritz value of the pencil after each of `steps` Lanczos steps.
pub fn ritz_history(k: &SparseSym, m: &SparseSym, shift: f64, steps: usize) -> Result<Vec<f64>, EigenError> {
    let (op, shift) = shifted_factor(k, m, shift)?;
    let mut lz = Lanczos::new(&op, m, &[], SEED);
    let mut out = Vec::with_capacity(steps);
    while out.len() < steps && !lz.exhausted {
        lz.step();
        let theta = lz.ritz()[0].0;
        out.push(shift + 1.0 / theta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dense_eigs(k: &[Vec<f64>], m: &[Vec<f64>]) -> Vec<f64> {
        let n = k.len();
        let km = DMatrix::from_fn(n, n, |i, j| k[i][j]);
        let mm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
        let l = mm.cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let c = &li * km * li.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let mut v: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn random_spd(n: usize, seed: u64, density: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < density {
                    let v = rng.random_range(-1.0..1.0);
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
        }
        for i in 0..n {
            let off: f64 = a[i].iter().map(|v| v.abs()).sum();
            a[i][i] = off + 0.5 + rng.random::<f64>();
        }
        a
    }

    #[test]
    fn identity_pencil() {
        let r = smallest_eigs(&SparseSym::identity(6), &SparseSym::identity(6), 2, 0.0, 1e-10).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn diagonal_pencil() {
        let k = SparseSym::from_diagonal(&[2.0, 4.0]);
        let r = smallest_eigs(&k, &SparseSym::identity(2), 2, 0.0, 1e-10).unwrap();
        assert!((r.values[0] - 2.0).abs() < 1e-12 && (r.values[1] - 4.0).abs() < 1e-12);
        let k = SparseSym::from_diagonal(&[1.0, 2.0, 3.0]);
        let r = smallest_eigs(&k, &SparseSym::identity(3), 2, 0.0, 1e-10).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-12 && (r.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_eigenvalue_found_twice() {
        let k = SparseSym::from_diagonal(&[1.0, 1.0, 2.0, 5.0, 7.0]);
        let r = smallest_eigs(&k, &SparseSym::identity(5), 3, 0.0, 1e-10).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-12);
        assert!((r.values[1] - 1.0).abs() < 1e-12);
        assert!((r.values[2] - 2.0).abs() < 1e-12);
        let overlap = dot(&r.vectors[0], &r.vectors[1]);
        assert!(overlap.abs() < 1e-10);
    }

    #[test]
    fn random_pencil_matches_dense() {
        let n = 50;
        let k = random_spd(n, 1, 0.1);
        let mut m = random_spd(n, 2, 0.05);
        for row in m.iter_mut() {
            row.iter_mut().for_each(|v| *v *= 0.1);
        }
        let oracle = dense_eigs(&k, &m);
        let (ks, ms) = (SparseSym::from_dense(&k), SparseSym::from_dense(&m));
        let r = smallest_eigs(&ks, &ms, 6, 0.0, 1e-9).unwrap();
        for i in 0..6 {
            assert!(
                (r.values[i] - oracle[i]).abs() <= 1e-8 * oracle[i].abs(),
                "{i}: {} vs {}",
                r.values[i],
                oracle[i]
            );
            assert!(r.residuals[i] <= 1e-9);
        }
        for i in 0..6 {
            for j in 0..6 {
                let g = dot(&r.vectors[i], &ms.mul_vec(&r.vectors[j]));
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chain_laplacian() {
        let n = 199;
        let h = 1.0 / (n as f64 + 1.0);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / (h * h)));
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / (h * h)));
            }
        }
        let k = SparseSym::from_triplets(n, t);
        let r = smallest_eigs(&k, &SparseSym::identity(n), 4, 0.0, 1e-9).unwrap();
        for (l, v) in r.values.iter().enumerate() {
            let exact = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * (l + 1) as f64 * h).cos());
            assert!((v - exact).abs() <= 1e-9 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn shift_invariance_and_determinism() {
        let k = SparseSym::from_dense(&random_spd(40, 7, 0.15));
        let m = SparseSym::from_dense(&random_spd(40, 8, 0.05));
        let a = smallest_eigs(&k, &m, 4, 0.0, 1e-9).unwrap();
        let b = smallest_eigs(&k, &m, 4, -1.0, 1e-9).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-8);
        }
        let c = smallest_eigs(&k, &m, 4, 0.0, 1e-9).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn singular_shift_is_retried() {
        let k = SparseSym::from_diagonal(&[1.0, 2.0, 3.0]);
        let r = smallest_eigs(&k, &SparseSym::identity(3), 1, 1.0, 1e-10).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-9);
        assert!(matches!(
            Factor::new(&SparseSym::from_diagonal(&[1.0, 0.0])),
            Err(EigenError::SingularPivot { row: 1, .. })
        ));
    }

    #[test]
    fn indefinite_mass_rejected() {
        let m = SparseSym::from_diagonal(&[1.0, -1.0, 1.0]);
        assert!(matches!(
            smallest_eigs(&SparseSym::identity(3), &m, 1, 0.0, 1e-9),
            Err(EigenError::MassNotSPD { .. })
        ));
    }

    #[test]
    fn ritz_values_decrease() {
        let k = SparseSym::from_dense(&random_spd(60, 3, 0.1));
        let h = ritz_history(&k, &SparseSym::identity(60), 0.0, 30).unwrap();
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn factor_solves_and_counts_inertia() {
        let a = random_spd(30, 11, 0.2);
        let s = SparseSym::from_dense(&a);
        let f = Factor::new(&s).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = s.mul_vec(&x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        assert_eq!(f.negative_pivots(), 0);
        let shifted = Factor::new(&s.add_scaled(&SparseSym::identity(30), -1e3)).unwrap();
        assert_eq!(shifted.negative_pivots(), 30);
    }

    #[test]
    fn bad_inputs() {
        let i = SparseSym::identity(3);
        assert!(matches!(smallest_eigs(&i, &i, 0, 0.0, 1e-9), Err(EigenError::BadCount { .. })));
        assert!(matches!(
            smallest_eigs(&i, &SparseSym::identity(2), 1, 0.0, 1e-9),
            Err(EigenError::DimensionMismatch(3, 2))
        ));
    }
}
