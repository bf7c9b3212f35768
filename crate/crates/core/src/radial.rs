//! One-dimensional oracle for the concentric shell.
//!
//! Separating variables on `B_{R1} \ B_{R0}` reduces the Dirichlet problem to
//! the radial Sturm-Liouville problems
//! `-(a^{n-1} f')' + gamma_k a^{n-3} f = mu a^{n-1} f`, `f(R0) = f(R1) = 0`,
//! one per harmonic degree `k`. They are discretized in flux form, which
//! gives a symmetric tridiagonal pencil, and solved by Sturm bisection.

use crate::geometry::SpaceForm;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_GRID: usize = 2000;
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("grid of {intervals} intervals is too coarse for {count} eigenvalues")]
    GridTooCoarse { intervals: usize, count: usize },
    #[error("invalid radial problem: {0}")]
    Invalid(String),
    #[error("harmonic degree search exceeded k = {0}")]
    DegreeCapExceeded(usize),
}

pub fn gamma(k: usize, n: usize) -> f64 {
    (k * (n + k - 2)) as f64
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Dimension of the degree-`k` spherical harmonics on `S^{n-1}`.
pub fn harmonic_multiplicity(k: usize, n: usize) -> usize {
    let lower = if k >= 2 { binomial(n + k - 3, k - 2) } else { 0 };
    (binomial(n + k - 1, k) - lower) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProblem {
    form: SpaceForm,
    n: usize,
    k: usize,
    r0: f64,
    r1: f64,
}

impl RadialProblem {
    pub fn new(form: SpaceForm, n: usize, k: usize, r0: f64, r1: f64) -> Result<Self, RadialError> {
        if n == 0 {
            return Err(RadialError::Invalid("dimension must be at least 1".into()));
        }
        if n == 1 && k > 0 {
            return Err(RadialError::Invalid("dimension 1 has only degree 0".into()));
        }
        if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
            return Err(RadialError::Invalid(format!("radii must satisfy 0 < R0 < R1, got {r0}, {r1}")));
        }
        if form == SpaceForm::Spherical && r1 >= std::f64::consts::PI {
            return Err(RadialError::Invalid(format!("spherical R1 = {r1} must be below pi")));
        }
        Ok(RadialProblem { form, n, k, r0, r1 })
    }

    pub fn form(&self) -> SpaceForm {
        self.form
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn r0(&self) -> f64 {
        self.r0
    }
    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn gamma(&self) -> f64 {
        if self.n == 1 {
            0.0
        } else {
            gamma(self.k, self.n)
        }
    }

    pub fn profile(&self, r: f64) -> f64 {
        self.form.profile(r)
    }

    /// Interior pencil `A - mu W` on `intervals` cells as face fluxes
    /// `a^{n-1}/h^2` (one per cell), potentials and weights (one per node).
    fn pencil(&self, intervals: usize) -> Pencil {
        let h = (self.r1 - self.r0) / intervals as f64;
        let p = (self.n as i32) - 1;
        let g = self.gamma();
        let node = |i: usize| self.profile(self.r0 + i as f64 * h);
        Pencil {
            flux: (0..intervals)
                .map(|i| self.profile(self.r0 + (i as f64 + 0.5) * h).powi(p) / (h * h))
                .collect(),
            potential: (1..intervals).map(|i| g * node(i).powi(p - 2)).collect(),
            weight: (1..intervals).map(|i| node(i).powi(p)).collect(),
        }
    }
}

struct Pencil {
    flux: Vec<f64>,
    potential: Vec<f64>,
    weight: Vec<f64>,
}

impl Pencil {
    /// Eigenvalues below `x`, by inertia of `A - x W`. The pivots are
    /// carried as `q_i - flux_i`, which never cancels the large `2/h^2`
    /// diagonal against its neighbours.
    fn count_below(&self, x: f64) -> usize {
        let f = &self.flux;
        let mut count = 0;
        let mut s = 0.0;
        for i in 0..self.weight.len() {
            let shift = self.potential[i] - x * self.weight[i];
            s = if i == 0 { f[0] } else { f[i] * s / (f[i] + s) } + shift;
            let mut q = f[i + 1] + s;
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
                s = q - f[i + 1];
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn upper_bound(&self) -> f64 {
        (0..self.weight.len())
            .map(|i| 2.0 * (self.flux[i] + self.flux[i + 1] + self.potential[i]) / self.weight[i])
            .fold(0.0, f64::max)
    }
}

/// Smallest `count` eigenvalues on one grid, without extrapolation.
pub fn radial_eigs_on_grid(p: &RadialProblem, count: usize, intervals: usize) -> Result<Vec<f64>, RadialError> {
    if count == 0 {
        return Err(RadialError::Invalid("count must be at least 1".into()));
    }
    if intervals < 8 * count.max(2) {
        return Err(RadialError::GridTooCoarse { intervals, count });
    }
    let pencil = p.pencil(intervals);
    let hi = pencil.upper_bound();
    let mut out = Vec::with_capacity(count);
    let mut left = 0.0;
    for l in 1..=count {
        let (mut a, mut b) = (left, hi);
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if pencil.count_below(mid) >= l {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
        left = a;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialEstimate {
    pub value: f64,
    pub error: f64,
}

/// Richardson-extrapolated eigenvalues. Grids `N`, `2N`, `4N` give two
/// extrapolants; the finer is returned and their gap is the error estimate.
pub fn radial_eigs_with_grid(p: &RadialProblem, count: usize, intervals: usize) -> Result<Vec<RadialEstimate>, RadialError> {
    let grids = [intervals, 2 * intervals, 4 * intervals];
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(3);
    for g in grids {
        values.push(radial_eigs_on_grid(p, count, g)?);
    }
    Ok((0..count)
        .map(|l| {
            let coarse = (4.0 * values[1][l] - values[0][l]) / 3.0;
            let fine = (4.0 * values[2][l] - values[1][l]) / 3.0;
            RadialEstimate {
                value: fine,
                error: (fine - coarse).abs(),
            }
        })
        .collect())
}

pub fn radial_eigs(p: &RadialProblem, count: usize) -> Result<Vec<RadialEstimate>, RadialError> {
    radial_eigs_with_grid(p, count, DEFAULT_GRID)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialEntry {
    pub mu: f64,
    pub error: f64,
    pub k: usize,
    pub l: usize,
    pub mult: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSpectrum {
    pub form: SpaceForm,
    pub n: usize,
    pub r0: f64,
    pub r1: f64,
    pub entries: Vec<RadialEntry>,
}

impl RadialSpectrum {
    pub fn find(&self, k: usize, l: usize) -> Option<&RadialEntry> {
        self.entries.iter().find(|e| e.k == k && e.l == l)
    }

    /// Eigenvalues repeated by multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.mu, e.mult))
            .collect()
    }
}

/// The smallest `count` distinct radial modes `(k, l)` of the shell.
pub fn shell_spectrum(form: SpaceForm, n: usize, r0: f64, r1: f64, count: usize) -> Result<RadialSpectrum, RadialError> {
    if n < 2 {
        return Err(RadialError::Invalid("shell spectrum needs dimension at least 2".into()));
    }
    if count == 0 {
        return Err(RadialError::Invalid("count must be at least 1".into()));
    }
    let mut entries: Vec<RadialEntry> = Vec::new();
    let mut k = 0;
    loop {
        if k > MAX_DEGREE {
            return Err(RadialError::DegreeCapExceeded(MAX_DEGREE));
        }
        let p = RadialProblem::new(form, n, k, r0, r1)?;
        let est = radial_eigs(&p, count)?;
        if entries.len() >= count && est[0].value > entries[count - 1].mu {
            break;
        }
        let mult = harmonic_multiplicity(k, n);
        entries.extend(est.iter().enumerate().map(|(i, e)| RadialEntry {
            mu: e.value,
            error: e.error,
            k,
            l: i + 1,
            mult,
        }));
        entries.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        k += 1;
    }
    entries.truncate(count);
    Ok(RadialSpectrum {
        form,
        n,
        r0,
        r1,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::f64::consts::PI;

    #[test]
    fn gamma_and_multiplicity() {
        assert_eq!(gamma(0, 5), 0.0);
        assert_eq!(gamma(1, 3), 2.0);
        assert_eq!(gamma(2, 2), 4.0);
        for n in 2..7 {
            assert_eq!(harmonic_multiplicity(0, n), 1);
            assert_eq!(harmonic_multiplicity(1, n), n);
        }
        assert_eq!(harmonic_multiplicity(2, 3), 5);
        assert_eq!(harmonic_multiplicity(5, 2), 2);
    }

    /// Dimension of harmonic polynomials of degree k in n variables computed
    /// independently: rank of the Laplacian map from degree-k monomials onto
    /// degree-(k-2) monomials is full, so the kernel has dimension
    /// #monomials(k) - #monomials(k-2). Count monomials by enumeration.
    #[test]
    fn multiplicity_matches_monomial_count() {
        fn monomials(n: usize, k: usize) -> usize {
            fn rec(vars: usize, left: usize, out: &mut BTreeSet<Vec<usize>>, cur: &mut Vec<usize>) {
                if vars == 0 {
                    if left == 0 {
                        out.insert(cur.clone());
                    }
                    return;
                }
                for e in 0..=left {
                    cur.push(e);
                    rec(vars - 1, left - e, out, cur);
                    cur.pop();
                }
            }
            let mut out = BTreeSet::new();
            rec(n, k, &mut out, &mut Vec::new());
            out.len()
        }
        for n in 2..6 {
            for k in 0..6 {
                let lower = if k >= 2 { monomials(n, k - 2) } else { 0 };
                assert_eq!(harmonic_multiplicity(k, n), monomials(n, k) - lower, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn interval_of_length_pi() {
        let p = RadialProblem::new(SpaceForm::Euclidean, 1, 0, 1.0, 1.0 + PI).unwrap();
        let est = radial_eigs(&p, 4).unwrap();
        for (l, e) in est.iter().enumerate() {
            let exact = ((l + 1) * (l + 1)) as f64;
            assert!((e.value - exact).abs() < 1e-6, "{} vs {exact}", e.value);
        }
    }

    #[test]
    fn pinned_annulus_value() {
        let p = RadialProblem::new(SpaceForm::Euclidean, 2, 1, 0.5, 1.0).unwrap();
        let e = radial_eigs(&p, 1).unwrap()[0];
        assert!(e.error <= 1e-7, "error {}", e.error);
        assert!((e.value - PINNED_MU11).abs() <= 1e-9, "{}", e.value);
    }

    // mu_1(1) of the planar annulus 0.5 < r < 1
    const PINNED_MU11: f64 = 40.872_453_378_663_63;

    #[test]
    fn euclidean_scaling() {
        for k in 0..3 {
            let a = RadialProblem::new(SpaceForm::Euclidean, 3, k, 0.5, 1.0).unwrap();
            let b = RadialProblem::new(SpaceForm::Euclidean, 3, k, 1.0, 2.0).unwrap();
            let ea = radial_eigs(&a, 3).unwrap();
            let eb = radial_eigs(&b, 3).unwrap();
            for (x, y) in ea.iter().zip(&eb) {
                assert!((x.value / 4.0 - y.value).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn second_order_convergence() {
        let p = RadialProblem::new(SpaceForm::Hyperbolic, 3, 1, 0.4, 1.2).unwrap();
        let v: Vec<f64> = [200, 400, 800].iter().map(|&g| radial_eigs_on_grid(&p, 1, g).unwrap()[0]).collect();
        let ratio = (v[0] - v[1]) / (v[1] - v[2]);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    fn sample_shells() -> Vec<(SpaceForm, usize, f64, f64)> {
        let mut out = Vec::new();
        for form in SpaceForm::ALL {
            let r1 = if form == SpaceForm::Euclidean { 1.0 } else { 1.2 };
            for n in [2, 3, 4] {
                for ratio in [0.1, 0.5, 0.9] {
                    out.push((form, n, ratio * r1, r1));
                }
            }
        }
        out
    }

    #[test]
    fn degree_interlacing() {
        for (form, n, r0, r1) in sample_shells() {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=4 {
                let p = RadialProblem::new(form, n, k, r0, r1).unwrap();
                let mu = radial_eigs_on_grid(&p, 1, 400).unwrap()[0];
                assert!(mu > prev, "{form} n={n} r0={r0} k={k}");
                prev = mu;
            }
        }
    }

    #[test]
    fn second_radial_mode_above_first_dipole() {
        for (form, n, r0, r1) in sample_shells() {
            let p0 = RadialProblem::new(form, n, 0, r0, r1).unwrap();
            let p1 = RadialProblem::new(form, n, 1, r0, r1).unwrap();
            let mu20 = radial_eigs(&p0, 2).unwrap()[1].value;
            let mu11 = radial_eigs(&p1, 1).unwrap()[0].value;
            assert!(mu20 > mu11, "{form} n={n} r0={r0}: {mu20} <= {mu11}");
        }
    }

    #[test]
    fn shell_spectrum_structure() {
        for form in SpaceForm::ALL {
            for n in [2, 3] {
                let s = shell_spectrum(form, n, 0.4, 1.0, 6).unwrap();
                assert_eq!((s.entries[0].k, s.entries[0].l, s.entries[0].mult), (0, 1, 1));
                assert_eq!((s.entries[1].k, s.entries[1].l, s.entries[1].mult), (1, 1, n));
                assert!(s.entries.windows(2).all(|w| w[0].mu <= w[1].mu));
                let ex = s.expanded();
                assert!(ex[1..=n].iter().all(|v| *v == ex[1]));
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(RadialProblem::new(SpaceForm::Spherical, 2, 0, 0.5, 3.2).is_err());
        assert!(RadialProblem::new(SpaceForm::Euclidean, 2, 0, 1.0, 0.5).is_err());
        let p = RadialProblem::new(SpaceForm::Euclidean, 2, 0, 0.5, 1.0).unwrap();
        assert!(matches!(
            radial_eigs_on_grid(&p, 10, 40),
            Err(RadialError::GridTooCoarse { .. })
        ));
    }
}
