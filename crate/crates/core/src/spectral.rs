//! Constant-coefficient spectral analysis.
//!
//! For constant `b` and `c`, every Dirichlet mode `φ_k` with `-Δφ_k = μ_k² φ_k`
//! contributes the four roots of
//!
//! ```text
//! P(λ) = λ⁴ + bμ²λ³ + ((1 + a)μ² + c²)λ² + bμ⁴λ + aμ⁴
//! ```
//!
//! to the spectrum. Two of them approach `±iμ` with real part
//! `-c²/(2bμ²)`; this module computes the exact roots, the asymptotic branch
//! and dense spectra of assembled generators for cross-validation.
//!
//! The reduction to a fourth-order problem in `y` is sometimes printed with a
//! stray `α²` in the `λ²(λ² + α²)` term; matching against `P` forces `α² = c²`,
//! which is what [`fourth_order_symbol`] uses.

use std::io::Write;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_grid, CoefficientField, Domain, Grid};
use crate::linalg::CsrMatrix;
use crate::operators::{laplacian_stiffness, weighted_stiffness, DiscreteGenerator, Model};

/// Largest interior-node count per block accepted by the dense eigensolver.
pub const DENSE_NODE_CUTOFF: usize = 2500;

/// Above this frequency the quartic is solved in the rescaled variable `ξ = λ/μ`.
const RESCALE_ABOVE: f64 = 1e3;
const POLISH_ITERATIONS: usize = 5;
/// Bound on the relative backward error `|P(r)| / Σ|c_i||r|^i` after polishing.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    Index(usize),
    Pair(usize, usize),
}

/// Dirichlet frequencies `μ` in ascending order (ties kept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub domain: Domain,
    pub mus: Vec<f64>,
    pub labels: Vec<ModeLabel>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    /// Modes with `from <= k <= to` (1-based positions).
    pub fn range(&self, from: usize, to: usize) -> ModeSet {
        let lo = from.saturating_sub(1).min(self.len());
        let hi = to.min(self.len()).max(lo);
        ModeSet {
            domain: self.domain,
            mus: self.mus[lo..hi].to_vec(),
            labels: self.labels[lo..hi].to_vec(),
        }
    }
}

fn collect_modes(domain: Domain, count: usize, freq: impl Fn(usize) -> f64) -> ModeSet {
    match domain {
        Domain::Interval { .. } => ModeSet {
            domain,
            mus: (1..=count).map(&freq).collect(),
            labels: (1..=count).map(ModeLabel::Index).collect(),
        },
        Domain::Square { .. } => {
            let mut all: Vec<(f64, usize, usize)> = (1..=count)
                .flat_map(|m| (1..=count).map(move |n| (m, n)))
                .map(|(m, n)| ((freq(m).powi(2) + freq(n).powi(2)).sqrt(), m, n))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
            all.truncate(count);
            ModeSet {
                domain,
                mus: all.iter().map(|t| t.0).collect(),
                labels: all.iter().map(|t| ModeLabel::Pair(t.1, t.2)).collect(),
            }
        }
    }
}

/// Continuum frequencies: `kπ/L` on the interval, `π√(m² + n²)/L` on the square.
pub fn dirichlet_modes(domain: Domain, count: usize) -> Result<ModeSet> {
    domain.validate()?;
    if count == 0 {
        return Err(Error::param("count", "need at least one mode"));
    }
    let l = domain.length();
    Ok(collect_modes(domain, count, |k| k as f64 * std::f64::consts::PI / l))
}

/// `μ_{k,h}² = (4/h²) sin²(kπh/(2L))`, the eigenvalues of [`laplacian_stiffness`] along one axis.
pub fn discrete_axis_eigenvalue(grid: &Grid, k: usize) -> f64 {
    let h = grid.h();
    let s = (k as f64 * std::f64::consts::PI * h / (2.0 * grid.length())).sin();
    4.0 / (h * h) * s * s
}

/// Grid-consistent frequencies: square roots of the discrete Laplacian eigenvalues.
pub fn discrete_modes(grid: &Grid, count: usize) -> Result<ModeSet> {
    if count == 0 {
        return Err(Error::param("count", "need at least one mode"));
    }
    let total = grid.num_nodes();
    if count > total {
        return Err(Error::param("count", format!("grid has only {total} discrete modes")));
    }
    let per_axis = count.min(grid.n());
    let mut set = collect_modes(grid.domain(), per_axis.max(if grid.dim() == 2 { grid.n() } else { per_axis }), |k| {
        discrete_axis_eigenvalue(grid, k).sqrt()
    });
    set.mus.truncate(count);
    set.labels.truncate(count);
    Ok(set)
}

/// Coefficients of `P`, leading first.
pub fn characteristic_coefficients(a: f64, b: f64, c: f64, mu: f64) -> [f64; 5] {
    let mu2 = mu * mu;
    [1.0, b * mu2, (1.0 + a) * mu2 + c * c, b * mu2 * mu2, a * mu2 * mu2]
}

/// `(a + λb)μ⁴ + ((1 + a)λ² + bλ³)μ² + λ²(λ² + c²)`, the symbol of the
/// fourth-order problem for `y` on a Dirichlet mode.
pub fn fourth_order_symbol(a: f64, b: f64, c: f64, lambda: Complex64, mu: f64) -> Complex64 {
    let mu2 = mu * mu;
    let l2 = lambda * lambda;
    (lambda * b + a) * (mu2 * mu2) + (l2 * (1.0 + a) + l2 * lambda * b) * mu2 + l2 * (l2 + c * c)
}

fn horner(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(coeffs[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in &coeffs[1..] {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// `|P(r)| / Σ|c_i||r|^i`
fn backward_error(coeffs: &[f64], r: Complex64) -> f64 {
    let (p, _) = horner(coeffs, r);
    let m = r.norm();
    let scale = coeffs.iter().fold(0.0, |acc, c| acc * m + c.abs());
    if scale == 0.0 {
        p.norm()
    } else {
        p.norm() / scale
    }
}

fn companion_roots(coeffs: &[f64; 5]) -> Result<[Complex64; 4]> {
    let lead = coeffs[0];
    let mut m = Matrix4::<f64>::zeros();
    for j in 0..4 {
        m[(0, j)] = -coeffs[j + 1] / lead;
    }
    for i in 1..4 {
        m[(i, i - 1)] = 1.0;
    }
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 1000).ok_or(Error::EigenNonConvergence { dim: 4 })?;
    let e = schur.complex_eigenvalues();
    Ok([e[0], e[1], e[2], e[3]])
}

fn polish(coeffs: &[f64], roots: &mut [Complex64; 4]) {
    for i in 0..4 {
        let mut r = roots[i];
        let separation = roots
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| (o - r).norm())
            .fold(f64::INFINITY, f64::min);
        let start = r;
        let mut err = backward_error(coeffs, r);
        for _ in 0..POLISH_ITERATIONS {
            let (p, dp) = horner(coeffs, r);
            if dp.norm() == 0.0 || p.norm() == 0.0 {
                break;
            }
            let next = r - p / dp;
            let next_err = backward_error(coeffs, next);
            // never let a root wander onto a neighbour
            if !(next_err <= err) || (next - start).norm() > 0.5 * separation {
                break;
            }
            r = next;
            err = next_err;
        }
        roots[i] = r;
    }
}

/// The four roots of `P` for one mode, with their residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticRoots {
    pub mu: f64,
    pub roots: [Complex64; 4],
    /// Relative backward error `|P(r)| / Σ|c_i||r|^i` of each root.
    pub residuals: [f64; 4],
}

impl QuarticRoots {
    /// Root on the `+iμ` branch: positive imaginary part, nearest to `iμ`.
    pub fn branch(&self) -> Result<Complex64> {
        select_branch(&self.roots, self.mu)
    }
}

/// Selects the root with `Im > 0` nearest to `iμ`; ties are an error.
pub fn select_branch(roots: &[Complex64], mu: f64) -> Result<Complex64> {
    let target = Complex64::new(0.0, mu);
    let mut cands: Vec<(f64, Complex64)> = roots.iter().filter(|r| r.im > 0.0).map(|&r| ((r - target).norm(), r)).collect();
    cands.sort_by(|x, y| x.0.total_cmp(&y.0));
    match cands.as_slice() {
        [] => Err(Error::AmbiguousBranch { mu }),
        [only] => Ok(only.1),
        [first, second, ..] => {
            if (second.0 - first.0).abs() <= 1e-12 * mu.max(1.0) {
                Err(Error::AmbiguousBranch { mu })
            } else {
                Ok(first.1)
            }
        }
    }
}

/// Roots of `P` by companion-matrix eigenvalues followed by Newton polishing.
pub fn characteristic_roots(a: f64, b: f64, c: f64, mu: f64) -> Result<QuarticRoots> {
    for (name, v) in [("a", a), ("b", b), ("mu", mu)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    if !c.is_finite() {
        return Err(Error::param("c", "must be finite"));
    }
    let coeffs = characteristic_coefficients(a, b, c, mu);
    let mut roots = if mu > RESCALE_ABOVE {
        // h(ξ) = ζξ⁴ + bξ³ + ((1 + a)ζ + c²ζ³)ξ² + bξ + aζ with ζ = 1/μ
        let z = 1.0 / mu;
        let scaled = [z, b, (1.0 + a) * z + c * c * z * z * z, b, a * z];
        let mut xi = companion_roots(&scaled)?;
        polish(&scaled, &mut xi);
        xi.map(|x| x * mu)
    } else {
        companion_roots(&coeffs)?
    };
    polish(&coeffs, &mut roots);
    let residuals = roots.map(|r| backward_error(&coeffs, r));
    if let Some(&worst) = residuals.iter().max_by(|x, y| x.total_cmp(y)) {
        if !(worst < ROOT_RESIDUAL_TOL) {
            return Err(Error::Polish {
                mu,
                residual: worst,
                tolerance: ROOT_RESIDUAL_TOL,
            });
        }
    }
    Ok(QuarticRoots { mu, roots, residuals })
}

/// Leading-order branches `±iμ − c²/(2bμ²)`.
pub fn asymptotic_branch(_a: f64, b: f64, c: f64, mu: f64) -> (Complex64, Complex64) {
    let re = -c * c / (2.0 * b * mu * mu);
    (Complex64::new(re, mu), Complex64::new(re, -mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    /// 1-based position in the mode set.
    pub k: usize,
    pub mu: f64,
    pub exact: Complex64,
    pub asymptotic: Complex64,
    /// `|Re λ_{1,k}| μ²`
    pub abs_re_times_mu2: f64,
    /// Relative gap to `c²/(2b)`; absolute `|Re λ| μ²` when `c = 0`.
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub records: Vec<SpectrumRecord>,
    /// Largest relative gap over the reported modes.
    pub max_rel_gap: f64,
    /// Largest `|Re λ_{1,k}|` over the reported modes.
    pub max_abs_re: f64,
    /// Gap non-increasing along the tail up to [`GAP_NOISE`].
    pub gap_monotone: bool,
}

/// Slack allowed when checking that the asymptotic gap decreases.
pub const GAP_NOISE: f64 = 1e-9;

impl SpectrumReport {
    /// Largest relative gap over modes `k >= from`.
    pub fn tail_gap(&self, from: usize) -> f64 {
        self.records.iter().filter(|r| r.k >= from).map(|r| r.rel_gap).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,mu,re_exact,im_exact,re_asym,im_asym,abs_re_times_mu2,rel_gap")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.k, r.mu, r.exact.re, r.exact.im, r.asymptotic.re, r.asymptotic.im, r.abs_re_times_mu2, r.rel_gap
            )?;
        }
        Ok(())
    }
}

/// Compares exact branch roots with the leading asymptotics for modes `k >= k_min`.
pub fn verify_asymptotics(a: f64, b: f64, c: f64, modes: &ModeSet, k_min: usize) -> Result<SpectrumReport> {
    let k_min = k_min.max(1);
    if modes.len() < k_min {
        return Err(Error::param("k_min", format!("mode set has {} modes, tail from {k_min} is empty", modes.len())));
    }
    let limit = c * c / (2.0 * b);
    let records = modes
        .mus
        .par_iter()
        .enumerate()
        .skip(k_min - 1)
        .map(|(i, &mu)| {
            let exact = characteristic_roots(a, b, c, mu)?.branch()?;
            let scaled = exact.re.abs() * mu * mu;
            let rel_gap = if limit > 0.0 { (scaled - limit).abs() / limit } else { scaled };
            Ok(SpectrumRecord {
                k: i + 1,
                mu,
                exact,
                asymptotic: asymptotic_branch(a, b, c, mu).0,
                abs_re_times_mu2: scaled,
                rel_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_gap = records.iter().map(|r| r.rel_gap).fold(0.0, f64::max);
    let max_abs_re = records.iter().map(|r| r.exact.re.abs()).fold(0.0, f64::max);
    let gap_monotone = records.windows(2).all(|w| w[1].rel_gap <= w[0].rel_gap + GAP_NOISE);
    Ok(SpectrumReport {
        a,
        b,
        c,
        records,
        max_rel_gap,
        max_abs_re,
        gap_monotone,
    })
}

fn dense_eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let dim = m.nrows();
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100 * dim.max(10)).ok_or(Error::EigenNonConvergence { dim })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// For square grids whose coefficient fields do not depend on `y`, the
/// generator splits into one 1D generator per discrete y-mode: with `κ_m` the
/// y-eigenvalues, `K → K_x + κ_m I` and, for Kelvin-Voigt, `K_b → K_bx + κ_m diag(b)`.
fn separated_generators(gen: &DiscreteGenerator) -> Option<Vec<DiscreteGenerator>> {
    let grid = gen.grid();
    if grid.dim() != 2 {
        return None;
    }
    let damping = gen.damping_field().x_profile()?;
    let coupling = gen.coupling_field().x_profile()?;
    let line = build_grid(Domain::Interval { length: grid.length() }, grid.n()).ok()?;
    let kx = laplacian_stiffness(&line);
    let profile = CoefficientField::from_values(&line, damping.clone()).ok()?;
    let base_damping = match gen.model() {
        Model::KelvinVoigt => weighted_stiffness(&line, &profile).ok()?,
        Model::ViscousCoupled | Model::ViscousSingle => CsrMatrix::diagonal(&damping),
    };
    let reduced = (1..=grid.n())
        .map(|m| {
            let kappa = discrete_axis_eigenvalue(grid, m);
            let shift = CsrMatrix::diagonal(&vec![kappa; grid.n()]);
            let stiffness = kx.add(&shift);
            let damping_m = match gen.model() {
                Model::KelvinVoigt => base_damping.add(&CsrMatrix::diagonal(&damping).scaled(kappa)),
                _ => base_damping.clone(),
            };
            DiscreteGenerator::from_parts(line, gen.a(), gen.model(), stiffness, damping_m, coupling.clone())
        })
        .collect();
    Some(reduced)
}

/// All eigenvalues of `A_h`.
///
/// Square grids with y-independent coefficients are split into independent 1D
/// problems per y-mode, which is exact; everything else goes through one dense
/// Schur decomposition, limited to [`DENSE_NODE_CUTOFF`] nodes per block.
pub fn generator_spectrum(gen: &DiscreteGenerator) -> Result<Vec<Complex64>> {
    if gen.nodes() > DENSE_NODE_CUTOFF {
        return Err(Error::TooLarge {
            dim: gen.nodes(),
            cutoff: DENSE_NODE_CUTOFF,
        });
    }
    if let Some(parts) = separated_generators(gen) {
        let spectra = parts
            .par_iter()
            .map(|g| dense_eigenvalues(g.to_dense()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(spectra.concat());
    }
    dense_eigenvalues(gen.to_dense())
}

/// `max Re λ` over the spectrum of `A_h`.
pub fn spectral_abscissa(gen: &DiscreteGenerator) -> Result<f64> {
    Ok(generator_spectrum(gen)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Greedy nearest-neighbour matching; returns the largest distance, scaled by
/// `max(1, |reference|)`.
pub fn match_spectra(reference: &[Complex64], computed: &[Complex64]) -> f64 {
    assert_eq!(reference.len(), computed.len(), "spectra of different sizes");
    let mut used = vec![false; computed.len()];
    let mut worst: f64 = 0.0;
    for r in reference {
        let (j, d) = computed
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, c)| (j, (c - r).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("enough eigenvalues");
        used[j] = true;
        worst = worst.max(d / r.norm().max(1.0));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{preset_config, Preset};
    use crate::operators::assemble_generator;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn interval_modes() {
        let m = dirichlet_modes(Domain::Interval { length: PI }, 3).unwrap();
        for (a, b) in m.mus.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
        let one = dirichlet_modes(Domain::Interval { length: 1.0 }, 1).unwrap();
        assert_relative_eq!(one.mus[0], PI);
        assert!(dirichlet_modes(Domain::Interval { length: 1.0 }, 0).is_err());
    }

    #[test]
    fn square_modes_keep_ties() {
        let m = dirichlet_modes(Domain::Square { side: PI }, 3).unwrap();
        assert_relative_eq!(m.mus[0], 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(m.mus[1], 5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(m.mus[2], 5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(m.labels, vec![ModeLabel::Pair(1, 1), ModeLabel::Pair(1, 2), ModeLabel::Pair(2, 1)]);
    }

    #[test]
    fn discrete_modes_match_stiffness() {
        let g = build_grid(Domain::Square { side: 1.0 }, 6).unwrap();
        let m = discrete_modes(&g, 36).unwrap();
        let mut eig: Vec<f64> = laplacian_stiffness(&g).to_dense().symmetric_eigenvalues().iter().map(|x| x.sqrt()).collect();
        eig.sort_by(f64::total_cmp);
        for (a, b) in m.mus.iter().zip(&eig) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        assert!(discrete_modes(&g, 37).is_err());
    }

    #[test]
    fn coefficients_at_unit_parameters() {
        let co = characteristic_coefficients(1.0, 1.0, 1.0, PI);
        let p2 = PI * PI;
        let expect = [1.0, p2, 2.0 * p2 + 1.0, p2 * p2, p2 * p2];
        for (a, b) in co.iter().zip(expect) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn frozen_roots_at_unit_parameters() {
        // companion-matrix + Newton oracle run, confirmed in 50-digit arithmetic
        let r = characteristic_roots(1.0, 1.0, 1.0, PI).unwrap();
        let expect = [
            c(-8.622600775334398, 0.0),
            c(-1.1446203597088838, 0.0),
            c(-0.05119163302303837, -3.141175547115728),
            c(-0.05119163302303837, 3.141175547115728),
        ];
        for e in expect {
            let d = r.roots.iter().map(|x| (x - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-12, "{e} missing from {:?}", r.roots);
        }
        assert!(r.residuals.iter().all(|&x| x < 1e-14));
    }

    #[test]
    fn factorization_when_uncoupled() {
        let (a, b, mu) = (1.7, 0.4, 3.3);
        let r = characteristic_roots(a, b, 0.0, mu).unwrap();
        let disc = Complex64::new((b * mu * mu).powi(2) - 4.0 * a * mu * mu, 0.0).sqrt();
        let damped = [(-b * mu * mu + disc) / 2.0, (-b * mu * mu - disc) / 2.0];
        for e in [c(0.0, mu), c(0.0, -mu), damped[0], damped[1]] {
            let d = r.roots.iter().map(|x| (x - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10, "{e}: {:?}", r.roots);
        }
    }

    #[test]
    fn vieta_relations() {
        for &(a, b, cc, mu) in &[(1.0, 1.0, 1.0, 10.0), (0.3, 2.0, -0.7, 55.0), (4.0, 0.1, 3.0, 2000.0)] {
            let r = characteristic_roots(a, b, cc, mu).unwrap();
            let sum: Complex64 = r.roots.iter().sum();
            let prod: Complex64 = r.roots.iter().product();
            assert_relative_eq!(sum.re, -b * mu * mu, max_relative = 1e-8);
            assert!(sum.im.abs() < 1e-8 * b * mu * mu);
            assert_relative_eq!(prod.re, a * mu.powi(4), max_relative = 1e-8);
            assert!(r.residuals.iter().all(|&x| x < 1e-9));
        }
    }

    #[test]
    fn symbol_equals_characteristic_polynomial() {
        for &(a, b, cc, mu) in &[(1.0, 1.0, 1.0, 3.0), (0.3, 2.0, -0.7, 5.5)] {
            for z in [c(0.3, -1.2), c(-2.0, 0.5), c(1.0, 4.0)] {
                let (p, _) = horner(&characteristic_coefficients(a, b, cc, mu), z);
                let s = fourth_order_symbol(a, b, cc, z, mu);
                assert!((s - p).norm() < 1e-12 * p.norm().max(1.0));
            }
        }
    }

    #[test]
    fn symbol_vanishes_at_roots() {
        let (a, b, cc, mu) = (1.0, 1.0, 1.0, 7.0);
        let r = characteristic_roots(a, b, cc, mu).unwrap();
        for root in r.roots {
            let terms = [
                (root * b + a).norm() * mu.powi(4),
                (root * root * (1.0 + a) + root.powi(3) * b).norm() * mu * mu,
                (root * root * (root * root + cc * cc)).norm(),
            ];
            let scale: f64 = terms.iter().sum();
            assert!(fourth_order_symbol(a, b, cc, root, mu).norm() < 1e-8 * scale);
        }
    }

    #[test]
    fn rescaled_route_agrees() {
        // continuity across the switch to the ξ = λ/μ formulation
        let below = characteristic_roots(1.0, 1.0, 1.0, 999.999).unwrap().branch().unwrap();
        let above = characteristic_roots(1.0, 1.0, 1.0, 1000.001).unwrap().branch().unwrap();
        assert!((above.im - below.im - 0.002).abs() < 1e-6);
        assert_relative_eq!(above.re, below.re, max_relative = 1e-4);
        assert_relative_eq!(above.re * 1e6, -0.5, max_relative = 1e-4);
    }

    #[test]
    fn invalid_parameters() {
        assert!(characteristic_roots(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(characteristic_roots(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(characteristic_roots(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(characteristic_roots(1.0, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn asymptotic_formula() {
        let (p, m) = asymptotic_branch(1.0, 1.0, 1.0, 10.0);
        assert_eq!(p, c(-0.005, 10.0));
        assert_eq!(m, c(-0.005, -10.0));
        assert_eq!(asymptotic_branch(1.0, 2.0, 0.0, 4.0), (c(0.0, 4.0), c(0.0, -4.0)));
        let r10 = asymptotic_branch(1.0, 1.0, 1.0, 10.0).0.re;
        let r20 = asymptotic_branch(1.0, 1.0, 1.0, 20.0).0.re;
        assert_relative_eq!(r20, r10 / 4.0, max_relative = 1e-15);
    }

    #[test]
    fn uncoupled_branch_is_on_axis() {
        let modes = dirichlet_modes(Domain::Interval { length: PI }, 40).unwrap();
        let rep = verify_asymptotics(1.0, 1.0, 0.0, &modes, 1).unwrap();
        assert!(rep.records.iter().all(|r| r.exact.re.abs() < 1e-12 * r.mu));
    }

    #[test]
    fn tail_gap_at_mode_one_hundred() {
        let modes = dirichlet_modes(Domain::Interval { length: PI }, 120).unwrap();
        let rep = verify_asymptotics(1.0, 1.0, 1.0, &modes, 20).unwrap();
        let r100 = rep.records.iter().find(|r| r.k == 100).unwrap();
        // 50-digit oracle: Re λ = -5.000000050e-5, gap 1.0e-8
        assert_relative_eq!(r100.exact.re, -5.000000050000001e-05, max_relative = 1e-9);
        assert!(r100.rel_gap < 0.02);
        assert!(rep.gap_monotone);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,mu,re_exact,im_exact,re_asym,im_asym,abs_re_times_mu2,rel_gap\n20,"));
        assert_eq!(text.lines().count(), 102);
    }

    #[test]
    fn empty_tail_rejected() {
        let modes = dirichlet_modes(Domain::Interval { length: PI }, 5).unwrap();
        assert!(verify_asymptotics(1.0, 1.0, 1.0, &modes, 6).is_err());
    }

    #[test]
    fn ambiguous_branch_detected() {
        let roots = [c(-0.1, 1.0), c(0.1, 1.0), c(-1.0, 0.0), c(-2.0, 0.0)];
        assert!(matches!(select_branch(&roots, 1.0), Err(Error::AmbiguousBranch { .. })));
    }

    #[test]
    fn conservative_spectrum_is_imaginary() {
        let g = build_grid(Domain::Interval { length: 1.0 }, 12).unwrap();
        let zero = CoefficientField::constant(&g, 0.0);
        let gen = assemble_generator(&g, 2.0, &zero, &zero).unwrap();
        let spec = generator_spectrum(&gen).unwrap();
        let mut expect = Vec::new();
        for k in 1..=12 {
            let mu = discrete_axis_eigenvalue(&g, k).sqrt();
            for w in [mu, 2f64.sqrt() * mu] {
                expect.push(c(0.0, w));
                expect.push(c(0.0, -w));
            }
        }
        assert!(spec.iter().all(|z| z.re.abs() < 1e-9));
        assert!(match_spectra(&expect, &spec) < 1e-9);
    }

    #[test]
    fn separated_spectrum_matches_dense() {
        let g = build_grid(Domain::Square { side: 1.0 }, 6).unwrap();
        for preset in [Preset::h4_default(1.0), Preset::h5_default(1.0)] {
            let (b, cf) = preset_config(&g, &preset).unwrap();
            let gen = assemble_generator(&g, 1.3, &b, &cf).unwrap();
            let fast = generator_spectrum(&gen).unwrap();
            let dense = dense_eigenvalues(gen.to_dense()).unwrap();
            assert_eq!(fast.len(), dense.len());
            assert!(match_spectra(&dense, &fast) < 1e-9, "{}", match_spectra(&dense, &fast));
            assert!(fast.iter().all(|z| z.re <= 1e-10));
            assert!(spectral_abscissa(&gen).unwrap() < 0.0);
        }
    }

    #[test]
    fn dense_cutoff_enforced() {
        let g = build_grid(Domain::Square { side: 1.0 }, 51).unwrap();
        let f = CoefficientField::from_fn(&g, |p| p[1]);
        let gen = assemble_generator(&g, 1.0, &f, &f).unwrap();
        assert!(matches!(generator_spectrum(&gen), Err(Error::TooLarge { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn roots_closed_under_conjugation(a in 0.1f64..5.0, b in 0.05f64..5.0, cc in -3.0f64..3.0, mu in 0.5f64..200.0) {
            let r = characteristic_roots(a, b, cc, mu).unwrap();
            for root in r.roots {
                let d = r.roots.iter().map(|x| (x - root.conj()).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d <= 1e-9 * root.norm().max(1.0), "{:?}", r.roots);
            }
            // dissipative: no root in the right half plane
            prop_assert!(r.roots.iter().all(|x| x.re < 1e-12 * x.norm().max(1.0)));
        }

        #[test]
        fn roots_move_continuously(a in 0.5f64..2.0, b in 0.5f64..2.0, cc in 0.5f64..2.0, mu in 5.0f64..50.0) {
            let base = characteristic_roots(a, b, cc, mu).unwrap().branch().unwrap();
            let moved = characteristic_roots(a, b, cc + 1e-6, mu).unwrap().branch().unwrap();
            prop_assert!((moved - base).norm() < 1e-5);
        }
    }
}
