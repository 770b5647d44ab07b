//! Resolvent norms `‖(iλ − A_h)⁻¹‖` along the imaginary axis.
//!
//! Complex systems are solved in the real embedding
//! `[[−A, −λI], [λI, −A]] (Re U, Im U) = (Re F, Im F)`, stored node-major with
//! the real parts of all blocks of a node followed by their imaginary parts.
//! Norms are taken in the energy norm, so the adjoint of `R = (iλ − A)⁻¹` is
//! `G⁻¹ R^H G` with `G` the Gram matrix of the energy inner product.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::linear_fit;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_max, BandedLu, BandedMatrix};
use crate::operators::{DiscreteGenerator, SystemState};
use crate::spectral::ModeSet;

/// Normwise backward error `‖r‖∞ / (‖M‖∞‖x‖∞ + ‖b‖∞)` every solve must meet.
pub const SOLVE_TOLERANCE: f64 = 1e-10;
/// Pivot ratio below which `iλ − A_h` is treated as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-11;
pub const DEFAULT_NORM_TOL: f64 = 1e-8;
pub const MAX_POWER_ITERATIONS: usize = 1000;
const LANCZOS_RESTART: usize = 40;
/// Minimum number of unflagged points for a growth fit.
pub const MIN_GROWTH_POINTS: usize = 8;

/// Factored `iλ − A_h` with the energy-norm adjoint.
pub struct Resolvent<'g> {
    gen: &'g DiscreteGenerator,
    lambda: f64,
    matrix: BandedMatrix,
    lu: BandedLu,
    stiffness_lu: BandedLu,
    /// `‖M‖∞` and `‖Mᵀ‖∞`
    norms: (f64, f64),
}

impl<'g> Resolvent<'g> {
    pub fn new(gen: &'g DiscreteGenerator, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite"));
        }
        let m = gen.num_blocks();
        let per = 2 * m;
        let bw = gen.interleaved_bandwidth(per);
        let mut mat = BandedMatrix::zeros(gen.state_dim() * 2, bw, bw);
        gen.for_each_entry(|br, bc, r, c, v| {
            mat.add(r * per + br, c * per + bc, -v);
            mat.add(r * per + m + br, c * per + m + bc, -v);
        });
        for p in 0..gen.nodes() {
            for b in 0..m {
                mat.add(p * per + b, p * per + m + b, -lambda);
                mat.add(p * per + m + b, p * per + b, lambda);
            }
        }
        let lu = mat.clone().factor()?;
        if lu.pivot_ratio() < SINGULAR_PIVOT_RATIO {
            return Err(Error::Singular {
                pivot_ratio: lu.pivot_ratio(),
            });
        }
        let k = gen.stiffness();
        let kbw = k.bandwidth();
        let mut kb = BandedMatrix::zeros(k.nrows(), kbw, kbw);
        for (r, c, v) in k.triplets() {
            kb.add(r, c, v);
        }
        let norms = (mat.norm_inf(false), mat.norm_inf(true));
        Ok(Resolvent {
            gen,
            lambda,
            norms,
            matrix: mat,
            lu,
            stiffness_lu: kb.factor()?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Smallest pivot over largest entry of the factorization.
    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio()
    }

    /// Solves `M x = b` (or `Mᵀ x = b`) with one refinement step if needed;
    /// returns the relative residual.
    fn solve_embedded(&self, b: &[f64], transpose: bool) -> Result<(Vec<f64>, f64)> {
        let b_norm = norm_max(b);
        if b_norm == 0.0 {
            return Ok((vec![0.0; b.len()], 0.0));
        }
        let m_norm = if transpose { self.norms.1 } else { self.norms.0 };
        let apply = |x: &[f64]| if transpose { self.matrix.mul_vec_transpose(x) } else { self.matrix.mul_vec(x) };
        let solve = |x: &mut [f64]| {
            if transpose {
                self.lu.solve_transpose_in_place(x)
            } else {
                self.lu.solve_in_place(x)
            }
        };
        let backward = |x: &[f64], r: &[f64]| norm_max(r) / (m_norm * norm_max(x) + b_norm);
        let mut x = b.to_vec();
        solve(&mut x);
        let mut res = residual(&apply(&x), b);
        for _ in 0..2 {
            if backward(&x, &res) <= 1e-2 * SOLVE_TOLERANCE {
                break;
            }
            solve(&mut res);
            x.iter_mut().zip(&res).for_each(|(xi, d)| *xi += d);
            res = residual(&apply(&x), b);
        }
        let err = backward(&x, &res);
        if err > SOLVE_TOLERANCE {
            return Err(Error::Residual {
                residual: err,
                tolerance: SOLVE_TOLERANCE,
            });
        }
        Ok((x, err))
    }

    /// `U = (iλ − A_h)⁻¹ F`.
    pub fn solve(&self, f: &SystemState<Complex64>) -> Result<SystemState<Complex64>> {
        self.check(f)?;
        let (x, _) = self.solve_embedded(&self.embed(f), false)?;
        Ok(self.unembed(&x))
    }

    fn check(&self, f: &SystemState<Complex64>) -> Result<()> {
        let expected = self.gen.state_dim();
        if f.len() != expected || f.num_blocks() != self.gen.num_blocks() {
            return Err(Error::DimensionMismatch {
                what: "resolvent right-hand side",
                expected,
                actual: f.len(),
            });
        }
        Ok(())
    }

    fn embed(&self, f: &SystemState<Complex64>) -> Vec<f64> {
        let m = self.gen.num_blocks();
        let flat = f.to_interleaved();
        let mut out = vec![0.0; 2 * flat.len()];
        for (i, z) in flat.iter().enumerate() {
            let (p, b) = (i / m, i % m);
            out[p * 2 * m + b] = z.re;
            out[p * 2 * m + m + b] = z.im;
        }
        out
    }

    fn unembed(&self, x: &[f64]) -> SystemState<Complex64> {
        let m = self.gen.num_blocks();
        let flat: Vec<Complex64> = (0..x.len() / 2)
            .map(|i| {
                let (p, b) = (i / m, i % m);
                Complex64::new(x[p * 2 * m + b], x[p * 2 * m + m + b])
            })
            .collect();
        SystemState::from_interleaved(&flat, m)
    }

    /// Applies `G` (or `G⁻¹`) block by block to an embedded vector.
    fn gram(&self, x: &[f64], inverse: bool) -> Vec<f64> {
        let m = self.gen.num_blocks();
        let nodes = self.gen.nodes();
        let hd = self.gen.grid().cell_volume();
        let per = 2 * m;
        let mut out = vec![0.0; x.len()];
        for slot in 0..per {
            let b = slot % m;
            let mut col: Vec<f64> = (0..nodes).map(|p| x[p * per + slot]).collect();
            let weight = if b == 0 { self.gen.a() * hd } else { hd };
            if b % 2 == 0 {
                if inverse {
                    self.stiffness_lu.solve_in_place(&mut col);
                    col.iter_mut().for_each(|v| *v /= weight);
                } else {
                    col = self.gen.stiffness().mul_vec(&col);
                    col.iter_mut().for_each(|v| *v *= weight);
                }
            } else if inverse {
                col.iter_mut().for_each(|v| *v /= weight);
            } else {
                col.iter_mut().for_each(|v| *v *= weight);
            }
            for (p, v) in col.into_iter().enumerate() {
                out[p * per + slot] = v;
            }
        }
        out
    }

    /// `R* R x = G⁻¹ M⁻ᵀ G M⁻¹ x`, with the worst solve residual.
    fn normal_apply(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (y, r1) = self.solve_embedded(x, false)?;
        let (w, r2) = self.solve_embedded(&self.gram(&y, false), true)?;
        Ok((self.gram(&w, true), r1.max(r2)))
    }

    /// Largest eigenvalue of the energy-self-adjoint `R* R`, by power
    /// iteration accelerated with restarted Lanczos (full reorthogonalization
    /// in the energy inner product). Each iteration costs one forward and one
    /// adjoint solve.
    pub fn norm(&self, tol: f64, max_iter: usize, seed: u64) -> Result<NormEstimate> {
        if !(tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut start: Vec<f64> = (0..2 * self.gen.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut estimate = 0.0;
        let mut change = f64::INFINITY;
        let mut worst = 0.0f64;
        let mut iterations = 0;
        let mut converged = false;
        'restart: while iterations < max_iter {
            let g_start = self.gram(&start, false);
            let len = dot(&start, &g_start).sqrt();
            let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / len).collect()];
            let mut gbasis: Vec<Vec<f64>> = vec![g_start.iter().map(|v| v / len).collect()];
            let mut alphas: Vec<f64> = Vec::new();
            let mut betas: Vec<f64> = Vec::new();
            loop {
                iterations += 1;
                let j = basis.len() - 1;
                let (mut w, r) = self.normal_apply(&basis[j])?;
                worst = worst.max(r);
                alphas.push(dot(&w, &gbasis[j]));
                for _ in 0..2 {
                    for (q, gq) in basis.iter().zip(&gbasis) {
                        let proj = dot(&w, gq);
                        w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= proj * qi);
                    }
                }
                let gw = self.gram(&w, false);
                let beta = dot(&w, &gw).max(0.0).sqrt();

                let k = alphas.len();
                let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
                for i in 0..k {
                    t[(i, i)] = alphas[i];
                    if i + 1 < k {
                        t[(i, i + 1)] = betas[i];
                        t[(i + 1, i)] = betas[i];
                    }
                }
                let eig = t.symmetric_eigen();
                let top = eig.eigenvalues.imax();
                let theta = eig.eigenvalues[top].max(0.0);
                let ritz_residual = beta * eig.eigenvectors[(k - 1, top)].abs();
                let next = theta.sqrt();
                change = if estimate > 0.0 { (next - estimate).abs() / next } else { f64::INFINITY };
                estimate = next;
                let invariant = beta <= 1e-14 * theta;
                if invariant || (change < tol && ritz_residual <= tol.sqrt() * theta) {
                    converged = true;
                    if invariant {
                        change = change.min(0.0);
                    }
                    break 'restart;
                }
                if iterations >= max_iter {
                    break 'restart;
                }
                if k == LANCZOS_RESTART {
                    // restart from the current top Ritz vector
                    let mut y = vec![0.0; start.len()];
                    for (i, q) in basis.iter().enumerate() {
                        let s = eig.eigenvectors[(i, top)];
                        y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += s * qi);
                    }
                    start = y;
                    continue 'restart;
                }
                betas.push(beta);
                basis.push(w.iter().map(|v| v / beta).collect());
                gbasis.push(gw.iter().map(|v| v / beta).collect());
            }
        }
        Ok(NormEstimate {
            lambda: self.lambda,
            norm: estimate,
            relative_change: change,
            iterations,
            converged,
            worst_residual: worst,
        })
    }
}

fn residual(ax: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
}

/// Outcome of one norm estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub lambda: f64,
    pub norm: f64,
    /// Relative change of the estimate in the last iteration.
    pub relative_change: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `norm` is then the best estimate.
    pub converged: bool,
    /// Largest relative solve residual seen.
    pub worst_residual: f64,
}

/// `(iλ − A_h)⁻¹ F`, residual checked to `1e-10 ‖F‖`.
pub fn resolvent_solve(gen: &DiscreteGenerator, lambda: f64, f: &SystemState<Complex64>) -> Result<SystemState<Complex64>> {
    Resolvent::new(gen, lambda)?.solve(f)
}

/// Energy-norm `‖(iλ − A_h)⁻¹‖`, stopping once the estimate changes by less than `tol` relative.
pub fn resolvent_norm(gen: &DiscreteGenerator, lambda: f64, tol: f64) -> Result<NormEstimate> {
    Resolvent::new(gen, lambda)?.norm(tol, MAX_POWER_ITERATIONS, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `λ = μ_k` for every mode of the set.
    AtModes(ModeSet),
    /// `count` points log-spaced over `[lo, hi]`.
    LogUniform { lo: f64, hi: f64, count: usize },
}

impl LambdaSchedule {
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        match self {
            LambdaSchedule::AtModes(m) => {
                if m.is_empty() {
                    return Err(Error::param("schedule", "mode set is empty"));
                }
                Ok(m.mus.clone())
            }
            &LambdaSchedule::LogUniform { lo, hi, count } => {
                if count == 0 {
                    return Err(Error::param("schedule", "count must be positive"));
                }
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::param("schedule", format!("need 0 < lo <= hi, got [{lo}, {hi}]")));
                }
                if count == 1 {
                    return Ok(vec![lo]);
                }
                let step = (hi / lo).ln() / (count - 1) as f64;
                Ok((0..count).map(|i| lo * (step * i as f64).exp()).collect())
            }
        }
    }
}

/// Frequencies above `min(1, √a) · π/(2h)` are not resolved by the grid.
pub fn frequency_limit(gen: &DiscreteGenerator) -> f64 {
    gen.a().sqrt().min(1.0) * std::f64::consts::PI / (2.0 * gen.grid().h())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub lambda: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSweep {
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    /// Relative change of each power iteration at termination.
    pub estimator_residuals: Vec<f64>,
    pub converged: Vec<bool>,
    /// Above the grid's frequency limit; excluded from fits.
    pub flagged: Vec<bool>,
    pub worst_solve_residual: f64,
    pub frequency_limit: f64,
    pub failures: Vec<SweepFailure>,
}

impl ResolventSweep {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda,norm,residual,flagged")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{}",
                self.lambdas[i], self.norms[i], self.estimator_residuals[i], self.flagged[i]
            )?;
        }
        Ok(())
    }
}

/// Norm estimates over a schedule, computed in parallel. Points whose solve
/// fails are recorded in `failures` and the sweep continues.
pub fn sweep(gen: &DiscreteGenerator, schedule: &LambdaSchedule, tol: f64) -> Result<ResolventSweep> {
    let mut lambdas = schedule.lambdas()?;
    lambdas.sort_by(f64::total_cmp);
    let limit = frequency_limit(gen);
    let results: Vec<(f64, Result<NormEstimate>)> = lambdas
        .par_iter()
        .map(|&l| (l, Resolvent::new(gen, l).and_then(|r| r.norm(tol, MAX_POWER_ITERATIONS, 0))))
        .collect();
    let mut out = ResolventSweep {
        lambdas: Vec::new(),
        norms: Vec::new(),
        estimator_residuals: Vec::new(),
        converged: Vec::new(),
        flagged: Vec::new(),
        worst_solve_residual: 0.0,
        frequency_limit: limit,
        failures: Vec::new(),
    };
    for (lambda, res) in results {
        match res {
            Ok(est) => {
                out.lambdas.push(lambda);
                out.norms.push(est.norm);
                out.estimator_residuals.push(est.relative_change);
                out.converged.push(est.converged);
                out.flagged.push(lambda > limit);
                out.worst_solve_residual = out.worst_solve_residual.max(est.worst_residual);
            }
            Err(e) => out.failures.push(SweepFailure {
                lambda,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `ℓ` in `‖R(iλ)‖ ≈ C λ^ℓ`.
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// `2/ℓ`, the matching polynomial energy decay rate.
    pub implied_decay: f64,
    pub samples: usize,
}

/// Log-log fit of the unflagged sweep points with `lo <= λ <= hi`.
pub fn fit_growth_exponent(sweep: &ResolventSweep, window: (f64, f64)) -> Result<GrowthFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::Fit {
            what: "bounds",
            reason: format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..sweep.len())
        .filter(|&i| !sweep.flagged[i] && sweep.lambdas[i] >= lo && sweep.lambdas[i] <= hi && sweep.norms[i] > 0.0)
        .map(|i| (sweep.lambdas[i].ln(), sweep.norms[i].ln()))
        .unzip();
    if xs.len() < MIN_GROWTH_POINTS {
        return Err(Error::Fit {
            what: "samples",
            reason: format!("{} usable points in [{lo}, {hi}], need {MIN_GROWTH_POINTS}", xs.len()),
        });
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(GrowthFit {
        exponent: slope,
        constant: intercept.exp(),
        r_squared,
        window,
        implied_decay: 2.0 / slope,
        samples: xs.len(),
    })
}
