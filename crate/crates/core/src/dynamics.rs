//! Time integration and decay fits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::linalg::{BandedLu, BandedMatrix};
use crate::operators::{DiscreteGenerator, SystemState};
use crate::spectral::spectral_abscissa;

const REFINE_ABOVE: f64 = 1e-13;
/// Relative residual accepted from the midpoint solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Implicit midpoint stepper for `U' = A_h U`, factored once per `dt`.
pub struct MidpointStepper<'g> {
    gen: &'g DiscreteGenerator,
    dt: f64,
    lhs: BandedMatrix,
    rhs: BandedMatrix,
    lu: BandedLu,
}

impl<'g> MidpointStepper<'g> {
    pub fn new(gen: &'g DiscreteGenerator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        Self::signed(gen, dt)
    }

    /// Also accepts `dt < 0`, for running a conservative system backwards.
    pub(crate) fn signed(gen: &'g DiscreteGenerator, dt: f64) -> Result<Self> {
        if dt == 0.0 || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be nonzero and finite, got {dt}")));
        }
        let lhs = gen.banded_shifted(1.0, -0.5 * dt);
        let rhs = gen.banded_shifted(1.0, 0.5 * dt);
        let lu = lhs.clone().factor()?;
        Ok(MidpointStepper { gen, dt, lhs, rhs, lu })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step on a node-major state vector.
    fn step_interleaved(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.rhs.mul_vec(x);
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let mut out = self.lu.solve(&r);
        let mut res = residual(&self.lhs, &out, &r);
        if res > REFINE_ABOVE * scale {
            let mut corr: Vec<f64> = self.lhs.mul_vec(&out).iter().zip(&r).map(|(ax, b)| b - ax).collect();
            self.lu.solve_in_place(&mut corr);
            out.iter_mut().zip(&corr).for_each(|(o, c)| *o += c);
            res = residual(&self.lhs, &out, &r);
        }
        if res > SOLVE_TOLERANCE * scale {
            return Err(Error::Residual {
                residual: res / scale,
                tolerance: SOLVE_TOLERANCE,
            });
        }
        Ok(out)
    }

    pub fn step(&self, state: &SystemState) -> Result<SystemState> {
        self.gen.apply(state)?; // shape check
        let next = self.step_interleaved(&state.to_interleaved())?;
        Ok(SystemState::from_interleaved(&next, self.gen.num_blocks()))
    }
}

fn residual(m: &BandedMatrix, x: &[f64], b: &[f64]) -> f64 {
    m.mul_vec(x).iter().zip(b).fold(0.0f64, |acc, (ax, bv)| acc.max((ax - bv).abs()))
}

/// Solves `(I − dt/2 A_h) U₁ = (I + dt/2 A_h) U₀`.
///
/// Factors the midpoint matrix on every call; use [`MidpointStepper`] for
/// repeated steps.
pub fn step_implicit_midpoint(gen: &DiscreteGenerator, state: &SystemState, dt: f64) -> Result<SystemState> {
    MidpointStepper::new(gen, dt)?.step(state)
}

/// Sampled energy history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Energy rate at each sampled state (nonpositive).
    pub dissipations: Vec<f64>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.energies.first().copied().unwrap_or(0.0)
    }

    pub fn final_energy(&self) -> f64 {
        self.energies.last().copied().unwrap_or(0.0)
    }

    /// `E_{k+1} <= E_k + slack · E_0` for every sample.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        let tol = slack * self.initial_energy();
        self.energies.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// First sampled time with `E(t) < ratio · E(0)`.
    pub fn first_time_below(&self, ratio: f64) -> Option<f64> {
        let e0 = self.initial_energy();
        self.times.iter().zip(&self.energies).find(|(_, &e)| e < ratio * e0).map(|(&t, _)| t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,energy,dissipation")?;
        for i in 0..self.len() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", self.times[i], self.energies[i], self.dissipations[i])?;
        }
        Ok(())
    }
}

/// Integrates to `t_final` with steps of `dt`, sampling every `sample_every` steps.
///
/// The last step is shortened so that the trace ends exactly at `t_final`,
/// and the final state is always sampled.
pub fn simulate(gen: &DiscreteGenerator, initial: &SystemState, dt: f64, t_final: f64, sample_every: usize) -> Result<EnergyTrace> {
    simulate_until(gen, initial, dt, t_final, sample_every, |_, _| false).map(|(trace, _)| trace)
}

/// [`simulate`] with an early exit: stops after the first sample for which
/// `stop(t, E)` holds. Also returns the final state.
pub fn simulate_until(
    gen: &DiscreteGenerator,
    initial: &SystemState,
    dt: f64,
    t_final: f64,
    sample_every: usize,
    mut stop: impl FnMut(f64, f64) -> bool,
) -> Result<(EnergyTrace, SystemState)> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::param("t_final", format!("must be positive, got {t_final}")));
    }
    if sample_every == 0 {
        return Err(Error::param("sample_every", "must be at least 1"));
    }
    let stepper = MidpointStepper::new(gen, dt)?;
    gen.apply(initial)?;
    let blocks = gen.num_blocks();
    let full_steps = ((t_final / dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = t_final - full_steps as f64 * dt;
    let last = if remainder > 1e-9 * dt {
        Some(MidpointStepper::new(gen, remainder)?)
    } else {
        None
    };
    let total = full_steps + usize::from(last.is_some());

    let mut trace = EnergyTrace {
        times: Vec::new(),
        energies: Vec::new(),
        dissipations: Vec::new(),
    };
    let mut record = |trace: &mut EnergyTrace, t: f64, x: &[f64]| -> Result<bool> {
        let s = SystemState::from_interleaved(x, blocks);
        let e = gen.energy(&s)?;
        trace.times.push(t);
        trace.energies.push(e);
        trace.dissipations.push(gen.dissipation(&s)?);
        Ok(stop(t, e))
    };
    let mut x = initial.to_interleaved();
    let mut t = 0.0;
    if record(&mut trace, t, &x)? {
        return Ok((trace, initial.clone()));
    }
    for k in 1..=total {
        if k <= full_steps {
            x = stepper.step_interleaved(&x)?;
            t = k as f64 * dt;
        } else if let Some(s) = &last {
            x = s.step_interleaved(&x)?;
            t = t_final;
        }
        if (k % sample_every == 0 || k == total) && record(&mut trace, t, &x)? {
            break;
        }
    }
    Ok((trace, SystemState::from_interleaved(&x, blocks)))
}

/// `u = Π sin(π x_i / L)`, all other blocks zero.
pub fn bump_initial(gen: &DiscreteGenerator) -> SystemState {
    let grid: &Grid = gen.grid();
    let l = grid.length();
    let mut s = gen.zero_state();
    for (node, p) in grid.coordinates().enumerate() {
        let mut v = (std::f64::consts::PI * p[0] / l).sin();
        if grid.dim() == 2 {
            v *= (std::f64::consts::PI * p[1] / l).sin();
        }
        s.u[node] = v;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    /// `E ≈ C t^{−α}`
    Polynomial,
    /// `E ≈ C e^{−θ t}`
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `α` or `θ`.
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Set when the window was cut short at an exactly vanishing energy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_at: Option<f64>,
}

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares line `y = intercept + slope x`, with `r²`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

/// Fits `model` to the samples with `lo <= t <= hi`.
pub fn fit_decay_rate(trace: &EnergyTrace, window: (f64, f64), model: DecayModel) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Fit {
            what: "bounds",
            reason: format!("[{lo}, {hi}] is not a finite interval"),
        });
    }
    if model == DecayModel::Polynomial && lo <= 0.0 {
        return Err(Error::Fit {
            what: "bounds",
            reason: "polynomial fit needs t > 0".into(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated_at = None;
    for (&t, &e) in trace.times.iter().zip(&trace.energies) {
        if t < lo || t > hi {
            continue;
        }
        if e <= 0.0 {
            truncated_at = Some(t);
            break;
        }
        xs.push(match model {
            DecayModel::Polynomial => t.ln(),
            DecayModel::Exponential => t,
        });
        ys.push(e.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit {
            what: "samples",
            reason: match truncated_at {
                Some(t) => format!("energy reaches zero at t = {t}, leaving {} positive samples", xs.len()),
                None => format!("{} samples in [{lo}, {hi}], need {MIN_FIT_SAMPLES}", xs.len()),
            },
        });
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        model,
        exponent: -slope,
        constant: intercept.exp(),
        r_squared,
        window,
        samples: xs.len(),
        truncated_at,
    })
}

/// Where the semi-discrete system stops behaving like the PDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCaveat {
    /// `max Re λ(A_h)`; exactly 0 for a conservative system.
    pub abscissa: f64,
    /// `1/|abscissa|`; infinite (serialized as null) when the abscissa is 0.
    pub t_star: f64,
}

impl DecayCaveat {
    /// `[0.1 t*, 0.8 t*]`, or `None` when `t*` is infinite.
    pub fn default_window(&self) -> Option<(f64, f64)> {
        self.t_star.is_finite().then(|| (0.1 * self.t_star, 0.8 * self.t_star))
    }
}

/// Spectral abscissa of `A_h` and the horizon `t* = 1/|abscissa|`.
pub fn semidiscrete_decay_caveat(gen: &DiscreteGenerator) -> Result<DecayCaveat> {
    let abscissa = if gen.is_conservative() { 0.0 } else { spectral_abscissa(gen)?.min(0.0) };
    let t_star = if abscissa < 0.0 { 1.0 / abscissa.abs() } else { f64::INFINITY };
    Ok(DecayCaveat { abscissa, t_star })
}
