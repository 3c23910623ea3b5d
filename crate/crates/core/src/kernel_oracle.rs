//! Brute-force evaluation of the angular kernel
//!
//! ```text
//! K(θ) = C(1−s) ∫₀^∞ dρ / ((ρ²+1−2ρ cosθ)^s ρ^{β+1}),   C(1−s) = Γ(s)/(4^{1−s} π Γ(1−s))
//! ```
//!
//! and of its cosine coefficients. Shares no code with the multiplier series.
//!
//! The half-line is folded onto `(0,1]` by `ρ → 1/ρ` and then mapped by `ρ = e^{−v}`:
//!
//! ```text
//! ∫₀^∞ = ∫₀^∞ D(v,θ)^{−s} (e^{βv} + e^{−(2s+β)v}) dv,   D = (1−e^{−v})² + 4e^{−v} sin²(θ/2)
//! ```
//!
//! which removes both endpoint power singularities. The only remaining difficulty is
//! the peak of width `θ` at `v = 0`, handled by breakpoints graded toward zero.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_scalar};
use crate::specfun::gamma;

/// Cut-off of the `v` integral; beyond it the integrand is summed analytically.
const V_CUTOFF: f64 = 40.0;

/// Smallest graded θ breakpoint.
const THETA_FLOOR: f64 = 1e-15;

/// Tolerances and panel budget for the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Below this angle the θ panels are graded geometrically (ratio 2) toward zero.
    pub theta_singularity_split: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
            theta_singularity_split: 0.5,
        }
    }
}

impl QuadratureConfig {
    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 64 {
            return Err(Error::domain("max_subdivisions must be at least 64"));
        }
        if !(self.theta_singularity_split > THETA_FLOOR && self.theta_singularity_split < PI) {
            return Err(Error::domain("theta_singularity_split must lie in (1e-15, π)"));
        }
        Ok(())
    }

    /// Same budget with both tolerances halved.
    pub fn halved(&self) -> Self {
        QuadratureConfig {
            abs_tol: 0.5 * self.abs_tol,
            rel_tol: 0.5 * self.rel_tol,
            ..*self
        }
    }
}

/// A quadrature value with its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
}

fn check_params(s: f64, beta: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0,1), got {s}")));
    }
    if !(beta > -2.0 * s && beta < 0.0) {
        return Err(Error::regime(format!(
            "kernel integral converges only for -2s < beta < 0, got beta={beta} with s={s}"
        )));
    }
    Ok(())
}

fn normalization(s: f64) -> Result<f64> {
    Ok(gamma(s)? / (4f64.powf(1.0 - s) * PI * gamma(1.0 - s)?))
}

/// Radial integral for one angle; `theta` in `(0, π]`.
fn radial_integral(theta: f64, s: f64, beta: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let sin_half = (0.5 * theta).sin();
    let four_sin2 = 4.0 * sin_half * sin_half;
    let lam1 = -beta;
    let lam2 = 2.0 * s + beta;
    let integrand = |v: f64| {
        let e = (-v).exp();
        let d = (-v).exp_m1().powi(2) + e * four_sin2;
        (-s * d.ln()).exp() * ((-lam1 * v).exp() + (-lam2 * v).exp())
    };
    let mut breaks = vec![0.0];
    let mut b = 0.25 * theta.min(1.0);
    while b < V_CUTOFF {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(V_CUTOFF);
    let (val, err) = integrate_scalar(
        integrand,
        &breaks,
        cfg.abs_tol,
        0.1 * cfg.rel_tol,
        cfg.max_subdivisions,
    )?;
    // D^{-s} = 1 + 2s cosθ e^{-v} + O(e^{-2v}) beyond the cut-off
    let two_s_cos = 2.0 * s * theta.cos();
    let tail = |lam: f64| {
        (-lam * V_CUTOFF).exp() / lam + two_s_cos * (-(lam + 1.0) * V_CUTOFF).exp() / (lam + 1.0)
    };
    Ok(Estimate {
        value: val + tail(lam1) + tail(lam2),
        abs_error: err,
    })
}

/// `K(θ; s, β)` for `−2s < β < 0`.
pub fn kernel_value(theta: f64, s: f64, beta: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_params(s, beta)?;
    cfg.validate()?;
    if !(theta > 1e-8 && theta < 2.0 * PI - 1e-8) {
        return Err(Error::domain(format!("theta={theta} must lie in (1e-8, 2π-1e-8)")));
    }
    let c = normalization(s)?;
    let folded = if theta > PI { 2.0 * PI - theta } else { theta };
    let est = radial_integral(folded, s, beta, cfg)?;
    Ok(Estimate {
        value: c * est.value,
        abs_error: c * est.abs_error,
    })
}

fn theta_breaks(cfg: &QuadratureConfig) -> Vec<f64> {
    let split = cfg.theta_singularity_split;
    let mut graded = vec![];
    let mut t = split;
    while t > THETA_FLOOR {
        graded.push(t);
        t *= 0.5;
    }
    let mut breaks = vec![0.0];
    breaks.extend(graded.into_iter().rev());
    let panels = ((PI - split) / 0.25).ceil().max(1.0) as usize;
    for i in 1..=panels {
        breaks.push(split + (PI - split) * i as f64 / panels as f64);
    }
    breaks
}

/// Cosine coefficients `(1/2π)∫₀^{2π} K(θ) cos(mθ) dθ` for every `m` in `modes`.
pub fn kernel_fourier_coeffs(
    modes: &[i64],
    s: f64,
    beta: f64,
    cfg: &QuadratureConfig,
) -> Result<Vec<Estimate>> {
    check_params(s, beta)?;
    cfg.validate()?;
    let c = normalization(s)?;
    let failure = std::cell::RefCell::new(None);
    let breaks = theta_breaks(cfg);
    let est = integrate(
        |theta, out: &mut [f64]| {
            let k = match radial_integral(theta, s, beta, cfg) {
                Ok(e) => e.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            };
            for (o, &m) in out.iter_mut().zip(modes) {
                *o = k * (m as f64 * theta).cos();
            }
        },
        modes.len(),
        &breaks,
        cfg.abs_tol,
        cfg.rel_tol,
        cfg.max_subdivisions,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est
        .value
        .iter()
        .zip(&est.error)
        .map(|(v, e)| Estimate {
            value: c * v / PI,
            abs_error: c * e / PI,
        })
        .collect())
}

/// Single cosine coefficient; see [`kernel_fourier_coeffs`].
pub fn kernel_fourier_coeff(m: i64, s: f64, beta: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    Ok(kernel_fourier_coeffs(&[m], s, beta, cfg)?[0])
}

/// One row of a series-versus-quadrature comparison.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OracleRow {
    pub m: i64,
    pub oracle: f64,
    pub series: f64,
    pub rel_diff: f64,
}

/// Compare the quadrature coefficients with the multiplier series for `m = 0..=m_max`.
pub fn oracle_check(s: f64, beta: f64, m_max: i64, cfg: &QuadratureConfig) -> Result<Vec<OracleRow>> {
    let modes: Vec<i64> = (0..=m_max).collect();
    let quad = kernel_fourier_coeffs(&modes, s, beta, cfg)?;
    let p = crate::multiplier::Params::new(s, beta, 0)?;
    modes
        .iter()
        .zip(quad)
        .map(|(&m, q)| {
            let series = crate::multiplier::khat(&p, m, crate::multiplier::DEFAULT_TOL)?;
            Ok(OracleRow {
                m,
                oracle: q.value,
                series,
                rel_diff: (q.value - series).abs() / series,
            })
        })
        .collect()
}
