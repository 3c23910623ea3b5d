//! Dynamical check of non-existence.
//!
//! Any solution satisfies `g = c w|w|^{2s/β}` with `g = −𝓛w`, hence the pointwise
//! relation `T = β w g′ − (β+2s) g w′ = 0`, independently of `c`. The probe minimizes
//! `E(w) = ½∫T²` from random seeds. Where no nontrivial solutions exist, every run
//! should shrink to `w = 0`, or settle on the line `w = C sin θ` when that line is
//! stationary (`μ_1 = 0`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplier::{build_table, Params, DEFAULT_TOL};
use crate::spectral::{sobolev_norm, SineSeries, Transform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub runs: usize,
    pub m_max: usize,
    /// Power of two `>= 8 m_max`, so that `T²` is integrated exactly.
    pub n_grid: usize,
    pub max_iters: usize,
    pub rng_seed: u64,
    /// Relative distance from the line `C sin θ` that counts as on it.
    pub line_tol: f64,
    /// Directions with `E(ŵ) <= residual_floor` on the unit sphere are not collapsed.
    pub residual_floor: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            runs: 20,
            m_max: 32,
            n_grid: 256,
            max_iters: 20_000,
            rng_seed: 0,
            line_tol: 1e-6,
            residual_floor: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    /// The direction reached has `E(ŵ) > 0`, so the exact radial minimization of
    /// `E(ρŵ) = ρ⁴E(ŵ)` lands on `w = 0`.
    Collapsed,
    /// Converged onto `w = C sin θ` with `C ≠ 0`.
    IrrotationalLine,
    /// A direction with vanishing `E` away from the irrotational line.
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub seed: u64,
    pub outcome: ProbeOutcome,
    pub iterations: usize,
    pub final_norm: f64,
    /// `E(ŵ)` at the final direction `ŵ`, `‖ŵ‖_{H^s} = 1`.
    pub scaled_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub s: f64,
    pub beta: f64,
    pub m0: usize,
    pub runs: Vec<ProbeRun>,
}

impl ProbeReport {
    /// Every run collapsed or reached the irrotational line.
    pub fn consistent_with_nonexistence(&self) -> bool {
        self.runs.iter().all(|r| r.outcome != ProbeOutcome::Undecided)
    }
}

struct Setup {
    m0: usize,
    s: f64,
    beta: f64,
    mu: Vec<f64>,
    tf: Transform,
    line: bool,
}

/// Grid values of `u`, `u′`, `𝓛u`, `(𝓛u)′` for coefficients `a`.
struct Fields {
    w: Vec<f64>,
    dw: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl Setup {
    fn fields(&self, a: &[f64]) -> Fields {
        let m = |i: usize| (self.m0 + i) as f64;
        let da: Vec<f64> = a.iter().enumerate().map(|(i, x)| m(i) * x).collect();
        let b: Vec<f64> = a.iter().zip(&self.mu).map(|(x, mu)| mu * x).collect();
        let db: Vec<f64> = b.iter().enumerate().map(|(i, x)| m(i) * x).collect();
        Fields {
            w: self.tf.synth_sin(self.m0, a),
            dw: self.tf.synth_cos(self.m0, &da),
            g: self.tf.synth_sin(self.m0, &b),
            dg: self.tf.synth_cos(self.m0, &db),
        }
    }

    /// `T(u, v) = β u (𝓛v)′ − (β+2s)(𝓛v) u′`.
    fn pairing(&self, u: &Fields, v: &Fields) -> Vec<f64> {
        let k = self.beta + 2.0 * self.s;
        (0..u.w.len())
            .map(|j| self.beta * u.w[j] * v.dg[j] - k * v.g[j] * u.dw[j])
            .collect()
    }

    fn energy(&self, t: &[f64]) -> f64 {
        0.5 * self.tf.weight() * t.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, f: &Fields, t: &[f64]) -> Vec<f64> {
        let modes: Vec<usize> = (self.m0..self.m0 + self.mu.len()).collect();
        let prod = |x: &[f64]| -> Vec<f64> { t.iter().zip(x).map(|(a, b)| a * b).collect() };
        let sin = |x: &[f64]| self.tf.analyze_sin_modes(&prod(x), &modes);
        let cos = |x: &[f64]| -> Vec<f64> {
            self.tf
                .analyze_cos_modes(&prod(x), &modes)
                .into_iter()
                .zip(&modes)
                .map(|(v, &m)| v * m as f64 / std::f64::consts::PI.sqrt())
                .collect()
        };
        let (t_dg, t_w, t_dw, t_g) = (sin(&f.dg), cos(&f.w), sin(&f.dw), cos(&f.g));
        let k = self.beta + 2.0 * self.s;
        (0..self.mu.len())
            .map(|l| {
                let mu = self.mu[l];
                self.beta * (t_dg[l] + mu * t_w[l]) - k * (mu * t_dw[l] + t_g[l])
            })
            .collect()
    }

    fn norm(&self, a: &[f64]) -> f64 {
        sobolev_norm(
            &SineSeries {
                m0: self.m0,
                coeffs: a.to_vec(),
            },
            self.s,
        )
    }

    /// Distance of `w` from the line `C sin θ`, relative to `‖w‖`.
    fn off_line(&self, a: &[f64]) -> f64 {
        let mut b = a.to_vec();
        b[0] = 0.0;
        self.norm(&b) / self.norm(a)
    }
}

fn dot_g(weights: &[f64], x: &[f64], y: &[f64]) -> f64 {
    weights.iter().zip(x.iter().zip(y)).map(|(w, (p, q))| w * p * q).sum()
}

fn run(setup: &Setup, seed: u64, cfg: &ProbeConfig) -> ProbeRun {
    let dim = setup.mu.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..dim)
        .map(|i| (1.0 + ((setup.m0 + i) as f64).powi(2)).powf(setup.s))
        .collect();
    let precond: Vec<f64> = (0..dim)
        .map(|i| (1.0 + ((setup.m0 + i) as f64).powi(2)).powf(-(2.0 * setup.s + 1.0)))
        .collect();
    let normalize = |a: &mut Vec<f64>| {
        let n = dot_g(&weights, a, a).sqrt();
        a.iter_mut().for_each(|x| *x /= n);
    };
    let quotient = |a: &[f64]| {
        let f = setup.fields(a);
        setup.energy(&setup.pairing(&f, &f)) / dot_g(&weights, a, a).powi(2)
    };
    let mut a: Vec<f64> = (0..dim)
        .map(|i| {
            let m = (setup.m0 + i) as f64;
            rng.gen_range(-1.0..1.0) * m.powf(-(setup.s + 1.0))
        })
        .collect();
    normalize(&mut a);

    // angular phase: descend Q(â) = E(â) on the unit H^s sphere
    let mut q = quotient(&a);
    let mut tau: f64 = 1.0;
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < cfg.max_iters {
        if setup.line && setup.off_line(&a) < cfg.line_tol {
            break;
        }
        let f = setup.fields(&a);
        let t = setup.pairing(&f, &f);
        let e = setup.energy(&t);
        let grad = setup.gradient(&f, &t);
        let mut d: Vec<f64> = (0..dim)
            .map(|i| -precond[i] * (grad[i] - 4.0 * e * weights[i] * a[i]))
            .collect();
        let radial = dot_g(&weights, &a, &d);
        d.iter_mut().zip(&a).for_each(|(x, y)| *x -= radial * y);
        let slope: f64 = d
            .iter()
            .zip(&grad)
            .zip(weights.iter().zip(&a))
            .map(|((di, gi), (wi, ai))| di * (gi - 4.0 * e * wi * ai))
            .sum();
        iterations += 1;
        if !(slope < 0.0) {
            break;
        }
        tau = (2.0 * tau).min(1e6);
        let accepted = loop {
            let mut trial: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + tau * y).collect();
            normalize(&mut trial);
            let qt = quotient(&trial);
            if qt <= q + 1e-4 * tau * slope {
                break Some((trial, qt));
            }
            tau *= 0.5;
            if tau < 1e-16 {
                break None;
            }
        };
        let Some((trial, qt)) = accepted else { break };
        stalled = if q - qt <= 1e-12 * q { stalled + 1 } else { 0 };
        a = trial;
        q = qt;
        if stalled >= 20 {
            break;
        }
    }

    // radial phase: E(ρâ) = ρ⁴Q(â) is minimized at ρ = 0 unless Q(â) vanishes
    let on_line = setup.line && setup.off_line(&a) < cfg.line_tol;
    let (outcome, final_norm) = if on_line {
        (ProbeOutcome::IrrotationalLine, 1.0)
    } else if q > cfg.residual_floor {
        (ProbeOutcome::Collapsed, 0.0)
    } else {
        (ProbeOutcome::Undecided, 1.0)
    };
    ProbeRun {
        seed,
        outcome,
        iterations,
        final_norm,
        scaled_residual: q,
    }
}

/// Minimize `½∫T²` from `cfg.runs` random seeds at `(s, β, m0)`.
pub fn nonexistence_probe(s: f64, beta: f64, m0: usize, cfg: &ProbeConfig) -> Result<ProbeReport> {
    if cfg.runs == 0 || cfg.max_iters == 0 || !(cfg.line_tol > 0.0) {
        return Err(Error::domain("runs, max_iters and line_tol must be positive"));
    }
    if !cfg.n_grid.is_power_of_two() || cfg.n_grid < 8 * cfg.m_max {
        return Err(Error::domain(format!(
            "probe grid {} must be a power of two >= 8 m_max = {}",
            cfg.n_grid,
            8 * cfg.m_max
        )));
    }
    if m0 == 0 || cfg.m_max < m0 {
        return Err(Error::domain("need 1 <= m0 <= m_max"));
    }
    let table = build_table(&Params::new(s, beta, m0)?, cfg.m_max, DEFAULT_TOL)?;
    let setup = Setup {
        m0,
        s,
        beta,
        line: m0 == 1 && table.mu[0] == 0.0,
        mu: table.mu,
        tf: Transform::new(cfg.n_grid, false),
    };
    let runs = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|k| run(&setup, cfg.rng_seed.wrapping_add(k), cfg))
        .collect();
    Ok(ProbeReport { s, beta, m0, runs })
}
