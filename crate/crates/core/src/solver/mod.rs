//! Critical points of the energy in each existence regime.
//!
//! * minimizing regime: energy descent from `a·e_{m0}`, then Newton;
//! * mountain-pass regime: minimize the Nehari quotient `B(w,w)/(∫|w|^p)^{2/p}`,
//!   rescale by homogeneity, then Newton;
//! * saddle regime: alternate minimization over the positive modes with Newton steps
//!   on the reduced function of the non-positive modes, then Newton.
//!
//! Every iteration stays inside the symmetry class of its seed (see
//! [`iterate::symmetry_class`]), which the nonlinearity preserves exactly.

mod branch;
mod iterate;
mod nonexistence;
mod regime;

pub use branch::{solution_branch, BranchMethod, BranchPoint};
pub use nonexistence::{nonexistence_probe, ProbeConfig, ProbeOutcome, ProbeReport, ProbeRun};
pub use regime::{
    classify_regime, regime_map, BetaInterval, IntervalKind, Regime, RegimeLabel, RegimeMap,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolverFailure};
use crate::multiplier::{build_table, least_squares_slope, MultiplierTable, Params, DEFAULT_TOL};
use crate::spectral::{sobolev_norm, to_grid, Problem, SineSeries};
use iterate::Trace;

/// Profiles with `‖w‖_{H^s}` at or below this are treated as the trivial solution.
pub const COLLAPSE_NORM: f64 = 1e-6;

/// Hard bound of the weak-form check, relative to `‖w‖_{H^s}`.
pub const WEAK_FORM_TOL: f64 = 1e-8;

/// Hard bound on the relative ℓ² change under doubled resolution.
pub const REFINEMENT_TOL: f64 = 1e-6;

/// Slack subtracted from the Hölder exponent in the soft decay check.
pub const DECAY_SLACK: f64 = 0.75;

/// Soft bound on the energy fraction in the last octave of modes.
pub const TAIL_ENERGY_TOL: f64 = 1e-10;

/// Relative change of `∫|w|^p` under grid doubling below which the quadrature is settled.
pub const MASS_REFINE_TOL: f64 = 1e-9;

/// Largest grid the quadrature check doubles up to.
pub const MAX_QUADRATURE_GRID: usize = 1 << 18;

const MAX_RESTARTS: usize = 3;

/// Relative size below which the non-positive part of a saddle solution counts as absent.
const Y_NEGLIGIBLE: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub m_max: usize,
    /// Starting quadrature grid for the nonlinear terms, a power of two `>= 4 m_max`;
    /// doubled until `∫|w|^p` settles to [`MASS_REFINE_TOL`].
    pub n_grid: usize,
    pub c: f64,
    /// Stopping tolerance on `‖I'[w]‖_{H^{-s}}`.
    pub tol_grad: f64,
    /// Iteration cap for each descent phase.
    pub max_iters: usize,
    /// Smoothing of `|w|^{2s/β}` in the Jacobian, relative to `max|w|`.
    pub epsilon_reg: f64,
    /// Seed amplitude; `0` selects the balanced amplitude.
    pub seed_amplitude: f64,
    /// Pseudo-arclength sub-steps used by [`solution_branch`] when natural continuation
    /// fails.
    pub continuation_steps: usize,
    pub rng_seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            m_max: 1024,
            n_grid: 8192,
            c: 1.0,
            tol_grad: 1e-10,
            max_iters: 20_000,
            epsilon_reg: 1e-12,
            seed_amplitude: 0.0,
            continuation_steps: 8,
            rng_seed: 0,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.tol_grad > 0.0 && self.epsilon_reg >= 0.0) {
            return Err(Error::domain("c and tol_grad must be positive, epsilon_reg non-negative"));
        }
        if self.max_iters == 0 || self.seed_amplitude < 0.0 {
            return Err(Error::domain("max_iters must be positive and seed_amplitude non-negative"));
        }
        Ok(())
    }

    /// Same settings at doubled resolution.
    pub fn refined(&self) -> Self {
        SolveConfig {
            m_max: 2 * self.m_max,
            n_grid: 2 * self.n_grid,
            ..self.clone()
        }
    }
}

/// A converged profile pair with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub s: f64,
    pub beta: f64,
    pub m0: usize,
    pub m_max: usize,
    pub n_grid: usize,
    pub c: f64,
    pub regime: Regime,
    pub w: SineSeries,
    /// Projection of `c·w|w|^{2s/β}` onto the stored modes.
    pub g: SineSeries,
    pub grad_norm: f64,
    #[serde(rename = "I_value")]
    pub i_value: f64,
    /// `max_θ |−𝓛w − g|` on the grid.
    pub pointwise_residual: f64,
    /// Decay rate `κ` of the coefficient envelope, `|a_m| ≈ m^{−κ}`.
    pub decay_slope: f64,
    pub tail_energy_ratio: f64,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl SolveResult {
    pub fn params(&self) -> Params {
        Params {
            s: self.s,
            beta: self.beta,
            m0: self.m0,
        }
    }

    /// `‖w‖_{H^s}`.
    pub fn norm(&self) -> f64 {
        sobolev_norm(&self.w, self.s)
    }
}

/// Hölder exponent `2s + 1 + 2s/β` of the profiles.
pub fn holder_exponent(s: f64, beta: f64) -> f64 {
    2.0 * s + 1.0 + 2.0 * s / beta
}

fn make_problem(s: f64, beta: f64, m0: usize, cfg: &SolveConfig) -> Result<Problem> {
    let table = build_table(&Params::new(s, beta, m0)?, cfg.m_max, DEFAULT_TOL)?;
    Problem::new(table, cfg.c, cfg.n_grid)
}

/// Amplitude at which the two homogeneous terms of `I[a e_k]` balance.
fn balanced_amplitude(prob: &Problem, k: usize) -> f64 {
    let mut e = vec![0.0; prob.dim()];
    e[k] = 1.0;
    let mass = prob.mass(&e);
    let mu = prob.mu()[k];
    (prob.c * mass / mu).powf(1.0 / (2.0 - prob.exponent()))
}

fn failure(prob: &Problem, a: &[f64], trace: &Trace, message: String) -> Error {
    let r = prob.residual(a);
    Error::Solver(Box::new(SolverFailure {
        message,
        best: prob.series(a),
        grad_norm: prob.dual_norm(&r),
        trace: trace.grad.clone(),
    }))
}

/// Critical point of the energy for `(s, β, m0)`.
pub fn solve(s: f64, beta: f64, m0: usize, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let regime = classify_regime(s, beta, m0)?;
    if !regime.label.is_solvable() {
        return Err(Error::regime(format!(
            "no critical points are computed for {:?}: {}",
            regime.label, regime.detail
        )));
    }
    let base = make_problem(s, beta, m0, cfg)?;
    if base.prefactor() <= 0.0 {
        return Err(Error::Consistency("nonlinear prefactor must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut amp_factor = 1.0;
    let mut last_err = None;
    for attempt in 0..=MAX_RESTARTS {
        let mut trace = Trace::default();
        let outcome = match regime.label {
            RegimeLabel::ExistMinimizing => minimizing(&base, cfg, amp_factor, &mut trace),
            RegimeLabel::ExistMountainPass | RegimeLabel::OpenGap => {
                mountain_pass(&base, cfg, amp_factor, attempt, &mut rng, &mut trace)
            }
            RegimeLabel::ExistSaddle => saddle(&base, cfg, amp_factor, &mut trace),
            _ => unreachable!(),
        };
        match outcome {
            Ok((prob, a)) => {
                let res = finish(&base, &prob, &a, regime.clone(), trace.iterations, cfg)?;
                if res.norm() > COLLAPSE_NORM {
                    return settle_quadrature(res, cfg);
                }
                last_err = Some(failure(&prob, &a, &trace, "iteration collapsed to w = 0".into()));
            }
            Err(e) => last_err = Some(e),
        }
        amp_factor *= 4.0;
    }
    Err(last_err.unwrap())
}

/// Newton from a given profile, without any descent phase.
pub fn solve_seeded(
    s: f64,
    beta: f64,
    m0: usize,
    seed: &SineSeries,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    settle_quadrature(newton_from(s, beta, m0, seed, cfg)?, cfg)
}

fn newton_from(
    s: f64,
    beta: f64,
    m0: usize,
    seed: &SineSeries,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    let regime = classify_regime(s, beta, m0)?;
    if !regime.label.is_solvable() {
        return Err(Error::regime(format!("{:?}: {}", regime.label, regime.detail)));
    }
    let base = make_problem(s, beta, m0, cfg)?;
    let mut a = base.coeffs_of(seed)?;
    let active = iterate::symmetry_class(&base, &a);
    let prob = base.clone().with_active(active)?;
    let mut trace = Trace::default();
    if let Err(e) = iterate::newton(&prob, &mut a, cfg.tol_grad, cfg.epsilon_reg, &mut trace) {
        return Err(failure(&prob, &a, &trace, e.to_string()));
    }
    let res = finish(&base, &prob, &a, regime, trace.iterations, cfg)?;
    if res.norm() <= COLLAPSE_NORM {
        return Err(failure(&prob, &a, &trace, "iteration collapsed to w = 0".into()));
    }
    Ok(res)
}

/// Relative change of `∫|w|^p` between `n` and `2n` quadrature points.
fn mass_change(res: &SolveResult, n_grid: usize) -> Result<f64> {
    let table = build_table(&res.params(), res.m_max, DEFAULT_TOL)?;
    let coarse = Problem::new(table.clone(), res.c, n_grid)?;
    let fine = Problem::new(table, res.c, 2 * n_grid)?;
    let a = coarse.coeffs_of(&res.w)?;
    let (m1, m2) = (coarse.mass(&a), fine.mass(&a));
    Ok((m1 - m2).abs() / m2.abs())
}

/// Double the quadrature grid and re-solve until `∫|w|^p` is stable to
/// [`MASS_REFINE_TOL`].
fn settle_quadrature(mut res: SolveResult, cfg: &SolveConfig) -> Result<SolveResult> {
    let mut cfg = cfg.clone();
    while 2 * cfg.n_grid <= MAX_QUADRATURE_GRID {
        if mass_change(&res, cfg.n_grid)? < MASS_REFINE_TOL {
            return Ok(res);
        }
        cfg.n_grid *= 2;
        let before = res.iterations;
        res = newton_from(res.s, res.beta, res.m0, &res.w, &cfg)?;
        res.iterations += before;
    }
    let change = mass_change(&res, cfg.n_grid)?;
    if change < MASS_REFINE_TOL {
        Ok(res)
    } else {
        Err(Error::Numeric {
            message: format!("nonlinear quadrature unsettled at n_grid = {}", cfg.n_grid),
            achieved: change,
        })
    }
}

fn seed_amplitude(prob: &Problem, cfg: &SolveConfig, k: usize, factor: f64) -> f64 {
    if cfg.seed_amplitude > 0.0 {
        cfg.seed_amplitude * factor
    } else {
        balanced_amplitude(prob, k) * factor
    }
}

fn polish(prob: &Problem, a: &mut [f64], cfg: &SolveConfig, trace: &mut Trace) -> Result<()> {
    iterate::newton(prob, a, cfg.tol_grad, cfg.epsilon_reg, trace)
        .map(|_| ())
        .map_err(|e| failure(prob, a, trace, e.to_string()))
}

fn minimizing(
    base: &Problem,
    cfg: &SolveConfig,
    factor: f64,
    trace: &mut Trace,
) -> Result<(Problem, Vec<f64>)> {
    let mut a = vec![0.0; base.dim()];
    a[0] = seed_amplitude(base, cfg, 0, factor);
    let prob = base.clone().with_active(iterate::symmetry_class(base, &a))?;
    let free = prob.active().to_vec();
    let scale = prob.norm(&a.iter().zip(prob.mu()).map(|(x, m)| x * m).collect::<Vec<_>>(), -prob.s());
    iterate::descend_energy(&prob, &mut a, &free, 1e-7 * scale, cfg.max_iters, trace)?;
    polish(&prob, &mut a, cfg, trace)?;
    Ok((prob, a))
}

fn mountain_pass(
    base: &Problem,
    cfg: &SolveConfig,
    factor: f64,
    attempt: usize,
    rng: &mut ChaCha8Rng,
    trace: &mut Trace,
) -> Result<(Problem, Vec<f64>)> {
    let mut a = vec![0.0; base.dim()];
    a[0] = seed_amplitude(base, cfg, 0, factor);
    let prob = base.clone().with_active(iterate::symmetry_class(base, &a))?;
    if attempt > 0 {
        // restarts perturb the seed inside its class
        let amp = a[0];
        for &i in prob.active().iter().skip(1).take(4) {
            a[i] = 0.05 * amp * rng.gen_range(-1.0..1.0);
        }
    }
    iterate::descend_quotient(&prob, &mut a, 1e-8, cfg.max_iters, trace)?;
    // rescale so that the Lagrange multiplier equals c
    let t = (prob.quadratic(&a) / prob.c).powf(1.0 / (prob.exponent() - 2.0));
    a.iter_mut().for_each(|x| *x *= t);
    polish(&prob, &mut a, cfg, trace)?;
    Ok((prob, a))
}

fn saddle(
    base: &Problem,
    cfg: &SolveConfig,
    factor: f64,
    trace: &mut Trace,
) -> Result<(Problem, Vec<f64>)> {
    let mu = base.mu();
    let first_pos = mu
        .iter()
        .position(|&m| m > 0.0)
        .ok_or_else(|| Error::Consistency("no positive eigenvalue in the table".into()))?;
    let amp = seed_amplitude(base, cfg, first_pos, factor);
    let mut a = vec![0.0; base.dim()];
    a[0] = 0.1 * amp;
    if mu.len() > 1 && mu[1] <= 0.0 {
        a[1] = amp;
    }
    if mu.len() > 2 {
        a[2] = amp;
    }
    let prob = base.clone().with_active(iterate::symmetry_class(base, &a))?;
    let (y, z): (Vec<usize>, Vec<usize>) = prob.active().iter().partition(|&&i| mu[i] <= 0.0);
    let seed = a.clone();
    let reduced = iterate::saddle_reduce(
        &prob,
        &mut a,
        &y,
        &z,
        1e-7 * amp.max(1e-300),
        cfg.max_iters,
        cfg.epsilon_reg,
        trace,
    )
    .and_then(|_| polish(&prob, &mut a, cfg, trace));
    if reduced.is_ok() {
        return Ok(settle_in_subclass(&prob, a, &y, cfg, trace));
    }
    // plain Newton from the seed
    let mut a = seed;
    polish(&prob, &mut a, cfg, trace)?;
    Ok((prob, a))
}

/// When the non-positive modes of a saddle solution are negligible, the critical point
/// is usually one of the smaller symmetry class generated by its dominant mode, which
/// excludes those modes exactly. Newton is retried there and its result kept on success.
fn settle_in_subclass(
    prob: &Problem,
    a: Vec<f64>,
    y: &[usize],
    cfg: &SolveConfig,
    trace: &mut Trace,
) -> (Problem, Vec<f64>) {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y_norm = y.iter().map(|&i| a[i] * a[i]).sum::<f64>().sqrt();
    if y_norm > Y_NEGLIGIBLE * norm {
        return (prob.clone(), a);
    }
    let top = (0..a.len())
        .max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
        .unwrap();
    let mut dominant = vec![0.0; a.len()];
    dominant[top] = 1.0;
    let class = iterate::symmetry_class(prob, &dominant);
    if class.len() == prob.active().len() || class.iter().any(|i| y.contains(i)) {
        return (prob.clone(), a);
    }
    let Ok(sub) = prob.clone().with_active(class.clone()) else {
        return (prob.clone(), a);
    };
    let mut b = vec![0.0; a.len()];
    for &i in &class {
        b[i] = a[i];
    }
    let mut sub_trace = Trace::default();
    match iterate::newton(&sub, &mut b, cfg.tol_grad, cfg.epsilon_reg, &mut sub_trace) {
        Ok(_)
            if prob.dual_norm(&prob.residual(&b)) <= cfg.tol_grad
                && sobolev_norm(&sub.series(&b), sub.s()) > COLLAPSE_NORM =>
        {
            trace.grad.extend(sub_trace.grad);
            trace.iterations += sub_trace.iterations;
            (sub, b)
        }
        _ => (prob.clone(), a),
    }
}

/// Decay rate of the octave-maximum envelope of `|a_m|`, fitted over octaves above the
/// round-off floor; `0` when fewer than two octaves qualify.
pub fn coefficient_decay(w: &SineSeries) -> f64 {
    let amax = w.coeffs.iter().fold(0.0f64, |x, v| x.max(v.abs()));
    let floor = 1e-13 * amax;
    let mut pts = vec![];
    let mut lo = w.m0.max(1).next_power_of_two();
    while 2 * lo <= w.m_max() + 1 {
        let top = (lo..2 * lo).map(|m| w.coeff(m).abs()).fold(0.0, f64::max);
        if top > floor && lo >= 2 * w.m0 {
            pts.push(((1.5 * lo as f64).ln(), top.ln()));
        }
        lo *= 2;
    }
    if pts.len() < 2 {
        return 0.0;
    }
    -least_squares_slope(&pts)
}

/// Energy fraction carried by the last octave of stored modes.
pub fn tail_energy_ratio(w: &SineSeries) -> f64 {
    let total: f64 = w.coeffs.iter().map(|c| c * c).sum();
    if total == 0.0 {
        return 0.0;
    }
    let cut = w.m_max() / 2;
    let tail: f64 = (cut + 1..=w.m_max()).map(|m| w.coeff(m).powi(2)).sum();
    tail / total
}

fn finish(
    base: &Problem,
    prob: &Problem,
    a: &[f64],
    regime: Regime,
    iterations: usize,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    let _ = prob;
    let r = base.residual(a);
    let g = base.forcing(a);
    let w = base.series(a);
    let res_series = base.series(&r);
    let grid_n = (4 * cfg.m_max).next_power_of_two().max(cfg.n_grid);
    let pointwise = to_grid(&res_series, grid_n)?
        .values
        .iter()
        .fold(0.0f64, |x, v| x.max(v.abs()));
    Ok(SolveResult {
        s: base.s(),
        beta: base.beta(),
        m0: base.table.params.m0,
        m_max: cfg.m_max,
        n_grid: cfg.n_grid,
        c: cfg.c,
        regime,
        decay_slope: coefficient_decay(&w),
        tail_energy_ratio: tail_energy_ratio(&w),
        grad_norm: base.dual_norm(&r),
        i_value: base.energy(a),
        pointwise_residual: pointwise,
        g: base.series(&g),
        w,
        iterations,
        rng_seed: cfg.rng_seed,
    })
}

/// Outcome of [`verify_solution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub weak_form_residual: f64,
    pub weak_form_bound: f64,
    pub weak_form_ok: bool,
    pub refinement_change: f64,
    pub refinement_ok: bool,
    pub decay_slope: f64,
    pub decay_threshold: f64,
    pub decay_ok: bool,
    pub tail_energy_ratio: f64,
    pub tail_ok: bool,
}

impl VerificationReport {
    /// Hard checks only; decay and tail are diagnostics.
    pub fn passed(&self) -> bool {
        self.weak_form_ok && self.refinement_ok
    }
}

/// Weak-form residual against the table's test modes, stability under doubled
/// resolution, and the coefficient-decay diagnostics.
pub fn verify_solution(
    res: &SolveResult,
    table: &MultiplierTable,
    cfg: &SolveConfig,
) -> Result<VerificationReport> {
    if table.params != res.params() {
        return Err(Error::domain("table parameters do not match the result"));
    }
    let norm = res.norm();
    let mut weak: f64 = 0.0;
    for m in res.w.m0..=res.w.m_max().min(table.m_max()) {
        let mu = table
            .mu_at(m)
            .ok_or_else(|| Error::domain(format!("table misses mode {m}")))?;
        weak = weak.max((mu * res.w.coeff(m) - res.g.coeff(m)).abs());
    }
    let bound = WEAK_FORM_TOL * norm;

    let fine_cfg = SolveConfig {
        m_max: 2 * res.m_max,
        n_grid: 2 * res.n_grid,
        ..cfg.clone()
    };
    let refined = solve_seeded(res.s, res.beta, res.m0, &res.w, &fine_cfg)?;
    let coarse = res.w.resized(refined.w.m_max())?;
    let diff: f64 = coarse
        .coeffs
        .iter()
        .zip(&refined.w.coeffs)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let change = diff / refined.w.l2_norm();

    let threshold = holder_exponent(res.s, res.beta) - DECAY_SLACK;
    Ok(VerificationReport {
        weak_form_residual: weak,
        weak_form_bound: bound,
        weak_form_ok: weak <= bound,
        refinement_change: change,
        refinement_ok: change < REFINEMENT_TOL,
        decay_slope: res.decay_slope,
        decay_threshold: threshold,
        decay_ok: res.decay_slope >= threshold,
        tail_energy_ratio: res.tail_energy_ratio,
        tail_ok: res.tail_energy_ratio < TAIL_ENERGY_TOL,
    })
}

/// `λw` for the constant `c_to`, given that `w` solves with `c_from`:
/// `λ = (c_from/c_to)^{β/(2s)}`.
pub fn rescale(w: &SineSeries, s: f64, beta: f64, c_from: f64, c_to: f64) -> SineSeries {
    w.scaled((c_from / c_to).powf(beta / (2.0 * s)))
}
