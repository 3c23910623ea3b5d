//! Continuation of solutions along a monotone β grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{iterate, make_problem, solve, solve_seeded, SolveConfig, SolveResult, COLLAPSE_NORM};
use crate::error::{Error, Result};
use crate::spectral::{Problem, SineSeries};

/// Distance from `β = −2s` below which a branch point is flagged.
pub const BOUNDARY_BAND: f64 = 0.1;

const FD_STEP: f64 = 1e-6;
const MAX_CORRECTOR: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMethod {
    /// Independent solve from the default seed.
    Fresh,
    /// Newton seeded with the previous solution.
    Natural,
    /// Newton seeded with the secant extrapolation of the last two solutions.
    Secant,
    /// Pseudo-arclength steps from the previous point, then Newton.
    Arclength,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub beta: f64,
    pub method: BranchMethod,
    pub result: Option<SolveResult>,
    pub error: Option<String>,
    #[serde(rename = "I_value")]
    pub i_value: Option<f64>,
    pub norm: Option<f64>,
    /// `|β + 2s| < BOUNDARY_BAND`.
    pub near_boundary: bool,
}

/// Solutions at each β of `beta_grid`, each seeded from its predecessor when possible.
/// Failures are recorded per point and do not stop the branch.
pub fn solution_branch(
    s: f64,
    m0: usize,
    beta_grid: &[f64],
    cfg: &SolveConfig,
) -> Result<Vec<BranchPoint>> {
    if beta_grid.is_empty() {
        return Err(Error::domain("empty beta grid"));
    }
    let increasing = beta_grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = beta_grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::domain("beta grid must be strictly monotone"));
    }
    let mut points: Vec<BranchPoint> = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let prev: Vec<&SolveResult> = points
            .iter()
            .rev()
            .take(2)
            .map_while(|p| p.result.as_ref())
            .collect();
        let (method, outcome) = continue_to(s, beta, m0, &prev, cfg);
        let near_boundary = (beta + 2.0 * s).abs() < BOUNDARY_BAND;
        points.push(match outcome {
            Ok(res) => BranchPoint {
                beta,
                method,
                i_value: Some(res.i_value),
                norm: Some(res.norm()),
                result: Some(res),
                error: None,
                near_boundary,
            },
            Err(e) => BranchPoint {
                beta,
                method: BranchMethod::Failed,
                result: None,
                error: Some(e.to_string()),
                i_value: None,
                norm: None,
                near_boundary,
            },
        });
    }
    Ok(points)
}

fn continue_to(
    s: f64,
    beta: f64,
    m0: usize,
    prev: &[&SolveResult],
    cfg: &SolveConfig,
) -> (BranchMethod, Result<SolveResult>) {
    let Some(last) = prev.first() else {
        return (BranchMethod::Fresh, solve(s, beta, m0, cfg));
    };
    let (method, seed) = match prev.get(1) {
        Some(older) if older.beta != last.beta => {
            let t = (beta - last.beta) / (last.beta - older.beta);
            let coeffs = last
                .w
                .coeffs
                .iter()
                .zip(&older.w.coeffs)
                .map(|(a, b)| a + t * (a - b))
                .collect();
            (BranchMethod::Secant, SineSeries::new(last.w.m0, coeffs))
        }
        _ => (BranchMethod::Natural, Ok(last.w.clone())),
    };
    if let Ok(seed) = seed {
        if let Ok(res) = solve_seeded(s, beta, m0, &seed, cfg) {
            return (method, Ok(res));
        }
    }
    if let Ok(res) = arclength(last, beta, cfg).and_then(|w| solve_seeded(s, beta, m0, &w, cfg)) {
        return (BranchMethod::Arclength, Ok(res));
    }
    (BranchMethod::Fresh, solve(s, beta, m0, cfg))
}

/// Residual on the active modes of `prob`.
fn active_residual(prob: &Problem, a: &[f64]) -> DVector<f64> {
    let r = prob.residual(a);
    DVector::from_iterator(prob.active().len(), prob.active().iter().map(|&i| r[i]))
}

fn problem_at(s: f64, beta: f64, m0: usize, active: &[usize], cfg: &SolveConfig) -> Result<Problem> {
    make_problem(s, beta, m0, cfg)?.with_active(active.to_vec())
}

/// `∂F/∂β` at fixed coefficients, by central differences.
fn beta_derivative(
    s: f64,
    beta: f64,
    m0: usize,
    active: &[usize],
    a: &[f64],
    cfg: &SolveConfig,
) -> Result<DVector<f64>> {
    let hi = problem_at(s, beta + FD_STEP, m0, active, cfg)?;
    let lo = problem_at(s, beta - FD_STEP, m0, active, cfg)?;
    Ok((active_residual(&hi, a) - active_residual(&lo, a)) / (2.0 * FD_STEP))
}

/// Pseudo-arclength path from `start` towards `target`, returning the profile at the
/// point where the path reaches `target` (to be polished by Newton).
fn arclength(start: &SolveResult, target: f64, cfg: &SolveConfig) -> Result<SineSeries> {
    let (s, m0) = (start.s, start.m0);
    let base = make_problem(s, start.beta, m0, cfg)?;
    let mut a = base.coeffs_of(&start.w)?;
    let active = iterate::symmetry_class(&base, &a);
    let n = active.len();
    let mut beta = start.beta;
    let steps = cfg.continuation_steps.max(1);
    let ds_beta = (target - start.beta) / steps as f64;
    let dir = ds_beta.signum();
    let mut tangent: Option<(DVector<f64>, f64)> = None;

    for _ in 0..4 * steps {
        if (target - beta) * dir <= 0.0 {
            break;
        }
        let prob = problem_at(s, beta, m0, &active, cfg)?;
        let jac = prob.jacobian(&a, cfg.epsilon_reg);
        let f_beta = beta_derivative(s, beta, m0, &active, &a, cfg)?;
        // tangent (v, 1) with J v = −F_β, oriented along the previous tangent
        let v = jac
            .clone()
            .lu()
            .solve(&(-&f_beta))
            .ok_or_else(|| Error::numeric("singular Jacobian on the branch", 0.0))?;
        let norm = (v.norm_squared() + 1.0).sqrt();
        let (mut ta, mut tb) = (v / norm, 1.0 / norm);
        let flip = match &tangent {
            Some((pa, pb)) => pa.dot(&ta) + pb * tb < 0.0,
            None => tb * dir < 0.0,
        };
        if flip {
            ta = -ta;
            tb = -tb;
        }
        // arclength increment that advances β by one sub-step along the tangent
        let remaining = target - beta;
        let db = if remaining.abs() < ds_beta.abs() { remaining } else { ds_beta };
        let ds = (db / tb).abs().min(10.0 * ds_beta.abs() / tb.abs().max(1e-3));
        let mut x: Vec<f64> = a.clone();
        for (k, &i) in active.iter().enumerate() {
            x[i] += ds * ta[k];
        }
        let mut bx = beta + ds * tb;
        let (x0, b0) = (x.clone(), bx);
        let mut converged = false;
        for _ in 0..MAX_CORRECTOR {
            let p = problem_at(s, bx, m0, &active, cfg)?;
            let r = active_residual(&p, &x);
            let arc: f64 = active
                .iter()
                .enumerate()
                .map(|(k, &i)| ta[k] * (x[i] - x0[i]))
                .sum::<f64>()
                + tb * (bx - b0);
            if p.dual_norm(&p.residual(&x)) <= cfg.tol_grad && arc.abs() < 1e-12 {
                converged = true;
                break;
            }
            let fb = beta_derivative(s, bx, m0, &active, &x, cfg)?;
            let j = p.jacobian(&x, cfg.epsilon_reg);
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n)).copy_from(&j);
            big.view_mut((0, n), (n, 1)).copy_from(&fb);
            for k in 0..n {
                big[(n, k)] = ta[k];
            }
            big[(n, n)] = tb;
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-r));
            rhs[n] = -arc;
            let delta = big
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::numeric("singular bordered system", 0.0))?;
            for (k, &i) in active.iter().enumerate() {
                x[i] += delta[k];
            }
            bx += delta[n];
        }
        if !converged {
            return Err(Error::numeric("arclength corrector did not converge", bx));
        }
        let xs = prob.series(&x);
        if crate::spectral::sobolev_norm(&xs, s) <= COLLAPSE_NORM {
            return Err(Error::numeric("branch collapsed to w = 0", bx));
        }
        a = x;
        beta = bx;
        tangent = Some((ta, tb));
    }
    if (target - beta) * dir > 1e-9 * target.abs().max(1.0) {
        return Err(Error::numeric("arclength path did not reach the target", beta));
    }
    Ok(base.series(&a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SolveConfig {
        SolveConfig {
            m_max: 64,
            n_grid: 1024,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn rejects_non_monotone_grid() {
        assert!(solution_branch(0.75, 2, &[-1.9, -1.7, -1.8], &cfg()).is_err());
        assert!(solution_branch(0.75, 2, &[], &cfg()).is_err());
    }

    #[test]
    fn single_point_is_solve() {
        let pts = solution_branch(0.75, 2, &[1.0], &cfg()).unwrap();
        let direct = solve(0.75, 1.0, 2, &cfg()).unwrap();
        assert_eq!(pts[0].method, BranchMethod::Fresh);
        assert_eq!(pts[0].result.as_ref().unwrap().w, direct.w);
    }

    #[test]
    fn minimizing_branch_is_continuous() {
        let branch = |h: f64, n: usize| {
            let grid: Vec<f64> = (0..n).map(|k| -1.9 + h * k as f64).collect();
            solution_branch(0.75, 2, &grid, &cfg()).unwrap()
        };
        let coarse = branch(0.1, 4);
        let fine = branch(0.05, 7);
        assert!(fine.iter().all(|p| p.result.is_some()));
        assert!(fine[1..].iter().all(|p| p.method != BranchMethod::Fresh));
        let i = |p: &BranchPoint| p.i_value.unwrap();
        // I increases towards −2s and its increments shrink with the step
        for w in fine.windows(2) {
            assert!(i(&w[1]) > i(&w[0]));
        }
        for k in 0..3 {
            let big = i(&coarse[k + 1]) - i(&coarse[k]);
            let halves = i(&fine[2 * k + 1]) - i(&fine[2 * k]);
            assert!(halves > 0.0 && halves < big);
            assert!((i(&coarse[k]) - i(&fine[2 * k])).abs() < 1e-9 * i(&coarse[k]).abs());
        }
    }

    #[test]
    fn failures_are_recorded() {
        let pts = solution_branch(0.75, 2, &[-1.8, -1.0], &cfg()).unwrap();
        assert!(pts[0].result.is_some());
        assert_eq!(pts[1].method, BranchMethod::Failed);
        assert!(pts[1].error.is_some());
    }

    #[test]
    fn arclength_reaches_target() {
        let c = cfg();
        let start = solve(0.75, -1.8, 2, &c).unwrap();
        let w = arclength(&start, -1.7, &c).unwrap();
        let res = solve_seeded(0.75, -1.7, 2, &w, &c).unwrap();
        let direct = solve(0.75, -1.7, 2, &c).unwrap();
        let diff: f64 = res
            .w
            .coeffs
            .iter()
            .zip(&direct.w.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }
}
