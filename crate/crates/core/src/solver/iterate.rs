//! Iterations on a fixed [`Problem`]: preconditioned energy descent, Nehari-quotient
//! descent, the saddle reduction and damped Newton.
//!
//! All vectors are full-length coefficient arrays over the table modes; only the
//! indices listed by the caller are ever changed.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::spectral::Problem;

const ARMIJO: f64 = 1e-4;
const MAX_NEWTON: usize = 60;
const MAX_SADDLE_OUTER: usize = 80;

/// Dual-norm residual history shared by all phases of a solve.
#[derive(Clone, Debug, Default)]
pub(crate) struct Trace {
    pub grad: Vec<f64>,
    pub iterations: usize,
}

fn dual_on(r: &[f64], idx: &[usize], weights: &[f64]) -> f64 {
    idx.iter().map(|&i| weights[i] * r[i] * r[i]).sum::<f64>().sqrt()
}

/// Indices of the modes reachable from `seed` under the nonlinearity: multiples of
/// `d = gcd(seed modes)`, restricted to odd multiples when every seed mode is one.
pub(crate) fn symmetry_class(prob: &Problem, seed: &[f64]) -> Vec<usize> {
    let m0 = prob.m0();
    let modes: Vec<usize> = seed
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| m0 + i)
        .collect();
    if modes.is_empty() {
        return (0..prob.dim()).collect();
    }
    let d = modes.iter().fold(0usize, |g, &m| gcd(g, m));
    let odd_only = modes.iter().all(|&m| (m / d) % 2 == 1);
    (0..prob.dim())
        .filter(|&i| {
            let m = m0 + i;
            m % d == 0 && (!odd_only || (m / d) % 2 == 1)
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Minimize the energy over the coefficients in `free` (all with `μ > 0`), holding the
/// rest fixed. Preconditioned gradient steps `−r/μ` with Barzilai–Borwein lengths and
/// Armijo backtracking, so the energy never increases. Stops once the free part of the
/// residual has dual norm `<= tol`, after `max_iters`, or when no decrease is possible.
pub(crate) fn descend_energy(
    prob: &Problem,
    a: &mut [f64],
    free: &[usize],
    tol: f64,
    max_iters: usize,
    trace: &mut Trace,
) -> Result<()> {
    let mu = prob.mu();
    if free.iter().any(|&i| mu[i] <= 0.0) {
        return Err(Error::Consistency("energy descent over a non-positive mode".into()));
    }
    let weights = prob.weights(-prob.s());
    let mut r = prob.residual(a);
    let mut e = prob.energy(a);
    let mut tau = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..max_iters {
        let g = dual_on(&r, free, &weights);
        trace.grad.push(g);
        if g <= tol {
            return Ok(());
        }
        trace.iterations += 1;
        if let Some((a_old, r_old)) = &prev {
            let mut shs = 0.0;
            let mut sy = 0.0;
            for &i in free {
                let si = a[i] - a_old[i];
                shs += mu[i] * si * si;
                sy += si * (r[i] - r_old[i]);
            }
            tau = if sy > 0.0 { (shs / sy).clamp(1e-4, 1e4) } else { 1.0 };
        }
        let mut slope = 0.0;
        let d: Vec<f64> = free
            .iter()
            .map(|&i| {
                let di = -r[i] / mu[i];
                slope += r[i] * di;
                di
            })
            .collect();
        let mut trial = a.to_vec();
        let accepted = loop {
            for (k, &i) in free.iter().enumerate() {
                trial[i] = a[i] + tau * d[k];
            }
            let et = prob.energy(&trial);
            if et <= e + ARMIJO * tau * slope {
                break Some(et);
            }
            tau *= 0.5;
            if tau < 1e-14 {
                break None;
            }
        };
        let Some(et) = accepted else {
            return Ok(());
        };
        assert!(et <= e, "energy increased along descent: {e} -> {et}");
        prev = Some((a.to_vec(), r));
        a.copy_from_slice(&trial);
        e = et;
        r = prob.residual(a);
    }
    Ok(())
}

fn normalize_mass(prob: &Problem, a: &mut [f64]) -> Result<()> {
    let m = prob.mass(a);
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::numeric("cannot normalize a vanishing profile", m));
    }
    let k = m.powf(-1.0 / prob.exponent());
    a.iter_mut().for_each(|x| *x *= k);
    Ok(())
}

/// Minimize `B(w,w) / (∫|w|^p)^{2/p}` over the active modes (all `μ > 0`), keeping
/// `∫|w|^p = 1`. Returns with `a` normalized.
pub(crate) fn descend_quotient(
    prob: &Problem,
    a: &mut [f64],
    tol_rel: f64,
    max_iters: usize,
    trace: &mut Trace,
) -> Result<()> {
    let mu = prob.mu();
    let free = prob.active().to_vec();
    let weights = prob.weights(-prob.s());
    let inv_p = 2.0 / prob.exponent();
    let quotient = |x: &[f64]| prob.quadratic(x) / prob.mass(x).powf(inv_p);
    let gradient = |x: &[f64]| {
        let q = prob.quadratic(x);
        let f = prob.forcing(x);
        let c = prob.c;
        let mut g = vec![0.0; x.len()];
        for &i in &free {
            g[i] = mu[i] * x[i] - q * f[i] / c;
        }
        g
    };
    normalize_mass(prob, a)?;
    let mut r = gradient(a);
    let mut val = quotient(a);
    let mut tau = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..max_iters {
        let scale: Vec<f64> = free.iter().map(|&i| mu[i] * a[i]).collect();
        let scale = scale.iter().zip(&free).map(|(v, &i)| weights[i] * v * v).sum::<f64>().sqrt();
        let g = dual_on(&r, &free, &weights);
        trace.grad.push(g);
        if g <= tol_rel * scale {
            return Ok(());
        }
        trace.iterations += 1;
        if let Some((a_old, r_old)) = &prev {
            let mut shs = 0.0;
            let mut sy = 0.0;
            for &i in &free {
                let si = a[i] - a_old[i];
                shs += mu[i] * si * si;
                sy += si * (r[i] - r_old[i]);
            }
            tau = if sy > 0.0 { (shs / sy).clamp(1e-4, 1e4) } else { 1.0 };
        }
        let mut slope = 0.0;
        let mut trial = a.to_vec();
        let d: Vec<f64> = free
            .iter()
            .map(|&i| {
                let di = -r[i] / mu[i];
                slope += 2.0 * r[i] * di;
                di
            })
            .collect();
        let accepted = loop {
            for (k, &i) in free.iter().enumerate() {
                trial[i] = a[i] + tau * d[k];
            }
            let v = quotient(&trial);
            if v <= val + ARMIJO * tau * slope {
                break true;
            }
            tau *= 0.5;
            if tau < 1e-14 {
                break false;
            }
        };
        if !accepted {
            return Ok(());
        }
        normalize_mass(prob, &mut trial)?;
        prev = Some((a.to_vec(), r));
        a.copy_from_slice(&trial);
        val = quotient(a);
        r = gradient(a);
    }
    Ok(())
}

/// Damped Newton on the active modes until the dual-norm residual is `<= tol`.
pub(crate) fn newton(
    prob: &Problem,
    a: &mut [f64],
    tol: f64,
    eps_rel: f64,
    trace: &mut Trace,
) -> Result<f64> {
    let active = prob.active().to_vec();
    let mut r = prob.residual(a);
    let mut g = prob.dual_norm(&r);
    for _ in 0..MAX_NEWTON {
        trace.grad.push(g);
        if g <= tol {
            return Ok(g);
        }
        trace.iterations += 1;
        let jac = prob.jacobian(a, eps_rel);
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&i| -r[i]));
        let Some(delta) = jac.lu().solve(&rhs) else {
            return Err(Error::numeric("singular Newton system", g));
        };
        let mut lambda = 1.0;
        let mut trial = a.to_vec();
        let (rt, gt) = loop {
            for (k, &i) in active.iter().enumerate() {
                trial[i] = a[i] + lambda * delta[k];
            }
            let rt = prob.residual(&trial);
            let gt = prob.dual_norm(&rt);
            if gt < (1.0 - ARMIJO * lambda) * g || lambda < 1e-3 {
                break (rt, gt);
            }
            lambda *= 0.5;
        };
        if !(gt < g) {
            return Err(Error::numeric("Newton iteration stalled", g));
        }
        a.copy_from_slice(&trial);
        r = rt;
        g = gt;
    }
    trace.grad.push(g);
    if g <= tol {
        Ok(g)
    } else {
        Err(Error::numeric("Newton iteration limit reached", g))
    }
}

/// Reduction for the saddle regime: minimize over the positive modes `z_idx` with the
/// non-positive modes `y_idx` frozen, then take a Newton step on the reduced function
/// of `y` using the Schur complement. Stops once the full active residual is below
/// `tol`.
pub(crate) fn saddle_reduce(
    prob: &Problem,
    a: &mut [f64],
    y_idx: &[usize],
    z_idx: &[usize],
    tol: f64,
    max_inner: usize,
    eps_rel: f64,
    trace: &mut Trace,
) -> Result<()> {
    let active = prob.active().to_vec();
    let pos = |i: usize| active.iter().position(|&k| k == i).unwrap();
    let yp: Vec<usize> = y_idx.iter().map(|&i| pos(i)).collect();
    let zp: Vec<usize> = z_idx.iter().map(|&i| pos(i)).collect();
    for _ in 0..MAX_SADDLE_OUTER {
        descend_energy(prob, a, z_idx, 0.1 * tol, max_inner, trace)?;
        let r = prob.residual(a);
        let g = prob.dual_norm(&r);
        trace.grad.push(g);
        if g <= tol {
            return Ok(());
        }
        let jac = prob.jacobian(a, eps_rel);
        let jzz = jac.select_rows(&zp).select_columns(&zp);
        let jzy = jac.select_rows(&zp).select_columns(&yp);
        let jyz = jac.select_rows(&yp).select_columns(&zp);
        let jyy = jac.select_rows(&yp).select_columns(&yp);
        let Some(x) = jzz.lu().solve(&jzy) else {
            return Err(Error::numeric("singular Z block in saddle reduction", g));
        };
        let h = jyy - jyz * x;
        let ry = DVector::from_iterator(y_idx.len(), y_idx.iter().map(|&i| -r[i]));
        let Some(dy) = h.lu().solve(&ry) else {
            return Err(Error::numeric("singular reduced Hessian", g));
        };
        let norm_a = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let step = dy.norm();
        let damp = if step > 0.5 * norm_a { 0.5 * norm_a / step } else { 1.0 };
        for (k, &i) in y_idx.iter().enumerate() {
            a[i] += damp * dy[k];
        }
        trace.iterations += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplier::{build_table, Params, DEFAULT_TOL};

    fn problem(s: f64, beta: f64, m0: usize, m_max: usize, n: usize) -> Problem {
        let t = build_table(&Params::new(s, beta, m0).unwrap(), m_max, DEFAULT_TOL).unwrap();
        Problem::new(t, 1.0, n).unwrap()
    }

    #[test]
    fn classes() {
        let prob = problem(0.75, 1.0, 2, 20, 128);
        let mut seed = vec![0.0; prob.dim()];
        seed[0] = 1.0;
        let cls: Vec<usize> = symmetry_class(&prob, &seed).iter().map(|i| i + 2).collect();
        assert_eq!(cls, vec![2, 6, 10, 14, 18]);
        seed[2] = 0.1;
        let cls: Vec<usize> = symmetry_class(&prob, &seed).iter().map(|i| i + 2).collect();
        assert_eq!(cls, vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
    }

    #[test]
    fn descent_never_increases_energy() {
        let prob = problem(0.75, -1.8, 2, 32, 256);
        let mut a = vec![0.0; prob.dim()];
        a[0] = 0.3;
        a[4] = 0.05;
        let free: Vec<usize> = (0..prob.dim()).collect();
        let mut trace = Trace::default();
        let e0 = prob.energy(&a);
        descend_energy(&prob, &mut a, &free, 1e-6, 500, &mut trace).unwrap();
        assert!(prob.energy(&a) < e0);
        assert!(prob.energy(&a) < 0.0);
    }
}
