//! Fourier symbol `K̂_m(s,β)` of the angular operator, its eigenvalues `μ_m` and the
//! inverse symbol.
//!
//! The defining series
//!
//! ```text
//! K̂_m = sin(sπ)/(4^{1-s}π²) Σ_k [1/(m+2k-β) + 1/(m+2k+β+2s)] Γ(k+s)Γ(m+k+s)/(Γ(m+k+1)k!)
//! ```
//!
//! has terms decaying like `k^{2s-3}`, far too slowly to sum directly. With
//! `n = m+k+1` each reciprocal is `1/(2(n-a))` for a positive shift `a`, and the exact
//! identity
//!
//! ```text
//! 1/(n-a) = Σ_{j<J} (a)_j/(n)_{j+1} + (a)_J/((n)_J (n-a))
//! ```
//!
//! turns the first `J` pieces into Gauss sums with closed forms. What remains is a
//! positive series whose term ratio is at most `n/(n+J)`, which gives a certified
//! tail bound `r_K n_K/(J-1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::specfun::{gamma, gamma_ratio, ln_gamma};

/// Default relative tolerance for symbol evaluation.
pub const DEFAULT_TOL: f64 = 1e-14;

/// Evaluation is refused this close to either end of the validity window.
pub const WINDOW_MARGIN: f64 = 1e-6;

const SPLIT_TERMS: usize = 16;
const MAX_REMAINDER_TERMS: usize = 50_000_000;

/// The triple `(s, β, m0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub s: f64,
    pub beta: f64,
    pub m0: usize,
}

impl Params {
    pub fn new(s: f64, beta: f64, m0: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("s must lie in (0,1), got {s}")));
        }
        if !beta.is_finite() {
            return Err(Error::domain(format!("beta must be finite, got {beta}")));
        }
        Ok(Params { s, beta, m0 })
    }

    /// `−|m| − 2s < β < |m|`.
    pub fn valid_at(&self, m: i64) -> bool {
        let am = m.unsigned_abs() as f64;
        self.beta > -am - 2.0 * self.s && self.beta < am
    }

    /// Parameters of the inverse symbol, `(1−s, β+2s−2)`.
    pub fn inverse(&self) -> Params {
        Params {
            s: 1.0 - self.s,
            beta: self.beta + 2.0 * self.s - 2.0,
            m0: self.m0,
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 1e-15 && tol < 1e-6 {
        Ok(())
    } else {
        Err(Error::domain(format!("tolerance must lie in (1e-15, 1e-6), got {tol}")))
    }
}

fn check_window(p: &Params, m: i64) -> Result<()> {
    let am = m.unsigned_abs() as f64;
    let lo = -am - 2.0 * p.s;
    let hi = am;
    if p.beta <= lo + WINDOW_MARGIN || p.beta >= hi - WINDOW_MARGIN {
        return Err(Error::regime(format!(
            "beta={} outside the symbol window ({lo}, {hi}) at mode {m} (margin {WINDOW_MARGIN:e})",
            p.beta
        )));
    }
    Ok(())
}

/// Symbol `K̂_m(s,β)`, summed to relative accuracy `tol`.
pub fn khat(p: &Params, m: i64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    check_window(p, m)?;
    let s = p.s;
    let beta = p.beta;
    let mf = m.unsigned_abs() as f64;

    let a = 0.5 * (mf + 2.0 + beta);
    let a2 = 0.5 * (mf + 2.0 - beta - 2.0 * s);
    let t0 = gamma(s)? * gamma_ratio(mf + s, mf + 1.0)?;

    // closed-form part, normalized by t0
    let mut sj = gauss_sum(s, mf + s, mf + 2.0)? / t0;
    let mut poch_a = 1.0;
    let mut poch_a2 = 1.0;
    let mut closed = 0.0;
    for j in 0..SPLIT_TERMS {
        closed += (poch_a + poch_a2) * sj;
        let jf = j as f64;
        sj *= (jf + 2.0 - 2.0 * s) / ((jf + 2.0 - s) * (mf + 2.0 + jf - s));
        poch_a *= a + jf;
        poch_a2 *= a2 + jf;
    }

    // remainder: v_k = t_k (a)_J / (t0 (n)_J), likewise for a2
    let jn = SPLIT_TERMS as f64;
    let mut v = 1.0;
    let mut v2 = 1.0;
    for i in 0..SPLIT_TERMS {
        let d = mf + 1.0 + i as f64;
        v *= (a + i as f64) / d;
        v2 *= (a2 + i as f64) / d;
    }
    let mut rem = 0.0;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let n = mf + kf + 1.0;
        let term = v / (n - a) + v2 / (n - a2);
        rem += term;
        let tail = term * n / (jn - 1.0);
        if tail <= 0.5 * tol * (closed + rem) {
            rem += 0.5 * tail;
            break;
        }
        k += 1;
        if k >= MAX_REMAINDER_TERMS {
            return Err(Error::numeric(
                format!("symbol remainder did not converge at m={m}"),
                tail / (closed + rem),
            ));
        }
        let ratio = (kf + s) * (mf + kf + s) / ((mf + kf + 1.0) * (kf + 1.0)) * n / (n + jn);
        v *= ratio;
        v2 *= ratio;
    }

    let pref = (s * PI).sin() / (4f64.powf(1.0 - s) * PI * PI);
    Ok(0.5 * pref * t0 * (closed + rem))
}

/// Eigenvalue `μ_m = 2π K̂_m (m−β)(m+β)`; exactly zero when `β = −|m|`.
pub fn mu(p: &Params, m: i64, tol: f64) -> Result<f64> {
    let k = khat(p, m, tol)?;
    let mf = m.unsigned_abs() as f64;
    Ok(2.0 * PI * k * ((mf - p.beta) * (mf + p.beta)))
}

/// Inverse symbol `K̂_m(1−s, β+2s−2)`, defined for `−|m| < β < |m|`.
pub fn khat_inverse(p: &Params, m: i64, tol: f64) -> Result<f64> {
    let am = m.unsigned_abs() as f64;
    if p.beta <= -am + WINDOW_MARGIN || p.beta >= am - WINDOW_MARGIN {
        return Err(Error::regime(format!(
            "beta={} outside the inverse window ({}, {am}) at mode {m}",
            p.beta, -am
        )));
    }
    khat(&p.inverse(), m, tol)
}

/// One evaluation of the product identity `(2π)²(m²−β²) K̂_m(s,β) K̂_m(1−s,β+2s−2) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub m: i64,
    pub beta: f64,
    pub product: f64,
    pub deviation: f64,
}

pub fn symbol_identity(s: f64, beta: f64, m: i64, tol: f64) -> Result<IdentityRow> {
    let p = Params::new(s, beta, 1)?;
    let am = m.unsigned_abs() as f64;
    let product =
        (2.0 * PI).powi(2) * ((am - beta) * (am + beta)) * khat(&p, m, tol)? * khat_inverse(&p, m, tol)?;
    Ok(IdentityRow {
        m,
        beta,
        product,
        deviation: (product - 1.0).abs(),
    })
}

/// `count` values of β evenly spaced on `[−|m| + margin, |m| − margin]`.
pub fn identity_betas(m: i64, count: usize, margin: f64) -> Vec<f64> {
    let am = m.unsigned_abs() as f64;
    let (lo, hi) = (-am + margin, am - margin);
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Gauss closed form `Γ(a)Γ(b)Γ(c−a−b)/(Γ(c−a)Γ(c−b))` of
/// `Σ_k Γ(a+k)Γ(b+k)/(Γ(c+k)k!)`.
pub fn gauss_sum(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("gauss_sum needs a, b > 0, got a={a}, b={b}")));
    }
    if !(c > a + b) {
        return Err(Error::domain(format!(
            "gauss_sum diverges for c={c} <= a+b={}",
            a + b
        )));
    }
    let r1 = gamma_ratio(b, c - a)?;
    let r2 = gamma_ratio(a, c - b)?;
    Ok(r1 * r2 * ln_gamma(c - a - b)?.exp())
}

/// Symbols and eigenvalues for modes `max(m0,1) ..= m_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierTable {
    #[serde(flatten)]
    pub params: Params,
    pub khat: Vec<f64>,
    pub mu: Vec<f64>,
}

impl MultiplierTable {
    /// First stored mode.
    pub fn first_mode(&self) -> usize {
        self.params.m0.max(1)
    }

    pub fn m_max(&self) -> usize {
        self.first_mode() + self.khat.len() - 1
    }

    pub fn khat_at(&self, m: usize) -> Option<f64> {
        m.checked_sub(self.first_mode())
            .and_then(|i| self.khat.get(i).copied())
    }

    pub fn mu_at(&self, m: usize) -> Option<f64> {
        m.checked_sub(self.first_mode())
            .and_then(|i| self.mu.get(i).copied())
    }
}

/// Batched symbols and eigenvalues with invariant checks.
pub fn build_table(params: &Params, m_max: usize, tol: f64) -> Result<MultiplierTable> {
    let first = params.m0.max(1);
    if m_max < first {
        return Err(Error::domain(format!("m_max={m_max} below first mode {first}")));
    }
    let pairs: Vec<(f64, f64)> = (first..=m_max)
        .into_par_iter()
        .map(|m| {
            let k = khat(params, m as i64, tol)?;
            let mf = m as f64;
            Ok((k, 2.0 * PI * k * ((mf - params.beta) * (mf + params.beta))))
        })
        .collect::<Result<_>>()?;
    let (khat, mu): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

    for (i, k) in khat.iter().enumerate() {
        if !(k.is_finite() && *k > 0.0) {
            return Err(Error::Consistency(format!(
                "symbol not positive at m={}: {k}",
                first + i
            )));
        }
    }
    for i in 1..khat.len() {
        if khat[i] >= khat[i - 1] {
            return Err(Error::Consistency(format!(
                "symbol not decreasing at m={}",
                first + i
            )));
        }
        if mu[i] <= mu[i - 1] {
            return Err(Error::Consistency(format!(
                "eigenvalues not increasing at m={}",
                first + i
            )));
        }
    }
    Ok(MultiplierTable {
        params: *params,
        khat,
        mu,
    })
}

/// Least-squares slope of `log K̂_m` against `log m` over `[m_lo, m_hi]`.
pub fn decay_exponent(table: &MultiplierTable, m_lo: usize, m_hi: usize) -> Result<f64> {
    if m_lo < table.first_mode() || m_hi > table.m_max() || m_hi < 2 * m_lo || m_lo == 0 {
        return Err(Error::domain(format!(
            "decay fit range [{m_lo}, {m_hi}] must satisfy {} <= m_lo, 2 m_lo <= m_hi <= {}",
            table.first_mode(),
            table.m_max()
        )));
    }
    let pts: Vec<(f64, f64)> = (m_lo..=m_hi)
        .map(|m| ((m as f64).ln(), table.khat_at(m).unwrap().ln()))
        .collect();
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
