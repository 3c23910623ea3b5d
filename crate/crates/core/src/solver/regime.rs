//! Classification of `(s, β, m0)` into existence and non-existence regimes, and the
//! interval map over β for fixed `(s, m0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    ExistMinimizing,
    ExistMountainPass,
    ExistSaddle,
    NonexistenceInterior,
    NonexistenceEndpoint,
    IrrotationalOnly,
    OpenGap,
    OutOfRange,
}

impl RegimeLabel {
    /// Whether [`crate::solver::solve`] accepts this label.
    pub fn is_solvable(self) -> bool {
        matches!(
            self,
            RegimeLabel::ExistMinimizing
                | RegimeLabel::ExistMountainPass
                | RegimeLabel::ExistSaddle
                | RegimeLabel::OpenGap
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub label: RegimeLabel,
    pub detail: String,
}

fn check_sm0(s: f64, m0: usize) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0,1), got {s}")));
    }
    if m0 == 0 {
        return Err(Error::domain("m0 must be at least 1"));
    }
    Ok(())
}

/// Regime of `(s, β, m0)`.
pub fn classify_regime(s: f64, beta: f64, m0: usize) -> Result<Regime> {
    check_sm0(s, m0)?;
    if !beta.is_finite() {
        return Err(Error::domain(format!("beta must be finite, got {beta}")));
    }
    let m = m0 as f64;
    let two_s = 2.0 * s;
    let (label, detail) = if beta <= -m - two_s || beta >= m {
        (
            RegimeLabel::OutOfRange,
            format!("beta outside ({}, {m}); the operator is undefined on the sine space", -m - two_s),
        )
    } else if m0 == 1 && beta == -1.0 && s >= 0.5 {
        (
            RegimeLabel::IrrotationalOnly,
            "only w = C sin(theta), g = 0 is stationary".to_string(),
        )
    } else if beta == -two_s || beta == 0.0 {
        (
            RegimeLabel::NonexistenceEndpoint,
            "no nontrivial solutions at the endpoint of [-2s, 0]".to_string(),
        )
    } else if beta > -two_s && beta < 0.0 {
        (
            RegimeLabel::NonexistenceInterior,
            "no nontrivial solutions for -2s < beta < 0".to_string(),
        )
    } else if beta > 0.0 {
        if s < 0.5 && beta <= 0.5 - s {
            (
                RegimeLabel::OpenGap,
                format!("0 < beta <= 1/2 - s = {}: outside proven regimes", 0.5 - s),
            )
        } else {
            (
                RegimeLabel::ExistMountainPass,
                "superlinear nonlinearity; mountain-pass critical point".to_string(),
            )
        }
    } else if beta > -m {
        (
            RegimeLabel::ExistMinimizing,
            "all eigenvalues positive, sublinear nonlinearity; global minimizer".to_string(),
        )
    } else {
        (
            RegimeLabel::ExistSaddle,
            "non-positive low eigenvalues; saddle-point critical point".to_string(),
        )
    };
    Ok(Regime { label, detail })
}

/// Colour classes of the β-line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Existence,
    Nonexistence,
    Exceptional,
    Gap,
}

/// An interval (possibly a single point) of the β-line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaInterval<K> {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub kind: K,
}

/// Interval structure of the admissible β-range `(−m0−2s, m0)` for fixed `(s, m0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeMap {
    pub s: f64,
    pub m0: usize,
    /// Sorted boundary points of `intervals`.
    pub endpoints: Vec<f64>,
    /// Existence / non-existence / exceptional / gap colouring.
    pub intervals: Vec<BetaInterval<IntervalKind>>,
    /// Finer split by variational principle, which also cuts at `β = −m0`.
    pub variational: Vec<BetaInterval<RegimeLabel>>,
}

fn iv<K>(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool, kind: K) -> BetaInterval<K> {
    BetaInterval {
        lo,
        hi,
        lo_closed,
        hi_closed,
        kind,
    }
}

/// Regime intervals over β for fixed `(s, m0)`.
pub fn regime_map(s: f64, m0: usize) -> Result<RegimeMap> {
    check_sm0(s, m0)?;
    let m = m0 as f64;
    let two_s = 2.0 * s;
    let lo = -m - two_s;
    let exceptional = m0 == 1 && s >= 0.5;
    let gap = s < 0.5;

    let mut intervals = vec![iv(lo, -two_s, false, false, IntervalKind::Existence)];
    if exceptional {
        // β = −1 lies in [−2s, 0] and splits it
        if two_s > 1.0 {
            intervals.push(iv(-two_s, -1.0, true, false, IntervalKind::Nonexistence));
        }
        intervals.push(iv(-1.0, -1.0, true, true, IntervalKind::Exceptional));
        intervals.push(iv(-1.0, 0.0, false, true, IntervalKind::Nonexistence));
    } else {
        intervals.push(iv(-two_s, 0.0, true, true, IntervalKind::Nonexistence));
    }
    if gap {
        intervals.push(iv(0.0, 0.5 - s, false, true, IntervalKind::Gap));
        intervals.push(iv(0.5 - s, m, false, false, IntervalKind::Existence));
    } else {
        intervals.push(iv(0.0, m, false, false, IntervalKind::Existence));
    }

    let mut endpoints: Vec<f64> = intervals.iter().flat_map(|i| [i.lo, i.hi]).collect();
    endpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    endpoints.dedup();

    let mut variational = vec![];
    if -m < -two_s {
        variational.push(iv(lo, -m, false, true, RegimeLabel::ExistSaddle));
        variational.push(iv(-m, -two_s, false, false, RegimeLabel::ExistMinimizing));
    } else {
        variational.push(iv(lo, -two_s, false, false, RegimeLabel::ExistSaddle));
    }
    if gap {
        variational.push(iv(0.0, 0.5 - s, false, true, RegimeLabel::OpenGap));
        variational.push(iv(0.5 - s, m, false, false, RegimeLabel::ExistMountainPass));
    } else {
        variational.push(iv(0.0, m, false, false, RegimeLabel::ExistMountainPass));
    }

    Ok(RegimeMap {
        s,
        m0,
        endpoints,
        intervals,
        variational,
    })
}
