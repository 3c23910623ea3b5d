//! Two-dimensional homogeneous fields `ψ = w(θ)/r^β`, `ω = g(θ)/r^{β+2s}` on an annulus.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SineSeries;

/// Polar sampling grid: `n_r` radii evenly spaced on `[r_min, r_max]` and `n_theta`
/// angles `2πj/n_theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            r_min: 0.2,
            r_max: 2.0,
            n_r: 128,
            n_theta: 256,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(Error::domain(format!("r_min must be positive, got {}", self.r_min)));
        }
        if !(self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(Error::domain("r_max must exceed r_min"));
        }
        if self.n_r < 2 || self.n_theta < 4 {
            return Err(Error::domain("need n_r >= 2 and n_theta >= 4"));
        }
        Ok(())
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i + 1 == self.n_r {
            self.r_max
        } else {
            self.r_min + (self.r_max - self.r_min) * i as f64 / (self.n_r - 1) as f64
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }
}

/// Sampled fields; `psi[i][j]` is at radius `i` and angle `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub beta: f64,
    pub psi: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
}

impl FieldGrid {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            r_min: self.r_min,
            r_max: self.r_max,
            n_r: self.n_r,
            n_theta: self.n_theta,
        }
    }

    pub fn max_abs_psi(&self) -> f64 {
        self.psi
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn fill(spec: &GridSpec, angular: &[f64], exponent: f64) -> Vec<Vec<f64>> {
    (0..spec.n_r)
        .into_par_iter()
        .map(|i| {
            let scale = spec.radius(i).powf(-exponent);
            angular.iter().map(|v| v * scale).collect()
        })
        .collect()
}

/// `ψ = w(θ)/r^β` and `ω = g(θ)/r^{β+2s}` on `spec`.
pub fn build_field(
    w: &SineSeries,
    g: &SineSeries,
    s: f64,
    beta: f64,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    spec.validate()?;
    if w.m0 != g.m0 {
        return Err(Error::domain(format!(
            "w and g start at different modes ({} and {})",
            w.m0, g.m0
        )));
    }
    let sample = |f: &SineSeries| -> Vec<f64> {
        (0..spec.n_theta)
            .into_par_iter()
            .map(|j| f.eval(spec.theta(j)))
            .collect()
    };
    Ok(FieldGrid {
        r_min: spec.r_min,
        r_max: spec.r_max,
        n_r: spec.n_r,
        n_theta: spec.n_theta,
        beta,
        psi: fill(spec, &sample(w), beta),
        omega: fill(spec, &sample(g), beta + 2.0 * s),
    })
}

/// The irrotational family `ψ = r^{−β} sin(βθ)`, `ω = 0`, for integer `β ≠ 0`.
pub fn irrotational_field(beta: f64, spec: &GridSpec) -> Result<FieldGrid> {
    spec.validate()?;
    if beta == 0.0 || beta.fract() != 0.0 || !beta.is_finite() {
        return Err(Error::domain(format!("beta must be a nonzero integer, got {beta}")));
    }
    let angular: Vec<f64> = (0..spec.n_theta)
        .map(|j| (beta * spec.theta(j)).sin())
        .collect();
    Ok(FieldGrid {
        r_min: spec.r_min,
        r_max: spec.r_max,
        n_r: spec.n_r,
        n_theta: spec.n_theta,
        beta,
        psi: fill(spec, &angular, beta),
        omega: vec![vec![0.0; spec.n_theta]; spec.n_r],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridSpec {
        GridSpec {
            r_min: 0.5,
            r_max: 2.0,
            n_r: 4,
            n_theta: 16,
        }
    }

    #[test]
    fn linear_field_from_first_mode() {
        let w = SineSeries::mode(1, 4, 1, 1.0).unwrap();
        let g = SineSeries::zeros(1, 4).unwrap();
        let f = build_field(&w, &g, 0.75, -1.0, &small()).unwrap();
        let spec = small();
        for i in 0..spec.n_r {
            for j in 0..spec.n_theta {
                let want = spec.radius(i) * spec.theta(j).sin() / PI.sqrt();
                assert!((f.psi[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn homogeneity_between_radii() {
        let w = SineSeries::new(2, vec![1.0, 0.3, -0.2]).unwrap();
        let spec = GridSpec {
            r_min: 0.5,
            r_max: 1.0,
            n_r: 2,
            n_theta: 32,
        };
        let f = build_field(&w, &w, 0.75, 1.3, &spec).unwrap();
        for j in 0..spec.n_theta {
            if f.psi[0][j].abs() > 1e-12 {
                let ratio = f.psi[1][j] / f.psi[0][j];
                assert!((ratio - 2f64.powf(-1.3)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn irrotational_examples() {
        let spec = small();
        let f = irrotational_field(1.0, &spec).unwrap();
        let g = irrotational_field(-2.0, &spec).unwrap();
        for i in 0..spec.n_r {
            let r = spec.radius(i);
            for j in 0..spec.n_theta {
                let t = spec.theta(j);
                assert!((f.psi[i][j] - t.sin() / r).abs() < 1e-14);
                assert!((g.psi[i][j] - r * r * (-2.0 * t).sin()).abs() < 1e-13);
                assert_eq!(f.omega[i][j], 0.0);
            }
        }
        assert!(irrotational_field(1.5, &spec).is_err());
        assert!(irrotational_field(0.0, &spec).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        let w = SineSeries::mode(1, 4, 1, 1.0).unwrap();
        let bad = GridSpec {
            r_min: 0.0,
            ..small()
        };
        assert!(matches!(build_field(&w, &w, 0.5, 1.0, &bad), Err(Error::Domain(_))));
        let g = SineSeries::mode(2, 4, 2, 1.0).unwrap();
        assert!(build_field(&w, &g, 0.5, 1.0, &small()).is_err());
    }
}
