//! Odd sine-series space with modes `m >= m0`, transforms, norms, the bilinear form
//! `B`, the energy `I` and its gradient.
//!
//! Basis functions are `e_m = sin(mθ)/√π`, orthonormal in `L²(𝕋)`.
//!
//! Public grids use the nodes `θ_j = 2πj/n`. The nonlinear terms are integrated with
//! the trapezoid rule on the half-shifted nodes `θ_j = 2π(j+½)/n` instead: symmetric
//! profiles vanish at `θ = 0` and `π`, and for negative exponents `|w|^{2s/β}` cannot be
//! evaluated there.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::multiplier::MultiplierTable;

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Tolerance on the even part of a grid accepted by [`from_grid`].
pub const ODD_SYMMETRY_TOL: f64 = 1e-8;

/// `f(θ) = Σ_{m=m0}^{m_max} a_m sin(mθ)/√π`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineSeries {
    pub m0: usize,
    pub coeffs: Vec<f64>,
}

impl SineSeries {
    pub fn new(m0: usize, coeffs: Vec<f64>) -> Result<Self> {
        if m0 == 0 {
            return Err(Error::domain("sine series need m0 >= 1"));
        }
        if coeffs.is_empty() {
            return Err(Error::domain("sine series need at least one mode"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("sine series coefficients must be finite"));
        }
        Ok(SineSeries { m0, coeffs })
    }

    pub fn zeros(m0: usize, m_max: usize) -> Result<Self> {
        if m_max < m0 {
            return Err(Error::domain(format!("m_max={m_max} below m0={m0}")));
        }
        Self::new(m0, vec![0.0; m_max - m0 + 1])
    }

    /// `amp · e_m` inside the mode range `m0..=m_max`.
    pub fn mode(m0: usize, m_max: usize, m: usize, amp: f64) -> Result<Self> {
        let mut f = Self::zeros(m0, m_max)?;
        if m < m0 || m > m_max {
            return Err(Error::domain(format!("mode {m} outside {m0}..={m_max}")));
        }
        f.coeffs[m - m0] = amp;
        Ok(f)
    }

    pub fn m_max(&self) -> usize {
        self.m0 + self.coeffs.len() - 1
    }

    /// Coefficient of `e_m`, zero outside the stored range.
    pub fn coeff(&self, m: usize) -> f64 {
        if m < self.m0 {
            return 0.0;
        }
        self.coeffs.get(m - self.m0).copied().unwrap_or(0.0)
    }

    /// Copy truncated or zero-padded to `m_max`.
    pub fn resized(&self, m_max: usize) -> Result<Self> {
        let mut f = Self::zeros(self.m0, m_max)?;
        for (m, c) in (self.m0..=m_max).zip(f.coeffs.iter_mut()) {
            *c = self.coeff(m);
        }
        Ok(f)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * ((self.m0 + i) as f64 * theta).sin())
            .sum::<f64>()
            * INV_SQRT_PI
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        SineSeries {
            m0: self.m0,
            coeffs: self.coeffs.iter().map(|c| lambda * c).collect(),
        }
    }

    /// Plain ℓ² norm of the coefficients (equal to the L² norm).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Samples on `θ_j = 2πj/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub n: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    /// `theta,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,value\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", self.theta(j), v));
        }
        out
    }
}

/// Result of projecting a grid onto the sine modes `m0..=m_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub series: SineSeries,
    /// `Σ_{m<m0} a_m²`, the energy of the modes projected away.
    pub discarded_energy: f64,
}

/// Direct sine/cosine sums on a uniform grid with exactly symmetric tables.
#[derive(Clone, Debug)]
pub(crate) struct Transform {
    n: usize,
    q: usize,
    table: Vec<f64>,
}

impl Transform {
    /// Nodes `2π(j + shift)/n` with `shift = ½` when `staggered`, else 0.
    pub(crate) fn new(n: usize, staggered: bool) -> Self {
        let q = if staggered { 2 } else { 1 };
        let big = n * q;
        let mut table = vec![0.0; big];
        let quarter = big / 4;
        for k in 0..=quarter {
            let v = (2.0 * PI * k as f64 / big as f64).sin();
            table[k] = v;
            if k > 0 {
                table[big / 2 - k] = v;
                table[big / 2 + k] = -v;
                table[big - k] = -v;
            }
        }
        table[0] = 0.0;
        table[big / 2] = 0.0;
        Transform { n, q, table }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn weight(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    fn big(&self) -> usize {
        self.n * self.q
    }

    fn node(&self, j: usize) -> usize {
        self.q * j + (self.q - 1)
    }

    /// `Σ a_i sin((m0+i)θ_j)/√π`.
    pub(crate) fn synth_sin(&self, m0: usize, a: &[f64]) -> Vec<f64> {
        self.synth(m0, a, 0)
    }

    /// `Σ a_i cos((m0+i)θ_j)/√π`.
    pub(crate) fn synth_cos(&self, m0: usize, a: &[f64]) -> Vec<f64> {
        self.synth(m0, a, self.big() / 4)
    }

    fn synth(&self, m0: usize, a: &[f64], phase: usize) -> Vec<f64> {
        let big = self.big();
        let mut out = vec![0.0; self.n];
        for (i, &am) in a.iter().enumerate() {
            if am == 0.0 {
                continue;
            }
            let c = am * INV_SQRT_PI;
            let m = m0 + i;
            let step = (m * self.q) % big;
            let mut idx = (m * self.node(0) + phase) % big;
            for v in out.iter_mut() {
                *v += c * self.table[idx];
                idx += step;
                if idx >= big {
                    idx -= big;
                }
            }
        }
        out
    }

    /// Trapezoid projections `h Σ_j f_j sin(mθ_j)/√π` for `m = m_lo..=m_hi`.
    pub(crate) fn analyze_sin(&self, f: &[f64], m_lo: usize, m_hi: usize) -> Vec<f64> {
        let modes: Vec<usize> = (m_lo..=m_hi).collect();
        self.analyze_sin_modes(f, &modes)
    }

    pub(crate) fn analyze_sin_modes(&self, f: &[f64], modes: &[usize]) -> Vec<f64> {
        self.analyze(f, modes, 0)
            .into_iter()
            .map(|v| v * INV_SQRT_PI)
            .collect()
    }

    /// `h Σ_j f_j cos(kθ_j)` for the given `k`.
    pub(crate) fn analyze_cos_modes(&self, f: &[f64], modes: &[usize]) -> Vec<f64> {
        self.analyze(f, modes, self.big() / 4)
    }

    fn analyze(&self, f: &[f64], modes: &[usize], phase: usize) -> Vec<f64> {
        let big = self.big();
        let h = self.weight();
        modes
            .iter()
            .map(|&m| {
                let step = (m * self.q) % big;
                let mut idx = (m * self.node(0) + phase) % big;
                let mut acc = 0.0;
                for &v in f {
                    acc += v * self.table[idx];
                    idx += step;
                    if idx >= big {
                        idx -= big;
                    }
                }
                h * acc
            })
            .collect()
    }
}

fn check_grid_size(n: usize, m_max: usize) -> Result<()> {
    if !n.is_power_of_two() || n < 4 * m_max || n < 4 {
        return Err(Error::domain(format!(
            "grid size {n} must be a power of two >= 4 m_max = {}",
            4 * m_max
        )));
    }
    Ok(())
}

/// Exact evaluation of the sine sum on `θ_j = 2πj/n`.
pub fn to_grid(f: &SineSeries, n: usize) -> Result<GridFunction> {
    check_grid_size(n, f.m_max())?;
    let tf = Transform::new(n, false);
    Ok(GridFunction {
        n,
        values: tf.synth_sin(f.m0, &f.coeffs),
    })
}

/// Sine coefficients of an odd grid for modes `m0..=m_max`.
pub fn from_grid(g: &GridFunction, m0: usize, m_max: usize) -> Result<Projection> {
    check_grid_size(g.n, m_max)?;
    if g.values.len() != g.n {
        return Err(Error::domain("grid length does not match n"));
    }
    if m0 == 0 || m_max < m0 {
        return Err(Error::domain(format!("invalid mode range {m0}..={m_max}")));
    }
    let scale = g.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let n = g.n;
    let even = (0..n)
        .map(|j| (g.values[j] + g.values[(n - j) % n]).abs())
        .fold(0.0, f64::max);
    if even > ODD_SYMMETRY_TOL * scale.max(1.0) {
        return Err(Error::Symmetry(format!(
            "grid has an even component of size {even:.3e}"
        )));
    }
    let tf = Transform::new(n, false);
    let all = tf.analyze_sin(&g.values, 1, m_max);
    let discarded_energy = all[..m0 - 1].iter().map(|c| c * c).sum();
    Ok(Projection {
        series: SineSeries::new(m0, all[m0 - 1..].to_vec())?,
        discarded_energy,
    })
}

fn bracket(m: usize) -> f64 {
    ((m * m) as f64 + 1.0).sqrt()
}

/// `sqrt(Σ ⟨m⟩^{2l} a_m²)` with `⟨m⟩² = m²+1`.
pub fn sobolev_norm(f: &SineSeries, l: f64) -> f64 {
    f.coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| bracket(f.m0 + i).powf(2.0 * l) * a * a)
        .sum::<f64>()
        .sqrt()
}

fn check_covered(f: &SineSeries, table: &MultiplierTable) -> Result<()> {
    if f.m0 < table.first_mode() || f.m_max() > table.m_max() {
        return Err(Error::domain(format!(
            "modes {}..={} not covered by table {}..={}",
            f.m0,
            f.m_max(),
            table.first_mode(),
            table.m_max()
        )));
    }
    Ok(())
}

/// `B(w,v) = Σ μ_m (w,e_m)(v,e_m)`.
pub fn bilinear_b(w: &SineSeries, v: &SineSeries, table: &MultiplierTable) -> Result<f64> {
    if w.m0 != v.m0 {
        return Err(Error::domain("bilinear form needs a common m0"));
    }
    check_covered(w, table)?;
    check_covered(v, table)?;
    let hi = w.m_max().min(v.m_max());
    Ok((w.m0..=hi)
        .map(|m| table.mu_at(m).unwrap() * (w.coeff(m) * v.coeff(m)))
        .sum())
}

/// Discretized energy problem on a fixed mode range and quadrature grid.
///
/// Coefficient slices passed to its methods always cover the table modes
/// `first_mode..=m_max`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub table: MultiplierTable,
    pub c: f64,
    tf: Transform,
    gamma: f64,
    active: Vec<usize>,
}

impl Problem {
    pub fn new(table: MultiplierTable, c: f64, n_grid: usize) -> Result<Self> {
        let s = table.params.s;
        let beta = table.params.beta;
        if beta + s == 0.0 {
            return Err(Error::domain("beta + s = 0 degenerates the energy prefactor"));
        }
        if !(beta < -2.0 * s || beta > 0.0) {
            return Err(Error::regime(format!(
                "the energy is defined for beta < -2s or beta > 0, got beta={beta}, s={s}"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("c must be positive, got {c}")));
        }
        check_grid_size(n_grid, table.m_max())?;
        Ok(Problem {
            tf: Transform::new(n_grid, true),
            gamma: 2.0 * s / beta,
            active: (0..table.mu.len()).collect(),
            table,
            c,
        })
    }

    /// Restrict residuals and Jacobians to the listed coefficient indices; the other
    /// coefficients are taken to be zero.
    pub fn with_active(mut self, active: Vec<usize>) -> Result<Self> {
        if active.is_empty() || active.iter().any(|&i| i >= self.dim()) {
            return Err(Error::domain("active index set empty or out of range"));
        }
        self.active = active;
        Ok(self)
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn m0(&self) -> usize {
        self.table.first_mode()
    }

    pub fn dim(&self) -> usize {
        self.table.mu.len()
    }

    pub fn n_grid(&self) -> usize {
        self.tf.n()
    }

    pub fn s(&self) -> f64 {
        self.table.params.s
    }

    pub fn beta(&self) -> f64 {
        self.table.params.beta
    }

    pub fn mu(&self) -> &[f64] {
        &self.table.mu
    }

    /// `p = 2 + 2s/β`.
    pub fn exponent(&self) -> f64 {
        2.0 + self.gamma
    }

    /// Nonlinear-term prefactor `cβ/(2(β+s))`.
    pub fn prefactor(&self) -> f64 {
        self.c * self.beta() / (2.0 * (self.beta() + self.s()))
    }

    pub fn series(&self, a: &[f64]) -> SineSeries {
        SineSeries {
            m0: self.m0(),
            coeffs: a.to_vec(),
        }
    }

    /// Coefficients of `w` on this problem's mode range (truncated or padded).
    pub fn coeffs_of(&self, w: &SineSeries) -> Result<Vec<f64>> {
        if w.m0 != self.m0() {
            return Err(Error::domain(format!(
                "series m0={} does not match problem m0={}",
                w.m0,
                self.m0()
            )));
        }
        Ok((self.m0()..=self.table.m_max()).map(|m| w.coeff(m)).collect())
    }

    pub fn grid(&self, a: &[f64]) -> Vec<f64> {
        self.tf.synth_sin(self.m0(), a)
    }

    fn project(&self, f: &[f64]) -> Vec<f64> {
        let modes: Vec<usize> = self.active.iter().map(|&i| self.m0() + i).collect();
        let vals = self.tf.analyze_sin_modes(f, &modes);
        let mut out = vec![0.0; self.dim()];
        for (&i, v) in self.active.iter().zip(vals) {
            out[i] = v;
        }
        out
    }

    pub fn quadratic(&self, a: &[f64]) -> f64 {
        self.table.mu.iter().zip(a).map(|(m, x)| m * x * x).sum()
    }

    /// Trapezoid value of `∫|w|^p`.
    pub fn mass(&self, a: &[f64]) -> f64 {
        let p = self.exponent();
        self.tf.weight() * self.grid(a).iter().map(|w| w.abs().powf(p)).sum::<f64>()
    }

    pub fn energy(&self, a: &[f64]) -> f64 {
        0.5 * self.quadratic(a) - self.prefactor() * self.mass(a)
    }

    fn nonlinearity(&self, w: f64) -> f64 {
        if w == 0.0 {
            0.0
        } else {
            w * w.abs().powf(self.gamma)
        }
    }

    /// Projection of `c·w|w|^{2s/β}` onto the stored modes.
    pub fn forcing(&self, a: &[f64]) -> Vec<f64> {
        let nl: Vec<f64> = self.grid(a).iter().map(|&w| self.c * self.nonlinearity(w)).collect();
        self.project(&nl)
    }

    /// `r_m = μ_m a_m − c (w|w|^{2s/β}, e_m)` on the active modes, zero elsewhere.
    pub fn residual(&self, a: &[f64]) -> Vec<f64> {
        let f = self.forcing(a);
        let mut r = vec![0.0; self.dim()];
        for &i in &self.active {
            r[i] = self.table.mu[i] * a[i] - f[i];
        }
        r
    }

    /// Weight `⟨m⟩^{2l}` for each stored mode.
    pub fn weights(&self, l: f64) -> Vec<f64> {
        (self.m0()..=self.table.m_max())
            .map(|m| bracket(m).powf(2.0 * l))
            .collect()
    }

    /// `sqrt(Σ ⟨m⟩^{2l} r_m²)`.
    pub fn norm(&self, r: &[f64], l: f64) -> f64 {
        self.weights(l)
            .iter()
            .zip(r)
            .map(|(w, x)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        self.norm(r, -self.s())
    }

    /// Jacobian `diag(μ) − c M(q)` of [`Problem::residual`] on the active modes, with
    /// `q = (1+2s/β)(w² + ε²)^{s/β}` and `ε = eps_rel · max|w|`.
    pub fn jacobian(&self, a: &[f64], eps_rel: f64) -> DMatrix<f64> {
        let w = self.grid(a);
        let wmax = w.iter().fold(0.0f64, |x, v| x.max(v.abs()));
        let eps2 = (eps_rel * wmax).powi(2);
        let g = self.gamma;
        let q: Vec<f64> = w
            .iter()
            .map(|&x| {
                let r2 = x * x + eps2;
                if r2 == 0.0 {
                    0.0
                } else {
                    self.c * (1.0 + g) * r2.powf(0.5 * g)
                }
            })
            .collect();
        let m0 = self.m0();
        let kmax = 2 * self.table.m_max();
        let mut needed = vec![false; kmax + 1];
        for &i in &self.active {
            for &k in &self.active {
                let (m, l) = (m0 + i, m0 + k);
                needed[m.abs_diff(l)] = true;
                needed[m + l] = true;
            }
        }
        let ks: Vec<usize> = (0..=kmax).filter(|&k| needed[k]).collect();
        let mut cs = vec![0.0; kmax + 1];
        for (&k, v) in ks.iter().zip(self.tf.analyze_cos_modes(&q, &ks)) {
            cs[k] = v;
        }
        let n = self.active.len();
        let mut jac = DMatrix::zeros(n, n);
        for (r, &i) in self.active.iter().enumerate() {
            for (c, &k) in self.active.iter().enumerate() {
                let (m, l) = (m0 + i, m0 + k);
                jac[(r, c)] = -(cs[m.abs_diff(l)] - cs[m + l]) / (2.0 * PI);
            }
            jac[(r, r)] += self.table.mu[i];
        }
        jac
    }
}

/// Energy `I[w] = ½B(w,w) − (cβ/(2(β+s)))∫|w|^{2+2s/β}`.
pub fn functional_i(w: &SineSeries, table: &MultiplierTable, c: f64, n_grid: usize) -> Result<f64> {
    check_covered(w, table)?;
    let prob = Problem::new(table.clone(), c, n_grid)?;
    Ok(prob.energy(&prob.coeffs_of(w)?))
}

/// Dual coefficients of `I'[w]` and their `H^{−s}` norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub r: SineSeries,
    pub dual_norm: f64,
}

/// Gradient of [`functional_i`] in dual coefficients.
pub fn gradient_i(
    w: &SineSeries,
    table: &MultiplierTable,
    c: f64,
    n_grid: usize,
) -> Result<Gradient> {
    check_covered(w, table)?;
    let prob = Problem::new(table.clone(), c, n_grid)?;
    let r = prob.residual(&prob.coeffs_of(w)?);
    let dual_norm = prob.dual_norm(&r);
    let mut series = prob.series(&r).resized(w.m_max())?;
    series.m0 = w.m0;
    Ok(Gradient {
        r: series,
        dual_norm,
    })
}
