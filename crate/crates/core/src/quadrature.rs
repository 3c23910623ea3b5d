//! Globally adaptive Gauss–Kronrod (10/21) quadrature for vector-valued integrands.

use crate::error::{Error, Result};

// Kronrod abscissae on [0,1]; odd indices are the Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Clone, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
}

fn gk21<F>(f: &F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Panel
where
    F: Fn(f64, &mut [f64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    f(c, buf);
    for i in 0..dim {
        kron[i] = WGK[10] * buf[i];
    }
    for j in 0..10 {
        let dx = h * XGK[j];
        for x in [c - dx, c + dx] {
            f(x, buf);
            for i in 0..dim {
                kron[i] += WGK[j] * buf[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * buf[i];
                }
            }
        }
    }
    let mut error = vec![0.0; dim];
    for i in 0..dim {
        kron[i] *= h;
        gauss[i] *= h;
        error[i] = (kron[i] - gauss[i]).abs();
    }
    Panel {
        a,
        b,
        value: kron,
        error,
    }
}

/// Result of a quadrature: per-component values and error estimates.
#[derive(Clone, Debug)]
pub struct VecEstimate {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
}

/// Integrate `f` (writing `dim` components into its buffer) over the union of
/// consecutive intervals given by `breaks`, bisecting panels until every component
/// meets `max(abs_tol, rel_tol |I_i|)`.
pub fn integrate<F>(
    f: F,
    dim: usize,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<VecEstimate>
where
    F: Fn(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    let mut panels: Vec<Panel> = breaks
        .windows(2)
        .map(|w| gk21(&f, w[0], w[1], dim, &mut buf))
        .collect();
    loop {
        let mut value = vec![0.0; dim];
        let mut error = vec![0.0; dim];
        for p in &panels {
            for i in 0..dim {
                value[i] += p.value[i];
                error[i] += p.error[i];
            }
        }
        let tol: Vec<f64> = value.iter().map(|v| abs_tol.max(rel_tol * v.abs())).collect();
        let worst = (0..dim).map(|i| error[i] / tol[i]).fold(0.0, f64::max);
        if worst <= 1.0 {
            return Ok(VecEstimate { value, error });
        }
        if panels.len() >= max_panels {
            let achieved = (0..dim)
                .map(|i| error[i] / value[i].abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            return Err(Error::numeric(
                format!("adaptive quadrature exhausted {max_panels} panels"),
                achieved,
            ));
        }
        // bisect every panel carrying more than its share of the tolerance
        let share = 1.0 / panels.len() as f64;
        let mut next = Vec::with_capacity(2 * panels.len());
        let mut split_any = false;
        for p in panels {
            let load = (0..dim).map(|i| p.error[i] / tol[i]).fold(0.0, f64::max);
            let mid = 0.5 * (p.a + p.b);
            if load > share && mid > p.a && mid < p.b {
                next.push(gk21(&f, p.a, mid, dim, &mut buf));
                next.push(gk21(&f, mid, p.b, dim, &mut buf));
                split_any = true;
            } else {
                next.push(p);
            }
        }
        panels = next;
        if !split_any {
            let achieved = (0..dim)
                .map(|i| error[i] / value[i].abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            return Err(Error::numeric("quadrature panels cannot be refined further", achieved));
        }
    }
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let est = integrate(|x, out: &mut [f64]| out[0] = f(x), 1, breaks, abs_tol, rel_tol, max_panels)?;
    Ok((est.value[0], est.error[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, _) = integrate_scalar(|x| x.powi(20), &[0.0, 1.0], 1e-15, 1e-14, 64).unwrap();
        assert!((v - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn endpoint_singularity_with_grading() {
        let mut breaks = vec![0.0];
        for i in (0..50).rev() {
            breaks.push(0.5f64.powi(i));
        }
        let (v, _) = integrate_scalar(|x| x.powf(-0.4), &breaks, 1e-14, 1e-12, 2000).unwrap();
        assert!((v - 1.0 / 0.6).abs() < 1e-10, "{v}");
    }

    #[test]
    fn vector_components() {
        let est = integrate(
            |x, out: &mut [f64]| {
                out[0] = x.sin();
                out[1] = (3.0 * x).cos();
            },
            2,
            &[0.0, 1.0, 2.0],
            1e-14,
            1e-13,
            64,
        )
        .unwrap();
        assert!((est.value[0] - (1.0 - 2f64.cos())).abs() < 1e-13);
        assert!((est.value[1] - (6f64).sin() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn reports_failure() {
        let r = integrate_scalar(|x| 1.0 / x, &[0.0, 1.0], 1e-14, 1e-14, 64);
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }
}
