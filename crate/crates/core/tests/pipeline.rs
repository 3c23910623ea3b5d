//! End-to-end checks across modules: symbols against quadrature, solve through export,
//! frozen outputs.

use std::path::PathBuf;

use gsqg::export::{self, field_svg, read_json, Exportable, Format};
use gsqg::field::{build_field, irrotational_field, FieldGrid, GridSpec};
use gsqg::kernel_oracle::{kernel_fourier_coeff, QuadratureConfig};
use gsqg::multiplier::{build_table, khat, Params, DEFAULT_TOL};
use gsqg::solver::{solution_branch, solve, verify_solution, BranchMethod, SolveConfig, SolveResult};
use gsqg::spectral::{functional_i, gradient_i, SineSeries};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

fn small() -> SolveConfig {
    SolveConfig {
        m_max: 64,
        n_grid: 1024,
        ..SolveConfig::default()
    }
}

#[test]
fn series_symbol_matches_kernel_quadrature() {
    let (s, beta) = (0.5, -0.5);
    let p = Params::new(s, beta, 0).unwrap();
    let series = khat(&p, 1, DEFAULT_TOL).unwrap();
    let quad = kernel_fourier_coeff(1, s, beta, &QuadratureConfig::default()).unwrap();
    assert!((quad.value - series).abs() <= 1e-6 * series);
}

#[test]
fn irrotational_svg_is_frozen() {
    let want = std::fs::read_to_string(fixture("irrotational_beta1.svg")).unwrap();
    let f = irrotational_field(1.0, &GridSpec::default()).unwrap();
    assert_eq!(field_svg(&f), want);
}

#[test]
fn frozen_solutions_satisfy_the_weak_form() {
    for tag in ["minimizing", "mountain_pass", "saddle", "saddle_scale_invariant", "mountain_pass_small_s"] {
        let res: SolveResult = read_json(&fixture(&format!("solve_{tag}.json"))).unwrap();
        let table = build_table(&res.params(), res.m_max, DEFAULT_TOL).unwrap();
        for m in res.w.m0..=res.w.m_max() {
            let lhs = table.mu_at(m).unwrap() * res.w.coeff(m);
            assert!((lhs - res.g.coeff(m)).abs() <= 1e-8 * res.norm(), "{tag} mode {m}");
        }
        let g = gradient_i(&res.w, &table, res.c, res.n_grid).unwrap();
        assert!(g.dual_norm <= 1e-10, "{tag}: {}", g.dual_norm);
    }
}

#[test]
fn solution_round_trips_through_files() {
    let res = solve(0.3, 0.4, 1, &small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sol.json");
    export::export(Exportable::Solution(&res), Format::Json, &path).unwrap();
    let back: SolveResult = read_json(&path).unwrap();
    assert_eq!(back, res);

    let csv = export::render(Exportable::Solution(&res), Format::Csv).unwrap();
    assert_eq!(csv.lines().count(), 1 + res.w.coeffs.len());
    assert!(export::render(Exportable::Solution(&res), Format::Svg).is_err());

    let spec = GridSpec {
        n_r: 8,
        n_theta: 64,
        ..GridSpec::default()
    };
    let field = build_field(&res.w, &res.g, res.s, res.beta, &spec).unwrap();
    let fpath = dir.path().join("field.json");
    export::export(Exportable::Field(&field), Format::Json, &fpath).unwrap();
    let fback: FieldGrid = read_json(&fpath).unwrap();
    assert_eq!(fback, field);
}

#[test]
fn field_matches_profile_and_homogeneity() {
    let res = solve(0.75, 1.0, 2, &small()).unwrap();
    let spec = GridSpec {
        r_min: 0.5,
        r_max: 1.0,
        n_r: 2,
        n_theta: 32,
    };
    let f = build_field(&res.w, &res.g, res.s, res.beta, &spec).unwrap();
    for j in 0..spec.n_theta {
        let th = spec.theta(j);
        let w = res.w.eval(th);
        assert!((f.psi[0][j] - w * 0.5f64.powf(-res.beta)).abs() < 1e-12);
        assert!((f.psi[1][j] - w).abs() < 1e-12);
        let g = res.g.eval(th);
        assert!((f.omega[0][j] - g * 0.5f64.powf(-res.beta - 2.0 * res.s)).abs() < 1e-12);
    }
}

#[test]
fn verification_flags_an_unconverged_profile() {
    let res = solve(0.75, 1.0, 2, &small()).unwrap();
    let table = build_table(&res.params(), res.m_max, DEFAULT_TOL).unwrap();
    assert!(verify_solution(&res, &table, &small()).unwrap().weak_form_ok);
    let mut bad = res.clone();
    bad.g = bad.w.scaled(1.5);
    assert!(!verify_solution(&bad, &table, &small()).unwrap().weak_form_ok);
}

fn directional_error(s: f64, beta: f64, m0: usize, h: f64) -> (f64, f64) {
    let table = build_table(&Params::new(s, beta, m0).unwrap(), 16, DEFAULT_TOL).unwrap();
    let n = 17 - m0;
    let w = SineSeries::new(m0, (0..n).map(|k| 0.8 / (1.0 + k as f64).powi(2)).collect()).unwrap();
    let eta = SineSeries::new(m0, (0..n).map(|k| (-0.5f64).powi(k as i32)).collect()).unwrap();
    let g = gradient_i(&w, &table, 1.0, 256).unwrap();
    let an: f64 = g.r.coeffs.iter().zip(&eta.coeffs).map(|(a, b)| a * b).sum();
    let shift = |sign: f64| {
        let c = w.coeffs.iter().zip(&eta.coeffs).map(|(a, b)| a + sign * h * b);
        SineSeries::new(m0, c.collect()).unwrap()
    };
    let ip = functional_i(&shift(1.0), &table, 1.0, 256).unwrap();
    let im = functional_i(&shift(-1.0), &table, 1.0, 256).unwrap();
    (((ip - im) / (2.0 * h) - an).abs(), an.abs())
}

#[test]
fn gradient_difference_error_shrinks_quadratically() {
    let (e1, _) = directional_error(0.75, 1.0, 2, 1e-2);
    let (e2, _) = directional_error(0.75, 1.0, 2, 5e-3);
    assert!(e1 / e2 > 3.8 && e1 / e2 < 4.2, "{e1} {e2}");
    for beta in [-1.8, 1.0, -2.6] {
        let (e, an) = directional_error(0.75, beta, 2, 1e-4);
        assert!(e <= 1e-6 * an, "beta {beta}: {e} vs {an}");
    }
}

#[test]
fn branch_continues_through_minimizing_interval() {
    let pts = solution_branch(0.75, 2, &[-1.8, -1.75, -1.7], &small()).unwrap();
    assert_eq!(pts[0].method, BranchMethod::Fresh);
    assert!(pts.iter().all(|p| p.result.is_some()));
    for p in &pts {
        let r = p.result.as_ref().unwrap();
        assert!(r.grad_norm <= 1e-10);
        assert_eq!(p.i_value, Some(r.i_value));
    }
}
