//! JSON, CSV and SVG-contour output.
//!
//! JSON uses shortest round-trip float formatting and CSV uses 17 significant digits,
//! so both are byte-stable for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::multiplier::MultiplierTable;
use crate::solver::SolveResult;

/// Number of contour levels drawn by [`field_svg`].
pub const CONTOUR_LEVELS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" | "svg-contours" => Ok(Format::Svg),
            other => Err(Error::domain(format!("unknown format {other:?}"))),
        }
    }
}

/// Anything the CLI writes out.
#[derive(Clone, Copy, Debug)]
pub enum Exportable<'a> {
    Field(&'a FieldGrid),
    Table(&'a MultiplierTable),
    Solution(&'a SolveResult),
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn field_csv(f: &FieldGrid) -> String {
    let spec = f.spec();
    let mut out = String::from("r,theta,psi,omega\n");
    for i in 0..f.n_r {
        for j in 0..f.n_theta {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                num(spec.radius(i)),
                num(spec.theta(j)),
                num(f.psi[i][j]),
                num(f.omega[i][j])
            );
        }
    }
    out
}

pub fn table_csv(t: &MultiplierTable) -> String {
    let mut out = String::from("m,khat,mu\n");
    for (k, (kh, mu)) in t.khat.iter().zip(&t.mu).enumerate() {
        let _ = writeln!(out, "{},{},{}", t.first_mode() + k, num(*kh), num(*mu));
    }
    out
}

pub fn solution_csv(r: &SolveResult) -> String {
    let mut out = String::from("m,w,g\n");
    for m in r.w.m0..=r.w.m_max() {
        let _ = writeln!(out, "{},{},{}", m, num(r.w.coeff(m)), num(r.g.coeff(m)));
    }
    out
}

fn coord(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// Level-set segments of `ψ` at `level` in the `(r, θ)` index plane, with θ periodic.
/// Each point is `(i, j)` in fractional grid units.
fn contour_segments(psi: &[Vec<f64>], level: f64) -> Vec<[(f64, f64); 2]> {
    let n_r = psi.len();
    let n_t = psi[0].len();
    let mut segs = vec![];
    for i in 0..n_r - 1 {
        for j in 0..n_t {
            let jn = (j + 1) % n_t;
            // corners counter-clockwise in (i, j): (i,j), (i+1,j), (i+1,j+1), (i,j+1)
            let pos = [
                (i as f64, j as f64),
                ((i + 1) as f64, j as f64),
                ((i + 1) as f64, (j + 1) as f64),
                (i as f64, (j + 1) as f64),
            ];
            let v = [psi[i][j], psi[i + 1][j], psi[i + 1][jn], psi[i][jn]];
            let case = v
                .iter()
                .enumerate()
                .fold(0usize, |c, (k, &x)| c | (usize::from(x >= level) << k));
            if case == 0 || case == 15 {
                continue;
            }
            let edge = |e: usize| {
                let (a, b) = (e, (e + 1) % 4);
                let t = (level - v[a]) / (v[b] - v[a]);
                (
                    pos[a].0 + t * (pos[b].0 - pos[a].0),
                    pos[a].1 + t * (pos[b].1 - pos[a].1),
                )
            };
            let center_in = v.iter().sum::<f64>() / 4.0 >= level;
            // edge e joins corners e and e+1
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(2, 3)],
                5 => {
                    if center_in {
                        &[(3, 2), (0, 1)]
                    } else {
                        &[(3, 0), (1, 2)]
                    }
                }
                10 => {
                    if center_in {
                        &[(0, 3), (1, 2)]
                    } else {
                        &[(0, 1), (2, 3)]
                    }
                }
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                segs.push([edge(a), edge(b)]);
            }
        }
    }
    segs
}

/// Contour plot of `ψ` with [`CONTOUR_LEVELS`] levels `max|ψ|·(−1 + 2k/16)`, `k = 1..=15`,
/// drawn in the plane `x = r cos θ`, `y = r sin θ` (y up).
pub fn field_svg(f: &FieldGrid) -> String {
    let spec = f.spec();
    let r = f.r_max;
    let vmax = f.max_abs_psi();
    let to_xy = |(fi, fj): (f64, f64)| {
        let i0 = (fi.floor() as usize).min(f.n_r - 2);
        let rad = spec.radius(i0) + (fi - i0 as f64) * (spec.radius(i0 + 1) - spec.radius(i0));
        let th = 2.0 * std::f64::consts::PI * fj / f.n_theta as f64;
        (rad * th.cos(), -rad * th.sin())
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="600" height="600">"#,
        coord(-r),
        coord(-r),
        coord(2.0 * r),
        coord(2.0 * r)
    );
    let _ = writeln!(
        out,
        r##"<g fill="none" stroke-width="{}" stroke-linecap="round">"##,
        coord(r / 300.0)
    );
    for (label, rad) in [("inner", f.r_min), ("outer", f.r_max)] {
        let _ = writeln!(
            out,
            r##"<circle class="{label}" cx="0.0000" cy="0.0000" r="{}" stroke="#999999"/>"##,
            coord(rad)
        );
    }
    if vmax > 0.0 {
        for k in 1..=CONTOUR_LEVELS {
            let level = vmax * (-1.0 + 2.0 * k as f64 / (CONTOUR_LEVELS + 1) as f64);
            let segs = contour_segments(&f.psi, level);
            if segs.is_empty() {
                continue;
            }
            let colour = match k.cmp(&(CONTOUR_LEVELS / 2 + 1)) {
                std::cmp::Ordering::Less => "#2166ac",
                std::cmp::Ordering::Equal => "#000000",
                std::cmp::Ordering::Greater => "#b2182b",
            };
            let mut d = String::new();
            for [a, b] in segs {
                let (pa, pb) = (to_xy(a), to_xy(b));
                let _ = write!(
                    d,
                    "M{} {}L{} {}",
                    coord(pa.0),
                    coord(pa.1),
                    coord(pb.0),
                    coord(pb.1)
                );
            }
            let _ = writeln!(
                out,
                r#"<path data-level="{k}" stroke="{colour}" d="{d}"/>"#
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Serialized text of `item` in `format`.
pub fn render(item: Exportable<'_>, format: Format) -> Result<String> {
    match (format, item) {
        (Format::Json, Exportable::Field(f)) => to_json(f),
        (Format::Json, Exportable::Table(t)) => to_json(t),
        (Format::Json, Exportable::Solution(r)) => to_json(r),
        (Format::Csv, Exportable::Field(f)) => Ok(field_csv(f)),
        (Format::Csv, Exportable::Table(t)) => Ok(table_csv(t)),
        (Format::Csv, Exportable::Solution(r)) => Ok(solution_csv(r)),
        (Format::Svg, Exportable::Field(f)) => Ok(field_svg(f)),
        (Format::Svg, _) => Err(Error::domain("svg export needs a field")),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `item` to `path` in `format`.
pub fn export(item: Exportable<'_>, format: Format, path: &Path) -> Result<()> {
    write_text(path, &render(item, format)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
