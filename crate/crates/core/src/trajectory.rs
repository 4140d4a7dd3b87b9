//! Per-step trajectory records and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::MarginSet;

pub const TRAJECTORY_HEADER: &str =
    "step,loss,grad_norm,weight_norm,v,G,F,q_min,gamma_bar,gamma_a,gamma_b,gamma_c,defined_mask,decreased";

/// Running sums and separator alignment that the early-phase bounds need
/// but the main CSV does not carry.
pub const AUX_HEADER: &str = "step,cum_loss,cum_g,alignment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub loss: f64,
    pub grad_norm: f64,
    pub weight_norm: f64,
    pub v: f64,
    pub g: f64,
    pub f: f64,
    pub q_min: f64,
    pub margins: MarginSet,
    /// L_t < L_{t−1}; false at t = 0.
    pub decreased: bool,
    /// Σ_{k<t} L_k over every step, recorded or not.
    pub cum_loss: f64,
    /// Σ_{k<t} G_k.
    pub cum_g: f64,
    /// ⟨W_t, w̄*⟩ when the dataset has a separator.
    pub alignment: Option<f64>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), num)
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    let v: f64 = s.trim().parse().map_err(|_| Error::parse("trajectory", format!("bad number `{s}`")))?;
    Ok((!v.is_nan()).then_some(v))
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::parse("trajectory", format!("bad number `{s}`")))
}

pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 300);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        let m = &r.margins;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            num(r.loss),
            num(r.grad_norm),
            num(r.weight_norm),
            num(r.v),
            num(r.g),
            num(r.f),
            num(r.q_min),
            opt(m.gamma_bar),
            opt(m.gamma_a),
            opt(m.gamma_b),
            opt(m.gamma_c),
            m.defined_mask(),
            u8::from(r.decreased)
        );
    }
    out
}

pub fn aux_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 80);
    out.push_str(AUX_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.step, num(r.cum_loss), num(r.cum_g), opt(r.alignment));
    }
    out
}

/// Parses the main CSV and, when given, the auxiliary CSV. Without the
/// auxiliary file the running sums are rebuilt from the recorded losses,
/// which is exact only for cadence 1.
pub fn parse_trajectory(main: &str, aux: Option<&str>) -> Result<Vec<TrajectoryRecord>> {
    let mut reader = csv::Reader::from_reader(main.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRAJECTORY_HEADER {
        return Err(Error::parse("trajectory", "unexpected header"));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let f = |k: usize| parse_num(&rec[k]);
        let g = |k: usize| parse_opt(&rec[k]);
        out.push(TrajectoryRecord {
            step: rec[0].trim().parse().map_err(|_| Error::parse("trajectory", "bad step"))?,
            loss: f(1)?,
            grad_norm: f(2)?,
            weight_norm: f(3)?,
            v: f(4)?,
            g: f(5)?,
            f: f(6)?,
            q_min: f(7)?,
            margins: MarginSet { gamma_bar: g(8)?, gamma_a: g(9)?, gamma_b: g(10)?, gamma_c: g(11)? },
            decreased: &rec[13] == "1",
            cum_loss: 0.0,
            cum_g: 0.0,
            alignment: None,
        });
    }
    match aux {
        Some(text) => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
            if rows.len() != out.len() {
                return Err(Error::parse("trajectory", "auxiliary file has a different number of rows"));
            }
            for (r, row) in out.iter_mut().zip(rows) {
                if row[0].trim() != r.step.to_string() {
                    return Err(Error::parse("trajectory", "auxiliary steps do not match"));
                }
                r.cum_loss = parse_num(&row[1])?;
                r.cum_g = parse_num(&row[2])?;
                r.alignment = parse_opt(&row[3])?;
            }
        }
        None => {
            let (mut cl, mut cg) = (0.0, 0.0);
            for r in out.iter_mut() {
                r.cum_loss = cl;
                r.cum_g = cg;
                cl += r.loss;
                cg += r.g;
            }
        }
    }
    Ok(out)
}

pub fn read_trajectory(dir: &Path) -> Result<Vec<TrajectoryRecord>> {
    let main_path = dir.join("trajectory.csv");
    let main = std::fs::read_to_string(&main_path).map_err(|e| Error::io(&main_path, e))?;
    let aux_path = dir.join("trajectory_aux.csv");
    let aux = std::fs::read_to_string(&aux_path).ok();
    parse_trajectory(&main, aux.as_deref())
}
