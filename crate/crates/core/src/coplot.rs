//! Long-format coplot data: estimated effects against one covariate,
//! conditioned on two others and grouped within panels by a fourth.

use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoplotBins {
    pub vertical: usize,
    pub horizontal: usize,
    /// Fraction of each interval shared with its neighbour; 0 gives
    /// disjoint quantile bins.
    pub overlap: f64,
}

impl Default for CoplotBins {
    fn default() -> Self {
        CoplotBins {
            vertical: 4,
            horizontal: 3,
            overlap: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn label(&self) -> String {
        if self.lo == self.hi {
            format!("{}", self.lo)
        } else {
            format!("[{}, {}]", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoplotRecord {
    pub row: usize,
    pub vertical: usize,
    pub horizontal: usize,
    pub panel: Option<f64>,
    pub x: f64,
    pub tau_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoplotData {
    pub x_var: String,
    pub panel_var: Option<String>,
    pub vertical: Vec<Interval>,
    pub horizontal: Vec<Interval>,
    pub records: Vec<CoplotRecord>,
}

/// Conditioning intervals and, per row, the intervals containing it.
/// Variables with at most `bins` distinct values use one stratum per value.
pub fn condition_intervals(values: &[f64], bins: usize, overlap: f64, name: &str) -> (Vec<Interval>, Vec<Vec<usize>>) {
    let n = values.len();
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() == 1 {
        log::warn!("conditioning variable '{name}' is constant; using a single stratum");
    }
    let intervals: Vec<(f64, f64)> = if distinct.len() <= bins.max(1) {
        distinct.iter().map(|&v| (v, v)).collect()
    } else if overlap <= 0.0 {
        // disjoint: cut at the k/bins quantiles, ties stay together
        let mut cuts: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).collect();
        cuts.dedup();
        let mut edges = vec![sorted[0]];
        edges.extend(&cuts);
        let mut out = Vec::new();
        for (k, &lo) in edges.iter().enumerate() {
            let upper = edges.get(k + 1).copied();
            let members = sorted.iter().filter(|&&v| v >= lo && upper.is_none_or(|u| v < u));
            let hi = members.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            out.push((lo, hi));
        }
        out
    } else {
        let f = overlap.min(0.95);
        let width = n as f64 / (bins as f64 * (1.0 - f) + f);
        (0..bins)
            .map(|k| {
                let start = (k as f64 * width * (1.0 - f)).round() as usize;
                let end = ((start as f64 + width).round() as usize).clamp(start + 1, n);
                (sorted[start.min(n - 1)], sorted[end - 1])
            })
            .collect()
    };
    let membership = values
        .iter()
        .map(|&v| {
            if overlap <= 0.0 || distinct.len() <= bins {
                // disjoint: last interval whose lower edge is <= v
                vec![intervals.iter().rposition(|&(lo, _)| lo <= v).expect("v >= min")]
            } else {
                (0..intervals.len())
                    .filter(|&k| intervals[k].0 <= v && v <= intervals[k].1)
                    .collect()
            }
        })
        .collect();
    let intervals = intervals
        .into_iter()
        .enumerate()
        .map(|(index, (lo, hi))| Interval { index, lo, hi })
        .collect();
    (intervals, membership)
}

fn column_of(data: &Dataset, name: &str) -> Result<usize> {
    data.names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::config(format!("unknown variable '{name}'")))
}

pub fn coplot_export(
    tau_hat: &[f64],
    data: &Dataset,
    x_axis_var: &str,
    panel_var: Option<&str>,
    cond_var_vertical: &str,
    cond_var_horizontal: &str,
    bins: CoplotBins,
) -> Result<CoplotData> {
    if tau_hat.len() != data.n() {
        return Err(Error::Schema {
            expected: data.n(),
            got: tau_hat.len(),
        });
    }
    let xc = column_of(data, x_axis_var)?;
    let pc = panel_var.map(|p| column_of(data, p)).transpose()?;
    let vc = column_of(data, cond_var_vertical)?;
    let hc = column_of(data, cond_var_horizontal)?;
    let (vertical, vm) = condition_intervals(data.x.column(vc), bins.vertical, bins.overlap, cond_var_vertical);
    let (horizontal, hm) =
        condition_intervals(data.x.column(hc), bins.horizontal, bins.overlap, cond_var_horizontal);
    let mut records = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        for &v in &vm[i] {
            for &h in &hm[i] {
                records.push(CoplotRecord {
                    row: i,
                    vertical: v,
                    horizontal: h,
                    panel: pc.map(|c| data.x.get(i, c)),
                    x: data.x.get(i, xc),
                    tau_hat: tau_hat[i],
                });
            }
        }
    }
    Ok(CoplotData {
        x_var: x_axis_var.to_string(),
        panel_var: panel_var.map(String::from),
        vertical,
        horizontal,
        records,
    })
}

impl CoplotData {
    /// Columns: row, stratum_v, stratum_h, v_range, h_range, panel, x, tau_hat.
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["row", "stratum_v", "stratum_h", "v_range", "h_range", "panel", "x", "tau_hat"])?;
        for r in &self.records {
            out.write_record([
                (r.row + 1).to_string(),
                (r.vertical + 1).to_string(),
                (r.horizontal + 1).to_string(),
                self.vertical[r.vertical].label(),
                self.horizontal[r.horizontal].label(),
                r.panel.map(|p| p.to_string()).unwrap_or_default(),
                r.x.to_string(),
                r.tau_hat.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
