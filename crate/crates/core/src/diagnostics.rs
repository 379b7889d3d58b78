//! Per-instant diagnostics records and their CSV/JSON encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mollifier::MollifierProfile;
use crate::state::FlowState;

/// Which tail masses a record carries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsSpec {
    /// Axial radii `h` for `m_t(h)`; strictly increasing.
    pub h_grid: Vec<f64>,
    /// `(R, h)` pairs for the mollified tail; each with `R >= 2h`.
    pub mollifier_pairs: Vec<(f64, f64)>,
}

impl DiagnosticsSpec {
    pub fn validate(&self) -> Result<()> {
        for (k, w) in self.h_grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Config(format!(
                    "h_grid must be strictly increasing (entries {k} and {})",
                    k + 1
                )));
            }
        }
        if self.h_grid.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::Config("h_grid entries must be finite and >= 0".into()));
        }
        for &(r, h) in &self.mollifier_pairs {
            MollifierProfile::new(r, h).map_err(|_| {
                Error::Config(format!("mollifier pair (R = {r}, h = {h}) violates R >= 2h > 0"))
            })?;
        }
        Ok(())
    }

    /// Column names in CSV order.
    pub fn csv_header(&self) -> Vec<String> {
        let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        cols.extend(self.h_grid.iter().map(|h| format!("m_h={}", fmt_param(*h))));
        cols.extend(
            self.mollifier_pairs
                .iter()
                .map(|(r, h)| format!("mu_R={}_h={}", fmt_param(*r), fmt_param(*h))),
        );
        cols
    }
}

pub const FIXED_COLUMNS: [&str; 7] = [
    "time",
    "total_mass",
    "diameter",
    "max_abs_x1",
    "center_x1",
    "first_moment_x1",
    "hamiltonian",
];

fn fmt_param(x: f64) -> String {
    format!("{x}")
}

/// Float formatting used in every CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub total_mass: f64,
    pub tail_mass: Vec<(f64, f64)>,
    pub mollified_tail: Vec<(f64, f64, f64)>,
    pub diameter: f64,
    pub max_abs_x1: f64,
    pub first_moment_x1: f64,
    /// `None` when the total circulation vanishes.
    pub center_x1: Option<f64>,
    pub hamiltonian: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_id: Option<u64>,
}

impl DiagnosticsRecord {
    pub fn measure(state: &FlowState, spec: &DiagnosticsSpec) -> Result<Self> {
        let mut mollified = Vec::with_capacity(spec.mollifier_pairs.len());
        for &(r, h) in &spec.mollifier_pairs {
            let w = MollifierProfile::new(r, h)?;
            mollified.push((r, h, state.mollified_tail(&w)));
        }
        let center = if state.total_mass() == 0.0 {
            None
        } else {
            Some(state.center_x1()?)
        };
        Ok(Self {
            time: state.time,
            total_mass: state.total_mass(),
            tail_mass: spec.h_grid.iter().map(|&h| (h, state.tail_mass(h))).collect(),
            mollified_tail: mollified,
            diameter: state.diameter_x1()?,
            max_abs_x1: state.max_abs_x1(),
            first_moment_x1: state.first_moment_x1(),
            center_x1: center,
            hamiltonian: state.hamiltonian()?,
            ensemble_id: None,
        })
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            fmt_f64(self.time),
            fmt_f64(self.total_mass),
            fmt_f64(self.diameter),
            fmt_f64(self.max_abs_x1),
            self.center_x1.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.first_moment_x1),
            fmt_f64(self.hamiltonian),
        ];
        row.extend(self.tail_mass.iter().map(|(_, m)| fmt_f64(*m)));
        row.extend(self.mollified_tail.iter().map(|(_, _, mu)| fmt_f64(*mu)));
        row
    }

    /// Parse a row written by [`csv_row`](Self::csv_row) under `spec`'s header.
    pub fn from_csv_row(row: &csv::StringRecord, spec: &DiagnosticsSpec) -> Result<Self> {
        let expected = FIXED_COLUMNS.len() + spec.h_grid.len() + spec.mollifier_pairs.len();
        if row.len() != expected {
            return Err(Error::Config(format!(
                "diagnostics row has {} columns, expected {expected}",
                row.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            row[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("column {i}: {e}")))
        };
        let center = if row[4].trim().is_empty() { None } else { Some(num(4)?) };
        let base = FIXED_COLUMNS.len();
        let mut tail = Vec::with_capacity(spec.h_grid.len());
        for (k, &h) in spec.h_grid.iter().enumerate() {
            tail.push((h, num(base + k)?));
        }
        let base = base + spec.h_grid.len();
        let mut moll = Vec::with_capacity(spec.mollifier_pairs.len());
        for (k, &(r, h)) in spec.mollifier_pairs.iter().enumerate() {
            moll.push((r, h, num(base + k)?));
        }
        Ok(Self {
            time: num(0)?,
            total_mass: num(1)?,
            diameter: num(2)?,
            max_abs_x1: num(3)?,
            center_x1: center,
            first_moment_x1: num(5)?,
            hamiltonian: num(6)?,
            tail_mass: tail,
            mollified_tail: moll,
            ensemble_id: None,
        })
    }
}

/// Recover the h-grid and mollifier pairs from a header row.
pub fn spec_from_header(header: &csv::StringRecord) -> Result<DiagnosticsSpec> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::Config("unrecognised diagnostics CSV header".into()));
    }
    let bad = |c: &str| Error::Config(format!("unrecognised diagnostics column '{c}'"));
    let mut spec = DiagnosticsSpec::default();
    for c in &cols[FIXED_COLUMNS.len()..] {
        if let Some(h) = c.strip_prefix("m_h=") {
            spec.h_grid.push(h.parse().map_err(|_| bad(c))?);
        } else if let Some(rest) = c.strip_prefix("mu_R=") {
            let (r, h) = rest.split_once("_h=").ok_or_else(|| bad(c))?;
            spec.mollifier_pairs
                .push((r.parse().map_err(|_| bad(c))?, h.parse().map_err(|_| bad(c))?));
        } else {
            return Err(bad(c));
        }
    }
    Ok(spec)
}

/// Write records (with header) as RFC 4180 CSV.
pub fn write_csv<W: Write>(out: W, spec: &DiagnosticsSpec, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(spec.csv_header())?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a diagnostics CSV produced by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<(DiagnosticsSpec, Vec<DiagnosticsRecord>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let spec = spec_from_header(rdr.headers()?)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        out.push(DiagnosticsRecord::from_csv_row(&row?, &spec)?);
    }
    Ok((spec, out))
}

/// Per-time ensemble mean and standard error of every numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub time: f64,
    pub seeds: usize,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Aggregate per-seed record streams sharing one schedule.
pub fn aggregate(streams: &[Vec<DiagnosticsRecord>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = streams.first() else {
        return Ok(Vec::new());
    };
    if streams.iter().any(|s| s.len() != first.len()) {
        return Err(domain("per-seed diagnostics streams have different lengths"));
    }
    let values = |r: &DiagnosticsRecord| -> Vec<f64> {
        let mut v = vec![
            r.total_mass,
            r.diameter,
            r.max_abs_x1,
            r.center_x1.unwrap_or(f64::NAN),
            r.first_moment_x1,
            r.hamiltonian,
        ];
        v.extend(r.tail_mass.iter().map(|t| t.1));
        v.extend(r.mollified_tail.iter().map(|t| t.2));
        v
    };
    let n = streams.len() as f64;
    let mut rows = Vec::with_capacity(first.len());
    for k in 0..first.len() {
        let cols: Vec<Vec<f64>> = streams.iter().map(|s| values(&s[k])).collect();
        let width = cols[0].len();
        let mut mean = vec![0.0; width];
        let mut se = vec![0.0; width];
        for c in 0..width {
            let m = cols.iter().map(|v| v[c]).sum::<f64>() / n;
            let var = if streams.len() > 1 {
                cols.iter().map(|v| (v[c] - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            mean[c] = m;
            se[c] = (var / n).sqrt();
        }
        rows.push(AggregateRow {
            time: first[k].time,
            seeds: streams.len(),
            mean,
            std_err: se,
        });
    }
    Ok(rows)
}

/// Header for the aggregate CSV: `time, seeds`, then `<col>_mean, <col>_se`.
pub fn aggregate_header(spec: &DiagnosticsSpec) -> Vec<String> {
    let names: Vec<String> = spec.csv_header().into_iter().skip(1).collect();
    let mut cols = vec!["time".to_string(), "seeds".to_string()];
    for n in names {
        cols.push(format!("{n}_mean"));
        cols.push(format!("{n}_se"));
    }
    cols
}

pub fn write_aggregate_csv<W: Write>(out: W, spec: &DiagnosticsSpec, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(aggregate_header(spec))?;
    for r in rows {
        let mut rec = vec![fmt_f64(r.time), r.seeds.to_string()];
        for (m, s) in r.mean.iter().zip(&r.std_err) {
            rec.push(fmt_f64(*m));
            rec.push(fmt_f64(*s));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}
