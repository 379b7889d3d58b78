//! Confinement envelopes, comparison of measured tails against them, and
//! log-log growth-exponent fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{domain, Error, Result};

fn default_ell() -> f64 {
    1.0
}

/// Radius curves beyond which the tail mass is claimed to be small, with
/// the decay exponent of the associated bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeSpec {
    /// `sqrt(t log^alpha t)` with bound `t^-ell`.
    NsSqrtLog {
        alpha: f64,
        #[serde(default = "default_ell")]
        ell: f64,
    },
    /// `t^beta` with bound `exp(-t^delta)`.
    NsPower { beta: f64, delta: f64 },
    /// `(t log^alpha t)^(1/3)` with bound `t^-ell`.
    EulerCuberootLog {
        alpha: f64,
        #[serde(default = "default_ell")]
        ell: f64,
    },
}

impl EnvelopeSpec {
    pub fn ns_sqrt_log(alpha: f64, ell: f64) -> Result<Self> {
        let s = Self::NsSqrtLog { alpha, ell };
        s.validate().map(|_| s)
    }

    pub fn ns_power(beta: f64, delta: f64) -> Result<Self> {
        let s = Self::NsPower { beta, delta };
        s.validate().map(|_| s)
    }

    pub fn euler_cuberoot_log(alpha: f64, ell: f64) -> Result<Self> {
        let s = Self::EulerCuberootLog { alpha, ell };
        s.validate().map(|_| s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::NsSqrtLog { alpha, ell } | Self::EulerCuberootLog { alpha, ell } => {
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(domain(format!("alpha must exceed 1, got {alpha}")));
                }
                if !(ell > 0.0 && ell.is_finite()) {
                    return Err(domain(format!("ell must be positive, got {ell}")));
                }
            }
            Self::NsPower { beta, delta } => {
                if !(beta > 0.5 && beta.is_finite()) {
                    return Err(domain(format!("beta must exceed 1/2, got {beta}")));
                }
                if !(delta > 0.0 && delta < 2.0 * beta - 1.0) {
                    return Err(domain(format!(
                        "delta must lie in (0, 2 beta - 1) = (0, {}), got {delta}",
                        2.0 * beta - 1.0
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 1.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("envelopes are defined for t > 1, got {t}")))
    }
}

pub fn envelope_radius(spec: &EnvelopeSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    let lt = t.ln();
    Ok(match *spec {
        EnvelopeSpec::NsSqrtLog { alpha, .. } => (t * lt.powf(alpha)).sqrt(),
        EnvelopeSpec::NsPower { beta, .. } => t.powf(beta),
        EnvelopeSpec::EulerCuberootLog { alpha, .. } => (t * lt.powf(alpha)).cbrt(),
    })
}

pub fn envelope_bound(spec: &EnvelopeSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    check_time(t)?;
    Ok(match *spec {
        EnvelopeSpec::NsSqrtLog { ell, .. } | EnvelopeSpec::EulerCuberootLog { ell, .. } => t.powf(-ell),
        EnvelopeSpec::NsPower { delta, .. } => (-t.powf(delta)).exp(),
    })
}

/// Least-squares fit of `log y = a + b log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub exponent: f64,
    pub intercept: f64,
    pub std_err: f64,
    /// Two-sided 95% confidence interval on the exponent.
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    pub t_min: f64,
    pub t_max: f64,
}

pub const MIN_FIT_SAMPLES: usize = 8;
pub const MIN_FIT_SPAN: f64 = 5.0;

/// Fit the log-log slope of `ys` against `ts`, using the points with
/// `t` inside `window` (inclusive) when given.
pub fn fit_loglog(ts: &[f64], ys: &[f64], window: Option<(f64, f64)>) -> Result<SlopeFit> {
    if ts.len() != ys.len() {
        return Err(domain("fit needs as many values as times"));
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, y)| (*t, *y))
        .collect();
    let t_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_max = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = if pts.is_empty() { 0.0 } else { t_max / t_min };
    if pts.len() < MIN_FIT_SAMPLES || !(span >= MIN_FIT_SPAN) {
        return Err(Error::InsufficientSamples {
            have: pts.len(),
            span,
        });
    }
    if pts.iter().any(|&(t, y)| !(t > 0.0 && y > 0.0)) {
        return Err(domain("log-log fit needs positive times and values"));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let zs: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let mz = zs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxz: f64 = xs.iter().zip(&zs).map(|(x, z)| (x - mx) * (z - mz)).sum();
    let b = sxz / sxx;
    let a = mz - b * mx;
    let rss: f64 = xs.iter().zip(&zs).map(|(x, z)| (z - a - b * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| domain(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        exponent: b,
        intercept: a,
        std_err: se,
        ci_low: b - q * se,
        ci_high: b + q * se,
        samples: pts.len(),
        t_min,
        t_max,
    })
}

/// Tail mass at radius `r` from a record's `h` grid, interpolated
/// log-linearly (linearly when an endpoint is zero). Returns the value and
/// whether `r` fell outside the grid, in which case the value is the
/// conservative bound: total mass below the grid, the last grid value
/// beyond it.
pub fn interpolate_tail(rec: &DiagnosticsRecord, r: f64) -> (f64, bool) {
    let grid = &rec.tail_mass;
    if grid.is_empty() || r < grid[0].0 {
        return (rec.total_mass, true);
    }
    let last = grid[grid.len() - 1];
    if r >= last.0 {
        return (last.1, r > last.0);
    }
    let k = grid.partition_point(|&(h, _)| h <= r);
    let (h0, m0) = grid[k - 1];
    let (h1, m1) = grid[k];
    let s = (r - h0) / (h1 - h0);
    let m = if m0 > 0.0 && m1 > 0.0 {
        (m0.ln() + s * (m1.ln() - m0.ln())).exp()
    } else {
        m0 + s * (m1 - m0)
    };
    (m, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSample {
    pub t: f64,
    pub radius: f64,
    pub tail: f64,
    pub tail_extrapolated: bool,
    pub bound: f64,
    /// `tail / bound`; absent when the bound underflows to zero.
    pub ratio: Option<f64>,
    pub diameter: f64,
    /// `diameter / radius`.
    pub confinement_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport {
    pub envelope: EnvelopeSpec,
    pub samples: Vec<ReportSample>,
    pub max_ratio: Option<f64>,
    pub diameter_fit: SlopeFit,
    /// Log-log slope of the confinement ratio over the same window.
    pub confinement_ratio_slope: f64,
    /// Every defined tail/bound ratio is at most 1.
    pub tail_within_bound: bool,
    /// The confinement ratio grows over the fit window.
    pub non_confinement: bool,
    pub pass: bool,
}

/// Compare records against the envelope and fit the diameter growth over
/// `window` (all samples when `None`).
pub fn build_report(
    records: &[DiagnosticsRecord],
    spec: &EnvelopeSpec,
    window: Option<(f64, f64)>,
) -> Result<ConfinementReport> {
    spec.validate()?;
    if records.is_empty() {
        return Err(domain("report needs at least one record"));
    }
    let mut recs: Vec<&DiagnosticsRecord> = records.iter().collect();
    recs.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut samples = Vec::with_capacity(recs.len());
    for r in recs {
        let radius = envelope_radius(spec, r.time)?;
        let bound = envelope_bound(spec, r.time)?;
        let (tail, tail_extrapolated) = interpolate_tail(r, radius);
        samples.push(ReportSample {
            t: r.time,
            radius,
            tail,
            tail_extrapolated,
            bound,
            ratio: (bound > 0.0).then(|| tail / bound),
            diameter: r.diameter,
            confinement_ratio: r.diameter / radius,
        });
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let ds: Vec<f64> = samples.iter().map(|s| s.diameter).collect();
    let diameter_fit = fit_loglog(&ts, &ds, window)?;
    let cr: Vec<f64> = samples.iter().map(|s| s.confinement_ratio).collect();
    let confinement_ratio_slope = fit_loglog(&ts, &cr, window)?.exponent;
    let max_ratio = samples
        .iter()
        .filter_map(|s| s.ratio)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
    let tail_within_bound = max_ratio.is_none_or(|m| m <= 1.0);
    let non_confinement = confinement_ratio_slope > 0.0;
    Ok(ConfinementReport {
        envelope: *spec,
        samples,
        max_ratio,
        diameter_fit,
        confinement_ratio_slope,
        tail_within_bound,
        non_confinement,
        pass: tail_within_bound && !non_confinement,
    })
}

pub const REPORT_CSV_HEADER: [&str; 8] = [
    "t",
    "radius",
    "tail",
    "tail_extrapolated",
    "bound",
    "ratio",
    "diameter",
    "confinement_ratio",
];

pub fn write_report_csv<W: std::io::Write>(out: W, report: &ConfinementReport) -> Result<()> {
    use crate::diagnostics::fmt_f64;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for s in &report.samples {
        w.write_record([
            fmt_f64(s.t),
            fmt_f64(s.radius),
            fmt_f64(s.tail),
            s.tail_extrapolated.to_string(),
            fmt_f64(s.bound),
            s.ratio.map(fmt_f64).unwrap_or_default(),
            fmt_f64(s.diameter),
            fmt_f64(s.confinement_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn record(t: f64, d: f64, tails: Vec<(f64, f64)>) -> DiagnosticsRecord {
        DiagnosticsRecord {
            time: t,
            total_mass: 1.0,
            tail_mass: tails,
            mollified_tail: vec![],
            diameter: d,
            max_abs_x1: d / 2.0,
            first_moment_x1: 0.0,
            center_x1: Some(0.0),
            hamiltonian: 0.0,
            ensemble_id: None,
        }
    }

    fn times() -> Vec<f64> {
        (0..12).map(|k| 3.0 * 1.5f64.powi(k)).collect()
    }

    #[test]
    fn radius_examples() {
        let s = EnvelopeSpec::ns_sqrt_log(2.0, 1.0).unwrap();
        assert!((envelope_radius(&s, E * E).unwrap() - 2.0 * E).abs() < 1e-12);
        let p = EnvelopeSpec::ns_power(1.0, 0.5).unwrap();
        assert!((envelope_radius(&p, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(EnvelopeSpec::euler_cuberoot_log(1.0, 1.0).is_err());
        assert!(EnvelopeSpec::ns_power(0.5, 0.1).is_err());
        assert!(EnvelopeSpec::ns_power(1.0, 1.0).is_err());
        assert!(envelope_radius(&s, 1.0).is_err());
    }

    #[test]
    fn bound_examples() {
        let s = EnvelopeSpec::ns_sqrt_log(2.0, 2.0).unwrap();
        assert!((envelope_bound(&s, 10.0).unwrap() - 0.01).abs() < 1e-15);
        let p = EnvelopeSpec::ns_power(1.0, 0.5).unwrap();
        assert!((envelope_bound(&p, 100.0).unwrap() - 4.539_992_976_248_485e-5).abs() < 1e-17);
    }

    #[test]
    fn radius_monotone_in_t_and_alpha() {
        for spec in [
            EnvelopeSpec::ns_sqrt_log(1.5, 1.0).unwrap(),
            EnvelopeSpec::ns_power(0.8, 0.3).unwrap(),
            EnvelopeSpec::euler_cuberoot_log(3.0, 1.0).unwrap(),
        ] {
            let mut prev = 0.0;
            for k in 0..200 {
                let t = 3.0 + 0.37 * k as f64;
                let r = envelope_radius(&spec, t).unwrap();
                assert!(r > prev);
                prev = r;
            }
        }
        let a = envelope_radius(&EnvelopeSpec::ns_sqrt_log(1.5, 1.0).unwrap(), 4.0).unwrap();
        let b = envelope_radius(&EnvelopeSpec::ns_sqrt_log(2.5, 1.0).unwrap(), 4.0).unwrap();
        assert!(b > a);
    }

    #[test]
    fn exact_cube_root_growth() {
        let recs: Vec<_> = times().into_iter().map(|t| record(t, t.cbrt(), vec![])).collect();
        let spec = EnvelopeSpec::euler_cuberoot_log(2.0, 1.0).unwrap();
        let rep = build_report(&recs, &spec, None).unwrap();
        assert!((rep.diameter_fit.exponent - 1.0 / 3.0).abs() < 1e-6);
        assert!(!rep.non_confinement);
    }

    #[test]
    fn zero_tail_beyond_envelope() {
        let spec = EnvelopeSpec::euler_cuberoot_log(2.0, 1.0).unwrap();
        let recs: Vec<_> = times()
            .into_iter()
            .map(|t| record(t, 0.5, vec![(0.1, 0.5), (0.5, 0.0), (1e6, 0.0)]))
            .collect();
        let rep = build_report(&recs, &spec, None).unwrap();
        assert!(rep.samples.iter().all(|s| s.ratio == Some(0.0)));
        assert!(rep.pass);
    }

    #[test]
    fn linear_growth_flagged() {
        let recs: Vec<_> = times().into_iter().map(|t| record(t, t, vec![])).collect();
        let spec = EnvelopeSpec::euler_cuberoot_log(2.0, 1.0).unwrap();
        let rep = build_report(&recs, &spec, None).unwrap();
        assert!(rep.non_confinement);
        assert!(!rep.pass);
        assert!(rep.samples.windows(2).all(|w| w[1].confinement_ratio > w[0].confinement_ratio));
    }

    #[test]
    fn permutation_invariant() {
        let mut recs: Vec<_> = times().into_iter().map(|t| record(t, t.sqrt() + 1.0, vec![(1.0, 0.3)])).collect();
        let spec = EnvelopeSpec::ns_sqrt_log(2.0, 1.0).unwrap();
        let a = build_report(&recs, &spec, None).unwrap();
        recs.reverse();
        recs.swap(2, 7);
        let b = build_report(&recs, &spec, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_samples() {
        let recs: Vec<_> = (0..7).map(|k| record(2.0 + k as f64 * 5.0, 1.0, vec![])).collect();
        let spec = EnvelopeSpec::ns_sqrt_log(2.0, 1.0).unwrap();
        assert!(matches!(build_report(&recs, &spec, None), Err(Error::InsufficientSamples { have: 7, .. })));
        let recs: Vec<_> = (0..10).map(|k| record(2.0 + k as f64 * 0.5, 1.0, vec![])).collect();
        assert!(matches!(build_report(&recs, &spec, None), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn interpolation_is_log_linear() {
        let r = record(2.0, 1.0, vec![(1.0, 1e-2), (2.0, 1e-4), (3.0, 0.0)]);
        let (m, ext) = interpolate_tail(&r, 1.5);
        assert!((m - 1e-3).abs() < 1e-15);
        assert!(!ext);
        let (m, _) = interpolate_tail(&r, 2.5);
        assert!((m - 0.5e-4).abs() < 1e-18);
        assert_eq!(interpolate_tail(&r, 0.5), (1.0, true));
        assert_eq!(interpolate_tail(&r, 9.0), (0.0, true));
    }

    #[test]
    fn fit_confidence_interval_covers_noisy_slope() {
        let ts: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let ys: Vec<f64> = ts
            .iter()
            .enumerate()
            .map(|(i, t)| t.powf(0.5) * (1.0 + 0.01 * if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let f = fit_loglog(&ts, &ys, None).unwrap();
        assert!(f.ci_low < 0.5 && 0.5 < f.ci_high);
        assert!(f.ci_high - f.ci_low < 0.05);
    }
}
