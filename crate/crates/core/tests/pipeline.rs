use std::fs::File;

use cylconf::config::{Mode, ReportSpec, RunConfig};
use cylconf::confinement::EnvelopeSpec;
use cylconf::diagnostics::read_csv;
use cylconf::runner::{self, RunStatus};

fn ns_config(dir: &std::path::Path) -> RunConfig {
    let mut c = RunConfig::from_json(
        r#"{"mode": "ns", "viscosity": 0.01, "t_end": 12.0,
            "step": {"dt": 0.2, "transport": {"dt": 0.1}, "rng_seed": 0},
            "h_grid": [0.5, 1.0, 2.0], "mollifier_pairs": [[1.0, 0.5]],
            "seeds": [5, 6, 7], "parallel_seeds": 2,
            "diagnostics_schedule": {"kind": "geometric", "t_first": 0.5, "ratio": 1.3}}"#,
    )
    .unwrap();
    c.patch.n_blobs = 80;
    c.output_dir = Some(dir.to_path_buf());
    c
}

#[test]
fn ensemble_run_aggregate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = ns_config(dir.path());
    let expected_rows = c.schedule_times(0.0).len();
    let o = runner::run(&c).unwrap();
    assert_eq!(o.manifest.status, RunStatus::Complete);
    assert_eq!(o.manifest.outputs.len(), 3);
    let mut firsts = Vec::new();
    for s in &o.manifest.outputs {
        let (spec, recs) = read_csv(File::open(&s.diagnostics).unwrap()).unwrap();
        assert_eq!(spec, c.diagnostics());
        assert_eq!(recs.len(), expected_rows);
        assert_eq!(s.rows, expected_rows);
        firsts.push(recs[recs.len() - 1].max_abs_x1);
    }
    // distinct seeds give distinct paths
    assert!(firsts[0] != firsts[1] && firsts[1] != firsts[2]);

    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), expected_rows + 1);
    assert!(agg.lines().next().unwrap().starts_with("time,seeds,total_mass_mean,total_mass_se"));

    // the same directory can then be reported on
    let mut r = c.clone();
    r.mode = Mode::Report;
    r.report = Some(ReportSpec {
        envelope: EnvelopeSpec::NsSqrtLog { alpha: 2.0, ell: 1.0 },
        inputs: vec![],
        window: None,
    });
    let rep = runner::run(&r).unwrap().report.unwrap();
    assert!(rep.samples.iter().all(|s| s.t > 1.0));
    assert!(rep.diameter_fit.samples >= 8);
    assert!(dir.path().join("report.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), rep.samples.len() + 1);
}

#[test]
fn csv_floats_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ns_config(dir.path());
    c.seeds = vec![1];
    c.t_end = 1.0;
    let o = runner::run(&c).unwrap();
    let text = std::fs::read_to_string(&o.manifest.outputs[0].diagnostics).unwrap();
    let row = text.lines().nth(1).unwrap();
    for field in row.split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn unwritable_output_dir_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut c = ns_config(&blocker.join("sub"));
    c.t_end = 0.0;
    let e = runner::run(&c).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}
