use osa_cli::*;

fn positive_21(step: f64) -> SweepConfig {
    let mut c = SweepConfig::new(2, 1, 5, SweepRegime::Positive, SweepHorizon::Infinite);
    c.grid_step = step;
    c
}

fn cell(rows: &[SweepRow], p01: f64, p11: f64) -> &SweepRow {
    rows.iter()
        .find(|r| (r.p01 - p01).abs() < 1e-12 && (r.p11 - p11).abs() < 1e-12)
        .unwrap()
}

#[test]
fn worked_cells() {
    let rows = region_sweep(&positive_21(0.05)).unwrap();
    let near = cell(&rows, 0.4, 0.45);
    assert!(near.satisfied);
    assert!((near.lhs - 1.0 / 19.0).abs() < 1e-9);
    assert!((near.threshold - 0.55 / 0.6).abs() < 1e-9);
    let far = cell(&rows, 0.05, 0.45);
    assert!(!far.satisfied);
    // delta = 0.4, so delta / (1 - delta) = 2/3
    assert!((far.lhs - 2.0 / 3.0).abs() < 1e-9);
    assert!((far.threshold - 0.55 / 0.95).abs() < 1e-9);
    for r in rows.iter().filter(|r| r.p01 == r.p11) {
        assert!(r.satisfied, "diagonal cell {r:?}");
    }
}

#[test]
fn grid_covers_the_regime_half() {
    let c = positive_21(0.25);
    assert_eq!(c.axis(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(c.cells().len(), 15);
    let mut neg = c.clone();
    neg.regime = SweepRegime::Negative;
    assert_eq!(neg.cells().len(), 10);
    assert!(neg.cells().iter().all(|(p01, p11)| p11 < p01));
    let mut both = c;
    both.regime = SweepRegime::Both;
    assert_eq!(both.cells().len(), 25);
}

#[test]
fn rows_agree_with_direct_condition_calls() {
    for horizon in [SweepHorizon::Infinite, SweepHorizon::Finite { beta: 0.6 }] {
        for (k, m) in [(2, 1), (3, 2), (4, 1)] {
            let mut c = SweepConfig::new(k, m, 5, SweepRegime::Both, horizon);
            c.grid_step = 0.05;
            let rows = region_sweep(&c).unwrap();
            assert_eq!(rows.len(), 21 * 21);
            for r in &rows {
                let direct = c.condition(r.p01, r.p11).unwrap();
                assert_eq!(r.satisfied, direct.satisfied, "{r:?}");
                assert_eq!(r.unconditional, direct.unconditional);
                assert_eq!(r.lhs, sig10(direct.lhs));
            }
        }
    }
}

#[test]
fn csv_round_trips_exactly() {
    let mut c = SweepConfig::new(3, 2, 6, SweepRegime::Both, SweepHorizon::Finite { beta: 0.7 });
    c.grid_step = 0.03;
    let rows = region_sweep(&c).unwrap();
    let text = sweep_csv_string(&rows);
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let back = parse_sweep_csv(text.as_bytes()).unwrap();
    assert_eq!(back, rows);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&rows, &path).unwrap();
    assert_eq!(read_sweep_csv(&path).unwrap(), rows);
}

#[test]
fn values_carry_ten_significant_digits() {
    assert_eq!(sig10(1.0 / 3.0), 0.3333333333);
    assert_eq!(sig10(2.0 / 3.0 * 1e-5), 6.666666667e-6);
    assert_eq!(sig10(0.45), 0.45);
    assert!(sig10(f64::INFINITY).is_infinite());
}

#[test]
fn svg_is_deterministic_and_marks_both_verdicts() {
    let c = positive_21(0.05);
    let a = sweep_svg(&c, &region_sweep(&c).unwrap());
    let b = sweep_svg(&c, &region_sweep(&c).unwrap());
    assert_eq!(a, b);
    assert!(a.starts_with("<svg"));
    assert!(a.contains(r#"class="satisfied""#));
    assert!(a.contains(r#"class="unsatisfied""#));
    assert!(a.contains(r#"class="diag""#));
    assert_eq!(a.matches("<circle").count(), c.cells().len());
}

#[test]
fn bad_steps_are_rejected() {
    for step in [0.0, -0.1, 0.3, f64::NAN] {
        let mut c = positive_21(0.05);
        c.grid_step = step;
        assert_eq!(region_sweep(&c).unwrap_err().exit_code(), 2);
    }
}

#[test]
fn counterexample_report() {
    let r = run_counterexample().unwrap();
    assert!(!r.myopic_optimal);
    assert_eq!(r.verdict(), "myopic NOT optimal");
    assert!(r.difference > 0.0);
    assert_eq!(r.deviation_action.to_one_based(), vec![1, 3]);
    let text = r.render();
    assert!(text.contains(&format!("{:.8}", r.myopic_value)));
    assert!(text.contains("myopic NOT optimal"));
}
