//! Acceptance criteria at full desk scale. Each test prints one PASS/FAIL
//! line. Tolerances and sample sizes are pinned in `validation::tolerance`.

use std::io::Write;
use std::sync::OnceLock;

use sinebeta_core::estimate::CorrelationEstimate;
use sinebeta_core::validation::{self, CriterionReport, ValidationOptions, DECAY_R, TWO_POINT_R};

fn opts() -> ValidationOptions {
    ValidationOptions::default()
}

/// Writes straight to stdout so the line shows up without `--nocapture`.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").ok();
    out.flush().ok();
}

fn check(report: CriterionReport) {
    emit(&report.to_string());
    assert!(report.passed, "{report}");
}

/// β = 2 estimates at every distance used by criteria 2 and 3, computed once.
fn two_point() -> &'static Vec<(f64, CorrelationEstimate)> {
    static CELL: OnceLock<Vec<(f64, CorrelationEstimate)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut grid: Vec<f64> = TWO_POINT_R.iter().chain(DECAY_R.iter()).copied().collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        validation::two_point_estimates(&grid, &opts()).expect("two-point estimates")
    })
}

#[test]
fn criterion_01_intensity() {
    check(validation::criterion_intensity(&opts()));
}

#[test]
fn criterion_02_beta2_two_point() {
    check(validation::criterion_two_point(two_point(), &TWO_POINT_R, opts().beta2_oracle));
}

#[test]
fn criterion_03_beta2_decay_exponent() {
    let report = validation::criterion_decay(two_point());
    // The fit needs |value| > 3 std_err at every distance; report the
    // signal-to-noise ratios alongside the verdict.
    for (r, e) in two_point().iter().filter(|(r, _)| DECAY_R.contains(r)) {
        emit(&format!("  r {r:.3}: |value| / std_err = {:.2}", e.value.abs() / e.std_err));
    }
    check(report);
}

#[test]
fn criterion_04_euler_order() {
    check(validation::criterion_euler(&opts()));
}

#[test]
fn criterion_05_hellinger_closed_form() {
    check(validation::criterion_hellinger(&opts()));
}

#[test]
fn criterion_06_spectral_regularization() {
    check(validation::criterion_regularization(&opts()));
}

#[test]
fn criterion_07_mobius_round_trip() {
    check(validation::criterion_mobius(&opts()));
}

#[test]
fn criterion_08_property_suite() {
    check(validation::criterion_properties(&opts()));
}

#[test]
fn criterion_09_coupling_decay() {
    check(validation::criterion_coupling(&opts()));
}

#[test]
fn criterion_10_determinism() {
    check(validation::criterion_determinism(&opts()));
}
