use spinheat_core::heat::{dseff, dseff_free, heat_trace_deformed, heat_trace_free, Spectrum};
use spinheat_core::operators::{BlockSet, DeformationConfig, ScalarDatum};

/// -2 d log K / d log σ by a centred difference in log σ.
fn centred(k: impl Fn(f64) -> f64, sigma: f64) -> f64 {
    let h: f64 = 1e-4;
    let up = k(sigma * h.exp()).ln();
    let down = k(sigma * (-h).exp()).ln();
    -2.0 * (up - down) / (2.0 * h)
}

#[test]
fn free_dimension_matches_finite_difference() {
    for sigma in [0.005, 0.02, 0.1, 1.0, 5.0] {
        let fd = centred(|s| heat_trace_free(80, s), sigma);
        assert!((dseff_free(80, sigma) - fd).abs() < 1e-6, "σ = {sigma}");
    }
}

#[test]
fn deformed_dimension_matches_finite_difference() {
    let set = BlockSet::assemble(&DeformationConfig::new(30, 0.6, ScalarDatum::cos_theta()).unwrap()).unwrap();
    let spectrum = Spectrum::compute(&set).unwrap();
    for sigma in [0.02, 0.1, 0.5, 3.0] {
        let fd = centred(|s| heat_trace_deformed(&spectrum, s), sigma);
        assert!((dseff(&spectrum, sigma) - fd).abs() < 1e-6, "σ = {sigma}");
    }
}

#[test]
fn free_dimension_tends_to_two_and_to_zero() {
    assert!((dseff_free(200, 1e-3) - 2.0).abs() < 1e-3);
    // Only the four n = 1 states survive at large σ: d = 2σ.
    let s = 40.0;
    assert!((dseff_free(20, s) - 2.0 * s).abs() < 1e-6 * s);
}
