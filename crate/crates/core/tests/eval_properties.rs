use bbcreds_core::config::ProtocolConfig;
use bbcreds_core::eval::{estimate_far, estimate_frr, sweep, Stage};

#[test]
fn frr_is_nondecreasing_in_sigma() {
    let cfg = ProtocolConfig::default();
    let reports: Vec<_> = [0.01, 0.03, 0.05, 0.10]
        .iter()
        .map(|&s| estimate_frr(&cfg, s, 1000, 99).unwrap().frr.unwrap())
        .collect();
    for pair in reports.windows(2) {
        // A decrease is tolerated only inside overlapping intervals.
        assert!(
            pair[1].rate >= pair[0].rate || pair[1].wilson_high >= pair[0].wilson_low,
            "{pair:?}"
        );
    }
    assert!(reports[0].rate > 0.5, "sigma 0.01 is far past the correction radius");
}

#[test]
fn far_is_zero_and_failures_stop_early() {
    let cfg = ProtocolConfig::default();
    let a = estimate_far(&cfg, 10_000, 123).unwrap();
    assert_eq!(a.far.unwrap().events, 0);
    let h = a.impostor_stages;
    assert_eq!(h.total(), 10_000);
    assert_eq!(h.get(Stage::Decrypt), 0);
    assert_eq!(h.get(Stage::Success), 0);
    assert_eq!(estimate_far(&cfg, 10_000, 123).unwrap(), a);
}

#[test]
fn sweep_output_is_byte_identical() {
    let cfg = ProtocolConfig::default();
    let run = || {
        let mut out = vec![];
        sweep(&cfg, &[0.005, 0.0, 0.006], 1000, 8, &mut out).unwrap();
        out
    };
    let first = run();
    assert_eq!(first, run());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 4);
}
