use ran::oracle::{
    exhaustive_coupling, sampled_coupling_check, Continuation, EXHAUSTIVE_COUPLING_T_CAP,
};

#[test]
fn swapped_continuation_stays_within_six() {
    for t in 1..=EXHAUSTIVE_COUPLING_T_CAP {
        let report = exhaustive_coupling(t, Continuation::Swapped).unwrap();
        println!("exhaustive t={t}: {report:?}");
        assert!(report.max_difference <= 6);
        assert!(report.max_differing_vertices <= 6);
    }
    for (t, seed) in [(100, 2), (1000, 3)] {
        let report = sampled_coupling_check(t, 10_000, seed, Continuation::Swapped).unwrap();
        println!("sampled: {report:?}");
        assert_eq!(report.pairs_checked, 10_000);
        assert!(report.max_difference <= 6);
        assert!(report.max_differing_vertices <= 6);
    }
}

#[test]
fn verbatim_continuation_is_not_a_bounded_coupling() {
    // Copying later indices verbatim maps a sub-face of one chosen face onto
    // the other run's unsplit face, so differences spread past the six
    // corners.
    let report = sampled_coupling_check(100, 10_000, 2, Continuation::Identical).unwrap();
    println!("verbatim: {report:?}");
    assert!(report.max_differing_vertices > 6);
}
