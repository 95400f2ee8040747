use std::sync::Arc;

use netext::extension::{
    custom_extension, natural_extension, nearest_point_extension, zero_extension, Claims,
};
use netext::net::{build_greedy_net, NetConfig, NetHandle};
use netext::report::to_sorted_json;
use netext::symmetrize::SymmetrizeMode;
use netext::verifier::{
    contradiction_pipeline, write_reports_csv, InequalityReport, PipelineConfig,
};
use netext::RealVector;

fn small_net(dim: usize) -> Arc<NetHandle> {
    Arc::new(build_greedy_net(&NetConfig::new(dim, 2.0, 3)).unwrap())
}

fn quick(n: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        n,
        ..PipelineConfig::default()
    };
    cfg.estimation.modulus_samples = 200;
    cfg.estimation.gamma_samples = 2_000;
    cfg.transfer_samples = 200;
    cfg
}

#[test]
fn saved_nets_reload_identically() {
    let dir = tempfile::tempdir().unwrap();
    for (dim, radius) in [(3, 2.5), (6, 2.0)] {
        let net = build_greedy_net(&NetConfig::new(dim, radius, 11)).unwrap();
        let (csv, json) = (
            dir.path().join(format!("{dim}.csv")),
            dir.path().join(format!("{dim}.json")),
        );
        net.save(&csv, &json).unwrap();
        let back = NetHandle::load(&csv, &json).unwrap();
        assert_eq!(back.sidecar(), net.sidecar());
        assert!(back.iter_points().eq(net.iter_points()));
        let q = RealVector::new(vec![0.3; dim]).unwrap();
        assert_eq!(back.nearest(&q).unwrap(), net.nearest(&q).unwrap());
    }
}

#[test]
fn builtin_candidates_are_consistent() {
    let net = small_net(4);
    for cand in [
        natural_extension(),
        nearest_point_extension(net.clone()),
        zero_extension(),
    ] {
        for t in [0.05, 0.01] {
            let report = contradiction_pipeline(&cand, &net, t, &quick(4)).unwrap();
            assert!(
                report.consistent,
                "{} at t={t}: {:?}",
                cand.name(),
                report.checks
            );
            assert!(report.analytic.floor_met);
            assert!(report.checks.iter().all(|c| c.holds));
            assert!(report.checks.iter().any(|c| c.mode == "feasible-exact"));
        }
    }
}

#[test]
fn sampled_mode_runs_the_same_checks() {
    let net = small_net(5);
    let mut cfg = quick(5);
    cfg.mode = SymmetrizeMode::Sampled;
    cfg.sample_count = 3_000;
    let report = contradiction_pipeline(&natural_extension(), &net, 0.05, &cfg).unwrap();
    assert!(report.consistent);
    let modes: Vec<&str> = report.checks.iter().map(|c| c.mode.as_str()).collect();
    assert!(modes.contains(&"feasible-sampled") && modes.contains(&"analytic"));
}

#[test]
fn false_claims_make_a_run_inconsistent() {
    let net = small_net(4);
    // extends f only approximately but claims both properties
    let cheat = custom_extension(
        "clipped",
        Claims {
            extends_f: true,
            uniformly_continuous: true,
        },
        |p, x| {
            Ok(x.iter()
                .map(|&c| netext::mazur::mazur_scalar(c, p).clamp(-1.0, 1.0))
                .collect())
        },
    );
    let report = contradiction_pipeline(&cheat, &net, 0.05, &quick(4)).unwrap();
    assert!(!report.consistent);
    let claims: Vec<&str> = report
        .claim_flags
        .iter()
        .map(|f| f.claim.as_str())
        .collect();
    assert!(claims.contains(&"extends_f"), "{claims:?}");
}

#[test]
fn out_of_range_inputs_are_rejected() {
    let net = small_net(4);
    let cand = natural_extension();
    assert!(contradiction_pipeline(&cand, &net, 0.1, &quick(4)).is_err());
    assert!(contradiction_pipeline(&cand, &net, 0.0, &quick(4)).is_err());
    assert!(contradiction_pipeline(&cand, &net, 0.05, &quick(5)).is_err());
    let mut narrow = quick(4);
    narrow.p_max = 5;
    assert!(contradiction_pipeline(&cand, &net, 0.01, &narrow).is_err());
}

#[test]
fn reports_serialize_deterministically() {
    let net = small_net(4);
    let run = || {
        contradiction_pipeline(&nearest_point_extension(net.clone()), &net, 0.03, &quick(4))
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(to_sorted_json(&a).unwrap(), to_sorted_json(&b).unwrap());

    let json = serde_json::to_string(&a.checks).unwrap();
    let back: Vec<InequalityReport> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a.checks);

    let mut csv = Vec::new();
    write_reports_csv(&a.checks, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("check,n,p,k,t,lhs,rhs,holds,mode\n"));
    assert_eq!(text.lines().count(), a.checks.len() + 1);
}
