use std::path::PathBuf;

use mlmcmc::harness::{parse_config, CouplingKind};

fn bundled() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "json")).collect();
    v.sort();
    v
}

#[test]
fn every_bundled_config_parses_and_builds() {
    let paths = bundled();
    assert_eq!(paths.len(), 10);
    for p in paths {
        let cfg = parse_config(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.build_coupling().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(cfg.n_samples.len(), cfg.max_level + 1);
        assert!(cfg.n_samples.iter().zip(&cfg.burn_in).all(|(n, b)| n > b));
    }
}

#[test]
fn shifting_synce_uses_wide_random_walk() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let cfg = parse_config(&dir.join("shifting_synce.json")).unwrap();
    assert_eq!(cfg.coupling, CouplingKind::Synce);
    assert_eq!(cfg.max_level, 6);
    assert_eq!(cfg.coupling_params.proposal_cov, Some(vec![vec![3.0]]));
}

#[test]
fn darcy_resync_weights_increase() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let cfg = parse_config(&dir.join("darcy_synce_ar.json")).unwrap();
    assert_eq!(cfg.coupling_params.omega, Some(vec![0.0, 0.3, 0.5, 0.7]));
    assert_eq!(cfg.max_level, 4);
    assert_eq!(cfg.dim(), 4);
}

#[test]
fn round_trip_through_json_is_stable() {
    for p in bundled() {
        let cfg = parse_config(&p).unwrap();
        let again = mlmcmc::harness::ExperimentConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg.to_json_pretty(), again.to_json_pretty(), "{}", p.display());
    }
}
