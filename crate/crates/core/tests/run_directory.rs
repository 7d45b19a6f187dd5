use sha2::{Digest, Sha256};
use thinstrip::config::{OutputConfig, RunConfig, SystemKind};
use thinstrip::harness::{self, Manifest, RunStatus};

fn small(system: SystemKind) -> RunConfig {
    let mut c = RunConfig::hydrostatic_default();
    c.system = system;
    c.grid.nx = 16;
    c.grid.ny = 17;
    c.t_end = 0.2;
    if system == SystemKind::Anisotropic {
        c.eps = Some(0.1);
    }
    if system == SystemKind::Paired {
        c.eps = Some(0.05);
    }
    c
}

#[test]
fn manifest_hashes_match_the_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(SystemKind::Hydrostatic);
    cfg.output = Some(OutputConfig {
        dir: dir.path().display().to_string(),
        snapshot_every: 5,
    });
    harness::run(&cfg, Some(dir.path())).unwrap();
    let m: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(m.files.iter().any(|f| f.path.starts_with("snapshots/")));
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256, "{}", f.path);
    }
    assert!(m.files.iter().all(|f| f.path != "timings.log"));
    // the stored config does not depend on where the run went
    assert_eq!(m.config.output.unwrap().dir, ".");
}

#[test]
fn every_system_completes_a_short_run() {
    for system in [SystemKind::Hydrostatic, SystemKind::Anisotropic, SystemKind::Paired] {
        let out = harness::run(&small(system), None).unwrap();
        assert_eq!(out.report.status, RunStatus::Ok, "{system:?}");
        assert_eq!(harness::ledger_rows(&out.ledger_csv), out.report.steps_completed);
        assert_eq!(out.report.steps_completed, 20);
        assert!(out.report.functionals.iter().all(|f| f.all_finite()));
    }
}

#[test]
fn paired_run_reports_the_remainder() {
    let out = harness::run(&small(SystemKind::Paired), None).unwrap();
    let r = out.report.remainder.expect("paired runs report the remainder");
    assert_eq!(r.eps, 0.05);
    assert!(r.terminal_norm > 0.0 && r.terminal_norm < 1e-3);
}
