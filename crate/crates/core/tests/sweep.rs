mod support;

use std::fs;

use gaitbench::protocol::{run_sweep, SweepOptions, SweepResult};
use gaitbench::terrain::ObstacleKind;
use support::checks::{walker, worker_invariant_sweep};

#[test]
fn smoke_sweep_is_worker_count_invariant() {
    worker_invariant_sweep(ObstacleKind::DropOff, 11, 5, 3);
}

#[test]
fn sweep_rejects_degenerate_grids() {
    let ck = walker();
    let dir = tempfile::tempdir().unwrap();
    for (levels, trials, workers) in [(1, 5, 1), (11, 0, 1), (11, 5, 0)] {
        let opts = SweepOptions { levels, trials, workers };
        assert!(run_sweep(&ck, ObstacleKind::Gap, 0, &opts, dir.path()).is_err());
    }
}

#[test]
fn different_master_seeds_change_the_trials() {
    let ck = walker();
    let root = tempfile::tempdir().unwrap();
    let opts = SweepOptions { levels: 2, trials: 2, workers: 1 };
    let a = run_sweep(&ck, ObstacleKind::Slope, 1, &opts, &root.path().join("a")).unwrap();
    let b = run_sweep(&ck, ObstacleKind::Slope, 2, &opts, &root.path().join("b")).unwrap();
    let first = |s: &SweepResult| fs::read_to_string(&s.logs[0][0]).unwrap();
    assert_ne!(first(&a), first(&b));
}
