use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use eds_core::harness::{self, cell_seed, run_episode, ExperimentConfig, RunRecord};

fn config(repeats: usize) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "agents = sampleRandom, OLETSExpSc\ngames = invest, camelrace\nlevels = 0, 1\nrepeats = {repeats}\nbudget = 30\nseed = 5\n"
    ))
    .unwrap()
}

fn keys(records: &[RunRecord]) -> HashSet<harness::CellKey> {
    records.iter().map(RunRecord::key).collect()
}

#[test]
fn interrupted_grids_resume_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let first = harness::run_experiment(&config(1), &out, 2, &|_, _, _| {}).unwrap();
    assert_eq!(first.len(), 2 * 2 * 2);

    let ran = AtomicUsize::new(0);
    let all = harness::run_experiment(&config(3), &out, 3, &|_, _, _| {
        ran.fetch_add(1, Ordering::SeqCst);
    })
    .unwrap();
    assert_eq!(ran.into_inner(), 2 * 2 * 2 * 2);
    assert_eq!(all.len(), 2 * 2 * 2 * 3);
    assert_eq!(keys(&all).len(), all.len());
    assert!(keys(&first).is_subset(&keys(&all)));

    let again = harness::run_experiment(&config(3), &out, 1, &|_, _, _| {
        panic!("nothing left to run")
    })
    .unwrap();
    assert_eq!(again, all);
}

#[test]
fn records_match_single_episodes_whatever_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(1);
    let one = harness::run_experiment(&c, &dir.path().join("a.csv"), 1, &|_, _, _| {}).unwrap();
    let many = harness::run_experiment(&c, &dir.path().join("b.csv"), 4, &|_, _, _| {}).unwrap();
    let sort = |mut v: Vec<RunRecord>| {
        v.sort_by_key(RunRecord::key);
        v
    };
    let (one, many) = (sort(one), sort(many));
    assert_eq!(one, many);
    for r in &one {
        let seed = cell_seed(c.seed, &r.game, r.level, r.run);
        assert_eq!(
            &run_episode(&r.agent, &r.game, r.level, r.run, seed, &c.settings()).unwrap(),
            r
        );
    }
}
