use std::path::Path;
use std::process::{Command, Output};

fn eds(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eds"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run eds")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workspace() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .unwrap()
}

#[test]
fn list_shows_every_controller_and_game() {
    let o = eds(workspace(), &["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in eds_core::registry::agent_names() {
        assert!(text.contains(name), "{name}");
    }
    for g in eds_core::games::GAMES {
        assert!(text.contains(g), "{g}");
    }
}

#[test]
fn play_prints_one_record() {
    let o = eds(
        workspace(),
        &[
            "play",
            "OLETSExpSc",
            "invest",
            "0",
            "--seed",
            "7",
            "--budget-calls",
            "100",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("agent=OLETSExpSc game=invest level=0 run=0 seed=7 "));
}

#[test]
fn play_is_reproducible() {
    let args = [
        "play",
        "BestFour",
        "butterflies",
        "1",
        "--seed",
        "3",
        "--budget-calls",
        "60",
        "--trace",
    ];
    assert_eq!(
        stdout(&eds(workspace(), &args)),
        stdout(&eds(workspace(), &args))
    );
}

#[test]
fn unknown_names_exit_with_usage_and_suggestions() {
    let o = eds(workspace(), &["play", "OLETZ", "invest", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("OLETS"));
    let o = eds(workspace(), &["play", "OLETS", "invset", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invest"));
    let o = eds(
        workspace(),
        &[
            "play",
            "OLETS",
            "invest",
            "0",
            "--budget-calls",
            "5",
            "--budget-ms",
            "5",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(eds(workspace(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn async_trace_plays_nil_until_each_cycle_closes() {
    let o = eds(
        workspace(),
        &[
            "play",
            "OLETSExpScAsync",
            "invest",
            "0",
            "--seed",
            "7",
            "--budget-calls",
            "100",
            "--trace",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let ticks: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with("agent="))
        .map(|l| l.split(' ').collect())
        .collect();
    assert!(ticks.len() >= 10);
    for t in &ticks {
        let tick: u32 = t[0].parse().unwrap();
        if tick.is_multiple_of(2) {
            assert_eq!((t[1], t[3]), ("NIL", "-"), "{t:?}");
        } else {
            assert_ne!(t[3], "-", "{t:?}");
        }
    }
}

#[test]
fn malformed_config_is_a_data_error_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.cfg"),
        "agents = OLETS\nrepeats = lots\n",
    )
    .unwrap();
    let o = eds(dir.path(), &["experiment", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(
        eds(dir.path(), &["experiment", "missing.cfg"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn experiment_resumes_and_rank_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("grid.cfg"),
        "agents = sampleRandom, sampleOneStepLookAhead\ngames = invest\nlevels = 0\nrepeats = 2\nbudget = 20\n",
    )
    .unwrap();
    let o = eds(
        dir.path(),
        &["experiment", "grid.cfg", "--out", "r.csv", "--workers", "2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = eds(
        dir.path(),
        &["experiment", "grid.cfg", "--out", "r.csv", "--repeats", "3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let records = eds_core::harness::read_records(&dir.path().join("r.csv")).unwrap();
    assert_eq!(records.len(), 6);

    let o = eds(dir.path(), &["rank", "r.csv", "--out", "tables"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().split_whitespace().eq([
        "Rank",
        "Controller",
        "F1",
        "%Wins",
        "#Games"
    ]));
    let f1 = std::fs::read_to_string(dir.path().join("tables/f1.csv")).unwrap();
    assert!(f1.starts_with("rank,controller,f1,wins_pct,games\n"));
    assert_eq!(f1.lines().count(), 3);
    for f in ["wins.csv", "scores.csv"] {
        assert!(dir.path().join("tables").join(f).exists());
    }
}

#[test]
fn ranking_an_empty_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("r.csv"),
        "agent,game,level,run,seed,score,win,timesteps\n",
    )
    .unwrap();
    let o = eds(dir.path(), &["rank", "r.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no records"));
}

/// Runs every `eds` command shown in the README from a scratch directory
/// holding a copy of the shipped configs.
#[test]
fn readme_commands_succeed() {
    let readme = std::fs::read_to_string(workspace().join("README.md")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let configs = dir.path().join("configs");
    std::fs::create_dir(&configs).unwrap();
    for entry in std::fs::read_dir(workspace().join("configs")).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, configs.join(p.file_name().unwrap())).unwrap();
    }
    let commands: Vec<&str> = readme
        .lines()
        .filter_map(|l| l.trim().strip_prefix("eds "))
        .collect();
    assert!(commands.len() >= 4);
    for c in commands {
        let args: Vec<&str> = c.split_whitespace().collect();
        let o = eds(dir.path(), &args);
        assert!(o.status.success(), "eds {c}: {}", stderr(&o));
    }
}
