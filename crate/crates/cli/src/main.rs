//! `eds`: play episodes, run experiment grids and rank controllers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eds_core::engine::{Budget, BudgetUnit};
use eds_core::harness::{self, ExperimentConfig, HarnessError, RunRecord, TickTrace};
use eds_core::registry::{self, RegistryError, Settings};
use eds_core::{ensemble, games};

#[derive(Parser)]
#[command(
    name = "eds",
    version,
    about = "Ensemble decision systems for grid arcade games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one episode and print its record.
    Play {
        agent: String,
        game: String,
        #[arg(default_value_t = 0)]
        level: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Print one line per tick: tick, action, score, voice.
        #[arg(long)]
        trace: bool,
    },
    /// Run (or resume) an experiment grid described by a config file.
    Experiment {
        config: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Overrides the config's repeats.
        #[arg(long)]
        repeats: Option<usize>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Rank the controllers in a results file and write the tables as CSV.
    Rank {
        results: PathBuf,
        /// Directory for f1.csv, wins.csv and scores.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// List registered controllers and games.
    List,
}

#[derive(Args)]
#[group(multiple = false)]
struct BudgetArgs {
    /// Forward-model calls per tick.
    #[arg(long)]
    budget_calls: Option<u64>,
    /// Milliseconds per tick.
    #[arg(long)]
    budget_ms: Option<u64>,
}

impl BudgetArgs {
    fn get(&self) -> Option<Budget> {
        match (self.budget_calls, self.budget_ms) {
            (Some(n), _) => Some(Budget::calls(n)),
            (_, Some(ms)) => Some(Budget::millis(ms)),
            _ => None,
        }
    }
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Registry(e) => Failure::Usage(e.to_string()),
            HarnessError::Game(e) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<RegistryError> for Failure {
    fn from(e: RegistryError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Play {
            agent,
            game,
            level,
            seed,
            budget,
            trace,
        } => play(&agent, &game, level, seed, budget.get(), trace),
        Command::Experiment {
            config,
            out,
            workers,
            repeats,
            seed,
            budget,
        } => experiment(&config, &out, workers, repeats, seed, budget.get()),
        Command::Rank { results, out } => rank(&results, &out),
        Command::List => {
            print!("{}", list());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn check_game(game: &str) -> Result<(), Failure> {
    if games::GAMES.contains(&game) {
        return Ok(());
    }
    let hints = registry::suggest(game, &games::GAMES);
    let hint = if hints.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", hints.join(", "))
    };
    Err(Failure::Usage(format!("unknown game '{game}'{hint}")))
}

fn play(
    agent: &str,
    game: &str,
    level: usize,
    seed: u64,
    budget: Option<Budget>,
    trace: bool,
) -> Result<(), Failure> {
    registry::check_agent(agent)?;
    check_game(game)?;
    let mut settings = Settings::default();
    if let Some(b) = budget {
        settings.budget = b;
    }
    let mut on_tick = |t: &TickTrace| {
        if trace {
            println!(
                "{} {} {} {}",
                t.tick,
                t.action.name(),
                t.score,
                t.voice.as_deref().unwrap_or("-")
            );
        }
    };
    let rec = harness::run_episode_traced(agent, game, level, 0, seed, &settings, &mut on_tick)?;
    println!("{}", record_line(&rec));
    Ok(())
}

fn record_line(r: &RunRecord) -> String {
    format!(
        "agent={} game={} level={} run={} seed={} score={} win={} timesteps={}",
        r.agent,
        r.game,
        r.level,
        r.run,
        r.seed,
        r.score,
        u8::from(r.win),
        r.timesteps
    )
}

fn experiment(
    path: &Path,
    out: &Path,
    workers: usize,
    repeats: Option<usize>,
    seed: Option<u64>,
    budget: Option<Budget>,
) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut config = ExperimentConfig::parse(&text)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if let Some(r) = repeats {
        if r == 0 {
            return Err(Failure::Usage("--repeats must be positive".into()));
        }
        config.repeats = r;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(b) = budget {
        config.budget_unit = b.unit();
        config.budget_amount = b.amount();
    }
    let unit = match config.budget_unit {
        BudgetUnit::ForwardCalls => "calls",
        BudgetUnit::Millis => "ms",
    };
    eprintln!(
        "{} cells, budget {} {unit}, {} worker(s), writing {}",
        config.cells()?.len(),
        config.budget_amount,
        workers.max(1),
        out.display()
    );
    let progress = |done: usize, todo: usize, r: &RunRecord| {
        eprintln!(
            "[{done}/{todo}] {} {} lvl{} run{}: score {} win {}",
            r.agent,
            r.game,
            r.level,
            r.run,
            r.score,
            u8::from(r.win)
        );
    };
    let records = harness::run_experiment(&config, out, workers, &progress)?;
    println!("{} records in {}", records.len(), out.display());
    Ok(())
}

fn rank(results: &Path, out: &Path) -> Result<(), Failure> {
    let records = harness::read_records(results)
        .map_err(|e| Failure::Data(format!("{}: {e}", results.display())))?;
    let f1 = harness::f1_rank(&records)?;
    let summary = harness::summarize(&records);
    let normalized = harness::normalize_scores(&records);
    let agents: Vec<String> = f1.rows.iter().map(|r| r.agent.clone()).collect();
    let wins = harness::win_matrix(&summary, &agents);
    let scores = harness::score_matrix(&summary, &normalized, &agents);

    print!("{}", f1_table(&f1.rows));
    println!();
    println!("Win percentage");
    print!("{}", matrix_table(&wins, 1));
    println!();
    println!("Normalised score");
    print!("{}", matrix_table(&scores, 2));
    for (game, tied) in &f1.ties {
        println!("tie on {game}: {}", tied.join(", "));
    }

    std::fs::create_dir_all(out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    let mut w =
        csv::Writer::from_path(out.join("f1.csv")).map_err(|e| Failure::Data(e.to_string()))?;
    w.write_record(["rank", "controller", "f1", "wins_pct", "games"])
        .map_err(|e| Failure::Data(e.to_string()))?;
    for r in &f1.rows {
        w.write_record([
            r.rank.to_string(),
            r.agent.clone(),
            r.points.to_string(),
            format!("{:.2}", r.win_pct),
            r.games_won.to_string(),
        ])
        .map_err(|e| Failure::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Data(e.to_string()))?;
    wins.write_csv(&out.join("wins.csv"))?;
    scores.write_csv(&out.join("scores.csv"))?;
    Ok(())
}

fn f1_table(rows: &[harness::F1Row]) -> String {
    let width = rows
        .iter()
        .map(|r| r.agent.len())
        .max()
        .unwrap_or(0)
        .max("Controller".len());
    let mut s = format!(
        "{:>4}  {:<width$}  {:>4}  {:>7}  {:>6}\n",
        "Rank", "Controller", "F1", "%Wins", "#Games"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>4}  {:<width$}  {:>4}  {:>6.2}%  {:>6}",
            r.rank, r.agent, r.points, r.win_pct, r.games_won
        );
    }
    s
}

fn matrix_table(m: &harness::Matrix, decimals: usize) -> String {
    let gw = m.rows.iter().map(String::len).max().unwrap_or(0).max(4);
    let cw: Vec<usize> = m.cols.iter().map(|c| c.len().max(6)).collect();
    let mut s = format!("{:<gw$}", "game");
    for (c, w) in m.cols.iter().zip(&cw) {
        let _ = write!(s, "  {c:>w$}");
    }
    s.push('\n');
    for (g, row) in m.rows.iter().zip(&m.values) {
        let _ = write!(s, "{g:<gw$}");
        for (v, w) in row.iter().zip(&cw) {
            let _ = write!(s, "  {v:>w$.decimals$}");
        }
        s.push('\n');
    }
    s
}

fn list() -> String {
    let mut s = String::from("Sample agents:\n");
    for a in registry::agent_names()
        .into_iter()
        .filter(|a| !registry::is_ensemble(a))
    {
        let _ = writeln!(s, "  {a}");
    }
    s.push_str("Ensembles:\n");
    for name in ensemble::VARIANTS {
        let c = ensemble::make_variant(name).expect("registered variant");
        let voices: Vec<String> = c.voices.iter().map(|v| v.label()).collect();
        let _ = writeln!(
            s,
            "  {name:<16} {:<8} {:<13} {}",
            format!("{:?}", c.arbitrator),
            format!("{:?}", c.policy),
            voices.join(", ")
        );
    }
    s.push_str("Games:\n");
    for g in games::GAMES {
        let _ = writeln!(s, "  {g:<13} {} levels", games::level_count(g).unwrap_or(0));
    }
    s
}
