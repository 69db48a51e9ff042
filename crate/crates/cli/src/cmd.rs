use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ces_core::allocation::{
    nucleolus, proportional, shapley, ProportionalOptions, TraceRecord, DEFAULT_SHAPLEY_LIMIT,
};
use ces_core::coalition::{write_schedule_csv, OutcomeSummary};
use ces_core::metrics::build_report;
use ces_core::model::{dir_paths, load_community_with};
use ces_core::synth::{synthesize, SynthOptions};
use ces_core::{
    evaluate_coalition, AllocationResult, CharacteristicCache, CommunityGame, CommunityModel, CostGame, Error, Method,
    Result, SharingMode, TableGame,
};

use crate::output::{ensure_dir, move_files, write_atomic, write_json, write_json_lines};

/// Community energy storage: sizing, operation and cost allocation.
#[derive(Debug, Parser)]
#[command(name = "ces", version)]
pub struct Cli {
    /// Worker threads for coalition evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Size and operate storage for one coalition.
    Value(ValueArgs),
    /// Split the grand coalition's cost among buildings.
    Allocate(AllocateArgs),
    /// Compare no storage, individual storage, shared storage and pooled shared storage.
    Compare(CompareArgs),
    /// Write a seeded synthetic community.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Input {
    /// Profiles CSV, or a directory holding profiles.csv and config.toml.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Tariff and storage settings.
    #[arg(long, env = "CES_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override the config's sharing mode.
    #[arg(long, value_parser = parse_sharing)]
    pub sharing: Option<SharingMode>,
}

fn parse_sharing(s: &str) -> std::result::Result<SharingMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Input {
    fn load(&self) -> Result<CommunityModel> {
        let profiles = self
            .profiles
            .as_ref()
            .ok_or_else(|| Error::Validation { field: "--profiles".into(), message: "missing".into() })?;
        let (profiles, default_config) =
            if profiles.is_dir() { dir_paths(profiles) } else { (profiles.clone(), PathBuf::new()) };
        let config = match &self.config {
            Some(c) => c.clone(),
            None if !default_config.as_os_str().is_empty() => default_config,
            None => return Err(Error::Validation { field: "--config".into(), message: "missing".into() }),
        };
        let model = load_community_with(&profiles, &config, self.sharing)?;
        log::info!(
            "{} buildings, {} scenarios, {} periods, {} mode",
            model.n_buildings(),
            model.n_scenarios(),
            model.n_periods(),
            model.sharing_mode()
        );
        Ok(model)
    }
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub input: Input,
    /// Comma-separated building ids or 1-based indices, or `grand`.
    #[arg(long, default_value = "grand")]
    pub coalition: String,
    /// Directory for outcome.json and schedule.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    Nucleolus,
    Shapley,
    Proportional,
    All,
}

impl MethodChoice {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Nucleolus => vec![Method::Nucleolus],
            MethodChoice::Shapley => vec![Method::Shapley],
            MethodChoice::Proportional => vec![Method::Proportional],
            MethodChoice::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub input: Input,
    /// Explicit cost game as `coalition,value` CSV instead of a community.
    #[arg(long, conflicts_with_all = ["profiles", "config", "sharing"])]
    pub game: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodChoice,
    /// Directory for allocation and trace files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run Shapley above its size guard.
    #[arg(long)]
    pub force: bool,
    /// Split capital cost equally when no building saves on its bill.
    #[arg(long)]
    pub equal_split: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, value_enum, default_value = "nucleolus")]
    pub method: MethodChoice,
    /// Directory for report files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub equal_split: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub buildings: usize,
    #[arg(long, default_value_t = 3)]
    pub scenarios: usize,
    /// Periods per day.
    #[arg(long, default_value_t = 24)]
    pub periods: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Value(a) => cmd_value(&a),
        Command::Allocate(a) => cmd_allocate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io { path: PathBuf::from("<stdout>"), source: e }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(format!("json: {e}")))?;
    writeln!(std::io::stdout(), "{text}").map_err(io_err)
}

fn cmd_value(a: &ValueArgs) -> Result<()> {
    let model = a.input.load()?;
    let key = if a.coalition.trim() == "grand" { model.grand_coalition() } else { model.parse_coalition(&a.coalition)? };
    let cache = CharacteristicCache::new(&model);
    let outcome = evaluate_coalition(&model, &key, &cache)?;
    let summary = OutcomeSummary::new(&model, &outcome);
    if let Some(out) = &a.out {
        write_json(out, "outcome.json", &summary)?;
        write_atomic(out, "schedule.csv", |w| write_schedule_csv(&model, &outcome, w))?;
    }
    print_json(&summary)
}

/// Allocation file contents.
#[derive(Debug, Serialize)]
struct AllocationFile<'a> {
    method: Method,
    buildings: Vec<String>,
    allocation: &'a [f64],
    total: f64,
    grand_value: f64,
    dsat: f64,
    /// `Y` when no coalition would rather leave, `N` otherwise.
    satisfied: &'static str,
    coalitions_queried: usize,
    episodes: usize,
}

fn run_method<G: CostGame + ?Sized>(
    method: Method,
    game: &G,
    community: Option<(&CommunityModel, &CharacteristicCache)>,
    force: bool,
    equal_split: bool,
) -> Result<AllocationResult> {
    match method {
        Method::Nucleolus => nucleolus(game),
        Method::Shapley => shapley(game, DEFAULT_SHAPLEY_LIMIT, force),
        Method::Proportional => match community {
            Some((model, cache)) => {
                proportional(model, cache, ProportionalOptions { equal_split_when_degenerate: equal_split })
            }
            None => Err(Error::Validation {
                field: "--method".into(),
                message: "proportional needs building bills, so it takes --profiles rather than --game".into(),
            }),
        },
    }
}

fn write_allocation<G: CostGame + ?Sized>(
    out: &Path,
    game: &G,
    names: &[String],
    result: &AllocationResult,
    wall_ms: f64,
) -> Result<()> {
    let grand_value = game.value(&ces_core::CoalitionKey::grand(game.players()))?;
    let file = AllocationFile {
        method: result.method,
        buildings: names.to_vec(),
        allocation: &result.allocation,
        total: result.total(),
        grand_value,
        dsat: result.dsat,
        satisfied: if result.satisfied() { "Y" } else { "N" },
        coalitions_queried: result.coalitions_queried,
        episodes: result.episodes,
    };
    log::info!("{} took {wall_ms:.1} ms", result.method);
    write_json(out, &format!("allocation_{}.json", result.method), &file)?;
    write_json_lines::<TraceRecord>(out, &format!("trace_{}.jsonl", result.method), &result.trace)?;

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{:<12} total {:.6}  dsat {:.6} ({})  queried {}  episodes {}",
        result.method,
        file.total,
        result.dsat,
        file.satisfied,
        result.coalitions_queried,
        result.episodes
    )
    .map_err(io_err)?;
    for (name, x) in names.iter().zip(&result.allocation) {
        writeln!(stdout, "  {name:<10} {x:.6}").map_err(io_err)?;
    }
    Ok(())
}

fn cmd_allocate(a: &AllocateArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let methods = a.method.methods();
    if let Some(path) = &a.game {
        let game = TableGame::from_csv(path)?;
        let names: Vec<String> = (1..=game.players()).map(|i| i.to_string()).collect();
        for method in methods {
            if method == Method::Proportional && a.method == MethodChoice::All {
                log::warn!("skipping proportional: an explicit game has no building bills");
                continue;
            }
            let start = Instant::now();
            let r = run_method(method, &game, None, a.force, a.equal_split)?;
            write_allocation(&a.out, &game, &names, &r, start.elapsed().as_secs_f64() * 1e3)?;
        }
        return Ok(());
    }
    let model = a.input.load()?;
    let names: Vec<String> = model.buildings.iter().map(|b| b.id.clone()).collect();
    let cache = CharacteristicCache::new(&model);
    for method in methods {
        // a fresh view per method so each reports its own query count
        let game = CommunityGame::new(&model, &cache)?;
        let start = Instant::now();
        let r = run_method(method, &game, Some((&model, &cache)), a.force, a.equal_split)?;
        write_allocation(&a.out, &game, &names, &r, start.elapsed().as_secs_f64() * 1e3)?;
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let model = a.input.load()?;
    let cache = CharacteristicCache::new(&model);
    let pooled = model.with_sharing_mode(SharingMode::Pooled);
    let pooled_cache = CharacteristicCache::new(&pooled);
    for method in a.method.methods() {
        let game = CommunityGame::new(&model, &cache)?;
        let r = run_method(method, &game, Some((&model, &cache)), a.force, a.equal_split)?;
        let report = build_report(&model, &cache, &r, Some((&pooled, &pooled_cache)))?;
        if !report.dominance_holds(1e-6) {
            log::warn!("cost ordering pooled <= shared <= individual <= none does not hold: {:?}", report.community);
        }
        write_atomic(&a.out, &format!("report_{method}.csv"), |w| report.write_csv(w))?;
        write_json(&a.out, &format!("report_{method}.json"), &report)?;
        let c = &report.community;
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        writeln!(
            std::io::stdout(),
            "{method:<12} no storage {:.6}  individual {:.6}  shared {:.6}  pooled {}  VoS individual {}  shared {}",
            c.baseline_no_es,
            c.ies_total,
            c.ces_total,
            opt(c.ces_share_total),
            opt(c.vos_ies),
            opt(c.vos_ces)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let model = synthesize(&SynthOptions {
        buildings: a.buildings,
        scenarios: a.scenarios,
        periods: a.periods,
        seed: a.seed,
    })?;
    ensure_dir(&a.out)?;
    let staging = tempfile::tempdir_in(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    model.write_to_dir(staging.path())?;
    move_files(staging.path(), &a.out)?;
    writeln!(std::io::stdout(), "wrote {} buildings to {}", model.n_buildings(), a.out.display()).map_err(io_err)
}
