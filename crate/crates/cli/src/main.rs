//! `lteu`: run experiments, price menus, check menus and dump scenes.
//!
//! Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 2    | missing file or other I/O failure         |
//! | 3    | configuration or schema violation         |
//! | 4    | infeasible power solve or pricing         |
//! | 5    | a feasibility check failed                |
//! | 6    | malformed input file                      |

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lteu_core::contract::{check_iir, check_ordering, check_theorem1, check_tibs, ContractMenu, ExpectedQuantities, TypeGrid};
use lteu_core::harness::{replication_scene, run_experiment, run_replication, Mechanism, Scenario};
use lteu_core::net::SceneDocument;
use lteu_core::{Error, ScenarioParams};

const EXIT_IO: u8 = 2;
const EXIT_SCHEMA: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 5;
const EXIT_PARSE: u8 = 6;

#[derive(Parser)]
#[command(name = "lteu", version, about = "Contract pricing and Bayesian matching for LTE-U spectrum sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write CSV, records and a manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, env = "LTEU_OUT_DIR", default_value = "results")]
        out: PathBuf,
        /// proposed, complete-info, uniform, random or all.
        #[arg(long, default_value = "proposed")]
        mechanism: String,
    },
    /// Compute the optimal price menu for one replication of a scenario.
    Price {
        #[command(flatten)]
        common: Common,
        /// Menu file to write; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a menu against a scenario's expected valuations.
    Check {
        #[command(flatten)]
        common: Common,
        /// Menu JSON, as written by `price`.
        #[arg(long)]
        menu: PathBuf,
    },
    /// Dump the topology a replication runs on.
    Scene {
        #[command(flatten)]
        common: Common,
        /// Scene file to write; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML; built-in defaults if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; overrides the scenario's base seed.
    #[arg(long, env = "LTEU_SEED")]
    seed: Option<u64>,
    /// Suppress progress and summaries.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn params(&self) -> Result<ScenarioParams, Failure> {
        let mut params = match &self.config {
            Some(path) => {
                if !path.exists() {
                    return Err(Failure::new(EXIT_IO, format!("config file {} does not exist", path.display())));
                }
                ScenarioParams::load(path).map_err(|e| Failure::from_core(e, path))?
            }
            None => ScenarioParams::default(),
        };
        if let Some(seed) = self.seed {
            params.experiment.base_seed = seed;
        }
        Ok(params)
    }

    fn seed(&self, params: &ScenarioParams) -> u64 {
        self.seed.unwrap_or(params.experiment.base_seed)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// A diagnostic plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn from_core(e: Error, context: &Path) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Config(_) | Error::ContractViolation(_) => EXIT_SCHEMA,
            Error::Infeasible { .. } | Error::Feasibility(_) => EXIT_INFEASIBLE,
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) => EXIT_PARSE,
        };
        Failure::new(code, format!("{}: {e}", context.display()))
    }

    fn io(e: anyhow::Error) -> Self {
        Failure::new(EXIT_IO, format!("{e:#}"))
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::io)?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(Failure::io)
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(common: &Common, out: &Path, mechanism: &str) -> Result<(), Failure> {
    let params = common.params()?;
    let mechanisms: Vec<Mechanism> = if mechanism == "all" {
        Mechanism::ALL.to_vec()
    } else {
        vec![mechanism.parse().map_err(|e: Error| Failure::new(EXIT_SCHEMA, e.to_string()))?]
    };
    let here = Path::new("scenario");
    let mut results = Vec::new();
    for m in mechanisms {
        let scenario = Scenario::new(params.clone(), m).map_err(|e| Failure::from_core(e, here))?;
        common.say(format!(
            "running {m}: {} sweep points x {} replications",
            params.experiment.sweep_values.len(),
            params.experiment.replications
        ));
        let result = run_experiment(&scenario).map_err(|e| Failure::from_core(e, here))?;
        if !result.failures.is_empty() {
            let lines: Vec<String> = result
                .failures
                .iter()
                .map(|f| format!("  sweep value {}, replication {} (seed {}): {}", f.sweep_value, f.replication, f.seed, f.error))
                .collect();
            return Err(Failure::new(
                EXIT_INFEASIBLE,
                format!("{m}: {} replications failed; nothing written\n{}", result.failures.len(), lines.join("\n")),
            ));
        }
        results.push(result);
    }
    for result in &results {
        let files = result.write(out).map_err(|e| Failure::from_core(e, out))?;
        for f in files {
            common.say(format!("wrote {}", f.display()));
        }
        if !common.quiet {
            println!("{:>8} {:>10} {:>14} {:>12}", "value", "qos", "mean rate", "utility");
            for s in result.summary() {
                println!(
                    "{:>8} {:>10.4} {:>14.4e} {:>12.5}",
                    s.sweep_value,
                    s.mean("qos_fraction"),
                    s.mean("mean_rate_bps"),
                    s.mean("mean_user_utility")
                );
            }
        }
    }
    Ok(())
}

fn cmd_price(common: &Common, out: Option<&Path>) -> Result<(), Failure> {
    let params = common.params()?;
    let seed = common.seed(&params);
    let here = Path::new("price");
    let outcome = run_replication(&params, Mechanism::Proposed, seed).map_err(|e| Failure::from_core(e, here))?;
    if outcome.ironed && !common.quiet {
        eprintln!("note: expected valuations were ironed before pricing");
    }
    write_or_print(out, &outcome.contract_menu().to_json())?;
    if let Some(path) = out {
        common.say(format!("wrote {} ({} contracts, seed {seed})", path.display(), outcome.menu.len()));
    }
    Ok(())
}

fn cmd_check(common: &Common, menu_path: &Path) -> Result<(), Failure> {
    if !menu_path.exists() {
        return Err(Failure::new(EXIT_IO, format!("menu file {} does not exist", menu_path.display())));
    }
    let text = fs::read_to_string(menu_path).with_context(|| format!("reading {}", menu_path.display())).map_err(Failure::io)?;
    let menu = ContractMenu::from_json(&text).map_err(|e| Failure::from_core(e, menu_path))?;
    if menu.is_empty() {
        eprintln!("warning: {} lists no contracts; every check passes vacuously", menu_path.display());
        return Ok(());
    }
    let params = common.params()?;
    let seed = common.seed(&params);
    let here = Path::new("check");
    let grid = TypeGrid::from_params(&params.types).map_err(|e| Failure::from_core(e, here))?;
    if menu.len() != grid.len() {
        return Err(Failure::new(
            EXIT_SCHEMA,
            format!("menu has {} contracts but the scenario has {} types", menu.len(), grid.len()),
        ));
    }
    let outcome = run_replication(&params, Mechanism::Proposed, seed).map_err(|e| Failure::from_core(e, here))?;
    let expected = ExpectedQuantities::new(&grid, outcome.expected.v_bar.clone(), menu.prices(), outcome.expected.c_bar.clone())
        .map_err(|e| Failure::from_core(e, here))?;

    let tibs = check_tibs(&menu, &expected);
    let iir = check_iir(&menu, &expected);
    let ordering = check_ordering(&expected);
    let theorem = check_theorem1(&expected, &grid);
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("truth-telling  {}  ({} type pairs, {} violations)", verdict(tibs.is_satisfied()), tibs.pairs_checked, tibs.violations.len());
    for v in &tibs.violations {
        println!(
            "  type {} gains by reporting {}: {:.6e} > {:.6e}",
            v.true_type + 1,
            v.reported_type + 1,
            v.deviation_utility,
            v.truthful_utility
        );
    }
    println!("participation  {}", verdict(iir.is_satisfied()));
    for &t in &iir.violations {
        println!("  type {} expects utility {:.6e}", t + 1, iir.utilities[t]);
    }
    println!("ordering       {}", verdict(ordering.is_satisfied()));
    println!(
        "sufficiency    {}  (monotone {}, envelope {}, bottom rent {:.3e})",
        verdict(theorem.is_satisfied()),
        theorem.monotone,
        theorem.envelope,
        theorem.bottom_rent
    );
    let all = tibs.is_satisfied() && iir.is_satisfied() && ordering.is_satisfied() && theorem.is_satisfied();
    if all {
        Ok(())
    } else {
        Err(Failure::new(EXIT_CHECK_FAILED, "menu failed at least one feasibility check"))
    }
}

fn cmd_scene(common: &Common, out: Option<&Path>) -> Result<(), Failure> {
    let params = common.params()?;
    let seed = common.seed(&params);
    let scene = replication_scene(&params, seed).map_err(|e| Failure::from_core(e, Path::new("scene")))?;
    write_or_print(out, &SceneDocument::new(scene, seed).to_json())?;
    if let Some(path) = out {
        common.say(format!("wrote {}", path.display()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, out, mechanism } => cmd_run(common, out, mechanism),
        Command::Price { common, out } => cmd_price(common, out.as_deref()),
        Command::Check { common, menu } => cmd_check(common, menu),
        Command::Scene { common, out } => cmd_scene(common, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
