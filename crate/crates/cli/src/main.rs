use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use repairplan::compile::{compile_model, render_descriptions};
use repairplan::flatplan::{sequence_cost, Level, DEFAULT_GUARD};
use repairplan::hierplan::{parse_plan, render_plan, HierarchicalRepairPlan, PlanOptions, Planner, StrategyEntry};
use repairplan::model::{flatten, parse_model, validate_model, SystemModel};
use repairplan::oracle::{bench_scaling, simulate_episodes, SimulationConfig};

#[derive(Parser)]
#[command(
    name = "repairplan",
    version,
    about = "Compile hierarchical system models into repair plans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file for structural and probabilistic errors.
    Validate { model: PathBuf },
    /// Print the compiled atomic description of every component.
    Compile { model: PathBuf },
    /// Build a repair plan.
    Plan {
        model: PathBuf,
        /// Plan over the flattened leaves only.
        #[arg(long, conflicts_with = "max_depth")]
        flat: bool,
        /// Deepest level whose components may be inspected and decomposed.
        /// Defaults to the height of the component tree.
        #[arg(long)]
        max_depth: Option<usize>,
        /// Largest number of components a single search may order.
        #[arg(long, default_value_t = DEFAULT_GUARD)]
        guard: usize,
        /// Write the plan here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Expected cost of replacing leaves in the given order.
    Cost {
        model: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<String>,
        #[arg(long, num_args = 1.., required = true)]
        seq: Vec<String>,
    },
    /// Execute a plan against sampled faults and report the realized cost.
    Simulate {
        model: PathBuf,
        plan: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave faults in place when an inspection finds the subtree
        /// locally correct.
        #[arg(long)]
        strict: bool,
    },
    /// Time planning on generated hierarchies of increasing depth.
    Bench {
        #[arg(long, default_value_t = 2)]
        b: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Deepest tree to generate; every depth from 1 up is timed.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { model } => {
            let m = load(&model)?;
            println!(
                "model {} is valid: {} components, {} leaves, height {}",
                m.name,
                m.node_count(),
                m.leaf_count(),
                m.height()
            );
        }
        Command::Compile { model } => {
            let m = load(&model)?;
            let descriptions = compile_model(&m)?;
            print!("{}", render_descriptions(&m, &descriptions));
        }
        Command::Plan {
            model,
            flat,
            max_depth,
            guard,
            output,
        } => {
            let m = load(&model)?;
            let plan = if flat {
                repairplan::hierplan::build_flat_plan(&m, guard)?
            } else {
                let options = PlanOptions {
                    guard,
                    ..PlanOptions::default()
                };
                Planner::new(&m, options)?.build(max_depth.unwrap_or(m.height()))?
            };
            let text = render_plan(&plan);
            match output {
                Some(path) => {
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
                    print_summary(&plan);
                }
                None => print!("{text}"),
            }
        }
        Command::Cost { model, input, seq } => {
            let m = load(&model)?;
            let input = parse_input(&m, &input)?;
            let flat = flatten(&m);
            let level = Level::atomic(&flat)?;
            let order = seq
                .iter()
                .map(|name| {
                    level
                        .component_index(name)
                        .ok_or_else(|| anyhow!("no leaf component named `{name}`"))
                })
                .collect::<Result<Vec<_>>>()?;
            let cost = sequence_cost(&level.context(&input), &order)?;
            println!("{:.6}", cost.cost);
        }
        Command::Simulate {
            model,
            plan,
            input,
            episodes,
            seed,
            strict,
        } => {
            let m = load(&model)?;
            let text = fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let plan = parse_plan(&text, &m)?;
            let input = parse_input(&m, &input)?;
            let planned = plan.root().entry(&input).opt_ec();
            let config = SimulationConfig {
                episodes,
                seed,
                strict,
                keep_traces: false,
            };
            let r = simulate_episodes(&m, &plan, &input, config)?;
            println!("episodes {}", r.episodes);
            if let Some(c) = planned {
                println!("planned {c:.6}");
            }
            println!("mean {:.6}", r.mean);
            println!("stderr {:.6}", r.stderr);
            println!("inspections {}", r.inspect_steps);
            println!("inspections-left-faulty {}", r.inspect_left_faulty);
            println!("exhausted {}", r.exhausted);
        }
        Command::Bench {
            b,
            m,
            depth,
            states,
            seed,
            repeats,
        } => {
            if b == 0 || m == 0 || depth == 0 || states < 2 {
                bail!("bench needs b, m and depth of at least 1 and at least 2 states");
            }
            let depths: Vec<usize> = (1..=depth).collect();
            println!("depth,node_count,seconds_per_node,total_seconds");
            for row in bench_scaling(b, m, states, &depths, seed, repeats)? {
                println!(
                    "{},{},{:.6e},{:.6e}",
                    row.depth, row.node_count, row.seconds_per_node, row.total_seconds
                );
            }
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<SystemModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let model = parse_model(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate_model(&model);
    if !report.is_valid() {
        bail!("{} is not a valid model:\n{report}", path.display());
    }
    Ok(model)
}

fn parse_input(model: &SystemModel, labels: &[String]) -> Result<Vec<usize>> {
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    model.parse_input(&refs).ok_or_else(|| {
        anyhow!(
            "input {:?} does not match the system inputs {:?}",
            labels,
            model.system_inputs
        )
    })
}

fn print_summary(plan: &HierarchicalRepairPlan) {
    let root = plan.root();
    for (k, entry) in root.entries.iter().enumerate() {
        let labels = root.labels(k).join(" ");
        match entry {
            StrategyEntry::Unreachable => println!("input {labels}: unreachable"),
            StrategyEntry::ReplaceSelf { cost } => println!("input {labels}: replace-self {cost:.6}"),
            StrategyEntry::Decompose(seq) => println!("input {labels}: decompose {:.6}", seq.cost),
        }
    }
}
