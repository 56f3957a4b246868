//! Monte Carlo replay of a plan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::exec::{Action, Draw, Exec, ExecStats};
use super::{sample_index, Evaluator, OracleError};
use crate::compile::{compile_model, root_anomaly_probability};
use crate::hierplan::HierarchicalRepairPlan;
use crate::model::{flatten, NodeInfo, SystemModel};

/// Anomaly probabilities below this are rejected as unsampleable.
pub const STARVATION_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Leave components faulty when an inspection reads them as correct.
    pub strict: bool,
    pub keep_traces: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            episodes: 100_000,
            seed: 0,
            strict: false,
            keep_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    /// True leaf modes, in flattened-model order.
    pub modes: Vec<usize>,
    pub actions: Vec<Action>,
    pub cost: f64,
    pub final_output: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub episodes: usize,
    pub mean: f64,
    pub stderr: f64,
    pub inspect_steps: usize,
    /// Inspections after which some leaf below the inspected component was
    /// still faulty.
    pub inspect_left_faulty: usize,
    /// Episodes that ran out of plan with the anomaly still present.
    pub exhausted: usize,
    pub traces: Vec<EpisodeTrace>,
}

struct Sampled<'r>(&'r mut ChaCha8Rng);

impl Draw for Sampled<'_> {
    fn slices(&mut self, ev: &Evaluator, node: &NodeInfo, input: &[usize], modes: &[usize]) -> Vec<(f64, Vec<u16>)> {
        vec![(1.0, ev.sample_slice(node, input, modes, || self.0.gen()))]
    }
}

/// Sample anomalous worlds, execute the plan in each, and average the cost.
pub fn simulate_episodes(
    model: &SystemModel,
    plan: &HierarchicalRepairPlan,
    input: &[usize],
    config: SimulationConfig,
) -> Result<SimulationReport, OracleError> {
    let target = if plan.max_depth.is_none() {
        flatten(model)
    } else {
        model.clone()
    };
    let descriptions = compile_model(&target).map_err(|e| OracleError::Model(e.to_string()))?;
    if input.len() != target.system_inputs.len() {
        return Err(OracleError::InputArity {
            got: input.len(),
            expected: target.system_inputs.len(),
        });
    }
    let p = root_anomaly_probability(&target, &descriptions, input).map_err(|e| OracleError::Model(e.to_string()))?;
    if p < STARVATION_THRESHOLD {
        return Err(OracleError::Starvation(p));
    }
    let ev = Evaluator::new(&target)?;
    let results = (0..config.episodes)
        .into_par_iter()
        .map(|k| episode(&ev, plan, input, config, k as u64))
        .collect::<Result<Vec<_>, _>>()?;

    let n = results.len();
    let mean = results.iter().map(|(t, _)| t.cost).sum::<f64>() / n as f64;
    let var = if n > 1 {
        results.iter().map(|(t, _)| (t.cost - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut report = SimulationReport {
        episodes: n,
        mean,
        stderr: (var / n as f64).sqrt(),
        inspect_steps: 0,
        inspect_left_faulty: 0,
        exhausted: 0,
        traces: Vec::new(),
    };
    for (trace, stats) in results {
        report.inspect_steps += stats.inspect_steps;
        report.inspect_left_faulty += stats.inspect_left_faulty;
        report.exhausted += usize::from(stats.exhausted);
        if config.keep_traces {
            report.traces.push(trace);
        }
    }
    Ok(report)
}

fn episode(
    ev: &Evaluator,
    plan: &HierarchicalRepairPlan,
    input: &[usize],
    config: SimulationConfig,
    index: u64,
) -> Result<(EpisodeTrace, ExecStats), OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let root = ev.index.root();
    let out = ev.var(&root.output);
    let correct = ev.correct_output(root, input);
    let (modes, slice) = loop {
        let modes: Vec<usize> = ev.leaves.iter().map(|l| sample_index(&l.prior, rng.gen())).collect();
        let slice = ev.sample_slice(root, input, &modes, || rng.gen());
        if slice[out] as usize != correct {
            break (modes, slice);
        }
    };
    let mut exec = Exec {
        ev,
        plan,
        strict: config.strict,
        draw: Sampled(&mut rng),
        log: Some(Vec::new()),
        stats: ExecStats::default(),
    };
    let outcomes = exec.entry("", input, &modes, &slice)?;
    let (_, nested_cost, after) = outcomes.into_iter().next().expect("sampled execution has one outcome");
    let actions = exec.log.take().unwrap_or_default();
    let cost: f64 = actions.iter().map(|a| a.cost).sum();
    debug_assert!((cost - nested_cost).abs() <= 1e-9 * cost.max(1.0));
    let stats = exec.stats;
    let final_output = ev.sample_slice(root, input, &after, || rng.gen())[out] as usize;
    Ok((
        EpisodeTrace {
            modes,
            actions,
            cost,
            final_output,
            exhausted: stats.exhausted,
        },
        stats,
    ))
}
