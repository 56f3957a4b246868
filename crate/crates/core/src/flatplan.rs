//! Optimal repair sequences over the components of one model level.
//!
//! For a fixed input `i` the planner carries a posterior over the joint modes
//! of the components not yet replaced. Each step marginalizes the replaced
//! component out (it is now ok), reweights by the probability that the
//! anomaly persists, and renormalizes. The expected cost of a sequence is
//! `c1 + p1 (c2 + p2 (c3 + ...))`.

use std::cell::OnceCell;

use rayon::prelude::*;
use thiserror::Error;

use crate::compile::{level_network, transcribe_leaf, AtomicDescription, CompileError};
use crate::model::SystemModel;
use crate::netinfer::{LocalIo, ModeAssignment, NetError, Network};
use crate::space::JointSpace;

/// Default bound on the number of components whose orderings are enumerated.
pub const DEFAULT_GUARD: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("anomaly is unreachable for input ({0})")]
    Unreachable(String),
    #[error("{n} components exceed the enumeration guard of {guard}")]
    GuardExceeded { n: usize, guard: usize },
    #[error("`{0}` is atomic and cannot be inspected")]
    InspectOnLeaf(String),
    #[error("`{0}` cannot be inspected at this depth")]
    InspectNotAllowed(String),
    #[error("subplan of `{path}` has no entry for input {input}")]
    MissingSubplanEntry { path: String, input: String },
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("sequence must name every component exactly once")]
    NotAPermutation,
    #[error("max depth must be at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One model level with its children's descriptions and joint mode prior.
#[derive(Debug, Clone)]
pub struct Level {
    pub children: Vec<AtomicDescription>,
    pub names: Vec<String>,
    pub net: Network,
    pub modes: JointSpace,
    pub prior: Vec<f64>,
    pub input_space: JointSpace,
    input_names: Vec<Vec<String>>,
}

impl Level {
    pub fn new(model: &SystemModel, children: Vec<AtomicDescription>) -> Result<Self, PlanError> {
        let refs: Vec<&AtomicDescription> = children.iter().collect();
        let net = level_network(model, &refs)?;
        let modes = JointSpace::new(children.iter().map(|d| d.modes.len()).collect());
        let prior = modes
            .iter()
            .map(|m| m.iter().zip(&children).map(|(&k, d)| d.prior[k]).product())
            .collect();
        let input_names = model
            .system_inputs
            .iter()
            .map(|v| model.variable(v).map(|s| s.states.clone()).unwrap_or_default())
            .collect();
        Ok(Self {
            names: model.components.iter().map(|c| c.name.clone()).collect(),
            input_space: model.input_space(),
            children,
            net,
            modes,
            prior,
            input_names,
        })
    }

    /// Level of a model whose components are all leaves.
    pub fn atomic(model: &SystemModel) -> Result<Self, PlanError> {
        let children = model
            .components
            .iter()
            .map(|c| transcribe_leaf(&c.name, c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(model, children)
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn input_labels(&self, input: &[usize]) -> String {
        input
            .iter()
            .zip(&self.input_names)
            .map(|(&s, names)| names[s].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Component indices sorted by name.
    pub fn by_name(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        order
    }

    pub fn context(&self, input: &[usize]) -> InputContext<'_> {
        InputContext::new(self, input)
    }
}

/// Per-input quantities shared by every sequence evaluated for that input.
pub struct InputContext<'l> {
    pub level: &'l Level,
    pub input: Vec<usize>,
    /// `x(i)`.
    pub correct: usize,
    /// `P(X != x(i) | i, m)` for every joint mode `m`.
    pub anomaly: Vec<f64>,
    /// `P(X != x(i) | i)`.
    pub anomaly_probability: f64,
    io: Vec<Vec<OnceCell<LocalIo>>>,
}

impl<'l> InputContext<'l> {
    pub fn new(level: &'l Level, input: &[usize]) -> Self {
        let correct = level.net.correct_output(input);
        let anomaly: Vec<f64> = level
            .modes
            .iter()
            .enumerate()
            .map(|(j, m)| {
                if j == 0 || level.prior[j] == 0.0 {
                    0.0
                } else {
                    level.net.anomaly_probability(input, &ModeAssignment(m), correct)
                }
            })
            .collect();
        let anomaly_probability = anomaly.iter().zip(&level.prior).map(|(a, p)| a * p).sum();
        let io = (0..level.len())
            .map(|_| (0..level.modes.size()).map(|_| OnceCell::new()).collect())
            .collect();
        Self {
            level,
            input: input.to_vec(),
            correct,
            anomaly,
            anomaly_probability,
            io,
        }
    }

    pub fn reachable(&self) -> bool {
        self.anomaly_probability > 0.0
    }

    /// Local I/O of `target` under joint mode `joint`, conditioned on the
    /// system output being anomalous.
    pub fn local_io(&self, target: usize, joint: usize) -> &LocalIo {
        self.io[target][joint].get_or_init(|| {
            let modes = ModeAssignment(self.level.modes.decode(joint));
            self.level
                .net
                .local_io_marginal(&self.input, &modes, target, true, self.correct)
        })
    }
}

/// Posterior over the joint modes of the components not yet replaced.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePosterior {
    /// Unreplaced component indices, in component order.
    pub unfixed: Vec<usize>,
    pub space: JointSpace,
    pub probs: Vec<f64>,
}

impl ModePosterior {
    /// Full joint mode index with every replaced component ok.
    pub fn full_index(&self, level: &Level, sub: usize) -> usize {
        let digits = self.space.decode(sub);
        let strides = level.modes.strides();
        self.unfixed.iter().zip(digits).map(|(&c, d)| strides[c] * d).sum()
    }

    /// Sum out component `component`.
    pub fn marginalize(&self, component: usize) -> ModePosterior {
        let pos = self
            .unfixed
            .iter()
            .position(|&c| c == component)
            .expect("component is unfixed");
        let mut unfixed = self.unfixed.clone();
        unfixed.remove(pos);
        let mut radix = self.space.radix().to_vec();
        radix.remove(pos);
        let space = JointSpace::new(radix);
        let mut probs = vec![0.0; space.size()];
        for (k, digits) in self.space.iter().enumerate() {
            let mut rest = digits;
            rest.remove(pos);
            probs[space.index(&rest)] += self.probs[k];
        }
        ModePosterior { unfixed, space, probs }
    }

    /// Probability of a joint state given as `(component, mode)` digits.
    pub fn prob_of(&self, level: &Level, joint: usize) -> f64 {
        let full = level.modes.decode(joint);
        let digits: Vec<usize> = self.unfixed.iter().map(|&c| full[c]).collect();
        let fixed_ok = (0..level.len()).all(|c| self.unfixed.contains(&c) || full[c] == 0);
        if fixed_ok {
            self.probs[self.space.index(&digits)]
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Probability that the anomaly persists after the step.
    pub anomaly_probability: f64,
    /// Posterior over the remaining components; `None` when terminal.
    pub next: Option<ModePosterior>,
}

impl StepResult {
    pub fn terminal(&self) -> bool {
        self.next.is_none()
    }
}

/// `Q_0(m) ∝ P(X != x(i) | i, m) P(m)`.
pub fn initial_posterior(ctx: &InputContext) -> Result<ModePosterior, PlanError> {
    if !ctx.reachable() {
        return Err(PlanError::Unreachable(ctx.level.input_labels(&ctx.input)));
    }
    let probs = ctx
        .anomaly
        .iter()
        .zip(&ctx.level.prior)
        .map(|(a, p)| a * p / ctx.anomaly_probability)
        .collect();
    Ok(ModePosterior {
        unfixed: (0..ctx.level.len()).collect(),
        space: ctx.level.modes.clone(),
        probs,
    })
}

/// Replace `component` and check the system output again.
pub fn advance_step(ctx: &InputContext, prev: &ModePosterior, component: usize) -> StepResult {
    let down = prev.marginalize(component);
    let weighted: Vec<f64> = down
        .probs
        .iter()
        .enumerate()
        .map(|(k, q)| {
            if *q == 0.0 {
                0.0
            } else {
                q * ctx.anomaly[down.full_index(ctx.level, k)]
            }
        })
        .collect();
    let p: f64 = weighted.iter().sum();
    let next = (p > 0.0).then(|| ModePosterior {
        probs: weighted.iter().map(|w| w / p).collect(),
        ..down
    });
    StepResult {
        anomaly_probability: p,
        next,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceCost {
    pub cost: f64,
    /// `p_j` for each executed step.
    pub persistence: Vec<f64>,
    /// Number of trailing steps never reached.
    pub never_executed: usize,
}

/// Expected cost of replacing components in `sequence` order.
pub fn sequence_cost(ctx: &InputContext, sequence: &[usize]) -> Result<SequenceCost, PlanError> {
    check_permutation(ctx.level.len(), sequence)?;
    let mut q = initial_posterior(ctx)?;
    let mut cost = 0.0;
    let mut reach = 1.0;
    let mut persistence = Vec::new();
    for (j, &c) in sequence.iter().enumerate() {
        cost += reach * ctx.level.children[c].costs.replace;
        let step = advance_step(ctx, &q, c);
        reach *= step.anomaly_probability;
        persistence.push(step.anomaly_probability);
        match step.next {
            Some(next) => q = next,
            None => {
                return Ok(SequenceCost {
                    cost,
                    persistence,
                    never_executed: sequence.len() - j - 1,
                })
            }
        }
    }
    Ok(SequenceCost {
        cost,
        persistence,
        never_executed: 0,
    })
}

pub(crate) fn check_permutation(n: usize, sequence: &[usize]) -> Result<(), PlanError> {
    let mut seen = vec![false; n];
    for &c in sequence {
        if c >= n || std::mem::replace(&mut seen[c], true) {
            return Err(PlanError::NotAPermutation);
        }
    }
    if sequence.len() != n {
        return Err(PlanError::NotAPermutation);
    }
    Ok(())
}

/// Best ordering found by [`search`], with one annotation per step.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    pub order: Vec<usize>,
    pub annotations: Vec<T>,
    pub cost: f64,
    pub never_executed: usize,
}

/// Exact branch-and-bound over all orderings of the level's components.
///
/// `step` prices replacing a component given the posterior just before the
/// step; costs are nonnegative so the accumulated cost bounds every
/// completion from below. Equal costs keep the lexicographically first
/// ordering by component name.
pub(crate) fn search<T, F>(
    ctx: &InputContext,
    guard: usize,
    mut step: F,
    fill: impl Fn(usize) -> T,
) -> Result<SearchResult<T>, PlanError>
where
    T: Clone,
    F: FnMut(usize, &ModePosterior) -> Result<(f64, T), PlanError>,
{
    let n = ctx.level.len();
    if n > guard {
        return Err(PlanError::GuardExceeded { n, guard });
    }
    let q0 = initial_posterior(ctx)?;
    let names = ctx.level.by_name();
    let mut state = Dfs {
        best: None,
        prefix: Vec::with_capacity(n),
        notes: Vec::with_capacity(n),
    };
    dfs(ctx, &names, &q0, 0.0, 1.0, &mut state, &mut step, &fill)?;
    Ok(state.best.expect("at least one ordering is evaluated"))
}

struct Dfs<T> {
    best: Option<SearchResult<T>>,
    prefix: Vec<usize>,
    notes: Vec<T>,
}

fn tolerance(best: f64) -> f64 {
    1e-12 * best.abs().max(1.0)
}

#[allow(clippy::too_many_arguments)]
fn dfs<T: Clone, F>(
    ctx: &InputContext,
    names: &[usize],
    q: &ModePosterior,
    acc: f64,
    reach: f64,
    state: &mut Dfs<T>,
    step: &mut F,
    fill: &impl Fn(usize) -> T,
) -> Result<(), PlanError>
where
    F: FnMut(usize, &ModePosterior) -> Result<(f64, T), PlanError>,
{
    for &c in names {
        if state.prefix.contains(&c) {
            continue;
        }
        let (cost, note) = step(c, q)?;
        let acc2 = acc + reach * cost;
        if let Some(best) = &state.best {
            if acc2 >= best.cost - tolerance(best.cost) {
                continue;
            }
        }
        state.prefix.push(c);
        state.notes.push(note);
        let result = advance_step(ctx, q, c);
        let done = state.prefix.len() == names.len();
        match result.next {
            Some(next) if !done => {
                dfs(
                    ctx,
                    names,
                    &next,
                    acc2,
                    reach * result.anomaly_probability,
                    state,
                    step,
                    fill,
                )?;
            }
            _ => {
                let mut order = state.prefix.clone();
                let mut annotations = state.notes.clone();
                let rest: Vec<usize> = names.iter().copied().filter(|c| !order.contains(c)).collect();
                annotations.extend(rest.iter().map(|&c| fill(c)));
                order.extend(&rest);
                state.best = Some(SearchResult {
                    order,
                    annotations,
                    cost: acc2,
                    never_executed: rest.len(),
                });
            }
        }
        state.prefix.pop();
        state.notes.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestSequence {
    pub order: Vec<usize>,
    pub cost: f64,
    pub never_executed: usize,
}

/// Cheapest replacement ordering for the context's input.
pub fn best_sequence(ctx: &InputContext, guard: usize) -> Result<BestSequence, PlanError> {
    let costs: Vec<f64> = ctx.level.children.iter().map(|d| d.costs.replace).collect();
    let r = search(ctx, guard, |c, _| Ok((costs[c], ())), |_| ())?;
    Ok(BestSequence {
        order: r.order,
        cost: r.cost,
        never_executed: r.never_executed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlatEntry {
    Unreachable,
    Sequence {
        order: Vec<String>,
        cost: f64,
        never_executed: usize,
    },
}

/// One entry per joint input state, in input-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatRepairPlan {
    pub input_space: JointSpace,
    pub entries: Vec<FlatEntry>,
}

impl FlatRepairPlan {
    pub fn entry(&self, input: &[usize]) -> &FlatEntry {
        &self.entries[self.input_space.index(input)]
    }
}

pub fn flat_plan(level: &Level, guard: usize) -> Result<FlatRepairPlan, PlanError> {
    if level.len() > guard {
        return Err(PlanError::GuardExceeded { n: level.len(), guard });
    }
    let inputs: Vec<Vec<usize>> = level.input_space.iter().collect();
    let entries = inputs
        .par_iter()
        .map(|input| {
            let ctx = level.context(input);
            if !ctx.reachable() {
                return Ok(FlatEntry::Unreachable);
            }
            let best = best_sequence(&ctx, guard)?;
            Ok(FlatEntry::Sequence {
                order: best.order.iter().map(|&c| level.names[c].clone()).collect(),
                cost: best.cost,
                never_executed: best.never_executed,
            })
        })
        .collect::<Result<Vec<_>, PlanError>>()?;
    Ok(FlatRepairPlan {
        input_space: level.input_space.clone(),
        entries,
    })
}

/// Resolve component names to indices.
pub fn resolve_sequence(level: &Level, names: &[&str]) -> Result<Vec<usize>, PlanError> {
    let seq = names
        .iter()
        .map(|n| {
            level
                .component_index(n)
                .ok_or_else(|| PlanError::UnknownComponent(n.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_permutation(level.len(), &seq)?;
    Ok(seq)
}
