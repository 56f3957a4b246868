//! Hierarchical repair plans.
//!
//! Every decomposable component above the depth cutoff gets a block of rules,
//! one per joint value of its inputs: either replace the whole component, or
//! work through its subcomponents in some order, replacing each one or
//! inspecting it and running its own block on the observed local input.
//! Blocks are built bottom-up so a parent can price inspection of a child
//! from the child's finished rules.

mod export;

use std::collections::BTreeMap;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::compile::{compile_model, level_descriptions, AtomicDescription, DescriptionMap};
use crate::flatplan::{
    self, advance_step, check_permutation, initial_posterior, search, InputContext, Level, ModePosterior, PlanError,
    DEFAULT_GUARD,
};
use crate::model::{child_path, flatten, serialize_model, SystemModel};
use crate::netinfer::{IoTable, LocalIo};
use crate::space::JointSpace;

pub use export::{parse_plan, render_plan, PlanFileError, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RepairMethod {
    Replace,
    Inspect,
}

impl RepairMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RepairMethod::Replace => "replace",
            RepairMethod::Inspect => "inspect",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            RepairMethod::Replace => RepairMethod::Inspect,
            RepairMethod::Inspect => RepairMethod::Replace,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub name: String,
    pub method: RepairMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSequence {
    pub steps: Vec<Step>,
    pub cost: f64,
    /// Trailing steps that are never reached because the anomaly has cleared.
    pub never_executed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyEntry {
    /// The anomaly cannot occur for this input.
    Unreachable,
    ReplaceSelf {
        cost: f64,
    },
    Decompose(AnnotatedSequence),
}

impl StrategyEntry {
    /// Expected cost of the chosen branch.
    pub fn opt_ec(&self) -> Option<f64> {
        match self {
            StrategyEntry::Unreachable => None,
            StrategyEntry::ReplaceSelf { cost } => Some(*cost),
            StrategyEntry::Decompose(seq) => Some(seq.cost),
        }
    }
}

/// Rules for one component, indexed by joint input state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanBlock {
    pub path: String,
    pub input_vars: Vec<String>,
    /// State labels of each input variable.
    pub input_states: Vec<Vec<String>>,
    pub entries: Vec<StrategyEntry>,
}

impl PlanBlock {
    pub fn input_space(&self) -> JointSpace {
        JointSpace::new(self.input_states.iter().map(Vec::len).collect())
    }

    pub fn entry(&self, input: &[usize]) -> &StrategyEntry {
        &self.entries[self.input_space().index(input)]
    }

    pub fn labels(&self, input: usize) -> Vec<&str> {
        self.input_space()
            .decode(input)
            .iter()
            .zip(&self.input_states)
            .map(|(&s, names)| names[s].as_str())
            .collect()
    }
}

/// A full rule table. The system root has path `""`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalRepairPlan {
    pub model_name: String,
    pub digest: String,
    /// `None` for a flat plan over the leaves.
    pub max_depth: Option<usize>,
    pub blocks: BTreeMap<String, PlanBlock>,
}

impl HierarchicalRepairPlan {
    pub fn root(&self) -> &PlanBlock {
        &self.blocks[""]
    }

    pub fn block(&self, path: &str) -> Option<&PlanBlock> {
        self.blocks.get(path)
    }
}

/// SHA-256 of the canonical serialization, hex encoded.
pub fn model_digest(model: &SystemModel) -> String {
    hex::encode(Sha256::digest(serialize_model(model).as_bytes()))
}

/// Which mode distribution weights the local I/O mixture of a child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContextWeighting {
    /// The carried posterior, conditioned on the current anomaly.
    #[default]
    Posterior,
    /// The prior over the unrepaired components, ignoring observations.
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub guard: usize,
    pub weighting: ContextWeighting,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            guard: DEFAULT_GUARD,
            weighting: ContextWeighting::Posterior,
        }
    }
}

/// A decomposable node of the hierarchy with its children's level.
#[derive(Debug, Clone)]
pub struct NodeLevel {
    pub path: String,
    /// The system root is level 0; top-level components are level 1.
    pub depth: usize,
    pub replace_cost: f64,
    pub level: Level,
    pub child_paths: Vec<String>,
    pub child_hierarchical: Vec<bool>,
}

/// Compiled model plus the per-node levels used for planning.
#[derive(Debug, Clone)]
pub struct Planner {
    pub model: SystemModel,
    pub descriptions: DescriptionMap,
    pub digest: String,
    pub options: PlanOptions,
    nodes: BTreeMap<String, NodeLevel>,
}

impl Planner {
    pub fn new(model: &SystemModel, options: PlanOptions) -> Result<Self, PlanError> {
        let descriptions = compile_model(model)?;
        let mut nodes = BTreeMap::new();
        let root_cost = model.components.iter().map(|c| c.costs.replace).sum();
        collect_nodes(model, "", 0, root_cost, &descriptions, &mut nodes)?;
        Ok(Self {
            model: model.clone(),
            descriptions,
            digest: model_digest(model),
            options,
            nodes,
        })
    }

    pub fn height(&self) -> usize {
        self.model.height()
    }

    pub fn node(&self, path: &str) -> Option<&NodeLevel> {
        self.nodes.get(path)
    }

    /// Whether child `c` of `node` may be inspected under `max_depth`.
    pub fn inspectable(&self, node: &NodeLevel, c: usize, max_depth: usize) -> bool {
        node.child_hierarchical[c] && node.level.children[c].costs.inspect.is_some() && node.depth + 1 < max_depth
    }

    /// Build the rule table with components at level `max_depth` replace-only.
    pub fn build(&self, max_depth: usize) -> Result<HierarchicalRepairPlan, PlanError> {
        if max_depth == 0 {
            return Err(PlanError::ZeroDepth);
        }
        let mut blocks = BTreeMap::new();
        self.build_node("", max_depth, &mut blocks)?;
        Ok(HierarchicalRepairPlan {
            model_name: self.model.name.clone(),
            digest: self.digest.clone(),
            max_depth: Some(max_depth),
            blocks,
        })
    }

    fn build_node(
        &self,
        path: &str,
        max_depth: usize,
        blocks: &mut BTreeMap<String, PlanBlock>,
    ) -> Result<(), PlanError> {
        let node = &self.nodes[path];
        for (c, child) in node.child_paths.iter().enumerate() {
            if node.child_hierarchical[c] && node.depth + 1 < max_depth {
                self.build_node(child, max_depth, blocks)?;
            }
        }
        let inputs: Vec<Vec<usize>> = node.level.input_space.iter().collect();
        let entries = inputs
            .par_iter()
            .map(|input| {
                let ctx = node.level.context(input);
                self.strategy_for_input(node, &ctx, blocks, max_depth)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let spec_inputs = if path.is_empty() {
            self.model.system_inputs.clone()
        } else {
            self.model.find_path(path).expect("node exists").inputs.clone()
        };
        let sub = self.submodel(path);
        let input_states = sub
            .system_inputs
            .iter()
            .map(|v| sub.variable(v).expect("declared input").states.clone())
            .collect();
        blocks.insert(
            path.to_string(),
            PlanBlock {
                path: path.to_string(),
                input_vars: spec_inputs,
                input_states,
                entries,
            },
        );
        Ok(())
    }

    fn submodel(&self, path: &str) -> &SystemModel {
        if path.is_empty() {
            &self.model
        } else {
            self.model
                .find_path(path)
                .and_then(|c| c.submodel())
                .expect("decomposable node")
        }
    }

    /// Rule for one input of `node`.
    pub fn strategy_for_input(
        &self,
        node: &NodeLevel,
        ctx: &InputContext,
        blocks: &BTreeMap<String, PlanBlock>,
        max_depth: usize,
    ) -> Result<StrategyEntry, PlanError> {
        if !ctx.reachable() {
            return Ok(StrategyEntry::Unreachable);
        }
        if node.replace_cost == 0.0 {
            return Ok(StrategyEntry::ReplaceSelf { cost: 0.0 });
        }
        let best = search(
            ctx,
            self.options.guard,
            |c, q| self.choose_method(node, ctx, q, c, blocks, max_depth),
            |_| RepairMethod::Replace,
        )?;
        if node.replace_cost <= best.cost {
            return Ok(StrategyEntry::ReplaceSelf {
                cost: node.replace_cost,
            });
        }
        Ok(StrategyEntry::Decompose(AnnotatedSequence {
            steps: best
                .order
                .iter()
                .zip(&best.annotations)
                .map(|(&c, &method)| Step {
                    name: node.level.names[c].clone(),
                    method,
                })
                .collect(),
            cost: best.cost,
            never_executed: best.never_executed,
        }))
    }

    /// Cheaper method for replacing child `c` given the posterior before the
    /// step; ties go to replace.
    fn choose_method(
        &self,
        node: &NodeLevel,
        ctx: &InputContext,
        q: &ModePosterior,
        c: usize,
        blocks: &BTreeMap<String, PlanBlock>,
        max_depth: usize,
    ) -> Result<(f64, RepairMethod), PlanError> {
        let replace = node.level.children[c].costs.replace;
        if !self.inspectable(node, c, max_depth) {
            return Ok((replace, RepairMethod::Replace));
        }
        let inspect = self.method_cost(node, ctx, q, c, RepairMethod::Inspect, blocks, max_depth)?;
        if inspect < replace {
            Ok((inspect, RepairMethod::Inspect))
        } else {
            Ok((replace, RepairMethod::Replace))
        }
    }

    /// Cost of repairing child `c` with `method` given the posterior before
    /// the step.
    #[allow(clippy::too_many_arguments)]
    pub fn method_cost(
        &self,
        node: &NodeLevel,
        ctx: &InputContext,
        q: &ModePosterior,
        c: usize,
        method: RepairMethod,
        blocks: &BTreeMap<String, PlanBlock>,
        max_depth: usize,
    ) -> Result<f64, PlanError> {
        let child = &node.level.children[c];
        match method {
            RepairMethod::Replace => Ok(child.costs.replace),
            RepairMethod::Inspect => {
                if !node.child_hierarchical[c] {
                    return Err(PlanError::InspectOnLeaf(child.path.clone()));
                }
                if !self.inspectable(node, c, max_depth) {
                    return Err(PlanError::InspectNotAllowed(child.path.clone()));
                }
                let block = blocks
                    .get(&node.child_paths[c])
                    .ok_or_else(|| PlanError::InspectNotAllowed(child.path.clone()))?;
                let io = io_posterior(ctx, q, c, self.options.weighting);
                let d = child.costs.inspect.unwrap_or(0.0);
                Ok(d + echr(child, &io, block)?)
            }
        }
    }

    /// Walk `sequence` choosing the cheaper method at each step.
    pub fn annotate_sequence(
        &self,
        plan: &HierarchicalRepairPlan,
        path: &str,
        input: &[usize],
        sequence: &[&str],
    ) -> Result<AnnotatedSequence, PlanError> {
        let node = self.node_or_err(path)?;
        let max_depth = plan.max_depth.unwrap_or(0);
        let seq = flatplan::resolve_sequence(&node.level, sequence)?;
        let ctx = node.level.context(input);
        let mut methods = Vec::new();
        walk(&ctx, &seq, |c, q| {
            let (cost, m) = self.choose_method(node, &ctx, q, c, &plan.blocks, max_depth)?;
            methods.push(m);
            Ok(cost)
        })
        .map(|(cost, never_executed)| {
            let steps = seq
                .iter()
                .enumerate()
                .map(|(k, &c)| Step {
                    name: node.level.names[c].clone(),
                    method: methods.get(k).copied().unwrap_or(RepairMethod::Replace),
                })
                .collect();
            AnnotatedSequence {
                steps,
                cost,
                never_executed,
            }
        })
    }

    /// Expected cost of an annotated sequence with its methods held fixed.
    pub fn annotated_cost(
        &self,
        plan: &HierarchicalRepairPlan,
        path: &str,
        input: &[usize],
        steps: &[Step],
    ) -> Result<f64, PlanError> {
        let node = self.node_or_err(path)?;
        let max_depth = plan.max_depth.unwrap_or(0);
        let names: Vec<&str> = steps.iter().map(|s| s.name.as_str()).collect();
        let seq = flatplan::resolve_sequence(&node.level, &names)?;
        let ctx = node.level.context(input);
        let mut k = 0;
        walk(&ctx, &seq, |c, q| {
            let m = steps[k].method;
            k += 1;
            self.method_cost(node, &ctx, q, c, m, &plan.blocks, max_depth)
        })
        .map(|(cost, _)| cost)
    }

    fn node_or_err(&self, path: &str) -> Result<&NodeLevel, PlanError> {
        self.nodes
            .get(path)
            .ok_or_else(|| PlanError::UnknownComponent(path.to_string()))
    }
}

/// Accumulate `c1 + p1 (c2 + ...)` with step costs from `step`.
fn walk<F>(ctx: &InputContext, seq: &[usize], mut step: F) -> Result<(f64, usize), PlanError>
where
    F: FnMut(usize, &ModePosterior) -> Result<f64, PlanError>,
{
    check_permutation(ctx.level.len(), seq)?;
    let mut q = initial_posterior(ctx)?;
    let mut cost = 0.0;
    let mut reach = 1.0;
    for (j, &c) in seq.iter().enumerate() {
        cost += reach * step(c, &q)?;
        let r = advance_step(ctx, &q, c);
        reach *= r.anomaly_probability;
        match r.next {
            Some(next) => q = next,
            None => return Ok((cost, seq.len() - j - 1)),
        }
    }
    Ok((cost, 0))
}

fn collect_nodes(
    model: &SystemModel,
    path: &str,
    depth: usize,
    replace_cost: f64,
    descriptions: &DescriptionMap,
    out: &mut BTreeMap<String, NodeLevel>,
) -> Result<(), PlanError> {
    let children: Vec<AtomicDescription> = level_descriptions(descriptions, model, path)?
        .into_iter()
        .cloned()
        .collect();
    let level = Level::new(model, children)?;
    let child_paths: Vec<String> = model.components.iter().map(|c| child_path(path, &c.name)).collect();
    for (c, spec) in model.components.iter().enumerate() {
        if let Some(sub) = spec.submodel() {
            collect_nodes(sub, &child_paths[c], depth + 1, spec.costs.replace, descriptions, out)?;
        }
    }
    out.insert(
        path.to_string(),
        NodeLevel {
            path: path.to_string(),
            depth,
            replace_cost,
            level,
            child_hierarchical: model.components.iter().map(|c| c.is_hierarchical()).collect(),
            child_paths,
        },
    );
    Ok(())
}

/// Distribution over a child's local input tuple and output given the
/// anomaly, mixing per-mode local marginals by the context weighting.
pub fn io_posterior(ctx: &InputContext, q: &ModePosterior, target: usize, weighting: ContextWeighting) -> LocalIo {
    let level = ctx.level;
    let weights: Vec<(usize, f64)> = match weighting {
        ContextWeighting::Posterior => q
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, &w)| (q.full_index(level, k), w))
            .collect(),
        ContextWeighting::Prior => (0..q.space.size())
            .map(|k| {
                let full = q.full_index(level, k);
                let digits = q.space.decode(k);
                let w: f64 = q
                    .unfixed
                    .iter()
                    .zip(&digits)
                    .map(|(&c, &m)| level.children[c].prior[m])
                    .product();
                (full, w)
            })
            .filter(|&(_, w)| w > 0.0)
            .collect(),
    };
    let child = &level.children[target];
    let mut table = IoTable::zeros(child.behavior.input_space(), child.behavior.output_states);
    let mut total = 0.0;
    for (full, w) in weights {
        if let LocalIo::Joint(t) = ctx.local_io(target, full) {
            for (acc, p) in table.probs.iter_mut().zip(&t.probs) {
                *acc += w * p;
            }
            total += w;
        }
    }
    if total <= 0.0 {
        return LocalIo::Empty;
    }
    for p in &mut table.probs {
        *p /= total;
    }
    LocalIo::Joint(table)
}

/// Expected cost of hierarchically repairing `child` given its local I/O
/// distribution: readings where the child's output is locally correct cost
/// nothing.
pub fn echr(child: &AtomicDescription, io: &LocalIo, block: &PlanBlock) -> Result<f64, PlanError> {
    let Some(table) = io.table() else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    for input in 0..table.input_space.size() {
        let correct = child.correct_output(input);
        let mass: f64 = (0..table.output_states)
            .filter(|&o| o != correct)
            .map(|o| table.get(input, o))
            .sum();
        if mass <= 0.0 {
            continue;
        }
        let cost = block
            .entries
            .get(input)
            .and_then(StrategyEntry::opt_ec)
            .ok_or_else(|| PlanError::MissingSubplanEntry {
                path: block.path.clone(),
                input: block.labels(input).join(" "),
            })?;
        total += mass * cost;
    }
    Ok(total)
}

/// Plan with default options.
pub fn build_plan(model: &SystemModel, max_depth: usize) -> Result<HierarchicalRepairPlan, PlanError> {
    Planner::new(model, PlanOptions::default())?.build(max_depth)
}

/// Flat plan over the leaves of `model`, packaged as a single root block.
pub fn build_flat_plan(model: &SystemModel, guard: usize) -> Result<HierarchicalRepairPlan, PlanError> {
    let flat = flatten(model);
    let level = Level::atomic(&flat)?;
    let plan = flatplan::flat_plan(&level, guard)?;
    let entries = plan
        .entries
        .into_iter()
        .map(|e| match e {
            flatplan::FlatEntry::Unreachable => StrategyEntry::Unreachable,
            flatplan::FlatEntry::Sequence {
                order,
                cost,
                never_executed,
            } => StrategyEntry::Decompose(AnnotatedSequence {
                steps: order
                    .into_iter()
                    .map(|name| Step {
                        name,
                        method: RepairMethod::Replace,
                    })
                    .collect(),
                cost,
                never_executed,
            }),
        })
        .collect();
    let input_states = model
        .system_inputs
        .iter()
        .map(|v| model.variable(v).expect("declared input").states.clone())
        .collect();
    let mut blocks = BTreeMap::new();
    blocks.insert(
        String::new(),
        PlanBlock {
            path: String::new(),
            input_vars: model.system_inputs.clone(),
            input_states,
            entries,
        },
    );
    Ok(HierarchicalRepairPlan {
        model_name: model.name.clone(),
        digest: model_digest(model),
        max_depth: None,
        blocks,
    })
}
