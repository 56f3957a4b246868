//! Independent checks for the planners.
//!
//! Nothing here uses the inference engine or the compiled descriptions. The
//! evaluator works on the flattened model and enumerates signal values
//! directly, and plan execution is replayed against every joint leaf-mode
//! world (or sampled, for the Monte Carlo simulator).

mod bench;
mod exec;
mod generate;
mod simulate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hierplan::{AnnotatedSequence, HierarchicalRepairPlan, RepairMethod, Step, StrategyEntry};
use crate::model::{flatten_with_index, ComponentKind, Cpt, HierarchyIndex, NodeInfo, SystemModel};
use crate::space::JointSpace;

pub use bench::{bench_scaling, linear_fit, BenchRow, LinearFit};
pub use exec::{Action, ActionKind};
pub use generate::{generate_random_model, BenchmarkShape};
pub use simulate::{simulate_episodes, EpisodeTrace, SimulationConfig, SimulationReport};

/// Largest number of leaves whose joint modes are enumerated.
pub const LEAF_GUARD: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{n} leaves exceed the enumeration guard of {guard}")]
    GuardExceeded { n: usize, guard: usize },
    #[error("anomaly is unreachable for this input")]
    Unreachable,
    #[error("anomaly probability {0:e} is too small for rejection sampling")]
    Starvation(f64),
    #[error("plan has no block for `{0}`")]
    MissingBlock(String),
    #[error("plan block `{path}` has no usable entry for an observed anomaly")]
    UnexpectedUnreachable { path: String },
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("input has {got} values, expected {expected}")]
    InputArity { got: usize, expected: usize },
    #[error("model error: {0}")]
    Model(String),
}

pub(crate) const UNSET: u16 = u16::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Leaf {
    pub sources: Vec<usize>,
    pub output: usize,
    pub cpt: Cpt,
    pub prior: Vec<f64>,
}

/// Brute-force evaluator over the flattened model.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub flat: SystemModel,
    pub index: HierarchyIndex,
    pub(crate) leaves: Vec<Leaf>,
    pub(crate) sizes: Vec<usize>,
    var_index: BTreeMap<String, usize>,
    /// Leaves in an order where every producer precedes its consumers.
    order: Vec<usize>,
}

impl Evaluator {
    pub fn new(model: &SystemModel) -> Result<Self, OracleError> {
        let (flat, index) = flatten_with_index(model);
        let var_index: BTreeMap<String, usize> = flat
            .variables
            .iter()
            .enumerate()
            .map(|(k, v)| (v.name.clone(), k))
            .collect();
        let sizes = flat.variables.iter().map(|v| v.len()).collect();
        let var = |name: &str| {
            var_index
                .get(name)
                .copied()
                .ok_or_else(|| OracleError::Model(format!("unknown variable `{name}`")))
        };
        let mut leaves = Vec::new();
        for c in &flat.components {
            let ComponentKind::Atomic { prior, cpt } = &c.kind else {
                return Err(OracleError::Model("flattened model has an interior node".into()));
            };
            leaves.push(Leaf {
                sources: flat.sources(c).into_iter().map(var).collect::<Result<_, _>>()?,
                output: var(&c.output)?,
                cpt: cpt.clone(),
                prior: prior.clone(),
            });
        }
        let order = producer_order(&leaves)?;
        Ok(Self {
            flat,
            index,
            leaves,
            sizes,
            var_index,
            order,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn node(&self, path: &str) -> Result<&NodeInfo, OracleError> {
        self.index
            .node(path)
            .ok_or_else(|| OracleError::UnknownComponent(path.to_string()))
    }

    pub(crate) fn var(&self, name: &str) -> usize {
        self.var_index[name]
    }

    /// Flat variables of a node's input slots.
    pub(crate) fn input_vars(&self, node: &NodeInfo) -> Vec<usize> {
        node.inputs.iter().map(|v| self.var(v)).collect()
    }

    pub(crate) fn input_space(&self, node: &NodeInfo) -> JointSpace {
        JointSpace::new(self.input_vars(node).iter().map(|&v| self.sizes[v]).collect())
    }

    /// Every signal assignment of `node`'s subtree with its inputs clamped,
    /// with its probability under `modes`.
    pub(crate) fn slices(&self, node: &NodeInfo, input: &[usize], modes: &[usize]) -> Vec<(f64, Vec<u16>)> {
        let mut start = vec![UNSET; self.sizes.len()];
        for (v, &s) in self.input_vars(node).into_iter().zip(input) {
            start[v] = s as u16;
        }
        let members: Vec<usize> = self.order.iter().copied().filter(|l| node.leaves.contains(l)).collect();
        let mut out = Vec::new();
        self.expand(&members, modes, start, 1.0, &mut out);
        out
    }

    fn expand(&self, members: &[usize], modes: &[usize], signals: Vec<u16>, p: f64, out: &mut Vec<(f64, Vec<u16>)>) {
        let Some((&l, rest)) = members.split_first() else {
            out.push((p, signals));
            return;
        };
        let leaf = &self.leaves[l];
        let row = leaf.cpt.row(modes[l], self.row_index(leaf, &signals));
        for (o, &q) in row.iter().enumerate() {
            if q > 0.0 {
                let mut next = signals.clone();
                next[leaf.output] = o as u16;
                self.expand(rest, modes, next, p * q, out);
            }
        }
    }

    /// Draw one signal assignment of `node`'s subtree.
    pub(crate) fn sample_slice(
        &self,
        node: &NodeInfo,
        input: &[usize],
        modes: &[usize],
        mut uniform: impl FnMut() -> f64,
    ) -> Vec<u16> {
        let mut signals = vec![UNSET; self.sizes.len()];
        for (v, &s) in self.input_vars(node).into_iter().zip(input) {
            signals[v] = s as u16;
        }
        for &l in &self.order {
            if !node.leaves.contains(&l) {
                continue;
            }
            let leaf = &self.leaves[l];
            let row = leaf.cpt.row(modes[l], self.row_index(leaf, &signals));
            signals[leaf.output] = sample_index(row, uniform()) as u16;
        }
        signals
    }

    fn row_index(&self, leaf: &Leaf, signals: &[u16]) -> usize {
        leaf.sources.iter().fold(0, |acc, &v| {
            debug_assert_ne!(signals[v], UNSET, "source evaluated before use");
            acc * self.sizes[v] + signals[v] as usize
        })
    }

    /// Output of `node` with every leaf ok.
    pub fn correct_output(&self, node: &NodeInfo, input: &[usize]) -> usize {
        let ok = vec![0; self.leaves.len()];
        let slices = self.slices(node, input, &ok);
        let out = self.var(&node.output);
        let mut best = (0.0, 0);
        for (p, s) in slices {
            if p > best.0 {
                best = (p, s[out] as usize);
            }
        }
        best.1
    }

    /// `P(X | i, modes)` by enumerating every signal assignment.
    pub fn output_distribution(&self, input: &[usize], modes: &[usize]) -> Vec<f64> {
        let root = self.index.root();
        let out = self.var(&root.output);
        let mut dist = vec![0.0; self.sizes[out]];
        for (p, s) in self.slices(root, input, modes) {
            dist[s[out] as usize] += p;
        }
        dist
    }

    /// Probability of a joint leaf-mode world.
    pub fn world_prior(&self, modes: &[usize]) -> f64 {
        modes.iter().zip(&self.leaves).map(|(&m, l)| l.prior[m]).product()
    }

    pub fn mode_space(&self) -> JointSpace {
        JointSpace::new(self.leaves.iter().map(|l| l.prior.len()).collect())
    }

    /// `P(X != x(i) | i)` by enumeration.
    pub fn anomaly_probability(&self, input: &[usize]) -> f64 {
        let root = self.index.root();
        let x = self.correct_output(root, input);
        let out = self.var(&root.output);
        self.mode_space()
            .iter()
            .map(|w| {
                let pw = self.world_prior(&w);
                if pw == 0.0 {
                    return 0.0;
                }
                let bad: f64 = self
                    .slices(root, input, &w)
                    .iter()
                    .filter(|(_, s)| s[out] as usize != x)
                    .map(|(p, _)| p)
                    .sum();
                pw * bad
            })
            .sum()
    }
}

pub(crate) fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

fn producer_order(leaves: &[Leaf]) -> Result<Vec<usize>, OracleError> {
    fn visit(l: usize, leaves: &[Leaf], state: &mut [u8], out: &mut Vec<usize>) -> Result<(), OracleError> {
        match state[l] {
            2 => return Ok(()),
            1 => return Err(OracleError::Model("wiring cycle".into())),
            _ => {}
        }
        state[l] = 1;
        for &v in &leaves[l].sources {
            if let Some(p) = leaves.iter().position(|x| x.output == v) {
                visit(p, leaves, state, out)?;
            }
        }
        state[l] = 2;
        out.push(l);
        Ok(())
    }
    let mut state = vec![0u8; leaves.len()];
    let mut out = Vec::new();
    for l in 0..leaves.len() {
        visit(l, leaves, &mut state, &mut out)?;
    }
    Ok(out)
}

/// Expected cost of executing `plan` for `input`, averaged exactly over
/// every anomalous world and every stochastic signal value.
pub fn exhaustive_plan_cost(
    model: &SystemModel,
    plan: &HierarchicalRepairPlan,
    input: &[usize],
) -> Result<f64, OracleError> {
    let ev = if plan.max_depth.is_none() {
        Evaluator::new(&crate::model::flatten(model))?
    } else {
        Evaluator::new(model)?
    };
    exec::exact_cost(&ev, plan, input)
}

/// Expected cost of replacing leaves in `sequence` order, checking the
/// system output after each replacement.
pub fn exhaustive_sequence_cost(model: &SystemModel, sequence: &[&str], input: &[usize]) -> Result<f64, OracleError> {
    let ev = Evaluator::new(&crate::model::flatten(model))?;
    let plan = sequence_plan(&ev, sequence, input)?;
    exec::exact_cost(&ev, &plan, input)
}

/// A one-entry plan that runs `sequence` at the root of the flat model.
fn sequence_plan(ev: &Evaluator, sequence: &[&str], input: &[usize]) -> Result<HierarchicalRepairPlan, OracleError> {
    for name in sequence {
        if ev.index.node(name).is_none() {
            return Err(OracleError::UnknownComponent(name.to_string()));
        }
    }
    let root = ev.index.root();
    let space = ev.input_space(root);
    if input.len() != space.dims() {
        return Err(OracleError::InputArity {
            got: input.len(),
            expected: space.dims(),
        });
    }
    let mut entries = vec![StrategyEntry::Unreachable; space.size()];
    entries[space.index(input)] = StrategyEntry::Decompose(AnnotatedSequence {
        steps: sequence
            .iter()
            .map(|n| Step {
                name: n.to_string(),
                method: RepairMethod::Replace,
            })
            .collect(),
        cost: 0.0,
        never_executed: 0,
    });
    let mut blocks = BTreeMap::new();
    blocks.insert(
        String::new(),
        crate::hierplan::PlanBlock {
            path: String::new(),
            input_vars: root.inputs.clone(),
            input_states: root
                .inputs
                .iter()
                .map(|v| ev.flat.variable(v).map(|s| s.states.clone()).unwrap_or_default())
                .collect(),
            entries,
        },
    );
    Ok(HierarchicalRepairPlan {
        model_name: ev.flat.name.clone(),
        digest: String::new(),
        max_depth: None,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::parse_model;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn chain_sequences() {
        let m = parse_model(fixtures::INV2).unwrap();
        assert!(close(
            exhaustive_sequence_cost(&m, &["N2", "N1"], &[0]).unwrap(),
            59.0 / 13.0
        ));
        assert!(close(
            exhaustive_sequence_cost(&m, &["N1", "N2"], &[0]).unwrap(),
            92.0 / 13.0
        ));
        let m = parse_model(fixtures::INV1).unwrap();
        assert_eq!(exhaustive_sequence_cost(&m, &["N"], &[0]).unwrap(), 5.0);
    }

    #[test]
    fn gbox_anomaly_by_enumeration() {
        let ev = Evaluator::new(&parse_model(fixtures::GBOX).unwrap()).unwrap();
        assert!(close(ev.anomaly_probability(&[0]), 0.26));
        assert_eq!(ev.correct_output(ev.index.root(), &[0]), 0);
    }

    #[test]
    fn unreachable_input() {
        let m = parse_model(fixtures::FIG1).unwrap();
        assert_eq!(
            exhaustive_sequence_cost(&m, &["OR", "AND", "XOR"], &[0, 0]),
            Err(OracleError::Unreachable)
        );
    }

    #[test]
    fn sampling_respects_zeros() {
        assert_eq!(sample_index(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.49), 0);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 0.999_999_999_999), 1);
    }
}
