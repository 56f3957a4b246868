//! Replaying a plan against a known world.
//!
//! Each check of a node's output observes a fresh signal assignment ("slice")
//! of the node's subtree with the node's input held fixed. An inspection
//! reads the child's input and output from the slice in which the anomaly
//! was last observed; a nested repair starts from that same slice.

use super::{Evaluator, OracleError};
use crate::hierplan::{HierarchicalRepairPlan, RepairMethod, Step, StrategyEntry};
use crate::model::{child_path, NodeInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Replace,
    Inspect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    /// Hierarchy path of the component acted on; `""` is the whole system.
    pub path: String,
    pub kind: ActionKind,
    pub cost: f64,
}

/// Source of slices: all of them with their probabilities, or one sample.
pub(crate) trait Draw {
    fn slices(&mut self, ev: &Evaluator, node: &NodeInfo, input: &[usize], modes: &[usize]) -> Vec<(f64, Vec<u16>)>;
}

pub(crate) struct Exact;

impl Draw for Exact {
    fn slices(&mut self, ev: &Evaluator, node: &NodeInfo, input: &[usize], modes: &[usize]) -> Vec<(f64, Vec<u16>)> {
        ev.slices(node, input, modes)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct ExecStats {
    pub inspect_steps: usize,
    pub inspect_left_faulty: usize,
    pub exhausted: bool,
}

/// `(probability, cost, leaf modes afterwards)`.
type Outcomes = Vec<(f64, f64, Vec<usize>)>;

pub(crate) struct Exec<'a, D> {
    pub ev: &'a Evaluator,
    pub plan: &'a HierarchicalRepairPlan,
    pub strict: bool,
    pub draw: D,
    pub log: Option<Vec<Action>>,
    pub stats: ExecStats,
}

impl<D: Draw> Exec<'_, D> {
    fn record(&mut self, path: &str, kind: ActionKind, cost: f64) {
        if let Some(log) = &mut self.log {
            log.push(Action {
                path: path.to_string(),
                kind,
                cost,
            });
        }
    }

    /// Run `path`'s rule for `input`, given that its output was just seen
    /// anomalous in `slice`.
    pub fn entry(
        &mut self,
        path: &str,
        input: &[usize],
        modes: &[usize],
        slice: &[u16],
    ) -> Result<Outcomes, OracleError> {
        let block = self
            .plan
            .block(path)
            .ok_or_else(|| OracleError::MissingBlock(path.to_string()))?;
        let node = self.ev.node(path)?;
        match block.entry(input) {
            StrategyEntry::Unreachable => Err(OracleError::UnexpectedUnreachable { path: path.to_string() }),
            StrategyEntry::ReplaceSelf { cost } => {
                let cost = *cost;
                self.record(path, ActionKind::Replace, cost);
                let mut after = modes.to_vec();
                for &l in &node.leaves {
                    after[l] = 0;
                }
                Ok(vec![(1.0, cost, after)])
            }
            StrategyEntry::Decompose(seq) => {
                let steps = seq.steps.clone();
                self.sequence(path, input, &steps, modes, slice)
            }
        }
    }

    fn sequence(
        &mut self,
        path: &str,
        input: &[usize],
        steps: &[Step],
        modes: &[usize],
        slice: &[u16],
    ) -> Result<Outcomes, OracleError> {
        let Some((step, rest)) = steps.split_first() else {
            if path.is_empty() {
                self.stats.exhausted = true;
            }
            return Ok(vec![(1.0, 0.0, modes.to_vec())]);
        };
        let ev = self.ev;
        let child_path = child_path(path, &step.name);
        let child = ev.node(&child_path)?;
        let after_step: Outcomes = match step.method {
            RepairMethod::Replace => {
                let c = child.costs.replace;
                self.record(&child_path, ActionKind::Replace, c);
                let mut after = modes.to_vec();
                for &l in &child.leaves {
                    after[l] = 0;
                }
                vec![(1.0, c, after)]
            }
            RepairMethod::Inspect => {
                let d = child.costs.inspect.unwrap_or(0.0);
                self.record(&child_path, ActionKind::Inspect, d);
                self.stats.inspect_steps += 1;
                let local_input: Vec<usize> = ev.input_vars(child).iter().map(|&v| slice[v] as usize).collect();
                let local_output = slice[ev.var(&child.output)] as usize;
                let nested = if local_output == ev.correct_output(child, &local_input) {
                    vec![(1.0, 0.0, modes.to_vec())]
                } else {
                    self.entry(&child_path, &local_input, modes, slice)?
                };
                nested
                    .into_iter()
                    .map(|(p, c, mut after)| {
                        if child.leaves.iter().any(|&l| after[l] != 0) {
                            self.stats.inspect_left_faulty += 1;
                            if !self.strict {
                                for &l in &child.leaves {
                                    after[l] = 0;
                                }
                            }
                        }
                        (p, d + c, after)
                    })
                    .collect()
            }
        };
        let node = ev.node(path)?;
        let out = ev.var(&node.output);
        let correct = ev.correct_output(node, input);
        let mut result = Vec::new();
        for (p, cost, after) in after_step {
            for (q, fresh) in self.draw.slices(ev, node, input, &after) {
                if fresh[out] as usize == correct {
                    result.push((p * q, cost, after.clone()));
                } else {
                    for (r, more, last) in self.sequence(path, input, rest, &after, &fresh)? {
                        result.push((p * q * r, cost + more, last));
                    }
                }
            }
        }
        Ok(result)
    }
}

/// Expected plan cost over every anomalous world, by enumeration.
pub(crate) fn exact_cost(ev: &Evaluator, plan: &HierarchicalRepairPlan, input: &[usize]) -> Result<f64, OracleError> {
    if ev.leaf_count() > super::LEAF_GUARD {
        return Err(OracleError::GuardExceeded {
            n: ev.leaf_count(),
            guard: super::LEAF_GUARD,
        });
    }
    let root = ev.index.root();
    let dims = ev.input_space(root).dims();
    if input.len() != dims {
        return Err(OracleError::InputArity {
            got: input.len(),
            expected: dims,
        });
    }
    let out = ev.var(&root.output);
    let correct = ev.correct_output(root, input);
    let mut exec = Exec {
        ev,
        plan,
        strict: false,
        draw: Exact,
        log: None,
        stats: ExecStats::default(),
    };
    let mut weight = 0.0;
    let mut total = 0.0;
    for world in ev.mode_space().iter() {
        let pw = ev.world_prior(&world);
        if pw == 0.0 {
            continue;
        }
        for (q, slice) in ev.slices(root, input, &world) {
            if slice[out] as usize == correct {
                continue;
            }
            weight += pw * q;
            for (r, cost, _) in exec.entry("", input, &world, &slice)? {
                total += pw * q * r * cost;
            }
        }
    }
    if weight == 0.0 {
        return Err(OracleError::Unreachable);
    }
    Ok(total / weight)
}
