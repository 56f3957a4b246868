//! Exact queries on the static network of one model level with every
//! component's mode fixed.
//!
//! With modes fixed the network is a DAG of conditional tables over signal
//! variables, so exact marginals come from propagating a sparse joint over
//! the live signals in topological order and summing each signal out once
//! its last consumer has run.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{ComponentKind, ComponentSpec, Cpt, SystemModel};
use crate::space::JointSpace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("wiring cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("no behavior table for component `{0}`")]
    MissingDescription(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("unknown mode `{mode}` for component `{component}`")]
    UnknownMode { component: String, mode: String },
    #[error("mode assignment must cover all {0} components")]
    PartialAssignment(usize),
}

/// One mode per component, in the model's component order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeAssignment(pub Vec<usize>);

impl ModeAssignment {
    pub fn all_ok(components: usize) -> Self {
        Self(vec![0; components])
    }

    /// Build from `(component, mode)` label pairs; unnamed components are ok.
    pub fn from_labels(model: &SystemModel, pairs: &[(&str, &str)]) -> Result<Self, NetError> {
        let mut modes = vec![0; model.components.len()];
        for (name, mode) in pairs {
            let i = model
                .component_index(name)
                .ok_or_else(|| NetError::UnknownComponent(name.to_string()))?;
            modes[i] = model.components[i]
                .modes
                .index_of(mode)
                .ok_or_else(|| NetError::UnknownMode {
                    component: name.to_string(),
                    mode: mode.to_string(),
                })?;
        }
        Ok(Self(modes))
    }
}

/// Probability vector over the states of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution(pub Vec<f64>);

impl OutputDistribution {
    pub fn prob(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Joint distribution over a component's input tuple and output.
#[derive(Debug, Clone, PartialEq)]
pub struct IoTable {
    pub input_space: JointSpace,
    pub output_states: usize,
    /// Entry `(input, output)` at `input * output_states + output`.
    pub probs: Vec<f64>,
}

impl IoTable {
    pub fn zeros(input_space: JointSpace, output_states: usize) -> Self {
        let n = input_space.size() * output_states;
        Self {
            input_space,
            output_states,
            probs: vec![0.0; n],
        }
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.probs[input * self.output_states + output]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Result of a conditioned local query. `Empty` marks a conditioning event of
/// probability zero, i.e. an unreachable context.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalIo {
    Empty,
    Joint(IoTable),
}

impl LocalIo {
    pub fn table(&self) -> Option<&IoTable> {
        match self {
            LocalIo::Empty => None,
            LocalIo::Joint(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    /// Index of the component in the model.
    pub component: usize,
    pub name: String,
    pub sources: Vec<usize>,
    pub output: usize,
    pub behavior: Cpt,
}

/// The static network of one model level.
#[derive(Debug, Clone)]
pub struct Network {
    var_names: Vec<String>,
    var_sizes: Vec<usize>,
    /// Nodes in topological order.
    nodes: Vec<Node>,
    /// Position of each component in `nodes`.
    position: Vec<usize>,
    inputs: Vec<usize>,
    output: usize,
}

const UNSET: u16 = u16::MAX;

impl Network {
    /// Build from a model level, taking each component's behavior table from
    /// `behavior` (a leaf's CPT or a compiled description).
    pub fn new<F>(model: &SystemModel, mut behavior: F) -> Result<Self, NetError>
    where
        F: FnMut(usize, &ComponentSpec) -> Result<Cpt, NetError>,
    {
        let var_names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
        let var_sizes: Vec<usize> = model.variables.iter().map(|v| v.len()).collect();
        let var = |name: &str| {
            var_names
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| NetError::UnknownVariable(name.to_string()))
        };
        let mut nodes = Vec::with_capacity(model.components.len());
        for (i, c) in model.components.iter().enumerate() {
            let sources = model.sources(c).into_iter().map(var).collect::<Result<Vec<_>, _>>()?;
            nodes.push(Node {
                component: i,
                name: c.name.clone(),
                sources,
                output: var(&c.output)?,
                behavior: behavior(i, c)?,
            });
        }
        let nodes = topological(nodes)?;
        let mut position = vec![0; nodes.len()];
        for (k, n) in nodes.iter().enumerate() {
            position[n.component] = k;
        }
        let inputs = model
            .system_inputs
            .iter()
            .map(|v| var(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            output: var(&model.system_output)?,
            var_names,
            var_sizes,
            nodes,
            position,
            inputs,
        })
    }

    /// Network of a model whose components are all atomic.
    pub fn atomic(model: &SystemModel) -> Result<Self, NetError> {
        Self::new(model, |_, c| match &c.kind {
            ComponentKind::Atomic { cpt, .. } => Ok(cpt.clone()),
            ComponentKind::Hierarchical { .. } => Err(NetError::MissingDescription(c.name.clone())),
        })
    }

    pub fn component_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node for component `component` (model order).
    pub fn node(&self, component: usize) -> &Node {
        &self.nodes[self.position[component]]
    }

    pub fn output_states(&self) -> usize {
        self.var_sizes[self.output]
    }

    pub fn input_space(&self) -> JointSpace {
        JointSpace::new(self.inputs.iter().map(|&v| self.var_sizes[v]).collect())
    }

    pub fn variable_name(&self, var: usize) -> &str {
        &self.var_names[var]
    }

    /// Output reached with every component in its ok mode.
    pub fn correct_output(&self, input: &[usize]) -> usize {
        let mut values = vec![usize::MAX; self.var_sizes.len()];
        for (&v, &s) in self.inputs.iter().zip(input) {
            values[v] = s;
        }
        for node in &self.nodes {
            let digits: Vec<usize> = node.sources.iter().map(|&v| values[v]).collect();
            let idx = node.behavior.input_space().index(&digits);
            values[node.output] = node.behavior.ok_output(idx).unwrap_or_else(|| {
                let row = node.behavior.row(0, idx);
                (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0)
            });
        }
        values[self.output]
    }

    /// Exact marginal of the system output given inputs and modes.
    pub fn output_marginal(&self, input: &[usize], modes: &ModeAssignment) -> OutputDistribution {
        let joint = self.propagate(input, modes, &[self.output]);
        let mut dist = vec![0.0; self.var_sizes[self.output]];
        for (assign, p) in joint {
            dist[assign[self.output] as usize] += p;
        }
        OutputDistribution(dist)
    }

    /// `P(X != correct | input, modes)`, summed over anomalous output states.
    pub fn anomaly_probability(&self, input: &[usize], modes: &ModeAssignment, correct: usize) -> f64 {
        self.output_marginal(input, modes)
            .0
            .iter()
            .enumerate()
            .filter(|&(o, _)| o != correct)
            .map(|(_, p)| p)
            .sum()
    }

    /// Joint marginal over `target`'s input tuple and output, optionally
    /// conditioned on the system output differing from `correct`.
    pub fn local_io_marginal(
        &self,
        input: &[usize],
        modes: &ModeAssignment,
        target: usize,
        condition_anomalous: bool,
        correct: usize,
    ) -> LocalIo {
        let node = self.node(target);
        let mut keep = node.sources.clone();
        keep.push(node.output);
        keep.push(self.output);
        let joint = self.propagate(input, modes, &keep);
        let space = node.behavior.input_space();
        let mut table = IoTable::zeros(space.clone(), self.var_sizes[node.output]);
        for (assign, p) in joint {
            if condition_anomalous && assign[self.output] as usize == correct {
                continue;
            }
            let digits: Vec<usize> = node.sources.iter().map(|&v| assign[v] as usize).collect();
            let i = space.index(&digits);
            table.probs[i * table.output_states + assign[node.output] as usize] += p;
        }
        let total = table.total();
        if total <= 0.0 {
            return LocalIo::Empty;
        }
        for p in &mut table.probs {
            *p /= total;
        }
        LocalIo::Joint(table)
    }

    /// Sparse joint over signal assignments. Variables outside `keep` are
    /// summed out after their last consumer.
    fn propagate(&self, input: &[usize], modes: &ModeAssignment, keep: &[usize]) -> BTreeMap<Vec<u16>, f64> {
        assert_eq!(modes.0.len(), self.nodes.len(), "mode assignment must be total");
        let nvars = self.var_sizes.len();
        // Step after which each variable can be dropped.
        let mut last_use: Vec<Option<usize>> = vec![None; nvars];
        for (k, node) in self.nodes.iter().enumerate() {
            for &v in &node.sources {
                last_use[v] = Some(k);
            }
        }
        let mut start = vec![UNSET; nvars];
        for (&v, &s) in self.inputs.iter().zip(input) {
            start[v] = s as u16;
        }
        let mut joint: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        joint.insert(start, 1.0);
        for (k, node) in self.nodes.iter().enumerate() {
            let mode = modes.0[node.component];
            let space = node.behavior.input_space();
            let drop: Vec<usize> = node
                .sources
                .iter()
                .copied()
                .chain(std::iter::once(node.output))
                .filter(|v| !keep.contains(v) && last_use[*v].is_none_or(|l| l <= k))
                .filter(|v| !self.inputs.contains(v))
                .collect();
            let mut next: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
            for (assign, p) in &joint {
                let digits: Vec<usize> = node.sources.iter().map(|&v| assign[v] as usize).collect();
                let row = node.behavior.row(mode, space.index(&digits));
                for (o, &q) in row.iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    let mut a = assign.clone();
                    a[node.output] = o as u16;
                    for &v in &drop {
                        a[v] = UNSET;
                    }
                    *next.entry(a).or_insert(0.0) += p * q;
                }
            }
            joint = next;
        }
        joint
    }
}

fn topological(nodes: Vec<Node>) -> Result<Vec<Node>, NetError> {
    let n = nodes.len();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let producer = |v: usize, nodes: &[Node]| nodes.iter().position(|m| m.output == v);
    while order.len() < n {
        let before = order.len();
        for i in 0..n {
            if placed[i] {
                continue;
            }
            let ready = nodes[i]
                .sources
                .iter()
                .all(|&v| producer(v, &nodes).is_none_or(|p| placed[p]));
            if ready {
                placed[i] = true;
                order.push(i);
            }
        }
        if order.len() == before {
            let stuck = (0..n).filter(|&i| !placed[i]).map(|i| nodes[i].name.clone()).collect();
            return Err(NetError::Cycle(stuck));
        }
    }
    let mut slots: Vec<Option<Node>> = nodes.into_iter().map(Some).collect();
    Ok(order.into_iter().map(|i| slots[i].take().unwrap()).collect())
}
