//! Hierarchical system models.
//!
//! A [`SystemModel`] is a set of components wired into an acyclic network
//! with one designated output. Components are either atomic (a mode prior and
//! a conditional probability table) or hierarchical (a nested submodel whose
//! system inputs and output are the component's own inputs and output).
//!
//! Models are immutable once parsed; all tables index states in declaration
//! order.

mod flatten;
mod parse;
mod serialize;
mod validate;

use std::collections::BTreeMap;

use crate::space::JointSpace;

pub use flatten::{flatten, flatten_with_index, HierarchyIndex, NodeInfo};
pub use parse::{parse_model, ParseError};
pub use serialize::serialize_model;
pub use validate::{validate_model, ValidationReport, Violation, ViolationKind};

/// Label of the distinguished normal mode.
pub const OK: &str = "ok";
/// Label of the single fault mode of a hierarchical component.
pub const BROKEN: &str = "b";

/// Normalization tolerance for probability vectors.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// A named discrete variable and its ordered states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    pub name: String,
    pub states: Vec<String>,
}

impl StateSpace {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Self {
        Self {
            name: name.into(),
            states,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Operating modes of a component; `ok` is always first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSpace {
    pub states: Vec<String>,
}

impl ModeSpace {
    pub fn binary() -> Self {
        Self {
            states: vec![OK.to_string(), BROKEN.to_string()],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn is_binary(&self) -> bool {
        self.states.len() == 2 && self.states[0] == OK && self.states[1] == BROKEN
    }
}

/// `P(output | mode, inputs)` stored densely.
///
/// Row `(mode, input)` lives at `mode * input_space.size() + input`, where
/// `input` is the mixed-radix index of the input tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub modes: usize,
    pub input_radix: Vec<usize>,
    pub output_states: usize,
    pub probs: Vec<f64>,
}

impl Cpt {
    pub fn new(modes: usize, input_radix: Vec<usize>, output_states: usize) -> Self {
        let rows = modes * JointSpace::new(input_radix.clone()).size();
        Self {
            modes,
            input_radix,
            output_states,
            probs: vec![0.0; rows * output_states],
        }
    }

    pub fn input_space(&self) -> JointSpace {
        JointSpace::new(self.input_radix.clone())
    }

    pub fn input_count(&self) -> usize {
        self.input_radix.iter().product()
    }

    pub fn row(&self, mode: usize, input: usize) -> &[f64] {
        let start = (mode * self.input_count() + input) * self.output_states;
        &self.probs[start..start + self.output_states]
    }

    pub fn row_mut(&mut self, mode: usize, input: usize) -> &mut [f64] {
        let start = (mode * self.input_count() + input) * self.output_states;
        let n = self.output_states;
        &mut self.probs[start..start + n]
    }

    /// The output of the ok row for `input`, if that row is a point mass.
    pub fn ok_output(&self, input: usize) -> Option<usize> {
        let row = self.row(0, input);
        if row.iter().all(|&p| p == 0.0 || p == 1.0) {
            let hits: Vec<usize> = (0..row.len()).filter(|&o| row[o] == 1.0).collect();
            if hits.len() == 1 {
                return Some(hits[0]);
            }
        }
        None
    }
}

/// Replacement cost `c` and, for decomposable components, inspection cost `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPair {
    pub replace: f64,
    pub inspect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentKind {
    Atomic { prior: Vec<f64>, cpt: Cpt },
    Hierarchical { submodel: Box<SystemModel> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub name: String,
    /// Declared input variables, one per slot.
    pub inputs: Vec<String>,
    pub output: String,
    pub modes: ModeSpace,
    pub costs: CostPair,
    pub kind: ComponentKind,
}

impl ComponentSpec {
    pub fn is_hierarchical(&self) -> bool {
        matches!(self.kind, ComponentKind::Hierarchical { .. })
    }

    pub fn submodel(&self) -> Option<&SystemModel> {
        match &self.kind {
            ComponentKind::Hierarchical { submodel } => Some(submodel),
            ComponentKind::Atomic { .. } => None,
        }
    }
}

/// An input slot of a component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub component: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    /// Variables visible in this model. For a submodel, the enclosing
    /// component's input and output variables come first.
    pub variables: Vec<StateSpace>,
    pub components: Vec<ComponentSpec>,
    /// Source variable of every component input slot.
    pub wiring: BTreeMap<Slot, String>,
    pub system_inputs: Vec<String>,
    pub system_output: String,
}

impl SystemModel {
    pub fn variable(&self, name: &str) -> Option<&StateSpace> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentSpec> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    /// Source variable feeding `slot` of `component`.
    pub fn source(&self, component: &str, slot: usize) -> Option<&str> {
        self.wiring
            .get(&Slot {
                component: component.to_string(),
                index: slot,
            })
            .map(String::as_str)
    }

    pub fn sources<'a>(&'a self, component: &'a ComponentSpec) -> Vec<&'a str> {
        (0..component.inputs.len())
            .map(|k| self.source(&component.name, k).unwrap_or(component.inputs[k].as_str()))
            .collect()
    }

    /// Space of joint system input states.
    pub fn input_space(&self) -> JointSpace {
        JointSpace::new(
            self.system_inputs
                .iter()
                .map(|v| self.variable(v).map_or(0, StateSpace::len))
                .collect(),
        )
    }

    /// Labels of a joint system input state.
    pub fn input_labels(&self, input: &[usize]) -> Vec<String> {
        self.system_inputs
            .iter()
            .zip(input)
            .map(|(v, &s)| self.variable(v).expect("declared input").states[s].clone())
            .collect()
    }

    /// Parse labels (one per system input) into a joint input state.
    pub fn parse_input(&self, labels: &[&str]) -> Option<Vec<usize>> {
        if labels.len() != self.system_inputs.len() {
            return None;
        }
        self.system_inputs
            .iter()
            .zip(labels)
            .map(|(v, l)| self.variable(v)?.index_of(l))
            .collect()
    }

    /// Height of the hierarchy tree; top-level components sit at level 1.
    pub fn height(&self) -> usize {
        self.components
            .iter()
            .map(|c| 1 + c.submodel().map_or(0, SystemModel::height))
            .max()
            .unwrap_or(0)
    }

    /// Number of components in the hierarchy tree (leaves and interior nodes).
    pub fn node_count(&self) -> usize {
        self.components
            .iter()
            .map(|c| 1 + c.submodel().map_or(0, SystemModel::node_count))
            .sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.submodel().map_or(1, SystemModel::leaf_count))
            .sum()
    }

    pub fn is_flat(&self) -> bool {
        self.components.iter().all(|c| !c.is_hierarchical())
    }

    /// Size of the joint mode space over this model's own components.
    pub fn mode_space_size(&self) -> usize {
        self.components.iter().map(|c| c.modes.len()).product()
    }

    /// Component at a `/`-separated path below this model.
    pub fn find_path(&self, path: &str) -> Option<&ComponentSpec> {
        let mut parts = path.split('/');
        let mut comp = self.component(parts.next()?)?;
        for part in parts {
            comp = comp.submodel()?.component(part)?;
        }
        Some(comp)
    }
}

/// Join a parent path and a component name.
pub fn child_path(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}/{name}")
    }
}
