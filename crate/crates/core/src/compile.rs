//! Compiling hierarchical components into atomic descriptions.
//!
//! A description summarizes a component for the level above it: a prior over
//! `{ok, b}` and a behavior table `P(O | I, M)`. Leaves are transcribed from
//! their specs; interior components are compiled children-first by summing
//! out the submodel's internal signals for every non-ok joint child mode.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::model::{child_path, ComponentKind, ComponentSpec, CostPair, Cpt, ModeSpace, SystemModel, PROB_TOLERANCE};
use crate::netinfer::{ModeAssignment, NetError, Network};
use crate::space::JointSpace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("`{0}` is not hierarchical")]
    NotHierarchical(String),
    #[error("missing description for `{0}`")]
    MissingDescription(String),
    #[error("behavior row of `{path}` for input {input} sums to {sum}")]
    RowNotNormalized { path: String, input: usize, sum: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDescription {
    pub path: String,
    pub modes: ModeSpace,
    pub prior: Vec<f64>,
    pub behavior: Cpt,
    pub costs: CostPair,
    /// Set when `P(b) = 0`; the `b` row is then uniform and never reached.
    pub degenerate: bool,
}

impl AtomicDescription {
    /// Probability of the ok mode.
    pub fn ok_prior(&self) -> f64 {
        self.prior[0]
    }

    /// Locally correct output for an input tuple index.
    pub fn correct_output(&self, input: usize) -> usize {
        self.behavior.ok_output(input).unwrap_or(0)
    }
}

/// Descriptions keyed by component path.
pub type DescriptionMap = BTreeMap<String, AtomicDescription>;

/// Binary abstraction: ok iff every child is in its ok mode.
pub fn abstract_mode(joint: &[usize]) -> usize {
    usize::from(joint.iter().any(|&m| m != 0))
}

/// Copy a leaf spec into a description.
pub fn transcribe_leaf(path: &str, spec: &ComponentSpec) -> Result<AtomicDescription, CompileError> {
    match &spec.kind {
        ComponentKind::Atomic { prior, cpt } => Ok(AtomicDescription {
            path: path.to_string(),
            modes: spec.modes.clone(),
            prior: prior.clone(),
            behavior: cpt.clone(),
            costs: spec.costs,
            degenerate: false,
        }),
        ComponentKind::Hierarchical { .. } => Err(CompileError::NotHierarchical(path.to_string())),
    }
}

/// Network of one model level built from its children's descriptions.
pub fn level_network(model: &SystemModel, children: &[&AtomicDescription]) -> Result<Network, NetError> {
    Network::new(model, |i, c| {
        children
            .get(i)
            .map(|d| d.behavior.clone())
            .ok_or_else(|| NetError::MissingDescription(c.name.clone()))
    })
}

/// Descriptions of the components of the model level below `prefix`, in
/// component order.
pub fn level_descriptions<'a>(
    descriptions: &'a DescriptionMap,
    model: &SystemModel,
    prefix: &str,
) -> Result<Vec<&'a AtomicDescription>, CompileError> {
    model
        .components
        .iter()
        .map(|c| {
            let path = child_path(prefix, &c.name);
            descriptions.get(&path).ok_or(CompileError::MissingDescription(path))
        })
        .collect()
}

/// Compile a hierarchical component from its children's descriptions.
pub fn compile_component(
    path: &str,
    spec: &ComponentSpec,
    children: &[&AtomicDescription],
) -> Result<AtomicDescription, CompileError> {
    let submodel = spec
        .submodel()
        .ok_or_else(|| CompileError::NotHierarchical(path.to_string()))?;
    let net = level_network(submodel, children)?;
    let modes = JointSpace::new(children.iter().map(|d| d.modes.len()).collect());
    let joint_prior: Vec<f64> = modes
        .iter()
        .map(|m| m.iter().zip(children).map(|(&k, d)| d.prior[k]).product())
        .collect();
    let p_ok: f64 = children.iter().map(|d| d.ok_prior()).product();
    // Summing the fault-state priors directly avoids cancellation in 1 - P(ok).
    let p_fault: f64 = joint_prior.iter().skip(1).sum();
    let inputs = net.input_space();
    let out_states = net.output_states();
    let mut behavior = Cpt::new(2, inputs.radix().to_vec(), out_states);
    let degenerate = p_fault <= 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let x = net.correct_output(&input);
        behavior.row_mut(0, i)[x] = 1.0;
        let row = behavior.row_mut(1, i);
        if degenerate {
            row.fill(1.0 / out_states as f64);
            continue;
        }
        for (j, joint) in modes.iter().enumerate().skip(1) {
            if joint_prior[j] == 0.0 {
                continue;
            }
            let dist = net.output_marginal(&input, &ModeAssignment(joint));
            for (o, p) in dist.0.iter().enumerate() {
                row[o] += p * joint_prior[j];
            }
        }
        for p in row.iter_mut() {
            *p /= p_fault;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(CompileError::RowNotNormalized {
                path: path.to_string(),
                input: i,
                sum,
            });
        }
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    Ok(AtomicDescription {
        path: path.to_string(),
        modes: ModeSpace::binary(),
        prior: vec![p_ok, 1.0 - p_ok],
        behavior,
        costs: spec.costs,
        degenerate,
    })
}

/// Descriptions for every component of the hierarchy, children first.
pub fn compile_model(model: &SystemModel) -> Result<DescriptionMap, CompileError> {
    let mut out = DescriptionMap::new();
    compile_level(model, "", &mut out)?;
    Ok(out)
}

fn compile_level(model: &SystemModel, prefix: &str, out: &mut DescriptionMap) -> Result<(), CompileError> {
    for c in &model.components {
        let path = child_path(prefix, &c.name);
        let desc = match c.submodel() {
            None => transcribe_leaf(&path, c)?,
            Some(sub) => {
                compile_level(sub, &path, out)?;
                let children = level_descriptions(out, sub, &path)?;
                compile_component(&path, c, &children)?
            }
        };
        out.insert(path, desc);
    }
    Ok(())
}

/// Root-level anomaly probability `P(X != x(i) | i)` from the top-level
/// descriptions.
pub fn root_anomaly_probability(
    model: &SystemModel,
    descriptions: &DescriptionMap,
    input: &[usize],
) -> Result<f64, CompileError> {
    let top = level_descriptions(descriptions, model, "")?;
    let net = level_network(model, &top)?;
    let x = net.correct_output(input);
    let modes = JointSpace::new(top.iter().map(|d| d.modes.len()).collect());
    let mut total = 0.0;
    for joint in modes.iter().skip(1) {
        let prior: f64 = joint.iter().zip(&top).map(|(&k, d)| d.prior[k]).product();
        if prior > 0.0 {
            total += prior * net.anomaly_probability(input, &ModeAssignment(joint), x);
        }
    }
    Ok(total)
}

/// Human-readable report of a description map (6 decimals).
pub fn render_descriptions(model: &SystemModel, descriptions: &DescriptionMap) -> String {
    let mut out = String::new();
    writeln!(out, "model {}", model.name).unwrap();
    for (path, d) in descriptions {
        let spec = model.find_path(path).expect("described component exists");
        let kind = if spec.is_hierarchical() { "compiled" } else { "leaf" };
        writeln!(out, "description {path} ({kind})").unwrap();
        let prior: Vec<String> = d
            .modes
            .states
            .iter()
            .zip(&d.prior)
            .map(|(m, p)| format!("{m}={p:.6}"))
            .collect();
        writeln!(out, "  prior {}", prior.join(" ")).unwrap();
        match d.costs.inspect {
            Some(i) => writeln!(out, "  cost replace {:.6} inspect {i:.6}", d.costs.replace).unwrap(),
            None => writeln!(out, "  cost replace {:.6}", d.costs.replace).unwrap(),
        }
        if d.degenerate {
            writeln!(out, "  degenerate: fault mode has probability 0").unwrap();
        }
        let space = d.behavior.input_space();
        for (m, mode) in d.modes.states.iter().enumerate() {
            for (i, digits) in space.iter().enumerate() {
                let states: Vec<String> = digits.iter().map(|s| s.to_string()).collect();
                let row: Vec<String> = d.behavior.row(m, i).iter().map(|p| format!("{p:.6}")).collect();
                writeln!(out, "  {mode} [{}] -> {}", states.join(" "), row.join(" ")).unwrap();
            }
        }
    }
    out
}
