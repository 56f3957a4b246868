//! Flattening a hierarchy into its leaf components.

use std::collections::BTreeMap;

use super::{child_path, ComponentKind, ComponentSpec, CostPair, Slot, StateSpace, SystemModel};

/// A node of the hierarchy tree, described in terms of the flattened model.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub path: String,
    /// Top-level components sit at level 1; the system root at level 0.
    pub level: usize,
    /// Flat variables feeding the node's input slots.
    pub inputs: Vec<String>,
    /// Flat variable driven by the node.
    pub output: String,
    /// Indices of the node's leaves in the flattened model.
    pub leaves: Vec<usize>,
    pub children: Vec<String>,
    pub costs: CostPair,
    pub hierarchical: bool,
}

/// Every hierarchy node keyed by path; the system root has path `""`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HierarchyIndex {
    pub nodes: BTreeMap<String, NodeInfo>,
}

impl HierarchyIndex {
    pub fn node(&self, path: &str) -> Option<&NodeInfo> {
        self.nodes.get(path)
    }

    pub fn root(&self) -> &NodeInfo {
        &self.nodes[""]
    }
}

/// Equivalent model whose components are exactly the leaf components.
///
/// Leaf names and internal variables are prefixed by their hierarchy path
/// (`G/N1`, `G/Y`); wiring is composed through the hierarchy so every leaf
/// reads its sources directly.
pub fn flatten(model: &SystemModel) -> SystemModel {
    flatten_with_index(model).0
}

pub fn flatten_with_index(model: &SystemModel) -> (SystemModel, HierarchyIndex) {
    let mut flat = SystemModel {
        name: model.name.clone(),
        variables: model.variables.clone(),
        components: Vec::new(),
        wiring: BTreeMap::new(),
        system_inputs: model.system_inputs.clone(),
        system_output: model.system_output.clone(),
    };
    let var_map: BTreeMap<String, String> = model
        .variables
        .iter()
        .map(|v| (v.name.clone(), v.name.clone()))
        .collect();
    let mut index = HierarchyIndex::default();
    let (leaves, children) = walk(model, "", 1, &var_map, &mut flat, &mut index);
    let replace = model.components.iter().map(|c| c.costs.replace).sum();
    index.nodes.insert(
        String::new(),
        NodeInfo {
            path: String::new(),
            level: 0,
            inputs: model.system_inputs.clone(),
            output: model.system_output.clone(),
            leaves,
            children,
            costs: CostPair { replace, inspect: None },
            hierarchical: true,
        },
    );
    (flat, index)
}

fn walk(
    model: &SystemModel,
    prefix: &str,
    level: usize,
    var_map: &BTreeMap<String, String>,
    flat: &mut SystemModel,
    index: &mut HierarchyIndex,
) -> (Vec<usize>, Vec<String>) {
    let mut all_leaves = Vec::new();
    let mut children = Vec::new();
    for c in &model.components {
        let path = child_path(prefix, &c.name);
        let sources: Vec<String> = model
            .sources(c)
            .iter()
            .map(|s| var_map.get(*s).cloned().unwrap_or_else(|| s.to_string()))
            .collect();
        let output = var_map.get(&c.output).cloned().unwrap_or_else(|| c.output.clone());
        let (leaves, grandchildren) = match &c.kind {
            ComponentKind::Atomic { .. } => {
                let idx = flat.components.len();
                for (k, s) in sources.iter().enumerate() {
                    flat.wiring.insert(
                        Slot {
                            component: path.clone(),
                            index: k,
                        },
                        s.clone(),
                    );
                }
                flat.components.push(ComponentSpec {
                    name: path.clone(),
                    inputs: sources.clone(),
                    output: output.clone(),
                    modes: c.modes.clone(),
                    costs: c.costs,
                    kind: c.kind.clone(),
                });
                (vec![idx], Vec::new())
            }
            ComponentKind::Hierarchical { submodel } => {
                let mut sub_map = BTreeMap::new();
                for v in &submodel.variables {
                    let mapped = if let Some(k) = c.inputs.iter().position(|i| i == &v.name) {
                        sources[k].clone()
                    } else if v.name == c.output {
                        output.clone()
                    } else {
                        let name = child_path(&path, &v.name);
                        flat.variables.push(StateSpace::new(name.clone(), v.states.clone()));
                        name
                    };
                    sub_map.insert(v.name.clone(), mapped);
                }
                walk(submodel, &path, level + 1, &sub_map, flat, index)
            }
        };
        all_leaves.extend(&leaves);
        index.nodes.insert(
            path.clone(),
            NodeInfo {
                path: path.clone(),
                level,
                inputs: sources,
                output,
                leaves,
                children: grandchildren,
                costs: c.costs,
                hierarchical: c.is_hierarchical(),
            },
        );
        children.push(path);
    }
    (all_leaves, children)
}
