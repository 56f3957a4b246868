//! Seeded random hierarchies for benchmarks and property tests.
//!
//! The system has one top-level component `R` with inputs `I0..I{m-1}` and
//! output `X`. Every interior node has `b` children chained in series: child
//! 0 reads a permutation of the parent's inputs, child `k` reads child
//! `k-1`'s output plus `m-1` other signals already available, and the last
//! child drives the parent's output.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compile::{compile_model, root_anomaly_probability};
use crate::model::{
    child_path, validate_model, ComponentKind, ComponentSpec, CostPair, Cpt, ModeSpace, Slot, StateSpace, SystemModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkShape {
    /// Children per interior node.
    pub branching: usize,
    /// Inputs per component.
    pub fan_in: usize,
    /// Levels in the component tree; 1 means `R` is a leaf.
    pub depth: usize,
    /// States per signal.
    pub states: usize,
    pub seed: u64,
}

impl BenchmarkShape {
    pub fn new(branching: usize, fan_in: usize, depth: usize, states: usize, seed: u64) -> Self {
        Self {
            branching,
            fan_in,
            depth,
            states,
            seed,
        }
    }
}

const MAX_ATTEMPTS: u64 = 1000;

/// A valid random model of the given shape with at least one input whose
/// anomaly is reachable. Same shape, same model.
pub fn generate_random_model(shape: BenchmarkShape) -> SystemModel {
    assert!(shape.branching >= 1 && shape.fan_in >= 1 && shape.depth >= 1 && shape.states >= 2);
    for attempt in 0..MAX_ATTEMPTS {
        let seed = shape.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let model = build(shape, seed);
        debug_assert!(validate_model(&model).is_valid(), "{:?}", validate_model(&model));
        if has_reachable_anomaly(&model) {
            return model;
        }
    }
    panic!("no model with a reachable anomaly after {MAX_ATTEMPTS} attempts for {shape:?}");
}

fn has_reachable_anomaly(model: &SystemModel) -> bool {
    let Ok(descriptions) = compile_model(model) else {
        return false;
    };
    model
        .input_space()
        .iter()
        .any(|i| root_anomaly_probability(model, &descriptions, &i).is_ok_and(|p| p > 0.0))
}

struct Gen {
    rng: ChaCha8Rng,
    shape: BenchmarkShape,
    labels: Vec<String>,
}

fn build(shape: BenchmarkShape, seed: u64) -> SystemModel {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        shape,
        labels: (0..shape.states).map(|s| s.to_string()).collect(),
    };
    let inputs: Vec<String> = (0..shape.fan_in).map(|k| format!("I{k}")).collect();
    let mut variables: Vec<StateSpace> = inputs.iter().map(|v| g.space(v)).collect();
    variables.push(g.space("X"));
    let root = g.component("R", "R", &inputs, "X", shape.depth);
    let model = SystemModel {
        name: format!(
            "random_b{}_m{}_d{}_s{}_{}",
            shape.branching, shape.fan_in, shape.depth, shape.states, shape.seed
        ),
        variables,
        wiring: declared_wiring(std::slice::from_ref(&root)),
        components: vec![root],
        system_inputs: inputs,
        system_output: "X".into(),
    };
    model
}

fn declared_wiring(components: &[ComponentSpec]) -> BTreeMap<Slot, String> {
    components
        .iter()
        .flat_map(|c| {
            c.inputs.iter().enumerate().map(|(k, v)| {
                (
                    Slot {
                        component: c.name.clone(),
                        index: k,
                    },
                    v.clone(),
                )
            })
        })
        .collect()
}

impl Gen {
    fn space(&self, name: &str) -> StateSpace {
        StateSpace::new(name, self.labels.clone())
    }

    fn component(&mut self, path: &str, name: &str, inputs: &[String], output: &str, depth: usize) -> ComponentSpec {
        if depth == 1 {
            return self.leaf(name, inputs, output);
        }
        let b = self.shape.branching;
        let m = self.shape.fan_in;
        let prefix = path.replace('/', "_");
        let internal: Vec<String> = (0..b - 1).map(|k| format!("{prefix}_y{k}")).collect();
        let mut variables: Vec<StateSpace> = inputs.iter().map(|v| self.space(v)).collect();
        variables.push(self.space(output));
        variables.extend(internal.iter().map(|v| self.space(v)));

        let mut children = Vec::with_capacity(b);
        for k in 0..b {
            let child_inputs: Vec<String> = if k == 0 {
                let mut v = inputs.to_vec();
                v.shuffle(&mut self.rng);
                v
            } else {
                let mut pool: Vec<String> = inputs.iter().chain(&internal[..k - 1]).cloned().collect();
                pool.shuffle(&mut self.rng);
                let mut v = vec![internal[k - 1].clone()];
                v.extend(pool.into_iter().take(m - 1));
                v
            };
            let child_output = if k + 1 == b {
                output.to_string()
            } else {
                internal[k].clone()
            };
            let child_name = format!("C{k}");
            let child = self.component(
                &child_path(path, &child_name),
                &child_name,
                &child_inputs,
                &child_output,
                depth - 1,
            );
            children.push(child);
        }

        let child_cost: f64 = children.iter().map(|c| c.costs.replace).sum();
        let replace = quantize(child_cost * self.rng.gen_range(0.5..1.2), 100.0).max(0.5);
        let inspect = quantize(replace * self.rng.gen_range(0.05..0.25), 100.0).max(0.01);
        let submodel = SystemModel {
            name: name.to_string(),
            variables,
            wiring: declared_wiring(&children),
            components: children,
            system_inputs: inputs.to_vec(),
            system_output: output.to_string(),
        };
        ComponentSpec {
            name: name.to_string(),
            inputs: inputs.to_vec(),
            output: output.to_string(),
            modes: ModeSpace::binary(),
            costs: CostPair {
                replace,
                inspect: Some(inspect),
            },
            kind: ComponentKind::Hierarchical {
                submodel: Box::new(submodel),
            },
        }
    }

    fn leaf(&mut self, name: &str, inputs: &[String], output: &str) -> ComponentSpec {
        let s = self.shape.states;
        let mut cpt = Cpt::new(2, vec![s; inputs.len()], s);
        for i in 0..cpt.input_count() {
            let o = self.rng.gen_range(0..s);
            cpt.row_mut(0, i)[o] = 1.0;
            let fault = if self.rng.gen_bool(0.5) {
                let mut row = vec![0.0; s];
                row[self.rng.gen_range(0..s)] = 1.0;
                row
            } else {
                self.random_distribution(s)
            };
            cpt.row_mut(1, i).copy_from_slice(&fault);
        }
        let p_fault = self.rng.gen_range(10..=300) as f64 / 1000.0;
        ComponentSpec {
            name: name.to_string(),
            inputs: inputs.to_vec(),
            output: output.to_string(),
            modes: ModeSpace::binary(),
            costs: CostPair {
                replace: self.rng.gen_range(2..=20) as f64 * 0.5,
                inspect: None,
            },
            kind: ComponentKind::Atomic {
                prior: vec![1.0 - p_fault, p_fault],
                cpt,
            },
        }
    }

    /// Probability vector in steps of 0.001.
    fn random_distribution(&mut self, n: usize) -> Vec<f64> {
        let mut cuts: Vec<u32> = (0..n - 1).map(|_| self.rng.gen_range(0..=1000)).collect();
        cuts.push(0);
        cuts.push(1000);
        cuts.sort_unstable();
        cuts.windows(2).map(|w| (w[1] - w[0]) as f64 / 1000.0).collect()
    }
}

fn quantize(x: f64, per_unit: f64) -> f64 {
    (x * per_unit).round() / per_unit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, serialize_model};

    #[test]
    fn shape_arithmetic() {
        let m = generate_random_model(BenchmarkShape::new(2, 2, 3, 2, 1));
        assert_eq!(m.leaf_count(), 4);
        assert_eq!(m.node_count(), 7);
        assert_eq!(m.height(), 3);
        let m = generate_random_model(BenchmarkShape::new(4, 3, 1, 2, 1));
        assert_eq!(m.node_count(), 1);
        assert_eq!(m.components[0].inputs.len(), 3);
        assert!(!m.components[0].is_hierarchical());
    }

    #[test]
    fn deterministic_and_valid() {
        for seed in 0..10 {
            let shape = BenchmarkShape::new(3, 2, 3, 2, seed);
            let a = generate_random_model(shape);
            let b = generate_random_model(shape);
            assert_eq!(serialize_model(&a), serialize_model(&b));
            assert!(validate_model(&a).is_valid(), "{:?}", validate_model(&a));
            assert_eq!(parse_model(&serialize_model(&a)).unwrap(), a);
        }
    }

    #[test]
    fn multi_state_signals() {
        let m = generate_random_model(BenchmarkShape::new(2, 2, 2, 3, 5));
        assert!(validate_model(&m).is_valid());
        assert_eq!(m.variables[0].states, ["0", "1", "2"]);
    }
}
