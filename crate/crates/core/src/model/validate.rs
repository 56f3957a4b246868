//! Structural and numerical checks on parsed models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{child_path, ComponentKind, ComponentSpec, SystemModel, OK, PROB_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Cycle {
        components: Vec<String>,
    },
    CptShape {
        detail: String,
    },
    CptNotNormalized {
        mode: String,
        input: usize,
        sum: f64,
    },
    NegativeProbability,
    OkNotDeterministic {
        input: usize,
    },
    PriorNotNormalized {
        sum: f64,
    },
    ModesMissingOk,
    HierarchicalModesNotBinary,
    InterfaceMismatch {
        detail: String,
    },
    SystemOutputUndriven {
        variable: String,
    },
    SystemOutputIsInput {
        variable: String,
    },
    DuplicateOutput {
        variable: String,
    },
    DuplicateSystemInput {
        variable: String,
    },
    DrivenSystemInput {
        variable: String,
    },
    UndrivenInput {
        slot: usize,
        variable: String,
    },
    StateCountMismatch {
        slot: usize,
        declared: String,
        source: String,
    },
    InspectCostOnAtomic,
    NegativeCost,
}

/// One problem found in a model. `path` names the offending component
/// (`/`-separated) or is empty for model-level issues.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.path.is_empty() {
            "model".to_string()
        } else {
            format!("component {}", self.path)
        };
        use ViolationKind::*;
        match &self.kind {
            Cycle { components } => write!(f, "{at}: wiring cycle through {}", components.join(", ")),
            CptShape { detail } => write!(f, "{at}: malformed cpt: {detail}"),
            CptNotNormalized { mode, input, sum } => {
                write!(f, "{at}: cpt row (mode {mode}, input #{input}) sums to {sum}")
            }
            NegativeProbability => write!(f, "{at}: negative probability"),
            OkNotDeterministic { input } => write!(f, "{at}: ok-mode row for input #{input} is not deterministic"),
            PriorNotNormalized { sum } => write!(f, "{at}: mode prior sums to {sum}"),
            ModesMissingOk => write!(f, "{at}: first mode must be `ok`"),
            HierarchicalModesNotBinary => {
                write!(f, "{at}: hierarchical components must have modes `ok b`")
            }
            InterfaceMismatch { detail } => write!(f, "{at}: submodel interface mismatch: {detail}"),
            SystemOutputUndriven { variable } => {
                write!(f, "{at}: system output `{variable}` is not driven by any component")
            }
            SystemOutputIsInput { variable } => {
                write!(f, "{at}: system output `{variable}` is also a system input")
            }
            DuplicateOutput { variable } => {
                write!(f, "{at}: variable `{variable}` is driven by more than one component")
            }
            DuplicateSystemInput { variable } => {
                write!(f, "{at}: system input `{variable}` is listed twice")
            }
            DrivenSystemInput { variable } => {
                write!(f, "{at}: system input `{variable}` is driven by a component")
            }
            UndrivenInput { slot, variable } => write!(
                f,
                "{at}: input slot {slot} reads `{variable}`, which is neither a system input nor a component output"
            ),
            StateCountMismatch { slot, declared, source } => write!(
                f,
                "{at}: input slot {slot} declares `{declared}` but is wired to `{source}` with a different state count"
            ),
            InspectCostOnAtomic => write!(f, "{at}: atomic components cannot carry an inspection cost"),
            NegativeCost => write!(f, "{at}: negative cost"),
        }
    }
}

/// Result of [`validate_model`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, path: &str) -> bool {
        self.violations.iter().any(|v| v.path == path)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check a model (recursively) and collect every violation.
pub fn validate_model(model: &SystemModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_level(model, "", &mut report.violations);
    report
}

fn check_level(model: &SystemModel, prefix: &str, out: &mut Vec<Violation>) {
    let model_path = prefix.to_string();
    let push = |out: &mut Vec<Violation>, path: &str, kind| {
        out.push(Violation {
            path: path.to_string(),
            kind,
        })
    };

    let mut seen_inputs = BTreeSet::new();
    for v in &model.system_inputs {
        if !seen_inputs.insert(v.as_str()) {
            push(
                out,
                &model_path,
                ViolationKind::DuplicateSystemInput { variable: v.clone() },
            );
        }
    }

    let mut drivers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in model.components.iter().enumerate() {
        drivers.entry(c.output.as_str()).or_default().push(i);
    }
    for (var, ds) in &drivers {
        if ds.len() > 1 {
            push(
                out,
                &model_path,
                ViolationKind::DuplicateOutput {
                    variable: var.to_string(),
                },
            );
        }
        if seen_inputs.contains(var) {
            push(
                out,
                &model_path,
                ViolationKind::DrivenSystemInput {
                    variable: var.to_string(),
                },
            );
        }
    }
    if seen_inputs.contains(model.system_output.as_str()) {
        push(
            out,
            &model_path,
            ViolationKind::SystemOutputIsInput {
                variable: model.system_output.clone(),
            },
        );
    } else if !drivers.contains_key(model.system_output.as_str()) {
        push(
            out,
            &model_path,
            ViolationKind::SystemOutputUndriven {
                variable: model.system_output.clone(),
            },
        );
    }

    for c in &model.components {
        let path = child_path(prefix, &c.name);
        for (k, declared) in c.inputs.iter().enumerate() {
            let source = model.source(&c.name, k).unwrap_or(declared);
            if !seen_inputs.contains(source) && !drivers.contains_key(source) {
                push(
                    out,
                    &path,
                    ViolationKind::UndrivenInput {
                        slot: k,
                        variable: source.to_string(),
                    },
                );
            }
            let dn = model.variable(declared).map(|v| v.len());
            let sn = model.variable(source).map(|v| v.len());
            if dn != sn {
                push(
                    out,
                    &path,
                    ViolationKind::StateCountMismatch {
                        slot: k,
                        declared: declared.clone(),
                        source: source.to_string(),
                    },
                );
            }
        }
        check_component(model, c, &path, out);
    }

    if let Some(cycle) = find_cycle(model, &drivers) {
        push(out, &model_path, ViolationKind::Cycle { components: cycle });
    }
}

/// Components left over after Kahn's algorithm, i.e. those on or behind a cycle.
fn find_cycle(model: &SystemModel, drivers: &BTreeMap<&str, Vec<usize>>) -> Option<Vec<String>> {
    let n = model.components.len();
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, c) in model.components.iter().enumerate() {
        for src in model.sources(c) {
            if let Some(ds) = drivers.get(src) {
                for &i in ds {
                    consumers[i].push(j);
                    indegree[j] += 1;
                }
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut done = vec![false; n];
    while let Some(i) = ready.pop() {
        done[i] = true;
        for &j in &consumers[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    let stuck: Vec<String> = (0..n)
        .filter(|&i| !done[i])
        .map(|i| model.components[i].name.clone())
        .collect();
    (!stuck.is_empty()).then_some(stuck)
}

fn check_component(model: &SystemModel, c: &ComponentSpec, path: &str, out: &mut Vec<Violation>) {
    let mut push = |kind| {
        out.push(Violation {
            path: path.to_string(),
            kind,
        })
    };
    if c.costs.replace < 0.0 || c.costs.inspect.is_some_and(|d| d < 0.0) {
        push(ViolationKind::NegativeCost);
    }
    if c.modes.states.first().map(String::as_str) != Some(OK) {
        push(ViolationKind::ModesMissingOk);
    }
    match &c.kind {
        ComponentKind::Atomic { prior, cpt } => {
            if c.costs.inspect.is_some() {
                push(ViolationKind::InspectCostOnAtomic);
            }
            if prior.len() != c.modes.len() {
                push(ViolationKind::PriorNotNormalized {
                    sum: prior.iter().sum(),
                });
            } else if prior.iter().any(|&p| p < 0.0) {
                push(ViolationKind::NegativeProbability);
            } else {
                let sum: f64 = prior.iter().sum();
                if (sum - 1.0).abs() > PROB_TOLERANCE {
                    push(ViolationKind::PriorNotNormalized { sum });
                }
            }
            let radix: Vec<usize> = c
                .inputs
                .iter()
                .map(|v| model.variable(v).map_or(0, |s| s.len()))
                .collect();
            let outputs = model.variable(&c.output).map_or(0, |s| s.len());
            if cpt.modes != c.modes.len() || cpt.input_radix != radix || cpt.output_states != outputs {
                push(ViolationKind::CptShape {
                    detail: format!(
                        "table is {}x{:?}->{} but component declares {}x{:?}->{}",
                        cpt.modes,
                        cpt.input_radix,
                        cpt.output_states,
                        c.modes.len(),
                        radix,
                        outputs
                    ),
                });
                return;
            }
            let mut negative = false;
            for m in 0..cpt.modes {
                for i in 0..cpt.input_count() {
                    let row = cpt.row(m, i);
                    negative |= row.iter().any(|&p| p < 0.0);
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PROB_TOLERANCE {
                        push(ViolationKind::CptNotNormalized {
                            mode: c.modes.states[m].clone(),
                            input: i,
                            sum,
                        });
                    } else if m == 0 && cpt.ok_output(i).is_none() {
                        push(ViolationKind::OkNotDeterministic { input: i });
                    }
                }
            }
            if negative {
                push(ViolationKind::NegativeProbability);
            }
        }
        ComponentKind::Hierarchical { submodel } => {
            if !c.modes.is_binary() {
                push(ViolationKind::HierarchicalModesNotBinary);
            }
            if submodel.system_inputs != c.inputs {
                push(ViolationKind::InterfaceMismatch {
                    detail: format!(
                        "submodel inputs ({}) differ from component inputs ({})",
                        submodel.system_inputs.join(" "),
                        c.inputs.join(" ")
                    ),
                });
            }
            if submodel.system_output != c.output {
                push(ViolationKind::InterfaceMismatch {
                    detail: format!(
                        "submodel output `{}` differs from component output `{}`",
                        submodel.system_output, c.output
                    ),
                });
            }
            check_level(submodel, path, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::parse_model;

    #[test]
    fn fixtures_are_valid() {
        for (name, text) in fixtures::ALL {
            let report = validate_model(&parse_model(text).unwrap());
            assert!(report.is_valid(), "{name}: {report}");
        }
    }

    #[test]
    fn nondeterministic_ok_row_names_component() {
        // N2 is the second component; its first ok row is the one to perturb.
        let idx = fixtures::INV2.find("component N2").unwrap();
        let (head, tail) = fixtures::INV2.split_at(idx);
        let tail = tail.replacen("cpt ok 0 -> 0 1", "cpt ok 0 -> 0.5 0.5", 1);
        let m = parse_model(&format!("{head}{tail}")).unwrap();
        let report = validate_model(&m);
        assert_eq!(report.violations.len(), 1, "{report}");
        assert_eq!(report.violations[0].path, "N2");
        assert!(matches!(
            report.violations[0].kind,
            ViolationKind::OkNotDeterministic { input: 0 }
        ));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let text = fixtures::INV2.replace("system inputs", "wire N1.0 <- Y\nsystem inputs");
        let report = validate_model(&parse_model(&text).unwrap());
        assert!(
            report.violations.iter().any(
                |v| matches!(&v.kind, ViolationKind::Cycle { components } if components.contains(&"N1".to_string()))
            ),
            "{report}"
        );
    }

    #[test]
    fn unnormalized_prior_and_row() {
        let text = fixtures::INV1
            .replace("prior 0.9 0.1", "prior 0.9 0.2")
            .replace("cpt b 0 -> 1 0", "cpt b 0 -> 0.7 0.2");
        let report = validate_model(&parse_model(&text).unwrap());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::PriorNotNormalized { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v.kind, ViolationKind::CptNotNormalized { .. })));
    }

    #[test]
    fn inspect_cost_on_leaf_is_rejected() {
        let text = fixtures::INV1.replace("cost replace 5", "cost replace 5 inspect 1");
        let report = validate_model(&parse_model(&text).unwrap());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::InspectCostOnAtomic));
    }

    #[test]
    fn nested_violation_carries_path() {
        let text = fixtures::GBOX.replace("prior 0.8 0.2", "prior 0.8 0.3");
        let report = validate_model(&parse_model(&text).unwrap());
        assert!(report.mentions("G/N2"), "{report}");
    }

    #[test]
    fn tolerance_is_one_e_minus_nine() {
        let ok = fixtures::INV1.replace("prior 0.9 0.1", "prior 0.9 0.1000000005");
        assert!(validate_model(&parse_model(&ok).unwrap()).is_valid());
        let bad = fixtures::INV1.replace("prior 0.9 0.1", "prior 0.9 0.100000002");
        assert!(!validate_model(&parse_model(&bad).unwrap()).is_valid());
    }
}
