//! Canonical text form of a model.

use std::fmt::Write;

use super::{ComponentKind, ComponentSpec, SystemModel};

/// Render `model` in canonical model-language form.
///
/// Numbers are written in shortest round-trip decimal form, so parsing the
/// output reproduces the model exactly.
pub fn serialize_model(model: &SystemModel) -> String {
    let mut out = String::new();
    writeln!(out, "model {}", model.name).unwrap();
    write_body(&mut out, model, &[], 0);
    out
}

fn write_body(out: &mut String, model: &SystemModel, inherited: &[&str], depth: usize) {
    let pad = "  ".repeat(depth);
    for v in &model.variables {
        if inherited.contains(&v.name.as_str()) {
            continue;
        }
        writeln!(out, "{pad}var {} states {}", v.name, v.states.join(" ")).unwrap();
    }
    for c in &model.components {
        write_component(out, model, c, depth);
    }
    for c in &model.components {
        for (k, declared) in c.inputs.iter().enumerate() {
            if let Some(src) = model.source(&c.name, k) {
                if src != declared {
                    writeln!(out, "{pad}wire {}.{k} <- {src}", c.name).unwrap();
                }
            }
        }
    }
    let mut system = format!("{pad}system inputs");
    for v in &model.system_inputs {
        system.push(' ');
        system.push_str(v);
    }
    writeln!(out, "{system} output {}", model.system_output).unwrap();
}

fn write_component(out: &mut String, model: &SystemModel, c: &ComponentSpec, depth: usize) {
    let pad = "  ".repeat(depth);
    let kind = if c.is_hierarchical() { "hierarchical" } else { "atomic" };
    writeln!(out, "{pad}component {} kind {kind}", c.name).unwrap();
    let mut inputs = format!("{pad}  inputs");
    for v in &c.inputs {
        inputs.push(' ');
        inputs.push_str(v);
    }
    writeln!(out, "{inputs}").unwrap();
    writeln!(out, "{pad}  output {}", c.output).unwrap();
    writeln!(out, "{pad}  modes {}", c.modes.states.join(" ")).unwrap();
    match &c.kind {
        ComponentKind::Atomic { prior, cpt } => {
            writeln!(out, "{pad}  prior {}", join_numbers(prior)).unwrap();
            write_cost(out, c, &pad);
            let spaces: Vec<_> = c
                .inputs
                .iter()
                .map(|v| model.variable(v).expect("resolved input"))
                .collect();
            let space = cpt.input_space();
            for (m, mode) in c.modes.states.iter().enumerate() {
                for (i, digits) in space.iter().enumerate() {
                    let mut line = format!("{pad}  cpt {mode}");
                    for (d, s) in digits.iter().zip(&spaces) {
                        line.push(' ');
                        line.push_str(&s.states[*d]);
                    }
                    writeln!(out, "{line} -> {}", join_numbers(cpt.row(m, i))).unwrap();
                }
            }
        }
        ComponentKind::Hierarchical { submodel } => {
            write_cost(out, c, &pad);
            writeln!(out, "{pad}  submodel").unwrap();
            let mut inherited: Vec<&str> = c.inputs.iter().map(String::as_str).collect();
            inherited.push(&c.output);
            write_body(out, submodel, &inherited, depth + 2);
            writeln!(out, "{pad}  end").unwrap();
        }
    }
    writeln!(out, "{pad}end").unwrap();
}

fn write_cost(out: &mut String, c: &ComponentSpec, pad: &str) {
    match c.costs.inspect {
        Some(d) => writeln!(out, "{pad}  cost replace {} inspect {d}", c.costs.replace).unwrap(),
        None => writeln!(out, "{pad}  cost replace {}", c.costs.replace).unwrap(),
    }
}

fn join_numbers(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::parse_model;

    #[test]
    fn fixtures_round_trip() {
        for (name, text) in fixtures::ALL {
            let m = parse_model(text).unwrap();
            let again = parse_model(&serialize_model(&m)).unwrap();
            assert_eq!(m, again, "{name}");
            assert_eq!(serialize_model(&m), serialize_model(&again), "{name}");
        }
    }

    #[test]
    fn wire_overrides_are_emitted() {
        let text = fixtures::INV2.replace("system inputs", "wire N2.0 <- A\nsystem inputs");
        let m = parse_model(&text).unwrap();
        let s = serialize_model(&m);
        assert!(s.contains("wire N2.0 <- A"), "{s}");
        assert_eq!(parse_model(&s).unwrap(), m);
    }
}
