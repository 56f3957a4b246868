//! Text form of repair plans.
//!
//! ```text
//! repair-plan format 1 tool 0.1.0
//! model gbox digest 3f1c...
//! depth 2
//! root inputs A
//! input 0 : seq (G,inspect) cost 5.038461538461538
//! input 1 : seq (G,inspect) cost 5.038461538461538
//! end
//! node G inputs A
//! input 0 : seq (N2,replace) (N1,replace) cost 4.538461538461538
//! ...
//! end
//! ```
//!
//! Costs are written in shortest round-trip form so a parsed plan equals the
//! one that was rendered.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use super::{model_digest, AnnotatedSequence, HierarchicalRepairPlan, PlanBlock, RepairMethod, Step, StrategyEntry};
use crate::model::SystemModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("plan was made for model `{plan}` but the model is `{model}`")]
    ModelMismatch { plan: String, model: String },
    #[error("plan digest {plan} does not match the model digest {model}")]
    DigestMismatch { plan: String, model: String },
    #[error("unsupported plan format {0}")]
    Version(String),
}

pub fn render_plan(plan: &HierarchicalRepairPlan) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "repair-plan format {FORMAT_VERSION} tool {}",
        env!("CARGO_PKG_VERSION")
    )
    .unwrap();
    writeln!(out, "model {} digest {}", plan.model_name, plan.digest).unwrap();
    match plan.max_depth {
        Some(k) => writeln!(out, "depth {k}").unwrap(),
        None => writeln!(out, "depth flat").unwrap(),
    }
    for (path, block) in &plan.blocks {
        let head = if path.is_empty() {
            "root".to_string()
        } else {
            format!("node {path}")
        };
        writeln!(out, "{head} inputs {}", block.input_vars.join(" ")).unwrap();
        for (i, entry) in block.entries.iter().enumerate() {
            let labels = block.labels(i).join(" ");
            let body = match entry {
                StrategyEntry::Unreachable => "unreachable".to_string(),
                StrategyEntry::ReplaceSelf { cost } => format!("replace-self cost {cost}"),
                StrategyEntry::Decompose(seq) => {
                    let mut s = String::from("seq");
                    for step in &seq.steps {
                        write!(s, " ({},{})", step.name, step.method.as_str()).unwrap();
                    }
                    write!(s, " cost {}", seq.cost).unwrap();
                    if seq.never_executed > 0 {
                        write!(s, " never-executed {}", seq.never_executed).unwrap();
                    }
                    s
                }
            };
            writeln!(out, "input {labels} : {body}").unwrap();
        }
        writeln!(out, "end").unwrap();
    }
    out
}

/// Parse a plan for `model`, rejecting plans made for another model.
pub fn parse_plan(text: &str, model: &SystemModel) -> Result<HierarchicalRepairPlan, PlanFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let syntax = |line: usize, message: &str| PlanFileError::Syntax {
        line,
        message: message.to_string(),
    };

    let (n, header) = lines.next().ok_or_else(|| syntax(1, "empty plan"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 3 || h[0] != "repair-plan" || h[1] != "format" {
        return Err(syntax(n, "expected `repair-plan format <n>`"));
    }
    if h[2] != FORMAT_VERSION.to_string() {
        return Err(PlanFileError::Version(h[2].to_string()));
    }

    let (n, line) = lines.next().ok_or_else(|| syntax(n, "missing model line"))?;
    let m: Vec<&str> = line.split_whitespace().collect();
    if m.len() != 4 || m[0] != "model" || m[2] != "digest" {
        return Err(syntax(n, "expected `model <name> digest <hex>`"));
    }
    if m[1] != model.name {
        return Err(PlanFileError::ModelMismatch {
            plan: m[1].to_string(),
            model: model.name.clone(),
        });
    }
    let digest = model_digest(model);
    if m[3] != digest {
        return Err(PlanFileError::DigestMismatch {
            plan: m[3].to_string(),
            model: digest,
        });
    }

    let (n, line) = lines.next().ok_or_else(|| syntax(n, "missing depth line"))?;
    let max_depth = match line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["depth", "flat"] => None,
        ["depth", k] => Some(k.parse().map_err(|_| syntax(n, "bad depth"))?),
        _ => return Err(syntax(n, "expected `depth <k>` or `depth flat`")),
    };

    let mut blocks = BTreeMap::new();
    while let Some((n, line)) = lines.next() {
        let words: Vec<&str> = line.split_whitespace().collect();
        let (path, rest) = match words.as_slice() {
            ["root", "inputs", rest @ ..] => (String::new(), rest),
            ["node", path, "inputs", rest @ ..] => (path.to_string(), rest),
            _ => return Err(syntax(n, "expected `root` or `node` block")),
        };
        let sub = if path.is_empty() {
            Some(model)
        } else {
            model.find_path(&path).and_then(|c| c.submodel())
        };
        let sub = sub.ok_or_else(|| syntax(n, &format!("`{path}` is not a decomposable component")))?;
        let input_states: Vec<Vec<String>> = sub
            .system_inputs
            .iter()
            .map(|v| sub.variable(v).map(|s| s.states.clone()).unwrap_or_default())
            .collect();
        let mut block = PlanBlock {
            path: path.clone(),
            input_vars: rest.iter().map(|s| s.to_string()).collect(),
            input_states,
            entries: Vec::new(),
        };
        let size = block.input_space().size();
        let mut entries: Vec<Option<StrategyEntry>> = vec![None; size];
        loop {
            let (n, line) = lines.next().ok_or_else(|| syntax(n, "unterminated block"))?;
            if line == "end" {
                break;
            }
            let (input, entry) = parse_entry(&block, line).map_err(|msg| syntax(n, &msg))?;
            if entries[input].replace(entry).is_some() {
                return Err(syntax(n, "duplicate input"));
            }
        }
        block.entries = entries
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| syntax(n, "block does not cover every input"))?;
        if blocks.insert(path, block).is_some() {
            return Err(syntax(n, "duplicate block"));
        }
    }
    if !blocks.contains_key("") {
        return Err(syntax(0, "missing root block"));
    }
    Ok(HierarchicalRepairPlan {
        model_name: model.name.clone(),
        digest,
        max_depth,
        blocks,
    })
}

fn parse_entry(block: &PlanBlock, line: &str) -> Result<(usize, StrategyEntry), String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    if words.first() != Some(&"input") {
        return Err("expected `input`".into());
    }
    let colon = words.iter().position(|w| *w == ":").ok_or("missing `:`")?;
    let labels = &words[1..colon];
    if labels.len() != block.input_states.len() {
        return Err("wrong number of input labels".into());
    }
    let digits = labels
        .iter()
        .zip(&block.input_states)
        .map(|(l, states)| states.iter().position(|s| s == l))
        .collect::<Option<Vec<_>>>()
        .ok_or("unknown input label")?;
    let input = block.input_space().index(&digits);
    let body = &words[colon + 1..];
    let number = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}`"));
    let entry = match body {
        ["unreachable"] => StrategyEntry::Unreachable,
        ["replace-self", "cost", c] => StrategyEntry::ReplaceSelf { cost: number(c)? },
        ["seq", rest @ ..] => {
            let cost_at = rest.iter().position(|w| *w == "cost").ok_or("missing cost")?;
            let steps = rest[..cost_at]
                .iter()
                .map(|s| parse_step(s))
                .collect::<Result<Vec<_>, _>>()?;
            let (cost, never_executed) = match &rest[cost_at + 1..] {
                [c] => (number(c)?, 0),
                [c, "never-executed", k] => (number(c)?, k.parse().map_err(|_| "bad step count")?),
                _ => return Err("malformed sequence entry".into()),
            };
            StrategyEntry::Decompose(AnnotatedSequence {
                steps,
                cost,
                never_executed,
            })
        }
        _ => return Err("unknown entry".into()),
    };
    Ok((input, entry))
}

fn parse_step(word: &str) -> Result<Step, String> {
    let inner = word
        .strip_prefix('(')
        .and_then(|w| w.strip_suffix(')'))
        .ok_or_else(|| format!("bad step `{word}`"))?;
    let (name, method) = inner.rsplit_once(',').ok_or_else(|| format!("bad step `{word}`"))?;
    let method = match method {
        "replace" => RepairMethod::Replace,
        "inspect" => RepairMethod::Inspect,
        other => return Err(format!("unknown method `{other}`")),
    };
    Ok(Step {
        name: name.to_string(),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::hierplan::{build_flat_plan, build_plan};
    use crate::model::parse_model;

    #[test]
    fn plans_round_trip() {
        for (name, text) in fixtures::ALL {
            let m = parse_model(text).unwrap();
            for depth in 1..=m.height() {
                let plan = build_plan(&m, depth).unwrap();
                let s = render_plan(&plan);
                assert_eq!(parse_plan(&s, &m).unwrap(), plan, "{name} depth {depth}\n{s}");
            }
            let flat = build_flat_plan(&m, 8).unwrap();
            assert_eq!(parse_plan(&render_plan(&flat), &m).unwrap(), flat);
        }
    }

    #[test]
    fn gbox_text() {
        let m = parse_model(fixtures::GBOX).unwrap();
        let s = render_plan(&build_plan(&m, 1).unwrap());
        assert!(
            s.contains("depth 1\nroot inputs A\ninput 0 : replace-self cost 6\n"),
            "{s}"
        );
        let s = render_plan(&build_plan(&m, 2).unwrap());
        assert!(s.contains("input 0 : seq (G,inspect) cost 5.03846"), "{s}");
        assert!(
            s.contains("node G inputs A\ninput 0 : seq (N2,replace) (N1,replace) cost 4.53846"),
            "{s}"
        );
    }

    #[test]
    fn stale_plans_are_rejected() {
        let m = parse_model(fixtures::GBOX).unwrap();
        let s = render_plan(&build_plan(&m, 2).unwrap());
        let edited = parse_model(&fixtures::GBOX.replace("inspect 0.5", "inspect 0.6")).unwrap();
        assert!(matches!(
            parse_plan(&s, &edited),
            Err(PlanFileError::DigestMismatch { .. })
        ));
        let other = parse_model(fixtures::INV2).unwrap();
        assert!(matches!(
            parse_plan(&s, &other),
            Err(PlanFileError::ModelMismatch { .. })
        ));
    }
}
