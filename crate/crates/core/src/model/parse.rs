//! Parser for the line-oriented model language.
//!
//! Parsing runs in two phases: lines are grouped into raw blocks, then names
//! are resolved against lexical scopes. A submodel sees only the enclosing
//! component's input and output variables plus its own declarations.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::{ComponentKind, ComponentSpec, CostPair, Cpt, ModeSpace, Slot, StateSpace, SystemModel, OK};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unknown {kind} `{name}`")]
    UnknownReference {
        line: usize,
        column: usize,
        kind: &'static str,
        name: String,
    },
    #[error("{line}:{column}: duplicate {kind} `{name}`")]
    Duplicate {
        line: usize,
        column: usize,
        kind: &'static str,
        name: String,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::UnknownReference { line, column, .. }
            | ParseError::Duplicate { line, column, .. } => (*line, *column),
        }
    }
}

type Result<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Tok<'a> {
    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn unknown(&self, kind: &'static str) -> ParseError {
        ParseError::UnknownReference {
            line: self.line,
            column: self.col,
            kind,
            name: self.text.to_string(),
        }
    }

    fn duplicate(&self, kind: &'static str) -> ParseError {
        ParseError::Duplicate {
            line: self.line,
            column: self.col,
            kind,
            name: self.text.to_string(),
        }
    }
}

struct Line<'a> {
    toks: Vec<Tok<'a>>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut toks = Vec::new();
        let mut start: Option<usize> = None;
        for (i, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push(make_tok(content, s, i, n));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push(make_tok(content, s, content.len(), n));
        }
        if !toks.is_empty() {
            lines.push(Line { toks });
        }
    }
    lines
}

fn make_tok(content: &str, start: usize, end: usize, line: usize) -> Tok<'_> {
    Tok {
        text: &content[start..end],
        line: line + 1,
        col: content[..start].chars().count() + 1,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RawKind {
    Atomic,
    Hierarchical,
}

struct RawVar<'a> {
    name: Tok<'a>,
    states: Vec<Tok<'a>>,
}

struct RawCpt<'a> {
    mode: Tok<'a>,
    inputs: Vec<Tok<'a>>,
    probs: Vec<Tok<'a>>,
}

struct RawComp<'a> {
    header: Tok<'a>,
    name: Tok<'a>,
    kind: RawKind,
    inputs: Option<Vec<Tok<'a>>>,
    output: Option<Tok<'a>>,
    modes: Option<Vec<Tok<'a>>>,
    prior: Option<Vec<Tok<'a>>>,
    cost: Option<(Tok<'a>, Option<Tok<'a>>)>,
    cpt: Vec<RawCpt<'a>>,
    submodel: Option<RawModel<'a>>,
}

struct RawWire<'a> {
    component: Tok<'a>,
    slot: Tok<'a>,
    source: Tok<'a>,
}

struct RawSystem<'a> {
    inputs: Vec<Tok<'a>>,
    output: Tok<'a>,
}

struct RawModel<'a> {
    name: String,
    anchor: Tok<'a>,
    vars: Vec<RawVar<'a>>,
    comps: Vec<RawComp<'a>>,
    wires: Vec<RawWire<'a>>,
    system: Option<RawSystem<'a>>,
}

struct Reader<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Option<&Line<'a>> {
        let line = self.lines.get(self.pos);
        if line.is_some() {
            self.pos += 1;
        }
        line
    }

    fn last_tok(&self) -> Tok<'a> {
        self.lines.last().and_then(|l| l.toks.last().copied()).unwrap_or(Tok {
            text: "",
            line: 1,
            col: 1,
        })
    }
}

fn ident<'a>(tok: Tok<'a>, what: &str) -> Result<Tok<'a>> {
    let ok = !tok.text.is_empty()
        && tok
            .text
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '/'));
    if ok {
        Ok(tok)
    } else {
        Err(tok.syntax(format!("invalid {what} name `{}`", tok.text)))
    }
}

fn expect_keyword(toks: &[Tok<'_>], i: usize, kw: &str, after: Tok<'_>) -> Result<()> {
    match toks.get(i) {
        Some(t) if t.text == kw => Ok(()),
        Some(t) => Err(t.syntax(format!("expected `{kw}`, found `{}`", t.text))),
        None => Err(after.syntax(format!("expected `{kw}`"))),
    }
}

fn read_model_body<'a>(reader: &mut Reader<'a>, name: String, anchor: Tok<'a>, nested: bool) -> Result<RawModel<'a>> {
    let mut model = RawModel {
        name,
        anchor,
        vars: Vec::new(),
        comps: Vec::new(),
        wires: Vec::new(),
        system: None,
    };
    loop {
        let Some(line) = reader.next() else {
            if nested {
                return Err(reader.last_tok().syntax("unterminated submodel (missing `end`)"));
            }
            return Ok(model);
        };
        let toks = line.toks.clone();
        let head = toks[0];
        match head.text {
            "end" if nested => {
                if toks.len() > 1 {
                    return Err(toks[1].syntax("unexpected token after `end`"));
                }
                return Ok(model);
            }
            "var" => {
                let name = ident(
                    *toks.get(1).ok_or_else(|| head.syntax("expected variable name"))?,
                    "variable",
                )?;
                expect_keyword(&toks, 2, "states", name)?;
                let states = toks[3..].to_vec();
                if states.len() < 2 {
                    return Err(name.syntax(format!("variable `{}` needs at least two states", name.text)));
                }
                let mut seen = HashSet::new();
                for s in &states {
                    if !seen.insert(s.text) {
                        return Err(s.duplicate("state"));
                    }
                }
                model.vars.push(RawVar { name, states });
            }
            "component" => {
                let comp = read_component(reader, &toks)?;
                model.comps.push(comp);
            }
            "wire" => {
                // wire <component>.<slot> <- <var>
                let target = *toks
                    .get(1)
                    .ok_or_else(|| head.syntax("expected `<component>.<slot>`"))?;
                let dot = target
                    .text
                    .rfind('.')
                    .ok_or_else(|| target.syntax("expected `<component>.<slot>`"))?;
                let component = Tok {
                    text: &target.text[..dot],
                    line: target.line,
                    col: target.col,
                };
                let slot = Tok {
                    text: &target.text[dot + 1..],
                    line: target.line,
                    col: target.col + target.text[..=dot].chars().count(),
                };
                expect_keyword(&toks, 2, "<-", target)?;
                let source = *toks.get(3).ok_or_else(|| toks[2].syntax("expected source variable"))?;
                if let Some(extra) = toks.get(4) {
                    return Err(extra.syntax("unexpected token after wire source"));
                }
                model.wires.push(RawWire {
                    component: ident(component, "component")?,
                    slot,
                    source,
                });
            }
            "system" => {
                if model.system.is_some() {
                    return Err(head.duplicate("system line"));
                }
                expect_keyword(&toks, 1, "inputs", head)?;
                let out_pos = toks
                    .iter()
                    .position(|t| t.text == "output")
                    .ok_or_else(|| head.syntax("expected `output <var>`"))?;
                let inputs = toks[2..out_pos].to_vec();
                let output = *toks
                    .get(out_pos + 1)
                    .ok_or_else(|| toks[out_pos].syntax("expected system output variable"))?;
                if let Some(extra) = toks.get(out_pos + 2) {
                    return Err(extra.syntax("unexpected token after system output"));
                }
                model.system = Some(RawSystem { inputs, output });
            }
            "model" => return Err(head.syntax("`model` may only appear once, at the top")),
            other => return Err(head.syntax(format!("unexpected `{other}`"))),
        }
    }
}

fn read_component<'a>(reader: &mut Reader<'a>, header: &[Tok<'a>]) -> Result<RawComp<'a>> {
    let head = header[0];
    let name = ident(
        *header.get(1).ok_or_else(|| head.syntax("expected component name"))?,
        "component",
    )?;
    expect_keyword(header, 2, "kind", name)?;
    let kind_tok = *header
        .get(3)
        .ok_or_else(|| header[2].syntax("expected component kind"))?;
    let kind = match kind_tok.text {
        "atomic" => RawKind::Atomic,
        "hierarchical" => RawKind::Hierarchical,
        other => return Err(kind_tok.syntax(format!("unknown component kind `{other}`"))),
    };
    if let Some(extra) = header.get(4) {
        return Err(extra.syntax("unexpected token after component kind"));
    }
    let mut comp = RawComp {
        header: head,
        name,
        kind,
        inputs: None,
        output: None,
        modes: None,
        prior: None,
        cost: None,
        cpt: Vec::new(),
        submodel: None,
    };
    loop {
        let Some(line) = reader.next() else {
            return Err(reader
                .last_tok()
                .syntax(format!("unterminated component `{}` (missing `end`)", name.text)));
        };
        let toks = line.toks.clone();
        let key = toks[0];
        let once = |present: bool| -> Result<()> {
            if present {
                Err(key.duplicate("component field"))
            } else {
                Ok(())
            }
        };
        match key.text {
            "end" => {
                if toks.len() > 1 {
                    return Err(toks[1].syntax("unexpected token after `end`"));
                }
                return Ok(comp);
            }
            "inputs" => {
                once(comp.inputs.is_some())?;
                comp.inputs = Some(toks[1..].to_vec());
            }
            "output" => {
                once(comp.output.is_some())?;
                if toks.len() != 2 {
                    return Err(key.syntax("expected exactly one output variable"));
                }
                comp.output = Some(toks[1]);
            }
            "modes" => {
                once(comp.modes.is_some())?;
                let modes = toks[1..].to_vec();
                match modes.first() {
                    Some(t) if t.text == OK => {}
                    Some(t) => return Err(t.syntax("the first mode must be `ok`")),
                    None => return Err(key.syntax("expected mode list starting with `ok`")),
                }
                if modes.len() < 2 {
                    return Err(key.syntax("a component needs at least one fault mode"));
                }
                let mut seen = HashSet::new();
                for m in &modes {
                    if !seen.insert(m.text) {
                        return Err(m.duplicate("mode"));
                    }
                }
                comp.modes = Some(modes);
            }
            "prior" => {
                once(comp.prior.is_some())?;
                if kind == RawKind::Hierarchical {
                    return Err(key.syntax("a hierarchical component's prior is derived from its submodel"));
                }
                comp.prior = Some(toks[1..].to_vec());
            }
            "cost" => {
                once(comp.cost.is_some())?;
                expect_keyword(&toks, 1, "replace", key)?;
                let replace = *toks.get(2).ok_or_else(|| toks[1].syntax("expected replacement cost"))?;
                let inspect = match toks.get(3) {
                    None => None,
                    Some(t) if t.text == "inspect" => {
                        Some(*toks.get(4).ok_or_else(|| t.syntax("expected inspection cost"))?)
                    }
                    Some(t) => return Err(t.syntax(format!("expected `inspect`, found `{}`", t.text))),
                };
                if let Some(extra) = toks.get(5) {
                    return Err(extra.syntax("unexpected token after cost"));
                }
                comp.cost = Some((replace, inspect));
            }
            "cpt" => {
                if kind == RawKind::Hierarchical {
                    return Err(key.syntax("a hierarchical component's behavior is derived from its submodel"));
                }
                let arrow = toks
                    .iter()
                    .position(|t| t.text == "->")
                    .ok_or_else(|| key.syntax("expected `->` in cpt line"))?;
                if arrow < 2 {
                    return Err(key.syntax("expected a mode before `->`"));
                }
                comp.cpt.push(RawCpt {
                    mode: toks[1],
                    inputs: toks[2..arrow].to_vec(),
                    probs: toks[arrow + 1..].to_vec(),
                });
            }
            "submodel" => {
                once(comp.submodel.is_some())?;
                if kind == RawKind::Atomic {
                    return Err(key.syntax("an atomic component cannot have a submodel"));
                }
                if toks.len() > 1 {
                    return Err(toks[1].syntax("unexpected token after `submodel`"));
                }
                comp.submodel = Some(read_model_body(reader, name.text.to_string(), key, true)?);
            }
            other => return Err(key.syntax(format!("unexpected `{other}` in component"))),
        }
    }
}

fn number(tok: Tok<'_>) -> Result<f64> {
    let looks_decimal = !tok.text.is_empty()
        && tok
            .text
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    match tok.text.parse::<f64>() {
        Ok(v) if looks_decimal && v.is_finite() => Ok(v),
        _ => Err(tok.syntax(format!("expected a decimal number, found `{}`", tok.text))),
    }
}

/// Names visible while resolving one model.
struct Scope {
    vars: Vec<StateSpace>,
}

impl Scope {
    fn get(&self, tok: Tok<'_>) -> Result<&StateSpace> {
        self.vars
            .iter()
            .find(|v| v.name == tok.text)
            .ok_or_else(|| tok.unknown("variable"))
    }
}

fn resolve_model(raw: RawModel<'_>, inherited: Vec<StateSpace>) -> Result<SystemModel> {
    let mut scope = Scope { vars: inherited };
    for v in &raw.vars {
        if scope.vars.iter().any(|s| s.name == v.name.text) {
            return Err(v.name.duplicate("variable"));
        }
        scope.vars.push(StateSpace::new(
            v.name.text,
            v.states.iter().map(|s| s.text.to_string()).collect(),
        ));
    }

    let mut components = Vec::with_capacity(raw.comps.len());
    let mut names = HashSet::new();
    let mut wiring = BTreeMap::new();
    for rc in raw.comps {
        if !names.insert(rc.name.text) {
            return Err(rc.name.duplicate("component"));
        }
        let comp = resolve_component(rc, &scope)?;
        for (k, var) in comp.inputs.iter().enumerate() {
            wiring.insert(
                Slot {
                    component: comp.name.clone(),
                    index: k,
                },
                var.clone(),
            );
        }
        components.push(comp);
    }

    for w in &raw.wires {
        let comp = components
            .iter()
            .find(|c| c.name == w.component.text)
            .ok_or_else(|| w.component.unknown("component"))?;
        let slot: usize = w
            .slot
            .text
            .parse()
            .map_err(|_| w.slot.syntax(format!("invalid slot index `{}`", w.slot.text)))?;
        if slot >= comp.inputs.len() {
            return Err(w.slot.syntax(format!(
                "component `{}` has {} input slot(s)",
                comp.name,
                comp.inputs.len()
            )));
        }
        let src = scope.get(w.source)?;
        wiring.insert(
            Slot {
                component: comp.name.clone(),
                index: slot,
            },
            src.name.clone(),
        );
    }

    let system = raw
        .system
        .ok_or_else(|| raw.anchor.syntax(format!("model `{}` has no `system` line", raw.name)))?;
    let mut system_inputs = Vec::new();
    for t in &system.inputs {
        system_inputs.push(scope.get(*t)?.name.clone());
    }
    let system_output = scope.get(system.output)?.name.clone();

    Ok(SystemModel {
        name: raw.name,
        variables: scope.vars,
        components,
        wiring,
        system_inputs,
        system_output,
    })
}

fn resolve_component(rc: RawComp<'_>, scope: &Scope) -> Result<ComponentSpec> {
    let name = rc.name.text.to_string();
    let input_toks = rc.inputs.unwrap_or_default();
    let mut input_spaces = Vec::with_capacity(input_toks.len());
    for t in &input_toks {
        input_spaces.push(scope.get(*t)?.clone());
    }
    let output_tok = rc
        .output
        .ok_or_else(|| rc.header.syntax(format!("component `{name}` has no output")))?;
    let output_space = scope.get(output_tok)?.clone();
    let (replace_tok, inspect_tok) = rc
        .cost
        .ok_or_else(|| rc.header.syntax(format!("component `{name}` has no cost line")))?;
    let costs = CostPair {
        replace: number(replace_tok)?,
        inspect: inspect_tok.map(number).transpose()?,
    };
    let inputs: Vec<String> = input_spaces.iter().map(|s| s.name.clone()).collect();
    let output = output_space.name.clone();

    match rc.kind {
        RawKind::Hierarchical => {
            let modes = match rc.modes {
                Some(m) => ModeSpace {
                    states: m.iter().map(|t| t.text.to_string()).collect(),
                },
                None => ModeSpace::binary(),
            };
            let raw_sub = rc.submodel.ok_or_else(|| {
                rc.header
                    .syntax(format!("hierarchical component `{name}` has no submodel"))
            })?;
            let mut inherited: Vec<StateSpace> = Vec::new();
            for s in input_spaces.iter().chain(std::iter::once(&output_space)) {
                if !inherited.iter().any(|v| v.name == s.name) {
                    inherited.push(s.clone());
                }
            }
            let submodel = resolve_model(raw_sub, inherited)?;
            Ok(ComponentSpec {
                name,
                inputs,
                output,
                modes,
                costs,
                kind: ComponentKind::Hierarchical {
                    submodel: Box::new(submodel),
                },
            })
        }
        RawKind::Atomic => {
            let mode_toks = rc
                .modes
                .ok_or_else(|| rc.header.syntax(format!("component `{name}` has no modes line")))?;
            let modes = ModeSpace {
                states: mode_toks.iter().map(|t| t.text.to_string()).collect(),
            };
            let prior_toks = rc
                .prior
                .ok_or_else(|| rc.header.syntax(format!("component `{name}` has no prior line")))?;
            if prior_toks.len() != modes.len() {
                let at = prior_toks.first().copied().unwrap_or(rc.header);
                return Err(at.syntax(format!(
                    "prior has {} entries but component `{name}` has {} modes",
                    prior_toks.len(),
                    modes.len()
                )));
            }
            let prior = prior_toks.iter().map(|t| number(*t)).collect::<Result<Vec<_>>>()?;
            let radix: Vec<usize> = input_spaces.iter().map(StateSpace::len).collect();
            let mut cpt = Cpt::new(modes.len(), radix, output_space.len());
            let space = cpt.input_space();
            let mut filled = vec![false; modes.len() * space.size()];
            for row in &rc.cpt {
                let mode = modes.index_of(row.mode.text).ok_or_else(|| row.mode.unknown("mode"))?;
                if row.inputs.len() != input_spaces.len() {
                    return Err(row.mode.syntax(format!(
                        "cpt row needs {} input state(s), found {}",
                        input_spaces.len(),
                        row.inputs.len()
                    )));
                }
                let mut digits = Vec::with_capacity(row.inputs.len());
                for (t, s) in row.inputs.iter().zip(&input_spaces) {
                    digits.push(s.index_of(t.text).ok_or_else(|| t.unknown("state"))?);
                }
                if row.probs.len() != output_space.len() {
                    return Err(row.mode.syntax(format!(
                        "cpt row needs {} probabilities, found {}",
                        output_space.len(),
                        row.probs.len()
                    )));
                }
                let input = space.index(&digits);
                let slot = mode * space.size() + input;
                if filled[slot] {
                    return Err(row.mode.duplicate("cpt row"));
                }
                filled[slot] = true;
                let probs = row.probs.iter().map(|t| number(*t)).collect::<Result<Vec<_>>>()?;
                cpt.row_mut(mode, input).copy_from_slice(&probs);
            }
            if let Some(missing) = filled.iter().position(|f| !f) {
                let mode = missing / space.size();
                let labels: Vec<&str> = space
                    .decode(missing % space.size())
                    .iter()
                    .zip(&input_spaces)
                    .map(|(&d, s)| s.states[d].as_str())
                    .collect();
                return Err(rc.header.syntax(format!(
                    "cpt of `{name}` is missing the row for mode `{}` and inputs ({})",
                    modes.states[mode],
                    labels.join(" ")
                )));
            }
            Ok(ComponentSpec {
                name,
                inputs,
                output,
                modes,
                costs,
                kind: ComponentKind::Atomic { prior, cpt },
            })
        }
    }
}

/// Parse a model-language document into a resolved [`SystemModel`].
pub fn parse_model(text: &str) -> Result<SystemModel> {
    let mut reader = Reader {
        lines: tokenize(text),
        pos: 0,
    };
    let first = match reader.next() {
        Some(line) => line.toks.clone(),
        None => {
            return Err(ParseError::Syntax {
                line: 1,
                column: 1,
                message: "empty document (expected `model <name>`)".into(),
            })
        }
    };
    if first[0].text != "model" {
        return Err(first[0].syntax("expected `model <name>`"));
    }
    let name = ident(
        *first.get(1).ok_or_else(|| first[0].syntax("expected model name"))?,
        "model",
    )?;
    if let Some(extra) = first.get(2) {
        return Err(extra.syntax("unexpected token after model name"));
    }
    let raw = read_model_body(&mut reader, name.text.to_string(), first[0], false)?;
    resolve_model(raw, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn inverter_fixture() {
        let m = parse_model(fixtures::INV1).unwrap();
        assert_eq!(m.components.len(), 1);
        assert_eq!(m.variables.len(), 2);
        assert_eq!(m.system_inputs, vec!["A"]);
        assert_eq!(m.system_output, "X");
        let n = &m.components[0];
        assert_eq!(n.costs.replace, 5.0);
        assert_eq!(n.costs.inspect, None);
        match &n.kind {
            ComponentKind::Atomic { prior, cpt } => {
                assert_eq!(prior, &vec![0.9, 0.1]);
                assert_eq!(cpt.row(0, 0), &[0.0, 1.0]);
                assert_eq!(cpt.row(1, 1), &[0.0, 1.0]);
            }
            _ => panic!("expected atomic"),
        }
    }

    #[test]
    fn nested_fixture() {
        let m = parse_model(fixtures::GBOX).unwrap();
        assert_eq!(m.components.len(), 1);
        let g = &m.components[0];
        assert_eq!(g.costs.replace, 6.0);
        assert_eq!(g.costs.inspect, Some(0.5));
        let sub = g.submodel().unwrap();
        assert_eq!(sub.components.len(), 2);
        assert_eq!(sub.system_inputs, vec!["A"]);
        assert_eq!(sub.system_output, "X");
        assert!(g.modes.is_binary());
    }

    #[test]
    fn undeclared_wire_source() {
        let text = fixtures::INV2.replace("system inputs", "wire N2.0 <- Q\nsystem inputs");
        let err = parse_model(&text).unwrap_err();
        assert!(
            matches!(&err, ParseError::UnknownReference { kind: "variable", name, .. } if name == "Q"),
            "{err}"
        );
    }

    #[test]
    fn duplicate_component() {
        let text = fixtures::INV2.replace("component N2", "component N1");
        let err = parse_model(&text).unwrap_err();
        assert!(matches!(err, ParseError::Duplicate { kind: "component", .. }), "{err}");
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_model("model m\nvar A states 0 1\nbogus line here\n").unwrap_err();
        assert_eq!(err.position(), (3, 1));
        let err = parse_model("model m\nvar A states 0\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
    }

    #[test]
    fn incomplete_cpt_grid() {
        let text = fixtures::INV1.replace("  cpt b 1 -> 0 1\n", "");
        let err = parse_model(&text).unwrap_err();
        assert!(err.to_string().contains("missing the row"), "{err}");
    }

    #[test]
    fn wire_override_changes_source_only() {
        let text = fixtures::INV2.replace("system inputs", "wire N2.0 <- A\nsystem inputs");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.source("N2", 0), Some("A"));
        assert_eq!(m.component("N2").unwrap().inputs, vec!["Y"]);
    }

    #[test]
    fn rejects_non_decimal_probability() {
        let text = fixtures::INV1.replace("prior 0.9 0.1", "prior 0.9 nan");
        assert!(parse_model(&text).is_err());
    }

    #[test]
    fn submodel_cannot_see_outer_variables() {
        let text = "model m
var A states 0 1
var B states 0 1
var X states 0 1
component G kind hierarchical
  inputs A
  output X
  cost replace 1 inspect 1
  submodel
    component N kind atomic
      inputs B
      output X
      modes ok b
      prior 0.9 0.1
      cost replace 1
      cpt ok 0 -> 1 0
      cpt ok 1 -> 0 1
      cpt b 0 -> 1 0
      cpt b 1 -> 1 0
    end
    system inputs A output X
  end
end
system inputs A B output X
";
        let err = parse_model(text).unwrap_err();
        assert!(
            matches!(&err, ParseError::UnknownReference { name, line: 11, .. } if name == "B"),
            "{err}"
        );
    }
}
