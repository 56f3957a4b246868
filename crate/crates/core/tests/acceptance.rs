//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints one PASS/FAIL line; the process fails if any criterion fails.

use std::time::Instant;

use repairplan::compile::{compile_model, level_descriptions, root_anomaly_probability};
use repairplan::fixtures;
use repairplan::flatplan::{self, initial_posterior, sequence_cost, Level, DEFAULT_GUARD};
use repairplan::hierplan::{
    build_plan, AnnotatedSequence, HierarchicalRepairPlan, PlanOptions, Planner, RepairMethod, StrategyEntry,
};
use repairplan::model::{flatten, parse_model, ComponentKind, HierarchyIndex, SystemModel};
use repairplan::netinfer::ModeAssignment;
use repairplan::oracle::{
    bench_scaling, exhaustive_plan_cost, exhaustive_sequence_cost, generate_random_model, linear_fit, BenchmarkShape,
    Evaluator, SimulationConfig,
};
use repairplan::space::JointSpace;

type Outcome = Result<String, String>;

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn random_flat(n: usize, seed: u64) -> SystemModel {
    flatten(&generate_random_model(BenchmarkShape::new(n, 2, 2, 2, seed)))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut models: Vec<SystemModel> = [fixtures::INV1, fixtures::INV2, fixtures::FIG1]
        .iter()
        .map(|t| parse_model(t).unwrap())
        .collect();
    models.extend((0..50).map(|k| random_flat(1 + (k as usize % 4), 100 + k)));
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    for m in &models {
        let level = Level::atomic(m).map_err(|e| e.to_string())?;
        let names: Vec<String> = level.names.clone();
        for input in m.input_space().iter() {
            let ctx = level.context(&input);
            if !ctx.reachable() {
                continue;
            }
            for perm in permutations(&names) {
                let refs: Vec<&str> = perm.iter().map(String::as_str).collect();
                let seq = flatplan::resolve_sequence(&level, &refs).map_err(|e| e.to_string())?;
                let planner = sequence_cost(&ctx, &seq).map_err(|e| e.to_string())?.cost;
                let oracle = exhaustive_sequence_cost(m, &refs, &input).map_err(|e| e.to_string())?;
                let diff = (planner - oracle).abs();
                worst = worst.max(diff);
                check(diff <= 1e-9, || {
                    format!("{} {:?} {:?}: {planner} vs {oracle}", m.name, input, perm)
                })?;
                compared += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2}s"))?;
    Ok(format!("{compared} sequences, max diff {worst:.1e}, {secs:.2}s"))
}

fn criterion_2() -> Outcome {
    let m = parse_model(fixtures::INV2).unwrap();
    let level = Level::atomic(&m).map_err(|e| e.to_string())?;
    let ctx = level.context(&[0]);
    let q0 = initial_posterior(&ctx).map_err(|e| e.to_string())?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    let b_ok = q0.prob_of(&level, level.modes.index(&[1, 0]));
    let ok_b = q0.prob_of(&level, level.modes.index(&[0, 1]));
    check(close(b_ok, 4.0 / 13.0) && close(ok_b, 9.0 / 13.0), || {
        format!("Q0 = {:?}", q0.probs)
    })?;
    for (seq, want) in [(["N2", "N1"], 59.0 / 13.0), (["N1", "N2"], 92.0 / 13.0)] {
        let idx = flatplan::resolve_sequence(&level, &seq).unwrap();
        let got = sequence_cost(&ctx, &idx).map_err(|e| e.to_string())?.cost;
        let oracle = exhaustive_sequence_cost(&m, &seq, &[0]).map_err(|e| e.to_string())?;
        check(close(got, want) && close(oracle, want), || {
            format!("{seq:?}: {got} / {oracle} vs {want}")
        })?;
    }
    let best = flatplan::best_sequence(&ctx, DEFAULT_GUARD).map_err(|e| e.to_string())?;
    let names: Vec<&str> = best.order.iter().map(|&c| level.names[c].as_str()).collect();
    check(names == ["N2", "N1"] && close(best.cost, 59.0 / 13.0), || {
        format!("best {names:?} {}", best.cost)
    })?;
    Ok(format!(
        "EC(N2,N1)={:.6} EC(N1,N2)={:.6} Q0=({b_ok:.6},{ok_b:.6})",
        59.0 / 13.0,
        92.0 / 13.0
    ))
}

/// `P(X | i)` from the top-level descriptions of `model`.
fn output_distribution(model: &SystemModel, input: &[usize]) -> Vec<f64> {
    let descriptions = compile_model(model).unwrap();
    let top = level_descriptions(&descriptions, model, "").unwrap();
    let level = Level::new(model, top.into_iter().cloned().collect()).unwrap();
    let mut out = vec![0.0; level.net.output_states()];
    for (j, modes) in level.modes.iter().enumerate() {
        if level.prior[j] == 0.0 {
            continue;
        }
        let d = level.net.output_marginal(input, &ModeAssignment(modes));
        for (o, p) in d.0.iter().enumerate() {
            out[o] += level.prior[j] * p;
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let gbox = parse_model(fixtures::GBOX).unwrap();
    let d = compile_model(&gbox).map_err(|e| e.to_string())?;
    let compiled = root_anomaly_probability(&gbox, &d, &[0]).map_err(|e| e.to_string())?;
    let flat = flatten(&gbox);
    let direct = root_anomaly_probability(&flat, &compile_model(&flat).unwrap(), &[0]).map_err(|e| e.to_string())?;
    check(
        (compiled - 0.28 * 13.0 / 14.0).abs() <= 1e-9 && (compiled - direct).abs() <= 1e-9,
        || format!("gbox {compiled} vs {direct}"),
    )?;

    let shapes = [(1, 2), (1, 3), (2, 2), (2, 3), (2, 4), (3, 2)];
    let mut worst: f64 = 0.0;
    let mut models = 0;
    for k in 0..50u64 {
        let (b, depth) = shapes[k as usize % shapes.len()];
        let m = generate_random_model(BenchmarkShape::new(
            b,
            1 + (k as usize % 2),
            depth,
            2 + (k as usize % 3 == 0) as usize,
            300 + k,
        ));
        if m.leaf_count() > 8 {
            return Err(format!("shape {b},{depth} has {} leaves", m.leaf_count()));
        }
        let flat = flatten(&m);
        for input in m.input_space().iter() {
            let a = output_distribution(&m, &input);
            let b = output_distribution(&flat, &input);
            for (x, (p, q)) in a.iter().zip(&b).enumerate() {
                worst = worst.max((p - q).abs());
                check((p - q).abs() <= 1e-9, || {
                    format!("{} {:?} x={x}: {p} vs {q}", m.name, input)
                })?;
            }
        }
        models += 1;
    }
    Ok(format!(
        "gbox 0.28*13/14={compiled:.6} flat={direct:.6}; {models} random hierarchies, max diff {worst:.1e}"
    ))
}

fn criterion_4() -> Outcome {
    let m = parse_model(fixtures::GBOX).unwrap();
    let d1 = build_plan(&m, 1).map_err(|e| e.to_string())?;
    let d2 = build_plan(&m, 2).map_err(|e| e.to_string())?;
    let e1 = &d1.root().entries[0];
    check(*e1 == StrategyEntry::ReplaceSelf { cost: 6.0 }, || {
        format!("depth 1: {e1:?}")
    })?;
    let want = 0.5 + 59.0 / 13.0;
    match &d2.root().entries[0] {
        StrategyEntry::Decompose(AnnotatedSequence { steps, cost, .. })
            if steps.len() == 1 && steps[0].name == "G" && steps[0].method == RepairMethod::Inspect =>
        {
            check((cost - want).abs() <= 1e-9, || format!("depth 2 cost {cost}"))?;
            Ok(format!("depth 1 replace-self 6, depth 2 (G,inspect) {cost:.6}"))
        }
        other => Err(format!("depth 2: {other:?}")),
    }
}

fn root_costs(plan: &HierarchicalRepairPlan) -> Vec<Option<f64>> {
    plan.root().entries.iter().map(StrategyEntry::opt_ec).collect()
}

fn monotone_models() -> Vec<SystemModel> {
    let mut models: Vec<SystemModel> = fixtures::ALL.iter().map(|(_, t)| parse_model(t).unwrap()).collect();
    let shapes = [(2, 2, 3), (2, 1, 3), (3, 2, 3), (2, 2, 4), (3, 1, 2)];
    for k in 0..50u64 {
        let (b, m, d) = shapes[k as usize % shapes.len()];
        models.push(generate_random_model(BenchmarkShape::new(b, m, d, 2, 500 + k)));
    }
    models
}

fn criterion_5() -> Outcome {
    let mut checked = 0;
    for m in monotone_models() {
        let planner = Planner::new(&m, PlanOptions::default()).map_err(|e| e.to_string())?;
        let mut prev: Option<Vec<Option<f64>>> = None;
        for depth in 1..=m.height() {
            let costs = root_costs(&planner.build(depth).map_err(|e| e.to_string())?);
            if let Some(p) = &prev {
                for (k, (a, b)) in p.iter().zip(&costs).enumerate() {
                    if let (Some(a), Some(b)) = (a, b) {
                        check(*b <= a + 1e-9, || {
                            format!("{} input {k} depth {depth}: {b} > {a}", m.name)
                        })?;
                        checked += 1;
                    }
                }
            }
            prev = Some(costs);
        }
    }
    Ok(format!("{checked} depth steps non-increasing"))
}

/// Leaf orders in which every subtree's leaves are contiguous.
fn consistent_orders(index: &HierarchyIndex, path: &str) -> Vec<Vec<String>> {
    let node = index.node(path).unwrap();
    if node.children.is_empty() {
        return vec![vec![path.to_string()]];
    }
    let mut out = Vec::new();
    for perm in permutations(&node.children) {
        let mut partial: Vec<Vec<String>> = vec![Vec::new()];
        for child in &perm {
            let subs = consistent_orders(index, child);
            partial = partial
                .iter()
                .flat_map(|p| {
                    subs.iter().map(move |s| {
                        let mut v = p.clone();
                        v.extend(s.iter().cloned());
                        v
                    })
                })
                .collect();
        }
        out.extend(partial);
    }
    out
}

/// Free inspections and interior replacement dearer than replacing every leaf.
fn restrict(model: &mut SystemModel, prohibitive: f64) {
    for c in &mut model.components {
        if let ComponentKind::Hierarchical { submodel } = &mut c.kind {
            c.costs.replace = prohibitive;
            c.costs.inspect = Some(0.0);
            restrict(submodel, prohibitive);
        }
    }
}

fn criterion_6() -> Outcome {
    let mut models = vec![parse_model(fixtures::GBOX).unwrap()];
    let shapes = [(2, 3), (2, 2), (3, 2), (4, 2), (1, 3)];
    for k in 0..25u64 {
        let (b, d) = shapes[k as usize % shapes.len()];
        models.push(generate_random_model(BenchmarkShape::new(b, 2, d, 2, 700 + k)));
    }
    let mut compared = 0;
    let mut failures = Vec::new();
    for mut m in models {
        let total: f64 = flatten(&m).components.iter().map(|c| c.costs.replace).sum();
        restrict(&mut m, total + 1.0);
        let ev = Evaluator::new(&m).map_err(|e| e.to_string())?;
        let orders = consistent_orders(&ev.index, "");
        let plan = build_plan(&m, m.height()).map_err(|e| e.to_string())?;
        for (k, input) in m.input_space().iter().enumerate() {
            let Some(planned) = plan.root().entries[k].opt_ec() else {
                continue;
            };
            let mut best = f64::INFINITY;
            for order in &orders {
                let refs: Vec<&str> = order.iter().map(String::as_str).collect();
                best = best.min(exhaustive_sequence_cost(&m, &refs, &input).map_err(|e| e.to_string())?);
            }
            compared += 1;
            if (planned - best).abs() > 1e-9 {
                let executed = exhaustive_plan_cost(&m, &plan, &input).map_err(|e| e.to_string())?;
                failures.push(format!(
                    "{} input {input:?}: planner {planned:.6}, best consistent sequence {best:.6}, plan executed {executed:.6}",
                    m.name
                ));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{compared} inputs match the best hierarchy-consistent sequence"
        ))
    } else {
        {
            for f in &failures {
                eprintln!("  {f}");
            }
            Err(format!(
                "{} of {compared} inputs differ; first: {}",
                failures.len(),
                failures[0]
            ))
        }
    }
}

fn criterion_7() -> Outcome {
    let mut lines = Vec::new();
    for (name, text) in [
        ("inv2", fixtures::INV2),
        ("gbox", fixtures::GBOX),
        ("fig1", fixtures::FIG1),
    ] {
        let m = parse_model(text).unwrap();
        let plan = build_plan(&m, m.height()).map_err(|e| e.to_string())?;
        for (k, input) in m.input_space().iter().enumerate() {
            let Some(expected) = plan.root().entries[k].opt_ec() else {
                continue;
            };
            let cfg = SimulationConfig {
                episodes: 100_000,
                seed: 2024,
                ..Default::default()
            };
            let r = repairplan::oracle::simulate_episodes(&m, &plan, &input, cfg).map_err(|e| e.to_string())?;
            let z = if r.stderr > 0.0 {
                (r.mean - expected).abs() / r.stderr
            } else {
                0.0
            };
            let ok =
                (r.mean - expected).abs() <= 3.0 * r.stderr || (r.stderr == 0.0 && (r.mean - expected).abs() <= 1e-9);
            check(ok, || {
                format!(
                    "{name} {input:?}: mean {} expected {expected} stderr {}",
                    r.mean, r.stderr
                )
            })?;
            lines.push(format!("{name}{input:?} z={z:.2}"));
        }
    }
    Ok(lines.join(", "))
}

fn criterion_8() -> Outcome {
    let rows = bench_scaling(2, 2, 2, &[1, 2, 3, 4], 42, 15).map_err(|e| e.to_string())?;
    let x: Vec<f64> = rows.iter().map(|r| r.node_count as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.total_seconds).collect();
    let fit = linear_fit(&x, &y);
    let per: Vec<f64> = rows.iter().map(|r| r.seconds_per_node).collect();
    let ratio = per.iter().cloned().fold(0.0, f64::max) / per.iter().cloned().fold(f64::INFINITY, f64::min);
    let detail = format!(
        "R^2={:.4}, per-node ratio {ratio:.2}, per-node us {:?}",
        fit.r_squared,
        per.iter().map(|s| (s * 1e6).round()).collect::<Vec<_>>()
    );
    check(fit.r_squared >= 0.95 && ratio < 3.0, || detail.clone())?;
    Ok(detail)
}

fn criterion_9() -> Outcome {
    let shapes = [(2, 2, 3), (3, 2, 3), (2, 1, 4), (2, 2, 4)];
    let mut flips = 0;
    for k in 0..20u64 {
        let (b, m, d) = shapes[k as usize % shapes.len()];
        let model = generate_random_model(BenchmarkShape::new(b, m, d, 2, 900 + k));
        let planner = Planner::new(&model, PlanOptions::default()).map_err(|e| e.to_string())?;
        let depth = model.height();
        let plan = planner.build(depth).map_err(|e| e.to_string())?;
        for (path, block) in &plan.blocks {
            let node = planner.node(path).unwrap();
            let space = JointSpace::new(block.input_states.iter().map(Vec::len).collect());
            for (i, input) in space.iter().enumerate() {
                let StrategyEntry::Decompose(seq) = &block.entries[i] else {
                    continue;
                };
                let base = planner
                    .annotated_cost(&plan, path, &input, &seq.steps)
                    .map_err(|e| e.to_string())?;
                check((base - seq.cost).abs() <= 1e-9, || {
                    format!("{path} {input:?}: {base} vs {}", seq.cost)
                })?;
                for s in 0..seq.steps.len() {
                    let c = node.level.component_index(&seq.steps[s].name).unwrap();
                    if seq.steps[s].method == RepairMethod::Replace && !planner.inspectable(node, c, depth) {
                        continue;
                    }
                    let mut flipped = seq.steps.clone();
                    flipped[s].method = flipped[s].method.flipped();
                    let cost = planner
                        .annotated_cost(&plan, path, &input, &flipped)
                        .map_err(|e| e.to_string())?;
                    check(cost >= seq.cost - 1e-9, || {
                        format!(
                            "{} {path} {input:?} step {s}: flipped {cost} < {}",
                            model.name, seq.cost
                        )
                    })?;
                    flips += 1;
                }
            }
        }
    }
    Ok(format!("{flips} single-method flips, none cheaper"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("sequence cost matches exhaustive oracle", criterion_1),
        ("two-inverter chain ground numbers", criterion_2),
        ("compiled descriptions preserve output marginals", criterion_3),
        ("boxed chain plan values", criterion_4),
        ("root cost non-increasing in depth", criterion_5),
        ("hierarchy-restricted search equivalence", criterion_6),
        ("Monte Carlo agrees with planned cost", criterion_7),
        ("planning time linear in node count", criterion_8),
        ("per-step method choice locally optimal", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.2}s) {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.2}s) {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
