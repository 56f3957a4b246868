use proptest::prelude::*;

use repairplan::compile::{compile_model, transcribe_leaf};
use repairplan::fixtures;
use repairplan::flatplan::{advance_step, best_sequence, initial_posterior, sequence_cost, Level, ModePosterior};
use repairplan::hierplan::{build_flat_plan, build_plan, PlanOptions, Planner, StrategyEntry};
use repairplan::model::{flatten, parse_model, serialize_model, validate_model, ComponentKind, SystemModel};
use repairplan::netinfer::{LocalIo, ModeAssignment, Network};
use repairplan::oracle::{
    exhaustive_plan_cost, generate_random_model, simulate_episodes, BenchmarkShape, Evaluator, SimulationConfig,
};

fn shape() -> impl Strategy<Value = BenchmarkShape> {
    (1usize..=3, 1usize..=2, 1usize..=3, 2usize..=3, any::<u64>())
        .prop_map(|(b, m, d, s, seed)| BenchmarkShape::new(b, m, d, s, seed))
}

/// Flat random models with at most `max` components.
fn flat_model(max: usize) -> impl Strategy<Value = SystemModel> {
    (1usize..=max, 1usize..=2, 2usize..=3, any::<u64>())
        .prop_map(|(n, m, s, seed)| flatten(&generate_random_model(BenchmarkShape::new(n, m, 2, s, seed))))
}

fn scale_costs(model: &mut SystemModel, k: f64) {
    for c in &mut model.components {
        c.costs.replace *= k;
        if let Some(d) = &mut c.costs.inspect {
            *d *= k;
        }
        if let ComponentKind::Hierarchical { submodel } = &mut c.kind {
            scale_costs(submodel, k);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn generated_models_round_trip(shape in shape()) {
        let m = generate_random_model(shape);
        prop_assert!(validate_model(&m).is_valid());
        let text = serialize_model(&m);
        let again = parse_model(&text).unwrap();
        prop_assert_eq!(&again, &m);
        prop_assert_eq!(serialize_model(&again), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn generated_models_have_reachable_anomaly(shape in shape()) {
        let m = generate_random_model(shape);
        let ev = Evaluator::new(&m).unwrap();
        prop_assume!(ev.leaf_count() <= 9);
        prop_assert!(m.input_space().iter().any(|i| ev.anomaly_probability(&i) > 0.0));
    }

    #[test]
    fn elimination_matches_brute_force(m in flat_model(4)) {
        let net = Network::atomic(&m).unwrap();
        let ev = Evaluator::new(&m).unwrap();
        let modes = repairplan::space::JointSpace::new(m.components.iter().map(|c| c.modes.len()).collect());
        for input in m.input_space().iter() {
            let ok = net.output_marginal(&input, &ModeAssignment::all_ok(m.components.len()));
            let x = net.correct_output(&input);
            prop_assert_eq!(ok.prob(x), 1.0);
            for joint in modes.iter() {
                let a = net.output_marginal(&input, &ModeAssignment(joint.clone()));
                let b = ev.output_distribution(&input, &joint);
                prop_assert!((a.sum() - 1.0).abs() < 1e-9);
                for (p, q) in a.0.iter().zip(&b) {
                    prop_assert!((p - q).abs() <= 1e-12, "{:?} {:?}", a.0, b);
                }
                for target in 0..m.components.len() {
                    match net.local_io_marginal(&input, &ModeAssignment(joint.clone()), target, true, x) {
                        LocalIo::Empty => prop_assert_eq!(net.anomaly_probability(&input, &ModeAssignment(joint.clone()), x), 0.0),
                        LocalIo::Joint(t) => prop_assert!((t.total() - 1.0).abs() < 1e-9),
                    }
                }
            }
        }
    }

    #[test]
    fn leaf_transcription_is_idempotent(m in flat_model(3)) {
        let d = compile_model(&m).unwrap();
        for c in &m.components {
            let once = transcribe_leaf(&c.name, c).unwrap();
            prop_assert_eq!(&d[&c.name], &once);
        }
    }

    #[test]
    fn posteriors_stay_valid(m in flat_model(4)) {
        let level = Level::atomic(&m).unwrap();
        for input in m.input_space().iter() {
            let ctx = level.context(&input);
            if !ctx.reachable() {
                continue;
            }
            let q0 = initial_posterior(&ctx).unwrap();
            check_posterior(&level, &q0)?;
            // p1 again, straight from the per-mode anomaly probabilities.
            let first = level.by_name()[0];
            let step = advance_step(&ctx, &q0, first);
            let mut direct = 0.0;
            for (j, digits) in level.modes.iter().enumerate() {
                if digits[first] != 0 || level.prior[j] == 0.0 {
                    continue;
                }
                let mut with_fault = 0.0;
                for k in 0..level.children[first].modes.len() {
                    let mut d = digits.clone();
                    d[first] = k;
                    with_fault += q0.probs[level.modes.index(&d)];
                }
                let a = level.net.anomaly_probability(&input, &ModeAssignment(digits), ctx.correct);
                direct += a * with_fault;
            }
            prop_assert!((step.anomaly_probability - direct).abs() <= 1e-12);

            let mut q = q0;
            let order = level.by_name();
            for (k, &c) in order.iter().enumerate() {
                let s = advance_step(&ctx, &q, c);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&s.anomaly_probability));
                if k + 1 == order.len() {
                    prop_assert!(s.terminal());
                    prop_assert_eq!(s.anomaly_probability, 0.0);
                }
                match s.next {
                    Some(next) => {
                        check_posterior(&level, &next)?;
                        q = next;
                    }
                    None => break,
                }
            }
        }
    }

    #[test]
    fn cost_scaling(m in flat_model(4), k in 0.1f64..10.0) {
        let mut scaled = m.clone();
        scale_costs(&mut scaled, k);
        let a = Level::atomic(&m).unwrap();
        let b = Level::atomic(&scaled).unwrap();
        for input in m.input_space().iter() {
            let (ca, cb) = (a.context(&input), b.context(&input));
            if !ca.reachable() {
                continue;
            }
            let order = a.by_name();
            let x = sequence_cost(&ca, &order).unwrap().cost;
            let y = sequence_cost(&cb, &order).unwrap().cost;
            prop_assert!((x * k - y).abs() <= 1e-9 * y.max(1.0));
            let ba = best_sequence(&ca, 8).unwrap();
            let bb = best_sequence(&cb, 8).unwrap();
            prop_assert!((ba.cost * k - bb.cost).abs() <= 1e-9 * bb.cost.max(1.0));
            // Equal-cost orderings may swap under rounding; compare costs of the two argmins.
            let cross = sequence_cost(&ca, &bb.order).unwrap().cost;
            prop_assert!((cross - ba.cost).abs() <= 1e-9 * ba.cost.max(1.0));
        }
    }

    #[test]
    fn flat_models_plan_like_flat_plans(m in flat_model(4)) {
        let h = build_plan(&m, 1).unwrap();
        let f = build_flat_plan(&m, 8).unwrap();
        for (a, b) in h.root().entries.iter().zip(&f.root().entries) {
            match (a, b) {
                (StrategyEntry::Decompose(x), StrategyEntry::Decompose(y)) => prop_assert_eq!(x, y),
                (StrategyEntry::ReplaceSelf { cost }, StrategyEntry::Decompose(y)) => {
                    // Replacing everything only wins on a tie with the best sequence.
                    prop_assert_eq!(*cost, y.cost);
                }
                (StrategyEntry::Unreachable, StrategyEntry::Unreachable) => {}
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }

    #[test]
    fn strategy_entries_take_the_cheaper_branch(shape in shape()) {
        let m = generate_random_model(shape);
        prop_assume!(m.leaf_count() <= 9);
        let planner = Planner::new(&m, PlanOptions::default()).unwrap();
        let plan = planner.build(m.height()).unwrap();
        for (path, block) in &plan.blocks {
            let c = planner.node(path).unwrap().replace_cost;
            for e in &block.entries {
                match e {
                    StrategyEntry::Decompose(seq) => prop_assert!(seq.cost < c),
                    StrategyEntry::ReplaceSelf { cost } => prop_assert_eq!(*cost, c),
                    StrategyEntry::Unreachable => {}
                }
            }
        }
    }
}

fn check_posterior(level: &Level, q: &ModePosterior) -> Result<(), TestCaseError> {
    prop_assert!((q.total() - 1.0).abs() <= 1e-9);
    for (k, &p) in q.probs.iter().enumerate() {
        prop_assert!(p >= 0.0);
        if p > 0.0 {
            let full = q.full_index(level, k);
            prop_assert!(level.prior[full] > 0.0);
        }
    }
    Ok(())
}

#[test]
fn fixtures_validate() {
    for (name, text) in fixtures::ALL {
        let m = parse_model(text).unwrap();
        assert!(validate_model(&m).is_valid(), "{name}");
    }
}

fn reachable_inputs(m: &SystemModel) -> Vec<Vec<usize>> {
    let ev = Evaluator::new(m).unwrap();
    m.input_space()
        .iter()
        .filter(|i| ev.anomaly_probability(i) > 1e-9)
        .collect()
}

// Fixed seeds keep these deterministic: a 4-sigma band still fails now and then
// when every run draws fresh models.
#[test]
fn monte_carlo_agrees_with_exhaustive_replay() {
    let mut checked = 0;
    for seed in 0..12u64 {
        let m = generate_random_model(BenchmarkShape::new(2, 2, 2 + (seed % 2) as usize, 2, seed));
        for depth in [1, m.height()] {
            let plan = build_plan(&m, depth).unwrap();
            for input in reachable_inputs(&m) {
                let exact = exhaustive_plan_cost(&m, &plan, &input).unwrap();
                let cfg = SimulationConfig {
                    episodes: 4000,
                    seed,
                    ..SimulationConfig::default()
                };
                let r = simulate_episodes(&m, &plan, &input, cfg).unwrap();
                let band = 4.0 * r.stderr + 1e-9 * exact.max(1.0);
                assert!(
                    (r.mean - exact).abs() <= band,
                    "seed {seed} depth {depth} {input:?}: {} vs {exact} (se {})",
                    r.mean,
                    r.stderr
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 20);
}

#[test]
fn traces_add_up() {
    for seed in 0..6u64 {
        let m = generate_random_model(BenchmarkShape::new(2, 2, 3, 2, seed));
        let plan = build_plan(&m, m.height()).unwrap();
        let ev = Evaluator::new(&m).unwrap();
        for input in reachable_inputs(&m) {
            for strict in [false, true] {
                let cfg = SimulationConfig {
                    episodes: 300,
                    seed,
                    strict,
                    keep_traces: true,
                };
                let r = simulate_episodes(&m, &plan, &input, cfg).unwrap();
                assert_eq!(r.traces.len(), 300);
                let mean = r.traces.iter().map(|t| t.cost).sum::<f64>() / 300.0;
                assert!((mean - r.mean).abs() <= 1e-9 * mean.max(1.0));
                let correct = ev.correct_output(ev.node("").unwrap(), &input);
                for t in &r.traces {
                    let sum: f64 = t.actions.iter().map(|a| a.cost).sum();
                    assert!((sum - t.cost).abs() <= 1e-9 * sum.max(1.0));
                    assert!(ev.world_prior(&t.modes) > 0.0);
                    if !t.exhausted && !strict {
                        assert_eq!(t.final_output, correct);
                    }
                }
            }
        }
    }
}
