//! Planning-time scaling over generated hierarchies.

use std::time::Instant;

use super::generate::{generate_random_model, BenchmarkShape};
use crate::flatplan::PlanError;
use crate::hierplan::{PlanOptions, Planner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub depth: usize,
    pub node_count: usize,
    pub seconds_per_node: f64,
    pub total_seconds: f64,
}

/// Time compilation plus full-depth planning for each depth, keeping the
/// fastest of `repeats` runs.
pub fn bench_scaling(
    branching: usize,
    fan_in: usize,
    states: usize,
    depths: &[usize],
    seed: u64,
    repeats: usize,
) -> Result<Vec<BenchRow>, PlanError> {
    let mut rows = Vec::new();
    for &depth in depths {
        let model = generate_random_model(BenchmarkShape::new(branching, fan_in, depth, states, seed));
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let planner = Planner::new(&model, PlanOptions::default())?;
            let plan = planner.build(model.height())?;
            std::hint::black_box(&plan);
            best = best.min(start.elapsed().as_secs_f64());
        }
        let nodes = model.node_count();
        rows.push(BenchRow {
            depth,
            node_count: nodes,
            seconds_per_node: best / nodes as f64,
            total_seconds: best,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}
