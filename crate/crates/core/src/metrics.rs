//! Throughput statistics for a solved operating point.

use serde::Serialize;

use crate::radio::{EnbKind, LogicalEnbIndex};
use crate::solver::objective::link_throughput;
use crate::solver::{per_ue_utility, Association, JointProblem, Solution};
use crate::topology::Tier;
use crate::{Error, Result};

/// Long-term throughput of every UE in bits/s.
pub fn ue_throughput(solution: &Solution, problem: &JointProblem, rb_bandwidth: f64) -> Vec<f64> {
    let a = &solution.association;
    (0..a.num_ues())
        .map(|u| {
            let t: f64 = (0..a.num_enbs())
                .filter(|&b| a.get(u, b) > 0.0)
                .map(|b| link_throughput(&problem.rates, &solution.allocation, u, b))
                .sum();
            t * rb_bandwidth
        })
        .collect()
}

/// `(sum T)^2 / (N sum T^2)`.
pub fn jain_index(throughputs: &[f64]) -> Result<f64> {
    if throughputs.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid(
            "throughputs must be finite and non-negative",
        ));
    }
    let sum: f64 = throughputs.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid(
            "Jain index of all-zero throughputs is undefined",
        ));
    }
    let sq: f64 = throughputs.iter().map(|t| t * t).sum();
    Ok(sum * sum / (throughputs.len() as f64 * sq))
}

/// Empirical CDF as `(value, fraction <= value)` at each distinct value.
pub fn throughput_cdf(throughputs: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = throughputs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &t) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = frac,
            _ => out.push((t, frac)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierLoad {
    /// UEs per macro sector eNB.
    pub macro_counts: Vec<usize>,
    /// UEs per physical pico (CEN and CRE halves together).
    pub pico_counts: Vec<usize>,
    pub macro_avg: f64,
    pub pico_avg: f64,
}

pub fn per_tier_load(association: &Association, index: &LogicalEnbIndex) -> TierLoad {
    let mut macro_counts = vec![0; index.num_macros()];
    let mut pico_counts = vec![0; index.num_picos()];
    for b in association.serving() {
        let e = index.get(b);
        match e.kind.tier() {
            Tier::Macro => macro_counts[e.physical] += 1,
            Tier::Pico => pico_counts[e.physical - index.num_macros()] += 1,
        }
    }
    let avg = |c: &[usize]| {
        if c.is_empty() {
            0.0
        } else {
            c.iter().sum::<usize>() as f64 / c.len() as f64
        }
    };
    TierLoad {
        macro_avg: avg(&macro_counts),
        pico_avg: avg(&pico_counts),
        macro_counts,
        pico_counts,
    }
}

/// Utility terms summed over the UEs served by each tier, `(macro, pico)`.
pub fn per_tier_utility(solution: &Solution, problem: &JointProblem) -> (f64, f64) {
    let terms = per_ue_utility(
        &solution.association,
        &solution.allocation,
        &problem.rates,
        &problem.weights,
    );
    let mut out = (0.0, 0.0);
    for (t, b) in terms.iter().zip(solution.association.serving()) {
        match problem.kinds[b] {
            EnbKind::Macro => out.0 += t,
            EnbKind::PicoCen | EnbKind::PicoCre => out.1 += t,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_ue_throughput: Vec<f64>,
    pub jain_index: f64,
    pub cdf_points: Vec<(f64, f64)>,
    pub load: TierLoad,
    /// Recomputed from the solution's association and shares.
    pub system_utility: f64,
    pub macro_utility: f64,
    pub pico_utility: f64,
    pub beta: f64,
    pub num_starved: usize,
}

impl MetricsReport {
    pub fn compute(
        solution: &Solution,
        problem: &JointProblem,
        index: &LogicalEnbIndex,
        rb_bandwidth: f64,
    ) -> Result<Self> {
        let per_ue_throughput = ue_throughput(solution, problem, rb_bandwidth);
        let (macro_utility, pico_utility) = per_tier_utility(solution, problem);
        let num_starved = per_ue_throughput.iter().filter(|&&t| t <= 0.0).count();
        Ok(MetricsReport {
            jain_index: jain_index(&per_ue_throughput)?,
            cdf_points: throughput_cdf(&per_ue_throughput),
            load: per_tier_load(&solution.association, index),
            system_utility: macro_utility + pico_utility,
            macro_utility,
            pico_utility,
            beta: solution.beta.value(),
            num_starved,
            per_ue_throughput,
        })
    }
}
