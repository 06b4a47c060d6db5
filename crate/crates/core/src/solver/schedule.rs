//! RB block: per-eNB proportional-fair time shares.
//!
//! With association and ABS fraction fixed, the share problem separates into
//! one concave program per logical eNB in its active phase:
//! maximise `sum_u w_u log(sum_r R_ur s_ur)` subject to `sum_u s_ur = budget`
//! on every RB.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::radio::Phase;
use crate::solver::simplex::{spg_maximize, ConcaveObjective, SimplexBlocks};
use crate::solver::{AbsFraction, Allocation, Association, JointProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSolver {
    /// Weight-proportional shares, optimal when rates are flat across RBs.
    ClosedForm,
    /// Numerical PF solve per eNB (closed form when the eNB's rates are flat).
    PfNumeric,
    /// Equal shares, ignoring weights and rates.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfOptions {
    /// Stationarity tolerance of the projected-gradient solve.
    pub tol: f64,
    pub max_iters: usize,
    /// Skip the flat-rate closed-form shortcut.
    pub force_numeric: bool,
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions {
            tol: 1e-10,
            max_iters: 20_000,
            force_numeric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfResult {
    /// `(ue, rb)` shares; every RB column sums to the budget.
    pub shares: Vec<f64>,
    /// `|| p - P(p + grad) ||_inf` on the unit-budget problem.
    pub residual: f64,
    pub iterations: usize,
    pub used_closed_form: bool,
}

struct PfObjective<'a> {
    rates: &'a [f64],
    weights: &'a [f64],
    num_rbs: usize,
}

impl PfObjective<'_> {
    fn total(&self, p: &[f64], u: usize) -> f64 {
        let n = self.num_rbs;
        let span = u * n..(u + 1) * n;
        self.rates[span.clone()]
            .iter()
            .zip(&p[span])
            .map(|(r, s)| r * s)
            .sum()
    }
}

impl ConcaveObjective for PfObjective<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let mut v = 0.0;
        for (u, w) in self.weights.iter().enumerate() {
            let t = self.total(p, u);
            if t <= 0.0 {
                return f64::NEG_INFINITY;
            }
            v += w * t.ln();
        }
        v
    }

    fn gradient(&self, p: &[f64], grad: &mut [f64]) {
        let n = self.num_rbs;
        for u in 0..self.weights.len() {
            let scale = self.weights[u] / self.total(p, u);
            for r in 0..n {
                grad[u * n + r] = scale * self.rates[u * n + r];
            }
        }
    }
}

fn is_flat(row: &[f64]) -> bool {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    max - min <= 1e-9 * max.abs()
}

/// PF shares for one eNB. `rates` is `(ue, rb)` for the UEs attached to it in
/// its active phase; `budget` is the phase's time fraction.
pub fn pf_schedule(
    rates: &[f64],
    num_rbs: usize,
    weights: &[f64],
    budget: f64,
    options: &PfOptions,
) -> Result<PfResult> {
    let m = weights.len();
    if m == 0 || num_rbs == 0 || rates.len() != m * num_rbs {
        return Err(Error::invalid(
            "pf_schedule needs at least one UE and one RB",
        ));
    }
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(Error::invalid(format!(
            "phase budget {budget} outside (0, 1]"
        )));
    }
    for u in 0..m {
        if rates[u * num_rbs..(u + 1) * num_rbs]
            .iter()
            .all(|&r| r <= 0.0)
        {
            return Err(Error::infeasible(format!(
                "UE {u} has zero rate on every RB"
            )));
        }
    }

    let all_flat = (0..m).all(|u| is_flat(&rates[u * num_rbs..(u + 1) * num_rbs]));
    if all_flat && !options.force_numeric {
        let total: f64 = weights.iter().sum();
        let mut shares = Vec::with_capacity(m * num_rbs);
        for w in weights {
            shares.extend(std::iter::repeat_n(w * budget / total, num_rbs));
        }
        return Ok(PfResult {
            shares,
            residual: 0.0,
            iterations: 0,
            used_closed_form: true,
        });
    }

    let objective = PfObjective {
        rates,
        weights,
        num_rbs,
    };
    let blocks = SimplexBlocks {
        blocks: (0..num_rbs)
            .map(|r| (0..m).map(|u| u * num_rbs + r).collect())
            .collect(),
    };
    let start = vec![1.0 / m as f64; m * num_rbs];
    let out = spg_maximize(&objective, &blocks, start, options.tol, options.max_iters);
    Ok(PfResult {
        shares: out.x.iter().map(|p| p * budget).collect(),
        residual: out.residual,
        iterations: out.iterations,
        used_closed_form: false,
    })
}

/// Equal split of `budget` among `num_ues` UEs on each RB.
pub fn round_robin_schedule(num_ues: usize, num_rbs: usize, budget: f64) -> Vec<f64> {
    vec![budget / num_ues as f64; num_ues * num_rbs]
}

/// Weight-proportional shares for a binary association:
/// `x = w_u (1 - beta) / Omega_b`, `y = w_u beta / Omega_b` on every RB.
pub fn closed_form_allocation(
    association: &Association,
    beta: AbsFraction,
    weights: &[f64],
    num_rbs: usize,
) -> Allocation {
    let serving = association.serving();
    let omega = association.loads(weights);
    let mut alloc = Allocation::zeros(association.num_ues(), association.num_enbs(), num_rbs);
    let beta = beta.value();
    for (u, &b) in serving.iter().enumerate() {
        let frac = weights[u] / omega[b];
        alloc.x_link_mut(u, b).fill(frac * (1.0 - beta));
        alloc.y_link_mut(u, b).fill(frac * beta);
    }
    alloc
}

/// Shares for every eNB under a binary association.
///
/// The active phase of each eNB is scheduled by `solver`; the inactive phase,
/// which carries no rate, is filled in the same proportions the solver uses
/// for an eNB with flat rates so that both phase budgets are met. UEs with
/// zero rate in the active phase are excluded from the PF solve and end up
/// with no active-phase share.
pub fn rb_block(
    association: &Association,
    beta: AbsFraction,
    problem: &JointProblem,
    solver: ScheduleSolver,
    options: &PfOptions,
) -> Result<Allocation> {
    let nb = problem.num_enbs();
    let n = problem.num_rbs();
    let serving = association.serving();
    let weights = &problem.weights;
    let mut attached: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (u, &b) in serving.iter().enumerate() {
        attached[b].push(u);
    }

    // (ue, active shares, inactive shares) per eNB.
    type Block = Vec<(usize, Vec<f64>, Vec<f64>)>;
    let per_enb: Vec<Result<Block>> = attached
        .par_iter()
        .enumerate()
        .map(|(b, ues)| {
            if ues.is_empty() {
                return Ok(Vec::new());
            }
            let kind = problem.kinds[b];
            let phase = kind.active_phase();
            let active_budget = beta.budget(kind);
            let inactive_budget = 1.0 - active_budget;
            let omega: f64 = ues.iter().map(|&u| weights[u]).sum();
            let m = ues.len() as f64;
            let split = |u: usize, budget: f64| match solver {
                ScheduleSolver::RoundRobin => budget / m,
                _ => weights[u] * budget / omega,
            };

            let mut active: Vec<Vec<f64>> = ues
                .iter()
                .map(|&u| vec![split(u, active_budget); n])
                .collect();
            if solver == ScheduleSolver::PfNumeric && active_budget > 0.0 {
                let servable: Vec<usize> = (0..ues.len())
                    .filter(|&i| {
                        problem
                            .rates
                            .link(ues[i], b, phase)
                            .iter()
                            .any(|&r| r > 0.0)
                    })
                    .collect();
                if !servable.is_empty() {
                    let mut rates = Vec::with_capacity(servable.len() * n);
                    let mut w = Vec::with_capacity(servable.len());
                    for &i in &servable {
                        rates.extend_from_slice(problem.rates.link(ues[i], b, phase));
                        w.push(weights[ues[i]]);
                    }
                    let pf = pf_schedule(&rates, n, &w, active_budget, options)?;
                    for row in active.iter_mut() {
                        row.fill(0.0);
                    }
                    for (k, &i) in servable.iter().enumerate() {
                        active[i].copy_from_slice(&pf.shares[k * n..(k + 1) * n]);
                    }
                }
            }
            Ok(ues
                .iter()
                .zip(active)
                .map(|(&u, act)| (u, act, vec![split(u, inactive_budget); n]))
                .collect())
        })
        .collect();

    let mut alloc = Allocation::zeros(problem.num_ues(), nb, n);
    for (b, block) in per_enb.into_iter().enumerate() {
        let phase = problem.kinds[b].active_phase();
        for (u, act, inact) in block? {
            let (x, y) = alloc.links_mut(u, b);
            let (a, i) = match phase {
                Phase::Nabs => (x, y),
                Phase::Abs => (y, x),
            };
            a.copy_from_slice(&act);
            i.copy_from_slice(&inact);
        }
    }
    Ok(alloc)
}
