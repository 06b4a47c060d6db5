//! Association block.
//!
//! Substituting the weight-proportional shares turns the utility into a
//! function of the association alone:
//!
//! ```text
//! f(S) = sum_{u,b} S_ub w_u log(w_u R_ub / Omega_b),  Omega_b = sum_k S_kb w_k
//! ```
//!
//! where `R_ub` is the RB-summed link rate at the current `beta`. Over
//! row-stochastic `S` this is concave; [`relaxed_association`] maximises it
//! numerically and provides an upper bound for binary associations.
//! [`heuristic_association_step`] is the distributed rule: every UE moves to
//! the eNB with the largest marginal utility given the broadcast loads.

use std::collections::HashSet;

use crate::radio::{Eligibility, Phase};
use crate::solver::simplex::{spg_maximize, ConcaveObjective, SimplexBlocks};
use crate::solver::{Association, JointProblem, BETA_EPS, OMEGA_FLOOR};
use crate::{Error, Result};

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Relaxed association utility. `link_rates` is `(ue, enb)`; a positive
/// association weight on a zero-rate link gives `-inf`.
pub fn association_utility(association: &Association, link_rates: &[f64], weights: &[f64]) -> f64 {
    let nb = association.num_enbs();
    let mut total = 0.0;
    for u in 0..association.num_ues() {
        let w = weights[u];
        for (b, &s) in association.row(u).iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let r = link_rates[u * nb + b];
            if r <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += s * w * (w * r).ln();
        }
    }
    total
        - association
            .loads(weights)
            .into_iter()
            .map(xlogx)
            .sum::<f64>()
}

/// Utility of a binary association given as serving eNB per UE.
pub fn binary_utility(serving: &[usize], link_rates: &[f64], weights: &[f64]) -> f64 {
    let nb = link_rates.len() / serving.len().max(1);
    let mut omega = vec![0.0; nb];
    for (u, &b) in serving.iter().enumerate() {
        omega[b] += weights[u];
    }
    serving
        .iter()
        .enumerate()
        .map(|(u, &b)| {
            let r = link_rates[u * nb + b];
            if r <= 0.0 {
                f64::NEG_INFINITY
            } else {
                weights[u] * (weights[u] * r / omega[b]).ln()
            }
        })
        .sum()
}

#[inline]
fn marginal(w: f64, rate: f64, omega: f64) -> f64 {
    w * ((w * rate / omega.max(OMEGA_FLOOR)).ln() - 1.0)
}

/// `df/dS_ub = w_u (log(w_u R_ub / Omega_b) - 1)` for eligible pairs with a
/// positive rate, `-inf` elsewhere.
pub fn association_gradient(
    association: &Association,
    link_rates: &[f64],
    weights: &[f64],
    eligibility: &Eligibility,
) -> Vec<f64> {
    let nb = association.num_enbs();
    let omega = association.loads(weights);
    let mut grad = vec![f64::NEG_INFINITY; association.num_ues() * nb];
    for u in 0..association.num_ues() {
        for b in eligibility.eligible_enbs(u) {
            let r = link_rates[u * nb + b];
            if r > 0.0 {
                grad[u * nb + b] = marginal(weights[u], r, omega[b]);
            }
        }
    }
    grad
}

/// One synchronous round of the distributed rule.
///
/// Loads are computed once from `serving` and held fixed while every UE
/// picks the eligible eNB with the largest marginal utility. Ties keep the
/// current eNB, then go to the lowest id. Returns the new assignment and the
/// number of UEs that changed eNB.
pub fn heuristic_association_step(
    serving: &[usize],
    link_rates: &[f64],
    weights: &[f64],
    eligibility: &Eligibility,
) -> (Vec<usize>, usize) {
    let nb = eligibility.num_enbs();
    let mut omega = vec![0.0; nb];
    for (u, &b) in serving.iter().enumerate() {
        omega[b] += weights[u];
    }
    let mut next = serving.to_vec();
    let mut handovers = 0;
    for (u, &current) in serving.iter().enumerate() {
        let gain = |b: usize| {
            let r = link_rates[u * nb + b];
            if eligibility.is_eligible(u, b) && r > 0.0 {
                marginal(weights[u], r, omega[b])
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut best = current;
        let mut best_gain = gain(current);
        for b in eligibility.eligible_enbs(u) {
            let g = gain(b);
            if g > best_gain {
                best = b;
                best_gain = g;
            }
        }
        if best != current {
            next[u] = best;
            handovers += 1;
        }
    }
    (next, handovers)
}

/// Exact utility change when UE `u` (weight `w`) moves from `from` to `to`.
fn move_gain(w: f64, rate_from: f64, rate_to: f64, omega_from: f64, omega_to: f64) -> f64 {
    if rate_to <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if rate_from <= 0.0 {
        return f64::INFINITY;
    }
    let rate_term = w * (rate_to / rate_from).ln();
    let load_to = xlogx(omega_to + w) - xlogx(omega_to);
    let load_from = xlogx(omega_from) - xlogx((omega_from - w).max(0.0));
    rate_term - load_to + load_from
}

/// Best-improvement local search: repeatedly applies the single UE move with
/// the largest exact utility gain until no move gains more than `1e-12`.
/// Returns the number of moves made.
pub fn improve_locally(
    serving: &mut [usize],
    link_rates: &[f64],
    weights: &[f64],
    eligibility: &Eligibility,
) -> usize {
    let nb = eligibility.num_enbs();
    let mut omega = vec![0.0; nb];
    for (u, &b) in serving.iter().enumerate() {
        omega[b] += weights[u];
    }
    let mut moves = 0;
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (u, &from) in serving.iter().enumerate() {
            let rate_from = link_rates[u * nb + from];
            for to in eligibility.eligible_enbs(u) {
                if to == from {
                    continue;
                }
                let g = move_gain(
                    weights[u],
                    rate_from,
                    link_rates[u * nb + to],
                    omega[from],
                    omega[to],
                );
                if g > 1e-12 && best.is_none_or(|(_, _, bg)| g > bg) {
                    best = Some((u, to, g));
                }
            }
        }
        let Some((u, to, _)) = best else { break };
        let from = serving[u];
        omega[from] = (omega[from] - weights[u]).max(0.0);
        omega[to] += weights[u];
        serving[u] = to;
        moves += 1;
    }
    moves
}

fn phase_term(abs_weight: f64, nabs_weight: f64) -> f64 {
    if abs_weight <= 0.0 || nabs_weight <= 0.0 {
        return 0.0;
    }
    let beta = (abs_weight / (abs_weight + nabs_weight)).clamp(BETA_EPS, 1.0 - BETA_EPS);
    abs_weight * beta.ln() + nabs_weight * (1.0 - beta).ln()
}

/// Best-improvement single-UE moves on the utility with `beta` re-optimised
/// after every move (closed-form shares, RB-averaged rates).
///
/// At a fixed `beta` close to 0 a lone move onto a CRE sub-eNB always looks
/// bad, so fixed-`beta` search cannot leave the "no ABS" corner; scoring
/// moves jointly with the ABS fraction can. Every accepted move strictly
/// increases the reduced utility, so the search terminates. Returns the
/// number of moves.
pub fn improve_jointly(serving: &mut [usize], problem: &JointProblem) -> usize {
    let nb = problem.num_enbs();
    let w = &problem.weights;
    let phase_rate = |u: usize, b: usize| match problem.kinds[b].active_phase() {
        Phase::Abs => problem.rates.avg_abs(u, b),
        Phase::Nabs => problem.rates.avg_nabs(u, b),
    };
    let is_abs = |b: usize| problem.kinds[b].active_phase() == Phase::Abs;

    let mut omega = vec![0.0; nb];
    let (mut wa, mut wn) = (0.0, 0.0);
    for (u, &b) in serving.iter().enumerate() {
        omega[b] += w[u];
        if is_abs(b) {
            wa += w[u];
        } else {
            wn += w[u];
        }
    }
    let mut moves = 0;
    loop {
        let base = phase_term(wa, wn);
        let mut best: Option<(usize, usize, f64)> = None;
        for (u, &from) in serving.iter().enumerate() {
            let rate_from = phase_rate(u, from);
            let load_from = xlogx(omega[from]) - xlogx((omega[from] - w[u]).max(0.0));
            for to in problem.eligibility.eligible_enbs(u) {
                if to == from {
                    continue;
                }
                let rate_to = phase_rate(u, to);
                if rate_to <= 0.0 {
                    continue;
                }
                let mut g = if rate_from > 0.0 {
                    w[u] * (rate_to / rate_from).ln()
                } else {
                    f64::INFINITY
                };
                g += load_from - (xlogx(omega[to] + w[u]) - xlogx(omega[to]));
                if is_abs(from) != is_abs(to) {
                    let (a, n) = if is_abs(to) {
                        (wa + w[u], (wn - w[u]).max(0.0))
                    } else {
                        ((wa - w[u]).max(0.0), wn + w[u])
                    };
                    g += phase_term(a, n) - base;
                }
                if g > 1e-12 && best.is_none_or(|(_, _, bg)| g > bg) {
                    best = Some((u, to, g));
                }
            }
        }
        let Some((u, to, _)) = best else { break };
        let from = serving[u];
        omega[from] = (omega[from] - w[u]).max(0.0);
        omega[to] += w[u];
        if is_abs(from) {
            wa = (wa - w[u]).max(0.0);
        } else {
            wn = (wn - w[u]).max(0.0);
        }
        if is_abs(to) {
            wa += w[u];
        } else {
            wn += w[u];
        }
        serving[u] = to;
        moves += 1;
    }
    moves
}

/// Stateful driver for repeated association rounds.
///
/// Rounds follow [`heuristic_association_step`] until a round would return
/// to an association already visited. From then on the search switches for
/// good to exact best-improvement moves ([`improve_locally`]), which strictly
/// increase the utility and therefore terminate.
#[derive(Debug, Clone, Default)]
pub struct AssociationSearch {
    visited: HashSet<Vec<usize>>,
    damped: bool,
}

impl AssociationSearch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_damped(&self) -> bool {
        self.damped
    }

    /// One round of the distributed rule, or `None` once the search has
    /// detected a cycle (the caller then picks its own fallback).
    pub fn propose(
        &mut self,
        serving: &[usize],
        link_rates: &[f64],
        weights: &[f64],
        eligibility: &Eligibility,
    ) -> Option<(Vec<usize>, usize)> {
        self.visited.insert(serving.to_vec());
        if self.damped {
            return None;
        }
        let (next, handovers) =
            heuristic_association_step(serving, link_rates, weights, eligibility);
        if handovers == 0 || !self.visited.contains(&next) {
            return Some((next, handovers));
        }
        self.damped = true;
        None
    }

    /// Switches to the fallback for good.
    pub fn damp(&mut self) {
        self.damped = true;
    }

    pub fn step(
        &mut self,
        serving: &[usize],
        link_rates: &[f64],
        weights: &[f64],
        eligibility: &Eligibility,
    ) -> (Vec<usize>, usize) {
        if let Some(r) = self.propose(serving, link_rates, weights, eligibility) {
            return r;
        }
        let mut next = serving.to_vec();
        improve_locally(&mut next, link_rates, weights, eligibility);
        let handovers = next.iter().zip(serving).filter(|(a, b)| a != b).count();
        (next, handovers)
    }
}

/// Runs association rounds at a fixed `beta` until no UE moves.
/// Returns the final assignment, the number of rounds and whether a fixed
/// point was reached within `max_rounds`.
pub fn heuristic_fixed_point(
    problem: &JointProblem,
    beta: f64,
    initial: &[usize],
    max_rounds: usize,
) -> (Vec<usize>, usize, bool) {
    let link = problem.link_rates(beta);
    let mut search = AssociationSearch::new();
    let mut serving = initial.to_vec();
    for round in 1..=max_rounds {
        let (next, handovers) =
            search.step(&serving, &link, &problem.weights, &problem.eligibility);
        serving = next;
        if handovers == 0 {
            return (serving, round, true);
        }
    }
    (serving, max_rounds, false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedOptions {
    /// Projected-gradient stationarity tolerance.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for RelaxedOptions {
    fn default() -> Self {
        RelaxedOptions {
            tol: 1e-6,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub association: Association,
    /// Attained relaxed utility.
    pub utility: f64,
    /// `utility` plus the Frank-Wolfe duality gap: a certified upper bound on
    /// the relaxed (and hence every binary) optimum at this `beta`.
    pub certified_bound: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct RelaxedObjective<'a> {
    num_enbs: usize,
    active: &'a [(usize, usize)],
    /// `w_u log(w_u R_ub)` per active pair.
    base: Vec<f64>,
    link_rates: &'a [f64],
    weights: &'a [f64],
}

impl RelaxedObjective<'_> {
    fn loads(&self, s: &[f64]) -> Vec<f64> {
        let mut omega = vec![0.0; self.num_enbs];
        for &(u, b) in self.active {
            omega[b] += s[u * self.num_enbs + b] * self.weights[u];
        }
        omega
    }
}

impl ConcaveObjective for RelaxedObjective<'_> {
    fn value(&self, s: &[f64]) -> f64 {
        let linear: f64 = self
            .active
            .iter()
            .zip(&self.base)
            .map(|(&(u, b), c)| s[u * self.num_enbs + b] * c)
            .sum();
        linear - self.loads(s).into_iter().map(xlogx).sum::<f64>()
    }

    fn gradient(&self, s: &[f64], grad: &mut [f64]) {
        let omega = self.loads(s);
        for &(u, b) in self.active {
            grad[u * self.num_enbs + b] = marginal(
                self.weights[u],
                self.link_rates[u * self.num_enbs + b],
                omega[b],
            );
        }
    }
}

/// Maximises the relaxed association utility at a fixed `beta`.
pub fn relaxed_association(
    problem: &JointProblem,
    beta: f64,
    options: &RelaxedOptions,
) -> Result<RelaxedSolution> {
    let nu = problem.num_ues();
    let nb = problem.num_enbs();
    let link = problem.link_rates(beta);
    let weights = &problem.weights;

    let mut active = Vec::new();
    let mut blocks = Vec::with_capacity(nu);
    for u in 0..nu {
        let row: Vec<usize> = (0..nb).filter(|&b| link[u * nb + b] > 0.0).collect();
        if row.is_empty() {
            return Err(Error::infeasible(format!(
                "UE {u} has no eligible eNB with positive rate at beta = {beta}"
            )));
        }
        active.extend(row.iter().map(|&b| (u, b)));
        blocks.push(row.iter().map(|&b| u * nb + b).collect::<Vec<_>>());
    }
    let base = active
        .iter()
        .map(|&(u, b)| weights[u] * (weights[u] * link[u * nb + b]).ln())
        .collect();
    let objective = RelaxedObjective {
        num_enbs: nb,
        active: &active,
        base,
        link_rates: &link,
        weights,
    };
    let blocks = SimplexBlocks { blocks };
    let mut start = vec![0.0; nu * nb];
    for block in &blocks.blocks {
        for &i in block {
            start[i] = 1.0 / block.len() as f64;
        }
    }
    let out = spg_maximize(&objective, &blocks, start, options.tol, options.max_iters);

    let mut grad = vec![0.0; nu * nb];
    objective.gradient(&out.x, &mut grad);
    let gap: f64 = blocks
        .blocks
        .iter()
        .map(|block| {
            let best = block
                .iter()
                .map(|&i| grad[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let current: f64 = block.iter().map(|&i| out.x[i] * grad[i]).sum();
            (best - current).max(0.0)
        })
        .sum();

    Ok(RelaxedSolution {
        association: Association::relaxed(nu, nb, out.x)?,
        utility: out.value,
        certified_bound: out.value + gap,
        residual: out.residual,
        iterations: out.iterations,
        converged: out.residual <= options.tol,
    })
}
