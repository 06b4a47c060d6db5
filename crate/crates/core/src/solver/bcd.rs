//! Block coordinate descent over (association, ABS fraction, shares).

use serde::{Deserialize, Serialize};

use crate::radio::EnbKind;
use crate::solver::{
    binary_utility, improve_jointly, objective, optimal_abs, per_ue_utility, rb_block,
    relaxed_association, AbsFraction, Association, AssociationSearch, JointProblem, PfOptions,
    RelaxedOptions, ScheduleSolver, Solution, TraceEntry, BETA_EPS,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationSolver {
    /// Distributed best-response rounds.
    Heuristic,
    /// Relaxed optimum rounded row-wise to its largest entry.
    RelaxedRounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub max_iters: usize,
    /// Relative utility change per cycle below which the loop stops.
    pub utility_tol: f64,
    pub association_solver: AssociationSolver,
    pub schedule_solver: ScheduleSolver,
    pub pf: PfOptions,
    pub relaxed: RelaxedOptions,
    /// Also bound the relaxed association problem at the final `beta`.
    pub compute_upper_bound: bool,
}

impl Default for BcdOptions {
    fn default() -> Self {
        BcdOptions {
            max_iters: 50,
            utility_tol: 1e-8,
            association_solver: AssociationSolver::Heuristic,
            schedule_solver: ScheduleSolver::ClosedForm,
            pf: PfOptions::default(),
            relaxed: RelaxedOptions::default(),
            compute_upper_bound: false,
        }
    }
}

/// Utility of `serving` once the RB block has run: exact for weight-
/// proportional shares, otherwise evaluated on the scheduled allocation.
fn cycle_utility(
    problem: &JointProblem,
    serving: &[usize],
    beta: AbsFraction,
    options: &BcdOptions,
) -> Result<f64> {
    match options.schedule_solver {
        ScheduleSolver::ClosedForm => Ok(binary_utility(
            serving,
            &problem.link_rates(beta.value()),
            &problem.weights,
        )),
        solver => {
            let a = Association::from_serving(problem.num_enbs(), serving);
            let alloc = rb_block(&a, beta, problem, solver, &options.pf)?;
            Ok(per_ue_utility(&a, &alloc, &problem.rates, &problem.weights)
                .iter()
                .sum())
        }
    }
}

/// Runs association -> ABS -> RB cycles from `initial` (normally the
/// max-RSRP association).
///
/// Stops when a cycle has no handover and leaves `beta` unchanged, when the
/// utility changes by at most `utility_tol` relative, or after `max_iters`
/// cycles. In the last case the best iterate seen is returned with
/// `converged = false`.
pub fn bcd_solve(
    problem: &JointProblem,
    initial: &[usize],
    options: &BcdOptions,
) -> Result<Solution> {
    let nb = problem.num_enbs();
    if initial.len() != problem.num_ues() {
        return Err(Error::invalid("initial association has the wrong length"));
    }
    Association::from_serving(nb, initial).validate(&problem.eligibility)?;

    // The association block sees CRE links through beta; at beta = 0 they
    // would carry nothing and could never be joined.
    let has_cre = problem.kinds.contains(&EnbKind::PicoCre);
    let assoc_beta = |beta: f64| {
        if has_cre {
            beta.clamp(BETA_EPS, 1.0 - BETA_EPS)
        } else {
            beta
        }
    };

    let mut serving = initial.to_vec();
    let mut beta = optimal_abs(
        &Association::from_serving(nb, &serving),
        &problem.kinds,
        &problem.weights,
    );
    let mut utility = cycle_utility(problem, &serving, beta, options)?;
    let mut best = (serving.clone(), beta, utility);
    let mut trace = Vec::new();
    let mut search = AssociationSearch::new();
    let mut converged = false;

    for iteration in 1..=options.max_iters {
        let b_assoc = assoc_beta(beta.value());
        let (next, handovers) = match options.association_solver {
            AssociationSolver::Heuristic => {
                let link = problem.link_rates(b_assoc);
                match search.propose(&serving, &link, &problem.weights, &problem.eligibility) {
                    Some((next, h)) if h > 0 => (next, h),
                    // Fixed point of the distributed rule, or a cycle: finish
                    // with moves scored jointly with the ABS fraction.
                    _ => {
                        search.damp();
                        let mut next = serving.clone();
                        improve_jointly(&mut next, problem);
                        let h = next.iter().zip(&serving).filter(|(a, b)| a != b).count();
                        (next, h)
                    }
                }
            }
            AssociationSolver::RelaxedRounded => {
                let relaxed = relaxed_association(problem, b_assoc, &options.relaxed)?;
                let next = relaxed.association.serving();
                let h = next.iter().zip(&serving).filter(|(a, b)| a != b).count();
                (next, h)
            }
        };
        let next_beta = optimal_abs(
            &Association::from_serving(nb, &next),
            &problem.kinds,
            &problem.weights,
        );
        let next_utility = cycle_utility(problem, &next, next_beta, options)?;
        trace.push(TraceEntry {
            iteration,
            utility: next_utility,
            num_handovers: handovers,
            beta: next_beta.value(),
        });

        let d_beta = (next_beta.value() - beta.value()).abs();
        let d_utility = next_utility - utility;
        let stalled = next_utility.is_finite()
            && utility.is_finite()
            && d_utility.abs() <= options.utility_tol * next_utility.abs().max(1.0);
        serving = next;
        beta = next_beta;
        utility = next_utility;
        if utility > best.2 || !best.2.is_finite() && utility.is_finite() {
            best = (serving.clone(), beta, utility);
        }
        if (handovers == 0 && d_beta <= 1e-9) || stalled {
            converged = true;
            break;
        }
    }
    if !converged {
        (serving, beta, _) = best;
    }

    let association = Association::from_serving(nb, &serving);
    let allocation = rb_block(
        &association,
        beta,
        problem,
        options.schedule_solver,
        &options.pf,
    )?;
    let terms = per_ue_utility(&association, &allocation, &problem.rates, &problem.weights);
    let starved: Vec<usize> = (0..terms.len())
        .filter(|&u| !terms[u].is_finite())
        .collect();
    let utility = if starved.is_empty() {
        objective(&association, &allocation, &problem.rates, &problem.weights)?
    } else {
        f64::NEG_INFINITY
    };
    let upper_bound = if options.compute_upper_bound {
        // Certified (Frank-Wolfe) bound at the final beta: valid even when
        // the relaxed solve stops short of its tolerance.
        Some(relaxed_association(problem, beta.value(), &options.relaxed)?.certified_bound)
    } else {
        None
    };
    Ok(Solution {
        association,
        beta,
        allocation,
        utility,
        trace,
        converged,
        starved,
        upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Eligibility;
    use crate::solver::enumerate_optimum;

    #[test]
    fn macro_only_network_has_no_abs() {
        let nabs = [3.0, 1.0, 2.5, 1.2, 0.5, 2.0, 0.4, 1.5];
        let p = JointProblem::flat(
            vec![EnbKind::Macro; 2],
            &nabs,
            &[0.0; 8],
            Eligibility::all(4, 2),
            vec![1.0; 4],
            2,
        )
        .unwrap();
        let sol = bcd_solve(&p, &[0, 0, 1, 1], &BcdOptions::default()).unwrap();
        assert_eq!(sol.beta.value(), 0.0);
        assert!(sol.converged);
        assert!(sol.trace.len() <= 2);
        sol.allocation
            .check_feasible(&sol.association, sol.beta)
            .unwrap();
    }

    #[test]
    fn pico_cre_gets_abs_and_matches_enumeration() {
        // UE 0 and 1 near the macro, UE 2 in the CRE ring of the pico.
        let kinds = vec![EnbKind::Macro, EnbKind::PicoCen, EnbKind::PicoCre];
        let nabs = [4.0, 1.0, 0.0, 3.0, 2.0, 0.0, 0.8, 0.0, 0.0];
        let abs = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0];
        let el = Eligibility::new(
            3,
            3,
            vec![true, true, false, true, true, false, true, false, true],
        );
        let p = JointProblem::flat(kinds, &nabs, &abs, el, vec![1.0; 3], 4).unwrap();
        let sol = bcd_solve(&p, &[0, 0, 0], &BcdOptions::default()).unwrap();
        let opt = enumerate_optimum(&p).unwrap();
        assert!(sol.utility <= opt.utility + 1e-9);
        assert_eq!(sol.association.serving()[2], 2);
        assert!(sol.beta.value() > 0.0);
        sol.allocation
            .check_feasible(&sol.association, sol.beta)
            .unwrap();
        let again = objective(&sol.association, &sol.allocation, &p.rates, &p.weights).unwrap();
        assert!((again - sol.utility).abs() < 1e-9);
    }

    #[test]
    fn rejects_ineligible_start() {
        let p = JointProblem::flat(
            vec![EnbKind::Macro, EnbKind::PicoCre],
            &[1.0, 0.0],
            &[0.0, 1.0],
            Eligibility::new(1, 2, vec![true, false]),
            vec![1.0],
            1,
        )
        .unwrap();
        assert!(bcd_solve(&p, &[1], &BcdOptions::default()).is_err());
    }
}
