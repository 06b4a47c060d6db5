//! Exhaustive search over binary associations, for small instances only.

use crate::solver::{binary_utility, optimal_abs, Association, JointProblem};
use crate::{Error, Result};

/// Largest number of candidate associations that will be enumerated.
pub const MAX_STATES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedOptimum {
    pub serving: Vec<usize>,
    pub beta: f64,
    pub utility: f64,
}

/// Candidate eNBs per UE: eligible and carrying a positive rate in at least
/// one phase (`link_rates` zero out the rest).
fn candidates(problem: &JointProblem, link_rates: &[f64]) -> Result<Vec<Vec<usize>>> {
    let nb = problem.num_enbs();
    let mut out = Vec::with_capacity(problem.num_ues());
    let mut states: usize = 1;
    for u in 0..problem.num_ues() {
        let row: Vec<usize> = (0..nb).filter(|&b| link_rates[u * nb + b] > 0.0).collect();
        if row.is_empty() {
            return Err(Error::infeasible(format!(
                "UE {u} has no eNB with positive rate"
            )));
        }
        states = states.saturating_mul(row.len());
        if states > MAX_STATES {
            return Err(Error::TooLarge(format!(
                "more than {MAX_STATES} candidate associations"
            )));
        }
        out.push(row);
    }
    Ok(out)
}

/// Calls `visit` with every assignment in the cartesian product of `rows`.
fn for_each_assignment(rows: &[Vec<usize>], mut visit: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; rows.len()];
    let mut serving: Vec<usize> = rows.iter().map(|r| r[0]).collect();
    loop {
        visit(&serving);
        let mut i = 0;
        loop {
            if i == rows.len() {
                return;
            }
            digits[i] += 1;
            if digits[i] < rows[i].len() {
                serving[i] = rows[i][digits[i]];
                break;
            }
            digits[i] = 0;
            serving[i] = rows[i][0];
            i += 1;
        }
    }
}

/// Best binary association at a fixed `beta` (weight-proportional shares).
pub fn enumerate_at_beta(problem: &JointProblem, beta: f64) -> Result<(Vec<usize>, f64)> {
    let link = problem.link_rates(beta);
    // Eligible pairs with no rate in either phase can never be optimal, but
    // a UE whose only candidates are silent at this beta is simply starved.
    let probe = problem.link_rates(0.5);
    let rows = candidates(problem, &probe)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_assignment(&rows, |serving| {
        let f = binary_utility(serving, &link, &problem.weights);
        if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
            best = Some((serving.to_vec(), f));
        }
    });
    Ok(best.expect("at least one assignment"))
}

/// Joint optimum over binary associations with `beta` set optimally for each.
pub fn enumerate_optimum(problem: &JointProblem) -> Result<EnumeratedOptimum> {
    let rows = candidates(problem, &problem.link_rates(0.5))?;
    let nb = problem.num_enbs();
    let mut best: Option<EnumeratedOptimum> = None;
    for_each_assignment(&rows, |serving| {
        let a = Association::from_serving(nb, serving);
        let beta = optimal_abs(&a, &problem.kinds, &problem.weights).value();
        let f = binary_utility(serving, &problem.link_rates(beta), &problem.weights);
        if best.as_ref().is_none_or(|b| f > b.utility) {
            best = Some(EnumeratedOptimum {
                serving: serving.to_vec(),
                beta,
                utility: f,
            });
        }
    });
    Ok(best.expect("at least one assignment"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{Eligibility, EnbKind};

    #[test]
    fn single_ue_picks_higher_rate() {
        let p = JointProblem::flat(
            vec![EnbKind::Macro, EnbKind::Macro],
            &[1.0, 2.0],
            &[0.0, 0.0],
            Eligibility::all(1, 2),
            vec![1.0],
            3,
        )
        .unwrap();
        let opt = enumerate_optimum(&p).unwrap();
        assert_eq!(opt.serving, vec![1]);
        assert_eq!(opt.beta, 0.0);
        assert!((opt.utility - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_balances() {
        let p = JointProblem::flat(
            vec![EnbKind::Macro, EnbKind::Macro],
            &[1.0; 4],
            &[0.0; 4],
            Eligibility::all(2, 2),
            vec![1.0, 1.0],
            1,
        )
        .unwrap();
        let opt = enumerate_optimum(&p).unwrap();
        assert_ne!(opt.serving[0], opt.serving[1]);
        let swapped = [opt.serving[1], opt.serving[0]];
        let f = binary_utility(&swapped, &p.link_rates(0.0), &p.weights);
        assert!((f - opt.utility).abs() < 1e-15);
        assert!(opt.utility.abs() < 1e-15);
    }

    #[test]
    fn visits_whole_product() {
        let rows = vec![vec![0, 2], vec![1], vec![0, 1, 2]];
        let mut seen = Vec::new();
        for_each_assignment(&rows, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 6);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn refuses_large_instances() {
        let nu = 21;
        let p = JointProblem::flat(
            vec![EnbKind::Macro; 2],
            &vec![1.0; nu * 2],
            &vec![0.0; nu * 2],
            Eligibility::all(nu, 2),
            vec![1.0; nu],
            1,
        )
        .unwrap();
        assert!(matches!(enumerate_optimum(&p), Err(Error::TooLarge(_))));
    }
}
