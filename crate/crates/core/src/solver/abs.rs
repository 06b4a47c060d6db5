//! ABS block.
//!
//! With association and weight-proportional shares fixed, the utility depends
//! on `beta` only through `W_abs log(beta) + W_nabs log(1 - beta)`, where the
//! two weights are the total UE weight served in each phase. The maximiser is
//! the ABS-phase weight fraction.

use crate::radio::{EnbKind, Phase};
use crate::solver::{AbsFraction, Association, JointProblem, BETA_EPS};

/// Weight fraction of UEs attached to pico CRE sub-eNBs.
///
/// Clamped to `[BETA_EPS, 1 - BETA_EPS]` when both phases have UEs; left at
/// exactly 0 (or 1) when one phase is unused.
pub fn optimal_abs(association: &Association, kinds: &[EnbKind], weights: &[f64]) -> AbsFraction {
    let mut abs_weight = 0.0;
    let mut nabs_weight = 0.0;
    for (u, w) in weights.iter().enumerate() {
        for (b, &s) in association.row(u).iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            match kinds[b].active_phase() {
                Phase::Abs => abs_weight += s * w,
                Phase::Nabs => nabs_weight += s * w,
            }
        }
    }
    let total = abs_weight + nabs_weight;
    let mut beta = if total > 0.0 { abs_weight / total } else { 0.0 };
    if abs_weight > 0.0 && nabs_weight > 0.0 {
        beta = beta.clamp(BETA_EPS, 1.0 - BETA_EPS);
    }
    AbsFraction::new(beta.clamp(0.0, 1.0)).expect("fraction in [0, 1]")
}

/// Utility of a binary association with weight-proportional shares as a
/// function of `beta`, using RB-averaged rates.
pub fn reduced_abs_objective(serving: &[usize], problem: &JointProblem, beta: f64) -> f64 {
    let n = problem.num_rbs() as f64;
    let mut omega = vec![0.0; problem.num_enbs()];
    for (u, &b) in serving.iter().enumerate() {
        omega[b] += problem.weights[u];
    }
    serving
        .iter()
        .enumerate()
        .map(|(u, &b)| {
            let w = problem.weights[u];
            let (rate, budget) = match problem.kinds[b].active_phase() {
                Phase::Nabs => (problem.rates.avg_nabs(u, b), 1.0 - beta),
                Phase::Abs => (problem.rates.avg_abs(u, b), beta),
            };
            w * (n * w * rate * budget / omega[b]).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Eligibility;

    fn kinds() -> Vec<EnbKind> {
        vec![EnbKind::Macro, EnbKind::PicoCen, EnbKind::PicoCre]
    }

    #[test]
    fn weight_fraction_on_cre() {
        // 1000 UEs, 300 on the CRE half.
        let serving: Vec<usize> = (0..1000).map(|u| if u < 300 { 2 } else { u % 2 }).collect();
        let a = Association::from_serving(3, &serving);
        let beta = optimal_abs(&a, &kinds(), &vec![1.0; 1000]);
        assert!((beta.value() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn no_cre_means_no_abs() {
        let a = Association::from_serving(3, &[0, 1, 0]);
        assert_eq!(optimal_abs(&a, &kinds(), &[1.0; 3]).value(), 0.0);
        let a = Association::from_serving(3, &[2, 2]);
        assert_eq!(optimal_abs(&a, &kinds(), &[1.0; 2]).value(), 1.0);
    }

    #[test]
    fn tiny_cre_share_is_clamped() {
        let mut w = vec![1.0; 3];
        w[2] = 1e-9;
        let a = Association::from_serving(3, &[0, 1, 2]);
        assert_eq!(optimal_abs(&a, &kinds(), &w).value(), BETA_EPS);
    }

    #[test]
    fn weighted_fraction() {
        let a = Association::from_serving(3, &[0, 2, 2]);
        let beta = optimal_abs(&a, &kinds(), &[2.0, 1.0, 1.0]);
        assert!((beta.value() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reduced_objective_peaks_at_optimum() {
        let nb = 3;
        let nabs = [2.0, 3.0, 0.0, 1.0, 0.5, 0.0, 0.7, 1.2, 0.0];
        let abs = [0.0, 0.0, 4.0, 0.0, 0.0, 2.0, 0.0, 0.0, 3.0];
        let p = JointProblem::flat(
            kinds(),
            &nabs,
            &abs,
            Eligibility::all(3, nb),
            vec![1.0, 2.0, 0.5],
            4,
        )
        .unwrap();
        let serving = [0, 2, 1];
        let a = Association::from_serving(nb, &serving);
        let beta = optimal_abs(&a, &p.kinds, &p.weights).value();
        assert!((beta - 2.0 / 3.5).abs() < 1e-15);
        let at = reduced_abs_objective(&serving, &p, beta);
        for d in [1e-3, -1e-3, 0.1, -0.1] {
            assert!(reduced_abs_objective(&serving, &p, beta + d) <= at);
        }
    }
}
