use eicic::baselines::max_rsrp_association;
use eicic::radio::{Eligibility, EnbKind};
use eicic::solver::{
    association_gradient, association_utility, bcd_solve, binary_utility, closed_form_allocation,
    enumerate_at_beta, enumerate_optimum, heuristic_association_step, heuristic_fixed_point,
    improve_jointly, objective, optimal_abs, pf_schedule, reduced_abs_objective,
    relaxed_association, AbsFraction, Association, BcdOptions, JointProblem, PfOptions,
    RelaxedOptions, ScheduleSolver,
};
use eicic::{FadingModel, NetworkConfig, Scenario};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [EnbKind; 3] = [EnbKind::Macro, EnbKind::PicoCen, EnbKind::PicoCre];

fn random_problem(seed: u64, nu: usize, nb: usize) -> JointProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds: Vec<EnbKind> = (0..nb).map(|_| KINDS[rng.random_range(0..3)]).collect();
    let nabs: Vec<f64> = (0..nu * nb).map(|_| rng.random_range(0.1..5.0)).collect();
    let abs: Vec<f64> = (0..nu * nb).map(|_| rng.random_range(0.1..5.0)).collect();
    let mut mask: Vec<bool> = (0..nu * nb).map(|_| rng.random_bool(0.7)).collect();
    for u in 0..nu {
        if !mask[u * nb..(u + 1) * nb].iter().any(|&m| m) {
            mask[u * nb + rng.random_range(0..nb)] = true;
        }
    }
    let weights = (0..nu).map(|_| rng.random_range(0.5..2.0)).collect();
    JointProblem::flat(
        kinds,
        &nabs,
        &abs,
        Eligibility::new(nu, nb, mask),
        weights,
        3,
    )
    .unwrap()
}

fn random_serving(seed: u64, p: &JointProblem) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..p.num_ues())
        .map(|u| {
            let el: Vec<usize> = p.eligibility.eligible_enbs(u).collect();
            el[rng.random_range(0..el.len())]
        })
        .collect()
}

fn random_relaxed(seed: u64, nu: usize, nb: usize) -> Association {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Vec::new();
    for _ in 0..nu {
        let row: Vec<f64> = (0..nb).map(|_| 0.05 + rng.random::<f64>()).collect();
        let sum: f64 = row.iter().sum();
        s.extend(row.iter().map(|v| v / sum));
    }
    Association::relaxed(nu, nb, s).unwrap()
}

/// Utility of `serving` with beta re-optimised, from first principles.
fn joint_value(p: &JointProblem, serving: &[usize]) -> f64 {
    let beta = optimal_abs(
        &Association::from_serving(p.num_enbs(), serving),
        &p.kinds,
        &p.weights,
    );
    binary_utility(serving, &p.link_rates(beta.value()), &p.weights)
}

#[test]
fn two_ue_objective_matches_hand_expansion() {
    // Macro + CRE, one UE each, flat rates.
    let p = JointProblem::flat(
        vec![EnbKind::Macro, EnbKind::PicoCre],
        &[2.0, 0.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 3.0],
        Eligibility::all(2, 2),
        vec![1.0, 2.0],
        2,
    )
    .unwrap();
    let a = Association::from_serving(2, &[0, 1]);
    let beta = AbsFraction::new(0.25).unwrap();
    let alloc = closed_form_allocation(&a, beta, &p.weights, 2);
    let got = objective(&a, &alloc, &p.rates, &p.weights).unwrap();
    let want = 1.0 * (2.0 * 0.75 * 2.0f64).ln() + 2.0 * (3.0 * 0.25 * 2.0f64).ln();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn joint_search_ends_in_a_single_move_local_optimum() {
    for seed in 0..40 {
        let p = random_problem(seed, 6, 4);
        let mut serving = random_serving(seed, &p);
        let before = joint_value(&p, &serving);
        improve_jointly(&mut serving, &p);
        let after = joint_value(&p, &serving);
        assert!(after >= before - 1e-9, "seed {seed}: {after} < {before}");
        for u in 0..p.num_ues() {
            for b in p.eligibility.eligible_enbs(u) {
                let mut moved = serving.clone();
                moved[u] = b;
                assert!(
                    joint_value(&p, &moved) <= after + 1e-9,
                    "seed {seed}: improving move left"
                );
            }
        }
    }
}

#[test]
fn bcd_never_beats_enumeration_and_stays_feasible() {
    for seed in 0..30 {
        let p = random_problem(100 + seed, 5, 3);
        let init = random_serving(seed, &p);
        let sol = bcd_solve(&p, &init, &BcdOptions::default()).unwrap();
        let opt = enumerate_optimum(&p).unwrap();
        assert!(sol.utility <= opt.utility + 1e-6);
        sol.allocation
            .check_feasible(&sol.association, sol.beta)
            .unwrap();
        let again = objective(&sol.association, &sol.allocation, &p.rates, &p.weights).unwrap();
        assert!((again - sol.utility).abs() <= 1e-9 * sol.utility.abs().max(1.0));
    }
}

#[test]
fn reference_scenario_solution_is_bounded_and_balanced() {
    for fading in [FadingModel::None, FadingModel::RayleighBlock] {
        let s = Scenario::generate(&NetworkConfig {
            fading_model: fading,
            ..NetworkConfig::default()
        })
        .unwrap();
        let init = max_rsrp_association(&s.rsrp, &s.topology, &s.index).serving();
        let opts = BcdOptions {
            compute_upper_bound: true,
            ..BcdOptions::default()
        };
        let sol = bcd_solve(&s.problem, &init, &opts).unwrap();
        assert!(sol.converged);
        let ub = sol.upper_bound.unwrap();
        assert!(
            sol.utility <= ub + 1e-9,
            "{fading:?}: {} > {ub}",
            sol.utility
        );
        assert!((ub - sol.utility) / ub.abs() < 0.02);
        assert!(sol.beta.value() > 0.0);
        let start = joint_value(&s.problem, &init);
        assert!(sol.utility >= start);
    }
}

#[test]
fn numeric_schedule_matches_closed_form_on_flat_rates() {
    let s = Scenario::generate(&NetworkConfig {
        num_ues: 40,
        num_rbs: 6,
        ..NetworkConfig::default()
    })
    .unwrap();
    let init = max_rsrp_association(&s.rsrp, &s.topology, &s.index).serving();
    let closed = bcd_solve(&s.problem, &init, &BcdOptions::default()).unwrap();
    let numeric = bcd_solve(
        &s.problem,
        &init,
        &BcdOptions {
            schedule_solver: ScheduleSolver::PfNumeric,
            ..BcdOptions::default()
        },
    )
    .unwrap();
    assert!((closed.utility - numeric.utility).abs() < 1e-6 * closed.utility.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn relaxation_dominates_enumeration_dominates_heuristic(seed in any::<u64>(), beta in 0.05f64..0.95) {
        let p = random_problem(seed, 4, 3);
        let relaxed = relaxed_association(&p, beta, &RelaxedOptions::default()).unwrap();
        let (_, best) = enumerate_at_beta(&p, beta).unwrap();
        let (fixed, _, converged) = heuristic_fixed_point(&p, beta, &random_serving(seed, &p), 200);
        prop_assert!(converged);
        let h = binary_utility(&fixed, &p.link_rates(beta), &p.weights);
        prop_assert!(relaxed.certified_bound >= best - 1e-6);
        prop_assert!(relaxed.utility >= best - 1e-6);
        prop_assert!(best >= h - 1e-6);
    }

    #[test]
    fn relaxed_utility_is_concave(seed in any::<u64>(), lambda in 0.01f64..0.99) {
        let p = random_problem(seed, 5, 4);
        let link = p.link_rates(0.5);
        let s1 = random_relaxed(seed, 5, 4);
        let s2 = random_relaxed(seed.wrapping_add(1), 5, 4);
        let mix: Vec<f64> = s1.as_slice().iter().zip(s2.as_slice()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let mid = Association::relaxed(5, 4, mix).unwrap();
        let f = |a: &Association| association_utility(a, &link, &p.weights);
        prop_assert!(f(&mid) >= lambda * f(&s1) + (1.0 - lambda) * f(&s2) - 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let nu = 4;
        let nb = 3;
        let p = JointProblem::flat(
            vec![EnbKind::Macro, EnbKind::PicoCen, EnbKind::PicoCre],
            &[1.5; 12], &[2.5; 12], Eligibility::all(nu, nb), vec![1.0, 0.7, 1.3, 2.0], 2,
        ).unwrap();
        let link = p.link_rates(0.3);
        let s = random_relaxed(seed, nu, nb);
        let g = association_gradient(&s, &link, &p.weights, &p.eligibility);
        let h = 1e-6;
        for i in 0..nu * nb {
            let mut up = s.as_slice().to_vec();
            let mut down = up.clone();
            up[i] += h;
            down[i] -= h;
            // Direct evaluation off the simplex: sum S w log(w R / Omega).
            let eval = |v: &[f64]| {
                let mut omega = vec![0.0; nb];
                for u in 0..nu { for b in 0..nb { omega[b] += v[u * nb + b] * p.weights[u]; } }
                let mut t = 0.0;
                for u in 0..nu { for b in 0..nb {
                    let w = p.weights[u];
                    t += v[u * nb + b] * w * (w * link[u * nb + b] / omega[b]).ln();
                } }
                t
            };
            let fd = (eval(&up) - eval(&down)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "{} vs {}", fd, g[i]);
        }
    }

    #[test]
    fn pf_numeric_equals_closed_form_for_flat_rates(seed in any::<u64>(), budget in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..6usize);
        let n = rng.random_range(1..5usize);
        let per_ue: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..6.0)).collect();
        let rates: Vec<f64> = (0..m * n).map(|i| per_ue[i / n]).collect();
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..3.0)).collect();
        let total: f64 = weights.iter().sum();
        let forced = PfOptions { force_numeric: true, ..PfOptions::default() };
        let numeric = pf_schedule(&rates, n, &weights, budget, &forced).unwrap();
        for u in 0..m {
            for r in 0..n {
                let want = weights[u] * budget / total;
                prop_assert!((numeric.shares[u * n + r] - want).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn optimal_abs_beats_its_neighbours(seed in any::<u64>()) {
        let p = random_problem(seed, 8, 4);
        let serving = random_serving(seed, &p);
        let beta = optimal_abs(&Association::from_serving(4, &serving), &p.kinds, &p.weights).value();
        let at = reduced_abs_objective(&serving, &p, beta);
        for b in [beta - 1e-3, beta + 1e-3] {
            if (0.0..=1.0).contains(&b) {
                prop_assert!(reduced_abs_objective(&serving, &p, b) <= at + 1e-12);
            }
        }
    }

    #[test]
    fn argmax_is_invariant_to_weight_scaling(seed in any::<u64>(), c in 0.01f64..100.0) {
        let p = random_problem(seed, 7, 4);
        let serving = random_serving(seed, &p);
        let link = p.link_rates(0.4);
        let scaled: Vec<f64> = p.weights.iter().map(|w| w * c).collect();
        let (a, _) = heuristic_association_step(&serving, &link, &p.weights, &p.eligibility);
        let (b, _) = heuristic_association_step(&serving, &link, &scaled, &p.eligibility);
        prop_assert_eq!(a, b);
    }
}
