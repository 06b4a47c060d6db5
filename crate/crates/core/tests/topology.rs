use eicic::radio::{build_rate_table, rate_from_sinr, sinr, LogicalEnbIndex, Phase};
use eicic::topology::{build_gain_tensor, generate_layout, Tier};
use eicic::{FadingModel, NetworkConfig, Scenario};
use proptest::prelude::*;

fn small(seed: u64) -> NetworkConfig {
    NetworkConfig {
        num_ues: 30,
        num_rbs: 4,
        seed,
        ..NetworkConfig::default()
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let a = Scenario::generate(&small(9)).unwrap();
    let b = Scenario::generate(&small(9)).unwrap();
    assert_eq!(a.topology, b.topology);
    assert_eq!(a.gains.as_slice(), b.gains.as_slice());
    let c = Scenario::generate(&small(10)).unwrap();
    assert!(a
        .topology
        .ues
        .iter()
        .zip(&c.topology.ues)
        .any(|(x, y)| x.position != y.position));
}

#[test]
fn generation_does_not_depend_on_thread_count() {
    let cfg = NetworkConfig {
        fading_model: FadingModel::RayleighBlock,
        ..small(4)
    };
    let reference = Scenario::generate(&cfg).unwrap();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let again = pool.install(|| Scenario::generate(&cfg).unwrap());
        assert_eq!(reference.gains.as_slice(), again.gains.as_slice());
        assert_eq!(reference.problem.rates, again.problem.rates);
    }
}

#[test]
fn macro_power_is_pico_power_times_16_db() {
    let t = generate_layout(&NetworkConfig::default()).unwrap();
    let m = t.macros().next().unwrap().per_rb_power;
    let p = t.picos().next().unwrap().per_rb_power;
    assert!((m / p - 10f64.powf(1.6)).abs() < 1e-9 * 10f64.powf(1.6));
}

#[test]
fn without_shadowing_nearer_enb_of_a_tier_has_larger_gain() {
    let cfg = NetworkConfig {
        shadowing_sigma: 0.0,
        ..NetworkConfig::full_scale()
    };
    let t = generate_layout(&cfg).unwrap();
    let g = build_gain_tensor(&t, &cfg);
    for u in 0..t.num_ues() {
        for tier in [Tier::Macro, Tier::Pico] {
            let of_tier: Vec<usize> = t
                .enbs
                .iter()
                .filter(|e| e.tier == tier)
                .map(|e| e.id)
                .collect();
            let near = *of_tier
                .iter()
                .min_by(|&&a, &&b| t.distance(u, a).total_cmp(&t.distance(u, b)))
                .unwrap();
            let far = *of_tier
                .iter()
                .max_by(|&&a, &&b| t.distance(u, a).total_cmp(&t.distance(u, b)))
                .unwrap();
            assert!(g.get(u, near, 0) >= g.get(u, far, 0));
        }
    }
}

#[test]
fn rates_match_a_scalar_sinr_loop() {
    let cfg = NetworkConfig {
        fading_model: FadingModel::RayleighBlock,
        ..small(2)
    };
    let s = Scenario::generate(&cfg).unwrap();
    let index = LogicalEnbIndex::new(&s.topology);
    let rates = build_rate_table(&s.gains, &s.topology, &index, cfg.noise_per_rb());
    for u in 0..s.topology.num_ues() {
        for (l, e) in index.entries().iter().enumerate() {
            for r in 0..cfg.num_rbs {
                let oracle = |phase| {
                    rate_from_sinr(sinr(
                        &s.gains,
                        &s.topology,
                        cfg.noise_per_rb(),
                        u,
                        e.physical,
                        r,
                        phase,
                    ))
                };
                let (want_n, want_a) = match e.kind {
                    eicic::radio::EnbKind::Macro | eicic::radio::EnbKind::PicoCen => {
                        (oracle(Phase::Nabs), 0.0)
                    }
                    eicic::radio::EnbKind::PicoCre => (0.0, oracle(Phase::Abs)),
                };
                let (n, a) = (rates.nabs(u, l, r), rates.abs(u, l, r));
                assert!(
                    (n - want_n).abs() <= 1e-12 * want_n.max(1e-300),
                    "{u} {l} {r}"
                );
                assert!(
                    (a - want_a).abs() <= 1e-12 * want_a.max(1e-300),
                    "{u} {l} {r}"
                );
                assert_eq!(n * a, 0.0);
            }
        }
    }
}

#[test]
fn abs_sinr_dominates_for_pico_links() {
    let s = Scenario::generate(&small(3)).unwrap();
    let noise = s.config.noise_per_rb();
    for u in 0..s.topology.num_ues() {
        for p in s.topology.picos() {
            let n = sinr(&s.gains, &s.topology, noise, u, p.id, 0, Phase::Nabs);
            let a = sinr(&s.gains, &s.topology, noise, u, p.id, 0, Phase::Abs);
            assert!(a > n);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn layout_respects_config(seed in 0u64..1000, num_ues in 1usize..200, frac in 0.0f64..=1.0) {
        let cfg = NetworkConfig { seed, num_ues, hotspot_ue_fraction: frac, num_rbs: 2, ..NetworkConfig::default() };
        let t = generate_layout(&cfg).unwrap();
        prop_assert_eq!(t.num_ues(), num_ues);
        prop_assert_eq!(t.num_macros(), 3);
        prop_assert_eq!(t.num_picos(), 6);
        let hot = t.ues.iter().filter(|u| u.hotspot.is_some()).count();
        prop_assert_eq!(hot, (frac * num_ues as f64).round() as usize);
        for p in t.picos() {
            for m in t.macros() {
                let d = ((p.position[0] - m.position[0]).powi(2) + (p.position[1] - m.position[1]).powi(2)).sqrt();
                prop_assert!(d >= cfg.min_pico_macro_distance - 1e-9);
            }
        }
        for (i, u) in t.ues.iter().enumerate() {
            prop_assert_eq!(u.id, i);
            if let Some(h) = u.hotspot {
                prop_assert!(t.distance(i, h) <= cfg.hotspot_radius + 1e-9);
            }
        }
    }

    #[test]
    fn rate_is_increasing_in_sinr(a in 0.0f64..1e6, d in 1e-6f64..1e3) {
        prop_assert!(rate_from_sinr(a + d) > rate_from_sinr(a));
    }
}
