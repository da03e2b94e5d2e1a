use pmcal::boost::{boost, boost_with_observer, BoostConfig, BoostMode};
use pmcal::metrics::{mc_over, pmc_over, FilterParams, Qualifier};
use pmcal::sim::{simulate, Scenario, SimConfig};
use pmcal::{category_stats, enumerate_groups, Attribute, AuditDataset, Discretization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two overlapping attributes, scores spread over [0, 1], outcomes from a
/// group-dependent p_star.
fn messy(seed: u64, n: usize) -> AuditDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut scores = Vec::new();
    let mut p = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let ga = rng.gen_range(0..3u32);
        let gb = rng.gen_range(0..2u32);
        let base: f64 = rng.gen_range(0.05..0.95);
        let truth = (base + 0.1 * ga as f64 - 0.15 * gb as f64).clamp(0.02, 0.98);
        a.push(format!("a{ga}"));
        b.push(format!("b{gb}"));
        scores.push(base);
        p.push(truth);
        y.push(u8::from(rng.gen::<f64>() < truth));
    }
    AuditDataset::new(
        y,
        scores,
        vec![Attribute::from_values("a", &a), Attribute::from_values("b", &b)],
        Some(p),
    )
    .unwrap()
}

fn potential(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).map(|(p, r)| (p - r) * (p - r)).sum()
}

#[test]
fn each_unclamped_update_lowers_the_potential_by_size_times_step_squared() {
    let ds = messy(5, 3000);
    let p_star: Vec<f64> = (0..ds.len()).map(|i| ds.p_star(i).unwrap()).collect();
    let groups = enumerate_groups(&ds, &["a", "b"], true, 0.0).unwrap();
    let disc = Discretization::uniform(0.1).unwrap();
    let cfg = BoostConfig {
        exact: true,
        ..BoostConfig::pmc(0.05, 0.1, 0.05, 0.01)
    };
    let mut checked = 0;
    boost_with_observer(&ds, &groups, &disc, &cfg, |e| {
        if e.record.clamped > 0 {
            return;
        }
        let members: Vec<f64> = e.members.iter().map(|&i| p_star[i]).collect();
        let drop = potential(&members, e.before) - potential(&members, e.after);
        let expected = e.record.n as f64 * e.record.delta_r * e.record.delta_r;
        assert!(
            (drop - expected).abs() <= 1e-9 * expected.abs(),
            "drop {drop} expected {expected}"
        );
        checked += 1;
    })
    .unwrap();
    assert!(checked > 10);
}

#[test]
fn converged_output_is_a_fixed_point() {
    let ds = messy(8, 4000);
    let groups = enumerate_groups(&ds, &["a", "b"], true, 0.05).unwrap();
    let disc = Discretization::uniform(0.1).unwrap();
    for cfg in [BoostConfig::pmc(0.1, 0.1, 0.05, 0.05), BoostConfig::mc(0.02, 0.1, 0.05)] {
        let out = boost(&ds, &groups, &disc, &cfg).unwrap();
        assert!(out.trace.converged, "{:?}", cfg.mode);
        assert!(out.trace.totals.updates > 0);
        let post = ds.with_scores(out.scores.clone()).unwrap();

        // every eligible category sits within its cutoff
        let table = category_stats(&post, &groups, &disc, false).unwrap();
        let floor = cfg.alpha * cfg.lambda * cfg.gamma * ds.len() as f64;
        for c in table.entries().iter().filter(|c| c.n as f64 >= floor) {
            assert!((c.ybar - c.rbar).abs() < cfg.cutoff(c.ybar), "{c:?}");
        }
        let q = Qualifier {
            min_count: floor,
            ..Qualifier::from_filter(
                FilterParams {
                    alpha: cfg.alpha,
                    lambda: cfg.lambda,
                    gamma: 0.0,
                    rho: (cfg.mode == BoostMode::Pmc).then_some(cfg.rho),
                },
                ds.len(),
            )
        };
        match cfg.mode {
            BoostMode::Pmc => assert!(pmc_over(&table, &q).value().unwrap() < cfg.alpha),
            BoostMode::Mc => assert!(mc_over(&table, &q).value().unwrap() < cfg.alpha),
        }

        // running again changes nothing
        let again = boost(&post, &groups, &disc, &cfg).unwrap();
        assert_eq!(again.trace.totals.updates, 0);
        assert_eq!(again.scores, out.scores);
    }
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let ds = messy(13, 2000);
    let groups = enumerate_groups(&ds, &["a", "b"], false, 0.05).unwrap();
    let disc = Discretization::uniform(0.1).unwrap();
    let cfg = BoostConfig {
        sample_fraction: 0.6,
        seed: 99,
        ..BoostConfig::pmc(0.1, 0.1, 0.05, 0.01)
    };
    let a = boost(&ds, &groups, &disc, &cfg).unwrap();
    let b = boost(&ds, &groups, &disc, &cfg).unwrap();
    assert_eq!(a.scores, b.scores);
    assert_eq!(a.trace.passes, b.trace.passes);
    let c = boost(&ds, &groups, &disc, &BoostConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.trace.passes, c.trace.passes);
}

#[test]
fn update_count_stays_under_the_worst_case_cap() {
    let sim = simulate(&SimConfig {
        scenario: Scenario::Fixed,
        n_groups: 20,
        n_per_group: 500,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let groups = enumerate_groups(&sim.dataset, &["group"], false, 0.05).unwrap();
    let disc = Discretization::uniform(0.1).unwrap();
    let cfg = BoostConfig {
        exact: true,
        ..BoostConfig::pmc(0.1, 0.1, 0.05, 0.01)
    };
    let out = boost(&sim.dataset, &groups, &disc, &cfg).unwrap();
    assert!(out.trace.converged);
    assert!((out.trace.totals.updates as f64) <= cfg.update_cap(sim.dataset.len()));
    // exact mode lands every group on its true rate
    for (g, s) in sim.groups.iter().zip(out.scores.chunks(500)) {
        assert!(s.iter().all(|&x| (x - g.p_star).abs() < 1e-12));
    }
}
