use super::rates::outflow;
use super::*;
use crate::error::Error;
use crate::market::{MarketParams, Policy};

fn params(lambda_a: f64, lambda_b: f64, p: f64) -> MarketParams {
    MarketParams::new(lambda_a, lambda_b, p).unwrap()
}

fn rate_to(entries: &[RateEntry], to: (u32, u32)) -> f64 {
    entries
        .iter()
        .find(|e| e.to == to)
        .map(|e| e.rate)
        .unwrap_or(0.0)
}

#[test]
fn greedy2_rates_at_interior_state() {
    let m = params(10.0, 8.0, 0.1);
    let entries = transition_rates(Policy::Greedy2, m, (2, 3));
    assert_eq!(entries.len(), 4);
    assert!((rate_to(&entries, (3, 3)) - 7.29).abs() < 1e-9);
    assert!((rate_to(&entries, (2, 4)) - 6.48).abs() < 1e-9);
    assert!((rate_to(&entries, (1, 3)) - 3.52).abs() < 1e-9);
    assert!((rate_to(&entries, (2, 2)) - 5.71).abs() < 1e-9);
}

#[test]
fn patient2_rates_at_interior_state() {
    let m = params(10.0, 8.0, 0.1);
    let entries = transition_rates(Policy::Patient2, m, (2, 3));
    assert_eq!(entries.len(), 5);
    assert!((rate_to(&entries, (3, 3)) - 10.0).abs() < 1e-12);
    assert!((rate_to(&entries, (2, 4)) - 8.0).abs() < 1e-12);
    assert!((rate_to(&entries, (1, 3)) - 1.458).abs() < 1e-9);
    assert!((rate_to(&entries, (2, 2)) - 2.43).abs() < 1e-9);
    assert!((rate_to(&entries, (1, 2)) - 1.112).abs() < 1e-9);
}

#[test]
fn one_sided_rates_at_interior_state() {
    let m = params(10.0, 8.0, 0.1);
    let g1 = transition_rates(Policy::Greedy1, m, (2, 3));
    assert!((rate_to(&g1, (3, 3)) - 10.0).abs() < 1e-12);
    assert!((rate_to(&g1, (2, 4)) - 8.0 * 0.81).abs() < 1e-9);
    assert!((rate_to(&g1, (1, 3)) - (2.0 + 8.0 * 0.19)).abs() < 1e-9);
    assert!((rate_to(&g1, (2, 2)) - 3.0).abs() < 1e-12);

    let p1 = transition_rates(Policy::Patient1, m, (2, 3));
    assert!((rate_to(&p1, (3, 3)) - 10.0).abs() < 1e-12);
    assert!((rate_to(&p1, (2, 4)) - 8.0).abs() < 1e-12);
    assert!((rate_to(&p1, (1, 3)) - 2.0).abs() < 1e-12);
    assert!((rate_to(&p1, (1, 2)) - 3.0 * 0.19).abs() < 1e-9);
    assert!((rate_to(&p1, (2, 2)) - 3.0 * 0.81).abs() < 1e-9);
}

#[test]
fn empty_pool_state_only_emits_arrivals() {
    let m = params(10.0, 8.0, 0.1);
    for policy in Policy::ALL {
        let entries = transition_rates(policy, m, (0, 0));
        assert!(!entries.is_empty());
        for e in &entries {
            assert!(e.to == (1, 0) || e.to == (0, 1), "{policy}: {:?}", e.to);
            assert!(e.rate > 0.0);
        }
    }
}

#[test]
fn generator_is_consistent() {
    let m = params(7.0, 5.0, 0.2);
    for policy in Policy::ALL {
        for state in [(0, 0), (1, 0), (0, 4), (3, 3), (10, 2), (6, 9)] {
            let entries = transition_rates(policy, m, state);
            let total: f64 = entries.iter().map(|e| e.rate).sum();
            assert!((total - outflow(policy, m, state)).abs() < 1e-12);
            for e in &entries {
                assert!(e.rate >= 0.0);
                assert_ne!(e.to, e.from);
                let dk = e.to.0 as i64 - e.from.0 as i64;
                let dj = e.to.1 as i64 - e.from.1 as i64;
                assert!(dk.abs() <= 1 && dj.abs() <= 1);
            }
        }
    }
}

#[test]
fn near_empty_market_concentrates_at_origin() {
    let m = params(0.01, 0.01, 0.5);
    for policy in [Policy::Greedy2, Policy::Patient1, Policy::Inactive] {
        let dist = stationary_distribution(policy, m, GridSpec::new(10, 10)).unwrap();
        assert!(dist.prob(0, 0) > 0.98, "{policy}: {}", dist.prob(0, 0));
    }
}

#[test]
fn balanced_two_sided_chains_are_exchange_symmetric() {
    let m = params(1.0, 1.0, 0.5);
    for policy in [Policy::Greedy2, Policy::Patient2] {
        let dist = stationary_distribution(policy, m, GridSpec::new(12, 12)).unwrap();
        for k in 0..=12u32 {
            for j in 0..k {
                assert!(
                    (dist.prob(k, j) - dist.prob(j, k)).abs() < 1e-10,
                    "{policy} asymmetric at ({k},{j})"
                );
            }
        }
    }
}

#[test]
fn power_iteration_agrees_with_direct_solve() {
    let m = params(3.0, 2.0, 0.2);
    for policy in Policy::ALL {
        let grid = GridSpec::new(20, 18);
        let iterated = stationary_distribution(policy, m, grid).unwrap();
        let direct = stationary_distribution_direct(policy, m, grid).unwrap();
        let tv = tv_distance(&iterated, &direct).unwrap();
        assert!(tv < 1e-9, "{policy}: tv {tv}");
    }
}

#[test]
fn no_matching_chain_reproduces_product_poisson() {
    // With nobody matching, the two pools are independent M/M/inf queues,
    // so the stationary law is exactly Poisson(lambda_a) x Poisson(lambda_b):
    // a closed-form oracle for the solver.
    let m = params(4.0, 3.0, 0.5);
    let grid = GridSpec::new(26, 24);
    let dist = stationary_distribution(Policy::Inactive, m, grid).unwrap();
    let poisson = |lambda: f64, max: u32| -> Vec<f64> {
        let mut pmf = vec![(-lambda).exp()];
        for k in 1..=max {
            let prev = pmf[k as usize - 1];
            pmf.push(prev * lambda / k as f64);
        }
        pmf
    };
    let pa = poisson(m.lambda_a(), grid.a_max);
    let pb = poisson(m.lambda_b(), grid.b_max);
    let mut worst = 0.0f64;
    for k in 0..=grid.a_max {
        for j in 0..=grid.b_max {
            worst = worst.max((dist.prob(k, j) - pa[k as usize] * pb[j as usize]).abs());
        }
    }
    // Truncation displaces only the (tiny) censored tail mass.
    assert!(worst < 1e-8, "worst cell error {worst:.3e}");
}

#[test]
fn solver_residual_meets_the_stated_tolerance() {
    let m = params(12.0, 9.0, 0.15);
    let grid = GridSpec::new(40, 36);
    for policy in [Policy::Greedy2, Policy::Patient2, Policy::Patient1] {
        let dist = stationary_distribution(policy, m, grid).unwrap();
        // Per-state net flux of the censored generator, recomputed from
        // the rates: max norm must sit below 1e-10.
        let mut net = vec![0.0f64; grid.n_states()];
        for idx in 0..grid.n_states() {
            let (k, j) = grid.coords(idx);
            for e in transition_rates(policy, m, (k, j)) {
                if e.to.0 <= grid.a_max && e.to.1 <= grid.b_max {
                    net[grid.index(e.to.0, e.to.1)] += dist.mass[idx] * e.rate;
                    net[idx] -= dist.mass[idx] * e.rate;
                }
            }
        }
        let residual = net.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        assert!(residual < 1e-10, "{policy}: residual {residual:.3e}");
    }
}

#[test]
fn undersized_grid_is_rejected_with_suggestion() {
    let m = params(30.0, 30.0, 0.1);
    match stationary_distribution(Policy::Patient2, m, GridSpec::new(8, 8)) {
        Err(Error::GridTooSmall {
            leak, suggested_a, ..
        }) => {
            assert!(leak > 1e-6);
            assert!(suggested_a > 8);
        }
        other => panic!("expected GridTooSmall, got {other:?}"),
    }
}

#[test]
fn losses_of_point_masses() {
    let m = params(10.0, 10.0, 0.1);
    let grid = GridSpec::new(8, 8);

    let origin = PoolDistribution::point(grid, (0, 0), Some(Policy::Patient2));
    let f = stationary_loss(Policy::Patient2, m, &origin).unwrap();
    assert_eq!(f.loss_a, 0.0);
    assert_eq!(f.loss_b, 0.0);
    assert_eq!(f.loss_total, 0.0);

    let point = PoolDistribution::point(grid, (3, 2), Some(Policy::Patient2));
    let f = stationary_loss(Policy::Patient2, m, &point).unwrap();
    assert!((f.loss_a - 3.0 * 0.81 / 10.0).abs() < 1e-12, "{}", f.loss_a);
    assert!(
        (f.loss_b - 2.0 * 0.729 / 10.0).abs() < 1e-12,
        "{}",
        f.loss_b
    );

    let g = stationary_loss(
        Policy::Greedy2,
        m,
        &PoolDistribution::point(grid, (3, 2), Some(Policy::Greedy2)),
    )
    .unwrap();
    assert!((g.loss_a - 0.3).abs() < 1e-12);
    assert!((g.loss_b - 0.2).abs() < 1e-12);
}

#[test]
fn mismatched_policy_is_rejected() {
    let m = params(10.0, 10.0, 0.1);
    let dist = PoolDistribution::point(GridSpec::new(4, 4), (1, 1), Some(Policy::Greedy2));
    assert!(matches!(
        stationary_loss(Policy::Patient2, m, &dist),
        Err(Error::PolicyMismatch { .. })
    ));
    let anon = PoolDistribution::point(GridSpec::new(4, 4), (1, 1), None);
    assert!(stationary_loss(Policy::Patient2, m, &anon).is_err());
}

#[test]
fn tv_distance_basics() {
    let grid = GridSpec::new(4, 4);
    let d00 = PoolDistribution::point(grid, (0, 0), None);
    let d11 = PoolDistribution::point(grid, (1, 1), None);
    assert_eq!(tv_distance(&d00, &d00).unwrap(), 0.0);
    assert_eq!(tv_distance(&d00, &d11).unwrap(), 1.0);

    let mut mix_mass = vec![0.0; grid.n_states()];
    mix_mass[grid.index(0, 0)] = 0.5;
    mix_mass[grid.index(1, 1)] = 0.5;
    let mix = PoolDistribution::from_mass(grid, mix_mass, None);
    assert!((tv_distance(&mix, &d00).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(tv_distance_unhalved(&mix, &d00).unwrap(), 1.0);

    let other = PoolDistribution::point(GridSpec::new(5, 4), (0, 0), None);
    assert!(matches!(
        tv_distance(&d00, &other),
        Err(Error::GridMismatch { .. })
    ));
}

#[test]
fn empirical_histogram_edge_cases() {
    let m = params(10.0, 10.0, 0.2);
    let grid = GridSpec::new(30, 30);
    // Immediately after the empty start everything sits at the origin.
    let early = empirical_distribution(m, Policy::Greedy2, 1e-6, 200, 3, grid).unwrap();
    assert!(early.prob(0, 0) > 0.99);
    // A single replication is a point mass.
    let single = empirical_distribution(m, Policy::Greedy2, 5.0, 1, 3, grid).unwrap();
    let total_cells = single.mass.iter().filter(|&&x| x > 0.0).count();
    assert_eq!(total_cells + (single.leak > 0.0) as usize, 1);
}

#[test]
fn mixing_time_thresholds() {
    let m = params(5.0, 5.0, 0.3);
    let grid = GridSpec::new(30, 30);
    let vacuous = estimate_mixing_time(m, Policy::Greedy2, 1.0, 10, 1, grid).unwrap();
    assert_eq!(vacuous.time, 0.0);
    assert!(matches!(
        estimate_mixing_time(m, Policy::Greedy2, 0.0, 10, 1, grid),
        Err(Error::EpsilonOutOfRange { .. })
    ));
    // Nested thresholds on the same seed: tighter epsilon cannot be reached
    // earlier than a looser one.
    let loose = estimate_mixing_time(m, Policy::Greedy2, 0.3, 1000, 5, grid).unwrap();
    let tight = estimate_mixing_time(m, Policy::Greedy2, 0.15, 1000, 5, grid).unwrap();
    assert!(tight.time >= loose.time, "{} < {}", tight.time, loose.time);
    assert!(loose.time > 0.0);
}

#[test]
fn csv_serialization_round_trips() {
    let m = params(2.0, 2.0, 0.3);
    let dist = stationary_distribution(Policy::Greedy2, m, GridSpec::new(14, 14)).unwrap();
    let mut buf = Vec::new();
    dist.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("i,j,prob"));
    let mut mass = vec![0.0; dist.grid.n_states()];
    let mut leak_line = None;
    for line in lines {
        if let Some(rest) = line.strip_prefix("# leak=") {
            leak_line = Some(rest.parse::<f64>().unwrap());
        } else {
            let mut parts = line.split(',');
            let i: u32 = parts.next().unwrap().parse().unwrap();
            let j: u32 = parts.next().unwrap().parse().unwrap();
            let prob: f64 = parts.next().unwrap().parse().unwrap();
            mass[dist.grid.index(i, j)] = prob;
        }
    }
    assert_eq!(leak_line, Some(dist.leak));
    for (a, b) in mass.iter().zip(&dist.mass) {
        assert_eq!(a, b, "shortest-round-trip float should parse back exactly");
    }
}

#[test]
fn enlarging_the_grid_moves_functionals_less_than_the_leak_bound() {
    let m = params(8.0, 8.0, 0.25);
    let small_grid = GridSpec::new(22, 22);
    let large_grid = GridSpec::new(34, 34);
    for policy in [Policy::Greedy2, Policy::Patient2] {
        let opts = SolveOptions {
            leak_threshold: 1.0,
            ..SolveOptions::default()
        };
        let small = stationary_distribution_opts(policy, m, small_grid, &opts).unwrap();
        let large = stationary_distribution_opts(policy, m, large_grid, &opts).unwrap();
        let fs = stationary_loss(policy, m, &small).unwrap();
        let fl = stationary_loss(policy, m, &large).unwrap();
        // Truncation can displace at most the leaked mass, each unit of
        // which moves a pool-size expectation by at most the larger bound.
        let bound = (small.leak + large.leak) * large_grid.a_max as f64;
        assert!((fs.e_a - fl.e_a).abs() <= bound.max(1e-12));
        assert!((fs.e_b - fl.e_b).abs() <= bound.max(1e-12));
    }
}
