//! Desk-scale checks that the simulated nested process approaches the
//! fixed-point laws as the initial species count grows.

use ncl_core::kernel::LyKernel;
use ncl_core::measure::LambdaMeasure;
use ncl_core::rde::{self, SolverOptions};
use ncl_core::sim::{self, InitCondition, SimConfig};

fn beta_config(s: usize, m: usize, replicates: usize, seed: u64) -> SimConfig {
    SimConfig {
        s,
        m,
        c: 1.0,
        measure: LambdaMeasure::beta(0.5).unwrap(),
        init: InitCondition::One,
        replicates,
        seed,
        b_cap: s,
    }
}

#[test]
fn empirical_marginals_approach_the_minimal_fixed_point() {
    let cfg = beta_config(500, 2, 5000, 11);
    let kernel = LyKernel::build(&cfg.measure, cfg.c, 256).unwrap();
    let nu_star = rde::fix_from_delta1(&kernel, &SolverOptions::default()).unwrap().dist;
    let res = sim::run_many(&cfg).unwrap();
    for l in 0..cfg.m {
        let tv = res.tv_against(&nu_star, l, 50);
        assert!(tv <= 0.05, "coordinate {l}: TV {tv}");
    }
    for (a, b, r) in res.pairwise_correlations() {
        assert!(r.abs() <= 0.06, "corr({a},{b}) = {r}");
    }
}

#[test]
fn tv_shrinks_with_more_initial_species() {
    let kernel = LyKernel::build(&LambdaMeasure::beta(0.5).unwrap(), 1.0, 256).unwrap();
    let nu_star = rde::fix_from_delta1(&kernel, &SolverOptions::default()).unwrap().dist;
    let tv_at = |s: usize| {
        let res = sim::run_many(&beta_config(s, 2, 4000, 5)).unwrap();
        (res.tv_against(&nu_star, 0, 50) + res.tv_against(&nu_star, 1, 50)) / 2.0
    };
    let coarse = tv_at(50);
    let fine = tv_at(800);
    assert!(fine < coarse, "TV did not shrink: s=50 gives {coarse}, s=800 gives {fine}");
}

#[test]
fn infinite_initial_condition_mass_at_infinity() {
    // atom at 1 collapses infinities; the limiting fraction at infinity is
    // 1 - P(X=1)/c = 0.4 here
    let cfg = SimConfig {
        s: 400,
        m: 2,
        c: 0.5,
        measure: LambdaMeasure::atomic(vec![(1.0, 0.3), (0.5, 0.7)]).unwrap(),
        init: InitCondition::Infinite,
        replicates: 3000,
        seed: 23,
        b_cap: 400,
    };
    let res = sim::run_many(&cfg).unwrap();
    let pmf = res.empirical_pmf(None, 20);
    assert!((pmf.inf - 0.4).abs() <= 0.06, "empirical infinity fraction {}", pmf.inf);
}
