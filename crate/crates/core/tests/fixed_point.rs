//! The minimal fixed point and the identities it must satisfy.

use ncl_core::kernel::LyKernel;
use ncl_core::measure::LambdaMeasure;
use ncl_core::rde::{self, Regime, SolverOptions};

const XS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[test]
fn minimal_fixed_point_identity_battery() {
    let m = LambdaMeasure::beta(0.5).unwrap();
    let c = 1.0;
    let opts = SolverOptions::default();
    let kernel = LyKernel::build(&m, c, 512).unwrap();
    let fp = rde::fix_from_delta1(&kernel, &opts).unwrap();
    assert_eq!(fp.regime, Regime::FiniteMean);

    // self-consistency
    let image = rde::g_map(&fp.dist, &kernel).unwrap();
    assert!(image.tv(&fp.dist) <= 1e-10);

    // generating-function identity on an interior grid
    let check = rde::pgf_residual(&fp.dist, &m, c, &XS).unwrap();
    assert!(check.asserted);
    assert!(check.max_abs_residual() <= 1e-8, "residual {:.3e}", check.max_abs_residual());

    // inversion equals the self-convolution at a fixed point
    let t = rde::inverse_t(&fp.dist, &kernel);
    let (conv, beyond, _) = rde::self_convolution(&fp.dist);
    let mut tv = beyond;
    for n in 1..=kernel.n() {
        tv += (t[n] - conv[n]).abs();
    }
    assert!(0.5 * tv <= 1e-8, "inversion TV {:.3e}", 0.5 * tv);

    // mean identity
    let (lhs, rhs) = rde::mean_identity(&fp.dist, &m, c).unwrap();
    assert!((lhs - rhs).abs() <= 1e-6, "mean identity gap {:.3e}", (lhs - rhs).abs());

    // truncation refinement: the mean is already stable under N doubling
    let kernel_half = LyKernel::build(&m, c, 256).unwrap();
    let fp_half = rde::fix_from_delta1(&kernel_half, &opts).unwrap();
    assert!((fp_half.dist.mean() - fp.dist.mean()).abs() <= 1e-6);

    // at N = 512 the convolution overflow underflows to zero, so even the
    // pessimistic upper chain certifies a round-off band; at smaller N the
    // absorbing-infinity fold makes the band vacuously 1
    assert!(fp.band <= 1e-12);
}

#[test]
fn fixed_points_are_monotone_in_the_death_rate() {
    let m = LambdaMeasure::beta(0.5).unwrap();
    let opts = SolverOptions::default();
    let solutions: Vec<_> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&c| {
            let kernel = LyKernel::build(&m, c, 256).unwrap();
            rde::fix_from_delta1(&kernel, &opts).unwrap().dist
        })
        .collect();
    for w in solutions.windows(2) {
        // larger c: stochastically larger counts (CDF pointwise smaller)
        assert!(w[1].max_cdf_excess_over(&w[0]) <= 1e-12);
        // and strictly smaller generating function inside (0, 1)
        for &x in &XS {
            let lo = w[0].pgf(x).unwrap();
            let hi = w[1].pgf(x).unwrap();
            assert!(lo - hi > 1e-10, "pgf not strictly ordered at x={x}: {lo} vs {hi}");
        }
    }
}

#[test]
fn means_increase_with_the_death_rate() {
    let m = LambdaMeasure::beta(0.5).unwrap();
    let opts = SolverOptions::default();
    let mut prev = 0.0;
    for c in [0.25, 0.75, 1.25] {
        let kernel = LyKernel::build(&m, c, 256).unwrap();
        let mean = rde::fix_from_delta1(&kernel, &opts).unwrap().dist.mean();
        assert!(mean > prev);
        prev = mean;
    }
}

#[test]
fn mean_varies_smoothly_with_the_death_rate() {
    // no closed-form Lipschitz constant is available, so the practical check
    // is finite differences across a c-grid: positive, finite, and growing
    // smoothly toward the blow-up at c = E[1/X]
    let m = LambdaMeasure::beta(0.5).unwrap();
    let opts = SolverOptions::default();
    let grid = [0.8, 0.9, 1.0, 1.1, 1.2];
    let means: Vec<f64> = grid
        .iter()
        .map(|&c| {
            let kernel = LyKernel::build(&m, c, 256).unwrap();
            rde::fix_from_delta1(&kernel, &opts).unwrap().dist.mean()
        })
        .collect();
    let quotients: Vec<f64> = means
        .windows(2)
        .zip(grid.windows(2))
        .map(|(mw, cw)| (mw[1] - mw[0]) / (cw[1] - cw[0]))
        .collect();
    for q in &quotients {
        assert!(q.is_finite() && *q > 0.0);
    }
    for w in quotients.windows(2) {
        let ratio = w[1] / w[0];
        assert!((1.0..=2.0).contains(&ratio), "difference quotients jump: {quotients:?}");
    }
}

#[test]
fn small_death_rate_collapses_to_a_single_lineage() {
    // c -> 0: species merge so rarely that everything coalesces first
    let m = LambdaMeasure::beta(0.5).unwrap();
    let kernel = LyKernel::build(&m, 1e-4, 128).unwrap();
    let fp = rde::fix_from_delta1(&kernel, &SolverOptions::default()).unwrap();
    assert!(fp.dist.mean() - 1.0 < 1e-2);
    let (lhs, rhs) = rde::mean_identity(&fp.dist, &m, 1e-4).unwrap();
    assert!((lhs - 1.0).abs() < 1e-2 && (rhs - 1.0).abs() < 1e-2);
}
