//! The one-branchpoint distributional update `G_c` and its fixed points.
//!
//! `G_c(mu)` is the law of `L_{W1+W2}(Y)`: draw two independent counts from
//! `mu`, add them, and run the coalescent for an independent Exp(c) time.
//! Computationally that is a self-convolution followed by a pass through the
//! block-count kernel. The map is monotone for the usual stochastic order,
//! so iterating from `delta_1` climbs to the minimal fixed point and
//! iterating from `delta_inf` descends to the maximal one.
//!
//! Truncation at `N` makes the input-side excess (sums landing beyond `N`)
//! ambiguous: pushing it through row `N` under-disperses, pushing it through
//! the infinite row over-disperses, and the two choices bracket the exact
//! image. The `Envelope` policy runs both folded chains and reports the
//! total-variation gap as the certified truncation band.

use serde::Serialize;

use crate::dist::{ExtDist, TailPolicy};
use crate::error::{Error, Result};
use crate::kernel::LyKernel;
use crate::measure::LambdaMeasure;

/// Self-convolution of the finite part plus bookkeeping of where the rest
/// of the product mass went.
struct SelfConv {
    /// conv[i] = P(W1 + W2 = i) for attributed finite counts, i <= 2N.
    conv: Vec<f64>,
    /// Finite mass beyond N (convolution overflow plus anything involving
    /// the unattributed tail).
    beyond: f64,
    /// Mass involving an infinite summand.
    inf: f64,
}

fn self_convolve(mu: &ExtDist) -> SelfConv {
    let n = mu.n();
    let p = mu.masses();
    let mut conv = vec![0.0; 2 * n + 1];
    for a in 1..=n {
        let pa = p[a];
        if pa == 0.0 {
            continue;
        }
        conv[2 * a] += pa * pa;
        for b in (a + 1)..=n {
            if p[b] != 0.0 {
                conv[a + b] += 2.0 * pa * p[b];
            }
        }
    }
    let finite: f64 = p.iter().sum();
    let tail = mu.tail();
    let inf = mu.p_inf();
    let beyond: f64 = conv[n + 1..].iter().sum::<f64>() + 2.0 * finite * tail + tail * tail;
    SelfConv { conv, beyond, inf: 2.0 * inf * (finite + tail) + inf * inf }
}

/// Push attributed counts through the kernel, handling the beyond-N mass per
/// `fold`. Returns an unnormalized mass vector plus the resulting inf mass.
fn push_through(
    kernel: &LyKernel,
    conv: &[f64],
    beyond: f64,
    inf_in: f64,
    fold: TailPolicy,
) -> Result<(Vec<f64>, f64)> {
    let n = kernel.n();
    let mut out = vec![0.0; n + 1];
    for i in 1..=n.min(conv.len() - 1) {
        let w = conv[i];
        if w == 0.0 {
            continue;
        }
        for (k, kp) in kernel.row(i).iter().enumerate().skip(1) {
            out[k] += w * kp;
        }
    }
    let mut out_inf = 0.0;
    if inf_in > 0.0 {
        let row = kernel.inf_row()?;
        out[1] += inf_in * row.p_one;
        out_inf += inf_in * row.p_inf;
    }
    if beyond > 0.0 {
        match fold {
            TailPolicy::FoldToN => {
                for (k, kp) in kernel.row(n).iter().enumerate().skip(1) {
                    out[k] += beyond * kp;
                }
            }
            TailPolicy::FoldToInf => {
                let row = kernel.inf_row()?;
                out[1] += beyond * row.p_one;
                out_inf += beyond * row.p_inf;
            }
            TailPolicy::Envelope => unreachable!("envelope resolves to a concrete fold"),
        }
    }
    Ok((out, out_inf))
}

fn check_input(mu: &ExtDist, kernel: &LyKernel) -> Result<()> {
    if kernel.n() < 2 {
        return Err(Error::InvalidArgument("g_map needs a kernel with N >= 2".into()));
    }
    if mu.n() != kernel.n() {
        return Err(Error::InvalidArgument(format!(
            "distribution support {} does not match kernel size {}",
            mu.n(),
            kernel.n()
        )));
    }
    let total = mu.total_mass();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "g_map input is not normalized (total mass {total})"
        )));
    }
    Ok(())
}

/// One application of `G_c`. Under `Envelope` this returns the `FoldToN`
/// image (the stochastic lower bracket); use [`g_map_bracket`] for both ends.
///
/// The output is renormalized: without this, the squaring in the
/// convolution doubles any round-off mass defect per iteration.
pub fn g_map(mu: &ExtDist, kernel: &LyKernel) -> Result<ExtDist> {
    check_input(mu, kernel)?;
    let sc = self_convolve(mu);
    let fold = match mu.policy() {
        TailPolicy::FoldToInf => TailPolicy::FoldToInf,
        _ => TailPolicy::FoldToN,
    };
    let (out, out_inf) = push_through(kernel, &sc.conv, sc.beyond, sc.inf, fold)?;
    Ok(ExtDist::normalized(out, out_inf, 0.0, mu.policy()))
}

/// Both folded images of `G_c(mu)`: `(lower, upper)` with `lower` pushing
/// the excess through row `N` and `upper` through the infinite row.
pub fn g_map_bracket(mu: &ExtDist, kernel: &LyKernel) -> Result<(ExtDist, ExtDist)> {
    check_input(mu, kernel)?;
    let sc = self_convolve(mu);
    let (lo, lo_inf) = push_through(kernel, &sc.conv, sc.beyond, sc.inf, TailPolicy::FoldToN)?;
    let (hi, hi_inf) = push_through(kernel, &sc.conv, sc.beyond, sc.inf, TailPolicy::FoldToInf)?;
    Ok((
        ExtDist::normalized(lo, lo_inf, 0.0, TailPolicy::FoldToN),
        ExtDist::normalized(hi, hi_inf, 0.0, TailPolicy::FoldToInf),
    ))
}

/// Law of `L_T(Y)` for a given count law `T`, as the FoldToN / FoldToInf
/// bracket pair (no convolution; `T` drives the kernel directly).
pub fn kernel_image_bracket(t: &ExtDist, kernel: &LyKernel) -> Result<(ExtDist, ExtDist)> {
    check_input(t, kernel)?;
    let (lo, lo_inf) = push_through(kernel, t.masses(), t.tail(), t.p_inf(), TailPolicy::FoldToN)?;
    let (hi, hi_inf) =
        push_through(kernel, t.masses(), t.tail(), t.p_inf(), TailPolicy::FoldToInf)?;
    Ok((
        ExtDist::normalized(lo, lo_inf, 0.0, TailPolicy::FoldToN),
        ExtDist::normalized(hi, hi_inf, 0.0, TailPolicy::FoldToInf),
    ))
}

/// Per-iteration diagnostics of a fixed-point run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    /// Total-variation distance between successive iterates.
    pub tv: f64,
    /// Finite-part mean of the iterate.
    pub mean: f64,
}

/// Where `c` sits relative to `E[1/X]`; the finite-mean fixed-point theory
/// needs `c < E[1/X] < inf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    FiniteMean,
    Boundary,
    InfiniteMean,
    NoDust,
}

pub fn classify_regime(measure: &LambdaMeasure, c: f64) -> Regime {
    let e = measure.mean_inv_x();
    if !e.is_finite() {
        Regime::NoDust
    } else if (c - e).abs() <= 1e-12 * e.max(1.0) {
        Regime::Boundary
    } else if c < e {
        Regime::FiniteMean
    } else {
        Regime::InfiniteMean
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub policy: TailPolicy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-12, max_iter: 100_000, policy: TailPolicy::Envelope }
    }
}

/// Converged fixed point plus its run diagnostics.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    /// Limit of the `FoldToN` chain (the reported result).
    pub dist: ExtDist,
    /// Limit of the `FoldToInf` chain when running under `Envelope`.
    pub upper: Option<ExtDist>,
    /// TV gap between the two chain limits: the certified truncation band.
    pub band: f64,
    pub trace: Vec<TraceEntry>,
    pub iterations: usize,
    pub regime: Regime,
    /// Worst pointwise violation of the expected stochastic monotonicity of
    /// the iterate sequence (round-off sized for light tails; up to the
    /// truncation band for heavy starts).
    pub monotone_violation: f64,
}

/// Expected stochastic direction of the iterate sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

/// Iterate `G_c` from an arbitrary start until successive iterates stagnate
/// in total variation. `direction` declares which stochastic monotonicity
/// the run is expected to exhibit; violations are measured, not enforced,
/// since folding can dent the ordering by up to the truncation band.
pub fn iterate_from(
    kernel: &LyKernel,
    start: &ExtDist,
    opts: &SolverOptions,
    direction: Monotone,
) -> Result<FixedPoint> {
    let use_envelope = opts.policy == TailPolicy::Envelope;
    if use_envelope || opts.policy == TailPolicy::FoldToInf {
        // both need the infinite row for the upper fold
        kernel.inf_row()?;
    }
    // attribute any starting tail the way the chain will keep folding it;
    // the fold projections also set the matching per-iterate policy
    let mut lo = if opts.policy == TailPolicy::FoldToInf {
        start.clone().fold_to_inf()
    } else {
        start.clone().fold_to_n()
    };
    let mut hi = use_envelope.then(|| start.clone().fold_to_inf());
    let mut trace = Vec::new();
    let mut monotone_violation: f64 = 0.0;
    let regime = classify_regime(kernel.measure(), kernel.c());

    for iter in 1..=opts.max_iter {
        let next_lo = g_map(&lo, kernel)?;
        let tv_lo = next_lo.tv(&lo);
        let excess = match direction {
            Monotone::Increasing => next_lo.max_cdf_excess_over(&lo),
            Monotone::Decreasing => lo.max_cdf_excess_over(&next_lo),
        };
        monotone_violation = monotone_violation.max(excess);
        let mut tv_hi = 0.0;
        if let Some(h) = hi.as_mut() {
            let next_hi = g_map(h, kernel)?;
            tv_hi = next_hi.tv(h);
            *h = next_hi;
        }
        lo = next_lo;
        trace.push(TraceEntry { iter, tv: tv_lo, mean: lo.mean() });
        if tv_lo < opts.tol && tv_hi < opts.tol {
            let band = hi.as_ref().map(|h| lo.tv(h)).unwrap_or(0.0);
            return Ok(FixedPoint {
                dist: lo,
                upper: hi,
                band,
                trace,
                iterations: iter,
                regime,
                monotone_violation,
            });
        }
    }
    Err(Error::Convergence {
        message: format!(
            "fixed-point iteration did not stagnate below tol {} within {} iterations",
            opts.tol, opts.max_iter
        ),
        trace,
    })
}

/// Iterate `G_c` from `delta_1` (stochastically increasing) to the minimal
/// fixed point. Runs in every regime and labels the result; the finite-mean
/// interpretation only holds when `c < E[1/X] < inf`.
pub fn fix_from_delta1(kernel: &LyKernel, opts: &SolverOptions) -> Result<FixedPoint> {
    let start = ExtDist::delta_one(kernel.n(), opts.policy);
    iterate_from(kernel, &start, opts, Monotone::Increasing)
}

/// Iterate `G_c` from `delta_inf` (stochastically decreasing). Requires
/// dust. On convergence the mass at infinity must equal
/// `max(0, 1 - P(X=1)/c)` within 1e-8, which is checked here.
pub fn fix_from_delta_inf(kernel: &LyKernel, opts: &SolverOptions) -> Result<FixedPoint> {
    kernel.inf_row()?;
    let start = ExtDist::delta_inf(kernel.n(), opts.policy);
    let fp = iterate_from(kernel, &start, opts, Monotone::Decreasing)?;
    let rho = kernel.measure().atom_at_one();
    let expected = (1.0 - rho / kernel.c()).max(0.0);
    let got = fp.dist.p_inf();
    if (got - expected).abs() > 1e-8 {
        return Err(Error::Integrity(format!(
            "mass at infinity {got} differs from the two-state fixed point {expected} by more than 1e-8"
        )));
    }
    Ok(fp)
}

/// Invert the exponential-time kernel: recover the (signed) law a starting
/// count `T` would need for `L_T(Y)` to equal `dist`.
///
/// `t[n] = ((lambda_n + c) dist[n] - sum_{i>n} C(i,i-n+1) lambda_{i,i-n+1} dist[i]) / c`,
/// truncated at `N`. Genuine negative entries mean `dist` is not of the form
/// `L_T(Y)` and are returned as-is. At a fixed point of `G_c` the result
/// must equal the self-convolution of `dist`.
pub fn inverse_t(dist: &ExtDist, kernel: &LyKernel) -> Vec<f64> {
    upward_inverse(dist.masses(), kernel)
}

/// Same inversion on a raw coefficient array (`r[0]` ignored).
pub fn upward_inverse(r: &[f64], kernel: &LyKernel) -> Vec<f64> {
    let n = kernel.n().min(r.len() - 1);
    let c = kernel.c();
    let tr = kernel.transitions();
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let mut acc = (tr.lambda(k) + c) * r[k];
        for i in (k + 1)..=n {
            acc -= tr.rate(i, k) * r[i];
        }
        out[k] = acc / c;
    }
    out
}

/// Report of the generating-function identity a fixed point must satisfy:
/// `E[(R(x)-R((1-X)x))/X^2] + c(R(x)-R(x)^2) - x E[(R(X+(1-X)x)-R((1-X)x))/X^2]`.
#[derive(Clone, Debug, Serialize)]
pub struct PgfCheck {
    pub xs: Vec<f64>,
    pub residuals: Vec<f64>,
    /// False when the distribution carries mass at infinity (or an
    /// unattributed tail): the identity is then evaluated on the finite part
    /// only and not asserted.
    pub asserted: bool,
}

impl PgfCheck {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Evaluate the generating-function residual at each `x`. Requires dust so
/// the expectations over `X` are finite.
pub fn pgf_residual(
    dist: &ExtDist,
    measure: &LambdaMeasure,
    c: f64,
    xs: &[f64],
) -> Result<PgfCheck> {
    if !measure.has_dust() {
        return Err(Error::Domain("the generating-function identity requires dust".into()));
    }
    let p = dist.masses();
    let n = dist.n();
    let mut residuals = Vec::with_capacity(xs.len());
    for &x in xs {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("pgf grid point {x} outside [0, 1]")));
        }
        // coefficients p[n] x^n, shared by both expectations
        let mut coef = vec![0.0; n + 1];
        let mut xn = 1.0;
        for k in 1..=n {
            xn *= x;
            coef[k] = p[k] * xn;
        }
        // E[(R(x) - R((1-X)x)) / X^2]: per term x^n (1 - (1-u)^n), summed
        // with expm1/log1p so panels refined down to u ~ 1e-300 stay exact
        let e1 = measure.expect(|u| {
            let l = (-u).ln_1p();
            let mut s = 0.0;
            for k in 1..=n {
                if coef[k] != 0.0 {
                    s += coef[k] * (-f64::exp_m1(k as f64 * l));
                }
            }
            s / (u * u)
        });
        // x E[(R(X+(1-X)x) - R((1-X)x)) / X^2]: per term p_n (A^n - B^n)
        // with A = x + u(1-x), B = (1-u)x
        let e2 = measure.expect(|u| {
            let a = x + u * (1.0 - x);
            let b = (1.0 - u) * x;
            let mut s = 0.0;
            if b == 0.0 {
                let mut apow = 1.0;
                for k in 1..=n {
                    apow *= a;
                    if p[k] != 0.0 {
                        s += p[k] * apow;
                    }
                }
            } else {
                let lab = f64::ln_1p(u / b); // ln(A/B) > 0
                let mut apow = 1.0;
                let mut bpow = 1.0;
                for k in 1..=n {
                    apow *= a;
                    bpow *= b;
                    if p[k] == 0.0 {
                        continue;
                    }
                    let klab = k as f64 * lab;
                    let diff = if klab <= 30.0 { bpow * f64::exp_m1(klab) } else { apow - bpow };
                    s += p[k] * diff;
                }
            }
            s / (u * u)
        });
        let r = dist.pgf(x)?;
        residuals.push(e1 + c * (r - r * r) - x * e2);
    }
    Ok(PgfCheck {
        xs: xs.to_vec(),
        residuals,
        asserted: dist.p_inf() == 0.0 && dist.tail() == 0.0,
    })
}

/// Both sides of the fixed-point mean identity
/// `mean = E[(1 - R(1-X))/X^2] / (E[1/X] - c)`, for comparison.
pub fn mean_identity(dist: &ExtDist, measure: &LambdaMeasure, c: f64) -> Result<(f64, f64)> {
    let e_inv = measure.mean_inv_x();
    if !e_inv.is_finite() || c >= e_inv {
        return Err(Error::Domain(format!(
            "mean identity requires c < E[1/X] < inf (c = {c}, E[1/X] = {e_inv})"
        )));
    }
    if dist.p_inf() > 0.0 || dist.tail() > 0.0 {
        return Err(Error::Domain(
            "mean identity requires a finite-mean distribution with no tail mass".into(),
        ));
    }
    let p = dist.masses();
    let n = dist.n();
    // 1 - R(1-u) = sum_n p_n (1 - (1-u)^n)
    let numerator = measure.expect(|u| {
        let mut s = 0.0;
        if u == 1.0 {
            s = p[1..].iter().sum();
        } else {
            let l = (-u).ln_1p();
            for k in 1..=n {
                if p[k] != 0.0 {
                    s += p[k] * (-f64::exp_m1(k as f64 * l));
                }
            }
        }
        s / (u * u)
    });
    Ok((dist.mean(), numerator / (e_inv - c)))
}

/// Self-convolution of the finite part, attributed up to `2N`, plus the
/// overflow/infinite masses. Used by the inversion cross-check.
pub fn self_convolution(mu: &ExtDist) -> (Vec<f64>, f64, f64) {
    let sc = self_convolve(mu);
    (sc.conv, sc.beyond, sc.inf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::LyKernel;

    fn star_kernel(c: f64, n: usize) -> LyKernel {
        let m = LambdaMeasure::atomic(vec![(1.0, 1.0)]).unwrap();
        LyKernel::build(&m, c, n).unwrap()
    }

    fn beta_kernel(alpha: f64, c: f64, n: usize) -> LyKernel {
        let m = LambdaMeasure::beta(alpha).unwrap();
        LyKernel::build(&m, c, n).unwrap()
    }

    #[test]
    fn g_map_fixes_delta_inf_without_full_collapse() {
        let kernel = beta_kernel(0.5, 1.0, 16);
        let mu = ExtDist::delta_inf(16, TailPolicy::Envelope);
        let out = g_map(&mu, &kernel).unwrap();
        assert_eq!(out.p_inf(), 1.0);
        assert_eq!(out.mass(1), 0.0);
    }

    #[test]
    fn g_map_delta_one_star() {
        let kernel = star_kernel(1.0, 8);
        let mu = ExtDist::delta_one(8, TailPolicy::FoldToN);
        let out = g_map(&mu, &kernel).unwrap();
        assert!((out.mass(2) - 0.5).abs() < 1e-15);
        assert!((out.mass(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn g_map_delta_one_general() {
        // W1 + W2 = 2 and lambda_2 = 1 for any probability measure
        let c = 0.7;
        let kernel = beta_kernel(0.5, c, 8);
        let mu = ExtDist::delta_one(8, TailPolicy::FoldToN);
        let out = g_map(&mu, &kernel).unwrap();
        assert!((out.mass(2) - c / (1.0 + c)).abs() < 1e-12);
        assert!((out.mass(1) - 1.0 / (1.0 + c)).abs() < 1e-12);
    }

    #[test]
    fn g_map_rejects_mismatched_support() {
        let kernel = star_kernel(1.0, 8);
        let mu = ExtDist::delta_one(16, TailPolicy::FoldToN);
        assert!(matches!(g_map(&mu, &kernel), Err(Error::InvalidArgument(_))));
        let tiny = star_kernel(1.0, 1);
        let mu = ExtDist::delta_one(1, TailPolicy::FoldToN);
        assert!(g_map(&mu, &tiny).is_err());
    }

    #[test]
    fn delta1_iterates_increase_and_converge_star() {
        // boundary regime: c = 1 = E[1/X] for the star measure
        let kernel = star_kernel(1.0, 64);
        let opts = SolverOptions { tol: 1e-12, max_iter: 20_000, ..Default::default() };
        let fp = fix_from_delta1(&kernel, &opts).unwrap();
        assert_eq!(fp.regime, Regime::Boundary);
        assert!(fp.monotone_violation <= 1e-10);
        assert_eq!(fp.dist.p_inf(), 0.0);
        let image = g_map(&fp.dist, &kernel).unwrap();
        assert!(image.tv(&fp.dist) <= 1e-10);
    }

    #[test]
    fn delta1_infinite_mean_regime_growth_bound() {
        // c > E[1/X]: per-iteration mean growth obeys the convolution bound
        // mean' >= 2q * mean + 1 - q with q = c/(c + E[1/X])
        let measure = LambdaMeasure::beta(0.5).unwrap();
        let c = 3.0;
        let kernel = LyKernel::build(&measure, c, 512).unwrap();
        assert_eq!(classify_regime(&measure, c), Regime::InfiniteMean);
        let q = c / (c + measure.mean_inv_x());
        let mut mu = ExtDist::delta_one(512, TailPolicy::FoldToN);
        let mut mean = mu.mean();
        for _ in 0..8 {
            mu = g_map(&mu, &kernel).unwrap();
            let next_mean = mu.mean();
            assert!(
                next_mean >= 2.0 * q * mean + 1.0 - q - 1e-9,
                "growth bound violated: {next_mean} after {mean}"
            );
            mean = next_mean;
        }
        assert!(mean / mu.masses().len() as f64 > 0.0); // support still truncated
    }

    #[test]
    fn fold_policies_route_the_overflow_differently() {
        // small truncation so the convolution genuinely overflows; with an
        // atom at 1 the infinite state is not absorbing, so the fold-to-inf
        // chain carries real mass at infinity while fold-to-n carries none
        let m = LambdaMeasure::atomic(vec![(1.0, 0.3), (0.5, 0.7)]).unwrap();
        let kernel = LyKernel::build(&m, 0.8, 16).unwrap();
        let mut opts = SolverOptions { policy: TailPolicy::FoldToN, ..Default::default() };
        let lo = fix_from_delta1(&kernel, &opts).unwrap();
        assert_eq!(lo.dist.p_inf(), 0.0);
        assert!(lo.upper.is_none());
        opts.policy = TailPolicy::FoldToInf;
        let hi = fix_from_delta1(&kernel, &opts).unwrap();
        assert!(hi.dist.p_inf() > 1e-12, "fold-to-inf chain lost its overflow");
        opts.policy = TailPolicy::Envelope;
        let env = fix_from_delta1(&kernel, &opts).unwrap();
        assert_eq!(env.dist.p_inf(), 0.0);
        assert!((env.upper.as_ref().unwrap().p_inf() - hi.dist.p_inf()).abs() < 1e-12);
        assert!(env.band > 0.0);
    }

    #[test]
    fn delta_inf_mass_at_infinity_formulas() {
        let m = LambdaMeasure::atomic(vec![(1.0, 0.3), (0.5, 0.7)]).unwrap();
        let opts = SolverOptions::default();

        let kernel = LyKernel::build(&m, 0.5, 128).unwrap();
        let fp = fix_from_delta_inf(&kernel, &opts).unwrap();
        assert!((fp.dist.p_inf() - 0.4).abs() <= 1e-8);
        assert!(fp.monotone_violation <= 1e-10);

        let kernel = LyKernel::build(&m, 0.2, 128).unwrap();
        let fp = fix_from_delta_inf(&kernel, &opts).unwrap();
        assert!(fp.dist.p_inf() <= 1e-10);
    }

    #[test]
    fn delta_inf_is_immediate_fixed_point_without_atom() {
        let kernel = beta_kernel(0.5, 1.0, 32);
        let fp = fix_from_delta_inf(&kernel, &SolverOptions::default()).unwrap();
        assert_eq!(fp.dist.p_inf(), 1.0);
        assert_eq!(fp.iterations, 1);
    }

    #[test]
    fn delta_inf_requires_dust() {
        let kernel = beta_kernel(1.5, 1.0, 16);
        assert!(matches!(
            fix_from_delta_inf(&kernel, &SolverOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inverse_t_recovers_deterministic_starts() {
        let kernel = beta_kernel(0.5, 1.0, 48);
        // delta_1: t[1] = (lambda_1 + c)/c = 1
        let d1 = ExtDist::delta_one(48, TailPolicy::FoldToN);
        let t = inverse_t(&d1, &kernel);
        assert!((t[1] - 1.0).abs() < 1e-14);
        assert!(t[2..].iter().all(|v| v.abs() < 1e-14));
        // a kernel row is the image of a deterministic start
        for i0 in [5usize, 17, 48] {
            let mut p = vec![0.0; 49];
            p[..=i0].copy_from_slice(&kernel.row(i0)[..=i0]);
            let row = ExtDist::from_parts(p, 0.0, 0.0, TailPolicy::FoldToN).unwrap();
            let t = inverse_t(&row, &kernel);
            for (k, v) in t.iter().enumerate().skip(1) {
                let expect = if k == i0 { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-10, "i0={i0} k={k} v={v}");
            }
        }
    }

    #[test]
    fn pgf_residual_hand_value_at_delta_one() {
        // X = 1, R(x) = x: residual reduces to c x (1 - x), nonzero because
        // delta_1 is not a fixed point
        let m = LambdaMeasure::atomic(vec![(1.0, 1.0)]).unwrap();
        let d1 = ExtDist::delta_one(8, TailPolicy::FoldToN);
        for (c, x) in [(1.0, 0.5), (0.5, 0.5), (1.0, 0.3)] {
            let check = pgf_residual(&d1, &m, c, &[x]).unwrap();
            assert!(
                (check.residuals[0] - c * x * (1.0 - x)).abs() < 1e-12,
                "c={c} x={x} residual={}",
                check.residuals[0]
            );
            assert!(check.asserted);
        }
    }

    #[test]
    fn pgf_residual_flags_mass_at_infinity() {
        let m = LambdaMeasure::atomic(vec![(1.0, 1.0)]).unwrap();
        let half_inf = {
            let mut p = vec![0.0; 9];
            p[1] = 0.5;
            ExtDist::from_parts(p, 0.5, 0.0, TailPolicy::FoldToN).unwrap()
        };
        let check = pgf_residual(&half_inf, &m, 1.0, &[0.3, 0.7]).unwrap();
        assert!(!check.asserted);
        let no_dust = LambdaMeasure::beta(1.5).unwrap();
        assert!(pgf_residual(&half_inf, &no_dust, 1.0, &[0.5]).is_err());
    }

    #[test]
    fn mean_identity_hand_values() {
        // delta_1 with X = 1, c = 0.5: lhs 1, rhs E[1/X^2-type] / (1 - 0.5) = 2,
        // correctly exposing delta_1 as a non-fixed point
        let m = LambdaMeasure::atomic(vec![(1.0, 1.0)]).unwrap();
        let d1 = ExtDist::delta_one(8, TailPolicy::FoldToN);
        let (lhs, rhs) = mean_identity(&d1, &m, 0.5).unwrap();
        assert_eq!(lhs, 1.0);
        assert!((rhs - 2.0).abs() < 1e-12);
        assert!(mean_identity(&d1, &m, 1.5).is_err());
    }
}
