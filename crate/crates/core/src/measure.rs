//! The characterizing measure of a multiple-merger coalescent.
//!
//! A probability measure `Lambda` on (0, 1] drives the coalescent: when there
//! are `b` blocks, every k-tuple merges at rate
//! `lambda_{b,k} = int x^{k-2} (1-x)^{b-k} Lambda(dx)`.
//! Two families are supported, covering every case exercised by the rest of
//! the crate:
//!
//! * `Beta { alpha }` with `alpha` in (0, 2), meaning `Lambda = Beta(2-alpha, alpha)`,
//!   whose merger rates have a beta-function closed form;
//! * `Atomic { atoms }`, a finite mixture of point masses on (0, 1], whose
//!   moments are weighted sums.
//!
//! An atom at 0 (the Kingman component) is rejected at construction:
//! `E[1/X]` is infinite there and none of the downstream theory applies.
//!
//! `Lambda` must be a probability measure. A general finite measure drives
//! the same process up to a deterministic time change: dividing `Lambda` by
//! its total mass multiplies every merger rate, hence rescales time, by
//! that mass. Callers with a non-normalized measure should normalize it and
//! rescale `c` by the same factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{ln_beta, ln_choose, one_minus_pow};

/// Absolute tolerance used by the adaptive quadrature backing Beta-family
/// expectations.
pub const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-13;
const QUAD_MAX_PANELS: usize = 30_000;

/// Probability measure on (0, 1] characterizing the coalescent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LambdaMeasure {
    Beta { alpha: f64 },
    Atomic { atoms: Vec<(f64, f64)> },
}

impl LambdaMeasure {
    /// Beta(2-alpha, alpha) measure, `alpha` in (0, 2).
    pub fn beta(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "beta parameter must lie in (0, 2), got {alpha}"
            )));
        }
        Ok(LambdaMeasure::Beta { alpha })
    }

    /// Finite atomic mixture: `atoms` is a list of `(location, weight)` pairs
    /// with locations in (0, 1] and weights summing to 1 within 1e-12.
    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("atomic measure needs at least one atom".into()));
        }
        for &(x, w) in &atoms {
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "atom location {x} outside (0, 1] (an atom at 0 is not supported)"
                )));
            }
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("atom weight {w} must be positive")));
            }
        }
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "atom weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(LambdaMeasure::Atomic { atoms })
    }

    /// Validate a deserialized measure (same checks as the constructors).
    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaMeasure::Beta { alpha } => Self::beta(*alpha).map(|_| ()),
            LambdaMeasure::Atomic { atoms } => Self::atomic(atoms.clone()).map(|_| ()),
        }
    }

    /// E[1/X]; `+inf` for Beta with alpha >= 1.
    pub fn mean_inv_x(&self) -> f64 {
        match self {
            LambdaMeasure::Beta { alpha } => {
                if *alpha < 1.0 {
                    1.0 / (1.0 - alpha)
                } else {
                    f64::INFINITY
                }
            }
            LambdaMeasure::Atomic { atoms } => atoms.iter().map(|&(x, w)| w / x).sum(),
        }
    }

    /// Whether the coalescent keeps dust: E[1/X] < inf.
    pub fn has_dust(&self) -> bool {
        self.mean_inv_x().is_finite()
    }

    /// P(X = 1): the rate at which every block merges into one.
    pub fn atom_at_one(&self) -> f64 {
        match self {
            LambdaMeasure::Beta { .. } => 0.0,
            LambdaMeasure::Atomic { atoms } => {
                atoms.iter().filter(|&&(x, _)| x == 1.0).map(|&(_, w)| w).sum()
            }
        }
    }

    /// `ln lambda_{b,k}`; `-inf` encodes a zero rate.
    pub(crate) fn ln_lambda_bk_unchecked(&self, b: u64, k: u64) -> f64 {
        match self {
            LambdaMeasure::Beta { alpha } => {
                ln_beta(k as f64 - alpha, (b - k) as f64 + alpha) - ln_beta(2.0 - alpha, *alpha)
            }
            LambdaMeasure::Atomic { atoms } => {
                // log-sum-exp over atoms; 0^0 = 1 by the usual convention
                let pow_ln = |e: u64, ln_base: f64| if e == 0 { 0.0 } else { e as f64 * ln_base };
                let mut max = f64::NEG_INFINITY;
                let terms: Vec<f64> = atoms
                    .iter()
                    .map(|&(x, w)| {
                        let t = w.ln() + pow_ln(k - 2, x.ln()) + pow_ln(b - k, (-x).ln_1p());
                        if t > max {
                            max = t;
                        }
                        t
                    })
                    .collect();
                if max == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
            }
        }
    }

    /// Merger rate of a given k-tuple among b blocks:
    /// `int x^{k-2} (1-x)^{b-k} Lambda(dx)`.
    pub fn lambda_bk(&self, b: u64, k: u64) -> Result<f64> {
        if b < 2 || k < 2 || k > b {
            return Err(Error::InvalidArgument(format!(
                "lambda_bk needs 2 <= k <= b, got b={b}, k={k}"
            )));
        }
        Ok(self.ln_lambda_bk_unchecked(b, k).exp())
    }

    /// Expectation `int f(x) Lambda(dx)` using the crate's quadrature for the
    /// Beta family (forced split at 1/2, right half mirrored so the endpoint
    /// singularity sits at 0 where bisection has unlimited resolution).
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.expect_tol(f, QUAD_ABS_TOL)
    }

    /// Same as [`expect`](Self::expect) with an explicit absolute tolerance.
    pub fn expect_tol<F: Fn(f64) -> f64>(&self, f: F, abs_tol: f64) -> f64 {
        match self {
            LambdaMeasure::Atomic { atoms } => atoms.iter().map(|&(x, w)| w * f(x)).sum(),
            LambdaMeasure::Beta { alpha } => {
                let a = *alpha;
                let ln_norm = ln_beta(2.0 - a, a);
                let dens_ln = move |x: f64, one_minus_x: f64| {
                    (1.0 - a) * x.ln() + (a - 1.0) * one_minus_x.ln() - ln_norm
                };
                let left = quad::integrate(
                    |x| f(x) * dens_ln(x, 1.0 - x).exp(),
                    0.0,
                    0.5,
                    abs_tol / 2.0,
                    QUAD_REL_TOL,
                    QUAD_MAX_PANELS,
                );
                let right = quad::integrate(
                    |u| f(1.0 - u) * dens_ln(1.0 - u, u).exp(),
                    0.0,
                    0.5,
                    abs_tol / 2.0,
                    QUAD_REL_TOL,
                    QUAD_MAX_PANELS,
                );
                left.value + right.value
            }
        }
    }

    /// `E[(1 - (1-X)^a) / X^2]`, strictly increasing in `a` on (0, 1] with
    /// value `E[1/X]` at `a = 1`. Requires dust.
    pub fn psi(&self, a: f64) -> Result<f64> {
        if !self.has_dust() {
            return Err(Error::Domain("psi requires a dust measure (E[1/X] < inf)".into()));
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidArgument(format!("psi exponent must lie in (0, 1], got {a}")));
        }
        if a == 1.0 {
            return Ok(self.mean_inv_x());
        }
        Ok(self.expect(|x| one_minus_pow(x, a) / (x * x)))
    }

    /// `E[(1-X)^j / X]` in closed form; `+inf` without dust.
    pub fn survival_moment(&self, j: u64) -> f64 {
        match self {
            LambdaMeasure::Beta { alpha } => {
                if *alpha >= 1.0 {
                    f64::INFINITY
                } else {
                    (ln_beta(1.0 - alpha, j as f64 + alpha) - ln_beta(2.0 - alpha, *alpha)).exp()
                }
            }
            LambdaMeasure::Atomic { atoms } => atoms
                .iter()
                .map(|&(x, w)| if x == 1.0 && j > 0 { 0.0 } else { w * (1.0 - x).powi(j as i32) / x })
                .sum(),
        }
    }

    /// `E[(1 - (1-X)^n) / X^2]`; `+inf` when the measure has no dust.
    pub fn phi_n(&self, n: u64) -> f64 {
        if !self.has_dust() {
            return f64::INFINITY;
        }
        self.expect(|x| one_minus_pow(x, n as f64) / (x * x))
    }

    /// The unique exponent `a` in (0, 1) with `psi(a) = c`, by bisection to
    /// absolute tolerance 1e-12. Requires `0 < c < E[1/X] < inf`.
    pub fn alpha_c(&self, c: f64) -> Result<f64> {
        let mean_inv = self.mean_inv_x();
        if !mean_inv.is_finite() {
            return Err(Error::Domain("alpha_c requires a dust measure".into()));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha_c requires c > 0, got {c}")));
        }
        if c >= mean_inv {
            return Err(Error::Domain(format!(
                "no root in (0,1): c = {c} >= E[1/X] = {mean_inv}"
            )));
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.psi(mid)? < c {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Triangular table of merger rates `lambda_{b,k}` with per-b totals.
#[derive(Clone, Debug)]
pub struct RateTable {
    b_max: u64,
    // row b (2 <= b <= b_max) holds lambda_{b,k} for k = 2..=b
    rows: Vec<Vec<f64>>,
    // total merger rate for 1 <= b <= b_max; totals[0] unused, totals[1] = 0
    totals: Vec<f64>,
}

impl RateTable {
    /// Build the full table; `C(b,k) * lambda_{b,k}` products are accumulated
    /// in log space so b in the thousands stays finite.
    pub fn build(measure: &LambdaMeasure, b_max: u64) -> Result<Self> {
        if b_max < 2 {
            return Err(Error::InvalidArgument(format!("b_max must be >= 2, got {b_max}")));
        }
        let mut rows = Vec::with_capacity((b_max - 1) as usize);
        let mut totals = vec![0.0; (b_max + 1) as usize];
        for b in 2..=b_max {
            let mut row = Vec::with_capacity((b - 1) as usize);
            let mut total = 0.0;
            for k in 2..=b {
                let ln_rate = measure.ln_lambda_bk_unchecked(b, k);
                row.push(ln_rate.exp());
                total += (ln_choose(b, k) + ln_rate).exp();
            }
            rows.push(row);
            totals[b as usize] = total;
        }
        Ok(RateTable { b_max, rows, totals })
    }

    pub fn b_max(&self) -> u64 {
        self.b_max
    }

    /// `lambda_{b,k}` for 2 <= k <= b <= b_max.
    pub fn bk(&self, b: u64, k: u64) -> f64 {
        assert!(b >= 2 && k >= 2 && k <= b && b <= self.b_max, "rate table index (b={b}, k={k})");
        self.rows[(b - 2) as usize][(k - 2) as usize]
    }

    /// Total merger rate `lambda_b = sum_k C(b,k) lambda_{b,k}` (0 for b = 1).
    pub fn total(&self, b: u64) -> f64 {
        assert!(b >= 1 && b <= self.b_max);
        self.totals[b as usize]
    }

    /// Largest violation of `lambda_{b,k} = lambda_{b+1,k} + lambda_{b+1,k+1}`
    /// over the table interior.
    pub fn max_consistency_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for b in 2..self.b_max {
            for k in 2..=b {
                let gap = (self.bk(b, k) - self.bk(b + 1, k) - self.bk(b + 1, k + 1)).abs();
                worst = worst.max(gap);
            }
        }
        worst
    }
}
