//! Probability distributions on `{1, ..., N} + {inf}` with explicit
//! truncation-tail accounting.
//!
//! The fixed-point theory lives on all of the positive integers plus
//! infinity; computation truncates at `N`. Mass known to sit beyond `N` but
//! not yet attributed to a specific count is kept in `tail`. Folding it to
//! `N` or to `inf` gives the two projections that bracket every monotone
//! functional, which is what the `Envelope` policy reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do with finite mass displaced beyond the truncation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    /// Excess mass behaves like count `N` (stochastic lower bracket).
    FoldToN,
    /// Excess mass behaves like count `inf` (stochastic upper bracket).
    FoldToInf,
    /// Track both brackets; report the `FoldToN` result plus the gap.
    Envelope,
}

/// Distribution on `{1..N} + {inf}` with an unattributed beyond-`N` mass.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtDist {
    // p[0] is unused and zero; p[k] is the mass at count k
    p: Vec<f64>,
    p_inf: f64,
    tail: f64,
    policy: TailPolicy,
}

/// Entries this far below zero are treated as round-off and clipped;
/// anything more negative is a numerical-integrity failure.
const NEG_MASS_TOL: f64 = -1e-14;
/// Normalization slack for user-supplied distributions.
const NORM_TOL: f64 = 1e-12;

impl ExtDist {
    /// Point mass at 1.
    pub fn delta_one(n: usize, policy: TailPolicy) -> Self {
        let mut p = vec![0.0; n + 1];
        p[1] = 1.0;
        ExtDist { p, p_inf: 0.0, tail: 0.0, policy }
    }

    /// Point mass at infinity.
    pub fn delta_inf(n: usize, policy: TailPolicy) -> Self {
        ExtDist { p: vec![0.0; n + 1], p_inf: 1.0, tail: 0.0, policy }
    }

    /// Build from raw parts; `p` is indexed by count with `p[0]` ignored.
    ///
    /// Round-off negatives above `-1e-14` are zeroed (with renormalization);
    /// larger negative masses or a total off 1 by more than 1e-12 are errors.
    pub fn from_parts(mut p: Vec<f64>, mut p_inf: f64, mut tail: f64, policy: TailPolicy) -> Result<Self> {
        assert!(p.len() >= 2, "support must contain at least count 1");
        p[0] = 0.0;
        let mut clipped = false;
        for v in p.iter_mut().chain([&mut p_inf, &mut tail]) {
            if *v < 0.0 {
                if *v < NEG_MASS_TOL {
                    return Err(Error::Integrity(format!(
                        "negative probability mass {v} below the round-off floor"
                    )));
                }
                *v = 0.0;
                clipped = true;
            }
        }
        let total: f64 = p.iter().sum::<f64>() + p_inf + tail;
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "distribution mass sums to {total}, expected 1 within {NORM_TOL}"
            )));
        }
        if clipped {
            for v in p.iter_mut() {
                *v /= total;
            }
            p_inf /= total;
            tail /= total;
        }
        Ok(ExtDist { p, p_inf, tail, policy })
    }

    /// Construct without the normalization check, dividing by the actual
    /// total instead. For internal maps whose output is a probability
    /// distribution up to round-off.
    pub(crate) fn normalized(mut p: Vec<f64>, mut p_inf: f64, mut tail: f64, policy: TailPolicy) -> Self {
        p[0] = 0.0;
        let total: f64 = p.iter().sum::<f64>() + p_inf + tail;
        debug_assert!((total - 1.0).abs() < 1e-9, "normalized() got total {total}");
        for v in p.iter_mut() {
            *v /= total;
        }
        p_inf /= total;
        tail /= total;
        ExtDist { p, p_inf, tail, policy }
    }

    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    /// Mass at count `k` (`1 <= k <= N`).
    pub fn mass(&self, k: usize) -> f64 {
        self.p[k]
    }

    /// Masses indexed by count; entry 0 is zero.
    pub fn masses(&self) -> &[f64] {
        &self.p
    }

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn policy(&self) -> TailPolicy {
        self.policy
    }

    pub fn with_policy(mut self, policy: TailPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.p.iter().sum::<f64>() + self.p_inf + self.tail
    }

    /// Finite-part mean `sum_k k p[k]`; infinite when mass sits at `inf`, or
    /// when displaced mass is destined for `inf` under `FoldToInf`.
    pub fn mean(&self) -> f64 {
        if self.p_inf > 0.0 || (self.tail > 0.0 && self.policy == TailPolicy::FoldToInf) {
            return f64::INFINITY;
        }
        self.p.iter().enumerate().map(|(k, v)| k as f64 * v).sum()
    }

    /// `P(count <= m)` counting only attributed finite mass (tail and `inf`
    /// both sit above every `m <= N`).
    pub fn cdf(&self, m: usize) -> f64 {
        self.p[1..=m.min(self.n())].iter().sum()
    }

    /// Cumulative sums of the finite part, index by count.
    pub fn cdf_vec(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p.len()];
        let mut acc = 0.0;
        for (k, v) in self.p.iter().enumerate().skip(1) {
            acc += v;
            out[k] = acc;
        }
        out
    }

    /// Probability generating function `sum_k p[k] x^k` for `x` in [0, 1);
    /// at `x = 1` returns `1 - p_inf`.
    pub fn pgf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("pgf argument {x} outside [0, 1]")));
        }
        if x == 1.0 {
            return Ok(1.0 - self.p_inf);
        }
        let mut acc = 0.0;
        for &v in self.p.iter().skip(1).rev() {
            acc = acc * x + v;
        }
        Ok(acc * x)
    }

    /// Total variation distance on `{1..N}` + tail bucket + `inf`.
    pub fn tv(&self, other: &ExtDist) -> f64 {
        assert_eq!(self.n(), other.n(), "tv requires equal truncation points");
        let sum: f64 =
            self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum::<f64>();
        0.5 * (sum + (self.tail - other.tail).abs() + (self.p_inf - other.p_inf).abs())
    }

    /// Attribute the tail to count `N`.
    pub fn fold_to_n(&self) -> ExtDist {
        let mut out = self.clone();
        let n = out.n();
        out.p[n] += out.tail;
        out.tail = 0.0;
        out.policy = TailPolicy::FoldToN;
        out
    }

    /// Attribute the tail to `inf`.
    pub fn fold_to_inf(&self) -> ExtDist {
        let mut out = self.clone();
        out.p_inf += out.tail;
        out.tail = 0.0;
        out.policy = TailPolicy::FoldToInf;
        out
    }

    /// Largest pointwise CDF excess of `self` over `other` on `{1..N}`.
    ///
    /// `self` stochastically dominates `other` exactly when this is <= 0
    /// (up to round-off): domination means a pointwise smaller CDF.
    pub fn max_cdf_excess_over(&self, other: &ExtDist) -> f64 {
        assert_eq!(self.n(), other.n());
        let mut acc_self = 0.0;
        let mut acc_other = 0.0;
        let mut worst = f64::NEG_INFINITY;
        for k in 1..=self.n() {
            acc_self += self.p[k];
            acc_other += other.p[k];
            worst = worst.max(acc_self - acc_other);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(masses: &[(usize, f64)], p_inf: f64, tail: f64) -> ExtDist {
        let n = 8;
        let mut p = vec![0.0; n + 1];
        for &(k, v) in masses {
            p[k] = v;
        }
        ExtDist::from_parts(p, p_inf, tail, TailPolicy::Envelope).unwrap()
    }

    #[test]
    fn construction_validates_mass() {
        let mut p = vec![0.0; 9];
        p[1] = 0.6;
        assert!(ExtDist::from_parts(p.clone(), 0.0, 0.0, TailPolicy::FoldToN).is_err());
        p[2] = 0.4;
        assert!(ExtDist::from_parts(p.clone(), 0.0, 0.0, TailPolicy::FoldToN).is_ok());
        // round-off negative is clipped, a real negative rejected
        p[3] = -5e-15;
        assert!(ExtDist::from_parts(p.clone(), 0.0, 0.0, TailPolicy::FoldToN).is_ok());
        p[3] = -1e-12;
        assert!(matches!(
            ExtDist::from_parts(p, 0.0, 0.0, TailPolicy::FoldToN),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn mean_rules() {
        let d = dist(&[(2, 0.5), (4, 0.5)], 0.0, 0.0);
        assert_eq!(d.mean(), 3.0);
        assert_eq!(dist(&[(2, 0.5)], 0.5, 0.0).mean(), f64::INFINITY);
        let tailed = dist(&[(2, 0.9)], 0.0, 0.1);
        assert!((tailed.mean() - 1.8).abs() < 1e-15); // finite part only under Envelope
        assert_eq!(tailed.with_policy(TailPolicy::FoldToInf).mean(), f64::INFINITY);
    }

    #[test]
    fn pgf_values() {
        let d = ExtDist::delta_one(8, TailPolicy::FoldToN);
        assert_eq!(d.pgf(0.37).unwrap(), 0.37);
        assert_eq!(d.pgf(0.0).unwrap(), 0.0);
        let u = dist(&[(1, 0.5), (2, 0.5)], 0.0, 0.0);
        assert!((u.pgf(0.5).unwrap() - 3.0 / 8.0).abs() < 1e-15);
        let i = dist(&[(1, 0.7)], 0.3, 0.0);
        assert_eq!(i.pgf(1.0).unwrap(), 0.7);
        assert!(i.pgf(1.5).is_err());
        assert!(i.pgf(-0.1).is_err());
    }

    #[test]
    fn folds_move_tail() {
        let d = dist(&[(1, 0.8)], 0.1, 0.1);
        let lo = d.fold_to_n();
        assert_eq!(lo.tail(), 0.0);
        assert!((lo.mass(8) - 0.1).abs() < 1e-15);
        let hi = d.fold_to_inf();
        assert!((hi.p_inf() - 0.2).abs() < 1e-15);
        assert!((d.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tv_and_dominance() {
        let a = dist(&[(1, 1.0)], 0.0, 0.0);
        let b = dist(&[(2, 1.0)], 0.0, 0.0);
        assert!((a.tv(&b) - 1.0).abs() < 1e-15);
        // b sits above a: its CDF never exceeds a's
        assert!(b.max_cdf_excess_over(&a) <= 0.0);
        assert!(a.max_cdf_excess_over(&b) >= 1.0 - 1e-15);
    }
}
