//! Exact law of the block count at an independent exponential time.
//!
//! Write `L_i(Y)` for the number of coalescent blocks left at time
//! `Y ~ Exp(c)` when starting from `i` blocks. The embedded jump chain gives
//! an exact forward recursion: the count sits at `i` until either the killing
//! clock fires (probability `c / (lambda_i + c)`) or a merger fires, jumping
//! to `n < i` with probability proportional to `C(i, i-n+1) lambda_{i,i-n+1}`.
//! Rows are built in dependency order, so construction is single-threaded;
//! the finished kernel is immutable and freely shared.

use crate::error::{Error, Result};
use crate::measure::LambdaMeasure;
use crate::special::ln_choose;

/// Downward jump rates of the block-counting chain.
///
/// `rate(i, n) = C(i, i-n+1) * lambda_{i, i-n+1}` is the total rate of jumps
/// from `i` blocks to `n` blocks (1 <= n < i); `lambda(i)` is the row total.
/// Accumulated in log space and exponentiated once per entry.
#[derive(Clone, Debug)]
pub struct Transitions {
    rates: Vec<Vec<f64>>, // rates[i][n] for 1 <= n < i, rates[i][0] unused
    totals: Vec<f64>,     // totals[i] = lambda_i, totals[0] unused
}

impl Transitions {
    pub fn build(measure: &LambdaMeasure, n_max: usize) -> Self {
        let mut rates = Vec::with_capacity(n_max + 1);
        let mut totals = vec![0.0; n_max + 1];
        rates.push(Vec::new()); // i = 0
        if n_max >= 1 {
            rates.push(Vec::new()); // i = 1: no mergers
        }
        for i in 2..=n_max {
            let mut row = vec![0.0; i];
            let mut total = 0.0;
            for n in 1..i {
                let k = (i - n + 1) as u64;
                let w = (ln_choose(i as u64, k) + measure.ln_lambda_bk_unchecked(i as u64, k)).exp();
                row[n] = w;
                total += w;
            }
            rates.push(row);
            totals[i] = total;
        }
        Transitions { rates, totals }
    }

    pub fn n_max(&self) -> usize {
        self.rates.len() - 1
    }

    /// Jump rate from `i` blocks to `n` blocks.
    pub fn rate(&self, i: usize, n: usize) -> f64 {
        debug_assert!(n >= 1 && n < i);
        self.rates[i][n]
    }

    /// Total merger rate with `i` blocks (`lambda_1 = 0`).
    pub fn lambda(&self, i: usize) -> f64 {
        self.totals[i]
    }
}

/// Distribution of the block count starting from infinitely many blocks:
/// under dust the count stays infinite until the full-collapse event (rate
/// `P(X=1)`) sends it to 1, so `L_inf(Y)` lives on `{1, inf}`.
#[derive(Clone, Copy, Debug)]
pub struct InfRow {
    pub p_one: f64,
    pub p_inf: f64,
}

/// Triangular stochastic kernel `K[i][k] = P(L_i(Y) = k)` for `1 <= k <= i <= N`,
/// plus the symbolic infinite row when the measure has dust.
#[derive(Clone, Debug)]
pub struct LyKernel {
    measure: LambdaMeasure,
    c: f64,
    n: usize,
    rows: Vec<Vec<f64>>, // rows[i] has length i+1, entry [k] for 1 <= k <= i
    row_means: Vec<f64>,
    inf_row: Option<InfRow>,
    transitions: Transitions,
    /// Largest mass discarded by the underflow cutoff across all rows.
    renorm_delta: f64,
}

const UNDERFLOW_CUTOFF: f64 = 1e-300;

impl LyKernel {
    /// Build all rows up to `n` by the forward recursion (O(n^3)).
    pub fn build(measure: &LambdaMeasure, c: f64, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument(format!("kernel size must be >= 1, got {n}")));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("rate c must be positive, got {c}")));
        }
        let transitions = Transitions::build(measure, n);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        rows.push(Vec::new()); // i = 0 placeholder
        rows.push(vec![0.0, 1.0]); // L_1(Y) = 1: no mergers from a single block
        let mut renorm_delta = 0.0f64;
        for i in 2..=n {
            let denom = transitions.lambda(i) + c;
            let mut row = vec![0.0; i + 1];
            row[i] = c / denom;
            for k in 1..i {
                let mut acc = 0.0;
                for m in k..i {
                    let w = transitions.rate(i, m);
                    if w > 0.0 {
                        acc += w * rows[m][k];
                    }
                }
                row[k] = acc / denom;
            }
            // flush denormal-scale entries and renormalize the row
            let mut dropped = 0.0;
            for p in row.iter_mut() {
                if *p != 0.0 && *p < UNDERFLOW_CUTOFF {
                    dropped += *p;
                    *p = 0.0;
                }
            }
            if dropped > 0.0 {
                renorm_delta = renorm_delta.max(dropped);
                let total: f64 = row.iter().sum();
                for p in row.iter_mut() {
                    *p /= total;
                }
            }
            rows.push(row);
        }
        let row_means = rows
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, p)| k as f64 * p).sum())
            .collect();
        let inf_row = if measure.has_dust() {
            let rho = measure.atom_at_one();
            Some(InfRow { p_one: rho / (rho + c), p_inf: c / (rho + c) })
        } else {
            None
        };
        Ok(LyKernel {
            measure: measure.clone(),
            c,
            n,
            rows,
            row_means,
            inf_row,
            transitions,
            renorm_delta,
        })
    }

    pub fn measure(&self) -> &LambdaMeasure {
        &self.measure
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `P(L_i(Y) = k)`; zero for `k > i`.
    pub fn prob(&self, i: usize, k: usize) -> f64 {
        debug_assert!(i >= 1 && i <= self.n && k >= 1);
        if k > i {
            0.0
        } else {
            self.rows[i][k]
        }
    }

    /// Row `i` as a slice indexed by count (`row(i)[k]`, entries `1..=i`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// `E[L_i(Y)]`.
    pub fn row_mean(&self, i: usize) -> f64 {
        self.row_means[i]
    }

    /// Total merger rate `lambda_i` as used in the kernel denominators.
    pub fn lambda(&self, i: usize) -> f64 {
        self.transitions.lambda(i)
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    /// Distribution of `L_inf(Y)` on `{1, inf}`; domain error without dust,
    /// where an infinite block count does not persist.
    pub fn inf_row(&self) -> Result<InfRow> {
        self.inf_row.ok_or_else(|| {
            Error::Domain("the infinite row requires a dust measure (E[1/X] < inf)".into())
        })
    }

    pub fn renorm_delta(&self) -> f64 {
        self.renorm_delta
    }

    /// Mean increments `b_i = E[L_{i+1}(Y)] - E[L_i(Y)]` for `1 <= i <= i_max`.
    pub fn b_sequence(&self, i_max: usize) -> Result<Vec<f64>> {
        if i_max >= self.n {
            return Err(Error::InvalidArgument(format!(
                "b_sequence needs i_max < N (i_max = {i_max}, N = {})",
                self.n
            )));
        }
        Ok((1..=i_max).map(|i| self.row_means[i + 1] - self.row_means[i]).collect())
    }

    /// CSV export: a comment header carrying `c` and the measure JSON, then
    /// one row per starting count with columns `k = 1..=N`.
    pub fn to_csv(&self) -> String {
        let measure_json = serde_json::to_string(&self.measure).expect("measure serializes");
        let mut out = String::new();
        out.push_str(&format!("# c={:.16e} N={} measure={}\n", self.c, self.n, measure_json));
        out.push('i');
        for k in 1..=self.n {
            out.push_str(&format!(",k{k}"));
        }
        out.push('\n');
        for i in 1..=self.n {
            out.push_str(&i.to_string());
            for k in 1..=self.n {
                out.push_str(&format!(",{:.16e}", self.prob(i, k)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> LambdaMeasure {
        LambdaMeasure::atomic(vec![(1.0, 1.0)]).unwrap()
    }

    #[test]
    fn star_kernel_rows() {
        // only the full merger has positive rate, racing Exp(1) against Exp(c)
        let kernel = LyKernel::build(&star(), 1.0, 8).unwrap();
        for i in 2..=8 {
            assert!((kernel.prob(i, i) - 0.5).abs() < 1e-15);
            assert!((kernel.prob(i, 1) - 0.5).abs() < 1e-15);
            for k in 2..i {
                assert_eq!(kernel.prob(i, k), 0.0);
            }
        }
        assert_eq!(kernel.prob(1, 1), 1.0);
    }

    #[test]
    fn rows_sum_to_one_and_diagonal_identity() {
        let m = LambdaMeasure::beta(0.5).unwrap();
        let kernel = LyKernel::build(&m, 1.0, 64).unwrap();
        for i in 1..=64 {
            let sum: f64 = kernel.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {i} sums to {sum}");
            let diag = kernel.prob(i, i) * (kernel.lambda(i) + kernel.c());
            assert!((diag - kernel.c()).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_stochastically_monotone() {
        let m = LambdaMeasure::beta(0.5).unwrap();
        let kernel = LyKernel::build(&m, 0.7, 48).unwrap();
        for i in 1..48 {
            let mut cdf_lo = 0.0;
            let mut cdf_hi = 0.0;
            for k in 1..=i {
                cdf_lo += kernel.prob(i, k);
                cdf_hi += kernel.prob(i + 1, k);
                assert!(cdf_hi <= cdf_lo + 1e-12, "monotonicity fails at i={i}, m={k}");
            }
        }
    }

    #[test]
    fn star_b_sequence_is_constant_half() {
        // E[L_i(Y)] = (i+1)/2 at c = 1, so every increment is 1/2, matching
        // the limit c / (E[1/X] + c) exactly
        let kernel = LyKernel::build(&star(), 1.0, 32).unwrap();
        let b = kernel.b_sequence(30).unwrap();
        for (i, bi) in b.iter().enumerate() {
            assert!((bi - 0.5).abs() < 1e-13, "b_{} = {}", i + 1, bi);
        }
        assert!(kernel.b_sequence(32).is_err());
    }

    #[test]
    fn b_sequence_lower_bound_beta() {
        let m = LambdaMeasure::beta(0.5).unwrap();
        let c = 1.0;
        let kernel = LyKernel::build(&m, c, 128).unwrap();
        let bound = c / (c + m.mean_inv_x());
        let b = kernel.b_sequence(127).unwrap();
        for (i, bi) in b.iter().enumerate() {
            assert!(*bi >= bound - 1e-12 && *bi <= 1.0, "b_{} = {}", i + 1, bi);
        }
        // approach to the limit from above, shrinking with i
        assert!((b[99] - bound).abs() < (b[9] - bound).abs());
    }

    #[test]
    fn inf_row_two_state_race() {
        let m = LambdaMeasure::atomic(vec![(1.0, 0.3), (0.5, 0.7)]).unwrap();
        let kernel = LyKernel::build(&m, 0.5, 4).unwrap();
        let inf = kernel.inf_row().unwrap();
        assert!((inf.p_one - 0.3 / 0.8).abs() < 1e-15);
        assert!((inf.p_inf - 0.5 / 0.8).abs() < 1e-15);
        assert!((inf.p_one + inf.p_inf - 1.0).abs() < 1e-15);

        let no_dust = LambdaMeasure::beta(1.5).unwrap();
        let kernel = LyKernel::build(&no_dust, 1.0, 4).unwrap();
        assert!(kernel.inf_row().is_err());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(LyKernel::build(&star(), 1.0, 0).is_err());
        assert!(LyKernel::build(&star(), 0.0, 4).is_err());
        assert!(LyKernel::build(&star(), -1.0, 4).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let kernel = LyKernel::build(&star(), 1.0, 3).unwrap();
        let csv = kernel.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# c="));
        assert!(header.contains(r#"{"kind":"atomic""#));
        assert_eq!(lines.next().unwrap(), "i,k1,k2,k3");
        assert_eq!(csv.lines().count(), 5);
    }
}
