//! Gillespie simulation of the full nested coalescent.
//!
//! State: the surviving species, each carrying a lineage count in
//! `{1, 2, ...} + {inf}`. Two event families compete:
//!
//! * species deaths, total rate `c * S`: the dying label's lineages merge
//!   into a uniformly chosen surviving label (counts add, `inf` absorbing);
//!   when a death fires while exactly `m` species survive, the `m` counts
//!   just before the merger are recorded and the run stops;
//! * lineage mergers inside a species with `b` finite lineages, rate
//!   `lambda_b`: the merger size `k` is drawn proportional to
//!   `C(b,k) lambda_{b,k}` and the count drops to `b - k + 1`.
//!
//! Under dust a species with infinitely many lineages changes count only at
//! a full collapse (rate `P(X=1)`, new count 1), so the infinite initial
//! condition is simulated exactly with a symbolic `inf`.
//!
//! Scheduling uses one aggregate exponential clock with proportional
//! selection; per-species rates live in a Fenwick tree so selection and
//! updates are O(log S). Replicates draw from counter-split streams of one
//! seeded generator and are reduced in replicate order, so parallel and
//! serial runs agree bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::ExtDist;
use crate::error::{Error, Result};
use crate::measure::LambdaMeasure;
use crate::special::ln_choose;

/// Initial lineage count per species.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitCondition {
    One,
    Infinite,
}

/// A lineage count: finite, or symbolically infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Count {
    Finite(u32),
    Inf,
}

impl Count {
    pub fn is_finite(self) -> bool {
        matches!(self, Count::Finite(_))
    }

    /// CSV encoding: the number, or the literal `inf`.
    pub fn to_field(self) -> String {
        match self {
            Count::Finite(n) => n.to_string(),
            Count::Inf => "inf".to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    /// Initial number of species.
    pub s: usize,
    /// Record the counts just before the species count drops below `m`.
    pub m: usize,
    pub c: f64,
    pub measure: LambdaMeasure,
    pub init: InitCondition,
    pub replicates: usize,
    pub seed: u64,
    /// Largest finite count the lazy rate table may grow to.
    pub b_cap: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::InvalidArgument(format!("need s >= 2 species, got {}", self.s)));
        }
        if self.m < 1 || self.m > self.s {
            return Err(Error::InvalidArgument(format!(
                "target species count m = {} outside [1, s = {}]",
                self.m, self.s
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!("rate c must be positive, got {}", self.c)));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidArgument("need at least one replicate".into()));
        }
        self.measure.validate()?;
        if self.init == InitCondition::Infinite && !self.measure.has_dust() {
            return Err(Error::Domain(
                "the infinite initial condition requires a dust measure".into(),
            ));
        }
        if self.b_cap < self.s {
            return Err(Error::InvalidArgument(format!(
                "b_cap = {} cannot be below s = {}: counts may reach the total block count",
                self.b_cap, self.s
            )));
        }
        Ok(())
    }
}

/// Live simulator state: surviving species' counts and elapsed time.
#[derive(Clone, Debug)]
pub struct NestedState {
    pub species: Vec<Count>,
    pub time: f64,
}

/// Lazily grown per-count merger data: total rate and the cumulative
/// distribution of the merger size.
struct RateRow {
    lambda: f64,
    // cum[j] = sum of C(b,k) lambda_{b,k} over k = 2..=j+2
    cum: Vec<f64>,
}

struct RateCache {
    measure: LambdaMeasure,
    rows: Vec<Option<RateRow>>,
}

impl RateCache {
    fn new(measure: &LambdaMeasure, b_cap: usize) -> Self {
        RateCache { measure: measure.clone(), rows: (0..=b_cap).map(|_| None).collect() }
    }

    fn row(&mut self, b: usize) -> Result<&RateRow> {
        if b >= self.rows.len() {
            return Err(Error::Integrity(format!(
                "finite count {b} exceeds the configured cap {}",
                self.rows.len() - 1
            )));
        }
        if self.rows[b].is_none() {
            let mut cum = Vec::with_capacity(b - 1);
            let mut acc = 0.0;
            for k in 2..=b {
                acc += (ln_choose(b as u64, k as u64)
                    + self.measure.ln_lambda_bk_unchecked(b as u64, k as u64))
                .exp();
                cum.push(acc);
            }
            self.rows[b] = Some(RateRow { lambda: acc, cum });
        }
        Ok(self.rows[b].as_ref().expect("row just built"))
    }

    fn lambda(&mut self, b: usize) -> Result<f64> {
        if b <= 1 {
            return Ok(0.0);
        }
        Ok(self.row(b)?.lambda)
    }

    /// Draw a merger size for `b` blocks.
    fn sample_size(&mut self, b: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let row = self.row(b)?;
        let target = rng.random::<f64>() * row.lambda;
        let idx = row.cum.partition_point(|&v| v <= target);
        Ok((idx + 2).min(b))
    }
}

/// Fenwick tree over per-species rates: O(log n) update, total, and
/// proportional selection.
struct Fenwick {
    tree: Vec<f64>,
    vals: Vec<f64>,
}

impl Fenwick {
    fn new(capacity: usize) -> Self {
        Fenwick { tree: vec![0.0; capacity + 1], vals: vec![0.0; capacity] }
    }

    fn set(&mut self, i: usize, value: f64) {
        let delta = value - self.vals[i];
        self.vals[i] = value;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn value(&self, i: usize) -> f64 {
        self.vals[i]
    }

    fn total(&self, len: usize) -> f64 {
        let mut acc = 0.0;
        let mut j = len;
        while j > 0 {
            acc += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        acc.max(0.0)
    }

    /// Largest power-of-two descent: the index whose prefix sum brackets
    /// `target`. Prefix-drift overshoots are clamped into `len`.
    fn select(&self, len: usize, mut target: f64) -> usize {
        let mut pos = 0usize;
        let mut step = self.tree.len().next_power_of_two() >> 1;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(len - 1)
    }
}

fn count_rate(count: Count, rho: f64, cache: &mut RateCache) -> Result<f64> {
    match count {
        Count::Finite(n) => cache.lambda(n as usize),
        Count::Inf => Ok(rho),
    }
}

fn add_counts(a: Count, b: Count) -> Count {
    match (a, b) {
        (Count::Finite(x), Count::Finite(y)) => Count::Finite(x + y),
        _ => Count::Inf,
    }
}

/// One replicate: run until a species death fires while exactly `m` species
/// survive, and return the `m` counts just before that merger, plus the
/// number of events processed.
pub fn run_once(
    config: &SimConfig,
    worker: &mut Worker,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Count>, u64)> {
    let cache = &mut worker.0;
    let rho = config.measure.atom_at_one();
    let init = match config.init {
        InitCondition::One => Count::Finite(1),
        InitCondition::Infinite => Count::Inf,
    };
    let mut state =
        NestedState { species: vec![init; config.s], time: 0.0 };
    let mut fen = Fenwick::new(config.s);
    for i in 0..config.s {
        fen.set(i, count_rate(state.species[i], rho, cache)?);
    }
    let mut events = 0u64;
    loop {
        let s_cur = state.species.len();
        let lineage_total = fen.total(s_cur);
        let death_total = config.c * s_cur as f64;
        let total = lineage_total + death_total;
        state.time += -(1.0 - rng.random::<f64>()).ln() / total; // Exp(total)
        events += 1;
        let u = rng.random::<f64>() * total;
        if u < death_total {
            if s_cur == config.m {
                return Ok((state.species, events));
            }
            let dying = rng.random_range(0..s_cur);
            let mut recv = rng.random_range(0..s_cur - 1);
            if recv >= dying {
                recv += 1;
            }
            let merged = add_counts(state.species[dying], state.species[recv]);
            state.species[recv] = merged;
            fen.set(recv, count_rate(merged, rho, cache)?);
            let last = s_cur - 1;
            state.species.swap_remove(dying);
            if dying != last {
                fen.set(dying, fen.value(last));
            }
            fen.set(last, 0.0);
        } else {
            let mut j = fen.select(s_cur, u - death_total);
            if fen.value(j) <= 0.0 {
                // guard against f64 prefix drift at the boundary
                j = (0..s_cur).rev().find(|&i| fen.value(i) > 0.0).unwrap_or(j);
            }
            match state.species[j] {
                Count::Inf => {
                    // full collapse: the only count-changing event from inf
                    state.species[j] = Count::Finite(1);
                    fen.set(j, 0.0);
                }
                Count::Finite(n) => {
                    let k = cache.sample_size(n as usize, rng)?;
                    let next = Count::Finite(n - k as u32 + 1);
                    state.species[j] = next;
                    fen.set(j, count_rate(next, rho, cache)?);
                }
            }
        }
    }
}

/// Per-worker scratch (lazily built rate rows) reused across replicates.
pub struct Worker(RateCache);

impl Worker {
    pub fn new(config: &SimConfig) -> Self {
        Worker(RateCache::new(&config.measure, config.b_cap))
    }
}

/// Replicate table plus aggregation helpers.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub config: SimConfig,
    /// One row per replicate, `m` columns.
    pub counts: Vec<Vec<Count>>,
    pub events_total: u64,
}

/// Empirical law of one coordinate on `{1..k_max}` with a beyond-bucket and
/// an infinity fraction.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalPmf {
    pub k_max: usize,
    /// pmf[0] unused; pmf[k] = fraction of samples equal to k.
    pub pmf: Vec<f64>,
    pub beyond: f64,
    pub inf: f64,
}

/// Run all replicates on the global thread pool; per-replicate RNG streams
/// keep the output independent of scheduling.
pub fn run_many(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let results: Vec<(Vec<Count>, u64)> = (0..config.replicates)
        .into_par_iter()
        .map_init(
            || Worker::new(config),
            |cache, rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(rep as u64 + 1);
                run_once(config, cache, &mut rng)
            },
        )
        .collect::<Result<_>>()?;
    let events_total = results.iter().map(|(_, e)| e).sum();
    Ok(SimResult {
        config: config.clone(),
        counts: results.into_iter().map(|(c, _)| c).collect(),
        events_total,
    })
}

impl SimResult {
    /// Marginal law of coordinate `coord` (or pooled over coordinates when
    /// `None`).
    pub fn empirical_pmf(&self, coord: Option<usize>, k_max: usize) -> EmpiricalPmf {
        let mut pmf = vec![0.0; k_max + 1];
        let mut beyond = 0.0;
        let mut inf = 0.0;
        let mut total = 0usize;
        for row in &self.counts {
            let cells: &[Count] = match coord {
                Some(l) => &row[l..=l],
                None => row,
            };
            for &cell in cells {
                total += 1;
                match cell {
                    Count::Inf => inf += 1.0,
                    Count::Finite(n) if (n as usize) <= k_max => pmf[n as usize] += 1.0,
                    Count::Finite(_) => beyond += 1.0,
                }
            }
        }
        let t = total as f64;
        for v in pmf.iter_mut() {
            *v /= t;
        }
        EmpiricalPmf { k_max, pmf, beyond: beyond / t, inf: inf / t }
    }

    /// TV distance between a coordinate's empirical law and a reference
    /// distribution, on `{1..k_max}` plus a single beyond-`k_max` bucket
    /// (counting the reference's tail and infinity mass there).
    pub fn tv_against(&self, reference: &ExtDist, coord: usize, k_max: usize) -> f64 {
        let emp = self.empirical_pmf(Some(coord), k_max);
        let mut acc = 0.0;
        let mut ref_bucket = reference.tail() + reference.p_inf();
        for k in 1..=k_max.min(reference.n()) {
            acc += (emp.pmf[k] - reference.mass(k)).abs();
        }
        for k in (k_max + 1)..=reference.n() {
            ref_bucket += reference.mass(k);
        }
        acc += ((emp.beyond + emp.inf) - ref_bucket).abs();
        0.5 * acc
    }

    /// Pearson correlations of all coordinate pairs over replicates where
    /// both coordinates are finite.
    pub fn pairwise_correlations(&self) -> Vec<(usize, usize, f64)> {
        let m = self.config.m;
        let mut out = Vec::new();
        for a in 0..m {
            for b in (a + 1)..m {
                let pairs: Vec<(f64, f64)> = self
                    .counts
                    .iter()
                    .filter_map(|row| match (row[a], row[b]) {
                        (Count::Finite(x), Count::Finite(y)) => Some((x as f64, y as f64)),
                        _ => None,
                    })
                    .collect();
                let n = pairs.len() as f64;
                if pairs.is_empty() {
                    out.push((a, b, f64::NAN));
                    continue;
                }
                let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
                let mut cxy = 0.0;
                let mut cxx = 0.0;
                let mut cyy = 0.0;
                for (x, y) in &pairs {
                    cxy += (x - mx) * (y - my);
                    cxx += (x - mx) * (x - mx);
                    cyy += (y - my) * (y - my);
                }
                out.push((a, b, cxy / (cxx * cyy).sqrt()));
            }
        }
        out
    }

    /// Replicate table as CSV: one row per replicate, `m` columns, `inf`
    /// spelled out.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("replicate");
        for l in 0..self.config.m {
            out.push_str(&format!(",n{}", l + 1));
        }
        out.push('\n');
        for (rep, row) in self.counts.iter().enumerate() {
            out.push_str(&rep.to_string());
            for cell in row {
                out.push(',');
                out.push_str(&cell.to_field());
            }
            out.push('\n');
        }
        out
    }
}

/// Jump-chain simulation of the block count at an Exp(c) time from `n`
/// blocks: race the merger clock against the kill clock, jumping by a
/// sampled merger size until either fires. Returns the histogram of
/// terminal counts (index by count).
pub fn simulate_lny(
    measure: &LambdaMeasure,
    c: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one starting block".into()));
    }
    let hist = (0..replicates)
        .into_par_iter()
        .map_init(
            || RateCache::new(measure, n),
            |cache, rep| -> Result<usize> {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(rep as u64 + 1);
                let mut b = n;
                loop {
                    if b == 1 {
                        return Ok(1);
                    }
                    let lambda = cache.lambda(b)?;
                    if rng.random::<f64>() < c / (lambda + c) {
                        return Ok(b);
                    }
                    let k = cache.sample_size(b, &mut rng)?;
                    b = b - k + 1;
                }
            },
        )
        .try_fold(
            || vec![0u64; n + 1],
            |mut acc, r| {
                acc[r?] += 1;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    Ok(hist)
}
