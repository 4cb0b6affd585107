//! The four subcommands: rates, solve, simulate, sibuya.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ncl_core::dist::{ExtDist, TailPolicy};
use ncl_core::kernel::LyKernel;
use ncl_core::measure::RateTable;
use ncl_core::rde::{self, Regime, SolverOptions};
use ncl_core::sibuya::{self, GammaSeq};
use ncl_core::sim::{self, InitCondition, SimConfig};

use crate::args::{RatesArgs, SibuyaArgs, SimulateArgs, SolveArgs};
use crate::util::{
    fmt_f64, json_f64, resolve_measure, write_artifact, write_json, CliError, CliResult,
    ConfigFile, Manifest,
};

fn manifest_inputs<'a>(cfg: &'a ConfigFile, measure_file: &'a Option<PathBuf>) -> Vec<&'a Path> {
    let mut v = Vec::new();
    if let Some(p) = &cfg.path {
        v.push(p.as_path());
    }
    if let Some(p) = measure_file {
        v.push(p.as_path());
    }
    v
}

pub fn cmd_rates(out: &Path, cfg: &ConfigFile, args: &RatesArgs) -> CliResult<()> {
    let (measure, mfile) = resolve_measure(args.measure.as_deref(), args.measure_file.as_deref(), cfg)?;
    let b_max = args
        .bmax
        .or_else(|| cfg.get_u64("bmax"))
        .ok_or_else(|| CliError::usage("missing --bmax"))?;
    let table = RateTable::build(&measure, b_max)?;
    let violation = table.max_consistency_violation();
    let lambda22_gap = (table.bk(2, 2) - 1.0).abs();

    let config = json!({
        "measure": measure,
        "bmax": b_max,
    });
    let manifest = Manifest::new("rates", config, &manifest_inputs(cfg, &mfile))?;

    let mut csv = manifest.csv_header();
    csv.push_str("b,lambda_b");
    for k in 2..=b_max {
        csv.push_str(&format!(",k{k}"));
    }
    csv.push('\n');
    for b in 1..=b_max {
        csv.push_str(&format!("{b},{}", fmt_f64(table.total(b))));
        for k in 2..=b_max {
            csv.push(',');
            if b >= 2 && k <= b {
                csv.push_str(&fmt_f64(table.bk(b, k)));
            }
        }
        csv.push('\n');
    }
    let csv_path = write_artifact(out, "rates.csv", &csv)?;

    let report = json!({
        "manifest": manifest.to_value(),
        "b_max": b_max,
        "max_consistency_violation": json_f64(violation),
        "lambda_2_2_gap": json_f64(lambda22_gap),
        "csv": "rates.csv",
    });
    write_json(out, "rates_report.json", &report)?;
    eprintln!(
        "rates: wrote {} (max consistency violation {:.3e})",
        csv_path.display(),
        violation
    );
    Ok(())
}

fn parse_policy(s: &str) -> CliResult<TailPolicy> {
    match s {
        "fold-n" => Ok(TailPolicy::FoldToN),
        "fold-inf" => Ok(TailPolicy::FoldToInf),
        "envelope" => Ok(TailPolicy::Envelope),
        other => Err(CliError::usage(format!(
            "unknown policy '{other}' (expected fold-n, fold-inf, or envelope)"
        ))),
    }
}

const PGF_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// TV between the kernel inversion of `dist` and its self-convolution,
/// counting convolution mass beyond `N` as discrepancy.
fn inverse_t_gap(dist: &ExtDist, kernel: &LyKernel) -> f64 {
    let t = rde::inverse_t(dist, kernel);
    let (conv, beyond, _) = rde::self_convolution(dist);
    let mut acc = 0.0;
    for n in 1..=kernel.n() {
        acc += (t[n] - conv[n]).abs();
    }
    0.5 * (acc + beyond)
}

pub fn cmd_solve(out: &Path, cfg: &ConfigFile, args: &SolveArgs) -> CliResult<()> {
    let (measure, mfile) = resolve_measure(args.measure.as_deref(), args.measure_file.as_deref(), cfg)?;
    let c = args
        .c
        .or_else(|| cfg.get_f64("c"))
        .ok_or_else(|| CliError::usage("missing --c"))?;
    let from = args.from.clone().or_else(|| cfg.get_str("from")).unwrap_or_else(|| "one".into());
    let n = args.n.or_else(|| cfg.get_u64("n")).unwrap_or(512) as usize;
    let tol = args.tol.or_else(|| cfg.get_f64("tol")).unwrap_or(1e-12);
    let max_iter = args.max_iter.or_else(|| cfg.get_u64("max-iter")).unwrap_or(100_000) as usize;
    let policy_name =
        args.policy.clone().or_else(|| cfg.get_str("policy")).unwrap_or_else(|| "envelope".into());
    let policy = parse_policy(&policy_name)?;

    let assert_finite_mean =
        args.assert_finite_mean || cfg.get_bool("assert-finite-mean").unwrap_or(false);
    let mean_inv = measure.mean_inv_x();
    if assert_finite_mean && !(c < mean_inv) {
        return Err(CliError::hypothesis(format!(
            "finite-mean hypothesis violated: c = {c} >= E[1/X] = {mean_inv}"
        )));
    }

    let kernel = LyKernel::build(&measure, c, n)?;
    let opts = SolverOptions { tol, max_iter, policy };
    let fp = match from.as_str() {
        "one" => rde::fix_from_delta1(&kernel, &opts)?,
        "inf" => rde::fix_from_delta_inf(&kernel, &opts)?,
        other => return Err(CliError::usage(format!("unknown --from '{other}' (one or inf)"))),
    };

    let dist = &fp.dist;
    let pgf = if measure.has_dust() {
        Some(rde::pgf_residual(dist, &measure, c, &PGF_GRID)?)
    } else {
        None
    };
    let inverse_gap = inverse_t_gap(dist, &kernel);
    let mean_id = if fp.regime == Regime::FiniteMean && dist.p_inf() == 0.0 && dist.tail() == 0.0 {
        Some(rde::mean_identity(dist, &measure, c)?)
    } else {
        None
    };
    let p_inf_expected = if from == "inf" {
        Some((1.0 - measure.atom_at_one() / c).max(0.0))
    } else {
        None
    };

    let config = json!({
        "measure": measure,
        "c": c,
        "from": from,
        "n": n,
        "tol": tol,
        "max-iter": max_iter,
        "policy": policy_name,
        "assert-finite-mean": assert_finite_mean,
    });
    let manifest = Manifest::new("solve", config, &manifest_inputs(cfg, &mfile))?;

    if args.kernel_csv {
        let mut csv = manifest.csv_header();
        csv.push_str(&kernel.to_csv());
        write_artifact(out, "kernel.csv", &csv)?;
    }

    let trace: Vec<Value> = fp
        .trace
        .iter()
        .map(|t| json!({"iter": t.iter, "tv": json_f64(t.tv), "mean": json_f64(t.mean)}))
        .collect();
    let note = match (from.as_str(), fp.regime) {
        ("one", Regime::FiniteMean) => {
            "limit from a single lineage; the identity diagnostics support but do not \
             certify that this is the unique finite-mean solution"
        }
        ("one", Regime::Boundary) => "boundary regime: c = E[1/X], finite-mean hypothesis not met",
        ("one", _) => "outside the finite-mean regime; the limit need not have finite mean",
        _ => "limit from infinitely many lineages",
    };
    let report = json!({
        "manifest": manifest.to_value(),
        "measure": measure,
        "c": c,
        "n": n,
        "policy": policy_name,
        "from": from,
        "note": note,
        "regime": fp.regime,
        "iterations": fp.iterations,
        "p": dist.masses()[1..].to_vec(),
        "p_inf": dist.p_inf(),
        "tail": dist.tail(),
        "mean": json_f64(dist.mean()),
        "band": json_f64(fp.band),
        "tv_trace": trace,
        "diagnostics": {
            "monotone_violation": json_f64(fp.monotone_violation),
            "pgf_residual_max": pgf.as_ref().map(|p| json_f64(p.max_abs_residual())),
            "pgf_asserted": pgf.as_ref().map(|p| p.asserted),
            "inverse_t_tv": json_f64(inverse_gap),
            "mean_identity_lhs": mean_id.map(|(l, _)| json_f64(l)),
            "mean_identity_rhs": mean_id.map(|(_, r)| json_f64(r)),
            "mean_identity_gap": mean_id.map(|(l, r)| json_f64((l - r).abs())),
            "p_inf_expected": p_inf_expected.map(json_f64),
            "p_inf_gap": p_inf_expected.map(|e| json_f64((dist.p_inf() - e).abs())),
        },
    });
    let path = write_json(out, "solve.json", &report)?;
    eprintln!(
        "solve: from {from}, {} iterations, mean {}, wrote {}",
        fp.iterations,
        dist.mean(),
        path.display()
    );
    Ok(())
}

/// Reference distribution loaded back from a solve artifact.
struct SolveRef {
    measure: Value,
    c: f64,
    dist: ExtDist,
}

fn load_solve_ref(path: &Path) -> CliResult<SolveRef> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {path:?}: {e}")))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{path:?} is not valid JSON: {e}")))?;
    let measure = v
        .get("measure")
        .cloned()
        .ok_or_else(|| CliError::usage(format!("{path:?} has no 'measure' field")))?;
    let c = v
        .get("c")
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::usage(format!("{path:?} has no numeric 'c' field")))?;
    let p: Vec<f64> = v
        .get("p")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::usage(format!("{path:?} has no 'p' array")))?
        .iter()
        .map(|x| x.as_f64().unwrap_or(0.0))
        .collect();
    let p_inf = v.get("p_inf").and_then(Value::as_f64).unwrap_or(0.0);
    let tail = v.get("tail").and_then(Value::as_f64).unwrap_or(0.0);
    let mut masses = Vec::with_capacity(p.len() + 1);
    masses.push(0.0);
    masses.extend_from_slice(&p);
    let dist = ExtDist::from_parts(masses, p_inf, tail, TailPolicy::FoldToN)?;
    Ok(SolveRef { measure, c, dist })
}

pub fn cmd_simulate(out: &Path, cfg: &ConfigFile, args: &SimulateArgs) -> CliResult<()> {
    let (measure, mfile) = resolve_measure(args.measure.as_deref(), args.measure_file.as_deref(), cfg)?;
    let s_arg = args
        .s
        .clone()
        .or_else(|| cfg.get_str("s"))
        .ok_or_else(|| CliError::usage("missing --s"))?;
    let s_values: Vec<usize> = s_arg
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("cannot parse species count '{tok}'")))
        })
        .collect::<CliResult<_>>()?;
    let m = args.m.or_else(|| cfg.get_u64("m")).ok_or_else(|| CliError::usage("missing --m"))? as usize;
    let c = args.c.or_else(|| cfg.get_f64("c")).ok_or_else(|| CliError::usage("missing --c"))?;
    let init_name =
        args.init.clone().or_else(|| cfg.get_str("init")).unwrap_or_else(|| "one".into());
    let init = match init_name.as_str() {
        "one" => InitCondition::One,
        "inf" => InitCondition::Infinite,
        other => return Err(CliError::usage(format!("unknown --init '{other}' (one or inf)"))),
    };
    let replicates = args.reps.or_else(|| cfg.get_u64("reps")).unwrap_or(10_000) as usize;
    let seed = args.seed.or_else(|| cfg.get_u64("seed")).unwrap_or(0);
    let k_max = args.k_max.or_else(|| cfg.get_u64("k-max")).unwrap_or(50) as usize;

    let reference = match &args.compare_to {
        None => None,
        Some(path) => {
            let r = load_solve_ref(path)?;
            let ours = serde_json::to_value(&measure).expect("measure serializes");
            if r.measure != ours || r.c != c {
                return Err(CliError::mismatch(format!(
                    "compare target {path:?} was produced with a different (measure, c)"
                )));
            }
            Some(r)
        }
    };

    let config = json!({
        "measure": measure,
        "s": s_arg,
        "m": m,
        "c": c,
        "init": init_name,
        "reps": replicates,
        "seed": seed,
        "k-max": k_max,
        "compare-to": args.compare_to.as_ref().map(|p| p.display().to_string()),
    });
    let mut inputs = manifest_inputs(cfg, &mfile);
    if let Some(p) = &args.compare_to {
        inputs.push(p.as_path());
    }
    let manifest = Manifest::new("simulate", config, &inputs)?;

    let mut runs = Vec::new();
    let mut prev_tv: Option<f64> = None;
    let mut trend_nonincreasing = true;
    for &s in &s_values {
        let sim_config = SimConfig {
            s,
            m,
            c,
            measure: measure.clone(),
            init,
            replicates,
            seed,
            b_cap: args.b_cap.map(|b| b as usize).unwrap_or(s.max(2)),
        };
        let result = sim::run_many(&sim_config)?;
        let mut csv = manifest.csv_header();
        csv.push_str(&result.to_csv());
        let csv_name = format!("sim_s{s}.csv");
        write_artifact(out, &csv_name, &csv)?;

        let pooled = result.empirical_pmf(None, k_max);
        let tv_per_coord: Option<Vec<f64>> = reference
            .as_ref()
            .map(|r| (0..m).map(|l| result.tv_against(&r.dist, l, k_max)).collect());
        if let Some(tvs) = &tv_per_coord {
            let mean_tv = tvs.iter().sum::<f64>() / tvs.len() as f64;
            if let Some(prev) = prev_tv {
                // reported trend only; sampling noise is not failed on
                if mean_tv > prev + 1e-12 {
                    trend_nonincreasing = false;
                }
            }
            prev_tv = Some(mean_tv);
        }
        let correlations: Vec<Value> = result
            .pairwise_correlations()
            .into_iter()
            .map(|(a, b, r)| json!({"i": a, "j": b, "corr": json_f64(r)}))
            .collect();
        runs.push(json!({
            "s": s,
            "csv": csv_name,
            "events": result.events_total,
            "empirical_pmf": {
                "k_max": pooled.k_max,
                "pmf": pooled.pmf[1..].to_vec(),
                "beyond": pooled.beyond,
                "inf": pooled.inf,
            },
            "tv_to_reference": tv_per_coord
                .map(|tvs| Value::Array(tvs.into_iter().map(json_f64).collect())),
            "correlations": correlations,
        }));
    }

    let summary = json!({
        "manifest": manifest.to_value(),
        "seed": seed,
        "runs": runs,
        "tv_trend_nonincreasing": reference.as_ref().map(|_| trend_nonincreasing),
    });
    let path = write_json(out, "simulate_summary.json", &summary)?;
    eprintln!("simulate: {} run(s), wrote {}", s_values.len(), path.display());
    Ok(())
}

pub fn cmd_sibuya(out: &Path, cfg: &ConfigFile, args: &SibuyaArgs) -> CliResult<()> {
    if args.gamma_only {
        let alpha = args
            .alpha
            .or_else(|| cfg.get_f64("alpha"))
            .ok_or_else(|| CliError::usage("missing --alpha for --gamma-only"))?;
        let n_max = args.nmax.or_else(|| cfg.get_u64("nmax")).unwrap_or(100_000) as usize;
        let g = GammaSeq::new(alpha, n_max)?;
        let scaled = g.coeff(n_max) * (n_max as f64).powf(1.0 + alpha);
        let asymptote = g.asymptote();
        let config = json!({"alpha": alpha, "nmax": n_max, "gamma-only": true});
        let manifest = Manifest::new("sibuya", config, &manifest_inputs(cfg, &None))?;
        let report = json!({
            "manifest": manifest.to_value(),
            "alpha": alpha,
            "n_max": n_max,
            "gamma_n_max": json_f64(g.coeff(n_max)),
            "scaled": json_f64(scaled),
            "asymptote": json_f64(asymptote),
            "rel_gap": json_f64(((scaled - asymptote) / asymptote).abs()),
            "partial_sum": json_f64(g.partial_sum(n_max)),
        });
        let path = write_json(out, "gamma_report.json", &report)?;
        eprintln!(
            "sibuya: gamma_n n^(1+a) = {scaled:.9} vs limit {asymptote:.9}, wrote {}",
            path.display()
        );
        return Ok(());
    }

    let (measure, mfile) = resolve_measure(args.measure.as_deref(), args.measure_file.as_deref(), cfg)?;
    let c = args.c.or_else(|| cfg.get_f64("c")).ok_or_else(|| CliError::usage("missing --c"))?;
    let n = args.n.or_else(|| cfg.get_u64("n")).unwrap_or(512) as usize;
    let tol = args.tol.or_else(|| cfg.get_f64("tol")).unwrap_or(1e-12);
    let max_iter = args.max_iter.or_else(|| cfg.get_u64("max-iter")).unwrap_or(100_000) as usize;
    let beta = args.beta.or_else(|| cfg.get_f64("beta"));

    let kernel = LyKernel::build(&measure, c, n)?;
    let opts = SolverOptions { tol, max_iter, policy: TailPolicy::Envelope };
    let report = sibuya::bracket(&kernel, beta, &opts)?;

    let config = json!({
        "measure": measure,
        "c": c,
        "n": n,
        "tol": tol,
        "max-iter": max_iter,
        "beta": beta,
        "search": true,
    });
    let manifest = Manifest::new("sibuya", config, &manifest_inputs(cfg, &mfile))?;
    let limit_summary = |fp: &rde::FixedPoint, tail_index: f64| {
        json!({
            "iterations": fp.iterations,
            "mean": json_f64(fp.dist.mean()),
            "p_inf": fp.dist.p_inf(),
            "p_inf_upper_chain": fp.upper.as_ref().map(|u| u.p_inf()),
            "tail_index": json_f64(tail_index),
            "p": fp.dist.masses()[1..].to_vec(),
        })
    };
    let out_value = json!({
        "manifest": manifest.to_value(),
        "params": report.params,
        "threshold": json_f64(report.threshold),
        "condition_exponent": sibuya::condition_exponent(&measure),
        "condition_ratio": json_f64(report.condition_ratio),
        "mu0_margin": json_f64(report.mu0_margin),
        "nu0_margin": json_f64(report.nu0_margin),
        "nu0_floor_margin": json_f64(report.nu0_floor_margin),
        "band": json_f64(report.band),
        "limits_tv": json_f64(report.limits_tv),
        "order_margin": json_f64(report.order_margin),
        "lower": limit_summary(&report.lower, report.lower_tail_index),
        "upper": limit_summary(&report.upper, report.upper_tail_index),
    });
    let path = write_json(out, "bracket.json", &out_value)?;
    eprintln!(
        "sibuya: bracket with (a={}, eps={:.4}, k={}), band {:.4}, wrote {}",
        report.params.a,
        report.params.eps,
        report.params.k,
        report.band,
        path.display()
    );
    Ok(())
}
