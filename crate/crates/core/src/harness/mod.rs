//! Batch orchestration: configs, dispatch, the result store and CSV export.
//!
//! Work items draw their random streams from (seed, tag, item index), so results do
//! not depend on the number of worker threads.

pub mod config;
pub mod export;
pub mod laws;
pub mod sprinkle;
pub mod store;
pub mod ustar;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{Experiment, RunConfig};
pub use export::CsvTable;
pub use store::Store;

use crate::error::{Error, Result};
use crate::green::{GreenConfig, GreenEvaluator};
use crate::renorm::{default_l0, induction_threshold, l0_grid, percolation_certificate, tail_threshold, CertificateConfig};
use crate::stats::Proportion;
use crate::tree::{tree_experiment, TreeConfig};
use crate::walk::EscapeConfig;
use export::num;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Estimate {
    pub fn point(name: impl Into<String>, value: f64) -> Self {
        Estimate { name: name.into(), value, lower: None, upper: None }
    }

    pub fn interval(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Estimate { name: name.into(), value, lower: Some(lower), upper: Some(upper) }
    }

    pub fn proportion(name: impl Into<String>, p: &Proportion) -> Self {
        Self::interval(name, p.estimate, p.lower, p.upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: String,
    pub config: RunConfig,
    pub estimates: Vec<Estimate>,
    /// experiment-specific report
    pub details: serde_json::Value,
    pub tables: Vec<CsvTable>,
    pub wall_time_s: f64,
    pub versions: BTreeMap<String, String>,
}

impl RunResult {
    /// Everything except wall time, which is the only field allowed to differ
    /// between re-runs of one config.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        self.config_hash == other.config_hash
            && self.estimates.len() == other.estimates.len()
            && self
                .estimates
                .iter()
                .zip(&other.estimates)
                .all(|(a, b)| a.name == b.name && bits(a) == bits(b))
            && self.details == other.details
            && self.tables == other.tables
    }

    pub fn table(&self, kind: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|t| t.kind == kind)
    }
}

fn bits(e: &Estimate) -> (u64, Option<u64>, Option<u64>) {
    (e.value.to_bits(), e.lower.map(f64::to_bits), e.upper.map(f64::to_bits))
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("crate".into(), env!("CARGO_PKG_VERSION").into()),
        ("sample-format".into(), crate::sample_io::FORMAT_VERSION.to_string()),
        (
            "csv-schemas".into(),
            export::SCHEMAS.iter().map(|(k, v, _)| format!("{k}/{v}")).collect::<Vec<_>>().join(" "),
        ),
    ])
}

/// Runs a config, serving it from the store when present unless `force` is set.
/// Tables are written next to `output_path` when it is set.
pub fn run(cfg: &RunConfig, store: Option<&Store>, force: bool) -> Result<RunResult> {
    cfg.validate()?;
    let hash = cfg.hash();
    if let (Some(st), false) = (store, force) {
        if let Some(hit) = st.get(&hash)? {
            return Ok(hit);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    let start = Instant::now();
    let (estimates, details, tables) = pool.install(|| dispatch(cfg))?;
    let result = RunResult {
        config_hash: hash,
        config: cfg.clone(),
        estimates,
        details,
        tables,
        wall_time_s: start.elapsed().as_secs_f64(),
        versions: versions(),
    };
    if let Some(st) = store {
        st.put(&result)?;
    }
    if let Some(out) = &cfg.output_path {
        write_outputs(&result, std::path::Path::new(out))?;
    }
    Ok(result)
}

/// Writes `<out>/<kind>.csv` for each table and `<out>/result.json`.
pub fn write_outputs(result: &RunResult, out: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for t in &result.tables {
        t.write(&out.join(format!("{}.csv", t.kind)), &result.config_hash, result.config.seed)?;
    }
    std::fs::write(out.join("result.json"), serde_json::to_vec_pretty(result)?)?;
    Ok(())
}

type Outcome = (Vec<Estimate>, serde_json::Value, Vec<CsvTable>);

fn evaluator(cfg: &RunConfig, d: usize) -> Result<Arc<GreenEvaluator>> {
    let mut g = GreenConfig::default();
    if let Some(c) = cfg.solve_cap {
        g.solve_cap = c;
    }
    Ok(Arc::new(GreenEvaluator::with_config(d, g)?))
}

fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    let escape = EscapeConfig::default();
    match cfg.experiment {
        Experiment::GreenTable => green_table(cfg),
        Experiment::LawValidation => {
            let grid = if cfg.u_grid.is_empty() { vec![0.5, 1.0, 2.0] } else { cfg.u_grid.clone() };
            let mut rows = Vec::new();
            for d in cfg.dims() {
                let ev = evaluator(cfg, d)?;
                rows.extend(laws::law_validation(&ev, &laws::standard_probes(d), &grid, cfg.n_samples, cfg.seed ^ d as u64, &escape)?);
            }
            let mut table = CsvTable::new("law-validation")?;
            let mut est = Vec::new();
            for r in &rows {
                est.push(Estimate::proportion(format!("d={}/{}/u={}", r.d, r.probe, r.u), &r.observed));
                table.push(vec![
                    r.d.to_string(),
                    r.probe.clone(),
                    r.size.to_string(),
                    num(r.u),
                    num(r.capacity),
                    num(r.expected),
                    num(r.observed.estimate),
                    num(r.observed.lower),
                    num(r.observed.upper),
                    num(r.z),
                ])?;
            }
            let pass = rows.iter().all(|r| r.pass);
            let report = laws::LawTable { rows, z_limit: 4.0, pass };
            Ok((est, serde_json::to_value(report)?, vec![table]))
        }
        Experiment::UbiquitySweep => {
            let d = cfg.single_dim()?;
            let ev = evaluator(cfg, d)?;
            let sweep = sprinkle::ubiquity_sweep(&ev, &cfg.u_grid, cfg.n_samples, cfg.seed, &escape)?;
            let mut table = CsvTable::new("ubiquity-sweep")?;
            let mut est = Vec::new();
            for p in &sweep.points {
                est.push(Estimate::proportion(format!("P[G_u] u={}", p.u), &p.g_u));
                table.push(vec![
                    d.to_string(),
                    num(p.u),
                    p.g_u.successes.to_string(),
                    p.g_u.trials.to_string(),
                    num(p.g_u.estimate),
                    num(p.g_u.lower),
                    num(p.g_u.upper),
                ])?;
            }
            Ok((est, serde_json::to_value(sweep)?, vec![table]))
        }
        Experiment::UstarProxy => {
            let mut table = CsvTable::new("ustar-vs-logd")?;
            let mut est = Vec::new();
            let mut results = Vec::new();
            for d in cfg.dims() {
                let ev = evaluator(cfg, d)?;
                let ucfg = ustar::UstarConfig {
                    d,
                    side: cfg.side.unwrap_or(4),
                    u_max: cfg.u_max.unwrap_or(6.0),
                    n_samples: cfg.n_samples,
                    seed: cfg.seed ^ d as u64,
                    bootstrap: cfg.bootstrap.unwrap_or(1000),
                    u_grid: cfg.u_grid.clone(),
                    escape: escape.clone(),
                };
                let r = ustar::ustar_proxy(&ev, &ucfg)?;
                est.push(Estimate::interval(format!("u_half d={d}"), r.u_half, r.ci_lower, r.ci_upper));
                table.push(vec![
                    d.to_string(),
                    num((d as f64).ln()),
                    r.side.to_string(),
                    r.n_samples.to_string(),
                    r.censored.to_string(),
                    num(r.u_half),
                    num(r.ci_lower),
                    num(r.ci_upper),
                ])?;
                results.push(r);
            }
            Ok((est, serde_json::to_value(results)?, vec![table]))
        }
        Experiment::Tree => {
            let d = cfg.single_dim()?;
            let ev = evaluator(cfg, d)?;
            let tcfg = TreeConfig {
                d,
                epsilon: cfg.epsilon.expect("validated"),
                ell: cfg.ell,
                u0: cfg.u0,
                n_samples: cfg.n_samples,
                seed: cfg.seed,
                escape,
            };
            let rep = tree_experiment(&ev, &tcfg)?;
            let n = rep.n_samples as u64;
            let mut table = CsvTable::new("tree-survival")?;
            for (k, &size) in rep.tree_sizes.iter().enumerate() {
                let mean = |f: &dyn Fn(&crate::tree::TreeOutcome) -> usize| {
                    rep.samples.iter().map(|s| f(s) as f64).sum::<f64>() / n as f64
                };
                let alive = rep.samples.iter().filter(|s| s.t_prime[k] > 0).count() as u64;
                let p = crate::stats::wilson(alive, n, crate::stats::Z95);
                table.push(vec![
                    k.to_string(),
                    size.to_string(),
                    num(mean(&|s| s.t0[k])),
                    num(mean(&|s| s.t_prime[k])),
                    alive.to_string(),
                    n.to_string(),
                    num(p.lower),
                    num(p.upper),
                ])?;
            }
            let prop = |name: &str, c: usize| Estimate::proportion(name, &crate::stats::wilson(c as u64, n, crate::stats::Z95));
            let est = vec![
                prop("event D", rep.event_d_count),
                prop("hypotheses", rep.hypotheses_count),
                prop("survival", rep.survival_count),
                Estimate::point("trace violations", rep.trace_violations as f64),
                Estimate::point("pruned ratio violations", rep.pruned_ratio_violations as f64),
            ];
            Ok((est, serde_json::to_value(rep)?, vec![table]))
        }
        Experiment::SprinkleMerge => {
            let d = cfg.single_dim()?;
            let ev = evaluator(cfg, d)?;
            let rep = sprinkle::sprinkle_merge(&ev, cfg.epsilon.expect("validated"), cfg.n_samples, cfg.seed, &escape)?;
            let mut table = CsvTable::new("sprinkle-merge")?;
            let events = [
                ("cubes ubiquitous at u1", &rep.cubes_ubiquitous_u1),
                ("G at u0", &rep.g_u0),
                ("G at u1", &rep.g_u1),
                ("G at u2", &rep.g_u2),
            ];
            let mut est = Vec::new();
            for (name, p) in events {
                est.push(Estimate::proportion(name, p));
                table.push(vec![
                    name.into(),
                    p.successes.to_string(),
                    p.trials.to_string(),
                    num(p.estimate),
                    num(p.lower),
                    num(p.upper),
                ])?;
            }
            est.push(Estimate::interval(
                "vacant gain u0->u1",
                rep.gain_01.mean,
                rep.gain_01.mean - 2.0 * rep.gain_01.std_error(),
                rep.gain_01.mean + 2.0 * rep.gain_01.std_error(),
            ));
            est.push(Estimate::interval(
                "vacant gain u1->u2",
                rep.gain_12.mean,
                rep.gain_12.mean - 2.0 * rep.gain_12.std_error(),
                rep.gain_12.mean + 2.0 * rep.gain_12.std_error(),
            ));
            est.push(Estimate::point("inclusion failures", rep.inclusion_failures as f64));
            Ok((est, serde_json::to_value(rep)?, vec![table]))
        }
        Experiment::Certificate => certificate(cfg),
    }
}

fn green_table(cfg: &RunConfig) -> Result<Outcome> {
    let mut table = CsvTable::new("green-asymptotics")?;
    let mut est = Vec::new();
    let mut rows = Vec::new();
    for d in cfg.dims() {
        let ev = evaluator(cfg, d)?;
        let g0 = ev.g0()?;
        let mut e1 = vec![0; d];
        e1[0] = 1;
        let g1 = ev.green(&e1)?;
        let scaled = 2.0 * d as f64 * (g0 - 1.0);
        est.push(Estimate::point(format!("g0 d={d}"), g0));
        est.push(Estimate::point(format!("2d(g0-1) d={d}"), scaled));
        table.push(vec![d.to_string(), num(g0), num(g1), num(scaled)])?;
        rows.push(serde_json::json!({ "d": d, "g0": g0, "g_e1": g1, "two_d_g0_minus_1": scaled }));
    }
    Ok((est, serde_json::Value::Array(rows), vec![table]))
}

fn certificate(cfg: &RunConfig) -> Result<Outcome> {
    let d = cfg.d.expect("validated");
    let c0 = cfg.c0.unwrap_or(1.0);
    let c1 = cfg.c1.unwrap_or(1.0);
    let n_max = cfg.n_max.unwrap_or(10);
    let ev = if cfg.c_decay.is_none() { Some(evaluator(cfg, d)?) } else { None };
    let u = match cfg.u_grid.first() {
        Some(&u) => u,
        None => {
            let ev = match &ev {
                Some(e) => e.clone(),
                None => evaluator(cfg, d)?,
            };
            ev.g0()? * (d as f64).ln() / 2.0
        }
    };
    if cfg.q0.is_none() && cfg.p_gc.is_none() {
        return Err(Error::Config("q0: give q0 or p-gc".into()));
    }
    let ccfg = CertificateConfig {
        d,
        u,
        l0: cfg.l0.clone().unwrap_or_else(|| default_l0(c1, d).to_string()),
        c0,
        c1,
        c_eps: cfg.c_eps,
        c_decay: cfg.c_decay,
        n_max,
        q0: cfg.q0,
        p_gc: cfg.p_gc,
    };
    let rep = percolation_certificate(ev.as_deref(), &ccfg)?;
    let scan = induction_threshold(&l0_grid(40, 4), n_max, c0, rep.c_eps)?;
    let tail = tail_threshold()?;
    let mut table = CsvTable::new("certificate")?;
    for c in &rep.conditions {
        table.push(vec![c.n.to_string(), num(c.eps), num(c.b), c.eps_ok.to_string(), c.b_ok.to_string()])?;
    }
    let est = vec![
        Estimate::point("pass", f64::from(u8::from(rep.pass))),
        Estimate::point("series tail", rep.series_tail),
        Estimate::point("tail threshold c1 d", tail),
    ];
    let details = serde_json::json!({ "certificate": rep, "induction_threshold": scan, "tail_threshold": tail });
    Ok((est, details, vec![table]))
}
