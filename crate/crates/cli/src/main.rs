use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use interlace_core::harness::{self, Experiment, RunConfig, Store};
use interlace_core::interlacement::{sample_many, occupation_numbers};
use interlace_core::lattice::{LatticePoint, Window};
use interlace_core::levels::big_l;
use interlace_core::potential::{equilibrium_exact, equilibrium_mc};
use interlace_core::sample_io::SampleBatch;
use interlace_core::tree::{evaluate_tree, Tree};
use interlace_core::vacant::{check_g_u, components, find_bridges, vacant_components};
use interlace_core::walk::{EscapeConfig, Protection, WalkSampler};
use interlace_core::GreenEvaluator;

#[derive(Parser)]
#[command(name = "interlace", version, about = "Random interlacements on Z^d: sampling, analysis and batch experiments")]
struct Cli {
    /// Base seed for every random stream
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output file or directory (verb dependent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Recompute even when the result store already holds this config
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the interlacement trace on a window and write a sample file
    Sample {
        #[arg(long)]
        d: usize,
        /// hypercube | union | ball:R | box:N | tree:ELL
        #[arg(long, default_value = "hypercube")]
        window: String,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Also sample the backward halves (doubly infinite trajectories)
        #[arg(long)]
        halves: bool,
        /// Truncate walks so that paths inside the l1 ball of this radius are complete
        #[arg(long)]
        protect: Option<i64>,
    },
    /// Analyse a sample file
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        report: Report,
        /// tree depth (tree report)
        #[arg(long)]
        ell: Option<usize>,
        /// epsilon (tree report)
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Evaluate the Green function
    Green {
        #[arg(long)]
        d: usize,
        /// comma separated coordinates; the origin when absent
        #[arg(long)]
        x: Option<String>,
    },
    /// Capacity and equilibrium measure of a window
    Cap {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "hypercube")]
        window: String,
        /// Monte Carlo with this many walks per site instead of the exact solve
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Numerical percolation certificate along the scale ladder
    Certify {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long)]
        l0: Option<String>,
        #[arg(long)]
        q0: Option<f64>,
        #[arg(long)]
        p_gc: Option<f64>,
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long)]
        c1: Option<f64>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Run a JSON config through the result store
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Result store directory
        #[arg(long, default_value = "results")]
        store: PathBuf,
    },
    /// List the store, or export the tables of one stored result
    Report {
        #[arg(long, default_value = "results")]
        store: PathBuf,
        #[arg(long)]
        hash: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Components,
    Ubiquity,
    Tree,
    Bridges,
}

fn parse_window(d: usize, spec: &str) -> Result<Window> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let num = |what: &str| -> Result<u32> { arg.parse().with_context(|| format!("window {kind}: bad {what} {arg:?}")) };
    Ok(match kind {
        "hypercube" => Window::hypercube(d)?,
        "union" => Window::hypercube_union(d)?,
        "ball" => Window::ball(LatticePoint::origin(d), num("radius")?)?,
        "box" => Window::cube_box(LatticePoint::origin(d), num("side")?)?,
        "tree" => Arc::try_unwrap(Tree::new(d, num("depth")? as usize)?.window().clone()).unwrap_or_else(|w| (*w).clone()),
        _ => bail!("unknown window {spec:?} (hypercube | union | ball:R | box:N | tree:ELL)"),
    })
}

fn parse_point(d: usize, s: &str) -> Result<Vec<i64>> {
    let x: Vec<i64> = s.split(',').map(|c| c.trim().parse()).collect::<std::result::Result<_, _>>().context("--x")?;
    if x.len() != d {
        bail!("--x has {} coordinates, d = {d}", x.len());
    }
    Ok(x)
}

fn print_json<T: serde::Serialize>(v: &T, out: Option<&Path>) -> Result<()> {
    let s = serde_json::to_string_pretty(v)?;
    match out {
        Some(p) => std::fs::write(p, s + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => {
            use std::io::Write;
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout(), "{s}");
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    rayon::ThreadPoolBuilder::new().num_threads(cli.workers.max(1)).build_global().ok();
    let out = cli.out.as_deref();
    match cli.cmd {
        Cmd::Sample { d, window, u, n, halves, protect } => {
            let ev = Arc::new(GreenEvaluator::new(d)?);
            let w = Arc::new(parse_window(d, &window)?);
            let profile = Arc::new(equilibrium_exact(&ev, w.clone())?);
            let cfg = EscapeConfig::default();
            let ws = match protect {
                Some(r) => WalkSampler::protected(ev.clone(), Some(profile), w.clone(), &Protection::ball(&ev, LatticePoint::origin(d), r)?, &cfg)?,
                None => WalkSampler::new(ev.clone(), profile, &cfg)?,
            };
            let samples = sample_many(&ws, u, n, cli.seed, halves)?;
            let batch = SampleBatch::new(w, samples)?;
            let path = out.context("sample needs --out <file> (.json for JSON, anything else for binary)")?;
            batch.save(path)?;
            eprintln!("wrote {} samples to {}", batch.samples.len(), path.display());
        }
        Cmd::Analyze { input, report, ell, epsilon } => {
            let batch = SampleBatch::load(&input)?;
            let mut rows = Vec::new();
            for (i, s) in batch.samples.iter().enumerate() {
                let row = match report {
                    Report::Components => {
                        let dec = vacant_components(s)?;
                        serde_json::json!({
                            "sample": i,
                            "vacant": s.vacant().len(),
                            "components": dec.count(),
                            "largest": dec.largest().map(|c| dec.sizes()[c as usize]),
                        })
                    }
                    Report::Ubiquity => serde_json::json!({ "sample": i, "verdict": check_g_u(s)? }),
                    Report::Bridges => {
                        let dec = components(s.vacant(), None)?;
                        let mut order: Vec<usize> = (0..dec.count()).collect();
                        order.sort_by_key(|&c| std::cmp::Reverse(dec.sizes()[c]));
                        if order.len() < 2 {
                            serde_json::json!({ "sample": i, "bridges": null, "reason": "fewer than two vacant components" })
                        } else {
                            let a = dec.members(order[0] as u32);
                            let b = dec.members(order[1] as u32);
                            let m = s.vacant().difference(&a.union(&b)?)?;
                            let br = find_bridges(&a, &b, &m)?;
                            serde_json::json!({ "sample": i, "sizes": [a.len(), b.len()], "bridges": br.len() })
                        }
                    }
                    Report::Tree => {
                        let (ell, eps) = (ell.context("tree report needs --ell")?, epsilon.context("tree report needs --epsilon")?);
                        let d = batch.window.dim();
                        let tree = Tree::new(d, ell)?;
                        if tree.window().descriptor() != batch.window.descriptor() {
                            bail!("sample window is not the tree window; sample with --window tree:{ell} --halves --protect {ell}");
                        }
                        let targets: Vec<LatticePoint> = (0..tree.len()).map(|v| tree.window().point(tree.site(v))).collect();
                        let occ = occupation_numbers(s, &targets)?;
                        let trace: Vec<bool> = (0..tree.len()).map(|v| s.occupied().contains(tree.site(v))).collect();
                        let outcome = evaluate_tree(&tree, &occ, &trace, d, eps, big_l(d, eps, ell as u64));
                        serde_json::json!({ "sample": i, "outcome": outcome })
                    }
                };
                rows.push(row);
            }
            print_json(&rows, out)?;
        }
        Cmd::Green { d, x } => {
            let ev = GreenEvaluator::new(d)?;
            let x = match x {
                Some(s) => parse_point(d, &s)?,
                None => vec![0; d],
            };
            print_json(&serde_json::json!({ "d": d, "x": x, "g": ev.green(&x)?, "tolerance": ev.tolerance() }), out)?;
        }
        Cmd::Cap { d, window, mc } => {
            let ev = Arc::new(GreenEvaluator::new(d)?);
            let w = Arc::new(parse_window(d, &window)?);
            let profile = match mc {
                None => equilibrium_exact(&ev, w)?,
                Some(n) => {
                    let exact = Arc::new(equilibrium_exact(&ev, w.clone())?);
                    let ws = WalkSampler::new(ev.clone(), exact, &EscapeConfig::default())?;
                    equilibrium_mc(&ws, n, cli.seed)?
                }
            };
            print_json(&profile.summary(), out)?;
        }
        Cmd::Certify { d, u, l0, q0, p_gc, c0, c1, n_max } => {
            let mut cfg = RunConfig::new(Experiment::Certificate);
            cfg.d = Some(d);
            cfg.u_grid = u.into_iter().collect();
            cfg.l0 = l0;
            cfg.q0 = q0;
            cfg.p_gc = p_gc;
            cfg.c0 = c0;
            cfg.c1 = c1;
            cfg.n_max = n_max;
            cfg.seed = cli.seed;
            cfg.workers = cli.workers;
            let r = harness::run(&cfg, None, true)?;
            print_json(&r.details, out)?;
        }
        Cmd::Run { config, store } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = RunConfig::from_json(&text)?;
            cfg.workers = cli.workers;
            if let Some(o) = out {
                cfg.output_path = Some(o.display().to_string());
            }
            let st = Store::open(&store)?;
            let cached = !cli.force && st.get(&cfg.hash())?.is_some();
            let r = harness::run(&cfg, Some(&st), cli.force)?;
            if cached {
                if let Some(o) = out {
                    harness::write_outputs(&r, o)?;
                }
            }
            eprintln!("{} {} ({})", r.config_hash, cfg.experiment.name(), if cached { "cached" } else { "computed" });
            for e in &r.estimates {
                match (e.lower, e.upper) {
                    (Some(l), Some(u)) => println!("{}\t{}\t[{l}, {u}]", e.name, e.value),
                    _ => println!("{}\t{}", e.name, e.value),
                }
            }
        }
        Cmd::Report { store, hash } => {
            let st = Store::open(&store)?;
            match hash {
                None => print_json(&st.index()?, out)?,
                Some(h) => {
                    let r = st.get(&h)?.with_context(|| format!("no stored result {h}"))?;
                    match out {
                        Some(o) => {
                            harness::write_outputs(&r, o)?;
                            eprintln!("wrote {} tables to {}", r.tables.len(), o.display());
                        }
                        None => {
                            for t in &r.tables {
                                print!("{}", t.render(&r.config_hash, r.config.seed)?);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
