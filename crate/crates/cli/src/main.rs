use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};
use disklab::excursions::{sample_cloud_direct, SampleOptions};
use disklab::experiment::{run, write_csv, ExperimentConfig};
use disklab::gff::GffSampler;
use disklab::lattice::LatticeDisk;
use disklab::loopsoup::{combined_occupied, sample_loop_soup, PeelOrder, PeelingPlan};
use disklab::potential::{equilibrium_measure, DirichletSolver};
use disklab::render::{render, render_traces, save_png, Style};
use disklab::rng::{derive_seed, stream, tag};
use disklab::sle::zipper::trace_points;
use disklab::sle::{rho_kappa_alpha, sample_driving, Scheme};
use disklab::validation::{run_criterion, Scale, CRITERIA};
use disklab::VertexSet;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "disklab", about = "Excursion clouds, loop soups, free fields and Loewner chains on the lattice disk")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Options shared by every experiment.
#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra parameters as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Record wall time in every row.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Vertex, edge and boundary counts as JSON.
    LatticeInfo {
        #[arg(long)]
        n: u32,
    },
    /// Capacity, Green function or equilibrium measure as JSON.
    Potential {
        #[arg(long, default_value_t = 32)]
        n: u32,
        #[arg(long, value_parser = ["cap", "green", "equilibrium"])]
        op: String,
        /// Radius of the ball K for cap and equilibrium.
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        /// Lattice coordinates `i,j` of the Green function arguments.
        #[arg(long, default_value = "0,0")]
        x: String,
        #[arg(long, default_value = "0,0")]
        y: String,
        /// Print the capacity convergence sweep as CSV instead.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<u32>,
    },
    /// Excursion counts; optionally a picture of one cloud.
    Excursions {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        u: Option<f64>,
        #[arg(long, value_parser = ["direct", "local", "single"])]
        sampler: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        render: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Loop-length and cluster-size histograms.
    Loopsoup {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Accepted for compatibility; histograms are always emitted.
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Level-set crossing estimates; optionally a picture of one level set.
    Gff {
        #[arg(long)]
        n: Option<u32>,
        /// Levels, comma separated.
        #[arg(long)]
        h: Option<String>,
        #[arg(long, value_parser = ["disk-crossing", "boundary"])]
        event: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        render: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// One crossing probability.
    Crossing {
        #[arg(long, value_parser = ["vacant", "vacant-loops", "gff", "cable"])]
        model: Option<String>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        param: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Vacant-set crossing curves and logistic midpoints over several n.
    Sweep {
        #[arg(long)]
        ns: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Boundary approach of SLE(κ, ρ) or the restriction check.
    Sle {
        #[arg(long)]
        kappa: Option<f64>,
        /// Exponents, comma separated.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_max: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_parser = ["hit", "restriction"], default_value = "hit")]
        stat: String,
        /// Draw a few traces at the first α.
        #[arg(long)]
        render: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Walk/Brownian coupling experiments.
    Coupling {
        #[arg(long, value_parser = ["kmt", "last-exit", "capacity", "beurling", "excursion-match"])]
        experiment: String,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Picture of an excursion cloud (plus loop clusters) with its interface in red.
    Render {
        #[arg(long, default_value_t = 128)]
        n: u32,
        #[arg(long, default_value_t = 0.8)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 800)]
        size: u32,
        /// Arc `from,to` in radians whose complement the interface is seen from.
        #[arg(long, default_value = "0,3.141592653589793")]
        arc: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the acceptance criteria, one PASS/FAIL line each.
    Validate {
        #[arg(long, value_parser = ["full", "smoke"], default_value = "full")]
        scale: String,
        /// Criteria to run, comma separated (all when absent).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Runs an experiment described entirely by a config file.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn build(experiment: &str, common: &Common, flags: &[(&str, Option<String>)]) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::new(experiment, 0),
    };
    if !experiment.is_empty() {
        cfg.experiment = experiment.into();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.output = Some(o.display().to_string());
    }
    cfg.timing |= common.timing;
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.params.insert((*k).into(), v.clone());
        }
    }
    for kv in &common.set {
        let Some((k, v)) = kv.split_once('=') else { bail!("--set expects key=value, got '{kv}'") };
        cfg.params.insert(k.trim().into(), v.trim().into());
    }
    Ok(cfg)
}

fn emit(cfg: &ExperimentConfig) -> Result<()> {
    let rows = run(cfg)?;
    match &cfg.output {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {p}"))?);
            write_csv(&rows, &mut f)?;
            f.flush()?;
        }
        None => write_csv(&rows, &mut std::io::stdout().lock())?,
    }
    Ok(())
}

fn s<T: ToString>(x: &Option<T>) -> Option<String> {
    x.as_ref().map(|v| v.to_string())
}

fn coords(text: &str) -> Result<(i32, i32)> {
    let (a, b) = text.split_once(',').context("expected i,j")?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::LatticeInfo { n } => {
            let l = LatticeDisk::new(n)?;
            let info = json!({
                "n": n,
                "vertices": l.len(),
                "interior_edges": l.interior_edges().len(),
                "boundary_edges": l.boundary_edges().len(),
                "outer_boundary": l.outer_boundary().len(),
                "inner_boundary": l.inner_boundary().len(),
            });
            println!("{}", serde_json::to_string_pretty(&info)?);
        }
        Cmd::Potential { n, op, r, x, y, sweep } => {
            if !sweep.is_empty() {
                let exact = disklab::potential::continuum_capacity_ball(r)?;
                println!("n,cap_discrete,cap_continuum,error");
                for p in disklab::potential::capacity_sequence(disklab::potential::ContinuumSet::Ball { radius: r }, &sweep)? {
                    println!("{},{},{},{}", p.n, p.capacity, exact, (p.capacity - exact).abs());
                }
                return Ok(());
            }
            let l = LatticeDisk::new(n)?;
            let value = match op.as_str() {
                "green" => {
                    let (xi, xj) = coords(&x)?;
                    let (yi, yj) = coords(&y)?;
                    let a = l.index_of(xi, xj).context("x is not a vertex of the disk")?;
                    let b = l.index_of(yi, yj).context("y is not a vertex of the disk")?;
                    json!({ "n": n, "x": [xi, xj], "y": [yi, yj], "green": DirichletSolver::full(&l)?.green(a, b)? })
                }
                _ => {
                    let k = l.ball_vertices((0.0, 0.0), r)?;
                    let eq = equilibrium_measure(&l, &k)?;
                    if op == "cap" {
                        json!({ "n": n, "r": r, "capacity": eq.capacity })
                    } else {
                        let support: Vec<_> = eq.support.iter().map(|&(v, m)| json!({ "vertex": l.coord(v), "mass": m })).collect();
                        json!({ "n": n, "r": r, "capacity": eq.capacity, "support": support })
                    }
                }
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Cmd::Excursions { n, u, sampler, reps, render: pic, common } => {
            let cfg = build("excursions", &common, &[("n", s(&n)), ("u", s(&u)), ("sampler", sampler), ("reps", s(&reps))])?;
            if let Some(path) = pic {
                let l = LatticeDisk::new(n.unwrap_or(64))?;
                let mut rng = stream(derive_seed(cfg.seed, tag("render")), 0);
                let cloud = sample_cloud_direct(&l, u.unwrap_or(1.0), SampleOptions::default(), &mut rng)?;
                save_png(&render(&l, &cloud.occupied, &Style::default())?, &path)?;
            }
            emit(&cfg)?;
        }
        Cmd::Loopsoup { n, lambda, reps, stats: _, common } => {
            emit(&build("loopsoup", &common, &[("n", s(&n)), ("lambda", s(&lambda)), ("reps", s(&reps))])?)?;
        }
        Cmd::Gff { n, h, event, reps, render: pic, common } => {
            let cfg = build("gff", &common, &[("n", s(&n)), ("h", h.clone()), ("event", event), ("reps", s(&reps))])?;
            if let Some(path) = pic {
                let l = LatticeDisk::new(n.unwrap_or(64))?;
                let level: f64 = h.as_deref().unwrap_or("0").split(',').next().unwrap().trim().parse()?;
                let phi = GffSampler::new(&l)?.sample(&mut stream(derive_seed(cfg.seed, tag("render")), 0));
                let style = Style { levels: Some((phi, level)), ..Style::default() };
                save_png(&render(&l, &VertexSet::empty(&l), &style)?, &path)?;
            }
            emit(&cfg)?;
        }
        Cmd::Crossing { model, n, param, r, eps, reps, common } => {
            let flags = [("model", model), ("n", s(&n)), ("param", s(&param)), ("r", s(&r)), ("eps", s(&eps)), ("reps", s(&reps))];
            emit(&build("crossing", &common, &flags)?)?;
        }
        Cmd::Sweep { ns, grid, reps, common } => {
            emit(&build("sweep", &common, &[("ns", ns), ("grid", grid), ("reps", s(&reps))])?)?;
        }
        Cmd::Sle { kappa, alpha, dt, t_max, reps, stat, render: pic, common } => {
            let experiment = if stat == "hit" { "sle-hit" } else { "restriction" };
            let flags = [("kappa", s(&kappa)), ("alpha", alpha.clone()), ("dt", s(&dt)), ("T", s(&t_max)), ("reps", s(&reps))];
            let cfg = build(experiment, &common, &flags)?;
            if let Some(path) = pic {
                let k = kappa.unwrap_or(8.0 / 3.0);
                let a: f64 = alpha.as_deref().unwrap_or("0.3").split(',').next().unwrap().trim().parse()?;
                let rho = rho_kappa_alpha(k, a)?;
                let step = dt.unwrap_or(1e-3);
                let t = t_max.unwrap_or(1.0);
                let traces = (0..4)
                    .map(|i| {
                        let d = sample_driving(k, rho, t, step, Scheme::ImplicitEuler, &mut stream(cfg.seed, i))?;
                        Ok(trace_points(&d, 4))
                    })
                    .collect::<Result<Vec<_>>>()?;
                save_png(&render_traces(&traces, 800, 2.0 * t.sqrt() * k.sqrt())?, &path)?;
            }
            emit(&cfg)?;
        }
        Cmd::Coupling { experiment, n, reps, common } => {
            let name = match experiment.as_str() {
                "capacity" => "capacity-general",
                e => e,
            };
            emit(&build(name, &common, &[("n", s(&n)), ("reps", s(&reps))])?)?;
        }
        Cmd::Render { n, u, lambda, seed, size, arc, out } => {
            let l = LatticeDisk::new(n)?;
            let (a, b) = arc.split_once(',').context("--arc expects from,to")?;
            let arc = (a.trim().parse::<f64>()?, b.trim().parse::<f64>()?);
            let mut rng = stream(seed, 0);
            let cloud = sample_cloud_direct(&l, u, SampleOptions::default(), &mut rng)?;
            let occupied = if lambda > 0.0 {
                let plan = PeelingPlan::new(&l, PeelOrder::Hilbert)?;
                let soup = sample_loop_soup(&l, &plan, lambda, &mut stream(seed, 1))?;
                combined_occupied(&l, &cloud.occupied, &soup)
            } else {
                cloud.occupied
            };
            let style = Style { size, levels: None, interface_arc: Some(arc) };
            save_png(&render(&l, &occupied, &style)?, &out)?;
        }
        Cmd::Validate { scale, only, seed, workers } => {
            let scale = if scale == "smoke" { Scale::Smoke } else { Scale::Full };
            let mut failed = 0;
            let mut go = || -> Result<()> {
                for &(id, _, _) in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.0)) {
                    let r = run_criterion(id, scale, seed)?;
                    failed += (!r.passed) as usize;
                    println!("{} criterion {:>2} ({}) [{:.1}s]: {}", if r.passed { "PASS" } else { "FAIL" }, id, r.name, r.seconds, r.detail);
                }
                Ok(())
            };
            match workers {
                Some(w) => disklab::rng::with_workers(w, go)?,
                None => go()?,
            }
            if failed > 0 {
                std::process::exit(1);
            }
        }
        Cmd::Run { common } => {
            if common.config.is_none() {
                bail!("run needs --config");
            }
            emit(&build("", &common, &[])?)?;
        }
    }
    Ok(())
}
