//! Named experiments driven by a flat `key = value` config, emitting CSV rows.
//!
//! ```text
//! # vacant crossing at one intensity
//! experiment = crossing
//! seed = 7
//! workers = 4
//! model = vacant
//! n = 64
//! param = 0.9
//! reps = 1000
//! ```

use crate::coupling::{self, matching::excursion_match};
use crate::error::{Error, Result};
use crate::excursions::{sample_cloud_direct, sample_cloud_single_walk, sample_hitting, SampleOptions};
use crate::lattice::LatticeDisk;
use crate::loopsoup::{loop_clusters, sample_loop_soup, PeelOrder, PeelingPlan};
use crate::percolation::{crossing_probability, gff_curve, threshold_sweep, Context, Estimate, Model, Target};
use crate::potential::{capacity_sequence, continuum_capacity_ball, equilibrium_measure, ContinuumSet};
use crate::rng::{replicate, with_workers, StreamRng};
use crate::sle::restriction::restriction_check;
use crate::sle::{boundary_hit_curve, ApproachParams, Scheme};
use crate::stats::{histogram, mean_and_variance, poisson_gof};
use crate::validation::{run_criterion, Scale, CRITERIA};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

pub const SCHEMA: &str = "# disklab results schema 1";
pub const HEADER: &str = "experiment,params,statistic,value,stderr,seed,wall_seconds";

pub const EXPERIMENTS: [&str; 14] = [
    "capacity",
    "excursions",
    "loopsoup",
    "gff",
    "crossing",
    "sweep",
    "sle-hit",
    "restriction",
    "kmt",
    "last-exit",
    "beurling",
    "excursion-match",
    "capacity-general",
    "validate",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub workers: usize,
    pub output: Option<String>,
    /// Record wall time in each row. Off by default so outputs are byte-reproducible.
    pub timing: bool,
    pub params: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentConfig { experiment: experiment.into(), seed, workers: 1, output: None, timing: false, params: BTreeMap::new() }
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::new("", 0);
        let mut have_experiment = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = |what: &str| Error::Config(format!("line {}: bad {what} '{v}'", i + 1));
            match k {
                "experiment" => {
                    cfg.experiment = v.into();
                    have_experiment = true;
                }
                "seed" => cfg.seed = v.parse().map_err(|_| bad("seed"))?,
                "workers" => cfg.workers = v.parse().map_err(|_| bad("workers"))?,
                "output" => cfg.output = Some(v.into()),
                "timing" => cfg.timing = v.parse().map_err(|_| bad("timing"))?,
                _ => {
                    cfg.params.insert(k.into(), v.into());
                }
            }
        }
        if !have_experiment {
            return Err(Error::Config("missing 'experiment'".into()));
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("experiment = {}\nseed = {}\nworkers = {}\ntiming = {}\n", self.experiment, self.seed, self.workers, self.timing);
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output = {o}");
        }
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: not a number '{v}'"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: not a count '{v}'"))),
        }
    }

    fn list_or<T: std::str::FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("{key}: bad list entry '{t}'"))))
                .collect(),
        }
    }

    fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    fn flat_params(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={}", v.replace(',', " "))).collect::<Vec<_>>().join(";")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub params: String,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub wall_seconds: Option<f64>,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.experiment,
            self.params,
            self.statistic,
            self.value,
            opt(self.stderr),
            self.seed,
            opt(self.wall_seconds)
        )
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: &mut W) -> Result<()> {
    writeln!(out, "{SCHEMA}")?;
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

struct Rows<'a> {
    cfg: &'a ExperimentConfig,
    params: String,
    rows: Vec<ResultRow>,
}

impl Rows<'_> {
    fn push(&mut self, statistic: impl Into<String>, value: f64, stderr: Option<f64>) {
        self.rows.push(ResultRow {
            experiment: self.cfg.experiment.clone(),
            params: self.params.clone(),
            statistic: statistic.into(),
            value,
            stderr,
            seed: self.cfg.seed,
            wall_seconds: None,
        });
    }

    fn estimate(&mut self, statistic: impl Into<String>, e: &Estimate) {
        self.push(statistic, e.p, Some(e.stderr));
    }
}

fn target(cfg: &ExperimentConfig) -> Result<Target> {
    match cfg.str_or("target", "annulus") {
        "annulus" => Ok(Target::Annulus { eps: cfg.f64_or("eps", 0.1)? }),
        "inner-boundary" => Ok(Target::InnerBoundary),
        "boundary-layer" => Ok(Target::BoundaryLayer),
        t => Err(Error::Config(format!("unknown target '{t}'"))),
    }
}

/// Runs the configured experiment on `cfg.workers` threads.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if !EXPERIMENTS.contains(&cfg.experiment.as_str()) {
        return Err(Error::Config(format!("unknown experiment '{}'", cfg.experiment)));
    }
    if cfg.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    if cfg.raw("reps") == Some("0") {
        return Ok(Vec::new());
    }
    let start = Instant::now();
    let mut out = Rows { cfg, params: cfg.flat_params(), rows: Vec::new() };
    with_workers(cfg.workers, || dispatch(cfg, &mut out))?;
    if cfg.timing {
        let secs = start.elapsed().as_secs_f64();
        for r in &mut out.rows {
            r.wall_seconds = Some(secs);
        }
    }
    Ok(out.rows)
}

fn dispatch(cfg: &ExperimentConfig, out: &mut Rows) -> Result<()> {
    let seed = cfg.seed;
    match cfg.experiment.as_str() {
        "capacity" => {
            let r = cfg.f64_or("radius", 0.5)?;
            let exact = continuum_capacity_ball(r)?;
            for p in capacity_sequence(ContinuumSet::Ball { radius: r }, &cfg.list_or("ns", &[16u32, 32, 64])?)? {
                out.push(format!("cap_discrete[n={}]", p.n), p.capacity, None);
                out.push(format!("error[n={}]", p.n), (p.capacity - exact).abs(), None);
            }
            out.push("cap_continuum", exact, None);
        }
        "excursions" => {
            let (n, u, reps) = (cfg.usize_or("n", 32)? as u32, cfg.f64_or("u", 1.0)?, cfg.usize_or("reps", 1000)?);
            let l = LatticeDisk::new(n)?;
            let k = l.ball_vertices((0.0, 0.0), cfg.f64_or("r", 0.3)?)?;
            let eq = equilibrium_measure(&l, &k)?;
            let opts = SampleOptions::default();
            let sampler = cfg.str_or("sampler", "direct");
            let (counts, mean): (Vec<Result<u64>>, f64) = match sampler {
                "direct" => (
                    replicate(seed, reps, |_, rng: &mut StreamRng| Ok(sample_cloud_direct(&l, u, opts, rng)?.count() as u64)),
                    u * l.boundary_edges().len() as f64,
                ),
                "local" => (
                    replicate(seed, reps, |_, rng: &mut StreamRng| Ok(sample_hitting(&l, u, &eq, opts, rng)?.count() as u64)),
                    u * eq.capacity,
                ),
                "single" => (
                    replicate(seed, reps, |_, rng: &mut StreamRng| Ok(sample_cloud_single_walk(&l, u, opts, rng)?.count() as u64)),
                    u * l.boundary_edges().len() as f64,
                ),
                s => return Err(Error::Config(format!("unknown sampler '{s}'"))),
            };
            let counts: Vec<u64> = counts.into_iter().collect::<Result<_>>()?;
            let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let (m, v) = mean_and_variance(&xs);
            out.push("count_mean", m, Some((v / xs.len() as f64).sqrt()));
            out.push("count_expected", mean, None);
            out.push("poisson_p_value", poisson_gof(&counts, mean).p_value, None);
        }
        "loopsoup" => {
            let (n, lambda, reps) = (cfg.usize_or("n", 16)? as u32, cfg.f64_or("lambda", 0.5)?, cfg.usize_or("reps", 100)?);
            let l = LatticeDisk::new(n)?;
            let plan = PeelingPlan::new(&l, PeelOrder::Hilbert)?;
            let stats: Vec<(Vec<u64>, Vec<u64>)> = replicate(seed, reps, |_, rng: &mut StreamRng| -> Result<_> {
                let soup = sample_loop_soup(&l, &plan, lambda, rng)?;
                let lengths = soup.loops.iter().map(|lp| lp.len() as u64).collect();
                let clusters = loop_clusters(&l, &soup).iter().map(|c| c.len() as u64).collect();
                Ok((lengths, clusters))
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let lengths = histogram(stats.iter().flat_map(|s| s.0.iter().copied()));
            let clusters = histogram(stats.iter().flat_map(|s| s.1.iter().copied()));
            for (k, &c) in lengths.iter().enumerate().filter(|x| *x.1 > 0) {
                out.push(format!("loop_length[{k}]"), c as f64 / reps as f64, None);
            }
            for (k, &c) in clusters.iter().enumerate().filter(|x| *x.1 > 0) {
                out.push(format!("cluster_size[{k}]"), c as f64 / reps as f64, None);
            }
        }
        "gff" => {
            let n = cfg.usize_or("n", 32)? as u32;
            let event = match cfg.str_or("event", "disk-crossing") {
                "disk-crossing" => target(cfg)?,
                "boundary" => Target::InnerBoundary,
                e => return Err(Error::Config(format!("unknown event '{e}'"))),
            };
            let ctx = Context::new(n, true, false)?;
            let grid = cfg.list_or("h", &[0.5])?;
            let cable = cfg.str_or("cable", "false") == "true";
            let est = gff_curve(&ctx, cfg.f64_or("r", 0.3)?, event, &grid, cable, cfg.usize_or("reps", 1000)?, seed)?;
            for (h, e) in grid.iter().zip(&est) {
                out.estimate(format!("p[h={h}]"), e);
            }
        }
        "crossing" => {
            let n = cfg.usize_or("n", 32)? as u32;
            let p = cfg.f64_or("param", 1.0)?;
            let model = match cfg.str_or("model", "vacant") {
                "vacant" => Model::Vacant { u: p },
                "vacant-loops" => Model::VacantWithLoops { u: p, lambda: cfg.f64_or("lambda", 0.5)? },
                "gff" => Model::GffLevel { h: p },
                "cable" => Model::CableGffLevel { h: p },
                m => return Err(Error::Config(format!("unknown model '{m}'"))),
            };
            let ctx = Context::for_model(n, model)?;
            let e = crossing_probability(&ctx, model, cfg.f64_or("r", 0.3)?, target(cfg)?, cfg.usize_or("reps", 1000)?, seed)?;
            out.estimate("p_hat", &e);
        }
        "sweep" => {
            let rows = threshold_sweep(
                &cfg.list_or("ns", &[32u32, 64])?,
                cfg.f64_or("r", 0.3)?,
                target(cfg)?,
                &cfg.list_or("grid", &[0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.8])?,
                cfg.f64_or("lambda", 0.0)?,
                cfg.usize_or("reps", 500)?,
                seed,
            )?;
            for row in rows {
                for (u, e) in row.grid.iter().zip(&row.estimates) {
                    out.estimate(format!("p[n={},u={u}]", row.n), e);
                }
                out.push(format!("midpoint[n={}]", row.n), row.fit.midpoint, Some(row.fit.midpoint_se));
            }
        }
        "sle-hit" => {
            let params = ApproachParams {
                t_max: cfg.f64_or("T", 1.0)?,
                dt: cfg.f64_or("dt", 1e-3)?,
                dt_min: cfg.f64_or("dt_min", 1e-12)?,
                delta: cfg.f64_or("delta", 1e-4)?,
                gap_ratio: cfg.f64_or("gap_ratio", 1e-2)?,
                scheme: match cfg.str_or("scheme", "implicit") {
                    "implicit" => Scheme::ImplicitEuler,
                    "exact" => Scheme::ExactSquaredBessel,
                    s => return Err(Error::Config(format!("unknown scheme '{s}'"))),
                },
            };
            let rows = boundary_hit_curve(cfg.f64_or("kappa", 8.0 / 3.0)?, &cfg.list_or("alpha", &[0.2, 0.6])?, params, cfg.usize_or("reps", 100)?, seed)?;
            for r in rows {
                let se = (r.fraction * (1.0 - r.fraction) / r.reps.max(1) as f64).sqrt();
                out.push(format!("fraction[alpha={}]", r.alpha), r.fraction, Some(se));
                out.push(format!("fraction_half_time[alpha={}]", r.alpha), r.fraction_half_time, None);
            }
        }
        "restriction" => {
            let r = restriction_check(cfg.f64_or("alpha", 1.0 / 3.0)?, cfg.f64_or("x0", 1.0)?, cfg.f64_or("delta", 0.5)?, cfg.usize_or("reps", 1000)?, seed)?;
            out.push("p_hat", r.p_hat, Some(r.stderr));
            out.push("p_exact", r.p_exact, None);
        }
        "kmt" => {
            let reps = cfg.usize_or("reps", 200)?;
            if cfg.str_or("dim", "1") == "2" {
                let rep = coupling::planar_scaling(&cfg.list_or("ns", &[16u32, 32])?, reps, seed)?;
                for r in &rep.rows {
                    out.push(format!("median_sup[n={}]", r.size), r.median, None);
                    out.push(format!("censored[n={}]", r.size), r.censored as f64, None);
                }
            } else {
                let rep = coupling::dyadic_scaling(&cfg.list_or("horizons", &[256usize, 1024, 4096])?, reps, seed)?;
                for r in &rep.rows {
                    out.push(format!("median_dev[T={}]", r.size), r.median, None);
                }
                out.push("fit_r_squared", rep.fit.r_squared, None);
            }
        }
        "last-exit" => {
            let rep = coupling::last_exit_gap(cfg.f64_or("r", 0.6)?, cfg.usize_or("n", 32)? as u32, cfg.usize_or("reps", 200)?, &cfg.list_or("s", &[1.0, 5.0, 20.0])?, seed)?;
            for (s, f) in rep.exceedance {
                out.push(format!("exceedance[s={s}]"), f, None);
            }
            out.push("censored", rep.censored as f64, None);
            out.push("angle_ks_p_value", rep.angle_test.p_value, None);
        }
        "beurling" => {
            let rep = coupling::beurling_check(cfg.usize_or("n", 64)? as u32, cfg.f64_or("radius", 0.3)?, &cfg.list_or("d", &[2u32, 4, 8, 16])?, cfg.usize_or("reps", 2000)?, seed)?;
            for r in &rep.rows {
                out.push(format!("escape[d={}]", r.d), r.p, Some((r.p * (1.0 - r.p) / r.reps.max(1) as f64).sqrt()));
            }
            out.push("exponent", rep.exponent, None);
        }
        "excursion-match" => {
            let rep = excursion_match(cfg.usize_or("n", 32)? as u32, cfg.f64_or("u", 0.5)?, cfg.f64_or("r", 0.5)?, cfg.usize_or("reps", 100)?, &cfg.list_or("s", &[1.0, 5.0, 20.0])?, seed)?;
            out.push("cap_discrete", rep.cap_discrete, None);
            out.push("cap_continuum", rep.cap_continuum, None);
            for (s, f) in rep.exceedance {
                out.push(format!("exceedance[s={s}]"), f, None);
            }
        }
        "capacity-general" => {
            for r in coupling::capacity_convergence(&cfg.list_or("ns", &[16u32, 32, 64])?)? {
                out.push(format!("cap[{},n={}]", r.set, r.n), r.capacity, None);
                if let Some(e) = r.error {
                    out.push(format!("error[{},n={}]", r.set, r.n), e, None);
                }
            }
        }
        "validate" => {
            let scale = if cfg.str_or("scale", "full") == "smoke" { Scale::Smoke } else { Scale::Full };
            let ids: Vec<u8> = cfg.list_or("criteria", &CRITERIA.map(|c| c.0))?;
            for id in ids {
                let r = run_criterion(id, scale, seed)?;
                out.push(format!("criterion[{id}]"), if r.passed { 1.0 } else { 0.0 }, None);
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let cfg = ExperimentConfig::new("crossing", 99)
            .set("model", "gff")
            .set("param", 0.1 + 0.2)
            .set("ns", "16,32");
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.f64_or("param", 0.0).unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn comments_and_errors() {
        let cfg = ExperimentConfig::parse("# hi\nexperiment = kmt # trailing\n\nreps = 3\n").unwrap();
        assert_eq!(cfg.experiment, "kmt");
        assert!(ExperimentConfig::parse("reps = 3").is_err());
        assert!(ExperimentConfig::parse("experiment = kmt\nnonsense").is_err());
        assert!(run(&ExperimentConfig::new("nope", 1)).is_err());
    }

    #[test]
    fn zero_reps_is_empty() {
        let cfg = ExperimentConfig::new("crossing", 1).set("reps", 0);
        assert!(run(&cfg).unwrap().is_empty());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let base = ExperimentConfig::new("crossing", 5).set("n", 12).set("param", 0.8).set("reps", 60);
        let csv = |w: usize| {
            let mut c = base.clone();
            c.workers = w;
            let mut buf = Vec::new();
            write_csv(&run(&c).unwrap(), &mut buf).unwrap();
            buf
        };
        let one = csv(1);
        assert_eq!(one, csv(8));
        let text = String::from_utf8(one).unwrap();
        assert!(text.starts_with(SCHEMA));
        let mut other = base.clone();
        other.seed = 6;
        assert_ne!(run(&other).unwrap(), run(&base).unwrap());
    }
}
