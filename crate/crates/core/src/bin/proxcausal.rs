use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use proxcausal::benchmark::run_benchmark;
use proxcausal::config::{ProxyMode, RunConfig, Target};
use proxcausal::discovery::{discover_graph, BipartiteGraph, ProxyRule};
use proxcausal::discretize::BinningStrategy;
use proxcausal::estimator::{fit_and_estimate, FittedEstimate};
use proxcausal::{Dataset, Error, Result};

#[derive(Parser)]
#[command(name = "proxcausal", version, about = "Proximal causal discovery and dose-response estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a built-in scenario to CSV (plus a JSON sidecar).
    Simulate(Opts),
    /// Test every treatment/outcome edge and write the graph.
    Discover(Opts),
    /// Estimate the dose-response curve of the first target.
    Estimate(Opts),
    /// Discover, select proxies and estimate every target.
    Pipeline(Opts),
    /// Repeat the pipeline and score it against the ground truth.
    Benchmark(Opts),
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// Flat JSON config (a benchmark report is accepted too).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in scenario id, e.g. synthetic-main or proxy-strength:10:linear:causal.
    #[arg(long)]
    scenario: Option<String>,
    /// Dataset CSV with `name:a|y|x` headers.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Bin counts M,N,L.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    bins: Option<Vec<usize>>,
    #[arg(long)]
    strategy: Option<BinningStrategy>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    proxy_rule: Option<ProxyRule>,
    /// Target such as `A1,A3->Y1`; repeat for several.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long)]
    proxy_mode: Option<ProxyMode>,
    /// Treatment-inducing proxy (explicit mode).
    #[arg(long)]
    z: Option<String>,
    /// Outcome-inducing proxy (explicit mode).
    #[arg(long)]
    w: Option<String>,
    #[arg(long)]
    lambda_h: Option<f64>,
    #[arg(long)]
    lambda_q: Option<f64>,
    /// Skip the treatment bridge (outcome-regression curve).
    #[arg(long)]
    no_q: bool,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    grid_lo: Option<f64>,
    #[arg(long)]
    grid_hi: Option<f64>,
    /// Monte Carlo replicates for ground truth.
    #[arg(long)]
    replicates: Option<usize>,
    /// Benchmark repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Do not score discovery in benchmarks.
    #[arg(long)]
    no_discovery: bool,
}

impl Opts {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if self.$f.is_some() { c.$f = self.$f.clone(); } )* };
        }
        set!(seed, n, strategy, alpha, proxy_rule, proxy_mode, grid_points, grid_lo, grid_hi, replicates);
        set_opt!(z, w, lambda_h, lambda_q, jobs, out);
        if let Some(s) = &self.scenario {
            c.scenario = Some(s.clone());
            c.csv = None;
        }
        if let Some(p) = &self.csv {
            c.csv = Some(p.clone());
            c.scenario = None;
        }
        if let Some(b) = &self.bins {
            c.bins = [b[0], b[1], b[2]];
        }
        if !self.targets.is_empty() {
            c.targets = self.targets.clone();
        }
        if let Some(r) = self.reps {
            if c.reps != r {
                c.rep_seeds = None;
            }
            c.reps = r;
        }
        if self.seed.is_some() {
            c.rep_seeds = None;
        }
        if self.z.is_some() || self.w.is_some() {
            if self.proxy_mode.is_none() {
                c.proxy_mode = ProxyMode::Explicit;
            }
        }
        if self.no_q {
            c.use_q = false;
        }
        if self.no_discovery {
            c.discovery = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn out_dir(c: &RunConfig) -> Result<PathBuf> {
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn discover(c: &RunConfig, ds: &Dataset) -> Result<BipartiteGraph> {
    discover_graph(ds, c.bins(), c.strategy, c.alpha, c.proxy_rule)
}

fn write_graph(dir: &Path, g: &BipartiteGraph) -> Result<()> {
    write(&dir.join("graph.json"), &to_json(g))?;
    write(&dir.join("graph.dot"), &g.to_dot())?;
    for w in &g.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn estimate_target(
    c: &RunConfig,
    ds: &Dataset,
    target: &Target,
    graph: Option<&BipartiteGraph>,
) -> Result<FittedEstimate> {
    let assignment = c.assignment(ds, target, graph)?;
    fit_and_estimate(ds, &assignment, &c.estimate_options(target.treated.len()))
}

fn write_estimate(dir: &Path, stem: &str, target: &Target, fit: &FittedEstimate) -> Result<()> {
    write(&dir.join(format!("{stem}.csv")), &fit.curve.to_csv_string())?;
    write(
        &dir.join(format!("{stem}.svg")),
        &fit.curve.to_svg(&format!("E[{} | do({})]", target.outcome, target.treated.join(",")), None),
    )?;
    write(&dir.join(format!("{stem}_h.json")), &to_json(&fit.h))?;
    if let Some(q) = &fit.q {
        write(&dir.join(format!("{stem}_q.json")), &to_json(q))?;
    }
    let summary = json!({
        "target": target.to_string(),
        "assignment": fit.assignment,
        "kernel": fit.config,
        "curve": fit.curve,
        "propensity_bandwidths": fit.propensity.as_ref().map(|p| [p.dose_bandwidth, p.proxy_bandwidth]),
    });
    write(&dir.join(format!("{stem}.json")), &to_json(&summary))
}

fn needs_graph(c: &RunConfig) -> bool {
    c.proxy_mode == ProxyMode::Auto
}

fn run(command: Command) -> Result<()> {
    let opts = match &command {
        Command::Simulate(o)
        | Command::Discover(o)
        | Command::Estimate(o)
        | Command::Pipeline(o)
        | Command::Benchmark(o) => o,
    };
    let c = opts.resolve()?;
    if let Some(j) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match command {
        Command::Simulate(_) => {
            let spec = c
                .scm()?
                .ok_or_else(|| Error::Config("simulate needs a built-in scenario".into()))?;
            let ds = spec.sample(c.n, c.seed)?;
            let dir = out_dir(&c)?;
            write(&dir.join("data.csv"), &ds.to_csv_string())?;
            let sidecar = json!({
                "scenario": c.scenario,
                "n": c.n,
                "seed": c.seed,
                "spec": spec,
            });
            write(&dir.join("data.json"), &to_json(&sidecar))?;
        }
        Command::Discover(_) => {
            let ds = c.load_dataset(c.seed)?;
            let g = discover(&c, &ds)?;
            write_graph(&out_dir(&c)?, &g)?;
            println!("{} edges", g.edge_count());
        }
        Command::Estimate(_) => {
            let ds = c.load_dataset(c.seed)?;
            let target = c.parsed_targets()?.remove(0);
            let graph = needs_graph(&c).then(|| discover(&c, &ds)).transpose()?;
            let fit = estimate_target(&c, &ds, &target, graph.as_ref())?;
            write_estimate(&out_dir(&c)?, "curve", &target, &fit)?;
        }
        Command::Pipeline(_) => {
            let ds = c.load_dataset(c.seed)?;
            let dir = out_dir(&c)?;
            let g = discover(&c, &ds)?;
            write_graph(&dir, &g)?;
            let mut results = Vec::new();
            for (k, target) in c.parsed_targets()?.iter().enumerate() {
                match estimate_target(&c, &ds, target, Some(&g)) {
                    Ok(fit) => {
                        write_estimate(&dir, &format!("curve_{}", k + 1), target, &fit)?;
                        results.push(json!({"target": target.to_string(), "assignment": fit.assignment}));
                    }
                    Err(e) => {
                        eprintln!("warning: {target}: {}: {e}", e.category());
                        results.push(json!({"target": target.to_string(), "error": e.category()}));
                    }
                }
            }
            write(&dir.join("pipeline.json"), &to_json(&json!({"config": c, "targets": results})))?;
        }
        Command::Benchmark(_) => {
            let report = run_benchmark(&c)?;
            write(&out_dir(&c)?.join("report.json"), &report.to_json_string())?;
            if let Some(d) = &report.discovery {
                println!(
                    "discovery: f1 {:.3} ± {:.3}, precision {:.3} ± {:.3}, recall {:.3} ± {:.3}",
                    d.f1.mean, d.f1.std, d.precision.mean, d.precision.std, d.recall.mean, d.recall.std
                );
            }
            for t in &report.targets {
                match &t.cmae {
                    Some(m) => println!("{}: cMAE {:.3} ± {:.3} ({} failed)", t.target, m.mean, m.std, t.failures),
                    None => println!("{}: no successful repetitions", t.target),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
