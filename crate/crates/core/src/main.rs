use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use async_sgld::harness::{self, artifacts, report, ExperimentConfig, RawConfig};
use async_sgld::record::RunRecord;
use async_sgld::theory::{theory_table, TheoryParams};
use async_sgld::{Error, Result};

#[derive(Parser)]
#[command(name = "asgld", version, about = "Asynchronous SGLD experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its artifacts.
    Run(RunArgs),
    /// Print the step-size and iteration-count bounds.
    Theory(TheoryArgs),
    /// Recompute the metric series of a stored run record.
    Metrics(MetricsArgs),
    /// Compare runs by time to reach W₂ thresholds.
    Report(ReportArgs),
}

#[derive(Args)]
struct Overrides {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["sync", "wcon", "wicon", "sim"])]
    scheme: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut raw = match &self.config {
            Some(p) => RawConfig::load(p).map_err(|e| match e {
                Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
                e => e,
            })?,
            None => RawConfig::default(),
        };
        if let Some(s) = self.seed {
            raw.set("seed", s.to_string())?;
        }
        if let Some(o) = &self.out {
            raw.set("out", o.display().to_string())?;
        }
        if let Some(s) = &self.scheme {
            raw.set("scheme", s.as_str())?;
        }
        if let Some(w) = self.workers {
            raw.set("workers", w.to_string())?;
        }
        ExperimentConfig::from_raw(&raw)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    o: Overrides,
}

#[derive(Args)]
struct TheoryArgs {
    /// Take m, L, d and σ from this experiment's potential.
    #[command(flatten)]
    o: Overrides,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long = "lipschitz")]
    l: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Gradient-norm bound.
    #[arg(long = "grad-bound")]
    g: Option<f64>,
    #[arg(long, default_value_t = 0)]
    tau: u32,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Initial W₂ distance to the target.
    #[arg(long = "w2-0", default_value_t = 1.0)]
    w2_0: f64,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    o: Overrides,
    /// Stored run record (`.bin` or `.csv`).
    #[arg(long)]
    record: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories produced by `asgld run`.
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
    /// W₂ threshold; repeatable. Defaults to the smallest level every run reaches.
    #[arg(long)]
    threshold: Vec<f64>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn run(a: &RunArgs) -> Result<()> {
    let cfg = a.o.load()?;
    let out = harness::run_experiment(&cfg)?;
    let mut stdout = std::io::stdout().lock();
    for (k, v) in &out.summary {
        let _ = writeln!(stdout, "{k}={v}");
    }
    let _ = writeln!(stdout, "artifacts={}", cfg.out.display());
    Ok(())
}

fn theory(a: &TheoryArgs) -> Result<()> {
    let (mut m, mut l, mut d, mut sigma, mut g) = (a.m, a.l, a.d, a.sigma, a.g);
    if a.o.config.is_some() {
        let cfg = a.o.load()?;
        let p = harness::build_potential(&cfg, &mut async_sgld::rng::aux_stream(cfg.seed))?;
        let c = p.constants();
        m = m.or(Some(c.m));
        l = l.or(Some(c.lipschitz));
        d = d.or(Some(p.dim() as f64));
        sigma = sigma.or(Some(cfg.sigma));
        g = g.or(c.grad_bound);
    }
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("`--{name}` is required")));
    let tp = TheoryParams {
        m: need(m, "m")?,
        l: need(l, "lipschitz")?,
        d: need(d, "d")?,
        sigma: need(sigma, "sigma")?,
        g: need(g, "grad-bound")?,
        tau: a.tau,
        eps: a.eps,
        w2_0: a.w2_0,
    };
    tp.validate().map_err(|e| Error::Config(e.to_string()))?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["quantity", "value"])?;
    for (k, v) in theory_table(&tp)? {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(())
}

fn metrics(a: &MetricsArgs) -> Result<()> {
    let cfg = a.o.load()?;
    let rec = RunRecord::load(&a.record).map_err(|e| match e {
        Error::Io { path, source } => Error::Data(format!("{}: {source}", path.display())),
        e => e,
    })?;
    let rows = harness::evaluate_record(&cfg, &rec)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let path = cfg.out.join(artifacts::METRICS_FILE);
    artifacts::write_metrics(std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?, &cfg.digest(), &rows)?;
    println!("metrics={}", path.display());
    Ok(())
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    let runs = a
        .runs
        .iter()
        .map(|d| {
            report::load_run(d).map_err(|e| match e {
                Error::Io { path, source } => Error::Data(format!("{}: {source}", path.display())),
                e => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let thresholds = if a.threshold.is_empty() {
        vec![report::common_threshold(&runs).ok_or_else(|| Error::Data("runs have no W₂ values".into()))?]
    } else {
        a.threshold.clone()
    };
    let rows = harness::compare_report(&runs, &thresholds)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let create = |name: &str| -> Result<std::fs::File> {
        let p: &Path = &a.out.join(name);
        std::fs::File::create(p).map_err(|e| Error::io(p, e))
    };
    report::write_thresholds(create("thresholds.csv")?, &rows)?;
    report::write_aligned(create("aligned.csv")?, &runs)?;
    report::write_thresholds(std::io::stdout().lock(), &rows)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::Theory(a) => theory(a),
        Cmd::Metrics(a) => metrics(a),
        Cmd::Report(a) => report_cmd(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
