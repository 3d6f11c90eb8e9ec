//! Command-line front end: synthetic experiments, metrics, fits and sweeps.

pub mod config;
pub mod io;
pub mod presets;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use statematch::analysis::{aggregate, fit_pipeline, metrics, sigma_stat, MetricReport};
use statematch::engine::run_experiment;
use statematch::protocol::theoretical_state;
use statematch::{success_probability, ProtocolConfig};

use config::Settings;
use io::{sig12, write_atomic, Manifest, Report};

fn epsilon_arg(s: &str) -> std::result::Result<f64, String> {
    let e: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if e > 0.0 && e <= 1.0 {
        Ok(e)
    } else {
        Err(format!("epsilon must lie in (0, 1], got {e}"))
    }
}

fn iterations_arg(s: &str) -> std::result::Result<u32, String> {
    let n: u32 = s.parse().map_err(|e| format!("{e}"))?;
    if (1..=20).contains(&n) {
        Ok(n)
    } else {
        Err(format!("n must lie in 1..=20, got {n}"))
    }
}

fn finite_arg(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(x) => Err(format!("expected a finite number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "statematch", version, about = "Iterated state-matching benchmark toolkit")]
pub struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress summaries on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the ideal success probability and output state.
    Theory {
        #[arg(long, value_parser = epsilon_arg)]
        epsilon: Option<f64>,
        #[arg(long, value_parser = finite_arg)]
        theta0: Option<f64>,
        #[arg(long, value_parser = finite_arg)]
        phi0: Option<f64>,
        #[arg(long, value_parser = iterations_arg)]
        n: Option<u32>,
    },
    /// Simulate the configured experiment; writes records.csv and report.json.
    Simulate,
    /// Benchmark metrics per device and iteration count, ranked by F;
    /// writes metrics.json and metrics.txt.
    Metrics {
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Fit the error model to a records file; writes fit.json and fitted_curve.csv.
    Fit { records: PathBuf },
    /// Plot-ready φ₀ sweep; writes sweep.csv.
    Sweep,
    /// Dump the transpiled circuit at one φ₀.
    Transpile {
        #[arg(long, value_parser = finite_arg)]
        phi0: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Theory { .. } => "theory",
            Command::Simulate => "simulate",
            Command::Metrics { .. } => "metrics",
            Command::Fit { .. } => "fit",
            Command::Sweep => "sweep",
            Command::Transpile { .. } => "transpile",
        }
    }
}

struct Ctx {
    settings: Settings,
    out: PathBuf,
    out_given: bool,
    quiet: bool,
    manifest: Manifest,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let mut settings = match &cli.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        for kv in &cli.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{kv}'"))?;
            settings.entries.remove(k.trim());
            settings.set(k.trim(), v.trim()).context("in --set")?;
        }
        if let Some(seed) = cli.seed {
            settings.seed = seed;
        }
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cli.command.name().into(),
            config_path: cli.config.clone(),
            seed: settings.seed,
            out_dir: out.clone(),
            inputs: Vec::new(),
            config: settings.entries.clone(),
        };
        Ok(Ctx {
            settings,
            out,
            out_given: cli.out.is_some(),
            quiet: cli.quiet,
            manifest,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Theory {
            epsilon,
            theta0,
            phi0,
            n,
        } => theory(&ctx, epsilon, theta0, phi0, n),
        Command::Simulate => simulate(&ctx),
        Command::Metrics { records } => {
            ctx.manifest.inputs.extend(records.iter().cloned());
            cmd_metrics(&ctx, &records)
        }
        Command::Fit { records } => {
            ctx.manifest.inputs.push(records.clone());
            fit(&ctx, &records)
        }
        Command::Sweep => sweep(&ctx),
        Command::Transpile { phi0 } => transpile(&ctx, phi0),
    }
}

fn theory(ctx: &Ctx, epsilon: Option<f64>, theta0: Option<f64>, phi0: Option<f64>, n: Option<u32>) -> Result<()> {
    let s = &ctx.settings;
    let cfg = ProtocolConfig::new(
        epsilon.unwrap_or(s.epsilon),
        theta0.unwrap_or(s.theta0),
        phi0.unwrap_or(s.phi0),
        n.unwrap_or(s.n_iterations),
    )?;
    let ps = success_probability(cfg.epsilon, cfg.theta0, cfg.n_iterations)?;
    let [a, b] = theoretical_state(&cfg)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "p_s {}", sig12(ps))?;
    writeln!(out, "amp0 {:.12}{:+.12}i", a.re, a.im)?;
    writeln!(out, "amp1 {:.12}{:+.12}i", b.re, b.im)?;
    Ok(())
}

fn simulate(ctx: &Ctx) -> Result<()> {
    let s = &ctx.settings;
    let noise = s.noise()?;
    let records = run_experiment(&s.plan(), &noise, s.seed)?;
    let report = metrics(&records)?;
    let csv_path = ctx.path("records.csv");
    write_atomic(&csv_path, &io::records_to_csv(&records)?)?;
    write_atomic(
        &ctx.path("report.json"),
        &Report::new(ctx.manifest.clone(), vec![report.clone()], None).to_json()?,
    )?;
    ctx.note(format!(
        "{} records -> {}; mean {} (ideal {}), F {:.4}, S {:.3}",
        records.len(),
        csv_path.display(),
        sig12(report.ps_exp_mean),
        sig12(report.ps_ideal),
        report.f,
        report.s
    ));
    Ok(())
}

fn metrics_table(reports: &[MetricReport]) -> String {
    let mut t = format!(
        "{:<16} {:>2} {:>8} {:>8} {:>8}\n",
        "device", "n", "ratio", "F", "S"
    );
    for r in reports {
        t.push_str(&format!(
            "{:<16} {:>2} {:>8.3} {:>8.3} {:>8.3}{}\n",
            r.device_label,
            r.n_iterations,
            r.ratio,
            r.f,
            r.s,
            if r.f_below_zero { "  (F below zero)" } else { "" }
        ));
    }
    t
}

fn cmd_metrics(ctx: &Ctx, files: &[PathBuf]) -> Result<()> {
    let mut all = Vec::new();
    for f in files {
        all.extend(io::read_records(f)?);
    }
    let groups = io::group_records(all);
    let mut reports = groups
        .into_iter()
        .map(|((dev, n), rs)| metrics(&rs).with_context(|| format!("device '{dev}', n = {n}")))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| b.f.total_cmp(&a.f));
    let table = metrics_table(&reports);
    write_atomic(
        &ctx.path("metrics.json"),
        &Report::new(ctx.manifest.clone(), reports, None).to_json()?,
    )?;
    write_atomic(&ctx.path("metrics.txt"), table.as_bytes())?;
    if !ctx.quiet {
        print!("{table}");
    }
    Ok(())
}

fn fit(ctx: &Ctx, records: &Path) -> Result<()> {
    let groups = io::group_records(io::read_records(records)?);
    if groups.len() != 1 {
        bail!(
            "fit needs records from one device and iteration count, found {} groups",
            groups.len()
        );
    }
    let rs = groups.into_values().next().expect("one group");
    let report = metrics(&rs)?;
    let result = fit_pipeline(&rs, &ctx.settings.fit_config()?)?;
    let mut curve = csv::Writer::from_writer(Vec::new());
    curve.write_record(["phi0", "estimate", "fitted"])?;
    for ((p, e), f) in result.phi0.iter().zip(&result.estimates).zip(&result.fitted_curve) {
        curve.write_record([sig12(*p), sig12(*e), sig12(*f)])?;
    }
    let curve = curve.into_inner().map_err(|e| anyhow!("{}", e.error()))?;
    write_atomic(&ctx.path("fitted_curve.csv"), &curve)?;
    write_atomic(
        &ctx.path("fit.json"),
        &Report::new(ctx.manifest.clone(), vec![report], Some(result.clone())).to_json()?,
    )?;
    ctx.note(format!(
        "shift {:?} = {:.4e} ± {:.1e}, rms {:.3e} (σ_stat {:.3e})",
        result.shift_model, result.shift_param, result.shift_sigma, result.residual_rms, result.sigma_stat
    ));
    for a in &result.angles {
        ctx.note(format!(
            "  {:<12} {:+.4e} ± {:.1e}  bound {:.3e}{}",
            a.param.to_string(),
            a.value,
            a.sigma,
            a.tolerance,
            if a.bound_active { " (at bound)" } else { "" }
        ));
    }
    Ok(())
}

fn sweep(ctx: &Ctx) -> Result<()> {
    let s = &ctx.settings;
    let plan = s.plan();
    let records = run_experiment(&plan, &s.noise()?, s.seed)?;
    let agg = aggregate(&records)?;
    let ideal = success_probability(s.epsilon, s.theta0, s.n_iterations)?;
    let sigma = sigma_stat(ideal, agg.shots_per_point);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["phi0", "ideal", "simulated_mean", "lower", "upper"])?;
    for e in &agg.per_phi0 {
        w.write_record([
            sig12(e.phi0),
            sig12(ideal),
            sig12(e.estimate),
            sig12(ideal - sigma),
            sig12(ideal + sigma),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{}", e.error()))?;
    let path = ctx.path("sweep.csv");
    write_atomic(&path, &bytes)?;
    ctx.note(format!(
        "{} points -> {} (seed {})",
        agg.per_phi0.len(),
        path.display(),
        s.seed
    ));
    Ok(())
}

fn transpile(ctx: &Ctx, phi0: Option<f64>) -> Result<()> {
    let s = &ctx.settings;
    let circuit = s.plan().circuit(phi0.unwrap_or(s.phi0))?;
    let text = circuit.to_text();
    if ctx.out_given {
        let path = ctx.path("circuit.txt");
        write_atomic(&path, text.as_bytes())?;
        ctx.note(format!(
            "{} gates, {} CNOTs, {} swaps -> {}",
            circuit.gates.len(),
            circuit.cnot_count(),
            circuit.swap_count,
            path.display()
        ));
    } else {
        print!("{text}");
    }
    Ok(())
}
