//! `iabsim` command-line front end.
//!
//! Verbs map to the study's artifacts: `simulate` (one drop), `sweep-power`,
//! `contour`, `sweep-antennas`, `convergence` (solver traces), and `balance`
//! (backhaul-bottleneck bars). Every verb writes CSV/JSON files into `--out`
//! plus a `manifest.json` recording the resolved config and seed, and two
//! runs with identical flags produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use iabsim::allocation::Method;
use iabsim::beamforming::{hybrid_decompose, zero_forcing};
use iabsim::error::Result;
use iabsim::experiments::{
    backhaul_balance_report, run_contour, run_drop, run_sweep, ContourCell, PipelineOptions,
    SweepSpec, SweepTable, SweepVariable,
};
use iabsim::io::{self, fmt_f64};
use iabsim::ScenarioConfig;

#[derive(Parser)]
#[command(name = "iabsim", version, about = "IAB-assisted UAV network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config file (flat key = value); defaults match the stock
    /// simulation parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override (defaults to the config's rng_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Allocation methods to run (comma list of closed-form,sca,ga,fixed).
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<Method>>,

    /// Monte Carlo trials per sweep point.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Split used by the fixed (non-IAB) baseline.
    #[arg(long, global = true, default_value_t = 0.5)]
    mu_fixed: f64,

    /// Hybrid decomposition residual target.
    #[arg(long, global = true, default_value_t = 0.1)]
    target_lambda: f64,

    /// SCA stopping threshold on |mu_m - mu_{m-1}|.
    #[arg(long, global = true, default_value_t = 1e-3)]
    sca_eps: f64,
}

#[derive(Subcommand)]
enum Command {
    /// One drop: per-link rate table and allocation results.
    Simulate,
    /// Sum-rate / EE versus transmit power.
    SweepPower,
    /// Sum-rate grid over bandwidth x power.
    Contour,
    /// Sum-rate / EE versus antenna count (square arrays, 3 RF chains).
    SweepAntennas,
    /// Residual trace of the hybrid decomposition and SCA mu trace.
    Convergence,
    /// Backhaul-bottleneck bar table at the closed-form split.
    Balance,
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn pipeline_options(cli: &Cli) -> PipelineOptions {
    let mut opts = PipelineOptions::default();
    if let Some(methods) = &cli.methods {
        opts.methods = methods.clone();
    }
    opts.mu_fixed = cli.mu_fixed;
    opts.decompose.target_residual = cli.target_lambda;
    opts.sca.epsilon = cli.sca_eps;
    opts
}

fn write_manifest(
    out: &Path,
    verb: &str,
    config: &ScenarioConfig,
    extra: serde_json::Value,
) -> Result<()> {
    let manifest = json!({
        "tool": "iabsim",
        "verb": verb,
        "seed": config.rng_seed,
        "config": config,
        "config_key_values": config.to_key_values(),
        "parameters": extra,
    });
    io::write_text(&out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)
}

fn sweep_rows_csv(table: &SweepTable) -> String {
    let mut s = String::from(
        "sweep_value,trial,method,mu_a,rate_bps,ee_bit_per_joule,iterations,converged,sum_se_aerial_users,sum_se_terrestrial,se_backhaul,error\n",
    );
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.sweep_value),
            r.trial,
            r.method,
            fmt_f64(r.mu_a),
            fmt_f64(r.rate_bps),
            fmt_f64(r.ee_bit_per_joule),
            r.iterations,
            r.converged,
            fmt_f64(r.sum_se_aerial_users),
            fmt_f64(r.sum_se_terrestrial),
            fmt_f64(r.se_backhaul),
            r.error.as_deref().unwrap_or(""),
        );
    }
    s
}

fn sweep_summary_csv(table: &SweepTable) -> String {
    let mut s = String::from(
        "sweep_value,method,trials_ok,mean_rate_bps,median_rate_bps,std_rate_bps,mean_mu_a,mean_ee_bit_per_joule\n",
    );
    for r in &table.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.sweep_value),
            r.method,
            r.trials_ok,
            fmt_f64(r.mean_rate_bps),
            fmt_f64(r.median_rate_bps),
            fmt_f64(r.std_rate_bps),
            fmt_f64(r.mean_mu_a),
            fmt_f64(r.mean_ee_bit_per_joule),
        );
    }
    s
}

fn contour_csv(cells: &[ContourCell]) -> String {
    let mut s = String::from(
        "bandwidth_hz,power_dbw,method,trials_ok,mean_rate_bps,mean_ee_bit_per_joule\n",
    );
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(c.bandwidth_hz),
            fmt_f64(c.power_dbw),
            c.method,
            c.trials_ok,
            fmt_f64(c.mean_rate_bps),
            fmt_f64(c.mean_ee_bit_per_joule),
        );
    }
    s
}

fn cmd_simulate(cli: &Cli, config: &ScenarioConfig, out: &Path) -> Result<()> {
    let opts = pipeline_options(cli);
    let outcome = run_drop(config, &opts)?;
    io::write_text(&out.join("rates.csv"), &io::rates_csv(&outcome.report))?;
    io::write_text(
        &out.join("allocation.csv"),
        &io::allocations_csv(&outcome.allocations),
    )?;
    write_manifest(out, "simulate", config, json!({"methods": opts.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>()}))?;
    log::info!(
        "simulate: {} links, {} allocation methods",
        outcome.report.links.len(),
        outcome.allocations.len()
    );
    Ok(())
}

fn default_power_grid() -> Vec<f64> {
    (0..11).map(|k| -15.0 + 2.0 * k as f64).collect()
}

fn cmd_sweep_power(cli: &Cli, config: &ScenarioConfig, out: &Path) -> Result<()> {
    let spec = SweepSpec {
        variable: SweepVariable::PowerDbw,
        values: default_power_grid(),
        trials_per_point: cli.trials.unwrap_or(50),
        base: config.clone(),
        seed: config.rng_seed,
        pipeline: pipeline_options(cli),
    };
    let table = run_sweep(&spec);
    io::write_text(&out.join("power_sweep_rows.csv"), &sweep_rows_csv(&table))?;
    io::write_text(&out.join("power_sweep_summary.csv"), &sweep_summary_csv(&table))?;
    write_manifest(
        out,
        "sweep-power",
        config,
        json!({"values_dbw": spec.values, "trials_per_point": spec.trials_per_point}),
    )
}

fn cmd_contour(cli: &Cli, config: &ScenarioConfig, out: &Path) -> Result<()> {
    let bandwidths: Vec<f64> = (0..6).map(|k| (300.0 + 100.0 * k as f64) * 1e6).collect();
    let powers: Vec<f64> = (0..6).map(|k| -15.0 + 3.0 * k as f64).collect();
    let trials = cli.trials.unwrap_or(50);
    let mut pipeline = pipeline_options(cli);
    if cli.methods.is_none() {
        pipeline.methods = vec![Method::ClosedForm, Method::Fixed];
    }
    let cells = run_contour(config, &bandwidths, &powers, trials, config.rng_seed, &pipeline);
    io::write_text(&out.join("contour.csv"), &contour_csv(&cells))?;
    write_manifest(
        out,
        "contour",
        config,
        json!({"bandwidths_hz": bandwidths, "powers_dbw": powers, "trials_per_cell": trials}),
    )
}

fn cmd_sweep_antennas(cli: &Cli, config: &ScenarioConfig, out: &Path) -> Result<()> {
    // Square arrays with 3 RF chains and 0 dBW, the stock antenna study.
    let mut base = config.clone();
    base.num_rf_chains = Some(3);
    base.donor_power_w = 1.0;
    base.node_power_w = 1.0;
    let mut pipeline = pipeline_options(cli);
    if cli.methods.is_none() {
        pipeline.methods = vec![Method::ClosedForm, Method::Fixed];
    }
    let spec = SweepSpec {
        variable: SweepVariable::NumAntennas,
        values: vec![16.0, 36.0, 64.0, 100.0],
        trials_per_point: cli.trials.unwrap_or(50),
        base,
        seed: config.rng_seed,
        pipeline,
    };
    let table = run_sweep(&spec);
    io::write_text(&out.join("antenna_sweep_rows.csv"), &sweep_rows_csv(&table))?;
    io::write_text(
        &out.join("antenna_sweep_summary.csv"),
        &sweep_summary_csv(&table),
    )?;
    write_manifest(
        out,
        "sweep-antennas",
        config,
        json!({"values": spec.values, "trials_per_point": spec.trials_per_point, "num_rf_chains": 3}),
    )
}

fn cmd_convergence(cli: &Cli, config: &ScenarioConfig, out: &Path) -> Result<()> {
    let opts = pipeline_options(cli);
    let outcome = run_drop(config, &opts)?;

    io::write_text(
        &out.join("hbf_residual_trace.csv"),
        &io::trace_csv("lambda", &outcome.aerial_precoder.lambda_trace),
    )?;
    io::write_text(
        &out.join("precoder_aerial.json"),
        &serde_json::to_string_pretty(&outcome.aerial_precoder.to_json())?,
    )?;
    io::write_text(
        &out.join("precoder_terrestrial.json"),
        &serde_json::to_string_pretty(&outcome.terrestrial_precoder.to_json())?,
    )?;

    // Also trace a random-phase run of the same aerial instance so the two
    // initializations can be plotted side by side.
    let f_zf = zero_forcing(&outcome.channels.h_a)?;
    let mut random_opts = opts.decompose.clone();
    random_opts.init = iabsim::beamforming::InitMethod::RandomPhase {
        seed: config.rng_seed,
    };
    let random = hybrid_decompose(&f_zf, config.rf_chains_aerial(), &random_opts)?;
    io::write_text(
        &out.join("hbf_residual_trace_random_init.csv"),
        &io::trace_csv("lambda", &random.lambda_trace),
    )?;

    if let Some(trace) = &outcome.sca_mu_trace {
        io::write_text(&out.join("sca_mu_trace.csv"), &io::trace_csv("mu_a", trace))?;
    }
    write_manifest(
        out,
        "convergence",
        config,
        json!({"target_lambda": cli.target_lambda, "sca_eps": cli.sca_eps}),
    )
}

fn cmd_balance(cli: &Cli, config: &ScenarioConfig, out: &Path) -> Result<()> {
    let mut opts = pipeline_options(cli);
    if !opts.methods.contains(&Method::ClosedForm) {
        opts.methods.push(Method::ClosedForm);
    }
    let outcome = run_drop(config, &opts)?;
    let report = backhaul_balance_report(&outcome)?;
    let mut s = String::from(
        "mu_a,total_rate_bps,backhaul_bar_bps,terrestrial_bar_bps,aerial_users_bar_bps,relative_mismatch\n",
    );
    let _ = writeln!(
        s,
        "{},{},{},{},{},{}",
        fmt_f64(report.mu_a),
        fmt_f64(report.total_rate_bps),
        fmt_f64(report.backhaul_bar_bps),
        fmt_f64(report.terrestrial_bar_bps),
        fmt_f64(report.aerial_users_bar_bps),
        fmt_f64(report.relative_mismatch),
    );
    io::write_text(&out.join("balance.csv"), &s)?;
    write_manifest(out, "balance", config, json!({}))
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| iabsim::Error::io(format!("creating {}", cli.out.display()), e))?;
    let out = cli.out.clone();
    let body = || match cli.command {
        Command::Simulate => cmd_simulate(cli, &config, &out),
        Command::SweepPower => cmd_sweep_power(cli, &config, &out),
        Command::Contour => cmd_contour(cli, &config, &out),
        Command::SweepAntennas => cmd_sweep_antennas(cli, &config, &out),
        Command::Convergence => cmd_convergence(cli, &config, &out),
        Command::Balance => cmd_balance(cli, &config, &out),
    };
    match cli.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
            .install(body),
        None => body(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("IABSIM_LOG")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
