//! Monte Carlo sweep harnesses, energy efficiency, and the backhaul balance
//! report.
//!
//! A *drop* is one end-to-end pipeline run: place users, build channels,
//! design both tiers' hybrid precoders, evaluate rates, then run the
//! requested allocation methods. Sweeps repeat drops over a swept variable
//! with per-trial seeds derived from named substreams, so results are
//! reproducible and insensitive to how work is scheduled; parallel execution
//! reduces into index order and never changes output bytes.

use rayon::prelude::*;

use crate::allocation::{
    closed_form, fixed_split, ga_allocate, sca_allocate, AllocationResult, GaOptions, Method,
    ScaOptions, SeSummary,
};
use crate::beamforming::{
    allocate_powers, design_tier_precoder, unit_column_beams, DecomposeOptions, HybridPrecoder,
};
use crate::channel::{build_channels, ChannelSet};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rates::{link_budgets, rate_report, LinkBudgets, RateParams, RateReport};
use crate::rng::{derive_seed, substream};
use crate::scenario::{place_users, Geometry};

/// Static power draw of the beamforming hardware.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Power per RF chain (W).
    pub rf_chain_w: f64,
    /// Power per phase shifter (W).
    pub phase_shifter_w: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            rf_chain_w: 0.25,
            phase_shifter_w: 0.001,
        }
    }
}

/// Energy efficiency (bit/J): rate over transmit plus hardware power,
/// `P_t = P_tr + N_RF * P_RF + N_PS * P_PS`.
pub fn energy_efficiency(
    rate_bps: f64,
    transmit_power_w: f64,
    model: &EnergyModel,
    n_rf: usize,
    n_ps: usize,
) -> f64 {
    let p_total = transmit_power_w
        + n_rf as f64 * model.rf_chain_w
        + n_ps as f64 * model.phase_shifter_w;
    rate_bps / p_total
}

/// Knobs shared by every pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub methods: Vec<Method>,
    /// Split used by the fixed (non-IAB) baseline.
    pub mu_fixed: f64,
    pub decompose: DecomposeOptions,
    pub sca: ScaOptions,
    pub ga: GaOptions,
    pub energy: EnergyModel,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            methods: vec![Method::ClosedForm, Method::Sca, Method::Ga, Method::Fixed],
            mu_fixed: 0.5,
            decompose: DecomposeOptions::default(),
            sca: ScaOptions::default(),
            ga: GaOptions::default(),
            energy: EnergyModel::default(),
        }
    }
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct DropOutcome {
    pub config: ScenarioConfig,
    pub geometry: Geometry,
    pub channels: ChannelSet,
    pub aerial_precoder: HybridPrecoder,
    pub terrestrial_precoder: HybridPrecoder,
    pub budgets: LinkBudgets,
    pub report: RateReport,
    pub allocations: Vec<AllocationResult>,
    /// SCA iterates when that method ran.
    pub sca_mu_trace: Option<Vec<f64>>,
}

impl DropOutcome {
    pub fn allocation(&self, method: Method) -> Option<&AllocationResult> {
        self.allocations.iter().find(|a| a.method == method)
    }

    /// Total RF chains across both tiers.
    pub fn rf_chains_total(&self) -> usize {
        self.config.rf_chains_aerial() + self.config.rf_chains_terrestrial()
    }

    /// Total phase shifters across both tiers (N per RF chain).
    pub fn phase_shifters_total(&self) -> usize {
        self.config.num_antennas() * self.rf_chains_total()
    }

    /// Energy efficiency of one allocation under `model`.
    pub fn energy_efficiency(&self, rate_bps: f64, model: &EnergyModel) -> f64 {
        energy_efficiency(
            rate_bps,
            self.config.donor_power_w + self.config.node_power_w,
            model,
            self.rf_chains_total(),
            self.phase_shifters_total(),
        )
    }
}

/// Run the full pipeline for one drop.
pub fn run_drop(config: &ScenarioConfig, opts: &PipelineOptions) -> Result<DropOutcome> {
    config.validate()?;
    let geometry = place_users(config)?;
    let channels = build_channels(&geometry, config)?;
    let (aerial_powers, terrestrial_powers, _) = allocate_powers(config)?;

    let aerial_precoder = design_tier_precoder(
        &channels.h_a,
        config.rf_chains_aerial(),
        &aerial_powers,
        &opts.decompose,
    )?;
    let terrestrial_precoder = design_tier_precoder(
        &channels.h_t,
        config.rf_chains_terrestrial(),
        &terrestrial_powers,
        &opts.decompose,
    )?;

    let aerial_beams = unit_column_beams(&aerial_precoder.f_rf, &aerial_precoder.f_bb)?;
    let terrestrial_beams =
        unit_column_beams(&terrestrial_precoder.f_rf, &terrestrial_precoder.f_bb)?;
    let budgets = link_budgets(
        &channels,
        &aerial_beams,
        &aerial_powers.per_link_w,
        &terrestrial_beams,
        &terrestrial_powers.per_link_w,
    );
    let report = rate_report(&channels, &budgets, &RateParams::full_band(config));
    let ses = SeSummary::from(&report);

    let mut allocations = Vec::with_capacity(opts.methods.len());
    let mut sca_mu_trace = None;
    for &method in &opts.methods {
        let result = match method {
            Method::ClosedForm => closed_form(&ses, config.bandwidth_hz)?,
            Method::Fixed => fixed_split(opts.mu_fixed, &ses, config.bandwidth_hz),
            Method::Ga => {
                let mut rng = substream(config.rng_seed, "ga");
                ga_allocate(&ses, config.bandwidth_hz, &opts.ga, &mut rng)
            }
            Method::Sca => {
                let outcome = sca_allocate(
                    &budgets,
                    config.bandwidth_hz,
                    config.noise_psd_w_per_hz,
                    &opts.sca,
                )?;
                sca_mu_trace = Some(outcome.mu_trace);
                outcome.result
            }
        };
        allocations.push(result);
    }

    Ok(DropOutcome {
        config: config.clone(),
        geometry,
        channels,
        aerial_precoder,
        terrestrial_precoder,
        budgets,
        report,
        allocations,
        sca_mu_trace,
    })
}

/// Which scenario field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    PowerDbw,
    BandwidthHz,
    NumAntennas,
}

impl std::fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepVariable::PowerDbw => "power_dbw",
            SweepVariable::BandwidthHz => "bandwidth_hz",
            SweepVariable::NumAntennas => "num_antennas",
        })
    }
}

impl SweepVariable {
    /// Derive the per-point config. `NumAntennas` keeps square arrays.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> core::result::Result<ScenarioConfig, String> {
        let mut cfg = base.clone();
        match self {
            SweepVariable::PowerDbw => {
                let watts = 10f64.powf(value / 10.0);
                cfg.donor_power_w = watts;
                cfg.node_power_w = watts;
            }
            SweepVariable::BandwidthHz => cfg.bandwidth_hz = value,
            SweepVariable::NumAntennas => {
                let n = value.round() as usize;
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(format!("num_antennas {n} is not a perfect square"));
                }
                cfg.n_x = side;
                cfg.n_y = side;
            }
        }
        Ok(cfg)
    }
}

/// A Monte Carlo sweep: `trials_per_point` drops at each value of one
/// variable, all methods evaluated on each drop.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials_per_point: usize,
    pub base: ScenarioConfig,
    pub seed: u64,
    pub pipeline: PipelineOptions,
}

/// One (point, trial, method) observation.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub method: Method,
    pub mu_a: f64,
    pub rate_bps: f64,
    pub ee_bit_per_joule: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sum_se_aerial_users: f64,
    pub sum_se_terrestrial: f64,
    pub se_backhaul: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(sweep_value: f64, trial: usize, method: Method, error: String) -> Self {
        SweepRow {
            sweep_value,
            trial,
            method,
            mu_a: f64::NAN,
            rate_bps: f64::NAN,
            ee_bit_per_joule: f64::NAN,
            iterations: 0,
            converged: false,
            sum_se_aerial_users: f64::NAN,
            sum_se_terrestrial: f64::NAN,
            se_backhaul: f64::NAN,
            error: Some(error),
        }
    }
}

/// Per-(point, method) aggregate over successful trials.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub method: Method,
    pub trials_ok: usize,
    pub mean_rate_bps: f64,
    pub median_rate_bps: f64,
    pub std_rate_bps: f64,
    pub mean_mu_a: f64,
    pub mean_ee_bit_per_joule: f64,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SummaryRow>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(xs: &mut Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn sample_std(xs: &[f64], m: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

fn rows_for_drop(
    value: f64,
    trial: usize,
    cfg_result: core::result::Result<ScenarioConfig, String>,
    pipeline: &PipelineOptions,
) -> Vec<SweepRow> {
    let cfg = match cfg_result {
        Ok(cfg) => cfg,
        Err(e) => {
            return pipeline
                .methods
                .iter()
                .map(|&m| SweepRow::failed(value, trial, m, e.clone()))
                .collect()
        }
    };
    match run_drop(&cfg, pipeline) {
        Ok(outcome) => outcome
            .allocations
            .iter()
            .map(|a| SweepRow {
                sweep_value: value,
                trial,
                method: a.method,
                mu_a: a.mu_a,
                rate_bps: a.total_rate_bps,
                ee_bit_per_joule: outcome.energy_efficiency(a.total_rate_bps, &pipeline.energy),
                iterations: a.iterations,
                converged: a.converged,
                sum_se_aerial_users: outcome.report.sum_se_aerial_users,
                sum_se_terrestrial: outcome.report.sum_se_terrestrial,
                se_backhaul: outcome.report.se_backhaul,
                error: None,
            })
            .collect(),
        Err(e) => pipeline
            .methods
            .iter()
            .map(|&m| SweepRow::failed(value, trial, m, e.to_string()))
            .collect(),
    }
}

/// Run a sweep. Deterministic given the spec; trials run in parallel and
/// reduce in index order.
pub fn run_sweep(spec: &SweepSpec) -> SweepTable {
    let jobs: Vec<(usize, f64, usize)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(vi, &v)| (0..spec.trials_per_point).map(move |t| (vi, v, t)))
        .collect();

    let mut results: Vec<(usize, Vec<SweepRow>)> = jobs
        .par_iter()
        .enumerate()
        .map(|(job_idx, &(_, value, trial))| {
            let cfg = spec.variable.apply(&spec.base, value).map(|mut cfg| {
                cfg.rng_seed = derive_seed(
                    spec.seed,
                    &format!("sweep/{}/{:?}/trial/{}", spec.variable, value, trial),
                );
                cfg
            });
            (job_idx, rows_for_drop(value, trial, cfg, &spec.pipeline))
        })
        .collect();
    results.sort_by_key(|(idx, _)| *idx);
    let rows: Vec<SweepRow> = results.into_iter().flat_map(|(_, r)| r).collect();

    let mut summaries = Vec::new();
    for &value in &spec.values {
        for &method in &spec.pipeline.methods {
            let ok: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.sweep_value == value && r.method == method && r.error.is_none())
                .collect();
            let mut rates: Vec<f64> = ok.iter().map(|r| r.rate_bps).collect();
            let m = mean(&rates);
            summaries.push(SummaryRow {
                sweep_value: value,
                method,
                trials_ok: ok.len(),
                mean_rate_bps: m,
                std_rate_bps: sample_std(&rates, m),
                median_rate_bps: median(&mut rates),
                mean_mu_a: mean(&ok.iter().map(|r| r.mu_a).collect::<Vec<_>>()),
                mean_ee_bit_per_joule: mean(&ok.iter().map(|r| r.ee_bit_per_joule).collect::<Vec<_>>()),
            });
        }
    }

    SweepTable { rows, summaries }
}

/// One cell of the bandwidth x power grid.
#[derive(Debug, Clone)]
pub struct ContourCell {
    pub bandwidth_hz: f64,
    pub power_dbw: f64,
    pub method: Method,
    pub trials_ok: usize,
    pub mean_rate_bps: f64,
    pub mean_ee_bit_per_joule: f64,
}

/// Sum-rate grid over bandwidth x transmit power.
pub fn run_contour(
    base: &ScenarioConfig,
    bandwidths_hz: &[f64],
    powers_dbw: &[f64],
    trials_per_cell: usize,
    seed: u64,
    pipeline: &PipelineOptions,
) -> Vec<ContourCell> {
    let cells: Vec<(usize, f64, f64)> = bandwidths_hz
        .iter()
        .flat_map(|&bw| powers_dbw.iter().map(move |&p| (bw, p)))
        .enumerate()
        .map(|(i, (bw, p))| (i, bw, p))
        .collect();

    let mut per_cell: Vec<(usize, Vec<SweepRow>)> = cells
        .par_iter()
        .map(|&(idx, bw, p)| {
            let mut rows = Vec::new();
            for trial in 0..trials_per_cell {
                let watts = 10f64.powf(p / 10.0);
                let mut cfg = base.clone();
                cfg.bandwidth_hz = bw;
                cfg.donor_power_w = watts;
                cfg.node_power_w = watts;
                cfg.rng_seed = derive_seed(
                    seed,
                    &format!("contour/{:?}/{:?}/trial/{}", bw, p, trial),
                );
                rows.extend(rows_for_drop(p, trial, Ok(cfg), pipeline));
            }
            (idx, rows)
        })
        .collect();
    per_cell.sort_by_key(|(idx, _)| *idx);

    let mut out = Vec::new();
    for ((_, rows), &(_, bw, p)) in per_cell.iter().zip(cells.iter()) {
        for &method in &pipeline.methods {
            let ok: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.method == method && r.error.is_none())
                .collect();
            out.push(ContourCell {
                bandwidth_hz: bw,
                power_dbw: p,
                method,
                trials_ok: ok.len(),
                mean_rate_bps: mean(&ok.iter().map(|r| r.rate_bps).collect::<Vec<_>>()),
                mean_ee_bit_per_joule: mean(
                    &ok.iter().map(|r| r.ee_bit_per_joule).collect::<Vec<_>>(),
                ),
            });
        }
    }
    out
}

/// The four bars of the backhaul balance chart (bit/s), evaluated at the
/// closed-form split.
#[derive(Debug, Clone, Copy)]
pub struct BalanceReport {
    pub mu_a: f64,
    pub total_rate_bps: f64,
    /// `mu_a w R_ab`: what the backhaul can carry.
    pub backhaul_bar_bps: f64,
    /// `mu_t w sum SE_t`: what terrestrial users demand.
    pub terrestrial_bar_bps: f64,
    /// `mu_a w sum SE_aerial_users`.
    pub aerial_users_bar_bps: f64,
    /// |backhaul - terrestrial| / terrestrial.
    pub relative_mismatch: f64,
}

/// Build the balance report from a drop that ran the closed-form method.
/// At the closed-form split the first two bars coincide by construction.
pub fn backhaul_balance_report(outcome: &DropOutcome) -> Result<BalanceReport> {
    let alloc = outcome.allocation(Method::ClosedForm).ok_or(Error::InvalidConfig {
        field: "methods",
        message: "balance report needs the closed-form allocation".into(),
    })?;
    let w = outcome.config.bandwidth_hz;
    let r = &outcome.report;
    let backhaul_bar = alloc.mu_a * w * r.se_backhaul;
    let terrestrial_bar = alloc.mu_t * w * r.sum_se_terrestrial;
    let aerial_bar = alloc.mu_a * w * r.sum_se_aerial_users;
    let relative_mismatch = (backhaul_bar - terrestrial_bar).abs() / terrestrial_bar.max(f64::MIN_POSITIVE);
    debug_assert!(relative_mismatch <= 1e-6);
    Ok(BalanceReport {
        mu_a: alloc.mu_a,
        total_rate_bps: alloc.total_rate_bps,
        backhaul_bar_bps: backhaul_bar,
        terrestrial_bar_bps: terrestrial_bar,
        aerial_users_bar_bps: aerial_bar,
        relative_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn energy_efficiency_reference_value() {
        // 1 Gb/s, 1 W transmit, 3 chains at 0.25 W, 192 shifters at 1 mW.
        let model = EnergyModel::default();
        let ee = energy_efficiency(1e9, 1.0, &model, 3, 192);
        assert_relative_eq!(ee, 1e9 / 1.942, max_relative = 1e-12);
        assert_relative_eq!(ee, 5.149e8, max_relative = 1e-3);
    }

    #[test]
    fn energy_efficiency_linear_in_rate() {
        let model = EnergyModel::default();
        assert_eq!(energy_efficiency(0.0, 1.0, &model, 3, 192), 0.0);
        let e1 = energy_efficiency(1e9, 1.0, &model, 3, 192);
        let e2 = energy_efficiency(2e9, 1.0, &model, 3, 192);
        assert_relative_eq!(e2, 2.0 * e1, max_relative = 1e-12);
    }

    #[test]
    fn drop_runs_all_methods() {
        let cfg = ScenarioConfig::default();
        let outcome = run_drop(&cfg, &PipelineOptions::default()).unwrap();
        assert_eq!(outcome.allocations.len(), 4);
        assert!(outcome.sca_mu_trace.is_some());
        for a in &outcome.allocations {
            assert!((0.0..=1.0).contains(&a.mu_a));
            assert!(a.total_rate_bps.is_finite());
        }
    }

    #[test]
    fn drop_is_deterministic() {
        let cfg = ScenarioConfig::default();
        let a = run_drop(&cfg, &PipelineOptions::default()).unwrap();
        let b = run_drop(&cfg, &PipelineOptions::default()).unwrap();
        assert_eq!(a.report.se_aerial_users, b.report.se_aerial_users);
        assert_eq!(a.allocations, b.allocations);
    }

    #[test]
    fn closed_form_beats_fixed_per_drop() {
        for seed in 0..10 {
            let cfg = ScenarioConfig {
                rng_seed: seed,
                ..ScenarioConfig::default()
            };
            let outcome = run_drop(&cfg, &PipelineOptions::default()).unwrap();
            let cf = outcome.allocation(Method::ClosedForm).unwrap();
            let fx = outcome.allocation(Method::Fixed).unwrap();
            assert!(
                cf.total_rate_bps >= fx.total_rate_bps - 1e-6,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn balance_bars_equal_at_closed_form() {
        let cfg = ScenarioConfig::default();
        let outcome = run_drop(&cfg, &PipelineOptions::default()).unwrap();
        let report = backhaul_balance_report(&outcome).unwrap();
        assert!(report.relative_mismatch <= 1e-6);
    }

    #[test]
    fn fixed_split_bars_generally_unequal() {
        let cfg = ScenarioConfig::default();
        let outcome = run_drop(&cfg, &PipelineOptions::default()).unwrap();
        let fx = outcome.allocation(Method::Fixed).unwrap();
        let w = cfg.bandwidth_hz;
        let bh = fx.mu_a * w * outcome.report.se_backhaul;
        let tr = fx.mu_t * w * outcome.report.sum_se_terrestrial;
        assert!((bh - tr).abs() / tr > 1e-3);
    }

    #[test]
    fn sweep_is_reproducible_and_ordered() {
        let spec = SweepSpec {
            variable: SweepVariable::PowerDbw,
            values: vec![-10.0, 0.0],
            trials_per_point: 3,
            base: ScenarioConfig::default(),
            seed: 11,
            pipeline: PipelineOptions {
                methods: vec![Method::ClosedForm, Method::Fixed],
                ..PipelineOptions::default()
            },
        };
        let a = run_sweep(&spec);
        let b = run_sweep(&spec);
        assert_eq!(a.rows.len(), 2 * 3 * 2);
        for (x, y) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(x.sweep_value, y.sweep_value);
            assert_eq!(x.trial, y.trial);
            assert_eq!(x.method, y.method);
            assert_eq!(x.rate_bps.to_bits(), y.rate_bps.to_bits());
        }
    }

    #[test]
    fn adding_a_sweep_point_does_not_perturb_existing_rows() {
        let base_spec = SweepSpec {
            variable: SweepVariable::PowerDbw,
            values: vec![-10.0, 0.0],
            trials_per_point: 2,
            base: ScenarioConfig::default(),
            seed: 13,
            pipeline: PipelineOptions {
                methods: vec![Method::ClosedForm],
                ..PipelineOptions::default()
            },
        };
        let small = run_sweep(&base_spec);
        let mut extended = base_spec.clone();
        extended.values = vec![-10.0, -5.0, 0.0];
        let big = run_sweep(&extended);
        for row in &small.rows {
            let twin = big
                .rows
                .iter()
                .find(|r| r.sweep_value == row.sweep_value && r.trial == row.trial)
                .unwrap();
            assert_eq!(row.rate_bps.to_bits(), twin.rate_bps.to_bits());
        }
    }

    #[test]
    fn antenna_variable_requires_square() {
        let base = ScenarioConfig::default();
        assert!(SweepVariable::NumAntennas.apply(&base, 64.0).is_ok());
        assert!(SweepVariable::NumAntennas.apply(&base, 60.0).is_err());
    }
}
