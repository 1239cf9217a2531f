//! Bandwidth-split solvers.
//!
//! Four ways to pick the aerial bandwidth coefficient `mu_a`:
//!
//! - [`closed_form`]: `mu_a = R_t / (R_t + R_b)`, the point where the
//!   backhaul rate exactly carries the terrestrial demand. This is also the
//!   lower bound the backhaul constraint imposes on `mu_a`, so in the
//!   regime where terrestrial links out-rate aerial users it is optimal.
//! - [`sca_allocate`]: successive convex approximation when thermal noise
//!   scales with the allocated bandwidth. Each iteration linearizes the two
//!   log terms of every rate around the current split and solves the
//!   resulting one-variable quadratic program by candidate enumeration.
//! - [`ga_allocate`]: a seeded genetic-algorithm benchmark over the same
//!   objective and constraints.
//! - [`fixed_split`]: the non-IAB baseline with a static split; the
//!   backhaul bottleneck still caps the delivered terrestrial rate.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rates::{network_sum_rate, LinkBudget, LinkBudgets, RateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Sca,
    Ga,
    Fixed,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Sca => "sca",
            Method::Ga => "ga",
            Method::Fixed => "fixed",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "closed-form" => Ok(Method::ClosedForm),
            "sca" => Ok(Method::Sca),
            "ga" => Ok(Method::Ga),
            "fixed" => Ok(Method::Fixed),
            other => Err(format!(
                "unknown method `{other}` (expected closed-form, sca, ga, or fixed)"
            )),
        }
    }
}

/// Tier sum-SEs a solver needs (bit/s/Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeSummary {
    pub sum_se_aerial_users: f64,
    pub se_backhaul: f64,
    pub sum_se_terrestrial: f64,
}

impl From<&RateReport> for SeSummary {
    fn from(r: &RateReport) -> Self {
        SeSummary {
            sum_se_aerial_users: r.sum_se_aerial_users,
            se_backhaul: r.se_backhaul,
            sum_se_terrestrial: r.sum_se_terrestrial,
        }
    }
}

impl SeSummary {
    /// Aerial sum including the backhaul link.
    pub fn sum_se_aerial_with_backhaul(&self) -> f64 {
        self.sum_se_aerial_users + self.se_backhaul
    }

    /// Lower bound on `mu_a` from the backhaul constraint
    /// `mu_t * R_t <= mu_a * R_b`.
    pub fn backhaul_lower_bound(&self) -> f64 {
        self.sum_se_terrestrial / (self.sum_se_terrestrial + self.se_backhaul)
    }
}

/// Chosen split plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub mu_a: f64,
    pub mu_t: f64,
    pub method: Method,
    pub total_rate_bps: f64,
    /// `mu_a w R_ab - mu_t w R_t`; negative means the nominal split would
    /// overload the backhaul (possible for the fixed baseline, where the
    /// delivered terrestrial rate is min-capped instead).
    pub backhaul_slack_bps: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn result_at(
    mu_a: f64,
    method: Method,
    ses: &SeSummary,
    bandwidth_hz: f64,
    iterations: usize,
    converged: bool,
) -> AllocationResult {
    let sum = network_sum_rate(
        ses.sum_se_aerial_users,
        ses.se_backhaul,
        ses.sum_se_terrestrial,
        mu_a,
        bandwidth_hz,
    );
    let mu_t = 1.0 - mu_a;
    AllocationResult {
        mu_a,
        mu_t,
        method,
        total_rate_bps: sum.total_rate_bps,
        backhaul_slack_bps: mu_a * bandwidth_hz * ses.se_backhaul
            - mu_t * bandwidth_hz * ses.sum_se_terrestrial,
        iterations,
        converged,
    }
}

/// Closed-form split `mu_a = R_t / (R_t + R_b)`, clamped to [0, 1].
pub fn closed_form(ses: &SeSummary, bandwidth_hz: f64) -> Result<AllocationResult> {
    let denom = ses.sum_se_terrestrial + ses.se_backhaul;
    if !(denom > 0.0) {
        return Err(Error::DegenerateRates);
    }
    let mu_a = (ses.sum_se_terrestrial / denom).clamp(0.0, 1.0);
    Ok(result_at(mu_a, Method::ClosedForm, ses, bandwidth_hz, 0, true))
}

/// Non-IAB baseline: a static split (0.5 mirrors equal dedicated bands).
pub fn fixed_split(mu_fixed: f64, ses: &SeSummary, bandwidth_hz: f64) -> AllocationResult {
    debug_assert!((0.0..=1.0).contains(&mu_fixed));
    result_at(
        mu_fixed.clamp(0.0, 1.0),
        Method::Fixed,
        ses,
        bandwidth_hz,
        0,
        true,
    )
}

/// Brute-force diagnostic: maximize the reduced objective
/// `mu_a w (sum SE_aerial_users - sum SE_t)` over a `step` grid subject to
/// the backhaul lower bound. Exposes where the closed form and the grid
/// argmax would diverge (they agree whenever terrestrial links out-rate
/// aerial users).
pub fn grid_search(ses: &SeSummary, bandwidth_hz: f64, step: f64) -> AllocationResult {
    let lb = ses.backhaul_lower_bound();
    let slope = ses.sum_se_aerial_users - ses.sum_se_terrestrial;
    let objective = |mu: f64| mu * bandwidth_hz * slope;
    let mut best_mu = lb.clamp(0.0, 1.0);
    let mut best = objective(best_mu);
    let steps = (1.0 / step).round() as usize;
    for k in 0..=steps {
        let mu = (k as f64 * step).min(1.0);
        if mu < lb {
            continue;
        }
        let v = objective(mu);
        if v > best {
            best = v;
            best_mu = mu;
        }
    }
    result_at(best_mu, Method::ClosedForm, ses, bandwidth_hz, steps, true)
}

// ---------------------------------------------------------------------------
// Successive convex approximation under bandwidth-dependent noise
// ---------------------------------------------------------------------------

/// Affine approximation of one rate around an expansion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinFn {
    /// Exact rate value at `mu_m`.
    pub value: f64,
    /// d(rate)/d(mu_a) at `mu_m`.
    pub slope: f64,
    pub mu_m: f64,
}

impl LinFn {
    pub fn at(&self, mu: f64) -> f64 {
        self.value + self.slope * (mu - self.mu_m)
    }

    /// Coefficients (a, b) of `a + b * mu`.
    fn affine(&self) -> (f64, f64) {
        (self.value - self.slope * self.mu_m, self.slope)
    }
}

/// Linearized per-link rates at one SCA expansion point.
#[derive(Debug, Clone)]
pub struct LinearizedRates {
    pub aerial_users: Vec<LinFn>,
    pub backhaul: LinFn,
    pub terrestrial: Vec<LinFn>,
    pub mu_m: f64,
}

const LN2: f64 = std::f64::consts::LN_2;

/// Exact bandwidth-dependent SE of an aerial-side link:
/// `log2(gt + mu w Pn) - log2(i + mu w Pn)` with `gt = s + i`.
pub fn exact_se_aerial(budget: &LinkBudget, mu_a: f64, w_pn: f64) -> f64 {
    let noise = mu_a * w_pn;
    ((budget.signal_w + budget.interference_w + noise) / (budget.interference_w + noise)).log2()
}

/// Exact bandwidth-dependent SE of a terrestrial link (noise share `1 - mu_a`).
pub fn exact_se_terrestrial(budget: &LinkBudget, mu_a: f64, w_pn: f64) -> f64 {
    let noise = (1.0 - mu_a) * w_pn;
    ((budget.signal_w + budget.interference_w + noise) / (budget.interference_w + noise)).log2()
}

fn linearize_aerial(budget: &LinkBudget, mu_m: f64, w_pn: f64) -> LinFn {
    let gt = budget.signal_w + budget.interference_w;
    let i = budget.interference_w;
    let noise = mu_m * w_pn;
    LinFn {
        value: ((gt + noise) / (i + noise)).log2(),
        slope: w_pn / (LN2 * (gt + noise)) - w_pn / (LN2 * (i + noise)),
        mu_m,
    }
}

fn linearize_terrestrial(budget: &LinkBudget, mu_m: f64, w_pn: f64) -> LinFn {
    let gt = budget.signal_w + budget.interference_w;
    let i = budget.interference_w;
    let noise = (1.0 - mu_m) * w_pn;
    LinFn {
        value: ((gt + noise) / (i + noise)).log2(),
        slope: -w_pn / (LN2 * (gt + noise)) + w_pn / (LN2 * (i + noise)),
        mu_m,
    }
}

/// First-order expansions of all rates around `mu_m`.
pub fn linearize_rates(budgets: &LinkBudgets, mu_m: f64, w_pn: f64) -> LinearizedRates {
    LinearizedRates {
        aerial_users: budgets
            .aerial_users
            .iter()
            .map(|b| linearize_aerial(b, mu_m, w_pn))
            .collect(),
        backhaul: linearize_aerial(&budgets.backhaul, mu_m, w_pn),
        terrestrial: budgets
            .terrestrial
            .iter()
            .map(|b| linearize_terrestrial(b, mu_m, w_pn))
            .collect(),
        mu_m,
    }
}

#[derive(Debug, Clone)]
pub struct ScaOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    pub initial_mu: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            epsilon: 1e-3,
            max_iters: 50,
            initial_mu: 0.5,
        }
    }
}

/// SCA outcome: the allocation plus the visited iterates.
#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub result: AllocationResult,
    /// mu values starting from the seed, one entry per solved subproblem.
    pub mu_trace: Vec<f64>,
}

fn sum_affine(fns: &[LinFn]) -> (f64, f64) {
    fns.iter().fold((0.0, 0.0), |(a, b), f| {
        let (fa, fb) = f.affine();
        (a + fa, b + fb)
    })
}

/// Maximize the linearized objective subject to the linearized backhaul
/// constraint; quadratic in one variable, solved by candidate enumeration.
fn solve_subproblem(lin: &LinearizedRates, iteration: usize) -> Result<f64> {
    let (a_a, b_a) = sum_affine(&lin.aerial_users);
    let (a_t, b_t) = sum_affine(&lin.terrestrial);
    let (a_b, b_b) = lin.backhaul.affine();

    // objective(mu)/w = (B_a - B_t) mu^2 + (A_a + B_t - A_t) mu + A_t
    let q2 = b_a - b_t;
    let q1 = a_a + b_t - a_t;
    // constraint(mu) = (B_b + B_t) mu^2 + (A_b - B_t + A_t) mu - A_t >= 0
    let c2 = b_b + b_t;
    let c1 = a_b - b_t + a_t;
    let c0 = -a_t;

    let scale = 1.0 + a_t.abs() + a_b.abs() + b_t.abs() + b_b.abs();
    let feas_tol = 1e-9 * scale;
    let feasible =
        |mu: f64| (0.0..=1.0).contains(&mu) && c2 * mu * mu + c1 * mu + c0 >= -feas_tol;
    let objective = |mu: f64| q2 * mu * mu + q1 * mu;

    let mut candidates = vec![0.0, 1.0];
    if q2 != 0.0 {
        candidates.push((-q1 / (2.0 * q2)).clamp(0.0, 1.0));
    }
    if c2 != 0.0 {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            candidates.push(((-c1 - sq) / (2.0 * c2)).clamp(0.0, 1.0));
            candidates.push(((-c1 + sq) / (2.0 * c2)).clamp(0.0, 1.0));
        }
    } else if c1 != 0.0 {
        candidates.push((-c0 / c1).clamp(0.0, 1.0));
    }

    let mut best: Option<(f64, f64)> = None;
    for &mu in &candidates {
        if !feasible(mu) {
            continue;
        }
        let v = objective(mu);
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((mu, v));
        }
    }
    best.map(|(mu, _)| mu)
        .ok_or(Error::ScaInfeasible { iteration })
}

/// Algorithm: start from `initial_mu`, repeatedly linearize and solve the
/// one-variable subproblem until successive splits differ by less than
/// `epsilon`.
pub fn sca_allocate(
    budgets: &LinkBudgets,
    bandwidth_hz: f64,
    noise_psd_w_per_hz: f64,
    opts: &ScaOptions,
) -> Result<ScaOutcome> {
    let w_pn = bandwidth_hz * noise_psd_w_per_hz;
    let mut mu = opts.initial_mu.clamp(0.0, 1.0);
    let mut trace = vec![mu];
    let mut converged = false;
    let mut iterations = 0;
    for m in 1..=opts.max_iters {
        let lin = linearize_rates(budgets, mu, w_pn);
        let mu_next = solve_subproblem(&lin, m)?;
        trace.push(mu_next);
        let delta = (mu_next - mu).abs();
        mu = mu_next;
        iterations = m;
        if delta < opts.epsilon {
            converged = true;
            break;
        }
    }

    // Report exact bandwidth-dependent rates at the final split.
    let ses = SeSummary {
        sum_se_aerial_users: budgets
            .aerial_users
            .iter()
            .map(|b| exact_se_aerial(b, mu, w_pn))
            .sum(),
        se_backhaul: exact_se_aerial(&budgets.backhaul, mu, w_pn),
        sum_se_terrestrial: budgets
            .terrestrial
            .iter()
            .map(|b| exact_se_terrestrial(b, mu, w_pn))
            .sum(),
    };
    Ok(ScaOutcome {
        result: result_at(mu, Method::Sca, &ses, bandwidth_hz, iterations, converged),
        mu_trace: trace,
    })
}

// ---------------------------------------------------------------------------
// Genetic-algorithm benchmark
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GaOptions {
    pub population: usize,
    pub generations: usize,
    pub mutation_sigma: f64,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    pub tournament: usize,
    pub elites: usize,
}

impl Default for GaOptions {
    fn default() -> Self {
        GaOptions {
            population: 64,
            generations: 200,
            mutation_sigma: 0.05,
            mutation_prob: 0.3,
            crossover_prob: 0.9,
            tournament: 3,
            elites: 2,
        }
    }
}

/// Maximize `objective` over [0, 1] subject to `violation(mu) == 0`
/// (violations are penalized). Returns the best feasible individual seen,
/// falling back to the least-violating one if nothing was feasible.
pub fn ga_maximize(
    objective: impl Fn(f64) -> f64,
    violation: impl Fn(f64) -> f64,
    opts: &GaOptions,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mutation = Normal::new(0.0, opts.mutation_sigma).expect("finite sigma");
    let mut pop: Vec<f64> = (0..opts.population).map(|_| rng.random::<f64>()).collect();

    let penalty = {
        let max_abs = pop
            .iter()
            .map(|&mu| objective(mu).abs())
            .fold(0.0f64, f64::max);
        1e6 * (1.0 + max_abs)
    };
    let fitness = |mu: f64| objective(mu) - penalty * violation(mu);

    let mut best_feasible: Option<(f64, f64)> = None;
    let mut least_violating = (pop[0], f64::INFINITY);
    let consider = |mu: f64, best: &mut Option<(f64, f64)>, least: &mut (f64, f64)| {
        let v = violation(mu);
        if v <= 1e-9 {
            let obj = objective(mu);
            if best.map_or(true, |(_, b)| obj > b) {
                *best = Some((mu, obj));
            }
        } else if v < least.1 {
            *least = (mu, v);
        }
    };
    for &mu in &pop {
        consider(mu, &mut best_feasible, &mut least_violating);
    }

    for _ in 0..opts.generations {
        let mut scored: Vec<(f64, f64)> = pop.iter().map(|&mu| (mu, fitness(mu))).collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

        let mut next: Vec<f64> = scored.iter().take(opts.elites).map(|&(mu, _)| mu).collect();
        let tournament = |rng: &mut ChaCha8Rng, scored: &[(f64, f64)]| -> f64 {
            let mut best = scored[rng.random_range(0..scored.len())];
            for _ in 1..opts.tournament {
                let c = scored[rng.random_range(0..scored.len())];
                if c.1 > best.1 {
                    best = c;
                }
            }
            best.0
        };
        while next.len() < opts.population {
            let p1 = tournament(rng, &scored);
            let p2 = tournament(rng, &scored);
            let mut child = if rng.random::<f64>() < opts.crossover_prob {
                // Arithmetic blend with mild extrapolation.
                let alpha: f64 = rng.random_range(-0.25..1.25);
                p1 + alpha * (p2 - p1)
            } else {
                p1
            };
            if rng.random::<f64>() < opts.mutation_prob {
                child += mutation.sample(rng);
            }
            let child = child.clamp(0.0, 1.0);
            consider(child, &mut best_feasible, &mut least_violating);
            next.push(child);
        }
        pop = next;
    }

    match best_feasible {
        Some((mu, obj)) => (mu, obj),
        None => {
            let mu = least_violating.0;
            (mu, objective(mu))
        }
    }
}

/// GA benchmark on the spectrum-allocation problem: maximizes the two-term
/// rate objective under the backhaul lower bound. Deterministic given `rng`.
pub fn ga_allocate(
    ses: &SeSummary,
    bandwidth_hz: f64,
    opts: &GaOptions,
    rng: &mut ChaCha8Rng,
) -> AllocationResult {
    let lb = ses.backhaul_lower_bound();
    let ra = ses.sum_se_aerial_users;
    let rt = ses.sum_se_terrestrial;
    let objective = |mu: f64| bandwidth_hz * (mu * ra + (1.0 - mu) * rt);
    let violation = |mu: f64| (lb - mu).max(0.0);
    let (mu, _) = ga_maximize(objective, violation, opts, rng);
    result_at(mu, Method::Ga, ses, bandwidth_hz, opts.generations, true)
}
