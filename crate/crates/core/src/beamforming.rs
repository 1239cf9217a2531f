//! Per-tier precoder design: fully digital zero forcing and hybrid
//! analog-digital factorization by alternating least squares.
//!
//! The hybrid design approximates the zero-forcing precoder with a
//! unit-modulus analog matrix times a small digital matrix. Each iteration
//! solves the unconstrained least-squares problem for one factor, projects
//! the analog factor back onto unit-modulus entries, then refits the digital
//! factor. The target matrix is normalized to unit Frobenius norm first, so
//! the residual `lambda` reads as a relative error and the stock target of
//! 0.1 is scale-free; downstream power scaling renormalizes columns anyway.

use nalgebra::linalg::Cholesky;
use rand::Rng;
use serde_json::json;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::io::cmat_to_json;
use crate::rng::substream;
use crate::{C64, CMat};

/// Default cap on the Gram-matrix condition number for zero forcing.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Per-link transmit powers for one tier (W).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub per_link_w: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(per_link_w: Vec<f64>) -> Self {
        debug_assert!(per_link_w.iter().all(|&p| p >= 0.0));
        PowerAllocation { per_link_w }
    }

    pub fn uniform(links: usize, total_w: f64) -> Self {
        PowerAllocation::new(vec![total_w / links as f64; links])
    }

    pub fn len(&self) -> usize {
        self.per_link_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_link_w.is_empty()
    }

    pub fn total_w(&self) -> f64 {
        self.per_link_w.iter().sum()
    }

    /// Diagonal matrix view `P = diag(p_1, ..., p_L)`.
    pub fn diagonal(&self) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.len(),
            self.per_link_w.iter().map(|&p| C64::new(p, 0.0)),
        ))
    }
}

/// Equal-share power split across tiers.
///
/// Terrestrial links each get `P2 / I`. The backhaul link gets the
/// per-terrestrial share (or the configured override), and the donor's
/// remaining budget is split equally among the J - 1 aerial users. The
/// aerial allocation is indexed like the aerial channel rows, backhaul last.
pub fn allocate_powers(
    config: &ScenarioConfig,
) -> Result<(PowerAllocation, PowerAllocation, f64)> {
    let i = config.num_terrestrial_links;
    let j = config.num_aerial_links;
    let p_backhaul = config.backhaul_power();
    let remaining = config.donor_power_w - p_backhaul;
    if remaining <= 0.0 {
        return Err(Error::InfeasiblePower {
            donor_power_w: config.donor_power_w,
            backhaul_power_w: p_backhaul,
        });
    }
    let p_aerial_user = remaining / (j - 1) as f64;
    let mut aerial = vec![p_aerial_user; j];
    aerial[j - 1] = p_backhaul;
    Ok((
        PowerAllocation::new(aerial),
        PowerAllocation::uniform(i, config.node_power_w),
        p_backhaul,
    ))
}

/// Zero-forcing precoder `H^H (H H^H)^{-1}` with the default condition cap.
pub fn zero_forcing(h: &CMat) -> Result<CMat> {
    zero_forcing_capped(h, DEFAULT_CONDITION_CAP)
}

/// Zero-forcing precoder with an explicit cap on the Gram condition number.
pub fn zero_forcing_capped(h: &CMat, condition_cap: f64) -> Result<CMat> {
    let (l, n) = h.shape();
    assert!(l <= n, "zero forcing needs at least as many antennas as links");
    let sv = h.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 {
        (smax / smin).powi(2)
    } else {
        f64::INFINITY
    };
    if !condition.is_finite() || condition > condition_cap {
        return Err(Error::RankDeficientChannel {
            condition,
            cap: condition_cap,
        });
    }
    let gram = h * h.adjoint();
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficientChannel {
        condition,
        cap: condition_cap,
    })?;
    Ok(h.adjoint() * chol.inverse())
}

/// Rank-`n_rf` SVD truncation of `f_zf`: returns `(U_m, Sigma_m V_m^H)`
/// before any unit-modulus normalization.
pub fn svd_initialize(f_zf: &CMat, n_rf: usize) -> (CMat, CMat) {
    let svd = f_zf.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    // Order singular triplets by decreasing singular value.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let m = n_rf.min(s.len());
    let f_rf0 = CMat::from_fn(f_zf.nrows(), m, |r, c| u[(r, order[c])]);
    let f_bb0 = CMat::from_fn(m, f_zf.ncols(), |r, c| v_t[(order[r], c)] * s[order[r]]);
    (f_rf0, f_bb0)
}

/// Project every entry onto the unit circle (zero entries map to 1).
fn unitize(m: &mut CMat) {
    for x in m.iter_mut() {
        let norm = x.norm();
        *x = if norm == 0.0 { C64::new(1.0, 0.0) } else { *x / norm };
    }
}

/// Least-squares digital factor: argmin_X ||target - A X||_F.
fn least_squares_bb(target: &CMat, a: &CMat, gram_eps: f64) -> CMat {
    let mut gram = a.adjoint() * a;
    for d in 0..gram.nrows() {
        gram[(d, d)] += C64::new(gram_eps, 0.0);
    }
    let chol = Cholesky::new(gram).expect("regularized Gram is positive definite");
    chol.solve(&(a.adjoint() * target))
}

/// Least-squares analog factor: argmin_X ||target - X B||_F.
fn least_squares_rf(target: &CMat, b: &CMat, gram_eps: f64) -> CMat {
    let mut gram = b * b.adjoint();
    for d in 0..gram.nrows() {
        gram[(d, d)] += C64::new(gram_eps, 0.0);
    }
    let chol = Cholesky::new(gram).expect("regularized Gram is positive definite");
    // X = T B^H G^{-1}; with G Hermitian, X^H = G^{-1} B T^H.
    chol.solve(&(b * target.adjoint())).adjoint()
}

/// Initialization for the alternating minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMethod {
    /// Truncated SVD of the zero-forcing target.
    Svd,
    /// Uniform random phases in the analog factor.
    RandomPhase { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    /// Stop once `lambda` (relative residual) falls to this value.
    pub target_residual: f64,
    pub max_iters: usize,
    /// Stop when one iteration improves `lambda` by less than this.
    pub improvement_eps: f64,
    pub init: InitMethod,
    /// Tikhonov term added to the half-step Gram matrices.
    pub gram_eps: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            target_residual: 0.1,
            max_iters: 200,
            improvement_eps: 1e-4,
            init: InitMethod::Svd,
            gram_eps: 1e-12,
        }
    }
}

/// Which half of an alternating iteration an observation refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfStep {
    AfterRfUpdate,
    AfterBbUpdate,
}

/// Snapshot handed to a decomposition observer.
pub struct DecomposeIterate<'a> {
    pub iteration: usize,
    pub half_step: HalfStep,
    pub f_rf: &'a CMat,
    pub f_bb: &'a CMat,
    pub lambda: f64,
}

/// Output of the alternating minimization.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub f_rf: CMat,
    pub f_bb: CMat,
    /// Relative residual ||F_zf/||F_zf|| - F_RF F_BB||_F at exit.
    pub residual: f64,
    pub iterations_used: usize,
    /// False when the loop hit `max_iters` (or stalled) above the target.
    pub converged: bool,
    /// Residual after init (index 0) and after each iteration's BB half-step.
    pub lambda_trace: Vec<f64>,
}

impl Decomposition {
    /// Index of the first iterate at or below `target`, if reached.
    pub fn iterations_to(&self, target: f64) -> Option<usize> {
        self.lambda_trace.iter().position(|&l| l <= target)
    }
}

/// Alternating minimization of `||F_zf - F_RF F_BB||_F` under unit-modulus
/// entries in `F_RF`.
pub fn hybrid_decompose(f_zf: &CMat, n_rf: usize, opts: &DecomposeOptions) -> Result<Decomposition> {
    hybrid_decompose_observed(f_zf, n_rf, opts, |_| {})
}

/// As [`hybrid_decompose`], invoking `observer` after initialization and
/// after every half-step so invariants can be checked on each iterate.
pub fn hybrid_decompose_observed(
    f_zf: &CMat,
    n_rf: usize,
    opts: &DecomposeOptions,
    mut observer: impl FnMut(DecomposeIterate<'_>),
) -> Result<Decomposition> {
    let scale = f_zf.norm();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroProduct { column: 0 });
    }
    let target = f_zf.map(|x| x / scale);

    let (mut f_rf, _) = match opts.init {
        InitMethod::Svd => svd_initialize(&target, n_rf),
        InitMethod::RandomPhase { seed } => {
            let mut rng = substream(seed, "hbf-random-init");
            let f_rf = CMat::from_fn(target.nrows(), n_rf, |_, _| {
                C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            });
            let f_bb = CMat::zeros(n_rf, target.ncols());
            (f_rf, f_bb)
        }
    };
    unitize(&mut f_rf);
    let mut f_bb = least_squares_bb(&target, &f_rf, opts.gram_eps);

    let residual_of = |rf: &CMat, bb: &CMat| (&target - rf * bb).norm();

    let mut lambda = residual_of(&f_rf, &f_bb);
    let mut trace = vec![lambda];
    observer(DecomposeIterate {
        iteration: 0,
        half_step: HalfStep::AfterBbUpdate,
        f_rf: &f_rf,
        f_bb: &f_bb,
        lambda,
    });

    let mut iterations_used = 0;
    let mut converged = lambda <= opts.target_residual;
    if !converged {
        for k in 1..=opts.max_iters {
            f_rf = least_squares_rf(&target, &f_bb, opts.gram_eps);
            unitize(&mut f_rf);
            let lambda_mid = residual_of(&f_rf, &f_bb);
            observer(DecomposeIterate {
                iteration: k,
                half_step: HalfStep::AfterRfUpdate,
                f_rf: &f_rf,
                f_bb: &f_bb,
                lambda: lambda_mid,
            });

            f_bb = least_squares_bb(&target, &f_rf, opts.gram_eps);
            let lambda_new = residual_of(&f_rf, &f_bb);
            observer(DecomposeIterate {
                iteration: k,
                half_step: HalfStep::AfterBbUpdate,
                f_rf: &f_rf,
                f_bb: &f_bb,
                lambda: lambda_new,
            });
            trace.push(lambda_new);
            iterations_used = k;

            if lambda_new <= opts.target_residual {
                lambda = lambda_new;
                converged = true;
                break;
            }
            let improvement = lambda - lambda_new;
            lambda = lambda_new;
            if improvement <= opts.improvement_eps {
                break;
            }
        }
    }

    Ok(Decomposition {
        f_rf,
        f_bb,
        residual: lambda,
        iterations_used,
        converged,
        lambda_trace: trace,
    })
}

/// Scale the hybrid product so link `l` radiates exactly `p_l` watts:
/// column `l` of `F_RF F_BB` is normalized to unit norm and multiplied by
/// `sqrt(p_l)`, which pins `trace(F_hyb^H F_hyb)` to the tier budget.
pub fn scale_to_power(f_rf: &CMat, f_bb: &CMat, powers: &PowerAllocation) -> Result<CMat> {
    let mut prod = f_rf * f_bb;
    assert_eq!(prod.ncols(), powers.len(), "one power per precoded link");
    for (l, &p) in powers.per_link_w.iter().enumerate() {
        let norm = prod.column(l).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroProduct { column: l });
        }
        let s = p.sqrt() / norm;
        for x in prod.column_mut(l).iter_mut() {
            *x *= s;
        }
    }
    Ok(prod)
}

/// Unit-norm per-link beams (the hybrid product with unit power per link).
pub fn unit_column_beams(f_rf: &CMat, f_bb: &CMat) -> Result<CMat> {
    scale_to_power(f_rf, f_bb, &PowerAllocation::new(vec![1.0; f_bb.ncols()]))
}

/// Analog + digital precoder pair for one tier, with the power-scaled
/// product and solver diagnostics.
#[derive(Debug, Clone)]
pub struct HybridPrecoder {
    /// N x N_RF analog factor, unit-modulus entries.
    pub f_rf: CMat,
    /// N_RF x L digital factor.
    pub f_bb: CMat,
    /// N x L power-scaled product.
    pub f_hyb: CMat,
    pub residual: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub lambda_trace: Vec<f64>,
}

impl HybridPrecoder {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "f_rf": cmat_to_json(&self.f_rf),
            "f_bb": cmat_to_json(&self.f_bb),
            "f_hyb": cmat_to_json(&self.f_hyb),
            "residual": self.residual,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "lambda_trace": self.lambda_trace,
        })
    }
}

/// Zero-force a tier's channel, factor it, and scale to the tier's powers.
pub fn design_tier_precoder(
    h: &CMat,
    n_rf: usize,
    powers: &PowerAllocation,
    opts: &DecomposeOptions,
) -> Result<HybridPrecoder> {
    let f_zf = zero_forcing(h)?;
    let decomp = hybrid_decompose(&f_zf, n_rf, opts)?;
    let f_hyb = scale_to_power(&decomp.f_rf, &decomp.f_bb, powers)?;
    Ok(HybridPrecoder {
        f_rf: decomp.f_rf,
        f_bb: decomp.f_bb,
        f_hyb,
        residual: decomp.residual,
        iterations_used: decomp.iterations_used,
        converged: decomp.converged,
        lambda_trace: decomp.lambda_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_channels;
    use crate::scenario::place_users;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_channel(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = substream(seed, "test-channel");
        CMat::from_fn(rows, cols, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn table1_channels(seed: u64) -> crate::channel::ChannelSet {
        let cfg = ScenarioConfig {
            rng_seed: seed,
            ..ScenarioConfig::default()
        };
        let geo = place_users(&cfg).unwrap();
        build_channels(&geo, &cfg).unwrap()
    }

    #[test]
    fn zf_identity_channel() {
        let h = CMat::identity(4, 4);
        let f = zero_forcing(&h).unwrap();
        assert!((f - CMat::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn zf_nulls_interference() {
        for seed in 0..20 {
            let h = random_channel(3, 64, seed);
            let f = zero_forcing(&h).unwrap();
            let err = (&h * &f - CMat::identity(3, 3)).norm();
            assert!(err <= 1e-9, "seed {seed}: residual {err}");
        }
    }

    #[test]
    fn zf_rejects_duplicate_rows() {
        let mut h = random_channel(3, 16, 5);
        let row = h.row(0).into_owned();
        h.set_row(1, &row);
        assert!(matches!(
            zero_forcing(&h),
            Err(Error::RankDeficientChannel { .. })
        ));
    }

    #[test]
    fn svd_init_reproduces_rank_one() {
        let u = random_channel(16, 1, 7);
        let v = random_channel(1, 3, 8);
        let f_zf = &u * &v;
        let (f_rf0, f_bb0) = svd_initialize(&f_zf, 1);
        assert!((&f_rf0 * &f_bb0 - &f_zf).norm() < 1e-9);
    }

    #[test]
    fn svd_init_full_rank_is_exact() {
        let f_zf = random_channel(16, 3, 9);
        let (f_rf0, f_bb0) = svd_initialize(&f_zf, 3);
        assert!((&f_rf0 * &f_bb0 - &f_zf).norm() < 1e-9);
    }

    #[test]
    fn svd_init_beats_ones_init_median() {
        // Terrestrial-shaped instances: N = 64, L = 3, N_RF = 3.
        let mut svd_residuals = Vec::new();
        let mut ones_residuals = Vec::new();
        for seed in 0..100 {
            let ch = table1_channels(seed);
            let f_zf = zero_forcing(&ch.h_t).unwrap();
            let target = f_zf.map(|x| x / f_zf.norm());

            let (mut f_rf, _) = svd_initialize(&target, 3);
            unitize(&mut f_rf);
            let f_bb = least_squares_bb(&target, &f_rf, 1e-12);
            svd_residuals.push((&target - &f_rf * &f_bb).norm());

            let ones = CMat::from_element(64, 3, C64::new(1.0, 0.0));
            let f_bb = least_squares_bb(&target, &ones, 1e-12);
            ones_residuals.push((&target - &ones * &f_bb).norm());
        }
        svd_residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ones_residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            svd_residuals[50] < ones_residuals[50],
            "median svd-init residual {} should beat all-ones {}",
            svd_residuals[50],
            ones_residuals[50]
        );
    }

    #[test]
    fn decompose_reaches_target_on_aerial_instance() {
        let ch = table1_channels(11);
        let f_zf = zero_forcing(&ch.h_a).unwrap();
        let d = hybrid_decompose(&f_zf, 4, &DecomposeOptions::default()).unwrap();
        assert!(d.converged, "residual {}", d.residual);
        assert!(d.residual <= 0.1);
        assert!(d.iterations_used <= 60, "took {}", d.iterations_used);
    }

    #[test]
    fn phase_only_rank_one_is_exact() {
        let mut rng = substream(3, "phase-only");
        let col = CMat::from_fn(32, 1, |_, _| {
            C64::from_polar(0.7, rng.random_range(0.0..std::f64::consts::TAU))
        });
        let d = hybrid_decompose(
            &col,
            1,
            &DecomposeOptions {
                target_residual: 1e-10,
                ..DecomposeOptions::default()
            },
        )
        .unwrap();
        assert!(d.residual <= 1e-9, "residual {}", d.residual);
    }

    #[test]
    fn bb_half_step_never_increases_residual() {
        for seed in 0..50 {
            let f_zf = random_channel(8, 2, 1000 + seed);
            let mut last_mid: Option<f64> = None;
            hybrid_decompose_observed(
                &f_zf,
                2,
                &DecomposeOptions {
                    target_residual: 1e-12,
                    max_iters: 40,
                    improvement_eps: 0.0,
                    ..DecomposeOptions::default()
                },
                |it| match it.half_step {
                    HalfStep::AfterRfUpdate => last_mid = Some(it.lambda),
                    HalfStep::AfterBbUpdate => {
                        if let Some(mid) = last_mid.take() {
                            assert!(
                                it.lambda <= mid + 1e-12,
                                "seed {seed}: BB step raised residual {mid} -> {}",
                                it.lambda
                            );
                        }
                    }
                },
            )
            .unwrap();
        }
    }

    #[test]
    fn unit_modulus_invariant_every_iterate() {
        let ch = table1_channels(13);
        let f_zf = zero_forcing(&ch.h_a).unwrap();
        hybrid_decompose_observed(&f_zf, 4, &DecomposeOptions::default(), |it| {
            for x in it.f_rf.iter() {
                assert!((x.norm() - 1.0).abs() <= 1e-12);
            }
        })
        .unwrap();
    }

    #[test]
    fn scale_to_power_identity_case() {
        let raw = random_channel(8, 1, 21);
        let col = raw.map(|x| x / raw.norm());
        let f = scale_to_power(&col, &CMat::identity(1, 1), &PowerAllocation::new(vec![1.0]))
            .unwrap();
        assert!((f - col).norm() < 1e-12);
    }

    #[test]
    fn scale_to_power_single_link_norm() {
        let col = random_channel(8, 1, 22);
        let f = scale_to_power(&col, &CMat::identity(1, 1), &PowerAllocation::new(vec![4.0]))
            .unwrap();
        assert_relative_eq!(f.norm(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn scale_to_power_trace_matches_budget() {
        let cfg = ScenarioConfig::default();
        let ch = table1_channels(23);
        let (_, terrestrial, _) = allocate_powers(&cfg).unwrap();
        let f_zf = zero_forcing(&ch.h_t).unwrap();
        let d = hybrid_decompose(&f_zf, 3, &DecomposeOptions::default()).unwrap();
        let f_hyb = scale_to_power(&d.f_rf, &d.f_bb, &terrestrial).unwrap();
        let trace = (f_hyb.adjoint() * &f_hyb).trace().re;
        assert_relative_eq!(trace, cfg.node_power_w, max_relative = 1e-9);
    }

    #[test]
    fn scale_to_power_zero_column_errors() {
        let f_rf = CMat::zeros(4, 2);
        let f_bb = CMat::identity(2, 2);
        assert!(matches!(
            scale_to_power(&f_rf, &f_bb, &PowerAllocation::new(vec![1.0, 1.0])),
            Err(Error::ZeroProduct { .. })
        ));
    }

    #[test]
    fn power_split_examples() {
        let cfg = ScenarioConfig::default(); // P1 = P2 = 1, I = 3, J = 4
        let (aerial, terrestrial, p_b) = allocate_powers(&cfg).unwrap();
        assert_relative_eq!(p_b, 1.0 / 3.0);
        for p in &terrestrial.per_link_w {
            assert_relative_eq!(*p, 1.0 / 3.0);
        }
        for p in &aerial.per_link_w[..3] {
            assert_relative_eq!(*p, 2.0 / 9.0);
        }
        assert_relative_eq!(aerial.per_link_w[3], 1.0 / 3.0);
        assert_relative_eq!(aerial.total_w(), cfg.donor_power_w, epsilon = 1e-12);

        let cfg = ScenarioConfig {
            num_aerial_links: 2,
            num_terrestrial_links: 1,
            donor_power_w: 2.0,
            node_power_w: 1.0,
            ..ScenarioConfig::default()
        };
        let (aerial, terrestrial, p_b) = allocate_powers(&cfg).unwrap();
        assert_relative_eq!(p_b, 1.0);
        assert_relative_eq!(terrestrial.per_link_w[0], 1.0);
        assert_relative_eq!(aerial.per_link_w[0], 1.0);
    }

    #[test]
    fn power_split_infeasible() {
        let cfg = ScenarioConfig {
            donor_power_w: 1.0 / 3.0, // equals P2 / I
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            allocate_powers(&cfg),
            Err(Error::InfeasiblePower { .. })
        ));
    }

    #[test]
    fn power_allocation_diagonal_view() {
        let p = PowerAllocation::new(vec![1.0, 4.0]);
        let d = p.diagonal();
        assert_eq!(d[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(d[(1, 1)], C64::new(4.0, 0.0));
        assert_eq!(d[(0, 1)], C64::new(0.0, 0.0));
    }
}
