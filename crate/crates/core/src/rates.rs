//! Per-link SINR/spectral efficiency and the backhaul-bottlenecked network
//! sum-rate.
//!
//! SEs follow the multi-user MISO form
//! `log2(1 + p_j |g_jj|^2 / (sum_{k != j} p_k |g_jk|^2 + sigma^2))`, where
//! `g_jk` is the complex gain of beam `k` at link `j`. Powers stay in linear
//! watts throughout; dB conversions happen only at I/O boundaries.

use std::fmt;

use crate::channel::ChannelSet;
use crate::config::ScenarioConfig;
use crate::CMat;

/// Per-tier noise powers (W) used when evaluating SEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub noise_aerial_w: f64,
    pub noise_terrestrial_w: f64,
}

impl RateParams {
    /// Fixed-noise mode: full-band thermal noise `sigma^2 = P_n * w` for
    /// both tiers.
    pub fn full_band(config: &ScenarioConfig) -> Self {
        let sigma = config.full_band_noise_w();
        RateParams {
            noise_aerial_w: sigma,
            noise_terrestrial_w: sigma,
        }
    }

    pub fn fixed(noise_aerial_w: f64, noise_terrestrial_w: f64) -> Self {
        RateParams {
            noise_aerial_w,
            noise_terrestrial_w,
        }
    }

    /// Bandwidth-dependent mode: `sigma^2(mu w) = mu * w * P_n`, with the
    /// aerial share `mu_a` for aerial/backhaul links and `1 - mu_a` for
    /// terrestrial links.
    pub fn bandwidth_dependent(mu_a: f64, bandwidth_hz: f64, noise_psd_w_per_hz: f64) -> Self {
        RateParams {
            noise_aerial_w: mu_a * bandwidth_hz * noise_psd_w_per_hz,
            noise_terrestrial_w: (1.0 - mu_a) * bandwidth_hz * noise_psd_w_per_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    AerialUser,
    Backhaul,
    Terrestrial,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::AerialUser => "aerial",
            Tier::Backhaul => "backhaul",
            Tier::Terrestrial => "terrestrial",
        })
    }
}

/// Noise-independent signal/interference powers of one link (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub signal_w: f64,
    pub interference_w: f64,
}

impl LinkBudget {
    /// SE (bit/s/Hz) under the given noise power.
    pub fn se(&self, noise_w: f64) -> f64 {
        (1.0 + self.signal_w / (self.interference_w + noise_w)).log2()
    }
}

/// Signal/interference breakdown for every link of a drop.
#[derive(Debug, Clone)]
pub struct LinkBudgets {
    pub aerial_users: Vec<LinkBudget>,
    pub backhaul: LinkBudget,
    pub terrestrial: Vec<LinkBudget>,
}

fn row_budget(h: &CMat, beams: &CMat, powers: &[f64], link_index: usize) -> LinkBudget {
    let gains = h.row(link_index) * beams;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (k, &p) in powers.iter().enumerate() {
        let g2 = gains[k].norm_sqr() * p;
        if k == link_index {
            signal = g2;
        } else {
            interference += g2;
        }
    }
    LinkBudget {
        signal_w: signal,
        interference_w: interference,
    }
}

/// Spectral efficiency of link `link_index` served by `beams` with per-link
/// `powers` under `noise_w` thermal noise.
pub fn link_se(h: &CMat, beams: &CMat, powers: &[f64], link_index: usize, noise_w: f64) -> f64 {
    row_budget(h, beams, powers, link_index).se(noise_w)
}

/// Compute every link's budget for one drop.
///
/// `aerial_beams`/`terrestrial_beams` are the per-tier unit-column beam
/// matrices; powers are indexed like the channel rows (backhaul last).
pub fn link_budgets(
    channels: &ChannelSet,
    aerial_beams: &CMat,
    aerial_powers: &[f64],
    terrestrial_beams: &CMat,
    terrestrial_powers: &[f64],
) -> LinkBudgets {
    let b = channels.backhaul_row_index;
    let aerial_users = (0..channels.h_a.nrows())
        .filter(|&r| r != b)
        .map(|r| row_budget(&channels.h_a, aerial_beams, aerial_powers, r))
        .collect();
    let backhaul = row_budget(&channels.h_a, aerial_beams, aerial_powers, b);
    let terrestrial = (0..channels.h_t.nrows())
        .map(|r| row_budget(&channels.h_t, terrestrial_beams, terrestrial_powers, r))
        .collect();
    LinkBudgets {
        aerial_users,
        backhaul,
        terrestrial,
    }
}

/// One emitted CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRate {
    pub tier: Tier,
    pub link_index: usize,
    pub distance_m: f64,
    pub signal_w: f64,
    pub interference_w: f64,
    pub noise_w: f64,
    pub se_bps_hz: f64,
}

/// Per-link SEs plus tier sums for one drop.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub links: Vec<LinkRate>,
    pub se_aerial_users: Vec<f64>,
    pub se_backhaul: f64,
    pub se_terrestrial: Vec<f64>,
    /// Aerial-user sum (excludes the backhaul link).
    pub sum_se_aerial_users: f64,
    /// Aerial sum including the backhaul link.
    pub sum_se_aerial_with_backhaul: f64,
    pub sum_se_terrestrial: f64,
}

/// Tier sums: aerial sum including backhaul, terrestrial sum, backhaul SE.
pub fn tier_sum_se(
    se_aerial_users: &[f64],
    se_backhaul: f64,
    se_terrestrial: &[f64],
) -> (f64, f64, f64) {
    let users: f64 = se_aerial_users.iter().sum();
    (
        users + se_backhaul,
        se_terrestrial.iter().sum(),
        se_backhaul,
    )
}

/// Evaluate every link's SE under `params` and assemble the report.
pub fn rate_report(channels: &ChannelSet, budgets: &LinkBudgets, params: &RateParams) -> RateReport {
    let b = channels.backhaul_row_index;
    let mut links = Vec::new();
    let mut se_aerial_users = Vec::with_capacity(budgets.aerial_users.len());

    let aerial_rows: Vec<usize> = (0..channels.h_a.nrows()).filter(|&r| r != b).collect();
    for (slot, &row) in aerial_rows.iter().enumerate() {
        let budget = budgets.aerial_users[slot];
        let se = budget.se(params.noise_aerial_w);
        se_aerial_users.push(se);
        links.push(LinkRate {
            tier: Tier::AerialUser,
            link_index: row,
            distance_m: channels.aerial_meta[row].distance_m,
            signal_w: budget.signal_w,
            interference_w: budget.interference_w,
            noise_w: params.noise_aerial_w,
            se_bps_hz: se,
        });
    }

    let se_backhaul = budgets.backhaul.se(params.noise_aerial_w);
    links.push(LinkRate {
        tier: Tier::Backhaul,
        link_index: b,
        distance_m: channels.aerial_meta[b].distance_m,
        signal_w: budgets.backhaul.signal_w,
        interference_w: budgets.backhaul.interference_w,
        noise_w: params.noise_aerial_w,
        se_bps_hz: se_backhaul,
    });

    let mut se_terrestrial = Vec::with_capacity(budgets.terrestrial.len());
    for (i, budget) in budgets.terrestrial.iter().enumerate() {
        let se = budget.se(params.noise_terrestrial_w);
        se_terrestrial.push(se);
        links.push(LinkRate {
            tier: Tier::Terrestrial,
            link_index: i,
            distance_m: channels.terrestrial_meta[i].distance_m,
            signal_w: budget.signal_w,
            interference_w: budget.interference_w,
            noise_w: params.noise_terrestrial_w,
            se_bps_hz: se,
        });
    }

    let (sum_with_backhaul, sum_terrestrial, _) =
        tier_sum_se(&se_aerial_users, se_backhaul, &se_terrestrial);
    RateReport {
        links,
        sum_se_aerial_users: sum_with_backhaul - se_backhaul,
        sum_se_aerial_with_backhaul: sum_with_backhaul,
        sum_se_terrestrial: sum_terrestrial,
        se_aerial_users,
        se_backhaul,
        se_terrestrial,
    }
}

/// Network sum-rate decomposition (bit/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRate {
    pub total_rate_bps: f64,
    /// Aerial-user contribution `mu_a * w * sum SE_aerial_users`.
    pub aerial_component_bps: f64,
    /// Bottleneck `zeta = min(mu_a w R_ab, mu_t w sum SE_t)`.
    pub bottleneck_bps: f64,
}

/// Total rate under the aerial/terrestrial bandwidth split `mu_a`
/// (`mu_t = 1 - mu_a`); the terrestrial contribution is capped by the
/// backhaul link.
pub fn network_sum_rate(
    sum_se_aerial_users: f64,
    se_backhaul: f64,
    sum_se_terrestrial: f64,
    mu_a: f64,
    bandwidth_hz: f64,
) -> SumRate {
    debug_assert!((0.0..=1.0).contains(&mu_a));
    let mu_t = 1.0 - mu_a;
    let aerial = mu_a * bandwidth_hz * sum_se_aerial_users;
    let bottleneck = (mu_a * bandwidth_hz * se_backhaul).min(mu_t * bandwidth_hz * sum_se_terrestrial);
    SumRate {
        total_rate_bps: aerial + bottleneck,
        aerial_component_bps: aerial,
        bottleneck_bps: bottleneck,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{allocate_powers, unit_column_beams, zero_forcing};
    use crate::channel::build_channels;
    use crate::scenario::place_users;
    use crate::C64;
    use approx::assert_relative_eq;

    fn drop_parts(seed: u64) -> (ScenarioConfig, ChannelSet) {
        let cfg = ScenarioConfig {
            rng_seed: seed,
            ..ScenarioConfig::default()
        };
        let geo = place_users(&cfg).unwrap();
        let ch = build_channels(&geo, &cfg).unwrap();
        (cfg, ch)
    }

    #[test]
    fn unit_snr_gives_unit_se() {
        // Single link, beam aligned with the channel, power tuned so that
        // p * ||h||^2 / sigma^2 = 1.
        let h = CMat::from_fn(1, 8, |_, c| C64::from_polar(2.0, 0.3 * c as f64));
        let norm2 = h.row(0).norm_squared();
        let beam = h.adjoint().map(|x| x / norm2.sqrt()); // unit column aligned
        let sigma = 1e-9;
        let p = sigma / norm2;
        let se = link_se(&h, &beam, &[p], 0, sigma);
        assert_relative_eq!(se, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_zero_se() {
        let (cfg, ch) = drop_parts(3);
        let f = zero_forcing(&ch.h_t).unwrap();
        let beams = unit_column_beams(&f, &CMat::identity(3, 3)).unwrap();
        let se = link_se(&ch.h_t, &beams, &[0.0, 0.0, 0.0], 1, cfg.full_band_noise_w());
        assert_eq!(se, 0.0);
    }

    #[test]
    fn exact_zf_has_negligible_interference() {
        let (cfg, ch) = drop_parts(5);
        let (aerial_p, terrestrial_p, _) = allocate_powers(&cfg).unwrap();
        let fa = zero_forcing(&ch.h_a).unwrap();
        let ft = zero_forcing(&ch.h_t).unwrap();
        let ba = unit_column_beams(&fa, &CMat::identity(4, 4)).unwrap();
        let bt = unit_column_beams(&ft, &CMat::identity(3, 3)).unwrap();
        let budgets = link_budgets(&ch, &ba, &aerial_p.per_link_w, &bt, &terrestrial_p.per_link_w);
        for b in budgets
            .aerial_users
            .iter()
            .chain(budgets.terrestrial.iter())
            .chain(std::iter::once(&budgets.backhaul))
        {
            assert!(
                b.interference_w <= 1e-9 * b.signal_w,
                "interference {} vs signal {}",
                b.interference_w,
                b.signal_w
            );
        }
    }

    #[test]
    fn tier_sums_are_plain_sums() {
        let (ra, rt, rb) = tier_sum_se(&[2.0], 3.0, &[1.5, 0.5]);
        assert_eq!(ra, 5.0);
        assert_eq!(rt, 2.0);
        assert_eq!(rb, 3.0);
    }

    #[test]
    fn aerial_users_below_terrestrial_on_default_drops() {
        // Power split and the wider aerial sub-region keep aerial-user SEs
        // below terrestrial ones drop after drop.
        for seed in 0..20 {
            let (cfg, ch) = drop_parts(seed);
            let (aerial_p, terrestrial_p, _) = allocate_powers(&cfg).unwrap();
            let fa = zero_forcing(&ch.h_a).unwrap();
            let ft = zero_forcing(&ch.h_t).unwrap();
            let ba = unit_column_beams(&fa, &CMat::identity(4, 4)).unwrap();
            let bt = unit_column_beams(&ft, &CMat::identity(3, 3)).unwrap();
            let budgets =
                link_budgets(&ch, &ba, &aerial_p.per_link_w, &bt, &terrestrial_p.per_link_w);
            let report = rate_report(&ch, &budgets, &RateParams::full_band(&cfg));
            assert!(
                report.sum_se_aerial_users < report.sum_se_terrestrial,
                "seed {seed}: {} >= {}",
                report.sum_se_aerial_users,
                report.sum_se_terrestrial
            );
        }
    }

    #[test]
    fn sum_rate_extreme_splits() {
        let w = 500e6;
        let all_aerial = network_sum_rate(4.0, 3.0, 5.0, 1.0, w);
        assert_eq!(all_aerial.bottleneck_bps, 0.0);
        assert_relative_eq!(all_aerial.total_rate_bps, w * 4.0);

        let all_terrestrial = network_sum_rate(4.0, 3.0, 5.0, 0.0, w);
        assert_eq!(all_terrestrial.total_rate_bps, 0.0);
    }

    #[test]
    fn sum_rate_balanced_at_closed_form_split() {
        let (ra_u, rb, rt) = (4.0, 3.0, 5.0);
        let mu = rt / (rt + rb);
        let s = network_sum_rate(ra_u, rb, rt, mu, 500e6);
        assert_relative_eq!(
            mu * 500e6 * rb,
            (1.0 - mu) * 500e6 * rt,
            max_relative = 1e-12
        );
        assert_relative_eq!(s.bottleneck_bps, mu * 500e6 * rb, max_relative = 1e-12);
    }

    #[test]
    fn se_monotone_in_own_power() {
        let (cfg, ch) = drop_parts(9);
        let ft = zero_forcing(&ch.h_t).unwrap();
        let bt = unit_column_beams(&ft, &CMat::identity(3, 3)).unwrap();
        let sigma = cfg.full_band_noise_w();
        let mut last = -1.0;
        for k in 1..=8 {
            let p = k as f64 * 0.05;
            let se = link_se(&ch.h_t, &bt, &[p, 0.1, 0.1], 0, sigma);
            assert!(se > last);
            last = se;
        }
    }

    #[test]
    fn sum_rate_concave_in_mu() {
        let (ra_u, rb, rt) = (3.7, 2.9, 6.1);
        let w = 1e8;
        let r = |mu: f64| network_sum_rate(ra_u, rb, rt, mu, w).total_rate_bps;
        for i in 0..50 {
            let m1 = i as f64 / 52.0;
            let m3 = m1 + 2.0 / 52.0;
            let m2 = 0.5 * (m1 + m3);
            assert!(r(m2) >= 0.5 * (r(m1) + r(m3)) - 1e-6);
        }
    }

    #[test]
    fn fixed_and_bw_noise_agree_when_matched() {
        let (cfg, ch) = drop_parts(12);
        let (aerial_p, terrestrial_p, _) = allocate_powers(&cfg).unwrap();
        let fa = zero_forcing(&ch.h_a).unwrap();
        let ft = zero_forcing(&ch.h_t).unwrap();
        let ba = unit_column_beams(&fa, &CMat::identity(4, 4)).unwrap();
        let bt = unit_column_beams(&ft, &CMat::identity(3, 3)).unwrap();
        let budgets =
            link_budgets(&ch, &ba, &aerial_p.per_link_w, &bt, &terrestrial_p.per_link_w);
        let mu = 0.37;
        let bw_mode = RateParams::bandwidth_dependent(mu, cfg.bandwidth_hz, cfg.noise_psd_w_per_hz);
        let fixed = RateParams::fixed(bw_mode.noise_aerial_w, bw_mode.noise_terrestrial_w);
        let a = rate_report(&ch, &budgets, &bw_mode);
        let b = rate_report(&ch, &budgets, &fixed);
        assert_eq!(a.se_aerial_users, b.se_aerial_users);
        assert_eq!(a.se_backhaul, b.se_backhaul);
        assert_eq!(a.se_terrestrial, b.se_terrestrial);
    }
}
