//! Scenario configuration: physical constants, array geometry, link counts,
//! and placement knobs for one simulation drop.
//!
//! Configs load from a flat `key = value` text file with `#` comments. Keys
//! mirror the [`ScenarioConfig`] field names exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All physical and system parameters for one drop.
///
/// `num_aerial_links` counts the backhaul link, i.e. the donor serves
/// `num_aerial_links - 1` aerial users plus one backhaul link to the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub carrier_frequency_ghz: f64,
    pub bandwidth_hz: f64,
    pub donor_height_m: f64,
    pub node_height_m: f64,
    pub aerial_ue_height_m: f64,
    /// J: aerial links served by the donor, backhaul included.
    pub num_aerial_links: usize,
    /// I: terrestrial links served by the node.
    pub num_terrestrial_links: usize,
    /// P1: donor transmit power budget (W).
    pub donor_power_w: f64,
    /// P2: node transmit power budget (W).
    pub node_power_w: f64,
    /// Thermal noise power spectral density (W/Hz).
    pub noise_psd_w_per_hz: f64,
    pub path_loss_exponent: f64,
    pub n_x: usize,
    pub n_y: usize,
    /// RF chains per tier. `None` means each tier uses as many chains as it
    /// has links (aerial J, terrestrial I); `Some(k)` forces `k` for both.
    pub num_rf_chains: Option<usize>,
    /// Element spacing in units of half wavelength.
    pub element_spacing_half_wavelengths: f64,
    pub area_side_m: f64,
    pub min_ue_separation_m: f64,
    pub rng_seed: u64,
    /// Node ground offset from the area center.
    pub node_offset_x_m: f64,
    pub node_offset_y_m: f64,
    /// Aerial sub-region center, relative to the donor's ground projection.
    pub aerial_subregion_offset_x_m: f64,
    pub aerial_subregion_offset_y_m: f64,
    /// Terrestrial sub-region center, relative to the node's ground projection.
    pub terrestrial_subregion_offset_x_m: f64,
    pub terrestrial_subregion_offset_y_m: f64,
    /// Inner radius of the aerial sub-region: aerial users keep at least
    /// this horizontal distance from the sub-region center.
    pub aerial_subregion_inner_radius_m: f64,
    /// Inner radius of the terrestrial sub-region.
    pub terrestrial_subregion_inner_radius_m: f64,
    /// Backhaul transmit power override (W). `None` means the per-terrestrial
    /// share `node_power_w / num_terrestrial_links`.
    pub backhaul_power_w: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            carrier_frequency_ghz: 28.0,
            bandwidth_hz: 500e6,
            donor_height_m: 150.0,
            node_height_m: 70.0,
            aerial_ue_height_m: 100.0,
            num_aerial_links: 4,
            num_terrestrial_links: 3,
            donor_power_w: 1.0,
            node_power_w: 1.0,
            noise_psd_w_per_hz: 1e-20, // -170 dBm/Hz
            path_loss_exponent: 2.0,
            n_x: 8,
            n_y: 8,
            num_rf_chains: None,
            element_spacing_half_wavelengths: 1.0,
            area_side_m: 1500.0,
            min_ue_separation_m: 10.0,
            rng_seed: 1,
            node_offset_x_m: 0.0,
            node_offset_y_m: 0.0,
            aerial_subregion_offset_x_m: 0.0,
            aerial_subregion_offset_y_m: 0.0,
            terrestrial_subregion_offset_x_m: 0.0,
            terrestrial_subregion_offset_y_m: 0.0,
            aerial_subregion_inner_radius_m: 500.0,
            terrestrial_subregion_inner_radius_m: 250.0,
            backhaul_power_w: None,
        }
    }
}

impl ScenarioConfig {
    /// Total number of array elements N = N_x * N_y.
    pub fn num_antennas(&self) -> usize {
        self.n_x * self.n_y
    }

    /// RF chains used by the aerial tier (donor).
    pub fn rf_chains_aerial(&self) -> usize {
        self.num_rf_chains.unwrap_or(self.num_aerial_links)
    }

    /// RF chains used by the terrestrial tier (node).
    pub fn rf_chains_terrestrial(&self) -> usize {
        self.num_rf_chains.unwrap_or(self.num_terrestrial_links)
    }

    /// Backhaul transmit power (W): override or the per-terrestrial share.
    pub fn backhaul_power(&self) -> f64 {
        self.backhaul_power_w
            .unwrap_or(self.node_power_w / self.num_terrestrial_links as f64)
    }

    /// Full-band thermal noise power sigma^2 = P_n * w (W).
    pub fn full_band_noise_w(&self) -> f64 {
        self.noise_psd_w_per_hz * self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, message: impl Into<String>) -> Error {
            Error::InvalidConfig {
                field,
                message: message.into(),
            }
        }
        if !(self.carrier_frequency_ghz > 0.0) {
            return Err(bad("carrier_frequency_ghz", "must be > 0"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(bad("bandwidth_hz", "must be > 0"));
        }
        if self.num_aerial_links < 2 {
            return Err(bad(
                "num_aerial_links",
                "need at least one aerial user plus the backhaul link (J >= 2)",
            ));
        }
        if self.num_terrestrial_links < 1 {
            return Err(bad("num_terrestrial_links", "need at least one link (I >= 1)"));
        }
        if self.n_x < 1 || self.n_y < 1 {
            return Err(bad("n_x", "antenna dimensions must be >= 1"));
        }
        let n = self.num_antennas();
        if n < self.num_aerial_links.max(self.num_terrestrial_links) {
            return Err(bad("n_x", format!("N = {} must be >= max(J, I)", n)));
        }
        if let Some(k) = self.num_rf_chains {
            if k < 1 {
                return Err(bad("num_rf_chains", "must be >= 1 when set"));
            }
        }
        if !(self.donor_power_w > 0.0) {
            return Err(bad("donor_power_w", "must be > 0"));
        }
        if !(self.node_power_w > 0.0) {
            return Err(bad("node_power_w", "must be > 0"));
        }
        if !(self.noise_psd_w_per_hz > 0.0) {
            return Err(bad("noise_psd_w_per_hz", "must be > 0"));
        }
        if !(2.0..=4.0).contains(&self.path_loss_exponent) {
            return Err(bad("path_loss_exponent", "must lie in [2, 4]"));
        }
        if !(self.element_spacing_half_wavelengths > 0.0) {
            return Err(bad("element_spacing_half_wavelengths", "must be > 0"));
        }
        if !(self.area_side_m > 0.0) {
            return Err(bad("area_side_m", "must be > 0"));
        }
        if self.min_ue_separation_m < 0.0 {
            return Err(bad("min_ue_separation_m", "must be >= 0"));
        }
        if self.aerial_subregion_inner_radius_m < 0.0 {
            return Err(bad("aerial_subregion_inner_radius_m", "must be >= 0"));
        }
        if self.terrestrial_subregion_inner_radius_m < 0.0 {
            return Err(bad("terrestrial_subregion_inner_radius_m", "must be >= 0"));
        }
        if let Some(p) = self.backhaul_power_w {
            if !(p > 0.0) {
                return Err(bad("backhaul_power_w", "must be > 0 when set"));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_key_values(&text)
    }

    /// Parse the flat `key = value` format. Unknown keys and malformed values
    /// are reported with their line number.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("expected `key = value`, got `{stripped}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value).map_err(|message| Error::ConfigParse { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn real(key: &str, value: &str) -> std::result::Result<f64, String> {
            value
                .parse::<f64>()
                .map_err(|_| format!("field `{key}`: `{value}` is not a real number"))
        }
        fn integer(key: &str, value: &str) -> std::result::Result<usize, String> {
            value
                .parse::<usize>()
                .map_err(|_| format!("field `{key}`: `{value}` is not a non-negative integer"))
        }
        match key {
            "carrier_frequency_ghz" => self.carrier_frequency_ghz = real(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = real(key, value)?,
            "donor_height_m" => self.donor_height_m = real(key, value)?,
            "node_height_m" => self.node_height_m = real(key, value)?,
            "aerial_ue_height_m" => self.aerial_ue_height_m = real(key, value)?,
            "num_aerial_links" => self.num_aerial_links = integer(key, value)?,
            "num_terrestrial_links" => self.num_terrestrial_links = integer(key, value)?,
            "donor_power_w" => self.donor_power_w = real(key, value)?,
            "node_power_w" => self.node_power_w = real(key, value)?,
            "noise_psd_w_per_hz" => self.noise_psd_w_per_hz = real(key, value)?,
            "path_loss_exponent" => self.path_loss_exponent = real(key, value)?,
            "n_x" => self.n_x = integer(key, value)?,
            "n_y" => self.n_y = integer(key, value)?,
            "num_rf_chains" => self.num_rf_chains = Some(integer(key, value)?),
            "element_spacing_half_wavelengths" => {
                self.element_spacing_half_wavelengths = real(key, value)?
            }
            "area_side_m" => self.area_side_m = real(key, value)?,
            "min_ue_separation_m" => self.min_ue_separation_m = real(key, value)?,
            "rng_seed" => {
                self.rng_seed = value
                    .parse::<u64>()
                    .map_err(|_| format!("field `rng_seed`: `{value}` is not a u64"))?
            }
            "node_offset_x_m" => self.node_offset_x_m = real(key, value)?,
            "node_offset_y_m" => self.node_offset_y_m = real(key, value)?,
            "aerial_subregion_offset_x_m" => self.aerial_subregion_offset_x_m = real(key, value)?,
            "aerial_subregion_offset_y_m" => self.aerial_subregion_offset_y_m = real(key, value)?,
            "terrestrial_subregion_offset_x_m" => {
                self.terrestrial_subregion_offset_x_m = real(key, value)?
            }
            "terrestrial_subregion_offset_y_m" => {
                self.terrestrial_subregion_offset_y_m = real(key, value)?
            }
            "aerial_subregion_inner_radius_m" => {
                self.aerial_subregion_inner_radius_m = real(key, value)?
            }
            "terrestrial_subregion_inner_radius_m" => {
                self.terrestrial_subregion_inner_radius_m = real(key, value)?
            }
            "backhaul_power_w" => self.backhaul_power_w = Some(real(key, value)?),
            other => return Err(format!("unknown field `{other}`")),
        }
        Ok(())
    }

    /// Render as the flat key-value format (round-trips through
    /// [`ScenarioConfig::from_key_values`]).
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("carrier_frequency_ghz", format!("{}", self.carrier_frequency_ghz));
        kv("bandwidth_hz", format!("{}", self.bandwidth_hz));
        kv("donor_height_m", format!("{}", self.donor_height_m));
        kv("node_height_m", format!("{}", self.node_height_m));
        kv("aerial_ue_height_m", format!("{}", self.aerial_ue_height_m));
        kv("num_aerial_links", format!("{}", self.num_aerial_links));
        kv("num_terrestrial_links", format!("{}", self.num_terrestrial_links));
        kv("donor_power_w", format!("{}", self.donor_power_w));
        kv("node_power_w", format!("{}", self.node_power_w));
        kv("noise_psd_w_per_hz", format!("{:e}", self.noise_psd_w_per_hz));
        kv("path_loss_exponent", format!("{}", self.path_loss_exponent));
        kv("n_x", format!("{}", self.n_x));
        kv("n_y", format!("{}", self.n_y));
        if let Some(k) = self.num_rf_chains {
            kv("num_rf_chains", format!("{k}"));
        }
        kv(
            "element_spacing_half_wavelengths",
            format!("{}", self.element_spacing_half_wavelengths),
        );
        kv("area_side_m", format!("{}", self.area_side_m));
        kv("min_ue_separation_m", format!("{}", self.min_ue_separation_m));
        kv("rng_seed", format!("{}", self.rng_seed));
        kv("node_offset_x_m", format!("{}", self.node_offset_x_m));
        kv("node_offset_y_m", format!("{}", self.node_offset_y_m));
        kv(
            "aerial_subregion_offset_x_m",
            format!("{}", self.aerial_subregion_offset_x_m),
        );
        kv(
            "aerial_subregion_offset_y_m",
            format!("{}", self.aerial_subregion_offset_y_m),
        );
        kv(
            "terrestrial_subregion_offset_x_m",
            format!("{}", self.terrestrial_subregion_offset_x_m),
        );
        kv(
            "terrestrial_subregion_offset_y_m",
            format!("{}", self.terrestrial_subregion_offset_y_m),
        );
        kv(
            "aerial_subregion_inner_radius_m",
            format!("{}", self.aerial_subregion_inner_radius_m),
        );
        kv(
            "terrestrial_subregion_inner_radius_m",
            format!("{}", self.terrestrial_subregion_inner_radius_m),
        );
        if let Some(p) = self.backhaul_power_w {
            kv("backhaul_power_w", format!("{p}"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.num_rf_chains = Some(3);
        cfg.backhaul_power_w = Some(0.4);
        cfg.rng_seed = 99;
        let parsed = ScenarioConfig::from_key_values(&cfg.to_key_values()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn parse_error_names_field_and_line() {
        let text = "carrier_frequency_ghz = 28\nbandwidth_hz = oops\n";
        let err = ScenarioConfig::from_key_values(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("bandwidth_hz"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioConfig::from_key_values("frequency = 28\n").unwrap_err();
        assert!(err.to_string().contains("unknown field `frequency`"));
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# comment\n\nnum_aerial_links = 5 # trailing\n";
        let cfg = ScenarioConfig::from_key_values(text).unwrap();
        assert_eq!(cfg.num_aerial_links, 5);
    }

    #[test]
    fn invariant_violations_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.num_aerial_links = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.path_loss_exponent = 5.0;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.n_x = 1;
        cfg.n_y = 2; // N = 2 < max(J, I) = 4
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rf_chain_defaults_follow_tier_link_counts() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.rf_chains_aerial(), 4);
        assert_eq!(cfg.rf_chains_terrestrial(), 3);
        let mut cfg = cfg;
        cfg.num_rf_chains = Some(3);
        assert_eq!(cfg.rf_chains_aerial(), 3);
        assert_eq!(cfg.rf_chains_terrestrial(), 3);
    }
}
