//! LoS mmWave channels on uniform planar arrays.
//!
//! Each link is a single deterministic LoS ray: a distance-dependent gain
//! `gamma0 / d^n` times a unit-modulus UPA steering vector. Arrays face
//! straight down, so the departure elevation `theta` is measured off the
//! vertical boresight and `phi` is the ground-plane azimuth.
//!
//! Channel matrices store one link per row in receive-projection form: the
//! complex gain of precoder column `f` at link `j` is `H.row(j) * f`, and the
//! zero-forcing precoder satisfies `H * F_zf = I`.

use nalgebra::{DMatrix, RowDVector, Vector3};
use serde_json::json;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scenario::{link_distance, Geometry};
use crate::{C64, CMat};

/// Reference path loss at 1 m (dB): `-20 log10(f_GHz) - 32.45`.
pub fn reference_path_loss_db(carrier_frequency_ghz: f64) -> f64 {
    -20.0 * carrier_frequency_ghz.log10() - 32.45
}

/// Departure angles from `tx` toward `rx`.
///
/// `theta` is the angle off the vertical boresight (0 = straight up/down),
/// `phi = atan2(dy, dx)` the azimuth, fixed to 0 for purely vertical links.
pub fn departure_angles(tx: &Vector3<f64>, rx: &Vector3<f64>) -> Result<(f64, f64)> {
    let d = rx - tx;
    let norm = d.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateLink);
    }
    let phi = if d.x == 0.0 && d.y == 0.0 {
        0.0
    } else {
        d.y.atan2(d.x)
    };
    let theta = (d.z.abs() / norm).clamp(-1.0, 1.0).acos();
    Ok((theta, phi))
}

/// UPA steering vector with unit-modulus elements.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    pub elements: nalgebra::DVector<C64>,
    pub theta_rad: f64,
    pub phi_rad: f64,
}

/// Steering vector for an `n_x * n_y` UPA with spacing `r` half wavelengths.
///
/// Element (n_x index `ix`, n_y index `iy`, both zero-based) is
/// `exp(j * pi * r * sin(theta) * (ix cos(phi) + iy sin(phi)))`, flattened
/// row-major with the n_y index fastest; the first element is always 1.
pub fn steering_vector(
    theta_rad: f64,
    phi_rad: f64,
    n_x: usize,
    n_y: usize,
    r: f64,
) -> SteeringVector {
    let k = std::f64::consts::PI * r * theta_rad.sin();
    let (cos_phi, sin_phi) = (phi_rad.cos(), phi_rad.sin());
    let mut elements = nalgebra::DVector::from_element(n_x * n_y, C64::new(1.0, 0.0));
    for ix in 0..n_x {
        for iy in 0..n_y {
            let phase = k * (ix as f64 * cos_phi + iy as f64 * sin_phi);
            elements[ix * n_y + iy] = C64::from_polar(1.0, phase);
        }
    }
    SteeringVector {
        elements,
        theta_rad,
        phi_rad,
    }
}

/// Per-link channel metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMeta {
    pub distance_m: f64,
    /// Linear power gain `gamma0_lin / d^n`; the row norm satisfies
    /// `||h||^2 = N * gain`.
    pub gain_linear: f64,
}

/// Channel matrices for both tiers of one drop.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// J x N donor-side matrix: rows are the J-1 aerial users followed by
    /// the backhaul link to the node.
    pub h_a: CMat,
    /// I x N node-side matrix for terrestrial users.
    pub h_t: CMat,
    /// Which row of `h_a` is the backhaul link (always the last).
    pub backhaul_row_index: usize,
    pub aerial_meta: Vec<LinkMeta>,
    pub terrestrial_meta: Vec<LinkMeta>,
}

fn channel_row(
    tx: &Vector3<f64>,
    rx: &Vector3<f64>,
    config: &ScenarioConfig,
    gamma0_linear: f64,
) -> Result<(RowDVector<C64>, LinkMeta)> {
    let d = link_distance(tx, rx);
    let (theta, phi) = departure_angles(tx, rx)?;
    let sv = steering_vector(
        theta,
        phi,
        config.n_x,
        config.n_y,
        config.element_spacing_half_wavelengths,
    );
    let gain = gamma0_linear / d.powf(config.path_loss_exponent);
    let amp = gain.sqrt();
    let row = RowDVector::from_fn(sv.elements.len(), |_, c| sv.elements[c] * amp);
    Ok((row, LinkMeta {
        distance_m: d,
        gain_linear: gain,
    }))
}

/// Build both tiers' channel matrices from a placed drop.
pub fn build_channels(geometry: &Geometry, config: &ScenarioConfig) -> Result<ChannelSet> {
    let n = config.num_antennas();
    let j = config.num_aerial_links;
    let i = config.num_terrestrial_links;
    let gamma0_linear = 10f64.powf(reference_path_loss_db(config.carrier_frequency_ghz) / 10.0);

    let mut h_a = DMatrix::zeros(j, n);
    let mut aerial_meta = Vec::with_capacity(j);
    for (idx, user) in geometry.aerial_users.iter().enumerate() {
        let (row, meta) = channel_row(&geometry.donor, user, config, gamma0_linear)?;
        h_a.set_row(idx, &row);
        aerial_meta.push(meta);
    }
    // Backhaul link occupies the last aerial row.
    let (row, meta) = channel_row(&geometry.donor, &geometry.node, config, gamma0_linear)?;
    h_a.set_row(j - 1, &row);
    aerial_meta.push(meta);

    let mut h_t = DMatrix::zeros(i, n);
    let mut terrestrial_meta = Vec::with_capacity(i);
    for (idx, user) in geometry.terrestrial_users.iter().enumerate() {
        let (row, meta) = channel_row(&geometry.node, user, config, gamma0_linear)?;
        h_t.set_row(idx, &row);
        terrestrial_meta.push(meta);
    }

    Ok(ChannelSet {
        h_a,
        h_t,
        backhaul_row_index: j - 1,
        aerial_meta,
        terrestrial_meta,
    })
}

fn matrix_to_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect();
    json!(rows)
}

impl ChannelSet {
    /// JSON layout used by test fixtures: complex entries as `[re, im]`.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "h_a": matrix_to_json(&self.h_a),
            "h_t": matrix_to_json(&self.h_t),
            "backhaul_row_index": self.backhaul_row_index,
            "aerial_distance_m": self.aerial_meta.iter().map(|m| m.distance_m).collect::<Vec<_>>(),
            "aerial_gain_linear": self.aerial_meta.iter().map(|m| m.gain_linear).collect::<Vec<_>>(),
            "terrestrial_distance_m": self.terrestrial_meta.iter().map(|m| m.distance_m).collect::<Vec<_>>(),
            "terrestrial_gain_linear": self.terrestrial_meta.iter().map(|m| m.gain_linear).collect::<Vec<_>>(),
        })
    }
}
