//! Node geometry and randomized user placement for one drop.
//!
//! The donor hovers over the area center; the node sits at a configurable
//! ground offset below it. Users are drawn from truncated Gaussians
//! (sigma = area_side / 6) around per-tier sub-region centers: the aerial
//! sub-region is anchored at the donor's ground projection plus
//! `aerial_subregion_offset_*`, the terrestrial one at the node's ground
//! projection plus `terrestrial_subregion_offset_*`. A sub-region is the
//! part of the square at least `*_inner_radius_m` from its center, so with
//! the stock radii users ring their serving UAV instead of sitting under
//! it. Placement rejects samples that leave the sub-region or fall closer
//! than `min_ue_separation_m` to any previously placed user.

use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Hard cap on rejection-sampling attempts before placement gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Positions of every node and user in one drop, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub donor: Vector3<f64>,
    pub node: Vector3<f64>,
    /// J - 1 aerial users, all at `aerial_ue_height_m`.
    pub aerial_users: Vec<Vector3<f64>>,
    /// I terrestrial users at ground level.
    pub terrestrial_users: Vec<Vector3<f64>>,
}

impl Geometry {
    /// All user positions, aerial first.
    pub fn all_users(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.aerial_users.iter().chain(self.terrestrial_users.iter())
    }
}

/// Euclidean distance between two points (m).
pub fn link_distance(p: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
    (p - q).norm()
}

/// Place all users for one drop. Deterministic given `config.rng_seed`.
pub fn place_users(config: &ScenarioConfig) -> Result<Geometry> {
    config.validate()?;
    let side = config.area_side_m;
    let center = side / 2.0;
    let donor = Vector3::new(center, center, config.donor_height_m);
    let node = Vector3::new(
        center + config.node_offset_x_m,
        center + config.node_offset_y_m,
        config.node_height_m,
    );

    let sigma = side / 6.0;
    let mut rng = substream(config.rng_seed, "placement");
    let mut attempts = 0usize;
    let mut placed: Vec<Vector3<f64>> = Vec::new();

    let sample_tier = |rng: &mut rand_chacha::ChaCha8Rng,
                           placed: &mut Vec<Vector3<f64>>,
                           attempts: &mut usize,
                           count: usize,
                           center_x: f64,
                           center_y: f64,
                           z: f64|
     -> Result<Vec<Vector3<f64>>> {
        let dist_x = Normal::new(center_x, sigma).expect("finite sigma");
        let dist_y = Normal::new(center_y, sigma).expect("finite sigma");
        let mut users = Vec::with_capacity(count);
        for _ in 0..count {
            loop {
                *attempts += 1;
                if *attempts > MAX_PLACEMENT_ATTEMPTS {
                    return Err(Error::PlacementFailure {
                        attempts: MAX_PLACEMENT_ATTEMPTS,
                    });
                }
                let x = dist_x.sample(rng);
                let y = dist_y.sample(rng);
                // Truncate the Gaussian to the square area.
                if !(0.0..=side).contains(&x) || !(0.0..=side).contains(&y) {
                    continue;
                }
                let candidate = Vector3::new(x, y, z);
                let ok = placed
                    .iter()
                    .all(|p| link_distance(p, &candidate) >= config.min_ue_separation_m);
                if ok {
                    placed.push(candidate);
                    users.push(candidate);
                    break;
                }
            }
        }
        Ok(users)
    };

    let aerial_users = sample_tier(
        &mut rng,
        &mut placed,
        &mut attempts,
        config.num_aerial_links - 1,
        donor.x + config.aerial_subregion_offset_x_m,
        donor.y + config.aerial_subregion_offset_y_m,
        config.aerial_ue_height_m,
    )?;
    let terrestrial_users = sample_tier(
        &mut rng,
        &mut placed,
        &mut attempts,
        config.num_terrestrial_links,
        node.x + config.terrestrial_subregion_offset_x_m,
        node.y + config.terrestrial_subregion_offset_y_m,
        0.0,
    )?;

    Ok(Geometry {
        donor,
        node,
        aerial_users,
        terrestrial_users,
    })
}
