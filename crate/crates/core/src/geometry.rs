//! Lateral-view link geometry between a train transceiver and a base station.
//!
//! The ground transceiver sits at a perpendicular offset from the train's
//! transceiver plane. For gantry mounting this is purely vertical; trackside
//! mounting folds the horizontal lateral offset into the same perpendicular
//! distance so the 2-D relations still apply.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    /// Mounted above the track on a gantry.
    Gantry,
    /// Mounted beside the track.
    Trackside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationPlacement {
    pub mode: PlacementMode,
    /// Height of the ground transceiver above the train transceiver plane.
    pub vertical_offset_m: f64,
    /// Horizontal offset from the track centerline; zero for gantries.
    pub lateral_offset_m: f64,
    pub station_spacing_m: f64,
}

impl StationPlacement {
    pub fn gantry(vertical_offset_m: f64, station_spacing_m: f64) -> Self {
        Self {
            mode: PlacementMode::Gantry,
            vertical_offset_m,
            lateral_offset_m: 0.0,
            station_spacing_m,
        }
    }

    pub fn trackside(
        vertical_offset_m: f64,
        lateral_offset_m: f64,
        station_spacing_m: f64,
    ) -> Self {
        Self {
            mode: PlacementMode::Trackside,
            vertical_offset_m,
            lateral_offset_m,
            station_spacing_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vertical_offset_m > 0.0) {
            return Err(config("placement.vertical_offset_m must be > 0"));
        }
        if !(self.lateral_offset_m >= 0.0) {
            return Err(config("placement.lateral_offset_m must be >= 0"));
        }
        if self.mode == PlacementMode::Gantry && self.lateral_offset_m != 0.0 {
            return Err(config(
                "placement.lateral_offset_m must be 0 for gantry placement",
            ));
        }
        if !(self.station_spacing_m > 0.0) {
            return Err(config("placement.station_spacing_m must be > 0"));
        }
        Ok(())
    }

    /// Perpendicular distance between the transceiver planes.
    pub fn effective_offset_m(&self) -> f64 {
        self.vertical_offset_m.hypot(self.lateral_offset_m)
    }

    /// Nearest base station to a track abscissa, ties going to the lower id.
    /// Station `k` sits at `k * station_spacing_m`.
    pub fn nearest_station(&self, position_m: f64) -> (i64, f64) {
        let f = position_m / self.station_spacing_m;
        let lo = f.floor();
        let id = if f - lo <= 0.5 { lo } else { lo + 1.0 };
        (id as i64, id * self.station_spacing_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub position_m: f64,
    pub speed_mps: f64,
    /// Transceiver positions relative to the train reference point.
    pub transceiver_offsets_m: Vec<f64>,
}

impl TrainState {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps >= 0.0) {
            return Err(config("train.speed must be >= 0"));
        }
        validate_offsets(&self.transceiver_offsets_m)
    }

    pub fn transceiver_position_m(&self, index: usize) -> Option<f64> {
        self.transceiver_offsets_m
            .get(index)
            .map(|off| self.position_m + off)
    }
}

pub(crate) fn validate_offsets(offsets: &[f64]) -> Result<()> {
    if offsets.is_empty() {
        return Err(config("train.transceiver_offsets_m must be non-empty"));
    }
    if offsets.iter().any(|o| !o.is_finite()) {
        return Err(config("train.transceiver_offsets_m must be finite"));
    }
    if offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config(
            "train.transceiver_offsets_m must be strictly increasing",
        ));
    }
    Ok(())
}

/// Distances and adaptive half-angle for one transceiver/station pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Along-track separation.
    pub longitudinal_m: f64,
    /// Perpendicular separation (lateral offset already folded in).
    pub vertical_m: f64,
    /// Straight-line transmitter to receiver distance.
    pub slant_m: f64,
    /// Half-angle that makes the beam edge meet the receiver aperture rim.
    pub half_angle_rad: f64,
    /// Distance along the beam axis.
    pub axial_m: f64,
}

impl LinkGeometry {
    pub fn from_offsets(
        longitudinal_m: f64,
        vertical_m: f64,
        receiver_aperture_radius_m: f64,
    ) -> Result<Self> {
        let slant_m = slant_distance(longitudinal_m, vertical_m)?;
        let half_angle_rad = adaptive_half_angle(receiver_aperture_radius_m, slant_m)?;
        let axial_m = axial_distance(half_angle_rad, slant_m)?;
        Ok(Self {
            longitudinal_m,
            vertical_m,
            slant_m,
            half_angle_rad,
            axial_m,
        })
    }

    /// Geometry whose axial distance equals `axial_m` for a given
    /// perpendicular offset. Uses `slant^2 = axial^2 + r_rx^2`, which follows
    /// from the half-angle and axial relations.
    pub fn at_axial_range(
        axial_m: f64,
        vertical_m: f64,
        receiver_aperture_radius_m: f64,
    ) -> Result<Self> {
        if !(axial_m > 0.0) {
            return Err(domain(format!("axial range must be > 0, got {axial_m}")));
        }
        let slant = axial_m.hypot(receiver_aperture_radius_m);
        if slant < vertical_m {
            return Err(domain(format!(
                "axial range {axial_m} m is shorter than the perpendicular offset {vertical_m} m"
            )));
        }
        let longitudinal = ((slant - vertical_m) * (slant + vertical_m)).sqrt();
        Self::from_offsets(longitudinal, vertical_m, receiver_aperture_radius_m)
    }
}

/// Hypotenuse of the along-track and perpendicular separations.
pub fn slant_distance(longitudinal_m: f64, vertical_m: f64) -> Result<f64> {
    if !(longitudinal_m >= 0.0) || !(vertical_m >= 0.0) {
        return Err(domain(format!(
            "distances must be >= 0 (longitudinal {longitudinal_m}, vertical {vertical_m})"
        )));
    }
    if longitudinal_m == 0.0 && vertical_m == 0.0 {
        return Err(domain("transmitter and receiver coincide"));
    }
    Ok(longitudinal_m.hypot(vertical_m))
}

/// Half-angle subtended by the receiver aperture radius at `slant_m`.
pub fn adaptive_half_angle(receiver_aperture_radius_m: f64, slant_m: f64) -> Result<f64> {
    if !(receiver_aperture_radius_m > 0.0) {
        return Err(domain("receiver aperture radius must be > 0"));
    }
    if !(receiver_aperture_radius_m < slant_m) {
        return Err(domain(format!(
            "receiver aperture radius {receiver_aperture_radius_m} m must be smaller than slant distance {slant_m} m"
        )));
    }
    Ok((receiver_aperture_radius_m / slant_m).asin())
}

pub fn axial_distance(half_angle_rad: f64, slant_m: f64) -> Result<f64> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&half_angle_rad) {
        return Err(domain(format!(
            "half-angle must lie in [0, pi/2), got {half_angle_rad}"
        )));
    }
    if !(slant_m >= 0.0) {
        return Err(domain("slant distance must be >= 0"));
    }
    Ok(half_angle_rad.cos() * slant_m)
}

/// Geometry between transceiver `transceiver_index` of `train` and the
/// station at `station_position_m`.
pub fn link_geometry(
    train: &TrainState,
    transceiver_index: usize,
    station_position_m: f64,
    placement: &StationPlacement,
    receiver_aperture_radius_m: f64,
) -> Result<LinkGeometry> {
    let position = train
        .transceiver_position_m(transceiver_index)
        .ok_or_else(|| {
            domain(format!(
                "transceiver index {transceiver_index} out of range ({} transceivers)",
                train.transceiver_offsets_m.len()
            ))
        })?;
    let longitudinal = (position - station_position_m).abs();
    LinkGeometry::from_offsets(
        longitudinal,
        placement.effective_offset_m(),
        receiver_aperture_radius_m,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const R_RX: f64 = 0.054_990_398_423_233_96;

    #[test]
    fn slant_examples() {
        assert_eq!(slant_distance(0.0, 5.0).unwrap(), 5.0);
        assert_eq!(slant_distance(3.0, 4.0).unwrap(), 5.0);
        assert_relative_eq!(
            slant_distance(500.0, 5.0).unwrap(),
            500.024_999_375_031_26,
            max_relative = 1e-14
        );
        assert!(slant_distance(0.0, 0.0).is_err());
        assert!(slant_distance(-1.0, 2.0).is_err());
    }

    #[test]
    fn half_angle_examples() {
        assert_relative_eq!(
            adaptive_half_angle(0.05499, 500.0).unwrap(),
            1.099_800_002_217_123_5e-4,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            adaptive_half_angle(0.7, 1.4).unwrap(),
            PI / 6.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            adaptive_half_angle(0.05499, 75.0).unwrap(),
            7.332_000_656_925_656e-4,
            max_relative = 1e-12
        );
        assert!(adaptive_half_angle(2.0, 2.0).is_err());
        assert!(adaptive_half_angle(0.0, 2.0).is_err());
    }

    #[test]
    fn axial_examples() {
        assert_eq!(axial_distance(0.0, 100.0).unwrap(), 100.0);
        assert_relative_eq!(
            axial_distance(PI / 3.0, 100.0).unwrap(),
            50.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            axial_distance(1.0999e-4, 500.025).unwrap(),
            500.024_996_975_398_7,
            max_relative = 1e-14
        );
        assert!(axial_distance(PI / 2.0, 1.0).is_err());
    }

    #[test]
    fn composite_overhead_station() {
        let train = TrainState {
            position_m: 400.0,
            speed_mps: 0.0,
            transceiver_offsets_m: vec![0.0],
        };
        let g = link_geometry(
            &train,
            0,
            400.0,
            &StationPlacement::gantry(5.0, 400.0),
            R_RX,
        )
        .unwrap();
        assert_eq!(g.longitudinal_m, 0.0);
        assert_eq!(g.slant_m, 5.0);
    }

    #[test]
    fn composite_500m_gantry() {
        let train = TrainState {
            position_m: 500.0,
            speed_mps: 0.0,
            transceiver_offsets_m: vec![0.0],
        };
        let g = link_geometry(
            &train,
            0,
            0.0,
            &StationPlacement::gantry(5.0, 400.0),
            0.05499,
        )
        .unwrap();
        assert_relative_eq!(g.slant_m, 500.024_999_375_031_26, max_relative = 1e-14);
        assert_relative_eq!(g.half_angle_rad, 1.0998e-4, max_relative = 1e-4);
        assert!(g.axial_m < g.slant_m);
    }

    #[test]
    fn trackside_slant_exceeds_gantry() {
        let train = TrainState {
            position_m: 500.0,
            speed_mps: 0.0,
            transceiver_offsets_m: vec![0.0],
        };
        let track = link_geometry(
            &train,
            0,
            0.0,
            &StationPlacement::trackside(3.0, 5.0, 400.0),
            R_RX,
        )
        .unwrap();
        let gantry =
            link_geometry(&train, 0, 0.0, &StationPlacement::gantry(3.0, 400.0), R_RX).unwrap();
        assert_relative_eq!(track.slant_m, 500.033_998_844_078_6, max_relative = 1e-14);
        assert_relative_eq!(gantry.slant_m, 500.008_999_919_001_44, max_relative = 1e-14);
        assert!(track.slant_m > gantry.slant_m);
    }

    #[test]
    fn axial_range_inverse() {
        let g = LinkGeometry::at_axial_range(224.0, 5.0, R_RX).unwrap();
        assert_relative_eq!(g.axial_m, 224.0, max_relative = 1e-13);
        assert!(LinkGeometry::at_axial_range(3.0, 5.0, R_RX).is_err());
    }

    #[test]
    fn nearest_station_ties_go_low() {
        let p = StationPlacement::gantry(5.0, 400.0);
        assert_eq!(p.nearest_station(200.0), (0, 0.0));
        assert_eq!(p.nearest_station(200.1), (1, 400.0));
        assert_eq!(p.nearest_station(-200.0), (-1, -400.0));
        assert_eq!(p.nearest_station(-199.9), (0, 0.0));
    }

    #[test]
    fn placement_validation() {
        assert!(StationPlacement::gantry(5.0, 400.0).validate().is_ok());
        assert!(StationPlacement::gantry(0.0, 400.0).validate().is_err());
        let mut p = StationPlacement::gantry(5.0, 400.0);
        p.lateral_offset_m = 1.0;
        assert!(p.validate().is_err());
        assert!(StationPlacement::trackside(3.0, 5.0, 0.0)
            .validate()
            .is_err());
    }

    #[test]
    fn offsets_must_increase() {
        assert!(validate_offsets(&[]).is_err());
        assert!(validate_offsets(&[0.0, 0.0]).is_err());
        assert!(validate_offsets(&[-10.0, 0.0, 10.0]).is_ok());
    }
}
