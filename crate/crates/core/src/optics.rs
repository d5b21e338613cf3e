//! Clear-air received power from the Friis link budget with a Gaussian-beam
//! transmitter gain, aperture receiver gain, conical geometric loss and
//! pointing losses.
//!
//! Divergence angles here are full cone angles. The adaptive half-angle from
//! [`crate::geometry`] is doubled before it reaches these functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalParams {
    pub wavelength_m: f64,
    pub tx_power_w: f64,
    pub tx_aperture_area_m2: f64,
    pub rx_aperture_area_m2: f64,
    /// Combined transmit/receive optics efficiency and residual pointing loss.
    pub system_loss: f64,
    pub tx_pointing_error_rad: f64,
    pub rx_pointing_error_rad: f64,
}

impl OpticalParams {
    /// 1550 nm, 10 mW, 9 cm² transmitter, 95 cm² receiver, system loss 0.5.
    pub fn table1() -> Self {
        Self {
            wavelength_m: 1550e-9,
            tx_power_w: 10e-3,
            tx_aperture_area_m2: 9e-4,
            rx_aperture_area_m2: 95e-4,
            system_loss: 0.5,
            tx_pointing_error_rad: 0.0,
            rx_pointing_error_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("optical.wavelength", self.wavelength_m),
            ("optical.tx_power", self.tx_power_w),
            ("optical.tx_aperture_area", self.tx_aperture_area_m2),
            ("optical.rx_aperture_area", self.rx_aperture_area_m2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.system_loss > 0.0 && self.system_loss <= 1.0) {
            return Err(config(format!(
                "optical.system_loss must lie in (0, 1], got {}",
                self.system_loss
            )));
        }
        if !(self.tx_pointing_error_rad >= 0.0) || !(self.rx_pointing_error_rad >= 0.0) {
            return Err(config("optical pointing errors must be >= 0"));
        }
        Ok(())
    }

    pub fn tx_diameter_m(&self) -> f64 {
        aperture_diameter(self.tx_aperture_area_m2)
    }

    pub fn rx_diameter_m(&self) -> f64 {
        aperture_diameter(self.rx_aperture_area_m2)
    }

    pub fn rx_radius_m(&self) -> f64 {
        0.5 * self.rx_diameter_m()
    }

    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_m * 1e6
    }
}

/// Diameter of a circular aperture with the given area.
pub fn aperture_diameter(area_m2: f64) -> f64 {
    2.0 * (area_m2 / PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamOrigin {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub full_divergence_rad: f64,
    pub origin: BeamOrigin,
}

impl BeamSpec {
    pub fn new(full_divergence_rad: f64, origin: BeamOrigin) -> Result<Self> {
        if !(full_divergence_rad > 0.0 && full_divergence_rad < PI) {
            return Err(domain(format!(
                "full divergence must lie in (0, pi), got {full_divergence_rad}"
            )));
        }
        Ok(Self {
            full_divergence_rad,
            origin,
        })
    }

    pub fn fixed(full_divergence_rad: f64) -> Result<Self> {
        Self::new(full_divergence_rad, BeamOrigin::Fixed)
    }

    pub fn adaptive(full_divergence_rad: f64) -> Result<Self> {
        Self::new(full_divergence_rad, BeamOrigin::Adaptive)
    }
}

/// Gaussian-beam transmitter gain `32 / θ²`.
pub fn tx_gain(full_divergence_rad: f64) -> Result<f64> {
    if !(full_divergence_rad > 0.0) {
        return Err(domain(format!(
            "divergence must be > 0, got {full_divergence_rad}"
        )));
    }
    Ok(32.0 / (full_divergence_rad * full_divergence_rad))
}

/// Receiver aperture gain `(π D / λ)²`.
pub fn rx_gain(rx_aperture_diameter_m: f64, wavelength_m: f64) -> Result<f64> {
    if !(rx_aperture_diameter_m > 0.0) || !(wavelength_m > 0.0) {
        return Err(domain("aperture diameter and wavelength must be > 0"));
    }
    Ok((PI * rx_aperture_diameter_m / wavelength_m).powi(2))
}

/// `(D_rx / (D_tx + θR))²` without the physical clamp. Exceeds one when the
/// footprint is narrower than the receiver aperture.
pub fn geometric_loss_unclamped(
    rx_diameter_m: f64,
    tx_diameter_m: f64,
    full_divergence_rad: f64,
    range_m: f64,
) -> f64 {
    (rx_diameter_m / (tx_diameter_m + full_divergence_rad * range_m)).powi(2)
}

/// Fraction of the beam footprint collected by the receiver, clamped to 1.
pub fn geometric_loss(
    rx_diameter_m: f64,
    tx_diameter_m: f64,
    full_divergence_rad: f64,
    range_m: f64,
) -> Result<f64> {
    if !(rx_diameter_m > 0.0 && tx_diameter_m > 0.0 && full_divergence_rad > 0.0 && range_m > 0.0) {
        return Err(domain("geometric loss inputs must all be > 0"));
    }
    Ok(
        geometric_loss_unclamped(rx_diameter_m, tx_diameter_m, full_divergence_rad, range_m)
            .min(1.0),
    )
}

/// Range at which the fixed-beam footprint `D_tx + θR` equals the receiver
/// aperture, i.e. where the unclamped geometric loss crosses one.
pub fn footprint_crossover_range(
    rx_diameter_m: f64,
    tx_diameter_m: f64,
    full_divergence_rad: f64,
) -> f64 {
    (rx_diameter_m - tx_diameter_m) / full_divergence_rad
}

/// Transmitter and receiver pointing losses `(exp(-G_tx γ²), exp(-G_rx ζ²))`.
pub fn pointing_losses(gain_tx: f64, gain_rx: f64, gamma_rad: f64, zeta_rad: f64) -> (f64, f64) {
    (
        (-gain_tx * gamma_rad * gamma_rad).exp(),
        (-gain_rx * zeta_rad * zeta_rad).exp(),
    )
}

/// Clear-air received power in watts at axial distance `range_m`.
pub fn received_power_clear(params: &OpticalParams, beam: &BeamSpec, range_m: f64) -> Result<f64> {
    if !(range_m > 0.0) {
        return Err(domain(format!("range must be > 0, got {range_m}")));
    }
    let g_tx = tx_gain(beam.full_divergence_rad)?;
    let d_rx = params.rx_diameter_m();
    let g_rx = rx_gain(d_rx, params.wavelength_m)?;
    let free_space = (params.wavelength_m / (4.0 * PI * range_m)).powi(2);
    let l_geo = geometric_loss(
        d_rx,
        params.tx_diameter_m(),
        beam.full_divergence_rad,
        range_m,
    )?;
    let (l_tx, l_rx) = pointing_losses(
        g_tx,
        g_rx,
        params.tx_pointing_error_rad,
        params.rx_pointing_error_rad,
    );
    Ok(params.tx_power_w * g_tx * g_rx * free_space * l_geo * l_tx * l_rx * params.system_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::watts_to_dbm;
    use approx::assert_relative_eq;

    #[test]
    fn tx_gain_examples() {
        assert_relative_eq!(tx_gain(1e-3).unwrap(), 3.2e7, max_relative = 1e-14);
        assert_relative_eq!(tx_gain(32f64.sqrt()).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            tx_gain(2.1998e-4).unwrap(),
            6.612_772_515_558_429e8,
            max_relative = 1e-12
        );
        assert!(tx_gain(0.0).is_err());
    }

    #[test]
    fn rx_gain_examples() {
        let lambda = 1.55e-6;
        assert_relative_eq!(
            rx_gain(lambda / PI, lambda).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            rx_gain(0.10999, lambda).unwrap(),
            4.969_843_958_812_041_5e10,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rx_gain(0.03385, lambda).unwrap(),
            4.708e9,
            max_relative = 1e-3
        );
    }

    #[test]
    fn geometric_loss_examples() {
        assert_relative_eq!(
            geometric_loss(0.3, 0.1, 2e-3, 100.0).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            geometric_loss(0.10999, 0.03385, 1e-3, 500.0).unwrap(),
            0.042_449_043_617_121_79,
            max_relative = 1e-12
        );
        // unclamped value crosses one at (D_rx - D_tx)/θ = 76.14 m
        assert_eq!(geometric_loss(0.10999, 0.03385, 1e-3, 76.0).unwrap(), 1.0);
        assert!(geometric_loss_unclamped(0.10999, 0.03385, 1e-3, 76.0) > 1.0);
        assert!(geometric_loss_unclamped(0.10999, 0.03385, 1e-3, 76.2) < 1.0);
        assert_relative_eq!(
            footprint_crossover_range(0.10999, 0.03385, 1e-3),
            76.14,
            max_relative = 1e-12
        );
    }

    #[test]
    fn pointing_loss_examples() {
        assert_eq!(pointing_losses(3.2e7, 4.97e10, 0.0, 0.0), (1.0, 1.0));
        let (ltx, lrx) = pointing_losses(3.2e7, 4.97e10, 1e-5, 0.0);
        assert_relative_eq!(ltx, 0.996_805_114_543_032_9, max_relative = 1e-12);
        assert_eq!(lrx, 1.0);
        let gamma = 2e-4;
        let (ltx, _) = pointing_losses(1.0 / (gamma * gamma), 1.0, gamma, 0.0);
        assert_relative_eq!(ltx, (-1f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn factor_isolation() {
        // dividing out every gain and loss leaves P_tx (λ/4πR)²
        let mut params = OpticalParams::table1();
        params.system_loss = 1.0;
        let theta = 1e-3;
        let range = 60.0; // inside the clamped region, L_geo = 1
        let p = received_power_clear(&params, &BeamSpec::fixed(theta).unwrap(), range).unwrap();
        let gains =
            tx_gain(theta).unwrap() * rx_gain(params.rx_diameter_m(), params.wavelength_m).unwrap();
        let expected = params.tx_power_w * (params.wavelength_m / (4.0 * PI * range)).powi(2);
        assert_relative_eq!(p / gains, expected, max_relative = 1e-12);
    }

    #[test]
    fn table1_fixed_beam_at_500m() {
        // factor-by-factor: 10 mW · 3.2e7 · G_rx · (λ/4πR)² · L_geo · 0.5
        let p = received_power_clear(
            &OpticalParams::table1(),
            &BeamSpec::fixed(1e-3).unwrap(),
            500.0,
        )
        .unwrap();
        assert_relative_eq!(p, 2.053_462_176_709_274_8e-5, max_relative = 1e-10);
        assert_relative_eq!(watts_to_dbm(p), -16.875_132_921_274_606, epsilon = 1e-9);
    }

    #[test]
    fn adaptive_beats_fixed_at_same_range() {
        let params = OpticalParams::table1();
        let slant: f64 = 500.025;
        let theta = 2.0 * (params.rx_radius_m() / slant).asin();
        let range = (theta / 2.0).cos() * slant;
        let fixed = received_power_clear(&params, &BeamSpec::fixed(1e-3).unwrap(), range).unwrap();
        let adaptive =
            received_power_clear(&params, &BeamSpec::adaptive(theta).unwrap(), range).unwrap();
        assert!(adaptive > fixed);
    }

    #[test]
    fn table1_apertures() {
        let p = OpticalParams::table1();
        assert_relative_eq!(
            p.rx_diameter_m(),
            0.109_980_796_846_467_92,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            p.tx_diameter_m(),
            0.033_851_375_012_865_38,
            max_relative = 1e-14
        );
        assert!(p.validate().is_ok());
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = OpticalParams::table1();
        p.system_loss = 1.5;
        assert!(p.validate().is_err());
        let mut p = OpticalParams::table1();
        p.tx_pointing_error_rad = -1.0;
        assert!(p.validate().is_err());
        assert!(BeamSpec::fixed(PI).is_err());
        assert!(received_power_clear(
            &OpticalParams::table1(),
            &BeamSpec::fixed(1e-3).unwrap(),
            0.0
        )
        .is_err());
    }
}
