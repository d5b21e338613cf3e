//! Visibility-driven fog attenuation using the Kim model above 1 km and the
//! Ijaz model for dense fog below it.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::units::watts_to_dbm;

/// Reference wavelength of the visibility definition, in micrometres.
pub const REFERENCE_WAVELENGTH_UM: f64 = 0.55;

/// Visibility at or below which the size-distribution exponent is zero.
pub const DENSE_FOG_LIMIT_KM: f64 = 0.015;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub visibility_km: f64,
    pub wavelength_um: f64,
}

impl ChannelState {
    pub fn new(visibility_km: f64, wavelength_um: f64) -> Result<Self> {
        if !(visibility_km > 0.0) {
            return Err(domain(format!(
                "visibility must be > 0 km, got {visibility_km}"
            )));
        }
        if !(wavelength_um > 0.0) {
            return Err(domain(format!(
                "wavelength must be > 0 um, got {wavelength_um}"
            )));
        }
        Ok(Self {
            visibility_km,
            wavelength_um,
        })
    }
}

/// Which branch of the size-distribution exponent applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FogRegime {
    /// V >= 50 km
    Clear,
    /// 6 <= V < 50 km
    Haze,
    /// 1 <= V < 6 km
    Mist,
    /// 0.015 < V < 1 km, wavelength dependent
    Fog,
    /// V <= 0.015 km, q = 0
    DenseFog,
}

impl FogRegime {
    pub fn of(visibility_km: f64) -> Self {
        if visibility_km >= 50.0 {
            FogRegime::Clear
        } else if visibility_km >= 6.0 {
            FogRegime::Haze
        } else if visibility_km >= 1.0 {
            FogRegime::Mist
        } else if visibility_km > DENSE_FOG_LIMIT_KM {
            FogRegime::Fog
        } else {
            FogRegime::DenseFog
        }
    }
}

/// Particle size-distribution exponent `q`.
pub fn q_exponent(visibility_km: f64, wavelength_um: f64) -> f64 {
    match FogRegime::of(visibility_km) {
        FogRegime::Clear => 1.6,
        FogRegime::Haze => 1.3,
        FogRegime::Mist => 0.16 * visibility_km + 0.34,
        FogRegime::Fog => 0.1428 * wavelength_um - 0.0947,
        FogRegime::DenseFog => 0.0,
    }
}

/// Specific fog attenuation in dB/km, `(17/V) (λ/0.55 µm)^-q`.
pub fn fog_attenuation_db_per_km(state: &ChannelState) -> Result<f64> {
    if !(state.visibility_km > 0.0) {
        return Err(domain(format!(
            "visibility must be > 0 km, got {}",
            state.visibility_km
        )));
    }
    let q = q_exponent(state.visibility_km, state.wavelength_um);
    Ok(17.0 / state.visibility_km * (state.wavelength_um / REFERENCE_WAVELENGTH_UM).powf(-q))
}

/// Received power in dBm after fog, with the specific attenuation scaled by
/// the path length in km.
pub fn received_power_fog_dbm(
    clear_power_w: f64,
    state: &ChannelState,
    range_m: f64,
) -> Result<f64> {
    if !(clear_power_w > 0.0) {
        return Err(domain(format!(
            "clear-air power must be > 0, got {clear_power_w}"
        )));
    }
    if !(range_m > 0.0) {
        return Err(domain(format!("range must be > 0, got {range_m}")));
    }
    let loss_db = fog_attenuation_db_per_km(state)? * range_m / 1000.0;
    Ok(watts_to_dbm(clear_power_w) - loss_db)
}
