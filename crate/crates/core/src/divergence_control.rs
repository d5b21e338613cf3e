//! Beam-divergence controllers: fixed, ideal adaptive, motorized expander with
//! actuation delay, and a 1xN switch over a discrete bank of expanders.
//!
//! Delayed modes run a command pipeline. A command issued at `t` (computed
//! from the geometry reported at `t`) becomes active at
//! `t + control_latency_s (+ adjust_delay_s for the motorized expander)`.
//! When several queued commands have matured by the current step the latest
//! one wins and the older ones are dropped.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::geometry::LinkGeometry;

/// Slack for comparing activation times built from `i * dt` sums.
const TIME_EPS_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ControllerMode {
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "adaptive")]
    AdaptiveIdeal,
    #[serde(rename = "motorized")]
    AdaptiveMotorized,
    #[serde(rename = "switched")]
    AdaptiveSwitched,
}

impl ControllerMode {
    pub const ALL: [ControllerMode; 4] = [
        ControllerMode::Fixed,
        ControllerMode::AdaptiveIdeal,
        ControllerMode::AdaptiveMotorized,
        ControllerMode::AdaptiveSwitched,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerMode::Fixed => "fixed",
            ControllerMode::AdaptiveIdeal => "adaptive",
            ControllerMode::AdaptiveMotorized => "motorized",
            ControllerMode::AdaptiveSwitched => "switched",
        }
    }
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(ControllerMode::Fixed),
            "adaptive" | "ideal" | "adaptive-ideal" => Ok(ControllerMode::AdaptiveIdeal),
            "motorized" | "adaptive-motorized" => Ok(ControllerMode::AdaptiveMotorized),
            "switched" | "adaptive-switched" => Ok(ControllerMode::AdaptiveSwitched),
            other => Err(config(format!(
                "unknown controller mode '{other}' (expected fixed, adaptive, motorized or switched)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub mode: ControllerMode,
    pub fixed_full_divergence_rad: f64,
    /// Expansion change time of the motorized expander.
    pub adjust_delay_s: f64,
    /// Transmission plus propagation delay of the position report.
    pub control_latency_s: f64,
    /// Full divergence angles available through the switch, ascending.
    pub switch_angles_rad: Vec<f64>,
}

impl ControllerConfig {
    pub const DEFAULT_FIXED_DIVERGENCE_RAD: f64 = 1e-3;
    pub const DEFAULT_ADJUST_DELAY_S: f64 = 5.0;
    pub const DEFAULT_SWITCH_BANK_SIZE: usize = 16;
    /// Slant distance whose ideal divergence is the narrowest default switch angle.
    pub const DEFAULT_SWITCH_FAR_SLANT_M: f64 = 2000.0;

    pub fn new(mode: ControllerMode, receiver_aperture_radius_m: f64) -> Self {
        Self {
            mode,
            fixed_full_divergence_rad: Self::DEFAULT_FIXED_DIVERGENCE_RAD,
            adjust_delay_s: Self::DEFAULT_ADJUST_DELAY_S,
            control_latency_s: 0.0,
            switch_angles_rad: default_switch_bank(receiver_aperture_radius_m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_full_divergence_rad > 0.0
            && self.fixed_full_divergence_rad < std::f64::consts::PI)
        {
            return Err(config(
                "controller.fixed_divergence must lie in (0, pi) rad",
            ));
        }
        if !(self.adjust_delay_s >= 0.0) {
            return Err(config("controller.adjust_delay_s must be >= 0"));
        }
        if !(self.control_latency_s >= 0.0) {
            return Err(config("controller.control_latency_s must be >= 0"));
        }
        if self.mode == ControllerMode::AdaptiveSwitched {
            if self.switch_angles_rad.is_empty() {
                return Err(config(
                    "controller.switch_angles must be non-empty for switched mode",
                ));
            }
            if self.switch_angles_rad.iter().any(|a| !(*a > 0.0)) {
                return Err(config("controller.switch_angles must be > 0"));
            }
            if self.switch_angles_rad.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config(
                    "controller.switch_angles must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    /// Delay between issuing a command and the beam taking that divergence.
    pub fn actuation_delay_s(&self) -> f64 {
        match self.mode {
            ControllerMode::Fixed | ControllerMode::AdaptiveIdeal => 0.0,
            ControllerMode::AdaptiveMotorized => self.control_latency_s + self.adjust_delay_s,
            ControllerMode::AdaptiveSwitched => self.control_latency_s,
        }
    }

    /// Divergence the controller settles on for a stationary geometry.
    pub fn steady_divergence(&self, geom: &LinkGeometry) -> Result<f64> {
        match self.mode {
            ControllerMode::Fixed => Ok(self.fixed_full_divergence_rad),
            ControllerMode::AdaptiveIdeal | ControllerMode::AdaptiveMotorized => {
                Ok(ideal_divergence(geom))
            }
            ControllerMode::AdaptiveSwitched => {
                quantize_up(&self.switch_angles_rad, ideal_divergence(geom))
            }
        }
    }
}

/// 16 log-spaced full angles from the ideal divergence at 2 km slant up to 1 mrad.
pub fn default_switch_bank(receiver_aperture_radius_m: f64) -> Vec<f64> {
    let n = ControllerConfig::DEFAULT_SWITCH_BANK_SIZE;
    let narrow =
        2.0 * (receiver_aperture_radius_m / ControllerConfig::DEFAULT_SWITCH_FAR_SLANT_M).asin();
    let wide = ControllerConfig::DEFAULT_FIXED_DIVERGENCE_RAD;
    let (ln_a, ln_b) = (narrow.ln(), wide.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                wide
            } else {
                (ln_a + (ln_b - ln_a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Full divergence that makes the footprint match the receiver aperture.
pub fn ideal_divergence(geom: &LinkGeometry) -> f64 {
    2.0 * geom.half_angle_rad
}

/// Smallest bank angle not below `ideal_rad`.
pub fn quantize_up(angles: &[f64], ideal_rad: f64) -> Result<f64> {
    let idx = angles.partition_point(|a| *a < ideal_rad);
    angles
        .get(idx)
        .copied()
        .ok_or_else(|| Error::SwitchBankExhausted {
            ideal_rad,
            largest_rad: angles.last().copied().unwrap_or(0.0),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingCommand {
    pub divergence_rad: f64,
    pub activation_time_s: f64,
}

/// Per-link controller state. One instance per serving (transceiver, station)
/// pair; stepping must be sequential in simulation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub last_update_time_s: f64,
    pub commanded_divergence_rad: f64,
    pub active_divergence_rad: f64,
    pub pending: VecDeque<PendingCommand>,
}

impl ControllerState {
    /// State at link acquisition. Adaptive beams start aligned to the
    /// acquisition geometry; the fixed beam starts at its fixed angle.
    pub fn new(config: &ControllerConfig, start_time_s: f64, geom: &LinkGeometry) -> Result<Self> {
        let initial = config.steady_divergence(geom)?;
        Ok(Self {
            last_update_time_s: start_time_s,
            commanded_divergence_rad: initial,
            active_divergence_rad: initial,
            pending: VecDeque::new(),
        })
    }

    /// Advances to `now_s` with the geometry reported at `now_s` and returns
    /// the divergence in effect for this instant.
    pub fn step(
        &mut self,
        config: &ControllerConfig,
        now_s: f64,
        geom: &LinkGeometry,
    ) -> Result<f64> {
        if now_s < self.last_update_time_s {
            return Err(domain(format!(
                "controller stepped backwards: {now_s} s < {} s",
                self.last_update_time_s
            )));
        }
        self.last_update_time_s = now_s;

        match config.mode {
            ControllerMode::Fixed => {
                self.commanded_divergence_rad = config.fixed_full_divergence_rad;
                self.active_divergence_rad = config.fixed_full_divergence_rad;
                self.pending.clear();
            }
            ControllerMode::AdaptiveIdeal => {
                let target = ideal_divergence(geom);
                self.commanded_divergence_rad = target;
                self.active_divergence_rad = target;
                self.pending.clear();
            }
            ControllerMode::AdaptiveMotorized | ControllerMode::AdaptiveSwitched => {
                let target = config.steady_divergence(geom)?;
                self.commanded_divergence_rad = target;
                self.pending.push_back(PendingCommand {
                    divergence_rad: target,
                    activation_time_s: now_s + config.actuation_delay_s(),
                });
                while let Some(cmd) = self.pending.front() {
                    if cmd.activation_time_s > now_s + TIME_EPS_S {
                        break;
                    }
                    self.active_divergence_rad = cmd.divergence_rad;
                    self.pending.pop_front();
                }
            }
        }
        Ok(self.active_divergence_rad)
    }
}
