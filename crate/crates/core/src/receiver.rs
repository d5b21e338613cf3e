//! APD direct-detection receiver: noise variances, SNR and OOK-NRZ BER, plus
//! the inverse problem of finding the power that meets a BER target.
//!
//! The signal term of the SNR uses the primary (un-multiplied) photocurrent
//! `S·P`, while the shot-noise term uses the multiplied current `M·S·P`.
//! This pairing reproduces the -21.94 dBm / 15.56 dB operating point of the
//! reference receiver; squaring the multiplied current instead moves that
//! point by about 20 dB.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::roots::bisect;

pub const ELECTRON_CHARGE_C: f64 = 1.602e-19;
pub const BOLTZMANN_J_PER_K: f64 = 1.38e-23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverParams {
    /// Photodiode responsivity in A/W.
    pub sensitivity_a_per_w: f64,
    pub apd_gain: f64,
    pub excess_noise_factor: f64,
    pub bandwidth_hz: f64,
    pub load_resistance_ohm: f64,
    pub temperature_k: f64,
    pub electron_charge_c: f64,
    pub boltzmann_j_per_k: f64,
}

impl ReceiverParams {
    pub fn table1() -> Self {
        Self {
            sensitivity_a_per_w: 0.9,
            apd_gain: 10.0,
            excess_noise_factor: 3.2,
            bandwidth_hz: 1e9,
            load_resistance_ohm: 50.0,
            temperature_k: 298.0,
            electron_charge_c: ELECTRON_CHARGE_C,
            boltzmann_j_per_k: BOLTZMANN_J_PER_K,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("receiver.sensitivity_a_per_w", self.sensitivity_a_per_w),
            ("receiver.bandwidth_hz", self.bandwidth_hz),
            ("receiver.load_resistance_ohm", self.load_resistance_ohm),
            ("receiver.temperature_k", self.temperature_k),
            ("receiver.electron_charge_c", self.electron_charge_c),
            ("receiver.boltzmann_j_per_k", self.boltzmann_j_per_k),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.apd_gain >= 1.0) {
            return Err(config(format!(
                "receiver.apd_gain must be >= 1, got {}",
                self.apd_gain
            )));
        }
        if !(self.excess_noise_factor >= 1.0) {
            return Err(config(format!(
                "receiver.excess_noise_factor must be >= 1, got {}",
                self.excess_noise_factor
            )));
        }
        Ok(())
    }
}

/// Noise variances in A². Dark-current and background terms are carried for
/// completeness and are always zero in this receiver model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub shot_variance_a2: f64,
    pub thermal_variance_a2: f64,
    pub dark_variance_a2: f64,
    pub background_variance_a2: f64,
    pub total_variance_a2: f64,
}

impl NoiseBudget {
    pub fn new(params: &ReceiverParams, received_power_w: f64) -> Self {
        let shot = shot_noise_variance(params, received_power_w);
        let thermal = thermal_noise_variance(params);
        Self {
            shot_variance_a2: shot,
            thermal_variance_a2: thermal,
            dark_variance_a2: 0.0,
            background_variance_a2: 0.0,
            total_variance_a2: shot + thermal,
        }
    }
}

/// `2 q M i_M F(M) Δf` with `i_M = M S P`.
pub fn shot_noise_variance(params: &ReceiverParams, received_power_w: f64) -> f64 {
    let primary = params.sensitivity_a_per_w * received_power_w;
    let multiplied = params.apd_gain * primary;
    2.0 * params.electron_charge_c
        * params.apd_gain
        * multiplied
        * params.excess_noise_factor
        * params.bandwidth_hz
}

/// Johnson noise of the load resistor, `4 k T Δf / R`.
pub fn thermal_noise_variance(params: &ReceiverParams) -> f64 {
    4.0 * params.boltzmann_j_per_k * params.temperature_k * params.bandwidth_hz
        / params.load_resistance_ohm
}

/// Electrical SNR (linear) for an optical power in watts.
pub fn snr(params: &ReceiverParams, received_power_w: f64) -> f64 {
    let signal = params.sensitivity_a_per_w * received_power_w;
    signal * signal / NoiseBudget::new(params, received_power_w).total_variance_a2
}

/// Power at which shot and thermal variances are equal.
pub fn shot_thermal_crossover_power(params: &ReceiverParams) -> f64 {
    thermal_noise_variance(params) / shot_noise_variance(params, 1.0)
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SERIES_LIMIT: f64 = 3.0;
const CF_TERMS: u32 = 120;

/// Mills ratio `Q(x)/φ(x)` by backward evaluation of the Laplace continued
/// fraction. Accurate to a few ulps for `x >= 3`.
fn mills_ratio_cf(x: f64) -> f64 {
    let mut t = x;
    for n in (1..=CF_TERMS).rev() {
        t = x + f64::from(n) / t;
    }
    1.0 / t
}

/// `erf(z)·exp(z²)·√π/2` from the all-positive series
/// `Σ 2ⁿ z^{2n+1} / (1·3·…·(2n+1))`.
fn erf_scaled_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0u32;
    while term > sum * 1e-18 {
        n += 1;
        term *= 2.0 * z2 / f64::from(2 * n + 1);
        sum += term;
    }
    sum
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 1.0 - q_function(-x);
    }
    if x < SERIES_LIMIT {
        let z = x * std::f64::consts::FRAC_1_SQRT_2;
        let erf = 2.0 / PI.sqrt() * (-z * z).exp() * erf_scaled_series(z);
        0.5 - 0.5 * erf
    } else if x.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * x * x).exp() * mills_ratio_cf(x)
    }
}

/// `Q(x)·exp(x²/2)`, which stays representable where `Q` itself underflows
/// (beyond x ≈ 37.5).
pub fn q_function_scaled(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        q_function(x) * (0.5 * x * x).exp()
    } else {
        INV_SQRT_2PI * mills_ratio_cf(x)
    }
}

/// BER of OOK-NRZ under Gaussian noise, `Q(√SNR)`.
pub fn ber_ook_nrz(snr_linear: f64) -> f64 {
    q_function(snr_linear.max(0.0).sqrt())
}

/// Lower and upper edge of the power bracket searched by
/// [`required_power_for_ber`], in watts.
pub const POWER_BRACKET_W: (f64, f64) = (1e-15, 1.0);

/// Smallest optical power (watts) whose BER does not exceed `ber_target`.
///
/// BER is strictly decreasing in power, so the answer is unique; the search
/// bisects on `log10 P`.
pub fn required_power_for_ber(params: &ReceiverParams, ber_target: f64) -> Result<f64> {
    if !(ber_target > 0.0 && ber_target < 0.5) {
        return Err(domain(format!(
            "BER target must lie in (0, 0.5), got {ber_target}"
        )));
    }
    let ber_at = |log_p: f64| ber_ook_nrz(snr(params, 10f64.powf(log_p)));
    // f >= 0 where the target is met
    let f = |log_p: f64| ber_target - ber_at(log_p);
    let (lo, hi) = (POWER_BRACKET_W.0.log10(), POWER_BRACKET_W.1.log10());
    let bracket = bisect(f, hi, lo, 1e-15).map_err(|_| {
        Error::NoBracket(format!(
            "BER target {ber_target:e} not bracketed within [{:e}, {:e}] W",
            POWER_BRACKET_W.0, POWER_BRACKET_W.1
        ))
    })?;
    Ok(10f64.powf(bracket.feasible))
}
