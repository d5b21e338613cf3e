//! Scenario configuration files.
//!
//! Configurations are TOML documents with one table per subsystem. Every
//! physical quantity carries its unit in the key name; where several units
//! are accepted (`tx_power_mw` / `tx_power_dbm` / `tx_power_w`) at most one
//! may be given. Absent keys take the reference-profile value, so a file only
//! needs the keys it changes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::atmosphere::DENSE_FOG_LIMIT_KM;
use crate::divergence_control::{default_switch_bank, ControllerMode};
use crate::error::{config, Error, Result};
use crate::geometry::{PlacementMode, StationPlacement};
use crate::scenario::ScenarioConfig;
use crate::units::{cm2_to_m2, dbm_to_watts, kmh_to_mps, mw_to_watts};

pub const PRESET_NAMES: [&str; 7] = ["table1", "fig2", "fig5", "fig7", "fig8", "fig9", "fig10"];

/// Bundled preset text by name.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "table1" => Some(include_str!("../presets/table1.toml")),
        "fig2" => Some(include_str!("../presets/fig2.toml")),
        "fig5" => Some(include_str!("../presets/fig5.toml")),
        "fig7" => Some(include_str!("../presets/fig7.toml")),
        "fig8" => Some(include_str!("../presets/fig8.toml")),
        "fig9" => Some(include_str!("../presets/fig9.toml")),
        "fig10" => Some(include_str!("../presets/fig10.toml")),
        _ => None,
    }
}

/// A grid of values: an explicit list or an inclusive `start..=stop` span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Span { start: f64, stop: f64, step: f64 },
}

impl Grid {
    /// Parses `start:stop:step` or a comma-separated list.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| config(format!("invalid number '{s}' in grid '{text}'")))
        };
        if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 3 {
                return Err(config(format!(
                    "grid span '{text}' must be start:stop:step"
                )));
            }
            Ok(Grid::Span {
                start: num(parts[0])?,
                stop: num(parts[1])?,
                step: num(parts[2])?,
            })
        } else {
            Ok(Grid::List(text.split(',').map(num).collect::<Result<_>>()?))
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match self {
            Grid::List(v) => v.clone(),
            Grid::Span { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(config(format!(
                        "grid span {start}:{stop}:{step} needs step > 0 and stop >= start"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| tidy(start + i as f64 * step)).collect()
            }
        };
        if values.is_empty() {
            return Err(config("grid must contain at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(config("grid values must be finite"));
        }
        Ok(values)
    }
}

/// Rounds to 12 significant digits so decimal spans land on their decimal values.
fn tidy(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<PlacementMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertical_offset_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lateral_offset_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub station_spacing_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_power_mw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_aperture_area_cm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_aperture_area_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_aperture_area_cm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_aperture_area_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_pointing_error_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_pointing_error_urad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_pointing_error_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_pointing_error_urad: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity_a_per_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apd_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_noise_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_resistance_ohm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electron_charge_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boltzmann_j_per_k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ControllerMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_divergence_mrad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_divergence_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjust_delay_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_latency_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_angles_mrad: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_angles_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility_km: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_kmh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_position_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transceiver_offsets_m: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_step_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ber_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_min_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_max_m: Option<f64>,
}

/// Grids pinned by presets; command-line flags override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranges_m: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibilities_km: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ControllerMode>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelengths_nm: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelengths_m: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub longitudinal_m: Option<Grid>,
    /// Placement compared against the main one by the placement analysis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_placement: Option<PlacementSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub placement: PlacementSection,
    #[serde(default)]
    pub optical: OpticalSection,
    #[serde(default)]
    pub receiver: ReceiverSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

/// Analysis grids after expansion, with `None` where nothing was pinned.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisGrids {
    pub ranges_m: Option<Vec<f64>>,
    pub visibilities_km: Option<Vec<f64>>,
    pub modes: Option<Vec<ControllerMode>>,
    pub wavelengths_m: Option<Vec<f64>>,
    pub longitudinal_m: Option<Vec<f64>>,
    pub alt_placement: Option<StationPlacement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: ScenarioConfig,
    pub analysis: AnalysisGrids,
}

/// At most one of several unit variants; returns the value in base units.
/// Key name, value if given, conversion to base units.
type UnitVariant<'a> = (&'a str, Option<f64>, fn(f64) -> f64);

fn one_of(field: &str, variants: &[UnitVariant]) -> Result<Option<f64>> {
    let given: Vec<_> = variants.iter().filter(|(_, v, _)| v.is_some()).collect();
    match given.as_slice() {
        [] => Ok(None),
        [(_, Some(v), convert)] => Ok(Some(convert(*v))),
        _ => {
            let names: Vec<&str> = given.iter().map(|(n, _, _)| *n).collect();
            Err(config(format!(
                "{field}: give only one of {}",
                names.join(", ")
            )))
        }
    }
}

fn identity(x: f64) -> f64 {
    x
}

fn resolve_placement(section: &PlacementSection, base: StationPlacement) -> StationPlacement {
    let mode = section.mode.unwrap_or(base.mode);
    let lateral_default = if mode == PlacementMode::Gantry {
        0.0
    } else {
        base.lateral_offset_m
    };
    StationPlacement {
        mode,
        vertical_offset_m: section.vertical_offset_m.unwrap_or(base.vertical_offset_m),
        lateral_offset_m: section.lateral_offset_m.unwrap_or(lateral_default),
        station_spacing_m: section.station_spacing_m.unwrap_or(base.station_spacing_m),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut c = ScenarioConfig::table1();

        c.placement = resolve_placement(&self.placement, c.placement);

        let o = &self.optical;
        if let Some(w) = one_of(
            "optical.wavelength",
            &[
                ("wavelength_nm", o.wavelength_nm, |x| x / 1e9),
                ("wavelength_um", o.wavelength_um, |x| x / 1e6),
                ("wavelength_m", o.wavelength_m, identity),
            ],
        )? {
            c.optical.wavelength_m = w;
        }
        if let Some(p) = one_of(
            "optical.tx_power",
            &[
                ("tx_power_mw", o.tx_power_mw, mw_to_watts),
                ("tx_power_dbm", o.tx_power_dbm, dbm_to_watts),
                ("tx_power_w", o.tx_power_w, identity),
            ],
        )? {
            c.optical.tx_power_w = p;
        }
        if let Some(a) = one_of(
            "optical.tx_aperture_area",
            &[
                ("tx_aperture_area_cm2", o.tx_aperture_area_cm2, cm2_to_m2),
                ("tx_aperture_area_m2", o.tx_aperture_area_m2, identity),
            ],
        )? {
            c.optical.tx_aperture_area_m2 = a;
        }
        let rx_area = one_of(
            "optical.rx_aperture_area",
            &[
                ("rx_aperture_area_cm2", o.rx_aperture_area_cm2, cm2_to_m2),
                ("rx_aperture_area_m2", o.rx_aperture_area_m2, identity),
            ],
        )?;
        if let Some(a) = rx_area {
            c.optical.rx_aperture_area_m2 = a;
        }
        if let Some(l) = o.system_loss {
            c.optical.system_loss = l;
        }
        if let Some(e) = one_of(
            "optical.tx_pointing_error",
            &[
                ("tx_pointing_error_rad", o.tx_pointing_error_rad, identity),
                ("tx_pointing_error_urad", o.tx_pointing_error_urad, |x| {
                    x / 1e6
                }),
            ],
        )? {
            c.optical.tx_pointing_error_rad = e;
        }
        if let Some(e) = one_of(
            "optical.rx_pointing_error",
            &[
                ("rx_pointing_error_rad", o.rx_pointing_error_rad, identity),
                ("rx_pointing_error_urad", o.rx_pointing_error_urad, |x| {
                    x / 1e6
                }),
            ],
        )? {
            c.optical.rx_pointing_error_rad = e;
        }

        let r = &self.receiver;
        let rp = &mut c.receiver;
        macro_rules! take {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        take!(r.sensitivity_a_per_w, rp.sensitivity_a_per_w);
        take!(r.apd_gain, rp.apd_gain);
        take!(r.excess_noise_factor, rp.excess_noise_factor);
        take!(r.bandwidth_hz, rp.bandwidth_hz);
        take!(r.load_resistance_ohm, rp.load_resistance_ohm);
        take!(r.temperature_k, rp.temperature_k);
        take!(r.electron_charge_c, rp.electron_charge_c);
        take!(r.boltzmann_j_per_k, rp.boltzmann_j_per_k);

        let k = &self.controller;
        take!(k.mode, c.controller.mode);
        if let Some(d) = one_of(
            "controller.fixed_divergence",
            &[
                ("fixed_divergence_mrad", k.fixed_divergence_mrad, |x| {
                    x / 1e3
                }),
                ("fixed_divergence_rad", k.fixed_divergence_rad, identity),
            ],
        )? {
            c.controller.fixed_full_divergence_rad = d;
        }
        take!(k.adjust_delay_s, c.controller.adjust_delay_s);
        take!(k.control_latency_s, c.controller.control_latency_s);
        c.controller.switch_angles_rad = match (&k.switch_angles_mrad, &k.switch_angles_rad) {
            (Some(_), Some(_)) => return Err(config(
                "controller.switch_angles: give only one of switch_angles_mrad, switch_angles_rad",
            )),
            (Some(m), None) => m.iter().map(|x| x / 1e3).collect(),
            (None, Some(r)) => r.clone(),
            // the default bank follows the receiver aperture
            (None, None) => default_switch_bank(c.optical.rx_radius_m()),
        };

        take!(self.channel.visibility_km, c.visibility_km);

        let t = &self.train;
        if let Some(s) = one_of(
            "train.speed",
            &[
                ("speed_kmh", t.speed_kmh, kmh_to_mps),
                ("speed_mps", t.speed_mps, identity),
            ],
        )? {
            c.train_speed_mps = s;
        }
        take!(t.start_position_m, c.start_position_m);
        if let Some(offsets) = &t.transceiver_offsets_m {
            c.transceiver_offsets_m = offsets.clone();
        }

        take!(self.simulation.time_step_s, c.time_step_s);
        take!(self.simulation.duration_s, c.duration_s);

        let e = &self.evaluation;
        take!(e.ber_target, c.ber_target);
        take!(e.range_min_m, c.eval_range_m.0);
        take!(e.range_max_m, c.eval_range_m.1);

        c.validate()?;

        let a = &self.analysis;
        let grid = |g: &Option<Grid>| g.as_ref().map(Grid::values).transpose();
        let analysis = AnalysisGrids {
            ranges_m: grid(&a.ranges_m)?,
            visibilities_km: grid(&a.visibilities_km)?,
            modes: a.modes.clone(),
            wavelengths_m: match (&a.wavelengths_nm, &a.wavelengths_m) {
                (Some(_), Some(_)) => {
                    return Err(config(
                        "analysis.wavelengths: give only one of wavelengths_nm, wavelengths_m",
                    ))
                }
                (Some(nm), None) => Some(nm.values()?.into_iter().map(|x| x / 1e9).collect()),
                (None, m) => grid(m)?,
            },
            longitudinal_m: grid(&a.longitudinal_m)?,
            alt_placement: a
                .alt_placement
                .as_ref()
                .map(|p| resolve_placement(p, c.placement)),
        };
        if let Some(p) = &analysis.alt_placement {
            p.validate()?;
        }
        Ok(ResolvedConfig {
            scenario: c,
            analysis,
        })
    }

    /// Canonical file form of a resolved configuration, in base SI units.
    /// Parsing and resolving it yields the same configuration.
    pub fn from_resolved(resolved: &ResolvedConfig) -> Self {
        let c = &resolved.scenario;
        let a = &resolved.analysis;
        let placement = |p: &StationPlacement| PlacementSection {
            mode: Some(p.mode),
            vertical_offset_m: Some(p.vertical_offset_m),
            lateral_offset_m: Some(p.lateral_offset_m),
            station_spacing_m: Some(p.station_spacing_m),
        };
        ConfigFile {
            placement: placement(&c.placement),
            optical: OpticalSection {
                wavelength_m: Some(c.optical.wavelength_m),
                tx_power_w: Some(c.optical.tx_power_w),
                tx_aperture_area_m2: Some(c.optical.tx_aperture_area_m2),
                rx_aperture_area_m2: Some(c.optical.rx_aperture_area_m2),
                system_loss: Some(c.optical.system_loss),
                tx_pointing_error_rad: Some(c.optical.tx_pointing_error_rad),
                rx_pointing_error_rad: Some(c.optical.rx_pointing_error_rad),
                ..Default::default()
            },
            receiver: ReceiverSection {
                sensitivity_a_per_w: Some(c.receiver.sensitivity_a_per_w),
                apd_gain: Some(c.receiver.apd_gain),
                excess_noise_factor: Some(c.receiver.excess_noise_factor),
                bandwidth_hz: Some(c.receiver.bandwidth_hz),
                load_resistance_ohm: Some(c.receiver.load_resistance_ohm),
                temperature_k: Some(c.receiver.temperature_k),
                electron_charge_c: Some(c.receiver.electron_charge_c),
                boltzmann_j_per_k: Some(c.receiver.boltzmann_j_per_k),
            },
            controller: ControllerSection {
                mode: Some(c.controller.mode),
                fixed_divergence_rad: Some(c.controller.fixed_full_divergence_rad),
                adjust_delay_s: Some(c.controller.adjust_delay_s),
                control_latency_s: Some(c.controller.control_latency_s),
                switch_angles_rad: Some(c.controller.switch_angles_rad.clone()),
                ..Default::default()
            },
            channel: ChannelSection {
                visibility_km: Some(c.visibility_km),
            },
            train: TrainSection {
                speed_mps: Some(c.train_speed_mps),
                start_position_m: Some(c.start_position_m),
                transceiver_offsets_m: Some(c.transceiver_offsets_m.clone()),
                ..Default::default()
            },
            simulation: SimulationSection {
                time_step_s: Some(c.time_step_s),
                duration_s: Some(c.duration_s),
            },
            evaluation: EvaluationSection {
                ber_target: Some(c.ber_target),
                range_min_m: Some(c.eval_range_m.0),
                range_max_m: Some(c.eval_range_m.1),
            },
            analysis: AnalysisSection {
                ranges_m: a.ranges_m.clone().map(Grid::List),
                visibilities_km: a.visibilities_km.clone().map(Grid::List),
                modes: a.modes.clone(),
                wavelengths_nm: None,
                wavelengths_m: a.wavelengths_m.clone().map(Grid::List),
                longitudinal_m: a.longitudinal_m.clone().map(Grid::List),
                alt_placement: a.alt_placement.as_ref().map(placement),
            },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

impl ResolvedConfig {
    pub fn parse(text: &str) -> Result<Self> {
        ConfigFile::parse(text)?.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        let text = preset(name).ok_or_else(|| {
            config(format!(
                "unknown preset '{name}' (available: {})",
                PRESET_NAMES.join(", ")
            ))
        })?;
        Self::parse(text)
    }

    /// Canonical echo of the configuration, in base SI units.
    pub fn canonical(&self) -> ConfigFile {
        ConfigFile::from_resolved(self)
    }

    /// SHA-256 of the canonical JSON form; independent of key order and unit
    /// spelling in the source document.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&self.canonical()).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Conditions that are allowed but worth flagging to a user.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut vis = vec![self.scenario.visibility_km];
        if let Some(v) = &self.analysis.visibilities_km {
            vis.extend(v);
        }
        for v in vis {
            if v <= DENSE_FOG_LIMIT_KM {
                out.push(format!(
                    "visibility {v} km is at or below {DENSE_FOG_LIMIT_KM} km; fog attenuation is wavelength independent there"
                ));
            }
        }
        out
    }
}
