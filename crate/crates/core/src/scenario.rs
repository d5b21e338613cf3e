//! Train-pass simulation and the analysis suite built on the single-link
//! evaluation chain: distance/visibility sweeps, maximum-distance solving and
//! fixed-vs-adaptive and gantry-vs-trackside comparisons.
//!
//! Every link-budget evaluation uses the axial distance of the link geometry
//! as its range. Sweeps indexed by range construct the geometry whose axial
//! distance equals the grid value for the configured perpendicular offset.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atmosphere::{received_power_fog_dbm, ChannelState};
use crate::divergence_control::{ControllerConfig, ControllerMode, ControllerState};
use crate::error::{config, domain, Error, Result};
use crate::geometry::{
    link_geometry, validate_offsets, LinkGeometry, StationPlacement, TrainState,
};
use crate::optics::{received_power_clear, BeamOrigin, BeamSpec, OpticalParams};
use crate::receiver::{ber_ook_nrz, required_power_for_ber, snr, ReceiverParams};
use crate::roots::bisect;
use crate::units::{dbm_to_watts, kmh_to_mps, to_db, watts_to_dbm};

/// Visibility of the placement comparison (light haze).
pub const PLACEMENT_VISIBILITY_KM: f64 = 5.0;

/// Bisection tolerance of [`max_distance`], in metres.
pub const MAX_DISTANCE_TOL_M: f64 = 1e-3;

/// Points checked for monotonicity before [`max_distance`] bisects.
const MONOTONE_PROBES: usize = 257;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub placement: StationPlacement,
    pub optical: OpticalParams,
    pub receiver: ReceiverParams,
    pub controller: ControllerConfig,
    pub visibility_km: f64,
    pub train_speed_mps: f64,
    /// Train reference position at t = 0; station k sits at k * spacing.
    pub start_position_m: f64,
    pub time_step_s: f64,
    pub duration_s: f64,
    pub transceiver_offsets_m: Vec<f64>,
    pub ber_target: f64,
    /// Evaluation window (min, max) in metres of axial range.
    pub eval_range_m: (f64, f64),
}

impl ScenarioConfig {
    /// Reference evaluation profile: 1550 nm, 10 mW, 9/95 cm² apertures,
    /// APD with M = 10 and F = 3.2, 1 GHz bandwidth, 50 Ω load at 298 K,
    /// gantry stations 5 m above the train every 400 m, 400 km/h, BER 1e-9.
    pub fn table1() -> Self {
        let optical = OpticalParams::table1();
        let controller =
            ControllerConfig::new(ControllerMode::AdaptiveIdeal, optical.rx_radius_m());
        Self {
            placement: StationPlacement::gantry(5.0, 400.0),
            optical,
            receiver: ReceiverParams::table1(),
            controller,
            visibility_km: 1.0,
            train_speed_mps: kmh_to_mps(400.0),
            start_position_m: 0.0,
            time_step_s: 0.1,
            duration_s: 60.0,
            transceiver_offsets_m: vec![0.0],
            ber_target: 1e-9,
            eval_range_m: (75.0, 2000.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.placement.validate()?;
        self.optical.validate()?;
        self.receiver.validate()?;
        self.controller.validate()?;
        if !(self.visibility_km > 0.0) {
            return Err(config("channel.visibility_km must be > 0"));
        }
        if !(self.train_speed_mps >= 0.0 && self.train_speed_mps.is_finite()) {
            return Err(config("train.speed must be >= 0"));
        }
        if !self.start_position_m.is_finite() {
            return Err(config("train.start_position_m must be finite"));
        }
        if !(self.time_step_s > 0.0) {
            return Err(config("simulation.time_step_s must be > 0"));
        }
        if !(self.duration_s > 0.0) {
            return Err(config("simulation.duration_s must be > 0"));
        }
        validate_offsets(&self.transceiver_offsets_m)?;
        if !(self.ber_target > 0.0 && self.ber_target < 0.5) {
            return Err(config("evaluation.ber_target must lie in (0, 0.5)"));
        }
        let (lo, hi) = self.eval_range_m;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(config("evaluation range must satisfy 0 < min < max"));
        }
        if lo < self.placement.effective_offset_m() {
            return Err(config(format!(
                "evaluation range minimum {lo} m is shorter than the station offset {} m",
                self.placement.effective_offset_m()
            )));
        }
        Ok(())
    }

    /// Copy with a different controller mode.
    pub fn with_mode(&self, mode: ControllerMode) -> Self {
        let mut c = self.clone();
        c.controller.mode = mode;
        c
    }

    /// Number of samples per transceiver emitted by [`run`].
    pub fn sample_count(&self) -> usize {
        (self.duration_s / self.time_step_s + 1e-9).floor() as usize + 1
    }

    /// Optical power (dBm) needed to meet the BER target.
    pub fn required_power_dbm(&self) -> Result<f64> {
        Ok(watts_to_dbm(required_power_for_ber(
            &self.receiver,
            self.ber_target,
        )?))
    }

    pub fn rx_radius_m(&self) -> f64 {
        self.optical.rx_radius_m()
    }
}

/// Output of the full link chain at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEvaluation {
    pub range_m: f64,
    pub divergence_rad: f64,
    pub p_rx_dbm: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    pub ber: f64,
    pub link_up: bool,
}

/// Full chain at an axial range: Friis clear-air power, fog, SNR and BER.
pub fn evaluate_range(
    config: &ScenarioConfig,
    visibility_km: f64,
    range_m: f64,
    divergence_rad: f64,
) -> Result<LinkEvaluation> {
    let origin = match config.controller.mode {
        ControllerMode::Fixed => BeamOrigin::Fixed,
        _ => BeamOrigin::Adaptive,
    };
    let beam = BeamSpec::new(divergence_rad, origin)?;
    let clear_w = received_power_clear(&config.optical, &beam, range_m)?;
    let channel = ChannelState::new(visibility_km, config.optical.wavelength_um())?;
    let p_rx_dbm = received_power_fog_dbm(clear_w, &channel, range_m)?;
    let snr_linear = snr(&config.receiver, dbm_to_watts(p_rx_dbm));
    let ber = ber_ook_nrz(snr_linear);
    Ok(LinkEvaluation {
        range_m,
        divergence_rad,
        p_rx_dbm,
        snr_linear,
        snr_db: to_db(snr_linear),
        ber,
        link_up: ber <= config.ber_target,
    })
}

/// Evaluates one link at the configured visibility.
pub fn evaluate_link(
    config: &ScenarioConfig,
    geom: &LinkGeometry,
    divergence_rad: f64,
) -> Result<LinkEvaluation> {
    evaluate_range(config, config.visibility_km, geom.axial_m, divergence_rad)
}

/// Geometry with axial distance `range_m` under the configured placement.
pub fn geometry_at_range(config: &ScenarioConfig, range_m: f64) -> Result<LinkGeometry> {
    LinkGeometry::at_axial_range(
        range_m,
        config.placement.effective_offset_m(),
        config.rx_radius_m(),
    )
}

/// Steady-state evaluation of a controller mode at an axial range. The
/// motorized expander is treated as settled, i.e. identical to the ideal beam.
pub fn evaluate_mode_at_range(
    config: &ScenarioConfig,
    visibility_km: f64,
    mode: ControllerMode,
    range_m: f64,
) -> Result<LinkEvaluation> {
    let geom = geometry_at_range(config, range_m)?;
    let mut controller = config.controller.clone();
    controller.mode = mode;
    let divergence = controller.steady_divergence(&geom)?;
    let c = config.with_mode(mode);
    evaluate_range(&c, visibility_km, geom.axial_m, divergence)
}

/// Axial range beyond which the ideal adaptive beam is narrower than the
/// fixed beam, and hence receives more power.
pub fn divergence_crossover_range(config: &ScenarioConfig) -> Result<f64> {
    let half = config.controller.fixed_full_divergence_rad / 2.0;
    let slant = config.rx_radius_m() / half.sin();
    let offset = config.placement.effective_offset_m();
    if slant <= offset {
        return Err(domain(
            "fixed beam is narrower than the ideal beam at every range",
        ));
    }
    Ok(LinkGeometry::from_offsets(
        (slant * slant - offset * offset).sqrt(),
        offset,
        config.rx_radius_m(),
    )?
    .axial_m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub t_s: f64,
    pub transceiver_id: usize,
    pub station_id: i64,
    pub slant_m: f64,
    pub range_m: f64,
    pub divergence_rad: f64,
    pub p_rx_dbm: f64,
    pub snr_db: f64,
    pub ber: f64,
    pub link_up: bool,
}

/// Simulates the configured train pass.
///
/// At every step each transceiver links to its nearest base station (ties to
/// the lower id) and the controller of that (transceiver, station) link is
/// stepped. A controller is created when a link is first acquired. Samples
/// are ordered by time, then transceiver.
pub fn run(config: &ScenarioConfig) -> Result<Vec<LinkSample>> {
    config.validate()?;
    let steps = config.sample_count();
    let r_rx = config.rx_radius_m();
    let mut controllers: BTreeMap<(usize, i64), ControllerState> = BTreeMap::new();
    let mut samples = Vec::with_capacity(steps * config.transceiver_offsets_m.len());
    let mut train = TrainState {
        position_m: config.start_position_m,
        speed_mps: config.train_speed_mps,
        transceiver_offsets_m: config.transceiver_offsets_m.clone(),
    };

    for i in 0..steps {
        let t = i as f64 * config.time_step_s;
        // positions from t, not accumulated, so reruns and mirrored passes agree exactly
        train.position_m = config.start_position_m + config.train_speed_mps * t;
        for k in 0..train.transceiver_offsets_m.len() {
            let x = train.position_m + train.transceiver_offsets_m[k];
            let (station_id, station_pos) = config.placement.nearest_station(x);
            let geom = link_geometry(&train, k, station_pos, &config.placement, r_rx)?;
            let state = match controllers.entry((k, station_id)) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(ControllerState::new(&config.controller, t, &geom)?)
                }
            };
            let divergence = state.step(&config.controller, t, &geom)?;
            let eval = evaluate_link(config, &geom, divergence)?;
            samples.push(LinkSample {
                t_s: t,
                transceiver_id: k,
                station_id,
                slant_m: geom.slant_m,
                range_m: eval.range_m,
                divergence_rad: divergence,
                p_rx_dbm: eval.p_rx_dbm,
                snr_db: eval.snr_db,
                ber: eval.ber,
                link_up: eval.link_up,
            });
        }
    }
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxDistance {
    pub distance_m: f64,
    /// The BER target still holds at the upper edge of the evaluation window.
    pub saturated: bool,
}

/// Largest axial range in the evaluation window at which the received power
/// meets the BER target's required power.
pub fn max_distance(
    config: &ScenarioConfig,
    visibility_km: f64,
    mode: ControllerMode,
) -> Result<MaxDistance> {
    let required_dbm = config.required_power_dbm()?;
    let (lo, hi) = config.eval_range_m;
    let margin = |r: f64| -> Result<f64> {
        Ok(evaluate_mode_at_range(config, visibility_km, mode, r)?.p_rx_dbm - required_dbm)
    };

    let mut prev = f64::INFINITY;
    for i in 0..MONOTONE_PROBES {
        let r = lo + (hi - lo) * i as f64 / (MONOTONE_PROBES - 1) as f64;
        let m = margin(r)?;
        if !(m < prev) {
            return Err(Error::NotMonotone(format!(
                "received power of the {mode} beam is not strictly decreasing near {r:.3} m at V = {visibility_km} km"
            )));
        }
        prev = m;
    }

    if margin(lo)? < 0.0 {
        return Err(Error::LinkInfeasible(format!(
            "{mode} beam misses the BER target already at {lo} m (V = {visibility_km} km)"
        )));
    }
    if margin(hi)? >= 0.0 {
        return Ok(MaxDistance {
            distance_m: hi,
            saturated: true,
        });
    }
    let bracket = bisect(
        |r| margin(r).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        MAX_DISTANCE_TOL_M,
    )?;
    Ok(MaxDistance {
        distance_m: bracket.feasible,
        saturated: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: ControllerMode,
    pub visibility_km: f64,
    pub range_m: f64,
    pub divergence_rad: f64,
    pub p_rx_dbm: f64,
    pub snr_db: f64,
    pub ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub visibility_km: f64,
    /// Mean of adaptive minus fixed received power over the range grid.
    pub mean_gap_db: Option<f64>,
    pub fixed_max: Option<MaxDistance>,
    pub adaptive_max: Option<MaxDistance>,
}

impl SweepSummary {
    pub fn max_distance_ratio(&self) -> Option<f64> {
        Some(self.adaptive_max?.distance_m / self.fixed_max?.distance_m)
    }

    pub fn max_distance_difference_m(&self) -> Option<f64> {
        Some(self.adaptive_max?.distance_m - self.fixed_max?.distance_m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SweepSummary>,
}

fn sorted_grid(name: &str, values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(domain(format!("{name} grid must be non-empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(domain(format!("{name} grid must be finite")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Dense evaluation over (mode, visibility, range), rows in lexicographic
/// order of mode name, visibility and range, plus per-visibility summaries.
pub fn compare_sweep(
    config: &ScenarioConfig,
    ranges_m: &[f64],
    visibilities_km: &[f64],
    modes: &[ControllerMode],
) -> Result<SweepTable> {
    config.validate()?;
    let ranges = sorted_grid("range", ranges_m)?;
    let visibilities = sorted_grid("visibility", visibilities_km)?;
    if visibilities[0] <= 0.0 {
        return Err(domain("visibility grid must be > 0"));
    }
    if modes.is_empty() {
        return Err(domain("mode list must be non-empty"));
    }
    let mut modes = modes.to_vec();
    modes.sort_by_key(|m| m.name());
    modes.dedup();

    let mut cells = Vec::with_capacity(modes.len() * visibilities.len() * ranges.len());
    for &m in &modes {
        for &v in &visibilities {
            cells.extend(ranges.iter().map(|&r| (m, v, r)));
        }
    }

    let rows = cells
        .par_iter()
        .map(|&(mode, v, r)| {
            let e = evaluate_mode_at_range(config, v, mode, r)?;
            Ok(SweepRow {
                mode,
                visibility_km: v,
                range_m: r,
                divergence_rad: e.divergence_rad,
                p_rx_dbm: e.p_rx_dbm,
                snr_db: e.snr_db,
                ber: e.ber,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let has_both =
        modes.contains(&ControllerMode::Fixed) && modes.contains(&ControllerMode::AdaptiveIdeal);
    let summaries = visibilities
        .par_iter()
        .map(|&v| {
            if !has_both {
                return SweepSummary {
                    visibility_km: v,
                    mean_gap_db: None,
                    fixed_max: None,
                    adaptive_max: None,
                };
            }
            let power = |mode| {
                rows.iter()
                    .filter(move |row| row.mode == mode && row.visibility_km == v)
                    .map(|row| row.p_rx_dbm)
            };
            let gaps: Vec<f64> = power(ControllerMode::AdaptiveIdeal)
                .zip(power(ControllerMode::Fixed))
                .map(|(a, f)| a - f)
                .collect();
            SweepSummary {
                visibility_km: v,
                mean_gap_db: Some(mean(&gaps)),
                fixed_max: max_distance(config, v, ControllerMode::Fixed).ok(),
                adaptive_max: max_distance(config, v, ControllerMode::AdaptiveIdeal).ok(),
            }
        })
        .collect();

    Ok(SweepTable { rows, summaries })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean adaptive-minus-fixed received power over a range grid at one visibility.
pub fn mean_power_gap_db(
    config: &ScenarioConfig,
    visibility_km: f64,
    ranges_m: &[f64],
) -> Result<f64> {
    let gaps = ranges_m
        .par_iter()
        .map(|&r| {
            let a =
                evaluate_mode_at_range(config, visibility_km, ControllerMode::AdaptiveIdeal, r)?;
            let f = evaluate_mode_at_range(config, visibility_km, ControllerMode::Fixed, r)?;
            Ok(a.p_rx_dbm - f.p_rx_dbm)
        })
        .collect::<Result<Vec<_>>>()?;
    if gaps.is_empty() {
        return Err(domain("range grid must be non-empty"));
    }
    Ok(mean(&gaps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeExtensionEntry {
    pub visibility_km: f64,
    pub fixed: MaxDistance,
    pub adaptive: MaxDistance,
}

impl RangeExtensionEntry {
    pub fn ratio(&self) -> f64 {
        self.adaptive.distance_m / self.fixed.distance_m
    }

    pub fn difference_m(&self) -> f64 {
        self.adaptive.distance_m - self.fixed.distance_m
    }
}

/// Fixed vs adaptive maximum distances over a visibility grid. Adaptive
/// distances saturate at the evaluation window's upper edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeExtension {
    pub entries: Vec<RangeExtensionEntry>,
    pub mean_ratio: f64,
    pub mean_difference_m: f64,
}

pub fn range_extension(config: &ScenarioConfig, visibilities_km: &[f64]) -> Result<RangeExtension> {
    let visibilities = sorted_grid("visibility", visibilities_km)?;
    let entries = visibilities
        .par_iter()
        .map(|&v| {
            Ok(RangeExtensionEntry {
                visibility_km: v,
                fixed: max_distance(config, v, ControllerMode::Fixed)?,
                adaptive: max_distance(config, v, ControllerMode::AdaptiveIdeal)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = entries.iter().map(RangeExtensionEntry::ratio).collect();
    let diffs: Vec<f64> = entries
        .iter()
        .map(RangeExtensionEntry::difference_m)
        .collect();
    Ok(RangeExtension {
        mean_ratio: mean(&ratios),
        mean_difference_m: mean(&diffs),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementRow {
    pub longitudinal_m: f64,
    pub gantry_p_rx_dbm: f64,
    pub trackside_p_rx_dbm: f64,
}

impl PlacementRow {
    pub fn gap_db(&self) -> f64 {
        self.gantry_p_rx_dbm - self.trackside_p_rx_dbm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementComparison {
    pub visibility_km: f64,
    pub rows: Vec<PlacementRow>,
    pub mean_gap_db: f64,
}

/// Adaptive-beam received power for two station placements over a grid of
/// along-track separations, at the placement-comparison visibility.
pub fn compare_placement(
    config: &ScenarioConfig,
    gantry: &StationPlacement,
    trackside: &StationPlacement,
    longitudinal_grid_m: &[f64],
) -> Result<PlacementComparison> {
    gantry.validate()?;
    trackside.validate()?;
    let grid = sorted_grid("longitudinal", longitudinal_grid_m)?;
    if grid[0] < 0.0 {
        return Err(domain("longitudinal grid must be >= 0"));
    }
    let c = config.with_mode(ControllerMode::AdaptiveIdeal);
    let r_rx = c.rx_radius_m();
    let power = |placement: &StationPlacement, x: f64| -> Result<f64> {
        let geom = LinkGeometry::from_offsets(x, placement.effective_offset_m(), r_rx)?;
        let divergence = c.controller.steady_divergence(&geom)?;
        Ok(evaluate_range(&c, PLACEMENT_VISIBILITY_KM, geom.axial_m, divergence)?.p_rx_dbm)
    };
    let rows = grid
        .par_iter()
        .map(|&x| {
            Ok(PlacementRow {
                longitudinal_m: x,
                gantry_p_rx_dbm: power(gantry, x)?,
                trackside_p_rx_dbm: power(trackside, x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps: Vec<f64> = rows.iter().map(PlacementRow::gap_db).collect();
    Ok(PlacementComparison {
        visibility_km: PLACEMENT_VISIBILITY_KM,
        mean_gap_db: mean(&gaps),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthRow {
    pub wavelength_m: f64,
    pub visibility_km: f64,
    pub range_m: f64,
    pub p_rx_dbm: f64,
}

/// Received power at one range for several wavelengths across visibilities,
/// using the configured controller's steady divergence.
pub fn wavelength_sweep(
    config: &ScenarioConfig,
    wavelengths_m: &[f64],
    visibilities_km: &[f64],
    range_m: f64,
) -> Result<Vec<WavelengthRow>> {
    let wavelengths = sorted_grid("wavelength", wavelengths_m)?;
    let visibilities = sorted_grid("visibility", visibilities_km)?;
    let cells: Vec<(f64, f64)> = wavelengths
        .iter()
        .flat_map(|&w| visibilities.iter().map(move |&v| (w, v)))
        .collect();
    cells
        .par_iter()
        .map(|&(w, v)| {
            let mut c = config.clone();
            c.optical.wavelength_m = w;
            c.optical.validate()?;
            let e = evaluate_mode_at_range(&c, v, c.controller.mode, range_m)?;
            Ok(WavelengthRow {
                wavelength_m: w,
                visibility_km: v,
                range_m,
                p_rx_dbm: e.p_rx_dbm,
            })
        })
        .collect()
}
