//! `railfso` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 link down
//! (`link` only).

mod format;
mod output;

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use railfso::config::{Grid, ResolvedConfig, PRESET_NAMES};
use railfso::divergence_control::ControllerMode;
use railfso::scenario::{
    compare_placement, compare_sweep, evaluate_mode_at_range, max_distance, run, wavelength_sweep,
    MaxDistance,
};
use railfso::units::watts_to_dbm;
use railfso::StationPlacement;
use rayon::prelude::*;
use serde::Serialize;

use format::number;
use output::{timestamp, write_atomic, RunManifest};

const THREADS_ENV: &str = "RAILFSO_THREADS";
const DEFAULT_RANGE_STEP_M: f64 = 25.0;
const DEFAULT_WAVELENGTHS_NM: [f64; 3] = [850.0, 1310.0, 1550.0];
const DEFAULT_WAVELENGTH_RANGE_M: f64 = 500.0;
const DEFAULT_LONGITUDINAL: Grid = Grid::Span {
    start: 0.0,
    stop: 2000.0,
    step: 10.0,
};

#[derive(Debug, Parser)]
#[command(
    name = "railfso",
    version,
    about = "Train-to-ground free-space optical link simulator"
)]
struct Cli {
    /// Scenario configuration file (TOML).
    #[arg(short, long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Bundled preset to use instead of a file (default: table1).
    #[arg(short, long, global = true)]
    preset: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one link and report whether it meets the BER target.
    Link {
        /// Axial range in metres.
        #[arg(long)]
        range: f64,
        /// Visibility in km (default: from the configuration).
        #[arg(long)]
        visibility: Option<f64>,
        /// Controller mode (default: from the configuration).
        #[arg(long)]
        mode: Option<ControllerMode>,
    },
    /// Received power, SNR and BER over (mode, visibility, range) grids.
    Sweep {
        /// Ranges in metres, `start:stop:step` or a comma list.
        #[arg(long)]
        ranges: Option<String>,
        /// Visibilities in km, `start:stop:step` or a comma list.
        #[arg(long)]
        visibilities: Option<String>,
        /// Comma-separated controller modes.
        #[arg(long)]
        modes: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Maximum distance meeting the BER target per mode and visibility.
    Maxdist {
        #[arg(long)]
        visibilities: Option<String>,
        #[arg(long)]
        modes: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Time series of a train pass.
    Pass {
        #[command(flatten)]
        out: OutArgs,
    },
    /// Gantry against trackside received power along the track.
    Placement {
        /// Along-track separations in metres.
        #[arg(long)]
        longitudinal: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Received power per wavelength and visibility at one range.
    Wavelengths {
        /// Wavelengths in nm.
        #[arg(long)]
        wavelengths_nm: Option<String>,
        #[arg(long)]
        visibilities: Option<String>,
        /// Axial range in metres.
        #[arg(long)]
        range: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print the resolved configuration in canonical form with its digest.
    Config,
    /// List bundled presets.
    Presets,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output CSV path; a `.manifest.json` sidecar is written next to it.
    /// Without it the table goes to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

struct RunContext {
    resolved: ResolvedConfig,
    argv: Vec<String>,
    started_at: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn say(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// A closed downstream pipe (`railfso ... | head`) ends the run quietly.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn execute(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    if let Command::Presets = cli.command {
        say(&(PRESET_NAMES.join("\n") + "\n"))?;
        return Ok(ExitCode::SUCCESS);
    }
    let resolved = match (&cli.config, &cli.preset) {
        (Some(path), _) => ResolvedConfig::from_path(path)?,
        (None, Some(name)) => ResolvedConfig::from_preset(name)?,
        (None, None) => ResolvedConfig::from_preset("table1")?,
    };
    for w in resolved.warnings() {
        log::warn!("{w}");
    }
    let ctx = RunContext {
        resolved,
        argv: std::env::args().collect(),
        started_at: timestamp(),
    };
    match cli.command {
        Command::Link {
            range,
            visibility,
            mode,
        } => cmd_link(&ctx, range, visibility, mode),
        Command::Sweep {
            ranges,
            visibilities,
            modes,
            out,
        } => cmd_sweep(&ctx, ranges, visibilities, modes, out.out),
        Command::Maxdist {
            visibilities,
            modes,
            out,
        } => cmd_maxdist(&ctx, visibilities, modes, out.out),
        Command::Pass { out } => cmd_pass(&ctx, out.out),
        Command::Placement { longitudinal, out } => cmd_placement(&ctx, longitudinal, out.out),
        Command::Wavelengths {
            wavelengths_nm,
            visibilities,
            range,
            out,
        } => cmd_wavelengths(&ctx, wavelengths_nm, visibilities, range, out.out),
        Command::Config => {
            let text = ctx.resolved.canonical().to_toml()?;
            say(&format!("{text}# digest = \"{}\"\n", ctx.resolved.digest()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Presets => unreachable!("handled before configuration is loaded"),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow!("{THREADS_ENV} must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure worker threads")
}

fn grid_arg(
    flag: Option<String>,
    pinned: &Option<Vec<f64>>,
    fallback: impl FnOnce() -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    match (flag, pinned) {
        (Some(text), _) => Ok(Grid::parse(&text)?.values()?),
        (None, Some(v)) => Ok(v.clone()),
        (None, None) => fallback(),
    }
}

fn modes_arg(
    flag: Option<String>,
    pinned: &Option<Vec<ControllerMode>>,
) -> Result<Vec<ControllerMode>> {
    let mut modes = match (flag, pinned) {
        (Some(text), _) => text
            .split(',')
            .map(|m| m.trim().parse::<ControllerMode>().map_err(|e| anyhow!(e)))
            .collect::<Result<Vec<_>>>()?,
        (None, Some(m)) => m.clone(),
        (None, None) => vec![ControllerMode::Fixed, ControllerMode::AdaptiveIdeal],
    };
    modes.sort_by_key(|m| m.name());
    modes.dedup();
    if modes.is_empty() {
        bail!("mode list must be non-empty");
    }
    Ok(modes)
}

fn visibilities_arg(ctx: &RunContext, flag: Option<String>) -> Result<Vec<f64>> {
    grid_arg(flag, &ctx.resolved.analysis.visibilities_km, || {
        Ok(vec![ctx.resolved.scenario.visibility_km])
    })
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> Result<(Vec<u8>, usize)> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    let n = rows.len();
    for row in rows {
        w.write_record(&row)?;
    }
    Ok((w.into_inner().map_err(|e| anyhow!("{e}"))?, n))
}

/// Writes the table and its manifest, or the table alone to stdout.
/// Summary lines go to stdout with a file and to stderr otherwise.
fn emit<G: Serialize>(
    ctx: &RunContext,
    out: Option<PathBuf>,
    csv: (Vec<u8>, usize),
    grids: &G,
    summary: &[String],
) -> Result<ExitCode> {
    let (bytes, rows) = csv;
    match out {
        Some(path) => {
            write_atomic(&path, &bytes)?;
            RunManifest::new(
                &ctx.resolved,
                ctx.argv.clone(),
                ctx.started_at.clone(),
                &path,
                rows,
                grids,
            )
            .write(&path)?;
            let mut text = format!("wrote {rows} rows to {}\n", path.display());
            for line in summary {
                writeln!(text, "{line}")?;
            }
            say(&text)?;
        }
        None => {
            std::io::stdout().lock().write_all(&bytes)?;
            for line in summary {
                eprintln!("{line}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_link(
    ctx: &RunContext,
    range: f64,
    visibility: Option<f64>,
    mode: Option<ControllerMode>,
) -> Result<ExitCode> {
    let c = &ctx.resolved.scenario;
    let v = visibility.unwrap_or(c.visibility_km);
    let mode = mode.unwrap_or(c.controller.mode);
    let e = evaluate_mode_at_range(c, v, mode, range)?;
    let required = c.required_power_dbm()?;
    let mut report = String::new();
    writeln!(report, "mode            {mode}")?;
    writeln!(report, "visibility_km   {}", number(v))?;
    writeln!(report, "range_m         {}", number(e.range_m))?;
    writeln!(report, "divergence_rad  {}", number(e.divergence_rad))?;
    writeln!(report, "p_rx_dbm        {}", number(e.p_rx_dbm))?;
    writeln!(report, "required_dbm    {}", number(required))?;
    writeln!(report, "snr_db          {}", number(e.snr_db))?;
    writeln!(report, "ber             {}", number(e.ber))?;
    writeln!(report, "ber_target      {}", number(c.ber_target))?;
    writeln!(report, "link_up         {}", e.link_up)?;
    say(&report)?;
    Ok(if e.link_up {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

#[derive(Serialize)]
struct SweepGrids {
    modes: Vec<ControllerMode>,
    visibilities_km: Vec<f64>,
    ranges_m: Vec<f64>,
}

fn cmd_sweep(
    ctx: &RunContext,
    ranges: Option<String>,
    visibilities: Option<String>,
    modes: Option<String>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let c = &ctx.resolved.scenario;
    let a = &ctx.resolved.analysis;
    let ranges = grid_arg(ranges, &a.ranges_m, || {
        let (lo, hi) = c.eval_range_m;
        Ok(Grid::Span {
            start: lo,
            stop: hi,
            step: DEFAULT_RANGE_STEP_M,
        }
        .values()?)
    })?;
    let visibilities = visibilities_arg(ctx, visibilities)?;
    let modes = modes_arg(modes, &a.modes)?;
    let sweep = compare_sweep(c, &ranges, &visibilities, &modes)?;
    let rows = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.mode.name().to_string(),
                number(r.visibility_km),
                number(r.range_m),
                number(r.divergence_rad),
                number(r.p_rx_dbm),
                number(r.snr_db),
                number(r.ber),
            ]
        })
        .collect();
    let csv = table(
        &[
            "mode",
            "visibility_km",
            "range_m",
            "divergence_rad",
            "p_rx_dbm",
            "snr_db",
            "ber",
        ],
        rows,
    )?;
    let summary: Vec<String> = sweep
        .summaries
        .iter()
        .filter_map(|s| {
            let gap = s.mean_gap_db?;
            Some(format!(
                "V = {} km: mean adaptive - fixed gap {} dB, max distance fixed {} / adaptive {}",
                number(s.visibility_km),
                number(gap),
                describe_max(s.fixed_max),
                describe_max(s.adaptive_max)
            ))
        })
        .collect();
    let grids = SweepGrids {
        modes,
        visibilities_km: visibilities,
        ranges_m: ranges,
    };
    emit(ctx, out, csv, &grids, &summary)
}

fn describe_max(m: Option<MaxDistance>) -> String {
    match m {
        Some(m) if m.saturated => format!(">= {} m", number(m.distance_m)),
        Some(m) => format!("{} m", number(m.distance_m)),
        None => "n/a".into(),
    }
}

#[derive(Serialize)]
struct MaxdistGrids {
    modes: Vec<ControllerMode>,
    visibilities_km: Vec<f64>,
}

fn cmd_maxdist(
    ctx: &RunContext,
    visibilities: Option<String>,
    modes: Option<String>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let c = &ctx.resolved.scenario;
    let mut visibilities = visibilities_arg(ctx, visibilities)?;
    visibilities.sort_by(f64::total_cmp);
    visibilities.dedup();
    let modes = modes_arg(modes, &ctx.resolved.analysis.modes)?;
    let cells: Vec<(ControllerMode, f64)> = modes
        .iter()
        .flat_map(|&m| visibilities.iter().map(move |&v| (m, v)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(m, v)| {
            max_distance(c, v, m)
                .map(|d| (m, v, d))
                .with_context(|| format!("maximum distance for {m} at V = {v} km"))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = results
        .iter()
        .map(|(m, v, d)| {
            vec![
                m.name().to_string(),
                number(*v),
                number(d.distance_m),
                d.saturated.to_string(),
            ]
        })
        .collect();
    let csv = table(
        &["mode", "visibility_km", "max_distance_m", "saturated"],
        rows,
    )?;
    let grids = MaxdistGrids {
        modes,
        visibilities_km: visibilities,
    };
    emit(ctx, out, csv, &grids, &[])
}

#[derive(Serialize)]
struct PassGrids {
    samples_per_transceiver: usize,
    transceivers: usize,
}

fn cmd_pass(ctx: &RunContext, out: Option<PathBuf>) -> Result<ExitCode> {
    let c = &ctx.resolved.scenario;
    let samples = run(c)?;
    let up = samples.iter().filter(|s| s.link_up).count();
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                number(s.t_s),
                s.transceiver_id.to_string(),
                s.station_id.to_string(),
                number(s.range_m),
                number(s.divergence_rad),
                number(s.p_rx_dbm),
                number(s.snr_db),
                number(s.ber),
                s.link_up.to_string(),
            ]
        })
        .collect();
    let csv = table(
        &[
            "t_s",
            "transceiver_id",
            "station_id",
            "range_m",
            "divergence_rad",
            "p_rx_dbm",
            "snr_db",
            "ber",
            "link_up",
        ],
        rows,
    )?;
    let summary = vec![format!(
        "{} mode: link up in {up} of {} samples",
        c.controller.mode,
        samples.len()
    )];
    let grids = PassGrids {
        samples_per_transceiver: c.sample_count(),
        transceivers: c.transceiver_offsets_m.len(),
    };
    emit(ctx, out, csv, &grids, &summary)
}

#[derive(Serialize)]
struct PlacementGrids {
    gantry: StationPlacement,
    trackside: StationPlacement,
    longitudinal_m: Vec<f64>,
}

fn cmd_placement(
    ctx: &RunContext,
    longitudinal: Option<String>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let c = &ctx.resolved.scenario;
    let a = &ctx.resolved.analysis;
    let main = c.placement;
    let spacing = main.station_spacing_m;
    let (gantry, trackside) = match (main.mode, a.alt_placement) {
        (railfso::PlacementMode::Gantry, Some(alt)) => (main, alt),
        (railfso::PlacementMode::Trackside, Some(alt)) => (alt, main),
        (railfso::PlacementMode::Gantry, None) => {
            (main, StationPlacement::trackside(3.0, 5.0, spacing))
        }
        (railfso::PlacementMode::Trackside, None) => (StationPlacement::gantry(5.0, spacing), main),
    };
    if gantry.mode != railfso::PlacementMode::Gantry
        || trackside.mode != railfso::PlacementMode::Trackside
    {
        bail!("placement comparison needs one gantry and one trackside placement");
    }
    let grid = grid_arg(longitudinal, &a.longitudinal_m, || {
        Ok(DEFAULT_LONGITUDINAL.values()?)
    })?;
    let cmp = compare_placement(c, &gantry, &trackside, &grid)?;
    let rows = cmp
        .rows
        .iter()
        .map(|r| {
            vec![
                number(r.longitudinal_m),
                number(r.gantry_p_rx_dbm),
                number(r.trackside_p_rx_dbm),
                number(r.gap_db()),
            ]
        })
        .collect();
    let csv = table(
        &[
            "longitudinal_m",
            "gantry_p_rx_dbm",
            "trackside_p_rx_dbm",
            "gap_db",
        ],
        rows,
    )?;
    let summary = vec![format!(
        "mean gantry - trackside gap {} dB at V = {} km",
        number(cmp.mean_gap_db),
        number(cmp.visibility_km)
    )];
    let grids = PlacementGrids {
        gantry,
        trackside,
        longitudinal_m: grid,
    };
    emit(ctx, out, csv, &grids, &summary)
}

#[derive(Serialize)]
struct WavelengthGrids {
    wavelengths_m: Vec<f64>,
    visibilities_km: Vec<f64>,
    range_m: f64,
}

fn cmd_wavelengths(
    ctx: &RunContext,
    wavelengths_nm: Option<String>,
    visibilities: Option<String>,
    range: Option<f64>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let c = &ctx.resolved.scenario;
    let a = &ctx.resolved.analysis;
    let wavelengths: Vec<f64> = match wavelengths_nm {
        Some(text) => Grid::parse(&text)?
            .values()?
            .into_iter()
            .map(|nm| nm / 1e9)
            .collect(),
        None => a
            .wavelengths_m
            .clone()
            .unwrap_or_else(|| DEFAULT_WAVELENGTHS_NM.iter().map(|nm| nm / 1e9).collect()),
    };
    let visibilities = visibilities_arg(ctx, visibilities)?;
    let range = range
        .or_else(|| a.ranges_m.as_ref().and_then(|r| r.first().copied()))
        .unwrap_or(DEFAULT_WAVELENGTH_RANGE_M);
    let rows = wavelength_sweep(c, &wavelengths, &visibilities, range)?;
    let records = rows
        .iter()
        .map(|r| {
            vec![
                number(r.wavelength_m * 1e9),
                number(r.visibility_km),
                number(r.range_m),
                number(r.p_rx_dbm),
            ]
        })
        .collect();
    let csv = table(
        &["wavelength_nm", "visibility_km", "range_m", "p_rx_dbm"],
        records,
    )?;
    let summary = vec![format!(
        "{} mode at {} m, P_tx = {} dBm",
        c.controller.mode,
        number(range),
        number(watts_to_dbm(c.optical.tx_power_w))
    )];
    let grids = WavelengthGrids {
        wavelengths_m: wavelengths,
        visibilities_km: visibilities,
        range_m: range,
    };
    emit(ctx, out, csv, &grids, &summary)
}
