//! Command-line surface: orchestration of the planning, capture, stitching,
//! extraction and analysis steps. All behavior delegates to the library
//! modules; this layer only parses arguments and wires files together.

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use clap::{Args, Parser, Subcommand};
use log::info;

use crate::acquisition::{
    capture_grid, crontab_line, make_provider, run_schedule, SimClock, SystemClock,
};
use crate::analytics::{
    compare, plot_series, read_observations_csv, window_average, write_observations_csv,
    write_report_csv, write_series_csv, PlotConfig, StudyDesign,
};
use crate::config::{Config, ScheduleConfig};
use crate::congestion::{extract_ccc, SitesFile};
use crate::error::{Error, Result};
use crate::mosaic::{stitch_capture, PLACEHOLDER_RGB};
use crate::synthmap::{demo_design, demo_scenario, Scenario};
use crate::tile_archive::{stamp_label, ArchiveHandle};

#[derive(Debug, Parser)]
#[command(name = "harvester", version, about = "Traffic-map tile harvester and congestion analyzer")]
pub struct Cli {
    /// Pipeline configuration file.
    #[arg(short, long, global = true, default_value = "config.json")]
    pub config: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the tile plan: indices, centers, side length and capture URLs.
    /// Side-effect-free.
    Plan,
    /// Run one grid capture now and archive the tiles.
    Capture,
    /// Run the capture schedule in the foreground (stop with Ctrl-C/SIGTERM).
    Daemon(DaemonArgs),
    /// Stitch one capture into a mosaic PNG.
    Stitch {
        /// Capture timestamp, e.g. 2020-06-01T09:00.
        timestamp: String,
        /// Overlay tile-boundary raster lines for inspection.
        #[arg(long)]
        raster_lines: bool,
    },
    /// Extract per-segment congestion observations for a timestamp range.
    Extract {
        /// Inclusive..exclusive timestamp range, e.g.
        /// `2020-06-01T00:00..2020-06-29T00:00`, or `all`.
        range: String,
    },
    /// Window the extracted observations and emit the comparison report CSV.
    Analyze,
    /// Render the windowed series to a PNG chart.
    Plot,
    /// Scaffold a synthetic study (scenario, sites, ground truth, config).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DaemonArgs {
    /// Stop once the schedule reaches this time (exclusive).
    #[arg(long)]
    pub until: Option<String>,
    /// Print the equivalent crontab line and exit.
    #[arg(long)]
    pub print_crontab: bool,
    /// Drive the schedule with a simulated clock starting at the anchor
    /// (offline regeneration; requires --until and a local provider).
    #[arg(long, requires = "until")]
    pub simulated: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `demo` for the built-in 28-day scenario, or a scenario JSON path.
    pub scenario: String,
    /// Directory receiving the scaffolded study files.
    #[arg(long, default_value = "synth_study")]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan => cmd_plan(&cli.config),
        Command::Capture => cmd_capture(&cli.config),
        Command::Daemon(args) => cmd_daemon(&cli.config, &args),
        Command::Stitch {
            timestamp,
            raster_lines,
        } => cmd_stitch(&cli.config, &timestamp, raster_lines),
        Command::Extract { range } => cmd_extract(&cli.config, &range),
        Command::Analyze => cmd_analyze(&cli.config),
        Command::Plot => cmd_plot(&cli.config),
        Command::Synth(args) => cmd_synth(&args),
    }
}

fn parse_stamp(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M"))
        .map_err(|_| {
            Error::Config(format!(
                "cannot parse timestamp {s:?}; expected YYYY-MM-DDTHH:MM"
            ))
        })
}

fn open_archive(cfg: &Config) -> Result<ArchiveHandle> {
    let archive = ArchiveHandle::open(&cfg.archive_root)?;
    Ok(if cfg.safe_names {
        archive
    } else {
        archive.with_legacy_names()
    })
}

fn scan_archive(cfg: &Config) -> Result<ArchiveHandle> {
    let archive = ArchiveHandle::scan(&cfg.archive_root)?;
    Ok(if cfg.safe_names {
        archive
    } else {
        archive.with_legacy_names()
    })
}

fn cmd_plan(config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let spans = cfg.grid.angular_spans()?;
    let plan = cfg.grid.plan()?;
    println!(
        "# {} tiles of {}x{} px at zoom {}, side {:.1} m",
        plan.len(),
        cfg.grid.n_pix,
        cfg.grid.n_pix,
        cfg.grid.zoom,
        spans.side_m
    );
    println!("i\tj\tlat\tlong\tside_m\turl");
    for tile in &plan {
        let url = crate::acquisition::build_url(tile, &cfg.provider)?;
        println!(
            "{}\t{}\t{:.10}\t{:.10}\t{:.1}\t{}",
            tile.i, tile.j, tile.center.lat_deg, tile.center.long_deg, spans.side_m, url
        );
    }
    Ok(())
}

fn cmd_capture(config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let provider = make_provider(&cfg.provider)?;
    let mut archive = open_archive(&cfg)?;
    let now = chrono::Utc::now().naive_utc();
    let report = capture_grid(&cfg.grid, &cfg.provider, provider.as_ref(), &mut archive, now)?;
    println!(
        "capture {}: {} ok, {} failed, {} retries in {:.1} s",
        report.timestamp,
        report.succeeded.len(),
        report.failed.len(),
        report.retries,
        report.duration.as_secs_f64()
    );
    for (i, j, msg) in &report.failed {
        eprintln!("tile ({i}, {j}) failed: {msg}");
    }
    if report.succeeded.is_empty() && !report.failed.is_empty() {
        return Err(Error::Config("every tile in the capture failed".into()));
    }
    Ok(())
}

fn cmd_daemon(config: &Path, args: &DaemonArgs) -> Result<()> {
    let cfg = Config::load(config)?;
    let interval = Duration::hours(i64::from(cfg.schedule.interval_h));
    if args.print_crontab {
        let line = crontab_line(
            interval,
            &format!("harvester --config {} capture", config.display()),
        )
        .ok_or_else(|| {
            Error::domain("schedule.interval_h", "must divide 24 h to map onto cron")
        })?;
        println!("{line}");
        return Ok(());
    }
    let until = args.until.as_deref().map(parse_stamp).transpose()?;
    let provider = make_provider(&cfg.provider)?;
    let mut archive = open_archive(&cfg)?;
    let mut captures = 0u32;
    let job = |t: NaiveDateTime| {
        match capture_grid(&cfg.grid, &cfg.provider, provider.as_ref(), &mut archive, t) {
            Ok(report) => {
                captures += 1;
                info!(
                    "capture {t}: {} ok, {} failed",
                    report.succeeded.len(),
                    report.failed.len()
                );
            }
            Err(e) => log::error!("capture {t} failed: {e}"),
        }
    };
    if args.simulated {
        let clock = SimClock::new(cfg.anchor());
        run_schedule(&clock, interval, cfg.anchor(), until, || false, job)?;
    } else {
        run_schedule(&SystemClock, interval, cfg.anchor(), until, || false, job)?;
    }
    println!("daemon finished after {captures} captures");
    Ok(())
}

fn cmd_stitch(config: &Path, timestamp: &str, raster_lines: bool) -> Result<()> {
    let cfg = Config::load(config)?;
    let stamp = parse_stamp(timestamp)?;
    let archive = scan_archive(&cfg)?;
    let mut mosaic = stitch_capture(&archive, stamp, &cfg.grid, PLACEHOLDER_RGB)?;
    if raster_lines {
        mosaic.overlay_raster_lines();
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let out = cfg
        .output_dir
        .join(format!("mosaic_{}.png", stamp_label(stamp)));
    mosaic.export_png(&out)?;
    println!(
        "stitched {} tiles ({} missing) -> {}",
        archive.lookup(stamp).map_or(0, |t| t.len()),
        mosaic.missing.len(),
        out.display()
    );
    Ok(())
}

fn cmd_extract(config: &Path, range: &str) -> Result<()> {
    let cfg = Config::load(config)?;
    let (start, end) = if range == "all" {
        (NaiveDateTime::MIN, NaiveDateTime::MAX)
    } else {
        let (a, b) = range.split_once("..").ok_or_else(|| {
            Error::Config("range must be <start>..<end> or `all`".into())
        })?;
        (parse_stamp(a)?, parse_stamp(b)?)
    };
    let archive = scan_archive(&cfg)?;
    let rois = cfg.rois()?;
    let palette = cfg.palette()?;
    let mut observations = Vec::new();
    let mut captures = 0;
    for stamp in archive.timestamps() {
        if stamp < start || stamp >= end {
            continue;
        }
        let mosaic = stitch_capture(&archive, stamp, &cfg.grid, PLACEHOLDER_RGB)?;
        observations.extend(extract_ccc(&mosaic, &rois, &palette)?);
        captures += 1;
    }
    if captures == 0 {
        return Err(Error::NoTiles(range.to_string()));
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let out = cfg.output_dir.join("observations.csv");
    write_observations_csv(&observations, &out)?;
    println!(
        "extracted {} observations over {captures} captures -> {}",
        observations.len(),
        out.display()
    );
    Ok(())
}

fn cmd_analyze(config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let observations = read_observations_csv(&cfg.output_dir.join("observations.csv"))?;
    let series = window_average(&observations, &cfg.study)?;
    let report = compare(&series, &cfg.study)?;
    let series_out = cfg.output_dir.join("series.csv");
    let report_out = cfg.output_dir.join("report.csv");
    write_series_csv(&series, &series_out)?;
    write_report_csv(&report, &report_out)?;
    println!(
        "analyzed {} observations into {} report rows -> {}",
        observations.len(),
        report.rows.len(),
        report_out.display()
    );
    Ok(())
}

fn cmd_plot(config: &Path) -> Result<()> {
    let cfg = Config::load(config)?;
    let observations = read_observations_csv(&cfg.output_dir.join("observations.csv"))?;
    let series = window_average(&observations, &cfg.study)?;
    let out = cfg.output_dir.join("series.png");
    plot_series(&series, &cfg.palette()?, PlotConfig::default(), &out)?;
    println!("plotted {} segments -> {}", series.segments.len(), out.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (scenario, design) = if args.scenario == "demo" {
        (demo_scenario(), demo_design())
    } else {
        let scenario = Scenario::load(Path::new(&args.scenario))?;
        let design = split_half_design(&scenario)?;
        (scenario, design)
    };
    scenario.validate()?;
    std::fs::create_dir_all(&args.out_dir)?;
    let scenario_path = args.out_dir.join("scenario.json");
    scenario.save(&scenario_path)?;
    SitesFile::save(&args.out_dir.join("sites.json"), &scenario.interior_rois()?)?;
    write_observations_csv(
        &scenario.ground_truth(),
        &args.out_dir.join("ground_truth.csv"),
    )?;
    let cfg = Config {
        grid: scenario.grid.clone(),
        provider: crate::acquisition::ProviderConfig::synthetic("scenario.json"),
        archive_root: "archive".into(),
        safe_names: true,
        sites_file: Some("sites.json".into()),
        palette_file: None,
        schedule: ScheduleConfig {
            interval_h: scenario.cadence_h,
            anchor: Some(scenario.start),
        },
        study: design,
        output_dir: "out".into(),
    };
    cfg.save(&args.out_dir.join("config.json"))?;
    println!(
        "scaffolded study in {} ({} captures x {} tiles, {} road segments)",
        args.out_dir.display(),
        scenario.captures,
        scenario.grid.plan()?.len(),
        scenario.roads.len()
    );
    Ok(())
}

/// Study design for an arbitrary scenario: first half baseline, second half
/// intervention, windows defaulting per the reference protocol.
fn split_half_design(scenario: &Scenario) -> Result<StudyDesign> {
    let times = scenario.capture_times();
    if times.len() < 2 {
        return Err(Error::domain("captures", "need at least 2 captures"));
    }
    let cadence = Duration::hours(i64::from(scenario.cadence_h));
    let mid = times[times.len() / 2];
    Ok(StudyDesign {
        baseline_start: times[0],
        baseline_end: mid,
        intervention_start: mid,
        intervention_end: *times.last().unwrap() + cadence,
        window_h: 12,
        cadence_h: scenario.cadence_h,
        window_anchor_h: 0,
        timezone: Default::default(),
        test: Default::default(),
    })
}
