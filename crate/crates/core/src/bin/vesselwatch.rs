use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vesselwatch::runtime::io::{
    read_positions, write_areas, write_ces_jsonl, write_ports, write_positions,
};
use vesselwatch::runtime::{
    generate, render_table, replay, Partitioning, PlantCounts, SyntheticFleetSpec,
};
use vesselwatch::synopsis::{
    compression_ratio, fleet_rmse, parse_csv, write_csv, write_per_vessel, ExportFormat, WindowSpec,
};
use vesselwatch::Config;

#[derive(Parser)]
#[command(
    name = "vesselwatch",
    version,
    about = "Vessel trajectory compression and maritime event recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a position file through the full pipeline.
    Run(RunArgs),
    /// Write a synthetic fleet with its ground-truth ledger.
    Generate(GenerateArgs),
    /// Compression and RMSE of a finished run.
    Eval(EvalArgs),
    /// Convert critical points to CSV, GeoJSON or KML.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// CSV of mmsi,lon,lat,tau in arrival order.
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window range in seconds.
    #[arg(long)]
    window: Option<i64>,
    /// Window slide in seconds.
    #[arg(long)]
    slide: Option<i64>,
    #[arg(long)]
    shards: Option<usize>,
    /// mmsi_hash or sub_grid.
    #[arg(long)]
    partition: Option<Partitioning>,
    /// GeoJSON areas, overriding the config.
    #[arg(long)]
    areas: Option<PathBuf>,
    /// Ports CSV, overriding the config.
    #[arg(long)]
    ports: Option<PathBuf>,
    /// Also write the accepted positions and report RMSE.
    #[arg(long)]
    keep_raw: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML fleet spec; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    vessels: Option<usize>,
    /// Seconds of data time.
    #[arg(long)]
    duration: Option<i64>,
    #[arg(long)]
    increase_factor: Option<usize>,
    /// Planted scenarios of each CE kind.
    #[arg(long)]
    plants: Option<usize>,
    #[arg(long, default_value = "fleet")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `run --keep-raw`.
    #[arg(long, default_value = "out")]
    run_dir: PathBuf,
    /// Raw positions to compare against instead of the run's accepted ones.
    #[arg(long)]
    positions: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Critical-point CSV as written by `run`.
    input: PathBuf,
    #[arg(long, default_value = "kml")]
    format: ExportFormat,
    /// One file per vessel in the output directory.
    #[arg(long)]
    per_vessel: bool,
    #[arg(long, default_value = "export")]
    out_dir: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Generate(a) => generate_fleet(a),
        Command::Eval(a) => eval(a),
        Command::Export(a) => export(a),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if a.window.is_some() || a.slide.is_some() {
        let w = cfg.replay.window;
        cfg.replay.window = WindowSpec::new(
            a.window.unwrap_or(w.range_omega_s),
            a.slide.unwrap_or(w.slide_beta_s),
        )?;
    }
    if let Some(n) = a.shards {
        cfg.replay.shard_count = n;
    }
    if let Some(p) = a.partition {
        cfg.replay.partitioning = p;
    }
    if a.areas.is_some() {
        cfg.geometry.areas = a.areas;
    }
    if a.ports.is_some() {
        cfg.geometry.ports = a.ports;
    }
    cfg.validate()?;
    let grid = cfg.grid_index()?;
    let out = replay(read_positions(open(&a.input)?), &cfg, grid, a.keep_raw)?;

    fs::create_dir_all(&a.out_dir)?;
    write_csv(
        &out.critical_points,
        create(&a.out_dir, "critical_points.csv")?,
    )?;
    write_ces_jsonl(&out.ces, create(&a.out_dir, "ces.jsonl")?)?;
    let mut m = create(&a.out_dir, "metrics.json")?;
    serde_json::to_writer_pretty(&mut m, &out.metrics)?;
    m.flush()?;
    if let Some(raw) = &out.raw {
        write_positions(raw, create(&a.out_dir, "accepted.csv")?)?;
    }
    print!("{}", render_table(&out.metrics));
    Ok(())
}

fn generate_fleet(a: GenerateArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => toml::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SyntheticFleetSpec::default(),
    };
    if let Some(n) = a.vessels {
        spec.n_vessels = n;
    }
    if let Some(d) = a.duration {
        spec.duration_s = d;
    }
    if let Some(k) = a.increase_factor {
        spec.increase_factor = k;
    }
    if let Some(n) = a.plants {
        spec.plants = PlantCounts {
            suspicious_delays: n,
            rendezvous: n,
            fast_approaches: n,
            pickings: n,
        };
    }
    let fleet = generate(&spec, a.seed)?;

    let dir = &a.out_dir;
    fs::create_dir_all(dir)?;
    write_positions(&fleet.reports, create(dir, "positions.csv")?)?;
    write_ports(&fleet.ports, create(dir, "ports.csv")?)?;
    write_areas(&fleet.areas, create(dir, "areas.geojson")?)?;
    let mut ledger = create(dir, "ledger.json")?;
    serde_json::to_writer_pretty(&mut ledger, &fleet.ledger)?;
    ledger.flush()?;
    fs::write(dir.join("fleet.toml"), toml::to_string(&spec)?)?;
    // ready to use with `run --config`
    let mut cfg = Config::default();
    cfg.geometry.areas = Some("areas.geojson".into());
    cfg.geometry.ports = Some("ports.csv".into());
    fs::write(dir.join("config.toml"), cfg.to_toml())?;

    println!(
        "{} vessels, {} reports, {} ledger entries written to {}",
        fleet.vessel_count,
        fleet.reports.len(),
        fleet.ledger.len(),
        dir.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let synopsis = parse_csv(open(&a.run_dir.join("critical_points.csv"))?)?;
    let raw_path = a
        .positions
        .unwrap_or_else(|| a.run_dir.join("accepted.csv"));
    if !raw_path.exists() {
        bail!(
            "{} not found; rerun with --keep-raw or pass --positions",
            raw_path.display()
        );
    }
    let raw = read_positions(open(&raw_path)?).collect::<Result<Vec<_>, _>>()?;
    let report = serde_json::json!({
        "positions": raw.len(),
        "critical_points": synopsis.len(),
        "compression_ratio": compression_ratio(raw.len() as u64, synopsis.len() as u64).ok(),
        "rmse_m": fleet_rmse(&raw, &synopsis),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let points = parse_csv(open(&a.input)?)?;
    if a.per_vessel {
        let written = write_per_vessel(&a.out_dir, &points, a.format)?;
        println!("{} files written to {}", written.len(), a.out_dir.display());
    } else {
        fs::create_dir_all(&a.out_dir)?;
        let name = format!("critical_points.{}", a.format.extension());
        let mut w = create(&a.out_dir, &name)?;
        a.format.write(&points, &mut w)?;
        w.flush()?;
        println!("{}", a.out_dir.join(name).display());
    }
    Ok(())
}
