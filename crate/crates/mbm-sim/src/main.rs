//! Command-line front end: BER measurements, sweeps, and the union
//! bound, emitted as CSV.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mbm_sim::analysis::union_bound_ber;
use mbm_sim::channel::sigma_from_snr;
use mbm_sim::config::{parse_f64_list, parse_usize_list, Settings};
use mbm_sim::harness::{csv_header, run_sweep, BerRecord, ExperimentSpec, SweepGrid};
use mbm_sim::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mbm-sim",
    about = "Link-level BER simulator for multiuser media-based modulation on the massive-MIMO uplink",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure BER at a single SNR point.
    Simulate(CommonArgs),
    /// Measure BER over an SNR grid.
    SweepSnr(CommonArgs),
    /// Measure BER over a receive-antenna grid at fixed SNR.
    SweepNr(CommonArgs),
    /// Evaluate the analytical union bound over an SNR grid.
    Bound(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key-value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transmission scheme: mbm, cm, sm, or gsm.
    #[arg(long)]
    scheme: Option<String>,
    /// Detector: ml, sphere, mmse, alg1-omp, alg1-cosamp, or alg1-sp.
    #[arg(long)]
    detector: Option<String>,
    /// Number of uplink users K.
    #[arg(long)]
    k: Option<usize>,
    /// Receive antennas at the base station.
    #[arg(long)]
    nr: Option<usize>,
    /// RF mirrors per user (MBM).
    #[arg(long)]
    mrf: Option<usize>,
    /// Transmit antennas per user (SM/GSM).
    #[arg(long)]
    nt: Option<usize>,
    /// Transmit RF chains per user (GSM).
    #[arg(long)]
    nrf: Option<usize>,
    /// Modulation alphabet: bpsk, qamN, or pskN.
    #[arg(long)]
    alphabet: Option<String>,
    /// SNR in dB (simulate, sweep-nr).
    #[arg(long)]
    snr_db: Option<f64>,
    /// Comma-separated SNR grid in dB (sweep-snr, bound).
    #[arg(long)]
    snr_grid: Option<String>,
    /// Comma-separated receive-antenna grid (sweep-nr).
    #[arg(long)]
    nr_grid: Option<String>,
    /// Master seed for reproducible Monte Carlo.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop a point after this many bit errors.
    #[arg(long)]
    min_errors: Option<u64>,
    /// Hard cap on channel uses per point.
    #[arg(long)]
    max_uses: Option<u64>,
    /// SNR convention: aggregate or per_user.
    #[arg(long)]
    snr_convention: Option<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> Result<Settings> {
        let cli = Settings {
            scheme: self.scheme.clone(),
            detector: self.detector.clone(),
            users: self.k,
            n_r: self.nr,
            m_rf: self.mrf,
            n_t: self.nt,
            n_rf: self.nrf,
            alphabet: self.alphabet.clone(),
            snr_db: self.snr_db,
            snr_grid: self.snr_grid.as_deref().map(parse_f64_list).transpose()?,
            nr_grid: self.nr_grid.as_deref().map(parse_usize_list).transpose()?,
            seed: self.seed,
            min_errors: self.min_errors,
            max_uses: self.max_uses,
            snr_convention: self.snr_convention.clone(),
            out: self.out.as_ref().map(|p| p.display().to_string()),
        };
        Ok(match &self.config {
            Some(path) => Settings::from_config_file(path)?.merged_with(cli),
            None => cli,
        })
    }
}

fn writer_for(settings: &Settings) -> Result<Box<dyn Write>> {
    match &settings.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| Error::Config(format!("cannot create {path}: {e}")))?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn emit_record(out: &mut dyn Write, record: &BerRecord) {
    writeln!(out, "{}", record.to_csv_row()).expect("write CSV row");
    out.flush().expect("flush CSV");
    eprintln!(
        "{} {} snr={} dB n_r={}: ber={:.3e} ({} errors / {} uses, {:.1}s)",
        record.scheme,
        record.detector,
        record.snr_db,
        record.n_r,
        record.ber,
        record.bit_errors,
        record.channel_uses,
        record.wall_time_s
    );
}

fn run_ber(settings: &Settings, grid: SweepGrid) -> Result<()> {
    let spec = ExperimentSpec {
        config: settings.scheme_config()?,
        detector: settings.detector()?,
        grid,
        stop: settings.stop_rule(),
        master_seed: settings.seed(),
        convention: settings.convention()?,
    };
    let mut out = writer_for(settings)?;
    writeln!(out, "{}", csv_header()).expect("write CSV header");
    run_sweep(&spec, |record| emit_record(out.as_mut(), record))?;
    Ok(())
}

fn run_bound(settings: &Settings) -> Result<()> {
    let config = settings.scheme_config()?;
    let convention = settings.convention()?;
    let grid = settings
        .snr_grid
        .clone()
        .ok_or_else(|| Error::Config("missing required setting: snr-grid".into()))?;
    let mut out = writer_for(settings)?;
    writeln!(out, "snr_db,bound").expect("write CSV header");
    for snr_db in grid {
        let sigma2 = sigma_from_snr(snr_db, &config, convention).sigma2;
        let bound = union_bound_ber(&config, sigma2)?;
        writeln!(out, "{snr_db},{bound:e}").expect("write CSV row");
        out.flush().expect("flush CSV");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => {
            let settings = args.settings()?;
            let snr = settings
                .snr_db
                .ok_or_else(|| Error::Config("missing required setting: snr-db".into()))?;
            run_ber(&settings, SweepGrid::Snr(vec![snr]))
        }
        Command::SweepSnr(args) => {
            let settings = args.settings()?;
            let grid = settings
                .snr_grid
                .clone()
                .ok_or_else(|| Error::Config("missing required setting: snr-grid".into()))?;
            run_ber(&settings, SweepGrid::Snr(grid))
        }
        Command::SweepNr(args) => {
            let settings = args.settings()?;
            let snr_db = settings
                .snr_db
                .ok_or_else(|| Error::Config("missing required setting: snr-db".into()))?;
            let grid = settings
                .nr_grid
                .clone()
                .ok_or_else(|| Error::Config("missing required setting: nr-grid".into()))?;
            run_ber(&settings, SweepGrid::ReceiveAntennas { snr_db, grid })
        }
        Command::Bound(args) => run_bound(&args.settings()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Budget(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
