use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nhep_core::config::PipelineConfig;
use nhep_core::eval::{sweep_confidence_window, LabeledTimeline};
use nhep_core::io;
use nhep_core::pipeline::{self, verdicts_of, TrainedPipeline};
use nhep_core::signal::{derive_bradycardia_onsets, detect_r_peaks, rr_series, BeatSeries};
use nhep_core::synth::{self, DriftKind, SynthSpec};
use nhep_core::{plot, Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "nhep", version, about = "Unsupervised early warning for heart-rate events")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config (TOML). Flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Confidence window size.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    window_len: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    #[arg(long, global = true)]
    d_hidden: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Accept artifacts built with a different config.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording with injected events.
    Synth(SynthArgs),
    /// Train the auto-encoder and calibrate normal clusters.
    Train(DataArgs),
    /// Stream the test span through the trained pipeline.
    Detect {
        #[command(flatten)]
        data: DataArgs,
        /// Directory holding the training artifacts.
        #[arg(long)]
        artifacts: PathBuf,
    },
    /// Score a detection log against event onsets.
    Eval {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        alarms: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Also score the reconstruction-error baseline with these artifacts' threshold.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Re-run the alarm engine for several confidence-window sizes.
    Sweep {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5, 6, 7, 8])]
        ks: Vec<usize>,
    },
    /// Draw the cluster timeline of a detection log.
    Plot {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        events: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Beat times CSV (`beat_time_sec`).
    #[arg(long, conflicts_with = "ecg", required_unless_present = "ecg")]
    beats: Option<PathBuf>,
    /// ECG CSV (`t_sec,mv`); beats are found by R-peak detection.
    #[arg(long)]
    ecg: Option<PathBuf>,
    /// Event onsets CSV (`onset_sec`). Derived from the heart-rate rule when absent.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    SpectralShift,
    VarianceRamp,
    Spike,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec (TOML); flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    duration_sec: Option<f64>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long)]
    lead_sec: Option<f64>,
    #[arg(long)]
    magnitude: Option<f64>,
    /// Leave this many seconds at the start free of events.
    #[arg(long)]
    quiet_sec: Option<f64>,
    /// Also render an ECG at this sample rate.
    #[arg(long)]
    ecg_rate: Option<f64>,
    #[arg(long)]
    snr_db: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Incompatible => 4,
            })
        }
    }
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.k {
        cfg.k = v;
    }
    if let Some(v) = g.eps {
        cfg.cluster.eps = v;
    }
    if let Some(v) = g.mu {
        cfg.cluster.mu = v;
    }
    if let Some(v) = g.lambda {
        cfg.cluster.lambda = v;
    }
    if let Some(v) = g.window_len {
        cfg.window_len = v;
    }
    if let Some(v) = g.stride {
        cfg.stride = v;
    }
    if let Some(v) = g.d_hidden {
        cfg.d_hidden = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn load_beats(data: &DataArgs) -> Result<BeatSeries> {
    match (&data.beats, &data.ecg) {
        (Some(p), _) => rr_series(&io::read_beats_csv(io::open(p)?)?),
        (None, Some(p)) => detect_r_peaks(&io::read_ecg_csv(io::open(p)?)?),
        (None, None) => Err(Error::Config("one of --beats or --ecg is required".into())),
    }
}

fn load_onsets(data: &DataArgs, beats: &BeatSeries, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    match &data.events {
        Some(p) => io::read_onsets_csv(io::open(p)?),
        None => Ok(derive_bradycardia_onsets(beats, cfg.hr_threshold_bpm, cfg.brady_min_beats)),
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let out = &g.out_dir;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, g),
        Command::Train(data) => {
            let cfg = load_config(g)?;
            let beats = load_beats(data)?;
            let onsets = load_onsets(data, &beats, &cfg)?;
            let trained = pipeline::train_pipeline(&beats, &onsets, &cfg)?;
            trained.save(out)?;
            eprintln!(
                "trained on {} windows, final loss {:.5}, {} normal cluster(s)",
                trained.normal.normal.training_windows,
                trained.epoch_losses.last().copied().unwrap_or(f64::NAN),
                trained.normal.normal.ids.len()
            );
            Ok(())
        }
        Command::Detect { data, artifacts } => {
            let cfg = load_config(g)?;
            let trained = TrainedPipeline::load(artifacts, &cfg, g.force)?;
            let beats = load_beats(data)?;
            let det = pipeline::detect(&beats, &trained, &cfg)?;
            write(out, "windows.csv", &io::write_windows_csv(&det.records))?;
            write(out, "alarms.csv", &io::write_alarms_csv(&det.alarms))?;
            write(out, "snapshot.csv", &io::write_snapshot_csv(&det.snapshot))?;
            eprintln!("{} windows, {} alarms", det.records.len(), det.alarms.len());
            Ok(())
        }
        Command::Eval { windows, alarms, events, artifacts } => {
            let cfg = load_config(g)?;
            let records = io::read_windows_csv(io::open(windows)?)?;
            let alarms = io::read_alarms_csv(io::open(alarms)?)?;
            let onsets = io::read_onsets_csv(io::open(events)?)?;
            let report = pipeline::evaluate_detection(&records, &alarms, &onsets, &cfg);
            if report.auc.is_none() {
                eprintln!("warning: AUC undefined (decision points cover a single class)");
            }
            write(out, "report.json", &io::write_report_json(&report))?;
            let times: Vec<f64> = records.iter().map(|r| r.time_sec).collect();
            let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
            let table = LabeledTimeline::build(&times, &scores, &alarms, &onsets, &cfg.eval);
            write(out, "decisions.csv", &io::write_decision_table_csv(&table.points))?;
            if let Some(dir) = artifacts {
                let trained = TrainedPipeline::load(dir, &cfg, g.force)?;
                let base = pipeline::evaluate_baseline(&records, trained.normal.baseline_threshold, &onsets, &cfg);
                write(out, "baseline_report.json", &io::write_report_json(&base))?;
            }
            Ok(())
        }
        Command::Sweep { windows, events, ks } => {
            let cfg = load_config(g)?;
            let records = io::read_windows_csv(io::open(windows)?)?;
            let onsets = io::read_onsets_csv(io::open(events)?)?;
            let reports = sweep_confidence_window(ks, &verdicts_of(&records), cfg.threshold, &onsets, &cfg.eval)?;
            let mut csv = String::from("k,recall,specificity,auc,mean_lead_min\n");
            let cell = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            for (k, r) in &reports {
                csv.push_str(&format!(
                    "{k},{},{},{},{}\n",
                    cell(r.recall),
                    cell(r.specificity),
                    cell(r.auc),
                    cell(r.mean_lead_min)
                ));
            }
            write(out, "sweep.csv", &csv)?;
            write(out, "sweep.json", &io::write_sweep_json(&reports))?;
            write(out, "sweep.svg", &plot::sweep_svg(&reports))
        }
        Command::Plot { windows, events } => {
            let cfg = load_config(g)?;
            let records = io::read_windows_csv(io::open(windows)?)?;
            let onsets = io::read_onsets_csv(io::open(events)?)?;
            write(out, "timeline.svg", &plot::timeline_svg(&records, &onsets, cfg.eval.pre_event_span))
        }
    }
}

fn cmd_synth(a: &SynthArgs, g: &Global) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            SynthSpec::from_toml_str(&text)?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = g.seed {
        spec.seed = v;
    }
    if let Some(v) = a.duration_sec {
        spec.duration_sec = v;
    }
    if let Some(v) = a.events {
        spec.event_count = v;
    }
    if let Some(p) = a.profile {
        spec.drift.kind = match p {
            Profile::SpectralShift => DriftKind::SpectralShift,
            Profile::VarianceRamp => DriftKind::VarianceRamp,
            Profile::Spike => DriftKind::Spike,
        };
    }
    if let Some(v) = a.lead_sec {
        spec.drift.lead_sec = v;
    }
    if let Some(v) = a.magnitude {
        spec.drift.magnitude = v;
    }
    if let Some(v) = a.quiet_sec {
        spec.quiet_lead_in_sec = v;
    }
    let data = synth::generate(&spec)?;
    let out = &g.out_dir;
    write(out, "rr.csv", &io::write_beats_csv(&data.beat_times))?;
    write(out, "events.csv", &io::write_onsets_csv(&data.onsets))?;
    write(out, "drift_intervals.csv", &io::write_intervals_csv(&data.drift_intervals))?;
    if let Some(fs_hz) = a.ecg_rate {
        let ecg = synth::ecg_from_beats(&data.beat_times, spec.duration_sec, fs_hz, a.snr_db, spec.seed);
        write(out, "ecg.csv", &io::write_ecg_csv(&ecg))?;
    }
    eprintln!("{} beats, {} events", data.beat_times.len(), data.onsets.len());
    Ok(())
}
