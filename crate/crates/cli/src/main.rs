//! `vsense` command line: synthesize data, fit a bundle, predict damage,
//! classify maneuvers and summarize bundles.
//!
//! Exit codes: 0 ok, 2 data error, 3 configuration error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use vsense::features::TransformKind;
use vsense::ingest::{load_dir, write_file};
use vsense::pipeline::{self, Bundle, RunConfig};
use vsense::synth::{generate_dataset, SynthConfig};
use vsense::Error;

#[derive(Parser, Debug)]
#[command(name = "vsense", version, about = "Virtual strain sensing from accelerations")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic labeled corpus (CSV + sidecars).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        files_per_class: Option<usize>,
        #[arg(long)]
        maneuver_files_per_class: Option<usize>,
        /// JSON synth config; its keys override the flags.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit standardizer, PCA, damage regressors and classifiers.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Predict damage from accelerations and score it against measured strain.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify underground, speed and rider of labeled held-out files.
    Classify {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a bundle: variance ledger, split, regressors, feature layout.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TransformArg {
    Scattering,
    Fft,
}

#[derive(Args, Debug)]
struct RunFlags {
    #[arg(long, value_enum)]
    transform: Option<TransformArg>,
    #[arg(long)]
    j: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    l_seq: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    strain_threshold: Option<f64>,
    #[arg(long)]
    woehler_k: Option<f64>,
    #[arg(long)]
    woehler_capacity: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    no_stratify: bool,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    regression_axes: Option<usize>,
    #[arg(long)]
    rows_per_coefficient: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reference_file: Option<String>,
    /// JSON run config; its keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let d = RunConfig::default();
        let cfg = RunConfig {
            transform: match self.transform {
                Some(TransformArg::Fft) => TransformKind::Fft,
                Some(TransformArg::Scattering) => TransformKind::Scattering,
                None => d.transform,
            },
            j: self.j.unwrap_or(d.j),
            q: self.q.unwrap_or(d.q),
            t: self.t.or(d.t),
            l_seq: self.l_seq.unwrap_or(d.l_seq),
            theta: self.theta.unwrap_or(d.theta),
            strain_threshold: self.strain_threshold.unwrap_or(d.strain_threshold),
            woehler_k: self.woehler_k.unwrap_or(d.woehler_k),
            woehler_capacity: self.woehler_capacity.unwrap_or(d.woehler_capacity),
            train_fraction: self.train_fraction.unwrap_or(d.train_fraction),
            stratify_by_rider: !self.no_stratify,
            knn_k: self.knn_k.unwrap_or(d.knn_k),
            regression_axes: self.regression_axes.or(d.regression_axes),
            rows_per_coefficient: self.rows_per_coefficient.unwrap_or(d.rows_per_coefficient),
            seed: self.seed.unwrap_or(d.seed),
            reference_file: self.reference_file.clone().or(d.reference_file),
        };
        match &self.config {
            Some(path) => overlay(&cfg, path),
            None => Ok(cfg),
        }
    }
}

/// Applies the keys of a JSON config file on top of `base`.
fn overlay<T: serde::Serialize + serde::de::DeserializeOwned>(
    base: &T,
    path: &Path,
) -> Result<T, Error> {
    let bad = |m: String| Error::InvalidConfig(format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let file: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let Value::Object(keys) = file else {
        return Err(bad("expected a JSON object".into()));
    };
    let mut merged = serde_json::to_value(base).map_err(|e| bad(e.to_string()))?;
    let target = merged.as_object_mut().expect("configs serialize to objects");
    for (k, v) in keys {
        target.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| bad(e.to_string()))
}

fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_file(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth {
            out,
            seed,
            duration_s,
            files_per_class,
            maneuver_files_per_class,
            config,
        } => {
            let d = SynthConfig::default();
            let mut cfg = SynthConfig {
                seed: seed.unwrap_or(d.seed),
                duration_s: duration_s.unwrap_or(d.duration_s),
                files_per_class: files_per_class.unwrap_or(d.files_per_class),
                maneuver_files_per_class: maneuver_files_per_class
                    .unwrap_or(d.maneuver_files_per_class),
                ..d
            };
            if let Some(path) = config {
                cfg = overlay(&cfg, &path)?;
            }
            let files = generate_dataset(&cfg)?;
            create_dir(&out)?;
            for f in &files {
                write_file(f, &out)?;
            }
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Fit { data, bundle, run } => {
            let cfg = run.resolve()?;
            cfg.validate()?;
            cfg.build_transform()?;
            let files = load_dir(&data)?;
            let fitted = pipeline::fit(&files, &cfg)?;
            fitted.save(&bundle)?;
            println!(
                "bundle {}: {} PC axes ({:.4} of variance), channels {:?}, config {}",
                bundle.display(),
                fitted.pca.n_axes(),
                fitted.pca.retained_share(),
                fitted.strain_channels,
                fitted.config_hash
            );
        }
        Command::Predict { bundle, data, out } => {
            let bundle = Bundle::load(&bundle)?;
            let files = load_dir(&data)?;
            let prediction = pipeline::predict(&bundle, &files)?;
            create_dir(&out)?;
            pipeline::write_json(&prediction.report, &out.join("predict_report.json"))?;
            pipeline::write_predictions_csv(
                &prediction.records,
                create_file(&out.join("predictions.csv"))?,
            )?;
            vsense::fatigue::write_damage_csv(
                &pipeline::damage_records(&prediction.records),
                create_file(&out.join("damage.csv"))?,
            )?;
            for g in &prediction.report.groups {
                for c in &g.channels {
                    println!(
                        "{:12} {:8} R2 {:>8} r_FDS {:>8}",
                        g.group,
                        c.channel,
                        fmt_opt(c.r2),
                        fmt_opt(c.fds_ratio)
                    );
                }
            }
        }
        Command::Classify { bundle, data, out } => {
            let bundle = Bundle::load(&bundle)?;
            let files = load_dir(&data)?;
            let report = pipeline::classify(&bundle, &files)?;
            create_dir(&out)?;
            pipeline::write_json(&report, &out.join("classify_report.json"))?;
            for t in &report.tasks {
                println!("{:12} accuracy {:.4}", t.task, t.accuracy);
            }
        }
        Command::Report { bundle, out } => {
            let bundle = Bundle::load(&bundle)?;
            create_dir(&out)?;
            pipeline::write_json(&pipeline::summarize(&bundle), &out.join("summary.json"))?;
            let mut w = csv::Writer::from_writer(create_file(&out.join("layout.csv"))?);
            w.write_record(["position", "channel", "order", "lambda1", "lambda2", "time", "bin"])?;
            let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
            for e in bundle.layout.table() {
                w.write_record([
                    e.position.to_string(),
                    e.channel,
                    e.order.to_string(),
                    opt(e.lambda1),
                    opt(e.lambda2),
                    opt(e.time),
                    opt(e.bin),
                ])?;
            }
            w.flush().map_err(|e| Error::Io {
                path: out.join("layout.csv"),
                source: e,
            })?;
            println!("wrote summary.json and layout.csv to {}", out.display());
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 3 } else { 2 })
        }
    }
}
