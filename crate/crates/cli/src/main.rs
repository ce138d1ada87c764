use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nadekit::data::{load_dataset, load_rows, tile_grid, write_pgm, DataKind, Dataset};
use nadekit::eval::{fmt_f64, MeanSe};
use nadekit::registry::{evaluate, parse_recipe, run_recipe, DensityModel, Registry, BENCH_CSV_HEADER};
use nadekit::training::TrainConfig;
use nadekit::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "nade", version, about = "Train, evaluate and sample tractable density estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a model file.
    Train {
        /// Estimator name: nade, rnade, deepnade, mob, chowliu, fvsbn, gaussian.
        #[arg(long)]
        model: String,
        /// Data file, or directory with train/valid/test files.
        #[arg(long)]
        data: PathBuf,
        /// key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra key=value settings applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Data kind; defaults to real for rnade and gaussian, binary otherwise.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Mean log-likelihood with standard error, as CSV on standard output.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Split of a dataset directory: test (default), valid or train.
        #[arg(long, default_value = "test")]
        split: String,
        /// Number of orderings averaged (order-agnostic models only).
        #[arg(long, default_value_t = 1)]
        ensemble: usize,
        /// Also write per-example log-likelihoods here.
        #[arg(long)]
        per_example: Option<PathBuf>,
    },
    /// Draw samples by ancestral sampling.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the samples as a PGM grid of WIDTHxHEIGHT images.
        #[arg(long, value_name = "PATH")]
        pgm: Option<PathBuf>,
        #[arg(long, value_name = "WIDTHxHEIGHT")]
        shape: Option<String>,
    },
    /// Complete missing entries given a 0/1 mask (1 = observed).
    Impute {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a recipe file and print a results table as CSV.
    Bench {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } | Error::Diverged { .. } => EXIT_NUMERIC,
        Error::Config(_) | Error::UnknownModel(_) | Error::Unsupported { .. } | Error::Contract(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_row(x: &[f64], kind: DataKind) -> String {
    x.iter()
        .map(|&v| match kind {
            DataKind::Binary => format!("{}", v as u8),
            DataKind::Real => fmt_f64(v),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn write_rows(path: Option<&Path>, rows: &[Vec<f64>], kind: DataKind) -> Result<(), Error> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&format_row(r, kind));
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text).map_err(io(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rows_for_eval(model: &dyn DensityModel, path: &Path, split: &str) -> Result<Vec<Vec<f64>>, Error> {
    let ds: Dataset = load_dataset(path, model.data_kind())?;
    if ds.dim != model.dim() {
        return Err(Error::Dimension {
            what: "data columns",
            expected: model.dim(),
            got: ds.dim,
        });
    }
    if !path.is_dir() {
        return Ok(ds.train);
    }
    let rows = match split {
        "test" => ds.test,
        "valid" => ds.valid,
        "train" => ds.train,
        other => return Err(Error::Config(format!("unknown split `{other}`"))),
    };
    if rows.is_empty() {
        return Err(Error::Dataset(format!("{} has no {split} rows", path.display())));
    }
    Ok(rows)
}

fn run(cmd: Command) -> Result<(), Error> {
    let registry = Registry::builtin();
    match cmd {
        Command::Train {
            model,
            data,
            config,
            set,
            kind,
            out,
            history,
        } => {
            let mut cfg = match config {
                Some(p) => TrainConfig::load(&p)?,
                None => TrainConfig::default(),
            };
            for kv in &set {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
                cfg.set(k, v)?;
            }
            let kind: DataKind = match kind {
                Some(k) => k.parse()?,
                None if matches!(model.as_str(), "rnade" | "gaussian") => {
                    if cfg.hyper_str("family") == Some("bernoulli") {
                        DataKind::Binary
                    } else {
                        DataKind::Real
                    }
                }
                None => DataKind::Binary,
            };
            registry.get(&model)?;
            let ds = load_dataset(&data, kind)?;
            let trained = match registry.train(&model, &ds, &cfg) {
                Err(Error::Diverged { step, what, history: h }) => {
                    if let Some(p) = &history {
                        fs::write(p, h.to_csv()).map_err(io(p))?;
                    }
                    return Err(Error::Diverged { step, what, history: h });
                }
                other => other?,
            };
            trained.model.to_container().save(&out)?;
            if let (Some(p), Some(h)) = (&history, &trained.history) {
                fs::write(p, h.to_csv()).map_err(io(p))?;
            }
            if let Some(s) = trained.valid_score {
                eprintln!("validation score {}", fmt_f64(s));
            }
        }
        Command::Eval {
            model,
            data,
            split,
            ensemble,
            per_example,
        } => {
            let m = registry.load(&model)?;
            let rows = rows_for_eval(m.as_ref(), &data, &split)?;
            let lls = evaluate(m.as_ref(), &rows, ensemble)?;
            if let Some(bad) = lls.iter().position(|v| v.is_nan()) {
                return Err(Error::NonFinite {
                    step: bad,
                    what: format!("log-likelihood of row {}", bad + 1),
                });
            }
            if let Some(p) = &per_example {
                let text: String = lls.iter().map(|v| fmt_f64(*v) + "\n").collect();
                fs::write(p, text).map_err(io(p))?;
            }
            println!("{}", MeanSe::CSV_HEADER);
            println!("{}", MeanSe::of(&lls).csv_row());
        }
        Command::Sample {
            model,
            n,
            out,
            seed,
            pgm,
            shape,
        } => {
            let m = registry.load(&model)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs = m.sample(n, &mut rng)?;
            write_rows(Some(&out), &xs, m.data_kind())?;
            if let Some(p) = pgm {
                let shape = shape.ok_or_else(|| Error::Config("--pgm needs --shape WIDTHxHEIGHT".into()))?;
                let (w, h) = shape
                    .split_once('x')
                    .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)))
                    .ok_or_else(|| Error::Config(format!("invalid shape `{shape}`")))?;
                if w * h > m.dim() {
                    return Err(Error::Config(format!("shape {w}x{h} exceeds dimension {}", m.dim())));
                }
                let (lo, hi) = match m.data_kind() {
                    DataKind::Binary => (0.0, 1.0),
                    DataKind::Real => xs.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    }),
                };
                let per_row = (n as f64).sqrt().ceil() as usize;
                write_pgm(&p, &tile_grid(&xs, h, w, per_row, lo, hi))?;
            }
        }
        Command::Impute {
            model,
            data,
            mask,
            n,
            seed,
            out,
        } => {
            let m = registry.load(&model)?;
            let rows = load_rows(&data, DataKind::Real)?;
            let masks = load_rows(&mask, DataKind::Binary)?;
            if rows.len() != masks.len() {
                return Err(Error::Dimension {
                    what: "mask rows",
                    expected: rows.len(),
                    got: masks.len(),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut completed = Vec::with_capacity(rows.len() * n);
            for (x, mk) in rows.iter().zip(&masks) {
                let observed: Vec<bool> = mk.iter().map(|&v| v == 1.0).collect();
                completed.extend(m.impute(x, &observed, n, &mut rng)?);
            }
            write_rows(out.as_deref(), &completed, m.data_kind())?;
        }
        Command::Bench { recipe, out } => {
            let text = fs::read_to_string(&recipe).map_err(io(&recipe))?;
            let base = recipe.parent().unwrap_or(Path::new("."));
            let r = parse_recipe(&text, base)?;
            let mut sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(fs::File::create(p).map_err(io(p))?),
                None => Box::new(std::io::stdout()),
            };
            let target = out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            let werr = |e: std::io::Error| Error::Io {
                path: target.clone(),
                source: e,
            };
            writeln!(sink, "{BENCH_CSV_HEADER}").map_err(werr)?;
            let mut failed = None;
            run_recipe(&registry, &r, |row| {
                if let Err(e) = writeln!(sink, "{}", row.csv_row()).and_then(|_| sink.flush()) {
                    failed.get_or_insert(e);
                }
            })?;
            if let Some(e) = failed {
                return Err(werr(e));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
