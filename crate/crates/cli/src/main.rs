//! `rfol` command-line front end.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfol::diagnostics::{self, DecayTask};
use rfol::io;
use rfol::{datagen, kernels, train_operator, CollocationGrid, Distribution, Error, ErrorClass, KernelSpec, TrainConfig};

#[derive(Parser)]
#[command(name = "rfol", version, about = "Random feature operator learning experiments")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "RFOL_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train and test datasets for a benchmark problem.
    Gen(GenArgs),
    /// Train a random feature operator model.
    Train(TrainArgs),
    /// Relative test error of a model on a dataset.
    Eval(EvalArgs),
    /// Random features against kernel interpolation; CSV columns
    /// `model,params,relative_error,train_seconds`.
    CompareKernel(CompareArgs),
    /// Empirical checks of the theory; emits CSV.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Advection1,
    Advection2,
    Advection3,
}

impl Problem {
    fn name(self) -> &'static str {
        match self {
            Problem::Advection1 => "advection1",
            Problem::Advection2 => "advection2",
            Problem::Advection3 => "advection3",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Binary,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    problem: Problem,
    #[arg(long, default_value_t = 1000)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    /// Grid points (default 40, or 200 for advection3).
    #[arg(long)]
    resolution: Option<usize>,
    /// Seed of the training set; the test set uses `seed + 1`.
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    format: Format,
    /// Advection III field parameter tau.
    #[arg(long, default_value_t = 3.0)]
    tau: f64,
    /// Advection III field exponent.
    #[arg(long, default_value_t = 2.0)]
    power: f64,
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long = "dist", default_value = "cauchy")]
    dist: Distribution,
    #[arg(long, default_value_t = 1e-5)]
    gamma: f64,
    #[arg(long = "N", default_value_t = 5000)]
    n_features: usize,
    #[arg(long, default_value_t = 13)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset file.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Append `model,data,relative_error` to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum KernelKind {
    Rf,
    Rbf,
    Laplace,
    Matern,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Models to fit, in output order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "rf,rbf,laplace,matern")]
    models: Vec<KernelKind>,
    #[arg(long = "rf-dist", default_value = "cauchy")]
    rf_dist: Distribution,
    #[arg(long = "rf-gamma", default_value_t = 1e-5)]
    rf_gamma: f64,
    #[arg(long = "rf-N", default_value_t = 5000)]
    rf_n: usize,
    #[arg(long = "rf-seed", default_value_t = 13)]
    rf_seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    rbf_gamma: f64,
    #[arg(long, default_value_t = 1e-5)]
    laplace_gamma: f64,
    #[arg(long, default_value_t = 223.606797749979)]
    matern_sigma: f64,
    #[arg(long, default_value_t = 2.5)]
    matern_nu: f64,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(subcommand)]
    suite: Suite,
}

#[derive(Subcommand)]
enum Suite {
    /// Gram concentration on equispaced points; columns `trial,deviation,bound,within`.
    Concentration {
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 0.25)]
        eta: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Feature count (default from eta, m and delta).
        #[arg(long = "N")]
        n_features: Option<usize>,
        /// Feature scale (default `(m - 1) ln(m / eta)`).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "dist", default_value = "cauchy")]
        dist: Distribution,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 21)]
        seed: u64,
    },
    /// Error and time against feature count; columns
    /// `n_features,median_error,median_seconds`.
    Decay {
        #[arg(long, value_enum, default_value_t = DecayKind::Advection1)]
        task: DecayKind,
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 31)]
        seed: u64,
        #[arg(long = "dist", default_value = "cauchy")]
        dist: Distribution,
        #[arg(long, default_value_t = 1e-5)]
        gamma: f64,
        #[arg(long, default_value_t = 200)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
        #[arg(long, default_value_t = 40)]
        resolution: usize,
        /// Sample points of the regression task.
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        kernel_gamma: f64,
        #[arg(long, default_value_t = 5)]
        centers: usize,
        #[arg(long, default_value_t = 1000)]
        fine: usize,
    },
    /// Random features against Laplace interpolation; columns `seed,sup_diff,within`.
    KernelLimit {
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long = "N", default_value_t = 200_000)]
        n_features: usize,
        #[arg(long, value_delimiter = ',', default_value = "41,42,43,44,45,46,47,48,49,50")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 200)]
        test_points: usize,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecayKind {
    Advection1,
    Rkhs,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Parameter => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(n: usize) {
    if n > 0 {
        // A second initialization only fails if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_: usize) {}

fn run(cmd: Command) -> rfol::Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::CompareKernel(a) => cmd_compare(a),
        Command::Verify(a) => cmd_verify(a.suite),
    }
}

fn generate(a: &GenArgs, m: usize, resolution: usize, seed: u64) -> rfol::Result<rfol::OperatorDataset> {
    match a.problem {
        Problem::Advection1 => datagen::gen_advection1(m, resolution, seed),
        Problem::Advection2 => datagen::gen_advection2(m, resolution, seed),
        Problem::Advection3 => datagen::gen_advection3_with(
            m,
            resolution,
            seed,
            &datagen::Advection3Params {
                tau: a.tau,
                power: a.power,
            },
        ),
    }
}

fn cmd_gen(a: GenArgs) -> rfol::Result<()> {
    let resolution = a.resolution.unwrap_or(match a.problem {
        Problem::Advection3 => datagen::ADVECTION3_RESOLUTION,
        _ => 40,
    });
    std::fs::create_dir_all(&a.out)?;
    for (split, m, seed) in [("train", a.train, a.seed), ("test", a.test, a.seed.wrapping_add(1))] {
        let ds = generate(&a, m, resolution, seed)?;
        let stem = format!("{}_{split}", a.problem.name());
        let mut config = serde_json::json!({
            "problem": a.problem.name(),
            "split": split,
            "samples": m,
            "resolution": resolution,
            "seed": seed,
        });
        match a.problem {
            Problem::Advection2 => config["ranges"] = serde_json::to_value(datagen::Advection2Ranges::default()).unwrap(),
            Problem::Advection3 => {
                config["tau"] = a.tau.into();
                config["power"] = a.power.into();
            }
            Problem::Advection1 => {}
        }
        let path = match a.format {
            Format::Binary => {
                let p = a.out.join(format!("{stem}.rfol"));
                io::write_dataset(&p, &ds, &config)?;
                p
            }
            Format::Csv => {
                io::export_csv(&a.out, &stem, &ds)?;
                a.out.join(format!("{stem}.csv"))
            }
        };
        println!("wrote {} ({} samples, resolution {resolution}, seed {seed})", path.display(), m);
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> rfol::Result<()> {
    let ds = io::read_dataset(&a.data)?;
    let f = &a.features;
    let cfg = TrainConfig::new(f.dist, f.gamma, f.n_features, f.seed);
    let t0 = Instant::now();
    let model = train_operator(&ds, &cfg)?;
    let secs = t0.elapsed().as_secs_f64();
    io::write_model(&a.model_out, &model)?;
    println!(
        "trained {} samples, N={} gamma={:e} dist={} in {secs:.3} s (jitter {:e}, residual {:.2e})",
        ds.len(),
        f.n_features,
        f.gamma,
        f.dist,
        model.jitter_used,
        model.relative_residual
    );
    println!("train_seconds={secs:.6}");
    Ok(())
}

fn same_grid(a: &CollocationGrid, b: &CollocationGrid) -> bool {
    a.id() == b.id()
}

fn cmd_eval(a: EvalArgs) -> rfol::Result<()> {
    let model = io::read_model(&a.model)?;
    let ds = io::read_dataset(&a.data)?;
    if !same_grid(&model.input_grid, &ds.input_grid) || !same_grid(&model.output_grid, &ds.output_grid) {
        return Err(Error::Data("dataset grids differ from the model's grids".into()));
    }
    let pred = model.predict_batch(&ds.inputs)?;
    let err = diagnostics::relative_error_matrix(&pred, &ds.outputs)?;
    println!("relative_error={err:e}");
    if let Some(path) = a.csv {
        append_csv(&path, "model,data,relative_error", &format!("{},{},{err:e}", a.model.display(), a.data.display()))?;
    }
    Ok(())
}

fn append_csv(path: &Path, header: &str, row: &str) -> rfol::Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{header}")?;
    }
    writeln!(f, "{row}")?;
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> rfol::Result<()> {
    let tr = io::read_dataset(&a.train)?;
    let te = io::read_dataset(&a.test)?;
    if !same_grid(&tr.input_grid, &te.input_grid) || !same_grid(&tr.output_grid, &te.output_grid) {
        return Err(Error::Data("train and test grids differ".into()));
    }
    let mut rows = vec!["model,params,relative_error,train_seconds".to_string()];
    for kind in &a.models {
        let (name, params, pred, secs) = match kind {
            KernelKind::Rf => {
                let cfg = TrainConfig::new(a.rf_dist, a.rf_gamma, a.rf_n, a.rf_seed);
                let t0 = Instant::now();
                let model = train_operator(&tr, &cfg)?;
                let secs = t0.elapsed().as_secs_f64();
                let params = format!("dist={} gamma={:e} N={} seed={}", a.rf_dist, a.rf_gamma, a.rf_n, a.rf_seed);
                ("rf", params, model.predict_batch(&te.inputs)?, secs)
            }
            k => {
                let spec = match k {
                    KernelKind::Rbf => KernelSpec::Rbf { gamma: a.rbf_gamma },
                    KernelKind::Laplace => KernelSpec::Laplace { gamma: a.laplace_gamma },
                    _ => KernelSpec::Matern {
                        sigma: a.matern_sigma,
                        nu: a.matern_nu,
                    },
                };
                let params = match spec {
                    KernelSpec::Rbf { gamma } | KernelSpec::Laplace { gamma } => format!("gamma={gamma:e}"),
                    KernelSpec::Matern { sigma, nu } => format!("sigma={sigma:e} nu={nu}"),
                };
                let t0 = Instant::now();
                let fit = kernels::kernel_fit_multi(&spec, &tr.inputs, &tr.outputs)?;
                let secs = t0.elapsed().as_secs_f64();
                (spec.name(), params, fit.predict_batch(&te.inputs)?, secs)
            }
        };
        let err = diagnostics::relative_error_matrix(&pred, &te.outputs)?;
        rows.push(format!("{name},{params},{err:e},{secs:.6}"));
    }
    emit(&rows, a.out.as_deref())
}

fn emit(rows: &[String], out: Option<&Path>) -> rfol::Result<()> {
    let text = rows.join("\n") + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_verify(suite: Suite) -> rfol::Result<()> {
    match suite {
        Suite::Concentration {
            m,
            eta,
            delta,
            n_features,
            gamma,
            dist,
            trials,
            seed,
        } => {
            if m < 2 {
                return Err(Error::Parameter("need at least 2 points".into()));
            }
            if !(eta > 0.0 && eta < 0.5) {
                return Err(Error::Parameter("eta must lie in (0, 0.5)".into()));
            }
            let n = n_features.unwrap_or_else(|| diagnostics::n_for(eta, m, delta));
            let gamma = gamma.unwrap_or((m as f64 - 1.0) * (m as f64 / eta).ln());
            let grid = CollocationGrid::equispaced_closed(m, 0.0, 1.0)?;
            let r = diagnostics::concentration_check(&grid, dist, gamma, n, trials, delta, seed)?;
            let bound = 2.0 * eta;
            let mut rows = vec!["trial,deviation,bound,within".to_string()];
            for (t, d) in r.deviations.iter().enumerate() {
                rows.push(format!("{t},{d:e},{bound},{}", *d <= bound));
            }
            eprintln!(
                "N={n} gamma={gamma:.4} within={}/{trials} p95={:.4}",
                r.count_within(bound),
                r.p95
            );
            emit(&rows, None)
        }
        Suite::Decay {
            task,
            n_list,
            trials,
            seed,
            dist,
            gamma,
            train,
            test,
            resolution,
            m,
            kernel_gamma,
            centers,
            fine,
        } => {
            let task = match task {
                DecayKind::Advection1 => DecayTask::Advection1 {
                    train,
                    test,
                    resolution,
                    distribution: dist,
                    gamma,
                },
                DecayKind::Rkhs => DecayTask::Rkhs {
                    m,
                    kernel_gamma,
                    n_centers: centers,
                    distribution: dist,
                    gamma,
                    fine,
                },
            };
            let r = diagnostics::decay_study(&task, &n_list, trials, seed)?;
            let mut rows = vec!["n_features,median_error,median_seconds".to_string()];
            for row in &r.rows {
                rows.push(format!("{},{:e},{:.6}", row.n_features, row.median_error, row.median_seconds));
            }
            eprintln!("error_slope={:.4} time_slope={:.4}", r.error_slope, r.time_slope);
            emit(&rows, None)
        }
        Suite::KernelLimit {
            m,
            gamma,
            n_features,
            seeds,
            test_points,
            tol,
        } => {
            let r = diagnostics::kernel_limit_check(m, gamma, n_features, &seeds, test_points)?;
            let mut rows = vec!["seed,sup_diff,within".to_string()];
            for row in &r {
                rows.push(format!("{},{:e},{}", row.seed, row.sup_diff, row.sup_diff <= tol));
            }
            emit(&rows, None)
        }
    }
}
