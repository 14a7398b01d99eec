//! `mhermite`: fit, evaluate and benchmark tangent-space Hermite interpolants
//! on SO(3) and the unit sphere.
//!
//! Exit codes: 0 on success, 1 on numerical failure (degenerate fits,
//! non-converging base point), 2 on usage or parse errors.

mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use manifold_hermite::experiments::{
    convergence_study, run_case, table_case, BenchmarkCase, GridKind, SamplingPlan, TestGrid,
    TestMap,
};
use manifold_hermite::thi::{self, AnyModel, ThiError};

use io::CliManifold;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Parse {
                path,
                line,
                message,
            } => {
                write!(f, "{path}:{line}: {message}")
            }
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ThiError> for CliError {
    fn from(err: ThiError) -> Self {
        match &err {
            ThiError::BaseNonConvergence { .. } | ThiError::Geometry(_) | ThiError::Fit(_) => {
                CliError::Numerical(err.to_string())
            }
            _ => CliError::Usage(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ManifoldArg {
    So3,
    S2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridArg {
    Uniform,
    Cheb1,
    Cheb2,
}

impl From<GridArg> for GridKind {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Uniform => GridKind::Uniform,
            GridArg::Cheb1 => GridKind::ChebyshevFirst,
            GridArg::Cheb2 => GridKind::ChebyshevSecond,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mhermite",
    version,
    about = "Hermite interpolation of SO(3)- and sphere-valued data with an Arnoldi-stabilized polynomial core"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run benchmark tables and write one report file per table.
    Bench {
        /// Comma-separated table ids in 1..8.
        #[arg(long, value_delimiter = ',', required = true)]
        tables: Vec<u8>,
        /// Output directory for the report files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Override the sampling domain: two endpoints a b.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        domain: Option<Vec<f64>>,
        /// Step for the finite-difference derivative error metrics.
        #[arg(long)]
        fd_step: Option<f64>,
        /// Measure errors on 1600 seeded random points instead of the 40x40 grid.
        #[arg(long)]
        random_test_points: bool,
        /// Seed for --random-test-points.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a model from a sample file and write it as JSON.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_enum)]
        manifold: ManifoldArg,
        /// Total degree of the polynomial basis.
        #[arg(long)]
        degree: u32,
        /// Fit from function values only, ignoring tangent blocks.
        #[arg(long)]
        no_derivatives: bool,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Evaluate a saved model at query points.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit the first-derivative tangent blocks per query.
        #[arg(long)]
        with_derivatives: bool,
    },
    /// Error decay across polynomial degrees on a fixed sampling plan.
    Convergence {
        #[arg(long, value_enum)]
        manifold: ManifoldArg,
        /// Test function id; defaults to the manifold's smooth case.
        #[arg(long)]
        test_fn: Option<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4, 5, 6])]
        degrees: Vec<u32>,
        #[arg(long, value_enum, default_value_t = GridArg::Uniform)]
        grid: GridArg,
        #[arg(long, default_value_t = 15)]
        n_per_axis: usize,
        #[arg(long, num_args = 2, value_names = ["A", "B"], default_values_t = [-0.5, 0.5])]
        domain: Vec<f64>,
        #[arg(long)]
        no_derivatives: bool,
        #[arg(long)]
        fd_step: Option<f64>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mhermite: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Bench {
            tables,
            out,
            format,
            domain,
            fd_step,
            random_test_points,
            seed,
        } => cmd_bench(
            &tables,
            &out,
            format,
            domain,
            fd_step,
            random_test_points,
            seed,
        ),
        Command::Fit {
            samples,
            manifold,
            degree,
            no_derivatives,
            out,
        } => cmd_fit(&samples, manifold, degree, !no_derivatives, &out),
        Command::Eval {
            model,
            queries,
            out,
            with_derivatives,
        } => cmd_eval(&model, &queries, out.as_deref(), with_derivatives),
        Command::Convergence {
            manifold,
            test_fn,
            degrees,
            grid,
            n_per_axis,
            domain,
            no_derivatives,
            fd_step,
            out,
            format,
        } => cmd_convergence(
            manifold,
            test_fn.as_deref(),
            &degrees,
            grid,
            n_per_axis,
            &domain,
            !no_derivatives,
            fd_step,
            out.as_deref(),
            format,
        ),
    }
}

fn parse_domain(domain: &[f64]) -> Result<[f64; 2], CliError> {
    if domain.len() != 2 || domain[0] >= domain[1] {
        return Err(CliError::Usage(format!(
            "--domain needs two increasing endpoints, got {domain:?}"
        )));
    }
    Ok([domain[0], domain[1]])
}

fn write_output(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn cmd_bench(
    tables: &[u8],
    out_dir: &Path,
    format: FormatArg,
    domain: Option<Vec<f64>>,
    fd_step: Option<f64>,
    random_test_points: bool,
    seed: u64,
) -> Result<(), CliError> {
    let mut cases: Vec<(u8, BenchmarkCase)> = Vec::new();
    for &table in tables {
        let mut case = table_case(table)
            .ok_or_else(|| CliError::Usage(format!("table id {table} out of range 1..8")))?;
        if let Some(domain) = &domain {
            case.plan.domain = parse_domain(domain)?;
        }
        if let Some(h) = fd_step {
            if h <= 0.0 {
                return Err(CliError::Usage(format!(
                    "--fd-step must be positive, got {h}"
                )));
            }
            case.fd_step = h;
        }
        if random_test_points {
            case.test_points = TestGrid::Random { count: 1600, seed };
        }
        cases.push((table, case));
    }
    if !out_dir.as_os_str().is_empty() && !out_dir.exists() {
        fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    }
    for (table, case) in &cases {
        let report = run_case(case)?;
        let (content, ext) = match format {
            FormatArg::Csv => (report.to_csv(), "csv"),
            FormatArg::Json => (report.to_json(), "json"),
        };
        let path = out_dir.join(format!("table{table}.{ext}"));
        write_output(&path, &content)?;
        println!(
            "table {table}: avg_err={:e} max_err={:e} fd_d1={:e} fd_d2={:e} rank={}/{} offline={:.3}s -> {}",
            report.avg_err,
            report.max_err,
            report.fd_err_d1,
            report.fd_err_d2,
            report.rank,
            report.basis_size,
            report.offline_time_s,
            path.display()
        );
    }
    Ok(())
}

fn cmd_fit(
    samples_path: &Path,
    manifold: ManifoldArg,
    degree: u32,
    with_derivatives: bool,
    out: &Path,
) -> Result<(), CliError> {
    let model = match manifold {
        ManifoldArg::So3 => {
            fit_typed::<manifold_hermite::manifolds::So3>(samples_path, degree, with_derivatives)?
        }
        ManifoldArg::S2 => fit_typed::<manifold_hermite::manifolds::Sphere>(
            samples_path,
            degree,
            with_derivatives,
        )?,
    };
    write_output(out, &model.to_json())?;
    println!(
        "fitted {} model (degree {degree}) -> {}",
        model.manifold(),
        out.display()
    );
    Ok(())
}

fn fit_typed<M: CliManifold>(
    samples_path: &Path,
    degree: u32,
    with_derivatives: bool,
) -> Result<AnyModel, CliError> {
    let samples = io::read_samples::<M>(samples_path, with_derivatives)?;
    let model = thi::fit(&samples, degree, with_derivatives)?;
    Ok(M::into_any(model))
}

fn cmd_eval(
    model_path: &Path,
    queries_path: &Path,
    out: Option<&Path>,
    with_derivatives: bool,
) -> Result<(), CliError> {
    let text = fs::read_to_string(model_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", model_path.display())))?;
    let model = AnyModel::from_json(&text).map_err(|e| CliError::Parse {
        path: model_path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    let queries = io::read_queries(queries_path)?;
    let rows = match &model {
        AnyModel::So3(m) => eval_typed(m, &queries, with_derivatives)?,
        AnyModel::Sphere(m) => eval_typed(m, &queries, with_derivatives)?,
    };
    let content = io::format_predictions(&rows);
    match out {
        Some(path) => write_output(path, &content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn eval_typed<M: CliManifold>(
    model: &thi::ThiModel<M>,
    queries: &[Vec<f64>],
    with_derivatives: bool,
) -> Result<Vec<Vec<f64>>, CliError> {
    if with_derivatives {
        let results = thi::eval_with_derivatives(model, queries)?;
        Ok(results
            .into_iter()
            .map(|(point, tangents)| {
                let mut row = M::point_coords(&point);
                for t in &tangents {
                    row.extend(M::tangent_to_ambient(&point, t));
                }
                row
            })
            .collect())
    } else {
        let points = thi::eval(model, queries)?;
        Ok(points.iter().map(|p| M::point_coords(p)).collect())
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_convergence(
    manifold: ManifoldArg,
    test_fn: Option<&str>,
    degrees: &[u32],
    grid: GridArg,
    n_per_axis: usize,
    domain: &[f64],
    with_derivatives: bool,
    fd_step: Option<f64>,
    out: Option<&Path>,
    format: FormatArg,
) -> Result<(), CliError> {
    if degrees.is_empty() || degrees.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(format!(
            "--degrees must be strictly increasing, got {degrees:?}"
        )));
    }
    let map = match test_fn {
        Some(name) => TestMap::parse(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown test function {name:?}; expected so3-simple, so3-oscillatory, helicoid-gauss or helicoid-gauss-2x"
            ))
        })?,
        None => match manifold {
            ManifoldArg::So3 => TestMap::parse("so3-simple").unwrap(),
            ManifoldArg::S2 => TestMap::parse("helicoid-gauss").unwrap(),
        },
    };
    let manifold_name = match manifold {
        ManifoldArg::So3 => "so3",
        ManifoldArg::S2 => "s2",
    };
    if map.manifold() != manifold_name {
        return Err(CliError::Usage(format!(
            "test function {} lives on {}, not {manifold_name}",
            map.name(),
            map.manifold()
        )));
    }
    if n_per_axis == 0 {
        return Err(CliError::Usage("--n-per-axis must be at least 1".into()));
    }

    let mut case = BenchmarkCase::new(
        map,
        SamplingPlan::new(grid.into(), n_per_axis, parse_domain(domain)?),
        degrees[0],
        with_derivatives,
    );
    if let Some(h) = fd_step {
        if h <= 0.0 {
            return Err(CliError::Usage(format!(
                "--fd-step must be positive, got {h}"
            )));
        }
        case.fd_step = h;
    }
    let curve = convergence_study(&case, degrees)?;

    let content = match format {
        FormatArg::Csv => {
            let mut s = String::from("degree,samples,avg_err\n");
            for p in &curve {
                s.push_str(&format!("{},{},{}\n", p.degree, p.sample_count, p.avg_err));
            }
            s
        }
        FormatArg::Json => {
            serde_json::to_string_pretty(&curve).expect("curve serialization cannot fail")
        }
    };
    match out {
        Some(path) => write_output(path, &content)?,
        None => print!("{content}"),
    }
    Ok(())
}
