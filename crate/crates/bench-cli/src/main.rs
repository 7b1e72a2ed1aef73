use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use stlb_bench::{run, RunConfig, CSV_HEADER};

/// Convergence study for the time-space Laplace-Beltrami solver.
///
/// Flags override the values of the configuration file.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// torus, ex2 or ex3.
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// Error table (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-level diagnostics (CSV).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long = "solver.cg-tol")]
    cg_tol: Option<f64>,
    /// jacobi or ic0.
    #[arg(long = "solver.preconditioner")]
    preconditioner: Option<String>,
    /// Coarse mesh (OFF) replacing the built-in one.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Time intervals on the coarsest level.
    #[arg(long)]
    n0: Option<usize>,
    /// degree2 or degree4.
    #[arg(long)]
    quadrature: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the meshes of every level (OFF).
    #[arg(long)]
    export_meshes: Option<PathBuf>,
    /// Recovered gradients of the finest level (CSV).
    #[arg(long)]
    export_recovered: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig, String> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path).map_err(|e| e.to_string())?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(c.benchmark, self.benchmark);
        set!(c.levels, self.levels);
        set!(c.solver.cg_tol, self.cg_tol);
        set!(c.solver.preconditioner, self.preconditioner);
        set!(c.quadrature, self.quadrature);
        set!(c.seed, self.seed);
        c.mesh = self.mesh.or(c.mesh);
        c.n0 = self.n0.or(c.n0);
        c.threads = self.threads.or(c.threads);
        c.output.csv = self.out.or(c.output.csv);
        c.output.diagnostics = self.diagnostics.or(c.output.diagnostics);
        c.output.json = self.json.or(c.output.json);
        c.output.off_dir = self.export_meshes.or(c.output.off_dir);
        c.output.recovered = self.export_recovered.or(c.output.recovered);
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = match Cli::parse().into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(threads) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let output = match run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if config.output.csv.is_none() {
        println!("{}", CSV_HEADER.join(","));
        let mut buf = Vec::new();
        if stlb_bench::write_table(&output.rows, &mut buf).is_ok() {
            print!("{}", String::from_utf8_lossy(&buf).lines().skip(1).map(|l| format!("{l}\n")).collect::<String>());
        }
    }
    if output.violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        for v in &output.violations {
            eprintln!("threshold violated: {v}");
        }
        ExitCode::from(2)
    }
}
