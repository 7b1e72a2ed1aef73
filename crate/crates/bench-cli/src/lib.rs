//! Convergence-study harness: runs a benchmark over a ladder of refined
//! meshes (time step halved per level), writes the error table and
//! per-level diagnostics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use stlb::analysis::{observed_orders, ErrorEvaluator, ErrorLevel, ErrorReport};
use stlb::benchmarks::{BenchmarkName, BenchmarkProblem, MeshSource};
use stlb::metric::{LiftedQuadrature, QuadratureKind};
use stlb::recovery::{ppr_time_field, pppr_field_with, SurfaceRecovery};
use stlb::solver::{equation_residual, solve_system, space_time_load, PreconditionerKind, SolverOptions, SpatialOperators, TimeTransform};
use stlb::surface::{off, SurfaceMesh};
use stlb::timedisc::{compatibility_residual_with, TimeGrid};

/// Column names of the error table, in order.
pub const CSV_HEADER: [&str; 13] = [
    "level", "N_v", "N", "h", "tau", "e", "order_e", "De", "order_De", "De2T", "order_De2T", "De2M", "order_De2M",
];

/// Failure of a run, with the level it happened on when known.
#[derive(Debug)]
pub struct RunError {
    pub level: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.level {
            Some(l) => write!(f, "level {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for RunError {}

fn config_error(message: impl Into<String>) -> RunError {
    RunError {
        level: None,
        message: message.into(),
    }
}

fn at_level<E: std::fmt::Display>(level: usize) -> impl Fn(E) -> RunError {
    move |e| RunError {
        level: Some(level),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cg_tol: f64,
    pub cg_max_iter_factor: f64,
    pub preconditioner: String,
    pub time_transform: String,
    pub compat_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            cg_tol: o.cg_tol,
            cg_max_iter_factor: o.cg_max_iter_factor,
            preconditioner: "ic0".into(),
            time_transform: "analytic".into(),
            compat_tol: o.compat_tol,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Error table.
    pub csv: Option<PathBuf>,
    /// Per-level timings, solver statistics and mesh quality.
    pub diagnostics: Option<PathBuf>,
    /// JSON summary with the table rows and diagnostics.
    pub json: Option<PathBuf>,
    /// Directory receiving `level<k>.off` for every mesh.
    pub off_dir: Option<PathBuf>,
    /// Recovered gradients of the finest level (`vertex,t_index,gx,gy,gz`).
    pub recovered: Option<PathBuf>,
}

/// Inclusive bounds on a table column at the finest level.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Bound {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: String,
    pub levels: usize,
    /// OFF file replacing the built-in coarse mesh.
    pub mesh: Option<PathBuf>,
    /// Level-0 `[n_major, n_minor]` cells of the torus grid.
    pub torus_grid: Option<[usize; 2]>,
    /// Time intervals on level 0; doubled per level.
    pub n0: Option<usize>,
    pub quadrature: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Column name → bounds checked on the finest row.
    pub thresholds: BTreeMap<String, Bound>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: "torus".into(),
            levels: 4,
            mesh: None,
            torus_grid: None,
            n0: None,
            quadrature: "degree4".into(),
            seed: 0,
            threads: None,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
            thresholds: BTreeMap::new(),
        }
    }
}

/// Level-0 time intervals used when the configuration does not set `n0`.
pub fn default_n0(name: BenchmarkName) -> usize {
    match name {
        BenchmarkName::Torus => 10,
        BenchmarkName::Ex2 | BenchmarkName::Ex3 => 8,
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.levels < 1 {
            return Err(config_error("levels must be at least 1"));
        }
        if let Some(n0) = self.n0 {
            if n0 < 2 {
                return Err(config_error("n0 must be at least 2"));
            }
        }
        self.benchmark_name()?;
        self.solver_options()?;
        for column in self.thresholds.keys() {
            if !CSV_HEADER.contains(&column.as_str()) {
                return Err(config_error(format!("threshold on unknown column '{column}'")));
            }
        }
        Ok(())
    }

    pub fn benchmark_name(&self) -> Result<BenchmarkName, RunError> {
        self.benchmark.parse().map_err(|e: stlb::Error| config_error(e.to_string()))
    }

    pub fn solver_options(&self) -> Result<SolverOptions, RunError> {
        let err = |e: stlb::Error| config_error(e.to_string());
        Ok(SolverOptions {
            cg_tol: self.solver.cg_tol,
            cg_max_iter_factor: self.solver.cg_max_iter_factor,
            preconditioner: self.solver.preconditioner.parse::<PreconditionerKind>().map_err(err)?,
            time_transform: self.solver.time_transform.parse::<TimeTransform>().map_err(err)?,
            compat_tol: self.solver.compat_tol,
            quadrature: self.quadrature.parse::<QuadratureKind>().map_err(err)?,
            ..SolverOptions::default()
        })
    }

    pub fn effective_n0(&self) -> Result<usize, RunError> {
        Ok(self.n0.unwrap_or(default_n0(self.benchmark_name()?)))
    }
}

/// One row of the error table; orders are empty on the first level.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableRow {
    pub level: usize,
    #[serde(rename = "N_v")]
    pub n_v: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub e: f64,
    pub order_e: Option<f64>,
    #[serde(rename = "De")]
    pub de: f64,
    #[serde(rename = "order_De")]
    pub order_de: Option<f64>,
    #[serde(rename = "De2T")]
    pub de2t: f64,
    #[serde(rename = "order_De2T")]
    pub order_de2t: Option<f64>,
    #[serde(rename = "De2M")]
    pub de2m: f64,
    #[serde(rename = "order_De2M")]
    pub order_de2m: Option<f64>,
}

impl TableRow {
    /// Value of a column by its header name.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "level" => Some(self.level as f64),
            "N_v" => Some(self.n_v as f64),
            "N" => Some(self.n as f64),
            "h" => Some(self.h),
            "tau" => Some(self.tau),
            "e" => Some(self.e),
            "order_e" => self.order_e,
            "De" => Some(self.de),
            "order_De" => self.order_de,
            "De2T" => Some(self.de2t),
            "order_De2T" => self.order_de2t,
            "De2M" => Some(self.de2m),
            "order_De2M" => self.order_de2m,
            _ => None,
        }
    }
}

/// Non-deterministic or auxiliary per-level data, kept out of the table.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LevelDiagnostics {
    pub level: usize,
    pub n_v: usize,
    pub n: usize,
    pub wall_time_s: f64,
    pub cg_max_iterations: usize,
    pub cg_mean_iterations: f64,
    pub cg_iteration_cap: usize,
    pub cg_max_relative_residual: f64,
    pub preconditioner_builds: usize,
    pub relative_incompatibility: f64,
    pub compatibility_residual: f64,
    pub space_time_mean: f64,
    /// Largest relative equation residual over seeded random `(i, a)` pairs.
    pub spot_residual: f64,
    pub recovery_fallbacks: usize,
    pub shape_regularity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutput {
    pub benchmark: String,
    pub rows: Vec<TableRow>,
    pub diagnostics: Vec<LevelDiagnostics>,
    /// Threshold violations on the finest row, one message each.
    pub violations: Vec<String>,
}

impl RunOutput {
    pub fn report(&self) -> ErrorReport {
        observed_orders(
            self.rows
                .iter()
                .map(|r| ErrorLevel {
                    level: r.level,
                    n_vertices: r.n_v,
                    n_intervals: r.n,
                    h: r.h,
                    tau: r.tau,
                    e: r.e,
                    de: r.de,
                    de2t: r.de2t,
                    de2m: r.de2m,
                })
                .collect(),
        )
    }
}

fn build_problem(config: &RunConfig) -> Result<BenchmarkProblem, RunError> {
    let mut problem = BenchmarkProblem::new(config.benchmark_name()?);
    if let Some(path) = &config.mesh {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        problem = problem.with_mesh_source(MeshSource::Off(text));
    }
    if let Some([n_major, n_minor]) = config.torus_grid {
        if problem.name != BenchmarkName::Torus {
            return Err(config_error("torus_grid applies to the torus benchmark only"));
        }
        problem = problem.with_mesh_source(MeshSource::TorusGrid { n_major, n_minor });
    }
    Ok(problem)
}

struct LevelResult {
    row: ErrorLevel,
    diagnostics: LevelDiagnostics,
    recovered: Option<stlb::recovery::RecoveredGradients>,
}

fn run_level(
    problem: &BenchmarkProblem,
    mesh: &SurfaceMesh,
    level: usize,
    n: usize,
    options: &SolverOptions,
    seed: u64,
    keep_recovered: bool,
) -> Result<LevelResult, RunError> {
    let err = at_level(level);
    let start = Instant::now();
    let surf = problem.surface();
    let grid = TimeGrid::new(n).map_err(&err)?;
    let quad = LiftedQuadrature::new(mesh, surf, &options.quadrature.rule()).map_err(&err)?;
    let ops = SpatialOperators::new(mesh).map_err(&err)?;
    let loads = space_time_load(mesh, &quad, &grid, problem).map_err(&err)?;
    let (field, stats) = solve_system(&ops, &grid, &loads, options).map_err(&err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(level as u64));
    let spot_residual = (0..5)
        .map(|_| {
            let i = rng.gen_range(0..grid.n_nodes());
            let a = rng.gen_range(0..mesh.n_vertices());
            equation_residual(&ops, &field, &loads, stats.load_shift, i, a)
        })
        .fold(0.0, f64::max);

    let dt_rec = ppr_time_field(&field).map_err(&err)?;
    let surface_rec = SurfaceRecovery::new(mesh).map_err(&err)?;
    let grads = pppr_field_with(&surface_rec, &field).map_err(&err)?;

    let eval = ErrorEvaluator::new(mesh, &quad, grid);
    let e = eval.error_e(&field, problem).map_err(&err)?;
    let de = eval.error_de(&field, problem).map_err(&err)?;
    let de2t = eval.error_de2t(&dt_rec, problem).map_err(&err)?;
    let de2m = eval.error_de2m(&grads, problem).map_err(&err)?;
    let compat = compatibility_residual_with(&grid, &quad, |t, x| problem.try_source(t, x).unwrap_or(f64::NAN), |x| problem.mu0(x), |x| problem.mu1(x));
    let wall = start.elapsed().as_secs_f64();
    info!(
        "level {level}: N_v={} N={n} e={e:.4e} De={de:.4e} De2T={de2t:.4e} De2M={de2m:.4e} ({wall:.1}s, max CG {})",
        mesh.n_vertices(),
        stats.max_iterations()
    );
    Ok(LevelResult {
        row: ErrorLevel {
            level,
            n_vertices: mesh.n_vertices(),
            n_intervals: n,
            h: mesh.max_edge_length(),
            tau: grid.tau(),
            e,
            de,
            de2t,
            de2m,
        },
        diagnostics: LevelDiagnostics {
            level,
            n_v: mesh.n_vertices(),
            n,
            wall_time_s: wall,
            cg_max_iterations: stats.max_iterations(),
            cg_mean_iterations: stats.mean_iterations(),
            cg_iteration_cap: stats.iteration_cap,
            cg_max_relative_residual: stats.max_relative_residual,
            preconditioner_builds: stats.preconditioner_builds,
            relative_incompatibility: stats.relative_incompatibility,
            compatibility_residual: compat,
            space_time_mean: field.weighted_mean(&ops.mass),
            spot_residual,
            recovery_fallbacks: grads.fallback_count,
            shape_regularity: mesh.shape_regularity(),
        },
        recovered: keep_recovered.then_some(grads),
    })
}

/// Runs the refinement ladder and writes the configured outputs.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    config.validate()?;
    let problem = build_problem(config)?;
    let options = config.solver_options()?;
    let n0 = config.effective_n0()?;
    let meshes = problem.mesh_ladder(config.levels).map_err(|e| config_error(format!("mesh construction: {e}")))?;

    let mut levels = Vec::with_capacity(config.levels);
    let mut diagnostics = Vec::with_capacity(config.levels);
    let mut recovered = None;
    for (level, mesh) in meshes.iter().enumerate() {
        if let Some(dir) = &config.output.off_dir {
            std::fs::create_dir_all(dir).map_err(at_level(level))?;
            off::write_off_file(mesh, dir.join(format!("level{level}.off"))).map_err(at_level(level))?;
        }
        let finest = level + 1 == meshes.len();
        let result = run_level(&problem, mesh, level, n0 << level, &options, config.seed, finest && config.output.recovered.is_some())?;
        levels.push(result.row);
        diagnostics.push(result.diagnostics);
        if result.recovered.is_some() {
            recovered = result.recovered;
        }
    }

    let report = observed_orders(levels);
    let rows = table_rows(&report);
    let violations = check_thresholds(&rows, &config.thresholds);
    let output = RunOutput {
        benchmark: problem.name.to_string(),
        rows,
        diagnostics,
        violations,
    };

    if let Some(path) = &config.output.csv {
        write_table_file(&output.rows, path)?;
    }
    if let Some(path) = &config.output.diagnostics {
        write_diagnostics_file(&output.diagnostics, path)?;
    }
    if let Some(path) = &config.output.json {
        let text = serde_json::to_string_pretty(&output).map_err(|e| config_error(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    }
    if let (Some(path), Some(grads)) = (&config.output.recovered, recovered) {
        write_recovered_file(&grads, path)?;
    }
    Ok(output)
}

pub fn table_rows(report: &ErrorReport) -> Vec<TableRow> {
    report
        .levels
        .iter()
        .zip(&report.orders)
        .map(|(l, o)| TableRow {
            level: l.level,
            n_v: l.n_vertices,
            n: l.n_intervals,
            h: l.h,
            tau: l.tau,
            e: l.e,
            order_e: o.map(|o| o[0]),
            de: l.de,
            order_de: o.map(|o| o[1]),
            de2t: l.de2t,
            order_de2t: o.map(|o| o[2]),
            de2m: l.de2m,
            order_de2m: o.map(|o| o[3]),
        })
        .collect()
}

/// Messages for every bound violated on the last row (a missing value,
/// e.g. an order on a one-level run, counts as a violation).
pub fn check_thresholds(rows: &[TableRow], thresholds: &BTreeMap<String, Bound>) -> Vec<String> {
    let Some(last) = rows.last() else {
        return if thresholds.is_empty() { vec![] } else { vec!["no rows".into()] };
    };
    let mut out = Vec::new();
    for (column, bound) in thresholds {
        match last.column(column) {
            None => out.push(format!("{column}: no value at the finest level")),
            Some(v) => {
                if let Some(min) = bound.min {
                    if !(v >= min) {
                        out.push(format!("{column} = {v} below minimum {min}"));
                    }
                }
                if let Some(max) = bound.max {
                    if !(v <= max) {
                        out.push(format!("{column} = {v} above maximum {max}"));
                    }
                }
            }
        }
    }
    out
}

pub fn write_table<W: Write>(rows: &[TableRow], w: W) -> Result<(), RunError> {
    let mut writer = csv::Writer::from_writer(w);
    for row in rows {
        writer.serialize(row).map_err(|e| config_error(e.to_string()))?;
    }
    if rows.is_empty() {
        writer.write_record(CSV_HEADER).map_err(|e| config_error(e.to_string()))?;
    }
    writer.flush().map_err(|e| config_error(e.to_string()))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
    }
    let file = std::fs::File::create(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    Ok(std::io::BufWriter::new(file))
}

pub fn write_table_file(rows: &[TableRow], path: &Path) -> Result<(), RunError> {
    write_table(rows, create(path)?)
}

pub fn write_diagnostics_file(diag: &[LevelDiagnostics], path: &Path) -> Result<(), RunError> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    for d in diag {
        writer.serialize(d).map_err(|e| config_error(e.to_string()))?;
    }
    writer.flush().map_err(|e| config_error(e.to_string()))
}

fn write_recovered_file(grads: &stlb::recovery::RecoveredGradients, path: &Path) -> Result<(), RunError> {
    let mut writer = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| config_error(e.to_string());
    writer.write_record(["vertex", "t_index", "gx", "gy", "gz"]).map_err(io)?;
    for (i, row) in grads.rows.iter().enumerate() {
        for (a, g) in row.iter().enumerate() {
            writer
                .write_record([a.to_string(), i.to_string(), g.x.to_string(), g.y.to_string(), g.z.to_string()])
                .map_err(io)?;
        }
    }
    writer.flush().map_err(|e| config_error(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_serialized_row() {
        let row = TableRow {
            level: 0,
            n_v: 200,
            n: 8,
            h: 1.5,
            tau: 0.125,
            e: 1.0,
            order_e: None,
            de: 2.0,
            order_de: None,
            de2t: 3.0,
            order_de2t: None,
            de2m: 4.0,
            order_de2m: None,
        };
        let mut buf = Vec::new();
        write_table(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "0,200,8,1.5,0.125,1.0,,2.0,,3.0,,4.0,");
    }

    #[test]
    fn config_parsing_and_validation() {
        let c = RunConfig::from_toml("benchmark = \"ex2\"\nlevels = 2\nn0 = 6\n[solver]\ncg_tol = 1e-9\n[thresholds.order_e]\nmin = 1.8\n").unwrap();
        assert_eq!(c.benchmark, "ex2");
        assert_eq!(c.solver.cg_tol, 1e-9);
        assert_eq!(c.solver.preconditioner, "ic0");
        assert!(c.validate().is_ok());
        assert!(RunConfig::from_toml("levels = 2\nbogus = 1\n").is_err());
        let bad = RunConfig { levels: 0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { n0: Some(1), ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            benchmark: "ex9".into(),
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn thresholds() {
        let row = |o: Option<f64>| TableRow {
            level: 1,
            n_v: 800,
            n: 16,
            h: 0.7,
            tau: 1.0 / 16.0,
            e: 0.5,
            order_e: o,
            de: 3.5,
            order_de: o,
            de2t: 0.05,
            order_de2t: o,
            de2m: 0.9,
            order_de2m: o,
        };
        let mut t = BTreeMap::new();
        t.insert("order_e".to_string(), Bound { min: Some(1.85), max: Some(2.15) });
        assert!(check_thresholds(&[row(Some(2.0))], &t).is_empty());
        assert_eq!(check_thresholds(&[row(Some(1.5))], &t).len(), 1);
        assert_eq!(check_thresholds(&[row(None)], &t).len(), 1);
    }
}
