//! `ase`: asymptotic spectral equivalents of symmetric matrix perturbations K(ε).
//!
//! Exit codes: 0 complete ASE or verification pass, 1 input or computation error,
//! 2 truncated ASE, 3 a verifiable group failed verification.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use ase_core::ase::DEFAULT_RANK_TOL;
use ase_core::kernels::DEFAULT_VANDERMONDE_TOL;
use ase_core::oracle::{default_grid, log_grid, predicted_vector, vector_trace_csv};
use ase_core::{
    ase_from_gkf, auto_scaled_ase, eigen_readout, eigen_sweep, iterative_ase, kernel_ase, match_ase, Ase,
    AseError, GkfForm, KernelModel, KernelName, MatrixSeries, NodeSet, SweepSource,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const MAX_DEPTH: usize = 64;

#[derive(Parser)]
#[command(name = "ase", version, about = "Asymptotic spectral equivalents of symmetric perturbations K(ε)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ASE of a matrix series or generalized kernel form given as JSON.
    Analyze(Common),
    /// Flat-limit ASE of a kernel matrix on a node set, with a group-size table.
    Kernel(Common),
    /// Run the pipeline, then check every group against a numerical eigen-sweep.
    Verify(Common),
    /// Eigenvalue curves over an ε grid as CSV, optionally tracing one eigenvector.
    Sweep(Common),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Scaled,
    Gkf,
    Iterative,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct Common {
    /// MatrixSeries JSON, or a generalized kernel form with fields V, W, valuations.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Node CSV, one node per line.
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Generated nodes, `kind:n` with kind in equispaced, uniform, circle, cubic.
    #[arg(long)]
    sample: Option<String>,
    #[arg(long, value_enum)]
    kernel: Option<KernelName>,
    /// Taylor coefficients ψ_0, ψ_1, … of a custom kernel, as a JSON list.
    #[arg(long)]
    psi: Option<String>,
    /// Dimension of generated uniform nodes, or the expected dimension of a node file.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Logarithmic ε grid `start:stop:points`.
    #[arg(long)]
    eps_grid: Option<String>,
    /// 1-based index of the eigenvector to trace in `sweep`; the trace follows the curves after a blank line.
    #[arg(long)]
    track_vector: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 0.01)]
    tol_coeff: f64,
    #[arg(long, default_value_t = 1e-2)]
    tol_angle: f64,
    /// Verify an existing ASE JSON instead of computing one.
    #[arg(long)]
    ase: Option<PathBuf>,
    /// Test hook: multiply every predicted leading coefficient by this factor before verifying.
    #[arg(long)]
    perturb_lambda: Option<f64>,
}

enum Fail {
    Input(String),
}

impl From<AseError> for Fail {
    fn from(e: AseError) -> Self {
        Fail::Input(e.to_string())
    }
}

type Out<T> = std::result::Result<T, Fail>;

enum Source {
    Series(MatrixSeries),
    Gkf(GkfForm),
    Kernel(KernelModel, NodeSet),
}

struct Pipeline {
    ase: Ase,
    extra: serde_json::Map<String, Value>,
    table: Option<String>,
}

fn read(path: &PathBuf) -> Out<String> {
    fs::read_to_string(path).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))
}

impl Common {
    fn validate(&self) -> Out<()> {
        for (name, v) in [("--tol-coeff", self.tol_coeff), ("--tol-angle", self.tol_angle)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Fail::Input(format!("{name} must be positive")));
            }
        }
        if let Some(t) = self.rank_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Fail::Input("--rank-tol must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    fn grid(&self) -> Out<Vec<f64>> {
        let Some(text) = &self.eps_grid else { return Ok(default_grid()) };
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Fail::Input(format!("--eps-grid: expected start:stop:points, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(log_grid(start, stop, points)?)
    }

    fn kernel_model(&self) -> Out<KernelModel> {
        match (self.kernel, &self.psi) {
            (Some(KernelName::Custom) | None, Some(psi)) => {
                let c: Vec<f64> = serde_json::from_str(psi).map_err(|e| Fail::Input(format!("--psi: {e}")))?;
                Ok(KernelModel::custom(c)?)
            }
            (Some(KernelName::Custom), None) => Err(Fail::Input("--kernel custom needs --psi".into())),
            (Some(name), None) => Ok(KernelModel::named(name)?),
            (Some(_), Some(_)) => Err(Fail::Input("--psi is only valid with --kernel custom".into())),
            (None, None) => Ok(KernelModel::gaussian()),
        }
    }

    fn node_set(&self) -> Out<NodeSet> {
        let nodes = match (&self.nodes, &self.sample) {
            (Some(p), None) => NodeSet::from_csv(&read(p)?).map_err(|e| Fail::Input(format!("{}: {e}", p.display())))?,
            (None, Some(s)) => {
                let (kind, n) = s.split_once(':').ok_or_else(|| Fail::Input(format!("--sample: expected kind:n, got {s:?}")))?;
                let n: usize = n.parse().map_err(|_| Fail::Input(format!("--sample: bad count {n:?}")))?;
                match kind {
                    "equispaced" => NodeSet::equispaced(n)?,
                    "uniform" => NodeSet::uniform_cube(n, self.dim.unwrap_or(2), self.seed)?,
                    "circle" => NodeSet::circle(n, self.seed)?,
                    "cubic" => NodeSet::cubic_curve(n, self.seed)?,
                    _ => return Err(Fail::Input(format!("--sample: unknown kind {kind:?}"))),
                }
            }
            (Some(_), Some(_)) => return Err(Fail::Input("give either --nodes or --sample".into())),
            (None, None) => return Err(Fail::Input("a node set is required (--nodes or --sample)".into())),
        };
        if let Some(d) = self.dim {
            if d != nodes.d() {
                return Err(Fail::Input(format!("--dim {d} but nodes have dimension {}", nodes.d())));
            }
        }
        Ok(nodes)
    }

    fn source(&self, kernel_cmd: bool) -> Out<Source> {
        if kernel_cmd || (self.input.is_none() && (self.nodes.is_some() || self.sample.is_some())) {
            if self.input.is_some() {
                return Err(Fail::Input("--input is not used with kernel sources".into()));
            }
            return Ok(Source::Kernel(self.kernel_model()?, self.node_set()?));
        }
        let path = self.input.as_ref().ok_or_else(|| Fail::Input("--input (or a node set) is required".into()))?;
        let text = read(path)?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Fail::Input(format!("{}: {e}", path.display())))?;
        let wrap = |e: AseError| Fail::Input(format!("{}: {e}", path.display()));
        if value.get("V").is_some() {
            Ok(Source::Gkf(GkfForm::from_json_str(&text).map_err(wrap)?))
        } else {
            Ok(Source::Series(MatrixSeries::from_json_str(&text).map_err(wrap)?))
        }
    }
}

fn run_series(k: &MatrixSeries, mode: Mode, tol: f64) -> Out<(Ase, &'static str)> {
    Ok(match mode {
        Mode::Scaled => (auto_scaled_ase(k, tol)?, "scaled"),
        Mode::Iterative => (iterative_ase(k, tol, MAX_DEPTH)?, "iterative"),
        Mode::Gkf => return Err(Fail::Input("--mode gkf needs an input with V, W and valuations".into())),
        Mode::Auto => match auto_scaled_ase(k, tol) {
            Ok(a) if a.is_complete() => (a, "scaled"),
            _ => (iterative_ase(k, tol, MAX_DEPTH)?, "iterative"),
        },
    })
}

fn group_table(ase: &Ase) -> String {
    let mut s = String::from("valuation,count,lambda_leading\n");
    for g in eigen_readout(ase) {
        s.push_str(&format!("{},{}", g.valuation, g.count()));
        for l in &g.leading_values {
            s.push_str(&format!(",{l:.16e}"));
        }
        s.push('\n');
    }
    s
}

fn pipeline(cfg: &Common, source: &Source) -> Out<Pipeline> {
    let mut extra = serde_json::Map::new();
    let (ase, table) = match source {
        Source::Series(k) => {
            let (ase, used) = run_series(k, cfg.mode, cfg.rank_tol.unwrap_or(DEFAULT_RANK_TOL))?;
            extra.insert("mode".into(), json!(used));
            (ase, None)
        }
        Source::Gkf(f) => {
            let tol = cfg.rank_tol.unwrap_or(DEFAULT_RANK_TOL);
            let (ase, used) = match cfg.mode {
                Mode::Gkf | Mode::Auto => (ase_from_gkf(f, tol)?, "gkf"),
                m => run_series(&f.to_series()?, m, tol)?,
            };
            extra.insert("mode".into(), json!(used));
            extra.insert("scaling".into(), json!(f.scaling));
            (ase, None)
        }
        Source::Kernel(k, nodes) => {
            if matches!(cfg.mode, Mode::Scaled | Mode::Iterative) {
                return Err(Fail::Input("kernel sources use the generalized kernel form (--mode gkf or auto)".into()));
            }
            let r = kernel_ase(k, nodes, cfg.rank_tol.unwrap_or(DEFAULT_VANDERMONDE_TOL))?;
            extra.insert("mode".into(), json!("gkf"));
            extra.insert("branch".into(), json!(r.branch));
            extra.insert("scaling".into(), json!(r.form.scaling));
            extra.insert("block_ranks".into(), json!(r.block_ranks));
            let table = group_table(&r.ase);
            (r.ase, Some(table))
        }
    };
    Ok(Pipeline { ase, extra, table })
}

fn ase_json(p: &Pipeline) -> Value {
    let mut v = p.ase.to_json_value();
    if let Value::Object(m) = &mut v {
        for (k, x) in &p.extra {
            m.insert(k.clone(), x.clone());
        }
    }
    v
}

fn emit(cfg: &Common, text: &str) -> Out<()> {
    match &cfg.output {
        Some(p) => fs::write(p, text).map_err(|e| Fail::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serialises");
    s.push('\n');
    s
}

fn truncation_code(ase: &Ase) -> u8 {
    if ase.is_complete() {
        0
    } else {
        2
    }
}

fn analyze(cfg: &Common, kernel_cmd: bool) -> Out<u8> {
    let source = cfg.source(kernel_cmd)?;
    let p = pipeline(cfg, &source)?;
    match (&p.table, cfg.format) {
        (Some(t), Format::Csv) => emit(cfg, t)?,
        (table, _) => {
            if let Some(t) = table {
                eprint!("{t}");
            }
            emit(cfg, &pretty(&ase_json(&p)))?
        }
    }
    Ok(truncation_code(&p.ase))
}

fn sweep_source(source: &Source) -> SweepSource<'_> {
    match source {
        Source::Series(k) => SweepSource::Series(k),
        Source::Gkf(f) => SweepSource::Gkf(f),
        Source::Kernel(k, nodes) => SweepSource::Kernel { kernel: k, nodes },
    }
}

fn perturbed(ase: &Ase, factor: f64) -> Out<Ase> {
    let groups = ase
        .groups
        .iter()
        .map(|g| ase_core::AseGroup { valuation: g.valuation, term: &g.term * factor })
        .collect();
    Ok(Ase::new(ase.n, groups, ase.truncated_at)?)
}

fn verify(cfg: &Common) -> Out<u8> {
    let source = cfg.source(false)?;
    let grid = cfg.grid()?;
    let mut ase = match &cfg.ase {
        Some(p) => Ase::from_json_str(&read(p)?).map_err(|e| Fail::Input(format!("{}: {e}", p.display())))?,
        None => pipeline(cfg, &source)?.ase,
    };
    if let Some(f) = cfg.perturb_lambda {
        ase = perturbed(&ase, f)?;
    }
    let sweep = eigen_sweep(&sweep_source(&source), &grid)?;
    let report = match_ase(&ase, &sweep, cfg.tol_coeff, cfg.tol_angle)?;
    emit(cfg, &pretty(&json!(report)))?;
    Ok(if report.pass { 0 } else { 3 })
}

fn sweep(cfg: &Common) -> Out<u8> {
    let source = cfg.source(false)?;
    let grid = cfg.grid()?;
    let sweep = eigen_sweep(&sweep_source(&source), &grid)?;
    let text = match cfg.track_vector {
        None => sweep.to_csv(),
        Some(k) => {
            let ase = pipeline(cfg, &source)?.ase;
            let limit = predicted_vector(&ase, k);
            if limit.is_none() {
                eprintln!("no resolved, unambiguous limit for u_{k}; the limit row is omitted");
            }
            format!("{}\n{}", sweep.to_csv(), vector_trace_csv(&sweep, k, limit.as_ref())?)
        }
    };
    emit(cfg, &text)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(c) => c.validate().and_then(|_| analyze(c, false)),
        Command::Kernel(c) => c.validate().and_then(|_| analyze(c, true)),
        Command::Verify(c) => c.validate().and_then(|_| verify(c)),
        Command::Sweep(c) => c.validate().and_then(|_| sweep(c)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
