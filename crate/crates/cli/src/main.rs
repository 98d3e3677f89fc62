//! `ks2lab`: runs integrations, Gram checks, operator and Mercer fixtures and
//! covering scans, and writes deterministic JSON/CSV reports.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical
//! non-convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ks2_core::covering::{asymptotic_scan, dyadic_grid, CoveringError, CoveringReport};
use ks2_core::cube_system::{enumerate_cubes, EnumerationMode, FkOptions};
use ks2_core::hk::corpus::{run_request, IntegrationRequest, RequestError};
use ks2_core::hk::{HkError, IntegrationMode};
use ks2_core::ks2::{gram_matrix, gram_schmidt_onb, theorem_check, KS2Element, Ks2Error, Normalization};
use ks2_core::mercer::{
    eigendecompose, fixture, fixture_names, iota_norm_bound, kernel_from_coefficients, mercer_reconstruct, pd_check,
    point_evaluator, reproducing_residual, DecayModel, MercerError, RKHSElement, DEFAULT_JACOBI_TOL,
};
use ks2_core::operators::{
    apply_operator, compactness_profile, ingest, operator_norm_bound, random_unit, self_adjointness_residual,
    KernelKind, KernelSpec, OperatorError,
};

const MAX_KMAX: usize = 64;
const MAX_D: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "ks2lab", version, about = "HK integration, KS² Gram checks, Mercer kernels and covering bounds")]
struct Cli {
    /// Directory for report files; without it reports go to stdout.
    #[arg(long, global = true, env = "KS2LAB_OUT_DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Emit::Json)]
    emit: Emit,

    /// Seed for every randomized step; recorded in each report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Emit {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a named corpus function.
    Integrate(IntegrateArgs),
    /// Gram matrix, orthonormality verdict and Gram-Schmidt certificate.
    Gram(GramArgs),
    /// Ingest a kernel and check the induced operator.
    Operator(OperatorArgs),
    /// Eigendecomposition and RKHS checks for a kernel fixture.
    Mercer(MercerArgs),
    /// Covering-number bounds over a dyadic eps grid.
    Covering(CoveringArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    #[value(alias = "gauge-riemann")]
    Gauge,
    #[value(alias = "hake-limit")]
    Hake,
    #[value(alias = "series-exact")]
    Series,
}

impl From<ModeArg> for IntegrationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Gauge => IntegrationMode::GaugeRiemann,
            ModeArg::Hake => IntegrationMode::HakeLimit,
            ModeArg::Series => IntegrationMode::SeriesExact,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct IntegrateArgs {
    /// Function name (alternative to --function).
    #[arg(value_name = "FUNCTION", conflicts_with = "function")]
    #[serde(skip)]
    positional: Option<String>,
    #[arg(long)]
    function: Option<String>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    domain: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SystemMode {
    Geometric,
    Diagonal,
}

impl From<SystemMode> for EnumerationMode {
    fn from(m: SystemMode) -> Self {
        match m {
            SystemMode::Geometric => EnumerationMode::Geometric,
            SystemMode::Diagonal => EnumerationMode::Diagonal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum NormArg {
    Paper,
    Corrected,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Paper => Normalization::Paper,
            NormArg::Corrected => Normalization::Corrected,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SystemArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long = "kmax", default_value_t = 16)]
    k_max: usize,
    #[arg(long, value_enum, default_value_t = SystemMode::Geometric)]
    mode: SystemMode,
    #[arg(long, value_enum, default_value_t = NormArg::Corrected)]
    normalization: NormArg,
}

impl SystemArgs {
    fn validate(&self) -> Result<(), Failure> {
        if self.d == 0 || self.d > MAX_D {
            return Err(Failure::usage(format!("--d must lie in 1..={MAX_D}")));
        }
        if self.k_max == 0 || self.k_max > MAX_KMAX {
            return Err(Failure::usage(format!("--kmax must lie in 1..={MAX_KMAX}")));
        }
        Ok(())
    }
}

#[derive(Debug, Args, Serialize)]
struct GramArgs {
    #[command(flatten)]
    system: SystemArgs,
}

#[derive(Debug, Args, Serialize)]
struct OperatorArgs {
    /// Kernel spec JSON file `{type, data, symmetric}`.
    #[arg(long, conflicts_with = "kernel_name")]
    kernel: Option<PathBuf>,
    /// Named pointwise kernel, integrated against the basis.
    #[arg(long)]
    kernel_name: Option<String>,
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Debug, Args, Serialize)]
struct MercerArgs {
    /// Coefficient fixture; without it the decay model below is used.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Number of model eigenvalues.
    #[arg(long, default_value_t = 8)]
    terms: usize,
    /// Evaluation points for the reproducing and positivity checks.
    #[arg(long, default_value_t = 32)]
    points: usize,
}

#[derive(Debug, Args, Serialize)]
struct CoveringArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 6)]
    eps_pow_min: i32,
    #[arg(long, default_value_t = 40)]
    eps_pow_max: i32,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

fn hk_failure(e: &HkError) -> Failure {
    match e {
        HkError::NonConvergence { .. }
        | HkError::DepthExceeded { .. }
        | HkError::CellBudget { .. }
        | HkError::NotAbsolutelySummable => Failure::numeric(e.to_string()),
        _ => Failure::usage(e.to_string()),
    }
}

impl From<RequestError> for Failure {
    fn from(e: RequestError) -> Self {
        match e {
            RequestError::Integration(h) => hk_failure(&h),
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<Ks2Error> for Failure {
    fn from(e: Ks2Error) -> Self {
        match e {
            Ks2Error::Integration(h) => hk_failure(&h),
            other => Failure::numeric(other.to_string()),
        }
    }
}

impl From<OperatorError> for Failure {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::Integration(h) => hk_failure(&h),
            OperatorError::Ks2(k) => k.into(),
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<MercerError> for Failure {
    fn from(e: MercerError) -> Self {
        match e {
            MercerError::NonConvergence { .. } => Failure::numeric(e.to_string()),
            MercerError::Operator(o) => o.into(),
            other => Failure::usage(other.to_string()),
        }
    }
}

impl From<CoveringError> for Failure {
    fn from(e: CoveringError) -> Self {
        Failure::usage(e.to_string())
    }
}

#[derive(Serialize)]
struct Envelope<'a, P: Serialize, R: Serialize> {
    command: &'static str,
    seed: u64,
    params: &'a P,
    result: R,
}

struct Output<'a> {
    dir: Option<&'a Path>,
    emit: Emit,
}

impl Output<'_> {
    fn wants_json(&self) -> bool {
        self.emit != Emit::Csv
    }

    fn wants_csv(&self) -> bool {
        self.emit != Emit::Json
    }

    fn write(&self, name: &str, ext: &str, body: &str) -> Result<(), Failure> {
        match self.dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
                let path = dir.join(format!("{name}.{ext}"));
                fs::write(&path, body).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
            }
            None => print!("{body}"),
        }
        Ok(())
    }

    fn note(&self, line: &str) {
        if self.dir.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        if !self.wants_json() {
            return Ok(());
        }
        let mut body = serde_json::to_string_pretty(value).expect("reports serialize");
        body.push('\n');
        self.write(name, "json", &body)
    }
}

#[derive(Serialize)]
struct IntegrateParams {
    function: String,
    domain: Option<(f64, f64)>,
    mode: Option<IntegrationMode>,
    tol: f64,
}

fn run_integrate(args: &IntegrateArgs, seed: u64, out: &Output) -> Result<(), Failure> {
    let function = args
        .function
        .clone()
        .or_else(|| args.positional.clone())
        .ok_or_else(|| Failure::usage("a function name is required"))?;
    if !(args.tol > 0.0) {
        return Err(Failure::usage("--tol must be positive"));
    }
    let domain = args.domain.as_ref().map(|d| (d[0], d[1]));
    let req = IntegrationRequest { function, domain, mode: args.mode.map(Into::into), tol: args.tol };
    let params = IntegrateParams { function: req.function.clone(), domain, mode: req.mode, tol: req.tol };
    let record = run_request(&req)?;
    out.json("integrate", &Envelope { command: "integrate", seed, params: &params, result: &record })?;
    if record.error_bound > args.tol {
        return Err(Failure::numeric(format!(
            "error bound {:e} exceeds the requested tolerance {:e}",
            record.error_bound, args.tol
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct GramResult {
    gram: ks2_core::ks2::GramEnclosure,
    check: ks2_core::ks2::TheoremCheck,
    onb_certificate_residual: f64,
    onb_dropped: Vec<usize>,
}

fn run_gram(args: &GramArgs, seed: u64, out: &Output) -> Result<(), Failure> {
    args.system.validate()?;
    let s = &args.system;
    let system = enumerate_cubes(s.d, s.k_max, s.mode.into());
    let gram = gram_matrix(&system, s.normalization.into());
    let check = theorem_check(&gram);
    let basis = gram_schmidt_onb(&system, s.normalization.into())?;
    out.note(&check.verdict_text);
    let result = GramResult {
        gram,
        check,
        onb_certificate_residual: basis.certificate_residual,
        onb_dropped: basis.dropped.clone(),
    };
    out.json("gram", &Envelope { command: "gram", seed, params: args, result })
}

#[derive(Serialize)]
struct OperatorResult {
    kernel: ks2_core::operators::KernelCoefficients,
    norm: ks2_core::operators::NormReport,
    coefficient_bound_holds: bool,
    self_adjointness_residual: Option<f64>,
    compactness_profile: Vec<f64>,
}

fn run_operator(args: &OperatorArgs, seed: u64, out: &Output) -> Result<(), Failure> {
    args.system.validate()?;
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let spec = match (&args.kernel, &args.kernel_name) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<KernelSpec>(&text).map_err(|e| Failure::usage(format!("kernel spec: {e}")))?
        }
        (None, Some(name)) => {
            KernelSpec { kind: KernelKind::CallableName, data: name.clone().into(), symmetric: Some(true) }
        }
        (None, None) => return Err(Failure::usage("give --kernel FILE or --kernel-name NAME")),
    };
    let s = &args.system;
    let basis = if spec.kind == KernelKind::CallableName {
        let system = enumerate_cubes(s.d, s.k_max, s.mode.into());
        Some(gram_schmidt_onb(&system, s.normalization.into())?)
    } else {
        None
    };
    let kernel = ingest(&spec, basis.as_ref(), &FkOptions::default())?;
    let norm = operator_norm_bound(&kernel, args.trials, seed);
    let n = kernel.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut coefficient_bound_holds = true;
    for _ in 0..args.trials {
        let f = KS2Element::from_coeffs(random_unit(n, &mut rng));
        let af = apply_operator(&kernel, &f)?;
        let lhs: f64 = af.coeffs.iter().map(|c| c * c).sum();
        coefficient_bound_holds &= lhs <= kernel.frobenius.powi(2) + 1e-12;
    }
    let self_adjointness_residual = if kernel.symmetric {
        let f = KS2Element::from_coeffs(random_unit(n, &mut rng));
        let g = KS2Element::from_coeffs(random_unit(n, &mut rng));
        Some(self_adjointness_residual(&kernel, &f, &g)?)
    } else {
        None
    };
    out.note(&format!("max |I_K f| = {:.6e} <= |K|_F = {:.6e}: {}", norm.max_ratio, norm.frobenius, norm.within_bound));
    let result = OperatorResult {
        compactness_profile: compactness_profile(&kernel),
        kernel,
        norm,
        coefficient_bound_holds,
        self_adjointness_residual,
    };
    out.json("operator", &Envelope { command: "operator", seed, params: args, result })
}

#[derive(Serialize)]
struct MercerResult {
    eigen: ks2_core::mercer::EigenSystem,
    reconstruction_error: f64,
    trace_error: f64,
    orthogonality_defect: f64,
    max_reproducing_residual: Option<f64>,
    max_diagonal_mismatch: Option<f64>,
    pd_value: f64,
    pd_passed: bool,
    iota: Option<ks2_core::mercer::IotaReport>,
}

fn run_mercer(args: &MercerArgs, seed: u64, out: &Output) -> Result<(), Failure> {
    let (kernel, model) = match &args.fixture {
        Some(name) => {
            let k = fixture(name).ok_or_else(|| {
                Failure::usage(format!("unknown fixture '{name}'; known: {}", fixture_names().join(", ")))
            })?;
            (k, None)
        }
        None => {
            if args.terms == 0 || args.terms > MAX_KMAX {
                return Err(Failure::usage(format!("--terms must lie in 1..={MAX_KMAX}")));
            }
            let model = DecayModel::new(args.d, args.c, args.a)?;
            (ks2_core::operators::KernelCoefficients::diagonal(&model.eigenvalues(args.terms)), Some(model))
        }
    };
    let eigen = eigendecompose(&kernel, DEFAULT_JACOBI_TOL)?;
    let n = eigen.dim();
    let rebuilt = mercer_reconstruct(&eigen, n)?;
    let reconstruction_error =
        kernel.a.iter().flatten().zip(rebuilt.a.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let trace: f64 = (0..n).map(|i| kernel.a[i][i]).sum();
    let trace_error = (trace - eigen.eigenvalues.iter().sum::<f64>()).abs();

    let d = model.map_or(1, |m| m.d);
    let system = enumerate_cubes(d, n, EnumerationMode::Geometric);
    let basis = gram_schmidt_onb(&system, Normalization::Corrected)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..args.points)
        .map(|i| {
            let cube = system.cube(i % n + 1);
            let r = ks2_core::exact::to_f64(&cube.radius);
            cube.center.iter().map(|c| ks2_core::exact::to_f64(c) + r * rng.gen_range(-0.99..0.99)).collect()
        })
        .collect();
    let weights: Vec<f64> = (0..points.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pd = pd_check(&eigen, &points, &weights, &basis)?;
    let (max_reproducing_residual, max_diagonal_mismatch) = if eigen.negatives_present {
        (None, None)
    } else {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = RKHSElement::new(c, &eigen)?;
        let mut worst_rep: f64 = 0.0;
        let mut worst_diag: f64 = 0.0;
        for x in &points {
            worst_rep = worst_rep.max(reproducing_residual(&f, &eigen, x, &basis)?);
            let ev = point_evaluator(&eigen, x, &basis)?;
            let kxx: f64 = ev.element.c.iter().map(|v| v * v).sum();
            worst_diag = worst_diag.max((kxx - kernel_from_coefficients(&rebuilt, x, x, &basis)).abs());
        }
        (Some(worst_rep), Some(worst_diag))
    };
    out.note(&format!(
        "eigenvalues {} (negatives present: {}), reconstruction error {:.3e}",
        n, eigen.negatives_present, reconstruction_error
    ));
    let result = MercerResult {
        orthogonality_defect: eigen.orthogonality_defect(),
        iota: model.map(|m| iota_norm_bound(&eigen, &m)),
        eigen,
        reconstruction_error,
        trace_error,
        max_reproducing_residual,
        max_diagonal_mismatch,
        pd_value: pd.value,
        pd_passed: pd.passed,
    };
    out.json("mercer", &Envelope { command: "mercer", seed, params: args, result })
}

fn covering_csv(report: &CoveringReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.records {
        w.serialize(r).expect("csv record");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
}

fn run_covering(args: &CoveringArgs, seed: u64, out: &Output) -> Result<(), Failure> {
    if args.eps_pow_min < 2 {
        return Err(Failure::usage("--eps-pow-min must be at least 2 (eps <= 1/4)"));
    }
    if args.eps_pow_max < args.eps_pow_min {
        return Err(Failure::usage("empty eps grid: --eps-pow-max is below --eps-pow-min"));
    }
    if args.eps_pow_max > 1000 {
        return Err(Failure::usage("--eps-pow-max must be at most 1000"));
    }
    let model = DecayModel::new(args.d, args.c, args.a).map_err(CoveringError::from)?;
    let report = asymptotic_scan(&model, &dyadic_grid(args.eps_pow_min, args.eps_pow_max))?;
    out.json("covering", &Envelope { command: "covering", seed, params: args, result: &report })?;
    if out.wants_csv() {
        out.write("covering", "csv", &covering_csv(&report))?;
    }
    let last = report.records.last().expect("nonempty grid");
    let summary = format!(
        "records {}: terminal eps 2^-{} ratio_upper {:.4} (limsup target {:.4}), ratio_lower {:.4} (liminf target {:.4}), sandwich {}",
        report.records.len(),
        args.eps_pow_max,
        last.ratio_upper,
        report.target_upper,
        last.ratio_lower,
        report.target_lower,
        if report.sandwich_holds { "holds" } else { "FAILS" }
    );
    out.note(&summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = Output { dir: cli.out.as_deref(), emit: cli.emit };
    let result = match &cli.command {
        Command::Integrate(a) => run_integrate(a, cli.seed, &out),
        Command::Gram(a) => run_gram(a, cli.seed, &out),
        Command::Operator(a) => run_operator(a, cli.seed, &out),
        Command::Mercer(a) => run_mercer(a, cli.seed, &out),
        Command::Covering(a) => run_covering(a, cli.seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
