//! `hamburger`: solvability, determinacy, coefficients, transforms and
//! densities for matrix moment sequences.
//!
//! Exit codes: 0 success (solvable / determinate), 1 usage, I/O or format
//! error, 2 rejected by `validate`, 3 indeterminate, 4 inconclusive, 5 any
//! other library error. Errors are reported on stderr as
//! `{"error": cause, "message": text}`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod parse;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hamburger::oracle::{self, CarlemanHint};
use hamburger::{
    classify_determinacy, convergence_driver, embed, orthogonalize, stieltjes_invert, unique_solution_atoms,
    AtomicMeasure, CMatrix, Complex64, ConvergencePolicy, DeterminacyPolicy, EmbedOptions, Error, MomentSequence,
    NevanlinnaSection, SchurParameter, SectionOptions, SolvabilityVerdict, Verdict,
};
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "hamburger", version, about = "Matrix Hamburger moment problem toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check positive semidefiniteness of the block Hankel sections.
    Validate(ValidateArgs),
    /// Classify the moment problem as determinate or indeterminate.
    Determinacy(DeterminacyArgs),
    /// Evaluate the coefficient matrices A, B, C, D on a grid.
    Coeffs(CoeffsArgs),
    /// Evaluate the Stieltjes transform of the solution selected by --schur.
    Transform(TransformArgs),
    /// Recover the density (or cumulative) of a solution by Stieltjes inversion.
    Density(DensityArgs),
    /// Write an oracle moment sequence as JSON.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Common {
    /// Moment file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Working precision in bits; overrides the file's precision_bits.
    #[arg(long = "precision-bits")]
    precision_bits: Option<u32>,
}

#[derive(Args)]
struct Sections {
    /// Largest section size M.
    #[arg(long = "max-section")]
    max_section: Option<usize>,
    /// First section size M (default 16·N).
    #[arg(long = "initial-section")]
    initial_section: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Deepest Hankel order to check (default: deepest available).
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args)]
struct DeterminacyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sections: Sections,
    /// Residual threshold relative to Γ_nn.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct CoeffsArgs {
    #[command(flatten)]
    common: Common,
    /// Section size M used for the coefficients (default 16·N).
    #[arg(long = "max-section")]
    max_section: Option<usize>,
    /// Points in the upper half-plane: `2i,1+1i` or `rect:RE0:RE1:IM0:IM1:STEP`.
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sections: Sections,
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    /// Schur parameter: zero, scalar:C, mobius:A:SCALE or file:PATH.
    #[arg(long, default_value = "zero")]
    schur: String,
    /// Largest accepted change of the transform between sections.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    sections: Sections,
    /// Interval `A,B`.
    #[arg(long, allow_hyphen_values = true)]
    interval: String,
    /// Grid step (default 1e-4·(B-A)).
    #[arg(long)]
    step: Option<f64>,
    /// Imaginary offset of the evaluation line.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value = "zero")]
    schur: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Emit the cumulative instead of the density.
    #[arg(long)]
    cumulative: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    TwoAtom,
    PointMass,
    Zero,
    Lognormal,
    Gaussian,
    /// diag(lognormal, two-atom), N = 2.
    BlockDiagonal,
    /// Random atomic measure, see --block-size, --atoms and --seed.
    Random,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Number of moments S_0..S_{count-1}.
    #[arg(long, default_value_t = 32)]
    count: usize,
    #[arg(long = "precision-bits", default_value_t = 53)]
    precision_bits: u32,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "block-size", default_value_t = 1)]
    block_size: usize,
    #[arg(long, default_value_t = 3)]
    atoms: usize,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Lib(e) => match e {
                Error::Io(_) | Error::Json(_) | Error::Format(_) | Error::NonHermitian { .. } | Error::InvalidSequence(_) => 1,
                _ => 5,
            },
        }
    }

    fn report(&self) -> Value {
        match self {
            Failure::Usage(m) => json!({ "error": "usage", "message": m }),
            Failure::Lib(e) => json!({ "error": e.cause(), "message": e.to_string() }),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn emit(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Lib(Error::Io(e))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::Lib(Error::Io(e)))
        }
    }
}

fn check_precision(p: u32) -> Result<(), Failure> {
    if p < 53 {
        return Err(Failure::Usage(format!("--precision-bits {p} is below the minimum of 53")));
    }
    Ok(())
}

fn check_section(flag: &str, m: Option<usize>) -> Result<(), Failure> {
    match m {
        Some(m) if !m.is_power_of_two() => Err(Failure::Usage(format!("{flag} {m} must be a power of two"))),
        _ => Ok(()),
    }
}

fn load(common: &Common) -> Result<MomentSequence, Failure> {
    if let Some(p) = common.precision_bits {
        check_precision(p)?;
    }
    let seq = MomentSequence::read(&common.input, common.precision_bits)?;
    check_precision(seq.precision())?;
    Ok(seq)
}

fn report_json(command: &str, body: Value, extra: &[(&str, Value)]) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    if let Value::Object(map) = body {
        obj.extend(map);
    }
    for (k, v) in extra {
        obj.insert((*k).into(), v.clone());
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("reports serialize");
    s.push('\n');
    s
}

fn validate(args: ValidateArgs) -> Outcome {
    let seq = load(&args.common)?;
    let deepest = (seq.len() - 1) / 2;
    let depth = args.depth.unwrap_or(deepest);
    let report = seq.validate_solvability(depth, None)?;
    emit(&args.common.output, &report_json("validate", serde_json::to_value(&report).map_err(Error::from)?, &[]))?;
    Ok(match report.verdict {
        SolvabilityVerdict::SolvableWithinTolerance => 0,
        SolvabilityVerdict::RejectedAtOrder { .. } => 2,
    })
}

fn determinacy(args: DeterminacyArgs) -> Outcome {
    check_section("--max-section", args.sections.max_section)?;
    check_section("--initial-section", args.sections.initial_section)?;
    let seq = load(&args.common)?;
    let policy = DeterminacyPolicy {
        initial_section: args.sections.initial_section,
        max_section: args.sections.max_section,
        threshold: args.threshold,
        ..DeterminacyPolicy::default()
    };
    let verdict = classify_determinacy(&seq, &policy)?;
    let hint = match oracle::carleman_hint(&seq) {
        CarlemanHint::SuggestsDeterminate => "suggests-determinate",
        CarlemanHint::NoInformation => "no-information",
    };
    let text = report_json(
        "determinacy",
        serde_json::to_value(&verdict).map_err(Error::from)?,
        &[("precision_bits", json!(seq.precision())), ("carleman_hint", json!(hint))],
    );
    emit(&args.common.output, &text)?;
    Ok(match verdict.verdict {
        Verdict::Determinate => 0,
        Verdict::Indeterminate => 3,
        Verdict::Inconclusive => 4,
    })
}

fn push_matrix(row: &mut String, m: &CMatrix) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            let _ = write!(row, ",{},{}", v.re, v.im);
        }
    }
}

fn matrix_header(header: &mut String, name: &str, rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            let _ = write!(header, ",{name}{r}{c}_re,{name}{r}{c}_im");
        }
    }
}

fn coeffs(args: CoeffsArgs) -> Outcome {
    check_section("--max-section", args.max_section)?;
    let grid = parse::grid(&args.grid).map_err(Failure::Usage)?;
    let seq = load(&args.common)?;
    for &z in &grid {
        hamburger::coeffs::check_point(z)?;
    }
    let m = args.max_section.unwrap_or(16 * seq.block_size()).min(seq.max_section());
    let section = NevanlinnaSection::build(&seq, m, &SectionOptions::default())?;
    let values = grid
        .iter()
        .map(|&z| section.coefficients(z))
        .collect::<Result<Vec<_>, _>>()?;
    let (n, delta, omega) = (seq.block_size(), section.structure.delta(), section.structure.omega());
    let mut out = format!(
        "# section={m} A={n}x{n} B={n}x{omega} C={delta}x{omega} D={delta}x{n}\nz_re,z_im"
    );
    matrix_header(&mut out, "A", n, n);
    matrix_header(&mut out, "B", n, omega);
    matrix_header(&mut out, "C", delta, omega);
    matrix_header(&mut out, "D", delta, n);
    out.push('\n');
    for co in &values {
        let mut row = format!("{},{}", co.z.re, co.z.im);
        for mat in [&co.a, &co.b, &co.c, &co.d] {
            push_matrix(&mut row, mat);
        }
        out.push_str(&row);
        out.push('\n');
    }
    emit(&args.common.output, &out)?;
    Ok(0)
}

fn convergence_policy(sections: &Sections, tol: f64) -> Result<ConvergencePolicy, Failure> {
    check_section("--max-section", sections.max_section)?;
    check_section("--initial-section", sections.initial_section)?;
    if !(tol > 0.0) {
        return Err(Failure::Usage(format!("--tol {tol} must be positive")));
    }
    Ok(ConvergencePolicy {
        initial_section: sections.initial_section,
        max_section: sections.max_section,
        tol,
        ..ConvergencePolicy::default()
    })
}

fn transform(args: TransformArgs) -> Outcome {
    let policy = convergence_policy(&args.sections, args.tol)?;
    let grid = parse::grid(&args.grid).map_err(Failure::Usage)?;
    let f = parse::schur(&args.schur).map_err(Failure::Usage)?;
    let seq = load(&args.common)?;
    let result = convergence_driver(&seq, &grid, &f, &policy)?;
    let n = seq.block_size();
    let mut out = String::from("z_re,z_im");
    matrix_header(&mut out, "S", n, n);
    out.push('\n');
    for sample in &result.samples {
        let mut row = format!("{},{}", sample.z.re, sample.z.im);
        push_matrix(&mut row, &sample.s);
        out.push_str(&row);
        out.push('\n');
    }
    emit(&args.common.output, &out)?;
    eprintln!(
        "{}",
        json!({ "section": result.section_size(), "gaps": result.gaps })
    );
    Ok(0)
}

enum Sampler {
    Section(Box<NevanlinnaSection>, SchurParameter),
    Atoms(AtomicMeasure),
}

impl Sampler {
    fn eval(&self, z: Complex64) -> hamburger::Result<CMatrix> {
        match self {
            Sampler::Section(s, f) => s.transform(z, f).map(|t| t.s),
            Sampler::Atoms(m) => Ok(m.transform(z)),
        }
    }
}

fn density(args: DensityArgs) -> Outcome {
    let policy = convergence_policy(&args.sections, args.tol)?;
    let (a, b) = parse::interval(&args.interval).map_err(Failure::Usage)?;
    let f = parse::schur(&args.schur).map_err(Failure::Usage)?;
    if !(args.epsilon > 0.0) {
        return Err(Failure::Usage(format!("--epsilon {} must be positive", args.epsilon)));
    }
    if let Some(h) = args.step {
        if !(h > 0.0) {
            return Err(Failure::Usage(format!("--step {h} must be positive")));
        }
    }
    let seq = load(&args.common)?;
    let probe = [Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0), Complex64::new(-1.0, 2.0)];
    let sampler = match convergence_driver(&seq, &probe, &f, &policy) {
        Ok(done) => Sampler::Section(Box::new(done.section), f),
        // A determinate finite-rank problem has exactly one solution.
        Err(Error::DeterminateInput { .. }) => {
            let m = policy.max_section.unwrap_or(usize::MAX).min(seq.max_section());
            let model = embed(&seq, m, &EmbedOptions::default())?;
            let basis = orthogonalize(&model, None)?;
            Sampler::Atoms(unique_solution_atoms(&model, &basis)?)
        }
        Err(e) => return Err(e.into()),
    };
    let inv = stieltjes_invert(|z| sampler.eval(z), a, b, args.step, Some(args.epsilon))?;
    let n = seq.block_size();
    let mut out = String::from("lambda");
    matrix_header(&mut out, if args.cumulative { "M" } else { "rho" }, n, n);
    out.push('\n');
    let rows = if args.cumulative { &inv.cumulative } else { &inv.density };
    for (l, m) in inv.lambdas.iter().zip(rows) {
        let mut row = format!("{l}");
        push_matrix(&mut row, m);
        out.push_str(&row);
        out.push('\n');
    }
    emit(&args.common.output, &out)?;
    if args.step.is_some_and(|h| h > args.epsilon) {
        eprintln!("{}", json!({ "warning": "step-exceeds-epsilon", "step": args.step, "epsilon": args.epsilon }));
    }
    if !inv.monotone {
        eprintln!(
            "{}",
            json!({ "warning": "non-monotone-cumulative", "min_increment_eigenvalue": inv.min_increment_eigenvalue })
        );
    }
    Ok(0)
}

fn generate(args: GenerateArgs) -> Outcome {
    check_precision(args.precision_bits)?;
    if args.count < 2 {
        return Err(Failure::Usage("--count must be at least 2".into()));
    }
    let p = args.precision_bits;
    let count = args.count;
    let scalar = |v: f64| CMatrix::from_element(1, 1, Complex64::new(v, 0.0));
    let two_atom = || AtomicMeasure::new(1, vec![-1.0, 1.0], vec![scalar(0.5), scalar(0.5)]);
    let seq = match args.family {
        Family::TwoAtom => oracle::atomic_moments(&two_atom()?, count, p)?,
        Family::PointMass => oracle::atomic_moments(&AtomicMeasure::new(1, vec![0.0], vec![scalar(1.0)])?, count, p)?,
        Family::Zero => MomentSequence::from_real_scalars(&vec![0.0; count], p)?,
        Family::Lognormal => oracle::lognormal_moments(count, p)?,
        Family::Gaussian => oracle::gaussian_moments(count, p)?,
        Family::BlockDiagonal => {
            oracle::block_diagonal(&oracle::lognormal_moments(count, p)?, &oracle::atomic_moments(&two_atom()?, count, p)?)?
        }
        Family::Random => {
            if args.block_size == 0 || args.atoms == 0 {
                return Err(Failure::Usage("--block-size and --atoms must be positive".into()));
            }
            let m = oracle::seeded_atomic_measure(args.seed, args.block_size, args.atoms);
            oracle::atomic_moments(&m, count, p)?
        }
    };
    emit(&args.output, &seq.to_json_string())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Determinacy(a) => determinacy(a),
        Command::Coeffs(a) => coeffs(a),
        Command::Transform(a) => transform(a),
        Command::Density(a) => density(a),
        Command::Generate(a) => generate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("{}", failure.report());
            ExitCode::from(failure.code())
        }
    }
}
