//! `convexpop` command-line interface.

mod input;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use convexpop::convexcert::{
    build_sdr, certify_convexity, nondegeneracy_probe, rho_program, CertStatus, CertifyOptions, SdrForm, SdrSource,
};
use convexpop::hierarchy::{build_qhat, build_qr, solve_hierarchy, HierarchyOptions, PolyOptProblem, RelaxationKind};
use convexpop::lmi::MomentStatus;
use convexpop::polyalg::Polynomial;
use convexpop::sampling;
use convexpop::sos::{is_sos_convex, jensen_check, jensen_composed_check, sos_decompose};
use serde::Serialize;

use input::{JensenFile, ProblemFile, SosFile};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input, or a failed precondition: exit 3.
    Parse(String),
    /// The solver did not produce a usable answer: exit 2.
    Solver(String),
    /// The SDR was refused for lack of a certificate: exit 4.
    Refused(String),
}

impl CliError {
    fn from_core(e: convexpop::Error) -> Self {
        match e {
            convexpop::Error::Solver(m) => CliError::Solver(m),
            other => CliError::Parse(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Refused(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Refused(m) => write!(f, "refused: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "convexpop", version, about = "Moment/SOS tools for convex polynomial optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Problem file (JSON).
    file: PathBuf,
    /// Print the JSON report instead of the text report.
    #[arg(long)]
    json: bool,
    /// Also write the JSON artifact to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve min f over K with Q^ and the Q_r hierarchy.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Highest hierarchy order r_max.
        #[arg(long)]
        order: Option<usize>,
        /// Tolerance of the exactness and feasibility tests.
        #[arg(long)]
        tol: Option<f64>,
        /// Relative eigenvalue threshold for rank decisions.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the SDPA form of every solved relaxation into this directory.
        #[arg(long)]
        dump_sdpa: Option<PathBuf>,
    },
    /// Certify convexity of K constraint by constraint.
    Certify {
        #[command(flatten)]
        common: Common,
        /// First test order.
        #[arg(long)]
        order: Option<usize>,
        /// Highest test order.
        #[arg(long)]
        dmax: Option<usize>,
        /// Acceptance threshold for the test values.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the SDPA form of every test program into this directory.
        #[arg(long)]
        dump_sdpa: Option<PathBuf>,
    },
    /// Build the semidefinite representation of K.
    Sdr {
        #[command(flatten)]
        common: Common,
        /// First certification order; also the lift order with --force.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        dmax: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Build the lift even when certification does not succeed.
        #[arg(long)]
        force: bool,
    },
    /// Check L_y(f) >= f(L_y(X)) for an SOS-convex f.
    Jensen {
        #[command(flatten)]
        common: Common,
    },
    /// Decide SOS and SOS-convexity of a polynomial.
    SosCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Sample the boundary of each constraint for vanishing gradients.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> CliResult<u8> {
    match command {
        Command::Solve { common, order, tol, tau, seed, dump_sdpa } => {
            cmd_solve(&common, order, tol, tau, seed, dump_sdpa.as_deref())
        }
        Command::Certify { common, order, dmax, tol, seed, dump_sdpa } => {
            cmd_certify(&common, order, dmax, tol, seed, dump_sdpa.as_deref())
        }
        Command::Sdr { common, order, dmax, tol, seed, force } => cmd_sdr(&common, order, dmax, tol, seed, force),
        Command::Jensen { common } => cmd_jensen(&common),
        Command::SosCheck { common } => cmd_sos_check(&common),
        Command::Probe { common, seed } => cmd_probe(&common, seed),
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Parse(e.to_string()))
}

/// Prints the text or JSON report and writes `--out`.
fn emit<T: Serialize>(common: &Common, value: &T, text: impl FnOnce() -> String) -> CliResult<()> {
    let json = to_json(value)?;
    if let Some(path) = &common.out {
        std::fs::write(path, format!("{json}\n"))
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))?;
    }
    if common.json {
        println!("{json}");
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn dump(dir: &Path, name: &str, sdpa: String) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Parse(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, sdpa).map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))
}

fn certify_options(
    file: &ProblemFile,
    order: Option<usize>,
    dmax: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
) -> CertifyOptions {
    let o = &file.options;
    let mut opts = CertifyOptions::default();
    opts.start_order = order;
    opts.d_max = dmax.or(o.d_max).unwrap_or(opts.d_max);
    opts.tol = tol.or(o.tol).unwrap_or(opts.tol);
    opts.seed = seed.or(o.seed).unwrap_or(sampling::DEFAULT_SEED);
    opts.samples = o.samples.unwrap_or(opts.samples);
    opts.sample_box = o.sample_box.clone();
    opts
}

fn cmd_solve(
    common: &Common,
    order: Option<usize>,
    tol: Option<f64>,
    tau: Option<f64>,
    seed: Option<u64>,
    dump_sdpa: Option<&Path>,
) -> CliResult<u8> {
    let file = input::problem(&common.file)?;
    let problem = PolyOptProblem::new(file.objective()?, file.set()?).map_err(CliError::from_core)?;
    let o = &file.options;
    let mut opts = HierarchyOptions::default();
    opts.r_max = order.or(o.r_max).unwrap_or(opts.r_max);
    opts.tol = tol.or(o.tol).unwrap_or(opts.tol);
    opts.tau = tau.or(o.tau).unwrap_or(opts.tau);
    opts.seed = seed.or(o.seed).unwrap_or(opts.seed);
    opts.samples = o.samples.unwrap_or(opts.samples);
    opts.waive_archimedean = o.waive_archimedean.unwrap_or(false);
    let rep = solve_hierarchy(&problem, &opts).map_err(CliError::from_core)?;
    if let Some(dir) = dump_sdpa {
        for r in &rep.results {
            let (name, compiled) = match r.kind {
                RelaxationKind::Qhat => ("qhat.dat-s".to_string(), build_qhat(&problem)),
                RelaxationKind::Qr => (format!("qr-{}.dat-s", r.order), build_qr(&problem, r.order)),
            };
            dump(dir, &name, compiled.map_err(CliError::from_core)?.sdp().to_sdpa())?;
        }
    }
    emit(common, &rep, || report::solve(&file, &problem, &rep))?;
    let decided = rep
        .results
        .iter()
        .any(|r| matches!(r.status, MomentStatus::Optimal | MomentStatus::Infeasible | MomentStatus::Unbounded));
    if decided {
        Ok(0)
    } else {
        eprintln!("solver failure: no relaxation reached a decided status");
        Ok(2)
    }
}

fn cmd_certify(
    common: &Common,
    order: Option<usize>,
    dmax: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    dump_sdpa: Option<&Path>,
) -> CliResult<u8> {
    let file = input::problem(&common.file)?;
    let set = file.set()?;
    let opts = certify_options(&file, order, dmax, tol, seed);
    let cert = certify_convexity(&set, &opts).map_err(CliError::from_core)?;
    if let Some(dir) = dump_sdpa {
        for rec in &cert.records {
            for a in &rec.attempts {
                let compiled =
                    rho_program(&cert.set, rec.j, a.d).and_then(|p| p.compile()).map_err(CliError::from_core)?;
                dump(dir, &format!("rho-g{}-d{}.dat-s", rec.j + 1, a.d), compiled.sdp().to_sdpa())?;
            }
        }
    }
    emit(common, &cert, || report::certify(&file, &cert))?;
    Ok(0)
}

fn cmd_sdr(
    common: &Common,
    order: Option<usize>,
    dmax: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    force: bool,
) -> CliResult<u8> {
    let file = input::problem(&common.file)?;
    let set = file.set()?;
    let opts = certify_options(&file, order, dmax, tol, seed);
    let cert = certify_convexity(&set, &opts).map_err(CliError::from_core)?;
    let sdr = if cert.status == CertStatus::CertifiedNumerically {
        build_sdr(&set, SdrSource::Certificate(&cert))
    } else if force {
        eprintln!("warning: certification is {}; building the lift anyway (--force)", cert.status);
        let d = order.unwrap_or(opts.d_max);
        build_sdr(&set, SdrSource::Override { order: d, form: SdrForm::Putinar })
    } else {
        return Err(CliError::Refused(format!(
            "certification status is {}; pass --force to build the lift without a certificate",
            cert.status
        )));
    }
    .map_err(CliError::from_core)?;
    if common.out.is_none() && !common.json {
        // Without --out the artifact itself is the output.
        println!("{}", to_json(&sdr)?);
        return Ok(0);
    }
    emit(common, &sdr, || report::sdr(&sdr))?;
    Ok(0)
}

fn cmd_jensen(common: &Common) -> CliResult<u8> {
    let file: JensenFile = input::parse(&common.file)?;
    let rep = match &file.g {
        None => {
            let f = Polynomial::from_term_list(file.n, &file.f).map_err(CliError::from_core)?;
            jensen_check(&f, &file.y)
        }
        Some(g) => {
            let f = Polynomial::from_term_list(1, &file.f).map_err(CliError::from_core)?;
            let g = Polynomial::from_term_list(file.n, g).map_err(CliError::from_core)?;
            jensen_composed_check(&f, &g, &file.y)
        }
    }
    .map_err(CliError::from_core)?;
    emit(common, &rep, || report::jensen(&rep))?;
    Ok(0)
}

#[derive(Serialize)]
struct SosCheckReport {
    sos: &'static str,
    witness: Option<convexpop::sos::SosWitness>,
    detail: Option<String>,
    sos_convex: bool,
    sos_convex_detail: Option<String>,
}

fn cmd_sos_check(common: &Common) -> CliResult<u8> {
    let file: SosFile = input::parse(&common.file)?;
    let p = Polynomial::from_term_list(file.n, &file.p).map_err(CliError::from_core)?;
    let (sos, witness, detail) = if p.degree() % 2 == 1 {
        ("no", None, Some(format!("odd degree {}", p.degree())))
    } else {
        match sos_decompose(&p).map_err(CliError::from_core)? {
            convexpop::sos::SosOutcome::Sos(w) => ("yes", Some(w), None),
            convexpop::sos::SosOutcome::Infeasible { .. } => ("no", None, Some("Gram SDP infeasible".into())),
            convexpop::sos::SosOutcome::Inconclusive { detail, .. } => ("inconclusive", None, Some(detail)),
        }
    };
    let (sos_convex, sos_convex_detail) = match is_sos_convex(&p).map_err(CliError::from_core)? {
        convexpop::sos::SosConvexity::SosConvex(_) => (true, None),
        convexpop::sos::SosConvexity::NotSosConvex { reason } => (false, Some(reason)),
    };
    let rep = SosCheckReport { sos, witness, detail, sos_convex, sos_convex_detail };
    emit(common, &rep, || {
        report::sos_check(
            rep.sos,
            rep.witness.as_ref(),
            rep.detail.as_deref(),
            rep.sos_convex,
            rep.sos_convex_detail.as_deref(),
        )
    })?;
    Ok(0)
}

fn cmd_probe(common: &Common, seed: Option<u64>) -> CliResult<u8> {
    let file = input::problem(&common.file)?;
    let set = file.set()?;
    let o = &file.options;
    let probe = nondegeneracy_probe(&set, o.samples.unwrap_or(500), seed.or(o.seed).unwrap_or(sampling::DEFAULT_SEED))
        .map_err(CliError::from_core)?;
    emit(common, &probe, || report::probe(&probe))?;
    Ok(0)
}
