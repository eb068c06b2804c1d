//! `ncgeom`: verify, measure and reconstruct finite spectral triples.
//!
//! Exit codes: 0 all evaluated conditions pass, 1 some condition fails,
//! 2 only inconclusive results (or data the command needs is missing),
//! 3 I/O, schema or label errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ncgeom::axioms::{
    check_dimension, run_full_report, AxiomReport, AxiomVerdict, CheckConfig, Status,
};
use ncgeom::builders::BuilderConfig;
use ncgeom::distance::{connes_distance, DEFAULT_DEGREE};
use ncgeom::dixmier::{metric_dimension, MetricDimension};
use ncgeom::geometry::{geometry_report, GeometryReport, DEFAULT_MASK};
use ncgeom::{io, Error, PointState, SpectralTriple};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ncgeom",
    version,
    about = "Numerical checks and geometry reconstruction for finite spectral triples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every axiom checker and write the report.
    Axioms(Common),
    /// Connes distance between two sample points.
    Distance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Largest monomial degree of the search space.
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        degree: usize,
    },
    /// Metric dimension and the Dixmier trace of ⟨D⟩^{-p}.
    Dimension(Common),
    /// Atlas, metric fields, chirality and the Dirac formula.
    Geometry(Common),
    /// Write a reference model as a triple document.
    Build(BuildArgs),
    /// Axioms, dimension and (with fibres) geometry in one document.
    Report(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance for exact identities.
    #[arg(long, value_parser = positive_f64)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interior-mode mask width for truncated models.
    #[arg(long, default_value_t = DEFAULT_MASK)]
    mask: usize,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Structured,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    TwoPoint,
    CircleFourier,
    CircleLattice,
    TorusLattice,
    FuzzySphere,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Two-point mass.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Fourier cutoff (default 256) or lattice sites (default 64).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 16)]
    n1: usize,
    #[arg(long, default_value_t = 16)]
    n2: usize,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Constant cell metric of the torus, row-major (4 numbers).
    #[arg(long, value_delimiter = ',')]
    metric: Option<Vec<f64>>,
    /// Fuzzy sphere size L (spin L/2).
    #[arg(long, default_value_t = 4)]
    l: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("tolerance must be positive".into())
    }
}

/// Failure of a command, already mapped to its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_)
            | Error::Schema(_)
            | Error::UnknownLabel(_)
            | Error::UnknownGenerator(_) => EXIT_IO,
            _ => EXIT_INCONCLUSIVE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Axioms(c) => cmd_axioms(&c),
        Command::Distance {
            common,
            from,
            to,
            degree,
        } => cmd_distance(&common, &from, &to, degree),
        Command::Dimension(c) => cmd_dimension(&c),
        Command::Geometry(c) => cmd_geometry(&c),
        Command::Build(b) => cmd_build(&b),
        Command::Report(c) => cmd_report(&c),
    }
}

fn load(c: &Common) -> Result<(SpectralTriple, String), Failure> {
    let t = io::load(&c.input)?;
    let fp = io::fingerprint(&t);
    Ok((t, fp))
}

fn check_config(c: &Common) -> CheckConfig {
    let mut cfg = CheckConfig {
        seed: c.seed,
        mask_width: c.mask,
        ..CheckConfig::default()
    };
    if let Some(t) = c.tol {
        cfg.tol = t;
    }
    cfg
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(io_failure),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn structured<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports always serialize") + "\n"
}

fn verdict_exit(verdicts: &[&AxiomVerdict]) -> u8 {
    // not-evaluated conditions do not affect the outcome
    if verdicts.iter().any(|v| v.status == Status::Fail) {
        EXIT_FAIL
    } else if verdicts.iter().any(|v| v.status == Status::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_PASS
    }
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Inconclusive => "INCONCLUSIVE",
        Status::NotEvaluated => "NOT EVALUATED",
    }
}

fn human_verdicts(verdicts: &[AxiomVerdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        if v.status == Status::NotEvaluated {
            s += &format!(
                "{:<14} {:<20} {}\n",
                status_word(v.status),
                v.condition,
                v.details
            );
            continue;
        }
        s += &format!(
            "{:<14} {:<20} residual {:.3e} (tol {:.1e})  {}\n",
            status_word(v.status),
            v.condition,
            v.residual,
            v.tolerance,
            v.details
        );
    }
    s
}

fn human_axioms(r: &AxiomReport) -> String {
    format!(
        "triple {} [{}], seed {}\n{}",
        r.triple,
        &r.fingerprint[..12],
        r.seed,
        human_verdicts(&r.verdicts)
    )
}

fn cmd_axioms(c: &Common) -> Result<u8, Failure> {
    let (t, fp) = load(c)?;
    let report = run_full_report(&t, &check_config(c), fp);
    let text = match c.format {
        Format::Structured => structured(&report),
        Format::Human => human_axioms(&report),
    };
    emit(c.out.as_deref(), &text)?;
    Ok(verdict_exit(&report.verdicts.iter().collect::<Vec<_>>()))
}

#[derive(Serialize)]
struct DistanceOutput {
    triple: String,
    fingerprint: String,
    from: String,
    to: String,
    degree: usize,
    value: f64,
    constraint_slack: f64,
    unbounded: bool,
    /// Values for degrees 1..=degree.
    history: Vec<f64>,
}

fn cmd_distance(c: &Common, from: &str, to: &str, degree: usize) -> Result<u8, Failure> {
    let (t, fp) = load(c)?;
    let fib = t.require_fibres().map_err(|e| Failure {
        code: EXIT_INCONCLUSIVE,
        message: e.to_string(),
    })?;
    fib.require(from)?;
    fib.require(to)?;
    let (phi, psi) = (PointState::Point(from.into()), PointState::Point(to.into()));
    let degree = degree.max(1);
    let mut history = Vec::new();
    let mut last = None;
    for k in 1..=degree {
        let r = connes_distance(&t, &phi, &psi, k)?;
        history.push(r.value);
        last = Some(r);
    }
    let r = last.expect("degree ≥ 1");
    let out = DistanceOutput {
        triple: t.name().into(),
        fingerprint: fp,
        from: from.into(),
        to: to.into(),
        degree,
        value: r.value,
        constraint_slack: r.constraint_slack,
        unbounded: r.unbounded,
        history,
    };
    let text = match c.format {
        Format::Structured => structured(&out),
        Format::Human => {
            let hist: Vec<String> = out.history.iter().map(|v| format!("{v:.10}")).collect();
            format!(
                "d({}, {}) = {}\nwitness slack {:.3e}\ndegree history [{}]\n",
                out.from,
                out.to,
                if out.unbounded {
                    "inf".to_string()
                } else {
                    format!("{:.12}", out.value)
                },
                out.constraint_slack,
                hist.join(", ")
            )
        }
    };
    emit(c.out.as_deref(), &text)?;
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct DimensionOutput {
    triple: String,
    fingerprint: String,
    estimate: Option<MetricDimension>,
    verdict: AxiomVerdict,
}

fn dimension_output(t: &SpectralTriple, fp: String) -> DimensionOutput {
    let verdict = check_dimension(t, CheckConfig::default().dimension_tol);
    DimensionOutput {
        triple: t.name().into(),
        fingerprint: fp,
        estimate: metric_dimension(t).ok(),
        verdict,
    }
}

fn human_dimension(d: &DimensionOutput) -> String {
    let mut s = format!("triple {}\n", d.triple);
    if let Some(e) = &d.estimate {
        s += &format!(
            "metric dimension {:.6} (p = {}), Dixmier trace of <D>^-p {:.6} ({})\n",
            e.p_estimate,
            e.p_rounded,
            e.trace_at_p.value.re,
            if e.trace_at_p.converged {
                "converged"
            } else {
                "not converged"
            }
        );
    }
    s + &human_verdicts(std::slice::from_ref(&d.verdict))
}

fn cmd_dimension(c: &Common) -> Result<u8, Failure> {
    let (t, fp) = load(c)?;
    let out = dimension_output(&t, fp);
    let text = match c.format {
        Format::Structured => structured(&out),
        Format::Human => human_dimension(&out),
    };
    emit(c.out.as_deref(), &text)?;
    Ok(verdict_exit(&[&out.verdict]))
}

fn geometry_tol(c: &Common) -> f64 {
    c.tol.unwrap_or(0.1)
}

fn human_geometry(g: &GeometryReport) -> String {
    let mut s = format!(
        "triple {}, atlas {} ({} charts)\n",
        g.triple,
        if g.atlas_complete {
            "complete"
        } else {
            "incomplete"
        },
        g.charts.len()
    );
    for c in &g.charts {
        s += &format!(
            "chart {:<12} coords {:<16} points {:>5}  min eig {:.6}  |g-1| {:.3e}  formulas agree {:.1e}  multiplicity {}\n",
            c.label,
            c.names.join(","),
            c.domain_size,
            c.min_eigenvalue,
            c.identity_deviation,
            c.formula_agreement,
            c.max_multiplicity
        );
    }
    s += &format!("chirality sign {:+}\n", g.chirality_sign);
    s += &human_verdicts(std::slice::from_ref(&g.chirality));
    if let Some(d) = &g.dirac {
        s += &format!(
            "dirac formula deviation {:.3e} (mask {})\n",
            d.deviation, d.mask_width
        );
    }
    for n in &g.notes {
        s += &format!("note: {n}\n");
    }
    s
}

fn cmd_geometry(c: &Common) -> Result<u8, Failure> {
    let (t, fp) = load(c)?;
    if t.fibres().is_none() {
        return Err(Failure {
            code: EXIT_INCONCLUSIVE,
            message: "geometry needs a fibre decomposition".into(),
        });
    }
    let g = geometry_report(&t, fp, c.mask, geometry_tol(c))?;
    let text = match c.format {
        Format::Structured => structured(&g),
        Format::Human => human_geometry(&g),
    };
    emit(c.out.as_deref(), &text)?;
    Ok(verdict_exit(&[&g.chirality]))
}

fn cmd_build(b: &BuildArgs) -> Result<u8, Failure> {
    let cfg = match b.model {
        Model::TwoPoint => BuilderConfig::TwoPoint { m: b.m },
        Model::CircleFourier => BuilderConfig::CircleFourier {
            n: b.n.unwrap_or(256),
            radius: b.radius,
        },
        Model::CircleLattice => BuilderConfig::CircleLattice {
            n: b.n.unwrap_or(64),
            radius: b.radius,
        },
        Model::TorusLattice => BuilderConfig::TorusLattice {
            n1: b.n1,
            n2: b.n2,
            metric: b.metric.clone(),
        },
        Model::FuzzySphere => BuilderConfig::FuzzySphere { l: b.l },
    };
    let t = cfg.build().map_err(|e| Failure {
        code: EXIT_FAIL,
        message: e.to_string(),
    })?;
    emit(b.out.as_deref(), &(io::to_json(&t) + "\n"))?;
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct FullReport {
    axioms: AxiomReport,
    dimension: DimensionOutput,
    geometry: Option<GeometryReport>,
    notes: Vec<String>,
}

fn cmd_report(c: &Common) -> Result<u8, Failure> {
    let (t, fp) = load(c)?;
    let axioms = run_full_report(&t, &check_config(c), fp.clone());
    let dimension = dimension_output(&t, fp.clone());
    let mut notes = Vec::new();
    let geometry = if t.fibres().is_some() {
        match geometry_report(&t, fp, c.mask, geometry_tol(c)) {
            Ok(g) => Some(g),
            Err(e) => {
                notes.push(format!("geometry: {e}"));
                None
            }
        }
    } else {
        notes.push("geometry: no fibre decomposition".into());
        None
    };
    let report = FullReport {
        axioms,
        dimension,
        geometry,
        notes,
    };
    let text = match c.format {
        Format::Structured => structured(&report),
        Format::Human => {
            let mut s = human_axioms(&report.axioms);
            s += &human_dimension(&report.dimension);
            if let Some(g) = &report.geometry {
                s += &human_geometry(g);
            }
            for n in &report.notes {
                s += &format!("note: {n}\n");
            }
            s
        }
    };
    emit(c.out.as_deref(), &text)?;
    let mut vs: Vec<&AxiomVerdict> = report.axioms.verdicts.iter().collect();
    if let Some(g) = &report.geometry {
        vs.push(&g.chirality);
    }
    Ok(verdict_exit(&vs))
}
