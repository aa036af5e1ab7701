use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use quasiboson_core::dsf::{table_rows, write_table_csv, StructureFunctionSpec};
use quasiboson_core::expansion::{cross_check_closed_forms, p_table};
use quasiboson_core::phi::{generate_family_seeded, write_family, PhiFamily};
use quasiboson_core::verify::{full_report, RunConfig};
use quasiboson_core::Error;

/// Composite quasiboson realization checks.
#[derive(Parser)]
#[command(name = "qboson", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable suite for a config file and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's n_max.
        #[arg(long)]
        n_max: Option<u32>,
        /// Overrides the default pass threshold.
        #[arg(long)]
        tol: Option<f64>,
        /// Report path; defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a block Phi family (identity unitaries unless seeded).
    GeneratePhi {
        #[arg(long)]
        da: usize,
        #[arg(long)]
        db: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        modes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Constituent deformation recorded in the file.
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Structure function values, energies and recurrence residuals as CSV.
    DsfTable {
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long)]
        p3: Option<f64>,
        #[arg(long)]
        n_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact reordering coefficients as CSV, checked against closed forms.
    Ptable {
        #[arg(long)]
        n_max: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    FermionicQuadratic,
    QFermionSquare,
    Parameterized,
}

enum Failure {
    /// Checks ran and something failed.
    Check(String),
    /// The run could not be set up.
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Config(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn verify(config: &Path, n_max: Option<u32>, tol: Option<f64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let start = Instant::now();
    let mut cfg = RunConfig::load(config)?;
    if let Some(n) = n_max {
        cfg.n_max = n;
    }
    if tol.is_some() {
        cfg.tol = tol;
    }
    let report = full_report(&cfg)?;
    let dest = out.or_else(|| cfg.output.clone());
    let mut w = output(dest.as_deref())?;
    w.write_all(report.to_json()?.as_bytes())?;
    w.flush()?;
    let failed: Vec<_> = report.failures().collect();
    for (suite, label) in &failed {
        eprintln!("FAIL {suite}: {label}");
    }
    eprintln!(
        "{} suites, {} failing relations, {:.2}s",
        report.suites.len(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    if report.passed() {
        eprintln!("verdict: pass");
        Ok(())
    } else {
        Err(Failure::Check("verdict: fail".into()))
    }
}

fn generate(da: usize, db: usize, m: usize, modes: usize, seed: Option<u64>, q: f64, out: &Path) -> Result<(), Failure> {
    let family = generate_family_seeded(da, db, m, modes, seed)?;
    let family = PhiFamily::new(da, db, q, family.matrices().to_vec())?;
    write_family(&family, out)?;
    Ok(())
}

fn need<T>(value: Option<T>, flag: &str, variant: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::Config(format!("--{flag} is required for {variant}")))
}

fn dsf_spec(variant: Variant, q: Option<f64>, m: Option<u32>, p: [Option<f64>; 3]) -> Result<StructureFunctionSpec, Failure> {
    Ok(match variant {
        Variant::FermionicQuadratic => {
            StructureFunctionSpec::FermionicQuadratic { m: need(m, "m", "fermionic-quadratic")? }
        }
        Variant::QFermionSquare => StructureFunctionSpec::QFermionSquare { q: need(q, "q", "q-fermion-square")? },
        Variant::Parameterized => StructureFunctionSpec::Parameterized {
            q: need(q, "q", "parameterized")?,
            p1: need(p[0], "p1", "parameterized")?,
            p2: need(p[1], "p2", "parameterized")?,
            p3: need(p[2], "p3", "parameterized")?,
        },
    })
}

fn ptable(n_max: u32, out: Option<&Path>) -> Result<(), Failure> {
    let table = p_table(n_max)?;
    let bad = cross_check_closed_forms(&table)?;
    if !bad.is_empty() {
        return Err(Failure::Check(format!("closed forms disagree at (n, k, l, j) = {bad:?}")));
    }
    let mut w = output(out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Verify { config, n_max, tol, out } => verify(&config, n_max, tol, out),
        Command::GeneratePhi { da, db, m, modes, seed, q, out } => generate(da, db, m, modes, seed, q, &out),
        Command::DsfTable { variant, q, m, p1, p2, p3, n_max, out } => {
            let spec = dsf_spec(variant, q, m, [p1, p2, p3])?;
            let rows = table_rows(&spec, n_max)?;
            let mut w = output(out.as_deref())?;
            write_table_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Ptable { n_max, out } => ptable(n_max, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
