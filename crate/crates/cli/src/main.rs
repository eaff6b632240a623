//! `truncshor`: orbits, operator synthesis, Shor runs, factoring and
//! truncation studies from the command line.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use truncshor::circuit::to_qasm3;
use truncshor::{
    analyze_measurement, build_orbit, cycle_decomposition, exact_distribution, histogram_csv,
    resolution_study_with, run_shor_dense, sample, synth_all_powers, synth_me_operator,
    Error as CoreError, FactoringInstance, Orbit, StudyRow, TrialPlan, DEFAULT_DENSE_CAP,
    DEFAULT_MAX_TRIES,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NO_FACTORS: u8 = 3;

#[derive(Parser)]
#[command(name = "truncshor", version, about = "Truncated modular-exponentiation operators for Shor's algorithm")]
struct Cli {
    /// Suppress human-readable progress; emit JSON-lines progress records on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the orbit of 1 under w -> a*w mod N and its period.
    Orbit {
        #[command(flatten)]
        target: Target,
        /// Also print the cycle structure of these powers.
        #[arg(long, value_delimiter = ',')]
        powers: Vec<u64>,
        #[arg(long, value_enum, default_value_t = OrbitFormat::Text)]
        format: OrbitFormat,
    },
    /// Synthesize U^p circuits, one file per distinct operator.
    Synth {
        #[command(flatten)]
        target: Target,
        /// Control width; powers default to 2^0 .. 2^(m-1).
        #[arg(long)]
        m: Option<u32>,
        /// Explicit comma-separated powers, overriding --m.
        #[arg(long, value_delimiter = ',')]
        powers: Vec<u64>,
        #[arg(long = "trnc-lv", default_value_t = 0)]
        trnc_lv: usize,
        #[arg(long, value_enum, default_value_t = CircuitFormat::Both)]
        format: CircuitFormat,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Control-register distribution, optionally sampled, as histogram CSV.
    Run {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long = "trnc-lv", default_value_t = 0)]
        trnc_lv: usize,
        /// Number of sampled measurements; 0 writes the exact distribution only.
        #[arg(long, default_value_t = 0)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Backend::Fast)]
        backend: Backend,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample measurements until one yields factors.
    Factor {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long = "trnc-lv", default_value_t = 0)]
        trnc_lv: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "max-tries", default_value_t = DEFAULT_MAX_TRIES)]
        max_tries: u64,
        #[arg(long, value_enum, default_value_t = OrbitFormat::Text)]
        format: OrbitFormat,
    },
    /// Mean tries-until-factor over truncation levels and control widths.
    Study {
        #[command(flatten)]
        target: Target,
        /// Comma-separated control widths.
        #[arg(long, value_delimiter = ',')]
        m: Vec<u32>,
        /// Inclusive truncation range `lo:hi`, or a single level.
        #[arg(long = "trnc-lv", default_value = "0:0", value_parser = parse_range)]
        trnc_lv: RangeInclusive<usize>,
        #[arg(long = "num-it", default_value_t = 150)]
        num_it: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "max-tries", default_value_t = DEFAULT_MAX_TRIES)]
        max_tries: u64,
        /// CSV path; a JSON mirror is written next to it. Stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Target {
    /// Odd composite modulus.
    #[arg(long = "N")]
    n: u64,
    /// Base coprime to N.
    #[arg(long)]
    a: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrbitFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CircuitFormat {
    Json,
    Qasm3,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Fast,
    Dense,
}

fn parse_range(text: &str) -> Result<RangeInclusive<usize>, String> {
    let (lo, hi) = text.split_once(':').unwrap_or((text, text));
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start `{lo}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad range end `{hi}`"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok(lo..=hi)
}

/// Failures that map to a specific exit code.
#[derive(Debug)]
enum Failure {
    Validation(String),
    NoFactors(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NotCoprime { .. }
            | CoreError::InvalidInstance(_)
            | CoreError::TooLarge { .. } => Failure::Validation(e.to_string()),
            other => Failure::Other(other.into()),
        }
    }
}

struct Reporter {
    quiet: bool,
}

impl Reporter {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn record(&self, value: serde_json::Value) {
        if self.quiet {
            eprintln!("{value}");
        }
    }
}

fn instance(target: &Target, m: Option<u32>) -> Result<FactoringInstance, CoreError> {
    let inst = FactoringInstance::with_full_resolution(target.n, target.a)?;
    Ok(match m {
        Some(m) => inst.with_control_qubits(m)?,
        None => inst,
    })
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn non_coprime_message(n: u64, a: u64, g: u64) -> String {
    format!("gcd({a}, {n}) = {g}: factors {g} x {}", n / g)
}

fn cmd_orbit(target: &Target, powers: &[u64], format: OrbitFormat) -> Result<(), Failure> {
    let inst = match instance(target, None) {
        Err(CoreError::NotCoprime { n, a, gcd }) => {
            println!("{}", non_coprime_message(n, a, gcd));
            return Ok(());
        }
        other => other?,
    };
    let orbit = build_orbit(&inst);
    let cycles: Vec<_> = powers.iter().map(|&p| cycle_decomposition(&orbit, p)).collect();
    match format {
        OrbitFormat::Json => {
            let value = json!({
                "N": inst.modulus(),
                "a": inst.base(),
                "n": inst.work_qubits(),
                "r": orbit.period(),
                "orbit": orbit.states(),
                "cycles": cycles,
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
        }
        OrbitFormat::Text => {
            println!("N = {}, a = {}, n = {}, r = {}", inst.modulus(), inst.base(), inst.work_qubits(), orbit.period());
            println!("x    f(x)  binary");
            let width = inst.work_qubits() as usize;
            for (x, &f) in orbit.states().iter().enumerate() {
                println!("{x:<4} {f:<5} {f:0width$b}");
            }
            println!("orbit: {:?}", orbit.states());
            for dec in &cycles {
                let parts: Vec<String> = dec
                    .cycles
                    .iter()
                    .map(|c| {
                        let mut closed = c.clone();
                        closed.push(c[0]);
                        format!("{closed:?}")
                    })
                    .collect();
                println!("U^{}: {}", dec.power, parts.join(" + "));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Certificate {
    #[serde(rename = "N")]
    modulus: u64,
    a: u64,
    r: u64,
    power: u64,
    trnc_lv: usize,
    /// All requested powers realized by this circuit.
    powers: Vec<u64>,
    gate_count: usize,
    levels: usize,
    /// Orbit state and its image under the circuit.
    table: Vec<(u64, u64)>,
    /// Whether the table is `f(k) -> f(k + p mod r)` for every `k`.
    matches_orbit_action: bool,
    closed_on_orbit: bool,
    cycles: Vec<Vec<u64>>,
}

fn synth_powers(inst: &FactoringInstance, m: Option<u32>, powers: &[u64]) -> Result<Vec<u64>, Failure> {
    if !powers.is_empty() {
        if powers.contains(&0) {
            return Err(Failure::Validation("powers must be positive".into()));
        }
        return Ok(powers.to_vec());
    }
    let m = m.unwrap_or(inst.control_qubits());
    if m == 0 || m > 63 {
        return Err(Failure::Validation(format!("m = {m} out of range")));
    }
    Ok((0..m).map(|q| 1u64 << q).collect())
}

fn cmd_synth(
    target: &Target,
    m: Option<u32>,
    powers: &[u64],
    trnc_lv: usize,
    format: CircuitFormat,
    out: &Path,
    rep: &Reporter,
) -> Result<(), Failure> {
    let inst = instance(target, None)?;
    let orbit = build_orbit(&inst);
    let r = orbit.period();
    if trnc_lv as u64 >= r {
        return Err(Failure::Validation(format!("trnc_lv {trnc_lv} must be below the period {r}")));
    }
    let powers = synth_powers(&inst, m, powers)?;
    let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for &p in &powers {
        groups.entry(p % r).or_default().push(p);
    }
    let mut ordered: Vec<Vec<u64>> = groups.into_values().collect();
    ordered.sort_by_key(|g| powers.iter().position(|p| *p == g[0]));
    for group in ordered {
        let p = group[0];
        let circuit = synth_me_operator(&orbit, p, trnc_lv)?;
        let stem = format!("N{}_a{}_U{}_t{}", inst.modulus(), inst.base(), p, trnc_lv);
        let table: Vec<(u64, u64)> = orbit
            .states()
            .iter()
            .map(|&w| (w, circuit.apply_to_basis(w)))
            .collect();
        let perm = circuit.permutation_table(orbit.states());
        let cert = Certificate {
            modulus: inst.modulus(),
            a: inst.base(),
            r,
            power: p,
            trnc_lv,
            powers: group.clone(),
            gate_count: circuit.gate_count(),
            levels: circuit.levels().len(),
            matches_orbit_action: (0..r).all(|k| table[k as usize].1 == orbit.state((k + p) % r)),
            closed_on_orbit: perm.is_closed_permutation(),
            table,
            cycles: cycle_decomposition(&orbit, p).cycles,
        };
        let mut written = Vec::new();
        if format != CircuitFormat::Qasm3 {
            let path = out.join(format!("{stem}.json"));
            write_atomic(&path, &circuit.to_json())?;
            written.push(path);
        }
        if format != CircuitFormat::Json {
            let path = out.join(format!("{stem}.qasm"));
            write_atomic(&path, &to_qasm3(&circuit))?;
            written.push(path);
        }
        let cert_path = out.join(format!("{stem}.cert.json"));
        write_atomic(&cert_path, &serde_json::to_string_pretty(&cert).expect("json"))?;
        written.push(cert_path);
        rep.info(format!(
            "U^{p} (powers {group:?}): {} gates in {} levels",
            circuit.gate_count(),
            circuit.levels().len()
        ));
        rep.record(json!({
            "event": "synth",
            "power": p,
            "powers": group,
            "gates": circuit.gate_count(),
            "files": written,
        }));
    }
    Ok(())
}

fn cmd_run(
    target: &Target,
    m: Option<u32>,
    trnc_lv: usize,
    shots: u64,
    seed: u64,
    backend: Backend,
    out: Option<&Path>,
    rep: &Reporter,
) -> Result<(), Failure> {
    let inst = instance(target, m)?;
    let orbit = build_orbit(&inst);
    if trnc_lv as u64 >= orbit.period() {
        return Err(Failure::Validation(format!(
            "trnc_lv {trnc_lv} must be below the period {}",
            orbit.period()
        )));
    }
    let family = synth_all_powers(&orbit, inst.control_qubits(), trnc_lv)?;
    let exact = match backend {
        Backend::Fast => exact_distribution(&inst, &family),
        Backend::Dense => run_shor_dense(&inst, &family, DEFAULT_DENSE_CAP)?,
    };
    let sampled = (shots > 0).then(|| sample(&exact, shots, seed));
    emit(out, &histogram_csv(&inst, &exact, sampled.as_ref()))?;
    rep.info(format!(
        "N = {}, m = {}, trnc_lv = {trnc_lv}: {} distinct operators, {} gates",
        inst.modulus(),
        inst.control_qubits(),
        family.distinct().len(),
        family.total_gates()
    ));
    rep.record(json!({
        "event": "run",
        "m": inst.control_qubits(),
        "trnc_lv": trnc_lv,
        "shots": shots,
        "seed": seed,
    }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_factor(
    target: &Target,
    m: Option<u32>,
    trnc_lv: usize,
    seed: u64,
    max_tries: u64,
    format: OrbitFormat,
    rep: &Reporter,
) -> Result<(), Failure> {
    if max_tries == 0 {
        return Err(Failure::Validation("max-tries must be at least 1".into()));
    }
    let inst = match instance(target, m) {
        Err(CoreError::NotCoprime { n, a, gcd }) => {
            println!("{}", non_coprime_message(n, a, gcd));
            return Ok(());
        }
        other => other?,
    };
    let orbit = build_orbit(&inst);
    if trnc_lv as u64 >= orbit.period() {
        return Err(Failure::Validation(format!(
            "trnc_lv {trnc_lv} must be below the period {}",
            orbit.period()
        )));
    }
    let family = synth_all_powers(&orbit, inst.control_qubits(), trnc_lv)?;
    let dist = exact_distribution(&inst, &family);
    let (outcome, measured) = TrialPlan::new(&inst, &dist).run_recording(seed, max_tries);
    rep.record(json!({
        "event": "factor",
        "tries": outcome.tries,
        "capped": outcome.capped,
        "l": measured,
    }));
    let Some(l) = measured else {
        return Err(Failure::NoFactors(format!(
            "no factors within {max_tries} tries (N = {}, trnc_lv = {trnc_lv})",
            inst.modulus()
        )));
    };
    let report = analyze_measurement(&inst, l);
    let (f1, f2) = report.factors().expect("recorded value produces factors");
    match format {
        OrbitFormat::Json => {
            let value = json!({
                "N": inst.modulus(),
                "a": inst.base(),
                "m": inst.control_qubits(),
                "trnc_lv": trnc_lv,
                "seed": seed,
                "tries": outcome.tries,
                "factors": [f1, f2],
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
        }
        OrbitFormat::Text => {
            print!("{report}");
            println!("{} = {f1} x {f2} (tries: {})", inst.modulus(), outcome.tries);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_study(
    target: &Target,
    m_values: &[u32],
    trnc: RangeInclusive<usize>,
    num_it: usize,
    seed: u64,
    max_tries: u64,
    out: Option<&Path>,
    rep: &Reporter,
) -> Result<(), Failure> {
    if num_it == 0 || max_tries == 0 {
        return Err(Failure::Validation("num-it and max-tries must be at least 1".into()));
    }
    let inst = instance(target, None)?;
    let orbit: Orbit = build_orbit(&inst);
    if *trnc.end() as u64 >= orbit.period() {
        return Err(Failure::Validation(format!(
            "trnc_lv {} must be below the period {}",
            trnc.end(),
            orbit.period()
        )));
    }
    let m_values = if m_values.is_empty() {
        vec![inst.control_qubits()]
    } else {
        m_values.to_vec()
    };
    let on_row = |row: &StudyRow| {
        rep.info(format!(
            "m = {:>2} trnc_lv = {:>2}: mean tries {:.2}",
            row.m, row.result.trnc_lv, row.result.mean
        ));
        rep.record(json!({
            "event": "study_row",
            "m": row.m,
            "trnc_lv": row.result.trnc_lv,
            "mean_tries": row.result.mean,
            "capped_fraction": row.result.capped_fraction(),
        }));
    };
    let study = resolution_study_with(&inst, &m_values, trnc, num_it, seed, max_tries, on_row)?;
    emit(out, &study.to_csv())?;
    if let Some(path) = out {
        write_atomic(&path.with_extension("json"), &study.to_json())?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let rep = Reporter { quiet: cli.quiet };
    match cli.command {
        Command::Orbit { target, powers, format } => cmd_orbit(&target, &powers, format),
        Command::Synth {
            target,
            m,
            powers,
            trnc_lv,
            format,
            out,
        } => cmd_synth(&target, m, &powers, trnc_lv, format, &out, &rep),
        Command::Run {
            target,
            m,
            trnc_lv,
            shots,
            seed,
            backend,
            out,
        } => cmd_run(&target, m, trnc_lv, shots, seed, backend, out.as_deref(), &rep),
        Command::Factor {
            target,
            m,
            trnc_lv,
            seed,
            max_tries,
            format,
        } => cmd_factor(&target, m, trnc_lv, seed, max_tries, format, &rep),
        Command::Study {
            target,
            m,
            trnc_lv,
            num_it,
            seed,
            max_tries,
            out,
        } => cmd_study(&target, &m, trnc_lv, num_it, seed, max_tries, out.as_deref(), &rep),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::NoFactors(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_NO_FACTORS)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
