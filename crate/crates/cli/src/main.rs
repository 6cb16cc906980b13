//! `mpsu`: run, benchmark and inspect the MPSU protocols.
//!
//! Exit codes: 0 on success, 1 on a protocol failure, 2 on a usage error.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpsu_core::group::{GroupKind, ModpGroup, Ristretto};
use mpsu_core::ot::ResourceMode;
use mpsu_core::protocol::gnt::run_demo;
use mpsu_core::protocol::{run_session, ProtocolKind, SessionConfig, SessionResult, TransportKind, PK_MAX_ELEMENT_BITS};
use mpsu_core::setio::{gen_sets, read_set, write_set};
use mpsu_core::shuffle::ShuffleMode;
use mpsu_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "mpsu", version, about = "Multi-party private set union")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one session and print the union size and stats.
    Run(RunArgs),
    /// Sweep a grid of party counts and set sizes.
    Bench(BenchArgs),
    /// Collusion leakage demonstration against a cOPRF-based protocol.
    DemoAttack(DemoArgs),
    /// Write synthetic input sets with controlled overlap.
    GenSets(GenArgs),
    /// Run a quick invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
struct SessionArgs {
    #[arg(long, default_value = "sk")]
    protocol: ProtocolKind,
    #[arg(long, default_value = "test")]
    group: GroupKind,
    #[arg(long, default_value = "dealer", value_parser = parse_resource_mode)]
    resource_mode: ResourceMode,
    #[arg(long, default_value = "dealer")]
    shuffle_mode: ShuffleMode,
    #[arg(long, default_value = "memory")]
    transport: TransportKind,
    /// Element width; defaults to 64 (20 for pk).
    #[arg(long)]
    element_bits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120_000)]
    timeout_ms: u64,
}

impl SessionArgs {
    fn config(&self, m: usize, n: usize) -> SessionConfig {
        let mut cfg = SessionConfig::new(self.protocol, m, n).with_seed(self.seed);
        if let Some(l) = self.element_bits {
            cfg.element_bits = l;
        }
        cfg.group = self.group;
        cfg.resource_mode = self.resource_mode;
        cfg.shuffle_mode = self.shuffle_mode;
        cfg.transport = self.transport;
        cfg.timeout_ms = self.timeout_ms;
        cfg
    }
}

fn parse_resource_mode(s: &str) -> Result<ResourceMode, String> {
    match s {
        "dealer" => Ok(ResourceMode::Dealer),
        "interactive" => Ok(ResourceMode::Interactive),
        other => Err(format!("unknown resource mode '{other}' (expected dealer|interactive)")),
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, default_value_t = 3)]
    parties: usize,
    /// Required unless every party has an input file.
    #[arg(long)]
    set_size: Option<usize>,
    /// Overlap fraction of synthetic sets.
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// Input file of party `i`, given as `--input-file-i PATH`.
    #[arg(long = "input-file", value_name = "I=PATH", value_parser = parse_indexed_path)]
    input_files: Vec<(usize, PathBuf)>,
    /// Write the union (or the private-ID identifiers) here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

fn parse_indexed_path(s: &str) -> Result<(usize, PathBuf), String> {
    let (i, p) = s.split_once('=').ok_or("expected I=PATH")?;
    Ok((i.parse().map_err(|_| format!("bad party index '{i}'"))?, PathBuf::from(p)))
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    parties: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    set_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "test")]
    group: GroupKind,
    /// Print every trial.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    parties: usize,
    #[arg(long)]
    set_size: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value_t = 64)]
    element_bits: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving `party-<i>.txt`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Rewrites `--input-file-3 PATH` and `--input-file-3=PATH` into the
/// `--input-file 3=PATH` form clap understands.
fn normalize_args(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        match a.strip_prefix("--input-file-") {
            Some(rest) => {
                let (idx, path) = match rest.split_once('=') {
                    Some((i, p)) => (i.to_string(), Some(p.to_string())),
                    None => (rest.to_string(), it.next()),
                };
                out.push("--input-file".into());
                out.push(format!("{idx}={}", path.unwrap_or_default()));
            }
            None => out.push(a),
        }
    }
    out
}

enum Failure {
    Usage(String),
    Protocol(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidInput(_) => Failure::Usage(e.to_string()),
            e => Failure::Protocol(e),
        }
    }
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MPSU_LOG", "warn")).init();
    let cli = Cli::parse_from(normalize_args(std::env::args()));
    let r = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::DemoAttack(a) => cmd_demo(a),
        Cmd::GenSets(a) => cmd_gen(a),
        Cmd::Selftest(a) => cmd_selftest(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Protocol(e)) => {
            eprintln!("protocol error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

fn element_bits(session: &SessionArgs) -> u32 {
    session.element_bits.unwrap_or(if session.protocol == ProtocolKind::Pk { PK_MAX_ELEMENT_BITS } else { 64 })
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let m = a.parties;
    let bits = element_bits(&a.session);
    let mut files: Vec<Option<PathBuf>> = vec![None; m];
    for (i, p) in &a.input_files {
        if *i >= m {
            return Err(Failure::Usage(format!("input file for party {i} but only {m} parties")));
        }
        files[*i] = Some(p.clone());
    }
    let mut inputs: Vec<Option<Vec<u64>>> = vec![None; m];
    for (i, f) in files.iter().enumerate() {
        if let Some(f) = f {
            inputs[i] = Some(read_set(f, bits)?);
        }
    }
    let n = match a.set_size {
        Some(n) => n,
        None => inputs
            .iter()
            .flatten()
            .map(Vec::len)
            .next()
            .ok_or_else(|| Failure::Usage("--set-size is required without input files".into()))?,
    };
    if inputs.iter().any(Option::is_none) {
        let synth = gen_sets(m, n, a.overlap, bits, a.session.seed)?;
        for (slot, s) in inputs.iter_mut().zip(synth) {
            slot.get_or_insert(s);
        }
    }
    let inputs: Vec<Vec<u64>> = inputs.into_iter().map(Option::unwrap).collect();
    let cfg = a.session.config(m, n);
    let r = run_session(&cfg, &inputs)?;
    let oracle = inputs.iter().flatten().collect::<BTreeSet<_>>().len();
    let lines: Vec<String> = match cfg.protocol {
        ProtocolKind::Pid => r.parties[0].outcome.pid.as_ref().map(|p| p.union_ids.clone()).unwrap_or_default(),
        _ => mpsu_core::setio::format_set(&r.union, bits).lines().map(String::from).collect(),
    };
    match &a.out {
        Some(path) => std::fs::write(path, lines.iter().map(|l| format!("{l}\n")).collect::<String>()).map_err(|e| io_err(path, e))?,
        None => lines.iter().for_each(|l| println!("{l}")),
    }
    println!("union size: {} (plaintext union: {oracle})", r.union_size());
    let stats = serde_json::to_string_pretty(&r.stats_json()).expect("stats serialize");
    match &a.stats_out {
        Some(path) => std::fs::write(path, stats).map_err(|e| io_err(path, e))?,
        None => println!("{stats}"),
    }
    Ok(())
}

fn bench_row(r: &SessionResult) -> serde_json::Value {
    json!({
        "protocol": r.config.protocol,
        "m": r.config.m,
        "n": r.config.n,
        "union_size": r.union_size(),
        "rehash": r.config.rehash,
        "wall_ms": r.wall_ms as u64,
        "leader_bytes_total": r.leader_bytes_total(),
        "leader_rounds": r.parties[0].stats.rounds,
        "per_party": r.parties.iter().map(|p| json!({
            "party": p.stats.party,
            "sent_bytes": p.stats.sent_bytes,
            "recv_bytes": p.stats.recv_bytes,
            "rounds": p.stats.rounds,
        })).collect::<Vec<_>>(),
    })
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let bits = element_bits(&a.session);
    let mut rows = Vec::new();
    let mut csv = String::from("protocol,m,n,union_size,wall_ms,leader_bytes_total,leader_rounds,max_party_bytes\n");
    for &m in &a.parties {
        for &n in &a.set_sizes {
            let inputs = gen_sets(m, n, a.overlap, bits, a.session.seed)?;
            let r = run_session(&a.session.config(m, n), &inputs)?;
            eprintln!("{:?} m={m} n={n}: {} ms, leader {} bytes", a.session.protocol, r.wall_ms, r.leader_bytes_total());
            let max_party = r.parties.iter().map(|p| p.stats.total_bytes()).max().unwrap_or(0);
            csv.push_str(&format!(
                "{},{m},{n},{},{},{},{},{max_party}\n",
                serde_json::to_value(r.config.protocol).unwrap().as_str().unwrap(),
                r.union_size(),
                r.wall_ms,
                r.leader_bytes_total(),
                r.parties[0].stats.rounds
            ));
            rows.push(bench_row(&r));
        }
    }
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialize"),
        Format::Csv => csv,
    };
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_demo(a: DemoArgs) -> Result<(), Failure> {
    let report = match a.group {
        GroupKind::Test => run_demo(&ModpGroup::standard(), a.trials, a.seed),
        GroupKind::Production => run_demo(&Ristretto, a.trials, a.seed),
    };
    if a.verbose {
        for (i, t) in report.outcomes.iter().enumerate() {
            println!("trial {i}: x3 in X2 = {}, inferred = {}", t.member, t.inferred);
        }
    }
    println!(
        "correct inferences: {}/{} ({} trials with x3 in X2)",
        report.correct, report.trials, report.members
    );
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let sets = gen_sets(a.parties, a.set_size, a.overlap, a.element_bits, a.seed)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    for (i, s) in sets.iter().enumerate() {
        let path = a.out_dir.join(format!("party-{i}.txt"));
        write_set(&path, s, a.element_bits)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_selftest(a: SelftestArgs) -> Result<(), Failure> {
    let mut failed = 0;
    let mut check = |name: &str, ok: Result<bool, Error>| {
        let (status, detail) = match ok {
            Ok(true) => ("PASS", String::new()),
            Ok(false) => ("FAIL", String::new()),
            Err(e) => ("FAIL", format!(" ({e})")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {name}{detail}");
    };
    for (proto, bits) in [(ProtocolKind::Sk, 64), (ProtocolKind::Pk, PK_MAX_ELEMENT_BITS), (ProtocolKind::Pid, 64)] {
        for m in [3, 4] {
            let name = format!("{proto:?} union, m={m}, n=32");
            check(&name, (|| {
                let inputs = gen_sets(m, 32, 0.5, bits, a.seed)?;
                let r = run_session(&SessionConfig::new(proto, m, 32).with_seed(a.seed), &inputs)?;
                let oracle: Vec<u64> = inputs.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
                Ok(match proto {
                    ProtocolKind::Pid => r.union_size() == oracle.len(),
                    _ => r.union == oracle,
                })
            })());
        }
    }
    check("memory transport determinism", (|| {
        let inputs = gen_sets(3, 16, 0.5, 64, a.seed)?;
        let cfg = SessionConfig::new(ProtocolKind::Sk, 3, 16).with_seed(a.seed);
        let t = |r: SessionResult| r.parties.into_iter().map(|p| p.stats.transcript).collect::<Vec<_>>();
        Ok(t(run_session(&cfg, &inputs)?) == t(run_session(&cfg, &inputs)?))
    })());
    let demo = run_demo(&ModpGroup::standard(), 100, a.seed);
    check("leakage demo, 100 trials", Ok(demo.correct == demo.trials));
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} selftest checks failed")));
    }
    Ok(())
}
