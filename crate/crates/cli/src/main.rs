//! `pvsc`: runs contracts, prints the gate-count table, and evaluates the cover
//! and proof-cost estimators.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pvsc_core::chain::Ledger;
use pvsc_core::contracts::{self, annotated_source, ContractSpec, Value};
use pvsc_core::mpcrun::{run_private_contract, Clearance, Engine, EngineChoice, RunConfig};
use pvsc_core::outsource::{Deployment, NikeKind};
use pvsc_core::preproc::{cover_secure_probability, mc_cover_probability, CoverFormula};
use pvsc_core::transport::Role;
use pvsc_core::verify::{self, ContractPackage, SecurityProfile, SigningIdentity, TrustStore, Verdict};
use rand::{RngCore, SeedableRng};
use serde::Deserialize;
use serde_json::{json, Value as Json};

const EXIT_USAGE: u8 = 1;
const EXIT_VERIFICATION: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pvsc", version, about = "Private and verifiable smart contract runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify a contract against a policy, then execute it
    Run(RunArgs),
    /// AND-gate counts next to the published table
    Table1(Table1Args),
    /// Probability that a random cover is secure
    Cover(CoverArgs),
    /// Proof-carrying-code cost estimate for a contract of `bs` bytes
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML file with defaults for any of these flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    contract: Option<String>,
    /// One entry per party; a party with several fields separates them with commas
    #[arg(long, num_args = 1..)]
    inputs: Vec<String>,
    /// `yao`, or a comma list with one engine per party (`none` declares nothing)
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    quorum: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Verification policy (TOML)
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Machine-readable JSON report
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run through the outsourced deployment instead of a two-party session
    #[arg(long)]
    outsourced: bool,
}

#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct RunFile {
    contract: Option<String>,
    inputs: Option<Vec<String>>,
    engine: Option<String>,
    nodes: Option<usize>,
    quorum: Option<usize>,
    seed: Option<u64>,
    policy: Option<PathBuf>,
    out: Option<PathBuf>,
    outsourced: Option<bool>,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverArgs {
    #[arg(long = "ne", default_value_t = 4)]
    n_e: usize,
    #[arg(long = "no", default_value_t = 4)]
    n_o: usize,
    #[arg(long = "te", default_value_t = 3)]
    t_e: usize,
    #[arg(long = "to", default_value_t = 3)]
    t_o: usize,
    #[arg(long, short, default_value_t = 2)]
    l: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Every feasible point with n_E <= 8 and n_O <= 4
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Contract size in bytes
    bs: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.into() }
}

/// A finished command: the deterministic report, its timings, and the exit code.
struct Report {
    body: Json,
    timings: Json,
    human: String,
    code: u8,
}

fn seed_bytes(seed: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::rngs::OsRng.next_u64())
}

fn merge(mut args: RunArgs) -> Result<RunArgs, Failure> {
    let Some(path) = args.config.clone() else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let file: RunFile = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    args.contract = args.contract.or(file.contract);
    if args.inputs.is_empty() {
        args.inputs = file.inputs.unwrap_or_default();
    }
    args.engine = args.engine.or(file.engine);
    args.nodes = args.nodes.or(file.nodes);
    args.quorum = args.quorum.or(file.quorum);
    args.seed = args.seed.or(file.seed);
    args.policy = args.policy.or(file.policy);
    args.out = args.out.or(file.out);
    args.outsourced |= file.outsourced.unwrap_or(false);
    Ok(args)
}

fn parse_inputs(raw: &[String]) -> Result<Vec<Vec<Value>>, Failure> {
    raw.iter()
        .map(|party| {
            party
                .split(',')
                .map(|v| Value::parse(v).ok_or_else(|| usage(format!("not a number: {v:?}"))))
                .collect()
        })
        .collect()
}

fn parse_engines(raw: Option<&str>, parties: usize) -> Result<EngineChoice, Failure> {
    let raw = raw.unwrap_or("yao");
    let one = |s: &str| match s.trim() {
        "none" => Ok(None),
        s => Engine::parse(s).map(Some).ok_or_else(|| usage(format!("unknown engine {s:?}"))),
    };
    let list: Vec<&str> = raw.split(',').collect();
    let declared = if list.len() == 1 {
        vec![one(list[0])?; parties]
    } else if list.len() == parties {
        list.into_iter().map(one).collect::<Result<_, _>>()?
    } else {
        return Err(usage(format!("--engine lists {} engines for {parties} parties", list.len())));
    };
    Ok(EngineChoice { declared })
}

fn build_spec(name: &str, parties: usize) -> Result<ContractSpec, Failure> {
    let default = contracts::build(name).map_err(|e| usage(e.to_string()))?;
    if default.num_parties() == parties {
        return Ok(default);
    }
    contracts::build_with_parties(name, Some(parties)).map_err(|e| usage(e.to_string()))
}

/// Packages the contract's annotated source (or an empty contract when it has
/// none), signs it as `author`, and checks it against the policy.
fn verify_contract(spec: &ContractSpec, policy: &SecurityProfile, seed: u64) -> Result<(Verdict, Option<ContractPackage>), Failure> {
    let author = SigningIdentity::from_seed("author", seed);
    let (source, annotated) = match annotated_source(&spec.name) {
        Some(s) => (s.to_string(), true),
        None => (format!("contract {} {{\n}}\n", spec.name), false),
    };
    let level = policy.min_level.clamp(1, 4).max(if annotated { 2 } else { 1 });
    let pkg = match ContractPackage::build(&source, spec.circuit.digest(), level, &author) {
        Ok(p) => p,
        Err(e) => {
            let verdict = Verdict {
                ok: false,
                level,
                package: Default::default(),
                reasons: vec![verify::Reason { code: "package-build".into(), detail: e.to_string() }],
                counterexample: None,
                vc_failures: Vec::new(),
            };
            return Ok((verdict, None));
        }
    };
    let verdict = if policy.mandatory_signers.is_empty() && policy.required_spec_ids.is_empty() {
        verify::verify_standard(&pkg, policy)
    } else {
        verify::verify_extended(&pkg, policy, &TrustStore::default().with(&author))
    };
    Ok((verdict, Some(pkg)))
}

fn verdict_json(v: &Verdict) -> Json {
    json!({
        "ok": v.ok,
        "level": v.level,
        "package": v.package.to_hex(),
        "reasons": v.reasons,
        "counterexample": v.counterexample.as_ref().map(|c| c.to_string()),
    })
}

fn cmd_run(args: RunArgs) -> Result<Report, Failure> {
    let args = merge(args)?;
    let name = args.contract.clone().ok_or_else(|| usage("--contract is required"))?;
    if args.inputs.is_empty() {
        return Err(usage("--inputs is required"));
    }
    let inputs = parse_inputs(&args.inputs)?;
    let spec = build_spec(&name, inputs.len())?;
    let bits = spec.encode_inputs(&inputs).map_err(|e| usage(e.to_string()))?;
    let engines = parse_engines(args.engine.as_deref(), spec.num_parties())?;
    let policy = match &args.policy {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            SecurityProfile::from_toml(&text).map_err(|e| usage(e.to_string()))?
        }
        None => SecurityProfile::permissive(),
    };
    let seed = resolve_seed(args.seed);

    let t0 = Instant::now();
    let (verdict, _pkg) = verify_contract(&spec, &policy, seed)?;
    let verify_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut body = json!({
        "command": "run",
        "contract": spec.name,
        "seed": seed,
        "inputs": inputs,
        "engine": args.engine.clone().unwrap_or_else(|| "yao".into()),
        "outsourced": args.outsourced,
        "verification": verdict_json(&verdict),
        "gate_counts": spec.gate_counts(),
    });
    let clearance = match verdict.clearance() {
        Some(c) if verdict.ok => c,
        _ => {
            body["status"] = json!("verification-failed");
            body["messages"] = json!(0);
            let reasons: Vec<String> = verdict.reasons.iter().map(|r| r.to_string()).collect();
            return Ok(Report {
                human: format!("{name}: verification-failed\n  {}\n", reasons.join("\n  ")),
                body,
                timings: json!({ "verify_ms": verify_ms }),
                code: EXIT_VERIFICATION,
            });
        }
    };

    let t1 = Instant::now();
    if args.outsourced {
        return run_outsourced(&spec, &bits, seed, body, verify_ms);
    }
    let mut cfg = RunConfig::new(seed_bytes(seed));
    if let Some(n) = args.nodes {
        cfg.nodes = n;
    }
    cfg.quorum = args.quorum;
    cfg.label = spec.name.clone();
    let mut ledger = Ledger::new();
    match run_private_contract(&spec.circuit, &bits, &engines, &clearance, &cfg, &mut ledger) {
        Ok(r) => {
            let result = spec.decode_outputs(&r.output);
            body["status"] = json!("ok");
            body["result"] = json!(result);
            body["messages"] = json!(r.transcript.len());
            body["bytes"] = json!(r.transcript.total_bytes());
            body["rounds"] = json!(r.transcript.rounds());
            body["transcript"] = json!(r.transcript.digest().to_hex());
            body["block"] = json!(r.block);
            body["estimated_latency_ms"] = json!(r.estimated_latency_ms);
            let human = format!(
                "{}: result {}\n  AND gates {}, messages {}, bytes {}, verified at level {}\n",
                spec.name,
                result.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                spec.gate_counts().and_count,
                r.transcript.len(),
                r.transcript.total_bytes(),
                verdict.level
            );
            Ok(Report {
                body,
                timings: json!({ "verify_ms": verify_ms, "session_ms": t1.elapsed().as_secs_f64() * 1e3, "phases": r.timings }),
                human,
                code: 0,
            })
        }
        Err(abort) => {
            body["status"] = json!("protocol-abort");
            body["error"] = json!(abort.error.to_string());
            body["messages"] = json!(abort.transcript.len());
            Ok(Report {
                human: format!("{}: protocol-abort: {}\n", spec.name, abort.error),
                body,
                timings: json!({ "verify_ms": verify_ms }),
                code: EXIT_ABORT,
            })
        }
    }
}

fn run_outsourced(spec: &ContractSpec, bits: &[Vec<bool>], seed: u64, mut body: Json, verify_ms: f64) -> Result<Report, Failure> {
    let t = Instant::now();
    let abort = |mut body: Json, e: String| {
        body["status"] = json!("protocol-abort");
        body["error"] = json!(e);
        Report { human: format!("{}: protocol-abort: {e}\n", spec.name), body, timings: json!({ "verify_ms": verify_ms }), code: EXIT_ABORT }
    };
    let mut d = match Deployment::new(NikeKind::Group, bits.len(), seed_bytes(seed)) {
        Ok(d) => d,
        Err(e) => return Ok(abort(body, e.to_string())),
    };
    let mut upload_messages = 0;
    for (j, b) in bits.iter().enumerate() {
        match d.send_private_parameters(j + 1, b, j as u64 + 1) {
            Ok(t) => upload_messages += t.len(),
            Err(e) => return Ok(abort(body, e.to_string())),
        }
    }
    let r = match d.seccomp(&spec.circuit, 1, 1000) {
        Ok(r) => r,
        Err(e) => return Ok(abort(body, e.to_string())),
    };
    let result = spec.decode_outputs(&r.output);
    body["status"] = json!("ok");
    body["result"] = json!(result);
    body["upload_messages"] = json!(upload_messages);
    body["messages"] = json!(r.transcript.len());
    body["bytes"] = json!(r.transcript.total_bytes());
    body["party_messages_during_seccomp"] = json!(r.transcript.count_from_role(Role::ContractParty));
    body["transcript"] = json!(r.transcript.digest().to_hex());
    let human = format!(
        "{} (outsourced): result {}\n  uploads {}, seccomp messages {}, from contract parties {}\n",
        spec.name,
        result.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
        d.uploads(),
        r.transcript.len(),
        r.transcript.count_from_role(Role::ContractParty)
    );
    Ok(Report { body, timings: json!({ "verify_ms": verify_ms, "session_ms": t.elapsed().as_secs_f64() * 1e3 }), human, code: 0 })
}

fn cmd_table1(args: Table1Args) -> Result<Report, Failure> {
    let seed = resolve_seed(args.seed);
    let mut rows = Vec::new();
    let mut times = serde_json::Map::new();
    let mut human = format!("{:<28} {:>10} {:>10} {:>8} {:>12}\n", "contract", "ours", "paper", "ratio", "session ms");
    for (i, name) in contracts::TABLE1.iter().enumerate() {
        let spec = contracts::build(name).map_err(|e| usage(e.to_string()))?;
        let ours = spec.gate_counts().and_count;
        let paper = spec.paper_and_gates.unwrap_or(0);
        let ratio = ours as f64 / paper as f64;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed ^ i as u64);
        let bits = spec.encode_inputs(&spec.sample_inputs(&mut rng)).map_err(|e| usage(e.to_string()))?;
        let engines = EngineChoice::unanimous(spec.num_parties(), Engine::YaoSemiHonest);
        let t = Instant::now();
        run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &RunConfig::new(seed_bytes(seed)), &mut Ledger::new())
            .map_err(|e| Failure { code: EXIT_ABORT, msg: format!("{name}: {e}") })?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        human.push_str(&format!("{:<28} {:>10} {:>10} {:>8.2} {:>12.1}\n", spec.title, ours, paper, ratio, ms));
        rows.push(json!({ "name": name, "title": spec.title, "and_count": ours, "paper_and_count": paper, "ratio": ratio }));
        times.insert(name.to_string(), json!(ms));
    }
    Ok(Report { body: json!({ "command": "table1", "seed": seed, "rows": rows }), timings: Json::Object(times), human, code: 0 })
}


fn cover_point(n_e: usize, n_o: usize, t_e: usize, t_o: usize, l: usize, trials: u64, seed: u64) -> Result<Json, Failure> {
    let p = cover_secure_probability(n_e, n_o, t_e, t_o, l).map_err(|e| usage(e.to_string()))?;
    let mc = mc_cover_probability(n_e, n_o, t_e, t_o, l, trials, seed).map_err(|e| usage(e.to_string()))?;
    Ok(json!({
        "n_e": n_e, "n_o": n_o, "t_e": t_e, "t_o": t_o, "l": l,
        "probability": p.value,
        "exact": p.exact.to_string(),
        "formula": p.formula,
        "closed_form": p.closed_form,
        "closed_form_in_domain": p.formula == CoverFormula::ClosedForm,
        "monte_carlo": mc,
        "agrees": mc.within_sigmas(p.value, 3.0),
    }))
}

fn cmd_cover(args: CoverArgs) -> Result<Report, Failure> {
    let seed = resolve_seed(args.seed);
    if args.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    if !args.sweep {
        let point = cover_point(args.n_e, args.n_o, args.t_e, args.t_o, args.l, args.trials, seed)?;
        let human = format!(
            "n_E={} n_O={} t_E={} t_O={} l={}\n  probability {} ({}), closed form {}\n  monte carlo {} [{:.4}, {:.4}] over {} trials: {}\n",
            args.n_e,
            args.n_o,
            args.t_e,
            args.t_o,
            args.l,
            point["probability"],
            point["exact"].as_str().unwrap_or(""),
            point["closed_form"],
            point["monte_carlo"]["estimate"],
            point["monte_carlo"]["ci_low"].as_f64().unwrap_or(0.0),
            point["monte_carlo"]["ci_high"].as_f64().unwrap_or(0.0),
            args.trials,
            if point["agrees"] == json!(true) { "agrees within 3 sigma" } else { "DISAGREES" }
        );
        return Ok(Report { body: json!({ "command": "cover", "seed": seed, "point": point }), timings: json!({}), human, code: 0 });
    }
    let mut points = Vec::new();
    for n_e in 1..=8usize {
        for n_o in 1..=4usize {
            for l in n_e.div_ceil(n_o)..=n_e {
                for t_e in 0..n_e {
                    for t_o in 0..n_o {
                        let s = seed ^ ((((n_e * 16 + n_o) * 16 + t_e) * 16 + t_o) * 16 + l) as u64;
                        points.push(cover_point(n_e, n_o, t_e, t_o, l, args.trials, s)?);
                    }
                }
            }
        }
    }
    let agree = points.iter().filter(|p| p["agrees"] == json!(true)).count();
    let human = format!("{agree} of {} sweep points agree within 3 sigma ({} trials each)\n", points.len(), args.trials);
    Ok(Report {
        body: json!({ "command": "cover", "seed": seed, "trials": args.trials, "all_agree": agree == points.len(), "points": points }),
        timings: json!({}),
        human,
        code: 0,
    })
}

fn cmd_estimate(args: EstimateArgs) -> Result<Report, Failure> {
    let e = verify::estimate_pcc_times(args.bs);
    let human = format!(
        "bs = {} bytes\n  proof generation {} s\n  verification {} s\n  certified size {} bytes\n",
        args.bs, e.gen_seconds, e.verify_seconds, e.certified_size_bytes
    );
    Ok(Report { body: json!({ "command": "estimate", "bs": args.bs, "estimate": e }), timings: json!({}), human, code: 0 })
}

fn out_path(cmd: &Command) -> Option<PathBuf> {
    match cmd {
        Command::Run(a) => a.out.clone(),
        Command::Table1(a) => a.out.clone(),
        Command::Cover(a) => a.out.clone(),
        Command::Estimate(a) => a.out.clone(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let mut out = out_path(&cli.command);
    let result = match cli.command {
        Command::Run(a) => merge(a).and_then(|a| {
            out = a.out.clone();
            cmd_run(RunArgs { config: None, ..a })
        }),
        Command::Table1(a) => cmd_table1(a),
        Command::Cover(a) => cmd_cover(a),
        Command::Estimate(a) => cmd_estimate(a),
    };
    match result {
        Ok(report) => {
            print!("{}", report.human);
            if let Some(path) = out {
                let mut body = report.body;
                body["timings"] = report.timings;
                let text = serde_json::to_string_pretty(&body).expect("report serializes");
                if let Err(e) = std::fs::write(&path, text + "\n") {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(EXIT_USAGE);
                }
            }
            ExitCode::from(report.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
