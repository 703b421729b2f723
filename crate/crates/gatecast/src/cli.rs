//! Scenario files, JSON reports, and the command-line entry points.
//!
//! A scenario file carries the network and one run's configuration:
//!
//! ```json
//! {
//!   "vertices": 3,
//!   "edges": [[0, 1], [0, 2]],
//!   "sink_dims": {"1": 2, "2": 2},
//!   "phases": {"0": 0.7},
//!   "psi": {"preset": "plus"},
//!   "mode": "enumerate",
//!   "seed": 7,
//!   "detach": []
//! }
//! ```
//!
//! Non-sink dimensions are always recomputed from the sinks, never read.
//! `psi` is either `{"preset": "plus"|"zero"}` or `{"amps": [[re, im],
//! ...]}` over the sink sites. `mode` defaults to `enumerate` when the
//! run has at most 1024 outcome branches and to `sample` otherwise;
//! sample mode requires a seed (`--seed` overrides the file).
//!
//! Reports are JSON on stdout with a human summary on stderr. Identical
//! scenario and seed produce byte-identical reports apart from the
//! `timing_ms` field, which is excluded from the hashed portion. Exit
//! codes: 0 all checks passed, 1 a named check failed, 2 usage or parse
//! errors.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde_json::{json, Value};

use crate::broadcast::{self, PhaseAssignment, RunMode};
use crate::dag::{assign_dims, DagNetwork, Topology, VertexId};
use crate::oracle;
use crate::prepare;
use crate::qudit::{MixedRadixRegister, SitePreset, StateSpec};
use crate::tol;

/// Enumerate by default only up to this many branches.
pub const DEFAULT_ENUMERATE_LIMIT: u128 = 1024;

/// What a finished command hands back to `main`.
#[derive(Debug, Clone)]
pub struct CliOutcome {
    pub exit_code: i32,
    /// The JSON report.
    pub stdout: String,
    /// Human-readable summary or usage text.
    pub stderr: String,
}

#[derive(Debug)]
enum CliError {
    /// Bad flags or malformed/invalid input files: exit 2.
    Usage(String),
    /// A check failed: exit 1, with the failing check named.
    Failed(String, Value),
}

const USAGE: &str = "\
usage: gatecast <command> [options]

commands:
  simulate --scenario <file> [--seed <n>]   run the broadcast protocol
  prepare  --scenario <file> [--detach v,..] measurement-based preparation
  verify   --props [--dmax <n>]             dense identity sweeps
  ghz      --n <n>                          qubit-chain preparation demo
";

fn fnv64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: DagNetwork,
    pub phases: PhaseAssignment,
    pub psi: StateSpec,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub detach: Vec<VertexId>,
    /// Canonical serialization of the parsed file, used for the config
    /// hash.
    pub canonical: String,
}

mod file {
    use serde::Deserialize;
    use std::collections::BTreeMap;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Psi {
        pub preset: Option<String>,
        pub amps: Option<Vec<[f64; 2]>>,
    }

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Scenario {
        pub vertices: usize,
        pub edges: Vec<[usize; 2]>,
        pub sink_dims: BTreeMap<String, usize>,
        #[serde(default)]
        pub phases: BTreeMap<String, f64>,
        pub psi: Psi,
        #[serde(default)]
        pub mode: Option<String>,
        #[serde(default)]
        pub seed: Option<u64>,
        #[serde(default)]
        pub detach: Option<Vec<usize>>,
    }
}

fn parse_id_key(key: &str) -> Result<usize, CliError> {
    key.parse::<usize>().map_err(|_| CliError::Usage(format!("non-integer vertex id key {key:?}")))
}

/// Reads and validates a scenario file. All referenced vertices must
/// exist, the graph must be acyclic, every sink needs a dimension, and
/// the phase map must cover exactly the non-sink vertices.
pub fn parse_scenario(path: &str) -> Result<Scenario, String> {
    parse_scenario_inner(path).map_err(|e| match e {
        CliError::Usage(msg) => msg,
        CliError::Failed(msg, _) => msg,
    })
}

fn parse_scenario_inner(path: &str) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
    let raw: file::Scenario = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("parse error in {path}: {e}")))?;

    let edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
    let topology = Topology::new(raw.vertices, &edges)
        .map_err(|e| CliError::Usage(format!("invalid graph in {path}: {e}")))?;
    let mut sink_dims = BTreeMap::new();
    for (key, &dim) in &raw.sink_dims {
        sink_dims.insert(VertexId(parse_id_key(key)?), dim);
    }
    let network = assign_dims(topology, &sink_dims)
        .map_err(|e| CliError::Usage(format!("invalid network in {path}: {e}")))?;
    network
        .ensure_valid()
        .map_err(|e| CliError::Usage(format!("invalid network in {path}: {e}")))?;

    let mut phases = BTreeMap::new();
    for (key, &theta) in &raw.phases {
        phases.insert(VertexId(parse_id_key(key)?), theta);
    }
    let phases = PhaseAssignment::new(&network, phases)
        .map_err(|e| CliError::Usage(format!("invalid phases in {path}: {e}")))?;

    let sink_count = network.sinks().len();
    let psi = match (&raw.psi.preset, &raw.psi.amps) {
        (Some(name), None) => match name.as_str() {
            "plus" => StateSpec::Presets(vec![SitePreset::Plus; sink_count]),
            "zero" => StateSpec::Presets(vec![SitePreset::Zero; sink_count]),
            other => return Err(CliError::Usage(format!("unknown psi preset {other:?}"))),
        },
        (None, Some(amps)) => StateSpec::Amplitudes(
            amps.iter().map(|&[re, im]| num_complex::Complex64::new(re, im)).collect(),
        ),
        _ => {
            return Err(CliError::Usage(
                "psi must have exactly one of \"preset\" or \"amps\"".to_string(),
            ))
        }
    };
    // Reject wrong-length amplitude lists right away.
    broadcast::sink_state(&network, &psi)
        .map_err(|e| CliError::Usage(format!("invalid psi in {path}: {e}")))?;

    if let Some(mode) = &raw.mode {
        if mode != "sample" && mode != "enumerate" {
            return Err(CliError::Usage(format!("unknown mode {mode:?}")));
        }
    }
    let detach: Vec<VertexId> = raw
        .detach
        .clone()
        .unwrap_or_default()
        .into_iter()
        .map(VertexId)
        .collect();
    for &v in &detach {
        if v.index() >= network.vertex_count() {
            return Err(CliError::Usage(format!("detach vertex {v} does not exist")));
        }
        if network.is_sink(v) {
            return Err(CliError::Usage(format!("cannot detach sink vertex {v}")));
        }
    }

    let canonical = serde_json::to_string(&json!({
        "vertices": raw.vertices,
        "edges": raw.edges,
        "sink_dims": raw.sink_dims,
        "phases": raw.phases,
        "psi": { "preset": raw.psi.preset, "amps": raw.psi.amps },
        "mode": raw.mode,
        "seed": raw.seed,
        "detach": raw.detach,
    }))
    .expect("canonical scenario serializes");

    Ok(Scenario {
        network,
        phases,
        psi,
        mode: raw.mode,
        seed: raw.seed,
        detach,
        canonical,
    })
}

fn resolve_mode(
    scenario: &Scenario,
    seed_override: Option<u64>,
    branch_count: u128,
) -> Result<RunMode, CliError> {
    let seed = seed_override.or(scenario.seed);
    let mode_name = match scenario.mode.as_deref() {
        Some(m) => m.to_string(),
        None if branch_count <= DEFAULT_ENUMERATE_LIMIT => "enumerate".to_string(),
        None => "sample".to_string(),
    };
    match mode_name.as_str() {
        "enumerate" => Ok(RunMode::Enumerate),
        _ => match seed {
            Some(seed) => Ok(RunMode::Sample { seed }),
            None => Err(CliError::Usage("sample mode requires a seed".to_string())),
        },
    }
}

fn dump_json(reg: &MixedRadixRegister) -> Value {
    Value::Array(
        reg.dump()
            .into_iter()
            .map(|e| json!({ "digits": e.digits, "re": e.re, "im": e.im }))
            .collect(),
    )
}

fn vertex_map_json<T: Clone + serde::Serialize>(map: &BTreeMap<VertexId, T>) -> Value {
    let mut out = serde_json::Map::new();
    for (v, t) in map {
        out.insert(v.index().to_string(), json!(t));
    }
    Value::Object(out)
}

fn mode_json(mode: RunMode) -> Value {
    match mode {
        RunMode::Enumerate => json!({ "mode": "enumerate" }),
        RunMode::Sample { seed } => json!({ "mode": "sample", "seed": seed }),
    }
}

fn simulate(scenario: &Scenario, seed_override: Option<u64>) -> Result<(Value, String), CliError> {
    let g = &scenario.network;
    let branch_count: u128 = g.non_sinks().iter().map(|&v| g.dim(v) as u128).product();
    let mode = resolve_mode(scenario, seed_override, branch_count)?;
    type SimRun =
        (Vec<broadcast::BroadcastResult>, MixedRadixRegister, Option<oracle::SupportCheck>);
    let total_dim: usize = g.dims().iter().product();
    let run = || -> crate::Result<SimRun> {
        let results = broadcast::run_protocol(g, &scenario.phases, &scenario.psi, mode)?;
        let expected = broadcast::expected_sink_state(g, &scenario.phases, &scenario.psi)?;
        // The dense support scan only covers desk-scale registers.
        let support = if total_dim <= oracle::SUPPORT_CAP {
            Some(oracle::verify_support_condition(g, &scenario.psi)?)
        } else {
            None
        };
        Ok((results, expected, support))
    };
    let (results, expected, support) =
        run().map_err(|e| CliError::Usage(format!("simulation failed: {e}")))?;

    let mut worst_fidelity = 1.0f64;
    let mut branches = Vec::new();
    for r in &results {
        let fidelity = r
            .sink_state
            .fidelity(&expected)
            .map_err(|e| CliError::Usage(format!("fidelity failed: {e}")))?;
        worst_fidelity = worst_fidelity.min(fidelity);
        branches.push(json!({
            "probability": r.probability,
            "fidelity_vs_oracle": fidelity,
            "transcript": {
                "events": r.transcript.events,
                "sink_corrections": r.transcript.sink_corrections,
            },
            "sink_state": dump_json(&r.sink_state),
        }));
    }
    let support_ok = support.as_ref().map(|s| s.ok());
    let all_pass = 1.0 - worst_fidelity < tol::PROTOCOL_INFIDELITY && support_ok != Some(false);
    let report = json!({
        "run": mode_json(mode),
        "branch_count": results.len(),
        "theta_effective": vertex_map_json(&results.first().map(|r| r.theta_effective.clone()).unwrap_or_default()),
        "expected_sink_state": dump_json(&expected),
        "branches": branches,
        "resource_support_ok": support_ok,
        "worst_fidelity": worst_fidelity,
        "all_pass": all_pass,
    });
    let summary = format!(
        "simulate: {} branch(es), worst fidelity vs oracle {:.12}, support {} -> {}",
        results.len(),
        worst_fidelity,
        match support_ok {
            Some(true) => "ok",
            Some(false) => "VIOLATED",
            None => "skipped (register too large)",
        },
        if all_pass { "pass" } else { "FAIL" },
    );
    if all_pass {
        Ok((report, summary))
    } else {
        Err(CliError::Failed(summary, report))
    }
}

fn prepare_cmd(
    scenario: &Scenario,
    seed_override: Option<u64>,
    detach_override: Option<Vec<VertexId>>,
) -> Result<(Value, String), CliError> {
    let g = &scenario.network;
    let detach = detach_override.unwrap_or_else(|| scenario.detach.clone());
    for &v in &detach {
        if v.index() >= g.vertex_count() || g.is_sink(v) {
            return Err(CliError::Usage(format!("cannot detach vertex {v}")));
        }
    }
    let branch_count: u128 = g.non_sinks().iter().map(|&v| g.dim(v) as u128).product();
    let mode = resolve_mode(scenario, seed_override, branch_count)?;

    let detached_set: BTreeSet<VertexId> = detach.iter().copied().collect();
    let run = || -> crate::Result<(Vec<prepare::PreparedBranch>, MixedRadixRegister)> {
        let branches = prepare::prepare_resource_detaching(g, &scenario.psi, &detach, mode)?;
        let target = resource_after_detach(g, &scenario.psi, &detached_set)?;
        Ok((branches, target))
    };
    let (branches, target) =
        run().map_err(|e| CliError::Usage(format!("preparation failed: {e}")))?;

    let active: Vec<VertexId> =
        g.non_sinks().into_iter().filter(|v| !detached_set.contains(v)).collect();
    let mut worst_fidelity = 1.0f64;
    let mut worst_deviation = 0.0f64;
    let mut rows = Vec::new();
    for b in &branches {
        let fidelity = b
            .state
            .fidelity(&target)
            .map_err(|e| CliError::Usage(format!("fidelity failed: {e}")))?;
        let report = prepare::check_stabilizers_at(g, &b.state, &active)
            .map_err(|e| CliError::Usage(format!("stabilizer check failed: {e}")))?;
        worst_fidelity = worst_fidelity.min(fidelity);
        worst_deviation = worst_deviation.max(report.max_deviation());
        rows.push(json!({
            "outcomes": vertex_map_json(&b.outcomes),
            "probability": b.probability,
            "detached": b.detached,
            "correction": {
                "shift_string": b.plan.shift_string.iter()
                    .map(|(v, p)| json!([v.index(), p])).collect::<Vec<_>>(),
                "shift_string_exact": b.plan.shift_string_exact,
                "sequence_len": b.plan.sequence.len(),
            },
            "fidelity_vs_direct": fidelity,
            "stabilizer_deviations": vertex_map_json(&report.deviations),
            "support_ok": report.support_ok,
        }));
    }
    let all_pass =
        1.0 - worst_fidelity < tol::PROTOCOL_INFIDELITY && worst_deviation <= tol::STABILIZER;
    let report = json!({
        "run": mode_json(mode),
        "branch_count": branches.len(),
        "detach": detach.iter().map(|v| v.index()).collect::<Vec<_>>(),
        "target_state": dump_json(&target),
        "branches": rows,
        "worst_fidelity": worst_fidelity,
        "worst_stabilizer_deviation": worst_deviation,
        "all_pass": all_pass,
    });
    let summary = format!(
        "prepare: {} branch(es), worst fidelity {:.12}, worst stabilizer deviation {:.3e} -> {}",
        branches.len(),
        worst_fidelity,
        worst_deviation,
        if all_pass { "pass" } else { "FAIL" },
    );
    if all_pass {
        Ok((report, summary))
    } else {
        Err(CliError::Failed(summary, report))
    }
}

/// The state preparation converges to once `detach` vertices are removed:
/// the resource state of the pruned network, whose new boundary holds the
/// original payload on the old sinks and the uniform state on each
/// detached vertex.
pub fn resource_after_detach(
    g: &DagNetwork,
    psi: &StateSpec,
    detached: &BTreeSet<VertexId>,
) -> crate::Result<MixedRadixRegister> {
    if detached.is_empty() {
        return broadcast::build_resource_state(g, psi);
    }
    let edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter(|e| !detached.contains(&e.tail))
        .map(|e| (e.tail.index(), e.head.index()))
        .collect();
    let pruned = DagNetwork::with_dims(
        Topology::new(g.vertex_count(), &edges)?,
        g.dims().to_vec(),
    )?;

    // Payload over the pruned network's sinks: original psi factors on the
    // old sinks, |+> on each detached vertex.
    let old_sinks: Vec<VertexId> = g.sinks().into_iter().collect();
    let psi_reg = broadcast::sink_state(g, psi)?;
    let new_sinks: Vec<VertexId> = pruned.sinks().into_iter().collect();
    let layout = broadcast::sink_layout(&pruned);
    let mut amps = Vec::with_capacity(layout.total_dim());
    let plus_scale: f64 = detached.iter().map(|&v| 1.0 / (g.dim(v) as f64).sqrt()).product();
    for flat in 0..layout.total_dim() {
        let digits = layout.digits(flat);
        let mut old_digits = vec![0usize; old_sinks.len()];
        for (i, &v) in new_sinks.iter().enumerate() {
            if let Some(j) = old_sinks.iter().position(|&s| s == v) {
                old_digits[j] = digits[i];
            }
        }
        amps.push(psi_reg.amps()[psi_reg.layout().flat(&old_digits)?] * plus_scale);
    }
    broadcast::build_resource_state(
        &pruned,
        &StateSpec::Amplitudes(amps),
    )
}

fn verify_cmd(dmax: usize) -> Result<(Value, String), CliError> {
    if !(2..=7).contains(&dmax) {
        return Err(CliError::Usage(format!("--dmax must be in 2..=7, got {dmax}")));
    }
    let mut families = Vec::new();
    let mut all_pass = true;
    let mut add = |name: &str, cases: usize, worst: f64| {
        let pass = worst <= tol::ALGEBRAIC;
        all_pass &= pass;
        families.push(json!({
            "name": name,
            "cases": cases,
            "worst_deviation": worst,
            "pass": pass,
        }));
    };

    add("gate_unitarity", dmax - 1, oracle::sweep_unitarity(dmax));
    add("basis_resolution", 2 * (dmax - 1), oracle::sweep_basis_resolution(dmax));
    let commutation = oracle::sweep_commutation(dmax)
        .map_err(|e| CliError::Usage(format!("commutation sweep failed: {e}")))?;
    add("phase_through_controlled_shift", dmax * (dmax - 1) / 2, commutation);
    let splitting = oracle::sweep_splitting(3, 3)
        .map_err(|e| CliError::Usage(format!("splitting sweep failed: {e}")))?;
    add("splitting_identity", 39, splitting);
    let projector = oracle::sweep_projector(dmax)
        .map_err(|e| CliError::Usage(format!("projector sweep failed: {e}")))?;
    add("entangler_projector", dmax + 2, projector);

    let report = json!({ "dmax": dmax, "families": families, "all_pass": all_pass });
    let summary = format!(
        "verify: {} families, all deviations <= {:.0e} -> {}",
        report["families"].as_array().unwrap().len(),
        tol::ALGEBRAIC,
        if all_pass { "pass" } else { "FAIL" },
    );
    if all_pass {
        Ok((report, summary))
    } else {
        Err(CliError::Failed(summary, report))
    }
}

fn ghz_cmd(n: usize) -> Result<(Value, String), CliError> {
    if !(2..=12).contains(&n) {
        return Err(CliError::Usage(format!("--n must be in 2..=12, got {n}")));
    }
    let g = DagNetwork::chain(n, 2).map_err(|e| CliError::Usage(e.to_string()))?;
    let psi = StateSpec::Presets(vec![SitePreset::Plus]);
    let target = prepare::ghz_register(n);
    let branches = prepare::prepare_resource(&g, &psi, RunMode::Enumerate)
        .map_err(|e| CliError::Usage(format!("preparation failed: {e}")))?;
    let mut worst_fidelity = 1.0f64;
    for b in &branches {
        let fidelity = b
            .state
            .fidelity(&target)
            .map_err(|e| CliError::Usage(format!("fidelity failed: {e}")))?;
        worst_fidelity = worst_fidelity.min(fidelity);
    }
    let all_pass = 1.0 - worst_fidelity < tol::PROTOCOL_INFIDELITY;
    let report = json!({
        "n": n,
        "branch_count": branches.len(),
        "target_state": dump_json(&target),
        "worst_fidelity": worst_fidelity,
        "all_pass": all_pass,
    });
    let summary = format!(
        "ghz: n={n}, {} outcome pattern(s), worst fidelity {:.12} -> {}",
        branches.len(),
        worst_fidelity,
        if all_pass { "pass" } else { "FAIL" },
    );
    if all_pass {
        Ok((report, summary))
    } else {
        Err(CliError::Failed(summary, report))
    }
}

fn flag_value<'a>(args: &'a [String], flag: &str) -> Result<Option<&'a str>, CliError> {
    match args.iter().position(|a| a == flag) {
        None => Ok(None),
        Some(i) => match args.get(i + 1) {
            Some(v) => Ok(Some(v)),
            None => Err(CliError::Usage(format!("{flag} needs a value"))),
        },
    }
}

fn dispatch(args: &[String]) -> Result<(Value, String, String), CliError> {
    let command = args.first().map(String::as_str).unwrap_or("");
    let echo = args.join(" ");
    match command {
        "simulate" | "prepare" => {
            let path = flag_value(args, "--scenario")?
                .ok_or_else(|| CliError::Usage("--scenario <file> is required".to_string()))?;
            let seed = flag_value(args, "--seed")?
                .map(|s| s.parse::<u64>().map_err(|_| CliError::Usage(format!("bad seed {s:?}"))))
                .transpose()?;
            let scenario = parse_scenario_inner(path)?;
            let hash = fnv64(format!("{command} {}", scenario.canonical).as_bytes());
            let (mut report, summary) = if command == "simulate" {
                simulate(&scenario, seed)?
            } else {
                let detach = flag_value(args, "--detach")?
                    .map(|list| {
                        list.split(',')
                            .filter(|s| !s.is_empty())
                            .map(|s| {
                                s.trim()
                                    .parse::<usize>()
                                    .map(VertexId)
                                    .map_err(|_| CliError::Usage(format!("bad detach list {list:?}")))
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .transpose()?;
                prepare_cmd(&scenario, seed, detach)?
            };
            report["command"] = json!(echo);
            report["config_hash"] = json!(hash);
            Ok((report, summary, echo))
        }
        "verify" => {
            if !args.iter().any(|a| a == "--props") {
                return Err(CliError::Usage("verify requires --props".to_string()));
            }
            let dmax = flag_value(args, "--dmax")?
                .map(|s| s.parse::<usize>().map_err(|_| CliError::Usage(format!("bad dmax {s:?}"))))
                .transpose()?
                .unwrap_or(7);
            let (mut report, summary) = verify_cmd(dmax)?;
            report["command"] = json!(echo);
            report["config_hash"] = json!(fnv64(echo.as_bytes()));
            Ok((report, summary, echo))
        }
        "ghz" => {
            let n = flag_value(args, "--n")?
                .ok_or_else(|| CliError::Usage("--n <n> is required".to_string()))?
                .parse::<usize>()
                .map_err(|_| CliError::Usage("bad --n value".to_string()))?;
            let (mut report, summary) = ghz_cmd(n)?;
            report["command"] = json!(echo);
            report["config_hash"] = json!(fnv64(echo.as_bytes()));
            Ok((report, summary, echo))
        }
        "" => Err(CliError::Usage("no command given".to_string())),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

/// Runs one command. Never panics on malformed input; failures come back
/// as exit codes with the problem named in the report.
pub fn run_command(args: &[String]) -> CliOutcome {
    let start = Instant::now();
    match dispatch(args) {
        Ok((mut report, summary, _)) => {
            report["timing_ms"] = json!(start.elapsed().as_millis() as u64);
            CliOutcome {
                exit_code: 0,
                stdout: serde_json::to_string_pretty(&report).expect("report serializes"),
                stderr: summary,
            }
        }
        Err(CliError::Failed(summary, mut report)) => {
            report["command"] = json!(args.join(" "));
            report["timing_ms"] = json!(start.elapsed().as_millis() as u64);
            CliOutcome {
                exit_code: 1,
                stdout: serde_json::to_string_pretty(&report).expect("report serializes"),
                stderr: summary,
            }
        }
        Err(CliError::Usage(message)) => CliOutcome {
            exit_code: 2,
            stdout: serde_json::to_string_pretty(&json!({ "error": message }))
                .expect("error serializes"),
            stderr: format!("error: {message}\n{USAGE}"),
        },
    }
}
