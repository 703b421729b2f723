//! The broadcast resource state and the measurement protocol that runs on
//! it.
//!
//! The resource state entangles one qudit per vertex: every non-sink
//! starts in `|0>`, sinks hold the payload, and each arrow `v -> w`
//! contributes a controlled shift that adds the head's digit into the
//! tail. Arrows whose head sits later in the topological order are
//! applied first, so a vertex's digit is accumulated before it is used
//! as a control. On the resulting state, each agent in topological order
//! injects its own phase, applies phase corrections announced by direct
//! predecessors, measures its qudit in the fourier basis, and announces
//! the outcome. Sinks only correct. Every outcome branch then leaves the
//! sinks in
//!
//! ```text
//! (tensor over sinks v of U_v(Theta_v)) |psi>,    Theta_v = sum over
//!     predecessors w of (paths from w to v) * theta_w
//! ```
//!
//! [`expected_sink_state`] evaluates that closed form directly from path
//! counts and serves as the independent oracle for [`run_protocol`].

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::dag::{DagNetwork, Edge, VertexId};
use crate::error::{Error, Result};
use crate::qudit::{MeasureBasis, MixedRadixRegister, SiteLayout, StateSpec};

/// Enumerations refuse to expand beyond this many outcome combinations.
pub const BRANCH_CAP: u128 = 100_000;

/// The phase each non-sink agent injects. Keys are exactly the non-sink
/// vertices; sinks never inject a phase of their own.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAssignment {
    phases: BTreeMap<VertexId, f64>,
}

impl PhaseAssignment {
    pub fn new(g: &DagNetwork, phases: BTreeMap<VertexId, f64>) -> Result<Self> {
        let sinks = g.sinks();
        for v in phases.keys() {
            if v.index() >= g.vertex_count() {
                return Err(Error::UnknownVertex(*v));
            }
            if sinks.contains(v) {
                return Err(Error::PhaseOnSink(*v));
            }
        }
        for v in g.non_sinks() {
            if !phases.contains_key(&v) {
                return Err(Error::PhaseMissing(v));
            }
        }
        Ok(PhaseAssignment { phases })
    }

    /// The same phase at every non-sink.
    pub fn uniform(g: &DagNetwork, theta: f64) -> Result<Self> {
        Self::new(g, g.non_sinks().into_iter().map(|v| (v, theta)).collect())
    }

    pub fn zero(g: &DagNetwork) -> Result<Self> {
        Self::uniform(g, 0.0)
    }

    pub fn theta(&self, v: VertexId) -> f64 {
        self.phases.get(&v).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        self.phases.iter().map(|(&v, &t)| (v, t))
    }
}

/// Edges in the order their controlled shifts are applied: heads that sit
/// later in the topological order come first, so an arrow `v -> w` is
/// always applied before any arrow `u -> v`. Same-head edges commute;
/// ties break by tail position for determinism.
pub fn edge_application_order(g: &DagNetwork) -> Result<Vec<Edge>> {
    let order = g.topo_sort()?;
    let mut position = vec![0usize; g.vertex_count()];
    for (i, v) in order.iter().enumerate() {
        position[v.index()] = i;
    }
    let mut edges: Vec<Edge> = g.edges().to_vec();
    edges.sort_by_key(|e| (std::cmp::Reverse(position[e.head.index()]), position[e.tail.index()]));
    Ok(edges)
}

/// Site layout holding one qudit per vertex, site index = vertex id.
pub fn network_layout(g: &DagNetwork) -> SiteLayout {
    SiteLayout::new(g.dims()).expect("network dims are >= 2")
}

/// Layout over the sink vertices only, ascending id.
pub fn sink_layout(g: &DagNetwork) -> SiteLayout {
    let dims: Vec<usize> = g.sinks().iter().map(|&v| g.dim(v)).collect();
    SiteLayout::new(&dims).expect("sink dims are >= 2")
}

/// The payload state over the sinks, from a [`StateSpec`].
pub fn sink_state(g: &DagNetwork, psi: &StateSpec) -> Result<MixedRadixRegister> {
    MixedRadixRegister::make_state(sink_layout(g), psi)
}

/// Builds the entangled resource state for a validated network: non-sinks
/// in `|0>`, the payload on the sinks, then one controlled shift per
/// arrow (shift on the tail, controlled by the head) in
/// [`edge_application_order`].
pub fn build_resource_state(g: &DagNetwork, psi: &StateSpec) -> Result<MixedRadixRegister> {
    g.ensure_valid()?;
    let layout = network_layout(g);
    let psi_reg = sink_state(g, psi)?;
    let sinks: Vec<VertexId> = g.sinks().into_iter().collect();
    let sink_of_site: BTreeMap<usize, usize> =
        sinks.iter().enumerate().map(|(i, v)| (v.index(), i)).collect();

    // Embed |0...0> (non-sinks) x |psi> (sinks) into the full layout.
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); layout.total_dim()];
    let psi_layout = psi_reg.layout().clone();
    for flat in 0..layout.total_dim() {
        let digits = layout.digits(flat);
        let mut sink_digits = vec![0usize; sinks.len()];
        let mut nonzero_bulk = false;
        for (site, &k) in digits.iter().enumerate() {
            match sink_of_site.get(&site) {
                Some(&i) => sink_digits[i] = k,
                None if k != 0 => {
                    nonzero_bulk = true;
                    break;
                }
                None => {}
            }
        }
        if !nonzero_bulk {
            amps[flat] = psi_reg.amps()[psi_layout.flat(&sink_digits)?];
        }
    }
    let mut reg = MixedRadixRegister::from_amplitudes(layout, amps)?;
    for e in edge_application_order(g)? {
        reg.apply_controlled_shift(e.tail.index(), e.head.index())?;
    }
    Ok(reg)
}

/// One phase correction applied because a direct predecessor announced an
/// outcome: the receiving vertex applies `U(2 pi outcome / modulus)`.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectionRecord {
    pub from: VertexId,
    pub outcome: usize,
    pub modulus: usize,
}

/// What one agent did: its own phase, the corrections it applied, and its
/// measurement outcome.
#[derive(Debug, Clone, Serialize)]
pub struct MeasurementEvent {
    pub vertex: VertexId,
    pub own_phase: f64,
    pub corrections: Vec<CorrectionRecord>,
    pub outcome: usize,
}

/// Corrections a sink applied after all measurements.
#[derive(Debug, Clone, Serialize)]
pub struct SinkCorrection {
    pub sink: VertexId,
    pub corrections: Vec<CorrectionRecord>,
}

/// Ordered record of one protocol run. Events follow the topological
/// order of the non-sink vertices.
#[derive(Debug, Clone, Serialize, Default)]
pub struct ProtocolTranscript {
    pub events: Vec<MeasurementEvent>,
    pub sink_corrections: Vec<SinkCorrection>,
}

/// Outcome of one protocol branch.
#[derive(Debug, Clone)]
pub struct BroadcastResult {
    /// State over the sink sites, ascending vertex id.
    pub sink_state: MixedRadixRegister,
    pub transcript: ProtocolTranscript,
    /// The accumulated phase each sink receives.
    pub theta_effective: BTreeMap<VertexId, f64>,
    /// Product of the Born probabilities of the recorded outcomes.
    pub probability: f64,
}

/// How measurement outcomes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Draw outcomes from the Born distribution with a seeded generator.
    Sample { seed: u64 },
    /// Fan out over every outcome combination (capped at [`BRANCH_CAP`]).
    Enumerate,
}

/// Total phase arriving at each sink: path-count-weighted sum of the
/// injected phases.
pub fn theta_effective(g: &DagNetwork, phases: &PhaseAssignment) -> Result<BTreeMap<VertexId, f64>> {
    let mut out = BTreeMap::new();
    for v in g.sinks() {
        let counts = g.topology().path_counts_to(v)?;
        let mut total = 0.0;
        for (w, theta) in phases.iter() {
            total += counts[w.index()] as f64 * theta;
        }
        out.insert(v, total);
    }
    Ok(out)
}

/// The closed-form sink state: `U(Theta_v)` on each sink of `|psi>`.
/// Independent of the protocol execution path; used as its oracle.
pub fn expected_sink_state(
    g: &DagNetwork,
    phases: &PhaseAssignment,
    psi: &StateSpec,
) -> Result<MixedRadixRegister> {
    let thetas = theta_effective(g, phases)?;
    let mut reg = sink_state(g, psi)?;
    for (site, (_, theta)) in thetas.iter().enumerate() {
        reg.apply_local_phase(site, *theta)?;
    }
    Ok(reg)
}

/// Tracks which register site currently holds each vertex while
/// measurements remove sites.
#[derive(Debug, Clone)]
struct SiteMap {
    site: Vec<Option<usize>>,
}

impl SiteMap {
    fn identity(n: usize) -> Self {
        SiteMap { site: (0..n).map(Some).collect() }
    }

    fn of(&self, v: VertexId) -> usize {
        self.site[v.index()].expect("vertex still in register")
    }

    fn remove(&mut self, v: VertexId) {
        let gone = self.site[v.index()].take().expect("vertex still in register");
        for s in self.site.iter_mut().flatten() {
            if *s > gone {
                *s -= 1;
            }
        }
    }
}

struct ProtocolRun<'a> {
    g: &'a DagNetwork,
    phases: &'a PhaseAssignment,
    order: Vec<VertexId>,
    thetas: BTreeMap<VertexId, f64>,
    results: Vec<BroadcastResult>,
}

struct BranchState {
    reg: MixedRadixRegister,
    sites: SiteMap,
    outcomes: BTreeMap<VertexId, usize>,
    events: Vec<MeasurementEvent>,
    probability: f64,
}

impl<'a> ProtocolRun<'a> {
    /// Applies the predecessor corrections due at `v` and records them.
    fn corrections_for(&self, v: VertexId, outcomes: &BTreeMap<VertexId, usize>) -> Vec<CorrectionRecord> {
        self.g
            .parents(v)
            .into_iter()
            .map(|u| CorrectionRecord {
                from: u,
                outcome: outcomes[&u],
                modulus: self.g.dim(u),
            })
            .collect()
    }

    fn apply_corrections(
        reg: &mut MixedRadixRegister,
        site: usize,
        corrections: &[CorrectionRecord],
    ) -> Result<()> {
        for c in corrections {
            reg.apply_local_phase(site, TAU * c.outcome as f64 / c.modulus as f64)?;
        }
        Ok(())
    }

    fn advance(&mut self, mut branch: BranchState, step: usize, rng: &mut Option<StdRng>) -> Result<()> {
        if step == self.order.len() {
            return self.finish(branch);
        }
        let v = self.order[step];
        let site = branch.sites.of(v);
        let own_phase = self.phases.theta(v);
        branch.reg.apply_local_phase(site, own_phase)?;
        let corrections = self.corrections_for(v, &branch.outcomes);
        Self::apply_corrections(&mut branch.reg, site, &corrections)?;

        match rng {
            Some(sampler) => {
                let b = branch.reg.measure_sampled(site, MeasureBasis::Fourier, sampler)?;
                branch.reg = b.state;
                branch.sites.remove(v);
                branch.outcomes.insert(v, b.outcome);
                branch.probability *= b.probability;
                branch.events.push(MeasurementEvent {
                    vertex: v,
                    own_phase,
                    corrections,
                    outcome: b.outcome,
                });
                self.advance(branch, step + 1, rng)
            }
            None => {
                for b in branch.reg.measure_enumerate(site, MeasureBasis::Fourier)? {
                    let mut next = BranchState {
                        reg: b.state,
                        sites: branch.sites.clone(),
                        outcomes: branch.outcomes.clone(),
                        events: branch.events.clone(),
                        probability: branch.probability * b.probability,
                    };
                    next.sites.remove(v);
                    next.outcomes.insert(v, b.outcome);
                    next.events.push(MeasurementEvent {
                        vertex: v,
                        own_phase,
                        corrections: corrections.clone(),
                        outcome: b.outcome,
                    });
                    self.advance(next, step + 1, rng)?;
                }
                Ok(())
            }
        }
    }

    fn finish(&mut self, mut branch: BranchState) -> Result<()> {
        let mut sink_corrections = Vec::new();
        for v in self.g.sinks() {
            let corrections = self.corrections_for(v, &branch.outcomes);
            Self::apply_corrections(&mut branch.reg, branch.sites.of(v), &corrections)?;
            sink_corrections.push(SinkCorrection { sink: v, corrections });
        }
        self.results.push(BroadcastResult {
            sink_state: branch.reg,
            transcript: ProtocolTranscript { events: branch.events, sink_corrections },
            theta_effective: self.thetas.clone(),
            probability: branch.probability,
        });
        Ok(())
    }
}

/// Runs the protocol on a caller-supplied register covering every vertex
/// of `g` (site index = vertex id). Only acyclicity and the phase cover
/// are required here, so this also serves networks whose arrows were
/// dynamically removed; the dimension recursion is a construction-time
/// constraint checked by [`build_resource_state`].
pub fn run_protocol_on(
    initial: MixedRadixRegister,
    g: &DagNetwork,
    phases: &PhaseAssignment,
    mode: RunMode,
) -> Result<Vec<BroadcastResult>> {
    if initial.layout().dims() != g.dims() {
        return Err(Error::LayoutMismatch);
    }
    let sinks = g.sinks();
    let order: Vec<VertexId> =
        g.topo_sort()?.into_iter().filter(|v| !sinks.contains(v)).collect();
    if matches!(mode, RunMode::Enumerate) {
        let branches: u128 = order.iter().map(|&v| g.dim(v) as u128).product();
        if branches > BRANCH_CAP {
            return Err(Error::BranchExplosion { branches, cap: BRANCH_CAP });
        }
    }
    let mut run = ProtocolRun {
        g,
        phases,
        order,
        thetas: theta_effective(g, phases)?,
        results: Vec::new(),
    };
    let mut rng = match mode {
        RunMode::Sample { seed } => Some(StdRng::seed_from_u64(seed)),
        RunMode::Enumerate => None,
    };
    let branch = BranchState {
        reg: initial,
        sites: SiteMap::identity(g.vertex_count()),
        outcomes: BTreeMap::new(),
        events: Vec::new(),
        probability: 1.0,
    };
    run.advance(branch, 0, &mut rng)?;
    Ok(run.results)
}

/// Builds the resource state for `psi` and runs the full protocol. One
/// result in sample mode, one per outcome combination in enumerate mode.
pub fn run_protocol(
    g: &DagNetwork,
    phases: &PhaseAssignment,
    psi: &StateSpec,
    mode: RunMode,
) -> Result<Vec<BroadcastResult>> {
    let initial = build_resource_state(g, psi)?;
    PhaseAssignment::new(g, phases.phases.clone())?;
    run_protocol_on(initial, g, phases, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::Topology;
    use crate::qudit::SitePreset;
    use crate::tol;
    use num_complex::Complex64;

    fn diamond() -> DagNetwork {
        let topo = Topology::new(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        crate::dag::assign_dims(topo, &[(VertexId(3), 2)].into_iter().collect()).unwrap()
    }

    #[test]
    fn edge_order_applies_sink_arrows_first() {
        let chain = DagNetwork::chain(3, 2).unwrap();
        let order = edge_application_order(&chain).unwrap();
        assert_eq!(order, vec![Edge::new(1, 2), Edge::new(0, 1)]);

        let star = DagNetwork::star(2, 2).unwrap();
        let order = edge_application_order(&star).unwrap();
        assert_eq!(order.len(), 2);
        assert_eq!(order[0], Edge::new(0, 2));
    }

    #[test]
    fn star_resource_state_adds_control_digits() {
        let g = DagNetwork::star(2, 2).unwrap();
        let reg = build_resource_state(&g, &StateSpec::all_plus(2)).unwrap();
        let l = reg.layout().clone();
        for (flat, a) in reg.amps().iter().enumerate() {
            let d = l.digits(flat);
            if d[0] == d[1] + d[2] {
                assert!((a.re - 0.5).abs() < 1e-12, "digits {d:?}");
            } else {
                assert!(a.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn qubit_chain_resource_is_ghz() {
        let g = DagNetwork::chain(3, 2).unwrap();
        let reg = build_resource_state(&g, &StateSpec::Presets(vec![SitePreset::Plus])).unwrap();
        let mut ghz = vec![Complex64::new(0.0, 0.0); 8];
        ghz[0] = Complex64::new(1.0, 0.0);
        ghz[7] = Complex64::new(1.0, 0.0);
        let ghz =
            MixedRadixRegister::from_amplitudes(SiteLayout::new(&[2, 2, 2]).unwrap(), ghz).unwrap();
        assert!((reg.fidelity(&ghz).unwrap() - 1.0).abs() < tol::ALGEBRAIC);
    }

    #[test]
    fn basis_payload_gives_basis_resource() {
        let g = diamond();
        let reg = build_resource_state(&g, &StateSpec::Basis(vec![1])).unwrap();
        let nonzero: Vec<usize> =
            (0..reg.amps().len()).filter(|&i| reg.amps()[i].norm() > 1e-12).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(reg.layout().digits(nonzero[0]), vec![2, 1, 1, 1]);
    }

    #[test]
    fn every_branch_matches_the_oracle_on_star() {
        let g = DagNetwork::star(2, 2).unwrap();
        let phases = PhaseAssignment::uniform(&g, 0.9).unwrap();
        let psi = StateSpec::all_plus(2);
        let expected = expected_sink_state(&g, &phases, &psi).unwrap();
        let branches = run_protocol(&g, &phases, &psi, RunMode::Enumerate).unwrap();
        assert_eq!(branches.len(), 3);
        for b in &branches {
            assert!(1.0 - b.sink_state.fidelity(&expected).unwrap() < tol::PROTOCOL_INFIDELITY);
            assert!((b.probability - 1.0 / 3.0).abs() < tol::PROBABILITY_SUM);
        }
    }

    #[test]
    fn cascade_accumulates_phases() {
        let g = DagNetwork::chain(3, 2).unwrap();
        let phases = PhaseAssignment::new(
            &g,
            [(VertexId(0), 0.3), (VertexId(1), 1.1)].into_iter().collect(),
        )
        .unwrap();
        let psi = StateSpec::Amplitudes(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let thetas = theta_effective(&g, &phases).unwrap();
        assert!((thetas[&VertexId(2)] - 1.4).abs() < 1e-15);
        let expected = expected_sink_state(&g, &phases, &psi).unwrap();
        for b in run_protocol(&g, &phases, &psi, RunMode::Enumerate).unwrap() {
            assert!(1.0 - b.sink_state.fidelity(&expected).unwrap() < tol::PROTOCOL_INFIDELITY);
        }
    }

    #[test]
    fn merge_sums_predecessor_phases() {
        // t=0 -> v=2 <- u=1, all qubits
        let topo = Topology::new(3, &[(0, 2), (1, 2)]).unwrap();
        let g = crate::dag::assign_dims(topo, &[(VertexId(2), 2)].into_iter().collect()).unwrap();
        let phases = PhaseAssignment::new(
            &g,
            [(VertexId(0), 0.7), (VertexId(1), 0.4)].into_iter().collect(),
        )
        .unwrap();
        let thetas = theta_effective(&g, &phases).unwrap();
        assert!((thetas[&VertexId(2)] - 1.1).abs() < 1e-15);
        let psi = StateSpec::all_plus(1);
        let expected = expected_sink_state(&g, &phases, &psi).unwrap();
        for b in run_protocol(&g, &phases, &psi, RunMode::Enumerate).unwrap() {
            assert!(1.0 - b.sink_state.fidelity(&expected).unwrap() < tol::PROTOCOL_INFIDELITY);
        }
    }

    #[test]
    fn diamond_doubles_the_source_phase() {
        let g = diamond();
        let phases = PhaseAssignment::new(
            &g,
            [(VertexId(0), 0.5), (VertexId(1), 0.2), (VertexId(2), 0.1)].into_iter().collect(),
        )
        .unwrap();
        let thetas = theta_effective(&g, &phases).unwrap();
        assert!((thetas[&VertexId(3)] - (2.0 * 0.5 + 0.2 + 0.1)).abs() < 1e-15);
        let psi = StateSpec::all_plus(1);
        let expected = expected_sink_state(&g, &phases, &psi).unwrap();
        for b in run_protocol(&g, &phases, &psi, RunMode::Enumerate).unwrap() {
            assert!(1.0 - b.sink_state.fidelity(&expected).unwrap() < tol::PROTOCOL_INFIDELITY);
        }
    }

    #[test]
    fn zero_phases_return_payload_unchanged() {
        let g = diamond();
        let phases = PhaseAssignment::zero(&g).unwrap();
        let psi = StateSpec::Amplitudes(vec![Complex64::new(0.28, 0.1), Complex64::new(-0.4, 0.9)]);
        let expected = expected_sink_state(&g, &phases, &psi).unwrap();
        let payload = sink_state(&g, &psi).unwrap();
        assert!((expected.fidelity(&payload).unwrap() - 1.0).abs() < tol::ALGEBRAIC);
    }

    #[test]
    fn sample_mode_is_deterministic_per_seed() {
        let g = diamond();
        let phases = PhaseAssignment::uniform(&g, 0.8).unwrap();
        let psi = StateSpec::all_plus(1);
        let a = run_protocol(&g, &phases, &psi, RunMode::Sample { seed: 11 }).unwrap();
        let b = run_protocol(&g, &phases, &psi, RunMode::Sample { seed: 11 }).unwrap();
        assert_eq!(a.len(), 1);
        let oa: Vec<usize> = a[0].transcript.events.iter().map(|e| e.outcome).collect();
        let ob: Vec<usize> = b[0].transcript.events.iter().map(|e| e.outcome).collect();
        assert_eq!(oa, ob);
    }

    #[test]
    fn phase_cover_is_enforced() {
        let g = DagNetwork::star(2, 2).unwrap();
        assert_eq!(
            PhaseAssignment::new(&g, BTreeMap::new()),
            Err(Error::PhaseMissing(VertexId(0)))
        );
        assert_eq!(
            PhaseAssignment::new(
                &g,
                [(VertexId(0), 0.1), (VertexId(1), 0.2)].into_iter().collect()
            ),
            Err(Error::PhaseOnSink(VertexId(1)))
        );
    }

    #[test]
    fn transcript_events_follow_topo_order_and_record_corrections() {
        let g = DagNetwork::chain(3, 2).unwrap();
        let phases = PhaseAssignment::uniform(&g, 0.2).unwrap();
        let b = &run_protocol(&g, &phases, &StateSpec::all_plus(1), RunMode::Sample { seed: 3 })
            .unwrap()[0];
        let vertices: Vec<VertexId> = b.transcript.events.iter().map(|e| e.vertex).collect();
        assert_eq!(vertices, vec![VertexId(0), VertexId(1)]);
        assert!(b.transcript.events[0].corrections.is_empty());
        assert_eq!(b.transcript.events[1].corrections.len(), 1);
        assert_eq!(b.transcript.events[1].corrections[0].from, VertexId(0));
        assert_eq!(b.transcript.sink_corrections.len(), 1);
    }

    #[test]
    fn enumerate_respects_branch_cap() {
        // 17 non-sinks of dimension 2 exceed the cap of 1e5 branches.
        let g = DagNetwork::chain(18, 2).unwrap();
        let phases = PhaseAssignment::zero(&g).unwrap();
        let err = run_protocol(&g, &phases, &StateSpec::all_plus(1), RunMode::Enumerate);
        assert!(matches!(err, Err(Error::BranchExplosion { .. })));
    }

    #[test]
    fn measurement_plus_corrections_disentangle_the_measured_vertex() {
        // After one vertex's measurement and its successors' corrections,
        // the remaining register is the same state on every outcome
        // branch (up to global phase).
        let g = DagNetwork::chain(3, 2).unwrap();
        let mut reg = build_resource_state(&g, &StateSpec::all_plus(1)).unwrap();
        reg.apply_local_phase(0, 0.9).unwrap();
        let branches = reg.measure_enumerate(0, MeasureBasis::Fourier).unwrap();
        assert_eq!(branches.len(), 2);
        let mut corrected: Vec<MixedRadixRegister> = Vec::new();
        for b in branches {
            let mut state = b.state;
            // The measured vertex's sole successor applies its correction.
            state.apply_local_phase(0, TAU * b.outcome as f64 / 2.0).unwrap();
            corrected.push(state);
        }
        for pair in corrected.windows(2) {
            let fidelity = pair[0].fidelity(&pair[1]).unwrap();
            assert!((fidelity - 1.0).abs() < tol::ALGEBRAIC);
        }
    }

    #[test]
    fn phase_linearity_across_runs() {
        let g = DagNetwork::star(2, 2).unwrap();
        let p1 = PhaseAssignment::uniform(&g, 0.35).unwrap();
        let p2 = PhaseAssignment::uniform(&g, 0.9).unwrap();
        let sum = PhaseAssignment::uniform(&g, 1.25).unwrap();
        let psi = StateSpec::all_plus(2);
        let mut via_two = sink_state(&g, &psi).unwrap();
        for (site, (_, theta)) in theta_effective(&g, &p1).unwrap().iter().enumerate() {
            via_two.apply_local_phase(site, *theta).unwrap();
        }
        for (site, (_, theta)) in theta_effective(&g, &p2).unwrap().iter().enumerate() {
            via_two.apply_local_phase(site, *theta).unwrap();
        }
        let direct = expected_sink_state(&g, &sum, &psi).unwrap();
        assert!((via_two.fidelity(&direct).unwrap() - 1.0).abs() < tol::ALGEBRAIC);
    }
}
