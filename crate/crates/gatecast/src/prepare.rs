//! Single-round measurement-based preparation of the resource state.
//!
//! Instead of running the entangling circuit arrow by arrow, the resource
//! state can be projected out of a product state in one round: give every
//! non-sink `v` an ancilla copy `v'` of the same dimension, entangle the
//! pair with the diagonal gate
//!
//! ```text
//! CW_{v',v} = sum_l |l><l|_{v'} (x) (W_v)^l
//! ```
//!
//! where `W_v` is the phase word putting `+2 pi / d(v)` on `v` and
//! `-2 pi / d(v)` on each direct successor, and fourier-measure every
//! ancilla. The outcome `s_v` leaves the register in the `K_v == s_v
//! (mod d(v))` congruence sector; a classical feedforward correction then
//! returns every sector to the resource state, whatever the outcomes.
//!
//! Two forms of that correction are produced. The *shift string*
//! multiplies each vertex by a plain shift power, the form agents apply
//! locally; it is exact whenever every shifted vertex has only
//! single-child parents (qubit chains, merge trees, single-hub stars),
//! and [`CorrectionPlan::shift_string_exact`] says when that holds. The
//! *sequence* form conjugates the same shifts by the entangling circuit —
//! uncompute, shift every non-sink digit to zero, recompute — and is
//! exact on every network; [`prepare_resource`] applies it.
//!
//! Measuring an ancilla in the computational basis instead *detaches* its
//! vertex: the entangler collapses to a known diagonal phase word
//! (recorded, so it can be cancelled) and the vertex's outgoing arrows
//! stop transporting anything. See [`PrepState::detach_forced`].

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::broadcast::{self, RunMode, BRANCH_CAP};
use crate::dag::{DagNetwork, Topology, VertexId};
use crate::error::{Error, Result};
use crate::qudit::{MeasureBasis, MixedRadixRegister, SiteLayout, StateSpec};
use crate::tol;

/// The phase word of the check operator at `v`: `+2 pi / d(v)` on `v`
/// itself and `-2 pi / d(v)` on each direct successor. On a basis state
/// it contributes `exp(2 pi i K_v / d(v))` with
/// `K_v = k_v - sum of successor digits`.
pub fn stabilizer_word(g: &DagNetwork, v: VertexId) -> Vec<(VertexId, f64)> {
    let unit = TAU / g.dim(v) as f64;
    let mut word = vec![(v, unit)];
    for w in g.children(v) {
        word.push((w, -unit));
    }
    word
}

/// Ancilla bookkeeping per non-sink vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaStatus {
    Unmeasured,
    MeasuredFourier(usize),
    MeasuredComputational(usize),
}

/// Record of one detachment: the computational outcome of the ancilla and
/// the residual diagonal word `(W_v)^l` left on the register.
#[derive(Debug, Clone, Serialize)]
pub struct DetachRecord {
    pub vertex: VertexId,
    pub outcome: usize,
    /// Site/angle pairs of the residual operator; apply the negated word
    /// to cancel it.
    pub residual_word: Vec<(VertexId, f64)>,
}

/// The pre-measurement register: one main qudit per vertex plus one
/// ancilla per non-sink, already entangled by the CW gates.
#[derive(Debug, Clone)]
pub struct PrepState {
    g: DagNetwork,
    reg: MixedRadixRegister,
    main_site: Vec<usize>,
    anc_site: Vec<Option<usize>>,
    status: BTreeMap<VertexId, AncillaStatus>,
    detached: Vec<DetachRecord>,
}

/// Builds the product state (non-sink mains and all ancillas in the
/// uniform superposition, payload on the sinks) and applies one CW gate
/// per non-sink. The CW gates are diagonal and commute, so their order is
/// irrelevant.
pub fn build_prep_state(g: &DagNetwork, psi: &StateSpec) -> Result<PrepState> {
    g.ensure_valid()?;
    let n = g.vertex_count();
    let non_sinks = g.non_sinks();
    let sinks: Vec<VertexId> = g.sinks().into_iter().collect();

    let mut dims: Vec<usize> = g.dims().to_vec();
    let mut anc_site = vec![None; n];
    for (i, &v) in non_sinks.iter().enumerate() {
        dims.push(g.dim(v));
        anc_site[v.index()] = Some(n + i);
    }
    let layout = SiteLayout::new(&dims)?;

    let psi_reg = broadcast::sink_state(g, psi)?;
    let psi_layout = psi_reg.layout().clone();
    let sink_index: BTreeMap<usize, usize> =
        sinks.iter().enumerate().map(|(i, v)| (v.index(), i)).collect();

    // Uniform magnitude on every non-sink main and every ancilla.
    let uniform: f64 = non_sinks.iter().map(|&v| 1.0 / g.dim(v) as f64).product();
    let mut amps = Vec::with_capacity(layout.total_dim());
    let mut sink_digits = vec![0usize; sinks.len()];
    for flat in 0..layout.total_dim() {
        for (site, &i) in sink_index.iter().map(|(&s, i)| (s, i)) {
            sink_digits[i] = layout.digit(flat, site);
        }
        amps.push(psi_reg.amps()[psi_layout.flat(&sink_digits)?] * uniform);
    }
    let mut reg = MixedRadixRegister::from_amplitudes(layout, amps)?;

    let main_site: Vec<usize> = (0..n).collect();
    for &v in &non_sinks {
        let word: Vec<(usize, f64)> = stabilizer_word(g, v)
            .into_iter()
            .map(|(u, theta)| (main_site[u.index()], theta))
            .collect();
        reg.apply_controlled_phase_word(anc_site[v.index()].unwrap(), &word)?;
    }

    Ok(PrepState {
        status: non_sinks.iter().map(|&v| (v, AncillaStatus::Unmeasured)).collect(),
        g: g.clone(),
        reg,
        main_site,
        anc_site,
        detached: Vec::new(),
    })
}

impl PrepState {
    pub fn register(&self) -> &MixedRadixRegister {
        &self.reg
    }

    pub fn status(&self, v: VertexId) -> Option<AncillaStatus> {
        self.status.get(&v).copied()
    }

    pub fn detach_records(&self) -> &[DetachRecord] {
        &self.detached
    }

    /// Vertices whose ancilla has been measured in the computational
    /// basis.
    pub fn detached_set(&self) -> BTreeSet<VertexId> {
        self.detached.iter().map(|r| r.vertex).collect()
    }

    fn ancilla_site(&self, v: VertexId) -> Result<usize> {
        match self.status.get(&v) {
            None => Err(Error::NoAncilla(v)),
            Some(AncillaStatus::Unmeasured) => Ok(self.anc_site[v.index()].unwrap()),
            Some(_) => Err(Error::AncillaAlreadyMeasured(v)),
        }
    }

    fn drop_site(&mut self, gone: usize) {
        for s in &mut self.main_site {
            if *s > gone {
                *s -= 1;
            }
        }
        for s in self.anc_site.iter_mut().flatten() {
            if *s > gone {
                *s -= 1;
            }
        }
    }

    fn record_detach(&mut self, v: VertexId, outcome: usize) -> DetachRecord {
        let site = self.anc_site[v.index()].take().unwrap();
        self.drop_site(site);
        self.status.insert(v, AncillaStatus::MeasuredComputational(outcome));
        let residual_word: Vec<(VertexId, f64)> = stabilizer_word(&self.g, v)
            .into_iter()
            .map(|(u, theta)| (u, theta * outcome as f64))
            .collect();
        let record = DetachRecord { vertex: v, outcome, residual_word };
        self.detached.push(record.clone());
        record
    }

    /// Measures the ancilla of `v` in the computational basis with a
    /// forced outcome, detaching `v`'s outgoing arrows from the network.
    pub fn detach_forced(&mut self, v: VertexId, outcome: usize) -> Result<DetachRecord> {
        let site = self.ancilla_site(v)?;
        let branch = self.reg.measure_forced(site, MeasureBasis::Computational, outcome)?;
        self.reg = branch.state;
        Ok(self.record_detach(v, outcome))
    }

    /// As [`PrepState::detach_forced`] with the outcome drawn from the
    /// Born distribution (uniform over `d(v)` values).
    pub fn detach_sampled<R: Rng>(&mut self, v: VertexId, rng: &mut R) -> Result<DetachRecord> {
        let site = self.ancilla_site(v)?;
        let branch = self.reg.measure_sampled(site, MeasureBasis::Computational, rng)?;
        self.reg = branch.state;
        Ok(self.record_detach(v, branch.outcome))
    }

    /// Non-sink vertices whose ancilla is still unmeasured, ascending id.
    pub fn unmeasured(&self) -> Vec<VertexId> {
        self.status
            .iter()
            .filter(|(_, s)| matches!(s, AncillaStatus::Unmeasured))
            .map(|(&v, _)| v)
            .collect()
    }

    /// Cancels a recorded detachment residual on this pre-measurement
    /// register (the residual word lives on main sites only).
    pub fn cancel_residual(&mut self, record: &DetachRecord) -> Result<()> {
        let word: Vec<(usize, f64)> = record
            .residual_word
            .iter()
            .map(|&(v, theta)| (self.main_site[v.index()], -theta))
            .collect();
        self.reg.apply_phase_word(&word)
    }
}

/// One outcome pattern of the ancilla measurements: the fourier outcomes,
/// the joint probability (including earlier detachments), and the
/// register over the main vertices only.
#[derive(Debug, Clone)]
pub struct AncillaBranch {
    pub outcomes: BTreeMap<VertexId, usize>,
    pub probability: f64,
    pub register: MixedRadixRegister,
    pub detached: Vec<DetachRecord>,
}

/// Fourier-measures every remaining ancilla (ascending vertex id). In
/// enumerate mode one branch per surviving outcome pattern is returned;
/// in sample mode exactly one.
pub fn measure_ancillas(prep: PrepState, mode: RunMode) -> Result<Vec<AncillaBranch>> {
    let pending = prep.unmeasured();
    if matches!(mode, RunMode::Enumerate) {
        let branches: u128 = pending.iter().map(|&v| prep.g.dim(v) as u128).product();
        if branches > BRANCH_CAP {
            return Err(Error::BranchExplosion { branches, cap: BRANCH_CAP });
        }
    }
    let mut rng = match mode {
        RunMode::Sample { seed } => Some(StdRng::seed_from_u64(seed)),
        RunMode::Enumerate => None,
    };
    let mut done = Vec::new();
    let mut stack = vec![(prep, BTreeMap::new(), 1.0f64)];
    while let Some((state, outcomes, probability)) = stack.pop() {
        let pending = state.unmeasured();
        let Some(&v) = pending.first() else {
            done.push(AncillaBranch {
                outcomes,
                probability,
                detached: state.detached.clone(),
                register: state.reg,
            });
            continue;
        };
        let site = state.anc_site[v.index()].unwrap();
        match &mut rng {
            Some(rng) => {
                let b = state.reg.measure_sampled(site, MeasureBasis::Fourier, rng)?;
                let mut next = state;
                next.reg = b.state;
                next.anc_site[v.index()] = None;
                next.drop_site(site);
                next.status.insert(v, AncillaStatus::MeasuredFourier(b.outcome));
                let mut outcomes = outcomes;
                outcomes.insert(v, b.outcome);
                stack.push((next, outcomes, probability * b.probability));
            }
            None => {
                for b in state.reg.measure_enumerate(site, MeasureBasis::Fourier)? {
                    let mut next = state.clone();
                    next.reg = b.state;
                    next.anc_site[v.index()] = None;
                    next.drop_site(site);
                    next.status.insert(v, AncillaStatus::MeasuredFourier(b.outcome));
                    let mut outcomes = outcomes.clone();
                    outcomes.insert(v, b.outcome);
                    stack.push((next, outcomes, probability * b.probability));
                }
            }
        }
    }
    // Depth-first expansion reverses outcome order; restore lexicographic.
    done.sort_by(|a, b| {
        let ka: Vec<usize> = a.outcomes.values().copied().collect();
        let kb: Vec<usize> = b.outcomes.values().copied().collect();
        ka.cmp(&kb)
    });
    Ok(done)
}

/// One gate of a feedforward correction, over main-register sites.
#[derive(Debug, Clone, Serialize)]
pub enum CorrectionGate {
    /// `X^power` on one vertex.
    Shift { vertex: VertexId, power: i64 },
    /// Adds `power` times the control digit into the target digit.
    ControlledShift { target: VertexId, control: VertexId, power: i64 },
}

/// The feedforward correction for one outcome pattern.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectionPlan {
    /// Per-vertex plain shift powers (vertices with power 0 omitted):
    /// vertex `u` gets `X^{-sum_v n(u -> v) s_v mod d(u)}`, the count
    /// running over paths in the network (a vertex reaches itself by the
    /// empty path). Exact when [`CorrectionPlan::shift_string_exact`].
    pub shift_string: Vec<(VertexId, usize)>,
    /// True when the shift string provably equals the exact sequence on
    /// every branch: every shifted vertex has only single-child parents.
    pub shift_string_exact: bool,
    /// The always-exact form: uncompute the entangling circuit, shift
    /// every non-sink digit by `-s_v`, recompute.
    pub sequence: Vec<CorrectionGate>,
}

/// Builds the correction for `outcomes` on the network `g` with the
/// outgoing arrows of `detached` vertices removed. `outcomes` must cover
/// exactly the non-sink vertices that are not detached.
pub fn correction_plan(
    g: &DagNetwork,
    detached: &BTreeSet<VertexId>,
    outcomes: &BTreeMap<VertexId, usize>,
) -> Result<CorrectionPlan> {
    let sinks = g.sinks();
    let active: Vec<VertexId> = g
        .non_sinks()
        .into_iter()
        .filter(|v| !detached.contains(v))
        .collect();
    for v in outcomes.keys() {
        if v.index() >= g.vertex_count() {
            return Err(Error::UnknownVertex(*v));
        }
        if sinks.contains(v) || detached.contains(v) {
            return Err(Error::NoAncilla(*v));
        }
    }
    for &v in &active {
        if !outcomes.contains_key(&v) {
            return Err(Error::OutcomeMissing(v));
        }
    }

    // The network with detached vertices' outgoing arrows removed.
    let pruned_edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter(|e| !detached.contains(&e.tail))
        .map(|e| (e.tail.index(), e.head.index()))
        .collect();
    let pruned_topo = Topology::new(g.vertex_count(), &pruned_edges)?;
    let pruned = DagNetwork::with_dims(pruned_topo, g.dims().to_vec())?;

    // Plain per-vertex shift powers from reflexive path counts.
    let mut shift_string = Vec::new();
    let mut totals: BTreeMap<VertexId, u128> = BTreeMap::new();
    for (&v, &s) in outcomes {
        let counts = pruned.topology().path_counts_to(v)?;
        for &u in &active {
            // counts[v] = 1 covers the vertex's own outcome.
            *totals.entry(u).or_default() += counts[u.index()] as u128 * s as u128;
        }
    }
    for &u in &active {
        let d = g.dim(u) as u128;
        let power = (d - totals.get(&u).copied().unwrap_or(0) % d) % d;
        if power != 0 {
            shift_string.push((u, power as usize));
        }
    }
    let shift_string_exact = shift_string.iter().all(|&(w, _)| {
        pruned.parents(w).iter().all(|&x| pruned.children(x).len() == 1)
    });

    let shifts: Vec<CorrectionGate> = active
        .iter()
        .filter(|&&v| outcomes[&v] != 0)
        .map(|&v| CorrectionGate::Shift { vertex: v, power: -(outcomes[&v] as i64) })
        .collect();
    let mut sequence = Vec::new();
    if !shifts.is_empty() {
        let build_order = broadcast::edge_application_order(&pruned)?;
        for e in build_order.iter().rev() {
            sequence.push(CorrectionGate::ControlledShift {
                target: e.tail,
                control: e.head,
                power: -1,
            });
        }
        sequence.extend(shifts);
        for e in &build_order {
            sequence.push(CorrectionGate::ControlledShift {
                target: e.tail,
                control: e.head,
                power: 1,
            });
        }
    }

    Ok(CorrectionPlan { shift_string, shift_string_exact, sequence })
}

/// Applies correction gates to a register over the main vertices (site
/// index = vertex id).
pub fn apply_gates(reg: &mut MixedRadixRegister, gates: &[CorrectionGate]) -> Result<()> {
    for gate in gates {
        match gate {
            CorrectionGate::Shift { vertex, power } => {
                reg.apply_shift_power(vertex.index(), *power)?;
            }
            CorrectionGate::ControlledShift { target, control, power } => {
                reg.apply_controlled_shift_power(target.index(), control.index(), *power)?;
            }
        }
    }
    Ok(())
}

/// Applies the shift string (each `X^{power}` on its vertex).
pub fn apply_shift_string(reg: &mut MixedRadixRegister, string: &[(VertexId, usize)]) -> Result<()> {
    for &(v, power) in string {
        reg.apply_shift_power(v.index(), power as i64)?;
    }
    Ok(())
}

/// Cancels the residual diagonal word left by one detachment.
pub fn cancel_residual(reg: &mut MixedRadixRegister, record: &DetachRecord) -> Result<()> {
    let word: Vec<(usize, f64)> =
        record.residual_word.iter().map(|&(v, theta)| (v.index(), -theta)).collect();
    reg.apply_phase_word(&word)
}

/// One corrected preparation branch.
#[derive(Debug, Clone)]
pub struct PreparedBranch {
    /// Fourier outcomes of the ancilla measurements.
    pub outcomes: BTreeMap<VertexId, usize>,
    /// Detachments performed before the fourier round.
    pub detached: Vec<DetachRecord>,
    pub probability: f64,
    pub plan: CorrectionPlan,
    /// Register over the main vertices after residual cancellation and
    /// the exact correction sequence.
    pub state: MixedRadixRegister,
}

/// Runs the full preparation: entangle, measure every ancilla once,
/// cancel any detachment residuals, and apply the exact feedforward
/// correction. Every branch ends in the resource state of the (possibly
/// pruned) network.
pub fn prepare_resource_detaching(
    g: &DagNetwork,
    psi: &StateSpec,
    detach: &[VertexId],
    mode: RunMode,
) -> Result<Vec<PreparedBranch>> {
    let prep = build_prep_state(g, psi)?;
    if matches!(mode, RunMode::Enumerate) {
        let branches: u128 = prep.unmeasured().iter().map(|&v| g.dim(v) as u128).product();
        if branches > BRANCH_CAP {
            return Err(Error::BranchExplosion { branches, cap: BRANCH_CAP });
        }
    }

    // Fan the detachments out first (computational outcomes are uniform).
    let mut rng = match mode {
        RunMode::Sample { seed } => Some(StdRng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)),
        RunMode::Enumerate => None,
    };
    let mut states = vec![(prep, 1.0f64)];
    for &v in detach {
        match &mut rng {
            Some(rng) => {
                for (state, probability) in &mut states {
                    state.detach_sampled(v, rng)?;
                    *probability *= 1.0 / g.dim(v) as f64;
                }
            }
            None => {
                let mut next = Vec::new();
                for (state, probability) in states {
                    for outcome in 0..g.dim(v) {
                        let mut fork = state.clone();
                        fork.detach_forced(v, outcome)?;
                        next.push((fork, probability / g.dim(v) as f64));
                    }
                }
                states = next;
            }
        }
    }

    let detached_set: BTreeSet<VertexId> = detach.iter().copied().collect();
    let mut out = Vec::new();
    for (state, detach_probability) in states {
        for branch in measure_ancillas(state, mode)? {
            let plan = correction_plan(g, &detached_set, &branch.outcomes)?;
            let mut reg = branch.register;
            for record in &branch.detached {
                cancel_residual(&mut reg, record)?;
            }
            apply_gates(&mut reg, &plan.sequence)?;
            out.push(PreparedBranch {
                outcomes: branch.outcomes,
                detached: branch.detached,
                probability: detach_probability * branch.probability,
                plan,
                state: reg,
            });
        }
    }
    Ok(out)
}

/// [`prepare_resource_detaching`] with nothing detached: straight
/// preparation of the resource state.
pub fn prepare_resource(g: &DagNetwork, psi: &StateSpec, mode: RunMode) -> Result<Vec<PreparedBranch>> {
    prepare_resource_detaching(g, psi, &[], mode)
}

/// Deviations of the check operators on a register over the main
/// vertices, plus the support scan.
#[derive(Debug, Clone, Serialize)]
pub struct StabilizerReport {
    /// `|| W_v |psi> - |psi> ||` per checked vertex.
    pub deviations: BTreeMap<VertexId, f64>,
    /// True when every nonzero amplitude satisfies `K_v = 0` at every
    /// checked vertex.
    pub support_ok: bool,
}

impl StabilizerReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.values().copied().fold(0.0, f64::max)
    }
}

/// Checks `W_v |psi> = |psi>` and the `K_v = 0` support law at the given
/// vertices of a register over the main layout.
pub fn check_stabilizers_at(
    g: &DagNetwork,
    reg: &MixedRadixRegister,
    vertices: &[VertexId],
) -> Result<StabilizerReport> {
    if reg.layout().dims() != g.dims() {
        return Err(Error::LayoutMismatch);
    }
    let mut deviations = BTreeMap::new();
    let mut support_ok = true;
    for &v in vertices {
        let mut rotated = reg.clone();
        let word: Vec<(usize, f64)> =
            stabilizer_word(g, v).into_iter().map(|(u, theta)| (u.index(), theta)).collect();
        rotated.apply_phase_word(&word)?;
        let deviation = rotated
            .amps()
            .iter()
            .zip(reg.amps())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        deviations.insert(v, deviation);

        for (flat, amp) in reg.amps().iter().enumerate() {
            if amp.norm() <= tol::DUMP_CUTOFF {
                continue;
            }
            let digits = reg.layout().digits(flat);
            let successor_sum: i64 = g.children(v).iter().map(|w| digits[w.index()] as i64).sum();
            if digits[v.index()] as i64 != successor_sum {
                support_ok = false;
            }
        }
    }
    Ok(StabilizerReport { deviations, support_ok })
}

/// [`check_stabilizers_at`] over every non-sink vertex.
pub fn check_stabilizers(g: &DagNetwork, reg: &MixedRadixRegister) -> Result<StabilizerReport> {
    check_stabilizers_at(g, reg, &g.non_sinks())
}

/// The n-qubit state `(|0...0> + |1...1>) / sqrt(2)`.
pub fn ghz_register(n: usize) -> MixedRadixRegister {
    let layout = SiteLayout::new(&vec![2; n]).unwrap();
    let mut amps = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
    let scale = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    amps[0] = scale;
    amps[layout.total_dim() - 1] = scale;
    MixedRadixRegister::from_amplitudes(layout, amps).unwrap()
}
