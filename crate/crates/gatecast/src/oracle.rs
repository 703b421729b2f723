//! Brute-force dense-matrix checks, independent of the streaming engine.
//!
//! Everything here is built from explicit matrices and index loops so
//! that agreement with the [`crate::qudit`] engine is evidence, not
//! tautology. Three families of checks live here:
//!
//! * the operator identities behind the protocol — unitarity of the gate
//!   set, completeness of both measurement bases, the commutation rule
//!   for pushing a phase through a controlled shift, and the splitting
//!   identity that turns one measured phase into phases on every
//!   successor;
//! * the support law of resource states (every surviving amplitude has
//!   `K_v = k_v - sum of successor digits = 0` at each non-sink);
//! * gate-by-gate cross-checks of the engine against dense matrices.
//!
//! The commutation rule with a generic angle holds on the states the
//! protocol ever prepares — those reachable from `|0>` on the shifted
//! qudit, where the accumulated digit never wraps. On wrapped columns it
//! picks up an `e^{i theta D}` defect, which vanishes exactly for the
//! root-of-unity angles `2 pi l / D` used by corrections. The check
//! therefore compares generic angles on the no-wrap columns and the
//! root-of-unity specialization over the full matrix.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::broadcast;
use crate::dag::{DagNetwork, VertexId};
use crate::error::{Error, Result};
use crate::qudit::{MixedRadixRegister, StateSpec};
use crate::tol;

/// Largest control dimension for the commutation sweep.
pub const COMMUTATION_CAP: usize = 16;
/// Largest shifted dimension for the splitting sweep.
pub const SPLITTING_CAP: usize = 64;
/// Largest total dimension for support scans.
pub const SUPPORT_CAP: usize = 4096;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn phase(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

/// A dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        DenseOperator { dim, entries: vec![c(0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, c(1.0));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn matmul(&self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim, rhs.dim);
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..self.dim {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn kron(&self, rhs: &DenseOperator) -> DenseOperator {
        let dim = self.dim * rhs.dim;
        let mut out = Self::zeros(dim);
        for i1 in 0..self.dim {
            for j1 in 0..self.dim {
                let a = self.get(i1, j1);
                for i2 in 0..rhs.dim {
                    for j2 in 0..rhs.dim {
                        out.set(i1 * rhs.dim + i2, j1 * rhs.dim + j2, a * rhs.get(i2, j2));
                    }
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> DenseOperator {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn apply(&self, vec: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(vec.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * vec[j]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        self.dagger().matmul(self).max_abs_diff(&Self::identity(self.dim))
    }
}

/// `X^p` on one d-level system: `|k> -> |k + p mod d>`.
pub fn shift_matrix(d: usize, power: i64) -> DenseOperator {
    let mut m = DenseOperator::zeros(d);
    for k in 0..d {
        let to = (k as i64 + power).rem_euclid(d as i64) as usize;
        m.set(to, k, c(1.0));
    }
    m
}

/// `U(theta) = diag(e^{i k theta})`.
pub fn phase_matrix(d: usize, theta: f64) -> DenseOperator {
    let mut m = DenseOperator::zeros(d);
    for k in 0..d {
        m.set(k, k, phase(theta * k as f64));
    }
    m
}

/// The uniform superposition column vector.
pub fn plus_vector(d: usize) -> Vec<Complex64> {
    vec![c(1.0 / (d as f64).sqrt()); d]
}

/// The fourier basis vector `Z^s |+>`.
pub fn fourier_vector(d: usize, s: usize) -> Vec<Complex64> {
    (0..d).map(|k| phase(TAU * s as f64 * k as f64 / d as f64) / c((d as f64).sqrt())).collect()
}

/// The controlled shift on `H_ctrl x H_tgt` (control slow axis): the
/// target digit gains the control digit.
pub fn controlled_shift_matrix(d_ctrl: usize, d_tgt: usize) -> DenseOperator {
    let mut m = DenseOperator::zeros(d_ctrl * d_tgt);
    for k in 0..d_ctrl {
        for a in 0..d_tgt {
            m.set(k * d_tgt + (a + k) % d_tgt, k * d_tgt + a, c(1.0));
        }
    }
    m
}

/// Deviation of the phase-through-controlled-shift rule for a `d_j`-level
/// control and a `big_d`-level target. The generic `theta` form is
/// compared on the no-wrap columns (`k_j + k_a < big_d`); the
/// root-of-unity form at `ell` is compared as a full operator identity.
/// Returns the larger of the two deviations.
pub fn verify_commutation_identity(d_j: usize, big_d: usize, theta: f64, ell: usize) -> Result<f64> {
    if d_j < 2 || big_d < 2 {
        return Err(Error::InvalidDimension { dim: d_j.min(big_d) });
    }
    if d_j > big_d {
        return Err(Error::DimensionTooLarge { dim: d_j, cap: big_d });
    }
    if big_d > COMMUTATION_CAP {
        return Err(Error::DimensionTooLarge { dim: big_d, cap: COMMUTATION_CAP });
    }
    let cx = controlled_shift_matrix(d_j, big_d);
    let i_j = DenseOperator::identity(d_j);
    let i_a = DenseOperator::identity(big_d);

    let mut worst = 0.0f64;
    // Generic angle, restricted to columns that never wrap the target.
    let lhs = i_j.kron(&phase_matrix(big_d, theta)).matmul(&cx);
    let rhs = cx.matmul(&phase_matrix(d_j, theta).kron(&phase_matrix(big_d, theta)));
    for k_j in 0..d_j {
        for k_a in 0..big_d {
            if k_j + k_a >= big_d {
                continue;
            }
            let col = k_j * big_d + k_a;
            for row in 0..d_j * big_d {
                worst = worst.max((lhs.get(row, col) - rhs.get(row, col)).norm());
            }
        }
    }
    // Root-of-unity angle: exact on the whole space.
    let theta_ell = TAU * ell as f64 / big_d as f64;
    let lhs = i_j.kron(&phase_matrix(big_d, theta_ell)).matmul(&cx);
    let rhs = cx.matmul(&phase_matrix(d_j, theta_ell).kron(&i_a.matmul(&phase_matrix(big_d, theta_ell))));
    worst = worst.max(lhs.max_abs_diff(&rhs));
    Ok(worst)
}

/// The full-space entangler `prod_j CX_{j => A}` over the controls (their
/// own mixed radix, slow axes) and the shared qudit (fastest axis), built
/// by explicit matrix multiplication.
pub fn splitting_entangler(dims: &[usize]) -> Result<DenseOperator> {
    for &d in dims {
        if d < 2 {
            return Err(Error::InvalidDimension { dim: d });
        }
    }
    let big_d = 1 + dims.iter().map(|d| d - 1).sum::<usize>();
    if big_d > SPLITTING_CAP {
        return Err(Error::DimensionTooLarge { dim: big_d, cap: SPLITTING_CAP });
    }
    let controls: usize = dims.iter().product();
    let total = controls * big_d;
    let mut big = DenseOperator::identity(total);
    for (j, &d_j) in dims.iter().enumerate() {
        let before: usize = dims[..j].iter().product();
        let after: usize = dims[j + 1..].iter().product();
        let cx_pair = controlled_shift_matrix(d_j, big_d);
        // I_before x (CX over H_j x H_A, with H_after riding along)
        let mut lifted = DenseOperator::zeros(total);
        for b in 0..before {
            for k in 0..d_j {
                for mid in 0..after {
                    for a in 0..big_d {
                        let entry = cx_pair.get(k * big_d + (a + k) % big_d, k * big_d + a);
                        let from = ((b * d_j + k) * after + mid) * big_d + a;
                        let to = ((b * d_j + k) * after + mid) * big_d + (a + k) % big_d;
                        lifted.set(to, from, entry);
                    }
                }
            }
        }
        big = lifted.matmul(&big);
    }
    Ok(big)
}

fn splitting_deviation(entangler: &DenseOperator, dims: &[usize], theta: f64, s: usize) -> f64 {
    let big_d = 1 + dims.iter().map(|d| d - 1).sum::<usize>();
    let controls: usize = dims.iter().product();

    // Contract <s~|_A U_A(theta) entangler |0>_A; the phase is diagonal,
    // so it folds into the bra.
    let bra = fourier_vector(big_d, s);
    let mut lhs = DenseOperator::zeros(controls);
    for p_out in 0..controls {
        for p_in in 0..controls {
            let mut sum = c(0.0);
            for a in 0..big_d {
                sum += bra[a].conj()
                    * phase(theta * a as f64)
                    * entangler.get(p_out * big_d + a, p_in * big_d);
            }
            lhs.set(p_out, p_in, sum);
        }
    }

    let mut rhs = DenseOperator::identity(1);
    for &d_j in dims {
        let factor =
            phase_matrix(d_j, -TAU * s as f64 / big_d as f64).matmul(&phase_matrix(d_j, theta));
        rhs = rhs.kron(&factor);
    }
    let scale = c(1.0 / (big_d as f64).sqrt());
    for i in 0..controls {
        for j in 0..controls {
            let v = rhs.get(i, j) * scale;
            rhs.set(i, j, v);
        }
    }
    lhs.max_abs_diff(&rhs)
}

/// Deviation of the splitting identity: projecting the shared qudit onto
/// `Z^s |+>` after a phase `theta` turns the entangler into the tensor
/// product of corrected phase gates `U_j(theta - 2 pi s / D) / sqrt(D)`
/// on the controls.
pub fn verify_splitting_identity(dims: &[usize], theta: f64, s: usize) -> Result<f64> {
    let big_d = 1 + dims.iter().map(|d| d.saturating_sub(1)).sum::<usize>();
    if s >= big_d {
        return Err(Error::InvalidDigit { site: dims.len(), digit: s, dim: big_d });
    }
    let entangler = splitting_entangler(dims)?;
    Ok(splitting_deviation(&entangler, dims, theta, s))
}

/// Deviation of the projector identity behind the one-round
/// preparation: sandwiching the controlled word between uniform ancilla
/// states equals the average of the word's powers, and that average is a
/// projector. `dims[0]` is the vertex dimension (which the ancilla
/// shares); the remaining entries are its direct successors.
///
/// Both sides are built densely by independent routes — the full
/// controlled gate on the ancilla-plus-mains space contracted entry by
/// entry, versus accumulated matrix powers of the word — and the larger
/// of `|lhs - P|` and `|P^2 - P|` is returned.
pub fn verify_projector_identity(dims: &[usize]) -> Result<f64> {
    for &d in dims {
        if d < 2 {
            return Err(Error::InvalidDimension { dim: d });
        }
    }
    let d = dims[0];
    let main: usize = dims.iter().product();
    let total = d * main;
    if total > 4096 {
        return Err(Error::DimensionTooLarge { dim: total, cap: 4096 });
    }
    let strides = strides_of(dims);

    // The word's angle on a main basis state: (2 pi / d) (k_0 - sum k_j).
    let word_angle = |k: usize| -> f64 {
        let mut excess = digit_at(k, 0, dims, &strides) as f64;
        for j in 1..dims.len() {
            excess -= digit_at(k, j, dims, &strides) as f64;
        }
        TAU / d as f64 * excess
    };

    // Full controlled gate on H_anc x H_main (ancilla slow axis).
    let mut cw = DenseOperator::zeros(total);
    for ell in 0..d {
        for k in 0..main {
            cw.set(ell * main + k, ell * main + k, phase(ell as f64 * word_angle(k)));
        }
    }
    // <+| CW |+> over the ancilla, as a main-space operator.
    let plus = plus_vector(d);
    let mut lhs = DenseOperator::zeros(main);
    for k_out in 0..main {
        for k_in in 0..main {
            let mut sum = c(0.0);
            for ell_out in 0..d {
                for ell_in in 0..d {
                    sum += plus[ell_out].conj()
                        * cw.get(ell_out * main + k_out, ell_in * main + k_in)
                        * plus[ell_in];
                }
            }
            lhs.set(k_out, k_in, sum);
        }
    }

    // (1/d) sum of word powers, by repeated matrix multiplication.
    let mut word = DenseOperator::zeros(main);
    for k in 0..main {
        word.set(k, k, phase(word_angle(k)));
    }
    let mut power = DenseOperator::identity(main);
    let mut projector = DenseOperator::zeros(main);
    for _ in 0..d {
        for i in 0..main {
            for j in 0..main {
                let v = projector.get(i, j) + power.get(i, j);
                projector.set(i, j, v);
            }
        }
        power = word.matmul(&power);
    }
    let scale = c(1.0 / d as f64);
    for i in 0..main {
        for j in 0..main {
            let v = projector.get(i, j) * scale;
            projector.set(i, j, v);
        }
    }

    let sandwich = lhs.max_abs_diff(&projector);
    let idempotent = projector.matmul(&projector).max_abs_diff(&projector);
    Ok(sandwich.max(idempotent))
}

/// Worst projector deviation over single-successor pairs up to `dmax`
/// and small branching shapes.
pub fn sweep_projector(dmax: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for d in 2..=dmax {
        worst = worst.max(verify_projector_identity(&[d, d])?);
    }
    worst = worst.max(verify_projector_identity(&[3, 2, 2])?);
    worst = worst.max(verify_projector_identity(&[4, 2, 2, 2])?);
    worst = worst.max(verify_projector_identity(&[4, 3, 2])?);
    Ok(worst)
}

/// Result of scanning a resource state's support.
#[derive(Debug, Clone)]
pub struct SupportCheck {
    /// Basis tuples with a nonzero amplitude violating `K_v = 0`, with
    /// the offending vertex.
    pub violations: Vec<(Vec<usize>, VertexId)>,
}

impl SupportCheck {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans all amplitudes of a register over the network layout and reports
/// every basis tuple whose amplitude is nonzero but breaks `K_v = 0` at
/// some non-sink.
pub fn scan_support(g: &DagNetwork, reg: &MixedRadixRegister) -> Result<SupportCheck> {
    let layout = reg.layout();
    if layout.dims() != g.dims() {
        return Err(Error::LayoutMismatch);
    }
    if layout.total_dim() > SUPPORT_CAP {
        return Err(Error::DimensionTooLarge { dim: layout.total_dim(), cap: SUPPORT_CAP });
    }
    let mut violations = Vec::new();
    for (flat, amp) in reg.amps().iter().enumerate() {
        if amp.norm() <= tol::DUMP_CUTOFF {
            continue;
        }
        let digits = layout.digits(flat);
        for v in g.non_sinks() {
            let successor_sum: i64 =
                g.children(v).iter().map(|w| digits[w.index()] as i64).sum();
            if digits[v.index()] as i64 - successor_sum != 0 {
                violations.push((digits.clone(), v));
            }
        }
    }
    Ok(SupportCheck { violations })
}

/// Builds the resource state for `(g, psi)` and scans its support.
pub fn verify_support_condition(g: &DagNetwork, psi: &StateSpec) -> Result<SupportCheck> {
    let reg = broadcast::build_resource_state(g, psi)?;
    scan_support(g, &reg)
}

/// A gate in layout-agnostic form, usable both by the engine and by the
/// dense constructor, for cross-checking the two.
#[derive(Debug, Clone)]
pub enum GateOp {
    ShiftPow { site: usize, power: i64 },
    LocalPhase { site: usize, theta: f64 },
    ControlledShiftPow { target: usize, control: usize, power: i64 },
    ControlledPhaseWord { control: usize, word: Vec<(usize, f64)> },
}

// Digit arithmetic local to the oracle, kept separate from SiteLayout on
// purpose.
fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

fn digit_at(flat: usize, site: usize, dims: &[usize], strides: &[usize]) -> usize {
    flat / strides[site] % dims[site]
}

/// Dense matrix of `op` over the full register of `dims`.
pub fn dense_operator(dims: &[usize], op: &GateOp) -> DenseOperator {
    let total: usize = dims.iter().product();
    let strides = strides_of(dims);
    let mut m = DenseOperator::zeros(total);
    for col in 0..total {
        match op {
            GateOp::ShiftPow { site, power } => {
                let k = digit_at(col, *site, dims, &strides);
                let to = (k as i64 + power).rem_euclid(dims[*site] as i64) as usize;
                let row = col - k * strides[*site] + to * strides[*site];
                m.set(row, col, c(1.0));
            }
            GateOp::LocalPhase { site, theta } => {
                let k = digit_at(col, *site, dims, &strides);
                m.set(col, col, phase(theta * k as f64));
            }
            GateOp::ControlledShiftPow { target, control, power } => {
                let k = digit_at(col, *target, dims, &strides);
                let ctrl = digit_at(col, *control, dims, &strides) as i64;
                let to = (k as i64 + power * ctrl).rem_euclid(dims[*target] as i64) as usize;
                let row = col - k * strides[*target] + to * strides[*target];
                m.set(row, col, c(1.0));
            }
            GateOp::ControlledPhaseWord { control, word } => {
                let ell = digit_at(col, *control, dims, &strides) as f64;
                let mut exponent = 0.0;
                for &(site, theta) in word {
                    exponent += theta * digit_at(col, site, dims, &strides) as f64;
                }
                m.set(col, col, phase(ell * exponent));
            }
        }
    }
    m
}

/// Applies `op` through the streaming engine.
pub fn engine_apply(reg: &mut MixedRadixRegister, op: &GateOp) -> Result<()> {
    match op {
        GateOp::ShiftPow { site, power } => reg.apply_shift_power(*site, *power),
        GateOp::LocalPhase { site, theta } => reg.apply_local_phase(*site, *theta),
        GateOp::ControlledShiftPow { target, control, power } => {
            reg.apply_controlled_shift_power(*target, *control, *power)
        }
        GateOp::ControlledPhaseWord { control, word } => {
            reg.apply_controlled_phase_word(*control, word)
        }
    }
}

/// The angle grid shared by the deterministic sweeps.
pub const THETA_GRID: [f64; 4] = [0.0, 0.7, std::f64::consts::PI, 2.1];

/// Worst unitarity deviation of the gate set over dimensions up to
/// `dmax`.
pub fn sweep_unitarity(dmax: usize) -> f64 {
    let mut worst = 0.0f64;
    for d in 2..=dmax {
        worst = worst.max(shift_matrix(d, 1).unitarity_deviation());
        worst = worst.max(phase_matrix(d, TAU / d as f64).unitarity_deviation());
        for theta in THETA_GRID {
            worst = worst.max(phase_matrix(d, theta).unitarity_deviation());
        }
        for d2 in 2..=d {
            worst = worst.max(controlled_shift_matrix(d2, d).unitarity_deviation());
        }
    }
    worst
}

/// Worst deviation of `sum_s |s><s| = I` over both measurement bases and
/// dimensions up to `dmax`.
pub fn sweep_basis_resolution(dmax: usize) -> f64 {
    let mut worst = 0.0f64;
    for d in 2..=dmax {
        for fourier in [false, true] {
            let mut sum = DenseOperator::zeros(d);
            for s in 0..d {
                let v = if fourier {
                    fourier_vector(d, s)
                } else {
                    (0..d).map(|k| c(if k == s { 1.0 } else { 0.0 })).collect()
                };
                for i in 0..d {
                    for j in 0..d {
                        let cur = sum.get(i, j) + v[i] * v[j].conj();
                        sum.set(i, j, cur);
                    }
                }
            }
            worst = worst.max(sum.max_abs_diff(&DenseOperator::identity(d)));
        }
    }
    worst
}

/// Worst commutation deviation over all `2 <= d_j <= D <= dmax`, the
/// angle grid, and all powers `ell < D`.
pub fn sweep_commutation(dmax: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for big_d in 2..=dmax {
        for d_j in 2..=big_d {
            for theta in THETA_GRID {
                for ell in 0..big_d {
                    worst = worst.max(verify_commutation_identity(d_j, big_d, theta, ell)?);
                }
            }
        }
    }
    Ok(worst)
}

/// Worst splitting deviation over all control lists with up to
/// `max_controls` entries of dimension up to `dmax_control`, every
/// outcome, and the angle grid.
pub fn sweep_splitting(max_controls: usize, dmax_control: usize) -> Result<f64> {
    let mut dim_lists: Vec<Vec<usize>> = Vec::new();
    let mut frontier: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_controls {
        let mut next = Vec::new();
        for list in &frontier {
            for d in 2..=dmax_control {
                let mut grown = list.clone();
                grown.push(d);
                next.push(grown);
            }
        }
        dim_lists.extend(next.iter().cloned());
        frontier = next;
    }
    let mut worst = 0.0f64;
    for dims in &dim_lists {
        let big_d = 1 + dims.iter().map(|d| d - 1).sum::<usize>();
        let entangler = splitting_entangler(dims)?;
        for theta in THETA_GRID {
            for s in 0..big_d {
                worst = worst.max(splitting_deviation(&entangler, dims, theta, s));
            }
        }
    }
    Ok(worst)
}
