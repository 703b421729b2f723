//! Dense state vectors over qudits of mixed dimension.
//!
//! A register is a complex amplitude vector over the tensor product of
//! sites with individual dimensions d_i >= 2. Flat indices and digit
//! tuples are related by mixed-radix arithmetic: site 0 is the slowest
//! axis, and the stride of site i is the product of the dimensions after
//! it.
//!
//! The gate set is exactly what the broadcast and preparation layers
//! need:
//!
//! * cyclic shifts `|k> -> |k + p mod d>` and their controlled versions,
//!   applied as index permutations;
//! * diagonal phases `|k> -> e^{i k theta} |k>`, phase words over several
//!   sites, and phase words raised to the power of a control digit,
//!   applied in a single pass over the amplitudes.
//!
//! Measurements project a single site in either the computational basis
//! `{|l>}` or the fourier basis `{Z^s |+>}` and *remove* the measured
//! site from the layout; the [`Branch`] carries the outcome, so no
//! information is lost. Sampling draws from the Born distribution using a
//! caller-supplied generator; this module never owns randomness.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tol;

/// Ordered per-site dimensions with precomputed strides for flat indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteLayout {
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl SiteLayout {
    pub fn new(dims: &[usize]) -> Result<Self> {
        for &d in dims {
            if d < 2 {
                return Err(Error::InvalidDimension { dim: d });
            }
        }
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total = dims.iter().product::<usize>().max(1);
        Ok(SiteLayout { dims: dims.to_vec(), strides, total })
    }

    pub fn num_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, site: usize) -> usize {
        self.dims[site]
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site < self.dims.len() {
            Ok(())
        } else {
            Err(Error::InvalidSite { site, sites: self.dims.len() })
        }
    }

    /// Digit of `flat` at `site`.
    pub fn digit(&self, flat: usize, site: usize) -> usize {
        flat / self.strides[site] % self.dims[site]
    }

    /// Full digit tuple of `flat`, slowest site first.
    pub fn digits(&self, flat: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|s| self.digit(flat, s)).collect()
    }

    /// Flat index of a digit tuple.
    pub fn flat(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(Error::DimensionMismatch { expected: self.dims.len(), got: digits.len() });
        }
        let mut flat = 0;
        for (site, &k) in digits.iter().enumerate() {
            if k >= self.dims[site] {
                return Err(Error::InvalidDigit { site, digit: k, dim: self.dims[site] });
            }
            flat += k * self.strides[site];
        }
        Ok(flat)
    }

    /// Layout with `site` removed.
    pub fn removing(&self, site: usize) -> SiteLayout {
        let mut dims = self.dims.clone();
        dims.remove(site);
        SiteLayout::new(&dims).expect("remaining dims stay valid")
    }
}

/// Named single-site initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SitePreset {
    /// Basis state `|0>`.
    Zero,
    /// Uniform superposition `(1/sqrt d) sum_k |k>`.
    Plus,
}

/// Initial-state specification accepted by [`MixedRadixRegister::make_state`].
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    /// A single computational basis state given by its digit tuple.
    Basis(Vec<usize>),
    /// Per-site presets, one entry per site.
    Presets(Vec<SitePreset>),
    /// Explicit amplitudes of the full layout dimension; normalized on entry.
    Amplitudes(Vec<Complex64>),
}

impl StateSpec {
    /// `Plus` at every site.
    pub fn all_plus(sites: usize) -> Self {
        StateSpec::Presets(vec![SitePreset::Plus; sites])
    }
}

/// One nonzero amplitude of a register, as digits plus real and imaginary
/// parts. Used by state dumps in CLI reports.
#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeEntry {
    pub digits: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

/// Dense normalized state over a [`SiteLayout`].
#[derive(Debug, Clone)]
pub struct MixedRadixRegister {
    layout: SiteLayout,
    amps: Vec<Complex64>,
}

/// One measurement outcome: its label, Born probability, and the
/// normalized post-measurement state with the measured site removed.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcome: usize,
    pub probability: f64,
    pub state: MixedRadixRegister,
}

/// Which single-site orthonormal basis a measurement projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureBasis {
    /// `{|l>}`.
    Computational,
    /// `{Z^s |+>}`.
    Fourier,
}

fn phase(theta: f64) -> Complex64 {
    Complex64::new(theta.cos(), theta.sin())
}

impl MixedRadixRegister {
    pub fn make_state(layout: SiteLayout, spec: &StateSpec) -> Result<Self> {
        match spec {
            StateSpec::Basis(digits) => Self::basis(layout, digits),
            StateSpec::Presets(presets) => Self::from_presets(layout, presets),
            StateSpec::Amplitudes(amps) => Self::from_amplitudes(layout, amps.clone()),
        }
    }

    pub fn basis(layout: SiteLayout, digits: &[usize]) -> Result<Self> {
        let flat = layout.flat(digits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.total_dim()];
        amps[flat] = Complex64::new(1.0, 0.0);
        Ok(MixedRadixRegister { layout, amps })
    }

    pub fn from_presets(layout: SiteLayout, presets: &[SitePreset]) -> Result<Self> {
        if presets.len() != layout.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: layout.num_sites(),
                got: presets.len(),
            });
        }
        let mut amps = Vec::with_capacity(layout.total_dim());
        for flat in 0..layout.total_dim() {
            let mut a = Complex64::new(1.0, 0.0);
            for (site, preset) in presets.iter().enumerate() {
                let k = layout.digit(flat, site);
                a *= match preset {
                    SitePreset::Zero if k == 0 => Complex64::new(1.0, 0.0),
                    SitePreset::Zero => Complex64::new(0.0, 0.0),
                    SitePreset::Plus => Complex64::new(1.0 / (layout.dim(site) as f64).sqrt(), 0.0),
                };
            }
            amps.push(a);
        }
        Ok(MixedRadixRegister { layout, amps })
    }

    /// Wraps an explicit amplitude vector, normalizing it.
    pub fn from_amplitudes(layout: SiteLayout, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), got: amps.len() });
        }
        let mut reg = MixedRadixRegister { layout, amps };
        let norm = reg.norm();
        if norm < tol::ZERO_NORM {
            return Err(Error::ZeroVector);
        }
        for a in &mut reg.amps {
            *a /= norm;
        }
        Ok(reg)
    }

    pub fn layout(&self) -> &SiteLayout {
        &self.layout
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|`, the global-phase-insensitive overlap.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Shift the digit at `site` by `power` (cyclically; any sign).
    pub fn apply_shift_power(&mut self, site: usize, power: i64) -> Result<()> {
        self.layout.check_site(site)?;
        let d = self.layout.dim(site) as i64;
        let p = power.rem_euclid(d) as usize;
        if p == 0 {
            return Ok(());
        }
        let stride = self.layout.strides[site];
        let d = d as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (flat, &a) in self.amps.iter().enumerate() {
            let k = self.layout.digit(flat, site);
            let shifted = flat + ((k + p) % d) * stride - k * stride;
            out[shifted] = a;
        }
        self.amps = out;
        Ok(())
    }

    /// Multiply the amplitude of digit `k` at `site` by `e^{i k theta}`.
    pub fn apply_local_phase(&mut self, site: usize, theta: f64) -> Result<()> {
        self.layout.check_site(site)?;
        for (flat, a) in self.amps.iter_mut().enumerate() {
            let k = flat / self.layout.strides[site] % self.layout.dims[site];
            *a *= phase(theta * k as f64);
        }
        Ok(())
    }

    /// Diagonal word: multiply by `e^{i sum_t k_t theta_t}`.
    pub fn apply_phase_word(&mut self, word: &[(usize, f64)]) -> Result<()> {
        for &(site, _) in word {
            self.layout.check_site(site)?;
        }
        for (flat, a) in self.amps.iter_mut().enumerate() {
            let mut exponent = 0.0;
            for &(site, theta) in word {
                exponent += theta * self.layout.digit(flat, site) as f64;
            }
            *a *= phase(exponent);
        }
        Ok(())
    }

    /// Shift the digit at `target` by the digit at `control`.
    pub fn apply_controlled_shift(&mut self, target: usize, control: usize) -> Result<()> {
        self.apply_controlled_shift_power(target, control, 1)
    }

    /// Shift the digit at `target` by `power` times the digit at `control`.
    pub fn apply_controlled_shift_power(
        &mut self,
        target: usize,
        control: usize,
        power: i64,
    ) -> Result<()> {
        self.layout.check_site(target)?;
        self.layout.check_site(control)?;
        if target == control {
            return Err(Error::SameSite(target));
        }
        let d = self.layout.dim(target);
        let stride = self.layout.strides[target];
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (flat, &a) in self.amps.iter().enumerate() {
            let k = self.layout.digit(flat, target);
            let c = self.layout.digit(flat, control) as i64;
            let shifted = (k as i64 + power * c).rem_euclid(d as i64) as usize;
            out[flat + shifted * stride - k * stride] = a;
        }
        self.amps = out;
        Ok(())
    }

    /// Word raised to the control digit: multiply by
    /// `e^{i l sum_t k_t theta_t}` where `l` is the digit at `control`.
    pub fn apply_controlled_phase_word(
        &mut self,
        control: usize,
        word: &[(usize, f64)],
    ) -> Result<()> {
        self.layout.check_site(control)?;
        for &(site, _) in word {
            self.layout.check_site(site)?;
            if site == control {
                return Err(Error::ControlInWord(control));
            }
        }
        for (flat, a) in self.amps.iter_mut().enumerate() {
            let ell = self.layout.digit(flat, control) as f64;
            let mut exponent = 0.0;
            for &(site, theta) in word {
                exponent += theta * self.layout.digit(flat, site) as f64;
            }
            *a *= phase(ell * exponent);
        }
        Ok(())
    }

    /// Unnormalized projection of `site` onto one basis vector; returns the
    /// contracted amplitudes (site removed) and the Born probability.
    fn project(&self, site: usize, basis: MeasureBasis, outcome: usize) -> (Vec<Complex64>, f64) {
        let d = self.layout.dim(site);
        let stride = self.layout.strides[site];
        let rest_total = self.layout.total_dim() / d;
        let mut projected = vec![Complex64::new(0.0, 0.0); rest_total];
        // <s~| k> = omega^{-s k} / sqrt(d) for the fourier basis.
        let weights: Vec<Complex64> = match basis {
            MeasureBasis::Computational => {
                (0..d).map(|k| Complex64::new(if k == outcome { 1.0 } else { 0.0 }, 0.0)).collect()
            }
            MeasureBasis::Fourier => (0..d)
                .map(|k| phase(-TAU * outcome as f64 * k as f64 / d as f64) / (d as f64).sqrt())
                .collect(),
        };
        for (flat, &a) in self.amps.iter().enumerate() {
            let k = flat / stride % d;
            let high = flat / (stride * d);
            let low = flat % stride;
            projected[high * stride + low] += weights[k] * a;
        }
        let prob = projected.iter().map(|a| a.norm_sqr()).sum::<f64>();
        (projected, prob)
    }

    fn branch(&self, site: usize, basis: MeasureBasis, outcome: usize) -> Result<Option<Branch>> {
        self.layout.check_site(site)?;
        let (mut projected, prob) = self.project(site, basis, outcome);
        if prob < tol::BRANCH_PRUNE {
            return Ok(None);
        }
        let scale = prob.sqrt();
        for a in &mut projected {
            *a /= scale;
        }
        Ok(Some(Branch {
            outcome,
            probability: prob,
            state: MixedRadixRegister { layout: self.layout.removing(site), amps: projected },
        }))
    }

    /// All nonzero branches of measuring `site` in `basis`. Probabilities
    /// sum to 1; branches below the pruning threshold are omitted.
    pub fn measure_enumerate(&self, site: usize, basis: MeasureBasis) -> Result<Vec<Branch>> {
        self.layout.check_site(site)?;
        let d = self.layout.dim(site);
        let mut branches = Vec::with_capacity(d);
        for outcome in 0..d {
            if let Some(b) = self.branch(site, basis, outcome)? {
                branches.push(b);
            }
        }
        Ok(branches)
    }

    /// One branch drawn from the Born distribution using `rng`.
    pub fn measure_sampled<R: Rng>(
        &self,
        site: usize,
        basis: MeasureBasis,
        rng: &mut R,
    ) -> Result<Branch> {
        let branches = self.measure_enumerate(site, basis)?;
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        for b in &branches {
            acc += b.probability;
            if draw < acc {
                return Ok(b.clone());
            }
        }
        Ok(branches.last().expect("at least one branch of a normalized state").clone())
    }

    /// The branch for a specific forced outcome; errors if its probability
    /// is below the pruning threshold.
    pub fn measure_forced(&self, site: usize, basis: MeasureBasis, outcome: usize) -> Result<Branch> {
        let d = self.layout.dim(site);
        if outcome >= d {
            return Err(Error::InvalidDigit { site, digit: outcome, dim: d });
        }
        self.branch(site, basis, outcome)?.ok_or(Error::ZeroProbabilityBranch { outcome })
    }

    pub fn measure_fourier_enumerate(&self, site: usize) -> Result<Vec<Branch>> {
        self.measure_enumerate(site, MeasureBasis::Fourier)
    }

    pub fn measure_computational_enumerate(&self, site: usize) -> Result<Vec<Branch>> {
        self.measure_enumerate(site, MeasureBasis::Computational)
    }

    /// Nonzero amplitudes as digit tuples, for reports.
    pub fn dump(&self) -> Vec<AmplitudeEntry> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() >= tol::DUMP_CUTOFF)
            .map(|(flat, a)| AmplitudeEntry { digits: self.layout.digits(flat), re: a.re, im: a.im })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn layout(dims: &[usize]) -> SiteLayout {
        SiteLayout::new(dims).unwrap()
    }

    #[test]
    fn strides_are_row_major() {
        let l = layout(&[3, 2, 4]);
        assert_eq!(l.total_dim(), 24);
        assert_eq!(l.strides, vec![8, 4, 1]);
        assert_eq!(l.digits(11), vec![1, 0, 3]);
        assert_eq!(l.flat(&[1, 0, 3]).unwrap(), 11);
    }

    #[test]
    fn plus_preset_is_uniform() {
        let reg =
            MixedRadixRegister::from_presets(layout(&[3]), &[SitePreset::Plus]).unwrap();
        for a in reg.amps() {
            assert!((a.re - 1.0 / 3f64.sqrt()).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn basis_state_and_digit_roundtrip() {
        let reg = MixedRadixRegister::basis(layout(&[2, 2]), &[0, 1]).unwrap();
        assert_eq!(reg.amps()[1], Complex64::new(1.0, 0.0));
        assert!(MixedRadixRegister::basis(layout(&[2, 2]), &[0, 2]).is_err());
    }

    #[test]
    fn explicit_amplitudes_normalize() {
        let reg = MixedRadixRegister::from_amplitudes(
            layout(&[2]),
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        assert!((reg.amps()[0].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);

        let zero = MixedRadixRegister::from_amplitudes(
            layout(&[2]),
            vec![Complex64::new(0.0, 0.0); 2],
        );
        assert!(matches!(zero, Err(Error::ZeroVector)));
    }

    #[test]
    fn shift_wraps_and_composes() {
        let mut reg = MixedRadixRegister::basis(layout(&[3]), &[2]).unwrap();
        reg.apply_shift_power(0, 1).unwrap();
        assert_eq!(reg.amps()[0], Complex64::new(1.0, 0.0));

        let mut a = MixedRadixRegister::basis(layout(&[3]), &[0]).unwrap();
        a.apply_shift_power(0, 2).unwrap();
        let mut b = MixedRadixRegister::basis(layout(&[3]), &[0]).unwrap();
        b.apply_shift_power(0, 1).unwrap();
        b.apply_shift_power(0, 1).unwrap();
        assert!((a.fidelity(&b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(a.layout().digits(2), vec![2]);
        assert_eq!(a.amps()[2], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn local_phase_matches_root_of_unity() {
        let mut reg = MixedRadixRegister::basis(layout(&[3]), &[1]).unwrap();
        reg.apply_local_phase(0, TAU / 3.0).unwrap();
        let omega = phase(TAU / 3.0);
        assert!((reg.amps()[1] - omega).norm() < 1e-15);
    }

    #[test]
    fn phase_additivity() {
        let l = layout(&[4]);
        let amps: Vec<Complex64> =
            (0..4).map(|k| Complex64::new(0.3 + k as f64, 0.1 * k as f64)).collect();
        let mut a = MixedRadixRegister::from_amplitudes(l.clone(), amps.clone()).unwrap();
        a.apply_local_phase(0, 0.7).unwrap();
        a.apply_local_phase(0, 1.9).unwrap();
        let mut b = MixedRadixRegister::from_amplitudes(l, amps).unwrap();
        b.apply_local_phase(0, 0.7 + 1.9).unwrap();
        assert!((a.fidelity(&b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn controlled_shift_qutrit_from_qubit() {
        // target qutrit at site 0, control qubit at site 1
        let mut reg = MixedRadixRegister::basis(layout(&[3, 2]), &[0, 1]).unwrap();
        reg.apply_controlled_shift(0, 1).unwrap();
        assert_eq!(reg.amps()[layout(&[3, 2]).flat(&[1, 1]).unwrap()], Complex64::new(1.0, 0.0));

        // control digit 0 leaves the target alone
        let mut idle = MixedRadixRegister::basis(layout(&[3, 2]), &[2, 0]).unwrap();
        idle.apply_controlled_shift(0, 1).unwrap();
        assert_eq!(idle.amps()[layout(&[3, 2]).flat(&[2, 0]).unwrap()], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn controlled_shifts_compose_additively() {
        // |0>_A |1>_B |1>_C -> |2>_A |1>_B |1>_C
        let l = layout(&[3, 2, 2]);
        let mut reg = MixedRadixRegister::basis(l.clone(), &[0, 1, 1]).unwrap();
        reg.apply_controlled_shift(0, 1).unwrap();
        reg.apply_controlled_shift(0, 2).unwrap();
        assert_eq!(reg.amps()[l.flat(&[2, 1, 1]).unwrap()], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn same_site_control_rejected() {
        let mut reg = MixedRadixRegister::basis(layout(&[3, 2]), &[0, 0]).unwrap();
        assert_eq!(reg.apply_controlled_shift(0, 0), Err(Error::SameSite(0)));
    }

    #[test]
    fn controlled_phase_word_control_zero_is_identity() {
        let l = layout(&[2, 3]);
        let mut reg =
            MixedRadixRegister::from_presets(l.clone(), &[SitePreset::Zero, SitePreset::Plus])
                .unwrap();
        let before = reg.clone();
        reg.apply_controlled_phase_word(0, &[(1, 1.3)]).unwrap();
        assert!((reg.fidelity(&before).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn controlled_phase_word_acts_as_z_power() {
        // word {site1: tau/d} with control digit 1 acts as Z on site 1
        let l = layout(&[2, 3]);
        let mut reg = MixedRadixRegister::basis(l.clone(), &[1, 2]).unwrap();
        reg.apply_controlled_phase_word(0, &[(1, TAU / 3.0)]).unwrap();
        let expected = phase(2.0 * TAU / 3.0);
        assert!((reg.amps()[l.flat(&[1, 2]).unwrap()] - expected).norm() < 1e-15);

        let mut bad = MixedRadixRegister::basis(l, &[0, 0]).unwrap();
        assert_eq!(bad.apply_controlled_phase_word(0, &[(0, 1.0)]), Err(Error::ControlInWord(0)));
    }

    #[test]
    fn fourier_measurement_of_plus_is_deterministic() {
        let reg = MixedRadixRegister::from_presets(layout(&[3]), &[SitePreset::Plus]).unwrap();
        let branches = reg.measure_fourier_enumerate(0).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].outcome, 0);
        assert!((branches[0].probability - 1.0).abs() < 1e-12);
        assert_eq!(branches[0].state.layout().num_sites(), 0);
    }

    #[test]
    fn fourier_measurement_of_basis_state_is_uniform() {
        let reg = MixedRadixRegister::basis(layout(&[2]), &[0]).unwrap();
        let branches = reg.measure_fourier_enumerate(0).unwrap();
        assert_eq!(branches.len(), 2);
        for b in &branches {
            assert!((b.probability - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn computational_measurement_examples() {
        let reg = MixedRadixRegister::basis(layout(&[3]), &[2]).unwrap();
        let branches = reg.measure_computational_enumerate(0).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].outcome, 2);

        let plus = MixedRadixRegister::from_presets(layout(&[3]), &[SitePreset::Plus]).unwrap();
        let branches = plus.measure_computational_enumerate(0).unwrap();
        assert_eq!(branches.len(), 3);
        for b in &branches {
            assert!((b.probability - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_zero_probability_branch_errors() {
        let reg = MixedRadixRegister::from_presets(layout(&[3]), &[SitePreset::Plus]).unwrap();
        assert!(matches!(
            reg.measure_forced(0, MeasureBasis::Fourier, 1),
            Err(Error::ZeroProbabilityBranch { outcome: 1 })
        ));
    }

    #[test]
    fn sampling_follows_branch_weights() {
        let reg = MixedRadixRegister::basis(layout(&[2, 2]), &[0, 0]).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let mut seen = [0usize; 2];
        for _ in 0..200 {
            let b = reg.measure_sampled(0, MeasureBasis::Fourier, &mut rng).unwrap();
            seen[b.outcome] += 1;
        }
        assert!(seen[0] > 50 && seen[1] > 50);
    }

    #[test]
    fn fidelity_ignores_global_phase() {
        let l = layout(&[2]);
        let a = MixedRadixRegister::from_amplitudes(
            l.clone(),
            vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)],
        )
        .unwrap();
        let rotated = MixedRadixRegister::from_amplitudes(
            l,
            a.amps().iter().map(|z| z * phase(1.234)).collect(),
        )
        .unwrap();
        assert!((a.fidelity(&rotated).unwrap() - 1.0).abs() < 1e-12);

        let zero = MixedRadixRegister::basis(layout(&[2]), &[0]).unwrap();
        let one = MixedRadixRegister::basis(layout(&[2]), &[1]).unwrap();
        assert!(zero.fidelity(&one).unwrap() < 1e-15);
        assert!(zero.fidelity(&MixedRadixRegister::basis(layout(&[3]), &[0]).unwrap()).is_err());
    }

    #[test]
    fn dump_orders_digits_per_layout() {
        let l = layout(&[2, 2]);
        let reg = MixedRadixRegister::basis(l, &[1, 0]).unwrap();
        let dump = reg.dump();
        assert_eq!(dump.len(), 1);
        assert_eq!(dump[0].digits, vec![1, 0]);
        assert_eq!(dump[0].re, 1.0);
    }

    // Random register over dims drawn from 2..=7, up to 3 sites.
    fn arb_register() -> impl Strategy<Value = MixedRadixRegister> {
        proptest::collection::vec(2usize..=7, 1..=3)
            .prop_flat_map(|dims| {
                let total: usize = dims.iter().product();
                let amps = proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), total..=total);
                (Just(dims), amps)
            })
            .prop_filter_map("nonzero vector", |(dims, re_im)| {
                let amps: Vec<Complex64> =
                    re_im.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
                MixedRadixRegister::from_amplitudes(SiteLayout::new(&dims).unwrap(), amps).ok()
            })
    }

    proptest! {
        #[test]
        fn gates_preserve_norm(reg in arb_register(), power in -5i64..5, theta in -7.0f64..7.0) {
            let mut r = reg.clone();
            r.apply_shift_power(0, power).unwrap();
            r.apply_local_phase(0, theta).unwrap();
            if r.layout().num_sites() >= 2 {
                r.apply_controlled_shift(1, 0).unwrap();
                r.apply_controlled_phase_word(0, &[(1, theta)]).unwrap();
            }
            prop_assert!((r.norm() - 1.0).abs() < crate::tol::ALGEBRAIC);
        }

        #[test]
        fn both_bases_resolve_the_identity(reg in arb_register()) {
            for basis in [MeasureBasis::Computational, MeasureBasis::Fourier] {
                let branches = reg.measure_enumerate(0, basis).unwrap();
                let total: f64 = branches.iter().map(|b| b.probability).sum();
                prop_assert!((total - 1.0).abs() < crate::tol::PROBABILITY_SUM);
                for b in &branches {
                    prop_assert!((b.state.norm() - 1.0).abs() < crate::tol::ALGEBRAIC);
                }
            }
        }
    }
}
