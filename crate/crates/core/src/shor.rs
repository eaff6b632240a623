//! The phase-estimation pipeline: controlled powers acting on `|1⟩`, the
//! inverse QFT on the control register, and the resulting distribution over
//! measured control values.
//!
//! Two independent routes compute the control-register distribution:
//!
//! * [`exact_distribution`] groups control values `k` by the work state
//!   `w(k)` they produce and takes one DFT per group.
//! * [`run_shor_dense`] materializes the full `2^(m+n)` statevector and
//!   applies Hadamards, controlled gates, and an inverse-QFT gate sequence.
//!
//! For untruncated operators both agree with the closed-form amplitudes in
//! [`analytic_amplitude`].

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modmath::{analyze_measurement, gcd, FactoringInstance, Orbit};
use crate::synth::PowerFamily;

/// Largest `m + n` the dense backend will allocate.
pub const DEFAULT_DENSE_CAP: u32 = 22;

/// Probabilities at or below this are reported as zero.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled { shots: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    pub m: u32,
    pub probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<Vec<u64>>,
    pub provenance: Provenance,
}

impl PhaseDistribution {
    pub fn from_probabilities(m: u32, probabilities: Vec<f64>) -> Self {
        assert_eq!(probabilities.len(), 1 << m);
        Self {
            m,
            probabilities,
            counts: None,
            provenance: Provenance::Exact,
        }
    }

    pub fn point_mass(m: u32, l: usize) -> Self {
        let mut p = vec![0.0; 1 << m];
        p[l] = 1.0;
        Self::from_probabilities(m, p)
    }

    pub fn uniform(m: u32) -> Self {
        let size = 1usize << m;
        Self::from_probabilities(m, vec![1.0 / size as f64; size])
    }

    pub fn control_states(&self) -> usize {
        self.probabilities.len()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &PhaseDistribution) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Control values ordered by decreasing probability (ties by value).
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probabilities.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probabilities[b]
                .partial_cmp(&self.probabilities[a])
                .expect("finite probabilities")
                .then(a.cmp(&b))
        });
        idx
    }
}

/// The phases `s / r` of the eigenstates of `U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EigenphaseSet {
    pub r: u64,
    pub phases: Vec<(u64, u64)>,
    pub factor_producing: Vec<u64>,
}

impl EigenphaseSet {
    pub fn new(r: u64) -> Self {
        Self {
            r,
            phases: (0..r).map(|s| (s, r)).collect(),
            factor_producing: (0..r).filter(|&s| gcd(s, r) == 1).collect(),
        }
    }
}

/// Work state reached from `|1⟩` by applying `U^{2^q}` for every set bit
/// `q` of `k`, lowest bit first.
pub fn control_image(family: &PowerFamily, k: u64) -> u64 {
    (0..family.len())
        .filter(|&q| k >> q & 1 == 1)
        .fold(1, |w, q| family.operator(q).apply_to_basis(w))
}

/// `w(k)` for every `k < 2^m`, using each distinct operator's full basis map.
pub fn control_images(family: &PowerFamily, m: u32) -> Vec<u64> {
    assert!(family.len() >= m as usize, "family covers fewer than m powers");
    let maps: Vec<Vec<u64>> = family.distinct().iter().map(|c| c.basis_map()).collect();
    let size = 1usize << m;
    let mut images = vec![0u64; size];
    images[0] = 1;
    // w(k) = U^{2^q} w(k without its top bit q), since lower bits act first.
    for k in 1..size {
        let q = 63 - (k as u64).leading_zeros() as usize;
        let rest = k & !(1 << q);
        images[k] = maps[family.slot(q)][images[rest] as usize];
    }
    images
}

/// `P(ℓ) = M^-2 Σ_w |Σ_{k: w(k)=w} exp(-2πi kℓ/M)|²`.
pub fn exact_distribution(instance: &FactoringInstance, family: &PowerFamily) -> PhaseDistribution {
    let m = instance.control_qubits();
    let size = 1usize << m;
    let images = control_images(family, m);
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, &w) in images.iter().enumerate() {
        groups.entry(w).or_default().push(k);
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(size);
    let norm = 1.0 / (size as f64 * size as f64);
    let mut probabilities = vec![0.0; size];
    let mut buffer = vec![Complex64::new(0.0, 0.0); size];
    for ks in groups.values() {
        buffer.fill(Complex64::new(0.0, 0.0));
        for &k in ks {
            buffer[k] = Complex64::new(1.0, 0.0);
        }
        fft.process(&mut buffer);
        for (p, amp) in probabilities.iter_mut().zip(&buffer) {
            *p += amp.norm_sqr() * norm;
        }
    }
    PhaseDistribution::from_probabilities(m, probabilities)
}

/// `A_ℓ(s/r) = (1/(√r M)) Σ_k exp(2πi k (s/r - ℓ/M))`, in closed form.
pub fn analytic_amplitude(s: u64, r: u64, l: u64, m_states: u64) -> Complex64 {
    let scale = 1.0 / ((r as f64).sqrt() * m_states as f64);
    // δ = s/r - ℓ/M is an integer iff r·M divides s·M - ℓ·r
    let numerator = s as i128 * m_states as i128 - l as i128 * r as i128;
    if numerator.rem_euclid(r as i128 * m_states as i128) == 0 {
        return Complex64::new(scale * m_states as f64, 0.0);
    }
    let delta = numerator as f64 / (r as f64 * m_states as f64);
    let one = Complex64::new(1.0, 0.0);
    let top = one - Complex64::from_polar(1.0, 2.0 * PI * delta * m_states as f64);
    let bottom = one - Complex64::from_polar(1.0, 2.0 * PI * delta);
    top / bottom * scale
}

/// `Σ_s |A_ℓ(s/r)|²` for every `ℓ`.
pub fn analytic_distribution(r: u64, m: u32) -> PhaseDistribution {
    let size = 1u64 << m;
    let probabilities = (0..size)
        .map(|l| (0..r).map(|s| analytic_amplitude(s, r, l, size).norm_sqr()).sum())
        .collect();
    PhaseDistribution::from_probabilities(m, probabilities)
}

/// `u_s = r^{-1/2} Σ_k exp(-2πi ks/r) |f(k)⟩`.
pub fn eigenstate_vector(orbit: &Orbit, s: u64) -> Vec<Complex64> {
    let r = orbit.period();
    let dim = 1usize << orbit.instance().work_qubits();
    let scale = 1.0 / (r as f64).sqrt();
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for (k, &state) in orbit.states().iter().enumerate() {
        let angle = -2.0 * PI * ((k as u64 * s) % r) as f64 / r as f64;
        v[state as usize] = Complex64::from_polar(scale, angle);
    }
    v
}

/// Multinomial draw of `shots` measurements.
pub fn sample(dist: &PhaseDistribution, shots: u64, seed: u64) -> PhaseDistribution {
    assert!(shots >= 1, "need at least one shot");
    let sampler = WeightedIndex::new(&dist.probabilities).expect("valid probabilities");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; dist.control_states()];
    for _ in 0..shots {
        counts[sampler.sample(&mut rng)] += 1;
    }
    PhaseDistribution {
        m: dist.m,
        probabilities: counts.iter().map(|&c| c as f64 / shots as f64).collect(),
        counts: Some(counts),
        provenance: Provenance::Sampled { shots, seed },
    }
}

fn hadamard(state: &mut [Complex64], qubit: u32) {
    let bit = 1usize << qubit;
    for i in 0..state.len() {
        if i & bit == 0 {
            let (a, b) = (state[i], state[i | bit]);
            state[i] = (a + b) * FRAC_1_SQRT_2;
            state[i | bit] = (a - b) * FRAC_1_SQRT_2;
        }
    }
}

fn controlled_phase(state: &mut [Complex64], q1: u32, q2: u32, theta: f64) {
    let mask = (1usize << q1) | (1usize << q2);
    let phase = Complex64::from_polar(1.0, theta);
    for (i, amp) in state.iter_mut().enumerate() {
        if i & mask == mask {
            *amp *= phase;
        }
    }
}

fn swap_qubits(state: &mut [Complex64], q1: u32, q2: u32) {
    let (b1, b2) = (1usize << q1, 1usize << q2);
    for i in 0..state.len() {
        if i & b1 != 0 && i & b2 == 0 {
            state.swap(i, (i & !b1) | b2);
        }
    }
}

/// Inverse of the textbook QFT circuit on qubits `0..m`.
fn inverse_qft(state: &mut [Complex64], m: u32) {
    for i in 0..m / 2 {
        swap_qubits(state, i, m - 1 - i);
    }
    for j in 0..m {
        for k in 0..j {
            controlled_phase(state, k, j, -PI / (1u64 << (j - k)) as f64);
        }
        hadamard(state, j);
    }
}

/// Reference backend over the full `2^(m+n)` statevector. Control qubits
/// occupy the low `m` bits of the index, work qubits the next `n`.
pub fn run_shor_dense(
    instance: &FactoringInstance,
    family: &PowerFamily,
    cap: u32,
) -> Result<PhaseDistribution> {
    let m = instance.control_qubits();
    let n = instance.work_qubits();
    if m + n > cap {
        return Err(Error::TooLarge { qubits: m + n, cap });
    }
    assert!(family.len() >= m as usize, "family covers fewer than m powers");
    let mut state = vec![Complex64::new(0.0, 0.0); 1usize << (m + n)];
    state[1usize << m] = Complex64::new(1.0, 0.0);
    for q in 0..m {
        hadamard(&mut state, q);
    }
    for q in 0..m {
        let control = 1usize << q;
        for gate in family.operator(q as usize).gates() {
            let bit = 1usize << (gate.target() as u32 + m);
            for i in 0..state.len() {
                if i & control != 0 && i & bit == 0 && gate.fires_on((i >> m) as u64) {
                    state.swap(i, i | bit);
                }
            }
        }
    }
    inverse_qft(&mut state, m);
    let size = 1usize << m;
    let mut probabilities = vec![0.0; size];
    for (i, amp) in state.iter().enumerate() {
        probabilities[i & (size - 1)] += amp.norm_sqr();
    }
    Ok(PhaseDistribution::from_probabilities(m, probabilities))
}

/// Histogram CSV: one row per `ℓ` with nonzero probability or count.
pub fn histogram_csv(
    instance: &FactoringInstance,
    exact: &PhaseDistribution,
    sampled: Option<&PhaseDistribution>,
) -> String {
    let mut out = String::from("ell,phase_binary,phase_decimal,probability,counts,produces_factors\n");
    let counts = sampled.and_then(|s| s.counts.as_ref());
    for (l, &p) in exact.probabilities.iter().enumerate() {
        let count = counts.map_or(0, |c| c[l]);
        if p <= ZERO_PROBABILITY && count == 0 {
            continue;
        }
        let report = analyze_measurement(instance, l as u64);
        let _ = writeln!(
            out,
            "{l},{},{},{p:.12e},{count},{}",
            report.phi_phase_bin,
            report.phi_phase_dec,
            u8::from(report.produces_factors())
        );
    }
    out
}
