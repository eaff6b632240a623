//! Gate-level IR for reversible modular-exponentiation operators.
//!
//! A [`LeveledCircuit`] is an ordered list of levels, each an ordered list of
//! NOT and multi-controlled-NOT gates. Qubit `k` is bit `k` of the basis
//! integer (qubit 0 is the least significant bit).
//!
//! Two evaluation paths are provided: [`LeveledCircuit::apply_to_basis`]
//! pushes a single basis integer through the gates, and
//! [`LeveledCircuit::apply_to_statevector`] acts on a dense amplitude vector.

mod qasm;

pub use qasm::{lower_negative_controls, parse_qasm3, to_qasm3};

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Fires when the control bit is 1.
    Positive,
    /// Fires when the control bit is 0.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "ControlRepr", into = "ControlRepr")]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

#[derive(Serialize, Deserialize)]
struct ControlRepr {
    q: usize,
    neg: bool,
}

impl From<ControlRepr> for Control {
    fn from(c: ControlRepr) -> Self {
        let polarity = if c.neg {
            Polarity::Negative
        } else {
            Polarity::Positive
        };
        Control { qubit: c.q, polarity }
    }
}

impl From<Control> for ControlRepr {
    fn from(c: Control) -> Self {
        ControlRepr {
            q: c.qubit,
            neg: c.polarity == Polarity::Negative,
        }
    }
}

impl Control {
    pub fn positive(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: Polarity::Negative,
        }
    }

    /// The control matching bit `qubit` of `value`.
    pub fn matching(qubit: usize, value: u64) -> Self {
        if value >> qubit & 1 == 1 {
            Self::positive(qubit)
        } else {
            Self::negative(qubit)
        }
    }

    #[inline]
    pub fn is_satisfied(&self, w: u64) -> bool {
        let bit = w >> self.qubit & 1 == 1;
        bit == (self.polarity == Polarity::Positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "gate")]
pub enum Gate {
    #[serde(rename = "x")]
    Not { target: usize },
    #[serde(rename = "mcx")]
    MultiControlledNot {
        target: usize,
        controls: Vec<Control>,
    },
}

impl Gate {
    /// An MCX, or a bare NOT when `controls` is empty.
    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        if controls.is_empty() {
            Gate::Not { target }
        } else {
            Gate::MultiControlledNot { target, controls }
        }
    }

    pub fn target(&self) -> usize {
        match self {
            Gate::Not { target } | Gate::MultiControlledNot { target, .. } => *target,
        }
    }

    pub fn controls(&self) -> &[Control] {
        match self {
            Gate::Not { .. } => &[],
            Gate::MultiControlledNot { controls, .. } => controls,
        }
    }

    #[inline]
    pub fn fires_on(&self, w: u64) -> bool {
        self.controls().iter().all(|c| c.is_satisfied(w))
    }

    #[inline]
    pub fn apply(&self, w: u64) -> u64 {
        if self.fires_on(w) {
            w ^ (1 << self.target())
        } else {
            w
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let target = self.target();
        if target >= n_qubits {
            return Err(Error::InvalidCircuit(format!(
                "target q{target} outside {n_qubits}-qubit register"
            )));
        }
        let mut seen = HashSet::new();
        for c in self.controls() {
            if c.qubit >= n_qubits {
                return Err(Error::InvalidCircuit(format!(
                    "control q{} outside {n_qubits}-qubit register",
                    c.qubit
                )));
            }
            if c.qubit == target {
                return Err(Error::InvalidCircuit(format!(
                    "q{target} is both control and target"
                )));
            }
            if !seen.insert(c.qubit) {
                return Err(Error::InvalidCircuit(format!("duplicate control q{}", c.qubit)));
            }
        }
        Ok(())
    }
}

/// How an operator `U^p` was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Version {
    /// `U` repeated `p` times (u_ver 0).
    Concatenated,
    /// `U^p` synthesized directly from its cycle decomposition (u_ver 1).
    PerPower,
    /// As `PerPower` with trailing levels emptied (u_ver 2).
    Truncated,
}

impl Version {
    pub fn u_ver(self) -> u8 {
        match self {
            Version::Concatenated => 0,
            Version::PerPower => 1,
            Version::Truncated => 2,
        }
    }
}

pub type Level = Vec<Gate>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr")]
pub struct LeveledCircuit {
    n_qubits: usize,
    power: u64,
    trnc_lv: usize,
    version: Version,
    levels: Vec<Level>,
}

#[derive(Deserialize)]
struct CircuitRepr {
    n_qubits: usize,
    power: u64,
    trnc_lv: usize,
    version: Version,
    levels: Vec<Level>,
}

impl TryFrom<CircuitRepr> for LeveledCircuit {
    type Error = Error;

    fn try_from(c: CircuitRepr) -> Result<Self> {
        LeveledCircuit::new(c.n_qubits, c.power, c.trnc_lv, c.version, c.levels)
    }
}

impl LeveledCircuit {
    pub fn new(
        n_qubits: usize,
        power: u64,
        trnc_lv: usize,
        version: Version,
        levels: Vec<Level>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 63 {
            return Err(Error::InvalidCircuit(format!("unsupported width {n_qubits}")));
        }
        for gate in levels.iter().flatten() {
            gate.validate(n_qubits)?;
        }
        if trnc_lv > levels.len() {
            return Err(Error::InvalidCircuit(format!(
                "trnc_lv {trnc_lv} exceeds {} levels",
                levels.len()
            )));
        }
        if let Some(x) = levels[levels.len() - trnc_lv..].iter().position(|l| !l.is_empty()) {
            return Err(Error::InvalidCircuit(format!(
                "truncated level {} is not empty",
                levels.len() - trnc_lv + x
            )));
        }
        Ok(Self {
            n_qubits,
            power,
            trnc_lv,
            version,
            levels,
        })
    }

    /// The identity on `n_qubits` with no levels.
    pub fn empty(n_qubits: usize) -> Self {
        Self::new(n_qubits, 1, 0, Version::PerPower, Vec::new()).expect("valid width")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn power(&self) -> u64 {
        self.power
    }

    pub fn trnc_lv(&self) -> usize {
        self.trnc_lv
    }

    pub fn version(&self) -> Version {
        self.version
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.levels.iter().flatten()
    }

    pub fn gate_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn dimension(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn apply_to_basis(&self, w: u64) -> u64 {
        debug_assert!(w < 1 << self.n_qubits);
        self.gates().fold(w, |acc, g| g.apply(acc))
    }

    /// Image of every basis integer in `[0, 2^n)`.
    pub fn basis_map(&self) -> Vec<u64> {
        (0..self.dimension() as u64).map(|w| self.apply_to_basis(w)).collect()
    }

    pub fn apply_to_statevector(&self, state: &[Complex64]) -> Result<Vec<Complex64>> {
        if state.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: state.len(),
            });
        }
        let mut out = state.to_vec();
        for gate in self.gates() {
            apply_gate_dense(gate, &mut out, 0);
        }
        Ok(out)
    }

    pub fn permutation_table(&self, domain: &[u64]) -> PermutationTable {
        PermutationTable {
            domain: domain.to_vec(),
            image: domain.iter().map(|&w| self.apply_to_basis(w)).collect(),
        }
    }

    /// `U` repeated `p` times.
    pub fn concatenate_power(&self, p: u64) -> LeveledCircuit {
        let mut levels = Vec::with_capacity(self.levels.len() * p as usize);
        for _ in 0..p {
            levels.extend(self.levels.iter().cloned());
        }
        let version = if p == 1 {
            self.version
        } else {
            Version::Concatenated
        };
        LeveledCircuit {
            n_qubits: self.n_qubits,
            power: self.power * p,
            trnc_lv: 0,
            version,
            levels,
        }
    }

    /// Copy with the trailing `trnc_lv` levels emptied.
    pub fn truncated(&self, trnc_lv: usize) -> LeveledCircuit {
        let keep = self.levels.len().saturating_sub(trnc_lv);
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(x, l)| if x < keep { l.clone() } else { Vec::new() })
            .collect();
        LeveledCircuit {
            n_qubits: self.n_qubits,
            power: self.power,
            trnc_lv: trnc_lv.min(self.levels.len()),
            version: if trnc_lv == 0 {
                self.version
            } else {
                Version::Truncated
            },
            levels,
        }
    }

    /// Equal action on `domain`.
    pub fn restricted_equal(&self, other: &LeveledCircuit, domain: &[u64]) -> bool {
        assert_eq!(self.n_qubits, other.n_qubits, "widths differ");
        domain
            .iter()
            .all(|&w| self.apply_to_basis(w) == other.apply_to_basis(w))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidCircuit(e.to_string()))
    }
}

/// Applies `gate` to a dense vector whose work bits start at `offset`. The
/// gate swaps the amplitudes of each pair `(i, i ^ bit)` it fires on.
pub(crate) fn apply_gate_dense(gate: &Gate, state: &mut [Complex64], offset: u32) {
    let bit = 1usize << (gate.target() + offset as usize);
    for i in 0..state.len() {
        if i & bit != 0 {
            continue;
        }
        if gate.fires_on((i >> offset) as u64) {
            state.swap(i, i | bit);
        }
    }
}

/// Images of a list of basis integers: a verification certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationTable {
    pub domain: Vec<u64>,
    pub image: Vec<u64>,
}

impl PermutationTable {
    /// Whether `image` is a rearrangement of `domain`.
    pub fn is_closed_permutation(&self) -> bool {
        let mut d = self.domain.clone();
        let mut i = self.image.clone();
        d.sort_unstable();
        i.sort_unstable();
        d == i
    }

    pub fn is_identity(&self) -> bool {
        self.domain == self.image
    }
}
