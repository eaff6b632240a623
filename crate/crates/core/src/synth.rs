//! Level-by-level synthesis of the operators `U^p` restricted to the orbit
//! of 1.
//!
//! Each level realizes one transition `f(y) -> f(y + p)` of the cycle
//! decomposition of `U^p`. Levels act in sequence, so a level moves the
//! *current* image of its source (after all earlier levels) onto its
//! destination while leaving the destinations of every earlier level fixed.
//! Later sources are free to move; they are tracked and picked up from
//! wherever the prefix left them.

use std::collections::{HashSet, VecDeque};

use crate::circuit::{Control, Gate, Level, LeveledCircuit, Version};
use crate::error::{Error, Result};
use crate::modmath::{cycle_decomposition, Orbit};

/// Greedy control pruning for a gate on `target` that must fire on
/// `fire_value` and on none of `forbidden`.
///
/// Starts from every non-target qubit, polarity matching `fire_value`, and
/// drops controls from the highest qubit down whenever the relaxed pattern
/// still excludes all forbidden values. Returns `None` when even the full
/// pattern matches a forbidden value, i.e. `fire_value ^ (1 << target)` is
/// forbidden.
pub fn minimize_controls(
    fire_value: u64,
    target: usize,
    forbidden: &[u64],
    n_qubits: usize,
) -> Option<Vec<Control>> {
    let target_bit = 1u64 << target;
    let register = (1u64 << n_qubits) - 1;
    // A forbidden value matches a pattern over `mask` iff it agrees with
    // fire_value on every bit of the mask.
    let matches_any = |mask: u64| forbidden.iter().any(|&f| (f ^ fire_value) & mask == 0);
    let mut mask = register & !target_bit;
    if matches_any(mask) {
        return None;
    }
    for q in (0..n_qubits).rev() {
        let bit = 1u64 << q;
        if mask & bit == 0 {
            continue;
        }
        if !matches_any(mask & !bit) {
            mask &= !bit;
        }
    }
    Some(
        (0..n_qubits)
            .filter(|&q| mask >> q & 1 == 1)
            .map(|q| Control::matching(q, fire_value))
            .collect(),
    )
}

/// Sequence of bit flips taking `current` to `target` without stepping on a
/// protected value. Ascending differing bits when that path is clear,
/// otherwise the shortest path through the hypercube.
fn flip_path(current: u64, target: u64, protected: &HashSet<u64>, n_qubits: usize) -> Option<Vec<usize>> {
    let diff = current ^ target;
    let ascending: Vec<usize> = (0..n_qubits).filter(|&q| diff >> q & 1 == 1).collect();
    let mut running = current;
    let clear = ascending.iter().all(|&q| {
        running ^= 1 << q;
        !protected.contains(&running)
    });
    if clear {
        return Some(ascending);
    }

    let size = 1usize << n_qubits;
    let mut parent: Vec<Option<(u64, usize)>> = vec![None; size];
    let mut seen = vec![false; size];
    seen[current as usize] = true;
    let mut queue = VecDeque::from([current]);
    while let Some(v) = queue.pop_front() {
        if v == target {
            let mut bits = Vec::new();
            let mut node = v;
            while let Some((prev, q)) = parent[node as usize] {
                bits.push(q);
                node = prev;
            }
            bits.reverse();
            return Some(bits);
        }
        for q in 0..n_qubits {
            let next = v ^ (1 << q);
            if !seen[next as usize] && !protected.contains(&next) {
                seen[next as usize] = true;
                parent[next as usize] = Some((v, q));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Gates mapping `current` to `target` that fix every protected value.
///
/// One gate per flipped bit, each controlled on the running value with
/// controls chosen by [`minimize_controls`]. Returns no gates when
/// `current == target`.
pub fn synth_level(current: u64, target: u64, protected: &HashSet<u64>, n_qubits: usize) -> Result<Vec<Gate>> {
    if current == target {
        return Ok(Vec::new());
    }
    debug_assert!(!protected.contains(&current) && !protected.contains(&target));
    let path = flip_path(current, target, protected, n_qubits)
        .ok_or(Error::ProtectedCollision { value: current })?;
    let forbidden: Vec<u64> = protected.iter().copied().collect();
    let mut running = current;
    let mut gates = Vec::with_capacity(path.len());
    for q in path {
        let controls = minimize_controls(running, q, &forbidden, n_qubits)
            .ok_or(Error::ProtectedCollision { value: running })?;
        gates.push(Gate::mcx(controls, q));
        running ^= 1 << q;
    }
    Ok(gates)
}

/// Frontier of an in-progress synthesis.
#[derive(Debug, Clone)]
pub struct SynthesisState {
    /// Current image of each orbit state (indexed by orbit position) under
    /// the levels sealed so far.
    pub trajectories: Vec<u64>,
    /// Destinations of sealed levels; later gates must fix them.
    pub protected: HashSet<u64>,
    pub level_index: usize,
}

impl SynthesisState {
    pub fn new(orbit: &Orbit) -> Self {
        Self {
            trajectories: orbit.states().to_vec(),
            protected: HashSet::new(),
            level_index: 0,
        }
    }

    /// Synthesizes and seals the next level, moving the image of the orbit
    /// state at `source` onto `destination`.
    pub fn seal_level(&mut self, source: usize, destination: u64, n_qubits: usize) -> Result<Level> {
        let current = self.trajectories[source];
        let gates = synth_level(current, destination, &self.protected, n_qubits)?;
        for t in &mut self.trajectories {
            *t = gates.iter().fold(*t, |acc, g| g.apply(acc));
        }
        debug_assert_eq!(self.trajectories[source], destination);
        self.protected.insert(destination);
        self.level_index += 1;
        Ok(gates)
    }
}

/// Synthesizes `U^p` on the orbit, one level per transition, then empties
/// the last `trnc_lv` levels.
pub fn synth_me_operator(orbit: &Orbit, p: u64, trnc_lv: usize) -> Result<LeveledCircuit> {
    let r = orbit.states().len();
    if trnc_lv >= r {
        return Err(Error::InvalidCircuit(format!(
            "trnc_lv {trnc_lv} must be below the period {r}"
        )));
    }
    let n_qubits = orbit.instance().work_qubits() as usize;
    let decomposition = cycle_decomposition(orbit, p);
    let mut state = SynthesisState::new(orbit);
    let mut levels = Vec::with_capacity(r);
    for (src, dst) in decomposition.transitions() {
        let source = orbit.position(src).expect("cycle states lie on the orbit");
        levels.push(state.seal_level(source, dst, n_qubits)?);
    }
    let full = LeveledCircuit::new(n_qubits, p, 0, Version::PerPower, levels)?;
    Ok(full.truncated(trnc_lv))
}

/// The operators `U^{2^q}` for `q < m`, sharing one circuit between powers
/// that agree modulo the period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerFamily {
    circuits: Vec<LeveledCircuit>,
    slots: Vec<usize>,
    powers: Vec<u64>,
}

impl PowerFamily {
    /// One circuit per control qubit, no sharing.
    pub fn from_circuits(circuits: Vec<LeveledCircuit>) -> Self {
        let powers = circuits.iter().map(LeveledCircuit::power).collect();
        let slots = (0..circuits.len()).collect();
        Self {
            circuits,
            slots,
            powers,
        }
    }

    /// Number of control qubits covered.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The operator attached to control qubit `q`.
    pub fn operator(&self, q: usize) -> &LeveledCircuit {
        &self.circuits[self.slots[q]]
    }

    /// Power `p` applied by control qubit `q`.
    pub fn power(&self, q: usize) -> u64 {
        self.powers[q]
    }

    pub fn distinct(&self) -> &[LeveledCircuit] {
        &self.circuits
    }

    /// Index into [`Self::distinct`] for control qubit `q`.
    pub fn slot(&self, q: usize) -> usize {
        self.slots[q]
    }

    /// Whether control qubits `q1` and `q2` share one circuit.
    pub fn shares(&self, q1: usize, q2: usize) -> bool {
        self.slots[q1] == self.slots[q2]
    }

    pub fn total_gates(&self) -> usize {
        self.slots.iter().map(|&s| self.circuits[s].gate_count()).sum()
    }
}

pub fn synth_all_powers(orbit: &Orbit, m: u32, trnc_lv: usize) -> Result<PowerFamily> {
    let r = orbit.period();
    let mut circuits: Vec<LeveledCircuit> = Vec::new();
    let mut residues: Vec<u64> = Vec::new();
    let mut slots = Vec::with_capacity(m as usize);
    let mut powers = Vec::with_capacity(m as usize);
    for q in 0..m {
        let p = 1u64 << q;
        powers.push(p);
        if let Some(slot) = residues.iter().position(|&res| res == p % r) {
            slots.push(slot);
            continue;
        }
        circuits.push(synth_me_operator(orbit, p, trnc_lv)?);
        residues.push(p % r);
        slots.push(circuits.len() - 1);
    }
    Ok(PowerFamily {
        circuits,
        slots,
        powers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modmath::{build_orbit, FactoringInstance};

    fn orbit(n: u64, a: u64) -> Orbit {
        build_orbit(&FactoringInstance::new(n, a, 1).unwrap())
    }

    fn set(values: &[u64]) -> HashSet<u64> {
        values.iter().copied().collect()
    }

    #[test]
    fn minimize_examples() {
        assert_eq!(
            minimize_controls(1, 1, &[2, 4, 8, 16], 5),
            Some(vec![Control::positive(0)])
        );
        assert_eq!(minimize_controls(0b10110, 3, &[], 5), Some(vec![]));
        assert_eq!(minimize_controls(3, 2, &[1], 3), Some(vec![Control::positive(1)]));
        // partner of the fire value is forbidden
        assert_eq!(minimize_controls(3, 2, &[7], 3), None);
    }

    #[test]
    fn level_one_to_eleven() {
        let gates = synth_level(1, 11, &set(&[2, 4, 8, 16]), 5).unwrap();
        assert_eq!(
            gates,
            vec![
                Gate::mcx(vec![Control::positive(0)], 1),
                Gate::mcx(vec![Control::positive(0)], 3),
            ]
        );
        let c = LeveledCircuit::new(5, 1, 0, Version::PerPower, vec![gates]).unwrap();
        assert_eq!(c.permutation_table(&[1, 2, 4, 8, 16]).image, vec![11, 2, 4, 8, 16]);
    }

    #[test]
    fn automatic_level() {
        assert!(synth_level(16, 16, &HashSet::new(), 5).unwrap().is_empty());
    }

    #[test]
    fn unprotected_level_moves_only_its_pattern() {
        let gates = synth_level(1, 2, &HashSet::new(), 5).unwrap();
        let c = LeveledCircuit::new(5, 1, 0, Version::PerPower, vec![gates.clone()]).unwrap();
        assert_eq!(c.apply_to_basis(1), 2);
        // exhaustive: every moved state matches some emitted control pattern
        for w in 0..32u64 {
            if c.apply_to_basis(w) != w {
                assert!(gates.iter().any(|g| g.fires_on(w) || g.fires_on(w ^ (1 << g.target()))));
            }
        }
    }

    #[test]
    fn detours_around_protected_intermediates() {
        // ascending path 0 -> 1 -> 3 is blocked at 1
        let protected = set(&[1]);
        let gates = synth_level(0, 3, &protected, 3).unwrap();
        let c = LeveledCircuit::new(3, 1, 0, Version::PerPower, vec![gates]).unwrap();
        assert_eq!(c.apply_to_basis(0), 3);
        assert_eq!(c.apply_to_basis(1), 1);
    }

    #[test]
    fn isolated_target_is_a_collision() {
        // every neighbour of 0 in a 2-qubit cube is protected
        let err = synth_level(3, 0, &set(&[1, 2]), 2).unwrap_err();
        assert!(matches!(err, Error::ProtectedCollision { .. }));
    }

    #[test]
    fn n21_operator_on_orbit() {
        let o = orbit(21, 2);
        let u = synth_me_operator(&o, 1, 0).unwrap();
        assert_eq!(u.levels().len(), 6);
        assert_eq!(u.version(), Version::PerPower);
        assert_eq!(u.permutation_table(o.states()).image, vec![2, 4, 8, 16, 11, 1]);
        assert_eq!(u.apply_to_basis(16), 11);
    }

    #[test]
    fn n21_square_on_cycles() {
        let o = orbit(21, 2);
        let u2 = synth_me_operator(&o, 2, 0).unwrap();
        assert_eq!(u2.permutation_table(&[1, 4, 16]).image, vec![4, 16, 1]);
        assert_eq!(u2.permutation_table(&[2, 8, 11]).image, vec![8, 11, 2]);
    }

    #[test]
    fn deepest_truncation_keeps_first_transition() {
        let o = orbit(21, 2);
        let u = synth_me_operator(&o, 1, 5).unwrap();
        assert_eq!(u.version(), Version::Truncated);
        assert_eq!(u.levels().iter().filter(|l| !l.is_empty()).count(), 1);
        assert!(!u.levels()[0].is_empty());
        let table = u.permutation_table(o.states());
        assert_eq!(table.image[0], 2);
        let kept = o
            .states()
            .iter()
            .zip(&table.image)
            .filter(|&(&w, &img)| o.position(img) == Some((o.position(w).unwrap() + 1) % 6))
            .count();
        assert_eq!(kept, 1);
        assert!(synth_me_operator(&o, 1, 6).is_err());
    }

    #[test]
    fn prefix_invariant() {
        for (n, a) in [(21, 2), (33, 7), (143, 5), (247, 2)] {
            let o = orbit(n, a);
            let r = o.states().len();
            for q in 0..10 {
                let p = 1u64 << q;
                let full = synth_me_operator(&o, p, 0).unwrap();
                let transitions: Vec<(u64, u64)> =
                    cycle_decomposition(&o, p).transitions().collect();
                for x in 0..r {
                    let prefix = full.truncated(r - 1 - x);
                    for &(src, dst) in &transitions[..=x] {
                        assert_eq!(prefix.apply_to_basis(src), dst, "N={n} p={p} level {x}");
                    }
                    // prefix stays a bijection on the orbit images
                    let mut imgs: Vec<u64> = o.states().iter().map(|&w| prefix.apply_to_basis(w)).collect();
                    imgs.sort_unstable();
                    imgs.dedup();
                    assert_eq!(imgs.len(), r);
                }
            }
        }
    }

    #[test]
    fn truncation_only_empties_trailing_levels() {
        let o = orbit(33, 7);
        let full = synth_me_operator(&o, 4, 0).unwrap();
        for k in 1..10 {
            let t = synth_me_operator(&o, 4, k).unwrap();
            assert_eq!(t.trnc_lv(), k);
            for x in 0..10 {
                if x < 10 - k {
                    assert_eq!(t.levels()[x], full.levels()[x]);
                } else {
                    assert!(t.levels()[x].is_empty());
                }
            }
        }
        assert_eq!(synth_me_operator(&o, 4, 0).unwrap(), full);
    }

    #[test]
    fn shared_powers() {
        let fam = synth_all_powers(&orbit(21, 2), 5, 0).unwrap();
        assert_eq!(fam.len(), 5);
        assert_eq!(fam.distinct().len(), 3);
        assert!(fam.shares(1, 3));
        assert!(fam.shares(2, 4));
        let fam = synth_all_powers(&orbit(33, 7), 6, 0).unwrap();
        assert!(fam.shares(1, 5));
        let fam = synth_all_powers(&orbit(143, 5), 10, 0).unwrap();
        for (lo, hi) in [(2, 6), (3, 7), (4, 8), (5, 9)] {
            assert!(fam.shares(lo, hi));
        }
    }

    #[test]
    fn gate_count_regression() {
        for (n, a, m, expected) in [(21, 2, 5, 46), (33, 7, 6, 125), (143, 5, 10, 456), (247, 2, 10, 1106)] {
            let o = orbit(n, a);
            let fam = synth_all_powers(&o, m, 0).unwrap();
            let distinct: usize = fam.distinct().iter().map(|c| c.gate_count()).sum();
            assert_eq!(distinct, expected, "N={n}");
            let width = o.instance().work_qubits() as usize;
            assert!(fam.total_gates() <= m as usize * width * o.period() as usize);
        }
    }
}
