//! Modular arithmetic, orbits of the modular-exponentiation map, cycle
//! structure of composite powers, and continued-fraction post-processing
//! of measured phases.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `a^x mod n` by square-and-multiply with a widening multiply.
pub fn mod_pow(a: u64, mut x: u64, n: u64) -> u64 {
    assert!(n >= 2, "modulus must be at least 2");
    let mut base = a % n;
    let mut acc = 1u64;
    while x > 0 {
        if x & 1 == 1 {
            acc = mul_mod(acc, base, n);
        }
        base = mul_mod(base, base, n);
        x >>= 1;
    }
    acc
}

#[inline]
pub fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smallest `n` with `2^n >= value`.
fn ceil_log2(value: u64) -> u32 {
    if value <= 1 {
        0
    } else {
        64 - (value - 1).leading_zeros()
    }
}

/// A modulus `N`, a base `a`, and the register widths of the circuit that
/// factors it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoringInstance {
    #[serde(rename = "N")]
    modulus: u64,
    a: u64,
    n: u32,
    m: u32,
}

impl FactoringInstance {
    pub fn new(modulus: u64, a: u64, m: u32) -> Result<Self> {
        if modulus < 15 || modulus % 2 == 0 {
            return Err(Error::InvalidInstance(format!(
                "N = {modulus} must be an odd integer >= 15"
            )));
        }
        if modulus >= 1 << 31 {
            return Err(Error::InvalidInstance(format!("N = {modulus} exceeds 2^31")));
        }
        if a <= 1 || a >= modulus {
            return Err(Error::InvalidInstance(format!(
                "base a = {a} must satisfy 1 < a < {modulus}"
            )));
        }
        let g = gcd(a, modulus);
        if g != 1 {
            return Err(Error::NotCoprime { n: modulus, a, gcd: g });
        }
        let n = ceil_log2(modulus);
        if m == 0 || m > 2 * n + 1 {
            return Err(Error::InvalidInstance(format!(
                "control width m = {m} must lie in [1, {}]",
                2 * n + 1
            )));
        }
        Ok(Self { modulus, a, n, m })
    }

    /// Instance with the recommended control width `m = 2n + 1`.
    pub fn with_full_resolution(modulus: u64, a: u64) -> Result<Self> {
        let n = ceil_log2(modulus.max(2));
        Self::new(modulus, a, 2 * n + 1)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn base(&self) -> u64 {
        self.a
    }

    /// Work-register width `⌈log2 N⌉`.
    pub fn work_qubits(&self) -> u32 {
        self.n
    }

    pub fn control_qubits(&self) -> u32 {
        self.m
    }

    /// `M = 2^m`.
    pub fn control_states(&self) -> u64 {
        1u64 << self.m
    }

    pub fn with_control_qubits(&self, m: u32) -> Result<Self> {
        Self::new(self.modulus, self.a, m)
    }
}

/// The states `f(0), …, f(r-1)` visited by the work register, `f(x) = a^x mod N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orbit {
    instance: FactoringInstance,
    states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl Orbit {
    pub fn instance(&self) -> &FactoringInstance {
        &self.instance
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn period(&self) -> u64 {
        self.states.len() as u64
    }

    /// `f(x mod r)`.
    pub fn state(&self, x: u64) -> u64 {
        self.states[(x % self.period()) as usize]
    }

    pub fn position(&self, state: u64) -> Option<usize> {
        self.index.get(&state).copied()
    }
}

/// Iterates `f(x+1) = a·f(x) mod N` from `f(0) = 1` until 1 recurs.
pub fn build_orbit(instance: &FactoringInstance) -> Orbit {
    let (n, a) = (instance.modulus, instance.a);
    let mut states = vec![1u64];
    let mut current = a % n;
    while current != 1 {
        states.push(current);
        current = mul_mod(current, a, n);
    }
    let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    Orbit {
        instance: *instance,
        states,
        index,
    }
}

/// The orbit partitioned into the closed cycles of `f(k) -> f(k + p)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleDecomposition {
    pub power: u64,
    pub cycles: Vec<Vec<u64>>,
}

impl CycleDecomposition {
    /// The `(source, destination)` transitions, cycle by cycle, in level order.
    pub fn transitions(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.cycles.iter().flat_map(|cycle| {
            let len = cycle.len();
            (0..len).map(move |i| (cycle[i], cycle[(i + 1) % len]))
        })
    }
}

/// Cycles are emitted in order of their heads' first appearance in the orbit;
/// each cycle starts at its head and follows the map.
pub fn cycle_decomposition(orbit: &Orbit, p: u64) -> CycleDecomposition {
    assert!(p >= 1, "power must be positive");
    let r = orbit.states.len();
    let step = (p % r as u64) as usize;
    let mut covered = vec![false; r];
    let mut cycles = Vec::new();
    for head in 0..r {
        if covered[head] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut k = head;
        loop {
            covered[k] = true;
            cycle.push(orbit.states[k]);
            k = (k + step) % r;
            if k == head {
                break;
            }
        }
        cycles.push(cycle);
    }
    CycleDecomposition { power: p, cycles }
}

/// Continued-fraction coefficients of `l / m_states`, leading 0 included.
pub fn continued_fraction(l: u64, m_states: u64) -> Vec<u64> {
    assert!(m_states > 0 && l < m_states, "need 0 <= l < M");
    let mut terms = Vec::new();
    let (mut num, mut den) = (l, m_states);
    loop {
        terms.push(num / den);
        (num, den) = (den, num % den);
        if den == 0 {
            break;
        }
    }
    terms
}

/// All convergents `(s, r)` of a continued fraction, starting with `(0, 1)`.
pub fn convergents(cf: &[u64]) -> Vec<(u64, u64)> {
    let (mut h_prev, mut h) = (0u64, 1u64);
    let (mut k_prev, mut k) = (1u64, 0u64);
    cf.iter()
        .map(|&term| {
            (h_prev, h) = (h, term * h + h_prev);
            (k_prev, k) = (k, term * k + k_prev);
            (h, k)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodCheck {
    Accept,
    Odd,
    /// `a^{r/2} ≡ -1 (mod N)`.
    MinusOne,
    /// `a^r ≢ 1 (mod N)`.
    NotPeriod,
}

pub fn check_period(instance: &FactoringInstance, r: u64) -> PeriodCheck {
    assert!(r >= 1);
    let (n, a) = (instance.modulus, instance.a);
    if r % 2 == 1 {
        PeriodCheck::Odd
    } else if mod_pow(a, r / 2, n) == n - 1 {
        PeriodCheck::MinusOne
    } else if mod_pow(a, r, n) != 1 {
        PeriodCheck::NotPeriod
    } else {
        PeriodCheck::Accept
    }
}

/// `(gcd(a^{r/2} - 1, N), gcd(a^{r/2} + 1, N))`, the order the analysis
/// report prints them in.
pub fn extract_factors(instance: &FactoringInstance, r: u64) -> Result<(u64, u64)> {
    let n = instance.modulus;
    let half = mod_pow(instance.a, r / 2, n);
    let f1 = gcd((half + n - 1) % n, n);
    let f2 = gcd((half + 1) % n, n);
    let trivial = |f: u64| f == 1 || f == n;
    if trivial(f1) || trivial(f2) {
        return Err(Error::TrivialFactor { n, r });
    }
    Ok((f1, f2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    RejectedOdd,
    RejectedCheck { reason: CheckFailure },
    Factors { factor1: u64, factor2: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFailure {
    MinusOne,
    NotPeriod,
    TrivialFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergentVerdict {
    pub s: u64,
    pub r: u64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// Continued-fraction analysis of one measured control value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergentReport {
    pub l_measured: u64,
    pub m: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub frequency: Option<u64>,
    pub phi_phase_bin: String,
    pub phi_phase_dec: String,
    pub phi_phase_frc: (u64, u64),
    pub cont_frc: Vec<u64>,
    pub convergents: Vec<(u64, u64)>,
    pub verdicts: Vec<ConvergentVerdict>,
}

impl ConvergentReport {
    /// The first factor pair found, scanning convergents in order.
    pub fn factors(&self) -> Option<(u64, u64)> {
        self.verdicts.iter().find_map(|v| match v.verdict {
            Verdict::Factors { factor1, factor2 } => Some((factor1, factor2)),
            _ => None,
        })
    }

    pub fn produces_factors(&self) -> bool {
        self.factors().is_some()
    }

    pub fn with_frequency(mut self, frequency: u64) -> Self {
        self.frequency = Some(frequency);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt_pairs(pairs: &[(u64, u64)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(s, r)| format!("({s}, {r})")).collect();
    format!("[{}]", body.join(", "))
}

fn fmt_list(terms: &[u64]) -> String {
    let body: Vec<String> = terms.iter().map(u64::to_string).collect();
    format!("[{}]", body.join(", "))
}

impl fmt::Display for ConvergentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits = format!("{:0width$b}", self.l_measured, width = self.m as usize);
        write!(f, "l_measured   : {bits} {}", self.l_measured)?;
        if let Some(freq) = self.frequency {
            write!(f, " frequency: {freq}")?;
        }
        writeln!(f)?;
        writeln!(f, "phi_phase_bin: {}", self.phi_phase_bin)?;
        writeln!(f, "phi_phase_dec: {}", self.phi_phase_dec)?;
        let (num, den) = self.phi_phase_frc;
        writeln!(f, "phi_phase_frc: ({num}, {den})")?;
        writeln!(f, "cont frc of phi  : {}", fmt_list(&self.cont_frc))?;
        writeln!(f, "convergents of phi: {}", fmt_pairs(&self.convergents))?;
        for v in &self.verdicts {
            write!(f, "conv: ({}, {}) r = {} : ", v.s, v.r, v.r)?;
            match v.verdict {
                Verdict::Factors { factor1, factor2 } => {
                    writeln!(f, "factors")?;
                    writeln!(f, "factor1: {factor1}")?;
                    writeln!(f, "factor2: {factor2}")?;
                }
                _ => writeln!(f, "no factors found")?,
            }
        }
        Ok(())
    }
}

/// Exact decimal expansion of `l / 2^m`.
fn binary_fraction_decimal(l: u64, m: u32) -> String {
    if l == 0 {
        return "0.0".to_string();
    }
    // l / 2^m = l * 5^m / 10^m
    let scaled = l as u128 * 5u128.pow(m);
    let digits = format!("{:0width$}", scaled, width = m as usize + 1);
    let (int, frac) = digits.split_at(digits.len() - m as usize);
    let frac = frac.trim_end_matches('0');
    let mut out = String::with_capacity(int.len() + frac.len() + 1);
    let _ = write!(out, "{int}.{frac}");
    out
}

/// Run the period checks on every convergent of `l / M`, recording all
/// verdicts (no early exit).
pub fn analyze_measurement(instance: &FactoringInstance, l: u64) -> ConvergentReport {
    let m = instance.m;
    let m_states = instance.control_states();
    assert!(l < m_states, "measured value {l} out of range for m = {m}");
    let cont_frc = continued_fraction(l, m_states);
    let convs = convergents(&cont_frc);
    let g = gcd(l, m_states);
    let verdicts = convs
        .iter()
        .map(|&(s, r)| {
            let verdict = match check_period(instance, r) {
                PeriodCheck::Odd => Verdict::RejectedOdd,
                PeriodCheck::MinusOne => Verdict::RejectedCheck {
                    reason: CheckFailure::MinusOne,
                },
                PeriodCheck::NotPeriod => Verdict::RejectedCheck {
                    reason: CheckFailure::NotPeriod,
                },
                PeriodCheck::Accept => match extract_factors(instance, r) {
                    Ok((factor1, factor2)) => Verdict::Factors { factor1, factor2 },
                    Err(_) => Verdict::RejectedCheck {
                        reason: CheckFailure::TrivialFactor,
                    },
                },
            };
            ConvergentVerdict { s, r, verdict }
        })
        .collect();
    ConvergentReport {
        l_measured: l,
        m,
        frequency: None,
        phi_phase_bin: format!("0.{:0width$b}", l, width = m as usize),
        phi_phase_dec: binary_fraction_decimal(l, m),
        phi_phase_frc: (l / g, m_states / g),
        cont_frc,
        convergents: convs,
        verdicts,
    }
}
