//! Truncation sweeps, tries-until-factor ensembles and control-resolution
//! studies.
//!
//! A *try* is one measurement drawn from the exact control distribution
//! followed by the full continued-fraction analysis of that value. Every
//! iteration of an ensemble gets its own seed from [`derive_seed`], so runs
//! are reproducible and iterations are independent of execution order.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::modmath::{analyze_measurement, build_orbit, gcd, FactoringInstance};
use crate::shor::{exact_distribution, PhaseDistribution};
use crate::synth::synth_all_powers;

pub const DEFAULT_MAX_TRIES: u64 = 500;

/// Peak neighbourhoods must carry more than this multiple of `1/M`.
pub const PEAK_PRESENCE_FACTOR: f64 = 2.0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-iteration seed. Part of the output compatibility contract: changing
/// it changes every published study.
pub fn derive_seed(base_seed: u64, trnc_lv: u64, iteration: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ trnc_lv) ^ iteration)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TryOutcome {
    pub tries: u64,
    pub capped: bool,
}

/// A distribution prepared for repeated tries: the sampler plus which
/// control values yield factors.
pub struct TrialPlan {
    sampler: WeightedIndex<f64>,
    produces_factors: Vec<bool>,
}

impl TrialPlan {
    pub fn new(instance: &FactoringInstance, dist: &PhaseDistribution) -> Self {
        let produces_factors = (0..dist.control_states() as u64)
            .map(|l| dist.probabilities[l as usize] > 0.0 && analyze_measurement(instance, l).produces_factors())
            .collect();
        Self {
            sampler: WeightedIndex::new(&dist.probabilities).expect("valid probabilities"),
            produces_factors,
        }
    }

    /// Probability that a single try succeeds.
    pub fn success_probability(&self, dist: &PhaseDistribution) -> f64 {
        dist.probabilities
            .iter()
            .zip(&self.produces_factors)
            .filter(|(_, &ok)| ok)
            .map(|(p, _)| p)
            .sum()
    }

    pub fn run(&self, seed: u64, max_tries: u64) -> TryOutcome {
        self.run_recording(seed, max_tries).0
    }

    /// Like [`TrialPlan::run`], also returning the control value that
    /// produced factors.
    pub fn run_recording(&self, seed: u64, max_tries: u64) -> (TryOutcome, Option<u64>) {
        assert!(max_tries >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for attempt in 1..=max_tries {
            let l = self.sampler.sample(&mut rng);
            if self.produces_factors[l] {
                let outcome = TryOutcome {
                    tries: attempt,
                    capped: false,
                };
                return (outcome, Some(l as u64));
            }
        }
        let outcome = TryOutcome {
            tries: max_tries,
            capped: true,
        };
        (outcome, None)
    }
}

/// Draws measurements from `dist` until one yields factors.
pub fn tries_until_factor(
    instance: &FactoringInstance,
    dist: &PhaseDistribution,
    seed: u64,
    max_tries: u64,
) -> TryOutcome {
    TrialPlan::new(instance, dist).run(seed, max_tries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriesResult {
    pub instance: FactoringInstance,
    pub r: u64,
    pub trnc_lv: usize,
    pub num_it: usize,
    pub max_tries: u64,
    pub tries: Vec<u64>,
    pub capped: Vec<bool>,
    pub mean: f64,
}

impl TriesResult {
    pub fn capped_fraction(&self) -> f64 {
        self.capped.iter().filter(|&&c| c).count() as f64 / self.num_it as f64
    }
}

/// Exact control distribution for `U^p` truncated at `trnc_lv`.
pub fn truncated_distribution(instance: &FactoringInstance, trnc_lv: usize) -> Result<PhaseDistribution> {
    let orbit = build_orbit(instance);
    let family = synth_all_powers(&orbit, instance.control_qubits(), trnc_lv)?;
    Ok(exact_distribution(instance, &family))
}

fn ensemble(
    instance: &FactoringInstance,
    r: u64,
    trnc_lv: usize,
    dist: &PhaseDistribution,
    num_it: usize,
    base_seed: u64,
    max_tries: u64,
) -> TriesResult {
    let plan = TrialPlan::new(instance, dist);
    let outcomes: Vec<TryOutcome> = (0..num_it as u64)
        .map(|it| plan.run(derive_seed(base_seed, trnc_lv as u64, it), max_tries))
        .collect();
    let tries: Vec<u64> = outcomes.iter().map(|o| o.tries).collect();
    let mean = tries.iter().sum::<u64>() as f64 / num_it.max(1) as f64;
    TriesResult {
        instance: *instance,
        r,
        trnc_lv,
        num_it,
        max_tries,
        capped: outcomes.iter().map(|o| o.capped).collect(),
        tries,
        mean,
    }
}

/// One ensemble of `num_it` tries-until-factor runs per truncation level.
pub fn truncation_sweep(
    instance: &FactoringInstance,
    trnc_range: RangeInclusive<usize>,
    num_it: usize,
    base_seed: u64,
    max_tries: u64,
) -> Result<Vec<TriesResult>> {
    let orbit = build_orbit(instance);
    let r = orbit.period();
    trnc_range
        .map(|trnc_lv| {
            let family = synth_all_powers(&orbit, instance.control_qubits(), trnc_lv)?;
            let dist = exact_distribution(instance, &family);
            Ok(ensemble(instance, r, trnc_lv, &dist, num_it, base_seed, max_tries))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakPresence {
    pub s: u64,
    /// `M·s/r`.
    pub center: f64,
    /// Probability of the factor-producing `ℓ` within ±1 of the center.
    pub mass: f64,
    pub present: bool,
}

/// For each factor-producing eigenphase `s/r`, whether the control values
/// near `M·s/r` that actually yield factors carry more than
/// `PEAK_PRESENCE_FACTOR / M` probability.
pub fn peak_presence(instance: &FactoringInstance, dist: &PhaseDistribution, r: u64) -> Vec<PeakPresence> {
    let size = dist.control_states() as u64;
    let threshold = PEAK_PRESENCE_FACTOR / size as f64;
    (1..r)
        .filter(|&s| gcd(s, r) == 1)
        .map(|s| {
            let center = size as f64 * s as f64 / r as f64;
            let lo = (center - 1.0).ceil().max(0.0) as u64;
            let hi = ((center + 1.0).floor() as u64).min(size - 1);
            let mass = (lo..=hi)
                .filter(|&l| analyze_measurement(instance, l).produces_factors())
                .map(|l| dist.probabilities[l as usize])
                .sum::<f64>();
            PeakPresence {
                s,
                center,
                mass,
                present: mass > threshold,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub m: u32,
    pub result: TriesResult,
    pub peaks: Vec<PeakPresence>,
}

impl StudyRow {
    pub fn present_peaks(&self) -> Vec<u64> {
        self.peaks.iter().filter(|p| p.present).map(|p| p.s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionStudy {
    pub rows: Vec<StudyRow>,
}

impl ResolutionStudy {
    pub fn row(&self, m: u32, trnc_lv: usize) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|row| row.m == m && row.result.trnc_lv == trnc_lv)
    }

    /// CSV with one row per `(m, trnc_lv)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,a,r,n,m,trnc_lv,num_it,mean_tries,capped_fraction\n");
        for row in &self.rows {
            let res = &row.result;
            let inst = &res.instance;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                inst.modulus(),
                inst.base(),
                res.r,
                inst.work_qubits(),
                row.m,
                res.trnc_lv,
                res.num_it,
                res.mean,
                res.capped_fraction()
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study serializes")
    }
}

/// `truncation_sweep` for each control width, plus the peak-presence table
/// of every `(m, trnc_lv)` distribution.
pub fn resolution_study(
    instance: &FactoringInstance,
    m_values: &[u32],
    trnc_range: RangeInclusive<usize>,
    num_it: usize,
    base_seed: u64,
    max_tries: u64,
) -> Result<ResolutionStudy> {
    resolution_study_with(instance, m_values, trnc_range, num_it, base_seed, max_tries, |_| {})
}

/// [`resolution_study`] calling `on_row` as each row completes.
pub fn resolution_study_with(
    instance: &FactoringInstance,
    m_values: &[u32],
    trnc_range: RangeInclusive<usize>,
    num_it: usize,
    base_seed: u64,
    max_tries: u64,
    mut on_row: impl FnMut(&StudyRow),
) -> Result<ResolutionStudy> {
    let orbit = build_orbit(instance);
    let r = orbit.period();
    let mut rows = Vec::new();
    for &m in m_values {
        let inst = instance.with_control_qubits(m)?;
        for trnc_lv in trnc_range.clone() {
            let family = synth_all_powers(&orbit, m, trnc_lv)?;
            let dist = exact_distribution(&inst, &family);
            let row = StudyRow {
                m,
                peaks: peak_presence(&inst, &dist, r),
                result: ensemble(&inst, r, trnc_lv, &dist, num_it, base_seed, max_tries),
            };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(ResolutionStudy { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: u64, a: u64, m: u32) -> FactoringInstance {
        FactoringInstance::new(n, a, m).unwrap()
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(1, 0, 0);
        assert_eq!(a, derive_seed(1, 0, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
    }

    #[test]
    fn point_mass_on_factor_value_needs_one_try() {
        let i = inst(21, 2, 5);
        let dist = PhaseDistribution::point_mass(5, 5);
        assert_eq!(
            tries_until_factor(&i, &dist, 99, 10),
            TryOutcome {
                tries: 1,
                capped: false
            }
        );
        let barren = PhaseDistribution::point_mass(5, 0);
        assert_eq!(
            tries_until_factor(&i, &barren, 99, 10),
            TryOutcome {
                tries: 10,
                capped: true
            }
        );
    }

    #[test]
    fn n21_untruncated_mean_is_small() {
        let i = inst(21, 2, 5);
        let sweep = truncation_sweep(&i, 0..=0, 150, 11, DEFAULT_MAX_TRIES).unwrap();
        assert!((2.0..=15.0).contains(&sweep[0].mean), "{}", sweep[0].mean);
        assert_eq!(sweep[0].tries.len(), 150);
        assert!(sweep[0].tries.iter().all(|&t| (1..=DEFAULT_MAX_TRIES).contains(&t)));
    }

    #[test]
    fn single_iteration_mean() {
        let i = inst(21, 2, 5);
        let sweep = truncation_sweep(&i, 2..=3, 1, 5, DEFAULT_MAX_TRIES).unwrap();
        for res in &sweep {
            assert_eq!(res.mean, res.tries[0] as f64);
        }
        assert_eq!(sweep, truncation_sweep(&i, 2..=3, 1, 5, DEFAULT_MAX_TRIES).unwrap());
    }

    #[test]
    fn untruncated_peaks_flag_coprime_phases() {
        let i = inst(21, 2, 5);
        let dist = truncated_distribution(&i, 0).unwrap();
        let peaks = peak_presence(&i, &dist, 6);
        assert_eq!(peaks.iter().map(|p| p.s).collect::<Vec<_>>(), vec![1, 5]);
        assert!(peaks.iter().all(|p| p.present));
    }

    #[test]
    fn study_csv_shape() {
        let i = inst(21, 2, 5);
        let study = resolution_study(&i, &[4, 5], 0..=1, 3, 1, 50).unwrap();
        let csv = study.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "N,a,r,n,m,trnc_lv,num_it,mean_tries,capped_fraction");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("21,2,6,5,4,0,3,"));
        let json: serde_json::Value = serde_json::from_str(&study.to_json()).unwrap();
        assert_eq!(json["rows"][3]["result"]["tries"].as_array().unwrap().len(), 3);
    }
}
