//! Domain types for patients, longitudinal observations, and event windows.
//!
//! A patient carries baseline covariates, a list of longitudinal
//! observations (raw PSA in ng/ml, and/or positive-core counts out of a
//! number of sampled cores), and an event record describing what was
//! observed at the end of follow-up:
//!
//! - `delta = 0`: still event-free; `t_upper` is the censoring time.
//! - `delta = 1`: progression detected by a biopsy at `t_upper`, with the
//!   last clean biopsy at `t_prg_minus` (progression happened in between).
//! - `delta = 2`: treatment started at `t_upper` before any progression was
//!   found; `t_prg_minus` is the last clean biopsy.
//!
//! Validation is total: a malformed dataset produces a structured error
//! naming each offending patient and rule, never a partially usable value.
//! Datasets are immutable after construction and safe to share across
//! threads. Raw PSA is stored untransformed; the log2(PSA + 1) transform is
//! applied by the likelihood.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // redundant only when a dependency links std (e.g. test builds)
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Domain};

/// Which longitudinal outcome a row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    #[serde(rename = "psa")]
    Psa,
    #[serde(rename = "cr")]
    CoreRatio,
}

/// End-of-follow-up status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Censored = 0,
    Progression = 1,
    Treatment = 2,
}

impl EventKind {
    pub fn from_u8(delta: u8) -> Option<Self> {
        match delta {
            0 => Some(EventKind::Censored),
            1 => Some(EventKind::Progression),
            2 => Some(EventKind::Treatment),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalObservation {
    pub patient_id: String,
    /// Years since the start of surveillance.
    pub time: f64,
    pub outcome_kind: OutcomeKind,
    /// Raw PSA in ng/ml, or the count of positive cores.
    pub value: f64,
    /// Total cores sampled; present iff `outcome_kind` is `CoreRatio`.
    pub trials: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub delta: EventKind,
    /// Last progression-free biopsy time (years).
    pub t_prg_minus: f64,
    /// Censoring time (delta 0), progression-detection biopsy time
    /// (delta 1), or treatment time (delta 2).
    pub t_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineCovariates {
    /// Age in years at the start of surveillance.
    pub age: f64,
    /// Baseline PSA density in ng/ml per ml of prostate volume.
    pub psa_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub covariates: BaselineCovariates,
    pub longitudinal: Vec<LongitudinalObservation>,
    pub event: EventRecord,
}

impl PatientRecord {
    pub fn psa_observations(&self) -> impl Iterator<Item = &LongitudinalObservation> {
        self.longitudinal.iter().filter(|o| o.outcome_kind == OutcomeKind::Psa)
    }

    pub fn cr_observations(&self) -> impl Iterator<Item = &LongitudinalObservation> {
        self.longitudinal.iter().filter(|o| o.outcome_kind == OutcomeKind::CoreRatio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub patients: Vec<PatientRecord>,
    /// Free-text tag describing where the data came from.
    pub provenance: String,
}

/// A single failed validation rule on a single patient.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub patient_id: String,
    pub rule: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "patient {}: violated rule \"{}\"", self.patient_id, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("duplicate patient id {0}")]
    DuplicateId(String),
    #[error("{} invariant violation(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
    #[error("need {needed} {stratum} patients for the split, only {available} available")]
    StratumShortage { stratum: &'static str, needed: usize, available: usize },
}

impl Dataset {
    pub fn new(patients: Vec<PatientRecord>, provenance: impl Into<String>) -> Self {
        Dataset { patients, provenance: provenance.into() }
    }

    /// Patient counts by status: [censored, progressed, treated].
    pub fn delta_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for p in &self.patients {
            counts[p.event.delta.as_u8() as usize] += 1;
        }
        counts
    }

    /// Checks every structural invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.patients.is_empty() {
            return Err(DataError::Empty);
        }
        let mut ids: Vec<&str> = self.patients.iter().map(|p| p.patient_id.as_str()).collect();
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(DataError::DuplicateId(String::from(w[0])));
            }
        }

        let mut violations = Vec::new();
        for p in &self.patients {
            let mut fail = |rule: String| {
                violations.push(Violation { patient_id: p.patient_id.clone(), rule });
            };
            if !(p.covariates.age > 0.0) {
                fail(format!("age > 0 (got {})", p.covariates.age));
            }
            if !(p.covariates.psa_density > 0.0) {
                fail(format!("psa_density > 0 (got {})", p.covariates.psa_density));
            }
            let ev = &p.event;
            if !(ev.t_prg_minus >= 0.0 && ev.t_prg_minus.is_finite()) {
                fail(format!("t_prg_minus ≥ 0 (got {})", ev.t_prg_minus));
            }
            if !ev.t_upper.is_finite() {
                fail(format!("t_upper finite (got {})", ev.t_upper));
            }
            match ev.delta {
                EventKind::Progression => {
                    if !(ev.t_prg_minus < ev.t_upper) {
                        fail(format!(
                            "t_prg_minus < t_upper required when delta = 1 (got {} and {})",
                            ev.t_prg_minus, ev.t_upper
                        ));
                    }
                }
                EventKind::Censored | EventKind::Treatment => {
                    if !(ev.t_prg_minus <= ev.t_upper) {
                        fail(format!(
                            "t_prg_minus ≤ t_upper (got {} and {})",
                            ev.t_prg_minus, ev.t_upper
                        ));
                    }
                }
            }
            for obs in &p.longitudinal {
                if obs.patient_id != p.patient_id {
                    fail(format!(
                        "observation patient_id matches record (got {})",
                        obs.patient_id
                    ));
                }
                if !(obs.time >= 0.0 && obs.time.is_finite()) {
                    fail(format!("observation time ≥ 0 (got {})", obs.time));
                }
                if obs.time > ev.t_upper {
                    fail(format!(
                        "observation times ≤ t_upper (got {} > {})",
                        obs.time, ev.t_upper
                    ));
                }
                match obs.outcome_kind {
                    OutcomeKind::Psa => {
                        if !(obs.value >= 0.0 && obs.value.is_finite()) {
                            fail(format!("PSA value ≥ 0 (got {})", obs.value));
                        }
                        if obs.trials.is_some() {
                            fail(String::from("trials present iff outcome is core ratio"));
                        }
                    }
                    OutcomeKind::CoreRatio => match obs.trials {
                        None => fail(String::from("trials present iff outcome is core ratio")),
                        Some(tr) => {
                            let whole = obs.value.fract() == 0.0;
                            if !(obs.value >= 0.0 && obs.value <= f64::from(tr) && whole) {
                                fail(format!(
                                    "0 ≤ positive cores ≤ trials (got {} of {})",
                                    obs.value, tr
                                ));
                            }
                        }
                    },
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(DataError::Invalid(violations))
        }
    }
}

/// Splits into a training set of `n_train` patients and a test set with
/// exactly `n_test_progressed` progressed (delta 1) and `n_test_other`
/// non-progressed patients. Selection is seeded and stratified by status;
/// both halves keep the original patient order.
pub fn split_train_test(
    ds: &Dataset,
    n_train: usize,
    n_test_progressed: usize,
    n_test_other: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    use rand::seq::SliceRandom;

    let progressed: Vec<usize> = (0..ds.patients.len())
        .filter(|&i| ds.patients[i].event.delta == EventKind::Progression)
        .collect();
    let other: Vec<usize> =
        (0..ds.patients.len()).filter(|&i| !progressed.contains(&i)).collect();

    if progressed.len() < n_test_progressed {
        return Err(DataError::StratumShortage {
            stratum: "progressed",
            needed: n_test_progressed,
            available: progressed.len(),
        });
    }
    if other.len() < n_test_other {
        return Err(DataError::StratumShortage {
            stratum: "non-progressed",
            needed: n_test_other,
            available: other.len(),
        });
    }

    let mut rng = stream(seed, Domain::Split, 0, 0, 0);
    let mut pool_prg = progressed.clone();
    let mut pool_oth = other.clone();
    pool_prg.shuffle(&mut rng);
    pool_oth.shuffle(&mut rng);

    let mut test_idx: Vec<usize> = pool_prg.drain(..n_test_progressed).collect();
    test_idx.extend(pool_oth.drain(..n_test_other));

    let mut rest: Vec<usize> = pool_prg;
    rest.extend(pool_oth);
    if rest.len() < n_train {
        return Err(DataError::StratumShortage {
            stratum: "remaining training",
            needed: n_train,
            available: rest.len(),
        });
    }
    rest.shuffle(&mut rng);
    let mut train_idx: Vec<usize> = rest.drain(..n_train).collect();

    test_idx.sort_unstable();
    train_idx.sort_unstable();
    let take = |idx: &[usize], tag: &str| Dataset {
        patients: idx.iter().map(|&i| ds.patients[i].clone()).collect(),
        provenance: format!("{} ({tag} split, seed {seed})", ds.provenance),
    };
    Ok((take(&train_idx, "train"), take(&test_idx, "test")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn obs(id: &str, time: f64, value: f64) -> LongitudinalObservation {
        LongitudinalObservation {
            patient_id: id.to_string(),
            time,
            outcome_kind: OutcomeKind::Psa,
            value,
            trials: None,
        }
    }

    fn patient(id: &str, delta: EventKind, t_minus: f64, t_upper: f64) -> PatientRecord {
        PatientRecord {
            patient_id: id.to_string(),
            covariates: BaselineCovariates { age: 62.0, psa_density: 0.12 },
            longitudinal: vec![obs(id, 0.0, 5.4), obs(id, (t_upper * 0.5).max(0.0), 6.1)],
            event: EventRecord { delta, t_prg_minus: t_minus, t_upper },
        }
    }

    fn fixture() -> Dataset {
        Dataset::new(
            vec![
                patient("p1", EventKind::Censored, 4.0, 9.0),
                patient("p2", EventKind::Progression, 2.0, 4.0),
                patient("p3", EventKind::Treatment, 1.0, 3.0),
            ],
            "unit fixture",
        )
    }

    #[test]
    fn valid_fixture_passes() {
        let ds = fixture();
        assert!(ds.validate().is_ok());
        assert_eq!(ds.patients.len(), 3);
        assert_eq!(ds.delta_counts(), [1, 1, 1]);
    }

    #[test]
    fn serde_round_trip_is_identical() {
        let ds = fixture();
        let json = serde_json::to_string(&ds).unwrap();
        let back: Dataset = serde_json::from_str(&json).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn negative_psa_names_the_rule() {
        let mut ds = fixture();
        ds.patients[0].longitudinal[1].value = -1.0;
        match ds.validate() {
            Err(DataError::Invalid(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].patient_id, "p1");
                assert!(v[0].rule.contains("PSA value ≥ 0"), "rule was {}", v[0].rule);
            }
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn progression_interval_must_be_strict() {
        let mut ds = fixture();
        ds.patients[1].event.t_prg_minus = 4.0; // equal to t_upper
        match ds.validate() {
            Err(DataError::Invalid(v)) => {
                assert!(v[0].rule.contains("t_prg_minus < t_upper"), "rule was {}", v[0].rule);
            }
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn observation_after_t_upper_is_rejected() {
        let mut ds = fixture();
        ds.patients[2].longitudinal[1].time = 8.0; // beyond t_upper = 3
        assert!(matches!(ds.validate(), Err(DataError::Invalid(_))));
    }

    #[test]
    fn core_ratio_needs_consistent_counts() {
        let mut ds = fixture();
        ds.patients[0].longitudinal.push(LongitudinalObservation {
            patient_id: "p1".to_string(),
            time: 1.0,
            outcome_kind: OutcomeKind::CoreRatio,
            value: 13.0,
            trials: Some(12),
        });
        match ds.validate() {
            Err(DataError::Invalid(v)) => {
                assert!(v[0].rule.contains("positive cores ≤ trials"));
            }
            other => panic!("expected invariant violation, got {other:?}"),
        }
        // Missing trials is also a violation.
        ds.patients[0].longitudinal.last_mut().unwrap().trials = None;
        ds.patients[0].longitudinal.last_mut().unwrap().value = 3.0;
        assert!(matches!(ds.validate(), Err(DataError::Invalid(_))));
    }

    #[test]
    fn duplicate_and_empty_are_structured_errors() {
        let mut ds = fixture();
        ds.patients[2].patient_id = "p1".to_string();
        assert_eq!(ds.validate(), Err(DataError::DuplicateId("p1".to_string())));
        let empty = Dataset::new(vec![], "none");
        assert_eq!(empty.validate(), Err(DataError::Empty));
    }

    fn synthetic_population(n_progressed: usize, n_other: usize) -> Dataset {
        let mut patients = Vec::new();
        for i in 0..n_progressed {
            patients.push(patient(&format!("prg{i}"), EventKind::Progression, 2.0, 4.0));
        }
        for i in 0..n_other {
            let delta = if i % 2 == 0 { EventKind::Censored } else { EventKind::Treatment };
            patients.push(patient(&format!("oth{i}"), delta, 3.0, 6.0));
        }
        Dataset::new(patients, "synthetic")
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let ds = synthetic_population(160, 340);
        let (train, test) = split_train_test(&ds, 300, 100, 100, 7).unwrap();
        assert_eq!(train.patients.len(), 300);
        assert_eq!(test.patients.len(), 200);
        assert_eq!(test.delta_counts()[1], 100);

        // Disjoint ids.
        for t in &test.patients {
            assert!(!train.patients.iter().any(|p| p.patient_id == t.patient_id));
        }

        // Same seed, same split.
        let (train2, test2) = split_train_test(&ds, 300, 100, 100, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
    }

    #[test]
    fn split_reports_stratum_shortage() {
        let ds = synthetic_population(150, 100);
        match split_train_test(&ds, 10, 400, 10, 1) {
            Err(DataError::StratumShortage { stratum, needed, available }) => {
                assert_eq!(stratum, "progressed");
                assert_eq!(needed, 400);
                assert_eq!(available, 150);
            }
            other => panic!("expected shortage, got {other:?}"),
        }
    }
}
