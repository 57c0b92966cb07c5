//! Scenarios, correlator keys and correlation tables.
//!
//! Correlators of dichotomic (±1) observables are the primary data
//! representation. A [`CorrelationTable`] may be partial: any correlator that
//! is not listed is treated as unknown by the moment-matrix builder.
//!
//! Tables are exchanged as JSON documents of the form
//!
//! ```text
//! {"scenario": {"parties": N, "settings": m},
//!  "entries": [{"parties": [i1, ...], "settings": [x1, ...], "value": v}, ...]}
//! ```
//!
//! with 0-based, strictly increasing party indices.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for probability blocks.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Number of parties `N` and measurement settings per party `m`. Outcomes are
/// always dichotomic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Scenario {
    n_parties: usize,
    n_settings: usize,
}

impl Scenario {
    pub const N_OUTCOMES: usize = 2;

    pub fn new(n_parties: usize, n_settings: usize) -> Result<Self> {
        if n_parties == 0 {
            return Err(Error::InvalidScenario("at least one party is required".into()));
        }
        if n_settings == 0 {
            return Err(Error::InvalidScenario(
                "at least one setting per party is required".into(),
            ));
        }
        Ok(Self {
            n_parties,
            n_settings,
        })
    }

    /// Like [`Scenario::new`] but also takes the outcome count, which must be 2.
    pub fn with_outcomes(n_parties: usize, n_settings: usize, n_outcomes: usize) -> Result<Self> {
        if n_outcomes != Self::N_OUTCOMES {
            return Err(Error::InvalidScenario(format!(
                "only dichotomic measurements are supported (got {n_outcomes} outcomes)"
            )));
        }
        Self::new(n_parties, n_settings)
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn n_outcomes(&self) -> usize {
        Self::N_OUTCOMES
    }

    /// Total number of single-party observables, `N·m`.
    pub fn n_generators(&self) -> usize {
        self.n_parties * self.n_settings
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={}, m={}", self.n_parties, self.n_settings)
    }
}

/// Identifies one correlator `⟨M_{x1}^{(i1)} ⋯ M_{xk}^{(ik)}⟩`.
///
/// Keys order first by correlator order, then by parties, then by settings.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CorrelatorKey {
    parties: Vec<usize>,
    settings: Vec<usize>,
}

impl CorrelatorKey {
    pub fn new(parties: Vec<usize>, settings: Vec<usize>) -> Result<Self> {
        let key = Self { parties, settings };
        if key.parties.is_empty() {
            return Err(key.invalid("a correlator involves at least one party"));
        }
        if key.parties.len() != key.settings.len() {
            return Err(key.invalid("parties and settings differ in length"));
        }
        if key.parties.windows(2).any(|w| w[0] >= w[1]) {
            return Err(key.invalid("parties must be strictly increasing"));
        }
        Ok(key)
    }

    /// Builds a key from `(party, setting)` pairs given in any party order.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        let (parties, settings) = pairs.into_iter().unzip();
        Self::new(parties, settings)
    }

    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    /// Number of parties involved.
    pub fn order(&self) -> usize {
        self.parties.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parties.iter().copied().zip(self.settings.iter().copied())
    }

    /// Checks that every index is in range for `scenario`.
    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        if let Some(&p) = self.parties.iter().find(|&&p| p >= scenario.n_parties()) {
            return Err(self.invalid(&format!("party {p} out of range for {scenario}")));
        }
        if let Some(&x) = self.settings.iter().find(|&&x| x >= scenario.n_settings()) {
            return Err(self.invalid(&format!("setting {x} out of range for {scenario}")));
        }
        Ok(())
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidKey {
            key: self.to_string(),
            reason: reason.into(),
        }
    }
}

impl Ord for CorrelatorKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.parties.cmp(&other.parties))
            .then_with(|| self.settings.cmp(&other.settings))
    }
}

impl PartialOrd for CorrelatorKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CorrelatorKey {
    /// `parties=[0,2] settings=[1,0]` renders as `<0:1 2:0>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        let n = self.parties.len().max(self.settings.len());
        for i in 0..n {
            if i > 0 {
                f.write_str(" ")?;
            }
            match (self.parties.get(i), self.settings.get(i)) {
                (Some(p), Some(x)) => write!(f, "{p}:{x}")?,
                (Some(p), None) => write!(f, "{p}:?")?,
                (None, Some(x)) => write!(f, "?:{x}")?,
                (None, None) => unreachable!(),
            }
        }
        f.write_str(">")
    }
}

/// Sparse map from correlator keys to observed values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    scenario: Scenario,
    entries: BTreeMap<CorrelatorKey, f64>,
}

impl CorrelationTable {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            entries: BTreeMap::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Adds an entry. Duplicate keys, invalid keys and values outside
    /// `[-1, 1]` are rejected.
    pub fn insert(&mut self, key: CorrelatorKey, value: f64) -> Result<()> {
        key.check(&self.scenario)?;
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(Error::InvalidKey {
                key: key.to_string(),
                reason: format!("value {value} outside [-1, 1]"),
            });
        }
        if self.entries.contains_key(&key) {
            return Err(Error::InvalidKey {
                key: key.to_string(),
                reason: "duplicate key".into(),
            });
        }
        self.entries.insert(key, value);
        Ok(())
    }

    pub fn get(&self, key: &CorrelatorKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn contains(&self, key: &CorrelatorKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CorrelatorKey, f64)> + '_ {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &CorrelatorKey> + '_ {
        self.entries.keys()
    }

    /// Keeps exactly the entries of order at most `k_max`.
    pub fn restrict_order(&self, k_max: usize) -> Self {
        Self {
            scenario: self.scenario,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| k.order() <= k_max)
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
        }
    }

    /// Multiplies every value by `factor ∈ [0, 1]`; white noise with weight
    /// `p` acts on correlators of traceless observables as `factor = 1 - p`.
    pub fn damped(&self, factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::InvalidInput(format!(
                "damping factor {factor} outside [0, 1]"
            )));
        }
        Ok(Self {
            scenario: self.scenario,
            entries: self
                .entries
                .iter()
                .map(|(k, &v)| (k.clone(), v * factor))
                .collect(),
        })
    }

    /// Convex combination `Σ w_i · T_i` of tables sharing one key set.
    pub fn mixture(tables: &[&CorrelationTable], weights: &[f64]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::InvalidInput("mixture of zero tables".into()))?;
        if tables.len() != weights.len() {
            return Err(Error::InvalidInput("one weight per table is required".into()));
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput("mixture weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let mut entries = BTreeMap::new();
        for key in first.keys() {
            let mut acc = 0.0;
            for (t, &w) in tables.iter().zip(weights) {
                if t.scenario != first.scenario {
                    return Err(Error::InvalidInput("mixture of different scenarios".into()));
                }
                let v = t.get(key).ok_or_else(|| {
                    Error::InvalidInput(format!("key {key} missing from a mixture component"))
                })?;
                acc += w * v;
            }
            entries.insert(key.clone(), acc.clamp(-1.0, 1.0));
        }
        if tables.iter().any(|t| t.len() != first.len()) {
            return Err(Error::InvalidInput("mixture components have different keys".into()));
        }
        Ok(Self {
            scenario: first.scenario,
            entries,
        })
    }

    /// Serializes to the correlation-file text format, one entry per line.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{{\n  \"scenario\": {{\"parties\": {}, \"settings\": {}}},\n  \"entries\": [",
            self.scenario.n_parties(),
            self.scenario.n_settings()
        ));
        for (i, (key, value)) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "\n    {{\"parties\": {}, \"settings\": {}, \"value\": {}}}",
                json_list(key.parties()),
                json_list(key.settings()),
                json_f64(*value)
            ));
        }
        if !self.entries.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("]\n}\n");
        out
    }

    /// Parses the correlation-file format.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TableFile = serde_json::from_str(text)
            .map_err(|e| Error::parse("correlation file", e.to_string()))?;
        let scenario = Scenario::new(raw.scenario.parties, raw.scenario.settings)?;
        let mut table = Self::new(scenario);
        for entry in raw.entries {
            let key = CorrelatorKey::new(entry.parties, entry.settings)?;
            table.insert(key, entry.value)?;
        }
        Ok(table)
    }
}

pub(crate) fn json_list(xs: &[usize]) -> String {
    let inner: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

pub(crate) fn json_f64(v: f64) -> String {
    serde_json::to_string(&v).expect("finite values serialize")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ScenarioFile {
    pub parties: usize,
    pub settings: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    scenario: ScenarioFile,
    entries: Vec<EntryFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    parties: Vec<usize>,
    settings: Vec<usize>,
    value: f64,
}

pub fn read_table(path: impl AsRef<Path>) -> Result<CorrelationTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CorrelationTable::from_json(&text)
}

pub fn write_table(table: &CorrelationTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_json()).map_err(|e| Error::io(path, e))
}

/// Outcome distributions `p(a_{i1} … a_{ik} | x_{i1} … x_{ik})`, one block per
/// party subset and setting choice.
///
/// Within a block, bit `j` of the index is the outcome of the `j`-th party of
/// the key.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    scenario: Scenario,
    blocks: BTreeMap<CorrelatorKey, Vec<f64>>,
}

impl ProbabilityTable {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            blocks: BTreeMap::new(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn insert(&mut self, key: CorrelatorKey, probs: Vec<f64>) -> Result<()> {
        key.check(&self.scenario)?;
        let expected = 1usize << key.order();
        if probs.len() != expected {
            return Err(Error::InvalidInput(format!(
                "block {key} has {} probabilities, expected {expected}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput(format!(
                "block {key} has a probability outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!(
                "block {key} sums to {total}, not 1"
            )));
        }
        if self.blocks.contains_key(&key) {
            return Err(Error::InvalidInput(format!("duplicate block {key}")));
        }
        self.blocks.insert(key, probs);
        Ok(())
    }

    pub fn get(&self, key: &CorrelatorKey) -> Option<&[f64]> {
        self.blocks.get(key).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CorrelatorKey, &[f64])> + '_ {
        self.blocks.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Sums out parties of block `key` that are not in `sub`.
    pub fn marginal(&self, key: &CorrelatorKey, sub: &CorrelatorKey) -> Result<Vec<f64>> {
        let probs = self
            .get(key)
            .ok_or_else(|| Error::InvalidInput(format!("no block {key}")))?;
        let positions: Vec<usize> = sub
            .pairs()
            .map(|pair| {
                key.pairs()
                    .position(|q| q == pair)
                    .ok_or_else(|| Error::InvalidInput(format!("{sub} is not a sub-key of {key}")))
            })
            .collect::<Result<_>>()?;
        let mut out = vec![0.0; 1 << sub.order()];
        for (idx, &p) in probs.iter().enumerate() {
            let sub_idx = positions
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, &pos)| acc | (((idx >> pos) & 1) << j));
            out[sub_idx] += p;
        }
        Ok(out)
    }
}

/// Converts each probability block to its correlator,
/// `Σ_a (-1)^{a_1 + … + a_k} p(a | x)`.
pub fn correlators_from_probabilities(pt: &ProbabilityTable) -> Result<CorrelationTable> {
    let mut table = CorrelationTable::new(pt.scenario);
    for (key, probs) in pt.iter() {
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidInput(format!("block {key} is not normalized")));
        }
        let value: f64 = probs
            .iter()
            .enumerate()
            .map(|(idx, &p)| if idx.count_ones() % 2 == 0 { p } else { -p })
            .sum();
        table.insert(key.clone(), value.clamp(-1.0, 1.0))?;
    }
    Ok(table)
}
