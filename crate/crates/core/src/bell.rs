//! Linear functionals of correlators: the built-in few-body inequalities,
//! evaluation, noise thresholds and functionals read off dual certificates.
//!
//! Inequality files are JSON:
//!
//! ```text
//! {"scenario": {"parties": N, "settings": m},
//!  "terms": [{"parties": [...], "settings": [...], "coefficient": c}, ...],
//!  "offset": c0,
//!  "bound": {"value": b, "sense": "at-most", "provenance": "analytic"}}
//! ```
//!
//! `bound` may be `null`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::corrdata::{json_f64, json_list, CorrelationTable, CorrelatorKey, Scenario, ScenarioFile};
use crate::error::{Error, Result};
use crate::moment::{MomentStructure, SdpInstance};
use crate::sdp::{validate_certificate, verdict, SdpSolution, SolverConfig, Verdict};

/// Relative threshold below which dual coefficients are dropped.
pub const PRUNE_RELATIVE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundProvenance {
    Analytic,
    Enumerated,
    /// Valid on the relaxation, hence on every local table; not shown tight.
    RelaxationOnly,
}

impl BoundProvenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundProvenance::Analytic => "analytic",
            BoundProvenance::Enumerated => "enumerated",
            BoundProvenance::RelaxationOnly => "relaxation-only",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "analytic" => Some(BoundProvenance::Analytic),
            "enumerated" => Some(BoundProvenance::Enumerated),
            "relaxation-only" => Some(BoundProvenance::RelaxationOnly),
            _ => None,
        }
    }
}

/// Direction of the inequality satisfied by local tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSense {
    AtMost,
    AtLeast,
}

impl BoundSense {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundSense::AtMost => "at-most",
            BoundSense::AtLeast => "at-least",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "at-most" => Some(BoundSense::AtMost),
            "at-least" => Some(BoundSense::AtLeast),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClaimedBound {
    pub value: f64,
    pub sense: BoundSense,
    pub provenance: BoundProvenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BellFunctional {
    scenario: Scenario,
    terms: BTreeMap<CorrelatorKey, f64>,
    offset: f64,
    bound: Option<ClaimedBound>,
}

impl BellFunctional {
    pub fn new(scenario: Scenario, terms: BTreeMap<CorrelatorKey, f64>, offset: f64) -> Result<Self> {
        if !offset.is_finite() {
            return Err(Error::InvalidInput("offset must be finite".into()));
        }
        for (key, c) in &terms {
            key.check(&scenario)?;
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("coefficient of {key} is not finite")));
            }
        }
        Ok(Self {
            scenario,
            terms,
            offset,
            bound: None,
        })
    }

    pub fn with_bound(mut self, bound: ClaimedBound) -> Result<Self> {
        if !bound.value.is_finite() {
            return Err(Error::InvalidInput("bound must be finite".into()));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn terms(&self) -> &BTreeMap<CorrelatorKey, f64> {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn claimed_bound(&self) -> Option<&ClaimedBound> {
        self.bound.as_ref()
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// `offset + Σ coeff·value`. Every key must be present in the table.
    pub fn evaluate(&self, table: &CorrelationTable) -> Result<f64> {
        if *table.scenario() != self.scenario {
            return Err(Error::InvalidInput(format!(
                "table scenario ({}) differs from the functional ({})",
                table.scenario(),
                self.scenario
            )));
        }
        let missing: Vec<String> = self
            .terms
            .keys()
            .filter(|k| !table.contains(k))
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingCorrelators(missing.join(", ")));
        }
        Ok(self.offset
            + self
                .terms
                .iter()
                .map(|(k, c)| c * table.get(k).expect("checked above"))
                .sum::<f64>())
    }

    /// Whether `value` breaks the claimed bound.
    pub fn violates(&self, value: f64) -> Option<bool> {
        self.bound.map(|b| match b.sense {
            BoundSense::AtMost => value > b.value,
            BoundSense::AtLeast => value < b.value,
        })
    }

    pub fn to_json(&self) -> String {
        let mut out = format!(
            "{{\n  \"scenario\": {{\"parties\": {}, \"settings\": {}}},\n  \"terms\": [",
            self.scenario.n_parties(),
            self.scenario.n_settings()
        );
        for (i, (key, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "\n    {{\"parties\": {}, \"settings\": {}, \"coefficient\": {}}}",
                json_list(key.parties()),
                json_list(key.settings()),
                json_f64(*c)
            ));
        }
        if !self.terms.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str(&format!("],\n  \"offset\": {},\n  \"bound\": ", json_f64(self.offset)));
        match &self.bound {
            None => out.push_str("null"),
            Some(b) => out.push_str(&format!(
                "{{\"value\": {}, \"sense\": \"{}\", \"provenance\": \"{}\"}}",
                json_f64(b.value),
                b.sense.as_str(),
                b.provenance.as_str()
            )),
        }
        out.push_str("\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let err = |reason: String| Error::parse("inequality file", reason);
        let raw: FunctionalFile = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let scenario = Scenario::new(raw.scenario.parties, raw.scenario.settings)?;
        let mut terms = BTreeMap::new();
        for t in raw.terms {
            let key = CorrelatorKey::new(t.parties, t.settings)?;
            if terms.insert(key.clone(), t.coefficient).is_some() {
                return Err(err(format!("duplicate term {key}")));
            }
        }
        let f = Self::new(scenario, terms, raw.offset)?;
        match raw.bound {
            None => Ok(f),
            Some(b) => f.with_bound(ClaimedBound {
                value: b.value,
                sense: BoundSense::parse(&b.sense)
                    .ok_or_else(|| err(format!("unknown bound sense `{}`", b.sense)))?,
                provenance: BoundProvenance::parse(&b.provenance)
                    .ok_or_else(|| err(format!("unknown provenance `{}`", b.provenance)))?,
            }),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

impl fmt::Display for BellFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if self.offset != 0.0 || self.terms.is_empty() {
            write!(f, "{}", self.offset)?;
            first = false;
        }
        for (key, c) in &self.terms {
            if first {
                write!(f, "{c}·{key}")?;
                first = false;
            } else if *c < 0.0 {
                write!(f, " - {}·{key}", -c)?;
            } else {
                write!(f, " + {c}·{key}")?;
            }
        }
        if let Some(b) = &self.bound {
            let op = match b.sense {
                BoundSense::AtMost => "<=",
                BoundSense::AtLeast => ">=",
            };
            write!(f, " {op} {} ({})", b.value, b.provenance.as_str())?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalFile {
    scenario: ScenarioFile,
    terms: Vec<TermFile>,
    offset: f64,
    bound: Option<BoundFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    parties: Vec<usize>,
    settings: Vec<usize>,
    coefficient: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundFile {
    value: f64,
    sense: String,
    provenance: String,
}

fn key(pairs: &[(usize, usize)]) -> CorrelatorKey {
    CorrelatorKey::from_pairs(pairs.iter().copied()).expect("built-in keys are valid")
}

/// Shared shape of the two mixed inequalities: pairs of party 0 with every
/// other party on setting `pair_setting`, plus two full-body terms.
fn imix(n: usize, m: usize, pair_setting: usize) -> Result<BellFunctional> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("needs N >= 3, got {n}")));
    }
    let scenario = Scenario::new(n, m)?;
    let w = (n - 1) as f64;
    let mut terms = BTreeMap::new();
    for i in 1..n {
        terms.insert(key(&[(0, 1), (i, pair_setting)]), 1.0);
        terms.insert(key(&[(0, 0), (i, pair_setting)]), -1.0);
    }
    let all0: Vec<(usize, usize)> = (0..n).map(|i| (i, 0)).collect();
    let mut tilted = all0.clone();
    tilted[0].1 = 1;
    terms.insert(key(&all0), w);
    terms.insert(key(&tilted), w);
    BellFunctional::new(scenario, terms, 0.0)?.with_bound(ClaimedBound {
        value: 2.0 * w,
        sense: BoundSense::AtMost,
        provenance: BoundProvenance::Analytic,
    })
}

/// Three-setting inequality: two-body terms between party 0 (settings 1, 0)
/// and setting 2 of every other party, plus two full-body terms weighted
/// `N − 1`. Local bound `2(N − 1)`.
pub fn build_imix3(n: usize) -> Result<BellFunctional> {
    imix(n, 3, 2)
}

/// Two-setting variant with the two-body terms on setting 1. Local bound
/// `2(N − 1)`.
pub fn build_imix2(n: usize) -> Result<BellFunctional> {
    imix(n, 2, 1)
}

/// White-noise threshold `1 − bound/value` of a pure-correlator functional
/// with an upper bound.
pub fn analytic_noise_threshold(f: &BellFunctional, quantum_value: f64) -> Result<f64> {
    if f.offset != 0.0 {
        return Err(Error::Refused(
            "functional has a constant offset, so damping does not scale its value".into(),
        ));
    }
    let bound = match f.bound {
        Some(ClaimedBound {
            value,
            sense: BoundSense::AtMost,
            ..
        }) => value,
        _ => return Err(Error::Refused("functional has no upper bound".into())),
    };
    if !(quantum_value > bound) {
        return Err(Error::Refused(format!(
            "value {quantum_value} does not exceed the bound {bound}"
        )));
    }
    Ok(1.0 - bound / quantum_value)
}

/// Reads the functional `G(P) = ⟨A_0(P), Z⟩` off a validated dual
/// certificate: the coefficient of a correlator is the sum of `Z` over the
/// positions holding it, the offset is the sum over identity positions.
/// `G ≥ 0` on every table with a PSD completion, and `G(table) = λ*`.
pub fn extract_from_dual(
    ms: &MomentStructure,
    inst: &SdpInstance,
    sol: &SdpSolution,
    table: &CorrelationTable,
    cfg: &SolverConfig,
) -> Result<BellFunctional> {
    if inst.size() != ms.size() || sol.z.n() != ms.size() {
        return Err(Error::InvalidInput("certificate does not match the moment matrix".into()));
    }
    let report = validate_certificate(inst, sol, cfg);
    if !report.passed {
        return Err(Error::Refused(format!("certificate failed validation\n{report}")));
    }
    if verdict(sol, cfg) != Verdict::Nonlocal {
        return Err(Error::Refused(format!(
            "verdict is {}, not Nonlocal; there is no violated functional to extract",
            verdict(sol, cfg)
        )));
    }
    let z = &sol.z;
    let weight = |r: u32, c: u32| {
        let v = z.get(r as usize, c as usize);
        if r == c {
            v
        } else {
            2.0 * v
        }
    };
    let mut terms: BTreeMap<CorrelatorKey, f64> = inst
        .known_positions()
        .iter()
        .map(|(key, positions)| (key.clone(), positions.iter().map(|&(r, c)| weight(r, c)).sum()))
        .collect();
    let offset: f64 = inst.identity_positions().iter().map(|&(r, c)| weight(r, c)).sum();
    let max = terms.values().fold(0.0f64, |m, c| m.max(c.abs()));
    terms.retain(|_, c| c.abs() >= PRUNE_RELATIVE * max);

    let f = BellFunctional::new(*ms.scenario(), terms, offset)?.with_bound(ClaimedBound {
        value: 0.0,
        sense: BoundSense::AtLeast,
        provenance: BoundProvenance::RelaxationOnly,
    })?;
    let value = f.evaluate(table)?;
    if !(value < 0.0) || (value - sol.lambda_star).abs() > 1e-6 {
        return Err(Error::Numerical(format!(
            "extracted functional evaluates to {value} on the input, expected {}",
            sol.lambda_star
        )));
    }
    Ok(f)
}
