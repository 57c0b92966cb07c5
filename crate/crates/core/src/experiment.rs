//! Standard datasets and the detection, robustness and sweep pipelines built
//! on them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::algebra::{GeneratingSet, Generator, Monomial, DEFAULT_MAX_SET_SIZE};
use crate::corrdata::{CorrelationTable, CorrelatorKey, Scenario};
use crate::error::{Error, Result};
use crate::moment::{build, MomentStructure, SdpInstance};
use crate::qsim::{
    full_table, fullbody_keys, make_ghz_capped, make_graph_state_capped, make_w_capped,
    random_orthogonal_settings, GraphSpec, MeasurementAssignment, NoiseLevel, StateVector,
    SIGMA_D, SIGMA_D_MINUS, SIGMA_X, SIGMA_Z,
};
use crate::sdp::{
    solve, validate_certificate, verdict, CertificateReport, SdpSolution, SolverConfig, Verdict,
};

/// Desk-scale limits. Each refusal names the limit and `--cap-override`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    pub max_qubits: usize,
    /// Largest N for level-2 SDPs with at most two settings.
    pub sdp_parties_two_settings: usize,
    /// Largest N for level-2 SDPs with three or more settings.
    pub sdp_parties_three_settings: usize,
    pub lp_generators: usize,
    pub enum_bits: usize,
    pub max_set_size: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_qubits: crate::qsim::DEFAULT_MAX_QUBITS,
            sdp_parties_two_settings: 10,
            sdp_parties_three_settings: 8,
            lp_generators: crate::localset::DEFAULT_LP_CAP,
            enum_bits: crate::localset::DEFAULT_ENUM_CAP,
            max_set_size: DEFAULT_MAX_SET_SIZE,
        }
    }
}

impl Caps {
    /// Limits that only guard representability.
    pub fn lifted() -> Self {
        Self {
            max_qubits: 26,
            sdp_parties_two_settings: usize::MAX,
            sdp_parties_three_settings: usize::MAX,
            lp_generators: 20,
            enum_bits: 40,
            max_set_size: 5000,
        }
    }

    pub fn check_sdp(&self, scenario: &Scenario) -> Result<()> {
        let cap = if scenario.n_settings() >= 3 {
            self.sdp_parties_three_settings
        } else {
            self.sdp_parties_two_settings
        };
        if scenario.n_parties() > cap {
            return Err(Error::CapExceeded {
                what: format!("SDP with {} parties and {} settings", scenario.n_parties(), scenario.n_settings()),
                cap,
                flag: "--cap-override",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Line,
    Loop,
    Grid(usize, usize),
    Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    W,
    Ghz,
    Graph(GraphKind),
}

impl StateKind {
    /// Number of qubits fixed by the state itself (grids), if any.
    pub fn implied_n(&self) -> Option<usize> {
        match self {
            StateKind::Graph(GraphKind::Grid(r, c)) => Some(r * c),
            _ => None,
        }
    }

    pub fn prepare(&self, n: usize, caps: &Caps) -> Result<StateVector> {
        if let Some(implied) = self.implied_n() {
            if implied != n {
                return Err(Error::InvalidInput(format!(
                    "{self} has {implied} qubits, not {n}"
                )));
            }
        }
        match self {
            StateKind::W => make_w_capped(n, caps.max_qubits),
            StateKind::Ghz => make_ghz_capped(n, caps.max_qubits),
            StateKind::Graph(kind) => {
                let g = match kind {
                    GraphKind::Line => GraphSpec::line(n)?,
                    GraphKind::Loop => GraphSpec::ring(n)?,
                    GraphKind::Grid(r, c) => GraphSpec::grid(*r, *c)?,
                    GraphKind::Star => GraphSpec::star(n)?,
                };
                make_graph_state_capped(&g, caps.max_qubits)
            }
        }
    }
}

impl FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("state", format!("unknown state `{s}` (w | ghz | graph:line | graph:loop | graph:grid RxC | graph:star)"));
        match s.trim() {
            "w" => return Ok(StateKind::W),
            "ghz" => return Ok(StateKind::Ghz),
            _ => {}
        }
        let graph = s.trim().strip_prefix("graph:").ok_or_else(bad)?.trim();
        let kind = match graph {
            "line" => GraphKind::Line,
            "loop" | "ring" => GraphKind::Loop,
            "star" => GraphKind::Star,
            _ => {
                let dims = graph.strip_prefix("grid").ok_or_else(bad)?.trim();
                let (r, c) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
                let r: usize = r.trim().parse().map_err(|_| bad())?;
                let c: usize = c.trim().parse().map_err(|_| bad())?;
                GraphKind::Grid(r, c)
            }
        };
        Ok(StateKind::Graph(kind))
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateKind::W => write!(f, "w"),
            StateKind::Ghz => write!(f, "ghz"),
            StateKind::Graph(GraphKind::Line) => write!(f, "graph:line"),
            StateKind::Graph(GraphKind::Loop) => write!(f, "graph:loop"),
            StateKind::Graph(GraphKind::Star) => write!(f, "graph:star"),
            StateKind::Graph(GraphKind::Grid(r, c)) => write!(f, "graph:grid {r}x{c}"),
        }
    }
}

/// Measurement presets.
///
/// `alt` puts `(σ_x − σ_z)/√2`, `(σ_x + σ_z)/√2` on party 0 and
/// `σ_x`, `σ_z` on the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasPreset {
    Xz,
    Xdz,
    Xd,
    Alt,
    Random(u64),
}

impl MeasPreset {
    pub fn n_settings(&self) -> usize {
        match self {
            MeasPreset::Xdz => 3,
            _ => 2,
        }
    }

    pub fn assignment(&self, n: usize) -> Result<MeasurementAssignment> {
        match self {
            MeasPreset::Xz => MeasurementAssignment::uniform(n, &[SIGMA_X, SIGMA_Z]),
            MeasPreset::Xdz => MeasurementAssignment::uniform(n, &[SIGMA_X, SIGMA_D, SIGMA_Z]),
            MeasPreset::Xd => MeasurementAssignment::uniform(n, &[SIGMA_X, SIGMA_D]),
            MeasPreset::Alt => {
                if n == 0 {
                    return Err(Error::InvalidInput("need at least one party".into()));
                }
                let mut dirs = vec![vec![SIGMA_D_MINUS, SIGMA_D]];
                dirs.extend((1..n).map(|_| vec![SIGMA_X, SIGMA_Z]));
                MeasurementAssignment::new(dirs)
            }
            MeasPreset::Random(seed) => random_orthogonal_settings(n, *seed),
        }
    }
}

impl FromStr for MeasPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "xz" => Ok(MeasPreset::Xz),
            "xdz" => Ok(MeasPreset::Xdz),
            "xd" => Ok(MeasPreset::Xd),
            "alt" => Ok(MeasPreset::Alt),
            other => {
                let seed = other.strip_prefix("random:").ok_or_else(|| {
                    Error::parse("measurement preset", format!("unknown preset `{s}` (xz | xdz | xd | alt | random:<seed>)"))
                })?;
                seed.parse()
                    .map(MeasPreset::Random)
                    .map_err(|_| Error::parse("measurement preset", format!("bad seed `{seed}`")))
            }
        }
    }
}

impl fmt::Display for MeasPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasPreset::Xz => write!(f, "xz"),
            MeasPreset::Xdz => write!(f, "xdz"),
            MeasPreset::Xd => write!(f, "xd"),
            MeasPreset::Alt => write!(f, "alt"),
            MeasPreset::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

/// Extra correlators added on top of the order-capped table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extra {
    None,
    /// `⟨M_0 ⋯ M_0⟩` and `⟨M_1^{(0)} M_0 ⋯ M_0⟩`.
    FullBody,
    Keys(Vec<CorrelatorKey>),
}

impl Extra {
    pub fn keys(&self, n: usize) -> Vec<CorrelatorKey> {
        match self {
            Extra::None => Vec::new(),
            Extra::FullBody => fullbody_keys(n),
            Extra::Keys(keys) => keys.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub state: StateKind,
    pub n: usize,
    pub meas: MeasPreset,
    pub noise: f64,
    pub order_cap: usize,
    pub extra: Extra,
}

impl DatasetSpec {
    /// W state, `(σ_x, σ_z)`, every correlator up to four-body.
    pub fn w(n: usize) -> Self {
        Self {
            state: StateKind::W,
            n,
            meas: MeasPreset::Xz,
            noise: 0.0,
            order_cap: n.min(4),
            extra: Extra::None,
        }
    }

    /// GHZ with `(σ_x, σ_d)`, up to four-body plus the two full-body terms.
    pub fn ghz_two_settings(n: usize) -> Self {
        Self {
            state: StateKind::Ghz,
            n,
            meas: MeasPreset::Xd,
            noise: 0.0,
            order_cap: n.min(4),
            extra: Extra::FullBody,
        }
    }

    /// GHZ with `(σ_x, σ_d, σ_z)`, one- and two-body terms plus the two
    /// full-body terms.
    pub fn ghz_three_settings(n: usize) -> Self {
        Self {
            state: StateKind::Ghz,
            n,
            meas: MeasPreset::Xdz,
            noise: 0.0,
            order_cap: n.min(2),
            extra: Extra::FullBody,
        }
    }

    /// Graph state with `(σ_x, σ_d, σ_z)` and every correlator up to four-body.
    pub fn graph(kind: GraphKind, n: usize) -> Self {
        Self {
            state: StateKind::Graph(kind),
            n,
            meas: MeasPreset::Xdz,
            noise: 0.0,
            order_cap: n.min(4),
            extra: Extra::None,
        }
    }

    pub fn with_noise(mut self, p: f64) -> Self {
        self.noise = p;
        self
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.n, self.meas.n_settings())
    }

    pub fn generate(&self, caps: &Caps) -> Result<CorrelationTable> {
        let state = self.state.prepare(self.n, caps)?;
        let meas = self.meas.assignment(self.n)?;
        full_table(
            &state,
            &meas,
            NoiseLevel::new(self.noise)?,
            self.order_cap,
            &self.extra.keys(self.n),
        )
    }
}

/// Which generating set to use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Level {
    Plain(usize),
    /// Level 2 plus the given monomials, in text form.
    Mixed(Vec<String>),
    /// Level 2 plus the monomials of the two full-body correlators.
    MixedFullBody,
}

impl Level {
    pub fn generating_set(&self, scenario: Scenario, caps: &Caps) -> Result<GeneratingSet> {
        match self {
            Level::Plain(nu) => GeneratingSet::level(scenario, *nu, caps.max_set_size),
            Level::MixedFullBody => {
                let extra = fullbody_monomials(&scenario)?;
                GeneratingSet::mixed(scenario, 2, &extra, caps.max_set_size)
            }
            Level::Mixed(texts) => {
                let extra = texts
                    .iter()
                    .map(|t| Monomial::parse(&scenario, t))
                    .collect::<Result<Vec<_>>>()?;
                GeneratingSet::mixed(scenario, 2, &extra, caps.max_set_size)
            }
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(nu) = s.parse::<usize>() {
            return Ok(Level::Plain(nu));
        }
        match s {
            "mixed" | "mixed:fullbody" => Ok(Level::MixedFullBody),
            _ => {
                let list = s.strip_prefix("mixed:").ok_or_else(|| {
                    Error::parse("level", format!("`{s}` is neither an integer nor mixed:<monomials>"))
                })?;
                Ok(Level::Mixed(
                    list.split(',').map(|m| m.trim().to_string()).filter(|m| !m.is_empty()).collect(),
                ))
            }
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Plain(nu) => write!(f, "{nu}"),
            Level::MixedFullBody => write!(f, "mixed:fullbody"),
            Level::Mixed(list) => write!(f, "mixed:{}", list.join(",")),
        }
    }
}

/// Monomials of the two full-body correlators.
pub fn fullbody_monomials(scenario: &Scenario) -> Result<Vec<Monomial>> {
    if scenario.n_settings() < 2 {
        return Err(Error::InvalidInput("full-body extras need two settings".into()));
    }
    let n = scenario.n_parties();
    let all0 = Monomial::product(scenario, (0..n).map(|p| Generator::new(p, 0)))?;
    let tilted = Monomial::product(
        scenario,
        std::iter::once(Generator::new(0, 1)).chain((1..n).map(|p| Generator::new(p, 0))),
    )?;
    Ok(vec![all0, tilted])
}

/// Result of one detection run.
#[derive(Clone, Debug)]
pub struct Detection {
    pub verdict: Verdict,
    pub structure: MomentStructure,
    pub instance: SdpInstance,
    pub solution: SdpSolution,
    /// Present when the certificate was checked.
    pub certificate: Option<CertificateReport>,
}

impl Detection {
    pub fn size(&self) -> usize {
        self.instance.size()
    }

    pub fn n_free(&self) -> usize {
        self.instance.n_free()
    }
}

/// Builds, solves and (when `validate`) checks the certificate, downgrading
/// the verdict to inconclusive if it does not hold up.
pub fn detect(
    table: &CorrelationTable,
    level: &Level,
    cfg: &SolverConfig,
    caps: &Caps,
    validate: bool,
) -> Result<Detection> {
    let scenario = *table.scenario();
    caps.check_sdp(&scenario)?;
    let gset = level.generating_set(scenario, caps)?;
    let (structure, instance) = build(&gset, table)?;
    let solution = solve(&instance, cfg)?;
    let mut v = verdict(&solution, cfg);
    let certificate = if validate && v != Verdict::Inconclusive {
        let report = validate_certificate(&instance, &solution, cfg);
        if !report.passed {
            v = Verdict::Inconclusive;
        }
        Some(report)
    } else {
        None
    };
    Ok(Detection {
        verdict: v,
        structure,
        instance,
        solution,
        certificate,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Robustness {
    /// Largest noise level verified nonlocal.
    pub p_max: f64,
    /// `p_max` and the smallest level found not nonlocal.
    pub bracket: (f64, f64),
    /// `(p, verdict, λ*)` in evaluation order.
    pub evaluations: Vec<(f64, Verdict, f64)>,
}

/// Bisects the largest white-noise level at which detection still succeeds.
/// Anything but a nonlocal verdict counts as failure.
pub fn robustness(
    spec: &DatasetSpec,
    level: &Level,
    p_tol: f64,
    cfg: &SolverConfig,
    caps: &Caps,
) -> Result<Robustness> {
    if !(p_tol > 0.0 && p_tol < 1.0) {
        return Err(Error::InvalidInput("p tolerance must lie in (0, 1)".into()));
    }
    let clean = spec.clone().with_noise(0.0).generate(caps)?;
    let scenario = *clean.scenario();
    caps.check_sdp(&scenario)?;
    let gset = level.generating_set(scenario, caps)?;
    let mut evaluations = Vec::new();
    let mut run = |p: f64| -> Result<Verdict> {
        let table = clean.damped(1.0 - p)?;
        let (_, inst) = build(&gset, &table)?;
        let sol = solve(&inst, cfg)?;
        let v = verdict(&sol, cfg);
        evaluations.push((p, v, sol.lambda_star));
        Ok(v)
    };
    if run(0.0)? != Verdict::Nonlocal {
        return Err(Error::Refused(
            "the noiseless data are not detected as nonlocal, so there is no threshold to bisect".into(),
        ));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo >= p_tol {
        let mid = 0.5 * (lo + hi);
        if run(mid)? == Verdict::Nonlocal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Robustness {
        p_max: lo,
        bracket: (lo, hi),
        evaluations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub n: usize,
    pub rounds: usize,
    pub seed: u64,
    pub nonlocal: usize,
    pub inconclusive: usize,
    pub fraction: f64,
    /// Wilson score interval at 95%.
    pub interval: (f64, f64),
}

/// Random orthogonal settings on the W state, one detection per round.
/// Round `i` uses seed `seed + i`.
pub fn random_sweep(
    n: usize,
    rounds: usize,
    seed: u64,
    cfg: &SolverConfig,
    caps: &Caps,
) -> Result<Sweep> {
    if rounds == 0 {
        return Err(Error::Refused("a sweep needs at least one round".into()));
    }
    let scenario = Scenario::new(n, 2)?;
    caps.check_sdp(&scenario)?;
    let gset = GeneratingSet::level(scenario, 2, caps.max_set_size)?;
    let state = make_w_capped(n, caps.max_qubits)?;
    let verdicts: Vec<Verdict> = (0..rounds)
        .into_par_iter()
        .map(|i| -> Result<Verdict> {
            let meas = random_orthogonal_settings(n, seed.wrapping_add(i as u64))?;
            let table = full_table(&state, &meas, NoiseLevel::NONE, n.min(4), &[])?;
            let (_, inst) = build(&gset, &table)?;
            let sol = solve(&inst, cfg)?;
            Ok(verdict(&sol, cfg))
        })
        .collect::<Result<_>>()?;
    let nonlocal = verdicts.iter().filter(|v| **v == Verdict::Nonlocal).count();
    let inconclusive = verdicts.iter().filter(|v| **v == Verdict::Inconclusive).count();
    Ok(Sweep {
        n,
        rounds,
        seed,
        nonlocal,
        inconclusive,
        fraction: nonlocal as f64 / rounds as f64,
        interval: wilson_interval(nonlocal, rounds, 1.959963984540054),
    })
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{entry_report, EntryLabel};

    #[test]
    fn parse_presets() {
        assert_eq!("w".parse::<StateKind>().unwrap(), StateKind::W);
        assert_eq!(
            "graph:grid 2x3".parse::<StateKind>().unwrap(),
            StateKind::Graph(GraphKind::Grid(2, 3))
        );
        assert_eq!("graph:loop".parse::<StateKind>().unwrap().to_string(), "graph:loop");
        assert!("graph:cube".parse::<StateKind>().is_err());
        assert_eq!("random:42".parse::<MeasPreset>().unwrap(), MeasPreset::Random(42));
        assert!("yz".parse::<MeasPreset>().is_err());
        assert_eq!("2".parse::<Level>().unwrap(), Level::Plain(2));
        assert_eq!("mixed".parse::<Level>().unwrap(), Level::MixedFullBody);
        assert_eq!(
            "mixed:M0^(0)M0^(1), M1^(0)".parse::<Level>().unwrap(),
            Level::Mixed(vec!["M0^(0)M0^(1)".into(), "M1^(0)".into()])
        );
    }

    #[test]
    fn grid_size_must_match() {
        let caps = Caps::default();
        let kind = StateKind::Graph(GraphKind::Grid(2, 3));
        assert!(kind.prepare(6, &caps).is_ok());
        assert!(kind.prepare(5, &caps).is_err());
    }

    #[test]
    fn ghz_mixed_has_two_fullbody_known_entries() {
        let caps = Caps::default();
        for spec in [DatasetSpec::ghz_two_settings(4), DatasetSpec::ghz_three_settings(4)] {
            let table = spec.generate(&caps).unwrap();
            let gset = Level::MixedFullBody.generating_set(*table.scenario(), &caps).unwrap();
            let (ms, _) = build(&gset, &table).unwrap();
            let k = ms.size();
            for (j, key) in [k - 2, k - 1].into_iter().zip(fullbody_keys(4)) {
                assert_eq!(ms.label(0, j), EntryLabel::Known { value: table.get(&key).unwrap(), key });
            }
            assert!(entry_report(&ms).ignored.is_empty());
        }
    }

    #[test]
    fn ghz_without_fullbody_is_consistent() {
        let caps = Caps::default();
        let mut spec = DatasetSpec::ghz_two_settings(5);
        spec.extra = Extra::None;
        let table = spec.generate(&caps).unwrap();
        let d = detect(&table, &Level::Plain(2), &SolverConfig::default(), &caps, true).unwrap();
        assert_eq!(d.verdict, Verdict::Consistent);
    }

    #[test]
    fn w_detected_and_noise_table_zero() {
        let caps = Caps::default();
        let d = detect(
            &DatasetSpec::w(4).generate(&caps).unwrap(),
            &Level::Plain(2),
            &SolverConfig::default(),
            &caps,
            true,
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::Nonlocal);
        assert!(d.certificate.unwrap().passed);
        let zero = DatasetSpec::ghz_two_settings(4).with_noise(1.0).generate(&caps).unwrap();
        assert!(zero.iter().all(|(_, v)| v == 0.0));
    }

    #[test]
    fn robustness_refuses_undetected_data() {
        let caps = Caps::default();
        let mut spec = DatasetSpec::ghz_two_settings(5);
        spec.extra = Extra::None;
        let err = robustness(&spec, &Level::Plain(2), 1e-3, &SolverConfig::decision(), &caps).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }

    #[test]
    fn sweep_refuses_zero_rounds_and_is_reproducible() {
        let caps = Caps::default();
        let cfg = SolverConfig::decision();
        assert!(random_sweep(3, 0, 1, &cfg, &caps).is_err());
        let a = random_sweep(3, 12, 5, &cfg, &caps).unwrap();
        let b = random_sweep(3, 12, 5, &cfg, &caps).unwrap();
        assert_eq!(a, b);
        assert!(a.interval.0 <= a.fraction && a.fraction <= a.interval.1);
    }

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(502, 1000, 1.959963984540054);
        assert!((lo - 0.4711).abs() < 1e-4 && (hi - 0.5329).abs() < 1e-4, "{lo} {hi}");
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn sdp_caps() {
        let caps = Caps::default();
        assert!(caps.check_sdp(&Scenario::new(10, 2).unwrap()).is_ok());
        assert!(caps.check_sdp(&Scenario::new(11, 2).unwrap()).is_err());
        let err = caps.check_sdp(&Scenario::new(9, 3).unwrap()).unwrap_err();
        assert!(err.to_string().contains("--cap-override"));
        assert!(Caps::lifted().check_sdp(&Scenario::new(12, 3).unwrap()).is_ok());
    }
}
