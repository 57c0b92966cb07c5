//! Commutative algebra of dichotomic expectation-value operators.
//!
//! Every generator `M_x^{(i)}` is Hermitian, squares to the identity, and
//! commutes with every other generator (including those of the same party).
//! A product of generators is therefore fully described by the set of
//! generators appearing an odd number of times, and multiplication is the
//! symmetric difference: the monomials form the group `F_2^{N·m}`.
//!
//! Monomials are bitmasks over the `N·m` generator slots, slot
//! `party·m + setting`, so the natural bit order is the canonical
//! `(party, setting)` order.

use std::collections::HashSet;
use std::fmt;

use crate::corrdata::{CorrelatorKey, Scenario};
use crate::error::{Error, Result};
use crate::qsim::combinations;

/// Largest `N·m` representable by a [`Monomial`].
pub const MAX_GENERATORS: usize = 128;

/// Default cap on the size of a generating set (the moment-matrix dimension).
pub const DEFAULT_MAX_SET_SIZE: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub party: usize,
    pub setting: usize,
}

impl Generator {
    pub fn new(party: usize, setting: usize) -> Self {
        Self { party, setting }
    }

    fn slot(&self, scenario: &Scenario) -> Result<usize> {
        if self.party >= scenario.n_parties() || self.setting >= scenario.n_settings() {
            return Err(Error::InvalidInput(format!(
                "generator M{}^({}) out of range for {scenario}",
                self.setting, self.party
            )));
        }
        Ok(self.party * scenario.n_settings() + self.setting)
    }
}

fn check_capacity(scenario: &Scenario) -> Result<()> {
    if scenario.n_generators() > MAX_GENERATORS {
        return Err(Error::CapExceeded {
            what: format!("{} generators", scenario.n_generators()),
            cap: MAX_GENERATORS,
            flag: "a smaller scenario",
        });
    }
    Ok(())
}

/// Canonical product of distinct generators; the empty product is the
/// identity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(u128);

impl Monomial {
    pub const IDENTITY: Monomial = Monomial(0);

    pub fn from_bits(bits: u128) -> Self {
        Self(bits)
    }

    pub fn bits(&self) -> u128 {
        self.0
    }

    pub fn generator(scenario: &Scenario, g: Generator) -> Result<Self> {
        check_capacity(scenario)?;
        Ok(Self(1u128 << g.slot(scenario)?))
    }

    /// Product of the given generators in any order; repeated factors cancel.
    pub fn product(scenario: &Scenario, gens: impl IntoIterator<Item = Generator>) -> Result<Self> {
        gens.into_iter().try_fold(Self::IDENTITY, |acc, g| {
            Ok(acc.multiply(Self::generator(scenario, g)?))
        })
    }

    pub fn multiply(self, other: Monomial) -> Monomial {
        Monomial(self.0 ^ other.0)
    }

    /// Number of generator factors.
    pub fn degree(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.0 == 0
    }

    /// Factors in canonical `(party, setting)` order.
    pub fn generators(&self, scenario: &Scenario) -> Vec<Generator> {
        let m = scenario.n_settings();
        let mut bits = self.0;
        let mut out = Vec::with_capacity(self.degree());
        while bits != 0 {
            let slot = bits.trailing_zeros() as usize;
            out.push(Generator::new(slot / m, slot % m));
            bits &= bits - 1;
        }
        out
    }

    /// True when no party contributes more than one factor, i.e. the
    /// monomial is a correlator that can be measured.
    pub fn is_observable(&self, scenario: &Scenario) -> bool {
        let gens = self.generators(scenario);
        gens.windows(2).all(|w| w[0].party != w[1].party)
    }

    /// The correlator key of an observable, non-identity monomial.
    pub fn to_key(&self, scenario: &Scenario) -> Option<CorrelatorKey> {
        if self.is_identity() || !self.is_observable(scenario) {
            return None;
        }
        let gens = self.generators(scenario);
        CorrelatorKey::new(
            gens.iter().map(|g| g.party).collect(),
            gens.iter().map(|g| g.setting).collect(),
        )
        .ok()
    }

    pub fn from_key(scenario: &Scenario, key: &CorrelatorKey) -> Result<Self> {
        key.check(scenario)?;
        Self::product(scenario, key.pairs().map(|(p, x)| Generator::new(p, x)))
    }

    /// Text form: `1` for the identity, otherwise factors `M{setting}^({party})`
    /// juxtaposed in canonical order, e.g. `M0^(0)M1^(2)`.
    pub fn render(&self, scenario: &Scenario) -> String {
        if self.is_identity() {
            return "1".into();
        }
        self.generators(scenario)
            .iter()
            .map(|g| format!("M{}^({})", g.setting, g.party))
            .collect()
    }

    /// Parses [`Monomial::render`] output. Factors may be separated by
    /// whitespace or `*`; repeated factors are rejected.
    pub fn parse(scenario: &Scenario, text: &str) -> Result<Self> {
        let bad = |why: &str| Error::parse(format!("monomial {text:?}"), why);
        let compact: String = text.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
        if compact == "1" {
            return Ok(Self::IDENTITY);
        }
        if compact.is_empty() {
            return Err(bad("empty"));
        }
        let mut acc = Self::IDENTITY;
        for factor in compact.split('M').skip(1) {
            let (setting, party) = factor
                .split_once("^(")
                .ok_or_else(|| bad("expected M<setting>^(<party>)"))?;
            let party = party
                .strip_suffix(')')
                .ok_or_else(|| bad("missing closing parenthesis"))?;
            let setting: usize = setting.parse().map_err(|_| bad("bad setting index"))?;
            let party: usize = party.parse().map_err(|_| bad("bad party index"))?;
            let g = Self::generator(scenario, Generator::new(party, setting))?;
            if acc.0 & g.0 != 0 {
                return Err(bad("repeated factor"));
            }
            acc = acc.multiply(g);
        }
        if !compact.starts_with('M') {
            return Err(bad("expected M<setting>^(<party>)"));
        }
        Ok(acc)
    }

    pub fn display<'a>(&'a self, scenario: &'a Scenario) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Monomial, &'a Scenario);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0.render(self.1))
            }
        }
        D(self, scenario)
    }
}

/// Ordered list of distinct monomials indexing the rows of a moment matrix;
/// the identity is always first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratingSet {
    scenario: Scenario,
    monomials: Vec<Monomial>,
}

/// `Σ_{j=0..=ν} C(n, j)`, saturating.
pub fn level_set_size(n_generators: usize, level: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for j in 0..=level.min(n_generators) {
        if j > 0 {
            binom = binom.saturating_mul((n_generators - j + 1) as u128) / j as u128;
        }
        total = total.saturating_add(binom);
    }
    total
}

impl GeneratingSet {
    /// Builds a set from an explicit list. The identity must come first and
    /// entries must be distinct.
    pub fn from_monomials(scenario: Scenario, monomials: Vec<Monomial>) -> Result<Self> {
        check_capacity(&scenario)?;
        if monomials.first() != Some(&Monomial::IDENTITY) {
            return Err(Error::InvalidInput(
                "generating set must start with the identity".into(),
            ));
        }
        let limit = if scenario.n_generators() == MAX_GENERATORS {
            u128::MAX
        } else {
            (1u128 << scenario.n_generators()) - 1
        };
        let mut seen = HashSet::with_capacity(monomials.len());
        for mono in &monomials {
            if mono.bits() > limit {
                return Err(Error::InvalidInput("monomial outside the scenario".into()));
            }
            if !seen.insert(*mono) {
                return Err(Error::InvalidInput(format!(
                    "duplicate monomial {} in generating set",
                    mono.render(&scenario)
                )));
            }
        }
        Ok(Self {
            scenario,
            monomials,
        })
    }

    /// All monomials with at most `level` factors: identity, then degree 1,
    /// degree 2, … each in lexicographic slot order.
    pub fn level(scenario: Scenario, level: usize, max_size: usize) -> Result<Self> {
        check_capacity(&scenario)?;
        if level == 0 {
            return Err(Error::InvalidInput("hierarchy level must be at least 1".into()));
        }
        let nm = scenario.n_generators();
        let count = level_set_size(nm, level);
        if count > max_size as u128 {
            return Err(Error::CapExceeded {
                what: format!("level-{level} generating set of size {count}"),
                cap: max_size,
                flag: "--cap-override",
            });
        }
        let mut monomials = Vec::with_capacity(count as usize);
        for j in 0..=level.min(nm) {
            for subset in combinations(nm, j) {
                monomials.push(Monomial(subset.iter().fold(0u128, |acc, &s| acc | (1u128 << s))));
            }
        }
        Self::from_monomials(scenario, monomials)
    }

    /// Level set extended by `extra` monomials appended in the given order.
    pub fn mixed(
        scenario: Scenario,
        base_level: usize,
        extra: &[Monomial],
        max_size: usize,
    ) -> Result<Self> {
        let base = Self::level(scenario, base_level, max_size)?;
        if base.len() + extra.len() > max_size {
            return Err(Error::CapExceeded {
                what: format!("mixed generating set of size {}", base.len() + extra.len()),
                cap: max_size,
                flag: "--cap-override",
            });
        }
        let mut monomials = base.monomials;
        monomials.extend_from_slice(extra);
        Self::from_monomials(scenario, monomials)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn get(&self, i: usize) -> Monomial {
        self.monomials[i]
    }
}

/// Level `N·m·(d-1)` at which the hierarchy is guaranteed to have converged.
pub fn convergence_level(scenario: &Scenario) -> usize {
    scenario.n_parties() * scenario.n_settings() * (scenario.n_outcomes() - 1)
}
