//! Exact local-polytope tools: deterministic strategies, LP membership and
//! exhaustive local bounds.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bell::BellFunctional;
use crate::corrdata::{CorrelationTable, CorrelatorKey, Scenario};
use crate::error::{Error, Result};

pub const DEFAULT_LP_CAP: usize = 12;
pub const DEFAULT_ENUM_CAP: usize = 24;
pub const LP_TOL: f64 = 1e-9;

/// A ±1 outcome for every party and setting. Bit `party·m + setting` set
/// means outcome −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    scenario: Scenario,
    bits: u128,
}

impl DeterministicStrategy {
    pub fn from_bits(scenario: Scenario, bits: u128) -> Result<Self> {
        let n = scenario.n_generators();
        if n < 128 && bits >> n != 0 {
            return Err(Error::InvalidInput(format!(
                "strategy bits exceed the {n} generators of {scenario}"
            )));
        }
        Ok(Self { scenario, bits })
    }

    pub fn from_values(scenario: Scenario, values: &[Vec<i8>]) -> Result<Self> {
        if values.len() != scenario.n_parties()
            || values.iter().any(|v| v.len() != scenario.n_settings())
        {
            return Err(Error::InvalidInput("strategy does not cover every party and setting".into()));
        }
        let m = scenario.n_settings();
        let mut bits = 0u128;
        for (p, row) in values.iter().enumerate() {
            for (s, &v) in row.iter().enumerate() {
                match v {
                    1 => {}
                    -1 => bits |= 1 << (p * m + s),
                    _ => return Err(Error::InvalidInput(format!("outcome {v} is not ±1"))),
                }
            }
        }
        Ok(Self { scenario, bits })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn value(&self, party: usize, setting: usize) -> i8 {
        let slot = party * self.scenario.n_settings() + setting;
        if self.bits >> slot & 1 == 1 {
            -1
        } else {
            1
        }
    }

    /// Product of the single-party values along the key.
    pub fn correlator(&self, key: &CorrelatorKey) -> i8 {
        key.pairs().map(|(p, s)| self.value(p, s)).product()
    }
}

pub fn strategy_correlators(
    s: &DeterministicStrategy,
    keys: &[CorrelatorKey],
) -> Result<CorrelationTable> {
    let mut t = CorrelationTable::new(s.scenario);
    for key in keys {
        t.insert(key.clone(), s.correlator(key) as f64)?;
    }
    Ok(t)
}

fn check_cap(scenario: &Scenario, bits: usize, cap: usize, what: &str) -> Result<()> {
    if bits > cap || bits >= 64 {
        return Err(Error::CapExceeded {
            what: format!("{what} over {bits} generators ({scenario})"),
            cap,
            flag: "--cap-override",
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    /// Weights over strategies (indexed by strategy bits) reproducing the table.
    Local { weights: BTreeMap<u64, f64> },
    /// The phase-one optimum: total infeasibility that could not be removed.
    Nonlocal { infeasibility: f64 },
}

impl Membership {
    pub fn is_local(&self) -> bool {
        matches!(self, Membership::Local { .. })
    }
}

/// Decides whether some mixture of deterministic strategies reproduces every
/// entry of `table`.
pub fn lp_membership(table: &CorrelationTable, cap: usize) -> Result<Membership> {
    let scenario = *table.scenario();
    let n_gen = scenario.n_generators();
    check_cap(&scenario, n_gen, cap, "LP membership")?;
    let n_strat = 1usize << n_gen;
    let keys: Vec<(&CorrelatorKey, f64)> = table.iter().collect();
    let m = scenario.n_settings();
    let masks: Vec<u64> = keys
        .iter()
        .map(|(k, _)| k.pairs().fold(0u64, |acc, (p, s)| acc | 1 << (p * m + s)))
        .collect();

    // rows: normalization, then one per key
    let rows = 1 + keys.len();
    let mut a = vec![vec![0.0; n_strat]; rows];
    let mut b = vec![0.0; rows];
    a[0].iter_mut().for_each(|v| *v = 1.0);
    b[0] = 1.0;
    for (i, ((_, value), mask)) in keys.iter().zip(&masks).enumerate() {
        for (lam, entry) in a[i + 1].iter_mut().enumerate() {
            let parity = (lam as u64 & mask).count_ones() & 1;
            *entry = if parity == 1 { -1.0 } else { 1.0 };
        }
        b[i + 1] = *value;
    }
    let (infeasibility, x) = phase_one(a, b);
    if infeasibility <= LP_TOL {
        let weights = x
            .into_iter()
            .enumerate()
            .filter(|(_, w)| *w > 0.0)
            .map(|(i, w)| (i as u64, w))
            .collect();
        Ok(Membership::Local { weights })
    } else {
        Ok(Membership::Nonlocal { infeasibility })
    }
}

/// Minimizes the total artificial slack for `A x = b`, `x ≥ 0` with a dense
/// tableau and Bland's rule. Returns the optimum and the structural part of
/// the final basic solution.
fn phase_one(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> (f64, Vec<f64>) {
    let rows = a.len();
    let n = a[0].len();
    for i in 0..rows {
        if b[i] < 0.0 {
            b[i] = -b[i];
            a[i].iter_mut().for_each(|v| *v = -*v);
        }
    }
    let cols = n + rows;
    let mut t: Vec<Vec<f64>> = a
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.resize(cols, 0.0);
            row[n + i] = 1.0;
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..cols).collect();
    // reduced costs of the phase-one objective Σ artificials
    let mut cost = vec![0.0; cols];
    for row in &t {
        for j in 0..n {
            cost[j] -= row[j];
        }
    }
    const PIVOT_TOL: f64 = 1e-11;
    const COST_TOL: f64 = 1e-11;
    // Dantzig pricing, with Bland's rule during long degenerate runs
    const STALL: usize = 50;
    let mut degenerate = 0usize;
    loop {
        let enter = if degenerate < STALL {
            let (j, c) = cost
                .iter()
                .enumerate()
                .fold((0, 0.0), |best, (j, &c)| if c < best.1 { (j, c) } else { best });
            if c < -COST_TOL { Some(j) } else { None }
        } else {
            (0..cols).find(|&j| cost[j] < -COST_TOL)
        };
        let Some(enter) = enter else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let piv = t[i][enter];
            if piv > PIVOT_TOL {
                let ratio = b[i] / piv;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-13 || (ratio <= lr + 1e-13 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // phase one is bounded below, so a missing leaving row only happens
        // through round-off
        let Some((r, step)) = leave else { break };
        if step <= 1e-13 {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
        let piv = t[r][enter];
        t[r].iter_mut().for_each(|v| *v /= piv);
        b[r] /= piv;
        let pivot_row = t[r].clone();
        let br = b[r];
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = t[i][enter];
            if f != 0.0 {
                for (v, &p) in t[i].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                b[i] -= f * br;
                if b[i] < 0.0 && b[i] > -1e-13 {
                    b[i] = 0.0;
                }
            }
        }
        let f = cost[enter];
        for (v, &p) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        basis[r] = enter;
    }
    let mut x = vec![0.0; n];
    let mut infeasibility = 0.0;
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = b[i].max(0.0);
        } else {
            infeasibility += b[i].max(0.0);
        }
    }
    (infeasibility, x)
}

/// Maximum of a functional over deterministic strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBound {
    pub value: f64,
    /// Set when every coefficient and the offset are integers; the value is
    /// then exact.
    pub exact: Option<i64>,
    pub maximizer: DeterministicStrategy,
    /// Number of generators enumerated.
    pub bits: usize,
}

/// Exact maximum of `f` over all deterministic strategies.
///
/// Only generators that occur in some term are enumerated; the others do not
/// change the value.
pub fn local_bound(f: &BellFunctional, cap: usize) -> Result<LocalBound> {
    maximize(f.scenario(), f.terms(), f.offset(), cap)
}

/// Exact minimum of `f` over all deterministic strategies.
pub fn local_minimum(f: &BellFunctional, cap: usize) -> Result<LocalBound> {
    let negated: BTreeMap<CorrelatorKey, f64> =
        f.terms().iter().map(|(k, &c)| (k.clone(), -c)).collect();
    let mut out = maximize(f.scenario(), &negated, -f.offset(), cap)?;
    out.value = -out.value;
    out.exact = out.exact.map(|v| -v);
    Ok(out)
}

trait Scalar: Copy + PartialOrd + Send + Sync + std::ops::Add<Output = Self> + std::ops::Neg<Output = Self> {
    const ZERO: Self;
    fn abs(self) -> Self;
}

impl Scalar for i64 {
    const ZERO: Self = 0;
    fn abs(self) -> Self {
        i64::abs(self)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

struct Problem<T> {
    /// per party (in enumeration order): local bit indices
    party_bits: Vec<Vec<usize>>,
    /// terms completed when the given party is assigned: (mask, coeff)
    completed_at: Vec<Vec<(u64, T)>>,
    /// Σ|coeff| of terms completed at each depth or later
    remaining: Vec<T>,
}

impl<T: Scalar> Problem<T> {
    fn value_of(mask: u64, assignment: u64, coeff: T) -> T {
        if (mask & assignment).count_ones() & 1 == 1 {
            -coeff
        } else {
            coeff
        }
    }

    /// Best completion of `assignment` from party `depth` on, or `None` when
    /// nothing beats `floor`.
    fn search(&self, depth: usize, assignment: u64, acc: T, floor: Option<T>) -> Option<(T, u64)> {
        if depth == self.party_bits.len() {
            return match floor {
                Some(f) if acc <= f => None,
                _ => Some((acc, assignment)),
            };
        }
        if let Some(f) = floor {
            if acc + self.remaining[depth] <= f {
                return None;
            }
        }
        let bits = &self.party_bits[depth];
        let mut best: Option<(T, u64)> = None;
        let mut floor = floor;
        for choice in 0u64..(1 << bits.len()) {
            let mut a = assignment;
            for (i, &bit) in bits.iter().enumerate() {
                if choice >> i & 1 == 1 {
                    a |= 1 << bit;
                }
            }
            let mut v = acc;
            for &(mask, c) in &self.completed_at[depth] {
                v = v + Self::value_of(mask, a, c);
            }
            if let Some(found) = self.search(depth + 1, a, v, floor) {
                floor = Some(found.0);
                best = Some(found);
            }
        }
        best
    }
}

fn maximize(
    scenario: &Scenario,
    terms: &BTreeMap<CorrelatorKey, f64>,
    offset: f64,
    cap: usize,
) -> Result<LocalBound> {
    let m = scenario.n_settings();
    // relevant generators, party-major
    let mut relevant: Vec<(usize, usize)> = terms.keys().flat_map(|k| k.pairs()).collect();
    relevant.sort_unstable();
    relevant.dedup();
    check_cap(scenario, relevant.len(), cap, "local bound enumeration")?;
    let index: BTreeMap<(usize, usize), usize> =
        relevant.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut parties: Vec<usize> = relevant.iter().map(|&(p, _)| p).collect();
    parties.dedup();
    let depth_of: BTreeMap<usize, usize> = parties.iter().enumerate().map(|(d, &p)| (p, d)).collect();
    let party_bits: Vec<Vec<usize>> = parties
        .iter()
        .map(|&p| {
            relevant
                .iter()
                .enumerate()
                .filter(|(_, g)| g.0 == p)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let term_masks: Vec<(u64, usize, f64)> = terms
        .iter()
        .map(|(k, &c)| {
            let mask = k.pairs().fold(0u64, |acc, g| acc | 1 << index[&g]);
            let last = depth_of[k.parties().last().expect("keys are non-empty")];
            (mask, last, c)
        })
        .collect();

    let integral = terms.values().chain(std::iter::once(&offset)).all(|c| {
        c.fract() == 0.0 && c.abs() < (1u64 << 40) as f64
    });
    let lift = |local: u64| -> u128 {
        let mut bits = 0u128;
        for (i, &(p, s)) in relevant.iter().enumerate() {
            if local >> i & 1 == 1 {
                bits |= 1 << (p * m + s);
            }
        }
        bits
    };

    let (value, exact, local) = if integral {
        let (v, a) = run::<i64>(&party_bits, &term_masks, |c| c as i64);
        let v = v + offset as i64;
        (v as f64, Some(v), a)
    } else {
        let (v, a) = run::<f64>(&party_bits, &term_masks, |c| c);
        (v + offset, None, a)
    };
    Ok(LocalBound {
        value,
        exact,
        maximizer: DeterministicStrategy::from_bits(*scenario, lift(local))?,
        bits: relevant.len(),
    })
}

fn run<T: Scalar>(
    party_bits: &[Vec<usize>],
    term_masks: &[(u64, usize, f64)],
    convert: impl Fn(f64) -> T,
) -> (T, u64) {
    let depth = party_bits.len();
    if depth == 0 {
        return (T::ZERO, 0);
    }
    let mut completed_at: Vec<Vec<(u64, T)>> = vec![Vec::new(); depth];
    for &(mask, last, c) in term_masks {
        completed_at[last].push((mask, convert(c)));
    }
    let mut remaining = vec![T::ZERO; depth + 1];
    for d in (0..depth).rev() {
        let here = completed_at[d].iter().fold(T::ZERO, |acc, &(_, c)| acc + c.abs());
        remaining[d] = remaining[d + 1] + here;
    }
    let problem = Problem {
        party_bits: party_bits.to_vec(),
        completed_at,
        remaining,
    };
    let first = &problem.party_bits[0];
    let prefixes: Vec<u64> = (0u64..(1 << first.len())).collect();
    let results: Vec<Option<(T, u64)>> = prefixes
        .par_iter()
        .map(|&choice| {
            let mut a = 0u64;
            for (i, &bit) in first.iter().enumerate() {
                if choice >> i & 1 == 1 {
                    a |= 1 << bit;
                }
            }
            let mut v = T::ZERO;
            for &(mask, c) in &problem.completed_at[0] {
                v = v + Problem::<T>::value_of(mask, a, c);
            }
            problem.search(1, a, v, None)
        })
        .collect();
    let mut best: Option<(T, u64)> = None;
    for r in results.into_iter().flatten() {
        match best {
            Some((b, _)) if r.0 <= b => {}
            _ => best = Some(r),
        }
    }
    best.expect("at least one strategy")
}
