//! Symbolic moment matrices and their compilation to SDP data.
//!
//! Entry `(i, j)` of the moment matrix is the expectation of `O_i·O_j`
//! (all monomials are Hermitian). Entries whose monomial is a measured
//! correlator take the observed value; the identity gives 1; everything else
//! is a real free variable shared by every position carrying the same
//! monomial.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::algebra::{GeneratingSet, Monomial};
use crate::corrdata::{CorrelationTable, CorrelatorKey, Scenario};
use crate::error::{Error, Result};

/// Label of one moment-matrix position.
#[derive(Clone, Debug, PartialEq)]
pub enum EntryLabel {
    Identity,
    Known { key: CorrelatorKey, value: f64 },
    Free { var: usize, monomial: Monomial },
}

#[derive(Clone, Debug)]
enum Kind {
    Identity,
    Known { key: CorrelatorKey, value: f64 },
    Free(usize),
}

#[derive(Clone, Debug)]
struct Label {
    monomial: Monomial,
    kind: Kind,
}

/// Label grid of a moment matrix over a generating set.
#[derive(Clone, Debug)]
pub struct MomentStructure {
    gset: GeneratingSet,
    grid: Vec<u32>,
    labels: Vec<Label>,
    free_vars: Vec<Monomial>,
    ignored_keys: Vec<CorrelatorKey>,
}

impl MomentStructure {
    pub fn size(&self) -> usize {
        self.gset.len()
    }

    pub fn scenario(&self) -> &Scenario {
        self.gset.scenario()
    }

    pub fn generating_set(&self) -> &GeneratingSet {
        &self.gset
    }

    fn label_at(&self, i: usize, j: usize) -> &Label {
        &self.labels[self.grid[i * self.size() + j] as usize]
    }

    pub fn monomial(&self, i: usize, j: usize) -> Monomial {
        self.label_at(i, j).monomial
    }

    pub fn label(&self, i: usize, j: usize) -> EntryLabel {
        let label = self.label_at(i, j);
        match &label.kind {
            Kind::Identity => EntryLabel::Identity,
            Kind::Known { key, value } => EntryLabel::Known {
                key: key.clone(),
                value: *value,
            },
            Kind::Free(var) => EntryLabel::Free {
                var: *var,
                monomial: label.monomial,
            },
        }
    }

    /// Free variables in first-appearance order; the index is the variable id.
    pub fn free_vars(&self) -> &[Monomial] {
        &self.free_vars
    }

    /// Table keys that do not occur anywhere in the matrix.
    pub fn ignored_keys(&self) -> &[CorrelatorKey] {
        &self.ignored_keys
    }

    /// Keys assigned somewhere in the matrix.
    pub fn known_keys(&self) -> impl Iterator<Item = &CorrelatorKey> + '_ {
        self.labels.iter().filter_map(|l| match &l.kind {
            Kind::Known { key, .. } => Some(key),
            _ => None,
        })
    }

    /// Correlators that appear in the matrix but were not supplied, in key
    /// order.
    pub fn required_keys(&self) -> Vec<CorrelatorKey> {
        let scenario = self.scenario();
        let keys: BTreeSet<CorrelatorKey> = self
            .free_vars
            .iter()
            .filter_map(|m| m.to_key(scenario))
            .collect();
        keys.into_iter().collect()
    }

    /// One line per row, entries in monomial text form separated by tabs.
    pub fn render_symbolic(&self) -> String {
        let k = self.size();
        let scenario = self.scenario();
        let mut out = String::new();
        for i in 0..k {
            let row: Vec<String> = (0..k).map(|j| self.monomial(i, j).render(scenario)).collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Affine matrix data `Γ(y) = A_0 + Σ_j y_j B_j`.
///
/// `A_0` holds the identity and known entries. Each `B_j` is the symmetric
/// 0/1 indicator of the positions of free variable `j`, stored as its
/// upper-triangle positions `(r, c)` with `r < c`.
#[derive(Clone, Debug)]
pub struct SdpInstance {
    size: usize,
    a0: Vec<f64>,
    free_positions: Vec<Vec<(u32, u32)>>,
    known_positions: BTreeMap<CorrelatorKey, Vec<(u32, u32)>>,
    identity_positions: Vec<(u32, u32)>,
}

impl SdpInstance {
    /// Builds an instance directly from a constant matrix and free-variable
    /// supports. Positions must be strictly upper triangular, pairwise
    /// disjoint, and zero in `a0`.
    pub fn from_parts(
        size: usize,
        a0: Vec<f64>,
        free_positions: Vec<Vec<(u32, u32)>>,
    ) -> Result<Self> {
        if a0.len() != size * size {
            return Err(Error::InvalidInput("constant matrix has the wrong size".into()));
        }
        let identity_positions = (0..size as u32).map(|i| (i, i)).collect();
        let inst = Self {
            size,
            a0,
            free_positions,
            known_positions: BTreeMap::new(),
            identity_positions,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_free(&self) -> usize {
        self.free_positions.len()
    }

    /// Row-major `k × k` constant matrix.
    pub fn a0(&self) -> &[f64] {
        &self.a0
    }

    pub fn free_positions(&self) -> &[Vec<(u32, u32)>] {
        &self.free_positions
    }

    pub fn known_positions(&self) -> &BTreeMap<CorrelatorKey, Vec<(u32, u32)>> {
        &self.known_positions
    }

    pub fn identity_positions(&self) -> &[(u32, u32)] {
        &self.identity_positions
    }

    /// Dense `Γ(y)`, row-major.
    pub fn matrix(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_free());
        let k = self.size;
        let mut g = self.a0.clone();
        for (positions, &v) in self.free_positions.iter().zip(y) {
            for &(r, c) in positions {
                g[r as usize * k + c as usize] = v;
                g[c as usize * k + r as usize] = v;
            }
        }
        g
    }

    /// Checks symmetry of `A_0`, that free supports are disjoint,
    /// off-diagonal and zero in `A_0`.
    pub fn validate(&self) -> Result<()> {
        let k = self.size;
        for r in 0..k {
            for c in r + 1..k {
                if self.a0[r * k + c] != self.a0[c * k + r] {
                    return Err(Error::InvalidInput(format!(
                        "constant matrix is not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        let mut seen = vec![false; k * k];
        for (j, positions) in self.free_positions.iter().enumerate() {
            if positions.is_empty() {
                return Err(Error::InvalidInput(format!("free variable {j} has no position")));
            }
            for &(r, c) in positions {
                let (r, c) = (r as usize, c as usize);
                if r >= c || c >= k {
                    return Err(Error::InvalidInput(format!(
                        "free variable {j} has invalid position ({r}, {c})"
                    )));
                }
                if seen[r * k + c] {
                    return Err(Error::InvalidInput(format!(
                        "position ({r}, {c}) belongs to two free variables"
                    )));
                }
                seen[r * k + c] = true;
                if self.a0[r * k + c] != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "free position ({r}, {c}) is nonzero in the constant matrix"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compiles the moment matrix of `gset` with the values of `table`.
///
/// Table entries that never occur in the matrix are recorded in
/// [`MomentStructure::ignored_keys`] rather than rejected.
pub fn build(
    gset: &GeneratingSet,
    table: &CorrelationTable,
) -> Result<(MomentStructure, SdpInstance)> {
    let scenario = *gset.scenario();
    if *table.scenario() != scenario {
        return Err(Error::InvalidInput(format!(
            "table scenario ({}) differs from the generating set ({scenario})",
            table.scenario()
        )));
    }
    let k = gset.len();
    let mut ids: HashMap<Monomial, u32> = HashMap::new();
    let mut labels: Vec<Label> = Vec::new();
    let mut free_vars = Vec::new();
    let mut grid = vec![0u32; k * k];
    let mut a0 = vec![0.0; k * k];
    let mut free_positions: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut known_positions: BTreeMap<CorrelatorKey, Vec<(u32, u32)>> = BTreeMap::new();
    let mut identity_positions = Vec::new();

    for r in 0..k {
        for c in r..k {
            let mono = gset.get(r).multiply(gset.get(c));
            let id = *ids.entry(mono).or_insert_with(|| {
                let kind = if mono.is_identity() {
                    Kind::Identity
                } else {
                    match mono.to_key(&scenario).and_then(|key| {
                        table.get(&key).map(|value| (key, value))
                    }) {
                        Some((key, value)) => Kind::Known { key, value },
                        None => {
                            free_vars.push(mono);
                            free_positions.push(Vec::new());
                            Kind::Free(free_vars.len() - 1)
                        }
                    }
                };
                labels.push(Label {
                    monomial: mono,
                    kind,
                });
                (labels.len() - 1) as u32
            });
            grid[r * k + c] = id;
            grid[c * k + r] = id;
            let pos = (r as u32, c as u32);
            match &labels[id as usize].kind {
                Kind::Identity => {
                    a0[r * k + c] = 1.0;
                    a0[c * k + r] = 1.0;
                    identity_positions.push(pos);
                }
                Kind::Known { key, value } => {
                    a0[r * k + c] = *value;
                    a0[c * k + r] = *value;
                    known_positions.entry(key.clone()).or_default().push(pos);
                }
                Kind::Free(var) => {
                    if r == c {
                        return Err(Error::Numerical("free variable on the diagonal".into()));
                    }
                    free_positions[*var].push(pos);
                }
            }
        }
    }

    let ignored_keys = table
        .keys()
        .filter(|key| !known_positions.contains_key(*key))
        .cloned()
        .collect();

    let structure = MomentStructure {
        gset: gset.clone(),
        grid,
        labels,
        free_vars,
        ignored_keys,
    };
    let instance = SdpInstance {
        size: k,
        a0,
        free_positions,
        known_positions,
        identity_positions,
    };
    Ok((structure, instance))
}

/// Summary of a compiled moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryReport {
    pub size: usize,
    /// Position counts over the full `k × k` grid.
    pub identity_entries: usize,
    pub known_entries: usize,
    pub free_entries: usize,
    pub distinct_known: usize,
    /// `(var id, monomial text)`.
    pub free_vars: Vec<(usize, String)>,
    /// Observable correlators left free because the table lacks them.
    pub required: Vec<CorrelatorKey>,
    pub ignored: Vec<CorrelatorKey>,
}

pub fn entry_report(ms: &MomentStructure) -> EntryReport {
    let k = ms.size();
    let (mut identity, mut known, mut free) = (0, 0, 0);
    for r in 0..k {
        for c in 0..k {
            match ms.label_at(r, c).kind {
                Kind::Identity => identity += 1,
                Kind::Known { .. } => known += 1,
                Kind::Free(_) => free += 1,
            }
        }
    }
    let scenario = ms.scenario();
    EntryReport {
        size: k,
        identity_entries: identity,
        known_entries: known,
        free_entries: free,
        distinct_known: ms.known_keys().count(),
        free_vars: ms
            .free_vars()
            .iter()
            .enumerate()
            .map(|(i, m)| (i, m.render(scenario)))
            .collect(),
        required: ms.required_keys(),
        ignored: ms.ignored_keys().to_vec(),
    }
}

impl fmt::Display for EntryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "matrix size        {}", self.size)?;
        writeln!(f, "identity entries   {}", self.identity_entries)?;
        writeln!(
            f,
            "known entries      {} ({} correlators)",
            self.known_entries, self.distinct_known
        )?;
        writeln!(
            f,
            "free entries       {} ({} variables)",
            self.free_entries,
            self.free_vars.len()
        )?;
        writeln!(f, "required but missing correlators: {}", self.required.len())?;
        for key in &self.required {
            writeln!(f, "  {key}")?;
        }
        if !self.ignored.is_empty() {
            writeln!(f, "ignored table entries: {}", self.ignored.len())?;
            for key in &self.ignored {
                writeln!(f, "  {key}")?;
            }
        }
        writeln!(f, "free variables:")?;
        for (id, name) in &self.free_vars {
            writeln!(f, "  v{id} = {name}")?;
        }
        Ok(())
    }
}
