//! Dense statevector simulator for the correlation data of W, GHZ and graph
//! states measured along Bloch directions.
//!
//! Qubit `q` is bit `q` of the basis-state index. Observables are
//! `n⃗·σ⃗` with unit `n⃗`, so every measured product is traceless and white
//! noise of weight `p` damps each correlator by exactly `1 - p`.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corrdata::{CorrelationTable, CorrelatorKey, Scenario};
use crate::error::{Error, Result};

/// Default cap on the number of simulated qubits.
pub const DEFAULT_MAX_QUBITS: usize = 14;

const NORM_TOL: f64 = 1e-12;

pub const SIGMA_X: [f64; 3] = [1.0, 0.0, 0.0];
pub const SIGMA_Y: [f64; 3] = [0.0, 1.0, 0.0];
pub const SIGMA_Z: [f64; 3] = [0.0, 0.0, 1.0];
/// `(σ_x + σ_z)/√2`.
pub const SIGMA_D: [f64; 3] = [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2];
/// `(σ_x - σ_z)/√2`.
pub const SIGMA_D_MINUS: [f64; 3] = [FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2];

/// Normalized pure state of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n_qubits > 30 || amps.len() != 1usize << n_qubits {
            return Err(Error::InvalidInput(format!(
                "{} amplitudes do not describe {n_qubits} qubits",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "state has squared norm {norm}, expected 1"
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `⟨ψ| ⊗_j (n⃗_j·σ⃗)_{q_j} |ψ⟩` for distinct qubits `q_j`.
    pub fn expectation(&self, ops: &[(usize, [f64; 3])]) -> f64 {
        let mut phi = self.amps.clone();
        for &(q, dir) in ops {
            apply_bloch(&mut phi, q, dir);
        }
        self.amps
            .iter()
            .zip(&phi)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }
}

/// Applies `n⃗·σ⃗ = [[n_z, n_x - i n_y], [n_x + i n_y, -n_z]]` to qubit `q`.
fn apply_bloch(amps: &mut [Complex64], q: usize, dir: [f64; 3]) {
    let [nx, ny, nz] = dir;
    let off_lo = Complex64::new(nx, -ny);
    let off_hi = Complex64::new(nx, ny);
    let bit = 1usize << q;
    for i0 in 0..amps.len() {
        if i0 & bit != 0 {
            continue;
        }
        let i1 = i0 | bit;
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = a0 * nz + off_lo * a1;
        amps[i1] = off_hi * a0 - a1 * nz;
    }
}

fn check_size(n: usize, min: usize, max: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidInput(format!("need at least {min} qubits, got {n}")));
    }
    if n > max {
        return Err(Error::CapExceeded {
            what: format!("{n} qubits"),
            cap: max,
            flag: "--cap-override",
        });
    }
    Ok(())
}

/// `(|0…01⟩ + |0…10⟩ + … + |10…0⟩)/√N`.
pub fn make_w(n: usize) -> Result<StateVector> {
    make_w_capped(n, DEFAULT_MAX_QUBITS)
}

pub fn make_w_capped(n: usize, max_qubits: usize) -> Result<StateVector> {
    check_size(n, 2, max_qubits)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    let a = 1.0 / (n as f64).sqrt();
    for q in 0..n {
        amps[1 << q] = Complex64::new(a, 0.0);
    }
    StateVector::new(n, amps)
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn make_ghz(n: usize) -> Result<StateVector> {
    make_ghz_capped(n, DEFAULT_MAX_QUBITS)
}

pub fn make_ghz_capped(n: usize, max_qubits: usize) -> Result<StateVector> {
    check_size(n, 2, max_qubits)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[(1 << n) - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    StateVector::new(n, amps)
}

/// Simple undirected graph on `n_vertices` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    n_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop on vertex {a}")));
            }
            if a >= n_vertices || b >= n_vertices {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for {n_vertices} vertices"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n_vertices,
            edges: set,
        })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Closed ring; needs at least three vertices.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput("a loop graph needs at least 3 vertices".into()));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Rectangular `rows × cols` lattice, vertices numbered row-major.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(rows * cols, edges)
    }

    /// Star with center vertex 0.
    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == v, b == v) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }
}

/// `∏_{(i,j)∈E} CZ_ij |+⟩^{⊗N}`.
pub fn make_graph_state(g: &GraphSpec) -> Result<StateVector> {
    make_graph_state_capped(g, DEFAULT_MAX_QUBITS)
}

pub fn make_graph_state_capped(g: &GraphSpec, max_qubits: usize) -> Result<StateVector> {
    let edges: Vec<_> = g.edges().collect();
    graph_state_with_order(g.n_vertices(), &edges, max_qubits)
}

pub(crate) fn graph_state_with_order(
    n: usize,
    edges: &[(usize, usize)],
    max_qubits: usize,
) -> Result<StateVector> {
    check_size(n, 1, max_qubits)?;
    let a = (0.5f64).powf(n as f64 / 2.0);
    let mut amps = vec![Complex64::new(a, 0.0); 1 << n];
    for &(i, j) in edges {
        let mask = (1usize << i) | (1usize << j);
        for (idx, amp) in amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *amp = -*amp;
            }
        }
    }
    StateVector::new(n, amps)
}

/// Bloch direction of every party's observable for every setting.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementAssignment {
    directions: Vec<Vec<[f64; 3]>>,
}

impl MeasurementAssignment {
    pub fn new(directions: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        let m = directions.first().map_or(0, Vec::len);
        if directions.is_empty() || m == 0 {
            return Err(Error::InvalidInput("empty measurement assignment".into()));
        }
        for (party, dirs) in directions.iter().enumerate() {
            if dirs.len() != m {
                return Err(Error::InvalidInput(format!(
                    "party {party} has {} settings, expected {m}",
                    dirs.len()
                )));
            }
            for (x, d) in dirs.iter().enumerate() {
                let norm = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::InvalidInput(format!(
                        "direction of party {party} setting {x} has norm {norm}"
                    )));
                }
            }
        }
        Ok(Self { directions })
    }

    /// Every party uses the same list of directions.
    pub fn uniform(n_parties: usize, dirs: &[[f64; 3]]) -> Result<Self> {
        Self::new(vec![dirs.to_vec(); n_parties])
    }

    pub fn n_parties(&self) -> usize {
        self.directions.len()
    }

    pub fn n_settings(&self) -> usize {
        self.directions[0].len()
    }

    pub fn direction(&self, party: usize, setting: usize) -> [f64; 3] {
        self.directions[party][setting]
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(self.n_parties(), self.n_settings()).expect("validated on construction")
    }
}

/// White-noise weight `p ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct NoiseLevel(f64);

impl NoiseLevel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("noise level {p} outside [0, 1]")));
        }
        Ok(Self(p))
    }

    pub const NONE: NoiseLevel = NoiseLevel(0.0);

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Factor `1 - p` applied to every correlator.
    pub fn damping(&self) -> f64 {
        1.0 - self.0
    }
}

fn check_key(state: &StateVector, key: &CorrelatorKey, meas: &MeasurementAssignment) -> Result<()> {
    if meas.n_parties() != state.n_qubits() {
        return Err(Error::InvalidInput(format!(
            "measurements for {} parties on a {}-qubit state",
            meas.n_parties(),
            state.n_qubits()
        )));
    }
    key.check(&meas.scenario())
}

/// `(1 - p)·⟨⊗_j n⃗^{(i_j)}_{x_j}·σ⃗⟩_ψ`.
pub fn correlator(
    state: &StateVector,
    key: &CorrelatorKey,
    meas: &MeasurementAssignment,
    noise: NoiseLevel,
) -> Result<f64> {
    check_key(state, key, meas)?;
    Ok(raw_correlator(state, key, meas, noise))
}

fn raw_correlator(
    state: &StateVector,
    key: &CorrelatorKey,
    meas: &MeasurementAssignment,
    noise: NoiseLevel,
) -> f64 {
    let ops: Vec<(usize, [f64; 3])> = key
        .pairs()
        .map(|(party, x)| (party, meas.direction(party, x)))
        .collect();
    (noise.damping() * state.expectation(&ops)).clamp(-1.0, 1.0)
}

/// All keys of order `1..=order_cap` in canonical order.
pub fn keys_up_to_order(scenario: &Scenario, order_cap: usize) -> Vec<CorrelatorKey> {
    let n = scenario.n_parties();
    let m = scenario.n_settings();
    let mut keys = Vec::new();
    for k in 1..=order_cap.min(n) {
        for parties in combinations(n, k) {
            let total = m.pow(k as u32);
            for code in 0..total {
                // settings in odometer order, last party fastest
                let mut settings = vec![0usize; k];
                let mut rest = code;
                for slot in settings.iter_mut().rev() {
                    *slot = rest % m;
                    rest /= m;
                }
                keys.push(
                    CorrelatorKey::new(parties.clone(), settings)
                        .expect("combinations are strictly increasing"),
                );
            }
        }
    }
    keys
}

/// `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Every correlator of order at most `order_cap`, plus `extra_keys`.
pub fn full_table(
    state: &StateVector,
    meas: &MeasurementAssignment,
    noise: NoiseLevel,
    order_cap: usize,
    extra_keys: &[CorrelatorKey],
) -> Result<CorrelationTable> {
    let scenario = meas.scenario();
    if order_cap > scenario.n_parties() {
        return Err(Error::InvalidInput(format!(
            "order cap {order_cap} exceeds the {} parties",
            scenario.n_parties()
        )));
    }
    for key in extra_keys {
        check_key(state, key, meas)?;
    }
    let mut table = CorrelationTable::new(scenario);
    if order_cap > 0 {
        check_key(
            state,
            &CorrelatorKey::new(vec![0], vec![0]).expect("valid"),
            meas,
        )?;
    }
    for key in keys_up_to_order(&scenario, order_cap) {
        let v = raw_correlator(state, &key, meas, noise);
        table.insert(key, v)?;
    }
    for key in extra_keys {
        if !table.contains(key) {
            let v = raw_correlator(state, key, meas, noise);
            table.insert(key.clone(), v)?;
        }
    }
    Ok(table)
}

/// The two full-body correlators `⟨M_0^{(1)}M_0^{(2)}⋯M_0^{(N)}⟩` and
/// `⟨M_1^{(1)}M_0^{(2)}⋯M_0^{(N)}⟩` used by the mixed GHZ level.
pub fn fullbody_keys(n: usize) -> Vec<CorrelatorKey> {
    let parties: Vec<usize> = (0..n).collect();
    let all_zero = vec![0; n];
    let mut first_one = vec![0; n];
    first_one[0] = 1;
    vec![
        CorrelatorKey::new(parties.clone(), all_zero).expect("valid"),
        CorrelatorKey::new(parties, first_one).expect("valid"),
    ]
}

/// Two orthogonal random directions per party: `x⃗_0` uniform on the sphere,
/// `x⃗_1` uniform on the great circle orthogonal to it.
pub fn random_orthogonal_settings(n: usize, seed: u64) -> Result<MeasurementAssignment> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one party".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = (0..n)
        .map(|_| {
            let x0 = random_unit_vector(&mut rng);
            let (u, v) = orthonormal_frame(x0);
            let theta: f64 = rng.random_range(0.0..TAU);
            let x1 = normalize([
                theta.cos() * u[0] + theta.sin() * v[0],
                theta.cos() * u[1] + theta.sin() * v[1],
                theta.cos() * u[2] + theta.sin() * v[2],
            ]);
            vec![x0, x1]
        })
        .collect();
    MeasurementAssignment::new(dirs)
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = dot(v, v).sqrt();
        if norm > 1e-6 {
            return normalize(v);
        }
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Orthonormal `(u, v)` spanning the plane orthogonal to unit `x`.
fn orthonormal_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let axis = (0..3)
        .min_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
        .expect("three components");
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let u = normalize(cross(x, e));
    let v = normalize(cross(x, u));
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(pairs: &[(usize, usize)]) -> CorrelatorKey {
        CorrelatorKey::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn xz(n: usize) -> MeasurementAssignment {
        MeasurementAssignment::uniform(n, &[SIGMA_X, SIGMA_Z]).unwrap()
    }

    fn xdz(n: usize) -> MeasurementAssignment {
        MeasurementAssignment::uniform(n, &[SIGMA_X, SIGMA_D, SIGMA_Z]).unwrap()
    }

    #[test]
    fn w2_is_bell_like() {
        let w = make_w(2).unwrap();
        let h = FRAC_1_SQRT_2;
        let amps = w.amplitudes();
        assert!((amps[0b01].re - h).abs() < 1e-15);
        assert!((amps[0b10].re - h).abs() < 1e-15);
        assert_eq!(amps[0b00].norm(), 0.0);
        assert_eq!(amps[0b11].norm(), 0.0);
        assert!(make_w(1).is_err());
        assert!(make_ghz(1).is_err());
        assert!(matches!(make_w(15), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn w_zz_correlations() {
        let w3 = make_w(3).unwrap();
        let m = xz(3);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let v = correlator(&w3, &key(&[(a, 1), (b, 1)]), &m, NoiseLevel::NONE).unwrap();
            assert!((v + 1.0 / 3.0).abs() < 1e-12);
        }
        let half = NoiseLevel::new(0.5).unwrap();
        let v = correlator(&w3, &key(&[(0, 1), (1, 1)]), &m, half).unwrap();
        assert!((v + 1.0 / 6.0).abs() < 1e-12);
        for n in 2..=8 {
            let w = make_w(n).unwrap();
            let all: Vec<_> = (0..n).map(|i| (i, 1)).collect();
            let v = correlator(&w, &key(&all), &xz(n), NoiseLevel::NONE).unwrap();
            // exactly one qubit is excited in every branch
            assert!((v + 1.0).abs() < 1e-12, "N={n}: {v}");
        }
    }

    #[test]
    fn ghz_bullet_identities() {
        let r = FRAC_1_SQRT_2;
        for n in 2..=10 {
            let g = make_ghz(n).unwrap();
            let m = xdz(n);
            let c = |pairs: &[(usize, usize)]| {
                correlator(&g, &key(pairs), &m, NoiseLevel::NONE).unwrap()
            };
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    assert!(c(&[(i, 0), (j, 2)]).abs() < 1e-10);
                    assert!((c(&[(i, 2), (j, 2)]) - 1.0).abs() < 1e-10);
                    assert!((c(&[(i, 1), (j, 2)]) - r).abs() < 1e-10);
                    if n > 2 {
                        assert!((c(&[(i, 1), (j, 1)]) - 0.5).abs() < 1e-10);
                        assert!(c(&[(i, 0), (j, 0)]).abs() < 1e-10);
                    }
                }
            }
            let all_x: Vec<_> = (0..n).map(|i| (i, 0)).collect();
            assert!((c(&all_x) - 1.0).abs() < 1e-10);
            let mut zx = all_x.clone();
            zx[0].1 = 2;
            assert!(c(&zx).abs() < 1e-10);
            let mut dx = all_x;
            dx[0].1 = 1;
            assert!((c(&dx) - r).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_is_uniform_damping() {
        let g = make_w(4).unwrap();
        let m = random_orthogonal_settings(4, 7).unwrap();
        let k = key(&[(0, 0), (2, 1), (3, 0)]);
        let clean = correlator(&g, &k, &m, NoiseLevel::NONE).unwrap();
        for p in [0.0, 0.1, 0.37, 0.9] {
            let noisy = correlator(&g, &k, &m, NoiseLevel::new(p).unwrap()).unwrap();
            assert_eq!(noisy, (1.0 - p) * clean);
        }
        let full = NoiseLevel::new(1.0).unwrap();
        for k in keys_up_to_order(&m.scenario(), 4) {
            assert_eq!(correlator(&g, &k, &m, full).unwrap(), 0.0);
        }
        assert!(NoiseLevel::new(1.5).is_err());
    }

    #[test]
    fn graph_states_stabilizers() {
        let plus = make_graph_state(&GraphSpec::new(3, []).unwrap()).unwrap();
        let a = (0.5f64).powf(1.5);
        assert!(plus.amplitudes().iter().all(|c| (c.re - a).abs() < 1e-15));

        let line = make_graph_state(&GraphSpec::line(2).unwrap()).unwrap();
        let m = xz(2);
        let c = |pairs: &[(usize, usize)]| {
            correlator(&line, &key(pairs), &m, NoiseLevel::NONE).unwrap()
        };
        assert!((c(&[(0, 0), (1, 1)]) - 1.0).abs() < 1e-12);
        assert!((c(&[(0, 1), (1, 0)]) - 1.0).abs() < 1e-12);

        for n in 3..=6 {
            let star = make_graph_state(&GraphSpec::star(n).unwrap()).unwrap();
            let mut pairs = vec![(0, 0)];
            pairs.extend((1..n).map(|i| (i, 1)));
            let v = correlator(&star, &key(&pairs), &xz(n), NoiseLevel::NONE).unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_state_independent_of_edge_order() {
        let g = GraphSpec::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let edges: Vec<_> = g.edges().collect();
        let reference = make_graph_state(&g).unwrap();
        // every rotation and the reversal
        for shift in 0..edges.len() {
            let mut e = edges.clone();
            e.rotate_left(shift);
            assert_eq!(graph_state_with_order(5, &e, 14).unwrap(), reference);
            e.reverse();
            assert_eq!(graph_state_with_order(5, &e, 14).unwrap(), reference);
        }
        assert!(GraphSpec::new(3, [(1, 1)]).is_err());
        assert!(GraphSpec::new(3, [(0, 3)]).is_err());
        assert_eq!(GraphSpec::grid(2, 3).unwrap().edges().count(), 7);
        assert_eq!(GraphSpec::ring(5).unwrap().edges().count(), 5);
        assert_eq!(GraphSpec::star(4).unwrap().neighbors(0), vec![1, 2, 3]);
    }

    #[test]
    fn table_sizes() {
        let g = make_ghz(3).unwrap();
        for m in 1..=3 {
            let meas = MeasurementAssignment::uniform(3, &[SIGMA_X, SIGMA_D, SIGMA_Z][..m]).unwrap();
            let t = full_table(&g, &meas, NoiseLevel::NONE, 3, &[]).unwrap();
            assert_eq!(t.len(), 3 * m + 3 * m * m + m * m * m);
        }
        let t = full_table(&g, &xz(3), NoiseLevel::NONE, 0, &[]).unwrap();
        assert!(t.is_empty());
        assert!(full_table(&g, &xz(3), NoiseLevel::NONE, 4, &[]).is_err());
        let bad = key(&[(0, 5)]);
        assert!(full_table(&g, &xz(3), NoiseLevel::NONE, 1, &[bad]).is_err());

        let g6 = make_ghz(6).unwrap();
        let t = full_table(&g6, &xdz(6), NoiseLevel::NONE, 4, &fullbody_keys(6)).unwrap();
        let expected: usize = (1..=4).map(|k| combinations(6, k).len() * 3usize.pow(k as u32)).sum();
        assert_eq!(t.len(), expected + 2);
        assert_eq!(t.iter().filter(|(k, _)| k.order() == 6).count(), 2);
    }

    #[test]
    fn random_settings_are_orthogonal_and_deterministic() {
        let a = random_orthogonal_settings(6, 42).unwrap();
        let b = random_orthogonal_settings(6, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_orthogonal_settings(6, 43).unwrap());
        for p in 0..6 {
            assert!(dot(a.direction(p, 0), a.direction(p, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_directions_are_centered() {
        let m = random_orthogonal_settings(100_000, 2024).unwrap();
        for c in 0..3 {
            let mean: f64 = (0..100_000).map(|p| m.direction(p, 0)[c]).sum::<f64>() / 1e5;
            assert!(mean.abs() < 0.02, "component {c}: {mean}");
        }
    }
}
