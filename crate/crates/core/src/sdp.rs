//! Maximize `λ` subject to `Γ(y) − λ·1 ⪰ 0` and recover the dual.
//!
//! The dual is `min ⟨A_0, Z⟩` over `Z ⪰ 0`, `tr Z = 1`, `⟨B_j, Z⟩ = 0`.
//! The solver runs ADMM on the primal splitting `Γ(y) − λ·1 = X`, `X ⪰ 0`,
//! and every few iterations turns the current iterates into a feasible primal
//! point (a lower bound on `λ*`) and a feasible dual point (an upper bound).
//! Both bounds are valid whatever the iterate quality, so a sign decision can
//! be made as soon as they agree on it.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use crate::algebra::{GeneratingSet, Monomial};
use crate::corrdata::{CorrelatorKey, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigenvalues, min_eigenvalue, project_psd, SymMatrix};
use crate::moment::{MomentStructure, SdpInstance};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol_primal: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// `ε`: `λ*` must be below `−ε` for a nonlocal verdict.
    pub detect_threshold: f64,
    /// Stop as soon as the bounds certify the verdict, before the gap closes.
    pub early_stop: bool,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_primal: 1e-8,
            tol_gap: 1e-8,
            max_iter: 50_000,
            detect_threshold: 1e-6,
            early_stop: false,
            relaxation: 1.6,
        }
    }
}

impl SolverConfig {
    /// Default tolerances with early stopping on a certified verdict.
    pub fn decision() -> Self {
        Self {
            early_stop: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.tol_primal) || !positive(self.tol_gap) || !positive(self.detect_threshold) {
            return Err(Error::InvalidInput("solver tolerances must be positive".into()));
        }
        if self.detect_threshold < self.tol_gap {
            return Err(Error::InvalidInput(
                "detection threshold must not be below the gap tolerance".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidInput("relaxation must lie in (0, 2)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Gap closed to `tol_gap`.
    Converged,
    /// Stopped early: the bounds already certify the verdict.
    SignCertified,
    IterLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::SignCertified => "sign-certified",
            SolveStatus::IterLimit => "iteration-limit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "converged" => Some(SolveStatus::Converged),
            "sign-certified" => Some(SolveStatus::SignCertified),
            "iteration-limit" => Some(SolveStatus::IterLimit),
            _ => None,
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `‖Γ(y) − λ·1 − X‖_F` at the last check.
    pub primal: f64,
    /// `ρ‖X − X_prev‖_F` at the last check.
    pub dual: f64,
    /// Upper minus lower bound.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    /// Dual objective `⟨A_0, Z⟩`, an upper bound on the optimum.
    pub lambda_star: f64,
    /// `λ_min(Γ(y))`, attained by `y`.
    pub lambda_lower: f64,
    pub y: Vec<f64>,
    /// Dual matrix: PSD, unit trace, orthogonal to every `B_j`.
    pub z: SymMatrix,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Nonlocal,
    Consistent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Nonlocal => "Nonlocal",
            Verdict::Consistent => "Consistent",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

pub fn verdict(sol: &SdpSolution, cfg: &SolverConfig) -> Verdict {
    match sol.status {
        SolveStatus::IterLimit => Verdict::Inconclusive,
        _ if sol.lambda_star < -cfg.detect_threshold => Verdict::Nonlocal,
        SolveStatus::Converged if sol.lambda_star >= -cfg.tol_gap => Verdict::Consistent,
        SolveStatus::SignCertified if sol.lambda_lower >= -cfg.tol_gap => Verdict::Consistent,
        _ => Verdict::Inconclusive,
    }
}

const CHECK_EVERY: usize = 10;
const ADAPT_EVERY: usize = 50;

pub fn solve(inst: &SdpInstance, cfg: &SolverConfig) -> Result<SdpSolution> {
    cfg.validate()?;
    let k = inst.size();
    if k == 0 {
        return Err(Error::InvalidInput("empty moment matrix".into()));
    }
    let kf = k as f64;
    let a0 = inst.a0();
    if a0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("constant matrix has non-finite entries".into()));
    }
    let classes = inst.free_positions();
    let tr_a0: f64 = (0..k).map(|i| a0[i * k + i]).sum();
    let alpha = cfg.relaxation;

    let mut rho = 1.0;
    let mut x = SymMatrix::identity(k);
    let mut u = SymMatrix::zeros(k);
    let mut g = SymMatrix::from_row_major(k, a0.to_vec());
    let mut y = vec![0.0; classes.len()];
    let mut v = SymMatrix::zeros(k);

    let mut best_lb = f64::NEG_INFINITY;
    let mut best_y = y.clone();
    let mut best_ub = f64::INFINITY;
    let mut best_z: Option<SymMatrix> = None;
    let mut residuals = Residuals::default();
    let mut status = SolveStatus::IterLimit;
    let mut iterations = cfg.max_iter;

    for it in 1..=cfg.max_iter {
        // (y, λ) minimize −λ + ρ/2‖Γ(y) − λ·1 − (X − U)‖²
        let xs = x.as_slice();
        let us = u.as_slice();
        for (yj, positions) in y.iter_mut().zip(classes) {
            let mut sum = 0.0;
            for &(r, c) in positions {
                let (r, c) = (r as usize, c as usize);
                sum += (xs[r * k + c] - us[r * k + c]) + (xs[c * k + r] - us[c * k + r]);
            }
            *yj = sum / (2 * positions.len()) as f64;
        }
        let tr_w: f64 = (0..k).map(|i| xs[i * k + i] - us[i * k + i]).sum();
        let lambda = (tr_a0 - tr_w) / kf + 1.0 / (rho * kf);

        let gs = g.as_mut_slice();
        gs.copy_from_slice(a0);
        for (&yj, positions) in y.iter().zip(classes) {
            for &(r, c) in positions {
                gs[r as usize * k + c as usize] = yj;
                gs[c as usize * k + r as usize] = yj;
            }
        }
        for i in 0..k {
            gs[i * k + i] -= lambda;
        }

        let vs = v.as_mut_slice();
        for ((vi, (&gi, &xi)), &ui) in vs.iter_mut().zip(gs.iter().zip(xs)).zip(us) {
            *vi = alpha * gi + (1.0 - alpha) * xi + ui;
        }
        let (x_new, _) = project_psd(&v)?;
        let check = it % CHECK_EVERY == 0;
        let step = if check {
            x_new
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        } else {
            0.0
        };
        x = x_new;
        for ((ui, &vi), &xi) in u.as_mut_slice().iter_mut().zip(v.as_slice()).zip(x.as_slice()) {
            *ui = vi - xi;
        }

        if !check {
            continue;
        }
        let r = g
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let s = rho * step;

        let lb = min_eigenvalue(&g) + lambda;
        if lb > best_lb {
            best_lb = lb;
            best_y.copy_from_slice(&y);
        }
        if let Some((ub, z)) = dual_point(&u, rho, classes, a0)? {
            if ub < best_ub {
                best_ub = ub;
                best_z = Some(z);
            }
        }
        residuals = Residuals {
            primal: r,
            dual: s,
            gap: best_ub - best_lb,
        };

        if best_ub - best_lb <= cfg.tol_gap {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
        if cfg.early_stop
            && (best_ub < -cfg.detect_threshold || best_lb >= -cfg.tol_gap)
        {
            status = SolveStatus::SignCertified;
            iterations = it;
            break;
        }
        if it % ADAPT_EVERY == 0 {
            if r > 10.0 * s {
                rho *= 2.0;
                u.as_mut_slice().iter_mut().for_each(|v| *v *= 0.5);
            } else if s > 10.0 * r {
                rho *= 0.5;
                u.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0);
            }
        }
    }

    let z = match best_z {
        Some(z) => z,
        None => {
            // no usable dual iterate: fall back to the identity direction
            let mut z = SymMatrix::identity(k);
            z.as_mut_slice().iter_mut().for_each(|v| *v /= kf);
            best_ub = z.as_slice().iter().zip(a0).map(|(a, b)| a * b).sum();
            z
        }
    };
    residuals.gap = best_ub - best_lb;
    if status == SolveStatus::IterLimit
        && (best_ub < -cfg.detect_threshold || best_lb >= -cfg.tol_gap)
    {
        status = SolveStatus::SignCertified;
    }
    Ok(SdpSolution {
        lambda_star: best_ub,
        lambda_lower: best_lb,
        y: best_y,
        z,
        status,
        residuals,
        iterations,
    })
}

/// Feasible dual point from the scaled multiplier: `−ρU` with class means
/// removed, shifted into the PSD cone and normalized to unit trace.
fn dual_point(
    u: &SymMatrix,
    rho: f64,
    classes: &[Vec<(u32, u32)>],
    a0: &[f64],
) -> Result<Option<(f64, SymMatrix)>> {
    let k = u.n();
    let mut z = u.clone();
    z.as_mut_slice().iter_mut().for_each(|v| *v *= -rho);
    let zs = z.as_mut_slice();
    for positions in classes {
        let mut sum = 0.0;
        for &(r, c) in positions {
            sum += zs[r as usize * k + c as usize] + zs[c as usize * k + r as usize];
        }
        let mean = sum / (2 * positions.len()) as f64;
        for &(r, c) in positions {
            zs[r as usize * k + c as usize] -= mean;
            zs[c as usize * k + r as usize] -= mean;
        }
    }
    let mu = (-min_eigenvalue(&z)).max(0.0);
    let trace = z.trace() + k as f64 * mu;
    if !(trace > 0.0) || !trace.is_finite() {
        return Ok(None);
    }
    let zs = z.as_mut_slice();
    for i in 0..k {
        zs[i * k + i] += mu;
    }
    zs.iter_mut().for_each(|v| *v /= trace);
    let ub = zs.iter().zip(a0).map(|(a, b)| a * b).sum();
    Ok(Some((ub, z)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    /// Smallest eigenvalue of `Z` by Jacobi rotations.
    pub min_eigenvalue: f64,
    pub trace_error: f64,
    /// Largest `|⟨B_j, Z⟩|`.
    pub orthogonality: f64,
    /// `⟨A_0, Z⟩ − λ*`.
    pub objective_error: f64,
    pub asymmetry: f64,
    pub passed: bool,
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "min eigenvalue of Z   {:.3e}", self.min_eigenvalue)?;
        writeln!(f, "trace error           {:.3e}", self.trace_error)?;
        writeln!(f, "orthogonality         {:.3e}", self.orthogonality)?;
        writeln!(f, "objective error       {:.3e}", self.objective_error)?;
        write!(
            f,
            "certificate           {}",
            if self.passed { "valid" } else { "REJECTED" }
        )
    }
}

/// Recomputes the dual feasibility conditions with routines independent of
/// the solver. Tolerances are ten times the configured ones.
pub fn validate_certificate(
    inst: &SdpInstance,
    sol: &SdpSolution,
    cfg: &SolverConfig,
) -> CertificateReport {
    let k = inst.size();
    let z = &sol.z;
    if z.n() != k || z.as_slice().iter().any(|v| !v.is_finite()) {
        return CertificateReport {
            min_eigenvalue: f64::NAN,
            trace_error: f64::NAN,
            orthogonality: f64::NAN,
            objective_error: f64::NAN,
            asymmetry: f64::NAN,
            passed: false,
        };
    }
    let zs = z.as_slice();
    let min_eig = jacobi_eigenvalues(z)[0];
    let trace_error = z.trace() - 1.0;
    let orthogonality = inst
        .free_positions()
        .iter()
        .map(|positions| {
            positions
                .iter()
                .map(|&(r, c)| zs[r as usize * k + c as usize] + zs[c as usize * k + r as usize])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max);
    let objective: f64 = zs.iter().zip(inst.a0()).map(|(a, b)| a * b).sum();
    let objective_error = objective - sol.lambda_star;
    let asymmetry = z.max_asymmetry();
    let tol = 10.0 * cfg.tol_primal;
    let passed = sol.status != SolveStatus::IterLimit
        && min_eig >= -tol
        && trace_error.abs() <= tol
        && orthogonality <= tol
        && asymmetry <= tol
        && objective_error.abs() <= 10.0 * cfg.tol_gap;
    CertificateReport {
        min_eigenvalue: min_eig,
        trace_error,
        orthogonality,
        objective_error,
        asymmetry,
        passed,
    }
}

/// A solution together with what is needed to rebuild its moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub scenario: Scenario,
    pub generating_set: Vec<Monomial>,
    pub known_keys: Vec<CorrelatorKey>,
    pub free_vars: Vec<Monomial>,
    pub solution: SdpSolution,
}

impl Certificate {
    pub fn new(ms: &MomentStructure, solution: SdpSolution) -> Self {
        let mut known_keys: Vec<CorrelatorKey> = ms.known_keys().cloned().collect();
        known_keys.sort();
        Self {
            scenario: *ms.scenario(),
            generating_set: ms.generating_set().monomials().to_vec(),
            known_keys,
            free_vars: ms.free_vars().to_vec(),
            solution,
        }
    }

    pub fn generating_set(&self) -> Result<GeneratingSet> {
        GeneratingSet::from_monomials(self.scenario, self.generating_set.clone())
    }

    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let sol = &self.solution;
        let k = sol.z.n();
        let mut out = String::new();
        let num = |v: f64| format!("{v:.16e}");
        let _ = writeln!(out, "certificate v1");
        let _ = writeln!(out, "scenario {} {}", s.n_parties(), s.n_settings());
        let _ = writeln!(out, "k {k}");
        let _ = writeln!(out, "status {}", sol.status);
        let _ = writeln!(out, "iterations {}", sol.iterations);
        let _ = writeln!(out, "lambda_star {}", num(sol.lambda_star));
        let _ = writeln!(out, "lambda_lower {}", num(sol.lambda_lower));
        let _ = writeln!(out, "generating_set {}", self.generating_set.len());
        for m in &self.generating_set {
            let _ = writeln!(out, "{}", m.render(s));
        }
        let _ = writeln!(out, "known {}", self.known_keys.len());
        for key in &self.known_keys {
            let _ = writeln!(out, "{key}");
        }
        let _ = writeln!(out, "free {}", self.free_vars.len());
        for (m, y) in self.free_vars.iter().zip(&sol.y) {
            let _ = writeln!(out, "{} {}", m.render(s), num(*y));
        }
        let _ = writeln!(out, "z");
        for i in 0..k {
            let row: Vec<String> = (0..=i).map(|j| num(sol.z.get(i, j))).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |reason: String| Error::parse("certificate", reason);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(str::trim)
                .ok_or_else(|| err(format!("unexpected end of file, expected {what}")))
        };
        let field = |line: &str, name: &str| -> Result<String> {
            line.strip_prefix(name)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(|s| s.trim().to_string())
                .ok_or_else(|| err(format!("expected `{name}`, found `{line}`")))
        };
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| err(format!("invalid number `{s}`")))
        };
        let count = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| err(format!("invalid count `{s}`")))
        };

        if next("header")? != "certificate v1" {
            return Err(err("missing `certificate v1` header".into()));
        }
        let dims = field(next("scenario")?, "scenario")?;
        let dims: Vec<&str> = dims.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(err("scenario needs two numbers".into()));
        }
        let scenario = Scenario::new(count(dims[0])?, count(dims[1])?)?;
        let k = count(&field(next("k")?, "k")?)?;
        let status_text = field(next("status")?, "status")?;
        let status = SolveStatus::parse(&status_text)
            .ok_or_else(|| err(format!("unknown status `{status_text}`")))?;
        let iterations = count(&field(next("iterations")?, "iterations")?)?;
        let lambda_star = number(&field(next("lambda_star")?, "lambda_star")?)?;
        let lambda_lower = number(&field(next("lambda_lower")?, "lambda_lower")?)?;

        let n_gen = count(&field(next("generating_set")?, "generating_set")?)?;
        if n_gen != k {
            return Err(err(format!("generating set has {n_gen} monomials but k = {k}")));
        }
        let mut generating_set = Vec::with_capacity(n_gen);
        for _ in 0..n_gen {
            generating_set.push(Monomial::parse(&scenario, next("monomial")?)?);
        }
        let n_known = count(&field(next("known")?, "known")?)?;
        let mut known_keys = Vec::with_capacity(n_known);
        for _ in 0..n_known {
            known_keys.push(parse_key(next("key")?)?);
        }
        let n_free = count(&field(next("free")?, "free")?)?;
        let mut free_vars = Vec::with_capacity(n_free);
        let mut y = Vec::with_capacity(n_free);
        for _ in 0..n_free {
            let line = next("free variable")?;
            let (mono, value) = line
                .rsplit_once(' ')
                .ok_or_else(|| err(format!("malformed free variable line `{line}`")))?;
            free_vars.push(Monomial::parse(&scenario, mono)?);
            y.push(number(value)?);
        }
        if next("z")? != "z" {
            return Err(err("expected `z`".into()));
        }
        let mut z = SymMatrix::zeros(k);
        for i in 0..k {
            let row: Vec<&str> = next("row of Z")?.split_whitespace().collect();
            if row.len() != i + 1 {
                return Err(err(format!("row {i} of Z has {} entries", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                z.set(i, j, number(v)?);
            }
        }
        if let Ok(extra) = next("end") {
            return Err(err(format!("trailing content `{extra}`")));
        }
        Ok(Self {
            scenario,
            generating_set,
            known_keys,
            free_vars,
            solution: SdpSolution {
                lambda_star,
                lambda_lower,
                y,
                z,
                status,
                residuals: Residuals::default(),
                iterations,
            },
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Parses the `<p:s p:s ...>` display form of a key.
pub fn parse_key(text: &str) -> Result<CorrelatorKey> {
    let inner = text
        .trim()
        .strip_prefix('<')
        .and_then(|t| t.strip_suffix('>'))
        .ok_or_else(|| Error::parse("correlator key", format!("`{text}` is not of the form <p:s ...>")))?;
    let mut pairs = Vec::new();
    for item in inner.split_whitespace() {
        let (p, s) = item
            .split_once(':')
            .ok_or_else(|| Error::parse("correlator key", format!("bad item `{item}` in `{text}`")))?;
        let p = p
            .parse()
            .map_err(|_| Error::parse("correlator key", format!("bad party `{p}` in `{text}`")))?;
        let s = s
            .parse()
            .map_err(|_| Error::parse("correlator key", format!("bad setting `{s}` in `{text}`")))?;
        pairs.push((p, s));
    }
    CorrelatorKey::from_pairs(pairs)
}
