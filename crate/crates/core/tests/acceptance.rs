//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (written straight to stdout so it shows without `--nocapture`).

use std::collections::BTreeSet;
use std::f64::consts::SQRT_2;
use std::io::Write;

use lochier_core::algebra::Generator;
use lochier_core::bell::{analytic_noise_threshold, build_imix2, build_imix3, extract_from_dual};
use lochier_core::experiment::{
    detect, random_sweep, robustness, Caps, DatasetSpec, Extra, GraphKind, Level, MeasPreset,
    StateKind,
};
use lochier_core::localset::{
    local_bound, local_minimum, lp_membership, strategy_correlators, DeterministicStrategy,
    DEFAULT_ENUM_CAP, DEFAULT_LP_CAP,
};
use lochier_core::moment::build;
use lochier_core::qsim::keys_up_to_order;
use lochier_core::{
    CorrelationTable, CorrelatorKey, EntryLabel, GeneratingSet, Monomial, Scenario, SolverConfig,
    Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "{} criterion {id:>2} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn chsh(scale: f64) -> CorrelationTable {
    let s = Scenario::new(2, 2).unwrap();
    let mut t = CorrelationTable::new(s);
    let h = scale * std::f64::consts::FRAC_1_SQRT_2;
    for (p, x) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        t.insert(CorrelatorKey::new(vec![p], vec![x]).unwrap(), 0.0).unwrap();
    }
    for (a, b, v) in [(0, 0, h), (0, 1, h), (1, 0, h), (1, 1, -h)] {
        t.insert(CorrelatorKey::new(vec![0, 1], vec![a, b]).unwrap(), v).unwrap();
    }
    t
}

/// Random convex mixture of a few deterministic strategies over every key of
/// the scenario.
fn random_local_table(scenario: Scenario, rng: &mut ChaCha8Rng) -> CorrelationTable {
    let keys = keys_up_to_order(&scenario, scenario.n_parties());
    let n_bits = scenario.n_generators();
    let count = rng.random_range(1..=6);
    let tables: Vec<CorrelationTable> = (0..count)
        .map(|_| {
            let bits = rng.random_range(0..(1u128 << n_bits));
            let s = DeterministicStrategy::from_bits(scenario, bits).unwrap();
            strategy_correlators(&s, &keys).unwrap()
        })
        .collect();
    let raw: Vec<f64> = (0..count).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let refs: Vec<&CorrelationTable> = tables.iter().collect();
    CorrelationTable::mixture(&refs, &weights).unwrap()
}

fn p_max(spec: &DatasetSpec, level: &Level) -> f64 {
    robustness(spec, level, 1e-3, &SolverConfig::decision(), &Caps::default())
        .unwrap()
        .p_max
}

#[test]
fn criterion_01_bipartite_moment_matrix() {
    let s = Scenario::new(2, 2).unwrap();
    let gset = GeneratingSet::level(s, 2, 100).unwrap();
    let (ms, inst) = build(&gset, &chsh(1.0)).unwrap();
    let word = |gens: &[(usize, usize)]| {
        Monomial::product(&s, gens.iter().map(|&(p, x)| Generator::new(p, x))).unwrap()
    };
    // label shared by every position holding `m`, if unique
    let label_of = |m: Monomial| -> Option<EntryLabel> {
        let mut labels = Vec::new();
        for i in 0..ms.size() {
            for j in 0..ms.size() {
                if ms.monomial(i, j) == m {
                    labels.push(ms.label(i, j));
                }
            }
        }
        labels.dedup();
        (labels.len() == 1).then(|| labels[0].clone())
    };
    let known = |p: &[usize], x: &[usize]| {
        let key = CorrelatorKey::new(p.to_vec(), x.to_vec()).unwrap();
        let value = chsh(1.0).get(&key).unwrap();
        Some(EntryLabel::Known { key, value })
    };
    let (a0, a1, b0, b1) = ((0, 0), (0, 1), (1, 0), (1, 1));
    let mut ok = ms.size() == 11 && ms.free_vars().len() == 7 && inst.n_free() == 7;
    ok &= label_of(word(&[a1, a0, a1])) == known(&[0], &[0]);
    ok &= label_of(word(&[b1, b0, b1])) == known(&[1], &[0]);
    ok &= label_of(word(&[a1, a0, a1, b0])) == known(&[0, 1], &[0, 0]);
    ok &= label_of(word(&[a0, b1, b0, b1])) == known(&[0, 1], &[0, 0]);
    ok &= label_of(word(&[a1, a0, a1, b1])) == known(&[0, 1], &[0, 1]);
    ok &= label_of(word(&[a1, b1, b0, b1])) == known(&[0, 1], &[1, 0]);
    let v11 = label_of(word(&[a1, a0, b0, b1]));
    ok &= matches!(v11, Some(EntryLabel::Free { .. }));
    ok &= label_of(word(&[a0, a1, b0, b1])) == v11;
    ok &= label_of(word(&[a0, a1, b1, b0])) == v11;
    let free_words: BTreeSet<Monomial> = [
        word(&[a0, a1]),
        word(&[b0, b1]),
        word(&[a0, a1, b0]),
        word(&[a0, a1, b1]),
        word(&[a0, b0, b1]),
        word(&[a1, b0, b1]),
        word(&[a0, a1, b0, b1]),
    ]
    .into_iter()
    .collect();
    let actual: BTreeSet<Monomial> = ms.free_vars().iter().copied().collect();
    ok &= free_words == actual;
    report(
        1,
        "bipartite level-2 structure",
        ok,
        &format!("size {} with {} free variables", ms.size(), ms.free_vars().len()),
    );
}

#[test]
fn criterion_02_chsh() {
    let cfg = SolverConfig::default();
    let caps = Caps::default();
    let l1 = detect(&chsh(1.0), &Level::Plain(1), &cfg, &caps, true).unwrap();
    let l2 = detect(&chsh(1.0), &Level::Plain(2), &cfg, &caps, true).unwrap();
    let mut ok = l1.verdict == Verdict::Consistent
        && l2.verdict == Verdict::Nonlocal
        && l2.solution.lambda_star < -1e-4;
    let s = Scenario::new(2, 2).unwrap();
    let keys = keys_up_to_order(&s, 2);
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    let mut tables = Vec::new();
    for bits in 0..16u128 {
        let strat = DeterministicStrategy::from_bits(s, bits).unwrap();
        tables.push(strategy_correlators(&strat, &keys).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        tables.push(random_local_table(s, &mut rng));
    }
    for t in &tables {
        let d = detect(t, &Level::Plain(2), &cfg, &caps, false).unwrap();
        worst = worst.min(d.solution.lambda_star);
        if d.verdict != Verdict::Consistent || d.solution.lambda_star < -1e-6 {
            bad += 1;
        }
    }
    ok &= bad == 0;
    report(
        2,
        "CHSH levels and local tables",
        ok,
        &format!(
            "L1 {} / L2 {} (lambda* {:.4e}); {bad} of {} local tables rejected, min lambda* {worst:.3e}",
            l1.verdict,
            l2.verdict,
            l2.solution.lambda_star,
            tables.len()
        ),
    );
}

#[test]
fn criterion_03_w_state_robustness() {
    let targets = [(5, 0.295), (6, 0.296), (7, 0.277), (8, 0.251)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, target) in targets {
        let p = p_max(&DatasetSpec::w(n), &Level::Plain(2));
        ok &= (p - target).abs() <= 0.01;
        parts.push(format!("N={n} {p:.4} (target {target})"));
    }
    report(3, "W-state noise robustness", ok, &parts.join(", "));
}

#[test]
fn criterion_04_ghz_two_settings_robustness() {
    let targets = [(5, 0.107), (6, 0.112), (7, 0.116), (8, 0.120)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, target) in targets {
        let p = p_max(&DatasetSpec::ghz_two_settings(n), &Level::MixedFullBody);
        ok &= (p - target).abs() <= 0.01;
        parts.push(format!("N={n} {p:.4} (target {target})"));
    }
    report(4, "GHZ two-setting noise robustness", ok, &parts.join(", "));
}

#[test]
fn criterion_05_ghz_three_settings() {
    let analytic = (SQRT_2 - 1.0) / (SQRT_2 + 1.0);
    let caps = Caps::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 4..=8 {
        let spec = DatasetSpec::ghz_three_settings(n);
        let table = spec.generate(&caps).unwrap();
        let d = detect(&table, &Level::MixedFullBody, &SolverConfig::decision(), &caps, false).unwrap();
        let p = p_max(&spec, &Level::MixedFullBody);
        ok &= d.verdict == Verdict::Nonlocal && (p - 0.17).abs() <= 0.01 && (p - analytic).abs() <= 0.01;
        parts.push(format!("N={n} {} {p:.4}", d.verdict));
    }
    report(
        5,
        "GHZ three-setting mixed level",
        ok,
        &format!("{} (analytic {analytic:.4})", parts.join(", ")),
    );
}

#[test]
fn criterion_06_bell_inequalities() {
    let caps = Caps::default();
    let mut ok = true;
    let mut worst_eval = 0.0f64;
    for n in 3..=10 {
        let f3 = build_imix3(n).unwrap();
        let f2 = build_imix2(n).unwrap();
        let bound = 2 * (n as i64 - 1);
        ok &= local_bound(&f3, DEFAULT_ENUM_CAP).unwrap().exact == Some(bound);
        ok &= local_bound(&f2, DEFAULT_ENUM_CAP).unwrap().exact == Some(bound);

        let m = (n - 1) as f64;
        let ghz3 = DatasetSpec::ghz_three_settings(n).generate(&caps).unwrap();
        let ghz2 = DatasetSpec {
            order_cap: 2,
            ..DatasetSpec::ghz_two_settings(n)
        }
        .generate(&caps)
        .unwrap();
        let alt = DatasetSpec {
            state: StateKind::Ghz,
            n,
            meas: MeasPreset::Alt,
            noise: 0.0,
            order_cap: 2,
            extra: Extra::FullBody,
        }
        .generate(&caps)
        .unwrap();
        for (value, expected) in [
            (f3.evaluate(&ghz3).unwrap(), (1.0 + SQRT_2) * m),
            (f2.evaluate(&ghz2).unwrap(), (3.0 + SQRT_2) / 2.0 * m),
            (f2.evaluate(&alt).unwrap(), 2.0 * SQRT_2 * m),
        ] {
            worst_eval = worst_eval.max((value - expected).abs());
        }
    }
    ok &= worst_eval < 1e-9;
    let f3 = build_imix3(5).unwrap();
    let f2 = build_imix2(5).unwrap();
    let thresholds = [
        analytic_noise_threshold(&f3, (1.0 + SQRT_2) * 4.0).unwrap(),
        analytic_noise_threshold(&f2, (3.0 + SQRT_2) / 2.0 * 4.0).unwrap(),
        analytic_noise_threshold(&f2, 2.0 * SQRT_2 * 4.0).unwrap(),
    ];
    for (p, expected) in thresholds.iter().zip([0.1716, 0.0938, 0.2929]) {
        ok &= (p - expected).abs() < 1e-4;
    }
    report(
        6,
        "built-in inequalities",
        ok,
        &format!(
            "bounds 2(N-1) for N=3..10, max evaluation error {worst_eval:.1e}, thresholds {:.4} {:.4} {:.4}",
            thresholds[0], thresholds[1], thresholds[2]
        ),
    );
}

#[test]
fn criterion_07_dual_certificates() {
    let caps = Caps::default();
    let cfg = SolverConfig::default();
    let mut cases: Vec<(String, CorrelationTable, Level)> = vec![("CHSH".into(), chsh(1.0), Level::Plain(2))];
    for n in 3..=5 {
        cases.push((format!("W{n}"), DatasetSpec::w(n).generate(&caps).unwrap(), Level::Plain(2)));
    }
    for n in 4..=5 {
        cases.push((
            format!("GHZ2-{n}"),
            DatasetSpec::ghz_two_settings(n).generate(&caps).unwrap(),
            Level::MixedFullBody,
        ));
        cases.push((
            format!("GHZ3-{n}"),
            DatasetSpec::ghz_three_settings(n).generate(&caps).unwrap(),
            Level::MixedFullBody,
        ));
        for kind in [GraphKind::Line, GraphKind::Loop] {
            cases.push((
                format!("{kind:?}{n}"),
                DatasetSpec::graph(kind, n).generate(&caps).unwrap(),
                Level::Plain(2),
            ));
        }
    }
    for seed in 0..6 {
        let spec = DatasetSpec {
            meas: MeasPreset::Random(seed),
            ..DatasetSpec::w(3)
        };
        cases.push((format!("W3-random{seed}"), spec.generate(&caps).unwrap(), Level::Plain(2)));
    }

    let mut ok = true;
    let mut checked = 0;
    let mut failures = Vec::new();
    for (name, table, level) in &cases {
        let d = detect(table, level, &cfg, &caps, true).unwrap();
        if d.verdict != Verdict::Nonlocal {
            continue;
        }
        checked += 1;
        let good = (|| {
            let f = extract_from_dual(&d.structure, &d.instance, &d.solution, table, &cfg).ok()?;
            let min = local_minimum(&f, DEFAULT_ENUM_CAP).ok()?.value;
            let value = f.evaluate(table).ok()?;
            let lam = d.solution.lambda_star;
            Some(min >= -1e-6 * f.coefficient_l1() && value < 0.0 && (value - lam).abs() <= 1e-6)
        })();
        if good != Some(true) {
            ok = false;
            failures.push(name.clone());
        }
    }
    ok &= checked >= 10;
    report(
        7,
        "dual certificates",
        ok,
        &format!("{checked} nonlocal verdicts checked, failures: {failures:?}"),
    );
}

#[test]
fn criterion_08_random_measurement_sweep() {
    let seed = 20_240_601;
    let cfg = SolverConfig::decision();
    let caps = Caps::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, target) in [(3, 0.502), (4, 0.444)] {
        let s = random_sweep(n, 1000, seed, &cfg, &caps).unwrap();
        ok &= (s.fraction - target).abs() <= 0.05;
        parts.push(format!(
            "N={n} {:.1}% (target {:.1}%, 95% CI [{:.1}, {:.1}], {} inconclusive)",
            100.0 * s.fraction,
            100.0 * target,
            100.0 * s.interval.0,
            100.0 * s.interval.1,
            s.inconclusive
        ));
    }
    report(
        8,
        "random-measurement sweep",
        ok,
        &format!("seed {seed}: {}", parts.join(", ")),
    );
}

#[test]
fn criterion_09_graph_states() {
    let caps = Caps::default();
    let cfg = SolverConfig::decision();
    let mut specs: Vec<DatasetSpec> = Vec::new();
    for n in 4..=8 {
        specs.push(DatasetSpec::graph(GraphKind::Line, n));
        specs.push(DatasetSpec::graph(GraphKind::Loop, n));
    }
    specs.push(DatasetSpec::graph(GraphKind::Grid(2, 3), 6));
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in &specs {
        let table = spec.generate(&caps).unwrap();
        let d = detect(&table, &Level::Plain(2), &cfg, &caps, false).unwrap();
        ok &= d.verdict == Verdict::Nonlocal;
        parts.push(format!("{}/{} {}", spec.state, spec.n, d.verdict));
    }
    report(9, "graph states at level 2", ok, &parts.join(", "));
}

#[test]
fn criterion_10_oracle_soundness() {
    let caps = Caps::default();
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut lp_fail = 0;
    let mut sdp_fail = 0;
    let rounds = 500;
    for i in 0..rounds {
        let n = 2 + i % 3;
        let s = Scenario::new(n, 2).unwrap();
        let table = random_local_table(s, &mut rng);
        if !lp_membership(&table, DEFAULT_LP_CAP).unwrap().is_local() {
            lp_fail += 1;
        }
        if detect(&table, &Level::Plain(2), &cfg, &caps, false).unwrap().verdict != Verdict::Consistent {
            sdp_fail += 1;
        }
    }
    report(
        10,
        "local mixtures pass both oracles",
        lp_fail == 0 && sdp_fail == 0,
        &format!("{rounds} mixtures over N=2..4: {lp_fail} LP rejections, {sdp_fail} SDP rejections"),
    );
}
