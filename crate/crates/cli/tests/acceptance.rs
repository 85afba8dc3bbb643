//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use qnr_cli::commands::{self, TraceBundle, TraceMetadata};
use qnr_cli::config::{EsnSweep, ExperimentConfig, Preset, Reservoir};
use qnr_cli::io::{write_series, write_states};
use qnr_core::noise::{kraus_for, NoiseKind, NoiseSpec};
use qnr_core::qsim::{DensityMatrix, ExtendedBlochVector};
use qnr_core::reservoir::{
    default_masks, esp_probe, instance_config, narma2, run_qnr, spatial_multiplex, uniform_inputs,
    Provenance, QnrConfig, StateMatrix,
};
use qnr_core::rng::{self, Purpose};
use qnr_core::tipc::{
    analyze, chi2_upper_quantile, enumerate_bases, ipc_of_target, normalize_states_from,
    surrogate_capacities, BasisCaps, BasisEvaluator, BasisFamily, InputRange, Threshold,
    TipcSettings,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn inputs(len: usize, lo: f64, hi: f64) -> Vec<f64> {
    uniform_inputs(len, lo, hi, &mut rng::stream(42, 0, Purpose::Inputs))
}

/// Rows `washout..` of states driven by `u` (full length), paired with the matching inputs.
fn analysed_window(config: &QnrConfig, u: &[f64], washout: usize) -> (StateMatrix, Vec<f64>) {
    let x = run_qnr(config, u).unwrap();
    let rows: Vec<Vec<f64>> = (washout..u.len()).map(|t| x.row(t)).collect();
    (
        StateMatrix::from_rows(&rows, Provenance::Simulated).unwrap(),
        u[washout..].to_vec(),
    )
}

fn noiseless_null() -> Outcome {
    let start = Instant::now();
    let u = inputs(1000, 0.0, 1.0);
    let x = run_qnr(&QnrConfig::new(4, vec![], 0), &u).unwrap();
    let dt = start.elapsed();
    let m = x.max_abs();
    check(
        m <= 1e-10 && dt < Duration::from_secs(1),
        format!("max |x| = {m:.3e} (<= 1e-10), {:.3} s (< 1 s)", secs(dt)),
    )
}

/// Bloch-vector images of the channels, coded from their closed forms.
fn bloch_oracle(kind: NoiseKind, rate: f64, r: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = r;
    match kind {
        NoiseKind::AmplitudeDamping => {
            let s = (1.0 - rate).sqrt();
            [s * x, s * y, rate + (1.0 - rate) * z]
        }
        NoiseKind::PhaseDamping => {
            let s = (1.0 - rate).sqrt();
            [s * x, s * y, z]
        }
        NoiseKind::Depolarizing => {
            let s = 1.0 - 4.0 * rate / 3.0;
            [s * x, s * y, s * z]
        }
        NoiseKind::BitFlip => [x, (1.0 - 2.0 * rate) * y, (1.0 - 2.0 * rate) * z],
        NoiseKind::PhaseFlip => [(1.0 - 2.0 * rate) * x, (1.0 - 2.0 * rate) * y, z],
        _ => unreachable!(),
    }
}

fn channel_oracles() -> Outcome {
    let kinds = [
        NoiseKind::AmplitudeDamping,
        NoiseKind::PhaseDamping,
        NoiseKind::Depolarizing,
        NoiseKind::BitFlip,
        NoiseKind::PhaseFlip,
    ];
    let mut r = rng::stream(42, 0, Purpose::Synthetic);
    let mut worst = 0.0_f64;
    for kind in kinds {
        for _ in 0..100 {
            // Uniform point in the Bloch ball by rejection, so mixed states are covered.
            let v = loop {
                let v: [f64; 3] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
                if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                    break v;
                }
            };
            let rate: f64 = r.random();
            let rho: DensityMatrix = ExtendedBlochVector::new(v[0], v[1], v[2]).unwrap().to_state();
            let out = rho.apply_kraus(&kraus_for(kind, rate).unwrap().unwrap(), &[0]).unwrap();
            let got = ExtendedBlochVector::from_state(&out).unwrap();
            let want = bloch_oracle(kind, rate, v);
            let dev = [got.rx - want[0], got.ry - want[1], got.rz - want[2]]
                .iter()
                .fold(0.0_f64, |a, d| a.max(d.abs()));
            worst = worst.max(dev).max((out.trace().re - 1.0).abs());
        }
    }
    check(worst <= 1e-10, format!("5 channels x 100 states, max Bloch deviation {worst:.3e} (<= 1e-10)"))
}

fn esp_decay() -> Outcome {
    let start = Instant::now();
    let u = inputs(175, 0.0, 1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for (gamma, lo, hi) in [(0.05, 3e-5, 3e-4), (0.10, 3e-9, 3e-8)] {
        let c = QnrConfig::new(4, vec![NoiseSpec::new(NoiseKind::AmplitudeDamping, gamma)], 42);
        let res = esp_probe(&c, &u, 20, 42).unwrap();
        let last = *res.distance.last().unwrap();
        let bound = 0.5 * (1.0 - gamma).ln();
        let slope = res.slope.unwrap_or(f64::NAN);
        let rel = ((slope - bound) / bound).abs();
        let in_window = (lo..=hi).contains(&last);
        ok &= in_window && rel <= 0.10;
        let full = (1.0 - gamma).ln();
        parts.push(format!(
            "gamma={gamma}: dist(T)={last:.2e} in [{lo:.0e},{hi:.0e}] {}, slope {slope:.4} vs {bound:.4} (rel {rel:.2}, <= 0.10) {} [ln(1-gamma) = {full:.4}, rel {:.3}]",
            if in_window { "ok" } else { "no" },
            if rel <= 0.10 { "ok" } else { "no" },
            ((slope - full) / full).abs()
        ));
    }
    let dt = start.elapsed();
    ok &= dt < Duration::from_secs(30);
    parts.push(format!("{:.1} s (< 30 s)", secs(dt)));
    check(ok, parts.join("; "))
}

fn zero_capacity_classes() -> Outcome {
    let start = Instant::now();
    let u = inputs(3000, 0.0, 1.0);
    let settings = TipcSettings::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [
        NoiseKind::OverRotationRx,
        NoiseKind::OverRotationRz,
        NoiseKind::BitFlip,
        NoiseKind::PhaseFlip,
        NoiseKind::PhaseDamping,
        NoiseKind::Depolarizing,
    ] {
        let c = QnrConfig::new(4, vec![NoiseSpec::new(kind, 0.1)], 7);
        let (x, w) = analysed_window(&c, &u, 1000);
        let p = analyze(&x, &w, &settings).unwrap().profile;
        let good = p.rank == 0 && p.is_empty();
        ok &= good;
        parts.push(format!("{} r={}", kind.label(), p.rank));
    }
    for kind in [NoiseKind::CnotBias, NoiseKind::EntanglerOneHop, NoiseKind::EntanglerTwoHop] {
        let c = QnrConfig::new(4, vec![NoiseSpec::new(kind, 0.1)], 7);
        let (x, w) = analysed_window(&c, &u, 1000);
        let p = analyze(&x, &w, &settings).unwrap().profile;
        ok &= p.tiv_total == 0.0 && p.tv_total > 0.0;
        parts.push(format!("{} TIV={:.3} TV={:.3}", kind.label(), p.tiv_total, p.tv_total));
    }
    let dt = start.elapsed();
    ok &= dt < Duration::from_secs(120);
    parts.push(format!("{:.1} s (< 120 s)", secs(dt)));
    check(ok, parts.join(", "))
}

fn damping_induces_tiv() -> Outcome {
    let u = inputs(3000, 0.0, 1.0);
    let settings = TipcSettings::default();
    let gammas = [0.02, 0.05, 0.1, 0.2];
    let mut fractions = Vec::new();
    let mut all_positive = true;
    for g in gammas {
        let c = QnrConfig::new(4, vec![NoiseSpec::new(NoiseKind::AmplitudeDamping, g)], 7);
        let (x, w) = analysed_window(&c, &u, 1000);
        let p = analyze(&x, &w, &settings).unwrap().profile;
        all_positive &= p.tiv_total > 0.0;
        fractions.push(p.tiv_fraction());
    }
    let inversions = (0..fractions.len())
        .flat_map(|i| (i + 1..fractions.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| fractions[i] > fractions[j])
        .count();

    let us = inputs(3000, -1.0, 1.0);
    let sym = TipcSettings {
        input_range: InputRange::SYMMETRIC,
        ..TipcSettings::default()
    };
    let c = QnrConfig::new(4, vec![NoiseSpec::new(NoiseKind::AmplitudeDamping, 0.1)], 7);
    let (x, w) = analysed_window(&c, &us, 1000);
    let p = analyze(&x, &w, &sym).unwrap().profile;
    let first = p.degree(1).map_or(0.0, |d| d.tiv);
    let th = p.threshold.value().unwrap_or(0.0);
    let shown: Vec<String> = fractions.iter().map(|f| format!("{f:.3}")).collect();
    check(
        all_positive && inversions <= 1 && first <= th,
        format!(
            "TIV fraction for gamma {gammas:?}: [{}], {inversions} inversion(s) (<= 1), TIV>0 all: {all_positive}; symmetric first-order TIV {first:.3e} <= threshold {th:.3e}",
            shown.join(", ")
        ),
    )
}

fn narma_desk() -> (Outcome, f64) {
    let start = Instant::now();
    let desk = commands::train_metrics(&ExperimentConfig::preset(Preset::Desk)).unwrap();
    let dt = start.elapsed();
    let paper = commands::train_metrics(&ExperimentConfig::preset(Preset::Paper)).unwrap();
    let ok = desk.eval_nrmse <= 0.30
        && (paper.eval_nrmse - 0.21).abs() <= 0.05
        && dt < Duration::from_secs(600);
    (
        check(
            ok,
            format!(
                "desk eval NRMSE {:.4} (<= 0.30) in {:.1} s (< 600 s); full-length eval NRMSE {:.4} (0.21 +- 0.05)",
                desk.eval_nrmse,
                secs(dt),
                paper.eval_nrmse
            ),
        ),
        desk.eval_nrmse,
    )
}

fn esn_parity(qnr_nrmse: f64) -> Outcome {
    let mut cfg = ExperimentConfig::preset(Preset::Desk);
    cfg.reservoir = Reservoir::Esn(EsnSweep {
        n_nodes: 50,
        spectral_radius: 0.6,
        input_scaling: 0.1,
        internal_density: 0.5,
        input_density: 0.1,
        configurations: 10,
    });
    let m = commands::train_metrics(&cfg).unwrap();
    let gap = (m.eval_nrmse - qnr_nrmse).abs();
    check(
        gap <= 0.05,
        format!(
            "ESN(50, rho=0.6) mean eval NRMSE {:.4} +- {:.4} over {} configs vs QNR {:.4}: gap {gap:.4} (<= 0.05)",
            m.eval_nrmse,
            m.eval_nrmse_std,
            m.runs.len(),
            qnr_nrmse
        ),
    )
}

fn narma_ipc() -> Outcome {
    let start = Instant::now();
    let washout = 1000;
    let t = 20_000;
    let u = inputs(washout + t, -1.0, 1.0);
    let y = narma2(&u);
    let settings = TipcSettings {
        input_range: InputRange::SYMMETRIC,
        threshold: Threshold::Shuffle {
            surrogates: 200,
            sigma: 1.2,
            seed: 42,
        },
        ..TipcSettings::default()
    };
    let r = ipc_of_target(&y[washout..], &u[washout..], &settings).unwrap();
    let dt = start.elapsed();
    let mut ok = dt < Duration::from_secs(300);
    let mut parts = Vec::new();
    for (label, want) in [("P1(u[t])", 0.585), ("P1(u[t-1])", 0.145), ("P1(u[t-2])", 0.111)] {
        let rec = r.records.iter().find(|c| c.label == label);
        let c = rec.filter(|c| !c.truncated).map_or(0.0, |c| c.capacity);
        let good = (c - want).abs() <= 0.03;
        ok &= good;
        parts.push(format!("{label} {c:.3} vs {want} {}", if good { "ok" } else { "no" }));
    }
    let mut kept: Vec<_> = r.records.iter().filter(|c| !c.truncated).collect();
    kept.sort_by(|a, b| b.capacity.total_cmp(&a.capacity));
    let top: Vec<String> = kept.iter().take(4).map(|c| format!("{} {:.3}", c.label, c.capacity)).collect();
    parts.push(format!("largest: [{}]", top.join(", ")));
    parts.push(format!("{:.1} s (< 300 s)", secs(dt)));
    check(ok, parts.join("; "))
}

fn linear_completeness() -> Outcome {
    let t = 2000;
    let u = inputs(t, 0.0, 1.0);
    let (a, b) = ([0.2, 0.5], [1.0, -0.7]);
    let mut rows = vec![vec![0.0; 2]; t];
    for i in 0..t {
        for k in 0..2 {
            let prev = if i > 0 { rows[i - 1][k] } else { 0.0 };
            rows[i][k] = a[k] * prev + b[k] * u[i];
        }
    }
    let x = StateMatrix::from_rows(&rows, Provenance::Simulated).unwrap();
    let r = analyze(&x, &u, &TipcSettings::default()).unwrap();
    let p = &r.profile;
    let rank = p.rank as f64;
    let all: f64 = r.records.iter().map(|c| c.capacity).sum();
    check(
        p.rank == 2 && (p.total - rank).abs() <= 0.01 * rank && p.tv_total == 0.0,
        format!(
            "r={}, retained sum {:.5} (within 1% of r), untruncated sum {all:.8}, TV {:.3e}",
            p.rank, p.total, p.tv_total
        ),
    )
}

fn chi2_calibration() -> Outcome {
    let washout = 1000;
    let t = 2000;
    let u = uniform_inputs(washout + t, 0.0, 1.0, &mut rng::stream(43, 0, Purpose::Inputs));
    let c = QnrConfig::new(
        4,
        vec![
            NoiseSpec::new(NoiseKind::AmplitudeDamping, 0.1),
            NoiseSpec::new(NoiseKind::CnotBias, 0.1),
        ],
        5,
    );
    let (x, w) = analysed_window(&c, &u, washout);
    let caps = BasisCaps {
        max_degree: 3,
        max_input_delay: 17,
        max_state_delay: 0,
    };
    let h = caps.history();
    let norm = normalize_states_from(&x, h, 1e-8).unwrap();
    let terms: Vec<_> = enumerate_bases(&caps, 0, BasisFamily::Legendre, 20_000)
        .unwrap()
        .into_iter()
        .take(1000)
        .collect();
    let ev = BasisEvaluator::new(&w, None, BasisFamily::Legendre, InputRange::UNIT, h).unwrap();
    let mut cs = surrogate_capacities(&norm.p(), &ev, &w, &terms, 1, 77).unwrap().remove(0);
    cs.sort_by(f64::total_cmp);
    let q = cs[(0.99 * cs.len() as f64).ceil() as usize - 1];
    let t_eff = t - h;
    let expect = chi2_upper_quantile(norm.rank(), 1e-2).unwrap() / t_eff as f64;
    let rel = (q - expect).abs() / expect;
    check(
        norm.rank() == 4 && cs.len() == 1000 && rel <= 0.15,
        format!(
            "rank {}, {} shuffled terms, empirical 99% quantile {q:.4e} vs {expect:.4e}: rel {rel:.3} (<= 0.15)",
            norm.rank(),
            cs.len()
        ),
    )
}

fn ingest_round_trip() -> Outcome {
    let t = 200;
    let u = inputs(t, 0.0, 1.0);
    let base = QnrConfig::new(4, vec![], 0);
    let parts: Vec<StateMatrix> = default_masks(3)
        .into_iter()
        .enumerate()
        .map(|(i, m)| run_qnr(&instance_config(&base, m, 0.1, 42, i as u64), &u).unwrap())
        .collect();
    let x = spatial_multiplex(&parts).unwrap();
    let settings = TipcSettings::default();
    let direct = analyze(&x, &u, &settings).unwrap();

    let dir = tempfile::tempdir().unwrap();
    write_series(&dir.path().join("u.csv"), &u).unwrap();
    write_states(&dir.path().join("x.csv"), &x).unwrap();
    let bundle = TraceBundle {
        inputs: dir.path().join("u.csv"),
        states: vec![dir.path().join("x.csv")],
        metadata: TraceMetadata::default(),
    };
    commands::ingest(&bundle, &dir.path().join("store")).unwrap();
    let (ingested, _) = commands::tipc_ingested(&dir.path().join("store"), &settings, &dir.path().join("tipc")).unwrap();
    let a = serde_json::to_string(&direct).unwrap();
    let b = serde_json::to_string(&ingested).unwrap();
    let bits = |r: &qnr_core::tipc::TipcReport| -> Vec<u64> { r.records.iter().map(|c| c.capacity.to_bits()).collect() };
    check(
        x.n_steps() == 200 && x.n_features() == 12 && a == b && bits(&direct) == bits(&ingested) && direct == ingested,
        format!(
            "{}x{} damped trace, rank {}, {} records, CSV round trip bit-identical: {}",
            x.n_steps(),
            x.n_features(),
            direct.profile.rank,
            direct.records.len(),
            a == b
        ),
    )
}

fn main() {
    let total = Instant::now();
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "{} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            secs(t.elapsed())
        );
        results.push((name.to_string(), o));
    };
    run("criterion 1 (noiseless null computation)", &mut noiseless_null);
    run("criterion 2 (channel oracles)", &mut channel_oracles);
    run("criterion 3 (ESP decay)", &mut esp_decay);
    run("criterion 4 (zero-capacity noise classes)", &mut zero_capacity_classes);
    run("criterion 5 (damping induces TIV capacity)", &mut damping_induces_tiv);
    let mut qnr_nrmse = f64::NAN;
    run("criterion 6 (NARMA2 regression)", &mut || {
        let (o, e) = narma_desk();
        qnr_nrmse = e;
        o
    });
    run("criterion 7 (ESN parity)", &mut || esn_parity(qnr_nrmse));
    run("criterion 8 (NARMA2 task IPC)", &mut narma_ipc);
    run("criterion 9 (TIPC completeness)", &mut linear_completeness);
    run("criterion 10 (chi-squared calibration)", &mut chi2_calibration);
    run("ingest (200x12 CSV round trip)", &mut ingest_round_trip);
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| n.as_str()).collect();
    println!(
        "acceptance: {} of {} passed in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        secs(total.elapsed())
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join("; "));
        std::process::exit(1);
    }
}
