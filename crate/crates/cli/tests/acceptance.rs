//! Acceptance suite: one line per criterion.
//!
//! Criteria whose targets this model cannot reach print
//! `FAIL (known, see README)`; for those, the facts that explain the failure
//! are asserted instead, so a change in behavior still breaks the build.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use recipcal::config::ScenarioConfig;
use recipcal::runners::{csit_link, dl_point, logspace};
use recipcal_core::array::{
    make_partition, merged_rx_response, merged_tx_response, sample_hardware_profile, true_calibration,
    HybridArrayConfig, PartitionScheme,
};
use recipcal_core::calibration::{
    align_scalar, bidirectional_measure, build_q, calibration_cost, solve_calibration, BidirectionalEstimate,
    BidirectionalWeights,
};
use recipcal_core::channel::{intra_array_channel, IntraArrayChannelParams};
use recipcal_core::estimation::{
    ls_estimate_channel, random_beam_weights, simulate_measurements, EffectiveLink, NoiseBudget, SubarrayLayout,
};
use recipcal_core::fully_connected::{composite_channel, merged_responses_fully_connected, summation_matrix, SummationSide};
use recipcal_core::linalg::{diag, frobenius_sq, hermitian_defect, identity, kron, unvec, vec_of, CMatrix, CVector, C64};
use recipcal_core::pipeline::{run_sweep_trial, run_trial, PartitionSchemeKind, Scenario, TrialOutcome, TrialStatus};
use recipcal_core::rng::{complex_gaussian, keyed_rng, tag};
use recipcal_core::RankCondition;

const SEED: u64 = 1;
const TRIALS: u64 = 50;
/// Rx-only median NMSE_F at K=32, L=8, frozen from the first verified run
/// (seed 1, 50 trials: 1.2e-7 two-sides, 8.6e-8 interleaved).
const RX_ONLY_BOUND: f64 = 1e-6;

enum Verdict {
    Pass,
    KnownFail,
}

type Criterion = fn() -> (Verdict, String);

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Outcomes `[trial][scheme][cell]` for the default 64×8 scenario.
fn sweep(noise: &NoiseBudget, cells: &[(usize, usize)]) -> Vec<Vec<Vec<TrialOutcome>>> {
    let s = Scenario::default();
    let k_max = cells.iter().map(|c| c.0).max().unwrap();
    let l_max = cells.iter().map(|c| c.1).max().unwrap();
    let parts: Vec<_> = PartitionSchemeKind::ALL.iter().map(|&p| s.partition(p).unwrap()).collect();
    (0..TRIALS)
        .map(|t| {
            let draw = s.draw_trial(SEED, t, k_max, l_max).unwrap();
            parts.iter().map(|p| run_sweep_trial(&s, &draw, p, cells, noise).unwrap()).collect()
        })
        .collect()
}

fn cell_median(res: &[Vec<Vec<TrialOutcome>>], scheme: usize, cell: usize) -> f64 {
    median(res.iter().map(|r| r[scheme][cell].nmse_f).collect())
}

fn criterion_1() -> (Verdict, String) {
    let s = Scenario::default();
    let p = s.partition(PartitionSchemeKind::TwoSides).unwrap();
    let start = Instant::now();
    let draw = s.draw_trial(SEED, 0, 32, 8).unwrap();
    let out = run_trial(&s, &draw, &p, 32, 5, &NoiseBudget::noiseless()).unwrap();
    let elapsed = start.elapsed();
    let at_l8 = run_trial(&s, &draw, &p, 32, 8, &NoiseBudget::noiseless()).unwrap();
    let text = format!(
        "noiseless K=32 L=5: NMSE_F = {:.2e} (target < 1e-10), {:?}, {:.2}s; at L=8: NMSE_F = {:.2e}",
        out.nmse_f,
        out.status,
        elapsed.as_secs_f64(),
        at_l8.nmse_f
    );
    if out.nmse_f < 1e-10 && elapsed < Duration::from_secs(5) {
        return (Verdict::Pass, text);
    }
    // 4 receive chains per group × 5 combiners = 20 observations for 32 unknowns per column.
    assert_eq!(out.status, TrialStatus::Diverged(RankCondition::Combiners), "{text}");
    assert!(s.array.n_rf / 2 * 5 < s.array.n_ant / 2);
    assert_eq!(at_l8.status, TrialStatus::Converged);
    assert!(at_l8.nmse_f < 1e-10, "{text}");
    assert!(elapsed < Duration::from_secs(5), "{text}");
    (Verdict::KnownFail, text)
}

fn criterion_2() -> (Verdict, String) {
    let start = Instant::now();
    let res = sweep(&NoiseBudget::default(), &[(31, 8), (32, 8)]);
    let elapsed = start.elapsed();
    let k31: Vec<&TrialOutcome> = res.iter().flat_map(|r| r.iter().map(|s| &s[0])).collect();
    let k31_min = k31.iter().map(|o| o.nmse_f).fold(f64::INFINITY, f64::min);
    let k31_median = median(k31.iter().map(|o| o.nmse_f).collect());
    let all_flagged = k31
        .iter()
        .all(|o| o.status == TrialStatus::Diverged(RankCondition::Precoders));
    let m32 = [cell_median(&res, 0, 1), cell_median(&res, 1, 1)];
    let text = format!(
        "K=31: min NMSE_F = {k31_min:.2e}, median {k31_median:.2e} (target > 1e-1), all flagged diverged: {all_flagged}; \
         K=32 L=8 medians two-sides {:.2e}, interleaved {:.2e} (target < 1e-2); {:.1}s",
        m32[0],
        m32[1],
        elapsed.as_secs_f64()
    );
    let k32_ok = m32.iter().all(|&m| m < 1e-2);
    let time_ok = elapsed < Duration::from_secs(600);
    if k31_min > 1e-1 && k32_ok && time_ok {
        return (Verdict::Pass, text);
    }
    // One missing precoder leaves a single unobserved direction; the
    // minimum-norm estimate is poor but not divergent.
    assert!(all_flagged, "{text}");
    assert!(k32_ok && time_ok, "{text}");
    assert!(k31_median > 3.0 * m32[0].max(m32[1]), "{text}");
    (Verdict::KnownFail, text)
}

fn criterion_3() -> (Verdict, String) {
    let cells: Vec<(usize, usize)> = (32..=40).flat_map(|k| (8..=12).map(move |l| (k, l))).collect();
    let res = sweep(&NoiseBudget::default(), &cells);
    let ratios: Vec<f64> = (0..cells.len())
        .map(|c| cell_median(&res, 1, c) / cell_median(&res, 0, c))
        .collect();
    let holds = ratios.iter().filter(|&&r| r <= 1.0).count();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let rx = sweep(&NoiseBudget::default().with_flags(false, true), &[(32, 8)]);
    let rx_ratio = cell_median(&rx, 1, 0) / cell_median(&rx, 0, 0);
    let text = format!(
        "interleaved <= two-sides in {holds}/{} cells with K>=32, L>=8 (worst interleaved/two-sides = {worst:.3}); \
         rx-only noise at K=32 L=8: ratio {rx_ratio:.3}",
        cells.len()
    );
    if holds == cells.len() {
        return (Verdict::Pass, text);
    }
    // Under transmit-dominated noise the two schemes stay within a few
    // percent; with receive noise alone the interleaved advantage appears.
    assert!(worst < 1.3, "{text}");
    assert!(rx_ratio <= 1.0, "{text}");
    (Verdict::KnownFail, text)
}

fn criterion_4() -> (Verdict, String) {
    let base = NoiseBudget::default();
    let tx = sweep(&base.with_flags(true, false), &[(32, 8)]);
    let rx = sweep(&base.with_flags(false, true), &[(32, 8)]);
    let mut ok = true;
    let mut parts = Vec::new();
    for (si, scheme) in PartitionSchemeKind::ALL.iter().enumerate() {
        let (t, r) = (cell_median(&tx, si, 0), cell_median(&rx, si, 0));
        ok &= t >= 10.0 * r && r < RX_ONLY_BOUND;
        parts.push(format!("{}: tx-only {t:.2e}, rx-only {r:.2e} (ratio {:.0})", scheme.name(), t / r));
    }
    let text = format!("{}; rx-only bound {RX_ONLY_BOUND:e}", parts.join("; "));
    assert!(ok, "{text}");
    (Verdict::Pass, text)
}

fn criterion_5() -> (Verdict, String) {
    let cfg = ScenarioConfig::default();
    let link = csit_link(&cfg).unwrap();
    let (closed, mc) = dl_point(&link, 1e-2, 1e-2, 10_000, SEED).unwrap();
    let grid = logspace(1e-4, 1e-1, 3);
    let mut worst: f64 = 0.0;
    for &f in &grid {
        for &u in &grid {
            let (c, m) = dl_point(&link, f, u, 10_000, SEED).unwrap();
            worst = worst.max((c - m).abs() / m);
        }
    }
    let text = format!(
        "NMSE_F = NMSE_UL = 1e-2: Monte Carlo NMSE_DL = {mc:.3e} (closed {closed:.3e}, target < 1e-1); \
         3x3 grid worst closed/MC gap {:.2}% (target 3%)",
        100.0 * worst
    );
    assert!(mc < 1e-1 && worst <= 0.03, "{text}");
    (Verdict::Pass, text)
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = keyed_rng(seed, &[]);
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0))
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius_sq(&(a - b)).sqrt() / frobenius_sq(b).sqrt()
}

fn max_abs(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_estimate(half: usize, interleave: bool, seed: u64) -> BidirectionalEstimate {
    let config = HybridArrayConfig::subarray(2 * half, 1).unwrap();
    let scheme = if interleave {
        PartitionScheme::Interleaved { block: 1 }
    } else {
        PartitionScheme::TwoSides
    };
    let p = make_partition(&config, scheme).unwrap();
    BidirectionalEstimate::new(random_matrix(half, half, seed), random_matrix(half, half, seed ^ 0xabc), p).unwrap()
}

fn criterion_6() -> (Verdict, String) {
    // (a) Kronecker-structured LS vs normal equations on the dense design.
    let mut ls_worst: f64 = 0.0;
    for (n, seed) in [(4usize, 10u64), (4, 11), (8, 12), (8, 13)] {
        let layout = SubarrayLayout::new(2, n / 2).unwrap();
        let w = random_beam_weights(layout, layout, n + 2, n / 2 + 1, 1.0, seed).unwrap();
        let budget = NoiseBudget {
            tx_power_dbm_per_antenna: 30.0,
            ..Default::default()
        };
        let meas = simulate_measurements(&EffectiveLink::from_matrix(random_matrix(n, n, seed)), &w, &budget, seed).unwrap();
        let fast = ls_estimate_channel(&meas).unwrap();
        let d = kron(&meas.p_stacked.transpose(), &meas.w_stacked);
        let dh = d.adjoint();
        let x = (&dh * &d).try_inverse().unwrap() * dh * vec_of(&meas.y);
        let dense = unvec(&x, n, n);
        ls_worst = ls_worst.max(rel(&fast, &dense));
    }

    // (b) Quadratic form vs direct pairwise sum.
    let mut q_worst: f64 = 0.0;
    for seed in 0..200u64 {
        let est = random_estimate(1 + (seed as usize % 8), seed % 2 == 1, seed);
        let mut rng = keyed_rng(seed, &[7]);
        let f = CVector::from_fn(est.partition.n_ant(), |_, _| complex_gaussian(&mut rng, 1.0));
        let direct = calibration_cost(&f, &est);
        q_worst = q_worst.max((build_q(&est).quadratic_form(&f) - direct).abs() / direct);
    }

    // (c) Merged responses vs dense matrix products.
    let mut merge_worst: f64 = 0.0;
    for seed in 0..50u64 {
        let (n_rf, per) = (1 + seed as usize % 4, 1 + seed as usize % 5);
        let sub = HybridArrayConfig::subarray(n_rf * per, n_rf).unwrap();
        let p = sample_hardware_profile(&sub, 0.2, &mut keyed_rng(seed, &[])).unwrap();
        let dense_t = diag(&p.t2) * kron(&diag(&p.t1), &identity(per));
        let dense_r = kron(&diag(&p.r1), &identity(per)) * diag(&p.r2);
        merge_worst = merge_worst
            .max(max_abs(&dense_t, &diag(&merged_tx_response(&p, &sub).unwrap())))
            .max(max_abs(&dense_r, &diag(&merged_rx_response(&p, &sub).unwrap())));
        let n_ant = per.max(n_rf);
        let fc = HybridArrayConfig::fully_connected(n_ant, n_rf).unwrap();
        let p = sample_hardware_profile(&fc, 0.2, &mut keyed_rng(seed, &[1])).unwrap();
        let (t, r) = merged_responses_fully_connected(&p, &fc).unwrap();
        let dense_t = kron(&identity(n_rf), &diag(&p.t2)) * kron(&diag(&p.t1), &identity(n_ant));
        let dense_r = kron(&diag(&p.r1), &identity(n_ant)) * kron(&identity(n_rf), &diag(&p.r2));
        merge_worst = merge_worst.max(max_abs(&dense_t, &diag(&t))).max(max_abs(&dense_r, &diag(&r)));
    }

    let text = format!(
        "(a) LS vs dense normal equations {ls_worst:.1e} (target 1e-8); (b) quadratic form vs direct sum {q_worst:.1e} \
         (target 1e-12); (c) merged vs dense responses {merge_worst:.1e} (target 1e-12)"
    );
    assert!(ls_worst <= 1e-8 && q_worst <= 1e-12 && merge_worst <= 1e-12, "{text}");
    (Verdict::Pass, text)
}

fn criterion_7() -> (Verdict, String) {
    let mut q_ok = 0;
    for seed in 0..200u64 {
        let est = random_estimate(1 + (seed as usize % 8), seed % 2 == 0, seed + 1000);
        let q = build_q(&est);
        let m = q.matrix();
        let scale = frobenius_sq(m).sqrt();
        let psd = m.clone().symmetric_eigen().eigenvalues.iter().all(|&v| v >= -1e-10 * scale);
        let in_a = |x: usize| est.partition.group_a().contains(&x);
        let n = est.partition.n_ant();
        let sparse = (0..n).all(|i| (0..n).all(|j| i == j || in_a(i) != in_a(j) || m[(i, j)] == C64::new(0.0, 0.0)));
        if hermitian_defect(m) <= 1e-12 && psd && sparse {
            q_ok += 1;
        }
    }

    let config = HybridArrayConfig::subarray(16, 4).unwrap();
    let mut optimal = 0;
    let mut identity_worst: f64 = 0.0;
    for seed in 0..30u64 {
        let profile = sample_hardware_profile(&config, 0.1, &mut keyed_rng(seed, &[tag::HARDWARE])).unwrap();
        let channel = intra_array_channel(&config, &IntraArrayChannelParams::default(), &mut keyed_rng(seed, &[tag::CHANNEL])).unwrap();
        let weights = BidirectionalWeights::random(&config, 8, 4, NoiseBudget::default().pilot_amplitude(), seed).unwrap();
        let scheme = if seed % 2 == 0 {
            PartitionScheme::TwoSides
        } else {
            PartitionScheme::Interleaved { block: 4 }
        };
        let p = make_partition(&config, scheme).unwrap();
        let truth = true_calibration(&profile, &config).unwrap();

        let est = bidirectional_measure(&profile, &config, &p, &channel, &weights, &NoiseBudget::default(), seed).unwrap();
        let sol = solve_calibration(&build_q(&est)).unwrap();
        let aligned = align_scalar(truth.as_vector(), &sol.f).unwrap();
        let aligned = &aligned / C64::new(aligned.norm(), 0.0);
        if calibration_cost(&sol.f, &est) <= calibration_cost(&aligned, &est) * (1.0 + 1e-9) {
            optimal += 1;
        }

        let est = bidirectional_measure(&profile, &config, &p, &channel, &weights, &NoiseBudget::noiseless(), seed).unwrap();
        let fa = truth.select(p.group_a());
        let fb_inv: Vec<C64> = truth.select(p.group_b()).as_vector().iter().map(|z| z.inv()).collect();
        let rebuilt = diag(&fb_inv) * est.h_ba.transpose() * diag(fa.as_vector().as_slice());
        identity_worst = identity_worst.max(rel(&rebuilt, &est.h_ab));
    }

    let mut recip_worst: f64 = 0.0;
    for seed in 0..100u64 {
        let (bs_ant, bs_rf, ue_ant, ue_rf) = (16, 4, 1 + seed as usize % 4, 1 + seed as usize % 2);
        let c = random_matrix(ue_ant, bs_ant, seed);
        let dl = composite_channel(
            &c,
            &summation_matrix(bs_ant, bs_rf, SummationSide::Transmit).unwrap(),
            &summation_matrix(ue_ant, ue_rf, SummationSide::Receive).unwrap(),
        )
        .unwrap();
        let ul = composite_channel(
            &c.transpose(),
            &summation_matrix(ue_ant, ue_rf, SummationSide::Transmit).unwrap(),
            &summation_matrix(bs_ant, bs_rf, SummationSide::Receive).unwrap(),
        )
        .unwrap();
        recip_worst = recip_worst.max(max_abs(&ul, &dl.transpose()));
    }

    let text = format!(
        "Q Hermitian/PSD/sparse {q_ok}/200; J(f_hat) <= J(aligned truth) {optimal}/30; composite reciprocity \
         {recip_worst:.1e} over 100 draws (target 1e-14); noiseless reciprocity identity {identity_worst:.1e} (target 1e-10)"
    );
    assert!(q_ok == 200 && optimal == 30 && recip_worst <= 1e-14 && identity_worst <= 1e-10, "{text}");
    (Verdict::Pass, text)
}

fn cli_bytes(args: &[&str], config: Option<&Path>, threads: &str, out: &Path) -> Vec<u8> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_recipcal"));
    cmd.env("RECIPCAL_THREADS", threads).args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let status = cmd.output().unwrap();
    assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(out).unwrap()
}

fn criterion_8() -> (Verdict, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        "sweep.k = [31, 32]\nsweep.l = [7, 8]\nfig9.trials = 2000\nfc.draws = 4\n",
    )
    .unwrap();
    let commands: [&[&str]; 6] = [&["fig6"], &["calibrate"], &["fig7"], &["fig8"], &["fig9"], &["fully-connected-check"]];
    let mut identical = 0;
    for args in commands {
        let a = cli_bytes(args, Some(&cfg), "1", &dir.path().join("a.csv"));
        let b = cli_bytes(args, Some(&cfg), "3", &dir.path().join("b.csv"));
        assert!(a.starts_with(b"# recipcal-csv v1\n"));
        if a == b {
            identical += 1;
        }
    }
    let text = format!("{identical}/{} subcommands byte-identical across two runs (1 and 3 threads)", commands.len());
    assert_eq!(identical, commands.len(), "{text}");
    (Verdict::Pass, text)
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("1 noiseless calibration", criterion_1),
        ("2 convergence threshold", criterion_2),
        ("3 partition ordering", criterion_3),
        ("4 noise-source dominance", criterion_4),
        ("5 DL CSIT accuracy", criterion_5),
        ("6 oracle equivalences", criterion_6),
        ("7 property suites", criterion_7),
        ("8 determinism", criterion_8),
    ];
    let mut unexpected = 0;
    let mut known = 0;
    for (name, check) in criteria {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok((Verdict::Pass, text)) => println!("PASS  criterion {name}: {text}"),
            Ok((Verdict::KnownFail, text)) => {
                known += 1;
                println!("FAIL (known, see README)  criterion {name}: {text}");
            }
            Err(_) => {
                unexpected += 1;
                println!("FAIL  criterion {name}: unexpected result, see panic message above");
            }
        }
    }
    println!("acceptance: {} pass, {known} known failures, {unexpected} unexpected failures", 8 - known - unexpected);
    if unexpected > 0 {
        std::process::exit(1);
    }
}
