//! One function per subcommand. Each validates its slice of the config,
//! runs, and returns the CSV document plus a human-readable summary.

use rayon::prelude::*;
use recipcal_core::array::{sample_hardware_profile_with, HybridArrayConfig};
use recipcal_core::calibration::align_scalar;
use recipcal_core::channel::ChannelMatrix;
use recipcal_core::csit::{nmse_dl_expected, nmse_dl_monte_carlo, CsitErrorModel, SingleUeLink};
use recipcal_core::fully_connected::{
    branch_calibration, calibrate_with_reference, composite_channel, merged_responses_fully_connected,
    reference_weights, summation_matrix, ReferenceDesign, SummationSide,
};
use recipcal_core::linalg::{diag, identity, kron, norm_sq, CMatrix, CVector};
use recipcal_core::pipeline::{run_trial, run_sweep_trial, PartitionSchemeKind, TrialOutcome, TrialStatus};
use recipcal_core::rng::{complex_gaussian, derive_seed, keyed_rng, tag};
use recipcal_core::calibration::aligned_nmse;

use crate::config::{NoiseMode, ScenarioConfig};
use crate::csv_io::{channel_to_csv, fmt_f64, read_channel, write_file, CsvDoc};
use crate::error::{AppError, AppResult};

/// Result of a subcommand. `failure` is set when the data was produced but
/// a check it reports did not pass.
#[derive(Debug)]
pub struct Report {
    pub csv: CsvDoc,
    pub summary: String,
    pub failure: Option<AppError>,
}

impl Report {
    fn ok(csv: CsvDoc, summary: String) -> Self {
        Report {
            csv,
            summary,
            failure: None,
        }
    }
}

/// Worker pool sized by `RECIPCAL_THREADS` when set.
pub fn thread_pool() -> AppResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("RECIPCAL_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| AppError::Config(format!("RECIPCAL_THREADS: expected a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| AppError::Config(format!("RECIPCAL_THREADS: {e}")))
}

fn scenario_meta(doc: &mut CsvDoc, cfg: &ScenarioConfig) {
    let a = &cfg.scenario.array;
    doc.meta("seed", cfg.seed)
        .meta("n_ant", a.n_ant)
        .meta("n_rf", a.n_rf);
}

pub fn run_fig6(cfg: &ScenarioConfig) -> AppResult<Report> {
    cfg.validate_cell("fig6", cfg.fig6)?;
    if let Some(mode) = cfg.noise_mode.filter(|m| *m != NoiseMode::None) {
        return Err(AppError::Config(format!(
            "noise.mode: fig6 is a noiseless run, got `{}`",
            mode.name()
        )));
    }
    let s = &cfg.scenario;
    let (k, l) = (cfg.fig6.k, cfg.fig6.l);
    let draw = s.draw_trial(cfg.seed, 0, k, l)?;
    let partition = s.partition(cfg.partition)?;
    let out = run_trial(s, &draw, &partition, k, l, &cfg.noise(NoiseMode::None))?;
    if let TrialStatus::Diverged(cond) = out.status {
        return Err(AppError::Numerical(format!(
            "fig6.k, fig6.l: K={k}, L={l} is underdetermined ({cond})"
        )));
    }
    let truth = out.truth.as_vector();
    let est = align_scalar(&out.solution.f, truth)?;
    let max_dev = truth.iter().zip(est.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);

    let mut doc = CsvDoc::new(&["index", "chain", "true_re", "true_im", "est_re", "est_im"]);
    doc.meta("command", "fig6");
    scenario_meta(&mut doc, cfg);
    doc.meta("partition", cfg.partition.name())
        .meta("k", k)
        .meta("l", l)
        .meta_f64("max_abs_deviation", max_dev)
        .meta_f64("nmse_f", out.nmse_f);
    for (m, (t, e)) in truth.iter().zip(est.iter()).enumerate() {
        doc.row(vec![
            m.to_string(),
            s.array.chain_of(m).to_string(),
            fmt_f64(t.re),
            fmt_f64(t.im),
            fmt_f64(e.re),
            fmt_f64(e.im),
        ]);
    }
    let summary = format!(
        "fig6: K={k} L={l} partition={} max |f_est - f| = {max_dev:e}, NMSE_F = {:e}",
        cfg.partition.name(),
        out.nmse_f
    );
    Ok(Report::ok(doc, summary))
}

/// Options of the `calibrate` subcommand.
#[derive(Debug, Clone, Default)]
pub struct CalibrateOptions {
    pub channel: Option<std::path::PathBuf>,
    pub export_channel: Option<std::path::PathBuf>,
}

pub fn run_calibrate(cfg: &ScenarioConfig, opts: &CalibrateOptions) -> AppResult<Report> {
    cfg.validate_cell("calibrate", cfg.calibrate)?;
    let s = &cfg.scenario;
    let (k, l) = (cfg.calibrate.k, cfg.calibrate.l);
    let mut draw = s.draw_trial(cfg.seed, 0, k, l)?;
    if let Some(path) = &opts.channel {
        draw.channel = read_channel(path, s.array.n_ant)?;
    }
    if let Some(path) = &opts.export_channel {
        write_file(path, &channel_to_csv(&draw.channel).to_bytes())?;
    }
    let partition = s.partition(cfg.partition)?;
    let noise = cfg.noise(NoiseMode::Both);
    let out = run_trial(s, &draw, &partition, k, l, &noise)?;
    if let TrialStatus::Diverged(cond) = out.status {
        return Err(AppError::Numerical(format!(
            "calibrate.k, calibrate.l: K={k}, L={l} is underdetermined ({cond})"
        )));
    }
    let sol = &out.solution;
    if sol.degenerate {
        return Err(AppError::Numerical(format!(
            "smallest eigenvalue is not isolated (relative gap {:e}); the channel does not determine f",
            sol.relative_gap
        )));
    }

    let mut doc = CsvDoc::new(&["index", "re", "im"]);
    doc.meta("command", "calibrate");
    scenario_meta(&mut doc, cfg);
    doc.meta("partition", cfg.partition.name())
        .meta("noise", cfg.noise_mode.unwrap_or(NoiseMode::Both).name())
        .meta("channel", if opts.channel.is_some() { "file" } else { "simulated" })
        .meta("k", k)
        .meta("l", l)
        .meta_f64("residual", sol.residual)
        .meta_f64("eigen_gap", sol.relative_gap)
        .meta("degenerate", sol.degenerate)
        .meta_f64("nmse_f", out.nmse_f);
    for (m, z) in sol.f.iter().enumerate() {
        doc.row(vec![m.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
    }
    let summary = format!(
        "calibrate: residual J = {:e}, eigen-gap = {:e}, NMSE_F = {:e}",
        sol.residual, sol.relative_gap, out.nmse_f
    );
    Ok(Report::ok(doc, summary))
}

fn sweep_cells(cfg: &ScenarioConfig) -> Vec<(usize, usize)> {
    cfg.sweep_k
        .iter()
        .flat_map(|&k| cfg.sweep_l.iter().map(move |&l| (k, l)))
        .collect()
}

/// Outcomes indexed `[trial][scheme][cell]`.
fn sweep(cfg: &ScenarioConfig, mode: NoiseMode, cells: &[(usize, usize)]) -> AppResult<Vec<Vec<Vec<TrialOutcome>>>> {
    let s = &cfg.scenario;
    let k_max = *cfg.sweep_k.iter().max().expect("validated non-empty");
    let l_max = *cfg.sweep_l.iter().max().expect("validated non-empty");
    let partitions = PartitionSchemeKind::ALL
        .iter()
        .map(|&p| s.partition(p))
        .collect::<Result<Vec<_>, _>>()?;
    let noise = mode.apply(s.noise);
    let pool = thread_pool()?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> AppResult<Vec<Vec<TrialOutcome>>> {
                let draw = s.draw_trial(cfg.seed, t, k_max, l_max)?;
                partitions
                    .iter()
                    .map(|p| run_sweep_trial(s, &draw, p, cells, &noise).map_err(AppError::from))
                    .collect()
            })
            .collect()
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sweep_summary(
    label: &str,
    results: &[Vec<Vec<TrialOutcome>>],
    cells: &[(usize, usize)],
    probe: (usize, usize),
) -> String {
    let mut out = String::new();
    if let Some(c) = cells.iter().position(|&cell| cell == probe) {
        for (si, scheme) in PartitionSchemeKind::ALL.iter().enumerate() {
            let m = median(results.iter().map(|r| r[si][c].nmse_f).collect());
            out.push_str(&format!(
                "{label} {}: median NMSE_F at K={} L={} = {m:e}\n",
                scheme.name(),
                probe.0,
                probe.1
            ));
        }
    }
    let diverged = results.iter().flatten().flatten().filter(|o| o.status != TrialStatus::Converged).count();
    out.push_str(&format!("{label}: {diverged} diverged trial-cells"));
    out
}

fn sweep_header(cfg: &ScenarioConfig, doc: &mut CsvDoc, command: &str) {
    doc.meta("command", command);
    scenario_meta(doc, cfg);
    doc.meta("trials", cfg.trials);
}

pub fn run_fig7(cfg: &ScenarioConfig) -> AppResult<Report> {
    cfg.validate_sweep()?;
    let cells = sweep_cells(cfg);
    let mode = cfg.noise_mode.unwrap_or(NoiseMode::Both);
    let results = sweep(cfg, mode, &cells)?;
    let mut doc = CsvDoc::new(&["scheme", "k", "l", "trial", "nmse_f", "status"]);
    sweep_header(cfg, &mut doc, "fig7");
    doc.meta("noise", mode.name());
    for (si, scheme) in PartitionSchemeKind::ALL.iter().enumerate() {
        for (c, &(k, l)) in cells.iter().enumerate() {
            for (t, r) in results.iter().enumerate() {
                let o = &r[si][c];
                doc.row(vec![
                    scheme.name().into(),
                    k.to_string(),
                    l.to_string(),
                    t.to_string(),
                    fmt_f64(o.nmse_f),
                    o.status.name().into(),
                ]);
            }
        }
    }
    let summary = sweep_summary("fig7", &results, &cells, (32, 8));
    Ok(Report::ok(doc, summary))
}

pub fn run_fig8(cfg: &ScenarioConfig) -> AppResult<Report> {
    cfg.validate_sweep()?;
    if cfg.noise_mode.is_some() {
        return Err(AppError::Config(
            "noise.mode: fig8 always runs tx-only and rx-only; leave it unset".into(),
        ));
    }
    let cells = sweep_cells(cfg);
    let modes = [(NoiseMode::Tx, "tx_only"), (NoiseMode::Rx, "rx_only")];
    let results = modes
        .iter()
        .map(|&(m, _)| sweep(cfg, m, &cells))
        .collect::<AppResult<Vec<_>>>()?;
    let mut doc = CsvDoc::new(&["scheme", "noise_mode", "k", "l", "trial", "nmse_f", "status"]);
    sweep_header(cfg, &mut doc, "fig8");
    for (si, scheme) in PartitionSchemeKind::ALL.iter().enumerate() {
        for (mi, &(_, mode_name)) in modes.iter().enumerate() {
            for (c, &(k, l)) in cells.iter().enumerate() {
                for (t, r) in results[mi].iter().enumerate() {
                    let o = &r[si][c];
                    doc.row(vec![
                        scheme.name().into(),
                        mode_name.into(),
                        k.to_string(),
                        l.to_string(),
                        t.to_string(),
                        fmt_f64(o.nmse_f),
                        o.status.name().into(),
                    ]);
                }
            }
        }
    }
    let summary = [
        sweep_summary("fig8 tx_only", &results[0], &cells, (32, 8)),
        sweep_summary("fig8 rx_only", &results[1], &cells, (32, 8)),
    ]
    .join("\n");
    Ok(Report::ok(doc, summary))
}

/// BS with the scenario's hardware and a single-antenna UE, drawn from `seed`.
pub fn csit_link(cfg: &ScenarioConfig) -> AppResult<SingleUeLink> {
    let s = &cfg.scenario;
    let ue_cfg = HybridArrayConfig::subarray(1, 1)?;
    let bs = sample_hardware_profile_with(&s.array, &s.impairments, &mut keyed_rng(cfg.seed, &[tag::HARDWARE, 0]))?;
    let ue = sample_hardware_profile_with(&ue_cfg, &s.impairments, &mut keyed_rng(cfg.seed, &[tag::HARDWARE, 1]))?;
    Ok(SingleUeLink::from_profiles(&bs, &s.array, &ue, &ue_cfg)?)
}

/// Closed-form and Monte Carlo DL NMSE of one `(NMSE_F, NMSE_UL)` point.
/// Every point reuses the same Monte Carlo seed.
pub fn dl_point(link: &SingleUeLink, nmse_f: f64, nmse_ul: f64, trials: u64, seed: u64) -> AppResult<(f64, f64)> {
    let f = link.calibration();
    let n = link.n_ant();
    let err = CsitErrorModel::from_nmse(nmse_f, nmse_ul, norm_sq(f.as_slice()), n)?;
    let closed = nmse_dl_expected(&link.ul_covariance(), &f, &err)?;
    let mc = nmse_dl_monte_carlo(link, &err, trials, derive_seed(seed, &[tag::CSIT]))?;
    Ok((closed, mc))
}

fn dl_doc(cfg: &ScenarioConfig, command: &str, trials: u64) -> CsvDoc {
    let mut doc = CsvDoc::new(&["nmse_f", "nmse_ul", "nmse_dl_closed", "nmse_dl_mc"]);
    doc.meta("command", command);
    scenario_meta(&mut doc, cfg);
    doc.meta("trials", trials);
    doc
}

pub fn logspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (min.log10(), max.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

pub fn run_fig9(cfg: &ScenarioConfig) -> AppResult<Report> {
    cfg.validate_fig9()?;
    let link = csit_link(cfg)?;
    let grid = logspace(cfg.fig9.min, cfg.fig9.max, cfg.fig9.points);
    let points: Vec<(f64, f64)> = grid.iter().flat_map(|&f| grid.iter().map(move |&u| (f, u))).collect();
    let pool = thread_pool()?;
    let values = pool.install(|| {
        points
            .par_iter()
            .map(|&(f, u)| dl_point(&link, f, u, cfg.fig9.trials, cfg.seed))
            .collect::<AppResult<Vec<_>>>()
    })?;
    let mut doc = dl_doc(cfg, "fig9", cfg.fig9.trials);
    let mut worst: f64 = 0.0;
    for (&(f, u), &(closed, mc)) in points.iter().zip(&values) {
        worst = worst.max((closed - mc).abs() / mc);
        doc.row(vec![fmt_f64(f), fmt_f64(u), fmt_f64(closed), fmt_f64(mc)]);
    }
    let summary = format!(
        "fig9: {} grid points, worst closed-form vs Monte Carlo relative gap {worst:e}",
        points.len()
    );
    Ok(Report::ok(doc, summary))
}

pub fn run_dl_nmse(cfg: &ScenarioConfig) -> AppResult<Report> {
    cfg.validate_dl()?;
    let link = csit_link(cfg)?;
    let (closed, mc) = dl_point(&link, cfg.dl.nmse_f, cfg.dl.nmse_ul, cfg.dl.trials, cfg.seed)?;
    let mut doc = dl_doc(cfg, "dl-nmse", cfg.dl.trials);
    doc.row(vec![fmt_f64(cfg.dl.nmse_f), fmt_f64(cfg.dl.nmse_ul), fmt_f64(closed), fmt_f64(mc)]);
    let summary = format!("dl-nmse: closed form {closed:e}, Monte Carlo {mc:e}");
    Ok(Report::ok(doc, summary))
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
}

fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn run_fully_connected_check(cfg: &ScenarioConfig) -> AppResult<Report> {
    cfg.validate_fully_connected()?;
    let fc = &cfg.fully_connected;
    let bs_cfg = HybridArrayConfig::fully_connected(fc.n_ant, fc.n_rf)?;
    let ue_cfg = HybridArrayConfig::fully_connected(fc.ue_n_ant, fc.ue_n_rf)?;
    let imp = &cfg.scenario.impairments;
    let mode = cfg.noise_mode.unwrap_or(NoiseMode::None);
    let noise = mode.apply(cfg.scenario.noise);
    let design = ReferenceDesign::minimal(&bs_cfg, &ue_cfg);

    let u_bs_t = summation_matrix(fc.n_ant, fc.n_rf, SummationSide::Transmit)?;
    let u_bs_r = summation_matrix(fc.n_ant, fc.n_rf, SummationSide::Receive)?;
    let u_ue_t = summation_matrix(fc.ue_n_ant, fc.ue_n_rf, SummationSide::Transmit)?;
    let u_ue_r = summation_matrix(fc.ue_n_ant, fc.ue_n_rf, SummationSide::Receive)?;

    let per_draw = |d: u64| -> AppResult<[f64; 3]> {
        let bs = sample_hardware_profile_with(&bs_cfg, imp, &mut keyed_rng(cfg.seed, &[tag::TRIAL, d, tag::HARDWARE, 0]))?;
        let ue = sample_hardware_profile_with(&ue_cfg, imp, &mut keyed_rng(cfg.seed, &[tag::TRIAL, d, tag::HARDWARE, 1]))?;
        let mut rng = keyed_rng(cfg.seed, &[tag::TRIAL, d, tag::CHANNEL]);
        let c = CMatrix::from_fn(fc.ue_n_ant, fc.n_ant, |_, _| complex_gaussian(&mut rng, 1.0));

        let ul = composite_channel(&c.transpose(), &u_ue_t, &u_bs_r)?;
        let dl = composite_channel(&c, &u_bs_t, &u_ue_r)?;
        let reciprocity = max_abs_diff(&ul, &dl.transpose());

        let (t, r) = merged_responses_fully_connected(&bs, &bs_cfg)?;
        let dense_t = kron(&identity(fc.n_rf), &diag(&bs.t2)) * kron(&diag(&bs.t1), &identity(fc.n_ant));
        let dense_r = kron(&diag(&bs.r1), &identity(fc.n_ant)) * kron(&identity(fc.n_rf), &diag(&bs.r2));
        let kron_dev = max_abs_diff(&dense_t, &diag(&t)).max(max_abs_diff(&dense_r, &diag(&r)));

        let weights = reference_weights(
            &bs_cfg,
            &ue_cfg,
            design,
            cfg.scenario.noise.pilot_amplitude(),
            derive_seed(cfg.seed, &[tag::TRIAL, d, tag::WEIGHTS]),
        )?;
        let cal = calibrate_with_reference(
            &bs,
            &bs_cfg,
            &ue,
            &ue_cfg,
            &ChannelMatrix::new(c),
            &weights,
            &noise,
            derive_seed(cfg.seed, &[tag::TRIAL, d, tag::MEASURE]),
        )?;
        let truth: CVector = branch_calibration(&bs, &bs_cfg)?;
        let nmse = aligned_nmse(&cal.bs_part(), &truth)?;
        Ok([reciprocity, kron_dev, nmse])
    };
    let pool = thread_pool()?;
    let per = pool.install(|| (0..fc.draws).into_par_iter().map(per_draw).collect::<AppResult<Vec<_>>>())?;

    let worst = |i: usize| per.iter().map(|v| v[i]).fold(0.0, f64::max);
    let nmse_median = median(per.iter().map(|v| v[2]).collect());
    let checks = [
        Check {
            name: "composite_reciprocity_max_abs",
            value: worst(0),
            threshold: 1e-14,
        },
        Check {
            name: "kronecker_merge_max_abs",
            value: worst(1),
            threshold: 1e-12,
        },
        Check {
            name: "reference_calibration_median_nmse",
            value: nmse_median,
            threshold: if mode == NoiseMode::None { 1e-10 } else { 1e-2 },
        },
    ];

    let mut doc = CsvDoc::new(&["check", "value", "threshold", "pass"]);
    doc.meta("command", "fully-connected-check")
        .meta("seed", cfg.seed)
        .meta("bs_n_ant", fc.n_ant)
        .meta("bs_n_rf", fc.n_rf)
        .meta("ue_n_ant", fc.ue_n_ant)
        .meta("ue_n_rf", fc.ue_n_rf)
        .meta("draws", fc.draws)
        .meta("noise", mode.name());
    let mut failed = Vec::new();
    for ch in &checks {
        let pass = ch.value <= ch.threshold;
        if !pass {
            failed.push(ch.name);
        }
        doc.row(vec![ch.name.into(), fmt_f64(ch.value), fmt_f64(ch.threshold), pass.to_string()]);
    }
    let summary = checks
        .iter()
        .map(|c| {
            let verdict = if c.value <= c.threshold { "pass" } else { "FAIL" };
            format!("{verdict} {}: {:e} (threshold {:e})", c.name, c.value, c.threshold)
        })
        .collect::<Vec<_>>()
        .join("\n");
    let failure = (!failed.is_empty()).then(|| AppError::Numerical(format!("checks failed: {}", failed.join(", "))));
    Ok(Report {
        csv: doc,
        summary,
        failure,
    })
}
