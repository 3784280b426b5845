//! Scenario configuration, seeded Monte Carlo orchestration, figure presets,
//! and CSV emission.
//!
//! An [`ExperimentSpec`] names a [`Scenario`], a base [`SystemConfig`], and a
//! [`Sweep`] over pilot length, correlation, and power axes.  Every sweep
//! point expands to a concrete configuration; [`run_experiment`] runs each
//! point's theory and Monte Carlo passes and returns one flat [`ResultRow`]
//! per point × metric × abscissa, in deterministic order.
//!
//! Reproducibility contract: trial `t` at sweep lane `l` of scenario `s`
//! draws from the dedicated ChaCha stream
//! `((s + 1) << 48) | (l << 32) + offset(t)`, so row values depend only on
//! `(seed, spec)`, never on worker count or scheduling.  ROC scenarios use
//! trial offsets `2t` (jammer present) and `2t + 1` (jammer absent);
//! estimation scenarios use offset `t`.

use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::{sample_channels, scenario_geometry, SystemConfig};
use crate::detection::{
    assemble_covariance, conditioned_alpha, pd, pfa, roc_samples, series_h0, series_h1,
    threshold_for_pfa, AlphaMode, Detector,
};
use crate::estimation::{
    build_jammer_mmse, build_moment_model, build_user_mmse, estimate_inner_products,
    estimate_norms_energy_baseline, inner_product_metrics, linear_nmse, norms_mse, regauge_jammer,
    to_db,
};
use crate::numerics::{trial_rng, C64, CVec};
use crate::signal::{inner_products, make_pilot_book, sample_jamming_pilot, simulate_projected};
use crate::{Error, Result};

/// Default false-alarm targets for ROC curves and threshold calibration.
pub const DEFAULT_P_FA_GRID: [f64; 12] = [
    0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9,
];

/// Default chi-square-mixture truncation order (grown adaptively as needed).
pub const DEFAULT_M_TRUNC: usize = 100;

/// Largest sweep-lane count the RNG stream partition supports.
const MAX_SWEEP_LANES: usize = 1 << 15;

/// Largest per-lane trial count the RNG stream partition supports.
const MAX_TRIALS: usize = 1 << 30;

/// Named Monte Carlo scenario families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Theoretical vs empirical LMPT ROC under the conditioned
    /// inner-product reference.
    RocTheory,
    /// Empirical LMPT vs modified-GLRT ROC with the jamming pilot resampled
    /// every trial.
    RocCompare,
    /// Detection/false-alarm rates at thresholds calibrated to target
    /// false-alarm probabilities, over a parameter sweep.
    DetectionSweep,
    /// Inner-product estimation quality: squared-magnitude MSEs (affine
    /// estimator and per-pilot energy baseline) and phase cosine similarity.
    InnerProductQuality,
    /// User-channel NMSE with known, estimated, and ignored jamming
    /// inner-product weight.
    UserNmse,
    /// Jammer-channel NMSE with known, partially estimated, and fully
    /// estimated inner products, against the regauged channel.
    JammerNmse,
}

impl Scenario {
    /// Stable snake_case identifier used in configs and CSV output.
    pub fn id(&self) -> &'static str {
        match self {
            Scenario::RocTheory => "roc_theory",
            Scenario::RocCompare => "roc_compare",
            Scenario::DetectionSweep => "detection_sweep",
            Scenario::InnerProductQuality => "inner_product_quality",
            Scenario::UserNmse => "user_nmse",
            Scenario::JammerNmse => "jammer_nmse",
        }
    }

    /// Parses a scenario identifier.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "roc_theory" => Ok(Scenario::RocTheory),
            "roc_compare" => Ok(Scenario::RocCompare),
            "detection_sweep" => Ok(Scenario::DetectionSweep),
            "inner_product_quality" => Ok(Scenario::InnerProductQuality),
            "user_nmse" => Ok(Scenario::UserNmse),
            "jammer_nmse" => Ok(Scenario::JammerNmse),
            other => Err(Error::Config(format!(
                "unknown scenario `{other}`; expected one of roc_theory, roc_compare, \
                 detection_sweep, inner_product_quality, user_nmse, jammer_nmse"
            ))),
        }
    }

    /// Default Monte Carlo trial count for the scenario family.
    pub fn default_trials(&self) -> usize {
        match self {
            Scenario::RocTheory | Scenario::RocCompare | Scenario::DetectionSweep => 10_000,
            _ => 1_000,
        }
    }

    fn index(&self) -> u64 {
        match self {
            Scenario::RocTheory => 0,
            Scenario::RocCompare => 1,
            Scenario::DetectionSweep => 2,
            Scenario::InnerProductQuality => 3,
            Scenario::UserNmse => 4,
            Scenario::JammerNmse => 5,
        }
    }
}

/// Parameter axes swept by an experiment.
///
/// Absent axes keep the base configuration's value.  A `rho` entry sets all
/// three correlation coefficients (BS, UE, jammer) at once.  With `jsr_db`
/// set, the non-swept transmit power is slaved to the swept one so the
/// jammer-to-signal ratio `q_k/p_t` stays fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    /// Pilot lengths to sweep.
    pub tau: Option<Vec<usize>>,
    /// Correlation coefficients to sweep (applied to all three sides).
    pub rho: Option<Vec<f64>>,
    /// Jammer power sweep, `q_k = 10^(jnr_db/10)·σ²`.
    pub jnr_db: Option<Vec<f64>>,
    /// User power sweep, `p_t = 10^(snr_db/10)·σ²`.
    pub snr_db: Option<Vec<f64>>,
    /// Fixed jammer-to-signal ratio in dB; requires exactly one swept power
    /// axis, the other power follows it.
    pub jsr_db: Option<f64>,
    /// False-alarm targets (ROC abscissae / calibration targets).
    pub p_fa: Vec<f64>,
    /// Explicit threshold grid (ROC theory only); overrides the grid derived
    /// from `p_fa`.
    pub gamma: Option<Vec<f64>>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            tau: None,
            rho: None,
            jnr_db: None,
            snr_db: None,
            jsr_db: None,
            p_fa: DEFAULT_P_FA_GRID.to_vec(),
            gamma: None,
        }
    }
}

/// A fully specified experiment: scenario, base configuration, sweep, and
/// Monte Carlo bookkeeping.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    /// Scenario family to run.
    pub scenario: Scenario,
    /// Base system configuration (sweep points override swept fields).
    pub cfg: SystemConfig,
    /// Swept parameter axes.
    pub sweep: Sweep,
    /// Monte Carlo trials per sweep point (per detector for ROC comparison).
    pub trials: usize,
    /// Master seed partitioned into per-trial ChaCha streams.
    pub seed: u64,
    /// Initial chi-square-mixture truncation order.
    pub m_trunc: usize,
    /// Optional output path recorded from the config document.
    pub output: Option<String>,
}

/// One expanded sweep point: the lane index and the concrete configuration.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    /// Sweep lane, in expansion order (`tau` outermost, then `rho`, `jnr`,
    /// `snr` innermost).
    pub idx: usize,
    /// Concrete configuration at this point.
    pub cfg: SystemConfig,
}

/// Converts a dB value to the linear power scale.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Expands the sweep into concrete configurations (cartesian product,
/// `tau` outermost, then `rho`, `jnr_db`, `snr_db`).
pub fn sweep_points(spec: &ExperimentSpec) -> Vec<SweepPoint> {
    let taus = match &spec.sweep.tau {
        Some(v) => v.clone(),
        None => vec![spec.cfg.tau],
    };
    let rhos: Vec<Option<f64>> = match &spec.sweep.rho {
        Some(v) => v.iter().map(|&r| Some(r)).collect(),
        None => vec![None],
    };
    let jnrs: Vec<Option<f64>> = match &spec.sweep.jnr_db {
        Some(v) => v.iter().map(|&j| Some(j)).collect(),
        None => vec![None],
    };
    let snrs: Vec<Option<f64>> = match &spec.sweep.snr_db {
        Some(v) => v.iter().map(|&s| Some(s)).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for &tau in &taus {
        for &rho in &rhos {
            for &jnr in &jnrs {
                for &snr in &snrs {
                    let mut cfg = spec.cfg.clone();
                    cfg.seed = spec.seed;
                    cfg.tau = tau;
                    if let Some(r) = rho {
                        cfg.rho_bs = r;
                        cfg.rho_ue = r;
                        cfg.rho_jm = r;
                    }
                    if let Some(j) = jnr {
                        cfg.q_k = from_db(j) * cfg.sigma2;
                    }
                    if let Some(s) = snr {
                        cfg.p_t = from_db(s) * cfg.sigma2;
                    }
                    if let Some(jsr) = spec.sweep.jsr_db {
                        if jnr.is_some() {
                            cfg.p_t = cfg.q_k * from_db(-jsr);
                        } else if snr.is_some() {
                            cfg.q_k = cfg.p_t * from_db(jsr);
                        }
                    }
                    points.push(SweepPoint {
                        idx: points.len(),
                        cfg,
                    });
                }
            }
        }
    }
    points
}

/// One scalar result: a metric value at one sweep point and abscissa.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    /// Scenario identifier.
    pub scenario: String,
    /// Pilot length at this sweep point.
    pub tau: usize,
    /// Correlation coefficient at this sweep point (BS side shown).
    pub rho: f64,
    /// Jammer power in dB over the noise floor (`-inf` when `q_k = 0`).
    pub jnr_db: f64,
    /// User power in dB over the noise floor.
    pub snr_db: f64,
    /// Abscissa name (`gamma`, `p_fa`, `p_fa_target`, `jnr_db`, `snr_db`).
    pub x_name: String,
    /// Abscissa value.
    pub x_value: f64,
    /// Metric name.
    pub metric: String,
    /// Metric value.
    pub value: f64,
    /// Monte Carlo trials behind the value (0 for pure theory rows).
    pub trials: usize,
    /// Standard error of the value (`0` for theory, `nan` when undefined).
    pub se: f64,
}

/// CSV column names, in output order.
pub const CSV_HEADER: [&str; 11] = [
    "scenario", "tau", "rho", "jnr_db", "snr_db", "x_name", "x_value", "metric", "value",
    "trials", "se",
];

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.8e}")
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes rows as CSV (header + one line per row, newline-terminated).
///
/// Floats use nine significant digits, so values round-trip through
/// `f64::from_str` to within `5e-9` relative error; non-finite values are
/// written as `-inf`, `inf`, and `nan`.
pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.tau.to_string(),
            fmt_float(r.rho),
            fmt_float(r.jnr_db),
            fmt_float(r.snr_db),
            r.x_name.clone(),
            fmt_float(r.x_value),
            r.metric.clone(),
            fmt_float(r.value),
            r.trials.to_string(),
            fmt_float(r.se),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Renders rows to an in-memory CSV document.
pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn stream_base(scenario: Scenario, lane: usize) -> u64 {
    ((scenario.index() + 1) << 48) | ((lane as u64) << 32)
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Sample mean and its standard error (`0` for fewer than two samples).
fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean of linear-scale samples reported in dB, with the delta-method
/// standard error `se_dB = (10/ln 10)·se/mean`.
fn db_mean_se(samples: &[f64]) -> (f64, f64) {
    let (mean, se) = mean_se(samples);
    let se_db = if mean > 0.0 {
        10.0 / std::f64::consts::LN_10 * se / mean
    } else {
        f64::NAN
    };
    (to_db(mean), se_db)
}

fn row(
    scenario: Scenario,
    pt: &SweepPoint,
    x_name: &str,
    x_value: f64,
    metric: &str,
    value: f64,
    trials: usize,
    se: f64,
) -> ResultRow {
    ResultRow {
        scenario: scenario.id().to_string(),
        tau: pt.cfg.tau,
        rho: pt.cfg.rho_bs,
        jnr_db: to_db(pt.cfg.q_k / pt.cfg.sigma2),
        snr_db: to_db(pt.cfg.p_t / pt.cfg.sigma2),
        x_name: x_name.to_string(),
        x_value,
        metric: metric.to_string(),
        value,
        trials,
        se,
    }
}

/// The swept power axis used as the abscissa of estimation scenarios.
fn power_axis(spec: &ExperimentSpec, pt: &SweepPoint) -> (&'static str, f64) {
    if spec.sweep.snr_db.is_some() {
        ("snr_db", to_db(pt.cfg.p_t / pt.cfg.sigma2))
    } else {
        ("jnr_db", to_db(pt.cfg.q_k / pt.cfg.sigma2))
    }
}

fn validate_cfg(cfg: &SystemConfig) -> Result<()> {
    if cfg.tau < 2 {
        return Err(Error::Config(format!("tau must be ≥ 2, got {}", cfg.tau)));
    }
    if cfg.n_bs == 0 || cfg.n_ue == 0 || cfg.m_jm == 0 || cfg.k_users == 0 {
        return Err(Error::Config(
            "n_bs, n_ue, m_jm, k_users must all be ≥ 1".into(),
        ));
    }
    if cfg.m_bs < cfg.n_bs || cfg.m_ue < cfg.n_ue {
        return Err(Error::Config(format!(
            "beam counts cannot exceed antenna counts: n_bs={} > m_bs={} or n_ue={} > m_ue={}",
            cfg.n_bs, cfg.m_bs, cfg.n_ue, cfg.m_ue
        )));
    }
    if !(cfg.sigma2 > 0.0) {
        return Err(Error::Config(format!(
            "sigma2 must be positive, got {}",
            cfg.sigma2
        )));
    }
    if !(cfg.p_t >= 0.0) || !(cfg.q_k >= 0.0) {
        return Err(Error::Config("p_t and q_k must be ≥ 0".into()));
    }
    for (name, rho) in [
        ("rho_bs", cfg.rho_bs),
        ("rho_ue", cfg.rho_ue),
        ("rho_jm", cfg.rho_jm),
    ] {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!(
                "{name} must lie in [0, 1], got {rho}"
            )));
        }
    }
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return Err(Error::Config(format!(
            "epsilon must lie in [0, 1], got {}",
            cfg.epsilon
        )));
    }
    Ok(())
}

fn validate_spec(spec: &ExperimentSpec) -> Result<()> {
    validate_cfg(&spec.cfg)?;
    if spec.trials == 0 {
        return Err(Error::Config("trials must be ≥ 1".into()));
    }
    if spec.trials > MAX_TRIALS {
        return Err(Error::Config(format!(
            "trials must be ≤ {MAX_TRIALS} to fit the RNG stream partition"
        )));
    }
    if spec.m_trunc == 0 {
        return Err(Error::Config("m_trunc must be ≥ 1".into()));
    }
    let sweep = &spec.sweep;
    for (name, len) in [
        ("sweep.tau", sweep.tau.as_ref().map(Vec::len)),
        ("sweep.jnr_db", sweep.jnr_db.as_ref().map(Vec::len)),
        ("sweep.snr_db", sweep.snr_db.as_ref().map(Vec::len)),
        (
            "sweep.rho",
            sweep.rho.as_ref().map(Vec::len),
        ),
        ("sweep.gamma", sweep.gamma.as_ref().map(Vec::len)),
    ] {
        if len == Some(0) {
            return Err(Error::Config(format!("{name} must not be empty")));
        }
    }
    if let Some(taus) = &sweep.tau {
        if taus.iter().any(|&t| t < 2) {
            return Err(Error::Config("sweep.tau entries must be ≥ 2".into()));
        }
    }
    if let Some(rhos) = &sweep.rho {
        if rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(
                "sweep.rho entries must lie in [0, 1]".into(),
            ));
        }
    }
    if sweep.p_fa.is_empty() {
        return Err(Error::Config("p_fa grid must not be empty".into()));
    }
    if sweep.p_fa.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Config(
            "p_fa targets must lie strictly inside (0, 1)".into(),
        ));
    }
    if let Some(gammas) = &sweep.gamma {
        if gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::Config(
                "gamma grid entries must be finite and ≥ 0".into(),
            ));
        }
    }
    if sweep.jsr_db.is_some() && sweep.jnr_db.is_some() == sweep.snr_db.is_some() {
        return Err(Error::Config(
            "jsr_db requires exactly one swept power axis (jnr_db or snr_db)".into(),
        ));
    }
    let lanes = sweep_points(spec).len()
        * if spec.scenario == Scenario::RocCompare {
            2
        } else {
            1
        };
    if lanes > MAX_SWEEP_LANES {
        return Err(Error::Config(format!(
            "sweep expands to {lanes} lanes, exceeding the {MAX_SWEEP_LANES}-lane RNG partition"
        )));
    }
    Ok(())
}

fn run_roc_theory(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let (s0, s1) = detection_series(spec, pt)?;
    let gammas: Vec<f64> = match &spec.sweep.gamma {
        Some(g) => g.clone(),
        None => spec
            .sweep
            .p_fa
            .iter()
            .map(|&t| threshold_for_pfa(t, &s0))
            .collect::<Result<_>>()?,
    };
    let samples = roc_samples(
        cfg,
        &stats,
        Detector::Lmpt,
        AlphaMode::Conditioned,
        spec.trials,
        spec.seed,
        stream_base(spec.scenario, pt.idx),
    )?;
    let curve = samples.curve(&gammas);
    let mut rows = Vec::with_capacity(4 * gammas.len());
    for (i, &g) in gammas.iter().enumerate() {
        rows.push(row(
            spec.scenario,
            pt,
            "gamma",
            g,
            "p_fa_theory",
            pfa(g, &s0),
            0,
            0.0,
        ));
        rows.push(row(
            spec.scenario,
            pt,
            "gamma",
            g,
            "p_d_theory",
            pd(g, &s1),
            0,
            0.0,
        ));
        rows.push(row(
            spec.scenario,
            pt,
            "gamma",
            g,
            "p_fa_emp",
            curve.p_fa[i],
            spec.trials,
            binomial_se(curve.p_fa[i], spec.trials),
        ));
        rows.push(row(
            spec.scenario,
            pt,
            "gamma",
            g,
            "p_d_emp",
            curve.p_d[i],
            spec.trials,
            binomial_se(curve.p_d[i], spec.trials),
        ));
    }
    Ok(rows)
}

fn run_detection_sweep(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let (s0, s1) = detection_series(spec, pt)?;
    let samples = roc_samples(
        cfg,
        &stats,
        Detector::Lmpt,
        AlphaMode::Conditioned,
        spec.trials,
        spec.seed,
        stream_base(spec.scenario, pt.idx),
    )?;
    let mut rows = Vec::with_capacity(4 * spec.sweep.p_fa.len());
    for &target in &spec.sweep.p_fa {
        let gamma_star = threshold_for_pfa(target, &s0)?;
        let curve = samples.curve(&[gamma_star]);
        rows.push(row(
            spec.scenario,
            pt,
            "p_fa_target",
            target,
            "gamma_star",
            gamma_star,
            0,
            0.0,
        ));
        rows.push(row(
            spec.scenario,
            pt,
            "p_fa_target",
            target,
            "p_d_theory",
            pd(gamma_star, &s1),
            0,
            0.0,
        ));
        rows.push(row(
            spec.scenario,
            pt,
            "p_fa_target",
            target,
            "p_fa_emp",
            curve.p_fa[0],
            spec.trials,
            binomial_se(curve.p_fa[0], spec.trials),
        ));
        rows.push(row(
            spec.scenario,
            pt,
            "p_fa_target",
            target,
            "p_d_emp",
            curve.p_d[0],
            spec.trials,
            binomial_se(curve.p_d[0], spec.trials),
        ));
    }
    Ok(rows)
}

fn run_roc_compare(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let mut rows = Vec::with_capacity(2 * spec.sweep.p_fa.len());
    for (bit, detector, metric) in [
        (0usize, Detector::Lmpt, "p_d_lmpt"),
        (1usize, Detector::Glrt, "p_d_glrt"),
    ] {
        let samples = roc_samples(
            cfg,
            &stats,
            detector,
            AlphaMode::Marginal,
            spec.trials,
            spec.seed,
            stream_base(spec.scenario, pt.idx * 2 + bit),
        )?;
        for &target in &spec.sweep.p_fa {
            let p_d = samples.pd_at_pfa(target);
            rows.push(row(
                spec.scenario,
                pt,
                "p_fa",
                target,
                metric,
                p_d,
                spec.trials,
                binomial_se(p_d, spec.trials),
            ));
        }
    }
    Ok(rows)
}

fn run_inner_product_quality(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let model = build_moment_model(cfg, &stats)?;
    let book = make_pilot_book(cfg.tau)?;
    let base = stream_base(spec.scenario, pt.idx);
    let per_trial: Result<Vec<[f64; 4]>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, base + t as u64);
            let pilot = sample_jamming_pilot(cfg.tau, &mut rng);
            let ip = inner_products(&book, &pilot)?;
            let (h_user, h_jam) = sample_channels(&stats, &mut rng);
            let obs =
                simulate_projected(cfg, &stats, &book, &pilot, &h_user, &h_jam, true, &mut rng)?;
            let est = estimate_inner_products(&obs, &model, cfg)?;
            let (mse_alpha1, mse_norms, cos) = inner_product_metrics(&est, &ip.alpha)?;
            let baseline = estimate_norms_energy_baseline(&obs, cfg, &model)?;
            let mse_base = norms_mse(&baseline, &ip.alpha)?;
            Ok([mse_alpha1, mse_norms, mse_base, cos])
        })
        .collect();
    let per_trial = per_trial?;
    let column = |k: usize| per_trial.iter().map(|r| r[k]).collect::<Vec<_>>();
    let (x_name, x_value) = power_axis(spec, pt);
    let mut rows = Vec::with_capacity(4);
    for (metric, k) in [
        ("mse_alpha1_db", 0),
        ("mse_norms_db", 1),
        ("mse_norms_baseline_db", 2),
    ] {
        let (value, se) = db_mean_se(&column(k));
        rows.push(row(
            spec.scenario,
            pt,
            x_name,
            x_value,
            metric,
            value,
            spec.trials,
            se,
        ));
    }
    let (cos, cos_se) = mean_se(&column(3));
    rows.push(row(
        spec.scenario,
        pt,
        x_name,
        x_value,
        "cos_similarity",
        cos,
        spec.trials,
        cos_se,
    ));
    Ok(rows)
}

fn run_user_nmse(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let model = build_moment_model(cfg, &stats)?;
    let op = build_user_mmse(cfg, &stats)?;
    let book = make_pilot_book(cfg.tau)?;
    let base = stream_base(spec.scenario, pt.idx);
    let per_trial: Result<Vec<[f64; 3]>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, base + t as u64);
            let pilot = sample_jamming_pilot(cfg.tau, &mut rng);
            let ip = inner_products(&book, &pilot)?;
            let (h_user, h_jam) = sample_channels(&stats, &mut rng);
            let obs =
                simulate_projected(cfg, &stats, &book, &pilot, &h_user, &h_jam, true, &mut rng)?;
            let est = estimate_inner_products(&obs, &model, cfg)?;
            let weights = [
                ip.alpha[0].norm_sqr(),
                est.alpha1_norm.powi(2),
                0.0,
            ];
            let estimates = op.estimate_multi(&obs.y_used, &weights)?;
            Ok([
                linear_nmse(&estimates[0], &h_user)?,
                linear_nmse(&estimates[1], &h_user)?,
                linear_nmse(&estimates[2], &h_user)?,
            ])
        })
        .collect();
    let per_trial = per_trial?;
    let column = |k: usize| per_trial.iter().map(|r| r[k]).collect::<Vec<_>>();
    let (x_name, x_value) = power_axis(spec, pt);
    let mut rows = Vec::with_capacity(3);
    for (metric, k) in [
        ("nmse_user_known_db", 0),
        ("nmse_user_est_db", 1),
        ("nmse_user_unaware_db", 2),
    ] {
        let (value, se) = db_mean_se(&column(k));
        rows.push(row(
            spec.scenario,
            pt,
            x_name,
            x_value,
            metric,
            value,
            spec.trials,
            se,
        ));
    }
    Ok(rows)
}

fn run_jammer_nmse(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let model = build_moment_model(cfg, &stats)?;
    let op = build_jammer_mmse(cfg, &stats)?;
    let book = make_pilot_book(cfg.tau)?;
    let base = stream_base(spec.scenario, pt.idx);
    let per_trial: Result<Vec<[f64; 3]>> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, base + t as u64);
            let pilot = sample_jamming_pilot(cfg.tau, &mut rng);
            let ip = inner_products(&book, &pilot)?;
            let (h_user, h_jam) = sample_channels(&stats, &mut rng);
            let obs =
                simulate_projected(cfg, &stats, &book, &pilot, &h_user, &h_jam, true, &mut rng)?;
            let h_ref = regauge_jammer(&h_jam, &ip.alpha);
            let known = op.estimate(&obs, &ip.alpha_bar)?;
            let est = estimate_inner_products(&obs, &model, cfg)?;
            let alpha_bar_norms = CVec::from_fn(cfg.tau - 1, |k, _| {
                C64::from_polar(est.norms_sq[k].sqrt(), ip.alpha_bar[k].arg())
            });
            let partial = op.estimate(&obs, &alpha_bar_norms)?;
            let full = op.estimate(&obs, &est.alpha_bar)?;
            Ok([
                linear_nmse(&known, &h_ref)?,
                linear_nmse(&partial, &h_ref)?,
                linear_nmse(&full, &h_ref)?,
            ])
        })
        .collect();
    let per_trial = per_trial?;
    let column = |k: usize| per_trial.iter().map(|r| r[k]).collect::<Vec<_>>();
    let (x_name, x_value) = power_axis(spec, pt);
    let mut rows = Vec::with_capacity(3);
    for (metric, k) in [
        ("nmse_jam_known_db", 0),
        ("nmse_jam_norms_db", 1),
        ("nmse_jam_est_db", 2),
    ] {
        let (value, se) = db_mean_se(&column(k));
        rows.push(row(
            spec.scenario,
            pt,
            x_name,
            x_value,
            metric,
            value,
            spec.trials,
            se,
        ));
    }
    Ok(rows)
}

fn run_point(spec: &ExperimentSpec, pt: &SweepPoint) -> Result<Vec<ResultRow>> {
    match spec.scenario {
        Scenario::RocTheory => run_roc_theory(spec, pt),
        Scenario::RocCompare => run_roc_compare(spec, pt),
        Scenario::DetectionSweep => run_detection_sweep(spec, pt),
        Scenario::InnerProductQuality => run_inner_product_quality(spec, pt),
        Scenario::UserNmse => run_user_nmse(spec, pt),
        Scenario::JammerNmse => run_jammer_nmse(spec, pt),
    }
}

/// Runs every sweep point of the experiment and returns the flat result
/// table in deterministic order (sweep lane outermost).
///
/// Results depend only on the spec (including its seed), not on the rayon
/// worker count.  Failures are tagged with the sweep point that produced
/// them.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    validate_spec(spec)?;
    run_points(spec, run_point)
}

/// Evaluates only the closed-form detection theory on the threshold grid:
/// `p_fa_theory` and `p_d_theory` rows per sweep point, no Monte Carlo.
pub fn run_theory(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    validate_spec(spec)?;
    run_points(spec, |spec, pt| {
        let (s0, s1) = detection_series(spec, pt)?;
        let gammas: Vec<f64> = match &spec.sweep.gamma {
            Some(g) => g.clone(),
            None => spec
                .sweep
                .p_fa
                .iter()
                .map(|&t| threshold_for_pfa(t, &s0))
                .collect::<Result<_>>()?,
        };
        let mut rows = Vec::with_capacity(2 * gammas.len());
        for &g in &gammas {
            rows.push(row(spec.scenario, pt, "gamma", g, "p_fa_theory", pfa(g, &s0), 0, 0.0));
            rows.push(row(spec.scenario, pt, "gamma", g, "p_d_theory", pd(g, &s1), 0, 0.0));
        }
        Ok(rows)
    })
}

/// Calibrates thresholds to the false-alarm targets and reports the
/// theoretical operating points: `gamma_star` and `p_d_theory` rows per
/// sweep point, no Monte Carlo.
pub fn run_threshold(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    validate_spec(spec)?;
    run_points(spec, |spec, pt| {
        let (s0, s1) = detection_series(spec, pt)?;
        let mut rows = Vec::with_capacity(2 * spec.sweep.p_fa.len());
        for &target in &spec.sweep.p_fa {
            let gamma_star = threshold_for_pfa(target, &s0)?;
            rows.push(row(
                spec.scenario,
                pt,
                "p_fa_target",
                target,
                "gamma_star",
                gamma_star,
                0,
                0.0,
            ));
            rows.push(row(
                spec.scenario,
                pt,
                "p_fa_target",
                target,
                "p_d_theory",
                pd(gamma_star, &s1),
                0,
                0.0,
            ));
        }
        Ok(rows)
    })
}

/// Closed-form mixture series under both hypotheses at one sweep point.
fn detection_series(
    spec: &ExperimentSpec,
    pt: &SweepPoint,
) -> Result<(
    crate::detection::ChiSquareMixtureSeries,
    crate::detection::ChiSquareMixtureSeries,
)> {
    let cfg = &pt.cfg;
    let (_, stats) = scenario_geometry(cfg)?;
    let s0 = series_h0(&stats.jam_beam_evd, cfg.sigma2, cfg.tau, spec.m_trunc)?;
    let alpha_ref = conditioned_alpha(cfg.tau);
    let alpha_unused = alpha_ref.rows(1, cfg.tau - 1).into_owned();
    let cov = assemble_covariance(&alpha_unused, &stats.r_jam_beam, cfg.q_k, cfg.sigma2, cfg.tau)?;
    let s1 = series_h1(&cov, &stats.r_jam_beam, cfg.tau, spec.m_trunc)?;
    Ok((s0, s1))
}

fn run_points(
    spec: &ExperimentSpec,
    runner: impl Fn(&ExperimentSpec, &SweepPoint) -> Result<Vec<ResultRow>>,
) -> Result<Vec<ResultRow>> {
    let points = sweep_points(spec);
    let mut rows = Vec::new();
    for pt in &points {
        let sub = runner(spec, pt).map_err(|e| Error::AtSweepPoint {
            context: format!(
                "sweep point {} (tau={}, rho={}, jnr_db={:.2}, snr_db={:.2})",
                pt.idx,
                pt.cfg.tau,
                pt.cfg.rho_bs,
                to_db(pt.cfg.q_k / pt.cfg.sigma2),
                to_db(pt.cfg.p_t / pt.cfg.sigma2),
            ),
            source: Box::new(e),
        })?;
        rows.extend(sub);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    scenario: String,
    trials: Option<usize>,
    seed: Option<u64>,
    output: Option<String>,
    m_trunc: Option<usize>,
    system: RawSystem,
    power: Option<RawPower>,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    m_bs: usize,
    m_ue: usize,
    m_jm: Option<usize>,
    k_users: Option<usize>,
    tau: usize,
    n_bs: usize,
    n_ue: usize,
    sigma2: Option<f64>,
    rho: Option<f64>,
    rho_bs: Option<f64>,
    rho_ue: Option<f64>,
    rho_jm: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    snr_db: Option<f64>,
    p_t: Option<f64>,
    jnr_db: Option<f64>,
    q_k: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    tau: Option<Vec<usize>>,
    rho: Option<Vec<f64>>,
    jnr_db: Option<Vec<f64>>,
    snr_db: Option<Vec<f64>>,
    jsr_db: Option<f64>,
    p_fa: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
}

/// Parses and validates a TOML experiment document.
///
/// Unknown keys are rejected by name.  Defaults: `sigma2 = 1`, `k_users = 5`,
/// `m_jm = 16`, `epsilon = 0.1`, `rho = 0.9`, both powers at 0 dB,
/// `m_trunc = 100`, `seed = 7`, and the scenario family's trial count
/// (10⁴ detection, 10³ estimation).  Powers accept exactly one of the dB
/// form (`snr_db`/`jnr_db`) and the linear form (`p_t`/`q_k`) per side.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let scenario = Scenario::from_id(&raw.scenario)?;
    let sys = &raw.system;
    let rho_default = sys.rho.unwrap_or(0.9);
    let sigma2 = sys.sigma2.unwrap_or(1.0);
    let power = raw.power.unwrap_or(RawPower {
        snr_db: None,
        p_t: None,
        jnr_db: None,
        q_k: None,
    });
    let p_t = match (power.snr_db, power.p_t) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "specify exactly one of power.snr_db and power.p_t".into(),
            ))
        }
        (Some(db), None) => from_db(db) * sigma2,
        (None, Some(p)) => p,
        (None, None) => sigma2,
    };
    let q_k = match (power.jnr_db, power.q_k) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "specify exactly one of power.jnr_db and power.q_k".into(),
            ))
        }
        (Some(db), None) => from_db(db) * sigma2,
        (None, Some(q)) => q,
        (None, None) => sigma2,
    };
    let seed = raw.seed.unwrap_or(7);
    let cfg = SystemConfig {
        m_bs: sys.m_bs,
        m_ue: sys.m_ue,
        m_jm: sys.m_jm.unwrap_or(16),
        k_users: sys.k_users.unwrap_or(5),
        tau: sys.tau,
        n_bs: sys.n_bs,
        n_ue: sys.n_ue,
        p_t,
        q_k,
        sigma2,
        rho_bs: sys.rho_bs.unwrap_or(rho_default),
        rho_ue: sys.rho_ue.unwrap_or(rho_default),
        rho_jm: sys.rho_jm.unwrap_or(rho_default),
        epsilon: sys.epsilon.unwrap_or(0.1),
        seed,
    };
    let sweep = match raw.sweep {
        Some(s) => Sweep {
            tau: s.tau,
            rho: s.rho,
            jnr_db: s.jnr_db,
            snr_db: s.snr_db,
            jsr_db: s.jsr_db,
            p_fa: s.p_fa.unwrap_or_else(|| DEFAULT_P_FA_GRID.to_vec()),
            gamma: s.gamma,
        },
        None => Sweep::default(),
    };
    let spec = ExperimentSpec {
        scenario,
        cfg,
        sweep,
        trials: raw.trials.unwrap_or_else(|| scenario.default_trials()),
        seed,
        m_trunc: raw.m_trunc.unwrap_or(DEFAULT_M_TRUNC),
        output: raw.output,
    };
    validate_spec(&spec)?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

/// Names accepted by [`figure_preset`].
pub const PRESET_NAMES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

#[allow(clippy::too_many_arguments)]
fn preset_cfg(
    m_bs: usize,
    m_ue: usize,
    n_bs: usize,
    n_ue: usize,
    tau: usize,
    rho: f64,
    p_t: f64,
    q_k: f64,
) -> SystemConfig {
    SystemConfig {
        m_bs,
        m_ue,
        m_jm: 16,
        k_users: 5,
        tau,
        n_bs,
        n_ue,
        p_t,
        q_k,
        sigma2: 1.0,
        rho_bs: rho,
        rho_ue: rho,
        rho_jm: rho,
        epsilon: 0.1,
        seed: 7,
    }
}

/// Canned sweep configurations reproducing the reference result figures at
/// desk scale.
///
/// | name | scenario               | antennas (BS/UE) | beams (BS/UE) | sweep                                   |
/// |------|------------------------|------------------|---------------|-----------------------------------------|
/// | fig2 | roc_theory             | 4/2              | 4/2           | τ ∈ {2, 5}, ρ = 0.9, JNR = 0 dB         |
/// | fig3 | detection_sweep        | 4/2              | 4/2           | τ = 2, ρ = 0.9, JNR −10…15 dB           |
/// | fig4 | detection_sweep        | 4/2              | 4/2           | τ = 2, ρ ∈ {0.2, 0.5, 0.8} × JNR sweep  |
/// | fig5 | roc_compare            | 4/2              | 4/2           | τ = 5, JNR = 2 dB, ρ ∈ {0, 0.5, 1}      |
/// | fig6 | inner_product_quality  | 64/16            | 64/8          | τ = 4, ρ ∈ {0.2, 0.8} × JNR, JSR 0 dB   |
/// | fig7 | user_nmse              | 64/16            | 48/12         | τ = 4, ρ = 0.9, SNR sweep, JSR 0 dB     |
/// | fig8 | jammer_nmse            | 48/12            | 48/12         | τ = 4, ρ ∈ {0.2, 0.8} × JNR, JSR 0 dB   |
pub fn figure_preset(name: &str) -> Result<ExperimentSpec> {
    let jnr_grid = vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
    let spec = match name {
        "fig2" => ExperimentSpec {
            scenario: Scenario::RocTheory,
            cfg: preset_cfg(4, 2, 4, 2, 2, 0.9, 1.0, 1.0),
            sweep: Sweep {
                tau: Some(vec![2, 5]),
                ..Sweep::default()
            },
            trials: 10_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        "fig3" => ExperimentSpec {
            scenario: Scenario::DetectionSweep,
            cfg: preset_cfg(4, 2, 4, 2, 2, 0.9, 1.0, 1.0),
            sweep: Sweep {
                jnr_db: Some(jnr_grid),
                p_fa: vec![0.01, 0.1],
                ..Sweep::default()
            },
            trials: 10_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        "fig4" => ExperimentSpec {
            scenario: Scenario::DetectionSweep,
            cfg: preset_cfg(4, 2, 4, 2, 2, 0.9, 1.0, 1.0),
            sweep: Sweep {
                rho: Some(vec![0.2, 0.5, 0.8]),
                jnr_db: Some(jnr_grid),
                p_fa: vec![0.01, 0.1],
                ..Sweep::default()
            },
            trials: 10_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        "fig5" => ExperimentSpec {
            scenario: Scenario::RocCompare,
            cfg: preset_cfg(4, 2, 4, 2, 5, 0.9, 1.0, from_db(2.0)),
            sweep: Sweep {
                rho: Some(vec![0.0, 0.5, 1.0]),
                ..Sweep::default()
            },
            trials: 10_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        "fig6" => ExperimentSpec {
            scenario: Scenario::InnerProductQuality,
            cfg: preset_cfg(64, 16, 64, 8, 4, 0.2, 1.0, 1.0),
            sweep: Sweep {
                rho: Some(vec![0.2, 0.8]),
                jnr_db: Some(vec![-5.0, 0.0, 5.0, 10.0, 15.0]),
                jsr_db: Some(0.0),
                ..Sweep::default()
            },
            trials: 1_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        "fig7" => ExperimentSpec {
            scenario: Scenario::UserNmse,
            cfg: preset_cfg(64, 16, 48, 12, 4, 0.9, 1.0, 1.0),
            sweep: Sweep {
                snr_db: Some(vec![-5.0, 0.0, 5.0, 10.0]),
                jsr_db: Some(0.0),
                ..Sweep::default()
            },
            trials: 1_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        "fig8" => ExperimentSpec {
            scenario: Scenario::JammerNmse,
            cfg: preset_cfg(48, 12, 48, 12, 4, 0.2, 1.0, 1.0),
            sweep: Sweep {
                rho: Some(vec![0.2, 0.8]),
                jnr_db: Some(vec![-5.0, 0.0, 5.0, 10.0, 15.0]),
                jsr_db: Some(0.0),
                ..Sweep::default()
            },
            trials: 1_000,
            seed: 7,
            m_trunc: DEFAULT_M_TRUNC,
            output: None,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown figure preset `{other}`; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(spec)
}
