//! Jamming detection: test statistics, chi-square-mixture performance
//! theory, threshold calibration, and Monte Carlo ROC curves.
//!
//! The primary detector is a locally most powerful test (LMPT) on the
//! unused-pilot observations: `T = Σ_{i≥2} ȳ_iᴴ·R̃_JM·ȳ_i`, which weighs
//! the received energy by the jammer's beam-domain covariance
//! eigenstructure.  Its exact distribution under both hypotheses is an
//! infinite mixture of Gamma densities whose coefficients follow a known
//! recursion over the positive eigenvalues involved; truncating and
//! renormalizing that series yields closed-form false-alarm and detection
//! probabilities, hence analytic threshold calibration.  A modified GLRT
//! that ignores the eigenstructure serves as the comparison baseline.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::channel::{sample_jammer_channel, ChannelStatistics, SystemConfig};
use crate::numerics::{
    hermitian_evd, kron, psd_sqrt, trial_rng, C64, CMat, CVec, EigenDecomposition,
    HermitianMatrix,
};
use crate::signal::{inner_products, sample_jamming_pilot, simulate_with_fixed_alpha, TrainingObservations};
use crate::{tol, Error, Result};

/// Which detector a statistic or outcome refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detector {
    /// Locally most powerful test using the jammer covariance eigenstructure.
    Lmpt,
    /// Modified generalized likelihood ratio test baseline.
    Glrt,
}

/// Binary hypothesis labels: jammer absent (`H0`) or present (`H1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hypothesis {
    /// No jamming during training.
    H0,
    /// Jamming present during training.
    H1,
}

/// Result of comparing a detection statistic against a threshold.
#[derive(Clone, Copy, Debug)]
pub struct DetectionOutcome {
    /// Value of the test statistic (nonnegative).
    pub statistic: f64,
    /// Decision threshold used.
    pub threshold: f64,
    /// `H1` iff `statistic > threshold`.
    pub decision: Hypothesis,
    /// Which detector produced the statistic.
    pub detector: Detector,
}

/// Applies the threshold test to a computed statistic.
pub fn decide(statistic: f64, threshold: f64, detector: Detector) -> DetectionOutcome {
    DetectionOutcome {
        statistic,
        threshold,
        decision: if statistic > threshold {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        },
        detector,
    }
}

/// Truncated Gamma-mixture representation of the LMPT statistic's
/// distribution under one hypothesis.
///
/// The density is `f(x) = Σ_m coeffs[m] · Gamma_pdf(x; base_degree + m,
/// scale 2β)`; tails are `Σ_m coeffs[m] · Q(base_degree + m, x/(2β))` with
/// `Q` the regularized upper incomplete Gamma function.  `beta` is the
/// series' scale parameter: it equals the harmonic-mean-based value when the
/// resulting coefficient recursion converges and otherwise falls back to
/// half the smallest component scale, which always converges.
#[derive(Clone, Debug)]
pub struct ChiSquareMixtureSeries {
    /// Mixture coefficients `a_m`, `m = 0…truncation`, renormalized to sum 1.
    pub coeffs: Vec<f64>,
    /// Scale parameter β of the series (the Gamma scale is `2β`).
    pub beta: f64,
    /// Integer base degree: `(τ−1)·ρ` under H0, `φ` under H1.
    pub base_degree: usize,
    /// Index of the last retained coefficient.
    pub truncation: usize,
    /// True once the coefficients have been renormalized to unit mass.
    pub normalized: bool,
}

/// Hard cap on adaptive series growth.
const SERIES_TERM_CAP: usize = 40_000;

/// Builds the Gamma-mixture coefficients for a sum of independent
/// `Gamma(shape_each, scale θ_j)` variables (`θ_j = scales[j]`), expanded
/// around Gamma scale `theta1`.
///
/// Recursion: `a_0 = Π_j (θ₁/θ_j)^{shape}`,
/// `b_m = 2·shape·Σ_j (1 − θ₁/θ_j)^m`,
/// `a_m = (1/2m)·Σ_{r<m} b_{m−r}·a_r`.  Terms are added past `m_trunc`
/// until the retained mass is within [`tol::SERIES_MASS_TOL`] of 1 (or the
/// hard cap is reached), then coefficients are renormalized.
fn ruben_coefficients(
    scales: &[f64],
    shape_each: usize,
    theta1: f64,
    m_trunc: usize,
) -> Result<Vec<f64>> {
    let shape = shape_each as f64;
    let a0: f64 = scales.iter().map(|&t| (theta1 / t).powf(shape)).product();
    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(Error::NoConvergence(format!(
            "mixture leading coefficient degenerated to {a0}; eigenvalue spread too large"
        )));
    }
    // Clamp rounding noise so exactly-coincident scales yield a pure Gamma.
    let ratios: Vec<f64> = scales
        .iter()
        .map(|&t| 1.0 - theta1 / t)
        .map(|r| if r.abs() < 1e-14 { 0.0 } else { r })
        .collect();
    let mut powers = ratios.clone();
    let mut coeffs = vec![a0];
    let mut b: Vec<f64> = Vec::new();
    let mut mass = a0;
    let mut last = a0;
    // Coefficients may alternate in sign, so require the latest term to be
    // negligible as well before trusting the partial mass.
    let converged = |mass: f64, last: f64| {
        (mass - 1.0).abs() <= tol::SERIES_MASS_TOL && last.abs() <= tol::SERIES_MASS_TOL
    };
    let mut m = 0usize;
    while m < SERIES_TERM_CAP {
        if m >= m_trunc && converged(mass, last) {
            break;
        }
        m += 1;
        // b_m from the current m-th powers of the ratios, then advance them.
        let bm = 2.0 * shape * powers.iter().sum::<f64>();
        for (p, r) in powers.iter_mut().zip(&ratios) {
            *p *= r;
        }
        b.push(bm);
        let mut acc = 0.0;
        for r in 0..m {
            acc += b[m - r - 1] * coeffs[r];
        }
        let am = acc / (2.0 * m as f64);
        coeffs.push(am);
        mass += am;
        last = am;
    }
    if (mass - 1.0).abs() > 1e-4 {
        return Err(Error::NoConvergence(format!(
            "mixture series mass {mass:.9} after {m} terms; distribution too spread for the \
             truncated expansion"
        )));
    }
    for c in coeffs.iter_mut() {
        *c /= mass;
    }
    Ok(coeffs)
}

/// Chooses the series scale: the harmonic-mean-based β when every ratio
/// `|1 − 2β/θ_j|` stays below 1 (convergent), otherwise the two-point
/// harmonic mean of the extreme scales, which always converges and
/// minimizes the worst-case geometric decay rate.
fn series_scale(scales: &[f64], rank: usize) -> (f64, f64) {
    let inv_sum: f64 = scales.iter().map(|&t| 1.0 / t).sum();
    let beta = rank as f64 / (2.0 * inv_sum);
    let theta_min = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let theta_max = scales.iter().cloned().fold(0.0_f64, f64::max);
    let theta1 = if 2.0 * beta < 2.0 * theta_min {
        2.0 * beta
    } else {
        2.0 * theta_min * theta_max / (theta_min + theta_max)
    };
    (theta1, beta)
}

fn build_series(
    scales: &[f64],
    shape_each: usize,
    base_degree: usize,
    m_trunc: usize,
) -> Result<ChiSquareMixtureSeries> {
    let (theta1, _) = series_scale(scales, scales.len());
    let coeffs = ruben_coefficients(scales, shape_each, theta1, m_trunc)?;
    Ok(ChiSquareMixtureSeries {
        truncation: coeffs.len() - 1,
        coeffs,
        beta: theta1 / 2.0,
        base_degree,
        normalized: true,
    })
}

/// Joint covariance of the stacked unused-pilot observations conditioned on
/// the inner-product vector: `R_ȳ = τ·q_k·(ααᴴ) ⊗ R̃_JM + σ²I`.
#[derive(Clone, Debug)]
pub struct StackedCovariance {
    /// The `(τ−1)·N_b` Hermitian covariance itself.
    pub r_ybar: HermitianMatrix,
    /// Unused-pilot inner products the assembly conditioned on.
    pub alpha: CVec,
    /// Jammer beam-domain covariance used in the assembly.
    pub r_jam_beam: HermitianMatrix,
    /// Jamming transmit power.
    pub q_k: f64,
    /// Noise power.
    pub sigma2: f64,
    /// Pilot length.
    pub tau: usize,
}

/// Assembles the conditional stacked covariance
/// `τ·q_k·(ααᴴ) ⊗ R̃_JM + σ²I` for the τ−1 unused pilots.
pub fn assemble_covariance(
    alpha: &CVec,
    r_jam_beam: &HermitianMatrix,
    q_k: f64,
    sigma2: f64,
    tau: usize,
) -> Result<StackedCovariance> {
    if alpha.len() != tau - 1 {
        return Err(Error::DimensionMismatch {
            context: "assemble_covariance (unused-pilot inner products)",
            expected: tau - 1,
            got: alpha.len(),
        });
    }
    let n_b = r_jam_beam.dim();
    let dim = (tau - 1) * n_b;
    let outer = CMat::from_fn(tau - 1, tau - 1, |i, j| alpha[i] * alpha[j].conj());
    let mut r = kron(&outer, r_jam_beam.matrix()).scale(tau as f64 * q_k);
    for d in 0..dim {
        r[(d, d)] += C64::new(sigma2, 0.0);
    }
    Ok(StackedCovariance {
        r_ybar: HermitianMatrix::symmetrize(r),
        alpha: alpha.clone(),
        r_jam_beam: r_jam_beam.clone(),
        q_k,
        sigma2,
        tau,
    })
}

/// LMPT statistic `T = Σ_{i≥2} Σ_n λ_n·|v_nᴴ·ȳ_i|²` over the positive
/// eigenpairs `(λ_n, v_n)` of the jammer beam-domain covariance; equal to
/// the quadratic form `ȳᴴ(I ⊗ R̃_JM)ȳ` on the stacked vector.
pub fn lmpt_statistic(obs: &TrainingObservations, evd: &EigenDecomposition) -> f64 {
    let rank = evd.rank();
    let mut t = 0.0;
    for y in &obs.y_unused {
        for n in 0..rank {
            let ip = evd.eigenvectors.column(n).dotc(y);
            t += evd.eigenvalues[n] * ip.norm_sqr();
        }
    }
    t
}

/// Modified GLRT statistic
/// `T = max( Σ_n |Σ_{i≥2} ȳ_i[n]|² / (N_b(τ−1)²) − 1/(τ−1), 0 )`:
/// coherent combining across unused pilots per beacon slot, centered at the
/// noise-only mean and clamped at zero.
pub fn glrt_statistic(obs: &TrainingObservations) -> f64 {
    let n_b = obs.n_b();
    let k = obs.y_unused.len();
    let mut acc = 0.0;
    for n in 0..n_b {
        let mut s = C64::new(0.0, 0.0);
        for y in &obs.y_unused {
            s += y[n];
        }
        acc += s.norm_sqr();
    }
    (acc / (n_b as f64 * (k * k) as f64) - 1.0 / k as f64).max(0.0)
}

/// Null-hypothesis mixture series: the LMPT statistic under H0 is
/// `Σ_n (λ_n σ²/2)·χ²_{2(τ−1)}` over the ρ positive eigenvalues of the
/// jammer beam covariance, i.e. a sum of `Gamma(τ−1, λ_nσ²)` variables.
pub fn series_h0(
    evd: &EigenDecomposition,
    sigma2: f64,
    tau: usize,
    m_trunc: usize,
) -> Result<ChiSquareMixtureSeries> {
    if tau < 2 {
        return Err(Error::InvalidParameter(format!(
            "pilot length must be ≥ 2 for detection, got {tau}"
        )));
    }
    let lambdas = evd.positive_eigenvalues();
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter(
            "jammer beam covariance has rank zero (no jamming subspace)".into(),
        ));
    }
    let scales: Vec<f64> = lambdas.iter().map(|l| l * sigma2).collect();
    let rank = scales.len();
    build_series(&scales, tau - 1, (tau - 1) * rank, m_trunc)
}

/// Alternative-hypothesis mixture series: the LMPT statistic under H1 is
/// `Σ_j (ε_j/2)·χ²_2` over the positive eigenvalues of
/// `B = R_ȳ^{1/2}·(I ⊗ R̃_JM)·R_ȳ^{1/2}`, i.e. a sum of `Gamma(1, ε_j)`.
pub fn series_h1(
    cov: &StackedCovariance,
    r_jam_beam: &HermitianMatrix,
    tau: usize,
    m_trunc: usize,
) -> Result<ChiSquareMixtureSeries> {
    let n_b = r_jam_beam.dim();
    if cov.r_ybar.dim() != (tau - 1) * n_b {
        return Err(Error::DimensionMismatch {
            context: "series_h1 (stacked covariance)",
            expected: (tau - 1) * n_b,
            got: cov.r_ybar.dim(),
        });
    }
    let sqrt = psd_sqrt(&cov.r_ybar)?;
    let eye = CMat::identity(tau - 1, tau - 1);
    let weight = kron(&eye, r_jam_beam.matrix());
    let b = HermitianMatrix::symmetrize(sqrt.matrix() * weight * sqrt.matrix());
    let evd = hermitian_evd(&b);
    let eps = evd.positive_eigenvalues();
    if eps.is_empty() {
        return Err(Error::InvalidParameter(
            "weighted covariance has rank zero under H1".into(),
        ));
    }
    let phi = eps.len();
    build_series(&eps, 1, phi, m_trunc)
}

fn mixture_tail(series: &ChiSquareMixtureSeries, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 1.0;
    }
    let x = gamma / (2.0 * series.beta);
    let mut p = 0.0;
    for (m, &a) in series.coeffs.iter().enumerate() {
        if a != 0.0 {
            p += a * gamma_ur((series.base_degree + m) as f64, x);
        }
    }
    p.clamp(0.0, 1.0)
}

/// False-alarm probability `P_FA(γ) = Σ_m a_m·Q(deg+m, γ/(2β))` for a
/// series built by [`series_h0`].
pub fn pfa(gamma: f64, series: &ChiSquareMixtureSeries) -> f64 {
    mixture_tail(series, gamma)
}

/// Detection probability `P_D(γ) = Σ_m ā_m·Q(φ+m, γ/(2β̄))` for a series
/// built by [`series_h1`].
pub fn pd(gamma: f64, series: &ChiSquareMixtureSeries) -> f64 {
    mixture_tail(series, gamma)
}

/// Mixture density at `x` (used for quadrature checks and plotting).
pub fn mixture_pdf(series: &ChiSquareMixtureSeries, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let scale = 2.0 * series.beta;
    let mut f = 0.0;
    for (m, &a) in series.coeffs.iter().enumerate() {
        if a != 0.0 {
            let k = (series.base_degree + m) as f64;
            let ln_term = (k - 1.0) * x.ln() - x / scale - ln_gamma(k) - k * scale.ln();
            f += a * ln_term.exp();
        }
    }
    f
}

/// Solves `pfa(γ) = target` by bisection on the monotone tail.
pub fn threshold_for_pfa(target: f64, series: &ChiSquareMixtureSeries) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "false-alarm target must lie strictly in (0,1), got {target}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * series.beta * (series.base_degree as f64 + 1.0);
    let mut grow = 0;
    while pfa(hi, series) > target {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::NoConvergence(
                "threshold bracket did not reach the false-alarm target".into(),
            ));
        }
    }
    let mut gamma = hi;
    for _ in 0..200 {
        gamma = 0.5 * (lo + hi);
        let p = pfa(gamma, series);
        if (p - target).abs() <= tol::THRESHOLD_PFA_TOL {
            return Ok(gamma);
        }
        if p > target {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    if (pfa(gamma, series) - target).abs() <= tol::THRESHOLD_PFA_TOL {
        Ok(gamma)
    } else {
        Err(Error::NoConvergence(format!(
            "bisection stalled at γ = {gamma} for false-alarm target {target}"
        )))
    }
}

/// How the jamming pilot's inner products are treated during Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaMode {
    /// Fix `α` to the conditioning reference used by the closed-form theory.
    Conditioned,
    /// Resample the jamming pilot (hence `α`) every trial.
    Marginal,
}

/// Reference inner-product vector for theory conditioning: every entry set
/// to the mean magnitude `E|α_i| = √(π/(4τ))` of the random inner products,
/// with zero phase (the statistic's law depends on `α` only through its
/// Euclidean norm).
pub fn conditioned_alpha(tau: usize) -> CVec {
    let mag = (std::f64::consts::PI / (4.0 * tau as f64)).sqrt();
    CVec::from_element(tau, C64::new(mag, 0.0))
}

/// Sorted detection-statistic samples under both hypotheses.
#[derive(Clone, Debug)]
pub struct RocSamples {
    /// Ascending statistics from jammer-absent trials.
    pub h0: Vec<f64>,
    /// Ascending statistics from jammer-present trials.
    pub h1: Vec<f64>,
}

impl RocSamples {
    fn exceed_rate(sorted: &[f64], gamma: f64) -> f64 {
        let below = sorted.partition_point(|&s| s <= gamma);
        (sorted.len() - below) as f64 / sorted.len() as f64
    }

    /// Empirical `(P_FA, P_D)` pairs over a threshold grid.
    pub fn curve(&self, gamma_grid: &[f64]) -> RocCurve {
        RocCurve {
            gamma: gamma_grid.to_vec(),
            p_fa: gamma_grid
                .iter()
                .map(|&g| Self::exceed_rate(&self.h0, g))
                .collect(),
            p_d: gamma_grid
                .iter()
                .map(|&g| Self::exceed_rate(&self.h1, g))
                .collect(),
        }
    }

    /// Detection rate at the empirical threshold whose false-alarm rate is
    /// `target`: the (1−target)-quantile of the H0 statistics.
    pub fn pd_at_pfa(&self, target: f64) -> f64 {
        let n = self.h0.len();
        let idx = (((1.0 - target) * n as f64).ceil() as usize).clamp(1, n) - 1;
        Self::exceed_rate(&self.h1, self.h0[idx])
    }
}

/// Empirical ROC curve on a fixed threshold grid.
#[derive(Clone, Debug)]
pub struct RocCurve {
    /// Threshold grid.
    pub gamma: Vec<f64>,
    /// Empirical false-alarm rate per threshold.
    pub p_fa: Vec<f64>,
    /// Empirical detection rate per threshold.
    pub p_d: Vec<f64>,
}

/// Draws `trials` statistic samples under each hypothesis.
///
/// Trial `t` uses RNG substreams `stream_base + 2t` (H1) and
/// `stream_base + 2t + 1` (H0), so results are independent of worker
/// scheduling.  Under H1 the jammer channel and noise are redrawn every
/// trial; `mode` controls whether `α` is fixed at the conditioning
/// reference or resampled through a fresh jamming pilot.
pub fn roc_samples(
    cfg: &SystemConfig,
    stats: &ChannelStatistics,
    detector: Detector,
    mode: AlphaMode,
    trials: usize,
    seed: u64,
    stream_base: u64,
) -> Result<RocSamples> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "detection Monte Carlo needs at least one trial".into(),
        ));
    }
    let book = crate::signal::make_pilot_book(cfg.tau)?;
    let alpha_ref = conditioned_alpha(cfg.tau);
    let h_user_zero = CVec::zeros(cfg.m_bs * cfg.m_ue);
    let pairs: Result<Vec<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let stat = |obs: &TrainingObservations| match detector {
                Detector::Lmpt => lmpt_statistic(obs, &stats.jam_beam_evd),
                Detector::Glrt => glrt_statistic(obs),
            };
            let mut rng1 = trial_rng(seed, stream_base + 2 * t as u64);
            let alpha = match mode {
                AlphaMode::Conditioned => alpha_ref.clone(),
                AlphaMode::Marginal => {
                    let pilot = sample_jamming_pilot(cfg.tau, &mut rng1);
                    inner_products(&book, &pilot)?.alpha
                }
            };
            let h_jam = sample_jammer_channel(stats, &mut rng1);
            let obs1 = simulate_with_fixed_alpha(
                cfg,
                stats,
                &alpha,
                &h_user_zero,
                &h_jam,
                true,
                &mut rng1,
            )?;
            let mut rng0 = trial_rng(seed, stream_base + 2 * t as u64 + 1);
            let obs0 = simulate_with_fixed_alpha(
                cfg,
                stats,
                &alpha_ref,
                &h_user_zero,
                &h_jam,
                false,
                &mut rng0,
            )?;
            Ok((stat(&obs0), stat(&obs1)))
        })
        .collect();
    let pairs = pairs?;
    let mut h0: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut h1: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    h0.sort_by(f64::total_cmp);
    h1.sort_by(f64::total_cmp);
    Ok(RocSamples { h0, h1 })
}

/// Monte Carlo ROC curve: empirical false-alarm and detection rates over a
/// threshold grid.
pub fn run_roc(
    cfg: &SystemConfig,
    stats: &ChannelStatistics,
    detector: Detector,
    mode: AlphaMode,
    trials: usize,
    gamma_grid: &[f64],
    seed: u64,
    stream_base: u64,
) -> Result<RocCurve> {
    Ok(roc_samples(cfg, stats, detector, mode, trials, seed, stream_base)?.curve(gamma_grid))
}

/// Draws one LMPT statistic sample under the requested hypothesis with a
/// fixed inner-product vector (used by distribution-level validation).
pub fn sample_statistic<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    stats: &ChannelStatistics,
    alpha: &CVec,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<f64> {
    let h_user_zero = CVec::zeros(cfg.m_bs * cfg.m_ue);
    let h_jam = sample_jammer_channel(stats, rng);
    let obs = simulate_with_fixed_alpha(
        cfg,
        stats,
        alpha,
        &h_user_zero,
        &h_jam,
        hypothesis == Hypothesis::H1,
        rng,
    )?;
    Ok(lmpt_statistic(&obs, &stats.jam_beam_evd))
}
