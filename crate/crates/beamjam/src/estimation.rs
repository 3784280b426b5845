//! Two-step estimation of the jamming inner products and of the user and
//! jammer channels from a single beam-training round.
//!
//! Step one recovers the jamming pilot's inner products from the per-pilot
//! observation energies: squared magnitudes through an affine
//! minimum-mean-square-error estimator built on closed-form first and second
//! moments ([`inner_product_sq_moments`], [`residual_energy_moments`]),
//! phase differences through bilinear forms between unused-pilot
//! observations, and the used-pilot magnitude through a blend of a
//! norm-budget reading and a matched-energy reading.  Step two plugs the
//! recovered inner products into linear MMSE estimators of the jammer and
//! user channels ([`JammerMmseOperator`], [`UserMmseOperator`]), each
//! reduced to an eigenbasis form that is algebraically exact but avoids any
//! per-trial matrix factorization.

use nalgebra::Cholesky;

use crate::channel::{ChannelStatistics, SystemConfig};
use crate::numerics::{fro_norm, hermitian_evd, C64, CMat, CVec, HermitianMatrix, RMat, RVec};
use crate::signal::TrainingObservations;
use crate::tol;
use crate::{Error, Result};

/// Trace and Frobenius summaries of the beam-domain covariances that the
/// closed-form moment model consumes.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StructuralScalars {
    /// `tr R̃_JM`.
    pub tr_jam: f64,
    /// `‖R̃_JM‖_F²`.
    pub fro2_jam: f64,
    /// `tr R̃_k`.
    pub tr_user: f64,
    /// `(tr R̃_k)² + ‖R̃_k‖_F²` (the Gaussian fourth-moment constant of the
    /// beam-domain user channel).
    pub theta: f64,
    /// `tr(R̃_JM·R̃_k)`.
    pub tr_jam_user: f64,
    /// Mean jamming energy per unit squared inner product: `τ·q_k·tr R̃_JM`.
    pub d: f64,
}

/// Computes the structural scalars from the cached beam-domain covariances.
pub(crate) fn structural_scalars(
    cfg: &SystemConfig,
    stats: &ChannelStatistics,
) -> StructuralScalars {
    let r_jam = stats.r_jam_beam.matrix();
    let r_user = stats.r_user_beam.matrix();
    let tr_jam = r_jam.trace().re;
    let fro2_jam = fro_norm(r_jam).powi(2);
    let tr_user = r_user.trace().re;
    let fro2_user = fro_norm(r_user).powi(2);
    let mut tr_jam_user = 0.0;
    for i in 0..r_jam.nrows() {
        for j in 0..r_jam.ncols() {
            tr_jam_user += (r_jam[(i, j)] * r_user[(j, i)]).re;
        }
    }
    StructuralScalars {
        tr_jam,
        fro2_jam,
        tr_user,
        theta: tr_user * tr_user + fro2_user,
        tr_jam_user,
        d: cfg.tau as f64 * cfg.q_k * tr_jam,
    }
}

/// First and second moments of the squared inner-product magnitudes
/// `x_i = |α_i|²`.
///
/// The orthonormal pilot book makes `α = Φᵀψ*` i.i.d. complex normal with
/// per-entry variance `1/τ`, so the squared magnitudes are i.i.d.
/// exponential: `E[x] = (1/τ)·1` and `E[x·xᵀ] = (1·1ᵀ + I)/τ²`.
pub fn inner_product_sq_moments(tau: usize) -> Result<(RVec, RMat)> {
    if tau < 2 {
        return Err(Error::InvalidParameter(format!(
            "pilot length must be at least 2, got {tau}"
        )));
    }
    let t = tau as f64;
    let e_x = RVec::from_element(tau, 1.0 / t);
    let e_xx = RMat::from_fn(tau, tau, |i, j| if i == j { 2.0 } else { 1.0 } / (t * t));
    Ok((e_x, e_xx))
}

/// Intermediate closed-form second-moment pieces shared by
/// [`residual_energy_moments`] and [`build_moment_model`].
struct EnergyMomentPieces {
    /// Mean used-pilot energy excluding the jamming term:
    /// `τp·tr R̃_k + N_b σ²`.
    e_v1: f64,
    /// Second moment of the used-pilot residual core.
    r11: f64,
    /// Cross moment between the used-pilot and an unused-pilot residual.
    r12: f64,
    /// Cross moment between two distinct unused-pilot residuals.
    r22: f64,
    /// Extra mass on the diagonal of the unused block (a residual's second
    /// moment exceeds the product of means by the chi-square variance and
    /// the jamming-energy fluctuation).
    diag_fix: f64,
}

fn energy_moment_pieces(cfg: &SystemConfig, geo: &StructuralScalars) -> EnergyMomentPieces {
    let n_b = cfg.n_b() as f64;
    let s2 = cfg.sigma2;
    let tp = cfg.tau as f64 * cfg.p_t;
    let q = cfg.q_k;
    let e_v1 = tp * geo.tr_user + n_b * s2;
    let r11 = tp * tp * geo.theta
        + 2.0 * q * q * geo.fro2_jam
        + (n_b + 1.0) * s2 * (2.0 * tp * geo.tr_user + n_b * s2)
        + 2.0 * tp * q * geo.tr_jam_user
        + 2.0 * q * s2 * geo.tr_jam;
    let r12 = n_b * s2 * (tp * geo.tr_user + n_b * s2) + q * q * geo.fro2_jam;
    let r22 = n_b * n_b * s2 * s2 + q * q * geo.fro2_jam;
    let diag_fix = 2.0 * q * s2 * geo.tr_jam + n_b * s2 * s2 + q * q * geo.fro2_jam;
    EnergyMomentPieces {
        e_v1,
        r11,
        r12,
        r22,
        diag_fix,
    }
}

/// Mean and second-moment matrix of the residual energies `ṽ = b − C·x`,
/// where `b` stacks the per-pilot observation energies `‖ȳ_i‖²` (used pilot
/// first) and `C = d·[−1ᵀ; I]` is the mean jamming-energy profile of the
/// unused squared magnitudes `x`.
///
/// The used-pilot residual keeps the full jamming energy `d·‖α‖²` (the `−1ᵀ`
/// row of `C` only removes the unused share), so its moments carry the
/// corresponding `d` terms; this keeps the closed forms consistent with the
/// decomposition `b = C·x + ṽ` that the norm estimator inverts.
pub fn residual_energy_moments(cfg: &SystemConfig, stats: &ChannelStatistics) -> (RVec, RMat) {
    let geo = structural_scalars(cfg, stats);
    residual_moments_from_scalars(cfg, &geo)
}

fn residual_moments_from_scalars(cfg: &SystemConfig, geo: &StructuralScalars) -> (RVec, RMat) {
    let pieces = energy_moment_pieces(cfg, geo);
    let tau = cfg.tau;
    let n_b = cfg.n_b() as f64;
    let s2 = cfg.sigma2;
    let d = geo.d;
    let mut e_v = RVec::from_element(tau, n_b * s2);
    e_v[0] = pieces.e_v1 + d;
    let mut e_vv = RMat::zeros(tau, tau);
    // E[ṽ₁²] = E[(b₁ + d·S)²] with S = Σ_{i≥2}|α_i|² ~ Gamma(τ−1, 1/τ):
    // the d² mass is 2d²/τ² (from E|α₁|⁴) + 2d²(τ−1)/τ² (cross) +
    // d²(τ−1)/τ (from E[S²]) = d²(τ+1)/τ.
    let t = tau as f64;
    e_vv[(0, 0)] = pieces.r11 + 2.0 * d * pieces.e_v1 + d * d * (t + 1.0) / t;
    for j in 1..tau {
        let cross = pieces.r12 + d * n_b * s2;
        e_vv[(0, j)] = cross;
        e_vv[(j, 0)] = cross;
        for jj in 1..tau {
            e_vv[(j, jj)] = pieces.r22;
        }
    }
    for j in 1..tau {
        e_vv[(j, j)] += pieces.diag_fix;
    }
    (e_v, e_vv)
}

/// Closed-form moment model behind the affine norm estimator.
///
/// Holds the prior moments of the unused squared magnitudes `x`, the
/// residual-energy moments, the linear map `C` with `b = C·x + ṽ`, and the
/// precomputed affine estimator `x̂ = G·b + c₀` built from the exact joint
/// moments of `(x, b)`.
#[derive(Clone, Debug)]
pub struct MomentModel {
    /// Prior mean of the unused squared magnitudes (`τ−1` entries).
    pub e_x: RVec,
    /// Prior second-moment matrix `E[x·xᵀ]`.
    pub e_xx: RMat,
    /// Residual-energy mean (`τ` entries, used pilot first).
    pub e_v: RVec,
    /// Residual-energy second-moment matrix `E[ṽ·ṽᵀ]`.
    pub e_vv: RMat,
    /// Mean jamming-energy profile: `τ×(τ−1)` matrix `d·[−1ᵀ; I]`.
    pub c: RMat,
    /// Exact mean of the energy vector `b`.
    pub e_b: RVec,
    /// Affine estimator gain `G = Cov(x,b)·Cov(b)⁻¹` (`(τ−1)×τ`).
    pub gain: RMat,
    /// Affine estimator intercept `c₀ = E[x] − G·E[b]`.
    pub intercept: RVec,
    /// Structural scalars reused by the magnitude estimators.
    pub(crate) geo: StructuralScalars,
}

impl MomentModel {
    /// Pilot length τ the model was built for.
    pub fn tau(&self) -> usize {
        self.e_v.len()
    }
}

/// Solves `A·X = B` for symmetric positive-definite real `A`, with the same
/// scaled-jitter retry ladder as the complex positive-definite solver.
fn spd_solve_real(a: &RMat, b: &RMat) -> Result<RMat> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol.solve(b));
    }
    let scale = a.trace() / a.nrows() as f64;
    let mut delta = tol::JITTER_START;
    for _ in 0..=tol::JITTER_DOUBLINGS {
        let jittered = a + RMat::identity(a.nrows(), a.ncols()) * (delta * scale);
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol.solve(b));
        }
        delta *= 2.0;
    }
    Err(Error::Singular)
}

/// Builds the [`MomentModel`] for a configuration: lemma moments, the map
/// `C`, the exact joint moments of `(x, b)`, and the affine estimator
/// `(G, c₀)` they induce.
pub fn build_moment_model(cfg: &SystemConfig, stats: &ChannelStatistics) -> Result<MomentModel> {
    let tau = cfg.tau;
    if tau < 2 {
        return Err(Error::InvalidParameter(format!(
            "pilot length must be at least 2, got {tau}"
        )));
    }
    let m = tau - 1;
    let t = tau as f64;
    let n_b = cfg.n_b() as f64;
    let s2 = cfg.sigma2;
    let geo = structural_scalars(cfg, stats);
    let d = geo.d;
    let pieces = energy_moment_pieces(cfg, &geo);
    let (e_v, e_vv) = residual_moments_from_scalars(cfg, &geo);

    // Prior moments of the unused squared magnitudes (i.i.d. across pilots,
    // so restricting the pilot index keeps the same entries).
    let e_x = RVec::from_element(m, 1.0 / t);
    let e_xx = RMat::from_fn(m, m, |i, j| if i == j { 2.0 } else { 1.0 } / (t * t));

    let mut c = RMat::zeros(tau, m);
    for j in 0..m {
        c[(0, j)] = -d;
        c[(j + 1, j)] = d;
    }

    // Exact joint moments of (x, b).  The used-pilot energy couples to every
    // x_i through the total-energy constraint ‖α‖² = x_1 + Σx_i; the unused
    // energies couple through their own magnitude and the shared noise.
    let mut e_b = RVec::from_element(tau, d / t + n_b * s2);
    e_b[0] = d / t + pieces.e_v1;
    let mut e_xb = RMat::zeros(m, tau);
    for i in 0..m {
        e_xb[(i, 0)] = e_x[i] * e_b[0];
        for j in 0..m {
            e_xb[(i, j + 1)] = d * e_xx[(i, j)] + n_b * s2 / t;
        }
    }
    let mut e_bb = RMat::zeros(tau, tau);
    e_bb[(0, 0)] = 2.0 * d * d / (t * t) + 2.0 * d * pieces.e_v1 / t + pieces.r11;
    for j in 1..tau {
        let cross = e_b[0] * e_b[1] + cfg.q_k * cfg.q_k * geo.fro2_jam;
        e_bb[(0, j)] = cross;
        e_bb[(j, 0)] = cross;
        for jj in 1..tau {
            e_bb[(j, jj)] = d * d / (t * t) + 2.0 * d * n_b * s2 / t + pieces.r22;
        }
    }
    for j in 1..tau {
        e_bb[(j, j)] += d * d / (t * t) + pieces.diag_fix;
    }

    let cov_xb = &e_xb - &e_x * e_b.transpose();
    let cov_bb = &e_bb - &e_b * e_b.transpose();
    let gain = spd_solve_real(&cov_bb, &cov_xb.transpose())?.transpose();
    let intercept = &e_x - &gain * &e_b;
    Ok(MomentModel {
        e_x,
        e_xx,
        e_v,
        e_vv,
        c,
        e_b,
        gain,
        intercept,
        geo,
    })
}

/// Stacks the per-pilot observation energies `b_i = ‖ȳ_i‖²`, used pilot
/// first.
fn energy_vector(obs: &TrainingObservations) -> RVec {
    RVec::from_fn(obs.tau(), |i, _| {
        if i == 0 {
            obs.y_used.norm_squared()
        } else {
            obs.y_unused[i - 1].norm_squared()
        }
    })
}

/// Estimates the squared magnitudes of the unused-pilot inner products:
/// `x̂ = max(G·b + c₀, 0)` with the affine estimator from the moment model.
/// The clamp enforces the nonnegativity that the affine form cannot.
pub fn estimate_norms(obs: &TrainingObservations, model: &MomentModel) -> Result<RVec> {
    if obs.tau() != model.tau() {
        return Err(Error::DimensionMismatch {
            context: "estimate_norms",
            expected: model.tau(),
            got: obs.tau(),
        });
    }
    let b = energy_vector(obs);
    let x = &model.gain * b + &model.intercept;
    Ok(x.map(|v| v.max(0.0)))
}

/// Estimates the phase differences `θ_i = ∠α_i − ∠α_2` of the unused-pilot
/// inner products through `θ̂_i = ∠(ȳ_2ᴴ·ȳ_i/N_b)` for `i = 3,…,τ`.
///
/// Returns an empty vector when `τ = 2` (no unused pair to compare).  An
/// exactly zero bilinear form carries no phase information and maps to 0.
pub fn estimate_phase_diffs(obs: &TrainingObservations) -> RVec {
    let tau = obs.tau();
    if tau < 3 {
        return RVec::zeros(0);
    }
    let n_b = obs.n_b() as f64;
    RVec::from_fn(tau - 2, |k, _| {
        (obs.y_unused[0].dotc(&obs.y_unused[k + 1]) / n_b).arg()
    })
}

/// Estimates the used-pilot inner-product magnitude `|α₁|` as the convex
/// blend `ε·budget + (1−ε)·energy` of two readings:
///
/// * the norm-budget reading `√max(1 − Σx̂, 0)` — the inner products carry
///   unit total energy in the mean, so the unused mass bounds the rest;
/// * the matched-energy reading `√(max(‖ȳ_1‖² − τp·tr R̃_k − N_b σ², 0)/d)`
///   — the used-pilot energy in excess of signal plus noise is jamming.
///
/// Without jamming power (`q_k = 0` makes `d = 0`) the energy reading is
/// undefined and the budget reading is returned alone.
pub fn estimate_alpha1_norm(
    obs: &TrainingObservations,
    norms_sq: &RVec,
    cfg: &SystemConfig,
    model: &MomentModel,
) -> Result<f64> {
    if norms_sq.len() + 1 != model.tau() || obs.tau() != model.tau() || cfg.tau != model.tau() {
        return Err(Error::DimensionMismatch {
            context: "estimate_alpha1_norm",
            expected: model.tau(),
            got: norms_sq.len() + 1,
        });
    }
    let budget = (1.0 - norms_sq.sum()).max(0.0).sqrt();
    let d = model.geo.d;
    if d <= 0.0 {
        return Ok(budget);
    }
    let tp = cfg.tau as f64 * cfg.p_t;
    let excess = obs.y_used.norm_squared() - tp * model.geo.tr_user - cfg.n_b() as f64 * cfg.sigma2;
    let energy = (excess.max(0.0) / d).sqrt();
    Ok(cfg.epsilon * budget + (1.0 - cfg.epsilon) * energy)
}

/// Recovered jamming inner products of one training round.
#[derive(Clone, Debug)]
pub struct InnerProductEstimate {
    /// Squared magnitudes of the unused-pilot inner products (`τ−1`).
    pub norms_sq: RVec,
    /// Phase differences relative to the first unused pilot (`τ−2`).
    pub phase_diffs: RVec,
    /// Magnitude of the used-pilot inner product.
    pub alpha1_norm: f64,
    /// Assembled rotation-normalized vector `ᾱ̂` (`τ−1` entries, first one
    /// real): `ᾱ̂_1 = √x̂_1`, `ᾱ̂_i = √x̂_i·e^{jθ̂_i}`.
    pub alpha_bar: CVec,
}

/// Runs the full inner-product recovery: squared magnitudes, phase
/// differences, used-pilot magnitude, and the assembled `ᾱ̂`.
pub fn estimate_inner_products(
    obs: &TrainingObservations,
    model: &MomentModel,
    cfg: &SystemConfig,
) -> Result<InnerProductEstimate> {
    let norms_sq = estimate_norms(obs, model)?;
    let phase_diffs = estimate_phase_diffs(obs);
    let alpha1_norm = estimate_alpha1_norm(obs, &norms_sq, cfg, model)?;
    let mut alpha_bar = CVec::zeros(norms_sq.len());
    alpha_bar[0] = C64::new(norms_sq[0].sqrt(), 0.0);
    for k in 1..norms_sq.len() {
        alpha_bar[k] = C64::from_polar(norms_sq[k].sqrt(), phase_diffs[k - 1]);
    }
    Ok(InnerProductEstimate {
        norms_sq,
        phase_diffs,
        alpha1_norm,
        alpha_bar,
    })
}

/// Precomputed linear MMSE estimator of the jammer's equivalent channel
/// given the rotation-normalized inner products.
///
/// The estimator is `ĥ_JM = conj(√(τq)·kron(ᾱᴴ, R_JM·U_JM)·M⁻¹·ȳ)` with
/// `M = τq·(ᾱᾱᴴ)⊗R̃_JM + σ²I` over the stacked unused observations: the
/// rank-one structure of `ᾱᾱᴴ` collapses the stacked solve onto the matched
/// combination `w = Σ_i ᾱ_i*·ȳ_i`, and the cached eigendecomposition of
/// `R̃_JM` turns the remaining inverse into per-eigenvector scalar gains.
#[derive(Clone, Debug)]
pub struct JammerMmseOperator {
    /// `R_JM·W_BS` (`M_BS × N_BS`); the jam map repeats each combiner over
    /// the user beams, so the output map folds slots onto combiners.
    rjw: CMat,
    /// Positive eigenvalues of the beam-domain jammer covariance.
    eig_vals: Vec<f64>,
    /// Matching eigenvectors (`N_b × rank`).
    eig_vecs: CMat,
    tau_q: f64,
    sigma2: f64,
    n_ue: usize,
}

/// Builds the [`JammerMmseOperator`] from the cached statistics.
pub fn build_jammer_mmse(
    cfg: &SystemConfig,
    stats: &ChannelStatistics,
) -> Result<JammerMmseOperator> {
    if cfg.sigma2 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "jammer MMSE requires σ² > 0, got {}",
            cfg.sigma2
        )));
    }
    let evd = &stats.jam_beam_evd;
    let rank = evd.rank();
    Ok(JammerMmseOperator {
        rjw: stats.r_jam.matrix() * &stats.w_bs,
        eig_vals: evd.positive_eigenvalues(),
        eig_vecs: evd.eigenvectors.columns(0, rank).into_owned(),
        tau_q: cfg.tau as f64 * cfg.q_k,
        sigma2: cfg.sigma2,
        n_ue: cfg.n_ue,
    })
}

impl JammerMmseOperator {
    /// MMSE estimate of the rotation-normalized jammer channel
    /// `h̄ = h_JM·e^{−j∠α₂}` from the unused-pilot observations.
    pub fn estimate(&self, obs: &TrainingObservations, alpha_bar: &CVec) -> Result<CVec> {
        let n_b = self.eig_vecs.nrows();
        if obs.n_b() != n_b {
            return Err(Error::DimensionMismatch {
                context: "JammerMmseOperator::estimate",
                expected: n_b,
                got: obs.n_b(),
            });
        }
        if alpha_bar.len() != obs.y_unused.len() {
            return Err(Error::DimensionMismatch {
                context: "JammerMmseOperator::estimate",
                expected: obs.y_unused.len(),
                got: alpha_bar.len(),
            });
        }
        let one = C64::new(1.0, 0.0);
        let mut w = CVec::zeros(n_b);
        for (i, y) in obs.y_unused.iter().enumerate() {
            w.axpy(alpha_bar[i].conj(), y, one);
        }
        // M⁻¹·w = (w − Σ_k gain_k·v_k·(v_kᴴw))/σ² with gain_k = cλ_k/(cλ_k+σ²).
        let c = self.tau_q * alpha_bar.norm_squared();
        let mut corrected = w.clone();
        for (k, &lam) in self.eig_vals.iter().enumerate() {
            let v = self.eig_vecs.column(k);
            let gain = c * lam / (c * lam + self.sigma2);
            let coef = v.dotc(&w) * gain;
            corrected.axpy(-coef, &v, one);
        }
        let minv_w = corrected.unscale(self.sigma2);
        // Fold slots onto combiners (the jam map repeats each combiner
        // across the N_UE user beams of its cycle).
        let n_bs = n_b / self.n_ue;
        let mut folded = CVec::zeros(n_bs);
        for q in 0..n_bs {
            for p in 0..self.n_ue {
                folded[q] += minv_w[q * self.n_ue + p];
            }
        }
        // conj(√(τq)·conj(R_JM·W_BS)·folded) = √(τq)·R_JM·W_BS·conj(folded).
        Ok((&self.rjw * folded.conjugate()).scale(self.tau_q.sqrt()))
    }
}

/// One-shot convenience wrapper: builds the operator and estimates once.
pub fn estimate_jammer_channel(
    obs: &TrainingObservations,
    alpha_bar: &CVec,
    cfg: &SystemConfig,
    stats: &ChannelStatistics,
) -> Result<CVec> {
    build_jammer_mmse(cfg, stats)?.estimate(obs, alpha_bar)
}

/// Precomputed per-subband MMSE estimator of the user channel
/// `ĥ_U = √(τp)·R_U·U_U*·[τp·R̃_k* + τq|α₁|²·R̃_JM* + σ²I]⁻¹·ȳ_1*`.
///
/// A generalized eigenbasis `Φ` diagonalizes the jamming-free covariance to
/// the identity and the jammer covariance to `diag(λ)` simultaneously, so
/// the bracketed inverse reduces to per-coordinate gains for any `|α₁|²`
/// reading — known, estimated, or zero (the jamming-ignorant receiver).
#[derive(Clone, Debug)]
pub struct UserMmseOperator {
    /// `Φᴴ` with `Φᴴ(τp·R̃_k* + σ²I)Φ = I` and `Φᴴ·R̃_JM*·Φ = diag(λ)`.
    phi_h: CMat,
    /// Generalized eigenvalues λ, clamped at zero.
    lambda: RVec,
    /// Output map `R_U·U_U*·Φ` (`M_BS·M_UE × N_b`).
    back: CMat,
    tau_p: f64,
    tau_q: f64,
}

/// Builds the [`UserMmseOperator`]; the cost is one Cholesky factorization,
/// one Hermitian eigendecomposition, and one tall matrix product.
pub fn build_user_mmse(cfg: &SystemConfig, stats: &ChannelStatistics) -> Result<UserMmseOperator> {
    if cfg.sigma2 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "user MMSE requires σ² > 0, got {}",
            cfg.sigma2
        )));
    }
    let n_b = cfg.n_b();
    let tau_p = cfg.tau as f64 * cfg.p_t;
    let tau_q = cfg.tau as f64 * cfg.q_k;
    // Jamming-free covariance of ȳ_1* and the whitened jammer covariance.
    let mut m0 = stats.r_user_beam.matrix().conjugate().scale(tau_p);
    for i in 0..n_b {
        m0[(i, i)] += C64::new(cfg.sigma2, 0.0);
    }
    let chol = Cholesky::new(m0).ok_or(Error::Singular)?;
    let l = chol.l();
    let c_jam = stats.r_jam_beam.matrix().conjugate();
    let x = l.solve_lower_triangular(&c_jam).ok_or(Error::Singular)?;
    let s = l
        .solve_lower_triangular(&x.adjoint())
        .ok_or(Error::Singular)?
        .adjoint();
    let evd = hermitian_evd(&HermitianMatrix::symmetrize(s));
    let lambda = evd.eigenvalues.map(|v| v.max(0.0));
    let phi = l
        .adjoint()
        .solve_upper_triangular(&evd.eigenvectors)
        .ok_or(Error::Singular)?;
    // Output map columns: R_k·conj(w_p ⊗ conj(w_q)) = (R_UE·w_p*) ⊗ (R_BS·w_q).
    let ruw = stats.r_ue.matrix() * stats.w_ue.conjugate();
    let rbw = stats.r_bs.matrix() * &stats.w_bs;
    let m_bs = cfg.m_bs;
    let n_ue = cfg.n_ue;
    let rk_ust = CMat::from_fn(cfg.m_bs * cfg.m_ue, n_b, |r, n| {
        ruw[(r / m_bs, n % n_ue)] * rbw[(r % m_bs, n / n_ue)]
    });
    let back = &rk_ust * &phi;
    Ok(UserMmseOperator {
        phi_h: phi.adjoint(),
        lambda,
        back,
        tau_p,
        tau_q,
    })
}

impl UserMmseOperator {
    /// Number of beacon slots the operator expects.
    pub fn n_b(&self) -> usize {
        self.lambda.len()
    }

    /// Estimates the user channel from the used-pilot observation under the
    /// jammer-power reading `|α₁|²` assumed by the receiver (0 for a
    /// jamming-ignorant receiver).
    pub fn estimate(&self, y_used: &CVec, alpha1_sq: f64) -> Result<CVec> {
        Ok(self
            .estimate_multi(y_used, &[alpha1_sq])?
            .pop()
            .expect("one reading yields one estimate"))
    }

    /// [`Self::estimate`] for several `|α₁|²` readings at once, sharing the
    /// whitened projection of the observation across them.
    pub fn estimate_multi(&self, y_used: &CVec, alpha1_sq: &[f64]) -> Result<Vec<CVec>> {
        let n_b = self.n_b();
        if y_used.len() != n_b {
            return Err(Error::DimensionMismatch {
                context: "UserMmseOperator::estimate",
                expected: n_b,
                got: y_used.len(),
            });
        }
        let t0 = &self.phi_h * y_used.conjugate();
        let scale = self.tau_p.sqrt();
        alpha1_sq
            .iter()
            .map(|&a| {
                if a < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "|α₁|² reading must be nonnegative, got {a}"
                    )));
                }
                let t = CVec::from_fn(n_b, |k, _| {
                    t0[k] / (1.0 + self.tau_q * a * self.lambda[k])
                });
                Ok((&self.back * t).scale(scale))
            })
            .collect()
    }
}

/// Linear-scale normalized squared error `‖ĥ − h‖²/‖h‖²`.
pub fn linear_nmse(estimate: &CVec, truth: &CVec) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "linear_nmse",
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let denom = truth.norm_squared();
    if denom == 0.0 {
        return Err(Error::InvalidParameter(
            "NMSE is undefined for a zero ground-truth channel".into(),
        ));
    }
    Ok((estimate - truth).norm_squared() / denom)
}

/// `10·log₁₀(x)` with `0 ↦ −∞` (the sentinel used in CSV output for exact
/// estimates).
pub fn to_db(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * x.log10()
    }
}

/// dB view of [`linear_nmse`]; an exact estimate maps to `−∞`.
pub fn nmse_db(estimate: &CVec, truth: &CVec) -> Result<f64> {
    Ok(to_db(linear_nmse(estimate, truth)?))
}

/// The rotation-normalized jammer channel `h̄ = h_JM·e^{−j∠α₂}` — the target
/// the jammer estimator can identify, since a common phase of the jamming
/// pilot is unobservable and the convention pins the first unused inner
/// product to the positive real axis.
pub fn regauge_jammer(h_jam: &CVec, alpha: &CVec) -> CVec {
    let rot = C64::from_polar(1.0, -alpha[1].arg());
    h_jam.map(|z| rot * z)
}

/// True phase differences `∠α_i − ∠α_2` for `i = 3,…,τ` (empty when
/// `τ < 3`), the quantities [`estimate_phase_diffs`] recovers.
pub fn true_phase_diffs(alpha: &CVec) -> RVec {
    if alpha.len() < 3 {
        return RVec::zeros(0);
    }
    let base = alpha[1].arg();
    RVec::from_fn(alpha.len() - 2, |k, _| alpha[k + 2].arg() - base)
}

/// Channel estimates of one trial together with their per-realization
/// accuracies.
#[derive(Clone, Debug)]
pub struct ChannelEstimates {
    /// User-channel estimate (length `M_BS·M_UE`).
    pub h_user_hat: CVec,
    /// Jammer-channel estimate (length `M_BS`), normalized like `h̄`.
    pub h_jam_hat: CVec,
    /// `‖ĥ_U − h_U‖²/‖h_U‖²` in dB.
    pub nmse_user_db: f64,
    /// `‖ĥ_JM − h̄‖²/‖h̄‖²` in dB.
    pub nmse_jam_db: f64,
}

/// Bundles the two channel estimates with their per-realization NMSEs; the
/// jammer truth must already carry the rotation normalization (see
/// [`regauge_jammer`]).
pub fn channel_estimates(
    h_user_hat: CVec,
    h_user: &CVec,
    h_jam_hat: CVec,
    h_jam_reference: &CVec,
) -> Result<ChannelEstimates> {
    let nmse_user_db = nmse_db(&h_user_hat, h_user)?;
    let nmse_jam_db = nmse_db(&h_jam_hat, h_jam_reference)?;
    Ok(ChannelEstimates {
        h_user_hat,
        h_jam_hat,
        nmse_user_db,
        nmse_jam_db,
    })
}

/// Per-trial estimation quality summary.
#[derive(Clone, Copy, Debug)]
pub struct EstimationMetrics {
    /// Squared error of the used-pilot magnitude `(|α̂₁| − |α₁|)²`.
    pub mse_alpha1: f64,
    /// Mean squared error of the unused-pilot magnitudes
    /// `mean_i (√x̂_i − |α_i|)²`.
    pub mse_norms: f64,
    /// Mean cosine similarity of the phase differences
    /// `mean_i cos(θ̂_i − θ_i)`; 1 when there is no phase pair (`τ = 2`).
    pub cos_similarity: f64,
    /// Per-trial user-channel NMSE in dB.
    pub nmse_user_db: f64,
    /// Per-trial jammer-channel NMSE in dB.
    pub nmse_jam_db: f64,
}

/// Mean squared error of estimated unused-pilot magnitudes against the true
/// inner products: `mean_i (√x̂_i − |α_{i+1}|)²`.
pub fn norms_mse(norms_sq: &RVec, alpha: &CVec) -> Result<f64> {
    if alpha.len() != norms_sq.len() + 1 {
        return Err(Error::DimensionMismatch {
            context: "norms_mse",
            expected: norms_sq.len() + 1,
            got: alpha.len(),
        });
    }
    Ok((0..norms_sq.len())
        .map(|i| (norms_sq[i].sqrt() - alpha[i + 1].norm()).powi(2))
        .sum::<f64>()
        / norms_sq.len() as f64)
}

/// Scores one trial's inner-product estimate against the true inner
/// products: `(MSE of |α̂₁|, MSE of the unused magnitudes, mean cosine of
/// the phase-difference errors)`.
pub fn inner_product_metrics(est: &InnerProductEstimate, alpha: &CVec) -> Result<(f64, f64, f64)> {
    let mse_norms = norms_mse(&est.norms_sq, alpha)?;
    let mse_alpha1 = (est.alpha1_norm - alpha[0].norm()).powi(2);
    let cos_similarity = if est.phase_diffs.is_empty() {
        1.0
    } else {
        let truth = true_phase_diffs(alpha);
        (0..est.phase_diffs.len())
            .map(|k| (est.phase_diffs[k] - truth[k]).cos())
            .sum::<f64>()
            / est.phase_diffs.len() as f64
    };
    Ok((mse_alpha1, mse_norms, cos_similarity))
}

/// Per-pilot matched-energy baseline for the squared magnitudes:
/// `x̂_i = max((‖ȳ_i‖² − N_b σ²)/d, 0)`.
///
/// Reads each unused pilot's energy in isolation — consistent as the slot
/// count grows but blind to the cross-pilot energy coupling the affine
/// estimator exploits.  Undefined without jamming power (`d = 0`).
pub fn estimate_norms_energy_baseline(
    obs: &TrainingObservations,
    cfg: &SystemConfig,
    model: &MomentModel,
) -> Result<RVec> {
    if obs.tau() != model.tau() {
        return Err(Error::DimensionMismatch {
            context: "estimate_norms_energy_baseline",
            expected: model.tau(),
            got: obs.tau(),
        });
    }
    let d = model.geo.d;
    if d <= 0.0 {
        return Err(Error::InvalidParameter(
            "energy-baseline norms need q_k > 0".into(),
        ));
    }
    let floor = cfg.n_b() as f64 * cfg.sigma2;
    Ok(RVec::from_fn(model.tau() - 1, |i, _| {
        (obs.y_unused[i].norm_squared() - floor).max(0.0) / d
    }))
}

/// Scores one trial's inner-product estimate against the true inner
/// products and carries over the per-trial channel NMSEs.
pub fn metrics(
    est: &InnerProductEstimate,
    alpha: &CVec,
    channels: &ChannelEstimates,
) -> Result<EstimationMetrics> {
    let (mse_alpha1, mse_norms, cos_similarity) = inner_product_metrics(est, alpha)?;
    Ok(EstimationMetrics {
        mse_alpha1,
        mse_norms,
        cos_similarity,
        nmse_user_db: channels.nmse_user_db,
        nmse_jam_db: channels.nmse_jam_db,
    })
}
