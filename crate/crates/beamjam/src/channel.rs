//! Spatial correlation models, DFT codebooks, combined transceiver beam
//! maps, and beam-domain covariance statistics.
//!
//! The scenario is uplink beam training: over one training round the base
//! station cycles through `N_BS` analog combiners while the user sweeps its
//! `N_UE` transmit beams inside each cycle, producing `N_b = N_BS·N_UE`
//! beacon slots.  Slot `n = q·N_UE + p` uses BS combiner `q` and user beam
//! `p`.  All antenna-domain covariances follow the exponential correlation
//! model, and beam-domain covariances are obtained by projecting through the
//! combined beamforming maps.

use nalgebra::DMatrix;
use rand::Rng;

use crate::numerics::{
    hermitian_evd, kron, psd_sqrt, standard_complex_matrix, standard_complex_vector, C64, CMat,
    CVec, EigenDecomposition, HermitianMatrix,
};
use crate::{Error, Result};

/// All scenario scalars: geometry, codebook sizes, powers, pilot length,
/// correlation coefficients, estimator weighting, and the RNG seed.
///
/// Powers are linear (dB conversion happens at the configuration boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// BS antenna count.
    pub m_bs: usize,
    /// User antenna count.
    pub m_ue: usize,
    /// Jammer antenna count (the jammer precoder is folded into its
    /// equivalent channel, so this only documents the scenario).
    pub m_jm: usize,
    /// Number of users; subbands are i.i.d., so trials simulate one user
    /// and `k_users` only affects metric-averaging semantics.
    pub k_users: usize,
    /// Pilot length (≥ 2 so at least one pilot stays unused).
    pub tau: usize,
    /// Number of BS combiner cycles.
    pub n_bs: usize,
    /// Number of user beams swept per cycle.
    pub n_ue: usize,
    /// User pilot power (linear).
    pub p_t: f64,
    /// Jammer per-subband power (linear).
    pub q_k: f64,
    /// Noise variance (linear).
    pub sigma2: f64,
    /// BS-side correlation coefficient in `[0, 1]`.
    pub rho_bs: f64,
    /// User-side correlation coefficient in `[0, 1]`.
    pub rho_ue: f64,
    /// Jammer-side correlation coefficient in `[0, 1]`.
    pub rho_jm: f64,
    /// Weight of the norm-budget estimate in the combined `|α₁|` estimator.
    pub epsilon: f64,
    /// Master RNG seed.
    pub seed: u64,
}

impl SystemConfig {
    /// Total beacon-slot count `N_b = N_BS·N_UE`.
    pub fn n_b(&self) -> usize {
        self.n_bs * self.n_ue
    }

    /// Validates every invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if self.tau < 2 {
            return fail(format!("tau must be ≥ 2, got {}", self.tau));
        }
        if self.n_bs == 0 || self.n_ue == 0 {
            return fail("codebook sizes must be positive".into());
        }
        if self.n_bs > self.m_bs {
            return fail(format!("n_bs = {} exceeds m_bs = {}", self.n_bs, self.m_bs));
        }
        if self.n_ue > self.m_ue {
            return fail(format!("n_ue = {} exceeds m_ue = {}", self.n_ue, self.m_ue));
        }
        if self.m_jm == 0 || self.k_users == 0 {
            return fail("antenna/user counts must be positive".into());
        }
        for (name, value) in [("p_t", self.p_t), ("q_k", self.q_k), ("sigma2", self.sigma2)] {
            if !value.is_finite() || value < 0.0 {
                return fail(format!("{name} must be a nonnegative finite power, got {value}"));
            }
        }
        for (name, value) in [
            ("rho_bs", self.rho_bs),
            ("rho_ue", self.rho_ue),
            ("rho_jm", self.rho_jm),
            ("epsilon", self.epsilon),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return fail(format!("{name} must lie in [0, 1], got {value}"));
            }
        }
        Ok(())
    }
}

/// Exponential correlation matrix: entry `(m, n) = ρ^|m−n|`.
pub fn exp_corr(m: usize, rho: f64) -> Result<HermitianMatrix> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "correlation coefficient must lie in [0, 1], got {rho}"
        )));
    }
    let mat = DMatrix::<f64>::from_fn(m, m, |i, j| rho.powi((i as i32 - j as i32).abs()));
    HermitianMatrix::from_real(&mat)
}

/// A set of unit-power constant-modulus beamforming vectors.
#[derive(Clone, Debug)]
pub struct Codebook {
    /// `M×size` matrix whose columns are the beam vectors.
    pub mat: CMat,
}

impl Codebook {
    /// Number of beams.
    pub fn len(&self) -> usize {
        self.mat.ncols()
    }

    /// True when the codebook holds no beams.
    pub fn is_empty(&self) -> bool {
        self.mat.ncols() == 0
    }

    /// Borrow beam `q` as a column view.
    pub fn beam(&self, q: usize) -> CVec {
        self.mat.column(q).into_owned()
    }
}

/// `M`-point DFT matrix with unit-norm columns:
/// entry `(n, q) = exp(j2π·n·q/M)/√M` (zero-based indices).
pub(crate) fn dft_matrix(m: usize) -> CMat {
    let scale = 1.0 / (m as f64).sqrt();
    CMat::from_fn(m, m, |n, q| {
        let phase = 2.0 * std::f64::consts::PI * (n as f64) * (q as f64) / (m as f64);
        C64::new(phase.cos() * scale, phase.sin() * scale)
    })
}

/// Standard `M`-point DFT codebook: `M` unit-norm mutually orthogonal
/// constant-modulus beams.
pub fn dft_codebook(m: usize) -> Codebook {
    Codebook { mat: dft_matrix(m) }
}

/// Combined transceiver beamforming maps in beacon-slot order.
///
/// Slot `n = q·N_UE + p` applies BS combiner `w_q` and user beam `w_p`; its
/// combined row is `w_pᴴ ⊗ w_qᵀ`, so the stored column is that row's
/// adjoint.  Applying `U·ᴴ` to a conjugated channel vector then reproduces
/// the per-slot combining exactly.
#[derive(Clone, Debug)]
pub struct BeamMaps {
    /// `M_BS·M_UE × N_b` map for the user channel; column `q·N_UE + p` is
    /// `w_p ⊗ conj(w_q)`.
    pub u_user: CMat,
    /// `M_BS × N_b` map for the jammer channel; column `q·N_UE + p` is
    /// `conj(w_q)` (each combiner repeated `N_UE` times).
    pub u_jam: CMat,
}

/// Builds the combined beam maps from the first `N_BS`/`N_UE` codebook
/// columns (beams are selected sequentially from the front of each book).
pub fn build_beam_maps(cfg: &SystemConfig, bs_book: &Codebook, ue_book: &Codebook) -> Result<BeamMaps> {
    if bs_book.mat.nrows() != cfg.m_bs || bs_book.len() < cfg.n_bs {
        return Err(Error::DimensionMismatch {
            context: "build_beam_maps (BS codebook)",
            expected: cfg.n_bs,
            got: bs_book.len(),
        });
    }
    if ue_book.mat.nrows() != cfg.m_ue || ue_book.len() < cfg.n_ue {
        return Err(Error::DimensionMismatch {
            context: "build_beam_maps (UE codebook)",
            expected: cfg.n_ue,
            got: ue_book.len(),
        });
    }
    let n_b = cfg.n_b();
    let mut u_user = CMat::zeros(cfg.m_bs * cfg.m_ue, n_b);
    let mut u_jam = CMat::zeros(cfg.m_bs, n_b);
    for q in 0..cfg.n_bs {
        let w_q_conj = bs_book.mat.column(q).map(|z| z.conj());
        for p in 0..cfg.n_ue {
            let n = q * cfg.n_ue + p;
            let w_p = ue_book.mat.column(p);
            // w_p ⊗ conj(w_q), laid out so index ue·M_BS + bs matches the
            // column-major vectorization of the M_BS×M_UE channel matrix.
            for ue in 0..cfg.m_ue {
                for bs in 0..cfg.m_bs {
                    u_user[(ue * cfg.m_bs + bs, n)] = w_p[ue] * w_q_conj[bs];
                }
            }
            u_jam.set_column(n, &w_q_conj);
        }
    }
    Ok(BeamMaps { u_user, u_jam })
}

/// Antenna- and beam-domain covariance statistics with cached
/// eigendecompositions and sampling factors.
///
/// Immutable after construction and shared across concurrent trials.
#[derive(Clone, Debug)]
pub struct ChannelStatistics {
    /// User-channel covariance `kron(R_UE, R_BS)` (dimension `M_BS·M_UE`).
    pub r_user: HermitianMatrix,
    /// Jammer equivalent-channel covariance (dimension `M_BS`).
    pub r_jam: HermitianMatrix,
    /// Beam-domain user covariance `U_userᴴ·conj(R_user)·U_user`.
    pub r_user_beam: HermitianMatrix,
    /// Beam-domain jammer covariance `U_jamᴴ·conj(R_jam)·U_jam`.
    pub r_jam_beam: HermitianMatrix,
    /// Cached eigendecomposition of `r_jam_beam`.
    pub jam_beam_evd: EigenDecomposition,
    /// BS-side antenna covariance factor.
    pub(crate) r_bs: HermitianMatrix,
    /// UE-side antenna covariance factor.
    pub(crate) r_ue: HermitianMatrix,
    /// Selected BS codebook columns (`M_BS × N_BS`).
    pub(crate) w_bs: CMat,
    /// Selected UE codebook columns (`M_UE × N_UE`).
    pub(crate) w_ue: CMat,
    /// PSD square roots used for channel sampling.
    pub(crate) r_bs_sqrt: CMat,
    pub(crate) r_ue_sqrt: CMat,
    pub(crate) r_jm_sqrt: CMat,
}

/// Recovers the selected codebook columns from the beam maps.
///
/// `u_jam` stores `conj(w_q)` once per cycle; `u_user` columns factor as
/// `w_p ⊗ conj(w_q)`, whose first `M_BS` block divided by the known BS entry
/// yields `w_p` (DFT entries are never zero).
fn codebooks_from_maps(cfg: &SystemConfig, maps: &BeamMaps) -> Result<(CMat, CMat)> {
    if maps.u_jam.nrows() != cfg.m_bs
        || maps.u_jam.ncols() != cfg.n_b()
        || maps.u_user.nrows() != cfg.m_bs * cfg.m_ue
        || maps.u_user.ncols() != cfg.n_b()
    {
        return Err(Error::DimensionMismatch {
            context: "build_statistics (maps vs config)",
            expected: cfg.n_b(),
            got: maps.u_jam.ncols(),
        });
    }
    let mut w_bs = CMat::zeros(cfg.m_bs, cfg.n_bs);
    for q in 0..cfg.n_bs {
        let col = maps.u_jam.column(q * cfg.n_ue).map(|z| z.conj());
        w_bs.set_column(q, &col);
    }
    let anchor = w_bs.column(0).map(|z| z.conj());
    if anchor[0].norm() == 0.0 {
        return Err(Error::Unsupported(
            "beam maps must come from a constant-modulus codebook".into(),
        ));
    }
    let mut w_ue = CMat::zeros(cfg.m_ue, cfg.n_ue);
    for p in 0..cfg.n_ue {
        let col = maps.u_user.column(p);
        for ue in 0..cfg.m_ue {
            w_ue[(ue, p)] = col[ue * cfg.m_bs] / anchor[0];
        }
    }
    Ok((w_bs, w_ue))
}

/// Builds all covariance statistics for a configuration.
///
/// Beam-domain matrices are computed with the conjugation written as
/// `Uᴴ·R*·U`; for the real-valued exponential model `R* = R`, but the
/// conjugation is applied literally.
pub fn build_statistics(cfg: &SystemConfig, maps: &BeamMaps) -> Result<ChannelStatistics> {
    cfg.validate()?;
    let (w_bs, w_ue) = codebooks_from_maps(cfg, maps)?;

    let r_bs = exp_corr(cfg.m_bs, cfg.rho_bs)?;
    let r_ue = exp_corr(cfg.m_ue, cfg.rho_ue)?;
    let r_jm = exp_corr(cfg.m_bs, cfg.rho_jm)?;

    let r_user = HermitianMatrix::symmetrize(kron(r_ue.matrix(), r_bs.matrix()));
    let r_jam = r_jm.clone();

    // Beam-domain factors: A = Wᴴ R W on each side.  With the column
    // convention of `BeamMaps`, Uᴴ R* U factors into Kronecker products of
    // these (conjugated on the BS side), which is also verified against the
    // literal projection in the test suite.
    let a_bs = w_bs.adjoint() * r_bs.matrix() * &w_bs;
    let a_ue = w_ue.adjoint() * r_ue.matrix() * &w_ue;
    let a_jm = w_bs.adjoint() * r_jm.matrix() * &w_bs;

    let ones = CMat::from_element(cfg.n_ue, cfg.n_ue, C64::new(1.0, 0.0));
    let r_user_beam = HermitianMatrix::symmetrize(kron(&a_bs.map(|z| z.conj()), &a_ue));
    let r_jam_beam = HermitianMatrix::symmetrize(kron(&a_jm.map(|z| z.conj()), &ones));
    let jam_beam_evd = hermitian_evd(&r_jam_beam);

    let r_bs_sqrt = psd_sqrt(&r_bs)?.into_matrix();
    let r_ue_sqrt = psd_sqrt(&r_ue)?.into_matrix();
    let r_jm_sqrt = psd_sqrt(&r_jm)?.into_matrix();

    Ok(ChannelStatistics {
        r_user,
        r_jam,
        r_user_beam,
        r_jam_beam,
        jam_beam_evd,
        r_bs,
        r_ue,
        w_bs,
        w_ue,
        r_bs_sqrt,
        r_ue_sqrt,
        r_jm_sqrt,
    })
}

/// Draws one user channel `h_user ~ CN(0, R_user)` and one jammer channel
/// `h_jam ~ CN(0, R_jam)`, independently.
///
/// The user draw exploits the Kronecker structure: with `G` i.i.d.
/// `CN(0, 1)` of shape `M_BS×M_UE`, `vec(R_BS^{1/2}·G·R_UE^{1/2,T})` is an
/// exact `CN(0, kron(R_UE, R_BS))` sample.  Draw order is fixed (user matrix
/// first, then the jammer vector) for reproducibility.
pub fn sample_channels<R: Rng + ?Sized>(
    stats: &ChannelStatistics,
    rng: &mut R,
) -> (CVec, CVec) {
    let m_bs = stats.r_bs.dim();
    let m_ue = stats.r_ue.dim();
    let g = standard_complex_matrix(m_bs, m_ue, rng);
    let h_mat = &stats.r_bs_sqrt * g * stats.r_ue_sqrt.transpose();
    let h_user = CVec::from_column_slice(h_mat.as_slice());
    let h_jam = sample_jammer_channel(stats, rng);
    (h_user, h_jam)
}

/// Draws only a jammer channel realization `h_jam ~ CN(0, R_JM)`.
pub fn sample_jammer_channel<R: Rng + ?Sized>(stats: &ChannelStatistics, rng: &mut R) -> CVec {
    let z = standard_complex_vector(stats.r_jm_sqrt.nrows(), rng);
    &stats.r_jm_sqrt * z
}

/// Convenience constructor: full DFT codebooks, beam maps, and statistics
/// for a configuration.
pub fn scenario_geometry(cfg: &SystemConfig) -> Result<(BeamMaps, ChannelStatistics)> {
    let bs_book = dft_codebook(cfg.m_bs);
    let ue_book = dft_codebook(cfg.m_ue);
    let maps = build_beam_maps(cfg, &bs_book, &ue_book)?;
    let stats = build_statistics(cfg, &maps)?;
    Ok((maps, stats))
}

#[cfg(test)]
pub(crate) fn test_config() -> SystemConfig {
    SystemConfig {
        m_bs: 4,
        m_ue: 2,
        m_jm: 16,
        k_users: 5,
        tau: 3,
        n_bs: 4,
        n_ue: 2,
        p_t: 1.0,
        q_k: 1.0,
        sigma2: 1.0,
        rho_bs: 0.5,
        rho_ue: 0.5,
        rho_jm: 0.5,
        epsilon: 0.1,
        seed: 7,
    }
}
