//! Python bindings for the beamspace jamming-detection and channel
//! estimation library.
//!
//! Everything crosses the boundary as plain data — nested lists of complex
//! numbers for matrices, tuples for metric bundles, CSV text for sweep
//! results — so the module works without any Python-side numeric
//! dependencies.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use beamjam::channel::{dft_codebook, scenario_geometry, SystemConfig};
use beamjam::detection::{
    assemble_covariance, conditioned_alpha, pd, pfa, run_roc, series_h0, series_h1,
    threshold_for_pfa, AlphaMode, ChiSquareMixtureSeries, Detector,
};
use beamjam::estimation::{
    build_jammer_mmse, build_moment_model, build_user_mmse, channel_estimates,
    estimate_inner_products, metrics, regauge_jammer,
};
use beamjam::experiments::{csv_string, figure_preset, parse_config, run_experiment, PRESET_NAMES};
use beamjam::numerics::{hermitian_evd, trial_rng, CMat, HermitianMatrix};
use beamjam::signal::{
    inner_products, make_pilot_book, sample_jamming_pilot, simulate_projected,
};

fn py_err(e: beamjam::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_cmat(rows: &[Vec<Complex64>]) -> PyResult<CMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(PyValueError::new_err(
            "matrix must be a nonempty rectangular list of complex rows",
        ));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn from_cmat(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Scenario configuration: array geometry, training length, powers, and
/// spatial correlation coefficients.
#[pyclass(name = "SystemConfig")]
#[derive(Clone)]
struct PyConfig {
    /// Base-station antennas.
    #[pyo3(get, set)]
    m_bs: usize,
    /// User-equipment antennas.
    #[pyo3(get, set)]
    m_ue: usize,
    /// Jammer antennas.
    #[pyo3(get, set)]
    m_jm: usize,
    /// Users sharing the training frame.
    #[pyo3(get, set)]
    k_users: usize,
    /// Pilot length τ.
    #[pyo3(get, set)]
    tau: usize,
    /// Base-station beams per training cycle.
    #[pyo3(get, set)]
    n_bs: usize,
    /// User beams per training cycle.
    #[pyo3(get, set)]
    n_ue: usize,
    /// User pilot power (linear).
    #[pyo3(get, set)]
    p_t: f64,
    /// Jammer pilot power (linear).
    #[pyo3(get, set)]
    q_k: f64,
    /// Noise power (linear).
    #[pyo3(get, set)]
    sigma2: f64,
    /// BS-side correlation coefficient.
    #[pyo3(get, set)]
    rho_bs: f64,
    /// UE-side correlation coefficient.
    #[pyo3(get, set)]
    rho_ue: f64,
    /// Jammer-side correlation coefficient.
    #[pyo3(get, set)]
    rho_jm: f64,
    /// Magnitude-blend weight of the used-pilot estimate.
    #[pyo3(get, set)]
    epsilon: f64,
    /// Base RNG seed.
    #[pyo3(get, set)]
    seed: u64,
}

impl PyConfig {
    fn core(&self) -> SystemConfig {
        SystemConfig {
            m_bs: self.m_bs,
            m_ue: self.m_ue,
            m_jm: self.m_jm,
            k_users: self.k_users,
            tau: self.tau,
            n_bs: self.n_bs,
            n_ue: self.n_ue,
            p_t: self.p_t,
            q_k: self.q_k,
            sigma2: self.sigma2,
            rho_bs: self.rho_bs,
            rho_ue: self.rho_ue,
            rho_jm: self.rho_jm,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (m_bs=16, m_ue=4, m_jm=16, k_users=5, tau=4, n_bs=12, n_ue=4,
                        p_t=1.0, q_k=1.0, sigma2=1.0, rho_bs=0.9, rho_ue=0.9, rho_jm=0.9,
                        epsilon=0.1, seed=7))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        m_bs: usize,
        m_ue: usize,
        m_jm: usize,
        k_users: usize,
        tau: usize,
        n_bs: usize,
        n_ue: usize,
        p_t: f64,
        q_k: f64,
        sigma2: f64,
        rho_bs: f64,
        rho_ue: f64,
        rho_jm: f64,
        epsilon: f64,
        seed: u64,
    ) -> Self {
        PyConfig {
            m_bs,
            m_ue,
            m_jm,
            k_users,
            tau,
            n_bs,
            n_ue,
            p_t,
            q_k,
            sigma2,
            rho_bs,
            rho_ue,
            rho_jm,
            epsilon,
            seed,
        }
    }

    /// Beacon slots per training cycle, `N_b = N_BS · N_UE`.
    fn n_b(&self) -> usize {
        self.n_bs * self.n_ue
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(m_bs={}, m_ue={}, m_jm={}, k_users={}, tau={}, n_bs={}, n_ue={}, \
             p_t={}, q_k={}, sigma2={}, rho_bs={}, rho_ue={}, rho_jm={}, epsilon={}, seed={})",
            self.m_bs,
            self.m_ue,
            self.m_jm,
            self.k_users,
            self.tau,
            self.n_bs,
            self.n_ue,
            self.p_t,
            self.q_k,
            self.sigma2,
            self.rho_bs,
            self.rho_ue,
            self.rho_jm,
            self.epsilon,
            self.seed
        )
    }
}

/// Mixture series under both hypotheses for the conditioned inner-product
/// reference of a configuration.
fn both_series(
    cfg: &SystemConfig,
    m_trunc: usize,
) -> Result<(ChiSquareMixtureSeries, ChiSquareMixtureSeries), beamjam::Error> {
    let (_, stats) = scenario_geometry(cfg)?;
    let s0 = series_h0(&stats.jam_beam_evd, cfg.sigma2, cfg.tau, m_trunc)?;
    let alpha = conditioned_alpha(cfg.tau);
    let alpha_unused = alpha.rows(1, cfg.tau - 1).into_owned();
    let cov = assemble_covariance(&alpha_unused, &stats.r_jam_beam, cfg.q_k, cfg.sigma2, cfg.tau)?;
    let s1 = series_h1(&cov, &stats.r_jam_beam, cfg.tau, m_trunc)?;
    Ok((s0, s1))
}

/// Exponential correlation matrix `[R]_{mn} = ρ^{|m−n|}`.
#[pyfunction]
fn exp_corr(dim: usize, rho: f64) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(from_cmat(
        beamjam::channel::exp_corr(dim, rho).map_err(py_err)?.matrix(),
    ))
}

/// `M`-point DFT codebook matrix; columns are unit-norm orthogonal beams.
#[pyfunction]
fn dft_codebook_matrix(m: usize) -> Vec<Vec<Complex64>> {
    from_cmat(&dft_codebook(m).mat)
}

/// Orthonormal pilot book; column `i` is pilot `φ_{i+1}` of length τ.
#[pyfunction]
fn pilot_book(tau: usize) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(from_cmat(&make_pilot_book(tau).map_err(py_err)?.phi))
}

/// Kronecker product of two complex matrices.
#[pyfunction]
fn kron(a: Vec<Vec<Complex64>>, b: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(from_cmat(&beamjam::numerics::kron(
        &to_cmat(&a)?,
        &to_cmat(&b)?,
    )))
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
#[pyfunction]
fn psd_sqrt(a: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let h = HermitianMatrix::new(to_cmat(&a)?).map_err(py_err)?;
    Ok(from_cmat(
        beamjam::numerics::psd_sqrt(&h).map_err(py_err)?.matrix(),
    ))
}

/// Eigendecomposition of a Hermitian matrix: `(eigenvalues descending,
/// eigenvector columns)`.
#[pyfunction]
fn hermitian_eigendecomposition(
    a: Vec<Vec<Complex64>>,
) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let h = HermitianMatrix::new(to_cmat(&a)?).map_err(py_err)?;
    let evd = hermitian_evd(&h);
    Ok((
        evd.eigenvalues.iter().copied().collect(),
        from_cmat(&evd.eigenvectors),
    ))
}

/// Detection threshold `γ*` with false-alarm rate `target` under the
/// jammer-absent mixture series.
#[pyfunction]
#[pyo3(signature = (cfg, target, m_trunc=100))]
fn detection_threshold(cfg: &PyConfig, target: f64, m_trunc: usize) -> PyResult<f64> {
    let (s0, _) = both_series(&cfg.core(), m_trunc).map_err(py_err)?;
    threshold_for_pfa(target, &s0).map_err(py_err)
}

/// Closed-form `(P_FA, P_D)` of the detector at threshold `gamma`, with the
/// detection probability conditioned on the reference inner products.
#[pyfunction]
#[pyo3(signature = (cfg, gamma, m_trunc=100))]
fn detection_tails(cfg: &PyConfig, gamma: f64, m_trunc: usize) -> PyResult<(f64, f64)> {
    let (s0, s1) = both_series(&cfg.core(), m_trunc).map_err(py_err)?;
    Ok((pfa(gamma, &s0), pd(gamma, &s1)))
}

/// Monte Carlo ROC: empirical `(P_FA, P_D)` per threshold in `gamma_grid`.
///
/// `detector` is `"lmpt"` or `"glrt"`; `conditioned` fixes the jamming
/// inner products at the closed-form reference instead of resampling the
/// jamming pilot per trial.
#[pyfunction]
#[pyo3(signature = (cfg, trials, gamma_grid, seed=7, detector="lmpt", conditioned=true))]
fn roc_monte_carlo(
    cfg: &PyConfig,
    trials: usize,
    gamma_grid: Vec<f64>,
    seed: u64,
    detector: &str,
    conditioned: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let det = match detector {
        "lmpt" => Detector::Lmpt,
        "glrt" => Detector::Glrt,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown detector `{other}` (expected `lmpt` or `glrt`)"
            )))
        }
    };
    let mode = if conditioned {
        AlphaMode::Conditioned
    } else {
        AlphaMode::Marginal
    };
    let core = cfg.core();
    let (_, stats) = scenario_geometry(&core).map_err(py_err)?;
    let curve = run_roc(&core, &stats, det, mode, trials, &gamma_grid, seed, 0).map_err(py_err)?;
    Ok((curve.p_fa, curve.p_d))
}

/// One full estimation round under jamming: returns `(mse_alpha1,
/// mse_norms, cos_similarity, nmse_user_db, nmse_jam_db)` for the trial's
/// inner-product and channel estimates.
#[pyfunction]
#[pyo3(signature = (cfg, seed=7, trial=0))]
fn estimation_trial(cfg: &PyConfig, seed: u64, trial: u64) -> PyResult<(f64, f64, f64, f64, f64)> {
    let core = cfg.core();
    let run = || -> Result<(f64, f64, f64, f64, f64), beamjam::Error> {
        let (_, stats) = scenario_geometry(&core)?;
        let model = build_moment_model(&core, &stats)?;
        let jam_op = build_jammer_mmse(&core, &stats)?;
        let user_op = build_user_mmse(&core, &stats)?;
        let book = make_pilot_book(core.tau)?;
        let mut rng = trial_rng(seed, trial);
        let pilot = sample_jamming_pilot(core.tau, &mut rng);
        let ip = inner_products(&book, &pilot)?;
        let (h_user, h_jam) = beamjam::channel::sample_channels(&stats, &mut rng);
        let obs = simulate_projected(&core, &stats, &book, &pilot, &h_user, &h_jam, true, &mut rng)?;
        let est = estimate_inner_products(&obs, &model, &core)?;
        let jam_hat = jam_op.estimate(&obs, &est.alpha_bar)?;
        let user_hat = user_op.estimate(&obs.y_used, est.alpha1_norm.powi(2))?;
        let h_bar = regauge_jammer(&h_jam, &ip.alpha);
        let ch = channel_estimates(user_hat, &h_user, jam_hat, &h_bar)?;
        let m = metrics(&est, &ip.alpha, &ch)?;
        Ok((
            m.mse_alpha1,
            m.mse_norms,
            m.cos_similarity,
            m.nmse_user_db,
            m.nmse_jam_db,
        ))
    };
    run().map_err(py_err)
}

/// Names of the bundled experiment presets.
#[pyfunction]
fn preset_names() -> Vec<String> {
    PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Runs a bundled preset and returns its results as CSV text; `trials` and
/// `seed` override the preset defaults.
#[pyfunction]
#[pyo3(signature = (name, trials=None, seed=None))]
fn run_preset(name: &str, trials: Option<usize>, seed: Option<u64>) -> PyResult<String> {
    let mut spec = figure_preset(name).map_err(py_err)?;
    if let Some(t) = trials {
        spec.trials = t;
    }
    if let Some(s) = seed {
        spec.seed = s;
        spec.cfg.seed = s;
    }
    let rows = run_experiment(&spec).map_err(py_err)?;
    csv_string(&rows).map_err(py_err)
}

/// Parses a TOML experiment document and runs it, returning CSV text.
#[pyfunction]
fn run_config(toml_text: &str) -> PyResult<String> {
    let spec = parse_config(toml_text).map_err(py_err)?;
    let rows = run_experiment(&spec).map_err(py_err)?;
    csv_string(&rows).map_err(py_err)
}

#[pymodule]
fn beamjam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(exp_corr, m)?)?;
    m.add_function(wrap_pyfunction!(dft_codebook_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(pilot_book, m)?)?;
    m.add_function(wrap_pyfunction!(kron, m)?)?;
    m.add_function(wrap_pyfunction!(psd_sqrt, m)?)?;
    m.add_function(wrap_pyfunction!(hermitian_eigendecomposition, m)?)?;
    m.add_function(wrap_pyfunction!(detection_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(detection_tails, m)?)?;
    m.add_function(wrap_pyfunction!(roc_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(estimation_trial, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
