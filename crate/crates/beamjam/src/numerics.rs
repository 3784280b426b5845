//! Dense complex Hermitian kernels and correlated complex Gaussian sampling.
//!
//! Everything downstream (covariance construction, detection statistics,
//! MMSE estimators) is built on the operations in this module:
//! eigendecomposition of Hermitian matrices, PSD matrix square roots,
//! positive-definite solves with a bounded jitter policy, Kronecker
//! products, and circularly-symmetric complex Gaussian sampling.
//!
//! All operations are pure functions of their inputs (plus an explicit RNG
//! handle) and are safe to call concurrently as long as RNG handles are not
//! shared.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{tol, Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
/// Dense dynamically-sized complex matrix.
pub type CMat = DMatrix<C64>;
/// Dense dynamically-sized complex column vector.
pub type CVec = DVector<C64>;
/// Dense dynamically-sized real column vector.
pub type RVec = DVector<f64>;
/// Dense dynamically-sized real matrix.
pub type RMat = DMatrix<f64>;

/// Frobenius norm of a complex matrix.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic per-trial RNG: one master seed selects the generator,
/// `stream` selects an independent substream.
///
/// Callers compose `stream` injectively from (scenario, sweep index, trial
/// index) so results are reproducible and independent of how trials are
/// scheduled across workers.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A square complex matrix validated to be Hermitian within
/// [`tol::HERMITICITY_REL`].
#[derive(Clone, Debug)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Validates and wraps a Hermitian matrix.
    ///
    /// Fails when the matrix is not square or when
    /// `‖A − Aᴴ‖_F > HERMITICITY_REL·‖A‖_F`.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                context: "HermitianMatrix::new",
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        let deviation = fro_norm(&(&mat - mat.adjoint()));
        let allowed = tol::HERMITICITY_REL * fro_norm(&mat);
        if deviation > allowed {
            return Err(Error::NotHermitian { deviation, allowed });
        }
        Ok(Self(mat))
    }

    /// Wraps `(M + Mᴴ)/2`, guaranteeing an exactly Hermitian result.
    ///
    /// Used internally for matrices that are Hermitian analytically but may
    /// carry floating-point asymmetry after a product.
    pub fn symmetrize(mat: CMat) -> Self {
        let sym = (&mat + mat.adjoint()).scale(0.5);
        Self(sym)
    }

    /// Builds a Hermitian matrix from a real symmetric one.
    pub fn from_real(mat: &DMatrix<f64>) -> Result<Self> {
        Self::new(mat.map(|x| C64::new(x, 0.0)))
    }

    /// Dimension `n` of the underlying `n×n` matrix.
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Borrows the underlying matrix.
    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// Consumes the wrapper and returns the underlying matrix.
    pub fn into_matrix(self) -> CMat {
        self.0
    }
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order and orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Real eigenvalues, descending: `λ₁ ≥ λ₂ ≥ …`.
    pub eigenvalues: RVec,
    /// Unitary matrix whose `n`-th column is the eigenvector of `λ_n`.
    pub eigenvectors: CMat,
}

impl EigenDecomposition {
    /// Number of eigenvalues above the relative rank cutoff
    /// [`tol::EIG_CLAMP_REL`]`·λ_max`.
    pub fn rank(&self) -> usize {
        let lambda_max = self.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        if lambda_max <= 0.0 {
            return 0;
        }
        let cutoff = tol::EIG_CLAMP_REL * lambda_max;
        self.eigenvalues.iter().filter(|&&l| l > cutoff).count()
    }

    /// The eigenvalues counted by [`rank`](Self::rank) (descending).
    pub fn positive_eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.iter().cloned().take(self.rank()).collect()
    }

    /// Reassembles `VΛVᴴ` (used by reconstruction tests).
    pub fn reconstruct(&self) -> CMat {
        let lambda = CMat::from_diagonal(&self.eigenvalues.map(|l| C64::new(l, 0.0)));
        &self.eigenvectors * lambda * self.eigenvectors.adjoint()
    }
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// The backend is deterministic for a fixed input; eigenvalues are returned
/// in descending order with matching eigenvector columns.
pub fn hermitian_evd(a: &HermitianMatrix) -> EigenDecomposition {
    let se = SymmetricEigen::new(a.0.clone());
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .expect("eigenvalues of a Hermitian matrix are finite reals")
    });
    let eigenvalues = RVec::from_iterator(order.len(), order.iter().map(|&i| se.eigenvalues[i]));
    let eigenvectors = se.eigenvectors.select_columns(order.iter());
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Hermitian PSD square root: returns `S` with `S·S ≈ A`.
///
/// Eigenvalues in `[−EIG_CLAMP_REL·λ_max, 0)` are clamped to zero; anything
/// below that floor makes the input genuinely indefinite and is rejected.
pub fn psd_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let evd = hermitian_evd(a);
    let lambda_max = evd.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let floor = -tol::EIG_CLAMP_REL * lambda_max;
    let min_eigenvalue = evd.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eigenvalue < floor {
        return Err(Error::NotPsd { min_eigenvalue });
    }
    // Eigenvalues below the rank cutoff are treated as exact zeros so that
    // the square root does not amplify rounding noise (√1e-16 = 1e-8).
    let cutoff = tol::EIG_CLAMP_REL * lambda_max;
    let sqrt_diag = CMat::from_diagonal(
        &evd.eigenvalues
            .map(|l| C64::new(if l < cutoff { 0.0 } else { l.sqrt() }, 0.0)),
    );
    let s = &evd.eigenvectors * sqrt_diag * evd.eigenvectors.adjoint();
    Ok(HermitianMatrix::symmetrize(s))
}

fn cholesky_solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().cholesky().map(|ch| ch.solve(b))
}

/// Solves `A·X = B` for Hermitian positive-definite `A`.
///
/// When the plain Cholesky factorization fails, a jitter `δ·tr(A)/n·I` is
/// added with `δ` starting at [`tol::JITTER_START`] and doubling at most
/// [`tol::JITTER_DOUBLINGS`] times; if every attempt fails the system is
/// reported singular.
pub fn hpd_solve(a: &HermitianMatrix, b: &CMat) -> Result<CMat> {
    if a.dim() != b.nrows() {
        return Err(Error::DimensionMismatch {
            context: "hpd_solve",
            expected: a.dim(),
            got: b.nrows(),
        });
    }
    if let Some(x) = cholesky_solve(&a.0, b) {
        return Ok(x);
    }
    let n = a.dim() as f64;
    let scale = a.0.trace().re / n;
    let mut delta = tol::JITTER_START;
    for _ in 0..=tol::JITTER_DOUBLINGS {
        let jittered = &a.0 + CMat::identity(a.dim(), a.dim()).scale(delta * scale);
        if let Some(x) = cholesky_solve(&jittered, b) {
            return Ok(x);
        }
        delta *= 2.0;
    }
    Err(Error::Singular)
}

/// Convenience wrapper of [`hpd_solve`] for a single right-hand-side vector.
pub fn hpd_solve_vec(a: &HermitianMatrix, b: &CVec) -> Result<CVec> {
    let x = hpd_solve(a, &CMat::from_columns(&[b.clone()]))?;
    Ok(x.column(0).into_owned())
}

/// Kronecker product: block `(i,j)` of the result equals `A[i][j]·B`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// One draw of a standard circularly-symmetric complex Gaussian scalar
/// `CN(0, 1)`: real and imaginary parts are independent `N(0, 1/2)`.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(
        re * std::f64::consts::FRAC_1_SQRT_2,
        im * std::f64::consts::FRAC_1_SQRT_2,
    )
}

/// Length-`n` vector of i.i.d. `CN(0, 1)` entries.
pub fn standard_complex_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| standard_complex(rng))
}

/// `rows×cols` matrix of i.i.d. `CN(0, 1)` entries, filled column-major.
pub fn standard_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Samples a circularly-symmetric complex Gaussian vector `CN(0, cov)` as
/// `psd_sqrt(cov)·z` with `z` i.i.d. `CN(0, 1)`.
///
/// Hot paths that sample repeatedly should cache the square-root factor and
/// multiply it by [`standard_complex_vector`] draws; this convenience form
/// recomputes the factor on every call.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(
    cov: &HermitianMatrix,
    rng: &mut R,
) -> Result<CVec> {
    let s = psd_sqrt(cov)?;
    let z = standard_complex_vector(cov.dim(), rng);
    Ok(s.matrix() * z)
}
