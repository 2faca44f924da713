//! Matrix-variate Gaussians with rank-1 mean and general covariance, and the
//! trace-normalized Wishart states built from them.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::state::{BlochVector, CMatrix, DensityMatrix, FieldKind};

pub const RANK_TOL: f64 = 1e-10;
pub const PD_TOL: f64 = 1e-12;
/// States per stream in batch sampling. Fixed so output does not depend on
/// the number of workers.
pub const BATCH_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct WishartParams {
    field: FieldKind,
    columns: usize,
    mean: CMatrix,
    cov: CMatrix,
}

impl WishartParams {
    pub fn new(field: FieldKind, mean: CMatrix, cov: CMatrix) -> Result<Self> {
        let d = cov.nrows();
        let n = mean.ncols();
        if !cov.is_square() || d == 0 {
            return Err(Error::InvalidParams("covariance must be square".into()));
        }
        if mean.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: mean.nrows(),
            });
        }
        if n < d {
            return Err(Error::InvalidParams(format!("N = {n} columns is below d = {d}")));
        }
        let n_min = match field {
            FieldKind::Real => 3,
            FieldKind::Complex => 2,
        };
        if n < n_min {
            return Err(Error::InvalidParams(format!(
                "{} field needs N >= {n_min}, got {n}",
                field.as_str()
            )));
        }
        if field == FieldKind::Real && (mean.iter().chain(cov.iter()).any(|c| c.im != 0.0)) {
            return Err(Error::InvalidParams("real field requires real mean and covariance".into()));
        }
        if mean.iter().chain(cov.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParams("non-finite entries".into()));
        }
        for i in 0..d {
            for j in 0..d {
                if (cov[(i, j)] - cov[(j, i)].conj()).norm() > 1e-12 * (1.0 + cov[(i, i)].norm()) {
                    return Err(Error::InvalidParams("covariance is not Hermitian".into()));
                }
            }
        }
        let cov = (&cov + cov.adjoint()).scale(0.5);
        let lmin = cov
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(lmin > PD_TOL) {
            return Err(Error::InvalidParams(format!(
                "covariance smallest eigenvalue {lmin:e} is not above {PD_TOL:e}"
            )));
        }
        if mean.iter().any(|c| c.norm() > 0.0) {
            let sv = mean.clone().singular_values();
            let mut s: Vec<f64> = sv.iter().copied().collect();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if s.len() > 1 && s[1] > RANK_TOL * s[0] {
                return Err(Error::InvalidParams(format!(
                    "mean matrix has rank > 1 (singular values {:e}, {:e})",
                    s[0], s[1]
                )));
            }
        }
        Ok(Self {
            field,
            columns: n,
            mean,
            cov,
        })
    }

    /// M = 0, Σ = I.
    pub fn central(field: FieldKind, d: usize, n: usize) -> Result<Self> {
        Self::new(field, CMatrix::zeros(d, n), CMatrix::identity(d, d))
    }

    /// Σ = I with every mean entry equal to μ (real) or (1 + i)μ (complex).
    /// Either way the unrotated density peaks towards +x in Bloch coordinates.
    pub fn isotropic_all_mu(field: FieldKind, d: usize, n: usize, mu: f64) -> Result<Self> {
        Self::new(field, all_mu_mean(field, d, n, mu), CMatrix::identity(d, d))
    }

    pub fn field(&self) -> FieldKind {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn mean(&self) -> &CMatrix {
        &self.mean
    }

    pub fn covariance(&self) -> &CMatrix {
        &self.cov
    }

    pub fn cholesky_factor(&self) -> Result<CMatrix> {
        Cholesky::new(self.cov.clone())
            .map(|c| c.l())
            .ok_or(Error::CholeskyFailure)
    }
}

pub fn all_mu_mean(field: FieldKind, d: usize, n: usize, mu: f64) -> CMatrix {
    let entry = match field {
        FieldKind::Real => Complex64::new(mu, 0.0),
        FieldKind::Complex => Complex64::new(mu, mu),
    };
    CMatrix::from_element(d, n, entry)
}

/// Params plus a cached Cholesky factor.
#[derive(Clone, Debug)]
pub struct WishartSampler {
    params: WishartParams,
    chol: CMatrix,
}

impl WishartSampler {
    pub fn new(params: WishartParams) -> Result<Self> {
        let chol = params.cholesky_factor()?;
        Ok(Self { params, chol })
    }

    pub fn params(&self) -> &WishartParams {
        &self.params
    }

    #[inline]
    fn gaussian_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match self.params.field {
            FieldKind::Real => Complex64::new(rng.sample(StandardNormal), 0.0),
            FieldKind::Complex => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    /// A = M + L G, G drawn column by column.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let d = self.params.dim();
        let n = self.params.columns;
        let mut g = CMatrix::zeros(d, n);
        for j in 0..n {
            for i in 0..d {
                g[(i, j)] = self.gaussian_entry(rng);
            }
        }
        &self.params.mean + &self.chol * g
    }

    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DensityMatrix> {
        let a = self.sample_matrix(rng);
        DensityMatrix::from_psd(&(&a * a.adjoint()))
    }

    /// Qubit draw straight to Bloch coordinates; consumes the generator
    /// exactly like [`Self::sample_state`].
    pub fn sample_bloch<R: Rng + ?Sized>(&self, rng: &mut R) -> BlochVector {
        debug_assert_eq!(self.params.dim(), 2);
        let l = &self.chol;
        let m = &self.params.mean;
        let (mut w00, mut w11) = (0.0, 0.0);
        let mut w01 = Complex64::new(0.0, 0.0);
        for j in 0..self.params.columns {
            let g0 = self.gaussian_entry(rng);
            let g1 = self.gaussian_entry(rng);
            let a0 = m[(0, j)] + l[(0, 0)] * g0;
            let a1 = m[(1, j)] + l[(1, 0)] * g0 + l[(1, 1)] * g1;
            w00 += a0.norm_sqr();
            w11 += a1.norm_sqr();
            w01 += a0 * a1.conj();
        }
        let tr = w00 + w11;
        BlochVector::new(2.0 * w01.re / tr, -2.0 * w01.im / tr, (w00 - w11) / tr)
    }
}

pub fn sample_gaussian_matrix<R: Rng + ?Sized>(p: &WishartParams, rng: &mut R) -> Result<CMatrix> {
    Ok(WishartSampler::new(p.clone())?.sample_matrix(rng))
}

pub fn sample_state<R: Rng + ?Sized>(p: &WishartParams, rng: &mut R) -> Result<DensityMatrix> {
    WishartSampler::new(p.clone())?.sample_state(rng)
}

/// `n` draws split into chunks of [`BATCH_CHUNK`], chunk k using stream k of
/// `seed`. Chunks run in parallel; the output order is fixed.
pub fn sample_states_batch(p: &WishartParams, n: usize, seed: u64) -> Result<Vec<DensityMatrix>> {
    if n == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let sampler = WishartSampler::new(p.clone())?;
    let chunks = n.div_ceil(BATCH_CHUNK);
    let parts: Vec<Result<Vec<DensityMatrix>>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomStream::new(seed, k as u64).rng();
            let len = BATCH_CHUNK.min(n - k * BATCH_CHUNK);
            (0..len).map(|_| sampler.sample_state(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Same chunking as [`sample_states_batch`], qubits only, Bloch output.
pub fn sample_bloch_batch(p: &WishartParams, n: usize, seed: u64) -> Result<Vec<BlochVector>> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: p.dim(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let sampler = WishartSampler::new(p.clone())?;
    let chunks = n.div_ceil(BATCH_CHUNK);
    let parts: Vec<Vec<BlochVector>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomStream::new(seed, k as u64).rng();
            let len = BATCH_CHUNK.min(n - k * BATCH_CHUNK);
            (0..len).map(|_| sampler.sample_bloch(&mut rng)).collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}
