//! Placing the mode of a Wishart proposal at a requested state.
//!
//! Two routes: for qubits, an isotropic all-μ mean whose μ is solved from the
//! radial stationarity condition and then rotated onto the target direction;
//! for any d, a covariance/mean pair built from the stationarity condition of
//! the full density at a full-rank ρ_p.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::density::{exponents, PreparedDensity};
use crate::error::{Error, Result};
use crate::gaussian::WishartParams;
use crate::special::SeriesFactor;
use crate::state::{align_rotation, BlochVector, CMatrix, DensityMatrix, FieldKind, Rotation3};

pub const MU_MAX: f64 = 20.0;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITER: usize = 500;
pub const GRADIENT_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub struct PeakRequest {
    pub target: BlochVector,
    pub columns: usize,
    pub field: FieldKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarySolution {
    #[serde(skip)]
    pub sigma: CMatrix,
    #[serde(skip)]
    pub mean: CMatrix,
    pub residual: f64,
    pub iterations: usize,
}

/// ξ² = c(μ)(1 + x) on the +x axis for Σ = I and an all-μ mean.
fn xi_coefficient(field: FieldKind, n: usize, mu: f64) -> f64 {
    match field {
        FieldKind::Real => n as f64 * mu * mu / 2.0,
        FieldKind::Complex => 2.0 * n as f64 * mu * mu,
    }
}

/// μ > 0 at which the radial derivative of ln f vanishes at x = r.
pub fn fit_mean_radial(r: f64, columns: usize, field: FieldKind) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidInput(format!("target radius {r} outside (0, 1]")));
    }
    // Validates N for the field.
    WishartParams::central(field, 2, columns)?;
    let (e, a, b, _) = exponents(field, 2, columns);
    let series = SeriesFactor::new(a, b)?;
    let slope = |mu: f64| -> Result<f64> {
        let c = xi_coefficient(field, columns, mu);
        let pull = if e == 0.0 { 0.0 } else { 2.0 * e * r / (1.0 - r * r) };
        Ok(c * series.log_derivative(c * (1.0 + r))? - pull)
    };
    let no_root = |slope: &dyn Fn(f64) -> Result<f64>| -> Result<Error> {
        let profile = (0..=40)
            .map(|i| {
                let mu = MU_MAX * i as f64 / 40.0;
                slope(mu).map(|g| (mu, g))
            })
            .collect::<Result<Vec<_>>>()
            .unwrap_or_default();
        Ok(Error::NoRoot {
            radius: r,
            columns,
            mu_max: MU_MAX,
            profile,
        })
    };
    if r == 1.0 || e == 0.0 {
        return Err(no_root(&slope)?);
    }
    let (mut lo, mut hi) = (0.0, MU_MAX);
    let (g_lo, g_hi) = (slope(lo)?, slope(hi)?);
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(no_root(&slope)?);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Σ = I, all-μ mean peaked at |target| on +x, and the rotation taking +x
/// onto the target direction.
pub fn build_qubit_proposal(req: &PeakRequest) -> Result<(WishartParams, Rotation3)> {
    let r = req.target.norm();
    if r > 1.0 + crate::state::RADIUS_TOL {
        return Err(Error::RadiusOutOfRange(r));
    }
    if req.field == FieldKind::Real && req.target.y != 0.0 {
        return Err(Error::InvalidInput("real-field target must have y = 0".into()));
    }
    if r < 1e-12 {
        return Ok((
            WishartParams::central(req.field, 2, req.columns)?,
            Rotation3::identity(),
        ));
    }
    let mu = fit_mean_radial(r.min(1.0), req.columns, req.field)?;
    let params = WishartParams::isotropic_all_mu(req.field, 2, req.columns, mu)?;
    let rot = align_rotation(&BlochVector::new(1.0, 0.0, 0.0), &req.target)?;
    Ok((params, rot))
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn inverse(m: &CMatrix) -> Result<CMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular matrix".into()))
}

/// (Σ₁, M₁) whose density is stationary at ρ_p, given the mean direction M₂.
///
/// With K = M₂M₂†, t = tr(Kρ_p) and T = S′/S at ξ²(ρ_p),
/// Σ₁ = (a + T t) [e ρ_p⁻¹ + (a − e d) I + T K]⁻¹ and M₁ = Σ₁M₂/√κ.
/// T depends on the solution through ξ², so it is iterated from T = 0.
pub fn stationary_params(
    rho_p: &DensityMatrix,
    m2: &CMatrix,
    columns: usize,
    field: FieldKind,
) -> Result<StationarySolution> {
    let d = rho_p.dim();
    if m2.nrows() != d || m2.ncols() != columns {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m2.nrows(),
        });
    }
    if columns <= d {
        return Err(Error::InvalidInput(format!("need N > d, got N = {columns}, d = {d}")));
    }
    let lmin = rho_p.min_eigenvalue();
    if !(lmin > 1e-12) {
        return Err(Error::NotFullRank { min_eigenvalue: lmin });
    }
    let (e, a, b, kappa) = exponents(field, d, columns);
    let series = SeriesFactor::new(a, b)?;
    let rho = rho_p.matrix();
    let rho_inv = hermitize(&inverse(rho)?);
    let k = hermitize(&(m2 * m2.adjoint()));
    let t = rho_p.expectation(&k);
    let ident = CMatrix::identity(d, d);
    let scale = 1.0 / kappa.sqrt();

    let mut big_t = 0.0;
    let mut prev: Option<CMatrix> = None;
    for it in 1..=FIXED_POINT_MAX_ITER {
        let inner = rho_inv.scale(e) + ident.scale(a - e * d as f64) + k.scale(big_t);
        let sigma = hermitize(&inverse(&inner)?.scale(a + big_t * t));
        let mean = (&sigma * m2).scale(scale);
        if let Some(p) = &prev {
            if (&sigma - p).iter().map(|c| c.norm()).fold(0.0, f64::max) <= FIXED_POINT_TOL {
                let params = WishartParams::new(field, mean.clone(), sigma.clone())?;
                let residual = verify_stationary(&params, rho_p)?;
                return Ok(StationarySolution {
                    sigma,
                    mean,
                    residual,
                    iterations: it,
                });
            }
        }
        let si = hermitize(&inverse(&sigma)?);
        let tau = rho_p.expectation(&si);
        let num = rho_p.expectation(&(&si * &mean * mean.adjoint() * &si));
        big_t = series.log_derivative((kappa * num / tau).max(0.0))?;
        prev = Some(sigma);
    }
    Err(Error::FixedPointDivergence {
        iterations: FIXED_POINT_MAX_ITER,
    })
}

/// Orthonormal (tr GᵢGⱼ = 2δᵢⱼ) traceless Hermitian directions; (σx, σy, σz)
/// for d = 2. The real field keeps only the symmetric ones.
pub fn tangent_basis(d: usize, field: FieldKind) -> Vec<CMatrix> {
    let mut out = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = CMatrix::zeros(d, d);
            s[(j, k)] = one;
            s[(k, j)] = one;
            out.push(s);
            if field == FieldKind::Complex {
                let mut a = CMatrix::zeros(d, d);
                a[(j, k)] = Complex64::new(0.0, -1.0);
                a[(k, j)] = Complex64::new(0.0, 1.0);
                out.push(a);
            }
        }
    }
    for l in 1..d {
        let c = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![Complex64::new(0.0, 0.0); d];
        for v in diag.iter_mut().take(l) {
            *v = Complex64::new(c, 0.0);
        }
        diag[l] = Complex64::new(-(l as f64) * c, 0.0);
        out.push(CMatrix::from_diagonal(&DVector::from_vec(diag)));
    }
    out
}

/// Central-difference gradient norm of ln f at ρ_p along trace-preserving
/// Hermitian directions (Bloch coordinates for qubits).
pub fn verify_stationary(p: &WishartParams, rho_p: &DensityMatrix) -> Result<f64> {
    let pd = PreparedDensity::new(p)?;
    let h = GRADIENT_STEP;
    let mut sq = 0.0;
    for g in tangent_basis(rho_p.dim(), p.field()) {
        let step = g.scale(0.5 * h);
        let plus = DensityMatrix::from_matrix_unchecked(rho_p.matrix() + &step);
        let minus = DensityMatrix::from_matrix_unchecked(rho_p.matrix() - &step);
        let d = (pd.ln_kernel(&plus)? - pd.ln_kernel(&minus)?) / (2.0 * h);
        sq += d * d;
    }
    Ok(sq.sqrt())
}
