//! Density of the rank-1-mean quantum Wishart state.
//!
//! With τ = tr(Σ⁻¹ρ) and ξ² the non-centrality scalar,
//!
//! ln f(ρ) = −κ tr(Σ⁻¹MM†) − lnΓ_d(b) − b ln|Σ| + lnΓ(b)
//!           + e ln det ρ − a ln τ + ln S(a, b, ξ²)
//!
//! where (a, b, e, κ) = (dN/2, N/2, (N−d−1)/2, ½) for real and
//! (dN, N, N−d, 1) for complex entries. The first line is the constant; the
//! second is the kernel. The density is with respect to Lebesgue measure on
//! the independent real coordinates of trace-one matrices; for qubits the flat
//! Bloch-coordinate density is that times 1/4 (real disc) or 1/8 (ball).

use std::f64::consts::PI;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::WishartParams;
use crate::quadrature::{integrate, Tolerance};
use crate::special::{ln_gamma, ln_multivariate_gamma, SeriesFactor};
use crate::state::{pauli_components, BlochVector, CMatrix, DensityMatrix, FieldKind};

pub use crate::special::series_factor;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct XiSquared(pub f64);

impl XiSquared {
    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDensity {
    pub log_value: f64,
    pub exact_constant_dropped: bool,
}

/// (e, a, b, κ) for a field, dimension and column count.
pub fn exponents(field: FieldKind, d: usize, n: usize) -> (f64, f64, f64, f64) {
    let (df, nf) = (d as f64, n as f64);
    match field {
        FieldKind::Real => ((nf - df - 1.0) / 2.0, df * nf / 2.0, nf / 2.0, 0.5),
        FieldKind::Complex => (nf - df, df * nf, nf, 1.0),
    }
}

/// ln of the Bloch-coordinate Jacobian: flat Bloch density = density × J.
pub fn ln_bloch_jacobian(field: FieldKind) -> f64 {
    match field {
        FieldKind::Real => -(4f64.ln()),
        FieldKind::Complex => -(8f64.ln()),
    }
}

/// H → (h0, h) with tr(Hρ) = (h0 + h·b)/2.
#[derive(Clone, Copy, Debug)]
struct QubitForm {
    t0: f64,
    t: [f64; 3],
    k0: f64,
    k: [f64; 3],
}

/// A density with inverses, factorizations and series setup done once.
#[derive(Clone, Debug)]
pub struct PreparedDensity {
    field: FieldKind,
    d: usize,
    det_exp: f64,
    a: f64,
    kappa: f64,
    sigma_inv: CMatrix,
    k_mat: CMatrix,
    series: SeriesFactor,
    log_constant: f64,
    qubit: Option<QubitForm>,
}

impl PreparedDensity {
    pub fn new(p: &WishartParams) -> Result<Self> {
        let d = p.dim();
        let (det_exp, a, b, kappa) = exponents(p.field(), d, p.columns());
        let chol = Cholesky::new(p.covariance().clone()).ok_or(Error::CholeskyFailure)?;
        let ln_det_sigma: f64 = 2.0 * (0..d).map(|i| chol.l_dirty()[(i, i)].re.ln()).sum::<f64>();
        let sigma_inv = chol.inverse();
        let sigma_inv = (&sigma_inv + sigma_inv.adjoint()).scale(0.5);
        let mm = p.mean() * p.mean().adjoint();
        let k_mat = &sigma_inv * &mm * &sigma_inv;
        let k_mat = (&k_mat + k_mat.adjoint()).scale(0.5);
        let tr_sm = (&sigma_inv * &mm).trace().re;
        let log_constant =
            -kappa * tr_sm - ln_multivariate_gamma(p.field(), d, b) - b * ln_det_sigma + ln_gamma(b);
        let qubit = (d == 2).then(|| {
            let (t0, t) = pauli_components(&sigma_inv);
            let (k0, k) = pauli_components(&k_mat);
            QubitForm { t0, t, k0, k }
        });
        Ok(Self {
            field: p.field(),
            d,
            det_exp,
            a,
            kappa,
            sigma_inv,
            k_mat,
            series: SeriesFactor::new(a, b)?,
            log_constant,
            qubit,
        })
    }

    pub fn field(&self) -> FieldKind {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn det_exponent(&self) -> f64 {
        self.det_exp
    }

    /// The ρ-independent part of ln f.
    pub fn log_constant(&self) -> f64 {
        self.log_constant
    }

    pub fn series(&self) -> &SeriesFactor {
        &self.series
    }

    fn det_term(&self, det: f64) -> Result<f64> {
        if self.det_exp == 0.0 {
            return Ok(0.0);
        }
        if det > 0.0 {
            return Ok(self.det_exp * det.ln());
        }
        if self.det_exp < 0.0 {
            return Err(Error::SingularState {
                det,
                exponent: self.det_exp,
            });
        }
        Ok(f64::NEG_INFINITY)
    }

    fn kernel_from(&self, tau: f64, num: f64, det: f64) -> Result<f64> {
        let dt = self.det_term(det)?;
        if dt == f64::NEG_INFINITY {
            return Ok(dt);
        }
        let xi2 = (self.kappa * num / tau).max(0.0);
        Ok(dt - self.a * tau.ln() + self.series.ln_value(xi2)?)
    }

    pub fn xi_squared(&self, rho: &DensityMatrix) -> XiSquared {
        let tau = rho.expectation(&self.sigma_inv);
        XiSquared((self.kappa * rho.expectation(&self.k_mat) / tau).max(0.0))
    }

    pub fn ln_kernel(&self, rho: &DensityMatrix) -> Result<f64> {
        if rho.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: rho.dim(),
            });
        }
        let tau = rho.expectation(&self.sigma_inv);
        let num = rho.expectation(&self.k_mat);
        self.kernel_from(tau, num, rho.det())
    }

    /// Kernel at a Bloch vector, without building ρ. Qubits only.
    pub fn ln_kernel_bloch(&self, b: &BlochVector) -> Result<f64> {
        let q = self.qubit.as_ref().ok_or(Error::DimensionMismatch {
            expected: 2,
            found: self.d,
        })?;
        let v = b.to_array();
        let dot = |h: &[f64; 3]| h[0] * v[0] + h[1] * v[1] + h[2] * v[2];
        let tau = 0.5 * (q.t0 + dot(&q.t));
        let num = 0.5 * (q.k0 + dot(&q.k));
        self.kernel_from(tau, num, 0.25 * (1.0 - b.norm_squared()))
    }

    pub fn ln_density(&self, rho: &DensityMatrix) -> Result<f64> {
        Ok(self.ln_kernel(rho)? + self.log_constant)
    }

    /// Unit axis about which the qubit kernel is symmetric, if there is one.
    fn symmetry_axis(&self) -> Option<[f64; 3]> {
        let q = self.qubit.as_ref()?;
        let nt = norm3(&q.t);
        let nk = norm3(&q.k);
        let scale = q.t0.abs().max(q.k0.abs()).max(1.0);
        if nt <= 1e-14 * scale && nk <= 1e-14 * scale {
            return Some([1.0, 0.0, 0.0]);
        }
        let (u, other) = if nk > nt { (q.k, q.t) } else { (q.t, q.k) };
        let nu = norm3(&u);
        let axis = [u[0] / nu, u[1] / nu, u[2] / nu];
        let c = cross3(&axis, &other);
        (norm3(&c) <= 1e-12 * scale).then_some(axis)
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Orthonormal pair completing `n` to a right-handed frame.
fn frame(n: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let trial = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let e1 = cross3(n, &trial);
    let l = norm3(&e1);
    let e1 = [e1[0] / l, e1[1] / l, e1[2] / l];
    let e2 = cross3(n, &e1);
    (e1, e2)
}

pub fn xi_squared(p: &WishartParams, rho: &DensityMatrix) -> Result<XiSquared> {
    Ok(PreparedDensity::new(p)?.xi_squared(rho))
}

pub fn log_density(p: &WishartParams, rho: &DensityMatrix) -> Result<LogDensity> {
    Ok(LogDensity {
        log_value: PreparedDensity::new(p)?.ln_density(rho)?,
        exact_constant_dropped: false,
    })
}

/// ln f without the ρ-independent constant.
pub fn log_density_kernel(p: &WishartParams, rho: &DensityMatrix) -> Result<LogDensity> {
    Ok(LogDensity {
        log_value: PreparedDensity::new(p)?.ln_kernel(rho)?,
        exact_constant_dropped: true,
    })
}

const QUAD_TOL: Tolerance = Tolerance { abs: 0.0, rel: 1e-10 };

/// ln ∫ exp(kernel) over flat Bloch coordinates (disc for real, ball for complex).
pub fn ln_normalization_constant_qubit(p: &WishartParams) -> Result<f64> {
    ln_normalization_prepared(&PreparedDensity::new(p)?)
}

pub fn normalization_constant_qubit(p: &WishartParams) -> Result<f64> {
    Ok(ln_normalization_constant_qubit(p)?.exp())
}

pub(crate) fn ln_normalization_prepared(pd: &PreparedDensity) -> Result<f64> {
    if pd.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: pd.dim(),
        });
    }
    let offset = coarse_max(pd)?;
    let f = |b: BlochVector| -> Result<f64> { Ok((pd.ln_kernel_bloch(&b)? - offset).exp()) };
    let half_pi = 0.5 * PI;
    let total = match (pd.field(), pd.symmetry_axis()) {
        (FieldKind::Real, _) => integrate(
            |theta| {
                let (s, c) = theta.sin_cos();
                integrate(
                    |t| {
                        let (r, ct) = t.sin_cos();
                        Ok(f(BlochVector::plane(r * c, r * s))? * r * ct)
                    },
                    0.0,
                    half_pi,
                    QUAD_TOL,
                )
            },
            0.0,
            2.0 * PI,
            QUAD_TOL,
        )?,
        (FieldKind::Complex, Some(n)) => {
            let (e1, _) = frame(&n);
            2.0 * PI
                * integrate(
                    |u| {
                        let w = (1.0 - u * u).max(0.0).sqrt();
                        let dir = [u * n[0] + w * e1[0], u * n[1] + w * e1[1], u * n[2] + w * e1[2]];
                        integrate(
                            |t| {
                                let (r, ct) = t.sin_cos();
                                Ok(f(BlochVector::new(r * dir[0], r * dir[1], r * dir[2]))? * r * r * ct)
                            },
                            0.0,
                            half_pi,
                            QUAD_TOL,
                        )
                    },
                    -1.0,
                    1.0,
                    QUAD_TOL,
                )?
        }
        (FieldKind::Complex, None) => integrate(
            |phi| {
                let (sp, cp) = phi.sin_cos();
                integrate(
                    |u| {
                        let w = (1.0 - u * u).max(0.0).sqrt();
                        integrate(
                            |t| {
                                let (r, ct) = t.sin_cos();
                                Ok(f(BlochVector::new(r * w * cp, r * w * sp, r * u))? * r * r * ct)
                            },
                            0.0,
                            half_pi,
                            QUAD_TOL,
                        )
                    },
                    -1.0,
                    1.0,
                    QUAD_TOL,
                )
            },
            0.0,
            2.0 * PI,
            QUAD_TOL,
        )?,
    };
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::QuadratureFailure(format!("normalization integral {total}")));
    }
    Ok(offset + total.ln())
}

/// Largest kernel value on a coarse mesh, used to keep exp() in range.
fn coarse_max(pd: &PreparedDensity) -> Result<f64> {
    let m = 12;
    let mut best = f64::NEG_INFINITY;
    let step = 1.0 / m as f64;
    let ys: Vec<i32> = match pd.field() {
        FieldKind::Real => vec![0],
        FieldKind::Complex => (-m..=m).collect(),
    };
    for i in -m..=m {
        for &j in &ys {
            for k in -m..=m {
                let b = BlochVector::new(i as f64 * step, j as f64 * step, k as f64 * step);
                let r2 = b.norm_squared();
                if r2 > 1.0 {
                    continue;
                }
                let v = pd.ln_kernel_bloch(&b.scale(0.999))?;
                best = best.max(v);
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::QuadratureFailure("kernel is not finite on the coarse mesh".into()));
    }
    Ok(best)
}
