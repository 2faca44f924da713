//! Density matrices, Bloch coordinates and alignment rotations.

use nalgebra::{DMatrix, Unit, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{WishartParams, WishartSampler};

pub type CMatrix = DMatrix<Complex64>;
pub type Rotation3 = nalgebra::Rotation3<f64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const RADIUS_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

impl FieldKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldKind::Real => "real",
            FieldKind::Complex => "complex",
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(FieldKind::Real),
            "complex" => Ok(FieldKind::Complex),
            other => Err(Error::InvalidInput(format!("unknown field kind {other:?}"))),
        }
    }
}

/// Qubit Bloch coordinates. Real-plane states have `y == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ORIGIN: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point of the real (x, z) disc.
    pub fn plane(x: f64, z: f64) -> Self {
        Self { x, y: 0.0, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn rotate(&self, r: &Rotation3) -> Self {
        Self::from_vector(&(r * self.to_vector()))
    }

    /// (r, θ, φ) with θ = arccos(x / r) measured from the +x axis and
    /// φ = atan2(y, z) in [0, 2π). This is the convention under which the
    /// tetrahedron peak coordinates are reported.
    pub fn spherical(&self) -> (f64, f64, f64) {
        let r = self.norm();
        if r == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let theta = (self.x / r).clamp(-1.0, 1.0).acos();
        let mut phi = self.y.atan2(self.z);
        if phi < 0.0 {
            phi += 2.0 * std::f64::consts::PI;
        }
        (r, theta, phi)
    }

    pub fn from_spherical(r: f64, theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        Self::new(r * theta.cos(), r * s * phi.sin(), r * s * phi.cos())
    }

    /// Polar angle in the (x, z) plane measured from +x towards +z.
    pub fn plane_angle(&self) -> f64 {
        self.z.atan2(self.x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates the Hermitian, unit-trace and PSD invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = Self { m };
        rho.check_invariants()?;
        Ok(rho)
    }

    /// Hermitian-symmetrizes and trace-normalizes a PSD matrix such as `AA†`.
    pub fn from_psd(w: &CMatrix) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let h = (w + w.adjoint()).scale(0.5);
        let tr = h.trace().re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        let mut m = h.unscale(tr);
        for i in 0..m.nrows() {
            m[(i, i)].im = 0.0;
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            m: CMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// Re tr(Hρ) for Hermitian `h`.
    pub fn expectation(&self, h: &CMatrix) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (h[(i, j)] * self.m[(j, i)]).re;
            }
        }
        acc
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.m.clone().symmetric_eigenvalues();
        let mut v: Vec<f64> = eig.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 2 {
            let b = rho_to_bloch_raw(&self.m);
            return 0.5 * (1.0 - b.norm());
        }
        self.eigenvalues()[0]
    }

    pub fn det(&self) -> f64 {
        if self.dim() == 2 {
            let m = &self.m;
            return m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr();
        }
        self.eigenvalues().iter().product()
    }

    pub fn is_real(&self) -> bool {
        self.m.iter().all(|c| c.im == 0.0)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let m = &self.m;
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        let d = m.nrows();
        for i in 0..d {
            for j in 0..d {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -PSD_TOL {
            return Err(Error::InvalidState(format!("smallest eigenvalue {lmin:e} < 0")));
        }
        Ok(())
    }

    /// ρ → UρU†.
    pub fn conjugate(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        Self::from_psd(&(u * &self.m * u.adjoint()))
    }
}

pub fn pauli() -> [CMatrix; 3] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

/// (tr H, tr Hσx, tr Hσy, tr Hσz) for a 2×2 Hermitian `h`, so that
/// tr(Hρ) = (h0 + h·b) / 2.
pub(crate) fn pauli_components(h: &CMatrix) -> (f64, [f64; 3]) {
    let h0 = h[(0, 0)].re + h[(1, 1)].re;
    let hx = h[(0, 1)].re + h[(1, 0)].re;
    let hy = h[(1, 0)].im - h[(0, 1)].im;
    let hz = h[(0, 0)].re - h[(1, 1)].re;
    (h0, [hx, hy, hz])
}

pub(crate) fn bloch_matrix(b: &BlochVector) -> CMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.5 * (1.0 + b.z), 0.0),
            c(0.5 * b.x, -0.5 * b.y),
            c(0.5 * b.x, 0.5 * b.y),
            c(0.5 * (1.0 - b.z), 0.0),
        ],
    )
}

fn rho_to_bloch_raw(m: &CMatrix) -> BlochVector {
    BlochVector::new(
        m[(0, 1)].re + m[(1, 0)].re,
        m[(1, 0)].im - m[(0, 1)].im,
        m[(0, 0)].re - m[(1, 1)].re,
    )
}

pub fn bloch_to_rho(b: &BlochVector) -> Result<DensityMatrix> {
    let r = b.norm();
    if r > 1.0 + RADIUS_TOL {
        return Err(Error::RadiusOutOfRange(r));
    }
    Ok(DensityMatrix::from_matrix_unchecked(bloch_matrix(b)))
}

pub fn rho_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(rho_to_bloch_raw(rho.matrix()))
}

/// Uniform state: flat in Bloch coordinates for qubits. Drawn as a central
/// Wishart state with N = d (complex) or N = d + 1 (real), whose density has
/// a zero determinant exponent.
pub fn sample_uniform_state<R: Rng + ?Sized>(
    d: usize,
    field: FieldKind,
    rng: &mut R,
) -> Result<DensityMatrix> {
    uniform_sampler(d, field)?.sample_state(rng)
}

pub(crate) fn uniform_sampler(d: usize, field: FieldKind) -> Result<WishartSampler> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("state dimension {d} < 2")));
    }
    let n = match field {
        FieldKind::Complex => d.max(2),
        FieldKind::Real => (d + 1).max(3),
    };
    WishartSampler::new(WishartParams::central(field, d, n)?)
}

/// Proper rotation taking the direction of `from` onto the direction of `to`.
pub fn align_rotation(from: &BlochVector, to: &BlochVector) -> Result<Rotation3> {
    let (nf, nt) = (from.norm(), to.norm());
    if nf < 1e-12 || nt < 1e-12 {
        return Err(Error::ZeroVector);
    }
    let a = from.to_vector() / nf;
    let b = to.to_vector() / nt;
    let cos = a.dot(&b).clamp(-1.0, 1.0);
    let cross = a.cross(&b);
    let sin = cross.norm();
    if sin > 1e-9 {
        return Ok(Rotation3::from_axis_angle(
            &Unit::new_normalize(cross),
            sin.atan2(cos),
        ));
    }
    if cos > 0.0 {
        return Ok(Rotation3::identity());
    }
    // Antipodal: half turn about an axis perpendicular to `from`. The y axis
    // is preferred so that real-plane states stay in the plane.
    let y = Vector3::y();
    let axis = if a.dot(&y).abs() < 1e-12 {
        y
    } else {
        let trial = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::z() };
        a.cross(&trial).normalize()
    };
    Ok(Rotation3::from_axis_angle(
        &Unit::new_normalize(axis),
        std::f64::consts::PI,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bloch_round_trip() {
        let b = BlochVector::new(0.3, -0.2, 0.4);
        let rho = bloch_to_rho(&b).unwrap();
        rho.check_invariants().unwrap();
        let back = rho_to_bloch(&rho).unwrap();
        assert_abs_diff_eq!(back.x, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(back.z, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn center_and_poles() {
        let rho = bloch_to_rho(&BlochVector::ORIGIN).unwrap();
        assert_eq!(rho, DensityMatrix::maximally_mixed(2));
        let pole = bloch_to_rho(&BlochVector::new(1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(pole.det(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pole.matrix()[(0, 1)].re, 0.5, epsilon = 1e-15);
        let diag = DensityMatrix::new(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])))
        .unwrap();
        let b = rho_to_bloch(&diag).unwrap();
        assert_eq!(b.to_array(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn half_x_eigenvalues() {
        let rho = bloch_to_rho(&BlochVector::new(0.5, 0.0, 0.0)).unwrap();
        let ev = rho.eigenvalues();
        assert_abs_diff_eq!(ev[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn radius_out_of_range() {
        assert!(matches!(
            bloch_to_rho(&BlochVector::new(0.8, 0.0, 0.7)),
            Err(Error::RadiusOutOfRange(_))
        ));
    }

    #[test]
    fn rho_to_bloch_needs_qubit() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            rho_to_bloch(&rho),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn pauli_components_match_trace() {
        let sigma = pauli();
        let b = BlochVector::new(0.1, 0.5, -0.3);
        let rho = bloch_to_rho(&b).unwrap();
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.3, 0.0),
                Complex64::new(0.2, -0.7),
                Complex64::new(0.2, 0.7),
                Complex64::new(-0.4, 0.0),
            ],
        );
        let (h0, hv) = pauli_components(&h);
        let expect = 0.5 * (h0 + hv[0] * b.x + hv[1] * b.y + hv[2] * b.z);
        assert_abs_diff_eq!(rho.expectation(&h), expect, epsilon = 1e-14);
        for (j, s) in sigma.iter().enumerate() {
            assert_abs_diff_eq!(rho.expectation(s), b.to_array()[j], epsilon = 1e-14);
        }
    }

    #[test]
    fn rotations() {
        let r = align_rotation(&BlochVector::new(1., 0., 0.), &BlochVector::new(1., 0., 0.)).unwrap();
        assert_abs_diff_eq!((r.matrix() - nalgebra::Matrix3::identity()).abs().max(), 0.0, epsilon = 1e-15);

        let r = align_rotation(&BlochVector::new(1., 0., 0.), &BlochVector::new(0., 0., 1.)).unwrap();
        let p = BlochVector::new(0.5, 0., 0.).rotate(&r);
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 0.5, epsilon = 1e-12);

        let t = 1.0 / 3f64.sqrt();
        let r = align_rotation(&BlochVector::new(1., 0., 0.), &BlochVector::new(1., 1., 1.)).unwrap();
        let p = BlochVector::new(1., 0., 0.).rotate(&r);
        for c in p.to_array() {
            assert_abs_diff_eq!(c, t, epsilon = 1e-12);
        }
        let m = r.matrix();
        assert_abs_diff_eq!((m.transpose() * m - nalgebra::Matrix3::identity()).abs().max(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn antipodal_stays_in_plane() {
        let r = align_rotation(&BlochVector::plane(1., 0.), &BlochVector::plane(-1., 0.)).unwrap();
        let p = BlochVector::plane(0.3, 0.4).rotate(&r);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.x, -0.3, epsilon = 1e-12);
        let r = align_rotation(&BlochVector::new(0., 1., 0.), &BlochVector::new(0., -1., 0.)).unwrap();
        let p = BlochVector::new(0., 1., 0.).rotate(&r);
        assert_abs_diff_eq!(p.y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(matches!(
            align_rotation(&BlochVector::ORIGIN, &BlochVector::new(1., 0., 0.)),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn uniform_qubit_moments() {
        let mut rng = RandomStream::new(11, 0).rng();
        let n = 1_000_000;
        let (mut r2, mut m) = (0.0, [0.0; 3]);
        for _ in 0..n {
            let b = rho_to_bloch(&sample_uniform_state(2, FieldKind::Complex, &mut rng).unwrap()).unwrap();
            r2 += b.norm_squared();
            for (k, c) in b.to_array().iter().enumerate() {
                m[k] += c;
            }
        }
        let n = n as f64;
        assert!((r2 / n - 0.6).abs() < 0.01, "mean r^2 = {}", r2 / n);
        for c in m {
            assert!((c / n).abs() < 0.005);
        }
    }

    #[test]
    fn uniform_qutrit_is_valid() {
        let mut rng = RandomStream::new(5, 1).rng();
        for _ in 0..100 {
            let rho = sample_uniform_state(3, FieldKind::Complex, &mut rng).unwrap();
            rho.check_invariants().unwrap();
        }
    }

    #[test]
    fn spherical_round_trip() {
        let b = BlochVector::new(-0.24 * 3f64.sqrt(), 0.32 * 3f64.sqrt(), -0.12 * 3f64.sqrt());
        let (r, th, ph) = b.spherical();
        let c = BlochVector::from_spherical(r, th, ph);
        assert_abs_diff_eq!((c.x - b.x).abs() + (c.y - b.y).abs() + (c.z - b.z).abs(), 0.0, epsilon = 1e-12);
    }
}
