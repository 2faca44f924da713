//! Measurements, click data, likelihoods and maximum-likelihood peaks for qubits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{pauli, pauli_components, rho_to_bloch, BlochVector, CMatrix, DensityMatrix, FieldKind};

pub const BUILTIN_POMS: [&str; 4] = ["crosshair-real", "crosshair-complex", "trine", "tetrahedron"];
pub const DEFAULT_MLE_STARTS: usize = 20;

/// A qubit measurement. Each effect is stored both as a matrix and in the
/// affine form p_k(b) = c0 + c·b.
#[derive(Clone, Debug)]
pub struct Pom {
    name: String,
    kind: FieldKind,
    effects: Vec<CMatrix>,
    affine: Vec<(f64, [f64; 3])>,
}

impl Pom {
    pub fn new(name: impl Into<String>, effects: Vec<CMatrix>, kind: FieldKind) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::InvalidInput("POM needs at least one effect".into()));
        }
        let mut sum = CMatrix::zeros(2, 2);
        let mut affine = Vec::with_capacity(effects.len());
        for (k, e) in effects.iter().enumerate() {
            if e.nrows() != 2 || e.ncols() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: e.nrows(),
                });
            }
            if (e - e.adjoint()).iter().any(|c| c.norm() > 1e-12) {
                return Err(Error::InvalidInput(format!("effect {k} is not Hermitian")));
            }
            let (h0, h) = pauli_components(e);
            let hn = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
            // Eigenvalues of a 2×2 Hermitian matrix are (h0 ± |h|)/2.
            if 0.5 * (h0 - hn) < -1e-12 {
                return Err(Error::InvalidInput(format!("effect {k} is not positive semidefinite")));
            }
            if kind == FieldKind::Real && h[1] != 0.0 {
                return Err(Error::InvalidInput(format!("effect {k} has a σy part in a real POM")));
            }
            sum += e;
            affine.push((0.5 * h0, [0.5 * h[0], 0.5 * h[1], 0.5 * h[2]]));
        }
        if (sum - CMatrix::identity(2, 2)).iter().any(|c| c.norm() > 1e-12) {
            return Err(Error::InvalidInput("effects do not sum to the identity".into()));
        }
        Ok(Self {
            name: name.into(),
            kind,
            effects,
            affine,
        })
    }

    /// w (I + n·σ)
    fn from_directions(name: &str, kind: FieldKind, w: f64, dirs: &[[f64; 3]]) -> Self {
        let effects = dirs.iter().map(|n| effect_matrix(w, *n)).collect();
        Self::new(name, effects, kind).expect("built-in POM is valid")
    }

    /// x and z measured with equal probability: (I ± σx)/4, (I ± σz)/4.
    pub fn crosshair_real() -> Self {
        Self::from_directions(
            "crosshair-real",
            FieldKind::Real,
            0.25,
            &[[1., 0., 0.], [-1., 0., 0.], [0., 0., 1.], [0., 0., -1.]],
        )
    }

    /// x, y and z measured with equal probability: (I ± σj)/6.
    pub fn crosshair_complex() -> Self {
        Self::from_directions(
            "crosshair-complex",
            FieldKind::Complex,
            1.0 / 6.0,
            &[
                [1., 0., 0.],
                [-1., 0., 0.],
                [0., 1., 0.],
                [0., -1., 0.],
                [0., 0., 1.],
                [0., 0., -1.],
            ],
        )
    }

    /// Three symmetric directions in the (x, z) plane at angles 0, 2π/3, 4π/3
    /// from +x: p_k = (1 + r cos(φ − φ_k))/3.
    pub fn trine() -> Self {
        let dirs: Vec<[f64; 3]> = (0..3)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                [phi.cos(), 0.0, phi.sin()]
            })
            .collect();
        Self::from_directions("trine", FieldKind::Real, 1.0 / 3.0, &dirs)
    }

    /// p_k = (1 + v_k·b/√3)/4 for v_k = (1,1,1), (1,−1,−1), (−1,1,−1), (−1,−1,1).
    pub fn tetrahedron() -> Self {
        let t = 1.0 / 3f64.sqrt();
        Self::from_directions(
            "tetrahedron",
            FieldKind::Complex,
            0.25,
            &[[t, t, t], [t, -t, -t], [-t, t, -t], [-t, -t, t]],
        )
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "crosshair-real" => Ok(Self::crosshair_real()),
            "crosshair-complex" => Ok(Self::crosshair_complex()),
            "trine" => Ok(Self::trine()),
            "tetrahedron" => Ok(Self::tetrahedron()),
            other => Err(Error::InvalidInput(format!(
                "unknown POM {other:?}; expected one of {BUILTIN_POMS:?}"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    /// Same effects, reordered.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let effects = order
            .iter()
            .map(|&i| self.effects.get(i).cloned().ok_or(Error::InvalidInput(format!("bad index {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.name.clone(), effects, self.kind)
    }

    #[inline]
    pub fn probability_bloch(&self, k: usize, b: &BlochVector) -> f64 {
        let (c0, c) = &self.affine[k];
        (c0 + c[0] * b.x + c[1] * b.y + c[2] * b.z).max(0.0)
    }

    pub fn probabilities_bloch(&self, b: &BlochVector) -> Vec<f64> {
        (0..self.outcomes()).map(|k| self.probability_bloch(k, b)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    counts: Vec<u64>,
}

impl ClickRecord {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::InvalidInput("click record has no clicks".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn check_against(&self, pom: &Pom) -> Result<()> {
        if self.counts.len() != pom.outcomes() {
            return Err(Error::DimensionMismatch {
                expected: pom.outcomes(),
                found: self.counts.len(),
            });
        }
        Ok(())
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            counts: order.iter().map(|&i| self.counts[i]).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MlePeak {
    pub bloch: BlochVector,
    /// (r, θ, φ) as in [`BlochVector::spherical`].
    pub spherical: (f64, f64, f64),
    pub log_likelihood_at_peak: f64,
    pub on_boundary: bool,
}

pub fn born_probabilities(pom: &Pom, rho: &DensityMatrix) -> Result<Vec<f64>> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(pom.effects().iter().map(|e| rho.expectation(e).max(0.0)).collect())
}

fn log_likelihood_bloch(pom: &Pom, counts: &[u64], b: &BlochVector) -> f64 {
    let mut acc = 0.0;
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let p = pom.probability_bloch(k, b);
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += n as f64 * p.ln();
    }
    acc
}

/// Σ n_k ln p_k under a flat prior; −∞ when a clicked outcome has p_k = 0.
pub fn log_posterior(pom: &Pom, clicks: &ClickRecord, rho: &DensityMatrix) -> Result<f64> {
    clicks.check_against(pom)?;
    let b = rho_to_bloch(rho)?;
    Ok(log_likelihood_bloch(pom, clicks.counts(), &b))
}

/// An unnormalized log-density on Bloch coordinates.
pub trait QubitTarget: Sync {
    fn ln_pdf(&self, b: &BlochVector) -> f64;
}

impl<F: Fn(&BlochVector) -> f64 + Sync> QubitTarget for F {
    fn ln_pdf(&self, b: &BlochVector) -> f64 {
        self(b)
    }
}

pub type LogPrior = Arc<dyn Fn(&BlochVector) -> f64 + Send + Sync>;

/// Likelihood times prior; the prior is flat unless one is attached.
#[derive(Clone)]
pub struct Posterior {
    pom: Pom,
    clicks: ClickRecord,
    prior: Option<LogPrior>,
}

impl Posterior {
    pub fn new(pom: Pom, clicks: ClickRecord) -> Result<Self> {
        clicks.check_against(&pom)?;
        Ok(Self {
            pom,
            clicks,
            prior: None,
        })
    }

    pub fn with_log_prior(mut self, prior: LogPrior) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn pom(&self) -> &Pom {
        &self.pom
    }

    pub fn clicks(&self) -> &ClickRecord {
        &self.clicks
    }

    pub fn log_likelihood(&self, b: &BlochVector) -> f64 {
        log_likelihood_bloch(&self.pom, self.clicks.counts(), b)
    }
}

impl QubitTarget for Posterior {
    fn ln_pdf(&self, b: &BlochVector) -> f64 {
        let ll = self.log_likelihood(b);
        match &self.prior {
            Some(p) if ll > f64::NEG_INFINITY => ll + p(b),
            _ => ll,
        }
    }
}

fn gradient(pom: &Pom, counts: &[u64], b: &BlochVector) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (k, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let p = pom.probability_bloch(k, b);
        let c = pom.affine[k].1;
        for j in 0..3 {
            g[j] += n as f64 * c[j] / p;
        }
    }
    if pom.kind() == FieldKind::Real {
        g[1] = 0.0;
    }
    g
}

fn project(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if r > 1.0 {
        [v[0] / r, v[1] / r, v[2] / r]
    } else {
        v
    }
}

/// Projected gradient ascent with Armijo backtracking, then Newton polishing
/// when the optimum is interior.
fn ascend(pom: &Pom, counts: &[u64], start: [f64; 3]) -> ([f64; 3], f64) {
    let f = |v: &[f64; 3]| log_likelihood_bloch(pom, counts, &BlochVector::from_array(*v));
    let mut x = start;
    let mut fx = f(&x);
    let mut step = 1e-3;
    let mut still = 0;
    for _ in 0..50_000 {
        let g = gradient(pom, counts, &BlochVector::from_array(x));
        let mut moved = false;
        while step > 1e-300 {
            let cand = project([x[0] + step * g[0], x[1] + step * g[1], x[2] + step * g[2]]);
            let fc = f(&cand);
            let lin: f64 = (0..3).map(|j| g[j] * (cand[j] - x[j])).sum();
            if fc.is_finite() && fc >= fx + 1e-4 * lin {
                let dist: f64 = (0..3).map(|j| (cand[j] - x[j]).powi(2)).sum::<f64>().sqrt();
                x = cand;
                fx = fc;
                step *= 2.0;
                moved = dist > 1e-14;
                break;
            }
            step *= 0.5;
        }
        if moved {
            still = 0;
        } else {
            still += 1;
            if still >= 3 {
                break;
            }
        }
    }
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if r2 < 1.0 - 1e-6 {
        if let Some((y, fy)) = newton_polish(pom, counts, x, fx) {
            return (y, fy);
        }
    }
    (x, fx)
}

fn newton_polish(pom: &Pom, counts: &[u64], mut x: [f64; 3], mut fx: f64) -> Option<([f64; 3], f64)> {
    let real = pom.kind() == FieldKind::Real;
    for _ in 0..50 {
        let b = BlochVector::from_array(x);
        let g = gradient(pom, counts, &b);
        let mut h = nalgebra::Matrix3::<f64>::zeros();
        for (k, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let p = pom.probability_bloch(k, &b);
            let c = nalgebra::Vector3::from(pom.affine[k].1);
            h -= (c * c.transpose()) * (n as f64 / (p * p));
        }
        if real {
            h[(1, 1)] = -1.0;
            for j in [0, 2] {
                h[(1, j)] = 0.0;
                h[(j, 1)] = 0.0;
            }
        }
        let dx = h.try_inverse()? * nalgebra::Vector3::from(g);
        let cand = [x[0] - dx[0], x[1] - dx[1], x[2] - dx[2]];
        if cand.iter().map(|c| c * c).sum::<f64>() >= 1.0 {
            return None;
        }
        let fc = log_likelihood_bloch(pom, counts, &BlochVector::from_array(cand));
        if !(fc >= fx - 1e-12 * fx.abs()) {
            return None;
        }
        x = cand;
        fx = fc.max(fx);
        if dx.norm() < 1e-15 {
            break;
        }
    }
    Some((x, fx))
}

fn starts(kind: FieldKind, count: usize) -> Vec<[f64; 3]> {
    let mut out = vec![[0.0; 3]];
    let m = count.saturating_sub(1);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..m {
        let p = match kind {
            FieldKind::Real => {
                let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [0.5 * a.cos(), 0.0, 0.5 * a.sin()]
            }
            FieldKind::Complex => {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                let w = (1.0 - y * y).sqrt();
                let a = golden * i as f64;
                [0.5 * w * a.cos(), 0.5 * y, 0.5 * w * a.sin()]
            }
        };
        out.push(p);
    }
    out.truncate(count.max(1));
    out
}

pub fn mle(pom: &Pom, clicks: &ClickRecord) -> Result<MlePeak> {
    mle_with_starts(pom, clicks, DEFAULT_MLE_STARTS)
}

/// Best of `n_starts` deterministic local ascents; ties go to the earliest start.
pub fn mle_with_starts(pom: &Pom, clicks: &ClickRecord, n_starts: usize) -> Result<MlePeak> {
    clicks.check_against(pom)?;
    let mut best: Option<([f64; 3], f64)> = None;
    for s in starts(pom.kind(), n_starts) {
        let (x, fx) = ascend(pom, clicks.counts(), s);
        if best.as_ref().is_none_or(|(_, fb)| fx > *fb) {
            best = Some((x, fx));
        }
    }
    let (x, fx) = best.expect("at least one start");
    let mut b = BlochVector::from_array(x);
    let r = b.norm();
    let on_boundary = r > 1.0 - 1e-9;
    if on_boundary {
        b = b.scale(1.0 / r);
    }
    Ok(MlePeak {
        bloch: b,
        spherical: b.spherical(),
        log_likelihood_at_peak: fx,
        on_boundary,
    })
}

fn effect_matrix(w: f64, n: [f64; 3]) -> CMatrix {
    let s = pauli();
    (CMatrix::identity(2, 2) + s[0].scale(n[0]) + s[1].scale(n[1]) + s[2].scale(n[2])).scale(w)
}
