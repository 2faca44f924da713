//! Log-gamma primitives and the confluent series factor
//! S(a, b, u) = Σ_k u^k Γ(a+k) / (k! Γ(b+k)).
//!
//! When a − b = m is a positive integer, Kummer's transform gives
//! S = Γ(a)/Γ(b) · e^u · P(u) with P a degree-m polynomial of positive
//! coefficients. Otherwise the series is summed directly in scaled linear space.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::state::FieldKind;

pub use statrs::function::gamma::ln_gamma;

pub const MAX_SERIES_TERMS: usize = 100_000;
pub const SERIES_REL_TOL: f64 = 1e-15;
const RESCALE_AT: f64 = 1e280;
const INTEGER_TOL: f64 = 1e-12;
// Degrees above this fall back to the series; binomial-over-Pochhammer
// coefficients underflow long before it matters.
const MAX_POLY_DEGREE: usize = 400;

/// ln Γ_d(b) of the real (d(d−1)/4 ln π + Σ lnΓ(b − (i−1)/2)) or complex
/// (d(d−1)/2 ln π + Σ lnΓ(b − i + 1)) multivariate gamma function.
pub fn ln_multivariate_gamma(field: FieldKind, d: usize, b: f64) -> f64 {
    let df = d as f64;
    match field {
        FieldKind::Real => {
            df * (df - 1.0) / 4.0 * PI.ln()
                + (1..=d).map(|i| ln_gamma(b - (i as f64 - 1.0) / 2.0)).sum::<f64>()
        }
        FieldKind::Complex => {
            df * (df - 1.0) / 2.0 * PI.ln()
                + (1..=d).map(|i| ln_gamma(b - i as f64 + 1.0)).sum::<f64>()
        }
    }
}

/// One (a, b) instance of the series, with its Kummer polynomial when one exists.
#[derive(Clone, Debug)]
pub struct LnSeries {
    a: f64,
    b: f64,
    ln_ratio: f64,
    poly: Option<Vec<f64>>,
}

impl LnSeries {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput(format!("series parameters a={a}, b={b} must be positive")));
        }
        let m = (a - b).round();
        let poly = if m >= 1.0 && (a - b - m).abs() < INTEGER_TOL && (m as usize) <= MAX_POLY_DEGREE {
            let m = m as usize;
            // c_j = C(m, j) / (b)_j
            let mut c = Vec::with_capacity(m + 1);
            let mut cj = 1.0;
            c.push(cj);
            for j in 0..m {
                cj *= (m - j) as f64 / ((j + 1) as f64 * (b + j as f64));
                c.push(cj);
            }
            Some(c)
        } else {
            None
        };
        Ok(Self {
            a,
            b,
            ln_ratio: ln_gamma(a) - ln_gamma(b),
            poly,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn has_polynomial(&self) -> bool {
        self.poly.is_some()
    }

    pub fn ln_value(&self, u: f64) -> Result<f64> {
        match self.ln_polynomial(u) {
            Some(v) => Ok(v),
            None => self.ln_series(u),
        }
    }

    /// ln S via the Kummer polynomial, when a − b is a positive integer.
    pub fn ln_polynomial(&self, u: f64) -> Option<f64> {
        let c = self.poly.as_ref()?;
        let m = c.len() - 1;
        let lp = if u <= 1.0 {
            c.iter().rev().fold(0.0, |acc, &cj| acc * u + cj).ln()
        } else {
            // u^m Σ c_{m−i} u^{−i}
            let v = 1.0 / u;
            m as f64 * u.ln() + c.iter().fold(0.0, |acc, &cj| acc * v + cj).ln()
        };
        Some(self.ln_ratio + u + lp)
    }

    /// ln S by direct summation, stopping once a geometric tail bound falls
    /// below `SERIES_REL_TOL` of the running sum.
    pub fn ln_series(&self, u: f64) -> Result<f64> {
        if u == 0.0 {
            return Ok(self.ln_ratio);
        }
        let (a, b) = (self.a, self.b);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut ln_scale = 0.0;
        for k in 0..MAX_SERIES_TERMS {
            let kf = k as f64;
            let r = u * (a + kf) / ((kf + 1.0) * (b + kf));
            term *= r;
            sum += term;
            if sum > RESCALE_AT {
                sum /= RESCALE_AT;
                term /= RESCALE_AT;
                ln_scale += RESCALE_AT.ln();
            }
            let rn = u * (a + kf + 1.0) / ((kf + 2.0) * (b + kf + 1.0));
            if rn < 1.0 && rn <= r && term * rn / (1.0 - rn) <= SERIES_REL_TOL * sum {
                return Ok(self.ln_ratio + sum.ln() + ln_scale);
            }
        }
        Err(Error::NonConvergence {
            terms: MAX_SERIES_TERMS,
        })
    }
}

/// S(a, b, ·) together with S(a+1, b+1, ·) = S′, for log-derivatives.
#[derive(Clone, Debug)]
pub struct SeriesFactor {
    base: LnSeries,
    shifted: LnSeries,
}

impl SeriesFactor {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Ok(Self {
            base: LnSeries::new(a, b)?,
            shifted: LnSeries::new(a + 1.0, b + 1.0)?,
        })
    }

    pub fn base(&self) -> &LnSeries {
        &self.base
    }

    pub fn ln_value(&self, u: f64) -> Result<f64> {
        self.base.ln_value(u)
    }

    /// T(u) = S′(u) / S(u).
    pub fn log_derivative(&self, u: f64) -> Result<f64> {
        Ok((self.shifted.ln_value(u)? - self.base.ln_value(u)?).exp())
    }
}

/// ln S(a, b, u).
pub fn series_factor(a: f64, b: f64, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::InvalidInput(format!("series argument {u} must be non-negative")));
    }
    LnSeries::new(a, b)?.ln_value(u)
}
