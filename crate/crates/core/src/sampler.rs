//! Mixture proposals, envelope constants and acceptance–rejection sampling of
//! qubit posteriors.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{ln_normalization_prepared, PreparedDensity};
use crate::error::{Error, Result};
use crate::estimation::{mle, ClickRecord, Pom, Posterior, QubitTarget};
use crate::gaussian::{WishartParams, WishartSampler};
use crate::peak::{build_qubit_proposal, PeakRequest, MU_MAX};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::RandomStream;
use crate::state::{align_rotation, bloch_to_rho, rho_to_bloch, uniform_sampler, BlochVector, DensityMatrix, FieldKind, Rotation3};

pub const DEFAULT_GRID_RESOLUTION: f64 = 0.01;
pub const DEFAULT_SAFETY: f64 = 1.05;
pub const DEFAULT_ALPHA: f64 = 0.002;
pub const REFINE_TOP: usize = 10;
/// Refinement may raise the grid maximum by at most this factor.
pub const MAX_REFINE_GROWTH: f64 = 1e6;
/// Accepted samples per random stream.
pub const ACCEPT_CHUNK: usize = 1024;
/// Proposals per random stream when measuring acceptance rates.
pub const PROPOSAL_CHUNK: usize = 8192;

#[derive(Clone, Debug)]
pub enum Generator {
    Wishart(WishartParams),
    Uniform,
}

#[derive(Clone, Debug)]
pub struct Component {
    pub weight: f64,
    pub generator: Generator,
}

#[derive(Clone, Debug)]
enum Prepared {
    Wishart {
        sampler: WishartSampler,
        density: PreparedDensity,
        ln_z: f64,
    },
    Uniform {
        sampler: WishartSampler,
    },
}

/// Weighted mixture of Wishart ensembles and the uniform state law. The
/// rotation applies to the Wishart components.
#[derive(Clone, Debug)]
pub struct ProposalSpec {
    field: FieldKind,
    components: Vec<Component>,
    rotation: Rotation3,
    inverse: Rotation3,
    prepared: Vec<Prepared>,
    ln_weights: Vec<f64>,
    cumulative: Vec<f64>,
    ln_uniform: f64,
}

impl ProposalSpec {
    pub fn new(field: FieldKind, components: Vec<Component>, rotation: Rotation3) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("proposal needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "component weights must be non-negative and sum to 1 (sum {total})"
            )));
        }
        if field == FieldKind::Real {
            let y = rotation * nalgebra::Vector3::y();
            if (y[1].abs() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput("rotation leaves the real (x, z) plane".into()));
            }
        }
        let mut prepared = Vec::with_capacity(components.len());
        for c in &components {
            prepared.push(match &c.generator {
                Generator::Wishart(p) => {
                    if p.dim() != 2 {
                        return Err(Error::DimensionMismatch {
                            expected: 2,
                            found: p.dim(),
                        });
                    }
                    if p.field() != field {
                        return Err(Error::InvalidInput("component field differs from proposal field".into()));
                    }
                    let density = PreparedDensity::new(p)?;
                    let ln_z = ln_normalization_prepared(&density)?;
                    Prepared::Wishart {
                        sampler: WishartSampler::new(p.clone())?,
                        density,
                        ln_z,
                    }
                }
                Generator::Uniform => Prepared::Uniform {
                    sampler: uniform_sampler(2, field)?,
                },
            });
        }
        let mut acc = 0.0;
        let cumulative = components
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        let ln_weights = components.iter().map(|c| c.weight.ln()).collect();
        let ln_uniform = match field {
            FieldKind::Real => -PI.ln(),
            FieldKind::Complex => -(4.0 * PI / 3.0).ln(),
        };
        Ok(Self {
            field,
            components,
            rotation,
            inverse: rotation.inverse(),
            prepared,
            ln_weights,
            cumulative,
            ln_uniform,
        })
    }

    pub fn uniform(field: FieldKind) -> Result<Self> {
        Self::new(
            field,
            vec![Component {
                weight: 1.0,
                generator: Generator::Uniform,
            }],
            Rotation3::identity(),
        )
    }

    pub fn field(&self) -> FieldKind {
        self.field
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn rotation(&self) -> &Rotation3 {
        &self.rotation
    }

    /// ln of the normalized flat-Bloch proposal density.
    pub fn logpdf_bloch(&self, b: &BlochVector) -> Result<f64> {
        let back = b.rotate(&self.inverse);
        let mut m = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.prepared.len());
        for (p, lw) in self.prepared.iter().zip(&self.ln_weights) {
            if *lw == f64::NEG_INFINITY {
                continue;
            }
            let v = lw + match p {
                Prepared::Wishart { density, ln_z, .. } => density.ln_kernel_bloch(&back)? - ln_z,
                Prepared::Uniform { .. } => self.ln_uniform,
            };
            m = m.max(v);
            terms.push(v);
        }
        if m == f64::NEG_INFINITY {
            return Ok(m);
        }
        Ok(m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln())
    }

    pub fn logpdf(&self, rho: &DensityMatrix) -> Result<f64> {
        self.logpdf_bloch(&rho_to_bloch(rho)?)
    }

    fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .zip(&self.components)
            .position(|(&c, comp)| u < c && comp.weight > 0.0)
            .unwrap_or_else(|| self.components.iter().rposition(|c| c.weight > 0.0).unwrap())
    }

    pub fn propose_bloch<R: Rng + ?Sized>(&self, rng: &mut R) -> BlochVector {
        match &self.prepared[self.choose(rng)] {
            Prepared::Wishart { sampler, .. } => sampler.sample_bloch(rng).rotate(&self.rotation),
            Prepared::Uniform { sampler } => sampler.sample_bloch(rng),
        }
    }

    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DensityMatrix> {
        let b = self.propose_bloch(rng);
        bloch_to_rho(&b.scale(1.0 / b.norm().max(1.0)))
    }
}

pub fn proposal_logpdf(spec: &ProposalSpec, rho: &DensityMatrix) -> Result<f64> {
    spec.logpdf(rho)
}

pub fn propose<R: Rng + ?Sized>(spec: &ProposalSpec, rng: &mut R) -> Result<DensityMatrix> {
    spec.propose(rng)
}

#[derive(Clone, Copy, Debug)]
pub struct BoundOptions {
    pub resolution: f64,
    pub safety: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_GRID_RESOLUTION,
            safety: DEFAULT_SAFETY,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundEstimate {
    pub c: f64,
    pub ln_grid_max: f64,
    pub ln_refined_max: f64,
    pub argmax: BlochVector,
}

/// Grid points of the disc or ball at spacing `h`, plus boundary points.
fn grid_points(field: FieldKind, h: f64) -> Vec<BlochVector> {
    let m = (1.0 / h).round() as i64;
    let mut pts = Vec::new();
    let ys: Vec<i64> = match field {
        FieldKind::Real => vec![0],
        FieldKind::Complex => (-m..=m).collect(),
    };
    for i in -m..=m {
        for &j in &ys {
            for k in -m..=m {
                let b = BlochVector::new(i as f64 * h, j as f64 * h, k as f64 * h);
                if b.norm_squared() <= 1.0 {
                    pts.push(b);
                }
            }
        }
    }
    match field {
        FieldKind::Real => {
            let n = (2.0 * PI / h).ceil() as usize;
            for i in 0..n {
                let a = 2.0 * PI * i as f64 / n as f64;
                pts.push(BlochVector::plane(a.cos(), a.sin()));
            }
        }
        FieldKind::Complex => {
            let n = (4.0 * PI / (h * h)).ceil() as usize;
            let golden = PI * (3.0 - 5f64.sqrt());
            for i in 0..n {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let w = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                pts.push(BlochVector::new(w * a.cos(), w * a.sin(), z));
            }
        }
    }
    pts
}

fn ln_ratio<T: QubitTarget + ?Sized>(target: &T, spec: &ProposalSpec, b: &BlochVector) -> Result<f64> {
    let lt = target.ln_pdf(b);
    if lt == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let lp = spec.logpdf_bloch(b)?;
    if lp == f64::NEG_INFINITY || lt.is_nan() {
        return Ok(f64::INFINITY);
    }
    Ok(lt - lp)
}

fn project(b: BlochVector, field: FieldKind) -> BlochVector {
    let b = if field == FieldKind::Real { BlochVector::plane(b.x, b.z) } else { b };
    let r = b.norm();
    if r > 1.0 {
        b.scale(1.0 / r)
    } else {
        b
    }
}

/// Compass search on the log ratio, projected onto the disc or ball.
fn refine<T: QubitTarget + ?Sized>(
    target: &T,
    spec: &ProposalSpec,
    start: BlochVector,
    start_val: f64,
    h: f64,
) -> Result<(f64, BlochVector)> {
    let axes: Vec<[f64; 3]> = match spec.field {
        FieldKind::Real => vec![[1., 0., 0.], [-1., 0., 0.], [0., 0., 1.], [0., 0., -1.]],
        FieldKind::Complex => vec![
            [1., 0., 0.],
            [-1., 0., 0.],
            [0., 1., 0.],
            [0., -1., 0.],
            [0., 0., 1.],
            [0., 0., -1.],
        ],
    };
    let (mut x, mut fx) = (start, start_val);
    let mut step = h;
    let mut iters = 0;
    while step > 1e-10 && iters < 5000 {
        iters += 1;
        let mut best = (fx, x);
        for a in &axes {
            let cand = project(
                BlochVector::new(x.x + step * a[0], x.y + step * a[1], x.z + step * a[2]),
                spec.field,
            );
            let v = ln_ratio(target, spec, &cand)?;
            if v > best.0 {
                best = (v, cand);
            }
        }
        if best.0 == f64::INFINITY {
            return Ok(best);
        }
        if best.0 > fx {
            (fx, x) = best;
        } else {
            step *= 0.5;
        }
    }
    Ok((fx, x))
}

/// c = safety · max f/g over a Bloch grid, refined by local ascent from the
/// best grid cells. `target` may be unnormalized.
pub fn estimate_bound<T: QubitTarget + ?Sized>(
    target: &T,
    spec: &ProposalSpec,
    opts: BoundOptions,
) -> Result<BoundEstimate> {
    if !(opts.safety >= 1.0) || !(opts.resolution > 0.0 && opts.resolution <= 0.5) {
        return Err(Error::InvalidInput(format!(
            "bad bound options: resolution {}, safety {}",
            opts.resolution, opts.safety
        )));
    }
    let pts = grid_points(spec.field, opts.resolution);
    let tops: Vec<Result<Vec<(f64, usize)>>> = pts
        .par_chunks(16384)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut top: Vec<(f64, usize)> = Vec::with_capacity(REFINE_TOP + 1);
            for (k, b) in chunk.iter().enumerate() {
                let v = ln_ratio(target, spec, b)?;
                if v == f64::INFINITY {
                    return Err(Error::UnboundedRatio {
                        grid_max: f64::INFINITY,
                        refined_max: f64::INFINITY,
                    });
                }
                if v == f64::NEG_INFINITY {
                    continue;
                }
                if top.len() < REFINE_TOP || v > top[top.len() - 1].0 {
                    let idx = ci * 16384 + k;
                    let pos = top.partition_point(|e| e.0 >= v);
                    top.insert(pos, (v, idx));
                    top.truncate(REFINE_TOP);
                }
            }
            Ok(top)
        })
        .collect();
    let mut all = Vec::new();
    for t in tops {
        all.extend(t?);
    }
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    all.truncate(REFINE_TOP);
    if all.is_empty() {
        return Err(Error::InvalidInput("target is zero on the whole grid".into()));
    }
    let ln_grid_max = all[0].0;
    let mut best = (ln_grid_max, pts[all[0].1]);
    for &(v, idx) in &all {
        let r = refine(target, spec, pts[idx], v, opts.resolution)?;
        if r.0 > best.0 {
            best = r;
        }
    }
    if best.0 - ln_grid_max > MAX_REFINE_GROWTH.ln() {
        return Err(Error::UnboundedRatio {
            grid_max: ln_grid_max.exp(),
            refined_max: best.0.exp(),
        });
    }
    Ok(BoundEstimate {
        c: opts.safety * best.0.exp(),
        ln_grid_max,
        ln_refined_max: best.0,
        argmax: best.1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub proposed: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub bound_c: f64,
    /// Largest f/g seen among proposals; must not exceed `bound_c`.
    pub max_observed_ratio: f64,
    pub wall_seconds: f64,
}

struct ChunkResult {
    samples: Vec<BlochVector>,
    proposed: u64,
    max_ln_ratio: f64,
}

fn run_chunk<T: QubitTarget + ?Sized, R: Rng>(
    target: &T,
    spec: &ProposalSpec,
    ln_c: f64,
    rng: &mut R,
    want_accept: Option<usize>,
    proposals: Option<usize>,
) -> Result<ChunkResult> {
    let keep = want_accept.is_some();
    let mut out = ChunkResult {
        samples: Vec::with_capacity(want_accept.unwrap_or(0)),
        proposed: 0,
        max_ln_ratio: f64::NEG_INFINITY,
    };
    let mut accepted = 0usize;
    loop {
        if want_accept.is_some_and(|n| accepted >= n) || proposals.is_some_and(|n| out.proposed as usize >= n) {
            return Ok(out);
        }
        let b = spec.propose_bloch(rng);
        let u: f64 = rng.random();
        out.proposed += 1;
        let lr = ln_ratio(target, spec, &b)?;
        if lr > out.max_ln_ratio {
            out.max_ln_ratio = lr;
        }
        if lr > ln_c + 1e-12 {
            return Err(Error::RatioExceedsBound {
                ratio: lr.exp(),
                bound: ln_c.exp(),
                state: b,
            });
        }
        if u.ln() < lr - ln_c {
            accepted += 1;
            if keep {
                out.samples.push(b);
            }
        }
    }
}

fn check_c(c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidInput(format!("bound c = {c} must be positive and finite")));
    }
    Ok(c.ln())
}

/// Accept–reject until `n_accept` samples. Stream k of `seed` produces the
/// k-th block of [`ACCEPT_CHUNK`] accepted samples, so output is independent
/// of the worker count.
pub fn rejection_sample<T: QubitTarget + ?Sized>(
    target: &T,
    spec: &ProposalSpec,
    c: f64,
    n_accept: usize,
    seed: u64,
) -> Result<(Vec<BlochVector>, RejectionReport)> {
    if n_accept == 0 {
        return Err(Error::InvalidInput("n_accept must be at least 1".into()));
    }
    let ln_c = check_c(c)?;
    let start = Instant::now();
    let chunks = n_accept.div_ceil(ACCEPT_CHUNK);
    let parts: Vec<Result<ChunkResult>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomStream::new(seed, k as u64).rng();
            let want = ACCEPT_CHUNK.min(n_accept - k * ACCEPT_CHUNK);
            run_chunk(target, spec, ln_c, &mut rng, Some(want), None)
        })
        .collect();
    let mut samples = Vec::with_capacity(n_accept);
    let (mut proposed, mut max_lr) = (0u64, f64::NEG_INFINITY);
    for p in parts {
        let p = p?;
        proposed += p.proposed;
        max_lr = max_lr.max(p.max_ln_ratio);
        samples.extend(p.samples);
    }
    let report = RejectionReport {
        proposed,
        accepted: samples.len() as u64,
        acceptance_rate: samples.len() as f64 / proposed as f64,
        bound_c: c,
        max_observed_ratio: max_lr.exp(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((samples, report))
}

/// Acceptance statistics over a fixed number of proposals.
pub fn measure_acceptance<T: QubitTarget + ?Sized>(
    target: &T,
    spec: &ProposalSpec,
    c: f64,
    n_proposals: usize,
    seed: u64,
) -> Result<RejectionReport> {
    if n_proposals == 0 {
        return Err(Error::InvalidInput("n_proposals must be at least 1".into()));
    }
    let ln_c = check_c(c)?;
    let start = Instant::now();
    let chunks = n_proposals.div_ceil(PROPOSAL_CHUNK);
    let parts: Vec<Result<(u64, u64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = RandomStream::new(seed, k as u64).rng();
            let n = PROPOSAL_CHUNK.min(n_proposals - k * PROPOSAL_CHUNK);
            let before = n as u64;
            let r = run_chunk_count(target, spec, ln_c, &mut rng, n)?;
            Ok((before, r.0, r.1))
        })
        .collect();
    let (mut proposed, mut accepted, mut max_lr) = (0u64, 0u64, f64::NEG_INFINITY);
    for p in parts {
        let (n, a, m) = p?;
        proposed += n;
        accepted += a;
        max_lr = max_lr.max(m);
    }
    Ok(RejectionReport {
        proposed,
        accepted,
        acceptance_rate: accepted as f64 / proposed as f64,
        bound_c: c,
        max_observed_ratio: max_lr.exp(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_chunk_count<T: QubitTarget + ?Sized, R: Rng>(
    target: &T,
    spec: &ProposalSpec,
    ln_c: f64,
    rng: &mut R,
    n: usize,
) -> Result<(u64, f64)> {
    let mut accepted = 0u64;
    let mut max_lr = f64::NEG_INFINITY;
    for _ in 0..n {
        let b = spec.propose_bloch(rng);
        let u: f64 = rng.random();
        let lr = ln_ratio(target, spec, &b)?;
        max_lr = max_lr.max(lr);
        if lr > ln_c + 1e-12 {
            return Err(Error::RatioExceedsBound {
                ratio: lr.exp(),
                bound: ln_c.exp(),
                state: b,
            });
        }
        if u.ln() < lr - ln_c {
            accepted += 1;
        }
    }
    Ok((accepted, max_lr))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    InteriorPeak,
    BoundaryPeak,
    TwoWishartMix,
}

/// Free parameters of [`build_proposal`]. Unset means: μ fitted to the MLE
/// radius (interior), μ matched to the target's peak-to-mean ratio (boundary),
/// N = 2 complex / 3 real for the boundary component, equal mixture weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalKnobs {
    pub columns: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub interior_mu: Option<f64>,
    pub boundary_mu: Option<f64>,
    pub boundary_columns: Option<usize>,
    /// (interior, boundary) shares of the non-uniform mass.
    pub weights: Option<(f64, f64)>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl Default for ProposalKnobs {
    fn default() -> Self {
        Self {
            columns: None,
            alpha: DEFAULT_ALPHA,
            interior_mu: None,
            boundary_mu: None,
            boundary_columns: None,
            weights: None,
        }
    }
}

fn default_boundary_columns(field: FieldKind) -> usize {
    match field {
        FieldKind::Real => 3,
        FieldKind::Complex => 2,
    }
}

fn interior_component(
    field: FieldKind,
    peak: &BlochVector,
    knobs: &ProposalKnobs,
) -> Result<(WishartParams, Rotation3)> {
    let n = knobs
        .columns
        .ok_or_else(|| Error::InvalidInput("interior component needs `columns`".into()))?;
    match knobs.interior_mu {
        Some(mu) => Ok((
            WishartParams::isotropic_all_mu(field, 2, n, mu)?,
            direction_rotation(peak)?,
        )),
        None => build_qubit_proposal(&PeakRequest {
            target: *peak,
            columns: n,
            field,
        }),
    }
}

fn direction_rotation(peak: &BlochVector) -> Result<Rotation3> {
    if peak.norm() < 1e-12 {
        return Ok(Rotation3::identity());
    }
    align_rotation(&BlochVector::new(1.0, 0.0, 0.0), peak)
}

/// Peak-to-mean ratio of exp(`f`) along the diameter t·n, t ∈ [−1, 1].
fn peak_to_mean<F: Fn(f64) -> Result<f64>>(f: F) -> Result<f64> {
    let m = 400;
    let mut top = f64::NEG_INFINITY;
    for i in 0..=m {
        top = top.max(f(-1.0 + 2.0 * i as f64 / m as f64)?);
    }
    let mean = 0.5
        * integrate(
            |t| Ok((f(t)? - top).exp()),
            -1.0,
            1.0,
            Tolerance { abs: 0.0, rel: 1e-9 },
        )?;
    Ok(1.0 / mean)
}

/// μ for which the boundary Wishart's peak-to-mean ratio along its axis
/// equals the target's along the diameter through `dir`.
pub fn match_boundary_mu<T: QubitTarget + ?Sized>(
    target: &T,
    field: FieldKind,
    columns: usize,
    dir: &BlochVector,
) -> Result<f64> {
    let n = if dir.norm() < 1e-12 { BlochVector::new(1.0, 0.0, 0.0) } else { dir.scale(1.0 / dir.norm()) };
    let want = peak_to_mean(|t| Ok(target.ln_pdf(&n.scale(t))))?;
    let ratio = |mu: f64| -> Result<f64> {
        let pd = PreparedDensity::new(&WishartParams::isotropic_all_mu(field, 2, columns, mu)?)?;
        peak_to_mean(|t| pd.ln_kernel_bloch(&BlochVector::new(t, 0.0, 0.0)))
    };
    let (mut lo, mut hi) = (0.0, MU_MAX);
    let (r_lo, r_hi) = (ratio(lo)?, ratio(hi)?);
    if !(r_lo < want && want < r_hi) {
        return Err(Error::NoRoot {
            radius: 1.0,
            columns,
            mu_max: MU_MAX,
            profile: vec![(lo, r_lo - want), (hi, r_hi - want)],
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid)? < want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Proposal for the posterior of (`pom`, `clicks`), peaked at its MLE.
pub fn build_proposal(
    pom: &Pom,
    clicks: &ClickRecord,
    strategy: Strategy,
    knobs: &ProposalKnobs,
) -> Result<ProposalSpec> {
    let field = pom.kind();
    if !(0.0..=1.0).contains(&knobs.alpha) {
        return Err(Error::InvalidInput(format!("alpha = {} outside [0, 1]", knobs.alpha)));
    }
    let peak = mle(pom, clicks)?.bloch;
    let posterior = Posterior::new(pom.clone(), clicks.clone())?;
    let boundary = |rot_hint: Option<Rotation3>| -> Result<(WishartParams, Rotation3)> {
        let nb = knobs.boundary_columns.unwrap_or(default_boundary_columns(field));
        let mu = match knobs.boundary_mu {
            Some(mu) => mu,
            None => match_boundary_mu(&posterior, field, nb, &peak)?,
        };
        let rot = match rot_hint {
            Some(r) => r,
            None => direction_rotation(&peak)?,
        };
        Ok((WishartParams::isotropic_all_mu(field, 2, nb, mu)?, rot))
    };
    let alpha = knobs.alpha;
    let uniform = Component {
        weight: alpha,
        generator: Generator::Uniform,
    };
    let (wishart, rotation): (Vec<Component>, Rotation3) = match strategy {
        Strategy::InteriorPeak => {
            let (p, rot) = interior_component(field, &peak, knobs)?;
            (
                vec![Component {
                    weight: 1.0 - alpha,
                    generator: Generator::Wishart(p),
                }],
                rot,
            )
        }
        Strategy::BoundaryPeak => {
            let (p, rot) = boundary(None)?;
            (
                vec![Component {
                    weight: 1.0 - alpha,
                    generator: Generator::Wishart(p),
                }],
                rot,
            )
        }
        Strategy::TwoWishartMix => {
            let (pi, rot) = interior_component(field, &peak, knobs)?;
            let (pb, _) = boundary(Some(rot))?;
            let (wi, wb) = knobs.weights.unwrap_or((0.5, 0.5));
            if !(wi >= 0.0 && wb >= 0.0 && wi + wb > 0.0) {
                return Err(Error::InvalidInput("mixture weights must be non-negative".into()));
            }
            let s = wi + wb;
            (
                vec![
                    Component {
                        weight: (1.0 - alpha) * wi / s,
                        generator: Generator::Wishart(pi),
                    },
                    Component {
                        weight: (1.0 - alpha) * wb / s,
                        generator: Generator::Wishart(pb),
                    },
                ],
                rot,
            )
        }
    };
    let mut comps = wishart;
    comps.push(uniform);
    // Re-normalize against rounding so weights sum to one exactly enough.
    let s: f64 = comps.iter().map(|c| c.weight).sum();
    for c in &mut comps {
        c.weight /= s;
    }
    ProposalSpec::new(field, comps, rotation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logpdf_is_flat() {
        let spec = ProposalSpec::uniform(FieldKind::Complex).unwrap();
        for b in [BlochVector::ORIGIN, BlochVector::new(0.3, 0.2, -0.7)] {
            let v = spec.logpdf_bloch(&b).unwrap();
            assert!((v + (4.0 * PI / 3.0).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_value_is_uniform_share() {
        let w = WishartParams::central(FieldKind::Complex, 2, 4).unwrap();
        let spec = ProposalSpec::new(
            FieldKind::Complex,
            vec![
                Component { weight: 0.998, generator: Generator::Wishart(w) },
                Component { weight: 0.002, generator: Generator::Uniform },
            ],
            Rotation3::identity(),
        )
        .unwrap();
        let v = spec.logpdf_bloch(&BlochVector::new(0.0, 1.0, 0.0)).unwrap();
        assert!((v - (0.002f64.ln() - (4.0 * PI / 3.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_component_never_drawn() {
        let w = WishartParams::isotropic_all_mu(FieldKind::Complex, 2, 2, 2.0).unwrap();
        let spec = ProposalSpec::new(
            FieldKind::Complex,
            vec![
                Component { weight: 1.0, generator: Generator::Uniform },
                Component { weight: 0.0, generator: Generator::Wishart(w) },
            ],
            Rotation3::identity(),
        )
        .unwrap();
        let mut rng = RandomStream::new(1, 0).rng();
        for _ in 0..1_000_000 {
            assert_eq!(spec.choose(&mut rng), 0);
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let r = ProposalSpec::new(
            FieldKind::Real,
            vec![Component { weight: 0.5, generator: Generator::Uniform }],
            Rotation3::identity(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn self_target_bound_is_safety() {
        let w = WishartParams::isotropic_all_mu(FieldKind::Real, 2, 5, 0.6).unwrap();
        let spec = ProposalSpec::new(
            FieldKind::Real,
            vec![Component { weight: 1.0, generator: Generator::Wishart(w) }],
            Rotation3::identity(),
        )
        .unwrap();
        let target = |b: &BlochVector| spec.logpdf_bloch(b).unwrap();
        let est = estimate_bound(&target, &spec, BoundOptions::default()).unwrap();
        assert!((est.c - DEFAULT_SAFETY).abs() < 1e-9, "c = {}", est.c);
        let rep = measure_acceptance(&target, &spec, est.c, 20_000, 3).unwrap();
        assert!((rep.acceptance_rate - 1.0 / DEFAULT_SAFETY).abs() < 0.02);
    }
}
