use std::path::{Path, PathBuf};
use std::time::Instant;

use qwishart::blr::{blr_curves, default_lambda_grid};
use qwishart::density::{ln_normalization_constant_qubit, PreparedDensity};
use qwishart::estimation::{mle as find_mle, Posterior};
use qwishart::gaussian::{sample_bloch_batch, sample_states_batch, WishartParams};
use qwishart::io;
use num_complex::Complex64;
use qwishart::peak::{build_qubit_proposal, fit_mean_radial, stationary_params, PeakRequest};
use qwishart::rng::RNG_ALGORITHM;
use qwishart::sampler::{
    build_proposal, estimate_bound, measure_acceptance, rejection_sample, BoundOptions, ProposalKnobs, Strategy,
    DEFAULT_ALPHA,
};
use qwishart::state::{bloch_to_rho, BlochVector, CMatrix, FieldKind};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{load, pom_and_clicks, BenchConfig, BlrConfig, SampleConfig, StationaryConfig};
use crate::CliError;

pub struct Context {
    pub out_dir: PathBuf,
}

impl Context {
    fn resolve(&self, p: &Path) -> Result<PathBuf, CliError> {
        let full = if p.is_absolute() { p.to_path_buf() } else { self.out_dir.join(p) };
        if let Some(parent) = full.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(qwishart::Error::from)?;
            }
        }
        Ok(full)
    }
}

fn print(v: &impl Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v).map_err(qwishart::Error::from)?);
    Ok(())
}

fn matrix_json(m: &CMatrix) -> serde_json::Value {
    let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
    };
    json!({"re": rows(|z| z.re), "im": rows(|z| z.im)})
}

pub fn density(field: FieldKind, columns: usize, mu: f64, b: [f64; 3]) -> Result<(), CliError> {
    if field == FieldKind::Real && b[1] != 0.0 {
        return Err(CliError::Config("real field states need y = 0".into()));
    }
    let p = WishartParams::isotropic_all_mu(field, 2, columns, mu)?;
    let pd = PreparedDensity::new(&p)?;
    let rho = bloch_to_rho(&BlochVector::from_array(b))?;
    print(&json!({
        "field": field.as_str(),
        "N": columns,
        "mu": mu,
        "bloch": b,
        "log_density": pd.ln_density(&rho)?,
        "log_kernel": pd.ln_kernel(&rho)?,
        "xi_squared": pd.xi_squared(&rho).value(),
        "log_bloch_normalizer": ln_normalization_constant_qubit(&p)?,
    }))
}

#[allow(clippy::too_many_arguments)]
pub fn sample_wishart(
    ctx: &Context,
    field: FieldKind,
    columns: usize,
    dim: usize,
    mu: f64,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let p = WishartParams::isotropic_all_mu(field, dim, columns, mu)?;
    let path = ctx.resolve(out)?;
    let csv = path.extension().is_some_and(|e| e == "csv");
    if csv {
        if dim != 2 {
            return Err(CliError::Config("CSV output holds Bloch vectors; use .jsonl for d > 2".into()));
        }
        io::write_bloch_csv(&path, &sample_bloch_batch(&p, n, seed)?)?;
    } else {
        io::write_states_jsonl(&path, &sample_states_batch(&p, n, seed)?)?;
    }
    print(&json!({"samples": n, "path": path, "seed": seed, "rng": RNG_ALGORITHM}))
}

pub fn fit_peak(
    r: Option<f64>,
    theta: Option<f64>,
    phi: Option<f64>,
    columns: Option<usize>,
    field: Option<FieldKind>,
    config: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(path) = config {
        let cfg: StationaryConfig = load(path)?;
        let n = cfg.columns;
        let im = cfg.mean_im.unwrap_or_else(|| vec![vec![0.0; n]; 2]);
        if cfg.mean_re.len() != 2 || im.len() != 2 || cfg.mean_re.iter().chain(&im).any(|row| row.len() != n) {
            return Err(CliError::Config("mean_re / mean_im must be 2 x N".into()));
        }
        let m2 = CMatrix::from_fn(2, n, |i, j| Complex64::new(cfg.mean_re[i][j], im[i][j]));
        let rho = bloch_to_rho(&BlochVector::from_array(cfg.rho))?;
        let sol = stationary_params(&rho, &m2, n, cfg.field)?;
        return print(&json!({
            "sigma": matrix_json(&sol.sigma),
            "mean": matrix_json(&sol.mean),
            "gradient_norm": sol.residual,
            "iterations": sol.iterations,
        }));
    }
    let need = |name: &str| CliError::Config(format!("fit-peak needs --{name} (or --config)"));
    let r = r.ok_or_else(|| need("r"))?;
    let n = columns.ok_or_else(|| need("N"))?;
    let field = field.ok_or_else(|| need("field"))?;
    let mu = fit_mean_radial(r, n, field)?;
    let mut out = json!({"mu": mu, "r": r, "N": n, "field": field.as_str()});
    if theta.is_some() || phi.is_some() {
        let target = BlochVector::from_spherical(r, theta.unwrap_or(0.0), phi.unwrap_or(0.0));
        let (_, rot) = build_qubit_proposal(&PeakRequest { target, columns: n, field })?;
        let axis = BlochVector::new(1.0, 0.0, 0.0).rotate(&rot);
        out["target"] = json!(target);
        out["mean_axis"] = json!(axis);
    }
    print(&out)
}

pub fn mle(pom: &str, clicks: &[u64]) -> Result<(), CliError> {
    if clicks.is_empty() {
        return Err(CliError::Config("--clicks is required".into()));
    }
    let (pom, clicks) = pom_and_clicks(pom, clicks)?;
    let peak = find_mle(&pom, &clicks)?;
    print(&json!({
        "pom": pom.name(),
        "clicks": clicks.counts(),
        "bloch": peak.bloch,
        "spherical": peak.spherical,
        "log_likelihood_at_peak": peak.log_likelihood_at_peak,
        "on_boundary": peak.on_boundary,
    }))
}

#[derive(Serialize)]
struct Stages {
    mle_s: f64,
    build_s: f64,
    bound_s: f64,
    sample_s: f64,
    total_s: f64,
}

/// Peak find, proposal build, bound, sampling. Returns the report JSON.
fn pipeline(ctx: &Context, cfg: &SampleConfig, default_samples: &str) -> Result<serde_json::Value, CliError> {
    if cfg.n_accept == 0 {
        return Err(CliError::Config("n_accept must be at least 1".into()));
    }
    let (pom, clicks) = pom_and_clicks(&cfg.pom, &cfg.clicks)?;
    let t0 = Instant::now();
    let peak = find_mle(&pom, &clicks)?;
    let t1 = Instant::now();
    let knobs = cfg.knobs();
    let spec = build_proposal(&pom, &clicks, cfg.strategy, &knobs)?;
    let target = Posterior::new(pom.clone(), clicks.clone())?;
    let t2 = Instant::now();
    let bound = estimate_bound(&target, &spec, cfg.bound_options())?;
    let t3 = Instant::now();
    let (samples, report) = rejection_sample(&target, &spec, bound.c, cfg.n_accept, cfg.seed)?;
    let t4 = Instant::now();
    let path = ctx.resolve(cfg.samples_out.as_deref().unwrap_or(Path::new(default_samples)))?;
    io::write_bloch_csv(&path, &samples)?;
    let stages = Stages {
        mle_s: (t1 - t0).as_secs_f64(),
        build_s: (t2 - t1).as_secs_f64(),
        bound_s: (t3 - t2).as_secs_f64(),
        sample_s: (t4 - t3).as_secs_f64(),
        total_s: (t4 - t0).as_secs_f64(),
    };
    Ok(json!({
        "pom": pom.name(),
        "clicks": clicks.counts(),
        "strategy": cfg.strategy,
        "knobs": knobs,
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
        "mle": {"bloch": peak.bloch, "spherical": peak.spherical, "on_boundary": peak.on_boundary},
        "bound": bound,
        "report": report,
        "samples_path": path,
        "stages": stages,
        "samples_per_second": samples.len() as f64 / stages.total_s,
    }))
}

pub fn posterior_sample(ctx: &Context, config: &Path) -> Result<(), CliError> {
    let cfg: SampleConfig = load(config)?;
    let report = pipeline(ctx, &cfg, "samples.csv")?;
    let path = ctx.resolve(cfg.report_out.as_deref().unwrap_or(Path::new("report.json")))?;
    io::write_json(&path, &report)?;
    print(&report)
}

pub fn bench_time(ctx: &Context, config: &Path) -> Result<(), CliError> {
    let cfg: SampleConfig = load(config)?;
    let report = pipeline(ctx, &cfg, "bench_samples.csv")?;
    let summary = json!({
        "n_accept": cfg.n_accept,
        "stages": report["stages"],
        "samples_per_second": report["samples_per_second"],
        "acceptance_rate": report["report"]["acceptance_rate"],
        "workers": rayon::current_num_threads(),
        "samples_path": report["samples_path"],
    });
    let path = ctx.resolve(cfg.report_out.as_deref().unwrap_or(Path::new("bench_time.json")))?;
    io::write_json(&path, &summary)?;
    print(&summary)
}

pub fn blr(ctx: &Context, config: &Path) -> Result<(), CliError> {
    let cfg: BlrConfig = load(config)?;
    let (pom, clicks) = pom_and_clicks(&cfg.pom, &cfg.clicks)?;
    let uniform = io::read_bloch_csv(&cfg.uniform)?;
    let posterior = io::read_bloch_csv(&cfg.posterior)?;
    let lambdas = cfg.lambdas.clone().unwrap_or_else(default_lambda_grid);
    let curve = blr_curves(&pom, &clicks, &uniform, &posterior, &lambdas)?;
    let path = ctx.resolve(cfg.out.as_deref().unwrap_or(Path::new("blr_curve.csv")))?;
    io::write_curve_csv(&path, &curve)?;
    print(&json!({
        "path": path,
        "uniform_samples": uniform.len(),
        "posterior_samples": posterior.len(),
        "max_credibility_gap": curve.max_credibility_gap(),
    }))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchRow {
    pub pom: String,
    pub clicks: String,
    pub strategy: String,
    #[serde(rename = "N")]
    pub columns: Option<usize>,
    pub alpha: f64,
    pub interior_mu: Option<f64>,
    pub boundary_mu: Option<f64>,
    pub bound_c: f64,
    pub acceptance_rate: f64,
    pub proposed: u64,
    pub accepted: u64,
}

fn preset(name: &str) -> Result<BenchConfig, CliError> {
    let base = |pom: &str, clicks: &[u64], strategy| BenchConfig {
        pom: pom.into(),
        clicks: clicks.to_vec(),
        strategy,
        columns: vec![],
        alphas: vec![DEFAULT_ALPHA],
        interior_mus: vec![],
        boundary_mus: vec![],
        boundary_columns: None,
        weights: None,
        n_proposals: 100_000,
        seed: 2024,
        out: None,
    };
    let cfg = match name {
        "near-pure-single" => BenchConfig {
            boundary_mus: vec![0.0, 0.5, 1.0, 1.15, 1.5, 2.0],
            ..base("tetrahedron", &[5, 20, 23, 7], Strategy::BoundaryPeak)
        },
        "near-pure-mixture" => BenchConfig {
            columns: vec![3],
            interior_mus: vec![0.5, 1.0, 1.12, 1.5, 2.0],
            boundary_mus: vec![1.2],
            weights: Some((0.39, 0.61)),
            ..base("tetrahedron", &[5, 20, 23, 7], Strategy::TwoWishartMix)
        },
        "boundary-sparse" => BenchConfig {
            boundary_mus: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
            ..base("tetrahedron", &[5, 20, 33, 7], Strategy::BoundaryPeak)
        },
        "boundary-dense" => BenchConfig {
            boundary_mus: vec![0.0, 0.5, 1.0, 1.8, 2.0, 2.5],
            ..base("tetrahedron", &[55, 50, 13, 10], Strategy::BoundaryPeak)
        },
        "crosshair-real" => BenchConfig {
            columns: vec![13, 18, 23, 28],
            alphas: vec![0.002, 0.05, 0.1],
            ..base("crosshair-real", &[10, 10, 10, 10], Strategy::InteriorPeak)
        },
        "crosshair-complex" => BenchConfig {
            columns: vec![8, 11, 14],
            alphas: vec![0.002, 0.05, 0.1],
            ..base("crosshair-complex", &[10, 10, 10, 10, 10, 10], Strategy::InteriorPeak)
        },
        "trine" => BenchConfig {
            columns: vec![4, 6, 8, 10, 12],
            alphas: vec![0.3, 0.33, 0.4],
            ..base("trine", &[7, 10, 13], Strategy::InteriorPeak)
        },
        other => return Err(CliError::Config(format!("unknown preset {other:?}"))),
    };
    Ok(cfg)
}

fn or_none<T: Copy>(v: &[T]) -> Vec<Option<T>> {
    if v.is_empty() {
        vec![None]
    } else {
        v.iter().map(|&x| Some(x)).collect()
    }
}

pub fn bench_acceptance(
    ctx: &Context,
    config: Option<&Path>,
    preset_name: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = match (config, preset_name) {
        (Some(p), _) => load::<BenchConfig>(p)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CliError::Config("bench-acceptance needs --config or --preset".into())),
    };
    if cfg.n_proposals == 0 {
        return Err(CliError::Config("n_proposals must be at least 1".into()));
    }
    let (pom, clicks) = pom_and_clicks(&cfg.pom, &cfg.clicks)?;
    let target = Posterior::new(pom.clone(), clicks.clone())?;
    let alphas = if cfg.alphas.is_empty() { vec![DEFAULT_ALPHA] } else { cfg.alphas.clone() };
    let mut rows = Vec::new();
    for columns in or_none(&cfg.columns) {
        for &alpha in &alphas {
            for interior_mu in or_none(&cfg.interior_mus) {
                for boundary_mu in or_none(&cfg.boundary_mus) {
                    let knobs = ProposalKnobs {
                        columns,
                        alpha,
                        interior_mu,
                        boundary_mu,
                        boundary_columns: cfg.boundary_columns,
                        weights: cfg.weights,
                    };
                    let spec = build_proposal(&pom, &clicks, cfg.strategy, &knobs)?;
                    let bound = estimate_bound(&target, &spec, BoundOptions::default())?;
                    let rep = measure_acceptance(&target, &spec, bound.c, cfg.n_proposals, cfg.seed)?;
                    rows.push(BenchRow {
                        pom: pom.name().to_string(),
                        clicks: clicks.counts().iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
                        strategy: serde_json::to_value(cfg.strategy)
                            .ok()
                            .and_then(|v| v.as_str().map(String::from))
                            .unwrap_or_default(),
                        columns,
                        alpha,
                        interior_mu,
                        boundary_mu,
                        bound_c: bound.c,
                        acceptance_rate: rep.acceptance_rate,
                        proposed: rep.proposed,
                        accepted: rep.accepted,
                    });
                }
            }
        }
    }
    let default_name = format!("acceptance_{}.csv", preset_name.unwrap_or("grid"));
    let target_path = out.map(Path::to_path_buf).or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from(default_name));
    let path = ctx.resolve(&target_path)?;
    io::write_csv(&path, &rows)?;
    let best = rows.iter().map(|r| r.acceptance_rate).fold(0.0, f64::max);
    print(&json!({"path": path, "rows": rows.len(), "best_acceptance_rate": best}))
}
