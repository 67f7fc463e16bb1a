//! Fundamental-diagram calibration with Drake's exponential model
//! `q(k) = k · v_f · exp(-α k)`.
//!
//! The pipeline is: drop empty cells, keep the upper part of the flow cloud in
//! each density bin ([`percentile_filter`]), least-squares fit
//! ([`fit_drake`]), then optionally rescale the summary to full-size vehicles
//! ([`scale_fit`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One flow-density observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdPoint {
    /// Density (drones/m²).
    pub k: f64,
    /// Flow (drones/(m·s)).
    pub q: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no samples to work with")]
    Empty,
    #[error("need at least {needed} samples with distinct positive density, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid filter setting: {0}")]
    InvalidFilter(String),
    #[error("no convergence after {iterations} iterations (v_f = {v_f}, alpha = {alpha}, SSE = {objective})")]
    NoConvergence { iterations: usize, v_f: f64, alpha: f64, objective: f64 },
    #[error("fitted decay parameter alpha = {alpha} is not positive; Drake's model does not describe these data")]
    NonPositiveAlpha { v_f: f64, alpha: f64 },
    #[error("envelope needs at least two non-empty density bins, found {0}")]
    Envelope(usize),
    #[error("scaling factors must be positive, got size {delta_eta}, speed {delta_v}")]
    InvalidScale { delta_eta: f64, delta_v: f64 },
}

pub type Result<T> = std::result::Result<T, FitError>;

/// `q(k) = k v_f e^{-α k}`.
pub fn drake_eval(k: f64, v_f: f64, alpha: f64) -> f64 {
    k * v_f * (-alpha * k).exp()
}

/// Linear-interpolation percentile (`p` in `[0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        sorted[lo.min(n - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_PERCENTILE: f64 = 75.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Number of equal-width density bins B.
    pub n_bins: usize,
    /// Percentile level p in `[0, 100]`.
    pub percentile: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { n_bins: DEFAULT_BINS, percentile: DEFAULT_PERCENTILE }
    }
}

/// Equal-width bin of `k` over `[lo, lo + width * n]`, clamped to the last bin.
fn bin_of(k: f64, lo: f64, width: f64, n: usize) -> usize {
    if width <= 0.0 {
        return 0;
    }
    (((k - lo) / width).floor().max(0.0) as usize).min(n - 1)
}

/// Keeps, within each density bin, the samples whose flow reaches the bin's
/// `p`-th flow percentile. Input order is preserved.
pub fn percentile_filter(points: &[FdPoint], cfg: &FilterConfig) -> Result<Vec<FdPoint>> {
    if points.is_empty() {
        return Err(FitError::Empty);
    }
    if cfg.n_bins == 0 {
        return Err(FitError::InvalidFilter("at least one bin is required".into()));
    }
    if !(0.0..=100.0).contains(&cfg.percentile) {
        return Err(FitError::InvalidFilter(format!(
            "percentile must lie in [0, 100], got {}",
            cfg.percentile
        )));
    }
    let b = cfg.n_bins;
    let lo = points.iter().map(|p| p.k).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.k).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / b as f64;
    let bins: Vec<usize> = points.iter().map(|p| bin_of(p.k, lo, width, b)).collect();

    let mut flows: Vec<Vec<f64>> = vec![Vec::new(); b];
    for (p, &bin) in points.iter().zip(&bins) {
        flows[bin].push(p.q);
    }
    let thresholds: Vec<Option<f64>> = flows
        .iter_mut()
        .map(|f| {
            if f.is_empty() {
                None
            } else {
                f.sort_by(f64::total_cmp);
                Some(percentile_sorted(f, cfg.percentile))
            }
        })
        .collect();
    Ok(points
        .iter()
        .zip(&bins)
        .filter(|(p, &bin)| thresholds[bin].is_some_and(|thr| p.q >= thr))
        .map(|(p, _)| *p)
        .collect())
}

pub const DEFAULT_ENVELOPE_QUANTILE: f64 = 0.5;
pub const ENVELOPE_BINS: usize = 10;

/// Slope of the free-flow upper envelope.
///
/// Takes samples with `0 < k <=` the `low_density_quantile` of `k`, splits
/// `(0, k_cut]` into [`ENVELOPE_BINS`] bins, and fits a line through the
/// origin to the highest-flow sample of each bin.
pub fn envelope_slope(points: &[FdPoint], low_density_quantile: f64) -> Result<f64> {
    let positive: Vec<FdPoint> = points.iter().copied().filter(|p| p.k > 0.0).collect();
    if positive.is_empty() {
        return Err(FitError::Empty);
    }
    let ks: Vec<f64> = positive.iter().map(|p| p.k).collect();
    let k_cut = percentile(&ks, low_density_quantile.clamp(0.0, 1.0) * 100.0);
    let width = k_cut / ENVELOPE_BINS as f64;
    let mut top: Vec<Option<FdPoint>> = vec![None; ENVELOPE_BINS];
    for p in positive.iter().filter(|p| p.k <= k_cut) {
        let bin = bin_of(p.k, 0.0, width, ENVELOPE_BINS);
        if top[bin].is_none_or(|t| p.q > t.q) {
            top[bin] = Some(*p);
        }
    }
    let tops: Vec<FdPoint> = top.into_iter().flatten().collect();
    if tops.len() < 2 {
        return Err(FitError::Envelope(tops.len()));
    }
    let num: f64 = tops.iter().map(|p| p.k * p.q).sum();
    let den: f64 = tops.iter().map(|p| p.k * p.k).sum();
    Ok(num / den)
}

/// Calibrated Drake parameters and goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdFit {
    /// Free-flow speed (m/s).
    pub v_f: f64,
    /// Decay parameter (m²).
    pub alpha: f64,
    /// Critical density 1/α (drones/m²).
    pub k_c_analytic: f64,
    /// Model maximum v_f/(α e) (drones/(m·s)).
    pub q_max_analytic: f64,
    /// Density of the highest-flow fitted sample.
    pub k_c_empirical: f64,
    /// Highest flow among the fitted samples.
    pub q_max_empirical: f64,
    pub r2: f64,
    /// Root-mean-square flow residual (drones/(m·s)).
    pub rmse: f64,
    pub n_samples_used: usize,
    pub iterations: usize,
    /// Residual sum of squares at the solution.
    pub sse: f64,
}

impl FdFit {
    pub fn eval(&self, k: f64) -> f64 {
        drake_eval(k, self.v_f, self.alpha)
    }

    pub fn summary(&self, basis: SummaryBasis) -> FdSummary {
        match basis {
            SummaryBasis::Empirical => FdSummary {
                v_f: self.v_f,
                k_c: self.k_c_empirical,
                q_max: self.q_max_empirical,
            },
            SummaryBasis::Analytic => FdSummary {
                v_f: self.v_f,
                k_c: self.k_c_analytic,
                q_max: self.q_max_analytic,
            },
        }
    }
}

const MAX_ITERATIONS: usize = 200;
const REL_DECREASE_TOL: f64 = 1e-10;

fn sse(points: &[FdPoint], v: f64, a: f64) -> f64 {
    points.iter().map(|p| (p.q - drake_eval(p.k, v, a)).powi(2)).sum()
}

/// Least-squares fit of Drake's model by Levenberg–Marquardt on `(v_f, α)`.
///
/// Starts from the envelope slope (or the 90th percentile of `q/k`) and
/// `α = 1 / mean(k)`. Samples are sorted internally, so the result does not
/// depend on input order.
pub fn fit_drake(points: &[FdPoint]) -> Result<FdFit> {
    let mut pts: Vec<FdPoint> = points.to_vec();
    pts.sort_by(|a, b| a.k.total_cmp(&b.k).then(a.q.total_cmp(&b.q)));
    let mut distinct: Vec<f64> = pts.iter().filter(|p| p.k > 0.0).map(|p| p.k).collect();
    distinct.dedup();
    if distinct.len() < 3 || pts.iter().any(|p| !(p.k.is_finite() && p.q.is_finite())) {
        return Err(FitError::TooFewSamples { needed: 3, got: distinct.len() });
    }

    let mean_k = pts.iter().map(|p| p.k).sum::<f64>() / pts.len() as f64;
    let v0 = envelope_slope(&pts, DEFAULT_ENVELOPE_QUANTILE)
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .unwrap_or_else(|| {
            let ratios: Vec<f64> = pts.iter().filter(|p| p.k > 0.0).map(|p| p.q / p.k).collect();
            percentile(&ratios, 90.0)
        });
    let (v, a, iterations) = levenberg_marquardt(&pts, v0, 1.0 / mean_k)?;
    if !(a > 0.0) {
        return Err(FitError::NonPositiveAlpha { v_f: v, alpha: a });
    }

    let n = pts.len() as f64;
    let sse = sse(&pts, v, a);
    let mean_q = pts.iter().map(|p| p.q).sum::<f64>() / n;
    let sst: f64 = pts.iter().map(|p| (p.q - mean_q).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else if sse == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    let top = pts
        .iter()
        .copied()
        .max_by(|x, y| x.q.total_cmp(&y.q).then(y.k.total_cmp(&x.k)))
        .expect("non-empty");
    Ok(FdFit {
        v_f: v,
        alpha: a,
        k_c_analytic: 1.0 / a,
        q_max_analytic: drake_eval(1.0 / a, v, a),
        k_c_empirical: top.k,
        q_max_empirical: top.q,
        r2,
        rmse: (sse / n).sqrt(),
        n_samples_used: pts.len(),
        iterations,
        sse,
    })
}

fn levenberg_marquardt(pts: &[FdPoint], v0: f64, a0: f64) -> Result<(f64, f64, usize)> {
    let (mut v, mut a) = (v0, a0);
    let mut f = sse(pts, v, a);
    let scale: f64 = pts.iter().map(|p| p.q * p.q).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lambda = 1e-3;

    for iter in 1..=MAX_ITERATIONS {
        // normal equations of the linearised residuals
        let (mut h11, mut h12, mut h22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in pts {
            let e = (-a * p.k).exp();
            let jv = p.k * e;
            let ja = -p.k * p.k * v * e;
            let r = p.q - v * jv;
            h11 += jv * jv;
            h12 += jv * ja;
            h22 += ja * ja;
            g1 += jv * r;
            g2 += ja * r;
        }
        if f <= 1e-30 * scale || (g1 == 0.0 && g2 == 0.0) {
            return Ok((v, a, iter));
        }
        loop {
            let d11 = h11 * (1.0 + lambda);
            let d22 = h22 * (1.0 + lambda);
            let det = d11 * d22 - h12 * h12;
            let (dv, da) = if det.abs() > f64::MIN_POSITIVE {
                ((d22 * g1 - h12 * g2) / det, (d11 * g2 - h12 * g1) / det)
            } else {
                (0.0, 0.0)
            };
            let (vn, an) = (v + dv, a + da);
            let fn_ = sse(pts, vn, an);
            if fn_.is_finite() && fn_ < f {
                let decrease = f - fn_;
                let step_small = dv.abs() <= 1e-15 * v.abs().max(1e-300)
                    && da.abs() <= 1e-15 * a.abs().max(1e-300);
                v = vn;
                a = an;
                f = fn_;
                lambda = (lambda / 10.0).max(1e-12);
                if decrease <= REL_DECREASE_TOL * (f + decrease) || step_small {
                    return Ok((v, a, iter));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no damped step lowers the objective: stationary to working precision
                return Ok((v, a, iter));
            }
        }
    }
    Err(FitError::NoConvergence { iterations: MAX_ITERATIONS, v_f: v, alpha: a, objective: f })
}

/// Which `(k_c, q_max)` pair a summary uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryBasis {
    /// Read from the fitted sample cloud.
    #[default]
    Empirical,
    /// From the model: `k_c = 1/α`, `q_max = v_f/(α e)`.
    Analytic,
}

/// Size ratio δ_η = η'/η and speed ratio δ_v = v̄'/v̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactors {
    pub delta_eta: f64,
    pub delta_v: f64,
}

impl ScaleFactors {
    pub const IDENTITY: ScaleFactors = ScaleFactors { delta_eta: 1.0, delta_v: 1.0 };

    pub fn new(delta_eta: f64, delta_v: f64) -> Result<Self> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if ok(delta_eta) && ok(delta_v) {
            Ok(Self { delta_eta, delta_v })
        } else {
            Err(FitError::InvalidScale { delta_eta, delta_v })
        }
    }

    /// Factors from vehicle size `size_from → size_to` (m) and cruise speed
    /// `speed_from → speed_to` (m/s).
    pub fn from_reference(size_from: f64, size_to: f64, speed_from: f64, speed_to: f64) -> Result<Self> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if ![size_from, size_to, speed_from, speed_to].into_iter().all(ok) {
            return Err(FitError::InvalidScale {
                delta_eta: size_to / size_from,
                delta_v: speed_to / speed_from,
            });
        }
        Self::new(size_to / size_from, speed_to / speed_from)
    }

    /// Applying `self` then `next`.
    pub fn then(self, next: ScaleFactors) -> ScaleFactors {
        ScaleFactors { delta_eta: self.delta_eta * next.delta_eta, delta_v: self.delta_v * next.delta_v }
    }
}

/// Free-flow speed, critical density and capacity in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSummary {
    /// m/s
    pub v_f: f64,
    /// drones/m²
    pub k_c: f64,
    /// drones/(m·s)
    pub q_max: f64,
}

pub const PER_M2_TO_PER_KM2: f64 = 1e6;
pub const PER_M_S_TO_PER_KM_H: f64 = 3.6e6;

impl FdSummary {
    /// `v_f δ_v`, `k_c / δ_η²`, `q_max δ_v / δ_η²`.
    pub fn scale(&self, f: ScaleFactors) -> FdSummary {
        let area = f.delta_eta * f.delta_eta;
        FdSummary { v_f: self.v_f * f.delta_v, k_c: self.k_c / area, q_max: self.q_max * f.delta_v / area }
    }

    pub fn k_c_per_km2(&self) -> f64 {
        self.k_c * PER_M2_TO_PER_KM2
    }

    pub fn q_max_per_km_h(&self) -> f64 {
        self.q_max * PER_M_S_TO_PER_KM_H
    }
}

/// A scaled summary with the factors and basis that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledFd {
    pub basis: SummaryBasis,
    pub factors: ScaleFactors,
    pub summary: FdSummary,
}

impl ScaledFd {
    pub fn v_f_scaled(&self) -> f64 {
        self.summary.v_f
    }
    pub fn k_c_scaled_per_km2(&self) -> f64 {
        self.summary.k_c_per_km2()
    }
    pub fn q_max_scaled_per_km_h(&self) -> f64 {
        self.summary.q_max_per_km_h()
    }
}

pub fn scale_fit(fit: &FdFit, factors: ScaleFactors, basis: SummaryBasis) -> ScaledFd {
    ScaledFd { basis, factors, summary: fit.summary(basis).scale(factors) }
}

/// The fit document: configuration echo, calibrated values and an optional
/// scaled block. Serialised as TOML key-value text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub bins: usize,
    pub percentile: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mbar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim_end: Option<f64>,
    pub n_samples_input: usize,
    pub n_samples_nonzero: usize,
    pub n_samples_used: usize,
    pub v_f: f64,
    pub alpha: f64,
    pub k_c_analytic: f64,
    pub q_max_analytic: f64,
    pub k_c_empirical: f64,
    pub q_max_empirical: f64,
    pub r2: f64,
    pub rmse: f64,
    pub rmse_unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_basis: Option<SummaryBasis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_f_scaled: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_c_scaled_per_km2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max_scaled_per_km_h: Option<f64>,
}

pub const RMSE_UNIT: &str = "drones/(m*s)";

impl FitDocument {
    pub fn new(fit: &FdFit, filter: &FilterConfig, n_input: usize, n_nonzero: usize) -> Self {
        Self {
            bins: filter.n_bins,
            percentile: filter.percentile,
            mbar: None,
            trim_start: None,
            trim_end: None,
            n_samples_input: n_input,
            n_samples_nonzero: n_nonzero,
            n_samples_used: fit.n_samples_used,
            v_f: fit.v_f,
            alpha: fit.alpha,
            k_c_analytic: fit.k_c_analytic,
            q_max_analytic: fit.q_max_analytic,
            k_c_empirical: fit.k_c_empirical,
            q_max_empirical: fit.q_max_empirical,
            r2: fit.r2,
            rmse: fit.rmse,
            rmse_unit: RMSE_UNIT.to_string(),
            envelope_slope: None,
            manifest: None,
            scale_basis: None,
            delta_eta: None,
            delta_v: None,
            v_f_scaled: None,
            k_c_scaled_per_km2: None,
            q_max_scaled_per_km_h: None,
        }
    }

    pub fn summary(&self, basis: SummaryBasis) -> FdSummary {
        match basis {
            SummaryBasis::Empirical => {
                FdSummary { v_f: self.v_f, k_c: self.k_c_empirical, q_max: self.q_max_empirical }
            }
            SummaryBasis::Analytic => {
                FdSummary { v_f: self.v_f, k_c: self.k_c_analytic, q_max: self.q_max_analytic }
            }
        }
    }

    pub fn with_scaled(mut self, scaled: &ScaledFd) -> Self {
        self.scale_basis = Some(scaled.basis);
        self.delta_eta = Some(scaled.factors.delta_eta);
        self.delta_v = Some(scaled.factors.delta_v);
        self.v_f_scaled = Some(scaled.v_f_scaled());
        self.k_c_scaled_per_km2 = Some(scaled.k_c_scaled_per_km2());
        self.q_max_scaled_per_km_h = Some(scaled.q_max_scaled_per_km_h());
        self
    }
}
