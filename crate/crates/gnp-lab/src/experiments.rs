//! Monte Carlo harness: phase-law ratio experiments (subcritical giant-order
//! statistics, supercritical giant and runner-up, in-window scaling), moment
//! and tail audits against closed-form predictors, and a small-scale
//! validation sweep.
//!
//! Determinism contract: replica r always draws from `derive_stream(seed, r)`,
//! workers own disjoint replica ranges, and aggregation happens in replica
//! order, so any parallelism degree yields the same report as serial
//! execution, byte for byte.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::{ExplorationSteps, GnpParams};
use crate::report::{ExperimentReport, Series, SeriesCheck};
use crate::rng::derive_stream;
use crate::walks::{simulate_tau, tau_distribution, WalkParams};

/// Default pass bands. The phase-law bands are desk-scale acceptance targets
/// for the asymptotic ratios; all are overridable through
/// [`ExperimentConfig::bands`].
pub mod bands {
    /// Median band for the subcritical l-th largest component ratio.
    pub const SUBCRITICAL_MEDIAN: (f64, f64) = (0.6, 1.5);
    /// Mean band for the supercritical giant ratio |C_1| / (2 n eps).
    pub const SUPERCRITICAL_MEAN: (f64, f64) = (0.85, 1.05);
    /// CV bound for the supercritical giant ratio.
    pub const SUPERCRITICAL_CV_MAX: f64 = 0.1;
    /// Median band for the supercritical runner-up ratio.
    pub const SECOND_COMPONENT_MEDIAN: (f64, f64) = (0.4, 1.8);
    /// In-window non-concentration: CV must exceed this.
    pub const WINDOW_CV_MIN: f64 = 0.3;
    /// In-window spread: 95%/5% quantile ratio must exceed this.
    pub const WINDOW_QUANTILE_RATIO_MIN: f64 = 3.0;
    /// Warn when eps * n^(1/3) falls below this (but above 1).
    pub const REGIME_WARN: f64 = 4.0;
    /// Moment audit: predictor tolerance multiplier (C * eps^2 n, C * eps^2).
    pub const MOMENT_PREDICTOR_C: f64 = 5.0;
    /// Moment audit: upper-bound multiplier for E A_t and E Z_t.
    pub const MOMENT_BOUND_C: f64 = 20.0;
    /// Tail audit: relative tolerance of the fitted rate vs -eps^2/2.
    pub const TAIL_SLOPE_RTOL: f64 = 0.25;
    /// Neutral audit: frequency bound for t >= NEUTRAL_T_MIN.
    pub const NEUTRAL_FREQ_BOUND: f64 = 0.01;
    pub const NEUTRAL_T_MIN: u64 = 50;
}

/// Experiment kinds, one per quantitative claim family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Subcritical,
    Supercritical,
    Window,
    MomentAudit,
    TailAudit,
    NeutralAudit,
}

impl ExperimentKind {
    pub fn default_replicas(&self) -> u64 {
        match self {
            ExperimentKind::Subcritical => 50,
            ExperimentKind::Supercritical => 100,
            ExperimentKind::Window => 500,
            ExperimentKind::MomentAudit => 20_000,
            ExperimentKind::TailAudit => 1_000_000,
            ExperimentKind::NeutralAudit => 10_000,
        }
    }

    pub fn default_ell(&self) -> u64 {
        match self {
            ExperimentKind::Supercritical => 2,
            _ => 1,
        }
    }
}

/// Optional overrides of the default pass bands.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Bands {
    /// Lower/upper band on the primary statistic (median or mean by kind).
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// CV bound (maximum for supercritical, minimum for window).
    pub cv: Option<f64>,
    /// Quantile-ratio bound (window).
    pub quantile_ratio: Option<f64>,
    /// Band on the secondary series (supercritical rank-l ratio).
    pub secondary_lo: Option<f64>,
    pub secondary_hi: Option<f64>,
}

/// Fully resolved experiment configuration.
///
/// `parallelism` is a runtime knob, not part of the experiment identity:
/// it is accepted from config files but never serialized into reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Component rank for the subcritical / supercritical ratios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u64>,
    /// Walk trials per step (tail audit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// Step / threshold grid (audits); filled with kind defaults if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<u64>>,
    /// Censoring cap for simulated hitting times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(default)]
    pub replicas: Option<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<Bands>,
    #[serde(default = "default_parallelism", skip_serializing)]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, n: u64) -> Self {
        Self {
            kind,
            n,
            epsilon: None,
            lambda: None,
            p: None,
            ell: None,
            m: None,
            grid: None,
            cap: None,
            replicas: None,
            master_seed: 0,
            bands: None,
            parallelism: 1,
        }
    }

    pub fn replicas(&self) -> u64 {
        self.replicas.unwrap_or_else(|| self.kind.default_replicas())
    }

    pub fn ell(&self) -> u64 {
        self.ell.unwrap_or_else(|| self.kind.default_ell())
    }

    fn band(&self, pick: impl Fn(&Bands) -> Option<f64>, default: f64) -> f64 {
        self.bands.as_ref().and_then(pick).unwrap_or(default)
    }

    /// Validate invariants, fill kind defaults, and collect regime warnings.
    pub fn resolve(&self) -> Result<(ResolvedExperiment, Vec<String>)> {
        let mut warnings = Vec::new();
        if self.n < 1 {
            return Err(Error::InvalidVertexCount(self.n));
        }
        if self.replicas() < 1 {
            return Err(Error::ConfigField {
                field: "replicas".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.p.is_some() && self.epsilon.is_some() {
            return Err(Error::ConfigField {
                field: "p, epsilon".into(),
                message: "mutually exclusive; give exactly one".into(),
            });
        }
        let kind = self.kind;
        let nf = self.n as f64;
        let resolved = match kind {
            ExperimentKind::Subcritical | ExperimentKind::Supercritical => {
                let eps = self.epsilon.ok_or_else(|| Error::ConfigField {
                    field: "epsilon".into(),
                    message: "required for this experiment kind".into(),
                })?;
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::InvalidEpsilon(eps));
                }
                let scale = eps * nf.cbrt();
                if scale <= 1.0 {
                    return Err(Error::ConfigField {
                        field: "epsilon".into(),
                        message: format!("eps * n^(1/3) = {scale:.3} must exceed 1"),
                    });
                }
                if scale < bands::REGIME_WARN {
                    warnings.push(format!(
                        "eps * n^(1/3) = {scale:.3} < {}: outside the asymptotic regime, \
                         ratios may sit far from 1",
                        bands::REGIME_WARN
                    ));
                }
                if self.ell() < 1 {
                    return Err(Error::ConfigField {
                        field: "ell".into(),
                        message: "component rank must be >= 1".into(),
                    });
                }
                let signed = if kind == ExperimentKind::Subcritical {
                    -eps
                } else {
                    eps
                };
                ResolvedExperiment::Phase {
                    params: GnpParams::from_signed_epsilon(self.n, signed)?,
                    eps,
                    ell: self.ell(),
                }
            }
            ExperimentKind::Window => {
                let lambda = self.lambda.ok_or_else(|| Error::ConfigField {
                    field: "lambda".into(),
                    message: "required for the window kind".into(),
                })?;
                let signed = lambda / nf.cbrt();
                if 1.0 + signed < 0.0 {
                    return Err(Error::ConfigField {
                        field: "lambda".into(),
                        message: "gives a negative edge probability".into(),
                    });
                }
                ResolvedExperiment::Window {
                    params: GnpParams::from_signed_epsilon(self.n, signed)?,
                    lambda,
                }
            }
            ExperimentKind::MomentAudit => {
                let params = self.graph_params()?;
                let eps = params.epsilon();
                if eps <= 0.0 {
                    return Err(Error::ConfigField {
                        field: "epsilon".into(),
                        message: "moment audit needs p = (1 + eps)/n with eps > 0".into(),
                    });
                }
                let hi = (3.0 * eps * nf).floor() as u64;
                let grid = match &self.grid {
                    Some(g) => g.clone(),
                    None => {
                        let en = (eps * nf).round() as u64;
                        vec![1, en / 2, en, 2 * en]
                    }
                };
                for &t in &grid {
                    if t < 1 || t > hi {
                        return Err(Error::GridOutOfRange { t, lo: 1, hi });
                    }
                }
                ResolvedExperiment::Moment { params, grid }
            }
            ExperimentKind::TailAudit => {
                let eps = self.epsilon.ok_or_else(|| Error::ConfigField {
                    field: "epsilon".into(),
                    message: "required for the tail audit".into(),
                })?;
                let m = self.m.ok_or_else(|| Error::ConfigField {
                    field: "m".into(),
                    message: "required for the tail audit".into(),
                })?;
                let params = WalkParams::new(m, eps)?;
                let inv2 = eps.powi(-2);
                let grid = match &self.grid {
                    Some(g) => g.clone(),
                    None => {
                        // default fit window [2 eps^-2, 10 eps^-2], 17 points
                        let lo = 2.0 * inv2;
                        let hi = 10.0 * inv2;
                        (0..17)
                            .map(|i| (lo + (hi - lo) * i as f64 / 16.0).round() as u64)
                            .collect()
                    }
                };
                let (lo, hi) = (inv2.floor() as u64, (20.0 * inv2).ceil() as u64);
                for &t in &grid {
                    if t < lo.max(1) || t > hi {
                        return Err(Error::GridOutOfRange { t, lo: lo.max(1), hi });
                    }
                }
                let cap = self.cap.unwrap_or_else(|| 10 * params.default_t_max());
                ResolvedExperiment::Tail { params, grid, cap }
            }
            ExperimentKind::NeutralAudit => {
                let params = match (self.p, self.epsilon) {
                    (Some(p), None) => GnpParams::new(self.n, p)?,
                    (None, Some(e)) => GnpParams::from_signed_epsilon(self.n, e)?,
                    (None, None) => GnpParams::new(self.n, 2.0 / nf)?,
                    (Some(_), Some(_)) => unreachable!("exclusivity checked above"),
                };
                if params.p() > 2.0 / nf + 1e-15 {
                    return Err(Error::ConfigField {
                        field: "p".into(),
                        message: format!("neutral audit needs p <= 2/n, got {}", params.p()),
                    });
                }
                let grid = self
                    .grid
                    .clone()
                    .unwrap_or_else(|| vec![1, 50, 100, 200]);
                for &t in &grid {
                    if t < 1 || t > self.n {
                        return Err(Error::GridOutOfRange {
                            t,
                            lo: 1,
                            hi: self.n,
                        });
                    }
                }
                ResolvedExperiment::Neutral { params, grid }
            }
        };
        Ok((resolved, warnings))
    }

    fn graph_params(&self) -> Result<GnpParams> {
        match (self.p, self.epsilon) {
            (Some(p), None) => GnpParams::new(self.n, p),
            (None, Some(e)) => GnpParams::from_signed_epsilon(self.n, e),
            (None, None) => Err(Error::ConfigField {
                field: "p".into(),
                message: "either p or epsilon is required".into(),
            }),
            (Some(_), Some(_)) => Err(Error::ConfigField {
                field: "p, epsilon".into(),
                message: "mutually exclusive; give exactly one".into(),
            }),
        }
    }

    /// Echo of this config with kind defaults materialized, so that the
    /// report alone is enough to re-run the experiment exactly.
    fn echoed(&self, grid: Option<Vec<u64>>, cap: Option<u64>) -> ExperimentConfig {
        let mut c = self.clone();
        c.replicas = Some(self.replicas());
        if matches!(
            self.kind,
            ExperimentKind::Subcritical | ExperimentKind::Supercritical
        ) {
            c.ell = Some(self.ell());
        }
        if grid.is_some() {
            c.grid = grid;
        }
        if cap.is_some() {
            c.cap = cap;
        }
        c
    }
}

/// Validated, kind-specific run parameters.
pub enum ResolvedExperiment {
    Phase {
        params: GnpParams,
        eps: f64,
        ell: u64,
    },
    Window {
        params: GnpParams,
        lambda: f64,
    },
    Moment {
        params: GnpParams,
        grid: Vec<u64>,
    },
    Tail {
        params: WalkParams,
        grid: Vec<u64>,
        cap: u64,
    },
    Neutral {
        params: GnpParams,
        grid: Vec<u64>,
    },
}

/// Run replicas 0..replicas on up to `threads` workers; the returned vector
/// is ordered by replica index regardless of the worker count.
pub fn run_replicas<T, F>(replicas: u64, threads: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let threads = threads.max(1);
    if threads == 1 || replicas <= 1 {
        return (0..replicas).map(job).collect();
    }
    let chunk = usize::max(1, (replicas as usize).div_ceil(threads));
    let mut slots: Vec<Option<T>> = (0..replicas).map(|_| None).collect();
    let job = &job;
    std::thread::scope(|scope| {
        for (ci, slice) in slots.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                let base = (ci * chunk) as u64;
                for (j, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(job(base + j as u64));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled slot")).collect()
}

/// Fold replicas into per-worker accumulators, merged in chunk order.
/// With integer accumulators the result is bit-identical at any thread count.
pub fn fold_replicas<A, FI, FS, FM>(
    replicas: u64,
    threads: usize,
    init: FI,
    step: FS,
    mut merge: FM,
) -> A
where
    A: Send,
    FI: Fn() -> A + Sync,
    FS: Fn(&mut A, u64) + Sync,
    FM: FnMut(&mut A, A),
{
    let threads = threads.max(1);
    if threads == 1 || replicas <= 1 {
        let mut acc = init();
        for r in 0..replicas {
            step(&mut acc, r);
        }
        return acc;
    }
    let chunk = u64::max(1, replicas.div_ceil(threads as u64));
    let starts: Vec<u64> = (0..replicas).step_by(chunk as usize).collect();
    let init = &init;
    let step = &step;
    let partials: Vec<A> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .iter()
            .map(|&start| {
                scope.spawn(move || {
                    let mut acc = init();
                    for r in start..(start + chunk).min(replicas) {
                        step(&mut acc, r);
                    }
                    acc
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).collect()
    });
    let mut it = partials.into_iter();
    let mut acc = it.next().expect("at least one chunk");
    for part in it {
        merge(&mut acc, part);
    }
    acc
}

/// Largest `how_many` component sizes of one implicit exploration run,
/// extracted from the record-gap stream with a bounded min-heap.
pub fn top_component_sizes(
    params: &GnpParams,
    stream: &mut crate::rng::RngStream,
    how_many: usize,
) -> Vec<u64> {
    let mut heap: BinaryHeap<Reverse<u64>> = BinaryHeap::with_capacity(how_many + 1);
    let mut last_record = 0u64;
    for state in ExplorationSteps::new(params, stream) {
        if state.active == 0 {
            let gap = state.t - last_record;
            last_record = state.t;
            heap.push(Reverse(gap));
            if heap.len() > how_many {
                heap.pop();
            }
        }
    }
    let mut sizes: Vec<u64> = heap.into_iter().map(|Reverse(s)| s).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Subcritical experiment: per replica, the l-th largest component size over
/// 2 eps^-2 log(n eps^3).
pub fn run_subcritical(config: &ExperimentConfig) -> Result<ExperimentReport<ExperimentConfig>> {
    if config.kind != ExperimentKind::Subcritical {
        return Err(Error::ConfigField {
            field: "kind".into(),
            message: "run_subcritical needs kind = subcritical".into(),
        });
    }
    let (resolved, warnings) = config.resolve()?;
    let ResolvedExperiment::Phase { params, eps, ell } = resolved else {
        unreachable!()
    };
    let norm = 2.0 * eps.powi(-2) * (config.n as f64 * eps.powi(3)).ln();
    let ratios = run_replicas(config.replicas(), config.parallelism, |r| {
        let mut stream = derive_stream(config.master_seed, r);
        let top = top_component_sizes(&params, &mut stream, ell as usize);
        top.get(ell as usize - 1).copied().unwrap_or(0) as f64 / norm
    });
    let checks = vec![SeriesCheck::MedianIn {
        lo: config.band(|b| b.lo, bands::SUBCRITICAL_MEDIAN.0),
        hi: config.band(|b| b.hi, bands::SUBCRITICAL_MEDIAN.1),
    }];
    let series = Series::new(&format!("c{ell}_ratio"), ratios, Some(1.0), checks);
    Ok(ExperimentReport::new(
        config.echoed(None, None),
        warnings,
        vec![series],
    ))
}

/// Supercritical experiment: per replica, |C_1| / (2 n eps) and (for l > 1)
/// |C_l| / (2 eps^-2 log(n eps^3)).
pub fn run_supercritical(config: &ExperimentConfig) -> Result<ExperimentReport<ExperimentConfig>> {
    if config.kind != ExperimentKind::Supercritical {
        return Err(Error::ConfigField {
            field: "kind".into(),
            message: "run_supercritical needs kind = supercritical".into(),
        });
    }
    let (resolved, warnings) = config.resolve()?;
    let ResolvedExperiment::Phase { params, eps, ell } = resolved else {
        unreachable!()
    };
    let nf = config.n as f64;
    let giant_norm = 2.0 * nf * eps;
    let small_norm = 2.0 * eps.powi(-2) * (nf * eps.powi(3)).ln();
    let keep = ell.max(1) as usize;
    let pairs = run_replicas(config.replicas(), config.parallelism, |r| {
        let mut stream = derive_stream(config.master_seed, r);
        let top = top_component_sizes(&params, &mut stream, keep);
        let c1 = top.first().copied().unwrap_or(0) as f64 / giant_norm;
        let cl = top.get(keep - 1).copied().unwrap_or(0) as f64 / small_norm;
        (c1, cl)
    });
    let giant_checks = vec![
        SeriesCheck::MeanIn {
            lo: config.band(|b| b.lo, bands::SUPERCRITICAL_MEAN.0),
            hi: config.band(|b| b.hi, bands::SUPERCRITICAL_MEAN.1),
        },
        SeriesCheck::CvBelow {
            hi: config.band(|b| b.cv, bands::SUPERCRITICAL_CV_MAX),
        },
    ];
    let mut series = vec![Series::new(
        "c1_ratio",
        pairs.iter().map(|&(a, _)| a).collect(),
        Some(1.0),
        giant_checks,
    )];
    if ell > 1 {
        let small_checks = vec![SeriesCheck::MedianIn {
            lo: config.band(|b| b.secondary_lo, bands::SECOND_COMPONENT_MEDIAN.0),
            hi: config.band(|b| b.secondary_hi, bands::SECOND_COMPONENT_MEDIAN.1),
        }];
        series.push(Series::new(
            &format!("c{ell}_ratio"),
            pairs.iter().map(|&(_, b)| b).collect(),
            Some(1.0),
            small_checks,
        ));
    }
    Ok(ExperimentReport::new(
        config.echoed(None, None),
        warnings,
        series,
    ))
}

/// Window experiment at p = (1 + lambda n^(-1/3)) / n: per replica,
/// n^(-2/3) |C_1|; the checks assert spread, not concentration.
pub fn run_window(config: &ExperimentConfig) -> Result<ExperimentReport<ExperimentConfig>> {
    if config.kind != ExperimentKind::Window {
        return Err(Error::ConfigField {
            field: "kind".into(),
            message: "run_window needs kind = window".into(),
        });
    }
    let (resolved, warnings) = config.resolve()?;
    let ResolvedExperiment::Window { params, .. } = resolved else {
        unreachable!()
    };
    let scale = (config.n as f64).powf(2.0 / 3.0);
    let values = run_replicas(config.replicas(), config.parallelism, |r| {
        let mut stream = derive_stream(config.master_seed, r);
        let top = top_component_sizes(&params, &mut stream, 1);
        top[0] as f64 / scale
    });
    let checks = vec![
        SeriesCheck::CvAbove {
            lo: config.band(|b| b.cv, bands::WINDOW_CV_MIN),
        },
        SeriesCheck::QuantileRatioAbove {
            lo: config.band(|b| b.quantile_ratio, bands::WINDOW_QUANTILE_RATIO_MIN),
        },
    ];
    let series = Series::new("c1_scaled", values, None, checks);
    Ok(ExperimentReport::new(
        config.echoed(None, None),
        warnings,
        vec![series],
    ))
}

/// One grid row of the moment audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: u64,
    pub mean_neutral: f64,
    pub se_neutral: f64,
    /// n (1-p)^t.
    pub predictor_neutral: f64,
    pub tol_neutral: f64,
    pub pass_neutral: bool,
    pub mean_xi: f64,
    pub se_xi: f64,
    /// eps - t/n.
    pub predictor_xi: f64,
    pub tol_xi: f64,
    pub pass_xi: bool,
    /// Exact E xi_1 = p(n-1) - 1, present only at t = 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_first_step_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass_xi_first_step: Option<bool>,
    pub mean_active: f64,
    /// C (eps t + sqrt t).
    pub bound_active: f64,
    pub pass_active: bool,
    pub mean_finished: f64,
    pub bound_finished: f64,
    pub pass_finished: bool,
}

/// Moment audit report; grid-shaped rather than per-replica.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentAuditReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub warnings: Vec<String>,
    pub epsilon: f64,
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

#[derive(Clone, Default)]
struct MomentAcc {
    // integer accumulators keep aggregation exact and order-independent
    sum_neutral: Vec<u128>,
    sum_neutral_sq: Vec<u128>,
    sum_active: Vec<u128>,
    sum_finished: Vec<u128>,
    sum_xi: Vec<i128>,
    sum_xi_sq: Vec<u128>,
}

impl MomentAcc {
    fn new(len: usize) -> Self {
        Self {
            sum_neutral: vec![0; len],
            sum_neutral_sq: vec![0; len],
            sum_active: vec![0; len],
            sum_finished: vec![0; len],
            sum_xi: vec![0; len],
            sum_xi_sq: vec![0; len],
        }
    }

    fn merge(&mut self, other: MomentAcc) {
        for i in 0..self.sum_neutral.len() {
            self.sum_neutral[i] += other.sum_neutral[i];
            self.sum_neutral_sq[i] += other.sum_neutral_sq[i];
            self.sum_active[i] += other.sum_active[i];
            self.sum_finished[i] += other.sum_finished[i];
            self.sum_xi[i] += other.sum_xi[i];
            self.sum_xi_sq[i] += other.sum_xi_sq[i];
        }
    }
}

/// Monte Carlo audit of E N_t, E xi_t, E A_t, E Z_t against their predictors
/// over a step grid in [1, 3 eps n].
pub fn moment_audit(config: &ExperimentConfig) -> Result<MomentAuditReport> {
    if config.kind != ExperimentKind::MomentAudit {
        return Err(Error::ConfigField {
            field: "kind".into(),
            message: "moment_audit needs kind = moment_audit".into(),
        });
    }
    let (resolved, warnings) = config.resolve()?;
    let ResolvedExperiment::Moment { params, grid } = resolved else {
        unreachable!()
    };
    let eps = params.epsilon();
    let n = params.n();
    let nf = n as f64;
    let p = params.p();
    let t_stop = *grid.iter().max().expect("grid nonempty");
    let replicas = config.replicas();

    // visit grid hits through a sorted cursor so the hot loop stays branch-light
    let mut visit_order: Vec<usize> = (0..grid.len()).collect();
    visit_order.sort_by_key(|&i| grid[i]);
    let visit_order = &visit_order;

    let acc = fold_replicas(
        replicas,
        config.parallelism,
        || MomentAcc::new(grid.len()),
        |acc, r| {
            let mut stream = derive_stream(config.master_seed, r);
            let mut prev_walk = 1i64;
            let mut next = 0usize;
            for state in ExplorationSteps::new(&params, &mut stream) {
                while next < visit_order.len() && grid[visit_order[next]] == state.t {
                    let i = visit_order[next];
                    let xi = state.walk - prev_walk;
                    acc.sum_neutral[i] += state.neutral as u128;
                    acc.sum_neutral_sq[i] += (state.neutral as u128) * (state.neutral as u128);
                    acc.sum_active[i] += state.active as u128;
                    acc.sum_finished[i] += state.finished_components as u128;
                    acc.sum_xi[i] += xi as i128;
                    acc.sum_xi_sq[i] += (xi * xi) as u128;
                    next += 1;
                }
                prev_walk = state.walk;
                if state.t == t_stop {
                    break;
                }
            }
        },
        |acc, part| acc.merge(part),
    );

    let rf = replicas as f64;
    let rows: Vec<MomentRow> = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mean_neutral = acc.sum_neutral[i] as f64 / rf;
            let var_neutral = (acc.sum_neutral_sq[i] as f64 / rf - mean_neutral * mean_neutral)
                .max(0.0);
            let se_neutral = (var_neutral / rf).sqrt();
            let predictor_neutral = nf * (1.0 - p).powi(t as i32);
            let tol_neutral = bands::MOMENT_PREDICTOR_C * eps * eps * nf;
            let mean_xi = acc.sum_xi[i] as f64 / rf;
            let var_xi = (acc.sum_xi_sq[i] as f64 / rf - mean_xi * mean_xi).max(0.0);
            let se_xi = (var_xi / rf).sqrt();
            let predictor_xi = eps - t as f64 / nf;
            let tol_xi = bands::MOMENT_PREDICTOR_C * eps * eps;
            let mean_active = acc.sum_active[i] as f64 / rf;
            let mean_finished = acc.sum_finished[i] as f64 / rf;
            let bound = bands::MOMENT_BOUND_C * (eps * t as f64 + (t as f64).sqrt());
            let (xi_first, pass_first) = if t == 1 {
                let exact = p * (nf - 1.0) - 1.0;
                let pass = (mean_xi - exact).abs() <= 4.0 * se_xi;
                (Some(exact), Some(pass))
            } else {
                (None, None)
            };
            MomentRow {
                t,
                mean_neutral,
                se_neutral,
                predictor_neutral,
                tol_neutral,
                pass_neutral: (mean_neutral - predictor_neutral).abs() <= tol_neutral,
                mean_xi,
                se_xi,
                predictor_xi,
                tol_xi,
                pass_xi: (mean_xi - predictor_xi).abs() <= tol_xi,
                xi_first_step_exact: xi_first,
                pass_xi_first_step: pass_first,
                mean_active,
                bound_active: bound,
                pass_active: mean_active <= bound,
                mean_finished,
                bound_finished: bound,
                pass_finished: mean_finished <= bound,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| {
        r.pass_neutral
            && r.pass_xi
            && r.pass_active
            && r.pass_finished
            && r.pass_xi_first_step.unwrap_or(true)
    });
    Ok(MomentAuditReport {
        config: config.echoed(Some(grid), None),
        version: env!("CARGO_PKG_VERSION").to_string(),
        warnings,
        epsilon: eps,
        rows,
        pass,
    })
}

/// One threshold row of the tail audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: u64,
    pub count: u64,
    pub empirical: f64,
    pub se: f64,
    pub exact: f64,
    pub within_3se: bool,
}

/// Tail audit report: empirical ln P(tau >= T) decay rate against -eps^2/2,
/// with the exact tail overlaid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailAuditReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub warnings: Vec<String>,
    pub points: Vec<TailPoint>,
    pub censored: u64,
    /// Fitted decay rates with the known T^(-3/2) prefactor in the model,
    /// i.e. the slope b of ln tail(T) = a - (3/2) ln T + b T.
    pub mc_rate_slope: Option<f64>,
    pub exact_rate_slope: f64,
    /// Plain slopes of ln tail(T) vs T, for reference; these fold the
    /// polynomial prefactor into the exponent.
    pub mc_raw_slope: Option<f64>,
    pub exact_raw_slope: f64,
    /// -eps^2 / 2.
    pub target_rate: f64,
    pub pass_exact_rate: bool,
    pub pass_mc_rate: bool,
    pub pass_overlay: bool,
    pub pass: bool,
}

/// Rate fit: slope of ln tail + (3/2) ln T against T (prefactor removed).
fn rate_slope(ts: &[f64], tails: &[f64]) -> f64 {
    let y: Vec<f64> = tails
        .iter()
        .zip(ts)
        .map(|(&p, &t)| p.ln() + 1.5 * t.ln())
        .collect();
    crate::stats::least_squares_slope(ts, &y)
}

fn raw_slope(ts: &[f64], tails: &[f64]) -> f64 {
    let y: Vec<f64> = tails.iter().map(|&p| p.ln()).collect();
    crate::stats::least_squares_slope(ts, &y)
}

/// Monte Carlo tail audit of the hitting time against the exact table and
/// the -eps^2/2 decay rate.
pub fn tail_audit(config: &ExperimentConfig) -> Result<TailAuditReport> {
    if config.kind != ExperimentKind::TailAudit {
        return Err(Error::ConfigField {
            field: "kind".into(),
            message: "tail_audit needs kind = tail_audit".into(),
        });
    }
    let (resolved, mut warnings) = config.resolve()?;
    let ResolvedExperiment::Tail { params, grid, cap } = resolved else {
        unreachable!()
    };
    let replicas = config.replicas();

    #[derive(Clone)]
    struct TailAcc {
        counts: Vec<u64>,
        censored: u64,
    }
    let acc = fold_replicas(
        replicas,
        config.parallelism,
        || TailAcc {
            counts: vec![0; grid.len()],
            censored: 0,
        },
        |acc, r| {
            let mut stream = derive_stream(config.master_seed, r);
            let tau = simulate_tau(&params, &mut stream, cap);
            match tau.hit() {
                Some(t) => {
                    for (i, &g) in grid.iter().enumerate() {
                        if t >= g {
                            acc.counts[i] += 1;
                        }
                    }
                }
                None => {
                    // censored means tau > cap >= every grid threshold
                    for c in acc.counts.iter_mut() {
                        *c += 1;
                    }
                    acc.censored += 1;
                }
            }
        },
        |acc, part| {
            for (a, b) in acc.counts.iter_mut().zip(part.counts) {
                *a += b;
            }
            acc.censored += part.censored;
        },
    );

    let t_max = *grid.iter().max().expect("grid nonempty");
    let exact = tau_distribution(&params, t_max);
    let rf = replicas as f64;
    let points: Vec<TailPoint> = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let count = acc.counts[i];
            let empirical = count as f64 / rf;
            let se = (empirical * (1.0 - empirical) / rf).sqrt();
            let ex = exact.tail_at(t);
            TailPoint {
                t,
                count,
                empirical,
                se,
                exact: ex,
                within_3se: (empirical - ex).abs() <= 3.0 * se.max(1.0 / rf),
            }
        })
        .collect();

    let eps = params.epsilon();
    let target_rate = -eps * eps / 2.0;
    let ts: Vec<f64> = grid.iter().map(|&t| t as f64).collect();
    let exact_tails: Vec<f64> = points.iter().map(|p| p.exact).collect();
    let exact_rate_slope = rate_slope(&ts, &exact_tails);
    let exact_raw_slope = raw_slope(&ts, &exact_tails);

    // drop empty cells from the Monte Carlo fit; report, not fatal
    let kept: Vec<usize> = (0..points.len()).filter(|&i| points[i].count > 0).collect();
    if kept.len() < points.len() {
        warnings.push(format!(
            "insufficient uncensored mass at {} of {} grid thresholds; \
             dropped from the Monte Carlo fit",
            points.len() - kept.len(),
            points.len()
        ));
    }
    let (mc_rate_slope, mc_raw_slope) = if kept.len() >= 2 {
        let kt: Vec<f64> = kept.iter().map(|&i| ts[i]).collect();
        let kp: Vec<f64> = kept.iter().map(|&i| points[i].empirical).collect();
        (Some(rate_slope(&kt, &kp)), Some(raw_slope(&kt, &kp)))
    } else {
        (None, None)
    };

    let rtol = bands::TAIL_SLOPE_RTOL;
    let pass_exact_rate = (exact_rate_slope - target_rate).abs() <= rtol * target_rate.abs();
    let pass_mc_rate = mc_rate_slope
        .map(|s| (s - target_rate).abs() <= rtol * target_rate.abs())
        .unwrap_or(false);
    let pass_overlay = points.iter().all(|p| p.within_3se);
    let pass = pass_exact_rate && pass_mc_rate && pass_overlay;
    Ok(TailAuditReport {
        config: config.echoed(Some(grid), Some(cap)),
        version: env!("CARGO_PKG_VERSION").to_string(),
        warnings,
        points,
        censored: acc.censored,
        mc_rate_slope,
        exact_rate_slope,
        mc_raw_slope,
        exact_raw_slope,
        target_rate,
        pass_exact_rate,
        pass_mc_rate,
        pass_overlay,
        pass,
    })
}

/// One grid row of the neutral audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeutralPoint {
    pub t: u64,
    pub count: u64,
    pub frequency: f64,
    pub pass: bool,
}

/// Neutral audit report: frequency of { N_t <= n - 5t } per grid step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeutralAuditReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub warnings: Vec<String>,
    pub points: Vec<NeutralPoint>,
    /// ln frequency decreases along the grid over the nonzero entries.
    pub pass_monotone: bool,
    pub pass: bool,
}

/// Frequencies of the rare event { N_t <= n - 5t } under p <= 2/n.
pub fn neutral_audit(config: &ExperimentConfig) -> Result<NeutralAuditReport> {
    if config.kind != ExperimentKind::NeutralAudit {
        return Err(Error::ConfigField {
            field: "kind".into(),
            message: "neutral_audit needs kind = neutral_audit".into(),
        });
    }
    let (resolved, warnings) = config.resolve()?;
    let ResolvedExperiment::Neutral { params, grid } = resolved else {
        unreachable!()
    };
    let n = params.n();
    let t_stop = *grid.iter().max().expect("grid nonempty");
    let replicas = config.replicas();

    let mut visit_order: Vec<usize> = (0..grid.len()).collect();
    visit_order.sort_by_key(|&i| grid[i]);
    let visit_order = &visit_order;

    let counts = fold_replicas(
        replicas,
        config.parallelism,
        || vec![0u64; grid.len()],
        |acc, r| {
            let mut stream = derive_stream(config.master_seed, r);
            let mut next = 0usize;
            for state in ExplorationSteps::new(&params, &mut stream) {
                while next < visit_order.len() && grid[visit_order[next]] == state.t {
                    let i = visit_order[next];
                    // N_t <= n - 5t, computed in signed arithmetic
                    if (state.neutral as i128) <= n as i128 - 5 * state.t as i128 {
                        acc[i] += 1;
                    }
                    next += 1;
                }
                if state.t == t_stop {
                    break;
                }
            }
        },
        |acc, part| {
            for (a, b) in acc.iter_mut().zip(part) {
                *a += b;
            }
        },
    );

    let rf = replicas as f64;
    let points: Vec<NeutralPoint> = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let frequency = counts[i] as f64 / rf;
            let pass = t < bands::NEUTRAL_T_MIN || frequency <= bands::NEUTRAL_FREQ_BOUND;
            NeutralPoint {
                t,
                count: counts[i],
                frequency,
                pass,
            }
        })
        .collect();
    // monotone over sorted-by-t nonzero frequencies
    let mut sorted: Vec<&NeutralPoint> = points.iter().filter(|p| p.count > 0).collect();
    sorted.sort_by_key(|p| p.t);
    let pass_monotone = sorted.windows(2).all(|w| w[1].frequency <= w[0].frequency);
    let pass = points.iter().all(|p| p.pass) && pass_monotone;
    Ok(NeutralAuditReport {
        config: config.echoed(Some(grid), None),
        version: env!("CARGO_PKG_VERSION").to_string(),
        warnings,
        points,
        pass_monotone,
        pass,
    })
}

/// Output of [`run_experiment`], one variant per report shape.
#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum RunOutput {
    Ratio(ExperimentReport<ExperimentConfig>),
    Moment(MomentAuditReport),
    Tail(TailAuditReport),
    Neutral(NeutralAuditReport),
}

impl RunOutput {
    pub fn pass(&self) -> bool {
        match self {
            RunOutput::Ratio(r) => r.pass,
            RunOutput::Moment(r) => r.pass,
            RunOutput::Tail(r) => r.pass,
            RunOutput::Neutral(r) => r.pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        match self {
            RunOutput::Ratio(r) => r.to_csv(),
            RunOutput::Moment(r) => {
                let mut out = header_csv(&r.config, &r.version, &r.warnings);
                out.push_str(
                    "t,mean_neutral,se_neutral,predictor_neutral,mean_xi,se_xi,predictor_xi,\
                     mean_active,mean_finished\n",
                );
                for row in &r.rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{}\n",
                        row.t,
                        fmt(row.mean_neutral),
                        fmt(row.se_neutral),
                        fmt(row.predictor_neutral),
                        fmt(row.mean_xi),
                        fmt(row.se_xi),
                        fmt(row.predictor_xi),
                        fmt(row.mean_active),
                        fmt(row.mean_finished),
                    ));
                }
                out
            }
            RunOutput::Tail(r) => {
                let mut out = header_csv(&r.config, &r.version, &r.warnings);
                out.push_str("t,empirical,se,exact\n");
                for p in &r.points {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        p.t,
                        fmt(p.empirical),
                        fmt(p.se),
                        fmt(p.exact)
                    ));
                }
                out
            }
            RunOutput::Neutral(r) => {
                let mut out = header_csv(&r.config, &r.version, &r.warnings);
                out.push_str("t,count,frequency\n");
                for p in &r.points {
                    out.push_str(&format!("{},{},{}\n", p.t, p.count, fmt(p.frequency)));
                }
                out
            }
        }
    }
}

fn fmt(v: f64) -> String {
    crate::report::format_f64(v)
}

fn header_csv(config: &ExperimentConfig, version: &str, warnings: &[String]) -> String {
    let mut out = format!("# version {version}\n");
    out.push_str(&format!(
        "# config {}\n",
        serde_json::to_string(config).expect("config serializes")
    ));
    for w in warnings {
        out.push_str(&format!("# warning {w}\n"));
    }
    out
}

/// Dispatch an experiment by kind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    Ok(match config.kind {
        ExperimentKind::Subcritical => RunOutput::Ratio(run_subcritical(config)?),
        ExperimentKind::Supercritical => RunOutput::Ratio(run_supercritical(config)?),
        ExperimentKind::Window => RunOutput::Ratio(run_window(config)?),
        ExperimentKind::MomentAudit => RunOutput::Moment(moment_audit(config)?),
        ExperimentKind::TailAudit => RunOutput::Tail(tail_audit(config)?),
        ExperimentKind::NeutralAudit => RunOutput::Neutral(neutral_audit(config)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phase_config(kind: ExperimentKind, n: u64, eps: f64, replicas: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind, n);
        c.epsilon = Some(eps);
        c.replicas = Some(replicas);
        c.master_seed = 5;
        c
    }

    #[test]
    fn parallelism_is_invisible_in_reports() {
        let mut a = phase_config(ExperimentKind::Subcritical, 20_000, 0.2, 8);
        a.parallelism = 1;
        let mut b = a.clone();
        b.parallelism = 4;
        let ra = run_subcritical(&a).unwrap().to_json();
        let rb = run_subcritical(&b).unwrap().to_json();
        assert_eq!(ra, rb);
    }

    #[test]
    fn run_replicas_order_is_stable() {
        let serial = run_replicas(17, 1, |r| r * r);
        let parallel = run_replicas(17, 4, |r| r * r);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn fold_replicas_matches_serial() {
        let sum1 = fold_replicas(100, 1, || 0u64, |a, r| *a += r, |a, b| *a += b);
        let sum4 = fold_replicas(100, 4, || 0u64, |a, r| *a += r, |a, b| *a += b);
        assert_eq!(sum1, 4950);
        assert_eq!(sum1, sum4);
    }

    #[test]
    fn config_rejects_p_and_epsilon_together() {
        let mut c = ExperimentConfig::new(ExperimentKind::MomentAudit, 1000);
        c.p = Some(0.001);
        c.epsilon = Some(0.05);
        let err = c.resolve().unwrap_err();
        assert!(err.to_string().contains("p, epsilon"));
    }

    #[test]
    fn config_regime_guard() {
        // eps * n^(1/3) = 0.5: hard error
        let c = phase_config(ExperimentKind::Subcritical, 1000, 0.05, 2);
        assert!(c.resolve().is_err());
        // eps * n^(1/3) = 2.32: warn, proceed
        let c = phase_config(ExperimentKind::Subcritical, 100_000, 0.05, 2);
        let (_, warnings) = c.resolve().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("outside the asymptotic regime"));
    }

    #[test]
    fn moment_grid_bounds_enforced() {
        let mut c = ExperimentConfig::new(ExperimentKind::MomentAudit, 10_000);
        c.epsilon = Some(0.05);
        c.grid = Some(vec![1, 5_000]);
        assert!(matches!(
            c.resolve(),
            Err(Error::GridOutOfRange { t: 5_000, .. })
        ));
    }

    #[test]
    fn window_requires_lambda() {
        let c = ExperimentConfig::new(ExperimentKind::Window, 1000);
        assert!(c.resolve().is_err());
    }
}
