// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Domain-averaged infidelities of a trained family, duration fits and the
//! decomposition-time ratio.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ChainedNetwork, Interval, PulseSpec};
use crate::error::{Error, Result};
use crate::model::AtomSystem;
use crate::objective::{Decomposer, FidelityReport};
use crate::propagator::default_steps;
use crate::trainer::sample_angles;

pub const DEFAULT_EVAL_SAMPLES: usize = 200;

/// One evaluated angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub phi: f64,
    pub duration: f64,
    /// `1 − F` with decay at the evaluation blockade.
    pub infid_total: f64,
    pub infid_decay: f64,
    pub infid_blockade: f64,
    pub infid_no_decay: f64,
    pub infid_haar: f64,
    pub theta_c: f64,
    /// Index of the network that produced the pulse.
    pub interval: usize,
}

impl EvalRecord {
    fn new(pulse: &PulseSpec, report: &FidelityReport, interval: usize) -> Self {
        Self {
            phi: pulse.phi,
            duration: pulse.duration,
            infid_total: report.infid_total,
            infid_decay: report.infid_decay,
            infid_blockade: report.infid_blockade,
            infid_no_decay: report.infid_no_decay,
            infid_haar: report.infid_haar,
            theta_c: report.theta_c_used,
            interval,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMeans {
    pub duration: f64,
    pub infid_total: f64,
    pub infid_decay: f64,
    pub infid_blockade: f64,
    pub infid_no_decay: f64,
    pub infid_haar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gate_k: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub means: EvalMeans,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub fn from_records(gate_k: usize, seed: u64, records: Vec<EvalRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("a report needs at least one record".into()));
        }
        let n = records.len() as f64;
        let mean = |f: fn(&EvalRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let means = EvalMeans {
            duration: mean(|r| r.duration),
            infid_total: mean(|r| r.infid_total),
            infid_decay: mean(|r| r.infid_decay),
            infid_blockade: mean(|r| r.infid_blockade),
            infid_no_decay: mean(|r| r.infid_no_decay),
            infid_haar: mean(|r| r.infid_haar),
        };
        Ok(Self { gate_k, seed, n_samples: records.len(), means, records })
    }

    /// `(φ, T_φ)` pairs in record order.
    pub fn durations(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.phi, r.duration)).collect()
    }

    /// One JSON object per line.
    pub fn records_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Plot columns sorted by angle.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&EvalRecord> = self.records.iter().collect();
        rows.sort_by(|a, b| a.phi.total_cmp(&b.phi));
        let mut out = String::from("phi,duration,infid_total,infid_decay,infid_blockade,infid_no_decay,infid_haar,theta_c,interval\n");
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.phi, r.duration, r.infid_total, r.infid_decay, r.infid_blockade, r.infid_no_decay, r.infid_haar, r.theta_c, r.interval
            );
        }
        out
    }
}

/// Parts of `(0, π]` not covered by any interval.
pub fn coverage_gaps(intervals: &[Interval]) -> Vec<Interval> {
    const TOL: f64 = 1e-12;
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut gaps = Vec::new();
    let mut cursor = 0.0;
    for iv in sorted {
        if iv.lo > cursor + TOL {
            gaps.push(Interval { lo: cursor, hi: iv.lo });
        }
        cursor = f64::max(cursor, iv.hi);
    }
    if cursor < PI - TOL {
        gaps.push(Interval { lo: cursor, hi: PI });
    }
    gaps
}

fn gate_of(nets: &[ChainedNetwork]) -> Result<usize> {
    let first = nets.first().ok_or_else(|| Error::MissingIntervals("no networks given".into()))?;
    let k = first.config().gate_k;
    if nets.iter().any(|n| n.config().gate_k != k) {
        return Err(Error::InvalidArgument("networks for different gates".into()));
    }
    Ok(k)
}

fn check_family(nets: &[ChainedNetwork]) -> Result<usize> {
    let k = gate_of(nets)?;
    let gaps = coverage_gaps(&nets.iter().map(ChainedNetwork::interval).collect::<Vec<_>>());
    if !gaps.is_empty() {
        let list: Vec<String> = gaps.iter().map(|g| format!("({:.6}, {:.6}]", g.lo, g.hi)).collect();
        return Err(Error::MissingIntervals(list.join(", ")));
    }
    Ok(k)
}

/// Evaluates the networks at the given angles. Each angle is served by the
/// first network whose interval contains it.
pub fn evaluate_angles(
    nets: &[ChainedNetwork],
    sys: &AtomSystem,
    angles: &[f64],
    n_steps: Option<usize>,
) -> Result<Vec<EvalRecord>> {
    let k = gate_of(nets)?;
    let decomposer = Decomposer::new(k, sys)?;
    angles
        .par_iter()
        .map(|&phi| {
            let index = nets
                .iter()
                .position(|n| n.interval().contains(phi))
                .ok_or_else(|| Error::MissingIntervals(format!("no network for φ = {phi}")))?;
            let net = &nets[index];
            let pulse = net.forward(phi)?;
            let steps = n_steps.unwrap_or_else(|| default_steps(net.config().t_bound));
            let report = decomposer.report(&pulse, steps)?;
            Ok(EvalRecord::new(&pulse, &report, index))
        })
        .collect()
}

/// Evaluates `n_samples` uniform angles on `(0, π]` drawn from `seed`.
pub fn evaluate_family(
    nets: &[ChainedNetwork],
    sys: &AtomSystem,
    n_samples: usize,
    seed: u64,
    n_steps: Option<usize>,
) -> Result<EvalReport> {
    let k = check_family(nets)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("at least one sample".into()));
    }
    let angles = sample_angles(&Interval::full(), n_samples, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let records = evaluate_angles(nets, sys, &angles, n_steps)?;
    let report = EvalReport::from_records(k, seed, records)?;
    if k == 1 {
        for (a, b) in monotonicity_violations(&report.records) {
            log::warn!("T_φ decreases from {:.5} at φ={:.5} to {:.5} at φ={:.5}", a.duration, a.phi, b.duration, b.phi);
        }
    }
    Ok(report)
}

/// Adjacent pairs within one interval where `T_φ` decreases with `φ`.
pub fn monotonicity_violations(records: &[EvalRecord]) -> Vec<(EvalRecord, EvalRecord)> {
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.interval.cmp(&b.interval).then(a.phi.total_cmp(&b.phi)));
    sorted
        .windows(2)
        .filter(|w| w[0].interval == w[1].interval && w[1].duration < w[0].duration)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `a·arcsinh(bφ)`
    Arcsinh,
    /// `aφ² + bφ + c`
    Poly2,
}

impl FitModel {
    pub fn eval(self, params: &[f64], phi: f64) -> f64 {
        match self {
            FitModel::Arcsinh => params[0] * (params[1] * phi).asinh(),
            FitModel::Poly2 => (params[0] * phi + params[1]) * phi + params[2],
        }
    }

    /// Mean of the curve over `(0, π]`.
    pub fn domain_mean(self, params: &[f64]) -> f64 {
        match self {
            FitModel::Arcsinh => {
                let (a, b) = (params[0], params[1]);
                let antiderivative = |x: f64| a * (x * (b * x).asinh() - (1.0 + (b * x).powi(2)).sqrt() / b);
                (antiderivative(PI) - antiderivative(0.0)) / PI
            }
            FitModel::Poly2 => params[0] * PI * PI / 3.0 + params[1] * PI / 2.0 + params[2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub r_squared: f64,
}

impl FitResult {
    fn new(model: FitModel, params: Vec<f64>, points: &[(f64, f64)]) -> Result<Self> {
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::FitFailed(format!("{model:?} fit produced {params:?}")));
        }
        let residuals: Vec<f64> = points.iter().map(|&(x, y)| y - model.eval(&params, x)).collect();
        let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
        let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
        // Constant data: a perfect fit explains everything, anything else
        // explains nothing.
        let r_squared = if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else if ss_res <= 1e-24 * points.len() as f64 {
            1.0
        } else {
            0.0
        };
        Ok(Self { model, params, residual_norm: ss_res.sqrt(), residuals, r_squared })
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.model.eval(&self.params, phi)
    }

    pub fn domain_mean(&self) -> f64 {
        self.model.domain_mean(&self.params)
    }
}

/// Least-squares fit of `T(φ)` to `model` over `(φ, T)` points.
pub fn fit_times(points: &[(f64, f64)], model: FitModel) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!("{} points; a fit needs at least 4", points.len())));
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::NonFinite("fit data".into()));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("repeated angle in fit data".into()));
    }
    let params = match model {
        FitModel::Poly2 => fit_poly2(points)?,
        FitModel::Arcsinh => fit_arcsinh(points)?,
    };
    FitResult::new(model, params, points)
}

/// Solves `A x = b` for a small dense system by Gaussian elimination with
/// partial pivoting.
fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Result<[f64; N]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("nonempty");
        if !(a[pivot][col].abs() > 1e-14 * scale) {
            return Err(Error::Singular("fit design matrix is singular"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for c in col..N {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

fn fit_poly2(points: &[(f64, f64)]) -> Result<Vec<f64>> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(x, y) in points {
        let row = [x * x, x, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * y;
        }
    }
    Ok(solve_small(ata, aty)?.to_vec())
}

/// Best `a` for a fixed `b` and the resulting squared residual.
fn arcsinh_profile(points: &[(f64, f64)], b: f64) -> (f64, f64) {
    let (gy, gg) = points.iter().fold((0.0, 0.0), |(gy, gg), &(x, y)| {
        let g = (b * x).asinh();
        (gy + g * y, gg + g * g)
    });
    let a = if gg > 0.0 { gy / gg } else { 0.0 };
    let ss = points.iter().map(|&(x, y)| (y - a * (b * x).asinh()).powi(2)).sum();
    (a, ss)
}

/// Profiled grid search over `ln b`, then Levenberg–Marquardt on `(a, ln b)`.
fn fit_arcsinh(points: &[(f64, f64)]) -> Result<Vec<f64>> {
    let (lo, hi, n_grid) = (-8.0f64, 16.0f64, 481);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n_grid {
        let ln_b = lo + (hi - lo) * i as f64 / (n_grid - 1) as f64;
        let (a, ss) = arcsinh_profile(points, ln_b.exp());
        if ss < best.0 {
            best = (ss, a, ln_b);
        }
    }
    let (mut ss, mut a, mut ln_b) = best;
    let sum_sq = |a: f64, ln_b: f64| -> f64 {
        let b = ln_b.exp();
        points.iter().map(|&(x, y)| (y - a * (b * x).asinh()).powi(2)).sum()
    };
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let b = ln_b.exp();
        let mut jtj = [[0.0; 2]; 2];
        let mut jtr = [0.0; 2];
        for &(x, y) in points {
            let bx = b * x;
            let g = bx.asinh();
            let r = y - a * g;
            // Derivatives of the model with respect to a and ln b.
            let j = [g, a * bx / (1.0 + bx * bx).sqrt()];
            for p in 0..2 {
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
                jtr[p] += j[p] * r;
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let damped = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let Ok(step) = solve_small(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = sum_sq(a + step[0], ln_b + step[1]);
            if trial.is_finite() && trial <= ss {
                let small = step[0].abs() <= 1e-12 * (1.0 + a.abs()) && step[1].abs() <= 1e-12 * (1.0 + ln_b.abs());
                let rel = (ss - trial) / ss.max(f64::MIN_POSITIVE);
                a += step[0];
                ln_b += step[1];
                ss = trial;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                converged = small || rel < 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailed("arcsinh fit did not converge".into()));
    }
    Ok(vec![a, ln_b.exp()])
}

/// `T_d`: sum of `count × duration` over the native two-qubit gates of a
/// decomposition. Single-qubit gates are not counted.
pub fn decomposed_time(gates: &[(usize, f64)]) -> Result<f64> {
    if gates.iter().any(|&(_, t)| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument("gate durations must be positive".into()));
    }
    Ok(gates.iter().map(|&(n, t)| n as f64 * t).sum())
}

/// `R = T_d / T_n`.
pub fn decomposition_ratio(t_decomposed: f64, t_native: f64) -> Result<f64> {
    if !(t_decomposed > 0.0 && t_native > 0.0 && t_decomposed.is_finite() && t_native.is_finite()) {
        return Err(Error::InvalidArgument(format!("times must be positive, got {t_decomposed} and {t_native}")));
    }
    Ok(t_decomposed / t_native)
}

/// C₁Z gates in the standard decomposition of a controlled-phase gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionPreset {
    pub gate_k: usize,
    pub cz_count: usize,
}

/// `C₁P(φ)` from two C₁Z gates and single-qubit rotations.
pub const C1P_DECOMPOSITION: DecompositionPreset = DecompositionPreset { gate_k: 1, cz_count: 2 };
/// `C₂P(φ)` costs the equivalent of eight C₁Z gates.
pub const C2P_DECOMPOSITION: DecompositionPreset = DecompositionPreset { gate_k: 2, cz_count: 8 };

/// Time-optimal C₁Z duration in units of `1/Ω_max`, used as the per-gate
/// reference time of the decompositions.
pub const REFERENCE_CZ_TIME: f64 = 7.612;

/// Published duration fits of the native families: `(model, params)`.
pub fn reference_time_fit(k: usize) -> Result<(FitModel, Vec<f64>)> {
    match k {
        1 => Ok((FitModel::Arcsinh, vec![1.07, 275.86])),
        2 => Ok((FitModel::Poly2, vec![-0.70, 5.24, 7.44])),
        _ => Err(Error::Unsupported(format!("gates with {k} controls"))),
    }
}

impl DecompositionPreset {
    pub fn for_gate(k: usize) -> Result<Self> {
        match k {
            1 => Ok(C1P_DECOMPOSITION),
            2 => Ok(C2P_DECOMPOSITION),
            _ => Err(Error::Unsupported(format!("gates with {k} controls"))),
        }
    }

    pub fn decomposed_time(&self, cz_time: f64) -> Result<f64> {
        decomposed_time(&[(self.cz_count, cz_time)])
    }

    /// `R_k` against a native family whose mean duration is `t_native`.
    pub fn ratio(&self, cz_time: f64, t_native: f64) -> Result<f64> {
        decomposition_ratio(self.decomposed_time(cz_time)?, t_native)
    }
}
