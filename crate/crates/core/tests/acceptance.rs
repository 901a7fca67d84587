// Copyright 2026 The rydgate Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite: one PASS/FAIL line per criterion. Criteria 1 to 6 always
//! run. The training-based criteria 7 to 9 take minutes and run only with
//! `cargo test --test acceptance -- --ignored` or `RYDGATE_ACCEPTANCE_FULL=1`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rydgate_core::ansatz::{t_opt, Arch, ChainedNetwork, Interval, NetConfig, PulseSpec};
use rydgate_core::evaluation::{
    evaluate_angles, fit_times, reference_time_fit, DecompositionPreset, FitModel, REFERENCE_CZ_TIME,
};
use num_complex::Complex64 as C64;
use rydgate_core::linalg::{expm, BasisIndex, CMatrix};
use rydgate_core::model::{add_decay, h_effective_3q, h_full, rydberg_count, AtomSystem, Blockade, ControlModel, ControlValue};
use rydgate_core::objective::{computational_block, infidelity_decomposition};
use rydgate_core::propagator::{default_steps, evolve_fn, Propagator, TimeGrid};
use rydgate_core::trainer::{
    batch_objective, fixed_angle_optimize, initial_network, initial_pulse, sample_angles, train_interval,
    FixedAngleConfig, TrainConfig, DEFAULT_EVAL_B,
};

/// Decay rate for a 96.5 μs lifetime at `Ω_max = 2π × 10 MHz`.
const GAMMA: f64 = 1.0 / 6063.0;

type Outcome = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn index(label: &str) -> usize {
    BasisIndex::parse(label).expect("basis label").index()
}

/// End-to-end network gradient against central differences.
fn criterion_1() -> Outcome {
    let sys = AtomSystem::new(2, Blockade::Finite(DEFAULT_EVAL_B), GAMMA).map_err(err)?;
    let cfg = NetConfig { arch: Arch::new(3, 4, 3, 6), n_knots: 6, ..NetConfig::for_gate(1).map_err(err)? };
    let mut net = ChainedNetwork::random(cfg, &mut ChaCha8Rng::seed_from_u64(1)).map_err(err)?;
    let propagator = Propagator::new(&ControlModel::for_system(&sys).map_err(err)?);
    let angles = [0.4, 1.3, 2.2, PI];
    let (n_steps, mu) = (16, 1e-4);
    let analytic = batch_objective(&net, &angles, &propagator, n_steps, mu, true).map_err(err)?.grad.ok_or("no gradient")?;
    let base = net.params();
    let h = 1e-6;
    let mut fd = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        net.set_params(&p).map_err(err)?;
        let plus = batch_objective(&net, &angles, &propagator, n_steps, mu, false).map_err(err)?.j_opt;
        p[i] = base[i] - h;
        net.set_params(&p).map_err(err)?;
        let minus = batch_objective(&net, &angles, &propagator, n_steps, mu, false).map_err(err)?.j_opt;
        fd.push((plus - minus) / (2.0 * h));
    }
    let scale = fd.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let worst = analytic.iter().zip(&fd).fold(0.0f64, |m, (a, f)| m.max((a - f).abs())) / scale;
    Ok((worst < 1e-4, format!("{} parameters, max deviation {worst:.2e} of the largest component (tol 1e-4)", base.len())))
}

/// Zero crossings of `f` on `(0, t_max)`, refined by bisection.
fn zero_crossings(f: impl Fn(f64) -> f64, t_max: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = step;
    let mut prev = f(0.0);
    while t < t_max {
        let cur = f(t);
        if prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (t - step, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == f(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = cur;
        t += step;
    }
    out
}

/// Rabi frequency of `s` at zero detuning under the perfect blockade. The
/// return amplitude is `cos(ωt/2)`, whose zeros are `2π/ω` apart.
fn bright_frequency(n_atoms: usize, label: &str) -> Result<f64, String> {
    let sys = AtomSystem::new(n_atoms, Blockade::Infinite, 0.0).map_err(err)?;
    let propagator = Propagator::new(&ControlModel::for_system(&sys).map_err(err)?);
    let s = index(label);
    let amp = |t: f64| propagator.evolve_controls(&[0.0; 8], t, false).expect("propagation").final_unitary[(s, s)].re;
    let zeros = zero_crossings(amp, 12.0, 0.05);
    if zeros.len() < 2 {
        return Err(format!("{} zero crossings for {label}", zeros.len()));
    }
    let spacing = (zeros[zeros.len() - 1] - zeros[0]) / (zeros.len() - 1) as f64;
    Ok(2.0 * PI / spacing)
}

fn criterion_2() -> Outcome {
    let one = AtomSystem::new(1, Blockade::Finite(DEFAULT_EVAL_B), 0.0).map_err(err)?;
    let u = Propagator::new(&ControlModel::for_system(&one).map_err(err)?).evolve_controls(&[0.0; 8], PI, false).map_err(err)?.final_unitary;
    let transfer = u[(index("r"), index("1"))].norm_sqr();
    let w2 = bright_frequency(2, "11")?;
    let w3 = bright_frequency(3, "111")?;
    let e1 = (1.0 - transfer).abs();
    let e2 = (w2 / 2f64.sqrt() - 1.0).abs();
    let e3 = (w3 / 3f64.sqrt() - 1.0).abs();
    Ok((
        e1 < 1e-8 && e2 < 1e-4 && e3 < 1e-4,
        format!("π-pulse transfer error {e1:.1e} (tol 1e-8); |11⟩ at {w2:.8} Ω (rel {e2:.1e}), |111⟩ at {w3:.8} Ω (rel {e3:.1e}) (tol 1e-4)"),
    ))
}

fn criterion_3() -> Outcome {
    let sys = AtomSystem::new(3, Blockade::Finite(DEFAULT_EVAL_B), 0.0).map_err(err)?;
    let propagator = Propagator::new(&ControlModel::for_system(&sys).map_err(err)?);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let controls: Vec<f64> = (0..64).map(|_| rng.gen_range(-2.5..2.5)).collect();
    let defect = propagator.evolve_controls(&controls, 16.87, false).map_err(err)?.final_unitary.unitarity_defect();

    // Decay term alone on one atom: |r⟩ population after 1/Γ.
    let one = AtomSystem::new(1, Blockade::Finite(DEFAULT_EVAL_B), GAMMA).map_err(err)?;
    let h = add_decay(&CMatrix::zeros(3), &one);
    let r = index("r");
    let u = expm(&h.scale(C64::new(0.0, -1.0 / GAMMA)));
    let pop = u[(r, r)].norm_sqr();
    let grid = TimeGrid::new(1.0 / GAMMA, 16).map_err(err)?;
    let stepped = evolve_fn(|_| h.clone(), &grid, &rydberg_count(1), 1).map_err(err)?.final_unitary[(r, r)].norm_sqr();
    let e_pop = (pop - (-1.0f64).exp()).abs().max((stepped - (-1.0f64).exp()).abs());
    Ok((
        defect < 1e-10 && e_pop < 1e-6,
        format!("unitarity defect {defect:.1e} (tol 1e-10); |r⟩ population at t = 1/Γ off e^-1 by {e_pop:.1e} (tol 1e-6), τΩ = {:.0}", 1.0 / GAMMA),
    ))
}

/// Normalized overlap of the computational blocks of two register
/// propagators. A pulse that ends with Rydberg population leaves
/// non-unitary blocks, hence the normalization.
fn block_fidelity(a: &CMatrix, b: &CMatrix, n_atoms: usize) -> Result<f64, String> {
    let (a, b) = (computational_block(a, n_atoms).map_err(err)?, computational_block(b, n_atoms).map_err(err)?);
    let overlap = a.adjoint().matmul(&b).trace().norm_sqr();
    Ok(overlap / (a.frobenius_norm().powi(2) * b.frobenius_norm().powi(2)))
}

fn criterion_4() -> Outcome {
    let pulse = initial_pulse(PI, 48, 16.87);
    let grid = TimeGrid::new(pulse.duration, 400).map_err(err)?;
    let detuning = |t: f64| pulse.detuning(t.clamp(0.0, pulse.duration)).expect("inside the pulse");
    let counts = rydberg_count(3);
    let eff = evolve_fn(|t| h_effective_3q(ControlValue::new(1.0, detuning(t))), &grid, &counts, 3).map_err(err)?.final_unitary;
    let mut gaps = Vec::new();
    for b in [50.0, 200.0, 800.0] {
        let sys = AtomSystem::new(3, Blockade::Finite(b), 0.0).map_err(err)?;
        let full = evolve_fn(|t| h_full(&sys, ControlValue::new(1.0, detuning(t))).expect("finite blockade"), &grid, &counts, 3)
            .map_err(err)?
            .final_unitary;
        gaps.push(1.0 - block_fidelity(&eff, &full, 3)?);
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    // Each fourfold increase of B should buy close to a sixteenfold drop.
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let suppressed = ratios.iter().all(|&r| r > 8.0);
    Ok((
        monotone && suppressed,
        format!("1 - F at B = 50, 200, 800: {:.2e}, {:.2e}, {:.2e}; drop per 4x in B: {:.1}, {:.1} (need monotone, > 8)", gaps[0], gaps[1], gaps[2], ratios[0], ratios[1]),
    ))
}

fn criterion_5() -> Outcome {
    let truth = [1.07, 275.86];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 1e-3).map_err(err)?;
    let points: Vec<(f64, f64)> = sample_angles(&Interval::full(), 200, &mut rng)
        .map_err(err)?
        .into_iter()
        .map(|x| (x, FitModel::Arcsinh.eval(&truth, x) + noise.sample(&mut rng)))
        .collect();
    let fit = fit_times(&points, FitModel::Arcsinh).map_err(err)?;
    let ea = (fit.params[0] / truth[0] - 1.0).abs();
    let eb = (fit.params[1] / truth[1] - 1.0).abs();

    let poly = [-0.70, 5.24, 7.44];
    let clean: Vec<(f64, f64)> = (1..=25).map(|i| i as f64 * PI / 25.0).map(|x| (x, FitModel::Poly2.eval(&poly, x))).collect();
    let pfit = fit_times(&clean, FitModel::Poly2).map_err(err)?;
    let ep = pfit.params.iter().zip(poly).fold(0.0f64, |m, (p, t)| m.max((p - t).abs()));
    Ok((
        ea < 0.01 && eb < 0.01 && ep < 1e-10,
        format!(
            "arcsinh (a, b) = ({:.4}, {:.2}), rel errors {ea:.1e}, {eb:.1e} (tol 1e-2); poly2 max error {ep:.1e} (tol 1e-10)",
            fit.params[0], fit.params[1]
        ),
    ))
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, expect) in [(1, "2.2"), (2, "4.6")] {
        let (model, params) = reference_time_fit(k).map_err(err)?;
        let native = model.domain_mean(&params);
        let preset = DecompositionPreset::for_gate(k).map_err(err)?;
        let r = preset.ratio(REFERENCE_CZ_TIME, native).map_err(err)?;
        ok &= format!("{r:.1}") == expect;
        lines.push(format!("R{k} = {}·{REFERENCE_CZ_TIME}/{native:.3} = {r:.3} (expect {expect})", preset.cz_count));
    }
    Ok((ok, lines.join("; ")))
}

fn criterion_7() -> Outcome {
    let sys = AtomSystem::new(2, Blockade::Finite(DEFAULT_EVAL_B), 0.0).map_err(err)?;
    let cfg = FixedAngleConfig::default();
    let init = initial_pulse(PI, 48, t_opt(1).map_err(err)?);
    let res = fixed_angle_optimize(1, PI, &init, &cfg, &sys).map_err(err)?;
    let n_steps = default_steps(cfg.t_bound);
    let with_decay = infidelity_decomposition(&res.pulse, 1, &sys.with_gamma(GAMMA), n_steps).map_err(err)?;
    let ok = res.infidelity < 1e-4 && (1e-4..1e-3).contains(&with_decay.infid_total);
    Ok((
        ok,
        format!(
            "C1Z at B = 21.1: 1 - F = {:.2e} without decay (tol 1e-4), {:.2e} with decay (need 1e-4 to 1e-3), T = {:.4}",
            res.infidelity, with_decay.infid_total, res.pulse.duration
        ),
    ))
}

fn criterion_8() -> Outcome {
    let sys = AtomSystem::new(2, Blockade::Finite(DEFAULT_EVAL_B), 0.0).map_err(err)?;
    let interval = Interval::new(PI / 2.0, PI).map_err(err)?;
    let net_cfg = NetConfig { arch: Arch::new(3, 24, 6, 128), interval, ..NetConfig::for_gate(1).map_err(err)? };
    let cfg = TrainConfig::default();
    let mut net = initial_network(1, &cfg, &sys, net_cfg, interval).map_err(err)?;
    let run = train_interval(&mut net, interval, &cfg, &sys, "acceptance", 0).map_err(err)?;
    let angles = sample_angles(&interval, 50, &mut ChaCha8Rng::seed_from_u64(8)).map_err(err)?;
    let records = evaluate_angles(&[net], &sys, &angles, None).map_err(err)?;
    let mean = records.iter().map(|r| r.infid_no_decay).sum::<f64>() / records.len() as f64;
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.phi, r.duration)).collect();
    let fit = fit_times(&points, FitModel::Arcsinh).map_err(err)?;
    Ok((
        mean < 1e-3 && fit.r_squared > 0.98,
        format!(
            "{:?} after {} iterations; <1 - F> = {mean:.2e} over 50 angles (tol 1e-3); arcsinh fit r² = {:.4} (need > 0.98), (a, b) = ({:.4}, {:.3e})",
            run.status, run.iterations, fit.r_squared, fit.params[0], fit.params[1]
        ),
    ))
}

fn criterion_9() -> Outcome {
    let finite = AtomSystem::new(3, Blockade::Finite(DEFAULT_EVAL_B), 0.0).map_err(err)?;
    let ideal = finite.with_blockade(Blockade::Infinite);
    let t_ref = t_opt(2).map_err(err)?;
    let cfg = FixedAngleConfig {
        learning_rate: 1e-2,
        max_iters: 4000,
        mu: 1e-4,
        t_bound: 1.2 * t_ref,
        ..FixedAngleConfig::default()
    };
    let n_steps = default_steps(cfg.t_bound);
    let stage1 = fixed_angle_optimize(2, PI, &initial_pulse(PI, 48, t_ref), &cfg, &ideal).map_err(err)?;
    let stage2 = fixed_angle_optimize(2, PI, &stage1.pulse, &cfg, &finite).map_err(err)?;
    let report = |p: &PulseSpec| infidelity_decomposition(p, 2, &finite, n_steps);
    let (r1, r2) = (report(&stage1.pulse).map_err(err)?, report(&stage2.pulse).map_err(err)?);
    let ratio = r1.infid_no_decay / r2.infid_no_decay;
    let t_err = (stage2.pulse.duration / 16.87 - 1.0).abs();
    Ok((
        ratio >= 10.0 && t_err < 0.1,
        format!(
            "finite-blockade 1 - F: stage 1 {:.2e}, stage 2 {:.2e}, ratio {ratio:.1e} (need >= 10); F_inf - F_fin: {:.2e}, {:.2e}; stage-2 T = {:.3} ({:.1}% from 16.87, tol 10%)",
            r1.infid_no_decay,
            r2.infid_no_decay,
            r1.infid_blockade,
            r2.infid_blockade,
            stage2.pulse.duration,
            100.0 * t_err
        ),
    ))
}

fn main() -> ExitCode {
    let full = std::env::args().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("RYDGATE_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let criteria: [(u32, &str, fn() -> Outcome, bool); 9] = [
        (1, "gradient oracle", criterion_1, false),
        (2, "physics oracles", criterion_2, false),
        (3, "unitarity and decay", criterion_3, false),
        (4, "effective-model consistency", criterion_4, false),
        (5, "fit recovery", criterion_5, false),
        (6, "ratio helper", criterion_6, false),
        (7, "fixed-angle C1Z", criterion_7, true),
        (8, "mini-family C1P", criterion_8, true),
        (9, "C2P blockade curriculum", criterion_9, true),
    ];
    let mut failed = 0;
    for (n, name, run, slow) in criteria {
        if slow && !full {
            println!("SKIP criterion {n} ({name}): opt-in, run with -- --ignored");
            continue;
        }
        let clock = Instant::now();
        let outcome = run();
        let secs = clock.elapsed().as_secs_f64();
        match outcome {
            Ok((true, detail)) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1} s]"),
            Ok((false, detail)) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail} [{secs:.1} s]");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): error: {e} [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
