//! Quick invariant probes behind `irsim check`.

use std::time::Instant;

use crate::airlink::{receive_ul, simulate_ul_training, LinkDirection, PilotKind, PilotSet, StreamPlan};
use crate::codebook::{build_codebook, reconstruct_canonical, CodebookKind};
use crate::linalg::{max_rel_error, phases_to_weights};
use crate::objectives::{mmse_values, true_sinr, DirectObjective, InterfererPilots, IntraCellPilots, ObjectiveContext};
use crate::phaseopt::{ascend, fd_gradient, random_phases, OptimizerSettings, PhaseObjective};
use crate::random::{complex_gaussian_matrix, derive_seed, rng_from_seed};
use crate::schemes::{run_scheme, SchemeId, SchemeSettings, TrialSeeds};
use crate::topology::{draw_realization, SystemConfig};
use crate::{CVec, Result, C64};

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Max relative error between codebook-reconstructed canonical receptions
/// and receptions simulated directly under each canonical IRS state,
/// noiseless, at BTS 0.
pub fn reconstruction_error(n_irs: usize, seed: u64) -> Result<f64> {
    let cfg = SystemConfig {
        n_irs,
        ..SystemConfig::default()
    };
    let real = draw_realization(&cfg, seed);
    let cb = build_codebook(n_irs, CodebookKind::Dft)?;
    let amps = vec![cfg.tx_amplitude(); cfg.total_users()];
    let pilots = PilotSet::build(PilotKind::RandomBinary, &amps, cfg.pilot_len, LinkDirection::Uplink, seed)?;
    let ones = vec![CVec::from_element(1, C64::from(1.0)); cfg.total_users()];
    let plan = StreamPlan::one_per_user(&ones);
    let rec = simulate_ul_training(&real, &cb, &pilots, &plan, 0, 0.0, seed)?;
    let blocks = reconstruct_canonical(&rec.epochs, &cb)?;

    let mut rng = rng_from_seed(seed);
    let off = CVec::zeros(n_irs);
    let mut err = max_rel_error(blocks.y0(), &receive_ul(&real, 0, &off, &pilots, &plan, 0.0, &mut rng)?);
    for j in 0..n_irs {
        let mut e = off.clone();
        e[j] = C64::from(1.0);
        let direct = receive_ul(&real, 0, &e, &pilots, &plan, 0.0, &mut rng)?;
        err = err.max(max_rel_error(&blocks.ycan()[j], &direct));
    }
    Ok(err)
}

/// `|sum log2(1 + SINR_k) + sum log2(MMSE_k)|` with exact MMSE filters on a
/// random Gaussian instance.
pub fn mmse_rate_gap(seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let (m_r, users) = (6, 4);
    let h = complex_gaussian_matrix(&mut rng, m_r, users, 1.0);
    let channels: Vec<CVec> = h.column_iter().map(|c| c.into_owned()).collect();
    let powers: Vec<f64> = (0..users).map(|k| 0.5 + k as f64).collect();
    let noise = 0.3 + (seed % 7) as f64 * 0.4;
    let all: Vec<usize> = (0..users).collect();
    let mmse = mmse_values(&channels, &powers, noise, &all)?;
    let mut rate = 0.0;
    for k in 0..users {
        let v = crate::filters::mmse_filter(&channels, &powers, noise, k)?;
        rate += (1.0 + true_sinr(&channels, &powers, &v, k, noise)).log2();
    }
    let neg_log_mmse: f64 = mmse.iter().map(|e| -e.log2()).sum();
    Ok((rate - neg_log_mmse).abs())
}

/// Centralized direct objective built from a noisy sweep at BTS 0.
pub fn sample_direct_context(cfg: &SystemConfig, seed: u64, central: bool) -> Result<ObjectiveContext> {
    let real = draw_realization(cfg, seed);
    let settings = SchemeSettings::default();
    let seeds = TrialSeeds::new(seed, 0);
    let cb = build_codebook(cfg.n_irs, settings.codebook)?;
    let pilots = crate::schemes::sweep_pilots(cfg, &settings, &seeds)?;
    let ones = vec![CVec::from_element(cfg.ue_antennas, C64::from(1.0)); cfg.total_users()];
    let plan = StreamPlan::one_per_user(&ones.iter().map(crate::schemes::ul_precoder).collect::<Vec<_>>());
    let rec = simulate_ul_training(&real, &cb, &pilots, &plan, 0, cfg.noise_var, seeds.sweep_noise(0))?;
    let blocks = reconstruct_canonical(&rec.epochs, &cb)?;
    let intra = IntraCellPilots::new(
        cfg.users_in(0).map(|m| pilots.scaled(m)).collect(),
        cfg.users_in(0).map(|m| pilots.power(m)).collect(),
    )?;
    Ok(if central {
        let others = cfg.interferers_of(0);
        let inter = InterfererPilots::new(
            others.iter().map(|&m| pilots.scaled(m)).collect(),
            others.iter().map(|&m| pilots.power(m)).collect(),
        )?;
        ObjectiveContext::DirectCentral(DirectObjective::centralized(blocks, intra, inter, cfg.noise_var))
    } else {
        ObjectiveContext::DirectDecentral(DirectObjective::decentralized(blocks, intra, cfg.noise_var))
    })
}

/// Max over `points` random phase vectors of
/// `max_j |analytic_j - fd_j| / max_j |fd_j|`, with central differences.
pub fn direct_gradient_error(ctx: &ObjectiveContext, points: usize, seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let phi = random_phases(ctx.n_irs(), &mut rng);
        let analytic = ctx
            .utility_gradient(&phases_to_weights(&phi))?
            .ok_or_else(|| crate::Error::Unsupported("no analytic gradient at this point".into()))?;
        let fd = fd_gradient(ctx, &phi, 1e-5);
        let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        let diff = analytic.iter().zip(&fd).fold(0.0f64, |m, (a, f)| m.max((a - f).abs()));
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

/// Runs the ascent from random starts and reports whether every trace is
/// nondecreasing.
pub fn traces_monotone<O: PhaseObjective>(obj: &O, n_irs: usize, runs: usize, seed: u64) -> bool {
    let settings = OptimizerSettings {
        max_iters: 40,
        ..OptimizerSettings::default()
    };
    (0..runs).all(|r| {
        let start = random_phases(n_irs, &mut rng_from_seed(derive_seed(seed, r as u64)));
        let res = ascend(obj, &start, &settings);
        res.trace.windows(2).all(|w| w[1] >= w[0])
    })
}

/// Training symbols reported by every scheme against the closed forms.
pub fn training_mismatches(cfg: &SystemConfig, seed: u64) -> Result<Vec<String>> {
    let real = draw_realization(cfg, seed);
    let settings = SchemeSettings {
        optimizer: OptimizerSettings {
            max_iters: 5,
            ..OptimizerSettings::default()
        },
        ..SchemeSettings::default()
    };
    let (t, n) = (cfg.pilot_len, cfg.n_irs);
    let mut bad = Vec::new();
    for id in SchemeId::ALL {
        let r = run_scheme(id, &real, cfg, &settings, &TrialSeeds::new(seed, 0))?;
        let want = match id {
            SchemeId::PerfectCsi => 0,
            _ if id.uses_bidirectional(cfg) => t * (n + 1 + 2 * cfg.n_fb),
            _ => t * (n + 1),
        };
        if r.training_symbols_used != want {
            bad.push(format!("{id}: {} != {want}", r.training_symbols_used));
        }
    }
    Ok(bad)
}

fn outcome(name: &'static str, res: Result<(bool, String)>) -> CheckOutcome {
    match res {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Fast self-tests of the core identities.
pub fn self_check() -> Vec<CheckOutcome> {
    let start = Instant::now();
    let mut out = Vec::new();
    out.push(outcome(
        "reconstruction exactness",
        (|| {
            let err = [4, 16]
                .iter()
                .map(|&n| reconstruction_error(n, 7))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok((err <= 1e-9, format!("max rel error {err:.2e}")))
        })(),
    ));
    out.push(outcome(
        "MMSE-rate identity",
        (|| {
            let gap = (0..10).map(mmse_rate_gap).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
            Ok((gap <= 1e-9, format!("max gap {gap:.2e}")))
        })(),
    ));
    out.push(outcome(
        "direct objective gradient",
        (|| {
            let cfg = SystemConfig {
                n_irs: 6,
                ..SystemConfig::default()
            };
            let mut worst: f64 = 0.0;
            for central in [false, true] {
                let ctx = sample_direct_context(&cfg, 3, central)?;
                worst = worst.max(direct_gradient_error(&ctx, 5, 11)?);
            }
            Ok((worst < 1e-5, format!("max rel error {worst:.2e}")))
        })(),
    ));
    out.push(outcome(
        "ascent monotonicity",
        (|| {
            let cfg = SystemConfig {
                n_irs: 6,
                ..SystemConfig::default()
            };
            let ctx = sample_direct_context(&cfg, 5, true)?;
            let ok = traces_monotone(&ctx, cfg.n_irs, 5, 9);
            Ok((ok, "5 random starts".into()))
        })(),
    ));
    out.push(outcome(
        "training accounting",
        (|| {
            let mut bad = Vec::new();
            for n_t in [1, 2] {
                let cfg = SystemConfig {
                    n_irs: 3,
                    ue_antennas: n_t,
                    pilot_len: 8,
                    ..SystemConfig::default()
                };
                bad.extend(training_mismatches(&cfg, 2)?);
            }
            Ok((bad.is_empty(), if bad.is_empty() { "exact".into() } else { bad.join("; ") }))
        })(),
    ));
    if let Some(last) = out.last_mut() {
        last.detail.push_str(&format!(" (all checks {:.2} s)", start.elapsed().as_secs_f64()));
    }
    out
}
