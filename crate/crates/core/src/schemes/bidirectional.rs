use crate::airlink::{receive_ul, simulate_dl_training, simulate_ul_training, LinkDirection, PilotSet, StreamPlan};
use crate::codebook::{build_codebook, reconstruct_canonical};
use crate::filters::LsSystem;
use crate::linalg::phases_to_weights;
use crate::objectives::{DirectObjective, InterfererPilots, IntraCellPilots, LsObjective, ObjectiveContext};
use crate::phaseopt::{optimize, random_phases};
use crate::random::{derive_seed, rng_from_seed};
use crate::topology::{NetworkRealization, SystemConfig};
use crate::{CVec, Error, Result, C64};

use super::{dl_precoders, sweep_pilots, ul_precoder, SchemeFlags, SchemeId, SchemeSettings, TrialSeeds, Transceivers};

#[derive(Clone, Debug)]
pub struct DirectOutcome {
    pub transceivers: Transceivers,
    pub iterations: usize,
    pub flags: SchemeFlags,
}

/// Direct IRS optimization from one UL codebook sweep followed by `n_fb`
/// forward-backward LS filter updates with the IRS held fixed.
///
/// Each BTS only reads the pilots its scheme is entitled to: intra-cell
/// pilots for `direct_decentral`, `ls_obj` and `random_theta`, all pilots
/// for `direct_central`. `random_theta` skips the IRS optimization.
pub fn bidirectional_train(
    id: SchemeId,
    real: &NetworkRealization,
    cfg: &SystemConfig,
    settings: &SchemeSettings,
    seeds: &TrialSeeds,
    n_fb: usize,
) -> Result<DirectOutcome> {
    if id.uses_csi() {
        return Err(Error::Unsupported(format!("{id} is not a direct scheme")));
    }
    let n_users = cfg.total_users();
    let cb = build_codebook(cfg.n_irs, settings.codebook)?;
    let pilots = sweep_pilots(cfg, settings, seeds)?;
    let noise_assumed = settings.assumed_noise(cfg);

    let mut u = vec![CVec::from_element(cfg.ue_antennas, C64::from(1.0)); n_users];
    let plan = StreamPlan::one_per_user(&u.iter().map(ul_precoder).collect::<Vec<_>>());

    let mut flags = SchemeFlags::default();
    let mut iterations = 0;
    let mut irs = Vec::with_capacity(cfg.num_cells);
    let mut v = vec![CVec::zeros(cfg.bts_antennas); n_users];

    for c in 0..cfg.num_cells {
        let rec = simulate_ul_training(real, &cb, &pilots, &plan, c, cfg.noise_var, seeds.sweep_noise(c))?;
        let blocks = reconstruct_canonical(&rec.epochs, &cb)?;
        let intra = IntraCellPilots::new(
            cfg.users_in(c).map(|m| pilots.scaled(m)).collect(),
            cfg.users_in(c).map(|m| pilots.power(m)).collect(),
        )?;
        let ctx = match id {
            SchemeId::DirectCentral => {
                let others = cfg.interferers_of(c);
                let inter = InterfererPilots::new(
                    others.iter().map(|&m| pilots.scaled(m)).collect(),
                    others.iter().map(|&m| pilots.power(m)).collect(),
                )?;
                Some(ObjectiveContext::DirectCentral(DirectObjective::centralized(
                    blocks.clone(),
                    intra,
                    inter,
                    noise_assumed,
                )))
            }
            SchemeId::DirectDecentral => Some(ObjectiveContext::DirectDecentral(DirectObjective::decentralized(
                blocks.clone(),
                intra,
                noise_assumed,
            ))),
            SchemeId::LsObj => Some(ObjectiveContext::LsResidual(LsObjective::new(blocks.clone(), intra))),
            _ => None,
        };
        let phases = match &ctx {
            Some(ctx) => {
                let res = optimize(ctx, cfg.n_irs, &settings.optimizer, derive_seed(seeds.optimizer, c as u64));
                iterations += res.iterations;
                flags.stalled |= res.stalled;
                res.phases
            }
            None => random_phases(cfg.n_irs, &mut rng_from_seed(derive_seed(seeds.random_irs, c as u64))),
        };
        let w = phases_to_weights(&phases);
        if let Some(ObjectiveContext::LsResidual(ls)) = &ctx {
            flags.ls_clamped |= ls.evaluate(&w)?.clamped;
        }
        let sys = LsSystem::new(blocks.synthesize(&w)?);
        flags.pinv_used |= sys.pinv_used();
        for k in cfg.users_in(c) {
            v[k] = sys.filter(&pilots.scaled(k));
        }
        irs.push(w);
    }

    if n_fb > 0 {
        let dl_pilots = PilotSet::build(
            settings.pilot_kind,
            &vec![1.0; n_users],
            cfg.pilot_len,
            LinkDirection::Downlink,
            seeds.dl_pilots,
        )?;
        for round in 0..n_fb as u64 {
            // forward: BTSs precode with their scaled receive filters
            let f = dl_precoders(cfg, &v);
            let fwd = derive_seed(seeds.fb_noise, 2 * round);
            for (k, uk) in u.iter_mut().enumerate() {
                let y = simulate_dl_training(real, cfg, &dl_pilots, &f, &irs, k, cfg.noise_var, derive_seed(fwd, k as u64))?;
                let sys = LsSystem::new(y);
                flags.pinv_used |= sys.pinv_used();
                *uk = sys.filter(&dl_pilots.scaled(k));
            }
            // backward: UEs precode with their normalized conjugate combiners
            let plan = StreamPlan::one_per_user(&u.iter().map(ul_precoder).collect::<Vec<_>>());
            let bwd = derive_seed(seeds.fb_noise, 2 * round + 1);
            for (c, w) in irs.iter().enumerate() {
                let mut rng = rng_from_seed(derive_seed(bwd, c as u64));
                let y = receive_ul(real, c, w, &pilots, &plan, cfg.noise_var, &mut rng)?;
                let sys = LsSystem::new(y);
                flags.pinv_used |= sys.pinv_used();
                for k in cfg.users_in(c) {
                    v[k] = sys.filter(&pilots.scaled(k));
                }
            }
        }
    }

    Ok(DirectOutcome {
        transceivers: Transceivers {
            irs,
            bts_filters: v,
            ue_combiners: u,
        },
        iterations,
        flags,
    })
}
