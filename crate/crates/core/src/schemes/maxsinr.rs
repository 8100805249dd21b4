use crate::filters::{mmse_filter, CsiEstimate};
use crate::linalg::phases_to_weights;
use crate::objectives::{CsiObjective, FixedFilterObjective, ObjectiveContext};
use crate::phaseopt::{ascend, greedy_init, OptimizerSettings};
use crate::topology::{AffineChannel, SystemConfig};
use crate::{CVec, Error, Result, C64};

use super::{dl_precoders, ul_precoder, Transceivers};

#[derive(Clone, Debug)]
pub struct MaxSinrOutcome {
    pub transceivers: Transceivers,
    /// CSI-evaluated UL sum rate over all cells before and after each
    /// IRS update.
    pub w_steps: Vec<(f64, f64)>,
    pub iterations: usize,
    pub stalled: bool,
}

struct CellView<'a> {
    csi: &'a CsiEstimate,
    /// Users this BTS has channels for, in ascending order.
    known: Vec<usize>,
    /// Positions of the served users within `known`.
    served: Vec<usize>,
}

impl CellView<'_> {
    fn channels(&self, g: &[CVec]) -> Vec<AffineChannel> {
        self.known
            .iter()
            .map(|&m| self.csi.users[&m].effective(&g[m]))
            .collect()
    }
}

/// Alternates MMSE filter updates with IRS ascent on the CSI-evaluated UL
/// sum rate, `n_alt` times, then refreshes the filters once more.
///
/// `csi[c]` is what BTS `c` knows. With multi-antenna UEs the UE combiners
/// are MMSE against every DL stream whose channel to that UE is known to
/// some BTS, so cross-cell estimates are shared between BTSs.
pub fn max_sinr_alternate(
    csi: &[CsiEstimate],
    cfg: &SystemConfig,
    opt: &OptimizerSettings,
    n_alt: usize,
    noise_var: f64,
) -> Result<MaxSinrOutcome> {
    if csi.len() != cfg.num_cells {
        return Err(Error::dim("max_sinr_alternate cells", cfg.num_cells, csi.len()));
    }
    let cells: Vec<CellView> = csi
        .iter()
        .enumerate()
        .map(|(c, est)| {
            let known: Vec<usize> = est.users.keys().copied().collect();
            let served = cfg
                .users_in(c)
                .map(|k| known.iter().position(|&m| m == k))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::InvalidConfig(format!("BTS {c} lacks CSI of a served user")))?;
            Ok(CellView { csi: est, known, served })
        })
        .collect::<Result<_>>()?;

    let n_users = cfg.total_users();
    let powers = |cell: &CellView| vec![cfg.tx_power; cell.known.len()];
    let mut u = vec![CVec::from_element(cfg.ue_antennas, C64::from(1.0)); n_users];
    let mut g: Vec<CVec> = u.iter().map(ul_precoder).collect();

    let mut phases: Vec<Vec<f64>> = cells
        .iter()
        .map(|cell| {
            let obj = CsiObjective::new(cell.channels(&g), powers(cell), cell.served.clone(), noise_var)?;
            Ok(greedy_init(&ObjectiveContext::EstimatedCsi(obj), cfg.n_irs, opt))
        })
        .collect::<Result<_>>()?;

    let mut v = vec![CVec::zeros(cfg.bts_antennas); n_users];
    let mut w_steps = Vec::with_capacity(n_alt);
    let mut iterations = 0;
    let mut stalled = false;

    for round in 0..=n_alt {
        // filter step
        for (c, cell) in cells.iter().enumerate() {
            let obj = CsiObjective::new(cell.channels(&g), powers(cell), cell.served.clone(), noise_var)?;
            let filters = obj.mmse_filters(&phases_to_weights(&phases[c]))?;
            for (k, vk) in cfg.users_in(c).zip(filters) {
                v[k] = vk;
            }
        }
        if !cfg.is_miso() {
            let irs: Vec<CVec> = phases.iter().map(|p| phases_to_weights(p)).collect();
            u = dl_combiners(&cells, cfg, &irs, &v, noise_var)?;
            g = u.iter().map(ul_precoder).collect();
        }
        if round == n_alt {
            break;
        }
        // IRS step
        let (mut before, mut after) = (0.0, 0.0);
        for (c, cell) in cells.iter().enumerate() {
            let filters = cfg.users_in(c).zip(&cell.served).map(|(k, &i)| (i, v[k].clone())).collect();
            let obj = FixedFilterObjective::new(cell.channels(&g), powers(cell), filters, noise_var)?;
            let res = ascend(&obj, &phases[c], opt);
            before += res.trace[0];
            after += res.value;
            iterations += res.iterations;
            stalled |= res.stalled;
            phases[c] = res.phases;
        }
        w_steps.push((before, after));
    }

    Ok(MaxSinrOutcome {
        transceivers: Transceivers {
            irs: phases.iter().map(|p| phases_to_weights(p)).collect(),
            bts_filters: v,
            ue_combiners: u,
        },
        w_steps,
        iterations,
        stalled,
    })
}

/// MMSE DL combiner of every UE from the DL streams its channel knowledge
/// covers.
fn dl_combiners(cells: &[CellView], cfg: &SystemConfig, irs: &[CVec], v: &[CVec], noise_var: f64) -> Result<Vec<CVec>> {
    let f = dl_precoders(cfg, v);
    (0..cfg.total_users())
        .map(|k| {
            let mut streams = Vec::new();
            let mut own = None;
            for (c, cell) in cells.iter().enumerate() {
                let Some(est) = cell.csi.get(k) else { continue };
                let h_dl = est.composite(&irs[c]).transpose();
                for m in cfg.users_in(c) {
                    if m == k {
                        own = Some(streams.len());
                    }
                    streams.push(&h_dl * &f[m]);
                }
            }
            let own = own.ok_or_else(|| Error::InvalidConfig(format!("no DL channel knowledge for user {k}")))?;
            mmse_filter(&streams, &vec![1.0; streams.len()], noise_var, own)
        })
        .collect()
}
