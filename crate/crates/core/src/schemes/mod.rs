//! The seven compared schemes, run end to end on one network realization.
//!
//! CSI schemes train once in the UL, estimate channels (or read the true
//! ones) and run Max-SINR alternation offline. Direct schemes optimize the
//! IRS straight from the UL training sweep; with multi-antenna UEs they then
//! refine the filters by bi-directional training. Every scheme is scored
//! with the true channels.

mod bidirectional;
mod maxsinr;

use std::fmt;
use std::str::FromStr;

pub use bidirectional::{bidirectional_train, DirectOutcome};
pub use maxsinr::{max_sinr_alternate, MaxSinrOutcome};

use crate::airlink::{LinkDirection, PilotKind, PilotSet, StreamPlan};
use crate::codebook::CodebookKind;
use crate::filters::{estimate_csi, CsiEstimate, CsiScope};
use crate::linalg::{conj, normalized};
use crate::objectives::true_sinr;
use crate::phaseopt::OptimizerSettings;
use crate::random::derive_seed;
use crate::topology::{compose_channel, db_to_linear, NetworkRealization, SystemConfig};
use crate::{CVec, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    PerfectCsi,
    FullChanEst,
    PartialChanEst,
    DirectCentral,
    DirectDecentral,
    LsObj,
    RandomTheta,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::PerfectCsi,
        SchemeId::FullChanEst,
        SchemeId::PartialChanEst,
        SchemeId::DirectCentral,
        SchemeId::DirectDecentral,
        SchemeId::LsObj,
        SchemeId::RandomTheta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PerfectCsi => "perfect_csi",
            Self::FullChanEst => "full_chan_est",
            Self::PartialChanEst => "partial_chan_est",
            Self::DirectCentral => "direct_central",
            Self::DirectDecentral => "direct_decentral",
            Self::LsObj => "ls_obj",
            Self::RandomTheta => "random_theta",
        }
    }

    /// Column name used in CSV output.
    pub fn csv_label(self) -> &'static str {
        match self {
            Self::PerfectCsi => "Perfect_CSI",
            Self::FullChanEst => "Channel_Est",
            Self::PartialChanEst => "Channel_Est-NoIntf",
            Self::DirectCentral => "PreciseObj",
            Self::DirectDecentral => "NoIntf",
            Self::LsObj => "LogLSObj",
            Self::RandomTheta => "RandomTheta",
        }
    }

    pub fn uses_csi(self) -> bool {
        matches!(self, Self::PerfectCsi | Self::FullChanEst | Self::PartialChanEst)
    }

    /// Whether the scheme runs bi-directional training under `cfg`.
    pub fn uses_bidirectional(self, cfg: &SystemConfig) -> bool {
        !self.uses_csi() && !cfg.is_miso()
    }

    /// Pilot symbols spent on training.
    pub fn training_symbols(self, cfg: &SystemConfig) -> usize {
        let sweep = cfg.pilot_len * (cfg.n_irs + 1);
        match self {
            Self::PerfectCsi => 0,
            _ if self.uses_bidirectional(cfg) => sweep + 2 * cfg.n_fb * cfg.pilot_len,
            _ => sweep,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s || id.csv_label() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|id| id.name()).collect();
                Error::Unsupported(format!("unknown scheme `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Knobs shared by all schemes.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSettings {
    pub optimizer: OptimizerSettings,
    /// Max-SINR alternations of the CSI schemes.
    pub n_alt: usize,
    /// Error of the assumed noise variance, in dB.
    pub noise_mismatch_db: f64,
    pub codebook: CodebookKind,
    pub pilot_kind: PilotKind,
    /// Joint LS instead of per-user correlation in channel estimation.
    pub joint_csi: bool,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerSettings::default(),
            n_alt: 3,
            noise_mismatch_db: 0.0,
            codebook: CodebookKind::Dft,
            pilot_kind: PilotKind::RandomBinary,
            joint_csi: false,
        }
    }
}

impl SchemeSettings {
    pub fn assumed_noise(&self, cfg: &SystemConfig) -> f64 {
        cfg.noise_var * db_to_linear(self.noise_mismatch_db)
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.n_alt == 0 {
            return Err(Error::InvalidConfig("n_alt must be at least 1".into()));
        }
        if !self.noise_mismatch_db.is_finite() {
            return Err(Error::InvalidConfig("noise_mismatch_db must be finite".into()));
        }
        Ok(())
    }
}

/// Seeds of every random draw in one trial. All schemes of a trial share
/// them, so their comparison is paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub realization: u64,
    pub ul_pilots: u64,
    pub ul_noise: u64,
    pub dl_pilots: u64,
    pub fb_noise: u64,
    pub random_irs: u64,
    pub optimizer: u64,
}

impl TrialSeeds {
    pub fn new(base: u64, trial: u64) -> Self {
        let root = derive_seed(base, trial);
        Self {
            realization: derive_seed(root, 1),
            ul_pilots: derive_seed(root, 2),
            ul_noise: derive_seed(root, 3),
            dl_pilots: derive_seed(root, 4),
            fb_noise: derive_seed(root, 5),
            random_irs: derive_seed(root, 6),
            optimizer: derive_seed(root, 7),
        }
    }

    /// Receiver noise of the training sweep at BTS `cell`.
    pub fn sweep_noise(&self, cell: usize) -> u64 {
        derive_seed(self.ul_noise, cell as u64)
    }
}

/// Diagnostics attached to a result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SchemeFlags {
    /// Some line search ran out of backtracking steps.
    pub stalled: bool,
    /// Some LS filter needed the pseudo-inverse.
    pub pinv_used: bool,
    /// The LS objective hit its residual floor at the final weights.
    pub ls_clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeResult {
    pub scheme: SchemeId,
    pub per_user_dl_rate: Vec<f64>,
    pub dl_sum_rate: f64,
    pub per_user_ul_rate: Vec<f64>,
    pub ul_sum_rate: f64,
    pub training_symbols_used: usize,
    /// Optimizer iterations summed over cells and alternations.
    pub iterations: usize,
    pub flags: SchemeFlags,
}

/// Final state of every node, indexed by cell (IRS) or global user.
#[derive(Clone, Debug, PartialEq)]
pub struct Transceivers {
    pub irs: Vec<CVec>,
    /// BTS receive filter `v_m` of each user's UL stream.
    pub bts_filters: Vec<CVec>,
    /// UE combiner `u_m`; the UL precoder is `conj(u_m)` normalized.
    pub ue_combiners: Vec<CVec>,
}

/// `f_m = sigma conj(v_m) / ||v_m||`.
pub fn dl_precoders(cfg: &SystemConfig, bts_filters: &[CVec]) -> Vec<CVec> {
    bts_filters
        .iter()
        .map(|v| conj(&normalized(v)) * C64::from(cfg.tx_amplitude()))
        .collect()
}

/// Unit-norm UL precoder `conj(u) / ||u||` of a UE combiner.
pub fn ul_precoder(u: &CVec) -> CVec {
    normalized(&conj(u))
}

/// True DL SINR of every user.
pub fn dl_sinrs(real: &NetworkRealization, cfg: &SystemConfig, tr: &Transceivers) -> Result<Vec<f64>> {
    let f = dl_precoders(cfg, &tr.bts_filters);
    (0..cfg.total_users())
        .map(|k| {
            // reciprocal channel seen by UE k from each BTS, combined by u_k
            let mut streams = Vec::with_capacity(cfg.total_users());
            for c in 0..cfg.num_cells {
                let h_dl = compose_channel(real, c, k, &tr.irs[c])?.transpose();
                for m in cfg.users_in(c) {
                    streams.push(&h_dl * &f[m]);
                }
            }
            Ok(true_sinr(&streams, &vec![1.0; streams.len()], &tr.ue_combiners[k], k, cfg.noise_var))
        })
        .collect()
}

/// True UL SINR of every user at its serving BTS.
pub fn ul_sinrs(real: &NetworkRealization, cfg: &SystemConfig, tr: &Transceivers) -> Result<Vec<f64>> {
    let g: Vec<CVec> = tr.ue_combiners.iter().map(ul_precoder).collect();
    let powers = vec![cfg.tx_power; cfg.total_users()];
    let mut out = Vec::with_capacity(cfg.total_users());
    for c in 0..cfg.num_cells {
        let hs = (0..cfg.total_users())
            .map(|m| Ok(compose_channel(real, c, m, &tr.irs[c])? * &g[m]))
            .collect::<Result<Vec<CVec>>>()?;
        for k in cfg.users_in(c) {
            out.push(true_sinr(&hs, &powers, &tr.bts_filters[k], k, cfg.noise_var));
        }
    }
    Ok(out)
}

fn rates(sinrs: &[f64]) -> Vec<f64> {
    sinrs.iter().map(|s| (1.0 + s).log2()).collect()
}

/// Scores transceivers with the true channels.
pub fn evaluate(
    id: SchemeId,
    real: &NetworkRealization,
    cfg: &SystemConfig,
    tr: &Transceivers,
    iterations: usize,
    flags: SchemeFlags,
) -> Result<SchemeResult> {
    let dl = rates(&dl_sinrs(real, cfg, tr)?);
    let ul = rates(&ul_sinrs(real, cfg, tr)?);
    if dl.iter().chain(&ul).any(|r| !r.is_finite()) {
        return Err(Error::Unsupported(format!("{id}: non-finite rate")));
    }
    Ok(SchemeResult {
        scheme: id,
        dl_sum_rate: dl.iter().sum(),
        per_user_dl_rate: dl,
        ul_sum_rate: ul.iter().sum(),
        per_user_ul_rate: ul,
        training_symbols_used: id.training_symbols(cfg),
        iterations,
        flags,
    })
}

/// UL pilots of the shared training sweep, one per user.
pub fn sweep_pilots(cfg: &SystemConfig, settings: &SchemeSettings, seeds: &TrialSeeds) -> Result<PilotSet> {
    let amps = vec![cfg.tx_amplitude(); cfg.total_users()];
    PilotSet::build(settings.pilot_kind, &amps, cfg.pilot_len, LinkDirection::Uplink, seeds.ul_pilots)
}

/// Channel knowledge of every BTS for a CSI scheme.
fn csi_knowledge(
    id: SchemeId,
    real: &NetworkRealization,
    cfg: &SystemConfig,
    settings: &SchemeSettings,
    seeds: &TrialSeeds,
) -> Result<Vec<CsiEstimate>> {
    let all: Vec<usize> = (0..cfg.total_users()).collect();
    if id == SchemeId::PerfectCsi {
        return Ok((0..cfg.num_cells)
            .map(|c| CsiEstimate::exact(real, c, &all, CsiScope::AllUsers))
            .collect());
    }
    let cb = crate::codebook::build_codebook(cfg.n_irs, settings.codebook)?;
    // MISO: the same sweep as the direct schemes. MIMO: every antenna sends
    // its own pilot and the user's power is split across them.
    let (pilots, plan) = if cfg.is_miso() {
        let ones = vec![CVec::from_element(1, C64::from(1.0)); cfg.total_users()];
        (sweep_pilots(cfg, settings, seeds)?, StreamPlan::one_per_user(&ones))
    } else {
        let n = cfg.total_users() * cfg.ue_antennas;
        let amp = (cfg.tx_power / cfg.ue_antennas as f64).sqrt();
        let seed = derive_seed(seeds.ul_pilots, 0xA);
        (
            PilotSet::build(settings.pilot_kind, &vec![amp; n], cfg.pilot_len, LinkDirection::Uplink, seed)?,
            StreamPlan::per_antenna(cfg.total_users(), cfg.ue_antennas),
        )
    };
    (0..cfg.num_cells)
        .map(|c| {
            let rec = crate::airlink::simulate_ul_training(real, &cb, &pilots, &plan, c, cfg.noise_var, seeds.sweep_noise(c))?;
            let (users, scope): (Vec<usize>, _) = match id {
                SchemeId::PartialChanEst => (cfg.users_in(c).collect(), CsiScope::IntraOnly),
                _ => (all.clone(), CsiScope::AllUsers),
            };
            estimate_csi(&rec, &cb, &pilots, &plan, &users, scope, settings.joint_csi)
        })
        .collect()
}

/// Runs one scheme on one realization.
pub fn run_scheme(
    id: SchemeId,
    real: &NetworkRealization,
    cfg: &SystemConfig,
    settings: &SchemeSettings,
    seeds: &TrialSeeds,
) -> Result<SchemeResult> {
    if id.uses_csi() {
        let csi = csi_knowledge(id, real, cfg, settings, seeds)?;
        let noise = if id == SchemeId::PerfectCsi {
            cfg.noise_var
        } else {
            settings.assumed_noise(cfg)
        };
        let out = max_sinr_alternate(&csi, cfg, &settings.optimizer, settings.n_alt, noise)?;
        let flags = SchemeFlags {
            stalled: out.stalled,
            ..SchemeFlags::default()
        };
        evaluate(id, real, cfg, &out.transceivers, out.iterations, flags)
    } else {
        let n_fb = if cfg.is_miso() { 0 } else { cfg.n_fb };
        let out = bidirectional_train(id, real, cfg, settings, seeds, n_fb)?;
        evaluate(id, real, cfg, &out.transceivers, out.iterations, out.flags)
    }
}

/// [`run_scheme`] restricted to single-antenna UEs.
pub fn run_miso_scheme(
    id: SchemeId,
    real: &NetworkRealization,
    cfg: &SystemConfig,
    settings: &SchemeSettings,
    seeds: &TrialSeeds,
) -> Result<SchemeResult> {
    if !cfg.is_miso() {
        return Err(Error::InvalidConfig(format!(
            "run_miso_scheme needs ue_antennas = 1, got {}",
            cfg.ue_antennas
        )));
    }
    run_scheme(id, real, cfg, settings, seeds)
}
