//! Pilot sequences and synchronized training receptions.
//!
//! Pilots are `+-1` sequences; every stream is transmitted with an amplitude
//! (the square root of its power), so the *scaled* pilot `sigma * b` is what
//! the correlation statistics operate on.

use rand::Rng;

use crate::codebook::Codebook;
use crate::random::{complex_gaussian, complex_gaussian_matrix, rng_from_seed};
use crate::topology::{compose_channel, NetworkRealization, SystemConfig};
use crate::{CMat, CVec, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkDirection {
    Uplink,
    Downlink,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PilotKind {
    /// iid equiprobable `+-1`.
    RandomBinary,
    /// Rows of a Sylvester-Hadamard matrix; needs `T` a power of two and at
    /// least as many rows as streams.
    Walsh,
}

impl std::str::FromStr for PilotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::RandomBinary),
            "walsh" => Ok(Self::Walsh),
            other => Err(Error::Unsupported(format!(
                "unknown pilot kind `{other}` (expected random or walsh)"
            ))),
        }
    }
}

/// One pilot sequence per stream.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotSet {
    symbols: Vec<CVec>,
    amplitudes: Vec<f64>,
    direction: LinkDirection,
}

impl PilotSet {
    pub fn random(
        amplitudes: &[f64],
        pilot_len: usize,
        direction: LinkDirection,
        seed: u64,
    ) -> Self {
        let mut rng = rng_from_seed(seed);
        let symbols = amplitudes
            .iter()
            .map(|_| {
                CVec::from_fn(pilot_len, |_, _| {
                    C64::from(if rng.random::<bool>() { 1.0 } else { -1.0 })
                })
            })
            .collect();
        Self {
            symbols,
            amplitudes: amplitudes.to_vec(),
            direction,
        }
    }

    pub fn walsh(amplitudes: &[f64], pilot_len: usize, direction: LinkDirection) -> Result<Self> {
        if !pilot_len.is_power_of_two() || pilot_len < amplitudes.len() {
            return Err(Error::InvalidConfig(format!(
                "Walsh pilots need T a power of two with T >= {} streams, got T = {pilot_len}",
                amplitudes.len()
            )));
        }
        let symbols = (0..amplitudes.len())
            .map(|row| {
                CVec::from_fn(pilot_len, |t, _| {
                    C64::from(if (row & t).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
                })
            })
            .collect();
        Ok(Self {
            symbols,
            amplitudes: amplitudes.to_vec(),
            direction,
        })
    }

    pub fn build(
        kind: PilotKind,
        amplitudes: &[f64],
        pilot_len: usize,
        direction: LinkDirection,
        seed: u64,
    ) -> Result<Self> {
        match kind {
            PilotKind::RandomBinary => Ok(Self::random(amplitudes, pilot_len, direction, seed)),
            PilotKind::Walsh => Self::walsh(amplitudes, pilot_len, direction),
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn pilot_len(&self) -> usize {
        self.symbols.first().map_or(0, |s| s.len())
    }

    pub fn direction(&self) -> LinkDirection {
        self.direction
    }

    /// Unscaled `+-1` sequence.
    pub fn symbols(&self, stream: usize) -> &CVec {
        &self.symbols[stream]
    }

    pub fn amplitude(&self, stream: usize) -> f64 {
        self.amplitudes[stream]
    }

    pub fn power(&self, stream: usize) -> f64 {
        self.amplitudes[stream].powi(2)
    }

    /// Transmitted sequence `sigma * b`.
    pub fn scaled(&self, stream: usize) -> CVec {
        &self.symbols[stream] * C64::from(self.amplitudes[stream])
    }
}

/// One pilot per network user at the configured transmit power.
pub fn gen_pilots(cfg: &SystemConfig, direction: LinkDirection, seed: u64) -> PilotSet {
    let amps = vec![cfg.tx_amplitude(); cfg.total_users()];
    PilotSet::random(&amps, cfg.pilot_len, direction, seed)
}

/// Which user sends each pilot stream, and through which unit-norm precoder.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamPlan {
    pub owners: Vec<usize>,
    pub precoders: Vec<CVec>,
}

impl StreamPlan {
    /// One stream per user with the given precoders (normalized here).
    pub fn one_per_user(precoders: &[CVec]) -> Self {
        Self {
            owners: (0..precoders.len()).collect(),
            precoders: precoders.iter().map(crate::linalg::normalized).collect(),
        }
    }

    /// One stream per (user, antenna) pair with unit-vector precoders;
    /// stream `m * N_T + a` is antenna `a` of user `m`.
    pub fn per_antenna(users: usize, ue_antennas: usize) -> Self {
        let mut owners = Vec::with_capacity(users * ue_antennas);
        let mut precoders = Vec::with_capacity(users * ue_antennas);
        for m in 0..users {
            for a in 0..ue_antennas {
                owners.push(m);
                precoders.push(CVec::from_fn(ue_antennas, |i, _| C64::from(if i == a { 1.0 } else { 0.0 })));
            }
        }
        Self { owners, precoders }
    }

    pub fn len(&self) -> usize {
        self.owners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owners.is_empty()
    }
}

/// Received training epochs at one receiver.
#[derive(Clone, Debug)]
pub struct TrainingRecord {
    pub epochs: Vec<CMat>,
    pub noise_var: f64,
}

/// One uplink block at BTS `cell` with its IRS set to `w`:
/// `sum_s H~_{owner(s)}(w) g_s sigma_s b_s^H + N`.
pub fn receive_ul<R: Rng + ?Sized>(
    real: &NetworkRealization,
    cell: usize,
    w: &CVec,
    pilots: &PilotSet,
    plan: &StreamPlan,
    noise_var: f64,
    rng: &mut R,
) -> Result<CMat> {
    if pilots.len() != plan.len() {
        return Err(Error::dim("uplink streams", plan.len(), pilots.len()));
    }
    let m_r = real.bts_to_irs[cell].ncols();
    let t = pilots.pilot_len();
    let mut y = if noise_var > 0.0 {
        complex_gaussian_matrix(rng, m_r, t, noise_var)
    } else {
        CMat::zeros(m_r, t)
    };
    for s in 0..plan.len() {
        let h = compose_channel(real, cell, plan.owners[s], w)?;
        if h.ncols() != plan.precoders[s].len() {
            return Err(Error::dim("uplink precoder", h.ncols(), plan.precoders[s].len()));
        }
        let hg = h * &plan.precoders[s];
        y += hg * pilots.scaled(s).adjoint();
    }
    Ok(y)
}

/// Full codebook sweep at BTS `cell`: all streams repeat their pilots once
/// per codebook epoch while IRS `cell` cycles through the codebook.
pub fn simulate_ul_training(
    real: &NetworkRealization,
    cb: &Codebook,
    pilots: &PilotSet,
    plan: &StreamPlan,
    cell: usize,
    noise_var: f64,
    seed: u64,
) -> Result<TrainingRecord> {
    let mut rng = rng_from_seed(seed);
    let epochs = cb
        .thetas()
        .iter()
        .map(|theta| receive_ul(real, cell, theta, pilots, plan, noise_var, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingRecord { epochs, noise_var })
}

/// Downlink block received by `ue`: every BTS `c` sends
/// `sum_k f_k sigma_k b_k^H` for its own users through its reciprocal
/// composite channel `H~_{c,ue}(w_c)^T`.
///
/// `precoders[m]` is the BTS-side precoder of user `m`'s stream, and
/// `pilots` holds one forward pilot per network user.
pub fn simulate_dl_training(
    real: &NetworkRealization,
    cfg: &SystemConfig,
    pilots: &PilotSet,
    precoders: &[CVec],
    irs: &[CVec],
    ue: usize,
    noise_var: f64,
    seed: u64,
) -> Result<CMat> {
    if precoders.len() != cfg.total_users() || pilots.len() != cfg.total_users() {
        return Err(Error::dim("downlink streams", cfg.total_users(), precoders.len().min(pilots.len())));
    }
    if irs.len() != cfg.num_cells {
        return Err(Error::dim("downlink IRS states", cfg.num_cells, irs.len()));
    }
    let mut rng = rng_from_seed(seed);
    let n_t = cfg.ue_antennas;
    let t = pilots.pilot_len();
    let mut y = CMat::from_fn(n_t, t, |_, _| {
        if noise_var > 0.0 {
            complex_gaussian(&mut rng, noise_var)
        } else {
            C64::from(0.0)
        }
    });
    for c in 0..cfg.num_cells {
        let h_dl = compose_channel(real, c, ue, &irs[c])?.transpose();
        for m in cfg.users_in(c) {
            let f = &precoders[m];
            if f.len() != h_dl.ncols() {
                return Err(Error::dim("downlink precoder", h_dl.ncols(), f.len()));
            }
            y += (&h_dl * f) * pilots.scaled(m).adjoint();
        }
    }
    Ok(y)
}
