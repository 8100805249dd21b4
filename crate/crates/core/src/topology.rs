//! Network geometry: configuration, random channel draws and composite
//! IRS-assisted channels.
//!
//! Users are indexed network-wide: user `m` belongs to cell
//! `m / users_per_cell`. For every BTS `c` the realization stores the
//! direct channel and the UE-to-IRS channel of every user, and the LoS-heavy
//! BTS-to-IRS channel of its own IRS. An IRS never reflects towards another
//! cell's BTS, so the composite channel seen by BTS `c` only involves IRS `c`.

use std::f64::consts::TAU;
use std::ops::Range;

use rand::Rng;

use crate::random::{complex_gaussian_matrix, rng_from_seed, uniform_phase};
use crate::{CMat, CVec, Error, Result, C64};

/// Physical and training parameters shared by every scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub num_cells: usize,
    /// `K`: served users per cell.
    pub users_per_cell: usize,
    /// `N_IRS`: reflecting elements per IRS. Zero disables the IRS.
    pub n_irs: usize,
    /// `M_R`
    pub bts_antennas: usize,
    /// `N_T`, 1 for MISO links.
    pub ue_antennas: usize,
    /// Rician factor of the BTS-to-IRS channel (0 = full scattering).
    pub rician_factor: f64,
    /// Linear power scale of every cross-cell UE channel.
    pub cross_gain: f64,
    /// Per-user transmit power (linear).
    pub tx_power: f64,
    /// Receiver noise variance (linear).
    pub noise_var: f64,
    /// `T`: pilot symbols per training block.
    pub pilot_len: usize,
    /// Forward-backward iterations of bi-directional training.
    pub n_fb: usize,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_cells: 2,
            users_per_cell: 2,
            n_irs: 16,
            bts_antennas: 6,
            ue_antennas: 1,
            rician_factor: 10.0,
            cross_gain: db_to_linear(-3.0),
            tx_power: 1.0,
            noise_var: db_to_linear(10.0),
            pilot_len: 16,
            n_fb: 2,
            rng_seed: 1,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_cells", self.num_cells),
            ("users_per_cell", self.users_per_cell),
            ("bts_antennas", self.bts_antennas),
            ("ue_antennas", self.ue_antennas),
            ("pilot_len", self.pilot_len),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(self.rician_factor >= 0.0) {
            return Err(Error::InvalidConfig("rician_factor must be >= 0".into()));
        }
        if !(self.cross_gain > 0.0 && self.cross_gain <= 1.0) {
            return Err(Error::InvalidConfig("cross_gain must lie in (0, 1]".into()));
        }
        if !(self.tx_power > 0.0 && self.tx_power.is_finite()) {
            return Err(Error::InvalidConfig("tx_power must be positive".into()));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidConfig("noise_var must be positive".into()));
        }
        Ok(())
    }

    pub fn total_users(&self) -> usize {
        self.num_cells * self.users_per_cell
    }

    /// `L`: interferers seen by each BTS.
    pub fn interferers_per_cell(&self) -> usize {
        (self.num_cells - 1) * self.users_per_cell
    }

    pub fn cell_of(&self, user: usize) -> usize {
        user / self.users_per_cell
    }

    pub fn users_in(&self, cell: usize) -> Range<usize> {
        cell * self.users_per_cell..(cell + 1) * self.users_per_cell
    }

    /// Users of every other cell, in global order.
    pub fn interferers_of(&self, cell: usize) -> Vec<usize> {
        (0..self.total_users())
            .filter(|&m| self.cell_of(m) != cell)
            .collect()
    }

    pub fn tx_amplitude(&self) -> f64 {
        self.tx_power.sqrt()
    }

    pub fn is_miso(&self) -> bool {
        self.ue_antennas == 1
    }
}

/// One random draw of every channel in the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkRealization {
    /// `direct[c][m]`: `M_R x N_T`, BTS `c` to user `m`.
    pub direct: Vec<Vec<CMat>>,
    /// `ue_to_irs[c][m]`: `N_IRS x N_T`, user `m` to IRS of cell `c`.
    pub ue_to_irs: Vec<Vec<CMat>>,
    /// `bts_to_irs[c]`: `N_IRS x M_R`.
    pub bts_to_irs: Vec<CMat>,
}

/// Unit-modulus IRS weights of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct IrsState {
    w: CVec,
}

impl IrsState {
    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            w: crate::linalg::phases_to_weights(phases),
        }
    }

    /// Fails unless every entry has unit modulus (to 1e-9).
    pub fn from_weights(w: CVec) -> Result<Self> {
        if let Some(bad) = w.iter().find(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "IRS weight {bad} is not unit modulus"
            )));
        }
        Ok(Self { w })
    }

    pub fn random<R: Rng + ?Sized>(n_irs: usize, rng: &mut R) -> Self {
        let phases: Vec<f64> = (0..n_irs).map(|_| uniform_phase(rng)).collect();
        Self::from_phases(&phases)
    }

    pub fn weights(&self) -> &CVec {
        &self.w
    }

    pub fn phases(&self) -> Vec<f64> {
        crate::linalg::weights_to_phases(&self.w)
    }
}

/// Draws a realization. Intra-cell UE channels are unit variance, cross-cell
/// ones `cross_gain`; the BTS-to-IRS channel mixes a rank-one unit-modulus
/// LoS matrix with unit-variance scattering according to the Rician factor.
pub fn draw_realization(cfg: &SystemConfig, seed: u64) -> NetworkRealization {
    let mut rng = rng_from_seed(seed);
    let (n, m_r, n_t) = (cfg.n_irs, cfg.bts_antennas, cfg.ue_antennas);
    let users = cfg.total_users();
    let beta = cfg.rician_factor;
    let (los_w, nlos_w) = if beta.is_infinite() {
        (1.0, 0.0)
    } else {
        ((beta / (1.0 + beta)).sqrt(), (1.0 / (1.0 + beta)).sqrt())
    };

    let mut bts_to_irs = Vec::with_capacity(cfg.num_cells);
    for _ in 0..cfg.num_cells {
        let a: Vec<C64> = (0..n).map(|_| C64::from_polar(1.0, rng.random_range(0.0..TAU))).collect();
        let b: Vec<C64> = (0..m_r).map(|_| C64::from_polar(1.0, rng.random_range(0.0..TAU))).collect();
        let scatter = complex_gaussian_matrix(&mut rng, n, m_r, 1.0);
        let h = CMat::from_fn(n, m_r, |i, j| {
            a[i] * b[j].conj() * los_w + scatter[(i, j)] * nlos_w
        });
        bts_to_irs.push(h);
    }

    let mut direct = Vec::with_capacity(cfg.num_cells);
    let mut ue_to_irs = Vec::with_capacity(cfg.num_cells);
    for c in 0..cfg.num_cells {
        let mut d_row = Vec::with_capacity(users);
        let mut i_row = Vec::with_capacity(users);
        for m in 0..users {
            let var = if cfg.cell_of(m) == c { 1.0 } else { cfg.cross_gain };
            d_row.push(complex_gaussian_matrix(&mut rng, m_r, n_t, var));
            i_row.push(complex_gaussian_matrix(&mut rng, n, n_t, var));
        }
        direct.push(d_row);
        ue_to_irs.push(i_row);
    }

    NetworkRealization {
        direct,
        ue_to_irs,
        bts_to_irs,
    }
}

impl NetworkRealization {
    pub fn num_cells(&self) -> usize {
        self.bts_to_irs.len()
    }

    pub fn n_irs(&self) -> usize {
        self.bts_to_irs.first().map_or(0, |h| h.nrows())
    }

    /// Reflected path of element `j` alone: `(row j of H_IR)^T (row j of H_IT)`.
    pub fn element_path(&self, cell: usize, user: usize, j: usize) -> CMat {
        let hir = &self.bts_to_irs[cell];
        let hit = &self.ue_to_irs[cell][user];
        hir.row(j).transpose() * hit.row(j)
    }
}

/// `direct[c][m] + bts_to_irs[c]^T diag(w) ue_to_irs[c][m]`.
pub fn compose_channel(real: &NetworkRealization, cell: usize, user: usize, w: &CVec) -> Result<CMat> {
    if cell >= real.num_cells() || user >= real.direct[cell].len() {
        return Err(Error::dim("compose_channel index", "existing (cell, user)", format!("({cell}, {user})")));
    }
    let hir = &real.bts_to_irs[cell];
    let hit = &real.ue_to_irs[cell][user];
    if w.len() != hir.nrows() {
        return Err(Error::dim("compose_channel weights", hir.nrows(), w.len()));
    }
    let mut h = real.direct[cell][user].clone();
    for (j, &wj) in w.iter().enumerate() {
        if wj == C64::new(0.0, 0.0) {
            continue;
        }
        for col in 0..h.ncols() {
            let s = wj * hit[(j, col)];
            for row in 0..h.nrows() {
                h[(row, col)] += hir[(j, row)] * s;
            }
        }
    }
    Ok(h)
}

/// Uplink channel of a user as an affine function of the IRS weights, after
/// applying the user's precoder `g`: `h(w) = d + C w`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineChannel {
    pub offset: CVec,
    pub slope: CMat,
}

impl AffineChannel {
    pub fn at(&self, w: &CVec) -> CVec {
        if self.slope.ncols() == 0 {
            self.offset.clone()
        } else {
            &self.offset + &self.slope * w
        }
    }
}

/// True effective channel of `user` at BTS `cell` with UL precoder `g`.
pub fn effective_channel(real: &NetworkRealization, cell: usize, user: usize, g: &CVec) -> AffineChannel {
    let hir = &real.bts_to_irs[cell];
    let hit_g = &real.ue_to_irs[cell][user] * g;
    let offset = &real.direct[cell][user] * g;
    let slope = CMat::from_fn(hir.ncols(), hir.nrows(), |row, j| hir[(j, row)] * hit_g[j]);
    AffineChannel { offset, slope }
}
