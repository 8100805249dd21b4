//! Least-squares and MMSE filters, projection statistics, and correlation
//! based channel estimates.
//!
//! All LS quantities derive from the minimum-norm solution
//! `v = (Y^H)^+ b` of `min_v ||b - Y^H v||`. When the Gram matrix `Y Y^H` is
//! well conditioned this is `(Y Y^H)^{-1} Y b`; otherwise (for instance
//! `T < M_R`) an SVD pseudo-inverse is used and the result is flagged.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, Dyn};

use crate::airlink::{PilotSet, StreamPlan, TrainingRecord};
use crate::codebook::{reconstruct_canonical, Codebook};
use crate::linalg::{pinv, well_conditioned_cholesky};
use crate::topology::{AffineChannel, NetworkRealization};
use crate::{CMat, CVec, Error, Result, C64};

enum Solver {
    Gram(Cholesky<C64, Dyn>),
    /// `(Y^H)^+`, `M x T`.
    Pinv(CMat),
}

/// Factorized LS system for one received block `Y` (`M x T`).
pub struct LsSystem {
    y: CMat,
    solver: Solver,
}

impl LsSystem {
    pub fn new(y: CMat) -> Self {
        let gram = &y * y.adjoint();
        let solver = match well_conditioned_cholesky(&gram) {
            Some(chol) => Solver::Gram(chol),
            None => Solver::Pinv(pinv(&y.adjoint())),
        };
        Self { y, solver }
    }

    pub fn y(&self) -> &CMat {
        &self.y
    }

    pub fn pinv_used(&self) -> bool {
        matches!(self.solver, Solver::Pinv(_))
    }

    /// LS filter `v = (Y^H)^+ b`.
    pub fn filter(&self, b: &CVec) -> CVec {
        match &self.solver {
            Solver::Gram(chol) => chol.solve(&(&self.y * b)),
            Solver::Pinv(p) => p * b,
        }
    }

    /// `(Y Y^H)^{-1} x`, only on the well-conditioned path.
    pub fn gram_solve(&self, x: &CVec) -> Option<CVec> {
        match &self.solver {
            Solver::Gram(chol) => Some(chol.solve(x)),
            Solver::Pinv(_) => None,
        }
    }

    fn check(&self, b: &CVec) -> Result<()> {
        if b.len() != self.y.ncols() {
            return Err(Error::dim("pilot length", self.y.ncols(), b.len()));
        }
        Ok(())
    }
}

/// LS receive filter plus whether the pseudo-inverse path was taken.
#[derive(Clone, Debug)]
pub struct LsFilter {
    pub v: CVec,
    pub pinv_used: bool,
}

/// `v_k = (Y Y^H)^{-1} Y b_k`, minimizing `||b_k^H - v_k^H Y||^2`.
pub fn ls_filter(y: &CMat, b: &CVec) -> Result<LsFilter> {
    let sys = LsSystem::new(y.clone());
    sys.check(b)?;
    Ok(LsFilter {
        v: sys.filter(b),
        pinv_used: sys.pinv_used(),
    })
}

/// `b_k^H Y^H (Y Y^H)^{-1} Y b_m`.
pub fn proj_stat(y: &CMat, bk: &CVec, bm: &CVec) -> Result<C64> {
    let sys = LsSystem::new(y.clone());
    sys.check(bk)?;
    sys.check(bm)?;
    Ok((y * bk).dotc(&sys.filter(bm)))
}

/// `b^H Y^+ (Y^H)^+ b = ||(Y^H)^+ b||^2`.
pub fn noise_quadratic(y: &CMat, b: &CVec) -> Result<f64> {
    let sys = LsSystem::new(y.clone());
    sys.check(b)?;
    Ok(sys.filter(b).norm_squared())
}

/// `b^H (I - P) b`, the LS residual energy.
pub fn ls_residual(y: &CMat, b: &CVec) -> Result<f64> {
    let sys = LsSystem::new(y.clone());
    sys.check(b)?;
    let v = sys.filter(b);
    Ok((b - y.adjoint() * v).norm_squared())
}

/// Interference-plus-noise covariance `sum_m p_m h_m h_m^H + noise I`.
pub fn covariance(channels: &[CVec], powers: &[f64], noise_var: f64) -> CMat {
    let m = channels.first().map_or(0, |h| h.len());
    let mut r = CMat::identity(m, m) * C64::from(noise_var);
    for (h, &p) in channels.iter().zip(powers) {
        r.ger(C64::from(p), h, &h.map(|z| z.conj()), C64::from(1.0));
    }
    r
}

/// MMSE filter `(sum_m p_m h_m h_m^H + noise I)^{-1} h_k p_k`.
pub fn mmse_filter(channels: &[CVec], powers: &[f64], noise_var: f64, k: usize) -> Result<CVec> {
    if channels.len() != powers.len() || k >= channels.len() {
        return Err(Error::dim("mmse_filter users", channels.len(), powers.len()));
    }
    let r = covariance(channels, powers, noise_var);
    let chol = Cholesky::new(r).ok_or_else(|| {
        Error::InvalidConfig("MMSE covariance is not positive definite".into())
    })?;
    Ok(chol.solve(&channels[k]) * C64::from(powers[k]))
}

/// Which users a BTS estimates channels for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsiScope {
    IntraOnly,
    AllUsers,
}

/// Estimated (or exact) channel of one user at one BTS, split into the
/// direct part and one reflected path per IRS element.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEstimate {
    /// `M_R x N_T`
    pub direct: CMat,
    /// `cascade[j]`: `M_R x N_T` contribution of element `j` at unit weight.
    pub cascade: Vec<CMat>,
}

impl ChannelEstimate {
    pub fn composite(&self, w: &CVec) -> CMat {
        let mut h = self.direct.clone();
        for (c, &wj) in self.cascade.iter().zip(w.iter()) {
            h += c * wj;
        }
        h
    }

    /// The channel after UL precoder `g`, as an affine function of `w`.
    pub fn effective(&self, g: &CVec) -> AffineChannel {
        let offset = &self.direct * g;
        let mut slope = CMat::zeros(self.direct.nrows(), self.cascade.len());
        for (j, c) in self.cascade.iter().enumerate() {
            slope.set_column(j, &(c * g));
        }
        AffineChannel { offset, slope }
    }
}

/// Channel knowledge of one BTS, keyed by global user index.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiEstimate {
    pub scope: CsiScope,
    pub users: BTreeMap<usize, ChannelEstimate>,
}

impl CsiEstimate {
    /// Perfect knowledge of the listed users' channels at BTS `cell`.
    pub fn exact(real: &NetworkRealization, cell: usize, users: &[usize], scope: CsiScope) -> Self {
        let n = real.n_irs();
        let map = users
            .iter()
            .map(|&m| {
                let est = ChannelEstimate {
                    direct: real.direct[cell][m].clone(),
                    cascade: (0..n).map(|j| real.element_path(cell, m, j)).collect(),
                };
                (m, est)
            })
            .collect();
        Self { scope, users: map }
    }

    pub fn get(&self, user: usize) -> Option<&ChannelEstimate> {
        self.users.get(&user)
    }
}

/// Correlation-based LS channel estimates from a codebook sweep.
///
/// Each stream `s` in `plan` belongs to a user and (for MIMO training) a
/// unit-vector antenna precoder; only users in `users_in_scope` are
/// estimated and pilots of other users are never read. With `joint` set the
/// in-scope streams are solved jointly by least squares instead of by
/// per-stream correlation.
pub fn estimate_csi(
    record: &TrainingRecord,
    cb: &Codebook,
    pilots: &PilotSet,
    plan: &StreamPlan,
    users_in_scope: &[usize],
    scope: CsiScope,
    joint: bool,
) -> Result<CsiEstimate> {
    let blocks = reconstruct_canonical(&record.epochs, cb)?;
    let t = blocks.pilot_len();
    if pilots.pilot_len() != t {
        return Err(Error::dim("estimate_csi pilot length", t, pilots.pilot_len()));
    }
    let streams: Vec<usize> = (0..plan.len())
        .filter(|&s| users_in_scope.contains(&plan.owners[s]))
        .collect();

    // combining vectors: Y c_s estimates stream s's effective channel H g_s
    let combiners: Vec<CVec> = if joint {
        let b = CMat::from_columns(&streams.iter().map(|&s| pilots.scaled(s)).collect::<Vec<_>>());
        let gram_inv = pinv(&(b.adjoint() * &b));
        (0..streams.len()).map(|i| &b * gram_inv.column(i)).collect()
    } else {
        streams
            .iter()
            .map(|&s| pilots.scaled(s) / C64::from(t as f64 * pilots.power(s)))
            .collect()
    };

    let mut users = BTreeMap::new();
    for &m in users_in_scope {
        let mine: Vec<(usize, &CVec)> = streams
            .iter()
            .zip(&combiners)
            .filter(|(&s, _)| plan.owners[s] == m)
            .map(|(&s, c)| (s, c))
            .collect();
        let n_t = mine.first().map_or(0, |(s, _)| plan.precoders[*s].len());
        let m_r = blocks.rows();
        let mut direct = CMat::zeros(m_r, n_t);
        let mut cascade = vec![CMat::zeros(m_r, n_t); blocks.n_irs()];
        for (s, comb) in &mine {
            // H_hat += (H g) g^H, exact when a user's precoders are orthonormal
            let g = &plan.precoders[*s];
            let d = blocks.y0() * *comb;
            let per_elem: Vec<CVec> = blocks.deltas().iter().map(|dj| dj * *comb).collect();
            for a in 0..n_t {
                let ga = g[a].conj();
                if ga == C64::from(0.0) {
                    continue;
                }
                let mut col = direct.column_mut(a);
                col += &d * ga;
                for (j, pj) in per_elem.iter().enumerate() {
                    let mut cc = cascade[j].column_mut(a);
                    cc += pj * ga;
                }
            }
        }
        users.insert(m, ChannelEstimate { direct, cascade });
    }
    Ok(CsiEstimate { scope, users })
}
