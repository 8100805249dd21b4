//! SINR and sum-rate objectives as functions of the IRS weights `w`.
//!
//! Two families live here:
//!
//! * CSI objectives evaluate the UL sum rate with MMSE receivers from a set
//!   of (true or estimated) affine channels `h_m(w) = d_m + C_m w`.
//! * Direct objectives never form channel estimates. They synthesize the
//!   reception `Y_w` from the reconstructed training blocks and estimate the
//!   per-user SINR from projections of the pilots onto the row space of
//!   `Y_w`. The decentralized variant only knows intra-cell pilots.
//!
//! Every objective offers an analytic gradient with respect to the phases
//! `phi` (`w_j = e^{j phi_j}`); direct and LS objectives fall back to
//! finite differences when `Y_w Y_w^H` is singular.

use std::f64::consts::LN_2;

use nalgebra::Cholesky;

use crate::codebook::CanonicalBlocks;
use crate::filters::{covariance, LsSystem};
use crate::topology::AffineChannel;
use crate::{CVec, Error, Result, C64};

/// Residual floor of the LS objective.
pub const LS_RESIDUAL_FLOOR: f64 = 1e-12;

/// Literal UL SINR of user `k` with filter `v`; `channels`/`powers` list every
/// user whose signal reaches the receiver (served and interfering).
pub fn true_sinr(channels: &[CVec], powers: &[f64], v: &CVec, k: usize, noise_var: f64) -> f64 {
    let gain = |m: usize| v.dotc(&channels[m]).norm_sqr() * powers[m];
    let signal = gain(k);
    if signal == 0.0 {
        return 0.0;
    }
    let interference: f64 = (0..channels.len()).filter(|&m| m != k).map(gain).sum();
    signal / (interference + noise_var * v.norm_squared())
}

/// `sum_k log2(1 + SINR_k)`.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|&s| (1.0 + s).log2()).sum()
}

/// MMSE of each listed user with the MMSE receiver:
/// `1 - p_k h_k^H R^{-1} h_k`.
pub fn mmse_values(channels: &[CVec], powers: &[f64], noise_var: f64, users: &[usize]) -> Result<Vec<f64>> {
    let r = covariance(channels, powers, noise_var);
    let chol = Cholesky::new(r)
        .ok_or_else(|| Error::InvalidConfig("covariance is not positive definite".into()))?;
    Ok(users
        .iter()
        .map(|&k| 1.0 - powers[k] * channels[k].dotc(&chol.solve(&channels[k])).re)
        .collect())
}

/// Sum rate with MMSE receivers over affine channel models.
#[derive(Clone, Debug)]
pub struct CsiObjective {
    channels: Vec<AffineChannel>,
    powers: Vec<f64>,
    served: Vec<usize>,
    noise_var: f64,
}

impl CsiObjective {
    /// `channels` covers every user the objective accounts for; `served`
    /// indexes into it.
    pub fn new(channels: Vec<AffineChannel>, powers: Vec<f64>, served: Vec<usize>, noise_var: f64) -> Result<Self> {
        if channels.len() != powers.len() {
            return Err(Error::dim("CSI objective powers", channels.len(), powers.len()));
        }
        if served.iter().any(|&k| k >= channels.len()) {
            return Err(Error::dim("CSI objective served users", channels.len(), served.len()));
        }
        Ok(Self {
            channels,
            powers,
            served,
            noise_var,
        })
    }

    pub fn n_irs(&self) -> usize {
        self.channels.first().map_or(0, |c| c.slope.ncols())
    }

    pub fn channels_at(&self, w: &CVec) -> Vec<CVec> {
        self.channels.iter().map(|c| c.at(w)).collect()
    }

    /// MMSE filters of the served users at `w`.
    pub fn mmse_filters(&self, w: &CVec) -> Result<Vec<CVec>> {
        let hs = self.channels_at(w);
        self.served
            .iter()
            .map(|&k| crate::filters::mmse_filter(&hs, &self.powers, self.noise_var, k))
            .collect()
    }

    pub fn value(&self, w: &CVec) -> f64 {
        self.value_and_gradient(w, false).0
    }

    /// Value and, if requested, gradient with respect to the phases of `w`
    /// (assumes `|w_j| = 1`).
    pub fn value_and_gradient(&self, w: &CVec, want_grad: bool) -> (f64, Option<Vec<f64>>) {
        let hs = self.channels_at(w);
        let r = covariance(&hs, &self.powers, self.noise_var);
        let Some(chol) = Cholesky::new(r) else {
            return (f64::NAN, None);
        };
        let mut value = 0.0;
        let mut grad = want_grad.then(|| vec![0.0; w.len()]);
        for &k in &self.served {
            let a = chol.solve(&hs[k]);
            let e = (1.0 - self.powers[k] * hs[k].dotc(&a).re).max(f64::MIN_POSITIVE);
            value -= e.log2();
            if let Some(g) = grad.as_mut() {
                // d e_k = -2 p_k Re(i w_j row_j)
                let mut row: CVec = self.channels[k].slope.ad_mul(&a).map(|z| z.conj());
                for (m, ch) in self.channels.iter().enumerate() {
                    let beta = hs[m].dotc(&a);
                    let s_km = ch.slope.ad_mul(&a).map(|z| z.conj());
                    row -= s_km * (beta * self.powers[m]);
                }
                let scale = 2.0 * self.powers[k] / (e * LN_2);
                for j in 0..w.len() {
                    g[j] += scale * (C64::i() * w[j] * row[j]).re;
                }
            }
        }
        (value, grad)
    }
}

/// UL sum rate over `w` with the receive filters held fixed.
#[derive(Clone, Debug)]
pub struct FixedFilterObjective {
    channels: Vec<AffineChannel>,
    powers: Vec<f64>,
    /// `(index into channels, filter)` per served user.
    filters: Vec<(usize, CVec)>,
    noise_var: f64,
}

impl FixedFilterObjective {
    pub fn new(channels: Vec<AffineChannel>, powers: Vec<f64>, filters: Vec<(usize, CVec)>, noise_var: f64) -> Result<Self> {
        if channels.len() != powers.len() {
            return Err(Error::dim("fixed-filter objective powers", channels.len(), powers.len()));
        }
        if filters.iter().any(|(k, _)| *k >= channels.len()) {
            return Err(Error::dim("fixed-filter objective users", channels.len(), filters.len()));
        }
        Ok(Self {
            channels,
            powers,
            filters,
            noise_var,
        })
    }

    pub fn value(&self, w: &CVec) -> f64 {
        let hs: Vec<CVec> = self.channels.iter().map(|c| c.at(w)).collect();
        let sinrs: Vec<f64> = self
            .filters
            .iter()
            .map(|(k, v)| true_sinr(&hs, &self.powers, v, *k, self.noise_var))
            .collect();
        sum_rate(&sinrs)
    }

    /// Gradient with respect to the phases of `w`.
    pub fn gradient(&self, w: &CVec) -> Vec<f64> {
        let n = w.len();
        let mut grad = vec![0.0; n];
        for (k, v) in &self.filters {
            // a_m = v^H h_m(w), s_m = v^H C_m
            let a: Vec<C64> = self.channels.iter().map(|c| v.dotc(&c.at(w))).collect();
            let s: Vec<CVec> = self.channels.iter().map(|c| c.slope.ad_mul(v).map(|z| z.conj())).collect();
            let num = self.powers[*k] * a[*k].norm_sqr();
            let den: f64 = (0..a.len())
                .filter(|m| m != k)
                .map(|m| self.powers[m] * a[m].norm_sqr())
                .sum::<f64>()
                + self.noise_var * v.norm_squared();
            let total = num + den;
            if num == 0.0 {
                continue;
            }
            // log2(1 + num/den) = log2(num + den) - log2(den)
            for j in 0..n {
                let iw = C64::i() * w[j];
                let d = |m: usize| 2.0 * self.powers[m] * (a[m].conj() * iw * s[m][j]).re;
                let dnum = d(*k);
                let dden: f64 = (0..a.len()).filter(|m| m != k).map(d).sum();
                grad[j] += ((dnum + dden) / total - dden / den) / LN_2;
            }
        }
        grad
    }
}

/// Scaled pilots (`sigma_m b_m`) and powers of the users a BTS serves.
#[derive(Clone, Debug)]
pub struct IntraCellPilots {
    pilots: Vec<CVec>,
    powers: Vec<f64>,
}

/// Scaled pilots and powers of other cells' users, known only to a
/// centralized scheme.
#[derive(Clone, Debug)]
pub struct InterfererPilots {
    pilots: Vec<CVec>,
    powers: Vec<f64>,
}

macro_rules! pilot_bundle {
    ($t:ty) => {
        impl $t {
            pub fn new(pilots: Vec<CVec>, powers: Vec<f64>) -> Result<Self> {
                if pilots.len() != powers.len() {
                    return Err(Error::dim(stringify!($t), pilots.len(), powers.len()));
                }
                if powers.iter().any(|&p| !(p > 0.0)) {
                    return Err(Error::InvalidConfig("pilot powers must be positive".into()));
                }
                Ok(Self { pilots, powers })
            }

            pub fn len(&self) -> usize {
                self.pilots.len()
            }

            pub fn is_empty(&self) -> bool {
                self.pilots.is_empty()
            }

            pub fn pilots(&self) -> &[CVec] {
                &self.pilots
            }

            pub fn powers(&self) -> &[f64] {
                &self.powers
            }
        }
    };
}

pilot_bundle!(IntraCellPilots);
pilot_bundle!(InterfererPilots);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectScope {
    Centralized,
    Decentralized,
}

/// Evaluation of the direct objective at one `w`.
#[derive(Clone, Debug)]
pub struct DirectEval {
    pub value: f64,
    pub gammas: Vec<f64>,
    pub pinv_used: bool,
}

/// Sample-estimated sum rate from one BTS's reconstructed training blocks.
#[derive(Clone, Debug)]
pub struct DirectObjective {
    blocks: CanonicalBlocks,
    intra: IntraCellPilots,
    interferers: Option<InterfererPilots>,
    noise_var: f64,
}

/// Per-evaluation state shared by value and gradient of the LS-based
/// objectives.
struct Projections {
    sys: LsSystem,
    /// LS filters `v_s`, served users first.
    filters: Vec<CVec>,
    /// `P[k][s] = b_k^H P_{Y^H} b_s` for served `k`.
    proj: Vec<Vec<C64>>,
}

fn project(blocks: &CanonicalBlocks, pilots: &[&CVec], served: usize, w: &CVec) -> Result<Projections> {
    let y = blocks.synthesize(w)?;
    for b in pilots {
        if b.len() != y.ncols() {
            return Err(Error::dim("pilot length", y.ncols(), b.len()));
        }
    }
    let sys = LsSystem::new(y);
    let filters: Vec<CVec> = pilots.iter().map(|b| sys.filter(b)).collect();
    let proj = (0..served)
        .map(|k| {
            let u = sys.y() * pilots[k];
            filters.iter().map(|v| u.dotc(v)).collect()
        })
        .collect();
    Ok(Projections { sys, filters, proj })
}

impl DirectObjective {
    /// Distributed variant: only the served users' pilots are known.
    pub fn decentralized(blocks: CanonicalBlocks, intra: IntraCellPilots, noise_var: f64) -> Self {
        Self {
            blocks,
            intra,
            interferers: None,
            noise_var,
        }
    }

    /// Adds the interference terms of other-cell users.
    pub fn centralized(
        blocks: CanonicalBlocks,
        intra: IntraCellPilots,
        interferers: InterfererPilots,
        noise_var: f64,
    ) -> Self {
        Self {
            blocks,
            intra,
            interferers: Some(interferers),
            noise_var,
        }
    }

    pub fn scope(&self) -> DirectScope {
        if self.interferers.is_some() {
            DirectScope::Centralized
        } else {
            DirectScope::Decentralized
        }
    }

    pub fn n_irs(&self) -> usize {
        self.blocks.n_irs()
    }

    pub fn blocks(&self) -> &CanonicalBlocks {
        &self.blocks
    }

    fn streams(&self) -> (Vec<&CVec>, Vec<f64>) {
        let mut pilots: Vec<&CVec> = self.intra.pilots.iter().collect();
        let mut powers = self.intra.powers.clone();
        if let Some(i) = &self.interferers {
            pilots.extend(i.pilots.iter());
            powers.extend_from_slice(&i.powers);
        }
        (pilots, powers)
    }

    pub fn evaluate(&self, w: &CVec) -> Result<DirectEval> {
        Ok(self.evaluate_with_gradient(w, false)?.0)
    }

    /// Gradient with respect to the phases of `w`; `None` on the
    /// pseudo-inverse path.
    pub fn gradient(&self, w: &CVec) -> Result<Option<Vec<f64>>> {
        Ok(self.evaluate_with_gradient(w, true)?.1)
    }

    fn evaluate_with_gradient(&self, w: &CVec, want_grad: bool) -> Result<(DirectEval, Option<Vec<f64>>)> {
        let (pilots, powers) = self.streams();
        let k_served = self.intra.len();
        let pr = project(&self.blocks, &pilots, k_served, w)?;
        let t = self.blocks.pilot_len() as f64;
        let noise_scale = t * t * self.noise_var;

        let mut gammas = Vec::with_capacity(k_served);
        let mut nums = Vec::with_capacity(k_served);
        let mut dens = Vec::with_capacity(k_served);
        for k in 0..k_served {
            let num = pr.proj[k][k].re.powi(2) / powers[k];
            let interference: f64 = (0..pilots.len())
                .filter(|&s| s != k)
                .map(|s| pr.proj[k][s].norm_sqr() / powers[s])
                .sum();
            let den = interference + noise_scale * pr.filters[k].norm_squared();
            let gamma = if den > 0.0 { num / den } else { 0.0 };
            gammas.push(gamma);
            nums.push(num);
            dens.push(den);
        }
        let value = sum_rate(&gammas);
        let eval = DirectEval {
            value,
            gammas: gammas.clone(),
            pinv_used: pr.sys.pinv_used(),
        };
        if !want_grad || pr.sys.pinv_used() {
            return Ok((eval, None));
        }

        let y = pr.sys.y();
        let yh = y.adjoint();
        let resid: Vec<CVec> = pilots
            .iter()
            .zip(&pr.filters)
            .map(|(b, v)| *b - &yh * v)
            .collect();
        let z: Vec<CVec> = (0..k_served)
            .map(|k| pr.sys.gram_solve(&pr.filters[k]).expect("gram path"))
            .collect();
        let q: Vec<CVec> = z.iter().map(|zk| &yh * zk).collect();

        let n = self.blocks.n_irs();
        let mut grad = vec![0.0; n];
        for (j, dj) in self.blocks.deltas().iter().enumerate() {
            let iw = C64::i() * w[j];
            let d_r: Vec<CVec> = resid.iter().map(|r| dj * r).collect();
            // alpha(x, y) = v_x^H D_j r_y
            let alpha = |x: usize, yy: usize| pr.filters[x].dotc(&d_r[yy]);
            let mut acc = 0.0;
            for k in 0..k_served {
                if dens[k] <= 0.0 {
                    continue;
                }
                let dp = |s: usize| iw * alpha(k, s) + (iw * alpha(s, k)).conj();
                let dpkk = dp(k).re;
                let dnum = 2.0 * pr.proj[k][k].re * dpkk / powers[k];
                let mut dden = 0.0;
                for s in (0..pilots.len()).filter(|&s| s != k) {
                    dden += 2.0 * (pr.proj[k][s].conj() * dp(s)).re / powers[s];
                }
                let beta = z[k].dotc(&d_r[k]) - pr.filters[k].dotc(&(dj * &q[k]));
                dden += noise_scale * 2.0 * (iw * beta).re;
                let dgamma = (dnum * dens[k] - nums[k] * dden) / (dens[k] * dens[k]);
                acc += dgamma / ((1.0 + gammas[k]) * LN_2);
            }
            grad[j] = acc;
        }
        Ok((eval, Some(grad)))
    }

    /// LS receive filters of the served users at `w`.
    pub fn ls_filters(&self, w: &CVec) -> Result<(Vec<CVec>, bool)> {
        ls_filters_at(&self.blocks, &self.intra, w)
    }
}

fn ls_filters_at(blocks: &CanonicalBlocks, intra: &IntraCellPilots, w: &CVec) -> Result<(Vec<CVec>, bool)> {
    let y = blocks.synthesize(w)?;
    let sys = LsSystem::new(y);
    Ok((intra.pilots.iter().map(|b| sys.filter(b)).collect(), sys.pinv_used()))
}

/// Evaluation of the LS residual objective.
#[derive(Clone, Debug)]
pub struct LsEval {
    /// `sum_k log2(residual_k)`, to be minimized.
    pub value: f64,
    pub residuals: Vec<f64>,
    pub clamped: bool,
    pub pinv_used: bool,
}

/// Noise-variance free surrogate `sum_k log2(b_k^H (I - P) b_k)`.
#[derive(Clone, Debug)]
pub struct LsObjective {
    blocks: CanonicalBlocks,
    intra: IntraCellPilots,
}

impl LsObjective {
    pub fn new(blocks: CanonicalBlocks, intra: IntraCellPilots) -> Self {
        Self { blocks, intra }
    }

    pub fn n_irs(&self) -> usize {
        self.blocks.n_irs()
    }

    pub fn evaluate(&self, w: &CVec) -> Result<LsEval> {
        Ok(self.evaluate_with_gradient(w, false)?.0)
    }

    /// Gradient of the (minimized) value with respect to the phases.
    pub fn gradient(&self, w: &CVec) -> Result<Option<Vec<f64>>> {
        Ok(self.evaluate_with_gradient(w, true)?.1)
    }

    fn evaluate_with_gradient(&self, w: &CVec, want_grad: bool) -> Result<(LsEval, Option<Vec<f64>>)> {
        let pilots: Vec<&CVec> = self.intra.pilots.iter().collect();
        let pr = project(&self.blocks, &pilots, 0, w)?;
        let yh = pr.sys.y().adjoint();
        let resid: Vec<CVec> = pilots
            .iter()
            .zip(&pr.filters)
            .map(|(b, v)| *b - &yh * v)
            .collect();
        let mut clamped = false;
        let residuals: Vec<f64> = resid.iter().map(|r| r.norm_squared()).collect();
        let value = residuals
            .iter()
            .map(|&r| {
                if r <= LS_RESIDUAL_FLOOR {
                    clamped = true;
                    LS_RESIDUAL_FLOOR.log2()
                } else {
                    r.log2()
                }
            })
            .sum();
        let eval = LsEval {
            value,
            residuals: residuals.clone(),
            clamped,
            pinv_used: pr.sys.pinv_used(),
        };
        if !want_grad || pr.sys.pinv_used() {
            return Ok((eval, None));
        }
        let mut grad = vec![0.0; self.blocks.n_irs()];
        for (j, dj) in self.blocks.deltas().iter().enumerate() {
            let iw = C64::i() * w[j];
            let mut acc = 0.0;
            for k in 0..pilots.len() {
                if residuals[k] <= LS_RESIDUAL_FLOOR {
                    continue;
                }
                let alpha = pr.filters[k].dotc(&(dj * &resid[k]));
                // d residual_k = -2 Re(i w_j alpha_kk)
                acc -= 2.0 * (iw * alpha).re / (residuals[k] * LN_2);
            }
            grad[j] = acc;
        }
        Ok((eval, Some(grad)))
    }

    pub fn ls_filters(&self, w: &CVec) -> Result<(Vec<CVec>, bool)> {
        ls_filters_at(&self.blocks, &self.intra, w)
    }
}

/// Everything a scheme may optimize over `w`.
#[derive(Clone, Debug)]
pub enum ObjectiveContext {
    TrueCsi(CsiObjective),
    EstimatedCsi(CsiObjective),
    DirectCentral(DirectObjective),
    DirectDecentral(DirectObjective),
    LsResidual(LsObjective),
}

impl ObjectiveContext {
    pub fn n_irs(&self) -> usize {
        match self {
            Self::TrueCsi(o) | Self::EstimatedCsi(o) => o.n_irs(),
            Self::DirectCentral(o) | Self::DirectDecentral(o) => o.n_irs(),
            Self::LsResidual(o) => o.n_irs(),
        }
    }

    /// Quantity to maximize (the LS objective enters negated).
    pub fn utility(&self, w: &CVec) -> Result<f64> {
        Ok(match self {
            Self::TrueCsi(o) | Self::EstimatedCsi(o) => o.value(w),
            Self::DirectCentral(o) | Self::DirectDecentral(o) => o.evaluate(w)?.value,
            Self::LsResidual(o) => -o.evaluate(w)?.value,
        })
    }

    /// Analytic gradient of [`Self::utility`] with respect to the phases.
    pub fn utility_gradient(&self, w: &CVec) -> Result<Option<Vec<f64>>> {
        Ok(match self {
            Self::TrueCsi(o) | Self::EstimatedCsi(o) => o.value_and_gradient(w, true).1,
            Self::DirectCentral(o) | Self::DirectDecentral(o) => o.gradient(w)?,
            Self::LsResidual(o) => o.gradient(w)?.map(|g| g.into_iter().map(|x| -x).collect()),
        })
    }
}

/// Estimated sum rate of a direct context at `w`.
pub fn direct_objective(ctx: &ObjectiveContext, w: &CVec) -> Result<f64> {
    match ctx {
        ObjectiveContext::DirectCentral(o) | ObjectiveContext::DirectDecentral(o) => Ok(o.evaluate(w)?.value),
        _ => Err(Error::Unsupported("direct_objective needs a direct context".into())),
    }
}

/// LS residual objective of an `LsResidual` context at `w` (smaller is better).
pub fn ls_objective(ctx: &ObjectiveContext, w: &CVec) -> Result<f64> {
    match ctx {
        ObjectiveContext::LsResidual(o) => Ok(o.evaluate(w)?.value),
        _ => Err(Error::Unsupported("ls_objective needs an LS residual context".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::{gen_pilots, simulate_ul_training, LinkDirection, PilotSet, StreamPlan};
    use crate::codebook::{build_codebook, reconstruct_canonical, CodebookKind};
    use crate::filters::{ls_filter, mmse_filter};
    use crate::linalg::phases_to_weights;
    use crate::random::{complex_gaussian, complex_gaussian_matrix, rng_from_seed, uniform_phase};
    use crate::topology::{compose_channel, draw_realization, effective_channel, SystemConfig};
    use crate::CMat;

    fn rand_vec(rng: &mut crate::random::SimRng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
    }

    /// Second implementation of the SINR formula: explicit quadratic forms.
    fn sinr_oracle(hs: &[CVec], p: &[f64], v: &CVec, k: usize, n0: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (m, h) in hs.iter().enumerate() {
            let mut acc = C64::from(0.0);
            for i in 0..v.len() {
                acc += v[i].conj() * h[i];
            }
            if m == k {
                num = acc.norm_sqr() * p[m];
            } else {
                den += acc.norm_sqr() * p[m];
            }
        }
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        num / (den + n0 * vv)
    }

    #[test]
    fn matched_filter_single_user() {
        let mut rng = rng_from_seed(1);
        let h = rand_vec(&mut rng, 4);
        let v = crate::linalg::normalized(&h);
        let s = true_sinr(&[h.clone()], &[2.0], &v, 0, 0.5);
        assert!((s - h.norm_squared() * 2.0 / 0.5).abs() < 1e-12);
        assert_eq!(true_sinr(&[h], &[1.0], &CVec::zeros(4), 0, 1.0), 0.0);
    }

    #[test]
    fn orthogonal_filter_kills_interference() {
        let e = |i: usize| CVec::from_fn(3, |r, _| C64::from(if r == i { 1.0 } else { 0.0 }));
        let hs = [e(0) * C64::from(2.0), e(1), e(2)];
        let s = true_sinr(&hs, &[1.0; 3], &e(0), 0, 0.25);
        assert!((s - 16.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_matches_oracle_and_is_scale_invariant() {
        let mut rng = rng_from_seed(2);
        let hs: Vec<CVec> = (0..2).map(|_| rand_vec(&mut rng, 5)).collect();
        let v = rand_vec(&mut rng, 5);
        let p = [0.7, 1.3];
        let s = true_sinr(&hs, &p, &v, 1, 0.4);
        assert!((s - sinr_oracle(&hs, &p, &v, 1, 0.4)).abs() < 1e-12 * s);
        let scaled = true_sinr(&hs, &p, &(&v * C64::new(-3.0, 0.5)), 1, 0.4);
        assert!((scaled - s).abs() < 1e-12 * s);
    }

    #[test]
    fn sum_rate_values() {
        assert_eq!(sum_rate(&[0.0, 0.0]), 0.0);
        assert!((sum_rate(&[1.0, 3.0]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn mmse_rate_identity() {
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            let hs: Vec<CVec> = (0..4).map(|_| rand_vec(&mut rng, 6)).collect();
            let p = [1.0, 0.5, 2.0, 1.0];
            let n0 = 0.3;
            let sinrs: Vec<f64> = (0..2)
                .map(|k| true_sinr(&hs, &p, &mmse_filter(&hs, &p, n0, k).unwrap(), k, n0))
                .collect();
            let mmse = mmse_values(&hs, &p, n0, &[0, 1]).unwrap();
            let lhs = sum_rate(&sinrs);
            let rhs: f64 = mmse.iter().map(|e| -e.log2()).sum();
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} {rhs}");
        }
    }

    fn fd_grad(f: impl Fn(&[f64]) -> f64, phi: &[f64], h: f64) -> Vec<f64> {
        (0..phi.len())
            .map(|j| {
                let mut a = phi.to_vec();
                let mut b = phi.to_vec();
                a[j] += h;
                b[j] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-12);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    fn training(cfg: &SystemConfig, seed: u64) -> (crate::topology::NetworkRealization, CanonicalBlocks, PilotSet) {
        let real = draw_realization(cfg, seed);
        let cb = build_codebook(cfg.n_irs, CodebookKind::Dft).unwrap();
        let pilots = gen_pilots(cfg, LinkDirection::Uplink, seed + 1);
        let plan = StreamPlan::one_per_user(&vec![CVec::from_element(1, C64::from(1.0)); cfg.total_users()]);
        let rec = simulate_ul_training(&real, &cb, &pilots, &plan, 0, cfg.noise_var, seed + 2).unwrap();
        (real, reconstruct_canonical(&rec.epochs, &cb).unwrap(), pilots)
    }

    fn contexts(cfg: &SystemConfig, blocks: &CanonicalBlocks, pilots: &PilotSet) -> (DirectObjective, DirectObjective, LsObjective) {
        let intra = IntraCellPilots::new(
            cfg.users_in(0).map(|m| pilots.scaled(m)).collect(),
            cfg.users_in(0).map(|m| pilots.power(m)).collect(),
        )
        .unwrap();
        let others = cfg.interferers_of(0);
        let inter = InterfererPilots::new(
            others.iter().map(|&m| pilots.scaled(m)).collect(),
            others.iter().map(|&m| pilots.power(m)).collect(),
        )
        .unwrap();
        (
            DirectObjective::centralized(blocks.clone(), intra.clone(), inter, cfg.noise_var),
            DirectObjective::decentralized(blocks.clone(), intra.clone(), cfg.noise_var),
            LsObjective::new(blocks.clone(), intra),
        )
    }

    #[test]
    fn direct_gradient_matches_finite_differences() {
        let cfg = SystemConfig {
            n_irs: 6,
            pilot_len: 32,
            ..SystemConfig::default()
        };
        let (_, blocks, pilots) = training(&cfg, 10);
        let (central, decentral, ls) = contexts(&cfg, &blocks, &pilots);
        let mut rng = rng_from_seed(4);
        for _ in 0..5 {
            let phi: Vec<f64> = (0..6).map(|_| uniform_phase(&mut rng)).collect();
            let w = phases_to_weights(&phi);
            for obj in [&central, &decentral] {
                let g = obj.gradient(&w).unwrap().unwrap();
                let fd = fd_grad(|p| obj.evaluate(&phases_to_weights(p)).unwrap().value, &phi, 1e-5);
                assert!(rel_err(&g, &fd) < 1e-6, "{g:?} {fd:?}");
            }
            let g = ls.gradient(&w).unwrap().unwrap();
            let fd = fd_grad(|p| ls.evaluate(&phases_to_weights(p)).unwrap().value, &phi, 1e-5);
            assert!(rel_err(&g, &fd) < 1e-6);
        }
    }

    #[test]
    fn csi_gradient_matches_finite_differences() {
        let cfg = SystemConfig {
            n_irs: 5,
            ue_antennas: 2,
            ..SystemConfig::default()
        };
        let real = draw_realization(&cfg, 3);
        let mut rng = rng_from_seed(8);
        let chans: Vec<AffineChannel> = (0..4)
            .map(|m| effective_channel(&real, 1, m, &crate::linalg::normalized(&rand_vec(&mut rng, 2))))
            .collect();
        let obj = CsiObjective::new(chans, vec![1.0, 0.8, 1.2, 1.0], vec![2, 3], cfg.noise_var * 0.1).unwrap();
        for _ in 0..5 {
            let phi: Vec<f64> = (0..5).map(|_| uniform_phase(&mut rng)).collect();
            let (_, g) = obj.value_and_gradient(&phases_to_weights(&phi), true);
            let fd = fd_grad(|p| obj.value(&phases_to_weights(p)), &phi, 1e-5);
            assert!(rel_err(&g.unwrap(), &fd) < 1e-6);
        }
    }

    #[test]
    fn fixed_filter_gradient_matches_finite_differences() {
        let cfg = SystemConfig {
            n_irs: 5,
            ..SystemConfig::default()
        };
        let real = draw_realization(&cfg, 9);
        let one = CVec::from_element(1, C64::from(1.0));
        let chans: Vec<AffineChannel> = (0..4).map(|m| effective_channel(&real, 0, m, &one)).collect();
        let mut rng = rng_from_seed(10);
        let filters = vec![(0, rand_vec(&mut rng, 6)), (1, rand_vec(&mut rng, 6))];
        let obj = FixedFilterObjective::new(chans, vec![1.0; 4], filters, cfg.noise_var).unwrap();
        for _ in 0..5 {
            let phi: Vec<f64> = (0..5).map(|_| uniform_phase(&mut rng)).collect();
            let g = obj.gradient(&phases_to_weights(&phi));
            let fd = fd_grad(|p| obj.value(&phases_to_weights(p)), &phi, 1e-5);
            assert!(rel_err(&g, &fd) < 1e-6);
        }
    }

    #[test]
    fn csi_objective_equals_sum_rate_with_mmse() {
        let cfg = SystemConfig {
            n_irs: 4,
            ..SystemConfig::default()
        };
        let real = draw_realization(&cfg, 4);
        let one = CVec::from_element(1, C64::from(1.0));
        let chans: Vec<AffineChannel> = (0..4).map(|m| effective_channel(&real, 0, m, &one)).collect();
        let obj = CsiObjective::new(chans, vec![1.0; 4], vec![0, 1], cfg.noise_var).unwrap();
        let w = crate::topology::IrsState::random(4, &mut rng_from_seed(1));
        let hs: Vec<CVec> = (0..4)
            .map(|m| compose_channel(&real, 0, m, w.weights()).unwrap().column(0).into_owned())
            .collect();
        let v = obj.mmse_filters(w.weights()).unwrap();
        let sinrs: Vec<f64> = (0..2).map(|k| true_sinr(&hs, &[1.0; 4], &v[k], k, cfg.noise_var)).collect();
        assert!((obj.value(w.weights()) - sum_rate(&sinrs)).abs() < 1e-9);
    }

    #[test]
    fn decentral_equals_central_without_interferers() {
        let cfg = SystemConfig {
            num_cells: 1,
            n_irs: 4,
            pilot_len: 32,
            ..SystemConfig::default()
        };
        let (_, blocks, pilots) = training(&cfg, 1);
        let intra = IntraCellPilots::new(
            (0..2).map(|m| pilots.scaled(m)).collect(),
            vec![1.0; 2],
        )
        .unwrap();
        let empty = InterfererPilots::new(vec![], vec![]).unwrap();
        let c = DirectObjective::centralized(blocks.clone(), intra.clone(), empty, cfg.noise_var);
        let d = DirectObjective::decentralized(blocks, intra, cfg.noise_var);
        let w = crate::topology::IrsState::random(4, &mut rng_from_seed(2));
        assert_eq!(c.evaluate(w.weights()).unwrap().value, d.evaluate(w.weights()).unwrap().value);
    }

    #[test]
    fn central_estimate_is_pessimistic() {
        let cfg = SystemConfig {
            n_irs: 4,
            pilot_len: 24,
            ..SystemConfig::default()
        };
        let (_, blocks, pilots) = training(&cfg, 5);
        let (central, decentral, _) = contexts(&cfg, &blocks, &pilots);
        let mut rng = rng_from_seed(6);
        for _ in 0..10 {
            let w = crate::topology::IrsState::random(4, &mut rng);
            let gc = central.evaluate(w.weights()).unwrap().gammas;
            let gd = decentral.evaluate(w.weights()).unwrap().gammas;
            for (c, d) in gc.iter().zip(&gd) {
                assert!(*c >= 0.0 && c <= d);
            }
        }
    }

    #[test]
    fn direct_objective_consistent_with_true_rate_at_large_t() {
        let cfg = SystemConfig {
            num_cells: 1,
            users_per_cell: 1,
            n_irs: 4,
            pilot_len: 2048,
            ..SystemConfig::default()
        };
        let real = draw_realization(&cfg, 7);
        let cb = build_codebook(4, CodebookKind::Dft).unwrap();
        let pilots = gen_pilots(&cfg, LinkDirection::Uplink, 3);
        let plan = StreamPlan::one_per_user(&[CVec::from_element(1, C64::from(1.0))]);
        let rec = simulate_ul_training(&real, &cb, &pilots, &plan, 0, cfg.noise_var, 9).unwrap();
        let blocks = reconstruct_canonical(&rec.epochs, &cb).unwrap();
        let intra = IntraCellPilots::new(vec![pilots.scaled(0)], vec![1.0]).unwrap();
        let obj = DirectObjective::decentralized(blocks, intra, cfg.noise_var);
        let w = crate::topology::IrsState::random(4, &mut rng_from_seed(1));
        let h = compose_channel(&real, 0, 0, w.weights()).unwrap().column(0).into_owned();
        let v = mmse_filter(&[h.clone()], &[1.0], cfg.noise_var, 0).unwrap();
        let truth = sum_rate(&[true_sinr(&[h], &[1.0], &v, 0, cfg.noise_var)]);
        let est = obj.evaluate(w.weights()).unwrap().value;
        assert!((est - truth).abs() / truth < 0.05, "{est} vs {truth}");
    }

    #[test]
    fn direct_gamma_homogeneous_in_pilot_scale() {
        let mut rng = rng_from_seed(12);
        let y0 = complex_gaussian_matrix(&mut rng, 4, 16, 1.0);
        let ycan: Vec<CMat> = (0..3).map(|_| complex_gaussian_matrix(&mut rng, 4, 16, 1.0)).collect();
        let blocks = CanonicalBlocks::new(y0, ycan).unwrap();
        let b: Vec<CVec> = (0..2).map(|_| rand_vec(&mut rng, 16)).collect();
        let make = |s: f64| {
            let intra = IntraCellPilots::new(
                b.iter().map(|x| x * C64::from(s)).collect(),
                vec![s * s * 0.5, s * s * 2.0],
            )
            .unwrap();
            DirectObjective::decentralized(blocks.clone(), intra, 0.7)
        };
        let w = crate::topology::IrsState::random(3, &mut rng);
        let g1 = make(1.0).evaluate(w.weights()).unwrap().gammas;
        let g2 = make(2.0).evaluate(w.weights()).unwrap().gammas;
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn ls_objective_cases() {
        let mut rng = rng_from_seed(13);
        // rows of Y span the first two coordinates of C^8
        let mut y0 = CMat::zeros(2, 8);
        y0[(0, 0)] = C64::from(1.0);
        y0[(1, 1)] = C64::from(1.0);
        let blocks = CanonicalBlocks::new(y0, vec![]).unwrap();
        let mut perp = CVec::zeros(8);
        for t in 2..8 {
            perp[t] = C64::from(if t % 2 == 0 { 1.0 } else { -1.0 });
        }
        let ls = LsObjective::new(blocks.clone(), IntraCellPilots::new(vec![perp], vec![1.0]).unwrap());
        let e = ls.evaluate(&CVec::zeros(0)).unwrap();
        assert!((e.value - 6f64.log2()).abs() < 1e-12 && !e.clamped);

        let mut inside = CVec::zeros(8);
        inside[0] = C64::from(1.0);
        inside[1] = C64::from(-1.0);
        let ls = LsObjective::new(blocks, IntraCellPilots::new(vec![inside], vec![1.0]).unwrap());
        let e = ls.evaluate(&CVec::zeros(0)).unwrap();
        assert!(e.clamped);
        assert_eq!(e.value, LS_RESIDUAL_FLOOR.log2());

        // residual identity against explicit LS filters
        let y0 = complex_gaussian_matrix(&mut rng, 3, 20, 1.0);
        let ycan: Vec<CMat> = (0..2).map(|_| complex_gaussian_matrix(&mut rng, 3, 20, 1.0)).collect();
        let blocks = CanonicalBlocks::new(y0, ycan).unwrap();
        let b: Vec<CVec> = (0..2).map(|_| rand_vec(&mut rng, 20)).collect();
        let ls = LsObjective::new(blocks.clone(), IntraCellPilots::new(b.clone(), vec![1.0; 2]).unwrap());
        let w = crate::topology::IrsState::random(2, &mut rng);
        let y = blocks.synthesize(w.weights()).unwrap();
        let want: f64 = b
            .iter()
            .map(|bk| {
                let v = ls_filter(&y, bk).unwrap().v;
                (bk.adjoint() - v.adjoint() * &y).norm_squared().log2()
            })
            .sum();
        assert!((ls.evaluate(w.weights()).unwrap().value - want).abs() < 1e-10);
    }

    #[test]
    fn context_accessors_check_mode() {
        let mut rng = rng_from_seed(14);
        let blocks = CanonicalBlocks::new(complex_gaussian_matrix(&mut rng, 2, 8, 1.0), vec![]).unwrap();
        let intra = IntraCellPilots::new(vec![rand_vec(&mut rng, 8)], vec![1.0]).unwrap();
        let ctx = ObjectiveContext::LsResidual(LsObjective::new(blocks.clone(), intra.clone()));
        assert!(direct_objective(&ctx, &CVec::zeros(0)).is_err());
        assert!(ls_objective(&ctx, &CVec::zeros(0)).is_ok());
        let ctx = ObjectiveContext::DirectDecentral(DirectObjective::decentralized(blocks, intra, 1.0));
        assert!(direct_objective(&ctx, &CVec::zeros(0)).is_ok());
        assert!(ls_objective(&ctx, &CVec::zeros(0)).is_err());
    }

    #[test]
    fn objectives_are_continuous_on_the_torus() {
        let cfg = SystemConfig {
            n_irs: 4,
            pilot_len: 16,
            ..SystemConfig::default()
        };
        let (_, blocks, pilots) = training(&cfg, 21);
        let (central, decentral, ls) = contexts(&cfg, &blocks, &pilots);
        let phi = vec![0.3, -1.0, 2.0, 0.1];
        let f = |p: &[f64]| {
            let w = phases_to_weights(p);
            [
                central.evaluate(&w).unwrap().value,
                decentral.evaluate(&w).unwrap().value,
                ls.evaluate(&w).unwrap().value,
            ]
        };
        let base = f(&phi);
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let moved: Vec<f64> = phi.iter().map(|p| p + eps).collect();
            let d = f(&moved).iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-4);
    }
}
