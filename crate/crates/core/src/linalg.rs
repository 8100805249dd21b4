//! Small dense helpers on top of nalgebra.

use nalgebra::Cholesky;

use crate::{CMat, CVec, C64};

/// Relative singular-value cutoff used by every pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

/// Squared condition bound under which a Cholesky factor is trusted.
const CHOL_RCOND: f64 = 1e-12;

/// Cholesky factor of a Hermitian positive definite matrix, or `None` when
/// the matrix is singular to working precision.
pub fn well_conditioned_cholesky(a: &CMat) -> Option<Cholesky<C64, nalgebra::Dyn>> {
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..a.nrows() {
        let d = l[(i, i)].re.abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if a.nrows() == 0 || (hi > 0.0 && (lo / hi).powi(2) > CHOL_RCOND) {
        Some(chol)
    } else {
        None
    }
}

/// Moore-Penrose pseudo-inverse with a relative singular value cutoff.
pub fn pinv(a: &CMat) -> CMat {
    if a.nrows() == 0 || a.ncols() == 0 {
        return CMat::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMat::zeros(a.ncols(), a.nrows());
    }
    svd.pseudo_inverse(smax * PINV_RTOL)
        .expect("svd computed with both factors")
}

/// `a * b^H`.
pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

pub fn normalized(v: &CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v / C64::from(n)
    } else {
        v.clone()
    }
}

/// `|a^H b| / (|a| |b|)`, zero when either vector vanishes.
pub fn cosine(a: &CVec, b: &CVec) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        a.dotc(b).norm() / d
    }
}

pub fn conj(v: &CVec) -> CVec {
    v.map(|z| z.conj())
}

/// Unit-modulus weights `e^{j phi}`.
pub fn phases_to_weights(phases: &[f64]) -> CVec {
    CVec::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(1.0, p)))
}

pub fn weights_to_phases(w: &CVec) -> Vec<f64> {
    w.iter().map(|z| z.arg()).collect()
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max entrywise deviation relative to the largest entry of `reference`.
pub fn max_rel_error(got: &CMat, reference: &CMat) -> f64 {
    let scale = max_abs(reference).max(f64::MIN_POSITIVE);
    max_abs(&(got - reference)) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{complex_gaussian_matrix, rng_from_seed};

    #[test]
    fn pinv_of_full_column_rank_is_left_inverse() {
        let mut rng = rng_from_seed(1);
        let a = complex_gaussian_matrix(&mut rng, 7, 3, 1.0);
        let p = pinv(&a);
        let id = &p * &a;
        assert!(max_rel_error(&id, &CMat::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn singular_gram_is_rejected() {
        let mut rng = rng_from_seed(2);
        let y = complex_gaussian_matrix(&mut rng, 4, 2, 1.0);
        let gram = &y * y.adjoint();
        assert!(well_conditioned_cholesky(&gram).is_none());
        let y = complex_gaussian_matrix(&mut rng, 4, 16, 1.0);
        assert!(well_conditioned_cholesky(&(&y * y.adjoint())).is_some());
    }
}
