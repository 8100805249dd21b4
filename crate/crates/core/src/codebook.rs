//! IRS training codebooks and reconstruction of canonical receptions.
//!
//! A unitary-family codebook switches on every IRS element in every epoch.
//! With the unnormalized mixing matrix `A` (`A conj(A) = (N+1) I`, symmetric,
//! all-ones first row and column) epoch `j` uses the weights
//! `theta_j = conj(A[1.., j])`. Mixing the `N+1` epoch receptions with the
//! columns of `A` recovers what would have been received with only the direct
//! path (`Y_0`) and with a single element switched on (`Y_can[i]`), and from
//! those the reception for arbitrary weights `w` follows by linearity.

use std::f64::consts::TAU;

use crate::{CMat, CVec, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodebookKind {
    /// One element at a time, then all off.
    Canonical,
    Dft,
    Hadamard,
}

impl std::str::FromStr for CodebookKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Self::Canonical),
            "dft" => Ok(Self::Dft),
            "hadamard" => Ok(Self::Hadamard),
            other => Err(Error::Unsupported(format!(
                "unknown codebook `{other}` (expected canonical, dft or hadamard)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Codebook {
    kind: CodebookKind,
    mixing: CMat,
    thetas: Vec<CVec>,
}

impl Codebook {
    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn n_irs(&self) -> usize {
        self.thetas.len() - 1
    }

    /// Training epochs per sweep (`N_IRS + 1`).
    pub fn epochs(&self) -> usize {
        self.thetas.len()
    }

    /// The mixing matrix `A` (identity for the canonical codebook).
    pub fn mixing(&self) -> &CMat {
        &self.mixing
    }

    /// IRS weights of every epoch.
    pub fn thetas(&self) -> &[CVec] {
        &self.thetas
    }
}

pub fn build_codebook(n_irs: usize, kind: CodebookKind) -> Result<Codebook> {
    let n1 = n_irs + 1;
    let mixing = match kind {
        CodebookKind::Canonical => CMat::identity(n1, n1),
        CodebookKind::Dft => CMat::from_fn(n1, n1, |r, c| {
            C64::from_polar(1.0, -TAU * ((r * c) % n1) as f64 / n1 as f64)
        }),
        CodebookKind::Hadamard => sylvester_hadamard(n1)?,
    };
    let thetas = match kind {
        CodebookKind::Canonical => (0..n1)
            .map(|j| CVec::from_fn(n_irs, |i, _| C64::from(if i == j { 1.0 } else { 0.0 })))
            .collect(),
        _ => (0..n1)
            .map(|j| CVec::from_fn(n_irs, |i, _| mixing[(i + 1, j)].conj()))
            .collect(),
    };
    Ok(Codebook {
        kind,
        mixing,
        thetas,
    })
}

fn sylvester_hadamard(order: usize) -> Result<CMat> {
    if !order.is_power_of_two() {
        return Err(Error::HadamardSize { order });
    }
    Ok(CMat::from_fn(order, order, |r, c| {
        C64::from(if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
    }))
}

/// Reconstructed direct-only reception and per-element receptions of one
/// training sweep at one receiver.
#[derive(Clone, Debug)]
pub struct CanonicalBlocks {
    y0: CMat,
    ycan: Vec<CMat>,
    deltas: Vec<CMat>,
}

impl CanonicalBlocks {
    pub fn new(y0: CMat, ycan: Vec<CMat>) -> Result<Self> {
        for y in &ycan {
            if y.shape() != y0.shape() {
                return Err(Error::dim("canonical block", format!("{:?}", y0.shape()), format!("{:?}", y.shape())));
            }
        }
        let deltas = ycan.iter().map(|y| y - &y0).collect();
        Ok(Self { y0, ycan, deltas })
    }

    pub fn y0(&self) -> &CMat {
        &self.y0
    }

    pub fn ycan(&self) -> &[CMat] {
        &self.ycan
    }

    /// `Y_can[j] - Y_0`: the reflected part of element `j`.
    pub fn deltas(&self) -> &[CMat] {
        &self.deltas
    }

    pub fn n_irs(&self) -> usize {
        self.ycan.len()
    }

    pub fn rows(&self) -> usize {
        self.y0.nrows()
    }

    pub fn pilot_len(&self) -> usize {
        self.y0.ncols()
    }

    /// `Y_w = Y_0 + sum_j w_j (Y_can[j] - Y_0)`.
    pub fn synthesize(&self, w: &CVec) -> Result<CMat> {
        if w.len() != self.ycan.len() {
            return Err(Error::dim("synthesize_yw weights", self.ycan.len(), w.len()));
        }
        let mut y = self.y0.clone();
        for (d, &wj) in self.deltas.iter().zip(w.iter()) {
            y.zip_apply(d, |acc, x| *acc += wj * x);
        }
        Ok(y)
    }
}

/// Recovers `Y_0` and `Y_can[j]` from the `N_IRS + 1` epoch receptions.
pub fn reconstruct_canonical(epochs: &[CMat], cb: &Codebook) -> Result<CanonicalBlocks> {
    let n1 = cb.epochs();
    if epochs.len() != n1 {
        return Err(Error::dim("reconstruct_canonical epochs", n1, epochs.len()));
    }
    let shape = epochs[0].shape();
    if let Some(bad) = epochs.iter().find(|e| e.shape() != shape) {
        return Err(Error::dim("reconstruct_canonical epoch shape", format!("{shape:?}"), format!("{:?}", bad.shape())));
    }
    if cb.kind() == CodebookKind::Canonical {
        let y0 = epochs[n1 - 1].clone();
        return CanonicalBlocks::new(y0, epochs[..n1 - 1].to_vec());
    }
    let a = cb.mixing();
    let scale = C64::from(1.0 / n1 as f64);
    let mix = |col: usize| -> CMat {
        let mut acc = CMat::zeros(shape.0, shape.1);
        for (j, y) in epochs.iter().enumerate() {
            let coef = a[(j, col)] * scale;
            acc.zip_apply(y, |s, x| *s += coef * x);
        }
        acc
    };
    let y0 = mix(0);
    let ycan = (1..n1).map(|i| mix(i) + &y0).collect();
    CanonicalBlocks::new(y0, ycan)
}

/// Free-function form of [`CanonicalBlocks::synthesize`].
pub fn synthesize_yw(y0: &CMat, ycan: &[CMat], w: &CVec) -> Result<CMat> {
    CanonicalBlocks::new(y0.clone(), ycan.to_vec())?.synthesize(w)
}
