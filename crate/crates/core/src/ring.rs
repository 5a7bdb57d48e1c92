//! Tensor-ring cores and the contractions built from them.
//!
//! Core `k` (zero-based) has shape `(R_k, I_k, R_{k+1})` with `R_N = R_0`.
//! A core's lateral slice `G_k(:, i, :)` is an `R_k × R_{k+1}` matrix.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tensor::{DenseTensor, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct TrCores {
    cores: Vec<DenseTensor>,
}

impl TrCores {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.len() < 2 {
            return Err(Error::InvalidShape(format!(
                "a tensor ring needs at least 2 cores, got {}",
                cores.len()
            )));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(Error::InvalidShape(format!(
                    "core {k} has order {}, expected 3",
                    c.order()
                )));
            }
        }
        check_chain(&cores)?;
        let n = cores.len();
        let closing_left = cores[0].dims()[0];
        let closing_right = cores[n - 1].dims()[2];
        if closing_left != closing_right {
            return Err(Error::RankMismatch(format!(
                "ring closure: R_0 = {closing_left} but R_N = {closing_right}"
            )));
        }
        Ok(TrCores { cores })
    }

    /// Cores with i.i.d. standard normal entries. `ranks` holds `R_0..R_{N-1}`
    /// (the closing `R_N = R_0` is implied).
    pub fn random<R: Rng + ?Sized>(dims: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() != ranks.len() {
            return Err(Error::RankMismatch(format!(
                "{} extents but {} ranks",
                dims.len(),
                ranks.len()
            )));
        }
        if ranks.iter().any(|&r| r == 0) {
            return Err(Error::RankMismatch("ranks must be at least 1".into()));
        }
        let n = dims.len();
        let mut cores = Vec::with_capacity(n);
        for k in 0..n {
            let shape = Shape::new(vec![ranks[k], dims[k], ranks[(k + 1) % n]])?;
            let data = (0..shape.numel()).map(|_| rng.sample(StandardNormal)).collect();
            cores.push(DenseTensor::from_vec(shape, data)?);
        }
        TrCores::new(cores)
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &DenseTensor {
        &self.cores[k]
    }

    pub fn core_mut(&mut self, k: usize) -> &mut DenseTensor {
        &mut self.cores[k]
    }

    pub fn set_core(&mut self, k: usize, core: DenseTensor) -> Result<()> {
        if core.dims() != self.cores[k].dims() {
            return Err(Error::ShapeMismatch(format!(
                "replacement core {k} has shape {}, expected {}",
                core.shape(),
                self.cores[k].shape()
            )));
        }
        self.cores[k] = core;
        Ok(())
    }

    /// Replaces all cores at once; ranks may change.
    pub fn replace(&mut self, cores: Vec<DenseTensor>) -> Result<()> {
        *self = TrCores::new(cores)?;
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    /// `R_0..R_N` with `R_N = R_0`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.dims()[0]).collect();
        r.push(r[0]);
        r
    }

    /// Right bond rank of core `k`, i.e. `R_{k+1}`.
    pub fn bond(&self, k: usize) -> usize {
        self.cores[k].dims()[2]
    }

    pub fn slice(&self, k: usize, i: usize) -> Matrix {
        core_slice(&self.cores[k], i)
    }

    /// All lateral slices of core `k`.
    pub fn slices(&self, k: usize) -> Vec<Matrix> {
        (0..self.cores[k].dims()[1])
            .map(|i| core_slice(&self.cores[k], i))
            .collect()
    }

    /// Cores rotated so that core `shift` comes first.
    pub fn rotated(&self, shift: usize) -> TrCores {
        let n = self.order();
        TrCores {
            cores: (0..n).map(|k| self.cores[(shift + k) % n].clone()).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.numel()).sum()
    }
}

fn check_chain(cores: &[DenseTensor]) -> Result<()> {
    for k in 1..cores.len() {
        let right = cores[k - 1].dims()[2];
        let left = cores[k].dims()[0];
        if right != left {
            return Err(Error::RankMismatch(format!(
                "core {} has right rank {right} but core {k} has left rank {left}",
                k - 1
            )));
        }
    }
    Ok(())
}

/// Lateral slice `G(:, i, :)` of a 3-order tensor as a matrix.
pub fn core_slice(core: &DenseTensor, i: usize) -> Matrix {
    let d = core.dims();
    let (r0, ext, r1) = (d[0], d[1], d[2]);
    let data = core.data();
    Matrix::from_fn(r0, r1, |a, b| data[a + r0 * (i + ext * b)])
}

pub fn set_core_slice(core: &mut DenseTensor, i: usize, m: &Matrix) {
    let d = core.dims().to_vec();
    let (r0, ext, r1) = (d[0], d[1], d[2]);
    debug_assert_eq!(m.shape(), (r0, r1));
    let data = core.data_mut();
    for b in 0..r1 {
        for a in 0..r0 {
            data[a + r0 * (i + ext * b)] = m[(a, b)];
        }
    }
}

/// Tensor connection product of consecutive 3-order tensors.
///
/// The result has shape `(R_first, I_1 I_2 .., R_last)`; the merged middle
/// index is first-fastest, so its lateral slice at `(i_1, .., i_k)` is
/// `G_1(:, i_1, :) ⋯ G_k(:, i_k, :)`.
pub fn tcp(cores: &[DenseTensor]) -> Result<DenseTensor> {
    let first = cores
        .first()
        .ok_or_else(|| Error::InvalidShape("tcp of an empty core list".into()))?;
    for (k, c) in cores.iter().enumerate() {
        if c.order() != 3 {
            return Err(Error::InvalidShape(format!("tcp operand {k} is not 3-order")));
        }
    }
    check_chain(cores)?;
    let mut acc = first.clone();
    for next in &cores[1..] {
        acc = tcp_pair(&acc, next)?;
    }
    Ok(acc)
}

fn tcp_pair(left: &DenseTensor, right: &DenseTensor) -> Result<DenseTensor> {
    let (r0, j, r1) = (left.dims()[0], left.dims()[1], left.dims()[2]);
    let (i, r2) = (right.dims()[1], right.dims()[2]);
    // left as (r0*j) x r1, right as r1 x (i*r2), both column-major views
    let lm = Matrix::from_column_slice(r0 * j, r1, left.data());
    let rm = Matrix::from_column_slice(r1, i * r2, right.data());
    let prod = lm * rm;
    let merged = j
        .checked_mul(i)
        .ok_or_else(|| Error::InvalidShape("tcp merged extent overflows".into()))?;
    DenseTensor::from_vec(Shape::new(vec![r0, merged, r2])?, prod.as_slice().to_vec())
}

/// `X(i_1..i_N) = Trace(G_1(:, i_1, :) ⋯ G_N(:, i_N, :))`.
pub fn tr_reconstruct(cores: &TrCores) -> Result<DenseTensor> {
    let merged = tcp(cores.cores())?;
    let r = merged.dims()[0];
    let m = merged.dims()[1];
    let data = merged.data();
    let out: Vec<f64> = (0..m)
        .map(|j| (0..r).map(|a| data[a + r * (j + m * a)]).sum())
        .collect();
    DenseTensor::from_vec(Shape::new(cores.dims())?, out)
}

/// Modes of the subchain for `mode`, in cyclic order `mode+1, .., N-1, 0, .., mode-1`.
pub fn chain_modes(order: usize, mode: usize) -> Vec<usize> {
    (1..order).map(|k| (mode + k) % order).collect()
}

/// `G^{≠n}`: the TCP of every core except `mode`, taken cyclically from
/// `mode + 1`. Shape `(R_{n+1}, ∏_{l≠n} I_l, R_n)` in zero-based bond terms,
/// i.e. `(bond(n), .., bond(n-1))`.
pub fn subchain(cores: &TrCores, mode: usize) -> Result<DenseTensor> {
    let n = cores.order();
    if mode >= n {
        return Err(Error::ModeOutOfRange { mode, order: n });
    }
    let chain: Vec<DenseTensor> = chain_modes(n, mode)
        .into_iter()
        .map(|k| cores.core(k).clone())
        .collect();
    tcp(&chain)
}

/// Slice product along the subchain of `mode` at complementary indices `comp`
/// (cyclic order). Returns an `R_{n+1} × R_n` matrix.
pub fn chain_product(slices: &[Vec<Matrix>], mode: usize, comp: &[usize]) -> Matrix {
    let n = slices.len();
    let modes = chain_modes(n, mode);
    let mut acc = slices[modes[0]][comp[0]].clone();
    for (pos, &k) in modes.iter().enumerate().skip(1) {
        acc *= &slices[k][comp[pos]];
    }
    acc
}

/// Design row for `mode` at complementary indices `comp`: `vec(Pᵀ)` where `P`
/// is the subchain slice product, so that `x = row · vec(G_n(i_n))`.
pub fn subchain_row(slices: &[Vec<Matrix>], mode: usize, comp: &[usize]) -> Vec<f64> {
    chain_product(slices, mode, comp).transpose().as_slice().to_vec()
}

/// Entry of the reconstruction at a full multi-index.
pub fn tr_entry(slices: &[Vec<Matrix>], index: &[usize]) -> f64 {
    let mut acc = slices[0][index[0]].clone();
    for k in 1..slices.len() {
        acc *= &slices[k][index[k]];
    }
    acc.trace()
}

pub fn all_slices(cores: &TrCores) -> Vec<Vec<Matrix>> {
    (0..cores.order()).map(|k| cores.slices(k)).collect()
}
