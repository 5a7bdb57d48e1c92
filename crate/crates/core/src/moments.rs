//! Sums of chained matrix products over sorted index lists.
//!
//! The VBI updates need quantities of the form
//! `Σ_e w_e · M_0(k_e[0]) · M_1(k_e[1]) ⋯ M_{L-1}(k_e[L-1])`, where the key
//! tuples `k_e` are the observed entries of a slice (or of the whole tensor).
//! With keys sorted first-fastest (so `k[L-1]` is the most significant digit),
//! entries sharing a suffix are contiguous and the sum factors as a prefix
//! tree: each distinct suffix costs one matrix product instead of one per
//! entry.

use crate::linalg::Matrix;

/// `Σ_e w_e Π_p factors[p][keys[e*width + p]]`, `rows × cols` result.
///
/// `keys` must be sorted by the first-fastest linearization of each tuple.
/// An empty key list yields the zero matrix.
pub fn chain_sum(
    keys: &[usize],
    width: usize,
    weights: Option<&[f64]>,
    factors: &[&[Matrix]],
    rows: usize,
    cols: usize,
) -> Matrix {
    assert_eq!(factors.len(), width);
    assert!(width >= 1);
    let n = keys.len() / width;
    debug_assert_eq!(keys.len(), n * width);
    if let Some(w) = weights {
        assert_eq!(w.len(), n);
    }
    if n == 0 {
        return Matrix::zeros(rows, cols);
    }
    let out = walk(keys, width, weights, factors, 0, n, width - 1);
    debug_assert_eq!(out.shape(), (rows, cols));
    out
}

fn walk(
    keys: &[usize],
    width: usize,
    weights: Option<&[f64]>,
    factors: &[&[Matrix]],
    lo: usize,
    hi: usize,
    pos: usize,
) -> Matrix {
    let key = |e: usize| keys[e * width + pos];
    if pos == 0 {
        let mut acc = Matrix::zeros(factors[0][key(lo)].nrows(), factors[0][key(lo)].ncols());
        for e in lo..hi {
            let w = weights.map_or(1.0, |w| w[e]);
            acc += &factors[0][key(e)] * w;
        }
        return acc;
    }
    let mut acc: Option<Matrix> = None;
    let mut start = lo;
    while start < hi {
        let k = key(start);
        let mut end = start + 1;
        while end < hi && key(end) == k {
            end += 1;
        }
        let sub = walk(keys, width, weights, factors, start, end, pos - 1);
        let m = &factors[pos][k];
        match acc.as_mut() {
            Some(a) => a.gemm(1.0, &sub, m, 1.0),
            None => acc = Some(sub * m),
        }
        start = end;
    }
    acc.expect("non-empty range")
}
