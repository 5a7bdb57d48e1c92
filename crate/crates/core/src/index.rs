//! Observed-entry index sets with per-mode slice buckets.

use crate::error::{Error, Result};
use crate::ring::chain_modes;
use crate::tensor::{DenseTensor, Shape};

/// Observed entries of one lateral slice `i_n` of mode `n`.
///
/// `comp` holds `N-1` complementary indices per entry in subchain order
/// `(i_{n+1}, .., i_N, i_1, .., i_{n-1})`; entries are sorted by the
/// first-fastest linearization of that tuple.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SliceBucket {
    comp: Vec<usize>,
    entries: Vec<usize>,
    width: usize,
}

impl SliceBucket {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flat complementary indices, `width()` per entry.
    pub fn comp_flat(&self) -> &[usize] {
        &self.comp
    }

    pub fn comp(&self, e: usize) -> &[usize] {
        &self.comp[e * self.width..(e + 1) * self.width]
    }

    /// Linear (full-tensor) index of each entry.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    shape: Shape,
    linear: Vec<usize>,
    buckets: Vec<Vec<SliceBucket>>,
}

impl IndexSet {
    /// Builds from linear indices; they are sorted, must be unique and in range.
    pub fn from_linear(shape: Shape, mut linear: Vec<usize>) -> Result<Self> {
        linear.sort_unstable();
        if let Some(w) = linear.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidShape(format!("duplicate observed index {}", w[0])));
        }
        if let Some(&last) = linear.last() {
            if last >= shape.numel() {
                return Err(Error::InvalidShape(format!(
                    "observed index {last} outside shape {shape}"
                )));
            }
        }
        let buckets = build_buckets(&shape, &linear);
        Ok(IndexSet {
            shape,
            linear,
            buckets,
        })
    }

    pub fn from_multi(shape: Shape, indices: &[Vec<usize>]) -> Result<Self> {
        let mut linear = Vec::with_capacity(indices.len());
        for idx in indices {
            if idx.len() != shape.order() || idx.iter().zip(shape.dims()).any(|(&i, &d)| i >= d) {
                return Err(Error::InvalidShape(format!(
                    "index {idx:?} outside shape {shape}"
                )));
            }
            linear.push(shape.linear_index(idx));
        }
        Self::from_linear(shape, linear)
    }

    pub fn full(shape: Shape) -> Self {
        let linear = (0..shape.numel()).collect();
        Self::from_linear(shape, linear).expect("full index set is valid")
    }

    /// Entries equal to 1 are observed, 0 missing; anything else is rejected.
    pub fn from_mask_tensor(mask: &DenseTensor) -> Result<Self> {
        let mut linear = Vec::new();
        for (k, &v) in mask.data().iter().enumerate() {
            if v == 1.0 {
                linear.push(k);
            } else if v != 0.0 {
                return Err(Error::Format(format!("mask entry {k} is {v}, expected 0 or 1")));
            }
        }
        Self::from_linear(mask.shape().clone(), linear)
    }

    pub fn to_mask_tensor(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(self.shape.clone());
        for &k in &self.linear {
            t.data_mut()[k] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    /// Sorted linear indices of observed entries.
    pub fn linear(&self) -> &[usize] {
        &self.linear
    }

    pub fn multi_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.linear.iter().map(|&k| self.shape.multi_index(k))
    }

    pub fn bucket(&self, mode: usize, slice: usize) -> &SliceBucket {
        &self.buckets[mode][slice]
    }

    pub fn buckets(&self, mode: usize) -> &[SliceBucket] {
        &self.buckets[mode]
    }

    pub fn contains(&self, linear: usize) -> bool {
        self.linear.binary_search(&linear).is_ok()
    }
}

fn build_buckets(shape: &Shape, linear: &[usize]) -> Vec<Vec<SliceBucket>> {
    let order = shape.order();
    let dims = shape.dims();
    let mut out = Vec::with_capacity(order);
    for mode in 0..order {
        let chain = chain_modes(order, mode);
        let width = chain.len();
        let mut keyed: Vec<Vec<(usize, usize)>> = vec![Vec::new(); dims[mode]];
        for &lin in linear {
            let idx = shape.multi_index(lin);
            let mut key = 0;
            let mut stride = 1;
            for &k in &chain {
                key += idx[k] * stride;
                stride *= dims[k];
            }
            keyed[idx[mode]].push((key, lin));
        }
        let buckets = keyed
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                let mut comp = Vec::with_capacity(v.len() * width);
                let mut entries = Vec::with_capacity(v.len());
                for (_, lin) in v {
                    let idx = shape.multi_index(lin);
                    comp.extend(chain.iter().map(|&k| idx[k]));
                    entries.push(lin);
                }
                SliceBucket {
                    comp,
                    entries,
                    width,
                }
            })
            .collect();
        out.push(buckets);
    }
    out
}

/// Observed entries of mode-`mode` slice `slice`, in cyclic linearization
/// order, with their complementary multi-indices.
pub fn cyclic_unfold_observed(
    t: &DenseTensor,
    mask: &IndexSet,
    mode: usize,
    slice: usize,
) -> (Vec<f64>, Vec<Vec<usize>>) {
    let bucket = mask.bucket(mode, slice);
    let values = bucket.entries().iter().map(|&k| t.data()[k]).collect();
    let comps = (0..bucket.len()).map(|e| bucket.comp(e).to_vec()).collect();
    (values, comps)
}
