use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evenly spaced grid `{0, R/(m-1), ..., R}` with `m >= 2` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    size: usize,
    upper: f64,
}

impl Grid {
    pub fn new(size: usize, upper: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid size must be at least 2, got {size}"
            )));
        }
        crate::types::ScoreDomain::new(upper)?;
        Ok(Self { size, upper })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        if j + 1 == self.size {
            return self.upper;
        }
        self.upper * j as f64 / (self.size - 1) as f64
    }

    /// Index of the nearest grid point; exact midpoints go to the lower point.
    pub fn nearest(&self, r: f64) -> usize {
        let x = r / self.upper * (self.size - 1) as f64;
        let j = (x.floor().max(0.0) as usize).min(self.size - 1);
        if j + 1 == self.size {
            return j;
        }
        if r - self.point(j) <= self.point(j + 1) - r {
            j
        } else {
            j + 1
        }
    }

    /// `r` rounded to its nearest grid point.
    pub fn round(&self, r: f64) -> f64 {
        self.point(self.nearest(r))
    }
}

/// Binary indexed tree over `m` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fenwick<T> {
    // 1-based; tree[0] unused
    tree: Vec<T>,
}

impl<T> Fenwick<T>
where
    T: Copy + Default + PartialOrd + Add<Output = T> + AddAssign + Sub<Output = T>,
{
    pub fn new(len: usize) -> Self {
        Self {
            tree: vec![T::default(); len + 1],
        }
    }

    pub fn from_values(values: &[T]) -> Self {
        let n = values.len();
        let mut tree = vec![T::default(); n + 1];
        tree[1..].copy_from_slice(values);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                let v = tree[i];
                tree[parent] += v;
            }
        }
        Self { tree }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add(&mut self, idx: usize, v: T) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of cells `[0, end)`.
    pub fn prefix(&self, end: usize) -> T {
        let mut i = end.min(self.len());
        let mut acc = T::default();
        while i > 0 {
            acc += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }

    /// Finds the first cell `j` where `pred(j, sum of cells [0, j])` holds.
    ///
    /// Returns `(j, sum of cells [0, j))`, with `j == len()` when no cell
    /// qualifies. `pred` must be monotone in `j`.
    pub fn first_satisfying(&self, mut pred: impl FnMut(usize, T) -> bool) -> (usize, T) {
        let n = self.len();
        let mut pos = 0;
        let mut acc = T::default();
        let mut step = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n {
                let cand = acc + self.tree[next];
                if !pred(next - 1, cand) {
                    pos = next;
                    acc = cand;
                }
            }
            step >>= 1;
        }
        (pos, acc)
    }

    /// Smallest cell `j` with `sum of cells [0, j] >= k`, for non-negative cells.
    pub fn lower_bound(&self, k: T) -> usize {
        self.first_satisfying(|_, s| s >= k).0
    }

    pub(crate) fn raw_len(&self) -> usize {
        self.tree.len()
    }
}
