//! Axis-aligned boxes, the concrete stand-in for the open sets the maps live on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidInput(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !l.is_finite() || !h.is_finite() || l > h) {
            return Err(Error::InvalidInput(format!(
                "box bounds must be finite with lo <= hi, got {lo:?} / {hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    /// Builds a box from `[[lo, hi], ...]` pairs.
    pub fn from_intervals(intervals: &[[f64; 2]]) -> Result<Self> {
        Self::new(
            intervals.iter().map(|i| i[0]).collect(),
            intervals.iter().map(|i| i[1]).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    pub fn contains_with_margin(&self, p: &[f64], margin: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *x >= l - margin && *x <= h + margin)
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (x, (l, h)) in p.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
    }

    /// Product of `[lhs, rhs]` as one box of dimension `lhs.dim() + rhs.dim()`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        BoxDomain { lo, hi }
    }

    /// Node `index` of the tensor grid with `per_axis` nodes on every axis.
    ///
    /// Nodes include both endpoints; with `per_axis == 1` the center is used.
    pub fn grid_point(&self, per_axis: usize, index: usize) -> Vec<f64> {
        let mut rest = index;
        (0..self.dim())
            .map(|d| {
                let i = rest % per_axis;
                rest /= per_axis;
                linspace_node(self.lo[d], self.hi[d], per_axis, i)
            })
            .collect()
    }

    pub fn grid_len(&self, per_axis: usize) -> usize {
        per_axis.pow(self.dim() as u32)
    }

    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        (0..self.grid_len(per_axis))
            .map(|i| self.grid_point(per_axis, i))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + (h - l) * rng.random::<f64>())
            .collect()
    }
}

/// `i`-th of `count` evenly spaced nodes on `[lo, hi]`.
///
/// Nodes are placed symmetrically about the midpoint, so mirrored nodes of a
/// box centred at 0 are exact negatives and the midpoint itself is exact.
pub fn linspace_node(lo: f64, hi: f64, count: usize, i: usize) -> f64 {
    if count <= 1 || 2 * i == count - 1 {
        return 0.5 * (lo + hi);
    }
    if i == 0 {
        return lo;
    }
    if i == count - 1 {
        return hi;
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let s = (2.0 * i as f64 - (count - 1) as f64) / (count - 1) as f64;
    (center + half * s).clamp(lo, hi)
}

/// Smallest per-axis count whose tensor grid has at least `budget` nodes.
pub fn per_axis_for_budget(budget: usize, dim: usize) -> usize {
    if dim == 0 {
        return 1;
    }
    let mut k = (budget.max(1) as f64).powf(1.0 / dim as f64).floor() as usize;
    k = k.max(1);
    while k.pow(dim as u32) < budget {
        k += 1;
    }
    k
}
