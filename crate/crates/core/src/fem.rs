//! Piecewise-cubic tensor-product Hermite fields over a lazily grown grid.
//!
//! A field of dimension `d` is defined on hypercube cells of a fixed side
//! length. Every grid node carries `2^d` coefficients — one per choice of
//! value-or-slope along each axis — shared by all adjacent cells, which
//! makes the field C1 across faces by construction. Inside a cell the field
//! is the `4^d`-term tensor combination of the 1D cubic Hermite shape
//! functions. Unvisited regions evaluate to zero.
//!
//! Slope coefficients are stored as derivatives in field-coordinate units;
//! the chain-rule factor of the cell side is applied during evaluation, so
//! stored coefficients keep their meaning if the side changes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four cubic Hermite shape functions on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeFn {
    ValueAt0,
    SlopeAt0,
    ValueAt1,
    SlopeAt1,
}

/// Value and first derivative of a 1D Hermite shape function at `x in [0,1]`.
pub fn hermite_1d(kind: ShapeFn, x: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::LocalCoordOutOfRange(x));
    }
    Ok(hermite_1d_unchecked(kind, x))
}

#[inline]
fn hermite_1d_unchecked(kind: ShapeFn, x: f64) -> (f64, f64) {
    let x2 = x * x;
    let x3 = x2 * x;
    match kind {
        ShapeFn::ValueAt0 => (2.0 * x3 - 3.0 * x2 + 1.0, 6.0 * x2 - 6.0 * x),
        ShapeFn::SlopeAt0 => (x3 - 2.0 * x2 + x, 3.0 * x2 - 4.0 * x + 1.0),
        ShapeFn::ValueAt1 => (-2.0 * x3 + 3.0 * x2, -6.0 * x2 + 6.0 * x),
        ShapeFn::SlopeAt1 => (x3 - x2, 3.0 * x2 - 2.0 * x),
    }
}

/// Grid node index (integer coordinates, cell side units).
pub type NodeIndex = Vec<i64>;

/// One cell's basis evaluation: the `4^d` nonzero entries of dF/du at a
/// point, keyed by (node, kind mask). Bit `k` of the mask selects the slope
/// kind along axis `k`.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub cell: NodeIndex,
    pub entries: Vec<(NodeIndex, usize, f64)>,
}

impl CellBasis {
    /// Sum of squared basis values (the self-overlap of the update).
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v * v).sum()
    }
}

/// Scalar field F: R^d -> R with learnable node coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisField {
    dim: usize,
    side: f64,
    nodes: BTreeMap<NodeIndex, Vec<f64>>,
}

impl BasisField {
    pub fn new(dim: usize, side: f64) -> Self {
        assert!(dim >= 1, "field dimension must be at least 1");
        assert!(side > 0.0 && side.is_finite(), "cell side must be positive");
        BasisField {
            dim,
            side,
            nodes: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeIndex, &Vec<f64>)> {
        self.nodes.iter()
    }

    pub fn coefficient(&self, node: &[i64], kind_mask: usize) -> f64 {
        self.nodes
            .get(node)
            .map_or(0.0, |coeffs| coeffs[kind_mask])
    }

    pub fn set_coefficient(&mut self, node: &[i64], kind_mask: usize, value: f64) {
        let dim = self.dim;
        let coeffs = self
            .nodes
            .entry(node.to_vec())
            .or_insert_with(|| vec![0.0; 1 << dim]);
        coeffs[kind_mask] = value;
    }

    /// Containing cell and local coordinates in [0, 1)^d. Points exactly on
    /// a face belong to the higher-index cell with local coordinate 0.
    pub fn locate_cell(&self, theta: &[f64]) -> (NodeIndex, Vec<f64>) {
        assert_eq!(theta.len(), self.dim, "point dimension mismatch");
        let mut cell = Vec::with_capacity(self.dim);
        let mut local = Vec::with_capacity(self.dim);
        for &t in theta {
            let scaled = t / self.side;
            let c = scaled.floor();
            cell.push(c as i64);
            local.push((scaled - c).clamp(0.0, 1.0));
        }
        (cell, local)
    }

    /// Per-axis factor table: for corner bit `c` and kind bit `m`, the shape
    /// value and its derivative with respect to the field coordinate.
    fn axis_factors(&self, local: &[f64]) -> Vec<[(f64, f64); 4]> {
        local
            .iter()
            .map(|&x| {
                let v0 = hermite_1d_unchecked(ShapeFn::ValueAt0, x);
                let s0 = hermite_1d_unchecked(ShapeFn::SlopeAt0, x);
                let v1 = hermite_1d_unchecked(ShapeFn::ValueAt1, x);
                let s1 = hermite_1d_unchecked(ShapeFn::SlopeAt1, x);
                // Index by corner bit | (kind bit << 1); slope shapes carry
                // the cell side so coefficients stay in field units, and
                // derivatives are taken in field coordinates (d local /
                // d theta = 1 / side).
                [
                    (v0.0, v0.1 / self.side),
                    (v1.0, v1.1 / self.side),
                    (s0.0 * self.side, s0.1),
                    (s1.0 * self.side, s1.1),
                ]
            })
            .collect()
    }

    fn for_each_basis(
        &self,
        theta: &[f64],
        visit: impl FnMut(&NodeIndex, usize, f64, &[f64]),
    ) {
        let (cell, local) = self.locate_cell(theta);
        self.for_each_basis_at(&cell, &local, visit);
    }

    fn for_each_basis_at(
        &self,
        cell: &[i64],
        local: &[f64],
        mut visit: impl FnMut(&NodeIndex, usize, f64, &[f64]),
    ) {
        let factors = self.axis_factors(local);
        let dim = self.dim;
        let mut node = vec![0i64; dim];
        let mut grad = vec![0.0; dim];
        for corner in 0..(1usize << dim) {
            for (k, n) in node.iter_mut().enumerate() {
                *n = cell[k] + ((corner >> k) & 1) as i64;
            }
            for kind_mask in 0..(1usize << dim) {
                let mut value = 1.0;
                for (k, f) in factors.iter().enumerate() {
                    let idx = ((corner >> k) & 1) | (((kind_mask >> k) & 1) << 1);
                    value *= f[idx].0;
                }
                for (k, g) in grad.iter_mut().enumerate() {
                    let mut dv = 1.0;
                    for (j, f) in factors.iter().enumerate() {
                        let idx = ((corner >> j) & 1) | (((kind_mask >> j) & 1) << 1);
                        dv *= if j == k { f[idx].1 } else { f[idx].0 };
                    }
                    *g = dv;
                }
                visit(&node, kind_mask, value, &grad);
            }
        }
    }

    /// F(theta).
    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        self.for_each_basis(theta, |node, kind_mask, value, _| {
            if let Some(coeffs) = self.nodes.get(node) {
                total += coeffs[kind_mask] * value;
            }
        });
        total
    }

    /// Analytic gradient dF/dtheta.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.for_each_basis(theta, |node, kind_mask, _, grad| {
            if let Some(coeffs) = self.nodes.get(node) {
                let c = coeffs[kind_mask];
                for (o, g) in out.iter_mut().zip(grad) {
                    *o += c * g;
                }
            }
        });
        out
    }

    /// The sparse dF/du vector at a point: `4^d` (node, kind, value) entries
    /// for the containing cell.
    pub fn basis_vector(&self, theta: &[f64]) -> CellBasis {
        let (cell, _) = self.locate_cell(theta);
        let mut entries = Vec::with_capacity(1 << (2 * self.dim));
        self.for_each_basis(theta, |node, kind_mask, value, _| {
            entries.push((node.clone(), kind_mask, value));
        });
        CellBasis { cell, entries }
    }

    /// u += scale * dF/du(theta), creating missing nodes with zeros.
    pub fn accumulate(&mut self, theta: &[f64], scale: f64) {
        if scale == 0.0 {
            return;
        }
        let basis = self.basis_vector(theta);
        self.accumulate_basis(&basis, scale);
    }

    pub fn accumulate_basis(&mut self, basis: &CellBasis, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let dim = self.dim;
        for (node, kind_mask, value) in &basis.entries {
            let coeffs = self
                .nodes
                .entry(node.clone())
                .or_insert_with(|| vec![0.0; 1 << dim]);
            coeffs[*kind_mask] += scale * value;
        }
    }

    /// self += scale * other (node-wise).
    pub fn axpy(&mut self, scale: f64, other: &BasisField) {
        assert_eq!(self.dim, other.dim, "field dimension mismatch");
        for (node, coeffs) in &other.nodes {
            let dest = self
                .nodes
                .entry(node.clone())
                .or_insert_with(|| vec![0.0; 1 << self.dim]);
            for (d, c) in dest.iter_mut().zip(coeffs) {
                *d += scale * c;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.nodes.values().flatten().all(|v| v.is_finite())
    }

    /// Interpolate a separable function given per-axis value/derivative
    /// evaluators, setting every node in the inclusive index range.
    pub fn interpolate_separable(
        &mut self,
        node_range: std::ops::RangeInclusive<i64>,
        value_fns: &[&dyn Fn(f64) -> f64],
        deriv_fns: &[&dyn Fn(f64) -> f64],
    ) {
        assert_eq!(value_fns.len(), self.dim);
        assert_eq!(deriv_fns.len(), self.dim);
        let lo = *node_range.start();
        let hi = *node_range.end();
        let span = (hi - lo + 1) as usize;
        let mut digits = vec![0usize; self.dim];
        loop {
            let node: NodeIndex = digits.iter().map(|&d| lo + d as i64).collect();
            let mut coeffs = vec![0.0; 1 << self.dim];
            for (mask, c) in coeffs.iter_mut().enumerate() {
                let mut prod = 1.0;
                for k in 0..self.dim {
                    let x = node[k] as f64 * self.side;
                    prod *= if (mask >> k) & 1 == 1 {
                        deriv_fns[k](x)
                    } else {
                        value_fns[k](x)
                    };
                }
                *c = prod;
            }
            self.nodes.insert(node, coeffs);
            let mut k = 0;
            loop {
                if k == self.dim {
                    return;
                }
                digits[k] += 1;
                if digits[k] < span {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
    }
}
