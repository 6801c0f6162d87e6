//! Discrete function spaces: P1 nodal values, P0 cell values and
//! piecewise-constant space-time fields over one segment.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Result};

/// One value per mesh vertex (continuous piecewise-linear field).
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(vertices: usize) -> Self {
        Self {
            values: vec![0.0; vertices],
        }
    }

    pub fn constant(vertices: usize, value: f64) -> Self {
        Self {
            values: vec![value; vertices],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Piecewise-constant cell values, possibly vector valued.
///
/// Values are stored component-major: `values[l * cells + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub components: usize,
    pub cells: usize,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn zeros(components: usize, cells: usize) -> Self {
        Self {
            components,
            cells,
            values: vec![0.0; components * cells],
        }
    }

    pub fn constant(components: usize, cells: usize, value: f64) -> Self {
        Self {
            components,
            cells,
            values: vec![value; components * cells],
        }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Self {
            components: 1,
            cells: values.len(),
            values,
        }
    }

    pub fn from_values(components: usize, cells: usize, values: Vec<f64>) -> Result<Self> {
        check_len("cell field", components * cells, values.len())?;
        Ok(Self {
            components,
            cells,
            values,
        })
    }

    pub fn component(&self, l: usize) -> &[f64] {
        &self.values[l * self.cells..(l + 1) * self.cells]
    }

    pub fn component_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.values[l * self.cells..(l + 1) * self.cells]
    }

    /// Area-weighted L¹ norm of one component.
    pub fn l1_norm(&self, l: usize, areas: &[f64]) -> f64 {
        self.component(l).iter().zip(areas).map(|(v, a)| v.abs() * a).sum()
    }
}

/// Vector-valued P0 field sampled at every time node of a segment.
///
/// Layout is `data[(node * components + l) * cells + c]`, so one time slice is
/// a contiguous [`CellField`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub nodes: usize,
    pub components: usize,
    pub cells: usize,
    pub data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(nodes: usize, components: usize, cells: usize) -> Self {
        Self {
            nodes,
            components,
            cells,
            data: vec![0.0; nodes * components * cells],
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.components == other.components && self.cells == other.cells
    }

    pub fn slice(&self, node: usize) -> &[f64] {
        let stride = self.components * self.cells;
        &self.data[node * stride..(node + 1) * stride]
    }

    pub fn slice_mut(&mut self, node: usize) -> &mut [f64] {
        let stride = self.components * self.cells;
        &mut self.data[node * stride..(node + 1) * stride]
    }

    pub fn component_at(&self, node: usize, l: usize) -> &[f64] {
        let start = (node * self.components + l) * self.cells;
        &self.data[start..start + self.cells]
    }

    pub fn component_at_mut(&mut self, node: usize, l: usize) -> &mut [f64] {
        let start = (node * self.components + l) * self.cells;
        &mut self.data[start..start + self.cells]
    }

    pub fn set_slice(&mut self, node: usize, field: &CellField) -> Result<()> {
        check_len("space-time slice", self.components * self.cells, field.values.len())?;
        self.slice_mut(node).copy_from_slice(&field.values);
        Ok(())
    }

    /// Time slice as a standalone cell field.
    pub fn cell_field(&self, node: usize) -> CellField {
        CellField {
            components: self.components,
            cells: self.cells,
            values: self.slice(node).to_vec(),
        }
    }

    /// Weighted average over time nodes.
    pub fn time_average(&self, weights: &[f64]) -> CellField {
        let total: f64 = weights.iter().sum();
        let mut out = CellField::zeros(self.components, self.cells);
        for (node, w) in weights.iter().enumerate() {
            for (o, v) in out.values.iter_mut().zip(self.slice(node)) {
                *o += w * v;
            }
        }
        if total > 0.0 {
            out.values.iter_mut().for_each(|v| *v /= total);
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
