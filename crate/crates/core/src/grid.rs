//! Uniform grid on `[0, 1]` and the quadrature/difference stencils shared by
//! the solver and the diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Uniform grid with `intervals` cells on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    intervals: usize,
}

impl Grid {
    pub const MIN_INTERVALS: usize = 3;

    pub fn new(intervals: usize) -> Result<Self, ModelError> {
        if intervals < Self::MIN_INTERVALS {
            return Err(ModelError::GridTooCoarse { intervals });
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        // exact endpoints regardless of rounding in i * dx
        if i == self.intervals {
            1.0
        } else {
            i as f64 / self.intervals as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Grid with half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            intervals: 2 * self.intervals,
        }
    }
}

/// Composite trapezoid rule for nodal values on a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dx * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Second-order nodal derivative: centered inside, one-sided three-point
/// stencils at both ends.
pub fn nodal_gradient(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let mut grad = Vec::with_capacity(n + 1);
    grad.push(left_derivative(values, dx));
    for i in 1..n {
        grad.push((values[i + 1] - values[i - 1]) / (2.0 * dx));
    }
    grad.push(right_derivative(values, dx));
    grad
}

#[inline]
pub fn left_derivative(values: &[f64], dx: f64) -> f64 {
    // written in differences so that constants give exactly zero
    (4.0 * (values[1] - values[0]) - (values[2] - values[0])) / (2.0 * dx)
}

#[inline]
pub fn right_derivative(values: &[f64], dx: f64) -> f64 {
    let n = values.len() - 1;
    (4.0 * (values[n] - values[n - 1]) - (values[n] - values[n - 2])) / (2.0 * dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coarse_grid_rejected() {
        assert!(Grid::new(2).is_err());
        assert_eq!(Grid::new(3).unwrap().len(), 4);
    }

    #[test]
    fn endpoints_exact() {
        let g = Grid::new(7).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(7), 1.0);
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let g = Grid::new(10).unwrap();
        let v: Vec<f64> = g.nodes().map(|x| 3.0 * x - 1.0).collect();
        assert_relative_eq!(trapezoid(&v, g.dx()), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn gradient_exact_on_quadratic() {
        let g = Grid::new(8).unwrap();
        let v: Vec<f64> = g.nodes().map(|x| x * x - 2.0 * x).collect();
        for (x, d) in g.nodes().zip(nodal_gradient(&v, g.dx())) {
            assert_relative_eq!(d, 2.0 * x - 2.0, epsilon = 1e-12);
        }
    }
}
