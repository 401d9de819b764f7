//! Geometrically graded history quadrature on `(0, H]`.
//!
//! Cells are `[H s^{j+1}, H s^j]` down to `t_floor`, plus one innermost cell
//! `[0, t_floor]`; each cell is integrated by the midpoint rule. An optional
//! width cap bounds the cells far from zero, which matters for oscillatory
//! forcing.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryQuadrature {
    h: f64,
    sigma: f64,
    t_floor: f64,
    max_cells: usize,
    max_width: Option<f64>,
}

/// A midpoint node with its cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub lo: f64,
    pub hi: f64,
}

impl QuadNode {
    pub fn s(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn weight(&self) -> f64 {
        self.hi - self.lo
    }
}

impl HistoryQuadrature {
    pub const DEFAULT_SIGMA: f64 = 0.85;
    pub const DEFAULT_T_FLOOR: f64 = 1e-6;
    pub const DEFAULT_MAX_CELLS: usize = 100_000;

    pub fn new(h: f64, sigma: f64, t_floor: f64, max_cells: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return invalid(format!("history length H must be positive, got {h}"));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return invalid(format!(
                "grading ratio sigma must lie in (0, 1), got {sigma}"
            ));
        }
        if !(t_floor > 0.0 && t_floor.is_finite()) {
            return invalid(format!("t_floor must be positive, got {t_floor}"));
        }
        if max_cells == 0 {
            return invalid("max_cells must be positive");
        }
        Ok(Self {
            h,
            sigma,
            t_floor,
            max_cells,
            max_width: None,
        })
    }

    /// `sigma = 0.85`, `t_floor = 1e-6`.
    pub fn with_defaults(h: f64) -> Result<Self> {
        Self::new(
            h,
            Self::DEFAULT_SIGMA,
            Self::DEFAULT_T_FLOOR,
            Self::DEFAULT_MAX_CELLS,
        )
    }

    /// Caps every cell width at `w`.
    pub fn with_max_width(mut self, w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return invalid(format!("cell width cap must be positive, got {w}"));
        }
        self.max_width = Some(w);
        Ok(self)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn t_floor(&self) -> f64 {
        self.t_floor
    }

    pub fn max_width(&self) -> Option<f64> {
        self.max_width
    }

    /// Same grading with a different history length.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        let mut q = Self::new(h, self.sigma, self.t_floor, self.max_cells)?;
        q.max_width = self.max_width;
        Ok(q)
    }

    /// Cells covering `[0, H]` in increasing order.
    pub fn cells(&self) -> Result<Vec<QuadNode>> {
        self.cells_with_breaks(None)
    }

    /// Cells covering `[0, H]`, additionally split at every multiple of `step`.
    pub fn cells_with_breaks(&self, step: Option<f64>) -> Result<Vec<QuadNode>> {
        let mut cells = Vec::new();
        let mut a = self.h;
        while a > self.t_floor {
            let mut b = a * self.sigma;
            if let Some(w) = self.max_width {
                b = b.max(a - w);
            }
            if b <= self.t_floor {
                b = self.t_floor;
            }
            cells.push(QuadNode { lo: b, hi: a });
            a = b;
            if cells.len() > self.max_cells {
                return invalid(format!(
                    "graded mesh needs more than {} cells",
                    self.max_cells
                ));
            }
        }
        cells.push(QuadNode {
            lo: 0.0,
            hi: a.min(self.t_floor),
        });
        cells.reverse();
        let Some(step) = step else { return Ok(cells) };
        if !(step > 0.0) {
            return invalid("break step must be positive");
        }
        let mut out = Vec::with_capacity(cells.len());
        for c in cells {
            let mut lo = c.lo;
            let mut k = (lo / step).floor() + 1.0;
            loop {
                let brk = k * step;
                // ignore breaks that would leave sliver cells
                if brk >= c.hi - 1e-12 * step {
                    break;
                }
                if brk > lo + 1e-12 * step {
                    out.push(QuadNode { lo, hi: brk });
                    lo = brk;
                }
                k += 1.0;
            }
            out.push(QuadNode { lo, hi: c.hi });
        }
        if out.len() > self.max_cells {
            return invalid(format!(
                "refined mesh needs more than {} cells",
                self.max_cells
            ));
        }
        Ok(out)
    }

    /// Cells of this mesh lying in `[lo, H]`, split at `lo`.
    pub fn cells_above(&self, lo: f64) -> Result<Vec<QuadNode>> {
        let mut out = Vec::new();
        for c in self.cells()? {
            if c.hi <= lo {
                continue;
            }
            out.push(QuadNode {
                lo: c.lo.max(lo),
                hi: c.hi,
            });
        }
        Ok(out)
    }

    /// Midpoint-rule approximation of `int_0^H g(s) ds`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        Ok(self.cells()?.iter().map(|c| c.weight() * g(c.s())).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_tile_the_interval() {
        let q = HistoryQuadrature::with_defaults(32.0).unwrap();
        let cells = q.cells().unwrap();
        assert_eq!(cells[0].lo, 0.0);
        assert_eq!(cells[cells.len() - 1].hi, 32.0);
        for w in cells.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
        // ratio of consecutive geometric cells
        let n = cells.len();
        let r = cells[n - 2].weight() / cells[n - 1].weight();
        assert!((r - 0.85).abs() < 1e-12);
    }

    #[test]
    fn integrates_weak_singularity() {
        // int_0^1 s^{-3/4} ds = 4
        let q = HistoryQuadrature::new(1.0, 0.9, 1e-12, 100_000).unwrap();
        let v = q.integrate(|s| s.powf(-0.75)).unwrap();
        assert!((v - 4.0).abs() < 1e-2, "{v}");
        let fine = HistoryQuadrature::new(1.0, 0.98, 1e-20, 100_000).unwrap();
        assert!((fine.integrate(|s| s.powf(-0.75)).unwrap() - 4.0).abs() < 5e-4);
    }

    #[test]
    fn width_cap_and_breaks() {
        let q = HistoryQuadrature::new(2.0, 0.5, 1e-3, 1000)
            .unwrap()
            .with_max_width(0.1)
            .unwrap();
        let cells = q.cells_with_breaks(Some(0.25)).unwrap();
        assert!(cells.iter().all(|c| c.weight() <= 0.1 + 1e-15));
        for k in 1..8 {
            let b = k as f64 * 0.25;
            assert!(
                cells.iter().any(|c| (c.hi - b).abs() < 1e-12),
                "missing break {b}"
            );
        }
        let total: f64 = cells.iter().map(|c| c.weight()).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HistoryQuadrature::new(0.0, 0.5, 1e-6, 10).is_err());
        assert!(HistoryQuadrature::new(1.0, 1.0, 1e-6, 10).is_err());
        assert!(HistoryQuadrature::new(1.0, 0.5, 0.0, 10).is_err());
        assert!(HistoryQuadrature::new(1.0, 0.99, 1e-9, 10)
            .unwrap()
            .cells()
            .is_err());
    }
}
