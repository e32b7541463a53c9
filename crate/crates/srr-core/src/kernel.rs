use crate::error::{Result, SrrError};

/// A finite-support 2D FIR filter.
///
/// The tap stored at grid position `(r, c)` acts at spatial offset
/// `(r - origin.0, c - origin.1)`. Convolution by a kernel `k` computes
/// `y(n) = sum_m k(m) x(n - m)` over the kernel's spatial offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    rows: usize,
    cols: usize,
    /// Row, col offset of the tap at spatial index (0, 0).
    origin: (i32, i32),
    taps: Vec<f64>,
}

impl Kernel2D {
    pub fn new(rows: usize, cols: usize, origin: (i32, i32), taps: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || taps.len() != rows * cols {
            return Err(SrrError::Dimension(format!(
                "kernel taps length {} does not match {}x{}",
                taps.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, origin, taps })
    }

    /// Square kernel centered at its middle tap; `side` must be odd.
    pub fn centered(side: usize, taps: Vec<f64>) -> Result<Self> {
        assert!(side % 2 == 1, "centered kernel needs odd side");
        let half = (side / 2) as i32;
        Self::new(side, side, (half, half), taps)
    }

    /// The Kronecker delta.
    pub fn delta() -> Self {
        Self { rows: 1, cols: 1, origin: (0, 0), taps: vec![1.0] }
    }

    /// A delta shifted to spatial offset `(dr, dc)`.
    pub fn shifted_delta(dr: i32, dc: i32) -> Self {
        Self { rows: 1, cols: 1, origin: (-dr, -dc), taps: vec![1.0] }
    }

    /// The all-zero 1x1 kernel.
    pub fn zero() -> Self {
        Self { rows: 1, cols: 1, origin: (0, 0), taps: vec![0.0] }
    }

    /// Uniform blur with unit DC gain (each tap `1/side^2`).
    pub fn uniform(side: usize) -> Self {
        let n = side * side;
        Self::centered(side, vec![1.0 / n as f64; n]).unwrap()
    }

    /// The 4-neighbor Laplacian scaled by 1/8 so its spectral magnitude
    /// stays at or below one.
    pub fn scaled_laplacian() -> Self {
        let t = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];
        Self::centered(3, t.iter().map(|v| v / 8.0).collect()).unwrap()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn origin(&self) -> (i32, i32) {
        self.origin
    }

    #[inline]
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, r: usize, c: usize) -> f64 {
        self.taps[r * self.cols + c]
    }

    /// Tap value at a spatial offset, zero outside the support.
    pub fn tap_at_offset(&self, dr: i32, dc: i32) -> f64 {
        let r = dr + self.origin.0;
        let c = dc + self.origin.1;
        if r < 0 || c < 0 || r >= self.rows as i32 || c >= self.cols as i32 {
            0.0
        } else {
            self.taps[r as usize * self.cols + c as usize]
        }
    }

    /// Iterate over `(row_offset, col_offset, tap)` for every stored tap.
    pub fn offsets(&self) -> impl Iterator<Item = (i32, i32, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).map(move |c| {
                (
                    r as i32 - self.origin.0,
                    c as i32 - self.origin.1,
                    self.taps[r * self.cols + c],
                )
            })
        })
    }

    /// Spatial time-reversal `k(n) -> k(-n)`; an involution.
    pub fn flipped(&self) -> Kernel2D {
        let mut taps = vec![0.0; self.taps.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                taps[(self.rows - 1 - r) * self.cols + (self.cols - 1 - c)] =
                    self.taps[r * self.cols + c];
            }
        }
        Kernel2D {
            rows: self.rows,
            cols: self.cols,
            origin: (
                self.rows as i32 - 1 - self.origin.0,
                self.cols as i32 - 1 - self.origin.1,
            ),
            taps,
        }
    }

    /// Full (support-growing) convolution of two kernels.
    pub fn convolve(&self, other: &Kernel2D) -> Kernel2D {
        let rows = self.rows + other.rows - 1;
        let cols = self.cols + other.cols - 1;
        let origin = (self.origin.0 + other.origin.0, self.origin.1 + other.origin.1);
        let mut taps = vec![0.0; rows * cols];
        for ra in 0..self.rows {
            for ca in 0..self.cols {
                let a = self.taps[ra * self.cols + ca];
                if a == 0.0 {
                    continue;
                }
                for rb in 0..other.rows {
                    for cb in 0..other.cols {
                        taps[(ra + rb) * cols + (ca + cb)] +=
                            a * other.taps[rb * other.cols + cb];
                    }
                }
            }
        }
        Kernel2D { rows, cols, origin, taps }
    }

    /// Elementwise sum on the union support.
    pub fn add(&self, other: &Kernel2D) -> Kernel2D {
        let top = (-self.origin.0).min(-other.origin.0);
        let left = (-self.origin.1).min(-other.origin.1);
        let bottom = (self.rows as i32 - 1 - self.origin.0).max(other.rows as i32 - 1 - other.origin.0);
        let right = (self.cols as i32 - 1 - self.origin.1).max(other.cols as i32 - 1 - other.origin.1);
        let rows = (bottom - top + 1) as usize;
        let cols = (right - left + 1) as usize;
        let origin = (-top, -left);
        let mut taps = vec![0.0; rows * cols];
        for (dr, dc, v) in self.offsets().chain(other.offsets()) {
            let r = (dr + origin.0) as usize;
            let c = (dc + origin.1) as usize;
            taps[r * cols + c] += v;
        }
        Kernel2D { rows, cols, origin, taps }
    }

    pub fn scaled(&self, s: f64) -> Kernel2D {
        Kernel2D {
            rows: self.rows,
            cols: self.cols,
            origin: self.origin,
            taps: self.taps.iter().map(|v| v * s).collect(),
        }
    }

    /// Sum of taps (DC gain).
    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Sum of squared tap values.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|v| v * v).sum()
    }

    /// Largest absolute row/col offset of any stored tap.
    pub fn support_radius(&self) -> i32 {
        self.offsets()
            .map(|(dr, dc, _)| dr.abs().max(dc.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Drop all-zero border rows and columns; keeps at least one tap.
    pub fn trimmed(&self) -> Kernel2D {
        let mut rmin = self.rows;
        let mut rmax = 0usize;
        let mut cmin = self.cols;
        let mut cmax = 0usize;
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.taps[r * self.cols + c] != 0.0 {
                    rmin = rmin.min(r);
                    rmax = rmax.max(r);
                    cmin = cmin.min(c);
                    cmax = cmax.max(c);
                }
            }
        }
        if rmin > rmax {
            return Kernel2D::zero();
        }
        let rows = rmax - rmin + 1;
        let cols = cmax - cmin + 1;
        let mut taps = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                taps[r * cols + c] = self.taps[(r + rmin) * self.cols + (c + cmin)];
            }
        }
        Kernel2D {
            rows,
            cols,
            origin: (self.origin.0 - rmin as i32, self.origin.1 - cmin as i32),
            taps,
        }
    }
}
