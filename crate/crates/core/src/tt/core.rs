use nalgebra::DMatrix;

/// An order-3 core of extents `(left, mode, right)`.
///
/// Entries are stored so that the left unfolding `U^L` (shape
/// `left*mode x right`) and the right unfolding `U^R` (shape
/// `left x mode*right`) are both plain column-major reads of `data`:
/// entry `(a, i, b)` lives at `a + left * (i + mode * b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Core { left, mode, right, data: vec![0.0; left * mode * right] }
    }

    pub fn from_vec(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), left * mode * right, "core data length");
        Core { left, mode, right, data }
    }

    pub fn from_fn(left: usize, mode: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut core = Core::zeros(left, mode, right);
        for b in 0..right {
            for i in 0..mode {
                for a in 0..left {
                    let idx = core.idx(a, i, b);
                    core.data[idx] = f(a, i, b);
                }
            }
        }
        core
    }

    /// Core whose left unfolding is `m` (`left*mode x right`).
    pub fn from_left_unfolding(m: &DMatrix<f64>, left: usize, mode: usize) -> Self {
        assert_eq!(m.nrows(), left * mode);
        Core { left, mode, right: m.ncols(), data: m.as_slice().to_vec() }
    }

    /// Core whose right unfolding is `m` (`left x mode*right`).
    pub fn from_right_unfolding(m: &DMatrix<f64>, mode: usize, right: usize) -> Self {
        assert_eq!(m.ncols(), mode * right);
        Core { left: m.nrows(), mode, right, data: m.as_slice().to_vec() }
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }
    #[inline]
    pub fn mode(&self) -> usize {
        self.mode
    }
    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    #[inline]
    pub fn idx(&self, a: usize, i: usize, b: usize) -> usize {
        a + self.left * (i + self.mode * b)
    }
    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[self.idx(a, i, b)]
    }
    #[inline]
    pub fn set(&mut self, a: usize, i: usize, b: usize, v: f64) {
        let k = self.idx(a, i, b);
        self.data[k] = v;
    }

    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left * self.mode, self.right, &self.data)
    }

    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left, self.mode * self.right, &self.data)
    }

    /// The slice matrix `U(i)` of shape `left x right`.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.get(a, i, b))
    }

    pub fn set_slice(&mut self, i: usize, m: &DMatrix<f64>) {
        assert_eq!(m.shape(), (self.left, self.right));
        for b in 0..self.right {
            for a in 0..self.left {
                self.set(a, i, b, m[(a, b)]);
            }
        }
    }

    /// `out = v * U(i)` for a row vector `v` of length `left`.
    #[inline]
    pub fn row_times_slice(&self, v: &[f64], i: usize, out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.left);
        debug_assert_eq!(out.len(), self.right);
        let stride = self.left * self.mode;
        let base = self.left * i;
        for (b, o) in out.iter_mut().enumerate() {
            let col = &self.data[base + stride * b..base + stride * b + self.left];
            *o = col.iter().zip(v).map(|(x, y)| x * y).sum();
        }
    }

    /// `out += v * U(i)`.
    #[inline]
    pub fn row_times_slice_add(&self, v: &[f64], i: usize, out: &mut [f64]) {
        let stride = self.left * self.mode;
        let base = self.left * i;
        for (b, o) in out.iter_mut().enumerate() {
            let col = &self.data[base + stride * b..base + stride * b + self.left];
            *o += col.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        }
    }

    /// `out = U(i) * v` for a column vector `v` of length `right`.
    #[inline]
    pub fn slice_times_col(&self, i: usize, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.right);
        debug_assert_eq!(out.len(), self.left);
        out.iter_mut().for_each(|o| *o = 0.0);
        self.slice_times_col_add(i, v, out);
    }

    /// `out += U(i) * v`.
    #[inline]
    pub fn slice_times_col_add(&self, i: usize, v: &[f64], out: &mut [f64]) {
        let stride = self.left * self.mode;
        let base = self.left * i;
        for (b, &vb) in v.iter().enumerate() {
            if vb == 0.0 {
                continue;
            }
            let col = &self.data[base + stride * b..base + stride * b + self.left];
            for (o, x) in out.iter_mut().zip(col) {
                *o += x * vb;
            }
        }
    }

    /// `U(i) += alpha * l r^T` (rank-one update of one slice).
    #[inline]
    pub fn add_outer(&mut self, i: usize, alpha: f64, l: &[f64], r: &[f64]) {
        let stride = self.left * self.mode;
        let base = self.left * i;
        for (b, &rb) in r.iter().enumerate() {
            let s = alpha * rb;
            let col = &mut self.data[base + stride * b..base + stride * b + self.left];
            for (c, &la) in col.iter_mut().zip(l) {
                *c += s * la;
            }
        }
    }

    /// Core with left unfolding `U^L * m`.
    pub fn mul_right(&self, m: &DMatrix<f64>) -> Core {
        Core::from_left_unfolding(&(self.left_unfolding() * m), self.left, self.mode)
    }

    /// Core with right unfolding `m * U^R`.
    pub fn mul_left(&self, m: &DMatrix<f64>) -> Core {
        Core::from_right_unfolding(&(m * self.right_unfolding()), self.mode, self.right)
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Core {
        let mut c = self.clone();
        c.scale(alpha);
        c
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Core) {
        assert_eq!(self.dims(), other.dims());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn dot(&self, other: &Core) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Apply the gauge projector: `U^L <- (I - P P^T) U^L` for an orthonormal `P`.
    pub fn project_out(&self, basis: &DMatrix<f64>) -> Core {
        let m = self.left_unfolding();
        let p = &m - basis * (basis.transpose() * &m);
        Core::from_left_unfolding(&p, self.left, self.mode)
    }
}
