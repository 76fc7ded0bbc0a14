use crate::{Error, Result};
use rand::Rng as _;

/// Dense row-major f64 array. Shapes here are small (desk scale), so clarity
/// beats cleverness: flat Vec, explicit index math, assertions on every
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            n,
            "shape {:?} expects {} entries, got {}",
            shape,
            n,
            data.len()
        );
        Self { shape, data }
    }

    /// Construction from external data additionally rejects non-finite entries.
    pub fn from_external(shape: Vec<usize>, data: Vec<f64>, what: &str) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::Shape(format!(
                "{what}: shape {:?} expects {} entries, got {}",
                shape,
                n,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape.clone())
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![1], data: vec![v] }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn at2_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert_eq!(self.shape.len(), 2);
        &mut self.data[r * self.shape[1] + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.shape[1];
        &mut self.data[r * c..(r + 1) * c]
    }

    /// y = W x for a [m, n] matrix and length-n vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let (m, n) = (self.shape[0], self.shape[1]);
        assert_eq!(x.len(), n, "matvec: [{}x{}] . {}", m, n, x.len());
        let mut y = vec![0.0; m];
        for r in 0..m {
            let row = &self.data[r * n..(r + 1) * n];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[r] = acc;
        }
        y
    }

    /// y = Wᵀ x for a [m, n] matrix and length-m vector.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let (m, n) = (self.shape[0], self.shape[1]);
        assert_eq!(x.len(), m, "matvec_t: [{}x{}]ᵀ . {}", m, n, x.len());
        let mut y = vec![0.0; n];
        for r in 0..m {
            let row = &self.data[r * n..(r + 1) * n];
            let s = x[r];
            for (yc, a) in y.iter_mut().zip(row) {
                *yc += s * a;
            }
        }
        y
    }

    /// Gradient accumulation: self += dy ⊗ x (outer product into a [m, n] matrix).
    pub fn add_outer(&mut self, dy: &[f64], x: &[f64]) {
        let (m, n) = (self.shape[0], self.shape[1]);
        assert_eq!(dy.len(), m);
        assert_eq!(x.len(), n);
        for r in 0..m {
            let row = &mut self.data[r * n..(r + 1) * n];
            let s = dy[r];
            for (w, xv) in row.iter_mut().zip(x) {
                *w += s * xv;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Tensor, s: f64) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn fill(&mut self, v: f64) {
        for a in &mut self.data {
            *a = v;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Uniform init in [-bound, bound].
    pub fn init_uniform(&mut self, rng: &mut crate::rng::Rng, bound: f64) {
        for a in &mut self.data {
            *a = rng.gen_range(-bound..=bound);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    assert_eq!(y.len(), x.len());
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}
