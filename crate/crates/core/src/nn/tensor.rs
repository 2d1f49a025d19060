use crate::error::{shape_err, Result};

/// Dense row-major matrix. Vectors are `1 × n`, scalars `1 × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 2],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { shape: [rows, cols], data: vec![0.0; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self { shape: [rows, cols], data: vec![value; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: [1, 1], data: vec![v] }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self { shape: [1, data.len()], data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(format!("{rows}x{cols} tensor needs {} values, got {}", rows * cols, data.len())));
        }
        Ok(Self { shape: [rows, cols], data })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.shape[1] + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.data.len() {
            return Err(shape_err(format!("cannot reshape {:?} to {rows}x{cols}", self.shape)));
        }
        self.shape = [rows, cols];
        Ok(self)
    }

    pub fn transpose(&self) -> Tensor {
        let [r, c] = self.shape;
        let mut out = Tensor::zeros(c, r);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// `a (n×k) · b (k×m)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let ([n, k], [k2, m]) = (a.shape, b.shape);
    if k != k2 {
        return Err(shape_err(format!("matmul {:?} x {:?}", a.shape, b.shape)));
    }
    let mut out = Tensor::zeros(n, m);
    for i in 0..n {
        let orow = &mut out.data[i * m..(i + 1) * m];
        for (p, &av) in a.data[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b.data[p * m..(p + 1) * m]) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` for `a (k×n)`, `b (k×m)`.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let ([k, n], [k2, m]) = (a.shape, b.shape);
    if k != k2 {
        return Err(shape_err(format!("matmul_tn {:?}ᵀ x {:?}", a.shape, b.shape)));
    }
    let mut out = Tensor::zeros(n, m);
    for p in 0..k {
        let brow = &b.data[p * m..(p + 1) * m];
        for (i, &av) in a.data[p * n..(p + 1) * n].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, bv) in out.data[i * m..(i + 1) * m].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ` for `a (n×k)`, `b (m×k)`.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let ([n, k], [m, k2]) = (a.shape, b.shape);
    if k != k2 {
        return Err(shape_err(format!("matmul_nt {:?} x {:?}ᵀ", a.shape, b.shape)));
    }
    let mut out = Tensor::zeros(n, m);
    for i in 0..n {
        let arow = &a.data[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b.data[j * k..(j + 1) * k];
            out.data[i * m + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    Ok(out)
}
