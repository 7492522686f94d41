use crate::{Error, Result, RngStream, Scalar};

/// Small dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Validation("ragged matrix rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.iter().flat_map(|row| row.iter().map(|&v| S::lit(v))).collect() })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add shape mismatch");
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect() }
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).fold(S::zero(), |acc, j| acc + self.get(i, j) * v[j]))
            .collect()
    }

    /// `v^T M v`.
    pub fn quad_form(&self, v: &[S]) -> S {
        self.mul_vec(v).iter().zip(v).fold(S::zero(), |acc, (&a, &b)| acc + a * b)
    }

    fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= S::lit(1e-12)))
    }
}

/// Linear dynamics `x' = A x + B a`, reward `-(x^T Q x + a^T R a) + N(0, sigma^2)`,
/// evaluated under the linear policy `a = K x` over `H` steps.
#[derive(Debug, Clone)]
pub struct LqrSystem<S> {
    a: Matrix<S>,
    b: Matrix<S>,
    q: Matrix<S>,
    r: Matrix<S>,
    k: Matrix<S>,
    sigma: S,
    horizon: usize,
    /// `cost_to_go[h - 1] = U_h`, with `U_{H+1} = 0` stored last.
    cost_to_go: Vec<Matrix<S>>,
}

impl<S: Scalar> LqrSystem<S> {
    pub fn new(a: Matrix<S>, b: Matrix<S>, q: Matrix<S>, r: Matrix<S>, k: Matrix<S>, sigma: S, horizon: usize) -> Result<Self> {
        let dx = a.rows;
        let da = b.cols;
        let shapes = [
            (a.cols, dx),
            (b.rows, dx),
            (q.rows, dx),
            (q.cols, dx),
            (r.rows, da),
            (r.cols, da),
            (k.rows, da),
            (k.cols, dx),
        ];
        if let Some(&(got, expected)) = shapes.iter().find(|(g, e)| g != e) {
            return Err(Error::DimensionMismatch { expected, got });
        }
        if !q.is_symmetric() || !r.is_symmetric() {
            return Err(Error::Validation("Q and R must be symmetric".into()));
        }
        if horizon == 0 || !(sigma >= S::zero()) {
            return Err(Error::Validation("need H >= 1 and sigma >= 0".into()));
        }
        // U_h = (Q + K^T R K) + M^T U_{h+1} M with M = A + B K
        let closed = a.add(&b.matmul(&k));
        let stage = q.add(&k.transpose().matmul(&r).matmul(&k));
        let mut cost_to_go = vec![Matrix::zeros(dx, dx); horizon + 1];
        for h in (0..horizon).rev() {
            let next = &cost_to_go[h + 1];
            cost_to_go[h] = stage.add(&closed.transpose().matmul(next).matmul(&closed));
        }
        Ok(Self { a, b, q, r, k, sigma, horizon, cost_to_go })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows
    }

    pub fn action_dim(&self) -> usize {
        self.b.cols
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn policy_action(&self, x: &[S]) -> Vec<S> {
        self.k.mul_vec(x)
    }

    pub fn next_state(&self, x: &[S], u: &[S]) -> Vec<S> {
        self.a.mul_vec(x).iter().zip(self.b.mul_vec(u)).map(|(&p, q)| p + q).collect()
    }

    /// Noise-free stage reward `-(x^T Q x + a^T R a)`.
    pub fn expected_reward(&self, x: &[S], u: &[S]) -> S {
        -(self.q.quad_form(x) + self.r.quad_form(u))
    }

    fn check_dims(&self, x: &[S], u: &[S]) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.state_dim(), got: x.len() });
        }
        if u.len() != self.action_dim() {
            return Err(Error::DimensionMismatch { expected: self.action_dim(), got: u.len() });
        }
        Ok(())
    }

    /// Mean and variance of the Gaussian return from `(x, a)` at step `h`.
    pub fn return_params(&self, x: &[S], u: &[S], h: usize) -> Result<(S, S)> {
        self.check_dims(x, u)?;
        if h == 0 || h > self.horizon {
            return Err(Error::InvalidArgument(format!("step {h} outside 1..={}", self.horizon)));
        }
        let xn = self.next_state(x, u);
        let mean = -self.cost_to_go[h].quad_form(&xn) + self.expected_reward(x, u);
        let variance = S::from_usize_lossy(self.horizon - h + 1) * self.sigma * self.sigma;
        Ok((mean, variance))
    }

    /// One simulated return from `(x, a)` at step `h` following `a = K x` afterwards.
    pub fn sample_return(&self, x: &[S], u: &[S], h: usize, rng: &mut RngStream) -> Result<S> {
        self.check_dims(x, u)?;
        let mut z = S::zero();
        let mut x = x.to_vec();
        let mut u = u.to_vec();
        for step in h..=self.horizon {
            z += self.expected_reward(&x, &u) + self.sigma * S::standard_normal(rng);
            x = self.next_state(&x, &u);
            if step < self.horizon {
                u = self.policy_action(&x);
            }
        }
        Ok(z)
    }
}
