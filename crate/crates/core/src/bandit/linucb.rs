use nalgebra::{DMatrix, DVector};
use super::{BanditError, FeatureVector};

/// The maintained inverse is rebuilt from the design matrix this often.
pub const REINVERT_EVERY: u64 = 10_000;

/// Ridge-regression state of a (disjoint) LinUCB bandit.
///
/// `design` is `A = ridge * I + sum x x^T`, `response` is `b = sum r x`, and
/// the reward estimate is `theta = A^{-1} b`. The inverse is kept up to date
/// with Sherman-Morrison rank-one corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct LinUcbModel {
    dim: usize,
    alpha: f64,
    ridge: f64,
    design: DMatrix<f64>,
    design_inverse: DMatrix<f64>,
    response: DVector<f64>,
    theta: DVector<f64>,
    updates: u64,
    out_of_range_rewards: u64,
}

impl LinUcbModel {
    pub fn new(dim: usize, alpha: f64, ridge: f64) -> Result<Self, BanditError> {
        if dim == 0 {
            return Err(BanditError::Config("dimension must be at least 1".into()));
        }
        if !(ridge.is_finite() && ridge > 0.0) {
            return Err(BanditError::Config(format!(
                "ridge must be positive and finite, got {ridge}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(BanditError::Config(format!(
                "alpha must be nonnegative and finite, got {alpha}"
            )));
        }
        Ok(Self {
            dim,
            alpha,
            ridge,
            design: DMatrix::identity(dim, dim) * ridge,
            design_inverse: DMatrix::identity(dim, dim) / ridge,
            response: DVector::zeros(dim),
            theta: DVector::zeros(dim),
            updates: 0,
            out_of_range_rewards: 0,
        })
    }

    /// Rebuilds a model from persisted sufficient statistics.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        alpha: f64,
        ridge: f64,
        design: DMatrix<f64>,
        design_inverse: DMatrix<f64>,
        response: DVector<f64>,
        updates: u64,
        out_of_range_rewards: u64,
    ) -> Result<Self, BanditError> {
        let mut model = Self::new(design.nrows(), alpha, ridge)?;
        let dim = model.dim;
        for (shape, what) in [
            (design.shape(), "design"),
            (design_inverse.shape(), "design inverse"),
            ((response.len(), dim), "response"),
        ] {
            if shape != (dim, dim) {
                return Err(BanditError::Config(format!(
                    "{what} has shape {shape:?}, expected {dim}x{dim}"
                )));
            }
        }
        model.theta = &design_inverse * &response;
        model.design = design;
        model.design_inverse = design_inverse;
        model.response = response;
        model.updates = updates;
        model.out_of_range_rewards = out_of_range_rewards;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), BanditError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(BanditError::Config(format!(
                "alpha must be nonnegative and finite, got {alpha}"
            )));
        }
        self.alpha = alpha;
        Ok(())
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn design_inverse(&self) -> &DMatrix<f64> {
        &self.design_inverse
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Number of updates applied since initialization.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Rewards seen outside `[0, 1]`. They are accepted, only counted.
    pub fn out_of_range_rewards(&self) -> u64 {
        self.out_of_range_rewards
    }

    fn check_dim(&self, x: &FeatureVector) -> Result<(), BanditError> {
        if x.dim() != self.dim {
            return Err(BanditError::Shape {
                expected: self.dim,
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Estimated reward `theta^T x`.
    pub fn mean(&self, x: &FeatureVector) -> Result<f64, BanditError> {
        self.check_dim(x)?;
        Ok(dot(self.theta.as_slice(), x.as_slice()))
    }

    /// Confidence width `sqrt(x^T A^{-1} x)`, before scaling by alpha.
    pub fn width(&self, x: &FeatureVector) -> Result<f64, BanditError> {
        self.check_dim(x)?;
        Ok(quad_form(&self.design_inverse, x.as_slice()).max(0.0).sqrt())
    }

    /// `theta^T x + alpha * sqrt(x^T A^{-1} x)`.
    pub fn ucb_score(&self, x: &FeatureVector) -> Result<f64, BanditError> {
        Ok(self.mean(x)? + self.alpha * self.width(x)?)
    }

    /// Index of the highest-scoring candidate; ties go to the lowest index.
    pub fn select(&self, candidates: &[FeatureVector]) -> Result<usize, BanditError> {
        if candidates.is_empty() {
            return Err(BanditError::Usage("no candidates to select from".into()));
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, x) in candidates.iter().enumerate() {
            let score = self.ucb_score(x)?;
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        Ok(best)
    }

    /// Adds the observation `(x, reward)`.
    pub fn update(&mut self, x: &FeatureVector, reward: f64) -> Result<(), BanditError> {
        self.check_dim(x)?;
        if !reward.is_finite() {
            return Err(BanditError::Value(format!("reward {reward}")));
        }
        if !x.is_finite() {
            return Err(BanditError::Value("feature vector".into()));
        }
        if !(0.0..=1.0).contains(&reward) {
            self.out_of_range_rewards += 1;
            tracing::warn!(reward, "reward outside [0, 1]");
        }
        let x = x.as_slice();
        let d = self.dim;

        // A^{-1} x, used by the rank-one correction.
        let ainv_x = mat_vec(&self.design_inverse, x);
        let denom = 1.0 + dot(x, &ainv_x);
        for j in 0..d {
            let (xj, uj) = (x[j], ainv_x[j]);
            if xj == 0.0 && uj == 0.0 {
                continue;
            }
            for i in 0..d {
                self.design[(i, j)] += x[i] * xj;
                self.design_inverse[(i, j)] -= ainv_x[i] * uj / denom;
            }
        }
        for (b, xi) in self.response.iter_mut().zip(x) {
            *b += reward * xi;
        }
        self.updates += 1;
        if self.updates % REINVERT_EVERY == 0 {
            self.reinvert();
        } else {
            self.theta = &self.design_inverse * &self.response;
        }
        Ok(())
    }

    /// Replaces the maintained inverse by a fresh factorization of `A`.
    pub fn reinvert(&mut self) {
        let inverse = self
            .design
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| self.design.clone().try_inverse());
        match inverse {
            Some(inv) => self.design_inverse = inv,
            None => tracing::error!("design matrix is not invertible; keeping maintained inverse"),
        }
        self.theta = &self.design_inverse * &self.response;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    // Column-major storage: accumulate column by column, skipping zeros of x
    // (block encodings are mostly zero).
    let d = x.len();
    let mut out = vec![0.0; d];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let col = m.column(j);
        for (o, c) in out.iter_mut().zip(col.iter()) {
            *o += c * xj;
        }
    }
    out
}

fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    dot(x, &mat_vec(m, x))
}
