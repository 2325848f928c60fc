//! Objective functions, the seeded random quadratic generator, and block
//! partitions of the decision variable.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vecops;

/// A `beta`-strongly convex objective with `K`-Lipschitz gradient.
///
/// Nothing in the hybrid system needs more than this: values, gradients,
/// the two curvature constants and the unique minimizer.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Entries `block` of the gradient at `x`.
    ///
    /// Must agree bitwise with the corresponding slice of [`Objective::gradient`].
    fn gradient_block(&self, x: &[f64], block: Range<usize>) -> Result<Vec<f64>> {
        let g = self.gradient(x)?;
        if block.end > g.len() || block.start > block.end {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                got: block.end,
            });
        }
        Ok(g[block].to_vec())
    }

    /// Strong convexity constant `beta`.
    fn strong_convexity(&self) -> f64;

    /// Lipschitz constant `K` of the gradient.
    fn lipschitz(&self) -> f64;

    fn minimizer(&self) -> &[f64];
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Requested spectrum and seed for a random quadratic.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    eigenvalues: Vec<f64>,
    seed: u64,
}

impl SpectrumSpec {
    pub fn new(eigenvalues: Vec<f64>, seed: u64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidSpectrum("no eigenvalues given".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue {bad} is not strictly positive"
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidSpectrum(
                "eigenvalues must be sorted ascending".into(),
            ));
        }
        Ok(Self { eigenvalues, seed })
    }

    /// `n` eigenvalues spaced linearly from `beta` to `lipschitz`.
    pub fn linear(n: usize, beta: f64, lipschitz: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpectrum("dimension must be positive".into()));
        }
        if !(beta > 0.0 && beta <= lipschitz) {
            return Err(Error::InvalidSpectrum(format!(
                "need 0 < beta <= K, got beta = {beta}, K = {lipschitz}"
            )));
        }
        let eigenvalues = if n == 1 {
            vec![beta]
        } else {
            let step = (lipschitz - beta) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { lipschitz } else { beta + step * i as f64 })
                .collect()
        };
        Self::new(eigenvalues, seed)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn beta(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lipschitz(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// How the linear term `b` of a generated quadratic is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearTerm {
    /// Uniform reals in `[1, 5]`, drawn from the seed stream after `U`.
    Random1To5,
    Zero,
    Explicit(Vec<f64>),
}

/// `L(x) = ½ xᵀQx + bᵀx` with cached curvature constants and minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    n: usize,
    /// Row-major `n × n`.
    q: Vec<f64>,
    b: Vec<f64>,
    beta: f64,
    lipschitz: f64,
    x_star: Vec<f64>,
}

impl QuadraticObjective {
    /// Builds an objective from an explicit SPD matrix.
    ///
    /// `beta` and `lipschitz` are trusted as given; use
    /// [`QuadraticObjective::verify_spectrum`] to cross-check them.
    pub fn new(q: DMatrix<f64>, b: Vec<f64>, beta: f64, lipschitz: f64) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || q.ncols() != n {
            return Err(Error::InvalidSpectrum(format!(
                "Q must be square and nonempty, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        check_dim(n, b.len())?;
        if !(beta > 0.0 && beta <= lipschitz) {
            return Err(Error::InvalidSpectrum(format!(
                "need 0 < beta <= K, got beta = {beta}, K = {lipschitz}"
            )));
        }
        let scale = q.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidSpectrum(format!(
                        "Q is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidSpectrum("Q is not positive definite".into()))?;
        let rhs = nalgebra::DVector::from_iterator(n, b.iter().map(|v| -v));
        let x_star: Vec<f64> = chol.solve(&rhs).iter().copied().collect();

        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                rows.push(q[(i, j)]);
            }
        }
        let obj = Self {
            n,
            q: rows,
            b,
            beta,
            lipschitz,
            x_star,
        };
        let resid = vecops::norm(&obj.gradient_unchecked(&obj.x_star));
        let scale = vecops::norm(&obj.b).max(1.0);
        if resid > 1e-9 * scale {
            return Err(Error::Internal(format!(
                "minimizer solve residual {resid:e} too large"
            )));
        }
        Ok(obj)
    }

    /// Replaces `b` and re-solves for the minimizer.
    pub fn with_linear_term(&self, b: Vec<f64>) -> Result<Self> {
        Self::new(self.q_matrix(), b, self.beta, self.lipschitz)
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.q)
    }

    pub fn q_row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.b
    }

    /// Recomputes the extreme eigenvalues of `Q` and checks them against the
    /// cached `beta` and `K`. Returns the computed `(min, max)`.
    pub fn verify_spectrum(&self, tol: f64) -> Result<(f64, f64)> {
        let eig = nalgebra::SymmetricEigen::new(self.q_matrix());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        let scale = self.lipschitz.max(1.0);
        if (min - self.beta).abs() > tol * scale || (max - self.lipschitz).abs() > tol * scale {
            return Err(Error::InvalidSpectrum(format!(
                "computed extremes ({min}, {max}) disagree with beta = {}, K = {}",
                self.beta, self.lipschitz
            )));
        }
        Ok((min, max))
    }

    fn row_gradient(&self, x: &[f64], i: usize) -> f64 {
        vecops::dot(self.q_row(i), x) + self.b[i]
    }

    fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row_gradient(x, i)).collect()
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.n, x.len())?;
        let mut quad = 0.0;
        for i in 0..self.n {
            quad += x[i] * vecops::dot(self.q_row(i), x);
        }
        Ok(0.5 * quad + vecops::dot(&self.b, x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        Ok(self.gradient_unchecked(x))
    }

    // Same per-row accumulation as `gradient`, so slices agree bitwise.
    fn gradient_block(&self, x: &[f64], block: Range<usize>) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        if block.start > block.end || block.end > self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: block.end,
            });
        }
        Ok(block.map(|i| self.row_gradient(x, i)).collect())
    }

    fn strong_convexity(&self) -> f64 {
        self.beta
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn minimizer(&self) -> &[f64] {
        &self.x_star
    }
}

/// Orthogonal factor of a seeded standard-normal matrix, drawn row by row,
/// with columns sign-flipped so that `R` has a nonnegative diagonal.
fn orthogonal_from_stream(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut g = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let qr = g.qr();
    let r = qr.r();
    let mut u = qr.q();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            u.column_mut(k).neg_mut();
        }
    }
    u
}

/// The orthogonal factor `U` that [`build_quadratic`] uses for `spec`.
pub fn orthogonal_factor(spec: &SpectrumSpec) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    orthogonal_from_stream(spec.dim(), &mut rng)
}

/// `Q = Uᵀ D U` with `D = diag(spec.eigenvalues)` and `b ~ U[1, 5]`.
pub fn build_quadratic(spec: &SpectrumSpec) -> Result<QuadraticObjective> {
    build_quadratic_with(spec, &LinearTerm::Random1To5)
}

pub fn build_quadratic_with(spec: &SpectrumSpec, linear: &LinearTerm) -> Result<QuadraticObjective> {
    let n = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = orthogonal_from_stream(n, &mut rng);

    let mut du = u.clone();
    for (k, &d) in spec.eigenvalues.iter().enumerate() {
        du.row_mut(k).scale_mut(d);
    }
    let mut q = u.transpose() * du;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = avg;
            q[(j, i)] = avg;
        }
    }

    let b = match linear {
        LinearTerm::Random1To5 => (0..n).map(|_| rng.random_range(1.0..=5.0)).collect(),
        LinearTerm::Zero => vec![0.0; n],
        LinearTerm::Explicit(b) => {
            check_dim(n, b.len())?;
            b.clone()
        }
    };
    QuadraticObjective::new(q, b, spec.beta(), spec.lipschitz())
}

/// Assignment of contiguous blocks of `x` to agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("need at least one agent".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("block {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes, offsets })
    }

    /// `agents` contiguous blocks of size `n / agents`, with the remainder
    /// spread one each over the first `n % agents` agents.
    pub fn contiguous(n: usize, agents: usize) -> Result<Self> {
        if agents == 0 || agents > n {
            return Err(Error::InvalidPartition(format!(
                "cannot split dimension {n} across {agents} agents"
            )));
        }
        let base = n / agents;
        let extra = n % agents;
        Self::new((0..agents).map(|i| base + usize::from(i < extra)).collect())
    }

    /// One scalar block per coordinate.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::contiguous(n, n)
    }

    pub fn agents(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.offsets.len() - 1] + self.sizes[self.sizes.len() - 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Index range of agent `i` (zero-based).
    pub fn block(&self, i: usize) -> Result<Range<usize>> {
        if i >= self.sizes.len() {
            return Err(Error::AgentIndexOutOfRange {
                index: i,
                agents: self.sizes.len(),
            });
        }
        Ok(self.offsets[i]..self.offsets[i] + self.sizes[i])
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets
            .iter()
            .zip(&self.sizes)
            .map(|(&o, &s)| o..o + s)
    }
}

/// Block `i` (zero-based) of `∇L(eta)`.
pub fn block_gradient(
    obj: &dyn Objective,
    eta: &[f64],
    partition: &BlockPartition,
    i: usize,
) -> Result<Vec<f64>> {
    check_dim(obj.dim(), partition.dim())?;
    let block = partition.block(i)?;
    obj.gradient_block(eta, block)
}
