//! The Nyström HKRR objective
//!
//! `L(B, α) = (1/m)‖K_mn α − y‖² + λ αᵀ K_nn α`, where `K_mn(i, j) = k(Bx_i, Bx̃_j)`
//! and `K_nn(i, j) = k(Bx̃_i, Bx̃_j)` over the Nyström centers `x̃`.

mod centers;
mod model;
mod sample;
mod two_block;

pub use centers::{als_centers, leverage_scores, uniform_centers};
pub use model::HyperModel;
pub use sample::SampleSet;
pub use two_block::HkrrObjective;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;

pub(crate) use sample::map_rows;

/// Default diagonal jitter, relative to the mean diagonal of the normal-equation
/// matrix.
pub const DEFAULT_JITTER: f64 = 1e-10;

/// Pivot ratio of the stacked least-squares factor below which the system is
/// treated as rank deficient and retried with jitter.
pub const RANK_TOL: f64 = 1e-8;

/// Refinement passes applied after a jittered solve.
const REFINEMENT_STEPS: usize = 5;

/// Kernel matrices of the data and the centers under a fixed map `B`.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub k_mn: DMatrix<f64>,
    pub k_nn: DMatrix<f64>,
    /// `X Bᵀ`, m×d.
    pub mapped: DMatrix<f64>,
    /// `X̃ Bᵀ`, m̃×d.
    pub mapped_centers: DMatrix<f64>,
}

/// Coefficients from the closed-form inner solve.
#[derive(Clone, Debug)]
pub struct AlphaSolution {
    pub alpha: DVector<f64>,
    /// The first factorization failed and the jittered system was used.
    pub jitter_used: bool,
}

/// A training set together with its Nyström centers, kernel and regularization.
#[derive(Clone, Debug)]
pub struct HkrrProblem<'a> {
    data: &'a SampleSet,
    centers: Vec<usize>,
    center_x: DMatrix<f64>,
    kernel: KernelConfig,
    lambda: f64,
    jitter: f64,
}

impl<'a> HkrrProblem<'a> {
    pub fn new(
        data: &'a SampleSet,
        centers: Vec<usize>,
        kernel: KernelConfig,
        lambda: f64,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("at least one Nyström center is required"));
        }
        if let Some(&bad) = centers.iter().find(|&&c| c >= data.len()) {
            return Err(Error::invalid(format!(
                "center index {bad} out of range for {} samples",
                data.len()
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        let center_x = data.x_rows(&centers);
        Ok(Self {
            data,
            centers,
            center_x,
            kernel,
            lambda,
            jitter: DEFAULT_JITTER,
        })
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelConfig) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn data(&self) -> &SampleSet {
        self.data
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn center_rows(&self) -> &DMatrix<f64> {
        &self.center_x
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    fn check_b(&self, b: &DMatrix<f64>) -> Result<()> {
        if b.ncols() != self.data.dim() || b.nrows() == 0 {
            return Err(Error::invalid(format!(
                "map B is {}×{}, expected d×{}",
                b.nrows(),
                b.ncols(),
                self.data.dim()
            )));
        }
        Ok(())
    }

    fn check_alpha(&self, alpha: &DVector<f64>) -> Result<()> {
        if alpha.len() != self.n_centers() {
            return Err(Error::invalid(format!(
                "alpha has length {}, expected {}",
                alpha.len(),
                self.n_centers()
            )));
        }
        Ok(())
    }

    pub fn assemble(&self, b: &DMatrix<f64>) -> Result<Assembly> {
        self.check_b(b)?;
        let mapped = map_rows(self.data.x(), b)?;
        let mapped_centers = map_rows(&self.center_x, b)?;
        let k_mn = self.kernel.matrix(&mapped, &mapped_centers)?;
        let k_nn = self.kernel.gram(&mapped_centers);
        Ok(Assembly {
            k_mn,
            k_nn,
            mapped,
            mapped_centers,
        })
    }

    pub fn loss(&self, b: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<f64> {
        self.check_alpha(alpha)?;
        let asm = self.assemble(b)?;
        Ok(self.loss_assembled(&asm, alpha))
    }

    pub(crate) fn loss_assembled(&self, asm: &Assembly, alpha: &DVector<f64>) -> f64 {
        let m = self.data.len() as f64;
        let residual = &asm.k_mn * alpha - self.data.y();
        residual.norm_squared() / m + self.lambda * alpha.dot(&(&asm.k_nn * alpha))
    }

    /// `(2/m) K_mnᵀ(K_mn α − y) + 2λ K_nn α`.
    pub fn grad_alpha(&self, b: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_alpha(alpha)?;
        let asm = self.assemble(b)?;
        Ok(self.grad_alpha_assembled(&asm, alpha))
    }

    pub(crate) fn grad_alpha_assembled(&self, asm: &Assembly, alpha: &DVector<f64>) -> DVector<f64> {
        let m = self.data.len() as f64;
        let residual = &asm.k_mn * alpha - self.data.y();
        asm.k_mn.tr_mul(&residual) * (2.0 / m) + &asm.k_nn * alpha * (2.0 * self.lambda)
    }

    /// Gradient of the loss with respect to the map `B` (d×D).
    pub fn grad_b(&self, b: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_alpha(alpha)?;
        let asm = self.assemble(b)?;
        Ok(self.grad_b_assembled(&asm, alpha))
    }

    // For a radial kernel, ∂k(Bu, Bv)/∂B = 2φ'(‖B(u−v)‖²)·B(u−v)(u−v)ᵀ. Summing
    // w_ij (z_i − z̃_j)(x_i − x̃_j)ᵀ over all pairs expands into four products
    // with diagonal row/column sums, which avoids forming the D×D outer products.
    pub(crate) fn grad_b_assembled(&self, asm: &Assembly, alpha: &DVector<f64>) -> DMatrix<f64> {
        let m = self.data.len() as f64;
        let x = self.data.x();
        let xc = &self.center_x;
        let z = &asm.mapped;
        let zc = &asm.mapped_centers;
        let residual = &asm.k_mn * alpha - self.data.y();

        let w_data = DMatrix::from_fn(asm.k_mn.nrows(), asm.k_mn.ncols(), |i, j| {
            residual[i] * alpha[j] * 2.0 * self.kernel.profile_slope(asm.k_mn[(i, j)])
        });
        let data_term = pair_sum(&w_data, z, x, zc, xc);

        let w_centers = DMatrix::from_fn(asm.k_nn.nrows(), asm.k_nn.ncols(), |j, l| {
            alpha[j] * alpha[l] * 2.0 * self.kernel.profile_slope(asm.k_nn[(j, l)])
        });
        let center_term = pair_sum(&w_centers, zc, xc, zc, xc);

        data_term * (2.0 / m) + center_term * self.lambda
    }

    /// Normal-equation matrix `K_mnᵀK_mn + λm K_nn` and right-hand side `K_mnᵀy`.
    pub fn normal_equations(&self, asm: &Assembly) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.data.len() as f64;
        let lhs = asm.k_mn.tr_mul(&asm.k_mn) + &asm.k_nn * (self.lambda * m);
        let rhs = asm.k_mn.tr_mul(self.data.y());
        (lhs, rhs)
    }

    /// Closed-form minimizer of `α ↦ L(B, α)`.
    pub fn solve_alpha(&self, b: &DMatrix<f64>) -> Result<AlphaSolution> {
        let asm = self.assemble(b)?;
        self.solve_alpha_assembled(&asm)
    }

    // The normal equations square the condition number of the problem, which
    // for Gaussian kernels at small λ exceeds what double precision resolves.
    // Writing λm·K_nn = SᵀS with S = √(λm)·Λ^{1/2}Uᵀ from the eigendecomposition
    // of K_nn, the same minimizer solves the stacked least-squares problem
    // min ‖[K_mn; S]α − [y; 0]‖², which a QR factorization handles at the
    // original conditioning.
    pub(crate) fn solve_alpha_assembled(&self, asm: &Assembly) -> Result<AlphaSolution> {
        let n = self.n_centers();
        let m = self.data.len();
        let eig = SymmetricEigen::new(asm.k_nn.clone());
        let scale = (self.lambda * m as f64).sqrt();
        let mut stacked = DMatrix::zeros(m + n, n);
        stacked.view_mut((0, 0), (m, n)).copy_from(&asm.k_mn);
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            let w = scale * ev.max(0.0).sqrt();
            for j in 0..n {
                stacked[(m + k, j)] = w * eig.eigenvectors[(j, k)];
            }
        }
        let mut rhs = DVector::zeros(m + n);
        rhs.rows_mut(0, m).copy_from(self.data.y());

        if let Some(alpha) = StackedQr::factor(&stacked, RANK_TOL).and_then(|f| f.solve(&rhs)) {
            return Ok(AlphaSolution {
                alpha,
                jitter_used: false,
            });
        }
        let gram_trace = stacked.norm_squared();
        let shift = (self.jitter * gram_trace / n as f64).sqrt();
        let mut jittered = stacked.clone().resize_vertically(m + 2 * n, 0.0);
        for j in 0..n {
            jittered[(m + n + j, j)] = shift;
        }
        let singular = || Error::SingularSystem {
            min_eigenvalue: SymmetricEigen::new(jittered.tr_mul(&jittered)).eigenvalues.min(),
        };
        let factor = StackedQr::factor(&jittered, 0.0).ok_or_else(singular)?;
        let padded = |v: &DVector<f64>| v.clone().resize_vertically(m + 2 * n, 0.0);
        let mut alpha = factor.solve(&padded(&rhs)).ok_or_else(singular)?;
        // Iterated Tikhonov: each pass solves the jittered problem for the
        // residual of the unjittered one, removing most of the jitter bias.
        for _ in 0..REFINEMENT_STEPS {
            let residual = &rhs - &stacked * &alpha;
            let Some(delta) = factor.solve(&padded(&residual)) else { break };
            alpha += &delta;
            if delta.norm() <= f64::EPSILON * alpha.norm() {
                break;
            }
        }
        Ok(AlphaSolution {
            alpha,
            jitter_used: true,
        })
    }

    /// `Ĥ_λ(B) = min_α L(B, α)`, evaluated as the loss at the closed-form
    /// coefficients. At an exact minimizer this equals
    /// `(1/m)(yᵀy − yᵀK_mn α(B))`; the direct form stays consistent with the
    /// loss seen by the optimizers when the solve needed jitter.
    pub fn reduced_objective(&self, b: &DMatrix<f64>) -> Result<f64> {
        let asm = self.assemble(b)?;
        let sol = self.solve_alpha_assembled(&asm)?;
        Ok(self.loss_assembled(&asm, &sol.alpha))
    }

    /// Package a fitted map and coefficients into a self-contained model.
    pub fn to_model(
        &self,
        b: DMatrix<f64>,
        alpha: DVector<f64>,
        trunc_m: Option<f64>,
    ) -> Result<HyperModel> {
        self.check_b(&b)?;
        self.check_alpha(&alpha)?;
        HyperModel::new(
            b,
            self.centers.clone(),
            self.center_x.clone(),
            alpha,
            self.kernel,
            self.lambda,
            trunc_m,
        )
    }

    /// Gershgorin lower bound on the minimal eigenvalue of `K_nn`.
    pub fn gershgorin_lower_bound(asm: &Assembly) -> f64 {
        let k = &asm.k_nn;
        (0..k.nrows())
            .map(|i| {
                let off: f64 = (0..k.ncols()).filter(|&j| j != i).map(|j| k[(i, j)].abs()).sum();
                k[(i, i)] - off
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `Σ_ij w_ij (a_i − c_j)(p_i − q_j)ᵀ` for row-indexed point sets.
fn pair_sum(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    p: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> DMatrix<f64> {
    let row_sums = DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum()));
    let col_sums = DVector::from_iterator(w.ncols(), w.column_iter().map(|c| c.sum()));
    let mut out = a.tr_mul(&scale_rows(p, &row_sums));
    out -= a.tr_mul(&(w * q));
    out -= c.tr_mul(&w.tr_mul(p));
    out += c.tr_mul(&scale_rows(q, &col_sums));
    out
}

fn scale_rows(m: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= s[i];
    }
    out
}

/// Householder QR of a tall full-column-rank least-squares system.
struct StackedQr {
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
}

impl StackedQr {
    /// `None` when the smallest pivot of `R` falls below `rel_tol` times the
    /// largest one (or below round-off level).
    fn factor(a: &DMatrix<f64>, rel_tol: f64) -> Option<Self> {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag = r.diagonal();
        let max_pivot = diag.amax();
        let min_pivot = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        let tol = rel_tol.max(a.nrows() as f64 * f64::EPSILON);
        (max_pivot > 0.0 && min_pivot > tol * max_pivot).then_some(Self { qr, r })
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.r.ncols();
        let mut qtb = rhs.clone();
        self.qr.q_tr_mul(&mut qtb);
        let x = self.r.solve_upper_triangular(&qtb.rows(0, n).into_owned())?;
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}
