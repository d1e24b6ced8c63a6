use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use super::{Assembly, HkrrProblem};
use crate::error::Result;
use crate::optim::{
    project_spectral_ball, spectral_norm, InnerSolution, TwoBlockObjective,
};

/// HKRR as a two-block objective over `u = vec(B)` (column-major) and `v = α`.
///
/// The kernel matrices of the most recently seen `u` are cached, so the inner
/// α-steps at a fixed map do not reassemble them.
pub struct HkrrObjective<'p, 'a> {
    problem: &'p HkrrProblem<'a>,
    latent_dim: usize,
    cache: Mutex<Option<(DVector<f64>, Arc<Assembly>)>>,
}

impl<'p, 'a> HkrrObjective<'p, 'a> {
    pub fn new(problem: &'p HkrrProblem<'a>, latent_dim: usize) -> Self {
        Self {
            problem,
            latent_dim,
            cache: Mutex::new(None),
        }
    }

    fn assembly(&self, u: &DVector<f64>) -> Result<Arc<Assembly>> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((cached_u, asm)) = cache.as_ref() {
            if cached_u == u {
                return Ok(Arc::clone(asm));
            }
        }
        let asm = Arc::new(self.problem.assemble(&self.to_matrix(u))?);
        *cache = Some((u.clone(), Arc::clone(&asm)));
        Ok(asm)
    }

    fn check_v(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.problem.n_centers() {
            return Err(crate::error::Error::invalid(format!(
                "alpha has length {}, expected {}",
                v.len(),
                self.problem.n_centers()
            )));
        }
        Ok(())
    }

    pub fn problem(&self) -> &HkrrProblem<'a> {
        self.problem
    }

    pub fn to_matrix(&self, u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.latent_dim, self.problem.data().dim(), u.as_slice())
    }

    pub fn to_vector(b: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(b.as_slice())
    }
}

impl TwoBlockObjective for HkrrObjective<'_, '_> {
    fn eval(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check_v(v)?;
        Ok(self.problem.loss_assembled(&*self.assembly(u)?, v))
    }

    fn grad_u(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_v(v)?;
        let asm = self.assembly(u)?;
        Ok(Self::to_vector(&self.problem.grad_b_assembled(&asm, v)))
    }

    fn grad_v(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_v(v)?;
        Ok(self.problem.grad_alpha_assembled(&*self.assembly(u)?, v))
    }

    fn project_u(&self, u: DVector<f64>) -> Result<DVector<f64>> {
        Ok(Self::to_vector(&project_spectral_ball(&self.to_matrix(&u))?))
    }

    fn inner_solve(&self, u: &DVector<f64>) -> Option<Result<InnerSolution>> {
        let solved = self
            .assembly(u)
            .and_then(|asm| self.problem.solve_alpha_assembled(&asm));
        Some(solved.map(|s| InnerSolution {
            v: s.alpha,
            jitter_used: s.jitter_used,
        }))
    }

    // The α-Hessian of the loss is 2·((1/m)K_mnᵀK_mn + λK_nn).
    fn v_smoothness(&self, u: &DVector<f64>) -> Option<Result<f64>> {
        Some(self.assembly(u).and_then(|asm| {
            crate::optim::lipschitz_alpha(&asm.k_mn, &asm.k_nn, self.problem.lambda())
                .map(|l| 2.0 * l)
        }))
    }

    fn constraint_value(&self, u: &DVector<f64>) -> Option<f64> {
        spectral_norm(&self.to_matrix(u)).ok()
    }

    fn conditioning_bound(&self, u: &DVector<f64>) -> Option<f64> {
        self.assembly(u)
            .ok()
            .map(|asm| HkrrProblem::gershgorin_lower_bound(&asm))
    }
}
