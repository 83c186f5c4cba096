//! Discrete inf-sup constant of a velocity/pressure pair.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::MomentumAssembler;
use crate::error::{Error, Result};
use crate::fespace::{Space, Tabulation};
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::sparse::{rcm, LuFactor, PatternBuilder, SparseMatrix};
use crate::tensor::{self, ZERO3};

pub const INVERSE_ITERATION_MAX: usize = 500;
const EIG_RTOL: f64 = 1e-12;

fn mass_and_gram(space: &Arc<Space>, gram: bool) -> Result<SparseMatrix> {
    let mesh = space.mesh();
    let dim = mesh.dim();
    let deg = (2 * space.shape().degree(dim)).max(1);
    let rule = quadrature_rule(dim, deg)?;
    let tab = Tabulation::new(space.shape(), dim, &rule.points);
    let nc = space.ncomp();
    let n = space.n_local();
    let mut pb = PatternBuilder::new(space.ndofs(), space.ndofs());
    for ci in 0..mesh.n_cells() {
        let d = space.cell_dofs(ci);
        pb.insert_block(&d, &d);
    }
    let mut m = pb.build();
    let mut grads = vec![ZERO3; n];
    let rv = QuadratureRule::reference_volume(dim);
    for ci in 0..mesh.n_cells() {
        let jf = mesh.cell_volume(ci) / rv;
        let nodes = space.cell_nodes(ci);
        for (qi, (_, w)) in rule.iter().enumerate() {
            tab.grads(qi, dim, mesh.geometry(ci), &mut grads);
            for a in 0..n {
                for b in 0..n {
                    let v = if gram {
                        tensor::dot(&grads[a], &grads[b])
                    } else {
                        tab.vals[qi][a] * tab.vals[qi][b]
                    };
                    for c in 0..nc {
                        m.add(nodes[a] * nc + c, nodes[b] * nc + c, w * jf * v);
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Schur complement `B A^{-1} B^T` of the `H^1_0` Gram matrix `A`, with its
/// pressure mass matrix and mean vector.
pub fn pressure_schur_complement(
    v: &Arc<Space>,
    q: &Arc<Space>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let mut a = mass_and_gram(v, true)?;
    for i in 0..a.nrows() {
        let (start, end) = (a.indptr()[i], a.indptr()[i + 1]);
        for p in start..end {
            let j = a.indices()[p];
            if v.is_boundary_dof(i) || v.is_boundary_dof(j) {
                a.values_mut()[p] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    let deg = 2 * v.shape().degree(v.dim());
    let mut b = MomentumAssembler::new(v, q, deg.max(1))?.divergence_matrix()?;
    for p in 0..b.nnz() {
        if v.is_boundary_dof(b.indices()[p]) {
            b.values_mut()[p] = 0.0;
        }
    }
    let lu = LuFactor::new(&a, &rcm(&a), 0.1)?;
    let np = q.ndofs();
    let mut s = DMatrix::zeros(np, np);
    let mut col = vec![0.0; v.ndofs()];
    for j in 0..np {
        col.iter_mut().for_each(|x| *x = 0.0);
        let (idx, vals) = b.row(j);
        for (&k, &val) in idx.iter().zip(vals) {
            col[k] = val;
        }
        let x = lu.solve(&col);
        let sx = b.matvec(&x);
        for (i, val) in sx.into_iter().enumerate() {
            s[(i, j)] = val;
        }
    }
    // symmetrize away rounding
    let s = (&s + s.transpose()) * 0.5;
    let mass = mass_and_gram(q, false)?.to_dense();
    let mass = DMatrix::from_fn(np, np, |i, j| mass[i][j]);
    Ok((s, mass, q.basis_integrals()))
}

/// How the discrete pressure kernel is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InfSupMode {
    /// Plain estimate: a pair with spurious pressure modes reports `beta = 0`.
    #[default]
    Standard,
    /// Spurious modes are found by a dense eigendecomposition and shifted
    /// out of the way, so the estimate sees the smallest nonzero eigenvalue.
    /// Used to show how fast an unstable pair degrades on the rest.
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupEstimate {
    pub beta: f64,
    pub iterations: usize,
    /// Dimension of the deflated kernel (diagnostic mode only).
    pub kernel_dim: Option<usize>,
}

/// Eigenvalues below this fraction of the mean eigenvalue count as zero.
const KERNEL_RTOL: f64 = 1e-10;
/// Block size of the subspace inverse iteration.
const BLOCK: usize = 8;

/// Square root of the smallest eigenvalue of `S p = lambda M p` over
/// mean-free pressures, in standard mode.
pub fn estimate_inf_sup(v: &Arc<Space>, q: &Arc<Space>, seed: u64) -> Result<f64> {
    Ok(estimate_inf_sup_with(v, q, InfSupMode::Standard, seed)?.beta)
}

/// Constants are shifted out of the way by adding `2d m m^T / |Omega|`; the
/// eigenvalue comes from block inverse iteration with Rayleigh-Ritz, started
/// from a seeded random block.
pub fn estimate_inf_sup_with(
    v: &Arc<Space>,
    q: &Arc<Space>,
    mode: InfSupMode,
    seed: u64,
) -> Result<InfSupEstimate> {
    if !Arc::ptr_eq(v.mesh(), q.mesh()) {
        return Err(Error::InvalidMesh(
            "inf-sup estimate needs both spaces on one mesh".into(),
        ));
    }
    let np = q.ndofs();
    if np < 2 {
        return Err(Error::Config(
            "pressure space has no mean-free functions".into(),
        ));
    }
    let (s, mass, m) = pressure_schur_complement(v, q)?;
    let vol = q.mesh().total_volume();
    let sigma = 2.0 * v.dim() as f64;
    let mv = DVector::from_column_slice(&m);
    let shifted = &s + (&mv * mv.transpose()) * (sigma / vol);
    let chol = mass
        .cholesky()
        .ok_or_else(|| Error::Config("pressure mass matrix is not positive definite".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Config("pressure mass factor is singular".into()))?;
    let c = &linv * shifted * linv.transpose();
    let mut c = (&c + c.transpose()) * 0.5;
    let scale = c.trace() / np as f64;
    let mut kernel_dim = None;
    if mode == InfSupMode::Diagnostic {
        let eig = c.clone().symmetric_eigen();
        let top = eig.eigenvalues.max();
        let mut count = 0;
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam <= KERNEL_RTOL * scale {
                let k = eig.eigenvectors.column(i);
                c += (k * k.transpose()) * top;
                count += 1;
            }
        }
        kernel_dim = Some(count);
    }
    let found = |lambda: f64, iterations| {
        let beta = if lambda <= KERNEL_RTOL * scale {
            0.0
        } else {
            lambda.sqrt()
        };
        Ok(InfSupEstimate {
            beta,
            iterations,
            kernel_dim,
        })
    };
    let Some(cc) = c.clone().cholesky() else {
        // numerically singular: a nontrivial discrete pressure kernel
        return found(0.0, 0);
    };
    let p = BLOCK.min(np);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_fn(np, p, |_, _| rng.random_range(-1.0..1.0));
    let mut lambda = f64::INFINITY;
    for it in 1..=INVERSE_ITERATION_MAX {
        let y = cc.solve(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return found(0.0, it);
        }
        let basis = y.qr().q();
        let ritz = (basis.transpose() * &c * &basis).symmetric_eigen();
        let next = ritz.eigenvalues.min();
        let done = (next - lambda).abs() <= EIG_RTOL * next.abs().max(f64::EPSILON * scale);
        lambda = next;
        x = &basis * ritz.eigenvectors;
        if done {
            return found(lambda.max(0.0), it);
        }
    }
    Err(Error::NonConvergence {
        what: "inf-sup inverse iteration",
        iterations: INVERSE_ITERATION_MAX,
        last_change: lambda,
        trace: None,
    })
}
