//! Element-loop assembly of the momentum saddle-point system, the
//! concentration system, load vectors and the skew convection forms.

use std::sync::Arc;

use crate::constitutive::{FluxLaw, StressLaw};
use crate::error::{Error, Result};
use crate::fespace::{Field, Space, Tabulation};
use crate::mesh::Mesh;
use crate::quadrature::{quadrature_rule, QuadratureRule};
use crate::sparse::{PatternBuilder, SparseMatrix};
use crate::tensor::{self, Point, Vec3, ZERO3, ZERO33};

pub use crate::quadrature::MAX_DEGREE;

/// Default assembly quadrature degree (twice the velocity degree plus one).
pub const DEFAULT_QUAD_DEGREE: usize = 5;

pub type VectorFn<'a> = &'a (dyn Fn(&Point) -> Vec3 + Sync);
pub type ScalarFn<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

/// Physical weight factor: |E| / |reference simplex|.
fn jacobian_factor(mesh: &Mesh, cell: usize) -> f64 {
    mesh.cell_volume(cell) / QuadratureRule::reference_volume(mesh.dim())
}

/// Momentum blocks before boundary conditions.
#[derive(Debug, Clone)]
pub struct MomentumParts {
    pub viscous: SparseMatrix,
    pub convection: SparseMatrix,
    pub regularization: SparseMatrix,
    /// `Bdiv[q, v] = int Q div V`.
    pub divergence: SparseMatrix,
    pub load: Vec<f64>,
}

/// `[A, -Bdiv^T; -Bdiv, 0]` data with the pressure mean constraint `m`.
/// Velocity Dirichlet rows and columns are already eliminated.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub bdiv: SparseMatrix,
    pub f: Vec<f64>,
    /// Volume integrals of the pressure basis.
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumOptions {
    /// Regularization exponent.
    pub t: f64,
    /// Regularization parameter; `f64::INFINITY` disables the term.
    pub k_reg: f64,
    pub convection: bool,
    pub quad_degree: usize,
}

impl Default for MomentumOptions {
    fn default() -> Self {
        MomentumOptions {
            t: 8.0,
            k_reg: 1e4,
            convection: true,
            quad_degree: DEFAULT_QUAD_DEGREE,
        }
    }
}

impl MomentumOptions {
    pub fn regularized(&self) -> bool {
        self.k_reg.is_finite()
    }
}

/// Precomputed patterns and tabulations for repeated momentum assembly on
/// fixed spaces.
#[derive(Debug)]
pub struct MomentumAssembler {
    v: Arc<Space>,
    q: Arc<Space>,
    rule: QuadratureRule,
    tab_v: Tabulation,
    tab_q: Tabulation,
    pattern_a: SparseMatrix,
    pattern_b: SparseMatrix,
    mean: Vec<f64>,
}

impl MomentumAssembler {
    pub fn new(v: &Arc<Space>, q: &Arc<Space>, quad_degree: usize) -> Result<Self> {
        if !Arc::ptr_eq(v.mesh(), q.mesh()) {
            return Err(Error::InvalidMesh(
                "velocity and pressure spaces must share the fluid mesh".into(),
            ));
        }
        let dim = v.dim();
        let rule = quadrature_rule(dim, quad_degree)?;
        let tab_v = Tabulation::new(v.shape(), dim, &rule.points);
        let tab_q = Tabulation::new(q.shape(), dim, &rule.points);
        let mut pa = PatternBuilder::new(v.ndofs(), v.ndofs());
        let mut pb = PatternBuilder::new(q.ndofs(), v.ndofs());
        for ci in 0..v.mesh().n_cells() {
            let vd = v.cell_dofs(ci);
            let qd = q.cell_dofs(ci);
            pa.insert_block(&vd, &vd);
            pb.insert_block(&qd, &vd);
        }
        Ok(MomentumAssembler {
            v: v.clone(),
            q: q.clone(),
            rule,
            tab_v,
            tab_q,
            pattern_a: pa.build(),
            pattern_b: pb.build(),
            mean: q.basis_integrals(),
        })
    }

    pub fn velocity_space(&self) -> &Arc<Space> {
        &self.v
    }

    pub fn pressure_space(&self) -> &Arc<Space> {
        &self.q
    }

    /// `int Q div V` without boundary elimination.
    pub fn divergence_matrix(&self) -> Result<SparseMatrix> {
        let v = &self.v;
        let mesh = v.mesh().as_ref();
        let dim = mesh.dim();
        let nloc = v.n_local();
        let mut b = self.pattern_b.clone();
        let mut grads = vec![ZERO3; nloc];
        for ci in 0..mesh.n_cells() {
            let geo = mesh.geometry(ci);
            let jf = jacobian_factor(mesh, ci);
            let dofs = v.cell_dofs(ci);
            let qdofs = self.q.cell_dofs(ci);
            for (qi, (_, w)) in self.rule.iter().enumerate() {
                self.tab_v.grads(qi, dim, geo, &mut grads);
                for (p, &qd) in qdofs.iter().enumerate() {
                    let psi = self.tab_q.vals[qi][p];
                    for a in 0..nloc {
                        for j in 0..dim {
                            b.add(qd, dofs[a * dim + j], w * jf * psi * grads[a][j]);
                        }
                    }
                }
            }
        }
        Ok(b)
    }

    /// Assembles every block with viscosity and regularization weight
    /// frozen at `frozen`; `conc` may live on another mesh.
    pub fn assemble_parts(
        &self,
        conc: &Field,
        frozen: &Field,
        law: &StressLaw,
        forcing: VectorFn<'_>,
        opts: &MomentumOptions,
    ) -> Result<MomentumParts> {
        let v = &self.v;
        let mesh = v.mesh().as_ref();
        let dim = mesh.dim();
        let nloc = v.n_local();
        let nq = self.tab_q.n;
        let nd = nloc * dim;
        let mut viscous = self.pattern_a.clone();
        let mut convection = self.pattern_a.clone();
        let mut regularization = self.pattern_a.clone();
        let mut divergence = self.pattern_b.clone();
        let mut load = vec![0.0; v.ndofs()];
        let inv_k = if opts.regularized() {
            1.0 / opts.k_reg
        } else {
            0.0
        };

        let mut grads = vec![ZERO3; nloc];
        let mut kv = vec![0.0; nd * nd];
        let mut kc = vec![0.0; nd * nd];
        let mut kr = vec![0.0; nd * nd];
        let mut kb = vec![0.0; nq * nd];
        let mut fl = vec![0.0; nd];
        let fz = frozen.coeffs();
        for ci in 0..mesh.n_cells() {
            let geo = mesh.geometry(ci);
            let jf = jacobian_factor(mesh, ci);
            let dofs = v.cell_dofs(ci);
            let qdofs = self.q.cell_dofs(ci);
            kv.iter_mut().for_each(|x| *x = 0.0);
            kc.iter_mut().for_each(|x| *x = 0.0);
            kr.iter_mut().for_each(|x| *x = 0.0);
            kb.iter_mut().for_each(|x| *x = 0.0);
            fl.iter_mut().for_each(|x| *x = 0.0);
            for (qi, (bary, w)) in self.rule.iter().enumerate() {
                let w = w * jf;
                self.tab_v.grads(qi, dim, geo, &mut grads);
                let phi = &self.tab_v.vals[qi];
                // frozen velocity and its gradient
                let mut u0 = ZERO3;
                let mut g0 = ZERO33;
                for a in 0..nloc {
                    for i in 0..dim {
                        let c = fz[dofs[a * dim + i]];
                        u0[i] += c * phi[a];
                        for k in 0..dim {
                            g0[i][k] += c * grads[a][k];
                        }
                    }
                }
                let d0 = tensor::sym(&g0);
                let cval = conc.eval_on(mesh, ci, bary)?.value[0];
                let nu = law.viscosity(cval, tensor::ddot(&d0, &d0))?;
                if !nu.is_finite() {
                    return Err(Error::NonFiniteViscosity { cell: ci });
                }
                let reg = if inv_k > 0.0 {
                    inv_k * tensor::norm(&u0).powf(opts.t - 2.0)
                } else {
                    0.0
                };
                let x = mesh.point_at(ci, bary);
                let f = forcing(&x);
                for a in 0..nloc {
                    let ga = grads[a];
                    let ua = tensor::dot(&u0, &ga);
                    for i in 0..dim {
                        let row = a * dim + i;
                        fl[row] += w * f[i] * phi[a];
                        for b in 0..nloc {
                            let gb = grads[b];
                            let gab = tensor::dot(&ga, &gb);
                            let ub = tensor::dot(&u0, &gb);
                            for j in 0..dim {
                                let col = b * dim + j;
                                let mut vis = 0.5 * ga[j] * gb[i];
                                if i == j {
                                    vis += 0.5 * gab;
                                    kc[row * nd + col] += w * 0.5 * (phi[a] * ub - phi[b] * ua);
                                    kr[row * nd + col] += w * reg * phi[a] * phi[b];
                                }
                                kv[row * nd + col] += w * nu * vis;
                            }
                        }
                    }
                }
                let psi = &self.tab_q.vals[qi];
                for p in 0..nq {
                    for b in 0..nloc {
                        for j in 0..dim {
                            kb[p * nd + b * dim + j] += w * psi[p] * grads[b][j];
                        }
                    }
                }
            }
            for r in 0..nd {
                load[dofs[r]] += fl[r];
                for c in 0..nd {
                    viscous.add(dofs[r], dofs[c], kv[r * nd + c]);
                    if opts.convection {
                        convection.add(dofs[r], dofs[c], kc[r * nd + c]);
                    }
                    if inv_k > 0.0 {
                        regularization.add(dofs[r], dofs[c], kr[r * nd + c]);
                    }
                }
            }
            for p in 0..nq {
                for c in 0..nd {
                    divergence.add(qdofs[p], dofs[c], kb[p * nd + c]);
                }
            }
        }
        Ok(MomentumParts {
            viscous,
            convection,
            regularization,
            divergence,
            load,
        })
    }

    /// Full system with homogeneous velocity Dirichlet data eliminated
    /// symmetrically (unit diagonal, zero row/column, zero load).
    pub fn assemble(
        &self,
        conc: &Field,
        frozen: &Field,
        law: &StressLaw,
        forcing: VectorFn<'_>,
        opts: &MomentumOptions,
    ) -> Result<SaddleSystem> {
        let parts = self.assemble_parts(conc, frozen, law, forcing, opts)?;
        let mut a = parts.viscous;
        {
            let av = a.values_mut();
            for (k, (c, r)) in parts
                .convection
                .values()
                .iter()
                .zip(parts.regularization.values())
                .enumerate()
            {
                av[k] += c + r;
            }
        }
        let mut f = parts.load;
        let mut bdiv = parts.divergence;
        eliminate_dirichlet(&mut a, &mut f, &self.v, None);
        zero_columns(&mut bdiv, &self.v);
        Ok(SaddleSystem {
            a,
            bdiv,
            f,
            m: self.mean.clone(),
        })
    }
}

/// Zeroes boundary rows and columns, puts 1 on their diagonal. With
/// `values`, the right-hand side is corrected for nonzero boundary data
/// and boundary entries of `f` are set to those values.
pub(crate) fn eliminate_dirichlet(
    a: &mut SparseMatrix,
    f: &mut [f64],
    space: &Space,
    values: Option<&[f64]>,
) {
    if let Some(g) = values {
        let ag = a.matvec(&mask_boundary(g, space));
        for (i, fi) in f.iter_mut().enumerate() {
            if !space.is_boundary_dof(i) {
                *fi -= ag[i];
            }
        }
    }
    let n = a.nrows();
    for i in 0..n {
        let start = a.indptr()[i];
        let end = a.indptr()[i + 1];
        let row_bc = space.is_boundary_dof(i);
        for p in start..end {
            let j = a.indices()[p];
            if row_bc || space.is_boundary_dof(j) {
                a.values_mut()[p] = if i == j { 1.0 } else { 0.0 };
            }
        }
        if row_bc {
            f[i] = values.map_or(0.0, |g| g[i]);
        }
    }
}

fn mask_boundary(g: &[f64], space: &Space) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(i, &v)| if space.is_boundary_dof(i) { v } else { 0.0 })
        .collect()
}

fn zero_columns(b: &mut SparseMatrix, space: &Space) {
    for p in 0..b.nnz() {
        if space.is_boundary_dof(b.indices()[p]) {
            b.values_mut()[p] = 0.0;
        }
    }
}

/// One-shot momentum assembly; see [`MomentumAssembler`].
#[allow(clippy::too_many_arguments)]
pub fn assemble_momentum_system(
    v: &Arc<Space>,
    q: &Arc<Space>,
    conc: &Field,
    frozen: &Field,
    law: &StressLaw,
    forcing: VectorFn<'_>,
    opts: &MomentumOptions,
) -> Result<SaddleSystem> {
    MomentumAssembler::new(v, q, opts.quad_degree)?.assemble(conc, frozen, law, forcing, opts)
}

/// Concentration matrix split into diffusion and skew convection.
#[derive(Debug, Clone)]
pub struct ConcentrationParts {
    pub diffusion: SparseMatrix,
    pub convection: SparseMatrix,
    pub source: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConcentrationSystem {
    /// Matrix acting on the homogeneous part `C - lift`.
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

#[derive(Debug)]
pub struct ConcentrationAssembler {
    z: Arc<Space>,
    rule: QuadratureRule,
    tab: Tabulation,
    pattern: SparseMatrix,
    convection: bool,
}

impl ConcentrationAssembler {
    pub fn new(z: &Arc<Space>, quad_degree: usize) -> Result<Self> {
        let dim = z.dim();
        let rule = quadrature_rule(dim, quad_degree)?;
        let tab = Tabulation::new(z.shape(), dim, &rule.points);
        let mut pb = PatternBuilder::new(z.ndofs(), z.ndofs());
        for ci in 0..z.mesh().n_cells() {
            let d = z.cell_dofs(ci);
            pb.insert_block(&d, &d);
        }
        Ok(ConcentrationAssembler {
            z: z.clone(),
            rule,
            tab,
            pattern: pb.build(),
            convection: true,
        })
    }

    /// Drops the convection term from [`ConcentrationAssembler::assemble`].
    pub fn with_convection(mut self, on: bool) -> Self {
        self.convection = on;
        self
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.z
    }

    /// `int kappa(C_frozen, |DU|) grad C . grad Z + B_c[C, U, Z]` and the
    /// optional source `int g Z`.
    pub fn assemble_parts(
        &self,
        velocity: &Field,
        frozen: &Field,
        law: &FluxLaw,
        source: Option<ScalarFn<'_>>,
    ) -> Result<ConcentrationParts> {
        let z = &self.z;
        let mesh = z.mesh().as_ref();
        let dim = mesh.dim();
        let n = z.n_local();
        let mut diffusion = self.pattern.clone();
        let mut convection = self.pattern.clone();
        let mut src = vec![0.0; z.ndofs()];
        let mut grads = vec![ZERO3; n];
        let mut kd = vec![0.0; n * n];
        let mut kc = vec![0.0; n * n];
        let fc = frozen.coeffs();
        for ci in 0..mesh.n_cells() {
            let geo = mesh.geometry(ci);
            let jf = jacobian_factor(mesh, ci);
            let dofs = z.cell_nodes(ci);
            kd.iter_mut().for_each(|x| *x = 0.0);
            kc.iter_mut().for_each(|x| *x = 0.0);
            for (qi, (bary, w)) in self.rule.iter().enumerate() {
                let w = w * jf;
                self.tab.grads(qi, dim, geo, &mut grads);
                let phi = &self.tab.vals[qi];
                let c0: f64 = (0..n).map(|a| fc[dofs[a]] * phi[a]).sum();
                let uv = velocity.eval_on(mesh, ci, bary)?;
                let du = tensor::sym(&uv.grad);
                let kappa = law.diffusivity(c0, tensor::ddot(&du, &du));
                let u = uv.value;
                if let Some(g) = source {
                    let gx = g(&mesh.point_at(ci, bary));
                    for a in 0..n {
                        src[dofs[a]] += w * gx * phi[a];
                    }
                }
                for a in 0..n {
                    let ua = tensor::dot(&u, &grads[a]);
                    for b in 0..n {
                        let ub = tensor::dot(&u, &grads[b]);
                        kd[a * n + b] += w * kappa * tensor::dot(&grads[a], &grads[b]);
                        kc[a * n + b] += w * 0.5 * (phi[a] * ub - phi[b] * ua);
                    }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    diffusion.add(dofs[a], dofs[b], kd[a * n + b]);
                    convection.add(dofs[a], dofs[b], kc[a * n + b]);
                }
            }
        }
        Ok(ConcentrationParts {
            diffusion,
            convection,
            source: src,
        })
    }

    /// System for the homogeneous part: the lift's contribution moves to
    /// the right-hand side, boundary rows become identity rows.
    pub fn assemble(
        &self,
        velocity: &Field,
        frozen: &Field,
        law: &FluxLaw,
        lift: &Field,
        source: Option<ScalarFn<'_>>,
    ) -> Result<ConcentrationSystem> {
        let parts = self.assemble_parts(velocity, frozen, law, source)?;
        let mut matrix = parts.diffusion;
        if self.convection {
            for (m, c) in matrix
                .values_mut()
                .iter_mut()
                .zip(parts.convection.values())
            {
                *m += c;
            }
        }
        // Split lift = shift + rest. Diffusion kills the constant exactly, so
        // only its convective image is formed; constant data then gives a
        // zero right-hand side without row-sum roundoff.
        let shift = (0..self.z.ndofs())
            .find(|&i| self.z.is_boundary_dof(i))
            .map_or(0.0, |i| lift.coeffs()[i]);
        let rest: Vec<f64> = lift.coeffs().iter().map(|l| l - shift).collect();
        let mut kl = matrix.matvec(&rest);
        if self.convection && shift != 0.0 {
            let ones = vec![shift; rest.len()];
            for (k, c) in kl.iter_mut().zip(parts.convection.matvec(&ones)) {
                *k += c;
            }
        }
        let mut rhs: Vec<f64> = parts.source.iter().zip(&kl).map(|(s, k)| s - k).collect();
        eliminate_dirichlet(&mut matrix, &mut rhs, &self.z, None);
        Ok(ConcentrationSystem { matrix, rhs })
    }
}

pub fn assemble_concentration_system(
    z: &Arc<Space>,
    velocity: &Field,
    frozen: &Field,
    law: &FluxLaw,
    lift: &Field,
    source: Option<ScalarFn<'_>>,
    quad_degree: usize,
) -> Result<ConcentrationSystem> {
    ConcentrationAssembler::new(z, quad_degree)?.assemble(velocity, frozen, law, lift, source)
}

/// `int f . V` for every velocity test function.
pub fn assemble_load(f: VectorFn<'_>, v: &Arc<Space>, quad_degree: usize) -> Result<Vec<f64>> {
    let mesh = v.mesh();
    let dim = mesh.dim();
    let nc = v.ncomp();
    let rule = quadrature_rule(dim, quad_degree)?;
    let tab = Tabulation::new(v.shape(), dim, &rule.points);
    let mut out = vec![0.0; v.ndofs()];
    for ci in 0..mesh.n_cells() {
        let jf = jacobian_factor(mesh, ci);
        let nodes = v.cell_nodes(ci);
        for (qi, (bary, w)) in rule.iter().enumerate() {
            let fx = f(&mesh.point_at(ci, bary));
            for (a, &node) in nodes.iter().enumerate() {
                for c in 0..nc {
                    out[node * nc + c] += w * jf * fx[c] * tab.vals[qi][a];
                }
            }
        }
    }
    Ok(out)
}

/// Quadrature degree that integrates products of three fields of a space
/// (capped at the table maximum).
fn trilinear_degree(space: &Space) -> usize {
    let p = space.shape().degree(space.dim());
    (3 * p).saturating_sub(1).clamp(1, MAX_DEGREE)
}

/// `B_u[v, w, h] = 1/2 int ((v . grad) w . h - (v . grad) h . w)`.
pub fn eval_bu(v: &Field, w: &Field, h: &Field) -> Result<f64> {
    let mesh = w.space().mesh().clone();
    let rule = quadrature_rule(mesh.dim(), trilinear_degree(w.space()))?;
    let mut s = 0.0;
    for ci in 0..mesh.n_cells() {
        let jf = jacobian_factor(&mesh, ci);
        for (bary, wq) in rule.iter() {
            let vv = v.eval_on(&mesh, ci, bary)?.value;
            let ww = w.eval_on(&mesh, ci, bary)?;
            let hh = h.eval_on(&mesh, ci, bary)?;
            let vgw = tensor::matvec(&ww.grad, &vv);
            let vgh = tensor::matvec(&hh.grad, &vv);
            s += wq * jf * 0.5 * (tensor::dot(&vgw, &hh.value) - tensor::dot(&vgh, &ww.value));
        }
    }
    Ok(s)
}

/// `B_c[b, v, z] = 1/2 int (z v . grad b - b v . grad z)`, integrated on the
/// mesh of `b`.
pub fn eval_bc(b: &Field, v: &Field, z: &Field) -> Result<f64> {
    let mesh = b.space().mesh().clone();
    let deg = (trilinear_degree(v.space()) + 1).min(MAX_DEGREE);
    let rule = quadrature_rule(mesh.dim(), deg)?;
    let mut s = 0.0;
    for ci in 0..mesh.n_cells() {
        let jf = jacobian_factor(&mesh, ci);
        for (bary, wq) in rule.iter() {
            let bb = b.eval_on(&mesh, ci, bary)?;
            let vv = v.eval_on(&mesh, ci, bary)?.value;
            let zz = z.eval_on(&mesh, ci, bary)?;
            let vb = tensor::dot(&vv, &bb.grad[0]);
            let vz = tensor::dot(&vv, &zz.grad[0]);
            s += wq * jf * 0.5 * (zz.value[0] * vb - bb.value[0] * vz);
        }
    }
    Ok(s)
}
