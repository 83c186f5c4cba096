//! Dense brute-force assembly on the two-triangle mesh, with the local basis
//! rebuilt from a monomial Vandermonde system in physical coordinates.

#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpflow::assembly::{ConcentrationAssembler, MomentumAssembler, MomentumOptions};
use vpflow::constitutive::{FluxLaw, StressLaw};
use vpflow::fespace::{local_edges, ElementKind, Field, Space};
use vpflow::mesh::{build_structured, BoxDomain, Mesh};
use vpflow::quadrature::quadrature_rule;
use vpflow::sparse::SparseMatrix;
use vpflow::tensor::{Point, Vec3, ZERO3};

/// Lagrange basis of total degree `deg` on one triangle, physical coords.
pub struct PhysBasis {
    exps: Vec<(i32, i32)>,
    // coef[a][m]: coefficient of monomial m in basis function a
    coef: Vec<Vec<f64>>,
}

impl PhysBasis {
    pub fn new(deg: i32, nodes: &[Point]) -> Self {
        let mut exps = Vec::new();
        for total in 0..=deg {
            for i in (0..=total).rev() {
                exps.push((i, total - i));
            }
        }
        let n = exps.len();
        assert_eq!(n, nodes.len());
        let v = DMatrix::from_fn(n, n, |r, c| {
            let (i, j) = exps[c];
            nodes[r][0].powi(i) * nodes[r][1].powi(j)
        });
        let inv = v.try_inverse().expect("unisolvent nodes");
        let coef = (0..n)
            .map(|a| (0..n).map(|m| inv[(m, a)]).collect())
            .collect();
        PhysBasis { exps, coef }
    }

    pub fn eval(&self, x: &Point) -> (Vec<f64>, Vec<Vec3>) {
        let mono: Vec<(f64, f64, f64)> = self
            .exps
            .iter()
            .map(|&(i, j)| {
                let v = x[0].powi(i) * x[1].powi(j);
                let dx = if i > 0 {
                    i as f64 * x[0].powi(i - 1) * x[1].powi(j)
                } else {
                    0.0
                };
                let dy = if j > 0 {
                    j as f64 * x[0].powi(i) * x[1].powi(j - 1)
                } else {
                    0.0
                };
                (v, dx, dy)
            })
            .collect();
        let mut vals = Vec::new();
        let mut grads = Vec::new();
        for c in &self.coef {
            let mut v = 0.0;
            let mut g = ZERO3;
            for (k, m) in mono.iter().enumerate() {
                v += c[k] * m.0;
                g[0] += c[k] * m.1;
                g[1] += c[k] * m.2;
            }
            vals.push(v);
            grads.push(g);
        }
        (vals, grads)
    }
}

pub fn p2_nodes(mesh: &Mesh, cell: usize) -> Vec<Point> {
    let vs: Vec<Point> = mesh.cell(cell).iter().map(|&v| *mesh.vertex(v)).collect();
    let mut out = vs.clone();
    for &(a, b) in local_edges(2) {
        out.push(std::array::from_fn(|k| 0.5 * (vs[a][k] + vs[b][k])));
    }
    out
}

/// Physical quadrature points and weights of one cell.
pub fn cell_quadrature(mesh: &Mesh, cell: usize) -> Vec<(Point, f64)> {
    let rule = quadrature_rule(2, 8).unwrap();
    let vol = mesh.cell_volume(cell);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(l, w)| {
            let vs: Vec<&Point> = mesh.cell(cell).iter().map(|&v| mesh.vertex(v)).collect();
            let x = std::array::from_fn(|k| l[0] * vs[0][k] + l[1] * vs[1][k] + l[2] * vs[2][k]);
            (x, w * vol / 0.5)
        })
        .collect()
}

pub fn two_triangles() -> Arc<Mesh> {
    Arc::new(build_structured(2, &[1, 1], &BoxDomain::new(2, &[0.0, 0.0], &[1.3, 0.9])).unwrap())
}

/// Largest entrywise deviation relative to the largest dense entry.
fn relative_deviation(sparse: &SparseMatrix, dense: &[Vec<f64>]) -> f64 {
    let scale = dense.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for (i, row) in dense.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            worst = worst.max((sparse.get(i, j) - v).abs());
        }
    }
    worst / scale
}

pub struct Setup {
    pub v: Arc<Space>,
    pub q: Arc<Space>,
    pub z: Arc<Space>,
    pub u: Field,
    pub c: Field,
}

pub fn setup(seed: u64) -> Setup {
    let mesh = two_triangles();
    let v = Space::new(mesh.clone(), ElementKind::VectorP2);
    let q = Space::new(mesh.clone(), ElementKind::P0);
    let z = Space::new(mesh, ElementKind::ScalarP1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Field::from_coeffs(
        &v,
        (0..v.ndofs())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    let c = Field::from_coeffs(
        &z,
        (0..z.ndofs())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    Setup { v, q, z, u, c }
}

/// Frozen velocity from the oracle basis.
pub fn oracle_velocity(s: &Setup, cell: usize, basis: &PhysBasis, x: &Point) -> Vec3 {
    let (phi, _) = basis.eval(x);
    let nodes = s.v.cell_nodes(cell);
    let mut u = ZERO3;
    for (a, &n) in nodes.iter().enumerate() {
        for i in 0..2 {
            u[i] += s.u.coeffs()[2 * n + i] * phi[a];
        }
    }
    u
}

/// Deviations of the viscous, convection and divergence blocks.
pub fn momentum_deviations(seed: u64) -> Vec<(&'static str, f64)> {
    let s = setup(seed);
    let mesh = s.v.mesh().clone();
    let nv = s.v.ndofs();
    let mut visc = vec![vec![0.0; nv]; nv];
    let mut conv = vec![vec![0.0; nv]; nv];
    let mut div = vec![vec![0.0; nv]; s.q.ndofs()];
    for cell in 0..mesh.n_cells() {
        let basis = PhysBasis::new(2, &p2_nodes(&mesh, cell));
        let nodes = s.v.cell_nodes(cell);
        let pnode = s.q.cell_nodes(cell)[0];
        for (x, w) in cell_quadrature(&mesh, cell) {
            let (phi, g) = basis.eval(&x);
            let u = oracle_velocity(&s, cell, &basis, &x);
            for a in 0..6 {
                for i in 0..2 {
                    let row = 2 * nodes[a] + i;
                    // sym grad of phi_a e_i
                    let mut da = [[0.0; 2]; 2];
                    for k in 0..2 {
                        da[i][k] += 0.5 * g[a][k];
                        da[k][i] += 0.5 * g[a][k];
                    }
                    div[pnode][row] += w * g[a][i];
                    for b in 0..6 {
                        for j in 0..2 {
                            let col = 2 * nodes[b] + j;
                            let mut db = [[0.0; 2]; 2];
                            for k in 0..2 {
                                db[j][k] += 0.5 * g[b][k];
                                db[k][j] += 0.5 * g[b][k];
                            }
                            let mut dd = 0.0;
                            for k in 0..2 {
                                for l in 0..2 {
                                    dd += da[k][l] * db[k][l];
                                }
                            }
                            visc[row][col] += w * dd;
                            if i == j {
                                let ugb = u[0] * g[b][0] + u[1] * g[b][1];
                                let uga = u[0] * g[a][0] + u[1] * g[a][1];
                                conv[row][col] += w * 0.5 * (phi[a] * ugb - phi[b] * uga);
                            }
                        }
                    }
                }
            }
        }
    }
    let asm = MomentumAssembler::new(&s.v, &s.q, 5).unwrap();
    let law = StressLaw::newtonian(1.0);
    let zero = |_: &Point| ZERO3;
    let parts = asm
        .assemble_parts(&s.c, &s.u, &law, &zero, &MomentumOptions::default())
        .unwrap();
    vec![
        ("viscous", relative_deviation(&parts.viscous, &visc)),
        ("convection", relative_deviation(&parts.convection, &conv)),
        ("divergence", relative_deviation(&parts.divergence, &div)),
    ]
}

/// Deviations of the diffusion and convection blocks.
pub fn concentration_deviations(seed: u64) -> Vec<(&'static str, f64)> {
    let s = setup(seed);
    let mesh = s.z.mesh().clone();
    let n = s.z.ndofs();
    let law = FluxLaw::new(1.7, 0.0).unwrap();
    let mut diff = vec![vec![0.0; n]; n];
    let mut conv = vec![vec![0.0; n]; n];
    for cell in 0..mesh.n_cells() {
        let vs: Vec<Point> = mesh.cell(cell).iter().map(|&v| *mesh.vertex(v)).collect();
        let p1 = PhysBasis::new(1, &vs);
        let p2 = PhysBasis::new(2, &p2_nodes(&mesh, cell));
        let nodes = s.z.cell_nodes(cell);
        for (x, w) in cell_quadrature(&mesh, cell) {
            let (phi, g) = p1.eval(&x);
            let u = oracle_velocity(&s, cell, &p2, &x);
            for a in 0..3 {
                for b in 0..3 {
                    let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                    diff[nodes[a]][nodes[b]] += w * 1.7 * gg;
                    let ugb = u[0] * g[b][0] + u[1] * g[b][1];
                    let uga = u[0] * g[a][0] + u[1] * g[a][1];
                    conv[nodes[a]][nodes[b]] += w * 0.5 * (phi[a] * ugb - phi[b] * uga);
                }
            }
        }
    }
    let asm = ConcentrationAssembler::new(&s.z, 5).unwrap();
    let parts = asm.assemble_parts(&s.u, &s.c, &law, None).unwrap();
    vec![
        ("diffusion", relative_deviation(&parts.diffusion, &diff)),
        (
            "concentration convection",
            relative_deviation(&parts.convection, &conv),
        ),
    ]
}
