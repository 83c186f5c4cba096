//! Finite element spaces, degree-of-freedom maps and discrete fields.
//!
//! Global scalar nodes are numbered vertices first, then edges (in order of
//! first appearance over cells), then cell bubbles. Vector-valued spaces
//! interleave components: dof = node * ncomp + comp.

pub mod basis;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshPair};
use crate::tensor::{Mat3, Point, Vec3, ZERO3, ZERO33};
pub use basis::{local_edges, Shape, Tabulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// Continuous piecewise quadratic vectors.
    VectorP2,
    /// VectorP2 enriched with one interior bubble per cell and component.
    VectorP2Bubble,
    /// Continuous piecewise linear vectors; only for inf-sup diagnostics.
    VectorP1,
    /// Piecewise constants.
    P0,
    /// Discontinuous piecewise linears.
    P1Discontinuous,
    /// Continuous piecewise linear scalars.
    ScalarP1,
}

impl ElementKind {
    pub fn shape(self) -> Shape {
        match self {
            ElementKind::VectorP2 => Shape::P2,
            ElementKind::VectorP2Bubble => Shape::P2Bubble,
            ElementKind::VectorP1 | ElementKind::ScalarP1 | ElementKind::P1Discontinuous => {
                Shape::P1
            }
            ElementKind::P0 => Shape::P0,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(
            self,
            ElementKind::VectorP2 | ElementKind::VectorP2Bubble | ElementKind::VectorP1
        )
    }

    pub fn is_continuous(self) -> bool {
        !matches!(self, ElementKind::P0 | ElementKind::P1Discontinuous)
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::VectorP2 => "VectorP2",
            ElementKind::VectorP2Bubble => "VectorP2Bubble",
            ElementKind::VectorP1 => "VectorP1",
            ElementKind::P0 => "P0",
            ElementKind::P1Discontinuous => "P1Discontinuous",
            ElementKind::ScalarP1 => "ScalarP1",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "VectorP2" => ElementKind::VectorP2,
            "VectorP2Bubble" => ElementKind::VectorP2Bubble,
            "VectorP1" => ElementKind::VectorP1,
            "P0" => ElementKind::P0,
            "P1Discontinuous" => ElementKind::P1Discontinuous,
            "ScalarP1" => ElementKind::ScalarP1,
            _ => return Err(Error::Config(format!("unknown element kind '{s}'"))),
        })
    }
}

#[derive(Debug)]
pub struct Space {
    mesh: Arc<Mesh>,
    kind: ElementKind,
    shape: Shape,
    ncomp: usize,
    nloc: usize,
    n_nodes: usize,
    /// Scalar node indices, `nloc` per cell.
    cell_nodes: Vec<usize>,
    boundary_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
}

impl Space {
    pub fn new(mesh: Arc<Mesh>, kind: ElementKind) -> Arc<Space> {
        let dim = mesh.dim();
        let shape = kind.shape();
        let nloc = shape.count(dim);
        let ncomp = if kind.is_vector() { dim } else { 1 };
        let nc = mesh.n_cells();
        let nv = mesh.n_vertices();
        let mut cell_nodes = Vec::with_capacity(nc * nloc);
        let mut node_on_boundary: Vec<bool>;
        let n_nodes;
        match kind {
            ElementKind::P0 => {
                cell_nodes.extend(0..nc);
                n_nodes = nc;
                node_on_boundary = vec![false; nc];
            }
            ElementKind::P1Discontinuous => {
                cell_nodes.extend(0..nc * nloc);
                n_nodes = nc * nloc;
                let bv = mesh.boundary_vertex_mask();
                node_on_boundary = mesh
                    .cells()
                    .flat_map(|c| c.iter().map(|&v| bv[v]).collect::<Vec<_>>())
                    .collect();
            }
            ElementKind::ScalarP1 | ElementKind::VectorP1 => {
                for c in mesh.cells() {
                    cell_nodes.extend_from_slice(c);
                }
                n_nodes = nv;
                node_on_boundary = mesh.boundary_vertex_mask();
            }
            ElementKind::VectorP2 | ElementKind::VectorP2Bubble => {
                let edges = local_edges(dim);
                let mut edge_index: HashMap<(usize, usize), usize> =
                    HashMap::with_capacity(nc * edges.len());
                for c in mesh.cells() {
                    cell_nodes.extend_from_slice(c);
                    for &(a, b) in edges {
                        let key = (c[a].min(c[b]), c[a].max(c[b]));
                        let next = nv + edge_index.len();
                        let e = *edge_index.entry(key).or_insert(next);
                        cell_nodes.push(e);
                    }
                    if kind == ElementKind::VectorP2Bubble {
                        cell_nodes.push(usize::MAX); // patched below
                    }
                }
                let n_edge_nodes = nv + edge_index.len();
                if kind == ElementKind::VectorP2Bubble {
                    for ci in 0..nc {
                        cell_nodes[ci * nloc + nloc - 1] = n_edge_nodes + ci;
                    }
                    n_nodes = n_edge_nodes + nc;
                } else {
                    n_nodes = n_edge_nodes;
                }
                node_on_boundary = vec![false; n_nodes];
                node_on_boundary[..nv].copy_from_slice(&mesh.boundary_vertex_mask());
                for f in mesh.boundary_facets() {
                    let fv = f.verts(dim);
                    for a in 0..dim {
                        for b in a + 1..dim {
                            let key = (fv[a].min(fv[b]), fv[a].max(fv[b]));
                            node_on_boundary[edge_index[&key]] = true;
                        }
                    }
                }
            }
        }
        let mut boundary_dofs = Vec::new();
        let mut is_boundary = vec![false; n_nodes * ncomp];
        for (node, &b) in node_on_boundary.iter().enumerate() {
            if b {
                for comp in 0..ncomp {
                    boundary_dofs.push(node * ncomp + comp);
                    is_boundary[node * ncomp + comp] = true;
                }
            }
        }
        Arc::new(Space {
            mesh,
            kind,
            shape,
            ncomp,
            nloc,
            n_nodes,
            cell_nodes,
            boundary_dofs,
            is_boundary,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// Scalar shape functions per cell.
    pub fn n_local(&self) -> usize {
        self.nloc
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn ndofs(&self) -> usize {
        self.n_nodes * self.ncomp
    }

    /// Scalar node indices of a cell.
    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell * self.nloc..(cell + 1) * self.nloc]
    }

    /// Global dofs of a cell, ordered node-major: `[n0c0, n0c1, .., n1c0, ..]`.
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.nloc * self.ncomp);
        for &n in self.cell_nodes(cell) {
            for c in 0..self.ncomp {
                d.push(n * self.ncomp + c);
            }
        }
        d
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    /// `int_Omega phi_i` for every scalar node (components share it).
    pub fn basis_integrals(&self) -> Vec<f64> {
        let dim = self.dim();
        let rule = crate::quadrature::quadrature_rule(dim, self.shape.degree(dim).max(1))
            .expect("element degree is within the quadrature table");
        let tab = Tabulation::new(self.shape, dim, &rule.points);
        let mut m = vec![0.0; self.n_nodes];
        let jac = if dim == 2 { 2.0 } else { 6.0 };
        for ci in 0..self.mesh.n_cells() {
            let vol = self.mesh.cell_volume(ci) * jac;
            for (q, &w) in rule.weights.iter().enumerate() {
                for (a, &n) in self.cell_nodes(ci).iter().enumerate() {
                    m[n] += w * vol * tab.vals[q][a];
                }
            }
        }
        m
    }

    /// Coefficients representing the constant function 1 (scalar spaces) or
    /// the constant vector `e_comp`.
    pub fn constant_coefficients(&self, comp: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.ndofs()];
        let bubble_start = match self.kind {
            ElementKind::VectorP2Bubble => self.n_nodes - self.mesh.n_cells(),
            _ => self.n_nodes,
        };
        for node in 0..bubble_start {
            c[node * self.ncomp + comp] = 1.0;
        }
        c
    }
}

/// Allowed velocity/pressure pairs, with ScalarP1 concentration on the
/// concentration mesh.
pub fn build_spaces(
    pair: &MeshPair,
    velocity: ElementKind,
    pressure: ElementKind,
) -> Result<(Arc<Space>, Arc<Space>, Arc<Space>)> {
    match (velocity, pressure) {
        (ElementKind::VectorP2, ElementKind::P0) | (ElementKind::VectorP2Bubble, ElementKind::P1Discontinuous) => {}
        _ => {
            return Err(Error::Config(format!(
                "unsupported element pair ({velocity}, {pressure}); use (VectorP2, P0) or (VectorP2Bubble, P1Discontinuous)"
            )))
        }
    }
    Ok((
        Space::new(pair.fluid.clone(), velocity),
        Space::new(pair.fluid.clone(), pressure),
        Space::new(pair.conc.clone(), ElementKind::ScalarP1),
    ))
}

/// Value (up to 3 components) and gradient `grad[comp][k] = d u_comp / d x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: Vec3,
    pub grad: Mat3,
}

#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<Space>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: &Arc<Space>) -> Field {
        Field {
            space: space.clone(),
            coeffs: vec![0.0; space.ndofs()],
        }
    }

    pub fn from_coeffs(space: &Arc<Space>, coeffs: Vec<f64>) -> Result<Field> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::OutOfRange {
                index: coeffs.len(),
                len: space.ndofs(),
            });
        }
        Ok(Field {
            space: space.clone(),
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Evaluation on a known cell; see [`evaluate_field`].
    pub fn eval(&self, cell: usize, bary: &[f64; 4]) -> Result<PointValue> {
        evaluate_field(self, cell, bary)
    }

    /// Evaluation at a physical point, located on this field's mesh.
    pub fn eval_at(&self, x: &Point) -> Result<PointValue> {
        let loc = self
            .space
            .mesh
            .locate_point(x)
            .map_err(|e| Error::CrossMesh(Box::new(e)))?;
        evaluate_field(self, loc.cell, &loc.bary)
    }

    /// Evaluation at a point given on another mesh: direct when `mesh` is
    /// this field's mesh, through point location otherwise.
    pub fn eval_on(&self, mesh: &Mesh, cell: usize, bary: &[f64; 4]) -> Result<PointValue> {
        if std::ptr::eq(self.space.mesh.as_ref(), mesh) {
            evaluate_field(self, cell, bary)
        } else {
            self.eval_at(&mesh.point_at(cell, bary))
        }
    }

    /// Integral over the domain of each component.
    pub fn integral(&self) -> Vec3 {
        let m = self.space.basis_integrals();
        let nc = self.space.ncomp;
        let mut s = ZERO3;
        for (node, &mi) in m.iter().enumerate() {
            for c in 0..nc {
                s[c] += mi * self.coeffs[node * nc + c];
            }
        }
        s
    }

    /// Writes `kind ndofs` followed by one coefficient per line.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.space.kind, self.coeffs.len())?;
        for c in &self.coeffs {
            writeln!(w, "{c:e}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(space: &Arc<Space>, reader: R) -> Result<Field> {
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
            other => Some((i + 1, other)),
        });
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "empty field file".into(),
        })?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let kind: ElementKind = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Parse {
                line,
                msg: format!("bad header '{header}'"),
            })?;
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Parse {
                line,
                msg: format!("bad header '{header}'"),
            })?;
        if kind != space.kind || n != space.ndofs() {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "field is {kind} with {n} dofs but the space is {} with {}",
                    space.kind,
                    space.ndofs()
                ),
            });
        }
        let mut coeffs = Vec::with_capacity(n);
        for (line, l) in lines {
            let l = l?;
            for tok in l.split_whitespace() {
                coeffs.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad coefficient '{tok}'"),
                })?);
            }
        }
        if coeffs.len() != n {
            return Err(Error::Parse {
                line,
                msg: format!("expected {n} coefficients, found {}", coeffs.len()),
            });
        }
        Ok(Field {
            space: space.clone(),
            coeffs,
        })
    }
}

/// Value and physical gradient of a field at barycentric point `bary` of
/// `cell`.
pub fn evaluate_field(field: &Field, cell: usize, bary: &[f64; 4]) -> Result<PointValue> {
    let space = &field.space;
    let mesh = &space.mesh;
    if cell >= mesh.n_cells() {
        return Err(Error::OutOfRange {
            index: cell,
            len: mesh.n_cells(),
        });
    }
    let dim = mesh.dim();
    let n = space.nloc;
    let mut val = [0.0; 16];
    let mut dval = [[0.0; 4]; 16];
    space.shape.eval(dim, bary, &mut val[..n], &mut dval[..n]);
    let geo = mesh.geometry(cell);
    let nc = space.ncomp;
    let mut out = PointValue {
        value: ZERO3,
        grad: ZERO33,
    };
    for (a, &node) in space.cell_nodes(cell).iter().enumerate() {
        let mut g = ZERO3;
        for i in 0..=dim {
            for k in 0..dim {
                g[k] += dval[a][i] * geo.grad_bary[i][k];
            }
        }
        for c in 0..nc {
            let coef = field.coeffs[node * nc + c];
            out.value[c] += coef * val[a];
            for k in 0..dim {
                out.grad[c][k] += coef * g[k];
            }
        }
    }
    Ok(out)
}

/// Interpolation from values given cell by cell: `f(cell, x, bary)`.
/// Lagrange nodes take the value at their nodal point; the bubble takes
/// the centroid value minus the quadratic interpolant there.
pub fn interpolate_cellwise(
    space: &Arc<Space>,
    f: impl Fn(usize, &Point, &[f64; 4]) -> Vec3,
) -> Field {
    let mesh = &space.mesh;
    let dim = mesh.dim();
    let nc = space.ncomp;
    let nodes = space.shape.nodes(dim);
    let mut coeffs = vec![0.0; space.ndofs()];
    let mut done = vec![false; space.n_nodes];
    let has_bubble = space.shape == Shape::P2Bubble;
    let n_lagrange = if has_bubble {
        space.nloc - 1
    } else {
        space.nloc
    };
    let p2_at_centroid = if has_bubble {
        let mut v = vec![0.0; space.nloc];
        let mut d = vec![[0.0; 4]; space.nloc];
        Shape::P2.eval(dim, &nodes[space.nloc - 1], &mut v, &mut d);
        v
    } else {
        Vec::new()
    };
    for ci in 0..mesh.n_cells() {
        let cn = space.cell_nodes(ci);
        for a in 0..n_lagrange {
            let node = cn[a];
            if done[node] {
                continue;
            }
            done[node] = true;
            let x = mesh.point_at(ci, &nodes[a]);
            let v = f(ci, &x, &nodes[a]);
            for c in 0..nc {
                coeffs[node * nc + c] = v[c];
            }
        }
        if has_bubble {
            let b = space.nloc - 1;
            let x = mesh.point_at(ci, &nodes[b]);
            let v = f(ci, &x, &nodes[b]);
            for c in 0..nc {
                let p2: f64 = (0..n_lagrange)
                    .map(|a| p2_at_centroid[a] * coeffs[cn[a] * nc + c])
                    .sum();
                coeffs[cn[b] * nc + c] = v[c] - p2;
            }
        }
    }
    Field {
        space: space.clone(),
        coeffs,
    }
}

/// Nodal interpolation of a vector function (components beyond `ncomp`
/// are ignored).
pub fn interpolate(space: &Arc<Space>, f: impl Fn(&Point) -> Vec3) -> Field {
    interpolate_cellwise(space, |_, x, _| f(x))
}

pub fn interpolate_scalar(space: &Arc<Space>, f: impl Fn(&Point) -> f64) -> Field {
    interpolate_cellwise(space, |_, x, _| [f(x), 0.0, 0.0])
}

/// Subtracts the volume mean, so the result integrates to zero.
pub fn zero_mean_project(p: &Field) -> Field {
    let vol = p.space.mesh.total_volume();
    let mean = p.integral()[0] / vol;
    let one = p.space.constant_coefficients(0);
    let coeffs = p
        .coeffs
        .iter()
        .zip(&one)
        .map(|(c, o)| c - mean * o)
        .collect();
    Field {
        space: p.space.clone(),
        coeffs,
    }
}
