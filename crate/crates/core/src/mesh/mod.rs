//! Conforming simplicial meshes of box domains in 2D and 3D.
//!
//! A [`Mesh`] is immutable once built. Meshes produced by
//! [`build_structured`] and [`refine_uniform`] remember the identity of
//! their level-0 ancestor, which is what lets a [`MeshPair`] check that the
//! fluid and concentration meshes are nested refinements of one another.

mod io;
mod locate;
mod refine;
mod structured;

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::tensor::{self, Mat3, Point, Vec3, ZERO3, ZERO33};

pub use io::{read_mesh, write_mesh};
pub use locate::Location;
pub use refine::refine_uniform;
pub use structured::{build_structured, BoxDomain};

/// A boundary facet: `dim` vertex indices plus an integer marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 3],
    pub marker: i32,
}

impl BoundaryFacet {
    pub fn verts(&self, dim: usize) -> &[usize] {
        &self.vertices[..dim]
    }
}

/// Per-cell affine data: volume, barycentric gradients and size measures.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub volume: f64,
    /// Gradient of each barycentric coordinate (constant on the cell).
    pub grad_bary: [Vec3; 4],
    pub diameter: f64,
    pub inradius: f64,
}

impl CellGeometry {
    pub fn shape_ratio(&self) -> f64 {
        self.diameter / self.inradius
    }
}

#[derive(Debug)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 4]>,
    boundary_facets: Vec<BoundaryFacet>,
    level: usize,
    root_id: u64,
    geometry: Vec<CellGeometry>,
    locator: OnceLock<locate::Locator>,
}

impl Mesh {
    /// Builds a mesh from raw parts, checking that every cell has positive
    /// signed volume under its stored ordering.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<[usize; 4]>,
        boundary_facets: Vec<BoundaryFacet>,
        level: usize,
        root_id: Option<u64>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension {dim} is not 2 or 3")));
        }
        let nv = vertices.len();
        let mut geometry = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter().enumerate() {
            if c[..=dim].iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "cell {ci} references a missing vertex"
                )));
            }
            let g = cell_geometry(dim, &vertices, &c[..=dim]);
            if !(g.volume > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "cell {ci} has non-positive signed volume {}",
                    g.volume
                )));
            }
            geometry.push(g);
        }
        for f in &boundary_facets {
            if f.verts(dim).iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(
                    "boundary facet references a missing vertex".into(),
                ));
            }
        }
        let root_id = root_id.unwrap_or_else(|| fingerprint(dim, &vertices, &cells));
        Ok(Mesh {
            dim,
            vertices,
            cells,
            boundary_facets,
            level,
            root_id,
            geometry,
            locator: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Identifier of the level-0 mesh this mesh was refined from.
    pub fn root_id(&self) -> u64 {
        self.root_id
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point {
        &self.vertices[i]
    }

    /// Vertex indices of cell `i` (length `dim + 1`).
    pub fn cell(&self, i: usize) -> &[usize] {
        &self.cells[i][..=self.dim]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.iter().map(move |c| &c[..=self.dim])
    }

    pub(crate) fn raw_cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.geometry[cell].volume
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Largest cell diameter.
    pub fn h_max(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    /// Largest `diam / inradius` over all cells.
    pub fn max_shape_ratio(&self) -> f64 {
        self.geometry
            .iter()
            .map(|g| g.shape_ratio())
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..self.dim {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        for k in self.dim..3 {
            lo[k] = 0.0;
            hi[k] = 0.0;
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        tensor::dist(&lo, &hi)
    }

    /// Physical point for barycentric coordinates on a cell.
    pub fn point_at(&self, cell: usize, bary: &[f64]) -> Point {
        let mut x = ZERO3;
        for (i, &v) in self.cell(cell).iter().enumerate() {
            let p = &self.vertices[v];
            for k in 0..3 {
                x[k] += bary[i] * p[k];
            }
        }
        x
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let n = (self.dim + 1) as f64;
        let b = vec![1.0 / n; self.dim + 1];
        self.point_at(cell, &b)
    }

    /// Finds the cell containing `x` and its barycentric coordinates.
    ///
    /// Points on shared facets resolve to the lowest-index incident cell.
    pub fn locate_point(&self, x: &Point) -> Result<Location> {
        self.locator
            .get_or_init(|| locate::Locator::new(self))
            .locate(self, x)
    }

    /// Barycentric coordinates of `x` relative to `cell` (may be negative).
    pub fn barycentric(&self, cell: usize, x: &Point) -> [f64; 4] {
        let g = &self.geometry[cell];
        let x0 = &self.vertices[self.cells[cell][0]];
        let d = tensor::sub(x, x0);
        let mut b = [0.0; 4];
        let mut s = 0.0;
        for i in 1..=self.dim {
            b[i] = tensor::dot(&g.grad_bary[i], &d);
            s += b[i];
        }
        b[0] = 1.0 - s;
        b
    }

    /// Checks facet incidence: interior facets shared by exactly two cells,
    /// boundary facets by exactly one, and the stored boundary facets
    /// coincide with the topological boundary.
    pub fn check_conformity(&self) -> Result<()> {
        let counts = facet_incidence(self.dim, &self.cells);
        let mut topo_boundary = 0usize;
        for (key, &(n, _)) in &counts {
            match n {
                1 => topo_boundary += 1,
                2 => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "facet {:?} shared by {n} cells",
                        &key[..self.dim]
                    )))
                }
            }
        }
        if topo_boundary != self.boundary_facets.len() {
            return Err(Error::InvalidMesh(format!(
                "{} stored boundary facets but {topo_boundary} topological ones",
                self.boundary_facets.len()
            )));
        }
        for f in &self.boundary_facets {
            let key = facet_key(f.verts(self.dim));
            match counts.get(&key) {
                Some(&(1, _)) => {}
                _ => {
                    return Err(Error::InvalidMesh(format!(
                        "stored boundary facet {:?} is not on the boundary",
                        f.verts(self.dim)
                    )))
                }
            }
        }
        Ok(())
    }

    /// Set of vertices lying on a boundary facet.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for f in &self.boundary_facets {
            for &v in f.verts(self.dim) {
                mask[v] = true;
            }
        }
        mask
    }
}

/// Fluid and concentration meshes refined from a shared level-0 mesh.
#[derive(Debug, Clone)]
pub struct MeshPair {
    pub fluid: Arc<Mesh>,
    pub conc: Arc<Mesh>,
    root_id: u64,
}

impl MeshPair {
    pub fn new(fluid: Arc<Mesh>, conc: Arc<Mesh>) -> Result<Self> {
        if fluid.root_id() != conc.root_id() || fluid.dim() != conc.dim() {
            return Err(Error::InvalidMesh(
                "fluid and concentration meshes do not share a level-0 ancestor".into(),
            ));
        }
        let root_id = fluid.root_id();
        Ok(MeshPair {
            fluid,
            conc,
            root_id,
        })
    }

    /// Refines `base` `fluid_level` and `conc_level` times respectively.
    pub fn from_base(base: &Mesh, fluid_level: usize, conc_level: usize) -> Result<Self> {
        let refine_to = |lvl: usize| -> Mesh {
            let mut m = clone_mesh(base);
            for _ in 0..lvl {
                m = refine_uniform(&m);
            }
            m
        };
        let fluid = Arc::new(refine_to(fluid_level));
        let conc = if conc_level == fluid_level {
            fluid.clone()
        } else {
            Arc::new(refine_to(conc_level))
        };
        MeshPair::new(fluid, conc)
    }

    pub fn root_id(&self) -> u64 {
        self.root_id
    }

    /// The finer of the two meshes (the fluid mesh on ties).
    pub fn finer(&self) -> &Arc<Mesh> {
        if self.conc.n_cells() > self.fluid.n_cells() {
            &self.conc
        } else {
            &self.fluid
        }
    }
}

pub(crate) fn clone_mesh(m: &Mesh) -> Mesh {
    Mesh::from_parts(
        m.dim,
        m.vertices.clone(),
        m.cells.clone(),
        m.boundary_facets.clone(),
        m.level,
        Some(m.root_id),
    )
    .expect("cloning a valid mesh")
}

pub(crate) fn cell_geometry(dim: usize, vertices: &[Point], cell: &[usize]) -> CellGeometry {
    let x0 = vertices[cell[0]];
    let mut jac: Mat3 = ZERO33;
    for j in 0..dim {
        let xj = vertices[cell[j + 1]];
        for i in 0..dim {
            jac[i][j] = xj[i] - x0[i];
        }
    }
    let detj = tensor::det(&jac, dim);
    let fact = if dim == 2 { 0.5 } else { 1.0 / 6.0 };
    let volume = detj * fact;
    let inv = tensor::inverse(&jac, dim);
    let mut grad_bary = [ZERO3; 4];
    for i in 1..=dim {
        // row i-1 of J^{-1}
        for k in 0..dim {
            grad_bary[i][k] = inv[i - 1][k];
        }
    }
    for k in 0..dim {
        grad_bary[0][k] = -(1..=dim).map(|i| grad_bary[i][k]).sum::<f64>();
    }
    let mut diameter: f64 = 0.0;
    for a in 0..=dim {
        for b in a + 1..=dim {
            diameter = diameter.max(tensor::dist(&vertices[cell[a]], &vertices[cell[b]]));
        }
    }
    // facet measure of the facet opposite vertex i is d|E| |grad lambda_i|
    let facet_sum: f64 = (0..=dim)
        .map(|i| dim as f64 * volume.abs() * tensor::norm(&grad_bary[i]))
        .sum();
    let inradius = dim as f64 * volume.abs() / facet_sum;
    CellGeometry {
        volume,
        grad_bary,
        diameter,
        inradius,
    }
}

/// Sorted facet vertex key (unused slots `usize::MAX`).
pub(crate) fn facet_key(verts: &[usize]) -> [usize; 3] {
    let mut k = [usize::MAX; 3];
    k[..verts.len()].copy_from_slice(verts);
    k[..verts.len()].sort_unstable();
    k
}

/// Local facets of a simplex: facet `i` is opposite local vertex `i`.
pub(crate) fn local_facets(dim: usize) -> &'static [&'static [usize]] {
    if dim == 2 {
        &[&[1, 2], &[2, 0], &[0, 1]]
    } else {
        &[&[1, 2, 3], &[0, 3, 2], &[0, 1, 3], &[0, 2, 1]]
    }
}

/// Facet -> (incidence count, (first cell, local facet)).
pub(crate) fn facet_incidence(
    dim: usize,
    cells: &[[usize; 4]],
) -> HashMap<[usize; 3], (usize, (usize, usize))> {
    let mut map: HashMap<[usize; 3], (usize, (usize, usize))> =
        HashMap::with_capacity(cells.len() * (dim + 1));
    for (ci, c) in cells.iter().enumerate() {
        for (lf, f) in local_facets(dim).iter().enumerate() {
            let verts: Vec<usize> = f.iter().map(|&l| c[l]).collect();
            map.entry(facet_key(&verts))
                .and_modify(|e| e.0 += 1)
                .or_insert((1, (ci, lf)));
        }
    }
    map
}

/// FNV-1a over the level-0 geometry; stable across runs and platforms.
fn fingerprint(dim: usize, vertices: &[Point], cells: &[[usize; 4]]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(dim as u64);
    for v in vertices {
        for &c in &v[..dim] {
            eat(c.to_bits());
        }
    }
    for c in cells {
        for &v in &c[..=dim] {
            eat(v as u64);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(n: usize) -> Mesh {
        build_structured(2, &[n, n], &BoxDomain::unit(2)).unwrap()
    }

    #[test]
    fn geometry_of_reference_triangle() {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let g = cell_geometry(2, &verts, &[0, 1, 2]);
        assert!((g.volume - 0.5).abs() < 1e-15);
        assert_eq!(g.grad_bary[1], [1.0, 0.0, 0.0]);
        assert_eq!(g.grad_bary[2], [0.0, 1.0, 0.0]);
        assert_eq!(g.grad_bary[0], [-1.0, -1.0, 0.0]);
        // inradius of the right isosceles triangle with legs 1
        let r = 1.0 / (2.0 + 2f64.sqrt());
        assert!((g.inradius - r).abs() < 1e-15);
    }

    #[test]
    fn negative_orientation_rejected() {
        let verts = vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let err = Mesh::from_parts(2, verts, vec![[0, 1, 2, usize::MAX]], vec![], 0, None);
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn pair_requires_common_root() {
        let a = Arc::new(unit_square(1));
        let b = Arc::new(unit_square(2));
        assert!(MeshPair::new(a.clone(), b).is_err());
        let fine = Arc::new(refine_uniform(&a));
        let pair = MeshPair::new(a.clone(), fine.clone()).unwrap();
        assert_eq!(pair.finer().n_cells(), 8);
    }

    #[test]
    fn pair_from_base_levels() {
        let base = unit_square(2);
        let pair = MeshPair::from_base(&base, 2, 1).unwrap();
        assert_eq!(pair.fluid.n_cells(), 8 * 16);
        assert_eq!(pair.conc.n_cells(), 8 * 4);
        assert_eq!(pair.fluid.level(), 2);
        let same = MeshPair::from_base(&base, 0, 0).unwrap();
        assert_eq!(same.fluid.n_cells(), 8);
    }
}
