use super::{facet_incidence, local_facets, BoundaryFacet, Mesh};
use crate::error::{Error, Result};
use crate::tensor::Point;

/// Axis-aligned box `[lo, hi]` in 2D or 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxDomain {
    pub fn new(dim: usize, lo: &[f64], hi: &[f64]) -> Self {
        let mut b = BoxDomain {
            dim,
            lo: [0.0; 3],
            hi: [0.0; 3],
        };
        b.lo[..dim].copy_from_slice(&lo[..dim]);
        b.hi[..dim].copy_from_slice(&hi[..dim]);
        b
    }

    pub fn unit(dim: usize) -> Self {
        BoxDomain::new(dim, &[0.0; 3], &[1.0; 3])
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Boundary marker of the face `axis`/`side`: `2 * axis + side + 1`.
    pub fn marker(axis: usize, upper: bool) -> i32 {
        (2 * axis + upper as usize + 1) as i32
    }

    fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidDomain(format!(
                "dimension {} is not 2 or 3",
                self.dim
            )));
        }
        for k in 0..self.dim {
            if !(self.lo[k] < self.hi[k]) {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: lo = {} is not below hi = {}",
                    self.lo[k], self.hi[k]
                )));
            }
        }
        Ok(())
    }
}

fn coord(b: &BoxDomain, axis: usize, i: usize, n: usize) -> f64 {
    if i == n {
        b.hi[axis]
    } else {
        b.lo[axis] + (b.hi[axis] - b.lo[axis]) * i as f64 / n as f64
    }
}

/// Structured triangulation of a box: each square is split into two
/// triangles along the (0,0)-(1,1) diagonal in 2D, each cube into six Kuhn
/// tetrahedra around its main diagonal in 3D.
pub fn build_structured(dim: usize, divisions: &[usize], domain: &BoxDomain) -> Result<Mesh> {
    if domain.dim != dim {
        return Err(Error::InvalidDomain(format!(
            "box has dimension {} but mesh requested in {dim}D",
            domain.dim
        )));
    }
    domain.validate()?;
    if divisions.len() < dim || divisions[..dim].contains(&0) {
        return Err(Error::InvalidDomain(
            "divisions must be >= 1 on every axis".into(),
        ));
    }
    let (vertices, cells) = if dim == 2 {
        grid_2d(divisions[0], divisions[1], domain)
    } else {
        grid_3d(divisions[0], divisions[1], divisions[2], domain)
    };
    let facets = box_boundary_facets(dim, &vertices, &cells, domain);
    Mesh::from_parts(dim, vertices, cells, facets, 0, None)
}

fn grid_2d(nx: usize, ny: usize, b: &BoxDomain) -> (Vec<Point>, Vec<[usize; 4]>) {
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push([coord(b, 0, i, nx), coord(b, 1, j, ny), 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push([v00, v10, v11, usize::MAX]);
            cells.push([v00, v11, v01, usize::MAX]);
        }
    }
    (verts, cells)
}

const KUHN_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn grid_3d(nx: usize, ny: usize, nz: usize, b: &BoxDomain) -> (Vec<Point>, Vec<[usize; 4]>) {
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                verts.push([coord(b, 0, i, nx), coord(b, 1, j, ny), coord(b, 2, k, nz)]);
            }
        }
    }
    let id = |p: [usize; 3]| (p[2] * (ny + 1) + p[1]) * (nx + 1) + p[0];
    let mut cells = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in KUHN_PERMS {
                    let mut p = [i, j, k];
                    let mut tet = [id(p), 0, 0, 0];
                    for (s, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[s + 1] = id(p);
                    }
                    if super::cell_geometry(3, &verts, &tet).volume < 0.0 {
                        tet.swap(2, 3);
                    }
                    cells.push(tet);
                }
            }
        }
    }
    (verts, cells)
}

/// Boundary facets by incidence counting, marked by the box face they lie on.
fn box_boundary_facets(
    dim: usize,
    vertices: &[Point],
    cells: &[[usize; 4]],
    b: &BoxDomain,
) -> Vec<BoundaryFacet> {
    let inc = facet_incidence(dim, cells);
    let mut owners: Vec<(usize, usize)> = inc
        .values()
        .filter(|(n, _)| *n == 1)
        .map(|&(_, owner)| owner)
        .collect();
    owners.sort_unstable();
    let tol = 1e-12 * (0..dim).map(|k| b.hi[k] - b.lo[k]).fold(0.0, f64::max);
    owners
        .into_iter()
        .map(|(ci, lf)| {
            let mut fv = [usize::MAX; 3];
            for (s, &l) in local_facets(dim)[lf].iter().enumerate() {
                fv[s] = cells[ci][l];
            }
            let verts = &fv[..dim];
            let mut marker = 0;
            'axes: for axis in 0..dim {
                for (upper, target) in [(false, b.lo[axis]), (true, b.hi[axis])] {
                    if verts
                        .iter()
                        .all(|&v| (vertices[v][axis] - target).abs() <= tol)
                    {
                        marker = BoxDomain::marker(axis, upper);
                        break 'axes;
                    }
                }
            }
            BoundaryFacet {
                vertices: fv,
                marker,
            }
        })
        .collect()
}
