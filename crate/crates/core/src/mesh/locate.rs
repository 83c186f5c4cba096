use super::Mesh;
use crate::error::{Error, Result};
use crate::tensor::{self, Point};

/// A located point: containing cell and barycentric coordinates
/// (only the first `dim + 1` entries are meaningful).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub cell: usize,
    pub bary: [f64; 4],
}

/// Uniform bucket grid over the mesh bounding box. Each bucket lists, in
/// increasing order, the cells whose slightly enlarged bounding box meets it.
#[derive(Debug)]
pub(crate) struct Locator {
    lo: Point,
    cell_size: [f64; 3],
    shape: [usize; 3],
    buckets: Vec<Vec<u32>>,
    /// Outside-distance tolerance, `1e-12 * diam(Omega)`.
    tol: f64,
}

const BARY_TOL: f64 = 1e-12;

impl Locator {
    pub(crate) fn new(mesh: &Mesh) -> Self {
        let dim = mesh.dim();
        let (lo, hi) = mesh.bounding_box();
        let diam = tensor::dist(&lo, &hi);
        let tol = 1e-12 * diam;
        let extent: Vec<f64> = (0..dim).map(|k| hi[k] - lo[k]).collect();
        let vol: f64 = extent.iter().product();
        // about one cell per bucket
        let side = (vol / mesh.n_cells().max(1) as f64).powf(1.0 / dim as f64);
        let mut shape = [1usize; 3];
        let mut cell_size = [1.0; 3];
        for k in 0..dim {
            shape[k] = ((extent[k] / side).round() as usize).clamp(1, 1 << 12);
            cell_size[k] = extent[k] / shape[k] as f64;
        }
        let mut loc = Locator {
            lo,
            cell_size,
            shape,
            buckets: vec![Vec::new(); shape[0] * shape[1] * shape[2]],
            tol,
        };
        let pad = 1e-9 * diam;
        for (ci, c) in mesh.cells().enumerate() {
            let mut blo = [f64::INFINITY; 3];
            let mut bhi = [f64::NEG_INFINITY; 3];
            for &v in c {
                let p = mesh.vertex(v);
                for k in 0..dim {
                    blo[k] = blo[k].min(p[k] - pad);
                    bhi[k] = bhi[k].max(p[k] + pad);
                }
            }
            let ilo = loc.bucket_coords(&blo, dim);
            let ihi = loc.bucket_coords(&bhi, dim);
            for i2 in ilo[2]..=ihi[2] {
                for i1 in ilo[1]..=ihi[1] {
                    for i0 in ilo[0]..=ihi[0] {
                        let b = loc.flat([i0, i1, i2]);
                        loc.buckets[b].push(ci as u32);
                    }
                }
            }
        }
        loc
    }

    fn bucket_coords(&self, x: &Point, dim: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for k in 0..dim {
            let t = ((x[k] - self.lo[k]) / self.cell_size[k]).floor();
            idx[k] = (t.max(0.0) as usize).min(self.shape[k] - 1);
        }
        idx
    }

    fn flat(&self, i: [usize; 3]) -> usize {
        (i[2] * self.shape[1] + i[1]) * self.shape[0] + i[0]
    }

    /// First candidate (by cell index) with all barycentrics >= -1e-12;
    /// otherwise the candidate closest to containing `x`, accepted if `x` is
    /// within the domain tolerance of it, with coordinates clamped.
    pub(crate) fn locate(&self, mesh: &Mesh, x: &Point) -> Result<Location> {
        let dim = mesh.dim();
        for k in 0..dim {
            let lo = self.lo[k] - self.tol;
            let hi = self.lo[k] + self.cell_size[k] * self.shape[k] as f64 + self.tol;
            if !(x[k] >= lo && x[k] <= hi) {
                return Err(Error::PointNotFound(*x));
            }
        }
        let bucket = &self.buckets[self.flat(self.bucket_coords(x, dim))];
        let mut best: Option<(f64, usize, [f64; 4])> = None;
        for &ci in bucket {
            let ci = ci as usize;
            let b = mesh.barycentric(ci, x);
            let min_b = b[..=dim].iter().copied().fold(f64::INFINITY, f64::min);
            if min_b >= -BARY_TOL {
                return Ok(Location { cell: ci, bary: b });
            }
            // physical distance outside the cell, facet by facet
            let g = mesh.geometry(ci);
            let outside = (0..=dim)
                .filter(|&i| b[i] < 0.0)
                .map(|i| -b[i] / tensor::norm(&g.grad_bary[i]))
                .fold(0.0, f64::max);
            if best.is_none_or(|(d, _, _)| outside < d) {
                best = Some((outside, ci, b));
            }
        }
        match best {
            Some((d, ci, mut b)) if d <= 2.0 * self.tol => {
                let mut s = 0.0;
                for v in b[..=dim].iter_mut() {
                    *v = v.max(0.0);
                    s += *v;
                }
                for v in b[..=dim].iter_mut() {
                    *v /= s;
                }
                Ok(Location { cell: ci, bary: b })
            }
            _ => Err(Error::PointNotFound(*x)),
        }
    }
}
