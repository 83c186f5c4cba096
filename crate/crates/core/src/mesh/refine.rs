use std::collections::HashMap;

use super::{cell_geometry, BoundaryFacet, Mesh};
use crate::tensor::{self, Point};

/// Edge midpoint registry: new vertices are numbered in order of first
/// appearance while walking cells (then facets) in index order.
struct Midpoints<'a> {
    vertices: &'a mut Vec<Point>,
    index: HashMap<(usize, usize), usize>,
}

impl Midpoints<'_> {
    fn get(&mut self, a: usize, b: usize) -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&m) = self.index.get(&key) {
            return m;
        }
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let m = self.vertices.len();
        self.vertices.push([
            0.5 * (pa[0] + pb[0]),
            0.5 * (pa[1] + pb[1]),
            0.5 * (pa[2] + pb[2]),
        ]);
        self.index.insert(key, m);
        m
    }
}

/// Uniform red refinement: triangles into 4, tetrahedra into 8.
///
/// The interior octahedron of each tetrahedron is cut along its shortest
/// diagonal. Among diagonals whose lengths agree to 1e-10 (relative) the one
/// with the largest |d . (1,1,1)| wins, then the smallest sorted pair of
/// global midpoint indices.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let dim = mesh.dim();
    let mut vertices = mesh.vertices().to_vec();
    let mut mids = Midpoints {
        vertices: &mut vertices,
        index: HashMap::with_capacity(mesh.n_cells() * if dim == 2 { 2 } else { 7 }),
    };
    let mut cells = Vec::with_capacity(mesh.n_cells() * if dim == 2 { 4 } else { 8 });
    for c in mesh.raw_cells() {
        if dim == 2 {
            let [a, b, cc, _] = *c;
            let (mab, mbc, mca) = (mids.get(a, b), mids.get(b, cc), mids.get(cc, a));
            cells.push([a, mab, mca, usize::MAX]);
            cells.push([mab, b, mbc, usize::MAX]);
            cells.push([mca, mbc, cc, usize::MAX]);
            cells.push([mab, mbc, mca, usize::MAX]);
        } else {
            split_tet(c, &mut mids, &mut cells);
        }
    }
    // facet midpoints are shared with the cells, so keep the same registry
    let mut facets =
        Vec::with_capacity(mesh.boundary_facets().len() * if dim == 2 { 2 } else { 4 });
    for f in mesh.boundary_facets() {
        let v = f.vertices;
        let marker = f.marker;
        let mut push = |verts: [usize; 3]| {
            facets.push(BoundaryFacet {
                vertices: verts,
                marker,
            })
        };
        if dim == 2 {
            let m = mids.get(v[0], v[1]);
            push([v[0], m, usize::MAX]);
            push([m, v[1], usize::MAX]);
        } else {
            let (m01, m12, m20) = (
                mids.get(v[0], v[1]),
                mids.get(v[1], v[2]),
                mids.get(v[2], v[0]),
            );
            push([v[0], m01, m20]);
            push([m01, v[1], m12]);
            push([m20, m12, v[2]]);
            push([m01, m12, m20]);
        }
    }
    for c in cells.iter_mut() {
        if cell_geometry(dim, &vertices, &c[..=dim]).volume < 0.0 {
            c.swap(dim - 1, dim);
        }
    }

    Mesh::from_parts(
        dim,
        vertices,
        cells,
        facets,
        mesh.level() + 1,
        Some(mesh.root_id()),
    )
    .expect("red refinement of a valid mesh is valid")
}

/// Local edge order used when registering midpoints of a tetrahedron.
const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

fn split_tet(c: &[usize; 4], mids: &mut Midpoints<'_>, out: &mut Vec<[usize; 4]>) {
    let [v0, v1, v2, v3] = *c;
    let mut m = [0usize; 6];
    for (k, &(i, j)) in TET_EDGES.iter().enumerate() {
        m[k] = mids.get(c[i], c[j]);
    }
    let [m01, m02, m03, m12, m13, m23] = m;
    out.push([v0, m01, m02, m03]);
    out.push([m01, v1, m12, m13]);
    out.push([m02, m12, v2, m23]);
    out.push([m03, m13, m23, v3]);

    // (diagonal, equator cycle around it)
    let options = [
        ((m02, m13), [m01, m03, m23, m12]),
        ((m03, m12), [m01, m02, m23, m13]),
        ((m01, m23), [m02, m03, m13, m12]),
    ];
    let vec = |(a, b): (usize, usize)| tensor::sub(&mids.vertices[b], &mids.vertices[a]);
    let sorted = |(a, b): (usize, usize)| if a < b { (a, b) } else { (b, a) };
    let mut best = 0;
    for k in 1..3 {
        let (dk, db) = (vec(options[k].0), vec(options[best].0));
        let (lk, lb) = (tensor::norm(&dk), tensor::norm(&db));
        let scale = lb.max(lk);
        let better = if (lk - lb).abs() > 1e-10 * scale {
            lk < lb
        } else {
            // Kuhn tetrahedra tie two diagonals; the one leaning along the
            // (1,1,1) direction keeps all children congruent to the parent.
            let (sk, sb) = ((dk[0] + dk[1] + dk[2]).abs(), (db[0] + db[1] + db[2]).abs());
            if (sk - sb).abs() > 1e-10 * scale {
                sk > sb
            } else {
                sorted(options[k].0) < sorted(options[best].0)
            }
        };
        if better {
            best = k;
        }
    }
    let ((a, b), ring) = options[best];
    for i in 0..4 {
        out.push([a, b, ring[i], ring[(i + 1) % 4]]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured, BoxDomain};

    #[test]
    fn counts_scale() {
        let sq = build_structured(2, &[1, 1], &BoxDomain::unit(2)).unwrap();
        let r = refine_uniform(&sq);
        assert_eq!(r.n_cells(), 8);
        assert_eq!(r.n_vertices(), 9);
        assert_eq!(r.level(), 1);
        assert_eq!(r.root_id(), sq.root_id());
        r.check_conformity().unwrap();

        let cube = build_structured(3, &[1, 1, 1], &BoxDomain::unit(3)).unwrap();
        let r = refine_uniform(&cube);
        assert_eq!(r.n_cells(), 48);
        assert_eq!(r.n_vertices(), 27);
        assert_eq!(r.boundary_facets().len(), 48);
        assert!((0..r.n_cells()).all(|c| r.cell_volume(c) > 0.0));
        r.check_conformity().unwrap();
    }

    #[test]
    fn boundary_markers_inherited() {
        let cube = build_structured(3, &[1, 1, 1], &BoxDomain::unit(3)).unwrap();
        let r = refine_uniform(&refine_uniform(&cube));
        for f in r.boundary_facets() {
            let axis = ((f.marker - 1) / 2) as usize;
            let side = ((f.marker - 1) % 2) as f64;
            for &v in f.verts(3) {
                assert_eq!(r.vertex(v)[axis], side);
            }
        }
    }

    fn brute_max_ratio(m: &Mesh) -> f64 {
        // independent recomputation: diameter over all vertex pairs, inradius
        // from 3|E| / surface area (2D: 2|E| / perimeter) via cross products
        let dim = m.dim();
        m.cells()
            .map(|c| {
                let p: Vec<Point> = c.iter().map(|&v| *m.vertex(v)).collect();
                let mut diam: f64 = 0.0;
                for a in 0..p.len() {
                    for b in a + 1..p.len() {
                        diam = diam.max(tensor::dist(&p[a], &p[b]));
                    }
                }
                let e = |a: usize, b: usize| tensor::sub(&p[b], &p[a]);
                let r = if dim == 2 {
                    let area = 0.5 * tensor::cross(&e(0, 1), &e(0, 2))[2].abs();
                    let perim =
                        tensor::norm(&e(0, 1)) + tensor::norm(&e(1, 2)) + tensor::norm(&e(2, 0));
                    2.0 * area / perim
                } else {
                    let vol = tensor::dot(&e(0, 1), &tensor::cross(&e(0, 2), &e(0, 3))).abs() / 6.0;
                    let tri = |a: usize, b: usize, c: usize| {
                        0.5 * tensor::norm(&tensor::cross(&e(a, b), &e(a, c)))
                    };
                    let surf = tri(0, 1, 2) + tri(0, 1, 3) + tri(0, 2, 3) + tri(1, 2, 3);
                    3.0 * vol / surf
                };
                diam / r
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn shape_ratio_preserved_2d() {
        let mut m = build_structured(2, &[1, 1], &BoxDomain::unit(2)).unwrap();
        let r0 = brute_max_ratio(&m);
        assert!((r0 - m.max_shape_ratio()).abs() < 1e-12 * r0);
        for _ in 0..3 {
            m = refine_uniform(&m);
        }
        let r3 = brute_max_ratio(&m);
        assert!((r3 - r0).abs() < 1e-9 * r0, "{r3} vs {r0}");
    }

    #[test]
    fn shape_ratio_bounded_3d() {
        let mut m = build_structured(3, &[1, 1, 1], &BoxDomain::unit(3)).unwrap();
        let r0 = brute_max_ratio(&m);
        for _ in 0..3 {
            m = refine_uniform(&m);
            m.check_conformity().unwrap();
            assert!(brute_max_ratio(&m) <= r0 * (1.0 + 1e-9));
        }
    }

    #[test]
    fn volume_preserved() {
        let b = BoxDomain::new(3, &[0.0, 0.0, 0.0], &[2.0, 1.0, 0.5]);
        let m = refine_uniform(&refine_uniform(
            &build_structured(3, &[2, 1, 1], &b).unwrap(),
        ));
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
    }
}
