//! Local shape functions written in barycentric coordinates.
//!
//! Derivatives are returned with respect to each barycentric coordinate;
//! the physical gradient is `sum_i dphi/dlambda_i * grad(lambda_i)`.

use crate::mesh::CellGeometry;
use crate::tensor::{Vec3, ZERO3};

/// Local edge list; edge `e` joins local vertices `LOCAL_EDGES[e]`.
pub fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &[(0, 1), (1, 2), (2, 0)]
    } else {
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    P0,
    P1,
    P2,
    /// P2 plus the hierarchical cell bubble `c * prod(lambda_i)`, scaled to
    /// 1 at the centroid.
    P2Bubble,
}

impl Shape {
    pub fn count(self, dim: usize) -> usize {
        match self {
            Shape::P0 => 1,
            Shape::P1 => dim + 1,
            Shape::P2 => dim + 1 + local_edges(dim).len(),
            Shape::P2Bubble => dim + 2 + local_edges(dim).len(),
        }
    }

    pub fn degree(self, dim: usize) -> usize {
        match self {
            Shape::P0 => 0,
            Shape::P1 => 1,
            Shape::P2 => 2,
            Shape::P2Bubble => dim + 1,
        }
    }

    /// Barycentric coordinates of the nodal points (the bubble's node is
    /// the centroid).
    pub fn nodes(self, dim: usize) -> Vec<[f64; 4]> {
        let vertex = |i: usize| {
            let mut l = [0.0; 4];
            l[i] = 1.0;
            l
        };
        let centroid = {
            let mut l = [0.0; 4];
            l[..=dim]
                .iter_mut()
                .for_each(|v| *v = 1.0 / (dim + 1) as f64);
            l
        };
        match self {
            Shape::P0 => vec![centroid],
            Shape::P1 => (0..=dim).map(vertex).collect(),
            Shape::P2 | Shape::P2Bubble => {
                let mut n: Vec<[f64; 4]> = (0..=dim).map(vertex).collect();
                for &(a, b) in local_edges(dim) {
                    let mut l = [0.0; 4];
                    l[a] = 0.5;
                    l[b] = 0.5;
                    n.push(l);
                }
                if self == Shape::P2Bubble {
                    n.push(centroid);
                }
                n
            }
        }
    }

    /// Values and barycentric derivatives at `l`.
    pub fn eval(self, dim: usize, l: &[f64; 4], val: &mut [f64], dval: &mut [[f64; 4]]) {
        match self {
            Shape::P0 => {
                val[0] = 1.0;
                dval[0] = [0.0; 4];
            }
            Shape::P1 => {
                for i in 0..=dim {
                    val[i] = l[i];
                    dval[i] = [0.0; 4];
                    dval[i][i] = 1.0;
                }
            }
            Shape::P2 | Shape::P2Bubble => {
                for i in 0..=dim {
                    val[i] = l[i] * (2.0 * l[i] - 1.0);
                    dval[i] = [0.0; 4];
                    dval[i][i] = 4.0 * l[i] - 1.0;
                }
                for (e, &(a, b)) in local_edges(dim).iter().enumerate() {
                    let k = dim + 1 + e;
                    val[k] = 4.0 * l[a] * l[b];
                    dval[k] = [0.0; 4];
                    dval[k][a] = 4.0 * l[b];
                    dval[k][b] = 4.0 * l[a];
                }
                if self == Shape::P2Bubble {
                    let k = dim + 1 + local_edges(dim).len();
                    let c = if dim == 2 { 27.0 } else { 256.0 };
                    val[k] = c * l[..=dim].iter().product::<f64>();
                    dval[k] = [0.0; 4];
                    for i in 0..=dim {
                        dval[k][i] =
                            c * (0..=dim).filter(|&j| j != i).map(|j| l[j]).product::<f64>();
                    }
                }
            }
        }
    }
}

/// Shape values and barycentric derivatives tabulated at a list of points.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n: usize,
    pub vals: Vec<Vec<f64>>,
    pub dvals: Vec<Vec<[f64; 4]>>,
}

impl Tabulation {
    pub fn new(shape: Shape, dim: usize, points: &[[f64; 4]]) -> Self {
        let n = shape.count(dim);
        let mut vals = Vec::with_capacity(points.len());
        let mut dvals = Vec::with_capacity(points.len());
        for p in points {
            let mut v = vec![0.0; n];
            let mut d = vec![[0.0; 4]; n];
            shape.eval(dim, p, &mut v, &mut d);
            vals.push(v);
            dvals.push(d);
        }
        Tabulation { n, vals, dvals }
    }

    /// Physical gradients of all shape functions at point `q` of a cell.
    pub fn grads(&self, q: usize, dim: usize, geo: &CellGeometry, out: &mut [Vec3]) {
        for (a, d) in self.dvals[q].iter().enumerate() {
            let mut g = ZERO3;
            for (i, gl) in geo.grad_bary[..=dim].iter().enumerate() {
                let c = d[i];
                if c != 0.0 {
                    g[0] += c * gl[0];
                    g[1] += c * gl[1];
                    g[2] += c * gl[2];
                }
            }
            out[a] = g;
        }
    }
}
