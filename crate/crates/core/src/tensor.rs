//! Fixed-size vector and matrix helpers. Everything is stored in 3-slot
//! arrays; 2D quantities keep their third component (or row/column) zero.

pub type Point = [f64; 3];
pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO3: Vec3 = [0.0; 3];
pub const ZERO33: Mat3 = [[0.0; 3]; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Frobenius inner product `A : B`.
#[inline]
pub fn ddot(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

#[inline]
pub fn frob(a: &Mat3) -> f64 {
    ddot(a, a).sqrt()
}

#[inline]
pub fn transpose(a: &Mat3) -> Mat3 {
    let mut t = ZERO33;
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

#[inline]
pub fn sym(a: &Mat3) -> Mat3 {
    let mut s = ZERO33;
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    s
}

#[inline]
pub fn mat_scale(s: f64, a: &Mat3) -> Mat3 {
    let mut r = *a;
    r.iter_mut().flatten().for_each(|v| *v *= s);
    r
}

#[inline]
pub fn mat_add(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut r = *a;
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += b[i][j];
        }
    }
    r
}

#[inline]
pub fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut r = *a;
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] -= b[i][j];
        }
    }
    r
}

#[inline]
pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut r = ZERO33;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                r[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    r
}

#[inline]
pub fn matvec(a: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&a[0], v), dot(&a[1], v), dot(&a[2], v)]
}

#[inline]
pub fn trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

/// Determinant of the leading `dim x dim` block.
pub fn det(a: &Mat3, dim: usize) -> f64 {
    match dim {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
    }
}

/// Inverse of the leading `dim x dim` block (zero elsewhere).
pub fn inverse(a: &Mat3, dim: usize) -> Mat3 {
    let d = det(a, dim);
    let mut r = ZERO33;
    match dim {
        1 => r[0][0] = 1.0 / d,
        2 => {
            r[0][0] = a[1][1] / d;
            r[0][1] = -a[0][1] / d;
            r[1][0] = -a[1][0] / d;
            r[1][1] = a[0][0] / d;
        }
        _ => {
            r[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d;
            r[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
            r[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
            r[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / d;
            r[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
            r[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
            r[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / d;
            r[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d;
            r[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
        }
    }
    r
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}
