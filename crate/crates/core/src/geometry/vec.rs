use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Point or tangent vector of the plane in coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Euclidean dot product (coordinate pairing; metric pairings live on
    /// [`MetricField`](super::MetricField)).
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec2 {
        self / self.norm()
    }

    /// Counter-clockwise rotation by π/2 in coordinates: `(x, y) ↦ (−y, x)`.
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn from_angle(t: f64) -> Vec2 {
        Vec2::new(t.cos(), t.sin())
    }

    pub fn lerp(self, o: Vec2, s: f64) -> Vec2 {
        self + (o - self) * s
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> [f64; 2] {
        [v.x, v.y]
    }
}

/// General 2×2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn mul_mat(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inverse(self) -> Mat2 {
        let det = self.det();
        Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det)
    }

    pub fn scale(self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

/// Symmetric 2×2 matrix: metric values, Hessians, symmetric 2-tensors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };
    pub const IDENTITY: SymMat2 = SymMat2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat2 { xx, xy, yy }
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    /// Quadratic form `v ↦ vᵀ A v`.
    pub fn quad(self, v: Vec2) -> f64 {
        self.xx * v.x * v.x + 2.0 * self.xy * v.x * v.y + self.yy * v.y * v.y
    }

    /// Bilinear form `(v, w) ↦ vᵀ A w`.
    pub fn bilin(self, v: Vec2, w: Vec2) -> f64 {
        self.xx * v.x * w.x + self.xy * (v.x * w.y + v.y * w.x) + self.yy * v.y * w.y
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    pub fn inverse(self) -> SymMat2 {
        let det = self.det();
        SymMat2::new(self.yy / det, -self.xy / det, self.xx / det)
    }

    pub fn scale(self, s: f64) -> SymMat2 {
        SymMat2::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn to_mat(self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }

    /// Component by flat index with `xy` shared: 0 → xx, 1 → xy, 2 → yy.
    pub fn comp(self, k: usize) -> f64 {
        match k {
            0 => self.xx,
            1 => self.xy,
            _ => self.yy,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> (f64, f64) {
        let m = 0.5 * self.trace();
        let d = ((0.5 * (self.xx - self.yy)).powi(2) + self.xy * self.xy).sqrt();
        (m - d, m + d)
    }

    pub fn is_positive_definite(self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rot90_is_ccw() {
        let v = Vec2::new(1.0, 0.0);
        let r = v.rot90();
        assert_eq!(r, Vec2::new(0.0, 1.0));
        assert_eq!(r.rot90(), -v);
    }

    #[test]
    fn sym_inverse() {
        let s = SymMat2::new(2.0, 0.5, 1.5);
        let inv = s.inverse();
        let prod = s.to_mat().mul_mat(inv.to_mat());
        assert!((prod.a - 1.0).abs() < 1e-14);
        assert!(prod.b.abs() < 1e-14);
        assert!((prod.d - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_diag() {
        let s = SymMat2::new(3.0, 0.0, 1.0);
        let (lo, hi) = s.eigenvalues();
        assert_eq!((lo, hi), (1.0, 3.0));
    }
}
