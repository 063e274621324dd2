use super::vec::{SymMat2, Vec2};

/// Disk domain centered at the origin, described by the defining function
/// `ρ(x) = R − |x|` (positive inside, zero on the boundary). ρ is the exact
/// Euclidean signed distance away from the center; metric-aware normals and
/// curvatures are assembled by the system from ρ's coordinate derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Domain {
    radius: f64,
}

impl Domain {
    pub fn disk(radius: f64) -> Self {
        assert!(radius > 0.0, "domain radius must be positive");
        Domain { radius }
    }

    pub fn unit_disk() -> Self {
        Domain::disk(1.0)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Enlarged computational domain `M₁` (same center).
    pub fn enlarged(&self, factor: f64) -> Domain {
        Domain::disk(self.radius * factor)
    }

    /// Width of the collar around ∂M in which ρ behaves like a distance.
    pub fn collar_width(&self) -> f64 {
        0.5 * self.radius
    }

    pub fn rho(&self, p: Vec2) -> f64 {
        self.radius - p.norm()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.rho(p) >= 0.0
    }

    /// Coordinate gradient `∂_i ρ = −x_i/r`.
    pub fn grad_rho(&self, p: Vec2) -> Vec2 {
        let r = p.norm();
        -p / r
    }

    /// Coordinate Hessian `∂_j ∂_i ρ`.
    pub fn hess_rho(&self, p: Vec2) -> SymMat2 {
        let r = p.norm();
        let r3 = r * r * r;
        SymMat2::new(
            -1.0 / r + p.x * p.x / r3,
            p.x * p.y / r3,
            -1.0 / r + p.y * p.y / r3,
        )
    }

    /// Boundary point at Euclidean polar angle φ.
    pub fn boundary_point(&self, phi: f64) -> Vec2 {
        Vec2::from_angle(phi) * self.radius
    }

    /// Euclidean polar angle of a (near-)boundary point, in `[0, 2π)`.
    pub fn boundary_angle(&self, p: Vec2) -> f64 {
        let a = p.angle();
        if a < 0.0 {
            a + 2.0 * std::f64::consts::PI
        } else {
            a
        }
    }

    /// Euclidean boundary arc-length coordinate `s = R·φ ∈ [0, 2πR)`.
    pub fn boundary_arc(&self, p: Vec2) -> f64 {
        self.radius * self.boundary_angle(p)
    }

    pub fn boundary_point_at_arc(&self, s: f64) -> Vec2 {
        self.boundary_point(s / self.radius)
    }

    /// Total Euclidean boundary length `2πR`.
    pub fn boundary_len(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius
    }

    /// Signed arc difference `a − b` wrapped to `(−L/2, L/2]`.
    pub fn wrap_arc(&self, d: f64) -> f64 {
        let l = self.boundary_len();
        let mut d = d % l;
        if d > 0.5 * l {
            d -= l;
        } else if d <= -0.5 * l {
            d += l;
        }
        d
    }

    /// Euclidean unit tangent at the boundary, counter-clockwise.
    pub fn boundary_tangent(&self, p: Vec2) -> Vec2 {
        p.rot90() / p.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_is_signed_distance() {
        let d = Domain::unit_disk();
        assert!((d.rho(Vec2::new(0.5, 0.0)) - 0.5).abs() < 1e-15);
        assert!(d.rho(Vec2::new(1.2, 0.0)) < 0.0);
        let p = Vec2::new(0.3, -0.8);
        // |grad rho| = 1 away from the center
        assert!((d.grad_rho(p).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wrap_arc_is_symmetric() {
        let d = Domain::unit_disk();
        let l = d.boundary_len();
        assert!((d.wrap_arc(l - 0.1) - -0.1).abs() < 1e-12);
        assert!((d.wrap_arc(0.1) - 0.1).abs() < 1e-12);
    }
}
