use super::domain::Domain;
use super::metric::MetricField;
use super::one_form::OneFormField;
use super::vec::{Mat2, SymMat2, Vec2};
use crate::{Error, Result};

/// Counter-clockwise quarter turn in coordinates.
const J: Mat2 = Mat2 {
    a: 0.0,
    b: -1.0,
    c: 1.0,
    d: 0.0,
};

/// A magnetic system: metric `g`, magnetic potential `α`, and the domain.
///
/// Derived objects (`Ω = dα`, the Lorentz force `Y`, Christoffel symbols,
/// orthonormal frames) are evaluated pointwise from the field closures. All
/// evaluators are pure, so a system can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct MagneticSystem {
    pub metric: MetricField,
    pub alpha: OneFormField,
    pub domain: Domain,
}

/// Positively oriented g-orthonormal frame at a point.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub e1: Vec2,
    pub e2: Vec2,
}

impl MagneticSystem {
    pub fn new(metric: MetricField, alpha: OneFormField, domain: Domain) -> Self {
        MagneticSystem {
            metric,
            alpha,
            domain,
        }
    }

    /// The reversed system `(g, −α)`; its geodesics retrace ours backward.
    pub fn reversed(&self) -> MagneticSystem {
        MagneticSystem {
            metric: self.metric.clone(),
            alpha: self.alpha.negated(),
            domain: self.domain,
        }
    }

    /// Same fields on an enlarged disk `M₁` (analytic families extend as-is).
    pub fn extended(&self, factor: f64) -> MagneticSystem {
        MagneticSystem {
            metric: self.metric.clone(),
            alpha: self.alpha.clone(),
            domain: self.domain.enlarged(factor),
        }
    }

    /// Christoffel symbols `Γ^i_{jk}(x)`, symmetric in (j, k).
    pub fn christoffel(&self, p: Vec2) -> Result<[SymMat2; 2]> {
        self.metric.christoffel(p)
    }

    /// `Ω_12(x)`, the single component of `Ω = dα` in 2D.
    pub fn omega12(&self, p: Vec2) -> f64 {
        self.alpha.omega12(p)
    }

    /// `λ(x)` with `Ω = λ Ω_a`, `Ω_a` the metric area form.
    pub fn lambda(&self, p: Vec2) -> f64 {
        self.omega12(p) / self.metric.sqrt_det(p)
    }

    /// Lorentz force as a matrix: `Y(ξ)^i = Y^i_j ξ^j`, determined by
    /// `⟨Y(ξ), η⟩_g = Ω(ξ, η)`.
    pub fn lorentz_matrix(&self, p: Vec2) -> Mat2 {
        let gi = self.metric.inv_at(p).to_mat();
        gi.mul_mat(J).scale(self.omega12(p))
    }

    /// `Y_x(ξ)`.
    pub fn lorentz(&self, p: Vec2, xi: Vec2) -> Vec2 {
        self.lorentz_matrix(p).mul_vec(xi)
    }

    /// Lorentz force on covectors: `(Yη)_i = −Y^j_i η_j`; matches the vector
    /// map under index raising/lowering.
    pub fn lorentz_covector(&self, p: Vec2, eta: Vec2) -> Vec2 {
        -self.lorentz_matrix(p).transpose().mul_vec(eta)
    }

    /// Covariant derivative `(∇_k Y)^i_j` of the Lorentz tensor, by central
    /// differences of the evaluator with Christoffel corrections.
    pub fn nabla_lorentz(&self, p: Vec2) -> Result<[Mat2; 2]> {
        let step = 1e-5;
        let gamma = self.christoffel(p)?;
        let mut out = [Mat2::default(); 2];
        for k in 0..2 {
            let e = if k == 0 {
                Vec2::new(step, 0.0)
            } else {
                Vec2::new(0.0, step)
            };
            let dk = self
                .lorentz_matrix(p + e)
                .add(self.lorentz_matrix(p - e).scale(-1.0))
                .scale(0.5 / step);
            let y = self.lorentz_matrix(p);
            // (∇_k Y)^i_j = ∂_k Y^i_j + Γ^i_{kp} Y^p_j − Γ^p_{kj} Y^i_p
            let gam = |i: usize, a: usize, b: usize| -> f64 {
                let m = gamma[i];
                match (a, b) {
                    (0, 0) => m.xx,
                    (1, 1) => m.yy,
                    _ => m.xy,
                }
            };
            let yc = |i: usize, j: usize| -> f64 {
                match (i, j) {
                    (0, 0) => y.a,
                    (0, 1) => y.b,
                    (1, 0) => y.c,
                    _ => y.d,
                }
            };
            let dc = |i: usize, j: usize| -> f64 {
                match (i, j) {
                    (0, 0) => dk.a,
                    (0, 1) => dk.b,
                    (1, 0) => dk.c,
                    _ => dk.d,
                }
            };
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = dc(i, j);
                    for q in 0..2 {
                        v += gam(i, k, q) * yc(q, j) - gam(q, k, j) * yc(i, q);
                    }
                    m[i][j] = v;
                }
            }
            out[k] = Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]);
        }
        Ok(out)
    }

    /// Rotation of a vector by +π/2 in the orientation of the area form;
    /// g-norm preserving, `Ω_a(ξ, ξ_⊥) = |ξ|²_g`.
    pub fn perp(&self, p: Vec2, v: Vec2) -> Vec2 {
        self.metric
            .inv_at(p)
            .to_mat()
            .mul_vec(J.mul_vec(v))
            * self.metric.sqrt_det(p)
    }

    /// Rotation of a covector by +π/2: lowers the perp of the raised vector.
    pub fn perp_covector(&self, p: Vec2, a: Vec2) -> Vec2 {
        J.mul_vec(self.metric.inv_at(p).mul_vec(a)) * self.metric.sqrt_det(p)
    }

    /// g-unit vector in the coordinate direction of `dir`.
    pub fn unit_vector(&self, p: Vec2, dir: Vec2) -> Vec2 {
        dir / self.metric.norm(p, dir)
    }

    /// Positively oriented g-orthonormal frame by Gram–Schmidt on (∂₁, ∂₂).
    pub fn frame(&self, p: Vec2) -> Frame {
        let g = self.metric.at(p);
        let e1 = Vec2::new(1.0 / g.xx.sqrt(), 0.0);
        let raw = Vec2::new(0.0, 1.0);
        let proj = g.bilin(raw, e1);
        let mut e2 = raw - e1 * proj;
        e2 = e2 / g.quad(e2).sqrt();
        Frame { e1, e2 }
    }

    /// Connection 1-form of the frame: `ω_i = ⟨∇_i e₁, e₂⟩_g`; the geodesic
    /// fiber-angle evolves as `θ̇ = −ω(ẋ)` (plus λ for magnetic flow).
    pub fn frame_connection(&self, p: Vec2) -> Result<Vec2> {
        let g = self.metric.at(p);
        let dg = self.metric.d_at(p);
        let gamma = self.christoffel(p)?;
        let f = self.frame(p);
        // e1 = (g11^{-1/2}, 0): ∂_i e1 = (−½ g11^{-3/2} ∂_i g11, 0)
        let mut out = [0.0; 2];
        for i in 0..2 {
            let dg11 = dg[i].xx;
            let de1 = Vec2::new(-0.5 * g.xx.powf(-1.5) * dg11, 0.0);
            let cov = Vec2::new(
                de1.x + gamma[0].bilin(
                    if i == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) },
                    f.e1,
                ),
                de1.y + gamma[1].bilin(
                    if i == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) },
                    f.e1,
                ),
            );
            out[i] = g.bilin(cov, f.e2);
        }
        Ok(Vec2::new(out[0], out[1]))
    }

    /// Fiber angle of `v` in the orthonormal frame at `p`.
    pub fn frame_angle(&self, p: Vec2, v: Vec2) -> f64 {
        let g = self.metric.at(p);
        let f = self.frame(p);
        g.bilin(v, f.e2).atan2(g.bilin(v, f.e1))
    }

    /// g-unit vector with the given fiber angle in the frame at `p`.
    pub fn dir_from_frame_angle(&self, p: Vec2, theta: f64) -> Vec2 {
        let f = self.frame(p);
        f.e1 * theta.cos() + f.e2 * theta.sin()
    }

    /// Inward g-unit normal at a boundary point.
    pub fn boundary_normal(&self, x: Vec2) -> Vec2 {
        let drho = self.domain.grad_rho(x);
        let grad = self.metric.raise(x, drho);
        grad / self.metric.norm(x, grad)
    }

    /// g-unit boundary tangent `ν_⊥` (fixed orientation).
    pub fn boundary_tangent(&self, x: Vec2) -> Vec2 {
        self.perp(x, self.boundary_normal(x))
    }

    /// Fan angle of a boundary direction, measured from the inward normal;
    /// inward vectors have `|θ| < π/2`.
    pub fn boundary_angle_from_normal(&self, x: Vec2, xi: Vec2) -> f64 {
        let nu = self.boundary_normal(x);
        let tau = self.boundary_tangent(x);
        let g = self.metric.at(x);
        g.bilin(xi, tau).atan2(g.bilin(xi, nu))
    }

    /// Boundary direction with fan angle θ from the inward normal.
    pub fn boundary_dir(&self, x: Vec2, theta: f64) -> Vec2 {
        let nu = self.boundary_normal(x);
        let tau = self.boundary_tangent(x);
        nu * theta.cos() + tau * theta.sin()
    }

    /// `⟨ξ, ν⟩_g` at a boundary point: positive for inward vectors.
    pub fn inward_component(&self, x: Vec2, xi: Vec2) -> f64 {
        self.metric.inner(x, xi, self.boundary_normal(x))
    }

    /// Covariant Hessian of ρ evaluated on (ξ, ξ).
    fn rho_hessian_quad(&self, x: Vec2, xi: Vec2) -> Result<f64> {
        let hess = self.domain.hess_rho(x);
        let drho = self.domain.grad_rho(x);
        let gamma = self.christoffel(x)?;
        Ok(hess.quad(xi) - gamma[0].quad(xi) * drho.x - gamma[1].quad(xi) * drho.y)
    }

    /// Second fundamental form `Λ(x, ξ)` of ∂M w.r.t. the inward normal.
    pub fn second_fundamental_form(&self, x: Vec2, xi: Vec2) -> Result<f64> {
        let drho = self.domain.grad_rho(x);
        let norm = self.metric.norm(x, self.metric.raise(x, drho));
        Ok(-self.rho_hessian_quad(x, xi)? / norm)
    }

    /// Magnetic convexity margin `Λ(x, ξ) − ⟨Y_x(ξ), ν(x)⟩` for a g-unit
    /// tangent ξ at a boundary point; positive margins mean strictly
    /// magnetic convex in that direction.
    pub fn convexity_margin(&self, x: Vec2, xi: Vec2) -> Result<f64> {
        let rho = self.domain.rho(x);
        if rho.abs() > 1e-7 * self.domain.radius() {
            return Err(Error::NotOnBoundary {
                x: x.x,
                y: x.y,
                rho,
            });
        }
        let lam = self.second_fundamental_form(x, xi)?;
        let y = self.lorentz(x, xi);
        Ok(lam - self.metric.inner(x, y, self.boundary_normal(x)))
    }

    /// Minimum convexity margin over a boundary fan (both tangent
    /// orientations at `n` stations).
    pub fn min_convexity_margin(&self, n: usize) -> Result<f64> {
        let mut min = f64::INFINITY;
        for i in 0..n {
            let phi = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            let x = self.domain.boundary_point(phi);
            let tau = self.boundary_tangent(x);
            for xi in [tau, -tau] {
                min = min.min(self.convexity_margin(x, xi)?);
            }
        }
        Ok(min)
    }

    /// Gauss curvature by second finite differences of the metric
    /// (differences of Christoffel symbols, step 1e−4, one Richardson pass).
    pub fn gauss_curvature(&self, p: Vec2) -> Result<f64> {
        let k_at = |h: f64| -> Result<f64> {
            // R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{kp} Γ^p_{lj} − Γ^i_{lp} Γ^p_{kj}
            // K = g_{1i} R^i_{212} / det g  (k=1, l=2, j=2)
            let ex = Vec2::new(h, 0.0);
            let ey = Vec2::new(0.0, h);
            let gxp = self.christoffel(p + ex)?;
            let gxm = self.christoffel(p - ex)?;
            let gyp = self.christoffel(p + ey)?;
            let gym = self.christoffel(p - ey)?;
            let g0 = self.christoffel(p)?;
            let gam = |m: &[SymMat2; 2], i: usize, a: usize, b: usize| -> f64 {
                match (a, b) {
                    (0, 0) => m[i].xx,
                    (1, 1) => m[i].yy,
                    _ => m[i].xy,
                }
            };
            let mut r = [0.0; 2];
            for i in 0..2 {
                let d1 = (gam(&gxp, i, 1, 1) - gam(&gxm, i, 1, 1)) / (2.0 * h);
                let d2 = (gam(&gyp, i, 0, 1) - gam(&gym, i, 0, 1)) / (2.0 * h);
                let mut quad = 0.0;
                for q in 0..2 {
                    quad += gam(&g0, i, 0, q) * gam(&g0, q, 1, 1)
                        - gam(&g0, i, 1, q) * gam(&g0, q, 0, 1);
                }
                r[i] = d1 - d2 + quad;
            }
            let g = self.metric.at(p);
            Ok((g.xx * r[0] + g.xy * r[1]) / g.det())
        };
        if self.metric.is_euclidean() {
            return Ok(0.0);
        }
        let h = 1e-4;
        let kh = k_at(h)?;
        let kh2 = k_at(0.5 * h)?;
        Ok((4.0 * kh2 - kh) / 3.0)
    }
}
