use std::sync::Arc;

use super::scalar::ScalarField;
use super::vec::{Mat2, SymMat2, Vec2};

type SymFn = dyn Fn(Vec2) -> SymMat2 + Send + Sync;
type SymDerivFn = dyn Fn(Vec2) -> [SymMat2; 2] + Send + Sync;
type CovFn = dyn Fn(Vec2) -> Vec2 + Send + Sync;
type CovDerivFn = dyn Fn(Vec2) -> Mat2 + Send + Sync;

/// Symmetric covariant 2-tensor field `x ↦ h_ij(x)` with first derivatives.
#[derive(Clone)]
pub struct SymTensorField {
    value: Arc<SymFn>,
    deriv: Arc<SymDerivFn>,
}

impl std::fmt::Debug for SymTensorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymTensorField(..)")
    }
}

impl SymTensorField {
    pub fn zero() -> Self {
        SymTensorField {
            value: Arc::new(|_| SymMat2::ZERO),
            deriv: Arc::new(|_| [SymMat2::ZERO, SymMat2::ZERO]),
        }
    }

    /// Constant coefficient tensor (e.g. the Euclidean metric as a tensor).
    pub fn constant(m: SymMat2) -> Self {
        SymTensorField {
            value: Arc::new(move |_| m),
            deriv: Arc::new(|_| [SymMat2::ZERO, SymMat2::ZERO]),
        }
    }

    /// Componentwise from scalar fields `(h_xx, h_xy, h_yy)`.
    pub fn from_components(xx: ScalarField, xy: ScalarField, yy: ScalarField) -> Self {
        let (vx, vm, vy) = (xx.clone(), xy.clone(), yy.clone());
        SymTensorField {
            value: Arc::new(move |p| SymMat2::new(vx.value(p), vm.value(p), vy.value(p))),
            deriv: Arc::new(move |p| {
                let gx = xx.grad(p);
                let gm = xy.grad(p);
                let gy = yy.grad(p);
                [
                    SymMat2::new(gx.x, gm.x, gy.x),
                    SymMat2::new(gx.y, gm.y, gy.y),
                ]
            }),
        }
    }

    pub fn custom(
        value: impl Fn(Vec2) -> SymMat2 + Send + Sync + 'static,
        deriv: impl Fn(Vec2) -> [SymMat2; 2] + Send + Sync + 'static,
    ) -> Self {
        SymTensorField {
            value: Arc::new(value),
            deriv: Arc::new(deriv),
        }
    }

    pub fn value(&self, p: Vec2) -> SymMat2 {
        (self.value)(p)
    }

    pub fn deriv(&self, p: Vec2) -> [SymMat2; 2] {
        (self.deriv)(p)
    }

    pub fn scaled(&self, s: f64) -> SymTensorField {
        let v = self.clone();
        let d = self.clone();
        SymTensorField {
            value: Arc::new(move |p| v.value(p).scale(s)),
            deriv: Arc::new(move |p| {
                let dd = d.deriv(p);
                [dd[0].scale(s), dd[1].scale(s)]
            }),
        }
    }
}

/// Covector (1-form) field `x ↦ v_i(x)` with jacobian `∂_j v_i`.
///
/// Jacobian layout: row = component i, column = derivative j, so
/// `jac.a = ∂_x v_x`, `jac.b = ∂_y v_x`, `jac.c = ∂_x v_y`, `jac.d = ∂_y v_y`.
#[derive(Clone)]
pub struct CovectorField {
    value: Arc<CovFn>,
    jacobian: Arc<CovDerivFn>,
}

impl std::fmt::Debug for CovectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CovectorField(..)")
    }
}

impl CovectorField {
    pub fn zero() -> Self {
        CovectorField {
            value: Arc::new(|_| Vec2::ZERO),
            jacobian: Arc::new(|_| Mat2::default()),
        }
    }

    /// From component scalar fields `(v_x, v_y)`.
    pub fn from_components(cx: ScalarField, cy: ScalarField) -> Self {
        let (vx, vy) = (cx.clone(), cy.clone());
        CovectorField {
            value: Arc::new(move |p| Vec2::new(vx.value(p), vy.value(p))),
            jacobian: Arc::new(move |p| {
                let gx = cx.grad(p);
                let gy = cy.grad(p);
                Mat2::new(gx.x, gx.y, gy.x, gy.y)
            }),
        }
    }

    /// Exact differential `dψ` of a scalar field.
    pub fn exact(psi: &ScalarField) -> Self {
        let g = psi.clone();
        let h = psi.clone();
        CovectorField {
            value: Arc::new(move |p| g.grad(p)),
            jacobian: Arc::new(move |p| h.hess(p).to_mat()),
        }
    }

    /// `(λ/2)(−y dx + x dy)`: constant curl `dα = λ dx∧dy`.
    pub fn solenoid(lambda: f64) -> Self {
        CovectorField {
            value: Arc::new(move |p| Vec2::new(-0.5 * lambda * p.y, 0.5 * lambda * p.x)),
            jacobian: Arc::new(move |_| Mat2::new(0.0, -0.5 * lambda, 0.5 * lambda, 0.0)),
        }
    }

    pub fn custom(
        value: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        jacobian: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static,
    ) -> Self {
        CovectorField {
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
        }
    }

    /// Derivative evaluator by central differences of the value evaluator.
    pub fn custom_fd(value: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static, step: f64) -> Self {
        let v = Arc::new(value);
        let vd = v.clone();
        CovectorField {
            value: Arc::new(move |p| v(p)),
            jacobian: Arc::new(move |p| {
                let ex = Vec2::new(step, 0.0);
                let ey = Vec2::new(0.0, step);
                let dx = (vd(p + ex) - vd(p - ex)) / (2.0 * step);
                let dy = (vd(p + ey) - vd(p - ey)) / (2.0 * step);
                Mat2::new(dx.x, dy.x, dx.y, dy.y)
            }),
        }
    }

    pub fn add(&self, other: &CovectorField) -> CovectorField {
        let (a, b) = (self.clone(), other.clone());
        let (c, d) = (self.clone(), other.clone());
        CovectorField {
            value: Arc::new(move |p| a.value(p) + b.value(p)),
            jacobian: Arc::new(move |p| c.jacobian(p).add(d.jacobian(p))),
        }
    }

    pub fn scaled(&self, s: f64) -> CovectorField {
        let a = self.clone();
        let b = self.clone();
        CovectorField {
            value: Arc::new(move |p| a.value(p) * s),
            jacobian: Arc::new(move |p| b.jacobian(p).scale(s)),
        }
    }

    pub fn value(&self, p: Vec2) -> Vec2 {
        (self.value)(p)
    }

    pub fn jacobian(&self, p: Vec2) -> Mat2 {
        (self.jacobian)(p)
    }

    /// Curl component `∂_x v_y − ∂_y v_x`.
    pub fn curl(&self, p: Vec2) -> f64 {
        let j = self.jacobian(p);
        j.c - j.b
    }
}
