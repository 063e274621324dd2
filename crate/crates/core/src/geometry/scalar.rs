use std::sync::Arc;

use super::vec::{SymMat2, Vec2};

/// Bivariate polynomial `Σ c · x^i y^j`, sparse in (i, j).
#[derive(Debug, Clone, Default)]
pub struct Poly2 {
    terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Poly2 { terms }
    }

    pub fn constant(c: f64) -> Self {
        Poly2::new(vec![(0, 0, c)])
    }

    pub fn value(&self, p: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * p.x.powi(i as i32) * p.y.powi(j as i32))
            .sum()
    }

    pub fn dx(&self) -> Poly2 {
        Poly2::new(
            self.terms
                .iter()
                .filter(|&&(i, _, _)| i > 0)
                .map(|&(i, j, c)| (i - 1, j, c * i as f64))
                .collect(),
        )
    }

    pub fn dy(&self) -> Poly2 {
        Poly2::new(
            self.terms
                .iter()
                .filter(|&&(_, j, _)| j > 0)
                .map(|&(i, j, c)| (i, j - 1, c * j as f64))
                .collect(),
        )
    }
}

type ValueFn = dyn Fn(Vec2) -> f64 + Send + Sync;
type GradFn = dyn Fn(Vec2) -> Vec2 + Send + Sync;
type HessFn = dyn Fn(Vec2) -> SymMat2 + Send + Sync;

/// Smooth scalar field with hand-coded first and second derivatives.
///
/// The analytic families below cover every profile the test systems need:
/// linear slopes, polynomial bumps vanishing on the boundary circle, and the
/// constant-curvature conformal factor.
#[derive(Clone)]
pub struct ScalarField {
    value: Arc<ValueFn>,
    grad: Arc<GradFn>,
    hess: Arc<HessFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScalarField(..)")
    }
}

impl ScalarField {
    pub fn from_parts(
        value: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        grad: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
        hess: impl Fn(Vec2) -> SymMat2 + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            value: Arc::new(value),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
        }
    }

    pub fn zero() -> Self {
        Self::from_parts(|_| 0.0, |_| Vec2::ZERO, |_| SymMat2::ZERO)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_parts(move |_| c, |_| Vec2::ZERO, |_| SymMat2::ZERO)
    }

    /// `u = ax·x + ay·y`.
    pub fn linear(ax: f64, ay: f64) -> Self {
        Self::from_parts(
            move |p| ax * p.x + ay * p.y,
            move |_| Vec2::new(ax, ay),
            |_| SymMat2::ZERO,
        )
    }

    /// Polynomial field with exact derivatives.
    pub fn poly(poly: Poly2) -> Self {
        let dx = poly.dx();
        let dy = poly.dy();
        let dxx = dx.dx();
        let dxy = dx.dy();
        let dyy = dy.dy();
        Self::from_parts(
            move |p| poly.value(p),
            move |p| Vec2::new(dx.value(p), dy.value(p)),
            move |p| SymMat2::new(dxx.value(p), dxy.value(p), dyy.value(p)),
        )
    }

    /// `amp · (1 − r²/R²)` — the basic radial bump, vanishing on `r = R`.
    pub fn radial_bump(amp: f64, radius: f64) -> Self {
        let s = amp / (radius * radius);
        Self::poly(Poly2::new(vec![(0, 0, amp), (2, 0, -s), (0, 2, -s)]))
    }

    /// `(1 − r²/R²)^power · poly(x, y)`: a smooth bump vanishing to `power`
    /// orders on the circle of the given radius.
    pub fn poly_bump(poly: Poly2, power: u32, radius: f64) -> Self {
        let mut cut = Poly2::constant(1.0);
        let q = Poly2::new(vec![
            (0, 0, 1.0),
            (2, 0, -1.0 / (radius * radius)),
            (0, 2, -1.0 / (radius * radius)),
        ]);
        for _ in 0..power {
            cut = poly_mul(&cut, &q);
        }
        Self::poly(poly_mul(&cut, &poly))
    }

    /// `u = −ln(1 + κ r²/4)`: the metric `e^{2u} δ` has constant Gauss
    /// curvature κ.
    pub fn log_const_curvature(kappa: f64) -> Self {
        let val = move |p: Vec2| -> f64 { -(1.0 + 0.25 * kappa * p.dot(p)).ln() };
        let grad = move |p: Vec2| -> Vec2 {
            let w = 1.0 + 0.25 * kappa * p.dot(p);
            p * (-0.5 * kappa / w)
        };
        let hess = move |p: Vec2| -> SymMat2 {
            let w = 1.0 + 0.25 * kappa * p.dot(p);
            let c = -0.5 * kappa / w;
            let d = 0.25 * kappa * kappa / (w * w);
            SymMat2::new(c + d * p.x * p.x, d * p.x * p.y, c + d * p.y * p.y)
        };
        Self::from_parts(val, grad, hess)
    }

    pub fn value(&self, p: Vec2) -> f64 {
        (self.value)(p)
    }

    pub fn grad(&self, p: Vec2) -> Vec2 {
        (self.grad)(p)
    }

    pub fn hess(&self, p: Vec2) -> SymMat2 {
        (self.hess)(p)
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        let f = self.clone();
        let g = self.clone();
        let h = self.clone();
        Self::from_parts(
            move |p| s * f.value(p),
            move |p| g.grad(p) * s,
            move |p| h.hess(p).scale(s),
        )
    }
}

fn poly_mul(a: &Poly2, b: &Poly2) -> Poly2 {
    let mut terms: Vec<(u32, u32, f64)> = Vec::new();
    for &(i, j, c) in &a.terms {
        for &(k, l, d) in &b.terms {
            let (ni, nj, nc) = (i + k, j + l, c * d);
            if let Some(t) = terms.iter_mut().find(|t| t.0 == ni && t.1 == nj) {
                t.2 += nc;
            } else {
                terms.push((ni, nj, nc));
            }
        }
    }
    Poly2::new(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &ScalarField, p: Vec2) -> Vec2 {
        let h = 1e-5;
        Vec2::new(
            (f.value(p + Vec2::new(h, 0.0)) - f.value(p - Vec2::new(h, 0.0))) / (2.0 * h),
            (f.value(p + Vec2::new(0.0, h)) - f.value(p - Vec2::new(0.0, h))) / (2.0 * h),
        )
    }

    #[test]
    fn analytic_derivatives_match_fd() {
        let fields = [
            ScalarField::linear(0.3, -0.7),
            ScalarField::radial_bump(0.4, 1.0),
            ScalarField::poly_bump(Poly2::new(vec![(1, 1, 1.0), (0, 0, 0.5)]), 3, 1.0),
            ScalarField::log_const_curvature(2.5),
        ];
        let p = Vec2::new(0.31, -0.44);
        for f in &fields {
            let fd = fd_grad(f, p);
            let an = f.grad(p);
            assert!((fd - an).norm() < 1e-8, "grad mismatch: {fd:?} vs {an:?}");
            let h = 1e-4;
            let fxx = (f.value(p + Vec2::new(h, 0.0)) - 2.0 * f.value(p)
                + f.value(p - Vec2::new(h, 0.0)))
                / (h * h);
            assert!((fxx - f.hess(p).xx).abs() < 1e-6);
        }
    }
}
