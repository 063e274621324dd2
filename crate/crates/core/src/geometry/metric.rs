use std::sync::Arc;

use super::scalar::ScalarField;
use super::vec::{SymMat2, Vec2};
use crate::{Error, Result};

type MetricFn = dyn Fn(Vec2) -> SymMat2 + Send + Sync;
type MetricDerivFn = dyn Fn(Vec2) -> [SymMat2; 2] + Send + Sync;

/// Which analytic family a metric comes from. Used for serialization and for
/// a few closed-form shortcuts in tests; evaluation always goes through the
/// stored closures.
#[derive(Debug, Clone)]
pub enum MetricFamily {
    Euclidean,
    /// `g = e^{2u} δ` with the stored conformal exponent `u`.
    Conformal(ScalarField),
    Custom,
}

/// Pointwise Riemannian metric `x ↦ g_ij(x)` with its first derivatives
/// `x ↦ ∂_k g_ij(x)`.
#[derive(Clone)]
pub struct MetricField {
    family: MetricFamily,
    g: Arc<MetricFn>,
    dg: Arc<MetricDerivFn>,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MetricField({:?})", self.family)
    }
}

impl MetricField {
    pub fn euclidean() -> Self {
        MetricField {
            family: MetricFamily::Euclidean,
            g: Arc::new(|_| SymMat2::IDENTITY),
            dg: Arc::new(|_| [SymMat2::ZERO, SymMat2::ZERO]),
        }
    }

    /// Conformal metric `e^{2u} δ`.
    pub fn conformal(u: ScalarField) -> Self {
        let uv = u.clone();
        let ud = u.clone();
        MetricField {
            family: MetricFamily::Conformal(u),
            g: Arc::new(move |p| {
                let w = (2.0 * uv.value(p)).exp();
                SymMat2::new(w, 0.0, w)
            }),
            dg: Arc::new(move |p| {
                let w = (2.0 * ud.value(p)).exp();
                let gr = ud.grad(p);
                [
                    SymMat2::new(2.0 * gr.x * w, 0.0, 2.0 * gr.x * w),
                    SymMat2::new(2.0 * gr.y * w, 0.0, 2.0 * gr.y * w),
                ]
            }),
        }
    }

    pub fn custom(
        g: impl Fn(Vec2) -> SymMat2 + Send + Sync + 'static,
        dg: impl Fn(Vec2) -> [SymMat2; 2] + Send + Sync + 'static,
    ) -> Self {
        MetricField {
            family: MetricFamily::Custom,
            g: Arc::new(g),
            dg: Arc::new(dg),
        }
    }

    /// Custom metric whose derivative evaluator is produced by central
    /// differences of the value evaluator. Used for pullback metrics where a
    /// closed-form derivative would require third derivatives of the map.
    pub fn custom_fd(g: impl Fn(Vec2) -> SymMat2 + Send + Sync + 'static, step: f64) -> Self {
        let g = Arc::new(g);
        let gd = g.clone();
        MetricField {
            family: MetricFamily::Custom,
            g: Arc::new(move |p| g(p)),
            dg: Arc::new(move |p| {
                let ex = Vec2::new(step, 0.0);
                let ey = Vec2::new(0.0, step);
                [
                    gd(p + ex).sub(gd(p - ex)).scale(0.5 / step),
                    gd(p + ey).sub(gd(p - ey)).scale(0.5 / step),
                ]
            }),
        }
    }

    /// The perturbed metric `g + s·h` of a linearization family.
    pub fn perturbed(&self, h: &super::SymTensorField, s: f64) -> MetricField {
        let base = self.clone();
        let based = self.clone();
        let h1 = h.clone();
        let h2 = h.clone();
        MetricField {
            family: MetricFamily::Custom,
            g: Arc::new(move |p| base.at(p).add(h1.value(p).scale(s))),
            dg: Arc::new(move |p| {
                let d = based.d_at(p);
                let dh = h2.deriv(p);
                [d[0].add(dh[0].scale(s)), d[1].add(dh[1].scale(s))]
            }),
        }
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.family, MetricFamily::Euclidean)
    }

    /// Metric tensor at `p`.
    pub fn at(&self, p: Vec2) -> SymMat2 {
        (self.g)(p)
    }

    /// `[∂_x g, ∂_y g]` at `p`.
    pub fn d_at(&self, p: Vec2) -> [SymMat2; 2] {
        (self.dg)(p)
    }

    pub fn checked_at(&self, p: Vec2) -> Result<SymMat2> {
        let g = self.at(p);
        if !g.is_positive_definite() {
            return Err(Error::DegenerateMetric {
                x: p.x,
                y: p.y,
                det: g.det(),
            });
        }
        Ok(g)
    }

    pub fn inv_at(&self, p: Vec2) -> SymMat2 {
        self.at(p).inverse()
    }

    pub fn sqrt_det(&self, p: Vec2) -> f64 {
        self.at(p).det().sqrt()
    }

    pub fn inner(&self, p: Vec2, v: Vec2, w: Vec2) -> f64 {
        self.at(p).bilin(v, w)
    }

    pub fn norm(&self, p: Vec2, v: Vec2) -> f64 {
        self.at(p).quad(v).max(0.0).sqrt()
    }

    /// Pairing of two covectors via `g^{-1}`.
    pub fn co_inner(&self, p: Vec2, a: Vec2, b: Vec2) -> f64 {
        self.inv_at(p).bilin(a, b)
    }

    /// Raise an index: covector → vector.
    pub fn raise(&self, p: Vec2, a: Vec2) -> Vec2 {
        self.inv_at(p).mul_vec(a)
    }

    /// Lower an index: vector → covector.
    pub fn lower(&self, p: Vec2, v: Vec2) -> Vec2 {
        self.at(p).mul_vec(v)
    }

    /// Christoffel symbols `Γ^i_{jk}` at `p`, symmetric in the lower pair;
    /// returned as one `SymMat2` in (j, k) per upper index i.
    pub fn christoffel(&self, p: Vec2) -> Result<[SymMat2; 2]> {
        let g = self.checked_at(p)?;
        let gi = g.inverse();
        let dg = self.d_at(p);
        // Γ_{l,jk} = ½ (∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk})
        let part = |l: usize, j: usize, k: usize| -> f64 {
            let gc = |m: &SymMat2, a: usize, b: usize| match (a, b) {
                (0, 0) => m.xx,
                (1, 1) => m.yy,
                _ => m.xy,
            };
            0.5 * (gc(&dg[j], l, k) + gc(&dg[k], l, j) - gc(&dg[l], j, k))
        };
        let gi_c = |a: usize, b: usize| match (a, b) {
            (0, 0) => gi.xx,
            (1, 1) => gi.yy,
            _ => gi.xy,
        };
        let mut out = [SymMat2::ZERO; 2];
        for i in 0..2 {
            let gamma = |j: usize, k: usize| -> f64 {
                gi_c(i, 0) * part(0, j, k) + gi_c(i, 1) * part(1, j, k)
            };
            out[i] = SymMat2::new(gamma(0, 0), gamma(0, 1), gamma(1, 1));
        }
        Ok(out)
    }
}
