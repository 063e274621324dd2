//! Quadrature rules shared across the crate: cached Gauss–Legendre nodes,
//! disk (polar) product rules, and periodic trapezoid helpers.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::geometry::Vec2;

fn gl_cache() -> &'static Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, computed by Newton
/// iteration on the Legendre polynomial and cached per order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if let Some(hit) = gl_cache().lock().unwrap().get(&n) {
        return hit.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    gl_cache()
        .lock()
        .unwrap()
        .insert(n, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]` as `(node, weight)` pairs.
pub fn gl_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// `∫_a^b f` by an n-point Gauss–Legendre rule.
pub fn integrate_gl(n: usize, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    gl_on(n, a, b).into_iter().map(|(t, w)| w * f(t)).sum()
}

/// Tensor-product quadrature for the disk of given radius: Gauss–Legendre in
/// the radius, uniform (trapezoid) in the polar angle. Weights carry the
/// Euclidean area element `r dr dφ`; metric volume factors are the caller's.
#[derive(Debug, Clone)]
pub struct DiskQuad {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl DiskQuad {
    pub fn new(radius: f64, n_r: usize, n_phi: usize) -> Self {
        let mut points = Vec::with_capacity(n_r * n_phi);
        let mut weights = Vec::with_capacity(n_r * n_phi);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        for (r, wr) in gl_on(n_r, 0.0, radius) {
            for j in 0..n_phi {
                let phi = dphi * j as f64;
                points.push(Vec2::from_angle(phi) * r);
                weights.push(wr * r * dphi);
            }
        }
        DiskQuad { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫ f dx` over the disk (Euclidean element).
    pub fn integrate(&self, mut f: impl FnMut(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Uniform fiber angles `θ_j = 2πj/n` with trapezoid weight `2π/n`.
pub fn fiber_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // degree 2n−1 exactness
        let v = integrate_gl(6, 0.0, 1.0, |t| t.powi(11));
        assert!((v - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn disk_quad_area_and_moment() {
        let q = DiskQuad::new(1.0, 24, 48);
        let area = q.integrate(|_| 1.0);
        assert!((area - std::f64::consts::PI).abs() < 1e-12);
        let m2 = q.integrate(|p| p.dot(p));
        assert!((m2 - std::f64::consts::PI / 2.0).abs() < 1e-12);
    }
}
