//! 2D-specific operators on the unit sphere bundle: the fiberwise Hilbert
//! transform as a Fourier multiplier, the flow generators `G`, `V`, `G_⊥`,
//! `G_μ` on a sphere-bundle grid, the scattering extension `A`, the jump
//! operator `B`, and the transport identities they satisfy.
//!
//! Fiber convention: directions are parameterized by the angle θ in the
//! positively-oriented orthonormal frame of the metric, so `ξ(θ + π/2) =
//! ξ(θ)_⊥` and the fiber measure is `dθ`.

mod fft;
mod identities;

pub use identities::{
    extension_a, fundamental_residual, main_identity_residual, operator_b, BoundaryFiberData,
    FlowConstantData, FundamentalReport, MainIdentityOpts, MainIdentityReport,
};

use std::sync::Arc;

use rayon::prelude::*;

use crate::flow::FlowSettings;
use crate::geometry::{MagneticSystem, Vec2};
use crate::transform::kinetic_values;
use crate::Result;

use fft::fft_inplace;

/// Cartesian spatial nodes × uniform fiber angles. The spatial square spans
/// `[−extent, extent]²`; the fiber count must be a power of two for the
/// fiberwise Fourier transform.
#[derive(Debug, Clone)]
pub struct SphereBundleGrid {
    pub nx: usize,
    pub fiber_n: usize,
    pub extent: f64,
    pub h: f64,
}

impl SphereBundleGrid {
    pub fn new(nx: usize, fiber_n: usize, extent: f64) -> Arc<Self> {
        assert!(fiber_n.is_power_of_two(), "fiber dimension must be 2^k");
        assert!(nx >= 4);
        Arc::new(SphereBundleGrid {
            nx,
            fiber_n,
            extent,
            h: 2.0 * extent / (nx as f64 - 1.0),
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.nx * self.nx
    }

    pub fn point(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            -self.extent + self.h * ix as f64,
            -self.extent + self.h * iy as f64,
        )
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.fiber_n as f64
    }

    pub fn spatial_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

/// Values `u(x, θ)` on a sphere-bundle grid.
#[derive(Debug, Clone)]
pub struct FiberFunction {
    pub grid: Arc<SphereBundleGrid>,
    /// Layout: `values[spatial * fiber_n + j]`.
    pub values: Vec<f64>,
}

impl FiberFunction {
    pub fn zeros(grid: &Arc<SphereBundleGrid>) -> Self {
        FiberFunction {
            grid: grid.clone(),
            values: vec![0.0; grid.n_spatial() * grid.fiber_n],
        }
    }

    /// Sample a phase-space function `u(x, ξ(θ))`.
    pub fn sample<F>(system: &MagneticSystem, grid: &Arc<SphereBundleGrid>, u: F) -> Self
    where
        F: Fn(Vec2, Vec2) -> f64 + Sync,
    {
        let nf = grid.fiber_n;
        let values: Vec<f64> = (0..grid.n_spatial() * nf)
            .into_par_iter()
            .map(|k| {
                let (sp, j) = (k / nf, k % nf);
                let p = grid.point(sp % grid.nx, sp / grid.nx);
                let xi = system.dir_from_frame_angle(p, grid.theta(j));
                u(p, xi)
            })
            .collect();
        FiberFunction {
            grid: grid.clone(),
            values,
        }
    }

    pub fn at(&self, sp: usize, j: usize) -> f64 {
        self.values[sp * self.grid.fiber_n + j]
    }

    /// Fiber average `u₀(x)` per spatial node.
    pub fn fiber_mean(&self) -> Vec<f64> {
        let nf = self.grid.fiber_n as f64;
        (0..self.grid.n_spatial())
            .map(|sp| {
                self.values[sp * self.grid.fiber_n..(sp + 1) * self.grid.fiber_n]
                    .iter()
                    .sum::<f64>()
                    / nf
            })
            .collect()
    }

    /// Apply a fiber Fourier multiplier `c_k ↦ m(k)·c_k` with complex
    /// multiplier given as (re, im) per signed frequency.
    fn fiber_multiplier(&self, m: impl Fn(i64) -> (f64, f64) + Sync) -> FiberFunction {
        let nf = self.grid.fiber_n;
        let values: Vec<f64> = (0..self.grid.n_spatial())
            .into_par_iter()
            .flat_map_iter(|sp| {
                let mut re: Vec<f64> = self.values[sp * nf..(sp + 1) * nf].to_vec();
                let mut im = vec![0.0; nf];
                fft_inplace(&mut re, &mut im, false);
                for (k, (r, i)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
                    let freq = if k <= nf / 2 {
                        k as i64
                    } else {
                        k as i64 - nf as i64
                    };
                    let freq = if k == nf / 2 { 0 } else { freq };
                    let (mr, mi) = m(freq);
                    let (a, b) = (*r, *i);
                    *r = a * mr - b * mi;
                    *i = a * mi + b * mr;
                }
                fft_inplace(&mut re, &mut im, true);
                re.into_iter()
            })
            .collect();
        FiberFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Bicubic (Catmull–Rom) interpolation in space × periodic cubic in θ.
    pub fn interp(&self, p: Vec2, theta: f64) -> f64 {
        let g = &self.grid;
        let nf = g.fiber_n;
        let tau = 2.0 * std::f64::consts::PI;
        let tpos = (theta.rem_euclid(tau)) / tau * nf as f64;
        let j0 = tpos.floor() as usize % nf;
        let ft = tpos - tpos.floor();
        let fx = ((p.x + g.extent) / g.h).clamp(1.0, g.nx as f64 - 3.0);
        let fy = ((p.y + g.extent) / g.h).clamp(1.0, g.nx as f64 - 3.0);
        let ix = (fx.floor() as usize).clamp(1, g.nx - 3);
        let iy = (fy.floor() as usize).clamp(1, g.nx - 3);
        let (sx, sy) = (fx - ix as f64, fy - iy as f64);

        let catmull = |p0: f64, p1: f64, p2: f64, p3: f64, t: f64| -> f64 {
            0.5 * ((2.0 * p1)
                + (-p0 + p2) * t
                + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
                + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
        };
        let theta_val = |ix: usize, iy: usize| -> f64 {
            let sp = g.spatial_index(ix, iy);
            let v = |dj: i64| {
                self.values[sp * nf + ((j0 as i64 + dj).rem_euclid(nf as i64)) as usize]
            };
            catmull(v(-1), v(0), v(1), v(2), ft)
        };
        let mut rows = [0.0; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            let yy = iy + r - 1;
            *row = catmull(
                theta_val(ix - 1, yy),
                theta_val(ix, yy),
                theta_val(ix + 1, yy),
                theta_val(ix + 2, yy),
                sx,
            );
        }
        catmull(rows[0], rows[1], rows[2], rows[3], sy)
    }
}

/// Fiberwise Hilbert transform as the Fourier multiplier `i·sign(k)`.
///
/// The sign is pinned by the principal-value quadrature of the angular
/// kernel `cot((φ − θ)/2)` under the `+π/2` perp convention (validated by
/// the oracle test in this module): `H cos kθ = −sin kθ`, `H sin kθ =
/// cos kθ`, and `H(H u) = −(u − u₀)` on mean-free u.
pub fn hilbert_fiber(u: &FiberFunction) -> FiberFunction {
    u.fiber_multiplier(|k| (0.0, k.signum() as f64))
}

/// Fiber derivative `V = ∂_θ` (spectral).
pub fn fiber_derivative(u: &FiberFunction) -> FiberFunction {
    u.fiber_multiplier(|k| (0.0, k as f64))
}

/// Output of [`generators`]: the flow derivatives of `u` on the grid.
pub struct Generators {
    /// Geodesic generator `G u`.
    pub g: FiberFunction,
    /// Fiber derivative `V u`.
    pub v: FiberFunction,
    /// Perpendicular generator `G_⊥ u`.
    pub g_perp: FiberFunction,
    /// Magnetic generator `G_μ u = G u + λ V u`.
    pub g_mu: FiberFunction,
    /// Spatial nodes whose stencil used one-sided differences.
    pub one_sided: Vec<bool>,
}

/// Horizontal and vertical derivatives of a fiber function by centered
/// spatial differences with the connection correction in the θ coordinate:
/// `G u = ξ·∇_x u − ω(ξ) ∂_θ u`, `G_⊥ u = ξ_⊥·∇_x u − ω(ξ_⊥) ∂_θ u`.
pub fn generators(system: &MagneticSystem, u: &FiberFunction) -> Result<Generators> {
    let grid = &u.grid;
    let (nx, nf) = (grid.nx, grid.fiber_n);
    let vu = fiber_derivative(u);
    let mut g = FiberFunction::zeros(grid);
    let mut g_perp = FiberFunction::zeros(grid);
    let mut g_mu = FiberFunction::zeros(grid);
    let mut one_sided = vec![false; grid.n_spatial()];

    // precompute per-node geometry
    struct NodeGeom {
        omega: Vec2,
        lambda: f64,
    }
    let geoms: Result<Vec<NodeGeom>> = (0..grid.n_spatial())
        .into_par_iter()
        .map(|sp| {
            let p = grid.point(sp % nx, sp / nx);
            Ok(NodeGeom {
                omega: system.frame_connection(p)?,
                lambda: system.lambda(p),
            })
        })
        .collect();
    let geoms = geoms?;

    let h = grid.h;
    // 4th-order centered differences inside, low-order one-sided at edges
    let diff = |m2: Option<f64>,
                m1: Option<f64>,
                p1: Option<f64>,
                p2: Option<f64>,
                center: f64|
     -> f64 {
        match (m2, m1, p1, p2) {
            (Some(m2), Some(m1), Some(p1), Some(p2)) => {
                (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
            }
            (_, Some(m1), Some(p1), _) => (p1 - m1) / (2.0 * h),
            (_, None, Some(p1), _) => (p1 - center) / h,
            (_, Some(m1), None, _) => (center - m1) / h,
            _ => 0.0,
        }
    };
    for iy in 0..nx {
        for ix in 0..nx {
            let sp = grid.spatial_index(ix, iy);
            let p = grid.point(ix, iy);
            let edge = ix < 2 || iy < 2 || ix >= nx - 2 || iy >= nx - 2;
            one_sided[sp] = edge;
            let sample_x = |d: isize, j: usize| -> Option<f64> {
                let xx = ix as isize + d;
                (xx >= 0 && xx < nx as isize)
                    .then(|| u.at(grid.spatial_index(xx as usize, iy), j))
            };
            let sample_y = |d: isize, j: usize| -> Option<f64> {
                let yy = iy as isize + d;
                (yy >= 0 && yy < nx as isize)
                    .then(|| u.at(grid.spatial_index(ix, yy as usize), j))
            };
            for j in 0..nf {
                let theta = grid.theta(j);
                let xi = system.dir_from_frame_angle(p, theta);
                let xi_perp = system.dir_from_frame_angle(p, theta + std::f64::consts::FRAC_PI_2);
                let center = u.at(sp, j);
                let dx = diff(
                    sample_x(-2, j),
                    sample_x(-1, j),
                    sample_x(1, j),
                    sample_x(2, j),
                    center,
                );
                let dy = diff(
                    sample_y(-2, j),
                    sample_y(-1, j),
                    sample_y(1, j),
                    sample_y(2, j),
                    center,
                );
                let grad = Vec2::new(dx, dy);
                let dtheta = vu.at(sp, j);
                let geom = &geoms[sp];
                let gu = xi.dot(grad) - geom.omega.dot(xi) * dtheta;
                let gperp = xi_perp.dot(grad) - geom.omega.dot(xi_perp) * dtheta;
                let idx = sp * nf + j;
                g.values[idx] = gu;
                g_perp.values[idx] = gperp;
                g_mu.values[idx] = gu + geom.lambda * dtheta;
            }
        }
    }
    Ok(Generators {
        g,
        v: vu,
        g_perp,
        g_mu,
        one_sided,
    })
}

/// Max-norm residual of the commutation formula
/// `[H, G_μ]u = G_⊥(u₀) + (G_⊥ u)₀` over interior nodes within the given
/// radius. `u` should be supported away from ∂M so the stencils stay clean.
pub fn commutation_residual(
    system: &MagneticSystem,
    u: &FiberFunction,
    interior_radius: f64,
) -> Result<f64> {
    let grid = &u.grid;
    let nf = grid.fiber_n;
    let gen_u = generators(system, u)?;
    let h_u = hilbert_fiber(u);
    let gen_hu = generators(system, &h_u)?;
    let h_gmu_u = hilbert_fiber(&gen_u.g_mu);
    // commutator [H, G_μ] u = H G_μ u − G_μ H u
    // right side: G_⊥ of the fiber mean, plus the fiber mean of G_⊥ u
    let u0 = u.fiber_mean();
    let mut u0_fn = FiberFunction::zeros(grid);
    for sp in 0..grid.n_spatial() {
        for j in 0..nf {
            u0_fn.values[sp * nf + j] = u0[sp];
        }
    }
    let gen_u0 = generators(system, &u0_fn)?;
    let gperp_mean = gen_u.g_perp.fiber_mean();

    let mut max = 0.0f64;
    for iy in 0..grid.nx {
        for ix in 0..grid.nx {
            let sp = grid.spatial_index(ix, iy);
            if gen_u.one_sided[sp] || grid.point(ix, iy).norm() > interior_radius {
                continue;
            }
            for j in 0..nf {
                let idx = sp * nf + j;
                let lhs = h_gmu_u.values[idx] - gen_hu.g_mu.values[idx];
                let rhs = gen_u0.g_perp.values[idx] + gperp_mean[sp];
                max = max.max((lhs - rhs).abs());
            }
        }
    }
    Ok(max)
}

/// Kinetic solution `u = −∫₀^ℓ φ(ψ^t) dt` sampled on a sphere-bundle grid;
/// nodes outside the domain get zero. Solves `G_μ u = φ`, `u|∂₋SM = 0`.
pub fn kinetic_solution<F>(
    system: &MagneticSystem,
    grid: &Arc<SphereBundleGrid>,
    settings: &FlowSettings,
    quad_order: usize,
    phi: F,
) -> Result<FiberFunction>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let nf = grid.fiber_n;
    let mut nodes = Vec::new();
    let mut node_idx = Vec::new();
    for sp in 0..grid.n_spatial() {
        let p = grid.point(sp % grid.nx, sp / grid.nx);
        if system.domain.contains(p) {
            for j in 0..nf {
                nodes.push((p, grid.theta(j)));
                node_idx.push(sp * nf + j);
            }
        }
    }
    let vals = kinetic_values(system, &nodes, settings, quad_order, phi)?;
    let mut out = FiberFunction::zeros(grid);
    for (idx, v) in node_idx.into_iter().zip(vals) {
        out.values[idx] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
