//! The scattering-extension operator `A`, the jump operator `B`, and the
//! numerical certification of the transport identities
//! `I G_μ u = −B u` and `B H A w = I[G_⊥(w♯)₀ + (G_⊥ w♯)₀]`.

use std::sync::Arc;

use rayon::prelude::*;

use super::fft::fft_inplace;
use super::{generators, FiberFunction, SphereBundleGrid};
use crate::boundary::scattering;
use crate::flow::{exit_time, FlowSettings, PhasePoint, TimeDirection};
use crate::geometry::{MagneticSystem, Vec2};
use crate::transform::{ray_transform_fn, BoundaryData, Fan};
use crate::Result;

/// Values on full fiber circles over boundary stations: the natural home of
/// `A w` and `H A w` (H mixes the inward and outward hemispheres).
#[derive(Debug, Clone)]
pub struct BoundaryFiberData {
    /// Station boundary-arc coordinates (uniform).
    pub arcs: Vec<f64>,
    pub fiber_n: usize,
    /// `values[i * fiber_n + j]`, fiber angle = frame angle.
    pub values: Vec<f64>,
}

impl BoundaryFiberData {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.fiber_n + j]
    }

    /// Fiberwise Hilbert transform at every station.
    pub fn hilbert(&self) -> BoundaryFiberData {
        let nf = self.fiber_n;
        let values: Vec<f64> = (0..self.arcs.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut re: Vec<f64> = self.values[i * nf..(i + 1) * nf].to_vec();
                let mut im = vec![0.0; nf];
                fft_inplace(&mut re, &mut im, false);
                for k in 0..nf {
                    let freq = if k == nf / 2 {
                        0
                    } else if k <= nf / 2 {
                        k as i64
                    } else {
                        k as i64 - nf as i64
                    };
                    let s = freq.signum() as f64;
                    let (a, b) = (re[k], im[k]);
                    re[k] = -b * s;
                    im[k] = a * s;
                }
                fft_inplace(&mut re, &mut im, true);
                re.into_iter()
            })
            .collect();
        BoundaryFiberData {
            arcs: self.arcs.clone(),
            fiber_n: nf,
            values,
        }
    }

    /// Periodic cubic interpolation in (arc, frame angle) at a boundary state.
    pub fn interp(&self, system: &MagneticSystem, x: Vec2, xi: Vec2) -> f64 {
        let l = system.domain.boundary_len();
        let ns = self.arcs.len();
        let nf = self.fiber_n;
        let ds = l / ns as f64;
        // stations at (i + 0.5) ds
        let spos = system.domain.boundary_arc(x) / ds - 0.5;
        let i0 = spos.floor();
        let fs = spos - i0;
        let i0 = i0.rem_euclid(ns as f64) as usize % ns;

        let theta = system.frame_angle(x, xi);
        let tau = 2.0 * std::f64::consts::PI;
        let tpos = theta.rem_euclid(tau) / tau * nf as f64;
        let j0 = tpos.floor() as usize % nf;
        let ft = tpos - tpos.floor();

        let catmull = |p: [f64; 4], t: f64| -> f64 {
            0.5 * ((2.0 * p[1])
                + (-p[0] + p[2]) * t
                + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
                + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * t * t * t)
        };
        let at = |di: i64, dj: i64| -> f64 {
            let i = ((i0 as i64 + di).rem_euclid(ns as i64)) as usize;
            let j = ((j0 as i64 + dj).rem_euclid(nf as i64)) as usize;
            self.values[i * nf + j]
        };
        let mut rows = [0.0; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            let di = r as i64 - 1;
            *row = catmull([at(di, -1), at(di, 0), at(di, 1), at(di, 2)], ft);
        }
        catmull(rows, fs)
    }
}

/// Extension operator `A`: `Aw = w` on `∂₊SM`, `w ∘ 𝒮⁻¹` on `∂₋SM`,
/// materialized on full fibers over uniform boundary stations. `𝒮⁻¹` is
/// computed by the backward flow.
pub fn extension_a<F>(
    system: &MagneticSystem,
    w: F,
    n_stations: usize,
    fiber_n: usize,
    settings: &FlowSettings,
) -> Result<BoundaryFiberData>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let l = system.domain.boundary_len();
    let arcs: Vec<f64> = (0..n_stations)
        .map(|i| (i as f64 + 0.5) * l / n_stations as f64)
        .collect();
    let values: Result<Vec<f64>> = (0..n_stations * fiber_n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / fiber_n, k % fiber_n);
            let x = system.domain.boundary_point_at_arc(arcs[i]);
            let theta = 2.0 * std::f64::consts::PI * j as f64 / fiber_n as f64;
            let xi = system.dir_from_frame_angle(x, theta);
            if system.inward_component(x, xi) >= 0.0 {
                Ok(w(x, xi))
            } else {
                let rep = exit_time(
                    system,
                    PhasePoint { x, xi },
                    TimeDirection::Backward,
                    settings,
                )?;
                Ok(w(rep.exit.x, rep.exit.xi))
            }
        })
        .collect();
    Ok(BoundaryFiberData {
        arcs,
        fiber_n,
        values: values?,
    })
}

/// Jump operator `B u (x, ξ) = u(x, ξ) − u(𝒮(x, ξ))` over a fan.
pub fn operator_b<F>(
    system: &MagneticSystem,
    u: F,
    fan: &Arc<Fan>,
    settings: &FlowSettings,
) -> Result<BoundaryData>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let na = fan.angles.len();
    let values: Result<Vec<f64>> = (0..fan.n_rays())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / na, k % na);
            let ray = fan.ray(system, i, j);
            let rec = scattering(system, ray.x, ray.xi, settings)?;
            Ok(u(ray.x, ray.xi) - u(rec.exit.x, rec.exit.xi))
        })
        .collect();
    Ok(BoundaryData {
        fan: fan.clone(),
        values: values?,
    })
}

/// Certification record for the fundamental identity `I G_μ u = −B u`.
#[derive(Debug, Clone)]
pub struct FundamentalReport {
    pub max_residual: f64,
    /// `max(‖I G_μ u‖_∞, ‖B u‖_∞)`.
    pub scale: f64,
}

/// Compare `I(G_μ u)` (grid generators + interpolation + chord quadrature)
/// against `−B u` (exact evaluation of u at the boundary states) for a
/// smooth u given as a closure.
pub fn fundamental_residual<F>(
    system: &MagneticSystem,
    u: F,
    grid: &Arc<SphereBundleGrid>,
    fan: &Arc<Fan>,
    settings: &FlowSettings,
    quad_order: usize,
) -> Result<FundamentalReport>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let sampled = FiberFunction::sample(system, grid, &u);
    let gen = generators(system, &sampled)?;
    let g_mu = &gen.g_mu;
    let i_gmu = ray_transform_fn(system, fan, settings, quad_order, |x, xi| {
        g_mu.interp(x, system.frame_angle(x, xi))
    })?;
    let bu = operator_b(system, &u, fan, settings)?;
    let mut max_residual = 0.0f64;
    for (a, b) in i_gmu.values.iter().zip(&bu.values) {
        max_residual = max_residual.max((a + b).abs());
    }
    Ok(FundamentalReport {
        max_residual,
        scale: i_gmu.max_abs().max(bu.max_abs()),
    })
}

/// Smooth flow-constant data: `W(x, ξ) = φ(entry₁(x, ξ))` where entry₁ is
/// the backward exit through the enlarged system and φ is smooth data on
/// `∂₊SM₁`. The restriction `w = W|∂₊SM` then lies in `C_α` by
/// construction, and `w♯ = W` exactly.
pub struct FlowConstantData {
    sys1: MagneticSystem,
    data: Box<dyn Fn(Vec2, Vec2) -> f64 + Sync + Send>,
    settings: FlowSettings,
}

impl FlowConstantData {
    /// Smooth trig-polynomial data on `∂₊SM₁` determined by coefficients.
    pub fn trig(system: &MagneticSystem, m1_factor: f64, coeffs: [f64; 4], settings: FlowSettings) -> Self {
        let sys1 = system.extended(m1_factor);
        let s1 = sys1.clone();
        let [a, b, c, d] = coeffs;
        FlowConstantData {
            sys1,
            data: Box::new(move |x: Vec2, xi: Vec2| {
                let phi = s1.domain.boundary_angle(x);
                let th = s1.boundary_angle_from_normal(x, xi);
                a + b * phi.cos() * th.cos()
                    + c * (2.0 * phi).sin() * th.sin()
                    + d * phi.sin() * (2.0 * th).sin()
            }),
            settings,
        }
    }

    /// Radius of the enlarged domain the data lives on.
    pub fn m1_radius(&self) -> f64 {
        self.sys1.domain.radius()
    }

    /// `W(x, ξ)` anywhere in `SM₁` (in particular on all of SM).
    pub fn value(&self, x: Vec2, xi: Vec2) -> Result<f64> {
        let rep = exit_time(
            &self.sys1,
            PhasePoint::unit(&self.sys1, x, xi),
            TimeDirection::Backward,
            &self.settings,
        )?;
        Ok((self.data)(rep.exit.x, rep.exit.xi))
    }
}

/// Resolutions for the main 2D identity check.
#[derive(Debug, Clone, Copy)]
pub struct MainIdentityOpts {
    pub n_stations: usize,
    pub fiber_n: usize,
    /// Cartesian resolution for the `I*₀/I*₁` fields.
    pub grid_n: usize,
    pub grid_fiber: usize,
    /// Eval-ray chord quadrature order.
    pub quad_order: usize,
    /// `|⟨ξ, ν⟩|` cutoff of evaluation rays.
    pub eval_cos_min: f64,
    pub settings: FlowSettings,
}

impl Default for MainIdentityOpts {
    fn default() -> Self {
        MainIdentityOpts {
            n_stations: 96,
            fiber_n: 256,
            grid_n: 72,
            grid_fiber: 64,
            quad_order: 48,
            eval_cos_min: 0.25,
            settings: FlowSettings::with_tol(1e-9),
        }
    }
}

/// Certification record for the main 2D identity.
#[derive(Debug, Clone)]
pub struct MainIdentityReport {
    /// Relative sup-norm gap between `B H A w` and the transform side.
    pub residual: f64,
    pub lhs_max: f64,
    pub rhs_max: f64,
    /// Set when both sides are below the noise floor.
    pub below_noise_floor: bool,
}

/// Both routes of the main identity for `w ∈ C_α` given as flow-constant
/// data: left `B H A w`, right `I[G_⊥(w♯)₀ + (G_⊥ w♯)₀]` assembled from
/// the adjoint components `F₀ = I*₀w`, `F₁ = I*₁w` via
/// `⟨ξ_⊥, ∇F₀⟩/2π + δ((F₁)_⊥)/2π`.
pub fn main_identity_residual(
    system: &MagneticSystem,
    w: &FlowConstantData,
    opts: &MainIdentityOpts,
) -> Result<MainIdentityReport> {
    let settings = opts.settings;
    // ---- left side: A w on full boundary fibers, H fiberwise, then B at
    // the inward fiber directions of each station.
    let aw = extension_a(
        system,
        |x, xi| w.value(x, xi).expect("trace failed"),
        opts.n_stations,
        opts.fiber_n,
        &settings,
    )?;
    let haw = aw.hilbert();

    struct EvalRay {
        x: Vec2,
        xi: Vec2,
        lhs: f64,
    }
    let rays: Result<Vec<EvalRay>> = (0..opts.n_stations)
        .into_par_iter()
        .flat_map_iter(|i| (0..opts.fiber_n).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let x = system.domain.boundary_point_at_arc(aw.arcs[i]);
            let theta = 2.0 * std::f64::consts::PI * j as f64 / opts.fiber_n as f64;
            let xi = system.dir_from_frame_angle(x, theta);
            if system.inward_component(x, xi) < opts.eval_cos_min {
                return None;
            }
            let value = (|| -> Result<f64> {
                let rec = scattering(system, x, xi, &settings)?;
                Ok(haw.value(i, j) - haw.interp(system, rec.exit.x, rec.exit.xi))
            })();
            Some(value.map(|lhs| EvalRay { x, xi, lhs }))
        })
        .collect();
    let rays = rays?;

    // ---- right side: adjoint component fields on a Cartesian grid.
    // Fields are computable on SM₁ only; the grid square pokes outside, so
    // nodes beyond a validity radius are masked and the resolution must be
    // fine enough that no masked node is touched by a chord query.
    let r = system.domain.radius();
    let extent = r * 1.06;
    let n = opts.grid_n;
    let h = 2.0 * extent / (n as f64 - 1.0);
    let r_valid = (w.m1_radius() * 0.995).min(extent * std::f64::consts::SQRT_2);
    if r_valid - h < r + 1.5 * h {
        return Err(crate::Error::Resolution(format!(
            "main identity grid too coarse: h = {h:.4} leaves no M₁ margin"
        )));
    }
    let point = |ix: usize, iy: usize| -> Vec2 {
        Vec2::new(-extent + h * ix as f64, -extent + h * iy as f64)
    };
    let dtheta = 2.0 * std::f64::consts::PI / opts.grid_fiber as f64;
    let fields: Result<Vec<(f64, Vec2)>> = (0..n * n)
        .into_par_iter()
        .map(|sp| {
            let p = point(sp % n, sp / n);
            if p.norm() > r_valid {
                return Ok((0.0, Vec2::ZERO));
            }
            let mut f0 = 0.0;
            let mut f1 = Vec2::ZERO;
            for j in 0..opts.grid_fiber {
                let xi = system.dir_from_frame_angle(p, dtheta * j as f64);
                let v = w.value(p, xi)? * dtheta;
                f0 += v;
                f1 += xi * v;
            }
            Ok((f0, f1))
        })
        .collect();
    let fields = fields?;

    // grad F₀ (coordinate covector) and δ((F₁)_⊥) by centered differences
    let f0 = |ix: usize, iy: usize| fields[iy * n + ix].0;
    let f1_perp_weighted = |ix: usize, iy: usize| -> Vec2 {
        // √det g · (F₁)_⊥ (vector): divergence needs the density factor
        let p = point(ix, iy);
        let v = fields[iy * n + ix].1;
        system.perp(p, v) * system.metric.sqrt_det(p)
    };
    let mut grad_f0 = vec![Vec2::ZERO; n * n];
    let mut div_perp = vec![0.0f64; n * n];
    for iy in 1..n - 1 {
        for ix in 1..n - 1 {
            if point(ix, iy).norm() > r_valid - h {
                continue;
            }
            let g = Vec2::new(
                (f0(ix + 1, iy) - f0(ix - 1, iy)) / (2.0 * h),
                (f0(ix, iy + 1) - f0(ix, iy - 1)) / (2.0 * h),
            );
            grad_f0[iy * n + ix] = g;
            let dvx = (f1_perp_weighted(ix + 1, iy).x - f1_perp_weighted(ix - 1, iy).x)
                / (2.0 * h);
            let dvy = (f1_perp_weighted(ix, iy + 1).y - f1_perp_weighted(ix, iy - 1).y)
                / (2.0 * h);
            let p = point(ix, iy);
            div_perp[iy * n + ix] = (dvx + dvy) / system.metric.sqrt_det(p);
        }
    }
    let bilinear = |data: &dyn Fn(usize, usize) -> f64, p: Vec2| -> f64 {
        let fx = ((p.x + extent) / h).clamp(1.0, n as f64 - 2.0 - 1e-9);
        let fy = ((p.y + extent) / h).clamp(1.0, n as f64 - 2.0 - 1e-9);
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        let (sx, sy) = (fx - ix as f64, fy - iy as f64);
        (1.0 - sx) * ((1.0 - sy) * data(ix, iy) + sy * data(ix, iy + 1))
            + sx * ((1.0 - sy) * data(ix + 1, iy) + sy * data(ix + 1, iy + 1))
    };

    let integrand = |x: Vec2, xi: Vec2| -> f64 {
        let g = Vec2::new(
            bilinear(&|ix, iy| grad_f0[iy * n + ix].x, x),
            bilinear(&|ix, iy| grad_f0[iy * n + ix].y, x),
        );
        let xi_perp = system.perp(x, xi);
        let dv = bilinear(&|ix, iy| div_perp[iy * n + ix], x);
        (g.dot(xi_perp) + dv) / (2.0 * std::f64::consts::PI)
    };

    // ray transform of the integrand along each evaluation ray
    let per_ray: Result<Vec<f64>> = rays
        .par_iter()
        .map(|ray| {
            let geo = crate::flow::integrate(
                system,
                PhasePoint { x: ray.x, xi: ray.xi },
                crate::flow::Horizon::UntilExit,
                &settings,
            )?;
            Ok(crate::quad::integrate_gl(
                opts.quad_order,
                0.0,
                geo.chord_time(),
                |t| {
                    let s = geo.state(t);
                    integrand(s.x, s.xi)
                },
            ))
        })
        .collect();
    let per_ray = per_ray?;

    let mut lhs_max = 0.0f64;
    let mut rhs_max = 0.0f64;
    let mut gap = 0.0f64;
    for (ray, rhs) in rays.iter().zip(&per_ray) {
        lhs_max = lhs_max.max(ray.lhs.abs());
        rhs_max = rhs_max.max(rhs.abs());
        gap = gap.max((ray.lhs - rhs).abs());
    }
    let scale = lhs_max.max(rhs_max);
    let noise_floor = 1e-10;
    Ok(MainIdentityReport {
        residual: if scale > noise_floor { gap / scale } else { 0.0 },
        lhs_max,
        rhs_max,
        below_noise_floor: scale <= noise_floor,
    })
}
