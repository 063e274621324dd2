//! The magnetic ray transform `I` on tensor pairs, its measure-correct
//! adjoint `I*`, the normal operator `N = I*I` in its direct fiber × time
//! quadrature form, Santaló quadrature, volume recovery, and kinetic
//! solutions of `G_μ u = φ`.
//!
//! Conventions: pairs `f = [h, β]` carry covariant components; boundary fans
//! sample `∂₊SM` at stations uniform in Euclidean boundary angle with the
//! metric length weight, and at angles Gauss–Legendre in `u = sin θ`, which
//! is exactly the cosine-weighted rule for `dμ = ⟨ξ, ν⟩ dΣ`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::flow::{
    exit_time, integrate, FlowSettings, Horizon, PhasePoint, TimeDirection,
};
use crate::geometry::{
    CovectorField, MagneticSystem, ScalarField, SymMat2, SymTensorField, Vec2,
};
use crate::quad::{gauss_legendre, integrate_gl, DiskQuad};
use crate::{Result, PAIR_BETA_WEIGHT};

/// Symmetric 2-tensor plus 1-form pair `f = [h, β]`, the argument of the ray
/// transform. Components are covariant. A pair may be marked as supported in
/// the closed disk of a given radius, outside of which it evaluates to zero
/// (the extension convention used by the normal operator).
#[derive(Debug, Clone)]
pub struct TensorPair {
    h: SymTensorField,
    beta: CovectorField,
    support_radius: Option<f64>,
}

impl TensorPair {
    pub fn new(h: SymTensorField, beta: CovectorField) -> Self {
        TensorPair {
            h,
            beta,
            support_radius: None,
        }
    }

    pub fn zero() -> Self {
        TensorPair::new(SymTensorField::zero(), CovectorField::zero())
    }

    /// Mark the pair as extended by zero outside the disk of this radius.
    pub fn supported_in(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    fn masked(&self, p: Vec2) -> bool {
        match self.support_radius {
            Some(r) => p.norm() > r * (1.0 + 1e-12),
            None => false,
        }
    }

    pub fn h_at(&self, p: Vec2) -> SymMat2 {
        if self.masked(p) {
            SymMat2::ZERO
        } else {
            self.h.value(p)
        }
    }

    pub fn beta_at(&self, p: Vec2) -> Vec2 {
        if self.masked(p) {
            Vec2::ZERO
        } else {
            self.beta.value(p)
        }
    }

    /// The ray integrand `h_ij ξ^i ξ^j + β_i ξ^i`.
    pub fn integrand(&self, p: Vec2, xi: Vec2) -> f64 {
        if self.masked(p) {
            0.0
        } else {
            self.h.value(p).quad(xi) + self.beta.value(p).dot(xi)
        }
    }

    /// `|h(ξ,ξ)| + |β(ξ)|`, used for scale references.
    pub fn integrand_abs(&self, p: Vec2, xi: Vec2) -> f64 {
        if self.masked(p) {
            0.0
        } else {
            self.h.value(p).quad(xi).abs() + self.beta.value(p).dot(xi).abs()
        }
    }

    pub fn h_field(&self) -> &SymTensorField {
        &self.h
    }

    pub fn beta_field(&self) -> &CovectorField {
        &self.beta
    }
}

/// Pair `w = [v, φ]` of a 1-form and a function: the argument of the
/// potential operator `d` and the unknown of the Dirichlet solve.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub v: CovectorField,
    pub phi: ScalarField,
}

impl PotentialField {
    pub fn new(v: CovectorField, phi: ScalarField) -> Self {
        PotentialField { v, phi }
    }

    /// `⟨w, ξ⟩ = v_i ξ^i + φ`.
    pub fn pairing(&self, p: Vec2, xi: Vec2) -> f64 {
        self.v.value(p).dot(xi) + self.phi.value(p)
    }

    /// The potential pair `d w = [σ∇v, dφ − Y(v)]`, assembled pointwise with
    /// Christoffel corrections; satisfies `G_μ⟨w, ξ⟩ = ⟨dw, ξ⟩` on SM.
    pub fn differential(&self, system: &MagneticSystem) -> TensorPair {
        let sys_h = system.clone();
        let v_h = self.v.clone();
        let h = SymTensorField::custom(
            move |p| {
                let jac = v_h.jacobian(p);
                let gamma = sys_h.christoffel(p).expect("metric degenerate");
                let vv = v_h.value(p);
                // (σ∇v)_ij = ½(∂_i v_j + ∂_j v_i) − Γ^k_{ij} v_k
                SymMat2::new(
                    jac.a - gamma[0].xx * vv.x - gamma[1].xx * vv.y,
                    0.5 * (jac.b + jac.c) - gamma[0].xy * vv.x - gamma[1].xy * vv.y,
                    jac.d - gamma[0].yy * vv.x - gamma[1].yy * vv.y,
                )
            },
            |_| [SymMat2::ZERO, SymMat2::ZERO],
        );
        let sys_b = system.clone();
        let v_b = self.v.clone();
        let phi_b = self.phi.clone();
        let beta = CovectorField::custom(
            move |p| {
                // β = dφ − Y(v) on covectors
                phi_b.grad(p) - sys_b.lorentz_covector(p, v_b.value(p))
            },
            |_| crate::geometry::Mat2::default(),
        );
        TensorPair::new(h, beta)
    }
}

/// `L²`-pair inner product `∫ {⟨h_a, h_b⟩_g + ((n−1)/2)⟨β_a, β_b⟩_g} dVol`.
pub fn pair_inner(system: &MagneticSystem, a: &TensorPair, b: &TensorPair, quad: &DiskQuad) -> f64 {
    quad.points
        .iter()
        .zip(&quad.weights)
        .map(|(&p, &w)| {
            let gi = system.metric.inv_at(p).to_mat();
            let vol = system.metric.sqrt_det(p);
            let ha = gi.mul_mat(a.h_at(p).to_mat()).mul_mat(gi.mul_mat(b.h_at(p).to_mat()));
            let hh = ha.a + ha.d; // tr(g⁻¹ h_a g⁻¹ h_b)
            let bb = system.metric.co_inner(p, a.beta_at(p), b.beta_at(p));
            w * vol * (hh + PAIR_BETA_WEIGHT * bb)
        })
        .sum()
}

pub fn pair_norm(system: &MagneticSystem, f: &TensorPair, quad: &DiskQuad) -> f64 {
    pair_inner(system, f, f, quad).max(0.0).sqrt()
}

/// One boundary station of a fan.
#[derive(Debug, Clone, Copy)]
pub struct FanStation {
    /// Euclidean boundary arc-length coordinate.
    pub arc: f64,
    pub point: Vec2,
    /// Metric boundary length carried by this station (`dς_g` chunk).
    pub weight: f64,
}

/// One fan angle: `θ` from the inward normal, with its `u = sin θ` node.
#[derive(Debug, Clone, Copy)]
pub struct FanAngle {
    pub theta: f64,
    pub u: f64,
    /// Gauss–Legendre weight in u; `du = cos θ dθ` absorbs the μ-cosine.
    pub weight: f64,
}

/// Quadrature fan over `∂₊SM` for the measure `dμ = ⟨ξ, ν⟩ dΣ`.
#[derive(Debug, Clone)]
pub struct Fan {
    pub stations: Vec<FanStation>,
    pub angles: Vec<FanAngle>,
}

impl Fan {
    pub fn new(system: &MagneticSystem, n_stations: usize, n_angles: usize) -> Self {
        let l = system.domain.boundary_len();
        let ds = l / n_stations as f64;
        let stations = (0..n_stations)
            .map(|i| {
                let arc = ds * (i as f64 + 0.5);
                let point = system.domain.boundary_point_at_arc(arc);
                let tangent = system.domain.boundary_tangent(point);
                FanStation {
                    arc,
                    point,
                    weight: system.metric.norm(point, tangent) * ds,
                }
            })
            .collect();
        let (u, w) = gauss_legendre(n_angles);
        let angles = u
            .iter()
            .zip(&w)
            .map(|(&u, &w)| FanAngle {
                theta: u.asin(),
                u,
                weight: w,
            })
            .collect();
        Fan { stations, angles }
    }

    pub fn n_rays(&self) -> usize {
        self.stations.len() * self.angles.len()
    }

    /// Phase point of ray `(i, j)`.
    pub fn ray(&self, system: &MagneticSystem, i: usize, j: usize) -> PhasePoint {
        let st = &self.stations[i];
        PhasePoint {
            x: st.point,
            xi: system.boundary_dir(st.point, self.angles[j].theta),
        }
    }

    /// μ-weight of ray `(i, j)`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.stations[i].weight * self.angles[j].weight
    }

    /// `∫_{∂₊SM} dμ` of the fan (2 × metric boundary length for a disk).
    pub fn total_weight(&self) -> f64 {
        let sw: f64 = self.stations.iter().map(|s| s.weight).sum();
        let aw: f64 = self.angles.iter().map(|a| a.weight).sum();
        sw * aw
    }
}

/// Scalar data sampled on a fan over ∂₊SM.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub fan: Arc<Fan>,
    /// Station-major values: `values[i * n_angles + j]`.
    pub values: Vec<f64>,
}

impl BoundaryData {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.fan.angles.len() + j]
    }

    /// `⟨a, b⟩_μ` over the fan.
    pub fn mu_inner(&self, other: &BoundaryData) -> f64 {
        let na = self.fan.angles.len();
        let mut total = 0.0;
        for i in 0..self.fan.stations.len() {
            for j in 0..na {
                total += self.fan.weight(i, j) * self.values[i * na + j] * other.values[i * na + j];
            }
        }
        total
    }

    pub fn mu_norm_sq(&self) -> f64 {
        self.mu_inner(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Bilinear interpolation in (arc-length, u = sin θ) at a boundary state.
    /// Clamped at the grazing edges of the angle grid.
    pub fn interp(&self, system: &MagneticSystem, x: Vec2, xi: Vec2) -> f64 {
        let fan = &self.fan;
        let l = system.domain.boundary_len();
        let n_s = fan.stations.len();
        let n_a = fan.angles.len();
        let ds = l / n_s as f64;
        let arc = system.domain.boundary_arc(x);
        // stations sit at (i + 0.5) ds
        let pos = arc / ds - 0.5;
        let i0 = pos.floor();
        let fs = pos - i0;
        let i0 = i0.rem_euclid(n_s as f64) as usize % n_s;
        let i1 = (i0 + 1) % n_s;

        let u = system.boundary_angle_from_normal(x, xi).sin();
        let j1 = fan.angles.partition_point(|a| a.u < u);
        let (j0, j1, fu) = if j1 == 0 {
            (0, 0, 0.0)
        } else if j1 >= n_a {
            (n_a - 1, n_a - 1, 0.0)
        } else {
            let u0 = fan.angles[j1 - 1].u;
            let u1 = fan.angles[j1].u;
            (j1 - 1, j1, (u - u0) / (u1 - u0))
        };
        let at = |i: usize, j: usize| self.values[i * n_a + j];
        (1.0 - fs) * ((1.0 - fu) * at(i0, j0) + fu * at(i0, j1))
            + fs * ((1.0 - fu) * at(i1, j0) + fu * at(i1, j1))
    }

    /// CSV rows `arc,theta,weight,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arc,theta,weight,value\n");
        let na = self.fan.angles.len();
        for (i, st) in self.fan.stations.iter().enumerate() {
            for (j, an) in self.fan.angles.iter().enumerate() {
                out.push_str(&format!(
                    "{:.10},{:.10},{:.12e},{:.12e}\n",
                    st.arc,
                    an.theta,
                    self.fan.weight(i, j),
                    self.values[i * na + j]
                ));
            }
        }
        out
    }
}

/// Magnetic ray transform of a general phase-space integrand.
pub fn ray_transform_fn<F>(
    system: &MagneticSystem,
    fan: &Arc<Fan>,
    settings: &FlowSettings,
    quad_order: usize,
    phi: F,
) -> Result<BoundaryData>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let n_a = fan.angles.len();
    let values: Result<Vec<f64>> = (0..fan.n_rays())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n_a, k % n_a);
            let start = fan.ray(system, i, j);
            let geo = integrate(system, start, Horizon::UntilExit, settings)?;
            Ok(integrate_gl(quad_order, 0.0, geo.chord_time(), |t| {
                let s = geo.state(t);
                phi(s.x, s.xi)
            }))
        })
        .collect();
    Ok(BoundaryData {
        fan: fan.clone(),
        values: values?,
    })
}

/// Magnetic ray transform `I f` of a tensor pair over the fan.
pub fn ray_transform(
    system: &MagneticSystem,
    f: &TensorPair,
    fan: &Arc<Fan>,
    settings: &FlowSettings,
    quad_order: usize,
) -> Result<BoundaryData> {
    ray_transform_fn(system, fan, settings, quad_order, |x, xi| {
        f.integrand(x, xi)
    })
}

/// Transform of `|h(ξ,ξ)| + |β(ξ)|`: a natural per-ray scale reference.
pub fn ray_transform_abs(
    system: &MagneticSystem,
    f: &TensorPair,
    fan: &Arc<Fan>,
    settings: &FlowSettings,
    quad_order: usize,
) -> Result<BoundaryData> {
    ray_transform_fn(system, fan, settings, quad_order, |x, xi| {
        f.integrand_abs(x, xi)
    })
}

/// Memoized backward traces: for a set of base points and a uniform fiber,
/// the ∂₊SM entry state of the orbit through each `(x, ξ(θ))`. Shared by
/// every adjoint application on the same geometry.
pub struct BackTraceTable {
    pub points: Vec<Vec2>,
    pub fiber_n: usize,
    entries: Vec<PhasePoint>,
}

impl BackTraceTable {
    pub fn build(
        system: &MagneticSystem,
        points: &[Vec2],
        fiber_n: usize,
        settings: &FlowSettings,
    ) -> Result<Self> {
        let entries: Result<Vec<PhasePoint>> = points
            .par_iter()
            .flat_map(|&p| {
                (0..fiber_n).into_par_iter().map(move |j| (p, j))
            })
            .map(|(p, j)| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / fiber_n as f64;
                let xi = system.dir_from_frame_angle(p, theta);
                let rep = exit_time(
                    system,
                    PhasePoint { x: p, xi },
                    TimeDirection::Backward,
                    settings,
                )?;
                Ok(rep.exit)
            })
            .collect();
        Ok(BackTraceTable {
            points: points.to_vec(),
            fiber_n,
            entries: entries?,
        })
    }

    pub fn entry(&self, point_idx: usize, angle_idx: usize) -> PhasePoint {
        self.entries[point_idx * self.fiber_n + angle_idx]
    }
}

/// Adjoint `I*ψ` at the table's base points:
/// `[∫ ξ⊗ξ ψ♯ dσ, (2/(n−1)) ∫ ξ ψ♯ dσ]`, returned in covariant components.
pub fn adjoint_with_table<F>(
    system: &MagneticSystem,
    table: &BackTraceTable,
    psi: F,
) -> Vec<(SymMat2, Vec2)>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let dtheta = 2.0 * std::f64::consts::PI / table.fiber_n as f64;
    table
        .points
        .par_iter()
        .enumerate()
        .map(|(pi, &p)| {
            let mut acc_h = SymMat2::ZERO;
            let mut acc_b = Vec2::ZERO;
            for j in 0..table.fiber_n {
                let theta = dtheta * j as f64;
                let xi = system.dir_from_frame_angle(p, theta);
                let entry = table.entry(pi, j);
                let v = psi(entry.x, entry.xi) * dtheta;
                acc_h = acc_h.add(SymMat2::new(xi.x * xi.x, xi.x * xi.y, xi.y * xi.y).scale(v));
                acc_b += xi * v;
            }
            // lower indices: h_cov = G A G, β_cov = (2/(n−1)) G b
            let g = system.metric.at(p).to_mat();
            let hm = g.mul_mat(acc_h.to_mat()).mul_mat(g);
            (
                SymMat2::new(hm.a, 0.5 * (hm.b + hm.c), hm.d),
                g.mul_vec(acc_b) * (1.0 / PAIR_BETA_WEIGHT),
            )
        })
        .collect()
}

/// One-shot adjoint: build the trace table and apply.
pub fn adjoint<F>(
    system: &MagneticSystem,
    psi: F,
    points: &[Vec2],
    fiber_n: usize,
    settings: &FlowSettings,
) -> Result<Vec<(SymMat2, Vec2)>>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let table = BackTraceTable::build(system, points, fiber_n, settings)?;
    Ok(adjoint_with_table(system, &table, psi))
}

/// Options for the direct normal-operator quadrature.
#[derive(Debug, Clone, Copy)]
pub struct NormalOpts {
    /// `M₁` radius as a multiple of the domain radius.
    pub m1_factor: f64,
    pub fiber_n: usize,
    pub chord_quad: usize,
    pub settings: FlowSettings,
}

impl Default for NormalOpts {
    fn default() -> Self {
        NormalOpts {
            m1_factor: 1.1,
            fiber_n: 64,
            chord_quad: 32,
            settings: FlowSettings::default(),
        }
    }
}

/// Normal operator `N f` at the given points by the direct formula: per
/// fiber direction, the pair integrand of `f` (zero outside M) integrated
/// over the full `M₁` chord, weighted by `v ⊗ v` and `v`.
pub fn normal_op(
    system: &MagneticSystem,
    f: &TensorPair,
    points: &[Vec2],
    opts: &NormalOpts,
) -> Result<Vec<(SymMat2, Vec2)>> {
    let sys1 = system.extended(opts.m1_factor);
    let m_radius = system.domain.radius();
    let dtheta = 2.0 * std::f64::consts::PI / opts.fiber_n as f64;
    points
        .par_iter()
        .map(|&p| {
            let mut acc_h = SymMat2::ZERO;
            let mut acc_b = Vec2::ZERO;
            for j in 0..opts.fiber_n {
                let theta = dtheta * j as f64;
                let v = sys1.dir_from_frame_angle(p, theta);
                let geo = integrate(
                    &sys1,
                    PhasePoint { x: p, xi: v },
                    Horizon::UntilExit,
                    &opts.settings,
                )?;
                // locate the sub-chord inside M (at most one interval by
                // convexity), then Gauss–Legendre on it
                let chord = chord_integral_in_disk(
                    &geo,
                    m_radius,
                    opts.chord_quad,
                    |x, xi| f.integrand(x, xi),
                );
                let w = chord * dtheta;
                acc_h = acc_h.add(SymMat2::new(v.x * v.x, v.x * v.y, v.y * v.y).scale(w));
                acc_b += v * w;
            }
            let g = sys1.metric.at(p).to_mat();
            let hm = g.mul_mat(acc_h.to_mat()).mul_mat(g);
            Ok((
                SymMat2::new(hm.a, 0.5 * (hm.b + hm.c), hm.d),
                g.mul_vec(acc_b) * (1.0 / PAIR_BETA_WEIGHT),
            ))
        })
        .collect()
}

/// Integrate `f(γ(t), γ̇(t))` over the part of a chord inside the disk of
/// the given radius.
fn chord_integral_in_disk<F>(
    geo: &crate::flow::GeodesicSolution,
    radius: f64,
    quad: usize,
    f: F,
) -> f64
where
    F: Fn(Vec2, Vec2) -> f64,
{
    let rho = |t: f64| radius - geo.position(t).norm();
    let (t0, t1) = (geo.t_enter, geo.t_exit);
    if t1 <= t0 {
        return 0.0;
    }
    const SCAN: usize = 48;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev_t = t0;
    let mut prev_r = rho(t0);
    for k in 1..=SCAN {
        let t = t0 + (t1 - t0) * k as f64 / SCAN as f64;
        let r = rho(t);
        if (prev_r >= 0.0) != (r >= 0.0) {
            let (mut a, mut b) = (prev_t, t);
            let fa = prev_r;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (rho(m) >= 0.0) == (fa >= 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            crossings.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_r = r;
    }
    // assemble inside-intervals
    let mut bounds = vec![t0];
    bounds.extend(crossings);
    bounds.push(t1);
    let mut total = 0.0;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-14 {
            continue;
        }
        let mid = 0.5 * (a + b);
        if rho(mid) < 0.0 {
            continue;
        }
        total += integrate_gl(quad, a, b, |t| {
            let s = geo.state(t);
            f(s.x, s.xi)
        });
    }
    total
}

/// Both sides of Santaló's formula for an integrand on SM:
/// `∫_SM φ dΣ  =  ∫_{∂₊SM} dμ ∫₀^ℓ φ(ψ^t) dt`.
pub fn santalo_check<F>(
    system: &MagneticSystem,
    fan: &Arc<Fan>,
    disk: &DiskQuad,
    fiber_n: usize,
    settings: &FlowSettings,
    quad_order: usize,
    phi: F,
) -> Result<(f64, f64)>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    let dtheta = 2.0 * std::f64::consts::PI / fiber_n as f64;
    let lhs: f64 = disk
        .points
        .par_iter()
        .zip(&disk.weights)
        .map(|(&p, &w)| {
            let vol = system.metric.sqrt_det(p);
            let mut fiber = 0.0;
            for j in 0..fiber_n {
                let xi = system.dir_from_frame_angle(p, dtheta * j as f64);
                fiber += phi(p, xi) * dtheta;
            }
            w * vol * fiber
        })
        .sum();
    let data = ray_transform_fn(system, fan, settings, quad_order, &phi)?;
    let na = fan.angles.len();
    let rhs = (0..fan.stations.len())
        .map(|i| {
            (0..na)
                .map(|j| fan.weight(i, j) * data.values[i * na + j])
                .sum::<f64>()
        })
        .sum();
    Ok((lhs, rhs))
}

/// Volume of M from boundary measurements:
/// `Vol = (1/w_{n−1}) ∫_{∂₊SM} A(γ_{x,ξ}) dμ` with `w₁ = 2π`.
pub fn volume_from_boundary(
    system: &MagneticSystem,
    fan: &Arc<Fan>,
    settings: &FlowSettings,
    quad_order: usize,
) -> Result<f64> {
    let n_a = fan.angles.len();
    let per_ray: Result<Vec<f64>> = (0..fan.n_rays())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n_a, k % n_a);
            let start = fan.ray(system, i, j);
            let geo = integrate(system, start, Horizon::UntilExit, settings)?;
            let action = geo.chord_time()
                - integrate_gl(quad_order, 0.0, geo.chord_time(), |t| {
                    let s = geo.state(t);
                    system.alpha.pair(s.x, s.xi)
                });
            Ok(fan.weight(i, j) * action)
        })
        .collect();
    let total: f64 = per_ray?.iter().sum();
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Kinetic solution `u(x, ξ) = −∫₀^{ℓ(x,ξ)} φ(ψ^t) dt` at phase nodes given
/// as (base point, frame fiber angle).
pub fn kinetic_values<F>(
    system: &MagneticSystem,
    nodes: &[(Vec2, f64)],
    settings: &FlowSettings,
    quad_order: usize,
    phi: F,
) -> Result<Vec<f64>>
where
    F: Fn(Vec2, Vec2) -> f64 + Sync,
{
    nodes
        .par_iter()
        .map(|&(p, theta)| {
            let xi = system.dir_from_frame_angle(p, theta);
            let geo = integrate(system, PhasePoint { x: p, xi }, Horizon::UntilExit, settings)?;
            Ok(-integrate_gl(quad_order, 0.0, geo.chord_time(), |t| {
                let s = geo.state(t);
                phi(s.x, s.xi)
            }))
        })
        .collect()
}

/// Single kinetic value at `(x, ξ)`.
pub fn kinetic_value<F>(
    system: &MagneticSystem,
    x: Vec2,
    xi: Vec2,
    settings: &FlowSettings,
    quad_order: usize,
    phi: F,
) -> Result<f64>
where
    F: Fn(Vec2, Vec2) -> f64,
{
    let geo = integrate(
        system,
        PhasePoint::unit(system, x, xi),
        Horizon::UntilExit,
        settings,
    )?;
    Ok(-integrate_gl(quad_order, 0.0, geo.chord_time(), |t| {
        let s = geo.state(t);
        phi(s.x, s.xi)
    }))
}

#[cfg(test)]
pub(crate) mod test_fields {
    use super::*;
    use crate::geometry::Poly2;
    use rand::Rng;

    /// Random polynomial bump pair vanishing to third order on the unit circle.
    pub fn random_bump_pair(rng: &mut impl Rng, amp: f64) -> TensorPair {
        let mut coeff = || -> Poly2 {
            Poly2::new(vec![
                (0, 0, rng.gen_range(-amp..amp)),
                (1, 0, rng.gen_range(-amp..amp)),
                (0, 1, rng.gen_range(-amp..amp)),
                (1, 1, rng.gen_range(-amp..amp)),
            ])
        };
        let h = SymTensorField::from_components(
            ScalarField::poly_bump(coeff(), 3, 1.0),
            ScalarField::poly_bump(coeff(), 3, 1.0),
            ScalarField::poly_bump(coeff(), 3, 1.0),
        );
        let beta = CovectorField::from_components(
            ScalarField::poly_bump(coeff(), 3, 1.0),
            ScalarField::poly_bump(coeff(), 3, 1.0),
        );
        TensorPair::new(h, beta).supported_in(1.0)
    }

    /// Random potential field `[v, φ]` vanishing on the unit circle.
    pub fn random_potential(rng: &mut impl Rng, amp: f64) -> PotentialField {
        let mut coeff = || -> Poly2 {
            Poly2::new(vec![
                (0, 0, rng.gen_range(-amp..amp)),
                (1, 0, rng.gen_range(-amp..amp)),
                (0, 1, rng.gen_range(-amp..amp)),
            ])
        };
        PotentialField::new(
            CovectorField::from_components(
                ScalarField::poly_bump(coeff(), 2, 1.0),
                ScalarField::poly_bump(coeff(), 2, 1.0),
            ),
            ScalarField::poly_bump(coeff(), 2, 1.0),
        )
    }

    /// Smooth fan test function (trig polynomial in arc angle and θ).
    pub fn smooth_boundary_fn(
        system: &MagneticSystem,
        a: f64,
        b: f64,
        c: f64,
    ) -> impl Fn(Vec2, Vec2) -> f64 + Sync + '_ {
        move |x: Vec2, xi: Vec2| {
            let phi = system.domain.boundary_angle(x);
            let theta = system.boundary_angle_from_normal(x, xi);
            a + b * (phi.cos() + 0.3 * (2.0 * phi).sin()) * theta.cos()
                + c * theta.sin() * phi.sin()
        }
    }
}
