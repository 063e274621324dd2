//! Boundary measurements of a magnetic system: the scattering relation, the
//! Mañé action potential between boundary points (by shooting), its
//! derivative identities, gauge transformations, and reversibility probes.

use crate::flow::{
    exit_time, integrate, ExitReport, FlowSettings, GeodesicSolution, Horizon, PhasePoint,
    TimeDirection,
};
use crate::geometry::{
    CovectorField, MagneticSystem, Mat2, MetricField, OneFormField, ScalarField, SymTensorField,
    Vec2,
};
use crate::quad::{gl_on, integrate_gl};
use crate::{Error, Result};

/// One scattering event `(x, ξ) ∈ ∂₊SM ↦ (y, η) ∈ ∂₋SM`.
#[derive(Debug, Clone)]
pub struct ScatteringRecord {
    pub entry: PhasePoint,
    pub exit: PhasePoint,
    pub chord_time: f64,
    pub grazing: bool,
}

/// Scattering relation `𝒮(x, ξ)`; the restricted relation `𝔰` is the exit
/// position [`ScatteringRecord::exit`]`.x`.
pub fn scattering(
    system: &MagneticSystem,
    x: Vec2,
    xi: Vec2,
    settings: &FlowSettings,
) -> Result<ScatteringRecord> {
    let start = PhasePoint::unit(system, x, xi);
    let rep: ExitReport = exit_time(system, start, TimeDirection::Forward, settings)?;
    Ok(ScatteringRecord {
        entry: start,
        exit: rep.exit,
        chord_time: rep.time,
        grazing: rep.grazing,
    })
}

/// Shooting controls for the action potential.
#[derive(Debug, Clone, Copy)]
pub struct ShootingSettings {
    /// Fan restricted to `(−π/2 + margin, π/2 − margin)` from the normal.
    pub theta_margin: f64,
    /// Boundary arc-length hit tolerance.
    pub hit_tol: f64,
    /// Coarse bracketing samples.
    pub coarse: usize,
    pub max_iter: usize,
    /// Chord quadrature order for `∫_γ α`.
    pub quad_order: usize,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        ShootingSettings {
            theta_margin: 0.02,
            hit_tol: 1e-9,
            coarse: 24,
            max_iter: 120,
            quad_order: 48,
        }
    }
}

/// Mañé action potential value with its connecting geodesic.
#[derive(Debug)]
pub struct ActionValue {
    /// `A = T − ∫_γ α`.
    pub action: f64,
    /// Geodesic time `T` (unit speed, so also g-length).
    pub time: f64,
    pub alpha_integral: f64,
    pub geodesic: GeodesicSolution,
    /// Arc-length (boundary) or position (interior) miss at the target.
    pub shooting_residual: f64,
}

impl ActionValue {
    /// Re-quadrature consistency gap `|T − ∫α − A|` at a different order.
    pub fn requadrature_gap(&self, system: &MagneticSystem, order: usize) -> f64 {
        let ia = alpha_integral(system, &self.geodesic, order);
        (self.time - ia - self.action).abs()
    }
}

/// `∫_γ α` along the forward chord of a geodesic.
pub fn alpha_integral(system: &MagneticSystem, geo: &GeodesicSolution, order: usize) -> f64 {
    integrate_gl(order, 0.0, geo.chord_time(), |t| {
        let s = geo.state(t);
        system.alpha.pair(s.x, s.xi)
    })
}

/// Pair integrand `h(γ̇, γ̇) + β(γ̇)` integrated along the forward chord.
pub fn pair_integral(
    system: &MagneticSystem,
    geo: &GeodesicSolution,
    h: &SymTensorField,
    beta: &CovectorField,
    order: usize,
) -> f64 {
    let _ = system;
    integrate_gl(order, 0.0, geo.chord_time(), |t| {
        let s = geo.state(t);
        h.value(s.x).quad(s.xi) + beta.value(s.x).dot(s.xi)
    })
}

/// Exit arc-length coordinate relative to the source point, in `(0, L)`.
fn relative_exit_arc(
    system: &MagneticSystem,
    x: Vec2,
    theta: f64,
    settings: &FlowSettings,
) -> Result<f64> {
    let xi = system.boundary_dir(x, theta);
    let rep = exit_time(system, PhasePoint { x, xi }, TimeDirection::Forward, settings)?;
    let l = system.domain.boundary_len();
    let rel =
        (system.domain.boundary_arc(rep.exit.x) - system.domain.boundary_arc(x)).rem_euclid(l);
    Ok(rel)
}

/// Mañé action potential `A(x, y)` between distinct boundary points, found
/// by bisection-safeguarded shooting on the initial fan angle.
pub fn boundary_action(
    system: &MagneticSystem,
    x: Vec2,
    y: Vec2,
    flow: &FlowSettings,
    shoot: &ShootingSettings,
) -> Result<ActionValue> {
    let l = system.domain.boundary_len();
    let target = (system.domain.boundary_arc(y) - system.domain.boundary_arc(x)).rem_euclid(l);
    if target == 0.0 {
        return Err(Error::ShootingFailed {
            context: "coincident boundary points".into(),
            residual: 0.0,
        });
    }
    let lo = -std::f64::consts::FRAC_PI_2 + shoot.theta_margin;
    let hi = std::f64::consts::FRAC_PI_2 - shoot.theta_margin;
    let f = |theta: f64| -> Result<f64> { Ok(relative_exit_arc(system, x, theta, flow)? - target) };

    // coarse scan for a sign-change bracket (the exit arc is monotone in θ
    // for simple systems)
    let n = shoot.coarse.max(4);
    let mut bracket: Option<(f64, f64, f64, f64)> = None;
    let mut best = f64::INFINITY;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let theta = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(theta)?;
        best = best.min(v.abs());
        if let Some((tp, vp)) = prev {
            if vp == 0.0 || vp.signum() != v.signum() {
                bracket = Some((tp, theta, vp, v));
                break;
            }
        }
        prev = Some((theta, v));
    }
    let (mut a, mut b, mut fa, mut fb) = bracket.ok_or(Error::ShootingFailed {
        context: format!("no bracket for arc target {target:.6}"),
        residual: best,
    })?;

    // bisection to a narrow interval, then secant polish
    for _ in 0..30 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            a = m;
            b = m;
            fa = fm;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
        if fa.abs() < shoot.hit_tol {
            b = a;
            break;
        }
        if fb.abs() < shoot.hit_tol {
            a = b;
            fa = fb;
            break;
        }
    }
    let mut t0 = a;
    let mut f0 = fa;
    let mut t1 = if b != a { b } else { a + 1e-9 };
    let mut f1 = if b != a { fb } else { f(t1)? };
    let mut theta_star = t0;
    let mut res_star = f0.abs();
    if f1.abs() < res_star {
        res_star = f1.abs();
        theta_star = t1;
    }
    for _ in 0..shoot.max_iter {
        if res_star < shoot.hit_tol {
            break;
        }
        if (f1 - f0).abs() < 1e-300 {
            break;
        }
        let t2 = (t1 - f1 * (t1 - t0) / (f1 - f0)).clamp(lo, hi);
        let f2 = f(t2)?;
        t0 = t1;
        f0 = f1;
        t1 = t2;
        f1 = f2;
        if f2.abs() < res_star {
            res_star = f2.abs();
            theta_star = t2;
        }
    }
    if res_star > shoot.hit_tol.max(1e-7) {
        return Err(Error::ShootingFailed {
            context: format!("secant stalled at θ = {theta_star:.8}"),
            residual: res_star,
        });
    }

    let xi = system.boundary_dir(x, theta_star);
    let geo = integrate(system, PhasePoint { x, xi }, Horizon::UntilExit, flow)?;
    let time = geo.chord_time();
    let ia = alpha_integral(system, &geo, shoot.quad_order);
    Ok(ActionValue {
        action: time - ia,
        time,
        alpha_integral: ia,
        geodesic: geo,
        shooting_residual: res_star,
    })
}

/// Action between interior points by Gauss–Newton on `(t, θ) ↦ exp_x(t, ξ(θ))`.
pub fn interior_action(
    system: &MagneticSystem,
    x: Vec2,
    y: Vec2,
    flow: &FlowSettings,
) -> Result<ActionValue> {
    let shoot = |theta: f64, t: f64| -> Result<Vec2> {
        let xi = system.dir_from_frame_angle(x, theta);
        let geo = integrate(system, PhasePoint { x, xi }, Horizon::Fixed(t), flow)?;
        Ok(geo.position(t))
    };
    let mut theta = system.frame_angle(x, y - x);
    let mut t = system.metric.norm(x, y - x).max(1e-3);
    let mut residual = f64::INFINITY;
    for _ in 0..60 {
        let r = shoot(theta, t)? - y;
        residual = r.norm();
        if residual < 1e-11 {
            break;
        }
        let h = 1e-7;
        let d_theta = (shoot(theta + h, t)? - shoot(theta - h, t)?) / (2.0 * h);
        let d_t = (shoot(theta, t + h)? - shoot(theta, t - h)?) / (2.0 * h);
        let jac = Mat2::new(d_theta.x, d_t.x, d_theta.y, d_t.y);
        if jac.det().abs() < 1e-14 {
            break;
        }
        let step = jac.inverse().mul_vec(r);
        theta -= step.x.clamp(-0.5, 0.5);
        t -= step.y.clamp(-0.5, 0.5);
        if t < 1e-6 {
            t = 1e-6;
        }
    }
    if residual > 1e-9 {
        return Err(Error::ShootingFailed {
            context: "interior Gauss-Newton stalled".into(),
            residual,
        });
    }
    let xi = system.dir_from_frame_angle(x, theta);
    let geo = integrate(system, PhasePoint { x, xi }, Horizon::Fixed(t), flow)?;
    let ia = integrate_gl(48, 0.0, t, |s| {
        let st = geo.state(s);
        system.alpha.pair(st.x, st.xi)
    });
    Ok(ActionValue {
        action: t - ia,
        time: t,
        alpha_integral: ia,
        geodesic: geo,
        shooting_residual: residual,
    })
}

/// Boundary derivative of the action and its finite-difference cross-check.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryDerivative {
    /// `−⟨γ̇_{x,y}(0), ξ⟩ + α(ξ)`.
    pub formula: f64,
    /// Centered difference of `A(·, y)` along the boundary through x.
    pub finite_difference: f64,
}

/// Derivative of `A(x, y)` in the boundary direction ξ at x, where ξ is the
/// velocity of the Euclidean arc-length parameterization scaled by `scale`
/// (`scale = 0` returns zero by linearity).
pub fn action_boundary_derivative(
    system: &MagneticSystem,
    x: Vec2,
    y: Vec2,
    scale: f64,
    flow: &FlowSettings,
    shoot: &ShootingSettings,
) -> Result<BoundaryDerivative> {
    let xi = system.domain.boundary_tangent(x) * scale;
    let a0 = boundary_action(system, x, y, flow, shoot)?;
    let gamma_dot = a0.geodesic.state(0.0).xi;
    let formula = -system.metric.inner(x, gamma_dot, xi) + system.alpha.pair(x, xi);

    let h = 1e-4;
    let s = system.domain.boundary_arc(x);
    let xp = system.domain.boundary_point_at_arc(s + h);
    let xm = system.domain.boundary_point_at_arc(s - h);
    let ap = boundary_action(system, xp, y, flow, shoot)?.action;
    let am = boundary_action(system, xm, y, flow, shoot)?.action;
    let fd = scale * (ap - am) / (2.0 * h);
    Ok(BoundaryDerivative {
        formula,
        finite_difference: fd,
    })
}

/// Radial boundary-fixing diffeomorphism `r ↦ r + ε r (1 − r)²` of the unit
/// disk (extends smoothly past r = 1).
#[derive(Debug, Clone, Copy)]
pub struct RadialDiffeo {
    pub eps: f64,
}

impl RadialDiffeo {
    pub fn new(eps: f64) -> Self {
        RadialDiffeo { eps }
    }

    pub fn value(&self, p: Vec2) -> Vec2 {
        let r = p.norm();
        p * (1.0 + self.eps * (1.0 - r) * (1.0 - r))
    }

    pub fn jacobian(&self, p: Vec2) -> Mat2 {
        let r = p.norm();
        let scale = 1.0 + self.eps * (1.0 - r) * (1.0 - r);
        if r < 1e-12 {
            return Mat2::new(scale, 0.0, 0.0, scale);
        }
        // d(scale)/dr = −2ε(1−r); df = scale·I + (dscale/dr) x xᵀ/r
        let c = -2.0 * self.eps * (1.0 - r) / r;
        Mat2::new(
            scale + c * p.x * p.x,
            c * p.x * p.y,
            c * p.x * p.y,
            scale + c * p.y * p.y,
        )
    }

    /// Minimum jacobian determinant over radial samples, with its argmin.
    pub fn min_jacobian_det(&self, radius: f64) -> (f64, Vec2) {
        let mut min = f64::INFINITY;
        let mut arg = Vec2::ZERO;
        for i in 0..200 {
            let r = radius * (i as f64 + 0.5) / 200.0;
            let p = Vec2::new(r, 0.0);
            let d = self.jacobian(p).det();
            if d < min {
                min = d;
                arg = p;
            }
        }
        (min, arg)
    }
}

/// Gauge transform `(g, α) ↦ (f*g, f*α + dφ)` for a boundary-fixing radial
/// diffeomorphism and a function φ vanishing on ∂M. Pullback values are
/// closed-form; their derivative evaluators use central differences.
pub fn gauge_transform(
    system: &MagneticSystem,
    f: &RadialDiffeo,
    phi: &ScalarField,
) -> Result<MagneticSystem> {
    let (min_det, arg) = f.min_jacobian_det(system.domain.radius());
    if min_det <= 0.0 {
        return Err(Error::InvalidDiffeo {
            x: arg.x,
            y: arg.y,
            det: min_det,
        });
    }
    let metric = system.metric.clone();
    let fm = *f;
    let pulled_metric = MetricField::custom_fd(
        move |p| {
            let fp = fm.value(p);
            let df = fm.jacobian(p);
            let g = metric.at(fp);
            // (f*g)_ij = (df)^a_i g_ab (df)^b_j
            let gt = df.transpose().mul_mat(g.to_mat()).mul_mat(df);
            crate::geometry::SymMat2::new(gt.a, 0.5 * (gt.b + gt.c), gt.d)
        },
        1e-5,
    );
    let alpha = system.alpha.clone();
    let fa = *f;
    let pulled_alpha = CovectorField::custom_fd(
        move |p| {
            let fp = fa.value(p);
            let df = fa.jacobian(p);
            df.transpose().mul_vec(alpha.at(fp))
        },
        1e-5,
    );
    let alpha_total = OneFormField::sum(
        &OneFormField::custom(pulled_alpha),
        &OneFormField::exact(phi),
    );
    Ok(MagneticSystem::new(
        pulled_metric,
        alpha_total,
        system.domain,
    ))
}

/// Phase-space gap between `𝒮(−𝒮(x, ξ))` and `(x, −ξ)`: boundary arc gap
/// plus fan-angle gap, equal weights.
pub fn reversibility_defect(
    system: &MagneticSystem,
    x: Vec2,
    xi: Vec2,
    settings: &FlowSettings,
) -> Result<f64> {
    let first = scattering(system, x, xi, settings)?;
    let second = scattering(system, first.exit.x, -first.exit.xi, settings)?;
    let z = second.exit;
    let arc_gap = system
        .domain
        .wrap_arc(system.domain.boundary_arc(z.x) - system.domain.boundary_arc(x))
        .abs();
    let a1 = system.boundary_angle_from_normal(z.x, z.xi);
    let a2 = system.boundary_angle_from_normal(x, -xi);
    let mut da = (a1 - a2) % (2.0 * std::f64::consts::PI);
    if da > std::f64::consts::PI {
        da -= 2.0 * std::f64::consts::PI;
    } else if da < -std::f64::consts::PI {
        da += 2.0 * std::f64::consts::PI;
    }
    Ok(arc_gap + da.abs())
}

/// Max reversibility defect over a stations × angles fan over ∂₊SM.
pub fn reversibility_residual(
    system: &MagneticSystem,
    stations: usize,
    angles: usize,
    settings: &FlowSettings,
) -> Result<f64> {
    let mut max = 0.0f64;
    for i in 0..stations {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / stations as f64;
        let x = system.domain.boundary_point(phi);
        for k in 0..angles {
            let theta = -1.35 + 2.7 * (k as f64 + 0.5) / angles as f64;
            let xi = system.boundary_dir(x, theta);
            max = max.max(reversibility_defect(system, x, xi, settings)?);
        }
    }
    Ok(max)
}

/// Report of the linearization identity for a family `(g + s h, α + s β)`.
#[derive(Debug, Clone)]
pub struct LinearizationReport {
    /// Richardson-extrapolated centered difference `dA/ds|₀`.
    pub fd_derivative: f64,
    /// `½∫⟨h, γ̇²⟩ − ∫β` along the unperturbed geodesic.
    pub formula: f64,
    /// `(scale, second difference)` per sweep entry.
    pub second_differences: Vec<(f64, f64)>,
    /// Fitted constant of the quadratic bound `|d²A/ds²| ≤ C‖(h,β)‖²_{C¹}`.
    pub fitted_c: f64,
}

/// First-derivative identity `dA/ds = ½∫⟨h,γ̇²⟩ − ∫β` plus a quadratic
/// bound probe for the second difference.
#[allow(clippy::too_many_arguments)]
pub fn linearization_check(
    system: &MagneticSystem,
    h: &SymTensorField,
    beta: &CovectorField,
    x: Vec2,
    y: Vec2,
    s_steps: &[f64],
    sweep: &[f64],
    flow: &FlowSettings,
    shoot: &ShootingSettings,
) -> Result<LinearizationReport> {
    let action_at = |s: f64, scale: f64| -> Result<f64> {
        let hs = h.scaled(scale);
        let bs = beta.scaled(scale);
        let sys = MagneticSystem::new(
            system.metric.perturbed(&hs, s),
            system.alpha.perturbed(&bs, s),
            system.domain,
        );
        Ok(boundary_action(&sys, x, y, flow, shoot)?.action)
    };

    let mut steps = s_steps.to_vec();
    steps.sort_by(f64::total_cmp);
    let h1 = steps[steps.len() - 1];
    let h2 = steps[0];
    let d = |step: f64| -> Result<f64> {
        Ok((action_at(step, 1.0)? - action_at(-step, 1.0)?) / (2.0 * step))
    };
    let d1 = d(h1)?;
    let d2 = d(h2)?;
    // centered differences carry O(s²) error
    let ratio = (h1 / h2).powi(2);
    let fd_derivative = (ratio * d2 - d1) / (ratio - 1.0);

    let base = boundary_action(system, x, y, flow, shoot)?;
    let formula = integrate_gl(shoot.quad_order, 0.0, base.time, |t| {
        let s = base.geodesic.state(t);
        0.5 * h.value(s.x).quad(s.xi) - beta.value(s.x).dot(s.xi)
    });

    let s0 = h1;
    let a0 = base.action;
    let mut second_differences = Vec::new();
    let mut fitted_c = 0.0f64;
    let norms = c1_norm_squared(system, h, beta);
    for &c in sweep {
        let d2a = (action_at(s0, c)? - 2.0 * a0 + action_at(-s0, c)?) / (s0 * s0);
        second_differences.push((c, d2a));
        let denom = c * c * norms;
        if denom > 0.0 {
            fitted_c = fitted_c.max(d2a.abs() / denom);
        }
    }

    Ok(LinearizationReport {
        fd_derivative,
        formula,
        second_differences,
        fitted_c,
    })
}

/// `‖h‖²_{C¹} + ‖β‖²_{C¹}` by sup-norm sampling over the disk.
pub fn c1_norm_squared(
    system: &MagneticSystem,
    h: &SymTensorField,
    beta: &CovectorField,
) -> f64 {
    let mut hn = 0.0f64;
    let mut bn = 0.0f64;
    let r = system.domain.radius();
    for i in 0..24 {
        for j in 0..24 {
            let p = Vec2::new(
                r * (-1.0 + 2.0 * (i as f64 + 0.5) / 24.0),
                r * (-1.0 + 2.0 * (j as f64 + 0.5) / 24.0),
            );
            if p.norm() > r {
                continue;
            }
            let hv = h.value(p);
            let hd = h.deriv(p);
            for k in 0..3 {
                hn = hn.max(hv.comp(k).abs());
                hn = hn.max(hd[0].comp(k).abs());
                hn = hn.max(hd[1].comp(k).abs());
            }
            let bv = beta.value(p);
            let bj = beta.jacobian(p);
            for v in [bv.x, bv.y, bj.a, bj.b, bj.c, bj.d] {
                bn = bn.max(v.abs());
            }
        }
    }
    hn * hn + bn * bn
}

/// Broken-line direct minimization of the time-free action (oracle for
/// [`boundary_action`]): over paths from x to y with `n` free nodes, the
/// parameterization-minimal action of a path is `len_g − ∫ α`, minimized
/// here by Barzilai–Borwein descent from straight and bent seeds.
pub fn action_minimization_oracle(
    system: &MagneticSystem,
    x: Vec2,
    y: Vec2,
    n_nodes: usize,
    iters: usize,
) -> f64 {
    let seg_quad = 6;
    let seg_energy = |p0: Vec2, p1: Vec2| -> f64 {
        let d = p1 - p0;
        gl_on(seg_quad, 0.0, 1.0)
            .into_iter()
            .map(|(s, w)| {
                let z = p0 + d * s;
                w * (system.metric.norm(z, d) - system.alpha.pair(z, d))
            })
            .sum()
    };
    let energy = |nodes: &[Vec2]| -> f64 {
        let mut total = 0.0;
        let mut prev = x;
        for k in 0..=nodes.len() {
            let next = if k == nodes.len() { y } else { nodes[k] };
            total += seg_energy(prev, next);
            prev = next;
        }
        total
    };
    let grad = |nodes: &[Vec2], g: &mut [Vec2]| {
        let h = 1e-7;
        let local = |nodes: &[Vec2], k: usize, q: Vec2| -> f64 {
            let a = if k == 0 { x } else { nodes[k - 1] };
            let c = if k + 1 == nodes.len() { y } else { nodes[k + 1] };
            seg_energy(a, q) + seg_energy(q, c)
        };
        for k in 0..nodes.len() {
            let q = nodes[k];
            let fx1 = local(nodes, k, q + Vec2::new(h, 0.0));
            let fx0 = local(nodes, k, q - Vec2::new(h, 0.0));
            let fy1 = local(nodes, k, q + Vec2::new(0.0, h));
            let fy0 = local(nodes, k, q - Vec2::new(0.0, h));
            g[k] = Vec2::new((fx1 - fx0) / (2.0 * h), (fy1 - fy0) / (2.0 * h));
        }
    };

    let mut best = f64::INFINITY;
    for bend in [0.0, 0.35, -0.35] {
        let chord = y - x;
        let normal = chord.rot90().normalized();
        let mut nodes: Vec<Vec2> = (1..=n_nodes)
            .map(|k| {
                let t = k as f64 / (n_nodes + 1) as f64;
                x + chord * t + normal * (bend * chord.norm() * t * (1.0 - t))
            })
            .collect();
        let mut g = vec![Vec2::ZERO; n_nodes];
        let mut g_prev = vec![Vec2::ZERO; n_nodes];
        let mut nodes_prev = nodes.clone();
        grad(&nodes, &mut g);
        let mut step = 1e-2;
        let mut f_cur = energy(&nodes);
        for it in 0..iters {
            if it > 0 {
                let mut sy = 0.0;
                let mut yy = 0.0;
                for k in 0..n_nodes {
                    let sv = nodes[k] - nodes_prev[k];
                    let yv = g[k] - g_prev[k];
                    sy += sv.dot(yv);
                    yy += yv.dot(yv);
                }
                if yy > 1e-300 && sy > 0.0 {
                    step = (sy / yy).clamp(1e-6, 0.5);
                }
            }
            nodes_prev.clone_from(&nodes);
            g_prev.clone_from(&g);
            let mut trial: Vec<Vec2> = nodes
                .iter()
                .zip(g.iter())
                .map(|(&n, &gv)| n - gv * step)
                .collect();
            let mut f_trial = energy(&trial);
            let mut backtrack = 0;
            while f_trial > f_cur && backtrack < 25 {
                step *= 0.5;
                trial = nodes
                    .iter()
                    .zip(g.iter())
                    .map(|(&n, &gv)| n - gv * step)
                    .collect();
                f_trial = energy(&trial);
                backtrack += 1;
            }
            if f_trial > f_cur - 1e-15 && backtrack >= 25 {
                break;
            }
            nodes = trial;
            f_cur = f_trial;
            grad(&nodes, &mut g);
        }
        best = best.min(f_cur);
    }
    best
}

/// Richardson-extrapolated boundary value limit `lim_{s→0} A(x, τ(s))/s`
/// along the boundary in the given orientation (±1).
pub fn boundary_value_limit(
    system: &MagneticSystem,
    x: Vec2,
    orientation: f64,
    flow: &FlowSettings,
    shoot: &ShootingSettings,
) -> Result<f64> {
    let arc0 = system.domain.boundary_arc(x);
    let q = |s: f64| -> Result<f64> {
        let y = system.domain.boundary_point_at_arc(arc0 + orientation * s);
        Ok(boundary_action(system, x, y, flow, shoot)?.action / s)
    };
    let s0 = 0.4;
    let q1 = q(s0)?;
    let q2 = q(0.5 * s0)?;
    let q3 = q(0.25 * s0)?;
    // error series in s²: two Richardson passes
    let r1 = (4.0 * q2 - q1) / 3.0;
    let r2 = (4.0 * q3 - q2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}
