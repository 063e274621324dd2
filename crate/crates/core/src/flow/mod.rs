//! Magnetic geodesic flow: the ODE `∇_γ̇ γ̇ = Y(γ̇)` with boundary-exit
//! event detection, the magnetic exponential map in its smooth (t, v)
//! parameterization, and magnetic Jacobi fields.

mod dopri;

pub use dopri::{DenseSolution, DenseStep, StepControl, Stepper};

use crate::geometry::{MagneticSystem, Vec2};
use crate::{Error, Result};

/// Unit-speed state of the flow.
#[derive(Debug, Clone, Copy)]
pub struct PhasePoint {
    pub x: Vec2,
    pub xi: Vec2,
}

impl PhasePoint {
    /// Normalize `dir` to g-unit length at `x`.
    pub fn unit(system: &MagneticSystem, x: Vec2, dir: Vec2) -> Self {
        PhasePoint {
            x,
            xi: system.unit_vector(x, dir),
        }
    }

    /// `| |ξ|_g − 1 |`.
    pub fn speed_defect(&self, system: &MagneticSystem) -> f64 {
        (system.metric.norm(self.x, self.xi) - 1.0).abs()
    }

    pub fn flipped(&self) -> PhasePoint {
        PhasePoint {
            x: self.x,
            xi: -self.xi,
        }
    }
}

/// Integration horizon: run to the boundary or for a fixed signed time.
#[derive(Debug, Clone, Copy)]
pub enum Horizon {
    UntilExit,
    Fixed(f64),
}

/// Flow tolerances. Defaults give ~9 accurate digits on unit-disk chords.
#[derive(Debug, Clone, Copy)]
pub struct FlowSettings {
    pub atol: f64,
    pub rtol: f64,
    /// Abort (escape error) if no exit is found before this flow time.
    pub max_time: f64,
    /// Residual |ρ| accepted at located boundary events.
    pub boundary_tol: f64,
    /// `|⟨ξ, ν⟩|` below which an exit is flagged as grazing.
    pub grazing_tol: f64,
    /// Escape radius in units of the domain radius.
    pub escape_factor: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            atol: 1e-10,
            rtol: 1e-10,
            max_time: 100.0,
            boundary_tol: 1e-9,
            grazing_tol: 1e-4,
            escape_factor: 8.0,
        }
    }
}

impl FlowSettings {
    pub fn with_tol(tol: f64) -> Self {
        FlowSettings {
            atol: tol,
            rtol: tol,
            ..Default::default()
        }
    }
}

/// Integrator statistics kept as test observables.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegStats {
    pub steps: usize,
    pub rhs_evals: usize,
    pub max_speed_drift: f64,
}

/// A magnetic geodesic through a phase point, densely sampled on
/// `[ℓ⁻, ℓ⁺]` with `ℓ⁻ ≤ 0 ≤ ℓ⁺`.
#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    start: PhasePoint,
    forward: Option<DenseSolution<4>>,
    backward: Option<DenseSolution<4>>,
    pub t_enter: f64,
    pub t_exit: f64,
    pub enter_grazing: bool,
    pub exit_grazing: bool,
    pub stats: IntegStats,
}

impl GeodesicSolution {
    pub fn state(&self, t: f64) -> PhasePoint {
        let y = if t >= 0.0 {
            match &self.forward {
                Some(sol) if !sol.steps.is_empty() => sol.eval(t),
                _ => pack(self.start),
            }
        } else {
            match &self.backward {
                Some(sol) if !sol.steps.is_empty() => sol.eval(t),
                _ => pack(self.start),
            }
        };
        unpack(y)
    }

    pub fn position(&self, t: f64) -> Vec2 {
        self.state(t).x
    }

    pub fn start(&self) -> PhasePoint {
        self.start
    }

    /// Entry state `ψ^{ℓ⁻}(x, ξ)`.
    pub fn entry(&self) -> PhasePoint {
        self.state(self.t_enter)
    }

    /// Exit state `ψ^{ℓ}(x, ξ)`.
    pub fn exit(&self) -> PhasePoint {
        self.state(self.t_exit)
    }

    /// Forward chord time ℓ(x, ξ).
    pub fn chord_time(&self) -> f64 {
        self.t_exit
    }

    /// CSV dump `t,x,y,xi1,xi2` with `n` uniform samples.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("t,x,y,xi1,xi2\n");
        for i in 0..n {
            let t = self.t_enter
                + (self.t_exit - self.t_enter) * (i as f64) / ((n - 1).max(1) as f64);
            let s = self.state(t);
            out.push_str(&format!(
                "{:.12},{:.12},{:.12},{:.12},{:.12}\n",
                t, s.x.x, s.x.y, s.xi.x, s.xi.y
            ));
        }
        out
    }
}

#[inline]
fn pack(p: PhasePoint) -> [f64; 4] {
    [p.x.x, p.x.y, p.xi.x, p.xi.y]
}

#[inline]
fn unpack(y: [f64; 4]) -> PhasePoint {
    PhasePoint {
        x: Vec2::new(y[0], y[1]),
        xi: Vec2::new(y[2], y[3]),
    }
}

/// Right-hand side of the magnetic geodesic equation
/// `ẍ^i + Γ^i_{jk} ẋ^j ẋ^k = (Y ẋ)^i`.
fn geodesic_rhs(system: &MagneticSystem) -> impl Fn(f64, &[f64; 4]) -> Result<[f64; 4]> + '_ {
    move |_t, y| {
        let x = Vec2::new(y[0], y[1]);
        let xi = Vec2::new(y[2], y[3]);
        let gamma = system.christoffel(x)?;
        let force = system.lorentz(x, xi);
        Ok([
            xi.x,
            xi.y,
            -gamma[0].quad(xi) + force.x,
            -gamma[1].quad(xi) + force.y,
        ])
    }
}

struct LegOutcome<const N: usize> {
    sol: DenseSolution<N>,
    t_exit: f64,
    grazing: bool,
    max_drift: f64,
}

/// Integrate one time direction until the trajectory crosses ∂M.
///
/// The boundary event is located on the dense output: each accepted step is
/// scanned at sub-samples for a sign change of ρ, then the root is polished
/// by bisection. Events only arm once ρ has been seen clearly positive, so a
/// start on the boundary does not trigger at t = 0.
fn integrate_leg<const N: usize>(
    system: &MagneticSystem,
    rhs: &impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    y0: [f64; N],
    dir: f64,
    settings: &FlowSettings,
) -> Result<LegOutcome<N>> {
    let domain = &system.domain;
    let escape_r = domain.radius() * settings.escape_factor;
    let control = StepControl {
        atol: settings.atol,
        rtol: settings.rtol,
        h_init: 1e-3 * domain.radius(),
        h_max: 0.2 * domain.radius(),
        max_steps: 400_000,
    };
    let mut stepper = Stepper::new(rhs, 0.0, y0, dir, control);
    let mut sol = DenseSolution::default();
    let mut max_drift = 0.0f64;
    let arm_rho = 1e-8 * domain.radius();
    let mut armed = domain.rho(Vec2::new(y0[0], y0[1])) > arm_rho;

    const SUBS: usize = 8;
    loop {
        if stepper.t.abs() > settings.max_time {
            return Err(Error::Escape { t: stepper.t });
        }
        let step = stepper.step()?;
        // event scan over dense sub-samples
        let mut t_prev = step.t0;
        let mut rho_prev = domain.rho(Vec2::new(step.eval(t_prev)[0], step.eval(t_prev)[1]));
        let mut hit: Option<(f64, f64)> = None;
        for j in 1..=SUBS {
            let t = step.t0 + step.h * (j as f64) / (SUBS as f64);
            let y = step.eval(t);
            let rho = domain.rho(Vec2::new(y[0], y[1]));
            if armed && rho_prev >= 0.0 && rho < 0.0 {
                hit = Some((t_prev, t));
                break;
            }
            if rho > arm_rho {
                armed = true;
            }
            t_prev = t;
            rho_prev = rho;
        }
        if let Some((mut a, mut b)) = hit {
            // bisect ρ∘γ on the dense polynomial
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let y = step.eval(m);
                let rho = domain.rho(Vec2::new(y[0], y[1]));
                if rho >= 0.0 {
                    a = m;
                } else {
                    b = m;
                }
                if (b - a).abs() < 1e-14 {
                    break;
                }
            }
            let t_exit = 0.5 * (a + b);
            let y = step.eval(t_exit);
            let x = Vec2::new(y[0], y[1]);
            let xi = Vec2::new(y[2], y[3]);
            debug_assert!(domain.rho(x).abs() <= settings.boundary_tol);
            let grazing = system.inward_component(x, xi).abs() < settings.grazing_tol;
            sol.steps.push(step);
            sol.n_rhs_evals = stepper.rhs_evals;
            return Ok(LegOutcome {
                sol,
                t_exit,
                grazing,
                max_drift,
            });
        }

        let p = PhasePoint {
            x: Vec2::new(stepper.y[0], stepper.y[1]),
            xi: Vec2::new(stepper.y[2], stepper.y[3]),
        };
        max_drift = max_drift.max(p.speed_defect(system));
        if p.x.norm() > escape_r {
            return Err(Error::Escape { t: stepper.t });
        }
        sol.steps.push(step);
    }
}

fn integrate_fixed<const N: usize>(
    system: &MagneticSystem,
    rhs: &impl Fn(f64, &[f64; N]) -> Result<[f64; N]>,
    y0: [f64; N],
    t_end: f64,
    settings: &FlowSettings,
) -> Result<(DenseSolution<N>, f64)> {
    let control = StepControl {
        atol: settings.atol,
        rtol: settings.rtol,
        h_init: 1e-3 * system.domain.radius(),
        h_max: 0.2 * system.domain.radius(),
        max_steps: 400_000,
    };
    let dir = if t_end >= 0.0 { 1.0 } else { -1.0 };
    let escape_r = system.domain.radius() * settings.escape_factor;
    let mut stepper = Stepper::new(rhs, 0.0, y0, dir, control);
    let mut sol = DenseSolution::default();
    let mut max_drift = 0.0f64;
    while (t_end - stepper.t) * dir > 1e-15 {
        stepper.clamp_to(t_end);
        let step = stepper.step()?;
        let x = Vec2::new(stepper.y[0], stepper.y[1]);
        if x.norm() > escape_r {
            return Err(Error::Escape { t: stepper.t });
        }
        let xi = Vec2::new(stepper.y[2], stepper.y[3]);
        max_drift = max_drift.max((system.metric.norm(x, xi) - 1.0).abs());
        sol.steps.push(step);
    }
    sol.n_rhs_evals = stepper.rhs_evals;
    Ok((sol, max_drift))
}

/// Whether a boundary start leaves the domain immediately in the given time
/// direction. Tangential starts within the grazing band count as immediate:
/// for a convex boundary their chord is too short to resolve.
fn immediate_exit(system: &MagneticSystem, p: PhasePoint, dir: f64, settings: &FlowSettings) -> bool {
    let rho = system.domain.rho(p.x);
    if rho.abs() > 1e-9 * system.domain.radius() {
        return false;
    }
    // d(ρ∘γ)/dτ in integration direction
    system.domain.grad_rho(p.x).dot(p.xi) * dir < settings.grazing_tol
}

/// Integrate the magnetic geodesic through `start`.
///
/// `UntilExit` produces the maximal chord `[ℓ⁻, ℓ⁺]` through the domain;
/// `Fixed(T)` integrates for signed time T without boundary events.
pub fn integrate(
    system: &MagneticSystem,
    start: PhasePoint,
    horizon: Horizon,
    settings: &FlowSettings,
) -> Result<GeodesicSolution> {
    let rhs = geodesic_rhs(system);
    let y0 = pack(start);
    match horizon {
        Horizon::Fixed(t_end) => {
            let (sol, max_drift) = integrate_fixed(system, &rhs, y0, t_end, settings)?;
            let stats = IntegStats {
                steps: sol.steps.len(),
                rhs_evals: sol.n_rhs_evals,
                max_speed_drift: max_drift,
            };
            let (fwd, bwd, enter, exit) = if t_end >= 0.0 {
                (Some(sol), None, 0.0, t_end)
            } else {
                (None, Some(sol), t_end, 0.0)
            };
            Ok(GeodesicSolution {
                start,
                forward: fwd,
                backward: bwd,
                t_enter: enter,
                t_exit: exit,
                enter_grazing: false,
                exit_grazing: false,
                stats,
            })
        }
        Horizon::UntilExit => {
            let mut stats = IntegStats::default();
            let (forward, t_exit, exit_grazing) = if immediate_exit(system, start, 1.0, settings) {
                (None, 0.0, false)
            } else {
                let leg = integrate_leg(system, &rhs, y0, 1.0, settings)?;
                stats.steps += leg.sol.steps.len();
                stats.rhs_evals += leg.sol.n_rhs_evals;
                stats.max_speed_drift = stats.max_speed_drift.max(leg.max_drift);
                (Some(leg.sol), leg.t_exit, leg.grazing)
            };
            let (backward, t_enter, enter_grazing) = if immediate_exit(system, start, -1.0, settings) {
                (None, 0.0, false)
            } else {
                let leg = integrate_leg(system, &rhs, y0, -1.0, settings)?;
                stats.steps += leg.sol.steps.len();
                stats.rhs_evals += leg.sol.n_rhs_evals;
                stats.max_speed_drift = stats.max_speed_drift.max(leg.max_drift);
                (Some(leg.sol), leg.t_exit, leg.grazing)
            };
            Ok(GeodesicSolution {
                start,
                forward,
                backward,
                t_enter,
                t_exit,
                enter_grazing,
                exit_grazing,
                stats,
            })
        }
    }
}

/// Time direction for [`exit_time`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDirection {
    Forward,
    Backward,
}

/// Exit-time report: the first root of `ρ∘γ` in the requested direction.
#[derive(Debug, Clone, Copy)]
pub struct ExitReport {
    /// `ℓ(x, ξ) ≥ 0` forward, `ℓ⁻(x, ξ) ≤ 0` backward.
    pub time: f64,
    pub grazing: bool,
    pub exit: PhasePoint,
}

/// First boundary crossing time of the geodesic through `start`.
pub fn exit_time(
    system: &MagneticSystem,
    start: PhasePoint,
    direction: TimeDirection,
    settings: &FlowSettings,
) -> Result<ExitReport> {
    let dir = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Backward => -1.0,
    };
    if immediate_exit(system, start, dir, settings) {
        return Ok(ExitReport {
            time: 0.0,
            grazing: system.inward_component(start.x, start.xi).abs() < settings.grazing_tol,
            exit: start,
        });
    }
    let rhs = geodesic_rhs(system);
    let leg = integrate_leg(system, &rhs, pack(start), dir, settings)?;
    let y = leg.sol.eval(leg.t_exit);
    Ok(ExitReport {
        time: leg.t_exit,
        grazing: leg.grazing,
        exit: unpack(y),
    })
}

/// Magnetic exponential map `(t, v) ↦ π∘ψ^t(x, v)` in its smooth (t, v)
/// parameterization; `v` is normalized to g-unit length.
pub fn magnetic_exp(
    system: &MagneticSystem,
    x: Vec2,
    t: f64,
    v: Vec2,
    settings: &FlowSettings,
) -> Result<Vec2> {
    if t == 0.0 {
        return Ok(x);
    }
    let start = PhasePoint::unit(system, x, v);
    let sol = integrate(system, start, Horizon::Fixed(t), settings)?;
    Ok(sol.position(t))
}

/// Magnetic Jacobi field along a host geodesic, solved jointly with the host
/// state: `J̈ + R(γ̇,J)γ̇ − Y(J̇) − (∇_J Y)(γ̇) = 0`.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    sol: DenseSolution<8>,
    pub t_end: f64,
}

impl JacobiSolution {
    /// `(J(t), J̇(t))` with J̇ the covariant derivative along γ.
    pub fn field(&self, t: f64) -> (Vec2, Vec2) {
        let y = self.sol.eval(t);
        (Vec2::new(y[4], y[5]), Vec2::new(y[6], y[7]))
    }

    pub fn host_state(&self, t: f64) -> PhasePoint {
        let y = self.sol.eval(t);
        PhasePoint {
            x: Vec2::new(y[0], y[1]),
            xi: Vec2::new(y[2], y[3]),
        }
    }
}

fn jacobi_rhs(system: &MagneticSystem) -> impl Fn(f64, &[f64; 8]) -> Result<[f64; 8]> + '_ {
    move |_t, y| {
        let x = Vec2::new(y[0], y[1]);
        let xi = Vec2::new(y[2], y[3]);
        let j = Vec2::new(y[4], y[5]);
        let w = Vec2::new(y[6], y[7]);
        let gamma = system.christoffel(x)?;
        let force = system.lorentz(x, xi);
        let k = system.gauss_curvature(x)?;
        // R(ξ,J)ξ = K (|ξ|² J − ⟨J,ξ⟩ ξ)
        let g = system.metric.at(x);
        let r_term = (j * g.quad(xi) - xi * g.bilin(j, xi)) * k;
        let dy = system.nabla_lorentz(x)?;
        let nabla_j_y = dy[0].mul_vec(xi) * j.x + dy[1].mul_vec(xi) * j.y;
        let yw = system.lorentz_matrix(x).mul_vec(w);
        let cov_w = -r_term + yw + nabla_j_y;
        let gamma_pair = |a: Vec2, b: Vec2| Vec2::new(gamma[0].bilin(a, b), gamma[1].bilin(a, b));
        let dj = w - gamma_pair(xi, j);
        let dw = cov_w - gamma_pair(xi, w);
        Ok([
            xi.x,
            xi.y,
            -gamma[0].quad(xi) + force.x,
            -gamma[1].quad(xi) + force.y,
            dj.x,
            dj.y,
            dw.x,
            dw.y,
        ])
    }
}

/// Solve the magnetic Jacobi equation along the host geodesic over the
/// host's forward chord `[0, ℓ]`.
pub fn jacobi(
    system: &MagneticSystem,
    host: &GeodesicSolution,
    j0: Vec2,
    jdot0: Vec2,
    settings: &FlowSettings,
) -> Result<JacobiSolution> {
    let p = host.state(0.0);
    let y0 = [p.x.x, p.x.y, p.xi.x, p.xi.y, j0.x, j0.y, jdot0.x, jdot0.y];
    let rhs = jacobi_rhs(system);
    let (sol, _) = integrate_fixed(system, &rhs, y0, host.t_exit, settings)?;
    Ok(JacobiSolution {
        sol,
        t_end: host.t_exit,
    })
}

/// Per-host result of the conjugate-point scan.
#[derive(Debug, Clone, Copy)]
pub struct ConjugateReport {
    pub chord_time: f64,
    /// First time the basis `[γ̇(t), J₂(t)]` degenerates, if any.
    pub first_degeneracy: Option<f64>,
}

/// Scan a fan of host geodesics for conjugate points: evolve the Jacobi
/// field with `J(0) = 0`, independent `J̇(0)`, and report the first zero of
/// the area `Ω_a(γ̇(t), J(t))` after it has grown away from the trivial zero
/// at t = 0.
pub fn conjugate_point_scan(
    system: &MagneticSystem,
    fan: &[PhasePoint],
    settings: &FlowSettings,
) -> Result<Vec<ConjugateReport>> {
    fan.iter()
        .map(|&start| {
            let host = integrate(system, start, Horizon::UntilExit, settings)?;
            let n0 = system.perp(start.x, start.xi);
            let jac = jacobi(system, &host, Vec2::ZERO, n0, settings)?;
            let t_end = host.t_exit;
            let n_samples = 400;
            let area = |t: f64| -> f64 {
                let y = jac.sol.eval(t);
                let xi = Vec2::new(y[2], y[3]);
                let j = Vec2::new(y[4], y[5]);
                let x = Vec2::new(y[0], y[1]);
                system.metric.sqrt_det(x) * (xi.x * j.y - xi.y * j.x)
            };
            let mut scale = 0.0f64;
            let samples: Vec<(f64, f64)> = (0..=n_samples)
                .map(|i| {
                    let t = t_end * i as f64 / n_samples as f64;
                    let d = area(t);
                    scale = scale.max(d.abs());
                    (t, d)
                })
                .collect();
            let mut armed = false;
            let mut sign = 0.0;
            let mut hit = None;
            for &(t, d) in &samples[1..] {
                if !armed {
                    if d.abs() > 1e-3 * scale.max(1e-300) {
                        armed = true;
                        sign = d.signum();
                    }
                    continue;
                }
                if d.signum() != sign && d != 0.0 {
                    // bisect on the dense output
                    let mut a = t - t_end / n_samples as f64;
                    let mut b = t;
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if area(m).signum() == sign {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    hit = Some(0.5 * (a + b));
                    break;
                }
            }
            Ok(ConjugateReport {
                chord_time: t_end,
                first_degeneracy: hit,
            })
        })
        .collect()
}

/// Flow-based cross-check of the convexity margin: finite difference of
/// `−d²(ρ∘γ)/dt²|₀ / |grad ρ|_g` for a boundary-tangent start.
pub fn convexity_margin_fd(
    system: &MagneticSystem,
    x: Vec2,
    xi: Vec2,
    dt: f64,
    settings: &FlowSettings,
) -> Result<f64> {
    let start = PhasePoint::unit(system, x, xi);
    // relax the escape checks: these arcs live just outside ∂M
    let sol_p = integrate(system, start, Horizon::Fixed(dt), settings)?;
    let sol_m = integrate(system, start, Horizon::Fixed(-dt), settings)?;
    let rho_p = system.domain.rho(sol_p.position(dt));
    let rho_m = system.domain.rho(sol_m.position(-dt));
    let rho_0 = system.domain.rho(x);
    let second = (rho_p - 2.0 * rho_0 + rho_m) / (dt * dt);
    let drho = system.domain.grad_rho(x);
    let norm = system.metric.norm(x, system.metric.raise(x, drho));
    Ok(-second / norm)
}

#[cfg(test)]
mod tests;
