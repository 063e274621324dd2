//! Interactive browser demo: magnetic geodesic fans in the disk, the
//! scattering relation, and boundary convexity margins, driven by sliders.
//!
//! The exports keep to flat `f64` buffers so the page needs no framework;
//! see `www/index.html` for the canvas glue.

use wasm_bindgen::prelude::wasm_bindgen;

use magray::flow::{integrate, FlowSettings, Horizon, PhasePoint};
use magray::geometry::{Domain, MagneticSystem, MetricField, OneFormField, ScalarField};

fn demo_system(lambda: f64, bump: f64) -> MagneticSystem {
    let metric = if bump.abs() < 1e-12 {
        MetricField::euclidean()
    } else {
        MetricField::conformal(ScalarField::radial_bump(bump, 1.0))
    };
    MagneticSystem::new(metric, OneFormField::solenoid(lambda), Domain::unit_disk())
}

fn demo_settings() -> FlowSettings {
    FlowSettings {
        atol: 1e-8,
        rtol: 1e-8,
        max_time: 40.0,
        ..Default::default()
    }
}

/// Fan of magnetic geodesics from one boundary point.
///
/// Returns `rays × samples` (x, y) pairs, flattened ray-major. Rays that
/// trap (no exit before the time budget) are drawn as partial orbits.
#[wasm_bindgen]
pub fn trace_fan(lambda: f64, bump: f64, entry_angle: f64, rays: usize, samples: usize) -> Vec<f64> {
    let sys = demo_system(lambda, bump);
    let settings = demo_settings();
    let x = sys.domain.boundary_point(entry_angle);
    let mut out = Vec::with_capacity(rays * samples * 2);
    for k in 0..rays {
        let theta = -1.25 + 2.5 * (k as f64 + 0.5) / rays as f64;
        let start = PhasePoint {
            x,
            xi: sys.boundary_dir(x, theta),
        };
        let geo = integrate(&sys, start, Horizon::UntilExit, &settings)
            .or_else(|_| integrate(&sys, start, Horizon::Fixed(6.0), &settings));
        match geo {
            Ok(geo) => {
                let t1 = geo.t_exit.max(1e-9);
                for i in 0..samples {
                    let t = t1 * i as f64 / (samples - 1).max(1) as f64;
                    let p = geo.position(t);
                    out.push(p.x);
                    out.push(p.y);
                }
            }
            Err(_) => {
                for _ in 0..samples {
                    out.push(x.x);
                    out.push(x.y);
                }
            }
        }
    }
    out
}

/// Scattering relation at one boundary point: for `n` fan angles θ, the
/// triple (θ, exit boundary angle, chord time), flattened.
#[wasm_bindgen]
pub fn scattering_curve(lambda: f64, bump: f64, entry_angle: f64, n: usize) -> Vec<f64> {
    let sys = demo_system(lambda, bump);
    let settings = demo_settings();
    let x = sys.domain.boundary_point(entry_angle);
    let mut out = Vec::with_capacity(n * 3);
    for k in 0..n {
        let theta = -1.45 + 2.9 * (k as f64 + 0.5) / n as f64;
        let start = PhasePoint {
            x,
            xi: sys.boundary_dir(x, theta),
        };
        match magray::flow::exit_time(
            &sys,
            start,
            magray::flow::TimeDirection::Forward,
            &settings,
        ) {
            Ok(rep) => {
                out.push(theta);
                out.push(sys.domain.boundary_angle(rep.exit.x));
                out.push(rep.time);
            }
            Err(_) => {
                out.push(theta);
                out.push(f64::NAN);
                out.push(f64::NAN);
            }
        }
    }
    out
}

/// Convexity margins `Λ − ⟨Y(ξ), ν⟩` over `n` boundary stations, both
/// tangent orientations: returns (boundary angle, margin₊, margin₋)
/// triples. The boundary is strictly magnetic convex iff all margins > 0.
#[wasm_bindgen]
pub fn convexity_margins(lambda: f64, bump: f64, n: usize) -> Vec<f64> {
    let sys = demo_system(lambda, bump);
    let mut out = Vec::with_capacity(n * 3);
    for k in 0..n {
        let phi = std::f64::consts::TAU * k as f64 / n as f64;
        let x = sys.domain.boundary_point(phi);
        let tau = sys.boundary_tangent(x);
        let plus = sys.convexity_margin(x, tau).unwrap_or(f64::NAN);
        let minus = sys.convexity_margin(x, -tau).unwrap_or(f64::NAN);
        out.push(phi);
        out.push(plus);
        out.push(minus);
    }
    out
}

/// Reversibility probe: max phase-space defect of `𝒮(−𝒮(x, ξ))` vs
/// `(x, −ξ)` over a small fan. Zero iff the system is reversible (dα = 0).
#[wasm_bindgen]
pub fn reversibility_defect(lambda: f64, bump: f64) -> f64 {
    let sys = demo_system(lambda, bump);
    let settings = demo_settings();
    magray::boundary::reversibility_residual(&sys, 8, 5, &settings).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use magray::geometry::Vec2;

    #[test]
    fn fan_buffer_shape_and_endpoints() {
        let buf = trace_fan(0.3, 0.0, 0.7, 5, 32);
        assert_eq!(buf.len(), 5 * 32 * 2);
        // every ray starts at the entry point on the circle
        let entry = Domain::unit_disk().boundary_point(0.7);
        for k in 0..5 {
            let i = k * 64;
            assert!((Vec2::new(buf[i], buf[i + 1]) - entry).norm() < 1e-9);
            // and ends on the boundary for a simple system
            let j = i + 62;
            assert!((Vec2::new(buf[j], buf[j + 1]).norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn trapped_rays_fall_back_to_partial_orbits() {
        let buf = trace_fan(1.4, 0.0, 0.0, 3, 16);
        assert_eq!(buf.len(), 3 * 16 * 2);
        assert!(buf.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn margins_flip_sign_when_convexity_fails() {
        let ok = convexity_margins(0.3, 0.0, 16);
        assert!(ok.chunks(3).all(|c| c[1] > 0.0 && c[2] > 0.0));
        let bad = convexity_margins(1.5, 0.0, 16);
        assert!(bad.chunks(3).any(|c| c[1] < 0.0 || c[2] < 0.0));
    }

    #[test]
    fn reversibility_defect_dichotomy() {
        assert!(reversibility_defect(0.0, 0.0) < 1e-6);
        assert!(reversibility_defect(0.3, 0.0) > 0.05);
    }
}
