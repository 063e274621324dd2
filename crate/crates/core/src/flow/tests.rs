use super::*;
use crate::geometry::{
    euclidean_disk, Domain, MagneticSystem, Mat2, MetricField, OneFormField, ScalarField,
};

fn rot(a: f64) -> Mat2 {
    Mat2::new(a.cos(), -a.sin(), a.sin(), a.cos())
}

/// Closed-form circular arc for the Euclidean constant-λ system:
/// `ξ(t) = R(λt) ξ₀`, `x(t) = x₀ − J (R(λt) − I) ξ₀ / λ`.
fn arc_state(x0: Vec2, xi0: Vec2, lambda: f64, t: f64) -> PhasePoint {
    let j = Mat2::new(0.0, -1.0, 1.0, 0.0);
    let xi = rot(lambda * t).mul_vec(xi0);
    let disp = j
        .scale(-1.0)
        .mul_vec(rot(lambda * t).mul_vec(xi0) - xi0)
        * (1.0 / lambda);
    PhasePoint { x: x0 + disp, xi }
}

#[test]
fn straight_chord_through_disk() {
    let sys = euclidean_disk(0.0);
    let start = PhasePoint::unit(&sys, Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
    let sol = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    assert!((sol.t_exit - 2.0).abs() < 1e-9);
    assert!((sol.exit().x - Vec2::new(1.0, 0.0)).norm() < 1e-9);
    assert!(sol.t_enter.abs() < 1e-12);
    assert!(sol.stats.max_speed_drift < 1e-10);
}

#[test]
fn constant_lambda_arc_matches_closed_form() {
    let lambda = 0.5;
    let sys = euclidean_disk(lambda);
    let x0 = Vec2::new(-0.6, -0.3);
    let xi0 = Vec2::new(1.0, 0.2).normalized();
    let start = PhasePoint { x: x0, xi: xi0 };
    let sol = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    for i in 0..=20 {
        let t = sol.t_enter + (sol.t_exit - sol.t_enter) * i as f64 / 20.0;
        let got = sol.state(t);
        let want = arc_state(x0, xi0, lambda, t);
        assert!(
            (got.x - want.x).norm() < 1e-7,
            "t = {t}: {:?} vs {:?}",
            got.x,
            want.x
        );
        assert!((got.xi - want.xi).norm() < 1e-7);
    }
    // boundary residuals at both ends
    assert!(sys.domain.rho(sol.exit().x).abs() < 1e-9);
    assert!(sys.domain.rho(sol.entry().x).abs() < 1e-9);
}

#[test]
fn unit_speed_preserved_on_conformal_system() {
    let sys = MagneticSystem::new(
        MetricField::conformal(ScalarField::radial_bump(0.15, 1.0)),
        OneFormField::solenoid(0.3),
        Domain::unit_disk(),
    );
    let start = PhasePoint::unit(&sys, Vec2::new(0.2, -0.3), Vec2::new(0.4, 1.0));
    assert!(start.speed_defect(&sys) < 1e-14);
    let sol = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    assert!(sol.stats.max_speed_drift <= 1e-8, "{}", sol.stats.max_speed_drift);
}

#[test]
fn time_reversal_retraces_with_negated_alpha() {
    let sys = euclidean_disk(0.4);
    let start = PhasePoint::unit(&sys, Vec2::new(-0.9, 0.1), Vec2::new(0.8, 0.5));
    let sol = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    let t_end = sol.t_exit;
    let exit = sol.exit();

    let rev = sys.reversed();
    let back = integrate(
        &rev,
        PhasePoint {
            x: exit.x,
            xi: -exit.xi,
        },
        Horizon::Fixed(t_end),
        &FlowSettings::default(),
    )
    .unwrap();
    for i in 0..=10 {
        let t = t_end * i as f64 / 10.0;
        let fwd = sol.state(t);
        let bwd = back.state(t_end - t);
        assert!((fwd.x - bwd.x).norm() < 1e-7);
        assert!((fwd.xi + bwd.xi).norm() < 1e-7);
    }
}

#[test]
fn exit_time_is_chord_length() {
    let sys = euclidean_disk(0.0);
    let x = sys.domain.boundary_point(0.7);
    for theta in [-1.2f64, -0.4, 0.0, 0.9, 1.4] {
        let xi = sys.boundary_dir(x, theta);
        let rep = exit_time(
            &sys,
            PhasePoint { x, xi },
            TimeDirection::Forward,
            &FlowSettings::default(),
        )
        .unwrap();
        assert!(
            (rep.time - 2.0 * theta.cos()).abs() < 1e-8,
            "θ = {theta}: ℓ = {}",
            rep.time
        );
    }
}

#[test]
fn exit_time_zero_on_outward_boundary_state() {
    let sys = euclidean_disk(0.2);
    let x = sys.domain.boundary_point(2.0);
    let nu = sys.boundary_normal(x);
    let rep = exit_time(
        &sys,
        PhasePoint::unit(&sys, x, -nu),
        TimeDirection::Forward,
        &FlowSettings::default(),
    )
    .unwrap();
    assert_eq!(rep.time, 0.0);
}

#[test]
fn exit_time_backward_sign() {
    let sys = euclidean_disk(0.0);
    let start = PhasePoint::unit(&sys, Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0));
    let rep = exit_time(&sys, start, TimeDirection::Backward, &FlowSettings::default()).unwrap();
    assert!((rep.time + 1.0).abs() < 1e-9);
}

#[test]
fn chord_ratio_stays_bounded_toward_tangency() {
    // Lemma-style sweep: ℓ(x,ξ)/⟨ν,ξ⟩ over a fan refined toward the
    // tangential directions stays within 10× its interior median.
    let sys = euclidean_disk(0.3);
    let x = sys.domain.boundary_point(0.0);
    let mut ratios = Vec::new();
    for k in 0..40 {
        let theta = (std::f64::consts::FRAC_PI_2 - 1e-3) * (k as f64 + 0.5) / 40.0;
        for sgn in [-1.0, 1.0] {
            let xi = sys.boundary_dir(x, sgn * theta);
            let rep = exit_time(
                &sys,
                PhasePoint { x, xi },
                TimeDirection::Forward,
                &FlowSettings::default(),
            )
            .unwrap();
            ratios.push(rep.time / sys.inward_component(x, xi));
        }
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let max = sorted.last().unwrap();
    assert!(*max <= 10.0 * median, "max {max}, median {median}");
}

#[test]
fn exit_time_monotone_under_domain_shrinkage() {
    let sys = euclidean_disk(0.25);
    let mut small = sys.clone();
    small.domain = Domain::disk(0.9);
    let start = PhasePoint::unit(&sys, Vec2::new(0.1, -0.2), Vec2::new(0.7, 0.7));
    let l_big = exit_time(&sys, start, TimeDirection::Forward, &FlowSettings::default())
        .unwrap()
        .time;
    let l_small = exit_time(&small, start, TimeDirection::Forward, &FlowSettings::default())
        .unwrap()
        .time;
    assert!(l_small <= l_big);
}

#[test]
fn magnetic_exp_basics() {
    let settings = FlowSettings::default();
    let sys0 = euclidean_disk(0.0);
    let x = Vec2::new(0.1, 0.2);
    let v = Vec2::new(0.6, -0.8);
    assert_eq!(magnetic_exp(&sys0, x, 0.0, v, &settings).unwrap(), x);
    let p = magnetic_exp(&sys0, x, 0.35, v, &settings).unwrap();
    assert!((p - (x + v * 0.35)).norm() < 1e-10);

    let lambda = 0.5;
    let sys = euclidean_disk(lambda);
    let p = magnetic_exp(&sys, x, 0.6, v, &settings).unwrap();
    let want = arc_state(x, v.normalized(), lambda, 0.6).x;
    assert!((p - want).norm() < 1e-7);
}

#[test]
fn jacobi_euclidean_is_affine() {
    let sys = euclidean_disk(0.0);
    let start = PhasePoint::unit(&sys, Vec2::new(-0.8, 0.0), Vec2::new(1.0, 0.0));
    let host = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    let j0 = Vec2::new(0.0, 0.3);
    let w0 = Vec2::new(0.1, -0.2);
    let jac = jacobi(&sys, &host, j0, w0, &FlowSettings::default()).unwrap();
    for i in 0..=8 {
        let t = host.t_exit * i as f64 / 8.0;
        let (j, w) = jac.field(t);
        assert!((j - (j0 + w0 * t)).norm() < 1e-9);
        assert!((w - w0).norm() < 1e-9);
    }
}

#[test]
fn jacobi_constant_lambda_closed_form() {
    // J̈ = λ J̇_⊥ with J(0) = 0: J̇(t) = R(λt) J̇₀, J(t) = −J(R(λt) − I)J̇₀/λ.
    let lambda = 0.5;
    let sys = euclidean_disk(lambda);
    let start = PhasePoint::unit(&sys, Vec2::new(-0.7, -0.1), Vec2::new(1.0, 0.1));
    let host = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    let w0 = Vec2::new(0.2, 0.9);
    let jac = jacobi(&sys, &host, Vec2::ZERO, w0, &FlowSettings::default()).unwrap();
    let j_mat = Mat2::new(0.0, -1.0, 1.0, 0.0);
    for i in 1..=8 {
        let t = host.t_exit * i as f64 / 8.0;
        let (j, _) = jac.field(t);
        let want = j_mat
            .scale(-1.0 / lambda)
            .mul_vec(rot(lambda * t).mul_vec(w0) - w0);
        assert!((j - want).norm() < 1e-6, "t = {t}: {j:?} vs {want:?}");
        assert!((j.norm() - want.norm()).abs() < 1e-6);
    }
}

#[test]
fn jacobi_fd_resubstitution() {
    // Re-substitute the solved field into the Jacobi operator with finite
    // differences of the covariant derivative; residual is O(h²).
    let sys = MagneticSystem::new(
        MetricField::conformal(ScalarField::radial_bump(0.1, 1.0)),
        OneFormField::solenoid(0.3),
        Domain::unit_disk(),
    );
    let start = PhasePoint::unit(&sys, Vec2::new(-0.8, 0.15), Vec2::new(1.0, -0.2));
    let host = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    let jac = jacobi(
        &sys,
        &host,
        Vec2::new(0.1, 0.0),
        Vec2::new(0.0, 0.4),
        &FlowSettings::default(),
    )
    .unwrap();
    let h = 2e-3;
    for i in 2..=6 {
        let t = host.t_exit * i as f64 / 8.0;
        let state = jac.host_state(t);
        let (j, w) = jac.field(t);
        let (_, wp) = jac.field(t + h);
        let (_, wm) = jac.field(t - h);
        let gamma = sys.christoffel(state.x).unwrap();
        let gamma_pair =
            |a: Vec2, b: Vec2| Vec2::new(gamma[0].bilin(a, b), gamma[1].bilin(a, b));
        let dw = (wp - wm) / (2.0 * h) + gamma_pair(state.xi, w);
        let k = sys.gauss_curvature(state.x).unwrap();
        let g = sys.metric.at(state.x);
        let r_term = (j * g.quad(state.xi) - state.xi * g.bilin(j, state.xi)) * k;
        let dy = sys.nabla_lorentz(state.x).unwrap();
        let nabla_j_y = dy[0].mul_vec(state.xi) * j.x + dy[1].mul_vec(state.xi) * j.y;
        let residual = dw + r_term - sys.lorentz_matrix(state.x).mul_vec(w) - nabla_j_y;
        assert!(residual.norm() < 1e-5, "residual {}", residual.norm());
    }
}

fn boundary_fan(sys: &MagneticSystem, n: usize) -> Vec<PhasePoint> {
    let mut fan = Vec::new();
    for i in 0..n {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let x = sys.domain.boundary_point(phi);
        for k in 0..6 {
            let theta = -1.35 + 2.7 * (k as f64 + 0.5) / 6.0;
            fan.push(PhasePoint {
                x,
                xi: sys.boundary_dir(x, theta),
            });
        }
    }
    fan
}

#[test]
fn no_conjugate_points_on_simple_disks() {
    for lambda in [0.0, 0.3] {
        let sys = euclidean_disk(lambda);
        let fan = boundary_fan(&sys, 8);
        let reports = conjugate_point_scan(&sys, &fan, &FlowSettings::default()).unwrap();
        for r in reports {
            assert!(r.first_degeneracy.is_none(), "{r:?} at λ = {lambda}");
        }
    }
}

#[test]
fn conjugate_points_on_strongly_curved_disk() {
    // Constant curvature κ = 6: conjugate distance π/√6 ≈ 1.28 is shorter
    // than the central chords, so the scan must find degeneracies.
    let kappa = 6.0;
    let sys = MagneticSystem::new(
        MetricField::conformal(ScalarField::log_const_curvature(kappa)),
        OneFormField::zero(),
        Domain::unit_disk(),
    );
    let x = sys.domain.boundary_point(0.0);
    let start = PhasePoint::unit(&sys, x, sys.boundary_normal(x));
    let reports = conjugate_point_scan(&sys, &[start], &FlowSettings::default()).unwrap();
    let t1 = reports[0].first_degeneracy.expect("degeneracy expected");
    let expected = std::f64::consts::PI / kappa.sqrt();
    assert!((t1 - expected).abs() < 1e-4, "t₁ = {t1}, expected {expected}");

    // scan at a second resolution agrees
    let reports2 = conjugate_point_scan(&sys, &[start], &FlowSettings::with_tol(1e-12)).unwrap();
    let t2 = reports2[0].first_degeneracy.unwrap();
    assert!((t1 - t2).abs() < 1e-6);
}

#[test]
fn convexity_margin_matches_flow_second_derivative() {
    let sys = euclidean_disk(0.3);
    for phi in [0.3, 1.7, 4.4] {
        let x = sys.domain.boundary_point(phi);
        let tau = sys.boundary_tangent(x);
        for xi in [tau, -tau] {
            let analytic = sys.convexity_margin(x, xi).unwrap();
            let fd = convexity_margin_fd(&sys, x, xi, 1e-3, &FlowSettings::default()).unwrap();
            assert!((analytic - fd).abs() < 1e-5, "{analytic} vs {fd}");
        }
    }
}

#[test]
fn csv_export_shape() {
    let sys = euclidean_disk(0.0);
    let start = PhasePoint::unit(&sys, Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
    let sol = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
    let csv = sol.to_csv(5);
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("t,x,y,xi1,xi2"));
}
