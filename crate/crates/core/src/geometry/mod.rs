//! Metrics, forms, domains, and the derived geometric operators (Christoffel
//! symbols, Lorentz force, convexity margins) for 2D magnetic systems.

mod domain;
mod metric;
mod one_form;
mod scalar;
mod system;
mod tensor;
mod vec;

pub use domain::Domain;
pub use metric::{MetricFamily, MetricField};
pub use one_form::{OneFormFamily, OneFormField};
pub use scalar::{Poly2, ScalarField};
pub use system::{Frame, MagneticSystem};
pub use tensor::{CovectorField, SymTensorField};
pub use vec::{Mat2, SymMat2, Vec2};

/// Unit-disk system with Euclidean metric and constant-curl potential λ.
pub fn euclidean_disk(lambda: f64) -> MagneticSystem {
    MagneticSystem::new(
        MetricField::euclidean(),
        OneFormField::solenoid(lambda),
        Domain::unit_disk(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_points() -> Vec<Vec2> {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let x = -0.9 + 0.2 * i as f64;
                let y = -0.9 + 0.2 * j as f64;
                let p = Vec2::new(x, y);
                if p.norm() < 0.95 {
                    pts.push(p);
                }
            }
        }
        pts
    }

    #[test]
    fn christoffel_vanishes_for_euclidean() {
        let sys = euclidean_disk(0.0);
        for p in sample_points() {
            let g = sys.christoffel(p).unwrap();
            for i in 0..2 {
                for k in 0..3 {
                    assert_eq!(g[i].comp(k), 0.0);
                }
            }
        }
    }

    #[test]
    fn christoffel_conformal_linear_exponent() {
        // g = e^{2u} δ with u = x: Γ^1_11 = 1, Γ^1_22 = −1, Γ^2_12 = 1,
        // Γ^1_12 = Γ^2_11 = Γ^2_22 = 0.
        let sys = MagneticSystem::new(
            MetricField::conformal(ScalarField::linear(1.0, 0.0)),
            OneFormField::zero(),
            Domain::unit_disk(),
        );
        let p = Vec2::new(0.21, -0.37);
        let g = sys.christoffel(p).unwrap();
        assert!((g[0].xx - 1.0).abs() < 1e-12);
        assert!((g[0].yy + 1.0).abs() < 1e-12);
        assert!((g[1].xy - 1.0).abs() < 1e-12);
        assert!(g[0].xy.abs() < 1e-12);
        assert!(g[1].xx.abs() < 1e-12);
        assert!(g[1].yy.abs() < 1e-12);
    }

    #[test]
    fn christoffel_matches_fd_assembly() {
        // Finite-difference Levi-Civita oracle on a non-trivial metric.
        let sys = MagneticSystem::new(
            MetricField::conformal(ScalarField::poly_bump(
                Poly2::new(vec![(0, 0, 0.3), (1, 0, 0.2), (0, 1, -0.1)]),
                1,
                1.0,
            )),
            OneFormField::zero(),
            Domain::unit_disk(),
        );
        let h = 1e-5;
        for p in [Vec2::new(0.31, 0.12), Vec2::new(-0.4, 0.55)] {
            let gamma = sys.christoffel(p).unwrap();
            // assemble from FD of g
            let ex = Vec2::new(h, 0.0);
            let ey = Vec2::new(0.0, h);
            let dgx = sys.metric.at(p + ex).sub(sys.metric.at(p - ex)).scale(0.5 / h);
            let dgy = sys.metric.at(p + ey).sub(sys.metric.at(p - ey)).scale(0.5 / h);
            let dg = [dgx, dgy];
            let gi = sys.metric.inv_at(p);
            let gc = |m: &SymMat2, a: usize, b: usize| match (a, b) {
                (0, 0) => m.xx,
                (1, 1) => m.yy,
                _ => m.xy,
            };
            for i in 0..2 {
                for (j, k) in [(0, 0), (0, 1), (1, 1)] {
                    let mut v = 0.0;
                    for l in 0..2 {
                        let gil = if i == l {
                            if i == 0 {
                                gi.xx
                            } else {
                                gi.yy
                            }
                        } else {
                            gi.xy
                        };
                        v += gil
                            * 0.5
                            * (gc(&dg[j], l, k) + gc(&dg[k], l, j) - gc(&dg[l], j, k));
                    }
                    let got = match (j, k) {
                        (0, 0) => gamma[i].xx,
                        (1, 1) => gamma[i].yy,
                        _ => gamma[i].xy,
                    };
                    assert!(
                        (v - got).abs() < 1e-6,
                        "Γ^{i}_{j}{k}: fd {v} vs analytic {got}"
                    );
                }
            }
        }
    }

    #[test]
    fn lorentz_solenoid_euclidean() {
        // α = (λ/2)(−y dx + x dy): Ω = λ dx∧dy, Y(ξ) = λ(−ξ², ξ¹).
        let sys = euclidean_disk(0.7);
        let p = Vec2::new(0.3, 0.4);
        let xi = Vec2::new(0.6, -0.2);
        let y = sys.lorentz(p, xi);
        assert!((y - Vec2::new(0.2 * 0.7, 0.6 * 0.7)).norm() < 1e-14);
        // ⟨Y(ξ), η⟩ = Ω(ξ, η) on basis pairs
        for xi in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
            for eta in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
                let lhs = sys.metric.inner(p, sys.lorentz(p, xi), eta);
                let omega = sys.omega12(p) * (xi.x * eta.y - xi.y * eta.x);
                assert!((lhs - omega).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lorentz_vanishes_for_closed_form() {
        let sys = MagneticSystem::new(
            MetricField::euclidean(),
            OneFormField::exact(&ScalarField::radial_bump(0.1, 1.0)),
            Domain::unit_disk(),
        );
        let p = Vec2::new(0.3, -0.1);
        assert!(sys.lorentz(p, Vec2::new(1.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn lorentz_pairing_on_conformal_metric() {
        let sys = MagneticSystem::new(
            MetricField::conformal(ScalarField::radial_bump(0.2, 1.0)),
            OneFormField::solenoid(0.4),
            Domain::unit_disk(),
        );
        let p = Vec2::new(-0.2, 0.5);
        for xi in [Vec2::new(1.0, 0.3), Vec2::new(-0.4, 1.0)] {
            for eta in [Vec2::new(0.2, -1.0), Vec2::new(1.0, 1.0)] {
                let lhs = sys.metric.inner(p, sys.lorentz(p, xi), eta);
                let omega = sys.omega12(p) * (xi.x * eta.y - xi.y * eta.x);
                assert!((lhs - omega).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perp_is_gnorm_preserving_quarter_turn() {
        let sys = MagneticSystem::new(
            MetricField::conformal(ScalarField::linear(0.3, -0.2)),
            OneFormField::zero(),
            Domain::unit_disk(),
        );
        let p = Vec2::new(0.25, 0.45);
        let v = Vec2::new(0.7, -0.4);
        let vp = sys.perp(p, v);
        assert!(sys.metric.inner(p, v, vp).abs() < 1e-12);
        assert!((sys.metric.norm(p, vp) - sys.metric.norm(p, v)).abs() < 1e-12);
        // positive orientation w.r.t. the area form
        let area = sys.metric.sqrt_det(p) * (v.x * vp.y - v.y * vp.x);
        assert!(area > 0.0);
        // covector rotation is compatible with raising/lowering
        let a = Vec2::new(0.4, 0.9);
        let left = sys.perp_covector(p, a);
        let right = sys.metric.lower(p, sys.perp(p, sys.metric.raise(p, a)));
        assert!((left - right).norm() < 1e-12);
    }

    #[test]
    fn convexity_margin_unit_disk() {
        // λ = 0: margin 1 everywhere; λ = 0.3: {0.7, 1.3}; λ = 1.5: fails.
        let x = Domain::unit_disk().boundary_point(1.1);
        let sys0 = euclidean_disk(0.0);
        let tau = sys0.boundary_tangent(x);
        assert!((sys0.convexity_margin(x, tau).unwrap() - 1.0).abs() < 1e-10);
        assert!((sys0.convexity_margin(x, -tau).unwrap() - 1.0).abs() < 1e-10);

        let sys3 = euclidean_disk(0.3);
        let m1 = sys3.convexity_margin(x, tau).unwrap();
        let m2 = sys3.convexity_margin(x, -tau).unwrap();
        let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        assert!((lo - 0.7).abs() < 1e-10, "{lo}");
        assert!((hi - 1.3).abs() < 1e-10, "{hi}");

        let sys15 = euclidean_disk(1.5);
        assert!(sys15.min_convexity_margin(64).unwrap() < 0.0);
    }

    #[test]
    fn convexity_margin_rejects_interior_points() {
        let sys = euclidean_disk(0.0);
        let err = sys
            .convexity_margin(Vec2::new(0.2, 0.0), Vec2::new(0.0, 1.0))
            .unwrap_err();
        assert!(matches!(err, crate::Error::NotOnBoundary { .. }));
    }

    #[test]
    fn gauss_curvature_constant_curvature_model() {
        let kappa = 1.8;
        let sys = MagneticSystem::new(
            MetricField::conformal(ScalarField::log_const_curvature(kappa)),
            OneFormField::zero(),
            Domain::unit_disk(),
        );
        for p in [Vec2::new(0.0, 0.1), Vec2::new(0.4, -0.3), Vec2::new(-0.6, 0.2)] {
            let k = sys.gauss_curvature(p).unwrap();
            assert!((k - kappa).abs() < 1e-5, "K = {k}, expected {kappa}");
        }
    }

    #[test]
    fn frame_connection_consistency() {
        // d/dt of the frame angle along a curve equals −ω(ẋ) for parallel
        // transport; check ω against a finite-difference of frame angles of
        // a parallel field is overkill here, instead check ω = 0 for
        // Euclidean and antisymmetry structure for conformal.
        let sys = euclidean_disk(0.0);
        let w = sys.frame_connection(Vec2::new(0.3, 0.2)).unwrap();
        assert!(w.norm() < 1e-14);

        let sysc = MagneticSystem::new(
            MetricField::conformal(ScalarField::linear(0.0, 1.0)),
            OneFormField::zero(),
            Domain::unit_disk(),
        );
        // for g = e^{2u}δ the frame connection is ω = −u_y dx + u_x dy
        let p = Vec2::new(0.1, -0.2);
        let w = sysc.frame_connection(p).unwrap();
        assert!((w.x - -1.0).abs() < 1e-10, "{w:?}");
        assert!(w.y.abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn lorentz_skew_symmetry(x in -0.8f64..0.8, y in -0.8f64..0.8,
                                 vx in -1.0f64..1.0, vy in -1.0f64..1.0) {
            let sys = MagneticSystem::new(
                MetricField::conformal(ScalarField::radial_bump(0.25, 1.0)),
                OneFormField::solenoid(0.5),
                Domain::unit_disk(),
            );
            let p = Vec2::new(x, y);
            let v = Vec2::new(vx, vy);
            let pairing = sys.metric.inner(p, sys.lorentz(p, v), v);
            prop_assert!(pairing.abs() < 1e-12);
        }

        #[test]
        fn christoffel_symmetric_in_lower_indices(x in -0.7f64..0.7, y in -0.7f64..0.7) {
            let sys = MagneticSystem::new(
                MetricField::conformal(ScalarField::poly_bump(
                    Poly2::new(vec![(0, 0, 0.2), (2, 1, 0.3)]),
                    1,
                    1.0,
                )),
                OneFormField::zero(),
                Domain::unit_disk(),
            );
            // symmetry in (j,k) is structural (SymMat2); check the values are finite
            let g = sys.christoffel(Vec2::new(x, y)).unwrap();
            for i in 0..2 {
                for k in 0..3 {
                    prop_assert!(g[i].comp(k).is_finite());
                }
            }
        }
    }
}
