//! Curvature-type quantities for the s-injectivity condition, the index
//! form along magnetic geodesics, and numerical principal-symbol order
//! checks for the normal operator.

use rayon::prelude::*;

use crate::flow::{integrate, FlowSettings, GeodesicSolution, Horizon, PhasePoint};
use crate::geometry::{MagneticSystem, ScalarField, SymTensorField, CovectorField, Poly2, SymMat2, Vec2};
use crate::quad::gl_on;
use crate::transform::{normal_op, NormalOpts, TensorPair};
use crate::{Error, Result, DIM};

/// `k_μ(x, ξ)`: in 2D the supremum over unit `η ⊥ ξ` ranges over `η = ±ξ_⊥`
/// of `2K + ⟨Y(η), ξ⟩² + (n+3)|Y(η)|² − 2⟨(∇_η Y)(ξ), η⟩`.
pub fn k_mu(system: &MagneticSystem, x: Vec2, xi: Vec2) -> Result<f64> {
    let k = system.gauss_curvature(x)?;
    let nabla_y = system.nabla_lorentz(x)?;
    let g = system.metric.at(x);
    let perp = system.perp(x, xi);
    let mut best = f64::NEG_INFINITY;
    for eta in [perp, -perp] {
        let y_eta = system.lorentz(x, eta);
        let pair = g.bilin(y_eta, xi);
        let norm2 = g.quad(y_eta);
        // (∇_η Y)(ξ) = η^k (∇_k Y) ξ
        let nyx = nabla_y[0].mul_vec(xi) * eta.x + nabla_y[1].mul_vec(xi) * eta.y;
        let cross = g.bilin(nyx, eta);
        let val = 2.0 * k + pair * pair + (DIM as f64 + 3.0) * norm2 - 2.0 * cross;
        best = best.max(val);
    }
    Ok(best)
}

/// Per-geodesic entry of the curvature report.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicCurvature {
    pub chord_time: f64,
    /// `∫₀^T k_μ⁺ dt` along the geodesic.
    pub k_plus_integral: f64,
    /// `T · ∫ k_μ⁺ dt`.
    pub product: f64,
}

/// Fan-sampled estimate of `k(M, g, α)` with the s-injectivity verdict.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub per_geodesic: Vec<GeodesicCurvature>,
    /// Max of the products over the fan (an estimate, not a certified sup).
    pub k_estimate: f64,
    /// Fan resolution the estimate was computed at.
    pub fan_size: (usize, usize),
    /// `k ≤ 4`, the hypothesis of the quadratic s-injectivity theorem.
    pub verdict_pass: bool,
}

/// Estimate `k(M,g,α) = sup_γ T_γ ∫ k_μ⁺ dt` over a boundary fan.
pub fn k_bound(
    system: &MagneticSystem,
    stations: usize,
    angles: usize,
    settings: &FlowSettings,
) -> Result<CurvatureReport> {
    let rays: Vec<(usize, usize)> = (0..stations)
        .flat_map(|i| (0..angles).map(move |j| (i, j)))
        .collect();
    let per_geodesic: Result<Vec<GeodesicCurvature>> = rays
        .par_iter()
        .map(|&(i, j)| {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / stations as f64;
            let x = system.domain.boundary_point(phi);
            let theta = -1.45 + 2.9 * (j as f64 + 0.5) / angles as f64;
            let start = PhasePoint {
                x,
                xi: system.boundary_dir(x, theta),
            };
            let geo = integrate(system, start, Horizon::UntilExit, settings)?;
            let t = geo.chord_time();
            let mut integral = 0.0;
            for (tt, w) in gl_on(32, 0.0, t) {
                let s = geo.state(tt);
                integral += w * k_mu(system, s.x, s.xi)?.max(0.0);
            }
            Ok(GeodesicCurvature {
                chord_time: t,
                k_plus_integral: integral,
                product: t * integral,
            })
        })
        .collect();
    let per_geodesic = per_geodesic?;
    let k_estimate = per_geodesic
        .iter()
        .map(|g| g.product)
        .fold(0.0f64, f64::max);
    Ok(CurvatureReport {
        per_geodesic,
        k_estimate,
        fan_size: (stations, angles),
        verdict_pass: k_estimate <= 4.0,
    })
}

/// Index form `Ind(Z, Z) = ∫ |Ż|² − ⟨𝒞(Z), Z⟩ − ⟨Y(γ̇), Z⟩² dt` along a
/// host geodesic, for a field given as a coordinate closure of t. The field
/// is projected orthogonal to γ̇ before evaluation.
pub fn index_form<F>(
    system: &MagneticSystem,
    host: &GeodesicSolution,
    z: F,
    quad_order: usize,
) -> Result<f64>
where
    F: Fn(f64) -> Vec2,
{
    let t_end = host.chord_time();
    let project = |t: f64| -> Result<Vec2> {
        let s = host.state(t);
        let g = system.metric.at(s.x);
        let zv = z(t);
        Ok(zv - s.xi * g.bilin(zv, s.xi))
    };
    let fd = 1e-5 * t_end.max(1e-3);
    let mut total = 0.0;
    for (t, w) in gl_on(quad_order, 0.0, t_end) {
        let s = host.state(t);
        let g = system.metric.at(s.x);
        let zt = project(t)?;
        // covariant derivative along γ by centered differences
        let zp = project(t + fd)?;
        let zm = project(t - fd)?;
        let gamma = system.christoffel(s.x)?;
        let zdot = (zp - zm) / (2.0 * fd)
            + Vec2::new(gamma[0].bilin(s.xi, zt), gamma[1].bilin(s.xi, zt));
        // 𝒞(Z) = R(γ̇,Z)γ̇ − Y(Ż) − (∇_Z Y)(γ̇)
        let k = system.gauss_curvature(s.x)?;
        let r_term = (zt * g.quad(s.xi) - s.xi * g.bilin(zt, s.xi)) * k;
        let nabla_y = system.nabla_lorentz(s.x)?;
        let nzy = nabla_y[0].mul_vec(s.xi) * zt.x + nabla_y[1].mul_vec(s.xi) * zt.y;
        let c_z = r_term - system.lorentz(s.x, zdot) - nzy;
        let y_gamma = system.lorentz(s.x, s.xi);
        total += w * (g.quad(zdot) - g.bilin(c_z, zt) - g.bilin(y_gamma, zt).powi(2));
    }
    Ok(total)
}

/// Fitted decay slopes of the normal-operator blocks under oscillatory
/// inputs: diagonal blocks are order −1 ΨDOs, off-diagonal blocks have
/// vanishing principal symbol (order ≤ −2).
#[derive(Debug, Clone)]
pub struct SymbolReport {
    pub frequencies: Vec<f64>,
    /// Response magnitudes per frequency for (N22, N12, N21, N11).
    pub magnitudes: [Vec<f64>; 4],
    /// Log–log slopes per block, same order.
    pub slopes: [f64; 4],
    /// Off-diagonal blocks whose response sits at the quadrature noise
    /// floor relative to their diagonal partner. For reversible flows the
    /// off-diagonal blocks vanish identically by parity, so no decay order
    /// can be fitted — the vanishing itself is the stronger statement.
    pub below_noise: [bool; 4],
}

/// Controls for [`symbol_sweep`].
#[derive(Debug, Clone)]
pub struct SymbolSweepOpts {
    pub direction: Vec2,
    pub frequencies: Vec<f64>,
    pub fiber_n: usize,
    pub chord_quad: usize,
    pub m1_factor: f64,
    pub settings: FlowSettings,
}

impl Default for SymbolSweepOpts {
    fn default() -> Self {
        SymbolSweepOpts {
            direction: Vec2::new(1.0, 0.0),
            frequencies: vec![8.0, 16.0, 32.0],
            fiber_n: 384,
            chord_quad: 64,
            m1_factor: 1.1,
            settings: FlowSettings::with_tol(1e-9),
        }
    }
}

fn fit_slope(freqs: &[f64], mags: &[f64]) -> f64 {
    let n = freqs.len() as f64;
    let xs: Vec<f64> = freqs.iter().map(|f| f.ln()).collect();
    let ys: Vec<f64> = mags.iter().map(|m| m.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Sweep oscillatory test pairs `e^{iλ x·ξ₀} × bump` through the normal
/// operator and fit the decay order of each block.
pub fn symbol_sweep(system: &MagneticSystem, opts: &SymbolSweepOpts) -> Result<SymbolReport> {
    let max_freq = opts.frequencies.iter().cloned().fold(0.0, f64::max);
    if (opts.fiber_n as f64) < 8.0 * max_freq {
        return Err(Error::Resolution(format!(
            "fiber resolution {} too coarse for frequency {max_freq}",
            opts.fiber_n
        )));
    }
    let xi0 = opts.direction.normalized();
    let eta = xi0.rot90();
    // solenoidal polarizations at frequency ξ₀ maximize the response
    let h_pol = SymMat2::new(eta.x * eta.x, eta.x * eta.y, eta.y * eta.y);
    let bump = ScalarField::poly_bump(Poly2::constant(1.0), 3, 1.0);
    let eval_points: Vec<Vec2> = (0..8)
        .map(|k| Vec2::from_angle(2.0 * std::f64::consts::PI * k as f64 / 8.0) * 0.3)
        .chain(std::iter::once(Vec2::ZERO))
        .collect();
    let nopts = NormalOpts {
        m1_factor: opts.m1_factor,
        fiber_n: opts.fiber_n,
        chord_quad: opts.chord_quad,
        settings: opts.settings,
    };

    let mut magnitudes: [Vec<f64>; 4] = Default::default();
    for &freq in &opts.frequencies {
        let make_h = |phase: f64| -> TensorPair {
            let b = bump.clone();
            TensorPair::new(
                SymTensorField::custom(
                    move |p: Vec2| h_pol.scale(b.value(p) * (freq * p.dot(xi0) + phase).cos()),
                    |_| [SymMat2::ZERO, SymMat2::ZERO],
                ),
                CovectorField::zero(),
            )
            .supported_in(1.0)
        };
        let make_b = |phase: f64| -> TensorPair {
            let b = bump.clone();
            TensorPair::new(
                SymTensorField::zero(),
                CovectorField::custom(
                    move |p: Vec2| eta * (b.value(p) * (freq * p.dot(xi0) + phase).cos()),
                    |_| crate::geometry::Mat2::default(),
                ),
            )
            .supported_in(1.0)
        };
        // cos and sin quadratures of both input polarizations
        let outs: Vec<Vec<(SymMat2, Vec2)>> = [
            make_h(0.0),
            make_h(-std::f64::consts::FRAC_PI_2),
            make_b(0.0),
            make_b(-std::f64::consts::FRAC_PI_2),
        ]
        .par_iter()
        .map(|f| normal_op(system, f, &eval_points, &nopts))
        .collect::<Result<_>>()?;
        let mag = |re: &[(SymMat2, Vec2)], im: &[(SymMat2, Vec2)], h_block: bool| -> f64 {
            let mut acc = 0.0;
            for (r, i) in re.iter().zip(im) {
                if h_block {
                    for k in 0..3 {
                        acc += r.0.comp(k).powi(2) + i.0.comp(k).powi(2);
                    }
                } else {
                    acc += r.1.dot(r.1) + i.1.dot(i.1);
                }
            }
            (acc / re.len() as f64).sqrt()
        };
        // input h: h-output = N22, β-output = N12
        magnitudes[0].push(mag(&outs[0], &outs[1], true));
        magnitudes[1].push(mag(&outs[0], &outs[1], false));
        // input β: h-output = N21, β-output = N11
        magnitudes[2].push(mag(&outs[2], &outs[3], true));
        magnitudes[3].push(mag(&outs[2], &outs[3], false));
    }
    let slopes = std::array::from_fn(|k| fit_slope(&opts.frequencies, &magnitudes[k]));
    // N12 pairs with N22 (same h input); N21 with N11
    let mut below_noise = [false; 4];
    for (off, diag) in [(1usize, 0usize), (2, 3)] {
        below_noise[off] = magnitudes[off]
            .iter()
            .zip(&magnitudes[diag])
            .all(|(o, d)| *o <= 1e-5 * d);
    }
    Ok(SymbolReport {
        frequencies: opts.frequencies.clone(),
        magnitudes,
        slopes,
        below_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_gl;
    use crate::geometry::{euclidean_disk, Domain, MetricField, OneFormField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn k_mu_constant_lambda_closed_form() {
        // K = 0, ⟨Y(η),ξ⟩² = λ², (n+3)|Y(η)|² = 5λ², ∇Y = 0 → k_μ = 6λ²
        for lambda in [0.0, 0.3, 0.7] {
            let sys = euclidean_disk(lambda);
            for (x, xi) in [
                (Vec2::new(0.2, 0.1), Vec2::new(1.0, 0.0)),
                (Vec2::new(-0.4, 0.3), Vec2::new(0.6, 0.8)),
            ] {
                let v = k_mu(&sys, x, xi).unwrap();
                assert!(
                    (v - 6.0 * lambda * lambda).abs() < 1e-9,
                    "λ = {lambda}: k_μ = {v}"
                );
            }
        }
    }

    #[test]
    fn k_mu_flip_invariance_and_curvature_term() {
        let sys = euclidean_disk(0.4);
        let x = Vec2::new(0.3, -0.2);
        let xi = Vec2::new(0.8, 0.6).normalized();
        let a = k_mu(&sys, x, xi).unwrap();
        let b = k_mu(&sys, x, -xi).unwrap();
        assert!((a - b).abs() < 1e-12);

        // constant-curvature conformal model: k_μ = 2κ when Y = 0
        let kappa = 1.5;
        let sysc = MagneticSystem::new(
            MetricField::conformal(ScalarField::log_const_curvature(kappa)),
            OneFormField::zero(),
            Domain::unit_disk(),
        );
        let v = k_mu(&sysc, Vec2::new(0.25, 0.1), Vec2::new(0.0, 1.0)).unwrap();
        assert!((v - 2.0 * kappa).abs() < 1e-4, "k_μ = {v}, expected {}", 2.0 * kappa);
    }

    #[test]
    fn k_bound_verdicts() {
        let settings = FlowSettings::default();
        let r0 = k_bound(&euclidean_disk(0.0), 12, 8, &settings).unwrap();
        assert!(r0.k_estimate.abs() < 1e-10);
        assert!(r0.verdict_pass);

        let r3 = k_bound(&euclidean_disk(0.3), 12, 8, &settings).unwrap();
        assert!(r3.verdict_pass, "k = {}", r3.k_estimate);
        // closed form: 6λ²·T² with T ≤ max chord ≈ 2.03
        assert!(r3.k_estimate < 2.7, "k = {}", r3.k_estimate);

        // convex but hypothesis-violating family
        let r95 = k_bound(&euclidean_disk(0.95), 12, 8, &settings).unwrap();
        assert!(!r95.verdict_pass, "k = {}", r95.k_estimate);
        assert!(euclidean_disk(0.95).min_convexity_margin(64).unwrap() > 0.0);
    }

    #[test]
    fn index_form_basics() {
        let sys = euclidean_disk(0.0);
        let start = PhasePoint::unit(&sys, Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        let host = integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
        let t_end = host.chord_time();

        // Z = 0
        let zero = index_form(&sys, &host, |_| Vec2::ZERO, 48).unwrap();
        assert_eq!(zero, 0.0);

        // Euclidean: Ind = ∫ b'² for Z = b(t)·n̂
        let b = move |t: f64| (std::f64::consts::PI * t / t_end).sin();
        let db = move |t: f64| {
            (std::f64::consts::PI / t_end) * (std::f64::consts::PI * t / t_end).cos()
        };
        let ind = index_form(&sys, &host, |t| Vec2::new(0.0, b(t)), 48).unwrap();
        let dirichlet = integrate_gl(48, 0.0, t_end, |t| db(t) * db(t));
        assert!((ind - dirichlet).abs() < 1e-6, "{ind} vs {dirichlet}");

        // quadratic scaling
        let ind2 = index_form(&sys, &host, |t| Vec2::new(0.0, 3.0 * b(t)), 48).unwrap();
        assert!((ind2 - 9.0 * ind).abs() <= 1e-10 * ind2.abs().max(1.0));
    }

    #[test]
    fn index_positive_on_simple_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for lambda in [0.0, 0.3] {
            let sys = euclidean_disk(lambda);
            for _ in 0..15 {
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let theta = rng.gen_range(-1.2..1.2);
                let x = sys.domain.boundary_point(phi);
                let start = PhasePoint {
                    x,
                    xi: sys.boundary_dir(x, theta),
                };
                let host =
                    integrate(&sys, start, Horizon::UntilExit, &FlowSettings::default()).unwrap();
                let t_end = host.chord_time();
                let (a, bb, c): (f64, f64, f64) = (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let sys2 = sys.clone();
                let host2 = host.clone();
                let z = move |t: f64| {
                    let s = host2.state(t);
                    let env = (std::f64::consts::PI * t / t_end).sin();
                    let wob = a + bb * (2.0 * std::f64::consts::PI * t / t_end).cos()
                        + c * (2.0 * std::f64::consts::PI * t / t_end).sin();
                    sys2.perp(s.x, s.xi) * (env * wob)
                };
                let ind = index_form(&sys, &host, z, 48).unwrap();
                assert!(ind > 0.0, "λ = {lambda}: Ind = {ind}");
            }
        }
    }

    #[test]
    fn symbol_orders_match_psdo_calculus() {
        let opts = SymbolSweepOpts {
            fiber_n: 288,
            chord_quad: 48,
            frequencies: vec![8.0, 16.0, 32.0],
            ..Default::default()
        };
        let rep = symbol_sweep(&euclidean_disk(0.3), &opts).unwrap();
        let [n22, n12, n21, n11] = rep.slopes;
        assert!((-1.3..=-0.7).contains(&n22), "N22 slope {n22}");
        assert!((-1.3..=-0.7).contains(&n11), "N11 slope {n11}");
        assert!(n12 <= -1.7, "N12 slope {n12}");
        assert!(n21 <= -1.7, "N21 slope {n21}");

        // reversible case: the off-diagonal blocks vanish by parity and are
        // reported as noise-floor rather than slope-fitted
        let rep0 = symbol_sweep(&euclidean_disk(0.0), &opts).unwrap();
        assert!(rep0.below_noise[1] && rep0.below_noise[2], "{:?}", rep0.below_noise);
        assert!((-1.3..=-0.7).contains(&rep0.slopes[0]));
        assert!((-1.3..=-0.7).contains(&rep0.slopes[3]));
    }

    #[test]
    fn symbol_sweep_rejects_low_resolution() {
        let opts = SymbolSweepOpts {
            fiber_n: 64,
            ..Default::default()
        };
        assert!(matches!(
            symbol_sweep(&euclidean_disk(0.0), &opts),
            Err(Error::Resolution(_))
        ));
    }
}
