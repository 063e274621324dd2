//! Linearized inversion: recover the solenoidal projection `f^s` from
//! boundary ray-transform data by conjugate gradients on the normal
//! equations `S N S f = S I* data` over a disk mesh.

use crate::decomposition::{FemContext, MeshPair};
use crate::flow::FlowSettings;
use crate::geometry::{MagneticSystem, Vec2};
use crate::transform::{
    adjoint_with_table, normal_op, BackTraceTable, BoundaryData, NormalOpts, TensorPair,
};
use crate::Result;

/// Resolution and solver controls for the linearized inversion.
#[derive(Debug, Clone, Copy)]
pub struct InversionSettings {
    pub fiber_n: usize,
    pub chord_quad: usize,
    pub m1_factor: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// CG tolerance of the inner projector solves.
    pub projector_tol: f64,
    pub flow: FlowSettings,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            fiber_n: 32,
            chord_quad: 24,
            m1_factor: 1.1,
            cg_tol: 1e-6,
            cg_max_iter: 500,
            projector_tol: 1e-10,
            flow: FlowSettings::with_tol(1e-9),
        }
    }
}

/// Outcome of an inversion run.
#[derive(Debug)]
pub struct InversionReport {
    /// Reconstructed solenoidal projection (a mesh pair).
    pub reconstruction: MeshPair,
    /// Relative normal-equation residual per iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

fn normal_opts(settings: &InversionSettings) -> NormalOpts {
    NormalOpts {
        m1_factor: settings.m1_factor,
        fiber_n: settings.fiber_n,
        chord_quad: settings.chord_quad,
        settings: settings.flow,
    }
}

/// Apply `N` to a mesh pair by evaluating the direct quadrature at the mesh
/// vertices of the P1 interpolant (zero outside M).
fn apply_normal(
    system: &MagneticSystem,
    ctx: &FemContext,
    f: &MeshPair,
    settings: &InversionSettings,
) -> Result<MeshPair> {
    let analytic = f.to_tensor_pair();
    let out = normal_op(system, &analytic, &ctx.mesh.vertices, &normal_opts(settings))?;
    let mut values = Vec::with_capacity(5 * ctx.mesh.n_vertices());
    for (h, b) in out {
        values.extend_from_slice(&[h.xx, h.xy, h.yy, b.x, b.y]);
    }
    Ok(MeshPair {
        mesh: ctx.mesh.clone(),
        values,
    })
}

/// Recover `f^s` from boundary data `I f` by CG on `S N S f = S I* data`.
pub fn invert_linearized(
    system: &MagneticSystem,
    data: &BoundaryData,
    ctx: &FemContext,
    settings: &InversionSettings,
) -> Result<InversionReport> {
    // right-hand side: S I* data at the mesh vertices
    let table = BackTraceTable::build(
        system,
        &ctx.mesh.vertices,
        settings.fiber_n,
        &settings.flow,
    )?;
    let istar = adjoint_with_table(system, &table, |x, xi| data.interp(system, x, xi));
    let mut b_values = Vec::with_capacity(5 * ctx.mesh.n_vertices());
    for (h, bv) in istar {
        b_values.extend_from_slice(&[h.xx, h.xy, h.yy, bv.x, bv.y]);
    }
    let istar_pair = MeshPair {
        mesh: ctx.mesh.clone(),
        values: b_values,
    };
    let istar_norm = ctx.pair_norm(&istar_pair);
    let b = ctx.project_solenoidal(&istar_pair, settings.projector_tol)?;

    // potential data: its solenoidal content is pure discretization noise,
    // and iterating on it would chase rounding
    if ctx.pair_norm(&b) <= 1e-8 * istar_norm.max(1e-30) {
        return Ok(InversionReport {
            reconstruction: MeshPair::zeros(&ctx.mesh),
            residual_history: vec![0.0],
            converged: true,
        });
    }

    let apply = |f: &MeshPair| -> Result<MeshPair> {
        let sf = ctx.project_solenoidal(f, settings.projector_tol)?;
        let nf = apply_normal(system, ctx, &sf, settings)?;
        ctx.project_solenoidal(&nf, settings.projector_tol)
    };

    let b_norm = ctx.pair_norm(&b).max(1e-300);
    let mut x = MeshPair::zeros(&ctx.mesh);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = ctx.pair_inner(&r, &r);
    let mut history = vec![rr.sqrt() / b_norm];
    let mut best = (x.clone(), rr);
    let mut since_improve = 0usize;
    for _ in 0..settings.cg_max_iter {
        if rr.sqrt() / b_norm <= settings.cg_tol {
            break;
        }
        let ap = apply(&p)?;
        let pap = ctx.pair_inner(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.values.len() {
            x.values[i] += alpha * p.values[i];
            r.values[i] -= alpha * ap.values[i];
        }
        let rr_new = ctx.pair_inner(&r, &r);
        history.push(rr_new.sqrt() / b_norm);
        if rr_new < 0.96 * best.1 {
            since_improve = 0;
        } else {
            since_improve += 1;
        }
        if rr_new < best.1 {
            best = (x.clone(), rr_new);
        }
        // stagnation: residual has stopped contracting (quadrature floor)
        if since_improve > 30 {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..p.values.len() {
            p.values[i] = r.values[i] + beta * p.values[i];
        }
    }
    let converged = best.1.sqrt() / b_norm <= settings.cg_tol;
    let reconstruction = ctx.project_solenoidal(&best.0, settings.projector_tol)?;
    Ok(InversionReport {
        reconstruction,
        residual_history: history,
        converged,
    })
}

/// One record of the stability probe.
#[derive(Debug, Clone, Copy)]
pub struct StabilityRecord {
    /// `‖f^s‖_{L²} / ‖N f‖_{H²-proxy}`.
    pub ratio: f64,
    pub fs_norm: f64,
    pub nf_h2_proxy: f64,
}

/// Diagnostic stability probe: the ratio `‖f^s‖ / ‖Nf‖_{H²-proxy}` with the
/// proxy a discrete Sobolev norm on a Cartesian grid over `M₁`. No hard
/// pass/fail; the probe flags unbounded growth across samples.
pub fn stability_probe(
    system: &MagneticSystem,
    samples: &[TensorPair],
    ctx: &FemContext,
    settings: &InversionSettings,
    grid_n: usize,
) -> Result<Vec<StabilityRecord>> {
    let r1 = system.domain.radius() * settings.m1_factor;
    let h = 2.0 * r1 / (grid_n as f64 - 1.0);
    let mut grid_pts = Vec::new();
    let mut index = vec![usize::MAX; grid_n * grid_n];
    for iy in 0..grid_n {
        for ix in 0..grid_n {
            let p = Vec2::new(-r1 + h * ix as f64, -r1 + h * iy as f64);
            if p.norm() <= r1 * 0.98 {
                index[iy * grid_n + ix] = grid_pts.len();
                grid_pts.push(p);
            }
        }
    }
    samples
        .iter()
        .map(|f| {
            let sf = ctx.project_solenoidal(
                &MeshPair::sample(&ctx.mesh, f),
                settings.projector_tol,
            )?;
            let fs_norm = ctx.pair_norm(&sf);
            let nf = normal_op(system, f, &grid_pts, &normal_opts(settings))?;
            // discrete H² proxy: Σ h²(|u|² + |∇u|² + |∇²u|²) per component
            let comp = |k: usize, gi: usize| -> f64 {
                let (hm, bv) = nf[gi];
                match k {
                    0 => hm.xx,
                    1 => hm.xy,
                    2 => hm.yy,
                    3 => bv.x,
                    _ => bv.y,
                }
            };
            let at = |ix: isize, iy: isize| -> Option<usize> {
                if ix < 0 || iy < 0 || ix >= grid_n as isize || iy >= grid_n as isize {
                    return None;
                }
                let v = index[iy as usize * grid_n + ix as usize];
                (v != usize::MAX).then_some(v)
            };
            let mut acc = 0.0;
            for iy in 0..grid_n as isize {
                for ix in 0..grid_n as isize {
                    let (Some(c), Some(xp), Some(xm), Some(yp), Some(ym)) = (
                        at(ix, iy),
                        at(ix + 1, iy),
                        at(ix - 1, iy),
                        at(ix, iy + 1),
                        at(ix, iy - 1),
                    ) else {
                        continue;
                    };
                    for k in 0..5 {
                        let u = comp(k, c);
                        let ux = (comp(k, xp) - comp(k, xm)) / (2.0 * h);
                        let uy = (comp(k, yp) - comp(k, ym)) / (2.0 * h);
                        let uxx = (comp(k, xp) - 2.0 * u + comp(k, xm)) / (h * h);
                        let uyy = (comp(k, yp) - 2.0 * u + comp(k, ym)) / (h * h);
                        acc += h * h
                            * (u * u + ux * ux + uy * uy + uxx * uxx + uyy * uyy);
                    }
                }
            }
            let nf_h2 = acc.sqrt();
            Ok(StabilityRecord {
                ratio: if nf_h2 > 0.0 { fs_norm / nf_h2 } else { 0.0 },
                fs_norm,
                nf_h2_proxy: nf_h2,
            })
        })
        .collect()
}
