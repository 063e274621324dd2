//! `magray` — experiment runner: parses system configs, dispatches
//! subcommands, emits CSV/JSON for plotting, and runs the verification
//! suite. Exit codes: 0 pass, 1 check failure, 2 usage/config error.

mod checks;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magray::boundary::{boundary_action, scattering, reversibility_defect, ShootingSettings};
use magray::config::ExperimentConfig;
use magray::decomposition::{DiskMesh, FemContext, MeshPair};
use magray::flow::{integrate, magnetic_exp, Horizon, PhasePoint};
use magray::geometry::Vec2;
use magray::inversion::{invert_linearized, InversionSettings};
use magray::transform::{
    adjoint, ray_transform, BoundaryData, Fan, PotentialField, TensorPair,
};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "magray", about = "magnetic geodesic flow laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// Path to the experiment configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a fan of magnetic geodesics and dump trajectories as CSV.
    Shoot {
        #[command(flatten)]
        common: ConfigArg,
        /// Number of fan rays to export.
        #[arg(long, default_value_t = 12)]
        rays: usize,
        /// Trajectory samples per ray.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Tabulate the scattering relation over the fan.
    Scatter {
        #[command(flatten)]
        common: ConfigArg,
    },
    /// Mañé action potential between random boundary pairs.
    Action {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
    /// Reversibility residuals over the fan.
    Reverse {
        #[command(flatten)]
        common: ConfigArg,
    },
    /// Ray-transform a seeded test pair and write boundary data CSV.
    Transform {
        #[command(flatten)]
        common: ConfigArg,
        /// Input pair family: random-bump | potential-bump.
        #[arg(long, default_value = "random-bump")]
        input: String,
    },
    /// Apply the adjoint to boundary data read from CSV.
    Adjoint {
        #[command(flatten)]
        common: ConfigArg,
        /// Boundary data CSV produced by `transform`.
        #[arg(long)]
        data: PathBuf,
    },
    /// Linearized inversion of boundary data; writes fields and a report.
    Invert {
        #[command(flatten)]
        common: ConfigArg,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the verification suite.
    Verify {
        #[command(flatten)]
        common: ConfigArg,
        /// Comma-separated subset of checks (default: all).
        #[arg(long)]
        checks: Option<String>,
    },
    /// Demonstrations of analytic facts (no assertions).
    Demo {
        #[command(subcommand)]
        which: DemoCommand,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    /// FD second differences of the magnetic exponential in tv-coordinates:
    /// the two ray directions disagree by 2|Y(v)| unless Ω = 0, exhibiting
    /// the C² failure of exp^μ at the origin.
    ExpC2 {
        #[command(flatten)]
        common: ConfigArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &ConfigArg) -> magray::Result<(ExperimentConfig, magray::geometry::MagneticSystem)> {
    let text = fs::read_to_string(&common.config)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let sys = cfg.system.build()?;
    fs::create_dir_all(&common.out)?;
    Ok((cfg, sys))
}

fn run(cli: Cli) -> magray::Result<ExitCode> {
    match cli.command {
        Command::Shoot {
            common,
            rays,
            samples,
        } => {
            let (cfg, sys) = load(&common)?;
            let settings = cfg.flow_settings();
            for k in 0..rays {
                let phi = std::f64::consts::TAU * k as f64 / rays as f64;
                let x = sys.domain.boundary_point(phi);
                let theta = -1.2 + 2.4 * (k as f64 + 0.5) / rays as f64;
                let start = PhasePoint {
                    x,
                    xi: sys.boundary_dir(x, theta),
                };
                let geo = integrate(&sys, start, Horizon::UntilExit, &settings)?;
                let path = common.out.join(format!("trajectory_{k:03}.csv"));
                fs::write(path, geo.to_csv(samples))?;
            }
            println!("wrote {rays} trajectories to {}", common.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Scatter { common } => {
            let (cfg, sys) = load(&common)?;
            let settings = cfg.flow_settings();
            let fan = Fan::new(&sys, cfg.fan.stations, cfg.fan.angles);
            let mut csv = String::from("arc_in,theta_in,arc_out,theta_out,time,grazing\n");
            for i in 0..fan.stations.len() {
                for j in 0..fan.angles.len() {
                    let ray = fan.ray(&sys, i, j);
                    let rec = scattering(&sys, ray.x, ray.xi, &settings)?;
                    csv.push_str(&format!(
                        "{:.10},{:.10},{:.10},{:.10},{:.10},{}\n",
                        fan.stations[i].arc,
                        fan.angles[j].theta,
                        sys.domain.boundary_arc(rec.exit.x),
                        sys.boundary_angle_from_normal(rec.exit.x, rec.exit.xi),
                        rec.chord_time,
                        rec.grazing as u8
                    ));
                }
            }
            let path = common.out.join("scatter.csv");
            fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Action { common, pairs } => {
            let (cfg, sys) = load(&common)?;
            let settings = cfg.flow_settings();
            let shoot = ShootingSettings::default();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let l = sys.domain.boundary_len();
            let mut csv = String::from("arc_x,arc_y,action,time,shooting_residual\n");
            let mut done = 0usize;
            while done < pairs {
                let sx: f64 = rng.gen_range(0.0..l);
                let sy: f64 = rng.gen_range(0.0..l);
                if sys.domain.wrap_arc(sx - sy).abs() < 0.05 * l {
                    continue;
                }
                let x = sys.domain.boundary_point_at_arc(sx);
                let y = sys.domain.boundary_point_at_arc(sy);
                let a = boundary_action(&sys, x, y, &settings, &shoot)?;
                csv.push_str(&format!(
                    "{:.10},{:.10},{:.12},{:.12},{:.3e}\n",
                    sx, sy, a.action, a.time, a.shooting_residual
                ));
                done += 1;
            }
            let path = common.out.join("action.csv");
            fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Reverse { common } => {
            let (cfg, sys) = load(&common)?;
            let settings = cfg.flow_settings();
            let mut csv = String::from("arc,theta,residual\n");
            let mut max = 0.0f64;
            for i in 0..cfg.fan.stations.min(64) {
                let phi = std::f64::consts::TAU * i as f64 / cfg.fan.stations.min(64) as f64;
                let x = sys.domain.boundary_point(phi);
                for k in 0..cfg.fan.angles.min(16) {
                    let theta = -1.3 + 2.6 * (k as f64 + 0.5) / cfg.fan.angles.min(16) as f64;
                    let xi = sys.boundary_dir(x, theta);
                    let r = reversibility_defect(&sys, x, xi, &settings)?;
                    max = max.max(r);
                    csv.push_str(&format!(
                        "{:.10},{:.10},{:.6e}\n",
                        sys.domain.boundary_arc(x),
                        theta,
                        r
                    ));
                }
            }
            let path = common.out.join("reverse.csv");
            fs::write(&path, csv)?;
            println!("max residual {max:.6e}; wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Transform { common, input } => {
            let (cfg, sys) = load(&common)?;
            let settings = cfg.flow_settings();
            let fan = Arc::new(Fan::new(&sys, cfg.fan.stations, cfg.fan.angles));
            let f = seeded_pair(&sys, &input, cfg.seed)?;
            let data = ray_transform(&sys, &f, &fan, &settings, cfg.tolerances.chord_quad)?;
            let path = common.out.join("boundary_data.csv");
            fs::write(&path, data.to_csv())?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Adjoint { common, data } => {
            let (cfg, sys) = load(&common)?;
            let settings = cfg.flow_settings();
            let fan = Arc::new(Fan::new(&sys, cfg.fan.stations, cfg.fan.angles));
            let data = read_boundary_csv(&fan, &data)?;
            let mesh = DiskMesh::new(sys.domain.radius(), cfg.mesh.rings.min(24));
            let out = adjoint(
                &sys,
                |x, xi| data.interp(&sys, x, xi),
                &mesh.vertices,
                32,
                &settings,
            )?;
            let json = pair_values_json(&mesh, &out);
            let path = common.out.join("adjoint.json");
            fs::write(&path, serde_json::to_string_pretty(&json)?)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Invert { common, data } => {
            let (cfg, sys) = load(&common)?;
            let fan = Arc::new(Fan::new(&sys, cfg.fan.stations, cfg.fan.angles));
            let data = read_boundary_csv(&fan, &data)?;
            let rings = cfg.mesh.rings.min(26);
            let mesh = DiskMesh::new(sys.domain.radius(), rings);
            let ctx = FemContext::new(&sys, &mesh)?;
            let inv = InversionSettings::default();
            let rep = invert_linearized(&sys, &data, &ctx, &inv)?;
            let json = serde_json::json!({
                "converged": rep.converged,
                "iterations": rep.residual_history.len() - 1,
                "final_residual": rep.residual_history.last(),
                "residual_history": rep.residual_history,
                "mesh_rings": rings,
                "reconstruction": mesh_pair_json(&rep.reconstruction),
            });
            let path = common.out.join("inversion.json");
            fs::write(&path, serde_json::to_string_pretty(&json)?)?;
            let mut diag = String::from("iteration,relative_residual\n");
            for (i, r) in rep.residual_history.iter().enumerate() {
                diag.push_str(&format!("{i},{r:.6e}\n"));
            }
            fs::write(common.out.join("projector_diagnostics.csv"), diag)?;
            println!(
                "inversion {} after {} iterations; wrote {}",
                if rep.converged { "converged" } else { "stagnated" },
                rep.residual_history.len() - 1,
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { common, checks } => {
            let (cfg, sys) = load(&common)?;
            let selected: Option<Vec<String>> = checks
                .map(|s| s.split(',').map(|c| c.trim().to_string()).collect());
            let records = checks::run_suite(&cfg, &sys, selected.as_deref())?;
            let path = common.out.join("verify_report.json");
            fs::write(&path, serde_json::to_string_pretty(&records)?)?;
            let mut all_pass = true;
            for r in &records {
                println!(
                    "{:<14} {}  residual {:.3e} (tolerance {:.1e})  {}",
                    r.name,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.residual,
                    r.tolerance,
                    r.details
                );
                all_pass &= r.pass;
            }
            println!("report: {}", path.display());
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Demo { which } => match which {
            DemoCommand::ExpC2 { common } => {
                let (cfg, sys) = load(&common)?;
                let settings = cfg.flow_settings();
                let x = Vec2::new(0.15, -0.1);
                let v = sys.unit_vector(x, Vec2::new(1.0, 0.4));
                let y = sys.lorentz(x, v);
                println!("second differences of exp^μ_x(t u) along the rays u = ±v:");
                println!("{:>10} {:>24} {:>24} {:>12}", "step", "D along +v", "D along −v", "|gap|");
                for k in 1..=6 {
                    let s = 0.2 / 2f64.powi(k);
                    let e = |t: f64, dir: Vec2| magnetic_exp(&sys, x, t, dir, &settings).unwrap();
                    let dp = (e(2.0 * s, v) - e(s, v) * 2.0 + x) / (s * s);
                    let dm = (e(2.0 * s, -v) - e(s, -v) * 2.0 + x) / (s * s);
                    println!(
                        "{:>10.5} ({:>10.6},{:>10.6}) ({:>10.6},{:>10.6}) {:>12.6}",
                        s,
                        dp.x,
                        dp.y,
                        dm.x,
                        dm.y,
                        (dp - dm).norm()
                    );
                }
                println!(
                    "limit gap is 2|Y(v)| = {:.6}; nonzero iff Ω ≠ 0 (exp^μ is C² iff Ω = 0)",
                    2.0 * sys.metric.norm(x, y)
                );
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

/// Seeded test pair families for `transform`.
fn seeded_pair(
    sys: &magray::geometry::MagneticSystem,
    family: &str,
    seed: u64,
) -> magray::Result<TensorPair> {
    use magray::geometry::{CovectorField, Poly2, ScalarField, SymTensorField};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = sys.domain.radius();
    let mut coeff = |amp: f64| -> Poly2 {
        Poly2::new(vec![
            (0, 0, rng.gen_range(-amp..amp)),
            (1, 0, rng.gen_range(-amp..amp)),
            (0, 1, rng.gen_range(-amp..amp)),
        ])
    };
    match family {
        "random-bump" => {
            let h = SymTensorField::from_components(
                ScalarField::poly_bump(coeff(1.0), 3, r),
                ScalarField::poly_bump(coeff(1.0), 3, r),
                ScalarField::poly_bump(coeff(1.0), 3, r),
            );
            let beta = CovectorField::from_components(
                ScalarField::poly_bump(coeff(1.0), 3, r),
                ScalarField::poly_bump(coeff(1.0), 3, r),
            );
            Ok(TensorPair::new(h, beta).supported_in(r))
        }
        "potential-bump" => {
            let w = PotentialField::new(
                CovectorField::from_components(
                    ScalarField::poly_bump(coeff(0.8), 2, r),
                    ScalarField::poly_bump(coeff(0.8), 2, r),
                ),
                ScalarField::poly_bump(coeff(0.8), 2, r),
            );
            Ok(w.differential(sys).supported_in(r))
        }
        other => Err(magray::Error::Config {
            path: "--input".into(),
            message: format!("unknown pair family `{other}`"),
        }),
    }
}

/// Read boundary data written by `transform` back onto the config's fan.
fn read_boundary_csv(fan: &Arc<Fan>, path: &PathBuf) -> magray::Result<BoundaryData> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(magray::Error::Config {
                path: format!("{}:{}", path.display(), ln + 1),
                message: "expected 4 columns: arc,theta,weight,value".into(),
            });
        }
        values.push(cols[3].trim().parse::<f64>().map_err(|e| magray::Error::Config {
            path: format!("{}:{}", path.display(), ln + 1),
            message: e.to_string(),
        })?);
    }
    if values.len() != fan.n_rays() {
        return Err(magray::Error::Config {
            path: path.display().to_string(),
            message: format!(
                "data has {} rays but the config fan has {}",
                values.len(),
                fan.n_rays()
            ),
        });
    }
    Ok(BoundaryData {
        fan: fan.clone(),
        values,
    })
}

fn mesh_pair_json(pair: &MeshPair) -> serde_json::Value {
    let mesh = &pair.mesh;
    serde_json::json!({
        "vertices": mesh.vertices.iter().map(|v| [v.x, v.y]).collect::<Vec<_>>(),
        "h": (0..mesh.n_vertices())
            .map(|v| {
                let h = pair.h_at_vertex(v);
                [h.xx, h.xy, h.yy]
            })
            .collect::<Vec<_>>(),
        "beta": (0..mesh.n_vertices())
            .map(|v| {
                let b = pair.beta_at_vertex(v);
                [b.x, b.y]
            })
            .collect::<Vec<_>>(),
    })
}

fn pair_values_json(
    mesh: &Arc<DiskMesh>,
    values: &[(magray::geometry::SymMat2, Vec2)],
) -> serde_json::Value {
    serde_json::json!({
        "vertices": mesh.vertices.iter().map(|v| [v.x, v.y]).collect::<Vec<_>>(),
        "h": values.iter().map(|(h, _)| [h.xx, h.xy, h.yy]).collect::<Vec<_>>(),
        "beta": values.iter().map(|(_, b)| [b.x, b.y]).collect::<Vec<_>>(),
    })
}
