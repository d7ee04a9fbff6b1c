use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use innermatch::fixtures::torus_triangle;
use innermatch::geometry::surface_area;
use innermatch::registration::{energy, path_gradient, register, Status};
use innermatch::shooting::shoot;
use innermatch::statistics::{karcher_mean_with, triangle_areas, triangle_experiment_with, MeanStatus};
use innermatch::{io, DomainMesh, Immersion, TangentField, Topology, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::{CliError, Command, FixtureKind, RunConfig};

type Result<T> = std::result::Result<T, CliError>;

const FD_STEPS: [f64; 9] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 3e-7, 1e-7];

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::Meshgen => meshgen(cfg),
        Command::Fixture {
            kind,
            bend_deg,
            ripples,
            ripple_amplitude,
            angle_deg,
        } => {
            let mut cfg = cfg.clone();
            let b = &mut cfg.bent_cylinder;
            b.bend_deg = bend_deg.unwrap_or(b.bend_deg);
            b.ripples = ripples.unwrap_or(b.ripples);
            b.ripple_amplitude = ripple_amplitude.unwrap_or(b.ripple_amplitude);
            cfg.triangle.angle_deg = angle_deg.unwrap_or(cfg.triangle.angle_deg);
            fixture(*kind, &cfg)
        }
        Command::Register { template, target } => cmd_register(cfg, template, target),
        Command::Shoot { template, velocity } => cmd_shoot(cfg, template, velocity),
        Command::Triangle { a, b, c } => {
            let files = match (a, b, c) {
                (Some(a), Some(b), Some(c)) => Some([a.clone(), b.clone(), c.clone()]),
                _ => None,
            };
            cmd_triangle(cfg, files)
        }
        Command::Mean {
            init,
            shapes,
            mean_tol,
            max_outer,
        } => {
            let mut cfg = cfg.clone();
            cfg.mean.tol = mean_tol.unwrap_or(cfg.mean.tol);
            cfg.mean.max_outer = max_outer.unwrap_or(cfg.mean.max_outer);
            cmd_mean(&cfg, init.as_deref(), shapes)
        }
        Command::Gradcheck {
            template,
            target,
            directions,
        } => {
            let mut cfg = cfg.clone();
            cfg.gradcheck.directions = directions.unwrap_or(cfg.gradcheck.directions);
            gradcheck(&cfg, template.as_deref(), target.as_deref())
        }
    }
}

fn mesh(cfg: &RunConfig, topology: Topology) -> Result<Arc<DomainMesh>> {
    Ok(Arc::new(DomainMesh::build(topology, cfg.mesh.nx, cfg.mesh.ny)?))
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.join(name)
}

/// Writes `<stem>.imesh` and, if enabled, `<stem>.obj`.
fn write_surface(cfg: &RunConfig, stem: &str, q: &Immersion) -> Result<()> {
    io::write_mesh(out(cfg, &format!("{stem}.imesh")), q)?;
    if cfg.export.obj {
        io::write_obj(out(cfg, &format!("{stem}.obj")), q)?;
    }
    Ok(())
}

fn write_summary(cfg: &RunConfig, value: serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&value).expect("summaries are plain JSON");
    text.push('\n');
    io::write_text(out(cfg, "summary.json"), &text)?;
    print!("{text}");
    Ok(())
}

fn meshgen(cfg: &RunConfig) -> Result<()> {
    let m = mesh(cfg, cfg.mesh.topology)?;
    let q = match cfg.mesh.topology {
        Topology::Plane => Immersion::flat(m),
        Topology::Cylinder => cfg.cylinder.build(m)?,
        Topology::Torus => cfg.torus.build(m)?,
    };
    write_surface(cfg, "mesh", &q)?;
    println!(
        "{} {}x{}: {} nodes, {} triangles",
        cfg.mesh.topology,
        cfg.mesh.nx,
        cfg.mesh.ny,
        q.node_count(),
        q.mesh().triangle_count()
    );
    Ok(())
}

fn fixture(kind: FixtureKind, cfg: &RunConfig) -> Result<()> {
    let mut written = Vec::new();
    let mut emit = |stem: &str, q: &Immersion| -> Result<()> {
        write_surface(cfg, stem, q)?;
        written.push((stem.to_string(), q.mesh().triangle_count()));
        Ok(())
    };
    match kind {
        FixtureKind::Cylinder => emit("cylinder", &cfg.cylinder.build(mesh(cfg, Topology::Cylinder)?)?)?,
        FixtureKind::BentCylinder => emit("bent_cylinder", &cfg.bent_cylinder.build(mesh(cfg, Topology::Cylinder)?)?)?,
        FixtureKind::Torus => emit("torus", &cfg.torus.build(mesh(cfg, Topology::Torus)?)?)?,
        FixtureKind::TorusTriangle => {
            let tori = torus_triangle(mesh(cfg, Topology::Torus)?, &cfg.torus, cfg.triangle.angle_deg)?;
            for (name, q) in ["torus_a", "torus_b", "torus_c"].iter().zip(&tori) {
                emit(name, q)?;
            }
        }
        FixtureKind::Vases => {
            let m = mesh(cfg, Topology::Cylinder)?;
            for (k, v) in cfg.vases.iter().enumerate() {
                emit(&format!("vase_{}", k + 1), &v.build(m.clone())?)?;
            }
        }
    }
    for (stem, tris) in written {
        println!("{}: {tris} triangles", out(cfg, &format!("{stem}.imesh")).display());
    }
    Ok(())
}

fn cmd_register(cfg: &RunConfig, template: &Path, target: &Path) -> Result<()> {
    let q0 = io::read_mesh(template)?;
    let qt = io::read_mesh(target)?;
    let res = register(&q0, &qt, &cfg.registration)?;
    io::write_velocity(out(cfg, "u0.ivec"), q0.mesh(), &res.u0_opt)?;
    write_surface(cfg, "end", res.path.end())?;
    io::write_history(out(cfg, "history.csv"), &res.history)?;
    if cfg.export.frames {
        io::write_frames(out(cfg, "frames"), "frame", &res.path)?;
    }
    let last = res.history.last().expect("history has the initial iterate");
    write_summary(
        cfg,
        json!({
            "command": "register",
            "status": res.status,
            "iterations": res.iterations(),
            "energy": {
                "total": res.energies.total,
                "kinetic": res.energies.kinetic,
                "matching": res.energies.matching,
            },
            "l2_error": { "initial": res.history[0].l2_error, "final": res.energies.l2_error },
            "grad_norm": last.grad_norm,
            "path_length": res.path.length(),
            "registration": cfg.registration,
        }),
    )?;
    match res.status {
        Status::Converged => Ok(()),
        s => Err(CliError::NotConverged(format!(
            "registration stopped with status {s:?} after {} iterations",
            res.iterations()
        ))),
    }
}

fn cmd_shoot(cfg: &RunConfig, template: &Path, velocity: &Path) -> Result<()> {
    let q0 = io::read_mesh(template)?;
    let u0 = io::read_velocity(velocity, Some(q0.mesh()))?;
    let path = shoot(&q0, &u0, cfg.registration.steps, cfg.registration.alpha)?;
    write_surface(cfg, "end", path.end())?;
    if cfg.export.frames {
        io::write_frames(out(cfg, "frames"), "frame", &path)?;
    }
    write_summary(
        cfg,
        json!({
            "command": "shoot",
            "steps": path.steps(),
            "alpha": path.alpha(),
            "energy": path.energy(),
            "length": path.length(),
            "energy_drift": path.energy_drift(),
        }),
    )
}

fn cmd_triangle(cfg: &RunConfig, files: Option<[PathBuf; 3]>) -> Result<()> {
    let [a, b, c] = match files {
        Some(f) => [io::read_mesh(&f[0])?, io::read_mesh(&f[1])?, io::read_mesh(&f[2])?],
        None => torus_triangle(mesh(cfg, Topology::Torus)?, &cfg.torus, cfg.triangle.angle_deg)?,
    };
    let rep = triangle_experiment_with(&a, &b, &c, &cfg.registration, cfg.mean.jobs)?;
    let (vertex_areas, midpoint_areas) = triangle_areas(&rep, [&a, &b, &c]);
    for (name, q) in ["mid_ab", "mid_bc", "mid_ca"].iter().zip(&rep.midpoints) {
        write_surface(cfg, name, q)?;
    }
    let mut csv = String::from("vertex,angle_deg,area\n");
    for (k, name) in ["A", "B", "C"].iter().enumerate() {
        let _ = writeln!(csv, "{name},{},{}", rep.angles[k], vertex_areas[k]);
    }
    io::write_text(out(cfg, "angles.csv"), &csv)?;
    let mut csv = String::from("side,length,reverse_length,midpoint_area\n");
    for (k, name) in ["AB", "BC", "CA"].iter().enumerate() {
        let _ = writeln!(
            csv,
            "{name},{},{},{}",
            rep.side_lengths[k], rep.reverse_lengths[k], midpoint_areas[k]
        );
    }
    io::write_text(out(cfg, "sides.csv"), &csv)?;
    let statuses: Vec<Status> = rep.registrations.iter().map(|r| r.status).collect();
    write_summary(
        cfg,
        json!({
            "command": "triangle",
            "angles_deg": rep.angles,
            "angle_sum_deg": rep.angle_sum,
            "side_lengths": rep.side_lengths,
            "reverse_lengths": rep.reverse_lengths,
            "vertex_areas": vertex_areas,
            "midpoint_areas": midpoint_areas,
            "registration_status": statuses,
            "registration": cfg.registration,
        }),
    )?;
    if rep.all_converged() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("triangle registrations ended with {statuses:?}")))
    }
}

fn cmd_mean(cfg: &RunConfig, init: Option<&Path>, shapes: &[PathBuf]) -> Result<()> {
    let shapes: Vec<Immersion> = if shapes.is_empty() {
        let m = mesh(cfg, Topology::Cylinder)?;
        cfg.vases.iter().map(|v| v.build(m.clone())).collect::<innermatch::Result<_>>()?
    } else {
        shapes.iter().map(io::read_mesh).collect::<innermatch::Result<_>>()?
    };
    let init = match init {
        Some(p) => io::read_mesh(p)?,
        None => cfg.cylinder.build(shapes[0].mesh().clone())?,
    };
    let res = karcher_mean_with(&shapes, &init, &cfg.registration, &cfg.mean)?;
    write_surface(cfg, "mean", &res.mean)?;
    for (k, u) in res.per_shape_velocities.iter().enumerate() {
        io::write_velocity(out(cfg, &format!("u_{}.ivec", k + 1)), res.mean.mesh(), u)?;
    }
    let mut csv = String::from("iteration,velocity_norm\n");
    for (k, n) in res.velocity_norms.iter().enumerate() {
        let _ = writeln!(csv, "{},{n}", k + 1);
    }
    io::write_text(out(cfg, "norms.csv"), &csv)?;
    write_summary(
        cfg,
        json!({
            "command": "mean",
            "status": res.status,
            "iterations": res.iterations,
            "velocity_norms": res.velocity_norms,
            "per_shape_l2_error": res.per_shape_l2,
            "mean_area": surface_area(&res.mean),
            "mean_options": cfg.mean,
            "registration": cfg.registration,
        }),
    )?;
    match res.status {
        MeanStatus::Converged => Ok(()),
        MeanStatus::MaxIters => Err(CliError::NotConverged(format!(
            "mean not converged after {} outer iterations (last norm {:e})",
            res.iterations,
            res.velocity_norms.last().copied().unwrap_or(f64::NAN)
        ))),
    }
}

fn random_field(n: usize, rng: &mut impl Rng) -> TangentField {
    TangentField::from_fn(n, |_| {
        Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn gradcheck(cfg: &RunConfig, template: Option<&Path>, target: Option<&Path>) -> Result<()> {
    let q0 = match template {
        Some(p) => io::read_mesh(p)?,
        None => cfg.cylinder.build(mesh(cfg, Topology::Cylinder)?)?,
    };
    let qt = match target {
        Some(p) => io::read_mesh(p)?,
        None => cfg.bent_cylinder.build(q0.mesh().clone())?,
    };
    let reg = &cfg.registration;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = random_field(q0.node_count(), &mut rng).scaled(cfg.gradcheck.velocity_scale);
    let path = shoot(&q0, &u0, reg.steps, reg.alpha)?;
    let g = path_gradient(&path, &qt, reg)?;
    let op = &path.operators()[0];

    let mut table = String::from("direction,h,relative_error\n");
    let mut worst: f64 = 0.0;
    for k in 0..cfg.gradcheck.directions {
        let du = random_field(q0.node_count(), &mut rng);
        let analytic = op.inner_product(&g, &du)?;
        let mut best = f64::INFINITY;
        for h in FD_STEPS {
            let plus = energy(&q0, &(&u0 + &du.scaled(h)), &qt, reg)?.total;
            let minus = energy(&q0, &(&u0 - &du.scaled(h)), &qt, reg)?.total;
            let rel = ((plus - minus) / (2.0 * h) - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE);
            let _ = writeln!(table, "{k},{h:e},{rel:e}");
            best = best.min(rel);
        }
        println!("direction {k}: min relative error {best:.3e}");
        worst = worst.max(best);
    }
    let tol = cfg.gradcheck.tolerance;
    println!(
        "worst {worst:.3e} (tolerance {tol:e}); mesh {} {}x{}, N = {}, alpha = {}, sigma = {}",
        q0.mesh().topology(),
        q0.mesh().nx(),
        q0.mesh().ny(),
        reg.steps,
        reg.alpha,
        reg.sigma
    );
    if worst <= tol {
        Ok(())
    } else {
        eprint!("{table}");
        Err(CliError::GradcheckFailed(format!("worst relative error {worst:e} exceeds {tol:e}")))
    }
}
