//! File formats.
//!
//! Native meshes (`IMESH 1`) and velocity fields (`IVEC 1`) share one layout:
//!
//! ```text
//! IMESH 1
//! <topology> <nx> <ny>
//! <node_count> <tri_count>
//! v <x> <y> <z>          (node_count lines)
//! f <i> <j> <k>          (tri_count lines, 0-based)
//! ```
//!
//! Numbers are written in shortest round-trip form, so a write/read cycle is
//! bit-exact. OBJ export uses 1-based faces.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Immersion, TangentField, Vec3};
use crate::mesh::{DomainMesh, Topology};
use crate::registration::IterationRecord;
use crate::shooting::GeodesicPath;

pub const MESH_MAGIC: &str = "IMESH";
pub const VELOCITY_MAGIC: &str = "IVEC";
const VERSION: &str = "1";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn native_to_string(magic: &str, mesh: &DomainMesh, values: &[Vec3]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{magic} {VERSION}");
    let _ = writeln!(s, "{} {} {}", mesh.topology(), mesh.nx(), mesh.ny());
    let _ = writeln!(s, "{} {}", mesh.node_count(), mesh.triangle_count());
    for v in values {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0], t[1], t[2]);
    }
    s
}

/// Parses the native layout, checking the magic and that the face list is
/// the one generated for the header's mesh.
fn parse_native(text: &str, magic: &str, path: &Path) -> Result<(Arc<DomainMesh>, Vec<Vec3>)> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));
    fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str, path: &Path) -> Result<T> {
        tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {what}"),
        })
    }

    let (ln, header) = next("header")?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some(magic) || tok.next() != Some(VERSION) || tok.next().is_some() {
        return Err(err(ln, format!("expected header `{magic} {VERSION}`, found `{header}`")));
    }

    let (ln, l) = next("topology line")?;
    let mut tok = l.split_whitespace();
    let topology: Topology = tok
        .next()
        .ok_or_else(|| err(ln, "missing topology".into()))?
        .parse()
        .map_err(|e: Error| err(ln, e.to_string()))?;
    let nx: usize = num(tok.next(), ln, "nx", path)?;
    let ny: usize = num(tok.next(), ln, "ny", path)?;
    let mesh = DomainMesh::build(topology, nx, ny).map_err(|e| err(ln, e.to_string()))?;

    let (ln, l) = next("counts line")?;
    let mut tok = l.split_whitespace();
    let nodes: usize = num(tok.next(), ln, "node count", path)?;
    let tris: usize = num(tok.next(), ln, "triangle count", path)?;
    if nodes != mesh.node_count() || tris != mesh.triangle_count() {
        return Err(err(
            ln,
            format!(
                "counts {nodes} {tris} do not match a {topology} {nx}x{ny} mesh ({} {})",
                mesh.node_count(),
                mesh.triangle_count()
            ),
        ));
    }

    let mut values = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        let (ln, l) = next("a `v` line")?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some("v") {
            return Err(err(ln, format!("expected a `v` line, found `{l}`")));
        }
        let x: f64 = num(tok.next(), ln, "x", path)?;
        let y: f64 = num(tok.next(), ln, "y", path)?;
        let z: f64 = num(tok.next(), ln, "z", path)?;
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(err(ln, "non-finite coordinate".into()));
        }
        values.push(Vec3::new(x, y, z));
    }
    for expected in mesh.triangles() {
        let (ln, l) = next("an `f` line")?;
        let mut tok = l.split_whitespace();
        if tok.next() != Some("f") {
            return Err(err(ln, format!("expected an `f` line, found `{l}`")));
        }
        let face: [usize; 3] = [
            num(tok.next(), ln, "index", path)?,
            num(tok.next(), ln, "index", path)?,
            num(tok.next(), ln, "index", path)?,
        ];
        if &face != expected {
            return Err(err(
                ln,
                format!("face {face:?} differs from the structured mesh ({expected:?})"),
            ));
        }
    }
    if let Some((ln, l)) = lines.next() {
        return Err(err(ln, format!("trailing content `{l}`")));
    }
    Ok((Arc::new(mesh), values))
}

pub fn mesh_to_string(q: &Immersion) -> String {
    native_to_string(MESH_MAGIC, q.mesh(), q.coords())
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Immersion> {
    let (mesh, coords) = parse_native(text, MESH_MAGIC, path)?;
    Immersion::new(mesh, coords)
}

pub fn write_mesh(path: impl AsRef<Path>, q: &Immersion) -> Result<()> {
    write_file(path.as_ref(), &mesh_to_string(q))
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Immersion> {
    let path = path.as_ref();
    parse_mesh(&read_file(path)?, path)
}

pub fn velocity_to_string(mesh: &DomainMesh, u: &TangentField) -> String {
    native_to_string(VELOCITY_MAGIC, mesh, u.values())
}

/// Parses a velocity file; with `expected`, its mesh must be compatible.
pub fn parse_velocity(text: &str, path: &Path, expected: Option<&DomainMesh>) -> Result<TangentField> {
    let (mesh, values) = parse_native(text, VELOCITY_MAGIC, path)?;
    if let Some(e) = expected {
        if !e.is_compatible(&mesh) {
            return Err(Error::MeshMismatch(format!(
                "{}: velocity is on a {} {}x{} mesh, expected {} {}x{}",
                path.display(),
                mesh.topology(),
                mesh.nx(),
                mesh.ny(),
                e.topology(),
                e.nx(),
                e.ny()
            )));
        }
    }
    Ok(TangentField(values))
}

pub fn write_velocity(path: impl AsRef<Path>, mesh: &DomainMesh, u: &TangentField) -> Result<()> {
    u.check_len(mesh.node_count())?;
    write_file(path.as_ref(), &velocity_to_string(mesh, u))
}

pub fn read_velocity(path: impl AsRef<Path>, expected: Option<&DomainMesh>) -> Result<TangentField> {
    let path = path.as_ref();
    parse_velocity(&read_file(path)?, path, expected)
}

pub fn obj_to_string(q: &Immersion) -> String {
    let mut s = String::new();
    for v in q.coords() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in q.mesh().triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

pub fn write_obj(path: impl AsRef<Path>, q: &Immersion) -> Result<()> {
    write_file(path.as_ref(), &obj_to_string(q))
}

/// Per-node `|u|` as CSV (`node,magnitude`).
pub fn magnitudes_to_string(u: &TangentField) -> String {
    let mut s = String::from("node,magnitude\n");
    for (i, m) in u.magnitudes().iter().enumerate() {
        let _ = writeln!(s, "{i},{m}");
    }
    s
}

/// Writes `<prefix>_<i>.obj` and `<prefix>_<i>.csv` (per-node `|u_i|`) for
/// every frame of `path` into `dir`; returns the number of frames.
pub fn write_frames(dir: impl AsRef<Path>, prefix: &str, path: &GeodesicPath) -> Result<usize> {
    let dir = dir.as_ref();
    let width = path.steps().to_string().len();
    for (i, (q, u)) in path.surfaces().iter().zip(path.velocities()).enumerate() {
        write_obj(dir.join(format!("{prefix}_{i:0width$}.obj")), q)?;
        write_file(&dir.join(format!("{prefix}_{i:0width$}.csv")), &magnitudes_to_string(u))?;
    }
    Ok(path.steps() + 1)
}

pub fn history_to_string(history: &[IterationRecord]) -> String {
    let mut s = String::from("iter,E_total,E_kin,E_match,grad_norm,step\n");
    for h in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            h.iter, h.e_total, h.e_kinetic, h.e_match, h.grad_norm, h.step
        );
    }
    s
}

pub fn write_history(path: impl AsRef<Path>, history: &[IterationRecord]) -> Result<()> {
    write_file(path.as_ref(), &history_to_string(history))
}

/// Writes any text file, creating parent directories.
pub fn write_text(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    write_file(path.as_ref(), contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TorusParams;

    fn torus() -> Immersion {
        TorusParams::default()
            .build(Arc::new(DomainMesh::build(Topology::Torus, 5, 4).unwrap()))
            .unwrap()
    }

    #[test]
    fn mesh_round_trip_is_exact() {
        let q = torus();
        let text = mesh_to_string(&q);
        assert!(text.starts_with("IMESH 1\ntorus 5 4\n20 40\nv "));
        let back = parse_mesh(&text, Path::new("t")).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn velocity_round_trip_and_mismatch() {
        let q = torus();
        let u = TangentField::from_fn(q.node_count(), |i| Vec3::new(1.0 / (i as f64 + 3.0), -0.1, 1e-300));
        let text = velocity_to_string(q.mesh(), &u);
        assert!(text.starts_with("IVEC 1\n"));
        assert_eq!(parse_velocity(&text, Path::new("u"), Some(q.mesh())).unwrap(), u);
        let other = DomainMesh::build(Topology::Torus, 4, 5).unwrap();
        assert!(matches!(
            parse_velocity(&text, Path::new("u"), Some(&other)),
            Err(Error::MeshMismatch(_))
        ));
        // the magic distinguishes the two kinds of file
        assert!(parse_mesh(&text, Path::new("u")).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = mesh_to_string(&torus());
        let line_of = |t: &str| match parse_mesh(t, Path::new("m")) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of(&text.replacen("IMESH 1", "IMESH 2", 1)), 1);
        assert_eq!(line_of(&text.replacen("torus 5 4", "torus 5 x", 1)), 2);
        assert_eq!(line_of(&text.replacen("20 40", "20 41", 1)), 3);
        let mut lines: Vec<&str> = text.lines().collect();
        lines[5] = "v 1 2";
        assert_eq!(line_of(&lines.join("\n")), 6);
        let mut lines: Vec<&str> = text.lines().collect();
        lines[24] = "f 0 2 1";
        assert_eq!(line_of(&lines.join("\n")), 25);
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(parse_mesh(&truncated, Path::new("m")).is_err());
    }

    #[test]
    fn obj_faces_are_one_based() {
        let obj = obj_to_string(&torus());
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 20);
        assert!(obj.lines().filter(|l| l.starts_with("f ")).all(|l| !l.split(' ').any(|t| t == "0")));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_mesh("/nonexistent/x.imesh"), Err(Error::Io { .. })));
    }
}
