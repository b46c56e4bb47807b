use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point3;

use super::TriangleMesh;
use crate::{Error, Result};

/// Loads a Wavefront OBJ file (`v` and `f` records; normals and texture coordinates ignored).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mesh = parse_obj(&text, path)?;
    log::info!(
        "loaded mesh path={:?} vertices={} faces={}",
        path,
        mesh.vertices().len(),
        mesh.faces().len()
    );
    Ok(mesh)
}

/// Parses OBJ text. Polygons are fan-triangulated; negative indices are relative.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let malformed = |line: usize, message: String| Error::MalformedFile {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| malformed(lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(malformed(lineno, "vertex needs 3 coordinates".into()));
                }
                if !coords.iter().all(|c| c.is_finite()) {
                    return Err(malformed(lineno, "non-finite vertex coordinate".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let idx_str = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|_| malformed(lineno, format!("bad face index `{tok}`")))?;
                    let n = vertices.len() as i64;
                    let resolved = if idx > 0 { idx - 1 } else { n + idx };
                    if idx == 0 || resolved < 0 || resolved >= n {
                        return Err(malformed(
                            lineno,
                            format!("face index {idx} out of range ({n} vertices defined)"),
                        ));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(malformed(lineno, "face needs at least 3 vertices".into()));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(Error::EmptyGeometry(format!("{path:?} defines no faces")));
    }
    TriangleMesh::new(vertices, faces)
}

/// Serialises a mesh as OBJ text.
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    const CUBE: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn unit_cube() {
        let m = parse_obj(CUBE, Path::new("cube.obj")).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.faces().len(), 12);
    }

    #[test]
    fn out_of_range_face_reports_line() {
        let bad = CUBE.replace("f 4 5 8", "f 4 5 9");
        match parse_obj(&bad, Path::new("bad.obj")) {
            Err(Error::MalformedFile { line, .. }) => assert_eq!(line, 21),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn quads_slashes_and_relative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -2 -1\n";
        let m = parse_obj(text, Path::new("q.obj")).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3], [0, 2, 3]]);
    }

    #[test]
    fn bad_vertex_and_empty() {
        assert!(matches!(
            parse_obj("v 0 0 x\n", Path::new("a.obj")),
            Err(Error::MalformedFile { line: 1, .. })
        ));
        assert!(matches!(
            parse_obj("# nothing\n", Path::new("a.obj")),
            Err(Error::EmptyGeometry(_))
        ));
    }

    #[test]
    fn write_then_parse_round_trips() {
        let m = shapes::icosphere(0.3, 1);
        let back = parse_obj(&write_obj(&m), Path::new("s.obj")).unwrap();
        assert_eq!(back, m);
    }
}
