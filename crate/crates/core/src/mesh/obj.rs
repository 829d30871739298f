//! Wavefront OBJ reading and writing (vertices and faces only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use super::{MeshError, TriMesh};

/// Reads an OBJ file. Polygons with more than three corners are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

/// Parses OBJ text. Normals, texture coordinates, groups and materials are skipped.
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices = Vec::new();
    // Faces are resolved after all vertices are known; keep the source line
    // of each face for error reporting.
    let mut raw_faces: Vec<(usize, Vec<i64>)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| parse_err(lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(lineno, "vertex needs three coordinates"));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(parse_err(lineno, "non-finite vertex coordinate"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<i64> = parts
                    .map(|tok| {
                        tok.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<i64>()
                            .map_err(|e| parse_err(lineno, format!("bad face index '{tok}': {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                if refs.len() < 3 {
                    return Err(parse_err(lineno, "face needs at least three vertices"));
                }
                raw_faces.push((lineno, refs));
            }
            _ => {}
        }
    }

    let count = vertices.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (lineno, refs) in raw_faces {
        let resolved: Vec<usize> = refs
            .iter()
            .map(|&r| resolve_index(r, count).ok_or_else(|| {
                parse_err(
                    lineno,
                    format!("face index {r} out of range for {count} vertices"),
                )
            }))
            .collect::<Result<_, _>>()?;
        for k in 1..resolved.len() - 1 {
            let tri = [resolved[0], resolved[k], resolved[k + 1]];
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(parse_err(lineno, "degenerate face (repeated vertex)"));
            }
            faces.push(tri);
        }
    }
    Ok(TriMesh { vertices, faces })
}

fn resolve_index(r: i64, count: usize) -> Option<usize> {
    let count = count as i64;
    let i = match r {
        r if r > 0 => r - 1,
        r if r < 0 => count + r,
        _ => return None,
    };
    (0..count).contains(&i).then_some(i as usize)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

/// Serializes a mesh to OBJ text. Coordinates use the shortest
/// representation that parses back to the same `f64`.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 48 + mesh.faces.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// Writes an OBJ file, creating missing parent directories.
pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let path = path.as_ref();
    let io = |source| MeshError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, write_obj(mesh)).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::super::shapes::{cube, icosphere};
    use super::*;

    #[test]
    fn cube_has_8_v_and_12_f_lines() {
        let text = write_obj(&cube(10.0));
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 12);
        let back = parse_obj(&text).unwrap();
        assert_eq!(back.vertex_count(), 8);
        assert_eq!(back.face_count(), 12);
    }

    #[test]
    fn out_of_range_index_names_line() {
        let mut text = write_obj(&cube(10.0));
        text.push_str("f 1 2 9\n");
        match parse_obj(&text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 21),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_vertex_is_reported() {
        let err = parse_obj("v 1 2\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
        let err = parse_obj("v 1 2 abc\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
    }

    #[test]
    fn quads_are_fan_triangulated_and_extras_ignored() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/1/1 3/1/1 4/1/1\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_indices_resolve_relative() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn empty_mesh_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.obj");
        save_mesh(&TriMesh::default(), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "");
        assert_eq!(load_mesh(&path).unwrap(), TriMesh::default());
    }

    #[test]
    fn icosphere_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.obj");
        let m = icosphere(10.0, 3);
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.faces, m.faces);
        assert!(back.max_vertex_deviation(&m) < 1e-6);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_mesh("/nonexistent/definitely/missing.obj"),
            Err(MeshError::Io { .. })
        ));
    }
}
