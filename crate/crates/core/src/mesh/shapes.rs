//! Closed reference solids.

use std::collections::HashMap;

use nalgebra::Point3;

use super::TriMesh;

/// Axis-aligned cube centered at the origin, outward winding.
pub fn cube(edge: f64) -> TriMesh {
    let h = edge / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 3], [0, 3, 1], // z = -h
        [4, 5, 7], [4, 7, 6], // z = +h
        [0, 1, 5], [0, 5, 4], // y = -h
        [2, 6, 7], [2, 7, 3], // y = +h
        [0, 4, 6], [0, 6, 2], // x = -h
        [1, 3, 7], [1, 7, 5], // x = +h
    ];
    TriMesh { vertices, faces }
}

/// Unit-direction icosphere: the icosahedron with `level` rounds of 1→4
/// midpoint subdivision, vertices projected onto the sphere of `radius`.
///
/// Level `l` has `10·4^l + 2` vertices and `20·4^l` faces.
pub fn icosphere(radius: f64, level: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3<f64>> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|c| Point3::from(nalgebra::Vector3::from(*c).normalize()))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = nalgebra::center(&verts[a], &verts[b]);
                verts.push(Point3::from(m.coords.normalize()));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    TriMesh {
        vertices: verts.into_iter().map(|v| Point3::from(v.coords * radius)).collect(),
        faces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_closure() {
        for level in 0..4 {
            let m = icosphere(1.0, level);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(level) + 2);
            assert_eq!(m.face_count(), 20 * 4usize.pow(level));
            m.check_closed().unwrap();
            assert!(m.signed_volume_mm3() > 0.0);
        }
    }

    #[test]
    fn cube_is_closed_and_outward() {
        let m = cube(2.0);
        m.check_closed().unwrap();
        assert!((m.signed_volume_mm3() - 8.0).abs() < 1e-12);
    }
}
