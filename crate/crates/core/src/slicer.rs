//! Sagittal cross-sections of closed meshes rasterized into binary masks.
//!
//! Planes are `x = const`. Sections live in `(y, z)` coordinates; pixel
//! `(row, col)` has its center at `(y_min + (col + ½)·Δy, z_min + (row + ½)·Δz)`,
//! so pixel `(0, 0)` sits at the window's minimum corner.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, Plane, TriMesh};

/// Closed polygon in `(y, z)` millimeters; the first vertex is not repeated.
pub type Contour = Vec<Point2<f64>>;

pub const STACK_FORMAT_VERSION: u32 = 1;

/// Default sagittal plane positions as fractions of the window's x extent.
pub const DEFAULT_OFFSETS: [f64; 3] = [0.35, 0.50, 0.65];
pub const DEFAULT_RESOLUTION: usize = 192;
pub const MIN_RESOLUTION: usize = 16;

#[derive(Debug, Error)]
pub enum SliceError {
    #[error("cannot slice: {0}")]
    Mesh(#[from] MeshError),
    #[error("cross-section loop starting at edge ({a}, {b}) does not close")]
    OpenLoop { a: usize, b: usize },
    #[error("invalid slice protocol: {0}")]
    InvalidProtocol(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("mask stack mixes resolutions ({0} vs {1})")]
    MixedResolution(usize, usize),
}

/// Axis-aligned box in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Box3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Box3 {
    /// Bounding box of all vertices of `meshes`, grown by `margin` times the
    /// extent on each side.
    pub fn around(meshes: &[TriMesh], margin: f64) -> Option<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in meshes.iter().flat_map(|m| &m.vertices) {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        if !lo[0].is_finite() {
            return None;
        }
        for k in 0..3 {
            let pad = (hi[k] - lo[k]) * margin;
            lo[k] -= pad;
            hi[k] += pad;
        }
        Some(Self { min: lo, max: hi })
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|k| self.min[k].is_finite() && self.max[k].is_finite() && self.max[k] > self.min[k])
    }

    /// The `(y, z)` face of the box.
    pub fn sagittal_window(&self) -> Window {
        Window {
            min: [self.min[1], self.min[2]],
            max: [self.max[1], self.max[2]],
        }
    }
}

/// Axis-aligned rectangle in `(y, z)` millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

/// Where and how finely subjects are sliced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProtocol {
    /// Plane positions as fractions in (0, 1) of the window's x extent.
    pub offsets: Vec<f64>,
    pub window: Box3,
    /// Pixels per side.
    pub resolution: usize,
}

impl SliceProtocol {
    pub fn validate(&self) -> Result<(), SliceError> {
        let bad = |m: String| Err(SliceError::InvalidProtocol(m));
        if !(2..=3).contains(&self.offsets.len()) {
            return bad(format!("expected 2 or 3 plane offsets, got {}", self.offsets.len()));
        }
        if self.offsets.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return bad("plane offsets must lie strictly inside (0, 1)".into());
        }
        if self.offsets.windows(2).any(|w| w[1] <= w[0]) {
            return bad("plane offsets must be strictly increasing".into());
        }
        if self.resolution < MIN_RESOLUTION {
            return bad(format!("resolution must be at least {MIN_RESOLUTION}"));
        }
        if !self.window.is_valid() {
            return bad("window must be a finite box with positive extent".into());
        }
        Ok(())
    }

    pub fn planes(&self) -> Vec<Plane> {
        self.offsets
            .iter()
            .map(|f| {
                Plane::sagittal(self.window.min[0] + f * self.window.extent(0))
                    .expect("validated window is finite")
            })
            .collect()
    }

    /// Pixel size `(Δy, Δz)` in mm.
    pub fn spacing(&self) -> [f64; 2] {
        let r = self.resolution as f64;
        [self.window.extent(1) / r, self.window.extent(2) / r]
    }
}

/// Square binary raster, row-major, one byte (0 or 1) per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    size: usize,
    data: Vec<u8>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryMask({}x{}, {} on)", self.size, self.size, self.count_on())
    }
}

impl BinaryMask {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            data: vec![0; size * size],
        }
    }

    /// `None` when `bits.len() != size²`. Any non-zero value counts as on.
    pub fn from_bits(size: usize, bits: &[bool]) -> Option<Self> {
        (bits.len() == size * size).then(|| Self {
            size,
            data: bits.iter().map(|&b| u8::from(b)).collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.size + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.data[row * self.size + col] = u8::from(on);
    }

    /// Row-major 0/1 values.
    pub fn values(&self) -> &[u8] {
        &self.data
    }

    pub fn count_on(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// One mask per sagittal plane, all in a shared physical window.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskStack {
    pub masks: Vec<BinaryMask>,
    /// Pixel size `(Δy, Δz)` in mm.
    pub spacing: [f64; 2],
    /// Window minimum corner `(y, z)` in mm.
    pub origin: [f64; 2],
    pub offsets: Vec<f64>,
    pub window: Box3,
}

impl MaskStack {
    pub fn resolution(&self) -> usize {
        self.masks.first().map_or(0, BinaryMask::size)
    }

    pub fn check_uniform(&self) -> Result<(), SliceError> {
        let r = self.resolution();
        match self.masks.iter().find(|m| m.size() != r) {
            Some(m) => Err(SliceError::MixedResolution(r, m.size())),
            None => Ok(()),
        }
    }

    /// Length of the flattened input vector.
    pub fn input_len(&self) -> usize {
        self.masks.iter().map(|m| m.size() * m.size()).sum()
    }

    /// Indices of on-pixels in the flattened (slice-major, then row-major) input.
    pub fn active_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut base = 0;
        for m in &self.masks {
            out.extend(
                m.values()
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(i, _)| base + i),
            );
            base += m.values().len();
        }
        out
    }
}

/// Intersection of a closed mesh with a sagittal plane, as closed loops.
///
/// Vertices lying exactly on the plane are treated as being on its positive
/// side, so every crossing is a proper edge crossing and loops chain through
/// shared edges. Outer boundaries come out counter-clockwise in `(y, z)`.
pub fn cross_section(mesh: &TriMesh, plane: &Plane) -> Result<Vec<Contour>, SliceError> {
    mesh.check_closed()?;
    let c = plane.offset();
    let above: Vec<bool> = mesh.vertices.iter().map(|v| v.x >= c).collect();

    let crossing = |a: usize, b: usize| -> Point2<f64> {
        // Same endpoint order regardless of which face asks.
        let (p, q) = if a < b { (a, b) } else { (b, a) };
        let (vp, vq) = (&mesh.vertices[p], &mesh.vertices[q]);
        let t = (c - vp.x) / (vq.x - vp.x);
        Point2::new(vp.y + t * (vq.y - vp.y), vp.z + t * (vq.z - vp.z))
    };
    let key = |a: usize, b: usize| (a.min(b), a.max(b));

    // Segment per crossed face: from the edge leaving the positive side to
    // the edge entering it.
    let mut next: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for tri in &mesh.faces {
        let mut down = None;
        let mut up = None;
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            match (above[a], above[b]) {
                (true, false) => down = Some(key(a, b)),
                (false, true) => up = Some(key(a, b)),
                _ => {}
            }
        }
        if let (Some(d), Some(u)) = (down, up) {
            next.insert(d, u);
        }
    }

    let mut loops = Vec::new();
    while let Some((&start, _)) = next.iter().next() {
        let mut contour = Vec::new();
        let mut edge = start;
        loop {
            contour.push(crossing(edge.0, edge.1));
            let to = next
                .remove(&edge)
                .ok_or(SliceError::OpenLoop { a: start.0, b: start.1 })?;
            if to == start {
                break;
            }
            edge = to;
        }
        let closing_gap = (contour[0] - crossing(start.0, start.1)).norm();
        if closing_gap > 1e-6 {
            return Err(SliceError::OpenLoop { a: start.0, b: start.1 });
        }
        // Drop zero-length steps produced by on-plane vertices.
        contour.dedup_by(|b, a| (*a - *b).norm() == 0.0);
        while contour.len() > 1 && (contour[0] - contour[contour.len() - 1]).norm() == 0.0 {
            contour.pop();
        }
        if contour.len() >= 3 {
            loops.push(contour);
        }
    }
    Ok(loops)
}

/// Shoelace area of one loop; positive for counter-clockwise.
pub fn signed_area(contour: &[Point2<f64>]) -> f64 {
    let n = contour.len();
    (0..n)
        .map(|i| {
            let (p, q) = (contour[i], contour[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        / 2.0
}

/// Even-odd fill of `contours` sampled at pixel centers of an `r × r` grid
/// over `window`. Geometry outside the window is clipped.
pub fn rasterize(contours: &[Contour], window: &Window, r: usize) -> BinaryMask {
    let mut mask = BinaryMask::empty(r);
    if r == 0 {
        return mask;
    }
    let dy = (window.max[0] - window.min[0]) / r as f64;
    let dz = (window.max[1] - window.min[1]) / r as f64;
    let mut xs: Vec<f64> = Vec::new();
    for row in 0..r {
        let zc = window.min[1] + (row as f64 + 0.5) * dz;
        xs.clear();
        for contour in contours {
            let n = contour.len();
            for i in 0..n {
                let (p, q) = (contour[i], contour[(i + 1) % n]);
                if (p.y > zc) != (q.y > zc) {
                    xs.push(p.x + (zc - p.y) * (q.x - p.x) / (q.y - p.y));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let first = ((span[0] - window.min[0]) / dy - 0.5).ceil();
            let last = ((span[1] - window.min[0]) / dy - 0.5).ceil();
            let first = first.clamp(0.0, r as f64) as usize;
            let last = last.clamp(0.0, r as f64) as usize;
            for col in first..last {
                mask.set(row, col, true);
            }
        }
    }
    mask
}

/// Slices `mesh` at every plane of `protocol`.
pub fn make_mask_stack(mesh: &TriMesh, protocol: &SliceProtocol) -> Result<MaskStack, SliceError> {
    protocol.validate()?;
    let window = protocol.window.sagittal_window();
    let masks = protocol
        .planes()
        .iter()
        .map(|plane| {
            cross_section(mesh, plane).map(|loops| rasterize(&loops, &window, protocol.resolution))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MaskStack {
        masks,
        spacing: protocol.spacing(),
        origin: window.min,
        offsets: protocol.offsets.clone(),
        window: protocol.window,
    })
}

// ---------------------------------------------------------------------------
// PGM and stack manifest I/O

fn io_err(path: &Path, source: std::io::Error) -> SliceError {
    SliceError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> SliceError {
    SliceError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Binary PGM (P5, maxval 255) bytes; on-pixels are 255.
pub fn encode_pgm(mask: &BinaryMask) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", mask.size, mask.size);
    let mut bytes = header.into_bytes();
    bytes.extend(mask.data.iter().map(|&v| if v != 0 { 255 } else { 0 }));
    bytes
}

/// Parses a square binary P5 image whose pixels are all 0 or 255.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<BinaryMask, SliceError> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(format_err(path, format!("expected P5 magic, found '{}'", fields[0])));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err(path, format!("bad {what} '{s}'")))
    };
    let (w, h, maxval) = (
        parse(&fields[1], "width")?,
        parse(&fields[2], "height")?,
        parse(&fields[3], "maxval")?,
    );
    if maxval != 255 {
        return Err(format_err(path, format!("maxval must be 255, found {maxval}")));
    }
    if w != h {
        return Err(format_err(path, format!("mask must be square, found {w}x{h}")));
    }
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != w * h {
        return Err(format_err(
            path,
            format!("expected {} pixel bytes, found {}", w * h, raster.len()),
        ));
    }
    if raster.iter().any(|&v| v != 0 && v != 255) {
        return Err(format_err(path, "binary masks must be 0 or 255"));
    }
    Ok(BinaryMask {
        size: w,
        data: raster.iter().map(|&v| u8::from(v == 255)).collect(),
    })
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), SliceError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(mask)).map_err(|e| io_err(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask, SliceError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_pgm(&bytes, path)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackManifest {
    format_version: u32,
    resolution: usize,
    /// Mask files relative to the manifest's directory.
    members: Vec<String>,
    plane_offsets: Vec<f64>,
    window: Box3,
    pixel_spacing: [f64; 2],
    origin: [f64; 2],
}

/// Writes `slice_<i>.pgm` files next to the JSON manifest at `path`.
pub fn save_stack(stack: &MaskStack, path: impl AsRef<Path>) -> Result<(), SliceError> {
    let path = path.as_ref();
    stack.check_uniform()?;
    if stack.offsets.len() != stack.masks.len() {
        return Err(SliceError::InvalidProtocol(format!(
            "{} masks but {} plane offsets",
            stack.masks.len(),
            stack.offsets.len()
        )));
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    let members: Vec<String> = (0..stack.masks.len()).map(|i| format!("slice_{i}.pgm")).collect();
    for (mask, name) in stack.masks.iter().zip(&members) {
        save_mask(mask, dir.join(name))?;
    }
    let manifest = StackManifest {
        format_version: STACK_FORMAT_VERSION,
        resolution: stack.resolution(),
        members,
        plane_offsets: stack.offsets.clone(),
        window: stack.window,
        pixel_spacing: stack.spacing,
        origin: stack.origin,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(path, json).map_err(|e| io_err(path, e))
}

pub fn load_stack(path: impl AsRef<Path>) -> Result<MaskStack, SliceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest: StackManifest =
        serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))?;
    if manifest.format_version != STACK_FORMAT_VERSION {
        return Err(format_err(
            path,
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    if manifest.members.len() != manifest.plane_offsets.len() {
        return Err(format_err(path, "member count differs from plane offset count"));
    }
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let masks = manifest
        .members
        .iter()
        .map(|m| load_mask(dir.join(m)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(m) = masks.iter().find(|m| m.size() != manifest.resolution) {
        return Err(format_err(
            path,
            format!("header resolution {} but mask is {}", manifest.resolution, m.size()),
        ));
    }
    Ok(MaskStack {
        masks,
        spacing: manifest.pixel_spacing,
        origin: manifest.origin,
        offsets: manifest.plane_offsets,
        window: manifest.window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{cube, icosphere};
    use proptest::prelude::*;

    /// Crossing-number point-in-polygon test per pixel center.
    fn oracle_fill(contours: &[Contour], window: &Window, r: usize) -> BinaryMask {
        let dy = (window.max[0] - window.min[0]) / r as f64;
        let dz = (window.max[1] - window.min[1]) / r as f64;
        let mut mask = BinaryMask::empty(r);
        for row in 0..r {
            for col in 0..r {
                let (py, pz) = (
                    window.min[0] + (col as f64 + 0.5) * dy,
                    window.min[1] + (row as f64 + 0.5) * dz,
                );
                let mut inside = false;
                for c in contours {
                    for i in 0..c.len() {
                        let (a, b) = (c[i], c[(i + 1) % c.len()]);
                        if (a.y > pz) != (b.y > pz) {
                            let x = a.x + (pz - a.y) * (b.x - a.x) / (b.y - a.y);
                            if py >= x {
                                inside = !inside;
                            }
                        }
                    }
                }
                mask.set(row, col, inside);
            }
        }
        mask
    }

    fn square(y0: f64, z0: f64, y1: f64, z1: f64) -> Contour {
        vec![
            Point2::new(y0, z0),
            Point2::new(y1, z0),
            Point2::new(y1, z1),
            Point2::new(y0, z1),
        ]
    }

    fn unit_window() -> Window {
        Window { min: [0.0, 0.0], max: [1.0, 1.0] }
    }

    #[test]
    fn cube_mid_section_is_square() {
        let loops = cross_section(&cube(10.0), &Plane::sagittal(0.0).unwrap()).unwrap();
        assert_eq!(loops.len(), 1);
        assert!((signed_area(&loops[0]) - 100.0).abs() < 1e-9);
        for p in &loops[0] {
            assert!((p.x.abs() - 5.0).abs() < 1e-12 || (p.y.abs() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_center_section_area() {
        let loops = cross_section(&icosphere(10.0, 4), &Plane::sagittal(0.0).unwrap()).unwrap();
        assert_eq!(loops.len(), 1);
        let area = signed_area(&loops[0]);
        let exact = std::f64::consts::PI * 100.0;
        assert!(area > 0.0, "outer loop should be counter-clockwise");
        assert!(((area - exact) / exact).abs() < 0.01, "{area}");
    }

    #[test]
    fn off_center_plane_and_miss() {
        let m = icosphere(10.0, 3).translated(&nalgebra::Vector3::new(3.0, -2.0, 1.0));
        let loops = cross_section(&m, &Plane::sagittal(7.0).unwrap()).unwrap();
        assert_eq!(loops.len(), 1);
        assert!(signed_area(&loops[0]) > 0.0);
        assert!(cross_section(&m, &Plane::sagittal(1000.0).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn two_components_give_two_loops() {
        let a = icosphere(5.0, 2);
        let b = icosphere(5.0, 2).translated(&nalgebra::Vector3::new(0.0, 20.0, 0.0));
        let offset = a.vertices.len();
        let mut both = a.clone();
        both.vertices.extend(b.vertices);
        both.faces.extend(b.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        let loops = cross_section(&both, &Plane::sagittal(0.3).unwrap()).unwrap();
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| signed_area(l) > 0.0));
    }

    #[test]
    fn plane_through_vertices_still_closes() {
        // x = 5 contains a whole cube face.
        let m = cube(10.0);
        for x in [-5.0, 0.0, 5.0] {
            let loops = cross_section(&m, &Plane::sagittal(x).unwrap()).unwrap();
            assert!(loops.len() <= 1);
        }
        let ico = icosphere(10.0, 2);
        let x = ico.vertices[0].x;
        let loops = cross_section(&ico, &Plane::sagittal(x).unwrap()).unwrap();
        assert_eq!(loops.len(), 1);
    }

    #[test]
    fn open_mesh_rejected() {
        let mut m = cube(10.0);
        m.faces.truncate(11);
        assert!(matches!(
            cross_section(&m, &Plane::sagittal(0.0).unwrap()),
            Err(SliceError::Mesh(MeshError::UnmatchedEdge { .. }))
        ));
    }

    #[test]
    fn rasterize_full_half_and_empty() {
        let r = 32;
        let w = unit_window();
        assert_eq!(rasterize(&[square(0.0, 0.0, 1.0, 1.0)], &w, r).count_on(), r * r);
        let half = rasterize(&[square(0.0, 0.0, 0.5, 1.0)], &w, r).count_on();
        assert!((half as i64 - (r * r / 2) as i64).unsigned_abs() as usize <= r);
        assert_eq!(rasterize(&[], &w, r).count_on(), 0);
        // Clipped geometry larger than the window fills it.
        assert_eq!(rasterize(&[square(-5.0, -5.0, 5.0, 5.0)], &w, r).count_on(), r * r);
    }

    #[test]
    fn pixel_origin_is_window_min_corner() {
        let w = unit_window();
        let m = rasterize(&[square(0.0, 0.0, 0.25, 0.25)], &w, 16);
        assert!(m.get(0, 0));
        assert!(!m.get(15, 15));
        assert!(m.get(3, 3) && !m.get(4, 4));
    }

    #[test]
    fn holes_use_even_odd() {
        let w = unit_window();
        let outer = square(0.1, 0.1, 0.9, 0.9);
        let hole = square(0.3, 0.3, 0.7, 0.7);
        let m = rasterize(&[outer.clone(), hole.clone()], &w, 64);
        assert_eq!(m, oracle_fill(&[outer, hole], &w, 64));
        assert!(!m.get(32, 32));
        assert!(m.get(10, 10));
    }

    proptest! {
        #[test]
        fn scanline_matches_point_in_polygon(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..12),
            r in 16usize..64,
        ) {
            let contour: Contour = pts.iter().map(|&(y, z)| Point2::new(y, z)).collect();
            let w = unit_window();
            let fast = rasterize(std::slice::from_ref(&contour), &w, r);
            let slow = oracle_fill(&[contour], &w, r);
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn pgm_round_trip(bits in prop::collection::vec(any::<bool>(), 16 * 16)) {
            let mask = BinaryMask::from_bits(16, &bits).unwrap();
            let back = decode_pgm(&encode_pgm(&mask), Path::new("m.pgm")).unwrap();
            prop_assert_eq!(back, mask);
        }
    }

    #[test]
    fn raster_area_converges() {
        // Expected error over sub-pixel shifts of a circle section.
        let loops = cross_section(&icosphere(10.0, 5), &Plane::sagittal(0.0).unwrap()).unwrap();
        let exact = signed_area(&loops[0]);
        let err_at = |r: usize| {
            let shifts = 16;
            (0..shifts)
                .map(|s| {
                    let d = 0.37 * s as f64;
                    let w = Window { min: [-12.0 + d / 7.0, -12.0 + d / 11.0], max: [12.0 + d / 7.0, 12.0 + d / 11.0] };
                    let px = (24.0 / r as f64).powi(2);
                    (rasterize(&loops, &w, r).count_on() as f64 * px - exact).abs()
                })
                .sum::<f64>()
                / shifts as f64
        };
        let errs: Vec<f64> = [16, 32, 64, 128].into_iter().map(err_at).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 0.5 * w[0], "{errs:?}");
        }
    }

    #[test]
    fn pgm_rejects_non_binary_values() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 7, 0]);
        let err = decode_pgm(&bytes, Path::new("bad.pgm")).unwrap_err();
        assert!(err.to_string().contains("binary masks must be 0 or 255"));
        let mut bytes = b"P5\n2 2\n15\n".to_vec();
        bytes.extend([0, 15, 0, 0]);
        assert!(decode_pgm(&bytes, Path::new("bad.pgm")).is_err());
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 255, 0]);
        assert_eq!(decode_pgm(&bytes, Path::new("ok.pgm")).unwrap().count_on(), 2);
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00", Path::new("short.pgm")).is_err());
    }

    fn protocol(offsets: Vec<f64>, r: usize) -> SliceProtocol {
        SliceProtocol {
            offsets,
            window: Box3 { min: [-15.0; 3], max: [15.0; 3] },
            resolution: r,
        }
    }

    #[test]
    fn protocol_validation() {
        assert!(protocol(vec![0.35, 0.5, 0.65], 192).validate().is_ok());
        assert!(protocol(vec![0.4, 0.6], 384).validate().is_ok());
        assert!(protocol(vec![0.5], 192).validate().is_err());
        assert!(protocol(vec![0.6, 0.5], 192).validate().is_err());
        assert!(protocol(vec![0.0, 0.5], 192).validate().is_err());
        assert!(protocol(vec![0.3, 0.5], 8).validate().is_err());
    }

    #[test]
    fn stacks_follow_protocol_and_grow_with_scale() {
        let m = icosphere(10.0, 3).map_vertices(|p| nalgebra::Point3::new(1.3 * p.x, p.y, 0.8 * p.z));
        let three = make_mask_stack(&m, &protocol(DEFAULT_OFFSETS.to_vec(), 64)).unwrap();
        assert_eq!(three.masks.len(), 3);
        assert!(three.masks.iter().all(|k| k.count_on() > 0));
        let two = make_mask_stack(&m, &protocol(vec![0.4, 0.6], 64)).unwrap();
        assert_eq!(two.masks.len(), 2);
        let bigger = make_mask_stack(&m.scaled(1.1), &protocol(DEFAULT_OFFSETS.to_vec(), 64)).unwrap();
        for (a, b) in three.masks.iter().zip(&bigger.masks) {
            assert!(b.count_on() > a.count_on());
        }
    }

    #[test]
    fn section_area_is_continuous_in_offset() {
        let m = icosphere(10.0, 4).map_vertices(|p| nalgebra::Point3::new(1.6 * p.x, 1.2 * p.y, p.z));
        let window = Box3::around(std::slice::from_ref(&m), 0.1).unwrap();
        let area_at = |f: f64| -> f64 {
            let x = window.min[0] + f * window.extent(0);
            cross_section(&m, &Plane::sagittal(x).unwrap())
                .unwrap()
                .iter()
                .map(|l| signed_area(l))
                .sum()
        };
        for i in 20..80 {
            let f = i as f64 / 100.0;
            let (a, b) = (area_at(f), area_at(f + 0.01));
            assert!((a - b).abs() < 0.2 * a.max(b), "{f}: {a} vs {b}");
        }
    }

    #[test]
    fn stack_io_round_trip_and_mixed_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let m = icosphere(10.0, 2);
        let stack = make_mask_stack(&m, &protocol(DEFAULT_OFFSETS.to_vec(), 32)).unwrap();
        let path = dir.path().join("s1").join("stack.json");
        save_stack(&stack, &path).unwrap();
        assert_eq!(load_stack(&path).unwrap(), stack);

        let mut mixed = stack.clone();
        mixed.masks[1] = BinaryMask::empty(16);
        assert!(matches!(save_stack(&mixed, dir.path().join("x.json")), Err(SliceError::MixedResolution(32, 16))));
    }
}
