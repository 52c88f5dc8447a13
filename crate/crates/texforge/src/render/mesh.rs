//! Triangle meshes and a Wavefront OBJ subset loader (`v`/`vt`/`vn`/`f`).
//!
//! Faces are fan-triangulated, indices are 1-based, and every face corner
//! must reference a UV (garment meshes arrive UV-unwrapped). Missing normals
//! are reconstructed as area-weighted vertex normals. Unknown record types
//! are ignored, matching common OBJ practice.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Unified-vertex triangle mesh: positions, unit normals, and UVs are all
/// per-vertex and every triangle references valid vertices.
#[derive(Debug, Clone)]
pub struct GarmentMesh {
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
    uvs: Vec<(f32, f32)>,
    triangles: Vec<[u32; 3]>,
}

impl GarmentMesh {
    pub fn new(
        positions: Vec<Vec3>,
        normals: Vec<Vec3>,
        uvs: Vec<(f32, f32)>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<GarmentMesh> {
        let n = positions.len();
        if normals.len() != n || uvs.len() != n {
            return Err(Error::invalid(format!(
                "attribute counts disagree: {} positions, {} normals, {} uvs",
                n,
                normals.len(),
                uvs.len()
            )));
        }
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&ix| ix as usize >= n) {
                return Err(Error::invalid(format!("triangle {i} references a vertex out of range")));
            }
        }
        for (i, nv) in normals.iter().enumerate() {
            if nv.unit_deviation() > 1e-3 {
                return Err(Error::invalid(format!("vertex {i} normal is not unit length")));
            }
        }
        Ok(GarmentMesh { positions, normals, uvs, triangles })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn uvs(&self) -> &[(f32, f32)] {
        &self.uvs
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::splat(f32::INFINITY);
        let mut hi = Vec3::splat(f32::NEG_INFINITY);
        for p in &self.positions {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    /// Serialize back to OBJ text (used by the asset generator).
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for p in &self.positions {
            s.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
        }
        for t in &self.uvs {
            s.push_str(&format!("vt {} {}\n", t.0, t.1));
        }
        for n in &self.normals {
            s.push_str(&format!("vn {} {} {}\n", n.x, n.y, n.z));
        }
        for tri in &self.triangles {
            let f = |i: u32| format!("{0}/{0}/{0}", i + 1);
            s.push_str(&format!("f {} {} {}\n", f(tri[0]), f(tri[1]), f(tri[2])));
        }
        s
    }
}

/// Parse an OBJ byte stream (UTF-8 text).
pub fn load_mesh(obj_text: &str) -> Result<GarmentMesh> {
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    // Face corners as (position, uv, normal) index triples, 0-based.
    let mut corners: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut faces: Vec<(usize, usize)> = Vec::new(); // (start, len) into corners

    let parse_err = |line: usize, msg: String| Error::MeshParse { line, msg };

    for (ln, raw) in obj_text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let keyword = it.next().unwrap();
        let rest: Vec<&str> = it.collect();
        match keyword {
            "v" => {
                let v = parse_floats::<3>(&rest).map_err(|m| parse_err(line_no, format!("bad vertex: {m}")))?;
                positions.push(Vec3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                if rest.len() < 2 {
                    return Err(parse_err(line_no, "uv needs two components".into()));
                }
                let u: f32 = rest[0].parse().map_err(|_| parse_err(line_no, format!("bad uv component {:?}", rest[0])))?;
                let v: f32 = rest[1].parse().map_err(|_| parse_err(line_no, format!("bad uv component {:?}", rest[1])))?;
                uvs.push((u, v));
            }
            "vn" => {
                let v = parse_floats::<3>(&rest).map_err(|m| parse_err(line_no, format!("bad normal: {m}")))?;
                normals.push(Vec3::new(v[0], v[1], v[2]));
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(parse_err(line_no, format!("face has {} corners, need at least 3", rest.len())));
                }
                let start = corners.len();
                for corner in &rest {
                    corners.push(parse_corner(corner, positions.len(), uvs.len(), normals.len(), line_no)?);
                }
                faces.push((start, rest.len()));
            }
            // Grouping/material records carry no geometry; skip them.
            _ => {}
        }
    }

    if faces.is_empty() {
        return Err(Error::invalid("mesh has no faces"));
    }

    // Unify (position, uv, normal) triples into a single vertex stream,
    // preserving first-seen order so loading is deterministic.
    let mut remap: HashMap<(usize, usize, Option<usize>), u32> = HashMap::new();
    let mut out_pos = Vec::new();
    let mut out_uv = Vec::new();
    let mut out_nrm_ix: Vec<Option<usize>> = Vec::new();
    let mut out_pos_ix = Vec::new();
    let mut unified: Vec<u32> = Vec::with_capacity(corners.len());
    for &c in &corners {
        let next = out_pos.len() as u32;
        let ix = *remap.entry(c).or_insert_with(|| {
            out_pos.push(positions[c.0]);
            out_uv.push(uvs[c.1]);
            out_nrm_ix.push(c.2);
            out_pos_ix.push(c.0);
            next
        });
        unified.push(ix);
    }

    let mut triangles = Vec::new();
    for &(start, len) in &faces {
        for i in 1..len - 1 {
            triangles.push([unified[start], unified[start + i], unified[start + i + 1]]);
        }
    }

    // Normals: use file normals when every corner has one; otherwise compute
    // area-weighted normals per source position and distribute.
    let out_normals = if out_nrm_ix.iter().all(|n| n.is_some()) {
        out_nrm_ix
            .iter()
            .map(|&ix| {
                let n = normals[ix.unwrap()];
                let len = n.length();
                if len < 1e-8 {
                    Err(Error::invalid("zero-length normal in mesh"))
                } else {
                    Ok(n / len)
                }
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut acc = vec![Vec3::ZERO; positions.len()];
        for tri in &triangles {
            let [a, b, c] = *tri;
            let (pa, pb, pc) = (out_pos[a as usize], out_pos[b as usize], out_pos[c as usize]);
            // Cross product length is twice the triangle area, so summing the
            // raw cross products area-weights the result.
            let cross = (pb - pa).cross(pc - pa);
            for v in [a, b, c] {
                acc[out_pos_ix[v as usize]] += cross;
            }
        }
        out_pos_ix
            .iter()
            .map(|&pi| {
                let n = acc[pi];
                let len = n.length();
                if len < 1e-12 {
                    Err(Error::invalid("vertex with no non-degenerate adjacent face"))
                } else {
                    Ok(n / len)
                }
            })
            .collect::<Result<Vec<_>>>()?
    };

    GarmentMesh::new(out_pos, out_normals, out_uv, triangles)
}

fn parse_floats<const N: usize>(parts: &[&str]) -> std::result::Result<[f32; N], String> {
    if parts.len() < N {
        return Err(format!("expected {N} components, got {}", parts.len()));
    }
    let mut out = [0.0f32; N];
    for i in 0..N {
        out[i] = parts[i].parse().map_err(|_| format!("bad float {:?}", parts[i]))?;
    }
    Ok(out)
}

/// Parse one face corner (`v`, `v/vt`, `v/vt/vn`, or `v//vn`), returning
/// 0-based indices. UVs are mandatory.
fn parse_corner(
    corner: &str,
    n_pos: usize,
    n_uv: usize,
    n_nrm: usize,
    line: usize,
) -> Result<(usize, usize, Option<usize>)> {
    let err = |msg: String| Error::MeshParse { line, msg };
    let fields: Vec<&str> = corner.split('/').collect();
    if fields.len() > 3 {
        return Err(err(format!("malformed face corner {corner:?}")));
    }
    let index = |field: &str, count: usize, what: &str| -> Result<usize> {
        let raw: i64 = field
            .parse()
            .map_err(|_| err(format!("bad {what} index {field:?}")))?;
        if raw < 1 || raw as usize > count {
            return Err(err(format!("{what} index {raw} out of range 1..={count}")));
        }
        Ok(raw as usize - 1)
    };
    let vp = index(fields[0], n_pos, "vertex")?;
    let vt = match fields.get(1) {
        Some(f) if !f.is_empty() => index(f, n_uv, "uv")?,
        _ => return Err(err(format!("face corner {corner:?} is missing a uv"))),
    };
    let vn = match fields.get(2) {
        Some(f) if !f.is_empty() => Some(index(f, n_nrm, "normal")?),
        _ => None,
    };
    Ok((vp, vt, vn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const TRI: &str = "\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
f 1/1 2/2 3/3
";

    #[test]
    fn minimal_triangle_loads() {
        let mesh = load_mesh(TRI).unwrap();
        assert_eq!(mesh.positions().len(), 3);
        assert_eq!(mesh.triangles().len(), 1);
        // No vn records: normals are computed from geometry, facing +z.
        for n in mesh.normals() {
            assert_abs_diff_eq!(n.z, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn quad_fan_triangulates() {
        let obj = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 2/2 3/3 4/4
";
        let mesh = load_mesh(obj).unwrap();
        assert_eq!(mesh.triangles().len(), 2);
        assert_eq!(mesh.positions().len(), 4);
    }

    #[test]
    fn explicit_normals_are_used() {
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
vn 0 0 2
vn 0 0 2
vn 0 0 2
f 1/1/1 2/2/2 3/3/3
";
        // Normals are renormalized on load.
        let mesh = load_mesh(obj).unwrap();
        assert_eq!(mesh.normals()[0], Vec3::Z);
    }

    #[test]
    fn index_zero_is_a_parse_error_naming_the_line() {
        let obj = "v 0 0 0\nvt 0 0\nf 0/1 1/1 1/1\n";
        let err = load_mesh(obj).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn out_of_range_index_is_reported() {
        let obj = "\
v 0 0 0
v 1 0 0
v 0 1 0
vt 0 0
vt 1 0
vt 0 1
f 1/1 2/2 4/3
";
        let err = load_mesh(obj).unwrap_err();
        assert!(err.to_string().contains("line 7"), "{err}");
    }

    #[test]
    fn missing_uv_is_a_parse_error() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let err = load_mesh(obj).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4") && msg.contains("uv"), "{msg}");
    }

    #[test]
    fn malformed_float_is_a_parse_error() {
        let obj = "v 0 zero 0\n";
        let err = load_mesh(obj).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn empty_mesh_is_rejected() {
        assert!(load_mesh("# nothing\n").is_err());
    }

    #[test]
    fn obj_round_trip_preserves_geometry() {
        let mesh = load_mesh(TRI).unwrap();
        let text = mesh.to_obj();
        let back = load_mesh(&text).unwrap();
        assert_eq!(back.positions().len(), mesh.positions().len());
        assert_eq!(back.triangles(), mesh.triangles());
        for (a, b) in mesh.uvs().iter().zip(back.uvs()) {
            assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-6);
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-6);
        }
    }

    #[test]
    fn bounds_cover_all_vertices() {
        let mesh = load_mesh(TRI).unwrap();
        let (lo, hi) = mesh.bounds();
        assert_eq!(lo, Vec3::ZERO);
        assert_eq!(hi, Vec3::new(1.0, 1.0, 0.0));
    }
}
