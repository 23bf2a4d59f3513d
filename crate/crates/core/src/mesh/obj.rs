//! Minimal Wavefront OBJ reader (positions and faces) and writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::{GwsError, Result, Vec3};

/// Raw polygon soup as read from an OBJ file, faces fan-triangulated.
#[derive(Clone, Debug, Default)]
pub struct ObjData {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

fn parse_err(source: &str, line: usize, msg: impl Into<String>) -> GwsError {
    GwsError::Parse {
        source_name: source.to_string(),
        line,
        msg: msg.into(),
    }
}

fn resolve_index(tok: &str, n_vertices: usize, source: &str, line: usize) -> Result<u32> {
    let head = tok.split('/').next().unwrap_or("");
    let idx: i64 = head
        .parse()
        .map_err(|_| parse_err(source, line, format!("bad vertex index {tok:?}")))?;
    let resolved = match idx {
        0 => return Err(parse_err(source, line, "vertex index 0 is not valid")),
        i if i > 0 => i - 1,
        i => n_vertices as i64 + i,
    };
    if resolved < 0 || resolved as usize >= n_vertices {
        return Err(parse_err(
            source,
            line,
            format!("vertex index {idx} out of range ({n_vertices} vertices defined)"),
        ));
    }
    Ok(resolved as u32)
}

/// Parses OBJ text. `source` names the input in error messages.
pub fn parse_obj(text: &str, source: &str) -> Result<ObjData> {
    let mut data = ObjData::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<&str> = toks.collect();
                if coords.len() < 3 {
                    return Err(parse_err(source, line_no, "vertex needs three coordinates"));
                }
                let mut p = [0.0; 3];
                for (k, c) in coords[..3].iter().enumerate() {
                    p[k] = c
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            parse_err(source, line_no, format!("bad coordinate {c:?}"))
                        })?;
                }
                data.vertices.push(Vec3::new(p[0], p[1], p[2]));
            }
            Some("f") => {
                let idx = toks
                    .map(|t| resolve_index(t, data.vertices.len(), source, line_no))
                    .collect::<Result<Vec<u32>>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(
                        source,
                        line_no,
                        "face needs at least three vertices",
                    ));
                }
                for k in 1..idx.len() - 1 {
                    data.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if data.triangles.is_empty() {
        return Err(parse_err(
            source,
            text.lines().count().max(1),
            "no faces found",
        ));
    }
    Ok(data)
}

/// Reads and parses an OBJ file.
pub fn read_obj(path: &Path) -> Result<ObjData> {
    let text = std::fs::read_to_string(path).map_err(|e| GwsError::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

/// Serializes vertices and triangles as OBJ text.
pub fn to_obj(vertices: &[Vec3], triangles: &[[u32; 3]]) -> String {
    let mut s = String::new();
    for v in vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}
