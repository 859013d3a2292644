//! Point-cloud file I/O: xyz-ascii and ply-ascii.
//!
//! * xyz-ascii: one point per line, three whitespace-separated fields,
//!   `#` starts a comment line.
//! * ply-ascii: standard header, `element vertex`, float or double
//!   properties `x y z`; any extra vertex properties are skipped.
//!
//! Coordinates are written with shortest round-trip formatting, so a
//! write/read cycle reproduces the input bit-exactly.

use crate::cloud::{FrameTag, PointCloud};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::scalar::{cast, to_f64, Real};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Supported on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    XyzAscii,
    PlyAscii,
}

impl Format {
    /// Picks a format from the file extension; xyz when unrecognized.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => Format::PlyAscii,
            _ => Format::XyzAscii,
        }
    }
}

/// Reads a cloud; the frame tag is the caller's claim about the file.
pub fn read_cloud<S: Real>(path: &Path, format: Format, frame: FrameTag) -> Result<PointCloud<S>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let label = path.display().to_string();
    let points = match format {
        Format::XyzAscii => read_xyz(reader, path)?,
        Format::PlyAscii => read_ply(reader, path)?,
    };
    PointCloud::new(points, frame, label)
}

/// Writes a cloud in the given format.
pub fn write_cloud<S: Real>(cloud: &PointCloud<S>, path: &Path, format: Format) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        Format::XyzAscii => write_xyz(cloud, &mut w),
        Format::PlyAscii => write_ply(cloud, &mut w),
    };
    res.and_then(|()| w.flush()).map_err(|e| Error::io(path, e))
}

fn parse_coord<S: Real>(
    field: &str,
    path: &Path,
    line_no: usize,
    axis: &str,
) -> Result<S> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("invalid {axis} coordinate {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line_no, format!("non-finite {axis} coordinate {field:?}")));
    }
    Ok(cast(v))
}

fn read_xyz<S: Real, R: BufRead>(reader: R, path: &Path) -> Result<Vec<Point3<S>>> {
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut fields = body.split_whitespace();
        let (fx, fy, fz) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::parse(path, line_no, "expected 3 coordinate fields"));
            }
        };
        if fields.next().is_some() {
            return Err(Error::parse(path, line_no, "expected exactly 3 coordinate fields"));
        }
        points.push(Point3::new(
            parse_coord(fx, path, line_no, "x")?,
            parse_coord(fy, path, line_no, "y")?,
            parse_coord(fz, path, line_no, "z")?,
        ));
    }
    Ok(points)
}

fn write_xyz<S: Real, W: Write>(cloud: &PointCloud<S>, w: &mut W) -> std::io::Result<()> {
    for p in cloud.points() {
        writeln!(w, "{} {} {}", to_f64(p.x), to_f64(p.y), to_f64(p.z))?;
    }
    Ok(())
}

fn read_ply<S: Real, R: BufRead>(reader: R, path: &Path) -> Result<Vec<Point3<S>>> {
    let mut lines = reader.lines().enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((i, Ok(l))) => Ok(Some((i + 1, l))),
            Some((_, Err(e))) => Err(Error::io(path, e)),
            None => Ok(None),
        }
    };

    let (n1, magic) = next_line()?.ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if magic.trim() != "ply" {
        return Err(Error::parse(path, n1, "missing ply magic line"));
    }

    let mut vertex_count: Option<usize> = None;
    let mut in_vertex_element = false;
    let mut vertex_props: Vec<String> = Vec::new();
    let header_end;
    loop {
        let (line_no, line) =
            next_line()?.ok_or_else(|| Error::parse(path, 0, "header ended before end_header"))?;
        let body = line.trim();
        let mut tok = body.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(Error::parse(path, line_no, "only ascii format is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, line_no, "bad element count"))?;
                if name == "vertex" {
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    if count != 0 {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("unsupported non-empty element {name:?}"),
                        ));
                    }
                    in_vertex_element = false;
                }
            }
            Some("property") => {
                if in_vertex_element {
                    let ty = tok.next().unwrap_or("");
                    if ty == "list" {
                        return Err(Error::parse(path, line_no, "list vertex properties unsupported"));
                    }
                    let name = tok.next().unwrap_or("");
                    vertex_props.push(name.to_string());
                }
            }
            Some("end_header") => {
                header_end = line_no;
                break;
            }
            Some(other) => {
                return Err(Error::parse(path, line_no, format!("unknown header keyword {other:?}")));
            }
        }
    }

    let count =
        vertex_count.ok_or_else(|| Error::parse(path, header_end, "no vertex element in header"))?;
    let ix = vertex_props.iter().position(|p| p == "x");
    let iy = vertex_props.iter().position(|p| p == "y");
    let iz = vertex_props.iter().position(|p| p == "z");
    let (ix, iy, iz) = match (ix, iy, iz) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(path, header_end, "vertex element lacks x, y, z properties")),
    };

    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let (line_no, line) = next_line()?.ok_or_else(|| {
            Error::parse(path, header_end, format!("expected {count} vertices, file ended early"))
        })?;
        let body = line.trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < vertex_props.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} vertex fields, found {}", vertex_props.len(), fields.len()),
            ));
        }
        points.push(Point3::new(
            parse_coord(fields[ix], path, line_no, "x")?,
            parse_coord(fields[iy], path, line_no, "y")?,
            parse_coord(fields[iz], path, line_no, "z")?,
        ));
    }
    Ok(points)
}

fn write_ply<S: Real, W: Write>(cloud: &PointCloud<S>, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    writeln!(w, "end_header")?;
    for p in cloud.points() {
        writeln!(w, "{} {} {}", to_f64(p.x), to_f64(p.y), to_f64(p.z))?;
    }
    Ok(())
}
