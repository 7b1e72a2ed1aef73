//! ASCII OFF reader/writer for triangle meshes.

use std::io::{BufRead, Write};
use std::path::Path;

use super::mesh::SurfaceMesh;
use crate::{Error, Result, Vec3};

/// Parses an ASCII OFF triangle mesh. Comments (`#`) and blank lines are
/// skipped; the counts may follow `OFF` on the same line. Only triangular
/// faces are accepted.
pub fn read_off<R: BufRead>(reader: R) -> Result<SurfaceMesh> {
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            tokens.push((lineno + 1, tok.to_string()));
        }
    }
    let mut it = tokens.into_iter();
    let err = |line: usize, message: String| Error::OffParse { line, message };

    match it.next() {
        Some((_, ref t)) if t == "OFF" => {}
        Some((line, t)) => return Err(err(line, format!("expected 'OFF' header, found '{t}'"))),
        None => return Err(err(0, "empty file".into())),
    }
    let mut next_num = |what: &str| -> Result<(usize, String)> { it.next().ok_or_else(|| err(0, format!("unexpected end of file reading {what}"))) };
    let parse_usize = |(line, t): (usize, String)| t.parse::<usize>().map_err(|_| err(line, format!("expected integer, found '{t}'")));
    let parse_f64 = |(line, t): (usize, String)| t.parse::<f64>().map_err(|_| err(line, format!("expected number, found '{t}'")));

    let nv = parse_usize(next_num("vertex count")?)?;
    let nf = parse_usize(next_num("face count")?)?;
    let _ne = parse_usize(next_num("edge count")?)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = parse_f64(next_num("vertex")?)?;
        let y = parse_f64(next_num("vertex")?)?;
        let z = parse_f64(next_num("vertex")?)?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let tok = next_num("face")?;
        let line = tok.0;
        let k = parse_usize(tok)?;
        if k != 3 {
            return Err(err(line, format!("only triangular faces are supported, found {k}-gon")));
        }
        let a = parse_usize(next_num("face")?)?;
        let b = parse_usize(next_num("face")?)?;
        let c = parse_usize(next_num("face")?)?;
        triangles.push([a, b, c]);
    }
    SurfaceMesh::new(vertices, triangles)
}

pub fn read_off_str(text: &str) -> Result<SurfaceMesh> {
    read_off(text.as_bytes())
}

pub fn read_off_file(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    let file = std::fs::File::open(path)?;
    read_off(std::io::BufReader::new(file))
}

/// Writes the mesh as ASCII OFF with round-trip exact coordinates.
pub fn write_off<W: Write>(mesh: &SurfaceMesh, mut w: W) -> Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} {}", mesh.n_vertices(), mesh.n_triangles(), mesh.n_edges())?;
    for v in mesh.vertices() {
        writeln!(w, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for [a, b, c] in mesh.triangles() {
        writeln!(w, "3 {a} {b} {c}")?;
    }
    Ok(())
}

pub fn write_off_file(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_off(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}
