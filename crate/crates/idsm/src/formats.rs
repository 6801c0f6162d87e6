//! Plain-text and binary file formats.
//!
//! Floats are written with Rust's shortest round-trip representation, so
//! every text format reads back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use idsm_core::fem::BoundaryTrace;
use idsm_core::idsm::{KernelConfig, KernelTerm, ResolverKernel, SpaceTimeInner};
use idsm_core::synth::MeasurementSet;
use idsm_core::{CellField, Mesh, NodalField, SpaceTimeField};

use crate::error::{Error, Result};

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, token: Option<&str>, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| Error::format(path, line, format!("missing {what}")))?;
    token
        .trim()
        .parse()
        .map_err(|_| Error::format(path, line, format!("cannot parse {what} from `{token}`")))
}

/// Mesh as `V T B`, then vertex, triangle and boundary-edge lines.
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} {}",
        mesh.vertex_count(),
        mesh.cell_count(),
        mesh.boundary_edges.len()
    );
    for [x, y] in &mesh.vertices {
        let _ = writeln!(s, "{x} {y}");
    }
    for [a, b, c] in &mesh.triangles {
        let _ = writeln!(s, "{a} {b} {c}");
    }
    for [a, b] in &mesh.boundary_edges {
        let _ = writeln!(s, "{a} {b}");
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    write_string(path, &mesh_to_string(mesh))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = read_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines.next().ok_or_else(|| Error::format(path, 1, "empty mesh file"))?;
    let mut it = header.split_whitespace();
    let nv: usize = parse(path, n + 1, it.next(), "vertex count")?;
    let nt: usize = parse(path, n + 1, it.next(), "triangle count")?;
    let nb: usize = parse(path, n + 1, it.next(), "boundary edge count")?;
    let mut row = |what: &str, width: usize| -> Result<(usize, Vec<String>)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::format(path, 0, format!("file ends before all {what} lines")))?;
        let toks: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        if toks.len() != width {
            return Err(Error::format(path, n + 1, format!("{what} line needs {width} fields")));
        }
        Ok((n + 1, toks))
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, t) = row("vertex", 2)?;
        vertices.push([parse(path, ln, Some(&t[0]), "x")?, parse(path, ln, Some(&t[1]), "y")?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, t) = row("triangle", 3)?;
        triangles.push([
            parse(path, ln, Some(&t[0]), "index")?,
            parse(path, ln, Some(&t[1]), "index")?,
            parse(path, ln, Some(&t[2]), "index")?,
        ]);
    }
    let mut edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, t) = row("boundary edge", 2)?;
        edges.push([
            parse(path, ln, Some(&t[0]), "index")?,
            parse(path, ln, Some(&t[1]), "index")?,
        ]);
    }
    Ok(Mesh::new(vertices, triangles, edges)?)
}

/// Header of a stored boundary trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceHeader {
    pub noise: f64,
    pub seed: u64,
}

/// Text trace: a `samples boundary noise seed` header, then rows `t, v_1, …, v_B`.
pub fn write_trace_text(path: &Path, trace: &BoundaryTrace, header: TraceHeader) -> Result<()> {
    let file = create(path)?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        w,
        "{} {} {} {}",
        trace.len(),
        trace.boundary_count(),
        header.noise,
        header.seed
    )
    .map_err(io)?;
    let mut line = String::new();
    for (t, row) in trace.times.iter().zip(&trace.values) {
        line.clear();
        let _ = write!(line, "{t}");
        for v in row {
            let _ = write!(line, ", {v}");
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trace_text(path: &Path) -> Result<(BoundaryTrace, TraceHeader)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, 1, "empty trace file"))?
        .map_err(|e| Error::io(path, e))?;
    let mut it = header.split_whitespace();
    let samples: usize = parse(path, 1, it.next(), "sample count")?;
    let boundary: usize = parse(path, 1, it.next(), "boundary count")?;
    let noise = parse(path, 1, it.next(), "noise level")?;
    let seed = parse(path, 1, it.next(), "seed")?;
    let mut times = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ln = i + 2;
        let mut toks = line.split(',');
        times.push(parse(path, ln, toks.next(), "time")?);
        let row = toks
            .map(|t| parse(path, ln, Some(t), "value"))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != boundary {
            return Err(Error::format(
                path,
                ln,
                format!("expected {boundary} values, got {}", row.len()),
            ));
        }
        values.push(row);
    }
    if times.len() != samples {
        return Err(Error::format(
            path,
            1,
            format!("header promises {samples} rows, found {}", times.len()),
        ));
    }
    Ok((BoundaryTrace::new(times, values)?, TraceHeader { noise, seed }))
}

const TRACE_MAGIC: &[u8; 8] = b"IDSMTRC1";
const KERNEL_MAGIC: &[u8; 8] = b"IDSMKRN1";

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

struct Bytes<'a> {
    path: &'a Path,
    data: &'a [u8],
    pos: usize,
}

impl Bytes<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::format(self.path, 0, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self, limit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > limit {
            return Err(Error::format(self.path, 0, format!("implausible count {n}")));
        }
        Ok(n)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.saturating_mul(8))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(self.path, 0, "trailing bytes"));
        }
        Ok(())
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut data = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    Ok(data)
}

fn put_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Binary twin of the text trace, little-endian throughout.
pub fn write_trace_bin(path: &Path, trace: &BoundaryTrace, header: TraceHeader) -> Result<()> {
    let mut buf = Vec::with_capacity(40 + 8 * trace.len() * (trace.boundary_count() + 1));
    buf.extend_from_slice(TRACE_MAGIC);
    buf.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(trace.boundary_count() as u64).to_le_bytes());
    buf.extend_from_slice(&header.noise.to_le_bytes());
    buf.extend_from_slice(&header.seed.to_le_bytes());
    put_f64s(&mut buf, &trace.times);
    for row in &trace.values {
        put_f64s(&mut buf, row);
    }
    let mut f = create(path)?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_trace_bin(path: &Path) -> Result<(BoundaryTrace, TraceHeader)> {
    let data = read_bytes(path)?;
    let mut b = Bytes {
        path,
        data: &data,
        pos: 0,
    };
    if b.take(8)? != TRACE_MAGIC {
        return Err(Error::format(path, 0, "not a binary trace file"));
    }
    let samples = b.count(data.len() / 8)?;
    let boundary = b.count(data.len() / 8)?;
    let noise = b.f64()?;
    let seed = b.u64()?;
    let times = b.f64s(samples)?;
    let values = (0..samples).map(|_| b.f64s(boundary)).collect::<Result<Vec<_>>>()?;
    b.finish()?;
    Ok((BoundaryTrace::new(times, values)?, TraceHeader { noise, seed }))
}

/// Writes `clean.txt`, `noisy.txt` and their `.bin` twins into `dir`.
pub fn write_measurements(dir: &Path, set: &MeasurementSet) -> Result<()> {
    let header = TraceHeader {
        noise: set.noise_level,
        seed: set.seed,
    };
    write_trace_text(&dir.join("clean.txt"), &set.clean, header)?;
    write_trace_text(&dir.join("noisy.txt"), &set.noisy, header)?;
    write_trace_bin(&dir.join("clean.bin"), &set.clean, header)?;
    write_trace_bin(&dir.join("noisy.bin"), &set.noisy, header)
}

/// Reads a measurement directory, preferring the binary files.
pub fn read_measurements(dir: &Path) -> Result<MeasurementSet> {
    let load = |name: &str| {
        let bin = dir.join(format!("{name}.bin"));
        if bin.exists() {
            read_trace_bin(&bin)
        } else {
            read_trace_text(&dir.join(format!("{name}.txt")))
        }
    };
    let (clean, header) = load("clean")?;
    let (noisy, _) = load("noisy")?;
    if clean.times != noisy.times || clean.boundary_count() != noisy.boundary_count() {
        return Err(Error::format(
            &dir.join("noisy"),
            0,
            "clean and noisy traces differ in shape",
        ));
    }
    Ok(MeasurementSet {
        clean,
        noisy,
        noise_level: header.noise,
        seed: header.seed,
    })
}

/// Cell values as CSV: `cell,u0,u1,…`.
pub fn cell_field_to_csv(field: &CellField) -> String {
    let mut s = String::from("cell");
    for l in 0..field.components {
        let _ = write!(s, ",u{l}");
    }
    s.push('\n');
    for c in 0..field.cells {
        let _ = write!(s, "{c}");
        for l in 0..field.components {
            let _ = write!(s, ",{}", field.values[l * field.cells + c]);
        }
        s.push('\n');
    }
    s
}

pub fn read_cell_field_csv(path: &Path) -> Result<CellField> {
    let text = read_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format(path, 1, "empty field file"))?;
    let components = header.split(',').count().saturating_sub(1);
    if components == 0 {
        return Err(Error::format(path, 1, "no value columns"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ln = i + 2;
        let mut toks = line.split(',');
        let cell: usize = parse(path, ln, toks.next(), "cell index")?;
        if cell != rows.len() {
            return Err(Error::format(path, ln, "cells must be listed in order"));
        }
        let row = toks
            .map(|t| parse(path, ln, Some(t), "value"))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != components {
            return Err(Error::format(path, ln, format!("expected {components} values")));
        }
        rows.push(row);
    }
    let cells = rows.len();
    let mut values = vec![0.0; components * cells];
    for (c, row) in rows.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            values[l * cells + c] = *v;
        }
    }
    Ok(CellField::from_values(components, cells, values)?)
}

/// Nodal values, one per line after a count header.
pub fn nodal_to_string(field: &NodalField) -> String {
    let mut s = format!("{}\n", field.len());
    for v in &field.values {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn read_nodal(path: &Path) -> Result<NodalField> {
    let text = read_string(path)?;
    let mut lines = text.lines();
    let n: usize = parse(path, 1, lines.next(), "vertex count")?;
    let values = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(path, i + 2, Some(l), "value"))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != n {
        return Err(Error::format(
            path,
            1,
            format!("expected {n} values, found {}", values.len()),
        ));
    }
    Ok(NodalField { values })
}

/// Kernel scale and low-rank terms, little-endian binary.
pub fn write_kernel(path: &Path, kernel: &ResolverKernel) -> Result<()> {
    let inner = kernel.inner_product();
    let mut buf = Vec::new();
    buf.extend_from_slice(KERNEL_MAGIC);
    for n in [
        inner.time_weights.len(),
        inner.components,
        inner.areas.len(),
        kernel.rank(),
    ] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    put_f64s(&mut buf, kernel.scale());
    for t in kernel.terms() {
        buf.extend_from_slice(&t.coef.to_le_bytes());
        buf.extend_from_slice(&t.birth.to_le_bytes());
        buf.extend_from_slice(&t.group.to_le_bytes());
        put_f64s(&mut buf, &t.m.data);
        put_f64s(&mut buf, &t.n.data);
    }
    let mut f = create(path)?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a kernel written by [`write_kernel`] for the given coarse mesh and
/// inner product.
pub fn read_kernel(path: &Path, coarse: &Mesh, config: KernelConfig, inner: SpaceTimeInner) -> Result<ResolverKernel> {
    let data = read_bytes(path)?;
    let mut b = Bytes {
        path,
        data: &data,
        pos: 0,
    };
    if b.take(8)? != KERNEL_MAGIC {
        return Err(Error::format(path, 0, "not a kernel file"));
    }
    let limit = data.len() / 8;
    let (nodes, components, cells) = (b.u64()? as usize, b.u64()? as usize, b.u64()? as usize);
    if nodes != inner.time_weights.len() || components != inner.components || cells != inner.areas.len() {
        return Err(Error::format(path, 0, "kernel shape does not match the run"));
    }
    let rank = b.count(limit)?;
    let scale = b.f64s(components)?;
    let len = nodes * components * cells;
    let mut terms = Vec::with_capacity(rank);
    for _ in 0..rank {
        let coef = b.f64()?;
        let birth = b.f64()?;
        let group = b.u64()?;
        let field = |data| SpaceTimeField {
            nodes,
            components,
            cells,
            data,
        };
        let m = Arc::new(field(b.f64s(len)?));
        let n = Arc::new(field(b.f64s(len)?));
        terms.push(KernelTerm {
            coef,
            birth,
            m,
            n,
            group,
        });
    }
    b.finish()?;
    Ok(ResolverKernel::from_parts(coarse, config, inner, scale, terms)?)
}
