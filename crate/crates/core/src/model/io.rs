//! Binary checkpoints and text embedding export.
//!
//! Checkpoint layout:
//!
//! ```text
//! QUATRE\t<version>\t<|E|>\t<|R|>\t<n>\t<float bits>\n
//! entity  r-plane, i-plane, j-plane, k-plane
//! relation r, i, j, k
//! rot1    r, i, j, k
//! rot2    r, i, j, k
//! ```
//!
//! Each plane is `rows × n` little-endian floats, row-major (row 0's `n`
//! values first). Adagrad accumulators are not stored.
//!
//! Text export: one line per row, `label<TAB>v_1<TAB>…<TAB>v_4n`, with the
//! `4n` values ordered r-plane, i-plane, j-plane, k-plane. When more than one
//! table is exported each block starts with a `## <table>` line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ParamStore, QTable, TableKind};
use crate::data::Dictionary;
use crate::error::{Error, Result};
use crate::real::Real;

pub const CHECKPOINT_MAGIC: &str = "QUATRE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub num_entities: usize,
    pub num_relations: usize,
    pub dim: usize,
    pub float_bits: u32,
}

impl CheckpointHeader {
    fn line(&self) -> String {
        format!(
            "{CHECKPOINT_MAGIC}\t{}\t{}\t{}\t{}\t{}\n",
            self.version, self.num_entities, self.num_relations, self.dim, self.float_bits
        )
    }

    fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end_matches(['\n', '\r']).split('\t').collect();
        if fields.len() != 6 || fields[0] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("bad header {line:?}")));
        }
        let num = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Checkpoint(format!("bad {what} field {s:?}")))
        };
        let header = CheckpointHeader {
            version: num(fields[1], "version")? as u32,
            num_entities: num(fields[2], "entity count")?,
            num_relations: num(fields[3], "relation count")?,
            dim: num(fields[4], "dimension")?,
            float_bits: num(fields[5], "float width")? as u32,
        };
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }
        if header.float_bits != 32 && header.float_bits != 64 {
            return Err(Error::Checkpoint(format!(
                "unsupported float width {}",
                header.float_bits
            )));
        }
        if header.dim == 0 {
            return Err(Error::Checkpoint("dimension must be >= 1".into()));
        }
        Ok(header)
    }
}

pub fn save_checkpoint<T: Real>(params: &ParamStore<T>, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        num_entities: params.num_entities(),
        num_relations: params.num_relations(),
        dim: params.dim(),
        float_bits: T::BITS,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(header.line().as_bytes())
        .map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    for kind in TableKind::ALL {
        for plane in params.table(kind).planes() {
            buf.clear();
            for &x in plane {
                x.write_le(&mut buf);
            }
            out.write_all(&buf).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_header_line(reader: &mut impl BufRead, path: &Path) -> Result<CheckpointHeader> {
    let mut line = Vec::new();
    reader
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::io(path, e))?;
    let line = String::from_utf8(line)
        .map_err(|_| Error::Checkpoint(format!("{}: header is not text", path.display())))?;
    CheckpointHeader::parse(&line)
}

pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_header_line(&mut BufReader::new(file), path)
}

/// Loads a checkpoint written with float width `T::BITS`.
pub fn load_checkpoint<T: Real>(path: &Path) -> Result<ParamStore<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let header = read_header_line(&mut reader, path)?;
    if header.float_bits != T::BITS {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {}-bit floats, requested {}-bit",
            header.float_bits,
            T::BITS
        )));
    }
    let width = (T::BITS / 8) as usize;
    let mut store = ParamStore::<T>::zeros(header.num_entities, header.num_relations, header.dim);
    let mut bytes = Vec::new();
    for kind in TableKind::ALL {
        let table = store.table_mut(kind);
        let (rows, n) = (table.rows(), table.dim());
        let mut planes: [Vec<T>; 4] = Default::default();
        for plane in &mut planes {
            bytes.resize(rows * n * width, 0);
            reader.read_exact(&mut bytes).map_err(|e| {
                Error::Checkpoint(format!("{}: truncated body ({e})", path.display()))
            })?;
            *plane = bytes.chunks_exact(width).map(T::read_le).collect();
        }
        *table = QTable::from_planes(rows, n, planes)?;
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::Checkpoint(format!(
            "{}: trailing bytes after body",
            path.display()
        )));
    }
    Ok(store)
}

/// A labeled block of rows read back from a text export.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportSection<T> {
    pub name: String,
    pub rows: Vec<(String, Vec<T>)>,
}

fn write_rows<T: Real>(
    out: &mut impl Write,
    table: &QTable<T>,
    labels: &Dictionary,
) -> std::io::Result<()> {
    for id in 0..table.rows() {
        let label = labels
            .label(id as u32)
            .map(str::to_owned)
            .unwrap_or_else(|| id.to_string());
        let row = table.row(id);
        write!(out, "{label}")?;
        for plane in [row.r, row.i, row.j, row.k] {
            for x in plane {
                write!(out, "\t{x}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes entity embeddings, and with `relations` also `v_r`, `w1`, `w2`.
pub fn write_text_export<T: Real>(
    params: &ParamStore<T>,
    entities: &Dictionary,
    relations: &Dictionary,
    include_relations: bool,
    out: &mut impl Write,
) -> std::io::Result<()> {
    if !include_relations {
        return write_rows(out, &params.entity, entities);
    }
    let blocks = [
        ("entities", &params.entity, entities),
        ("relations", &params.relation, relations),
        ("rot1", &params.rot1, relations),
        ("rot2", &params.rot2, relations),
    ];
    for (name, table, labels) in blocks {
        writeln!(out, "## {name}")?;
        write_rows(out, table, labels)?;
    }
    Ok(())
}

/// Parses a text export. Rows before any `## ` header land in `entities`.
pub fn read_text_export<T: Real>(reader: impl BufRead) -> Result<Vec<ExportSection<T>>> {
    let mut sections: Vec<ExportSection<T>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<export>", e))?;
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix("## ") {
            sections.push(ExportSection {
                name: name.to_owned(),
                rows: Vec::new(),
            });
            continue;
        }
        let mut fields = line.split('\t');
        let label = fields.next().unwrap_or_default().to_owned();
        let values = fields
            .map(|f| {
                f.parse::<T>().map_err(|_| Error::Parse {
                    path: "<export>".into(),
                    line: lineno + 1,
                    message: format!("bad float {f:?}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        if sections.is_empty() {
            sections.push(ExportSection {
                name: "entities".into(),
                rows: Vec::new(),
            });
        }
        sections.last_mut().unwrap().rows.push((label, values));
    }
    Ok(sections)
}
