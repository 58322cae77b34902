//! Binary checkpoint container.
//!
//! Layout (little-endian): the magic bytes, a `u32` format version, a `u64`
//! length followed by a JSON header holding the configuration, vocabulary
//! and step count, then a `u32` tensor count and for every tensor its name
//! (`u32` length + UTF-8), group byte, `u32` rows, `u32` cols, and three
//! blocks of `rows * cols` `f64` values: the weights and both Adam moments.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::ParserError;
use crate::params::{Group, ParamStore};
use crate::train::Parser;
use crate::vocab::Vocab;

pub const MAGIC: &[u8; 8] = b"SENTGRPH";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: Config,
    vocab: Vocab,
    step: usize,
}

fn bad(msg: impl Into<String>) -> ParserError {
    ParserError::Checkpoint(msg.into())
}

pub fn to_bytes(parser: &Parser) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        config: parser.config.clone(),
        vocab: parser.vocab.clone(),
        step: parser.step,
    })
    .expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    let params: Vec<_> = parser.store.iter().collect();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(match p.group {
            Group::Encoder => 0,
            Group::Decoder => 1,
        });
        out.extend_from_slice(&(p.rows as u32).to_le_bytes());
        out.extend_from_slice(&(p.cols as u32).to_le_bytes());
        for block in [&p.value, &p.adam_m, &p.adam_v] {
            for x in block {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ParserError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| bad("truncated file"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ParserError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ParserError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ParserError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn from_bytes(data: &[u8]) -> Result<Parser, ParserError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let len = usize::try_from(r.u64()?).map_err(|_| bad("header too large"))?;
    let header: Header =
        serde_json::from_slice(r.take(len)?).map_err(|e| bad(format!("header: {e}")))?;
    let mut store = ParamStore::default();
    let count = r.u32()?;
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name =
            String::from_utf8(r.take(n)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
        let group = match r.take(1)?[0] {
            0 => Group::Encoder,
            1 => Group::Decoder,
            g => return Err(bad(format!("unknown group {g} for {name}"))),
        };
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let size = rows
            .checked_mul(cols)
            .ok_or_else(|| bad("tensor too large"))?;
        let value = r.f64s(size)?;
        let adam_m = r.f64s(size)?;
        let adam_v = r.f64s(size)?;
        if store.find(&name).is_some() {
            return Err(bad(format!("tensor {name} appears twice")));
        }
        let id = store.add(name, rows, cols, value, group);
        let p = store.get_mut(id);
        p.adam_m = adam_m;
        p.adam_v = adam_v;
    }
    if r.pos != data.len() {
        return Err(bad("trailing bytes after the last tensor"));
    }
    let mut vocab = header.vocab;
    vocab.reindex();
    Parser::from_parts(header.config, vocab, store, header.step)
}

pub fn save(parser: &Parser, path: &Path) -> Result<(), ParserError> {
    let io = |e: std::io::Error| ParserError::Io(format!("{}: {e}", path.display()));
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&to_bytes(parser)).map_err(io)
}

pub fn load(path: &Path) -> Result<Parser, ParserError> {
    let io = |e: std::io::Error| ParserError::Io(format!("{}: {e}", path.display()));
    let mut data = Vec::new();
    std::fs::File::open(path)
        .map_err(io)?
        .read_to_end(&mut data)
        .map_err(io)?;
    from_bytes(&data)
}
