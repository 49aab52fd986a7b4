//! Buffer directories: `<name>.bin` holds little-endian integers at the
//! dtype's width, `<name>.desc` holds the line `name dtype count`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{BufferStore, Tensor};
use crate::ir::DType;

#[derive(Debug, Error)]
pub enum StoreIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: malformed descriptor: {message}")]
    Descriptor { path: PathBuf, message: String },
    #[error("{path}: expected {expected} bytes, found {found}")]
    Length { path: PathBuf, expected: usize, found: usize },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreIoError + '_ {
    move |source| StoreIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads every buffer described in `dir`.
pub fn read_store(dir: &Path) -> Result<BufferStore, StoreIoError> {
    let mut store = BufferStore::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "desc"))
        .collect();
    entries.sort();
    for desc in entries {
        let text = fs::read_to_string(&desc).map_err(io_err(&desc))?;
        let bad = |message: &str| StoreIoError::Descriptor {
            path: desc.clone(),
            message: message.to_string(),
        };
        let fields: Vec<&str> = text.split_whitespace().collect();
        let [name, dtype, count] = fields[..] else {
            return Err(bad("expected `name dtype count`"));
        };
        let dtype: DType = dtype.parse().map_err(|_| bad("unknown dtype"))?;
        let count: usize = count.parse().map_err(|_| bad("bad element count"))?;
        let bin = dir.join(format!("{name}.bin"));
        let bytes = fs::read(&bin).map_err(io_err(&bin))?;
        let width = dtype.bytes();
        if bytes.len() != count * width {
            return Err(StoreIoError::Length {
                path: bin,
                expected: count * width,
                found: bytes.len(),
            });
        }
        let data = bytes
            .chunks_exact(width)
            .map(|c| match width {
                1 => c[0] as i8 as i32,
                2 => i16::from_le_bytes([c[0], c[1]]) as i32,
                _ => i32::from_le_bytes([c[0], c[1], c[2], c[3]]),
            })
            .collect();
        store.insert(name, Tensor { dtype, data });
    }
    Ok(store)
}

pub fn write_store(dir: &Path, store: &BufferStore) -> Result<(), StoreIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, t) in store.iter() {
        let mut bytes = Vec::with_capacity(t.len() * t.dtype.bytes());
        for &v in &t.data {
            match t.dtype.bytes() {
                1 => bytes.push(v as i8 as u8),
                2 => bytes.extend_from_slice(&(v as i16).to_le_bytes()),
                _ => bytes.extend_from_slice(&v.to_le_bytes()),
            }
        }
        let bin = dir.join(format!("{name}.bin"));
        fs::write(&bin, bytes).map_err(io_err(&bin))?;
        let desc = dir.join(format!("{name}.desc"));
        fs::write(&desc, format!("{name} {} {}\n", t.dtype, t.len())).map_err(io_err(&desc))?;
    }
    Ok(())
}
