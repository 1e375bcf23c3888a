//! Model files: `"GSEG"`, u32 version, u32 filters, u32 blocks, then every
//! trainable tensor followed by every running statistic as little-endian
//! f32, then a CRC-32 of everything before it.

use std::path::Path;

use super::model::NetworkModel;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"GSEG";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn model_to_bytes(model: &NetworkModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * model.count_parameters() + 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.filters() as u32).to_le_bytes());
    out.extend_from_slice(&(model.block_count() as u32).to_le_bytes());
    let mut put = |t: &[f32]| t.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    model.visit_params(&mut put);
    model.visit_running_stats(&mut put);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<NetworkModel> {
    if bytes.len() < HEADER_LEN + 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not a GSEG model file".into()));
    }
    let version = read_u32(bytes, 4);
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "model format version {version}, expected {MODEL_VERSION}"
        )));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = read_u32(bytes, bytes.len() - 4);
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Format(format!(
            "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }
    let filters = read_u32(bytes, 8) as usize;
    let blocks = read_u32(bytes, 12) as usize;
    if filters == 0 || filters > 4096 || blocks > 4096 {
        return Err(Error::Format(format!("implausible shape F={filters}, blocks={blocks}")));
    }
    let mut model = NetworkModel::new(filters, blocks)?;
    let expected = HEADER_LEN + 4 * model.count_parameters();
    if body.len() != expected {
        return Err(Error::Format(format!(
            "payload of {} bytes, expected {expected} for F={filters}, blocks={blocks}",
            body.len()
        )));
    }
    let mut at = HEADER_LEN;
    let mut take = |t: &mut [f32]| {
        for v in t.iter_mut() {
            *v = f32::from_le_bytes(body[at..at + 4].try_into().expect("4 bytes"));
            at += 4;
        }
    };
    model.visit_params_mut(&mut take);
    model.visit_running_stats_mut(&mut take);
    Ok(model)
}

pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
