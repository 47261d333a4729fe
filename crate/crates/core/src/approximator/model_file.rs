//! Binary model file.
//!
//! ```text
//! magic      8 bytes  "HIPTNET\0"
//! version    u32 LE
//! spec_len   u32 LE
//! spec       spec_len bytes of JSON
//! count      u64 LE   number of parameters
//! params     count × f64 LE
//! checksum   32 bytes SHA-256 of everything above
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::ParamStore;
use super::spec::NetworkSpec;
use super::ApproxError;

pub const MODEL_MAGIC: &[u8; 8] = b"HIPTNET\0";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(spec: &NetworkSpec, params: &ParamStore) -> Vec<u8> {
    let spec_json = serde_json::to_vec(spec).expect("spec serializes");
    let mut out = Vec::with_capacity(64 + spec_json.len() + 8 * params.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec_json);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    out.extend_from_slice(&params.to_le_bytes());
    let checksum = Sha256::digest(&out);
    out.extend_from_slice(&checksum);
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<(NetworkSpec, ParamStore), ApproxError> {
    let corrupt = |why: &str| ApproxError::CorruptModel(why.to_string());
    if bytes.len() < MODEL_MAGIC.len() + 4 + 4 + 8 + 32 {
        return Err(corrupt("file too short"));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(ApproxError::ChecksumMismatch);
    }
    if &body[..8] != MODEL_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let spec_len = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
    let spec_end = 16 + spec_len;
    if body.len() < spec_end + 8 {
        return Err(corrupt("truncated spec"));
    }
    let spec: NetworkSpec = serde_json::from_slice(&body[16..spec_end]).map_err(|e| corrupt(&format!("spec: {e}")))?;
    let count = u64::from_le_bytes(body[spec_end..spec_end + 8].try_into().unwrap()) as usize;
    let data = &body[spec_end + 8..];
    if data.len() != count * 8 {
        return Err(corrupt("parameter count does not match payload"));
    }
    let params = ParamStore::from_le_bytes(data).ok_or_else(|| corrupt("payload"))?;
    if params.len() != spec.param_count() {
        return Err(corrupt("parameter count does not match spec"));
    }
    Ok((spec, params))
}

pub fn save_model(path: &Path, spec: &NetworkSpec, params: &ParamStore) -> std::io::Result<()> {
    std::fs::write(path, encode_model(spec, params))
}

pub fn load_model(path: &Path) -> Result<(NetworkSpec, ParamStore), ApproxError> {
    let bytes = std::fs::read(path).map_err(|e| ApproxError::Io(format!("{}: {e}", path.display())))?;
    decode_model(&bytes)
}
