//! Versioned binary model file.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field            | type      |
//! |------------------|-----------|
//! | magic `SHRALSTM` | 8 bytes   |
//! | version (= 1)    | u32       |
//! | hidden1          | u32       |
//! | attention        | u32       |
//! | hidden2          | u32       |
//! | window m         | u32       |
//! | cell variant     | u32 (0 standard, 1 forget⊙candidate) |
//! | scale            | f64       |
//! | parameter count  | u64       |
//! | parameters       | f64 × count |
//!
//! Parameters follow [`PredictorModel::tensors`] order: layer-1 weights,
//! layer-1 bias, attention query, attention input weights, attention
//! recurrent weights, layer-2 weights, layer-2 bias, FC weights, FC bias.
//! Matrices are row-major.

use std::io::{Read, Write};
use std::path::Path;

use super::{CellVariant, ModelShape, PredictorModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"SHRALSTM";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model<W: Write>(model: &PredictorModel, mut out: W) -> std::io::Result<()> {
    let shape = model.shape();
    out.write_all(MODEL_MAGIC)?;
    for v in [
        MODEL_VERSION,
        shape.hidden1 as u32,
        shape.attention as u32,
        shape.hidden2 as u32,
        shape.window as u32,
        shape.cell.code(),
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&model.scale.to_le_bytes())?;
    out.write_all(&(model.param_count() as u64).to_le_bytes())?;
    for t in model.tensors() {
        for w in t {
            out.write_all(&w.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> std::result::Result<[u8; N], String> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| format!("truncated model file: {e}"))?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R) -> std::result::Result<u32, String> {
    read_array::<4, _>(input).map(u32::from_le_bytes)
}

fn read_f64<R: Read>(input: &mut R) -> std::result::Result<f64, String> {
    read_array::<8, _>(input).map(f64::from_le_bytes)
}

/// Parses a model, reporting problems as plain messages.
pub fn read_model<R: Read>(mut input: R) -> std::result::Result<PredictorModel, String> {
    let magic = read_array::<8, _>(&mut input)?;
    if &magic != MODEL_MAGIC {
        return Err("not a predictor model file (bad magic)".into());
    }
    let version = read_u32(&mut input)?;
    if version != MODEL_VERSION {
        return Err(format!("unsupported model version {version}"));
    }
    let hidden1 = read_u32(&mut input)? as usize;
    let attention = read_u32(&mut input)? as usize;
    let hidden2 = read_u32(&mut input)? as usize;
    let window = read_u32(&mut input)? as usize;
    let code = read_u32(&mut input)?;
    let cell = CellVariant::from_code(code).ok_or_else(|| format!("unknown cell variant {code}"))?;
    if hidden1 == 0 || attention == 0 || hidden2 == 0 || window == 0 {
        return Err("model sizes must be positive".into());
    }
    let mut model = PredictorModel::zeros(ModelShape {
        hidden1,
        attention,
        hidden2,
        window,
        cell,
    });
    model.scale = read_f64(&mut input)?;
    let count = u64::from_le_bytes(read_array::<8, _>(&mut input)?) as usize;
    if count != model.param_count() {
        return Err(format!(
            "header declares {count} parameters, shape needs {}",
            model.param_count()
        ));
    }
    for t in model.tensors_mut() {
        for w in t.iter_mut() {
            *w = read_f64(&mut input)?;
        }
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(|e| e.to_string())?;
    if !rest.is_empty() {
        return Err(format!("{} trailing bytes after parameters", rest.len()));
    }
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

pub fn save_model(model: &PredictorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(64 + 8 * model.param_count());
    write_model(model, &mut buf).expect("writing to a Vec cannot fail");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PredictorModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(bytes.as_slice()).map_err(|m| Error::parse(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let model = PredictorModel::random(
            ModelShape {
                hidden1: 2,
                attention: 3,
                hidden2: 2,
                window: 4,
                cell: CellVariant::ForgetCandidateProduct,
            },
            1,
        );
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        assert_eq!(&buf[..8], b"SHRALSTM");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[28..32].try_into().unwrap()), 1);
        assert_eq!(buf.len(), 48 + 8 * model.param_count());
        assert_eq!(read_model(buf.as_slice()).unwrap(), model);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = PredictorModel::random(ModelShape::default(), 2);
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        assert!(read_model(&buf[..buf.len() - 1]).unwrap_err().contains("truncated"));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_model(extra.as_slice()).unwrap_err().contains("trailing"));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model(bad.as_slice()).unwrap_err().contains("magic"));
        let mut ver = buf;
        ver[8] = 9;
        assert!(read_model(ver.as_slice()).unwrap_err().contains("version"));
    }
}
