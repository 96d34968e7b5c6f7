//! Model checkpoint container.
//!
//! Layout: a one-line magic/version header, a line with the manifest length
//! and its SHA-256, the plain-text manifest itself, then the raw
//! little-endian parameter payload in manifest order. The manifest records
//! the model configuration, the precision tag, the payload checksum, and the
//! ordered parameter name/shape table.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::encoder::EncoderConfig;
use crate::heads::{HeadConfig, SummaryMode};
use crate::model::EmotionModel;
use crate::rng::SeedRng;
use crate::tensor::Tensor;

const MAGIC: &str = "LYRNETCKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic header)")]
    BadMagic,
    #[error("unsupported checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("checkpoint integrity check failed: {what} checksum does not match")]
    Integrity { what: &'static str },
    #[error("checkpoint truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("parameter '{param}' has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        param: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("malformed checkpoint manifest: {0}")]
    Malformed(String),
}

/// Storage width of the parameter payload. Computation is always 64-bit;
/// 32-bit storage halves the file at the cost of rounding each weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl Precision {
    fn tag(self) -> &'static str {
        match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        }
    }

    fn width(self) -> usize {
        match self {
            Precision::F64 => 8,
            Precision::F32 => 4,
        }
    }
}

fn summary_mode_tag(mode: SummaryMode) -> &'static str {
    match mode {
        SummaryMode::LastToken => "last_token",
        SummaryMode::Mean => "mean",
    }
}

fn shape_tag(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

pub fn save_checkpoint(
    model: &mut EmotionModel,
    precision: Precision,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut payload: Vec<u8> = Vec::new();
    let mut table = String::new();
    model.for_each_param(&mut |name, t| {
        table.push_str(&format!("param {name} {}\n", shape_tag(t.shape())));
        for &v in t.data() {
            match precision {
                Precision::F64 => payload.extend(v.to_le_bytes()),
                Precision::F32 => payload.extend((v as f32).to_le_bytes()),
            }
        }
    });
    let payload_sha = hex(&Sha256::digest(&payload));

    let ec = &model.encoder.config;
    let hc = &model.heads.config;
    let mut manifest = String::new();
    manifest.push_str(&format!("format_version {FORMAT_VERSION}\n"));
    manifest.push_str(&format!("precision {}\n", precision.tag()));
    manifest.push_str(&format!("encoder.n_layers {}\n", ec.n_layers));
    manifest.push_str(&format!("encoder.n_heads {}\n", ec.n_heads));
    manifest.push_str(&format!("encoder.d_model {}\n", ec.d_model));
    manifest.push_str(&format!("encoder.d_ff {}\n", ec.d_ff));
    manifest.push_str(&format!("encoder.dropout_p {}\n", ec.dropout_p));
    manifest.push_str(&format!("encoder.max_seq_len {}\n", ec.max_seq_len));
    manifest.push_str(&format!("encoder.memory_len {}\n", ec.memory_len));
    manifest.push_str(&format!("encoder.vocab_size {}\n", ec.vocab_size));
    manifest.push_str(&format!(
        "head.summary_mode {}\n",
        summary_mode_tag(hc.summary_mode)
    ));
    manifest.push_str(&format!("head.bottleneck_dim {}\n", hc.bottleneck_dim));
    manifest.push_str(&format!("head.dropout_p {}\n", hc.dropout_p));
    manifest.push_str(&format!("payload_sha256 {payload_sha}\n"));
    manifest.push_str(&table);

    let manifest_sha = hex(&Sha256::digest(manifest.as_bytes()));
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(w, "{} {manifest_sha}", manifest.len())?;
    w.write_all(manifest.as_bytes())?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<EmotionModel, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_line(&mut r)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(CheckpointError::BadMagic);
    }
    let version = parts.next().unwrap_or("missing");
    if version != FORMAT_VERSION.to_string() {
        return Err(CheckpointError::VersionMismatch {
            found: version.to_string(),
            expected: FORMAT_VERSION,
        });
    }

    let sizes = read_line(&mut r)?;
    let mut parts = sizes.split_whitespace();
    let manifest_len: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CheckpointError::Malformed("missing manifest length".into()))?;
    let manifest_sha = parts
        .next()
        .ok_or_else(|| CheckpointError::Malformed("missing manifest checksum".into()))?
        .to_string();

    let mut manifest_bytes = vec![0u8; manifest_len];
    r.read_exact(&mut manifest_bytes)
        .map_err(|_| CheckpointError::Malformed("manifest shorter than declared".into()))?;
    if hex(&Sha256::digest(&manifest_bytes)) != manifest_sha {
        return Err(CheckpointError::Integrity { what: "manifest" });
    }
    let manifest = String::from_utf8(manifest_bytes)
        .map_err(|_| CheckpointError::Malformed("manifest is not UTF-8".into()))?;

    let mut fields: HashMap<&str, &str> = HashMap::new();
    let mut params: Vec<(String, Vec<usize>)> = Vec::new();
    for line in manifest.lines() {
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| CheckpointError::Malformed(format!("bad line '{line}'")))?;
        if key == "param" {
            let (name, shape) = value
                .split_once(' ')
                .ok_or_else(|| CheckpointError::Malformed(format!("bad param line '{line}'")))?;
            let dims: Result<Vec<usize>, _> = shape.split('x').map(|d| d.parse()).collect();
            let dims = dims
                .map_err(|_| CheckpointError::Malformed(format!("bad shape '{shape}'")))?;
            params.push((name.to_string(), dims));
        } else {
            fields.insert(key, value);
        }
    }

    let field = |k: &str| -> Result<&str, CheckpointError> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| CheckpointError::Malformed(format!("missing field '{k}'")))
    };
    let num = |k: &str| -> Result<usize, CheckpointError> {
        field(k)?
            .parse()
            .map_err(|_| CheckpointError::Malformed(format!("bad numeric field '{k}'")))
    };
    let real = |k: &str| -> Result<f64, CheckpointError> {
        field(k)?
            .parse()
            .map_err(|_| CheckpointError::Malformed(format!("bad numeric field '{k}'")))
    };

    let precision = match field("precision")? {
        "f64" => Precision::F64,
        "f32" => Precision::F32,
        other => {
            return Err(CheckpointError::Malformed(format!(
                "unknown precision '{other}'"
            )))
        }
    };
    let encoder_config = EncoderConfig {
        n_layers: num("encoder.n_layers")?,
        n_heads: num("encoder.n_heads")?,
        d_model: num("encoder.d_model")?,
        d_ff: num("encoder.d_ff")?,
        dropout_p: real("encoder.dropout_p")?,
        max_seq_len: num("encoder.max_seq_len")?,
        memory_len: num("encoder.memory_len")?,
        vocab_size: num("encoder.vocab_size")?,
    };
    let head_config = HeadConfig {
        summary_mode: match field("head.summary_mode")? {
            "last_token" => SummaryMode::LastToken,
            "mean" => SummaryMode::Mean,
            other => {
                return Err(CheckpointError::Malformed(format!(
                    "unknown summary mode '{other}'"
                )))
            }
        },
        bottleneck_dim: num("head.bottleneck_dim")?,
        dropout_p: real("head.dropout_p")?,
    };

    let width = precision.width();
    let expected: usize = params.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected * width {
        return Err(CheckpointError::Truncated {
            expected: expected * width,
            found: payload.len(),
        });
    }
    if hex(&Sha256::digest(&payload)) != field("payload_sha256")? {
        return Err(CheckpointError::Integrity { what: "payload" });
    }

    let mut values = Vec::with_capacity(expected);
    for chunk in payload.chunks_exact(width) {
        values.push(match precision {
            Precision::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
            Precision::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
        });
    }

    // Build the model skeleton, then overwrite every parameter in manifest
    // order, insisting the traversal agrees with the stored table.
    let mut model = EmotionModel::init(encoder_config, head_config, &mut SeedRng::new(0))
        .map_err(|e| CheckpointError::Malformed(format!("invalid configuration: {e}")))?;
    let mut cursor = 0usize;
    let mut index = 0usize;
    let mut failure: Option<CheckpointError> = None;
    model.for_each_param(&mut |name, t| {
        if failure.is_some() {
            return;
        }
        match params.get(index) {
            Some((stored_name, shape)) if stored_name == name => {
                if shape != t.shape() {
                    failure = Some(CheckpointError::ShapeMismatch {
                        param: name.to_string(),
                        expected: t.shape().to_vec(),
                        found: shape.clone(),
                    });
                    return;
                }
                let n: usize = shape.iter().product();
                *t = Tensor::param(shape.clone(), values[cursor..cursor + n].to_vec());
                cursor += n;
            }
            other => {
                failure = Some(CheckpointError::Malformed(format!(
                    "parameter table mismatch at '{name}' (stored: {:?})",
                    other.map(|(n, _)| n.as_str())
                )));
            }
        }
        index += 1;
    });
    if let Some(err) = failure {
        return Err(err);
    }
    if index != params.len() {
        return Err(CheckpointError::Malformed(
            "parameter table longer than the model".into(),
        ));
    }
    Ok(model)
}

fn read_line<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read(&mut byte)? {
            0 => break,
            _ if byte[0] == b'\n' => break,
            _ => line.push(byte[0]),
        }
        if line.len() > 4096 {
            return Err(CheckpointError::Malformed("unterminated header line".into()));
        }
    }
    String::from_utf8(line).map_err(|_| CheckpointError::Malformed("non-UTF-8 header".into()))
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
