//! On-disk formats: 16-bit PCM WAV input, the `.qf` feature file, and the
//! TSV dataset manifests.
//!
//! `.qf` layout (little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 0-3   | magic `QFEA` |
//! | 4-5   | format version, u16 = 1 |
//! | 6-7   | reserved, zero |
//! | 8-11  | u32 frame count |
//! | 12-15 | u32 dims per frame |
//! | 16-19 | f32 frame shift (ms) |
//! | 20-23 | f32 frame length (ms) |
//! | 24-31 | reserved, zero |
//! | 32-   | frames x dims f32, row-major |

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qbestd_core::{AudioBuffer, FeatureMatrix};

use crate::{Error, Result};

pub const QF_MAGIC: &[u8; 4] = b"QFEA";
pub const QF_VERSION: u16 = 1;
pub const QF_HEADER_LEN: usize = 32;

fn corrupt(path: &Path, msg: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn unsupported(path: &Path, msg: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Reads a RIFF/WAVE file holding mono 16-bit PCM.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_wav(&bytes, path)
}

pub fn parse_wav(bytes: &[u8], path: &Path) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(unsupported(path, "not a RIFF/WAVE container"));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + 16 > bytes.len() {
                return Err(corrupt(path, "truncated fmt chunk"));
            }
            format = Some((
                u16_at(bytes, body),
                u16_at(bytes, body + 2),
                u32_at(bytes, body + 4),
                u16_at(bytes, body + 14),
            ));
        } else if id == b"data" {
            let (code, channels, rate, bits) = format.ok_or_else(|| corrupt(path, "data chunk before fmt chunk"))?;
            if code != 1 {
                return Err(unsupported(path, format!("format code {code} is not PCM (1)")));
            }
            if channels != 1 {
                return Err(unsupported(path, format!("{channels} channels, expected mono")));
            }
            if bits != 16 {
                return Err(unsupported(path, format!("{bits}-bit samples, expected 16-bit")));
            }
            if rate == 0 {
                return Err(corrupt(path, "sample rate is zero"));
            }
            if body + size > bytes.len() {
                return Err(corrupt(
                    path,
                    format!("data chunk claims {size} bytes but only {} remain", bytes.len() - body),
                ));
            }
            if !size.is_multiple_of(2) {
                return Err(corrupt(path, format!("odd data chunk length {size} for 16-bit samples")));
            }
            let pcm: Vec<i16> = bytes[body..body + size]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect();
            return Ok(AudioBuffer::from_pcm16(&pcm, rate)?);
        }
        // chunks are padded to even length
        pos = body + size + (size & 1);
    }
    Err(corrupt(
        path,
        if format.is_some() { "no data chunk" } else { "no fmt chunk" },
    ))
}

/// Encodes mono 16-bit PCM; used by tests and fixtures.
pub fn encode_wav(pcm: &[i16], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (pcm.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + pcm.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in pcm {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn encode_feature_file(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(QF_HEADER_LEN + m.data().len() * 4);
    out.extend_from_slice(QF_MAGIC);
    out.extend_from_slice(&QF_VERSION.to_le_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(m.num_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(m.num_dims() as u32).to_le_bytes());
    out.extend_from_slice(&m.frame_shift_ms.to_le_bytes());
    out.extend_from_slice(&m.frame_length_ms.to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_feature_file(m: &FeatureMatrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_feature_file(m)).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn decode_feature_file(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    if bytes.len() < QF_HEADER_LEN {
        return Err(corrupt(
            path,
            format!("expected at least {QF_HEADER_LEN} header bytes, found {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != QF_MAGIC {
        return Err(corrupt(path, format!("expected magic \"QFEA\", found {:?}", &bytes[0..4])));
    }
    let version = u16_at(bytes, 4);
    if version != QF_VERSION {
        return Err(corrupt(path, format!("expected version {QF_VERSION}, found {version}")));
    }
    let frames = u32_at(bytes, 8) as usize;
    let dims = u32_at(bytes, 12) as usize;
    let shift = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let length = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    let expected = QF_HEADER_LEN + frames * dims * 4;
    if bytes.len() != expected {
        return Err(corrupt(
            path,
            format!(
                "header declares {frames}x{dims} frames (expected {expected} bytes), found {} bytes",
                bytes.len()
            ),
        ));
    }
    let data = bytes[QF_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(data, frames, dims, shift, length).map_err(|e| corrupt(path, e.to_string()))
}

pub fn read_feature_file(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_feature_file(&bytes, path)
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    /// Feature file or WAV, relative to the manifest's directory unless
    /// absolute.
    pub path: PathBuf,
    pub transcription: String,
    /// Optional fourth column naming the feature extractor.
    pub extractor: Option<String>,
}

/// One role's manifest (queries or items).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub source: PathBuf,
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

/// Queries and items of one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub queries: Manifest,
    pub items: Manifest,
}

impl Manifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses a manifest TSV (`id`, `path`, `transcription`, optional
/// `extractor`). Fails only on malformed TSV; content problems are left to
/// [`validate_manifest`].
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text, path)
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| corrupt(path, "empty manifest, expected a header row"))?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let expected = ["id", "path", "transcription"];
    if columns.len() < 3 || columns[..3] != expected || columns.len() > 4 || (columns.len() == 4 && columns[3] != "extractor") {
        return Err(corrupt(
            path,
            format!("header must be id<TAB>path<TAB>transcription[<TAB>extractor], found {header:?}"),
        ));
    }
    let mut entries = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(corrupt(
                path,
                format!("line {}: expected {} columns, found {}", lineno + 1, columns.len(), fields.len()),
            ));
        }
        entries.push(ManifestEntry {
            id: fields[0].trim().to_string(),
            path: PathBuf::from(fields[1].trim()),
            transcription: fields[2].trim().to_string(),
            extractor: fields.get(3).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(Manifest {
        source: path.to_path_buf(),
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        entries,
    })
}

pub fn write_manifest(m: &[ManifestEntry], path: &Path) -> Result<()> {
    let with_extractor = m.iter().any(|e| e.extractor.is_some());
    let mut out = String::from("id\tpath\ttranscription");
    if with_extractor {
        out.push_str("\textractor");
    }
    out.push('\n');
    for e in m {
        out.push_str(&format!("{}\t{}\t{}", e.id, e.path.display(), e.transcription));
        if with_extractor {
            out.push('\t');
            out.push_str(e.extractor.as_deref().unwrap_or(""));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Checks one manifest: nonempty unique ids and resolvable paths. Returns
/// every problem found.
pub fn validate_manifest(m: &Manifest, role: &str) -> Vec<String> {
    let mut diagnostics = Vec::new();
    let mut seen = HashSet::new();
    for (row, e) in m.entries.iter().enumerate() {
        if e.id.is_empty() {
            diagnostics.push(format!("{role} row {}: empty id", row + 1));
        } else if !seen.insert(e.id.as_str()) {
            diagnostics.push(format!("duplicate {role} id: {}", e.id));
        }
        let resolved = m.resolve(e);
        if !resolved.is_file() {
            diagnostics.push(format!(
                "{role} row {} ({}): path not found: {}",
                row + 1,
                e.id,
                resolved.display()
            ));
        }
    }
    diagnostics
}

pub fn validate_dataset(d: &DatasetManifest) -> Vec<String> {
    let mut diagnostics = validate_manifest(&d.queries, "query");
    diagnostics.extend(validate_manifest(&d.items, "item"));
    diagnostics
}

/// Loads every feature file named by a manifest, tagging each matrix with
/// its id and extractor.
pub fn load_features(m: &Manifest) -> Result<Vec<FeatureMatrix>> {
    m.entries
        .iter()
        .map(|e| {
            let tag = e.extractor.clone().unwrap_or_else(|| "unknown".into());
            read_feature_file(&m.resolve(e)).map(|f| f.with_ids(e.id.clone(), tag))
        })
        .collect()
}
