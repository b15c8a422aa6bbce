//! Dataset file format.
//!
//! ```text
//! <header JSON>\n
//! record 0 .. record N-1     fixed size, little-endian
//! u64 record count           footer, written last
//! ```
//!
//! Record layout: `grid_index, instance, view, seed` as u64; `k_factor` and the
//! family's parameters as f64; noisy χ real plane, noisy χ imaginary plane,
//! ideal χ real plane, ideal χ imaginary plane as row-major f64; then the
//! CRC-32 of all preceding record bytes as u32.
//!
//! Files are written to a sibling temporary path and renamed into place once
//! the footer is flushed, so a file under the final name is always complete.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use qpt_core::ComplexMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetSpec, SampleRecord};
use crate::error::{PipelineError, Result};

const FORMAT: &str = "qpt-dataset";
const VERSION: u32 = 1;
const MAX_HEADER_BYTES: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub spec: DatasetSpec,
    pub skipped_count: u64,
    pub record_count: u64,
    pub record_bytes: u64,
    pub checksum: String,
}

impl DatasetHeader {
    pub fn new(spec: DatasetSpec, skipped_count: u64, record_count: u64) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            record_bytes: record_bytes(&spec) as u64,
            spec,
            skipped_count,
            record_count,
            checksum: "crc32".into(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(PipelineError::Header(format!("unknown format {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(PipelineError::Header(format!(
                "version {} not supported (expected {VERSION})",
                self.version
            )));
        }
        if self.checksum != "crc32" {
            return Err(PipelineError::Header(format!("unknown checksum {:?}", self.checksum)));
        }
        if self.record_bytes != record_bytes(&self.spec) as u64 {
            return Err(PipelineError::Header(format!(
                "record size {} does not match the {} layout ({})",
                self.record_bytes,
                self.spec.family,
                record_bytes(&self.spec)
            )));
        }
        Ok(())
    }
}

fn record_bytes(spec: &DatasetSpec) -> usize {
    let d = spec.family.chi_dim();
    8 * (4 + 1 + spec.family.n_params() + 4 * d * d) + 4
}

fn encode(record: &SampleRecord, spec: &DatasetSpec, buf: &mut Vec<u8>) -> Result<()> {
    let d = spec.family.chi_dim();
    if record.params.len() != spec.family.n_params() || record.noisy.dim() != d || record.ideal.dim() != d {
        return Err(PipelineError::Invalid(format!(
            "record ({}, {}) does not fit the {} layout",
            record.grid_index, record.instance, spec.family
        )));
    }
    buf.clear();
    for v in [record.grid_index, record.instance, record.view, record.seed] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let floats = std::iter::once(record.k_factor)
        .chain(record.params.iter().copied())
        .chain(record.noisy.real_plane())
        .chain(record.noisy.imag_plane())
        .chain(record.ideal.real_plane())
        .chain(record.ideal.imag_plane());
    for v in floats {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(())
}

fn decode(bytes: &[u8], spec: &DatasetSpec, index: u64) -> Result<SampleRecord> {
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4-byte tail"));
    if crc32fast::hash(body) != stored {
        return Err(PipelineError::Checksum { record: index });
    }
    let mut words = body.chunks_exact(8).map(|c| c.try_into().expect("8-byte word"));
    let mut next_u64 = || u64::from_le_bytes(words.next().expect("layout checked"));
    let (grid_index, instance, view, seed) = (next_u64(), next_u64(), next_u64(), next_u64());
    let floats: Vec<f64> = body[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte word")))
        .collect();
    let n = spec.family.n_params();
    let plane = spec.family.chi_dim().pow(2);
    let d = spec.family.chi_dim();
    let at = |i: usize| &floats[1 + n + i * plane..1 + n + (i + 1) * plane];
    Ok(SampleRecord {
        grid_index,
        instance,
        view,
        seed,
        k_factor: floats[0],
        params: floats[1..1 + n].to_vec(),
        noisy: ComplexMatrix::from_planes(d, at(0), at(1))?,
        ideal: ComplexMatrix::from_planes(d, at(2), at(3))?,
    })
}

/// Single-writer, append-only dataset file.
pub struct DatasetWriter {
    out: BufWriter<File>,
    tmp_path: PathBuf,
    final_path: PathBuf,
    header: DatasetHeader,
    written: u64,
    buf: Vec<u8>,
}

impl DatasetWriter {
    /// Starts a file that will hold exactly `record_count` records.
    pub fn create(path: impl AsRef<Path>, spec: &DatasetSpec, skipped_count: u64, record_count: u64) -> Result<Self> {
        let final_path = path.as_ref().to_path_buf();
        let mut name = final_path
            .file_name()
            .ok_or_else(|| PipelineError::Invalid(format!("{} is not a file path", final_path.display())))?
            .to_os_string();
        name.push(".partial");
        let tmp_path = final_path.with_file_name(name);
        let header = DatasetHeader::new(spec.clone(), skipped_count, record_count);
        let mut out = BufWriter::new(File::create(&tmp_path)?);
        let json = serde_json::to_string(&header).map_err(|e| PipelineError::Header(e.to_string()))?;
        out.write_all(json.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(Self {
            out,
            tmp_path,
            final_path,
            header,
            written: 0,
            buf: Vec::new(),
        })
    }

    pub fn append(&mut self, record: &SampleRecord) -> Result<()> {
        if self.written == self.header.record_count {
            return Err(PipelineError::CountMismatch {
                header: self.header.record_count,
                found: self.written + 1,
            });
        }
        encode(record, &self.header.spec, &mut self.buf)?;
        self.out.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    /// Writes the footer, syncs and moves the file into place.
    pub fn finish(mut self) -> Result<()> {
        if self.written != self.header.record_count {
            return Err(PipelineError::CountMismatch {
                header: self.header.record_count,
                found: self.written,
            });
        }
        self.out.write_all(&self.written.to_le_bytes())?;
        let file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        std::fs::rename(&self.tmp_path, &self.final_path)?;
        Ok(())
    }
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let mut writer = DatasetWriter::create(path, &dataset.spec, dataset.skipped, dataset.records.len() as u64)?;
    for r in &dataset.records {
        writer.append(r)?;
    }
    writer.finish()
}

fn parse_header(reader: &mut impl BufRead) -> Result<(DatasetHeader, u64)> {
    let mut line = Vec::new();
    let n = reader.take(MAX_HEADER_BYTES).read_until(b'\n', &mut line)?;
    if n == 0 || line.last() != Some(&b'\n') {
        return Err(PipelineError::Header("missing or unterminated header line".into()));
    }
    let header: DatasetHeader =
        serde_json::from_slice(&line[..n - 1]).map_err(|e| PipelineError::Header(e.to_string()))?;
    header.check()?;
    Ok((header, n as u64))
}

/// Reads only the header line.
pub fn read_header(path: impl AsRef<Path>) -> Result<DatasetHeader> {
    let mut reader = BufReader::new(File::open(path)?);
    Ok(parse_header(&mut reader)?.0)
}

/// Streaming reader. Opening checks the file size against the header and the
/// footer; records are decoded and checksummed one at a time.
pub struct DatasetReader {
    reader: BufReader<File>,
    header: DatasetHeader,
    next: u64,
    buf: Vec<u8>,
}

impl DatasetReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let len = std::fs::metadata(path)?.len();
        let mut reader = BufReader::new(File::open(path)?);
        let (header, header_len) = parse_header(&mut reader)?;
        let rb = header.record_bytes;
        let body = len - header_len;
        let expected = header.record_count * rb + 8;
        if body < expected {
            let complete = (body / rb).min(header.record_count);
            return Err(PipelineError::Truncated { record: complete });
        }
        if body > expected {
            return Err(PipelineError::CountMismatch {
                header: header.record_count,
                found: (body - 8) / rb,
            });
        }
        let mut file = File::open(path)?;
        file.seek(SeekFrom::End(-8))?;
        let mut footer = [0u8; 8];
        file.read_exact(&mut footer)?;
        let footer = u64::from_le_bytes(footer);
        if footer != header.record_count {
            return Err(PipelineError::CountMismatch {
                header: header.record_count,
                found: footer,
            });
        }
        Ok(Self {
            reader,
            buf: vec![0; rb as usize],
            header,
            next: 0,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }
}

impl Iterator for DatasetReader {
    type Item = Result<SampleRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next == self.header.record_count {
            return None;
        }
        let index = self.next;
        self.next += 1;
        if let Err(e) = self.reader.read_exact(&mut self.buf) {
            self.next = self.header.record_count;
            return Some(Err(match e.kind() {
                std::io::ErrorKind::UnexpectedEof => PipelineError::Truncated { record: index },
                _ => e.into(),
            }));
        }
        Some(decode(&self.buf, &self.header.spec, index))
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let reader = DatasetReader::open(path)?;
    let spec = reader.header().spec.clone();
    let skipped = reader.header().skipped_count;
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok(Dataset { spec, skipped, records })
}
