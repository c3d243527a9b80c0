use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CaptionRecord, CorpusError, SynonymDict};

const FEATURE_MAGIC: &[u8; 4] = b"HOIF";
const FEATURE_HEADER_LEN: usize = 16;

pub fn write_corpus(path: &Path, records: &[CaptionRecord]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<CaptionRecord>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_synonyms(path: &Path) -> Result<SynonymDict, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.display().to_string(),
        line: 0,
        source,
    })
}

pub fn write_synonyms(path: &Path, dict: &SynonymDict) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(dict).map_err(std::io::Error::from)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_ids(path: &Path, ids: &[String]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in ids {
        writeln!(w, "{id}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ids(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Row-major clip features keyed by clip id.
///
/// On disk: `HOIF`, u32 count, u32 dim, u32 reserved (zero), all little-endian,
/// then `count * dim` little-endian f32. Row order follows a sidecar id list.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        FeatureTable {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, row: &[f32]) -> Result<(), CorpusError> {
        let id = id.into();
        if row.len() != self.dim {
            return Err(CorpusError::BadFeatureFile(format!(
                "row {id} has dim {} (expected {})",
                row.len(),
                self.dim
            )));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(CorpusError::BadFeatureFile(format!("row {id} is not finite")));
        }
        if self.index.insert(id.clone(), self.ids.len()).is_some() {
            return Err(CorpusError::BadFeatureFile(format!("duplicate clip id {id}")));
        }
        self.ids.push(id);
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn write(&self, features: &Path, ids: &Path) -> Result<(), CorpusError> {
        let count = u32::try_from(self.len())
            .map_err(|_| CorpusError::BadFeatureFile("too many rows".into()))?;
        let dim = u32::try_from(self.dim)
            .map_err(|_| CorpusError::BadFeatureFile("dimension too large".into()))?;
        let mut w = BufWriter::new(File::create(features)?);
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        write_ids(ids, &self.ids)
    }

    pub fn read(features: &Path, ids: &Path) -> Result<Self, CorpusError> {
        let mut bytes = Vec::new();
        File::open(features)?.read_to_end(&mut bytes)?;
        if bytes.len() < FEATURE_HEADER_LEN || &bytes[..4] != FEATURE_MAGIC {
            return Err(CorpusError::BadFeatureFile("missing HOIF header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (count, dim) = (word(4), word(8));
        let body = &bytes[FEATURE_HEADER_LEN..];
        if body.len() != count * dim * 4 {
            return Err(CorpusError::BadFeatureFile(format!(
                "expected {count}x{dim} floats, found {} bytes",
                body.len()
            )));
        }
        let id_list = read_ids(ids)?;
        if id_list.len() != count {
            return Err(CorpusError::BadFeatureFile(format!(
                "{} ids for {count} rows",
                id_list.len()
            )));
        }
        let mut table = FeatureTable::new(dim);
        let mut row = Vec::with_capacity(dim);
        for (r, id) in id_list.into_iter().enumerate() {
            row.clear();
            row.extend(
                body[r * dim * 4..(r + 1) * dim * 4]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap())),
            );
            table.push(id, &row)?;
        }
        Ok(table)
    }
}
