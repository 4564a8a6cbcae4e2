//! Dataset CSV (`f0,...,f{d-1},label`) and the JSON metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BlobParams, DataError, Dataset, Matrix, Normalization, Provenance, Split};
use crate::ClassId;

/// Split seed used when a CSV has no sidecar.
const DEFAULT_SPLIT_SEED: u64 = 0;

/// Sidecar document stored next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub name: String,
    #[serde(rename = "C")]
    pub class_count: usize,
    #[serde(rename = "d")]
    pub dims: usize,
    #[serde(rename = "N")]
    pub len: usize,
    pub split: Split,
    #[serde(default)]
    pub normalization: Option<Normalization>,
    #[serde(default)]
    pub generator: Option<BlobParams>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sha256: Option<String>,
}

/// `data.csv` -> `data.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn parse_err(line: u64, message: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses dataset CSV bytes. The split is a seeded 80/20 partition.
pub fn parse_csv(bytes: &[u8], name: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let width = header.len();
    if width < 2 {
        return Err(parse_err(1, "header needs at least one feature and a label"));
    }
    for (i, field) in header.iter().take(width - 1).enumerate() {
        if field.trim() != format!("f{i}") {
            return Err(parse_err(1, format!("expected column `f{i}`, found `{field}`")));
        }
    }
    if header[width - 1].trim() != "label" {
        return Err(parse_err(1, "last column must be `label`"));
    }
    let dims = width - 1;

    let mut data = Vec::new();
    let mut labels: Vec<ClassId> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (col, cell) in record.iter().take(dims).enumerate() {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("f{col}: `{cell}` is not a number")))?;
            if !value.is_finite() {
                return Err(parse_err(line, format!("f{col}: value must be finite")));
            }
            data.push(value);
        }
        let cell = &record[dims];
        let label: ClassId = cell
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("label `{cell}` is not a class id")))?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }

    let max = *labels.iter().max().expect("nonempty");
    // Guard before allocating a presence table the size of `max`.
    if max >= labels.len() {
        let mut present: Vec<ClassId> = labels.clone();
        present.sort_unstable();
        present.dedup();
        let missing = present
            .iter()
            .enumerate()
            .find(|(i, &l)| *i != l)
            .map_or(present.len(), |(i, _)| i);
        return Err(DataError::NonContiguousLabels { missing, max });
    }
    let mut present = vec![false; max + 1];
    for &l in &labels {
        present[l] = true;
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(DataError::NonContiguousLabels { missing, max });
    }

    let n = labels.len();
    let features = Matrix::new(n, dims, data)?;
    let digest = hex::encode(Sha256::digest(bytes));
    Dataset::new(
        name,
        features,
        labels,
        max + 1,
        Split::seeded(n, super::blobs::TEST_FRACTION, DEFAULT_SPLIT_SEED),
        Provenance::Csv { sha256: digest },
    )
}

pub fn parse_metadata(text: &str) -> Result<DatasetMetadata, DataError> {
    serde_json::from_str(text).map_err(|e| DataError::Metadata(e.to_string()))
}

fn apply_metadata(mut ds: Dataset, meta: DatasetMetadata) -> Result<Dataset, DataError> {
    if meta.len != ds.len() || meta.dims != ds.dims() || meta.class_count != ds.class_count() {
        return Err(DataError::Metadata(format!(
            "sidecar describes N={} d={} C={}, CSV has N={} d={} C={}",
            meta.len,
            meta.dims,
            meta.class_count,
            ds.len(),
            ds.dims(),
            ds.class_count()
        )));
    }
    if let (Some(expected), Provenance::Csv { sha256 }) = (&meta.sha256, ds.provenance()) {
        if expected != sha256 {
            return Err(DataError::Metadata("CSV digest does not match sidecar".into()));
        }
    }
    if let Some(norm) = &meta.normalization {
        if norm.mean.len() != ds.dims() || norm.std.len() != ds.dims() {
            return Err(DataError::Metadata("normalization stats have wrong width".into()));
        }
    }
    let provenance = match meta.generator {
        Some(params) => Provenance::Blobs(params),
        None => ds.provenance().clone(),
    };
    let features = ds.features().clone();
    let labels = ds.all_labels().to_vec();
    let class_count = ds.class_count();
    let normalization = meta.normalization;
    ds = Dataset::new(meta.name, features, labels, class_count, meta.split, provenance)?;
    ds.set_normalization(normalization);
    Ok(ds)
}

/// Loads a CSV, applying `<stem>.meta.json` when it exists.
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let bytes = fs::read(path)?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let ds = parse_csv(&bytes, &name)?;
    let meta_path = metadata_path(path);
    if meta_path.exists() {
        let meta = parse_metadata(&fs::read_to_string(meta_path)?)?;
        apply_metadata(ds, meta)
    } else {
        Ok(ds)
    }
}

/// Serializes features with shortest round-trip decimals; labels as integers.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut out = String::new();
    for j in 0..ds.dims() {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for (row, label) in ds.features().iter_rows().zip(ds.all_labels()) {
        for v in row {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{label}\n"));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes the CSV and its metadata sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    save_csv(ds, path)?;
    let bytes = fs::read(path)?;
    let (generator, seed) = match ds.provenance() {
        Provenance::Blobs(p) => (Some(p.clone()), Some(p.seed)),
        Provenance::Csv { .. } => (None, None),
    };
    let meta = DatasetMetadata {
        name: ds.name.clone(),
        class_count: ds.class_count(),
        dims: ds.dims(),
        len: ds.len(),
        split: ds.split().clone(),
        normalization: ds.normalization().cloned(),
        generator,
        seed,
        sha256: Some(hex::encode(Sha256::digest(&bytes))),
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| DataError::Metadata(e.to_string()))?;
    fs::write(metadata_path(path), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, LabelAccess, OracleToken};

    #[test]
    fn parses_handwritten_file() {
        let ds = parse_csv(b"f0,f1,label\n0.5,1.0,0\n-2,3e-1,1\n4,4,1\n", "hand").unwrap();
        assert_eq!((ds.len(), ds.dims(), ds.class_count()), (3, 2, 2));
        assert_eq!(ds.feature(1), &[-2.0, 0.3]);
    }

    #[test]
    fn rejects_non_contiguous_labels() {
        let err = parse_csv(b"f0,label\n1,0\n2,5\n", "x").unwrap_err();
        assert!(matches!(err, DataError::NonContiguousLabels { missing: 1, .. }), "{err}");
        let err = parse_csv(b"f0,label\n1,0\n2,5\n3,5\n4,5\n5,5\n6,5\n7,5\n", "x").unwrap_err();
        assert!(matches!(err, DataError::NonContiguousLabels { missing: 1, .. }), "{err}");
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_csv(b"f0,f1,label\n1,2,0\n1,2\n", "x").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err}");
        let err = parse_csv(b"f0,f1,label\n1,2,0\n1,2,1\nx,2,0\n", "x").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 4, .. }), "{err}");
        let err = parse_csv(b"a,b,label\n1,2,0\n", "x").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }), "{err}");
        let err = parse_csv(b"f0,label\n1,-1\n", "x").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_blobs(&BlobParams {
            classes: 3,
            per_class: 20,
            dims: 3,
            spread: 0.7,
            overlap: 0.2,
            seed: 5,
        })
        .unwrap();
        let first = dir.path().join("a.csv");
        save_csv(&ds, &first).unwrap();
        let loaded = parse_csv(&fs::read(&first).unwrap(), "a").unwrap();
        assert_eq!(loaded.features(), ds.features());
        let token = OracleToken::ground_truth();
        for i in 0..ds.len() {
            assert_eq!(
                loaded.label(i, LabelAccess::Oracle(&token)).unwrap(),
                ds.reveal(i, &token)
            );
        }
        let second = dir.path().join("b.csv");
        save_csv(&loaded, &second).unwrap();
        assert_eq!(fs::read(first).unwrap(), fs::read(second).unwrap());
    }

    #[test]
    fn sidecar_restores_split_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_blobs(&BlobParams {
            classes: 2,
            per_class: 30,
            dims: 2,
            spread: 0.5,
            overlap: 0.0,
            seed: 9,
        })
        .unwrap()
        .normalize();
        let path = dir.path().join("blobs.csv");
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.split(), ds.split());
        assert_eq!(loaded.normalization(), ds.normalization());
        assert_eq!(loaded.provenance(), ds.provenance());
        assert_eq!(loaded.name, "blobs");

        let meta = parse_metadata(&fs::read_to_string(metadata_path(&path)).unwrap()).unwrap();
        assert_eq!((meta.class_count, meta.dims, meta.len), (2, 2, 60));
    }
}
