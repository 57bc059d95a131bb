//! Synthetic blob datasets and the CSV on-disk format: a header row, float
//! feature columns, and an optional trailing integer column named "label".

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A feature matrix with optional ground-truth labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |r| r.len())
    }
}

/// Parameters of a Gaussian-blob dataset.
#[derive(Clone, Debug)]
pub struct BlobSpec {
    pub blobs: usize,
    pub per_blob: usize,
    pub dim: usize,
    pub std: f64,
    /// Minimum center separation in units of `std`.
    pub separation: f64,
    pub seed: u64,
}

/// Draw blob centers at mutual distance at least `separation·std`, then
/// scatter points around them. Deterministic per seed.
pub fn make_blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.blobs == 0 || spec.per_blob == 0 || spec.dim == 0 {
        return Err(Error::Config("blob counts and dimension must be positive".into()));
    }
    if spec.std <= 0.0 || spec.separation < 0.0 {
        return Err(Error::Config("std must be positive and separation nonnegative".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let min_dist = spec.separation * spec.std;

    // rejection-sample centers in the tightest box that fits, growing it
    // only on failure; compact coordinates keep downstream activations in
    // their responsive range
    let mut box_half = min_dist.max(spec.std);
    let centers = loop {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.blobs);
        let mut attempts = 0;
        while centers.len() < spec.blobs && attempts < 1000 {
            attempts += 1;
            let candidate: Vec<f64> =
                (0..spec.dim).map(|_| rng.gen_range(-box_half..box_half)).collect();
            let far_enough = centers.iter().all(|c| {
                let d2: f64 = c.iter().zip(&candidate).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= min_dist
            });
            if far_enough {
                centers.push(candidate);
            }
        }
        if centers.len() == spec.blobs {
            break centers;
        }
        box_half *= 2.0;
    };

    let mut features = Vec::with_capacity(spec.blobs * spec.per_blob);
    let mut labels = Vec::with_capacity(spec.blobs * spec.per_blob);
    for (blob, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_blob {
            let point: Vec<f64> = center
                .iter()
                .map(|&c| c + spec.std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            features.push(point);
            labels.push(blob);
        }
    }
    Ok(Dataset { features, labels: Some(labels) })
}

/// Write the CSV form: `f0..f{d-1}` then `label` when present.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let dim = dataset.dim();
    let mut header: Vec<String> = (0..dim).map(|i| format!("f{i}")).collect();
    if dataset.labels.is_some() {
        header.push("label".into());
    }
    out.write_record(&header)?;
    for (i, row) in dataset.features.iter().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = &dataset.labels {
            record.push(labels[i].to_string());
        }
        out.write_record(&record)?;
    }
    out.flush().map_err(Error::Io)?;
    Ok(())
}

/// Read the CSV form; any column named "label" (case-sensitive) becomes the
/// label vector, all others are features in header order.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut input = csv::Reader::from_reader(reader);
    let headers = input.headers()?.clone();
    let label_col = headers.iter().position(|h| h == "label");
    let mut features = Vec::new();
    let mut labels = label_col.map(|_| Vec::new());
    for record in input.records() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            if Some(col) == label_col {
                let value = field
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad label value {field:?}")))?;
                labels.as_mut().expect("label column present").push(value);
            } else {
                let value = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad feature value {field:?}")))?;
                row.push(value);
            }
        }
        features.push(row);
    }
    if features.is_empty() {
        return Err(Error::Config("dataset has no rows".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|r| r.len() != dim) {
        return Err(Error::Config("ragged dataset rows".into()));
    }
    Ok(Dataset { features, labels })
}

pub fn write_csv_file(dataset: &Dataset, path: &Path) -> Result<()> {
    write_csv(dataset, std::fs::File::create(path)?)
}

pub fn read_csv_file(path: &Path) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

/// Stable 64-bit FNV-1a over bytes; names run directories.
pub fn fnv1a_hash(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BlobSpec {
        BlobSpec { blobs: 3, per_blob: 20, dim: 8, std: 1.0, separation: 6.0, seed: 42 }
    }

    #[test]
    fn blob_shapes_and_labels() {
        let data = make_blobs(&spec()).unwrap();
        assert_eq!(data.len(), 60);
        assert_eq!(data.dim(), 8);
        let labels = data.labels.as_ref().unwrap();
        for blob in 0..3 {
            assert_eq!(labels.iter().filter(|&&l| l == blob).count(), 20);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(make_blobs(&spec()).unwrap(), make_blobs(&spec()).unwrap());
        let mut other = spec();
        other.seed = 43;
        assert_ne!(make_blobs(&spec()).unwrap(), make_blobs(&other).unwrap());
    }

    #[test]
    fn centers_respect_separation() {
        let data = make_blobs(&spec()).unwrap();
        let labels = data.labels.as_ref().unwrap();
        // recover empirical centers and check mutual distance from the data
        let mut centers = vec![vec![0.0; data.dim()]; 3];
        let mut counts = vec![0usize; 3];
        for (row, &l) in data.features.iter().zip(labels) {
            counts[l] += 1;
            for (c, v) in centers[l].iter_mut().zip(row) {
                *c += v;
            }
        }
        for (center, &count) in centers.iter_mut().zip(&counts) {
            center.iter_mut().for_each(|c| *c /= count as f64);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d2: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                // empirical centers wander around the true ones by ~std/√n
                assert!(
                    d2.sqrt() >= 6.0 - 1.5,
                    "centers {i},{j} too close: {}",
                    d2.sqrt()
                );
            }
        }
    }

    #[test]
    fn csv_round_trip_preserves_data() {
        let data = make_blobs(&spec()).unwrap();
        let mut buffer = Vec::new();
        write_csv(&data, &mut buffer).unwrap();
        let loaded = read_csv(buffer.as_slice()).unwrap();
        assert_eq!(data, loaded);
    }

    #[test]
    fn csv_without_label_column() {
        let text = "f0,f1\n0.5,1.25\n-2.0,0.125\n";
        let data = read_csv(text.as_bytes()).unwrap();
        assert_eq!(data.features, vec![vec![0.5, 1.25], vec![-2.0, 0.125]]);
        assert!(data.labels.is_none());
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_csv("f0,label\nx,0\n".as_bytes()).is_err());
        assert!(read_csv("f0,label\n".as_bytes()).is_err());
    }
}
