//! Pair files: two-column `x,y` CSV with a header row, a JSON sidecar per
//! pair and a dataset manifest.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::datagen::{DatasetName, LabeledPair, MechanismParams, PairSpec};
use crate::error::{Error, Result};
use crate::inference::Direction;

/// Reads a two-column numeric CSV. A first row that does not parse as
/// numbers is taken as the header.
pub fn read_pair_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read(path)?;
    parse_pair_csv(&text)
}

pub fn parse_pair_csv(bytes: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 columns, found {}", rec.len()) });
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.iter().all(|c| c.is_finite()) => {
                x.push(v[0]);
                y.push(v[1]);
            }
            Ok(_) => return Err(Error::Parse { line, message: "non-finite value".into() }),
            Err(_) if idx == 0 => {}
            Err(_) => {
                let cell = rec.iter().find(|c| c.trim().parse::<f64>().is_err()).unwrap_or("");
                return Err(Error::Parse { line, message: format!("non-numeric cell '{cell}'") });
            }
        }
    }
    if x.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    Ok((x, y))
}

/// Writes `x,y` rows with shortest round-trip decimal formatting.
pub fn write_pair_csv(path: &Path, x: &[f64], y: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(x.len() * 40 + 4);
    out.push_str("x,y\n");
    for (a, b) in x.iter().zip(y) {
        out.push_str(&format!("{a:?},{b:?}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub pair_id: String,
    pub dataset: String,
    pub seed: u64,
    pub spec: PairSpec,
    pub mechanism: MechanismParams,
    pub true_direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub master_seed: u64,
    pub pairs: usize,
    pub n: usize,
    pub pair_ids: Vec<String>,
    pub seeds: Vec<u64>,
}

pub fn pair_id(i: usize) -> String {
    format!("{i:04}")
}

pub fn csv_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("pair_{id}.csv"))
}

pub fn meta_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("pair_{id}.meta.json"))
}

fn to_json_line<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes every pair with its sidecar and a `manifest.json`.
pub fn write_dataset(dir: &Path, name: DatasetName, master_seed: u64, pairs: &[LabeledPair]) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut ids = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let id = pair_id(i);
        write_pair_csv(&csv_path(dir, &id), &p.x, &p.y)?;
        let meta = PairMeta {
            pair_id: id.clone(),
            dataset: name.to_string(),
            seed: p.spec.seed,
            spec: p.spec,
            mechanism: p.mechanism,
            true_direction: p.true_direction,
        };
        fs::write(meta_path(dir, &id), to_json_line(&meta)?)?;
        ids.push(id);
    }
    let manifest = Manifest {
        dataset: name.to_string(),
        master_seed,
        pairs: pairs.len(),
        n: pairs.first().map_or(0, |p| p.x.len()),
        pair_ids: ids,
        seeds: pairs.iter().map(|p| p.spec.seed).collect(),
    };
    fs::write(dir.join("manifest.json"), to_json_line(&manifest)?)?;
    Ok(manifest)
}

/// `pair_<id>.csv` files in a directory, sorted by id.
pub fn list_pair_csvs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(id) = name.strip_prefix("pair_").and_then(|r| r.strip_suffix(".csv")) {
            out.push((id.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_meta(path: &Path) -> Result<PairMeta> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::generate_dataset;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let x = vec![0.1, -1e-300, 12345.678_901_234_567, f64::MIN_POSITIVE];
        let y = vec![1.0 / 3.0, 2.0, -0.0, 7e22];
        let p = dir.path().join("p.csv");
        write_pair_csv(&p, &x, &y).unwrap();
        let (a, b) = read_pair_csv(&p).unwrap();
        assert_eq!(a, x);
        assert_eq!(b, y);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("x,y\n") && !text.contains('\r'));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_pair_csv(b"x,y\n1,2\n3,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_pair_csv(b"1,2\n3,4,5\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_pair_csv(b"x,y\n").is_err());
        let (x, y) = parse_pair_csv(b"1, 2\n3,4\n").unwrap();
        assert_eq!((x, y), (vec![1.0, 3.0], vec![2.0, 4.0]));
    }

    #[test]
    fn dataset_export_is_complete_and_reproducible() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let pairs = generate_dataset(DatasetName::Ans985, 2, 100, 5).unwrap();
        let m = write_dataset(d1.path(), DatasetName::Ans985, 5, &pairs).unwrap();
        write_dataset(d2.path(), DatasetName::Ans985, 5, &generate_dataset(DatasetName::Ans985, 2, 100, 5).unwrap()).unwrap();
        assert_eq!(m.pair_ids, vec!["0000", "0001"]);
        assert_eq!(fs::read_dir(d1.path()).unwrap().count(), 5);
        for name in ["pair_0000.csv", "pair_0001.meta.json", "manifest.json"] {
            assert_eq!(fs::read(d1.path().join(name)).unwrap(), fs::read(d2.path().join(name)).unwrap());
        }
        let listed = list_pair_csvs(d1.path()).unwrap();
        assert_eq!(listed.len(), 2);
        let meta = read_meta(&meta_path(d1.path(), "0001")).unwrap();
        assert_eq!(meta.true_direction, Direction::XtoY);
        assert_eq!(meta.spec, pairs[1].spec);
        let (x, _) = read_pair_csv(&listed[1].1).unwrap();
        assert_eq!(x, pairs[1].x);
    }
}
