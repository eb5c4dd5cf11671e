//! Raw input vectors: inline, CSV tables and IDX image files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IDX_DATA_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Feature vectors keyed by raw-input reference. All vectors share one
/// dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    vectors: BTreeMap<String, Vec<f64>>,
    dim: usize,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn insert(&mut self, key: String, v: Vec<f64>) -> Result<()> {
        if self.vectors.is_empty() {
            self.dim = v.len();
        } else if v.len() != self.dim {
            return Err(Error::Data(format!("raw input {key} has dimension {}, expected {}", v.len(), self.dim)));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data(format!("raw input {key} has non-finite values")));
        }
        self.vectors.insert(key, v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.vectors.contains_key(key)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.vectors.iter()
    }

    /// Reads a table whose first column is the reference and whose remaining
    /// columns are features. A header row is allowed when its first field
    /// is `ref` or `id`.
    pub fn load_csv_table(&mut self, path: &Path) -> Result<()> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let Some(key) = rec.get(0) else { continue };
            if i == 0 && (key == "ref" || key == "id") {
                continue;
            }
            let v = rec
                .iter()
                .skip(1)
                .map(|x| x.parse::<f64>().map_err(|_| Error::Data(format!("{}: bad number {x:?}", path.display()))))
                .collect::<Result<Vec<_>>>()?;
            self.insert(key.to_string(), v)?;
        }
        Ok(())
    }

    pub fn save_csv_table(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for (k, v) in &self.vectors {
            let mut row = vec![k.clone()];
            row.extend(v.iter().map(|x| format!("{x}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Contents of an IDX file of unsigned bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxArray {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn items(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    pub fn item_len(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    /// Item `i` scaled to [0, 1].
    pub fn item(&self, i: usize) -> Option<Vec<f64>> {
        let n = self.item_len();
        (i < self.items()).then(|| self.data[i * n..(i + 1) * n].iter().map(|&b| f64::from(b) / 255.0).collect())
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Data("truncated IDX header".into()))
    };
    let magic = word(0)?;
    let ndims = match magic {
        IDX_DATA_MAGIC => 3,
        IDX_LABEL_MAGIC => 1,
        m => return Err(Error::Data(format!("unsupported IDX magic number {m:#010x}"))),
    };
    let dims = (0..ndims).map(|k| word(4 + 4 * k).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * ndims;
    let len: usize = dims.iter().product();
    let data = bytes
        .get(start..start + len)
        .ok_or_else(|| Error::Data(format!("IDX payload too short: expected {len} bytes")))?
        .to_vec();
    Ok(IdxArray { magic, dims, data })
}

pub fn read_idx(path: &Path) -> Result<IdxArray> {
    parse_idx(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_idx(path: &Path, arr: &IdxArray) -> Result<()> {
    let mut out = Vec::with_capacity(arr.data.len() + 16);
    out.extend(arr.magic.to_be_bytes());
    for &d in &arr.dims {
        out.extend((d as u32).to_be_bytes());
    }
    out.extend(&arr.data);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Resolves a data reference of the form `file.csv`, `file.csv#row` or
/// `file.idx#item` relative to `base`.
pub fn load_reference(base: &Path, reference: &str, idx_cache: &mut BTreeMap<String, IdxArray>) -> Result<Vec<f64>> {
    let (file, index) = match reference.rsplit_once('#') {
        Some((f, i)) => (f, Some(i.parse::<usize>().map_err(|_| Error::Data(format!("bad index in {reference}")))?)),
        None => (reference, None),
    };
    let path = base.join(file);
    if file.ends_with(".csv") {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(&path)?;
        let row = rdr
            .records()
            .nth(index.unwrap_or(0))
            .ok_or_else(|| Error::Data(format!("{reference}: row out of range")))??;
        return row
            .iter()
            .map(|x| x.parse::<f64>().map_err(|_| Error::Data(format!("{reference}: bad number {x:?}"))))
            .collect();
    }
    if !idx_cache.contains_key(file) {
        idx_cache.insert(file.to_string(), read_idx(&path)?);
    }
    let arr = &idx_cache[file];
    if arr.magic != IDX_DATA_MAGIC {
        return Err(Error::Data(format!("{file} is not an IDX data file")));
    }
    arr.item(index.unwrap_or(0)).ok_or_else(|| Error::Data(format!("{reference}: item out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_round_trip() {
        let arr = IdxArray { magic: IDX_DATA_MAGIC, dims: vec![2, 2, 2], data: vec![0, 255, 10, 20, 30, 40, 50, 60] };
        let dir = std::env::temp_dir().join(format!("nfl-idx-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.idx");
        write_idx(&p, &arr).unwrap();
        let back = read_idx(&p).unwrap();
        assert_eq!(back, arr);
        assert_eq!(back.item(0).unwrap(), vec![0.0, 1.0, 10.0 / 255.0, 20.0 / 255.0]);
        let mut cache = BTreeMap::new();
        let v = load_reference(&dir, "x.idx#1", &mut cache).unwrap();
        assert_eq!(v.len(), 4);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn idx_rejects_bad_magic() {
        let bytes = [0u8, 0, 8, 2, 0, 0, 0, 1];
        assert!(matches!(parse_idx(&bytes), Err(Error::Data(_))));
    }

    #[test]
    fn idx_labels() {
        let bytes = [0u8, 0, 8, 1, 0, 0, 0, 3, 7, 1, 9];
        let arr = parse_idx(&bytes).unwrap();
        assert_eq!(arr.dims, vec![3]);
        assert_eq!(arr.data, vec![7, 1, 9]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut d = Dataset::new();
        d.insert("a".into(), vec![1.0, 2.0]).unwrap();
        assert!(d.insert("b".into(), vec![1.0]).is_err());
    }
}
