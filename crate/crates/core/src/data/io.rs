use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::bandit::LinUcbModel;
use crate::generate::{DatasetHeader, PreferenceDataset, SyntheticUser, UserRecord};

pub const DATASET_FORMAT: &str = "cbli-prefs";
pub const USERS_FORMAT: &str = "cbli-users";
pub const FORMAT_VERSION: u32 = 1;
pub const MODEL_MAGIC: &str = "cbli-linucb";

#[derive(Serialize, Deserialize)]
struct FileHeader<T> {
    format: String,
    version: u32,
    count: usize,
    #[serde(flatten)]
    body: T,
}

#[derive(Deserialize)]
struct Preamble {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsersHeader {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

fn write_lines<W: Write, H: Serialize, R: Serialize>(
    mut w: W,
    format: &str,
    header: H,
    records: &[R],
) -> Result<(), DataError> {
    let wrap = |e: std::io::Error| DataError::data(format!("write failed: {e}"));
    let head = FileHeader {
        format: format.to_owned(),
        version: FORMAT_VERSION,
        count: records.len(),
        body: header,
    };
    serde_json::to_writer(&mut w, &head).map_err(|e| DataError::data(e.to_string()))?;
    w.write_all(b"\n").map_err(wrap)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| DataError::data(e.to_string()))?;
        w.write_all(b"\n").map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

fn read_lines<Rd: Read, H: DeserializeOwned, R: DeserializeOwned>(
    reader: Rd,
    format: &str,
) -> Result<(H, Vec<R>), DataError> {
    let mut lines = BufReader::new(reader).lines();
    let first = match lines.next() {
        Some(l) => l.map_err(|e| DataError::at_line(1, e.to_string()))?,
        None => return Err(DataError::data("empty file")),
    };
    let pre: Preamble = serde_json::from_str(&first)
        .map_err(|e| DataError::at_line(1, format!("unreadable header: {e}")))?;
    if pre.format != format {
        return Err(DataError::Format(format!("expected `{format}` file, found `{}`", pre.format)));
    }
    if pre.version != FORMAT_VERSION {
        return Err(DataError::Format(format!(
            "unsupported {format} version {} (supported: {FORMAT_VERSION})",
            pre.version
        )));
    }
    let head: FileHeader<H> = serde_json::from_str(&first)
        .map_err(|e| DataError::at_line(1, format!("unreadable header: {e}")))?;
    let mut records = Vec::with_capacity(head.count);
    for (i, line) in lines.enumerate() {
        let n = i as u64 + 2;
        let line = line.map_err(|e| DataError::at_line(n, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        if records.len() == head.count {
            return Err(DataError::at_line(n, "more records than the header declares"));
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| DataError::at_line(n, format!("unreadable record: {e}")))?;
        records.push(rec);
    }
    if records.len() != head.count {
        return Err(DataError::data(format!(
            "truncated file: header declares {} records, found {}",
            head.count,
            records.len()
        )));
    }
    Ok((head.body, records))
}

fn create(path: &Path) -> Result<BufWriter<File>, DataError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| DataError::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| DataError::io(path, e))
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|e| DataError::io(path, e))
}

pub fn write_preference_dataset<W: Write>(w: W, dataset: &PreferenceDataset) -> Result<(), DataError> {
    write_lines(w, DATASET_FORMAT, &dataset.header, &dataset.records)
}

pub fn read_preference_dataset<R: Read>(r: R) -> Result<PreferenceDataset, DataError> {
    let (header, records): (DatasetHeader, Vec<UserRecord>) = read_lines(r, DATASET_FORMAT)?;
    let dataset = PreferenceDataset { header, records };
    dataset.validate().map_err(|e| DataError::data(e.to_string()))?;
    Ok(dataset)
}

pub fn save_preference_dataset(dataset: &PreferenceDataset, path: &Path) -> Result<(), DataError> {
    write_preference_dataset(create(path)?, dataset)
}

pub fn load_preference_dataset(path: &Path) -> Result<PreferenceDataset, DataError> {
    read_preference_dataset(open(path)?)
}

pub fn save_users(users: &[SyntheticUser], header: &UsersHeader, path: &Path) -> Result<(), DataError> {
    write_lines(create(path)?, USERS_FORMAT, header, users)
}

pub fn load_users(path: &Path) -> Result<(UsersHeader, Vec<SyntheticUser>), DataError> {
    read_lines(open(path)?, USERS_FORMAT)
}

/// Text serialization of a model: a magic line, scalar fields, free-form
/// `meta` lines, then `A`, `A^-1` and `b` as rows of decimals. Floats use
/// the shortest representation that parses back to the same value.
pub fn write_model<W: Write>(
    mut w: W,
    model: &LinUcbModel,
    provenance: &BTreeMap<String, String>,
) -> Result<(), DataError> {
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_MAGIC} v{FORMAT_VERSION}");
    let _ = writeln!(s, "dim {}", model.dim());
    let _ = writeln!(s, "alpha {}", model.alpha());
    let _ = writeln!(s, "ridge {}", model.ridge());
    let _ = writeln!(s, "updates {}", model.updates());
    let _ = writeln!(s, "out_of_range {}", model.out_of_range_rewards());
    for (k, v) in provenance {
        let _ = writeln!(s, "meta {k} {}", v.replace('\n', " "));
    }
    let row = |s: &mut String, vals: &mut dyn Iterator<Item = f64>| {
        let parts: Vec<String> = vals.map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", parts.join(" "));
    };
    for (name, m) in [("A", model.design()), ("A_inv", model.design_inverse())] {
        let _ = writeln!(s, "{name}");
        for r in 0..m.nrows() {
            row(&mut s, &mut m.row(r).iter().copied());
        }
    }
    let _ = writeln!(s, "b");
    row(&mut s, &mut model.response().iter().copied());
    w.write_all(s.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| DataError::data(format!("write failed: {e}")))
}

struct Cursor {
    lines: Vec<String>,
    pos: usize,
}

impl Cursor {
    fn next(&mut self, what: &str) -> Result<(u64, &str), DataError> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| DataError::data(format!("truncated model file: expected {what}")))?;
        self.pos += 1;
        Ok((self.pos as u64, line.as_str()))
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, DataError> {
        let (n, line) = self.next(key)?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| DataError::at_line(n, format!("expected `{key}`")))?;
        value
            .parse()
            .map_err(|_| DataError::at_line(n, format!("bad `{key}` value `{value}`")))
    }

    fn tag(&mut self, tag: &str) -> Result<(), DataError> {
        let (n, line) = self.next(tag)?;
        if line != tag {
            return Err(DataError::at_line(n, format!("expected `{tag}`")));
        }
        Ok(())
    }

    fn row(&mut self, expect: usize) -> Result<Vec<f64>, DataError> {
        let (n, line) = self.next("matrix row")?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| DataError::at_line(n, format!("bad number `{t}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != expect {
            return Err(DataError::at_line(n, format!("expected {expect} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn rows(&mut self, n: usize, width: usize) -> Result<Vec<f64>, DataError> {
        let mut out = Vec::with_capacity(n * width);
        for _ in 0..n {
            out.extend(self.row(width)?);
        }
        Ok(out)
    }
}

pub fn read_model<R: Read>(r: R) -> Result<(LinUcbModel, BTreeMap<String, String>), DataError> {
    let lines = BufReader::new(r)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| DataError::data(e.to_string()))?;
    let mut c = Cursor { lines, pos: 0 };
    let (_, magic) = c.next("header")?;
    let version = magic
        .strip_prefix(MODEL_MAGIC)
        .and_then(|v| v.trim().strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| DataError::Format(format!("not a model file: `{magic}`")))?;
    if version != FORMAT_VERSION {
        return Err(DataError::Format(format!("unsupported model version {version}")));
    }
    let dim: usize = c.scalar("dim")?;
    let alpha: f64 = c.scalar("alpha")?;
    let ridge: f64 = c.scalar("ridge")?;
    let updates: u64 = c.scalar("updates")?;
    let out_of_range: u64 = c.scalar("out_of_range")?;
    let mut provenance = BTreeMap::new();
    while let Some(rest) = c.lines.get(c.pos).and_then(|l| l.strip_prefix("meta ")) {
        let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
        provenance.insert(k.to_owned(), v.to_owned());
        c.pos += 1;
    }
    c.tag("A")?;
    let design = c.rows(dim, dim)?;
    c.tag("A_inv")?;
    let inverse = c.rows(dim, dim)?;
    c.tag("b")?;
    let b = c.row(dim)?;
    let model = LinUcbModel::from_parts(
        alpha,
        ridge,
        DMatrix::from_row_slice(dim, dim, &design),
        DMatrix::from_row_slice(dim, dim, &inverse),
        DVector::from_vec(b),
        updates,
        out_of_range,
    )
    .map_err(|e| DataError::data(e.to_string()))?;
    Ok((model, provenance))
}

pub fn save_model(model: &LinUcbModel, provenance: &BTreeMap<String, String>, path: &Path) -> Result<(), DataError> {
    write_model(create(path)?, model, provenance)
}

pub fn load_model(path: &Path) -> Result<(LinUcbModel, BTreeMap<String, String>), DataError> {
    read_model(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{ContextVector, FeatureVector};
    use crate::data::{FeatureValue, UserFeatures};
    use crate::generate::{GenerationMode, PairEntry, Rewards};

    fn user(id: u64) -> SyntheticUser {
        let features: UserFeatures = [("age", FeatureValue::from(30 + id as i64)), ("job", FeatureValue::from("nurse"))]
            .into_iter()
            .collect();
        SyntheticUser {
            id,
            persona: format!("persona {id}"),
            features,
            context: ContextVector::new(vec![0.1 * id as f64, 1.0 / 3.0]),
        }
    }

    fn dense(n: u64) -> PreferenceDataset {
        PreferenceDataset {
            header: DatasetHeader {
                mode: GenerationMode::Dense,
                arms: 3,
                catalog_id: None,
                repeats: 5,
                seed: 9,
                oracle: "bernoulli".into(),
                pairs_per_user: None,
                failed_queries: 0,
                dropped_users: 0,
                provenance: [("seed".to_string(), "9".to_string())].into(),
            },
            records: (0..n)
                .map(|i| UserRecord {
                    user: user(i),
                    rewards: Rewards::Dense {
                        rewards: vec![0.1, 2.0 / 3.0, 0.7],
                        wins: vec![1, 4, 5],
                        comparisons: vec![10, 6, 7],
                    },
                })
                .collect(),
        }
    }

    fn roundtrip(d: &PreferenceDataset) -> PreferenceDataset {
        let mut buf = Vec::new();
        write_preference_dataset(&mut buf, d).unwrap();
        read_preference_dataset(buf.as_slice()).unwrap()
    }

    #[test]
    fn dense_and_empty_roundtrip() {
        let d = dense(3);
        assert_eq!(roundtrip(&d), d);
        let e = dense(0);
        assert_eq!(roundtrip(&e), e);
    }

    #[test]
    fn sparse_roundtrip() {
        let mut d = dense(2);
        d.header.mode = GenerationMode::Sparse;
        d.header.arms = 576;
        d.header.catalog_id = Some("abc".into());
        d.header.pairs_per_user = Some(5);
        for r in &mut d.records {
            r.rewards = Rewards::Sparse {
                entries: vec![
                    PairEntry { first: 3, second: 9, fraction: 0.3 },
                    PairEntry { first: 9, second: 3, fraction: 0.7 },
                ],
            };
        }
        assert_eq!(roundtrip(&d), d);
    }

    #[test]
    fn future_version_and_truncation() {
        let mut buf = Vec::new();
        write_preference_dataset(&mut buf, &dense(3)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let future = text.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(read_preference_dataset(future.as_bytes()), Err(DataError::Format(_))));
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_preference_dataset(cut.as_bytes()), Err(DataError::Data { .. })));
        let half = &text[..text.len() - 10];
        assert!(matches!(read_preference_dataset(half.as_bytes()), Err(DataError::Data { .. })));
        assert!(matches!(read_preference_dataset(&b""[..]), Err(DataError::Data { .. })));
    }

    #[test]
    fn byte_stable() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_preference_dataset(&mut a, &dense(3)).unwrap();
        write_preference_dataset(&mut b, &roundtrip(&dense(3))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_roundtrip_exact() {
        let mut m = LinUcbModel::new(3, 10.0, 1.0).unwrap();
        for i in 0..20 {
            let x = FeatureVector::new(vec![(i as f64).sin(), 0.1 * i as f64 / 3.0, 1.0 / 7.0]);
            m.update(&x, (i % 3) as f64 / 3.0).unwrap();
        }
        let prov: BTreeMap<String, String> = [("seed".to_string(), "4".to_string())].into();
        let mut buf = Vec::new();
        write_model(&mut buf, &m, &prov).unwrap();
        let (back, p) = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(p, prov);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cbli-linucb v1\n"));
        let future = text.replacen("v1", "v7", 1);
        assert!(matches!(read_model(future.as_bytes()), Err(DataError::Format(_))));
        let cut: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_model(cut.as_bytes()), Err(DataError::Data { .. })));
    }
}
