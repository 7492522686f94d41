use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ActionId, Horizon};
use crate::{Error, Result, RngStream, Scalar};

/// One logged interaction `(x, a, r, x')`, optionally labeled with its step.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTuple<S> {
    pub x: Vec<S>,
    pub a: ActionId,
    pub r: Vec<S>,
    pub x_next: Vec<S>,
    pub step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub env_id: String,
    pub obs_dim: usize,
    pub reward_dim: usize,
    pub num_actions: usize,
    pub horizon: Horizon,
}

/// Immutable collection of transitions. Subsets produced by splitting share the
/// underlying storage and only hold index lists.
#[derive(Debug, Clone)]
pub struct OfflineDataset<S> {
    storage: Arc<Vec<TransitionTuple<S>>>,
    indices: Arc<[usize]>,
    meta: Arc<DatasetMeta>,
}

impl<S: Scalar> OfflineDataset<S> {
    pub fn new(tuples: Vec<TransitionTuple<S>>, meta: DatasetMeta) -> Result<Self> {
        if tuples.is_empty() {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        for (i, t) in tuples.iter().enumerate() {
            if t.x.len() != meta.obs_dim || t.x_next.len() != meta.obs_dim {
                return Err(Error::Validation(format!(
                    "tuple {i}: observation dimension {} / {} but meta says {}",
                    t.x.len(),
                    t.x_next.len(),
                    meta.obs_dim
                )));
            }
            if t.r.len() != meta.reward_dim {
                return Err(Error::Validation(format!(
                    "tuple {i}: reward dimension {} but meta says {}",
                    t.r.len(),
                    meta.reward_dim
                )));
            }
            if t.a.0 >= meta.num_actions {
                return Err(Error::Validation(format!("tuple {i}: action {} out of range", t.a.0)));
            }
            let finite = t.x.iter().chain(&t.r).chain(&t.x_next).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Validation(format!("tuple {i}: non-finite entry")));
            }
        }
        let n = tuples.len();
        Ok(Self { storage: Arc::new(tuples), indices: (0..n).collect(), meta: Arc::new(meta) })
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Positions of this subset's tuples in the original dataset.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn get(&self, i: usize) -> &TransitionTuple<S> {
        &self.storage[self.indices[i]]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &TransitionTuple<S>> + '_ {
        self.indices.iter().map(move |&i| &self.storage[i])
    }

    fn view(&self, indices: Vec<usize>) -> Self {
        Self { storage: Arc::clone(&self.storage), indices: indices.into(), meta: Arc::clone(&self.meta) }
    }

    /// Random even partition into `k` disjoint subsets; sizes differ by at most one.
    pub fn split(&self, k: usize, rng: &mut RngStream) -> Result<Vec<Self>> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cannot split {n} tuples into {k} subsets")));
        }
        let mut perm: Vec<usize> = self.indices.to_vec();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.index(i + 1);
            perm.swap(i, j);
        }
        let base = n / k;
        let extra = n % k;
        let mut out = Vec::with_capacity(k);
        let mut start = 0;
        for s in 0..k {
            let len = base + usize::from(s < extra);
            let mut part = perm[start..start + len].to_vec();
            part.sort_unstable();
            out.push(self.view(part));
            start += len;
        }
        Ok(out)
    }

    /// Partition by the recorded step label into `steps` subsets (`out[h-1]` holds step `h`).
    pub fn split_by_step(&self, steps: usize) -> Result<Vec<Self>> {
        let mut buckets = vec![Vec::new(); steps];
        for &i in self.indices.iter() {
            let h = self.storage[i]
                .step
                .ok_or_else(|| Error::InvalidArgument(format!("tuple {i} has no step label")))?;
            if h == 0 || h > steps {
                return Err(Error::InvalidArgument(format!("tuple {i} has step {h} outside 1..={steps}")));
            }
            buckets[h - 1].push(i);
        }
        if let Some(h) = buckets.iter().position(|b| b.is_empty()) {
            return Err(Error::InvalidArgument(format!("no tuples recorded for step {}", h + 1)));
        }
        Ok(buckets.into_iter().map(|b| self.view(b)).collect())
    }

    /// Hex SHA-256 of the subset's index list; identifies which tuples a fit consumed.
    pub fn subset_hash(&self) -> String {
        let mut h = Sha256::new();
        for &i in self.indices.iter() {
            h.update((i as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn csv_header(&self) -> Vec<String> {
        csv_header(self.meta.obs_dim, self.meta.reward_dim)
    }

    /// Serialize as CSV with floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.csv_header())?;
        let mut row: Vec<String> = Vec::with_capacity(2 + 2 * self.meta.obs_dim + self.meta.reward_dim);
        for t in self.iter() {
            row.clear();
            row.push(t.step.map(|h| h.to_string()).unwrap_or_default());
            row.extend(t.x.iter().map(|v| fmt_f(*v)));
            row.push(t.a.0.to_string());
            row.extend(t.r.iter().map(|v| fmt_f(*v)));
            row.extend(t.x_next.iter().map(|v| fmt_f(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: DatasetMeta) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let expected = csv_header(meta.obs_dim, meta.reward_dim);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header != expected {
            return Err(Error::Validation(format!(
                "unexpected CSV header (got {} columns, expected {})",
                header.len(),
                expected.len()
            )));
        }
        let (dx, dr) = (meta.obs_dim, meta.reward_dim);
        let mut tuples = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| -> Result<S> {
                s.trim()
                    .parse::<f64>()
                    .map(S::lit)
                    .map_err(|e| Error::Validation(format!("row {}: bad float {s:?}: {e}", line + 1)))
            };
            let step = match rec.get(0).unwrap_or("").trim() {
                "" => None,
                s => Some(
                    s.parse::<usize>()
                        .map_err(|e| Error::Validation(format!("row {}: bad step: {e}", line + 1)))?,
                ),
            };
            let x = (1..1 + dx).map(|c| parse(&rec[c])).collect::<Result<Vec<_>>>()?;
            let a = rec[1 + dx]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Validation(format!("row {}: bad action: {e}", line + 1)))?;
            let r = (2 + dx..2 + dx + dr).map(|c| parse(&rec[c])).collect::<Result<Vec<_>>>()?;
            let x_next = (2 + dx + dr..2 + 2 * dx + dr).map(|c| parse(&rec[c])).collect::<Result<Vec<_>>>()?;
            tuples.push(TransitionTuple { x, a: ActionId(a), r, x_next, step });
        }
        Self::new(tuples, meta)
    }
}

fn csv_header(obs_dim: usize, reward_dim: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..obs_dim).map(|i| format!("x_{i}")));
    h.push("a".into());
    h.extend((0..reward_dim).map(|i| format!("r_{i}")));
    h.extend((0..obs_dim).map(|i| format!("xp_{i}")));
    h
}

fn fmt_f<S: Scalar>(v: S) -> String {
    format!("{:.16e}", v.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn toy(n: usize) -> OfflineDataset<f64> {
        let meta = DatasetMeta {
            env_id: "toy".into(),
            obs_dim: 1,
            reward_dim: 1,
            num_actions: 2,
            horizon: Horizon::Finite { steps: 2 },
        };
        let tuples = (0..n)
            .map(|i| TransitionTuple {
                x: vec![i as f64],
                a: ActionId(i % 2),
                r: vec![0.1 * i as f64],
                x_next: vec![i as f64 + 1.0],
                step: Some(1 + i % 2),
            })
            .collect();
        OfflineDataset::new(tuples, meta).unwrap()
    }

    fn sizes(parts: &[OfflineDataset<f64>]) -> Vec<usize> {
        parts.iter().map(|p| p.len()).collect()
    }

    fn multiset(parts: &[OfflineDataset<f64>]) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for p in parts {
            for &i in p.indices() {
                *m.entry(i).or_insert(0) += 1;
            }
        }
        m
    }

    #[test]
    fn split_exact_division() {
        let d = toy(20);
        let parts = d.split(4, &mut RngStream::new(0)).unwrap();
        assert_eq!(sizes(&parts), vec![5; 4]);
        let m = multiset(&parts);
        assert_eq!(m.len(), 20);
        assert!(m.values().all(|&c| c == 1));
    }

    #[test]
    fn split_identity_case() {
        let d = toy(20);
        let parts = d.split(1, &mut RngStream::new(0)).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].indices(), d.indices());
    }

    #[test]
    fn split_uneven_sizes() {
        let d = toy(10);
        let parts = d.split(3, &mut RngStream::new(5)).unwrap();
        let mut s = sizes(&parts);
        s.sort_unstable();
        assert_eq!(s, vec![3, 3, 4]);
        assert_eq!(multiset(&parts).len(), 10);
    }

    #[test]
    fn split_rejects_bad_k() {
        let d = toy(5);
        assert!(d.split(0, &mut RngStream::new(0)).is_err());
        assert!(d.split(6, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        let meta = toy(1).meta().clone();
        assert!(OfflineDataset::<f64>::new(vec![], meta).is_err());
    }

    #[test]
    fn split_by_step_groups_labels() {
        let d = toy(9);
        let parts = d.split_by_step(2).unwrap();
        assert_eq!(sizes(&parts), vec![5, 4]);
        assert!(parts[0].iter().all(|t| t.step == Some(1)));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = toy(7);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = OfflineDataset::<f64>::read_csv(buf.as_slice(), d.meta().clone()).unwrap();
        for (a, b) in d.iter().zip(back.iter()) {
            assert_eq!(a, b);
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,x_0,a,r_0,xp_0\n"));
    }

    #[test]
    fn csv_empty_step_column_for_unlabeled() {
        let mut meta = toy(1).meta().clone();
        meta.horizon = Horizon::Discounted { gamma: 0.9 };
        let t = TransitionTuple { x: vec![0.5], a: ActionId(1), r: vec![1.0], x_next: vec![0.25], step: None };
        let d = OfflineDataset::new(vec![t], meta.clone()).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with(','));
        let back = OfflineDataset::<f64>::read_csv(buf.as_slice(), meta).unwrap();
        assert_eq!(back.get(0).step, None);
    }
}
