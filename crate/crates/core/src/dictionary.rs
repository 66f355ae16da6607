//! FIFO key dictionary with iteration tags, and the EMA parameter update
//! used to produce its keys.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::check_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Earliest,
    Random,
    Newest,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "earliest" => Ok(Self::Earliest),
            "random" => Ok(Self::Random),
            "newest" => Ok(Self::Newest),
            other => Err(Error::InvalidConfig(format!("unknown sampling strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub key: Vec<f64>,
    pub iteration: u64,
}

/// Fixed-capacity ring of detached keys. When full, each push overwrites the
/// oldest entries.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueDictionary {
    capacity: usize,
    dim: usize,
    keys: Vec<f64>,
    tags: Vec<u64>,
    /// Slot of the oldest entry.
    head: usize,
    len: usize,
    /// Last pushed iteration.
    iteration: u64,
}

impl QueueDictionary {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::InvalidConfig("dictionary capacity and dimension must be positive".into()));
        }
        Ok(Self {
            capacity,
            dim,
            keys: vec![0.0; capacity * dim],
            tags: vec![0; capacity],
            head: 0,
            len: 0,
            iteration: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity
    }

    pub fn last_iteration(&self) -> u64 {
        self.iteration
    }

    fn slot(&self, age_rank: usize) -> usize {
        (self.head + age_rank) % self.capacity
    }

    fn push_one(&mut self, key: &[f64], iteration: u64) {
        let slot = if self.len < self.capacity {
            let s = self.slot(self.len);
            self.len += 1;
            s
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.capacity;
            s
        };
        self.keys[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(key);
        self.tags[slot] = iteration;
    }

    fn check_iteration(&self, iteration: u64) -> Result<()> {
        if iteration < self.iteration {
            return Err(Error::NonMonotoneIteration {
                last: self.iteration,
                given: iteration,
            });
        }
        Ok(())
    }

    /// Appends `keys` in order, all tagged with `iteration`.
    pub fn push(&mut self, keys: &[Vec<f64>], iteration: u64) -> Result<()> {
        self.check_iteration(iteration)?;
        for k in keys {
            check_dim(self.dim, k.len())?;
        }
        for k in keys {
            self.push_one(k, iteration);
        }
        self.iteration = iteration;
        Ok(())
    }

    /// Row-wise variant of [`push`](Self::push).
    pub fn push_rows(&mut self, keys: ArrayView2<f64>, iteration: u64) -> Result<()> {
        self.check_iteration(iteration)?;
        check_dim(self.dim, keys.ncols())?;
        for row in keys.rows() {
            match row.as_slice() {
                Some(s) => self.push_one(s, iteration),
                None => self.push_one(&row.to_vec(), iteration),
            }
        }
        self.iteration = iteration;
        Ok(())
    }

    /// Entries from oldest to newest.
    pub fn entries(&self) -> impl Iterator<Item = QueueEntry> + '_ {
        (0..self.len).map(|r| self.entry(r))
    }

    fn entry(&self, age_rank: usize) -> QueueEntry {
        let s = self.slot(age_rank);
        QueueEntry {
            key: self.keys[s * self.dim..(s + 1) * self.dim].to_vec(),
            iteration: self.tags[s],
        }
    }

    fn sample_ranks<R: Rng + ?Sized>(&self, strategy: SamplingStrategy, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        if count > self.len {
            return Err(Error::InsufficientEntries {
                requested: count,
                available: self.len,
            });
        }
        Ok(match strategy {
            SamplingStrategy::Earliest => (0..count).collect(),
            SamplingStrategy::Newest => (self.len - count..self.len).collect(),
            SamplingStrategy::Random => rand::seq::index::sample(rng, self.len, count).into_vec(),
        })
    }

    /// `count` entries: the oldest, the most recent (both oldest first), or a
    /// uniform draw without replacement. Never mutates the dictionary.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        strategy: SamplingStrategy,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<QueueEntry>> {
        Ok(self
            .sample_ranks(strategy, count, rng)?
            .into_iter()
            .map(|r| self.entry(r))
            .collect())
    }

    /// [`sample`](Self::sample) packed as a `count x dim` matrix.
    pub fn sample_matrix<R: Rng + ?Sized>(
        &self,
        strategy: SamplingStrategy,
        count: usize,
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        let ranks = self.sample_ranks(strategy, count, rng)?;
        let mut out = Array2::zeros((count, self.dim));
        for (row, r) in out.rows_mut().into_iter().zip(ranks) {
            let s = self.slot(r);
            row.into_slice()
                .expect("fresh array is contiguous")
                .copy_from_slice(&self.keys[s * self.dim..(s + 1) * self.dim]);
        }
        Ok(out)
    }

    /// All stored keys, oldest first.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.len, self.dim));
        for (r, row) in out.rows_mut().into_iter().enumerate() {
            let s = self.slot(r);
            row.into_slice()
                .expect("fresh array is contiguous")
                .copy_from_slice(&self.keys[s * self.dim..(s + 1) * self.dim]);
        }
        out
    }

    /// Little-endian dump: `capacity, length, dim, iteration` as u64, then
    /// `length x dim` f64 keys oldest first, then `length` u64 tags.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.len * (self.dim * 8 + 8));
        for h in [self.capacity, self.len, self.dim] {
            out.extend_from_slice(&(h as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.iteration.to_le_bytes());
        for r in 0..self.len {
            let s = self.slot(r);
            for x in &self.keys[s * self.dim..(s + 1) * self.dim] {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for r in 0..self.len {
            out.extend_from_slice(&self.tags[self.slot(r)].to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut words = bytes.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8"));
        if !bytes.len().is_multiple_of(8) || bytes.len() < 32 {
            return Err(Error::Format(format!("dictionary block has length {}", bytes.len())));
        }
        let mut header = [0u64; 4];
        for h in &mut header {
            *h = u64::from_le_bytes(words.next().expect("length checked"));
        }
        let [capacity, len, dim, iteration] = header.map(|h| h as usize);
        let expected = 32 + len * dim * 8 + len * 8;
        if len > capacity || bytes.len() != expected {
            return Err(Error::Format(format!(
                "dictionary header (capacity {capacity}, length {len}, dim {dim}) does not match {} bytes",
                bytes.len()
            )));
        }
        let mut dict = Self::new(capacity, dim)?;
        let keys: Vec<f64> = words.by_ref().take(len * dim).map(f64::from_le_bytes).collect();
        let tags: Vec<u64> = words.map(u64::from_le_bytes).collect();
        for (i, w) in tags.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(Error::Format(format!("iteration tags decrease at entry {}", i + 1)));
            }
        }
        for (k, &t) in keys.chunks_exact(dim).zip(&tags) {
            dict.push_one(k, t);
        }
        dict.iteration = iteration as u64;
        Ok(dict)
    }
}

/// EMA coefficient `m` in `target <- m * target + (1 - m) * online`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MomentumConfig(f64);

impl MomentumConfig {
    pub fn new(m: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::InvalidMomentum(m));
        }
        Ok(Self(m))
    }

    pub fn coefficient(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MomentumConfig {
    type Error = Error;
    fn try_from(m: f64) -> Result<Self> {
        Self::new(m)
    }
}

impl From<MomentumConfig> for f64 {
    fn from(m: MomentumConfig) -> f64 {
        m.0
    }
}

/// `target <- m * target + (1 - m) * online`, written as a step towards `online`
/// so that `m = 1` and `target == online` leave the target bit-identical.
pub fn momentum_update(online: &[f64], target: &mut [f64], m: MomentumConfig) -> Result<()> {
    check_dim(online.len(), target.len())?;
    if m.0 == 0.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    let step = 1.0 - m.0;
    for (t, o) in target.iter_mut().zip(online) {
        *t += step * (o - *t);
    }
    Ok(())
}
