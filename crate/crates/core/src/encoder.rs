//! Deterministic text encoder built on feature hashing.
//!
//! A pair `(a, b)` is encoded as three hashed blocks laid out back to back:
//! unigrams+bigrams of `a`, unigrams+bigrams of `b`, and token-overlap
//! features of the pair. Each block is L2-normalized and the concatenation is
//! scaled to unit norm. Single texts are encoded as one hashed bag of
//! unigrams+bigrams over the full width.
//!
//! Hashing uses xxh64 with a fixed seed so encodings are bit-identical across
//! runs and platforms.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use crate::corpus::tokenize;
use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 256;
pub const HASH_SEED: u64 = 0x00d9_5eed_0001;
pub const ENCODER_ID: &str = "xxh64-ngram-hash-v1";

/// Interaction slots reserved for overlap statistics ahead of the hashed
/// shared-token slots.
const STAT_SLOTS: usize = 4;

/// Dense real vector of the configured encoder dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

pub fn hash_gram(gram: &str) -> u64 {
    xxh64(gram.as_bytes(), HASH_SEED)
}

/// Encoder-independent hashed view of a text: n-gram hashes with counts and
/// the unique unigram/bigram sets used for overlap features.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextFeatures {
    grams: Vec<(u64, u32)>,
    unigrams: Vec<u64>,
    bigrams: Vec<u64>,
}

impl TextFeatures {
    pub fn new(text: &str) -> Self {
        Self::from_tokens(&tokenize(text))
    }

    pub fn from_tokens(tokens: &[String]) -> Self {
        let mut unigrams: Vec<u64> = tokens.iter().map(|t| hash_gram(t)).collect();
        let mut bigrams: Vec<u64> = tokens
            .windows(2)
            .map(|w| hash_gram(&format!("{} {}", w[0], w[1])))
            .collect();
        let mut all: Vec<u64> = unigrams.iter().chain(&bigrams).copied().collect();
        all.sort_unstable();
        let mut grams: Vec<(u64, u32)> = Vec::with_capacity(all.len());
        for h in all {
            match grams.last_mut() {
                Some((last, count)) if *last == h => *count += 1,
                _ => grams.push((h, 1)),
            }
        }
        unigrams.sort_unstable();
        unigrams.dedup();
        bigrams.sort_unstable();
        bigrams.dedup();
        TextFeatures {
            grams,
            unigrams,
            bigrams,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }
}

/// Text features projected onto the encoder's side-block width, with the
/// `tanh` of every entry precomputed at the three possible block scales.
#[derive(Debug, Clone, Default)]
pub struct TextCode {
    block: Vec<(u32, f64)>,
    tanh: [Vec<f64>; 3],
    unigrams: Vec<u64>,
    bigrams: Vec<u64>,
}

impl TextCode {
    pub fn is_empty(&self) -> bool {
        self.block.is_empty()
    }
}

/// Sparse encoding of an ordered pair, borrowing both side codes.
#[derive(Debug, Clone)]
pub struct PairCode<'a> {
    left: &'a TextCode,
    right: &'a TextCode,
    inter: Vec<(u32, f64)>,
    inter_tanh: Vec<f64>,
    blocks: usize,
}

/// Scale applied to every block when `k` blocks are nonzero.
fn block_scale(k: usize) -> f64 {
    1.0 / (k as f64).sqrt()
}

fn normalize_sparse(entries: &mut [(u32, f64)]) {
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in entries.iter_mut() {
            *v /= norm;
        }
    }
}

fn hashed_block(grams: &[(u64, u32)], width: usize) -> Vec<(u32, f64)> {
    let mut slots: Vec<(u32, f64)> = grams
        .iter()
        .map(|&(h, c)| ((h % width as u64) as u32, c as f64))
        .collect();
    slots.sort_by_key(|&(i, _)| i);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(slots.len());
    for (i, c) in slots {
        match merged.last_mut() {
            Some((last, acc)) if *last == i => *acc += c,
            _ => merged.push((i, c)),
        }
    }
    normalize_sparse(&mut merged);
    merged
}

fn intersect_count(a: &[u64], b: &[u64], mut on_match: impl FnMut(u64)) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                on_match(a[i]);
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Block widths of a pair encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub side: usize,
    pub interaction: usize,
}

/// Feature-hashing encoder. Stateless; cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEncoder {
    dim: usize,
    layout: BlockLayout,
}

impl Default for HashEncoder {
    fn default() -> Self {
        HashEncoder::new(DEFAULT_DIM).expect("default dimension is valid")
    }
}

impl HashEncoder {
    /// Splits `dim` as 3/8, 3/8, 1/4 across the left, right and interaction
    /// blocks (96/96/64 at the default 256).
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 16 {
            return Err(Error::invalid(format!("encoder dimension {dim} < 16")));
        }
        let side = dim * 3 / 8;
        let layout = BlockLayout {
            side,
            interaction: dim - 2 * side,
        };
        Ok(HashEncoder { dim, layout })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn id(&self) -> &'static str {
        ENCODER_ID
    }

    pub fn code(&self, features: &TextFeatures) -> TextCode {
        let block = hashed_block(&features.grams, self.layout.side);
        let tanh = [1, 2, 3].map(|k| {
            let s = block_scale(k);
            block.iter().map(|&(_, v)| (v * s).tanh()).collect()
        });
        TextCode {
            block,
            tanh,
            unigrams: features.unigrams.clone(),
            bigrams: features.bigrams.clone(),
        }
    }

    pub fn code_text(&self, text: &str) -> TextCode {
        self.code(&TextFeatures::new(text))
    }

    pub fn pair<'a>(&self, left: &'a TextCode, right: &'a TextCode) -> PairCode<'a> {
        let inter = self.interaction(left, right);
        let blocks = [!left.block.is_empty(), !right.block.is_empty(), !inter.is_empty()]
            .iter()
            .filter(|b| **b)
            .count();
        let s = if blocks > 0 { block_scale(blocks) } else { 1.0 };
        let inter_tanh = inter.iter().map(|&(_, v)| (v * s).tanh()).collect();
        PairCode {
            left,
            right,
            inter,
            inter_tanh,
            blocks,
        }
    }

    fn interaction(&self, a: &TextCode, b: &TextCode) -> Vec<(u32, f64)> {
        let width = self.layout.interaction;
        let hashed = (width - STAT_SLOTS) as u64;
        let mut acc = vec![0.0f64; width];
        let shared_uni = intersect_count(&a.unigrams, &b.unigrams, |h| {
            acc[STAT_SLOTS + (h % hashed) as usize] += 1.0;
        });
        let shared_bi = intersect_count(&a.bigrams, &b.bigrams, |h| {
            acc[STAT_SLOTS + (h % hashed) as usize] += 1.0;
        });
        if shared_uni == 0 && shared_bi == 0 {
            return Vec::new();
        }
        let ratio = |n: usize, d: usize| n as f64 / d.max(1) as f64;
        acc[0] = ratio(shared_uni, a.unigrams.len());
        acc[1] = ratio(shared_uni, b.unigrams.len());
        acc[2] = ratio(shared_bi, a.bigrams.len());
        acc[3] = ratio(shared_bi, b.bigrams.len());
        let mut out: Vec<(u32, f64)> = acc
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .map(|(i, v)| (i as u32, v))
            .collect();
        normalize_sparse(&mut out);
        out
    }

    /// Dense pair encoding of two raw texts.
    pub fn encode_pair(&self, a: &str, b: &str) -> Vector {
        let (ca, cb) = (self.code_text(a), self.code_text(b));
        self.dense(&self.pair(&ca, &cb))
    }

    /// Dense single-text encoding: hashed unigrams+bigrams over the full width.
    pub fn encode_single(&self, text: &str) -> Vector {
        let features = TextFeatures::new(text);
        let mut out = Vector::zeros(self.dim);
        for (i, v) in hashed_block(&features.grams, self.dim) {
            out[i as usize] = v;
        }
        out
    }

    pub fn dense(&self, pair: &PairCode<'_>) -> Vector {
        let mut out = Vector::zeros(self.dim);
        self.add_dense(pair, 1.0, &mut out);
        out
    }

    /// `out += weight * dense(pair)`.
    pub fn add_dense(&self, pair: &PairCode<'_>, weight: f64, out: &mut [f64]) {
        if pair.blocks == 0 {
            return;
        }
        let s = block_scale(pair.blocks);
        let side = self.layout.side;
        for &(i, v) in &pair.left.block {
            out[i as usize] += weight * (v * s);
        }
        for &(i, v) in &pair.right.block {
            out[side + i as usize] += weight * (v * s);
        }
        for &(i, v) in &pair.inter {
            out[2 * side + i as usize] += weight * (v * s);
        }
    }

    /// Visits `(index, tanh(x_index))` for every nonzero entry, in ascending
    /// index order.
    pub fn for_each_tanh(&self, pair: &PairCode<'_>, mut f: impl FnMut(usize, f64)) {
        if pair.blocks == 0 {
            return;
        }
        let k = pair.blocks - 1;
        let side = self.layout.side;
        for (&(i, _), &t) in pair.left.block.iter().zip(&pair.left.tanh[k]) {
            f(i as usize, t);
        }
        for (&(i, _), &t) in pair.right.block.iter().zip(&pair.right.tanh[k]) {
            f(side + i as usize, t);
        }
        for (&(i, _), &t) in pair.inter.iter().zip(&pair.inter_tanh) {
            f(2 * side + i as usize, t);
        }
    }
}
