//! Synthetic "boilerplate" similarity benchmark.
//!
//! Each sentence is one of three fixed 8-token boilerplate prefixes followed
//! by 1-3 content words drawn from a 50-word vocabulary. The gold score of a
//! pair is the Jaccard overlap of the two content-word sets, so the prefixes
//! carry no signal at all while dominating any mean-pooled embedding.
//!
//! The prefixes share a five-word skeleton (`it is that in ... of`) present
//! in every sentence and differ in three function words. They use only
//! built-in stopwords, so keyword selection masks exactly the content words.
//!
//! Pair construction: sentence A draws 1-3 distinct content words. Sentence B
//! draws its size (1-3) and a shared count `s` uniform in
//! `0..=min(|A|, |B|)`, takes `s` words from A and fills up with words not in
//! A. Prefixes are drawn independently for A and B. All draws come from a
//! ChaCha8 generator seeded with the given seed.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const PREFIXES: [&str; 3] = [
    "so it is that in all of the",
    "and it is that in some of these",
    "but it is that in most of those",
];

pub const CONTENT_VOCAB: [&str; 50] = [
    "apple", "river", "guitar", "mountain", "candle", "tiger", "window", "pencil", "ocean",
    "garden", "rocket", "violin", "desert", "lantern", "falcon", "bridge", "cherry", "engine",
    "forest", "helmet", "island", "jacket", "kettle", "lemon", "marble", "needle", "orchid",
    "parrot", "quartz", "saddle", "tunnel", "umbrella", "valley", "wagon", "yacht", "zebra",
    "anchor", "basket", "cactus", "dolphin", "emerald", "feather", "glacier", "harbor", "igloo",
    "jungle", "koala", "ladder", "meadow", "nutmeg",
];

pub const MIN_PAIRS: usize = 10;
const MIN_CONTENT: usize = 1;
const MAX_CONTENT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub a: String,
    pub b: String,
    pub gold: f64,
}

pub fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn sentence(prefix: &str, content: &[&str]) -> String {
    format!("{prefix} {}.", content.join(" "))
}

pub fn generate(n_pairs: usize, seed: u64) -> Result<Vec<SyntheticPair>> {
    if n_pairs < MIN_PAIRS {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_PAIRS} pairs, got {n_pairs}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let size_a = rng.random_range(MIN_CONTENT..=MAX_CONTENT);
        let content_a: Vec<&str> = CONTENT_VOCAB
            .choose_multiple(&mut rng, size_a)
            .copied()
            .collect();
        let size_b = rng.random_range(MIN_CONTENT..=MAX_CONTENT);
        let shared = rng.random_range(0..=size_a.min(size_b));
        let mut content_b: Vec<&str> = content_a
            .choose_multiple(&mut rng, shared)
            .copied()
            .collect();
        let fresh: Vec<&str> = CONTENT_VOCAB
            .iter()
            .copied()
            .filter(|w| !content_a.contains(w))
            .collect();
        content_b.extend(fresh.choose_multiple(&mut rng, size_b - shared).copied());
        content_b.shuffle(&mut rng);

        let prefix_a = PREFIXES[rng.random_range(0..PREFIXES.len())];
        let prefix_b = PREFIXES[rng.random_range(0..PREFIXES.len())];
        let set_a: BTreeSet<&str> = content_a.iter().copied().collect();
        let set_b: BTreeSet<&str> = content_b.iter().copied().collect();
        out.push(SyntheticPair {
            a: sentence(prefix_a, &content_a),
            b: sentence(prefix_b, &content_b),
            gold: jaccard(&set_a, &set_b),
        });
    }
    Ok(out)
}

/// Dataset TSV: `a \t b \t gold` with the gold score to six decimals.
pub fn to_tsv(pairs: &[SyntheticPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{}\t{}\t{:.6}\n", p.a, p.b, p.gold))
        .collect()
}
