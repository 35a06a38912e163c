//! Seeded random streams, Monte Carlo tallies and the distances and
//! intervals used to judge them.
//!
//! Every draw sequence is addressed by `(seed, stream_id)`. Monte Carlo runs
//! are cut into fixed-size chunks and chunk `c` draws from
//! `stream.fork(c)`, so a tally is the same whether the chunks run in order,
//! out of order, or on a thread pool.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Generator behind every [`RandomStream`].
pub type StreamRng = ChaCha8Rng;

/// Draws per Monte Carlo chunk.
pub const CHUNK_LEN: u64 = 1 << 14;

/// Multiplier on the binomial standard error used as the default tolerance.
pub const DEFAULT_SIGMAS: f64 = 4.0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Address of a reproducible draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomStream { seed, stream_id }
    }

    /// Root stream for a master seed.
    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Child stream `index`; same seed, derived stream id.
    pub fn fork(&self, index: u64) -> RandomStream {
        RandomStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index)),
        }
    }

    /// A fresh generator positioned at draw 0 of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `true` with probability `p` (clamped to `[0, 1]`).
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// A fair coin.
pub fn fair_bit<R: Rng + ?Sized>(rng: &mut R) -> bool {
    rng.random::<bool>()
}

fn chunk_count(n: u64) -> u64 {
    n.div_ceil(CHUNK_LEN)
}

fn chunk_len(n: u64, chunk: u64) -> u64 {
    CHUNK_LEN.min(n - chunk * CHUNK_LEN)
}

/// Visits `n` draws in the canonical chunk layout, in order.
pub fn for_each_draw<F>(n: u64, stream: RandomStream, mut f: F)
where
    F: FnMut(&mut StreamRng),
{
    for chunk in 0..chunk_count(n) {
        let mut rng = stream.fork(chunk).rng();
        for _ in 0..chunk_len(n, chunk) {
            f(&mut rng);
        }
    }
}

/// Counts of discrete outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TallyTable<K: Ord> {
    pub cells: BTreeMap<K, u64>,
    pub total: u64,
}

impl<K: Ord> Default for TallyTable<K> {
    fn default() -> Self {
        TallyTable {
            cells: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<K: Ord + Clone> TallyTable<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: K) {
        *self.cells.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    /// Adds another table's counts into this one.
    pub fn merge(&mut self, other: TallyTable<K>) {
        for (k, c) in other.cells {
            *self.cells.entry(k).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn count(&self, key: &K) -> u64 {
        self.cells.get(key).copied().unwrap_or(0)
    }

    pub fn frequency(&self, key: &K) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(key) as f64 / self.total as f64
    }

    /// Fraction of draws satisfying `pred`.
    pub fn frequency_where(&self, pred: impl Fn(&K) -> bool) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let hits: u64 = self
            .cells
            .iter()
            .filter(|(k, _)| pred(k))
            .map(|(_, c)| *c)
            .sum();
        hits as f64 / self.total as f64
    }

    pub fn distribution(&self) -> BTreeMap<K, f64> {
        self.cells
            .iter()
            .map(|(k, &c)| (k.clone(), c as f64 / self.total as f64))
            .collect()
    }
}

/// Tallies `n` draws of `sampler` on one thread.
pub fn mc_estimate<K, F>(sampler: F, n: u64, stream: RandomStream) -> TallyTable<K>
where
    K: Ord + Clone,
    F: Fn(&mut StreamRng) -> K,
{
    let mut table = TallyTable::new();
    for_each_draw(n, stream, |rng| table.add(sampler(rng)));
    table
}

/// Same tally as [`mc_estimate`], chunks spread over the rayon pool.
pub fn mc_estimate_par<K, F>(sampler: F, n: u64, stream: RandomStream) -> TallyTable<K>
where
    K: Ord + Clone + Send,
    F: Fn(&mut StreamRng) -> K + Sync,
{
    (0..chunk_count(n))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream.fork(chunk).rng();
            let mut table = TallyTable::new();
            for _ in 0..chunk_len(n, chunk) {
                table.add(sampler(&mut rng));
            }
            table
        })
        .reduce(TallyTable::new, |mut a, b| {
            a.merge(b);
            a
        })
}

fn check_distribution<'a>(p: impl IntoIterator<Item = &'a f64>, name: &str) -> Result<()> {
    let mut sum = 0.0;
    for &x in p {
        if !(x.is_finite() && x >= 0.0) {
            return Err(LabError::InvalidInput(format!(
                "{name} has invalid mass {x}"
            )));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(LabError::InvalidInput(format!(
            "{name} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Total-variation distance between two distributions on the same indexed
/// outcome space.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(LabError::InvalidInput(format!(
            "outcome spaces differ: {} vs {} cells",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Total-variation distance between keyed distributions; a key missing from
/// one side has mass zero there.
pub fn tv_distance_keyed<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> Result<f64> {
    check_distribution(p.values(), "p")?;
    check_distribution(q.values(), "q")?;
    let mut sum = 0.0;
    for (k, a) in p {
        sum += (a - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, b) in q {
        if !p.contains_key(k) {
            sum += b;
        }
    }
    Ok((0.5 * sum).min(1.0))
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(
        n >= 1 && successes <= n,
        "need 0 <= successes <= n and n >= 1"
    );
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Detection threshold for an empirical TV distance at sample size `n`:
/// `5 √(2/n)`.
pub fn empirical_tv_threshold(n: u64) -> f64 {
    5.0 * (2.0 / n as f64).sqrt()
}

/// Mutual information in bits of a joint table `joint[x][y]`.
pub fn mutual_information_bits(joint: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let width = joint.iter().map(Vec::len).max().unwrap_or(0);
    let cols: Vec<f64> = (0..width)
        .map(|j| joint.iter().map(|r| r.get(j).copied().unwrap_or(0.0)).sum())
        .collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (rows[i] * cols[j])).log2();
            }
        }
    }
    mi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn fair_bit_concentrates() {
        let t = mc_estimate(fair_bit, 1_000_000, RandomStream::from_seed(1));
        let p = t.frequency(&true);
        assert!((0.498..=0.502).contains(&p), "{p}");
        assert_eq!(t.total, 1_000_000);
    }

    #[test]
    fn constant_sampler_single_cell() {
        let t = mc_estimate(|_| 7u8, 12_345, RandomStream::from_seed(3));
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.count(&7), 12_345);
    }

    #[test]
    fn malus_sampler() {
        let p1 = crate::algebra::malus(std::f64::consts::PI / 6.0);
        let t = mc_estimate(|r| bernoulli(r, p1), 1_000_000, RandomStream::from_seed(9));
        let p = t.frequency(&true);
        assert!((0.748..=0.752).contains(&p), "{p}");
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = RandomStream::new(42, 5);
        let f = |r: &mut StreamRng| r.random_range(0..6u8);
        let n = 3 * CHUNK_LEN + 17;
        assert_eq!(mc_estimate(f, n, s), mc_estimate_par(f, n, s));
    }

    #[test]
    fn streams_are_reproducible() {
        let s = RandomStream::new(11, 2);
        let draw = |st: RandomStream| {
            let mut r = st.rng();
            (0..8).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        let (a, b) = (draw(s), draw(s));
        assert_eq!(a, b);
        let c: u64 = s.fork(1).rng().random();
        assert_ne!(a[0], c);
        assert_ne!(RandomStream::new(12, 2).rng().random::<u64>(), a[0]);
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let n = 100_000;
        let mut ra = RandomStream::new(7, 0).fork(0).rng();
        let mut rb = RandomStream::new(7, 0).fork(1).rng();
        let xs: Vec<f64> = (0..n).map(|_| ra.random()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rb.random()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 0.01, "r = {r}");
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(tv_distance(&[0.75, 0.25], &[0.25, 0.75]).unwrap(), 0.5);
        assert!(matches!(
            tv_distance(&[1.0], &[0.5, 0.5]),
            Err(LabError::InvalidInput(_))
        ));
        assert!(tv_distance(&[0.6, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn tv_keyed_missing_keys() {
        let p: BTreeMap<&str, f64> = [("a", 1.0)].into();
        let q: BTreeMap<&str, f64> = [("b", 0.5), ("a", 0.5)].into();
        assert_abs_diff_eq!(tv_distance_keyed(&p, &q).unwrap(), 0.5);
    }

    #[test]
    fn wilson_examples() {
        assert_eq!(wilson_interval(0, 100, 4.0).0, 0.0);
        assert_eq!(wilson_interval(100, 100, 4.0).1, 1.0);
        let (lo, hi) = wilson_interval(500_000, 1_000_000, 4.0);
        assert!(lo < 0.5 && 0.5 < hi);
        // 2 z sqrt(p(1-p)/n) = 0.004 for the normal approximation
        assert_abs_diff_eq!(hi - lo, 0.004, epsilon = 1e-6);
    }

    #[test]
    fn mutual_information_examples() {
        assert_abs_diff_eq!(
            mutual_information_bits(&[vec![0.5, 0.0], vec![0.0, 0.5]]),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(
            mutual_information_bits(&[vec![0.25, 0.25], vec![0.25, 0.25]]),
            0.0
        );
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(p in simplex(5), q in simplex(5), r in simplex(5)) {
            let pq = tv_distance(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&pq));
            prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
            prop_assert!(pq <= tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap() + 1e-12);
        }

        #[test]
        fn merge_is_commutative(a in prop::collection::vec(0u8..4, 0..50), b in prop::collection::vec(0u8..4, 0..50)) {
            let tally = |xs: &[u8]| {
                let mut t = TallyTable::new();
                xs.iter().for_each(|&x| t.add(x));
                t
            };
            let mut ab = tally(&a);
            ab.merge(tally(&b));
            let mut ba = tally(&b);
            ba.merge(tally(&a));
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(ab.total, ab.cells.values().sum::<u64>());
        }
    }
}
