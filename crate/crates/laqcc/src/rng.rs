//! Seeded, hierarchically derived random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scripted measurement decisions used for branch enumeration by replay.
#[derive(Clone, Debug, Default)]
pub struct BranchScript {
    /// Outcomes to force, in order of measurement.
    pub prefix: Vec<bool>,
    /// Decisions taken during the current run: (outcome, alternative possible).
    pub taken: Vec<(bool, bool)>,
    /// Product of the probabilities of the outcomes taken.
    pub probability: f64,
}

/// A deterministic random stream identified by `(root_seed, stream_path)`.
///
/// Identical identifiers always give identical draws; [`RandomSource::derive`]
/// appends one element to the path and yields an independent child stream.
#[derive(Clone, Debug)]
pub struct RandomSource {
    root_seed: u64,
    path: Vec<u64>,
    rng: ChaCha12Rng,
    script: Option<BranchScript>,
}

impl RandomSource {
    pub fn new(root_seed: u64) -> Self {
        Self::with_path(root_seed, Vec::new())
    }

    pub fn with_path(root_seed: u64, path: Vec<u64>) -> Self {
        let mut seed = [0u8; 32];
        let mut h = splitmix(root_seed);
        for &p in &path {
            h = splitmix(h ^ splitmix(p.wrapping_add(0xA5A5_A5A5)));
        }
        for (i, chunk) in seed.chunks_mut(8).enumerate() {
            let w = splitmix(h.wrapping_add(i as u64));
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        RandomSource {
            root_seed,
            path,
            rng: ChaCha12Rng::from_seed(seed),
            script: None,
        }
    }

    /// Child stream with `index` appended to the path.
    pub fn derive(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self::with_path(self.root_seed, path)
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Attach a replay script; measurement outcomes are then taken from it.
    pub fn set_script(&mut self, prefix: Vec<bool>) {
        self.script = Some(BranchScript {
            prefix,
            taken: Vec::new(),
            probability: 1.0,
        });
    }

    pub fn take_script(&mut self) -> Option<BranchScript> {
        self.script.take()
    }

    pub fn is_scripted(&self) -> bool {
        self.script.is_some()
    }

    /// Choose a measurement outcome given `p1 = Pr[1]`.
    ///
    /// Without a script this samples. With a script the next prefix entry is
    /// used, and past the prefix the first outcome of nonzero probability.
    pub(crate) fn choose_outcome(&mut self, p1: f64, cutoff: f64) -> bool {
        match &mut self.script {
            None => {
                let u = (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                u < p1
            }
            Some(s) => {
                let idx = s.taken.len();
                let p0 = 1.0 - p1;
                let outcome = if idx < s.prefix.len() {
                    s.prefix[idx]
                } else {
                    p0 <= cutoff
                };
                let alt = if outcome { p0 > cutoff } else { p1 > cutoff };
                s.taken.push((outcome, alt));
                s.probability *= if outcome { p1 } else { p0 };
                outcome
            }
        }
    }

    /// Uniform float in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Enumerate every measurement branch of `run` by replay.
///
/// `run` is called once per branch with a scripted source. Returns the result
/// and probability of each branch. Branches with probability at or below
/// `1e-12` are skipped.
pub fn enumerate_branches<T, F>(mut run: F, max_branches: usize) -> crate::Result<Vec<(T, f64)>>
where
    F: FnMut(&mut RandomSource) -> crate::Result<T>,
{
    let mut out = Vec::new();
    let mut prefix: Vec<bool> = Vec::new();
    loop {
        let mut rng = RandomSource::new(0);
        rng.set_script(prefix.clone());
        let value = run(&mut rng)?;
        let script = rng.take_script().expect("script present");
        out.push((value, script.probability));
        if out.len() > max_branches {
            return Err(crate::Error::Capacity(format!(
                "more than {max_branches} measurement branches"
            )));
        }
        // backtrack to the deepest decision with an untried alternative
        let mut next = None;
        for (i, &(outcome, alt)) in script.taken.iter().enumerate().rev() {
            if !outcome && alt {
                next = Some(i);
                break;
            }
        }
        match next {
            None => break,
            Some(i) => {
                prefix = script.taken[..i].iter().map(|&(o, _)| o).collect();
                prefix.push(true);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_path_same_draws() {
        let mut a = RandomSource::with_path(7, vec![1, 2]);
        let mut b = RandomSource::with_path(7, vec![1, 2]);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_paths_differ() {
        let mut a = RandomSource::new(7).derive(0);
        let mut b = RandomSource::new(7).derive(1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn replay_visits_all_outcomes() {
        let branches = enumerate_branches(
            |rng| {
                let a = rng.choose_outcome(0.5, 1e-12);
                let b = rng.choose_outcome(0.25, 1e-12);
                Ok((a, b))
            },
            16,
        )
        .unwrap();
        assert_eq!(branches.len(), 4);
        let total: f64 = branches.iter().map(|b| b.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
