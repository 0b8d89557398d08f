//! Seeded deterministic randomness. Splitmix64 core with named substreams,
//! so every entity draws from its own stream and event interleaving cannot
//! perturb another entity's sequence. Identical (seed, scenario) pairs yield
//! bit-identical runs.

/// One named pseudo-random stream. Not cryptographic; built for
/// reproducibility.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { state: seed }
    }

    /// Derives the substream identified by `name` from a root seed.
    pub fn derive(root_seed: u64, name: &str) -> Self {
        let mut state = root_seed ^ fnv1a(name.as_bytes());
        // burn one round so adjacent seeds decorrelate
        splitmix(&mut state);
        RngStream { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix(&mut self.state)
    }

    /// Uniform value in `[0, bound)`. `bound` = 0 yields 0.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        if bound == 0 {
            return 0;
        }
        // multiply-shift; bias is negligible at simulation scales
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform float in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponentially distributed delay with the given mean, in ms.
    pub fn exp_ms(&mut self, mean_ms: f64) -> u64 {
        let u = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        (-mean_ms * u.ln()).round() as u64
    }

    /// Random lowercase alphanumeric string of length `len`.
    pub fn alnum_string(&mut self, len: usize) -> String {
        const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
        (0..len)
            .map(|_| ALPHABET[self.next_below(ALPHABET.len() as u64) as usize] as char)
            .collect()
    }
}
