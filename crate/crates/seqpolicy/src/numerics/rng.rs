use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Seeded random stream: a (master seed, stream id) pair mapped onto
/// independent ChaCha streams. Identical pairs reproduce identical draws;
/// distinct stream ids never overlap, which is what lets replications run in
/// parallel without sharing state.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream under the same master seed, keyed off this stream's id.
    /// Used to hand each simulated unit or replication its own stream.
    pub fn substream(&self, tag: u64) -> RngStream {
        RngStream::new(self.master_seed, mix(self.stream_id, tag))
    }
}

impl RngCore for RngStream {
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

/// Stream id for (replication index, module tag): FNV-1a over the pair so
/// that parallel replications of different modules never collide.
pub fn stream_id_for(replication: u64, module_tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in replication.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(0x100000001b3);
    }
    for b in module_tag.as_bytes() {
        h = (h ^ *b as u64).wrapping_mul(0x100000001b3);
    }
    h
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the xor of the two halves
    let mut z = a ^ b.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
