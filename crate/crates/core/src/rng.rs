use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SkidRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SkidRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`. Worker
/// pools use `stream_rng(base_seed, worker_id)` so results do not depend on
/// scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> SkidRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
