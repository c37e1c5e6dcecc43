use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Counter-based generator used for every replica.
pub type ReplicaRng = ChaCha8Rng;

/// Independent stream for replica `index` under `seed`; the result does not
/// depend on which worker runs the replica or in which order.
pub fn replica_rng(seed: u64, index: u64) -> ReplicaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
