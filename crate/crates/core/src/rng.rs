//! Per-session random streams.
//!
//! Session `i` of a run with seed `s` always draws from ChaCha8 keyed by `s`
//! on stream `i`, so results do not depend on how sessions are spread over
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn session_rng(seed: u64, session: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(session);
    rng
}
