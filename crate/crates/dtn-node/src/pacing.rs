//! Token-bucket pacing for send-side bandwidth shaping.
//!
//! The bucket starts empty and refills at the configured bit rate, so the
//! bytes granted by time `t` never exceed `rate * t` — a transfer of `n`
//! bytes is guaranteed to take at least `n * 8 / rate` seconds, which the
//! chain experiments rely on as a lower bound. Senders split writes into
//! chunks no larger than the bucket capacity and take tokens per chunk.

use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Largest single token grab; senders chunk their writes to this size.
pub const CHUNK_BYTES: usize = 64 * 1024;

#[derive(Debug)]
struct BucketState {
    tokens_bytes: f64,
    last_refill: Instant,
}

#[derive(Debug)]
pub struct TokenBucket {
    rate_bits_per_sec: u64,
    capacity_bytes: f64,
    state: Mutex<BucketState>,
}

impl TokenBucket {
    /// A bucket granting `rate_bits_per_sec`, starting empty.
    pub fn new(rate_bits_per_sec: u64) -> TokenBucket {
        assert!(rate_bits_per_sec > 0, "pacing rate must be positive");
        TokenBucket {
            rate_bits_per_sec,
            capacity_bytes: CHUNK_BYTES as f64,
            state: Mutex::new(BucketState { tokens_bytes: 0.0, last_refill: Instant::now() }),
        }
    }

    pub fn rate_bits_per_sec(&self) -> u64 {
        self.rate_bits_per_sec
    }

    /// Block until `bytes` tokens are available, then take them.
    pub fn take(&self, bytes: usize) {
        assert!(bytes as f64 <= self.capacity_bytes, "request exceeds bucket capacity");
        let rate_bytes_per_sec = self.rate_bits_per_sec as f64 / 8.0;
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let now = Instant::now();
                let elapsed = now.duration_since(state.last_refill).as_secs_f64();
                state.last_refill = now;
                state.tokens_bytes =
                    (state.tokens_bytes + elapsed * rate_bytes_per_sec).min(self.capacity_bytes);
                if state.tokens_bytes >= bytes as f64 {
                    state.tokens_bytes -= bytes as f64;
                    return;
                }
                (bytes as f64 - state.tokens_bytes) / rate_bytes_per_sec
            };
            std::thread::sleep(Duration::from_secs_f64(wait.max(0.0005)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enforces_lower_bound() {
        // 8 Mbit/s, 1 MiB payload -> at least ~1.048 s
        let bucket = TokenBucket::new(8_000_000);
        let total = 1024 * 1024usize;
        let start = Instant::now();
        let mut sent = 0;
        while sent < total {
            let chunk = CHUNK_BYTES.min(total - sent);
            bucket.take(chunk);
            sent += chunk;
        }
        let elapsed = start.elapsed().as_secs_f64();
        let bound = total as f64 * 8.0 / 8_000_000.0;
        assert!(elapsed >= bound, "took {elapsed:.3}s, bound {bound:.3}s");
        assert!(elapsed < bound * 2.0, "took {elapsed:.3}s, way over bound {bound:.3}s");
    }

    #[test]
    fn small_takes_have_a_serialization_floor() {
        // 54 Mbit/s: 64 KiB must take at least ~9.7 ms from an empty bucket
        let bucket = TokenBucket::new(54_000_000);
        let start = Instant::now();
        bucket.take(64 * 1024);
        let elapsed = start.elapsed().as_secs_f64();
        assert!(elapsed >= 64.0 * 1024.0 * 8.0 / 54_000_000.0, "floor violated: {elapsed}");
    }
}
