//! Creation timestamps: wall clock plus a persistent sequence counter, or
//! the clockless mode where creation time is always zero and uniqueness
//! rests entirely on the sequence.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use bp7::time::dtn_time_from_unix_secs;
use bp7::CreationTimestamp;

pub struct CreationClock {
    clockless: bool,
    persist_path: PathBuf,
    state: Mutex<CreationTimestamp>,
}

impl CreationClock {
    /// `persist_path` stores the last issued timestamp so a restarted node
    /// never reuses a `(dtn_time, sequence)` pair.
    pub fn open(persist_path: PathBuf, clockless: bool) -> CreationClock {
        let state = std::fs::read_to_string(&persist_path)
            .ok()
            .and_then(|text| {
                let (t, s) = text.trim().split_once(' ')?;
                Some(CreationTimestamp::new(t.parse().ok()?, s.parse().ok()?))
            })
            .unwrap_or_default();
        CreationClock { clockless, persist_path, state: Mutex::new(state) }
    }

    pub fn now_unix_micros(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0)
    }

    /// Current DTN time in seconds; 0 on clockless nodes.
    pub fn dtn_time_secs(&self) -> u64 {
        if self.clockless {
            0
        } else {
            dtn_time_from_unix_secs(self.now_unix_micros() / 1_000_000)
        }
    }

    /// Issue the next unique creation timestamp.
    pub fn next_creation(&self) -> CreationTimestamp {
        let now = self.dtn_time_secs();
        let mut state = self.state.lock().unwrap();
        *state = if now > state.dtn_time {
            CreationTimestamp::new(now, 0)
        } else {
            // same second, or a clock that stalled/went backwards: never
            // decrease dtn_time, never reuse a sequence
            CreationTimestamp::new(state.dtn_time, state.sequence + 1)
        };
        let _ = std::fs::write(&self.persist_path, format!("{} {}", state.dtn_time, state.sequence));
        *state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clockless_counts_up_and_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("creation");
        let clock = CreationClock::open(path.clone(), true);
        let a = clock.next_creation();
        let b = clock.next_creation();
        assert_eq!(a.dtn_time, 0);
        assert_eq!(b.dtn_time, 0);
        assert!(b.sequence > a.sequence);
        drop(clock);
        let clock = CreationClock::open(path, true);
        let c = clock.next_creation();
        assert!(c.sequence > b.sequence, "restart must not reuse sequences");
    }

    #[test]
    fn system_clock_pairs_are_unique() {
        let dir = tempfile::tempdir().unwrap();
        let clock = CreationClock::open(dir.path().join("creation"), false);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            assert!(seen.insert(clock.next_creation()), "duplicate creation timestamp");
        }
    }
}
