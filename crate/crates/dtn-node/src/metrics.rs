//! In-process counters replacing external CPU/network samplers: bytes in and
//! out per convergence layer plus process CPU time, sampled at 1 Hz into the
//! journal.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct NodeMetrics {
    bytes_in: AtomicU64,
    bytes_out: AtomicU64,
}

impl NodeMetrics {
    pub fn new() -> NodeMetrics {
        NodeMetrics::default()
    }

    pub fn add_bytes_in(&self, n: u64) {
        self.bytes_in.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_bytes_out(&self, n: u64) {
        self.bytes_out.fetch_add(n, Ordering::Relaxed);
    }

    pub fn bytes_in(&self) -> u64 {
        self.bytes_in.load(Ordering::Relaxed)
    }

    pub fn bytes_out(&self) -> u64 {
        self.bytes_out.load(Ordering::Relaxed)
    }
}

/// Cumulative user+system CPU time of this process in milliseconds.
///
/// Reads `/proc/self/stat` on Linux; returns 0 elsewhere.
pub fn process_cpu_ms() -> u64 {
    #[cfg(target_os = "linux")]
    {
        if let Ok(stat) = std::fs::read_to_string("/proc/self/stat") {
            // fields 14 and 15 (1-based) are utime and stime in clock ticks,
            // counted after the parenthesized command name
            if let Some(end) = stat.rfind(')') {
                let fields: Vec<&str> = stat[end + 1..].split_whitespace().collect();
                if fields.len() > 12 {
                    let utime: u64 = fields[11].parse().unwrap_or(0);
                    let stime: u64 = fields[12].parse().unwrap_or(0);
                    let ticks_per_sec = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
                    let ticks_per_sec = if ticks_per_sec > 0 { ticks_per_sec as u64 } else { 100 };
                    return (utime + stime) * 1000 / ticks_per_sec;
                }
            }
        }
        0
    }
    #[cfg(not(target_os = "linux"))]
    {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_accumulate() {
        let m = NodeMetrics::new();
        m.add_bytes_in(10);
        m.add_bytes_in(5);
        m.add_bytes_out(7);
        assert_eq!(m.bytes_in(), 15);
        assert_eq!(m.bytes_out(), 7);
    }

    #[test]
    fn cpu_time_is_monotone() {
        let a = process_cpu_ms();
        // burn a little CPU
        let mut x = 0u64;
        for i in 0..2_000_000u64 {
            x = x.wrapping_mul(31).wrapping_add(i);
        }
        std::hint::black_box(x);
        let b = process_cpu_ms();
        assert!(b >= a);
    }
}
