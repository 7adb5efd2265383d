//! Per-host minimum gap between request starts.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Monotonic time source, abstracted so tests can run on a fake clock.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep_until(&self, deadline: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep_until(&self, deadline: Duration) {
        let now = self.now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }
}

/// A clock that only moves when someone sleeps on it.
#[derive(Debug, Default)]
pub struct FakeClock {
    now: Mutex<Duration>,
}

impl FakeClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().expect("clock lock poisoned") += by;
    }
}

impl Clock for FakeClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("clock lock poisoned")
    }

    fn sleep_until(&self, deadline: Duration) {
        let mut now = self.now.lock().expect("clock lock poisoned");
        if deadline > *now {
            *now = deadline;
        }
    }
}

/// Hands out request start slots per host. The slot is reserved under the
/// lock, so concurrent callers for the same host are spaced by at least
/// `min_delay` even though they sleep outside it.
pub struct Politeness {
    min_delay: Duration,
    clock: Arc<dyn Clock>,
    last_start: Mutex<HashMap<String, Duration>>,
}

impl Politeness {
    pub fn new(min_delay: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            min_delay,
            clock,
            last_start: Mutex::new(HashMap::new()),
        }
    }

    pub fn min_delay(&self) -> Duration {
        self.min_delay
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Reserves the next start slot for `host` without sleeping.
    pub fn reserve(&self, host: &str) -> Duration {
        let now = self.clock.now();
        let mut last = self.last_start.lock().expect("politeness lock poisoned");
        let start = match last.get(host) {
            Some(&prev) => now.max(prev + self.min_delay),
            None => now,
        };
        last.insert(host.to_string(), start);
        start
    }

    /// Blocks until a request to `host` may start; returns how long it
    /// waited.
    pub fn wait(&self, host: &str) -> Duration {
        let now = self.clock.now();
        let start = self.reserve(host);
        self.clock.sleep_until(start);
        start.saturating_sub(now)
    }
}

impl std::fmt::Debug for Politeness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Politeness")
            .field("min_delay", &self.min_delay)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(delay_ms: u64) -> (Arc<FakeClock>, Politeness) {
        let clock = Arc::new(FakeClock::new());
        let p = Politeness::new(Duration::from_millis(delay_ms), clock.clone());
        (clock, p)
    }

    #[test]
    fn same_host_is_spaced() {
        let (clock, p) = fake(500);
        assert_eq!(p.wait("a.test"), Duration::ZERO);
        let first = clock.now();
        p.wait("a.test");
        assert!(clock.now() - first >= Duration::from_millis(500));
    }

    #[test]
    fn distinct_hosts_are_independent() {
        let (clock, p) = fake(500);
        p.wait("a.test");
        assert_eq!(p.wait("b.test"), Duration::ZERO);
        assert_eq!(clock.now(), Duration::ZERO);
    }

    #[test]
    fn ten_requests_take_nine_gaps() {
        let (clock, p) = fake(100);
        for _ in 0..10 {
            p.wait("a.test");
        }
        assert!(clock.now() >= Duration::from_millis(900));
        assert_eq!(clock.now(), Duration::from_millis(900));
    }

    #[test]
    fn elapsed_time_counts_toward_gap() {
        let (clock, p) = fake(100);
        p.wait("a.test");
        clock.advance(Duration::from_millis(70));
        assert_eq!(p.wait("a.test"), Duration::from_millis(30));
        clock.advance(Duration::from_millis(500));
        assert_eq!(p.wait("a.test"), Duration::ZERO);
    }

    #[test]
    fn concurrent_callers_get_spaced_slots() {
        let clock = Arc::new(SystemClock::default());
        let p = Arc::new(Politeness::new(Duration::from_millis(5), clock));
        let slots = Arc::new(Mutex::new(Vec::new()));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let (p, slots) = (p.clone(), slots.clone());
                s.spawn(move || {
                    for _ in 0..5 {
                        let slot = p.reserve("a.test");
                        p.clock().sleep_until(slot);
                        slots.lock().unwrap().push(slot);
                    }
                });
            }
        });
        let mut slots = slots.lock().unwrap().clone();
        slots.sort();
        assert_eq!(slots.len(), 40);
        for pair in slots.windows(2) {
            assert!(pair[1] - pair[0] >= Duration::from_millis(5));
        }
    }
}
