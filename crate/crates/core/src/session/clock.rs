use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Monotonic time source, read as the offset from an arbitrary origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// A clock that only moves when told to, optionally by a fixed step on every
/// reading.
#[derive(Debug, Default)]
pub struct SimulatedClock {
    now: Mutex<Duration>,
    step: Duration,
}

impl SimulatedClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stepping(step: Duration) -> Self {
        Self {
            now: Mutex::new(Duration::ZERO),
            step,
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap_or_else(|p| p.into_inner()) += by;
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> Duration {
        let mut now = self.now.lock().unwrap_or_else(|p| p.into_inner());
        let reading = *now;
        *now += self.step;
        reading
    }
}
