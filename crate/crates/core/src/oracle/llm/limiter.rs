use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Bounds concurrent requests and the number of request starts within any
/// sliding window.
///
/// A request occupies the rate budget from its start until one window after
/// it completes, so the bound also holds for arrival times observed by the
/// server, whatever the network delay.
#[derive(Debug)]
pub struct RequestLimiter {
    max_in_flight: usize,
    rate: Option<(usize, Duration)>,
    state: Mutex<State>,
    freed: Condvar,
}

#[derive(Debug, Default)]
struct State {
    in_flight: usize,
    /// Completion times, oldest first.
    finished: VecDeque<Instant>,
}

/// Held for the duration of one outbound request.
pub struct Permit<'a> {
    limiter: &'a RequestLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut state = self.limiter.state.lock().expect("limiter lock");
        state.in_flight -= 1;
        if self.limiter.rate.is_some() {
            state.finished.push_back(Instant::now());
        }
        self.limiter.freed.notify_all();
    }
}

impl RequestLimiter {
    /// `rate` is `(max starts, window)`; `None` disables rate limiting.
    pub fn new(max_in_flight: usize, rate: Option<(usize, Duration)>) -> Self {
        Self {
            max_in_flight: max_in_flight.max(1),
            rate: rate.map(|(n, w)| (n.max(1), w)),
            state: Mutex::new(State::default()),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut state = self.state.lock().expect("limiter lock");
        loop {
            let now = Instant::now();
            let mut wait = None;
            let mut rate_ok = true;
            if let Some((max, window)) = self.rate {
                while state
                    .finished
                    .front()
                    .is_some_and(|t| now.duration_since(*t) >= window)
                {
                    state.finished.pop_front();
                }
                if state.in_flight + state.finished.len() >= max {
                    rate_ok = false;
                    wait = state
                        .finished
                        .front()
                        .map(|oldest| window - now.duration_since(*oldest));
                }
            }
            if state.in_flight < self.max_in_flight && rate_ok {
                state.in_flight += 1;
                return Permit { limiter: self };
            }
            state = match wait {
                Some(d) => self.freed.wait_timeout(state, d).expect("limiter lock").0,
                None => self.freed.wait(state).expect("limiter lock"),
            };
        }
    }
}
