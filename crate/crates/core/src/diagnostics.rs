//! Process-wide counters for numerical guard events.

use std::sync::atomic::{AtomicU64, Ordering};

static LOG_CLAMPS: AtomicU64 = AtomicU64::new(0);
static SCORE_CAPS: AtomicU64 = AtomicU64::new(0);

/// Smallest argument passed to `ln` inside objective code.
pub const LOG_FLOOR: f64 = 1e-300;

/// `ln(max(x, LOG_FLOOR))`, counting every time the floor kicks in.
#[inline]
pub(crate) fn guarded_ln(x: f64) -> f64 {
    if x < LOG_FLOOR {
        LOG_CLAMPS.fetch_add(1, Ordering::Relaxed);
        LOG_FLOOR.ln()
    } else {
        x.ln()
    }
}

pub(crate) fn record_score_cap() {
    SCORE_CAPS.fetch_add(1, Ordering::Relaxed);
}

/// How many times a log argument was clamped at [`LOG_FLOOR`].
pub fn log_clamp_events() -> u64 {
    LOG_CLAMPS.load(Ordering::Relaxed)
}

/// How many times a scoring-rule loss hit its cap.
pub fn score_cap_events() -> u64 {
    SCORE_CAPS.load(Ordering::Relaxed)
}
