//! Worker-pool configuration.

use std::sync::Once;

static INIT: Once = Once::new();

/// Caps the global worker pool at `MATCHMARKET_THREADS` if the variable is
/// set to a positive integer. Call once at startup; later calls are no-ops,
/// as is an unset or unparseable variable.
pub fn configure_threads_from_env() {
    INIT.call_once(|| {
        if let Some(n) = std::env::var("MATCHMARKET_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    });
}
