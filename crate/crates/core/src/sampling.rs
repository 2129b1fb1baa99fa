//! Stopping-time sampling: draw Bernoulli outcomes until the τ-th success.

use crate::error::{domain, AuditError, Result};

/// Index (1-based) of the `tau`-th success in `outcomes`. `tau / N` is then
/// the plug-in estimate of the success probability.
pub fn sample_until_tau_successes<I>(outcomes: I, tau: usize) -> Result<usize>
where
    I: IntoIterator<Item = bool>,
{
    if tau == 0 {
        return domain("tau must be at least 1");
    }
    let mut successes = 0;
    let mut consumed = 0;
    for outcome in outcomes {
        consumed += 1;
        if outcome {
            successes += 1;
            if successes == tau {
                return Ok(consumed);
            }
        }
    }
    Err(AuditError::StreamExhausted {
        consumed,
        successes,
        tau,
    })
}

/// Plug-in estimate `τ / N`.
pub fn stopping_time_estimate(tau: usize, n: usize) -> f64 {
    tau as f64 / n as f64
}
