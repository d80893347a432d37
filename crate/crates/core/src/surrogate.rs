//! The clipped importance-ratio objective shared by every trainer.

/// `min(r * A, clip(r, 1 - eps, 1 + eps) * A)` at one sample, with its
/// derivative in `log r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedTerm {
    pub value: f64,
    /// Derivative of `value` with respect to the log-ratio: `r * A` when the
    /// unclipped branch is selected, zero otherwise.
    pub d_log_ratio: f64,
    /// The clipped branch is strictly smaller, so the sample passes no gradient.
    pub clipped: bool,
}

pub fn clipped_objective(log_ratio: f64, advantage: f64, epsilon: f64) -> ClippedTerm {
    let ratio = log_ratio.exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    if unclipped <= clipped {
        ClippedTerm {
            value: unclipped,
            d_log_ratio: unclipped,
            clipped: false,
        }
    } else {
        ClippedTerm {
            value: clipped,
            d_log_ratio: 0.0,
            clipped: true,
        }
    }
}
