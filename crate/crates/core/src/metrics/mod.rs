//! Automatic evaluation: ROUGE, frame vocabularies, framing-word overlap
//! and the harmonic-mean balance score.

mod overlap;
mod rouge;
mod vocab;

pub use overlap::{framing_overlap, overlap_counts, pooled_overlap, render_overlap_cell};
pub use rouge::{
    lcs_len, rouge_l, rouge_n, rouge_tokens, strip_entities, RougeScore, RougeVariant,
};
pub use vocab::{build_frame_vocabulary, Aggregation, FrameVocabulary, VocabularyCorpus};

use crate::error::{Error, Result};

/// `2ab / (a + b)`, zero when both are zero.
pub fn harmonic_mean(a: f64, b: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 || a.is_nan() || b.is_nan() {
        return Err(Error::NegativeScore(a, b));
    }
    if a + b == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * a * b / (a + b))
}

/// Rounds half away from zero at `decimals` places. A relative nudge keeps
/// values such as 0.305 printed in decimal from falling below the midpoint.
pub fn round_half_up(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let v = x * scale;
    (v + v.signum() * 1e-9 * v.abs().max(1.0)).round() / scale
}

/// Fixed two-decimal rendering with half-up rounding.
pub fn fmt2(x: f64) -> String {
    format!("{:.2}", round_half_up(x, 2))
}
