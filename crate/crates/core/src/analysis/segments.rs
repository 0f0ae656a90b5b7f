use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::FeatureMatrix;

/// A labelled time span within one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub label: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

/// Features of one labelled segment, averaged over its frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentToken {
    pub label: String,
    pub feature_vector: Vec<f64>,
    pub source_id: String,
}

/// Averages the frames whose start time falls in `[start_ms, end_ms)` for
/// each interval. Intervals that select no frame are skipped and reported in
/// the returned diagnostics.
pub fn average_segment_features(features: &FeatureMatrix, intervals: &[Interval]) -> (Vec<SegmentToken>, Vec<String>) {
    let mut tokens = Vec::new();
    let mut diagnostics = Vec::new();
    let dims = features.num_dims();
    for iv in intervals {
        if !(iv.start_ms < iv.end_ms) {
            diagnostics.push(format!(
                "{}: interval {} [{}, {}) is empty or reversed",
                features.source_id, iv.label, iv.start_ms, iv.end_ms
            ));
            continue;
        }
        let mut sum = alloc::vec![0.0; dims];
        let mut count = 0usize;
        for i in 0..features.num_frames() {
            let t = features.frame_time_ms(i);
            if t >= iv.end_ms {
                break;
            }
            if t >= iv.start_ms {
                for (s, &v) in sum.iter_mut().zip(features.frame(i)) {
                    *s += f64::from(v);
                }
                count += 1;
            }
        }
        if count == 0 {
            diagnostics.push(format!(
                "{}: interval {} [{}, {}) covers no frames",
                features.source_id, iv.label, iv.start_ms, iv.end_ms
            ));
            continue;
        }
        sum.iter_mut().for_each(|s| *s /= count as f64);
        tokens.push(SegmentToken {
            label: iv.label.clone(),
            feature_vector: sum,
            source_id: features.source_id.clone(),
        });
    }
    (tokens, diagnostics)
}
