use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Default post-keyframe window length.
pub const DEFAULT_M: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Frames `t_k ..= t_k + m` (clipped before `t_{k+1}`) target `t_{k+1}`,
    /// plus frame 0 targeting `t_1`.
    PostKeyframe { m: usize },
    /// Every `n`-th frame of each segment, for ablations.
    EveryN { n: usize },
    /// `m` frames on both sides of each keyframe, for ablations.
    SymmetricWindow { m: usize },
}

impl Default for SamplingStrategy {
    fn default() -> Self {
        SamplingStrategy::PostKeyframe { m: DEFAULT_M }
    }
}

/// `(observation index, target keyframe index)` pairs, sorted by
/// observation. Every observation precedes its target.
pub fn sample_training_indices(keyframes: &[usize], strategy: SamplingStrategy) -> Vec<(usize, usize)> {
    let Some(&first) = keyframes.first() else {
        return Vec::new();
    };
    let mut out: BTreeMap<usize, usize> = BTreeMap::new();
    match strategy {
        SamplingStrategy::PostKeyframe { m } => {
            if first > 0 {
                out.insert(0, first);
            }
            for w in keyframes.windows(2) {
                let (tk, next) = (w[0], w[1]);
                for t in tk..=(tk + m).min(next - 1) {
                    out.insert(t, next);
                }
            }
        }
        SamplingStrategy::EveryN { n } => {
            let n = n.max(1);
            let mut start = 0;
            for &k in keyframes {
                for t in (start..k).step_by(n) {
                    out.insert(t, k);
                }
                start = k;
            }
        }
        SamplingStrategy::SymmetricWindow { m } => {
            if first > 0 {
                out.insert(0, first);
            }
            let mut prev = 0;
            for (i, &tk) in keyframes.iter().enumerate() {
                for t in tk.saturating_sub(m).max(prev)..tk {
                    out.insert(t, tk);
                }
                if let Some(&next) = keyframes.get(i + 1) {
                    for t in tk..=(tk + m).min(next - 1) {
                        out.insert(t, next);
                    }
                }
                prev = tk;
            }
        }
    }
    out.into_iter().collect()
}
