//! Success rate, travel distance and search time over a set of episodes.

use serde::{Deserialize, Serialize};

use crate::episode::EpisodeRecord;

const Z95: f64 = 1.96;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
    /// 95% normal-approximation half-width.
    pub sr_ci: f64,
    /// Mean traveled distance over successful episodes.
    pub mtd: Option<f64>,
    pub mtd_ci: Option<f64>,
    /// Mean wall time (s) over successful episodes.
    pub st: Option<f64>,
    pub st_ci: Option<f64>,
    pub mean_steps: f64,
    pub mean_final_error: f64,
}

fn mean_and_ci(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), Some(0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(Z95 * (var / n).sqrt()))
}

/// Summarizes `records`. Panics on an empty slice.
pub fn aggregate_metrics(records: &[EpisodeRecord]) -> MetricsSummary {
    assert!(!records.is_empty(), "aggregate_metrics needs at least one record");
    let n = records.len() as f64;
    let wins: Vec<&EpisodeRecord> = records.iter().filter(|r| r.success).collect();
    let sr = wins.len() as f64 / n;
    let dist: Vec<f64> = wins.iter().map(|r| r.traveled_distance).collect();
    let time: Vec<f64> = wins.iter().map(|r| r.wall_time).collect();
    let (mtd, mtd_ci) = mean_and_ci(&dist);
    let (st, st_ci) = mean_and_ci(&time);
    MetricsSummary {
        episodes: records.len(),
        successes: wins.len(),
        sr,
        sr_ci: Z95 * (sr * (1.0 - sr) / n).sqrt(),
        mtd,
        mtd_ci,
        st,
        st_ci,
        mean_steps: records.iter().map(|r| r.steps as f64).sum::<f64>() / n,
        mean_final_error: records.iter().map(|r| r.final_estimate_error).sum::<f64>() / n,
    }
}
