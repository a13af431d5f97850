use thiserror::Error;

use super::buffer::Sample;

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("fewer than two linearly independent neighbours")]
    RankDeficient,
}

#[inline]
fn independent(a: &Sample, b: &Sample) -> bool {
    (a.dx * b.dy - b.dx * a.dy).abs() >= 1
}

/// Timestamp clustering of neighbours ordered most recent first.
///
/// The first sample not collinear with the most recent one closes the
/// minimal independent pair; its age times `k_s` is the largest gap allowed
/// between consecutive samples after it. Returns the length of the retained
/// prefix.
pub fn cluster_by_timestamp(samples: &[Sample], k_s: f64) -> Result<usize, ClusterError> {
    let first = samples.first().ok_or(ClusterError::RankDeficient)?;
    let pair_end =
        samples.iter().skip(1).position(|s| independent(first, s)).map(|i| i + 1).ok_or(ClusterError::RankDeficient)?;
    let max_gap = -(samples[pair_end].dt as f64) * k_s;
    for m in pair_end + 1..samples.len() {
        let gap = (samples[m - 1].dt - samples[m].dt) as f64;
        if gap > max_gap {
            return Ok(m);
        }
    }
    Ok(samples.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_gap_keeps_everything() {
        let s = [Sample::raw(1, 0, -1_000), Sample::raw(0, 1, -1_200), Sample::raw(1, 1, -1_500)];
        assert_eq!(cluster_by_timestamp(&s, 3.0), Ok(3));
    }

    #[test]
    fn large_gap_truncates() {
        let s = [Sample::raw(1, 0, -1_000), Sample::raw(0, 1, -1_100), Sample::raw(-1, 0, -10_000)];
        assert_eq!(cluster_by_timestamp(&s, 3.0), Ok(2));
    }

    #[test]
    fn gap_inside_the_pair_prefix_is_not_tested() {
        // dependent samples before the pair are kept regardless of spacing
        let s = [Sample::raw(1, 0, -100), Sample::raw(2, 0, -5_000), Sample::raw(0, 1, -5_100), Sample::raw(0, 2, -5_200)];
        assert_eq!(cluster_by_timestamp(&s, 3.0), Ok(4));
    }

    #[test]
    fn collinear_samples_fail() {
        let s = [Sample::raw(1, 0, -10), Sample::raw(-1, 0, -20), Sample::raw(2, 0, -30)];
        assert_eq!(cluster_by_timestamp(&s, 3.0), Err(ClusterError::RankDeficient));
        assert_eq!(cluster_by_timestamp(&[], 3.0), Err(ClusterError::RankDeficient));
    }
}
