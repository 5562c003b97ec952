use serde::{Deserialize, Serialize};

use super::VideoError;

/// Where inside each of the N equal-length segments a frame is taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingAnchor {
    /// `floor(i*T/N)`: the first frame of each segment.
    #[default]
    Start,
    /// `floor((2i+1)*T/(2N))`: the middle frame of each segment.
    Center,
}

impl std::str::FromStr for SamplingAnchor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "start" => Ok(Self::Start),
            "center" => Ok(Self::Center),
            other => Err(format!("unknown sampling anchor {other:?} (expected start or center)")),
        }
    }
}

/// N indices spread uniformly over `0..total`, start-anchored.
///
/// When `total < n` frames repeat. Integer arithmetic in u128 keeps the
/// result exact for any `usize` inputs.
pub fn uniform_indices(total: usize, n: usize) -> Result<Vec<usize>, VideoError> {
    sample_indices(total, n, SamplingAnchor::Start)
}

pub fn sample_indices(total: usize, n: usize, anchor: SamplingAnchor) -> Result<Vec<usize>, VideoError> {
    if total == 0 || n == 0 {
        return Err(VideoError::Domain { total, n });
    }
    let (t, n128) = (total as u128, n as u128);
    Ok((0..n128)
        .map(|i| match anchor {
            SamplingAnchor::Start => (i * t / n128) as usize,
            SamplingAnchor::Center => ((2 * i + 1) * t / (2 * n128)) as usize,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        assert_eq!(uniform_indices(32, 16).unwrap(), (0..32).step_by(2).collect::<Vec<_>>());
        assert_eq!(uniform_indices(1, 4).unwrap(), [0, 0, 0, 0]);
        assert_eq!(uniform_indices(16, 16).unwrap(), (0..16).collect::<Vec<_>>());
        assert_eq!(sample_indices(32, 16, SamplingAnchor::Center).unwrap(), (1..32).step_by(2).collect::<Vec<_>>());
    }

    #[test]
    fn zero_is_a_domain_error() {
        assert!(matches!(uniform_indices(0, 4), Err(VideoError::Domain { total: 0, n: 4 })));
        assert!(matches!(uniform_indices(4, 0), Err(VideoError::Domain { total: 4, n: 0 })));
    }

    proptest! {
        #[test]
        fn center_indices_stay_in_range(t in 1usize..5000, n in 1usize..300) {
            let idx = sample_indices(t, n, SamplingAnchor::Center).unwrap();
            prop_assert_eq!(idx.len(), n);
            prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(idx.iter().all(|&i| i < t));
        }

        #[test]
        fn huge_inputs_do_not_overflow(t in (usize::MAX / 2)..usize::MAX, n in 1usize..64) {
            let idx = uniform_indices(t, n).unwrap();
            prop_assert!(idx.iter().all(|&i| i < t));
        }
    }
}
