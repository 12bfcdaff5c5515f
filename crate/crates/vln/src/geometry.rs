//! Heading and angle arithmetic on the compass convention.
//!
//! Headings are measured in degrees clockwise from north (+y): 0 = north,
//! 90 = east, 180 = south, 270 = west. All public functions normalize their
//! inputs to `[0, 360)` first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

/// The four cardinal render headings stored per viewpoint.
pub const CARDINALS: [u16; 4] = [0, 90, 180, 270];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("heading is not a finite number")]
    NonFiniteHeading,
}

/// Relative direction bucket around the agent's front view.
///
/// Buckets reuse the quadrant windows of heading quantization: Front covers
/// ±45° around the front cardinal, then Right/Back/Left clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Front,
    Right,
    Back,
    Left,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Front => "Front",
            Direction::Right => "Right",
            Direction::Back => "Back",
            Direction::Left => "Left",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalizes an angle in degrees to `[0, 360)`.
pub fn normalize_degrees<S: Scalar>(h: S) -> S {
    let full = lit::<S>(360);
    let mut r = h % full;
    if r < S::zero() {
        r += full;
    }
    // `%` on a tiny negative can round back up to exactly 360.
    if r >= full {
        r = r - full;
    }
    // Canonicalize -0.0.
    r + S::zero()
}

/// Quantizes a heading to the center of the 90° quadrant it falls within.
///
/// `[315, 360) ∪ [0, 45) → 0`, `[45, 135) → 90`, `[135, 225) → 180`,
/// `[225, 315) → 270`. Quadrant boundaries belong to the higher quadrant
/// (half-open intervals), so 45.0 maps to 90.
pub fn quantize_heading<S: Scalar>(h: S) -> Result<u16, GeometryError> {
    if !h.is_finite() {
        return Err(GeometryError::NonFiniteHeading);
    }
    let n = normalize_degrees(h);
    let quadrant = ((n + lit::<S>(45)) / lit::<S>(90)).floor();
    let q = quadrant.to_u64().unwrap_or(0) % 4;
    Ok((q as u16) * 90)
}

/// Buckets an angle relative to the front view into a [`Direction`].
pub fn direction_bucket<S: Scalar>(relative_deg: S) -> Result<Direction, GeometryError> {
    Ok(match quantize_heading(relative_deg)? {
        0 => Direction::Front,
        90 => Direction::Right,
        180 => Direction::Back,
        _ => Direction::Left,
    })
}

/// Signed minimal rotation from `from` to `to`, in `(-180, 180]`.
/// Positive is clockwise.
pub fn signed_turn_degrees<S: Scalar>(from: S, to: S) -> S {
    let delta = normalize_degrees(to - from);
    if delta > lit::<S>(180) {
        delta - lit::<S>(360)
    } else {
        delta
    }
}

/// World-frame heading from one position to another, looking down the z axis.
///
/// Returns degrees clockwise from north (+y). Coincident horizontal
/// positions yield 0.
pub fn heading_between<S: Scalar>(from: [S; 3], to: [S; 3]) -> S {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    if dx == S::zero() && dy == S::zero() {
        return S::zero();
    }
    normalize_degrees(dx.atan2(dy).to_degrees())
}

/// Euclidean distance between two positions.
pub fn euclidean<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_paper_example() {
        // Any heading in [45, 135) maps to the 90° image.
        assert_eq!(quantize_heading(60.0).unwrap(), 90);
        assert_eq!(quantize_heading(45.0).unwrap(), 90);
        assert_eq!(quantize_heading(134.999).unwrap(), 90);
    }

    #[test]
    fn quantize_quadrant_centers_and_wraparound() {
        assert_eq!(quantize_heading(0.0).unwrap(), 0);
        assert_eq!(quantize_heading(359.0).unwrap(), 0);
        assert_eq!(quantize_heading(-10.0).unwrap(), 0);
        assert_eq!(quantize_heading(180.0).unwrap(), 180);
        assert_eq!(quantize_heading(270.0).unwrap(), 270);
        assert_eq!(quantize_heading(315.0).unwrap(), 0);
    }

    #[test]
    fn quantize_rejects_non_finite() {
        assert_eq!(
            quantize_heading(f64::NAN),
            Err(GeometryError::NonFiniteHeading)
        );
        assert_eq!(
            quantize_heading(f64::INFINITY),
            Err(GeometryError::NonFiniteHeading)
        );
    }

    #[test]
    fn quantize_exhaustive_integer_fibers() {
        let mut counts = std::collections::BTreeMap::new();
        for deg in 0..360 {
            let q = quantize_heading(deg as f64).unwrap();
            assert!(CARDINALS.contains(&q));
            *counts.entry(q).or_insert(0usize) += 1;
        }
        for c in CARDINALS {
            assert_eq!(counts[&c], 90, "fiber of {c} must have width 90");
        }
    }

    #[test]
    fn signed_turn_conventions() {
        assert_eq!(signed_turn_degrees(0.0, 90.0), 90.0);
        assert_eq!(signed_turn_degrees(0.0, 270.0), -90.0);
        assert_eq!(signed_turn_degrees(0.0, 180.0), 180.0);
        assert_eq!(signed_turn_degrees(350.0, 10.0), 20.0);
    }

    #[test]
    fn heading_between_compass_axes() {
        let o = [0.0, 0.0, 0.0];
        assert_eq!(heading_between(o, [0.0, 1.0, 0.0]), 0.0);
        assert_eq!(heading_between(o, [1.0, 0.0, 0.0]), 90.0);
        assert_eq!(heading_between(o, [0.0, -1.0, 0.0]), 180.0);
        assert_eq!(heading_between(o, [-1.0, 0.0, 0.0]), 270.0);
    }

    proptest! {
        #[test]
        fn quantize_total_and_idempotent(h in -1e6f64..1e6f64) {
            let q = quantize_heading(h).unwrap();
            prop_assert!(CARDINALS.contains(&q));
            prop_assert_eq!(quantize_heading(q as f64).unwrap(), q);
        }

        #[test]
        fn normalize_range(h in -1e9f64..1e9f64) {
            let n = normalize_degrees(h);
            prop_assert!((0.0..360.0).contains(&n));
        }

        #[test]
        fn signed_turn_is_minimal(a in 0.0f64..360.0, b in 0.0f64..360.0) {
            let t = signed_turn_degrees(a, b);
            prop_assert!(t > -180.0 && t <= 180.0);
            prop_assert!((normalize_degrees(a + t) - normalize_degrees(b)).abs() < 1e-9);
        }
    }
}
