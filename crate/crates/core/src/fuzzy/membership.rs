use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// Piecewise-linear membership function on the unit interval.
///
/// Every shape is stored as a trapezoid `left ≤ peak_start ≤ peak_end ≤ right`.
/// A triangle has `peak_start == peak_end`; a shoulder has its plateau pinned
/// to one end of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    left: f64,
    peak_start: f64,
    peak_end: f64,
    right: f64,
}

impl MembershipFunction {
    pub fn trapezoid(left: f64, peak_start: f64, peak_end: f64, right: f64) -> Result<Self, FuzzyError> {
        let points = [left, peak_start, peak_end, right];
        if points.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
            return Err(FuzzyError::InvalidShape(format!(
                "breakpoints {points:?} must lie in [0, 1]"
            )));
        }
        if !(left <= peak_start && peak_start <= peak_end && peak_end <= right) {
            return Err(FuzzyError::InvalidShape(format!(
                "breakpoints {points:?} must be non-decreasing"
            )));
        }
        Ok(Self { left, peak_start, peak_end, right })
    }

    pub fn triangle(left: f64, peak: f64, right: f64) -> Result<Self, FuzzyError> {
        Self::trapezoid(left, peak, peak, right)
    }

    /// Full membership on `[0, peak_end]`, falling to zero at `right`.
    pub fn left_shoulder(peak_end: f64, right: f64) -> Result<Self, FuzzyError> {
        Self::trapezoid(0.0, 0.0, peak_end, right)
    }

    /// Rising from `left`, full membership on `[peak_start, 1]`.
    pub fn right_shoulder(left: f64, peak_start: f64) -> Result<Self, FuzzyError> {
        Self::trapezoid(left, peak_start, 1.0, 1.0)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    /// Plateau where the function equals one.
    pub fn peak(&self) -> (f64, f64) {
        (self.peak_start, self.peak_end)
    }

    /// Representative point of the plateau, used as the label prototype.
    pub fn prototype(&self) -> f64 {
        0.5 * (self.peak_start + self.peak_end)
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        [self.left, self.peak_start, self.peak_end, self.right]
    }

    /// Degree of membership at `x`.
    pub fn degree(&self, x: f64) -> Result<f64, FuzzyError> {
        check_domain(x)?;
        Ok(self.eval(x))
    }

    /// Unchecked evaluation; callers guarantee `x` is in the domain.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        if x >= self.peak_start && x <= self.peak_end {
            1.0
        } else if x < self.left || x > self.right {
            0.0
        } else if x < self.peak_start {
            (x - self.left) / (self.peak_start - self.left)
        } else {
            (self.right - x) / (self.right - self.peak_end)
        }
    }

    /// Smallest and largest `x` with membership at least `height` (`0 < height ≤ 1`).
    pub(crate) fn alpha_cut(&self, height: f64) -> (f64, f64) {
        let lo = self.left + height * (self.peak_start - self.left);
        let hi = self.right - height * (self.right - self.peak_end);
        (lo, hi)
    }
}

/// Evaluates `mf` at `x`, rejecting inputs outside `[0, 1]`.
pub fn membership(mf: &MembershipFunction, x: f64) -> Result<f64, FuzzyError> {
    mf.degree(x)
}

pub(crate) fn check_domain(x: f64) -> Result<(), FuzzyError> {
    if x.is_finite() && (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(FuzzyError::Domain(x))
    }
}
