use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ErrorState;
use crate::sign::Sign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierThresholds {
    /// mm
    pub t_x: f64,
    /// degrees
    pub t_theta: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        ClassifierThresholds {
            t_x: 2.5,
            t_theta: 5.0,
        }
    }
}

impl ClassifierThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_x > 0.0 && self.t_theta > 0.0 && self.t_x.is_finite() && self.t_theta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must be positive, got T_x = {}, T_theta = {}",
                self.t_x, self.t_theta
            )));
        }
        Ok(())
    }
}

/// The eight error regions around the feasible box, plus the box itself.
///
/// ```text
///          -x      0      +x
///   +θ      3      8      5
///    0      1   NoError   2
///   -θ      4      7      6
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DirectionClass {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    NoError,
}

pub const NUM_CLASSES: usize = 9;

impl DirectionClass {
    pub const ALL: [DirectionClass; NUM_CLASSES] = [
        DirectionClass::C1,
        DirectionClass::C2,
        DirectionClass::C3,
        DirectionClass::C4,
        DirectionClass::C5,
        DirectionClass::C6,
        DirectionClass::C7,
        DirectionClass::C8,
        DirectionClass::NoError,
    ];

    /// Dense index; `NoError` is last.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<DirectionClass> {
        Self::ALL.get(i).copied()
    }

    /// Region number 1..8, and 0 for `NoError`.
    pub fn number(self) -> u8 {
        match self {
            DirectionClass::NoError => 0,
            c => c.index() as u8 + 1,
        }
    }

    pub fn from_number(n: u8) -> Option<DirectionClass> {
        match n {
            0 => Some(DirectionClass::NoError),
            1..=8 => Self::from_index(n as usize - 1),
            _ => None,
        }
    }

    pub fn signs(self) -> SignPair {
        class_to_signs(self)
    }
}

impl std::fmt::Display for DirectionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DirectionClass::NoError => f.write_str("none"),
            c => write!(f, "{}", c.number()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPair {
    pub s_x: Sign,
    pub s_theta: Sign,
}

impl SignPair {
    pub const fn new(s_x: Sign, s_theta: Sign) -> Self {
        SignPair { s_x, s_theta }
    }
}

pub fn class_to_signs(c: DirectionClass) -> SignPair {
    use DirectionClass::*;
    use Sign::*;
    let (x, t) = match c {
        C1 => (Neg, Zero),
        C2 => (Pos, Zero),
        C3 => (Neg, Pos),
        C4 => (Neg, Neg),
        C5 => (Pos, Pos),
        C6 => (Pos, Neg),
        C7 => (Zero, Neg),
        C8 => (Zero, Pos),
        NoError => (Zero, Zero),
    };
    SignPair::new(x, t)
}

pub fn signs_to_class(s: SignPair) -> DirectionClass {
    use DirectionClass::*;
    use Sign::*;
    match (s.s_x, s.s_theta) {
        (Neg, Zero) => C1,
        (Pos, Zero) => C2,
        (Neg, Pos) => C3,
        (Neg, Neg) => C4,
        (Pos, Pos) => C5,
        (Pos, Neg) => C6,
        (Zero, Neg) => C7,
        (Zero, Pos) => C8,
        (Zero, Zero) => NoError,
    }
}

fn thresholded(v: f64, t: f64) -> Sign {
    if v.abs() > t {
        Sign::of(v)
    } else {
        Sign::Zero
    }
}

pub fn classify_direction_truth(error: ErrorState, thr: &ClassifierThresholds) -> DirectionClass {
    signs_to_class(SignPair::new(
        thresholded(error.dx, thr.t_x),
        thresholded(error.dtheta, thr.t_theta),
    ))
}

/// Training label for a blocked contact.
///
/// Identical to [`classify_direction_truth`] outside the feasible box. Inside
/// it (a contact can still happen there, e.g. a rectangle at 4°) the sign of
/// the larger threshold-normalized component is used, ties going to x. The
/// flag is set when this fallback was taken. Only an exact `(0, 0)` stays
/// `NoError`.
pub fn label_blocked(error: ErrorState, thr: &ClassifierThresholds) -> (DirectionClass, bool) {
    let truth = classify_direction_truth(error, thr);
    if truth != DirectionClass::NoError {
        return (truth, false);
    }
    let nx = error.dx.abs() / thr.t_x;
    let nt = error.dtheta.abs() / thr.t_theta;
    let signs = if nx == 0.0 && nt == 0.0 {
        return (DirectionClass::NoError, false);
    } else if nx >= nt {
        SignPair::new(Sign::of(error.dx), Sign::Zero)
    } else {
        SignPair::new(Sign::Zero, Sign::of(error.dtheta))
    };
    (signs_to_class(signs), true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_examples() {
        let thr = ClassifierThresholds::default();
        assert_eq!(classify_direction_truth(ErrorState::new(-10.0, 10.0), &thr), DirectionClass::C3);
        assert_eq!(classify_direction_truth(ErrorState::new(0.0, 0.0), &thr), DirectionClass::NoError);
        assert_eq!(classify_direction_truth(ErrorState::new(6.0, -1.0), &thr), DirectionClass::C2);
        // Threshold itself is not beyond it.
        assert_eq!(classify_direction_truth(ErrorState::new(2.5, 5.0), &thr), DirectionClass::NoError);
    }

    #[test]
    fn class_three_signs() {
        assert_eq!(class_to_signs(DirectionClass::C3), SignPair::new(Sign::Neg, Sign::Pos));
        assert_eq!(class_to_signs(DirectionClass::NoError), SignPair::new(Sign::Zero, Sign::Zero));
    }

    #[test]
    fn numbers_round_trip() {
        for c in DirectionClass::ALL {
            assert_eq!(DirectionClass::from_number(c.number()), Some(c));
            assert_eq!(DirectionClass::from_index(c.index()), Some(c));
        }
        assert_eq!(DirectionClass::C7.number(), 7);
        assert_eq!(DirectionClass::from_number(9), None);
    }

    #[test]
    fn blocked_labels_fall_back_to_dominant_axis() {
        let thr = ClassifierThresholds::default();
        assert_eq!(label_blocked(ErrorState::new(0.5, 4.0), &thr), (DirectionClass::C8, true));
        assert_eq!(label_blocked(ErrorState::new(-2.0, 1.0), &thr), (DirectionClass::C1, true));
        assert_eq!(label_blocked(ErrorState::new(1.0, -2.0), &thr), (DirectionClass::C2, true));
        assert_eq!(label_blocked(ErrorState::new(-9.0, 1.0), &thr), (DirectionClass::C1, false));
        assert_eq!(label_blocked(ErrorState::new(0.0, 0.0), &thr), (DirectionClass::NoError, false));
    }
}
