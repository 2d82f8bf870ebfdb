use serde::{Deserialize, Serialize};

/// Ternary sign used for error directions and contact orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub const ALL: [Sign; 3] = [Sign::Neg, Sign::Zero, Sign::Pos];

    /// Sign of a float; `0.0`, `-0.0` and NaN map to `Zero`.
    pub fn of(value: f64) -> Sign {
        if value > 0.0 {
            Sign::Pos
        } else if value < 0.0 {
            Sign::Neg
        } else {
            Sign::Zero
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Neg => -1.0,
            Sign::Zero => 0.0,
            Sign::Pos => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Neg => -1,
            Sign::Zero => 0,
            Sign::Pos => 1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Zero => Sign::Zero,
            Sign::Pos => Sign::Neg,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Sign::Zero
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        Sign::of(self.as_f64() * rhs.as_f64())
    }
}
