use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::special::log_add;

/// A non-negative real stored as its natural logarithm.
///
/// Zero is represented by a logarithm of `-inf`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct LogReal {
    ln: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal {
        ln: f64::NEG_INFINITY,
    };
    pub const ONE: LogReal = LogReal { ln: 0.0 };

    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan());
        LogReal { ln }
    }

    /// Panics on negative or NaN input.
    pub fn from_value(x: f64) -> Self {
        assert!(x >= 0.0, "LogReal::from_value({x})");
        LogReal { ln: x.ln() }
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    pub fn log10(self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn powi(self, k: i32) -> Self {
        if self.is_zero() {
            if k == 0 {
                LogReal::ONE
            } else {
                LogReal::ZERO
            }
        } else {
            LogReal {
                ln: self.ln * k as f64,
            }
        }
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        LogReal {
            ln: log_add(self.ln, rhs.ln),
        }
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        if self.is_zero() || rhs.is_zero() {
            LogReal::ZERO
        } else {
            LogReal {
                ln: self.ln + rhs.ln,
            }
        }
    }
}

impl Sum for LogReal {
    fn sum<I: Iterator<Item = LogReal>>(iter: I) -> LogReal {
        let lns: Vec<f64> = iter.map(|v| v.ln).collect();
        LogReal {
            ln: crate::special::log_sum_exp(&lns),
        }
    }
}

impl fmt::Debug for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "LogReal(0)")
        } else {
            write!(f, "LogReal(exp {})", self.ln)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LogRealRepr {
    log_magnitude: Option<f64>,
    is_zero: bool,
}

impl Serialize for LogReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LogRealRepr {
            log_magnitude: (!self.is_zero()).then_some(self.ln),
            is_zero: self.is_zero(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LogReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = LogRealRepr::deserialize(d)?;
        match (repr.is_zero, repr.log_magnitude) {
            (true, _) => Ok(LogReal::ZERO),
            (false, Some(ln)) if !ln.is_nan() => Ok(LogReal::from_ln(ln)),
            _ => Err(serde::de::Error::custom(
                "non-zero LogReal needs a finite log_magnitude",
            )),
        }
    }
}
