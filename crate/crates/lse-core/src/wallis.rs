//! Wallis factors: the mean of |v_1| for v uniform on the unit sphere of
//! R^q. They calibrate the small-sample statistical condition estimator.

use crate::error::{LseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallisMode {
    /// The product formulas: w_1 = 1, w_2 = 2/pi,
    /// odd q: 1*3*...*(q-2) / (2*4*...*(q-1)),
    /// even q: (2/pi) * 2*4*...*(q-2) / (3*5*...*(q-1)).
    Exact,
    /// sqrt(2 / (pi (q - 1/2))).
    Approx,
}

/// Wallis factor of order q >= 1.
pub fn wallis(q: usize, mode: WallisMode) -> Result<f64> {
    if q == 0 {
        return Err(LseError::Domain("Wallis factor needs q >= 1".into()));
    }
    match mode {
        WallisMode::Approx => Ok((2.0 / (std::f64::consts::PI * (q as f64 - 0.5))).sqrt()),
        WallisMode::Exact => Ok(match q {
            1 => 1.0,
            2 => 2.0 / std::f64::consts::PI,
            q if q % 2 == 1 => {
                // ratios (k-2)/(k-1) for k = 3, 5, ..., q
                let mut w = 1.0;
                let mut k = 3;
                while k <= q {
                    w *= (k - 2) as f64 / (k - 1) as f64;
                    k += 2;
                }
                w
            }
            q => {
                let mut w = 2.0 / std::f64::consts::PI;
                let mut k = 4;
                while k <= q {
                    w *= (k - 2) as f64 / (k - 1) as f64;
                    k += 2;
                }
                w
            }
        }),
    }
}
