use num_rational::Ratio;

use crate::{Error, Result};

/// Measurement ratio `(N·L − 1)/(N·L − N)` above which the blind problem has a
/// unique closed-form solution, as an exact rational.
pub fn delta_cf(n: u64, l: u64) -> Result<Ratio<u64>> {
    if n == 0 {
        return Err(Error::Argument("delta_cf needs n >= 1".into()));
    }
    if l < 2 {
        return Err(Error::Argument(format!("delta_cf is undefined for l={l} (needs l >= 2)")));
    }
    Ok(Ratio::new(n * l - 1, n * l - n))
}

/// `ceil(delta_cf(n, l) · n)`: the smallest sensor count for the closed-form solver.
pub fn min_closed_form_sensors(n: u64, l: u64) -> Result<u64> {
    Ok((delta_cf(n, l)? * Ratio::from_integer(n)).ceil().to_integer())
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
