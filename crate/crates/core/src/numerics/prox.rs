use crate::{Error, Result, C64};

/// Entrywise complex soft-thresholding: `u ↦ u · max(1 − κ/|u|, 0)`.
///
/// This is the proximal operator of `κ|·|` applied to every entry.
pub fn complex_soft_threshold(values: &[C64], kappa: f64) -> Result<Vec<C64>> {
    let mut out = values.to_vec();
    soft_threshold_in_place(&mut out, kappa)?;
    Ok(out)
}

pub fn soft_threshold_in_place(values: &mut [C64], kappa: f64) -> Result<()> {
    if !(kappa >= 0.0) {
        return Err(Error::Argument(format!("threshold must be non-negative, got {kappa}")));
    }
    values.iter_mut().for_each(|u| *u = shrink(*u, kappa));
    Ok(())
}

#[inline]
pub(crate) fn shrink(u: C64, kappa: f64) -> C64 {
    let m = u.norm();
    if m <= kappa {
        C64::new(0.0, 0.0)
    } else {
        u * (1.0 - kappa / m)
    }
}
