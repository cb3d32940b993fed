use crate::{Error, Result};

/// Expands one value per day into 24 hourly values. A missing day repeats
/// the most recent observed day; days before the first observation take
/// the first observed value.
pub fn fill_daily(days: &[Option<f64>]) -> Result<Vec<f64>> {
    let first = days
        .iter()
        .flatten()
        .next()
        .copied()
        .ok_or_else(|| Error::Degenerate("daily series has no observed day".into()))?;
    let mut last = first;
    let mut out = Vec::with_capacity(days.len() * 24);
    for d in days {
        if let Some(v) = d {
            last = *v;
        }
        out.extend(std::iter::repeat_n(last, 24));
    }
    Ok(out)
}
