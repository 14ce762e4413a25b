use crate::error::{Error, Result};

/// Piecewise-linear interpolation of `(ts_src, vals)` at `ts_query`.
///
/// Queries outside the source span take the nearest boundary value.
pub fn linear_interp(ts_src: &[f64], vals: &[f64], ts_query: &[f64]) -> Result<Vec<f64>> {
    if ts_src.len() != vals.len() {
        return Err(Error::InvalidLength(format!(
            "{} timestamps for {} values",
            ts_src.len(),
            vals.len()
        )));
    }
    if ts_src.is_empty() {
        return Err(Error::Empty("no source samples to interpolate".into()));
    }
    if let Some(i) = ts_src.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Ordering(format!(
            "source timestamp {} ({}) is not after {}",
            i + 1,
            ts_src[i + 1],
            ts_src[i]
        )));
    }
    let last = ts_src.len() - 1;
    Ok(ts_query
        .iter()
        .map(|&q| {
            if q <= ts_src[0] {
                return vals[0];
            }
            if q >= ts_src[last] {
                return vals[last];
            }
            // first index with ts > q; q is strictly inside so 1 <= hi <= last
            let hi = ts_src.partition_point(|&t| t <= q);
            let lo = hi - 1;
            let w = (q - ts_src[lo]) / (ts_src[hi] - ts_src[lo]);
            vals[lo] + w * (vals[hi] - vals[lo])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_exact_hits() {
        let ts = [0.0, 1.0];
        let v = [0.0, 10.0];
        assert_eq!(linear_interp(&ts, &v, &[0.5]).unwrap(), vec![5.0]);
        assert_eq!(
            linear_interp(&ts, &v, &[1.0, 0.0]).unwrap(),
            vec![10.0, 0.0]
        );
    }

    #[test]
    fn clamps_outside_range() {
        let out = linear_interp(&[0.0, 1.0], &[0.0, 10.0], &[-1.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 10.0]);
    }

    #[test]
    fn non_monotonic_source_is_rejected() {
        assert!(matches!(
            linear_interp(&[0.0, 1.0, 1.0], &[0.0; 3], &[0.5]),
            Err(Error::Ordering(_))
        ));
    }
}
