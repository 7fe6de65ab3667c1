//! Versioned JSON formats for series.
//!
//! `twisted-series/1`: `{"format", "theta", "half_width", "coeffs"}` with
//! `coeffs` a list of `[m, n, re, im]` sorted by `(m, n)`; zero coefficients
//! are omitted. θ is written reduced into `[0, 1)`, so `θ` and `θ + 1`
//! serialize identically.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::twisted::{reduce_theta, TwistedSeries};

pub const SERIES_FORMAT: &str = "twisted-series/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesFile {
    pub format: String,
    pub theta: f64,
    pub half_width: usize,
    pub coeffs: Vec<(i64, i64, f64, f64)>,
}

impl From<&TwistedSeries> for SeriesFile {
    fn from(a: &TwistedSeries) -> Self {
        // iteration order is row-major in (m, n), i.e. already lexicographic
        let coeffs = a
            .nonzero()
            .map(|(m, n, c)| (m, n, c.re, c.im))
            .collect();
        Self {
            format: SERIES_FORMAT.to_string(),
            theta: reduce_theta(a.theta()),
            half_width: a.half_width(),
            coeffs,
        }
    }
}

impl TryFrom<SeriesFile> for TwistedSeries {
    type Error = Error;

    fn try_from(f: SeriesFile) -> Result<Self> {
        if f.format != SERIES_FORMAT {
            return Err(Error::Format(format!(
                "expected format {SERIES_FORMAT:?}, found {:?}",
                f.format
            )));
        }
        if !f.theta.is_finite() {
            return Err(Error::Format("theta must be finite".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(m, n, _, _) in &f.coeffs {
            if !seen.insert((m, n)) {
                return Err(Error::Format(format!("duplicate coefficient ({m}, {n})")));
            }
        }
        TwistedSeries::from_entries(
            f.theta,
            f.half_width,
            f.coeffs.into_iter().map(|(m, n, re, im)| (m, n, C64::new(re, im))),
        )
    }
}

pub fn series_to_json(a: &TwistedSeries) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SeriesFile::from(a))?)
}

pub fn series_from_json(text: &str) -> Result<TwistedSeries> {
    let file: SeriesFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("twisted-series JSON: {e}")))?;
    file.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let a = TwistedSeries::from_fn(0.37, 3, |m, n| {
            if (m + n) % 2 == 0 {
                C64::new(0.1 * m as f64 + 1.0 / 3.0, -0.7 * n as f64 + 1e-17)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let text = series_to_json(&a).unwrap();
        let b = series_from_json(&text).unwrap();
        assert_eq!(a.max_abs_diff(&b), 0.0);
        assert_eq!(b.half_width(), 3);
    }

    #[test]
    fn sorted_and_sparse() {
        let mut a = TwistedSeries::zeros(0.2, 2);
        a.set(1, -1, C64::new(1.0, 0.0));
        a.set(-2, 2, C64::new(0.0, 2.0));
        a.set(1, -2, C64::new(3.0, 0.0));
        let f = SeriesFile::from(&a);
        let keys: Vec<_> = f.coeffs.iter().map(|c| (c.0, c.1)).collect();
        assert_eq!(keys, vec![(-2, 2), (1, -2), (1, -1)]);
    }

    #[test]
    fn theta_shift_serializes_identically() {
        let a = TwistedSeries::monomial(0.37, 2, 1, 1, C64::new(0.5, 0.25));
        let b = a.with_theta(1.37);
        assert_eq!(series_to_json(&a).unwrap(), series_to_json(&b).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(series_from_json("{").is_err());
        assert!(series_from_json(r#"{"format":"x","theta":0.1,"half_width":1,"coeffs":[]}"#).is_err());
        let outside = r#"{"format":"twisted-series/1","theta":0.1,"half_width":1,"coeffs":[[2,0,1.0,0.0]]}"#;
        assert!(series_from_json(outside).is_err());
        let dup = r#"{"format":"twisted-series/1","theta":0.1,"half_width":1,"coeffs":[[0,0,1.0,0.0],[0,0,1.0,0.0]]}"#;
        assert!(series_from_json(dup).is_err());
    }
}
