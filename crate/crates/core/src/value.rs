//! Normalized cell values shared by introspection and execution.

use std::cmp::Ordering;
use std::fmt;

use rusqlite::types::ValueRef;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Relative tolerance used when comparing two reals.
pub const REAL_RELATIVE_TOLERANCE: f64 = 1e-6;

/// One result cell after normalization.
///
/// Reals with an integral value are stored as [`CellValue::Integer`], so `AVG`
/// returning `2.0` and a literal `2` compare equal. Blobs are kept only as a
/// SHA-256 hex digest of their content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum CellValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    BlobDigest(String),
}

impl CellValue {
    /// Build a real cell, collapsing integral values to integers.
    pub fn real(x: f64) -> Self {
        // i64::MAX as f64 rounds up to 2^63, hence the strict upper bound.
        if x.is_finite() && x.fract() == 0.0 && x >= i64::MIN as f64 && x < i64::MAX as f64 {
            CellValue::Integer(x as i64)
        } else {
            CellValue::Real(x)
        }
    }

    pub fn blob(bytes: &[u8]) -> Self {
        CellValue::BlobDigest(hex_digest(bytes))
    }

    pub fn from_sqlite(value: ValueRef<'_>) -> Self {
        match value {
            ValueRef::Null => CellValue::Null,
            ValueRef::Integer(i) => CellValue::Integer(i),
            ValueRef::Real(r) => CellValue::real(r),
            ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => CellValue::blob(b),
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Integer(i) => Some(*i as f64),
            CellValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, CellValue::Integer(_) | CellValue::Real(_))
    }

    /// Equality under EX semantics: integers exact, reals within
    /// [`REAL_RELATIVE_TOLERANCE`], text case-sensitive, blobs by digest.
    pub fn matches(&self, other: &CellValue) -> bool {
        match (self, other) {
            (CellValue::Null, CellValue::Null) => true,
            (CellValue::Integer(a), CellValue::Integer(b)) => a == b,
            (CellValue::Text(a), CellValue::Text(b)) => a == b,
            (CellValue::BlobDigest(a), CellValue::BlobDigest(b)) => a == b,
            (a, b) if a.is_numeric() && b.is_numeric() => {
                reals_close(a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN))
            }
            _ => false,
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            CellValue::Null => 0,
            CellValue::Integer(_) | CellValue::Real(_) => 1,
            CellValue::Text(_) => 2,
            CellValue::BlobDigest(_) => 3,
        }
    }

    /// Total order: NULL < numbers < text < blobs, numbers by value.
    pub fn total_cmp(&self, other: &CellValue) -> Ordering {
        match (self, other) {
            (CellValue::Integer(a), CellValue::Integer(b)) => a.cmp(b),
            (a, b) if a.is_numeric() && b.is_numeric() => a
                .as_f64()
                .unwrap_or(f64::NAN)
                .total_cmp(&b.as_f64().unwrap_or(f64::NAN)),
            (CellValue::Text(a), CellValue::Text(b)) => a.cmp(b),
            (CellValue::BlobDigest(a), CellValue::BlobDigest(b)) => a.cmp(b),
            (a, b) => a.type_rank().cmp(&b.type_rank()),
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Null => f.write_str("NULL"),
            CellValue::Integer(i) => write!(f, "{i}"),
            CellValue::Real(r) => write!(f, "{r}"),
            CellValue::Text(t) => write!(f, "{t}"),
            CellValue::BlobDigest(d) => write!(f, "blob:{d}"),
        }
    }
}

pub fn reals_close(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= REAL_RELATIVE_TOLERANCE * a.abs().max(b.abs())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_reals_collapse() {
        assert_eq!(CellValue::real(2.0), CellValue::Integer(2));
        assert_eq!(CellValue::real(-0.0), CellValue::Integer(0));
        assert_eq!(CellValue::real(2.5), CellValue::Real(2.5));
        assert!(matches!(CellValue::real(f64::NAN), CellValue::Real(_)));
        assert!(matches!(CellValue::real(1e300), CellValue::Real(_)));
    }

    #[test]
    fn relative_tolerance() {
        assert!(CellValue::Real(1.0000001).matches(&CellValue::Integer(1)));
        assert!(!CellValue::Real(1.00001).matches(&CellValue::Integer(1)));
        assert!(CellValue::Real(3.3333333).matches(&CellValue::Real(3.33333334)));
        assert!(!CellValue::Text("a".into()).matches(&CellValue::Text("A".into())));
        assert!(!CellValue::Null.matches(&CellValue::Integer(0)));
        assert!(!CellValue::Text("1".into()).matches(&CellValue::Integer(1)));
    }

    #[test]
    fn ordering_groups_by_type() {
        let mut cells = vec![
            CellValue::Text("b".into()),
            CellValue::Integer(3),
            CellValue::Null,
            CellValue::Real(2.5),
            CellValue::BlobDigest("00".into()),
        ];
        cells.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(
            cells,
            vec![
                CellValue::Null,
                CellValue::Real(2.5),
                CellValue::Integer(3),
                CellValue::Text("b".into()),
                CellValue::BlobDigest("00".into()),
            ]
        );
    }
}
