use serde::Serialize;

/// Slack below which a certificate counts as violated.
pub const SLACK_TOL: f64 = -1e-8;

/// One checked inequality `lhs <= rhs`.
///
/// `slack` is `(rhs - lhs) / max(1, |rhs|)`, so it is absolute for small
/// quantities and relative for large ones.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Certificate {
    pub lemma: String,
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
}

impl Certificate {
    pub fn le(lemma: &str, label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let slack = (rhs - lhs) / rhs.abs().max(1.0);
        let slack = if slack.is_nan() {
            f64::NEG_INFINITY
        } else {
            slack
        };
        Self {
            lemma: lemma.to_string(),
            label: label.into(),
            lhs,
            rhs,
            slack,
            satisfied: slack >= SLACK_TOL,
        }
    }

    /// Equality check `|lhs - rhs| <= tol * max(1, |rhs|)` recorded as a certificate.
    pub fn close(lemma: &str, label: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let dev = (lhs - rhs).abs() / rhs.abs().max(1.0);
        let slack = if dev.is_nan() {
            f64::NEG_INFINITY
        } else {
            tol - dev
        };
        Self {
            lemma: lemma.to_string(),
            label: label.into(),
            lhs,
            rhs,
            slack,
            satisfied: slack >= 0.0,
        }
    }
}

/// The certificate with the smallest slack among `lhs_rhs(i)` for `i < n`.
///
/// Labels are only built for the reported index.
pub(crate) fn worst_of(
    lemma: &str,
    n: usize,
    lhs_rhs: impl Fn(usize) -> (f64, f64),
    label: impl Fn(usize) -> String,
) -> Option<Certificate> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        let (l, r) = lhs_rhs(i);
        let slack = (r - l) / r.abs().max(1.0);
        let slack = if slack.is_nan() {
            f64::NEG_INFINITY
        } else {
            slack
        };
        if best.is_none_or(|(_, b)| slack < b) {
            best = Some((i, slack));
        }
    }
    best.map(|(i, _)| {
        let (l, r) = lhs_rhs(i);
        Certificate::le(lemma, label(i), l, r)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_scaling() {
        let c = Certificate::le("X", "a", 1.0, 1.0);
        assert!(c.satisfied && c.slack == 0.0);
        let c = Certificate::le("X", "a", 101.0, 100.0);
        assert!(!c.satisfied);
        assert!((c.slack + 0.01).abs() < 1e-15);
        let c = Certificate::le("X", "a", f64::NAN, 1.0);
        assert!(!c.satisfied);
        let c = Certificate::close("X", "a", 1.0 + 1e-9, 1.0, 1e-8);
        assert!(c.satisfied);
    }

    #[test]
    fn worst_keeps_minimum() {
        let lhs = [0.0, 0.5, 0.1];
        let w = worst_of("X", 3, |i| (lhs[i], 1.0), |i| format!("{i}")).unwrap();
        assert_eq!(w.label, "1");
        assert!(worst_of("X", 0, |_| (0.0, 0.0), |_| String::new()).is_none());
    }
}
