use serde::{Deserialize, Serialize};

use super::membership::{check_domain, MembershipFunction};
use super::FuzzyError;

const PARTITION_TOLERANCE: f64 = 1e-9;

/// A named crisp domain `[0, 1]` partitioned into ordered labeled fuzzy sets.
///
/// Labels are ordered from the one anchored at `0` to the one anchored at `1`.
/// For the input criteria that is worst-to-best; for the assistance output it is
/// least-to-most severe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    name: String,
    labels: Vec<(String, MembershipFunction)>,
}

impl LinguisticVariable {
    /// Builds a variable from explicit membership functions and checks that
    /// they form a partition of unity over `[0, 1]`.
    pub fn new(
        name: impl Into<String>,
        labels: Vec<(String, MembershipFunction)>,
    ) -> Result<Self, FuzzyError> {
        let name = name.into();
        let invalid = |msg: String| FuzzyError::InvalidVariable { variable: name.clone(), message: msg };

        if labels.len() < 2 {
            return Err(invalid("at least two labels are required".into()));
        }
        for (i, (label, _)) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(invalid("label names must be non-empty".into()));
            }
            if labels[..i].iter().any(|(other, _)| other == label) {
                return Err(invalid(format!("duplicate label {label:?}")));
            }
        }
        if labels[0].1.eval(0.0) != 1.0 {
            return Err(invalid(format!("first label {:?} must have membership 1 at 0", labels[0].0)));
        }
        let last = labels.last().expect("length checked above");
        if last.1.eval(1.0) != 1.0 {
            return Err(invalid(format!("last label {:?} must have membership 1 at 1", last.0)));
        }

        let var = Self { name, labels };
        // The sum of piecewise-linear functions is linear between the union of
        // their breakpoints, so checking at the breakpoints covers the domain.
        for x in var.breakpoints() {
            let sum: f64 = var.labels.iter().map(|(_, mf)| mf.eval(x)).sum();
            if (sum - 1.0).abs() > PARTITION_TOLERANCE {
                return Err(FuzzyError::InvalidVariable {
                    variable: var.name.clone(),
                    message: format!("label degrees sum to {sum} at x = {x}, expected 1"),
                });
            }
        }
        Ok(var)
    }

    /// Uniform triangular partition: label `i` of `n` peaks at `i / (n - 1)`,
    /// with shoulders at the two ends of the domain.
    pub fn uniform<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Result<Self, FuzzyError> {
        let name = name.into();
        let n = labels.len();
        if n < 2 {
            return Err(FuzzyError::InvalidVariable {
                variable: name,
                message: "at least two labels are required".into(),
            });
        }
        let step = (n - 1) as f64;
        let center = |i: usize| i as f64 / step;
        let mut sets = Vec::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            let mf = if i == 0 {
                MembershipFunction::left_shoulder(0.0, center(1))?
            } else if i == n - 1 {
                MembershipFunction::right_shoulder(center(n - 2), 1.0)?
            } else {
                MembershipFunction::triangle(center(i - 1), center(i), center(i + 1))?
            };
            sets.push((label.as_ref().to_string(), mf));
        }
        Self::new(name, sets)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> impl ExactSizeIterator<Item = &str> {
        self.labels.iter().map(|(l, _)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|(l, _)| l == label)
    }

    pub fn label_name(&self, index: usize) -> &str {
        &self.labels[index].0
    }

    pub fn membership_function(&self, index: usize) -> &MembershipFunction {
        &self.labels[index].1
    }

    pub fn function_for(&self, label: &str) -> Option<&MembershipFunction> {
        self.labels.iter().find(|(l, _)| l == label).map(|(_, mf)| mf)
    }

    /// Crisp value at which a label reaches full membership.
    pub fn center(&self, label: &str) -> Option<f64> {
        self.function_for(label).map(MembershipFunction::prototype)
    }

    /// Sorted, deduplicated breakpoints of every label.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut points: Vec<f64> = self.labels.iter().flat_map(|(_, mf)| mf.breakpoints()).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    /// Degrees of every label at `x`.
    pub fn fuzzify(&self, x: f64) -> Result<Fuzzified, FuzzyError> {
        check_domain(x)?;
        Ok(Fuzzified {
            degrees: self.labels.iter().map(|(label, mf)| (label.clone(), mf.eval(x))).collect(),
        })
    }
}

/// Result of fuzzifying one crisp value: one degree per label, in label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fuzzified {
    degrees: Vec<(String, f64)>,
}

impl Fuzzified {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self { degrees: pairs.into_iter().map(|(l, d)| (l.into(), d)).collect() }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.degrees.iter().find(|(l, _)| l == label).map(|(_, d)| *d)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.degrees.iter().map(|(l, d)| (l.as_str(), *d))
    }

    pub fn sum(&self) -> f64 {
        self.degrees.iter().map(|(_, d)| d).sum()
    }

    /// Label with the largest degree; ties go to the earlier label.
    pub fn dominant(&self) -> &str {
        let mut best = 0;
        for (i, (_, d)) in self.degrees.iter().enumerate() {
            if *d > self.degrees[best].1 {
                best = i;
            }
        }
        &self.degrees[best].0
    }
}

/// Free-function form of [`LinguisticVariable::fuzzify`].
pub fn fuzzify(var: &LinguisticVariable, x: f64) -> Result<Fuzzified, FuzzyError> {
    var.fuzzify(x)
}
