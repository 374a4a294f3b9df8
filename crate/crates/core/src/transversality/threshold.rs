//! Hausdorff-exponent thresholds above which the bad parameter set is null.

use num_rational::Ratio;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::strata::stratum_codim;

/// Differentiability class `C^r` of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Finite(u32),
    Infinite,
}

/// Which exponent bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThresholdQuery {
    /// General families; the branch is chosen from the sign of `delta_star`.
    Main1 { dim_a: u32, delta_star: i64, r: Smoothness },
    /// Smooth families, i.e. `Main1` with `r = infinity`.
    Main2 { dim_a: u32, delta_star: i64 },
    /// Jet transversality to the corank-`k` stratum for maps `R^n -> R^l`
    /// perturbed by `L(R^m, R^l)`.
    Jet { m: u32, l: u32, n: u32, k: u32, r: Smoothness },
    /// `d`-fold transversality to the diagonal.
    Multipoint { m: u32, l: u32, n: u32, d: u32, r: Smoothness },
    Morse { m: u32, r: Smoothness },
    /// Non-simplicial perturbations of strongly convex problems.
    Pareto { m: u32, l: u32 },
    /// Maps into `R^{2n-1}` whose singular points are all cross-caps.
    Umbrella { m: u32, n: u32 },
    Immersion { m: u32, l: u32, n: u32 },
    Injectivity { m: u32, l: u32, n: u32 },
}

/// `s >= value` or `s > value`, exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SBound {
    pub value: Ratio<i64>,
    pub strict: bool,
}

impl SBound {
    fn new(value: Ratio<i64>, strict: bool) -> Self {
        // Hausdorff exponents are non-negative, so any negative bound means
        // every s >= 0 qualifies.
        if value < Ratio::from_integer(0) {
            Self {
                value: Ratio::from_integer(0),
                strict: false,
            }
        } else {
            Self { value, strict }
        }
    }

    pub fn as_f64(&self) -> f64 {
        *self.value.numer() as f64 / *self.value.denom() as f64
    }

    /// Whether exponent `s` satisfies the bound.
    pub fn admits(&self, s: f64) -> bool {
        if self.strict {
            s > self.as_f64()
        } else {
            s >= self.as_f64()
        }
    }
}

impl std::fmt::Display for SBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s {} {}", if self.strict { ">" } else { ">=" }, self.value)
    }
}

impl Serialize for SBound {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SBound", 4)?;
        s.serialize_field("bound", &self.value.to_string())?;
        s.serialize_field("numer", self.value.numer())?;
        s.serialize_field("denom", self.value.denom())?;
        s.serialize_field("value", &self.as_f64())?;
        s.serialize_field("strict", &self.strict)?;
        s.end()
    }
}

fn int(v: i64) -> Ratio<i64> {
    Ratio::from_integer(v)
}

/// The two-branch pattern shared by all bounds: for excess `e >= 0`,
/// `s >= base - 1 + (e + 1) / divisor` (`s > base - 1` when smooth);
/// for `e < 0`, `s > base + e`.
fn two_branch(base: i64, excess: i64, divisor: Option<i64>) -> SBound {
    if excess >= 0 {
        match divisor {
            Some(d) => SBound::new(int(base - 1) + Ratio::new(excess + 1, d), false),
            None => SBound::new(int(base - 1), true),
        }
    } else {
        SBound::new(int(base + excess), true)
    }
}

fn order(r: Smoothness, min: u32, what: &str) -> Result<Option<i64>> {
    match r {
        Smoothness::Infinite => Ok(None),
        Smoothness::Finite(v) if v >= min => Ok(Some(v as i64)),
        Smoothness::Finite(v) => Err(Error::InvalidRegime(format!("{what} requires r >= {min}, got r = {v}"))),
    }
}

pub fn genericity_threshold(query: ThresholdQuery) -> Result<SBound> {
    Ok(match query {
        ThresholdQuery::Main1 { dim_a, delta_star, r } => {
            two_branch(dim_a as i64, delta_star, order(r, 1, "the main bound")?)
        }
        ThresholdQuery::Main2 { dim_a, delta_star } => two_branch(dim_a as i64, delta_star, None),
        ThresholdQuery::Jet { m, l, n, k, r } => {
            let r = order(r, 2, "the jet bound")?;
            let codim = stratum_codim(n as usize, l as usize, k as usize)? as i64;
            two_branch((m * l) as i64, n as i64 - codim, r.map(|v| v - 1))
        }
        ThresholdQuery::Multipoint { m, l, n, d, r } => {
            if d < 2 {
                return Err(Error::InvalidRegime(format!("multipoint needs d >= 2, got {d}")));
            }
            let r = order(r, 1, "the multipoint bound")?;
            let excess = (n * d) as i64 - (l as i64) * (d as i64 - 1);
            two_branch((m * l) as i64, excess, r)
        }
        ThresholdQuery::Morse { m, r } => {
            let r = order(r, 2, "the Morse bound")?;
            two_branch(m as i64, 0, r.map(|v| v - 1))
        }
        ThresholdQuery::Pareto { m, l } => {
            let (m, l) = (m as i64, l as i64);
            if m < l || m - 2 * l + 4 <= 0 {
                return Err(Error::InvalidRegime(format!(
                    "the simpliciality bound needs m >= l and m - 2l + 4 > 0, got m = {m}, l = {l}"
                )));
            }
            SBound::new(int(m * l - (m - 2 * l + 4)), true)
        }
        ThresholdQuery::Umbrella { m, n } => {
            if n < 2 {
                return Err(Error::InvalidRegime("the cross-cap bound needs n >= 2".into()));
            }
            let (m, n) = (m as i64, n as i64);
            SBound::new(int(m * (2 * n - 1) - 1), true)
        }
        ThresholdQuery::Immersion { m, l, n } => {
            if l < 2 * n {
                return Err(Error::InvalidRegime(format!("the immersion bound needs l >= 2n, got l = {l}, n = {n}")));
            }
            let (m, l, n) = (m as i64, l as i64, n as i64);
            SBound::new(int(m * l + 2 * n - l - 1), true)
        }
        ThresholdQuery::Injectivity { m, l, n } => {
            if l <= 2 * n {
                return Err(Error::InvalidRegime(format!("the injectivity bound needs l > 2n, got l = {l}, n = {n}")));
            }
            let (m, l, n) = (m as i64, l as i64, n as i64);
            SBound::new(int(m * l + 2 * n - l), true)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Smoothness::{Finite, Infinite};

    fn bound(q: ThresholdQuery) -> (Ratio<i64>, bool) {
        let b = genericity_threshold(q).unwrap();
        (b.value, b.strict)
    }

    #[test]
    fn morse_at_order_two() {
        assert_eq!(bound(ThresholdQuery::Morse { m: 1, r: Finite(2) }), (int(1), false));
        assert_eq!(bound(ThresholdQuery::Morse { m: 3, r: Finite(3) }), (Ratio::new(5, 2), false));
        assert_eq!(bound(ThresholdQuery::Morse { m: 3, r: Infinite }), (int(2), true));
        assert!(genericity_threshold(ThresholdQuery::Morse { m: 1, r: Finite(1) }).is_err());
    }

    #[test]
    fn pareto_bounds() {
        assert_eq!(bound(ThresholdQuery::Pareto { m: 4, l: 2 }), (int(4), true));
        assert_eq!(bound(ThresholdQuery::Pareto { m: 2, l: 2 }), (int(2), true));
        assert_eq!(bound(ThresholdQuery::Pareto { m: 3, l: 1 }), (int(0), false));
        assert!(genericity_threshold(ThresholdQuery::Pareto { m: 1, l: 2 }).is_err());
        assert!(genericity_threshold(ThresholdQuery::Pareto { m: 4, l: 4 }).is_err());
    }

    #[test]
    fn main_bound_branches() {
        for n in 0..6 {
            let q = ThresholdQuery::Main1 { dim_a: 2, delta_star: n, r: Infinite };
            assert_eq!(bound(q), (int(1), true));
        }
        assert_eq!(
            bound(ThresholdQuery::Main1 { dim_a: 2, delta_star: 3, r: Finite(2) }),
            (int(3), false)
        );
        for l in 2..6i64 {
            let q = ThresholdQuery::Main1 { dim_a: l as u32, delta_star: 1 - l, r: Finite(1) };
            assert_eq!(bound(q), (int(1), true));
        }
        assert_eq!(
            bound(ThresholdQuery::Main2 { dim_a: 1, delta_star: -3 }),
            (int(0), false)
        );
    }

    #[test]
    fn jet_and_multipoint() {
        assert_eq!(
            bound(ThresholdQuery::Jet { m: 1, l: 1, n: 1, k: 1, r: Finite(2) }),
            (int(1), false)
        );
        for m in 1..5u32 {
            let q = ThresholdQuery::Jet { m, l: m, n: m, k: 1, r: Finite(2) };
            assert_eq!(bound(q), (int((m * m) as i64 - 1 + m as i64), false));
        }
        // l = 1 and k = 1 reduces to the Morse bound
        for r in 2..6 {
            let jet = genericity_threshold(ThresholdQuery::Jet { m: 2, l: 1, n: 3, k: 1, r: Finite(r) }).unwrap();
            let morse = genericity_threshold(ThresholdQuery::Morse { m: 2, r: Finite(r) }).unwrap();
            assert_eq!(jet, morse);
        }
        assert_eq!(
            bound(ThresholdQuery::Multipoint { m: 2, l: 3, n: 1, d: 2, r: Finite(1) }),
            (int(5), true)
        );
    }

    #[test]
    fn checker_bounds() {
        assert_eq!(bound(ThresholdQuery::Umbrella { m: 2, n: 2 }), (int(5), true));
        assert_eq!(bound(ThresholdQuery::Immersion { m: 1, l: 3, n: 1 }), (int(1), true));
        assert_eq!(bound(ThresholdQuery::Injectivity { m: 1, l: 3, n: 1 }), (int(2), true));
    }

    #[test]
    fn non_increasing_in_r() {
        for m in 1..4u32 {
            for n in 1..4u32 {
                for l in 1..4u32 {
                    let mut prev = f64::INFINITY;
                    for r in 2..10 {
                        let b = genericity_threshold(ThresholdQuery::Jet { m, l, n, k: 1, r: Finite(r) })
                            .unwrap()
                            .as_f64();
                        assert!(b <= prev);
                        prev = b;
                    }
                    let inf = genericity_threshold(ThresholdQuery::Jet { m, l, n, k: 1, r: Infinite }).unwrap();
                    assert!(inf.as_f64() <= prev);
                }
            }
        }
    }
}
