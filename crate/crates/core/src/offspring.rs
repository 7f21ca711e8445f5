//! Offspring laws with finite support and their generating-function data.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{parse_err, Error, Result};

const INPUT_TOL: f64 = 1e-9;
const Q_TOL: f64 = 1e-12;
const Q_MAX_ITER: usize = 1_000_000;

/// A probability law on child counts with finite support.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, f64)>", into = "Vec<(usize, f64)>")]
pub struct OffspringDistribution {
    weights: Vec<f64>,
    mean: f64,
    sampler: WeightedIndex<f64>,
}

impl fmt::Debug for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OffspringDistribution")
            .field("weights", &self.pairs())
            .field("mean", &self.mean)
            .finish()
    }
}

impl PartialEq for OffspringDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl TryFrom<Vec<(usize, f64)>> for OffspringDistribution {
    type Error = Error;
    fn try_from(v: Vec<(usize, f64)>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<OffspringDistribution> for Vec<(usize, f64)> {
    fn from(d: OffspringDistribution) -> Self {
        d.pairs()
    }
}

impl OffspringDistribution {
    /// Build from `(count, probability)` pairs.
    pub fn new(pairs: &[(usize, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let top = pairs.iter().map(|p| p.0).max().unwrap_or(0);
        let mut dense = vec![0.0; top + 1];
        let mut seen = vec![false; top + 1];
        for &(count, weight) in pairs {
            if weight < 0.0 || weight.is_nan() {
                return Err(Error::NegativeWeight { count, weight });
            }
            if seen[count] {
                return Err(Error::DuplicateCount(count));
            }
            seen[count] = true;
            dense[count] = weight;
        }
        let total: f64 = dense.iter().sum();
        if (total - 1.0).abs() > INPUT_TOL {
            return Err(Error::NonNormalized(total));
        }
        Ok(Self::from_dense(dense))
    }

    /// Build from a dense weight vector indexed by child count; renormalizes.
    pub(crate) fn from_dense(mut dense: Vec<f64>) -> Self {
        while dense.len() > 1 && dense.last() == Some(&0.0) {
            dense.pop();
        }
        let total: f64 = dense.iter().sum();
        for w in &mut dense {
            *w /= total;
        }
        let mean = dense.iter().enumerate().map(|(i, w)| i as f64 * w).sum();
        let sampler = WeightedIndex::new(&dense).expect("positive total weight");
        OffspringDistribution { weights: dense, mean, sampler }
    }

    pub fn weight(&self, count: usize) -> f64 {
        self.weights.get(count).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Support points with positive weight, in increasing order.
    pub fn pairs(&self) -> Vec<(usize, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i, *w))
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_support(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn is_supercritical(&self) -> bool {
        self.mean > 1.0
    }

    /// The generating function at `s`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfDomain(s));
        }
        Ok(self.pgf_unchecked(s))
    }

    pub(crate) fn pgf_unchecked(&self, s: f64) -> f64 {
        self.weights.iter().rev().fold(0.0, |acc, w| acc * s + w)
    }

    /// Derivative of the generating function.
    pub fn pgf_derivative(&self, s: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, w)| acc * s + i as f64 * w)
    }

    /// Smallest fixed point of the generating function in [0, 1].
    pub fn extinction_prob(&self, tol: f64) -> f64 {
        if !self.is_supercritical() {
            return 1.0;
        }
        let mut q = 0.0;
        for _ in 0..Q_MAX_ITER {
            let next = self.pgf_unchecked(q);
            if (next - q).abs() <= tol * 1e-3 {
                return next;
            }
            q = next;
        }
        q
    }

    /// Law of the backbone: coefficients of (f(q + (1-q)s) - q) / (1 - q).
    pub fn backbone(&self) -> Result<Self> {
        if !self.is_supercritical() {
            return Err(Error::NotSupercritical(self.mean));
        }
        let q = self.extinction_prob(Q_TOL);
        let n = self.weights.len();
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate().skip(1) {
            let s: f64 = (k..n)
                .map(|j| self.weights[j] * binomial(j, k) * q.powi((j - k) as i32))
                .sum();
            *slot = (1.0 - q).powi(k as i32 - 1) * s;
        }
        Ok(Self::from_dense(out))
    }

    /// Law of the bushes: coefficients of f(qs) / q.
    pub fn subcritical(&self) -> Result<Self> {
        if !self.is_supercritical() {
            return Err(Error::NotSupercritical(self.mean));
        }
        let q = self.extinction_prob(Q_TOL);
        if q <= 0.0 {
            return Err(Error::DegenerateQ);
        }
        let out = self
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * q.powi(k as i32 - 1))
            .collect();
        Ok(Self::from_dense(out))
    }

    /// Law with every count above `c_max` sent to zero.
    pub fn truncated(&self, c_max: usize) -> Self {
        let mut out = vec![0.0; (c_max + 1).min(self.weights.len())];
        for (i, w) in self.weights.iter().enumerate() {
            if i == 0 || i > c_max {
                out[0] += w;
            } else {
                out[i] += w;
            }
        }
        Self::from_dense(out)
    }

    /// Draw a child count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs().iter().map(|(c, p)| format!("{c}:{p}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for OffspringDistribution {
    type Err = Error;

    /// Parses `count:prob` pairs separated by commas; `prob` may be a fraction `a/b`.
    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (c, p) = part
                .split_once(':')
                .ok_or_else(|| parse_err(1, format!("expected count:prob, got `{part}`")))?;
            let count = c
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(1, format!("bad count `{c}`: {e}")))?;
            pairs.push((count, parse_prob(p.trim())?));
        }
        Self::new(&pairs)
    }
}

fn parse_prob(p: &str) -> Result<f64> {
    let bad = |e: std::num::ParseFloatError| parse_err(1, format!("bad probability `{p}`: {e}"));
    match p.split_once('/') {
        Some((a, b)) => Ok(a.trim().parse::<f64>().map_err(bad)? / b.trim().parse::<f64>().map_err(bad)?),
        None => p.parse::<f64>().map_err(bad),
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The laws derived from a supercritical offspring distribution.
#[derive(Debug, Clone)]
pub struct DerivedLaws {
    pub mu: OffspringDistribution,
    pub q: f64,
    pub backbone: OffspringDistribution,
    /// `None` when `q = 0`, in which case there are no bushes.
    pub bush: Option<OffspringDistribution>,
    /// Per backbone child count `b`, the law of the number of extra children.
    pub(crate) extra: Vec<Option<WeightedIndex<f64>>>,
}

impl DerivedLaws {
    pub fn new(mu: &OffspringDistribution) -> Result<Self> {
        let backbone = mu.backbone()?;
        let q = mu.extinction_prob(Q_TOL);
        let bush = if q > 0.0 { Some(mu.subcritical()?) } else { None };
        let n = mu.weights.len();
        let mut extra = Vec::with_capacity(n);
        for b in 0..n {
            if b == 0 || backbone.weight(b) == 0.0 {
                extra.push(None);
                continue;
            }
            let w: Vec<f64> = extra_weights(mu, q, b);
            extra.push(WeightedIndex::new(&w).ok());
        }
        Ok(DerivedLaws { mu: mu.clone(), q, backbone, bush, extra })
    }

    /// Law of the number of non-backbone children given `b` backbone children.
    pub fn extra_law(&self, b: usize) -> Vec<f64> {
        let w = extra_weights(&self.mu, self.q, b);
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    }
}

fn extra_weights(mu: &OffspringDistribution, q: f64, b: usize) -> Vec<f64> {
    let n = mu.weights.len();
    (0..n.saturating_sub(b))
        .map(|j| mu.weights[b + j] * binomial(b + j, b) * q.powi(j as i32))
        .collect()
}
