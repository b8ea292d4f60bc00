//! Covariance-eigenvalue estimators used as comparison baselines:
//! eigenvalue ratio (ER), growth ratio (GR), eigenvalue difference (ED),
//! Onatski's gap-ratio statistic (ON) and the Bai-Ng PC/IC criteria.
//!
//! All estimators take a descending [`Spectrum`], return a count in
//! `0..=r_max`, and break ties toward the smallest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

fn check_r_max(r_max: usize, limit: usize, what: &str) -> Result<()> {
    if r_max == 0 || r_max > limit {
        return Err(Error::Config(format!(
            "{what}: r_max = {r_max} must lie in 1..={limit}"
        )));
    }
    Ok(())
}

/// Index (1-based offset `first`) of the largest value; first one wins ties.
fn argmax(values: impl IntoIterator<Item = f64>, first: usize) -> usize {
    let mut best = (first, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (first + i, v);
        }
    }
    best.0
}

fn ratio_or_inf(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `argmax_{1≤i≤r_max} λ_i / λ_{i+1}`.
pub fn er_estimate(spec: &Spectrum, r_max: usize) -> Result<usize> {
    check_r_max(r_max, spec.p().saturating_sub(1), "ER")?;
    let l = spec.values();
    Ok(argmax((0..r_max).map(|i| ratio_or_inf(l[i], l[i + 1])), 1))
}

/// `argmax_{1≤i≤r_max} ln(V_{i-1}/V_i) / ln(V_i/V_{i+1})` with
/// `V_i = Σ_{j>i} λ_j`.
pub fn gr_estimate(spec: &Spectrum, r_max: usize) -> Result<usize> {
    check_r_max(r_max, spec.p().saturating_sub(2), "GR")?;
    // tails[i] = V_i
    let mut tails = vec![0.0; spec.p() + 1];
    for (i, &l) in spec.values().iter().enumerate().rev() {
        tails[i] = tails[i + 1] + l;
    }
    let log_ratio = |i: usize| -> Result<f64> {
        let (a, b) = (tails[i], tails[i + 1]);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::NumericalDomain(format!(
                "GR: V_{} = {b} is not positive",
                i + 1
            )));
        }
        Ok((a / b).ln())
    };
    let mut criteria = Vec::with_capacity(r_max);
    for i in 1..=r_max {
        let den = log_ratio(i)?;
        if den == 0.0 {
            return Err(Error::NumericalDomain(format!("GR: V_{i} = V_{}", i + 1)));
        }
        criteria.push(log_ratio(i - 1)? / den);
    }
    Ok(argmax(criteria, 1))
}

/// `max{i ≤ r_max : λ_i - λ_{i+1} ≥ threshold}`, or 0.
pub fn ed_estimate(spec: &Spectrum, threshold: f64, r_max: usize) -> Result<usize> {
    if !(threshold > 0.0) {
        return Err(Error::Config(format!(
            "ED threshold must be positive, got {threshold}"
        )));
    }
    check_r_max(r_max, spec.p().saturating_sub(1), "ED")?;
    let l = spec.values();
    Ok((1..=r_max)
        .rev()
        .find(|&i| l[i - 1] - l[i] >= threshold)
        .unwrap_or(0))
}

/// `argmax_{r_min<i≤r_max} (λ_i - λ_{i+1}) / (λ_{i+1} - λ_{i+2})`.
pub fn on_estimate(spec: &Spectrum, r_min: usize, r_max: usize) -> Result<usize> {
    check_r_max(r_max, spec.p().saturating_sub(2), "ON")?;
    if r_min >= r_max {
        return Err(Error::Config(format!(
            "ON: r_min = {r_min} must be below r_max = {r_max}"
        )));
    }
    let l = spec.values();
    let ratios = (r_min + 1..=r_max).map(|i| ratio_or_inf(l[i - 1] - l[i], l[i] - l[i + 1]));
    Ok(argmax(ratios, r_min + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaiNgFamily {
    Pc,
    Ic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaiNgPenalty {
    G1,
    G2,
    G3,
}

impl BaiNgPenalty {
    /// Penalty weight `g(n, p)`.
    pub fn value(self, n: usize, p: usize) -> f64 {
        let (nf, pf) = (n as f64, p as f64);
        let c2 = nf.min(pf);
        let scale = (nf + pf) / (nf * pf);
        match self {
            BaiNgPenalty::G1 => scale * (nf * pf / (nf + pf)).ln(),
            BaiNgPenalty::G2 => scale * c2.ln(),
            BaiNgPenalty::G3 => c2.ln() / c2,
        }
    }
}

/// One of PC₁–PC₃ or IC₁–IC₃.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaiNgVariant {
    pub family: BaiNgFamily,
    pub penalty: BaiNgPenalty,
}

impl BaiNgVariant {
    pub const fn new(family: BaiNgFamily, penalty: BaiNgPenalty) -> Self {
        Self { family, penalty }
    }
}

/// Criterion values at `k = 0..=r_max` for an explicit penalty weight.
///
/// `V(k) = p⁻¹ Σ_{j=k+1}^{min(n,p)} μ_j`; PC adds `k σ̂² g` with
/// `σ̂² = V(r_max)`, IC is `ln V(k) + k g`.
pub fn bai_ng_criteria(
    cov_spec: &Spectrum,
    n: usize,
    family: BaiNgFamily,
    penalty: f64,
    r_max: usize,
) -> Result<Vec<f64>> {
    let p = cov_spec.p();
    let m = n.min(p);
    if r_max == 0 || r_max >= m {
        return Err(Error::Config(format!(
            "Bai-Ng: r_max = {r_max} must lie in 1..{m}"
        )));
    }
    let mu = &cov_spec.values()[..m];
    let mut v = vec![0.0; r_max + 1];
    let mut tail: f64 = mu[r_max..].iter().sum();
    for k in (0..=r_max).rev() {
        v[k] = tail / p as f64;
        if k > 0 {
            tail += mu[k - 1];
        }
    }
    match family {
        BaiNgFamily::Pc => {
            let sigma2 = v[r_max];
            Ok(v.iter()
                .enumerate()
                .map(|(k, vk)| vk + k as f64 * sigma2 * penalty)
                .collect())
        }
        BaiNgFamily::Ic => v
            .iter()
            .enumerate()
            .map(|(k, &vk)| {
                if vk > 0.0 {
                    Ok(vk.ln() + k as f64 * penalty)
                } else {
                    Err(Error::NumericalDomain(format!("IC: V({k}) = {vk}")))
                }
            })
            .collect(),
    }
}

fn argmin_from_zero(values: &[f64]) -> usize {
    argmax(values.iter().map(|v| -v), 0)
}

/// Bai-Ng estimate from a covariance spectrum.
pub fn bai_ng_estimate(
    cov_spec: &Spectrum,
    n: usize,
    variant: BaiNgVariant,
    r_max: usize,
) -> Result<usize> {
    let g = variant.penalty.value(n, cov_spec.p());
    let crit = bai_ng_criteria(cov_spec, n, variant.family, g, r_max)?;
    Ok(argmin_from_zero(&crit))
}

/// Bai-Ng estimate with a caller-chosen penalty weight.
pub fn bai_ng_estimate_with_penalty(
    cov_spec: &Spectrum,
    n: usize,
    family: BaiNgFamily,
    penalty: f64,
    r_max: usize,
) -> Result<usize> {
    Ok(argmin_from_zero(&bai_ng_criteria(
        cov_spec, n, family, penalty, r_max,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec(), 0).unwrap()
    }

    const FIVE: [f64; 5] = [8.0, 4.0, 1.0, 0.5, 0.4];

    #[test]
    fn er_examples() {
        assert_eq!(er_estimate(&spec(&FIVE), 4).unwrap(), 2);
        assert_eq!(er_estimate(&spec(&[10.0, 1.0, 1.0, 1.0]), 2).unwrap(), 1);
        assert_eq!(er_estimate(&spec(&[3.0, 2.0, 0.0, 0.0]), 3).unwrap(), 2);
        assert!(er_estimate(&spec(&FIVE), 5).is_err());
    }

    #[test]
    fn gr_examples() {
        assert_eq!(gr_estimate(&spec(&FIVE), 3).unwrap(), 2);
        assert_eq!(
            gr_estimate(&spec(&[100.0, 0.01, 0.01, 0.01]), 2).unwrap(),
            1
        );
        assert!(matches!(
            gr_estimate(&spec(&[3.0, 2.0, 0.0, 0.0]), 2),
            Err(Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn ed_examples() {
        assert_eq!(ed_estimate(&spec(&FIVE), 1.0, 4).unwrap(), 2);
        assert_eq!(ed_estimate(&spec(&FIVE), 10.0, 4).unwrap(), 0);
        assert_eq!(
            ed_estimate(&spec(&[5.0, 3.0, 2.9, 1.4, 1.3]), 1.0, 4).unwrap(),
            3
        );
    }

    #[test]
    fn on_examples() {
        assert_eq!(on_estimate(&spec(&FIVE), 0, 3).unwrap(), 2);
        assert_eq!(
            on_estimate(&spec(&[5.0, 4.0, 3.0, 2.0, 1.0, 0.0]), 0, 4).unwrap(),
            1
        );
        assert_eq!(
            on_estimate(&spec(&[5.0, 4.0, 3.0, 2.0, 1.0, 0.0]), 2, 4).unwrap(),
            3
        );
        assert!(on_estimate(&spec(&FIVE), 3, 3).is_err());
    }

    #[test]
    fn bai_ng_ic3_hand_example() {
        let mut mu = vec![10.0, 5.0];
        mu.extend(std::iter::repeat_n(1.0, 48));
        let s = spec(&mu);
        let g3 = BaiNgPenalty::G3.value(100, 50);
        assert_relative_eq!(g3, 50f64.ln() / 50.0, epsilon = 1e-15);
        let crit = bai_ng_criteria(&s, 100, BaiNgFamily::Ic, g3, 3).unwrap();
        let expected = [
            (63.0f64 / 50.0).ln(),
            (53.0f64 / 50.0).ln() + g3,
            (48.0f64 / 50.0).ln() + 2.0 * g3,
            (47.0f64 / 50.0).ln() + 3.0 * g3,
        ];
        for (c, e) in crit.iter().zip(expected) {
            assert_relative_eq!(*c, e, epsilon = 1e-12);
        }
        assert!((crit[0] - 0.2311).abs() < 1e-4 && (crit[2] - 0.1157).abs() < 1e-4);
        let ic3 = BaiNgVariant::new(BaiNgFamily::Ic, BaiNgPenalty::G3);
        assert_eq!(bai_ng_estimate(&s, 100, ic3, 3).unwrap(), 2);
    }

    #[test]
    fn bai_ng_penalty_limits() {
        let s = spec(&[9.0, 5.0, 3.0, 2.0, 1.5, 1.0, 0.5]);
        for family in [BaiNgFamily::Pc, BaiNgFamily::Ic] {
            assert_eq!(
                bai_ng_estimate_with_penalty(&s, 100, family, 0.0, 4).unwrap(),
                4
            );
            assert_eq!(
                bai_ng_estimate_with_penalty(&s, 100, family, 1e9, 4).unwrap(),
                0
            );
        }
    }

    #[test]
    fn bai_ng_penalty_formulas() {
        let (n, p) = (300usize, 100usize);
        let (nf, pf) = (300.0f64, 100.0f64);
        let scale = (nf + pf) / (nf * pf);
        assert_relative_eq!(
            BaiNgPenalty::G1.value(n, p),
            scale * (nf * pf / (nf + pf)).ln()
        );
        assert_relative_eq!(BaiNgPenalty::G2.value(n, p), scale * 100f64.ln());
        assert_relative_eq!(BaiNgPenalty::G3.value(n, p), 100f64.ln() / 100.0);
    }

    #[test]
    fn ic_rejects_zero_residual_variance() {
        let s = spec(&[3.0, 1.0, 0.0, 0.0]);
        let err = bai_ng_criteria(&s, 10, BaiNgFamily::Ic, 0.1, 3);
        assert!(matches!(err, Err(Error::NumericalDomain(_))));
    }
}
