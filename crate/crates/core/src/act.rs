//! Adjusted correlation thresholding.
//!
//! The top sample correlation eigenvalues are biased upward by the noise
//! bulk. Each one is corrected through a partial Stieltjes transform built
//! from the eigenvalues below it:
//!
//! ```text
//! m_j(z)  = (p-j)⁻¹ [ Σ_{ℓ>j} (λ_ℓ - z)⁻¹ + ((3λ_j + λ_{j+1})/4 - z)⁻¹ ]
//! m̲_j(z) = -(1 - ρ_j)/z + ρ_j m_j(z),        ρ_j = (p-j)/(n-1)
//! λ_j^C   = -1 / m̲_j(λ_j)
//! ```
//!
//! and the number of factors is the largest `j ≤ r_max` with
//! `λ_j^C > 1 + √(p/(n-1))`.
//!
//! Eigenvalue indices in this module count from 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

/// Relative jitter used to split exact ties among the top eigenvalues.
pub const TIE_JITTER: f64 = 1e-9;

/// Divisor of the partial Stieltjes transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `(p - j)⁻¹` over the `p - j + 1` summands.
    #[default]
    Verbatim,
    /// `(p - j + 1)⁻¹`, a plain average. For sensitivity checks only.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Lower the tied eigenvalue(s) by `TIE_JITTER · λ_j` and flag it.
    #[default]
    Jitter,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActOptions {
    pub normalization: Normalization,
    pub ties: TiePolicy,
}

/// Bias-corrected top eigenvalues and the threshold they are compared to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedSpectrum {
    pub adjusted: Vec<f64>,
    pub threshold: f64,
    pub p: usize,
    pub n: usize,
    pub r_max: usize,
    /// Indices `j` whose tie with `λ_{j+1}` was broken by jitter.
    pub jittered: Vec<usize>,
}

impl AdjustedSpectrum {
    pub fn estimate(&self) -> usize {
        count_above(&self.adjusted, self.threshold)
    }

    pub fn has_warning(&self) -> bool {
        !self.jittered.is_empty()
    }
}

/// `max{j : values[j-1] > s}`, or 0 when no value exceeds `s`.
pub fn count_above(values: &[f64], s: f64) -> usize {
    values.iter().rposition(|&v| v > s).map_or(0, |i| i + 1)
}

/// `1 + √(p/(n-1))`.
pub fn act_threshold(p: usize, n: usize) -> f64 {
    debug_assert!(n >= 2);
    1.0 + (p as f64 / (n as f64 - 1.0)).sqrt()
}

/// `min(⌊p/2⌋, ⌊(n-1)/2⌋, 50)`, capped at `p - 2`.
pub fn default_r_max(p: usize, n: usize) -> usize {
    (p / 2)
        .min(n.saturating_sub(1) / 2)
        .min(50)
        .min(p.saturating_sub(2))
}

fn check_index(j: usize, p: usize) -> Result<()> {
    if j == 0 || j >= p {
        return Err(Error::Config(format!(
            "index {j} outside 1..={}",
            p.saturating_sub(1)
        )));
    }
    Ok(())
}

fn partial_stieltjes_raw(j: usize, values: &[f64], z: f64, norm: Normalization) -> Result<f64> {
    let p = values.len();
    check_index(j, p)?;
    let (lj, lj1) = (values[j - 1], values[j]);
    if lj <= lj1 {
        return Err(Error::DegenerateGap { j });
    }
    let mut sum = 0.0;
    for &l in &values[j..] {
        if l == z {
            return Err(Error::PoleAtZ { j });
        }
        sum += 1.0 / (l - z);
    }
    let anchor = (3.0 * lj + lj1) / 4.0;
    if anchor == z {
        return Err(Error::PoleAtZ { j });
    }
    sum += 1.0 / (anchor - z);
    let divisor = match norm {
        Normalization::Verbatim => (p - j) as f64,
        Normalization::Averaged => (p - j + 1) as f64,
    };
    Ok(sum / divisor)
}

fn companion_raw(j: usize, values: &[f64], n: usize, z: f64, norm: Normalization) -> Result<f64> {
    if n < 2 {
        return Err(Error::Config(format!("sample size {n} < 2")));
    }
    if z == 0.0 {
        return Err(Error::NumericalDomain(
            "companion transform evaluated at z = 0".into(),
        ));
    }
    let m = partial_stieltjes_raw(j, values, z, norm)?;
    let rho = (values.len() - j) as f64 / (n as f64 - 1.0);
    Ok(-(1.0 - rho) / z + rho * m)
}

/// Partial Stieltjes transform `m_j(z)` of the eigenvalues below `λ_j`.
pub fn partial_stieltjes(j: usize, spec: &Spectrum, z: f64) -> Result<f64> {
    partial_stieltjes_raw(j, spec.values(), z, Normalization::Verbatim)
}

pub fn partial_stieltjes_with(
    j: usize,
    spec: &Spectrum,
    z: f64,
    norm: Normalization,
) -> Result<f64> {
    partial_stieltjes_raw(j, spec.values(), z, norm)
}

/// Companion transform `m̲_j(z) = -(1 - ρ_j)/z + ρ_j m_j(z)`.
pub fn companion_stieltjes(j: usize, spec: &Spectrum, n: usize, z: f64) -> Result<f64> {
    companion_raw(j, spec.values(), n, z, Normalization::Verbatim)
}

pub fn adjust_eigenvalues(spec: &Spectrum, n: usize, r_max: usize) -> Result<AdjustedSpectrum> {
    adjust_eigenvalues_with(spec, n, r_max, ActOptions::default())
}

/// Corrected eigenvalues `λ_j^C = -1/m̲_j(λ_j)` for `j = 1..=r_max`.
pub fn adjust_eigenvalues_with(
    spec: &Spectrum,
    n: usize,
    r_max: usize,
    opts: ActOptions,
) -> Result<AdjustedSpectrum> {
    let p = spec.p();
    if r_max == 0 || r_max + 2 > p {
        return Err(Error::Config(format!(
            "r_max = {r_max} must lie in 1..={}",
            p.saturating_sub(2)
        )));
    }
    if n < 2 {
        return Err(Error::Config(format!("sample size {n} < 2")));
    }

    let mut work = spec.values().to_vec();
    let mut jittered = Vec::new();
    for j in 1..=r_max {
        if work[j] < work[j - 1] {
            continue;
        }
        if opts.ties == TiePolicy::Error || work[j - 1] <= 0.0 {
            return Err(Error::DegenerateGap { j });
        }
        // lower the whole run tied with λ_j so no later value sits on the pole
        let mut k = j;
        while k < p && work[k] >= work[k - 1] {
            work[k] = work[k - 1] * (1.0 - TIE_JITTER);
            k += 1;
        }
        jittered.push(j);
    }

    let adjusted = (1..=r_max)
        .map(|j| companion_raw(j, &work, n, work[j - 1], opts.normalization).map(|m| -1.0 / m))
        .collect::<Result<Vec<_>>>()?;

    Ok(AdjustedSpectrum {
        adjusted,
        threshold: act_threshold(p, n),
        p,
        n,
        r_max,
        jittered,
    })
}

/// The ACT estimate of the number of factors from a sample correlation
/// spectrum.
pub fn act_estimate(spec: &Spectrum, n: usize, r_max: usize) -> Result<usize> {
    Ok(adjust_eigenvalues(spec, n, r_max)?.estimate())
}

/// A discrete spectral law `H` on `[0, 1]` together with the limiting
/// dimension ratio `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralLaw {
    atoms: Vec<(f64, f64)>,
    rho: f64,
}

impl SpectralLaw {
    /// `atoms` are `(value, weight)` pairs; weights must sum to 1.
    pub fn new(atoms: Vec<(f64, f64)>, rho: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Config("spectral law needs at least one atom".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {rho}")));
        }
        // support slack for population eigenvalues that land on 1 + round-off
        const SLACK: f64 = 1e-9;
        for &(t, w) in &atoms {
            if !(-SLACK..=1.0 + SLACK).contains(&t) {
                return Err(Error::Config(format!("atom {t} outside [0, 1]")));
            }
            if !(w >= 0.0) {
                return Err(Error::Config(format!("negative weight {w}")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, rho })
    }

    pub fn point_mass(t: f64, rho: f64) -> Result<Self> {
        Self::new(vec![(t, 1.0)], rho)
    }

    /// Equal-weight atoms at the given (e.g. non-spiked population)
    /// eigenvalues.
    pub fn from_eigenvalues(values: &[f64], rho: f64) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::new(values.iter().map(|&t| (t, w)).collect(), rho)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn edge(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `ψ(x) = 1 + ρ ∫ t/(x - t) dH(t)`, defined for `x` above the support.
pub fn psi(x: f64, law: &SpectralLaw) -> Result<f64> {
    let edge = law.edge();
    if !(x > edge) {
        return Err(Error::SupportViolation { x, edge });
    }
    let integral: f64 = law.atoms.iter().map(|&(t, w)| w * t / (x - t)).sum();
    Ok(1.0 + law.rho * integral)
}

/// Where a population spike `λ` lands in the sample: `λ ψ(λ)`.
///
/// Requires `λ ≥ edge · (1 + √ρ)`.
pub fn predicted_spike(lambda: f64, law: &SpectralLaw) -> Result<f64> {
    let bound = law.edge() * (1.0 + law.rho.sqrt());
    if !(lambda >= bound) {
        return Err(Error::Separation { lambda, bound });
    }
    Ok(lambda * psi(lambda, law)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec(), 0).unwrap()
    }

    // Expected values are exact rationals worked out by hand:
    // summands -1/3, -2/7, -2/7 and the anchor term 1/(13/4 - 4) = -4/3,
    // so m = -(47/21)/3 = -47/63 and m̲ = -1/16 + (3/4)(-47/63) = -209/336.
    #[test]
    fn partial_stieltjes_four_point_example() {
        let s = spec(&[4.0, 1.0, 0.5, 0.5]);
        assert_relative_eq!(
            partial_stieltjes(1, &s, 4.0).unwrap(),
            -47.0 / 63.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            companion_stieltjes(1, &s, 5, 4.0).unwrap(),
            -209.0 / 336.0,
            epsilon = 1e-12
        );
        let adj = adjust_eigenvalues(&s, 5, 1).unwrap();
        assert_relative_eq!(adj.adjusted[0], 336.0 / 209.0, epsilon = 1e-12);
        assert!((adj.adjusted[0] - 1.607655).abs() < 1e-6);
    }

    #[test]
    fn partial_stieltjes_two_point_example() {
        let s = spec(&[2.0, 0.0]);
        assert_relative_eq!(
            partial_stieltjes(1, &s, 2.0).unwrap(),
            -2.5,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            companion_stieltjes(1, &s, 3, 2.0).unwrap(),
            -1.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn partial_stieltjes_errors() {
        let s = spec(&[4.0, 4.0, 1.0, 1.0]);
        assert_eq!(
            partial_stieltjes(1, &s, 5.0),
            Err(Error::DegenerateGap { j: 1 })
        );
        let s = spec(&[4.0, 2.0, 1.0]);
        assert_eq!(partial_stieltjes(1, &s, 1.0), Err(Error::PoleAtZ { j: 1 }));
        assert!(matches!(
            partial_stieltjes(3, &s, 5.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            companion_stieltjes(1, &s, 10, 0.0),
            Err(Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn companion_reduces_to_minus_inverse_z_for_large_n() {
        let s = spec(&[3.0, 1.0, 0.5]);
        let m = companion_stieltjes(1, &s, 1_000_000_000_000, 3.0).unwrap();
        assert_relative_eq!(m, -1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn averaged_normalization_differs() {
        let s = spec(&[4.0, 1.0, 0.5, 0.5]);
        let v = partial_stieltjes_with(1, &s, 4.0, Normalization::Averaged).unwrap();
        assert_relative_eq!(v, -47.0 / 84.0, epsilon = 1e-12);
    }

    #[test]
    fn r_max_must_leave_two_eigenvalues() {
        let s = spec(&[2.0, 0.0]);
        assert!(matches!(
            adjust_eigenvalues(&s, 3, 0),
            Err(Error::Config(_))
        ));
        let s = spec(&[2.0, 1.0, 0.5, 0.5]);
        assert!(matches!(
            adjust_eigenvalues(&s, 10, 3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ties_are_jittered_or_rejected() {
        let s = spec(&[4.0, 1.0, 1.0, 1.0, 0.5, 0.5]);
        let adj = adjust_eigenvalues(&s, 20, 3).unwrap();
        assert_eq!(adj.jittered, vec![2]);
        assert!(adj.has_warning());
        assert!(adj.adjusted.iter().all(|v| v.is_finite() && *v > 0.0));

        let strict = ActOptions {
            ties: TiePolicy::Error,
            ..Default::default()
        };
        assert_eq!(
            adjust_eigenvalues_with(&s, 20, 3, strict),
            Err(Error::DegenerateGap { j: 2 })
        );
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(act_threshold(100, 401), 1.5);
        assert_eq!(act_threshold(299, 300), 2.0);
        assert_eq!(act_threshold(300, 301), 2.0);
    }

    #[test]
    fn counting_rule() {
        assert_eq!(count_above(&[5.0, 2.0, 1.4], act_threshold(100, 401)), 2);
        assert_eq!(count_above(&[1.2, 1.1, 0.9], 1.5), 0);
        // max index, not number of exceedances
        assert_eq!(count_above(&[5.0, 1.0, 2.0], 1.5), 3);
    }

    #[test]
    fn default_r_max_rule() {
        assert_eq!(default_r_max(100, 300), 50);
        assert_eq!(default_r_max(40, 300), 20);
        assert_eq!(default_r_max(1000, 61), 30);
        assert_eq!(default_r_max(3, 300), 1);
    }

    #[test]
    fn psi_examples() {
        let law = SpectralLaw::point_mass(1.0, 0.5).unwrap();
        assert_relative_eq!(psi(3.0, &law).unwrap(), 1.25, epsilon = 1e-15);
        assert_relative_eq!(psi(1e12, &law).unwrap(), 1.0, epsilon = 1e-9);
        let law = SpectralLaw::new(vec![(1.0, 0.5), (0.5, 0.5)], 1.0).unwrap();
        assert_relative_eq!(
            psi(2.0, &law).unwrap(),
            1.0 + 0.5 + 0.25 / 1.5,
            epsilon = 1e-15
        );
        assert!(matches!(
            psi(1.0, &law),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn predicted_spike_examples() {
        // at the separation boundary the spike lands on the bulk edge (1 + √ρ)²
        let law = SpectralLaw::point_mass(1.0, 1.0).unwrap();
        assert_relative_eq!(predicted_spike(2.0, &law).unwrap(), 4.0, epsilon = 1e-15);
        let law = SpectralLaw::point_mass(1.0, 0.25).unwrap();
        assert_relative_eq!(predicted_spike(3.0, &law).unwrap(), 3.375, epsilon = 1e-15);
        let law = SpectralLaw::point_mass(1.0, 1e-12).unwrap();
        assert_relative_eq!(predicted_spike(2.5, &law).unwrap(), 2.5, epsilon = 1e-10);
        let law = SpectralLaw::point_mass(1.0, 1.0).unwrap();
        assert!(matches!(
            predicted_spike(1.9, &law),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn spectral_law_validation() {
        assert!(SpectralLaw::new(vec![(1.5, 1.0)], 1.0).is_err());
        assert!(SpectralLaw::new(vec![(0.5, 0.7)], 1.0).is_err());
        assert!(SpectralLaw::new(vec![(0.5, 1.0)], 0.0).is_err());
        let vals: Vec<f64> = (0..997).map(|i| i as f64 / 1000.0).collect();
        assert!(SpectralLaw::from_eigenvalues(&vals, 2.0).is_ok());
    }
}
