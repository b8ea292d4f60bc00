//! Uniform dispatch over every estimator, so the Monte Carlo harness and
//! the single-dataset report evaluate methods the same way.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::act::{adjust_eigenvalues_with, ActOptions};
use crate::baselines::{
    bai_ng_estimate, ed_estimate, er_estimate, gr_estimate, on_estimate, BaiNgFamily, BaiNgPenalty,
    BaiNgVariant,
};
use crate::error::{Error, Result};
use crate::spectral::{naive_kaiser_estimate, Spectrum};

/// Which sample matrix an estimator reads its eigenvalues from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Covariance,
    Correlation,
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cov" | "covariance" => Ok(Basis::Covariance),
            "corr" | "correlation" => Ok(Basis::Correlation),
            other => Err(Error::Config(format!(
                "unknown basis '{other}', expected cov or corr"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Act,
    Er,
    Gr,
    Ed,
    On,
    Pc1,
    Pc2,
    Pc3,
    Ic1,
    Ic2,
    Ic3,
    /// Correlation eigenvalues above 1, no correction.
    Kaiser,
}

impl Method {
    pub const ALL: [Method; 12] = [
        Method::Act,
        Method::Er,
        Method::Gr,
        Method::Ed,
        Method::On,
        Method::Pc1,
        Method::Pc2,
        Method::Pc3,
        Method::Ic1,
        Method::Ic2,
        Method::Ic3,
        Method::Kaiser,
    ];

    /// The methods shown in the published comparison tables.
    pub const TABLE: [Method; 6] = [
        Method::Pc3,
        Method::Ic3,
        Method::On,
        Method::Er,
        Method::Gr,
        Method::Act,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Act => "ACT",
            Method::Er => "ER",
            Method::Gr => "GR",
            Method::Ed => "ED",
            Method::On => "ON",
            Method::Pc1 => "PC1",
            Method::Pc2 => "PC2",
            Method::Pc3 => "PC3",
            Method::Ic1 => "IC1",
            Method::Ic2 => "IC2",
            Method::Ic3 => "IC3",
            Method::Kaiser => "KAISER",
        }
    }

    /// Correlation for ACT and the Kaiser count, covariance for the rest.
    pub fn default_basis(self) -> Basis {
        match self {
            Method::Act | Method::Kaiser => Basis::Correlation,
            _ => Basis::Covariance,
        }
    }

    fn bai_ng(self) -> Option<BaiNgVariant> {
        use BaiNgFamily::{Ic, Pc};
        use BaiNgPenalty::{G1, G2, G3};
        let v = match self {
            Method::Pc1 => BaiNgVariant::new(Pc, G1),
            Method::Pc2 => BaiNgVariant::new(Pc, G2),
            Method::Pc3 => BaiNgVariant::new(Pc, G3),
            Method::Ic1 => BaiNgVariant::new(Ic, G1),
            Method::Ic2 => BaiNgVariant::new(Ic, G2),
            Method::Ic3 => BaiNgVariant::new(Ic, G3),
            _ => return None,
        };
        Some(v)
    }

    /// Parses a comma-separated list such as `ACT,ER,IC3`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let methods = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Method>>>()?;
        if methods.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == upper)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Tuning shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub r_max: usize,
    /// Required when ED is requested; there is no default.
    pub ed_threshold: Option<f64>,
    pub on_r_min: usize,
    pub act: ActOptions,
    /// Feed every method this basis instead of its default.
    pub basis_override: Option<Basis>,
}

impl EstimatorParams {
    pub fn new(r_max: usize) -> Self {
        Self {
            r_max,
            ed_threshold: None,
            on_r_min: 0,
            act: ActOptions::default(),
            basis_override: None,
        }
    }

    pub fn basis_for(&self, method: Method) -> Basis {
        self.basis_override.unwrap_or(method.default_basis())
    }

    /// Rejects parameter combinations that would fail on every dataset.
    pub fn validate(&self, methods: &[Method]) -> Result<()> {
        if methods.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        if self.r_max == 0 {
            return Err(Error::Config("r_max must be at least 1".into()));
        }
        if methods.contains(&Method::Ed) {
            match self.ed_threshold {
                Some(s) if s > 0.0 => {}
                Some(s) => {
                    return Err(Error::Config(format!(
                        "ED threshold must be positive, got {s}"
                    )))
                }
                None => return Err(Error::Config("ED requires an explicit threshold".into())),
            }
        }
        if methods.contains(&Method::On) && self.on_r_min >= self.r_max {
            return Err(Error::Config(format!(
                "ON r_min = {} must be below r_max = {}",
                self.on_r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Eigenvalues of both sample matrices of one dataset; either may be
/// absent when no requested method needs it.
#[derive(Debug, Clone, Default)]
pub struct SampleSpectra {
    pub covariance: Option<Spectrum>,
    pub correlation: Option<Spectrum>,
}

impl SampleSpectra {
    pub fn get(&self, basis: Basis) -> Option<&Spectrum> {
        match basis {
            Basis::Covariance => self.covariance.as_ref(),
            Basis::Correlation => self.correlation.as_ref(),
        }
    }
}

/// Runs one estimator on a spectrum computed from `n` observations.
pub fn evaluate(
    method: Method,
    spec: &Spectrum,
    n: usize,
    params: &EstimatorParams,
) -> Result<usize> {
    let r_max = params.r_max;
    match method {
        Method::Act => Ok(adjust_eigenvalues_with(spec, n, r_max, params.act)?.estimate()),
        Method::Er => er_estimate(spec, r_max),
        Method::Gr => gr_estimate(spec, r_max),
        Method::Ed => {
            let s = params
                .ed_threshold
                .ok_or_else(|| Error::Config("ED requires an explicit threshold".into()))?;
            ed_estimate(spec, s, r_max)
        }
        Method::On => on_estimate(spec, params.on_r_min, r_max),
        Method::Kaiser => Ok(naive_kaiser_estimate(spec)),
        bai_ng => bai_ng_estimate(
            spec,
            n,
            bai_ng.bai_ng().expect("remaining methods are Bai-Ng"),
            r_max,
        ),
    }
}

/// Runs `method` on whichever spectrum `params` routes it to.
pub fn evaluate_on(
    method: Method,
    spectra: &SampleSpectra,
    n: usize,
    params: &EstimatorParams,
) -> Result<usize> {
    let basis = params.basis_for(method);
    let spec = spectra
        .get(basis)
        .ok_or_else(|| Error::Config(format!("{method} needs the {basis:?} spectrum")))?;
    evaluate(method, spec, n, params)
}
