//! Estimation budgets. `paper` keeps the full-size protocol; `fast` is a
//! reduced budget for workstation-scale runs.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::ecm::EcmConfig;
use crate::error::{Error, Result};
use crate::hsic::{HsicMethod, DEFAULT_PERMUTATIONS};
use crate::optim::{BayesOptConfig, CmaSettings, FitConfig};
use crate::splines::{DEFAULT_P, DEFAULT_Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Fast,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Fast => "fast",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "fast" => Ok(Profile::Fast),
            other => Err(Error::Config(format!("unknown profile '{other}' (expected paper or fast)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub profile: Profile,
    pub bo: BayesOptConfig,
    pub fit: FitConfig,
    pub ecm: EcmConfig,
    pub hsic_method: HsicMethod,
    pub hsic_permutations: usize,
    /// Add the Gaussian marginal log-likelihood of the standardized cause to
    /// each direction's score. Identical across directions, so decisions are
    /// unaffected.
    pub include_marginals: bool,
}

impl EstimationConfig {
    pub fn paper() -> Self {
        let cma = CmaSettings { population: 100, initial_step: 1.0, max_iters: 5000, ..CmaSettings::default() };
        Self {
            profile: Profile::Paper,
            bo: BayesOptConfig::default(),
            fit: FitConfig { q: DEFAULT_Q, p: DEFAULT_P, cma, cv_cma: cma, extra_random_starts: 0 },
            ecm: EcmConfig { max_iters: 5000, tol: 1e-6, cma, lambda_from_new_psi: false, work_budget: None },
            hsic_method: HsicMethod::Gamma,
            hsic_permutations: DEFAULT_PERMUTATIONS,
            include_marginals: false,
        }
    }

    pub fn fast() -> Self {
        Self {
            profile: Profile::Fast,
            bo: BayesOptConfig { folds: 4, lhs_candidates: 12, ei_candidates: 6, ..BayesOptConfig::default() },
            fit: FitConfig {
                q: DEFAULT_Q,
                p: DEFAULT_P,
                cma: CmaSettings { population: 30, initial_step: 1.0, max_iters: 500, ..CmaSettings::default() },
                cv_cma: CmaSettings { population: 14, initial_step: 0.5, max_iters: 150, ..CmaSettings::default() },
                extra_random_starts: 0,
            },
            ecm: EcmConfig {
                max_iters: 300,
                tol: 1e-6,
                cma: CmaSettings { population: 8, initial_step: 0.2, max_iters: 40, ..CmaSettings::default() },
                lambda_from_new_psi: false,
                work_budget: None,
            },
            hsic_method: HsicMethod::Gamma,
            hsic_permutations: DEFAULT_PERMUTATIONS,
            include_marginals: false,
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Fast => Self::fast(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bo.validate()?;
        if self.fit.q < 4 || self.fit.p < 4 {
            return Err(Error::Config(format!("spline dimensions must be >= 4, got q={}, p={}", self.fit.q, self.fit.p)));
        }
        for s in [&self.fit.cma, &self.fit.cv_cma, &self.ecm.cma] {
            if s.population < 4 {
                return Err(Error::Config(format!("CMA-ES population must be >= 4, got {}", s.population)));
            }
        }
        if !(self.ecm.tol > 0.0) {
            return Err(Error::Config("ECM tolerance must be positive".into()));
        }
        Ok(())
    }
}
