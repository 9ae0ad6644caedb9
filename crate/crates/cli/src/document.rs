//! JSON documents written and read by the command line tool.

use serde::{Deserialize, Serialize};

use qlode::continuation::PeriodicSolution;
use qlode::ode::{PhasePoint, ProblemParams};
use qlode::verify::VerificationReport;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub q: f64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub period: f64,
}

impl From<&ProblemParams> for Params {
    fn from(p: &ProblemParams) -> Self {
        Self {
            q: p.q(),
            mu: p.mu(),
            period: p.period(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub t: f64,
    pub u: f64,
    pub du: f64,
}

/// One solution, sampled on `t_j = j T / N` with its maximum at `T/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub schema_version: u32,
    pub params: Params,
    pub branch_k: u32,
    pub u_max: f64,
    pub u_min: f64,
    pub energy: f64,
    pub zero_count: usize,
    pub verification: VerificationReport,
    pub samples: Vec<Sample>,
}

impl SolutionDocument {
    pub fn new(sol: &PeriodicSolution, verification: VerificationReport) -> Self {
        let n = sol.grid_size();
        let h = sol.grid_step();
        let samples = (0..n)
            .map(|j| {
                let x = sol.profile[(j + n / 2) % n];
                Sample {
                    t: j as f64 * h,
                    u: x.u,
                    du: x.v,
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            params: Params::from(&sol.params),
            branch_k: sol.k,
            u_max: sol.a,
            u_min: sol.u_min,
            energy: sol.energy,
            zero_count: sol.zero_count,
            verification,
            samples,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: Self =
            serde_json::from_str(text).map_err(|e| CliError::Malformed(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Malformed(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Ok(doc)
    }

    /// Rebuild the solution from the samples alone; stored summaries are ignored.
    pub fn to_solution(&self) -> Result<PeriodicSolution, CliError> {
        let Params { q, mu, period } = self.params;
        let params = ProblemParams::new(q, mu, period)
            .map_err(|e| CliError::Malformed(format!("params: {e}")))?;
        let n = self.samples.len();
        if n < 2 {
            return Err(CliError::Malformed("fewer than two samples".into()));
        }
        let h = period / n as f64;
        for (j, s) in self.samples.iter().enumerate() {
            if !(s.t.is_finite() && s.u.is_finite() && s.du.is_finite()) {
                return Err(CliError::Malformed(format!("non-finite sample {j}")));
            }
            if (s.t - j as f64 * h).abs() > 1e-9 * period {
                return Err(CliError::Malformed(format!(
                    "sample {j} at t = {} is off the uniform grid",
                    s.t
                )));
            }
        }
        let profile = self
            .samples
            .iter()
            .map(|s| PhasePoint::new(s.u, s.du))
            .collect();
        PeriodicSolution::from_samples(params, self.branch_k, profile)
            .map_err(|e| CliError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchStatus {
    pub k: u32,
    pub status: String,
    pub zero_count: Option<usize>,
    pub u_max: Option<f64>,
    pub u_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDocument {
    pub schema_version: u32,
    pub params: Params,
    pub lower_bound: u32,
    pub found: usize,
    pub branches: Vec<BranchStatus>,
}

/// Fixed 17 significant digits, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}
