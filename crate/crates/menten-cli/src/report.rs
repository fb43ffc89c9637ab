//! Versioned JSON run report.

use serde::{Deserialize, Serialize};

use menten::kinetics::{derive_constants, DerivedConstants};
use menten::ode::Method;

use crate::config::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

/// Echo of the parameters a command actually ran with.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEcho {
    pub name: String,
    pub k1: f64,
    pub k_minus1: f64,
    pub k2: f64,
    #[serde(rename = "E_T")]
    pub e_t: f64,
    #[serde(rename = "X_T")]
    pub x_t: f64,
    #[serde(rename = "X0")]
    pub x0: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub horizon: f64,
    pub method: String,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedEcho {
    #[serde(rename = "K_M")]
    pub k_m: f64,
    #[serde(rename = "K_D")]
    pub k_d: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub eps_hta: f64,
    pub eps_ss: f64,
    pub eps_tq: f64,
}

/// Top-level report written next to every dataset.
///
/// Runs on raw nondimensional parameters carry no kinetic scenario; both
/// echo blocks are null there and the parameters live in `metrics`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    /// Stem used for artifact file names.
    pub name: String,
    pub scenario: Option<ScenarioEcho>,
    pub derived: Option<DerivedEcho>,
    pub warnings: Vec<String>,
    /// Command-specific metric tables.
    pub metrics: serde_json::Value,
    /// Files this run wrote, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, scenario: &Scenario) -> Self {
        let d: DerivedConstants = derive_constants(&scenario.rates, &scenario.totals);
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            name: scenario.name.clone(),
            scenario: Some(ScenarioEcho {
                name: scenario.name.clone(),
                k1: scenario.rates.k1,
                k_minus1: scenario.rates.k_minus1,
                k2: scenario.rates.k2,
                e_t: scenario.totals.e_t,
                x_t: scenario.totals.x_t,
                x0: scenario.x0,
                c0: scenario.c0,
                horizon: scenario.effective_horizon(),
                method: match scenario.solver.method {
                    Method::ExplicitAdaptive => "explicit".to_string(),
                    Method::ImplicitStiff => "implicit".to_string(),
                },
                rtol: scenario.solver.rtol,
                atol: scenario.solver.atol,
            }),
            derived: Some(DerivedEcho {
                k_m: d.k_m,
                k_d: d.k_d,
                k: d.k,
                eps_hta: d.eps_hta,
                eps_ss: d.eps_ss,
                eps_tq: d.eps_tq,
            }),
            warnings: scenario.caption_warnings(),
            metrics: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    /// Report for a run defined by raw nondimensional parameters.
    pub fn without_scenario(command: &str, name: &str) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            name: name.to_string(),
            scenario: None,
            derived: None,
            warnings: Vec::new(),
            metrics: serde_json::Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
