//! Named experiment families, each sweeping one independent variable over a
//! base configuration.

use super::config::{ChannelMode, ExperimentConfig, UseCase};
use crate::error::{Error, Result};

pub const SCENARIOS: [&str; 5] = [
    "fig2_stepsizes",
    "fig3_beta_caseB",
    "fig4_beta_caseA",
    "fig5_dualset",
    "fig6_timing",
];

/// One configuration of a scenario; `label` names its output subdirectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMember {
    pub label: String,
    pub config: ExperimentConfig,
}

/// Use case a scenario sweeps.
pub fn scenario_use_case(name: &str) -> Result<UseCase> {
    match name {
        "fig2_stepsizes" | "fig3_beta_caseB" | "fig6_timing" => Ok(UseCase::Fdma),
        "fig4_beta_caseA" | "fig5_dualset" => Ok(UseCase::SmartGrid),
        _ => Err(unknown(name)),
    }
}

fn unknown(name: &str) -> Error {
    Error::UnknownScenario {
        name: name.to_string(),
        valid: SCENARIOS.join(", "),
    }
}

/// Expands scenario `name` over `base`. `base` must be of the scenario's use
/// case; every member differs from it only in the swept fields.
pub fn scenario(name: &str, base: &ExperimentConfig) -> Result<Vec<ScenarioMember>> {
    let wanted = scenario_use_case(name)?;
    if base.use_case_kind() != wanted {
        return Err(Error::config(
            "use_case",
            format!("scenario `{name}` needs a `{}` config", wanted.name()),
        ));
    }
    let with = |label: String, edit: &dyn Fn(&mut ExperimentConfig)| {
        let mut config = base.clone();
        edit(&mut config);
        ScenarioMember { label, config }
    };
    let members = match name {
        "fig2_stepsizes" => [1e5, 1e4, 1e3]
            .into_iter()
            .map(|c2| {
                with(format!("step_1_over_{c2:e}_plus_k"), &|c| {
                    c.step_c1 = 1.0;
                    c.step_c2 = c2;
                })
            })
            .collect(),
        "fig3_beta_caseB" => beta_sweep(&with, &[1e4, 1e8, 1e10]),
        "fig4_beta_caseA" => beta_sweep(&with, &[1e4, 1e6, 1e8]),
        "fig5_dualset" => [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (5.0, 5.0)]
            .into_iter()
            .map(|(zeta, theta)| {
                with(format!("zeta_{zeta}_theta_{theta}"), &|c| {
                    c.zeta = zeta;
                    c.theta = theta;
                })
            })
            .collect(),
        "fig6_timing" => [ChannelMode::Aircomp, ChannelMode::ErrorFree]
            .into_iter()
            .map(|mode| with(mode.name().to_string(), &|c| c.channel = mode))
            .collect(),
        _ => return Err(unknown(name)),
    };
    Ok(members)
}

type MemberBuilder<'a> = dyn Fn(String, &dyn Fn(&mut ExperimentConfig)) -> ScenarioMember + 'a;

fn beta_sweep(
    with: &MemberBuilder,
    betas: &[f64],
) -> Vec<ScenarioMember> {
    betas
        .iter()
        .map(|&beta| with(format!("beta_{beta:e}"), &|c| c.beta = beta))
        .collect()
}
