//! File formats, knowledge loading, report export and the `netsight`
//! command line on top of `netsight-core`.

pub mod cli;
pub mod config;
pub mod export;
pub mod knowledge_io;
pub mod manifest;

use netsight_core::analyzers::OccupancyEstimate;
use netsight_core::knowledge::KnowledgeBundle;
use netsight_core::pipeline::{run_pipeline, PipelineError, PipelineRun};
use netsight_core::policy::{evaluate_policies, sort_violations, PolicyInputs, PolicyRule, Violation};
use netsight_core::topology::{
    build_l2, build_l3, infer_dependencies, infer_gateways, mark_gateways, report_resiliency, tag_roles,
};

pub use config::AnalysisConfig;
pub use export::TopologyReport;

/// One capture run through the chain, the policies and every analytic.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Profiles carry their violations.
    pub run: PipelineRun,
    pub violations: Vec<Violation>,
    pub occupancy: Vec<OccupancyEstimate>,
    pub topology: TopologyReport,
}

pub fn analyze(
    capture: &[u8],
    cfg: &AnalysisConfig,
    knowledge: &KnowledgeBundle,
    rules: &[PolicyRule],
) -> Result<Analysis, PipelineError> {
    let mut run = run_pipeline(capture, &cfg.chain, knowledge)?;
    let inputs = PolicyInputs {
        events: &run.events,
        flows: &run.flows,
        resolver: &run.resolver,
    };
    let mut violations = evaluate_policies(rules, &run.profiles, inputs, knowledge);
    sort_violations(&mut violations);
    run.profiles.attach_violations(&violations);
    let occupancy = run.occupancy(&knowledge.registry, cfg.occupancy_window_secs);

    let mut l2 = build_l2(&run.observations);
    let gateways = infer_gateways(&run.observations, cfg.topology.gw_k);
    mark_gateways(&mut l2, &gateways);
    let mut l3 = build_l3(&run.flows, &run.resolver);
    let dependencies = infer_dependencies(&run.events, &run.flows, &run.resolver, cfg.topology.min_evidence);
    tag_roles(&mut l3, &dependencies);
    let resiliency = report_resiliency(&l3, &dependencies, &cfg.topology);
    Ok(Analysis {
        run,
        violations,
        occupancy,
        topology: TopologyReport {
            l2,
            l3,
            dependencies,
            resiliency,
        },
    })
}

/// Report files by name, as `analyze` writes them (manifest aside).
pub fn render_reports(a: &Analysis) -> Vec<(&'static str, String)> {
    vec![
        ("profiles.ndjson", export::profiles_ndjson(&a.run.profiles)),
        ("violations.ndjson", export::violations_ndjson(&a.violations)),
        ("topology.json", export::topology_json(&a.topology)),
        ("topology.dot", export::topology_dot(&a.topology)),
        ("resiliency.ndjson", export::resiliency_ndjson(&a.topology.resiliency)),
        ("occupancy.ndjson", export::occupancy_ndjson(&a.occupancy)),
    ]
}
