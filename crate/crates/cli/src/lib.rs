//! Library layer behind the `relucert` command line: query execution, the
//! mode cascade, robustness suites and the MIP export path.

pub mod formats;

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use formats::{
    ConfigEcho, Dataset, ModeBounds, Property, PropertyKind, Query, Report, SkippedPoint,
    SuiteModeSummary, SuiteReport, Verdict, Witness,
};
use relucert_core::bounds::{
    analyze, AlphaPolicy, EngineConfig, EngineStats, LinearObjective, Mode, Side,
    SymbolicLinearForm,
};
use relucert_core::errormin::{back_substitute, ErrorTerm, NeuronBudget};
use relucert_core::mip::export_lp_text;
use relucert_core::network::{BoxDomain, Network};
use relucert_core::rng::SplitMix64;

pub const TOOL_NAME: &str = "relucert";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Points probed when hunting for a property-violating witness.
const WITNESS_SAMPLES: usize = 1024;

/// How the `--mode` flag resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Single(Mode),
    /// Interval, then symbolic, then minimip, then deepmip; stop at the
    /// first stage whose bound decides the property.
    Cascade,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub choice: ModeChoice,
    /// Run all four modes and report their bounds side by side.
    pub compare: bool,
    pub seed: u64,
    pub workers: usize,
    /// Include per-layer neuron bounds in the report.
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            engine: EngineConfig::default(),
            choice: ModeChoice::Cascade,
            compare: false,
            seed: 0,
            workers: 0,
            verbose: false,
        }
    }
}

impl RunConfig {
    fn engine_for(&self, mode: Mode) -> EngineConfig {
        EngineConfig {
            mode,
            ..self.engine.clone()
        }
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            mode: match self.choice {
                ModeChoice::Single(m) => m.name().to_string(),
                ModeChoice::Cascade => "cascade".to_string(),
            },
            alpha: alpha_name(&self.engine.alpha),
            mip_budget_ms: self.engine.mip_budget_ms,
            concretization: self.engine.concretization,
            tolerance: self.engine.tolerance,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

fn alpha_name(alpha: &AlphaPolicy) -> String {
    match alpha {
        AlphaPolicy::CrownHeuristic => "crown".into(),
        AlphaPolicy::FixedZero => "zero".into(),
        AlphaPolicy::FixedOne => "one".into(),
        AlphaPolicy::Explicit(_) => "explicit".into(),
    }
}

fn property_holds(p: &Property, lower: f64, upper: f64) -> bool {
    match p.kind {
        PropertyKind::MaxLeq => upper <= p.threshold,
        PropertyKind::MinGeq => lower >= p.threshold,
    }
}

/// Execute one query: compute bounds in the selected mode (or the cascade),
/// decide the property, and search for a sampled counterexample when the
/// verdict stays unknown.
pub fn run_query(net: &Network, query: &Query, rc: &RunConfig) -> Result<Report> {
    let dom = query.domain.to_box(None).context("invalid query domain")?;
    if dom.len() != net.input_dim {
        bail!(
            "query domain has {} coordinates, network expects {}",
            dom.len(),
            net.input_dim
        );
    }
    let objective: LinearObjective = (&query.objective).into();
    if objective.coeffs.len() != net.output_dim() {
        bail!(
            "objective has {} coefficients, network has {} outputs",
            objective.coeffs.len(),
            net.output_dim()
        );
    }

    let modes: Vec<Mode> = match (rc.compare, rc.choice) {
        (true, _) | (false, ModeChoice::Cascade) => Mode::ALL.to_vec(),
        (false, ModeChoice::Single(m)) => vec![m],
    };
    let early_stop = !rc.compare && rc.choice == ModeChoice::Cascade;

    let total_start = Instant::now();
    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    let mut stats = EngineStats::default();
    let mut objective_bounds = Vec::new();
    let mut decided_by = None;
    let mut last_bounds = None;

    for mode in modes {
        let t0 = Instant::now();
        let analysis = analyze(net, &dom, &objective, &rc.engine_for(mode))
            .map_err(|e| anyhow!("bound computation failed: {e}"))?;
        timings.insert(
            format!("mode.{}", mode.name()),
            t0.elapsed().as_secs_f64() * 1e3,
        );
        stats.absorb(analysis.stats);
        objective_bounds.push(ModeBounds {
            mode,
            lower: analysis.objective_lower,
            upper: analysis.objective_upper,
        });
        let holds = query
            .property
            .as_ref()
            .is_some_and(|p| property_holds(p, analysis.objective_lower, analysis.objective_upper));
        last_bounds = Some(analysis.bounds);
        if holds && decided_by.is_none() {
            decided_by = Some(mode);
            if early_stop {
                break;
            }
        }
    }

    let verdict = query.property.as_ref().map(|_| {
        if decided_by.is_some() {
            Verdict::Holds
        } else {
            Verdict::Unknown
        }
    });

    let witness = match (&query.property, verdict) {
        (Some(p), Some(Verdict::Unknown)) => find_witness(net, &dom, &objective, p, rc.seed),
        _ => None,
    };

    timings.insert("total".into(), total_start.elapsed().as_secs_f64() * 1e3);
    Ok(Report {
        tool: TOOL_NAME.into(),
        version: VERSION.into(),
        config: rc.echo(),
        verdict,
        decided_by,
        objective_bounds,
        property: query.property.clone(),
        witness,
        layer_bounds: if rc.verbose { last_bounds } else { None },
        mip_stats: stats,
        timings_ms: timings,
    })
}

/// Deterministic sampling for a concrete input that violates the property.
/// A hit never flips the verdict to "violated" (the engine is incomplete and
/// only certifies); it is attached to the Unknown report as evidence.
fn find_witness(
    net: &Network,
    dom: &BoxDomain,
    objective: &LinearObjective,
    property: &Property,
    seed: u64,
) -> Option<Witness> {
    let mut rng = SplitMix64::new(seed);
    let dim = dom.len();
    let mut worst: Option<Witness> = None;
    let mut consider = |point: Vec<f64>, net: &Network| {
        let out = net.forward(&point).expect("witness sample arity");
        let v = objective.evaluate(&out);
        let violates = match property.kind {
            PropertyKind::MaxLeq => v > property.threshold,
            PropertyKind::MinGeq => v < property.threshold,
        };
        if violates {
            let more_extreme = match (&worst, property.kind) {
                (None, _) => true,
                (Some(w), PropertyKind::MaxLeq) => v > w.objective,
                (Some(w), PropertyKind::MinGeq) => v < w.objective,
            };
            if more_extreme {
                worst = Some(Witness {
                    point,
                    objective: v,
                });
            }
        }
    };

    consider(dom.center(), net);
    let mut emitted = 1;
    if dim <= 12 {
        for mask in 0..(1usize << dim) {
            if emitted >= WITNESS_SAMPLES {
                break;
            }
            let vertex = (0..dim)
                .map(|j| {
                    if mask & (1 << j) != 0 {
                        dom.upper[j]
                    } else {
                        dom.lower[j]
                    }
                })
                .collect();
            consider(vertex, net);
            emitted += 1;
        }
    }
    while emitted < WITNESS_SAMPLES {
        let point = (0..dim)
            .map(|j| rng.uniform(dom.lower[j], dom.upper[j]))
            .collect();
        consider(point, net);
        emitted += 1;
    }
    worst
}

/// Predicted label: output argmax, ties to the lowest index.
pub fn classify(net: &Network, point: &[f64]) -> Result<usize> {
    let out = net
        .forward(point)
        .map_err(|e| anyhow!("classification failed: {e}"))?;
    let mut best = 0;
    for (i, v) in out.iter().enumerate() {
        if *v > out[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Robustness of one labeled point at radius `epsilon` in one mode: the
/// margin `logit_label - logit_other` must certify `>= 0` for every
/// competitor label.
fn point_robust(
    net: &Network,
    x: &[f64],
    label: usize,
    epsilon: f64,
    valid: Option<&BoxDomain>,
    cfg: &EngineConfig,
    deadline_ms: Option<u64>,
) -> Result<bool> {
    let dom = BoxDomain::ball(x, epsilon, valid).context("epsilon box")?;
    let start = Instant::now();
    for other in 0..net.output_dim() {
        if other == label {
            continue;
        }
        if let Some(limit) = deadline_ms {
            if start.elapsed().as_millis() as u64 > limit {
                return Ok(false); // per-query timeout: undecided, not solved
            }
        }
        let objective = LinearObjective::margin(net, label, other);
        let analysis = analyze(net, &dom, &objective, cfg)
            .map_err(|e| anyhow!("bound computation failed: {e}"))?;
        if analysis.objective_lower < 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Run the robustness suite over a labeled dataset for each requested mode.
/// Misclassified points are skipped with a note and never counted.
pub fn run_robustness_suite(
    net: &Network,
    dataset: &Dataset,
    epsilon: f64,
    modes: &[Mode],
    rc: &RunConfig,
    per_query_timeout_ms: Option<u64>,
) -> Result<SuiteReport> {
    let valid = dataset
        .valid_range
        .as_ref()
        .map(|r| r.to_box())
        .transpose()?;
    let mut attempted_points = Vec::new();
    let mut skipped = Vec::new();
    for (i, p) in dataset.points.iter().enumerate() {
        if p.label >= net.output_dim() {
            bail!(
                "point {i} has label {} but the network has {} outputs",
                p.label,
                net.output_dim()
            );
        }
        let predicted = classify(net, &p.x)?;
        if predicted == p.label {
            attempted_points.push(p);
        } else {
            skipped.push(SkippedPoint {
                index: i,
                note: format!("misclassified as {predicted}, labeled {}", p.label),
            });
        }
    }

    let mut summaries = Vec::with_capacity(modes.len());
    for &mode in modes {
        let cfg = rc.engine_for(mode);
        let t_mode = Instant::now();
        let outcomes: Vec<Result<(bool, f64)>> = attempted_points
            .par_iter()
            .map(|p| {
                let t0 = Instant::now();
                let solved = point_robust(
                    net,
                    &p.x,
                    p.label,
                    epsilon,
                    valid.as_ref(),
                    &cfg,
                    per_query_timeout_ms,
                )?;
                Ok((solved, t0.elapsed().as_secs_f64() * 1e3))
            })
            .collect();
        let mut solved = 0;
        let mut per_point_ms = 0.0;
        for o in outcomes {
            let (ok, ms) = o?;
            solved += usize::from(ok);
            per_point_ms += ms;
        }
        let attempted = attempted_points.len();
        summaries.push(SuiteModeSummary {
            mode,
            solved,
            attempted,
            skipped_misclassified: skipped.len(),
            mean_time_ms: if attempted == 0 {
                0.0
            } else {
                per_point_ms / attempted as f64
            },
            total_time_ms: t_mode.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(SuiteReport {
        tool: TOOL_NAME.into(),
        version: VERSION.into(),
        epsilon,
        config: rc.echo(),
        summaries,
        skipped,
    })
}

/// Assemble the relaxation-error subproblem of activation layer `layer` seen
/// while upper-bounding the query objective, without running any MIP. Bounds
/// for earlier layers come from the same zero-budget pass, so they equal the
/// symbolic-mode bounds.
pub fn error_term_for_export(net: &Network, query: &Query, layer: usize) -> Result<ErrorTerm> {
    let dom = query.domain.to_box(None).context("invalid query domain")?;
    let objective: LinearObjective = (&query.objective).into();
    if objective.coeffs.len() != net.output_dim() {
        bail!(
            "objective has {} coefficients, network has {} outputs",
            objective.coeffs.len(),
            net.output_dim()
        );
    }
    let cfg = EngineConfig {
        mode: Mode::DeepMip,
        mip_budget_ms: 0,
        ..EngineConfig::default()
    };
    let (bounds, _) = relucert_core::bounds::compute_all_bounds(net, &dom, &cfg)
        .map_err(|e| anyhow!("bound computation failed: {e}"))?;
    let form =
        SymbolicLinearForm::over_post(net.depth(), objective.coeffs.clone(), objective.constant);
    let budget = NeuronBudget::start(0);
    let outcome = back_substitute(net, &bounds, form, Side::Upper, &cfg, &budget)
        .map_err(|e| anyhow!("back-substitution failed: {e}"))?;
    outcome
        .error_terms
        .into_iter()
        .find(|t| t.layer_index == layer)
        .ok_or_else(|| anyhow!("no relaxation error term arises at layer {layer} for this query"))
}

/// LP-format text of the layer-`layer` error subproblem for the query.
pub fn export_error_term_lp(net: &Network, query: &Query, layer: usize) -> Result<String> {
    Ok(export_lp_text(
        &error_term_for_export(net, query, layer)?.problem,
    ))
}
