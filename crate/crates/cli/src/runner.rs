//! Executes the analyses requested by a scenario.
//!
//! The protocol trace is computed once and shared; analyses and sweep grids
//! run on the current rayon pool and are collected in request order, so the
//! report does not depend on the number of workers.

use std::collections::BTreeMap;

use rayon::prelude::*;

use qecqm_core::codes::{
    build_span, check_kl_conditions, decompose_generator, effective_generator, hs_achievable, prop1_codespaces,
    DEFAULT_KL_TOL, SPAN_DROP_TOL,
};
use qecqm_core::metrology::{qfi, running_exponents, scaling_exponent};
use qecqm_core::protocol::{run_protocol, ProtocolTrace};
use qecqm_core::separability::{ppt_check, vidal_tarrach_state, vidal_tarrach_threshold, Bipartition, PPT_TOL};
use qecqm_core::{numerical_rank, pauli, trace_distance, EvolutionConfig, Method, Operator};

use crate::config::{Analysis, Issue, ScenarioConfig};
use crate::report::{AnalysisOutput, AnalysisResult, Cell, Provenance, RunReport, Table};
use crate::scenario::Scenario;

/// Largest RK4 step used by the integrator cross-check.
pub const RK4_CHECK_STEP: f64 = 1e-3;
/// Trace-distance bound between the two integrators.
pub const INTEGRATOR_TOL: f64 = 1e-8;

type Outcome = Result<AnalysisOutput, String>;

/// Validates and runs a config.
pub fn run_config(cfg: &ScenarioConfig) -> Result<RunReport, Vec<Issue>> {
    Ok(run_scenario(&Scenario::build(cfg)?))
}

pub fn run_scenario(sc: &Scenario) -> RunReport {
    let cfg = &sc.config;
    let needs_trace = cfg.outputs.iter().any(|a| a.needs_trace())
        || (cfg.outputs.contains(&Analysis::Separability) && cfg.initial_state.vidal_tarrach.is_some());
    let trace = needs_trace.then(|| {
        log::info!("{}: running {} rounds", sc.name(), cfg.kappa);
        protocol_trace(sc, sc.evolution).map_err(|e| format!("protocol run failed: {e}"))
    });
    let analyses = cfg
        .outputs
        .par_iter()
        .map(|&a| AnalysisResult {
            name: a.as_str().to_string(),
            outcome: run_analysis(a, sc, trace.as_ref()),
        })
        .collect();
    RunReport {
        scenario: cfg.name.clone(),
        provenance: Provenance::of(cfg),
        analyses,
    }
}

fn protocol_trace(sc: &Scenario, evolution: EvolutionConfig) -> qecqm_core::Result<ProtocolTrace> {
    run_protocol(&sc.rho0, &sc.model, &sc.protocol, &evolution, sc.config.kappa)
}

fn run_analysis(a: Analysis, sc: &Scenario, trace: Option<&Result<ProtocolTrace, String>>) -> Outcome {
    let trace = || -> Result<&ProtocolTrace, String> {
        match trace {
            Some(Ok(t)) => Ok(t),
            Some(Err(e)) => Err(e.clone()),
            None => Err("protocol trace was not computed".into()),
        }
    };
    match a {
        Analysis::Trace => trace_analysis(sc, trace()?),
        Analysis::Qfi => qfi_analysis(sc, trace()?),
        Analysis::Scaling => scaling_analysis(sc, trace()?),
        Analysis::Separability => separability_analysis(sc, trace().ok()),
        Analysis::KlReport => kl_analysis(sc),
        Analysis::SpanReport => span_analysis(sc),
        Analysis::RoundError => round_error_analysis(sc),
        Analysis::IntegratorCheck => integrator_analysis(sc),
    }
}

fn err(context: &str) -> impl Fn(qecqm_core::Error) -> String + '_ {
    move |e| format!("{context}: {e}")
}

fn output(table: Table, summary: Vec<(&str, Cell)>) -> Outcome {
    let summary: BTreeMap<String, Cell> = summary.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    Ok(AnalysisOutput { table, summary })
}

fn expectation(rho: &Operator, op: &Operator) -> f64 {
    (rho * op).trace().re
}

fn trace_analysis(sc: &Scenario, tr: &ProtocolTrace) -> Outcome {
    let mut t = Table::new(&[
        "round",
        "t",
        "ideal_distance",
        "purity",
        "min_pt_eigenvalue",
        "ancilla_purity",
        "bloch_x",
        "bloch_y",
        "bloch_z",
    ]);
    let qubit = sc.protocol.probe_dim == 2;
    for k in sc.trace_rounds() {
        let r = &tr.records[k - 1];
        let bloch = |p: Operator| if qubit { expectation(r.probe.op(), &p) } else { f64::NAN };
        t.push(vec![
            r.round.into(),
            r.time.into(),
            r.ideal_distance.into(),
            r.probe.purity().into(),
            r.min_pt_eigenvalue.into(),
            r.ancilla.purity().into(),
            bloch(pauli::x()).into(),
            bloch(pauli::y()).into(),
            bloch(pauli::z()).into(),
        ]);
    }
    let last = tr.records.last().ok_or("empty trace")?;
    let max_dist = tr.records.iter().map(|r| r.ideal_distance).fold(0.0, f64::max);
    output(
        t,
        vec![
            ("rounds", tr.len().into()),
            ("final_ideal_distance", last.ideal_distance.into()),
            ("max_ideal_distance", max_dist.into()),
            ("final_purity", last.probe.purity().into()),
            ("min_pt_eigenvalue", tr.min_pt_eigenvalue().into()),
        ],
    )
}

/// `(round, t, F)` at the sampled rounds, plus the reference QFI of the
/// initial state.
fn fisher_samples(sc: &Scenario, tr: &ProtocolTrace) -> Result<(Vec<(usize, f64, qecqm_core::metrology::QfiResult)>, f64), String> {
    let g = sc.reference_generator();
    let i_ref = qfi(&sc.rho0, g, 1.0).map_err(err("reference QFI"))?.i_value;
    let samples = sc
        .sample_rounds()
        .into_iter()
        .map(|k| {
            let r = &tr.records[k - 1];
            qfi(&r.probe, g, r.time)
                .map(|q| (k, r.time, q))
                .map_err(err(&format!("QFI at round {k}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((samples, i_ref))
}

fn max_rel_dev(samples: &[(usize, f64, qecqm_core::metrology::QfiResult)], i_ref: f64) -> f64 {
    if i_ref <= 0.0 {
        return f64::NAN;
    }
    samples
        .iter()
        .map(|(_, t, q)| (q.fisher - t * t * i_ref).abs() / (t * t * i_ref))
        .fold(0.0, f64::max)
}

fn qfi_analysis(sc: &Scenario, tr: &ProtocolTrace) -> Outcome {
    let (samples, i_ref) = fisher_samples(sc, tr)?;
    let mut t = Table::new(&[
        "round",
        "t",
        "i_value",
        "fisher",
        "skipped_pairs",
        "i_reference",
        "fisher_reference",
    ]);
    for (k, time, q) in &samples {
        t.push(vec![
            (*k).into(),
            (*time).into(),
            q.i_value.into(),
            q.fisher.into(),
            q.skipped_pairs.into(),
            i_ref.into(),
            (time * time * i_ref).into(),
        ]);
    }
    let last = samples.last().ok_or("no sample times")?;
    output(
        t,
        vec![
            ("i_reference", i_ref.into()),
            ("final_i_value", last.2.i_value.into()),
            ("final_fisher", last.2.fisher.into()),
            ("max_rel_dev_from_reference", max_rel_dev(&samples, i_ref).into()),
        ],
    )
}

fn scaling_analysis(sc: &Scenario, tr: &ProtocolTrace) -> Outcome {
    let (samples, i_ref) = fisher_samples(sc, tr)?;
    let points: Vec<(f64, f64)> = samples.iter().map(|(_, t, q)| (*t, q.fisher)).collect();
    let running = running_exponents(&points);
    let mut t = Table::new(&["t", "fisher", "exponent_running"]);
    for ((time, f), e) in points.iter().zip(&running) {
        t.push(vec![(*time).into(), (*f).into(), (*e).into()]);
    }
    let fit = scaling_exponent(&points).map_err(err("scaling fit"))?;
    output(
        t,
        vec![
            ("exponent", fit.exponent.into()),
            ("intercept", fit.intercept.into()),
            ("r_squared", fit.r_squared.into()),
            ("points", points.len().into()),
            ("t_min", points[0].0.into()),
            ("t_max", points[points.len() - 1].0.into()),
            ("max_rel_dev_from_reference", max_rel_dev(&samples, i_ref).into()),
        ],
    )
}

fn separability_analysis(sc: &Scenario, tr: Option<&ProtocolTrace>) -> Outcome {
    let cfg = &sc.config;
    let vt = cfg.initial_state.vidal_tarrach;
    let thetas = match (&cfg.sweeps.theta, vt) {
        (v, _) if !v.is_empty() => v.clone(),
        (_, Some(vt)) => vec![vt.theta],
        _ => return Err("no theta values to scan".into()),
    };
    let ss = match (&cfg.sweeps.s, vt) {
        (v, _) if !v.is_empty() => v.clone(),
        (_, Some(vt)) => vec![vt.s],
        _ => return Err("no s values to scan".into()),
    };
    let grid: Vec<(f64, f64)> = thetas.iter().flat_map(|&th| ss.iter().map(move |&s| (th, s))).collect();
    let cut = Bipartition::pair(0, 1).map_err(err("bipartition"))?;
    let verdicts = grid
        .par_iter()
        .map(|&(th, s)| {
            vidal_tarrach_state(th, s)
                .and_then(|st| ppt_check(&st, &cut))
                .map_err(err(&format!("theta = {th}, s = {s}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["theta", "s", "min_pt_eigenvalue", "ppt"]);
    for (&(th, s), v) in grid.iter().zip(&verdicts) {
        t.push(vec![th.into(), s.into(), v.min_pt_eigenvalue.into(), v.ppt.into()]);
    }
    let mut summary = vec![
        ("points", grid.len().into()),
        ("ppt_points", verdicts.iter().filter(|v| v.ppt).count().into()),
    ];
    if let Some(vt) = vt {
        summary.push(("threshold", vidal_tarrach_threshold(vt.theta).into()));
        if let Some(tr) = tr {
            let m = tr.min_pt_eigenvalue();
            summary.push(("protocol_min_pt_eigenvalue", m.into()));
            summary.push(("protocol_ppt", (m >= -PPT_TOL).into()));
        }
    }
    output(t, summary)
}

fn kl_analysis(sc: &Scenario) -> Outcome {
    let model = &sc.model;
    let span = build_span(model.dim(), model.jumps()).map_err(err("span"))?;
    let dec = decompose_generator(model.generator(), &span).map_err(err("decomposition"))?;
    let (plus, minus, combined) = prop1_codespaces(&dec).map_err(err("codespaces"))?;
    let lambda = dec.spectrum.as_ref().map_or(f64::NAN, |s| s.lambda);
    let mut t = Table::new(&["code", "operator", "sector", "mu_re", "mu_im", "residual", "cross_sector"]);
    let mut summary = vec![("lambda", lambda.into())];
    for (name, cs) in [("plus", &plus), ("minus", &minus), ("combined", &combined)] {
        let rep = check_kl_conditions(cs, model.jumps(), DEFAULT_KL_TOL).map_err(err(name))?;
        for r in &rep.records {
            t.push(vec![
                name.into(),
                r.tag.clone().into(),
                r.sector.into(),
                r.mu.re.into(),
                r.mu.im.into(),
                r.residual.into(),
                r.cross_sector.into(),
            ]);
        }
        let (p, m) = match name {
            "plus" => ("plus_passed", "plus_max_residual"),
            "minus" => ("minus_passed", "minus_max_residual"),
            _ => ("combined_passed", "combined_max_residual"),
        };
        summary.push((p, rep.passed.into()));
        summary.push((m, rep.max_residual().into()));
    }
    let eff = effective_generator(&plus, model.generator()).map_err(err("effective generator"))?;
    summary.push(("effective_gap", eff.gap.into()));
    summary.push(("effective_gap_over_lambda", (eff.gap / lambda).into()));
    summary.push(("tolerance", DEFAULT_KL_TOL.into()));
    output(t, summary)
}

fn span_analysis(sc: &Scenario) -> Outcome {
    let model = &sc.model;
    let g = model.generator();
    let span = build_span(model.dim(), model.jumps()).map_err(err("span"))?;
    let dec = decompose_generator(g, &span).map_err(err("decomposition"))?;
    let mut t = Table::new(&["index", "generator", "residual_norm", "independent"]);
    for (i, ((tag, _), &n)) in span.raw_generators.iter().zip(&span.residual_norms).enumerate() {
        t.push(vec![i.into(), tag.clone().into(), n.into(), (n > SPAN_DROP_TOL).into()]);
    }
    let mut summary = vec![
        ("span_dimension", span.dimension().into()),
        ("generator_norm", g.frobenius_norm().into()),
        ("perp_norm", dec.perp_norm.into()),
        ("perp_rank", dec.perp_rank.into()),
        ("lambda", dec.spectrum.as_ref().map_or(f64::NAN, |s| s.lambda).into()),
        (
            "hs_achievable",
            hs_achievable(g, &span, 1e-10).map_err(err("hs check"))?.into(),
        ),
    ];
    if let Some(l) = &sc.noise_source {
        summary.push(("generator_trace_abs", g.trace().norm().into()));
        summary.push(("generator_rank", numerical_rank(g, 1e-9).into()));
        summary.push(("noise_overlap_abs", (g * l).trace().norm().into()));
    }
    output(t, summary)
}

fn round_error_analysis(sc: &Scenario) -> Outcome {
    let grid = &sc.config.sweeps.dt;
    let base = sc.evolution;
    let dists = grid
        .par_iter()
        .map(|&dt| {
            let cfg = EvolutionConfig::new(dt, base.substeps, base.method).map_err(err("round duration"))?;
            let tr = run_protocol(&sc.rho0, &sc.model, &sc.protocol, &cfg, 1).map_err(err(&format!("dt = {dt}")))?;
            Ok(tr.records[0].ideal_distance)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let mut t = Table::new(&["dt", "distance", "local_order"]);
    for (i, (&dt, &d)) in grid.iter().zip(&dists).enumerate() {
        let local = if i == 0 {
            f64::NAN
        } else {
            (d / dists[i - 1]).ln() / (dt / grid[i - 1]).ln()
        };
        t.push(vec![dt.into(), d.into(), local.into()]);
    }
    let pts: Vec<(f64, f64)> = grid.iter().copied().zip(dists.iter().copied()).collect();
    let fit = scaling_exponent(&pts).map_err(err("order fit"))?;
    output(
        t,
        vec![("order", fit.exponent.into()), ("r_squared", fit.r_squared.into())],
    )
}

/// RK4 substeps used against the exponential integrator for a round of
/// length `dt`.
pub fn rk4_check_substeps(dt: f64, configured: usize) -> usize {
    configured.max((dt / RK4_CHECK_STEP).ceil() as usize)
}

/// Largest joint-state trace distance between RK4 and the Liouvillian
/// exponential over a full protocol run, per round.
pub fn integrator_distances(sc: &Scenario) -> Result<(Vec<f64>, usize), String> {
    let dt = sc.evolution.dt;
    let substeps = rk4_check_substeps(dt, sc.evolution.substeps);
    let expm = EvolutionConfig::new(dt, 1, Method::LiouvillianExponential).map_err(err("expm config"))?;
    let rk4 = EvolutionConfig::new(dt, substeps, Method::RungeKutta4).map_err(err("rk4 config"))?;
    let (a, b) = rayon::join(|| protocol_trace(sc, expm), || protocol_trace(sc, rk4));
    let (a, b) = (a.map_err(err("expm run"))?, b.map_err(err("rk4 run"))?);
    let d = a
        .records
        .iter()
        .zip(&b.records)
        .map(|(x, y)| trace_distance(x.joint.op(), y.joint.op()).map_err(err("trace distance")))
        .collect::<Result<Vec<f64>, String>>()?;
    Ok((d, substeps))
}

fn integrator_analysis(sc: &Scenario) -> Outcome {
    let (d, substeps) = integrator_distances(sc)?;
    let mut t = Table::new(&["round", "t", "distance"]);
    for k in sc.trace_rounds() {
        t.push(vec![k.into(), (k as f64 * sc.evolution.dt).into(), d[k - 1].into()]);
    }
    let max = d.iter().copied().fold(0.0, f64::max);
    output(
        t,
        vec![
            ("max_distance", max.into()),
            ("rk4_substeps", substeps.into()),
            ("tolerance", INTEGRATOR_TOL.into()),
            ("passed", (max <= INTEGRATOR_TOL).into()),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run(text: &str) -> RunReport {
        run_config(&parse_config(text.as_bytes()).unwrap()).unwrap()
    }

    #[test]
    fn empty_outputs_give_provenance_only() {
        let rep = run(
            r#"
name = "bare"
kappa = 3
dt = 0.1
initial_state = "+"
[model]
generator = "Z"
"#,
        );
        assert!(rep.analyses.is_empty());
        assert_eq!(rep.provenance.config_hash.len(), 64);
        assert_eq!(rep.provenance.seed, 0);
    }

    #[test]
    fn failing_analysis_does_not_stop_the_rest() {
        // rank-0 generator: no codespace, but the trace still runs
        let rep = run(
            r#"
name = "inside"
kappa = 5
dt = 0.1
outputs = ["kl_report", "trace"]
initial_state = "+"
[model]
generator = "X"
jumps = ["X"]
"#,
        );
        assert!(rep.get("kl_report").unwrap().outcome.is_err());
        assert!(rep.get("trace").unwrap().outcome.is_ok());
        assert_eq!(rep.errors().count(), 1);
    }

    #[test]
    fn noiseless_trace_matches_the_unitary() {
        let rep = run(
            r#"
name = "free"
kappa = 20
dt = 0.05
outputs = ["trace", "qfi"]
initial_state = "+"
[model]
generator = "Z"
theta = 0.7
"#,
        );
        let t = &rep.get("trace").unwrap().output().unwrap().table;
        let times = t.floats("t").unwrap();
        let bx = t.floats("bloch_x").unwrap();
        let by = t.floats("bloch_y").unwrap();
        for ((time, x), y) in times.iter().zip(&bx).zip(&by) {
            // e^{-iθtZ}|+⟩ has Bloch vector (cos 2θt, sin 2θt, 0)
            assert!((x - (1.4 * time).cos()).abs() < 1e-12);
            assert!((y - (1.4 * time).sin()).abs() < 1e-12);
        }
        let q = rep.get("qfi").unwrap();
        assert!(q.summary_f64("max_rel_dev_from_reference").unwrap() < 1e-12);
    }
}
