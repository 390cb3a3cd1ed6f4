//! Resolution of a [`ScenarioConfig`] into core objects.

use qecqm_core::codes::{build_span, construct_generator_from_noise, decompose_generator, CodeLabel};
use qecqm_core::protocol::{separable_input_probe, AncillaRefresh, RoundEntry, RoundProtocol};
use qecqm_core::{kets, pauli, sampling, DensityState, EvolutionConfig, Ket, LindbladModel, Method, Operator, C64};

use crate::config::{
    Analysis, CodeName, Entry, Issue, MethodName, OperatorSpec, OperatorTable, ProtocolName, Refresh,
    ScenarioConfig, StateSpec,
};

/// Hermiticity tolerance for configured generators.
const HERMITIAN_TOL: f64 = 1e-12;
/// How far a sample time may sit from a round boundary, in units of `dt`.
const ROUND_SNAP_TOL: f64 = 1e-6;

/// A validated scenario with everything the runner needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: LindbladModel,
    pub rho0: DensityState,
    pub protocol: RoundProtocol,
    pub evolution: EvolutionConfig,
    /// The noise operator the generator was built from, when the generator
    /// is `from_noise`.
    pub noise_source: Option<Operator>,
}

impl Scenario {
    /// Resolves every part of the config, reporting all problems at once.
    pub fn build(cfg: &ScenarioConfig) -> Result<Scenario, Vec<Issue>> {
        let mut issues = Vec::new();
        check_scalars(cfg, &mut issues);

        let mut rng = sampling::rng(cfg.seed);
        let jumps: Vec<Option<Operator>> = cfg
            .model
            .jumps
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                resolve_operator(spec, &mut rng)
                    .map_err(|m| issues.push(Issue::new(format!("model.jumps[{k}]"), m)))
                    .ok()
            })
            .collect();

        let mut noise_source = None;
        let generator = match &cfg.model.generator {
            OperatorSpec::Named(n) if n == "from_noise" => match jumps.first() {
                Some(Some(l)) => {
                    let d = l.dim();
                    let traceless = l - &Operator::identity(d).scale(l.trace() / d as f64);
                    noise_source = Some(traceless.clone());
                    construct_generator_from_noise(&traceless, cfg.seed)
                        .map_err(|e| issues.push(Issue::new("model.generator", e.to_string())))
                        .ok()
                }
                Some(None) => None,
                None => {
                    issues.push(Issue::new("model.generator", "from_noise needs at least one jump operator"));
                    None
                }
            },
            spec => match resolve_operator(spec, &mut rng) {
                Ok(g) if !g.is_hermitian(HERMITIAN_TOL) => {
                    issues.push(Issue::new(
                        "model.generator",
                        format!("generator must be Hermitian (deviation {:e})", g.hermiticity_error()),
                    ));
                    None
                }
                Ok(g) => Some(g),
                Err(m) => {
                    issues.push(Issue::new("model.generator", m));
                    None
                }
            },
        };

        let model = match (&generator, jumps.iter().all(Option::is_some)) {
            (Some(g), true) => {
                let jumps: Vec<Operator> = jumps.into_iter().flatten().collect();
                let mut ok = true;
                for (k, l) in jumps.iter().enumerate() {
                    if l.dim() != g.dim() {
                        issues.push(Issue::new(
                            format!("model.jumps[{k}]"),
                            format!("dimension {} does not match the generator's {}", l.dim(), g.dim()),
                        ));
                        ok = false;
                    }
                }
                if ok && cfg.model.theta.is_finite() {
                    LindbladModel::new(g.clone(), cfg.model.theta, jumps)
                        .map_err(|e| issues.push(Issue::new("model", e.to_string())))
                        .ok()
                } else {
                    None
                }
            }
            _ => None,
        };

        let white_noise = cfg.initial_state.vidal_tarrach.map(|vt| vt.s);
        let state_ok = check_state_shape(&cfg.initial_state, &mut issues);
        let rho0 = model
            .as_ref()
            .filter(|_| state_ok)
            .and_then(|m| resolve_state(&cfg.initial_state, m, &mut issues));
        let protocol = model.as_ref().and_then(|m| build_protocol(cfg, m, white_noise, &mut issues));
        check_analyses(cfg, &mut issues);

        // placeholders keep construction infallible; bad values are already issues
        let dt = if cfg.dt > 0.0 && cfg.dt.is_finite() { cfg.dt } else { 1.0 };
        let evolution = EvolutionConfig::new(dt, cfg.integrator.substeps.max(1), method(cfg.integrator.method))
            .expect("sanitized inputs");

        if !issues.is_empty() {
            return Err(issues);
        }
        Ok(Scenario {
            config: cfg.clone(),
            model: model.expect("no issues"),
            rho0: rho0.expect("no issues"),
            protocol: protocol.expect("no issues"),
            evolution,
            noise_source,
        })
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    /// Generator of the noiseless reference: the protocol's effective
    /// generator when it has one, otherwise the model's.
    pub fn reference_generator(&self) -> &Operator {
        self.protocol
            .ideal_generator
            .as_ref()
            .unwrap_or_else(|| self.model.generator())
    }

    /// Rounds sampled by the `qfi` and `scaling` analyses.
    pub fn sample_rounds(&self) -> Vec<usize> {
        let cfg = &self.config;
        if cfg.sweeps.t.is_empty() {
            stride_rounds(cfg.kappa, cfg.trace_stride)
        } else {
            cfg.sweeps.t.iter().map(|&t| (t / cfg.dt).round() as usize).collect()
        }
    }

    /// Rounds kept by per-round tables.
    pub fn trace_rounds(&self) -> Vec<usize> {
        stride_rounds(self.config.kappa, self.config.trace_stride)
    }
}

fn stride_rounds(kappa: usize, stride: usize) -> Vec<usize> {
    (1..=kappa).filter(|k| k % stride == 0 || *k == kappa).collect()
}

pub(crate) fn method(m: MethodName) -> Method {
    match m {
        MethodName::Expm => Method::LiouvillianExponential,
        MethodName::Rk4 => Method::RungeKutta4,
    }
}

fn check_scalars(cfg: &ScenarioConfig, issues: &mut Vec<Issue>) {
    if cfg.name.is_empty() || !cfg.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        issues.push(Issue::new("name", "must be non-empty and use only letters, digits, '_' and '-'"));
    }
    if cfg.seed > i64::MAX as u64 {
        issues.push(Issue::new("seed", "must fit in a signed 64-bit integer"));
    }
    if cfg.kappa == 0 {
        issues.push(Issue::new("kappa", "must be at least 1"));
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        issues.push(Issue::new("dt", format!("must be positive and finite, got {}", cfg.dt)));
    }
    if cfg.trace_stride == 0 {
        issues.push(Issue::new("trace_stride", "must be at least 1"));
    }
    if !cfg.model.theta.is_finite() {
        issues.push(Issue::new("model.theta", "must be finite"));
    }
    if cfg.integrator.substeps == 0 {
        issues.push(Issue::new("integrator.substeps", "must be at least 1"));
    }
    let sweeps = &cfg.sweeps;
    let horizon = cfg.kappa as f64 * cfg.dt;
    for (i, &t) in sweeps.t.iter().enumerate() {
        let field = format!("sweeps.t[{i}]");
        if !(t > 0.0 && t <= horizon * (1.0 + 1e-12)) {
            issues.push(Issue::new(field, format!("must lie in (0, kappa*dt] = (0, {horizon}]")));
        } else if cfg.dt > 0.0 && ((t / cfg.dt) - (t / cfg.dt).round()).abs() > ROUND_SNAP_TOL {
            issues.push(Issue::new(field, format!("{t} is not a multiple of dt = {}", cfg.dt)));
        }
    }
    if sweeps.t.windows(2).any(|w| !(w[1] > w[0])) {
        issues.push(Issue::new("sweeps.t", "must be strictly increasing"));
    }
    for (i, &dt) in sweeps.dt.iter().enumerate() {
        if !(dt > 0.0 && dt.is_finite()) {
            issues.push(Issue::new(format!("sweeps.dt[{i}]"), "must be positive and finite"));
        }
    }
    for (i, &s) in sweeps.s.iter().enumerate() {
        if !(s >= 0.0 && s.is_finite()) {
            issues.push(Issue::new(format!("sweeps.s[{i}]"), "must be non-negative and finite"));
        }
    }
    for (i, &th) in sweeps.theta.iter().enumerate() {
        if !th.is_finite() {
            issues.push(Issue::new(format!("sweeps.theta[{i}]"), "must be finite"));
        }
    }
}

fn check_analyses(cfg: &ScenarioConfig, issues: &mut Vec<Issue>) {
    let mut seen = std::collections::BTreeSet::new();
    for a in &cfg.outputs {
        if !seen.insert(*a) {
            issues.push(Issue::new("outputs", format!("'{a}' is listed twice")));
        }
    }
    let vt = cfg.initial_state.vidal_tarrach.is_some();
    if seen.contains(&Analysis::Separability)
        && !vt
        && (cfg.sweeps.s.is_empty() || cfg.sweeps.theta.is_empty())
    {
        issues.push(Issue::new(
            "sweeps",
            "separability needs sweeps.s and sweeps.theta, or a vidal_tarrach initial state",
        ));
    }
    if seen.contains(&Analysis::RoundError) && cfg.sweeps.dt.len() < 4 {
        issues.push(Issue::new("sweeps.dt", "round_error needs at least 4 round durations"));
    }
    if seen.contains(&Analysis::Scaling) && cfg.kappa > 0 && cfg.trace_stride > 0 {
        let n = if cfg.sweeps.t.is_empty() {
            stride_rounds(cfg.kappa, cfg.trace_stride).len()
        } else {
            cfg.sweeps.t.len()
        };
        if n < 4 {
            issues.push(Issue::new("sweeps.t", format!("scaling needs at least 4 sample times, got {n}")));
        }
    }
}

fn named_operator(name: &str) -> Result<Operator, String> {
    let sm = || Operator::outer(&kets::zero(), &kets::one());
    match name {
        "I" => Ok(pauli::identity()),
        "X" => Ok(pauli::x()),
        "Y" => Ok(pauli::y()),
        "Z" => Ok(pauli::z()),
        "sigma_minus" => Ok(sm()),
        "sigma_plus" => Ok(sm().adjoint()),
        "from_noise" => Err("from_noise is only valid as the generator".into()),
        other => Err(format!(
            "unknown operator '{other}' (known: I, X, Y, Z, sigma_minus, sigma_plus, from_noise)"
        )),
    }
}

fn resolve_operator(spec: &OperatorSpec, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Operator, String> {
    match spec {
        OperatorSpec::Named(n) => named_operator(n),
        OperatorSpec::Detailed(t) => resolve_table(t, rng),
    }
}

fn resolve_table(t: &OperatorTable, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Operator, String> {
    let set = [t.name.is_some(), t.pauli.is_some(), t.matrix.is_some(), t.random_traceless.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if set != 1 {
        return Err("set exactly one of name, pauli, matrix, random_traceless".into());
    }
    let op = if let Some(n) = &t.name {
        named_operator(n)?
    } else if let Some(p) = t.pauli {
        if p.iter().any(|c| !c.is_finite()) {
            return Err("pauli coefficients must be finite".into());
        }
        pauli::dot(p)
    } else if let Some(rows) = &t.matrix {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
            return Err(format!("matrix must be square and non-empty, got row lengths {shape:?}"));
        }
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|e| match *e {
                        Entry::Real(x) => C64::new(x, 0.0),
                        Entry::Complex([re, im]) => C64::new(re, im),
                    })
                    .collect()
            })
            .collect();
        if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err("matrix entries must be finite".into());
        }
        Operator::from_rows(&rows).map_err(|e| e.to_string())?
    } else {
        let d = t.random_traceless.expect("checked");
        if !(2..=16).contains(&d) {
            return Err(format!("random_traceless dimension must be in 2..=16, got {d}"));
        }
        sampling::random_traceless(d, rng)
    };
    match t.scale {
        Some(s) if !s.is_finite() => Err("scale must be finite".into()),
        Some(s) => Ok(op.scale_real(s)),
        None => Ok(op),
    }
}

const KET_NAMES: [&str; 7] = ["0", "1", "+", "-", "+i", "-i", "c+"];

/// Checks that do not need the model.
fn check_state_shape(spec: &StateSpec, issues: &mut Vec<Issue>) -> bool {
    let set = [
        spec.ket.is_some(),
        spec.bloch.is_some(),
        spec.angle.is_some(),
        spec.basis.is_some(),
        spec.vidal_tarrach.is_some(),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if set != 1 {
        issues.push(Issue::new(
            "initial_state",
            "set exactly one of ket, bloch, angle, basis, vidal_tarrach",
        ));
        return false;
    }
    match &spec.ket {
        Some(k) if !KET_NAMES.contains(&k.as_str()) => {
            issues.push(Issue::new(
                "initial_state.ket",
                format!("unknown ket '{k}' (known: {})", KET_NAMES.join(", ")),
            ));
            false
        }
        _ => true,
    }
}

fn resolve_state(spec: &StateSpec, model: &LindbladModel, issues: &mut Vec<Issue>) -> Option<DensityState> {
    let d = model.dim();
    let mut fail = |field: &str, msg: String| {
        issues.push(Issue::new(format!("initial_state.{field}"), msg));
        None
    };
    let qubit_only = |field: &str| (d != 2).then(|| format!("{field} needs a qubit probe, the model has dimension {d}"));

    let pure = |v: Ket| DensityState::pure(&v, vec![d]).ok();
    if let Some(name) = &spec.ket {
        if name == "c+" {
            let span = build_span(d, model.jumps()).ok()?;
            let dec = decompose_generator(model.generator(), &span).ok()?;
            return match dec.spectrum {
                Some(sp) => pure(kets::normalized(sp.c0 + sp.c1).ok()?),
                None => fail(
                    "ket",
                    format!("c+ needs a rank-2 generator component outside the noise span (rank {})", dec.perp_rank),
                ),
            };
        }
        if let Some(m) = qubit_only("ket") {
            return fail("ket", m);
        }
        let v = match name.as_str() {
            "0" => kets::zero(),
            "1" => kets::one(),
            "+" => kets::plus(),
            "-" => kets::minus(),
            "+i" => kets::plus_i(),
            "-i" => kets::minus_i(),
            _ => unreachable!("ket names are checked first"),
        };
        return pure(v);
    }
    if let Some(r) = spec.bloch {
        if let Some(m) = qubit_only("bloch") {
            return fail("bloch", m);
        }
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n <= 1.0 + 1e-12) {
            return fail("bloch", format!("Bloch vector must have length at most 1, got {n}"));
        }
        let op = (&pauli::identity() + &pauli::dot(r)).scale_real(0.5);
        return match DensityState::new(op, vec![2]) {
            Ok(s) => Some(s),
            Err(e) => fail("bloch", e.to_string()),
        };
    }
    if let Some(a) = spec.angle {
        if let Some(m) = qubit_only("angle") {
            return fail("angle", m);
        }
        if !a.is_finite() {
            return fail("angle", "must be finite".into());
        }
        return pure(kets::angle(a));
    }
    if let Some(k) = spec.basis {
        if k >= d {
            return fail("basis", format!("index {k} out of range for dimension {d}"));
        }
        return pure(kets::basis(d, k));
    }
    let vt = spec.vidal_tarrach.expect("exactly one set");
    if let Some(m) = qubit_only("vidal_tarrach") {
        return fail("vidal_tarrach", m);
    }
    if !vt.theta.is_finite() {
        return fail("vidal_tarrach.theta", "must be finite".into());
    }
    match separable_input_probe(vt.theta, vt.s) {
        Ok(s) => Some(s),
        Err(e) => fail("vidal_tarrach.s", e.to_string()),
    }
}

fn build_protocol(
    cfg: &ScenarioConfig,
    model: &LindbladModel,
    white_noise: Option<f64>,
    issues: &mut Vec<Issue>,
) -> Option<RoundProtocol> {
    let spec = &cfg.protocol;
    if spec.code.is_some() && spec.kind != ProtocolName::Prop1Projective {
        issues.push(Issue::new("protocol.code", "only meaningful for prop1_projective"));
    }
    let base = match spec.kind {
        ProtocolName::None => Ok(RoundProtocol::none(model.dim())),
        ProtocolName::CnotPropagation => RoundProtocol::cnot_propagation_for(model),
        ProtocolName::Prop1Projective => {
            let Some(code) = spec.code else {
                issues.push(Issue::new("protocol.code", "prop1_projective needs code = plus, minus or combined"));
                return None;
            };
            let label = match code {
                CodeName::Plus => CodeLabel::PlusSector,
                CodeName::Minus => CodeLabel::MinusSector,
                CodeName::Combined => CodeLabel::Combined,
            };
            RoundProtocol::prop1_projective(model, label)
        }
    };
    let refresh = match spec.refresh {
        Refresh::Fresh => AncillaRefresh::FreshEachRound,
        Refresh::Persistent => AncillaRefresh::Persistent,
    };
    let built = base.and_then(|p| {
        let p = p.with_refresh(refresh);
        match white_noise {
            Some(s) => p.with_entry(RoundEntry::WhiteNoise { s }),
            None => Ok(p),
        }
    });
    match built.and_then(|p| p.validate().map(|_| p)) {
        Ok(p) => Some(p),
        Err(e) => {
            issues.push(Issue::new("protocol.kind", e.to_string()));
            None
        }
    }
}
