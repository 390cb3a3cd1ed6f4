//! Round-by-round simulation of sequential error-corrected sensing.
//!
//! Each round applies an instantaneous encoding unitary to probe ⊗ ancilla,
//! lets the probe evolve under the Lindblad model for `dt`, applies the
//! recovery channel and the decoding unitary. Ancillae are noiseless.
//! Subsystem indices are 0-based: the probe is subsystem 0.

use nalgebra::DMatrix;

use crate::algebra::{
    embed, kets, partial_trace_op, pauli, permute_subsystems, tensor_product, trace_distance, unitary_exp,
    DensityState, Ket, Operator, C64,
};
use crate::codes::{
    build_span, combined_recovery, decompose_generator, kl_recovery, prop1_codespaces, CodeLabel,
};
use crate::error::{domain, precondition, Error, Result};
use crate::lindblad::{EvolutionConfig, LindbladModel, Propagator};
use crate::separability::min_pt_eigenvalue;

/// `U_CNOT` on `n` qubits, qubit 0 being the most significant tensor factor.
pub fn cnot(control: usize, target: usize, n_qubits: usize) -> Result<Operator> {
    if control == target {
        return Err(domain("control and target must differ"));
    }
    if control >= n_qubits || target >= n_qubits {
        return Err(domain(format!(
            "qubit index out of range: control {control}, target {target}, {n_qubits} qubits"
        )));
    }
    let d = 1usize << n_qubits;
    let cbit = 1usize << (n_qubits - 1 - control);
    let tbit = 1usize << (n_qubits - 1 - target);
    let mut m = DMatrix::<C64>::zeros(d, d);
    for col in 0..d {
        let row = if col & cbit != 0 { col ^ tbit } else { col };
        m[(row, col)] = C64::new(1.0, 0.0);
    }
    Operator::from_matrix(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    None,
    CnotPropagation,
    Prop1Projective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AncillaRefresh {
    /// The used ancilla is traced out and a fresh one appended every round.
    FreshEachRound,
    /// One ancilla is kept for the whole run.
    Persistent,
}

/// How the two-party state entering a round is assembled from the probe
/// marginal `ρ_p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RoundEntry {
    /// `ρ_p ⊗ |a⟩⟨a|`
    Product,
    /// `(ρ_p − 2w I) ⊗ |a⟩⟨a| + w I` with `w = s / (2 d_p (1+s))`: white
    /// noise of weight `s/(1+s)` spread over probe and fresh ancilla while
    /// the probe marginal is kept.
    WhiteNoise { s: f64 },
}

/// Gates, recovery and ancilla handling of one round. The ancilla is a qubit.
#[derive(Clone, Debug)]
pub struct RoundProtocol {
    pub kind: ProtocolKind,
    pub probe_dim: usize,
    pub encode: Option<Operator>,
    pub decode: Option<Operator>,
    pub recovery: Option<Vec<Operator>>,
    pub ancilla_refresh: AncillaRefresh,
    pub ancilla_init: Ket,
    pub entry: RoundEntry,
    /// Probe-level unitary mapping the standard `X`/`Z` axes to the noise and
    /// signal axes; identity for the untilted protocol.
    pub frame: Operator,
    /// Generator of the noiseless reference evolution; `None` uses the
    /// model's generator.
    pub ideal_generator: Option<Operator>,
}

impl RoundProtocol {
    /// No control: the probe evolves freely next to an idle ancilla.
    pub fn none(probe_dim: usize) -> Self {
        Self {
            kind: ProtocolKind::None,
            probe_dim,
            encode: None,
            decode: None,
            recovery: None,
            ancilla_refresh: AncillaRefresh::FreshEachRound,
            ancilla_init: kets::zero(),
            entry: RoundEntry::Product,
            frame: Operator::identity(probe_dim),
            ideal_generator: None,
        }
    }

    /// `E = CNOT(0→1)`, `D = CNOT(1→0)·CNOT(0→1)`, fresh `|0⟩` ancilla.
    pub fn cnot_propagation() -> Self {
        let e = cnot(0, 1, 2).expect("valid");
        let d = &cnot(1, 0, 2).expect("valid") * &e;
        Self {
            kind: ProtocolKind::CnotPropagation,
            encode: Some(e),
            decode: Some(d),
            ..Self::none(2)
        }
    }

    /// The CNOT protocol rotated to a qubit model with a single noise axis
    /// `L ∝ αI + â·σ`: bit flips along `â` move to the ancilla while the
    /// signal component perpendicular to `â` accumulates.
    pub fn cnot_propagation_for(model: &LindbladModel) -> Result<Self> {
        if model.dim() != 2 || model.jumps().len() != 1 {
            return Err(precondition("the CNOT protocol needs a qubit probe with exactly one jump operator"));
        }
        let (_, c) = pauli::decompose(&model.jumps()[0]).expect("qubit operator");
        let axis = real_axis(&c).ok_or_else(|| {
            precondition("the CNOT protocol needs a jump operator proportional to αI + â·σ with real â")
        })?;
        let (_, gc) = pauli::decompose(model.generator()).expect("qubit operator");
        let g: [f64; 3] = [gc[0].re, gc[1].re, gc[2].re];
        let along = dot(&g, &axis);
        let perp = [g[0] - along * axis[0], g[1] - along * axis[1], g[2] - along * axis[2]];
        let pn = dot(&perp, &perp).sqrt();
        if pn <= 1e-10 {
            return Err(precondition(
                "generator lies in the Lindblad span of the noise; no first-order protection is possible",
            ));
        }
        let b = [perp[0] / pn, perp[1] / pn, perp[2] / pn];
        let standard = (axis[0].abs() - 1.0).abs() <= 1e-12 && (b[2] - 1.0).abs() <= 1e-12;
        if standard {
            return Ok(Self {
                ideal_generator: Some(pauli::dot(perp)),
                ..Self::cnot_propagation()
            });
        }
        let w = frame_unitary(&axis, &b);
        let wl = embed(&w, 0, &[2, 2])?;
        let base = Self::cnot_propagation();
        let conj = |op: &Operator| op.conjugate_by(&wl);
        Ok(Self {
            encode: base.encode.as_ref().map(conj),
            decode: base.decode.as_ref().map(conj),
            frame: w,
            ideal_generator: Some(pauli::dot(perp)),
            ..base
        })
    }

    /// Two-qubit code built from the component of the generator outside the
    /// Lindblad span. The encoding applies `Z` to the ancilla on `|c₁⟩`, so a
    /// `|+⟩` ancilla lands in `{c₀+, c₁−}` and a `|−⟩` ancilla in
    /// `{c₀−, c₁+}`. The combined label uses the sector-wise recovery.
    pub fn prop1_projective(model: &LindbladModel, label: CodeLabel) -> Result<Self> {
        let d = model.dim();
        let span = build_span(d, model.jumps())?;
        let dec = decompose_generator(model.generator(), &span)?;
        let (plus, minus, combined) = prop1_codespaces(&dec)?;
        let spectrum = dec.spectrum.as_ref().expect("rank 2");
        let mut errors = vec![Operator::identity(d)];
        errors.extend(model.jumps().iter().cloned());
        let (recovery, ancilla) = match label {
            CodeLabel::PlusSector => (kl_recovery(&plus, &errors)?, kets::plus()),
            CodeLabel::MinusSector => (kl_recovery(&minus, &errors)?, kets::minus()),
            CodeLabel::Combined => (combined_recovery(&combined, &errors)?, kets::plus()),
            CodeLabel::Custom => return Err(domain("prop1_projective takes the plus, minus or combined label")),
        };
        let p1 = Operator::projector(&spectrum.c1);
        let encode = &tensor_product(&(&Operator::identity(d) - &p1), &Operator::identity(2))
            + &tensor_product(&p1, &pauli::z());
        Ok(Self {
            kind: ProtocolKind::Prop1Projective,
            probe_dim: d,
            decode: Some(encode.adjoint()),
            encode: Some(encode),
            recovery: Some(recovery),
            ancilla_refresh: AncillaRefresh::FreshEachRound,
            ancilla_init: ancilla,
            entry: RoundEntry::Product,
            frame: Operator::identity(d),
            ideal_generator: Some(dec.g_perp),
        })
    }

    /// CNOT protocol whose rounds start from the white-noise mixture.
    pub fn white_noise(s: f64) -> Result<Self> {
        Self::cnot_propagation().with_entry(RoundEntry::WhiteNoise { s })
    }

    pub fn with_entry(self, entry: RoundEntry) -> Result<Self> {
        if let RoundEntry::WhiteNoise { s } = entry {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(domain(format!("white-noise weight s must be finite and non-negative, got {s}")));
            }
        }
        Ok(Self { entry, ..self })
    }

    pub fn with_refresh(self, ancilla_refresh: AncillaRefresh) -> Self {
        Self { ancilla_refresh, ..self }
    }

    pub fn joint_dims(&self) -> [usize; 2] {
        [self.probe_dim, 2]
    }

    pub fn validate(&self) -> Result<()> {
        let jd = 2 * self.probe_dim;
        for (name, g) in [("encode", &self.encode), ("decode", &self.decode)] {
            if let Some(u) = g {
                if u.dim() != jd {
                    return Err(domain(format!("{name} gate has dimension {}, expected {jd}", u.dim())));
                }
                let err = u.unitarity_error();
                if err > 1e-10 {
                    return Err(domain(format!("{name} gate is not unitary (error {err:e})")));
                }
            }
        }
        if let Some(ks) = &self.recovery {
            if ks.iter().any(|k| k.dim() != jd) {
                return Err(domain("recovery Kraus operators do not act on probe ⊗ ancilla"));
            }
            let s = ks.iter().fold(Operator::zeros(jd), |acc, k| acc + &k.adjoint() * k);
            let err = (&s - &Operator::identity(jd)).max_abs();
            if err > 1e-9 {
                return Err(domain(format!("recovery is not trace preserving (error {err:e})")));
            }
        }
        if self.ancilla_init.len() != 2 || (self.ancilla_init.norm() - 1.0).abs() > 1e-12 {
            return Err(domain("ancilla initial state must be a normalized qubit vector"));
        }
        if self.frame.dim() != self.probe_dim {
            return Err(domain("frame unitary must act on the probe"));
        }
        Ok(())
    }

    fn ancilla_projector(&self) -> Operator {
        Operator::projector(&self.ancilla_init)
    }

    /// Two-party state at the start of a round.
    fn entry_state(&self, probe: &Operator) -> Result<Operator> {
        let a = self.ancilla_projector();
        match self.entry {
            RoundEntry::Product => Ok(tensor_product(probe, &a)),
            RoundEntry::WhiteNoise { s } => {
                let d = self.probe_dim;
                let w = s / (2.0 * d as f64 * (1.0 + s));
                let core = probe - &Operator::identity(d).scale_real(2.0 * w);
                let min = crate::algebra::eig_unchecked(&core).min();
                if min < -1e-10 {
                    return Err(precondition(format!(
                        "probe marginal has too little white noise for weight s = {s} (ρ − 2wI has eigenvalue {min:e})"
                    )));
                }
                Ok(&tensor_product(&core, &a) + &Operator::identity(2 * d).scale_real(w))
            }
        }
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Unit real direction of a Pauli coefficient vector that is real up to a
/// global phase.
fn real_axis(c: &[C64; 3]) -> Option<[f64; 3]> {
    let big = c.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    if big.norm() <= 1e-12 {
        return None;
    }
    let phase = big / big.norm();
    let r: Vec<C64> = c.iter().map(|z| z / phase).collect();
    if r.iter().any(|z| z.im.abs() > 1e-10 * big.norm()) {
        return None;
    }
    let n = r.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    Some([r[0].re / n, r[1].re / n, r[2].re / n])
}

/// Unitary `W` with `W X W† = â·σ` and `W Z W† = b̂·σ` for orthonormal `â, b̂`.
fn frame_unitary(a: &[f64; 3], b: &[f64; 3]) -> Operator {
    let bs = crate::algebra::eig_unchecked(&pauli::dot(*b));
    let (w0, w1) = (bs.eigenvectors[1].clone(), bs.eigenvectors[0].clone());
    let off = pauli::dot(*a).apply(&w1);
    let phase = w0.dotc(&off);
    let w1 = w1 * (phase.conj() / phase.norm());
    Operator::from_matrix(DMatrix::from_columns(&[w0, w1])).expect("square")
}

/// Algebraic check of the error-propagation identities of a CNOT protocol.
#[derive(Clone, Debug)]
pub struct PropagationCase {
    pub error: &'static str,
    pub input: &'static str,
    pub expected: &'static str,
    /// `‖D (e ⊗ I) E |in⟩ − phase · |expected⟩‖`
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct PropagationReport {
    pub cases: Vec<PropagationCase>,
}

impl PropagationReport {
    pub fn max_residual(&self) -> f64 {
        self.cases.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

/// On `|±⟩|0⟩` (in the protocol frame): `X` on the probe moves to the
/// ancilla, `Z` stays on the probe as `|±⟩ → |∓⟩`, no error is the identity.
pub fn error_propagation_check(protocol: &RoundProtocol) -> Result<PropagationReport> {
    if protocol.kind != ProtocolKind::CnotPropagation {
        return Err(precondition("error_propagation_check needs a CNOT-propagation protocol"));
    }
    protocol.validate()?;
    let (e, d) = (
        protocol.encode.as_ref().expect("cnot encode"),
        protocol.decode.as_ref().expect("cnot decode"),
    );
    let w = &protocol.frame;
    let framed = |k: &Ket| w.apply(k);
    let (p, m) = (framed(&kets::plus()), framed(&kets::minus()));
    let (zero, one) = (kets::zero(), kets::one());
    let errors: [(&str, Operator); 3] = [
        ("I", Operator::identity(2)),
        ("X1", pauli::x().conjugate_by(w)),
        ("Z1", pauli::z().conjugate_by(w)),
    ];
    let mut cases = Vec::new();
    for (ename, err) in &errors {
        let lifted = embed(err, 0, &[2, 2])?;
        let u = &(d * &lifted) * e;
        for (iname, input, flipped) in [("+0", &p, &m), ("-0", &m, &p)] {
            let (expected, ename_out): (Ket, &'static str) = match *ename {
                "I" => (input.kronecker(&zero), if iname == "+0" { "+0" } else { "-0" }),
                "X1" => (input.kronecker(&one), if iname == "+0" { "+1" } else { "-1" }),
                _ => (flipped.kronecker(&zero), if iname == "+0" { "-0" } else { "+0" }),
            };
            let out = u.apply(&input.kronecker(&zero));
            let overlap = expected.dotc(&out);
            let phase = if overlap.norm() > 0.0 {
                overlap / overlap.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            cases.push(PropagationCase {
                error: ename,
                input: iname,
                expected: ename_out,
                residual: (&out - &expected * phase).norm(),
            });
        }
    }
    Ok(PropagationReport { cases })
}

/// Applies the probe-level channel of `prop` to every probe block of `op`,
/// where the probe is the leading tensor factor.
fn apply_probe_channel(prop: &Propagator, op: &Operator, d: usize) -> Operator {
    let total = op.dim();
    let rest = total / d;
    if rest == 1 {
        return prop.apply(op);
    }
    let m = op.matrix();
    let mut out = DMatrix::<C64>::zeros(total, total);
    for a in 0..rest {
        for b in 0..rest {
            let block = Operator::from_fn(d, |p, q| m[(p * rest + a, q * rest + b)]);
            let mapped = prop.apply(&block);
            for p in 0..d {
                for q in 0..d {
                    out[(p * rest + a, q * rest + b)] = mapped.get(p, q);
                }
            }
        }
    }
    Operator::from_matrix(out).expect("square")
}

/// One round on a state whose probe is factor 0 and whose active ancilla is
/// factor `site`; returns the new state and the smallest partial-transpose
/// eigenvalue across probe | active ancilla over the round's snapshots.
struct RoundEngine<'a> {
    protocol: &'a RoundProtocol,
    prop: Propagator,
}

impl<'a> RoundEngine<'a> {
    fn new(model: &LindbladModel, protocol: &'a RoundProtocol, cfg: &EvolutionConfig) -> Result<Self> {
        protocol.validate()?;
        if model.dim() != protocol.probe_dim {
            return Err(domain(format!(
                "model acts on dimension {}, protocol expects a probe of dimension {}",
                model.dim(),
                protocol.probe_dim
            )));
        }
        Ok(Self {
            protocol,
            prop: Propagator::new(model, cfg, cfg.dt)?,
        })
    }

    fn step(&self, rho: &Operator, dims: &[usize], site: usize) -> Result<(Operator, f64)> {
        let d = self.protocol.probe_dim;
        let gate = |u: &Operator| pair_gate(u, site, dims);
        let pair_pt = |op: &Operator| -> Result<f64> {
            let reduced = if dims.len() == 2 {
                op.clone()
            } else {
                partial_trace_op(op, dims, &[0, site])?
            };
            Ok(min_pt_eigenvalue(&reduced, &[d, 2]))
        };
        let mut state = rho.clone();
        let mut min_pt = f64::INFINITY;
        if let Some(u) = &self.protocol.encode {
            state = state.conjugate_by(&gate(u)?);
        }
        min_pt = min_pt.min(pair_pt(&state)?);
        state = apply_probe_channel(&self.prop, &state, d);
        let checked = DensityState::from_integration(state, dims.to_vec(), "protocol round")?;
        state = checked.into_op();
        min_pt = min_pt.min(pair_pt(&state)?);
        if let Some(ks) = &self.protocol.recovery {
            let lifted: Vec<Operator> = ks.iter().map(gate).collect::<Result<_>>()?;
            state = lifted
                .iter()
                .fold(Operator::zeros(state.dim()), |acc, k| acc + state.conjugate_by(k));
        }
        if let Some(u) = &self.protocol.decode {
            state = state.conjugate_by(&gate(u)?);
        }
        min_pt = min_pt.min(pair_pt(&state)?);
        let tr = state.trace();
        if (tr.re - 1.0).abs() > 1e-10 {
            return Err(Error::NumericalInstability {
                context: format!("protocol round: trace drifted to {tr}"),
                eigenvalue: f64::NAN,
            });
        }
        Ok((state.hermitian_part(), min_pt))
    }
}

/// Places a two-party operator on subsystems `0` and `site` of `dims`.
fn pair_gate(u: &Operator, site: usize, dims: &[usize]) -> Result<Operator> {
    if dims.len() == 2 && site == 1 {
        return Ok(u.clone());
    }
    let rest: Vec<usize> = (1..dims.len()).filter(|&k| k != site).collect();
    let rest_dim: usize = rest.iter().map(|&k| dims[k]).product();
    let big = tensor_product(u, &Operator::identity(rest_dim));
    let order: Vec<usize> = [0, site].into_iter().chain(rest).collect();
    let ordered_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let perm: Vec<usize> = (0..dims.len())
        .map(|j| order.iter().position(|&k| k == j).expect("present"))
        .collect();
    permute_subsystems(&big, &ordered_dims, &perm)
}

/// `decode ∘ recover ∘ evolve(dt) ∘ encode` on a probe ⊗ ancilla state.
pub fn run_round(
    state: &DensityState,
    model: &LindbladModel,
    protocol: &RoundProtocol,
    cfg: &EvolutionConfig,
) -> Result<DensityState> {
    let dims = protocol.joint_dims();
    if state.subsystem_dims() != dims {
        return Err(domain(format!(
            "round state must have subsystem dimensions {dims:?}, got {:?}",
            state.subsystem_dims()
        )));
    }
    let engine = RoundEngine::new(model, protocol, cfg)?;
    let (out, _) = engine.step(state.op(), &dims, 1)?;
    Ok(DensityState::trusted(out, dims.to_vec()))
}

#[derive(Clone, Debug)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub time: f64,
    pub probe: DensityState,
    pub ancilla: DensityState,
    /// Probe and the ancilla used in this round, after decoding.
    pub joint: DensityState,
    /// Smallest partial-transpose eigenvalue across probe | ancilla after
    /// encoding, after evolution and after decoding.
    pub min_pt_eigenvalue: f64,
    /// Trace distance of the probe from the noiseless reference evolution.
    pub ideal_distance: f64,
}

#[derive(Clone, Debug)]
pub struct ProtocolTrace {
    pub dt: f64,
    pub records: Vec<RoundRecord>,
}

impl ProtocolTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_probe(&self) -> &DensityState {
        &self.records.last().expect("at least one round").probe
    }

    pub fn min_pt_eigenvalue(&self) -> f64 {
        self.records.iter().map(|r| r.min_pt_eigenvalue).fold(f64::INFINITY, f64::min)
    }
}

struct IdealReference {
    rho0: Operator,
    generator: Operator,
    coupling: f64,
}

impl IdealReference {
    fn new(model: &LindbladModel, protocol: &RoundProtocol, rho0: &Operator) -> Self {
        Self {
            rho0: rho0.clone(),
            generator: protocol
                .ideal_generator
                .clone()
                .unwrap_or_else(|| model.generator().clone()),
            coupling: model.coupling(),
        }
    }

    fn distance(&self, probe: &Operator, t: f64) -> Result<f64> {
        let u = unitary_exp(&self.generator, self.coupling * t)?;
        trace_distance(probe, &self.rho0.conjugate_by(&u))
    }
}

/// Runs `kappa` rounds starting from a probe state.
pub fn run_protocol(
    rho0_probe: &DensityState,
    model: &LindbladModel,
    protocol: &RoundProtocol,
    cfg: &EvolutionConfig,
    kappa: usize,
) -> Result<ProtocolTrace> {
    if kappa == 0 {
        return Err(domain("kappa must be at least 1"));
    }
    if rho0_probe.dim() != protocol.probe_dim {
        return Err(domain(format!(
            "probe state has dimension {}, protocol expects {}",
            rho0_probe.dim(),
            protocol.probe_dim
        )));
    }
    let engine = RoundEngine::new(model, protocol, cfg)?;
    let dims = protocol.joint_dims();
    let ideal = IdealReference::new(model, protocol, rho0_probe.op());
    let mut probe = rho0_probe.op().clone();
    let mut joint: Option<Operator> = None;
    let mut records = Vec::with_capacity(kappa);
    for k in 1..=kappa {
        let entry = match (protocol.ancilla_refresh, joint.take()) {
            (AncillaRefresh::Persistent, Some(j)) => j,
            _ => protocol.entry_state(&probe)?,
        };
        let (out, min_pt) = engine.step(&entry, &dims, 1)?;
        probe = partial_trace_op(&out, &dims, &[0])?.hermitian_part();
        let ancilla = partial_trace_op(&out, &dims, &[1])?;
        let time = k as f64 * cfg.dt;
        records.push(RoundRecord {
            round: k,
            time,
            probe: DensityState::trusted(probe.clone(), vec![dims[0]]),
            ancilla: DensityState::trusted(ancilla, vec![2]),
            joint: DensityState::trusted(out.clone(), dims.to_vec()),
            min_pt_eigenvalue: min_pt,
            ideal_distance: ideal.distance(&probe, time)?,
        });
        joint = Some(out);
    }
    Ok(ProtocolTrace { dt: cfg.dt, records })
}

/// Runs one round per ancilla on a state holding the probe and all `κ`
/// ancillae at once (subsystem `k` is the ancilla of round `k`). Nothing is
/// traced out until the records are taken; meant for small `κ`.
pub fn run_protocol_materialized(
    state: &DensityState,
    model: &LindbladModel,
    protocol: &RoundProtocol,
    cfg: &EvolutionConfig,
) -> Result<ProtocolTrace> {
    let dims = state.subsystem_dims().to_vec();
    let kappa = dims.len().saturating_sub(1);
    if kappa == 0 || dims[0] != protocol.probe_dim || dims[1..].iter().any(|&d| d != 2) {
        return Err(domain(format!(
            "materialized run needs dimensions [{}, 2, 2, …], got {dims:?}",
            protocol.probe_dim
        )));
    }
    if kappa > 8 {
        return Err(domain(format!("materialized run limited to 8 ancillae, got {kappa}")));
    }
    let engine = RoundEngine::new(model, protocol, cfg)?;
    let rho0 = partial_trace_op(state.op(), &dims, &[0])?;
    let ideal = IdealReference::new(model, protocol, &rho0);
    let mut rho = state.op().clone();
    let mut records = Vec::with_capacity(kappa);
    for k in 1..=kappa {
        let (out, min_pt) = engine.step(&rho, &dims, k)?;
        let probe = partial_trace_op(&out, &dims, &[0])?;
        let time = k as f64 * cfg.dt;
        records.push(RoundRecord {
            round: k,
            time,
            probe: DensityState::trusted(probe.clone(), vec![dims[0]]),
            ancilla: DensityState::trusted(partial_trace_op(&out, &dims, &[k])?, vec![2]),
            joint: DensityState::trusted(partial_trace_op(&out, &dims, &[0, k])?, vec![dims[0], 2]),
            min_pt_eigenvalue: min_pt,
            ideal_distance: ideal.distance(&probe, time)?,
        });
        rho = out;
    }
    Ok(ProtocolTrace { dt: cfg.dt, records })
}

/// `|θ⟩⟨θ| ⊗ (|0⟩⟨0|)^{⊗κ} / (1+s) + s / (2^{κ+1}(1+s)) I` on `κ+1` qubits,
/// with `|θ⟩ = cos θ|0⟩ + sin θ|1⟩`.
pub fn separable_input_state(theta: f64, s: f64, kappa: usize) -> Result<DensityState> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain(format!("s must be finite and non-negative, got {s}")));
    }
    if kappa == 0 {
        return Err(domain("kappa must be at least 1"));
    }
    if kappa > 12 {
        return Err(domain(format!("refusing to materialize {} qubits", kappa + 1)));
    }
    let n = kappa + 1;
    let d = 1usize << n;
    let mut v = Ket::zeros(d);
    // |θ⟩|0…0⟩ has support on |0…0⟩ and |10…0⟩
    v[0] = C64::new(theta.cos(), 0.0);
    v[1 << kappa] = C64::new(theta.sin(), 0.0);
    let op = &Operator::projector(&v).scale_real(1.0 / (1.0 + s))
        + &Operator::identity(d).scale_real(s / (d as f64 * (1.0 + s)));
    Ok(DensityState::trusted(op, vec![2; n]))
}

/// Probe marginal of [`separable_input_state`]:
/// `|θ⟩⟨θ| / (1+s) + s / (2(1+s)) I`.
pub fn separable_input_probe(theta: f64, s: f64) -> Result<DensityState> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain(format!("s must be finite and non-negative, got {s}")));
    }
    let op = &Operator::projector(&kets::angle(theta)).scale_real(1.0 / (1.0 + s))
        + &Operator::identity(2).scale_real(s / (2.0 * (1.0 + s)));
    Ok(DensityState::trusted(op, vec![2]))
}

/// `exp(-i θ t G) ρ exp(i θ t G)`: the noiseless reference on the probe.
pub fn ideal_probe(rho0: &DensityState, generator: &Operator, coupling: f64, t: f64) -> Result<DensityState> {
    rho0.evolve_unitary(&unitary_exp(generator, coupling * t)?)
}
