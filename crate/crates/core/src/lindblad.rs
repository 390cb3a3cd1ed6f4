//! Time-homogeneous Lindblad master equation
//!
//! ```text
//! dρ/dt = -i[θG, ρ] + Σ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})
//! ```
//!
//! integrated either by fixed-step RK4 or by exponentiating the vectorized
//! Liouvillian. Vectorization is column-stacking throughout, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::algebra::{embed, tensor_product, DensityState, Operator, C64, IM};
use crate::error::{domain, Result};

/// Signal Hamiltonian `θG` plus jump operators.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    generator: Operator,
    coupling: f64,
    jumps: Vec<Operator>,
}

impl LindbladModel {
    pub fn new(generator: Operator, coupling: f64, jumps: Vec<Operator>) -> Result<Self> {
        if !generator.is_hermitian(1e-10) {
            return Err(domain("generator must be Hermitian"));
        }
        if !coupling.is_finite() {
            return Err(domain("coupling must be finite"));
        }
        for (k, l) in jumps.iter().enumerate() {
            if l.dim() != generator.dim() {
                return Err(domain(format!(
                    "jump operator {k} has dimension {}, generator has {}",
                    l.dim(),
                    generator.dim()
                )));
            }
        }
        Ok(Self {
            generator,
            coupling,
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn generator(&self) -> &Operator {
        &self.generator
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn jumps(&self) -> &[Operator] {
        &self.jumps
    }

    /// `H = θG`
    pub fn hamiltonian(&self) -> Operator {
        self.generator.scale_real(self.coupling)
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self {
            coupling,
            ..self.clone()
        }
    }

    /// The same dynamics acting on subsystem `site` of a composite system,
    /// identity elsewhere.
    pub fn lift(&self, dims: &[usize], site: usize) -> Result<LindbladModel> {
        Ok(Self {
            generator: embed(&self.generator, site, dims)?,
            coupling: self.coupling,
            jumps: self
                .jumps
                .iter()
                .map(|l| embed(l, site, dims))
                .collect::<Result<_>>()?,
        })
    }

    /// Noise part `Σ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})` alone.
    pub fn dissipator(&self, rho: &Operator) -> Operator {
        let mut out = Operator::zeros(self.dim());
        for l in &self.jumps {
            let ld = l.adjoint();
            out = out + &(&(l * rho) * &ld) - &(&ld * l).anticommutator(rho).scale_real(0.5);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    RungeKutta4,
    LiouvillianExponential,
}

/// Round duration and integrator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub substeps: usize,
    pub method: Method,
}

impl EvolutionConfig {
    pub fn new(dt: f64, substeps: usize, method: Method) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(domain(format!("round duration must be positive, got {dt}")));
        }
        if substeps == 0 {
            return Err(domain("substeps must be at least 1"));
        }
        Ok(Self {
            dt,
            substeps,
            method,
        })
    }

    pub fn step(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Right-hand side of the master equation.
pub fn lindblad_rhs(model: &LindbladModel, rho: &DensityState) -> Result<Operator> {
    if rho.dim() != model.dim() {
        return Err(domain(format!(
            "state dimension {} does not match model dimension {}",
            rho.dim(),
            model.dim()
        )));
    }
    Operator::from_matrix(Rhs::new(model).apply(rho.op().matrix()))
}

/// Precomputed pieces of the RHS: `-i H_eff ρ + i ρ H_eff† + Σ L ρ L†` with
/// `H_eff = H − (i/2) Σ L†L`.
struct Rhs {
    heff: DMatrix<C64>,
    heff_dag: DMatrix<C64>,
    jumps: Vec<(DMatrix<C64>, DMatrix<C64>)>,
}

impl Rhs {
    fn new(model: &LindbladModel) -> Self {
        let d = model.dim();
        let mut k = DMatrix::<C64>::zeros(d, d);
        let mut jumps = Vec::with_capacity(model.jumps.len());
        for l in &model.jumps {
            let l = l.matrix().clone();
            let ld = l.adjoint();
            k += &ld * &l;
            jumps.push((l, ld));
        }
        let heff = model.hamiltonian().into_matrix() - k * C64::new(0.0, 0.5);
        let heff_dag = heff.adjoint();
        Self {
            heff,
            heff_dag,
            jumps,
        }
    }

    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = (&self.heff * rho) * (-IM) + (rho * &self.heff_dag) * IM;
        for (l, ld) in &self.jumps {
            out += l * rho * ld;
        }
        out
    }
}

/// Superoperator matrix `𝓛` with `vec(dρ/dt) = 𝓛 vec(ρ)` (column stacking).
pub fn liouvillian_matrix(model: &LindbladModel) -> Operator {
    let d = model.dim();
    let id = Operator::identity(d);
    let h = model.hamiltonian();
    let mut l = (&tensor_product(&id, &h) - &tensor_product(&h.transpose(), &id)).scale(-IM);
    for j in &model.jumps {
        let jdj = &j.adjoint() * j;
        l = l + &tensor_product(&j.conjugate(), j)
            - &(&tensor_product(&id, &jdj) + &tensor_product(&jdj.transpose(), &id)).scale_real(0.5);
    }
    l
}

fn spectral_radius(l: &Operator) -> f64 {
    match nalgebra::Schur::new(l.matrix().clone()).eigenvalues() {
        Some(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
        // bound by the induced 1-norm
        None => (0..l.dim())
            .map(|j| l.matrix().column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max),
    }
}

/// Reusable map `ρ ↦ ρ(duration)` for a fixed model.
#[derive(Clone, Debug)]
pub struct Propagator {
    dim: usize,
    kind: PropagatorKind,
}

#[derive(Clone, Debug)]
enum PropagatorKind {
    Exponential(DMatrix<C64>),
    RungeKutta { rhs: Arc<Rhs>, steps: usize, h: f64 },
}

impl std::fmt::Debug for Rhs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rhs").field("dim", &self.heff.nrows()).finish()
    }
}

impl Propagator {
    pub fn new(model: &LindbladModel, cfg: &EvolutionConfig, duration: f64) -> Result<Self> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(domain(format!("duration must be non-negative, got {duration}")));
        }
        let liou = liouvillian_matrix(model);
        // the exponential is exact for any step; only RK4 is step-limited
        if cfg.method == Method::RungeKutta4 {
            let radius = spectral_radius(&liou);
            if cfg.step() * radius > 1e-2 {
                warn!(
                    "integration step {:e} exceeds 1e-2 / spectral radius ({radius:.3e}) of the Liouvillian",
                    cfg.step()
                );
            }
        }
        let kind = match cfg.method {
            Method::LiouvillianExponential => {
                PropagatorKind::Exponential((liou.into_matrix() * C64::new(duration, 0.0)).exp())
            }
            Method::RungeKutta4 => {
                let steps = if duration == 0.0 {
                    0
                } else {
                    ((duration / cfg.step()) - 1e-9).ceil().max(1.0) as usize
                };
                let h = if steps == 0 { 0.0 } else { duration / steps as f64 };
                PropagatorKind::RungeKutta {
                    rhs: Arc::new(Rhs::new(model)),
                    steps,
                    h,
                }
            }
        };
        Ok(Self {
            dim: model.dim(),
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        debug_assert_eq!(rho.dim(), self.dim);
        match &self.kind {
            PropagatorKind::Exponential(p) => {
                let v: DVector<C64> = p * rho.vectorize();
                Operator::from_vectorized(&v).expect("square")
            }
            PropagatorKind::RungeKutta { rhs, steps, h } => {
                let f = rhs.as_ref();
                let hc = C64::new(*h, 0.0);
                let half = C64::new(*h / 2.0, 0.0);
                let sixth = C64::new(*h / 6.0, 0.0);
                let two = C64::new(2.0, 0.0);
                let mut y = rho.matrix().clone();
                for _ in 0..*steps {
                    let k1 = f.apply(&y);
                    let k2 = f.apply(&(&y + &k1 * half));
                    let k3 = f.apply(&(&y + &k2 * half));
                    let k4 = f.apply(&(&y + &k3 * hc));
                    y += (k1 + (k2 + k3) * two + k4) * sixth;
                }
                Operator::from_matrix(y).expect("square")
            }
        }
    }
}

/// State at `t = duration` starting from `rho0`.
///
/// Fails with [`crate::Error::NumericalInstability`] when the result has an
/// eigenvalue below `-1e-8` or its trace drifts by more than `1e-10`.
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityState,
    cfg: &EvolutionConfig,
    duration: f64,
) -> Result<DensityState> {
    if rho0.dim() != model.dim() {
        return Err(domain(format!(
            "state dimension {} does not match model dimension {}",
            rho0.dim(),
            model.dim()
        )));
    }
    let p = Propagator::new(model, cfg, duration)?;
    DensityState::from_integration(p.apply(rho0.op()), rho0.subsystem_dims().to_vec(), "evolve")
}
