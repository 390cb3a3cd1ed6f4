//! Lindblad span, generator decomposition and two-qubit codespaces.
//!
//! A generator `G` admits noiseless error-corrected evolution when it is not
//! contained in the Lindblad span `S = span{I, L_k, L_k†, L_k† L_j}`. When
//! the component of `G` orthogonal to `S` has rank two,
//! `G_⊥ = λ(|c₀⟩⟨c₀| − |c₁⟩⟨c₁|)`, a probe plus one ancilla qubit carries the
//! codes `{c₀+, c₁−}` and `{c₀−, c₁+}` on which every `L_k` and `L_k† L_j`
//! satisfies the Knill–Laflamme conditions while `G` stays nontrivial.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::algebra::{
    eig_unchecked, embed, gram_schmidt, hermitian_eig, hs_inner, kets, kron_ket, numerical_rank, pauli,
    Ket, Operator, C64, DEFAULT_RANK_TOL, ONE, ZERO,
};
use crate::error::{domain, precondition, Error, Result};
use crate::sampling;

/// Residual norm below which a span generator counts as dependent.
pub const SPAN_DROP_TOL: f64 = 1e-10;

/// Default absolute tolerance on Knill–Laflamme residual norms.
pub const DEFAULT_KL_TOL: f64 = 1e-9;

/// Tolerance on `|⟨c|L|c⟩|` for the zero-diagonal construction.
pub const ZERO_DIAGONAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct LindbladSpan {
    /// `(tag, operator)` in the order `I`, each `L_k`, each `L_k†`, each
    /// `L_k† L_j` (k-major).
    pub raw_generators: Vec<(String, Operator)>,
    /// Norm of each raw generator after removing its overlap with the earlier
    /// ones; entries at or below [`SPAN_DROP_TOL`] added nothing.
    pub residual_norms: Vec<f64>,
    /// Orthonormal under the Hilbert–Schmidt inner product.
    pub ortho_basis: Vec<Operator>,
    pub dim: usize,
}

impl LindbladSpan {
    /// Number of linearly independent generators.
    pub fn dimension(&self) -> usize {
        self.ortho_basis.len()
    }

    /// Orthogonal projection of `a` onto the span.
    pub fn project(&self, a: &Operator) -> Result<Operator> {
        let mut out = Operator::zeros(self.dim);
        for b in &self.ortho_basis {
            out = out + &b.scale(hs_inner(b, a)?);
        }
        Ok(out)
    }

    pub fn contains(&self, a: &Operator, tol: f64) -> Result<bool> {
        Ok((a - &self.project(a)?).frobenius_norm() <= tol)
    }
}

/// Enumerates the span generators and orthonormalizes them by modified
/// Gram–Schmidt. An empty jump list yields `span{I}`.
pub fn build_span(dim: usize, jumps: &[Operator]) -> Result<LindbladSpan> {
    if dim == 0 {
        return Err(domain("operator dimension must be at least 1"));
    }
    if let Some(k) = jumps.iter().position(|l| l.dim() != dim) {
        return Err(domain(format!("jump operator {k} does not have dimension {dim}")));
    }
    let mut raw = vec![("I".to_string(), Operator::identity(dim))];
    for (k, l) in jumps.iter().enumerate() {
        raw.push((format!("L{k}"), l.clone()));
    }
    for (k, l) in jumps.iter().enumerate() {
        raw.push((format!("L{k}^dag"), l.adjoint()));
    }
    for (k, lk) in jumps.iter().enumerate() {
        for (j, lj) in jumps.iter().enumerate() {
            raw.push((format!("L{k}^dag L{j}"), &lk.adjoint() * lj));
        }
    }

    let mut basis: Vec<Operator> = Vec::new();
    let mut residual_norms = Vec::with_capacity(raw.len());
    for (_, v) in &raw {
        let mut w = v.clone();
        for b in &basis {
            let c = hs_inner(b, &w)?;
            w = w - &b.scale(c);
        }
        let n = w.frobenius_norm();
        residual_norms.push(n);
        if n > SPAN_DROP_TOL {
            basis.push(w.scale_real(1.0 / n));
        }
    }
    Ok(LindbladSpan {
        raw_generators: raw,
        residual_norms,
        ortho_basis: basis,
        dim,
    })
}

/// Spectral form `G_⊥ = λ(|c₀⟩⟨c₀| − |c₁⟩⟨c₁|)` with `λ > 0`.
#[derive(Clone, Debug)]
pub struct PerpSpectrum {
    pub lambda: f64,
    pub c0: Ket,
    pub c1: Ket,
}

#[derive(Clone, Debug)]
pub struct GeneratorDecomposition {
    pub g_parallel: Operator,
    pub g_perp: Operator,
    pub perp_norm: f64,
    pub perp_rank: usize,
    /// Present exactly when `perp_rank == 2`.
    pub spectrum: Option<PerpSpectrum>,
}

/// Splits `g` into components parallel and perpendicular to the span.
pub fn decompose_generator(g: &Operator, span: &LindbladSpan) -> Result<GeneratorDecomposition> {
    if g.dim() != span.dim {
        return Err(domain(format!(
            "generator dimension {} does not match span dimension {}",
            g.dim(),
            span.dim
        )));
    }
    if !g.is_hermitian(1e-10) {
        return Err(domain("decompose_generator requires a Hermitian generator"));
    }
    let g_parallel = span.project(g)?;
    // The span is closed under adjoints, so the projection of a Hermitian
    // operator stays Hermitian up to rounding.
    let g_perp = (g - &g_parallel).hermitian_part();
    let perp_norm = g_perp.frobenius_norm();
    let perp_rank = if perp_norm <= SPAN_DROP_TOL * g.frobenius_norm().max(1.0) {
        0
    } else {
        numerical_rank(&g_perp, DEFAULT_RANK_TOL)
    };
    let spectrum = if perp_rank == 2 {
        let es = eig_unchecked(&g_perp);
        let n = es.dim();
        let (hi, lo) = (es.eigenvalues[n - 1], es.eigenvalues[0]);
        Some(PerpSpectrum {
            lambda: 0.5 * (hi - lo),
            c0: es.eigenvectors[n - 1].clone(),
            c1: es.eigenvectors[0].clone(),
        })
    } else {
        None
    };
    Ok(GeneratorDecomposition {
        g_parallel,
        g_perp,
        perp_norm,
        perp_rank,
        spectrum,
    })
}

/// `true` iff the generator has a component outside the span larger than `tol`.
pub fn hs_achievable(g: &Operator, span: &LindbladSpan, tol: f64) -> Result<bool> {
    Ok(decompose_generator(g, span)?.perp_norm > tol)
}

// ---------------------------------------------------------------------------
// Zero-diagonal construction

/// Orthonormal `c₀, c₁` with `⟨c₀|l|c₀⟩ = ⟨c₁|l|c₁⟩ = 0` for traceless `l`.
///
/// Uses the Schur form of `l`: its Schur vectors have Rayleigh quotients
/// equal to the eigenvalues, whose convex hull contains 0. Two successive
/// two-dimensional solves then land exactly on 0. The randomized search
/// seeded by `seed` runs only if that closed form degenerates numerically.
pub fn zero_diagonal_pair(l: &Operator, seed: u64) -> Result<(Ket, Ket)> {
    let d = l.dim();
    if d < 2 {
        return Err(domain("zero_diagonal_pair needs dimension at least 2"));
    }
    let tr = l.trace();
    if tr.norm() > 1e-10 * l.frobenius_norm().max(1.0) {
        return Err(domain(format!(
            "operator must be traceless (trace {tr}); subtract Tr(L)/d · I first"
        )));
    }
    let mut rng = sampling::rng(seed);
    let m = l.matrix();
    let c0 = zero_rayleigh_vector(m, &mut rng)?;

    // Orthogonal complement of c0, where the compressed operator is again
    // traceless.
    let mut candidates = vec![c0.clone()];
    candidates.extend((0..d).map(|i| kets::basis(d, i)));
    let frame = gram_schmidt(&candidates, 1e-8);
    let comp = DMatrix::from_columns(&frame[1..d]);
    let c1 = if d == 2 {
        comp.column(0).into_owned()
    } else {
        let reduced = comp.adjoint() * m * &comp;
        let w = zero_rayleigh_vector(&reduced, &mut rng)?;
        &comp * w
    };

    for (name, c) in [("c0", &c0), ("c1", &c1)] {
        let diag = c.dotc(&(m * c)).norm();
        if diag > ZERO_DIAGONAL_TOL * l.frobenius_norm().max(1.0) {
            return Err(Error::Convergence(format!("⟨{name}|L|{name}⟩ = {diag:e}")));
        }
    }
    Ok((c0, c1))
}

/// Rank-2 traceless `G = |c₀⟩⟨c₀| − |c₁⟩⟨c₁|` with `Tr(G l) = 0`.
pub fn construct_generator_from_noise(l: &Operator, seed: u64) -> Result<Operator> {
    let (c0, c1) = zero_diagonal_pair(l, seed)?;
    Ok(Operator::projector(&c0) - Operator::projector(&c1))
}

fn scale_of(m: &DMatrix<C64>) -> f64 {
    m.norm().max(1e-300)
}

/// Unit vector with zero Rayleigh quotient; requires `0 ∈ W(m)`, which holds
/// for traceless `m`.
fn zero_rayleigh_vector<R: Rng + ?Sized>(m: &DMatrix<C64>, rng: &mut R) -> Result<DVector<C64>> {
    let d = m.nrows();
    let eps = 1e-13 * scale_of(m);
    let schur = nalgebra::Schur::new(m.clone());
    let (q, t) = schur.unpack();
    let pts: Vec<C64> = (0..d).map(|i| t[(i, i)]).collect();
    let vecs: Vec<DVector<C64>> = (0..d).map(|i| q.column(i).into_owned()).collect();

    if let Some(i) = (0..d).min_by(|&a, &b| pts[a].norm().total_cmp(&pts[b].norm())) {
        if pts[i].norm() <= eps {
            return Ok(vecs[i].clone());
        }
    }

    // 0 on a segment between two Rayleigh points
    for i in 0..d {
        for j in i + 1..d {
            let (a, b) = (pts[i], pts[j]);
            let cross = (a.conj() * b).im;
            let dot = (a.conj() * b).re;
            if cross.abs() <= 1e-12 * a.norm() * b.norm() && dot < 0.0 {
                if let Some(v) = hit_value(m, &vecs[i], &vecs[j], ZERO) {
                    return Ok(v);
                }
            }
        }
    }

    // 0 strictly inside a triangle: move along [p_i, p_j] to the point on the
    // ray from p_k through 0, then solve on the plane with q_k.
    for i in 0..d {
        for j in i + 1..d {
            for k in 0..d {
                if k == i || k == j {
                    continue;
                }
                if let Some(target) = ray_hits_segment(pts[k], pts[i], pts[j]) {
                    if let Some(w) = hit_value(m, &vecs[i], &vecs[j], target) {
                        if let Some(v) = hit_value(m, &w, &vecs[k], ZERO) {
                            return Ok(v);
                        }
                    }
                }
            }
        }
    }

    zero_rayleigh_by_search(m, rng, 24)
}

/// Point where the ray from `pk` through the origin crosses segment
/// `[pi, pj]`, when the origin lies strictly inside the triangle.
fn ray_hits_segment(pk: C64, pi: C64, pj: C64) -> Option<C64> {
    // Solve  -α pk = pi + β (pj − pi),  α > 0, β ∈ [0, 1].
    let e = pj - pi;
    let (a11, a12, b1) = (pk.re, e.re, -pi.re);
    let (a21, a22, b2) = (pk.im, e.im, -pi.im);
    let det = a11 * a22 - a12 * a21;
    if det.abs() <= 1e-14 * pk.norm() * e.norm() {
        return None;
    }
    let alpha = (b1 * a22 - a12 * b2) / det;
    let beta = (a11 * b2 - a21 * b1) / det;
    (alpha > 0.0 && (0.0..=1.0).contains(&beta)).then(|| pi + e * beta)
}

/// Unit `v ∈ span{x, y}` with `⟨v|m|v⟩ = target`, for orthonormal `x, y`
/// whose Rayleigh quotients lie on opposite sides of `target` along a line.
fn hit_value(m: &DMatrix<C64>, x: &DVector<C64>, y: &DVector<C64>, target: C64) -> Option<DVector<C64>> {
    let px = x.dotc(&(m * x));
    let py = y.dotc(&(m * y));
    let tol = 1e-13 * scale_of(m);
    if (px - target).norm() <= tol {
        return Some(x.clone());
    }
    if (py - target).norm() <= tol {
        return Some(y.clone());
    }
    // Rotate so that px − target is positive real.
    let rot = C64::from_polar(1.0, -(px - target).arg());
    let n = (m - DMatrix::<C64>::identity(m.nrows(), m.ncols()) * target) * rot;
    let herm = (&n + n.adjoint()) * C64::new(0.5, 0.0);
    let skew = (&n - n.adjoint()) * C64::new(0.0, -0.5);
    let r1 = x.dotc(&(&herm * x)).re;
    let r2 = -y.dotc(&(&herm * y)).re;
    if !(r1 > 0.0 && r2 > 0.0) {
        return None;
    }
    // Choose φ so that the cross term of the skew part vanishes for every s.
    let kxy = x.dotc(&(&skew * y));
    let phi = if kxy.norm() > 0.0 {
        std::f64::consts::FRAC_PI_2 - kxy.arg()
    } else {
        0.0
    };
    let ephi = C64::from_polar(1.0, phi);
    let b = (ephi * x.dotc(&(&herm * y))).re;
    let s = (b + (b * b + r1 * r2).sqrt()) / r2;
    let v = x + y * (ephi * s);
    let v = &v / C64::new(v.norm(), 0.0);
    let got = v.dotc(&(m * &v));
    ((got - target).norm() <= 1e-9 * scale_of(m)).then_some(v)
}

/// Minimizes `|⟨v|m|v⟩|²` over unit vectors by Riemannian gradient descent
/// with random restarts.
pub(crate) fn zero_rayleigh_by_search<R: Rng + ?Sized>(
    m: &DMatrix<C64>,
    rng: &mut R,
    restarts: usize,
) -> Result<DVector<C64>> {
    let d = m.nrows();
    let scale = scale_of(m);
    let md = m.adjoint();
    let f = |v: &DVector<C64>| v.dotc(&(m * v)).norm_sqr() / (scale * scale);
    let mut best: Option<(f64, DVector<C64>)> = None;
    for _ in 0..restarts.max(1) {
        let mut v = sampling::random_ket(d, rng);
        let mut fv = f(&v);
        let mut step = 0.5 / scale;
        for _ in 0..5000 {
            if fv < 1e-26 {
                break;
            }
            let g = v.dotc(&(m * &v));
            let grad = (m * &v) * g.conj() + (&md * &v) * g;
            let grad = &grad - &v * v.dotc(&grad);
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &v - &grad * C64::new(step, 0.0);
                let cand = &cand / C64::new(cand.norm(), 0.0);
                let fc = f(&cand);
                if fc < fv {
                    v = cand;
                    fv = fc;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| fv < *b) {
            best = Some((fv, v));
        }
        if best.as_ref().is_some_and(|(b, _)| *b < 1e-26) {
            break;
        }
    }
    match best {
        Some((fv, v)) if fv.sqrt() * scale <= ZERO_DIAGONAL_TOL * scale.max(1.0) => Ok(v),
        Some((fv, _)) => Err(Error::Convergence(format!(
            "best |⟨v|L|v⟩| after restarts is {:e}",
            fv.sqrt() * scale
        ))),
        None => Err(Error::Convergence("no restarts performed".into())),
    }
}

// ---------------------------------------------------------------------------
// Codespaces

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodeLabel {
    /// `{c₀+, c₁−}`
    PlusSector,
    /// `{c₀−, c₁+}`
    MinusSector,
    /// Union of both sectors, kept as two blocks.
    Combined,
    Custom,
}

/// Orthonormal basis of a subspace of probe ⊗ ancilla-qubit.
///
/// A combined codespace records its sectors; Knill–Laflamme conditions and
/// recovery act sector by sector.
#[derive(Clone, Debug)]
pub struct Codespace {
    pub basis: Vec<Ket>,
    pub sectors: Vec<Range<usize>>,
    pub projector: Operator,
    pub label: CodeLabel,
    pub probe_dim: usize,
}

impl Codespace {
    /// Single-sector codespace.
    pub fn new(basis: Vec<Ket>, label: CodeLabel, probe_dim: usize) -> Result<Self> {
        let n = basis.len();
        Self::with_sectors(basis, vec![0..n], label, probe_dim)
    }

    pub fn with_sectors(
        basis: Vec<Ket>,
        sectors: Vec<Range<usize>>,
        label: CodeLabel,
        probe_dim: usize,
    ) -> Result<Self> {
        let first = basis.first().ok_or_else(|| domain("codespace basis is empty"))?;
        let ambient = first.len();
        if probe_dim == 0 || ambient % probe_dim != 0 {
            return Err(domain(format!(
                "ambient dimension {ambient} is not a multiple of probe dimension {probe_dim}"
            )));
        }
        for (i, a) in basis.iter().enumerate() {
            if a.len() != ambient {
                return Err(domain("codespace basis vectors differ in length"));
            }
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { ONE } else { ZERO };
                if (a.dotc(b) - target).norm() > 1e-10 {
                    return Err(domain("codespace basis is not orthonormal"));
                }
            }
        }
        let mut covered = 0;
        for r in &sectors {
            if r.start != covered || r.end <= r.start {
                return Err(domain("sectors must tile the basis in order"));
            }
            covered = r.end;
        }
        if covered != basis.len() {
            return Err(domain("sectors must tile the basis in order"));
        }
        let projector = basis
            .iter()
            .fold(Operator::zeros(ambient), |acc, b| acc + Operator::projector(b));
        Ok(Self {
            basis,
            sectors,
            projector,
            label,
            probe_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.projector.dim()
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ambient_dim() / self.probe_dim
    }

    pub fn sector_projector(&self, sector: usize) -> Operator {
        self.basis[self.sectors[sector].clone()]
            .iter()
            .fold(Operator::zeros(self.ambient_dim()), |acc, b| acc + Operator::projector(b))
    }

    /// The single-sector code spanned by one sector's basis.
    pub fn sector(&self, sector: usize) -> Result<Codespace> {
        let label = match (self.label, sector) {
            (CodeLabel::Combined, 0) => CodeLabel::PlusSector,
            (CodeLabel::Combined, 1) => CodeLabel::MinusSector,
            (l, _) => l,
        };
        let r = self
            .sectors
            .get(sector)
            .ok_or_else(|| domain(format!("no sector {sector}")))?
            .clone();
        Codespace::new(self.basis[r].to_vec(), label, self.probe_dim)
    }

    fn basis_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_columns(&self.basis)
    }

    /// `O ⊗ I` for probe-level `O`; ambient-dimension operators pass through.
    pub fn lift(&self, op: &Operator) -> Result<Operator> {
        if op.dim() == self.ambient_dim() {
            Ok(op.clone())
        } else if op.dim() == self.probe_dim {
            embed(op, 0, &[self.probe_dim, self.ancilla_dim()])
        } else {
            Err(domain(format!(
                "operator of dimension {} acts neither on the probe ({}) nor on probe ⊗ ancilla ({})",
                op.dim(),
                self.probe_dim,
                self.ambient_dim()
            )))
        }
    }
}

/// The plus-sector, minus-sector and combined codespaces built on the
/// eigenvectors `c₀, c₁` of a rank-2 `G_⊥` and one fresh ancilla qubit.
pub fn prop1_codespaces(dec: &GeneratorDecomposition) -> Result<(Codespace, Codespace, Codespace)> {
    let spec = match (&dec.spectrum, dec.perp_rank) {
        (Some(s), 2) => s,
        _ => {
            return Err(precondition(format!(
                "codespace construction needs rank-2 G_perp, got rank {}",
                dec.perp_rank
            )))
        }
    };
    let d = spec.c0.len();
    let (plus, minus) = (kets::plus(), kets::minus());
    let p = vec![kron_ket(&spec.c0, &plus), kron_ket(&spec.c1, &minus)];
    let m = vec![kron_ket(&spec.c0, &minus), kron_ket(&spec.c1, &plus)];
    let cs_plus = Codespace::new(p.clone(), CodeLabel::PlusSector, d)?;
    let cs_minus = Codespace::new(m.clone(), CodeLabel::MinusSector, d)?;
    let combined = Codespace::with_sectors([p, m].concat(), vec![0..2, 2..4], CodeLabel::Combined, d)?;
    Ok((cs_plus, cs_minus, combined))
}

// ---------------------------------------------------------------------------
// Knill–Laflamme conditions

#[derive(Clone, Debug)]
pub struct KlRecord {
    pub tag: String,
    pub sector: usize,
    pub mu: C64,
    /// `‖Π O Π − μ Π‖_F` within the sector.
    pub residual: f64,
    /// `max ‖Π_s O Π_s'‖_F` over distinct sectors; zero for single-sector codes.
    pub cross_sector: f64,
}

#[derive(Clone, Debug)]
pub struct KlReport {
    pub records: Vec<KlRecord>,
    pub passed: bool,
    pub tolerance: f64,
}

impl KlReport {
    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// Checks `Π O Π = μ Π` for `O ∈ {L_k, L_k† L_j}` lifted as `O ⊗ I`, sector
/// by sector.
pub fn check_kl_conditions(cs: &Codespace, jumps: &[Operator], tol: f64) -> Result<KlReport> {
    let mut ops: Vec<(String, Operator)> = Vec::new();
    for (k, l) in jumps.iter().enumerate() {
        ops.push((format!("L{k}"), l.clone()));
    }
    for (k, lk) in jumps.iter().enumerate() {
        for (j, lj) in jumps.iter().enumerate() {
            ops.push((format!("L{k}^dag L{j}"), &lk.adjoint() * lj));
        }
    }
    check_kl_for(cs, &ops, tol)
}

/// Same as [`check_kl_conditions`] for an explicit tagged operator list.
pub fn check_kl_for(cs: &Codespace, ops: &[(String, Operator)], tol: f64) -> Result<KlReport> {
    let projectors: Vec<Operator> = (0..cs.sectors.len()).map(|s| cs.sector_projector(s)).collect();
    let mut records = Vec::new();
    for (tag, op) in ops {
        let lifted = cs.lift(op)?;
        let mut cross = 0.0f64;
        for (s, ps) in projectors.iter().enumerate() {
            for (s2, ps2) in projectors.iter().enumerate() {
                if s != s2 {
                    cross = cross.max((&(ps * &lifted) * ps2).frobenius_norm());
                }
            }
        }
        for (s, ps) in projectors.iter().enumerate() {
            let sandwich = &(ps * &lifted) * ps;
            let mu = sandwich.trace() / ps.trace();
            let residual = (&sandwich - &ps.scale(mu)).frobenius_norm();
            records.push(KlRecord {
                tag: tag.clone(),
                sector: s,
                mu,
                residual,
                cross_sector: cross,
            });
        }
    }
    let passed = records.iter().all(|r| r.residual <= tol);
    Ok(KlReport {
        records,
        passed,
        tolerance: tol,
    })
}

#[derive(Clone, Debug)]
pub struct EffectiveGenerator {
    /// `B† (G ⊗ I) B` in the codespace basis `B`.
    pub matrix: Operator,
    /// Largest minus smallest eigenvalue.
    pub gap: f64,
}

pub fn effective_generator(cs: &Codespace, g: &Operator) -> Result<EffectiveGenerator> {
    if !g.is_hermitian(1e-10) {
        return Err(domain("effective_generator requires a Hermitian generator"));
    }
    let lifted = cs.lift(g)?;
    let b = cs.basis_matrix();
    let matrix = Operator::from_matrix(b.adjoint() * lifted.matrix() * &b)?;
    let es = hermitian_eig(&matrix)?;
    Ok(EffectiveGenerator {
        gap: es.max() - es.min(),
        matrix,
    })
}

// ---------------------------------------------------------------------------
// Recovery

/// Kraus operators of the recovery channel for a single-sector code.
///
/// The error set is orthogonalized through its Knill–Laflamme matrix
/// `C_ab = ⟨E_a† E_b⟩_Π`; each nonzero eigen-error `F_m` yields
/// `R_m = Π F_m† / √d_m`, and the channel is completed with the projector
/// onto the complement of the syndrome subspaces.
pub fn kl_recovery(cs: &Codespace, errors: &[Operator]) -> Result<Vec<Operator>> {
    if cs.sectors.len() != 1 {
        return Err(precondition(
            "kl_recovery needs a single-sector code; use combined_recovery for sector-wise recovery",
        ));
    }
    if errors.is_empty() {
        return Err(domain("error set is empty"));
    }
    let tol = DEFAULT_KL_TOL;
    let pi = &cs.projector;
    let k = cs.dim() as f64;
    let lifted: Vec<Operator> = errors.iter().map(|e| cs.lift(e)).collect::<Result<_>>()?;
    let n = lifted.len();
    let mut c = DMatrix::<C64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let s = &(&(pi * &lifted[a].adjoint()) * &lifted[b]) * pi;
            let mu = s.trace() / C64::new(k, 0.0);
            let residual = (&s - &pi.scale(mu)).frobenius_norm();
            if residual > tol {
                return Err(precondition(format!(
                    "Knill–Laflamme condition fails for error pair ({a}, {b}): residual {residual:e}"
                )));
            }
            c[(a, b)] = mu;
        }
    }
    let es = hermitian_eig(&Operator::from_matrix(c)?)?;
    let mut kraus = Vec::new();
    for (d_m, v) in es.eigenvalues.iter().zip(&es.eigenvectors) {
        if *d_m <= tol {
            continue;
        }
        let f = lifted
            .iter()
            .zip(v.iter())
            .fold(Operator::zeros(cs.ambient_dim()), |acc, (e, w)| acc + e.scale(*w));
        kraus.push((pi * &f.adjoint()).scale_real(1.0 / d_m.sqrt()));
    }
    complete_channel(&mut kraus)?;
    Ok(kraus)
}

/// Sector-wise recovery for a combined code:
/// `K_i = Π_C R_i Π_C + Π'_C R'_i Π'_C` with `R'_i = (I⊗Z) R_i (I⊗Z)` and
/// `R_i` the recovery of the first sector, completed to trace preservation.
pub fn combined_recovery(cs: &Codespace, errors: &[Operator]) -> Result<Vec<Operator>> {
    if cs.label != CodeLabel::Combined || cs.sectors.len() != 2 || cs.ancilla_dim() != 2 {
        return Err(precondition("combined_recovery needs a two-sector code with a qubit ancilla"));
    }
    let first = cs.sector(0)?;
    let mut inner = kl_recovery(&first, errors)?;
    // drop the completion element of the sector channel; it is rebuilt below
    let zanc = embed(&pauli::z(), 1, &[cs.probe_dim, 2])?;
    let (p0, p1) = (cs.sector_projector(0), cs.sector_projector(1));
    let mut kraus: Vec<Operator> = Vec::new();
    let completion = inner.pop();
    for r in inner.iter().chain(completion.iter()) {
        let r_flipped = &(&zanc * r) * &zanc;
        let k = &(&(&p0 * r) * &p0) + &(&(&p1 * &r_flipped) * &p1);
        if k.frobenius_norm() > 1e-14 {
            kraus.push(k);
        }
    }
    complete_channel(&mut kraus)?;
    Ok(kraus)
}

/// Appends `√(I − Σ K†K)` when it is nonzero. Fails if `Σ K†K` exceeds the
/// identity.
pub fn complete_channel(kraus: &mut Vec<Operator>) -> Result<()> {
    let Some(first) = kraus.first() else {
        return Err(domain("empty Kraus set"));
    };
    let d = first.dim();
    let s = kraus
        .iter()
        .fold(Operator::zeros(d), |acc, k| acc + &k.adjoint() * k);
    let gap = &Operator::identity(d) - &s;
    let es = hermitian_eig(&gap.hermitian_part())?;
    if es.min() < -1e-9 {
        return Err(precondition(format!(
            "Kraus operators over-complete: Σ K†K exceeds I by {:e}",
            -es.min()
        )));
    }
    if es.max() > 1e-12 {
        kraus.push(es.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
    }
    Ok(())
}

/// `Σ K ρ K†`
pub fn apply_channel(kraus: &[Operator], rho: &Operator) -> Operator {
    kraus
        .iter()
        .fold(Operator::zeros(rho.dim()), |acc, k| acc + rho.conjugate_by(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{tensor_product, IM};

    fn zx_dec() -> GeneratorDecomposition {
        let span = build_span(2, &[pauli::x()]).unwrap();
        decompose_generator(&pauli::z(), &span).unwrap()
    }

    fn close(a: &Operator, b: &Operator, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn span_of_single_x() {
        let span = build_span(2, &[pauli::x()]).unwrap();
        assert_eq!(span.dimension(), 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&span.ortho_basis[0], &Operator::identity(2).scale_real(h), 1e-15));
        assert!(close(&span.ortho_basis[1], &pauli::x().scale_real(h), 1e-15));
        let tags: Vec<&str> = span.raw_generators.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(tags, ["I", "L0", "L0^dag", "L0^dag L0"]);
    }

    #[test]
    fn empty_span_is_identity_only() {
        let span = build_span(3, &[]).unwrap();
        assert_eq!(span.dimension(), 1);
        assert!(close(
            &span.ortho_basis[0],
            &Operator::identity(3).scale_real(1.0 / 3f64.sqrt()),
            1e-15
        ));
    }

    #[test]
    fn three_paulis_fill_qubit_space() {
        let span = build_span(2, &[pauli::x(), pauli::y(), pauli::z()]).unwrap();
        assert_eq!(span.dimension(), 4);
        for (_, raw) in &span.raw_generators {
            assert!(span.contains(raw, 1e-10).unwrap());
        }
        for (i, a) in span.ortho_basis.iter().enumerate() {
            for (j, b) in span.ortho_basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((hs_inner(a, b).unwrap() - C64::new(target, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn z_against_x_noise() {
        let dec = zx_dec();
        assert!(dec.g_parallel.max_abs() < 1e-15);
        assert!(close(&dec.g_perp, &pauli::z(), 1e-15));
        assert_eq!(dec.perp_rank, 2);
        let s = dec.spectrum.unwrap();
        assert!((s.lambda - 1.0).abs() < 1e-14);
        assert!((s.c0[0].norm() - 1.0).abs() < 1e-14);
        assert!((s.c1[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generator_inside_span() {
        let span = build_span(2, &[pauli::x()]).unwrap();
        let dec = decompose_generator(&pauli::x(), &span).unwrap();
        assert!(dec.perp_norm < 1e-15);
        assert_eq!(dec.perp_rank, 0);
        assert!(!hs_achievable(&pauli::x(), &span, 1e-9).unwrap());
        assert!(hs_achievable(&pauli::z(), &span, 1e-9).unwrap());
        assert!(prop1_codespaces(&dec).is_err());
    }

    #[test]
    fn mixed_generator_projection() {
        // ⟨I/√2, X+Z⟩ = 0, ⟨X/√2, X+Z⟩ = √2 ⇒ G_∥ = X, G_⊥ = Z.
        let span = build_span(2, &[pauli::x()]).unwrap();
        let dec = decompose_generator(&(pauli::x() + pauli::z()), &span).unwrap();
        assert!(close(&dec.g_parallel, &pauli::x(), 1e-15));
        assert!(close(&dec.g_perp, &pauli::z(), 1e-15));
    }

    #[test]
    fn decompose_rejects_non_hermitian() {
        let span = build_span(2, &[pauli::x()]).unwrap();
        assert!(decompose_generator(&pauli::z().scale(IM), &span).is_err());
    }

    #[test]
    fn full_noise_blocks_every_generator() {
        let span = build_span(2, &[pauli::x(), pauli::y(), pauli::z()]).unwrap();
        for g in [pauli::x(), pauli::y(), pauli::z(), pauli::dot([0.3, -0.2, 0.9])] {
            assert!(!hs_achievable(&g, &span, 1e-9).unwrap());
        }
    }

    #[test]
    fn zero_diagonal_pairs_of_paulis() {
        let (c0, c1) = zero_diagonal_pair(&pauli::x(), 0).unwrap();
        assert!((c0.dotc(&kets::zero()).norm() - 1.0).abs() < 1e-12);
        assert!((c1.dotc(&kets::one()).norm() - 1.0).abs() < 1e-12);
        let g = construct_generator_from_noise(&pauli::x(), 0).unwrap();
        assert!(close(&g, &pauli::z(), 1e-12));

        let (c0, c1) = zero_diagonal_pair(&pauli::z(), 0).unwrap();
        assert!(pauli::z().expectation(&c0).norm() < 1e-12);
        assert!(pauli::z().expectation(&c1).norm() < 1e-12);
        let g = construct_generator_from_noise(&pauli::z(), 0).unwrap();
        // |+⟩⟨+| − |−⟩⟨−| = X up to the choice of which of ± is c0
        assert!(close(&g, &pauli::x(), 1e-12) || close(&g, &pauli::x().scale_real(-1.0), 1e-12));
    }

    #[test]
    fn zero_diagonal_rejects_trace() {
        assert!(zero_diagonal_pair(&Operator::identity(2), 0).is_err());
    }

    #[test]
    fn zero_diagonal_random_qutrits() {
        let mut rng = sampling::rng(99);
        for seed in 0..100 {
            let l = sampling::random_traceless(3, &mut rng);
            let (c0, c1) = zero_diagonal_pair(&l, seed).unwrap();
            assert!(l.expectation(&c0).norm() <= 1e-9);
            assert!(l.expectation(&c1).norm() <= 1e-9);
            assert!(c0.dotc(&c1).norm() <= 1e-10);
            let g = Operator::projector(&c0) - Operator::projector(&c1);
            assert!((&g * &l).trace().norm() <= 1e-9);
        }
    }

    #[test]
    fn zero_diagonal_handles_defective_noise() {
        // Nilpotent Jordan block: single eigenvalue 0 with one eigenvector.
        let l = Operator::from_real_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]]).unwrap();
        let (c0, c1) = zero_diagonal_pair(&l, 1).unwrap();
        assert!(l.expectation(&c0).norm() <= 1e-12);
        assert!(l.expectation(&c1).norm() <= 1e-12);
    }

    #[test]
    fn search_fallback_finds_zero() {
        let mut rng = sampling::rng(5);
        let l = sampling::random_traceless(4, &mut rng);
        let v = zero_rayleigh_by_search(l.matrix(), &mut rng, 20).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(l.expectation(&v).norm() <= 1e-9);
    }

    #[test]
    fn codespaces_for_z_x() {
        let (plus, minus, combined) = prop1_codespaces(&zx_dec()).unwrap();
        let expected = &tensor_product(&Operator::projector(&kets::zero()), &Operator::projector(&kets::plus()))
            + &tensor_product(&Operator::projector(&kets::one()), &Operator::projector(&kets::minus()));
        assert!(close(&plus.projector, &expected, 1e-15));
        assert!((combined.projector.trace().re - 4.0).abs() < 1e-14);
        assert!((&plus.projector * &minus.projector).max_abs() < 1e-12);
        let p = &plus.projector;
        assert!(close(&(p * p), p, 1e-12));
    }

    #[test]
    fn kl_on_plus_code() {
        let (plus, _, _) = prop1_codespaces(&zx_dec()).unwrap();
        let rep = check_kl_conditions(&plus, &[pauli::x()], DEFAULT_KL_TOL).unwrap();
        assert!(rep.passed);
        let x = rep.records.iter().find(|r| r.tag == "L0").unwrap();
        assert!(x.mu.norm() < 1e-15 && x.residual <= 1e-12);
        let xx = rep.records.iter().find(|r| r.tag == "L0^dag L0").unwrap();
        assert!((xx.mu - ONE).norm() < 1e-14 && xx.residual < 1e-14);
    }

    #[test]
    fn kl_fails_without_code() {
        let full = Codespace::new((0..4).map(|i| kets::basis(4, i)).collect(), CodeLabel::Custom, 2).unwrap();
        let rep = check_kl_conditions(&full, &[pauli::x()], DEFAULT_KL_TOL).unwrap();
        assert!(!rep.passed);
        assert!(rep.records[0].residual > 1.0);
    }

    #[test]
    fn combined_code_satisfies_kl_per_sector() {
        let (_, _, combined) = prop1_codespaces(&zx_dec()).unwrap();
        let rep = check_kl_conditions(&combined, &[pauli::x()], 1e-10).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.records.len(), 4);
        // X ⊗ I moves c0+ to c1+: the sectors are exchanged by the error.
        assert!(rep.records[0].cross_sector > 1.0);
    }

    #[test]
    fn effective_generators() {
        let (plus, _, combined) = prop1_codespaces(&zx_dec()).unwrap();
        let eff = effective_generator(&plus, &pauli::z()).unwrap();
        assert!(close(&eff.matrix, &pauli::z(), 1e-15));
        assert!((eff.gap - 2.0).abs() < 1e-14);

        let eff = effective_generator(&plus, &pauli::identity()).unwrap();
        assert!(close(&eff.matrix, &Operator::identity(2), 1e-15));
        assert!(eff.gap.abs() < 1e-14);

        let eff = effective_generator(&combined, &pauli::z()).unwrap();
        let diag = Operator::diagonal(&[ONE, -ONE, ONE, -ONE]);
        assert!(close(&eff.matrix, &diag, 1e-15));
    }

    #[test]
    fn recovery_undoes_bit_flip() {
        let (plus, _, _) = prop1_codespaces(&zx_dec()).unwrap();
        let r = kl_recovery(&plus, &[pauli::identity(), pauli::x()]).unwrap();
        let code = kron_ket(&kets::zero(), &kets::plus());
        let hit = embed(&pauli::x(), 0, &[2, 2]).unwrap().apply(&code);
        let out = apply_channel(&r, &Operator::projector(&hit));
        let fidelity = Operator::projector(&code).expectation(&code).re * out.expectation(&code).re;
        assert!(fidelity >= 1.0 - 1e-10);
        // trace preserving
        let s = r.iter().fold(Operator::zeros(4), |acc, k| acc + &k.adjoint() * k);
        assert!(close(&s, &Operator::identity(4), 1e-12));
    }

    #[test]
    fn recovery_for_trivial_errors() {
        let (plus, _, _) = prop1_codespaces(&zx_dec()).unwrap();
        let r = kl_recovery(&plus, &[pauli::identity()]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(close(&r[0], &plus.projector, 1e-12));
        assert!(close(&r[1], &(&Operator::identity(4) - &plus.projector), 1e-12));
        let code = Operator::projector(&plus.basis[1]);
        assert!(close(&apply_channel(&r, &code), &code, 1e-12));
    }

    #[test]
    fn recovery_rejects_uncorrectable_set() {
        let (plus, _, _) = prop1_codespaces(&zx_dec()).unwrap();
        assert!(matches!(
            kl_recovery(&plus, &[pauli::identity(), pauli::z()]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn combined_recovery_is_identity_on_code() {
        // Sandwiching each sector recovery between its own projector removes
        // every syndrome branch, so on the combined code (all of C²⊗C²) the
        // channel is the identity and an X ⊗ I error is left in place.
        let (_, _, combined) = prop1_codespaces(&zx_dec()).unwrap();
        let k = combined_recovery(&combined, &[pauli::identity(), pauli::x()]).unwrap();
        let s = k.iter().fold(Operator::zeros(4), |acc, op| acc + &op.adjoint() * op);
        assert!(close(&s, &Operator::identity(4), 1e-12));
        let pp = kron_ket(&kets::plus(), &kets::plus());
        let rho = Operator::projector(&pp);
        assert!(close(&apply_channel(&k, &rho), &rho, 1e-12));

        let code = kron_ket(&kets::zero(), &kets::plus());
        let hit = embed(&pauli::x(), 0, &[2, 2]).unwrap().apply(&code);
        let out = apply_channel(&k, &Operator::projector(&hit));
        assert!(out.expectation(&code).norm() < 1e-12);
    }
}
