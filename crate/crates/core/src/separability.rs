//! PPT verdicts, the Vidal–Tarrach family and product-state checks.

use crate::algebra::{
    eig_unchecked, kets, partial_trace_op, partial_transpose_op, permute_subsystems, tensor_product, trace_distance,
    DensityState, Operator, C64,
};
use crate::error::{domain, Result};

/// `ppt` holds iff the smallest partial-transpose eigenvalue is at least `-PPT_TOL`.
pub const PPT_TOL: f64 = 1e-10;

/// Trace-distance threshold for [`CorrelationVerdict::is_product`].
pub const PRODUCT_TOL: f64 = 1e-9;

/// Two disjoint groups of subsystems. Subsystems in neither group are traced
/// out before any test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Bipartition {
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(domain("both sides of a bipartition must be non-empty"));
        }
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("bipartition sides overlap or repeat a subsystem"));
        }
        Ok(Self { a, b })
    }

    /// `{0} | {1}`
    pub fn pair(a: usize, b: usize) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    /// `{first} | {rest}` over `n` subsystems.
    pub fn first_vs_rest(n: usize) -> Result<Self> {
        Self::new(vec![0], (1..n).collect())
    }

    pub fn describe(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        format!("{{{}}}|{{{}}}", list(&self.a), list(&self.b))
    }

    fn validate(&self, dims: &[usize]) -> Result<()> {
        if let Some(bad) = self.a.iter().chain(&self.b).find(|&&k| k >= dims.len()) {
            return Err(domain(format!(
                "bipartition refers to subsystem {bad} but the state has {} subsystems",
                dims.len()
            )));
        }
        Ok(())
    }

    /// The state restricted to `a ∪ b`, reordered as `a` then `b`, with the
    /// side dimensions.
    fn arrange(&self, s: &DensityState) -> Result<(Operator, usize, usize)> {
        let dims = s.subsystem_dims();
        self.validate(dims)?;
        let mut keep: Vec<usize> = self.a.iter().chain(&self.b).copied().collect();
        keep.sort_unstable();
        let reduced = if keep.len() == dims.len() {
            s.op().clone()
        } else {
            partial_trace_op(s.op(), dims, &keep)?
        };
        let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let pos = |k: &usize| keep.iter().position(|x| x == k).expect("kept");
        let perm: Vec<usize> = self.a.iter().chain(&self.b).map(pos).collect();
        let op = permute_subsystems(&reduced, &kept_dims, &perm)?;
        let da = self.a.iter().map(|&k| dims[k]).product();
        let db = self.b.iter().map(|&k| dims[k]).product();
        Ok((op, da, db))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparabilityVerdict {
    pub min_pt_eigenvalue: f64,
    pub ppt: bool,
    /// Sum of the magnitudes of the negative partial-transpose eigenvalues.
    pub negativity: f64,
    pub cut: String,
    /// PPT is equivalent to separability for the cut dimensions.
    pub conclusive: bool,
}

impl SeparabilityVerdict {
    /// `Some(true)` for certified separable, `Some(false)` for certified
    /// entangled, `None` when PPT holds but the cut is too large to decide.
    pub fn separable(&self) -> Option<bool> {
        match (self.ppt, self.conclusive) {
            (false, _) => Some(false),
            (true, true) => Some(true),
            (true, false) => None,
        }
    }
}

/// Peres–Horodecki test with the transpose on side `b`.
pub fn ppt_check(s: &DensityState, cut: &Bipartition) -> Result<SeparabilityVerdict> {
    let (op, da, db) = cut.arrange(s)?;
    let pt = partial_transpose_op(&op, &[da, db], &[1])?;
    let es = eig_unchecked(&pt);
    let min = es.min();
    Ok(SeparabilityVerdict {
        min_pt_eigenvalue: min,
        ppt: min >= -PPT_TOL,
        negativity: es.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum(),
        cut: cut.describe(),
        conclusive: da * db <= 6,
    })
}

/// Smallest eigenvalue of `ρ^{T_B}` for an operator on `dims = [d_A, d_B]`.
pub(crate) fn min_pt_eigenvalue(op: &Operator, dims: &[usize; 2]) -> f64 {
    let pt = partial_transpose_op(op, dims, &[1]).expect("valid dims");
    eig_unchecked(&pt).min()
}

/// `|ψ_θ⟩⟨ψ_θ|/(1+s) + s/(4(1+s)) I` with `|ψ_θ⟩ = cos θ|00⟩ + sin θ|11⟩`.
pub fn vidal_tarrach_state(theta: f64, s: f64) -> Result<DensityState> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain(format!("mixing parameter s must be finite and non-negative, got {s}")));
    }
    let psi = kets::basis(4, 0) * C64::new(theta.cos(), 0.0) + kets::basis(4, 3) * C64::new(theta.sin(), 0.0);
    let op = &Operator::projector(&psi).scale_real(1.0 / (1.0 + s))
        + &Operator::identity(4).scale_real(s / (4.0 * (1.0 + s)));
    Ok(DensityState::trusted(op, vec![2, 2]))
}

/// `2 sin 2θ`: the state is separable for `s` at or above this value.
pub fn vidal_tarrach_threshold(theta: f64) -> f64 {
    2.0 * (2.0 * theta).sin()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub s: f64,
    pub verdict: SeparabilityVerdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdScan {
    pub theta: f64,
    pub points: Vec<ScanPoint>,
    /// Smallest grid value from which every larger grid value is PPT.
    pub transition: Option<f64>,
}

pub fn threshold_sharpness_scan(theta: f64, s_grid: &[f64]) -> Result<ThresholdScan> {
    let cut = Bipartition::pair(0, 1)?;
    let points = s_grid
        .iter()
        .map(|&s| {
            Ok(ScanPoint {
                s,
                verdict: ppt_check(&vidal_tarrach_state(theta, s)?, &cut)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<&ScanPoint> = points.iter().collect();
    sorted.sort_by(|x, y| x.s.total_cmp(&y.s));
    let mut transition = None;
    for p in sorted.iter().rev() {
        if !p.verdict.ppt {
            break;
        }
        transition = Some(p.s);
    }
    Ok(ThresholdScan {
        theta,
        points,
        transition,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationVerdict {
    /// `‖ρ − ρ_A ⊗ ρ_B‖₁ / 2`
    pub product_distance: f64,
    pub is_product: bool,
    pub cut: String,
}

pub fn product_check(s: &DensityState, cut: &Bipartition) -> Result<CorrelationVerdict> {
    let (op, da, db) = cut.arrange(s)?;
    let rho_a = partial_trace_op(&op, &[da, db], &[0])?;
    let rho_b = partial_trace_op(&op, &[da, db], &[1])?;
    let product_distance = trace_distance(&op, &tensor_product(&rho_a, &rho_b))?;
    Ok(CorrelationVerdict {
        product_distance,
        is_product: product_distance <= PRODUCT_TOL,
        cut: cut.describe(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::kron_ket;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

    fn pure(v: &crate::algebra::Ket, dims: Vec<usize>) -> DensityState {
        DensityState::pure(v, dims).unwrap()
    }

    #[test]
    fn bell_state_is_entangled() {
        let v = ppt_check(&pure(&kets::phi_plus(), vec![2, 2]), &Bipartition::pair(0, 1).unwrap()).unwrap();
        assert!((v.min_pt_eigenvalue + 0.5).abs() < 1e-14);
        assert!(!v.ppt && v.conclusive);
        assert_eq!(v.separable(), Some(false));
        assert!((v.negativity - 0.5).abs() < 1e-14);
        assert_eq!(v.cut, "{0}|{1}");
    }

    #[test]
    fn product_state_is_ppt() {
        let s = pure(&kron_ket(&kets::plus(), &kets::zero()), vec![2, 2]);
        let v = ppt_check(&s, &Bipartition::pair(0, 1).unwrap()).unwrap();
        assert!(v.ppt);
        assert!(v.min_pt_eigenvalue.abs() < 1e-14);
    }

    #[test]
    fn invalid_cuts() {
        let s = DensityState::maximally_mixed(vec![2, 2]).unwrap();
        assert!(Bipartition::new(vec![0], vec![0]).is_err());
        assert!(Bipartition::new(vec![], vec![1]).is_err());
        assert!(ppt_check(&s, &Bipartition::pair(0, 2).unwrap()).is_err());
        assert!(product_check(&s, &Bipartition::pair(3, 1).unwrap()).is_err());
    }

    #[test]
    fn vidal_tarrach_examples() {
        let s = vidal_tarrach_state(0.0, 0.0).unwrap();
        assert!((s.op() - &Operator::projector(&kets::basis(4, 0))).max_abs() < 1e-15);

        let s = vidal_tarrach_state(FRAC_PI_4, 2.0).unwrap();
        assert!((s.op().trace().re - 1.0).abs() < 1e-14);
        assert!(s.min_eigenvalue() >= 0.0);
        let v = ppt_check(&s, &Bipartition::pair(0, 1).unwrap()).unwrap();
        assert!(v.ppt && v.conclusive);
        assert_eq!(v.separable(), Some(true));

        let far = vidal_tarrach_state(FRAC_PI_4, 1e9).unwrap();
        assert!((far.op() - &Operator::identity(4).scale_real(0.25)).max_abs() < 1e-9);

        assert!(vidal_tarrach_state(0.1, -1.0).is_err());
    }

    #[test]
    fn pt_minimum_matches_closed_form() {
        for &(theta, s) in &[(0.3, 0.5), (FRAC_PI_4, 1.0), (1.2, 3.0), (FRAC_PI_8, 0.0)] {
            let v = ppt_check(&vidal_tarrach_state(theta, s).unwrap(), &Bipartition::pair(0, 1).unwrap()).unwrap();
            let closed = (s / 4.0 - (2.0 * theta).sin().abs() / 2.0) / (1.0 + s);
            assert!((v.min_pt_eigenvalue - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn thresholds() {
        assert!((vidal_tarrach_threshold(FRAC_PI_4) - 2.0).abs() < 1e-15);
        assert_eq!(vidal_tarrach_threshold(0.0), 0.0);
        assert!((vidal_tarrach_threshold(FRAC_PI_8) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sharpness_scan_at_quarter_pi() {
        let scan = threshold_sharpness_scan(FRAC_PI_4, &[1.8, 1.9, 1.95, 2.0, 2.5]).unwrap();
        let ppt: Vec<bool> = scan.points.iter().map(|p| p.verdict.ppt).collect();
        assert_eq!(ppt, [false, false, false, true, true]);
        assert_eq!(scan.transition, Some(2.0));

        let scan = threshold_sharpness_scan(0.0, &[0.0, 0.3, 7.0]).unwrap();
        assert!(scan.points.iter().all(|p| p.verdict.ppt));
        assert_eq!(scan.transition, Some(0.0));
    }

    #[test]
    fn product_distances() {
        let s = pure(&kron_ket(&kets::plus(), &kets::zero()), vec![2, 2]);
        let c = product_check(&s, &Bipartition::pair(0, 1).unwrap()).unwrap();
        assert!(c.product_distance < 1e-14 && c.is_product);

        // ½‖|Φ⁺⟩⟨Φ⁺| − I/4‖₁ = ½(3/4 + 3·1/4)
        let c = product_check(&pure(&kets::phi_plus(), vec![2, 2]), &Bipartition::pair(0, 1).unwrap()).unwrap();
        assert!((c.product_distance - 0.75).abs() < 1e-14);
        assert!(!c.is_product);

        let s = pure(&kron_ket(&kets::plus(), &kets::plus()), vec![2, 2]);
        assert!(product_check(&s, &Bipartition::pair(0, 1).unwrap()).unwrap().is_product);
    }

    #[test]
    fn cuts_select_and_reorder_subsystems() {
        // Bell pair on subsystems 0 and 2, |+⟩ on subsystem 1.
        let bell = DensityState::pure(&kets::phi_plus(), vec![2, 2]).unwrap();
        let plus = DensityState::pure(&kets::plus(), vec![2]).unwrap();
        let joint = bell.tensor(&plus);
        let swap12 = permute_subsystems(joint.op(), &[2, 2, 2], &[0, 2, 1]).unwrap();
        let s = DensityState::new(swap12, vec![2, 2, 2]).unwrap();

        let v = ppt_check(&s, &Bipartition::pair(2, 0).unwrap()).unwrap();
        assert!((v.min_pt_eigenvalue + 0.5).abs() < 1e-13);
        assert!(ppt_check(&s, &Bipartition::pair(0, 1).unwrap()).unwrap().ppt);
        assert!(product_check(&s, &Bipartition::new(vec![1], vec![0, 2]).unwrap()).unwrap().is_product);
        let v = ppt_check(&s, &Bipartition::new(vec![0, 1], vec![2]).unwrap()).unwrap();
        assert!(!v.ppt && !v.conclusive);
    }

    #[test]
    fn local_unitaries_preserve_pt_spectrum() {
        let mut rng = crate::sampling::rng(8);
        let cut = Bipartition::pair(0, 1).unwrap();
        for _ in 0..20 {
            let s = crate::sampling::random_density(&[2, 2], &mut rng);
            let ua = crate::sampling::random_unitary(2, &mut rng);
            let ub = crate::sampling::random_unitary(2, &mut rng);
            let u = tensor_product(&ua, &ub);
            let rotated = DensityState::new(s.op().conjugate_by(&u), vec![2, 2]).unwrap();
            let a = ppt_check(&s, &cut).unwrap().min_pt_eigenvalue;
            let b = ppt_check(&rotated, &cut).unwrap().min_pt_eigenvalue;
            assert!((a - b).abs() < 1e-10);
        }
    }
}
