//! Quantum Fisher information, the Cramér–Rao bound and scaling fits.

use crate::algebra::{eig_unchecked, hermitian_eig, DensityState, Operator};
use crate::error::{domain, Result};

/// Eigenvalue pairs with `λᵢ + λⱼ` at or below this are skipped.
pub const QFI_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QfiResult {
    /// `I = 2 Σᵢⱼ (λᵢ − λⱼ)² / (λᵢ + λⱼ) |⟨i|G|j⟩|²`
    pub i_value: f64,
    /// `F = t² I`
    pub fisher: f64,
    /// Ordered pairs dropped by the cutoff.
    pub skipped_pairs: usize,
}

/// QFI of `ρ` for the unitary family generated by `g`, scaled by `t²`.
pub fn qfi(rho: &DensityState, g: &Operator, t: f64) -> Result<QfiResult> {
    qfi_with_cutoff(rho, g, t, QFI_CUTOFF)
}

pub fn qfi_with_cutoff(rho: &DensityState, g: &Operator, t: f64, cutoff: f64) -> Result<QfiResult> {
    if g.dim() != rho.dim() {
        return Err(domain(format!(
            "generator dimension {} does not match state dimension {}",
            g.dim(),
            rho.dim()
        )));
    }
    if !g.is_hermitian(1e-10) {
        return Err(domain("qfi requires a Hermitian generator"));
    }
    let es = rho.eigensystem();
    let gv: Vec<_> = es.eigenvectors.iter().map(|v| g.apply(v)).collect();
    let mut total = 0.0;
    let mut skipped = 0;
    for (li, vi) in es.eigenvalues.iter().zip(&es.eigenvectors) {
        for (j, lj) in es.eigenvalues.iter().enumerate() {
            let sum = li + lj;
            if sum <= cutoff {
                skipped += 1;
                continue;
            }
            let diff = li - lj;
            if diff == 0.0 {
                continue;
            }
            total += 2.0 * diff * diff / sum * vi.dotc(&gv[j]).norm_sqr();
        }
    }
    let i_value = total.max(0.0);
    Ok(QfiResult {
        i_value,
        fisher: t * t * i_value,
        skipped_pairs: skipped,
    })
}

/// `2 Σᵢⱼ |⟨i|∂ρ|j⟩|² / (λᵢ + λⱼ)` for a given derivative `∂ρ`.
pub fn sld_qfi(rho: &Operator, drho: &Operator) -> Result<f64> {
    rho.check_same_dim(drho, "sld_qfi")?;
    let es = hermitian_eig(rho)?;
    let dv: Vec<_> = es.eigenvectors.iter().map(|v| drho.apply(v)).collect();
    let mut total = 0.0;
    for (li, vi) in es.eigenvalues.iter().zip(&es.eigenvectors) {
        for (lj, dj) in es.eigenvalues.iter().zip(&dv) {
            let sum = li + lj;
            if sum > QFI_CUTOFF {
                total += 2.0 * vi.dotc(dj).norm_sqr() / sum;
            }
        }
    }
    Ok(total)
}

/// QFI of a parametrized family at `theta`, from a central difference with
/// step `h`.
pub fn parameter_qfi<F>(family: F, theta: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityState>,
{
    if !(h > 0.0) {
        return Err(domain("finite-difference step must be positive"));
    }
    let rho = family(theta)?;
    let fwd = family(theta + h)?;
    let bwd = family(theta - h)?;
    let drho = (fwd.op() - bwd.op()).scale_real(0.5 / h);
    sld_qfi(rho.op(), &drho)
}

/// `1 / √(ν F)`
pub fn cramer_rao(fisher: f64, nu: u64) -> Result<f64> {
    if !(fisher > 0.0) || !fisher.is_finite() {
        return Err(domain(format!("Fisher information must be positive, got {fisher}")));
    }
    if nu == 0 {
        return Err(domain("number of repetitions must be at least 1"));
    }
    Ok(1.0 / (nu as f64 * fisher).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    /// Slope of `log F` against `log t`.
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_grid: Vec<f64>,
}

/// Least-squares fit of `log F = exponent · log t + intercept`.
pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 4 {
        return Err(domain(format!("scaling fit needs at least 4 points, got {}", points.len())));
    }
    if let Some(&(t, f)) = points.iter().find(|&&(t, f)| !(t > 0.0 && f > 0.0 && t.is_finite() && f.is_finite())) {
        return Err(domain(format!("scaling fit needs positive t and Fisher values, got ({t}, {f})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * n {
        return Err(domain("scaling fit needs distinct times"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum();
    let r_squared = if ss_tot <= 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        exponent,
        intercept,
        r_squared,
        t_grid: points.iter().map(|p| p.0).collect(),
    })
}

/// Local log-log slope at each point: centered in the interior, one-sided at
/// the ends. Non-positive Fisher values give `NaN`.
pub fn running_exponents(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    let slope = |a: usize, b: usize| {
        let (ta, fa) = points[a];
        let (tb, fb) = points[b];
        if fa > 0.0 && fb > 0.0 && ta > 0.0 && tb > 0.0 && ta != tb {
            (fb.ln() - fa.ln()) / (tb.ln() - ta.ln())
        } else {
            f64::NAN
        }
    };
    (0..n)
        .map(|i| match (i, n) {
            (_, 0 | 1) => f64::NAN,
            (0, _) => slope(0, 1),
            (i, n) if i == n - 1 => slope(n - 2, n - 1),
            (i, _) => slope(i - 1, i + 1),
        })
        .collect()
}

/// `4 (⟨G²⟩ − ⟨G⟩²)` on the dominant eigenvector; exact for pure states.
pub fn pure_state_qfi(rho: &DensityState, g: &Operator) -> Result<f64> {
    g.check_same_dim(rho.op(), "pure_state_qfi")?;
    let es = eig_unchecked(rho.op());
    let v = es.eigenvectors.last().expect("non-empty");
    let gv = g.apply(v);
    let mean = v.dotc(&gv).re;
    Ok(4.0 * (gv.dotc(&gv).re - mean * mean))
}
