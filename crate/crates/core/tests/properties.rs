use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use proptest::prelude::*;
use qecqm_core::algebra::{
    embed, hermitian_eig, hs_inner, kets, kron_ket, numerical_rank, partial_trace, partial_transpose_op, pauli,
    tensor_product, trace_distance, unitary_exp, DensityState, Operator, C64,
};
use qecqm_core::codes::{
    apply_channel, build_span, combined_recovery, construct_generator_from_noise, decompose_generator,
    prop1_codespaces,
};
use qecqm_core::lindblad::{evolve, EvolutionConfig, LindbladModel, Method};
use qecqm_core::metrology::qfi;
use qecqm_core::protocol::{run_protocol_materialized, separable_input_state, RoundProtocol};
use qecqm_core::sampling::{random_density, random_hermitian, random_ket, random_traceless, random_unitary, rng};
use qecqm_core::separability::{
    ppt_check, product_check, vidal_tarrach_state, vidal_tarrach_threshold, Bipartition,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

/// Symmetric logarithmic derivative from the vectorized Lyapunov equation
/// `½(I⊗ρ + ρᵀ⊗I) vec L = vec ∂ρ`, then `Tr(ρ L²)`.
fn lyapunov_qfi(rho: &Operator, g: &Operator) -> f64 {
    let d = rho.dim();
    let im = C64::new(0.0, 1.0);
    let drho = (&(g * rho) - &(rho * g)).scale(-im);
    let id = DMatrix::<C64>::identity(d, d);
    let m = (id.kronecker(rho.matrix()) + rho.matrix().transpose().kronecker(&id)) * C64::new(0.5, 0.0);
    let svd = m.svd(true, true);
    let vec_l = svd.solve(&drho.vectorize(), 1e-13).expect("svd solve");
    let l = Operator::from_vectorized(&vec_l).unwrap();
    (&(rho * &l) * &l).trace().re
}

fn pure_qfi(v: &qecqm_core::Ket, g: &Operator) -> f64 {
    let gv = g.apply(v);
    let mean = v.dotc(&gv).re;
    4.0 * (gv.dotc(&gv).re - mean * mean)
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn eigensystem_reconstructs(seed in any::<u64>(), dim in 2usize..=8) {
        let a = random_hermitian(dim, &mut rng(seed));
        let es = hermitian_eig(&a).unwrap();
        prop_assert!((&es.reconstruct() - &a).max_abs() <= 1e-10);
        prop_assert!(es.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(es.unitary().unitarity_error() <= 1e-10);
    }

    #[test]
    fn partial_trace_order_independent(seed in any::<u64>(), d0 in 2usize..=3, d1 in 2usize..=3, d2 in 2usize..=3) {
        let s = random_density(&[d0, d1, d2], &mut rng(seed));
        let direct = partial_trace(&s, &[1]).unwrap();
        let a = partial_trace(&partial_trace(&s, &[1, 2]).unwrap(), &[0]).unwrap();
        let b = partial_trace(&partial_trace(&s, &[0, 1]).unwrap(), &[1]).unwrap();
        prop_assert!((direct.op() - a.op()).max_abs() <= 1e-12);
        prop_assert!((direct.op() - b.op()).max_abs() <= 1e-12);
    }

    #[test]
    fn hs_inner_unitarily_invariant(seed in any::<u64>(), dim in 2usize..=6) {
        let mut r = rng(seed);
        let a = qecqm_core::sampling::ginibre(dim, &mut r);
        let b = qecqm_core::sampling::ginibre(dim, &mut r);
        let u = random_unitary(dim, &mut r);
        let lhs = hs_inner(&a.conjugate_by(&u), &b.conjugate_by(&u)).unwrap();
        prop_assert!((lhs - hs_inner(&a, &b).unwrap()).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn partial_transpose_is_involution(seed in any::<u64>(), d0 in 2usize..=3, d1 in 2usize..=3, site in 0usize..2) {
        let s = random_density(&[d0, d1], &mut rng(seed));
        let once = partial_transpose_op(s.op(), &[d0, d1], &[site]).unwrap();
        let twice = partial_transpose_op(&once, &[d0, d1], &[site]).unwrap();
        prop_assert!((&twice - s.op()).max_abs() == 0.0);
    }
}

fn random_model(seed: u64, dim: usize, jumps: usize) -> LindbladModel {
    let mut r = rng(seed);
    let g = random_hermitian(dim, &mut r);
    let g = g.scale_real(1.0 / g.frobenius_norm());
    let ls = (0..jumps).map(|_| random_traceless(dim, &mut r).scale_real(0.4)).collect();
    LindbladModel::new(g, 1.0, ls).unwrap()
}

proptest! {
    #![proptest_config(cases(40))]

    #[test]
    fn evolution_conserves_trace_and_hermiticity(seed in any::<u64>(), dim in 2usize..=3, jumps in 0usize..=2) {
        let model = random_model(seed, dim, jumps);
        let rho = random_density(&[dim], &mut rng(seed ^ 1));
        for method in [Method::RungeKutta4, Method::LiouvillianExponential] {
            let cfg = EvolutionConfig::new(0.5, 100, method).unwrap();
            let out = evolve(&model, &rho, &cfg, 0.5).unwrap();
            prop_assert!((out.op().trace().re - 1.0).abs() <= 1e-10);
            prop_assert!(out.op().hermiticity_error() <= 1e-10);
        }
    }

    #[test]
    fn integrators_agree_on_qubits(seed in any::<u64>(), jumps in 0usize..=2) {
        let model = random_model(seed, 2, jumps);
        let rho = random_density(&[2], &mut rng(seed ^ 2));
        let t = 1.0;
        let rk = evolve(&model, &rho, &EvolutionConfig::new(t, 100, Method::RungeKutta4).unwrap(), t).unwrap();
        let ex = evolve(&model, &rho, &EvolutionConfig::new(t, 1, Method::LiouvillianExponential).unwrap(), t).unwrap();
        prop_assert!(trace_distance(rk.op(), ex.op()).unwrap() <= 1e-8);
    }

    #[test]
    fn exponential_is_a_semigroup(seed in any::<u64>(), t1 in 0.01f64..1.0, t2 in 0.01f64..1.0) {
        let model = random_model(seed, 2, 1);
        let rho = random_density(&[2], &mut rng(seed ^ 3));
        let cfg = EvolutionConfig::new(1.0, 1, Method::LiouvillianExponential).unwrap();
        let split = evolve(&model, &evolve(&model, &rho, &cfg, t1).unwrap(), &cfg, t2).unwrap();
        let joint = evolve(&model, &rho, &cfg, t1 + t2).unwrap();
        prop_assert!((split.op() - joint.op()).max_abs() <= 1e-10);
    }

    #[test]
    fn perpendicular_part_is_orthogonal_to_span(seed in any::<u64>(), dim in 2usize..=4, jumps in 0usize..=2) {
        let model = random_model(seed, dim, jumps);
        let span = build_span(dim, model.jumps()).unwrap();
        let dec = decompose_generator(model.generator(), &span).unwrap();
        for b in &span.ortho_basis {
            prop_assert!(hs_inner(&dec.g_perp, b).unwrap().norm() <= 1e-10);
        }
        prop_assert!((&(&dec.g_parallel + &dec.g_perp) - model.generator()).max_abs() <= 1e-12);
    }
}

fn zero_diagonal_holds(dim: usize, seed: u64) -> Result<(), TestCaseError> {
    let l = random_traceless(dim, &mut rng(seed));
    let g = construct_generator_from_noise(&l, seed).unwrap();
    prop_assert!(g.trace().norm() <= 1e-9);
    prop_assert!(g.is_hermitian(1e-12));
    prop_assert_eq!(numerical_rank(&g, 1e-9), 2);
    prop_assert!((&g * &l).trace().norm() <= 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn zero_diagonal_qubits(seed in any::<u64>()) { zero_diagonal_holds(2, seed)?; }

    #[test]
    fn zero_diagonal_qutrits(seed in any::<u64>()) { zero_diagonal_holds(3, seed)?; }

    #[test]
    fn zero_diagonal_ququarts(seed in any::<u64>()) { zero_diagonal_holds(4, seed)?; }

    #[test]
    fn qubit_generators_outside_span_have_rank_two(
        a in prop::array::uniform3(-1.0f64..1.0),
        g in prop::array::uniform3(-1.0f64..1.0),
        phase in 0.0f64..6.3,
    ) {
        let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        prop_assume!(na > 0.1);
        let l = pauli::dot(a).scale(C64::from_polar(1.0, phase));
        let gen = pauli::dot(g);
        let span = build_span(2, &[l]).unwrap();
        let dec = decompose_generator(&gen, &span).unwrap();
        // distance of g from the line through a
        let along = (g[0] * a[0] + g[1] * a[1] + g[2] * a[2]) / na;
        let perp = ((g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) - along * along).max(0.0).sqrt();
        prop_assume!(perp > 1e-3);
        prop_assert_eq!(dec.perp_rank, 2);
        prop_assert!(prop1_codespaces(&dec).is_ok());
    }

    #[test]
    fn qfi_matches_lyapunov_oracle(seed in any::<u64>(), two_qubits in any::<bool>()) {
        let dims: &[usize] = if two_qubits { &[2, 2] } else { &[2] };
        let mut r = rng(seed);
        let rho = random_density(dims, &mut r);
        let g = random_hermitian(rho.dim(), &mut r);
        let ours = qfi(&rho, &g, 1.0).unwrap().i_value;
        let oracle = lyapunov_qfi(rho.op(), &g);
        prop_assert!((ours - oracle).abs() <= 1e-9 * oracle.max(1.0), "{} vs {}", ours, oracle);
    }

    #[test]
    fn qfi_matches_variance_on_pure_states(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 3, 4])) {
        let mut r = rng(seed);
        let v = random_ket(dim, &mut r);
        let g = random_hermitian(dim, &mut r);
        let rho = DensityState::pure(&v, vec![dim]).unwrap();
        prop_assert!((qfi(&rho, &g, 1.0).unwrap().i_value - pure_qfi(&v, &g)).abs() <= 1e-10 * pure_qfi(&v, &g).max(1.0));
    }

    #[test]
    fn qfi_unitarily_invariant(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let rho = random_density(&[dim], &mut r);
        let g = random_hermitian(dim, &mut r);
        let u = random_unitary(dim, &mut r);
        let a = qfi(&rho, &g, 1.0).unwrap().i_value;
        let rotated = DensityState::new(rho.op().conjugate_by(&u), vec![dim]).unwrap();
        let b = qfi(&rotated, &g.conjugate_by(&u), 1.0).unwrap().i_value;
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn qfi_is_convex(seed in any::<u64>(), dim in 2usize..=4, p in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let a = random_density(&[dim], &mut r);
        let b = random_density(&[dim], &mut r);
        let g = random_hermitian(dim, &mut r);
        let mix = DensityState::new(&a.op().scale_real(p) + &b.op().scale_real(1.0 - p), vec![dim]).unwrap();
        let lhs = qfi(&mix, &g, 1.0).unwrap().i_value;
        let rhs = p * qfi(&a, &g, 1.0).unwrap().i_value + (1.0 - p) * qfi(&b, &g, 1.0).unwrap().i_value;
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn ppt_invariant_under_local_unitaries(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_density(&[2, 2], &mut r);
        let u = tensor_product(&random_unitary(2, &mut r), &random_unitary(2, &mut r));
        let cut = Bipartition::pair(0, 1).unwrap();
        let rotated = DensityState::new(s.op().conjugate_by(&u), vec![2, 2]).unwrap();
        let a = ppt_check(&s, &cut).unwrap();
        let b = ppt_check(&rotated, &cut).unwrap();
        prop_assert!((a.min_pt_eigenvalue - b.min_pt_eigenvalue).abs() <= 1e-10);
        prop_assert_eq!(a.ppt, b.ppt);
    }

    #[test]
    fn entangled_pure_states_are_npt(seed in any::<u64>(), p in 0.05f64..=0.95) {
        // Schmidt form √p|00⟩ + √(1−p)|11⟩ under random local unitaries
        let mut r = rng(seed);
        let mut v = qecqm_core::Ket::zeros(4);
        v[0] = C64::new(p.sqrt(), 0.0);
        v[3] = C64::new((1.0 - p).sqrt(), 0.0);
        let u = tensor_product(&random_unitary(2, &mut r), &random_unitary(2, &mut r));
        let s = DensityState::pure(&u.apply(&v), vec![2, 2]).unwrap();
        let verdict = ppt_check(&s, &Bipartition::pair(0, 1).unwrap()).unwrap();
        prop_assert!(!verdict.ppt);
        prop_assert!((verdict.min_pt_eigenvalue + (p * (1.0 - p)).sqrt()).abs() <= 1e-10);
    }

    #[test]
    fn product_distance_vanishes_exactly_on_products(seed in any::<u64>(), d0 in 2usize..=3, d1 in 2usize..=3) {
        let mut r = rng(seed);
        let a = random_density(&[d0], &mut r);
        let b = random_density(&[d1], &mut r);
        let cut = Bipartition::pair(0, 1).unwrap();
        let prod = product_check(&a.tensor(&b), &cut).unwrap();
        prop_assert!(prod.product_distance <= 1e-12 && prod.is_product);
        let generic = random_density(&[d0, d1], &mut r);
        prop_assert!(product_check(&generic, &cut).unwrap().product_distance > 1e-12);
    }
}

#[test]
fn vidal_tarrach_grid() {
    let cut = Bipartition::pair(0, 1).unwrap();
    for i in 0..50 {
        let theta = FRAC_PI_2 * i as f64 / 49.0;
        let thr = vidal_tarrach_threshold(theta);
        for j in 0..50 {
            let s = 4.0 * j as f64 / 49.0;
            let v = ppt_check(&vidal_tarrach_state(theta, s).unwrap(), &cut).unwrap();
            if s >= thr {
                assert!(v.ppt, "θ={theta} s={s}");
            }
            if thr > 0.05 && s <= thr - 0.05 {
                assert!(!v.ppt, "θ={theta} s={s}");
            }
        }
    }
}

#[test]
fn combined_code_first_round_is_second_order() {
    // |+⟩|+⟩ evolves for dt under (G=Z, L=X) on the probe, then the combined
    // recovery; distance from exp(-iZdt)|+⟩|+⟩ must shrink 4× when dt halves.
    let model = LindbladModel::new(pauli::z(), 1.0, vec![pauli::x()]).unwrap();
    let span = build_span(2, model.jumps()).unwrap();
    let (_, _, combined) = prop1_codespaces(&decompose_generator(model.generator(), &span).unwrap()).unwrap();
    let k = combined_recovery(&combined, &[Operator::identity(2), pauli::x()]).unwrap();
    let lifted = model.lift(&[2, 2], 0).unwrap();
    let pp = kron_ket(&kets::plus(), &kets::plus());
    let start = DensityState::pure(&pp, vec![2, 2]).unwrap();
    let residual = |dt: f64| {
        let cfg = EvolutionConfig::new(dt, 1, Method::LiouvillianExponential).unwrap();
        let out = evolve(&lifted, &start, &cfg, dt).unwrap();
        let rec = apply_channel(&k, out.op());
        let u = embed(&unitary_exp(&pauli::z(), dt).unwrap(), 0, &[2, 2]).unwrap();
        trace_distance(&rec, &Operator::projector(&u.apply(&pp))).unwrap()
    };
    let (r1, r2) = (residual(0.02), residual(0.01));
    assert!(r1 < 1e-3);
    assert!((r1 / r2 - 4.0).abs() <= 0.4, "ratio {}", r1 / r2);
}

#[test]
fn separable_input_stays_ppt_on_every_cut() {
    let model = LindbladModel::new(pauli::z(), 1.0, vec![pauli::x()]).unwrap();
    let cfg = EvolutionConfig::new(0.05, 1, Method::LiouvillianExponential).unwrap();
    for kappa in 1..=5 {
        for k in 0..6 {
            let theta = 0.3 * k as f64;
            let state = separable_input_state(theta, 2.0, kappa).unwrap();
            for a in 1..=kappa {
                let v = ppt_check(&state, &Bipartition::pair(0, a).unwrap()).unwrap();
                assert!(v.ppt);
            }
            let tr = run_protocol_materialized(&state, &model, &RoundProtocol::cnot_propagation(), &cfg).unwrap();
            assert_eq!(tr.len(), kappa);
            assert!(tr.min_pt_eigenvalue() >= -1e-10, "κ={kappa} θ={theta}: {}", tr.min_pt_eigenvalue());
        }
    }
}
