use super::*;
use crate::likelihood::{expand_design, hessian_quadratic, Block};
use crate::solver::{fit, FitOptions, PenaltyKind, PenaltySpec};
use crate::testutil::{random_vec, signal_data};
use ndarray::array;

#[test]
fn p_inf_examples() {
    let layout = GroupLayout::from_blocks(
        Family::TimeVarying,
        3,
        vec![Block {
            covariate: Some(0),
            scalar: Some(0),
            vector: 1..3,
            penalized: true,
        }],
    );
    assert_eq!(p_inf_norm(array![0.0, 0.0, 0.0].view(), &layout), 0.0);
    assert_eq!(p_inf_norm(array![1.0, 3.0, 4.0].view(), &layout), 5.0);

    let layout = GroupLayout::new(Family::TimeVarying, 4, 5, false);
    for seed in 0..10 {
        let v = random_vec(20, 3.0, seed);
        let mut brute: f64 = 0.0;
        for j in 0..4 {
            brute = brute.max(v[5 * j].abs());
            brute = brute.max((1..5).map(|k| v[5 * j + k].powi(2)).sum::<f64>().sqrt());
        }
        assert_eq!(p_inf_norm(v.view(), &layout), brute);
    }
}

#[test]
fn score_deviation_on_two_subjects() {
    let basis = OrthoBasis::new(3, 2).unwrap();
    let data = SurvivalDataset::new(vec![0.2, 0.7], vec![true, true], array![[0.3], [0.8]], None, Family::TimeVarying).unwrap();
    let d = expand_design(&data, &basis).unwrap();
    // gradient = -(1/4)(x1 - x2) B̄(t1)
    let b = basis.eval(0.2).unwrap();
    let g = &b * (-(0.3 - 0.8) / 4.0);
    let want = g[0].abs().max((g[1] * g[1] + g[2] * g[2]).sqrt());
    let got = score_deviation(&d, Array1::zeros(3).view()).unwrap();
    assert!((got - want).abs() < 1e-15);

    let perm = signal_data(Family::TimeVarying, 40, 3, 1.0, 2);
    let d1 = expand_design(&perm, &basis).unwrap();
    let order: Vec<usize> = (0..40).rev().collect();
    let d2 = expand_design(&perm.permute(&order), &basis).unwrap();
    let gs = random_vec(d1.dim(), 0.5, 1);
    let a = score_deviation(&d1, gs.view()).unwrap();
    let c = score_deviation(&d2, gs.view()).unwrap();
    assert!((a - c).abs() < 1e-14);
}

#[test]
fn c_w_properties() {
    let basis = OrthoBasis::new(5, 3).unwrap();
    let unit = signal_data(Family::Additive, 30, 2, 1.0, 1);
    assert!(c_w(&basis, &unit) <= 2.0 * basis.transform_eigen().1.sqrt() + 1e-15);
    let tv = signal_data(Family::TimeVarying, 30, 2, 1.0, 1);
    let doubled = tv.scale_covariates(2.0);
    assert!((c_w(&basis, &doubled) - 2.0 * c_w(&basis, &tv)).abs() < 1e-12);
}

#[test]
fn deviation_is_bounded_by_c_w_p1() {
    let basis = OrthoBasis::new(5, 2).unwrap();
    for fam in [Family::TimeVarying, Family::IndexVc, Family::Additive] {
        let data = signal_data(fam, 40, 3, 1.0, 3);
        let d = expand_design(&data, &basis).unwrap();
        let cw = c_w(&basis, &data);
        for seed in 0..300 {
            let th = random_vec(d.dim(), 1.0, seed);
            let dev = crate::likelihood::deviation(&d, th.view()).unwrap();
            assert!(dev <= cw * p1_norm(th.view(), d.layout()) * (1.0 + 1e-12), "{fam}");
        }
    }
}

#[test]
fn sandwich_bound_holds() {
    let basis = OrthoBasis::new(4, 2).unwrap();
    for fam in [Family::TimeVarying, Family::Additive] {
        let data = signal_data(fam, 50, 2, 1.0, 4);
        let d = expand_design(&data, &basis).unwrap();
        let gs = random_vec(d.dim(), 0.5, 8);
        for seed in 0..30 {
            let th = random_vec(d.dim(), 0.3 + 0.1 * seed as f64, 100 + seed);
            let dev = crate::likelihood::deviation(&d, th.view()).unwrap();
            let q = hessian_quadratic(&d, gs.view(), th.view()).unwrap();
            let g1 = gradient(&d, (&gs + &th).view()).unwrap();
            let g0 = gradient(&d, gs.view()).unwrap();
            let mid = (&g1 - &g0).dot(&th);
            assert!((-dev).exp() * q <= mid + 1e-8 && mid <= dev.exp() * q + 1e-8);
        }
    }
}

fn support_first(dim_slots: usize, k: usize) -> SlotSupport {
    SlotSupport {
        slots: (0..dim_slots)
            .map(|i| Slot {
                coords: vec![i],
                in_support: i < k,
            })
            .collect(),
    }
}

#[test]
fn identity_collapses_re_bracket() {
    let sigma = Array2::<f64>::eye(6);
    let br = cone_quantities(&sigma, &support_first(6, 2), 3.0, &ConeOptions::default()).unwrap();
    assert!((br.re_sq.0 - 1.0).abs() < 1e-6 && (br.re_sq.1 - 1.0).abs() < 1e-6);
    assert!(br.kappa_sq.1 >= br.re_sq.1 - 1e-12);
}

#[test]
fn feasible_min_eigenvector_closes_bracket() {
    let mut sigma = Array2::<f64>::eye(5);
    sigma[[0, 0]] = 2.0;
    // min eigen-direction e_2 is in the support, hence in the cone
    let sup = support_first(5, 3);
    let br = cone_quantities(&sigma, &sup, 1.0, &ConeOptions::default()).unwrap();
    assert!(br.re_sq.1 <= br.lambda_min + 1e-9);
}

fn random_psd(dim: usize, seed: u64) -> Array2<f64> {
    let a = Array2::from_shape_vec((dim, dim), random_vec(dim * dim, 1.0, seed).to_vec()).unwrap();
    a.t().dot(&a) / dim as f64
}

#[test]
fn brackets_are_monotone_in_the_matrix() {
    let opts = ConeOptions {
        samples: 500,
        seed: 3,
        eigenvector: false,
        polish_steps: 0,
    };
    for seed in 0..10 {
        let s2 = random_psd(6, seed);
        let s1 = &s2 + &random_psd(6, 100 + seed);
        let sup = support_first(6, 2);
        let b1 = cone_quantities(&s1, &sup, 2.0, &opts).unwrap();
        let b2 = cone_quantities(&s2, &sup, 2.0, &opts).unwrap();
        assert!(b1.kappa_sq.0 >= b2.kappa_sq.0 - 1e-12 && b1.kappa_sq.1 >= b2.kappa_sq.1 - 1e-12);
        assert!(b1.re_sq.0 >= b2.re_sq.0 - 1e-12 && b1.re_sq.1 >= b2.re_sq.1 - 1e-12);
        for b in [b1, b2] {
            assert!(b.kappa_sq.0 <= b.kappa_sq.1 && b.re_sq.0 <= b.re_sq.1);
            assert!(b.kappa_sq.1 >= b.re_sq.1 - 1e-12);
        }
    }
}

#[test]
fn perturbation_bound_per_direction() {
    let (dim, zeta) = (6, 2.0f64);
    let sup = support_first(dim, 2);
    let opts = ConeOptions {
        samples: 300,
        ..ConeOptions::default()
    };
    for seed in 0..10 {
        let s1 = random_psd(dim, seed);
        let s2 = &s1 + &(random_psd(dim, 50 + seed) * 0.1);
        let gap = (&s1 - &s2).iter().map(|x| x.abs()).fold(0.0, f64::max);
        let slack = sup.s0() as f64 * (1.0 + zeta).powi(2) * gap;
        for th in cone_directions(dim, &sup, zeta, &opts) {
            let k1 = kappa_ratio(&s1, &sup, &th);
            let k2 = kappa_ratio(&s2, &sup, &th);
            assert!(k1 >= k2 - slack - 1e-12);
        }
    }
}

#[test]
fn asymmetric_matrix_is_rejected() {
    let mut s = Array2::<f64>::eye(3);
    s[[0, 1]] = 1e-6;
    assert!(matches!(
        cone_quantities(&s, &support_first(3, 1), 1.0, &ConeOptions::default()),
        Err(Error::NotSymmetric(_))
    ));
}

#[test]
fn eta_roots() {
    let e1 = (-1.0f64).exp();
    let eta = smaller_root(0.1).unwrap();
    assert!((eta - 0.111833).abs() < 1e-6);
    assert!((eta * (-eta).exp() - 0.1).abs() < 1e-10);
    assert!(smaller_root(e1 - 1e-9).unwrap() > 0.999);
    assert!(smaller_root(0.5).is_none());
    assert!(smaller_root(e1).is_none());
    let (tau, eta) = tau_eta(2, 0.01, 1.0, 0.5, 1.0);
    assert!((tau - 0.09).abs() < 1e-15);
    assert!(eta.is_some());
}

#[test]
fn out_of_regime_is_flagged() {
    let basis = OrthoBasis::new(4, 2).unwrap();
    let mut truth = TruthSpec::null(Family::TimeVarying, 3, 3);
    truth.functions[0] = crate::survival::GFunction::Const(1.0);
    truth.censor_rate = 0.3;
    let data = crate::survival::simulate(&truth, 100, 1, 0).unwrap();
    let d = expand_design(&data, &basis).unwrap();
    let gs = gamma_star(&truth, d.layout(), &basis).unwrap();
    let sup = SlotSupport::from_truth(d.layout(), &truth);
    assert_eq!(sup.s0(), 1);
    let d_l = score_deviation(&d, gs.view()).unwrap();
    let res = fit(&d, &PenaltySpec::new(PenaltyKind::P1, 0.5 * d_l), &FitOptions::default()).unwrap();
    let rep = oracle_check(&res, &d, gs.view(), &sup, c_w(&basis, &data), 0.5, &ConeOptions::default()).unwrap();
    assert!(!rep.in_regime);
    assert_eq!(rep.holds, None);
    assert!(rep.reason.as_deref().unwrap().contains("out of regime"));
    assert!(rep.kappa_sq_lower <= rep.kappa_sq_upper);
    assert!(rep.to_text().contains("eta_star"));
}

#[test]
fn gamma_star_reproduces_constants() {
    let basis = OrthoBasis::new(6, 3).unwrap();
    let mut truth = TruthSpec::null(Family::TimeVarying, 2, 2);
    truth.functions[0] = crate::survival::GFunction::Const(2.0);
    let layout = GroupLayout::new(Family::TimeVarying, 2, 6, false);
    let gs = gamma_star(&truth, &layout, &basis).unwrap();
    assert!((gs[0] - 2.0 * 6f64.sqrt()).abs() < 1e-12);
    assert!(gs.iter().skip(1).all(|x| x.abs() < 1e-12));
}
