mod common;

use common::signal_data;
use vcox::likelihood::{expand_design, standardize};
use vcox::survival::{read_csv, simulate, write_csv};
use vcox::{extract_estimates, fit, threshold_select, Family, FitOptions, GroupCoefficients, OrthoBasis, PenaltyKind, PenaltySpec, RunConfig, TruthSpec};

#[test]
fn csv_round_trip_preserves_simulated_data() {
    for truth in [TruthSpec::index_vc_table(12, 8), TruthSpec::additive_table(12, 8)] {
        let data = simulate(&truth, 40, 5, 2).unwrap();
        let mut buf = vec![];
        write_csv(&data, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), truth.family).unwrap();
        assert_eq!(back, data);
    }
}

#[test]
fn strong_signals_are_selected_end_to_end() {
    let mut truth = TruthSpec::index_vc_table(20, 8);
    truth.functions[0] = vcox::GFunction::Const(2.0);
    truth.functions[1] = vcox::GFunction::Const(2.0);
    let basis = OrthoBasis::new(6, 3).unwrap();
    let data = simulate(&truth, 800, 9, 0).unwrap();
    let d = expand_design(&data, &basis).unwrap();
    let (sd, st) = standardize(&d).unwrap();
    let res = fit(&sd, &PenaltySpec::new(PenaltyKind::P1, 0.1), &FitOptions::default()).unwrap();
    assert!(res.converged);
    let g = GroupCoefficients::new(st.to_original(res.gamma_hat.flat.view()), d.layout().clone());
    let sel = threshold_select(&extract_estimates(&g, &basis).unwrap(), 0.1);
    for j in 0..4 {
        assert!(sel.s_c_hat.contains(&j), "{:?}", sel.s_c_hat);
    }
    assert!(sel.s_n_hat.iter().all(|j| sel.s_c_hat.contains(j)));
}

#[test]
fn unpenalized_fit_is_invariant_to_standardization() {
    let basis = OrthoBasis::new(4, 3).unwrap();
    for fam in [Family::IndexVc, Family::Additive] {
        let d = expand_design(&signal_data(fam, 150, 2, 1.0, 4), &basis).unwrap();
        let opts = FitOptions {
            tol: 1e-13,
            kkt_tol: 1e-8,
            max_iter: 200_000,
            init: None,
        };
        let spec = PenaltySpec::new(PenaltyKind::P1, 0.0);
        let raw = fit(&d, &spec, &opts).unwrap();
        let (sd, st) = standardize(&d).unwrap();
        let std = fit(&sd, &spec, &opts).unwrap();
        let back = st.to_original(std.gamma_hat.flat.view());
        assert!(raw.converged && std.converged, "{fam}: {} {} {} {}", raw.iterations, raw.kkt_residual, std.iterations, std.kkt_residual);
        assert!((raw.objective() - std.objective()).abs() < 1e-10);
        for (a, b) in raw.gamma_hat.flat.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-4, "{fam}: {a} vs {b}");
        }
    }
}

#[test]
fn experiment_is_deterministic_across_schedules() {
    let text = "command = simulate\nfamily = additive\nn = 120\np = 6\nq = 4\ncensor_mean = 1.25\n\
                g1 = centered_lin(1.4142135623730951)\ng3 = sin1\nlambda = 0.1\nstandardize = true\n\
                t_lambda = 0, 0.1\nreplications = 6\nseed = 2\n";
    let exp = RunConfig::parse(text).unwrap().experiment().unwrap();
    let a = exp.run(true).unwrap();
    let b = exp.run(false).unwrap();
    assert_eq!(a.scores.len(), 2);
    for ((ta, sa), (tb, sb)) in a.scores.iter().zip(&b.scores) {
        assert_eq!(ta, tb);
        assert_eq!(sa.to_csv(), sb.to_csv());
    }
    for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
        assert_eq!(x.estimates, y.estimates);
    }
}

#[test]
fn selection_shrinks_with_the_threshold() {
    let basis = OrthoBasis::new(5, 3).unwrap();
    let d = expand_design(&signal_data(Family::IndexVc, 200, 6, 1.5, 3), &basis).unwrap();
    let res = fit(&d, &PenaltySpec::new(PenaltyKind::P1, 0.005), &FitOptions::default()).unwrap();
    let est = extract_estimates(&res.gamma_hat, &basis).unwrap();
    let mut prev: Option<vcox::SelectionResult> = None;
    for t in [0.0, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let s = threshold_select(&est, t);
        if let Some(p) = &prev {
            assert!(s.s_n_hat.iter().all(|j| p.s_n_hat.contains(j)));
            let union = |r: &vcox::SelectionResult| {
                let mut u = r.s_c_hat.clone();
                u.extend(&r.s_n_hat);
                u
            };
            let (now, before) = (union(&s), union(p));
            assert!(now.iter().all(|j| before.contains(j)));
        }
        prev = Some(s);
    }
}
