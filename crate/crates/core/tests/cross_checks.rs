use approx::assert_abs_diff_eq;
use multiand::buzzers::information_cost;
use multiand::concavity::{deficit_external, deficit_internal, taylor_coefficient, CanonicalMeasure, Which};
use multiand::discretize;
use multiand::optimize::{maximize_external, Budget, SupportPattern};
use multiand::InputDistribution;

#[test]
fn discrete_protocol_approaches_three_party_cost() {
    let mu = InputDistribution::new(3, vec![0.25, 0.1, 0.2, 0.3, 0.15]).unwrap();
    let exact = information_cost(&mu).unwrap();
    let mut last = f64::INFINITY;
    for j in [4, 6, 8] {
        let ic = discretize::build(&mu, 2f64.powi(-j), 25.0).unwrap().exact_ic();
        let gap = (ic.external_bits - exact.external_bits)
            .abs()
            .max((ic.internal_bits - exact.internal_bits).abs());
        assert!(gap < last, "gap {gap} at 2^-{j}");
        last = gap;
    }
    assert!(last < 1e-3);
}

// Halving eps should cut the distance of deficit/eps^3 from its limit by
// about half, since the next Taylor term is of order eps^4.
#[test]
fn cubic_ratio_converges_linearly() {
    let c = CanonicalMeasure::new(4, 2, 0.1).unwrap();
    for which in [Which::External, Which::Internal] {
        let coeff = taylor_coefficient(&c, which).unwrap();
        let ratio = |eps: f64| {
            let d = match which {
                Which::External => deficit_external(&c, eps),
                Which::Internal => deficit_internal(&c, eps),
            };
            d.unwrap() / eps.powi(3)
        };
        let (a, b) = (ratio(8e-3) - coeff, ratio(4e-3) - coeff);
        assert!((b / a - 0.5).abs() < 0.05, "{which:?}: {a} then {b}");
    }
}

#[test]
fn optimizer_reports_cost_of_its_argmax() {
    let p = SupportPattern::parse(Some(3), "000,111").unwrap();
    let budget = Budget {
        max_evaluations: 300,
        ..Budget::default()
    };
    let r = maximize_external(&p, budget).unwrap();
    let again = information_cost(&r.argmax).unwrap();
    assert_abs_diff_eq!(r.value, again.external_bits, epsilon = 1e-9);
}
