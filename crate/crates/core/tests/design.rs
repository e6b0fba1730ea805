use omt_core::gauss::{std_normal_cdf, std_normal_quantile};
use omt_core::numerics::QuadratureConfig;
use omt_core::objective::Weights;
use omt_core::power_design::{
    allocation_search, power_at_n, required_n_for_power, AllocationObjective, Calibration,
    PowerMeasure, ProcedureFamily, N_CAP,
};
use omt_core::procedures::ProcedureKind;

const ALPHA: f64 = 0.025;

fn marginal() -> Calibration {
    Calibration::MarginalPower {
        beta: 0.85,
        alpha: ALPHA,
        reference_persons: 2400,
    }
}

#[test]
fn any_objective_prefers_a_single_group() {
    let cfg = QuadratureConfig::default();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    for total in [600, 4800] {
        let res =
            allocation_search(total, AllocationObjective::Fixed(Weights::ANY), &marginal(), &grid, ALPHA, &cfg)
                .unwrap();
        let full = marginal().theta(total).unwrap();
        let bound = std_normal_cdf(std_normal_quantile(ALPHA).unwrap() - full);
        for (r, rep) in res.r_grid.iter().zip(&res.power_at_r) {
            assert!(rep.pi_any <= bound + 1e-6, "r = {r}");
        }
        assert_eq!(res.argmax(PowerMeasure::Any), 0.0);
        assert!((res.power(1.0).unwrap().pi_any - bound).abs() < 1e-12);
    }
}

#[test]
fn equal_split_wins_with_strong_signal_only() {
    let cfg = QuadratureConfig::default();
    let strong =
        allocation_search(4800, AllocationObjective::Matched, &marginal(), &[0.25, 0.5], ALPHA, &cfg).unwrap();
    for m in [PowerMeasure::Avg, PowerMeasure::Pi1, PowerMeasure::Combo] {
        assert!(strong.power(0.5).unwrap().get(m) > strong.power(0.25).unwrap().get(m), "{m}");
    }
    let weak =
        allocation_search(600, AllocationObjective::Matched, &marginal(), &[0.25, 0.5], ALPHA, &cfg).unwrap();
    assert!(weak.power(0.25).unwrap().pi_1 > weak.power(0.5).unwrap().pi_1);
}

#[test]
fn required_n_is_the_first_sufficient_size() {
    let cfg = QuadratureConfig::default();
    let fam = ProcedureFamily::Builtin(ProcedureKind::Hommel);
    let target = 0.9;
    let n = required_n_for_power(&fam, PowerMeasure::Any, target, &marginal(), 0.5, ALPHA, &cfg, N_CAP)
        .unwrap();
    let at = |n| power_at_n(&fam, n, 0.5, &marginal(), ALPHA, &cfg).unwrap().pi_any;
    assert!(at(n) >= target);
    assert!(at(n - 1) < target);
}
