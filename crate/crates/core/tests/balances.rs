use mixlab_core::balances::{
    growth_self_equilibration, mass_residual_constituent, moment_residual_constituent, momentum_residual_constituent,
};
use mixlab_core::power::{invariance_residual, power_constituent, sample_observers, transform_velocities};
use mixlab_core::{close_state_via_balances, BinaryScenario, Grid, MixtureState, Part, SkewConvention, Vec3};

fn closed(n: usize, conv: SkewConvention) -> MixtureState {
    let grid = Grid::periodic_cube(n, std::f64::consts::TAU).unwrap();
    close_state_via_balances(&BinaryScenario::trig(), &grid, 0.3, conv).unwrap()
}

#[test]
fn closed_state_satisfies_constituent_balances_at_second_order() {
    let (c, f) = (closed(16, SkewConvention::SkewPart), closed(32, SkewConvention::SkewPart));
    for a in 0..2 {
        let mass = [
            mass_residual_constituent(&c, a).unwrap().max_norm(),
            mass_residual_constituent(&f, a).unwrap().max_norm(),
        ];
        let mom = [
            momentum_residual_constituent(&c, a).unwrap().max_norm(),
            momentum_residual_constituent(&f, a).unwrap().max_norm(),
        ];
        for [ec, ef] in [mass, mom] {
            assert!(ef < 0.35 * ec || ef < 1e-12, "{ec:e} -> {ef:e}");
        }
        let moment = moment_residual_constituent(&f, a, SkewConvention::SkewPart).unwrap().max_norm();
        assert!(moment < 1e-12, "{moment:e}");
    }
}

#[test]
fn closure_equilibrates_growths() {
    let m = closed(16, SkewConvention::Difference);
    let (sm, smu) = growth_self_equilibration(&m);
    assert!(sm.max_norm() < 1e-12);
    assert!(smu.max_norm() < 1e-12);
}

#[test]
fn observer_change_splits_into_force_and_couple_gaps() {
    let m = closed(16, SkewConvention::SkewPart);
    let g = *m.grid();
    let part = Part::from_bounds(
        &g,
        Vec3::repeat(1.0 * std::f64::consts::FRAC_PI_2),
        Vec3::repeat(1.5 * std::f64::consts::PI),
    )
    .unwrap();
    let t = 0.3;
    for o in sample_observers(3, 4, Vec3::repeat(std::f64::consts::PI)) {
        let moved = transform_velocities(&m, &o, t).unwrap();
        for a in 0..2 {
            let gaps = invariance_residual(&m, a, &part, &o).unwrap();
            let before = power_constituent(&m, a, &part, None).unwrap();
            let after = power_constituent(&moved, a, &part, None).unwrap();
            let predicted = o.translation_at(t).dot(&gaps.force) + o.rotation_at(t).dot(&gaps.couple);
            let scale = before.abs().max(after.abs()).max(1.0);
            assert!((after - before - predicted).abs() < 1e-12 * scale);
        }
    }
}
