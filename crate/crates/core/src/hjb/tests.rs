use super::*;
use crate::belief::closed_form_clarity;
use crate::models::{single_integrator_2d, square_footprint, ControlBox, FlowField, SensingFootprint, VehicleModel};
use alloc::sync::Arc;

fn q(v: f64) -> ClarityValue {
    ClarityValue::new(v).unwrap()
}

/// 1-D single integrator `ẋ = u + drift`, `|u| ≤ u_max`, sensing on `[lo, hi]`.
fn line_system(u_max: f64, drift: f64, lo: f64, hi: f64, process_noise: f64) -> AugmentedSystem {
    let vehicle = VehicleModel::new(
        "line",
        1,
        ControlBox::symmetric(u_max, 1).unwrap(),
        Arc::new(move |_, out| out[0] = drift),
        Arc::new(|_, g| g[0] = 1.0),
    );
    let fp = SensingFootprint::new(
        Arc::new(move |x| if x[0] >= lo && x[0] <= hi { 1.0 } else { 0.0 }),
        Arc::new(|_| 1.0),
    );
    AugmentedSystem::new(vehicle, &fp, process_noise).unwrap()
}

#[test]
fn frozen_system_keeps_terminal_data() {
    let vehicle = VehicleModel::frozen(2, ControlBox::symmetric(1.0, 2).unwrap());
    let fp = SensingFootprint::uniform(0.0, 1.0).unwrap();
    let sys = AugmentedSystem::new(vehicle, &fp, 0.0).unwrap();
    let grid = Grid::new(vec![Axis::new(-1.0, 1.0, 5), Axis::new(-1.0, 1.0, 6)], 11).unwrap();
    let vf = solve_hjb(&sys, &grid, 3.0, &SchemeConfig::default()).unwrap();
    for (i, v) in vf.initial().iter().enumerate() {
        assert_eq!(*v, grid.point(i)[2]);
    }
}

#[test]
fn always_sensing_matches_closed_form() {
    let si = single_integrator_2d(FlowField::ocean_current(), 2.0).unwrap();
    let sys = AugmentedSystem::new(si, &SensingFootprint::uniform(1.0, 1.0).unwrap(), 0.001).unwrap();
    let grid = Grid::new(vec![Axis::new(-2.0, 2.0, 5), Axis::new(-2.0, 2.0, 5)], 41).unwrap();
    let vf = solve_hjb(&sys, &grid, 10.0, &SchemeConfig::default()).unwrap();
    let mut worst = 0.0f64;
    for (i, v) in vf.initial().iter().enumerate() {
        let q0 = grid.point(i)[2];
        let exact = closed_form_clarity(10.0, q(q0), 1.0, 1.0, 0.001).unwrap().get();
        worst = worst.max((v - exact).abs());
    }
    assert!(worst < 1e-2, "max error {worst}");
}

#[test]
fn domain_examples() {
    let sys = line_system(1.0, 0.0, -0.5, 0.5, 0.01);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 31)], 21).unwrap();
    let vf = solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).unwrap();
    assert_eq!(perceivability_domain(&vf, 0.0).count(), grid.len());
    let vmax = vf.initial().iter().copied().fold(f64::MIN, f64::max);
    assert!(perceivability_domain(&vf, vmax + 1e-9).is_empty());
    let d8 = perceivability_domain(&vf, 0.8);
    let d7 = perceivability_domain(&vf, 0.7);
    assert!(d8.is_subset_of(&d7));
    assert!(d8.count() < d7.count());
}

#[test]
fn perceivable_margin_is_value_minus_threshold() {
    let sys = line_system(1.0, 0.0, -0.5, 0.5, 0.01);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 31)], 21).unwrap();
    let vf = solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).unwrap();
    let v = vf.value_at(&[0.1], 0.3).unwrap();
    let p = is_perceivable(&vf, &[0.1], 0.3, v - 0.05).unwrap();
    assert!(p.perceivable);
    assert!((p.margin - 0.05).abs() < 1e-12);
    let p = is_perceivable(&vf, &[0.1], 0.3, v + 0.05).unwrap();
    assert!(!p.perceivable);
    assert_eq!(is_perceivable(&vf, &[5.0], 0.3, 0.5), Err(Error::OutOfDomain));
}

#[test]
fn no_process_noise_never_loses_clarity() {
    let sys = line_system(1.0, 0.3, 1.0, 2.0, 0.0);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 31)], 21).unwrap();
    let vf = solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).unwrap();
    for (i, v) in vf.initial().iter().enumerate() {
        let q0 = grid.point(i)[1];
        assert!(*v >= q0 - 1e-12);
        assert!(is_perceivable(&vf, &grid.point(i)[..1], q0, q0).unwrap().perceivable);
    }
}

#[test]
fn values_stay_in_unit_interval_and_monotone_in_q() {
    let sys = line_system(1.0, 0.5, -0.5, 0.5, 0.05);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 41)], 31).unwrap();
    for integrator in [TimeIntegrator::Euler, TimeIntegrator::TvdRk2] {
        for dissipation in [Dissipation::Global, Dissipation::Local] {
            let scheme = SchemeConfig {
                integrator,
                dissipation,
                ..SchemeConfig::default()
            };
            let vf = solve_hjb(&sys, &grid, 3.0, &scheme).unwrap();
            let v = vf.initial();
            assert!(v.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
            let nq = grid.clarity_axis().nodes;
            for col in v.chunks(nq) {
                assert!(col.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{integrator:?}/{dissipation:?}");
            }
        }
    }
}

#[test]
fn slices_are_sorted_and_bracket_horizon() {
    let sys = line_system(1.0, 0.0, -0.5, 0.5, 0.01);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 31)], 21).unwrap();
    let vf = solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).unwrap();
    assert_eq!(vf.slices[0].t, 0.0);
    assert!((vf.slices.last().unwrap().t - 2.0).abs() < 1e-12);
    assert!(vf.slices.windows(2).all(|w| w[0].t < w[1].t));
    assert!(vf.slices.len() <= 52);
    let terminal = &vf.slices.last().unwrap().values;
    assert!(terminal.iter().enumerate().all(|(i, v)| *v == grid.point(i)[1]));
}

#[test]
fn cfl_reduction_of_requested_step() {
    let (steps, dt) = plan_time_steps(0.1, 1.0, Some(0.5));
    assert_eq!(steps, 10);
    assert!((dt - 0.1).abs() < 1e-15);
    let (steps, dt) = plan_time_steps(0.1, 1.0, Some(0.02));
    assert_eq!(steps, 50);
    assert!((dt - 0.02).abs() < 1e-15);
}

#[test]
fn maximizing_control_examples() {
    let si = single_integrator_2d(FlowField::zero(), 2.0).unwrap();
    let sys = AugmentedSystem::new(si, &SensingFootprint::uniform(1.0, 1.0).unwrap(), 0.0).unwrap();
    assert_eq!(maximizing_control(&sys, &[0.0, 0.0], &[1.0, 0.0]), vec![2.0, 0.0]);
    assert_eq!(maximizing_control(&sys, &[0.0, 0.0], &[-1.0, -1.0]), vec![-2.0, -2.0]);

    let boat = crate::models::dubins_boat(FlowField::zero(), 2.0, 1.0).unwrap();
    let sys = AugmentedSystem::new(boat, &SensingFootprint::uniform(1.0, 1.0).unwrap(), 0.0).unwrap();
    assert_eq!(maximizing_control(&sys, &[0.0, 0.0, 0.0], &[5.0, -3.0, 0.2]), vec![1.0]);
    assert_eq!(maximizing_control(&sys, &[0.0, 0.0, 0.0], &[5.0, -3.0, -0.2]), vec![-1.0]);
}

#[test]
fn optimal_control_heads_for_sensing() {
    let sys = line_system(1.0, 0.0, 1.0, 2.0, 0.01);
    let grid = Grid::new(vec![Axis::new(-3.0, 4.0, 71)], 21).unwrap();
    let vf = solve_hjb(&sys, &grid, 3.0, &SchemeConfig::default()).unwrap();
    assert_eq!(optimal_control(&vf, 0.0, &[-0.5], 0.2, &sys).unwrap(), vec![1.0]);
    assert_eq!(optimal_control(&vf, 0.0, &[3.0], 0.2, &sys).unwrap(), vec![-1.0]);
}

#[test]
fn pure_decay_rollout_matches_analytic() {
    let si = single_integrator_2d(FlowField::zero(), 1.0).unwrap();
    let fp = SensingFootprint::uniform(0.0, 1.0).unwrap();
    let sys = AugmentedSystem::new(si, &fp, 0.001).unwrap();
    let traj = rollout(&sys, |_, _, _| Ok(vec![0.0, 0.0]), &[0.0, 0.0], q(0.5), 10.0, 0.01, None).unwrap();
    let exact = 0.5 / (1.0 + 0.001 * 0.5 * 10.0);
    assert!((traj.final_clarity() - exact).abs() < 1e-10);
    assert!(traj.states.iter().all(|s| s == &[0.0, 0.0]));
    assert_eq!(traj.controls.len() + 1, traj.times.len());
}

#[test]
fn frozen_rollout_is_constant() {
    let vehicle = VehicleModel::frozen(2, ControlBox::symmetric(1.0, 2).unwrap());
    let sys = AugmentedSystem::new(vehicle, &SensingFootprint::uniform(0.0, 1.0).unwrap(), 0.0).unwrap();
    let traj = rollout(&sys, |_, _, _| Ok(vec![1.0, -1.0]), &[0.3, 0.4], q(0.6), 2.0, 0.1, None).unwrap();
    assert!(traj.states.iter().all(|s| s == &[0.3, 0.4]));
    assert!(traj.clarity.iter().all(|&c| c == 0.6));
}

#[test]
fn rollout_truncates_on_exit() {
    let si = single_integrator_2d(FlowField::zero(), 1.0).unwrap();
    let sys = AugmentedSystem::new(si, &SensingFootprint::uniform(0.0, 1.0).unwrap(), 0.0).unwrap();
    let grid = Grid::new(vec![Axis::new(-1.0, 1.0, 5), Axis::new(-1.0, 1.0, 5)], 5).unwrap();
    let traj = rollout(&sys, |_, _, _| Ok(vec![1.0, 0.0]), &[0.0, 0.0], q(0.5), 5.0, 0.1, Some(&grid)).unwrap();
    assert!(traj.exited);
    assert!(traj.final_state()[0] > 1.0 && traj.times.len() < 20);
    let err = rollout(&sys, |_, _, _| Ok(vec![3.0, 0.0]), &[0.0, 0.0], q(0.5), 1.0, 0.1, None);
    assert!(matches!(err, Err(Error::RejectedInput(_))));
}

#[test]
fn refinement_reduces_change() {
    let sys = line_system(1.0, 0.4, -0.5, 0.5, 0.05);
    let solve = |nx: usize, nq: usize| {
        let grid = Grid::new(vec![Axis::new(-3.0, 3.0, nx)], nq).unwrap();
        (grid.clone(), solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).unwrap())
    };
    let levels = [solve(13, 6), solve(25, 11), solve(49, 21), solve(97, 41)];
    let (coarse, _) = &levels[0];
    let delta = |a: &ValueFunction, b: &ValueFunction| {
        (0..coarse.len())
            .map(|i| {
                let p = coarse.point(i);
                (a.value_at(&p[..1], p[1]).unwrap() - b.value_at(&p[..1], p[1]).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    };
    let d: Vec<f64> = levels.windows(2).map(|w| delta(&w[0].1, &w[1].1)).collect();
    assert!(d[1] < d[0] && d[2] < d[1], "deltas {d:?}");
}

#[test]
fn domain_nests_in_horizon_without_process_noise() {
    let sys = line_system(1.0, 0.3, 0.5, 1.5, 0.0);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 41)], 21).unwrap();
    let short = solve_hjb(&sys, &grid, 1.0, &SchemeConfig::default()).unwrap();
    let long = solve_hjb(&sys, &grid, 2.5, &SchemeConfig::default()).unwrap();
    for q_star in [0.3, 0.5, 0.7] {
        assert!(perceivability_domain(&short, q_star).is_subset_of(&perceivability_domain(&long, q_star)));
    }
}

#[test]
fn one_step_dynamic_programming_bound() {
    let sys = line_system(1.0, 0.3, -0.5, 0.5, 0.05);
    let grid = Grid::new(vec![Axis::new(-3.0, 3.0, 61)], 31).unwrap();
    let scheme = SchemeConfig {
        slice_stride: Some(1),
        ..SchemeConfig::default()
    };
    let vf = solve_hjb(&sys, &grid, 2.0, &scheme).unwrap();
    let next = &vf.slices[1];
    let dt = next.t;
    let tol = 5e-3;
    for i in (0..grid.len()).step_by(7) {
        let p = grid.point(i);
        if p[0].abs() > 2.5 {
            continue;
        }
        let best = [-1.0, 0.0, 1.0]
            .iter()
            .filter_map(|&u| {
                let traj = rollout(&sys, |_, _, _| Ok(vec![u]), &p[..1], q(p[1]), dt, dt, None).ok()?;
                let mut end = traj.final_state().to_vec();
                end.push(traj.final_clarity());
                grid.interpolate(&next.values, &end).ok()
            })
            .fold(f64::MIN, f64::max);
        assert!(vf.initial()[i] <= best + tol, "node {i}: V0 = {}, best = {best}", vf.initial()[i]);
    }
}

#[test]
fn square_footprint_domain_is_nonempty() {
    let si = single_integrator_2d(FlowField::zero(), 1.0).unwrap();
    let fp = square_footprint([0.0, 0.0], 0.5, 1.0, 1.0).unwrap();
    let sys = AugmentedSystem::new(si, &fp, 0.001).unwrap();
    let grid = Grid::new(vec![Axis::new(-2.0, 2.0, 21), Axis::new(-2.0, 2.0, 21)], 21).unwrap();
    let vf = solve_hjb(&sys, &grid, 2.0, &SchemeConfig::default()).unwrap();
    let d = perceivability_domain(&vf, 0.6);
    assert!(!d.is_empty());
    assert!(is_perceivable(&vf, &[0.0, 0.0], 0.6, 0.6).unwrap().perceivable);
    assert!(!is_perceivable(&vf, &[1.9, 1.9], 0.0, 0.6).unwrap().perceivable);
}

#[test]
fn strong_shear_current_through_the_edges_stays_bounded() {
    // the current outruns the vehicle over most of the domain and crosses every edge
    let si = single_integrator_2d(FlowField::shear(3.0, -0.5), 2.0).unwrap();
    let fp = square_footprint([0.0, 1.25], 0.5, 1.0, 1.0).unwrap();
    let sys = AugmentedSystem::new(si, &fp, 0.001).unwrap();
    let grid = Grid::new(vec![Axis::new(-4.0, 4.0, 31), Axis::new(-2.0, 3.0, 31)], 21).unwrap();
    for dissipation in [Dissipation::Global, Dissipation::Local] {
        let scheme = SchemeConfig {
            dissipation,
            ..SchemeConfig::default()
        };
        let vf = solve_hjb(&sys, &grid, 10.0, &scheme).unwrap();
        for (i, v) in vf.initial().iter().enumerate() {
            let q0 = grid.point(i)[2];
            assert!(*v >= q0 - 1e-2 && *v <= 1.0 + 1e-12, "{dissipation:?}: V = {v} at node {i}");
        }
    }
}
