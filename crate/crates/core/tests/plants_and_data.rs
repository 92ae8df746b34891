use dynoid::datagen::{generate_tank_dataset, load_dataset, save_dataset, TankDataConfig};
use dynoid::diagnostics::{iterate_dynamics, observability_map};
use dynoid::systems::{tank_step, Tank, TankParams, TankState};
use proptest::prelude::*;

fn small(noise: f64) -> TankDataConfig {
    TankDataConfig {
        n_train: 4,
        n_valid: 2,
        n_test: 2,
        noise_sigma: noise,
        ..TankDataConfig::default()
    }
}

#[test]
fn recorded_inputs_replay_to_recorded_states() {
    let ds = generate_tank_dataset(&small(0.05), 3).unwrap();
    let p = TankParams::default();
    for t in ds.trajectories() {
        let xs = t.true_states.as_ref().unwrap();
        let mut x = TankState::from_slice(&xs[0]);
        for k in 0..t.len() - 1 {
            x = tank_step(x, t.inputs[k][0], &p);
            assert_eq!(x.to_vec(), xs[k + 1], "{} step {k}", t.id);
        }
    }
}

#[test]
fn noiseless_outputs_are_the_lower_level() {
    let ds = generate_tank_dataset(&small(0.0), 1).unwrap();
    for t in ds.trajectories() {
        for (y, x) in t.outputs.iter().zip(t.true_states.as_ref().unwrap()) {
            assert_eq!(y[0], x[1]);
        }
        assert!(t.inputs.iter().all(|u| (0.0..=5.0).contains(&u[0])));
    }
}

#[test]
fn dataset_survives_disk_round_trip() {
    let ds = generate_tank_dataset(&small(0.05), 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    assert_eq!(generate_tank_dataset(&small(0.05), 8).unwrap(), ds);
}

fn tank() -> Tank {
    Tank {
        params: TankParams::default(),
    }
}

proptest! {
    #[test]
    fn tank_levels_stay_nonnegative(x1 in 0.0f64..10.0, x2 in 0.0f64..10.0, u in 0.0f64..5.0) {
        let next = tank_step(TankState { x1, x2 }, u, &TankParams::default());
        prop_assert!(next.x1 >= 0.0 && next.x2 >= 0.0);
    }

    #[test]
    fn iterate_composes(x1 in 0.1f64..5.0, x2 in 0.1f64..5.0, us in prop::collection::vec(0.0f64..5.0, 2..8), split in 1usize..7) {
        let us: Vec<Vec<f64>> = us.into_iter().map(|u| vec![u]).collect();
        let split = split.min(us.len() - 1);
        let whole = iterate_dynamics(&tank(), &[x1, x2], &us).unwrap();
        let mid = iterate_dynamics(&tank(), &[x1, x2], &us[..split]).unwrap();
        let parts = iterate_dynamics(&tank(), &mid, &us[split..]).unwrap();
        for (a, b) in whole.iter().zip(&parts) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn observability_blocks(x1 in 0.1f64..5.0, x2 in 0.1f64..5.0, us in prop::collection::vec(0.0f64..5.0, 1..8)) {
        let us: Vec<Vec<f64>> = us.into_iter().map(|u| vec![u]).collect();
        let o = observability_map(&tank(), &[x1, x2], &us).unwrap();
        prop_assert_eq!(o.len(), us.len());
        prop_assert_eq!(o[0], x2);
        for k in 1..us.len() {
            prop_assert_eq!(o[k], iterate_dynamics(&tank(), &[x1, x2], &us[..k]).unwrap()[1]);
        }
    }
}
