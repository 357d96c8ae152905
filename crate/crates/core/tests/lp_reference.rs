//! The occupancy-measure LP against optima computed offline by HiGHS with
//! primal and dual tolerances tightened to 1e-10.

use aoi_core::cmdp::build_lp;
use aoi_core::lp::{solve, LpStatus};
use aoi_core::{ChannelModel, SensorSpec};
use serde::Deserialize;

#[derive(Deserialize)]
struct Instance {
    transition: Vec<Vec<f64>>,
    power: Vec<f64>,
    budget: f64,
    w: f64,
    x_max: usize,
    activation_cap: Option<f64>,
    objective: Option<f64>,
}

#[test]
fn matches_reference_optima() {
    let instances: Vec<Instance> =
        serde_json::from_str(include_str!("data/lp_reference.json")).unwrap();
    assert!(instances.len() >= 30);
    for (k, inst) in instances.iter().enumerate() {
        let channel = ChannelModel::new(inst.transition.clone(), inst.power.clone()).unwrap();
        let sensor = SensorSpec::new(channel, inst.budget).unwrap();
        let lp = build_lp(&sensor, inst.w, inst.x_max, inst.activation_cap).unwrap();
        let sol = solve(&lp).unwrap();
        match inst.objective {
            Some(obj) => {
                assert_eq!(sol.status, LpStatus::Optimal, "instance {k}");
                assert!(
                    (sol.objective_value - obj).abs() <= 1e-8 * (1.0 + obj.abs()),
                    "instance {k}: {} vs {obj}",
                    sol.objective_value
                );
                assert!(lp.max_violation(&sol.values) < 1e-9, "instance {k}");
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible, "instance {k}"),
        }
    }
}
