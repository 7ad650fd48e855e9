//! Built-in test systems.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Generator, GridCase, Line, Node};
use crate::scenarios::{fixed_set, ScenarioSet};

fn generator(node: usize, c: f64, cu: f64, cd: f64, p_max: f64, r_max: f64) -> Generator {
    Generator {
        node,
        energy_cost: c,
        res_cap_cost_up: cu,
        res_cap_cost_down: cd,
        deploy_cost_up: 1.2 * c,
        deploy_cost_down: 0.8 * c,
        p_min: 0.0,
        p_max,
        res_limit_up: r_max,
        res_limit_down: r_max,
    }
}

/// Triangle with two generators, wind and load at the third node, and a
/// 5 MW line between the generators. Reserve limits equal `p_max`.
pub fn three_bus() -> GridCase {
    GridCase {
        nodes: vec![
            Node { id: 0, load: 0.0, wind_forecast: 0.0 },
            Node { id: 1, load: 0.0, wind_forecast: 0.0 },
            Node { id: 2, load: 80.0, wind_forecast: 20.0 },
        ],
        generators: vec![generator(0, 2.0, 1.0, 2.0, 50.0, 50.0), generator(1, 1.0, 2.0, 1.0, 50.0, 50.0)],
        lines: vec![
            Line { id: 0, from: 0, to: 1, susceptance: 1.0, capacity: 5.0 },
            Line { id: 1, from: 0, to: 2, susceptance: 1.0, capacity: 80.0 },
            Line { id: 2, from: 1, to: 2, susceptance: 1.0, capacity: 80.0 },
        ],
        slack_node: 2,
        mva_base: None,
    }
}

/// The three equiprobable wind errors +20, +10 and -20 MW at node 2.
pub fn three_bus_scenarios() -> ScenarioSet {
    fixed_set(&[vec![0.0; 3], vec![0.0; 3], vec![20.0, 10.0, -20.0]]).expect("static data")
}

/// 24-node meshed system with three cheap and three expensive reserve
/// generators (costs and reserve limits as in the IEEE-118 study), seven
/// mid-cost units without reserve and eight wind farms.
pub fn desk24() -> GridCase {
    let n = 24;
    let mut nodes: Vec<Node> = (0..n).map(|id| Node { id, load: 125.0, wind_forecast: 0.0 }).collect();
    for (node, w) in [(1, 120.0), (3, 160.0), (6, 140.0), (10, 180.0), (13, 150.0), (17, 130.0), (19, 170.0), (23, 150.0)] {
        nodes[node].wind_forecast = w;
    }
    let reserve = |node, c: f64, p_max, r_max| generator(node, c, 0.2 * c, 0.2 * c, p_max, r_max);
    let mut generators = vec![
        reserve(2, 12.6, 700.0, 653.0),
        reserve(9, 16.1, 400.0, 195.0),
        reserve(16, 16.7, 400.0, 223.0),
        reserve(5, 124.6, 200.0, 85.0),
        reserve(12, 100.0, 500.0, 441.0),
        reserve(20, 110.0, 200.0, 79.0),
    ];
    for (k, node) in [0, 4, 7, 11, 14, 18, 22].into_iter().enumerate() {
        generators.push(generator(node, 45.0 + 5.0 * k as f64, 0.0, 0.0, 150.0, 0.0));
    }
    let mut lines = Vec::new();
    for i in 0..n {
        let x = 1.0 + 0.5 * (i % 3) as f64;
        lines.push(Line { id: lines.len(), from: i, to: (i + 1) % n, susceptance: 1.0 / x, capacity: 600.0 });
    }
    for i in 0..8 {
        lines.push(Line { id: lines.len(), from: i, to: i + 8, susceptance: 0.8, capacity: 400.0 });
    }
    GridCase { nodes, generators, lines, slack_node: 0, mva_base: Some(100.0) }
}

pub fn by_name(name: &str) -> Option<GridCase> {
    match name {
        "three_bus" => Some(three_bus()),
        "desk24" => Some(desk24()),
        _ => None,
    }
}

/// Small random meshed network for property tests. Every generator can
/// provide reserve; wind sits on one to three nodes. Capacities are drawn
/// tight enough that some lines bind, so robust feasibility is not
/// guaranteed for every seed.
pub fn random_case(seed: u64, nodes: usize) -> GridCase {
    let n = nodes.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut node_list: Vec<Node> =
        (0..n).map(|id| Node { id, load: rng.random_range(0.0..40.0), wind_forecast: 0.0 }).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let winds = rng.random_range(1..=3usize.min(n));
    for &i in order.iter().take(winds) {
        node_list[i].wind_forecast = rng.random_range(10.0..50.0);
    }
    let ng = rng.random_range(2..=4usize.min(n));
    order.shuffle(&mut rng);
    let mut generators: Vec<Generator> = order
        .iter()
        .take(ng)
        .map(|&node| {
            let c = rng.random_range(5.0..50.0);
            let p_max = rng.random_range(40.0..120.0);
            let r_max = p_max * rng.random_range(0.3..0.8);
            let mut g = generator(node, c, rng.random_range(0.1..0.5) * c, rng.random_range(0.1..0.5) * c, p_max, r_max);
            g.p_min = rng.random_range(0.0..0.2) * p_max;
            g
        })
        .collect();
    generators.sort_by_key(|g| g.node);

    // Keep the net load within 70% of installed capacity.
    let cap: f64 = generators.iter().map(|g| g.p_max).sum();
    let floor: f64 = generators.iter().map(|g| g.p_min).sum();
    let wind: f64 = node_list.iter().map(|x| x.wind_forecast).sum();
    let load: f64 = node_list.iter().map(|x| x.load).sum();
    let target = (load - wind).clamp(floor + 0.1 * cap, 0.7 * cap) + wind;
    if load > 0.0 {
        for x in node_list.iter_mut() {
            x.load *= target / load;
        }
    } else {
        node_list[0].load = target;
    }

    let total = target;
    let mut lines = Vec::new();
    let mut add = |from: usize, to: usize, rng: &mut ChaCha8Rng| {
        lines.push(Line {
            id: lines.len(),
            from,
            to,
            susceptance: rng.random_range(0.5..2.0),
            capacity: total * rng.random_range(0.15..0.6),
        });
    };
    if n == 2 {
        add(0, 1, &mut rng);
    } else {
        for i in 0..n {
            add(i, (i + 1) % n, &mut rng);
        }
        for _ in 0..rng.random_range(0..=n / 2) {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b && (a + 1) % n != b && (b + 1) % n != a {
                add(a.min(b), a.max(b), &mut rng);
            }
        }
    }
    GridCase { nodes: node_list, generators, lines, slack_node: rng.random_range(0..n), mva_base: None }
}
