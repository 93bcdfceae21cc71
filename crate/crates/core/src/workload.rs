//! Seeded random worlds for determinism checks and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::scenario::{Scenario, ScenarioFile};

/// Upper bound on client agents in a generated world.
pub const MAX_CLIENTS: usize = 6;
/// Upper bound on objectives in a generated route.
pub const MAX_ROUTE_LEN: usize = 5;

fn latency(rng: &mut ChaCha8Rng, locations: usize) -> Value {
    match rng.gen_range(0..3) {
        0 => json!({ "fixed": rng.gen_range(1..=4) }),
        1 => {
            let lo = rng.gen_range(1..=3);
            json!({ "uniform_range": { "lo": lo, "hi": lo + rng.gen_range(0..=4) } })
        }
        _ => {
            let mut links = Vec::new();
            for a in 0..locations {
                for b in (0..locations).filter(|&b| b != a) {
                    if rng.gen_bool(0.3) {
                        links.push(json!({ "from": a, "to": b, "ticks": rng.gen_range(1..=6) }));
                    }
                }
            }
            json!({ "per_link": { "links": links, "default": rng.gen_range(1..=3) } })
        }
    }
}

/// A random scenario: one server, up to [`MAX_CLIENTS`] clients, a
/// travelling agent with a random route and a logger that receives pings.
pub fn random_scenario_file(seed: u64) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clients = rng.gen_range(1..=MAX_CLIENTS);
    let location_count = rng.gen_range(2..=clients + 1);
    let locations: Vec<String> = (0..location_count).map(|i| format!("L{i}")).collect();

    let mut agents = vec![json!({
        "location": "L0",
        "behaviors": [{ "kind": "server", "work_ticks": rng.gen_range(1..=3) }]
    })];
    agents.push(json!({
        "location": "L0",
        "behaviors": [{ "kind": "role", "role": "logger" }]
    }));
    for c in 0..clients {
        let at = locations.choose(&mut rng).expect("non-empty");
        agents.push(json!({
            "location": at,
            "behaviors": [{
                "kind": "client",
                "server": 0,
                "task": { "name": "emit", "text": format!("job-{c}") },
                "ack_timeout": rng.gen_range(5..=30),
                "result_timeout": rng.gen_range(10..=60),
                "on_result": { "name": "log", "text": "result" },
                "on_failure": { "name": "log", "text": "failure" }
            }, {
                "kind": "task",
                "action": { "name": "send", "params": { "to": 1, "type": "PING", "payload": format!("c{c}") } }
            }]
        }));
    }

    let route_len = rng.gen_range(1..=MAX_ROUTE_LEN);
    let mut earliest = 0;
    let objectives: Vec<Value> = (0..route_len)
        .map(|_| {
            earliest += rng.gen_range(0..=8);
            let latest = earliest + rng.gen_range(0..=12);
            json!({
                "location": locations.choose(&mut rng).expect("non-empty"),
                "earliest": earliest,
                "latest": latest,
                "tasks": [{ "name": "count", "text": "visits" }]
            })
        })
        .collect();
    agents.push(json!({
        "location": locations.choose(&mut rng).expect("non-empty"),
        "behaviors": [{
            "kind": "itinerary",
            "objectives": objectives,
            "missed": { "kind": "task", "action": { "name": "log", "text": "objective missed" } },
            "default_estimate": rng.gen_range(0..=3)
        }]
    }));

    let file = json!({
        "format_version": 1,
        "name": format!("random-{seed}"),
        "config": {
            "seed": seed,
            "message_latency": latency(&mut rng, location_count),
            "migration_latency": latency(&mut rng, location_count),
            "max_ticks": 10_000
        },
        "locations": locations,
        "agents": agents
    });
    serde_json::from_value(file).expect("generated scenarios match the schema")
}

pub fn random_scenario(seed: u64) -> Scenario {
    Scenario::from_parts(random_scenario_file(seed), Vec::new())
}
