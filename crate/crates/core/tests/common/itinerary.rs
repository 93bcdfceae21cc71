//! Itinerary: arrival classification, missed objectives, listener order and
//! route feasibility against a brute-force oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mabs::itinerary::{
    missed, Alpha, DelayEstimator, DeparturePolicy, Itinerary, ItineraryConfig, Objective, Route,
};
use mabs::model::{Behavior, VirtualTime};
use mabs::platform::{PlatformAdapter, RunUntil, SimConfig};
use mabs::registry::{ActionDescriptor, Registry};
use mabs::trace::TraceKind;

use super::oracles::{route_feasible, Stop};
use super::*;

fn itinerary(
    objectives: Vec<Objective>,
    listeners: Vec<ActionDescriptor>,
    missed: Option<Box<dyn Behavior>>,
) -> Box<dyn Behavior> {
    let route = Route::new(objectives, VirtualTime(0)).unwrap();
    Box::new(Itinerary::new(ItineraryConfig::new(
        route, listeners, missed,
    )))
}

pub fn itinerary_waits_for_window_when_early<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 3), Registry::new(), 3);
    let it = itinerary(
        vec![Objective::new(l[2], 5, 10)],
        vec![log("reached")],
        None,
    );
    let a = p.spawn_agent(l[0], vec![it]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let reached = p
        .trace()
        .of_kind(TraceKind::ObjectiveReached)
        .next()
        .unwrap();
    assert_eq!(reached.get_u64("arrival"), Some(3));
    assert_eq!(reached.get_u64("served_at"), Some(5));
    assert_eq!(reached.tick.0, 5);
    assert_eq!(logs(p.trace()), vec![(5, a, "reached".to_string())]);
}

pub fn itinerary_late_arrival_runs_missed_behavior<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 5), Registry::new(), 2);
    let it = itinerary(
        vec![Objective::new(l[1], 0, 2)],
        vec![log("reached")],
        Some(missed::skip_and_log()),
    );
    let a = p.spawn_agent(l[0], vec![it]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let miss = p
        .trace()
        .of_kind(TraceKind::ObjectiveMissed)
        .next()
        .unwrap();
    assert_eq!(miss.get_u64("arrival"), Some(5));
    assert_eq!(miss.get_u64("late_by"), Some(3));
    assert_eq!(
        logs(p.trace()),
        vec![(5, a, "objective missed".to_string())]
    );
    assert_eq!(terminated(p.trace(), a), Some(5));
}

pub fn itinerary_abort_stops_the_agent<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 5), Registry::new(), 3);
    let it = itinerary(
        vec![Objective::new(l[1], 0, 2), Objective::new(l[2], 0, 100)],
        vec![log("reached")],
        Some(missed::abort()),
    );
    let a = p.spawn_agent(l[0], vec![it]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(terminated(p.trace(), a), Some(5));
    assert!(log_texts(p.trace(), a).is_empty());
}

pub fn itinerary_without_travel_serves_in_place<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 4), Registry::new(), 1);
    let it = itinerary(vec![Objective::new(l[0], 0, 0)], vec![log("reached")], None);
    let a = p.spawn_agent(l[0], vec![it]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(logs(p.trace()), vec![(0, a, "reached".to_string())]);
    assert_eq!(p.trace().of_kind(TraceKind::MigrateStart).count(), 0);
    assert_eq!(terminated(p.trace(), a), Some(0));
}

pub fn itinerary_halts_without_missed_behavior<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 5), Registry::new(), 3);
    let it = itinerary(
        vec![Objective::new(l[1], 0, 2), Objective::new(l[2], 0, 100)],
        vec![log("reached")],
        None,
    );
    let a = p.spawn_agent(l[0], vec![it]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let halted = p.trace().custom("agent_halted").next().unwrap();
    assert_eq!((halted.tick.0, halted.agent), (5, a));
    assert!(p.is_live(a));
    assert_eq!(p.agent(a).unwrap().current, l[1]);
    assert_eq!(p.trace().of_kind(TraceKind::ObjectiveReached).count(), 0);
}

pub fn itinerary_listeners_run_before_stop_tasks<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 2), Registry::new(), 3);
    let it = itinerary(
        vec![
            Objective::new(l[1], 0, 50).with_tasks(vec![log("task 1")]),
            Objective::new(l[2], 0, 50).with_tasks(vec![log("task 2a"), log("task 2b")]),
        ],
        vec![log("listener A"), log("listener B")],
        None,
    );
    let a = p.spawn_agent(l[0], vec![it]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let seen: Vec<(u64, String)> = logs(p.trace())
        .into_iter()
        .map(|(t, _, s)| (t, s))
        .collect();
    let at = |t: u64, s: &str| (t, s.to_string());
    assert_eq!(
        seen,
        vec![
            at(2, "listener A"),
            at(2, "listener B"),
            at(2, "task 1"),
            at(4, "listener A"),
            at(4, "listener B"),
            at(4, "task 2a"),
            at(4, "task 2b"),
        ]
    );
    assert!(!p.is_live(a));
}

pub fn itinerary_config_survives_migration_unchanged<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 2), Registry::new(), 3);
    let route = Route::new(
        vec![Objective::new(l[1], 10, 20), Objective::new(l[2], 30, 40)],
        VirtualTime(0),
    )
    .unwrap();
    let config = ItineraryConfig::new(route, vec![log("reached")], Some(missed::skip_and_log()));
    let before = serde_json::to_value(&config).unwrap();
    let a = p
        .spawn_agent(l[0], vec![Box::new(Itinerary::new(config))])
        .unwrap();
    for until in [3, 15, 25] {
        p.run(RunUntil::Tick(VirtualTime(until))).unwrap();
        let shell = p.agent(a).unwrap();
        let snapshot = shell.behaviors[0].snapshot();
        assert_eq!(snapshot["config"], before, "at tick {until}");
    }
    assert_eq!(p.agent(a).unwrap().current, l[2]);
    assert!(Route::new(vec![], VirtualTime(0)).is_err());
    assert!(Route::new(vec![Objective::new(l[1], 5, 4)], VirtualTime(0)).is_err());
}

/// A random route over locations `0..4`, in absolute ticks from base 0.
pub fn random_route(rng: &mut ChaCha8Rng) -> Vec<Stop> {
    (0..rng.gen_range(1..=5))
        .map(|_| {
            let start = rng.gen_range(0..30);
            Stop {
                location: rng.gen_range(0..4),
                start,
                end: start + rng.gen_range(0..15),
            }
        })
        .collect()
}

/// Outcome of running `route` from location 0: every stop served on time?
pub fn run_route<H: Harness>(route: &[Stop], travel: u64, policy: DeparturePolicy) -> bool {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, travel), Registry::new(), 4);
    let objectives = route
        .iter()
        .map(|s| Objective::new(l[s.location], s.start, s.end))
        .collect();
    let config = ItineraryConfig::new(
        Route::new(objectives, VirtualTime(0)).unwrap(),
        vec![],
        Some(missed::skip_and_log()),
    );
    let it = Itinerary::new(config)
        .with_policy(policy)
        .with_estimator(DelayEstimator::new(Alpha::HALF, travel));
    let a = p.spawn_agent(l[0], vec![Box::new(it)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert!(!p.is_live(a));
    let reached = p.trace().of_kind(TraceKind::ObjectiveReached).count();
    let missed = p.trace().of_kind(TraceKind::ObjectiveMissed).count();
    assert_eq!(reached + missed, route.len());
    for e in p.trace().of_kind(TraceKind::ObjectiveReached) {
        let served = e.get_u64("served_at").unwrap();
        let (start, end) = (
            e.get_u64("window_start").unwrap(),
            e.get_u64("window_end").unwrap(),
        );
        assert!(start <= served && e.get_u64("arrival").unwrap() <= end);
    }
    missed == 0
}

/// With exact delay estimates, the itinerary meets every window exactly
/// when some schedule does.
pub fn itinerary_feasibility_cases<H: Harness>(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let route = random_route(&mut rng);
        let travel = rng.gen_range(1..6);
        let feasible = route_feasible(&route, 0, 0, travel);
        for policy in [DeparturePolicy::Immediate, DeparturePolicy::JustInTime] {
            assert_eq!(
                run_route::<H>(&route, travel, policy),
                feasible,
                "case {case}, {policy:?}, travel {travel}: {route:?}"
            );
        }
    }
}
