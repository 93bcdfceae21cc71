//! Behavior suites shared by the simulator and mock-adapter test targets and
//! by the acceptance run. Every suite is generic over [`Harness`], so the
//! same code exercises both platforms.
#![allow(dead_code)]

pub mod basic;
pub mod composite;
pub mod itinerary;
pub mod oracles;

use mabs::model::{AgentId, LocationId};
use mabs::platform::{MockPlatform, PlatformAdapter, SimConfig, SimPlatform};
use mabs::registry::{ActionDescriptor, Registry};
use mabs::trace::{TraceEvent, TraceKind, TraceLog};

pub trait Harness {
    const NAME: &'static str;
    type P: PlatformAdapter;
    fn make(config: SimConfig, registry: Registry) -> Self::P;
}

pub struct Sim;
pub struct Mock;

impl Harness for Sim {
    const NAME: &'static str = "sim";
    type P = SimPlatform;
    fn make(config: SimConfig, registry: Registry) -> SimPlatform {
        SimPlatform::new(config, registry)
    }
}

impl Harness for Mock {
    const NAME: &'static str = "mock";
    type P = MockPlatform;
    fn make(config: SimConfig, registry: Registry) -> MockPlatform {
        MockPlatform::new(config, registry).expect("suites use deterministic latency")
    }
}

/// A platform with locations `L0..Ln`.
pub fn world<H: Harness>(
    config: SimConfig,
    registry: Registry,
    n: usize,
) -> (H::P, Vec<LocationId>) {
    let mut p = H::make(config, registry);
    let locs = (0..n)
        .map(|i| p.create_location(&format!("L{i}")).unwrap())
        .collect();
    (p, locs)
}

pub fn log(text: &str) -> ActionDescriptor {
    ActionDescriptor::with_params("log", text.as_bytes().to_vec())
}

/// `(tick, agent, text)` of every `log` event.
pub fn logs(trace: &TraceLog) -> Vec<(u64, AgentId, String)> {
    trace
        .custom("log")
        .map(|e| {
            (
                e.tick.0,
                e.agent,
                e.get_str("text").unwrap_or_default().to_string(),
            )
        })
        .collect()
}

pub fn log_texts(trace: &TraceLog, agent: AgentId) -> Vec<String> {
    logs(trace)
        .into_iter()
        .filter(|l| l.1 == agent)
        .map(|l| l.2)
        .collect()
}

pub fn sends<'a>(
    trace: &'a TraceLog,
    type_tag: &'a str,
) -> impl Iterator<Item = &'a TraceEvent> + 'a {
    trace
        .of_kind(TraceKind::Send)
        .filter(move |e| e.get_str("type") == Some(type_tag))
}

pub fn delivers<'a>(
    trace: &'a TraceLog,
    type_tag: &'a str,
) -> impl Iterator<Item = &'a TraceEvent> + 'a {
    trace
        .of_kind(TraceKind::Deliver)
        .filter(move |e| e.get_str("type") == Some(type_tag) && !e.is_failed_delivery())
}

pub fn terminated(trace: &TraceLog, agent: AgentId) -> Option<u64> {
    trace
        .for_agent(agent)
        .find(|e| e.kind == TraceKind::Terminate)
        .map(|e| e.tick.0)
}

/// Expands to one `#[test]` per listed suite function, run on harness `$h`.
#[allow(unused_macros)]
macro_rules! suite_tests {
    ($h:ty => $($module:ident :: $name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                common::$module::$name::<$h>();
            }
        )*
    };
}

/// Every fixed-case suite, plus the randomized suites at `$cases` cases each.
#[allow(unused_macros)]
macro_rules! behavior_suites {
    ($h:ty, $cases:expr) => {
        suite_tests!($h =>
            basic::task_noop_is_done_after_one_step,
            basic::task_send_emits_one_send_then_done,
            basic::task_failing_action_is_traced_and_done,
            basic::observer_fires_on_first_grid_point_after_trigger,
            basic::observer_never_true_stays_blocked,
            basic::observer_rejects_zero_period,
            basic::observer_cyclic_fires_on_its_grid_until_cancelled,
            basic::listener_ignores_other_types,
            basic::listener_wildcard_takes_everything,
            basic::listener_fires_callbacks_in_order,
            basic::listener_requires_callbacks,
            basic::role_factory_adds_behavior_next_tick,
            basic::role_factory_rejects_unknown_role,
            basic::role_factory_assigns_a_group,
            basic::role_factory_target_is_unaware_of_the_role,
            basic::client_server_hand_trace,
            basic::client_times_out_without_server,
            basic::client_retried_by_observer,
            basic::server_spawns_one_worker_per_request,
            basic::server_workers_coexist,
            basic::server_drops_malformed_requests,
            composite::sequential_empty_is_done_on_first_step,
            composite::sequential_runs_children_in_order,
            composite::sequential_reorders_pending_children,
            composite::sequential_refuses_to_move_a_started_child,
            composite::parallel_keeps_blocked_children_pending,
            composite::parallel_any_finishes_with_first_child,
            composite::fsm_single_terminal_state,
            composite::fsm_follows_message_events,
            composite::fsm_follows_emitted_labels,
            composite::fsm_rejects_invalid_definitions,
            composite::custom_composite_runs_on_the_public_contract,
            itinerary::itinerary_waits_for_window_when_early,
            itinerary::itinerary_late_arrival_runs_missed_behavior,
            itinerary::itinerary_abort_stops_the_agent,
            itinerary::itinerary_without_travel_serves_in_place,
            itinerary::itinerary_halts_without_missed_behavior,
            itinerary::itinerary_listeners_run_before_stop_tasks,
            itinerary::itinerary_config_survives_migration_unchanged,
        );

        #[test]
        fn sequential_ordering() {
            common::composite::sequential_ordering_cases::<$h>($cases, 11);
        }

        #[test]
        fn parallel_fairness() {
            common::composite::parallel_fairness_cases::<$h>($cases, 12);
        }

        #[test]
        fn fsm_paths() {
            common::composite::fsm_path_cases::<$h>($cases, 13);
        }

        #[test]
        fn nested_trees() {
            common::composite::nested_tree_cases::<$h>($cases, 14);
        }

        #[test]
        fn itinerary_feasibility() {
            common::itinerary::itinerary_feasibility_cases::<$h>($cases, 15);
        }

        #[test]
        fn protocol_exchanges() {
            common::protocol::protocol_cases::<$h>($cases, 16);
        }

        #[test]
        fn protocol_timeouts() {
            common::protocol::protocol_timeout_cases::<$h>($cases, 17);
        }
    };
}
