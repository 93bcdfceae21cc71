//! Task, Observer, Listener, Role Factory, Client and Server.

use serde_json::json;

use mabs::behaviors::{
    assign_role, assign_role_to_group, Client, Listener, Mode, Observer, RoleError, Server,
    ServerRef, Task,
};
use mabs::model::{AgentId, Behavior, Message, VirtualTime};
use mabs::platform::{PlatformAdapter, RunUntil, SimConfig};
use mabs::registry::{ActionDescriptor, Registry};
use mabs::trace::TraceKind;

use super::*;

fn idle() -> Box<dyn Behavior> {
    Box::new(Listener::new("NEVER_SENT", vec![ActionDescriptor::noop()], Mode::Cyclic).unwrap())
}

fn send(to: AgentId, type_tag: &str, payload: &str) -> ActionDescriptor {
    ActionDescriptor::with_json(
        "send",
        &json!({ "to": to, "type": type_tag, "payload": payload }),
    )
}

fn client(server: AgentId, ack: u64, result: u64) -> Box<dyn Behavior> {
    Box::new(
        Client::new(
            ServerRef::Agent(server),
            ActionDescriptor::with_params("emit", b"done".to_vec()),
            ack,
            result,
            log("result"),
            log("failure"),
        )
        .unwrap(),
    )
}

pub fn task_noop_is_done_after_one_step<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let a = p
        .spawn_agent(l[0], vec![Task::boxed(ActionDescriptor::noop())])
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let kinds: Vec<_> = p.trace().for_agent(a).map(|e| (e.tick.0, e.kind)).collect();
    assert_eq!(
        kinds,
        vec![
            (0, TraceKind::Spawn),
            (0, TraceKind::BehaviorDone),
            (0, TraceKind::Terminate)
        ]
    );
}

pub fn task_send_emits_one_send_then_done<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let rx = p.spawn_agent(l[0], vec![idle()]).unwrap();
    let tx = p
        .spawn_agent(l[0], vec![Task::boxed(send(rx, "PING", "hi"))])
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let kinds: Vec<_> = p.trace().for_agent(tx).map(|e| e.kind).collect();
    assert_eq!(
        kinds,
        vec![
            TraceKind::Spawn,
            TraceKind::Send,
            TraceKind::BehaviorDone,
            TraceKind::Terminate
        ]
    );
    assert_eq!(sends(p.trace(), "PING").count(), 1);
}

pub fn task_failing_action_is_traced_and_done<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let a = p
        .spawn_agent(
            l[0],
            vec![Task::boxed(ActionDescriptor::with_params(
                "fail",
                b"boom".to_vec(),
            ))],
        )
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let events: Vec<_> = p.trace().for_agent(a).collect();
    assert!(events[1].is_custom("action_error"));
    assert!(events[1].get_str("error").unwrap().contains("boom"));
    assert_eq!(events[2].kind, TraceKind::BehaviorDone);
}

pub fn observer_fires_on_first_grid_point_after_trigger<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let obs = Observer::new(
        5,
        ActionDescriptor::with_json("clock_at_least", &12u64),
        log("fired"),
        Mode::OneShot,
    )
    .unwrap();
    let a = p.spawn_agent(l[0], vec![Box::new(obs)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(logs(p.trace()), vec![(15, a, "fired".to_string())]);
    assert_eq!(terminated(p.trace(), a), Some(15));
}

pub fn observer_never_true_stays_blocked<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let obs = Observer::new(
        3,
        ActionDescriptor::new("never"),
        log("fired"),
        Mode::OneShot,
    )
    .unwrap();
    let a = p.spawn_agent(l[0], vec![Box::new(obs)]).unwrap();
    p.run(RunUntil::Tick(VirtualTime(200))).unwrap();
    assert!(logs(p.trace()).is_empty());
    assert!(p.is_live(a));
    assert_eq!(p.trace().of_kind(TraceKind::BehaviorDone).count(), 0);
}

pub fn observer_rejects_zero_period<H: Harness>() {
    assert!(Observer::new(0, ActionDescriptor::new("always"), log("x"), Mode::OneShot).is_err());
}

pub fn observer_cyclic_fires_on_its_grid_until_cancelled<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    p.run(RunUntil::Tick(VirtualTime(2))).unwrap();
    let obs = Observer::new(
        4,
        ActionDescriptor::new("always"),
        log("tick"),
        Mode::Cyclic,
    )
    .unwrap()
    .cancel_on("STOP");
    let a = p.spawn_agent(l[0], vec![Box::new(obs)]).unwrap();
    let stopper = Observer::new(
        1,
        ActionDescriptor::with_json("clock_at_least", &30u64),
        send(a, "STOP", ""),
        Mode::OneShot,
    )
    .unwrap();
    p.spawn_agent(l[0], vec![Box::new(stopper)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let ticks: Vec<u64> = logs(p.trace())
        .iter()
        .filter(|x| x.1 == a)
        .map(|x| x.0)
        .collect();
    assert_eq!(ticks, vec![7, 11, 15, 19, 23, 27]);
    assert!(ticks.iter().all(|t| t % 4 == 3));
    assert!(!p.is_live(a));
}

pub fn listener_ignores_other_types<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let rx = p
        .spawn_agent(
            l[0],
            vec![Box::new(
                Listener::new("CMD", vec![log("got")], Mode::OneShot).unwrap(),
            )],
        )
        .unwrap();
    p.spawn_agent(l[0], vec![Task::boxed(send(rx, "DATA", "x"))])
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert!(logs(p.trace()).is_empty());
    assert!(p.is_live(rx));
    let shell = p.agent(rx).unwrap();
    assert_eq!(
        shell.inbox.len(),
        1,
        "non-matching message stays in the inbox"
    );
}

pub fn listener_wildcard_takes_everything<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let rx = p
        .spawn_agent(
            l[0],
            vec![Box::new(
                Listener::new("*", vec![log("got")], Mode::Cyclic).unwrap(),
            )],
        )
        .unwrap();
    p.spawn_agent(
        l[0],
        vec![
            Task::boxed(send(rx, "DATA", "x")),
            Task::boxed(send(rx, "CMD", "y")),
        ],
    )
    .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(log_texts(p.trace(), rx), vec!["got", "got"]);
    assert!(p.agent(rx).unwrap().inbox.is_empty());
}

pub fn listener_fires_callbacks_in_order<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let callbacks = vec![log("1"), log("2"), log("3")];
    let rx = p
        .spawn_agent(
            l[0],
            vec![Box::new(
                Listener::new("DATA", callbacks, Mode::OneShot).unwrap(),
            )],
        )
        .unwrap();
    p.spawn_agent(l[0], vec![Task::boxed(send(rx, "DATA", "x"))])
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(log_texts(p.trace(), rx), vec!["1", "2", "3"]);
    assert_eq!(terminated(p.trace(), rx), Some(1));
}

pub fn listener_requires_callbacks<H: Harness>() {
    assert!(Listener::new("*", vec![], Mode::Cyclic).is_err());
}

fn greeter(_: &[u8]) -> Result<Box<dyn Behavior>, String> {
    Ok(Task::boxed(log("hello")))
}

fn counter(_: &[u8]) -> Result<Box<dyn Behavior>, String> {
    Ok(Task::boxed(ActionDescriptor::with_params(
        "count",
        b"n".to_vec(),
    )))
}

fn role_registry() -> Registry {
    let mut reg = Registry::new();
    reg.register_role("greeter", greeter).unwrap();
    reg.register_role("counter", counter).unwrap();
    reg
}

pub fn role_factory_adds_behavior_next_tick<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), role_registry(), 1);
    let a = p.spawn_agent(l[0], vec![idle()]).unwrap();
    p.run(RunUntil::Tick(VirtualTime(4))).unwrap();
    assert_eq!(p.agent(a).unwrap().behaviors.len(), 1);
    assign_role(&mut p, a, "greeter", b"").unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(p.agent(a).unwrap().behaviors.len(), 2);
    assert_eq!(logs(p.trace()), vec![(5, a, "hello".to_string())]);
}

pub fn role_factory_rejects_unknown_role<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), role_registry(), 1);
    let a = p.spawn_agent(l[0], vec![idle()]).unwrap();
    assert!(matches!(
        assign_role(&mut p, a, "x", b""),
        Err(RoleError::UnknownRole(_))
    ));
    assert!(matches!(
        assign_role(&mut p, AgentId(42), "greeter", b""),
        Err(RoleError::UnknownAgent(_))
    ));
    assert!(Registry::new().register_role("greeter", greeter).is_ok());
    let mut reg = role_registry();
    assert!(reg.register_role("greeter", greeter).is_ok(), "idempotent");
    assert!(reg.register_role("greeter", counter).is_err());
}

pub fn role_factory_assigns_a_group<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), role_registry(), 2);
    let group: Vec<AgentId> = (0..3)
        .map(|i| p.spawn_agent(l[i % 2], vec![idle()]).unwrap())
        .collect();
    p.run(RunUntil::Tick(VirtualTime(1))).unwrap();
    assign_role_to_group(&mut p, &group, "greeter", b"").unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    for a in &group {
        assert_eq!(log_texts(p.trace(), *a), vec!["hello"]);
        assert_eq!(p.agent(*a).unwrap().behaviors.len(), 2);
    }
}

pub fn role_factory_target_is_unaware_of_the_role<H: Harness>() {
    let snapshot_before = |role: &str| {
        let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), role_registry(), 1);
        let a = p.spawn_agent(l[0], vec![idle()]).unwrap();
        p.run(RunUntil::Tick(VirtualTime(3))).unwrap();
        let before = p.agent(a).unwrap().to_bytes();
        assign_role(&mut p, a, role, b"").unwrap();
        p.run(RunUntil::Quiescent).unwrap();
        before
    };
    assert_eq!(snapshot_before("greeter"), snapshot_before("counter"));
}

pub fn client_server_hand_trace<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 2);
    let server = p.spawn_agent(l[0], vec![Box::new(Server::new(1))]).unwrap();
    let c = p.spawn_agent(l[1], vec![client(server, 10, 10)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let t = p.trace();
    let request = sends(t, "REQUEST").next().unwrap();
    assert_eq!((request.tick.0, request.agent), (0, c));
    let ack = sends(t, "ACK").next().unwrap();
    assert_eq!(ack.tick.0, 2);
    assert_eq!(delivers(t, "ACK").next().unwrap().tick.0, 3);
    let result = sends(t, "RESULT").next().unwrap();
    assert_eq!(result.tick.0, 3);
    assert_eq!(ack.agent, result.agent);
    assert_eq!(logs(t), vec![(4, c, "result".to_string())]);
    assert!(p.is_live(server));
}

pub fn client_times_out_without_server<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    p.run(RunUntil::Tick(VirtualTime(4))).unwrap();
    let c = p
        .spawn_agent(l[0], vec![client(AgentId(99), 10, 10)])
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let t = p.trace();
    let sent = sends(t, "REQUEST").next().unwrap().tick.0;
    let failure = t.custom("client_failure").next().unwrap();
    assert_eq!(failure.tick.0, sent + 10);
    assert_eq!(failure.get_str("reason"), Some("ack_timeout"));
    assert_eq!(logs(t), vec![(sent + 10, c, "failure".to_string())]);
    assert_eq!(terminated(t, c), Some(sent + 10));
}

fn retry_client(params: &[u8]) -> Result<Box<dyn Behavior>, String> {
    let server: AgentId = serde_json::from_slice(params).map_err(|e| e.to_string())?;
    Ok(client(server, 20, 20))
}

pub fn client_retried_by_observer<H: Harness>() {
    let mut reg = Registry::new();
    reg.register_role("retry_client", retry_client).unwrap();
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), reg, 2);
    let server = p.spawn_agent(l[0], vec![Box::new(Server::new(1))]).unwrap();
    let me = AgentId(1);
    let first = Client::new(
        ServerRef::Agent(AgentId(77)),
        ActionDescriptor::noop(),
        5,
        5,
        log("result"),
        ActionDescriptor::with_json("set_state", &json!({ "key": "retry", "value": true })),
    )
    .unwrap();
    let retry = Observer::new(
        1,
        ActionDescriptor::with_params("state_flag", b"retry".to_vec()),
        ActionDescriptor::with_json(
            "assign_role",
            &json!({ "target": me, "role": "retry_client", "params": server }),
        ),
        Mode::OneShot,
    )
    .unwrap();
    let c = p
        .spawn_agent(l[1], vec![Box::new(first), Box::new(retry)])
        .unwrap();
    assert_eq!(c, me);
    p.run(RunUntil::Quiescent).unwrap();
    let requests: Vec<_> = sends(p.trace(), "REQUEST")
        .map(|e| e.get_u64("to").unwrap())
        .collect();
    assert_eq!(requests, vec![77, server.0]);
    assert_eq!(log_texts(p.trace(), c), vec!["result"]);
}

pub fn server_spawns_one_worker_per_request<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 2);
    let server = p.spawn_agent(l[0], vec![Box::new(Server::new(1))]).unwrap();
    p.spawn_agent(l[1], vec![client(server, 10, 10)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    let t = p.trace();
    let workers: Vec<AgentId> = t
        .of_kind(TraceKind::Spawn)
        .filter(|e| e.get_u64("parent") == Some(server.0))
        .map(|e| e.agent)
        .collect();
    assert_eq!(workers.len(), 1);
    let w = workers[0];
    let kinds: Vec<_> = t
        .for_agent(w)
        .filter(|e| e.kind != TraceKind::BehaviorDone)
        .map(|e| (e.kind, e.get_str("type").map(str::to_string)))
        .collect();
    assert_eq!(
        kinds,
        vec![
            (TraceKind::Spawn, None),
            (TraceKind::Send, Some("ACK".into())),
            (TraceKind::Send, Some("RESULT".into())),
            (TraceKind::Terminate, None),
        ]
    );
}

pub fn server_workers_coexist<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 2);
    let server = p.spawn_agent(l[0], vec![Box::new(Server::new(5))]).unwrap();
    for _ in 0..3 {
        p.spawn_agent(l[1], vec![client(server, 10, 20)]).unwrap();
    }
    p.run(RunUntil::Quiescent).unwrap();
    let t = p.trace();
    let lifetimes: Vec<(u64, u64)> = t
        .of_kind(TraceKind::Spawn)
        .filter(|e| e.get_u64("parent") == Some(server.0))
        .map(|e| (e.tick.0, terminated(t, e.agent).unwrap()))
        .collect();
    assert_eq!(lifetimes.len(), 3);
    let latest_start = lifetimes.iter().map(|x| x.0).max().unwrap();
    let earliest_end = lifetimes.iter().map(|x| x.1).min().unwrap();
    assert!(
        latest_start < earliest_end,
        "all three workers alive at once: {lifetimes:?}"
    );
    assert_eq!(logs(t).iter().filter(|x| x.2 == "result").count(), 3);
    assert!(p.is_live(server));
}

pub fn server_drops_malformed_requests<H: Harness>() {
    let (mut p, l) = world::<H>(SimConfig::fixed(1, 1), Registry::new(), 1);
    let server = p.spawn_agent(l[0], vec![Box::new(Server::new(1))]).unwrap();
    let sender = p.spawn_agent(l[0], vec![idle()]).unwrap();
    p.send(
        Message::new(
            sender,
            server,
            "REQUEST",
            "bad-1",
            b"garbage".to_vec(),
            VirtualTime(0),
        )
        .unwrap(),
    )
    .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(p.trace().custom("malformed_request").count(), 1);
    assert_eq!(sends(p.trace(), "ACK").count(), 0);
    assert_eq!(p.trace().of_kind(TraceKind::Spawn).count(), 2);
}
