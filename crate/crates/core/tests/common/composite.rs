//! Sequential, Parallel, FSM and a composite written only against the public
//! behavior contract.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mabs::behaviors::{Listener, Mode, Observer, Task};
use mabs::composite::{
    Completion, Fsm, FsmDefinition, Parallel, Sequential, Transition, FSM_EVENT,
};
use mabs::model::{
    AgentContext, AgentId, Behavior, BehaviorCell, BehaviorError, Message, StepOutcome,
    VirtualTime, WakeCondition,
};
use mabs::platform::{PlatformAdapter, RunUntil, SimConfig};
use mabs::registry::{ActionDescriptor, Registry};
use mabs::trace::{Detail, TraceKind};

use super::*;

/// Runs for `length` steps, logging `label` and counting its steps in state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ticker {
    label: String,
    length: u32,
    done: u32,
}

impl Ticker {
    pub fn boxed(label: impl Into<String>, length: u32) -> Box<dyn Behavior> {
        Box::new(Ticker {
            label: label.into(),
            length: length.max(1),
            done: 0,
        })
    }
}

impl Behavior for Ticker {
    fn kind(&self) -> &str {
        "ticker"
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        self.done += 1;
        let key = format!("steps.{}", self.label);
        ctx.set_state(&key, &self.done);
        let mut d = Detail::new();
        d.insert("text".into(), Value::from(self.label.as_str()));
        ctx.trace_custom("log", d);
        Ok(if self.done >= self.length {
            StepOutcome::Done
        } else {
            StepOutcome::Running
        })
    }

    fn snapshot(&self) -> Value {
        serde_json::to_value(self).unwrap()
    }
}

/// Runs a fresh copy of its template `times` times in a row.
#[derive(Debug, Clone)]
pub struct Repeat {
    template: Box<dyn Behavior>,
    current: BehaviorCell,
    left: u32,
}

impl Repeat {
    pub fn new(template: Box<dyn Behavior>, times: u32) -> Self {
        Repeat {
            current: BehaviorCell::new(template.clone()),
            template,
            left: times,
        }
    }
}

impl Behavior for Repeat {
    fn kind(&self) -> &str {
        "repeat"
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        if self.left == 0 {
            return Ok(StepOutcome::Done);
        }
        if self.current.is_runnable(&ctx.wake_view()) {
            self.current.step(ctx)?;
        }
        if self.current.is_done() {
            self.left -= 1;
            if self.left == 0 {
                return Ok(StepOutcome::Done);
            }
            self.current = BehaviorCell::new(self.template.clone());
            return Ok(StepOutcome::Running);
        }
        Ok(StepOutcome::Blocked(
            self.current
                .pending_wake()
                .unwrap_or(WakeCondition::AtTime(ctx.now() + 1)),
        ))
    }

    fn snapshot(&self) -> Value {
        json!({ "left": self.left, "current": self.current.snapshot() })
    }
}

fn task_log(text: &str) -> Box<dyn Behavior> {
    Task::boxed(log(text))
}

fn waiting_for(tag: &str, text: &str) -> Box<dyn Behavior> {
    Box::new(Listener::new(tag, vec![log(text)], Mode::OneShot).unwrap())
}

fn fixed() -> SimConfig {
    SimConfig::fixed(1, 1)
}

pub fn sequential_empty_is_done_on_first_step<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let a = p
        .spawn_agent(l[0], vec![Sequential::boxed(vec![])])
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(terminated(p.trace(), a), Some(0));
}

pub fn sequential_runs_children_in_order<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let a = p
        .spawn_agent(
            l[0],
            vec![Sequential::boxed(vec![
                Ticker::boxed("A", 3),
                task_log("B"),
            ])],
        )
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(log_texts(p.trace(), a), vec!["A", "A", "A", "B"]);
}

pub fn sequential_reorders_pending_children<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let seq = Sequential::new(vec![waiting_for("GO", "A"), task_log("B"), task_log("C")])
        .with_control("ORDER");
    let a = p.spawn_agent(l[0], vec![Box::new(seq)]).unwrap();
    let ctl = p
        .spawn_agent(l[0], vec![waiting_for("NEVER", "x")])
        .unwrap();
    p.run(RunUntil::Tick(VirtualTime(2))).unwrap();
    p.send(Message::new(ctl, a, "ORDER", "k", b"[0,2,1]".to_vec(), p.now()).unwrap())
        .unwrap();
    p.send(Message::new(ctl, a, "GO", "k", vec![], p.now()).unwrap())
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(log_texts(p.trace(), a), vec!["A", "C", "B"]);
    assert_eq!(p.trace().custom("reorder_rejected").count(), 0);
}

pub fn sequential_refuses_to_move_a_started_child<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let seq = Sequential::new(vec![waiting_for("GO", "A"), task_log("B")]).with_control("ORDER");
    let a = p.spawn_agent(l[0], vec![Box::new(seq)]).unwrap();
    let ctl = p
        .spawn_agent(l[0], vec![waiting_for("NEVER", "x")])
        .unwrap();
    p.run(RunUntil::Tick(VirtualTime(2))).unwrap();
    p.send(Message::new(ctl, a, "ORDER", "k", b"[1,0]".to_vec(), p.now()).unwrap())
        .unwrap();
    p.send(Message::new(ctl, a, "GO", "k", vec![], p.now()).unwrap())
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(p.trace().custom("reorder_rejected").count(), 1);
    assert_eq!(log_texts(p.trace(), a), vec!["A", "B"]);
}

pub fn parallel_keeps_blocked_children_pending<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let par = Parallel::all(vec![waiting_for("GO", "L"), task_log("A")]);
    let a = p.spawn_agent(l[0], vec![Box::new(par)]).unwrap();
    p.run(RunUntil::Tick(VirtualTime(20))).unwrap();
    assert_eq!(log_texts(p.trace(), a), vec!["A"]);
    assert!(p.is_live(a));
    assert_eq!(p.trace().of_kind(TraceKind::BehaviorDone).count(), 0);
}

pub fn parallel_any_finishes_with_first_child<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let slow = Observer::new(
        50,
        ActionDescriptor::new("always"),
        log("slow"),
        Mode::Cyclic,
    )
    .unwrap();
    let par = Parallel::new(vec![Box::new(slow), Ticker::boxed("A", 2)], Completion::Any);
    let a = p.spawn_agent(l[0], vec![Box::new(par)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(terminated(p.trace(), a), Some(1));
    assert_eq!(log_texts(p.trace(), a), vec!["A", "A"]);
}

fn fsm(
    states: &[(&str, ActionDescriptor)],
    transitions: &[(&str, &str, &str)],
    start: &str,
    terminals: &[&str],
) -> Fsm {
    Fsm::new(FsmDefinition {
        states: states
            .iter()
            .map(|(s, a)| (s.to_string(), a.clone()))
            .collect(),
        transitions: transitions
            .iter()
            .map(|(f, e, t)| Transition {
                from: f.to_string(),
                event: e.to_string(),
                to: t.to_string(),
            })
            .collect(),
        start: start.into(),
        terminals: terminals.iter().map(|s| s.to_string()).collect(),
    })
    .unwrap()
}

fn entered(p: &impl PlatformAdapter, agent: AgentId) -> Vec<String> {
    p.trace()
        .for_agent(agent)
        .filter(|e| e.is_custom("fsm_enter"))
        .map(|e| e.get_str("state").unwrap().to_string())
        .collect()
}

pub fn fsm_single_terminal_state<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let m = fsm(&[("S", ActionDescriptor::noop())], &[], "S", &["S"]);
    let a = p.spawn_agent(l[0], vec![Box::new(m)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(entered(&p, a), vec!["S"]);
    assert_eq!(terminated(p.trace(), a), Some(0));
}

pub fn fsm_follows_message_events<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let m = fsm(
        &[("S", log("in S")), ("T", log("in T"))],
        &[("S", "go", "T")],
        "S",
        &["T"],
    );
    let a = p.spawn_agent(l[0], vec![Box::new(m)]).unwrap();
    let ctl = p
        .spawn_agent(l[0], vec![waiting_for("NEVER", "x")])
        .unwrap();
    p.run(RunUntil::Tick(VirtualTime(3))).unwrap();
    p.send(Message::new(ctl, a, FSM_EVENT, "k", b"jump".to_vec(), p.now()).unwrap())
        .unwrap();
    p.run(RunUntil::Tick(VirtualTime(6))).unwrap();
    assert_eq!(entered(&p, a), vec!["S"]);
    let undefined = p.trace().custom("fsm_undefined_transition").next().unwrap();
    assert_eq!(undefined.get_str("state"), Some("S"));
    assert_eq!(undefined.get_str("label"), Some("jump"));
    p.send(Message::new(ctl, a, FSM_EVENT, "k", b"go".to_vec(), p.now()).unwrap())
        .unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(entered(&p, a), vec!["S", "T"]);
    assert_eq!(log_texts(p.trace(), a), vec!["in S", "in T"]);
    assert!(!p.is_live(a));
}

pub fn fsm_follows_emitted_labels<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let emit = |label: &str| ActionDescriptor::with_params("emit", label.as_bytes().to_vec());
    let m = fsm(
        &[
            ("idle", emit("start")),
            ("busy", emit("finish")),
            ("done", ActionDescriptor::noop()),
        ],
        &[("idle", "start", "busy"), ("busy", "finish", "done")],
        "idle",
        &["done"],
    );
    let a = p.spawn_agent(l[0], vec![Box::new(m)]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(entered(&p, a), vec!["idle", "busy", "done"]);
}

pub fn fsm_rejects_invalid_definitions<H: Harness>() {
    let bad = FsmDefinition {
        states: [("S".to_string(), ActionDescriptor::noop())].into(),
        transitions: vec![Transition {
            from: "S".into(),
            event: "go".into(),
            to: "Nowhere".into(),
        }],
        start: "S".into(),
        terminals: Default::default(),
    };
    assert!(Fsm::new(bad).is_err());
}

pub fn custom_composite_runs_on_the_public_contract<H: Harness>() {
    let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
    let repeat = Repeat::new(Ticker::boxed("r", 2), 3);
    let inner = Sequential::boxed(vec![Box::new(repeat), task_log("end")]);
    let a = p.spawn_agent(l[0], vec![inner]).unwrap();
    p.run(RunUntil::Quiescent).unwrap();
    assert_eq!(
        log_texts(p.trace(), a),
        vec!["r", "r", "r", "r", "r", "r", "end"]
    );
}

/// A random child that logs `label` one or more times.
fn random_child(rng: &mut ChaCha8Rng, label: &str) -> Box<dyn Behavior> {
    match rng.gen_range(0..4) {
        0 => task_log(label),
        1 => Ticker::boxed(label, rng.gen_range(1..5)),
        2 => Box::new(Parallel::all(vec![
            task_log(label),
            Ticker::boxed(label, rng.gen_range(1..4)),
        ])),
        _ => Box::new(
            Observer::new(
                rng.gen_range(1..4),
                ActionDescriptor::new("always"),
                log(label),
                Mode::OneShot,
            )
            .unwrap(),
        ),
    }
}

/// Every effect of child i precedes every effect of child j > i.
pub fn sequential_ordering_cases<H: Harness>(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(0..7);
        let labels: Vec<String> = (0..n).map(|i| format!("{i:02}")).collect();
        let children = labels
            .iter()
            .map(|lbl| random_child(&mut rng, lbl))
            .collect();
        let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
        let a = p
            .spawn_agent(l[0], vec![Sequential::boxed(children)])
            .unwrap();
        p.run(RunUntil::Quiescent).unwrap();
        let seen = log_texts(p.trace(), a);
        assert!(
            seen.windows(2).all(|w| w[0] <= w[1]),
            "case {case}: {seen:?}"
        );
        let mut distinct = seen.clone();
        distinct.dedup();
        assert_eq!(distinct, labels, "case {case}: every child ran");
        assert!(!p.is_live(a), "case {case}");
    }
}

/// Among children that are neither done nor blocked, step counts never
/// differ by more than one.
pub fn parallel_fairness_cases<H: Harness>(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..7);
        let lengths: Vec<u32> = (0..n).map(|_| rng.gen_range(1..12)).collect();
        let mut children: Vec<Box<dyn Behavior>> = lengths
            .iter()
            .enumerate()
            .map(|(i, len)| Ticker::boxed(format!("t{i}"), *len))
            .collect();
        for _ in 0..rng.gen_range(0..3) {
            let at = rng.gen_range(0..=children.len());
            children.insert(at, waiting_for("NEVER", "blocked"));
        }
        let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
        let a = p
            .spawn_agent(l[0], vec![Box::new(Parallel::all(children))])
            .unwrap();
        let horizon = rng.gen_range(1..15u64);
        for k in 0..horizon {
            p.run(RunUntil::Tick(VirtualTime(k))).unwrap();
            let Some(shell) = p.agent(a) else {
                break;
            };
            let counts: Vec<u32> = lengths
                .iter()
                .enumerate()
                .filter_map(|(i, len)| {
                    let c = shell
                        .state
                        .get(&format!("steps.t{i}"))
                        .and_then(Value::as_u64)
                        .unwrap_or(0) as u32;
                    (c < *len).then_some(c)
                })
                .collect();
            if let (Some(lo), Some(hi)) = (counts.iter().min(), counts.iter().max()) {
                assert!(hi - lo <= 1, "case {case}, tick {k}: {counts:?}");
            }
        }
    }
}

/// Entered states always form a walk in the transition graph from `start`.
pub fn fsm_path_cases<H: Harness>(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ["a", "b", "c"];
    for case in 0..cases {
        let n = rng.gen_range(1..6);
        let names: Vec<String> = (0..n).map(|i| format!("S{i}")).collect();
        let states = names
            .iter()
            .map(|s| {
                let activity = if rng.gen_bool(0.5) {
                    ActionDescriptor::with_params(
                        "emit",
                        labels.choose(&mut rng).unwrap().as_bytes().to_vec(),
                    )
                } else {
                    ActionDescriptor::noop()
                };
                (s.clone(), activity)
            })
            .collect();
        let mut transitions = Vec::new();
        for from in &names {
            for ev in labels {
                if rng.gen_bool(0.5) {
                    transitions.push(Transition {
                        from: from.clone(),
                        event: ev.into(),
                        to: names.choose(&mut rng).unwrap().clone(),
                    });
                }
            }
        }
        let terminals = names
            .iter()
            .filter(|_| rng.gen_bool(0.2))
            .cloned()
            .collect();
        let def = FsmDefinition {
            states,
            transitions,
            start: names[0].clone(),
            terminals,
        };
        let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
        let a = p
            .spawn_agent(l[0], vec![Box::new(Fsm::new(def.clone()).unwrap())])
            .unwrap();
        let events: Vec<&str> = (0..rng.gen_range(0..8))
            .map(|_| *labels.choose(&mut rng).unwrap())
            .collect();
        let sender = p
            .spawn_agent(
                l[0],
                events
                    .iter()
                    .map(|e| {
                        Task::boxed(ActionDescriptor::with_json(
                            "send",
                            &json!({ "to": a, "type": FSM_EVENT, "payload": e }),
                        ))
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .chain(std::iter::once(waiting_for("NEVER", "x")))
                    .collect(),
            )
            .unwrap();
        let _ = sender;
        p.run(RunUntil::Tick(VirtualTime(40))).unwrap();
        let path = entered(&p, a);
        assert_eq!(path.first(), Some(&def.start), "case {case}");
        for w in path.windows(2) {
            assert!(
                labels
                    .iter()
                    .any(|ev| def.target(&w[0], ev) == Some(w[1].as_str())),
                "case {case}: no edge {} -> {}",
                w[0],
                w[1]
            );
        }
        if let Some(pos) = path.iter().position(|s| def.is_terminal(s)) {
            assert_eq!(
                pos,
                path.len() - 1,
                "case {case}: nothing entered after a terminal"
            );
        }
    }
}

fn random_tree(rng: &mut ChaCha8Rng, depth: u32, leaves: &mut usize) -> Box<dyn Behavior> {
    if depth == 0 || rng.gen_bool(0.3) {
        *leaves += 1;
        return task_log("leaf");
    }
    let n = rng.gen_range(1..4);
    let children = (0..n)
        .map(|_| random_tree(rng, depth - 1, leaves))
        .collect();
    if rng.gen_bool(0.5) {
        Sequential::boxed(children)
    } else {
        Box::new(Parallel::all(children))
    }
}

/// Random 3-deep composite trees over tasks: one effect per leaf.
pub fn nested_tree_cases<H: Harness>(cases: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let mut leaves = 0;
        let tree = random_tree(&mut rng, 3, &mut leaves);
        let (mut p, l) = world::<H>(fixed(), Registry::new(), 1);
        let a = p.spawn_agent(l[0], vec![tree]).unwrap();
        p.run(RunUntil::Quiescent).unwrap();
        assert_eq!(log_texts(p.trace(), a).len(), leaves, "case {case}");
        assert!(!p.is_live(a));
    }
}
