use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{step_child, wait_on, CompositeError};
use crate::model::{
    snapshot_of, AgentContext, Behavior, BehaviorCell, BehaviorError, StepOutcome, WakeCondition,
};
use crate::trace::detail;

/// Runs children one at a time in list order. The order of children that
/// have not started yet can be changed while the composite runs, either
/// through [`Sequential::reorder`] or by a control message whose payload is
/// the JSON array of the new order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    children: Vec<BehaviorCell>,
    #[serde(default)]
    current: usize,
    #[serde(default)]
    control: Option<String>,
}

impl Sequential {
    pub const KIND: &'static str = "sequential";

    pub fn new(children: Vec<Box<dyn Behavior>>) -> Self {
        Sequential {
            children: children.into_iter().map(BehaviorCell::new).collect(),
            current: 0,
            control: None,
        }
    }

    pub fn boxed(children: Vec<Box<dyn Behavior>>) -> Box<dyn Behavior> {
        Box::new(Sequential::new(children))
    }

    /// Accept reorder requests as messages with this type tag.
    pub fn with_control(mut self, type_tag: impl Into<String>) -> Self {
        self.control = Some(type_tag.into());
        self
    }

    pub fn children(&self) -> &[BehaviorCell] {
        &self.children
    }

    pub fn current(&self) -> usize {
        self.current
    }

    fn started(&self, index: usize) -> bool {
        index < self.current || self.children[index].steps() > 0
    }

    /// `new_order[k]` names the child that moves to position `k`. Children
    /// that already started or finished must keep their position.
    pub fn reorder(&mut self, new_order: &[usize]) -> Result<(), CompositeError> {
        let n = self.children.len();
        let mut seen = vec![false; n];
        if new_order.len() != n {
            return Err(CompositeError::NotAPermutation(n));
        }
        for &i in new_order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(CompositeError::NotAPermutation(n));
            }
        }
        for (pos, &i) in new_order.iter().enumerate() {
            if pos != i && (self.started(i) || self.started(pos)) {
                return Err(CompositeError::ReorderStartedChild(if self.started(i) {
                    i
                } else {
                    pos
                }));
            }
        }
        let mut old: Vec<Option<BehaviorCell>> = self.children.drain(..).map(Some).collect();
        self.children = new_order
            .iter()
            .map(|&i| old[i].take().expect("checked permutation"))
            .collect();
        Ok(())
    }

    fn handle_control(&mut self, ctx: &mut AgentContext<'_>) {
        let Some(tag) = self.control.clone() else {
            return;
        };
        for msg in ctx.take_messages(|m| m.matches(&tag)) {
            let result = serde_json::from_slice::<Vec<usize>>(&msg.payload)
                .map_err(|e| e.to_string())
                .and_then(|order| self.reorder(&order).map_err(|e| e.to_string()));
            if let Err(error) = result {
                ctx.trace_custom("reorder_rejected", detail([("error", Value::from(error))]));
            }
        }
    }
}

impl Behavior for Sequential {
    fn kind(&self) -> &str {
        Self::KIND
    }

    fn step(&mut self, ctx: &mut AgentContext<'_>) -> Result<StepOutcome, BehaviorError> {
        self.handle_control(ctx);
        while let Some(cell) = self.children.get_mut(self.current) {
            step_child(ctx, self.current, cell);
            if !cell.is_done() {
                break;
            }
            self.current += 1;
        }
        let Some(cell) = self.children.get(self.current) else {
            return Ok(StepOutcome::Done);
        };
        let mut wakes = vec![cell.pending_wake().expect("current child is not done")];
        if let Some(tag) = &self.control {
            wakes.push(WakeCondition::OnMessage(tag.clone()));
        }
        Ok(wait_on(wakes))
    }

    fn snapshot(&self) -> Value {
        snapshot_of(self)
    }
}
