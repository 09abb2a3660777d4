use serde::{Deserialize, Serialize};

use super::PlannerError;

/// Memory cue used before any step has been taken.
pub const INITIAL_STATE: &str = "the robot is currently at the initial state";

/// A task's language plan split into ordered sub-task plans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub task: String,
    pub subtasks: Vec<Vec<String>>,
}

/// Where a step sits in a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRef {
    pub subtask: usize,
    pub offset: usize,
    /// Position in the flattened plan.
    pub index: usize,
}

impl Plan {
    pub fn new(task: impl Into<String>, subtasks: Vec<Vec<String>>) -> Result<Self, PlannerError> {
        let plan = Self {
            task: task.into(),
            subtasks,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn single(task: impl Into<String>, steps: Vec<String>) -> Result<Self, PlannerError> {
        Self::new(task, vec![steps])
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.task.trim().is_empty() {
            return Err(PlannerError::InvalidPlan("task description is empty".into()));
        }
        if self.subtasks.is_empty() || self.subtasks.iter().any(Vec::is_empty) {
            return Err(PlannerError::InvalidPlan("plan needs at least one nonempty sub-task".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in self.steps() {
            if s == INITIAL_STATE {
                return Err(PlannerError::InvalidPlan("a step may not equal the initial-state cue".into()));
            }
            if !seen.insert(s) {
                return Err(PlannerError::InvalidPlan(format!("duplicate step {s:?}")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> impl Iterator<Item = &str> {
        self.subtasks.iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.subtasks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, index: usize) -> Option<&str> {
        self.steps().nth(index)
    }

    pub fn locate(&self, step: &str) -> Option<StepRef> {
        let mut index = 0;
        for (m, sub) in self.subtasks.iter().enumerate() {
            for (offset, s) in sub.iter().enumerate() {
                if s == step {
                    return Some(StepRef { subtask: m, offset, index });
                }
                index += 1;
            }
        }
        None
    }

    /// Sub-task index holding the step at flattened position `index`.
    pub fn subtask_of_index(&self, index: usize) -> Option<usize> {
        let mut start = 0;
        for (m, sub) in self.subtasks.iter().enumerate() {
            if index < start + sub.len() {
                return Some(m);
            }
            start += sub.len();
        }
        None
    }

    /// The whole plan as one sub-task.
    pub fn flattened(&self) -> Plan {
        Plan {
            task: self.task.clone(),
            subtasks: vec![self.steps().map(str::to_owned).collect()],
        }
    }

    /// Plans of several tasks run back to back, each one sub-task group.
    pub fn compose(task: impl Into<String>, parts: &[Plan]) -> Result<Plan, PlannerError> {
        Plan::new(task, parts.iter().flat_map(|p| p.subtasks.iter().cloned()).collect())
    }
}
