use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::wire::{self, ViewEncoding};
use super::{validate_response, Planner, PlannerError, Round1Query, Round2Query, Round2Response, INITIAL_STATE};
use crate::geometry::ViewSet;
use crate::trajectory::Gripper;

/// One line of the JSON-lines transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptEntry {
    pub seq: usize,
    pub kind: &'static str,
    pub subtask: usize,
    pub payload: Value,
}

/// Per-episode protocol state: the memory cue, the current sub-task index
/// and the transcript.
#[derive(Debug, Clone)]
pub struct PlannerSession {
    task: String,
    memory: bool,
    previous_step: String,
    subtask: usize,
    current_plan: Vec<String>,
    transcript: Vec<TranscriptEntry>,
}

impl PlannerSession {
    /// `memory = false` withholds the previous step from the planner.
    pub fn new(task: impl Into<String>, memory: bool) -> Result<Self, PlannerError> {
        let task = task.into();
        if task.trim().is_empty() {
            return Err(PlannerError::EmptyTask);
        }
        Ok(Self {
            task,
            memory,
            previous_step: INITIAL_STATE.to_owned(),
            subtask: 0,
            current_plan: Vec::new(),
            transcript: Vec::new(),
        })
    }

    pub fn task(&self) -> &str {
        &self.task
    }

    pub fn previous_step(&self) -> &str {
        &self.previous_step
    }

    /// Zero-based index of the current sub-task.
    pub fn subtask(&self) -> usize {
        self.subtask
    }

    pub fn current_plan(&self) -> &[String] {
        &self.current_plan
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    fn cue(&self) -> Option<String> {
        self.memory.then(|| self.previous_step.clone())
    }

    fn record(&mut self, kind: &'static str, payload: Value) {
        self.transcript.push(TranscriptEntry {
            seq: self.transcript.len(),
            kind,
            subtask: self.subtask,
            payload,
        });
    }

    /// Ask for the current sub-task plan. An empty plan means the task is
    /// complete.
    pub fn round1(&mut self, planner: &dyn Planner) -> Result<Vec<String>, PlannerError> {
        let query = Round1Query {
            task: self.task.clone(),
            previous_step: self.cue(),
        };
        let plan = planner.round1(&query)?;
        self.record(
            "round1",
            serde_json::json!({ "query": wire::round1_query(&query), "response": wire::round1_response(&plan) }),
        );
        self.current_plan = plan.clone();
        Ok(plan)
    }

    /// Ask for the next step on the current observation and check that the
    /// answer stays inside the current sub-task and matches the views.
    pub fn round2(&mut self, planner: &dyn Planner, views: &ViewSet, gripper: Gripper) -> Result<Round2Response, PlannerError> {
        if self.current_plan.is_empty() {
            return Err(PlannerError::EmptySubtask);
        }
        let query = Round2Query {
            task: self.task.clone(),
            views: views.clone(),
            gripper,
            subtask_plan: self.current_plan.clone(),
            previous_step: self.cue(),
        };
        let response = planner.round2(&query)?;
        let payload = serde_json::json!({
            "query": wire::round2_query(&query, ViewEncoding::Digest),
            "response": wire::round2_response(&response),
        });
        self.record("round2", payload);
        if !self.current_plan.contains(&response.step_instruction) {
            return Err(PlannerError::ProtocolViolation {
                instruction: response.step_instruction,
                plan: self.current_plan.clone(),
            });
        }
        validate_response(&response, &views.poses())?;
        Ok(response)
    }

    /// Store the executed step as the memory cue; move to the next sub-task
    /// after its last step.
    pub fn advance(&mut self, response: &Round2Response) {
        self.previous_step = response.step_instruction.clone();
        if self.current_plan.last() == Some(&response.step_instruction) {
            self.subtask += 1;
        }
        self.record(
            "advance",
            serde_json::json!({ "previous_step": self.previous_step, "next_subtask": self.subtask }),
        );
    }

    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.transcript {
            out.push_str(&serde_json::to_string(e).expect("transcript entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_transcript(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.transcript_jsonl().as_bytes())
    }
}
