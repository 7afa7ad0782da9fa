//! JSON formats for instances and schedules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Job, JobId, ModelError, RationalRepr, Schedule};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("jobs[{index}] ({id}): {message}")]
    Field { index: usize, id: String, message: String },
    #[error("bag partition: {0}")]
    Partition(ModelError),
    #[error("domain: {0}")]
    Domain(ModelError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobFile {
    id: String,
    size: RationalRepr,
    bag: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    machines: usize,
    jobs: Vec<JobFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    assignment: BTreeMap<String, usize>,
}

fn syntax(e: serde_json::Error) -> IoError {
    IoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(syntax)?;
    let mut jobs = Vec::with_capacity(file.jobs.len());
    for (index, j) in file.jobs.into_iter().enumerate() {
        let size = j.size.to_rational().map_err(|e| IoError::Field {
            index,
            id: j.id.clone(),
            message: e.to_string(),
        })?;
        jobs.push(Job::new(j.id, size, j.bag));
    }
    Instance::new(file.machines, jobs).map_err(|e| match e {
        ModelError::Partition(_) | ModelError::DuplicateJob(_) => IoError::Partition(e),
        other => IoError::Domain(other),
    })
}

pub fn write_instance(instance: &Instance) -> String {
    let file = InstanceFile {
        machines: instance.machines(),
        jobs: instance
            .jobs()
            .iter()
            .map(|j| JobFile {
                id: j.id.0.clone(),
                size: RationalRepr::from_rational(&j.size).expect("size fits in i64"),
                bag: j.bag.0.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
    s.push('\n');
    s
}

pub fn parse_schedule(text: &str) -> Result<Schedule, IoError> {
    let file: ScheduleFile = serde_json::from_str(text).map_err(syntax)?;
    Ok(Schedule {
        assignment: file.assignment.into_iter().map(|(k, v)| (JobId(k), v)).collect(),
    })
}

pub fn write_schedule(schedule: &Schedule) -> String {
    let file = ScheduleFile {
        assignment: schedule.assignment.iter().map(|(k, &v)| (k.0.clone(), v)).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("schedule serializes");
    s.push('\n');
    s
}
