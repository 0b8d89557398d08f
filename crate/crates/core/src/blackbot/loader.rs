//! The seven-step in-memory implant procedure, driven over the simulated
//! network: login, BusyBox check, writable-dir lookup, echo-helper copy,
//! payload transfer (fetched from the host's HTTP service first), in-memory
//! exec, file delete.
//!
//! The same machinery loads both payload kinds; only the process family and
//! payload size differ. The manager is callback-free: every transition
//! returns actions for the world loop to carry out.

use std::collections::BTreeMap;
use thiserror::Error;

use crate::device::{CmdOutput, ExecError, LoginError, ProcessFamily, SessionId, ShellCommand};
use crate::simkernel::SendError;

use super::codec::ScanReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("login failed")]
    LoginFailed,
    #[error("target has no busybox")]
    NoBusybox,
    #[error("no writable directory on target")]
    NoWritableDir,
    #[error("connection refused")]
    Refused,
    #[error("target unreachable")]
    Unreachable,
    #[error("session severed mid-sequence")]
    Severed,
    #[error("unexpected shell failure: {0}")]
    Shell(ExecError),
}

impl From<SendError> for LoadError {
    fn from(e: SendError) -> Self {
        match e {
            SendError::Refused => LoadError::Refused,
            SendError::Unreachable => LoadError::Unreachable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Login,
    CheckBusybox,
    FindDir,
    WriteHelper,
    FetchPayload,
    WritePayload,
    /// The helper is removed once the payload bytes are on disk, so a
    /// failed or aborted implant leaves nothing behind.
    DeleteHelper,
    Exec,
    Delete,
}

/// What the world loop must do next on behalf of a job.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadAction {
    /// Open a telnet connection to the victim with the report's credentials.
    Connect { job: u64 },
    /// Issue a shell command on the established session.
    Command {
        job: u64,
        session: SessionId,
        cmd: ShellCommand,
    },
    /// Pull the payload from the host's HTTP service (size-proportional
    /// local delay), then call [`LoadManager::on_payload_fetched`].
    FetchPayload { job: u64, bytes: u64 },
    /// Politely drop the session.
    CloseSession { job: u64, session: SessionId },
    /// All seven steps done: a `family` process is live in memory and the
    /// payload file is gone.
    Complete { job: u64 },
    /// The sequence failed; targets untouched by steps 1-3 failures.
    Fail { job: u64, error: LoadError },
}

#[derive(Debug, Clone)]
pub struct LoadJob {
    pub id: u64,
    pub report: ScanReport,
    pub family: ProcessFamily,
    pub payload_bytes: u64,
    pub helper_bytes: u64,
    pub payload_name: String,
    /// World-unique tag; concurrent loads must not share file names.
    pub tag: u64,
    step: Step,
    pub session: Option<SessionId>,
    pub conn: Option<u64>,
    dir: Option<String>,
}

impl LoadJob {
    fn payload_path(&self) -> String {
        format!(
            "{}/{}.{}",
            self.dir.as_deref().unwrap_or(""),
            self.payload_name,
            self.tag
        )
    }

    fn helper_path(&self) -> String {
        format!("{}/.e{}", self.dir.as_deref().unwrap_or(""), self.tag)
    }
}

/// Tracks every in-flight load job for one host (implanter server or wild
/// loader).
#[derive(Debug, Default)]
pub struct LoadManager {
    jobs: BTreeMap<u64, LoadJob>,
    by_conn: BTreeMap<u64, u64>,
    next_job: u64,
}

impl LoadManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn job(&self, id: u64) -> Option<&LoadJob> {
        self.jobs.get(&id)
    }

    pub fn active(&self) -> usize {
        self.jobs.len()
    }

    /// True when some job is already working the given victim.
    pub fn targeting(&self, victim: crate::simkernel::Ipv4) -> bool {
        self.jobs.values().any(|j| j.report.victim.ip == victim)
    }

    pub fn start(
        &mut self,
        report: ScanReport,
        family: ProcessFamily,
        payload_bytes: u64,
        helper_bytes: u64,
        payload_name: &str,
        tag: u64,
    ) -> (u64, LoadAction) {
        let id = self.next_job;
        self.next_job += 1;
        self.jobs.insert(
            id,
            LoadJob {
                id,
                report,
                family,
                payload_bytes,
                helper_bytes,
                payload_name: payload_name.to_string(),
                tag,
                step: Step::Login,
                session: None,
                conn: None,
                dir: None,
            },
        );
        (id, LoadAction::Connect { job: id })
    }

    /// Records the connection id the world assigned to a `Connect` action.
    pub fn register_conn(&mut self, job: u64, conn: u64) {
        if let Some(j) = self.jobs.get_mut(&job) {
            j.conn = Some(conn);
        }
        self.by_conn.insert(conn, job);
    }

    pub fn job_for_conn(&self, conn: u64) -> Option<u64> {
        self.by_conn.get(&conn).copied()
    }

    pub fn on_login_result(
        &mut self,
        job: u64,
        result: Result<SessionId, LoginError>,
    ) -> Vec<LoadAction> {
        match result {
            Ok(session) => {
                let Some(j) = self.jobs.get_mut(&job) else {
                    return vec![];
                };
                j.session = Some(session);
                j.step = Step::CheckBusybox;
                vec![LoadAction::Command {
                    job,
                    session,
                    cmd: ShellCommand::CheckBusybox,
                }]
            }
            Err(LoginError::AuthFailed) => self.fail(job, LoadError::LoginFailed),
        }
    }

    pub fn on_cmd_result(
        &mut self,
        job: u64,
        result: Result<CmdOutput, ExecError>,
    ) -> Vec<LoadAction> {
        let Some(j) = self.jobs.get_mut(&job) else {
            return vec![];
        };
        let session = j.session.expect("command result implies session");
        let output = match result {
            Ok(o) => o,
            Err(e) => {
                let mapped = match (j.step, e) {
                    (Step::FindDir, ExecError::NoWritableDir) => LoadError::NoWritableDir,
                    (_, other) => LoadError::Shell(other),
                };
                let mut actions = vec![LoadAction::CloseSession { job, session }];
                actions.extend(self.fail(job, mapped));
                return actions;
            }
        };
        match (j.step, output) {
            (Step::CheckBusybox, CmdOutput::Busybox(true)) => {
                j.step = Step::FindDir;
                vec![LoadAction::Command {
                    job,
                    session,
                    cmd: ShellCommand::FindWritableDir,
                }]
            }
            (Step::CheckBusybox, CmdOutput::Busybox(false)) => {
                let mut actions = vec![LoadAction::CloseSession { job, session }];
                actions.extend(self.fail(job, LoadError::NoBusybox));
                actions
            }
            (Step::FindDir, CmdOutput::WritableDir(dir)) => {
                j.dir = Some(dir);
                j.step = Step::WriteHelper;
                let cmd = ShellCommand::WriteFile {
                    path: j.helper_path(),
                    bytes: j.helper_bytes,
                };
                vec![LoadAction::Command { job, session, cmd }]
            }
            (Step::WriteHelper, CmdOutput::Written) => {
                j.step = Step::FetchPayload;
                vec![LoadAction::FetchPayload {
                    job,
                    bytes: j.payload_bytes,
                }]
            }
            (Step::WritePayload, CmdOutput::Written) => {
                j.step = Step::DeleteHelper;
                let cmd = ShellCommand::DeleteFile {
                    path: j.helper_path(),
                };
                vec![LoadAction::Command { job, session, cmd }]
            }
            (Step::DeleteHelper, CmdOutput::Deleted) => {
                j.step = Step::Exec;
                let cmd = ShellCommand::ExecBinary {
                    path: j.payload_path(),
                    family: j.family,
                };
                vec![LoadAction::Command { job, session, cmd }]
            }
            (Step::Exec, CmdOutput::Spawned(_)) => {
                j.step = Step::Delete;
                let cmd = ShellCommand::DeleteFile {
                    path: j.payload_path(),
                };
                vec![LoadAction::Command { job, session, cmd }]
            }
            (Step::Delete, CmdOutput::Deleted) => {
                vec![
                    LoadAction::CloseSession { job, session },
                    LoadAction::Complete { job },
                ]
            }
            (step, output) => {
                unreachable!("load step {step:?} got unexpected output {output:?}")
            }
        }
    }

    pub fn on_connect_failed(&mut self, job: u64, error: SendError) -> Vec<LoadAction> {
        self.fail(job, error.into())
    }

    pub fn on_severed(&mut self, job: u64) -> Vec<LoadAction> {
        self.fail(job, LoadError::Severed)
    }

    pub fn on_payload_fetched(&mut self, job: u64) -> Vec<LoadAction> {
        let Some(j) = self.jobs.get_mut(&job) else {
            return vec![];
        };
        debug_assert_eq!(j.step, Step::FetchPayload);
        j.step = Step::WritePayload;
        let session = j.session.expect("fetch implies session");
        let cmd = ShellCommand::WriteFile {
            path: j.payload_path(),
            bytes: j.payload_bytes,
        };
        vec![LoadAction::Command { job, session, cmd }]
    }

    /// Drops a finished job, returning it for bookkeeping.
    pub fn finish(&mut self, job: u64) -> Option<LoadJob> {
        let j = self.jobs.remove(&job)?;
        if let Some(conn) = j.conn {
            self.by_conn.remove(&conn);
        }
        Some(j)
    }

    fn fail(&mut self, job: u64, error: LoadError) -> Vec<LoadAction> {
        if self.jobs.contains_key(&job) {
            vec![LoadAction::Fail { job, error }]
        } else {
            vec![]
        }
    }
}
