use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;
use thiserror::Error;

use super::{ActorSpec, ProtocolError, Role, World};
use crate::cas::{Backend, Cid, StoreStats};
use crate::ledger::{Address, EventFilter, EventRecord, Gas};
use crate::pcac::Decision;
use crate::Hash;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Join { role: Role, address: Option<Address> },
    /// Register an image root directly, without uploading anything.
    Create { description: String, cid: Cid },
    /// Generate `size` random bytes and run the storage protocol with `radiologist`.
    Store { radiologist: String, size: usize, description: String },
    Request { patient: String, notes: String },
    Approve { requester: String },
    Deny { requester: String, notes: String },
    Trace { patient: String, requester: String },
    Remove { requester: String },
    /// Approve with a re-encrypted copy of the image.
    Share { requester: String },
    /// Requester downloads and decrypts what `patient` shared.
    Fetch { patient: String },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Join { .. } => "join",
            Action::Create { .. } => "create",
            Action::Store { .. } => "store",
            Action::Request { .. } => "request",
            Action::Approve { .. } => "approve",
            Action::Deny { .. } => "deny",
            Action::Trace { .. } => "trace",
            Action::Remove { .. } => "remove",
            Action::Share { .. } => "share",
            Action::Fetch { .. } => "fetch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub at: u64,
    pub actor: String,
    pub action: Action,
    /// Abort the run if this step fails.
    pub must_succeed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioScript {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("step {index}: timestamp {at} is earlier than the previous step")]
    TimeTravel { index: usize, at: u64 },
    #[error("step {index} ({action}) failed: {error}")]
    StepFailed {
        index: usize,
        action: &'static str,
        error: ProtocolError,
    },
}

impl ScenarioScript {
    /// Actors declared by `join` steps, in order.
    pub fn actors(&self) -> Vec<ActorSpec> {
        self.steps
            .iter()
            .filter_map(|s| match s.action {
                Action::Join { role, address } => Some(ActorSpec {
                    name: s.actor.clone(),
                    role,
                    address,
                }),
                _ => None,
            })
            .collect()
    }

    /// Parses the line format
    /// `<timestamp> <actor> <action>[!] [arguments...]`.
    /// Arguments are whitespace separated; double quotes group words and
    /// `#` starts a comment outside quotes.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScenarioError::Parse { line, message };
            let words = split_words(raw).map_err(err)?;
            if words.is_empty() {
                continue;
            }
            if words.len() < 3 {
                return Err(err("expected: <timestamp> <actor> <action> [args]".into()));
            }
            let at = words[0]
                .parse::<u64>()
                .map_err(|_| err(alloc::format!("bad timestamp {:?}", words[0])))?;
            let actor = words[1].clone();
            let (verb, must_succeed) = match words[2].strip_suffix('!') {
                Some(v) => (v, true),
                None => (words[2].as_str(), false),
            };
            let action = parse_action(verb, &words[3..]).map_err(err)?;
            steps.push(Step {
                at,
                actor,
                action,
                must_succeed,
            });
        }
        Ok(Self { steps })
    }
}

fn split_words(line: &str) -> Result<Vec<String>, String> {
    let mut words = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        match chars.peek() {
            None | Some('#') => return Ok(words),
            Some('"') => {
                chars.next();
                let mut word = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated quote".into()),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(c) => word.push(c),
                            None => return Err("dangling escape".into()),
                        },
                        Some(c) => word.push(c),
                    }
                }
                words.push(word);
            }
            Some(_) => {
                let mut word = String::new();
                while let Some(c) = chars.next_if(|c| !c.is_whitespace()) {
                    word.push(c);
                }
                words.push(word);
            }
        }
    }
}

fn parse_action(verb: &str, args: &[String]) -> Result<Action, String> {
    let arity = |min: usize, max: usize| {
        if args.len() < min || args.len() > max {
            Err(alloc::format!("{verb} takes {min}..={max} arguments, got {}", args.len()))
        } else {
            Ok(())
        }
    };
    let arg = |i: usize| args.get(i).cloned().unwrap_or_default();
    Ok(match verb {
        "join" => {
            arity(1, 2)?;
            let role = Role::parse(&args[0]).ok_or_else(|| alloc::format!("unknown role {:?}", args[0]))?;
            let address = match args.get(1) {
                Some(a) => Some(a.parse().map_err(|_| alloc::format!("bad address {a:?}"))?),
                None => None,
            };
            Action::Join { role, address }
        }
        "create" => {
            arity(2, 2)?;
            let cid = args[1].parse().map_err(|_| alloc::format!("bad cid {:?}", args[1]))?;
            Action::Create {
                description: arg(0),
                cid,
            }
        }
        "store" => {
            arity(3, 3)?;
            let size = args[1].parse().map_err(|_| alloc::format!("bad size {:?}", args[1]))?;
            Action::Store {
                radiologist: arg(0),
                size,
                description: arg(2),
            }
        }
        "request" => {
            arity(1, 2)?;
            Action::Request {
                patient: arg(0),
                notes: arg(1),
            }
        }
        "approve" => {
            arity(1, 1)?;
            Action::Approve { requester: arg(0) }
        }
        "deny" => {
            arity(1, 2)?;
            Action::Deny {
                requester: arg(0),
                notes: arg(1),
            }
        }
        "trace" => {
            arity(2, 2)?;
            Action::Trace {
                patient: arg(0),
                requester: arg(1),
            }
        }
        "remove" => {
            arity(1, 1)?;
            Action::Remove { requester: arg(0) }
        }
        "share" => {
            arity(1, 1)?;
            Action::Share { requester: arg(0) }
        }
        "fetch" => {
            arity(1, 1)?;
            Action::Fetch { patient: arg(0) }
        }
        other => return Err(alloc::format!("unknown action {other:?}")),
    })
}

/// What one step did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub index: usize,
    pub at: u64,
    pub actor: String,
    pub action: &'static str,
    /// Height of the block the step's transaction lands in.
    pub height: u64,
    pub gas_used: Gas,
    pub tx_hash: Option<Hash>,
    /// Contract return value, where there is one.
    pub returned: Option<bool>,
    pub error: Option<ProtocolError>,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub steps: Vec<StepResult>,
    pub final_hash: Hash,
    pub height: u64,
    pub events: Vec<EventRecord>,
    pub store: StoreStats,
}

impl<B: Backend> World<B> {
    /// Executes one step against the world at its current time.
    pub fn execute_step(&mut self, actor: &str, action: &Action) -> Result<(Option<crate::ledger::Receipt>, Option<bool>), ProtocolError> {
        let receipt = match action {
            Action::Join { .. } => {
                self.actor(actor)?;
                return Ok((None, None));
            }
            Action::Create { description, cid } => self.register_image(actor, *cid, description)?,
            Action::Store {
                radiologist,
                size,
                description,
            } => {
                let mut image = alloc::vec![0u8; *size];
                self.rng().fill_bytes(&mut image);
                let root = self.upload_image(actor, radiologist, &image)?;
                self.register_image(actor, root, description)?
            }
            Action::Request { patient, notes } => self.request_access(actor, patient, None, notes)?,
            Action::Approve { requester } => self.decide(actor, requester, None, Decision::Grant, "")?,
            Action::Deny { requester, notes } => self.decide(actor, requester, None, Decision::Deny, notes)?,
            Action::Trace { patient, requester } => self.trace(actor, patient, requester, None)?,
            Action::Remove { requester } => self.revoke(actor, requester, None)?,
            Action::Share { requester } => {
                self.approve_and_share(actor, requester, None)?;
                let (_, receipt) = self.chain.pending().last().expect("approve just applied");
                receipt.clone()
            }
            Action::Fetch { patient } => {
                self.fetch_shared(actor, patient, None)?;
                return Ok((None, Some(true)));
            }
        };
        let returned = receipt.returned;
        Ok((Some(receipt), returned))
    }

    /// Replays `script` in time order. Steps sharing a timestamp share a
    /// block; a final block seals whatever is left pending.
    pub fn run_scenario(&mut self, script: &ScenarioScript) -> Result<ScenarioReport, ScenarioError> {
        let mut results = Vec::with_capacity(script.steps.len());
        for (index, step) in script.steps.iter().enumerate() {
            if step.at < self.now() {
                return Err(ScenarioError::TimeTravel { index, at: step.at });
            }
            let fail = |error| ScenarioError::StepFailed {
                index,
                action: step.action.name(),
                error,
            };
            self.advance_to(step.at).map_err(fail)?;
            let outcome = self.execute_step(&step.actor, &step.action);
            let mut result = StepResult {
                index,
                at: step.at,
                actor: step.actor.clone(),
                action: step.action.name(),
                height: self.chain.height() + 1,
                gas_used: 0,
                tx_hash: None,
                returned: None,
                error: None,
            };
            match outcome {
                Ok((receipt, returned)) => {
                    if let Some(r) = receipt {
                        result.gas_used = r.gas_used;
                        result.tx_hash = Some(r.tx_hash);
                    }
                    result.returned = returned;
                }
                Err(e) if step.must_succeed => return Err(fail(e)),
                Err(e) => result.error = Some(e),
            }
            results.push(result);
        }
        self.flush();
        Ok(ScenarioReport {
            steps: results,
            final_hash: self.chain.tip().block_hash,
            height: self.chain.height(),
            events: self.chain.query_events(&EventFilter::default()),
            store: self.store.stats(),
        })
    }
}
