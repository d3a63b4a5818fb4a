//! Brute-force reference model of the access-control contract, written as
//! a flat transition table over plain integers, independent of the
//! registry's data structures.

use std::collections::HashMap;

use pcim_core::cas::Cid;
use pcim_core::ledger::Address;
use pcim_core::pcac::{CallContext, CallOutcome, Decision, EventName, PcacError, RateLimitPolicy, Registry};
use rand::Rng;

pub const ACTORS: usize = 3;
pub const IMAGES: usize = 2;
pub const POLICY: RateLimitPolicy = RateLimitPolicy { max_approvals: 1, window: 4_000 };
pub const STEP_SECONDS: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Create,
    Request,
    Approve,
    Deny,
    Trace,
    Remove,
}

#[derive(Debug, Clone, Copy)]
pub struct Call {
    pub op: Op,
    pub sender: usize,
    pub image: usize,
    pub patient: usize,
    pub requester: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum St {
    Pending,
    Approved,
    Denied,
    Removed,
}

#[derive(Default)]
struct Oracle {
    owner: HashMap<usize, usize>,
    status: HashMap<(usize, usize), St>,
    grants: HashMap<usize, Vec<u64>>,
}

type Outcome = Result<(bool, Vec<EventName>), PcacError>;

impl Oracle {
    fn step(&mut self, c: Call, now: u64) -> Outcome {
        use EventName::*;
        use PcacError::*;
        let st = self.status.get(&(c.image, c.requester)).copied();
        let authorized = st == Some(St::Approved);
        match c.op {
            Op::Create => {
                if c.sender != c.patient {
                    return Err(Unauthorized);
                }
                if self.owner.contains_key(&c.image) {
                    return Err(DuplicateImage(image(c.image)));
                }
                self.owner.insert(c.image, c.patient);
                Ok((true, vec![ContractCreated]))
            }
            Op::Request => {
                if c.sender != c.requester {
                    return Err(Unauthorized);
                }
                if self.owner.get(&c.image) != Some(&c.patient) {
                    return Err(NoSuchContract);
                }
                if c.requester == c.patient {
                    return Err(SelfRequest);
                }
                match st {
                    Some(St::Pending) => Err(DuplicatePending),
                    Some(St::Approved) => Err(AlreadyAuthorized),
                    Some(St::Removed) => Err(Revoked),
                    _ => {
                        self.status.insert((c.image, c.requester), St::Pending);
                        Ok((true, vec![AccessRequested]))
                    }
                }
            }
            Op::Approve | Op::Deny => {
                let Some(&owner) = self.owner.get(&c.image) else {
                    return Err(NoSuchContract);
                };
                if owner != c.sender {
                    return Err(NotOwner);
                }
                if authorized {
                    return Ok((false, vec![]));
                }
                if st != Some(St::Pending) {
                    return Err(NoPendingRequest);
                }
                if c.op == Op::Deny {
                    self.status.insert((c.image, c.requester), St::Denied);
                    return Ok((false, vec![Requestdenied, Reason]));
                }
                let times = self.grants.entry(owner).or_default();
                let recent = times.iter().filter(|&&t| now - t < POLICY.window).count();
                if recent >= POLICY.max_approvals as usize {
                    return Err(RateLimited);
                }
                times.push(now);
                self.status.insert((c.image, c.requester), St::Approved);
                Ok((true, vec![Requestaccepted, Approved]))
            }
            Op::Trace => {
                if self.owner.get(&c.image) != Some(&c.patient) {
                    return Err(NoSuchContract);
                }
                if c.sender != c.patient && c.sender != c.requester {
                    return Err(Unauthorized);
                }
                if authorized {
                    Ok((true, vec![AuthorizationSuccess]))
                } else {
                    Ok((false, vec![AuthorizationFailed]))
                }
            }
            Op::Remove => {
                let Some(&owner) = self.owner.get(&c.image) else {
                    return Err(NoSuchContract);
                };
                if owner != c.sender {
                    return Err(NotOwner);
                }
                if !authorized {
                    return Ok((false, vec![]));
                }
                self.status.insert((c.image, c.requester), St::Removed);
                Ok((true, vec![Removed]))
            }
        }
    }
}

pub fn address(i: usize) -> Address {
    Address::new([i as u8 + 1; 20])
}

pub fn image(i: usize) -> Cid {
    Cid::of_bytes(&[i as u8])
}

fn run_real(registry: &mut Registry, c: Call, now: u64) -> Outcome {
    let ctx = CallContext { sender: address(c.sender), now };
    let (img, patient, requester) = (image(c.image), address(c.patient), address(c.requester));
    let out: Result<CallOutcome, PcacError> = match c.op {
        Op::Create => registry.create_contract(ctx, img, patient, "img", b"key"),
        Op::Request => registry.requesting_access(ctx, &img, patient, requester, b"key", "n"),
        Op::Approve => registry.approve_irs(ctx, &img, requester, Decision::Grant, "", None),
        Op::Deny => registry.approve_irs(ctx, &img, requester, Decision::Deny, "no", None),
        Op::Trace => registry.trace_authorization(ctx, &img, patient, requester),
        Op::Remove => registry.remove_irs(ctx, &img, requester),
    };
    out.map(|o| (o.returned, o.events.iter().map(|e| e.name).collect()))
}

/// Runs `calls` through the registry and the oracle, comparing every
/// result and the full authorization map after each step.
pub fn check_sequence(calls: &[Call]) -> Result<(), String> {
    let mut registry = Registry::new(Some(POLICY));
    let mut oracle = Oracle::default();
    for (i, &c) in calls.iter().enumerate() {
        let now = (i as u64 + 1) * STEP_SECONDS;
        let expected = oracle.step(c, now);
        let actual = run_real(&mut registry, c, now);
        if expected != actual {
            return Err(format!("step {i} {c:?}: oracle {expected:?}, registry {actual:?}"));
        }
        for img in 0..IMAGES {
            for who in 0..ACTORS {
                let want = oracle.status.get(&(img, who)) == Some(&St::Approved);
                let got = registry.contract(&image(img)).is_some_and(|k| k.is_authorized(&address(who)));
                if want != got {
                    return Err(format!("step {i}: authorization of {who} on image {img} is {got}, oracle says {want}"));
                }
            }
        }
    }
    Ok(())
}

pub fn random_call<R: Rng>(rng: &mut R) -> Call {
    const OPS: [Op; 6] = [Op::Create, Op::Request, Op::Approve, Op::Deny, Op::Trace, Op::Remove];
    Call {
        op: OPS[rng.gen_range(0..OPS.len())],
        sender: rng.gen_range(0..ACTORS),
        image: rng.gen_range(0..IMAGES),
        patient: rng.gen_range(0..ACTORS),
        requester: rng.gen_range(0..ACTORS),
    }
}

/// Random sequence of up to 20 calls. The generator remembers which
/// images it has tried to create so most calls name a real contract and
/// the expected sender; the rest stay uniformly random.
pub fn random_sequence<R: Rng>(rng: &mut R) -> Vec<Call> {
    const WEIGHTED: [Op; 12] = [
        Op::Create,
        Op::Request,
        Op::Request,
        Op::Request,
        Op::Approve,
        Op::Approve,
        Op::Approve,
        Op::Deny,
        Op::Trace,
        Op::Trace,
        Op::Remove,
        Op::Remove,
    ];
    let mut owners: [Option<usize>; IMAGES] = [None; IMAGES];
    let len = rng.gen_range(1..=20);
    (0..len)
        .map(|_| {
            let mut c = random_call(rng);
            if rng.gen_bool(0.1) {
                return c;
            }
            match owners[c.image] {
                None => {
                    c.op = Op::Create;
                    c.sender = c.patient;
                    owners[c.image] = Some(c.patient);
                }
                Some(owner) => {
                    c.op = WEIGHTED[rng.gen_range(0..WEIGHTED.len())];
                    c.patient = owner;
                    if c.requester == owner {
                        c.requester = (owner + rng.gen_range(1..ACTORS)) % ACTORS;
                    }
                    c.sender = match c.op {
                        Op::Request => c.requester,
                        Op::Trace if rng.gen_bool(0.5) => c.requester,
                        _ => owner,
                    };
                }
            }
            c
        })
        .collect()
}
