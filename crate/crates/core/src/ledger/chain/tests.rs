use alloc::string::ToString;
use alloc::vec;

use super::*;
use crate::ledger::{PcimData, TxBody, Wallet, ETHER, GWEI, PCAC_CONTRACT};
use crate::pcac::{ContractCall, Decision};

fn wallet(n: u8) -> Wallet {
    Wallet::from_seed([n; 32])
}

fn setup() -> (Chain, Wallet, Wallet) {
    let (p, r) = (wallet(1), wallet(2));
    let config = ChainConfig {
        allocations: vec![
            Allocation { address: p.address(), balance: 10 * ETHER, public_key: None },
            Allocation { address: r.address(), balance: 10 * ETHER, public_key: None },
        ],
        ..ChainConfig::default()
    };
    (Chain::new(config).unwrap(), p, r)
}

fn image() -> Cid {
    Cid::of_bytes(b"encrypted image")
}

fn call_tx(chain: &Chain, from: &Wallet, patient: Address, call: ContractCall, gas_limit: Gas) -> Transaction {
    from.sign(TxBody {
        nonce: chain.nonce(&from.address()),
        gas_price: 2 * GWEI,
        gas_limit,
        value: 0,
        recipient: PCAC_CONTRACT,
        pcim: Some(PcimData {
            image_cid: image(),
            patient_address: patient,
            timestamp: chain.now(),
            encryption_pubkey: vec![7; 34],
            description: "Liver image".to_string(),
            call,
        }),
    })
}

#[test]
fn create_contract_costs_table_value() {
    let (mut chain, p, _) = setup();
    let tx = call_tx(&chain, &p, p.address(), ContractCall::CreateContract, 300_000);
    let r = chain.apply_transaction(tx).unwrap();
    assert!(r.is_success());
    assert_eq!(r.gas_used, 67394);
    assert_eq!(r.cost_wei, 134_788 * GWEI);
    assert_eq!(chain.nonce(&p.address()), 1);
}

#[test]
fn out_of_gas_charges_limit_and_keeps_state() {
    let (mut chain, p, _) = setup();
    let before = chain.balance(&p.address());
    let tx = call_tx(&chain, &p, p.address(), ContractCall::CreateContract, 30_000);
    let r = chain.apply_transaction(tx).unwrap();
    assert_eq!(r.status, TxStatus::OutOfGas);
    assert_eq!(r.gas_used, 30_000);
    assert_eq!(chain.balance(&p.address()), before - 30_000 * 2 * GWEI);
    assert!(chain.registry().contract(&image()).is_none());
    assert_eq!(chain.nonce(&p.address()), 1);
}

#[test]
fn replayed_nonce_rejected() {
    let (mut chain, p, _) = setup();
    let tx = call_tx(&chain, &p, p.address(), ContractCall::CreateContract, 300_000);
    chain.apply_transaction(tx.clone()).unwrap();
    assert_eq!(
        chain.apply_transaction(tx),
        Err(LedgerError::BadNonce { expected: 1, got: 0 })
    );
}

#[test]
fn insufficient_funds_is_atomic() {
    let (mut chain, p, _) = setup();
    let mut body = call_tx(&chain, &p, p.address(), ContractCall::CreateContract, 300_000).body;
    body.value = 10 * ETHER;
    let err = chain.apply_transaction(p.sign(body)).unwrap_err();
    assert!(matches!(err, LedgerError::InsufficientFunds { .. }));
    assert_eq!(chain.nonce(&p.address()), 0);
    assert_eq!(chain.balance(&p.address()), 10 * ETHER);
}

#[test]
fn forged_sender_rejected() {
    let (mut chain, p, r) = setup();
    let mut tx = call_tx(&chain, &r, p.address(), ContractCall::CreateContract, 300_000);
    tx.sender = p.address();
    assert_eq!(chain.apply_transaction(tx), Err(LedgerError::InvalidSignature));
}

#[test]
fn bound_genesis_key_accepts_fixed_address() {
    let keys = wallet(9);
    let fixed: Address = "0x5575805E19b4807974Be0B77Fd9d385D4A0e6d1E".parse().unwrap();
    let w = Wallet::with_address(keys.keys().clone(), fixed).unwrap();
    let config = ChainConfig {
        allocations: vec![Allocation { address: fixed, balance: ETHER, public_key: Some(w.public_key()) }],
        ..ChainConfig::default()
    };
    let mut chain = Chain::new(config).unwrap();
    let tx = call_tx(&chain, &w, fixed, ContractCall::CreateContract, 300_000);
    assert!(chain.apply_transaction(tx).unwrap().is_success());
}

#[test]
fn revert_charges_gas_and_rolls_back() {
    let (mut chain, p, r) = setup();
    let tx = call_tx(&chain, &r, p.address(), ContractCall::CreateContract, 300_000);
    let rec = chain.apply_transaction(tx).unwrap();
    assert_eq!(rec.status, TxStatus::Reverted(PcacError::Unauthorized));
    assert_eq!(rec.cost_wei, 67394 * 2 * GWEI);
    assert!(rec.events.is_empty());
    assert!(chain.registry().contract(&image()).is_none());
}

#[test]
fn conservation_and_cost_identity() {
    let (mut chain, p, r) = setup();
    let supply = chain.total_supply();
    let calls = [
        (&p, ContractCall::CreateContract),
        (&r, ContractCall::RequestingAccess { requester: r.address(), notes: "x".into() }),
        (&p, ContractCall::ApproveIrs { requester: r.address(), decision: Decision::Grant, notes: "".into(), shared_cid: None }),
        (&r, ContractCall::TraceAuthorization { requester: r.address() }),
        (&p, ContractCall::RemoveIrs { requester: r.address() }),
        (&p, ContractCall::RemoveIrs { requester: r.address() }),
    ];
    for (w, call) in calls {
        let tx = call_tx(&chain, w, p.address(), call, 300_000);
        let price = tx.body.gas_price;
        let rec = chain.apply_transaction(tx).unwrap();
        assert_eq!(rec.cost_wei, rec.gas_used as Wei * price);
        assert_eq!(chain.total_supply(), supply);
    }
}

fn sample_chain() -> Chain {
    let (mut chain, p, r) = setup();
    let tx = call_tx(&chain, &p, p.address(), ContractCall::CreateContract, 300_000);
    chain.apply_transaction(tx).unwrap();
    chain.seal_block();
    chain.advance_to(10).unwrap();
    let tx = call_tx(&chain, &r, p.address(), ContractCall::RequestingAccess { requester: r.address(), notes: "ct".into() }, 300_000);
    chain.apply_transaction(tx).unwrap();
    let tx = call_tx(&chain, &r, p.address(), ContractCall::TraceAuthorization { requester: r.address() }, 300_000);
    chain.apply_transaction(tx).unwrap();
    chain.seal_block();
    chain
}

#[test]
fn blocks_link_and_validate() {
    let chain = sample_chain();
    let b = chain.blocks();
    assert_eq!(b.len(), 3);
    assert_eq!(b[0].parent_hash, [0; 32]);
    assert_eq!(b[2].parent_hash, b[1].block_hash);
    assert_eq!(b[2].timestamp, 10);
    assert_eq!(b[2].gas_used, 246908 + 34266);
    assert!(validate_chain(&chain));
}

#[test]
fn reordered_transactions_fail_validation() {
    let chain = sample_chain();
    let mut blocks = chain.blocks().to_vec();
    blocks[2].transactions.swap(0, 1);
    let err = Chain::from_blocks(chain.config().clone(), &blocks).unwrap_err();
    assert_eq!(err.kind, ViolationKind::TxRoot);
}

#[test]
fn every_byte_flip_is_detected() {
    let chain = sample_chain();
    let blocks = chain.blocks().to_vec();
    let bytes = blocks[2].encode();
    for i in (0..bytes.len()).step_by(7) {
        let mut bad = bytes.clone();
        bad[i] ^= 0x40;
        let ok = Block::decode(&bad).is_ok_and(|b| {
            let mut all = blocks.clone();
            all[2] = b;
            Chain::from_blocks(chain.config().clone(), &all).is_ok()
        });
        assert!(!ok, "flip at {i} went unnoticed");
    }
}

#[test]
fn replay_is_deterministic() {
    let a = sample_chain();
    let b = sample_chain();
    assert_eq!(a.tip().block_hash, b.tip().block_hash);
    let rebuilt = Chain::from_blocks(a.config().clone(), a.blocks()).unwrap();
    assert_eq!(rebuilt.tip(), a.tip());
}

#[test]
fn clock_rules() {
    let (mut chain, p, _) = setup();
    chain.advance_to(5).unwrap();
    assert_eq!(chain.advance_to(4), Err(LedgerError::ClockRegression { now: 5, requested: 4 }));
    let tx = call_tx(&chain, &p, p.address(), ContractCall::CreateContract, 300_000);
    chain.apply_transaction(tx).unwrap();
    assert_eq!(chain.advance_to(6), Err(LedgerError::PendingTransactions));
    assert!(chain.advance_to(5).is_ok());
}

#[test]
fn event_queries() {
    let chain = sample_chain();
    let all = chain.query_events(&EventFilter::default());
    let names: Vec<_> = all.iter().map(|r| r.event.name).collect();
    assert_eq!(
        names,
        [EventName::ContractCreated, EventName::AccessRequested, EventName::AuthorizationFailed]
    );
    assert_eq!(all[2].height, 2);
    let stranger = EventFilter { address: Some(Address::new([3; 20])), ..Default::default() };
    assert!(chain.query_events(&stranger).is_empty());
    let by_name = EventFilter { name: Some(EventName::AccessRequested), ..Default::default() };
    assert_eq!(chain.query_events(&by_name).len(), 1);
}

#[test]
fn empty_block_root() {
    let (mut chain, _, _) = setup();
    let b = chain.seal_block().clone();
    assert_eq!(b.tx_root, crate::sha256(b""));
    assert_eq!(b.gas_used, 0);
}

#[test]
fn transfer_moves_value() {
    let (mut chain, p, r) = setup();
    let tx = p.sign(TxBody {
        nonce: 0,
        gas_price: GWEI,
        gas_limit: 21_000,
        value: ETHER,
        recipient: r.address(),
        pcim: None,
    });
    let rec = chain.apply_transaction(tx).unwrap();
    assert!(rec.is_success());
    assert_eq!(chain.balance(&r.address()), 11 * ETHER);
    assert_eq!(chain.balance(&p.address()), 9 * ETHER - 21_000 * GWEI);
}
