//! The RPC fetcher against a local fixture server: its output must equal the
//! file readers' output for the same underlying data, and its retry schedule
//! must survive transient failures and give up after five attempts.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chainsight::fixture::{generate_fixture, FixtureSpec};
use chainsight::jsonl;
use chainsight::rpc::{RpcClient, RpcError};
use chainsight_core::types::{Block, Transaction};

/// Serve `eth_getBlockByNumber` from in-memory blocks, failing the first
/// `fail_first` requests with HTTP 500.
struct FixtureServer {
    server: Arc<tiny_http::Server>,
    port: u16,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl FixtureServer {
    fn start(blocks: Vec<(Block, Vec<Transaction>)>, fail_first: u32) -> FixtureServer {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let srv = server.clone();
        let failures = AtomicU32::new(fail_first);
        let handle = std::thread::spawn(move || {
            for mut request in srv.incoming_requests() {
                if failures
                    .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |f| f.checked_sub(1))
                    .is_ok()
                {
                    let resp = tiny_http::Response::from_string("backend unavailable")
                        .with_status_code(500);
                    let _ = request.respond(resp);
                    continue;
                }
                let mut body = String::new();
                request.as_reader().read_to_string(&mut body).unwrap();
                let req: serde_json::Value = serde_json::from_str(&body).unwrap();
                let number = u64::from_str_radix(
                    req["params"][0].as_str().unwrap().trim_start_matches("0x"),
                    16,
                )
                .unwrap();
                let result = blocks
                    .iter()
                    .find(|(b, _)| b.number == number)
                    .map(|(b, txs)| block_to_rpc(b, txs))
                    .unwrap_or(serde_json::Value::Null);
                let reply = serde_json::json!({
                    "jsonrpc": "2.0",
                    "id": req["id"],
                    "result": result,
                });
                let resp = tiny_http::Response::from_string(reply.to_string()).with_header(
                    tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap(),
                );
                let _ = request.respond(resp);
            }
        });
        FixtureServer {
            server,
            port,
            handle: Some(handle),
        }
    }

    fn endpoint(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn block_to_rpc(b: &Block, txs: &[Transaction]) -> serde_json::Value {
    serde_json::json!({
        "number": format!("0x{:x}", b.number),
        "timestamp": format!("0x{:x}", b.timestamp),
        "miner": b.miner.to_string(),
        "size": format!("0x{:x}", b.size_bytes),
        "difficulty": format!("0x{:x}", b.difficulty.wei()),
        "gasLimit": format!("0x{:x}", b.gas_limit),
        "gasUsed": format!("0x{:x}", b.gas_used),
        "transactions": txs.iter().map(|t| serde_json::json!({
            "from": t.from.to_string(),
            "to": t.to.map(|a| a.to_string()),
            "value": format!("0x{:x}", t.value.wei()),
            "gas": format!("0x{:x}", t.gas_used),
            "gasPrice": format!("0x{:x}", t.gas_price.wei()),
            "input": t.input_selector.map(|s| {
                format!("0x{}", s.iter().map(|b| format!("{b:02x}")).collect::<String>())
            }).unwrap_or_else(|| "0x".to_string()),
        })).collect::<Vec<_>>(),
    })
}

fn load_fixture(seed: u64, n_blocks: u64) -> Vec<(Block, Vec<Transaction>)> {
    let dir = tempfile::tempdir().unwrap();
    let summary = generate_fixture(&FixtureSpec::new(seed, n_blocks, 12), dir.path()).unwrap();
    let blocks: Vec<Block> = jsonl::read_blocks(&summary.blocks)
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    let txs: Vec<Transaction> = jsonl::read_transactions(&summary.transactions)
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    blocks
        .into_iter()
        .map(|b| {
            let mine: Vec<Transaction> = txs
                .iter()
                .filter(|t| t.block_number == b.number)
                .cloned()
                .collect();
            (b, mine)
        })
        .collect()
}

#[test]
fn rpc_equals_file_readers() {
    let fixture = load_fixture(21, 12);
    let server = FixtureServer::start(fixture.clone(), 0);
    let client = RpcClient::new(server.endpoint()).with_backoff(5, Duration::from_millis(1));
    let fetched: Vec<(Block, Vec<Transaction>)> = client
        .fetch_blocks(1, 12)
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(fetched, fixture);
}

#[test]
fn single_block_range() {
    let fixture = load_fixture(22, 8);
    let server = FixtureServer::start(fixture.clone(), 0);
    let client = RpcClient::new(server.endpoint()).with_backoff(5, Duration::from_millis(1));
    let got: Vec<_> = client.fetch_blocks(5, 5).collect::<Result<_, _>>().unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0], fixture[4]);
}

#[test]
fn empty_range_yields_nothing() {
    // No server needed: the stream must not issue any request.
    let client = RpcClient::new("http://127.0.0.1:1").with_backoff(1, Duration::from_millis(1));
    assert_eq!(client.fetch_blocks(5, 4).count(), 0);
}

#[test]
fn transient_failures_are_retried() {
    let fixture = load_fixture(23, 3);
    // two 500s, then healthy
    let server = FixtureServer::start(fixture.clone(), 2);
    let client = RpcClient::new(server.endpoint()).with_backoff(5, Duration::from_millis(1));
    let got: Vec<_> = client.fetch_blocks(1, 3).collect::<Result<_, _>>().unwrap();
    assert_eq!(got, fixture);
}

#[test]
fn five_failures_exhaust_retries() {
    let fixture = load_fixture(24, 2);
    let server = FixtureServer::start(fixture, 1000);
    let client = RpcClient::new(server.endpoint()).with_backoff(5, Duration::from_millis(1));
    let err = client.get_block(1).unwrap_err();
    match err {
        RpcError::Exhausted { attempts, code, .. } => {
            assert_eq!(attempts, 5);
            assert_eq!(code, Some(500));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_block_is_a_range_gap() {
    let fixture = load_fixture(25, 3);
    let server = FixtureServer::start(fixture, 0);
    let client = RpcClient::new(server.endpoint()).with_backoff(5, Duration::from_millis(1));
    match client.get_block(99).unwrap_err() {
        RpcError::RangeGap(99) => {}
        other => panic!("unexpected {other:?}"),
    }
    // and the stream stops after the gap
    let results: Vec<_> = client.fetch_blocks(3, 99).collect();
    assert_eq!(results.len(), 2);
    assert!(results[0].is_ok());
    assert!(results[1].is_err());
}
