use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use proptest::prelude::*;
use serde_json::{json, Value};
use toolgym_core::builtin;
use toolgym_core::env::render_tool_calls;
use toolgym_core::model::ToolCall;
use toolgym_core::service::{serve_tcp, Service, ServiceConfig};

fn service() -> Service {
    ServiceConfig::default().build().unwrap()
}

fn send(svc: &Service, v: &Value) -> Value {
    serde_json::from_str(&svc.handle_line(&v.to_string())).unwrap()
}

/// Assistant turns a scripted session may produce.
fn action_text(sample: usize, action: u8) -> String {
    let gt = if sample == 0 {
        builtin::car_rental_sample()
    } else {
        builtin::montreal_sample()
    }
    .ground_truth;
    let turns = gt.turns();
    let turn_calls = |t: usize| -> Vec<ToolCall> {
        turns[t % turns.len()].iter().map(|&i| gt.calls[i].call.clone()).collect()
    };
    match action % 6 {
        0 => render_tool_calls(&turn_calls(0)),
        1 => render_tool_calls(&turn_calls(1)),
        2 => render_tool_calls(&[ToolCall::from_value("Search_Flights", json!({"fromId": "X"})).unwrap()]),
        3 => "<tool_call>\n{broken\n</tool_call>".into(),
        4 => render_tool_calls(&[ToolCall::from_value("No_Such_Tool", json!({})).unwrap()]),
        _ => "All done.".into(),
    }
}

fn script(sid: &str, sample: usize, actions: &[u8]) -> Vec<Value> {
    let mut msgs = vec![json!({"kind": "reset", "session_id": sid, "body": {"dataset_index": sample}})];
    for &a in actions {
        msgs.push(json!({"kind": "step", "session_id": sid, "body": {"assistant_text": action_text(sample, a)}}));
    }
    msgs.push(json!({"kind": "score", "session_id": sid}));
    msgs.push(json!({"kind": "close", "session_id": sid}));
    msgs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interleaved_sessions_match_isolated_runs(
        sessions in prop::collection::vec((0usize..2, prop::collection::vec(0u8..6, 0..8)), 1..6),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 0..120),
    ) {
        let scripts: Vec<Vec<Value>> = sessions
            .iter()
            .enumerate()
            .map(|(i, (sample, actions))| script(&format!("p{i}"), *sample, actions))
            .collect();
        let isolated: Vec<Vec<Value>> = scripts
            .iter()
            .map(|s| {
                let svc = service();
                s.iter().map(|m| send(&svc, m)).collect()
            })
            .collect();

        let svc = service();
        let mut cursor = vec![0usize; scripts.len()];
        let mut replies: Vec<Vec<Value>> = vec![Vec::new(); scripts.len()];
        let mut picks = picks.into_iter();
        loop {
            let live: Vec<usize> = (0..scripts.len()).filter(|&i| cursor[i] < scripts[i].len()).collect();
            if live.is_empty() {
                break;
            }
            let i = match picks.next() {
                Some(ix) => live[ix.index(live.len())],
                None => live[0],
            };
            replies[i].push(send(&svc, &scripts[i][cursor[i]]));
            cursor[i] += 1;
        }
        prop_assert_eq!(replies, isolated);
        prop_assert_eq!(svc.open_sessions(), 0);
    }

    #[test]
    fn arbitrary_bytes_get_an_error_reply(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let svc = service();
        let line = String::from_utf8_lossy(&bytes);
        let reply: Value = serde_json::from_str(&svc.handle_line(&line)).unwrap();
        prop_assert!(reply["kind"].is_string());
    }

    #[test]
    fn arbitrary_json_messages_never_crash(
        kind in prop::sample::select(vec!["hello", "reset", "step", "score", "close", "error", "ack", "bogus"]),
        sid in "[a-c]{0,2}",
        body in prop::sample::select(vec![
            json!(null), json!({}), json!([1]), json!("x"), json!({"dataset_index": 99}),
            json!({"sample_id": 3}), json!({"assistant_text": 5}), json!({"assistant_text": "<tool_call>"}),
            json!({"dataset_index": 1, "sample_id": "montreal_example"}),
        ]),
    ) {
        let svc = service();
        send(&svc, &json!({"kind": "reset", "session_id": "a"}));
        let reply = send(&svc, &json!({"kind": kind, "session_id": sid, "body": body}));
        prop_assert!(reply["kind"].is_string());
    }
}

#[test]
fn step_after_max_turns_is_closed() {
    let svc = ServiceConfig {
        max_turns: 2,
        ..Default::default()
    }
    .build()
    .unwrap();
    send(&svc, &json!({"kind": "reset", "session_id": "m", "body": {"dataset_index": 0}}));
    let garbage = json!({"kind": "step", "session_id": "m", "body": {"assistant_text": "<tool_call>\nnope\n</tool_call>"}});
    assert_eq!(send(&svc, &garbage)["body"]["done"], false);
    assert_eq!(send(&svc, &garbage)["body"]["done"], true);
    assert_eq!(send(&svc, &garbage)["body"]["code"], "EPISODE_CLOSED");
}

#[test]
fn seeded_reset_is_reproducible() {
    let pick = |seed| {
        let svc = ServiceConfig { seed, ..Default::default() }.build().unwrap();
        (0..16)
            .map(|i| send(&svc, &json!({"kind": "reset", "session_id": format!("r{i}")}))["body"]["sample_id"].clone())
            .collect::<Vec<_>>()
    };
    let a = pick(3);
    assert_eq!(a, pick(3));
    assert!(a.contains(&json!("car_rental_example")) && a.contains(&json!("montreal_example")));
}

#[test]
fn sixty_four_concurrent_tcp_sessions() {
    let svc = Arc::new(service());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = svc.clone();
    thread::spawn(move || serve_tcp(server, listener));

    let car = builtin::car_rental_sample();
    let clients: Vec<_> = (0..64)
        .map(|i| {
            let calls: Vec<ToolCall> = car.ground_truth.tool_calls().cloned().collect();
            thread::spawn(move || {
                let stream = TcpStream::connect(addr).unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut writer = stream;
                let mut rpc = |v: Value| -> Value {
                    writeln!(writer, "{v}").unwrap();
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    serde_json::from_str(&line).unwrap()
                };
                let sid = format!("tcp{i}");
                rpc(json!({"kind": "reset", "session_id": sid, "body": {"dataset_index": 0}}));
                // Odd clients answer wrongly in the last turn.
                for (t, c) in calls.iter().enumerate() {
                    let mut c = c.clone();
                    if i % 2 == 1 && t == 2 {
                        c.args.insert("vehicle_id".into(), json!("0"));
                    }
                    let text = render_tool_calls(&[c]);
                    rpc(json!({"kind": "step", "session_id": sid, "body": {"assistant_text": text}}));
                }
                rpc(json!({"kind": "step", "session_id": sid, "body": {"assistant_text": "done"}}));
                let score = rpc(json!({"kind": "score", "session_id": sid}));
                rpc(json!({"kind": "close", "session_id": sid}));
                (i, score["body"]["eval"]["n_succ"].as_u64().unwrap())
            })
        })
        .collect();
    for c in clients {
        let (i, n_succ) = c.join().unwrap();
        assert_eq!(n_succ, if i % 2 == 0 { 3 } else { 2 }, "client {i}");
    }
    assert_eq!(svc.open_sessions(), 0);
}
