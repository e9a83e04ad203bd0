use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use egs_core::egs::{egs_run, EgsState, TerminatedBy};
use egs_core::protocol::{CoreMessage, ExternalPolicy, Observation, PolicyMessage};
use egs_core::{DagTask, Error};

const ECHO_FIRST: &str = r#"while IFS= read -r line; do case "$line" in *observe*) echo '{"type":"act","index":0}';; esac; done"#;

fn load(name: &str) -> DagTask {
    DagTask::load(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR")))
        .unwrap()
        .trim_end()
        .to_string()
}

#[test]
fn observe_message_matches_golden_file() {
    let state = EgsState::new(load("seven_node.json")).unwrap();
    let obs = Observation::from_state(&state);
    assert_eq!(obs.features.len(), 7);
    assert_eq!(obs.eligible.len(), 4);
    let line = serde_json::to_string(&CoreMessage::Observe(obs.clone())).unwrap();
    assert_eq!(line, golden("seven_node_observe.json"));
    let back: CoreMessage = serde_json::from_str(&line).unwrap();
    assert_eq!(back, CoreMessage::Observe(obs));
}

#[test]
fn echo_policy_over_stdio_takes_first_eligible_edge() {
    let mut policy = ExternalPolicy::spawn(ECHO_FIRST, Duration::from_secs(10)).unwrap();
    let r = egs_run(&load("seven_node.json"), &mut policy, 0).unwrap();
    assert_eq!(r.added_edges, vec![(2, 3)]);
    assert_eq!(r.processors, 2);
}

#[test]
fn out_of_range_index_is_a_protocol_error() {
    let cmd = r#"while IFS= read -r line; do echo '{"type":"act","index":4}'; done"#;
    let mut policy = ExternalPolicy::spawn(cmd, Duration::from_secs(10)).unwrap();
    let err = egs_run(&load("seven_node.json"), &mut policy, 0).unwrap_err();
    assert!(matches!(err, Error::PolicyProtocol(_)), "{err}");
}

#[test]
fn malformed_reply_and_closed_stream_are_protocol_errors() {
    let mut policy = ExternalPolicy::spawn("read -r line; echo nonsense", Duration::from_secs(10)).unwrap();
    let err = egs_run(&load("seven_node.json"), &mut policy, 0).unwrap_err();
    assert!(matches!(err, Error::PolicyProtocol(_)), "{err}");

    let mut policy = ExternalPolicy::spawn("exit 0", Duration::from_secs(10)).unwrap();
    let err = egs_run(&load("seven_node.json"), &mut policy, 0).unwrap_err();
    assert!(matches!(err, Error::PolicyProtocol(_)), "{err}");
}

#[test]
fn silent_policy_times_out() {
    let mut policy = ExternalPolicy::spawn("exec sleep 5", Duration::from_millis(200)).unwrap();
    let err = egs_run(&load("seven_node.json"), &mut policy, 0).unwrap_err();
    assert!(matches!(err, Error::Timeout(_)), "{err}");
}

/// A trainer stand-in listening on TCP that plays a fixed edge script by
/// looking each edge up in the observed eligible list.
#[test]
fn tcp_fake_trainer_drives_nine_node_example_to_width_two() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let trainer = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut out = stream.try_clone().unwrap();
        let mut script = vec![[1, 2], [6, 5]].into_iter();
        let mut seen = Vec::new();
        for line in BufReader::new(stream).lines() {
            let msg: CoreMessage = serde_json::from_str(&line.unwrap()).unwrap();
            match msg {
                CoreMessage::Observe(obs) => {
                    let want = script.next().unwrap();
                    let index = obs.eligible.iter().position(|e| *e == want).unwrap();
                    let reply = serde_json::to_string(&PolicyMessage::Act { index }).unwrap();
                    writeln!(out, "{reply}").unwrap();
                    seen.push(obs.width);
                }
                CoreMessage::EpisodeEnd { reward_total } => {
                    seen.push(reward_total as usize);
                    break;
                }
            }
        }
        seen
    });
    let mut policy = ExternalPolicy::connect(&addr, Duration::from_secs(10)).unwrap();
    let r = egs_run(&load("nine_node.json"), &mut policy, 0).unwrap();
    drop(policy);
    assert_eq!(r.added_edges, vec![(1, 2), (6, 5)]);
    assert_eq!(r.processors, 2);
    assert_eq!(r.terminated_by, TerminatedBy::LowerBoundReached);
    assert_eq!(trainer.join().unwrap(), vec![3, 3, 1]);
}
