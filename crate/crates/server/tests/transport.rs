use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use janus_server::{serve, ServeOptions, SessionConfig, Transcript};
use serde_json::Value;

fn start(options: ServeOptions) -> (std::net::SocketAddr, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let mut cfg = SessionConfig::reference(3).unwrap();
    cfg.tick_rate = 200.0;
    let h = thread::spawn(move || serve(listener, cfg, options).unwrap());
    (addr, h)
}

fn kind(line: &str) -> String {
    let v: Value = serde_json::from_str(line).unwrap();
    v["type"].as_str().unwrap().to_string()
}

#[test]
fn line_protocol_round_trip_and_transcript_replay() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, server) = start(ServeOptions {
        max_connections: Some(1),
        transcript_dir: Some(dir.path().to_path_buf()),
    });
    let stream = TcpStream::connect(addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    let mut received = Vec::new();
    let mut read = |received: &mut Vec<String>| {
        let mut l = String::new();
        reader.read_line(&mut l).unwrap();
        let l = l.trim_end().to_string();
        received.push(l.clone());
        l
    };

    writeln!(
        writer,
        r#"{{"type":"set_field","angle_rad":1.5708,"magnitude_mT":1.0}}"#
    )
    .unwrap();
    writeln!(writer, r#"{{"type":"spawn","phi_rad":"random"}}"#).unwrap();
    writeln!(writer, "not json").unwrap();
    let mut kinds = Vec::new();
    while kinds.iter().filter(|k| *k == "state").count() < 10 {
        kinds.push(kind(&read(&mut received)));
    }
    assert!(kinds.contains(&"ack".to_string()));
    assert!(kinds.contains(&"error".to_string()));
    drop(writer);
    drop(reader);
    server.join().unwrap();

    let text = std::fs::read_to_string(dir.path().join("session-1.jsonl")).unwrap();
    let transcript = Transcript::parse(&text).unwrap();
    assert_eq!(transcript.events.len(), 3);
    let replayed = transcript.replay(SessionConfig::reference(0).unwrap()).unwrap();
    assert!(replayed.len() >= received.len());
    assert_eq!(&replayed[..received.len()], &received[..]);
}

#[test]
fn websocket_clients_get_the_same_payloads() {
    let (addr, server) = start(ServeOptions {
        max_connections: Some(1),
        transcript_dir: None,
    });
    let (mut ws, _) = tungstenite::connect(format!("ws://{addr}/")).unwrap();
    ws.send(tungstenite::Message::text(r#"{"type":"pause"}"#)).unwrap();
    let mut seen = Vec::new();
    while seen.len() < 5 {
        if let tungstenite::Message::Text(t) = ws.read().unwrap() {
            seen.push(kind(t.as_str()));
        }
    }
    assert!(seen.contains(&"ack".to_string()));
    assert!(seen.contains(&"state".to_string()));
    ws.close(None).unwrap();
    while ws.read().is_ok() {}
    server.join().unwrap();
}
