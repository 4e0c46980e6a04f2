//! Byte-identical replay of the recorded steering transcript. Set
//! `JANUS_BLESS=1` to rewrite the expected stream after an intended change.

use std::path::PathBuf;

use janus_server::{SessionConfig, Transcript};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn replay() -> String {
    let text = std::fs::read_to_string(golden("steering.transcript.jsonl")).unwrap();
    let transcript = Transcript::parse(&text).unwrap();
    let mut out = transcript
        .replay(SessionConfig::reference(0).unwrap())
        .unwrap()
        .join("\n");
    out.push('\n');
    out
}

#[test]
fn transcript_replays_to_golden_stream() {
    let got = replay();
    let path = golden("steering.expected.jsonl");
    if std::env::var_os("JANUS_BLESS").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert!(got == want, "replay differs from {}", path.display());
}

#[test]
fn replays_are_repeatable() {
    assert_eq!(replay(), replay());
}
