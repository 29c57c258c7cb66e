use std::path::{Path, PathBuf};

use edgepipe::{PipelineConfig, DEADLETTER_ENV};

#[test]
fn environment_overrides_configured_dead_letter_path() {
    let cfg = r#"{
        "model": {"config": "builtin:baseline"},
        "source": {"type": "synthetic", "frames": 1},
        "temp_source": "constant:40",
        "sinks": [{"type": "file", "path": "e.jsonl"}],
        "device_id": "d",
        "dead_letter": "from-config.jsonl"
    }"#;
    let c = PipelineConfig::parse(Path::new("p.json"), cfg).unwrap();
    std::env::remove_var(DEADLETTER_ENV);
    assert_eq!(c.dead_letter_path(), PathBuf::from("from-config.jsonl"));
    std::env::set_var(DEADLETTER_ENV, "/var/spool/edge-dl.jsonl");
    assert_eq!(
        c.dead_letter_path(),
        PathBuf::from("/var/spool/edge-dl.jsonl")
    );
    let mut bare = c.clone();
    bare.dead_letter = None;
    assert_eq!(
        bare.dead_letter_path(),
        PathBuf::from("/var/spool/edge-dl.jsonl")
    );
    std::env::remove_var(DEADLETTER_ENV);
    assert_eq!(
        bare.dead_letter_path(),
        PathBuf::from("edgepipe-deadletter.jsonl")
    );
}
