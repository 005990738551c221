//! Acceptance gate, criterion 8: replaying any `sample` manifest produces
//! byte-identical JSON-lines outputs.  Run with `--nocapture` to see the
//! per-criterion verdict line.

use std::path::Path;
use std::process::Command;

fn criterion(n: u32, label: &str, body: impl FnOnce(&mut Vec<String>) -> Result<(), String>) {
    let mut detail = Vec::new();
    let outcome = body(&mut detail);
    for line in &detail {
        println!("  {line}");
    }
    match outcome {
        Ok(()) => println!("ACCEPTANCE criterion {n} ({label}): PASS"),
        Err(msg) => {
            println!("ACCEPTANCE criterion {n} ({label}): FAIL — {msg}");
            panic!("criterion {n} ({label}) failed: {msg}");
        }
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sample(args: &[&str], out: &Path) -> Result<(), String> {
    let output = Command::new(env!("CARGO_BIN_EXE_dysonfk"))
        .arg("sample")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| format!("spawning the binary: {e}"))?;
    if !output.status.success() {
        return Err(format!(
            "sample {:?} failed: {}",
            args,
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    Ok(())
}

fn stream_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut streams = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| format!("reading {}: {e}", dir.display()))?;
    for entry in entries {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".jsonl") {
            let bytes =
                std::fs::read(&path).map_err(|e| format!("reading {}: {e}", path.display()))?;
            streams.push((name, bytes));
        }
    }
    streams.sort();
    ensure(
        !streams.is_empty(),
        format!("no streams in {}", dir.display()),
    )?;
    Ok(streams)
}

#[test]
fn criterion_8_replay_determinism() {
    criterion(8, "sample manifest replay determinism", |detail| {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let base = tmp.path();

        // One heat-bath configuration (two chains, thinning, front labels)
        // and one assembled two-sided configuration: both stream layouts.
        let setups: &[(&str, &[&str])] = &[
            (
                "rc",
                &[
                    "--alpha",
                    "2",
                    "--beta",
                    "0.4",
                    "--volume",
                    "64",
                    "--two-sided",
                    "--sweeps",
                    "300",
                    "--burn-in",
                    "20",
                    "--thin",
                    "3",
                    "--seed",
                    "17",
                    "--chains",
                    "2",
                    "--front-window",
                    "8",
                ],
            ),
            (
                "xi",
                &[
                    "--alpha",
                    "2",
                    "--beta",
                    "0.4",
                    "--volume",
                    "64",
                    "--sampler",
                    "xi",
                    "--sweeps",
                    "300",
                    "--thin",
                    "3",
                    "--seed",
                    "18",
                    "--front-window",
                    "8",
                ],
            ),
        ];

        for (name, args) in setups {
            let original = base.join(format!("{name}-original"));
            sample(args, &original)?;
            let manifest = original.join("manifest.json");
            let manifest_arg = manifest.to_str().unwrap();

            let replay_a = base.join(format!("{name}-replay-a"));
            let replay_b = base.join(format!("{name}-replay-b"));
            sample(&["--replay", manifest_arg], &replay_a)?;
            sample(&["--replay", manifest_arg], &replay_b)?;

            let first = stream_bytes(&original)?;
            let second = stream_bytes(&replay_a)?;
            let third = stream_bytes(&replay_b)?;
            ensure(
                second == third,
                format!("{name}: two replays of one manifest differ"),
            )?;
            ensure(
                first == second,
                format!("{name}: replay differs from the original run"),
            )?;
            let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
            detail.push(format!(
                "{name}: {} stream(s), {} bytes, replayed twice byte-identically",
                first.len(),
                bytes
            ));

            // The replayed manifest resolves to the same id, so artifacts
            // reference the same configuration digest.
            let id = |dir: &Path| -> Result<String, String> {
                let text = std::fs::read_to_string(dir.join("manifest.json"))
                    .map_err(|e| e.to_string())?;
                let doc: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| e.to_string())?;
                Ok(doc["manifest_id"].as_str().unwrap_or_default().to_string())
            };
            ensure(
                id(&original)? == id(&replay_a)?,
                format!("{name}: replay changed the manifest id"),
            )?;
        }
        Ok(())
    });
}
