//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets make, so regressions show up without a fuzzing toolchain.

use std::fs;
use std::path::PathBuf;

use irqbench::analysis::analyze;
use irqbench::scenarios::{ScenarioId, DEFAULT_BLMAX_T6_CORES};
use irqbench::stimulus::Mode;
use irqbench::timing::TimingModel;
use irqbench::trace::TraceCapture;
use irqbench::units::{parse_duration, parse_seeds};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn trace_read_corpus() {
    let mut accepted = 0;
    for (name, data) in corpus("trace_read") {
        let Ok(capture) = TraceCapture::from_bytes(&data) else {
            continue;
        };
        accepted += 1;
        let bytes = capture.to_bytes().unwrap();
        assert_eq!(bytes, data, "{name}: rewrite changed the bytes");
        for mode in [Mode::Latency, Mode::Throughput] {
            if let Ok(report) = analyze(&capture, mode) {
                assert_eq!(report.count, report.samples.len(), "{name}");
            }
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn timing_config_corpus() {
    let mut accepted = 0;
    for (name, data) in corpus("timing_config") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(model) = TimingModel::from_config_str(text) {
            accepted += 1;
            model.validate().unwrap();
            assert_eq!(
                TimingModel::from_config_str(&model.to_config_string()).unwrap(),
                model,
                "{name}"
            );
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn scenario_id_corpus() {
    for (name, data) in corpus("scenario_id") {
        let text = String::from_utf8(data).unwrap();
        if let Ok(id) = text.parse::<ScenarioId>() {
            if let Ok(config) = id.resolve(DEFAULT_BLMAX_T6_CORES) {
                config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }
}

#[test]
fn duration_corpus() {
    for (_, data) in corpus("duration") {
        let text = String::from_utf8(data).unwrap();
        let _ = parse_duration(&text);
        if let Ok(seeds) = parse_seeds(&text) {
            assert!(!seeds.is_empty());
        }
    }
}
