#![no_main]

use irqbench::analysis::analyze;
use irqbench::stimulus::Mode;
use irqbench::trace::TraceCapture;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(capture) = TraceCapture::from_bytes(data) {
        // anything accepted must survive a rewrite unchanged
        let bytes = capture.to_bytes().expect("accepted capture re-serializes");
        let again = TraceCapture::from_bytes(&bytes).expect("rewritten capture parses");
        assert_eq!(again, capture);
        for mode in [Mode::Latency, Mode::Throughput] {
            if let Ok(report) = analyze(&capture, mode) {
                assert_eq!(report.count, report.samples.len());
            }
        }
    }
});
