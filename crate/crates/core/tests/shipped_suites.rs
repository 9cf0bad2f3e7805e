use std::path::PathBuf;

use lmfuse::suite::{self, Suite};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../suites")
        .join(name)
}

type Generator = fn(u64) -> lmfuse::Result<Suite>;

#[test]
fn shipped_suites_match_their_generators() {
    let cases: [(&str, Generator); 4] = [
        ("noisy-channel", suite::noisy_channel),
        ("eot-continuation", suite::eot_continuation),
        ("hallucination", suite::hallucination),
        ("heterogeneous", suite::heterogeneous),
    ];
    for (name, generate) in cases {
        let on_disk = Suite::load(shipped(name)).unwrap();
        let fresh = generate(on_disk.config.seed).unwrap();
        assert_eq!(on_disk.config, fresh.config, "{name}");
        assert_eq!(on_disk.vocab, fresh.vocab, "{name}");
        assert_eq!(on_disk.corpus, fresh.corpus, "{name}");
        assert_eq!(on_disk.references, fresh.references, "{name}");
        for (a, b) in on_disk.inputs.iter().zip(&fresh.inputs) {
            assert_eq!(a.scenario.to_json(), b.scenario.to_json(), "{name}/{}", a.sample_id);
        }
    }
}
