//! Corpus-module properties over randomized inputs.

use polytrans_core::corpus::{
    build_vocabulary, decode_ids, encode_sentence, load_pairs, normalize_text, SentencePair,
    Side, UNK_ID,
};
use polytrans_core::numkit::SplitMix64;
use std::io::Write;

fn random_unicode_string(rng: &mut SplitMix64) -> String {
    let len = rng.next_index(40);
    (0..len)
        .filter_map(|_| {
            // Mix ASCII, Latin-1 accents, punctuation, CJK and symbols.
            let c = match rng.next_index(6) {
                0 => rng.next_index(0x7F) as u32,
                1 => 0xC0 + rng.next_index(0x100 - 0xC0) as u32,
                2 => 0x3040 + rng.next_index(0x100) as u32,
                3 => 0x2000 + rng.next_index(0x100) as u32,
                4 => b'a' as u32 + rng.next_index(26) as u32,
                _ => 0x1F300 + rng.next_index(0x100) as u32,
            };
            char::from_u32(c)
        })
        .collect()
}

#[test]
fn normalize_is_idempotent_on_random_unicode() {
    let mut rng = SplitMix64::new(0x1D3);
    for _ in 0..1000 {
        let raw = random_unicode_string(&mut rng);
        let once = normalize_text(&raw);
        let twice = normalize_text(&once);
        assert_eq!(once, twice, "not idempotent for {raw:?}");
        for token in once.split_whitespace() {
            assert!(
                token.chars().all(|c| c.is_ascii_lowercase())
                    || matches!(token, "." | "!" | "?"),
                "bad token {token:?} from {raw:?}"
            );
        }
    }
}

#[test]
fn encode_decode_round_trips_in_vocabulary_sentences() {
    let words = [
        "go", "run", "stop", "wait", "home", "now", "here", "cold", ".", "!", "?",
    ];
    let pairs: Vec<SentencePair> = vec![SentencePair {
        source: words.iter().map(|w| w.to_string()).collect(),
        target: vec!["x".to_string()],
        line_no: 1,
    }];
    let vocab = build_vocabulary(&pairs, Side::Source).unwrap();

    let mut rng = SplitMix64::new(0x5E17);
    for _ in 0..1000 {
        let len = rng.next_index(9);
        let sentence: Vec<String> = (0..len)
            .map(|_| words[rng.next_index(words.len())].to_string())
            .collect();
        let ids = encode_sentence(&vocab, &sentence);
        assert!(ids.iter().all(|&id| id != UNK_ID));
        let decoded = decode_ids(&vocab, &ids).unwrap();
        assert_eq!(decoded, sentence);
    }
}

#[test]
fn loaded_pairs_respect_the_length_cap() {
    let mut rng = SplitMix64::new(0xCA9);
    let words = ["one", "two", "three", "four", "five"];
    let mut file = tempfile::NamedTempFile::new().unwrap();
    for _ in 0..200 {
        let mut line = String::new();
        let s_len = 1 + rng.next_index(16);
        let t_len = 1 + rng.next_index(16);
        for i in 0..s_len {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(words[rng.next_index(words.len())]);
        }
        line.push('\t');
        for i in 0..t_len {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(words[rng.next_index(words.len())]);
        }
        writeln!(file, "{line}").unwrap();
    }
    file.flush().unwrap();

    let (pairs, stats) = load_pairs(file.path(), 10, false).unwrap();
    assert_eq!(stats.pairs_read, 200);
    assert_eq!(stats.pairs_kept, pairs.len());
    assert!(stats.pairs_kept <= stats.pairs_read);
    for pair in &pairs {
        assert!(pair.source.len() <= 10 && !pair.source.is_empty());
        assert!(pair.target.len() <= 10 && !pair.target.is_empty());
    }
    // The generator produces lines on both sides of the cap.
    assert!(stats.pairs_kept < stats.pairs_read);
    assert!(stats.pairs_kept > 0);
}
