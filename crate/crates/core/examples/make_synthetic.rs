//! Regenerates the bundled synthetic dataset under `data/`.
//!
//! Trap queries get four near-duplicate chunks that repeat the query terms
//! without answering it, plus two shorter gold chunks that each carry one
//! half of the answer. Plain queries get a single gold chunk. Unrelated
//! noise chunks fill out the corpus.
//!
//! cargo run -p ragplan --example make_synthetic -- [out_dir]

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const SEED: u64 = 7;
const TRAP_QUERIES: usize = 10;
const PLAIN_QUERIES: usize = 10;
const NOISE_DOCS: usize = 30;
const DUP_WORDS: usize = 350;
const GOLD_WORDS: usize = 300;
const PLAIN_GOLD_WORDS: usize = 250;
const NOISE_WORDS: usize = 380;

/// (founding verb, design verb) per trap topic.
const VERBS: [(&str, &str); 10] = [
    ("founded", "designed"),
    ("opened", "planned"),
    ("established", "drafted"),
    ("built", "engineered"),
    ("launched", "sketched"),
    ("inaugurated", "conceived"),
    ("chartered", "modeled"),
    ("completed", "devised"),
    ("started", "shaped"),
    ("dedicated", "drew"),
];

const NOUNS: [&str; 20] = [
    "observatory", "bridge", "library", "canal", "museum", "harbor", "cathedral", "railway",
    "university", "lighthouse", "theater", "fortress", "garden", "archive", "stadium", "market",
    "monastery", "aqueduct", "academy", "tower",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const CONS: &[u8] = b"bcdfghklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    let syllables = rng.gen_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONS[rng.gen_range(0..CONS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w.push(CONS[rng.gen_range(0..CONS.len())] as char);
    w
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn vocab(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| pseudo_word(rng)).collect()
}

/// Sentences of 8..=14 words drawn from `words`, until `target` words.
fn filler(rng: &mut ChaCha8Rng, words: &[String], target: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut count = 0;
    while count < target {
        let len = rng.gen_range(8..=14).min(target - count);
        let mut s: Vec<String> = (0..len).map(|_| words.choose(rng).unwrap().clone()).collect();
        s[0] = capitalize(&s[0]);
        out.push(format!("{}.", s.join(" ")));
        count += len;
    }
    out
}

fn word_count(sentences: &[String]) -> usize {
    sentences.iter().map(|s| s.split_whitespace().count()).sum()
}

/// Fact sentence, filler, a second subject mention, filler up to `target`.
fn gold_chunk(rng: &mut ChaCha8Rng, fact: &str, echo: &str, words: &[String], target: usize) -> Vec<String> {
    let mut out = vec![fact.to_string()];
    out.extend(filler(rng, words, 120));
    out.push(echo.to_string());
    let have = word_count(&out);
    out.extend(filler(rng, words, target.saturating_sub(have)));
    out
}

fn chunk(id: &str, sentences: &[String]) -> serde_json::Value {
    json!({ "id": id, "text": sentences.join(" ") })
}

fn main() {
    let out_dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"));
    fs::create_dir_all(&out_dir).expect("create output dir");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut corpus = Vec::new();
    let mut all_queries = Vec::new();
    let mut trap_queries = Vec::new();

    for t in 0..TRAP_QUERIES + PLAIN_QUERIES {
        let entity = capitalize(&pseudo_word(&mut rng));
        let noun = NOUNS[t % NOUNS.len()];
        let subject = format!("{entity} {noun}");
        if t < TRAP_QUERIES {
            let id = format!("trap-{:02}", t + 1);
            let year = rng.gen_range(1700..1990);
            let designer = format!("{} {}", capitalize(&pseudo_word(&mut rng)), capitalize(&pseudo_word(&mut rng)));
            let (born, made) = VERBS[t];
            let query = format!("When was the {subject} {born} and who {made} the {subject} ?");

            // dups restate the question without answering it
            let dup_vocab = vocab(&mut rng, 40);
            let hooks = [
                format!("When was the {subject} {born} and who {made} the {subject} ?"),
                format!("The {subject} draws crowds to the {subject} ."),
                format!("When was the {subject} {born} and who {made} the {subject} ?"),
                format!("The {subject} draws crowds to the {subject} ."),
            ];
            let mut base = Vec::new();
            for h in &hooks {
                base.push(h.clone());
                base.extend(filler(&mut rng, &dup_vocab, 70));
            }
            let have = word_count(&base);
            base.extend(filler(&mut rng, &dup_vocab, DUP_WORDS.saturating_sub(have)));
            for d in 0..4 {
                // each copy rewrites one filler sentence
                let mut copy = base.clone();
                let slot = 1 + 2 * d;
                let len = copy[slot].split_whitespace().count();
                copy[slot] = filler(&mut rng, &dup_vocab, len).join(" ");
                corpus.push(chunk(&format!("{id}-dup{}", d + 1), &copy));
            }

            let fact_a = format!("The {subject} was {born} in {year}.");
            let fact_b = format!("The {subject} was {made} by {designer}.");
            // golds share half their filler vocabulary with the topic's dups
            let mut gold_a_vocab = vocab(&mut rng, 30);
            gold_a_vocab.extend(dup_vocab[..30].iter().cloned());
            let mut gold_b_vocab = vocab(&mut rng, 30);
            gold_b_vocab.extend(dup_vocab[10..].iter().cloned());
            let a = gold_chunk(&mut rng, &fact_a, &format!("{subject} records list this date for the {subject} ."), &gold_a_vocab, GOLD_WORDS);
            let b = gold_chunk(&mut rng, &fact_b, &format!("{subject} plans carry this name for the {subject} ."), &gold_b_vocab, GOLD_WORDS);
            corpus.push(chunk(&format!("{id}-gold-a"), &a));
            corpus.push(chunk(&format!("{id}-gold-b"), &b));

            let q = json!({
                "id": id,
                "text": query,
                "gold_answers": [fact_a, fact_b],
                "gold_passage_ids": [format!("{id}-gold-a"), format!("{id}-gold-b")],
            });
            trap_queries.push(q.clone());
            all_queries.push(q);
        } else {
            let id = format!("plain-{:02}", t - TRAP_QUERIES + 1);
            let feature = pseudo_word(&mut rng);
            let query = format!("What is the {subject} known for?");
            let fact = format!("The {subject} is known for its {feature} collection.");
            let v = vocab(&mut rng, 60);
            let echo = format!("Visitors to the {subject} admire the {subject} .");
            let g = gold_chunk(&mut rng, &fact, &echo, &v, PLAIN_GOLD_WORDS);
            corpus.push(chunk(&format!("{id}-gold"), &g));
            all_queries.push(json!({
                "id": id,
                "text": query,
                "gold_answers": [fact],
                "gold_passage_ids": [format!("{id}-gold")],
            }));
        }
    }

    let noise_vocab = vocab(&mut rng, 400);
    for n in 0..NOISE_DOCS {
        let s = filler(&mut rng, &noise_vocab, NOISE_WORDS);
        corpus.push(chunk(&format!("noise-{:02}", n + 1), &s));
    }

    let write = |name: &str, rows: &[serde_json::Value]| {
        let mut f = fs::File::create(out_dir.join(name)).expect("create file");
        for r in rows {
            writeln!(f, "{r}").expect("write line");
        }
    };
    write("corpus.jsonl", &corpus);
    write("queries.jsonl", &all_queries);
    write("trap_queries.jsonl", &trap_queries);
    println!(
        "wrote {} chunks, {} queries ({} trap) to {}",
        corpus.len(),
        all_queries.len(),
        trap_queries.len(),
        out_dir.display()
    );
}
