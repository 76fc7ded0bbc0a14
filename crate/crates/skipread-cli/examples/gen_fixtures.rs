//! Regenerates the committed desk-scale fixtures. Everything is seeded, so
//! the output is bit-identical run to run:
//!   fixtures/echo.txt          three echo-language documents
//!   fixtures/cloze.jsonl       cue-cloze question-answering triples
//!   fixtures/sim_tiny.jsonl    fixation probabilities for three 50-token docs
//!   fixtures/gold_tiny.csv     gold fixations aligned with sim_tiny
//!   fixtures/vocab_tiny.json   vocabulary the tiny docs were encoded with
//!   fixtures/etk_text.txt      three displayed text lines
//!   fixtures/etk_fixations.csv two trials of drifting gaze over that text

use rand::Rng as _;
use skipread::corpus::Vocabulary;
use skipread::etk::{save_fixations, RawFixation};
use skipread::eval::{GoldFixations, GoldToken};
use skipread::rng;
use skipread::synth::{cloze_corpus, echo_corpus, write_cloze_jsonl, write_corpus, ClozeConfig, EchoConfig};
use std::path::Path;

fn main() {
    let dir = Path::new("fixtures");
    std::fs::create_dir_all(dir).unwrap();

    // echo corpus: 3 documents, 600 tokens each (12 windows of 50)
    let echo = echo_corpus(
        &EchoConfig { content_symbols: 10, echo_len: 2, docs: 3, doc_len: 600 },
        &mut rng::root(11),
    );
    write_corpus(&dir.join("echo.txt"), &echo).unwrap();

    // cloze triples at the scale the QA head trains well on
    let cloze = cloze_corpus(&ClozeConfig::default(), &mut rng::root(7));
    write_cloze_jsonl(&dir.join("cloze.jsonl"), &cloze).unwrap();

    // ── the bundled 3-document evaluation fixture ──────────────────────────
    // 20 common words plus two rare ones that drop out of the vocabulary,
    // 3 docs x 50 tokens; fixation probabilities and correlated gold bits
    let mut drng = rng::root(13);
    let mut docs: Vec<Vec<String>> = Vec::new();
    for _ in 0..3 {
        let mut doc = Vec::with_capacity(50);
        for _ in 0..50 {
            let w = if drng.gen::<f64>() < 0.03 {
                format!("rare{}", drng.gen_range(0..2))
            } else {
                // zipf-ish draw over w0..w19
                let z = (drng.gen::<f64>() * drng.gen::<f64>() * 20.0) as usize;
                format!("w{}", z.min(19))
            };
            doc.push(w);
        }
        docs.push(doc);
    }
    let vocab =
        Vocabulary::build(docs.iter().flatten().map(String::as_str), 20, false).unwrap();
    vocab.save_json(&dir.join("vocab_tiny.json")).unwrap();

    let mut sim = String::new();
    let mut gold = GoldFixations::new();
    for (d, doc) in docs.iter().enumerate() {
        let mut gtokens = Vec::new();
        for (i, tok) in doc.iter().enumerate() {
            // longer and rarer words get higher fixation probability
            let len_part = (tok.len() as f64 - 2.0) / 4.0;
            let noise = drng.gen::<f64>();
            let prob = (0.15 + 0.4 * len_part + 0.4 * noise).clamp(0.05, 0.95);
            let fixated = drng.gen::<f64>() < 0.25 + 0.55 * prob;
            let track_loss = drng.gen::<f64>() < 0.02;
            sim.push_str(&format!(
                "{{\"doc\":{d},\"position\":{i},\"token\":\"{tok}\",\"prob\":{prob},\"sampled\":{}}}\n",
                u8::from(fixated)
            ));
            let g = if track_loss {
                GoldToken { track_loss: true, ..GoldToken::skip() }
            } else if fixated {
                let ff = 120.0 + (drng.gen::<f64>() * 130.0).round();
                let extra = (drng.gen::<f64>() * 100.0).round();
                let again = (drng.gen::<f64>() * 150.0).round();
                GoldToken::fixation(ff, ff + extra, ff + extra + again)
            } else {
                GoldToken::skip()
            };
            gtokens.push(g);
        }
        gold.insert("r1", d, gtokens);
    }
    std::fs::write(dir.join("sim_tiny.jsonl"), sim).unwrap();
    gold.save_csv(&dir.join("gold_tiny.csv")).unwrap();

    // gold fixations for the echo corpus: content tokens usually fixated,
    // echo tokens usually skipped
    let mut grng = rng::root(19);
    let mut echo_gold = GoldFixations::new();
    for (d, doc) in echo.iter().enumerate() {
        let mut gtokens = Vec::new();
        for tok in doc {
            let p_fix = if tok.starts_with('c') { 0.85 } else { 0.25 };
            let track_loss = grng.gen::<f64>() < 0.015;
            let fixated = grng.gen::<f64>() < p_fix;
            let g = if track_loss {
                GoldToken { track_loss: true, ..GoldToken::skip() }
            } else if fixated {
                let ff = 120.0 + (grng.gen::<f64>() * 130.0).round();
                let extra = (grng.gen::<f64>() * 100.0).round();
                let again = (grng.gen::<f64>() * 150.0).round();
                GoldToken::fixation(ff, ff + extra, ff + extra + again)
            } else {
                GoldToken::skip()
            };
            gtokens.push(g);
        }
        echo_gold.insert("r1", d, gtokens);
    }
    echo_gold.save_csv(&dir.join("gold_echo.csv")).unwrap();

    // ── eye-tracking fixture ───────────────────────────────────────────────
    let text = "the old king won a war\nthen he lost his crown fast\na new age began in peace\n";
    std::fs::write(dir.join("etk_text.txt"), text).unwrap();
    let centers = [100.0, 140.0, 180.0];
    let mut erng = rng::root(17);
    let mut fixations: Vec<RawFixation> = Vec::new();
    for trial in 0..2 {
        let mut order = 0;
        for (li, &cy) in centers.iter().enumerate() {
            let mut x = 110.0;
            while x < 340.0 {
                let y = cy + erng.gen_range(-2.5..2.5);
                // trial 0 drifts down by a constant; trial 1 tilts with x
                let drift = if trial == 0 { 12.0 } else { 15.0 * (x - 100.0) / 260.0 };
                let duration = if erng.gen::<f64>() < 0.08 {
                    // occasional short fixation for the pooling stage
                    30.0 + (erng.gen::<f64>() * 40.0).round()
                } else {
                    90.0 + (erng.gen::<f64>() * 180.0).round()
                };
                fixations.push(RawFixation { trial, x, y: y + drift, duration, order });
                order += 1;
                x += erng.gen_range(18.0..45.0);
            }
            // one regression per line boundary
            if li > 0 && erng.gen::<f64>() < 0.7 {
                let back = RawFixation {
                    trial,
                    x: 120.0 + erng.gen::<f64>() * 60.0,
                    y: centers[li - 1]
                        + erng.gen_range(-2.5..2.5)
                        + if trial == 0 { 12.0 } else { 1.0 },
                    duration: 100.0 + (erng.gen::<f64>() * 80.0).round(),
                    order,
                };
                order += 1;
                fixations.push(back);
            }
        }
    }
    save_fixations(&dir.join("etk_fixations.csv"), &fixations).unwrap();

    println!("fixtures written to {}", dir.display());
}
