use skipread::corpus::Vocabulary;
use skipread::eval::*;
use skipread::qa::Condition;
use std::path::Path;

fn main() {
    let dir = Path::new("crates/skipread/tests/golden");
    std::fs::create_dir_all(dir).unwrap();

    let tokens: Vec<String> =
        ["the", "cat", "<sat>"].iter().map(|s| s.to_string()).collect();
    let html = render_heatmap(
        "tiny fixture",
        &tokens,
        &[0.05, 0.95, 0.5],
        &[false, false, true],
        HeatmapStyle::Reading,
    )
    .unwrap();
    std::fs::write(dir.join("heatmap_tiny.html"), html).unwrap();

    let stream = ["the", "the", "the", "cat", "cat", "sat"];
    let vocab = Vocabulary::build(stream, 10, false).unwrap();
    let tokens: Vec<String> = (0..10)
        .map(|i| ["the", "cat", "sat"][i % 3].to_string())
        .collect();
    let ids = vocab.encode(&tokens);
    let surp_full: Vec<f64> = (0..10).map(|i| 0.5 + i as f64 * 0.25).collect();
    let surp_restricted: Vec<f64> = surp_full.iter().map(|s| s + 0.125).collect();
    let probs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
    let mut gold: Vec<GoldToken> = (0..10)
        .map(|i| {
            if i % 2 == 0 {
                GoldToken::fixation(200.0 + i as f64, 210.0 + i as f64, 260.0 + i as f64)
            } else {
                GoldToken::skip()
            }
        })
        .collect();
    gold[5].track_loss = true;
    let entity: Vec<bool> = (0..10).map(|i| i == 4).collect();
    let correct: Vec<bool> = (0..10).map(|i| i == 4).collect();
    let docs = [
        AnalysisDoc {
            doc: 0,
            tokens: &tokens,
            ids: &ids,
            surprisal_full: &surp_full,
            surprisal_restricted: &surp_restricted,
            fixation_prob: &probs,
            is_named_entity: None,
            is_correct_answer: None,
            condition: None,
            gold: Some(&gold),
        },
        AnalysisDoc {
            doc: 1,
            tokens: &tokens,
            ids: &ids,
            surprisal_full: &surp_full,
            surprisal_restricted: &surp_restricted,
            fixation_prob: &probs,
            is_named_entity: Some(&entity),
            is_correct_answer: Some(&correct),
            condition: Some(Condition::Preview),
            gold: None,
        },
    ];
    export_analysis_table(&dir.join("analysis_tiny.csv"), &vocab, 10, &docs).unwrap();
    println!("golden files written");
}
