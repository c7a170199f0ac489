//! Contextual compositionality scoring: a phrase's vector is its
//! context-weighted token mix, and the score is the mean cosine similarity
//! against one-word-substituted perturbations. The same phrase can score
//! high in one usage scenario and low in another.
//!
//! Run with: `cargo run --example compositionality`

use seqlab::compositionality::{
    compositionality_score, EmbeddingStore, PerturbationSet, PhraseContext,
};

fn main() -> seqlab::Result<()> {
    // a tiny embedding space: "heavy metal" as music vs. chemistry
    let mut store = EmbeddingStore::default();
    store.insert("heavy", vec![0.9, 0.1, 0.0])?;
    store.insert("metal", vec![0.3, 0.7, 0.5])?;
    store.insert("weighty", vec![0.88, 0.12, 0.05])?;
    store.insert("dense", vec![0.85, 0.2, 0.02])?;
    store.insert("steel", vec![0.8, 0.05, 0.6])?;
    store.insert("rock", vec![0.05, 0.9, 0.4])?;
    store.insert("music", vec![0.0, 0.95, 0.35])?;

    let phrase = vec!["heavy".to_string(), "metal".to_string()];
    let perturbations = PerturbationSet::new(
        phrase.clone(),
        vec![
            vec!["weighty".to_string(), "metal".to_string()],
            vec!["dense".to_string(), "metal".to_string()],
            vec!["heavy".to_string(), "steel".to_string()],
        ],
    )?;

    // chemistry-flavored scenario: substitutions preserve the meaning
    let chemistry = PhraseContext::new(
        vec!["dense".into(), "metal".into(), "alloy".into(), "heavy".into()],
        vec![("steel".into(), 2.0), ("dense".into(), 1.5)],
        0.6,
    )?;
    let score = compositionality_score(&perturbations, &store, &chemistry)?;
    println!("chemistry scenario: score {score:.4} (compositional reading)");

    // music-flavored scenario: the phrase behaves as a unit
    let music = PhraseContext::new(
        vec!["rock".into(), "music".into(), "metal".into(), "metal".into()],
        vec![("rock".into(), 2.0), ("music".into(), 2.0)],
        0.8,
    )?;
    let score = compositionality_score(&perturbations, &store, &music)?;
    println!("music scenario:     score {score:.4}");

    // with no contextual evidence every lambda gives the same score
    let neutral = PhraseContext::uniform();
    let score = compositionality_score(&perturbations, &store, &neutral)?;
    println!("uniform context:    score {score:.4}");
    Ok(())
}
