//! Train the relevance scorer on a small separable dataset and show that an
//! untrained scorer is exactly uninformative (probability 0.5) while the
//! trained one separates relevant from irrelevant sentences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kgr4::nn::TrainConfig;
use kgr4::scorer::{synthetic_separable_data, train_scorer, Scorer, ScorerConfig};

fn main() -> kgr4::Result<()> {
    let (data, vocab) = synthetic_separable_data(60, 3, 7);

    let untrained = Scorer::new(ScorerConfig::default(), vocab.clone());
    let ex = &data[0];
    println!(
        "untrained score (always 0.5): {}",
        untrained.score(&ex.concepts, &ex.sentence)?
    );

    let cfg = TrainConfig {
        steps: 300,
        lr: 1e-2,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let scorer = train_scorer(&data, ScorerConfig::default(), &cfg, vocab, &mut rng)?;
    println!("trained accuracy: {:.3}", scorer.accuracy(&data)?);

    for ex in data.iter().take(4) {
        println!(
            "  label={} score={:.3}  {}",
            ex.label as u8,
            scorer.score(&ex.concepts, &ex.sentence)?,
            ex.sentence.text
        );
    }
    Ok(())
}
