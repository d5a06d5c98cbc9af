use super::{BenchError, Difficulty, McqItem};
use crate::rng::SplitMix64;

/// Seeded per-difficulty sample.
///
/// One SplitMix64 stream seeded with `seed` is used for easy, then medium,
/// then hard. For each class the items are taken in input order, fully
/// shuffled with Fisher–Yates (`j = next_u64() % (i + 1)` for `i` from the
/// end down to 1), and the first `per_difficulty` are kept. The result lists
/// the easy sample first, then medium, then hard.
pub fn sample_questions(items: &[McqItem], per_difficulty: usize, seed: u64) -> Result<Vec<McqItem>, BenchError> {
    if per_difficulty == 0 {
        return Ok(Vec::new());
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(per_difficulty * Difficulty::ALL.len());
    for d in Difficulty::ALL {
        let mut pool: Vec<&McqItem> = items.iter().filter(|i| i.difficulty == d).collect();
        if pool.len() < per_difficulty {
            return Err(BenchError::InsufficientItems {
                difficulty: d,
                available: pool.len(),
                requested: per_difficulty,
            });
        }
        rng.shuffle(&mut pool);
        out.extend(pool.into_iter().take(per_difficulty).cloned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n_per: usize) -> Vec<McqItem> {
        let mut v = Vec::new();
        for d in Difficulty::ALL {
            for i in 0..n_per {
                v.push(McqItem {
                    id: format!("{d}-{i}"),
                    question: "q".into(),
                    options: vec!["a".into(), "b".into(), "c".into(), "d".into()],
                    correct_index: 0,
                    difficulty: d,
                    gold_chunks: vec![],
                });
            }
        }
        v
    }

    #[test]
    fn same_seed_same_sample() {
        let pool = items(600);
        let ids = |s: Vec<McqItem>| s.into_iter().map(|i| i.id).collect::<Vec<_>>();
        let a = ids(sample_questions(&pool, 500, 42).unwrap());
        let b = ids(sample_questions(&pool, 500, 42).unwrap());
        assert_eq!(a.len(), 1500);
        assert_eq!(a, b);
        assert_ne!(a, ids(sample_questions(&pool, 500, 43).unwrap()));
    }

    #[test]
    fn zero_is_empty() {
        assert!(sample_questions(&[], 0, 1).unwrap().is_empty());
    }

    #[test]
    fn insufficient_class() {
        let err = sample_questions(&items(2), 3, 1).unwrap_err();
        assert!(matches!(
            err,
            BenchError::InsufficientItems {
                difficulty: Difficulty::Easy,
                available: 2,
                requested: 3
            }
        ));
    }
}
