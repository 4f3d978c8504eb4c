use rand::RngCore;

use super::{Candidate, Choice, OracleError, PairQuery, PreferenceOracle};

/// Wins attributed to the two contents of a balanced comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BalancedOutcome {
    pub wins_a: u64,
    pub wins_b: u64,
    /// Queries issued (`2 m`).
    pub attempted: u64,
    /// Queries that failed and were skipped.
    pub failed: u64,
}

impl BalancedOutcome {
    pub fn answered(&self) -> u64 {
        self.wins_a + self.wins_b
    }
}

/// Asks about `(a, b)` and `(b, a)` `repeats` times each, crediting wins to
/// the contents rather than to the positions they were shown in.
///
/// Failed queries are skipped. Fatal errors abort.
pub fn prefer_balanced<O: PreferenceOracle + ?Sized>(
    oracle: &O,
    user_id: u64,
    persona: &str,
    a: Candidate<'_>,
    b: Candidate<'_>,
    repeats: u32,
    rng: &mut dyn RngCore,
) -> Result<BalancedOutcome, OracleError> {
    if repeats == 0 {
        return Err(OracleError::Config("repeats must be at least 1".into()));
    }
    let mut out = BalancedOutcome::default();
    for repeat in 0..repeats {
        let forward = PairQuery {
            user_id,
            persona,
            first: a,
            second: b,
            repeat,
        };
        for (query, a_is_first) in [(forward, true), (forward.swapped(), false)] {
            out.attempted += 1;
            match oracle.prefer(&query, rng) {
                Ok(choice) => {
                    if (choice == Choice::A) == a_is_first {
                        out.wins_a += 1;
                    } else {
                        out.wins_b += 1;
                    }
                }
                Err(e) if e.is_fatal() => return Err(e),
                Err(e) => {
                    out.failed += 1;
                    tracing::debug!(user_id, error = %e, "skipping failed preference query");
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct FirstPosition;
    impl PreferenceOracle for FirstPosition {
        fn id(&self) -> String {
            "first".into()
        }
        fn prefer(&self, _: &PairQuery<'_>, _: &mut dyn RngCore) -> Result<Choice, OracleError> {
            Ok(Choice::A)
        }
    }

    /// Always prefers the content with the given id.
    struct Likes(usize);
    impl PreferenceOracle for Likes {
        fn id(&self) -> String {
            "likes".into()
        }
        fn prefer(&self, q: &PairQuery<'_>, _: &mut dyn RngCore) -> Result<Choice, OracleError> {
            Ok(if q.first.id == self.0 { Choice::A } else { Choice::B })
        }
    }

    struct Coin;
    impl PreferenceOracle for Coin {
        fn id(&self) -> String {
            "coin".into()
        }
        fn prefer(&self, _: &PairQuery<'_>, rng: &mut dyn RngCore) -> Result<Choice, OracleError> {
            Ok(if rng.random::<bool>() { Choice::A } else { Choice::B })
        }
    }

    struct Broken(bool);
    impl PreferenceOracle for Broken {
        fn id(&self) -> String {
            "broken".into()
        }
        fn prefer(&self, _: &PairQuery<'_>, _: &mut dyn RngCore) -> Result<Choice, OracleError> {
            if self.0 {
                Err(OracleError::Fatal("auth".into()))
            } else {
                Err(OracleError::QueryFailure("nope".into()))
            }
        }
    }

    const A: Candidate<'static> = Candidate { id: 0, text: "a" };
    const B: Candidate<'static> = Candidate { id: 1, text: "b" };

    fn run<O: PreferenceOracle>(o: &O, a: Candidate, b: Candidate, m: u32) -> Result<BalancedOutcome, OracleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        prefer_balanced(o, 0, "p", a, b, m, &mut rng)
    }

    #[test]
    fn position_bias_cancels() {
        let o = run(&FirstPosition, A, B, 1).unwrap();
        assert_eq!((o.wins_a, o.wins_b), (1, 1));
    }

    #[test]
    fn content_preference_counts_twice() {
        let o = run(&Likes(0), A, B, 1).unwrap();
        assert_eq!((o.wins_a, o.wins_b), (2, 0));
        // Labels follow contents under argument swap.
        let s = run(&Likes(0), B, A, 1).unwrap();
        assert_eq!((s.wins_a, s.wins_b), (0, 2));
    }

    #[test]
    fn fair_coin_within_three_sigma() {
        let o = run(&Coin, A, B, 500).unwrap();
        let f = o.wins_a as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&f), "{f}");
        assert_eq!(o.attempted, 1000);
    }

    #[test]
    fn failures_skip_and_fatal_aborts() {
        let o = run(&Broken(false), A, B, 3).unwrap();
        assert_eq!((o.answered(), o.attempted, o.failed), (0, 6, 6));
        assert!(matches!(run(&Broken(true), A, B, 1), Err(OracleError::Fatal(_))));
        assert!(run(&Coin, A, B, 0).is_err());
    }
}
