use serde::{Deserialize, Serialize};

use super::{encode_pairwise, BanditError, ContextVector, ItemFeatures, LinUcbModel};

/// Outcome of choosing between the two presented items.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleepingChoice {
    /// 0 for the first presented item, 1 for the second.
    pub chosen: usize,
    /// UCB scores of "first preferred" and "second preferred".
    pub scores: [f64; 2],
}

/// Chooses one item of a presented pair.
///
/// Each item is scored by the UCB of the pairwise encoding that puts it
/// first. The two encodings are exact negations, so their exploration
/// widths coincide and the decision reduces to the sign of `theta^T psi`.
/// Exact ties go to the first presented item.
pub fn select_sleeping(
    model: &LinUcbModel,
    context: &ContextVector,
    pair: (&ItemFeatures, &ItemFeatures),
) -> Result<SleepingChoice, BanditError> {
    let psi = encode_pairwise(context, pair.0, pair.1)?;
    let mean = model.mean(&psi)?;
    let bonus = model.alpha() * model.width(&psi)?;
    let scores = [mean + bonus, -mean + bonus];
    let chosen = usize::from(scores[1] > scores[0]);
    Ok(SleepingChoice { chosen, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ContextVector, ItemFeatures, ItemFeatures) {
        (
            ContextVector::new(vec![1.0, 0.5]),
            ItemFeatures::new(vec![0.9, 0.0, 1.0]),
            ItemFeatures::new(vec![0.1, 1.0, 0.0]),
        )
    }

    #[test]
    fn fresh_model_picks_first() {
        let (phi, a, b) = setup();
        let m = LinUcbModel::new(6, 10.0, 1.0).unwrap();
        let c = select_sleeping(&m, &phi, (&a, &b)).unwrap();
        assert_eq!(c.chosen, 0);
        assert_eq!(c.scores[0], c.scores[1]);
        assert_eq!(select_sleeping(&m, &phi, (&a, &a)).unwrap().chosen, 0);
    }

    #[test]
    fn learned_preference_follows_the_item() {
        let (phi, a, b) = setup();
        let mut m = LinUcbModel::new(6, 0.0, 1.0).unwrap();
        let psi = encode_pairwise(&phi, &a, &b).unwrap();
        m.update(&psi, 1.0).unwrap();
        assert_eq!(select_sleeping(&m, &phi, (&a, &b)).unwrap().chosen, 0);
        assert_eq!(select_sleeping(&m, &phi, (&b, &a)).unwrap().chosen, 1);
        // Identical items tie regardless of theta.
        assert_eq!(select_sleeping(&m, &phi, (&b, &b)).unwrap().chosen, 0);
    }

    #[test]
    fn dimension_checked() {
        let (phi, a, b) = setup();
        let m = LinUcbModel::new(5, 1.0, 1.0).unwrap();
        assert!(matches!(
            select_sleeping(&m, &phi, (&a, &b)),
            Err(BanditError::Shape { .. })
        ));
    }
}
