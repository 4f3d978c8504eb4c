use super::{BanditError, ContextVector, FeatureVector, ItemFeatures};

/// Block one-hot joint encoding: the context is copied into block `arm` of a
/// `num_arms * c` vector, so each arm owns an independent parameter block.
pub fn encode_context_arm(
    context: &ContextVector,
    arm: usize,
    num_arms: usize,
) -> Result<FeatureVector, BanditError> {
    if arm >= num_arms {
        return Err(BanditError::Usage(format!(
            "arm {arm} out of range for {num_arms} arms"
        )));
    }
    let c = context.dim();
    let mut out = vec![0.0; c * num_arms];
    out[arm * c..(arm + 1) * c].copy_from_slice(context.as_slice());
    Ok(FeatureVector(out))
}

/// Row-major flattening of `context * (first - second)^T`.
///
/// Antisymmetric in the items: swapping them negates every entry exactly.
pub fn encode_pairwise(
    context: &ContextVector,
    first: &ItemFeatures,
    second: &ItemFeatures,
) -> Result<FeatureVector, BanditError> {
    if first.dim() != second.dim() {
        return Err(BanditError::Shape {
            expected: first.dim(),
            got: second.dim(),
        });
    }
    let diff: Vec<f64> = first
        .as_slice()
        .iter()
        .zip(second.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let mut out = Vec::with_capacity(context.dim() * diff.len());
    for &phi in context.as_slice() {
        out.extend(diff.iter().map(|d| phi * d));
    }
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn context_arm_blocks() {
        let phi = ContextVector::new(vec![1.0, 2.0]);
        assert_eq!(encode_context_arm(&phi, 0, 2).unwrap().0, vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(encode_context_arm(&phi, 1, 2).unwrap().0, vec![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(encode_context_arm(&phi, 0, 1).unwrap().0, phi.0);
        assert!(matches!(
            encode_context_arm(&phi, 2, 2),
            Err(BanditError::Usage(_))
        ));
    }

    #[test]
    fn pairwise_outer_product() {
        let phi = ContextVector::new(vec![1.0, 2.0]);
        let a = ItemFeatures::new(vec![3.0, 0.0]);
        let b = ItemFeatures::new(vec![0.0, 1.0]);
        assert_eq!(
            encode_pairwise(&phi, &a, &b).unwrap().0,
            vec![3.0, -1.0, 6.0, -2.0]
        );
        assert!(encode_pairwise(&phi, &a, &a).unwrap().0.iter().all(|v| *v == 0.0));
        let short = ItemFeatures::new(vec![1.0]);
        assert!(matches!(
            encode_pairwise(&phi, &a, &short),
            Err(BanditError::Shape { .. })
        ));
    }

    proptest! {
        #[test]
        fn pairwise_is_antisymmetric(
            phi in prop::collection::vec(-5.0f64..5.0, 1..6),
            ab in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8),
        ) {
            let phi = ContextVector::new(phi);
            let a = ItemFeatures::new(ab.iter().map(|p| p.0).collect());
            let b = ItemFeatures::new(ab.iter().map(|p| p.1).collect());
            let fwd = encode_pairwise(&phi, &a, &b).unwrap();
            let rev = encode_pairwise(&phi, &b, &a).unwrap();
            prop_assert_eq!(fwd.dim(), phi.dim() * a.dim());
            prop_assert_eq!(-&fwd, rev);
        }
    }
}
