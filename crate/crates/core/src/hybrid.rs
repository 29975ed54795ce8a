//! Adaptive blend of a non-personalized and a personalized ranking.
//!
//! Per user and round, `score(u, i) = w·rank_np(i) + (1−w)·rank_p(u, i)`
//! with ranks 1 = best and `w = exp(−α·iter)`; the combined score is
//! minimized. Early rounds therefore follow the non-personalized
//! component, later rounds the personalized one.

use serde::{Deserialize, Serialize};

use crate::dataset::UserId;
use crate::error::Error;
use crate::nonpers::NonPersKind;
use crate::pers::{self, PersKind, UserRanking};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Decay rate of the non-personalized weight.
    pub alpha: f64,
    pub np_strategy: NonPersKind,
    pub p_strategy: PersKind,
    /// Blend only over the non-personalized component's top-N items
    /// (intersected with the user's pool); unlimited when absent.
    pub np_shortlist_size: Option<usize>,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            np_strategy: NonPersKind::PopEntropy,
            p_strategy: PersKind::Binary,
            np_shortlist_size: None,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(Error::param("alpha", "must be positive"));
        }
        Ok(())
    }
}

/// `w = exp(−α · iter)` for 1-based rounds; strictly decreasing in both
/// arguments.
pub fn hybrid_weight(iter: usize, alpha: f64) -> Result<f64, Error> {
    if iter < 1 {
        return Err(Error::param("iter", "rounds are 1-based"));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::param("alpha", "must be positive"));
    }
    Ok((-alpha * iter as f64).exp())
}

/// Blends the two per-user rankings at the weight of round `iter`.
pub fn hybrid_rank(
    user: UserId,
    np_ranking: &UserRanking,
    p_ranking: &UserRanking,
    iter: usize,
    alpha: f64,
) -> Result<UserRanking, Error> {
    let w = hybrid_weight(iter, alpha)?;
    Ok(hybrid_rank_weighted(user, np_ranking, p_ranking, w))
}

/// Blend at an explicit weight; `w = 1` reproduces the non-personalized
/// ordering exactly and `w = 0` the personalized one. When the two
/// rankings cover different pools only the intersection is ranked (a
/// warning is logged).
pub fn hybrid_rank_weighted(
    user: UserId,
    np_ranking: &UserRanking,
    p_ranking: &UserRanking,
    w: f64,
) -> UserRanking {
    pers::combine_ranks(user, np_ranking, p_ranking, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ItemId;

    fn ranking_of(ordered: &[u32]) -> UserRanking {
        UserRanking::from_scores_asc(
            UserId(1),
            ordered.iter().enumerate().map(|(p, &i)| (ItemId(i), p as f64)).collect(),
        )
    }

    #[test]
    fn weight_hand_values() {
        let w = hybrid_weight(1, 2.0).unwrap();
        assert!((w - (-2.0f64).exp()).abs() < 1e-15);
        assert!((w - 0.13534).abs() < 1e-5);

        let w5 = hybrid_weight(5, 2.0).unwrap();
        assert!((w5 - (-10.0f64).exp()).abs() < 1e-18);
        assert!((w5 - 4.54e-5).abs() < 1e-6);

        // alpha -> 0+ pushes the weight toward 1 (pure non-personalized).
        assert!(hybrid_weight(1, 1e-12).unwrap() > 0.999_999);
    }

    #[test]
    fn weight_rejects_bad_parameters() {
        assert!(hybrid_weight(0, 2.0).is_err());
        assert!(hybrid_weight(1, 0.0).is_err());
        assert!(hybrid_weight(1, -1.0).is_err());
    }

    #[test]
    fn weight_is_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for iter in 1..=30 {
            let w = hybrid_weight(iter, 2.0).unwrap();
            assert!(w < prev);
            prev = w;
        }
        assert!(hybrid_weight(3, 2.5).unwrap() < hybrid_weight(3, 2.0).unwrap());
    }

    #[test]
    fn boundary_weights_reproduce_the_components() {
        let np = ranking_of(&[4, 1, 3, 2]);
        let p = ranking_of(&[2, 3, 1, 4]);
        let at_one = hybrid_rank_weighted(UserId(1), &np, &p, 1.0);
        assert_eq!(at_one.items().collect::<Vec<_>>(), np.items().collect::<Vec<_>>());
        let at_zero = hybrid_rank_weighted(UserId(1), &np, &p, 0.0);
        assert_eq!(at_zero.items().collect::<Vec<_>>(), p.items().collect::<Vec<_>>());
    }

    #[test]
    fn blend_hand_value() {
        // w=0.5, ranks np (a:1, b:2, c:3), p (a:3, b:1, c:2)
        // -> scores a:2, b:1.5, c:2.5 -> [b, a, c].
        let np = ranking_of(&[1, 2, 3]);
        let p = ranking_of(&[2, 3, 1]);
        let blended = hybrid_rank_weighted(UserId(1), &np, &p, 0.5);
        assert_eq!(
            blended.items().collect::<Vec<_>>(),
            vec![ItemId(2), ItemId(1), ItemId(3)]
        );
        let scores: Vec<f64> = blended.entries().iter().map(|&(_, s)| s).collect();
        assert_eq!(scores, vec![1.5, 2.0, 2.5]);
    }

    #[test]
    fn disagreeing_pools_blend_the_intersection() {
        let np = ranking_of(&[1, 2, 3]);
        let p = ranking_of(&[3, 2, 9]);
        let blended = hybrid_rank_weighted(UserId(1), &np, &p, 0.5);
        let items: Vec<ItemId> = blended.items().collect();
        assert_eq!(items.len(), 2);
        assert!(items.contains(&ItemId(2)) && items.contains(&ItemId(3)));
    }

    #[test]
    fn rank_combination_is_monotone() {
        // Improving an item's rank in one component (other fixed) never
        // worsens its combined score.
        let p = ranking_of(&[1, 2, 3, 4]);
        let worse_np = ranking_of(&[2, 3, 4, 1]); // item 1 at rank 4
        let better_np = ranking_of(&[2, 3, 1, 4]); // item 1 at rank 3
        for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let before = hybrid_rank_weighted(UserId(1), &worse_np, &p, w);
            let after = hybrid_rank_weighted(UserId(1), &better_np, &p, w);
            let score = |r: &UserRanking| {
                r.entries().iter().find(|&&(i, _)| i == ItemId(1)).unwrap().1
            };
            assert!(score(&after) <= score(&before), "w={w}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(HybridConfig::default().validate().is_ok());
        let bad = HybridConfig { alpha: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
