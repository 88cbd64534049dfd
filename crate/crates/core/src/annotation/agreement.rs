//! Inter-annotator agreement: Fleiss' kappa for categorical judgments and
//! ordinal Krippendorff's alpha for ratings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sum after sorting, so permuting the inputs cannot change the float result.
fn stable_sum<R: Real>(mut values: Vec<R>) -> R {
    values.sort_by(|a, b| a.partial_cmp(b).expect("agreement terms are finite"));
    values.into_iter().sum()
}

/// Fleiss' kappa over an items x categories matrix of judgment counts.
///
/// Every row must sum to the same number of judgments `n >= 2`. When all
/// mass sits in a single category the chance denominator vanishes; that case
/// is perfect agreement by construction and returns 1.0.
pub fn fleiss_kappa<R: Real>(counts: &[Vec<usize>]) -> Result<R> {
    let n_items = counts.len();
    if n_items == 0 {
        return Err(Error::EmptyInput("no items".into()));
    }
    let n_categories = counts[0].len();
    if counts.iter().any(|row| row.len() != n_categories) {
        return Err(Error::UnequalRowSums);
    }
    let n: usize = counts[0].iter().sum();
    if n < 2 || counts.iter().any(|row| row.iter().sum::<usize>() != n) {
        return Err(Error::UnequalRowSums);
    }

    let n_r = R::from_usize_lossy(n);
    let per_item: Vec<R> = counts
        .iter()
        .map(|row| {
            let agree: usize = row.iter().map(|&c| c * (c.saturating_sub(1))).sum();
            R::from_usize_lossy(agree) / (n_r * (n_r - R::one()))
        })
        .collect();
    let p_bar = stable_sum(per_item) / R::from_usize_lossy(n_items);

    let column_totals: Vec<usize> = (0..n_categories)
        .map(|c| counts.iter().map(|row| row[c]).sum())
        .collect();
    let grand_total = R::from_usize_lossy(n_items * n);
    let p_e = stable_sum(
        column_totals
            .iter()
            .map(|&t| {
                let p = R::from_usize_lossy(t) / grand_total;
                p * p
            })
            .collect(),
    );

    let used_categories = column_totals.iter().filter(|&&t| t > 0).count();
    if used_categories <= 1 {
        // All judgments in one category: expected agreement is 1.
        return if p_bar >= R::one() - R::from_f64_lossy(1e-12) {
            Ok(R::one())
        } else {
            Err(Error::DegenerateAgreement {
                metric: "fleiss_kappa",
                reason: "expected agreement is 1 but observed agreement is not".to_string(),
            })
        };
    }
    Ok((p_bar - p_e) / (R::one() - p_e))
}

/// Ordinal Krippendorff's alpha over possibly-missing integer ratings.
///
/// `judgments` maps item -> annotator -> rating. Items with fewer than two
/// judgments carry no pairable values and are excluded. The ordinal distance
/// between ratings `c <= k` is `(sum_{g=c}^{k} n_g - (n_c + n_k)/2)^2`, with
/// `n_g` the marginal frequency of rating `g` among pairable values.
pub fn krippendorff_alpha_ordinal<R: Real>(
    judgments: &BTreeMap<String, BTreeMap<String, u32>>,
) -> Result<R> {
    let pairable: Vec<Vec<u32>> = judgments
        .values()
        .filter(|item| item.len() >= 2)
        .map(|item| item.values().copied().collect())
        .collect();
    if pairable.is_empty() {
        return Err(Error::EmptyInput(
            "no item has two or more judgments".into(),
        ));
    }

    let min_rating = *pairable.iter().flatten().min().expect("nonempty") as usize;
    let max_rating = *pairable.iter().flatten().max().expect("nonempty") as usize;
    let width = max_rating - min_rating + 1;
    let idx = |rating: u32| rating as usize - min_rating;

    // Marginal frequencies of pairable values.
    let mut marginals = vec![0usize; width];
    for item in &pairable {
        for &rating in item {
            marginals[idx(rating)] += 1;
        }
    }
    let n_total: usize = marginals.iter().sum();

    // Ordinal squared distance table.
    let mut delta_sq = vec![vec![R::zero(); width]; width];
    for c in 0..width {
        for k in (c + 1)..width {
            let between: usize = marginals[c..=k].iter().sum();
            let d = R::from_usize_lossy(between)
                - (R::from_usize_lossy(marginals[c]) + R::from_usize_lossy(marginals[k]))
                    / R::from_f64_lossy(2.0);
            delta_sq[c][k] = d * d;
            delta_sq[k][c] = d * d;
        }
    }

    // Observed disagreement from the coincidence matrix.
    let mut observed_terms = Vec::new();
    for item in &pairable {
        let m = item.len();
        let mut item_counts = vec![0usize; width];
        for &rating in item {
            item_counts[idx(rating)] += 1;
        }
        let denom = R::from_usize_lossy(m - 1);
        for c in 0..width {
            for k in 0..width {
                if c == k || item_counts[c] == 0 || item_counts[k] == 0 {
                    continue;
                }
                let pairs = R::from_usize_lossy(item_counts[c] * item_counts[k]);
                observed_terms.push(pairs / denom * delta_sq[c][k]);
            }
        }
    }
    let d_observed = stable_sum(observed_terms);

    // Expected disagreement from the marginals.
    let mut expected_terms = Vec::new();
    for c in 0..width {
        for k in 0..width {
            if c == k {
                continue;
            }
            expected_terms.push(R::from_usize_lossy(marginals[c] * marginals[k]) * delta_sq[c][k]);
        }
    }
    let d_expected = stable_sum(expected_terms) / R::from_usize_lossy(n_total - 1);

    if d_expected == R::zero() {
        return if d_observed == R::zero() {
            Ok(R::one())
        } else {
            Err(Error::DegenerateAgreement {
                metric: "krippendorff_alpha_ordinal",
                reason: "expected disagreement is zero but observed is not".to_string(),
            })
        };
    }
    Ok(R::one() - d_observed / d_expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judgment_map(items: &[&[(&str, u32)]]) -> BTreeMap<String, BTreeMap<String, u32>> {
        items
            .iter()
            .enumerate()
            .map(|(i, ratings)| {
                (
                    format!("item{i}"),
                    ratings.iter().map(|(a, r)| (a.to_string(), *r)).collect(),
                )
            })
            .collect()
    }

    /// Fleiss' kappa straight from the definition, kept separate from the
    /// implementation on purpose.
    fn oracle_fleiss(counts: &[Vec<usize>]) -> f64 {
        let n: usize = counts[0].iter().sum();
        let n_items = counts.len() as f64;
        let nf = n as f64;
        let p_bar: f64 = counts
            .iter()
            .map(|row| {
                row.iter().map(|&c| (c * c) as f64 - c as f64).sum::<f64>() / (nf * (nf - 1.0))
            })
            .sum::<f64>()
            / n_items;
        let total = n_items * nf;
        let p_e: f64 = (0..counts[0].len())
            .map(|c| {
                let col: usize = counts.iter().map(|row| row[c]).sum();
                (col as f64 / total).powi(2)
            })
            .sum();
        (p_bar - p_e) / (1.0 - p_e)
    }

    /// Ordinal alpha by enumerating every pairable pair directly.
    fn oracle_alpha_ordinal(judgments: &BTreeMap<String, BTreeMap<String, u32>>) -> f64 {
        let items: Vec<Vec<u32>> = judgments
            .values()
            .filter(|m| m.len() >= 2)
            .map(|m| m.values().copied().collect())
            .collect();
        let values: Vec<u32> = items.iter().flatten().copied().collect();
        let n = values.len() as f64;
        let lo = *values.iter().min().unwrap();
        let hi = *values.iter().max().unwrap();
        let marginal = |g: u32| values.iter().filter(|&&v| v == g).count() as f64;
        let delta_sq = |a: u32, b: u32| {
            let (c, k) = if a <= b { (a, b) } else { (b, a) };
            let between: f64 = (c..=k).map(marginal).sum();
            let d = between - (marginal(c) + marginal(k)) / 2.0;
            d * d
        };
        let mut d_o = 0.0;
        for item in &items {
            let m = item.len();
            for j in 0..m {
                for j2 in 0..m {
                    if j != j2 {
                        d_o += delta_sq(item[j], item[j2]) / (m as f64 - 1.0);
                    }
                }
            }
        }
        d_o /= n;
        let mut d_e = 0.0;
        for a in lo..=hi {
            for b in lo..=hi {
                if a != b {
                    d_e += marginal(a) * marginal(b) * delta_sq(a, b);
                }
            }
        }
        d_e /= n * (n - 1.0);
        1.0 - d_o / d_e
    }

    #[test]
    fn per_row_unanimity_is_perfect() {
        // Every row fully agrees, in different categories.
        let counts = vec![vec![3, 0], vec![0, 3], vec![3, 0]];
        let kappa: f64 = fleiss_kappa(&counts).unwrap();
        assert_eq!(kappa, 1.0);
    }

    #[test]
    fn two_opposed_unanimous_rows_are_perfect() {
        let counts = vec![vec![3, 0], vec![0, 3]];
        let kappa: f64 = fleiss_kappa(&counts).unwrap();
        assert_eq!(kappa, 1.0);
    }

    #[test]
    fn mixed_rows_match_definitional_oracle() {
        let counts = vec![vec![2, 1], vec![1, 2], vec![3, 0], vec![0, 3]];
        let kappa: f64 = fleiss_kappa(&counts).unwrap();
        assert!((kappa - oracle_fleiss(&counts)).abs() < 1e-12);
    }

    #[test]
    fn single_category_returns_one() {
        let counts = vec![vec![3, 0], vec![3, 0]];
        let kappa: f64 = fleiss_kappa(&counts).unwrap();
        assert_eq!(kappa, 1.0);
    }

    #[test]
    fn unequal_row_sums_are_rejected() {
        let counts = vec![vec![2, 1], vec![2, 2]];
        assert!(fleiss_kappa::<f64>(&counts).is_err());
    }

    #[test]
    fn kappa_invariant_under_row_and_column_permutation() {
        let counts = vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 1, 1], vec![3, 0, 0]];
        let base: f64 = fleiss_kappa(&counts).unwrap();
        // Permute rows.
        let rows = vec![
            counts[3].clone(),
            counts[1].clone(),
            counts[0].clone(),
            counts[2].clone(),
        ];
        assert_eq!(base, fleiss_kappa::<f64>(&rows).unwrap());
        // Permute columns (2, 0, 1).
        let cols: Vec<Vec<usize>> = counts
            .iter()
            .map(|row| vec![row[2], row[0], row[1]])
            .collect();
        assert_eq!(base, fleiss_kappa::<f64>(&cols).unwrap());
    }

    #[test]
    fn identical_ratings_per_item_give_alpha_one() {
        let judgments = judgment_map(&[
            &[("x", 1), ("y", 1), ("z", 1)],
            &[("x", 4), ("y", 4)],
            &[("x", 2), ("y", 2), ("z", 2)],
        ]);
        let alpha: f64 = krippendorff_alpha_ordinal(&judgments).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn permuted_identical_vectors_give_alpha_one() {
        // Two annotators, ratings 1..5 over 5 items, identical per item.
        let judgments = judgment_map(&[
            &[("x", 3), ("y", 3)],
            &[("x", 1), ("y", 1)],
            &[("x", 5), ("y", 5)],
            &[("x", 2), ("y", 2)],
            &[("x", 4), ("y", 4)],
        ]);
        let alpha: f64 = krippendorff_alpha_ordinal(&judgments).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn planted_disagreements_match_brute_force() {
        let judgments = judgment_map(&[
            &[("x", 1), ("y", 1), ("z", 2)],
            &[("x", 2), ("y", 3), ("z", 3)],
            &[("x", 5), ("y", 5), ("z", 4)],
            &[("x", 1), ("y", 2)],
            &[("x", 4), ("y", 4), ("z", 4)],
            &[("x", 3), ("y", 2), ("z", 5)],
        ]);
        let alpha: f64 = krippendorff_alpha_ordinal(&judgments).unwrap();
        let oracle = oracle_alpha_ordinal(&judgments);
        assert!(
            (alpha - oracle).abs() < 1e-12,
            "alpha {alpha} vs oracle {oracle}"
        );
    }

    #[test]
    fn single_judgment_items_are_excluded() {
        let mut judgments = judgment_map(&[&[("x", 1), ("y", 1)], &[("x", 3), ("y", 3)]]);
        let with_single = {
            judgments.insert(
                "lonely".to_string(),
                [("x".to_string(), 5u32)].into_iter().collect(),
            );
            judgments
        };
        let alpha: f64 = krippendorff_alpha_ordinal(&with_single).unwrap();
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn annotator_relabeling_is_invariant() {
        let a = judgment_map(&[
            &[("x", 1), ("y", 2), ("z", 2)],
            &[("x", 4), ("y", 4), ("z", 5)],
            &[("x", 3), ("y", 3)],
        ]);
        let b = judgment_map(&[
            &[("u", 1), ("v", 2), ("w", 2)],
            &[("u", 4), ("v", 4), ("w", 5)],
            &[("u", 3), ("v", 3)],
        ]);
        let alpha_a: f64 = krippendorff_alpha_ordinal(&a).unwrap();
        let alpha_b: f64 = krippendorff_alpha_ordinal(&b).unwrap();
        assert_eq!(alpha_a, alpha_b);
    }

    #[test]
    fn appended_disagreement_strictly_lowers_alpha() {
        let agreeing = judgment_map(&[
            &[("x", 1), ("y", 1)],
            &[("x", 4), ("y", 4)],
            &[("x", 3), ("y", 3)],
        ]);
        let mut with_noise = agreeing.clone();
        with_noise.insert(
            "noisy".to_string(),
            [("x".to_string(), 1u32), ("y".to_string(), 5u32)]
                .into_iter()
                .collect(),
        );
        let clean: f64 = krippendorff_alpha_ordinal(&agreeing).unwrap();
        let noisy: f64 = krippendorff_alpha_ordinal(&with_noise).unwrap();
        assert_eq!(clean, 1.0);
        assert!(noisy < clean);
    }

    #[test]
    fn no_pairable_values_is_rejected() {
        let judgments = judgment_map(&[&[("x", 2)], &[("y", 3)]]);
        assert!(krippendorff_alpha_ordinal::<f64>(&judgments).is_err());
    }
}
