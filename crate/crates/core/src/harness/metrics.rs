//! Evaluation metrics for selection quality.

use crate::error::{Error, Result};
use crate::selection::{minmax_normalize, ScoreReport};

/// Mean squared error between true and estimated treatment effects.
pub fn pehe(cate_hat: &[f64], cate_true: &[f64]) -> Result<f64> {
    if cate_hat.len() != cate_true.len() {
        return Err(Error::LengthMismatch { left: cate_hat.len(), right: cate_true.len() });
    }
    if cate_hat.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(cate_hat
        .iter()
        .zip(cate_true)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / cate_hat.len() as f64)
}

fn rank_order(reports: &[ScoreReport]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by_key(|&i| reports[i].rank);
    order
}

/// Mean true PEHE of the top `max(1, floor(0.1 N))` ranked models.
/// `true_pehe[i]` belongs to `reports[i]`. With `normalize` set, true PEHEs
/// are min-max normalized across the whole candidate set first.
pub fn pehe_top_decile(
    reports: &[ScoreReport],
    true_pehe: &[f64],
    normalize: bool,
) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::EmptyInput);
    }
    if reports.len() != true_pehe.len() {
        return Err(Error::LengthMismatch { left: reports.len(), right: true_pehe.len() });
    }
    let values = if normalize { minmax_normalize(true_pehe)? } else { true_pehe.to_vec() };
    let k = 1.max(reports.len() / 10);
    let order = rank_order(reports);
    Ok(order[..k].iter().map(|&i| values[i]).sum::<f64>() / k as f64)
}

/// Fraction of model pairs the ranking orders contrary to their true PEHE,
/// scaled by the maximum `n(n-1)/2`. Ties in true PEHE count as concordant.
pub fn inversion_count_normalized(reports: &[ScoreReport], true_pehe: &[f64]) -> Result<f64> {
    let n = reports.len();
    if n < 2 {
        return Err(Error::TooFewModels(n));
    }
    if n != true_pehe.len() {
        return Err(Error::LengthMismatch { left: n, right: true_pehe.len() });
    }
    let order = rank_order(reports);
    let mut inversions = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if true_pehe[order[i]] > true_pehe[order[j]] {
                inversions += 1;
            }
        }
    }
    Ok(inversions as f64 / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reports_in_order(n: usize) -> Vec<ScoreReport> {
        (0..n)
            .map(|i| ScoreReport {
                model_id: format!("m{i}"),
                v_r_raw: 0.0,
                c_r_raw: 0.0,
                v_r_norm: 0.0,
                c_r_norm: 0.0,
                lambda: 1.0,
                icms: i as f64,
                rank: i + 1,
                true_pehe: None,
            })
            .collect()
    }

    #[test]
    fn pehe_examples() {
        let t = [1.0, -0.5, 2.0];
        assert_eq!(pehe(&t, &t).unwrap(), 0.0);
        let off: Vec<f64> = t.iter().map(|v| v + 0.5).collect();
        assert_abs_diff_eq!(pehe(&off, &t).unwrap(), 0.25, epsilon = 1e-12);
        assert!(matches!(pehe(&t, &[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn pehe_matches_brute_force_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = vec![0.0; 257];
        let mut b = vec![0.0; 257];
        for i in 0..257 {
            a[i] = (i as f64 * 0.37).sin() * 3.0;
            b[i] = (i as f64 * 0.11).cos() * 2.0;
        }
        a.shuffle(&mut rng);
        let mut acc = 0.0;
        for i in 0..a.len() {
            acc += (a[i] - b[i]) * (a[i] - b[i]);
        }
        assert_abs_diff_eq!(pehe(&a, &b).unwrap(), acc / a.len() as f64, epsilon = 1e-12);
    }

    #[test]
    fn top_decile_k_selection() {
        for (n, k) in [(5usize, 1usize), (10, 1), (25, 2), (30, 3)] {
            let reports = reports_in_order(n);
            let true_pehe: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let got = pehe_top_decile(&reports, &true_pehe, false).unwrap();
            let want = (0..k).map(|i| i as f64).sum::<f64>() / k as f64;
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn top_decile_perfect_ranking_is_minimum() {
        let n = 25;
        let reports = reports_in_order(n);
        let true_pehe: Vec<f64> = (0..n).map(|i| (i as f64).powi(2) * 0.3).collect();
        let got = pehe_top_decile(&reports, &true_pehe, true).unwrap();
        // brute-force best-k mean over normalized values
        let norm = minmax_normalize(&true_pehe).unwrap();
        let mut sorted = norm.clone();
        sorted.sort_by(f64::total_cmp);
        let want = (sorted[0] + sorted[1]) / 2.0;
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn inversion_examples() {
        let reports = reports_in_order(3);
        assert_eq!(inversion_count_normalized(&reports, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(inversion_count_normalized(&reports, &[3.0, 2.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            inversion_count_normalized(&reports, &[2.0, 1.0, 3.0]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
        // ties count as concordant
        assert_eq!(inversion_count_normalized(&reports, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            inversion_count_normalized(&reports_in_order(1), &[0.0]),
            Err(Error::TooFewModels(1))
        ));
    }

    #[test]
    fn random_ranking_calibration() {
        // mean normalized PEHE-10 of random rankings approximates the mean
        // normalized PEHE of the whole zoo
        let n = 24;
        let true_pehe: Vec<f64> = (0..n).map(|i| ((i * 37) % 17) as f64).collect();
        let norm = minmax_normalize(&true_pehe).unwrap();
        let zoo_mean = norm.iter().sum::<f64>() / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut acc = 0.0;
        let shuffles = 500;
        for _ in 0..shuffles {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut reports = reports_in_order(n);
            for (pos, &i) in order.iter().enumerate() {
                reports[i].rank = pos + 1;
            }
            acc += pehe_top_decile(&reports, &true_pehe, true).unwrap();
        }
        let avg = acc / shuffles as f64;
        assert!((avg - zoo_mean).abs() < 0.05, "avg {avg} vs zoo mean {zoo_mean}");
    }
}
