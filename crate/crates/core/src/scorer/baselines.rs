//! The three target-independent baselines: fold-average, sentence-length
//! linear regression, and bag-of-words ridge regression.

use std::collections::BTreeMap;

use crate::corpus::SentenceRecord;
use crate::error::{data_err, numeric_err, Result};
use crate::linalg::{cholesky_solve, Mat};

/// Always predicts the training-fold mean.
#[derive(Clone, Debug)]
pub struct AvgBaseline {
    pub mean: f64,
}

pub fn fit_baseline_avg(scores: &[f64]) -> Result<AvgBaseline> {
    if scores.is_empty() {
        return data_err("avg baseline: empty fold");
    }
    Ok(AvgBaseline {
        mean: scores.iter().sum::<f64>() / scores.len() as f64,
    })
}

impl AvgBaseline {
    pub fn predict(&self) -> f64 {
        self.mean
    }
}

/// Ordinary least squares on token count.
#[derive(Clone, Debug)]
pub struct LengthBaseline {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_baseline_length(data: &[(usize, f64)]) -> Result<LengthBaseline> {
    if data.len() < 2 {
        return data_err("length baseline: need at least 2 examples");
    }
    let n = data.len() as f64;
    let mx = data.iter().map(|(l, _)| *l as f64).sum::<f64>() / n;
    let my = data.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (l, y) in data {
        let dx = *l as f64 - mx;
        sxx += dx * dx;
        sxy += dx * (y - my);
    }
    if sxx == 0.0 {
        return numeric_err("length baseline: all sentences have the same length");
    }
    let slope = sxy / sxx;
    Ok(LengthBaseline {
        slope,
        intercept: my - slope * mx,
    })
}

impl LengthBaseline {
    pub fn predict(&self, token_count: usize) -> f64 {
        self.slope * token_count as f64 + self.intercept
    }
}

/// Ridge regression over context-word counts (target token excluded),
/// restricted to words appearing more than `min_count` times in the training
/// data. Fit on centered features with an unpenalized intercept.
#[derive(Clone, Debug)]
pub struct BowBaseline {
    pub vocab: BTreeMap<String, usize>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub feature_means: Vec<f64>,
}

fn context_tokens(sentence: &SentenceRecord) -> impl Iterator<Item = &String> {
    sentence
        .tokens
        .iter()
        .enumerate()
        .filter(move |(i, _)| Some(*i) != sentence.target_pos)
        .map(|(_, t)| t)
}

pub fn fit_baseline_bow(
    sentences: &[SentenceRecord],
    scores: &[f64],
    min_count: usize,
    ridge_alpha: f64,
) -> Result<BowBaseline> {
    if sentences.len() != scores.len() || sentences.is_empty() {
        return data_err("bow baseline: sentences and scores must match and be non-empty");
    }
    if ridge_alpha < 0.0 {
        return data_err("bow baseline: negative ridge alpha");
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in sentences {
        for tok in context_tokens(s) {
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let vocab: BTreeMap<String, usize> = counts
        .into_iter()
        .filter(|(_, c)| *c > min_count)
        .enumerate()
        .map(|(i, (w, _))| (w.to_string(), i))
        .collect();
    if vocab.is_empty() {
        return data_err(format!(
            "bow baseline: no word appears more than {min_count} times"
        ));
    }
    let p = vocab.len();
    let n = sentences.len();
    let mut x = Mat::zeros(n, p);
    for (r, s) in sentences.iter().enumerate() {
        for tok in context_tokens(s) {
            if let Some(&f) = vocab.get(tok.as_str()) {
                *x.at_mut(r, f) += 1.0;
            }
        }
    }
    let mut feature_means = vec![0.0; p];
    for f in 0..p {
        feature_means[f] = (0..n).map(|r| x.at(r, f)).sum::<f64>() / n as f64;
    }
    let y_mean = scores.iter().sum::<f64>() / n as f64;

    // Normal equations on centered data: (XcᵀXc + αI) β = Xcᵀ yc.
    let mut gram = Mat::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut s = 0.0;
            for r in 0..n {
                s += (x.at(r, a) - feature_means[a]) * (x.at(r, b) - feature_means[b]);
            }
            if a == b {
                s += ridge_alpha;
            }
            *gram.at_mut(a, b) = s;
            *gram.at_mut(b, a) = s;
        }
    }
    let mut xty = vec![0.0; p];
    for f in 0..p {
        for r in 0..n {
            xty[f] += (x.at(r, f) - feature_means[f]) * (scores[r] - y_mean);
        }
    }
    let beta = cholesky_solve(&gram, &xty)?;
    Ok(BowBaseline {
        vocab,
        beta,
        intercept: y_mean,
        feature_means,
    })
}

impl BowBaseline {
    pub fn predict(&self, sentence: &SentenceRecord) -> f64 {
        let mut counts = vec![0.0; self.vocab.len()];
        for tok in context_tokens(sentence) {
            if let Some(&f) = self.vocab.get(tok.as_str()) {
                counts[f] += 1.0;
            }
        }
        let mut y = self.intercept;
        for f in 0..counts.len() {
            y += self.beta[f] * (counts[f] - self.feature_means[f]);
        }
        y
    }

    /// Residual of the (centered) normal equations for this solution.
    pub fn normal_equation_residual(
        &self,
        sentences: &[SentenceRecord],
        scores: &[f64],
        ridge_alpha: f64,
    ) -> f64 {
        let p = self.vocab.len();
        let n = sentences.len();
        let mut x = Mat::zeros(n, p);
        for (r, s) in sentences.iter().enumerate() {
            for tok in context_tokens(s) {
                if let Some(&f) = self.vocab.get(tok.as_str()) {
                    *x.at_mut(r, f) += 1.0;
                }
            }
        }
        let y_mean = scores.iter().sum::<f64>() / n as f64;
        let mut worst: f64 = 0.0;
        for a in 0..p {
            let mut lhs = ridge_alpha * self.beta[a];
            let mut rhs = 0.0;
            for r in 0..n {
                let xa = x.at(r, a) - self.feature_means[a];
                let mut xb_beta = 0.0;
                for b in 0..p {
                    xb_beta += (x.at(r, b) - self.feature_means[b]) * self.beta[b];
                }
                lhs += xa * xb_beta;
                rhs += xa * (scores[r] - y_mean);
            }
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn avg_is_the_mean() {
        assert_eq!(fit_baseline_avg(&[0.0, 1.0]).unwrap().predict(), 0.5);
        assert!(fit_baseline_avg(&[]).is_err());
    }

    #[test]
    fn avg_rmse_is_population_std() {
        let scores = [0.1, 0.4, 0.9, 0.7, 0.2];
        let avg = fit_baseline_avg(&scores).unwrap();
        let preds = vec![avg.predict(); scores.len()];
        let rmse = crate::eval::rmse(&preds, &scores).unwrap();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;
        assert!((rmse - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn length_recovers_exact_linear_data() {
        let data: Vec<(usize, f64)> = (5..15).map(|l| (l, 0.3 * l as f64 - 1.0)).collect();
        let model = fit_baseline_length(&data).unwrap();
        assert!((model.slope - 0.3).abs() < 1e-12);
        assert!((model.intercept + 1.0).abs() < 1e-12);
        assert!(fit_baseline_length(&[(7, 0.1), (7, 0.9)]).is_err());
    }

    #[test]
    fn length_matches_normal_equation_oracle_on_random_data() {
        use crate::rng::Xoshiro256StarStar;
        let mut rng = Xoshiro256StarStar::seed_from_u64(12);
        for _ in 0..50 {
            let n = 5 + rng.gen_below(30) as usize;
            let data: Vec<(usize, f64)> = (0..n)
                .map(|_| (5 + rng.gen_below(25) as usize, rng.uniform(-2.0, 2.0)))
                .collect();
            if data.iter().all(|(l, _)| *l == data[0].0) {
                continue;
            }
            // Oracle: solve the 2×2 normal equations [[n, Σx],[Σx, Σx²]] directly.
            let nf = n as f64;
            let sx: f64 = data.iter().map(|(l, _)| *l as f64).sum();
            let sxx: f64 = data.iter().map(|(l, _)| (*l as f64) * (*l as f64)).sum();
            let sy: f64 = data.iter().map(|(_, y)| *y).sum();
            let sxy: f64 = data.iter().map(|(l, y)| *l as f64 * y).sum();
            let det = nf * sxx - sx * sx;
            let intercept = (sxx * sy - sx * sxy) / det;
            let slope = (nf * sxy - sx * sy) / det;
            let model = fit_baseline_length(&data).unwrap();
            assert!((model.slope - slope).abs() < 1e-8);
            assert!((model.intercept - intercept).abs() < 1e-8);
        }
    }

    fn plain_sentence(id: u32, text: &str) -> SentenceRecord {
        SentenceRecord::new(id, tokenize(text), 0)
    }

    #[test]
    fn bow_huge_alpha_collapses_to_intercept() {
        let sentences: Vec<SentenceRecord> = (0..6)
            .map(|i| plain_sentence(i, if i % 2 == 0 { "red red apple" } else { "blue sky" }))
            .collect();
        let scores = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let model = fit_baseline_bow(&sentences, &scores, 0, 1e12).unwrap();
        let mean = 0.5;
        for s in &sentences {
            assert!((model.predict(s) - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn bow_single_perfect_feature_exact_fit() {
        // Score equals the count of "cue"; alpha = 0 recovers it exactly.
        // The one-off pad words fall below min_count, leaving one feature.
        let sentences: Vec<SentenceRecord> = (0..5)
            .map(|i| {
                let cues = "cue ".repeat(i as usize + 1);
                plain_sentence(i, &format!("{cues}pad{i}"))
            })
            .collect();
        let scores: Vec<f64> = (0..5).map(|i| (i + 1) as f64).collect();
        let model = fit_baseline_bow(&sentences, &scores, 2, 0.0).unwrap();
        assert_eq!(model.vocab.len(), 1);
        for (s, y) in sentences.iter().zip(&scores) {
            assert!((model.predict(s) - y).abs() < 1e-8);
        }
    }

    #[test]
    fn bow_excludes_target_token_and_rare_words() {
        let mut s = plain_sentence(0, "cue cue target filler");
        s.target_pos = Some(2);
        s.target_word = Some("target".into());
        let sentences = vec![
            s,
            plain_sentence(1, "cue filler pad"),
            plain_sentence(2, "filler cue pad"),
        ];
        let scores = [1.0, 0.5, 0.4];
        let model = fit_baseline_bow(&sentences, &scores, 1, 1.0).unwrap();
        // Words with corpus count > 1 (cue appears 4 times, filler 3, pad 2).
        assert!(model.vocab.contains_key("cue"));
        assert!(!model.vocab.contains_key("target"));
    }
}
