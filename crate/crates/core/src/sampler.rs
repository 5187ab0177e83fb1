//! Bootstrap draws from a fitted D-vine by inverse Rosenblatt transformation.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::bicop::clamp_unit;
use crate::dvine::DVineModel;
use crate::error::{Error, Result};
use crate::marginals::{inverse_empirical, PseudoSample};
use crate::rng::RngStream;

/// Rows per independently seeded block. Fixed so that output does not depend
/// on the number of worker threads.
const BLOCK: usize = 4096;

/// Uniform draw on the open interval (0, 1).
#[inline]
pub(crate) fn open_uniform<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Scratch space for one row: `left[j][i]` and `right[j][i]` hold the
/// arguments of edge `i` in tree `j + 1`.
struct Cascade {
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

impl Cascade {
    fn new(model: &DVineModel) -> Self {
        let p = model.p();
        let m = model.m_trunc();
        Cascade { left: vec![vec![0.0; p]; m], right: vec![vec![0.0; p]; m] }
    }

    /// Maps independent uniforms `v` to a draw from the vine, in place.
    fn transform(&mut self, model: &DVineModel, v: &mut [f64]) -> Result<()> {
        let p = model.p();
        let m = model.m_trunc();
        let trees = model.trees();
        v[0] = clamp_unit(v[0]);
        self.left[0][0] = v[0];
        for k in 1..p {
            let depth = k.min(m);
            let mut z = v[k];
            for j in (1..=depth).rev() {
                let i = k - j;
                z = trees[j - 1][i].copula.h1_inv(z, self.left[j - 1][i])?;
                self.right[j - 1][i] = z;
            }
            v[k] = z;
            if k + 1 < p {
                self.left[0][k] = z;
                for j in 1..=k.min(m - 1) {
                    let i = k - j;
                    let pair = &trees[j - 1][i].copula;
                    self.left[j][i] = clamp_unit(pair.h2(self.left[j - 1][i], self.right[j - 1][i]));
                }
            }
        }
        Ok(())
    }
}

/// Draws `m` rows from the vine on the copula scale.
pub fn sample_uniform_vine(model: &DVineModel, m: usize, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let p = model.p();
    let blocks = m.div_ceil(BLOCK);
    let parts: Vec<Result<Vec<Vec<f64>>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK.min(m - b * BLOCK);
            let mut gen = rng.substream(b as u64).rng();
            let mut cascade = Cascade::new(model);
            let mut out = Vec::with_capacity(rows);
            for r in 0..rows {
                let mut v: Vec<f64> = (0..p).map(|_| open_uniform(&mut gen)).collect();
                cascade
                    .transform(model, &mut v)
                    .map_err(|e| e.context(format!("row {}", b * BLOCK + r + 1)))?;
                out.push(v);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(m);
    for part in parts {
        all.extend(part?);
    }
    Ok(all)
}

/// Draws `m` rows on the data scale by pushing vine draws through the inverse
/// empirical marginals of `marginals`.
pub fn sample_data(
    model: &DVineModel,
    marginals: &PseudoSample,
    m: usize,
    rng: RngStream,
) -> Result<Vec<Vec<f64>>> {
    if marginals.p() != model.p() {
        return Err(Error::DimensionMismatch { expected: model.p(), got: marginals.p() });
    }
    let mut rows = sample_uniform_vine(model, m, rng)?;
    for row in rows.iter_mut() {
        for (x, col) in row.iter_mut().zip(marginals.sorted_columns()) {
            *x = inverse_empirical(col, *x)?;
        }
    }
    Ok(rows)
}

/// Independent column bootstrap: each coordinate resampled with replacement
/// from its own column.
pub fn sample_independent(columns: &[Vec<f64>], m: usize, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    if let Some(j) = columns.iter().position(|c| c.is_empty()) {
        return Err(Error::InvalidInput(format!("column {} is empty", j + 1)));
    }
    let blocks = m.div_ceil(BLOCK);
    let parts: Vec<Vec<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK.min(m - b * BLOCK);
            let mut gen = rng.substream(b as u64).rng();
            (0..rows)
                .map(|_| columns.iter().map(|c| c[gen.random_range(0..c.len())]).collect())
                .collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::{Family, PairCopula};
    use crate::marginals::pseudo_observations;
    use crate::math::{kendall_tau, norm_quantile};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Asymptotic Kolmogorov distribution survival function.
    pub(crate) fn ks_pvalue(d: f64, n: usize) -> f64 {
        let sn = (n as f64).sqrt();
        let lambda = (sn + 0.12 + 0.11 / sn) * d;
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            sum += 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        }
        sum.clamp(0.0, 1.0)
    }

    pub(crate) fn ks_uniform(sample: &mut [f64]) -> f64 {
        sample.sort_by(f64::total_cmp);
        let n = sample.len() as f64;
        let d = sample
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
            .fold(0.0, f64::max);
        ks_pvalue(d, sample.len())
    }

    fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
        rows.iter().map(|r| r[j]).collect()
    }

    #[test]
    fn independence_vine_gives_uniform_coordinates() {
        let model = DVineModel::independence(4).unwrap();
        let rows = sample_uniform_vine(&model, 100_000, RngStream::new(1)).unwrap();
        for j in 0..4 {
            let p = ks_uniform(&mut column(&rows, j));
            assert!(p > 0.01, "coordinate {j}: KS p = {p}");
        }
        let t = kendall_tau(&column(&rows, 0), &column(&rows, 1));
        assert!(t.abs() < 0.01);
    }

    #[test]
    fn gaussian_pair_correlation() {
        let model = DVineModel::markov(2, PairCopula::gaussian(0.8).unwrap()).unwrap();
        let rows = sample_uniform_vine(&model, 1_000_000, RngStream::new(2)).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for r in &rows {
            let (x, y) = (norm_quantile(r[0]), norm_quantile(r[1]));
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr > 0.79 && corr < 0.81, "corr = {corr}");
    }

    #[test]
    fn markov_clayton_lag_one_tau() {
        let model = DVineModel::markov(5, PairCopula::clayton(2.0).unwrap()).unwrap();
        let rows = sample_uniform_vine(&model, 1_000_000, RngStream::new(3)).unwrap();
        for j in 0..4 {
            let t = kendall_tau(&column(&rows, j), &column(&rows, j + 1));
            assert!((t - 0.5).abs() < 0.01, "lag-1 tau at {j}: {t}");
        }
    }

    #[test]
    fn marginals_stay_uniform_for_mixed_vine() {
        let model = DVineModel::new(
            4,
            vec![
                vec![
                    PairCopula::new(Family::Gumbel180, 2.5).unwrap(),
                    PairCopula::new(Family::Clayton90, 1.5).unwrap(),
                    PairCopula::frank(-6.0).unwrap(),
                ],
                vec![PairCopula::gaussian(0.6).unwrap(), PairCopula::new(Family::Gumbel270, 1.7).unwrap()],
                vec![PairCopula::clayton(3.0).unwrap()],
            ],
        )
        .unwrap();
        let rows = sample_uniform_vine(&model, 100_000, RngStream::new(4)).unwrap();
        for j in 0..4 {
            let p = ks_uniform(&mut column(&rows, j));
            assert!(p > 0.01, "coordinate {j}: KS p = {p}");
        }
    }

    #[test]
    fn pairwise_tau_matches_tree_one() {
        let pairs = [PairCopula::gumbel(1.8).unwrap(), PairCopula::new(Family::Clayton270, 2.0).unwrap()];
        let model = DVineModel::new(
            3,
            vec![pairs.to_vec(), vec![PairCopula::frank(3.0).unwrap()]],
        )
        .unwrap();
        let rows = sample_uniform_vine(&model, 1_000_000, RngStream::new(5)).unwrap();
        for (j, pair) in pairs.iter().enumerate() {
            let t = kendall_tau(&column(&rows, j), &column(&rows, j + 1));
            assert!((t - pair.tau()).abs() < 0.02, "edge {j}: {t} vs {}", pair.tau());
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = DVineModel::markov(3, PairCopula::gumbel(2.0).unwrap()).unwrap();
        let a = sample_uniform_vine(&model, 10_000, RngStream::with_stream(9, 4)).unwrap();
        let b = sample_uniform_vine(&model, 10_000, RngStream::with_stream(9, 4)).unwrap();
        let c = sample_uniform_vine(&model, 10_000, RngStream::with_stream(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let head = sample_uniform_vine(&model, 5000, RngStream::with_stream(9, 4)).unwrap();
        assert_eq!(&a[..4096], &head[..4096]);
    }

    fn small_data() -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(21).rng();
        (0..50).map(|_| (0..3).map(|_| (rng.random::<f64>() * 20.0).round()).collect()).collect()
    }

    #[test]
    fn data_scale_output_confined_to_observed_values() {
        let data = small_data();
        let ps = pseudo_observations(&data).unwrap();
        let model = DVineModel::markov(3, PairCopula::gaussian(0.5).unwrap()).unwrap();
        let rows = sample_data(&model, &ps, 20_000, RngStream::new(6)).unwrap();
        for r in &rows {
            for (j, x) in r.iter().enumerate() {
                assert!(data.iter().any(|d| d[j] == *x));
            }
        }
        let bad = DVineModel::independence(2).unwrap();
        assert!(matches!(
            sample_data(&bad, &ps, 10, RngStream::new(0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Pearson chi-square of observed counts against expected probabilities.
    fn chi2_pvalue(observed: &[usize], probs: &[f64]) -> f64 {
        let total: usize = observed.iter().sum();
        let stat: f64 = observed
            .iter()
            .zip(probs)
            .map(|(&o, &p)| {
                let e = p * total as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
    }

    #[test]
    fn independence_model_reproduces_resampling_distribution() {
        // Distinct values so that support points and order statistics coincide.
        let n = 40;
        let data: Vec<Vec<f64>> = (0..n).map(|i| vec![(i * 7 % n) as f64, (i * 3 % n) as f64]).collect();
        let ps = pseudo_observations(&data).unwrap();
        let model = DVineModel::independence(2).unwrap();
        let rows = sample_data(&model, &ps, 200_000, RngStream::new(7)).unwrap();
        let mut counts = vec![0usize; n];
        for r in &rows {
            counts[r[0] as usize] += 1;
        }
        // Under the step inverse every order statistic has mass 1/(n+1) and the
        // largest one also absorbs the mass above n/(n+1).
        let mut probs = vec![1.0 / (n + 1) as f64; n];
        probs[n - 1] = 2.0 / (n + 1) as f64;
        let p = chi2_pvalue(&counts, &probs);
        assert!(p > 0.01, "chi-square p = {p}");
    }

    fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (na, nb) = (a.len(), b.len());
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < na && j < nb {
            let x = a[i].min(b[j]);
            while i < na && a[i] <= x {
                i += 1;
            }
            while j < nb && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
        }
        ks_pvalue(d, na * nb / (na + nb))
    }

    #[test]
    fn independent_bootstrap_matches_independence_vine() {
        let mut rng = RngStream::new(30).rng();
        let data: Vec<Vec<f64>> =
            (0..300).map(|_| vec![rng.random::<f64>().ln(), rng.random::<f64>() * 5.0]).collect();
        let cols: Vec<Vec<f64>> = (0..2).map(|j| column(&data, j)).collect();
        let ps = pseudo_observations(&data).unwrap();
        let a = sample_independent(&cols, 20_000, RngStream::new(8)).unwrap();
        let b = sample_data(&DVineModel::independence(2).unwrap(), &ps, 20_000, RngStream::new(9)).unwrap();
        for j in 0..2 {
            let p = ks_two_sample(&mut column(&a, j), &mut column(&b, j));
            assert!(p > 0.01, "column {j}: KS p = {p}");
        }
    }

    #[test]
    fn independent_bootstrap_edge_cases() {
        let rows = sample_independent(&[vec![4.2]], 100, RngStream::new(1)).unwrap();
        assert!(rows.iter().all(|r| r[0] == 4.2));
        let cols = vec![vec![1.0, 2.0, 3.0], vec![5.0, 6.0]];
        let a = sample_independent(&cols, 9000, RngStream::new(2)).unwrap();
        let b = sample_independent(&cols, 9000, RngStream::new(2)).unwrap();
        assert_eq!(a, b);
        assert!(sample_independent(&[vec![]], 3, RngStream::new(1)).is_err());
    }
}
