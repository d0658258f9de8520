use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::InjectionModel;
use crate::error::Result;
use crate::powerflow::InjectionVector;

/// A distribution over injection vectors.
pub trait InjectionSampler: Sync {
    fn dim(&self) -> usize;

    /// Fill `p` and `q` (each of length [`dim`](Self::dim)) with one draw.
    fn sample_into(&self, rng: &mut dyn RngCore, p: &mut [f64], q: &mut [f64]);
}

/// Multivariate normal sampler for an [`InjectionModel`].
///
/// Draws `mean + A z` with `A Aᵀ` equal to the joint covariance. `A` is the
/// Cholesky factor when one exists, otherwise `V·sqrt(Λ⁺)` from the
/// eigendecomposition, which covers singular covariances.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    n: usize,
    mean: Vec<f64>,
    factor: DMatrix<f64>,
    lower: bool,
}

impl GaussianSampler {
    pub fn new(model: &InjectionModel) -> Self {
        let n = model.dim();
        let joint = model.joint_covariance();
        let mut mean = model.mean_p().to_vec();
        mean.extend_from_slice(model.mean_q());
        if let Some(ch) = joint.clone().cholesky() {
            return GaussianSampler {
                n,
                mean,
                factor: ch.l(),
                lower: true,
            };
        }
        let eig = joint.symmetric_eigen();
        let mut factor = eig.eigenvectors;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            factor.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
        }
        GaussianSampler {
            n,
            mean,
            factor,
            lower: false,
        }
    }
}

impl InjectionSampler for GaussianSampler {
    fn dim(&self) -> usize {
        self.n
    }

    fn sample_into(&self, rng: &mut dyn RngCore, p: &mut [f64], q: &mut [f64]) {
        let k = 2 * self.n;
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..k {
            let cols = if self.lower { i + 1 } else { k };
            let mut acc = self.mean[i];
            for (j, zj) in z.iter().enumerate().take(cols) {
                acc += self.factor[(i, j)] * zj;
            }
            if i < self.n {
                p[i] = acc;
            } else {
                q[i - self.n] = acc;
            }
        }
    }
}

/// `m` independent draws from `model`, reproducible from `seed`.
pub fn sample_injections(
    model: &InjectionModel,
    m: usize,
    seed: u64,
) -> Result<Vec<InjectionVector>> {
    let sampler = GaussianSampler::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.dim();
    Ok((0..m)
        .map(|_| {
            let mut inj = InjectionVector::zeros(n);
            sampler.sample_into(&mut rng, &mut inj.p, &mut inj.q);
            inj
        })
        .collect())
}

/// Child seed for stream `path` under `master`, so that parallel trials get
/// independent generators regardless of scheduling.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &s| mix(acc ^ mix(s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_2() -> InjectionModel {
        let joint = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.5, 0.3, 0.0, //
                0.5, 2.0, 0.0, 0.1, //
                0.3, 0.0, 1.0, 0.2, //
                0.0, 0.1, 0.2, 0.5,
            ],
        );
        InjectionModel::from_covariance(vec![1.0, -2.0], vec![0.5, 0.0], &joint).unwrap()
    }

    #[test]
    fn same_seed_same_draws() {
        let m = model_2();
        assert_eq!(
            sample_injections(&m, 5, 9).unwrap(),
            sample_injections(&m, 5, 9).unwrap()
        );
        assert_ne!(
            sample_injections(&m, 5, 9).unwrap(),
            sample_injections(&m, 5, 10).unwrap()
        );
    }

    #[test]
    fn sample_covariance_approaches_model() {
        let m = model_2();
        let draws = sample_injections(&m, 200_000, 1).unwrap();
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        for d in &draws {
            for i in 0..2 {
                for j in 0..2 {
                    acc[(i, j)] += d.p[i] * d.q[j];
                }
            }
        }
        acc /= draws.len() as f64;
        assert!((acc - m.sigma_pq()).amax() < 0.02);
    }

    #[test]
    fn singular_covariance_uses_eigen_factor() {
        // p1 = p2 exactly.
        let joint = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 1.0, 0.0, 0.0, //
                1.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        );
        let m = InjectionModel::from_covariance(vec![0.0, 0.0], vec![3.0, 3.0], &joint).unwrap();
        for d in sample_injections(&m, 50, 4).unwrap() {
            assert!((d.p[0] - d.p[1]).abs() < 1e-9);
            assert!((d.q[0] - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(7, &[0, 1]);
        assert_eq!(a, derive_seed(7, &[0, 1]));
        assert_ne!(a, derive_seed(7, &[1, 0]));
        assert_ne!(a, derive_seed(8, &[0, 1]));
    }
}
