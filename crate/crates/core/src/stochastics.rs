//! Random streams, scalar samplers and systematic resampling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::particle::sum_tolerance;
use crate::scalar::Scalar;

/// Reproducible random stream keyed by `(seed, stream id)`.
///
/// Every consumer of randomness gets its own stream; the same key always
/// yields the same draw sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Independent stream sharing this seed, keyed by `stream`.
    pub fn sibling(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Systematic resampling with a single caller-supplied offset `u` in `[0, 1)`.
///
/// Grid point `j` sits at `(j + u) / n` and selects the first index whose
/// cumulative weight exceeds it, so zero-weight entries are never chosen.
/// Index `i` is returned either `floor(n w_i)` or `ceil(n w_i)` times.
pub fn systematic_resample<T: Scalar>(w: &[T], n: usize, u: T) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Contract("resample count must be at least 1".into()));
    }
    if !(u >= T::zero() && u < T::one()) {
        return Err(Error::Contract(format!("offset {u} outside [0, 1)")));
    }
    if w.is_empty() || w.iter().any(|v| !(*v >= T::zero())) {
        return Err(Error::Contract("weights must be nonnegative".into()));
    }
    let total: T = w.iter().copied().sum();
    if (total - T::one()).abs() > sum_tolerance(w.len()) {
        return Err(Error::Contract(format!("weights sum to {total}, expected 1")));
    }
    // Rounding can leave the final cumulative sum just below a grid point.
    let last_positive = w.iter().rposition(|v| *v > T::zero()).unwrap_or(w.len() - 1);

    let nf = T::from_count(n);
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cum = w[0];
    for j in 0..n {
        let point = (T::from_count(j) + u) / nf;
        while point >= cum && i < last_positive {
            i += 1;
            cum = cum + w[i];
        }
        out.push(i);
    }
    Ok(out)
}

/// Draw from the inverse-gamma distribution `IG(shape, scale)` as the
/// reciprocal of a gamma variate.
pub fn sample_inverse_gamma<T: Scalar>(shape: T, scale: T, rng: &mut RngStream) -> Result<T> {
    if !(shape > T::zero() && scale > T::zero() && shape.is_finite() && scale.is_finite()) {
        return Err(Error::Contract(format!(
            "inverse gamma needs positive shape and scale, got ({shape}, {scale})"
        )));
    }
    let g = T::standard_gamma(shape, rng);
    Ok(scale / g)
}

/// Scalar Gaussian draw `mean + sqrt(var) * z`. A zero variance returns
/// `mean` without consuming randomness.
pub fn sample_gaussian<T: Scalar>(mean: T, var: T, rng: &mut RngStream) -> Result<T> {
    if !(var >= T::zero()) || !var.is_finite() {
        return Err(Error::Contract(format!("variance must be nonnegative, got {var}")));
    }
    if var == T::zero() {
        return Ok(mean);
    }
    Ok(mean + var.sqrt() * T::std_normal(rng))
}

/// Uniform draw on `[lo, hi)`.
pub fn sample_uniform<T: Scalar>(lo: T, hi: T, rng: &mut RngStream) -> Result<T> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Contract(format!("empty uniform support [{lo}, {hi})")));
    }
    let v = lo + (hi - lo) * T::unit_uniform(rng);
    Ok(if v < hi { v } else { lo })
}

/// Offset for [`systematic_resample`], drawn from `rng`.
pub fn resample_offset<T: Scalar>(rng: &mut RngStream) -> T {
    let u = T::unit_uniform(rng);
    if u < T::one() {
        u
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_sequence() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let mut c = RngStream::new(7, 4);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
        assert_eq!(a.sibling(4).next_u64(), RngStream::new(7, 4).next_u64());
    }

    #[test]
    fn systematic_examples() {
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(systematic_resample(&[0.25; 4], 4, u).unwrap(), vec![0, 1, 2, 3]);
            assert_eq!(systematic_resample(&[1.0, 0.0, 0.0], 3, u).unwrap(), vec![0, 0, 0]);
        }
        assert_eq!(
            systematic_resample(&[0.5, 0.5, 0.0, 0.0], 4, 0.1).unwrap(),
            vec![0, 0, 1, 1]
        );
    }

    #[test]
    fn systematic_never_picks_zero_weight() {
        let w = [0.0, 0.3, 0.0, 0.7, 0.0];
        for k in 0..100 {
            let u = k as f64 / 100.0;
            let idx = systematic_resample(&w, 17, u).unwrap();
            assert!(idx.iter().all(|&i| i == 1 || i == 3));
        }
    }

    #[test]
    fn systematic_count_property() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..200 {
            let n_w = rng.random_range(1..20);
            let raw: Vec<f64> = (0..n_w).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let n = rng.random_range(1..50);
            let idx = systematic_resample(&w, n, resample_offset(&mut rng)).unwrap();
            assert_eq!(idx.len(), n);
            for (i, wi) in w.iter().enumerate() {
                let count = idx.iter().filter(|&&k| k == i).count() as f64;
                let target = n as f64 * wi;
                assert!(count >= target.floor() - 1e-9 && count <= target.ceil() + 1e-9);
            }
        }
    }

    #[test]
    fn systematic_rejects_bad_input() {
        assert!(systematic_resample(&[0.5, 0.6], 2, 0.1).is_err());
        assert!(systematic_resample(&[0.5, 0.5], 0, 0.1).is_err());
        assert!(systematic_resample(&[0.5, 0.5], 2, 1.0).is_err());
    }

    #[test]
    fn inverse_gamma_means() {
        let mut rng = RngStream::new(1, 0);
        let n = 1_000_000;
        let m: f64 = (0..n)
            .map(|_| sample_inverse_gamma(4.5, 7.5, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((m / (7.5 / 3.5) - 1.0).abs() < 0.01, "mean {m}");

        // shape 2 has infinite variance, so the median is the stable check
        // alongside a loose mean.
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_inverse_gamma(2.0, 2500.0, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean / 2500.0 - 1.0).abs() < 0.05, "mean {mean}");
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // median of IG(2, 2500) = 2500 / median(Gamma(2, 1)) = 2500 / 1.678347
        let median = draws[n / 2];
        assert!((median / (2500.0 / 1.678_346_990_016_661_7) - 1.0).abs() < 0.01);
    }

    #[test]
    fn inverse_gamma_rejects_nonpositive() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_inverse_gamma(2.0, 0.0, &mut rng).is_err());
        assert!(sample_inverse_gamma(0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian_moments_and_location() {
        let mut rng = RngStream::new(2, 0);
        assert_eq!(sample_gaussian(5.0, 0.0, &mut rng).unwrap(), 5.0);
        assert!(sample_gaussian(0.0, -1.0, &mut rng).is_err());

        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_gaussian(0.0, 1.0, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.01);

        let d: f64 = sample_gaussian(1.5, 4.0, &mut RngStream::new(9, 9)).unwrap();
        let e = sample_gaussian(1.5 + 10.0, 4.0, &mut RngStream::new(9, 9)).unwrap();
        assert!((e - d - 10.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_support() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..10_000 {
            let v = sample_uniform(0.0, 1.0, &mut rng).unwrap();
            assert!((0.0..1.0).contains(&v));
            let w = sample_uniform(-0.349_f32, 0.349, &mut rng).unwrap();
            assert!((-0.349..0.349).contains(&w));
        }
        assert!(sample_uniform(1.0, 1.0, &mut rng).is_err());
        assert!(sample_uniform(2.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn twenty_degree_prior_bound() {
        let bound = 20f64.to_radians();
        assert!((bound - 0.349).abs() < 1e-3);
    }
}
