use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, cholesky_inverse, cholesky_log_det, mat_mul, mat_vec, symmetrize, transpose, Matrix};
use crate::particle::{ParamVector, StateVector};
use crate::scalar::{wrap_angle, Scalar};
use crate::tracking::{ct_matrix, observe_mean, TrackingModel};

/// Diagonal jitter added before every Cholesky factorization.
const JITTER: f64 = 1e-9;

/// Gaussian belief over the tracking state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief<T> {
    pub mean: StateVector<T>,
    pub cov: Matrix<T, 4, 4>,
}

impl<T: Scalar> GaussianBelief<T> {
    pub fn new(mean: StateVector<T>, cov: Matrix<T, 4, 4>) -> Self {
        Self { mean, cov }
    }

    /// Checks symmetry and positive semidefiniteness, both relative to the
    /// largest covariance entry.
    pub fn validate(&self) -> Result<()> {
        let scale = self.cov.iter().flatten().fold(T::one(), |m, v| m.max(v.abs()));
        for i in 0..4 {
            for j in 0..i {
                if (self.cov[i][j] - self.cov[j][i]).abs() > T::lit(1e-10) * scale {
                    return Err(Error::Contract(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        if !self.mean.is_finite() || self.cov.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown("belief is not finite".into()));
        }
        let eig = crate::linalg::symmetric_eigenvalues(&self.cov);
        if eig.iter().any(|e| *e < -T::lit(1e-9) * scale) {
            return Err(Error::Contract(format!("covariance not PSD: eigenvalues {eig:?}")));
        }
        Ok(())
    }
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaParams<T> {
    pub alpha: T,
    pub beta: T,
    pub kappa: T,
}

impl<T: Scalar> Default for SigmaParams<T> {
    fn default() -> Self {
        Self { alpha: T::one(), beta: T::lit(2.0), kappa: T::zero() }
    }
}

impl<T: Scalar> SigmaParams<T> {
    /// `(lambda, mean weights, covariance weights)` for dimension `n`.
    ///
    /// When `n + lambda` is not positive the `kappa = 3 - n` convention is
    /// used instead.
    fn weights(&self, n: usize) -> (T, Vec<T>, Vec<T>) {
        let nf = T::from_count(n);
        let a2 = self.alpha * self.alpha;
        let mut lambda = a2 * (nf + self.kappa) - nf;
        if nf + lambda <= T::lit(1e-9) {
            lambda = a2 * T::lit(3.0) - nf;
        }
        let denom = nf + lambda;
        let wi = T::one() / (T::lit(2.0) * denom);
        let mut wm = vec![wi; 2 * n + 1];
        let mut wc = wm.clone();
        wm[0] = lambda / denom;
        wc[0] = lambda / denom + (T::one() - a2 + self.beta);
        (lambda, wm, wc)
    }
}

/// Moments of `f(x)` for `x ~ N(mean, cov)` by the unscented transform.
#[derive(Debug, Clone, PartialEq)]
pub struct UtOutput<T, const N: usize, const M: usize> {
    pub mean: [T; M],
    /// Includes the additive noise covariance.
    pub cov: Matrix<T, M, M>,
    /// `Cov(x, f(x))`.
    pub cross: Matrix<T, N, M>,
}

/// Unscented transform with `2N + 1` sigma points.
///
/// `angular` names an output component that is an angle: its mean is the
/// circular mean of the sigma-point images and its deviations are wrapped.
pub fn unscented_transform_with<T: Scalar, const N: usize, const M: usize>(
    mean: &[T; N],
    cov: &Matrix<T, N, N>,
    f: impl Fn(&[T; N]) -> Result<[T; M]>,
    noise: &Matrix<T, M, M>,
    params: &SigmaParams<T>,
    angular: Option<usize>,
) -> Result<UtOutput<T, N, M>> {
    let (lambda, wm, wc) = params.weights(N);
    let l = cholesky_jittered(cov, T::lit(JITTER))?;
    let spread = (T::from_count(N) + lambda).sqrt();

    let mut points = Vec::with_capacity(2 * N + 1);
    points.push(*mean);
    for sign in [T::one(), -T::one()] {
        for j in 0..N {
            let mut p = *mean;
            for i in 0..N {
                p[i] = p[i] + sign * spread * l[i][j];
            }
            points.push(p);
        }
    }
    let images = points.iter().map(&f).collect::<Result<Vec<_>>>()?;

    let mut ybar = [T::zero(); M];
    for k in 0..M {
        ybar[k] = if angular == Some(k) {
            let s: T = images.iter().zip(&wm).map(|(y, w)| *w * y[k].sin()).sum();
            let c: T = images.iter().zip(&wm).map(|(y, w)| *w * y[k].cos()).sum();
            s.atan2(c)
        } else {
            images.iter().zip(&wm).map(|(y, w)| *w * y[k]).sum()
        };
    }

    let mut out_cov = *noise;
    let mut cross = [[T::zero(); M]; N];
    for ((x, y), w) in points.iter().zip(&images).zip(&wc) {
        let mut dy = [T::zero(); M];
        for k in 0..M {
            dy[k] = y[k] - ybar[k];
            if angular == Some(k) {
                dy[k] = wrap_angle(dy[k]);
            }
        }
        for a in 0..M {
            for b in 0..M {
                out_cov[a][b] = out_cov[a][b] + *w * dy[a] * dy[b];
            }
        }
        for a in 0..N {
            let dx = x[a] - mean[a];
            for b in 0..M {
                cross[a][b] = cross[a][b] + *w * dx * dy[b];
            }
        }
    }
    Ok(UtOutput { mean: ybar, cov: symmetrize(&out_cov), cross })
}

/// Unscented transform of a belief through `f` plus additive `noise`.
pub fn unscented_transform<T: Scalar>(
    belief: &GaussianBelief<T>,
    f: impl Fn(&StateVector<T>) -> StateVector<T>,
    noise: &Matrix<T, 4, 4>,
    params: &SigmaParams<T>,
) -> Result<GaussianBelief<T>> {
    let out = unscented_transform_with(
        &belief.mean.to_array(),
        &belief.cov,
        |x| Ok(f(&StateVector::from_array(*x)).to_array()),
        noise,
        params,
        None,
    )?;
    Ok(GaussianBelief::new(StateVector::from_array(out.mean), out.cov))
}

/// Generic UKF step with a linear transition `x' = F x + w`, `w ~ N(0, Q)`,
/// and a nonlinear measurement `y = h(x) + v`, `v ~ N(0, R)`.
///
/// Returns the posterior and `log p(y | past)`.
#[allow(clippy::too_many_arguments)]
pub fn ukf_step_with<T: Scalar, const M: usize>(
    belief: &GaussianBelief<T>,
    y: &[T; M],
    f: &Matrix<T, 4, 4>,
    q: &Matrix<T, 4, 4>,
    h: impl Fn(&[T; 4]) -> Result<[T; M]>,
    r: &Matrix<T, M, M>,
    params: &SigmaParams<T>,
    angular: Option<usize>,
) -> Result<(GaussianBelief<T>, T)> {
    // A linear transition needs no sigma points.
    let m = mat_vec(f, &belief.mean.to_array());
    let mut p = mat_mul(&mat_mul(f, &belief.cov), &transpose(f));
    for i in 0..4 {
        for j in 0..4 {
            p[i][j] = p[i][j] + q[i][j];
        }
    }
    let p = symmetrize(&p);

    let ut = unscented_transform_with(&m, &p, h, r, params, angular)?;
    let mut nu = [T::zero(); M];
    for k in 0..M {
        nu[k] = y[k] - ut.mean[k];
        if angular == Some(k) {
            nu[k] = wrap_angle(nu[k]);
        }
    }
    let ls = cholesky_jittered(&ut.cov, T::zero())
        .or_else(|_| cholesky_jittered(&ut.cov, T::lit(JITTER)))?;
    let s_inv = cholesky_inverse(&ls);
    let gain: Matrix<T, 4, M> = mat_mul(&ut.cross, &s_inv);

    let mut mean = m;
    let correction = mat_vec(&gain, &nu);
    for i in 0..4 {
        mean[i] = mean[i] + correction[i];
    }
    // P - K S K^T = P - K C^T
    let kct: Matrix<T, 4, 4> = mat_mul(&gain, &transpose(&ut.cross));
    let mut cov = p;
    for i in 0..4 {
        for j in 0..4 {
            cov[i][j] = cov[i][j] - kct[i][j];
        }
    }

    let s_inv_nu = mat_vec(&s_inv, &nu);
    let maha: T = nu.iter().zip(&s_inv_nu).map(|(a, b)| *a * *b).sum();
    let half = T::lit(0.5);
    let loglik = -half * (T::from_count(M) * (T::lit(2.0) * T::PI()).ln() + cholesky_log_det(&ls) + maha);
    if !loglik.is_finite() {
        return Err(Error::NumericalBreakdown(format!("non-finite UKF likelihood {loglik}")));
    }
    Ok((GaussianBelief::new(StateVector::from_array(mean), symmetrize(&cov)), loglik))
}

/// UKF step for one coordinated-turn mode with range-bearing observations.
pub fn ukf_step<T: Scalar>(
    belief: &GaussianBelief<T>,
    y: &crate::tracking::Observation<T>,
    mode: &ParamVector<T>,
    model: &TrackingModel<T>,
    params: &SigmaParams<T>,
) -> Result<(GaussianBelief<T>, T)> {
    let f = ct_matrix(mode.omega, &model.ct);
    let q = model.ct.process_covariance(mode.eta2);
    let r = [[mode.sigma_r2, T::zero()], [T::zero(), mode.sigma_b2]];
    let sensor = model.sensor;
    let h = |x: &[T; 4]| {
        let o = observe_mean(&StateVector::from_array(*x), &sensor)?;
        Ok([o.range, o.bearing])
    };
    ukf_step_with(belief, &[y.range, y.bearing], &f, &q, h, &r, params, Some(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, max_abs_diff, trace};
    use crate::tracking::{CtConfig, Observation, SensorPose};

    fn belief() -> GaussianBelief<f64> {
        let mut cov = diag([400.0, 25.0, 900.0, 16.0]);
        cov[0][1] = 30.0;
        cov[1][0] = 30.0;
        GaussianBelief::new(StateVector::new(30_000.0, 300.0, 30_000.0, 0.0), cov)
    }

    #[test]
    fn identity_map_keeps_belief() {
        let b = belief();
        let out = unscented_transform(&b, |x| *x, &[[0.0; 4]; 4], &SigmaParams::default()).unwrap();
        assert!((out.mean - b.mean).to_array().iter().all(|d| d.abs() < 1e-9));
        assert!(max_abs_diff(&out.cov, &b.cov) < 1e-6);
    }

    #[test]
    fn linear_map_is_exact() {
        let b = belief();
        let a = ct_matrix(0.05, &CtConfig::default());
        let q = CtConfig::default().process_covariance(2.0);
        for params in [SigmaParams::default(), SigmaParams { alpha: 0.3, beta: 2.0, kappa: 1.0 }] {
            let out = unscented_transform(
                &b,
                |x| StateVector::from_array(mat_vec(&a, &x.to_array())),
                &q,
                &params,
            )
            .unwrap();
            let mean = mat_vec(&a, &b.mean.to_array());
            let mut cov = mat_mul(&mat_mul(&a, &b.cov), &transpose(&a));
            for i in 0..4 {
                for j in 0..4 {
                    cov[i][j] += q[i][j];
                }
            }
            for i in 0..4 {
                assert!((out.mean.to_array()[i] - mean[i]).abs() < 1e-7);
            }
            assert!(max_abs_diff(&out.cov, &cov) < 1e-6);
        }
    }

    #[test]
    fn scalar_square_mean() {
        // n = 1, alpha = 1, kappa = 2 gives lambda = 2: points 0, +-sqrt(3)
        // with weights 2/3, 1/6, 1/6.
        let params = SigmaParams { alpha: 1.0f64, beta: 0.0, kappa: 2.0 };
        let out = unscented_transform_with(&[0.0], &[[1.0]], |x| Ok([x[0] * x[0]]), &[[0.0]], &params, None).unwrap();
        assert!((out.mean[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn circular_mean_across_the_cut() {
        let out = unscented_transform_with(
            &[std::f64::consts::PI],
            &[[0.01]],
            |x| Ok([wrap_angle(x[0])]),
            &[[0.0]],
            &SigmaParams::default(),
            Some(0),
        )
        .unwrap();
        assert!((out.mean[0].abs() - std::f64::consts::PI).abs() < 1e-9);
        assert!((out.cov[0][0] - 0.01).abs() < 1e-6);
    }

    fn model() -> TrackingModel<f64> {
        TrackingModel { ct: CtConfig::default(), sensor: SensorPose::new(55_000.0, 55_000.0) }
    }

    fn mode() -> ParamVector<f64> {
        ParamVector::new(0.0, 2.0, 2500.0, 1f64.to_radians().powi(2))
    }

    #[test]
    fn likelihood_peaks_at_prediction() {
        let b = belief();
        let pred = observe_mean(&crate::tracking::propagate_mean(&b.mean, 0.0, &model().ct), &model().sensor).unwrap();
        let p = SigmaParams::default();
        let (_, at) = ukf_step(&b, &pred, &mode(), &model(), &p).unwrap();
        let shifted = Observation::new(pred.range + 100.0, pred.bearing);
        let (_, off) = ukf_step(&b, &shifted, &mode(), &model(), &p).unwrap();
        assert!(at > off);
    }

    #[test]
    fn tiny_noise_collapses_belief() {
        let b = belief();
        let truth = crate::tracking::propagate_mean(&b.mean, 0.0, &model().ct);
        let y = observe_mean(&truth, &model().sensor).unwrap();
        let m = ParamVector::new(0.0, 1e-6, 1e-4, 1e-10);
        let (post, _) = ukf_step(&b, &y, &m, &model(), &SigmaParams::default()).unwrap();
        assert!(trace(&post.cov) < trace(&b.cov));
        assert!(post.mean.position_error(&truth) < 1.0);
        post.validate().unwrap();
    }

    #[test]
    fn validation_flags_asymmetry_and_negative_eigenvalues() {
        let mut b = belief();
        b.validate().unwrap();
        b.cov[0][1] = 31.0;
        assert!(b.validate().is_err());
        let b = GaussianBelief::new(StateVector::zero(), diag([1.0, -1.0, 1.0, 1.0]));
        assert!(b.validate().is_err());
    }
}
