//! Interacting multiple model filter over a bank of coordinated-turn
//! modes, each tracked by an unscented Kalman filter.

mod ukf;

pub use ukf::{
    ukf_step, ukf_step_with, unscented_transform, unscented_transform_with, GaussianBelief, SigmaParams, UtOutput,
};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix};
use crate::particle::{normalize_log_weights, ParamVector, StateVector};
use crate::scalar::Scalar;
use crate::tracking::{Observation, TrackingModel};

/// Modes and Markov transition matrix `transition[i][j] = P(j | i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmModelBank<T> {
    /// Turn rate, process noise and measurement variances of each mode.
    pub modes: Vec<ParamVector<T>>,
    pub transition: Vec<Vec<T>>,
}

impl<T: Scalar> ImmModelBank<T> {
    pub fn new(modes: Vec<ParamVector<T>>, transition: Vec<Vec<T>>) -> Result<Self> {
        let bank = Self { modes, transition };
        bank.validate()?;
        Ok(bank)
    }

    /// Bank whose transition matrix keeps the mode with probability `stay`
    /// and spreads the rest evenly.
    pub fn with_stay_probability(modes: Vec<ParamVector<T>>, stay: T) -> Result<Self> {
        if !(stay > T::zero() && stay <= T::one()) {
            return Err(Error::InvalidConfig(format!("stay probability must lie in (0, 1], got {stay}")));
        }
        let m = modes.len();
        let off = if m > 1 { (T::one() - stay) / T::from_count(m - 1) } else { T::zero() };
        let transition = (0..m)
            .map(|i| (0..m).map(|j| if i == j { if m > 1 { stay } else { T::one() } } else { off }).collect())
            .collect();
        Self::new(modes, transition)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.modes.len();
        if m == 0 {
            return Err(Error::InvalidConfig("model bank needs at least one mode".into()));
        }
        for mode in &self.modes {
            mode.validate()?;
        }
        if self.transition.len() != m || self.transition.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidConfig(format!("transition matrix must be {m}x{m}")));
        }
        for (i, row) in self.transition.iter().enumerate() {
            let s: T = row.iter().copied().sum();
            if row.iter().any(|p| !(*p >= T::zero())) || (s - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
                return Err(Error::InvalidConfig(format!("transition row {i} is not a probability vector")));
            }
        }
        Ok(())
    }
}

/// Which bank [`build_model_bank`] constructs.
#[derive(Debug, Clone, PartialEq)]
pub enum BankSpec<T> {
    /// `count` turn rates equally spaced over `[-20, 20]` deg/s, with
    /// process noise 2 for a zero rate and 2.5 otherwise, and the given
    /// measurement variances.
    TurnGrid { count: usize, sigma_r2: T, sigma_b2: T },
    /// 5 turn rates x process noise {2, 2.5, 3} x measurement noise
    /// {(50 m, 1 deg), (25 m, 2 deg), (100 m, 1 deg)}.
    FullGrid,
    Custom { modes: Vec<ParamVector<T>>, stay: T },
}

/// Probability of staying in the current mode for the stock banks.
pub const STAY_PROBABILITY: f64 = 0.95;

fn turn_grid<T: Scalar>(count: usize) -> Vec<T> {
    let lim = T::lit(20.0).to_radians();
    if count == 1 {
        return vec![T::zero()];
    }
    (0..count)
        .map(|i| -lim + T::lit(2.0) * lim * T::from_count(i) / T::from_count(count - 1))
        .collect()
}

pub fn build_model_bank<T: Scalar>(spec: &BankSpec<T>) -> Result<ImmModelBank<T>> {
    let stay = T::lit(STAY_PROBABILITY);
    match spec {
        BankSpec::TurnGrid { count, sigma_r2, sigma_b2 } => {
            if *count == 0 {
                return Err(Error::InvalidConfig("turn grid needs at least one mode".into()));
            }
            let modes = turn_grid::<T>(*count)
                .into_iter()
                .map(|w| {
                    let eta2 = if w.abs() < T::lit(1e-12) { T::lit(2.0) } else { T::lit(2.5) };
                    ParamVector::new(w, eta2, *sigma_r2, *sigma_b2)
                })
                .collect();
            ImmModelBank::with_stay_probability(modes, stay)
        }
        BankSpec::FullGrid => {
            let deg2 = |d: f64| T::lit(d).to_radians().powi(2);
            let noises = [(T::lit(2500.0), deg2(1.0)), (T::lit(625.0), deg2(2.0)), (T::lit(10_000.0), deg2(1.0))];
            let mut modes = Vec::with_capacity(45);
            for w in turn_grid::<T>(5) {
                for eta2 in [2.0, 2.5, 3.0] {
                    for (r, b) in noises {
                        modes.push(ParamVector::new(w, T::lit(eta2), r, b));
                    }
                }
            }
            ImmModelBank::with_stay_probability(modes, stay)
        }
        BankSpec::Custom { modes, stay } => ImmModelBank::with_stay_probability(modes.clone(), *stay),
    }
}

/// Per-mode beliefs and mode probabilities carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmState<T> {
    pub beliefs: Vec<GaussianBelief<T>>,
    pub probs: Vec<T>,
}

impl<T: Scalar> ImmState<T> {
    /// Every mode starts from `prior` with equal probability.
    pub fn uniform(prior: GaussianBelief<T>, modes: usize) -> Self {
        Self { beliefs: vec![prior; modes], probs: vec![T::one() / T::from_count(modes); modes] }
    }

    /// Moment-matched single Gaussian of the mixture.
    pub fn fused(&self) -> GaussianBelief<T> {
        mixture(&self.beliefs, &self.probs)
    }
}

/// Moment-matched Gaussian of `sum_j w_j N(m_j, P_j)`.
pub fn mixture<T: Scalar>(beliefs: &[GaussianBelief<T>], w: &[T]) -> GaussianBelief<T> {
    let mut mean = StateVector::zero();
    for (b, wj) in beliefs.iter().zip(w) {
        mean = mean + b.mean * *wj;
    }
    let mut cov: Matrix<T, 4, 4> = [[T::zero(); 4]; 4];
    for (b, wj) in beliefs.iter().zip(w) {
        let d = (b.mean - mean).to_array();
        for i in 0..4 {
            for k in 0..4 {
                cov[i][k] = cov[i][k] + *wj * (b.cov[i][k] + d[i] * d[k]);
            }
        }
    }
    GaussianBelief::new(mean, symmetrize(&cov))
}

/// Output of one IMM cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmStepResult<T> {
    pub state: ImmState<T>,
    pub fused: GaussianBelief<T>,
    /// `log p(y_t | y_{1:t-1})` under the mixture.
    pub log_likelihood: T,
}

/// One IMM cycle: mixing, mode-matched UKF updates, mode-probability
/// update and fusion.
pub fn imm_step<T: Scalar>(
    state: &ImmState<T>,
    bank: &ImmModelBank<T>,
    y: &Observation<T>,
    model: &TrackingModel<T>,
    params: &SigmaParams<T>,
) -> Result<ImmStepResult<T>> {
    let m = bank.len();
    if state.beliefs.len() != m || state.probs.len() != m {
        return Err(Error::Contract(format!("IMM state has {} modes, bank has {m}", state.beliefs.len())));
    }
    let total: T = state.probs.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::Contract(format!("mode probabilities sum to {total}")));
    }

    // c_j = sum_i Pi_ij mu_i; mixing weights mu_{i|j} = Pi_ij mu_i / c_j.
    let predicted: Vec<T> = (0..m)
        .map(|j| (0..m).map(|i| bank.transition[i][j] * state.probs[i]).sum())
        .collect();
    let mut updated = Vec::with_capacity(m);
    let mut log_post = Vec::with_capacity(m);
    for j in 0..m {
        let prior = if m == 1 {
            state.beliefs[0]
        } else if predicted[j] > T::zero() {
            let w: Vec<T> = (0..m).map(|i| bank.transition[i][j] * state.probs[i] / predicted[j]).collect();
            mixture(&state.beliefs, &w)
        } else {
            state.beliefs[j]
        };
        let (post, ll) = ukf_step(&prior, y, &bank.modes[j], model, params)?;
        updated.push(post);
        log_post.push(predicted[j].ln() + ll);
    }

    let max = log_post.iter().copied().fold(T::neg_infinity(), T::max);
    let probs = normalize_log_weights(&log_post)?;
    let evidence = max + log_post.iter().map(|l| (*l - max).exp()).sum::<T>().ln();
    let state = ImmState { beliefs: updated, probs };
    let fused = state.fused();
    Ok(ImmStepResult { state, fused, log_likelihood: evidence })
}

/// Runs the IMM filter over an observation sequence and returns the fused
/// belief at every step.
pub fn run_imm<T: Scalar>(
    bank: &ImmModelBank<T>,
    prior: GaussianBelief<T>,
    observations: &[Observation<T>],
    model: &TrackingModel<T>,
    params: &SigmaParams<T>,
) -> Result<Vec<GaussianBelief<T>>> {
    bank.validate()?;
    let mut state = ImmState::uniform(prior, bank.len());
    let mut out = Vec::with_capacity(observations.len());
    for (t, y) in observations.iter().enumerate() {
        let r = imm_step(&state, bank, y, model, params)
            .map_err(|e| Error::AtStep { step: t + 1, source: Box::new(e) })?;
        out.push(r.fused);
        state = r.state;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, symmetric_eigenvalues};
    use crate::tracking::{observe_mean, propagate_mean, CtConfig, SensorPose};

    fn model() -> TrackingModel<f64> {
        TrackingModel { ct: CtConfig::default(), sensor: SensorPose::new(55_000.0, 55_000.0) }
    }

    fn prior() -> GaussianBelief<f64> {
        GaussianBelief::new(StateVector::new(30_000.0, 300.0, 30_000.0, 0.0), diag([1e4, 100.0, 1e4, 100.0]))
    }

    fn r() -> (f64, f64) {
        (2500.0, 1f64.to_radians().powi(2))
    }

    #[test]
    fn bank_shapes() {
        let (sr, sb) = r();
        let b20 = build_model_bank(&BankSpec::TurnGrid { count: 20, sigma_r2: sr, sigma_b2: sb }).unwrap();
        assert_eq!(b20.len(), 20);
        let step = (b20.modes[1].omega - b20.modes[0].omega).to_degrees();
        assert!((step - 40.0 / 19.0).abs() < 1e-12);
        assert!((b20.modes[0].omega.to_degrees() + 20.0).abs() < 1e-12);
        assert!(b20.modes.iter().all(|m| m.eta2 == 2.5));
        let b5 = build_model_bank(&BankSpec::TurnGrid { count: 5, sigma_r2: sr, sigma_b2: sb }).unwrap();
        assert_eq!(b5.modes[2].eta2, 2.0);
        let b45 = build_model_bank::<f64>(&BankSpec::FullGrid).unwrap();
        assert_eq!(b45.len(), 45);
        for bank in [&b20, &b45] {
            for (i, row) in bank.transition.iter().enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(row[i], 0.95);
            }
        }
        assert!(build_model_bank(&BankSpec::TurnGrid { count: 0, sigma_r2: sr, sigma_b2: sb }).is_err());
    }

    #[test]
    fn single_mode_reduces_to_ukf() {
        let (sr, sb) = r();
        let mode = ParamVector::new(0.02, 2.0, sr, sb);
        let bank = ImmModelBank::with_stay_probability(vec![mode], 0.95).unwrap();
        let y = Observation::new(35_000.0, -2.3);
        let p = SigmaParams::default();
        let imm = imm_step(&ImmState::uniform(prior(), 1), &bank, &y, &model(), &p).unwrap();
        let (ukf, ll) = ukf_step(&prior(), &y, &mode, &model(), &p).unwrap();
        assert_eq!(imm.state.beliefs[0], ukf);
        assert_eq!(imm.state.probs, vec![1.0]);
        assert!((imm.log_likelihood - ll).abs() < 1e-12);
        assert!(crate::linalg::max_abs_diff(&imm.fused.cov, &ukf.cov) < 1e-9);
    }

    #[test]
    fn identical_modes_stay_balanced() {
        let (sr, sb) = r();
        let mode = ParamVector::new(0.0, 2.0, sr, sb);
        let bank = ImmModelBank::with_stay_probability(vec![mode, mode], 0.9).unwrap();
        let mut state = ImmState::uniform(prior(), 2);
        let mut x = prior().mean;
        for _ in 0..10 {
            x = propagate_mean(&x, 0.0, &model().ct);
            let y = observe_mean(&x, &model().sensor).unwrap();
            state = imm_step(&state, &bank, &y, &model(), &SigmaParams::default()).unwrap().state;
            assert!((state.probs[0] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_is_convex_combination() {
        let a = GaussianBelief::new(StateVector::new(0.0f64, 1.0, 0.0, 0.0), diag([1.0; 4]));
        let b = GaussianBelief::new(StateVector::new(10.0, 1.0, -4.0, 2.0), diag([2.0; 4]));
        let f = mixture(&[a, b], &[0.3, 0.7]);
        assert!((f.mean.x - 7.0).abs() < 1e-12 && (f.mean.y + 2.8).abs() < 1e-12);
        // the spread term alone leaves a PSD remainder
        let mut rest = f.cov;
        for i in 0..4 {
            for k in 0..4 {
                rest[i][k] -= 0.3 * a.cov[i][k] + 0.7 * b.cov[i][k];
            }
        }
        assert!(symmetric_eigenvalues(&rest).iter().all(|e| *e > -1e-9));
    }

    #[test]
    fn probabilities_stay_normalized_and_track_the_turn() {
        let (sr, sb) = r();
        let bank = build_model_bank(&BankSpec::TurnGrid { count: 5, sigma_r2: sr, sigma_b2: sb }).unwrap();
        let mut state = ImmState::uniform(prior(), 5);
        let mut x = prior().mean;
        let omega = 10f64.to_radians();
        for _ in 0..30 {
            x = propagate_mean(&x, omega, &model().ct);
            let y = observe_mean(&x, &model().sensor).unwrap();
            let out = imm_step(&state, &bank, &y, &model(), &SigmaParams::default()).unwrap();
            assert!((out.state.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(out.state.probs.iter().all(|p| *p >= 0.0));
            out.state.beliefs.iter().try_for_each(|b| b.validate()).unwrap();
            state = out.state;
        }
        let best = state.probs.iter().enumerate().fold((0, 0.0), |m, (i, p)| if *p > m.1 { (i, *p) } else { m });
        assert_eq!(best.0, 3);
    }

    #[test]
    fn rejects_mismatched_state() {
        let bank = build_model_bank::<f64>(&BankSpec::FullGrid).unwrap();
        let y = Observation::new(35_000.0, -2.3);
        assert!(imm_step(&ImmState::uniform(prior(), 3), &bank, &y, &model(), &SigmaParams::default()).is_err());
    }
}
