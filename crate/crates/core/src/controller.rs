//! Proportional-integral control of the KL weight β.
//!
//! The error is `e = kl_set - kl`. A KL below the setpoint makes `e`
//! positive, which lowers β and lets the KL grow again; a KL above the
//! setpoint raises β. The integral is frozen whenever integrating would push
//! an already saturated output further into its clamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PiConfig {
    pub kp: f64,
    pub ki: f64,
    /// Target per-node KL divergence.
    pub kl_set: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    /// β used before the first update.
    pub beta_init: f64,
    /// Decay of the moving average applied to the KL before it reaches the
    /// controller.
    pub ema_decay: f64,
}

impl Default for PiConfig {
    fn default() -> Self {
        Self {
            kp: 0.1,
            ki: 0.0005,
            kl_set: 3.0,
            beta_min: 0.0,
            beta_max: 1.0,
            beta_init: 1.0,
            ema_decay: 0.9,
        }
    }
}

impl PiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0 && self.ki > 0.0 && self.kl_set > 0.0) {
            return Err(Error::Config(
                "controller gains kp, ki and kl_set must be positive".into(),
            ));
        }
        if !(self.beta_min <= self.beta_max) {
            return Err(Error::Config(format!(
                "beta_min {} exceeds beta_max {}",
                self.beta_min, self.beta_max
            )));
        }
        if !(self.beta_min..=self.beta_max).contains(&self.beta_init) {
            return Err(Error::Config(format!(
                "beta_init {} outside [{}, {}]",
                self.beta_init, self.beta_min, self.beta_max
            )));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "ema_decay must lie in [0, 1), got {}",
                self.ema_decay
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiController {
    config: PiConfig,
    integral: f64,
    beta: f64,
    last_error: f64,
}

impl PiController {
    pub fn new(config: PiConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            beta: config.beta_init,
            config,
            integral: 0.0,
            last_error: 0.0,
        })
    }

    pub fn config(&self) -> &PiConfig {
        &self.config
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn last_error(&self) -> f64 {
        self.last_error
    }

    /// Feeds one KL observation and returns the new β.
    pub fn update(&mut self, kl: f64) -> Result<f64> {
        if !kl.is_finite() || kl < 0.0 {
            return Err(Error::Numeric(format!("controller received KL {kl}")));
        }
        let c = &self.config;
        let e = c.kl_set - kl;
        let proportional = c.kp / (1.0 + e.exp());
        // Output with the integral as it stands; if that is already past a
        // bound in the direction e pushes, integrating further only winds up.
        let held = proportional - c.ki * self.integral;
        let winding_down = held <= c.beta_min && e > 0.0;
        let winding_up = held >= c.beta_max && e < 0.0;
        if !(winding_down || winding_up) {
            self.integral += e;
        }
        self.beta = (proportional - c.ki * self.integral).clamp(c.beta_min, c.beta_max);
        self.last_error = e;
        Ok(self.beta)
    }
}

/// Exponential moving average; the first observation initializes it.
#[derive(Clone, Debug, PartialEq)]
pub struct Ema {
    decay: f64,
    value: Option<f64>,
}

impl Ema {
    pub fn new(decay: f64) -> Self {
        Self { decay, value: None }
    }

    pub fn update(&mut self, x: f64) -> f64 {
        let v = match self.value {
            Some(prev) => self.decay * prev + (1.0 - self.decay) * x,
            None => x,
        };
        self.value = Some(v);
        v
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_gains() -> PiConfig {
        PiConfig {
            kp: 0.01,
            ki: 0.0001,
            kl_set: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn on_target_gives_half_kp() {
        let mut c = PiController::new(small_gains()).unwrap();
        let b = c.update(0.5).unwrap();
        assert_eq!(b, 0.005);
    }

    #[test]
    fn kl_far_below_target_floors_beta() {
        let mut c = PiController::new(PiConfig {
            kl_set: 50.0,
            ..Default::default()
        })
        .unwrap();
        let mut b = 1.0;
        for _ in 0..100 {
            b = c.update(0.0).unwrap();
        }
        assert!(b <= 1e-12);
        assert!(b >= 0.0);
    }

    #[test]
    fn kl_far_above_target_raises_beta() {
        let mut c = PiController::new(small_gains()).unwrap();
        let first = c.update(60.0).unwrap();
        assert!((first - 0.01 - 0.0001 * 59.5).abs() < 1e-12);
        let mut b = first;
        for _ in 0..10 {
            let next = c.update(60.0).unwrap();
            assert!(next > b);
            b = next;
        }
    }

    #[test]
    fn non_finite_rejected() {
        let mut c = PiController::new(PiConfig::default()).unwrap();
        assert!(matches!(c.update(f64::NAN), Err(Error::Numeric(_))));
        assert!(matches!(c.update(-1.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn beta_is_decreasing_in_error_with_integral_frozen() {
        let cfg = PiConfig::default();
        let beta = |e: f64| cfg.kp / (1.0 + e.exp());
        let mut prev = f64::INFINITY;
        for k in -50..=50 {
            let b = beta(f64::from(k) * 0.2);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn deterministic_sequences() {
        let seq: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let run = || {
            let mut c = PiController::new(PiConfig::default()).unwrap();
            seq.iter().map(|&k| c.update(k).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    fn recovery_steps(c: &mut PiController, max: usize) -> Option<usize> {
        for _ in 0..1000 {
            c.update(0.0).unwrap();
        }
        (1..=max).find(|_| c.update(20.0).unwrap() >= c.config().beta_max)
    }

    #[test]
    fn anti_windup_bounds_recovery() {
        let gains = PiConfig {
            ki: 1e-3,
            kl_set: 10.0,
            ..Default::default()
        };
        let mut c = PiController::new(gains.clone()).unwrap();
        let steps = recovery_steps(&mut c, 200).expect("recovered within 200 steps");
        assert!(steps <= 200);

        // Reference without the freeze: the integral winds up to 10⁴ and
        // recovery takes over a thousand steps.
        let mut integral = 0.0;
        for _ in 0..1000 {
            integral += 10.0;
        }
        let mut n = 0;
        loop {
            n += 1;
            integral -= 10.0;
            let b = gains.kp / (1.0 + (-10.0f64).exp()) - gains.ki * integral;
            if b >= 1.0 {
                break;
            }
        }
        assert!(n > 1000);
    }

    #[test]
    fn integral_freezes_at_the_floor() {
        let mut c = PiController::new(PiConfig {
            kl_set: 10.0,
            ..Default::default()
        })
        .unwrap();
        // The first step drives the output into the floor; every later step
        // finds it saturated and leaves the integral alone.
        for _ in 0..50 {
            assert_eq!(c.update(0.0).unwrap(), 0.0);
        }
        assert_eq!(c.integral(), 10.0);
    }

    #[test]
    fn ema_smooths() {
        let mut e = Ema::new(0.9);
        assert_eq!(e.update(1.0), 1.0);
        assert!((e.update(0.0) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs() {
        assert!(PiController::new(PiConfig {
            kp: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(PiController::new(PiConfig {
            beta_init: 2.0,
            ..Default::default()
        })
        .is_err());
    }
}
