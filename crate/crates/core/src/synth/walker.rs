//! Walker parameters and their class-conditional distributions.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::RiskLabel;
use crate::error::{Error, Result};

/// Segment lengths and radii as fractions of standing body height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimbProportions {
    pub torso: f64,
    pub thigh: f64,
    pub shin: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    pub head_radius: f64,
}

impl Default for LimbProportions {
    fn default() -> Self {
        Self {
            torso: 0.30,
            thigh: 0.245,
            shin: 0.245,
            upper_arm: 0.17,
            forearm: 0.16,
            head_radius: 0.065,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkerParams {
    /// Frames per full stride cycle.
    pub gait_period: f64,
    /// Body lengths per second.
    pub walk_speed: f64,
    /// Vertical bob as a fraction of body height.
    pub head_bob_amplitude: f64,
    /// Radians.
    pub arm_swing_amplitude: f64,
    /// Radians.
    pub leg_swing_amplitude: f64,
    pub limb_lengths: LimbProportions,
    /// Forward trunk lean in radians.
    pub posture_slump: f64,
}

impl WalkerParams {
    pub const MIN_PERIOD: f64 = 8.0;

    pub fn validate(&self) -> Result<()> {
        let amplitudes = [
            self.walk_speed,
            self.head_bob_amplitude,
            self.arm_swing_amplitude,
            self.leg_swing_amplitude,
        ];
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "negative or non-finite amplitude in {self:?}"
            )));
        }
        if !(self.gait_period >= Self::MIN_PERIOD) {
            return Err(Error::InvalidArgument(format!(
                "gait period {} below 8 frames",
                self.gait_period
            )));
        }
        let l = &self.limb_lengths;
        if [l.torso, l.thigh, l.shin, l.upper_arm, l.forearm, l.head_radius]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return Err(Error::InvalidArgument("limb proportions must be positive".into()));
        }
        Ok(())
    }
}

/// Mean and standard deviation of one Gaussian field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, lo: f64, hi: f64) -> Result<f64> {
        if !(self.std >= 0.0) || !self.mean.is_finite() {
            return Err(Error::InvalidArgument(format!("degenerate distribution {self:?}")));
        }
        let x = if self.std == 0.0 {
            self.mean
        } else {
            Normal::new(self.mean, self.std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng)
        };
        Ok(x.clamp(lo, hi))
    }
}

/// Per-field distributions for one class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDistribution {
    pub gait_period: Gaussian,
    pub walk_speed: Gaussian,
    pub head_bob_amplitude: Gaussian,
    pub arm_swing_amplitude: Gaussian,
    pub leg_swing_amplitude: Gaussian,
    pub posture_slump: Gaussian,
    /// Multiplicative jitter (std of a unit-mean Gaussian) on every limb proportion.
    pub limb_scale: Gaussian,
}

/// Both classes' parameter distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub risk: ParamDistribution,
    pub control: ParamDistribution,
}

impl Default for ClassDistribution {
    /// Overlapping classes: each marker alone separates the classes by
    /// roughly 1.5 to 2 standard deviations.
    fn default() -> Self {
        Self {
            control: ParamDistribution {
                gait_period: Gaussian::new(32.0, 3.0),
                walk_speed: Gaussian::new(0.80, 0.10),
                head_bob_amplitude: Gaussian::new(0.030, 0.007),
                arm_swing_amplitude: Gaussian::new(0.50, 0.10),
                leg_swing_amplitude: Gaussian::new(0.46, 0.06),
                posture_slump: Gaussian::new(0.03, 0.04),
                limb_scale: Gaussian::new(1.0, 0.04),
            },
            risk: ParamDistribution {
                gait_period: Gaussian::new(37.0, 3.5),
                walk_speed: Gaussian::new(0.62, 0.10),
                head_bob_amplitude: Gaussian::new(0.016, 0.006),
                arm_swing_amplitude: Gaussian::new(0.28, 0.10),
                leg_swing_amplitude: Gaussian::new(0.35, 0.06),
                posture_slump: Gaussian::new(0.14, 0.05),
                limb_scale: Gaussian::new(1.0, 0.04),
            },
        }
    }
}

impl ClassDistribution {
    pub fn for_label(&self, label: RiskLabel) -> &ParamDistribution {
        match label {
            RiskLabel::Risk => &self.risk,
            RiskLabel::Control => &self.control,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in [&self.risk, &self.control] {
            for g in d.fields() {
                if !(g.std >= 0.0) || !g.mean.is_finite() {
                    return Err(Error::config(
                        "generator.distribution",
                        format!("degenerate field {g:?}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl ParamDistribution {
    fn fields(&self) -> [Gaussian; 7] {
        [
            self.gait_period,
            self.walk_speed,
            self.head_bob_amplitude,
            self.arm_swing_amplitude,
            self.leg_swing_amplitude,
            self.posture_slump,
            self.limb_scale,
        ]
    }
}

/// One truncated-Gaussian draw per field, clamped into the valid ranges.
pub fn sample_walker_params<R: Rng + ?Sized>(
    label: RiskLabel,
    dist: &ClassDistribution,
    rng: &mut R,
) -> Result<WalkerParams> {
    let d = dist.for_label(label);
    let base = LimbProportions::default();
    let limb = |len: f64, rng: &mut R| -> Result<f64> { Ok(len * d.limb_scale.sample(rng, 0.8, 1.2)?) };
    let limb_lengths = LimbProportions {
        torso: limb(base.torso, rng)?,
        thigh: limb(base.thigh, rng)?,
        shin: limb(base.shin, rng)?,
        upper_arm: limb(base.upper_arm, rng)?,
        forearm: limb(base.forearm, rng)?,
        head_radius: limb(base.head_radius, rng)?,
    };
    let params = WalkerParams {
        gait_period: d.gait_period.sample(rng, WalkerParams::MIN_PERIOD, 90.0)?,
        walk_speed: d.walk_speed.sample(rng, 0.0, 2.0)?,
        head_bob_amplitude: d.head_bob_amplitude.sample(rng, 0.0, 0.06)?,
        arm_swing_amplitude: d.arm_swing_amplitude.sample(rng, 0.0, 0.9)?,
        leg_swing_amplitude: d.leg_swing_amplitude.sample(rng, 0.0, 0.7)?,
        limb_lengths,
        posture_slump: d.posture_slump.sample(rng, -0.15, 0.35)?,
    };
    params.validate()?;
    Ok(params)
}
