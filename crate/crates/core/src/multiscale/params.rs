//! Tunable constants with desk-scale and paper-faithful profiles.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Parameter profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Numerically workable thresholds for desk-scale experiments.
    Desk,
    /// The proof-scale thresholds; stops trivially at the top scale and is
    /// provided for completeness.
    PaperFaithful,
}

/// All tunable constants of the multiscale pipelines.
///
/// `alpha_small` applies when the reference line is far from vertical
/// (`theta_V(D0) > theta0`), `alpha_big` when it is nearly vertical.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamsLedger {
    pub profile: Profile,
    /// Density threshold delta.
    pub delta: f64,
    /// Flatness threshold epsilon.
    pub eps: f64,
    pub alpha_small: f64,
    pub alpha_big: f64,
    pub theta0: f64,
    /// Comparability constant tau.
    pub tau: f64,
    /// Ball dilation factor k > 1 in the beta numbers.
    pub k_dilate: f64,
    /// Smallness budget eta for "small permutation sum" verdicts.
    pub eta_budget: f64,
    /// Planar Besicovitch overlap constant.
    pub besicovitch_n: u32,
    /// Calibrated constant slots C1..C7.
    pub c_slots: [f64; 7],
    /// Lipschitz-extension factor C_L.
    pub c_l: f64,
}

impl ParamsLedger {
    pub fn desk() -> ParamsLedger {
        let theta0 = std::f64::consts::PI / 12.0;
        ParamsLedger {
            profile: Profile::Desk,
            delta: 0.05,
            eps: 0.1,
            alpha_small: theta0 / 10.0,
            alpha_big: (10.0 * theta0).min(std::f64::consts::FRAC_PI_4),
            theta0,
            tau: 10.0,
            k_dilate: 2.0,
            eta_budget: 0.01,
            besicovitch_n: 19,
            c_slots: [16.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            c_l: 4.0,
        }
    }

    /// The proof-scale thresholds. The flatness constraint
    /// `eps^(1/50) < alpha` asks for `eps < 1e-325`, below the smallest
    /// positive f64, so `eps` is clamped to the representability floor and
    /// `validate` reports the profile as trivially-stopping.
    pub fn paper_faithful(n_points_hint: usize) -> ParamsLedger {
        let theta0 = std::f64::consts::PI * 1e-6;
        let c1 = 16.0;
        let n = n_points_hint.max(1) as f64;
        ParamsLedger {
            profile: Profile::PaperFaithful,
            delta: 1e-10 / n,
            eps: f64::from_bits(1), // smallest positive subnormal
            alpha_small: theta0 / 10.0,
            alpha_big: 10.0 * theta0,
            theta0,
            tau: 1e4 * c1,
            k_dilate: 2.0,
            eta_budget: 0.01,
            besicovitch_n: 19,
            c_slots: [c1, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            c_l: 4.0,
        }
    }

    /// Pick the angle tolerance according to the vertical angle of the
    /// reference line: `alpha_small` when far from vertical, `alpha_big`
    /// when nearly vertical.
    pub fn alpha_for(&self, theta_v_d0: f64) -> f64 {
        if theta_v_d0 > self.theta0 {
            self.alpha_small
        } else {
            self.alpha_big
        }
    }

    /// Validate the internal inequalities. Returns human-readable warnings
    /// (the paper-faithful profile cannot represent its own flatness bound
    /// in f64 and always warns).
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.delta > 0.0 && self.eps > 0.0 && self.theta0 > 0.0) {
            return Err(CoreError::InvalidInput(
                "delta, eps, theta0 must be positive".into(),
            ));
        }
        if !(self.tau >= 1.0) || !(self.k_dilate > 1.0) {
            return Err(CoreError::InvalidInput(
                "tau must be >= 1 and k_dilate > 1".into(),
            ));
        }
        let mut warnings = Vec::new();
        if self.profile == Profile::PaperFaithful {
            let alpha_min = self.alpha_small.min(self.alpha_big);
            if !(self.alpha_small < std::f64::consts::PI / 1e4) {
                return Err(CoreError::InvalidInput(
                    "paper-faithful alpha must stay below pi/10^4".into(),
                ));
            }
            if self.eps.powf(0.02) >= alpha_min {
                if self.eps > f64::from_bits(1) {
                    return Err(CoreError::InvalidInput(
                        "paper-faithful profile requires eps^(1/50) < alpha".into(),
                    ));
                }
                warnings.push(
                    "flatness threshold clamped to the f64 floor; eps^(1/50) < alpha is \
                     unrepresentable and the stopping time is trivial at the top scale"
                        .to_string(),
                );
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_profile_validates_cleanly() {
        let p = ParamsLedger::desk();
        assert!(p.validate().unwrap().is_empty());
        assert!(p.alpha_for(0.5) == p.alpha_small);
        assert!(p.alpha_for(1e-3) == p.alpha_big);
    }

    #[test]
    fn paper_faithful_profile_warns() {
        let p = ParamsLedger::paper_faithful(1000);
        let warnings = p.validate().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(p.delta < 1e-12);
    }
}
