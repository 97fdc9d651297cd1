//! Controller features, the single-hidden-layer policy network, and the
//! capacity-matching protocols used to compare the two conditions fairly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{forward_kinematics, ArmState, Controller, Morphology, Observation};
use crate::Vec2;

/// Feature count without morphology inputs.
pub const CONTROL_INPUTS: usize = 7;
/// Number of morphology genes appended to the features under co-design.
pub const MORPH_INPUTS: usize = 2;
/// One torque per joint.
pub const OUTPUTS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("expected {expected} weights for layout {layout}, got {got}")]
    WeightLength { expected: usize, got: usize, layout: NetLayout },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("parameter budget {budget} is below the one-unit minimum {minimum}")]
    BudgetTooSmall { budget: usize, minimum: usize },
}

/// Which parameters are being optimised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// Morphology frozen at `baseline`; the controller sees 7 features.
    ControlOnly { baseline: Morphology },
    /// Morphology and controller evolved together; the controller sees 9 features.
    CoDesign,
}

impl Condition {
    pub fn tag(&self) -> ConditionTag {
        match self {
            Condition::ControlOnly { .. } => ConditionTag::ControlOnly,
            Condition::CoDesign => ConditionTag::CoDesign,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.tag().input_dim()
    }
}

/// Condition label without payload, used in records and CLI flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionTag {
    ControlOnly,
    CoDesign,
}

impl ConditionTag {
    pub const ALL: [ConditionTag; 2] = [ConditionTag::ControlOnly, ConditionTag::CoDesign];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionTag::ControlOnly => "control_only",
            ConditionTag::CoDesign => "co_design",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ConditionTag::ControlOnly => CONTROL_INPUTS,
            ConditionTag::CoDesign => CONTROL_INPUTS + MORPH_INPUTS,
        }
    }

    pub fn with_baseline(self, baseline: Morphology) -> Condition {
        match self {
            ConditionTag::ControlOnly => Condition::ControlOnly { baseline },
            ConditionTag::CoDesign => Condition::CoDesign,
        }
    }
}

impl fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "control_only" => Ok(ConditionTag::ControlOnly),
            "co_design" => Ok(ConditionTag::CoDesign),
            other => Err(format!("unknown condition {other:?} (expected control_only or co_design)")),
        }
    }
}

/// Input features for the controller.
///
/// `[q1, q2, dq1, dq2, x*_x − p_x, x*_y − p_y, t/T]`, followed by `[l1, l2]`
/// under co-design.
pub fn build_features(
    state: &ArmState,
    target: Vec2,
    morph: &Morphology,
    condition: &Condition,
    t: usize,
    horizon: usize,
) -> Vec<f64> {
    let ee = forward_kinematics(morph, state.q()).1;
    let mut buf = [0.0; CONTROL_INPUTS + MORPH_INPUTS];
    let n = fill_features(&mut buf, state, ee, target, morph, condition.tag(), t, horizon);
    buf[..n].to_vec()
}

#[allow(clippy::too_many_arguments)]
fn fill_features(
    out: &mut [f64; CONTROL_INPUTS + MORPH_INPUTS],
    state: &ArmState,
    ee: Vec2,
    target: Vec2,
    morph: &Morphology,
    tag: ConditionTag,
    t: usize,
    horizon: usize,
) -> usize {
    let err = target - ee;
    out[..CONTROL_INPUTS].copy_from_slice(&[
        state.q1,
        state.q2,
        state.dq1,
        state.dq2,
        err.x,
        err.y,
        t as f64 / horizon.max(1) as f64,
    ]);
    if tag == ConditionTag::CoDesign {
        out[CONTROL_INPUTS] = morph.l1;
        out[CONTROL_INPUTS + 1] = morph.l2;
    }
    tag.input_dim()
}

/// Exact parameter count of a single-hidden-layer MLP with biases.
pub const fn param_count(d_in: usize, hidden: usize, d_out: usize) -> usize {
    d_in * hidden + hidden * d_out + hidden + d_out
}

/// Largest hidden width whose parameter count does not exceed `budget`.
pub fn matched_hidden_width(budget: usize, d_in: usize, d_out: usize) -> Result<usize, PolicyError> {
    let minimum = param_count(d_in, 1, d_out);
    if budget < minimum {
        return Err(PolicyError::BudgetTooSmall { budget, minimum });
    }
    // P(H) = H (d_in + d_out + 1) + d_out is affine in H.
    Ok((budget - d_out) / (d_in + d_out + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetLayout {
    pub d_in: usize,
    pub hidden: usize,
    pub d_out: usize,
}

impl NetLayout {
    pub fn new(d_in: usize, hidden: usize) -> Result<Self, PolicyError> {
        if !matches!(d_in, CONTROL_INPUTS | 9) {
            return Err(PolicyError::InvalidLayout(format!("d_in must be 7 or 9, got {d_in}")));
        }
        if hidden == 0 {
            return Err(PolicyError::InvalidLayout("hidden width must be >= 1".into()));
        }
        Ok(NetLayout { d_in, hidden, d_out: OUTPUTS })
    }

    pub fn param_count(&self) -> usize {
        param_count(self.d_in, self.hidden, self.d_out)
    }
}

impl fmt::Display for NetLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.d_in, self.hidden, self.d_out)
    }
}

/// Capacity-matching rule between the two conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Same hidden width; co-design carries `2H` extra input weights.
    #[default]
    EqualWidth,
    /// Co-design hidden width shrunk so its parameter count does not exceed control-only's.
    EqualParams,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::EqualWidth => "equal_width",
            Protocol::EqualParams => "equal_params",
        }
    }

    /// Network layout for `tag` given the control-only hidden width.
    pub fn layout_for(&self, tag: ConditionTag, hidden: usize) -> Result<NetLayout, PolicyError> {
        let control = NetLayout::new(CONTROL_INPUTS, hidden)?;
        match (self, tag) {
            (_, ConditionTag::ControlOnly) => Ok(control),
            (Protocol::EqualWidth, ConditionTag::CoDesign) => NetLayout::new(tag.input_dim(), hidden),
            (Protocol::EqualParams, ConditionTag::CoDesign) => {
                let h = matched_hidden_width(control.param_count(), tag.input_dim(), OUTPUTS)?;
                NetLayout::new(tag.input_dim(), h)
            }
        }
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "equal_width" => Ok(Protocol::EqualWidth),
            "equal_params" => Ok(Protocol::EqualParams),
            other => Err(format!("unknown protocol {other:?} (expected equal_width or equal_params)")),
        }
    }
}

/// Single-hidden-layer tanh network with a tanh-squashed, torque-scaled output.
///
/// Weights are laid out flat as `W1` (row-major, `hidden × d_in`), `b1`,
/// `W2` (row-major, `d_out × hidden`), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    layout: NetLayout,
    weights: Vec<f64>,
    torque_limit: f64,
}

impl PolicyNet {
    pub fn new(layout: NetLayout, weights: Vec<f64>, torque_limit: f64) -> Result<Self, PolicyError> {
        if weights.len() != layout.param_count() {
            return Err(PolicyError::WeightLength { expected: layout.param_count(), got: weights.len(), layout });
        }
        Ok(PolicyNet { layout, weights, torque_limit })
    }

    pub fn zeros(layout: NetLayout, torque_limit: f64) -> Self {
        PolicyNet { layout, weights: vec![0.0; layout.param_count()], torque_limit }
    }

    pub fn layout(&self) -> NetLayout {
        self.layout
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn torque_limit(&self) -> f64 {
        self.torque_limit
    }

    pub fn forward(&self, features: &[f64]) -> Result<[f64; 2], PolicyError> {
        if features.len() != self.layout.d_in {
            return Err(PolicyError::FeatureLength { expected: self.layout.d_in, got: features.len() });
        }
        Ok(self.forward_unchecked(features))
    }

    fn forward_unchecked(&self, x: &[f64]) -> [f64; 2] {
        let NetLayout { d_in, hidden, .. } = self.layout;
        let (w1, rest) = self.weights.split_at(hidden * d_in);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(OUTPUTS * hidden);

        let mut acc = [b2[0], b2[1]];
        for (j, row) in w1.chunks_exact(d_in).enumerate() {
            let pre: f64 = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            let h = pre.tanh();
            acc[0] += w2[j] * h;
            acc[1] += w2[hidden + j] * h;
        }
        [self.torque_limit * acc[0].tanh(), self.torque_limit * acc[1].tanh()]
    }
}

/// A policy network bound to the condition that decides its features.
#[derive(Debug, Clone)]
pub struct NeuralController {
    pub net: PolicyNet,
    pub tag: ConditionTag,
}

impl Controller for NeuralController {
    fn act(&self, obs: &Observation<'_>) -> [f64; 2] {
        let mut buf = [0.0; CONTROL_INPUTS + MORPH_INPUTS];
        let n = fill_features(&mut buf, obs.state, obs.ee, obs.target, obs.morph, self.tag, obs.step, obs.horizon);
        self.net.forward_unchecked(&buf[..n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn feature_lengths() {
        let m = Morphology::baseline();
        let s = ArmState::at_rest([FRAC_PI_2, 0.0]);
        let ctrl = Condition::ControlOnly { baseline: m };
        assert_eq!(build_features(&s, Vec2::new(0.1, 0.1), &m, &ctrl, 0, 300).len(), 7);
        assert_eq!(build_features(&s, Vec2::new(0.1, 0.1), &m, &Condition::CoDesign, 0, 300).len(), 9);
    }

    #[test]
    fn feature_error_zero_at_target() {
        let m = Morphology::baseline();
        let s = ArmState::at_rest([0.0, 0.0]);
        let f = build_features(&s, Vec2::new(0.30, 0.0), &m, &Condition::CoDesign, 150, 300);
        assert_eq!(&f[4..6], &[0.0, 0.0]);
        assert_eq!(f[6], 0.5);
        assert_eq!(&f[7..], &[0.15, 0.15]);
    }

    #[test]
    fn param_count_values() {
        assert_eq!(param_count(1, 1, 1), 4);
        assert_eq!(param_count(7, 32, 2), 322);
        assert_eq!(param_count(7, 64, 2), 642);
    }

    #[test]
    fn matched_width_values() {
        assert_eq!(matched_hidden_width(642, 9, 2).unwrap(), 53);
        assert_eq!(matched_hidden_width(param_count(7, 64, 2), 7, 2).unwrap(), 64);
        assert_eq!(matched_hidden_width(param_count(9, 10, 2), 9, 2).unwrap(), 10);
        assert!(matches!(matched_hidden_width(10, 9, 2), Err(PolicyError::BudgetTooSmall { .. })));
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = PolicyNet::zeros(NetLayout::new(9, 16).unwrap(), 1.0);
        assert_eq!(net.forward(&[1.0; 9]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = PolicyNet::zeros(NetLayout::new(7, 4).unwrap(), 1.0);
        assert!(matches!(net.forward(&[0.0; 9]), Err(PolicyError::FeatureLength { expected: 7, got: 9 })));
        assert!(PolicyNet::new(NetLayout::new(7, 4).unwrap(), vec![0.0; 3], 1.0).is_err());
    }

    #[test]
    fn one_hidden_unit_by_hand() {
        // d_in = 7, H = 1: W1 (7), b1 (1), W2 (2), b2 (2).
        let layout = NetLayout::new(7, 1).unwrap();
        let mut w = vec![0.0; layout.param_count()];
        w[0] = 0.5; // x0
        w[4] = -2.0; // x4
        w[7] = 0.1; // b1
        w[8] = 1.5; // W2[0][0]
        w[9] = -0.7; // W2[1][0]
        w[10] = 0.2; // b2[0]
        w[11] = 0.0; // b2[1]
        let net = PolicyNet::new(layout, w, 0.8).unwrap();
        let x = [0.4, 9.0, 9.0, 9.0, 0.3, 9.0, 9.0];
        let h = (0.5f64 * 0.4 - 2.0 * 0.3 + 0.1).tanh();
        let expected = [0.8 * (1.5 * h + 0.2).tanh(), 0.8 * (-0.7 * h).tanh()];
        let got = net.forward(&x).unwrap();
        assert!((got[0] - expected[0]).abs() < 1e-15);
        assert!((got[1] - expected[1]).abs() < 1e-15);
    }

    #[test]
    fn protocols() {
        let a = Protocol::EqualWidth.layout_for(ConditionTag::CoDesign, 64).unwrap();
        let c = Protocol::EqualWidth.layout_for(ConditionTag::ControlOnly, 64).unwrap();
        assert_eq!(a.hidden, c.hidden);
        assert_eq!(a.param_count() - c.param_count(), MORPH_INPUTS * 64);
        let b = Protocol::EqualParams.layout_for(ConditionTag::CoDesign, 64).unwrap();
        assert_eq!(b.hidden, 53);
    }

    #[test]
    fn tag_round_trip() {
        for tag in ConditionTag::ALL {
            assert_eq!(tag.as_str().parse::<ConditionTag>().unwrap(), tag);
        }
        assert!("both".parse::<ConditionTag>().is_err());
    }
}
