//! The attacker-facing query endpoint.
//!
//! An [`Oracle`] wraps a model with a randomized defense transform, counts
//! queries against a hard budget, and optionally logs every query. Defense
//! randomness comes from the oracle's own generator, independent of any
//! attacker stream, and is drawn fresh on every call.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::loss::argmax_label;
use crate::models::{Model, ModelError};
use crate::rng::SeededRng;
use crate::tensor::{ImageTensor, Shape};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("query budget exhausted")]
    BudgetExceeded,
    #[error("invalid defense parameter: {0}")]
    InvalidParameter(String),
    #[error("query shape {got:?} does not match oracle input shape {expected:?}")]
    ShapeMismatch { expected: Shape, got: Shape },
    #[error("model error: {0}")]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Defense transforms
// ---------------------------------------------------------------------------

/// Inference-time input transform applied before every model evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DefenseSpec {
    /// Pass-through.
    None,
    /// Additive Gaussian input noise with fixed deviation.
    Snd { sigma: f64 },
    /// Gaussian noise scaled per query by k ~ Beta(alpha, beta).
    BetaSnd { sigma: f64, alpha: f64, beta: f64 },
    /// Bilinear resize by a random factor, placed at a random offset inside
    /// a zero canvas sized for the maximum factor.
    RandResizePad { s_min: f64, s_max: f64 },
}

impl DefenseSpec {
    pub fn validate(&self) -> Result<(), OracleError> {
        match *self {
            DefenseSpec::None => Ok(()),
            DefenseSpec::Snd { sigma } => {
                if sigma < 0.0 {
                    return Err(OracleError::InvalidParameter(format!(
                        "snd sigma must be >= 0, got {sigma}"
                    )));
                }
                Ok(())
            }
            DefenseSpec::BetaSnd { sigma, alpha, beta } => {
                if sigma < 0.0 || alpha <= 0.0 || beta <= 0.0 {
                    return Err(OracleError::InvalidParameter(format!(
                        "beta snd needs sigma >= 0 and alpha, beta > 0, got ({sigma}, {alpha}, {beta})"
                    )));
                }
                Ok(())
            }
            DefenseSpec::RandResizePad { s_min, s_max } => {
                if !(1.0 <= s_min && s_min <= s_max) {
                    return Err(OracleError::InvalidParameter(format!(
                        "resize-pad needs 1 <= s_min <= s_max, got ({s_min}, {s_max})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Shape of the transformed input the wrapped model will see.
    pub fn output_shape(&self, input: Shape) -> Shape {
        match *self {
            DefenseSpec::RandResizePad { s_max, .. } => Shape::new(
                (s_max * input.width as f64).ceil() as usize,
                (s_max * input.height as f64).ceil() as usize,
                input.channels,
            ),
            _ => input,
        }
    }

    /// Noise deviation for reporting; zero for deterministic defenses.
    pub fn sigma(&self) -> f64 {
        match *self {
            DefenseSpec::Snd { sigma } | DefenseSpec::BetaSnd { sigma, .. } => sigma,
            _ => 0.0,
        }
    }

    /// Compact label for CSV rows and tables (no commas).
    pub fn label(&self) -> String {
        match *self {
            DefenseSpec::None => "none".to_string(),
            DefenseSpec::Snd { sigma } => format!("snd({sigma})"),
            DefenseSpec::BetaSnd { sigma, alpha, beta } => {
                format!("beta_snd({sigma};{alpha};{beta})")
            }
            DefenseSpec::RandResizePad { s_min, s_max } => {
                format!("resize_pad({s_min:.4};{s_max:.4})")
            }
        }
    }

    pub fn apply(&self, x: &ImageTensor, rng: &mut SeededRng) -> ImageTensor {
        match *self {
            DefenseSpec::None => x.clone(),
            DefenseSpec::Snd { sigma } => apply_scaled_noise(x, sigma, 1.0, rng),
            DefenseSpec::BetaSnd { sigma, alpha, beta } => {
                let k = rng.next_beta(alpha, beta);
                apply_scaled_noise(x, sigma, k, rng)
            }
            DefenseSpec::RandResizePad { s_min, s_max } => {
                apply_rand_resize_pad(x, s_min, s_max, rng)
            }
        }
    }
}

/// `x + k * eta` with `eta ~ N(0, sigma^2 I)`. Forcing `k = 1` is plain
/// additive-noise defense; Beta-scaled noise draws `k` per query.
pub fn apply_scaled_noise(x: &ImageTensor, sigma: f64, k: f64, rng: &mut SeededRng) -> ImageTensor {
    if sigma == 0.0 || k == 0.0 {
        return x.clone();
    }
    let noise: Vec<f64> = (0..x.dim()).map(|_| sigma * rng.next_gaussian()).collect();
    x.add_scaled(&noise, k)
}

/// Beta-scaled noise with parameter validation.
pub fn apply_beta_snd(
    x: &ImageTensor,
    sigma: f64,
    alpha: f64,
    beta: f64,
    rng: &mut SeededRng,
) -> Result<ImageTensor, OracleError> {
    let spec = DefenseSpec::BetaSnd { sigma, alpha, beta };
    spec.validate()?;
    Ok(spec.apply(x, rng))
}

/// Random resize-and-pad: bilinear resize by `s ~ Uniform[s_min, s_max]`,
/// placed at a uniform offset inside a `ceil(s_max W) x ceil(s_max H)` zero
/// canvas. Draw order is scale, then row offset, then column offset.
pub fn apply_rand_resize_pad(
    x: &ImageTensor,
    s_min: f64,
    s_max: f64,
    rng: &mut SeededRng,
) -> ImageTensor {
    let shape = x.shape();
    let s = s_min + (s_max - s_min) * rng.next_f64();
    let new_w = ((s * shape.width as f64) + 0.5).floor().max(1.0) as usize;
    let new_h = ((s * shape.height as f64) + 0.5).floor().max(1.0) as usize;
    let resized = bilinear_resize(x, new_w, new_h);

    let canvas_shape = DefenseSpec::RandResizePad { s_min, s_max }.output_shape(shape);
    let row_off = rng.next_index(canvas_shape.height - new_h + 1);
    let col_off = rng.next_index(canvas_shape.width - new_w + 1);

    let mut data = vec![0.0; canvas_shape.dim()];
    let rs = resized.shape();
    for r in 0..new_h {
        for c in 0..new_w {
            for ch in 0..shape.channels {
                data[canvas_shape.index(r + row_off, c + col_off, ch)] =
                    resized.data()[rs.index(r, c, ch)];
            }
        }
    }
    ImageTensor::new(canvas_shape, data).expect("canvas dims are consistent")
}

/// Bilinear resampling with half-pixel centers; an identity when the target
/// size equals the source size.
pub fn bilinear_resize(x: &ImageTensor, new_w: usize, new_h: usize) -> ImageTensor {
    let src = x.shape();
    let out_shape = Shape::new(new_w, new_h, src.channels);
    let mut data = vec![0.0; out_shape.dim()];
    let sx = src.width as f64 / new_w as f64;
    let sy = src.height as f64 / new_h as f64;
    for r in 0..new_h {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (src.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src.height - 1);
        let wy = fy - y0 as f64;
        for c in 0..new_w {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (src.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src.width - 1);
            let wx = fx - x0 as f64;
            for ch in 0..src.channels {
                let v00 = x.data()[src.index(y0, x0, ch)];
                let v01 = x.data()[src.index(y0, x1, ch)];
                let v10 = x.data()[src.index(y1, x0, ch)];
                let v11 = x.data()[src.index(y1, x1, ch)];
                let top = v00 + wx * (v01 - v00);
                let bottom = v10 + wx * (v11 - v10);
                data[out_shape.index(r, c, ch)] = top + wy * (bottom - top);
            }
        }
    }
    ImageTensor::new(out_shape, data).unwrap()
}

// ---------------------------------------------------------------------------
// Query ledger and log
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryKind {
    Score,
    Decision,
}

/// One logged query. `l2_from_x0` is the distance of the queried input from
/// the run's reference point; inputs are retained only when input logging is
/// enabled, so mismatch statistics can be replayed without re-querying.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRecord {
    pub index: u64,
    pub kind: QueryKind,
    pub l2_from_x0: f64,
    /// Returned top-1 label.
    pub label: usize,
    /// Returned top-1 probability (for decision queries, of the defended run).
    pub top_prob: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defended_input: Option<Vec<f64>>,
}

/// Recorded query stream of one oracle.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QueryLog {
    pub records: Vec<QueryRecord>,
}

impl QueryLog {
    /// Spec'd CSV dump: one row per query with the observable the attacker
    /// received (label for decision queries, top probability for score
    /// queries).
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "query_index,kind,l2_from_x0,output_label_or_top_prob")?;
        for r in &self.records {
            let (kind, observed) = match r.kind {
                QueryKind::Score => ("score", r.top_prob.to_string()),
                QueryKind::Decision => ("decision", r.label.to_string()),
            };
            writeln!(out, "{},{},{},{}", r.index, kind, r.l2_from_x0, observed)?;
        }
        Ok(())
    }
}

/// How much the oracle records per query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Off,
    /// Index, kind, distance and returned output.
    Outputs,
    /// Additionally retain the queried input (enables replay).
    Inputs,
    /// Additionally retain the post-defense input (enables noise inspection).
    Full,
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

/// Query interface shared by the plain oracle and aggregating wrappers.
pub trait QueryOracle {
    /// Defended class-probability vector; consumes budget.
    fn score_query(&mut self, x: &ImageTensor) -> Result<Vec<f64>, OracleError>;
    /// Defended top-1 label; consumes budget.
    fn decision_query(&mut self, x: &ImageTensor) -> Result<usize, OracleError>;
    /// Physical queries issued so far.
    fn queries_used(&self) -> u64;
    /// Physical queries still available.
    fn queries_remaining(&self) -> u64;
}

pub struct Oracle<'a> {
    model: &'a dyn Model,
    defense: DefenseSpec,
    rng: SeededRng,
    input_shape: Shape,
    budget: u64,
    used: u64,
    clip_inputs: bool,
    log_level: LogLevel,
    log: QueryLog,
    reference: Option<ImageTensor>,
}

impl<'a> Oracle<'a> {
    pub fn new(
        model: &'a dyn Model,
        defense: DefenseSpec,
        input_shape: Shape,
        budget: u64,
        rng: SeededRng,
    ) -> Result<Self, OracleError> {
        defense.validate()?;
        let model_dim = model.input_dim();
        let defended_dim = defense.output_shape(input_shape).dim();
        if model_dim != defended_dim {
            return Err(OracleError::InvalidParameter(format!(
                "defense produces dimension {defended_dim} but model expects {model_dim}"
            )));
        }
        Ok(Oracle {
            model,
            defense,
            rng,
            input_shape,
            budget,
            used: 0,
            clip_inputs: true,
            log_level: LogLevel::Off,
            log: QueryLog::default(),
            reference: None,
        })
    }

    /// Whether transformed inputs are clamped to [0, 1] before the model.
    /// On by default; off reproduces the raw noise-addition pipeline.
    pub fn set_clip_inputs(&mut self, clip: bool) {
        self.clip_inputs = clip;
    }

    pub fn set_log_level(&mut self, level: LogLevel) {
        self.log_level = level;
    }

    /// Reference point used for per-query distance logging.
    pub fn set_reference(&mut self, x0: ImageTensor) {
        self.reference = Some(x0);
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }

    pub fn take_log(&mut self) -> QueryLog {
        std::mem::take(&mut self.log)
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn defense(&self) -> &DefenseSpec {
        &self.defense
    }

    fn defended_forward(
        &mut self,
        x: &ImageTensor,
        kind: QueryKind,
    ) -> Result<Vec<f64>, OracleError> {
        if x.shape() != self.input_shape {
            return Err(OracleError::ShapeMismatch {
                expected: self.input_shape,
                got: x.shape(),
            });
        }
        if self.used >= self.budget {
            return Err(OracleError::BudgetExceeded);
        }
        let transformed = self.defense.apply(x, &mut self.rng);
        let fed = if self.clip_inputs {
            transformed.clip01()
        } else {
            transformed
        };
        let probs = self.model.forward_probs(fed.data())?;
        self.used += 1;

        if self.log_level != LogLevel::Off {
            let label = argmax_label(&probs);
            let l2 = self
                .reference
                .as_ref()
                .map(|r| r.l2_distance(x))
                .unwrap_or(f64::NAN);
            self.log.records.push(QueryRecord {
                index: self.used,
                kind,
                l2_from_x0: l2,
                label,
                top_prob: probs[label],
                input: match self.log_level {
                    LogLevel::Inputs | LogLevel::Full => Some(x.data().to_vec()),
                    _ => None,
                },
                defended_input: match self.log_level {
                    LogLevel::Full => Some(fed.data().to_vec()),
                    _ => None,
                },
            });
        }
        Ok(probs)
    }
}

impl QueryOracle for Oracle<'_> {
    fn score_query(&mut self, x: &ImageTensor) -> Result<Vec<f64>, OracleError> {
        self.defended_forward(x, QueryKind::Score)
    }

    fn decision_query(&mut self, x: &ImageTensor) -> Result<usize, OracleError> {
        let probs = self.defended_forward(x, QueryKind::Decision)?;
        Ok(argmax_label(&probs))
    }

    fn queries_used(&self) -> u64 {
        self.used
    }

    fn queries_remaining(&self) -> u64 {
        self.budget - self.used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearModel, Model};

    fn toy_model() -> LinearModel {
        LinearModel::new(vec![vec![1.0, -0.5], vec![-1.0, 0.5]], vec![0.1, -0.1]).unwrap()
    }

    fn point(vals: [f64; 2]) -> ImageTensor {
        ImageTensor::new(Shape::new(2, 1, 1), vals.to_vec()).unwrap()
    }

    #[test]
    fn none_defense_matches_bare_model() {
        let model = toy_model();
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::None,
            Shape::new(2, 1, 1),
            1000,
            SeededRng::new(1),
        )
        .unwrap();
        let mut rng = SeededRng::new(99);
        for _ in 0..100 {
            let x = point([rng.next_f64(), rng.next_f64()]);
            let via_oracle = oracle.score_query(&x).unwrap();
            let direct = model.forward_probs(x.data()).unwrap();
            assert_eq!(via_oracle, direct);
        }
    }

    #[test]
    fn zero_sigma_snd_is_identity() {
        let model = toy_model();
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::Snd { sigma: 0.0 },
            Shape::new(2, 1, 1),
            100,
            SeededRng::new(1),
        )
        .unwrap();
        let x = point([0.25, 0.75]);
        let direct = model.forward_probs(x.data()).unwrap();
        for _ in 0..10 {
            assert_eq!(oracle.score_query(&x).unwrap(), direct);
        }
    }

    #[test]
    fn budget_is_enforced_exactly() {
        let model = toy_model();
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::None,
            Shape::new(2, 1, 1),
            5,
            SeededRng::new(1),
        )
        .unwrap();
        let x = point([0.5, 0.5]);
        for _ in 0..5 {
            oracle.decision_query(&x).unwrap();
        }
        assert!(matches!(
            oracle.decision_query(&x),
            Err(OracleError::BudgetExceeded)
        ));
        assert_eq!(oracle.queries_used(), 5);
    }

    #[test]
    fn defense_validation_rejects_bad_parameters() {
        assert!(DefenseSpec::Snd { sigma: -0.1 }.validate().is_err());
        assert!(DefenseSpec::BetaSnd {
            sigma: 0.1,
            alpha: 0.0,
            beta: 1.0
        }
        .validate()
        .is_err());
        assert!(DefenseSpec::RandResizePad {
            s_min: 0.9,
            s_max: 1.2
        }
        .validate()
        .is_err());
        assert!(DefenseSpec::RandResizePad {
            s_min: 1.2,
            s_max: 1.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn resize_pad_canvas_dimension() {
        let spec = DefenseSpec::RandResizePad {
            s_min: 310.0 / 299.0,
            s_max: 331.0 / 299.0,
        };
        let out = spec.output_shape(Shape::new(8, 8, 1));
        assert_eq!(out.width, 9);
        assert_eq!(out.height, 9);
    }

    #[test]
    fn resize_pad_identity_case() {
        // unit scale with a canvas equal to the original size leaves only the
        // zero offset, so the transform is the identity
        let x = ImageTensor::new(
            Shape::new(4, 4, 1),
            (0..16).map(|i| i as f64 / 16.0).collect(),
        )
        .unwrap();
        let mut rng = SeededRng::new(5);
        let y = apply_rand_resize_pad(&x, 1.0, 1.0, &mut rng);
        assert_eq!(y, x);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let model = toy_model();
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::None,
            Shape::new(2, 1, 1),
            10,
            SeededRng::new(1),
        )
        .unwrap();
        let bad = ImageTensor::new(Shape::new(3, 1, 1), vec![0.0; 3]).unwrap();
        assert!(matches!(
            oracle.score_query(&bad),
            Err(OracleError::ShapeMismatch { .. })
        ));
        // failed queries do not consume budget
        assert_eq!(oracle.queries_used(), 0);
    }
}
