//! Plain-text `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are skipped, unknown or repeated
//! keys are errors. [`RunConfig::to_text`] writes every key, and the output
//! parses back to an equal value.

use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

use crate::losses::{BoundaryParams, LossWeights};
use crate::mask_prep::PrepParams;
use crate::model::{OptimParams, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub prep: PrepParams,
    /// Classes averaged into mF1 and mIoU.
    pub include: Vec<usize>,
    pub ignore_label: Option<u16>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            prep: PrepParams::default(),
            include: vec![0, 1, 2, 3, 4],
            ignore_label: None,
        }
    }
}

const KEYS: [&str; 23] = [
    "classes",
    "include",
    "ignore_label",
    "seed",
    "window",
    "train_stride",
    "test_stride",
    "learning_rate",
    "momentum",
    "weight_decay",
    "batch_size",
    "lambda_o",
    "lambda_b",
    "theta0",
    "theta",
    "epsilon",
    "max_objects",
    "min_pixels",
    "epochs",
    "max_steps",
    "hidden_channels",
    "layers",
    "profile",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_optional<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: Display,
{
    if value == "none" {
        Ok(None)
    } else {
        parse(line, key, value).map(Some)
    }
}

fn show_optional<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

/// Parses a comma-separated class list such as `0,1,2`.
pub fn parse_class_list(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('[') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key);
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let t = &mut self.train;
        match key {
            "classes" => t.classes = parse(line, key, value)?,
            "include" => {
                self.include = parse_class_list(value).map_err(|reason| ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    value: value.to_string(),
                    reason,
                })?
            }
            "ignore_label" => self.ignore_label = parse_optional(line, key, value)?,
            "seed" => t.seed = parse(line, key, value)?,
            "window" => t.window = parse(line, key, value)?,
            "train_stride" => t.train_stride = parse(line, key, value)?,
            "test_stride" => t.test_stride = parse(line, key, value)?,
            "learning_rate" => t.optim.learning_rate = parse(line, key, value)?,
            "momentum" => t.optim.momentum = parse(line, key, value)?,
            "weight_decay" => t.optim.weight_decay = parse(line, key, value)?,
            "batch_size" => t.optim.batch_size = parse(line, key, value)?,
            "lambda_o" => t.weights.lambda_o = parse(line, key, value)?,
            "lambda_b" => t.weights.lambda_b = parse(line, key, value)?,
            "theta0" => t.boundary.theta0 = parse(line, key, value)?,
            "theta" => t.boundary.theta = parse(line, key, value)?,
            "epsilon" => t.boundary.epsilon = parse(line, key, value)?,
            "max_objects" => self.prep.max_objects = parse(line, key, value)?,
            "min_pixels" => self.prep.min_pixels = parse(line, key, value)?,
            "epochs" => t.epochs = parse(line, key, value)?,
            "max_steps" => t.max_steps = parse_optional(line, key, value)?,
            "hidden_channels" => t.hidden_channels = parse(line, key, value)?,
            "layers" => t.layers = parse(line, key, value)?,
            "profile" => {
                let profile = match value {
                    "vaihingen" => crate::metrics::MetricProfile::vaihingen(),
                    "loveda" => crate::metrics::MetricProfile::loveda(),
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            reason: "expected vaihingen or loveda".into(),
                        })
                    }
                };
                t.classes = profile.classes();
                self.include = profile.included;
            }
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.train.validate().map_err(|e| invalid(e.to_string()))?;
        self.prep.validate().map_err(|e| invalid(e.to_string()))?;
        if self.include.is_empty() {
            return Err(invalid("include lists no classes".into()));
        }
        for (i, &c) in self.include.iter().enumerate() {
            if c >= self.train.classes {
                return Err(invalid(format!(
                    "included class {c} is not below classes = {}",
                    self.train.classes
                )));
            }
            if self.include[..i].contains(&c) {
                return Err(invalid(format!("class {c} included twice")));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        self.train.weights
    }

    pub fn boundary(&self) -> BoundaryParams {
        self.train.boundary
    }

    pub fn optim(&self) -> OptimParams {
        self.train.optim
    }

    /// Every key except `profile`, one per line.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let include: Vec<String> = self.include.iter().map(usize::to_string).collect();
        let pairs: [(&str, String); 22] = [
            ("classes", t.classes.to_string()),
            ("include", include.join(",")),
            ("ignore_label", show_optional(&self.ignore_label)),
            ("seed", t.seed.to_string()),
            ("window", t.window.to_string()),
            ("train_stride", t.train_stride.to_string()),
            ("test_stride", t.test_stride.to_string()),
            ("learning_rate", t.optim.learning_rate.to_string()),
            ("momentum", t.optim.momentum.to_string()),
            ("weight_decay", t.optim.weight_decay.to_string()),
            ("batch_size", t.optim.batch_size.to_string()),
            ("lambda_o", t.weights.lambda_o.to_string()),
            ("lambda_b", t.weights.lambda_b.to_string()),
            ("theta0", t.boundary.theta0.to_string()),
            ("theta", t.boundary.theta.to_string()),
            ("epsilon", t.boundary.epsilon.to_string()),
            ("max_objects", self.prep.max_objects.to_string()),
            ("min_pixels", self.prep.min_pixels.to_string()),
            ("epochs", t.epochs.to_string()),
            ("max_steps", show_optional(&t.max_steps)),
            ("hidden_channels", t.hidden_channels.to_string()),
            ("layers", t.layers.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_mirror_published_protocol() {
        let c = RunConfig::default();
        let t = &c.train;
        assert_eq!((t.window, t.train_stride, t.test_stride), (256, 256, 32));
        assert_eq!(
            (
                t.optim.learning_rate,
                t.optim.momentum,
                t.optim.weight_decay,
                t.optim.batch_size
            ),
            (0.01, 0.9, 0.0005, 10)
        );
        assert_eq!((t.weights.lambda_o, t.weights.lambda_b), (1.0, 0.1));
        assert_eq!((c.prep.max_objects, c.prep.min_pixels), (50, 50));
        c.validate().unwrap();
    }

    #[test]
    fn parses_overrides_and_comments() {
        let c = RunConfig::parse("# desk scale\nwindow = 32\n\ntrain_stride=32\nmax_steps = 200\nignore_label = 255\n")
            .unwrap();
        assert_eq!(c.train.window, 32);
        assert_eq!(c.train.max_steps, Some(200));
        assert_eq!(c.ignore_label, Some(255));
        assert_eq!(c.train.test_stride, 32);
    }

    #[test]
    fn profiles_set_classes() {
        let c = RunConfig::parse("profile = loveda").unwrap();
        assert_eq!(c.train.classes, 7);
        assert_eq!(c.include, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(
            RunConfig::parse("colour = red"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("seed = 1\nseed = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(RunConfig::parse("window"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(
            RunConfig::parse("momentum = fast"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            RunConfig::parse("momentum = 1.5"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::parse("include = 0,9"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(RunConfig::parse("theta = 4"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            RunConfig::parse("max_objects = 0"),
            Err(ConfigError::Invalid(_))
        ));
    }

    proptest! {
        #[test]
        fn text_round_trips(
            lr in 1e-6f64..1.0,
            mom in 0.0f64..0.99,
            lo in 0.0f64..5.0,
            lb in 0.0f64..5.0,
            eps in 1e-12f64..1e-3,
            seed in any::<u64>(),
            steps in proptest::option::of(1usize..10_000),
            ignore in proptest::option::of(any::<u16>()),
        ) {
            let mut c = RunConfig::default();
            c.train.optim.learning_rate = lr;
            c.train.optim.momentum = mom;
            c.train.weights = LossWeights { lambda_o: lo, lambda_b: lb };
            c.train.boundary.epsilon = eps;
            c.train.seed = seed;
            c.train.max_steps = steps;
            c.ignore_label = ignore;
            prop_assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
