//! Inference hyperparameters and the flat `key=value` preset format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Built-in presets, one per baseline model: (name, file contents).
pub const PRESETS: [(&str, &str); 5] = [
    ("llama-3.2-1b", include_str!("../../presets/llama-3.2-1b.conf")),
    ("phi-3-mini", include_str!("../../presets/phi-3-mini.conf")),
    ("qwen2-7b", include_str!("../../presets/qwen2-7b.conf")),
    ("mistral-7b", include_str!("../../presets/mistral-7b.conf")),
    ("llava-llama3", include_str!("../../presets/llava-llama3.conf")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub model_name: String,
    pub batch_size: u32,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub beam_size: u32,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            model_name: "llama3.2:1b".into(),
            batch_size: 8,
            max_tokens: 512,
            temperature: 0.7,
            top_p: 0.9,
            top_k: 50,
            beam_size: 4,
        }
    }
}

/// Optional per-field values layered over a base config (flags over preset over defaults).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub model_name: Option<String>,
    pub batch_size: Option<u32>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub top_k: Option<u32>,
    pub beam_size: Option<u32>,
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, message: &str| {
            Err(ConfigError::Invalid {
                field,
                message: message.to_string(),
            })
        };
        if self.model_name.trim().is_empty() {
            return invalid("model_name", "must not be empty");
        }
        if self.batch_size == 0 {
            return invalid("batch_size", "must be positive");
        }
        if self.max_tokens == 0 {
            return invalid("max_tokens", "must be positive");
        }
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return invalid("temperature", "must be a finite value >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return invalid("top_p", "must lie in (0, 1]");
        }
        if self.top_k == 0 {
            return invalid("top_k", "must be positive");
        }
        if self.beam_size == 0 {
            return invalid("beam_size", "must be positive");
        }
        Ok(())
    }

    pub fn with_overrides(mut self, o: &ConfigOverrides) -> Result<Self, ConfigError> {
        if let Some(v) = &o.model_name {
            self.model_name = v.clone();
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        take!(batch_size, max_tokens, temperature, top_p, top_k, beam_size);
        self.validate()?;
        Ok(self)
    }

    /// Parses `key=value` lines over the defaults; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected key=value, found {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| ConfigError::Parse {
                line,
                message: format!("{key}: invalid {what} {value:?}"),
            };
            match key {
                "model_name" => cfg.model_name = value.to_string(),
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("integer"))?,
                "max_tokens" => cfg.max_tokens = value.parse().map_err(|_| bad("integer"))?,
                "temperature" => cfg.temperature = value.parse().map_err(|_| bad("number"))?,
                "top_p" => cfg.top_p = value.parse().map_err(|_| bad("number"))?,
                "top_k" => cfg.top_k = value.parse().map_err(|_| bad("integer"))?,
                "beam_size" => cfg.beam_size = value.parse().map_err(|_| bad("integer"))?,
                other => {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model_name={}", self.model_name);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "max_tokens={}", self.max_tokens);
        let _ = writeln!(out, "temperature={}", self.temperature);
        let _ = writeln!(out, "top_p={}", self.top_p);
        let _ = writeln!(out, "top_k={}", self.top_k);
        let _ = writeln!(out, "beam_size={}", self.beam_size);
        out
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        PRESETS
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
            .and_then(|(_, text)| Self::parse(text))
    }

    /// A preset name, or else a path to a preset file.
    pub fn load(name_or_path: &str) -> Result<Self, ConfigError> {
        match Self::preset(name_or_path) {
            Err(ConfigError::UnknownPreset(_)) => {
                let path = Path::new(name_or_path);
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                Self::parse(&text)
            }
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_expected_hyperparameters() {
        let rows: Vec<(u32, u32, f64, f64, u32, u32)> = PRESETS
            .iter()
            .map(|(name, _)| {
                let c = InferenceConfig::preset(name).unwrap();
                (c.batch_size, c.max_tokens, c.temperature, c.top_p, c.top_k, c.beam_size)
            })
            .collect();
        assert_eq!(
            rows,
            vec![
                (8, 512, 0.7, 0.9, 50, 4),
                (8, 512, 0.7, 0.9, 50, 4),
                (8, 512, 0.8, 0.85, 40, 4),
                (16, 256, 0.9, 0.95, 30, 2),
                (8, 512, 0.7, 0.9, 50, 4),
            ]
        );
    }

    #[test]
    fn text_round_trip() {
        let c = InferenceConfig::preset("mistral-7b").unwrap();
        assert_eq!(InferenceConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(InferenceConfig::parse("").unwrap(), InferenceConfig::default());
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(matches!(
            InferenceConfig::parse("top_p=0\n"),
            Err(ConfigError::Invalid { field: "top_p", .. })
        ));
        assert!(matches!(
            InferenceConfig::parse("top_p=1.5\n"),
            Err(ConfigError::Invalid { field: "top_p", .. })
        ));
        assert!(matches!(
            InferenceConfig::parse("temperature=-0.1\n"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            InferenceConfig::parse("batch_size=0\n"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            InferenceConfig::parse("\nbogus=1\n"),
            Err(ConfigError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            InferenceConfig::parse("top_k=ten\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn overrides_win() {
        let base = InferenceConfig::preset("qwen2-7b").unwrap();
        let cfg = base
            .clone()
            .with_overrides(&ConfigOverrides {
                temperature: Some(0.0),
                model_name: Some("other".into()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.model_name, "other");
        assert_eq!(cfg.top_k, base.top_k);
        assert!(base
            .with_overrides(&ConfigOverrides {
                beam_size: Some(0),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn load_falls_back_to_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "model_name=m\ntop_k=3\n").unwrap();
        let c = InferenceConfig::load(path.to_str().unwrap()).unwrap();
        assert_eq!((c.model_name.as_str(), c.top_k), ("m", 3));
        assert_eq!(InferenceConfig::load("PHI-3-MINI").unwrap().model_name, "phi3:mini");
        assert!(matches!(InferenceConfig::load("/no/such/file"), Err(ConfigError::Io { .. })));
    }
}
