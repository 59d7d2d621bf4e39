//! Pipeline configuration: a flat `key = value` text format with dotted keys,
//! mode rules, and a stable digest of the effective settings.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::events::{default_litter_classes, EventConfig};
use crate::identity::MatchConfig;
use crate::metrics::DEFAULT_IOU_THRESHOLD;
use crate::postprocess::{AflinkConfig, GsiConfig, PriorMean};
use crate::tracker::TrackerConfig;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Motion-only association, no post-processing.
    SortBaseline,
    /// Motion and appearance, no post-processing.
    DeepSort,
    /// Motion and appearance, then tracklet linking and gap interpolation.
    Improved,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::SortBaseline, Mode::DeepSort, Mode::Improved];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SortBaseline => "sort-baseline",
            Mode::DeepSort => "deepsort",
            Mode::Improved => "improved",
        }
    }

    pub fn postprocess(self) -> bool {
        self == Mode::Improved
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (sort-baseline, deepsort, improved)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub tracker: TrackerConfig,
    pub gsi: GsiConfig,
    pub aflink: AflinkConfig,
    pub events: EventConfig,
    pub identity: MatchConfig,
    pub litter_classes: BTreeSet<String>,
    pub iou_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Improved,
            tracker: TrackerConfig::default(),
            gsi: GsiConfig::default(),
            aflink: AflinkConfig::default(),
            events: EventConfig::default(),
            identity: MatchConfig::default(),
            litter_classes: default_litter_classes(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_array<const N: usize>(key: &str, value: &str) -> Result<[f64; N]> {
    let items: Vec<f64> = value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect::<Result<_>>()?;
    items
        .try_into()
        .map_err(|v: Vec<f64>| Error::Config(format!("{key}: expected {N} values, got {}", v.len())))
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.tracker;
        let a = &mut t.association;
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "tracker.n_init" => t.n_init = parse(key, v)?,
            "tracker.max_age" => t.max_age = parse(key, v)?,
            "tracker.ema_alpha" => t.ema_alpha = parse(key, v)?,
            "tracker.min_confidence" => t.min_confidence = parse(key, v)?,
            "association.lambda_m" => a.lambda_m = parse(key, v)?,
            "association.lambda_a" => a.lambda_a = parse(key, v)?,
            "association.motion_gate" => a.motion_gate = parse(key, v)?,
            "association.appearance_gate" => a.appearance_gate = parse(key, v)?,
            "association.infeasible_cost" => a.infeasible_cost = parse(key, v)?,
            "ukf.alpha" => t.ukf.alpha = parse(key, v)?,
            "ukf.beta" => t.ukf.beta = parse(key, v)?,
            "ukf.kappa" => t.ukf.kappa = parse(key, v)?,
            "ukf.process_noise_scale" => t.ukf.process_noise_scale = parse_array(key, v)?,
            "ukf.measurement_noise_scale" => t.ukf.measurement_noise_scale = parse_array(key, v)?,
            "gsi.length_scale" => self.gsi.length_scale = parse(key, v)?,
            "gsi.noise_variance" => self.gsi.noise_variance = parse(key, v)?,
            "gsi.max_gap" => self.gsi.max_gap = parse(key, v)?,
            "gsi.context_frames" => self.gsi.context_frames = parse(key, v)?,
            "gsi.prior_mean" => {
                self.gsi.prior_mean = match v {
                    "zero" => PriorMean::Zero,
                    "linear" => PriorMean::LinearTrend,
                    _ => return Err(Error::Config(format!("{key}: expected zero or linear, got {v:?}"))),
                }
            }
            "aflink.max_frame_gap" => self.aflink.max_frame_gap = parse(key, v)?,
            "aflink.max_prediction_error" => self.aflink.max_prediction_error = parse(key, v)?,
            "aflink.min_tracklet_length" => self.aflink.min_tracklet_length = parse(key, v)?,
            "aflink.score_threshold" => self.aflink.score_threshold = parse(key, v)?,
            "events.zero_area_epsilon" => self.events.zero_area_epsilon = parse(key, v)?,
            "events.separation_window" => self.events.separation_window = parse(key, v)?,
            "events.min_separation_slope" => self.events.min_separation_slope = parse(key, v)?,
            "events.min_contact_frames" => self.events.min_contact_frames = parse(key, v)?,
            "events.vertical_shift_min" => self.events.vertical_shift_min = parse(key, v)?,
            "events.debounce_frames" => self.events.debounce_frames = parse(key, v)?,
            "events.person_margin" => self.events.person_margin = parse(key, v)?,
            "identity.threshold" => self.identity.threshold = parse(key, v)?,
            "identity.ambiguity_margin" => self.identity.ambiguity_margin = parse(key, v)?,
            "identity.arcface_margin" => self.identity.arcface_margin = parse(key, v)?,
            "identity.arcface_scale" => self.identity.arcface_scale = parse(key, v)?,
            "litter.classes" => {
                self.litter_classes = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "eval.iou_threshold" => self.iou_threshold = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))
    }

    /// `KEY=VALUE` override as given on a command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k, v)
    }

    /// The configuration actually run: mode rules applied, then validated.
    pub fn effective(&self) -> Result<Self> {
        let mut cfg = self.clone();
        if cfg.mode == Mode::SortBaseline {
            cfg.tracker.association.lambda_a = 0.0;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.gsi.validate()?;
        self.aflink.validate()?;
        self.events.validate()?;
        self.identity.validate()?;
        if self.litter_classes.is_empty() {
            return Err(Error::Config("litter.classes must name at least one class".into()));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config("eval.iou_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Every key with its value, sorted by key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.tracker;
        let a = &t.association;
        let mut v = vec![
            ("mode", self.mode.to_string()),
            ("tracker.n_init", t.n_init.to_string()),
            ("tracker.max_age", t.max_age.to_string()),
            ("tracker.ema_alpha", t.ema_alpha.to_string()),
            ("tracker.min_confidence", t.min_confidence.to_string()),
            ("association.lambda_m", a.lambda_m.to_string()),
            ("association.lambda_a", a.lambda_a.to_string()),
            ("association.motion_gate", a.motion_gate.to_string()),
            ("association.appearance_gate", a.appearance_gate.to_string()),
            ("association.infeasible_cost", a.infeasible_cost.to_string()),
            ("ukf.alpha", t.ukf.alpha.to_string()),
            ("ukf.beta", t.ukf.beta.to_string()),
            ("ukf.kappa", t.ukf.kappa.to_string()),
            ("ukf.process_noise_scale", join(&t.ukf.process_noise_scale)),
            ("ukf.measurement_noise_scale", join(&t.ukf.measurement_noise_scale)),
            ("gsi.length_scale", self.gsi.length_scale.to_string()),
            ("gsi.noise_variance", self.gsi.noise_variance.to_string()),
            ("gsi.max_gap", self.gsi.max_gap.to_string()),
            ("gsi.context_frames", self.gsi.context_frames.to_string()),
            (
                "gsi.prior_mean",
                match self.gsi.prior_mean {
                    PriorMean::Zero => "zero",
                    PriorMean::LinearTrend => "linear",
                }
                .to_string(),
            ),
            ("aflink.max_frame_gap", self.aflink.max_frame_gap.to_string()),
            ("aflink.max_prediction_error", self.aflink.max_prediction_error.to_string()),
            ("aflink.min_tracklet_length", self.aflink.min_tracklet_length.to_string()),
            ("aflink.score_threshold", self.aflink.score_threshold.to_string()),
            ("events.zero_area_epsilon", self.events.zero_area_epsilon.to_string()),
            ("events.separation_window", self.events.separation_window.to_string()),
            ("events.min_separation_slope", self.events.min_separation_slope.to_string()),
            ("events.min_contact_frames", self.events.min_contact_frames.to_string()),
            ("events.vertical_shift_min", self.events.vertical_shift_min.to_string()),
            ("events.debounce_frames", self.events.debounce_frames.to_string()),
            ("events.person_margin", self.events.person_margin.to_string()),
            ("identity.threshold", self.identity.threshold.to_string()),
            ("identity.ambiguity_margin", self.identity.ambiguity_margin.to_string()),
            ("identity.arcface_margin", self.identity.arcface_margin.to_string()),
            ("identity.arcface_scale", self.identity.arcface_scale.to_string()),
            (
                "litter.classes",
                self.litter_classes.iter().cloned().collect::<Vec<_>>().join(","),
            ),
            ("eval.iou_threshold", self.iou_threshold.to_string()),
        ];
        v.sort_by_key(|(k, _)| *k);
        v
    }

    /// Canonical text: one `key = value` line per key, sorted.
    pub fn canonical(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
