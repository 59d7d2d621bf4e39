//! Identity gallery and cosine matching.

use std::collections::BTreeMap;

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// `s·cos(θ + m)` with `θ = arccos(cos_theta)` and `θ + m` clamped to `[0, π]`.
pub fn arcface_logit(cos_theta: f64, margin: f64, scale: f64) -> f64 {
    let theta = cos_theta.clamp(-1.0, 1.0).acos();
    scale * (theta + margin).clamp(0.0, std::f64::consts::PI).cos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Minimum cosine similarity for a label to be returned.
    pub threshold: f64,
    /// Top-2 similarity gap below which a match is flagged ambiguous.
    pub ambiguity_margin: f64,
    pub arcface_margin: f64,
    pub arcface_scale: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            ambiguity_margin: 0.05,
            arcface_margin: 0.5,
            arcface_scale: 64.0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("identity.threshold must lie in [-1, 1]".into()));
        }
        if !(self.ambiguity_margin >= 0.0 && self.arcface_margin >= 0.0 && self.arcface_scale > 0.0) {
            return Err(Error::Config("identity margins must be >= 0 and scale > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub label: Option<String>,
    /// Best similarity found; -1 for an empty gallery.
    pub similarity: f64,
    pub margin_logit: f64,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityGallery {
    entries: BTreeMap<String, Embedding>,
    metadata: BTreeMap<String, String>,
}

impl IdentityGallery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.values().next().map(Embedding::dim)
    }

    pub fn get(&self, label: &str) -> Option<&Embedding> {
        self.entries.get(label)
    }

    pub fn metadata(&self, label: &str) -> Option<&str> {
        self.metadata.get(label).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Stores a normalized copy of `vector`. Re-enrolling a label replaces it.
    pub fn enroll(&mut self, label: &str, vector: &[f64], metadata: Option<&str>) -> Result<()> {
        if label.is_empty() || label.contains(['\n', '\t']) {
            return Err(Error::InvalidInput(format!("invalid identity label {label:?}")));
        }
        let e = Embedding::new(vector.to_vec())?;
        if let Some(d) = self.dim() {
            if d != e.dim() {
                return Err(Error::InvalidInput(format!(
                    "embedding dimension {} does not match gallery dimension {d}",
                    e.dim()
                )));
            }
        }
        if self.entries.insert(label.to_string(), e).is_some() {
            log::info!("gallery: replaced identity {label}");
        }
        match metadata {
            Some(m) => {
                self.metadata.insert(label.to_string(), m.to_string());
            }
            None => {
                self.metadata.remove(label);
            }
        }
        Ok(())
    }

    /// Exhaustive cosine scan. Ties go to the lexicographically smallest label.
    pub fn match_identity(&self, query: &Embedding, cfg: &MatchConfig) -> Result<MatchResult> {
        if let Some(d) = self.dim() {
            if d != query.dim() {
                return Err(Error::InvalidInput(format!(
                    "query dimension {} does not match gallery dimension {d}",
                    query.dim()
                )));
            }
        }
        let mut best: Option<(&str, f64)> = None;
        let mut second = f64::NEG_INFINITY;
        for (label, e) in &self.entries {
            let s = e.similarity(query)?;
            match best {
                Some((_, b)) if s <= b => second = second.max(s),
                _ => {
                    if let Some((_, b)) = best {
                        second = second.max(b);
                    }
                    best = Some((label, s));
                }
            }
        }
        let Some((label, similarity)) = best else {
            return Ok(MatchResult {
                label: None,
                similarity: -1.0,
                margin_logit: arcface_logit(-1.0, cfg.arcface_margin, cfg.arcface_scale),
                ambiguous: false,
            });
        };
        let accepted = similarity >= cfg.threshold;
        Ok(MatchResult {
            label: accepted.then(|| label.to_string()),
            similarity,
            margin_logit: arcface_logit(similarity, cfg.arcface_margin, cfg.arcface_scale),
            ambiguous: accepted && similarity - second < cfg.ambiguity_margin,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gallery(items: &[(&str, Vec<f64>)]) -> IdentityGallery {
        let mut g = IdentityGallery::new();
        for (l, v) in items {
            g.enroll(l, v, None).unwrap();
        }
        g
    }

    #[test]
    fn arcface_values() {
        assert!((arcface_logit(0.3, 0.0, 1.0) - 0.3).abs() < 1e-12);
        assert!((arcface_logit(1.0, 0.5, 1.0) - 0.5f64.cos()).abs() < 1e-12);
        assert!((arcface_logit(1.0, 0.5, 1.0) - 0.877583).abs() < 1e-6);
        assert!(arcface_logit(0.0, 0.0, 64.0).abs() < 1e-12);
        assert_eq!(arcface_logit(-1.0, 0.3, 2.0), -2.0);
    }

    #[test]
    fn enroll_rules() {
        let mut g = IdentityGallery::new();
        g.enroll("a", &[2.0, 0.0], Some("card 1")).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.get("a").unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(g.metadata("a"), Some("card 1"));
        assert!(g.enroll("b", &[0.0, 0.0], None).is_err());
        assert!(g.enroll("b", &[0.0, 0.0, 1.0], None).is_err());
        g.enroll("a", &[0.0, 3.0], None).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.get("a").unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn match_examples() {
        let cfg = MatchConfig::default();
        let g = gallery(&[("A", vec![1.0, 0.0]), ("B", vec![0.0, 1.0])]);
        let q = Embedding::new(vec![0.9, 0.436]).unwrap();
        let m = g.match_identity(&q, &cfg).unwrap();
        assert_eq!(m.label.as_deref(), Some("A"));
        let expected = 0.9 / (0.9f64 * 0.9 + 0.436 * 0.436).sqrt();
        assert!((m.similarity - expected).abs() < 1e-12);
        assert!((m.similarity - 0.90).abs() < 0.005);
        assert!(!m.ambiguous);

        let exact = g.match_identity(&Embedding::new(vec![0.0, 5.0]).unwrap(), &cfg).unwrap();
        assert_eq!(exact.label.as_deref(), Some("B"));
        assert!((exact.similarity - 1.0).abs() < 1e-12);

        let empty = IdentityGallery::new().match_identity(&q, &cfg).unwrap();
        assert_eq!(empty.label, None);
    }

    #[test]
    fn ties_and_ambiguity() {
        let cfg = MatchConfig::default();
        let g = gallery(&[("zed", vec![1.0, 0.0]), ("amy", vec![1.0, 0.0])]);
        let m = g.match_identity(&Embedding::new(vec![1.0, 0.1]).unwrap(), &cfg).unwrap();
        assert_eq!(m.label.as_deref(), Some("amy"));
        assert!(m.ambiguous);
    }

    #[test]
    fn below_threshold_is_none() {
        let g = gallery(&[("A", vec![1.0, 0.0])]);
        let m = g
            .match_identity(&Embedding::new(vec![0.0, 1.0]).unwrap(), &MatchConfig::default())
            .unwrap();
        assert_eq!(m.label, None);
        assert!(m.similarity.abs() < 1e-12);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0..1.0f64, 3).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
    }

    proptest! {
        #[test]
        fn scale_invariant_and_exhaustive(
            items in proptest::collection::vec(vec3(), 1..6),
            q in vec3(),
            k in 0.01..100.0f64,
        ) {
            let named: Vec<(String, Vec<f64>)> = items.into_iter().enumerate().map(|(i, v)| (format!("id{i}"), v)).collect();
            let mut g = IdentityGallery::new();
            for (l, v) in &named { g.enroll(l, v, None).unwrap(); }
            let cfg = MatchConfig { threshold: -1.0, ..Default::default() };
            let a = g.match_identity(&Embedding::new(q.clone()).unwrap(), &cfg).unwrap();
            let scaled: Vec<f64> = q.iter().map(|x| x * k).collect();
            let b = g.match_identity(&Embedding::new(scaled).unwrap(), &cfg).unwrap();
            prop_assert_eq!(&a.label, &b.label);
            prop_assert!(a.label.is_some());
            // scan by hand
            let qn = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let best = named.iter().map(|(_, v)| {
                let vn = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
                v.iter().zip(&q).map(|(x, y)| x * y).sum::<f64>() / (vn * qn)
            }).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((a.similarity - best).abs() < 1e-9);
        }

        #[test]
        fn arcface_nonincreasing_in_margin(c in -1.0..1.0f64, m1 in 0.0..1.5f64, dm in 0.0..1.5f64) {
            let theta = c.acos();
            prop_assume!(theta + m1 + dm <= std::f64::consts::PI);
            prop_assert!(arcface_logit(c, m1 + dm, 1.0) <= arcface_logit(c, m1, 1.0) + 1e-12);
        }
    }
}
