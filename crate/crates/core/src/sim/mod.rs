//! Seeded synthetic scenes: walking persons, carried and discarded litter,
//! pickups, noisy detections with appearance embeddings, and the matching
//! ground truth.

mod suite;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

pub use suite::{random_spec, standard_suite, SuiteProfile, SuiteScenario};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::events::{EventConfig, EventKind, EventRecord, PERSON_CLASS};
use crate::geometry::{expand, intersection_area, BoundingBox};
use crate::tracker::{Detection, HistoryEntry, TrackHistory};

/// How far a held object overlaps its carrier's box edge, in pixels.
const GRIP_OVERLAP: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MotionScript {
    /// Catmull-Rom spline through the waypoints, uniform in time.
    Spline { waypoints: Vec<(f64, f64)> },
    ConstantTurn {
        start: (f64, f64),
        speed: f64,
        heading: f64,
        turn_rate: f64,
    },
}

impl MotionScript {
    /// Center at normalized time `u ∈ [0, 1]` of a script lasting `frames`.
    fn at(&self, u: f64, frames: f64) -> (f64, f64) {
        match self {
            MotionScript::Spline { waypoints } => catmull_rom(waypoints, u),
            MotionScript::ConstantTurn {
                start,
                speed,
                heading,
                turn_rate,
            } => {
                let t = u * frames;
                if turn_rate.abs() < 1e-12 {
                    return (start.0 + speed * t * heading.cos(), start.1 + speed * t * heading.sin());
                }
                let r = speed / turn_rate;
                let th = heading + turn_rate * t;
                (
                    start.0 + r * (th.sin() - heading.sin()),
                    start.1 - r * (th.cos() - heading.cos()),
                )
            }
        }
    }
}

fn catmull_rom(points: &[(f64, f64)], u: f64) -> (f64, f64) {
    match points.len() {
        0 => (0.0, 0.0),
        1 => points[0],
        n => {
            let segs = (n - 1) as f64;
            let x = (u.clamp(0.0, 1.0) * segs).min(segs - 1e-12);
            let i = x.floor() as usize;
            let t = x - i as f64;
            let p = |k: isize| points[k.clamp(0, n as isize - 1) as usize];
            let (p0, p1, p2, p3) = (p(i as isize - 1), p(i as isize), p(i as isize + 1), p(i as isize + 2));
            let f = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b
                    + (-a + c) * t
                    + (2.0 * a - 5.0 * b + 4.0 * c - d) * t * t
                    + (-a + 3.0 * b - 3.0 * c + d) * t * t * t)
            };
            (f(p0.0, p1.0, p2.0, p3.0), f(p0.1, p1.1, p2.1, p3.1))
        }
    }
}

/// Cubic Hermite between `(p0, v0)` and `(p1, v1)` over `span` frames.
fn hermite(p0: f64, v0: f64, p1: f64, v1: f64, span: f64, s: f64) -> f64 {
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * span * v0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * span * v1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonScript {
    pub start_frame: i64,
    pub end_frame: i64,
    pub width: f64,
    pub height: f64,
    pub motion: MotionScript,
}

impl PersonScript {
    pub fn center(&self, frame: f64) -> (f64, f64) {
        let span = (self.end_frame - self.start_frame).max(1) as f64;
        self.motion.at((frame - self.start_frame as f64) / span, span)
    }

    pub fn velocity(&self, frame: f64) -> (f64, f64) {
        let h = 0.5;
        let (a, b) = (self.center(frame - h), self.center(frame + h));
        ((b.0 - a.0) / (2.0 * h), (b.1 - a.1) / (2.0 * h))
    }

    fn bbox(&self, frame: i64) -> Result<BoundingBox> {
        let (cx, cy) = self.center(frame as f64);
        BoundingBox::from_center(cx, cy, self.width, self.height)
    }

    /// Center of an object of width `w` held at the person's side.
    fn hand(&self, frame: f64, side: f64, w: f64) -> (f64, f64) {
        let (cx, cy) = self.center(frame);
        (cx + side * (self.width / 2.0 + w / 2.0 - GRIP_OVERLAP), cy + 0.1 * self.height)
    }

    /// Side (±1) facing the direction of horizontal travel.
    fn front(&self, frame: f64) -> f64 {
        if self.velocity(frame).0 >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// A person carries an object from their first frame and discards it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LitterDrop {
    pub person: usize,
    pub frame: i64,
    pub class_label: String,
    pub size: (f64, f64),
    /// Frames from release to rest.
    pub throw_frames: u32,
    /// Distance the object lands behind the person.
    pub throw_back: f64,
    pub arc_height: f64,
}

/// An object rests on the ground until a person lifts it and carries it off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pickup {
    pub person: usize,
    /// Frame the lift starts; the object lies at the person's front foot then.
    pub frame: i64,
    pub class_label: String,
    pub size: (f64, f64),
    pub lift_frames: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub jitter_std: f64,
    pub dropout: f64,
    pub false_positive_rate: f64,
    /// Standard deviation of the per-detection embedding angle, radians.
    pub embedding_noise: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            jitter_std: 0.0,
            dropout: 0.0,
            false_positive_rate: 0.0,
            embedding_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occlusion {
    pub start_frame: i64,
    pub end_frame: i64,
    /// Detections whose center falls inside are suppressed.
    pub region: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub frame_count: u32,
    pub arena: (f64, f64),
    pub embedding_dim: usize,
    pub persons: Vec<PersonScript>,
    pub litter_events: Vec<LitterDrop>,
    pub cleaning_events: Vec<Pickup>,
    pub noise: NoiseModel,
    pub occlusions: Vec<Occlusion>,
}

impl ScenarioSpec {
    /// Every inconsistency at once, as field-qualified messages.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let last = self.frame_count as i64;
        if self.frame_count < 1 {
            bad.push("frame_count: must be >= 1".to_string());
        }
        if !(self.arena.0 > 0.0 && self.arena.1 > 0.0) {
            bad.push("arena: dimensions must be positive".into());
        }
        if self.embedding_dim < 2 {
            bad.push("embedding_dim: must be >= 2".into());
        }
        let n = &self.noise;
        for (name, p) in [("noise.dropout", n.dropout)] {
            if !(0.0..=1.0).contains(&p) {
                bad.push(format!("{name}: {p} outside [0, 1]"));
            }
        }
        if !(n.jitter_std >= 0.0 && n.false_positive_rate >= 0.0 && n.embedding_noise >= 0.0) {
            bad.push("noise: std devs and rates must be >= 0".into());
        }
        for (i, p) in self.persons.iter().enumerate() {
            if p.start_frame < 1 || p.end_frame > last || p.start_frame >= p.end_frame {
                bad.push(format!("persons[{i}]: frames {}..{} outside 1..{last}", p.start_frame, p.end_frame));
            }
            if !(p.width > 0.0 && p.height > 0.0) {
                bad.push(format!("persons[{i}]: size must be positive"));
            }
            if let MotionScript::Spline { waypoints } = &p.motion {
                if waypoints.is_empty() {
                    bad.push(format!("persons[{i}].motion: no waypoints"));
                }
            }
        }
        let person_ok = |k: usize| self.persons.get(k);
        for (i, d) in self.litter_events.iter().enumerate() {
            match person_ok(d.person) {
                None => bad.push(format!("litter_events[{i}].person: no person {}", d.person)),
                Some(p) if !(p.start_frame < d.frame && d.frame < p.end_frame) => {
                    bad.push(format!("litter_events[{i}].frame: {} outside the carrier's frames", d.frame))
                }
                _ => {}
            }
            if d.throw_frames < 1 || !(d.size.0 > 0.0 && d.size.1 > 0.0) {
                bad.push(format!("litter_events[{i}]: throw_frames and size must be positive"));
            }
        }
        for (i, c) in self.cleaning_events.iter().enumerate() {
            match person_ok(c.person) {
                None => bad.push(format!("cleaning_events[{i}].person: no person {}", c.person)),
                Some(p) if !(p.start_frame < c.frame && c.frame < p.end_frame) => {
                    bad.push(format!("cleaning_events[{i}].frame: {} outside the person's frames", c.frame))
                }
                _ => {}
            }
            if c.lift_frames < 1 || !(c.size.0 > 0.0 && c.size.1 > 0.0) {
                bad.push(format!("cleaning_events[{i}]: lift_frames and size must be positive"));
            }
        }
        for (i, o) in self.occlusions.iter().enumerate() {
            if o.start_frame > o.end_frame {
                bad.push(format!("occlusions[{i}]: interval is reversed"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Scenario(bad))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Persons first (ids 1..=P), then dropped litter, then picked-up litter.
    pub tracks: Vec<TrackHistory>,
    pub events: Vec<EventRecord>,
    /// Person track id → identity label.
    pub identities: BTreeMap<u64, String>,
    /// Identity label → prototype embedding.
    pub identity_embeddings: BTreeMap<String, Embedding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub ground_truth: GroundTruth,
    pub detections: BTreeMap<i64, Vec<Detection>>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(e) = Embedding::new(v) {
            return e;
        }
    }
}

/// Rotates `proto` by an angle drawn from N(0, std) toward a random direction.
fn perturb(rng: &mut ChaCha8Rng, proto: &Embedding, std: f64) -> Embedding {
    if std == 0.0 {
        return proto.clone();
    }
    let angle: f64 = std * rng.sample::<f64, _>(StandardNormal);
    let p = proto.as_slice();
    let r = random_unit(rng, p.len());
    let d: f64 = p.iter().zip(r.as_slice()).map(|(a, b)| a * b).sum();
    let ortho: Vec<f64> = r.as_slice().iter().zip(p).map(|(x, a)| x - d * a).collect();
    let norm = ortho.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return proto.clone();
    }
    let v: Vec<f64> = p
        .iter()
        .zip(&ortho)
        .map(|(a, o)| angle.cos() * a + angle.sin() * o / norm)
        .collect();
    Embedding::new(v).unwrap_or_else(|_| proto.clone())
}

/// Prototype embeddings with pairwise angle at least `min_angle`.
fn separated_prototypes(rng: &mut ChaCha8Rng, count: usize, dim: usize, min_angle: f64) -> Result<Vec<Embedding>> {
    let max_cos = min_angle.cos();
    let mut out: Vec<Embedding> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * (count + 1) {
            return Err(Error::Scenario(vec![format!(
                "embedding_dim: cannot place {count} prototypes {min_angle:.3} rad apart in {dim} dimensions"
            )]));
        }
        let c = random_unit(rng, dim);
        if out.iter().all(|e| e.similarity(&c).is_ok_and(|s| s <= max_cos)) {
            out.push(c);
        }
    }
    Ok(out)
}

pub const MIN_IDENTITY_ANGLE: f64 = std::f64::consts::PI / 6.0;

/// Box of a dropped object at `frame`, or `None` before its carrier appears.
fn drop_box(spec: &ScenarioSpec, d: &LitterDrop, frame: i64) -> Option<(f64, f64)> {
    let p = &spec.persons[d.person];
    if frame < p.start_frame {
        return None;
    }
    let side = p.front(p.start_frame as f64);
    let fd = d.frame as f64;
    let f = frame as f64;
    if frame <= d.frame {
        return Some(p.hand(f, side, d.size.0));
    }
    let start = p.hand(fd, side, d.size.0);
    let (vx, vy) = p.velocity(fd);
    let speed = vx.hypot(vy).max(1e-9);
    let rest = (
        start.0 - vx / speed * d.throw_back,
        p.center(fd).1 + p.height / 2.0 - d.size.1 / 2.0,
    );
    let span = d.throw_frames as f64;
    let s = ((f - fd) / span).min(1.0);
    let x = hermite(start.0, vx, rest.0, 0.0, span, s);
    let y = hermite(start.1, vy, rest.1, 0.0, span, s) - d.arc_height * (std::f64::consts::PI * s).sin().powi(2);
    Some((x, y))
}

/// Box center of a picked-up object, or `None` once it leaves with its carrier.
fn pickup_box(spec: &ScenarioSpec, c: &Pickup, frame: i64) -> Option<(f64, f64)> {
    let p = &spec.persons[c.person];
    let fp = c.frame as f64;
    let side = p.front(fp);
    let (hx, _) = p.hand(fp, side, c.size.0);
    let ground = (hx, p.center(fp).1 + p.height / 2.0 - c.size.1 / 2.0);
    if frame <= c.frame {
        return Some(ground);
    }
    if frame > p.end_frame {
        return None;
    }
    let f = frame as f64;
    let span = c.lift_frames as f64;
    if f >= fp + span {
        return Some(p.hand(f, side, c.size.0));
    }
    let target = p.hand(fp + span, side, c.size.0);
    let (vx, vy) = p.velocity(fp + span);
    let s = (f - fp) / span;
    Some((
        hermite(ground.0, 0.0, target.0, vx, span, s),
        hermite(ground.1, 0.0, target.1, vy, span, s),
    ))
}

fn contact_area(person: &BoundingBox, litter: &BoundingBox, margin: f64) -> Result<f64> {
    Ok(intersection_area(&expand(person, margin)?, litter))
}

/// Generates ground truth and the detection stream. Identical specs give
/// identical outputs.
pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ground_truth = build_ground_truth(spec, &mut rng)?;
    let detections = build_detections(spec, &ground_truth, &mut rng)?;
    Ok(ScenarioOutput {
        ground_truth,
        detections,
    })
}

/// Ground truth alone; equal to `generate(spec)?.ground_truth`.
pub fn generate_ground_truth(spec: &ScenarioSpec) -> Result<GroundTruth> {
    spec.validate()?;
    build_ground_truth(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

fn build_ground_truth(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<GroundTruth> {
    let frames = 1..=spec.frame_count as i64;
    let n_persons = spec.persons.len();

    let mut tracks: Vec<TrackHistory> = Vec::new();
    for (i, p) in spec.persons.iter().enumerate() {
        let mut entries = BTreeMap::new();
        for f in p.start_frame..=p.end_frame {
            entries.insert(f, HistoryEntry::observed(p.bbox(f)?));
        }
        tracks.push(TrackHistory {
            id: i as u64 + 1,
            class_label: PERSON_CLASS.into(),
            appearance: None,
            entries,
        });
    }
    let mut object_track = |class: &str, size: (f64, f64), pos: &dyn Fn(i64) -> Option<(f64, f64)>| -> Result<()> {
        let mut entries = BTreeMap::new();
        for f in frames.clone() {
            if let Some((cx, cy)) = pos(f) {
                entries.insert(f, HistoryEntry::observed(BoundingBox::from_center(cx, cy, size.0, size.1)?));
            }
        }
        tracks.push(TrackHistory {
            id: tracks.len() as u64 + 1,
            class_label: class.into(),
            appearance: None,
            entries,
        });
        Ok(())
    };
    for d in &spec.litter_events {
        object_track(&d.class_label, d.size, &|f| drop_box(spec, d, f))?;
    }
    for c in &spec.cleaning_events {
        object_track(&c.class_label, c.size, &|f| pickup_box(spec, c, f))?;
    }

    // appearance prototypes: one per person identity, one per object
    let protos = separated_prototypes(rng, tracks.len(), spec.embedding_dim, MIN_IDENTITY_ANGLE)?;
    let mut identities = BTreeMap::new();
    let mut identity_embeddings = BTreeMap::new();
    for (i, t) in tracks.iter_mut().enumerate() {
        t.appearance = Some(protos[i].clone());
        if i < n_persons {
            let label = format!("id-{:03}", i + 1);
            identities.insert(t.id, label.clone());
            identity_embeddings.insert(label, protos[i].clone());
        }
    }

    let margin = EventConfig::default().person_margin;
    let eps = EventConfig::default().zero_area_epsilon;
    let mut events = Vec::new();
    for (k, d) in spec.litter_events.iter().enumerate() {
        let person = &tracks[d.person];
        let litter = &tracks[n_persons + k];
        let mut frame = None;
        for (f, e) in litter.entries.range(d.frame..) {
            let Some(pb) = person.bbox_at(*f) else { break };
            if contact_area(pb, &e.bbox, margin)? <= eps {
                frame = Some(*f);
                break;
            }
        }
        if let Some(frame) = frame {
            events.push(EventRecord {
                kind: EventKind::Littering,
                frame,
                litter_track: litter.id,
                person_track: Some(person.id),
                identity: identities.get(&person.id).cloned(),
                identity_ambiguous: false,
                confidence: 1.0,
            });
        }
    }
    for (k, c) in spec.cleaning_events.iter().enumerate() {
        let person = &tracks[c.person];
        let litter = &tracks[n_persons + spec.litter_events.len() + k];
        let mut frame = None;
        let mut before = f64::INFINITY;
        for (f, e) in litter.entries.range(..=c.frame) {
            let area = match person.bbox_at(*f) {
                Some(pb) => contact_area(pb, &e.bbox, margin)?,
                None => 0.0,
            };
            if area > eps && before <= eps {
                frame = Some(*f);
            }
            before = area;
        }
        if let Some(frame) = frame {
            events.push(EventRecord {
                kind: EventKind::Cleaning,
                frame,
                litter_track: litter.id,
                person_track: Some(person.id),
                identity: identities.get(&person.id).cloned(),
                identity_ambiguous: false,
                confidence: 1.0,
            });
        }
    }
    crate::events::sort_events(&mut events);
    Ok(GroundTruth {
        tracks,
        events,
        identities,
        identity_embeddings,
    })
}

fn build_detections(
    spec: &ScenarioSpec,
    gt: &GroundTruth,
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<i64, Vec<Detection>>> {
    let frames = 1..=spec.frame_count as i64;
    let jitter = Normal::new(0.0, spec.noise.jitter_std.max(0.0))
        .map_err(|e| Error::Scenario(vec![format!("noise.jitter_std: {e}")]))?;
    let fp_count = (spec.noise.false_positive_rate > 0.0)
        .then(|| Poisson::new(spec.noise.false_positive_rate))
        .transpose()
        .map_err(|e| Error::Scenario(vec![format!("noise.false_positive_rate: {e}")]))?;
    let mut detections: BTreeMap<i64, Vec<Detection>> = BTreeMap::new();
    for f in frames {
        let list = detections.entry(f).or_default();
        for t in &gt.tracks {
            let Some(e) = t.entries.get(&f) else { continue };
            let b = e.bbox;
            let (cx, cy) = b.center();
            let hidden = spec.occlusions.iter().any(|o| {
                (o.start_frame..=o.end_frame).contains(&f)
                    && cx >= o.region.left
                    && cx <= o.region.right()
                    && cy >= o.region.top
                    && cy <= o.region.bottom()
            });
            let dropped = rng.random::<f64>() < spec.noise.dropout;
            if hidden || dropped {
                continue;
            }
            let bbox = if spec.noise.jitter_std > 0.0 {
                let mut s = || jitter.sample(rng);
                let (dl, dt, dw, dh) = (s(), s(), s(), s());
                BoundingBox::new(b.left + dl, b.top + dt, (b.width + dw).max(1.0), (b.height + dh).max(1.0))?
            } else {
                b
            };
            let confidence = rng.random_range(0.7..1.0);
            let proto = t.appearance.as_ref().expect("ground truth tracks carry prototypes");
            let emb = perturb(rng, proto, spec.noise.embedding_noise);
            list.push(Detection::new(f, bbox, confidence, t.class_label.clone()).with_embedding(emb));
        }
        if let Some(pois) = &fp_count {
            let k = pois.sample(rng) as usize;
            for _ in 0..k {
                let person = rng.random_bool(0.5);
                let (w, h) = if person {
                    (rng.random_range(35.0..50.0), rng.random_range(85.0..120.0))
                } else {
                    (rng.random_range(18.0..30.0), rng.random_range(24.0..36.0))
                };
                let left = rng.random_range(0.0..(spec.arena.0 - w).max(1.0));
                let top = rng.random_range(0.0..(spec.arena.1 - h).max(1.0));
                let class = if person {
                    PERSON_CLASS.to_string()
                } else {
                    spec.litter_events
                        .first()
                        .map(|d| d.class_label.clone())
                        .unwrap_or_else(|| "bottle".into())
                };
                let emb = random_unit(rng, spec.embedding_dim);
                let conf = rng.random_range(0.3..0.6);
                list.push(Detection::new(f, BoundingBox::new(left, top, w, h)?, conf, class).with_embedding(emb));
            }
        }
    }

    Ok(detections)
}

/// Problems that make a scenario unusable as a benchmark: boxes leaving the
/// arena, or ground-truth events the event rules cannot reproduce.
pub fn check_ground_truth(spec: &ScenarioSpec, gt: &GroundTruth, cfg: &EventConfig) -> Result<Vec<String>> {
    let mut issues = Vec::new();
    for t in &gt.tracks {
        for (f, e) in &t.entries {
            let b = e.bbox;
            if b.left < 0.0 || b.top < 0.0 || b.right() > spec.arena.0 || b.bottom() > spec.arena.1 {
                issues.push(format!("track {} leaves the arena at frame {f}", t.id));
                break;
            }
        }
    }
    let planned = spec.litter_events.len() + spec.cleaning_events.len();
    if gt.events.len() != planned {
        issues.push(format!(
            "{} of {planned} planned events have a geometric signature",
            gt.events.len()
        ));
    }
    let found = crate::events::detect_events(
        &gt.tracks,
        &crate::events::default_litter_classes(),
        cfg,
        None,
    )?;
    let key = |e: &EventRecord| (e.kind, e.frame, e.litter_track, e.person_track);
    let want: Vec<_> = gt.events.iter().map(key).collect();
    let got: Vec<_> = found.iter().map(key).collect();
    if want != got {
        issues.push(format!("event rules on ground truth give {got:?}, planned {want:?}"));
    }
    Ok(issues)
}
