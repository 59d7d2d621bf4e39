use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Subcommand};
use serde::Serialize;

use littertrack::config::PipelineConfig;
use littertrack::events::{EventKind, EventRecord, PERSON_CLASS};
use littertrack::identity::IdentityGallery;
use littertrack::io::{self, LabelTable, Provenance};
use littertrack::metrics::{evaluate, score_events, EventScore, LabeledFrameSet, MetricReport};
use littertrack::pipeline;
use littertrack::sim::{self, standard_suite, SuiteProfile};
use littertrack::tracker::{Detection, TrackHistory};
use littertrack::Error;

use crate::ConfigArgs;

fn config_error(msg: String) -> anyhow::Error {
    Error::Config(msg).into()
}

fn input_error(msg: String) -> anyhow::Error {
    Error::InvalidInput(msg).into()
}

pub fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = &args.mode {
        cfg.set("mode", m)?;
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg.effective()?)
}

/// Appearance sidecar written next to a tracks file.
fn appearance_path(tracks: &Path) -> PathBuf {
    let mut s = tracks.as_os_str().to_owned();
    s.push(".emb");
    PathBuf::from(s)
}

fn load_detections(path: &Path, embeddings: Option<&Path>) -> Result<(BTreeMap<i64, Vec<Detection>>, Option<usize>)> {
    let (_, mut dets) = io::read_detections(path, &LabelTable::default())?;
    let mut dim = None;
    if let Some(e) = embeddings {
        let file = io::read_embeddings(e)?;
        io::attach_embeddings(&mut dets, &file).with_context(|| format!("attaching {}", e.display()))?;
        dim = Some(file.dim);
    }
    log::info!(
        "{}: {} detections over {} frames",
        path.display(),
        dets.values().map(Vec::len).sum::<usize>(),
        dets.len()
    );
    Ok((dets, dim))
}

fn load_tracks(path: &Path) -> Result<(Provenance, Vec<TrackHistory>)> {
    let (prov, mut tracks) = io::read_tracks(path, &LabelTable::default())?;
    let side = appearance_path(path);
    if side.exists() {
        io::attach_track_appearance(&mut tracks, &io::read_embeddings(&side)?)?;
    }
    Ok((prov, tracks))
}

fn load_gallery(path: Option<&Path>, embedding_dim: Option<usize>) -> Result<Option<IdentityGallery>> {
    let Some(p) = path else { return Ok(None) };
    let g = io::read_gallery(p)?;
    if let (Some(gd), Some(ed)) = (g.dim(), embedding_dim) {
        if gd != ed {
            return Err(config_error(format!(
                "gallery {} has dimension {gd} but embeddings have dimension {ed}",
                p.display()
            )));
        }
    }
    log::info!("gallery {}: {} identities", p.display(), g.len());
    Ok(Some(g))
}

fn write_tracks_with_appearance(path: &Path, cfg: &PipelineConfig, tracks: &[TrackHistory]) -> Result<()> {
    io::write_tracks(path, &Provenance::for_config(cfg), tracks, &LabelTable::default())?;
    let side = appearance_path(path);
    match io::track_appearance(tracks, Some(&cfg.digest()))? {
        Some(f) => io::write_embeddings(&side, &f)?,
        None if side.exists() => std::fs::remove_file(&side).with_context(|| format!("removing {}", side.display()))?,
        None => {}
    }
    Ok(())
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["seed", "scenario"])))]
pub struct SimulateArgs {
    /// Seed for a random scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Noise profile used with --seed: noise-free, default-noise or occlusion-heavy.
    #[arg(long, default_value = "default-noise")]
    profile: String,
    /// Named scenario from a fixed suite, e.g. `occlusion-heavy-07`.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

fn suite_scenario(name: &str) -> Result<sim::SuiteScenario> {
    let (prefix, idx) = name
        .rsplit_once('-')
        .ok_or_else(|| config_error(format!("scenario name {name:?} should look like noise-free-03")))?;
    let profile: SuiteProfile = prefix.parse()?;
    let idx: usize = idx
        .parse()
        .map_err(|_| config_error(format!("scenario index {idx:?} is not a number")))?;
    if idx >= profile.scenario_count() {
        bail!(config_error(format!("{prefix} has {} scenarios", profile.scenario_count())));
    }
    Ok(standard_suite(profile)?.swap_remove(idx))
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let (name, spec, output) = match (&args.scenario, args.seed) {
        (Some(name), _) => {
            let s = suite_scenario(name)?;
            (s.name, s.spec, s.output)
        }
        (None, Some(seed)) => {
            let profile: SuiteProfile = args.profile.parse()?;
            let spec = sim::random_spec(seed, profile);
            let output = sim::generate(&spec)?;
            let issues = sim::check_ground_truth(&spec, &output.ground_truth, &Default::default())?;
            for i in &issues {
                log::warn!("scenario seed {seed}: {i}");
            }
            (format!("{}-seed-{seed}", profile.name()), spec, output)
        }
        (None, None) => unreachable!("clap requires --seed or --scenario"),
    };
    let out = &args.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let table = LabelTable::default();
    let prov = Provenance::engine_only();
    io::write_detections(&out.join("detections.txt"), &prov, &output.detections, &table)?;
    if let Some(f) = io::detection_embeddings(&output.detections)? {
        io::write_embeddings(&out.join("detections.emb"), &f)?;
    }
    let gt = &output.ground_truth;
    io::write_tracks(&out.join("gt.txt"), &prov, &gt.tracks, &table)?;
    io::write_events(&out.join("gt_events.jsonl"), Some(&name), None, &gt.events)?;
    let mut gallery = IdentityGallery::new();
    for (label, e) in &gt.identity_embeddings {
        gallery.enroll(label, e.as_slice(), None)?;
    }
    if !gallery.is_empty() {
        io::write_gallery(&out.join("gallery.emb"), &gallery)?;
    }
    let json = serde_json::to_string_pretty(&spec)?;
    io::write_atomic(&out.join("scenario.json"), format!("{json}\n").as_bytes())?;
    println!(
        "{name}: {} frames, {} ground-truth tracks, {} events -> {}",
        spec.frame_count,
        gt.tracks.len(),
        gt.events.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- track

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// MOT detection rows (id -1).
    #[arg(long)]
    detections: PathBuf,
    /// EMB1 appearance embeddings keyed by (frame, detection index).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output tracks file; appearance goes to `<out>.emb`.
    #[arg(long, short)]
    out: PathBuf,
}

pub fn track(args: TrackArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let (dets, _) = load_detections(&args.detections, args.embeddings.as_deref())?;
    let raw = pipeline::track_detections(&cfg, &dets)?;
    let tracks = pipeline::postprocess(&cfg, raw)?;
    write_tracks_with_appearance(&args.out, &cfg, &tracks)?;
    println!("{} tracks ({} mode) -> {}", tracks.len(), cfg.mode, args.out.display());
    Ok(())
}

// ---------------------------------------------------------------- events

#[derive(Debug, Args)]
pub struct EventsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Tracks file written by `track` or `run`.
    #[arg(long)]
    tracks: PathBuf,
    /// Identity gallery for offender attribution.
    #[arg(long)]
    gallery: Option<PathBuf>,
    /// Feed tracks frame by frame through the streaming detector.
    #[arg(long)]
    streaming: bool,
    /// Scenario id recorded on every line.
    #[arg(long)]
    scenario: Option<String>,
    /// Output JSON-lines file.
    #[arg(long, short)]
    out: PathBuf,
}

pub fn events(args: EventsArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let digest = cfg.digest();
    let (prov, tracks) = load_tracks(&args.tracks)?;
    if let Some(d) = &prov.digest {
        if *d != digest {
            return Err(config_error(format!(
                "{} was produced with config digest {d}, current config is {digest}",
                args.tracks.display()
            )));
        }
    }
    let dim = tracks.iter().find_map(|t| t.appearance.as_ref().map(|e| e.dim()));
    let gallery = load_gallery(args.gallery.as_deref(), dim)?;
    let events = if args.streaming {
        pipeline::stream_events(&cfg, &tracks, gallery.as_ref())?
    } else {
        pipeline::find_events(&cfg, &tracks, gallery.as_ref())?
    };
    io::write_events(&args.out, args.scenario.as_deref(), Some(&digest), &events)?;
    println!("{} events -> {}", events.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ClassFilter {
    All,
    Person,
    Litter,
}

impl ClassFilter {
    fn keeps(self, class: &str) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Person => class == PERSON_CLASS,
            ClassFilter::Litter => class != PERSON_CLASS,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Ground-truth tracks (MOT rows with ids).
    #[arg(long)]
    gt: PathBuf,
    /// Predicted tracks.
    #[arg(long)]
    tracks: PathBuf,
    /// Ground-truth events (JSON lines).
    #[arg(long, requires = "events")]
    gt_events: Option<PathBuf>,
    /// Predicted events (JSON lines).
    #[arg(long, requires = "gt_events")]
    events: Option<PathBuf>,
    /// Which tracks to score.
    #[arg(long, value_enum, default_value = "all")]
    class: ClassFilter,
    /// Frame tolerance for event matching.
    #[arg(long, default_value_t = 2)]
    frame_tolerance: i64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct EventSummary {
    littering: EventScore,
    cleaning: EventScore,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    digest: Option<String>,
    metrics: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    events: Option<EventSummary>,
}

fn score_all(
    gt_tracks: &[TrackHistory],
    gt_events: &[EventRecord],
    tracks: &[TrackHistory],
    events: &[EventRecord],
    tol: i64,
) -> EventSummary {
    EventSummary {
        littering: score_events(gt_events, gt_tracks, events, tracks, EventKind::Littering, tol),
        cleaning: score_events(gt_events, gt_tracks, events, tracks, EventKind::Cleaning, tol),
    }
}

fn render(report: &EvalReport, json: bool) -> Result<String> {
    if json {
        return Ok(format!("{}\n", serde_json::to_string_pretty(report)?));
    }
    let mut s = report.metrics.to_table();
    s.push_str(&report.metrics.to_key_values());
    if let Some(e) = &report.events {
        for (name, sc) in [("littering", e.littering), ("cleaning", e.cleaning)] {
            s.push_str(&format!(
                "{name}: tp {} fp {} fn {} precision {:.4} recall {:.4}\n",
                sc.tp,
                sc.fp,
                sc.fn_,
                sc.precision(),
                sc.recall()
            ));
        }
    }
    Ok(s)
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let (_, gt) = io::read_tracks(&args.gt, &LabelTable::default())?;
    let (prov, tracks) = io::read_tracks(&args.tracks, &LabelTable::default())?;
    let mut digests = vec![(args.tracks.as_path(), prov.digest.clone())];
    let mut event_sets = None;
    if let (Some(ge), Some(pe)) = (&args.gt_events, &args.events) {
        let (_, truth) = io::read_events(ge)?;
        let (d, predicted) = io::read_events(pe)?;
        digests.push((pe.as_path(), d));
        event_sets = Some((truth, predicted));
    }
    let digest = io::check_digests(digests.iter().map(|(p, d)| (*p, d.as_deref())))?;
    let data = LabeledFrameSet::from_tracks(&gt, &tracks, |c| args.class.keeps(c));
    let metrics = evaluate(&data, cfg.iou_threshold)?;
    let events = event_sets.map(|(t, p)| score_all(&gt, &t, &tracks, &p, args.frame_tolerance));
    let report = EvalReport { digest, metrics, events };
    print!("{}", render(&report, args.json)?);
    Ok(())
}

// ---------------------------------------------------------------- gallery

#[derive(Debug, Subcommand)]
pub enum GalleryCommand {
    /// Add or replace an identity.
    Enroll(GalleryEnrollArgs),
    /// Find the closest identity for a query embedding.
    Match(GalleryMatchArgs),
    /// List enrolled identities.
    List {
        #[arg(long)]
        gallery: PathBuf,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("query").required(true).args(["vector", "embeddings"])))]
pub struct EmbeddingSource {
    /// Comma-separated components.
    #[arg(long, allow_hyphen_values = true)]
    vector: Option<String>,
    /// EMB1 file holding the vector.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Record key `FRAME:INDEX` inside --embeddings; optional when the file holds one record.
    #[arg(long, requires = "embeddings")]
    key: Option<String>,
}

impl EmbeddingSource {
    fn load(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.vector {
            return v
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| input_error(format!("vector component {x:?} is not a number")))
                })
                .collect();
        }
        let path = self.embeddings.as_ref().expect("clap requires a query source");
        let file = io::read_embeddings(path)?;
        let e = match &self.key {
            Some(k) => {
                let (f, i) = k
                    .split_once(':')
                    .and_then(|(f, i)| Some((f.parse::<u32>().ok()?, i.parse::<u32>().ok()?)))
                    .ok_or_else(|| input_error(format!("key {k:?} should be FRAME:INDEX")))?;
                file.records
                    .get(&(f, i))
                    .ok_or_else(|| input_error(format!("{} has no record {k}", path.display())))?
            }
            None if file.records.len() == 1 => file.records.values().next().unwrap(),
            None => bail!(input_error(format!(
                "{} holds {} records; pick one with --key",
                path.display(),
                file.records.len()
            ))),
        };
        Ok(e.as_slice().to_vec())
    }
}

#[derive(Debug, Args)]
pub struct GalleryEnrollArgs {
    /// Gallery file (created if missing); labels live in `<gallery>.labels`.
    #[arg(long)]
    gallery: PathBuf,
    #[arg(long)]
    label: String,
    /// Free-form note stored with the identity.
    #[arg(long)]
    metadata: Option<String>,
    #[command(flatten)]
    source: EmbeddingSource,
}

#[derive(Debug, Args)]
pub struct GalleryMatchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    gallery: PathBuf,
    #[command(flatten)]
    source: EmbeddingSource,
    /// Print JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct MatchLine {
    label: Option<String>,
    similarity: f64,
    margin_logit: f64,
    ambiguous: bool,
}

pub fn gallery(cmd: GalleryCommand) -> Result<()> {
    match cmd {
        GalleryCommand::Enroll(a) => {
            let mut g = io::read_gallery(&a.gallery)?;
            g.enroll(&a.label, &a.source.load()?, a.metadata.as_deref())?;
            io::write_gallery(&a.gallery, &g)?;
            println!("{} identities in {}", g.len(), a.gallery.display());
        }
        GalleryCommand::Match(a) => {
            let cfg = load_config(&a.config)?;
            let g = io::read_gallery(&a.gallery)?;
            let query = littertrack::embedding::Embedding::new(a.source.load()?)?;
            if let Some(d) = g.dim() {
                if d != query.dim() {
                    bail!(config_error(format!("query dimension {} does not match gallery dimension {d}", query.dim())));
                }
            }
            let m = g.match_identity(&query, &cfg.identity)?;
            let line = MatchLine {
                label: m.label,
                similarity: m.similarity,
                margin_logit: m.margin_logit,
                ambiguous: m.ambiguous,
            };
            if a.json {
                println!("{}", serde_json::to_string(&line)?);
            } else {
                println!(
                    "{}\tsimilarity {:.6}\tlogit {:.4}{}",
                    line.label.as_deref().unwrap_or("<none>"),
                    line.similarity,
                    line.margin_logit,
                    if line.ambiguous { "\tambiguous" } else { "" }
                );
            }
        }
        GalleryCommand::List { gallery } => {
            let g = io::read_gallery(&gallery)?;
            for (label, e) in g.iter() {
                println!("{label}\tdim {}\t{}", e.dim(), g.metadata(label).unwrap_or(""));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- run

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    gallery: Option<PathBuf>,
    /// Ground truth; when given, metrics are written to `metrics.json`.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long, requires = "gt")]
    gt_events: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    frame_tolerance: i64,
    /// Scenario id recorded in the events file.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory for tracks.txt, tracks.txt.emb, events.jsonl.
    #[arg(long, short)]
    out_dir: PathBuf,
}

pub fn run(args: RunArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let (dets, dim) = load_detections(&args.detections, args.embeddings.as_deref())?;
    let gallery = load_gallery(args.gallery.as_deref(), dim)?;
    let out = pipeline::run(&cfg, &dets, gallery.as_ref())?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let digest = cfg.digest();
    write_tracks_with_appearance(&dir.join("tracks.txt"), &cfg, &out.tracks)?;
    io::write_events(&dir.join("events.jsonl"), args.scenario.as_deref(), Some(&digest), &out.events)?;
    println!(
        "{} tracks, {} events ({} mode, digest {digest}) -> {}",
        out.tracks.len(),
        out.events.len(),
        cfg.mode,
        dir.display()
    );
    if let Some(gt_path) = &args.gt {
        let (_, gt) = io::read_tracks(gt_path, &LabelTable::default())?;
        let data = LabeledFrameSet::from_tracks(&gt, &out.tracks, |_| true);
        let metrics = evaluate(&data, cfg.iou_threshold)?;
        let events = match &args.gt_events {
            Some(p) => {
                let (_, truth) = io::read_events(p)?;
                Some(score_all(&gt, &truth, &out.tracks, &out.events, args.frame_tolerance))
            }
            None => None,
        };
        let report = EvalReport {
            digest: Some(digest),
            metrics,
            events,
        };
        io::write_atomic(&dir.join("metrics.json"), render(&report, true)?.as_bytes())?;
        print!("{}", render(&report, false)?);
    }
    Ok(())
}

pub fn show_config(args: ConfigArgs) -> Result<()> {
    let cfg = load_config(&args)?;
    print!("{}", cfg.canonical());
    println!("# digest {}", cfg.digest());
    Ok(())
}
