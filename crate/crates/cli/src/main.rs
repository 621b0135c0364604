//! `geoflow`: closed geodesics, self-crossings and partner orbits on a compact
//! hyperbolic surface.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use geoflow::atlas::{closed_geodesics_up_to, geodesic_segments, ClosedGeodesic};
use geoflow::encounters::detect_2antiparallel_with;
use geoflow::report::{atlas_json, partner_csv, partner_json, AtlasEntry};
use geoflow::verify::{self, SuiteOutcome};
use geoflow::{EncounterReport, FuchsianGroup, QuotientMetric};

/// Word radius of the quotient metric window.
const METRIC_RADIUS: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    group_file: String,
    max_word_length: usize,
    max_geodesic_length: f64,
    epsilon: f64,
    sample_step: f64,
    output_dir: PathBuf,
    seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            group_file: "bolza".into(),
            max_word_length: 4,
            max_geodesic_length: 8.0,
            epsilon: 0.25,
            sample_step: 0.05,
            output_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.25) {
            bail!("epsilon must lie in (0, 0.25], got {}", self.epsilon);
        }
        if !(self.sample_step > 0.0) {
            bail!("sample_step must be positive, got {}", self.sample_step);
        }
        if !(self.max_geodesic_length > 0.0) {
            bail!(
                "max_geodesic_length must be positive, got {}",
                self.max_geodesic_length
            );
        }
        Ok(())
    }

    fn group(&self) -> Result<FuchsianGroup> {
        if self.group_file == "bolza" {
            return Ok(FuchsianGroup::bolza());
        }
        FuchsianGroup::load(Path::new(&self.group_file))
            .with_context(|| format!("group file {}", self.group_file))
    }
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with RunConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `bolza` or a group JSON file.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    max_word_length: Option<usize>,
    #[arg(long)]
    max_geodesic_length: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    sample_step: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(g) = &self.group {
            cfg.group_file = g.clone();
        }
        if let Some(n) = self.max_word_length {
            cfg.max_word_length = n;
        }
        if let Some(l) = self.max_geodesic_length {
            cfg.max_geodesic_length = l;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(s) = self.sample_step {
            cfg.sample_step = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "geoflow",
    version,
    about = "Closed geodesics, crossings and partner orbits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate primitive closed geodesics and write orbits.json.
    Orbits {
        #[command(flatten)]
        common: Common,
        /// Also write domain.svg with the geodesic chains.
        #[arg(long)]
        svg: bool,
    },
    /// Self-crossings and antiparallel encounters at epsilon; writes crossings.json.
    Crossings {
        #[command(flatten)]
        common: Common,
    },
    /// Partner orbits of every crossing with phi < 1/3; writes pairs.csv and partners.json.
    Partners {
        #[command(flatten)]
        common: Common,
        /// Atlas to read words from instead of enumerating.
        #[arg(long)]
        atlas: Option<PathBuf>,
    },
    /// Run the verification suites.
    Verify {
        #[command(flatten)]
        common: Common,
        /// One of: group, moebius, shadowing, closing, partners, crossings, trichotomy, legacy.
        #[arg(long)]
        suite: Option<String>,
    },
}

/// Failures that map to exit code 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

fn config_err<T>(r: Result<T>) -> Result<T, ConfigError> {
    r.map_err(ConfigError)
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<(), ConfigError> {
    config_err(
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())),
    )?;
    let path = dir.join(name);
    config_err(std::fs::write(&path, body).with_context(|| format!("writing {}", path.display())))
}

fn atlas(cfg: &RunConfig, group: &FuchsianGroup) -> Result<Vec<ClosedGeodesic>, ConfigError> {
    config_err(
        closed_geodesics_up_to(group, cfg.max_geodesic_length, cfg.max_word_length)
            .context("enumerating closed geodesics"),
    )
}

fn histogram(atlas: &[ClosedGeodesic]) -> String {
    let mut bins: Vec<(f64, usize)> = Vec::new();
    for g in atlas {
        match bins.last_mut() {
            Some((t, n)) if (g.period - *t).abs() < 1e-6 => *n += 1,
            _ => bins.push((g.period, 1)),
        }
    }
    let mut s = String::new();
    for (t, n) in bins {
        let _ = writeln!(s, "  T = {t:.6}: {n}");
    }
    s
}

fn cmd_orbits(common: &Common, svg: bool) -> Result<bool, ConfigError> {
    let cfg = config_err(common.config())?;
    let group = config_err(cfg.group())?;
    let atlas = atlas(&cfg, &group)?;
    let crossings = geoflow::report::atlas_crossings(&group, &atlas);
    let entries: Vec<AtlasEntry> = atlas
        .iter()
        .zip(&crossings)
        .map(|(g, c)| AtlasEntry::new(&group, g, c.as_deref().unwrap_or(&[])))
        .collect();
    write_out(&cfg.output_dir, "orbits.json", &atlas_json(&entries))?;
    println!("{} closed geodesics", atlas.len());
    print!("{}", histogram(&atlas));
    let mut ok = true;
    for (g, c) in atlas.iter().zip(&crossings) {
        if let Err(e) = c {
            eprintln!("{}: {e}", group.format_word(&g.word));
            ok = false;
        }
    }
    if svg {
        write_out(&cfg.output_dir, "domain.svg", &domain_svg(&group, &atlas))?;
    }
    Ok(ok)
}

#[derive(Serialize)]
struct CrossingsEntry {
    word: String,
    period: f64,
    crossings: Vec<geoflow::Crossing>,
    encounters: Vec<EncounterReport>,
    error: Option<String>,
}

fn cmd_crossings(common: &Common) -> Result<bool, ConfigError> {
    use rayon::prelude::*;
    let cfg = config_err(common.config())?;
    let group = config_err(cfg.group())?;
    let atlas = atlas(&cfg, &group)?;
    let crossings = geoflow::report::atlas_crossings(&group, &atlas);
    let nb = geoflow::atlas::DomainNeighbors::new(&group);
    let entries: Vec<CrossingsEntry> = atlas
        .par_iter()
        .zip(crossings.par_iter())
        .map(|(g, c)| {
            let enc = detect_2antiparallel_with(g, &group, cfg.epsilon, cfg.sample_step, &nb);
            let error = match (c, &enc) {
                (Err(e), _) => Some(e.clone()),
                (_, Err(e)) => Some(e.to_string()),
                _ => None,
            };
            CrossingsEntry {
                word: group.format_word(&g.word),
                period: g.period,
                crossings: c.clone().unwrap_or_default(),
                encounters: enc.unwrap_or_default(),
                error,
            }
        })
        .collect();
    let mut body = serde_json::to_string_pretty(&entries).expect("serializable");
    body.push('\n');
    write_out(&cfg.output_dir, "crossings.json", &body)?;
    let nc: usize = entries.iter().map(|e| e.crossings.len()).sum();
    let ne: usize = entries.iter().map(|e| e.encounters.len()).sum();
    println!(
        "{} geodesics, {nc} crossings, {ne} encounters at epsilon = {}",
        entries.len(),
        cfg.epsilon
    );
    Ok(entries.iter().all(|e| e.error.is_none()))
}

fn read_atlas(path: &Path, group: &FuchsianGroup) -> Result<Vec<ClosedGeodesic>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: Vec<AtlasEntry> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    entries
        .iter()
        .map(|e| {
            let w = group
                .parse_word(&e.word)
                .with_context(|| format!("word {}", e.word))?;
            ClosedGeodesic::from_word(group, w).with_context(|| format!("word {}", e.word))
        })
        .collect()
}

fn cmd_partners(common: &Common, atlas_path: Option<&Path>) -> Result<bool, ConfigError> {
    let cfg = config_err(common.config())?;
    let group = config_err(cfg.group())?;
    let atlas = match atlas_path {
        Some(p) => config_err(read_atlas(p, &group))?,
        None => atlas(&cfg, &group)?,
    };
    let metric = QuotientMetric::new(&group, METRIC_RADIUS);
    let batch = verify::run_batch(atlas, &metric, cfg.sample_step);
    write_out(&cfg.output_dir, "pairs.csv", &partner_csv(&batch.rows))?;
    write_out(&cfg.output_dir, "partners.json", &partner_json(&batch.rows))?;
    for row in &batch.rows {
        println!("{}", row.summary_line());
    }
    let failed = batch.rows.iter().filter(|r| !r.passed()).count();
    println!("{} pairs, {failed} with a failing check", batch.rows.len());
    Ok(failed == 0)
}

const SUITES: [&str; 8] = [
    "group",
    "moebius",
    "shadowing",
    "closing",
    "partners",
    "crossings",
    "trichotomy",
    "legacy",
];

fn cmd_verify(common: &Common, suite: Option<&str>) -> Result<bool, ConfigError> {
    let cfg = config_err(common.config())?;
    if let Some(s) = suite {
        if !SUITES.contains(&s) {
            return Err(ConfigError(anyhow::anyhow!(
                "unknown suite {s}; expected one of {}",
                SUITES.join(", ")
            )));
        }
    }
    let wanted = |name: &str| suite.is_none_or(|s| s == name);
    let group = match cfg.group() {
        Ok(g) => g,
        Err(e) => {
            println!("FAIL group: {e:#}");
            return Ok(false);
        }
    };
    let mut results: Vec<SuiteOutcome> = Vec::new();
    if wanted("group") {
        results.push(verify::group_suite(&group));
    }
    if wanted("moebius") {
        results.push(verify::moebius_suite(cfg.seed, 1000));
    }
    if wanted("shadowing") {
        results.push(verify::shadowing_suite(cfg.seed, 100));
    }
    if wanted("trichotomy") {
        results.push(verify::trichotomy_suite());
    }
    let dt = cfg.sample_step;
    let needs_batch = ["closing", "partners", "crossings", "legacy"]
        .iter()
        .any(|s| wanted(s));
    if needs_batch {
        let metric = QuotientMetric::new(&group, METRIC_RADIUS);
        let stated = config_err(
            verify::atlas_batch(&metric, cfg.max_geodesic_length, cfg.max_word_length, dt)
                .context("enumerating closed geodesics"),
        )?;
        let fixtures = verify::run_batch(verify::fixture_geodesics(&group), &metric, dt);
        let mut rows = stated.rows.clone();
        rows.extend(fixtures.rows.iter().cloned());
        let partners = if wanted("closing") || wanted("partners") {
            let geos = config_err(
                verify::encounter_geodesics(&group, 12.0).context("encounter geodesics"),
            )?;
            verify::constructed_partners(&geos, &metric, dt)
        } else {
            Vec::new()
        };
        if wanted("closing") {
            results.push(verify::closing_suite(&partners));
        }
        if wanted("partners") {
            results.push(verify::partner_bound_suite(&partners, &rows));
            results.push(verify::small_angle_suite("small-angle batch", &stated));
            results.push(verify::small_angle_suite("small-angle fixtures", &fixtures));
        }
        if wanted("crossings") {
            results.push(verify::crossing_suite(
                "crossings batch",
                &stated,
                dt,
                &group,
            ));
            results.push(verify::crossing_suite(
                "crossings fixtures",
                &fixtures,
                dt,
                &group,
            ));
        }
        if wanted("legacy") {
            results.push(verify::legacy_suite(&rows));
        }
    }
    for r in &results {
        println!("{}", r.line());
        for n in &r.notes {
            println!("    {n}");
        }
    }
    let mut body = serde_json::to_string_pretty(&results).expect("serializable");
    body.push('\n');
    write_out(&cfg.output_dir, "verify.json", &body)?;
    Ok(results.iter().all(|r| r.passed))
}

fn to_disk(z: Complex64) -> Complex64 {
    (z - Complex64::i()) / (z + Complex64::i())
}

/// Poincaré-disk picture of the fundamental domain and the unfolded arcs.
fn domain_svg(group: &FuchsianGroup, atlas: &[ClosedGeodesic]) -> String {
    let size = 800.0;
    let px = |w: Complex64| (size / 2.0 * (1.0 + w.re), size / 2.0 * (1.0 - w.im));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(
        s,
        "<circle cx=\"{c}\" cy=\"{c}\" r=\"{c}\" fill=\"none\" stroke=\"black\"/>",
        c = size / 2.0
    );
    // Dirichlet cell at i against the generator images
    let centres: Vec<Complex64> = group.generators().iter().map(|g| g.base_point()).collect();
    let mut boundary = Vec::new();
    let n = 720;
    for k in 0..n {
        let dir = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        let (mut lo, mut hi) = (0.0f64, 0.999f64);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let w = dir * mid;
            let z =
                Complex64::i() * (Complex64::new(1.0, 0.0) + w) / (Complex64::new(1.0, 0.0) - w);
            let d0 = geoflow::moebius::cosh_distance(z, Complex64::i());
            if centres
                .iter()
                .all(|c| geoflow::moebius::cosh_distance(z, *c) >= d0)
            {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        boundary.push(dir * lo);
    }
    let pts: Vec<String> = boundary
        .iter()
        .map(|w| {
            let (x, y) = px(*w);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        "<polygon points=\"{}\" fill=\"none\" stroke=\"gray\"/>",
        pts.join(" ")
    );
    for geo in atlas.iter().take(32) {
        let Ok(segs) = geodesic_segments(geo, group) else {
            continue;
        };
        for seg in segs {
            let m = 16;
            let pts: Vec<String> = (0..=m)
                .map(|k| {
                    let t = seg.t_begin + (seg.t_end - seg.t_begin) * k as f64 / m as f64;
                    let (x, y) = px(to_disk(
                        (seg.frame * geoflow::moebius::flow(t)).base_point(),
                    ));
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\"/>",
                pts.join(" ")
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Orbits { common, svg } => cmd_orbits(common, *svg),
        Command::Crossings { common } => cmd_crossings(common),
        Command::Partners { common, atlas } => cmd_partners(common, atlas.as_deref()),
        Command::Verify { common, suite } => cmd_verify(common, suite.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(ConfigError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
