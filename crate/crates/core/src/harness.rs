//! Experiment driver: JSON configs, runners and reports.
//!
//! Every runner validates its config before computing, returns a
//! [`Report`] together with the raw CSV bodies its verdicts are computed
//! from, and is deterministic given the config (replicates run in parallel
//! and are merged in replicate order).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{admissible_alpha, alpha_max, critical_exponent, distortion_bounds, BoundKind, BoundParams};
use crate::dimension::{box_dimension_auto, box_dimension_auto_with, geometric_grid, BoxCounter, DimensionEstimate};
use crate::error::{invalid, Error, Result};
use crate::foliation::{
    coset_quotient_distance, coset_quotient_distance_anchored, ds_regularity_table, ChartKind, FoliationChart, KSample,
    KSpec, RegularityOptions,
};
use crate::frostman::{frostman_measure, FrostmanOptions};
use crate::point::{common_space, format_f64, read_points_csv, Point, Space};
use crate::rng;
use crate::sets::SetSpec;
use crate::sobolev::{
    build_construction, level_lp_norms, CertifiedSobolevMap, Identity, LpReference, LpTable, RadialHolder,
    RandomSobolevMap, SmoothWarp, SobolevConfig, TestMap,
};
use crate::spaces::{carpet_sample, CarpetSpec};
use crate::tolerances::*;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sharpness,
    UniversalBound,
    FoliationSurvey,
    Regularity,
    GrushinCompare,
    CarpetRegularity,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Sharpness,
        Experiment::UniversalBound,
        Experiment::FoliationSurvey,
        Experiment::Regularity,
        Experiment::GrushinCompare,
        Experiment::CarpetRegularity,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Experiment::Sharpness => "sharpness",
            Experiment::UniversalBound => "universal_bound",
            Experiment::FoliationSurvey => "foliation_survey",
            Experiment::Regularity => "regularity",
            Experiment::GrushinCompare => "grushin_compare",
            Experiment::CarpetRegularity => "carpet_regularity",
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(flatten)]
    pub params: ExperimentParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "snake_case")]
pub enum ExperimentParams {
    Sharpness(SharpnessParams),
    UniversalBound(UniversalParams),
    FoliationSurvey(SurveyParams),
    Regularity(RegularityParams),
    GrushinCompare(GrushinParams),
    CarpetRegularity(CarpetRegularityParams),
}

impl ExperimentConfig {
    pub fn experiment(&self) -> Experiment {
        match &self.params {
            ExperimentParams::Sharpness(_) => Experiment::Sharpness,
            ExperimentParams::UniversalBound(_) => Experiment::UniversalBound,
            ExperimentParams::FoliationSurvey(_) => Experiment::FoliationSurvey,
            ExperimentParams::Regularity(_) => Experiment::Regularity,
            ExperimentParams::GrushinCompare(_) => Experiment::GrushinCompare,
            ExperimentParams::CarpetRegularity(_) => Experiment::CarpetRegularity,
        }
    }

    /// The reference configuration of each experiment.
    pub fn default_for(experiment: Experiment) -> ExperimentConfig {
        let (replicates, params) = match experiment {
            Experiment::Sharpness => (5, ExperimentParams::Sharpness(SharpnessParams::default())),
            Experiment::UniversalBound => (1, ExperimentParams::UniversalBound(UniversalParams::default())),
            Experiment::FoliationSurvey => (1, ExperimentParams::FoliationSurvey(SurveyParams::default())),
            Experiment::Regularity => (1, ExperimentParams::Regularity(RegularityParams::default())),
            Experiment::GrushinCompare => (1, ExperimentParams::GrushinCompare(GrushinParams::default())),
            Experiment::CarpetRegularity => (1, ExperimentParams::CarpetRegularity(CarpetRegularityParams::default())),
        };
        ExperimentConfig {
            seed: 0,
            replicates,
            output_dir: None,
            params,
        }
    }

    pub fn from_json(s: &str) -> Result<ExperimentConfig> {
        Ok(serde_json::from_str(s)?)
    }

    /// Reject out-of-range parameters before any compute.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        match &self.params {
            ExperimentParams::Sharpness(p) => p.validate(),
            ExperimentParams::UniversalBound(p) => p.validate(),
            ExperimentParams::FoliationSurvey(p) => p.validate(),
            ExperimentParams::Regularity(p) => p.validate(),
            ExperimentParams::GrushinCompare(p) => p.validate(),
            ExperimentParams::CarpetRegularity(p) => p.validate(),
        }
    }
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Reference value of an acceptance run.
    Golden,
    /// Measured by a pipeline and compared with a derived target.
    Derived,
    /// Closed-form value or identity.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value ≤ target + tolerance`.
    AtMost,
    /// `value ≥ target − tolerance`.
    AtLeast,
    /// `|value − target| ≤ tolerance`.
    Within,
    /// `value` and `target` are nonzero with the same sign.
    SameSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub provenance: Provenance,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MetricResult {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        comparison: Comparison,
        target: f64,
        tolerance: f64,
        provenance: Provenance,
    ) -> MetricResult {
        let pass = match comparison {
            Comparison::AtMost => value <= target + tolerance,
            Comparison::AtLeast => value >= target - tolerance,
            Comparison::Within => (value - target).abs() <= tolerance,
            Comparison::SameSign => value * target > 0.0,
        };
        MetricResult {
            name: name.into(),
            value,
            target,
            comparison,
            tolerance,
            provenance,
            pass,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> MetricResult {
        self.note = Some(note.into());
        self
    }

    /// A verdict fixed by the runner (e.g. an empty exceptional set).
    fn forced(mut self, pass: bool) -> MetricResult {
        self.pass = pass;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: Experiment,
    pub version: String,
    pub config: ExperimentConfig,
    pub results: Vec<MetricResult>,
    /// Underlying tables, embedded verbatim.
    pub tables: serde_json::Value,
    pub notes: Vec<String>,
    /// Names of the CSV files written next to the report.
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn result(&self, name: &str) -> Option<&MetricResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A report and the CSV bodies it was computed from.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub csv: BTreeMap<String, String>,
}

impl RunOutput {
    /// Write `report.json` and every CSV into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.csv {
            std::fs::write(dir.join(name), body)?;
        }
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        Ok(())
    }
}

struct Body {
    results: Vec<MetricResult>,
    tables: serde_json::Value,
    notes: Vec<String>,
    csv: BTreeMap<String, String>,
}

/// Validate and run `config`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = Instant::now();
    let body = match &config.params {
        ExperimentParams::Sharpness(p) => sharpness(config, p)?,
        ExperimentParams::UniversalBound(p) => universal(config, p)?,
        ExperimentParams::FoliationSurvey(p) => survey(p)?,
        ExperimentParams::Regularity(p) => regularity(p)?,
        ExperimentParams::GrushinCompare(p) => grushin(config, p)?,
        ExperimentParams::CarpetRegularity(p) => carpet(config, p)?,
    };
    let report = Report {
        experiment: config.experiment(),
        version: VERSION.into(),
        config: config.clone(),
        results: body.results,
        tables: body.tables,
        notes: body.notes,
        files: body.csv.keys().cloned().collect(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { report, csv: body.csv })
}

fn expect(config: &ExperimentConfig, which: Experiment) -> Result<()> {
    if config.experiment() == which {
        Ok(())
    } else {
        Err(invalid(format!(
            "config is for {}, not {}",
            config.experiment().label(),
            which.label()
        )))
    }
}

pub fn run_sharpness(config: &ExperimentConfig) -> Result<RunOutput> {
    expect(config, Experiment::Sharpness)?;
    run(config)
}

pub fn run_universal_bound(config: &ExperimentConfig) -> Result<RunOutput> {
    expect(config, Experiment::UniversalBound)?;
    run(config)
}

pub fn run_foliation_survey(config: &ExperimentConfig) -> Result<RunOutput> {
    expect(config, Experiment::FoliationSurvey)?;
    run(config)
}

pub fn run_regularity(config: &ExperimentConfig) -> Result<RunOutput> {
    expect(config, Experiment::Regularity)?;
    run(config)
}

pub fn run_grushin_compare(config: &ExperimentConfig) -> Result<RunOutput> {
    expect(config, Experiment::GrushinCompare)?;
    run(config)
}

pub fn run_carpet_regularity(config: &ExperimentConfig) -> Result<RunOutput> {
    expect(config, Experiment::CarpetRegularity)?;
    run(config)
}

// ---------------------------------------------------------------- csv

struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(header: &[&str]) -> Result<Csv> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Csv { w })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<String> {
        let bytes = self.w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
    }
}

fn f(x: f64) -> String {
    format_f64(x)
}

fn box_count_rows(csv: &mut Csv, key: &[String], est: &DimensionEstimate) -> Result<()> {
    for (r, n) in &est.counts {
        let mut row = key.to_vec();
        row.push(f(*r));
        row.push(n.to_string());
        csv.row(row)?;
    }
    Ok(())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn to_value<T: Serialize>(t: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(t)?)
}

fn image_of(map: &dyn TestMap, points: &[Point]) -> Result<Vec<Point>> {
    points.iter().map(|x| Ok(Point::euclidean(&map.eval(x)?))).collect()
}

// ---------------------------------------------------------------- sharpness

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SharpnessParams {
    pub set: SetSpec,
    /// Homogeneous dimension of the source.
    pub q: f64,
    /// Dimension of the set (Frostman exponent).
    pub s: f64,
    pub p: f64,
    /// Target dimension `N`.
    pub target_dim: usize,
    pub n_max: u32,
    /// Ball dilation in the construction weights.
    pub dilation: f64,
    /// Geometric scales in the image box estimate.
    pub box_scales: usize,
    pub counter: BoxCounter,
    /// Exponents whose level norms should decay or grow.
    pub off_critical_p: Vec<f64>,
    pub cells_per_radius: usize,
    /// Replace the Frostman measure by the zero measure.
    pub zero_measure: bool,
}

impl Default for SharpnessParams {
    fn default() -> Self {
        SharpnessParams {
            set: SetSpec::CantorDust { depth: 8 },
            q: 2.0,
            s: 1.0,
            p: 4.0,
            target_dim: 2,
            n_max: 8,
            dilation: 10.0,
            box_scales: 12,
            counter: BoxCounter::GreedyCover,
            off_critical_p: vec![3.0, 8.0],
            cells_per_radius: 6,
            zero_measure: false,
        }
    }
}

impl SharpnessParams {
    pub fn alpha(&self) -> f64 {
        alpha_max(self.q, self.s, self.p)
    }

    fn validate(&self) -> Result<()> {
        BoundParams::new(self.q, self.s, self.p).validate()?;
        if !(self.s > 0.0) {
            return Err(invalid("the sharpness construction needs s > 0"));
        }
        SobolevConfig::new(self.alpha(), self.target_dim, self.n_max, 0)
            .with_dilation(self.dilation)
            .validate()?;
        if self.box_scales < 2 {
            return Err(invalid("box_scales must be at least 2"));
        }
        if self.cells_per_radius == 0 {
            return Err(invalid("cells_per_radius must be positive"));
        }
        for &p in &self.off_critical_p {
            if !(p >= 1.0) || critical_exponent(self.q, self.s, p, self.alpha()) == 0.0 {
                return Err(invalid(format!("off-critical exponent {p} must be >= 1 and not critical")));
            }
        }
        Ok(())
    }
}

/// First level whose dilated balls all miss part of the mass.
fn first_proper_level(map: &RandomSobolevMap) -> Option<u32> {
    let total = map.nu_total_mass;
    map.levels
        .iter()
        .find(|l| l.dilated_mass.iter().all(|&m| m < total * (1.0 - 1e-9)))
        .map(|l| l.n)
}

fn sharpness(config: &ExperimentConfig, sp: &SharpnessParams) -> Result<Body> {
    let mut notes = Vec::new();
    let alpha = sp.alpha();
    let e = sp.set.build(config.seed)?;
    let space = common_space(&e)?;
    let frost = frostman_measure(&e, sp.s, &FrostmanOptions::default())?;
    let degenerate = sp.zero_measure || frost.degenerate;
    if degenerate {
        notes.push("degenerate measure: the construction is the constant zero map".into());
    }
    notes.extend(frost.notes.iter().cloned());

    let seeds: Vec<u64> = (0..config.replicates as u64).map(|i| config.seed.wrapping_add(i)).collect();
    let runs: Vec<(RandomSobolevMap, DimensionEstimate)> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SobolevConfig::new(alpha, sp.target_dim, sp.n_max, seed).with_dilation(sp.dilation);
            let map = if degenerate {
                RandomSobolevMap::zero(space, &cfg)
            } else {
                build_construction(&e, &frost.measure, &cfg)?
            };
            let img = e
                .iter()
                .map(|x| Ok(Point::euclidean(&map.evaluate(x)?)))
                .collect::<Result<Vec<_>>>()?;
            let est = box_dimension_auto_with(&img, sp.box_scales, sp.counter)?;
            Ok((map, est))
        })
        .collect::<Result<_>>()?;

    let mut dims = Csv::new(&["replicate", "seed", "estimate", "r_min", "r_max", "slope_residual", "degenerate"])?;
    let mut counts = Csv::new(&["replicate", "seed", "r", "N"])?;
    for (i, ((_, est), seed)) in runs.iter().zip(&seeds).enumerate() {
        dims.row([
            i.to_string(),
            seed.to_string(),
            f(est.value),
            f(est.scale_window.0),
            f(est.scale_window.1),
            f(est.slope_residual),
            est.degenerate.to_string(),
        ])?;
        box_count_rows(&mut counts, &[i.to_string(), seed.to_string()], est)?;
    }
    let estimates: Vec<f64> = runs.iter().map(|r| r.1.value).collect();
    let med = median(&estimates);
    let mut results = vec![
        MetricResult::new("alpha_max", alpha, Comparison::Within, alpha, 0.0, Provenance::Analytic),
        MetricResult::new(
            "image_dimension_median_lower",
            med,
            Comparison::AtLeast,
            alpha,
            DIMENSION_TOL,
            Provenance::Golden,
        ),
        MetricResult::new(
            "image_dimension_median_upper",
            med,
            Comparison::AtMost,
            alpha,
            DIMENSION_TOL,
            Provenance::Derived,
        ),
    ];

    // level norms do not depend on the random vectors, so one map suffices
    let map = &runs[0].0;
    let mut norms = Csv::new(&[
        "p",
        "n",
        "radius",
        "balls",
        "norm",
        "dilated_mass_sum",
        "max_dilated_mass",
        "total_mass",
        "quadrature_points",
    ])?;
    let mut tables: Vec<LpTable> = Vec::new();
    if degenerate {
        notes.push("level norms skipped: zero map".into());
    } else {
        let reference = match space {
            Space::Euclidean(_) | Space::Carpet => LpReference::AdaptiveLebesgue {
                cells_per_radius: sp.cells_per_radius,
            },
            _ => LpReference::Discrete(frost.measure.clone()),
        };
        let ps: Vec<f64> = std::iter::once(sp.p).chain(sp.off_critical_p.iter().cloned()).collect();
        for &p in &ps {
            let t = level_lp_norms(map, p, &reference)?;
            for (l, lev) in t.levels.iter().zip(&map.levels) {
                norms.row([
                    f(p),
                    l.n.to_string(),
                    f(lev.radius),
                    l.balls.to_string(),
                    f(l.norm),
                    f(l.dilated_mass_sum),
                    f(lev.dilated_mass.iter().cloned().fold(0.0, f64::max)),
                    f(map.nu_total_mass),
                    l.quadrature_points.to_string(),
                ])?;
            }
            tables.push(t);
        }
        let lo = 2.min(sp.n_max);
        results.push(
            MetricResult::new(
                "critical_level_norm_window",
                tables[0].ratio_window(lo, sp.n_max),
                Comparison::AtMost,
                LEVEL_NORM_WINDOW,
                0.0,
                Provenance::Derived,
            )
            .with_note(format!("max/min of level norms at p = {} over n = {lo}..{}", sp.p, sp.n_max)),
        );
        match first_proper_level(map) {
            Some(n0) if n0 < sp.n_max => {
                for t in &tables[1..] {
                    let e = critical_exponent(sp.q, sp.s, t.p, alpha);
                    results.push(
                        MetricResult::new(
                            format!("off_critical_slope_p{}", t.p),
                            t.log2_slope(n0, sp.n_max),
                            Comparison::SameSign,
                            e,
                            0.0,
                            Provenance::Analytic,
                        )
                        .with_note(format!(
                            "log2 slope over n = {n0}..{}; target is the critical exponent",
                            sp.n_max
                        )),
                    );
                }
            }
            _ => {
                notes.push("off-critical slopes skipped: fewer than two unsaturated levels".into());
                for t in &tables[1..] {
                    let e = critical_exponent(sp.q, sp.s, t.p, alpha);
                    results.push(
                        MetricResult::new(
                            format!("off_critical_slope_p{}", t.p),
                            0.0,
                            Comparison::SameSign,
                            e,
                            0.0,
                            Provenance::Analytic,
                        )
                        .with_note("no unsaturated levels"),
                    );
                }
            }
        }
    }

    let mut csv = BTreeMap::new();
    csv.insert("image_dimensions.csv".into(), dims.finish()?);
    csv.insert("image_box_counts.csv".into(), counts.finish()?);
    csv.insert("level_norms.csv".into(), norms.finish()?);
    let tables = serde_json::json!({
        "frostman_constant": frost.constant(),
        "frostman_mass": frost.measure.total_mass(),
        "rescale": runs[0].0.scale,
        "first_unsaturated_level": if degenerate { None } else { first_proper_level(map) },
        "image_estimates": runs.iter().map(|r| &r.1).collect::<Vec<_>>(),
        "level_norms": tables,
    });
    Ok(Body {
        results,
        tables,
        notes,
        csv,
    })
}

// ---------------------------------------------------------------- universal

/// A test map family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Identity,
    RadialHolder { beta: f64 },
    SmoothWarp { amplitude: f64 },
    /// The random construction built on the case's set with its Frostman
    /// measure.
    RandomSobolev {
        alpha: f64,
        target_dim: usize,
        n_max: u32,
        dilation: f64,
    },
}

enum BuiltMap {
    Boxed(Box<dyn TestMap>),
    Sobolev { map: RandomSobolevMap, q: f64, s: f64 },
}

impl BuiltMap {
    fn as_map(&self) -> Box<dyn TestMap + '_> {
        match self {
            BuiltMap::Boxed(m) => Box::new(Borrowed(m.as_ref())),
            BuiltMap::Sobolev { map, q, s } => Box::new(CertifiedSobolevMap { map, q: *q, s: *s }),
        }
    }
}

struct Borrowed<'a>(&'a dyn TestMap);

impl TestMap for Borrowed<'_> {
    fn name(&self) -> String {
        self.0.name()
    }
    fn domain(&self) -> Space {
        self.0.domain()
    }
    fn target_dim(&self) -> usize {
        self.0.target_dim()
    }
    fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        self.0.eval(x)
    }
    fn upper_gradient(&self, x: &Point) -> Result<f64> {
        self.0.upper_gradient(x)
    }
    fn certified_exponent(&self) -> Option<crate::sobolev::Exponent> {
        self.0.certified_exponent()
    }
}

impl MapSpec {
    /// Build on `domain`; the random construction needs the set and `(Q, s)`.
    fn build(&self, domain: Space, set: &[Point], q: f64, s: f64, seed: u64) -> Result<BuiltMap> {
        Ok(match self {
            MapSpec::Identity => match domain {
                Space::Euclidean(d) => BuiltMap::Boxed(Box::new(Identity(d))),
                Space::Carpet => BuiltMap::Boxed(Box::new(Identity(2))),
                other => return Err(Error::Unsupported(format!("identity map on {other}"))),
            },
            MapSpec::RadialHolder { beta } => match domain {
                Space::Euclidean(d) => BuiltMap::Boxed(Box::new(RadialHolder::new(d, *beta)?)),
                other => return Err(Error::Unsupported(format!("radial map on {other}"))),
            },
            MapSpec::SmoothWarp { amplitude } => {
                let dom = match domain {
                    Space::Euclidean(2) | Space::Carpet => Space::Euclidean(2),
                    Space::Heisenberg(1) => Space::Heisenberg(1),
                    other => return Err(Error::Unsupported(format!("smooth warp on {other}"))),
                };
                BuiltMap::Boxed(Box::new(SmoothWarp {
                    domain: dom,
                    amplitude: *amplitude,
                }))
            }
            MapSpec::RandomSobolev {
                alpha,
                target_dim,
                n_max,
                dilation,
            } => {
                let frost = frostman_measure(set, s, &FrostmanOptions::default())?;
                let cfg = SobolevConfig::new(*alpha, *target_dim, *n_max, seed).with_dilation(*dilation);
                let map = build_construction(set, &frost.measure, &cfg)?;
                BuiltMap::Sobolev { map, q, s }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalCase {
    pub set: SetSpec,
    pub map: MapSpec,
    /// Sobolev exponent the bound is evaluated at; must be certified.
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniversalParams {
    pub q: f64,
    pub box_scales: usize,
    pub cases: Vec<UniversalCase>,
}

impl Default for UniversalParams {
    fn default() -> Self {
        let circle = SetSpec::Circle {
            center: (0.5, 0.0),
            radius: 0.5,
            n: 4000,
        };
        UniversalParams {
            q: 2.0,
            box_scales: 12,
            cases: vec![
                UniversalCase {
                    set: circle.clone(),
                    map: MapSpec::Identity,
                    p: 3.0,
                },
                UniversalCase {
                    set: circle,
                    map: MapSpec::RadialHolder { beta: 0.5 },
                    p: 3.9,
                },
                UniversalCase {
                    set: SetSpec::CantorDust { depth: 8 },
                    map: MapSpec::RandomSobolev {
                        alpha: 4.0 / 3.0,
                        target_dim: 2,
                        n_max: 8,
                        dilation: 10.0,
                    },
                    p: 4.0,
                },
            ],
        }
    }
}

impl UniversalParams {
    fn validate(&self) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::EmptyInput("universal cases"));
        }
        if self.box_scales < 2 {
            return Err(invalid("box_scales must be at least 2"));
        }
        for c in &self.cases {
            let s = c.set.known_dimension().unwrap_or(0.0);
            BoundParams::new(self.q, s.min(self.q), c.p).validate()?;
            let sup = match &c.map {
                MapSpec::Identity | MapSpec::SmoothWarp { .. } => Some((f64::INFINITY, false)),
                MapSpec::RadialHolder { beta } => {
                    RadialHolder::new(self.q as usize, *beta)?;
                    if *beta == 1.0 {
                        Some((f64::INFINITY, false))
                    } else {
                        Some((self.q / (1.0 - beta), false))
                    }
                }
                MapSpec::RandomSobolev { alpha, .. } => match c.set.known_dimension() {
                    Some(s) if *alpha > s => Some((alpha * (self.q - s) / (alpha - s), true)),
                    Some(_) => Some((f64::INFINITY, false)),
                    None => None,
                },
            };
            match sup {
                None => {
                    return Err(invalid(format!(
                        "map {:?} on this set has no certified Sobolev exponent",
                        c.map
                    )))
                }
                Some((sup, attained)) if !(c.p < sup || (attained && c.p == sup)) => {
                    return Err(Error::OutOfRange {
                        name: "p",
                        value: c.p,
                        interval: format!("({}, {sup}{}", self.q, if attained { "]" } else { ")" }),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn universal(config: &ExperimentConfig, up: &UniversalParams) -> Result<Body> {
    let mut results = Vec::new();
    let mut notes = Vec::new();
    let mut summary = Csv::new(&["case", "map", "p", "set_dimension", "bound", "estimate"])?;
    let mut counts = Csv::new(&["case", "r", "N"])?;
    let mut estimates = Vec::new();
    for (i, case) in up.cases.iter().enumerate() {
        let e = case.set.build(config.seed)?;
        let space = common_space(&e)?;
        let s = match case.set.known_dimension() {
            Some(s) => s,
            None => {
                let est = box_dimension_auto(&e, up.box_scales)?;
                notes.push(format!("case {i}: set dimension estimated as {}", est.value));
                est.value
            }
        };
        let built = case.map.build(space, &e, up.q, s, config.seed)?;
        let map = built.as_map();
        match map.certified_exponent() {
            Some(x) if x.admits(case.p) => {}
            Some(x) => {
                return Err(invalid(format!(
                    "case {i}: p = {} not certified for {} (sup {})",
                    case.p,
                    map.name(),
                    x.sup
                )))
            }
            None => return Err(invalid(format!("case {i}: {} has no certified exponent", map.name()))),
        }
        let bound = distortion_bounds(&BoundParams::new(up.q, s, case.p), BoundKind::Universal)?;
        let img = image_of(map.as_ref(), &e)?;
        let est = box_dimension_auto(&img, up.box_scales)?;
        summary.row([
            i.to_string(),
            map.name(),
            f(case.p),
            f(s),
            f(bound),
            f(est.value),
        ])?;
        box_count_rows(&mut counts, &[i.to_string()], &est)?;
        results.push(
            MetricResult::new(
                format!("case{i}_image_dimension"),
                est.value,
                Comparison::AtMost,
                bound,
                DIMENSION_TOL,
                Provenance::Derived,
            )
            .with_note(format!("{} on {:?}", map.name(), case.set)),
        );
        estimates.push(est);
    }
    let mut csv = BTreeMap::new();
    csv.insert("universal.csv".into(), summary.finish()?);
    csv.insert("universal_box_counts.csv".into(), counts.finish()?);
    Ok(Body {
        results,
        tables: to_value(&estimates)?,
        notes,
        csv,
    })
}

// ---------------------------------------------------------------- survey

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyParams {
    #[serde(flatten)]
    pub chart: ChartKind,
    pub map: MapSpec,
    pub p: f64,
    pub alphas: Vec<f64>,
    /// Grid points per parameter coordinate.
    #[serde(default = "SurveyParams::default_param_points")]
    pub param_points: usize,
    #[serde(default = "SurveyParams::default_range")]
    pub param_range: (f64, f64),
    /// Grid points per leaf coordinate.
    #[serde(default = "SurveyParams::default_leaf_points")]
    pub leaf_points: usize,
    #[serde(default = "SurveyParams::default_range")]
    pub leaf_range: (f64, f64),
    #[serde(default = "SurveyParams::default_box_scales")]
    pub box_scales: usize,
}

impl Default for SurveyParams {
    fn default() -> Self {
        SurveyParams {
            chart: ChartKind::HeisRight,
            map: MapSpec::SmoothWarp { amplitude: 0.1 },
            p: 5.0,
            alphas: vec![2.5],
            param_points: Self::default_param_points(),
            param_range: Self::default_range(),
            leaf_points: Self::default_leaf_points(),
            leaf_range: Self::default_range(),
            box_scales: Self::default_box_scales(),
        }
    }
}

impl SurveyParams {
    fn default_param_points() -> usize {
        12
    }
    fn default_range() -> (f64, f64) {
        (-1.0, 1.0)
    }
    fn default_leaf_points() -> usize {
        400
    }
    fn default_box_scales() -> usize {
        8
    }

    /// Bound family and `(Q, s)` of the chart.
    pub fn bound_family(&self) -> (BoundKind, f64, f64) {
        chart_bound(&self.chart)
    }

    fn validate(&self) -> Result<()> {
        let chart = FoliationChart::new(self.chart.clone())?;
        let (kind, q, s) = self.bound_family();
        if self.alphas.is_empty() {
            return Err(Error::EmptyInput("survey thresholds"));
        }
        for &a in &self.alphas {
            distortion_bounds(&BoundParams::new(q, s, self.p).with_alpha(a), kind)?;
        }
        if self.param_points == 0 || self.leaf_points < 2 || self.box_scales < 2 {
            return Err(invalid("survey needs param_points >= 1, leaf_points >= 2, box_scales >= 2"));
        }
        for (lo, hi) in [self.param_range, self.leaf_range] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!("empty range ({lo}, {hi})")));
            }
        }
        if let MapSpec::RandomSobolev { .. } = self.map {
            return Err(Error::Unsupported("random construction in a survey; use a fixed test map".into()));
        }
        // chart/map space compatibility
        self.map.build(chart.ambient, &[], q, s, 0).map(|_| ())
    }
}

fn chart_bound(kind: &ChartKind) -> (BoundKind, f64, f64) {
    match kind {
        ChartKind::EuclideanProjection { dim, keep } => (BoundKind::Foliation, *dim as f64, (dim - keep) as f64),
        ChartKind::CarpetVertical { .. } => (BoundKind::Foliation, 2.0, 1.0),
        ChartKind::HeisLeft => (BoundKind::HeisLeft, 4.0, 3.0),
        ChartKind::HeisLeftHorizontal => (BoundKind::HeisVerticalEuclidean, 4.0, 2.0),
        ChartKind::HeisRight => (BoundKind::HeisGrushin, 4.0, 2.0),
    }
}

fn survey_parameters(chart: &ChartKind, grid: &[f64]) -> Vec<Point> {
    let pairs = || grid.iter().flat_map(|&a| grid.iter().map(move |&b| (a, b)));
    match chart {
        ChartKind::EuclideanProjection { keep, .. } => {
            let mut out: Vec<Vec<f64>> = vec![vec![]];
            for _ in 0..*keep {
                out = out
                    .into_iter()
                    .flat_map(|v| {
                        grid.iter().map(move |&g| {
                            let mut w = v.clone();
                            w.push(g);
                            w
                        })
                    })
                    .collect();
            }
            out.iter().map(|v| Point::euclidean(v)).collect()
        }
        ChartKind::CarpetVertical { .. } => grid.iter().map(|&x| Point::line(x)).collect(),
        ChartKind::HeisLeft => grid.iter().map(|&x| Point::h1(x, 0.0, 0.0)).collect(),
        ChartKind::HeisLeftHorizontal => pairs().map(|(y, t)| Point::plane(y, t)).collect(),
        ChartKind::HeisRight => pairs().map(|(y, t)| Point::grushin(y, t)).collect(),
    }
}

/// Heisenberg distances use the Korányi gauge, which matches the CC metric
/// only up to a constant that is not computed here.
const KORANYI_SLACK: &str =
    "Heisenberg distances use the Koranyi gauge; constants are up to an unknown multiplicative slack relative to the CC metric";

fn koranyi_note(kind: &ChartKind) -> Option<String> {
    matches!(kind, ChartKind::HeisLeft | ChartKind::HeisLeftHorizontal | ChartKind::HeisRight)
        .then(|| KORANYI_SLACK.to_string())
}

fn survey(sp: &SurveyParams) -> Result<Body> {
    let chart = FoliationChart::new(sp.chart.clone())?;
    let (kind, q, s) = sp.bound_family();
    let mut notes = vec!["exceptional-set dimensions are grid box proxies".to_string()];
    notes.extend(koranyi_note(&sp.chart));
    let built = sp.map.build(chart.ambient, &[], q, s, 0)?;
    let map = built.as_map();
    let (mut plo, mut phi) = sp.param_range;
    let (mut llo, mut lhi) = sp.leaf_range;
    if let ChartKind::CarpetVertical { .. } = sp.chart {
        (plo, phi) = (plo.max(0.0), phi.min(1.0));
        (llo, lhi) = (llo.max(0.0), lhi.min(1.0));
        if !(plo < phi && llo < lhi) {
            return Err(invalid("carpet survey ranges must meet [0, 1]"));
        }
    }
    let params = survey_parameters(&sp.chart, &linspace(plo, phi, sp.param_points));
    let leaf_grid = linspace(llo, lhi, sp.leaf_points);
    let leaves: Vec<(usize, Option<DimensionEstimate>)> = params
        .par_iter()
        .map(|a| {
            let pts = chart.leaf_sample(a, &leaf_grid)?;
            if pts.len() < 2 {
                return Ok((pts.len(), None));
            }
            let img = image_of(map.as_ref(), &pts)?;
            Ok((pts.len(), Some(box_dimension_auto(&img, sp.box_scales)?)))
        })
        .collect::<Result<_>>()?;
    let empty = leaves.iter().filter(|l| l.1.is_none()).count();
    if empty > 0 {
        notes.push(format!("{empty} leaves with fewer than two sample points were skipped"));
    }

    let mut leaf_csv = Csv::new(&["leaf", "a0", "a1", "a2", "points", "estimate"])?;
    let mut leaf_counts = Csv::new(&["leaf", "r", "N"])?;
    for (i, (a, (n, est))) in params.iter().zip(&leaves).enumerate() {
        let mut row = vec![i.to_string()];
        for k in 0..3 {
            row.push(a.coords().get(k).map(|&c| f(c)).unwrap_or_default());
        }
        row.push(n.to_string());
        row.push(est.as_ref().map(|e| f(e.value)).unwrap_or_default());
        leaf_csv.row(row)?;
        if let Some(e) = est {
            box_count_rows(&mut leaf_counts, &[i.to_string()], e)?;
        }
    }

    let mut results = Vec::new();
    let mut exc_csv = Csv::new(&["alpha", "bound", "count", "grid_box_proxy"])?;
    let mut exc_counts = Csv::new(&["alpha", "r", "N"])?;
    for &alpha in &sp.alphas {
        let bp = BoundParams::new(q, s, sp.p).with_alpha(alpha);
        let bound = distortion_bounds(&bp, kind)?;
        let direct = (q - s) - sp.p * (1.0 - s / alpha);
        results.push(MetricResult::new(
            format!("bound_cross_check_alpha{alpha}"),
            bound,
            Comparison::Within,
            direct,
            0.0,
            Provenance::Analytic,
        ));
        let exceptional: Vec<Point> = params
            .iter()
            .zip(&leaves)
            .filter(|(_, l)| l.1.as_ref().is_some_and(|e| e.value >= alpha))
            .map(|(a, _)| a.clone())
            .collect();
        let name = format!("exceptional_dimension_alpha{alpha}");
        let metric = if exceptional.is_empty() {
            MetricResult::new(name, 0.0, Comparison::AtMost, bound, SURVEY_TOL, Provenance::Derived)
                .with_note("empty exceptional set")
                .forced(true)
        } else {
            let est = box_dimension_auto(&exceptional, sp.box_scales)?;
            box_count_rows(&mut exc_counts, &[f(alpha)], &est)?;
            MetricResult::new(name, est.value, Comparison::AtMost, bound, SURVEY_TOL, Provenance::Derived)
                .with_note("grid box proxy")
        };
        exc_csv.row([f(alpha), f(bound), exceptional.len().to_string(), f(metric.value)])?;
        results.push(metric);
    }
    let admissible = admissible_alpha(kind, &BoundParams::new(q, s, sp.p))?;
    let mut csv = BTreeMap::new();
    csv.insert("leaf_dimensions.csv".into(), leaf_csv.finish()?);
    csv.insert("leaf_box_counts.csv".into(), leaf_counts.finish()?);
    csv.insert("exceptional.csv".into(), exc_csv.finish()?);
    csv.insert("exceptional_box_counts.csv".into(), exc_counts.finish()?);
    let tables = serde_json::json!({
        "chart": chart.label(),
        "map": map.name(),
        "bound_kind": kind,
        "admissible_alpha": admissible,
        "leaves": params.len(),
    });
    Ok(Body {
        results,
        tables,
        notes,
        csv,
    })
}

// ---------------------------------------------------------------- regularity

/// The compact set of a regularity run: a named analytic set or a CSV sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KConfig {
    Named(KSpec),
    Csv { csv: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityParams {
    #[serde(flatten)]
    pub chart: ChartKind,
    /// Defaults to the natural set of the chart.
    #[serde(rename = "K", default)]
    pub k: Option<KConfig>,
    /// Defaults to the regularity exponent of the chart.
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default = "RegularityParams::default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "RegularityParams::default_max_centers")]
    pub max_centers: usize,
    #[serde(default = "RegularityParams::default_spacing")]
    pub spacing: f64,
    #[serde(default = "RegularityParams::default_samples")]
    pub samples: usize,
    #[serde(default = "RegularityParams::default_window")]
    pub window: f64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        RegularityParams {
            chart: ChartKind::HeisRight,
            k: None,
            s: None,
            radii: Self::default_radii(),
            max_centers: Self::default_max_centers(),
            spacing: Self::default_spacing(),
            samples: Self::default_samples(),
            window: Self::default_window(),
        }
    }
}

impl RegularityParams {
    fn default_radii() -> Vec<f64> {
        (3..=7).map(|k| 2f64.powi(-k)).collect()
    }
    fn default_max_centers() -> usize {
        RegularityOptions::default().max_centers
    }
    fn default_spacing() -> f64 {
        RegularityOptions::default().spacing
    }
    fn default_samples() -> usize {
        RegularityOptions::default().samples
    }
    fn default_window() -> f64 {
        REGULARITY_WINDOW
    }

    pub fn options(&self) -> RegularityOptions {
        RegularityOptions {
            max_centers: self.max_centers,
            spacing: self.spacing,
            samples: self.samples,
        }
    }

    pub fn k_sample(&self) -> Result<KSample> {
        Ok(match &self.k {
            Some(KConfig::Named(spec)) => KSample::Analytic(spec.clone()),
            Some(KConfig::Csv { csv }) => KSample::Points {
                id: csv.clone(),
                points: read_points_csv(std::fs::File::open(csv)?)?,
            },
            None => KSample::Analytic(match &self.chart {
                ChartKind::EuclideanProjection { dim, .. } => KSpec::UnitCube { dim: *dim },
                ChartKind::CarpetVertical { .. } => KSpec::Carpet,
                _ => KSpec::KoranyiUnitBall,
            }),
        })
    }

    fn validate(&self) -> Result<()> {
        FoliationChart::new(self.chart.clone())?;
        if let Some(s) = self.s {
            if !(s >= 0.0) {
                return Err(invalid(format!("s must be nonnegative, got {s}")));
            }
        }
        if !(self.window >= 1.0) {
            return Err(invalid("regularity window must be >= 1"));
        }
        if self.max_centers == 0 || self.samples == 0 {
            return Err(invalid("max_centers and samples must be positive"));
        }
        Ok(())
    }
}

fn regularity(rp: &RegularityParams) -> Result<Body> {
    let chart = FoliationChart::new(rp.chart.clone())?;
    let s = rp.s.unwrap_or_else(|| chart.regularity_exponent());
    let table = ds_regularity_table(&chart, &rp.k_sample()?, s, &rp.radii, &rp.options())?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    let results = vec![
        MetricResult::new(
            "regularity_window",
            table.window(),
            Comparison::AtMost,
            rp.window,
            0.0,
            Provenance::Derived,
        )
        .with_note(format!("max/min of N(r) r^{s} for {}", chart.label())),
        MetricResult::new(
            "regularity_constant",
            table.max_normalized(),
            Comparison::AtLeast,
            0.0,
            0.0,
            Provenance::Derived,
        )
        .with_note("recorded constant C = max N(r) r^s"),
    ];
    let mut csv = BTreeMap::new();
    csv.insert("regularity.csv".into(), String::from_utf8(buf).map_err(|e| invalid(e.to_string()))?);
    let mut notes = table.notes.clone();
    notes.extend(koranyi_note(&rp.chart));
    Ok(Body {
        results,
        notes,
        tables: to_value(&table)?,
        csv,
    })
}

// ---------------------------------------------------------------- grushin

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrushinParams {
    pub pairs: usize,
    /// Coset parameters `(0, y, τ)` are drawn with `|y| ≤ y_max`, `|τ| ≤ tau_max`.
    pub y_max: f64,
    pub tau_max: f64,
    /// Anchors of the second minimization are drawn with `|x*| ≤ anchor_max`.
    pub anchor_max: f64,
    pub c1_max: f64,
}

impl Default for GrushinParams {
    fn default() -> Self {
        GrushinParams {
            pairs: 1000,
            y_max: 1.0,
            tau_max: 1.0,
            anchor_max: 2.0,
            c1_max: GRUSHIN_C1_MAX,
        }
    }
}

impl GrushinParams {
    fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(invalid("pairs must be positive"));
        }
        for (name, v) in [("y_max", self.y_max), ("tau_max", self.tau_max), ("anchor_max", self.anchor_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c1_max >= 1.0) {
            return Err(invalid("c1_max must be >= 1"));
        }
        Ok(())
    }
}

fn grushin(config: &ExperimentConfig, gp: &GrushinParams) -> Result<Body> {
    struct Row {
        a1: (f64, f64),
        a2: (f64, f64),
        anchor: f64,
        plain: crate::foliation::QuotientDistance,
        anchored: f64,
    }
    let rows: Vec<Row> = (0..gp.pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(config.seed, i);
            let mut u = |m: f64| g.random_range(-m..=m);
            let a1 = (u(gp.y_max), u(gp.tau_max));
            let a2 = (u(gp.y_max), u(gp.tau_max));
            let anchor = u(gp.anchor_max);
            let p1 = Point::h1(0.0, a1.0, a1.1);
            let p2 = Point::h1(0.0, a2.0, a2.1);
            let plain = coset_quotient_distance(&p1, &p2)?;
            let anchored = coset_quotient_distance_anchored(&p1, &p2, anchor)?.value;
            Ok(Row {
                a1,
                a2,
                anchor,
                plain,
                anchored,
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Csv::new(&[
        "pair", "y1", "tau1", "y2", "tau2", "distance", "argmin_x", "core", "ratio", "anchor", "anchored_distance",
    ])?;
    let (mut lo, mut hi, mut anchor_gap) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut coarse = 0;
    for (i, r) in rows.iter().enumerate() {
        out.row([
            i.to_string(),
            f(r.a1.0),
            f(r.a1.1),
            f(r.a2.0),
            f(r.a2.1),
            f(r.plain.value),
            f(r.plain.argmin_x),
            f(r.plain.bracket.core),
            f(r.plain.ratio),
            f(r.anchor),
            f(r.anchored),
        ])?;
        lo = lo.min(r.plain.ratio);
        hi = hi.max(r.plain.ratio);
        anchor_gap = anchor_gap.max((r.plain.value - r.anchored).abs());
        coarse += r.plain.coarse as usize;
    }
    let c1 = hi.max(1.0 / lo);
    let mut notes = vec![KORANYI_SLACK.to_string()];
    if coarse > 0 {
        notes.push(format!("{coarse} minimizations fell back to a grid search"));
    }
    let results = vec![
        MetricResult::new("comparability_constant", c1, Comparison::AtMost, gp.c1_max, 0.0, Provenance::Derived)
            .with_note(format!("ratio range [{lo}, {hi}]")),
        MetricResult::new(
            "anchor_invariance",
            anchor_gap,
            Comparison::AtMost,
            0.0,
            QUOTIENT_ANCHOR_TOL,
            Provenance::Analytic,
        ),
    ];
    let mut csv = BTreeMap::new();
    csv.insert("grushin_pairs.csv".into(), out.finish()?);
    Ok(Body {
        results,
        tables: serde_json::json!({ "ratio_min": lo, "ratio_max": hi, "c1": c1 }),
        notes,
        csv,
    })
}

// ---------------------------------------------------------------- carpet

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarpetRegularityParams {
    pub carpet: CarpetSpec,
    /// Depth of the exhaustive measure sample.
    pub depth: usize,
    /// Number of sampled ball centers.
    pub centers: usize,
    pub r_max: f64,
    pub r_min: f64,
    pub radii: usize,
    pub c_max: f64,
}

impl Default for CarpetRegularityParams {
    fn default() -> Self {
        CarpetRegularityParams {
            carpet: CarpetSpec::odd_linear(6),
            depth: 4,
            centers: 64,
            r_max: 0.5,
            r_min: 0.005,
            radii: 9,
            c_max: CARPET_AHLFORS_C,
        }
    }
}

impl CarpetRegularityParams {
    fn validate(&self) -> Result<()> {
        self.carpet.validate()?;
        if self.depth == 0 || self.depth > self.carpet.max_depth {
            return Err(invalid(format!("depth must be in 1..={}", self.carpet.max_depth)));
        }
        geometric_grid(self.r_max, self.r_min, self.radii)?;
        if self.centers == 0 {
            return Err(invalid("centers must be positive"));
        }
        Ok(())
    }
}

fn carpet(config: &ExperimentConfig, cp: &CarpetRegularityParams) -> Result<Body> {
    let full = carpet_sample(&cp.carpet, cp.depth, None, config.seed)?;
    let centers = carpet_sample(&cp.carpet, cp.depth, Some(cp.centers), config.seed)?;
    let radii = geometric_grid(cp.r_max, cp.r_min, cp.radii)?;
    let mut out = Csv::new(&["center", "x", "y", "r", "mass", "ratio"])?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &r in &radii {
        let masses = full.measure.ball_masses(centers.points(), r)?;
        for (i, (c, m)) in centers.points().iter().zip(masses).enumerate() {
            let ratio = m / (r * r);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            out.row([i.to_string(), f(c.coords()[0]), f(c.coords()[1]), f(r), f(m), f(ratio)])?;
        }
    }
    let mut sums = Csv::new(&["k", "a_k", "partial_sum"])?;
    let partial = cp.carpet.partial_sums(cp.carpet.max_depth);
    for (k, v) in partial.iter().enumerate() {
        sums.row([(k + 1).to_string(), cp.carpet.a(k + 1).to_string(), f(*v)])?;
    }
    let c = hi.max(1.0 / lo);
    let mut notes = Vec::new();
    let cell = cp.carpet.cell_side(cp.depth);
    if cp.r_min < 4.0 * cell {
        notes.push(format!("r_min = {} is within four cells ({cell}) of the sample depth", cp.r_min));
    }
    let results = vec![
        MetricResult::new("ahlfors_constant", c, Comparison::AtMost, cp.c_max, 0.0, Provenance::Derived)
            .with_note(format!("mass/r^2 range [{lo}, {hi}]")),
        MetricResult::new(
            "total_mass",
            full.measure.total_mass(),
            Comparison::Within,
            1.0,
            ALGEBRA_TOL,
            Provenance::Analytic,
        ),
    ];
    let mut csv = BTreeMap::new();
    csv.insert("carpet_ratios.csv".into(), out.finish()?);
    csv.insert("carpet_partial_sums.csv".into(), sums.finish()?);
    Ok(Body {
        results,
        tables: serde_json::json!({ "ratio_min": lo, "ratio_max": hi, "c": c, "cells": full.points().len() }),
        notes,
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_configs_round_trip_and_validate() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::default_for(e);
            assert_eq!(c.experiment(), e);
            c.validate().unwrap();
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(ExperimentConfig::from_json(&json).unwrap(), c, "{json}");
        }
    }

    #[test]
    fn config_json_shape() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment":"regularity","seed":3,"params":{"chart":"heis_right","K":"koranyi_unit_ball","samples":1000}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.replicates, 1);
        match &c.params {
            ExperimentParams::Regularity(r) => {
                assert_eq!(r.chart, ChartKind::HeisRight);
                assert_eq!(r.k, Some(KConfig::Named(KSpec::KoranyiUnitBall)));
                assert_eq!(r.samples, 1000);
                assert_eq!(r.radii.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_alpha_names_the_interval() {
        let mut sp = SurveyParams {
            alphas: vec![3.5],
            ..Default::default()
        };
        let c = |sp: &SurveyParams| ExperimentConfig {
            seed: 0,
            replicates: 1,
            output_dir: None,
            params: ExperimentParams::FoliationSurvey(sp.clone()),
        };
        let err = c(&sp).validate().unwrap_err().to_string();
        assert!(err.contains("(2, 3.3333333333333335]"), "{err}");
        sp.chart = ChartKind::CarpetVertical {
            carpet: CarpetSpec::odd_linear(4),
            depth: 3,
        };
        sp.p = 3.0;
        sp.alphas = vec![1.6];
        let err = c(&sp).validate().unwrap_err().to_string();
        assert!(err.contains("(1, 1.5]"), "{err}");
        sp.chart = ChartKind::HeisLeft;
        sp.p = 5.0;
        sp.alphas = vec![3.0];
        let err = c(&sp).validate().unwrap_err().to_string();
        assert!(err.contains("(3, 3.75]"), "{err}");
    }

    #[test]
    fn infeasible_target_dimension_is_rejected() {
        let mut c = ExperimentConfig::default_for(Experiment::Sharpness);
        if let ExperimentParams::Sharpness(p) = &mut c.params {
            p.target_dim = 1;
        }
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("N = 1"), "{err}");
    }

    #[test]
    fn uncertified_exponent_is_rejected() {
        let mut c = ExperimentConfig::default_for(Experiment::UniversalBound);
        if let ExperimentParams::UniversalBound(u) = &mut c.params {
            u.cases[1].p = 4.0;
        }
        assert!(c.validate().is_err());
    }

    #[test]
    fn survey_rejects_space_mismatch() {
        let sp = SurveyParams {
            map: MapSpec::RadialHolder { beta: 0.5 },
            ..Default::default()
        };
        assert!(sp.validate().is_err());
    }

    #[test]
    fn sharp_threshold_at_s_equal_q() {
        for p in [2.5, 4.0, 10.0] {
            let sp = SharpnessParams {
                q: 2.0,
                s: 2.0,
                p,
                ..Default::default()
            };
            assert_eq!(sp.alpha(), 2.0);
        }
    }

    #[test]
    fn zero_measure_gives_degenerate_report() {
        let mut c = ExperimentConfig::default_for(Experiment::Sharpness);
        c.replicates = 1;
        if let ExperimentParams::Sharpness(p) = &mut c.params {
            p.set = SetSpec::CantorDust { depth: 3 };
            p.n_max = 3;
            p.zero_measure = true;
        }
        let out = run(&c).unwrap();
        let r = out.report.result("image_dimension_median_lower").unwrap();
        assert_eq!(r.value, 0.0);
        assert!(!r.pass);
        assert!(out.report.notes.iter().any(|n| n.contains("degenerate measure")));
    }

    #[test]
    fn small_runs_are_deterministic() {
        let mut c = ExperimentConfig::default_for(Experiment::GrushinCompare);
        if let ExperimentParams::GrushinCompare(g) = &mut c.params {
            g.pairs = 50;
        }
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a.report.passed(), "{:?}", a.report.results);
        let mut left = a.report.clone();
        left.wall_clock_seconds = 0.0;
        let mut right = b.report.clone();
        right.wall_clock_seconds = 0.0;
        assert_eq!(left.to_json().unwrap(), right.to_json().unwrap());
    }

    #[test]
    fn survey_on_carpet_with_lipschitz_map_has_empty_exceptional_sets() {
        let sp = SurveyParams {
            chart: ChartKind::CarpetVertical {
                carpet: CarpetSpec::odd_linear(4),
                depth: 3,
            },
            map: MapSpec::SmoothWarp { amplitude: 0.1 },
            p: 3.0,
            alphas: vec![1.2, 1.5],
            param_points: 9,
            param_range: (0.0, 1.0),
            leaf_points: 300,
            leaf_range: (0.0, 1.0),
            box_scales: 6,
        };
        let c = ExperimentConfig {
            seed: 0,
            replicates: 1,
            output_dir: None,
            params: ExperimentParams::FoliationSurvey(sp),
        };
        let out = run(&c).unwrap();
        assert!(out.report.passed(), "{:?}", out.report.results);
        for r in &out.report.results {
            if r.name.starts_with("exceptional") {
                assert_eq!(r.note.as_deref(), Some("empty exceptional set"));
            }
        }
    }

    #[test]
    fn csv_writer_uses_debug_floats() {
        let mut c = Csv::new(&["a"]).unwrap();
        c.row([f(4.0)]).unwrap();
        assert_eq!(c.finish().unwrap(), "a\n4.0\n");
    }
}
