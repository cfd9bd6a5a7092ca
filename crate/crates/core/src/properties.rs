//! Built-in property checkers: plausibility of range and robustness against
//! noise (whole-input hypercube and sliding-window variants), plus the batch
//! driver that runs robustness over a labelled test set.

use std::io::Read;

use rayon::prelude::*;

use crate::approximation::ensemble_bounds;
use crate::enumerator::{Enumerator, Mapping, SelectionStrategy, Stats, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{pred32, round_down, round_up, succ32, Interval, Region};
use crate::model::{strict_argmax, Ensemble};

/// Admissible output range `alpha[i] <= y[i] <= beta[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl RangeSpec {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::InvalidRange(format!(
                "{} lower bounds but {} upper bounds",
                alpha.len(),
                beta.len()
            )));
        }
        if let Some(i) = (0..alpha.len()).find(|&i| !(alpha[i] <= beta[i])) {
            return Err(Error::InvalidRange(format!(
                "alpha[{i}] = {} exceeds beta[{i}] = {}",
                alpha[i], beta[i]
            )));
        }
        Ok(RangeSpec { alpha, beta })
    }

    pub fn uniform(m: usize, alpha: f64, beta: f64) -> Result<Self> {
        RangeSpec::new(vec![alpha; m], vec![beta; m])
    }

    /// Probabilities in `[0, 1]`.
    pub fn probabilities(m: usize) -> Self {
        RangeSpec {
            alpha: vec![0.0; m],
            beta: vec![1.0; m],
        }
    }

    fn admits(&self, lower: f32, upper: f32, i: usize) -> bool {
        self.alpha[i] <= f64::from(lower) && f64::from(upper) <= self.beta[i]
    }

    pub fn admits_mapping(&self, m: &Mapping) -> bool {
        m.outputs
            .dims
            .iter()
            .enumerate()
            .all(|(i, iv)| self.admits(iv.lower, iv.upper, i))
    }
}

/// How a range verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Output bound approximation alone; no classes enumerated.
    Approximate,
    /// Full equivalence-class enumeration.
    Exact,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Approximate => "approximate",
            Method::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeCheck {
    pub verdict: Verdict,
    pub method: Method,
    pub stats: Stats,
}

/// Plausibility of range.
///
/// Tries the leaf-extreme bounds first. That shortcut is only taken for
/// componentwise-monotone post-processors; for softmax the checker always
/// enumerates. If the bounds do not fit, every class is checked.
pub fn check_range(
    e: &Ensemble,
    domain: &Region,
    spec: &RangeSpec,
    strategy: SelectionStrategy,
) -> Result<RangeCheck> {
    if spec.alpha.len() != e.n_outputs() {
        return Err(Error::InvalidRange(format!(
            "spec has {} components, model has {} outputs",
            spec.alpha.len(),
            e.n_outputs()
        )));
    }
    let enumerator = Enumerator::new(e, domain.clone())?.strategy(strategy);
    if e.post_process().is_componentwise_monotone() {
        let bounds = ensemble_bounds(e);
        if bounds
            .dims
            .iter()
            .enumerate()
            .all(|(i, iv)| spec.admits(iv.lower, iv.upper, i))
        {
            return Ok(RangeCheck {
                verdict: Verdict::Pass,
                method: Method::Approximate,
                stats: Stats::default(),
            });
        }
    }
    let (verdict, stats) = enumerator.forall(|m| spec.admits_mapping(m))?;
    Ok(RangeCheck {
        verdict,
        method: Method::Exact,
        stats,
    })
}

/// A robustness question about one test point.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessQuery {
    pub test_point: Vec<f32>,
    /// Half-width of the perturbation box in every dimension.
    pub epsilon: f32,
    /// Defaults to the class of the unperturbed point.
    pub expected_class: Option<usize>,
    /// Perturbations are clipped to this region when given.
    pub domain: Option<Region>,
}

impl RobustnessQuery {
    pub fn new(test_point: Vec<f32>, epsilon: f32) -> Self {
        RobustnessQuery {
            test_point,
            epsilon,
            expected_class: None,
            domain: None,
        }
    }

    pub fn expecting(mut self, class: usize) -> Self {
        self.expected_class = Some(class);
        self
    }

    pub fn within(mut self, domain: Region) -> Self {
        self.domain = Some(domain);
        self
    }

    fn validate(&self, e: &Ensemble) -> Result<()> {
        if e.n_outputs() < 2 {
            return Err(Error::InvalidQuery(
                "robustness needs a classifier with at least two outputs".into(),
            ));
        }
        if self.test_point.len() != e.n_inputs() {
            return Err(Error::InputShape {
                expected: e.n_inputs(),
                found: self.test_point.len(),
            });
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidQuery(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if let Some(c) = self.expected_class {
            if c >= e.n_outputs() {
                return Err(Error::InvalidQuery(format!(
                    "class {c} out of range for {} outputs",
                    e.n_outputs()
                )));
            }
        }
        if let Some(d) = &self.domain {
            if d.arity() != e.n_inputs() {
                return Err(Error::InputShape {
                    expected: e.n_inputs(),
                    found: d.arity(),
                });
            }
        }
        Ok(())
    }

    fn resolve_class(&self, e: &Ensemble) -> Result<usize> {
        match self.expected_class {
            Some(c) => Ok(c),
            None => e.classify(&self.test_point),
        }
    }

    /// `[x - eps, x + eps]` in each dimension listed in `perturbed`; the rest
    /// are pinned to the test point. The box holds exactly the `f32` values
    /// whose real distance to the test point is at most `eps`.
    fn perturbation_box(&self, perturbed: impl Fn(usize) -> bool) -> Result<Region> {
        let eps = f64::from(self.epsilon);
        let dims = self
            .test_point
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if perturbed(i) && eps > 0.0 {
                    eps_ball(x, eps)
                } else {
                    Interval::point(x)
                }
            })
            .collect();
        let mut region = Region::new(dims);
        if let Some(d) = &self.domain {
            region = region.intersect(d)?;
        }
        if region.is_empty() {
            return Err(Error::InvalidQuery(
                "test point lies outside the supplied domain".into(),
            ));
        }
        Ok(region)
    }
}

/// `f32` values within real distance `eps` of `c`.
fn eps_ball(c: f32, eps: f64) -> Interval {
    if eps.is_infinite() {
        return Interval::UNBOUNDED;
    }
    let c = f64::from(c);
    Interval::new(sum_up(c, -eps), sum_down(c, eps))
}

/// Error-free transformation: `a + b == s + err` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Smallest `f32` at or above the real sum `a + b`.
fn sum_up(a: f64, b: f64) -> f32 {
    let (s, err) = two_sum(a, b);
    let r = round_up(s);
    if f64::from(r) == s && err > 0.0 {
        succ32(r)
    } else {
        r
    }
}

/// Largest `f32` at or below the real sum `a + b`.
fn sum_down(a: f64, b: f64) -> f32 {
    let (s, err) = two_sum(a, b);
    let r = round_down(s);
    if f64::from(r) == s && err < 0.0 {
        pred32(r)
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCheck {
    pub verdict: Verdict,
    pub expected_class: usize,
    pub stats: Stats,
}

fn robust_in(
    e: &Ensemble,
    region: Region,
    class: usize,
    strategy: SelectionStrategy,
) -> Result<(Verdict, Stats)> {
    Enumerator::new(e, region)?
        .strategy(strategy)
        .forall(|m| strict_argmax(&m.outputs.point()) == Some(class))
}

/// Robustness against noise: every point of the `epsilon` box around the
/// test point gets the expected class as a strict argmax.
pub fn check_robustness(
    e: &Ensemble,
    q: &RobustnessQuery,
    strategy: SelectionStrategy,
) -> Result<RobustnessCheck> {
    q.validate(e)?;
    let class = q.resolve_class(e)?;
    let region = q.perturbation_box(|_| true)?;
    let (verdict, stats) = robust_in(e, region, class, strategy)?;
    Ok(RobustnessCheck {
        verdict,
        expected_class: class,
        stats,
    })
}

/// Noise window over a row-major image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlidingWindow {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageDims {
    pub width: usize,
    pub height: usize,
}

impl SlidingWindow {
    fn validate(&self, image: ImageDims, n_inputs: usize) -> Result<()> {
        if image.width * image.height != n_inputs {
            return Err(Error::Geometry(format!(
                "image {}x{} has {} pixels but the model takes {} inputs",
                image.width,
                image.height,
                image.width * image.height,
                n_inputs
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Geometry("window must be at least 1x1".into()));
        }
        if self.width > image.width || self.height > image.height {
            return Err(Error::Geometry(format!(
                "window {}x{} does not fit image {}x{}",
                self.width, self.height, image.width, image.height
            )));
        }
        if self.stride == 0 {
            return Err(Error::Geometry("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Top-left corners `(column, row)` in row-major scan order.
    pub fn positions(&self, image: ImageDims) -> Vec<(usize, usize)> {
        if self.width > image.width || self.height > image.height || self.stride == 0 {
            return Vec::new();
        }
        let rows = (0..=image.height - self.height).step_by(self.stride);
        rows.flat_map(|r| {
            (0..=image.width - self.width)
                .step_by(self.stride)
                .map(move |c| (c, r))
        })
        .collect()
    }

    fn covers(&self, image: ImageDims, corner: (usize, usize), pixel: usize) -> bool {
        let (c, r) = (pixel % image.width, pixel / image.width);
        c >= corner.0 && c < corner.0 + self.width && r >= corner.1 && r < corner.1 + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowOutcome {
    /// Top-left corner `(column, row)`.
    pub position: (usize, usize),
    pub robust: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    /// Fail carries the counterexample of the first failing window.
    pub verdict: Verdict,
    pub expected_class: usize,
    pub windows: Vec<WindowOutcome>,
    pub first_failure: Option<(usize, usize)>,
    pub stats: Stats,
}

/// Robustness with noise confined to a window slid over the image; pixels
/// outside the window keep the test point's values. Every window position is
/// checked and reported.
pub fn check_robustness_sliding_window(
    e: &Ensemble,
    q: &RobustnessQuery,
    window: SlidingWindow,
    image: ImageDims,
    strategy: SelectionStrategy,
) -> Result<WindowReport> {
    sliding_window(e, q, window, image, strategy, false)
}

fn sliding_window(
    e: &Ensemble,
    q: &RobustnessQuery,
    window: SlidingWindow,
    image: ImageDims,
    strategy: SelectionStrategy,
    stop_at_first_failure: bool,
) -> Result<WindowReport> {
    q.validate(e)?;
    window.validate(image, e.n_inputs())?;
    let class = q.resolve_class(e)?;
    let mut report = WindowReport {
        verdict: Verdict::Pass,
        expected_class: class,
        windows: Vec::new(),
        first_failure: None,
        stats: Stats::default(),
    };
    for corner in window.positions(image) {
        let region = q.perturbation_box(|px| window.covers(image, corner, px))?;
        let (verdict, stats) = robust_in(e, region, class, strategy)?;
        accumulate(&mut report.stats, &stats);
        report.windows.push(WindowOutcome {
            position: corner,
            robust: verdict.is_pass(),
        });
        if let Verdict::Fail { .. } = verdict {
            if report.first_failure.is_none() {
                report.first_failure = Some(corner);
                report.verdict = verdict;
            }
            if stop_at_first_failure {
                break;
            }
        }
    }
    Ok(report)
}

fn accumulate(total: &mut Stats, s: &Stats) {
    total.nodes_visited += s.nodes_visited;
    total.classes += s.classes;
    total.empty_branches += s.empty_branches;
    total.discarded_combinations = total
        .discarded_combinations
        .saturating_add(s.discarded_combinations);
}

/// A labelled test point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f32>,
    pub label: usize,
}

/// Reads a test set: `n_inputs` feature columns then an integer label per
/// row, optional header line. Row numbers in errors are 1-based file lines.
pub fn read_test_set(reader: impl Read, n_inputs: usize) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::TestSetRow {
            row: line,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != n_inputs + 1 {
            if i == 0 && record.iter().any(|f| f.parse::<f32>().is_err()) {
                continue;
            }
            return Err(Error::TestSetRow {
                row: line,
                message: format!("expected {} columns, found {}", n_inputs + 1, record.len()),
            });
        }
        let features: std::result::Result<Vec<f32>, _> =
            record.iter().take(n_inputs).map(str::parse::<f32>).collect();
        let label = record[n_inputs].parse::<usize>();
        match (features, label) {
            (Ok(features), Ok(label)) if features.iter().all(|v| !v.is_nan()) => {
                samples.push(Sample { features, label })
            }
            // a non-numeric first row is a header
            _ if i == 0 => continue,
            (Ok(f), Ok(_)) => {
                let col = f.iter().position(|v| v.is_nan()).unwrap_or(0);
                return Err(Error::TestSetRow {
                    row: line,
                    message: format!("column {} is NaN", col + 1),
                });
            }
            (Err(e), _) => {
                return Err(Error::TestSetRow {
                    row: line,
                    message: format!("bad feature value: {e}"),
                })
            }
            (_, Err(e)) => {
                return Err(Error::TestSetRow {
                    row: line,
                    message: format!("bad label {:?}: {e}", &record[n_inputs]),
                })
            }
        }
    }
    Ok(samples)
}

/// Which robustness check to run per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustnessMode {
    Full,
    Window {
        window: SlidingWindow,
        image: ImageDims,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub epsilon: f32,
    pub mode: RobustnessMode,
    pub strategy: SelectionStrategy,
    pub domain: Option<Region>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl BatchOptions {
    pub fn new(epsilon: f32) -> Self {
        BatchOptions {
            epsilon,
            mode: RobustnessMode::Full,
            strategy: SelectionStrategy::default(),
            domain: None,
            jobs: 1,
        }
    }
}

/// Outcome over a test set. Misclassified samples are never counted robust.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub total: usize,
    /// Correctly classified clean samples.
    pub correct: usize,
    /// Correctly classified and robust.
    pub robust: usize,
    /// Indices of misclassified samples.
    pub misclassified: Vec<usize>,
    /// Indices of correctly classified samples that failed the check.
    pub failures: Vec<usize>,
}

impl BatchSummary {
    /// Percentage of the whole test set that is robustly correct; 0 for an
    /// empty set.
    pub fn robustness_percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.robust as f64 / self.total as f64
        }
    }

    pub fn accuracy_percent(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

enum SampleResult {
    Misclassified,
    Robust,
    NotRobust,
}

/// Robustness over a labelled test set.
pub fn batch_robustness(
    e: &Ensemble,
    test_set: &[Sample],
    opts: &BatchOptions,
) -> Result<BatchSummary> {
    for (i, s) in test_set.iter().enumerate() {
        if s.label >= e.n_outputs() {
            return Err(Error::TestSetRow {
                row: i + 1,
                message: format!("label {} out of range for {} classes", s.label, e.n_outputs()),
            });
        }
        if s.features.len() != e.n_inputs() {
            return Err(Error::TestSetRow {
                row: i + 1,
                message: format!("expected {} features, found {}", e.n_inputs(), s.features.len()),
            });
        }
    }

    let run_one = |s: &Sample| -> Result<SampleResult> {
        if e.classify(&s.features)? != s.label {
            return Ok(SampleResult::Misclassified);
        }
        let mut q = RobustnessQuery::new(s.features.clone(), opts.epsilon).expecting(s.label);
        q.domain = opts.domain.clone();
        let pass = match opts.mode {
            RobustnessMode::Full => check_robustness(e, &q, opts.strategy)?.verdict.is_pass(),
            RobustnessMode::Window { window, image } => {
                sliding_window(e, &q, window, image, opts.strategy, true)?
                    .verdict
                    .is_pass()
            }
        };
        Ok(if pass {
            SampleResult::Robust
        } else {
            SampleResult::NotRobust
        })
    };

    let results: Vec<Result<SampleResult>> = if opts.jobs == 1 {
        test_set.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|err| Error::InvalidQuery(format!("cannot start worker pool: {err}")))?;
        pool.install(|| test_set.par_iter().map(run_one).collect())
    };

    let mut summary = BatchSummary {
        total: test_set.len(),
        ..BatchSummary::default()
    };
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            SampleResult::Misclassified => summary.misclassified.push(i),
            SampleResult::Robust => {
                summary.correct += 1;
                summary.robust += 1;
            }
            SampleResult::NotRobust => {
                summary.correct += 1;
                summary.failures.push(i);
            }
        }
    }
    Ok(summary)
}
