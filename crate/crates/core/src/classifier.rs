//! Linear max-margin classifier over z-scored path-count features.
//!
//! Training minimizes `½‖w‖² + C Σ loss(y_i (w·x_i + b))` with the bias
//! learned as the weight of a constant feature. Hinge loss uses dual
//! coordinate descent; logistic loss uses stochastic subgradient descent. Both
//! visit samples in seeded random order and stop when an epoch changes the
//! objective by less than the relative tolerance.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stage};

const FORMAT_HEADER: &str = "crmp-linear-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Hinge,
    Logistic,
}

impl FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(Loss::Hinge),
            "logistic" => Ok(Loss::Logistic),
            _ => Err(Error::InvalidArgument(format!("unknown loss `{s}` (hinge|logistic)"))),
        }
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Hinge => "hinge",
            Loss::Logistic => "logistic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Stochastic subgradient descent with iterate averaging.
    #[default]
    Subgradient,
    /// Exact dual coordinate descent (hinge loss only).
    DualCoordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub solver: Solver,
    /// Inverse regularization strength.
    pub c: f64,
    pub loss: Loss,
    pub epochs: usize,
    /// Stop once consecutive epochs change the objective by less than this
    /// fraction.
    pub tolerance: f64,
    pub seed: u64,
    /// Distinguishes training runs under one seed (e.g. one per fold).
    pub run: u64,
    /// Log-compress features before z-scoring.
    pub log_counts: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            solver: Solver::Subgradient,
            c: 1.0,
            loss: Loss::Hinge,
            epochs: 200,
            tolerance: 1e-4,
            seed: 0,
            run: 0,
            log_counts: false,
        }
    }
}

/// Per-column z-score parameters. A column with zero spread has `std == 0`
/// and maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    /// Apply `sign(v)·ln(1 + |v|)` before standardizing.
    pub log: bool,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn signed_log(v: f64) -> f64 {
    v.signum() * v.abs().ln_1p()
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>], log: bool) -> Result<Scaler> {
        let owned: Vec<Vec<f64>>;
        let rows = if log {
            owned = rows.iter().map(|r| r.iter().copied().map(signed_log).collect()).collect();
            &owned[..]
        } else {
            rows
        };
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            check_dim(d, r.len())?;
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Scaler { log, mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), row.len())?;
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (m, s))| {
                let v = if self.log { signed_log(v) } else { v };
                if *s > 0.0 {
                    (v - m) / s
                } else {
                    0.0
                }
            })
            .collect())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scaler: Scaler,
    pub loss: Loss,
    /// Column names, when known; carried through serialization.
    pub columns: Vec<String>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn loss_value(loss: Loss, margin: f64) -> f64 {
    match loss {
        Loss::Hinge => (1.0 - margin).max(0.0),
        Loss::Logistic => {
            // log(1 + e^{-m}) without overflow
            if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            }
        }
    }
}

// -d loss / d margin
fn loss_slope(loss: Loss, margin: f64) -> f64 {
    match loss {
        Loss::Hinge => {
            if margin < 1.0 {
                1.0
            } else {
                0.0
            }
        }
        Loss::Logistic => 1.0 / (1.0 + margin.exp()),
    }
}

// ½‖w‖² + C Σ loss(y_i w·x_i)
fn primal(xs: &[Vec<f64>], ys: &[f64], w: &[f64], c: f64, loss: Loss) -> f64 {
    let data: f64 = xs.iter().zip(ys).map(|(x, y)| loss_value(loss, y * dot(w, x))).sum();
    0.5 * dot(w, w) + c * data
}

fn converged(prev: f64, obj: f64, tol: f64) -> bool {
    (prev - obj).abs() <= tol * obj.abs().max(f64::MIN_POSITIVE)
}

/// Hinge loss: coordinate descent on the dual box `0 ≤ α_i ≤ C`, visiting
/// samples in a fresh seeded permutation each epoch.
fn dual_coordinate_descent(xs: &[Vec<f64>], ys: &[f64], opts: &TrainOptions, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = xs.len();
    let c = opts.c;
    let q: Vec<f64> = xs.iter().map(|x| dot(x, x)).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; xs[0].len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut prev = f64::INFINITY;
    for _ in 0..opts.epochs.max(1) {
        order.shuffle(rng);
        for &i in &order {
            let g = ys[i] * dot(&w, &xs[i]) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / q[i]).clamp(0.0, c);
            let step = (alpha[i] - old) * ys[i];
            for (v, x) in w.iter_mut().zip(&xs[i]) {
                *v += step * x;
            }
        }
        let obj = primal(xs, ys, &w, c, Loss::Hinge);
        if converged(prev, obj, opts.tolerance) {
            break;
        }
        prev = obj;
    }
    w
}

/// Any loss: stochastic subgradient descent on `λ/2‖w‖² + mean loss` with
/// `λ = 1/(Cn)`, step `1/(λt)` and projection onto the ball of radius `1/√λ`.
/// Each epoch's averaged iterate is scored and the best one kept.
fn subgradient_descent(xs: &[Vec<f64>], ys: &[f64], opts: &TrainOptions, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = xs.len();
    let d = xs[0].len();
    let lambda = 1.0 / (opts.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    // initial step from the mean squared row norm, decaying as 1/(λt)
    let sq = xs.iter().map(|x| dot(x, x)).sum::<f64>() / n as f64;
    let eta0 = 1.0 / sq.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; d];
    let mut best_w = w.clone();
    let mut best = primal(xs, ys, &w, opts.c, opts.loss);
    let mut prev = f64::INFINITY;
    let mut t = 0u64;
    // running average of all iterates after the first epoch
    let mut avg = vec![0.0; d];
    let mut averaged = 0u64;
    for epoch in 0..opts.epochs.max(1) {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = eta0 / (1.0 + lambda * eta0 * t as f64);
            let margin = ys[i] * dot(&w, &xs[i]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            let g = loss_slope(opts.loss, margin);
            if g != 0.0 {
                let step = eta * g * ys[i];
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += step * x;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let f = radius / norm;
                w.iter_mut().for_each(|v| *v *= f);
            }
            if epoch > 0 || opts.epochs <= 1 {
                averaged += 1;
                let f = 1.0 / averaged as f64;
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += (v - *a) * f;
                }
            }
        }
        if averaged == 0 {
            continue;
        }
        let obj = primal(xs, ys, &avg, opts.c, opts.loss);
        if obj < best {
            best = obj;
            best_w.clone_from(&avg);
        }
        if converged(prev, obj, opts.tolerance) {
            break;
        }
        prev = obj;
    }
    best_w
}

impl LinearModel {
    /// Fit scaler and weights. `columns` may be empty; otherwise it names the
    /// columns for error messages and serialization.
    pub fn train(rows: &[Vec<f64>], labels: &[bool], columns: &[String], opts: &TrainOptions) -> Result<LinearModel> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
            return Err(Error::SingleClass);
        }
        if !(opts.c > 0.0 && opts.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", opts.c)));
        }
        let d = rows[0].len();
        if !columns.is_empty() {
            check_dim(d, columns.len())?;
        }
        let col_name = |c: usize| columns.get(c).cloned().unwrap_or_else(|| format!("column {c}"));
        for r in rows {
            check_dim(d, r.len())?;
            if let Some(c) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(col_name(c)));
            }
        }
        let scaler = Scaler::fit(rows, opts.log_counts)?;
        // augmented rows: scaled features then the constant bias feature
        let mut xs = Vec::with_capacity(rows.len());
        for r in rows {
            let mut x = scaler.transform(r)?;
            if let Some(c) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(col_name(c)));
            }
            x.push(1.0);
            xs.push(x);
        }
        let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let mut rng = stream(opts.seed, Stage::Training, opts.run);
        let mut best_w = match (opts.solver, opts.loss) {
            (Solver::DualCoordinate, Loss::Hinge) => dual_coordinate_descent(&xs, &ys, opts, &mut rng),
            (Solver::DualCoordinate, Loss::Logistic) => {
                return Err(Error::InvalidArgument("the dual coordinate solver supports hinge loss only".into()))
            }
            (Solver::Subgradient, _) => subgradient_descent(&xs, &ys, opts, &mut rng),
        };
        let bias = best_w.pop().unwrap();
        Ok(LinearModel {
            weights: best_w,
            bias,
            scaler,
            loss: opts.loss,
            columns: columns.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `w · scale(x) + b`.
    pub fn score(&self, row: &[f64]) -> Result<f64> {
        let x = self.scaler.transform(row)?;
        Ok(dot(&self.weights, &x) + self.bias)
    }

    pub fn predict(&self, row: &[f64]) -> Result<bool> {
        Ok(self.score(row)? > 0.0)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FORMAT_HEADER}").unwrap();
        writeln!(s, "loss {}", self.loss).unwrap();
        writeln!(s, "dim {}", self.dim()).unwrap();
        writeln!(s, "transform {}", if self.scaler.log { "log1p" } else { "none" }).unwrap();
        writeln!(s, "[weights]").unwrap();
        for w in &self.weights {
            writeln!(s, "{w:?}").unwrap();
        }
        writeln!(s, "[bias]").unwrap();
        writeln!(s, "{:?}", self.bias).unwrap();
        writeln!(s, "[scaler]").unwrap();
        for (m, sd) in self.scaler.mean.iter().zip(&self.scaler.std) {
            writeln!(s, "{m:?}\t{sd:?}").unwrap();
        }
        if !self.columns.is_empty() {
            writeln!(s, "[columns]").unwrap();
            for c in &self.columns {
                writeln!(s, "{c}").unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<LinearModel> {
        let err = |line: usize, msg: String| Error::parse(origin, line, msg);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, h)) if h == FORMAT_HEADER => {}
            _ => return Err(err(1, format!("expected `{FORMAT_HEADER}`"))),
        }
        let mut loss = Loss::Hinge;
        let mut dim = None;
        let mut log = false;
        let mut section = "";
        let (mut weights, mut bias, mut mean, mut std, mut columns) = (vec![], None, vec![], vec![], vec![]);
        let num = |no: usize, s: &str| s.parse::<f64>().map_err(|_| err(no, format!("bad number `{s}`")));
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[weights]" | "[bias]" | "[scaler]" | "[columns]" => line,
                    _ => return Err(err(no, format!("unknown section {line}"))),
                };
                continue;
            }
            match section {
                "" => match line.split_once(' ') {
                    Some(("loss", v)) => loss = v.parse().map_err(|e: Error| err(no, e.to_string()))?,
                    Some(("transform", "log1p")) => log = true,
                    Some(("transform", "none")) => log = false,
                    Some(("dim", v)) => {
                        dim = Some(v.parse::<usize>().map_err(|_| err(no, format!("bad dim `{v}`")))?)
                    }
                    _ => return Err(err(no, format!("unexpected line `{line}`"))),
                },
                "[weights]" => weights.push(num(no, line)?),
                "[bias]" => bias = Some(num(no, line)?),
                "[scaler]" => {
                    let (m, s) = line
                        .split_once('\t')
                        .ok_or_else(|| err(no, "scaler line needs `mean<TAB>std`".into()))?;
                    mean.push(num(no, m)?);
                    std.push(num(no, s)?);
                }
                _ => columns.push(line.to_string()),
            }
        }
        let dim = dim.ok_or_else(|| err(1, "missing `dim`".into()))?;
        let bias = bias.ok_or_else(|| err(1, "missing [bias]".into()))?;
        check_dim(dim, weights.len())?;
        check_dim(dim, mean.len())?;
        if !columns.is_empty() {
            check_dim(dim, columns.len())?;
        }
        Ok(LinearModel {
            weights,
            bias,
            scaler: Scaler { log, mean, std },
            loss,
            columns,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<LinearModel> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}
