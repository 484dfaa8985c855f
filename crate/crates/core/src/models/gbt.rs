//! Gradient boosted regression trees with exact greedy second-order splits.

use serde::{Deserialize, Serialize};

use super::window::{Regressor, Windowed};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::series::FeatureFrame;

/// Minimum hessian mass in each child.
const MIN_CHILD_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub reg_lambda: f64,
    pub early_stopping_rounds: usize,
    pub seed: u64,
    /// Lag window used when training from a frame.
    pub window: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_depth: 8,
            n_estimators: 1000,
            subsample: 0.8,
            colsample_bytree: 0.8,
            reg_lambda: 1.0,
            early_stopping_rounds: 50,
            seed: 27,
            window: 8,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", "must lie in (0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth", "must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample", "must lie in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad("colsample_bytree", "must lie in (0, 1]");
        }
        if !(self.reg_lambda >= 0.0) {
            return bad("reg_lambda", "must be non-negative");
        }
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        /// Gradient and hessian sums of each child, kept for auditing gains.
        grad: [f64; 2],
        hess: [f64; 2],
        left: usize,
        right: usize,
    },
}

/// Nodes in preorder; index 0 is the root. Rows with `x < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub params: GbtParams,
    /// Number of leading trees used for prediction.
    pub best_iteration: usize,
    pub feature_count: usize,
    pub warnings: Vec<String>,
}

/// Best split of one node, found by scanning every sorted feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 2],
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Exact greedy search over midpoints between consecutive distinct values.
pub fn best_split(
    features: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    columns: &[usize],
    lambda: f64,
) -> Option<SplitCandidate> {
    let g_total: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h_total: f64 = rows.iter().map(|&r| hess[r]).sum();
    let parent = score(g_total, h_total, lambda);
    let mut best: Option<SplitCandidate> = None;
    let mut order = rows.to_vec();
    for &f in columns {
        order.sort_by(|&a, &b| features[a][f].total_cmp(&features[b][f]));
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            gl += grad[order[k]];
            hl += hess[order[k]];
            let (lo, hi) = (features[order[k]][f], features[order[k + 1]][f]);
            if lo == hi {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl < MIN_CHILD_WEIGHT || hr < MIN_CHILD_WEIGHT {
                continue;
            }
            let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - parent);
            if gain > best.map_or(0.0, |b| b.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                    grad: [gl, gr],
                    hess: [hl, hr],
                });
            }
        }
    }
    best
}

struct Grower<'a> {
    features: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    columns: &'a [usize],
    params: &'a GbtParams,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let denom = h + self.params.reg_lambda;
        let weight = if denom > 0.0 { -g / denom * self.params.learning_rate } else { 0.0 };
        Node::Leaf { weight }
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { weight: 0.0 });
        let split = (depth < self.params.max_depth)
            .then(|| best_split(self.features, self.grad, self.hess, rows, self.columns, self.params.reg_lambda))
            .flatten();
        let Some(s) = split else {
            self.nodes[at] = self.leaf(rows);
            return at;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.features[r][s.feature] < s.threshold);
        let left = self.grow(&l_rows, depth + 1);
        let right = self.grow(&r_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            gain: s.gain,
            grad: s.grad,
            hess: s.hess,
            left,
            right,
        };
        at
    }
}

fn check_rows(features: &[Vec<f64>], targets: &[f64], width: usize) -> Result<()> {
    if features.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: targets.len(),
        });
    }
    if let Some(r) = features.iter().find(|r| r.len() != width) {
        return Err(Error::DimensionMismatch {
            expected: width,
            got: r.len(),
        });
    }
    if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::MissingValues("feature".into()));
    }
    Ok(())
}

impl GbtEnsemble {
    /// Boosts up to `n_estimators` trees. With a validation set, training
    /// stops once validation MSE has not improved for
    /// `early_stopping_rounds` rounds and `best_iteration` marks the best
    /// round.
    pub fn fit(
        features: &[Vec<f64>],
        targets: &[f64],
        params: &GbtParams,
        validation: Option<(&[Vec<f64>], &[f64])>,
    ) -> Result<Self> {
        params.validate()?;
        if features.is_empty() {
            return Err(Error::EmptyData);
        }
        if features.len() < 10 {
            return Err(Error::TooShort {
                needed: 10,
                got: features.len(),
            });
        }
        let width = features[0].len();
        check_rows(features, targets, width)?;
        if let Some((vx, vy)) = validation {
            check_rows(vx, vy, width)?;
        }

        let n = features.len();
        let base_score = targets.iter().sum::<f64>() / n as f64;
        let mut warnings = Vec::new();
        let all_constant = (0..width).all(|f| features.iter().all(|r| r[f] == features[0][f]));
        if all_constant {
            warnings.push("all features constant; model reduces to the base score".to_string());
        }

        let mut pred = vec![base_score; n];
        let mut val_pred = validation.map(|(vx, _)| vec![base_score; vx.len()]);
        let hess = vec![1.0; n];
        let mut trees = Vec::new();
        let mut best = (f64::INFINITY, 0usize);
        let row_count = ((params.subsample * n as f64).floor() as usize).clamp(1, n);
        let col_count = ((params.colsample_bytree * width as f64).floor() as usize).clamp(1, width.max(1));

        for round in 0..params.n_estimators {
            let grad: Vec<f64> = pred.iter().zip(targets).map(|(p, y)| p - y).collect();
            let mut rng = CounterRng::with_stream(params.seed, round as u64);
            let rows = if row_count < n {
                rng.sample_indices(n, row_count)
            } else {
                (0..n).collect()
            };
            let columns = if col_count < width {
                rng.sample_indices(width, col_count)
            } else {
                (0..width).collect()
            };
            let mut grower = Grower {
                features,
                grad: &grad,
                hess: &hess,
                columns: &columns,
                params,
                nodes: Vec::new(),
            };
            grower.grow(&rows, 0);
            let tree = Tree { nodes: grower.nodes };
            for (p, row) in pred.iter_mut().zip(features) {
                *p += tree.predict(row);
            }
            trees.push(tree);

            if let (Some((vx, vy)), Some(vp)) = (validation, val_pred.as_mut()) {
                let last = trees.last().expect("just pushed");
                for (p, row) in vp.iter_mut().zip(vx) {
                    *p += last.predict(row);
                }
                let mse = vp.iter().zip(vy).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / vy.len().max(1) as f64;
                if mse < best.0 {
                    best = (mse, round + 1);
                } else if round + 1 - best.1 >= params.early_stopping_rounds {
                    break;
                }
            }
        }
        let best_iteration = if validation.is_some() { best.1 } else { trees.len() };
        Ok(Self {
            trees,
            base_score,
            params: *params,
            best_iteration,
            feature_count: width,
            warnings,
        })
    }

    /// Predictions after each of the first `rounds` trees, starting with the
    /// base score.
    pub fn staged_predict(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = self.base_score;
        let mut out = vec![acc];
        for tree in &self.trees {
            acc += tree.predict(row);
            out.push(acc);
        }
        out
    }
}

impl Regressor for GbtEnsemble {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_count {
            return Err(Error::DimensionMismatch {
                expected: self.feature_count,
                got: row.len(),
            });
        }
        Ok(self.base_score
            + self.trees[..self.best_iteration]
                .iter()
                .map(|t| t.predict(row))
                .sum::<f64>())
    }
}

pub type GbtModel = Windowed<GbtEnsemble>;

/// Trains on a frame, holding out the final tenth of the supervised rows
/// for early stopping.
pub fn train(frame: &FeatureFrame, params: &GbtParams, multivariate: bool) -> Result<GbtModel> {
    params.validate()?;
    Windowed::train(frame, params.window, multivariate, |x, y| {
        let n_val = x.len() / 10;
        if n_val == 0 || params.early_stopping_rounds == 0 {
            return GbtEnsemble::fit(x, y, params, None);
        }
        let cut = x.len() - n_val;
        GbtEnsemble::fit(&x[..cut], &y[..cut], params, Some((&x[cut..], &y[cut..])))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Series;
    use chrono::NaiveDate;

    fn no_sampling() -> GbtParams {
        GbtParams {
            subsample: 1.0,
            colsample_bytree: 1.0,
            ..GbtParams::default()
        }
    }

    fn data(seed: u64, n: usize, width: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = CounterRng::new(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..width).map(|_| rng.next_f64()).collect()).collect();
        let y = x
            .iter()
            .map(|r| (3.0 * r[0]).sin() + r[width - 1] * r[0] + 0.1 * rng.next_f64())
            .collect();
        (x, y)
    }

    #[test]
    fn constant_target_is_reproduced() {
        let (x, _) = data(1, 20, 2);
        let y = vec![2.5; 20];
        let params = GbtParams {
            learning_rate: 1.0,
            reg_lambda: 0.0,
            n_estimators: 1,
            ..no_sampling()
        };
        let m = GbtEnsemble::fit(&x, &y, &params, None).unwrap();
        for r in &x {
            assert_eq!(m.predict(r).unwrap(), 2.5);
        }
    }

    /// Brute-force scan of every midpoint of a single feature.
    fn exhaustive(x: &[f64], y: &[f64], lambda: f64) -> (f64, f64) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let g: Vec<f64> = y.iter().map(|v| mean - v).collect();
        let mut sorted: Vec<f64> = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let total: f64 = g.iter().sum();
        let n = y.len() as f64;
        let mut best = (f64::NAN, 0.0);
        for w in sorted.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for (xi, gi) in x.iter().zip(&g) {
                if *xi < t {
                    gl += gi;
                    hl += 1.0;
                }
            }
            let (gr, hr) = (total - gl, n - hl);
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - total * total / (n + lambda));
            if gain > best.1 {
                best = (t, gain);
            }
        }
        best
    }

    #[test]
    fn first_split_matches_exhaustive_scan() {
        for seed in 0..20 {
            let mut rng = CounterRng::new(500 + seed);
            let x: Vec<f64> = (0..40).map(|_| rng.next_f64()).collect();
            let y: Vec<f64> = x.iter().map(|v| if *v > 0.5 { 1.0 } else { 0.0 }).collect();
            let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
            let params = GbtParams {
                max_depth: 1,
                n_estimators: 1,
                ..no_sampling()
            };
            let m = GbtEnsemble::fit(&rows, &y, &params, None).unwrap();
            let Node::Split { threshold, gain, .. } = m.trees[0].nodes[0] else {
                panic!("root should split");
            };
            let (t_ref, g_ref) = exhaustive(&x, &y, params.reg_lambda);
            assert_eq!(threshold, t_ref, "seed {seed}");
            assert!((gain - g_ref).abs() < 1e-12);
            let lo = x.iter().filter(|v| **v <= 0.5).fold(f64::MIN, |a, b| a.max(*b));
            let hi = x.iter().filter(|v| **v > 0.5).fold(f64::MAX, |a, b| a.min(*b));
            assert!(threshold > lo && threshold < hi);
        }
    }

    #[test]
    fn training_loss_never_increases_without_sampling() {
        let (x, y) = data(7, 120, 4);
        let params = GbtParams {
            n_estimators: 60,
            ..no_sampling()
        };
        let m = GbtEnsemble::fit(&x, &y, &params, None).unwrap();
        let staged: Vec<Vec<f64>> = x.iter().map(|r| m.staged_predict(r)).collect();
        let mut prev = f64::INFINITY;
        for round in 0..=m.trees.len() {
            let mse = staged.iter().zip(&y).map(|(s, t)| (s[round] - t).powi(2)).sum::<f64>();
            assert!(mse <= prev + 1e-12, "round {round}");
            prev = mse;
        }
    }

    #[test]
    fn stored_gains_are_positive_and_consistent() {
        let (x, y) = data(3, 80, 3);
        let m = GbtEnsemble::fit(&x, &y, &GbtParams { n_estimators: 20, ..GbtParams::default() }, None).unwrap();
        let lambda = m.params.reg_lambda;
        for tree in &m.trees {
            assert!(tree.depth() <= m.params.max_depth);
            for node in &tree.nodes {
                if let Node::Split { gain, grad, hess, .. } = node {
                    let (g, h) = (grad[0] + grad[1], hess[0] + hess[1]);
                    let recomputed = 0.5
                        * (grad[0] * grad[0] / (hess[0] + lambda) + grad[1] * grad[1] / (hess[1] + lambda)
                            - g * g / (h + lambda));
                    assert!(*gain > 0.0);
                    assert!((gain - recomputed).abs() < 1e-9 * recomputed.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn seeded_fits_are_identical() {
        let (x, y) = data(11, 100, 5);
        let p = GbtParams {
            n_estimators: 30,
            ..GbtParams::default()
        };
        assert_eq!(
            GbtEnsemble::fit(&x, &y, &p, None).unwrap(),
            GbtEnsemble::fit(&x, &y, &p, None).unwrap()
        );
    }

    #[test]
    fn early_stopping_bounds_best_iteration() {
        let (x, y) = data(13, 150, 3);
        let (vx, vy) = data(14, 40, 3);
        let p = GbtParams {
            early_stopping_rounds: 10,
            ..GbtParams::default()
        };
        let m = GbtEnsemble::fit(&x, &y, &p, Some((&vx, &vy))).unwrap();
        assert!(m.best_iteration <= m.trees.len());
        assert!(m.trees.len() <= m.best_iteration + p.early_stopping_rounds);
        assert!(m.trees.len() < p.n_estimators);
    }

    #[test]
    fn empty_and_single_leaf_models() {
        let (x, y) = data(2, 20, 2);
        let mut m = GbtEnsemble::fit(&x, &y, &GbtParams { n_estimators: 0, ..no_sampling() }, None).unwrap();
        assert_eq!(m.predict(&x[0]).unwrap(), m.base_score);
        m.trees = vec![Tree {
            nodes: vec![Node::Leaf { weight: 0.25 }],
        }];
        m.best_iteration = 1;
        assert_eq!(m.predict(&[9.0, 9.0]).unwrap(), m.base_score + 0.25);
        assert!(matches!(m.predict(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(GbtEnsemble::fit(&[], &[], &no_sampling(), None), Err(Error::EmptyData)));
    }

    #[test]
    fn constant_features_warn_instead_of_failing() {
        let x = vec![vec![1.0, 2.0]; 15];
        let y: Vec<f64> = (0..15).map(f64::from).collect();
        let m = GbtEnsemble::fit(&x, &y, &GbtParams { n_estimators: 5, ..no_sampling() }, None).unwrap();
        assert_eq!(m.warnings.len(), 1);
        assert_eq!(m.predict(&x[0]).unwrap(), 7.0);
    }

    #[test]
    fn forecast_contract() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        let prices: Vec<f64> = (0..100).map(|i| 5.0 + (i as f64 * 0.3).sin()).collect();
        let frame = FeatureFrame::univariate(Series::weekly(start, &prices).unwrap());
        let params = GbtParams {
            n_estimators: 50,
            ..GbtParams::default()
        };
        let m = train(&frame, &params, false).unwrap();
        let f = m.forecast(&frame, 4).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0], m.predict_row(&prices[92..]).unwrap());

        let flat = FeatureFrame::univariate(Series::weekly(start, &[3.0; 40]).unwrap());
        let m = train(&flat, &params, false).unwrap();
        assert!(m.forecast(&flat, 3).unwrap().iter().all(|v| *v == 3.0));
    }
}
