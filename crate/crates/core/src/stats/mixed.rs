//! Gaussian random-intercept linear model
//! `y = Xβ + u_g + ε`, `u_g ~ N(0, τ²)`, `ε ~ N(0, σ²)`.
//!
//! The likelihood is profiled over `λ = τ²/σ²`. With `H_g = I + λ11'` each
//! group's inverse is `I - λ/(1+λn_g) 11'`, so every λ needs only per-group
//! sufficient statistics and one p×p solve.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{normal_two_sided_p, StatsError, ToxicityBin, Z_975};
use crate::strategies::StrategyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimation {
    #[default]
    Ml,
    Reml,
}

/// Raw design for [`fit_lmm`]; `groups[i]` is row i's group index.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub groups: Vec<usize>,
    pub coef_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub coef_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Row-major p×p covariance of β̂.
    pub cov: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub tau2: f64,
    pub lambda: f64,
    pub loglik: f64,
    pub converged: bool,
    pub method: Estimation,
    pub n_obs: usize,
    pub n_groups: usize,
}

impl LmmFit {
    pub fn se(&self, i: usize) -> f64 {
        self.cov[i][i].sqrt()
    }

    /// `(L'β, sqrt(L'ΣL))`.
    pub fn linear(&self, l: &[f64]) -> (f64, f64) {
        let est = l.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        let mut var = 0.0;
        for (i, li) in l.iter().enumerate() {
            for (j, lj) in l.iter().enumerate() {
                var += li * self.cov[i][j] * lj;
            }
        }
        (est, var.max(0.0).sqrt())
    }
}

struct GroupStats {
    n: f64,
    xtx: DMatrix<f64>,
    xt1: DVector<f64>,
    xty: DVector<f64>,
    yty: f64,
    sum_y: f64,
}

struct GlsSolve {
    beta: DVector<f64>,
    a_inv: DMatrix<f64>,
    log_det_a: f64,
    rhr: f64,
}

/// Per-group sufficient statistics shared by every λ evaluation.
pub struct Profile {
    groups: Vec<GroupStats>,
    n: usize,
    p: usize,
    method: Estimation,
}

impl Profile {
    pub fn new(design: &Design, method: Estimation) -> Result<Self, StatsError> {
        let (n, p) = design.x.shape();
        if design.y.len() != n || design.groups.len() != n {
            return Err(StatsError::InvalidInput("row counts disagree".into()));
        }
        if design.coef_names.len() != p {
            return Err(StatsError::InvalidInput("one name per column required".into()));
        }
        let needed = p + usize::from(method == Estimation::Reml) + 1;
        if n < needed {
            return Err(StatsError::TooFew { needed, got: n });
        }
        if design.y.iter().chain(design.x.iter()).any(|v| !v.is_finite()) {
            return Err(StatsError::InvalidInput("non-finite value in design".into()));
        }
        let mut index: HashMap<usize, usize> = HashMap::new();
        let mut groups: Vec<GroupStats> = Vec::new();
        for (row, &g) in design.groups.iter().enumerate() {
            let slot = *index.entry(g).or_insert_with(|| {
                groups.push(GroupStats {
                    n: 0.0,
                    xtx: DMatrix::zeros(p, p),
                    xt1: DVector::zeros(p),
                    xty: DVector::zeros(p),
                    yty: 0.0,
                    sum_y: 0.0,
                });
                groups.len() - 1
            });
            let gs = &mut groups[slot];
            let xr = design.x.row(row).transpose();
            let y = design.y[row];
            gs.n += 1.0;
            gs.xtx += &xr * xr.transpose();
            gs.xt1 += &xr;
            gs.xty += &xr * y;
            gs.yty += y * y;
            gs.sum_y += y;
        }
        if groups.len() < 2 {
            return Err(StatsError::TooFew { needed: 2, got: groups.len() });
        }
        let sv = design.x.clone().svd(false, false).singular_values;
        let max = sv.max();
        if p == 0 || max == 0.0 || sv.min() <= 1e-10 * max {
            return Err(StatsError::RankDeficient);
        }
        Ok(Self { groups, n, p, method })
    }

    fn solve(&self, lambda: f64) -> Option<GlsSolve> {
        let p = self.p;
        let mut a = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        let mut yhy = 0.0;
        for g in &self.groups {
            let c = lambda / (1.0 + lambda * g.n);
            a += &g.xtx - (&g.xt1 * g.xt1.transpose()) * c;
            b += &g.xty - &g.xt1 * (c * g.sum_y);
            yhy += g.yty - c * g.sum_y * g.sum_y;
        }
        let chol = a.cholesky()?;
        let beta = chol.solve(&b);
        let log_det_a = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let rhr = yhy - beta.dot(&b);
        Some(GlsSolve {
            beta,
            a_inv: chol.inverse(),
            log_det_a,
            rhr,
        })
    }

    fn dof(&self) -> f64 {
        match self.method {
            Estimation::Ml => self.n as f64,
            Estimation::Reml => (self.n - self.p) as f64,
        }
    }

    fn log_det_h(&self, lambda: f64) -> f64 {
        self.groups.iter().map(|g| (lambda * g.n).ln_1p()).sum()
    }

    /// Profiled (restricted) log-likelihood at λ.
    pub fn loglik(&self, lambda: f64) -> Option<f64> {
        let s = self.solve(lambda)?;
        self.loglik_from(lambda, &s)
    }

    fn loglik_from(&self, lambda: f64, s: &GlsSolve) -> Option<f64> {
        if s.rhr <= 0.0 {
            return None;
        }
        let dof = self.dof();
        let sigma2 = s.rhr / dof;
        let mut ll = dof * (1.0 + (2.0 * std::f64::consts::PI * sigma2).ln()) + self.log_det_h(lambda);
        if self.method == Estimation::Reml {
            ll += s.log_det_a;
        }
        Some(-0.5 * ll)
    }

    pub fn fit_at(&self, lambda: f64, names: &[String], converged: bool) -> Result<LmmFit, StatsError> {
        let s = self.solve(lambda).ok_or(StatsError::RankDeficient)?;
        let loglik = self
            .loglik_from(lambda, &s)
            .ok_or_else(|| StatsError::InvalidInput("response has no residual variance".into()))?;
        let sigma2 = s.rhr / self.dof();
        let cov = s.a_inv * sigma2;
        let cov = (0..self.p)
            .map(|i| (0..self.p).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect())
            .collect();
        Ok(LmmFit {
            coef_names: names.to_vec(),
            beta: s.beta.iter().copied().collect(),
            cov,
            sigma2,
            tau2: lambda * sigma2,
            lambda,
            loglik,
            converged,
            method: self.method,
            n_obs: self.n,
            n_groups: self.groups.len(),
        })
    }

    /// λ maximising the profile: log-spaced grid then golden section in ln λ.
    pub fn optimize(&self) -> Result<f64, StatsError> {
        let mut grid = vec![0.0];
        grid.extend((-80..=80).map(|k| 10f64.powf(k as f64 / 10.0)));
        let ll = |l: f64| self.loglik(l).unwrap_or(f64::NEG_INFINITY);
        let values: Vec<f64> = grid.iter().map(|&l| ll(l)).collect();
        let (best, best_ll) = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if !best_ll.is_finite() {
            return Err(StatsError::InvalidInput("likelihood undefined at every λ".into()));
        }
        if best == grid.len() - 1 {
            return Err(StatsError::NonConvergence(format!(
                "profile still increasing at λ = {:e}",
                grid[best]
            )));
        }
        if best == 0 {
            return Ok(0.0);
        }
        let mut lo = if best == 1 { grid[1].ln() - 0.1 * std::f64::consts::LN_10 } else { grid[best - 1].ln() };
        let mut hi = grid[best + 1].ln();
        let f = |u: f64| ll(u.exp());
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - r * (hi - lo);
        let mut d = lo + r * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        while hi - lo > 1e-8 {
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - r * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + r * (hi - lo);
                fd = f(d);
            }
        }
        let refined = (0.5 * (lo + hi)).exp();
        Ok(if ll(refined) >= best_ll { refined } else { grid[best] })
    }
}

pub fn fit_lmm(design: &Design, method: Estimation) -> Result<LmmFit, StatsError> {
    let profile = Profile::new(design, method)?;
    let lambda = profile.optimize()?;
    profile.fit_at(lambda, &design.coef_names, true)
}

/// One observation: a receptiveness index compared against the original reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub response: f64,
    pub strategy: StrategyKind,
    pub group: String,
    pub toxicity_bin: Option<ToxicityBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "coding")]
pub enum Coding {
    /// One mean parameter per level, no intercept.
    CellMeans,
    /// Intercept at `reference`, one offset per other level.
    Treatment { reference: StrategyKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// `response ~ strategy`
    Strategy(Coding),
    /// `response ~ strategy × bin`, one mean per cell.
    StrategyByBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    pub strategy: StrategyKind,
    pub bin: Option<ToxicityBin>,
    /// Coefficient weights giving this level's mean.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub spec: ModelSpec,
    pub lmm: LmmFit,
    pub levels: Vec<Level>,
}

pub fn level_name(strategy: StrategyKind, bin: Option<ToxicityBin>) -> String {
    match bin {
        Some(b) => format!("{strategy}:{b}"),
        None => strategy.to_string(),
    }
}

pub const INTERCEPT: &str = "(intercept)";

pub fn fit_random_intercept(
    rows: &[ObservationRow],
    spec: ModelSpec,
    method: Estimation,
) -> Result<ModelFit, StatsError> {
    if rows.iter().any(|r| r.strategy == StrategyKind::Original) {
        return Err(StatsError::InvalidInput("the original reply is not a model level".into()));
    }
    let with_bin = spec == ModelSpec::StrategyByBin;
    if with_bin && rows.iter().any(|r| r.toxicity_bin.is_none()) {
        return Err(StatsError::InvalidInput("interaction model needs a toxicity bin on every row".into()));
    }
    let cells: BTreeSet<(StrategyKind, Option<ToxicityBin>)> = rows
        .iter()
        .map(|r| (r.strategy, if with_bin { r.toxicity_bin } else { None }))
        .collect();
    let strategies: BTreeSet<StrategyKind> = cells.iter().map(|c| c.0).collect();
    if strategies.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: strategies.len() });
    }
    let cells: Vec<_> = cells.into_iter().collect();
    let k = cells.len();
    let reference = match spec {
        ModelSpec::Strategy(Coding::Treatment { reference }) => {
            if !strategies.contains(&reference) {
                return Err(StatsError::UnknownLevel(reference.to_string()));
            }
            Some(reference)
        }
        _ => None,
    };

    // column of each cell's indicator, plus the weights giving its mean
    let mut coef_names = Vec::with_capacity(k);
    let mut column: BTreeMap<(StrategyKind, Option<ToxicityBin>), Option<usize>> = BTreeMap::new();
    if let Some(r) = reference {
        coef_names.push(INTERCEPT.to_string());
        column.insert((r, None), None);
    }
    for c in &cells {
        if reference == Some(c.0) {
            continue;
        }
        column.insert(*c, Some(coef_names.len()));
        coef_names.push(level_name(c.0, c.1));
    }
    let p = coef_names.len();
    let levels: Vec<Level> = cells
        .iter()
        .map(|c| {
            let mut weights = vec![0.0; p];
            if reference.is_some() {
                weights[0] = 1.0;
            }
            if let Some(j) = column[c] {
                weights[j] = 1.0;
            }
            Level {
                name: level_name(c.0, c.1),
                strategy: c.0,
                bin: c.1,
                weights,
            }
        })
        .collect();

    let mut group_ids: HashMap<&str, usize> = HashMap::new();
    let mut x = DMatrix::zeros(rows.len(), p);
    let mut y = DVector::zeros(rows.len());
    let mut groups = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let key = (r.strategy, if with_bin { r.toxicity_bin } else { None });
        let level = &levels[cells.binary_search(&key).expect("cell collected above")];
        for (j, w) in level.weights.iter().enumerate() {
            x[(i, j)] = *w;
        }
        y[i] = r.response;
        let next = group_ids.len();
        groups.push(*group_ids.entry(r.group.as_str()).or_insert(next));
    }
    let lmm = fit_lmm(&Design { x, y, groups, coef_names }, method)?;
    Ok(ModelFit { spec, lmm, levels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emm {
    pub level: String,
    pub strategy: StrategyKind,
    pub bin: Option<ToxicityBin>,
    pub mean: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn estimated_marginal_means(fit: &ModelFit) -> Result<Vec<Emm>, StatsError> {
    if !fit.lmm.converged {
        return Err(StatsError::NonConvergence("fit did not converge".into()));
    }
    Ok(fit
        .levels
        .iter()
        .map(|l| {
            let (mean, se) = fit.lmm.linear(&l.weights);
            Emm {
                level: l.name.clone(),
                strategy: l.strategy,
                bin: l.bin,
                mean,
                se,
                lower: mean - Z_975 * se,
                upper: mean + Z_975 * se,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

impl ModelFit {
    pub fn level(&self, name: &str) -> Result<&Level, StatsError> {
        self.levels
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| StatsError::UnknownLevel(name.to_string()))
    }

    /// Equal-weight average of the given levels' weight vectors.
    pub fn pooled(&self, names: &[String]) -> Result<Vec<f64>, StatsError> {
        if names.is_empty() {
            return Err(StatsError::InvalidInput("nothing to pool".into()));
        }
        let mut out = vec![0.0; self.lmm.beta.len()];
        for n in names {
            for (o, w) in out.iter_mut().zip(&self.level(n)?.weights) {
                *o += w / names.len() as f64;
            }
        }
        Ok(out)
    }

    pub fn coefficients(&self) -> Vec<Contrast> {
        (0..self.lmm.beta.len())
            .map(|i| {
                let mut l = vec![0.0; self.lmm.beta.len()];
                l[i] = 1.0;
                wald_linear(self, &self.lmm.coef_names[i], &l)
            })
            .collect()
    }
}

/// Wald test of `L'β = 0` with a two-sided normal p-value.
pub fn wald_linear(fit: &ModelFit, label: &str, l: &[f64]) -> Contrast {
    let (estimate, se) = fit.lmm.linear(l);
    let z = if se > 0.0 { estimate / se } else { 0.0 };
    Contrast {
        label: label.to_string(),
        estimate,
        se,
        z,
        p: if se > 0.0 { normal_two_sided_p(z) } else { 1.0 },
    }
}

pub fn wald_contrast(fit: &ModelFit, level_a: &str, level_b: &str) -> Result<Contrast, StatsError> {
    let a = &fit.level(level_a)?.weights;
    let b = &fit.level(level_b)?.weights;
    let l: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(wald_linear(fit, &format!("{level_a} - {level_b}"), &l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinContrast {
    /// `"strategies"` for the pooled six strategies, otherwise a kind name.
    pub group: String,
    pub pair: String,
    pub contrast: Contrast,
}

pub const POOLED_STRATEGIES: &str = "strategies";

/// Between-bin contrasts for the pooled strategies and each baseline.
pub fn toxicity_contrasts(fit: &ModelFit) -> Result<Vec<BinContrast>, StatsError> {
    if fit.spec != ModelSpec::StrategyByBin {
        return Err(StatsError::InvalidInput("toxicity contrasts need the interaction model".into()));
    }
    let pairs = [
        (ToxicityBin::High, ToxicityBin::Medium, "high - med"),
        (ToxicityBin::High, ToxicityBin::Low, "high - low"),
        (ToxicityBin::Medium, ToxicityBin::Low, "med - low"),
    ];
    let mut groups: Vec<(String, Vec<StrategyKind>)> =
        vec![(POOLED_STRATEGIES.to_string(), StrategyKind::STRATEGIES.to_vec())];
    groups.extend(StrategyKind::BASELINES.iter().map(|&b| (b.to_string(), vec![b])));
    let mut out = Vec::new();
    for (group, kinds) in groups {
        for (a, b, pair) in pairs {
            let names = |bin| kinds.iter().map(|&k| level_name(k, Some(bin))).collect::<Vec<_>>();
            let la = fit.pooled(&names(a))?;
            let lb = fit.pooled(&names(b))?;
            let l: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x - y).collect();
            out.push(BinContrast {
                group: group.clone(),
                pair: pair.to_string(),
                contrast: wald_linear(fit, &format!("{group}: {pair}"), &l),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(groups: usize, per: usize, tau: f64, sigma: f64, seed: u64) -> Vec<ObservationRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = [
            (StrategyKind::BaselineParaphrase, 0.5),
            (StrategyKind::Hedging, 1.5),
            (StrategyKind::Agreement, 1.8),
        ];
        let noise = Normal::new(0.0, sigma).unwrap();
        let re = Normal::new(0.0, tau.max(1e-300)).unwrap();
        let mut rows = Vec::new();
        for g in 0..groups {
            let u = if tau > 0.0 { re.sample(&mut rng) } else { 0.0 };
            for _ in 0..per {
                let (kind, mu) = levels[rng.gen_range(0..levels.len())];
                rows.push(ObservationRow {
                    response: mu + u + noise.sample(&mut rng),
                    strategy: kind,
                    group: format!("g{g}"),
                    toxicity_bin: Some(ToxicityBin::ALL[g % 3]),
                });
            }
        }
        rows
    }

    #[test]
    fn codings_agree_on_means_and_contrasts() {
        let rows = synthetic(40, 6, 0.7, 1.0, 1);
        let cm = fit_random_intercept(&rows, ModelSpec::Strategy(Coding::CellMeans), Estimation::Ml).unwrap();
        let tr = fit_random_intercept(
            &rows,
            ModelSpec::Strategy(Coding::Treatment { reference: StrategyKind::BaselineParaphrase }),
            Estimation::Ml,
        )
        .unwrap();
        assert!((cm.lmm.loglik - tr.lmm.loglik).abs() < 1e-8);
        let (a, b) = (estimated_marginal_means(&cm).unwrap(), estimated_marginal_means(&tr).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.level, y.level);
            assert!((x.mean - y.mean).abs() < 1e-8);
            assert!((x.se - y.se).abs() < 1e-8);
        }
        let c1 = wald_contrast(&cm, "hedging", "baseline_paraphrase").unwrap();
        let c2 = wald_contrast(&tr, "hedging", "baseline_paraphrase").unwrap();
        assert!((c1.estimate - c2.estimate).abs() < 1e-8);
        let hedging_coef = tr.lmm.coef_names.iter().position(|n| n == "hedging").unwrap();
        assert!((tr.lmm.beta[hedging_coef] - c1.estimate).abs() < 1e-8);
    }

    #[test]
    fn contrast_identities() {
        let rows = synthetic(30, 5, 0.5, 1.0, 2);
        let fit = fit_random_intercept(&rows, ModelSpec::Strategy(Coding::CellMeans), Estimation::Ml).unwrap();
        let same = wald_contrast(&fit, "hedging", "hedging").unwrap();
        assert_eq!((same.estimate, same.z, same.p), (0.0, 0.0, 1.0));
        let ab = wald_contrast(&fit, "hedging", "agreement").unwrap();
        let ba = wald_contrast(&fit, "agreement", "hedging").unwrap();
        assert!((ab.estimate + ba.estimate).abs() < 1e-12);
        assert!((ab.z + ba.z).abs() < 1e-9);
        assert!(matches!(
            wald_contrast(&fit, "hedging", "grounding"),
            Err(StatsError::UnknownLevel(_))
        ));
    }

    #[test]
    fn reml_variance_exceeds_ml() {
        let rows = synthetic(30, 4, 0.8, 1.0, 3);
        let spec = ModelSpec::Strategy(Coding::CellMeans);
        let ml = fit_random_intercept(&rows, spec, Estimation::Ml).unwrap();
        let reml = fit_random_intercept(&rows, spec, Estimation::Reml).unwrap();
        assert!(reml.lmm.sigma2 + reml.lmm.tau2 >= ml.lmm.sigma2 + ml.lmm.tau2 - 1e-9);
    }

    #[test]
    fn interaction_model_contrasts() {
        let mut rows = synthetic(60, 9, 0.3, 1.0, 4);
        // make every strategy × bin cell and baseline cell present
        for (i, kind) in StrategyKind::GENERATABLE.iter().enumerate() {
            for (j, bin) in ToxicityBin::ALL.iter().enumerate() {
                for rep in 0..3 {
                    rows.push(ObservationRow {
                        response: 1.0 + 0.1 * i as f64 + 0.2 * j as f64 + 0.05 * rep as f64,
                        strategy: *kind,
                        group: format!("x{}", (i + j + rep) % 7),
                        toxicity_bin: Some(*bin),
                    });
                }
            }
        }
        let fit = fit_random_intercept(&rows, ModelSpec::StrategyByBin, Estimation::Ml).unwrap();
        assert_eq!(fit.levels.len(), 24);
        let cs = toxicity_contrasts(&fit).unwrap();
        assert_eq!(cs.len(), 9);
        assert!(cs.iter().all(|c| (0.0..=1.0).contains(&c.contrast.p)));
        // high-low equals (high-med) + (med-low)
        let e: Vec<f64> = cs[..3].iter().map(|c| c.contrast.estimate).collect();
        assert!((e[1] - (e[0] + e[2])).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let rows = synthetic(1, 10, 0.0, 1.0, 5);
        assert!(matches!(
            fit_random_intercept(&rows, ModelSpec::Strategy(Coding::CellMeans), Estimation::Ml),
            Err(StatsError::TooFew { .. })
        ));
        let one_level: Vec<ObservationRow> = synthetic(10, 3, 0.0, 1.0, 6)
            .into_iter()
            .map(|r| ObservationRow { strategy: StrategyKind::Hedging, ..r })
            .collect();
        assert!(fit_random_intercept(&one_level, ModelSpec::Strategy(Coding::CellMeans), Estimation::Ml).is_err());
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let design = Design {
            x,
            y: DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]),
            groups: vec![0, 0, 1, 1],
            coef_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(fit_lmm(&design, Estimation::Ml), Err(StatsError::RankDeficient));
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let rows = synthetic(25, 4, 0.6, 1.0, 7);
        let fit = fit_random_intercept(&rows, ModelSpec::Strategy(Coding::CellMeans), Estimation::Ml).unwrap();
        let p = fit.lmm.beta.len();
        let m = DMatrix::from_fn(p, p, |i, j| fit.lmm.cov[i][j]);
        assert_eq!(m, m.transpose());
        assert!(m.symmetric_eigenvalues().iter().all(|&e| e >= -1e-12));
        assert!(fit.lmm.sigma2 > 0.0 && fit.lmm.tau2 >= 0.0);
    }
}
