//! Gaussian mixtures whose components share one block-sparse pattern.
//!
//! Weights are stored as log-ratios against the last component so that any
//! real vector maps onto the simplex.

use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::math::{log_sum_exp, softplus};
use crate::rng::standard_normals;
use crate::sparse_chol::{
    BlockGaussian, BlockKind, BlockPattern, GaussianComponent, Layout, SparseCholeskyFactor,
    StateMarginal,
};

#[derive(Clone, Debug)]
pub struct MixtureApproximation {
    layout: Arc<Layout>,
    log_ratios: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl PartialEq for MixtureApproximation {
    fn eq(&self, other: &Self) -> bool {
        self.log_ratios == other.log_ratios && self.components == other.components
    }
}

/// Mixture over a single latent block after conditioning.
#[derive(Clone, Debug)]
pub struct ConditionalMixture {
    /// Normalised log-weights.
    pub log_weights: Vec<f64>,
    pub components: Vec<BlockGaussian>,
}

impl ConditionalMixture {
    pub fn logpdf(&self, b: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w + c.logpdf(b))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = pick(&self.weights(), rng.random());
        let c = &self.components[k];
        c.sample(&standard_normals(rng, c.dim()))
    }
}

/// Precomputed per-component chain marginals.
#[derive(Clone, Debug)]
pub struct ChainCache {
    marginals: Vec<Vec<StateMarginal>>,
}

/// Point evaluation of a mixture at one parameter vector.
#[derive(Clone, Debug)]
pub struct MixturePoint {
    pub log_q: f64,
    /// `N_k(theta) / q(theta)`.
    pub responsibilities: Vec<f64>,
    pub component_log_densities: Vec<f64>,
}

pub(crate) fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

impl MixtureApproximation {
    /// One component with unit weight.
    pub fn single(component: GaussianComponent) -> Self {
        Self {
            layout: component.factor.layout().clone(),
            log_ratios: vec![0.0],
            components: vec![component],
        }
    }

    /// Standard-normal single component for a pattern.
    pub fn standard(pattern: &BlockPattern) -> Self {
        let layout = Arc::new(Layout::new(pattern));
        let factor = SparseCholeskyFactor::identity(layout);
        let mean = vec![0.0; pattern.total_dim()];
        Self::single(GaussianComponent { mean, factor })
    }

    /// Build from components and simplex weights.
    pub fn new(components: Vec<GaussianComponent>, weights: &[f64]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("a mixture needs a component".into()));
        }
        check_len("mixture weights", components.len(), weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be positive".into()));
        }
        let last = weights[weights.len() - 1].ln();
        let log_ratios = weights.iter().map(|w| w.ln() - last).collect();
        Self::from_log_ratios(components, log_ratios)
    }

    pub fn from_log_ratios(components: Vec<GaussianComponent>, log_ratios: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("a mixture needs a component".into()));
        }
        check_len("mixture log-ratios", components.len(), log_ratios.len())?;
        let layout = components[0].factor.layout().clone();
        for c in &components {
            if c.pattern() != layout.pattern() {
                return Err(Error::PatternMismatch(
                    "components must share one block pattern".into(),
                ));
            }
        }
        let mut mix = Self {
            layout,
            log_ratios,
            components,
        };
        mix.normalise_ratios();
        Ok(mix)
    }

    fn normalise_ratios(&mut self) {
        let last = *self.log_ratios.last().expect("non-empty");
        if last != 0.0 {
            for r in &mut self.log_ratios {
                *r -= last;
            }
        }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn pattern(&self) -> &BlockPattern {
        self.layout.pattern()
    }

    pub fn dim(&self) -> usize {
        self.pattern().total_dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &GaussianComponent {
        &self.components[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut GaussianComponent {
        &mut self.components[k]
    }

    pub fn last_component(&self) -> &GaussianComponent {
        self.components.last().expect("non-empty")
    }

    pub fn last_component_mut(&mut self) -> &mut GaussianComponent {
        self.components.last_mut().expect("non-empty")
    }

    /// `log(pi_k / pi_K)`; the last entry is zero.
    pub fn log_ratios(&self) -> &[f64] {
        &self.log_ratios
    }

    pub fn set_log_ratios(&mut self, log_ratios: Vec<f64>) -> Result<()> {
        check_len("mixture log-ratios", self.n_components(), log_ratios.len())?;
        self.log_ratios = log_ratios;
        self.normalise_ratios();
        Ok(())
    }

    pub fn log_weights(&self) -> Vec<f64> {
        let z = log_sum_exp(&self.log_ratios);
        self.log_ratios.iter().map(|r| r - z).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights().iter().map(|w| w.exp()).collect()
    }

    /// Log-odds of the last two components, `log(pi_{K-1} / pi_K)`.
    pub fn split_logit(&self) -> f64 {
        let k = self.n_components();
        assert!(k >= 2, "split logit needs two components");
        self.log_ratios[k - 2]
    }

    /// Set the log-odds of the last two components while keeping every other
    /// weight and the pair's total mass fixed.
    pub fn set_split_logit(&mut self, x: f64) {
        let k = self.n_components();
        assert!(k >= 2, "split logit needs two components");
        let old = self.log_ratios[k - 2];
        let shift = softplus(x) - softplus(old);
        for r in &mut self.log_ratios[..k - 2] {
            *r += shift;
        }
        self.log_ratios[k - 2] = x;
    }

    /// Index of the highest-weight component, lowest index on ties.
    pub fn top_component(&self) -> usize {
        let mut best = 0;
        for (k, &r) in self.log_ratios.iter().enumerate() {
            if r > self.log_ratios[best] {
                best = k;
            }
        }
        best
    }

    /// Move the highest-weight component to the last position.
    pub fn relabel_top_last(&mut self) {
        let top = self.top_component();
        let last = self.n_components() - 1;
        if top != last {
            let c = self.components.remove(top);
            self.components.push(c);
            let r = self.log_ratios.remove(top);
            self.log_ratios.push(r);
            self.normalise_ratios();
        }
    }

    /// Relabel the top component last and append a copy of it, giving the
    /// copy a share `1 - split` of its weight.
    pub fn split(&self, split: f64) -> Result<Self> {
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split weight {split} must lie in (0, 1)"
            )));
        }
        let mut mix = self.clone();
        mix.relabel_top_last();
        let copy = mix.last_component().clone();
        mix.components.push(copy);
        let keep = split.ln();
        let give = (-split).ln_1p();
        let k = mix.log_ratios.len();
        for r in &mut mix.log_ratios[..k - 1] {
            *r -= give;
        }
        mix.log_ratios[k - 1] = keep - give;
        mix.log_ratios.push(0.0);
        Ok(mix)
    }

    pub fn component_log_densities(&self, theta: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.logpdf(theta)).collect()
    }

    pub fn logpdf(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(theta)?.log_q)
    }

    /// Log-density and per-component responsibilities at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<MixturePoint> {
        check_len("parameter vector", self.dim(), theta.len())?;
        let logs = self.component_log_densities(theta);
        let lw = self.log_weights();
        let terms: Vec<f64> = lw.iter().zip(&logs).map(|(w, l)| w + l).collect();
        let log_q = log_sum_exp(&terms);
        if !log_q.is_finite() {
            return Err(Error::Underflow);
        }
        let responsibilities = logs.iter().map(|l| (l - log_q).exp()).collect();
        Ok(MixturePoint {
            log_q,
            responsibilities,
            component_log_densities: logs,
        })
    }

    /// `N_k(theta) / q(theta)` for every component.
    pub fn responsibilities(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(theta)?.responsibilities)
    }

    /// Gradient of `log q` with respect to `theta`.
    pub fn grad_logpdf(&self, theta: &[f64], point: &MixturePoint) -> Vec<f64> {
        let w = self.weights();
        let mut g = vec![0.0; self.dim()];
        for (k, c) in self.components.iter().enumerate() {
            let s = w[k] * point.responsibilities[k];
            if s == 0.0 {
                continue;
            }
            for (gi, ci) in g.iter_mut().zip(c.grad_logpdf(theta)) {
                *gi += s * ci;
            }
        }
        g
    }

    /// Per-component `(weight, mean, standard deviation)` of coordinate `j`.
    pub fn coordinate_marginal(&self, j: usize) -> Result<Vec<(f64, f64, f64)>> {
        if j >= self.dim() {
            return Err(Error::InvalidConfig(format!(
                "coordinate {j} out of range for dimension {}",
                self.dim()
            )));
        }
        let mut unit = vec![0.0; self.dim()];
        unit[j] = 1.0;
        Ok(self
            .weights()
            .into_iter()
            .zip(&self.components)
            .map(|(w, c)| {
                let x = c.factor.solve_lower(&unit);
                let var: f64 = x.iter().map(|v| v * v).sum();
                (w, c.mean[j], var.sqrt())
            })
            .collect())
    }

    /// Marginal density of coordinate `j` at each point of `xs`.
    pub fn coordinate_density(&self, j: usize, xs: &[f64]) -> Result<Vec<f64>> {
        let parts = self.coordinate_marginal(j)?;
        Ok(xs
            .iter()
            .map(|&x| {
                parts
                    .iter()
                    .map(|&(w, m, sd)| {
                        let z = (x - m) / sd;
                        w * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                    })
                    .sum()
            })
            .collect())
    }

    /// Draw the component index and the standard-normal noise, then map.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = pick(&self.weights(), rng.random());
        let eps = standard_normals(rng, self.dim());
        self.components[k].sample(&eps)
    }

    pub fn global_logpdf(&self, theta_g: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(&self.global_terms(theta_g)?))
    }

    fn global_terms(&self, theta_g: &[f64]) -> Result<Vec<f64>> {
        let lw = self.log_weights();
        if self.pattern().global_dim() == 0 {
            check_len("global block", 0, theta_g.len())?;
            return Ok(lw);
        }
        self.components
            .iter()
            .zip(&lw)
            .map(|(c, w)| Ok(w + c.global_marginal()?.logpdf(theta_g)))
            .collect()
    }

    /// Mixing weights of the latent conditionals given the global block.
    pub fn conditional_log_weights(&self, theta_g: &[f64]) -> Result<Vec<f64>> {
        normalised(self.global_terms(theta_g)?)
    }

    /// Mixture conditional of latent `i` given the global block.
    pub fn latent_conditional(&self, i: usize, theta_g: &[f64]) -> Result<ConditionalMixture> {
        let log_weights = self.conditional_log_weights(theta_g)?;
        let components = self
            .components
            .iter()
            .map(|c| c.latent_conditional(i, theta_g))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConditionalMixture {
            log_weights,
            components,
        })
    }

    pub fn latent_conditional_logpdf(&self, i: usize, b: &[f64], theta_g: &[f64]) -> Result<f64> {
        Ok(self.latent_conditional(i, theta_g)?.logpdf(b))
    }

    pub fn chain_cache(&self) -> Result<ChainCache> {
        let marginals = self
            .components
            .iter()
            .map(|c| c.state_marginals())
            .collect::<Result<Vec<_>>>()?;
        Ok(ChainCache { marginals })
    }

    /// Mixture conditional of latent `i` given its successor and the global
    /// block. Weights follow each component's joint density of the
    /// conditioning variables.
    pub fn latent_conditional_markov(
        &self,
        i: usize,
        next: Option<&[f64]>,
        theta_g: &[f64],
        cache: &ChainCache,
    ) -> Result<ConditionalMixture> {
        if self.pattern().kind() != BlockKind::Markov {
            return Err(Error::WrongPatternKind { expected: "markov" });
        }
        self.pattern().check_latent(i)?;
        let lw = self.log_weights();
        let terms = match next {
            None => self.global_terms(theta_g)?,
            Some(b) => self
                .components
                .iter()
                .zip(&cache.marginals)
                .zip(&lw)
                .map(|((c, m), w)| Ok(w + c.state_global_logpdf(m, i + 1, b, theta_g)?))
                .collect::<Result<Vec<_>>>()?,
        };
        let log_weights = normalised(terms)?;
        let components = self
            .components
            .iter()
            .map(|c| c.latent_conditional_markov(i, next, theta_g))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConditionalMixture {
            log_weights,
            components,
        })
    }
}

fn normalised(terms: Vec<f64>) -> Result<Vec<f64>> {
    let z = log_sum_exp(&terms);
    if !z.is_finite() {
        return Err(Error::Underflow);
    }
    Ok(terms.into_iter().map(|t| t - z).collect())
}
