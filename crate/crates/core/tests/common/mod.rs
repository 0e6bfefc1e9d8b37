//! Dense oracles, finite differences and small fixtures shared by the
//! integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use mixboost::models::{LatentPriors, Model, ModelSpec, PriorSpec};
use mixboost::rng::{substream, Rng};
use mixboost::sparse_chol::Layout;
use mixboost::{BlockKind, BlockPattern, GaussianComponent, MixtureApproximation, SparseCholeskyFactor};
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> Rng {
    substream(seed, 1000, 0, 0)
}

pub fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Random pattern with `n <= max_n` latents of dimension 1 or 2 and a global
/// block of dimension at most `max_g` (at least one).
pub fn random_pattern(rng: &mut Rng, kind: BlockKind, max_n: usize, max_g: usize) -> BlockPattern {
    let n = rng.random_range(1..=max_n);
    let dims = (0..n).map(|_| rng.random_range(1..=2)).collect();
    let g = rng.random_range(1..=max_g);
    BlockPattern::new(kind, dims, g).unwrap()
}

/// Factor with log-diagonals in `[-0.5, 0.5]` and off-diagonals `N(0, 0.25)`.
pub fn random_factor(rng: &mut Rng, pattern: &BlockPattern) -> SparseCholeskyFactor {
    let layout = Arc::new(Layout::new(pattern));
    let params = layout
        .entries()
        .iter()
        .map(|e| {
            if e.is_diagonal() {
                rng.random_range(-0.5..0.5)
            } else {
                0.5 * normal(rng)
            }
        })
        .collect();
    SparseCholeskyFactor::unpack(layout, params).unwrap()
}

pub fn random_component(rng: &mut Rng, pattern: &BlockPattern) -> GaussianComponent {
    let factor = random_factor(rng, pattern);
    let mean = normals(rng, pattern.total_dim());
    GaussianComponent::new(mean, factor).unwrap()
}

pub fn random_mixture(rng: &mut Rng, pattern: &BlockPattern, k: usize) -> MixtureApproximation {
    let comps = (0..k).map(|_| random_component(rng, pattern)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / s).collect();
    MixtureApproximation::new(comps, &w).unwrap()
}

/// Covariance `(L L^T)^-1` computed densely.
pub fn dense_cov(comp: &GaussianComponent) -> DMatrix<f64> {
    let l = comp.factor.to_dense();
    (&l * l.transpose()).try_inverse().unwrap()
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// Dense Gaussian conditioning of `keep` on `given = values`.
pub fn dense_condition(
    mean: &[f64],
    cov: &DMatrix<f64>,
    keep: &[usize],
    given: &[usize],
    values: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let m_k = DVector::from_iterator(keep.len(), keep.iter().map(|&j| mean[j]));
    let s_kk = submatrix(cov, keep, keep);
    if given.is_empty() {
        return (m_k, s_kk);
    }
    let s_kg = submatrix(cov, keep, given);
    let s_gg = submatrix(cov, given, given);
    let d = DVector::from_iterator(given.len(), given.iter().zip(values).map(|(&j, v)| v - mean[j]));
    let gain = &s_kg * s_gg.try_inverse().unwrap();
    (m_k + &gain * d, s_kk - &gain * s_kg.transpose())
}

pub fn dense_logpdf(mean: &DVector<f64>, cov: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = mean.len();
    let diff = DVector::from_column_slice(x) - mean;
    let chol = cov.clone().cholesky().unwrap();
    let sol = chol.solve(&diff);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + diff.dot(&sol))
}

/// `||a - b||_F / ||b||_F`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    if nb == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / nb
    }
}

pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    rel_err(
        &DMatrix::from_column_slice(a.len(), 1, a),
        &DMatrix::from_column_slice(b.len(), 1, b),
    )
}

pub fn range_indices(r: std::ops::Range<usize>) -> Vec<usize> {
    r.collect()
}

/// Five-point central difference of `f` along coordinate `k`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let at = |t: f64| {
        let mut y = x.to_vec();
        y[k] += t;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len()).map(|k| fd_partial(f, x, k, h)).collect()
}

/// Elementwise check `|a - b| <= rel * max(|a|, |b|)` with an absolute floor
/// for entries at the finite-difference noise level.
pub fn grad_close(analytic: &[f64], numeric: &[f64], rel: f64, floor: f64) -> Result<(), String> {
    for (k, (a, b)) in analytic.iter().zip(numeric).enumerate() {
        let d = (a - b).abs();
        if d > floor && d > rel * a.abs().max(b.abs()) {
            return Err(format!("entry {k}: analytic {a:e} numeric {b:e}"));
        }
    }
    Ok(())
}

pub fn bimodal() -> PriorSpec {
    PriorSpec::MixtureOfNormals {
        weight: 0.5,
        mean1: -2.0,
        var1: 0.01,
        mean2: 2.0,
        var2: 0.01,
    }
}

pub fn student_t() -> PriorSpec {
    PriorSpec::StudentT {
        loc: 0.0,
        scale2: 0.1,
        dof: 3.0,
    }
}

/// Random-effects logistic model with a planted bimodal prior on the first
/// `planted` subjects.
pub fn planted_logistic(n: usize, t: usize, p: usize, planted: usize) -> ModelSpec {
    ModelSpec::RandomEffectsLogistic {
        n,
        t,
        p,
        priors: LatentPriors::planted(PriorSpec::standard_normal(), bimodal(), (0..planted).collect()),
        beta_var: 1.0,
        true_beta: None,
        true_latents: None,
    }
}

pub fn sv_spec(n: usize, planted: usize) -> ModelSpec {
    ModelSpec::StochasticVolatility {
        n,
        priors: LatentPriors::planted(
            PriorSpec::Normal { mean: 0.0, var: 0.1 },
            student_t(),
            (0..planted).collect(),
        ),
        kappa: -1.0,
        phi: 0.9,
    }
}

pub fn tv_spec(n: usize, planted: usize) -> ModelSpec {
    ModelSpec::TimeVaryingLogistic {
        n,
        priors: LatentPriors::planted(
            PriorSpec::Normal { mean: 0.0, var: 0.25 },
            student_t(),
            (0..planted).collect(),
        ),
        phi: 0.9,
    }
}

pub fn normal_spec(n: usize, t: usize) -> ModelSpec {
    ModelSpec::NormalHierarchy {
        n,
        t,
        global_mean: 0.0,
        global_var: 4.0,
        latent_var: 1.0,
        noise_var: 1.0,
        true_global: Some(1.5),
    }
}

pub fn build(spec: &ModelSpec, seed: u64) -> Model {
    let sim = spec.simulate(seed).unwrap();
    spec.build(&sim.dataset).unwrap()
}

/// One small instance of every model family.
pub fn small_models() -> Vec<(&'static str, Model)> {
    vec![
        ("random effects, normal priors", build(&planted_logistic(5, 4, 2, 0), 1)),
        ("random effects, bimodal priors", build(&planted_logistic(5, 4, 2, 3), 2)),
        (
            "random effects, t priors",
            build(
                &ModelSpec::RandomEffectsLogistic {
                    n: 4,
                    t: 5,
                    p: 3,
                    priors: LatentPriors::planted(PriorSpec::standard_normal(), student_t(), vec![0, 2]),
                    beta_var: 2.0,
                    true_beta: None,
                    true_latents: None,
                },
                3,
            ),
        ),
        ("stochastic volatility", build(&sv_spec(6, 2), 4)),
        ("time-varying logistic", build(&tv_spec(6, 2), 5)),
        ("gaussian hierarchy", build(&normal_spec(3, 4), 6)),
    ]
}

/// Parameter vector with latents and globals drawn around zero.
pub fn random_theta(rng: &mut Rng, dim: usize, scale: f64) -> Vec<f64> {
    normals(rng, dim).into_iter().map(|v| scale * v).collect()
}

/// Trapezoid rule on `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Single Gaussian equal to a Gaussian posterior whose precision follows
/// `pattern`; arrow and banded-arrow precisions factorise without fill-in.
pub fn exact_fit(
    pattern: &BlockPattern,
    mean: &[f64],
    cov: &DMatrix<f64>,
) -> MixtureApproximation {
    let prec = cov.clone().try_inverse().unwrap();
    let mut l = prec.cholesky().unwrap().l();
    for j in 0..l.nrows() {
        l[(j, j)] = l[(j, j)].ln();
    }
    let layout = Arc::new(Layout::new(pattern));
    let g = range_indices(pattern.global_range());
    let latent: Vec<DMatrix<f64>> = (0..pattern.n_latents())
        .map(|i| {
            let r = range_indices(pattern.latent_range(i));
            submatrix(&l, &r, &r)
        })
        .collect();
    let coupling: Vec<DMatrix<f64>> = (0..pattern.n_latents())
        .map(|i| submatrix(&l, &g, &range_indices(pattern.latent_range(i))))
        .collect();
    let transitions: Vec<DMatrix<f64>> = match pattern.kind() {
        BlockKind::Hierarchical => Vec::new(),
        BlockKind::Markov => (0..pattern.n_latents().saturating_sub(1))
            .map(|i| {
                let rows = range_indices(pattern.latent_range(i + 1));
                submatrix(&l, &rows, &range_indices(pattern.latent_range(i)))
            })
            .collect(),
    };
    let factor =
        SparseCholeskyFactor::from_blocks(layout, &latent, &transitions, &coupling, &submatrix(&l, &g, &g))
            .unwrap();
    MixtureApproximation::single(GaussianComponent::new(mean.to_vec(), factor).unwrap())
}

pub fn normal_model(spec: &ModelSpec, seed: u64) -> mixboost::models::NormalHierarchy {
    match build(spec, seed) {
        Model::Normal(m) => m,
        _ => unreachable!("Gaussian spec"),
    }
}
