/// Bias-corrected ADAM for gradient ascent.
#[derive(Clone, Debug)]
pub struct Adam {
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, alpha: f64) -> Self {
        Self {
            alpha,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    /// Ascent increment for gradient `g`.
    pub fn step(&mut self, g: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        g.iter()
            .enumerate()
            .map(|(j, &gj)| {
                self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * gj;
                self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * gj * gj;
                let mh = self.m[j] / c1;
                let vh = self.v[j] / c2;
                self.alpha * mh / (vh.sqrt() + self.eps)
            })
            .collect()
    }
}
