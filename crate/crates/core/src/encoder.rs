//! Linear + L2-normalization encoder with a hand-written backward pass,
//! AdamW, linear warmup and the EMA teacher update.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DcccError, Result};

/// Weight (D_out x D_in) and bias (D_out) of the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawParams", try_from = "RawParams")]
pub struct EncoderParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<EncoderParams> for RawParams {
    fn from(p: EncoderParams) -> Self {
        RawParams {
            weight: rows_to_vecs(&p.weight),
            bias: p.bias.to_vec(),
        }
    }
}

impl TryFrom<RawParams> for EncoderParams {
    type Error = DcccError;

    fn try_from(raw: RawParams) -> Result<Self> {
        let weight = vecs_to_array(raw.weight)?;
        if weight.nrows() != raw.bias.len() {
            return Err(DcccError::Contract(format!(
                "weight has {} rows but bias has {} entries",
                weight.nrows(),
                raw.bias.len()
            )));
        }
        Ok(EncoderParams {
            weight,
            bias: Array1::from(raw.bias),
        })
    }
}

pub(crate) fn rows_to_vecs(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub(crate) fn vecs_to_array(rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(DcccError::Contract("ragged matrix rows".into()));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| DcccError::Contract(e.to_string()))
}

impl EncoderParams {
    /// Gaussian weights with std 1/sqrt(D_in), zero bias.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, rng: &mut R) -> Result<Self> {
        if output_dim < 2 {
            return Err(DcccError::config("output_dim", "must be at least 2"));
        }
        if input_dim < 1 {
            return Err(DcccError::config("input_dim", "must be at least 1"));
        }
        let scale = 1.0 / (input_dim as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((output_dim, input_dim), || {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        Ok(EncoderParams {
            weight,
            bias: Array1::zeros(output_dim),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn check_same_shape(&self, other: &EncoderParams) -> Result<()> {
        if self.weight.dim() != other.weight.dim() || self.bias.len() != other.bias.len() {
            return Err(DcccError::Contract(format!(
                "parameter shapes differ: {:?} vs {:?}",
                self.weight.dim(),
                other.weight.dim()
            )));
        }
        Ok(())
    }
}

/// Everything `backward` needs from the matching `forward` call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Array2<f64>,
    /// Unit-norm outputs (activation / norm).
    pub output: Array2<f64>,
    pub norms: Vec<f64>,
}

/// Encodes a batch: each row becomes (W x + b) / ||W x + b||.
pub fn forward(p: &EncoderParams, batch: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
    if batch.ncols() != p.input_dim() {
        return Err(DcccError::Contract(format!(
            "batch has {} columns, encoder expects {}",
            batch.ncols(),
            p.input_dim()
        )));
    }
    let mut act = batch.dot(&p.weight.t());
    act += &p.bias;
    let mut norms = Vec::with_capacity(act.nrows());
    for (i, mut row) in act.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if !norm.is_finite() {
            return Err(DcccError::Numerical(format!("non-finite activation for sample {i}")));
        }
        if norm == 0.0 {
            return Err(DcccError::Numerical(format!(
                "zero pre-normalization norm for sample {i}"
            )));
        }
        row /= norm;
        norms.push(norm);
    }
    let cache = ForwardCache {
        input: batch.to_owned(),
        output: act.clone(),
        norms,
    };
    Ok((act, cache))
}

/// Encodes without keeping a cache.
pub fn encode(p: &EncoderParams, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    forward(p, batch).map(|(out, _)| out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub input: Array2<f64>,
}

/// Back-propagates `grad_out` (B x D_out, gradient w.r.t. the unit-norm
/// outputs) through the normalization and the linear layer.
pub fn backward(p: &EncoderParams, cache: &ForwardCache, grad_out: ArrayView2<'_, f64>) -> Result<Gradients> {
    if grad_out.dim() != cache.output.dim() {
        return Err(DcccError::Contract(format!(
            "output gradient shape {:?} does not match cached output {:?}",
            grad_out.dim(),
            cache.output.dim()
        )));
    }
    if cache.input.ncols() != p.input_dim() || cache.output.ncols() != p.output_dim() {
        return Err(DcccError::Contract("cache does not match encoder shape".into()));
    }
    // d/dv of v/|v| is (I - y y^T) / |v|
    let mut grad_act = grad_out.to_owned();
    for ((mut g, y), &norm) in grad_act
        .axis_iter_mut(Axis(0))
        .zip(cache.output.axis_iter(Axis(0)))
        .zip(&cache.norms)
    {
        let along = g.dot(&y);
        Zip::from(&mut g).and(&y).for_each(|gi, &yi| *gi = (*gi - along * yi) / norm);
    }
    Ok(Gradients {
        weight: grad_act.t().dot(&cache.input),
        bias: grad_act.sum_axis(Axis(0)),
        input: grad_act.dot(&p.weight),
    })
}

/// AdamW state; weight decay is decoupled and applied to the weight only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawAdam", try_from = "RawAdam")]
pub struct AdamState {
    pub m_weight: Array2<f64>,
    pub v_weight: Array2<f64>,
    pub m_bias: Array1<f64>,
    pub v_bias: Array1<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

#[derive(Serialize, Deserialize)]
struct RawAdam {
    m_weight: Vec<Vec<f64>>,
    v_weight: Vec<Vec<f64>>,
    m_bias: Vec<f64>,
    v_bias: Vec<f64>,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl From<AdamState> for RawAdam {
    fn from(s: AdamState) -> Self {
        RawAdam {
            m_weight: rows_to_vecs(&s.m_weight),
            v_weight: rows_to_vecs(&s.v_weight),
            m_bias: s.m_bias.to_vec(),
            v_bias: s.v_bias.to_vec(),
            step: s.step,
            beta1: s.beta1,
            beta2: s.beta2,
            eps: s.eps,
            weight_decay: s.weight_decay,
        }
    }
}

impl TryFrom<RawAdam> for AdamState {
    type Error = DcccError;

    fn try_from(r: RawAdam) -> Result<Self> {
        Ok(AdamState {
            m_weight: vecs_to_array(r.m_weight)?,
            v_weight: vecs_to_array(r.v_weight)?,
            m_bias: Array1::from(r.m_bias),
            v_bias: Array1::from(r.v_bias),
            step: r.step,
            beta1: r.beta1,
            beta2: r.beta2,
            eps: r.eps,
            weight_decay: r.weight_decay,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

impl AdamState {
    pub fn new(p: &EncoderParams, cfg: AdamConfig) -> Self {
        AdamState {
            m_weight: Array2::zeros(p.weight.dim()),
            v_weight: Array2::zeros(p.weight.dim()),
            m_bias: Array1::zeros(p.bias.len()),
            v_bias: Array1::zeros(p.bias.len()),
            step: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    /// One AdamW step. Non-finite gradients leave both state and parameters
    /// untouched.
    pub fn step(&mut self, p: &mut EncoderParams, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(DcccError::Contract(format!("learning rate {lr} must be >= 0")));
        }
        if grads.weight.dim() != p.weight.dim() || grads.bias.len() != p.bias.len() {
            return Err(DcccError::Contract("gradient shape does not match parameters".into()));
        }
        if self.m_weight.dim() != p.weight.dim() || self.m_bias.len() != p.bias.len() {
            return Err(DcccError::Contract("optimizer state does not match parameters".into()));
        }
        if grads.weight.iter().chain(grads.bias.iter()).any(|g| !g.is_finite()) {
            return Err(DcccError::Numerical("non-finite gradient".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);

        Zip::from(&mut p.weight)
            .and(&mut self.m_weight)
            .and(&mut self.v_weight)
            .and(&grads.weight)
            .for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                *w -= lr * (update + wd * *w);
            });
        Zip::from(&mut p.bias)
            .and(&mut self.m_bias)
            .and(&mut self.v_bias)
            .and(&grads.bias)
            .for_each(|b, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *b -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
        Ok(())
    }
}

/// Linear warmup: `base_lr * min(1, (epoch + 1) / warmup_epochs)`.
pub fn warmup_lr(epoch: usize, base_lr: f64, warmup_epochs: usize) -> f64 {
    let warmup = warmup_epochs.max(1);
    if epoch + 1 >= warmup {
        base_lr
    } else {
        base_lr * (epoch + 1) as f64 / warmup as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaConfig {
    pub lambda: f64,
}

impl EmaConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(DcccError::config("ema_lambda", "must lie in [0, 1]"));
        }
        Ok(EmaConfig { lambda })
    }
}

/// teacher <- lambda * teacher + (1 - lambda) * student, elementwise.
pub fn ema_update(teacher: &mut EncoderParams, student: &EncoderParams, cfg: EmaConfig) -> Result<()> {
    teacher.check_same_shape(student)?;
    let l = cfg.lambda;
    Zip::from(&mut teacher.weight)
        .and(&student.weight)
        .for_each(|t, &s| *t = l * *t + (1.0 - l) * s);
    Zip::from(&mut teacher.bias)
        .and(&student.bias)
        .for_each(|t, &s| *t = l * *t + (1.0 - l) * s);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, b: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((b, d), || rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn identity_weight_keeps_unit_input() {
        let p = EncoderParams {
            weight: Array2::eye(3),
            bias: Array1::zeros(3),
        };
        let x = array![[0.6, 0.8, 0.0], [0.0, 0.0, 1.0]];
        let (y, _) = forward(&p, x.view()).unwrap();
        for (a, b) in y.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn outputs_are_unit_norm_and_match_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = EncoderParams {
            weight: random_batch(&mut rng, 4, 6),
            bias: random_batch(&mut rng, 1, 4).row(0).to_owned(),
        };
        let x = random_batch(&mut rng, 5, 6);
        let (y, _) = forward(&p, x.view()).unwrap();
        for i in 0..5 {
            let row = y.row(i);
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
            // independent re-implementation
            let mut v = vec![0.0; 4];
            for o in 0..4 {
                v[o] = p.bias[o];
                for c in 0..6 {
                    v[o] += p.weight[[o, c]] * x[[i, c]];
                }
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for o in 0..4 {
                assert!((row[o] - v[o] / n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_activation_reports_sample() {
        let p = EncoderParams {
            weight: Array2::zeros((2, 2)),
            bias: Array1::zeros(2),
        };
        let x = array![[1.0, 1.0], [2.0, 2.0]];
        let err = forward(&p, x.view()).unwrap_err();
        assert!(err.to_string().contains("sample 0"), "{err}");
    }

    #[test]
    fn wrong_input_width_is_contract_error() {
        let p = EncoderParams::random(3, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let x = Array2::<f64>::ones((1, 4));
        assert!(matches!(forward(&p, x.view()), Err(DcccError::Contract(_))));
    }

    #[test]
    fn zero_output_gradient_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = EncoderParams::random(6, 4, &mut rng).unwrap();
        let x = random_batch(&mut rng, 3, 6);
        let (_, cache) = forward(&p, x.view()).unwrap();
        let g = backward(&p, &cache, Array2::zeros((3, 4)).view()).unwrap();
        assert!(g.weight.iter().chain(g.bias.iter()).chain(g.input.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_along_output_is_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = EncoderParams::random(6, 4, &mut rng).unwrap();
        let x = random_batch(&mut rng, 2, 6);
        let (y, cache) = forward(&p, x.view()).unwrap();
        let g = backward(&p, &cache, (&y * 2.5).view()).unwrap();
        // gradient w.r.t. the activation is zero, so everything downstream is
        assert!(g.bias.iter().all(|v| v.abs() < 1e-12));
        assert!(g.input.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = EncoderParams::random(6, 4, &mut rng).unwrap();
        let x = random_batch(&mut rng, 2, 6);
        let (_, cache) = forward(&p, x.view()).unwrap();
        assert!(backward(&p, &cache, Array2::zeros((2, 3)).view()).is_err());
    }

    // loss = sum(G .* forward(W, b, X)); checked by central differences
    #[test]
    fn backward_matches_finite_differences() {
        let h = 1e-5;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let p = EncoderParams {
                weight: random_batch(&mut rng, 4, 6),
                bias: random_batch(&mut rng, 1, 4).row(0).to_owned(),
            };
            let x = random_batch(&mut rng, 3, 6);
            let gout = random_batch(&mut rng, 3, 4);
            let objective = |p: &EncoderParams, x: &Array2<f64>| -> f64 {
                let (y, _) = forward(p, x.view()).unwrap();
                (&y * &gout).sum()
            };
            let (_, cache) = forward(&p, x.view()).unwrap();
            let g = backward(&p, &cache, gout.view()).unwrap();

            let check = |analytic: f64, numeric: f64| {
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(rel <= 1e-5, "seed {seed}: {analytic} vs {numeric}");
            };
            for idx in 0..p.weight.len() {
                let (r, c) = (idx / 6, idx % 6);
                let mut pp = p.clone();
                pp.weight[[r, c]] += h;
                let mut pm = p.clone();
                pm.weight[[r, c]] -= h;
                check(g.weight[[r, c]], (objective(&pp, &x) - objective(&pm, &x)) / (2.0 * h));
            }
            for o in 0..4 {
                let mut pp = p.clone();
                pp.bias[o] += h;
                let mut pm = p.clone();
                pm.bias[o] -= h;
                check(g.bias[o], (objective(&pp, &x) - objective(&pm, &x)) / (2.0 * h));
            }
            for r in 0..3 {
                for c in 0..6 {
                    let mut xp = x.clone();
                    xp[[r, c]] += h;
                    let mut xm = x.clone();
                    xm[[r, c]] -= h;
                    check(g.input[[r, c]], (objective(&p, &xp) - objective(&p, &xm)) / (2.0 * h));
                }
            }
        }
    }

    fn scalar_params(w: f64, b: f64) -> EncoderParams {
        EncoderParams {
            weight: Array2::from_elem((2, 1), w),
            bias: Array1::from_elem(2, b),
        }
    }

    #[test]
    fn adam_zero_lr_moves_only_moments() {
        let mut p = scalar_params(1.0, 0.5);
        let before = p.clone();
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = Gradients {
            weight: Array2::from_elem((2, 1), 0.3),
            bias: Array1::from_elem(2, -0.2),
            input: Array2::zeros((0, 1)),
        };
        s.step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
        assert!((s.m_weight[[0, 0]] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_by_hand() {
        // m = 0.1 g, v = 0.001 g^2; bias-corrected m/sqrt(v) = g/|g| (up to eps)
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut p = scalar_params(1.0, 0.5);
        let mut s = AdamState::new(&p, cfg);
        let g = Gradients {
            weight: Array2::from_elem((2, 1), 0.4),
            bias: Array1::from_elem(2, -2.0),
            input: Array2::zeros((0, 1)),
        };
        s.step(&mut p, &g, 0.01).unwrap();
        let expect_w = 1.0 - 0.01 * 0.4 / (0.4 + 1e-8);
        let expect_b = 0.5 + 0.01 * 2.0 / (2.0 + 1e-8);
        assert!((p.weight[[0, 0]] - expect_w).abs() < 1e-14);
        assert!((p.bias[0] - expect_b).abs() < 1e-14);

        // with decay the weight shrinks by an extra lr * wd * w, bias doesn't
        let mut p2 = scalar_params(1.0, 0.5);
        let mut s2 = AdamState::new(&p2, AdamConfig::default());
        s2.step(&mut p2, &g, 0.01).unwrap();
        assert!((p2.weight[[0, 0]] - (expect_w - 0.01 * 5e-4)).abs() < 1e-14);
        assert!((p2.bias[0] - expect_b).abs() < 1e-14);
    }

    #[test]
    fn adam_non_finite_gradient_is_rejected_without_mutation() {
        let mut p = scalar_params(1.0, 0.5);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let (p0, s0) = (p.clone(), s.clone());
        let g = Gradients {
            weight: Array2::from_elem((2, 1), f64::NAN),
            bias: Array1::zeros(2),
            input: Array2::zeros((0, 1)),
        };
        assert!(matches!(s.step(&mut p, &g, 0.1), Err(DcccError::Numerical(_))));
        assert_eq!(p, p0);
        assert_eq!(s, s0);
    }

    #[test]
    fn adam_reruns_are_bit_identical() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut p = EncoderParams::random(5, 3, &mut rng).unwrap();
            let mut s = AdamState::new(&p, AdamConfig::default());
            for _ in 0..10 {
                let g = Gradients {
                    weight: random_batch(&mut rng, 3, 5),
                    bias: random_batch(&mut rng, 1, 3).row(0).to_owned(),
                    input: Array2::zeros((0, 5)),
                };
                s.step(&mut p, &g, 1e-3).unwrap();
            }
            (p, s)
        };
        let (a, b) = (run(), run());
        assert!(a.0.weight.iter().zip(b.0.weight.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn warmup_schedule() {
        assert!((warmup_lr(0, 0.00035, 20) - 0.0000175).abs() < 1e-18);
        assert_eq!(warmup_lr(19, 0.00035, 20), 0.00035);
        assert_eq!(warmup_lr(500, 0.00035, 20), 0.00035);
        assert_eq!(warmup_lr(0, 0.1, 1), 0.1);
    }

    #[test]
    fn ema_endpoints_and_substitution() {
        let s = scalar_params(0.0, 0.0);
        let mut t = scalar_params(1.0, 1.0);
        ema_update(&mut t, &s, EmaConfig::new(0.999).unwrap()).unwrap();
        assert!((t.weight[[0, 0]] - 0.999).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let student = EncoderParams::random(4, 3, &mut rng).unwrap();
        let teacher0 = EncoderParams::random(4, 3, &mut rng).unwrap();
        let mut t = teacher0.clone();
        ema_update(&mut t, &student, EmaConfig::new(0.0).unwrap()).unwrap();
        assert!(t.weight.iter().zip(student.weight.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let mut t = teacher0.clone();
        ema_update(&mut t, &student, EmaConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(t, teacher0);

        let mut t = teacher0.clone();
        ema_update(&mut t, &student, EmaConfig::new(0.7).unwrap()).unwrap();
        for ((new, old), s) in t.weight.iter().zip(teacher0.weight.iter()).zip(student.weight.iter()) {
            assert!(*new >= old.min(*s) - 1e-15 && *new <= old.max(*s) + 1e-15);
        }
        assert!(EmaConfig::new(1.5).is_err());
    }

    #[test]
    fn ema_shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = EncoderParams::random(4, 3, &mut rng).unwrap();
        let s = EncoderParams::random(5, 3, &mut rng).unwrap();
        assert!(ema_update(&mut t, &s, EmaConfig::new(0.5).unwrap()).is_err());
    }

    #[test]
    fn params_json_round_trip_is_exact() {
        let p = EncoderParams::random(3, 2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.starts_with("{\"weight\":[["));
        let back: EncoderParams = serde_json::from_str(&text).unwrap();
        assert!(p.weight.iter().zip(back.weight.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
