use std::path::Path;

use rand::Rng;

use crate::binio::{read_file, FrameReader, FrameWriter};
use crate::error::{FacError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum OutputActivation {
    Identity,
    /// `tanh` rescaled onto `[low, high]` per output.
    ScaledTanh { low: Vec<f64>, high: Vec<f64> },
}

/// Fully connected network with `tanh` hidden layers.
///
/// All weights and biases live in one flat vector, layer after layer; each
/// layer stores its `out x in` weight matrix row-major followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    output: OutputActivation,
}

/// Activations recorded during a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Raw `tanh` of the output layer when it is scaled.
    out_tanh: Option<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace always holds the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_out * fan_in + fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_out * fan_in + fan_out;
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(FacError::InvalidConfig(format!("bad layer widths {sizes:?}")));
        }
        if let OutputActivation::ScaledTanh { low, high } = &output {
            let n = *sizes.last().unwrap();
            if low.len() != n || high.len() != n || low.iter().zip(high).any(|(l, h)| !(l < h)) {
                return Err(FacError::InvalidConfig("bad output bounds".into()));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
            output,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> &OutputActivation {
        &self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Offsets of the weight block and bias block of layer `l`.
    fn layer(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut offset = 0;
        for w in self.sizes.windows(2).take(l) {
            offset += w[1] * w[0] + w[1];
        }
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        (offset, offset + n_out * n_in, n_in, n_out)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.acts.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(FacError::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut out_tanh = None;
        for l in 0..n_layers {
            let (w0, b0, n_in, n_out) = self.layer(l);
            let input = &acts[l];
            let mut z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.params[w0 + o * n_in..w0 + (o + 1) * n_in];
                    row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + self.params[b0 + o]
                })
                .collect();
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            } else if let OutputActivation::ScaledTanh { low, high } = &self.output {
                let t: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
                for (i, v) in z.iter_mut().enumerate() {
                    let mid = 0.5 * (high[i] + low[i]);
                    let half = 0.5 * (high[i] - low[i]);
                    *v = mid + half * t[i];
                }
                out_tanh = Some(t);
            }
            acts.push(z);
        }
        Ok(Trace { acts, out_tanh })
    }

    /// Backpropagates `upstream = dL/d(output)`. Parameter gradients are added
    /// into `param_grad` when given; the input gradient is returned.
    pub fn backward(
        &self,
        trace: &Trace,
        upstream: &[f64],
        mut param_grad: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(FacError::ShapeMismatch {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        if let Some(g) = param_grad.as_deref() {
            if g.len() != self.params.len() {
                return Err(FacError::ShapeMismatch {
                    expected: self.params.len(),
                    got: g.len(),
                });
            }
        }
        let n_layers = self.sizes.len() - 1;
        let mut delta: Vec<f64> = match (&self.output, &trace.out_tanh) {
            (OutputActivation::ScaledTanh { low, high }, Some(t)) => upstream
                .iter()
                .enumerate()
                .map(|(i, u)| u * 0.5 * (high[i] - low[i]) * (1.0 - t[i] * t[i]))
                .collect(),
            _ => upstream.to_vec(),
        };
        for l in (0..n_layers).rev() {
            let (w0, b0, n_in, n_out) = self.layer(l);
            let input = &trace.acts[l];
            if let Some(g) = param_grad.as_deref_mut() {
                for o in 0..n_out {
                    let d = delta[o];
                    let row = &mut g[w0 + o * n_in..w0 + (o + 1) * n_in];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                    g[b0 + o] += d;
                }
            }
            let mut next = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &self.params[w0 + o * n_in..w0 + (o + 1) * n_in];
                for (acc, w) in next.iter_mut().zip(row) {
                    *acc += w * d;
                }
            }
            if l > 0 {
                for (v, a) in next.iter_mut().zip(input) {
                    *v *= 1.0 - a * a;
                }
            }
            delta = next;
        }
        Ok(delta)
    }

    /// Parameter gradient and input gradient of `upstream . f(x)`.
    pub fn gradient(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let trace = self.forward_trace(x)?;
        let mut g = vec![0.0; self.params.len()];
        let input_grad = self.backward(&trace, upstream, Some(&mut g))?;
        Ok((g, input_grad))
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        debug_assert_eq!(self.sizes, online.sizes);
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FrameWriter::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        w.u32(self.sizes.len() as u32);
        for &s in &self.sizes {
            w.u32(s as u32);
        }
        match &self.output {
            OutputActivation::Identity => w.u8(0),
            OutputActivation::ScaledTanh { low, high } => {
                w.u8(1);
                w.f64s(low);
                w.f64s(high);
            }
        }
        w.f64s(&self.params);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = FrameReader::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let n = r.u32()? as usize;
        r.ensure(n, 4)?;
        let sizes = (0..n).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let out_dim = sizes.last().copied().unwrap_or(0);
        let output = match r.u8()? {
            0 => OutputActivation::Identity,
            1 => OutputActivation::ScaledTanh {
                low: r.f64s(out_dim)?,
                high: r.f64s(out_dim)?,
            },
            t => return Err(FacError::Format(format!("unknown output activation {t}"))),
        };
        let mut net = Self::zeros(&sizes, output).map_err(|e| FacError::Format(e.to_string()))?;
        let count = net.params.len();
        net.params = r.f64s(count)?;
        r.finish()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FACP";
const CHECKPOINT_VERSION: u32 = 1;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_output_final_bias() {
        let mut net = Mlp::zeros(&[3, 4, 2], OutputActivation::Identity).unwrap();
        let n = net.params().len();
        net.params_mut()[n - 2] = 0.7;
        net.params_mut()[n - 1] = -1.5;
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.7, -1.5]);
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[3, 2], OutputActivation::Identity, &mut rng).unwrap();
        let x = [0.5, -1.0, 2.0];
        let up = [1.5, -0.25];
        let (g, gx) = net.gradient(&x, &up).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert!((g[o * 3 + i] - up[o] * x[i]).abs() < 1e-15);
            }
            assert_eq!(g[6 + o], up[o]);
        }
        for i in 0..3 {
            let expected = net.params()[i] * up[0] + net.params()[3 + i] * up[1];
            assert!((gx[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch() {
        let net = Mlp::zeros(&[3, 2], OutputActivation::Identity).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(FacError::ShapeMismatch { .. })));
        let t = net.forward_trace(&[1.0, 2.0, 3.0]).unwrap();
        assert!(net.backward(&t, &[1.0], None).is_err());
    }

    #[test]
    fn scaled_tanh_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = OutputActivation::ScaledTanh {
            low: vec![-2.0],
            high: vec![2.0],
        };
        let mut net = Mlp::new(&[2, 8, 1], out, &mut rng).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p *= 50.0);
        let y = net.forward(&[3.0, -4.0]).unwrap()[0];
        assert!((-2.0..=2.0).contains(&y));
    }

    #[test]
    fn soft_update_tau_one_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Mlp::new(&[2, 3, 1], OutputActivation::Identity, &mut rng).unwrap();
        let mut b = Mlp::new(&[2, 3, 1], OutputActivation::Identity, &mut rng).unwrap();
        b.soft_update_from(&a, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = OutputActivation::ScaledTanh {
            low: vec![-1.0, -2.0],
            high: vec![1.0, 3.0],
        };
        let net = Mlp::new(&[4, 5, 2], out, &mut rng).unwrap();
        let bytes = net.to_bytes();
        assert_eq!(Mlp::from_bytes(&bytes).unwrap(), net);
        let mut bad = bytes.clone();
        let mid = bad.len() / 2;
        bad[mid] ^= 1;
        assert!(matches!(
            Mlp::from_bytes(&bad),
            Err(FacError::CorruptSnapshot { .. })
        ));
        assert!(matches!(
            Mlp::from_bytes(&bytes[..bytes.len() - 5]),
            Err(FacError::Format(_))
        ));
    }
}
