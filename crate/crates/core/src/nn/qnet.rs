use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actions::NUM_ACTIONS;
use crate::dovs::{StateVector, GRID_CELLS, GRID_SIZE, SITUATION_LEN, STATE_LEN};
use crate::nn::layers::{dueling_aggregate, dueling_backward, relu_backward, relu_forward, Conv3x3, Dense};
use crate::nn::NnError;
use crate::scalar::Scalar;

/// Layer widths. Fixed once a network is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub situation_units: usize,
    pub trunk_units: usize,
    pub head_units: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            conv1_filters: 16,
            conv2_filters: 32,
            situation_units: 64,
            trunk_units: 256,
            head_units: 128,
        }
    }
}

impl ArchConfig {
    /// Stable identifier written into checkpoints.
    pub fn hash(&self) -> u64 {
        let text = format!(
            "qnet:{}x{}:{}:{}:{}:{}",
            self.conv1_filters, self.conv2_filters, self.situation_units, self.trunk_units, self.head_units, NUM_ACTIONS
        );
        let digest = Sha256::digest(text.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// One named parameter tensor inside the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layers {
    conv1: Conv3x3,
    conv2: Conv3x3,
    situation: Dense,
    trunk: Dense,
    value1: Dense,
    value2: Dense,
    adv1: Dense,
    adv2: Dense,
}

const N_LAYERS: usize = 8;
const NAMES: [&str; N_LAYERS] = ["conv1", "conv2", "situation", "trunk", "value1", "value2", "advantage1", "advantage2"];

impl Layers {
    fn new(a: &ArchConfig) -> Self {
        let conv1 = Conv3x3::new(1, a.conv1_filters, GRID_SIZE, GRID_SIZE, 1);
        let conv2 = Conv3x3::new(a.conv1_filters, a.conv2_filters, conv1.out_h(), conv1.out_w(), 2);
        Self {
            conv1,
            conv2,
            situation: Dense::new(SITUATION_LEN, a.situation_units),
            trunk: Dense::new(conv2.output_len() + a.situation_units, a.trunk_units),
            value1: Dense::new(a.trunk_units, a.head_units),
            value2: Dense::new(a.head_units, 1),
            adv1: Dense::new(a.trunk_units, a.head_units),
            adv2: Dense::new(a.head_units, NUM_ACTIONS),
        }
    }

    /// (weight shape, bias length, fan-in) per layer, in storage order.
    fn shapes(&self) -> [(Vec<usize>, usize, usize); N_LAYERS] {
        let conv = |c: &Conv3x3| (vec![c.out_c, c.in_c, 3, 3], c.out_c, c.patch_len());
        let dense = |d: &Dense| (vec![d.input, d.output], d.output, d.input);
        [
            conv(&self.conv1),
            conv(&self.conv2),
            dense(&self.situation),
            dense(&self.trunk),
            dense(&self.value1),
            dense(&self.value2),
            dense(&self.adv1),
            dense(&self.adv2),
        ]
    }
}

/// Dueling Q-network over the 408-entry state: a two-layer conv stream on
/// the grid, a dense stream on the situation scalars, a shared trunk and
/// separate value and advantage heads. Parameters live in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T> {
    arch: ArchConfig,
    layers: Layers,
    specs: Vec<ParamSpec>,
    params: Vec<T>,
}

/// Activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    situation_in: Vec<T>,
    cols1: Vec<T>,
    h1: Vec<T>,
    cols2: Vec<T>,
    /// Conv features followed by the situation features, per sample.
    z: Vec<T>,
    t: Vec<T>,
    hv: Vec<T>,
    ha: Vec<T>,
    pub value: Vec<T>,
    pub advantage: Vec<T>,
    /// `batch x 8` Q-values.
    pub q: Vec<T>,
}

impl<T> ForwardCache<T> {
    pub fn q_row(&self, b: usize) -> &[T] {
        &self.q[b * NUM_ACTIONS..(b + 1) * NUM_ACTIONS]
    }
}

impl<T: Scalar> QNetwork<T> {
    /// All parameters zero.
    pub fn zeros(arch: ArchConfig) -> Self {
        let layers = Layers::new(&arch);
        let mut specs = Vec::with_capacity(2 * N_LAYERS);
        let mut offset = 0;
        for (name, (wshape, blen, _)) in NAMES.iter().zip(layers.shapes()) {
            let wlen: usize = wshape.iter().product();
            specs.push(ParamSpec {
                name: format!("{name}.weight"),
                shape: wshape,
                offset,
            });
            offset += wlen;
            specs.push(ParamSpec {
                name: format!("{name}.bias"),
                shape: vec![blen],
                offset,
            });
            offset += blen;
        }
        Self {
            arch,
            layers,
            specs,
            params: vec![T::zero(); offset],
        }
    }

    /// He-style uniform weights `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn new<R: Rng + ?Sized>(arch: ArchConfig, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        for (k, (_, _, fan_in)) in net.layers.shapes().into_iter().enumerate() {
            let spec = &net.specs[2 * k];
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[spec.offset..spec.offset + spec.len()] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
        }
        net
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[T]) -> Result<(), NnError> {
        check_len(self.params.len(), values.len())?;
        self.params.copy_from_slice(values);
        Ok(())
    }

    fn wb(&self, layer: usize) -> (&[T], &[T]) {
        let (w, b) = (&self.specs[2 * layer], &self.specs[2 * layer + 1]);
        (&self.params[w.offset..w.offset + w.len()], &self.params[b.offset..b.offset + b.len()])
    }

    fn wb_mut<'a>(&self, grads: &'a mut [T], layer: usize) -> (&'a mut [T], &'a mut [T]) {
        let (w, b) = (&self.specs[2 * layer], &self.specs[2 * layer + 1]);
        let (head, tail) = grads[w.offset..b.offset + b.len()].split_at_mut(w.len());
        (head, tail)
    }

    /// Forward `batch` states laid out back to back (`batch x 408`).
    pub fn forward_batch(&self, input: &[T], batch: usize) -> Result<ForwardCache<T>, NnError> {
        check_len(batch * STATE_LEN, input.len())?;
        let l = &self.layers;
        let zero = |n: usize| vec![T::zero(); n];
        let mut grid = Vec::with_capacity(batch * GRID_CELLS);
        let mut situation_in = Vec::with_capacity(batch * SITUATION_LEN);
        for row in input.chunks_exact(STATE_LEN) {
            grid.extend_from_slice(&row[..GRID_CELLS]);
            situation_in.extend_from_slice(&row[GRID_CELLS..]);
        }

        let mut cols1 = zero(batch * l.conv1.cols_len());
        let mut h1 = zero(batch * l.conv1.output_len());
        let (w, b) = self.wb(0);
        l.conv1.forward(w, b, &grid, batch, &mut cols1, &mut h1);
        relu_forward(&mut h1);

        let mut cols2 = zero(batch * l.conv2.cols_len());
        let mut h2 = zero(batch * l.conv2.output_len());
        let (w, b) = self.wb(1);
        l.conv2.forward(w, b, &h1, batch, &mut cols2, &mut h2);
        relu_forward(&mut h2);

        let mut s = zero(batch * l.situation.output);
        let (w, b) = self.wb(2);
        l.situation.forward(w, b, &situation_in, batch, &mut s);
        relu_forward(&mut s);

        let (nh, ns) = (l.conv2.output_len(), l.situation.output);
        let mut z = Vec::with_capacity(batch * (nh + ns));
        for k in 0..batch {
            z.extend_from_slice(&h2[k * nh..(k + 1) * nh]);
            z.extend_from_slice(&s[k * ns..(k + 1) * ns]);
        }

        let mut t = zero(batch * l.trunk.output);
        let (w, b) = self.wb(3);
        l.trunk.forward(w, b, &z, batch, &mut t);
        relu_forward(&mut t);

        let mut hv = zero(batch * l.value1.output);
        let (w, b) = self.wb(4);
        l.value1.forward(w, b, &t, batch, &mut hv);
        relu_forward(&mut hv);
        let mut value = zero(batch);
        let (w, b) = self.wb(5);
        l.value2.forward(w, b, &hv, batch, &mut value);

        let mut ha = zero(batch * l.adv1.output);
        let (w, b) = self.wb(6);
        l.adv1.forward(w, b, &t, batch, &mut ha);
        relu_forward(&mut ha);
        let mut advantage = zero(batch * NUM_ACTIONS);
        let (w, b) = self.wb(7);
        l.adv2.forward(w, b, &ha, batch, &mut advantage);

        let mut q = Vec::with_capacity(batch * NUM_ACTIONS);
        for k in 0..batch {
            q.extend(dueling_aggregate(value[k], &advantage[k * NUM_ACTIONS..(k + 1) * NUM_ACTIONS]));
        }

        Ok(ForwardCache {
            batch,
            situation_in,
            cols1,
            h1,
            cols2,
            z,
            t,
            hv,
            ha,
            value,
            advantage,
            q,
        })
    }

    /// Add the gradient of `sum_b sum_a dq[b,a] * Q[b,a]` to `grads`.
    pub fn backward(&self, cache: &ForwardCache<T>, dq: &[T], grads: &mut [T]) -> Result<(), NnError> {
        let batch = cache.batch;
        check_len(batch * NUM_ACTIONS, dq.len())?;
        check_len(self.params.len(), grads.len())?;
        let l = &self.layers;
        let zero = |n: usize| vec![T::zero(); n];

        let mut dv = zero(batch);
        let mut da = zero(batch * NUM_ACTIONS);
        for k in 0..batch {
            let (v, a) = dueling_backward(&dq[k * NUM_ACTIONS..(k + 1) * NUM_ACTIONS]);
            dv[k] = v;
            da[k * NUM_ACTIONS..(k + 1) * NUM_ACTIONS].copy_from_slice(&a);
        }

        let mut dha = zero(batch * l.adv2.input);
        let (gw, gb) = self.wb_mut(grads, 7);
        l.adv2.backward(self.wb(7).0, &cache.ha, &da, batch, gw, gb, Some(&mut dha));
        relu_backward(&cache.ha, &mut dha);
        let mut dt = zero(batch * l.trunk.output);
        let (gw, gb) = self.wb_mut(grads, 6);
        l.adv1.backward(self.wb(6).0, &cache.t, &dha, batch, gw, gb, Some(&mut dt));

        let mut dhv = zero(batch * l.value2.input);
        let (gw, gb) = self.wb_mut(grads, 5);
        l.value2.backward(self.wb(5).0, &cache.hv, &dv, batch, gw, gb, Some(&mut dhv));
        relu_backward(&cache.hv, &mut dhv);
        let mut dt_v = zero(batch * l.trunk.output);
        let (gw, gb) = self.wb_mut(grads, 4);
        l.value1.backward(self.wb(4).0, &cache.t, &dhv, batch, gw, gb, Some(&mut dt_v));
        for (d, e) in dt.iter_mut().zip(&dt_v) {
            *d += *e;
        }
        relu_backward(&cache.t, &mut dt);

        let mut dz = zero(batch * l.trunk.input);
        let (gw, gb) = self.wb_mut(grads, 3);
        l.trunk.backward(self.wb(3).0, &cache.z, &dt, batch, gw, gb, Some(&mut dz));
        relu_backward(&cache.z, &mut dz);

        let (nh, ns) = (l.conv2.output_len(), l.situation.output);
        let mut dh2 = Vec::with_capacity(batch * nh);
        let mut ds = Vec::with_capacity(batch * ns);
        for row in dz.chunks_exact(nh + ns) {
            dh2.extend_from_slice(&row[..nh]);
            ds.extend_from_slice(&row[nh..]);
        }

        let (gw, gb) = self.wb_mut(grads, 2);
        l.situation.backward(self.wb(2).0, &cache.situation_in, &ds, batch, gw, gb, None);

        let mut dh1 = zero(batch * l.conv2.input_len());
        let (gw, gb) = self.wb_mut(grads, 1);
        l.conv2.backward(self.wb(1).0, &cache.cols2, &dh2, batch, gw, gb, Some(&mut dh1));
        relu_backward(&cache.h1, &mut dh1);
        let (gw, gb) = self.wb_mut(grads, 0);
        l.conv1.backward(self.wb(0).0, &cache.cols1, &dh1, batch, gw, gb, None);
        Ok(())
    }

    /// Q-values of one state.
    pub fn q_values(&self, state: &StateVector<T>) -> [T; NUM_ACTIONS] {
        let cache = self.forward_batch(&state.to_vec(), 1).expect("state has the network input length");
        cache.q.try_into().expect("eight outputs")
    }

    /// Whether every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), NnError> {
    if expected == got {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch { expected, got })
    }
}

/// Single-state forward pass.
pub fn qnet_forward<T: Scalar>(
    net: &QNetwork<T>,
    state: &[T],
) -> Result<([T; NUM_ACTIONS], ForwardCache<T>), NnError> {
    check_len(STATE_LEN, state.len())?;
    let cache = net.forward_batch(state, 1)?;
    let q = cache.q.clone().try_into().expect("eight outputs");
    Ok((q, cache))
}

/// Parameter gradients for an output gradient, as a fresh buffer.
pub fn qnet_backward<T: Scalar>(net: &QNetwork<T>, cache: &ForwardCache<T>, dq: &[T]) -> Result<Vec<T>, NnError> {
    let mut grads = vec![T::zero(); net.param_count()];
    net.backward(cache, dq, &mut grads)?;
    Ok(grads)
}
