//! The pooling-free residual FCN: a 3-channel stem convolution, a stack of
//! pre-activation residual blocks, and a one-channel sigmoid head. Every
//! layer keeps the spatial size of its input.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{
    bce_grad, bce_loss, relu, relu_backward, sigmoid, sigmoid_backward, BatchNorm,
    BatchNormCache, Conv3x3,
};
use super::tensor::Tensor4;
use crate::codec::GridTensor;
use crate::error::{Error, Result};

pub const INPUT_CHANNELS: usize = 3;
pub const DEFAULT_BLOCKS: usize = 13;

/// `bnorm -> relu -> conv -> bnorm -> relu -> conv`, plus the identity
/// shortcut.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub bn1: BatchNorm,
    pub conv1: Conv3x3,
    pub bn2: BatchNorm,
    pub conv2: Conv3x3,
}

impl ResidualBlock {
    fn new(filters: usize) -> Self {
        Self {
            bn1: BatchNorm::new(filters),
            conv1: Conv3x3::new(filters, filters),
            bn2: BatchNorm::new(filters),
            conv2: Conv3x3::new(filters, filters),
        }
    }

    fn forward_eval(&self, x: &Tensor4) -> Result<Tensor4> {
        let a1 = relu(&self.bn1.forward_eval(x)?);
        let c1 = self.conv1.forward(&a1)?;
        let a2 = relu(&self.bn2.forward_eval(&c1)?);
        let mut out = self.conv2.forward(&a2)?;
        add_in_place(&mut out, x);
        Ok(out)
    }
}

/// One entry of the flattened architecture description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Relu,
    ResidualAdd,
    Sigmoid,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    filters: usize,
    pub stem: Conv3x3,
    pub blocks: Vec<ResidualBlock>,
    pub head_bn: BatchNorm,
    pub head: Conv3x3,
    tape: Option<Tape>,
}

#[derive(Debug, Clone)]
struct BlockTape {
    input: Tensor4,
    bn1: BatchNormCache,
    a1: Tensor4,
    bn2: BatchNormCache,
    a2: Tensor4,
}

#[derive(Debug, Clone)]
struct Tape {
    input: Tensor4,
    stem_act: Tensor4,
    blocks: Vec<BlockTape>,
    trunk: Tensor4,
    head_bn: BatchNormCache,
    head_act: Tensor4,
    prob: Tensor4,
}

// Recorded activations are transient; models compare by parameters and
// running statistics only.
impl PartialEq for NetworkModel {
    fn eq(&self, other: &Self) -> bool {
        self.filters == other.filters
            && self.stem == other.stem
            && self.blocks == other.blocks
            && self.head_bn == other.head_bn
            && self.head == other.head
    }
}

/// Gradients in [`NetworkModel::visit_params`] order, plus the gradient with
/// respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<Vec<f32>>,
    pub input: Tensor4,
}

fn add_in_place(acc: &mut Tensor4, x: &Tensor4) {
    for (a, b) in acc.data.iter_mut().zip(&x.data) {
        *a += b;
    }
}

impl NetworkModel {
    /// Zero-initialized model with `filters` channels and `blocks` residual
    /// blocks. Use [`NetworkModel::xavier_init`] before training.
    pub fn new(filters: usize, blocks: usize) -> Result<Self> {
        if filters == 0 {
            return Err(Error::InvalidArgument("filters must be positive".into()));
        }
        Ok(Self {
            filters,
            stem: Conv3x3::new(INPUT_CHANNELS, filters),
            blocks: (0..blocks).map(|_| ResidualBlock::new(filters)).collect(),
            head_bn: BatchNorm::new(filters),
            head: Conv3x3::new(filters, 1),
            tape: None,
        })
    }

    /// Fresh model with Xavier-uniform weights, zero biases, unit scales.
    pub fn initialized(filters: usize, blocks: usize, seed: u64) -> Result<Self> {
        let mut model = Self::new(filters, blocks)?;
        model.xavier_init(seed);
        Ok(model)
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Conv weights ~ U(-a, a), `a = sqrt(6 / (fan_in + fan_out))` with fans
    /// counted as `3 * 3 * channels`; biases 0, `gamma` 1, `beta` 0, running
    /// stats reset to mean 0 / variance 1.
    pub fn xavier_init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init_conv = |conv: &mut Conv3x3| {
            let a = xavier_bound(conv.cin, conv.cout);
            let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
            conv.weight.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
            conv.bias.iter_mut().for_each(|b| *b = 0.0);
        };
        init_conv(&mut self.stem);
        for block in &mut self.blocks {
            init_conv(&mut block.conv1);
            init_conv(&mut block.conv2);
        }
        init_conv(&mut self.head);
        let filters = self.filters;
        for block in &mut self.blocks {
            block.bn1 = BatchNorm::new(filters);
            block.bn2 = BatchNorm::new(filters);
        }
        self.head_bn = BatchNorm::new(filters);
        self.tape = None;
    }

    /// Trainable tensors in their fixed order.
    pub fn visit_params(&self, mut f: impl FnMut(&[f32])) {
        f(&self.stem.weight);
        f(&self.stem.bias);
        for b in &self.blocks {
            f(&b.bn1.gamma);
            f(&b.bn1.beta);
            f(&b.conv1.weight);
            f(&b.conv1.bias);
            f(&b.bn2.gamma);
            f(&b.bn2.beta);
            f(&b.conv2.weight);
            f(&b.conv2.bias);
        }
        f(&self.head_bn.gamma);
        f(&self.head_bn.beta);
        f(&self.head.weight);
        f(&self.head.bias);
    }

    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut [f32])) {
        f(&mut self.stem.weight);
        f(&mut self.stem.bias);
        for b in &mut self.blocks {
            f(&mut b.bn1.gamma);
            f(&mut b.bn1.beta);
            f(&mut b.conv1.weight);
            f(&mut b.conv1.bias);
            f(&mut b.bn2.gamma);
            f(&mut b.bn2.beta);
            f(&mut b.conv2.weight);
            f(&mut b.conv2.bias);
        }
        f(&mut self.head_bn.gamma);
        f(&mut self.head_bn.beta);
        f(&mut self.head.weight);
        f(&mut self.head.bias);
    }

    /// Running mean/variance buffers in their fixed order.
    pub fn visit_running_stats(&self, mut f: impl FnMut(&[f32])) {
        for b in &self.blocks {
            f(&b.bn1.running_mean);
            f(&b.bn1.running_var);
            f(&b.bn2.running_mean);
            f(&b.bn2.running_var);
        }
        f(&self.head_bn.running_mean);
        f(&self.head_bn.running_var);
    }

    pub fn visit_running_stats_mut(&mut self, mut f: impl FnMut(&mut [f32])) {
        for b in &mut self.blocks {
            f(&mut b.bn1.running_mean);
            f(&mut b.bn1.running_var);
            f(&mut b.bn2.running_mean);
            f(&mut b.bn2.running_var);
        }
        f(&mut self.head_bn.running_mean);
        f(&mut self.head_bn.running_var);
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        let mut shapes = Vec::new();
        self.visit_params(|p| shapes.push(p.len()));
        shapes
    }

    pub fn trainable_count(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn running_stat_count(&self) -> usize {
        let mut n = 0;
        self.visit_running_stats(|s| n += s.len());
        n
    }

    /// Weights, biases, batch-norm scales and shifts, and running statistics.
    pub fn count_parameters(&self) -> usize {
        self.trainable_count() + self.running_stat_count()
    }

    /// Flattened layer list in execution order.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let conv = |c: &Conv3x3| LayerSpec::Conv {
            cin: c.cin,
            cout: c.cout,
            kernel: 3,
            stride: 1,
            padding: 1,
        };
        let bn = |b: &BatchNorm| LayerSpec::BatchNorm {
            channels: b.channels,
        };
        let mut out = vec![conv(&self.stem), LayerSpec::Relu];
        for b in &self.blocks {
            out.extend([
                bn(&b.bn1),
                LayerSpec::Relu,
                conv(&b.conv1),
                bn(&b.bn2),
                LayerSpec::Relu,
                conv(&b.conv2),
                LayerSpec::ResidualAdd,
            ]);
        }
        out.extend([bn(&self.head_bn), LayerSpec::Relu, conv(&self.head), LayerSpec::Sigmoid]);
        out
    }

    /// Theoretical receptive field side of the stacked 3x3 stride-1 convs.
    pub fn receptive_field(&self) -> usize {
        let convs = self
            .layer_specs()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv { .. }))
            .count();
        1 + 2 * convs
    }

    fn check_input(&self, x: &Tensor4) -> Result<()> {
        if x.k != INPUT_CHANNELS {
            return Err(Error::mismatch(
                format!("{INPUT_CHANNELS} input channels"),
                format!("{} channels", x.k),
            ));
        }
        if x.is_empty() {
            return Err(Error::InvalidArgument("empty input batch".into()));
        }
        x.ensure_finite("network input")
    }

    /// Inference with running batch-norm statistics.
    pub fn forward_eval(&self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        let mut h = relu(&self.stem.forward(x)?);
        for block in &self.blocks {
            h = block.forward_eval(&h)?;
        }
        let a = relu(&self.head_bn.forward_eval(&h)?);
        let out = sigmoid(&self.head.forward(&a)?);
        out.ensure_finite("network output")?;
        Ok(out)
    }

    /// Training-mode forward pass. Uses batch statistics, updates running
    /// statistics, and records what [`NetworkModel::backward`] needs.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<Tensor4> {
        self.check_input(x)?;
        self.tape = None;
        let stem_act = relu(&self.stem.forward(x)?);
        let mut h = stem_act.clone();
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let (n1, bn1) = block.bn1.forward_train(&h)?;
            let a1 = relu(&n1);
            let c1 = block.conv1.forward(&a1)?;
            let (n2, bn2) = block.bn2.forward_train(&c1)?;
            let a2 = relu(&n2);
            let mut out = block.conv2.forward(&a2)?;
            add_in_place(&mut out, &h);
            blocks.push(BlockTape {
                input: h,
                bn1,
                a1,
                bn2,
                a2,
            });
            h = out;
        }
        let (nh, head_bn) = self.head_bn.forward_train(&h)?;
        let head_act = relu(&nh);
        let prob = sigmoid(&self.head.forward(&head_act)?);
        prob.ensure_finite("network output")?;
        self.tape = Some(Tape {
            input: x.clone(),
            stem_act,
            blocks,
            trunk: h,
            head_bn,
            head_act,
            prob: prob.clone(),
        });
        Ok(prob)
    }

    /// Which ReLU units were active in the last recorded training pass.
    /// Finite-difference checks use it to discard perturbations that cross a
    /// kink.
    #[doc(hidden)]
    pub fn relu_pattern(&self) -> Option<Vec<bool>> {
        let tape = self.tape.as_ref()?;
        let mut out = Vec::new();
        let mut push = |t: &Tensor4| out.extend(t.data.iter().map(|&v| v > 0.0));
        push(&tape.stem_act);
        for b in &tape.blocks {
            push(&b.a1);
            push(&b.a2);
        }
        push(&tape.head_act);
        Some(out)
    }

    /// Reverse pass for the last [`NetworkModel::forward_train`], given the
    /// gradient of the loss with respect to the output probabilities. The
    /// recorded pass is consumed.
    pub fn backward(&mut self, dprob: &Tensor4) -> Result<Gradients> {
        let tape = self.tape.take().ok_or(Error::NoForwardPass)?;
        tape.prob.same_shape(dprob)?;
        let mut grads: Vec<Vec<f32>> = Vec::new();
        // Collected in reverse and flipped at the end.
        let dz = sigmoid_backward(&tape.prob, dprob);
        let (da, dw, db) = self.head.backward(&tape.head_act, &dz)?;
        grads.push(db);
        grads.push(dw);
        let dn = relu_backward(&tape.head_act, &da);
        let (mut dh, dgamma, dbeta) = self.head_bn.backward(&tape.head_bn, &dn);
        grads.push(dbeta);
        grads.push(dgamma);
        debug_assert_eq!(dh.shape(), tape.trunk.shape());

        for (block, bt) in self.blocks.iter().zip(&tape.blocks).rev() {
            let (da2, dw2, db2) = block.conv2.backward(&bt.a2, &dh)?;
            let dn2 = relu_backward(&bt.a2, &da2);
            let (dc1, dg2, dbt2) = block.bn2.backward(&bt.bn2, &dn2);
            let (da1, dw1, db1) = block.conv1.backward(&bt.a1, &dc1)?;
            let dn1 = relu_backward(&bt.a1, &da1);
            let (dpath, dg1, dbt1) = block.bn1.backward(&bt.bn1, &dn1);
            debug_assert_eq!(dpath.shape(), bt.input.shape());
            add_in_place(&mut dh, &dpath);
            grads.extend([db2, dw2, dbt2, dg2, db1, dw1, dbt1, dg1]);
        }

        let dstem = relu_backward(&tape.stem_act, &dh);
        let (dx, dw, db) = self.stem.backward(&tape.input, &dstem)?;
        grads.push(db);
        grads.push(dw);
        grads.reverse();
        Ok(Gradients {
            params: grads,
            input: dx,
        })
    }

    /// Training-mode forward, mean BCE against `target`, and full backward.
    pub fn loss_and_gradients(&mut self, x: &Tensor4, target: &Tensor4) -> Result<(f64, Gradients)> {
        let prob = self.forward_train(x)?;
        let loss = bce_loss(&prob, target)?;
        if !loss.is_finite() {
            self.tape = None;
            return Err(Error::NonFinite(format!("training loss {loss}")));
        }
        let dprob = bce_grad(&prob, target)?;
        let grads = self.backward(&dprob)?;
        Ok((loss, grads))
    }

    /// Runs the network on one encoded grid and returns the one-channel
    /// saliency tensor.
    pub fn predict_grid(&self, input: &GridTensor) -> Result<GridTensor> {
        let x = Tensor4::from_vec(1, input.rows(), input.cols(), input.channels(), input.data().to_vec())?;
        let y = self.forward_eval(&x)?;
        GridTensor::new(input.rows(), input.cols(), 1, y.data)
    }
}

pub fn xavier_bound(cin: usize, cout: usize) -> f32 {
    (6.0 / ((9 * cin + 9 * cout) as f64)).sqrt() as f32
}
