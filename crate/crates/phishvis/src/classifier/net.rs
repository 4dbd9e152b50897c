//! Layer kernels and backpropagation for the small CNN.
//!
//! Everything is f64 and single-threaded: training must be bit-reproducible
//! from a seed, and 64-bit floats keep the finite-difference gradient checks
//! tight. Convolutions are expressed as shift-and-accumulate over contiguous
//! row slices, which the compiler vectorizes well enough to train the
//! production net on a desktop CPU in minutes.

use crate::rng::Rng;

/// One activation buffer: `c` channel planes of `h` x `w`, row-major.
/// Dense activations use `h = w = 1`.
#[derive(Debug, Clone)]
pub(crate) struct Act {
    pub data: Vec<f64>,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Act {
    pub fn new(c: usize, h: usize, w: usize) -> Act {
        Act {
            data: vec![0.0; c * h * w],
            c,
            h,
            w,
        }
    }

    pub fn flat(data: Vec<f64>) -> Act {
        let c = data.len();
        Act { data, c, h: 1, w: 1 }
    }
}

/// 3x3 convolution, stride 1, zero padding 1 (shape preserving).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvLayer {
    pub in_c: usize,
    pub out_c: usize,
    /// `[out_c][in_c][3][3]`
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim][in_dim]`
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Conv(ConvLayer),
    Relu,
    MaxPool2,
    Flatten,
    Dense(DenseLayer),
}

impl Layer {
    pub fn conv(in_c: usize, out_c: usize, rng: &mut Rng) -> Layer {
        let fan_in = in_c * 9;
        let std = (2.0 / fan_in as f64).sqrt();
        let weights = (0..out_c * in_c * 9).map(|_| rng.normal() * std).collect();
        Layer::Conv(ConvLayer {
            in_c,
            out_c,
            weights,
            biases: vec![0.0; out_c],
        })
    }

    pub fn dense(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Layer {
        let std = (2.0 / in_dim as f64).sqrt();
        let weights = (0..out_dim * in_dim).map(|_| rng.normal() * std).collect();
        Layer::Dense(DenseLayer {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        })
    }
}

/// An ordered layer stack with a fixed input shape.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Network {
    pub input_c: usize,
    pub input_side: usize,
    pub layers: Vec<Layer>,
}

/// Per-parametric-layer gradient buffers, parallel to `Network::layers`.
#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub per_layer: Vec<Option<ParamGrad>>,
}

#[derive(Debug, Clone)]
pub(crate) struct ParamGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Gradients {
        let per_layer = net
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv(c) => Some(ParamGrad {
                    weights: vec![0.0; c.weights.len()],
                    biases: vec![0.0; c.biases.len()],
                }),
                Layer::Dense(d) => Some(ParamGrad {
                    weights: vec![0.0; d.weights.len()],
                    biases: vec![0.0; d.biases.len()],
                }),
                _ => None,
            })
            .collect();
        Gradients { per_layer }
    }
}

impl Network {
    /// Run the full stack, returning every activation. `acts[0]` is the
    /// input, `acts[len]` the logits.
    pub fn forward_full(&self, input: &Act) -> Vec<Act> {
        assert_eq!(input.c, self.input_c);
        assert_eq!(input.h, self.input_side);
        assert_eq!(input.w, self.input_side);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for layer in &self.layers {
            let prev = acts.last().unwrap();
            let next = match layer {
                Layer::Conv(conv) => conv_forward(conv, prev),
                Layer::Relu => relu_forward(prev),
                Layer::MaxPool2 => pool_forward(prev),
                Layer::Flatten => Act::flat(prev.data.clone()),
                Layer::Dense(dense) => dense_forward(dense, prev),
            };
            acts.push(next);
        }
        acts
    }

    /// Backpropagate `d_logits` through the stack, accumulating parameter
    /// gradients into `grads` (scaled gradients add across a batch).
    pub fn backward_accumulate(&self, acts: &[Act], d_logits: Vec<f64>, grads: &mut Gradients) {
        let mut grad = Act::flat(d_logits);
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[idx];
            let output = &acts[idx + 1];
            grad = match layer {
                Layer::Conv(conv) => {
                    let pg = grads.per_layer[idx].as_mut().unwrap();
                    conv_backward(conv, input, &grad, pg)
                }
                Layer::Relu => relu_backward(output, grad),
                Layer::MaxPool2 => pool_backward(input, &grad),
                Layer::Flatten => Act {
                    data: grad.data,
                    c: input.c,
                    h: input.h,
                    w: input.w,
                },
                Layer::Dense(dense) => {
                    let pg = grads.per_layer[idx].as_mut().unwrap();
                    dense_backward(dense, input, &grad, pg)
                }
            };
        }
    }

    /// Apply one plain SGD step: `w -= lr * g`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, pg) in self.layers.iter_mut().zip(&grads.per_layer) {
            let (weights, biases) = match layer {
                Layer::Conv(c) => (&mut c.weights, &mut c.biases),
                Layer::Dense(d) => (&mut d.weights, &mut d.biases),
                _ => continue,
            };
            let pg = pg.as_ref().unwrap();
            for (w, g) in weights.iter_mut().zip(&pg.weights) {
                *w -= lr * g;
            }
            for (b, g) in biases.iter_mut().zip(&pg.biases) {
                *b -= lr * g;
            }
        }
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Cross-entropy of the true class under a softmax distribution.
pub(crate) fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(1e-300).ln()
}

fn conv_forward(conv: &ConvLayer, input: &Act) -> Act {
    let (h, w) = (input.h, input.w);
    let hw = h * w;
    let mut out = Act::new(conv.out_c, h, w);
    for oc in 0..conv.out_c {
        let out_plane = &mut out.data[oc * hw..(oc + 1) * hw];
        out_plane.fill(conv.biases[oc]);
        for ic in 0..conv.in_c {
            let in_plane = &input.data[ic * hw..(ic + 1) * hw];
            let wbase = (oc * conv.in_c + ic) * 9;
            for ky in 0..3 {
                for kx in 0..3 {
                    let weight = conv.weights[wbase + ky * 3 + kx];
                    shifted_axpy(out_plane, in_plane, weight, h, w, ky as isize - 1, kx as isize - 1);
                }
            }
        }
    }
    out
}

/// `out[y][x] += weight * inp[y + dy][x + dx]` over the valid region.
fn shifted_axpy(out: &mut [f64], inp: &[f64], weight: f64, h: usize, w: usize, dy: isize, dx: isize) {
    let y0 = usize::from(dy < 0);
    let y1 = if dy > 0 { h - 1 } else { h };
    let x0 = usize::from(dx < 0);
    let x1 = if dx > 0 { w - 1 } else { w };
    if y0 >= y1 || x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let iy = (y as isize + dy) as usize;
        let ix0 = (x0 as isize + dx) as usize;
        let ix1 = (x1 as isize + dx) as usize;
        let out_row = &mut out[y * w + x0..y * w + x1];
        let in_row = &inp[iy * w + ix0..iy * w + ix1];
        for (o, &i) in out_row.iter_mut().zip(in_row) {
            *o += weight * i;
        }
    }
}

/// Dot of the valid overlap between `a` shifted by `(dy, dx)` and `b`.
fn shifted_dot(a: &[f64], b: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let y0 = usize::from(dy < 0);
    let y1 = if dy > 0 { h - 1 } else { h };
    let x0 = usize::from(dx < 0);
    let x1 = if dx > 0 { w - 1 } else { w };
    if y0 >= y1 || x0 >= x1 {
        return 0.0;
    }
    let mut sum = 0.0;
    for y in y0..y1 {
        let iy = (y as isize + dy) as usize;
        let ix0 = (x0 as isize + dx) as usize;
        let ix1 = (x1 as isize + dx) as usize;
        let a_row = &a[iy * w + ix0..iy * w + ix1];
        let b_row = &b[y * w + x0..y * w + x1];
        sum += a_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
    }
    sum
}

fn conv_backward(conv: &ConvLayer, input: &Act, grad_out: &Act, pg: &mut ParamGrad) -> Act {
    let (h, w) = (input.h, input.w);
    let hw = h * w;
    let mut grad_in = Act::new(conv.in_c, h, w);
    for oc in 0..conv.out_c {
        let g_plane = &grad_out.data[oc * hw..(oc + 1) * hw];
        pg.biases[oc] += g_plane.iter().sum::<f64>();
        for ic in 0..conv.in_c {
            let in_plane = &input.data[ic * hw..(ic + 1) * hw];
            let gi_plane = &mut grad_in.data[ic * hw..(ic + 1) * hw];
            let wbase = (oc * conv.in_c + ic) * 9;
            for ky in 0..3 {
                for kx in 0..3 {
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    // dW = correlation of input against the output gradient
                    pg.weights[wbase + ky * 3 + kx] += shifted_dot(in_plane, g_plane, h, w, dy, dx);
                    // dX spreads the output gradient back through the tap:
                    // forward read in[y+dy][x+dx], so here in-gradient at
                    // [y'][x'] collects g at [y'-dy][x'-dx]
                    shifted_axpy(gi_plane, g_plane, conv.weights[wbase + ky * 3 + kx], h, w, -dy, -dx);
                }
            }
        }
    }
    grad_in
}

fn relu_forward(input: &Act) -> Act {
    let mut out = input.clone();
    for v in &mut out.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

fn relu_backward(output: &Act, mut grad: Act) -> Act {
    for (g, &o) in grad.data.iter_mut().zip(&output.data) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
    grad
}

fn pool_forward(input: &Act) -> Act {
    let (c, h, w) = (input.c, input.h, input.w);
    assert!(h % 2 == 0 && w % 2 == 0, "pool input {h}x{w} must be even");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Act::new(c, oh, ow);
    for ch in 0..c {
        let in_plane = &input.data[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out.data[ch * oh * ow..(ch + 1) * oh * ow];
        for y in 0..oh {
            for x in 0..ow {
                let base = 2 * y * w + 2 * x;
                let m = in_plane[base]
                    .max(in_plane[base + 1])
                    .max(in_plane[base + w])
                    .max(in_plane[base + w + 1]);
                out_plane[y * ow + x] = m;
            }
        }
    }
    out
}

/// Max-pool subgradient: the whole window gradient goes to the first
/// (row-major) maximal element, so ties still route to exactly one input.
fn pool_backward(input: &Act, grad_out: &Act) -> Act {
    let (c, h, w) = (input.c, input.h, input.w);
    let (oh, ow) = (h / 2, w / 2);
    let mut grad_in = Act::new(c, h, w);
    for ch in 0..c {
        let in_plane = &input.data[ch * h * w..(ch + 1) * h * w];
        let g_plane = &grad_out.data[ch * oh * ow..(ch + 1) * oh * ow];
        let gi_plane = &mut grad_in.data[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let base = 2 * y * w + 2 * x;
                let window = [base, base + 1, base + w, base + w + 1];
                let mut best = window[0];
                for &idx in &window[1..] {
                    if in_plane[idx] > in_plane[best] {
                        best = idx;
                    }
                }
                gi_plane[best] += g_plane[y * ow + x];
            }
        }
    }
    grad_in
}

fn dense_forward(dense: &DenseLayer, input: &Act) -> Act {
    assert_eq!(input.data.len(), dense.in_dim, "dense input size");
    let mut out = vec![0.0; dense.out_dim];
    for (j, o) in out.iter_mut().enumerate() {
        let row = &dense.weights[j * dense.in_dim..(j + 1) * dense.in_dim];
        *o = dense.biases[j]
            + row
                .iter()
                .zip(&input.data)
                .map(|(w, x)| w * x)
                .sum::<f64>();
    }
    Act::flat(out)
}

fn dense_backward(dense: &DenseLayer, input: &Act, grad_out: &Act, pg: &mut ParamGrad) -> Act {
    let mut grad_in = vec![0.0; dense.in_dim];
    for j in 0..dense.out_dim {
        let g = grad_out.data[j];
        pg.biases[j] += g;
        let w_row = &dense.weights[j * dense.in_dim..(j + 1) * dense.in_dim];
        let gw_row = &mut pg.weights[j * dense.in_dim..(j + 1) * dense.in_dim];
        for i in 0..dense.in_dim {
            gw_row[i] += g * input.data[i];
            grad_in[i] += g * w_row[i];
        }
    }
    Act::flat(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net(seed: u64) -> Network {
        // every layer type, two conv filters, 8x8 RGB input
        let mut rng = Rng::new(seed);
        let layers = vec![
            Layer::conv(3, 2, &mut rng),
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Flatten,
            Layer::dense(2 * 4 * 4, 5, &mut rng),
            Layer::Relu,
            Layer::dense(5, 2, &mut rng),
        ];
        Network {
            input_c: 3,
            input_side: 8,
            layers,
        }
    }

    fn random_input(rng: &mut Rng, c: usize, side: usize) -> Act {
        let mut act = Act::new(c, side, side);
        for v in &mut act.data {
            *v = rng.uniform();
        }
        act
    }

    fn batch_loss(net: &Network, input: &Act, label: usize) -> f64 {
        let acts = net.forward_full(input);
        let probs = softmax(&acts.last().unwrap().data);
        cross_entropy(&probs, label)
    }

    fn analytic_grads(net: &Network, input: &Act, label: usize) -> Gradients {
        let acts = net.forward_full(input);
        let probs = softmax(&acts.last().unwrap().data);
        let mut d_logits = probs;
        d_logits[label] -= 1.0;
        let mut grads = Gradients::zeros_like(net);
        net.backward_accumulate(&acts, d_logits, &mut grads);
        grads
    }

    /// Central finite differences against the analytic gradient for every
    /// parameter of a stack exercising conv, relu, pool, flatten and dense.
    #[test]
    fn finite_differences_match_every_parameter_of_the_tiny_net() {
        let mut net = tiny_net(11);
        let mut rng = Rng::new(99);
        let input = random_input(&mut rng, 3, 8);
        let label = 1usize;
        let grads = analytic_grads(&net, &input, label);

        let step = 1e-5;
        let mut checked = 0usize;
        let mut max_rel = 0.0f64;
        for li in 0..net.layers.len() {
            let Some(pg) = grads.per_layer[li].clone() else {
                continue;
            };
            for (which, analytic_buf) in [(0, &pg.weights), (1, &pg.biases)] {
                for (pi, &analytic) in analytic_buf.iter().enumerate() {
                    let original = get_param(&net, li, which, pi);
                    set_param(&mut net, li, which, pi, original + step);
                    let plus = batch_loss(&net, &input, label);
                    set_param(&mut net, li, which, pi, original - step);
                    let minus = batch_loss(&net, &input, label);
                    set_param(&mut net, li, which, pi, original);
                    let numeric = (plus - minus) / (2.0 * step);
                    let denom = analytic.abs() + numeric.abs();
                    if denom > 1e-8 {
                        let rel = (analytic - numeric).abs() / denom;
                        max_rel = max_rel.max(rel);
                        assert!(
                            rel <= 1e-4,
                            "layer {li} tensor {which} param {pi}: analytic {analytic} vs numeric {numeric} (rel {rel})"
                        );
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked > 200, "checked only {checked} params");
        assert!(max_rel <= 1e-4);
    }

    fn get_param(net: &Network, li: usize, which: usize, pi: usize) -> f64 {
        match &net.layers[li] {
            Layer::Conv(c) => {
                if which == 0 {
                    c.weights[pi]
                } else {
                    c.biases[pi]
                }
            }
            Layer::Dense(d) => {
                if which == 0 {
                    d.weights[pi]
                } else {
                    d.biases[pi]
                }
            }
            _ => unreachable!(),
        }
    }

    fn set_param(net: &mut Network, li: usize, which: usize, pi: usize, v: f64) {
        match &mut net.layers[li] {
            Layer::Conv(c) => {
                if which == 0 {
                    c.weights[pi] = v;
                } else {
                    c.biases[pi] = v;
                }
            }
            Layer::Dense(d) => {
                if which == 0 {
                    d.weights[pi] = v;
                } else {
                    d.biases[pi] = v;
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn softmax_sums_to_one_for_random_logits() {
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            let logits = [rng.normal() * 10.0, rng.normal() * 10.0];
            let probs = softmax(&logits);
            assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn softmax_of_zero_logits_is_a_tie() {
        let probs = softmax(&[0.0, 0.0]);
        assert_eq!(probs, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_survives_extreme_logits() {
        let probs = softmax(&[1000.0, -1000.0]);
        assert!((probs[0] - 1.0).abs() < 1e-12);
        assert!(probs[1] >= 0.0);
        assert!(probs.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn pool_gradient_mass_is_conserved_and_routed_to_one_cell() {
        // ties everywhere: constant plane
        let input = Act {
            data: vec![1.0; 4 * 4],
            c: 1,
            h: 4,
            w: 4,
        };
        let grad_out = Act {
            data: vec![1.0, 2.0, 3.0, 4.0],
            c: 1,
            h: 2,
            w: 2,
        };
        let grad_in = pool_backward(&input, &grad_out);
        assert_eq!(grad_in.data.iter().sum::<f64>(), 10.0);
        // first element of each window takes it all
        assert_eq!(grad_in.data[0], 1.0);
        assert_eq!(grad_in.data[2], 2.0);
        assert_eq!(grad_in.data[8], 3.0);
        assert_eq!(grad_in.data[10], 4.0);
        let nonzero = grad_in.data.iter().filter(|&&g| g != 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn pool_forward_takes_window_maxima() {
        let input = Act {
            data: vec![
                1.0, 5.0, 2.0, 0.0, //
                3.0, 4.0, 1.0, 9.0, //
                0.0, 0.0, 7.0, 7.0, //
                1.0, 0.0, 7.0, 6.0,
            ],
            c: 1,
            h: 4,
            w: 4,
        };
        let out = pool_forward(&input);
        assert_eq!(out.data, vec![5.0, 9.0, 1.0, 7.0]);
    }

    #[test]
    fn conv_identity_kernel_reproduces_the_interior() {
        // single channel, kernel that picks the center tap
        let mut conv = ConvLayer {
            in_c: 1,
            out_c: 1,
            weights: vec![0.0; 9],
            biases: vec![0.0],
        };
        conv.weights[4] = 1.0;
        let mut rng = Rng::new(8);
        let input = random_input(&mut rng, 1, 6);
        let out = conv_forward(&conv, &input);
        assert_eq!(out.data, input.data);
    }

    #[test]
    fn conv_shift_kernel_moves_the_plane() {
        // kernel tap at (ky=0, kx=1): out[y][x] = in[y-1][x]
        let mut conv = ConvLayer {
            in_c: 1,
            out_c: 1,
            weights: vec![0.0; 9],
            biases: vec![0.0],
        };
        conv.weights[1] = 1.0;
        let input = Act {
            data: (0..16).map(f64::from).collect(),
            c: 1,
            h: 4,
            w: 4,
        };
        let out = conv_forward(&conv, &input);
        // row 0 sees zero padding; row y>0 is input row y-1
        assert_eq!(&out.data[..4], &[0.0; 4]);
        assert_eq!(&out.data[4..8], &input.data[..4]);
    }

    #[test]
    fn last_layer_bias_gradient_is_the_softmax_error() {
        // zero model: probabilities are (0.5, 0.5), so the output dense
        // bias gradient must be exactly p - onehot
        let net = Network {
            input_c: 1,
            input_side: 2,
            layers: vec![
                Layer::Flatten,
                Layer::Dense(DenseLayer {
                    in_dim: 4,
                    out_dim: 2,
                    weights: vec![0.0; 8],
                    biases: vec![0.0; 2],
                }),
            ],
        };
        let input = Act {
            data: vec![0.3, 0.7, 0.1, 0.9],
            c: 1,
            h: 2,
            w: 2,
        };
        let grads = analytic_grads(&net, &input, 1);
        let pg = grads.per_layer[1].as_ref().unwrap();
        assert_eq!(pg.biases, vec![0.5, -0.5]);
    }
}
