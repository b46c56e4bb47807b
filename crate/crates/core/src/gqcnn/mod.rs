//! The grasp-quality convolutional network: a convolutional image stream and a small
//! dense gripper-depth stream merged into dense layers ending in a two-way softmax.

mod checkpoint;
mod eval;
pub mod layers;
mod scalar;
mod train;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};
use layers::{Conv2d, Dense, MaxPool2d};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use eval::{evaluate, evaluate_scores, roc_csv, roc_curve, EvalReport, RocPoint};
pub use scalar::Scalar;
pub use train::{make_batch, train, train_from, training_log_csv, EpochLog, Sgd, TrainConfig, TrainOutcome};

/// One layer of the image stream. Convolutions and dense layers are followed by ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageLayer {
    Conv { filters: usize, size: usize, stride: usize },
    Pool { window: usize },
    Dense { width: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    /// Side of the square input crop.
    pub input_size: usize,
    pub image_layers: Vec<ImageLayer>,
    /// Widths of the dense layers applied to the gripper depth.
    pub depth_layers: Vec<usize>,
    /// Widths of the dense layers after concatenating both streams; a two-way output follows.
    pub merged_layers: Vec<usize>,
}

impl NetworkSpec {
    /// About 18 million parameters on 32x32 crops.
    pub fn standard() -> Self {
        use ImageLayer::*;
        Self {
            name: "standard".into(),
            input_size: 32,
            image_layers: vec![
                Conv { filters: 64, size: 7, stride: 1 },
                Conv { filters: 64, size: 5, stride: 1 },
                Pool { window: 2 },
                Conv { filters: 64, size: 3, stride: 1 },
                Conv { filters: 64, size: 3, stride: 1 },
                Pool { window: 1 },
                Dense { width: 1024 },
            ],
            depth_layers: vec![16],
            merged_layers: vec![1024],
        }
    }

    /// Same topology with narrower layers, about 0.3 million parameters.
    pub fn small() -> Self {
        use ImageLayer::*;
        Self {
            name: "small".into(),
            input_size: 32,
            image_layers: vec![
                Conv { filters: 16, size: 7, stride: 1 },
                Conv { filters: 16, size: 5, stride: 1 },
                Pool { window: 2 },
                Conv { filters: 32, size: 3, stride: 1 },
                Conv { filters: 32, size: 3, stride: 1 },
                Pool { window: 2 },
                Dense { width: 128 },
            ],
            depth_layers: vec![16],
            merged_layers: vec![128],
        }
    }

    /// A few hundred parameters on 8x8 inputs, for gradient checks.
    pub fn tiny() -> Self {
        use ImageLayer::*;
        Self {
            name: "tiny".into(),
            input_size: 8,
            image_layers: vec![
                Conv { filters: 2, size: 3, stride: 1 },
                Conv { filters: 2, size: 3, stride: 1 },
                Pool { window: 2 },
                Conv { filters: 3, size: 3, stride: 1 },
                Conv { filters: 3, size: 3, stride: 2 },
                Pool { window: 1 },
                Dense { width: 6 },
            ],
            depth_layers: vec![3],
            merged_layers: vec![5],
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(Self::standard()),
            "small" => Ok(Self::small()),
            "tiny" => Ok(Self::tiny()),
            other => Err(Error::Spec(format!("unknown network spec `{other}` (expected standard, small or tiny)"))),
        }
    }

    pub fn compile(&self) -> Result<Plan> {
        if self.input_size == 0 {
            return Err(Error::Spec("input size must be positive".into()));
        }
        let (mut c, mut h, mut w) = (1usize, self.input_size, self.input_size);
        let mut flat: Option<usize> = None;
        let mut image = Vec::new();
        let mut params = Vec::new();
        for (i, layer) in self.image_layers.iter().enumerate() {
            match *layer {
                ImageLayer::Conv { filters, size, stride } => {
                    if flat.is_some() {
                        return Err(Error::Spec(format!("layer {i}: convolution after a dense layer")));
                    }
                    if filters == 0 || stride == 0 || size % 2 == 0 {
                        return Err(Error::Spec(format!("layer {i}: need filters, stride >= 1 and an odd kernel")));
                    }
                    let conv = Conv2d {
                        in_channels: c,
                        out_channels: filters,
                        kernel: size,
                        stride,
                        height: h,
                        width: w,
                    };
                    params.push(ParamShape::conv(format!("conv{}", params.len() + 1), &conv));
                    (c, h, w) = (filters, conv.out_height(), conv.out_width());
                    image.push(ImageOp::Conv(conv, params.len() - 1));
                }
                ImageLayer::Pool { window } => {
                    if flat.is_some() {
                        return Err(Error::Spec(format!("layer {i}: pooling after a dense layer")));
                    }
                    if window == 0 || h % window != 0 || w % window != 0 {
                        return Err(Error::Spec(format!("layer {i}: pool window {window} does not divide {h}x{w}")));
                    }
                    let pool = MaxPool2d {
                        channels: c,
                        height: h,
                        width: w,
                        window,
                    };
                    (h, w) = (pool.out_height(), pool.out_width());
                    image.push(ImageOp::Pool(pool));
                }
                ImageLayer::Dense { width } => {
                    if width == 0 {
                        return Err(Error::Spec(format!("layer {i}: zero-width dense layer")));
                    }
                    let dense = Dense {
                        inputs: flat.unwrap_or(c * h * w),
                        outputs: width,
                    };
                    params.push(ParamShape::dense(format!("dense{}", params.len() + 1), &dense));
                    flat = Some(width);
                    image.push(ImageOp::Dense(dense, params.len() - 1));
                }
            }
        }
        let image_features = flat.unwrap_or(c * h * w);
        let mut depth = Vec::new();
        let mut d_in = 1;
        for (i, &width) in self.depth_layers.iter().enumerate() {
            if width == 0 {
                return Err(Error::Spec(format!("depth layer {i}: zero width")));
            }
            let dense = Dense { inputs: d_in, outputs: width };
            params.push(ParamShape::dense(format!("depth{}", i + 1), &dense));
            depth.push((dense, params.len() - 1));
            d_in = width;
        }
        let mut merged = Vec::new();
        let mut m_in = image_features + d_in;
        for (i, &width) in self.merged_layers.iter().chain(std::iter::once(&2)).enumerate() {
            if width == 0 {
                return Err(Error::Spec(format!("merged layer {i}: zero width")));
            }
            let dense = Dense { inputs: m_in, outputs: width };
            let name = if i == self.merged_layers.len() { "output".to_string() } else { format!("merged{}", i + 1) };
            params.push(ParamShape::dense(name, &dense));
            merged.push((dense, params.len() - 1));
            m_in = width;
        }
        Ok(Plan {
            input_size: self.input_size,
            image,
            image_features,
            depth,
            depth_features: d_in,
            merged,
            params,
        })
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self.compile()?.params.iter().map(|p| p.weight_len + p.bias_len).sum())
    }
}

#[derive(Debug, Clone)]
pub enum ImageOp {
    Conv(Conv2d, usize),
    Pool(MaxPool2d),
    Dense(Dense, usize),
}

#[derive(Debug, Clone)]
pub struct ParamShape {
    pub name: String,
    pub weight_shape: Vec<usize>,
    pub weight_len: usize,
    pub bias_len: usize,
    pub fan_in: usize,
}

impl ParamShape {
    fn conv(name: String, c: &Conv2d) -> Self {
        Self {
            name,
            weight_shape: vec![c.out_channels, c.in_channels, c.kernel, c.kernel],
            weight_len: c.weight_len(),
            bias_len: c.out_channels,
            fan_in: c.fan_in(),
        }
    }

    fn dense(name: String, d: &Dense) -> Self {
        Self {
            name,
            weight_shape: vec![d.outputs, d.inputs],
            weight_len: d.weight_len(),
            bias_len: d.outputs,
            fan_in: d.inputs,
        }
    }
}

/// Layer sequence and parameter shapes derived from a [`NetworkSpec`].
#[derive(Debug, Clone)]
pub struct Plan {
    pub input_size: usize,
    pub image: Vec<ImageOp>,
    pub image_features: usize,
    pub depth: Vec<(Dense, usize)>,
    pub depth_features: usize,
    pub merged: Vec<(Dense, usize)>,
    pub params: Vec<ParamShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<S>,
}

/// Weights and biases; tensor `2 i` is the weight and `2 i + 1` the bias of parameter layer `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams<S> {
    pub spec: NetworkSpec,
    pub tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> NetworkParams<S> {
    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn cast<T: Scalar>(&self) -> NetworkParams<T> {
        NetworkParams {
            spec: self.spec.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Checks tensor shapes against the spec and that every value is finite.
    pub fn validate(&self) -> Result<Plan> {
        let plan = self.spec.compile()?;
        if self.tensors.len() != 2 * plan.params.len() {
            return Err(Error::Spec(format!("expected {} tensors, found {}", 2 * plan.params.len(), self.tensors.len())));
        }
        for (i, p) in plan.params.iter().enumerate() {
            let (w, b) = (&self.tensors[2 * i], &self.tensors[2 * i + 1]);
            if w.data.len() != p.weight_len || b.data.len() != p.bias_len {
                return Err(Error::Spec(format!("tensor sizes of layer `{}` do not match the spec", p.name)));
            }
        }
        if self.tensors.iter().any(|t| t.data.iter().any(|v| !v.to_f64().is_finite())) {
            return Err(Error::Spec("non-finite parameter".into()));
        }
        Ok(plan)
    }
}

/// He initialisation: weights `N(0, 2 / fan_in)`, biases zero.
pub fn init_params<S: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams<S>> {
    let plan = spec.compile()?;
    let mut tensors = Vec::new();
    for (i, p) in plan.params.iter().enumerate() {
        let mut r = rng::stream(seed, &[0x1417, i as u64]);
        let std = (2.0 / p.fan_in as f64).sqrt();
        let w = (0..p.weight_len)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut r);
                S::from_f64(g * std)
            })
            .collect();
        tensors.push(Tensor {
            name: format!("{}.weight", p.name),
            shape: p.weight_shape.clone(),
            data: w,
        });
        tensors.push(Tensor {
            name: format!("{}.bias", p.name),
            shape: vec![p.bias_len],
            data: vec![S::ZERO; p.bias_len],
        });
    }
    Ok(NetworkParams { spec: spec.clone(), tensors })
}

/// Normalised network inputs with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<S> {
    /// `len x size x size` crops, row-major.
    pub images: Vec<S>,
    pub depths: Vec<S>,
    pub labels: Vec<bool>,
}

impl<S> Batch<S> {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }
}

struct Trace<S> {
    image: Vec<Vec<S>>,
    pool_args: Vec<Vec<u32>>,
    depth: Vec<Vec<S>>,
    merged: Vec<Vec<S>>,
}

fn run<S: Scalar>(params: &NetworkParams<S>, plan: &Plan, images: &[S], depths: &[S]) -> Result<Trace<S>> {
    let n = depths.len();
    let px = plan.input_size * plan.input_size;
    if images.len() != n * px {
        return Err(Error::Spec(format!("{} image values for {n} inputs of {px} pixels", images.len())));
    }
    let t = &params.tensors;
    let mut image = vec![images.to_vec()];
    let mut pool_args = Vec::new();
    for op in &plan.image {
        let x = image.last().expect("input activation");
        let y = match op {
            ImageOp::Conv(c, p) => c.forward(&t[2 * p].data, &t[2 * p + 1].data, x, n, true),
            ImageOp::Pool(pool) => {
                let (y, arg) = pool.forward(x, n);
                pool_args.push(arg);
                y
            }
            ImageOp::Dense(d, p) => d.forward(&t[2 * p].data, &t[2 * p + 1].data, x, n, true),
        };
        image.push(y);
    }
    let mut depth = vec![depths.to_vec()];
    for (d, p) in &plan.depth {
        let y = d.forward(&t[2 * p].data, &t[2 * p + 1].data, depth.last().expect("depth input"), n, true);
        depth.push(y);
    }
    let (fi, fd) = (plan.image_features, plan.depth_features);
    let (img, dep) = (image.last().expect("image features"), depth.last().expect("depth features"));
    let mut concat = Vec::with_capacity(n * (fi + fd));
    for b in 0..n {
        concat.extend_from_slice(&img[b * fi..(b + 1) * fi]);
        concat.extend_from_slice(&dep[b * fd..(b + 1) * fd]);
    }
    let mut merged = vec![concat];
    let last = plan.merged.len() - 1;
    for (i, (d, p)) in plan.merged.iter().enumerate() {
        let y = d.forward(&t[2 * p].data, &t[2 * p + 1].data, merged.last().expect("merged input"), n, i != last);
        merged.push(y);
    }
    Ok(Trace {
        image,
        pool_args,
        depth,
        merged,
    })
}

fn softmax2(l0: f64, l1: f64) -> [f64; 2] {
    let m = l0.max(l1);
    let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

const PREDICT_CHUNK: usize = 128;

/// Class probabilities `[failure, success]` for each input.
pub fn predict_proba<S: Scalar>(params: &NetworkParams<S>, images: &[S], depths: &[S]) -> Result<Vec<[f64; 2]>> {
    let plan = params.validate()?;
    let px = plan.input_size * plan.input_size;
    if images.len() != depths.len() * px {
        return Err(Error::Spec(format!("{} image values for {} inputs of {px} pixels", images.len(), depths.len())));
    }
    let mut out = Vec::with_capacity(depths.len());
    for (imgs, ds) in images.chunks(PREDICT_CHUNK * px).zip(depths.chunks(PREDICT_CHUNK)) {
        let trace = run(params, &plan, imgs, ds)?;
        let logits = trace.merged.last().expect("logits");
        out.extend(logits.chunks(2).map(|l| softmax2(l[0].to_f64(), l[1].to_f64())));
    }
    Ok(out)
}

/// Predicted probability of success for each input.
pub fn predict<S: Scalar>(params: &NetworkParams<S>, images: &[S], depths: &[S]) -> Result<Vec<f64>> {
    Ok(predict_proba(params, images, depths)?.into_iter().map(|p| p[1]).collect())
}

/// Predicted probability of success of one normalised crop and depth.
pub fn forward<S: Scalar>(params: &NetworkParams<S>, crop: &[S], depth: S) -> Result<f64> {
    Ok(predict(params, crop, &[depth])?[0])
}

const PROB_FLOOR: f64 = 1e-12;

/// Mean softmax cross-entropy of the batch and its gradient for every parameter tensor.
pub fn loss_and_gradients<S: Scalar>(params: &NetworkParams<S>, batch: &Batch<S>) -> Result<(f64, Vec<Vec<S>>)> {
    let plan = params.validate()?;
    let n = batch.len();
    if n == 0 || batch.labels.len() != n {
        return Err(Error::InvalidArgument("empty batch or label count mismatch".into()));
    }
    let tr = run(params, &plan, &batch.images, &batch.depths)?;
    let logits = tr.merged.last().expect("logits");
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(2 * n);
    for (l, &y) in logits.chunks(2).zip(&batch.labels) {
        let p = softmax2(l[0].to_f64(), l[1].to_f64());
        let py = p[y as usize].clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        loss -= py.ln();
        let t = [(!y) as u8 as f64, y as u8 as f64];
        grad.push(S::from_f64((p[0] - t[0]) / n as f64));
        grad.push(S::from_f64((p[1] - t[1]) / n as f64));
    }
    loss /= n as f64;

    let t = &params.tensors;
    let mut grads: Vec<Vec<S>> = t.iter().map(|_| Vec::new()).collect();
    let mut g = grad;
    let last = plan.merged.len() - 1;
    for (i, (d, p)) in plan.merged.iter().enumerate().rev() {
        let lg = d.backward(&t[2 * p].data, &tr.merged[i], &tr.merged[i + 1], &g, n, i != last, true);
        grads[2 * p] = lg.weight;
        grads[2 * p + 1] = lg.bias;
        g = lg.input.expect("input gradient");
    }
    let (fi, fd) = (plan.image_features, plan.depth_features);
    let mut g_img = Vec::with_capacity(n * fi);
    let mut g_dep = Vec::with_capacity(n * fd);
    for row in g.chunks(fi + fd) {
        g_img.extend_from_slice(&row[..fi]);
        g_dep.extend_from_slice(&row[fi..]);
    }
    let mut g = g_dep;
    for (i, (d, p)) in plan.depth.iter().enumerate().rev() {
        let lg = d.backward(&t[2 * p].data, &tr.depth[i], &tr.depth[i + 1], &g, n, true, i > 0);
        grads[2 * p] = lg.weight;
        grads[2 * p + 1] = lg.bias;
        g = lg.input.unwrap_or_default();
    }
    let mut g = g_img;
    let mut pool = tr.pool_args.len();
    for (i, op) in plan.image.iter().enumerate().rev() {
        let (x, y) = (&tr.image[i], &tr.image[i + 1]);
        g = match op {
            ImageOp::Conv(c, p) => {
                let lg = c.backward(&t[2 * p].data, x, y, &g, n, true, i > 0);
                grads[2 * p] = lg.weight;
                grads[2 * p + 1] = lg.bias;
                lg.input.unwrap_or_default()
            }
            ImageOp::Pool(pl) => {
                pool -= 1;
                pl.backward(&g, &tr.pool_args[pool], n)
            }
            ImageOp::Dense(d, p) => {
                let lg = d.backward(&t[2 * p].data, x, y, &g, n, true, i > 0);
                grads[2 * p] = lg.weight;
                grads[2 * p + 1] = lg.bias;
                lg.input.unwrap_or_default()
            }
        };
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_batch(plan: &Plan, n: usize, seed: u64) -> Batch<f64> {
        let mut r = rng::stream(seed, &[]);
        let px = plan.input_size * plan.input_size;
        Batch {
            images: (0..n * px).map(|_| r.random_range(-1.0..1.0)).collect(),
            depths: (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
            labels: (0..n).map(|i| i % 2 == 0).collect(),
        }
    }

    #[test]
    fn standard_spec_has_about_18m_parameters() {
        let n = NetworkSpec::standard().parameter_count().unwrap() as f64;
        assert!((n / 18e6 - 1.0).abs() < 0.1, "{n}");
        assert!(NetworkSpec::tiny().parameter_count().unwrap() <= 10_000);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = NetworkSpec::tiny();
        s.image_layers.push(ImageLayer::Pool { window: 2 });
        assert!(matches!(s.compile(), Err(Error::Spec(_))));
        let mut s = NetworkSpec::tiny();
        s.image_layers[0] = ImageLayer::Conv { filters: 2, size: 4, stride: 1 };
        assert!(s.compile().is_err());
        assert!(NetworkSpec::by_name("huge").is_err());
    }

    #[test]
    fn he_initialisation() {
        let spec = NetworkSpec {
            name: "he".into(),
            input_size: 10,
            image_layers: vec![ImageLayer::Dense { width: 100 }],
            depth_layers: vec![],
            merged_layers: vec![100],
        };
        let p: NetworkParams<f64> = init_params(&spec, 5).unwrap();
        // merged1 has 101 inputs; dense1 has 100 inputs and 10^4 weights
        let w = &p.tensors[0].data;
        assert_eq!(w.len(), 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var - 0.02).abs() < 0.003, "{var}");
        assert!(p.tensors.iter().skip(1).step_by(2).all(|b| b.data.iter().all(|&v| v == 0.0)));
        assert_eq!(p, init_params(&spec, 5).unwrap());
    }

    #[test]
    fn probabilities_are_valid_and_repeatable() {
        let p: NetworkParams<f64> = init_params(&NetworkSpec::tiny(), 1).unwrap();
        let plan = p.validate().unwrap();
        let b = random_batch(&plan, 5, 2);
        let probs = predict_proba(&p, &b.images, &b.depths).unwrap();
        for q in &probs {
            assert!((0.0..=1.0).contains(&q[1]) && (q[0] + q[1] - 1.0).abs() < 1e-9);
        }
        let mut twice = b.images[..64].to_vec();
        twice.extend_from_slice(&b.images[..64]);
        let q2 = predict(&p, &twice, &[b.depths[0], b.depths[0]]).unwrap();
        assert_eq!(q2[0].to_bits(), q2[1].to_bits());
        assert!(matches!(predict(&p, &b.images[..10], &b.depths[..1]), Err(Error::Spec(_))));
    }

    #[test]
    fn uniform_predictor_loss_is_ln2() {
        let mut p: NetworkParams<f64> = init_params(&NetworkSpec::tiny(), 1).unwrap();
        let k = p.tensors.len();
        p.tensors[k - 2].data.fill(0.0);
        let plan = p.validate().unwrap();
        let (loss, _) = loss_and_gradients(&p, &random_batch(&plan, 4, 3)).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-9);
        // confident correct predictor
        p.tensors[k - 1].data = vec![-40.0, 40.0];
        let mut b = random_batch(&plan, 4, 3);
        b.labels = vec![true; 4];
        assert!(loss_and_gradients(&p, &b).unwrap().0 < 1e-6);
    }
}
