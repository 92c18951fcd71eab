//! Fully connected tanh networks over `(x, t)` and the derivative bundles the
//! losses consume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Coef, Jet, JetLayout, NodeId, Tape};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Affine map applied to the raw inputs before the first layer, so each input
/// spans `[-1, 1]` over the problem domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
}

impl InputScaling {
    fn axis(range: (f64, f64)) -> (f64, f64) {
        let s = 2.0 / (range.1 - range.0);
        (s, -1.0 - s * range.0)
    }

    /// `(scale, shift)` for x and for t.
    pub fn coefficients(&self) -> ((f64, f64), (f64, f64)) {
        (Self::axis(self.x_range), Self::axis(self.t_range))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub outputs: usize,
    pub activation: Activation,
    #[serde(default)]
    pub input_scaling: Option<InputScaling>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: 4,
            width: 55,
            outputs: 1,
            activation: Activation::Tanh,
            input_scaling: None,
        }
    }
}

pub const INPUT_DIM: usize = 2;

impl MlpConfig {
    pub fn new(hidden_layers: usize, width: usize, outputs: usize) -> Self {
        MlpConfig {
            hidden_layers,
            width,
            outputs,
            ..Default::default()
        }
    }

    pub fn with_scaling(mut self, scaling: Option<InputScaling>) -> Self {
        self.input_scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.width == 0 || self.outputs == 0 {
            return Err(Error::InvalidArgument(format!(
                "network needs at least one hidden layer, unit and output (got {}x{}, {} outputs)",
                self.hidden_layers, self.width, self.outputs
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` of every weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.width, INPUT_DIM)];
        for _ in 1..self.hidden_layers {
            shapes.push((self.width, self.width));
        }
        shapes.push((self.outputs, self.width));
        shapes
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}

/// Flattened weights and biases, stored layer by layer as `W_i` (row-major)
/// followed by `b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub config: MlpConfig,
    pub seed: u64,
    #[serde(rename = "flat_values")]
    pub values: Vec<f64>,
}

/// Glorot-uniform weights and zero biases.
pub fn init_params(config: &MlpConfig, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(config.n_params());
    for (rows, cols) in config.layer_shapes() {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        for _ in 0..rows * cols {
            values.push(rng.random_range(-limit..limit));
        }
        values.extend(std::iter::repeat_n(0.0, rows));
    }
    Params {
        config: config.clone(),
        seed,
        values,
    }
}

impl Params {
    pub fn from_flat(config: MlpConfig, seed: u64, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if values.len() != config.n_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                config.n_params(),
                values.len()
            )));
        }
        Ok(Params {
            config,
            seed,
            values,
        })
    }

    pub fn zeros(config: &MlpConfig) -> Self {
        Params {
            config: config.clone(),
            seed: 0,
            values: vec![0.0; config.n_params()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weight and bias slices of layer `i`.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let shapes = self.config.layer_shapes();
        let mut off = 0;
        for (r, c) in &shapes[..i] {
            off += r * c + r;
        }
        let (r, c) = shapes[i];
        (
            &self.values[off..off + r * c],
            &self.values[off + r * c..off + r * c + r],
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Params = serde_json::from_str(s)?;
        p.config.validate()?;
        if p.values.len() != p.config.n_params() {
            return Err(Error::InvalidArgument(format!(
                "parameter file holds {} values, config needs {}",
                p.values.len(),
                p.config.n_params()
            )));
        }
        Ok(p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Plain value evaluation at one point.
    pub fn forward(&self, x: f64, t: f64) -> Vec<f64> {
        self.eval_jets(&Jet::constant(x, 0), &Jet::constant(t, 0))
            .iter()
            .map(|j| j.value())
            .collect()
    }

    /// Value evaluation at many points through the batched kernels; one
    /// vector per output.
    pub fn forward_batch(&self, points: &[(f64, f64)]) -> Vec<Vec<f64>> {
        let mut tape = Tape::new(self.values.len());
        let net = self.build(&mut tape, points, JetLayout::VALUE, false);
        let out = tape.value(net.output);
        let n = points.len();
        (0..self.config.outputs)
            .map(|r| out[r * n..(r + 1) * n].to_vec())
            .collect()
    }

    /// Records the network on `tape` for `points` with the requested jet planes.
    /// With `trainable` the weights become parameter leaves at their flat offsets.
    pub fn build(
        &self,
        tape: &mut Tape,
        points: &[(f64, f64)],
        layout: JetLayout,
        trainable: bool,
    ) -> NetOutput {
        build_mlp(&self.config, &self.values, tape, points, layout, trainable)
    }
}

/// Records the network with weights `theta` on `tape`; see [`Params::build`].
pub fn build_mlp(
    config: &MlpConfig,
    theta: &[f64],
    tape: &mut Tape,
    points: &[(f64, f64)],
    layout: JetLayout,
    trainable: bool,
) -> NetOutput {
    let n = points.len();
    let planes = layout.planes();
    let ((sx, bx), (st, bt)) = config
        .input_scaling
        .map(|s| s.coefficients())
        .unwrap_or(((1.0, 0.0), (1.0, 0.0)));
    let cols = planes * n;
    let mut input = vec![0.0; INPUT_DIM * cols];
    for (i, &(x, t)) in points.iter().enumerate() {
        input[i] = sx * x + bx;
        input[cols + i] = st * t + bt;
        if layout.x_order >= 1 {
            input[layout.x_plane(1) * n + i] = sx;
        }
        if layout.t_order >= 1 {
            input[cols + layout.t_plane(1) * n + i] = st;
        }
    }
    let mut h = tape.constant(input);
    let shapes = config.layer_shapes();
    let mut off = 0;
    for (li, &(rows, cols_in)) in shapes.iter().enumerate() {
        let wlen = rows * cols_in;
        let (w, b) = if trainable {
            (
                tape.param(theta, off, wlen),
                tape.param(theta, off + wlen, rows),
            )
        } else {
            (
                tape.constant(theta[off..off + wlen].to_vec()),
                tape.constant(theta[off + wlen..off + wlen + rows].to_vec()),
            )
        };
        off += wlen + rows;
        h = tape.affine(w, b, h, rows, cols_in, n);
        if li + 1 < shapes.len() && config.activation == Activation::Tanh {
            h = tape.tanh_jet(h, layout, n);
        }
    }
    NetOutput {
        output: h,
        layout,
        n,
    }
}

/// Output node of a batched network evaluation.
#[derive(Clone, Copy, Debug)]
pub struct NetOutput {
    pub output: NodeId,
    pub layout: JetLayout,
    pub n: usize,
}

impl NetOutput {
    /// Node holding `d^k out / dx^k` for every point.
    pub fn dx(&self, tape: &mut Tape, out: usize, k: usize) -> NodeId {
        let plane = self.layout.x_plane(k);
        self.plane_scaled(tape, out, plane, k)
    }

    /// Node holding `d^k out / dt^k` for every point.
    pub fn dt(&self, tape: &mut Tape, out: usize, k: usize) -> NodeId {
        let plane = self.layout.t_plane(k);
        self.plane_scaled(tape, out, plane, k)
    }

    /// Raw Taylor-coefficient plane (no factorial).
    pub fn coeff(&self, tape: &mut Tape, out: usize, plane: usize) -> NodeId {
        tape.extract(self.output, self.layout.planes(), out, plane, self.n)
    }

    fn plane_scaled(&self, tape: &mut Tape, out: usize, plane: usize, k: usize) -> NodeId {
        let c = self.coeff(tape, out, plane);
        if k <= 1 {
            c
        } else {
            tape.lincomb(vec![(c, Coef::Scalar(crate::autodiff::factorial(k)))], None)
        }
    }
}

/// Anything that maps `(x, t)` jets to output jets: trained networks, trial
/// functions, or closed-form fields injected for testing.
pub trait FieldModel {
    fn outputs(&self) -> usize;
    fn eval_jets(&self, x: &Jet, t: &Jet) -> Vec<Jet>;
}

impl FieldModel for Params {
    fn outputs(&self) -> usize {
        self.config.outputs
    }

    fn eval_jets(&self, x: &Jet, t: &Jet) -> Vec<Jet> {
        let (x, t) = match self.config.input_scaling {
            Some(s) => {
                let ((sx, bx), (st, bt)) = s.coefficients();
                (*x * sx + bx, *t * st + bt)
            }
            None => (*x, *t),
        };
        let mut h = vec![x, t];
        let shapes = self.config.layer_shapes();
        for (li, _) in shapes.iter().enumerate() {
            let (w, b) = self.layer(li);
            let (rows, cols) = shapes[li];
            let mut next = Vec::with_capacity(rows);
            for r in 0..rows {
                let mut acc = Jet::constant(b[r], x.order().max(t.order()));
                for c in 0..cols {
                    acc = acc + h[c] * w[r * cols + c];
                }
                if li + 1 < shapes.len() && self.config.activation == Activation::Tanh {
                    acc = acc.tanh();
                }
                next.push(acc);
            }
            h = next;
        }
        h
    }
}

type JetFn = dyn Fn(&Jet, &Jet) -> Vec<Jet> + Send + Sync;

/// Closed-form field written in jet arithmetic.
pub struct AnalyticField {
    outputs: usize,
    f: Box<JetFn>,
}

impl AnalyticField {
    pub fn new(outputs: usize, f: impl Fn(&Jet, &Jet) -> Vec<Jet> + Send + Sync + 'static) -> Self {
        AnalyticField {
            outputs,
            f: Box::new(f),
        }
    }
}

impl FieldModel for AnalyticField {
    fn outputs(&self) -> usize {
        self.outputs
    }

    fn eval_jets(&self, x: &Jet, t: &Jet) -> Vec<Jet> {
        let out = (self.f)(x, t);
        debug_assert_eq!(out.len(), self.outputs);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pinn,
    Apinn,
    Fdm,
    Sann,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Pinn => "pinn",
            ModelKind::Apinn => "apinn",
            ModelKind::Fdm => "fdm",
            ModelKind::Sann => "sann",
        }
    }

    /// Network outputs required by the kind; `None` for non-network kinds.
    pub fn outputs(&self) -> Option<usize> {
        match self {
            ModelKind::Pinn | ModelKind::Sann => Some(1),
            ModelKind::Apinn => Some(2),
            ModelKind::Fdm => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pinn" => Ok(ModelKind::Pinn),
            "apinn" | "a-pinn" => Ok(ModelKind::Apinn),
            "fdm" => Ok(ModelKind::Fdm),
            "sann" => Ok(ModelKind::Sann),
            other => Err(Error::InvalidArgument(format!("unknown model kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    T,
}

/// Max jet order along x and t.
pub const MAX_X_ORDER: usize = 4;
pub const MAX_T_ORDER: usize = 2;

/// Output jets along one seeded input axis; the other input is held constant.
pub fn forward_jet(
    model: &dyn FieldModel,
    x: f64,
    t: f64,
    axis: Axis,
    order: usize,
) -> Result<Vec<Jet>> {
    let (xj, tj) = match axis {
        Axis::X => {
            if order > MAX_X_ORDER {
                return Err(Error::OrderOutOfRange {
                    axis: "x",
                    order,
                    max: MAX_X_ORDER,
                });
            }
            (Jet::variable(x, order), Jet::constant(t, order))
        }
        Axis::T => {
            if order > MAX_T_ORDER {
                return Err(Error::OrderOutOfRange {
                    axis: "t",
                    order,
                    max: MAX_T_ORDER,
                });
            }
            (Jet::constant(x, order), Jet::variable(t, order))
        }
    };
    Ok(model.eval_jets(&xj, &tj))
}

/// Point derivatives of the field(s); entries not needed by the model kind stay `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DerivBundle {
    pub u: Option<f64>,
    pub u_t: Option<f64>,
    pub u_tt: Option<f64>,
    pub u_x: Option<f64>,
    pub u_xx: Option<f64>,
    pub u_xxx: Option<f64>,
    pub u_xxxx: Option<f64>,
    pub v: Option<f64>,
    pub v_x: Option<f64>,
    pub v_xx: Option<f64>,
}

impl DerivBundle {
    pub fn all_finite(&self) -> bool {
        [
            self.u, self.u_t, self.u_tt, self.u_x, self.u_xx, self.u_xxx, self.u_xxxx, self.v,
            self.v_x, self.v_xx,
        ]
        .iter()
        .flatten()
        .all(|v| v.is_finite())
    }
}

fn check_arity(model: &dyn FieldModel, expected: usize) -> Result<()> {
    if model.outputs() != expected {
        return Err(Error::OutputArity {
            expected,
            found: model.outputs(),
        });
    }
    Ok(())
}

/// Derivatives at `(x, t)` assembled from one x-seeded and one t-seeded pass.
pub fn derivatives(model: &dyn FieldModel, x: f64, t: f64, kind: ModelKind) -> Result<DerivBundle> {
    let mut b = DerivBundle::default();
    match kind {
        ModelKind::Pinn | ModelKind::Sann => {
            check_arity(model, 1)?;
            let xs = forward_jet(model, x, t, Axis::X, 4)?;
            let ts = forward_jet(model, x, t, Axis::T, 2)?;
            b.u = Some(xs[0].value());
            b.u_x = Some(xs[0].derivative(1));
            b.u_xx = Some(xs[0].derivative(2));
            b.u_xxx = Some(xs[0].derivative(3));
            b.u_xxxx = Some(xs[0].derivative(4));
            b.u_t = Some(ts[0].derivative(1));
            b.u_tt = Some(ts[0].derivative(2));
        }
        ModelKind::Apinn => {
            check_arity(model, 2)?;
            let xs = forward_jet(model, x, t, Axis::X, 2)?;
            let ts = forward_jet(model, x, t, Axis::T, 2)?;
            b.u = Some(xs[0].value());
            b.u_x = Some(xs[0].derivative(1));
            b.u_xx = Some(xs[0].derivative(2));
            b.u_t = Some(ts[0].derivative(1));
            b.u_tt = Some(ts[0].derivative(2));
            b.v = Some(xs[1].value());
            b.v_x = Some(xs[1].derivative(1));
            b.v_xx = Some(xs[1].derivative(2));
        }
        ModelKind::Fdm => {
            return Err(Error::Unsupported(
                "finite differences have no network derivatives".into(),
            ))
        }
    }
    Ok(b)
}
