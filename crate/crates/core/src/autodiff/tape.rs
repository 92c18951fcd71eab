//! Reverse-mode tape over batched jet tensors.
//!
//! Every node holds a dense `f64` buffer. Network activations are stored as
//! `rows x (planes * n)` row-major matrices: for each of `n` points the
//! `planes` Taylor coefficients sit `n` columns apart, so one GEMM pushes all
//! coefficients of all points through an affine layer. The loss is then built
//! from plane extractions, linear combinations and mean squares, and
//! [`Tape::backward`] returns the dense gradient of any scalar node with
//! respect to the flattened parameter vector.

use matrixmultiply::dgemm;

use crate::error::{Error, Result};

/// Which Taylor planes a batched jet carries: the shared value plane, then
/// `x_order` coefficients along x, then `t_order` coefficients along t.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct JetLayout {
    pub x_order: usize,
    pub t_order: usize,
}

impl JetLayout {
    pub const VALUE: JetLayout = JetLayout {
        x_order: 0,
        t_order: 0,
    };

    pub fn new(x_order: usize, t_order: usize) -> Self {
        assert!(x_order <= 4 && t_order <= 4);
        JetLayout { x_order, t_order }
    }

    pub fn planes(&self) -> usize {
        1 + self.x_order + self.t_order
    }

    /// Plane index of the order-`k` x coefficient (`k = 0` is the value).
    pub fn x_plane(&self, k: usize) -> usize {
        assert!(k <= self.x_order);
        k
    }

    /// Plane index of the order-`k` t coefficient (`k = 0` is the value).
    pub fn t_plane(&self, k: usize) -> usize {
        assert!(k <= self.t_order);
        if k == 0 {
            0
        } else {
            self.x_order + k
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Per-term coefficient of a [`Tape::lincomb`].
#[derive(Clone, Debug)]
pub enum Coef {
    Scalar(f64),
    PerPoint(Vec<f64>),
}

impl Coef {
    #[inline]
    fn at(&self, i: usize) -> f64 {
        match self {
            Coef::Scalar(c) => *c,
            Coef::PerPoint(v) => v[i],
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param {
        offset: usize,
    },
    Affine {
        w: NodeId,
        b: NodeId,
        x: NodeId,
        rows_out: usize,
        rows_in: usize,
        cols: usize,
        plane_len: usize,
    },
    TanhJet {
        x: NodeId,
        layout: JetLayout,
        n: usize,
    },
    Extract {
        src: NodeId,
        row: usize,
        plane: usize,
        n: usize,
        cols: usize,
    },
    LinComb {
        terms: Vec<(NodeId, Coef)>,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    MeanSquare {
        src: NodeId,
    },
    Sum {
        src: NodeId,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Ordered record of primitive operations; parents always precede children.
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    n_params: usize,
}

impl Tape {
    /// An empty tape whose parameter leaves index into a vector of length `n_params`.
    pub fn new(n_params: usize) -> Self {
        Tape {
            nodes: Vec::new(),
            n_params,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Value of a scalar node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id.0].value;
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    /// Leaf viewing `theta[offset..offset + len]`.
    pub fn param(&mut self, theta: &[f64], offset: usize, len: usize) -> NodeId {
        assert!(offset + len <= self.n_params && theta.len() == self.n_params);
        self.push(
            Op::Param { offset },
            theta[offset..offset + len].to_vec(),
            true,
        )
    }

    /// `W x + b` where `x` is `rows_in x cols` and the bias is added to the
    /// first `plane_len` columns only (the value plane of a jet batch).
    pub fn affine(
        &mut self,
        w: NodeId,
        b: NodeId,
        x: NodeId,
        rows_out: usize,
        rows_in: usize,
        plane_len: usize,
    ) -> NodeId {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len() % rows_in, 0);
        let cols = xv.len() / rows_in;
        assert!(plane_len <= cols);
        let wv = &self.nodes[w.0].value;
        let bv = &self.nodes[b.0].value;
        assert_eq!(wv.len(), rows_out * rows_in);
        assert_eq!(bv.len(), rows_out);
        let mut out = vec![0.0; rows_out * cols];
        unsafe {
            dgemm(
                rows_out,
                rows_in,
                cols,
                1.0,
                wv.as_ptr(),
                rows_in as isize,
                1,
                xv.as_ptr(),
                cols as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
        for r in 0..rows_out {
            let row = &mut out[r * cols..r * cols + plane_len];
            for v in row {
                *v += bv[r];
            }
        }
        let needs = self.needs(w) || self.needs(b) || self.needs(x);
        self.push(
            Op::Affine {
                w,
                b,
                x,
                rows_out,
                rows_in,
                cols,
                plane_len,
            },
            out,
            needs,
        )
    }

    /// Elementwise `tanh` of a jet batch with `n` points per plane.
    pub fn tanh_jet(&mut self, x: NodeId, layout: JetLayout, n: usize) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let p = layout.planes();
        assert_eq!(xv.len() % (p * n), 0);
        let rows = xv.len() / (p * n);
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let base = r * p * n;
            tanh_row_forward(&xv[base..base + p * n], &mut out[base..base + p * n], n, layout);
        }
        let needs = self.needs(x);
        self.push(Op::TanhJet { x, layout, n }, out, needs)
    }

    /// Row `row`, plane `plane` of a `rows x (planes * n)` jet batch, as an `n`-vector.
    pub fn extract(
        &mut self,
        src: NodeId,
        planes: usize,
        row: usize,
        plane: usize,
        n: usize,
    ) -> NodeId {
        assert!(plane < planes);
        let sv = &self.nodes[src.0].value;
        let cols = planes * n;
        let start = row * cols + plane * n;
        assert!(start + n <= sv.len(), "extract out of range");
        let value = sv[start..start + n].to_vec();
        let needs = self.needs(src);
        self.push(
            Op::Extract {
                src,
                row,
                plane,
                n,
                cols,
            },
            value,
            needs,
        )
    }

    /// `sum_k coef_k * term_k + offset`, all operands of equal length.
    pub fn lincomb(&mut self, terms: Vec<(NodeId, Coef)>, offset: Option<Vec<f64>>) -> NodeId {
        let len = match (&offset, terms.first()) {
            (Some(o), _) => o.len(),
            (None, Some((id, _))) => self.nodes[id.0].value.len(),
            (None, None) => panic!("empty linear combination"),
        };
        let mut out = offset.unwrap_or_else(|| vec![0.0; len]);
        for (id, c) in &terms {
            let v = &self.nodes[id.0].value;
            assert_eq!(v.len(), len, "lincomb operand length mismatch");
            if let Coef::PerPoint(cv) = c {
                assert_eq!(cv.len(), len);
            }
            for i in 0..len {
                out[i] += c.at(i) * v[i];
            }
        }
        let needs = terms.iter().any(|(id, _)| self.needs(*id));
        self.push(Op::LinComb { terms }, out, needs)
    }

    pub fn scale(&mut self, src: NodeId, c: f64) -> NodeId {
        self.lincomb(vec![(src, Coef::Scalar(c))], None)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.lincomb(vec![(a, Coef::Scalar(1.0)), (b, Coef::Scalar(1.0))], None)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        assert_eq!(av.len(), bv.len());
        let value = av.iter().zip(bv).map(|(x, y)| x * y).collect();
        let needs = self.needs(a) || self.needs(b);
        self.push(Op::Mul { a, b }, value, needs)
    }

    /// Scalar `mean(src^2)`; an empty source gives 0.
    pub fn mean_square(&mut self, src: NodeId) -> NodeId {
        let v = &self.nodes[src.0].value;
        let m = if v.is_empty() {
            0.0
        } else {
            v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
        };
        let needs = self.needs(src);
        self.push(Op::MeanSquare { src }, vec![m], needs)
    }

    /// Scalar `sum(src)`.
    pub fn sum(&mut self, src: NodeId) -> NodeId {
        let s = self.nodes[src.0].value.iter().sum::<f64>();
        let needs = self.needs(src);
        self.push(Op::Sum { src }, vec![s], needs)
    }

    /// Dense gradient of the scalar `root` with respect to every parameter entry.
    pub fn backward(&self, root: NodeId) -> Result<Vec<f64>> {
        let node = self.nodes.get(root.0).ok_or(Error::NotOnTape(root.0))?;
        if node.value.len() != 1 {
            return Err(Error::NotOnTape(root.0));
        }
        let mut grad = vec![0.0; self.n_params];
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param { offset } => {
                    for (dst, v) in grad[*offset..*offset + g.len()].iter_mut().zip(&g) {
                        *dst += v;
                    }
                }
                Op::Affine {
                    w,
                    b,
                    x,
                    rows_out,
                    rows_in,
                    cols,
                    plane_len,
                } => {
                    let (rows_out, rows_in, cols) = (*rows_out, *rows_in, *cols);
                    let xv = &self.nodes[x.0].value;
                    if self.needs(*w) {
                        let mut dw = vec![0.0; rows_out * rows_in];
                        unsafe {
                            dgemm(
                                rows_out,
                                cols,
                                rows_in,
                                1.0,
                                g.as_ptr(),
                                cols as isize,
                                1,
                                xv.as_ptr(),
                                1,
                                cols as isize,
                                0.0,
                                dw.as_mut_ptr(),
                                rows_in as isize,
                                1,
                            );
                        }
                        accumulate(&mut adj, *w, dw);
                    }
                    if self.needs(*b) {
                        let db = (0..rows_out)
                            .map(|r| g[r * cols..r * cols + plane_len].iter().sum())
                            .collect();
                        accumulate(&mut adj, *b, db);
                    }
                    if self.needs(*x) {
                        let wv = &self.nodes[w.0].value;
                        let mut dx = vec![0.0; rows_in * cols];
                        unsafe {
                            dgemm(
                                rows_in,
                                rows_out,
                                cols,
                                1.0,
                                wv.as_ptr(),
                                1,
                                rows_in as isize,
                                g.as_ptr(),
                                cols as isize,
                                1,
                                0.0,
                                dx.as_mut_ptr(),
                                cols as isize,
                                1,
                            );
                        }
                        accumulate(&mut adj, *x, dx);
                    }
                }
                Op::TanhJet { x, layout, n } => {
                    let xv = &self.nodes[x.0].value;
                    let yv = &node.value;
                    let p = layout.planes();
                    let rows = xv.len() / (p * n);
                    let mut dx = vec![0.0; xv.len()];
                    for r in 0..rows {
                        let span = r * p * n..(r + 1) * p * n;
                        tanh_row_backward(
                            &xv[span.clone()],
                            &yv[span.clone()],
                            &g[span.clone()],
                            &mut dx[span],
                            *n,
                            *layout,
                        );
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::Extract {
                    src,
                    row,
                    plane,
                    n,
                    cols,
                } => {
                    let len = self.nodes[src.0].value.len();
                    let slot = adj[src.0].get_or_insert_with(|| vec![0.0; len]);
                    let start = row * cols + plane * n;
                    for (dst, v) in slot[start..start + n].iter_mut().zip(&g) {
                        *dst += v;
                    }
                }
                Op::LinComb { terms } => {
                    for (tid, c) in terms {
                        if !self.needs(*tid) {
                            continue;
                        }
                        let len = g.len();
                        let slot = adj[tid.0].get_or_insert_with(|| vec![0.0; len]);
                        for i in 0..len {
                            slot[i] += c.at(i) * g[i];
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    if self.needs(*a) {
                        let d = g.iter().zip(bv).map(|(gi, bi)| gi * bi).collect();
                        accumulate(&mut adj, *a, d);
                    }
                    if self.needs(*b) {
                        let d = g.iter().zip(av).map(|(gi, ai)| gi * ai).collect();
                        accumulate(&mut adj, *b, d);
                    }
                }
                Op::MeanSquare { src } => {
                    let sv = &self.nodes[src.0].value;
                    if !sv.is_empty() {
                        let k = 2.0 * g[0] / sv.len() as f64;
                        let d = sv.iter().map(|v| k * v).collect();
                        accumulate(&mut adj, *src, d);
                    }
                }
                Op::Sum { src } => {
                    let len = self.nodes[src.0].value.len();
                    accumulate(&mut adj, *src, vec![g[0]; len]);
                }
            }
        }
        Ok(grad)
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], id: NodeId, d: Vec<f64>) {
    match &mut adj[id.0] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(&d) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(d),
    }
}

/// Derivatives `tanh^(k)(a0)` for `k = 0..=5`, from `T = tanh(a0)`.
#[inline(always)]
fn tanh_derivs(t: f64) -> [f64; 6] {
    let d1 = 1.0 - t * t;
    let d2 = -2.0 * t * d1;
    let d3 = -2.0 * (d1 * d1 + t * d2);
    let d4 = -2.0 * (3.0 * d1 * d2 + t * d3);
    let d5 = -2.0 * (4.0 * d1 * d3 + 3.0 * d2 * d2 + t * d4);
    [t, d1, d2, d3, d4, d5]
}

/// Coefficients 1..=4 of `tanh` composed with one direction of a jet.
/// `d[m]` is the m-th derivative of tanh at the shared value; missing
/// higher coefficients of `a` are zero.
#[inline(always)]
fn compose(a: [f64; 4], d: &[f64]) -> [f64; 4] {
    let [a1, a2, a3, a4] = a;
    [
        d[1] * a1,
        d[1] * a2 + 0.5 * d[2] * a1 * a1,
        d[1] * a3 + d[2] * a1 * a2 + d[3] / 6.0 * a1 * a1 * a1,
        d[1] * a4
            + d[2] * (a1 * a3 + 0.5 * a2 * a2)
            + 0.5 * d[3] * a1 * a1 * a2
            + d[4] / 24.0 * a1 * a1 * a1 * a1,
    ]
}

/// Jacobian-transpose of [`compose`] with respect to `a1..a4`.
#[inline(always)]
fn compose_adjoint(a: [f64; 4], d: &[f64], gy: [f64; 4]) -> [f64; 4] {
    let [a1, a2, a3, _] = a;
    let [g1, g2, g3, g4] = gy;
    [
        g1 * d[1]
            + g2 * d[2] * a1
            + g3 * (d[2] * a2 + 0.5 * d[3] * a1 * a1)
            + g4 * (d[2] * a3 + d[3] * a1 * a2 + d[4] / 6.0 * a1 * a1 * a1),
        g2 * d[1] + g3 * d[2] * a1 + g4 * (d[2] * a2 + 0.5 * d[3] * a1 * a1),
        g3 * d[1] + g4 * d[2] * a1,
        g4 * d[1],
    ]
}

/// `tanh` through one `exp`; absolute error stays within a few ulp of 1,
/// which is all the jet recursions need, at about half the cost of libm tanh.
#[inline(always)]
fn fast_tanh(x: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

/// Plane ranges `(first, order)` of the x and t directions.
fn directions(layout: JetLayout) -> [(usize, usize); 2] {
    [(1, layout.x_order), (1 + layout.x_order, layout.t_order)]
}

/// The `O` coefficient planes of one direction, each `n` long.
#[inline(always)]
fn planes<const O: usize>(buf: &[f64], first: usize, n: usize) -> [&[f64]; O] {
    std::array::from_fn(|k| &buf[(first + k) * n..(first + k + 1) * n])
}

#[inline(always)]
fn planes_mut<const O: usize>(buf: &mut [f64], first: usize, n: usize) -> (&mut [f64], [&mut [f64]; O]) {
    let (head, tail) = buf.split_at_mut(n);
    let mut chunks = tail[(first - 1) * n..(first - 1 + O) * n].chunks_exact_mut(n);
    let out = std::array::from_fn(|_| chunks.next().unwrap());
    (head, out)
}

#[inline(always)]
fn gather<const O: usize>(p: &[&[f64]; O], i: usize) -> [f64; 4] {
    let mut a = [0.0; 4];
    for k in 0..O {
        a[k] = p[k][i];
    }
    a
}

/// One row of a jet batch: `x` and `out` are `planes * n` long.
fn tanh_row_forward(x: &[f64], out: &mut [f64], n: usize, layout: JetLayout) {
    for (o, v) in out[..n].iter_mut().zip(&x[..n]) {
        *o = fast_tanh(*v);
    }
    for (first, order) in directions(layout) {
        match order {
            0 => {}
            1 => dir_forward::<1>(x, out, first, n),
            2 => dir_forward::<2>(x, out, first, n),
            3 => dir_forward::<3>(x, out, first, n),
            _ => dir_forward::<4>(x, out, first, n),
        }
    }
}

fn dir_forward<const O: usize>(x: &[f64], out: &mut [f64], first: usize, n: usize) {
    let xa = planes::<O>(x, first, n);
    let (y0, mut ya) = planes_mut::<O>(out, first, n);
    for i in 0..n {
        let d = tanh_derivs(y0[i]);
        let y = compose(gather(&xa, i), &d);
        for k in 0..O {
            ya[k][i] = y[k];
        }
    }
    let _ = &mut ya;
}

fn tanh_row_backward(x: &[f64], y: &[f64], g: &[f64], dx: &mut [f64], n: usize, layout: JetLayout) {
    for i in 0..n {
        dx[i] += g[i] * (1.0 - y[i] * y[i]);
    }
    for (first, order) in directions(layout) {
        match order {
            0 => {}
            1 => dir_backward::<1>(x, y, g, dx, first, n),
            2 => dir_backward::<2>(x, y, g, dx, first, n),
            3 => dir_backward::<3>(x, y, g, dx, first, n),
            _ => dir_backward::<4>(x, y, g, dx, first, n),
        }
    }
}

fn dir_backward<const O: usize>(
    x: &[f64],
    y: &[f64],
    g: &[f64],
    dx: &mut [f64],
    first: usize,
    n: usize,
) {
    let xa = planes::<O>(x, first, n);
    let ga = planes::<O>(g, first, n);
    let y0 = &y[..n];
    let (dx0, mut dxa) = planes_mut::<O>(dx, first, n);
    for i in 0..n {
        let d = tanh_derivs(y0[i]);
        let a = gather(&xa, i);
        let gy = gather(&ga, i);
        // d y_k / d a0 is the same expansion with every derivative shifted by one.
        let shifted = compose(a, &d[1..]);
        let mut da0 = 0.0;
        for k in 0..O {
            da0 += gy[k] * shifted[k];
        }
        dx0[i] += da0;
        let da = compose_adjoint(a, &d, gy);
        for k in 0..O {
            dxa[k][i] += da[k];
        }
    }
    let _ = &mut dxa;
}
