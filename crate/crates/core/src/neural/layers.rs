//! 3x3 valid convolutions, their stride-1 transposes and 1x1 projections,
//! with hand-written backward passes.
//!
//! Feature maps are `[channels][height][width]`, row-major. Convolution
//! kernels are `[out][in][ky][kx]`; transposed kernels are `[in][out][ky][kx]`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::Float;

/// Floating-point type the network can run in.
pub trait Scalar: Float + AddAssign + Sum + Send + Sync + Debug + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Subnormal values become zero. Arithmetic on subnormals is two orders of
/// magnitude slower, and a low-temperature softmax produces them in bulk.
#[inline]
pub fn flush<T: Scalar>(x: T) -> T {
    if x.abs() < T::min_positive_value() {
        T::zero()
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.channels * self.plane()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Valid 3x3 convolution, shrinks each spatial side by `k - 1`.
    Conv,
    /// Stride-1 transposed convolution, grows each spatial side by `k - 1`.
    UpConv,
    /// 1x1 channel mixing without activation.
    Project,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl LayerSpec {
    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel * self.kernel
    }

    pub fn output_shape(&self, input: Shape) -> Shape {
        let d = self.kernel - 1;
        match self.kind {
            LayerKind::Conv => Shape::new(self.out_channels, input.height - d, input.width - d),
            LayerKind::UpConv => Shape::new(self.out_channels, input.height + d, input.width + d),
            LayerKind::Project => Shape::new(self.out_channels, input.height, input.width),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn fan_out(&self) -> usize {
        self.out_channels * self.kernel * self.kernel
    }

    pub fn forward<T: Scalar>(&self, w: &[T], b: &[T], input: &[T], in_shape: Shape) -> Vec<T> {
        let out_shape = self.output_shape(in_shape);
        let mut out = vec![T::zero(); out_shape.len()];
        for (o, plane) in out.chunks_mut(out_shape.plane()).enumerate() {
            plane.fill(b[o]);
        }
        match self.kind {
            LayerKind::Conv => conv_forward(self, w, input, in_shape, &mut out, out_shape),
            LayerKind::UpConv => upconv_forward(self, w, input, in_shape, &mut out, out_shape),
            LayerKind::Project => project_forward(self, w, input, in_shape, &mut out),
        }
        out
    }

    /// Accumulates parameter gradients into `gw`/`gb` and returns the
    /// gradient with respect to `input`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Scalar>(
        &self,
        w: &[T],
        input: &[T],
        in_shape: Shape,
        grad_out: &[T],
        gw: &mut [T],
        gb: &mut [T],
        need_input_grad: bool,
    ) -> Vec<T> {
        let out_shape = self.output_shape(in_shape);
        for (o, plane) in grad_out.chunks(out_shape.plane()).enumerate() {
            gb[o] += plane.iter().copied().sum();
        }
        let mut grad_in = if need_input_grad { vec![T::zero(); in_shape.len()] } else { Vec::new() };
        match self.kind {
            LayerKind::Conv => {
                conv_backward(self, w, input, in_shape, grad_out, out_shape, gw, &mut grad_in)
            }
            LayerKind::UpConv => {
                upconv_backward(self, w, input, in_shape, grad_out, out_shape, gw, &mut grad_in)
            }
            LayerKind::Project => project_backward(self, w, input, in_shape, grad_out, gw, &mut grad_in),
        }
        grad_in
    }
}

#[inline]
fn axpy<T: Scalar>(dst: &mut [T], alpha: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn conv_forward<T: Scalar>(
    spec: &LayerSpec,
    w: &[T],
    input: &[T],
    ins: Shape,
    out: &mut [T],
    outs: Shape,
) {
    let k = spec.kernel;
    for o in 0..spec.out_channels {
        let out_plane = &mut out[o * outs.plane()..(o + 1) * outs.plane()];
        for c in 0..spec.in_channels {
            let in_plane = &input[c * ins.plane()..(c + 1) * ins.plane()];
            let kern = &w[(o * spec.in_channels + c) * k * k..][..k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = kern[ky * k + kx];
                    for y in 0..outs.height {
                        let src = &in_plane[(y + ky) * ins.width + kx..][..outs.width];
                        let dst = &mut out_plane[y * outs.width..][..outs.width];
                        axpy(dst, wv, src);
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    spec: &LayerSpec,
    w: &[T],
    input: &[T],
    ins: Shape,
    grad_out: &[T],
    outs: Shape,
    gw: &mut [T],
    grad_in: &mut [T],
) {
    let k = spec.kernel;
    let need_in = !grad_in.is_empty();
    for o in 0..spec.out_channels {
        let g_plane = &grad_out[o * outs.plane()..(o + 1) * outs.plane()];
        for c in 0..spec.in_channels {
            let in_plane = &input[c * ins.plane()..(c + 1) * ins.plane()];
            let base = (o * spec.in_channels + c) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = T::zero();
                    for y in 0..outs.height {
                        let src = &in_plane[(y + ky) * ins.width + kx..][..outs.width];
                        let g = &g_plane[y * outs.width..][..outs.width];
                        acc += dot(g, src);
                    }
                    gw[base + ky * k + kx] += acc;
                    if need_in {
                        let wv = w[base + ky * k + kx];
                        let gi_plane = &mut grad_in[c * ins.plane()..(c + 1) * ins.plane()];
                        for y in 0..outs.height {
                            let g = &g_plane[y * outs.width..][..outs.width];
                            let dst = &mut gi_plane[(y + ky) * ins.width + kx..][..outs.width];
                            axpy(dst, wv, g);
                        }
                    }
                }
            }
        }
    }
}

fn upconv_forward<T: Scalar>(
    spec: &LayerSpec,
    w: &[T],
    input: &[T],
    ins: Shape,
    out: &mut [T],
    outs: Shape,
) {
    let k = spec.kernel;
    for c in 0..spec.in_channels {
        let in_plane = &input[c * ins.plane()..(c + 1) * ins.plane()];
        for o in 0..spec.out_channels {
            let out_plane = &mut out[o * outs.plane()..(o + 1) * outs.plane()];
            let kern = &w[(c * spec.out_channels + o) * k * k..][..k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = kern[ky * k + kx];
                    for y in 0..ins.height {
                        let src = &in_plane[y * ins.width..][..ins.width];
                        let dst = &mut out_plane[(y + ky) * outs.width + kx..][..ins.width];
                        axpy(dst, wv, src);
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn upconv_backward<T: Scalar>(
    spec: &LayerSpec,
    w: &[T],
    input: &[T],
    ins: Shape,
    grad_out: &[T],
    outs: Shape,
    gw: &mut [T],
    grad_in: &mut [T],
) {
    let k = spec.kernel;
    let need_in = !grad_in.is_empty();
    for c in 0..spec.in_channels {
        let in_plane = &input[c * ins.plane()..(c + 1) * ins.plane()];
        for o in 0..spec.out_channels {
            let g_plane = &grad_out[o * outs.plane()..(o + 1) * outs.plane()];
            let base = (c * spec.out_channels + o) * k * k;
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = T::zero();
                    for y in 0..ins.height {
                        let src = &in_plane[y * ins.width..][..ins.width];
                        let g = &g_plane[(y + ky) * outs.width + kx..][..ins.width];
                        acc += dot(g, src);
                    }
                    gw[base + ky * k + kx] += acc;
                    if need_in {
                        let wv = w[base + ky * k + kx];
                        let gi_plane = &mut grad_in[c * ins.plane()..(c + 1) * ins.plane()];
                        for y in 0..ins.height {
                            let g = &g_plane[(y + ky) * outs.width + kx..][..ins.width];
                            let dst = &mut gi_plane[y * ins.width..][..ins.width];
                            axpy(dst, wv, g);
                        }
                    }
                }
            }
        }
    }
}

fn project_forward<T: Scalar>(spec: &LayerSpec, w: &[T], input: &[T], ins: Shape, out: &mut [T]) {
    let p = ins.plane();
    for o in 0..spec.out_channels {
        let dst = &mut out[o * p..(o + 1) * p];
        for c in 0..spec.in_channels {
            axpy(dst, w[o * spec.in_channels + c], &input[c * p..(c + 1) * p]);
        }
    }
}

fn project_backward<T: Scalar>(
    spec: &LayerSpec,
    w: &[T],
    input: &[T],
    ins: Shape,
    grad_out: &[T],
    gw: &mut [T],
    grad_in: &mut [T],
) {
    let p = ins.plane();
    for o in 0..spec.out_channels {
        let g = &grad_out[o * p..(o + 1) * p];
        for c in 0..spec.in_channels {
            gw[o * spec.in_channels + c] += dot(g, &input[c * p..(c + 1) * p]);
            if !grad_in.is_empty() {
                axpy(&mut grad_in[c * p..(c + 1) * p], w[o * spec.in_channels + c], g);
            }
        }
    }
}
