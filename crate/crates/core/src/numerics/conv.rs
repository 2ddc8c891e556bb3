//! Same-padded, stride-1 3D convolution over `C×T×H×W` volumes, lowered to
//! im2col + gemm.
//!
//! The height axis may be split into equal bands that are padded
//! independently: a band sees zeros above and below itself instead of its
//! neighbours' rows. A band of the full height is a plain convolution.

use super::real::{gemm_nn, gemm_nt, gemm_tn};
use super::Real;

/// Static geometry of one convolution call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub out_channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub temporal_kernel: usize,
    pub spatial_kernel: usize,
    /// Rows per independently padded band; `height` for an ordinary convolution.
    pub band_rows: usize,
    /// Each band has its own kernel and bias (leading `parts` axis on both).
    pub per_band_weights: bool,
}

impl ConvGeom {
    pub fn rows(&self) -> usize {
        self.in_channels * self.temporal_kernel * self.spatial_kernel * self.spatial_kernel
    }

    pub fn columns(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn bands(&self) -> usize {
        self.height / self.band_rows
    }

    pub fn kernel_shape(&self) -> Vec<usize> {
        let base = [
            self.out_channels,
            self.in_channels,
            self.temporal_kernel,
            self.spatial_kernel,
            self.spatial_kernel,
        ];
        if self.per_band_weights {
            std::iter::once(self.bands()).chain(base).collect()
        } else {
            base.to_vec()
        }
    }

    pub fn bias_shape(&self) -> Vec<usize> {
        if self.per_band_weights {
            vec![self.bands(), self.out_channels]
        } else {
            vec![self.out_channels]
        }
    }

    fn kernel_len(&self) -> usize {
        self.out_channels * self.rows()
    }
}

/// Unfolds `input` into a `rows × columns` matrix of shifted copies.
pub(crate) fn im2col<T: Real>(g: &ConvGeom, input: &[T], cols: &mut [T]) {
    let (t, h, w) = (g.frames, g.height, g.width);
    let (kt, ks) = (g.temporal_kernel, g.spatial_kernel);
    let (pt, ps) = ((kt / 2) as isize, (ks / 2) as isize);
    let n = g.columns();
    let plane = h * w;
    debug_assert_eq!(cols.len(), g.rows() * n);
    let mut r = 0;
    for c in 0..g.in_channels {
        for dt in 0..kt {
            for dy in 0..ks {
                for dx in 0..ks {
                    let row = &mut cols[r * n..(r + 1) * n];
                    r += 1;
                    let shift_x = dx as isize - ps;
                    let (x0, x1) = valid_range(w, shift_x);
                    for tt in 0..t {
                        let seg = &mut row[tt * plane..(tt + 1) * plane];
                        let st = tt as isize + dt as isize - pt;
                        if st < 0 || st >= t as isize || x0 >= x1 {
                            seg.fill(T::zero());
                            continue;
                        }
                        let src_plane = &input[(c * t + st as usize) * plane..][..plane];
                        for y in 0..h {
                            let dst = &mut seg[y * w..(y + 1) * w];
                            let band_start = (y / g.band_rows) * g.band_rows;
                            let sy = y as isize + dy as isize - ps;
                            if sy < band_start as isize || sy >= (band_start + g.band_rows) as isize {
                                dst.fill(T::zero());
                                continue;
                            }
                            let src = &src_plane[sy as usize * w..][..w];
                            dst[..x0].fill(T::zero());
                            dst[x1..].fill(T::zero());
                            let s0 = (x0 as isize + shift_x) as usize;
                            dst[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds column gradients back onto the input.
pub(crate) fn col2im<T: Real>(g: &ConvGeom, cols: &[T], input_grad: &mut [T]) {
    let (t, h, w) = (g.frames, g.height, g.width);
    let (kt, ks) = (g.temporal_kernel, g.spatial_kernel);
    let (pt, ps) = ((kt / 2) as isize, (ks / 2) as isize);
    let n = g.columns();
    let plane = h * w;
    let mut r = 0;
    for c in 0..g.in_channels {
        for dt in 0..kt {
            for dy in 0..ks {
                for dx in 0..ks {
                    let row = &cols[r * n..(r + 1) * n];
                    r += 1;
                    let shift_x = dx as isize - ps;
                    let (x0, x1) = valid_range(w, shift_x);
                    if x0 >= x1 {
                        continue;
                    }
                    for tt in 0..t {
                        let st = tt as isize + dt as isize - pt;
                        if st < 0 || st >= t as isize {
                            continue;
                        }
                        let seg = &row[tt * plane..(tt + 1) * plane];
                        let dst_plane = &mut input_grad[(c * t + st as usize) * plane..][..plane];
                        for y in 0..h {
                            let band_start = (y / g.band_rows) * g.band_rows;
                            let sy = y as isize + dy as isize - ps;
                            if sy < band_start as isize || sy >= (band_start + g.band_rows) as isize {
                                continue;
                            }
                            let src = &seg[y * w + x0..y * w + x1];
                            let s0 = (x0 as isize + shift_x) as usize;
                            let dst = &mut dst_plane[sy as usize * w + s0..][..x1 - x0];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output positions `[x0, x1)` whose source `x + shift` lies inside `[0, w)`.
fn valid_range(w: usize, shift: isize) -> (usize, usize) {
    let x0 = (-shift).max(0) as usize;
    let x1 = (w as isize - shift).min(w as isize).max(0) as usize;
    (x0.min(w), x1)
}

/// Few output channels over wide rows: the im2col buffer costs more than it
/// saves, so the convolution runs as shifted row updates instead.
const DIRECT_MAX_OUT_CHANNELS: usize = 8;
const DIRECT_MIN_WIDTH: usize = 32;

fn use_direct(g: &ConvGeom) -> bool {
    g.out_channels <= DIRECT_MAX_OUT_CHANNELS && g.width >= DIRECT_MIN_WIDTH
}

/// Calls `f(out_row, in_row, x0, x1, shift, kernel_index)` for every pairing of an
/// output row segment with an input row and kernel tap, for output channel `o`.
/// Offsets are element offsets into the channel-major volumes.
#[inline]
fn for_each_tap(g: &ConvGeom, o: usize, mut f: impl FnMut(usize, usize, usize, usize, isize, usize)) {
    let (t, h, w) = (g.frames, g.height, g.width);
    let (kt, ks) = (g.temporal_kernel, g.spatial_kernel);
    let (pt, ps) = ((kt / 2) as isize, (ks / 2) as isize);
    let plane = h * w;
    for tt in 0..t {
        for y in 0..h {
            let band = y / g.band_rows;
            let band_start = band * g.band_rows;
            let kbase = if g.per_band_weights { band * g.kernel_len() } else { 0 } + o * g.rows();
            let out_row = (o * t + tt) * plane + y * w;
            for c in 0..g.in_channels {
                for dt in 0..kt {
                    let st = tt as isize + dt as isize - pt;
                    if st < 0 || st >= t as isize {
                        continue;
                    }
                    for dy in 0..ks {
                        let sy = y as isize + dy as isize - ps;
                        if sy < band_start as isize || sy >= (band_start + g.band_rows) as isize {
                            continue;
                        }
                        let in_row = (c * t + st as usize) * plane + sy as usize * w;
                        for dx in 0..ks {
                            let shift = dx as isize - ps;
                            let (x0, x1) = valid_range(w, shift);
                            if x0 < x1 {
                                let k = kbase + ((c * kt + dt) * ks + dy) * ks + dx;
                                f(out_row, in_row, x0, x1, shift, k);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn direct_forward<T: Real>(g: &ConvGeom, input: &[T], kernel: &[T], bias: &[T], out: &mut [T]) {
    let n = g.columns();
    let plane = g.height * g.width;
    let co = g.out_channels;
    for o in 0..co {
        for (i, v) in out[o * n..(o + 1) * n].iter_mut().enumerate() {
            let band = (i % plane) / g.width / g.band_rows;
            *v = if g.per_band_weights {
                bias[band * co + o]
            } else {
                bias[o]
            };
        }
        for_each_tap(g, o, |out_row, in_row, x0, x1, shift, k| {
            let kv = kernel[k];
            let s0 = (x0 as isize + shift) as usize;
            let dst = &mut out[out_row + x0..out_row + x1];
            let src = &input[in_row + s0..in_row + s0 + (x1 - x0)];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * *s;
            }
        });
    }
}

fn direct_backward<T: Real>(
    g: &ConvGeom,
    input: &[T],
    kernel: &[T],
    grad_out: &[T],
    dkernel: &mut [T],
    dbias: &mut [T],
    mut dinput: Option<&mut [T]>,
) {
    let n = g.columns();
    let plane = g.height * g.width;
    let co = g.out_channels;
    for o in 0..co {
        for (i, v) in grad_out[o * n..(o + 1) * n].iter().enumerate() {
            let band = if g.per_band_weights {
                (i % plane) / g.width / g.band_rows
            } else {
                0
            };
            dbias[band * co + o] += *v;
        }
        for_each_tap(g, o, |out_row, in_row, x0, x1, shift, k| {
            let s0 = (x0 as isize + shift) as usize;
            let go = &grad_out[out_row + x0..out_row + x1];
            let src = &input[in_row + s0..in_row + s0 + (x1 - x0)];
            let mut acc = T::zero();
            for (a, b) in go.iter().zip(src) {
                acc += *a * *b;
            }
            dkernel[k] += acc;
            if let Some(di) = dinput.as_deref_mut() {
                let kv = kernel[k];
                for (d, a) in di[in_row + s0..in_row + s0 + (x1 - x0)].iter_mut().zip(go) {
                    *d += kv * *a;
                }
            }
        });
    }
}

/// Forward pass. Returns the `out_channels × frames × height × width` output.
pub fn conv3d_forward<T: Real>(g: &ConvGeom, input: &[T], kernel: &[T], bias: &[T]) -> Vec<T> {
    if use_direct(g) {
        let mut out = vec![T::zero(); g.out_channels * g.columns()];
        direct_forward(g, input, kernel, bias, &mut out);
        out
    } else {
        lowered_forward(g, input, kernel, bias)
    }
}

fn lowered_forward<T: Real>(g: &ConvGeom, input: &[T], kernel: &[T], bias: &[T]) -> Vec<T> {
    let rows = g.rows();
    let n = g.columns();
    let co = g.out_channels;
    let mut cols = vec![T::zero(); rows * n];
    im2col(g, input, &mut cols);
    let mut out = vec![T::zero(); co * n];
    if g.per_band_weights {
        for_each_band_block(g, |band, off, len| unsafe {
            T::gemm(
                co,
                rows,
                len,
                T::one(),
                kernel.as_ptr().add(band * g.kernel_len()),
                rows as isize,
                1,
                cols.as_ptr().add(off),
                n as isize,
                1,
                T::zero(),
                out.as_mut_ptr().add(off),
                n as isize,
                1,
            );
            for o in 0..co {
                let b = bias[band * co + o];
                for v in &mut out[o * n + off..o * n + off + len] {
                    *v += b;
                }
            }
        });
    } else {
        gemm_nn(co, rows, n, kernel, &cols, T::zero(), &mut out);
        for (o, chunk) in out.chunks_mut(n).enumerate() {
            let b = bias[o];
            for v in chunk {
                *v += b;
            }
        }
    }
    out
}

/// Gradients of a convolution given the upstream gradient `grad_out`.
pub struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
}

pub fn conv3d_backward<T: Real>(
    g: &ConvGeom,
    input: &[T],
    kernel: &[T],
    grad_out: &[T],
    need_input_grad: bool,
) -> ConvGrads<T> {
    if !use_direct(g) {
        return lowered_backward(g, input, kernel, grad_out, need_input_grad);
    }
    let parts = if g.per_band_weights { g.bands() } else { 1 };
    let mut dkernel = vec![T::zero(); parts * g.kernel_len()];
    let mut dbias = vec![T::zero(); parts * g.out_channels];
    let mut dinput = need_input_grad.then(|| vec![T::zero(); g.in_channels * g.columns()]);
    direct_backward(
        g,
        input,
        kernel,
        grad_out,
        &mut dkernel,
        &mut dbias,
        dinput.as_deref_mut(),
    );
    ConvGrads {
        input: dinput,
        kernel: dkernel,
        bias: dbias,
    }
}

fn lowered_backward<T: Real>(
    g: &ConvGeom,
    input: &[T],
    kernel: &[T],
    grad_out: &[T],
    need_input_grad: bool,
) -> ConvGrads<T> {
    let rows = g.rows();
    let n = g.columns();
    let co = g.out_channels;
    let parts = if g.per_band_weights { g.bands() } else { 1 };
    let mut dkernel = vec![T::zero(); parts * g.kernel_len()];
    let mut dbias = vec![T::zero(); parts * co];
    let mut cols = vec![T::zero(); rows * n];
    im2col(g, input, &mut cols);

    if g.per_band_weights {
        for_each_band_block(g, |band, off, len| unsafe {
            T::gemm(
                co,
                len,
                rows,
                T::one(),
                grad_out.as_ptr().add(off),
                n as isize,
                1,
                cols.as_ptr().add(off),
                1,
                n as isize,
                T::one(),
                dkernel.as_mut_ptr().add(band * g.kernel_len()),
                rows as isize,
                1,
            );
            for o in 0..co {
                dbias[band * co + o] += grad_out[o * n + off..o * n + off + len].iter().copied().sum();
            }
        });
    } else {
        gemm_nt(co, n, rows, grad_out, &cols, T::zero(), &mut dkernel);
        for (o, chunk) in grad_out.chunks(n).enumerate() {
            dbias[o] = chunk.iter().copied().sum();
        }
    }

    let input_grad = need_input_grad.then(|| {
        // cols is reused as the column-gradient buffer.
        if g.per_band_weights {
            for_each_band_block(g, |band, off, len| unsafe {
                T::gemm(
                    rows,
                    co,
                    len,
                    T::one(),
                    kernel.as_ptr().add(band * g.kernel_len()),
                    1,
                    rows as isize,
                    grad_out.as_ptr().add(off),
                    n as isize,
                    1,
                    T::zero(),
                    cols.as_mut_ptr().add(off),
                    n as isize,
                    1,
                );
            });
        } else {
            gemm_tn(rows, co, n, kernel, grad_out, T::zero(), &mut cols);
        }
        let mut dinput = vec![T::zero(); g.in_channels * n];
        col2im(g, &cols, &mut dinput);
        dinput
    });

    ConvGrads {
        input: input_grad,
        kernel: dkernel,
        bias: dbias,
    }
}

/// Visits the contiguous column span of every (frame, band) pair.
fn for_each_band_block(g: &ConvGeom, mut f: impl FnMut(usize, usize, usize)) {
    let plane = g.height * g.width;
    let len = g.band_rows * g.width;
    for t in 0..g.frames {
        for band in 0..g.bands() {
            f(band, t * plane + band * len, len);
        }
    }
}
