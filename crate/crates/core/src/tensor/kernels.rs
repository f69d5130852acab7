//! Slice-level numeric kernels behind the graph ops.
//!
//! All reductions run in a fixed sequential order (dot products use eight
//! interleaved partial sums combined left to right), so results never depend
//! on thread count or scheduling.

use super::Real;

/// Dot product with eight fixed lanes.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + xa[l] * xb[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    let lo = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    let hi = (acc[4] + acc[5]) + (acc[6] + acc[7]);
    (lo + hi) + tail
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv = *yv + alpha * xv;
    }
}

/// `c[m×n] += a[m×k] · b[k×n]`
pub fn gemm_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if n == 1 {
        for i in 0..m {
            c[i] = c[i] + dot(&a[i * k..(i + 1) * k], b);
        }
        return;
    }
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            axpy(a[i * k + p], &b[p * n..(p + 1) * n], crow);
        }
    }
}

/// `c[m×n] += a[m×k] · b[n×k]ᵀ`
pub fn gemm_bt_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] = c[i * n + j] + dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `c[m×n] += a[k×m]ᵀ · b[k×n]`
pub fn gemm_at_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            axpy(a[p * m + i], brow, &mut c[i * n..(i + 1) * n]);
        }
    }
}

/// Geometry of a square-kernel 2-D convolution over a `[cin, h, w]` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }

    /// Rows of the unfolded input matrix.
    pub fn patch_len(&self) -> usize {
        self.cin * self.k * self.k
    }

    pub fn out_pixels(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unfold `x` into `col[patch_len × out_pixels]`.
pub fn im2col<T: Real>(x: &[T], g: &ConvGeom, col: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    debug_assert_eq!(col.len(), g.patch_len() * p);
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (ci * g.k + ky) * g.k + kx;
                let row = &mut col[r * p..(r + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: fold `col` back, accumulating into `dx`.
pub fn col2im_acc<T: Real>(col: &[T], g: &ConvGeom, dx: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    for ci in 0..g.cin {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let r = (ci * g.k + ky) * g.k + kx;
                let row = &col[r * p..(r + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] = dst[ix as usize] + row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution forward. Returns the output `[cout, oh, ow]` and the unfolded
/// input kept for the backward pass.
pub fn conv2d_forward<T: Real>(x: &[T], w: &[T], b: &[T], g: &ConvGeom) -> (Vec<T>, Vec<T>) {
    let p = g.out_pixels();
    let r = g.patch_len();
    let mut col = vec![T::zero(); r * p];
    im2col(x, g, &mut col);
    let mut out = vec![T::zero(); g.cout * p];
    for (co, row) in out.chunks_exact_mut(p).enumerate() {
        row.fill(b[co]);
    }
    gemm_acc(g.cout, r, p, w, &col, &mut out);
    (out, col)
}

/// Convolution backward, accumulating into whichever gradients are requested.
pub fn conv2d_backward<T: Real>(
    gout: &[T],
    w: &[T],
    col: &[T],
    g: &ConvGeom,
    dx: Option<&mut [T]>,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
) {
    let p = g.out_pixels();
    let r = g.patch_len();
    if let Some(dw) = dw {
        gemm_bt_acc(g.cout, p, r, gout, col, dw);
    }
    if let Some(db) = db {
        for (co, row) in gout.chunks_exact(p).enumerate() {
            db[co] = db[co] + row.iter().fold(T::zero(), |s, &v| s + v);
        }
    }
    if let Some(dx) = dx {
        let mut dcol = vec![T::zero(); r * p];
        gemm_at_acc(r, g.cout, p, w, gout, &mut dcol);
        col2im_acc(&dcol, g, dx);
    }
}

/// `out[c, 2i, 2j] = x[c, i, j]`, zeros elsewhere.
pub fn upsample_zero<T: Real>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c * 4 * h * w];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                out[(ch * 2 * h + 2 * i) * 2 * w + 2 * j] = x[(ch * h + i) * w + j];
            }
        }
    }
    out
}

/// Adjoint of [`upsample_zero`]: pick the top-left entry of every 2×2 block.
pub fn upsample_zero_backward<T: Real>(gout: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                dx[(ch * h + i) * w + j] = gout[(ch * 2 * h + 2 * i) * 2 * w + 2 * j];
            }
        }
    }
    dx
}

/// 2×2 max pooling with stride 2 over `[c, h, w]`.
pub fn max_pool2<T: Real>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let at = |y: usize, x_: usize| x[(ch * h + y) * w + x_];
                let m = at(2 * i, 2 * j)
                    .max(at(2 * i, 2 * j + 1))
                    .max(at(2 * i + 1, 2 * j))
                    .max(at(2 * i + 1, 2 * j + 1));
                out.push(m);
            }
        }
    }
    out
}

/// One output parity class of an up-convolution.
///
/// With zero-insertion upsampling, output pixel `(2i+a, 2j+b)` only sees the
/// kernel taps landing on even (non-zero) positions. Each class is therefore
/// a small stride-1 convolution of the original input with a sub-kernel.
#[derive(Debug, Clone)]
struct Phase {
    a: usize,
    b: usize,
    /// `(ky, kx, dy, dx)`: kernel tap and the input offset it reads.
    taps: Vec<(usize, usize, isize, isize)>,
}

fn phase_taps(parity: usize, k: usize) -> Vec<(usize, isize)> {
    let pad = (k as isize - 1) / 2;
    (0..k)
        .filter_map(|kk| {
            let off = parity as isize + kk as isize - pad;
            (off.rem_euclid(2) == 0).then_some((kk, off / 2))
        })
        .collect()
}

fn phases(k: usize) -> Vec<Phase> {
    let mut out = Vec::with_capacity(4);
    for a in 0..2 {
        for b in 0..2 {
            let mut taps = Vec::new();
            for &(ky, dy) in &phase_taps(a, k) {
                for &(kx, dx) in &phase_taps(b, k) {
                    taps.push((ky, kx, dy, dx));
                }
            }
            out.push(Phase { a, b, taps });
        }
    }
    out
}

/// Geometry of an up-convolution: zero-insertion 2× upsampling of a
/// `[cin, h, w]` input followed by a stride-1 `k×k` convolution with
/// padding `(k-1)/2`, giving `[cout, 2h, 2w]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
}

fn phase_col<T: Real>(x: &[T], g: &UpConvGeom, ph: &Phase) -> Vec<T> {
    let p = g.h * g.w;
    let t = ph.taps.len();
    let mut col = vec![T::zero(); g.cin * t * p];
    for ci in 0..g.cin {
        let plane = &x[ci * p..(ci + 1) * p];
        for (ti, &(_, _, dy, dx)) in ph.taps.iter().enumerate() {
            let row = &mut col[(ci * t + ti) * p..(ci * t + ti + 1) * p];
            for i in 0..g.h {
                let iy = i as isize + dy;
                if iy < 0 || iy >= g.h as isize {
                    continue;
                }
                for j in 0..g.w {
                    let ix = j as isize + dx;
                    if ix >= 0 && ix < g.w as isize {
                        row[i * g.w + j] = plane[iy as usize * g.w + ix as usize];
                    }
                }
            }
        }
    }
    col
}

fn phase_weights<T: Real>(w: &[T], g: &UpConvGeom, ph: &Phase) -> Vec<T> {
    let t = ph.taps.len();
    let mut out = Vec::with_capacity(g.cout * g.cin * t);
    for co in 0..g.cout {
        for ci in 0..g.cin {
            for &(ky, kx, _, _) in &ph.taps {
                out.push(w[((co * g.cin + ci) * g.k + ky) * g.k + kx]);
            }
        }
    }
    out
}

/// Up-convolution forward. Returns the output and the per-phase unfolded
/// inputs for the backward pass. Equal to `conv2d(upsample_zero(x))` but
/// skips the multiplications by inserted zeros.
pub fn upconv_forward<T: Real>(x: &[T], w: &[T], b: &[T], g: &UpConvGeom) -> (Vec<T>, Vec<Vec<T>>) {
    let (oh, ow) = (2 * g.h, 2 * g.w);
    let p = g.h * g.w;
    let mut out = vec![T::zero(); g.cout * oh * ow];
    let mut cols = Vec::with_capacity(4);
    for ph in phases(g.k) {
        let col = phase_col(x, g, &ph);
        let wp = phase_weights(w, g, &ph);
        let r = g.cin * ph.taps.len();
        let mut part = vec![T::zero(); g.cout * p];
        for (co, row) in part.chunks_exact_mut(p).enumerate() {
            row.fill(b[co]);
        }
        gemm_acc(g.cout, r, p, &wp, &col, &mut part);
        for co in 0..g.cout {
            for i in 0..g.h {
                for j in 0..g.w {
                    out[(co * oh + 2 * i + ph.a) * ow + 2 * j + ph.b] = part[co * p + i * g.w + j];
                }
            }
        }
        cols.push(col);
    }
    (out, cols)
}

pub fn upconv_backward<T: Real>(
    gout: &[T],
    w: &[T],
    cols: &[Vec<T>],
    g: &UpConvGeom,
    mut dx: Option<&mut [T]>,
    mut dw: Option<&mut [T]>,
    mut db: Option<&mut [T]>,
) {
    let (oh, ow) = (2 * g.h, 2 * g.w);
    let p = g.h * g.w;
    for (ph, col) in phases(g.k).iter().zip(cols) {
        let t = ph.taps.len();
        let r = g.cin * t;
        let mut gpart = vec![T::zero(); g.cout * p];
        for co in 0..g.cout {
            for i in 0..g.h {
                for j in 0..g.w {
                    gpart[co * p + i * g.w + j] = gout[(co * oh + 2 * i + ph.a) * ow + 2 * j + ph.b];
                }
            }
        }
        if let Some(db) = db.as_deref_mut() {
            for (co, row) in gpart.chunks_exact(p).enumerate() {
                db[co] = db[co] + row.iter().fold(T::zero(), |s, &v| s + v);
            }
        }
        if let Some(dw) = dw.as_deref_mut() {
            let mut dwp = vec![T::zero(); g.cout * r];
            gemm_bt_acc(g.cout, p, r, &gpart, col, &mut dwp);
            for co in 0..g.cout {
                for ci in 0..g.cin {
                    for (ti, &(ky, kx, _, _)) in ph.taps.iter().enumerate() {
                        let idx = ((co * g.cin + ci) * g.k + ky) * g.k + kx;
                        dw[idx] = dw[idx] + dwp[(co * g.cin + ci) * t + ti];
                    }
                }
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            let wp = phase_weights(w, g, ph);
            let mut dcol = vec![T::zero(); r * p];
            gemm_at_acc(r, g.cout, p, &wp, &gpart, &mut dcol);
            for ci in 0..g.cin {
                let plane = &mut dx[ci * p..(ci + 1) * p];
                for (ti, &(_, _, dy, dxo)) in ph.taps.iter().enumerate() {
                    let row = &dcol[(ci * t + ti) * p..(ci * t + ti + 1) * p];
                    for i in 0..g.h {
                        let iy = i as isize + dy;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        for j in 0..g.w {
                            let ix = j as isize + dxo;
                            if ix >= 0 && ix < g.w as isize {
                                let at = iy as usize * g.w + ix as usize;
                                plane[at] = plane[at] + row[i * g.w + j];
                            }
                        }
                    }
                }
            }
        }
    }
}
