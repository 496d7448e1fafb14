//! Spatial 2D, pointwise and temporally dilated 1D convolutions, all with zero
//! "same" padding and no bias.

use super::gemm::{gemm, Mat};
use super::tape::{Backward, Grads, Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

/// A 1D temporal filter of odd length `2d + 1` applied with dilation `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalFilter {
    taps: Vec<f64>,
    dilation: usize,
}

impl TemporalFilter {
    pub fn new(taps: Vec<f64>, dilation: usize) -> Result<Self> {
        if taps.len() % 2 == 0 {
            return Err(Error::arg("temporal filter", format!("length {} is not odd", taps.len())));
        }
        if dilation == 0 {
            return Err(Error::arg("temporal filter", "dilation must be positive"));
        }
        Ok(TemporalFilter { taps, dilation })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    /// Equivalent undilated filter.
    pub fn inflated(&self) -> TemporalFilter {
        TemporalFilter { taps: inflate_filter(&self.taps, self.dilation), dilation: 1 }
    }
}

/// Applies `filter` to a single-channel sequence with the same kernel the
/// network layers use.
pub fn temporal_conv1d_dilated(signal: &[f64], filter: &TemporalFilter) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![1, signal.len(), 1, 1, 1], signal.to_vec())?);
    let w = tape.constant(Tensor::new(vec![filter.taps.len(), 1, 1], filter.taps.clone())?);
    let y = tape.temporal_conv(x, w, filter.dilation, 1)?;
    Ok(tape.value(y).data().to_vec())
}

/// Inserts `r - 1` zeros between consecutive taps: `k'[r*i] = k[i]`.
pub fn inflate_filter(taps: &[f64], r: usize) -> Vec<f64> {
    let r = r.max(1);
    if taps.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; r * (taps.len() - 1) + 1];
    for (i, &k) in taps.iter().enumerate() {
        out[r * i] = k;
    }
    out
}

fn same_padding(size: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = size.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(size);
    (out, total / 2)
}

struct Geometry {
    frames: usize,
    y: usize,
    x: usize,
    cin: usize,
    yo: usize,
    xo: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_y: usize,
    pad_x: usize,
}

impl Geometry {
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }

    fn k(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn rows(&self) -> usize {
        self.frames * self.yo * self.xo
    }

    /// Calls `f(col_offset, src_offset)` for every in-bounds patch element.
    fn for_each_patch(&self, mut f: impl FnMut(usize, usize)) {
        let k = self.k();
        for fr in 0..self.frames {
            for oy in 0..self.yo {
                for ox in 0..self.xo {
                    let row = (fr * self.yo + oy) * self.xo + ox;
                    for ky in 0..self.kh {
                        let iy = (oy * self.stride + ky) as isize - self.pad_y as isize;
                        if iy < 0 || iy >= self.y as isize {
                            continue;
                        }
                        for kx in 0..self.kw {
                            let ix = (ox * self.stride + kx) as isize - self.pad_x as isize;
                            if ix < 0 || ix >= self.x as isize {
                                continue;
                            }
                            let src = ((fr * self.y + iy as usize) * self.x + ix as usize) * self.cin;
                            let col = (ky * self.kw + kx) * self.cin;
                            f(row * k + col, src);
                        }
                    }
                }
            }
        }
    }

    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let mut cols = vec![0.0; self.rows() * self.k()];
        let cin = self.cin;
        self.for_each_patch(|dst, src| cols[dst..dst + cin].copy_from_slice(&x[src..src + cin]));
        cols
    }

    fn col2im(&self, cols: &[f64], dx: &mut [f64]) {
        let cin = self.cin;
        self.for_each_patch(|dst, src| {
            for (d, c) in dx[src..src + cin].iter_mut().zip(&cols[dst..dst + cin]) {
                *d += c;
            }
        });
    }
}

struct Conv2dBack {
    x: Var,
    w: Var,
    geo: Geometry,
    cols: Option<Vec<f64>>,
}

impl Backward for Conv2dBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let geo = &self.geo;
        let cout = *gy.shape().last().unwrap();
        let rows = geo.rows();
        let k = geo.k();
        let xval = tape.value(self.x);
        let cols: &[f64] = self.cols.as_deref().unwrap_or(xval.data());
        if grads.needs(self.w) {
            let wshape = tape.value(self.w).shape().to_vec();
            let dw = grads.slot(self.w, &wshape);
            gemm(Mat::rm(cols, rows, k).t(), Mat::rm(gy.data(), rows, cout), 1.0, dw);
        }
        if grads.needs(self.x) {
            let w = tape.value(self.w).data();
            let xshape = xval.shape().to_vec();
            if geo.is_pointwise() {
                let dx = grads.slot(self.x, &xshape);
                gemm(Mat::rm(gy.data(), rows, cout), Mat::rm(w, k, cout).t(), 1.0, dx);
            } else {
                let mut dcols = vec![0.0; rows * k];
                gemm(Mat::rm(gy.data(), rows, cout), Mat::rm(w, k, cout).t(), 0.0, &mut dcols);
                let dx = grads.slot(self.x, &xshape);
                geo.col2im(&dcols, dx);
            }
        }
    }
}

struct GroupedPointwiseBack {
    x: Var,
    w: Var,
    groups: usize,
}

impl Backward for GroupedPointwiseBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let xv = tape.value(self.x);
        let wv = tape.value(self.w);
        let cin = *xv.shape().last().unwrap();
        let cout = *gy.shape().last().unwrap();
        let (ipg, opg) = (cin / self.groups, cout / self.groups);
        let rows = xv.len() / cin;
        if grads.needs(self.w) {
            let wshape = wv.shape().to_vec();
            let dw = grads.slot(self.w, &wshape);
            for r in 0..rows {
                let xr = &xv.data()[r * cin..(r + 1) * cin];
                let gr = &gy.data()[r * cout..(r + 1) * cout];
                for (o, &g) in gr.iter().enumerate() {
                    let base = (o / opg) * ipg;
                    for i in 0..ipg {
                        dw[i * cout + o] += xr[base + i] * g;
                    }
                }
            }
        }
        if grads.needs(self.x) {
            let xshape = xv.shape().to_vec();
            let w = wv.data();
            let dx = grads.slot(self.x, &xshape);
            for r in 0..rows {
                let gr = &gy.data()[r * cout..(r + 1) * cout];
                let dxr = &mut dx[r * cin..(r + 1) * cin];
                for (o, &g) in gr.iter().enumerate() {
                    let base = (o / opg) * ipg;
                    for i in 0..ipg {
                        dxr[base + i] += w[i * cout + o] * g;
                    }
                }
            }
        }
    }
}

struct TemporalBack {
    x: Var,
    w: Var,
    dilation: usize,
    groups: usize,
}

/// Iterates (tap, time shift, first valid t, end t) for a same-padded
/// temporal filter of `taps` elements: `out(t) += k[j] * F(t - r(j - d))`.
fn tap_ranges(taps: usize, dilation: usize, t: usize) -> impl Iterator<Item = (usize, isize, usize, usize)> {
    let d = (taps / 2) as isize;
    (0..taps).filter_map(move |j| {
        let shift = dilation as isize * (j as isize - d);
        // valid when 0 <= t - shift < T
        let lo = shift.max(0) as usize;
        let hi = (t as isize + shift).min(t as isize);
        if hi <= lo as isize {
            None
        } else {
            Some((j, shift, lo, hi as usize))
        }
    })
}

impl Backward for TemporalBack {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let xv = tape.value(self.x);
        let wv = tape.value(self.w);
        let [b, t, y, x, cin] = xv.dims5("temporal_conv").expect("checked in forward");
        let taps = wv.shape()[0];
        let cout = wv.shape()[2];
        let plane = y * x;
        let need_w = grads.needs(self.w);
        let need_x = grads.needs(self.x);
        let mut dw = need_w.then(|| vec![0.0; wv.len()]);
        let mut dx = need_x.then(|| vec![0.0; xv.len()]);
        for (j, shift, lo, hi) in tap_ranges(taps, self.dilation, t) {
            let wj = &wv.data()[j * (cin / self.groups) * cout..(j + 1) * (cin / self.groups) * cout];
            for bi in 0..b {
                let out_start = (bi * t + lo) * plane;
                let src_start = ((bi * t) as isize + lo as isize - shift) as usize * plane;
                let rows = (hi - lo) * plane;
                let g = &gy.data()[out_start * cout..(out_start + rows) * cout];
                let xs = &xv.data()[src_start * cin..(src_start + rows) * cin];
                if self.groups == 1 {
                    if let Some(dw) = dw.as_mut() {
                        gemm(Mat::rm(xs, rows, cin).t(), Mat::rm(g, rows, cout), 1.0, &mut dw[j * cin * cout..(j + 1) * cin * cout]);
                    }
                    if let Some(dx) = dx.as_mut() {
                        gemm(Mat::rm(g, rows, cout), Mat::rm(wj, cin, cout).t(), 1.0, &mut dx[src_start * cin..(src_start + rows) * cin]);
                    }
                } else {
                    let (ipg, opg) = (cin / self.groups, cout / self.groups);
                    for r in 0..rows {
                        let gr = &g[r * cout..(r + 1) * cout];
                        for (o, &gv) in gr.iter().enumerate() {
                            let base = (o / opg) * ipg;
                            for i in 0..ipg {
                                if let Some(dw) = dw.as_mut() {
                                    dw[(j * ipg + i) * cout + o] += xs[r * cin + base + i] * gv;
                                }
                                if let Some(dx) = dx.as_mut() {
                                    dx[(src_start + r) * cin + base + i] += wj[i * cout + o] * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
        if let Some(dw) = dw {
            let shape = wv.shape().to_vec();
            for (a, v) in grads.slot(self.w, &shape).iter_mut().zip(dw) {
                *a += v;
            }
        }
        if let Some(dx) = dx {
            let shape = xv.shape().to_vec();
            for (a, v) in grads.slot(self.x, &shape).iter_mut().zip(dx) {
                *a += v;
            }
        }
    }
}

impl Tape {
    /// Spatial convolution of `[B,T,Y,X,Cin]` with weights `[kh,kw,Cin,Cout]`,
    /// same padding, output spatial size `ceil(n / stride)`.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let [b, t, y, xw, cin] = self.value(x).dims5("conv2d")?;
        let (kh, kw, wcin, cout) = match self.value(w).shape() {
            &[kh, kw, ci, co] => (kh, kw, ci, co),
            s => return Err(Error::shape("conv2d", format!("weights must be [kh,kw,cin,cout], got {s:?}"))),
        };
        if wcin != cin {
            return Err(Error::shape("conv2d", format!("input has {cin} channels, weights expect {wcin}")));
        }
        if stride == 0 {
            return Err(Error::arg("conv2d", "stride must be positive"));
        }
        let (yo, pad_y) = same_padding(y, kh, stride);
        let (xo, pad_x) = same_padding(xw, kw, stride);
        let geo = Geometry { frames: b * t, y, x: xw, cin, yo, xo, kh, kw, stride, pad_y, pad_x };
        let rows = geo.rows();
        let mut out = vec![0.0; rows * cout];
        let cols = if geo.is_pointwise() { None } else { Some(geo.im2col(self.value(x).data())) };
        {
            let a = cols.as_deref().unwrap_or(self.value(x).data());
            gemm(Mat::rm(a, rows, geo.k()), Mat::rm(self.value(w).data(), geo.k(), cout), 0.0, &mut out);
        }
        let out = Tensor::new(vec![b, t, yo, xo, cout], out)?.check_finite("conv2d")?;
        Ok(self.push(out, &[x, w], Conv2dBack { x, w, geo, cols }))
    }

    /// Pointwise convolution with weights `[Cin/groups, Cout]`. With `groups > 1`
    /// output channel `o` reads input group `o / (Cout/groups)`.
    pub fn conv1x1(&mut self, x: Var, w: Var, groups: usize) -> Result<Var> {
        let xv = self.value(x);
        let cin = *xv.shape().last().ok_or_else(|| Error::shape("conv1x1", "scalar input"))?;
        let (ipg, cout) = match self.value(w).shape() {
            &[i, o] => (i, o),
            s => return Err(Error::shape("conv1x1", format!("weights must be [cin/groups, cout], got {s:?}"))),
        };
        if groups == 0 || cin % groups != 0 || cout % groups != 0 || cin / groups != ipg {
            return Err(Error::shape("conv1x1", format!("cin {cin}, cout {cout}, groups {groups}, weight rows {ipg}")));
        }
        if groups == 1 {
            let rows = xv.len() / cin;
            let mut out = vec![0.0; rows * cout];
            gemm(Mat::rm(xv.data(), rows, cin), Mat::rm(self.value(w).data(), cin, cout), 0.0, &mut out);
            let mut shape = xv.shape().to_vec();
            *shape.last_mut().unwrap() = cout;
            let out = Tensor::new(shape, out)?.check_finite("conv1x1")?;
            return Ok(self.push(out, &[x, w], GroupedPointwiseBackDense { x, w }));
        }
        let rows = xv.len() / cin;
        let opg = cout / groups;
        let wd = self.value(w).data();
        let mut out = vec![0.0; rows * cout];
        for r in 0..rows {
            let xr = &xv.data()[r * cin..(r + 1) * cin];
            for o in 0..cout {
                let base = (o / opg) * ipg;
                let mut acc = 0.0;
                for i in 0..ipg {
                    acc += xr[base + i] * wd[i * cout + o];
                }
                out[r * cout + o] = acc;
            }
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = cout;
        let out = Tensor::new(shape, out)?.check_finite("conv1x1")?;
        Ok(self.push(out, &[x, w], GroupedPointwiseBack { x, w, groups }))
    }

    /// Temporally dilated 1D convolution of `[B,T,Y,X,Cin]` with a filter bank
    /// `[taps, Cin/groups, Cout]`: `out(t) = sum_j k[j] F(t - r (j - d))`, zero
    /// padded so T is preserved. Taps are accumulated in increasing order.
    pub fn temporal_conv(&mut self, x: Var, w: Var, dilation: usize, groups: usize) -> Result<Var> {
        let [b, t, y, xw, cin] = self.value(x).dims5("temporal_conv")?;
        let (taps, ipg, cout) = match self.value(w).shape() {
            &[k, i, o] => (k, i, o),
            s => return Err(Error::shape("temporal_conv", format!("weights must be [taps,cin/groups,cout], got {s:?}"))),
        };
        if dilation == 0 {
            return Err(Error::arg("temporal_conv", "dilation must be positive"));
        }
        if taps % 2 == 0 {
            return Err(Error::arg("temporal_conv", format!("filter length {taps} is not odd")));
        }
        if groups == 0 || cin % groups != 0 || cout % groups != 0 || cin / groups != ipg {
            return Err(Error::shape("temporal_conv", format!("cin {cin}, cout {cout}, groups {groups}, weight {ipg}")));
        }
        let plane = y * xw;
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let mut out = vec![0.0; b * t * plane * cout];
        for (j, shift, lo, hi) in tap_ranges(taps, dilation, t) {
            let wj = &wd[j * ipg * cout..(j + 1) * ipg * cout];
            for bi in 0..b {
                let out_start = (bi * t + lo) * plane;
                let src_start = ((bi * t) as isize + lo as isize - shift) as usize * plane;
                let rows = (hi - lo) * plane;
                let xs = &xd[src_start * cin..(src_start + rows) * cin];
                let os = &mut out[out_start * cout..(out_start + rows) * cout];
                if groups == 1 {
                    gemm(Mat::rm(xs, rows, cin), Mat::rm(wj, cin, cout), 1.0, os);
                } else {
                    let opg = cout / groups;
                    for r in 0..rows {
                        for o in 0..cout {
                            let base = (o / opg) * ipg;
                            let mut acc = 0.0;
                            for i in 0..ipg {
                                acc += xs[r * cin + base + i] * wj[i * cout + o];
                            }
                            os[r * cout + o] += acc;
                        }
                    }
                }
            }
        }
        let out = Tensor::new(vec![b, t, y, xw, cout], out)?.check_finite("temporal_conv")?;
        Ok(self.push(out, &[x, w], TemporalBack { x, w, dilation, groups }))
    }
}

struct GroupedPointwiseBackDense {
    x: Var,
    w: Var,
}

impl Backward for GroupedPointwiseBackDense {
    fn backward(&self, gy: &Tensor, tape: &Tape, grads: &mut Grads) {
        let xv = tape.value(self.x);
        let wv = tape.value(self.w);
        let cin = *xv.shape().last().unwrap();
        let cout = *gy.shape().last().unwrap();
        let rows = xv.len() / cin;
        if grads.needs(self.w) {
            let shape = wv.shape().to_vec();
            let dw = grads.slot(self.w, &shape);
            gemm(Mat::rm(xv.data(), rows, cin).t(), Mat::rm(gy.data(), rows, cout), 1.0, dw);
        }
        if grads.needs(self.x) {
            let shape = xv.shape().to_vec();
            let dx = grads.slot(self.x, &shape);
            gemm(Mat::rm(gy.data(), rows, cout), Mat::rm(wv.data(), cin, cout).t(), 1.0, dx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(values: &[f64]) -> Tensor {
        Tensor::new(vec![1, values.len(), 1, 1, 1], values.to_vec()).unwrap()
    }

    fn filt(taps: &[f64]) -> Tensor {
        Tensor::new(vec![taps.len(), 1, 1], taps.to_vec()).unwrap()
    }

    #[test]
    fn inflate_examples() {
        assert_eq!(inflate_filter(&[1.0, 2.0, 3.0], 2), vec![1.0, 0.0, 2.0, 0.0, 3.0]);
        assert_eq!(inflate_filter(&[5.0], 8), vec![5.0]);
        assert_eq!(inflate_filter(&[1.0, -1.0, 2.0], 1), vec![1.0, -1.0, 2.0]);
        assert_eq!(inflate_filter(&[1.0, 2.0], 4).len(), 5);
    }

    #[test]
    fn identity_filter_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(seq(&[1.0, 2.0, 3.0]));
        let w = tape.constant(filt(&[1.0]));
        let y = tape.temporal_conv(x, w, 1, 1).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn dilated_difference_at_t2() {
        let mut tape = Tape::new();
        let x = tape.constant(seq(&[1.0, 2.0, 3.0, 4.0, 5.0]));
        let w = tape.constant(filt(&[1.0, 0.0, -1.0]));
        let y = tape.temporal_conv(x, w, 2, 1).unwrap();
        assert_eq!(tape.value(y).data()[2], 4.0);
    }

    #[test]
    fn rejects_even_filters_and_zero_dilation() {
        assert!(TemporalFilter::new(vec![1.0, 2.0], 1).is_err());
        assert!(TemporalFilter::new(vec![1.0], 0).is_err());
        let mut tape = Tape::new();
        let x = tape.constant(seq(&[1.0, 2.0]));
        let w = tape.constant(filt(&[1.0, 1.0]));
        assert!(tape.temporal_conv(x, w, 1, 1).is_err());
        let w = tape.constant(filt(&[1.0]));
        assert!(tape.temporal_conv(x, w, 0, 1).is_err());
    }

    #[test]
    fn pointwise_identity() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..2 * 3 * 2 * 2 * 3).map(|v| v as f64 * 0.5 - 3.0).collect();
        let x = tape.constant(Tensor::new(vec![2, 3, 2, 2, 3], data.clone()).unwrap());
        let eye = Tensor::from_fn(&[3, 3], |i| if i / 3 == i % 3 { 1.0 } else { 0.0 });
        let w = tape.constant(eye);
        let y = tape.conv1x1(x, w, 1).unwrap();
        assert_eq!(tape.value(y).data(), data.as_slice());
    }

    #[test]
    fn ones_stencil_interior_is_nine() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[1, 1, 4, 4, 1], 1.0));
        let w = tape.constant(Tensor::full(&[3, 3, 1, 1], 1.0));
        let y = tape.conv2d(x, w, 1).unwrap();
        let out = tape.value(y);
        assert_eq!(out.shape(), &[1, 1, 4, 4, 1]);
        // interior (1,1), edge (0,1) and corner (0,0)
        assert_eq!(out.data()[5], 9.0);
        assert_eq!(out.data()[1], 6.0);
        assert_eq!(out.data()[0], 4.0);
    }

    #[test]
    fn stride_maps_to_ceil() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[1, 2, 5, 7, 2], 1.0));
        let w = tape.constant(Tensor::full(&[3, 3, 2, 4], 0.1));
        let y = tape.conv2d(x, w, 2).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 2, 3, 4, 4]);
    }

    #[test]
    fn grouped_pointwise_reads_its_group() {
        let mut tape = Tape::new();
        // 4 inputs, 2 outputs, 2 groups: out0 = x0 + x1, out1 = 10*(x2 + x3)
        let x = tape.constant(Tensor::new(vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let w = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 10.0, 1.0, 10.0]).unwrap());
        let y = tape.conv1x1(x, w, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 70.0]);
    }
}
