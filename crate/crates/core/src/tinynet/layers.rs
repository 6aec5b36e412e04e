use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        units: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Conv3d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    GlobalAvgPool,
    Flatten,
}

/// Output length along one spatial axis of a valid (unpadded) convolution.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize) -> usize {
    (len - kernel) / stride + 1
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, units } => inputs * units + units,
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel + out_channels,
            LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel * kernel + out_channels,
            _ => 0,
        }
    }

    /// `(fan_in, fan_out, weight_count)` for initialization.
    pub fn fans(&self) -> Option<(usize, usize, usize)> {
        match *self {
            LayerSpec::Dense { inputs, units } => Some((inputs, units, inputs * units)),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let k = kernel * kernel;
                Some((in_channels * k, out_channels * k, out_channels * in_channels * k))
            }
            LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let k = kernel * kernel * kernel;
                Some((in_channels * k, out_channels * k, out_channels * in_channels * k))
            }
            _ => None,
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: &str| {
            Err(Error::InvalidSpec(format!(
                "layer {self:?} cannot take input {input:?}: {why}"
            )))
        };
        match *self {
            LayerSpec::Dense { inputs, units } => {
                if input.len() != 1 || input[0] != inputs {
                    return bad("dense expects a flat vector of matching width");
                }
                Ok(vec![units])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            }
            | LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let dims = if matches!(self, LayerSpec::Conv2d { .. }) { 2 } else { 3 };
                if input.len() != dims + 1 || input[0] != in_channels {
                    return bad("channel-first input of matching rank and channels expected");
                }
                if kernel == 0 || stride == 0 {
                    return bad("kernel and stride must be positive");
                }
                let mut out = vec![out_channels];
                for &len in &input[1..] {
                    if kernel > len {
                        return bad("kernel larger than input");
                    }
                    out.push(conv_out_len(len, kernel, stride));
                }
                Ok(out)
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::GlobalAvgPool => {
                if input.len() < 2 {
                    return bad("pooling needs a channel axis and spatial axes");
                }
                Ok(vec![input[0]])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    pub fn forward(&self, params: &[f64], input: &[f64], in_shape: &[usize], out: &mut Vec<f64>) {
        out.clear();
        match *self {
            LayerSpec::Dense { inputs, units } => {
                let (w, b) = params.split_at(inputs * units);
                for u in 0..units {
                    let row = &w[u * inputs..(u + 1) * inputs];
                    out.push(b[u] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>());
                }
            }
            LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. } => {
                let g = ConvGeom::new(self, in_shape);
                out.resize(g.out_len(), 0.0);
                g.forward(params, input, out);
            }
            LayerSpec::Relu => out.extend(input.iter().map(|&v| v.max(0.0))),
            LayerSpec::GlobalAvgPool => {
                let c = in_shape[0];
                let s = input.len() / c;
                for ch in 0..c {
                    out.push(input[ch * s..(ch + 1) * s].iter().sum::<f64>() / s as f64);
                }
            }
            LayerSpec::Flatten => out.extend_from_slice(input),
        }
    }

    /// Propagates `dout` back to the layer input; accumulates parameter
    /// gradients into `dparams` when given.
    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        in_shape: &[usize],
        dout: &[f64],
        dparams: Option<&mut [f64]>,
    ) -> Vec<f64> {
        match *self {
            LayerSpec::Dense { inputs, units } => {
                let w = &params[..inputs * units];
                let mut din = vec![0.0; inputs];
                for u in 0..units {
                    let row = &w[u * inputs..(u + 1) * inputs];
                    for (d, a) in din.iter_mut().zip(row) {
                        *d += a * dout[u];
                    }
                }
                if let Some(dp) = dparams {
                    let (dw, db) = dp.split_at_mut(inputs * units);
                    for u in 0..units {
                        for i in 0..inputs {
                            dw[u * inputs + i] += dout[u] * input[i];
                        }
                        db[u] += dout[u];
                    }
                }
                din
            }
            LayerSpec::Conv2d { .. } | LayerSpec::Conv3d { .. } => {
                ConvGeom::new(self, in_shape).backward(params, input, dout, dparams)
            }
            LayerSpec::Relu => input
                .iter()
                .zip(dout)
                .map(|(&x, &d)| if x > 0.0 { d } else { 0.0 })
                .collect(),
            LayerSpec::GlobalAvgPool => {
                let c = in_shape[0];
                let s = input.len() / c;
                let mut din = vec![0.0; input.len()];
                for ch in 0..c {
                    for v in &mut din[ch * s..(ch + 1) * s] {
                        *v = dout[ch] / s as f64;
                    }
                }
                din
            }
            LayerSpec::Flatten => dout.to_vec(),
        }
    }
}

/// Convolution geometry; a 2D convolution is run as 3D with a unit third
/// axis.
struct ConvGeom {
    cin: usize,
    cout: usize,
    k: [usize; 3],
    stride: [usize; 3],
    inp: [usize; 3],
    out: [usize; 3],
}

impl ConvGeom {
    fn new(spec: &LayerSpec, in_shape: &[usize]) -> Self {
        let (cin, cout, kernel, stride, dims) = match *spec {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => (in_channels, out_channels, kernel, stride, 2),
            LayerSpec::Conv3d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => (in_channels, out_channels, kernel, stride, 3),
            _ => unreachable!("not a convolution"),
        };
        let mut k = [1; 3];
        let mut s = [1; 3];
        let mut inp = [1; 3];
        let mut out = [1; 3];
        for d in 0..dims {
            k[d] = kernel;
            s[d] = stride;
            inp[d] = in_shape[1 + d];
            out[d] = conv_out_len(inp[d], kernel, stride);
        }
        ConvGeom {
            cin,
            cout,
            k,
            stride: s,
            inp,
            out,
        }
    }

    fn out_len(&self) -> usize {
        self.cout * self.out.iter().product::<usize>()
    }

    fn weight_index(&self, o: usize, c: usize, u: usize, v: usize, w: usize) -> usize {
        (((o * self.cin + c) * self.k[0] + u) * self.k[1] + v) * self.k[2] + w
    }

    fn in_index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.inp[0] + x) * self.inp[1] + y) * self.inp[2] + z
    }

    /// Calls `f(out_index, weight_index, in_index)` for every multiply-add.
    /// Weights are the outer loops so the innermost loop walks contiguous
    /// output positions.
    #[inline(always)]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let [o0, o1, o2] = self.out;
        let [s0, s1, s2] = self.stride;
        for o in 0..self.cout {
            for c in 0..self.cin {
                for u in 0..self.k[0] {
                    for v in 0..self.k[1] {
                        for w in 0..self.k[2] {
                            let wi = self.weight_index(o, c, u, v, w);
                            for i in 0..o0 {
                                for j in 0..o1 {
                                    let ob = ((o * o0 + i) * o1 + j) * o2;
                                    let ib = self.in_index(c, i * s0 + u, j * s1 + v, w);
                                    for l in 0..o2 {
                                        f(ob + l, wi, ib + l * s2);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn n_weights(&self) -> usize {
        self.cout * self.cin * self.k.iter().product::<usize>()
    }

    fn spatial_out(&self) -> usize {
        self.out.iter().product()
    }

    fn forward(&self, params: &[f64], input: &[f64], out: &mut [f64]) {
        let (w, b) = params.split_at(self.n_weights());
        let so = self.spatial_out();
        for (oi, v) in out.iter_mut().enumerate() {
            *v = b[oi / so];
        }
        self.for_each_tap(|oi, wi, ii| out[oi] += w[wi] * input[ii]);
    }

    fn backward(&self, params: &[f64], input: &[f64], dout: &[f64], dparams: Option<&mut [f64]>) -> Vec<f64> {
        let nw = self.n_weights();
        let w = &params[..nw];
        let mut din = vec![0.0; input.len()];
        self.for_each_tap(|oi, wi, ii| din[ii] += w[wi] * dout[oi]);
        if let Some(dp) = dparams {
            let (dw, db) = dp.split_at_mut(nw);
            self.for_each_tap(|oi, wi, ii| dw[wi] += dout[oi] * input[ii]);
            let so = self.spatial_out();
            for (oi, d) in dout.iter().enumerate() {
                db[oi / so] += d;
            }
        }
        din
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shapes_follow_stride_arithmetic() {
        let c = LayerSpec::Conv2d {
            in_channels: 3,
            out_channels: 5,
            kernel: 3,
            stride: 2,
        };
        // floor((16 - 3) / 2) + 1 = 7, floor((9 - 3) / 2) + 1 = 4
        assert_eq!(c.output_shape(&[3, 16, 9]).unwrap(), vec![5, 7, 4]);
        let c3 = LayerSpec::Conv3d {
            in_channels: 1,
            out_channels: 2,
            kernel: 4,
            stride: 4,
        };
        assert_eq!(c3.output_shape(&[1, 12, 12, 13]).unwrap(), vec![2, 3, 3, 3]);
        assert!(c.output_shape(&[3, 2, 9]).is_err());
        assert_eq!(c.param_count(), 5 * 3 * 9 + 5);
    }

    #[test]
    fn relu_forward() {
        let mut out = Vec::new();
        LayerSpec::Relu.forward(&[], &[-1.0, 2.0], &[2], &mut out);
        assert_eq!(out, vec![0.0, 2.0]);
    }

    #[test]
    fn conv_matches_direct_sum() {
        // 1 channel 3x3 input, 2x2 kernel stride 1, one output channel
        let spec = LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 1,
            kernel: 2,
            stride: 1,
        };
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let params = [1.0, 0.0, 0.0, -1.0, 0.5];
        let mut out = Vec::new();
        spec.forward(&params, &x, &[1, 3, 3], &mut out);
        // y[i,j] = x[i,j] - x[i+1,j+1] + 0.5 = -4 + 0.5
        assert_eq!(out, vec![-3.5; 4]);
    }
}
