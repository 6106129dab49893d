//! Convolution and dense layers with hand-written backward passes.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::params::{Gradients, ParamId, ParamStore};

/// Channel-major activation map, `channels × height × width`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Per-channel mean over the spatial positions.
    pub fn global_average_pool(&self) -> Vec<f64> {
        let area = (self.height * self.width) as f64;
        self.data
            .chunks_exact(self.height * self.width)
            .map(|plane| plane.iter().sum::<f64>() / area)
            .collect()
    }

    /// Backward of [`global_average_pool`](Self::global_average_pool).
    pub fn spread_pooled_gradient(grad: &[f64], height: usize, width: usize) -> FeatureMap {
        let area = (height * width) as f64;
        let data = grad
            .iter()
            .flat_map(|g| std::iter::repeat_n(g / area, height * width))
            .collect();
        FeatureMap {
            channels: grad.len(),
            height,
            width,
            data,
        }
    }
}

/// Rectifier that keeps NaN visible instead of clamping it to zero.
pub fn relu(x: f64) -> f64 {
    if x > 0.0 || x.is_nan() {
        x
    } else {
        0.0
    }
}

/// One convolution + ReLU stage of a backbone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvBlockSpec {
    pub const fn new(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        ConvBlockSpec {
            out_channels,
            kernel,
            stride,
            padding,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    /// Registers a He-normal initialized convolution in `store`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        group: &str,
        in_channels: usize,
        spec: ConvBlockSpec,
        rng: &mut R,
    ) -> Conv2d {
        let ConvBlockSpec {
            out_channels,
            kernel,
            stride,
            padding,
        } = spec;
        let fan_in = (in_channels * kernel * kernel) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive fan-in");
        let n = out_channels * in_channels * kernel * kernel;
        let weights = (0..n).map(|_| normal.sample(rng)).collect();
        let weight = store.push(
            format!("{prefix}.weight"),
            group,
            vec![out_channels, in_channels, kernel, kernel],
            weights,
        );
        let bias = store.push(format!("{prefix}.bias"), group, vec![out_channels], vec![0.0; out_channels]);
        Conv2d {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn output_size(&self, input: usize) -> usize {
        (input + 2 * self.padding - self.kernel) / self.stride + 1
    }

    /// Yields `(output index, input index)` pairs along one axis for kernel
    /// offset `k`, skipping positions that land in the zero padding.
    fn taps(&self, k: usize, in_len: usize, out_len: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..out_len).filter_map(move |o| {
            let i = (o * self.stride + k) as isize - self.padding as isize;
            (i >= 0 && (i as usize) < in_len).then_some((o, i as usize))
        })
    }

    pub fn forward(&self, store: &ParamStore, input: &FeatureMap) -> FeatureMap {
        debug_assert_eq!(input.channels, self.in_channels);
        let (oh, ow) = (self.output_size(input.height), self.output_size(input.width));
        let w = store.values(self.weight);
        let b = store.values(self.bias);
        let mut out = FeatureMap::zeros(self.out_channels, oh, ow);
        let k = self.kernel;
        let in_plane = input.height * input.width;
        let rows: Vec<Vec<(usize, usize)>> = (0..k).map(|ky| self.taps(ky, input.height, oh).collect()).collect();
        let cols: Vec<Vec<(usize, usize)>> = (0..k).map(|kx| self.taps(kx, input.width, ow).collect()).collect();
        for oc in 0..self.out_channels {
            let plane = &mut out.data[oc * oh * ow..(oc + 1) * oh * ow];
            plane.fill(b[oc]);
            for ic in 0..self.in_channels {
                let src = &input.data[ic * in_plane..(ic + 1) * in_plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = w[((oc * self.in_channels + ic) * k + ky) * k + kx];
                        for &(oy, iy) in &rows[ky] {
                            let dst = &mut plane[oy * ow..(oy + 1) * ow];
                            let srow = &src[iy * input.width..(iy + 1) * input.width];
                            for &(ox, ix) in &cols[kx] {
                                dst[ox] += wv * srow[ix];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates weight/bias gradients for `grad_out` (gradient w.r.t. the
    /// convolution output) and, when `want_input` is set, returns the
    /// gradient w.r.t. `input`.
    pub fn backward(
        &self,
        store: &ParamStore,
        input: &FeatureMap,
        grad_out: &FeatureMap,
        grads: &mut Gradients,
        want_input: bool,
    ) -> Option<FeatureMap> {
        let (oh, ow) = (grad_out.height, grad_out.width);
        let k = self.kernel;
        let in_plane = input.height * input.width;
        let rows: Vec<Vec<(usize, usize)>> = (0..k).map(|ky| self.taps(ky, input.height, oh).collect()).collect();
        let cols: Vec<Vec<(usize, usize)>> = (0..k).map(|kx| self.taps(kx, input.width, ow).collect()).collect();

        {
            let gb = grads.get_mut(self.bias);
            for (g, plane) in gb.iter_mut().zip(grad_out.data.chunks(oh * ow)) {
                *g += plane.iter().sum::<f64>();
            }
        }
        {
            let gw = grads.get_mut(self.weight);
            for oc in 0..self.out_channels {
                let g = &grad_out.data[oc * oh * ow..(oc + 1) * oh * ow];
                for ic in 0..self.in_channels {
                    let src = &input.data[ic * in_plane..(ic + 1) * in_plane];
                    for ky in 0..k {
                        for kx in 0..k {
                            let mut acc = 0.0;
                            for &(oy, iy) in &rows[ky] {
                                let grow = &g[oy * ow..(oy + 1) * ow];
                                let srow = &src[iy * input.width..(iy + 1) * input.width];
                                for &(ox, ix) in &cols[kx] {
                                    acc += grow[ox] * srow[ix];
                                }
                            }
                            gw[((oc * self.in_channels + ic) * k + ky) * k + kx] += acc;
                        }
                    }
                }
            }
        }
        if !want_input {
            return None;
        }
        let w = store.values(self.weight);
        let mut grad_in = FeatureMap::zeros(input.channels, input.height, input.width);
        for oc in 0..self.out_channels {
            let g = &grad_out.data[oc * oh * ow..(oc + 1) * oh * ow];
            for ic in 0..self.in_channels {
                let dst = &mut grad_in.data[ic * in_plane..(ic + 1) * in_plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = w[((oc * self.in_channels + ic) * k + ky) * k + kx];
                        for &(oy, iy) in &rows[ky] {
                            let grow = &g[oy * ow..(oy + 1) * ow];
                            let drow = &mut dst[iy * input.width..(iy + 1) * input.width];
                            for &(ox, ix) in &cols[kx] {
                                drow[ix] += wv * grow[ox];
                            }
                        }
                    }
                }
            }
        }
        Some(grad_in)
    }
}

/// Fully connected layer; weight is stored `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    /// Registers a Glorot-uniform initialized layer in `store`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        group: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Dense {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let uniform = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let weights = (0..inputs * outputs).map(|_| uniform.sample(rng)).collect();
        let weight = store.push(format!("{prefix}.weight"), group, vec![outputs, inputs], weights);
        let bias = store.push(format!("{prefix}.bias"), group, vec![outputs], vec![0.0; outputs]);
        Dense {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn forward(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let w = store.values(self.weight);
        let b = store.values(self.bias);
        (0..self.outputs)
            .map(|o| {
                let row = &w[o * self.inputs..(o + 1) * self.inputs];
                b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, store: &ParamStore, x: &[f64], grad_out: &[f64], grads: &mut Gradients) -> Vec<f64> {
        {
            let gw = grads.get_mut(self.weight);
            for (o, g) in grad_out.iter().enumerate() {
                if *g == 0.0 {
                    continue;
                }
                for (gwi, xi) in gw[o * self.inputs..(o + 1) * self.inputs].iter_mut().zip(x) {
                    *gwi += g * xi;
                }
            }
        }
        for (gb, g) in grads.get_mut(self.bias).iter_mut().zip(grad_out) {
            *gb += g;
        }
        let w = store.values(self.weight);
        let mut grad_in = vec![0.0; self.inputs];
        for (o, g) in grad_out.iter().enumerate() {
            for (gi, wi) in grad_in.iter_mut().zip(&w[o * self.inputs..(o + 1) * self.inputs]) {
                *gi += g * wi;
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn conv_loss(conv: &Conv2d, store: &ParamStore, input: &FeatureMap, probe: &[f64]) -> f64 {
        conv.forward(store, input).data.iter().zip(probe).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv_output_geometry() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(0, &[]);
        let c = Conv2d::new(&mut store, "c", "g", 3, ConvBlockSpec::new(4, 3, 4, 1), &mut r);
        assert_eq!(c.output_size(224), 56);
        let c = Conv2d::new(&mut store, "d", "g", 3, ConvBlockSpec::new(4, 3, 2, 1), &mut r);
        assert_eq!(c.output_size(56), 28);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(1, &[]);
        let conv = Conv2d::new(&mut store, "c", "g", 2, ConvBlockSpec::new(3, 3, 2, 1), &mut r);
        let input = FeatureMap {
            channels: 2,
            height: 5,
            width: 6,
            data: (0..60).map(|i| ((i * 7) % 11) as f64 - 5.0).collect(),
        };
        let out = conv.forward(&store, &input);
        let w = store.values(conv.weight);
        for oc in 0..3 {
            for oy in 0..out.height {
                for ox in 0..out.width {
                    let mut acc = store.values(conv.bias)[oc];
                    for ic in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * 2 + ky) as isize - 1;
                                let ix = (ox * 2 + kx) as isize - 1;
                                if iy < 0 || ix < 0 || iy >= 5 || ix >= 6 {
                                    continue;
                                }
                                acc += w[((oc * 2 + ic) * 3 + ky) * 3 + kx]
                                    * input.data[(ic * 5 + iy as usize) * 6 + ix as usize];
                            }
                        }
                    }
                    let got = out.data[(oc * out.height + oy) * out.width + ox];
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(2, &[]);
        let conv = Conv2d::new(&mut store, "c", "g", 2, ConvBlockSpec::new(2, 3, 2, 1), &mut r);
        for v in store.iter_mut().flat_map(|p| p.values.iter_mut()) {
            *v += 0.1;
        }
        let input = FeatureMap {
            channels: 2,
            height: 5,
            width: 5,
            data: (0..50).map(|i| (i as f64 * 0.37).sin()).collect(),
        };
        let oh = conv.output_size(5);
        let probe: Vec<f64> = (0..2 * oh * oh).map(|i| (i as f64 * 0.91).cos()).collect();
        let grad_out = FeatureMap {
            channels: 2,
            height: oh,
            width: oh,
            data: probe.clone(),
        };
        let mut grads = store.zero_gradients();
        let grad_in = conv.backward(&store, &input, &grad_out, &mut grads, true).unwrap();

        let h = 1e-6;
        for id in [conv.weight, conv.bias] {
            for i in 0..store.values(id).len() {
                let mut plus = store.clone();
                plus.iter_mut().nth(id.0).unwrap().values[i] += h;
                let mut minus = store.clone();
                minus.iter_mut().nth(id.0).unwrap().values[i] -= h;
                let numeric = (conv_loss(&conv, &plus, &input, &probe) - conv_loss(&conv, &minus, &input, &probe)) / (2.0 * h);
                assert!((numeric - grads.get(id)[i]).abs() < 1e-6, "param {i}");
            }
        }
        for i in 0..input.data.len() {
            let mut plus = input.clone();
            plus.data[i] += h;
            let mut minus = input.clone();
            minus.data[i] -= h;
            let numeric = (conv_loss(&conv, &store, &plus, &probe) - conv_loss(&conv, &store, &minus, &probe)) / (2.0 * h);
            assert!((numeric - grad_in.data[i]).abs() < 1e-6, "input {i}");
        }
    }

    #[test]
    fn gap_and_its_backward() {
        let fm = FeatureMap {
            channels: 2,
            height: 2,
            width: 2,
            data: vec![1.0, 2.0, 3.0, 4.0, -1.0, -1.0, -1.0, 3.0],
        };
        assert_eq!(fm.global_average_pool(), vec![2.5, 0.0]);
        let g = FeatureMap::spread_pooled_gradient(&[4.0, 8.0], 2, 2);
        assert_eq!(g.data, vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
    }
}
