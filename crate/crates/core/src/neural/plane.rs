use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;

/// Per-axis texel addressing for coordinates outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressMode {
    Wrap,
    Clamp,
}

impl AddressMode {
    #[inline]
    fn resolve(self, i: i64, n: usize) -> usize {
        match self {
            AddressMode::Wrap => i.rem_euclid(n as i64) as usize,
            AddressMode::Clamp => i.clamp(0, n as i64 - 1) as usize,
        }
    }
}

/// The four bilinear taps of a fetch: texel indices (`row * width + col`)
/// and weights. Taps may repeat an index under clamping or on 1-texel axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearTaps {
    pub texels: [usize; 4],
    pub weights: [f64; 4],
}

/// A `height x width` grid of `channels`-dimensional features, stored
/// `[row][col][channel]`. Texel `(row, col)` is centered at
/// `((col + 0.5) / width, (row + 0.5) / height)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePlane<T = f32> {
    width: usize,
    height: usize,
    channels: usize,
    pub wrap_u: AddressMode,
    pub wrap_v: AddressMode,
    data: Vec<T>,
}

impl<T: Real> FeaturePlane<T> {
    pub fn zeros(width: usize, height: usize, channels: usize, wrap_u: AddressMode, wrap_v: AddressMode) -> Self {
        assert!(width > 0 && height > 0 && channels > 0, "plane dimensions must be positive");
        FeaturePlane {
            width,
            height,
            channels,
            wrap_u,
            wrap_v,
            data: vec![T::zero(); width * height * channels],
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        channels: usize,
        wrap_u: AddressMode,
        wrap_v: AddressMode,
        data: Vec<T>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Argument("plane dimensions must be positive".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::Argument(format!(
                "plane data has {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("plane values must be finite".into()));
        }
        Ok(FeaturePlane {
            width,
            height,
            channels,
            wrap_u,
            wrap_v,
            data,
        })
    }

    /// Zero-mean uniform init with fan-in scaling, treating the plane as a
    /// `(1, channels, height, width)` tensor: bound = gain * sqrt(3 / fan_in),
    /// gain = sqrt(2 / (1 + slope^2)), fan_in = channels * height * width.
    pub fn he_uniform(
        width: usize,
        height: usize,
        channels: usize,
        wrap_u: AddressMode,
        wrap_v: AddressMode,
        leaky_slope: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut plane = Self::zeros(width, height, channels, wrap_u, wrap_v);
        let fan_in = (width * height * channels) as f64;
        let gain = (2.0 / (1.0 + leaky_slope * leaky_slope)).sqrt();
        let bound = gain * (3.0 / fan_in).sqrt();
        for v in &mut plane.data {
            *v = T::lit(rng.gen_range(-bound..bound));
        }
        plane
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn texel(&self, row: usize, col: usize) -> &[T] {
        let base = (row * self.width + col) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn texel_mut(&mut self, row: usize, col: usize) -> &mut [T] {
        let base = (row * self.width + col) * self.channels;
        &mut self.data[base..base + self.channels]
    }

    pub fn byte_size(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>()
    }

    pub fn same_shape<U>(&self, other: &FeaturePlane<U>) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
            && self.wrap_u == other.wrap_u
            && self.wrap_v == other.wrap_v
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> FeaturePlane<U> {
        FeaturePlane {
            width: self.width,
            height: self.height,
            channels: self.channels,
            wrap_u: self.wrap_u,
            wrap_v: self.wrap_v,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    #[inline]
    pub fn taps(&self, uv: [f64; 2]) -> BilinearTaps {
        let x = uv[0] * self.width as f64 - 0.5;
        let y = uv[1] * self.height as f64 - 0.5;
        let (x0, y0) = (x.floor(), y.floor());
        let (tx, ty) = (x - x0, y - y0);
        let (xi, yi) = (x0 as i64, y0 as i64);
        let c0 = self.wrap_u.resolve(xi, self.width);
        let c1 = self.wrap_u.resolve(xi + 1, self.width);
        let r0 = self.wrap_v.resolve(yi, self.height);
        let r1 = self.wrap_v.resolve(yi + 1, self.height);
        let w = self.width;
        BilinearTaps {
            texels: [r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1],
            weights: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
        }
    }

    /// Bilinear fetch into `out` (length `channels`).
    #[inline]
    pub fn fetch_into(&self, uv: [f64; 2], out: &mut [T]) {
        let taps = self.taps(uv);
        self.gather(&taps, out);
    }

    #[inline]
    pub fn gather(&self, taps: &BilinearTaps, out: &mut [T]) {
        let c = self.channels;
        out.iter_mut().for_each(|v| *v = T::zero());
        for (texel, weight) in taps.texels.iter().zip(taps.weights) {
            if weight == 0.0 {
                continue;
            }
            let w = T::lit(weight);
            let src = &self.data[texel * c..(texel + 1) * c];
            for (o, s) in out.iter_mut().zip(src) {
                *o += w * *s;
            }
        }
    }

    pub fn fetch(&self, uv: [f64; 2]) -> Vec<T> {
        let mut out = vec![T::zero(); self.channels];
        self.fetch_into(uv, &mut out);
        out
    }

    /// Adds the fetch gradient for `grad_out` into a dense buffer shaped like `data`.
    #[inline]
    pub fn accumulate_backward(&self, taps: &BilinearTaps, grad_out: &[T], grad: &mut [T]) {
        let c = self.channels;
        for (texel, weight) in taps.texels.iter().zip(taps.weights) {
            if weight == 0.0 {
                continue;
            }
            let w = T::lit(weight);
            for (g, go) in grad[texel * c..(texel + 1) * c].iter_mut().zip(grad_out) {
                *g += w * *go;
            }
        }
    }

    /// Sparse gradient of [`fetch`](Self::fetch) with respect to the plane.
    ///
    /// At most four texels; contributions landing on the same texel are merged
    /// and zero contributions are dropped.
    pub fn fetch_backward(&self, uv: [f64; 2], grad_out: &[T]) -> Vec<TexelGrad<T>> {
        assert_eq!(grad_out.len(), self.channels);
        if grad_out.iter().all(|g| *g == T::zero()) {
            return Vec::new();
        }
        let taps = self.taps(uv);
        let mut out: Vec<TexelGrad<T>> = Vec::with_capacity(4);
        for (texel, weight) in taps.texels.iter().zip(taps.weights) {
            if weight == 0.0 {
                continue;
            }
            let w = T::lit(weight);
            let entry = match out.iter_mut().position(|e| e.texel == *texel) {
                Some(i) => &mut out[i],
                None => {
                    out.push(TexelGrad {
                        texel: *texel,
                        grad: vec![T::zero(); self.channels],
                    });
                    out.last_mut().unwrap()
                }
            };
            for (g, go) in entry.grad.iter_mut().zip(grad_out) {
                *g += w * *go;
            }
        }
        out
    }
}

/// Gradient contribution to one texel (`row * width + col`).
#[derive(Debug, Clone, PartialEq)]
pub struct TexelGrad<T> {
    pub texel: usize,
    pub grad: Vec<T>,
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_plane(w: usize, h: usize, c: usize, wrap_u: AddressMode, wrap_v: AddressMode, seed: u64) -> FeaturePlane<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeaturePlane::from_data(w, h, c, wrap_u, wrap_v, data).unwrap()
    }

    #[test]
    fn texel_center_returns_texel() {
        let p = random_plane(5, 3, 4, AddressMode::Wrap, AddressMode::Clamp, 1);
        for row in 0..3 {
            for col in 0..5 {
                let uv = [(col as f64 + 0.5) / 5.0, (row as f64 + 0.5) / 3.0];
                assert_eq!(p.fetch(uv), p.texel(row, col));
            }
        }
    }

    #[test]
    fn midpoint_is_mean_of_neighbors() {
        let p = random_plane(4, 4, 3, AddressMode::Clamp, AddressMode::Clamp, 2);
        let got = p.fetch([2.0 / 4.0, 1.5 / 4.0]);
        for c in 0..3 {
            assert_abs_diff_eq!(got[c], 0.5 * (p.texel(1, 1)[c] + p.texel(1, 2)[c]), epsilon = 1e-15);
        }
    }

    #[test]
    fn clamp_holds_edge_texels() {
        let p = random_plane(4, 2, 2, AddressMode::Clamp, AddressMode::Clamp, 3);
        assert_eq!(p.fetch([-3.0, -1.0]), p.texel(0, 0));
        assert_eq!(p.fetch([7.0, 0.25]), p.texel(0, 3));
    }

    #[test]
    fn wrap_seam_interpolates_across_edge() {
        let p = random_plane(4, 4, 2, AddressMode::Wrap, AddressMode::Wrap, 4);
        // u = 0 sits halfway between the last and first column centers.
        let got = p.fetch([0.0, 0.125]);
        for c in 0..2 {
            assert_abs_diff_eq!(got[c], 0.5 * (p.texel(0, 3)[c] + p.texel(0, 0)[c]), epsilon = 1e-15);
        }
        let a = p.fetch([1.0 - 1e-9, 0.3]);
        let b = p.fetch([1e-9, 0.3]);
        for c in 0..2 {
            assert_abs_diff_eq!(a[c], b[c], epsilon = 1e-7);
        }
    }

    #[test]
    fn zero_gradient_scatters_nothing() {
        let p = random_plane(3, 3, 2, AddressMode::Wrap, AddressMode::Wrap, 5);
        assert!(p.fetch_backward([0.3, 0.7], &[0.0, 0.0]).is_empty());
    }

    #[test]
    fn center_gradient_lands_on_one_texel() {
        let p = random_plane(3, 3, 2, AddressMode::Wrap, AddressMode::Wrap, 6);
        let g = p.fetch_backward([1.5 / 3.0, 0.5 / 3.0], &[2.0, -1.0]);
        assert_eq!(g, vec![TexelGrad { texel: 1, grad: vec![2.0, -1.0] }]);
    }

    #[test]
    fn scatter_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let mut p = random_plane(5, 4, 3, AddressMode::Wrap, AddressMode::Clamp, 100 + trial);
            let uv = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let grad_out: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let objective = |p: &FeaturePlane<f64>| p.fetch(uv).iter().zip(&grad_out).map(|(a, b)| a * b).sum::<f64>();

            let mut analytic = vec![0.0; p.data().len()];
            for tg in p.fetch_backward(uv, &grad_out) {
                analytic[tg.texel * 3..tg.texel * 3 + 3].copy_from_slice(&tg.grad);
            }
            let h = 1e-6;
            for i in 0..p.data().len() {
                let orig = p.data()[i];
                p.data_mut()[i] = orig + h;
                let plus = objective(&p);
                p.data_mut()[i] = orig - h;
                let minus = objective(&p);
                p.data_mut()[i] = orig;
                assert_abs_diff_eq!((plus - minus) / (2.0 * h), analytic[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn he_init_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p: FeaturePlane<f32> = FeaturePlane::he_uniform(8, 8, 16, AddressMode::Wrap, AddressMode::Wrap, 0.01, &mut rng);
        let bound = (2.0f64 / 1.0001).sqrt() * (3.0f64 / 1024.0).sqrt();
        assert!(p.data().iter().all(|v| (*v as f64).abs() <= bound));
        let mean = p.data().iter().map(|v| *v as f64).sum::<f64>() / 1024.0;
        assert!(mean.abs() < 0.01);
    }

    proptest! {
        #[test]
        fn wrap_axis_is_periodic(t in 0.0f64..1.0, v in 0.0f64..1.0, k in -3i32..3) {
            let p = random_plane(6, 5, 2, AddressMode::Wrap, AddressMode::Wrap, 8);
            let a = p.fetch([t, v]);
            let b = p.fetch([t + k as f64, v - k as f64]);
            for c in 0..2 {
                prop_assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }

        #[test]
        fn fetch_is_lipschitz(u in -1.0f64..2.0, v in -1.0f64..2.0, du in -1e-3f64..1e-3, dv in -1e-3f64..1e-3) {
            let p = random_plane(7, 5, 3, AddressMode::Wrap, AddressMode::Clamp, 9);
            let max_step = p.data().iter().fold(0.0f64, |m, x| m.max(x.abs())) * 2.0;
            let lipschitz = max_step * 7.0f64.max(5.0) * 2.0;
            let a = p.fetch([u, v]);
            let b = p.fetch([u + du, v + dv]);
            let dist = du.abs() + dv.abs();
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() <= lipschitz * dist + 1e-12);
            }
        }
    }
}
