//! Average pooling of tensors into classifier features.

use serde::{Deserialize, Serialize};

use super::{normalize_time, trilinear_weights, EstTensor, KernelSpec, MlpKernel};
use crate::event::EventStream;

/// Pooling grid. Cell row `r` covers pixel rows `[r·H/gh, (r+1)·H/gh)` (integer
/// division), likewise for columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolGrid {
    pub rows: usize,
    pub cols: usize,
}

impl PoolGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn feature_len(&self, bins: usize) -> usize {
        2 * bins * self.cells()
    }

    fn bounds(n: usize, parts: usize, i: usize) -> (usize, usize) {
        (i * n / parts, (i + 1) * n / parts)
    }

    /// Cell index of every pixel row / column, plus per-cell areas.
    fn layout(&self, height: usize, width: usize) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        assert!(
            self.rows >= 1 && self.cols >= 1 && self.rows <= height && self.cols <= width,
            "pool grid {}x{} does not fit {height}x{width}",
            self.rows,
            self.cols
        );
        let mut row_of = vec![0; height];
        for r in 0..self.rows {
            let (a, b) = Self::bounds(height, self.rows, r);
            row_of[a..b].iter_mut().for_each(|v| *v = r);
        }
        let mut col_of = vec![0; width];
        for c in 0..self.cols {
            let (a, b) = Self::bounds(width, self.cols, c);
            col_of[a..b].iter_mut().for_each(|v| *v = c);
        }
        let mut area = Vec::with_capacity(self.cells());
        for r in 0..self.rows {
            let (ya, yb) = Self::bounds(height, self.rows, r);
            for c in 0..self.cols {
                let (xa, xb) = Self::bounds(width, self.cols, c);
                area.push(((yb - ya) * (xb - xa)) as f64);
            }
        }
        (row_of, col_of, area)
    }
}

/// Average-pools each channel onto `grid`, flattened channel-major
/// (`index = channel·cells + row·cols + col`).
pub fn pool_features(tensor: &EstTensor, grid: PoolGrid) -> Vec<f64> {
    let (h, w) = (tensor.height(), tensor.width());
    let (row_of, col_of, area) = grid.layout(h, w);
    let cells = grid.cells();
    let mut out = vec![0.0; tensor.channels() * cells];
    for c in 0..tensor.channels() {
        let ch = tensor.channel(c);
        let dst = &mut out[c * cells..(c + 1) * cells];
        for y in 0..h {
            let base = row_of[y] * grid.cols;
            for x in 0..w {
                dst[base + col_of[x]] += ch[y * w + x];
            }
        }
        for (v, a) in dst.iter_mut().zip(&area) {
            *v /= a;
        }
    }
    out
}

/// Events reduced to what pooled features depend on: polarity block, pool
/// cell and normalized time.
///
/// Computing features from this form equals `pool_features(build_est(..))`
/// without materializing the dense tensor, and supports backpropagation into
/// an MLP kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledEvents {
    bins: usize,
    cells: usize,
    area: Vec<f64>,
    /// (block, cell, t*)
    entries: Vec<(u8, u32, f64)>,
}

impl PooledEvents {
    pub fn new(stream: &EventStream, bins: usize, grid: PoolGrid) -> Self {
        let g = stream.geometry();
        let (row_of, col_of, area) = grid.layout(g.height as usize, g.width as usize);
        let tstar = normalize_time(stream, bins);
        let entries = stream
            .events()
            .iter()
            .zip(tstar)
            .map(|(e, ts)| {
                let cell = row_of[e.y as usize] * grid.cols + col_of[e.x as usize];
                (e.p.block() as u8, cell as u32, ts)
            })
            .collect();
        Self {
            bins,
            cells: grid.cells(),
            area,
            entries,
        }
    }

    pub fn feature_len(&self) -> usize {
        2 * self.bins * self.cells
    }

    pub fn num_events(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    fn slot(&self, block: u8, bin: usize, cell: u32) -> usize {
        (block as usize * self.bins + bin) * self.cells + cell as usize
    }

    pub fn features(&self, kernel: &KernelSpec) -> Vec<f64> {
        let mut sums = vec![0.0; self.feature_len()];
        for &(block, cell, ts) in &self.entries {
            match kernel {
                KernelSpec::Trilinear => {
                    for (b, w) in trilinear_weights(ts, self.bins) {
                        sums[self.slot(block, b, cell)] += w;
                    }
                }
                KernelSpec::Mlp(k) => {
                    for b in 0..self.bins {
                        sums[self.slot(block, b, cell)] += k.eval(ts - b as f64);
                    }
                }
            }
        }
        for (i, v) in sums.iter_mut().enumerate() {
            *v /= self.area[i % self.cells];
        }
        sums
    }

    /// Accumulates `Σ_i d_features[i] · ∂features[i]/∂θ` into `grad` for the
    /// kernel parameters `θ`.
    pub fn kernel_backward(&self, kernel: &MlpKernel, d_features: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(d_features.len(), self.feature_len());
        for &(block, cell, ts) in &self.entries {
            let scale = 1.0 / self.area[cell as usize];
            for b in 0..self.bins {
                let d = d_features[self.slot(block, b, cell)] * scale;
                if d == 0.0 {
                    continue;
                }
                let trace = kernel.net.forward(&[ts - b as f64], None);
                kernel.net.backward(&trace, &[d], grad);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::est::{build_est, MLP_KERNEL_LAYERS};
    use crate::event::{Event, Polarity, SensorGeometry};

    fn stream() -> EventStream {
        let events = (0..60)
            .map(|i| {
                Event::new(
                    (i * 7 % 10) as u16,
                    (i * 3 % 7) as u16,
                    i as i64 * 11,
                    if i % 4 == 0 { Polarity::Neg } else { Polarity::Pos },
                )
            })
            .collect();
        EventStream::new(SensorGeometry::new(10, 7).unwrap(), events, None).unwrap()
    }

    #[test]
    fn global_mean_pool() {
        let t = build_est(&stream(), 9, &KernelSpec::Trilinear);
        let f = pool_features(&t, PoolGrid::new(1, 1));
        assert_eq!(f.len(), 18);
        for (c, v) in f.iter().enumerate() {
            assert!((v - t.channel_sums()[c] / 70.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_tensor_zero_features() {
        let t = EstTensor::zeros(9, 7, 10);
        assert!(pool_features(&t, PoolGrid::new(3, 4)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_event_mean() {
        let g = SensorGeometry::new(10, 7).unwrap();
        let s = EventStream::new(g, vec![Event::new(2, 2, 5, Polarity::Pos)], None).unwrap();
        let f = pool_features(&build_est(&s, 9, &KernelSpec::Trilinear), PoolGrid::new(1, 1));
        let nz: Vec<(usize, f64)> = f.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(nz, vec![(9, 1.0 / 70.0)]);
    }

    #[test]
    fn direct_path_matches_dense_trilinear() {
        let s = stream();
        let grid = PoolGrid::new(3, 4);
        let dense = pool_features(&build_est(&s, 9, &KernelSpec::Trilinear), grid);
        let direct = PooledEvents::new(&s, 9, grid).features(&KernelSpec::Trilinear);
        assert_eq!(dense, direct);
    }

    #[test]
    fn direct_path_matches_dense_mlp() {
        let s = stream();
        let grid = PoolGrid::new(2, 5);
        let k = KernelSpec::Mlp(MlpKernel::random(&MLP_KERNEL_LAYERS, 4).unwrap());
        let dense = pool_features(&build_est(&s, 5, &k), grid);
        let direct = PooledEvents::new(&s, 5, grid).features(&k);
        for (a, b) in dense.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uneven_cells_cover_all_pixels() {
        let (row_of, col_of, area) = PoolGrid::new(3, 4).layout(7, 10);
        assert_eq!(row_of, vec![0, 0, 1, 1, 2, 2, 2]);
        assert_eq!(col_of, vec![0, 0, 1, 1, 1, 2, 2, 3, 3, 3]);
        assert_eq!(area.iter().sum::<f64>(), 70.0);
    }
}
