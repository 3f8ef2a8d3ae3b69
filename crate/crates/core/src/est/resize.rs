use super::EstTensor;

/// Separable triangle-filter weights mapping `n_in` samples onto `n_out`.
///
/// Upscaling is plain bilinear interpolation at pixel centres; downscaling
/// widens the triangle to the scale factor so that every input pixel
/// contributes. Each output row of weights sums to 1.
fn axis_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    let support = scale.max(1.0);
    (0..n_out)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(n_in);
            let mut taps: Vec<(usize, f64)> = (lo..hi)
                .filter_map(|i| {
                    let d = ((i as f64 + 0.5) - center).abs() / support;
                    let w = 1.0 - d;
                    (w > 0.0).then_some((i, w))
                })
                .collect();
            if taps.is_empty() {
                let nearest = (center.floor() as usize).min(n_in - 1);
                taps.push((nearest, 1.0));
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Bilinear resampling of every channel to `(out_h, out_w)`, rescaled so each
/// channel keeps its total mass.
pub fn crop_resize(tensor: &EstTensor, out_h: usize, out_w: usize) -> EstTensor {
    assert!(out_h >= 1 && out_w >= 1, "output dims must be positive");
    let (h, w) = (tensor.height(), tensor.width());
    if (out_h, out_w) == (h, w) {
        return tensor.clone();
    }
    let wy = axis_weights(h, out_h);
    let wx = axis_weights(w, out_w);
    let mut out = EstTensor::zeros(tensor.bins(), out_h, out_w);
    let mut rows = vec![0.0; out_h * w];
    for c in 0..tensor.channels() {
        let src = tensor.channel(c);
        let before: f64 = src.iter().sum();
        if before == 0.0 {
            continue;
        }
        rows.iter_mut().for_each(|v| *v = 0.0);
        for (oy, taps) in wy.iter().enumerate() {
            for &(iy, wt) in taps {
                for x in 0..w {
                    rows[oy * w + x] += wt * src[iy * w + x];
                }
            }
        }
        let base = c * out_h * out_w;
        for oy in 0..out_h {
            for (ox, taps) in wx.iter().enumerate() {
                out.values[base + oy * out_w + ox] =
                    taps.iter().map(|&(ix, wt)| wt * rows[oy * w + ix]).sum();
            }
        }
        let dst = &mut out.values[base..base + out_h * out_w];
        let after: f64 = dst.iter().sum();
        if after != 0.0 {
            let k = before / after;
            dst.iter_mut().for_each(|v| *v *= k);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_with(h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f64) -> EstTensor {
        let mut values = Vec::new();
        for c in 0..2 {
            for y in 0..h {
                for x in 0..w {
                    values.push(f(c, y, x));
                }
            }
        }
        EstTensor::from_values(1, h, w, values).unwrap()
    }

    #[test]
    fn same_size_is_identity() {
        let t = tensor_with(5, 7, |c, y, x| (c * 31 + y * 7 + x) as f64 * 0.1);
        let r = crop_resize(&t, 5, 7);
        for (a, b) in t.values().iter().zip(r.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_stays_uniform() {
        let t = tensor_with(12, 10, |c, _, _| 1.0 + c as f64);
        let r = crop_resize(&t, 7, 4);
        for c in 0..2 {
            let ch = r.channel(c);
            let expect = (1.0 + c as f64) * 120.0 / 28.0;
            assert!(ch.iter().all(|v| (v - expect).abs() < 1e-12));
        }
        let (a, b) = (t.channel_sums(), r.channel_sums());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_downscale_preserves_mass() {
        let t = tensor_with(16, 16, |c, y, x| if c == 1 && y == 8 && x == 8 { 3.0 } else { 0.0 });
        let r = crop_resize(&t, 8, 8);
        assert!((r.channel_sums()[1] - 3.0).abs() < 1e-9);
        assert_eq!(r.channel_sums()[0], 0.0);
        // Larger reductions still see every input pixel.
        let r = crop_resize(&t, 3, 5);
        assert!((r.channel_sums()[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn upscale_and_gen1_crop() {
        let t = tensor_with(4, 4, |_, y, x| (y + x) as f64);
        let r = crop_resize(&t, 9, 11);
        assert!((r.channel_sums()[0] - t.channel_sums()[0]).abs() < 1e-9);
        let big = tensor_with(24, 30, |_, y, x| ((y * 3 + x) % 5) as f64);
        let r = crop_resize(&big, 22, 22);
        assert_eq!(r.shape(), (2, 22, 22));
        assert!((r.channel_sums()[1] - big.channel_sums()[1]).abs() < 1e-9);
    }
}
