/// Stride-1 max pooling over a centred odd `window`, same output size.
///
/// Windows are clipped to the image, which matches edge-replicating padding
/// for a max. Returns the pooled values and, for each output pixel, the
/// index of the first maximum in row-major scan order.
pub(crate) fn max_pool(values: &[f64], height: usize, width: usize, window: usize) -> (Vec<f64>, Vec<usize>) {
    debug_assert_eq!(values.len(), height * width);
    debug_assert!(window % 2 == 1);
    let r = window / 2;
    let mut pooled = Vec::with_capacity(values.len());
    let mut arg = Vec::with_capacity(values.len());
    for y in 0..height {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(height - 1));
        for x in 0..width {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(width - 1));
            let mut best = y0 * width + x0;
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    let j = yy * width + xx;
                    if values[j] > values[best] {
                        best = j;
                    }
                }
            }
            pooled.push(values[best]);
            arg.push(best);
        }
    }
    (pooled, arg)
}

/// Soft boundary of a map in `[0, 1]`:
/// `maxpool(1 - y, window) - (1 - y)`.
///
/// For binary input this is the inner boundary: region pixels whose
/// window reaches outside the region. Also returns the pooling arg-max
/// needed for the backward pass.
pub(crate) fn soft_boundary_with_arg(
    values: &[f64],
    height: usize,
    width: usize,
    window: usize,
) -> (Vec<f64>, Vec<usize>) {
    let inverted: Vec<f64> = values.iter().map(|v| 1.0 - v).collect();
    let (pooled, arg) = max_pool(&inverted, height, width, window);
    let b = pooled.iter().zip(&inverted).map(|(p, v)| p - v).collect();
    (b, arg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_route_to_first_in_scan_order() {
        let v = [1.0, 0.0, 1.0, 1.0];
        let (p, a) = max_pool(&v, 2, 2, 3);
        assert_eq!(p, vec![1.0; 4]);
        assert_eq!(a, vec![0; 4]);
    }

    #[test]
    fn window_one_is_identity() {
        let v = [0.3, 0.1, 0.9];
        let (p, a) = max_pool(&v, 1, 3, 1);
        assert_eq!(p, v);
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn clipped_window_at_corner() {
        #[rustfmt::skip]
        let v = [
            0.0, 0.0, 0.0,
            0.0, 0.0, 0.0,
            0.0, 0.0, 5.0,
        ];
        let (p, _) = max_pool(&v, 3, 3, 3);
        assert_eq!(p, vec![0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 0.0, 5.0, 5.0]);
    }
}
