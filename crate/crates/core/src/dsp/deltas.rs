use super::{FeatureMatrix, StreamTag};
use crate::error::Result;

const DELTA_WINDOW: usize = 2;

/// Appends regression deltas over ±2 frames (edges replicated), doubling
/// the feature width.
pub fn append_deltas(feats: &FeatureMatrix) -> Result<FeatureMatrix> {
    let (t_len, dim) = (feats.frames(), feats.dim());
    let denom: f64 = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    let at = |t: isize, d: usize| feats.get(t.clamp(0, t_len as isize - 1) as usize, d);
    let mut out = Vec::with_capacity(t_len * dim * 2);
    for t in 0..t_len {
        out.extend_from_slice(feats.row(t));
        let ti = t as isize;
        for d in 0..dim {
            let num: f64 = (1..=DELTA_WINDOW)
                .map(|n| n as f64 * (at(ti + n as isize, d) - at(ti - n as isize, d)))
                .sum();
            out.push(num / denom);
        }
    }
    FeatureMatrix::new(t_len, dim * 2, out, feats.frame_shift_ms, StreamTag::Combined)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_gives_zero_deltas() {
        let f = FeatureMatrix::new(7, 41, vec![3.25; 7 * 41], 10.0, StreamTag::Combined).unwrap();
        let d = append_deltas(&f).unwrap();
        assert_eq!(d.dim(), 82);
        for t in 0..7 {
            assert_eq!(&d.row(t)[..41], f.row(t));
            assert!(d.row(t)[41..].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn ramp_gives_slope_in_interior() {
        let slope = 0.75;
        let vals: Vec<f64> = (0..10).map(|t| 1.0 + slope * t as f64).collect();
        let f = FeatureMatrix::new(10, 1, vals, 10.0, StreamTag::Combined).unwrap();
        let d = append_deltas(&f).unwrap();
        for t in 2..8 {
            assert!((d.get(t, 1) - slope).abs() < 1e-12);
        }
        // first frame: (1*(x1-x0) + 2*(x2-x0)) / 10 = (s + 4s)/10
        assert!((d.get(0, 1) - slope * 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_frame() {
        let f = FeatureMatrix::new(1, 2, vec![1.0, -1.0], 10.0, StreamTag::Combined).unwrap();
        let d = append_deltas(&f).unwrap();
        assert_eq!(d.values(), &[1.0, -1.0, 0.0, 0.0]);
    }
}
