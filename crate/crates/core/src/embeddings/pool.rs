use ndarray::{Array2, ArrayView2, Axis};

/// Averages rows of a `T x M` matrix into `t_out` segments.
///
/// Segment `i` covers rows `floor(i*T/t_out) .. ceil((i+1)*T/t_out)`, so
/// neighbouring segments overlap when `t_out` does not divide `T`.
///
/// # Panics
/// If the input has no rows or `t_out` is zero.
pub fn adaptive_avg_pool(frames: ArrayView2<'_, f64>, t_out: usize) -> Array2<f64> {
    let t_in = frames.nrows();
    assert!(t_in >= 1 && t_out >= 1, "pooling needs T >= 1 and t_out >= 1");
    let mut out = Array2::zeros((t_out, frames.ncols()));
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let start = i * t_in / t_out;
        let end = ((i + 1) * t_in).div_ceil(t_out);
        let segment = frames.slice(ndarray::s![start..end, ..]);
        row.assign(&segment.mean_axis(Axis(0)).expect("segment is non-empty"));
    }
    out
}
