use super::{AudioClip, AudioError, Result};

pub const MIN_SPLINE_POINTS: usize = 4;

/// Natural cubic spline through unit-spaced knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < MIN_SPLINE_POINTS {
            return Err(AudioError::TooShort {
                needed: MIN_SPLINE_POINTS,
                got: n,
            });
        }
        // Interior second derivatives solve M[i-1] + 4 M[i] + M[i+1] = 6 Δ²y[i]
        // with M[0] = M[n-1] = 0 (Thomas algorithm).
        let m = n - 2;
        let mut diag = vec![4.0; m];
        let mut rhs: Vec<f64> = (1..n - 1)
            .map(|i| 6.0 * ((values[i + 1] - values[i]) - (values[i] - values[i - 1])))
            .collect();
        for i in 1..m {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        let mut second = vec![0.0; n];
        second[m] = rhs[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            second[i + 1] = (rhs[i] - second[i + 2]) / diag[i];
        }
        Ok(Self {
            values: values.to_vec(),
            second,
        })
    }

    /// Evaluates at position `t` in knot units. Positions past either end
    /// continue the outermost cubic piece.
    pub fn eval(&self, t: f64) -> f64 {
        let last = self.values.len() - 2;
        let seg = if t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(last)
        };
        let u = t - seg as f64;
        let y0 = self.values[seg];
        let dy = self.values[seg + 1] - y0;
        let m0 = self.second[seg];
        let m1 = self.second[seg + 1];
        let b = dy - (2.0 * m0 + m1) / 6.0;
        let c = m0 / 2.0;
        let d = (m1 - m0) / 6.0;
        y0 + u * (b + u * (c + u * d))
    }
}

/// Natural cubic spline interpolation onto a finer grid.
///
/// Output sample `m` is the spline evaluated at time `m / target_rate`; the
/// output keeps the input's duration.
pub fn spline_upsample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    let source_rate = clip.sample_rate();
    if target_rate <= source_rate {
        return Err(AudioError::InvalidTargetRate {
            source_rate,
            target: target_rate,
        });
    }
    let spline = CubicSpline::natural(clip.samples())?;
    let n_out = (clip.len() as u64 * u64::from(target_rate)).div_ceil(u64::from(source_rate)) as usize;
    let step = f64::from(source_rate) / f64::from(target_rate);
    let out = (0..n_out).map(|m| spline.eval(m as f64 * step)).collect();
    Ok(AudioClip::from_parts(out, target_rate))
}
