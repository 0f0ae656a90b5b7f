use alloc::format;
use alloc::string::String;
use core::f64::consts::PI;

use crate::{Error, Result};

/// 95% quantile of the chi-square distribution with 2 degrees of freedom:
/// the 2-df chi-square CDF is `1 - exp(-x / 2)`, so the quantile is
/// `-2 ln(0.05) = 5.991464...`.
pub const CHI2_2DF_95: f64 = 5.991464;

/// A covariance (data) ellipse covering 95% of a bivariate normal class.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseParams {
    pub label: String,
    pub center: [f64; 2],
    /// Major then minor semi-axis length.
    pub semi_axes: [f64; 2],
    /// Angle of the major axis from the x axis, in `[0, pi)`.
    pub rotation_radians: f64,
    /// Set when the points are collinear or coincident, so the minor axis
    /// is zero.
    pub degenerate: bool,
}

/// Fits the 95% ellipse of `points` from their sample covariance.
pub fn ellipse_95(label: &str, points: &[[f64; 2]]) -> Result<EllipseParams> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "class {label}: an ellipse needs at least 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / nf;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (sxx, sxy, syy) = (sxx / (nf - 1.0), sxy / (nf - 1.0), syy / (nf - 1.0));

    let mid = 0.5 * (sxx + syy);
    let radius = libm::hypot(0.5 * (sxx - syy), sxy);
    let major = mid + radius;
    let minor = (mid - radius).max(0.0);
    let degenerate = minor <= 1e-12 * major.max(f64::MIN_POSITIVE);
    let minor = if degenerate { 0.0 } else { minor };

    let mut rotation = 0.5 * libm::atan2(2.0 * sxy, sxx - syy);
    if rotation < 0.0 {
        rotation += PI;
    }
    if rotation >= PI {
        rotation -= PI;
    }
    Ok(EllipseParams {
        label: label.into(),
        center: [cx, cy],
        semi_axes: [libm::sqrt(CHI2_2DF_95 * major), libm::sqrt(CHI2_2DF_95 * minor)],
        rotation_radians: rotation,
        degenerate,
    })
}
