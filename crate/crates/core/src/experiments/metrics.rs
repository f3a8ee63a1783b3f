use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

fn check_shapes(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!("prediction {:?} vs truth {:?}", pred.dim(), truth.dim())));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty prediction".into()));
    }
    Ok(())
}

/// Per-column root-mean-square error.
pub fn rmse(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<Vec<f64>> {
    check_shapes(pred, truth)?;
    let sq = (pred - truth).mapv(|e| e * e);
    Ok(sq
        .mean_axis(Axis(0))
        .expect("non-empty")
        .iter()
        .map(|m| m.sqrt())
        .collect())
}

/// Root-mean of squared Euclidean tip errors in the Y-Z plane. Equal to
/// `sqrt(rmse_y^2 + rmse_z^2)`.
pub fn rmse_plane(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    check_shapes(pred, truth)?;
    if pred.ncols() != 2 {
        return Err(Error::Shape(format!("plane RMSE needs 2 columns, got {}", pred.ncols())));
    }
    let n = pred.nrows() as f64;
    let sum: f64 = pred
        .outer_iter()
        .zip(truth.outer_iter())
        .map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2))
        .sum();
    Ok((sum / n).sqrt())
}

/// Mean and sample standard deviation of `|pred - truth|` over all entries.
pub fn mean_std_abs_error(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<(f64, f64)> {
    check_shapes(pred, truth)?;
    Ok(mean_std((pred - truth).iter().map(|e| e.abs())))
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two values.
pub fn mean_std(xs: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.into_iter().collect();
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-column `max - min`.
pub fn column_ranges(truth: &Array2<f64>) -> Vec<f64> {
    truth
        .columns()
        .into_iter()
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect()
}

/// `None` when the range is not positive, e.g. a test split without contact.
pub fn percent_of_range(metric: f64, range: f64) -> Option<f64> {
    (range > 0.0).then(|| 100.0 * metric / range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rmse_examples() {
        let t = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(rmse(&t, &t).unwrap(), vec![0.0, 0.0]);
        let shifted = &t + &array![[0.0, 1.5]];
        assert_eq!(rmse(&shifted, &t).unwrap(), vec![0.0, 1.5]);
        let p = array![[3.0], [-4.0], [0.0]];
        let z = array![[0.0], [0.0], [0.0]];
        assert!((rmse(&p, &z).unwrap()[0] - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((rmse(&p, &z).unwrap()[0] - 2.887).abs() < 1e-3);
        assert!(rmse(&p, &t).is_err());
    }

    #[test]
    fn plane_examples() {
        let t = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(rmse_plane(&t, &t).unwrap(), 0.0);
        let p = &t + &array![[3.0, 4.0]];
        assert!((rmse_plane(&p, &t).unwrap() - 5.0).abs() < 1e-12);
        assert!(rmse_plane(&array![[1.0], [2.0]], &array![[1.0], [2.0]]).is_err());
    }

    #[test]
    fn plane_is_quadrature_sum_of_axes() {
        let p = array![[0.3, -1.2], [2.0, 0.1], [-0.7, 0.9], [1.1, 1.1]];
        let t = array![[0.0, 0.0], [1.0, 1.0], [0.5, -0.5], [1.0, 3.0]];
        let axes = rmse(&p, &t).unwrap();
        let plane = rmse_plane(&p, &t).unwrap();
        assert!((plane.powi(2) - axes[0].powi(2) - axes[1].powi(2)).abs() < 1e-12);
    }

    #[test]
    fn abs_error_examples() {
        let t = array![[1.0], [2.0], [3.0]];
        assert_eq!(mean_std_abs_error(&t, &t).unwrap(), (0.0, 0.0));
        let p = array![[2.0], [1.0], [4.0]];
        assert_eq!(mean_std_abs_error(&p, &t).unwrap(), (1.0, 0.0));
        let (m, s) = mean_std_abs_error(&array![[0.0], [2.0]], &array![[0.0], [0.0]]).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn percent_arithmetic() {
        assert!((percent_of_range(3.6, 48.9).unwrap() - 7.36).abs() < 0.01);
        assert_eq!(percent_of_range(1.0, 0.0), None);
        assert_eq!(column_ranges(&array![[1.0, -2.0], [4.0, 5.0], [2.0, 0.0]]), vec![3.0, 7.0]);
    }
}
