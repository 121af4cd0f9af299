use crate::error::{Error, Result};
use crate::tol;

/// Converts a time in `[0, 1]` to its index on the grid `{0, 1/T, ..., 1}`.
pub fn grid_index(time: f64, steps: usize) -> Result<usize> {
    let scaled = time * steps as f64;
    let k = scaled.round();
    if !time.is_finite() || (scaled - k).abs() > tol::GRID || k < 0.0 || k > steps as f64 {
        return Err(Error::OffGrid { time, steps });
    }
    Ok(k as usize)
}

pub fn grid_time(index: usize, steps: usize) -> f64 {
    index as f64 / steps as f64
}

/// Smallest power-of-two resolution (at least `min`) on which every time is a grid time.
pub fn dyadic_resolution(times: &[f64], min: usize, max: usize) -> Option<usize> {
    let mut steps = min.max(1).next_power_of_two();
    while steps <= max {
        if times.iter().all(|&t| grid_index(t, steps).is_ok()) {
            return Some(steps);
        }
        steps *= 2;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snaps_grid_times() {
        assert_eq!(grid_index(0.25, 4).unwrap(), 1);
        assert_eq!(grid_index(1.0, 4).unwrap(), 4);
        assert!(grid_index(0.3, 4).is_err());
        assert!(grid_index(1.25, 4).is_err());
        assert!(grid_index(-0.25, 4).is_err());
    }

    #[test]
    fn finds_dyadic_resolution() {
        assert_eq!(dyadic_resolution(&[0.25, 0.375], 2, 1 << 10), Some(8));
        assert_eq!(dyadic_resolution(&[0.5], 2, 1 << 10), Some(2));
        assert_eq!(dyadic_resolution(&[0.1], 2, 1 << 10), None);
    }
}
