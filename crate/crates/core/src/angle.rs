//! Circular arithmetic on azimuths in degrees.

/// Maps any angle onto `[0, 360)`.
pub fn normalize_deg(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360.0 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Signed shortest rotation from `from` to `to`, in `[-180, 180)`.
pub fn wrapped_diff(to: f64, from: f64) -> f64 {
    let d = normalize_deg(to - from);
    if d >= 180.0 {
        d - 360.0
    } else {
        d
    }
}

/// Unsigned circular distance in `[0, 180]`.
pub fn wrapped_distance(a: f64, b: f64) -> f64 {
    wrapped_diff(a, b).abs()
}

/// Circular mean of a set of azimuths, `None` when empty or when the
/// resultant vector vanishes.
pub fn circular_mean<I: IntoIterator<Item = f64>>(angles: I) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        let r = a.to_radians();
        s += r.sin();
        c += r.cos();
        n += 1;
    }
    if n == 0 || (s.hypot(c) / n as f64) < 1e-12 {
        return None;
    }
    Some(normalize_deg(s.atan2(c).to_degrees()))
}

/// Reflects `angle` about the line through the origin at `axis` degrees.
pub fn reflect_about(angle: f64, axis: f64) -> f64 {
    normalize_deg(2.0 * axis - angle)
}

/// True when `angle` lies in the wrapped interval running counter-clockwise
/// from `start` to `end` (inclusive at both ends).
pub fn in_wrapped_interval(angle: f64, start: f64, end: f64) -> bool {
    let span = normalize_deg(end - start);
    let offset = normalize_deg(angle - start);
    if span == 0.0 {
        // degenerate interval: a single direction
        return offset == 0.0;
    }
    offset <= span
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_wraps_both_directions() {
        assert_eq!(normalize_deg(360.0), 0.0);
        assert_eq!(normalize_deg(-90.0), 270.0);
        assert_eq!(normalize_deg(725.0), 5.0);
        assert!(normalize_deg(-1e-18) < 360.0);
    }

    #[test]
    fn diff_takes_short_way_round() {
        assert_eq!(wrapped_diff(1.0, 359.0), 2.0);
        assert_eq!(wrapped_diff(359.0, 1.0), -2.0);
        assert_eq!(wrapped_distance(10.0, 350.0), 20.0);
        assert_eq!(wrapped_distance(0.0, 180.0), 180.0);
    }

    #[test]
    fn circular_mean_straddles_zero() {
        let m = circular_mean([350.0, 10.0]).unwrap();
        assert!(wrapped_distance(m, 0.0) < 1e-9);
        assert!(circular_mean([0.0, 180.0]).is_none());
        assert!(circular_mean(std::iter::empty()).is_none());
    }

    #[test]
    fn interval_containment_handles_wrap() {
        assert!(in_wrapped_interval(5.0, 350.0, 10.0));
        assert!(in_wrapped_interval(355.0, 350.0, 10.0));
        assert!(!in_wrapped_interval(20.0, 350.0, 10.0));
        assert!(in_wrapped_interval(270.0, 225.0, 315.0));
        assert!(!in_wrapped_interval(0.0, 225.0, 315.0));
    }

    #[test]
    fn reflection() {
        assert!(wrapped_distance(reflect_about(30.0, 90.0), 150.0) < 1e-12);
        assert!(wrapped_distance(reflect_about(0.0, 45.0), 90.0) < 1e-12);
    }
}
