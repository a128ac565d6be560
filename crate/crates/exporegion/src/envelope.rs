//! Upper concave envelope of a planar point cloud.
//!
//! The Lagrangian sweep produces scattered `(rate, value)` pairs; the curve
//! they trace is concave, so the envelope (upper convex hull) is the right
//! reconstruction. Interpolation on the envelope is then a lower bound on
//! the true curve that is exact at the touched points.

/// Upper concave envelope, returned as breakpoints sorted by x.
///
/// Duplicate x values keep the largest y. Non-finite points are dropped.
pub fn upper_concave_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.is_empty() {
        return pts;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // collapse duplicate x to max y
    let mut uniq: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        match uniq.last_mut() {
            Some(last) if (last.0 - p.0).abs() <= f64::EPSILON * p.0.abs().max(1.0) => {
                if p.1 > last.1 {
                    last.1 = p.1;
                }
            }
            _ => uniq.push(p),
        }
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(uniq.len());
    for p in uniq {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // pop the middle point when it lies on or below chord (x1,y1)-(p)
            if (x2 - x1) * (p.1 - y1) - (y2 - y1) * (p.0 - x1) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Piecewise-linear interpolation on envelope breakpoints; clamps outside.
pub fn interp(env: &[(f64, f64)], x: f64) -> f64 {
    match env {
        [] => 0.0,
        [single] => single.1,
        _ => {
            if x <= env[0].0 {
                return env[0].1;
            }
            if x >= env[env.len() - 1].0 {
                return env[env.len() - 1].1;
            }
            let i = env.partition_point(|p| p.0 <= x).saturating_sub(1);
            let (x1, y1) = env[i];
            let (x2, y2) = env[i + 1];
            if x2 == x1 {
                y1.max(y2)
            } else {
                y1 + (y2 - y1) * (x - x1) / (x2 - x1)
            }
        }
    }
}

/// Slope of the envelope segment containing x (right-hand segment at a
/// breakpoint, last segment beyond the end).
pub fn slope_at(env: &[(f64, f64)], x: f64) -> f64 {
    if env.len() < 2 {
        return 0.0;
    }
    let i = env.partition_point(|p| p.0 <= x).clamp(1, env.len() - 1);
    let (x1, y1) = env[i - 1];
    let (x2, y2) = env[i];
    if x2 == x1 {
        0.0
    } else {
        (y2 - y1) / (x2 - x1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_of_concave_samples_keeps_all() {
        let pts: Vec<(f64, f64)> = (0..=10)
            .map(|i| i as f64 / 10.0)
            .map(|x| (x, x.sqrt()))
            .collect();
        let env = upper_concave_envelope(&pts);
        assert_eq!(env.len(), pts.len());
    }

    #[test]
    fn envelope_drops_interior_points() {
        let env = upper_concave_envelope(&[(0.0, 0.0), (0.5, 0.1), (1.0, 1.0)]);
        assert_eq!(env, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!((interp(&env, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_x_keeps_max_y() {
        let env = upper_concave_envelope(&[(0.0, 0.0), (0.5, 0.2), (0.5, 0.4), (1.0, 0.5)]);
        assert!((interp(&env, 0.5) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn midpoint_concavity_holds_on_envelope() {
        let pts = vec![(0.0, 0.0), (0.2, 0.3), (0.4, 0.45), (0.6, 0.8), (1.0, 0.9)];
        let env = upper_concave_envelope(&pts);
        for w in env.windows(3) {
            let (x0, y0) = w[0];
            let (x2, y2) = w[2];
            let mid = interp(&env, 0.5 * (x0 + x2));
            let chord = 0.5 * (y0 + y2);
            assert!(mid >= chord - 1e-12);
        }
    }

    #[test]
    fn interp_clamps_outside_domain() {
        let env = vec![(0.1, 0.2), (0.9, 0.8)];
        assert_eq!(interp(&env, 0.0), 0.2);
        assert_eq!(interp(&env, 1.5), 0.8);
    }
}
