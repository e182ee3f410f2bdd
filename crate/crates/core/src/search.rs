//! One-dimensional searches shared by the geometric and proximal solvers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
///
/// Returns the best abscissa seen, including the endpoints.
pub fn golden_section(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Root of a nondecreasing sign function on `[a, b]` by bisection, assuming
/// `g(a) < 0 < g(b)`.
pub fn bisect_increasing(g: impl Fn(f64) -> f64, a: f64, b: f64, iterations: usize) -> f64 {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A convex piecewise quadratic on a line:
/// `φ(s) = Σ aᵢ|s − cᵢ| + Σ (bⱼ/2)(s − eⱼ)² + g·s`, restricted to `[lo, hi]`.
#[derive(Debug, Clone, Default)]
pub struct LineObjective {
    pub kinks: Vec<(f64, f64)>,
    pub quadratics: Vec<(f64, f64)>,
    pub linear: f64,
}

impl LineObjective {
    pub fn eval(&self, s: f64) -> f64 {
        self.kinks.iter().map(|(c, a)| a * (s - c).abs()).sum::<f64>()
            + self
                .quadratics
                .iter()
                .map(|(e, b)| 0.5 * b * (s - e) * (s - e))
                .sum::<f64>()
            + self.linear * s
    }

    /// Exact minimizer over `[lo, hi]`. At least one bound must be finite
    /// unless the quadratic part is strictly convex.
    pub fn minimize(&self, lo: f64, hi: f64) -> f64 {
        let curvature: f64 = self.quadratics.iter().map(|(_, b)| b).sum();
        let weighted: f64 = self.quadratics.iter().map(|(e, b)| b * e).sum();
        let mut breaks: Vec<f64> = self
            .kinks
            .iter()
            .map(|(c, _)| *c)
            .filter(|c| *c > lo && *c < hi)
            .collect();
        breaks.sort_by(f64::total_cmp);
        let mut bounds = vec![lo];
        bounds.extend(breaks);
        bounds.push(hi);

        let mut best = (f64::NAN, f64::INFINITY);
        let mut consider = |s: f64| {
            if s.is_finite() {
                let v = self.eval(s);
                if v < best.1 {
                    best = (s, v);
                }
            }
        };
        for w in bounds.windows(2) {
            let (l, r) = (w[0], w[1]);
            consider(l);
            consider(r);
            if curvature > 0.0 {
                // Slope of the kink part is constant inside the open piece.
                let mid = if l.is_finite() && r.is_finite() {
                    0.5 * (l + r)
                } else if l.is_finite() {
                    l + 1.0
                } else if r.is_finite() {
                    r - 1.0
                } else {
                    0.0
                };
                let kink_slope: f64 = self.kinks.iter().map(|(c, a)| a * (mid - c).signum()).sum();
                let s = (weighted - kink_slope - self.linear) / curvature;
                consider(s.clamp(l, r));
            }
        }
        best.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_section(|t| (t - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx < 1e-12);
    }

    #[test]
    fn golden_prefers_endpoint_when_monotone() {
        let (x, _) = golden_section(|t| t, 0.0, 1.0, 1e-12);
        assert_eq!(x, 0.0);
    }

    #[test]
    fn line_objective_median_of_kinks() {
        let obj = LineObjective {
            kinks: vec![(0.0, 1.0), (1.0, 1.0), (5.0, 1.0)],
            ..Default::default()
        };
        assert_eq!(obj.minimize(-10.0, 10.0), 1.0);
    }

    #[test]
    fn line_objective_prox_of_abs() {
        // argmin |s| + (1/2)(s − 3)² = 2
        let obj = LineObjective {
            kinks: vec![(0.0, 1.0)],
            quadratics: vec![(3.0, 1.0)],
            linear: 0.0,
        };
        assert!((obj.minimize(f64::NEG_INFINITY, f64::INFINITY) - 2.0).abs() < 1e-15);
        // soft threshold sticks at the kink
        let obj = LineObjective {
            kinks: vec![(0.0, 1.0)],
            quadratics: vec![(0.5, 1.0)],
            linear: 0.0,
        };
        assert_eq!(obj.minimize(f64::NEG_INFINITY, f64::INFINITY), 0.0);
    }
}
