//! Cubic smoothing splines for streamline polylines.
//!
//! The fit is a natural cubic spline with knots at the chord-length parameters
//! of the input points, minimising `Σ|yᵢ − g(tᵢ)|² + λ∫|g''|²`. λ is chosen
//! so that the residual sum of squares equals the smoothing budget (the same
//! criterion as FITPACK's `s`), then relaxed if needed so neither endpoint
//! moves by more than [`MAX_ENDPOINT_SHIFT_MM`].
//!
//! Internally the system is solved as `(ρR + QᵀQ)δ = Qᵀy`, `g = y − Qδ`,
//! `γ = ρδ` with `ρ = 1/λ`, which stays well conditioned as λ → ∞ (the
//! straight-line least-squares limit).

use crate::streamlines::{arc_length, Streamline};
use crate::Vec3;

/// Largest endpoint displacement the smoother accepts.
pub const MAX_ENDPOINT_SHIFT_MM: f64 = 1.0;

const BISECTION_STEPS: usize = 60;
const LOG_RHO_RANGE: f64 = 14.0;

/// A fitted natural cubic spline through parameter values `knots`.
#[derive(Debug, Clone)]
pub struct CubicSmoothingSpline {
    knots: Vec<f64>,
    values: Vec<Vec3>,
    second: Vec<Vec3>,
}

/// Symmetric positive-definite pentadiagonal matrix in band storage.
struct Penta {
    diag: Vec<f64>,
    off1: Vec<f64>,
    off2: Vec<f64>,
}

impl Penta {
    /// Solves `A x = b` for three right-hand sides via banded LDLᵀ.
    fn solve(&self, rhs: &[Vec3]) -> Vec<Vec3> {
        let m = self.diag.len();
        let mut d = vec![0.0; m];
        let mut l1 = vec![0.0; m];
        let mut l2 = vec![0.0; m];
        for i in 0..m {
            let mut di = self.diag[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            d[i] = di;
            if i + 1 < m {
                let mut v = self.off1[i];
                if i >= 1 {
                    v -= l2[i - 1] * l1[i - 1] * d[i - 1];
                }
                l1[i] = v / di;
            }
            if i + 2 < m {
                l2[i] = self.off2[i] / di;
            }
        }
        let mut z = rhs.to_vec();
        for i in 0..m {
            if i >= 1 {
                z[i] = z[i] - z[i - 1] * l1[i - 1];
            }
            if i >= 2 {
                z[i] = z[i] - z[i - 2] * l2[i - 2];
            }
        }
        for i in 0..m {
            z[i] /= d[i];
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                z[i] = z[i] - z[i + 1] * l1[i];
            }
            if i + 2 < m {
                z[i] = z[i] - z[i + 2] * l2[i];
            }
        }
        z
    }
}

/// Precomputed band matrices for one set of knots and data.
struct System<'a> {
    y: &'a [Vec3],
    h: Vec<f64>,
    q: Vec<[f64; 3]>,
    qty: Vec<Vec3>,
}

/// Solution for one value of ρ.
struct Fit {
    values: Vec<Vec3>,
    second: Vec<Vec3>,
    rss: f64,
    endpoint_shift: f64,
}

impl<'a> System<'a> {
    fn new(knots: &[f64], y: &'a [Vec3]) -> Self {
        let n = y.len();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let q: Vec<[f64; 3]> = (0..n - 2)
            .map(|j| [1.0 / h[j], -1.0 / h[j] - 1.0 / h[j + 1], 1.0 / h[j + 1]])
            .collect();
        let qty = (0..n - 2)
            .map(|j| y[j] * q[j][0] + y[j + 1] * q[j][1] + y[j + 2] * q[j][2])
            .collect();
        Self { y, h, q, qty }
    }

    fn r_matrix(&self, scale: f64) -> Penta {
        let m = self.q.len();
        Penta {
            diag: (0..m).map(|j| scale * (self.h[j] + self.h[j + 1]) / 3.0).collect(),
            off1: (0..m).map(|j| if j + 1 < m { scale * self.h[j + 1] / 6.0 } else { 0.0 }).collect(),
            off2: vec![0.0; m],
        }
    }

    /// `Some(ρ)` solves the smoothing system; `None` is pure interpolation.
    fn fit(&self, rho: Option<f64>) -> Fit {
        let n = self.y.len();
        let m = n - 2;
        let (values, gamma) = match rho {
            None => (self.y.to_vec(), self.r_matrix(1.0).solve(&self.qty)),
            Some(rho) => {
                let mut a = self.r_matrix(rho);
                let q = &self.q;
                for j in 0..m {
                    a.diag[j] += q[j][0] * q[j][0] + q[j][1] * q[j][1] + q[j][2] * q[j][2];
                    if j + 1 < m {
                        a.off1[j] += q[j][1] * q[j + 1][0] + q[j][2] * q[j + 1][1];
                    }
                    if j + 2 < m {
                        a.off2[j] = q[j][2] * q[j + 2][0];
                    }
                }
                let delta = a.solve(&self.qty);
                let mut qd = vec![Vec3::zeros(); n];
                for j in 0..m {
                    qd[j] += delta[j] * q[j][0];
                    qd[j + 1] += delta[j] * q[j][1];
                    qd[j + 2] += delta[j] * q[j][2];
                }
                let values = self.y.iter().zip(&qd).map(|(y, r)| y - r).collect();
                (values, delta.into_iter().map(|d| d * rho).collect())
            }
        };
        let mut second = Vec::with_capacity(n);
        second.push(Vec3::zeros());
        second.extend(gamma);
        second.push(Vec3::zeros());
        let rss = self.y.iter().zip(&values).map(|(y, g)| (y - g).norm_squared()).sum();
        let endpoint_shift = (values[0] - self.y[0])
            .norm()
            .max((values[n - 1] - self.y[n - 1]).norm());
        Fit {
            values,
            second,
            rss,
            endpoint_shift,
        }
    }
}

/// Bisects on log ρ between an infeasible `lo` and a feasible `hi`.
fn bisect(sys: &System, mut lo: f64, mut hi: f64, feasible: impl Fn(&Fit) -> bool) -> Fit {
    let mut best = sys.fit(Some(hi.exp()));
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let f = sys.fit(Some(mid.exp()));
        if feasible(&f) {
            hi = mid;
            best = f;
        } else {
            lo = mid;
        }
    }
    best
}

impl CubicSmoothingSpline {
    /// Fits a smoothing spline with residual budget `smoothing` (mm²).
    /// Returns `None` for fewer than 3 points or repeated consecutive points.
    pub fn fit(points: &[Vec3], smoothing: f64) -> Option<Self> {
        let n = points.len();
        if n < 3 {
            return None;
        }
        let mut knots = Vec::with_capacity(n);
        knots.push(0.0);
        for w in points.windows(2) {
            let h = (w[1] - w[0]).norm();
            if !(h > 0.0) {
                return None;
            }
            knots.push(knots.last().unwrap() + h);
        }
        let sys = System::new(&knots, points);
        let mean_h = knots[n - 1] / (n - 1) as f64;
        let log_scale = -3.0 * mean_h.ln();
        let (log_lo, log_hi) = (log_scale - LOG_RHO_RANGE, log_scale + LOG_RHO_RANGE);

        let mut fit = if smoothing <= 0.0 {
            sys.fit(None)
        } else {
            let line = sys.fit(Some(0.0));
            if line.rss <= smoothing {
                line
            } else if sys.fit(Some(log_hi.exp())).rss > smoothing {
                sys.fit(None)
            } else {
                bisect(&sys, log_lo, log_hi, |f| f.rss <= smoothing)
            }
        };
        if fit.endpoint_shift > MAX_ENDPOINT_SHIFT_MM {
            let ok = |f: &Fit| f.endpoint_shift <= MAX_ENDPOINT_SHIFT_MM;
            fit = if ok(&sys.fit(Some(log_hi.exp()))) {
                bisect(&sys, log_lo, log_hi, ok)
            } else {
                sys.fit(None)
            };
        }
        Some(Self {
            knots,
            values: fit.values,
            second: fit.second,
        })
    }

    /// Total parameter length (input arc length).
    pub fn parameter_length(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Fitted curve values at the knots.
    pub fn knot_values(&self) -> &[Vec3] {
        &self.values
    }

    /// Evaluates the spline at parameter `t`, clamped to the knot range.
    pub fn eval(&self, t: f64) -> Vec3 {
        let n = self.knots.len();
        let t = t.clamp(0.0, self.knots[n - 1]);
        let i = self.knots.partition_point(|&k| k <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (a, b) = (t - t0, t1 - t);
        let (g0, g1) = (self.values[i], self.values[i + 1]);
        let (c0, c1) = (self.second[i], self.second[i + 1]);
        (g1 * a + g0 * b) / h - (c1 * (1.0 + a / h) + c0 * (1.0 + b / h)) * (a * b / 6.0)
    }
}

/// Smooths a streamline and resamples it at ≈ `out_spacing` mm.
///
/// Streamlines with fewer than 4 points are returned unchanged.
pub fn smooth_bspline(s: &Streamline, smoothing: f64, out_spacing: f64) -> Streamline {
    if s.len() < 4 || !(out_spacing > 0.0) {
        return s.clone();
    }
    let Some(spline) = CubicSmoothingSpline::fit(s.points(), smoothing) else {
        return s.clone();
    };
    let length = arc_length(s.points());
    let n_out = ((length / out_spacing).ceil() as usize + 1).max(2);
    let points = (0..n_out)
        .map(|k| spline.eval(length * k as f64 / (n_out - 1) as f64))
        .collect();
    Streamline::from_raw(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perp_distance_to_x_axis(p: &Vec3) -> f64 {
        (p.y * p.y + p.z * p.z).sqrt()
    }

    #[test]
    fn straight_line_stays_collinear() {
        let dir = Vec3::new(1.0, 2.0, -0.5).normalize();
        let pts: Vec<Vec3> = [0.0, 1.3, 2.1, 4.0, 4.7, 7.2, 9.0]
            .iter()
            .map(|&s| Vec3::new(3.0, -1.0, 2.0) + dir * s)
            .collect();
        for smoothing in [0.0, 0.5, 10.0, 1e6] {
            let out = smooth_bspline(&Streamline::from_raw(pts.clone()), smoothing, 0.4);
            for p in out.points() {
                let r = p - Vec3::new(3.0, -1.0, 2.0);
                let off = r - dir * r.dot(&dir);
                assert!(off.norm() < 1e-6, "smoothing {smoothing}: {}", off.norm());
            }
        }
    }

    #[test]
    fn zero_smoothing_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..12)
            .map(|i| Vec3::new(i as f64 * 1.5, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let spline = CubicSmoothingSpline::fit(&pts, 0.0).unwrap();
        for (t, p) in spline.knots().iter().zip(&pts) {
            assert!((spline.eval(*t) - p).norm() < 1e-6);
        }
    }

    #[test]
    fn fitted_residual_matches_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec3> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.1;
                Vec3::new(20.0 * a.cos(), 20.0 * a.sin(), 0.0)
                    + Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3))
            })
            .collect();
        let budget = 1.0;
        let spline = CubicSmoothingSpline::fit(&pts, budget).unwrap();
        let rss: f64 = spline.knot_values().iter().zip(&pts).map(|(g, y)| (g - y).norm_squared()).sum();
        assert!(rss <= budget + 1e-9 && rss > 0.95 * budget, "rss {rss}");
    }

    #[test]
    fn zigzag_is_flattened() {
        let n = 30;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| Vec3::new(i as f64, if i % 2 == 0 { 0.5 } else { -0.5 }, 0.0))
            .collect();
        let out = smooth_bspline(&Streamline::from_raw(pts.clone()), n as f64 * 0.25, 0.5);
        // brute force: maximum perpendicular distance before and after
        let before = pts.iter().map(perp_distance_to_x_axis).fold(0.0, f64::max);
        let after = out.points().iter().map(perp_distance_to_x_axis).fold(0.0, f64::max);
        assert_eq!(before, 0.5);
        assert!(after < before, "after {after}");
    }

    #[test]
    fn endpoints_stay_within_limit_and_count_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = rng.random_range(4..80);
            let mut p = Vec3::zeros();
            let mut pts = vec![p];
            for _ in 1..n {
                p += Vec3::new(1.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                pts.push(p);
            }
            let s = Streamline::from_raw(pts);
            let spacing = rng.random_range(0.3..3.0);
            let out = smooth_bspline(&s, n as f64 * rng.random_range(0.1..5.0), spacing);
            assert!((out.first().unwrap() - s.first().unwrap()).norm() <= MAX_ENDPOINT_SHIFT_MM + 1e-9);
            assert!((out.last().unwrap() - s.last().unwrap()).norm() <= MAX_ENDPOINT_SHIFT_MM + 1e-9);
            assert!(out.len() <= (s.arc_length() / spacing).ceil() as usize + 2);
        }
    }

    #[test]
    fn short_streamlines_unchanged() {
        let s = Streamline::from_raw(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 1.0, 0.0)]);
        assert_eq!(smooth_bspline(&s, 1.0, 0.1), s);
    }

    #[test]
    fn band_solver_matches_dense() {
        let m = 7;
        let a = Penta {
            diag: (0..m).map(|i| 6.0 + i as f64).collect(),
            off1: (0..m).map(|i| 1.0 + 0.1 * i as f64).collect(),
            off2: (0..m).map(|i| 0.5 - 0.05 * i as f64).collect(),
        };
        let mut dense = nalgebra::DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            dense[(i, i)] = a.diag[i];
            if i + 1 < m {
                dense[(i, i + 1)] = a.off1[i];
                dense[(i + 1, i)] = a.off1[i];
            }
            if i + 2 < m {
                dense[(i, i + 2)] = a.off2[i];
                dense[(i + 2, i)] = a.off2[i];
            }
        }
        let rhs: Vec<Vec3> = (0..m).map(|i| Vec3::new(i as f64, 1.0, -(i as f64).sqrt())).collect();
        let x = a.solve(&rhs);
        for c in 0..3 {
            let b = nalgebra::DVector::from_iterator(m, rhs.iter().map(|v| v[c]));
            let expect = dense.clone().lu().solve(&b).unwrap();
            for i in 0..m {
                assert!((x[i][c] - expect[i]).abs() < 1e-12);
            }
        }
    }
}
