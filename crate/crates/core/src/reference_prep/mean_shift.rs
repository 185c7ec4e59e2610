use crate::Vec3;

const MAX_ITERATIONS: usize = 300;

/// A converged mode and the indices of the input points that reached it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub center: Vec3,
    pub members: Vec<usize>,
}

impl Mode {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Flat-kernel mean shift.
///
/// Every point climbs to the mean of the input points within `bandwidth` of
/// its current position until it moves less than `tol`. Converged positions
/// closer than `merge_radius` to an existing mode join it (modes are visited
/// in input order); a mode's centre is the mean of its members' converged
/// positions.
pub fn mean_shift(points: &[Vec3], bandwidth: f64, tol: f64, merge_radius: f64) -> Vec<Mode> {
    let bw2 = bandwidth * bandwidth;
    let climb = |start: Vec3| -> Vec3 {
        let mut x = start;
        for _ in 0..MAX_ITERATIONS {
            let (mut sum, mut n) = (Vec3::zeros(), 0usize);
            for p in points {
                if (p - x).norm_squared() <= bw2 {
                    sum += p;
                    n += 1;
                }
            }
            if n == 0 {
                break;
            }
            let next = sum / n as f64;
            let moved = (next - x).norm();
            x = next;
            if moved < tol {
                break;
            }
        }
        x
    };

    let mut modes: Vec<(Vec3, Vec<usize>, Vec3)> = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let c = climb(p);
        match modes.iter_mut().find(|(center, _, _)| (center - c).norm() < merge_radius) {
            Some((center, members, sum)) => {
                members.push(i);
                *sum += c;
                *center = *sum / members.len() as f64;
            }
            None => modes.push((c, vec![i], c)),
        }
    }
    modes
        .into_iter()
        .map(|(center, members, _)| Mode { center, members })
        .collect()
}
