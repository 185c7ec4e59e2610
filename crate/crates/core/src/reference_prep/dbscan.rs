use crate::Vec3;

/// Label of points not assigned to any cluster.
pub const NOISE: i64 = -1;

/// Density-based clustering. A point is a core point when at least `min_pts`
/// points (itself included) lie within `eps`. Clusters are grown from the
/// lowest unvisited index and expanded breadth-first in index order, so
/// labels are deterministic for a given input order.
pub fn dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<i64> {
    const UNVISITED: i64 = -2;
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| (points[j] - points[i]).norm_squared() <= eps2)
            .collect()
    };
    let mut labels = vec![UNVISITED; n];
    let mut cluster = 0i64;
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut queue = std::collections::VecDeque::from(seeds);
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = cluster;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let nb = neighbors(j);
            if nb.len() >= min_pts {
                queue.extend(nb);
            }
        }
        cluster += 1;
    }
    labels
}
