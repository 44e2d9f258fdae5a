use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Greedy max-min sampling seeded at index 0. Ties keep the lowest index.
/// When `m` exceeds the number of points the order repeats cyclically.
pub fn farthest_point_sample(points: &[Vec3], m: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Empty("farthest point sampling"));
    }
    let take = m.min(n);
    let mut order = Vec::with_capacity(m);
    let mut dist = vec![f64::INFINITY; n];
    let mut cur = 0;
    for _ in 0..take {
        order.push(cur);
        let p = points[cur];
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, d) in dist.iter_mut().enumerate() {
            let e = (points[i] - p).norm_squared();
            if e < *d {
                *d = e;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        cur = best.1;
    }
    for k in take..m {
        order.push(order[k % n]);
    }
    Ok(order)
}

/// For each center, up to `n` point indices within distance `r`, scanned
/// in index order. Short lists are padded with their first entry; a center
/// with no neighbours uses its nearest point.
pub fn ball_query(points: &[Vec3], centers: &[Vec3], r: f64, n: usize) -> Vec<Vec<usize>> {
    let r2 = r * r;
    centers
        .iter()
        .map(|c| {
            let mut found: Vec<usize> = Vec::with_capacity(n);
            for (i, p) in points.iter().enumerate() {
                if (p - c).norm_squared() <= r2 {
                    found.push(i);
                    if found.len() == n {
                        break;
                    }
                }
            }
            if found.is_empty() {
                let nearest = (0..points.len())
                    .min_by(|&a, &b| {
                        (points[a] - c)
                            .norm_squared()
                            .total_cmp(&(points[b] - c).norm_squared())
                    })
                    .unwrap_or(0);
                found.push(nearest);
            }
            let first = found[0];
            found.resize(n, first);
            found
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v3;

    #[test]
    fn fps_on_a_line_picks_the_far_end() {
        let pts: Vec<Vec3> = (0..=10).map(|i| v3(i as f64, 0., 0.)).collect();
        assert_eq!(farthest_point_sample(&pts, 2).unwrap(), vec![0, 10]);
        assert_eq!(farthest_point_sample(&pts, 1).unwrap(), vec![0]);
        let mut all = farthest_point_sample(&pts, 11).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..=10).collect::<Vec<_>>());
    }

    #[test]
    fn fps_repeats_cyclically() {
        let pts = vec![v3(0., 0., 0.), v3(1., 0., 0.)];
        assert_eq!(farthest_point_sample(&pts, 5).unwrap(), vec![0, 1, 0, 1, 0]);
        assert!(farthest_point_sample(&[], 1).is_err());
    }

    #[test]
    fn ball_query_pads_and_falls_back() {
        let pts = vec![v3(0., 0., 0.), v3(0.1, 0., 0.), v3(5., 0., 0.)];
        let g = ball_query(&pts, &[v3(0., 0., 0.), v3(3.9, 0., 0.)], 0.5, 4);
        assert_eq!(g[0], vec![0, 1, 0, 0]);
        assert_eq!(g[1], vec![2, 2, 2, 2]);
        let all = ball_query(&pts, &[v3(1., 0., 0.)], 10.0, 8);
        assert_eq!(&all[0][..3], &[0, 1, 2]);
    }
}
