//! Independent reference implementations for triangulation checks.
//!
//! Everything here works on integer coordinates with exact `i128`
//! arithmetic, and shares no code with the library's triangulator.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

pub type P = (i64, i64);

pub fn orient(a: P, b: P, c: P) -> i128 {
    let (ax, ay) = (a.0 as i128, a.1 as i128);
    let (bx, by) = (b.0 as i128, b.1 as i128);
    let (cx, cy) = (c.0 as i128, c.1 as i128);
    (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
}

/// Positive when `d` is strictly inside the circle through CCW `a, b, c`.
pub fn incircle(a: P, b: P, c: P, d: P) -> i128 {
    let rows = [a, b, c].map(|p| {
        let x = (p.0 - d.0) as i128;
        let y = (p.1 - d.1) as i128;
        [x, y, x * x + y * y]
    });
    let [r0, r1, r2] = rows;
    r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
        + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0])
}

/// Pairs (triangle index, point index) where the point lies strictly inside
/// the triangle's circumcircle.
pub fn circumcircle_violations(points: &[P], tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (t, &[a, b, c]) in tris.iter().enumerate() {
        let (pa, mut pb, mut pc) = (points[a], points[b], points[c]);
        if orient(pa, pb, pc) < 0 {
            std::mem::swap(&mut pb, &mut pc);
        }
        for (k, &p) in points.iter().enumerate() {
            if k != a && k != b && k != c && incircle(pa, pb, pc, p) > 0 {
                out.push((t, k));
            }
        }
    }
    out
}

/// Convex hull by monotone chain, keeping collinear boundary points.
/// Returns (number of points on the hull boundary, twice the hull area).
pub fn hull(points: &[P]) -> (usize, i128) {
    let mut pts: Vec<P> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return (pts.len(), 0);
    }
    let build = |iter: &mut dyn Iterator<Item = P>| {
        let mut h: Vec<P> = Vec::new();
        for p in iter {
            while h.len() >= 2 && orient(h[h.len() - 2], h[h.len() - 1], p) < 0 {
                h.pop();
            }
            h.push(p);
        }
        h
    };
    let mut lower = build(&mut pts.iter().copied());
    let mut upper = build(&mut pts.iter().rev().copied());
    lower.pop();
    upper.pop();
    let mut ring = lower;
    ring.extend(upper);
    // all points collinear: the ring visits the line twice
    let area2: i128 = (0..ring.len())
        .map(|i| {
            let (p, q) = (ring[i], ring[(i + 1) % ring.len()]);
            p.0 as i128 * q.1 as i128 - q.0 as i128 * p.1 as i128
        })
        .sum();
    let unique: HashSet<P> = ring.iter().copied().collect();
    (unique.len(), area2)
}

/// Checks that `tris` is a triangulation of all of `points`: proper
/// triangles, every point used, no overlap, hull fully covered.
pub fn check_triangulation(points: &[P], tris: &[[usize; 3]]) -> Result<(), String> {
    let n = points.len();
    let mut used = vec![false; n];
    let mut area2 = 0i128;
    for &[a, b, c] in tris {
        let o = orient(points[a], points[b], points[c]);
        if o == 0 {
            return Err(format!("degenerate triangle {a},{b},{c}"));
        }
        area2 += o.abs();
        for v in [a, b, c] {
            used[v] = true;
        }
    }
    if let Some(k) = used.iter().position(|u| !u) {
        return Err(format!("point {k} unused"));
    }
    let (h, hull_area2) = hull(points);
    if area2 != hull_area2 {
        return Err(format!("triangle area {area2} != hull area {hull_area2}"));
    }
    if tris.len() != 2 * n - h - 2 {
        return Err(format!("{} triangles, expected {}", tris.len(), 2 * n - h - 2));
    }
    // equal area and count plus consistent edge use rules out overlaps
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
    for &[a, b, c] in tris {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *edge_use.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    if let Some(e) = edge_use.iter().find(|(_, &k)| k > 2) {
        return Err(format!("edge {:?} shared by {} triangles", e.0, e.1));
    }
    Ok(())
}

fn normalize(tris: &mut [[usize; 3]]) {
    for t in tris.iter_mut() {
        t.sort_unstable();
    }
    tris.sort_unstable();
}

/// A plain sweep triangulation, for points with no three collinear.
fn sweep(points: &[P]) -> Vec<[usize; 3]> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| points[i]);
    let (a, b, c) = (order[0], order[1], order[2]);
    let mut tris = vec![if orient(points[a], points[b], points[c]) > 0 { [a, b, c] } else { [a, c, b] }];
    for &p in &order[3..] {
        // boundary edges, directed CCW, are those used once
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &tris {
            let t = ccw(points, *t);
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let boundary: Vec<(usize, usize)> = directed
            .keys()
            .filter(|&&(u, v)| !directed.contains_key(&(v, u)))
            .copied()
            .collect();
        for (u, v) in boundary {
            if orient(points[u], points[v], points[p]) < 0 {
                tris.push([v, u, p]);
            }
        }
    }
    tris
}

fn ccw(points: &[P], t: [usize; 3]) -> [usize; 3] {
    if orient(points[t[0]], points[t[1]], points[t[2]]) > 0 {
        t
    } else {
        [t[0], t[2], t[1]]
    }
}

/// Every triangulation of `points` (no three collinear), by breadth-first
/// search over the flip graph, which is connected for planar point sets.
pub fn all_triangulations(points: &[P]) -> Vec<Vec<[usize; 3]>> {
    let mut start = sweep(points);
    normalize(&mut start);
    let mut seen: HashSet<Vec<[usize; 3]>> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some(cur) = queue.pop_front() {
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (i, t) in cur.iter().enumerate() {
            for (u, v) in [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])] {
                by_edge.entry((u, v)).or_default().push(i);
            }
        }
        for (&(a, b), owners) in &by_edge {
            if owners.len() != 2 {
                continue;
            }
            let apex = |t: [usize; 3]| t.into_iter().find(|&v| v != a && v != b).unwrap();
            let (c, d) = (apex(cur[owners[0]]), apex(cur[owners[1]]));
            let (pa, pb, pc, pd) = (points[a], points[b], points[c], points[d]);
            let convex = orient(pc, pd, pa).signum() * orient(pc, pd, pb).signum() < 0
                && orient(pa, pb, pc).signum() * orient(pa, pb, pd).signum() < 0;
            if !convex {
                continue;
            }
            let mut next: Vec<[usize; 3]> = cur
                .iter()
                .enumerate()
                .filter(|(i, _)| !owners.contains(i))
                .map(|(_, t)| *t)
                .collect();
            next.push([a, c, d]);
            next.push([b, c, d]);
            normalize(&mut next);
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    seen.into_iter().collect()
}

fn angles(points: &[P], t: [usize; 3]) -> [f64; 3] {
    let p = t.map(|i| (points[i].0 as f64, points[i].1 as f64));
    let angle_at = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| {
        let (ux, uy) = (u.0 - o.0, u.1 - o.1);
        let (vx, vy) = (v.0 - o.0, v.1 - o.1);
        (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy)
    };
    [angle_at(p[0], p[1], p[2]), angle_at(p[1], p[2], p[0]), angle_at(p[2], p[0], p[1])]
}

/// All angles of a triangulation, ascending.
pub fn angle_vector(points: &[P], tris: &[[usize; 3]]) -> Vec<f64> {
    let mut v: Vec<f64> = tris.iter().flat_map(|&t| angles(points, t)).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// The triangulations whose ascending angle vectors are lexicographically
/// maximal (within `tol` per entry).
pub fn max_angle_triangulations(points: &[P], tol: f64) -> Vec<Vec<[usize; 3]>> {
    let all = all_triangulations(points);
    let vectors: Vec<Vec<f64>> = all.iter().map(|t| angle_vector(points, t)).collect();
    let cmp = |x: &[f64], y: &[f64]| {
        for (a, b) in x.iter().zip(y) {
            if (a - b).abs() > tol {
                return a.total_cmp(b);
            }
        }
        std::cmp::Ordering::Equal
    };
    let best = vectors
        .iter()
        .max_by(|a, b| cmp(a, b))
        .expect("at least one triangulation")
        .clone();
    all.into_iter()
        .zip(&vectors)
        .filter(|(_, v)| cmp(v, &best) == std::cmp::Ordering::Equal)
        .map(|(t, _)| t)
        .collect()
}

pub fn has_collinear_triple(points: &[P]) -> bool {
    let n = points.len();
    (0..n).any(|i| (i + 1..n).any(|j| (j + 1..n).any(|k| orient(points[i], points[j], points[k]) == 0)))
}

pub fn has_cocircular_quad(points: &[P]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, mut b, mut c) = (points[i], points[j], points[k]);
                if orient(a, b, c) < 0 {
                    std::mem::swap(&mut b, &mut c);
                }
                if (k + 1..n).any(|l| incircle(a, b, c, points[l]) == 0) {
                    return true;
                }
            }
        }
    }
    false
}

/// Triangles with sorted vertex indices, sorted, for set comparison.
pub fn canonical(tris: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut t = tris.to_vec();
    normalize(&mut t);
    t
}

/// Peak signal-to-noise ratio between two equal-length 8-bit buffers.
pub fn psnr(a: &[u8], b: &[u8]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mse = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}
