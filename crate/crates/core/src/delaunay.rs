//! Incremental Delaunay triangulation with deterministic tie-breaking.
//!
//! Points are inserted in input order and the triangulation is legalized
//! with Lawson flips after each insertion. Orientation and in-circle tests
//! use exact adaptive predicates. Once the triangulation is Delaunay, edges
//! whose quadrilateral is cocircular are flipped toward the diagonal whose
//! smaller endpoint index is lowest, which makes the output a pure function
//! of the input sequence.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{incircle, orient, Point};

/// In-circle determinants with magnitude at or below this count as cocircular.
pub const INCIRCLE_TOLERANCE: f64 = 1e-9;

/// Points closer than this are duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    pub vertices: Vec<Point>,
    /// Counter-clockwise index triples (positive [`orient`]), each rotated so
    /// its smallest index comes first, sorted lexicographically.
    pub triangles: Vec<[usize; 3]>,
}

impl Triangulation {
    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }
}

struct Mesh<'a> {
    pts: &'a [Point],
    tris: Vec<Option<[usize; 3]>>,
    // directed edge (a, b) -> triangle having a->b in its CCW boundary
    edges: HashMap<(usize, usize), usize>,
}

impl<'a> Mesh<'a> {
    fn new(pts: &'a [Point]) -> Self {
        Mesh {
            pts,
            tris: Vec::new(),
            edges: HashMap::new(),
        }
    }

    fn add(&mut self, t: [usize; 3]) -> usize {
        debug_assert!(orient(self.pts[t[0]], self.pts[t[1]], self.pts[t[2]]) > 0.0);
        let id = self.tris.len();
        for k in 0..3 {
            self.edges.insert((t[k], t[(k + 1) % 3]), id);
        }
        self.tris.push(Some(t));
        id
    }

    fn remove(&mut self, id: usize) -> [usize; 3] {
        let t = self.tris[id].take().expect("triangle removed twice");
        for k in 0..3 {
            self.edges.remove(&(t[k], t[(k + 1) % 3]));
        }
        t
    }

    /// Vertex opposite directed edge (a, b) in the triangle owning it.
    fn apex(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        let id = *self.edges.get(&(a, b))?;
        let t = self.tris[id].expect("edge map points at live triangle");
        let c = t.into_iter().find(|&v| v != a && v != b).expect("triangle has 3 vertices");
        Some((id, c))
    }

    fn insert(&mut self, p: usize) {
        let q = self.pts[p];
        let mut on_edge = None;
        let mut inside = None;
        for (id, t) in self.tris.iter().enumerate() {
            let Some(t) = t else { continue };
            let o = [0, 1, 2].map(|k| orient(self.pts[t[k]], self.pts[t[(k + 1) % 3]], q));
            if o.iter().all(|&v| v > 0.0) {
                inside = Some(id);
                break;
            }
            if o.iter().all(|&v| v >= 0.0) {
                let k = o.iter().position(|&v| v == 0.0).expect("some orientation is zero");
                on_edge = Some((t[k], t[(k + 1) % 3]));
                break;
            }
        }

        let mut pending = Vec::new();
        if let Some(id) = inside {
            let [a, b, c] = self.remove(id);
            self.add([a, b, p]);
            self.add([b, c, p]);
            self.add([c, a, p]);
            pending.extend([(a, b), (b, c), (c, a)]);
        } else if let Some((a, b)) = on_edge {
            let (id, c) = self.apex(a, b).expect("edge belongs to a triangle");
            self.remove(id);
            self.add([b, c, p]);
            self.add([c, a, p]);
            pending.extend([(b, c), (c, a)]);
            if let Some((twin, d)) = self.apex(b, a) {
                self.remove(twin);
                self.add([a, d, p]);
                self.add([d, b, p]);
                pending.extend([(a, d), (d, b)]);
            }
        } else {
            // outside the hull: connect to every hull edge that sees p
            let mut visible: Vec<(usize, usize)> = self
                .edges
                .keys()
                .filter(|&&(a, b)| !self.edges.contains_key(&(b, a)))
                .filter(|&&(a, b)| orient(self.pts[a], self.pts[b], q) < 0.0)
                .copied()
                .collect();
            visible.sort_unstable();
            for (a, b) in visible {
                self.add([b, a, p]);
                pending.push((a, b));
            }
        }
        self.legalize(pending);
    }

    /// Lawson flips until every edge on the stack is locally Delaunay.
    fn legalize(&mut self, mut stack: Vec<(usize, usize)>) {
        while let Some((a, b)) = stack.pop() {
            if self.should_flip(a, b, false) {
                stack.extend(self.flip(a, b));
            }
        }
    }

    fn should_flip(&self, a: usize, b: usize, ties: bool) -> bool {
        let (Some((_, c)), Some((_, d))) = (self.apex(a, b), self.apex(b, a)) else {
            return false;
        };
        let det = incircle(self.pts[a], self.pts[b], self.pts[c], self.pts[d]);
        let wanted = if ties {
            det.abs() <= INCIRCLE_TOLERANCE && c.min(d) < a.min(b)
        } else {
            det > INCIRCLE_TOLERANCE
        };
        // the replacement triangles (a, d, c) and (d, b, c) must both be proper
        wanted
            && orient(self.pts[a], self.pts[d], self.pts[c]) > 0.0
            && orient(self.pts[d], self.pts[b], self.pts[c]) > 0.0
    }

    /// Replaces diagonal a-b by c-d and returns the four outer edges.
    fn flip(&mut self, a: usize, b: usize) -> [(usize, usize); 4] {
        let (t1, c) = self.apex(a, b).expect("flip on interior edge");
        let (t2, d) = self.apex(b, a).expect("flip on interior edge");
        self.remove(t1);
        self.remove(t2);
        self.add([a, d, c]);
        self.add([d, b, c]);
        [(a, d), (d, b), (b, c), (c, a)]
    }

    fn resolve_ties(&mut self) {
        // each tie flip strictly lowers the sum of per-edge minimum indices
        loop {
            let mut candidates: Vec<(usize, usize)> = self
                .edges
                .keys()
                .filter(|&&(a, b)| a < b)
                .copied()
                .collect();
            candidates.sort_unstable();
            let mut flipped = false;
            for (a, b) in candidates {
                if self.should_flip(a, b, true) {
                    self.flip(a, b);
                    flipped = true;
                }
            }
            if !flipped {
                break;
            }
        }
    }
}

/// Delaunay triangulation of a point set.
///
/// Requires at least three points, not all collinear, and no two closer
/// than [`DUPLICATE_TOLERANCE`].
pub fn triangulate(points: &[Point]) -> Result<Triangulation> {
    if points.len() < 3 {
        return Err(Error::Geometry(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(k) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::Geometry(format!("point {k} is not finite")));
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].distance(points[j]) <= DUPLICATE_TOLERANCE {
                return Err(Error::Geometry(format!("duplicate points {i} and {j}")));
            }
        }
    }
    let seed = (2..points.len())
        .find(|&k| orient(points[0], points[1], points[k]) != 0.0)
        .ok_or_else(|| Error::Geometry("all points are collinear".into()))?;

    let mut mesh = Mesh::new(points);
    if orient(points[0], points[1], points[seed]) > 0.0 {
        mesh.add([0, 1, seed]);
    } else {
        mesh.add([1, 0, seed]);
    }
    for p in (2..points.len()).filter(|&p| p != seed) {
        mesh.insert(p);
    }
    mesh.resolve_ties();

    let mut triangles: Vec<[usize; 3]> = mesh
        .tris
        .into_iter()
        .flatten()
        .map(|t| {
            let k = (0..3).min_by_key(|&k| t[k]).expect("three entries");
            [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
        })
        .collect();
    triangles.sort_unstable();
    Ok(Triangulation {
        vertices: points.to_vec(),
        triangles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle() {
        let t = triangulate(&[Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)]).unwrap();
        assert_eq!(t.triangles.len(), 1);
        let [a, b, c] = t.triangle_points(0);
        assert!(orient(a, b, c) > 0.0);
    }

    #[test]
    fn square_uses_tie_break_diagonal() {
        // corners in an order where the default diagonal would avoid vertex 0
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let t = triangulate(&pts).unwrap();
        assert_eq!(t.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        let pts2 = [pts[1], pts[2], pts[3], pts[0]];
        let t2 = triangulate(&pts2).unwrap();
        // diagonal must touch index 0, i.e. original corner (1,0) and (0,1)
        assert_eq!(t2.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(triangulate(&pts2).unwrap(), t2);
    }

    #[test]
    fn regular_polygon_fans_from_lowest_index() {
        let n = 8;
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                // scale so coordinates are exact-ish multiples; exact predicates handle the rest
                Point::new(100.0 * a.cos(), 100.0 * a.sin())
            })
            .collect();
        let t = triangulate(&pts).unwrap();
        assert_eq!(t.triangles.len(), n - 2);
    }

    #[test]
    fn rejects_degenerate_input() {
        let line: Vec<Point> = (0..5).map(|k| Point::new(k as f64, 2.0 * k as f64)).collect();
        assert!(matches!(triangulate(&line), Err(Error::Geometry(m)) if m.contains("collinear")));
        let dup = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)];
        assert!(matches!(triangulate(&dup), Err(Error::Geometry(m)) if m.contains("1 and 3")));
        assert!(triangulate(&dup[..2]).is_err());
    }

    #[test]
    fn collinear_prefix_and_hull_points() {
        // first three points collinear, plus boundary-style midpoints
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(5.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(0.0, 10.0),
            Point::new(5.0, 10.0),
            Point::new(0.0, 5.0),
            Point::new(10.0, 5.0),
            Point::new(3.0, 4.0),
            Point::new(20.0, 0.0),
        ];
        let t = triangulate(&pts).unwrap();
        let area: f64 = (0..t.triangles.len())
            .map(|i| {
                let [a, b, c] = t.triangle_points(i);
                crate::geometry::signed_area(a, b, c)
            })
            .sum();
        // hull is the quadrilateral (0,0),(20,0),(10,10),(0,10)
        assert!((area - 150.0).abs() < 1e-9, "{area}");
    }
}
