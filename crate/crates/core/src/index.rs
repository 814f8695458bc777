//! Exact k-d tree for nearest-neighbor, k-NN and radius queries.
//!
//! Every query is exact. Ties in distance are resolved by the lowest point
//! id, so results are identical to an exhaustive scan under the same rule.

use std::cmp::Ordering;

use nalgebra::Point3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

/// Distance used by an index: full 3D, or the projection onto the xy plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Xy,
    Xyz,
}

impl Metric {
    fn dims(self) -> usize {
        match self {
            Metric::Xy => 2,
            Metric::Xyz => 3,
        }
    }

    #[inline]
    pub fn dist_sq<T: Real>(self, a: &[T; 3], b: &[T; 3]) -> T {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        match self {
            Metric::Xy => dx * dx + dy * dy,
            Metric::Xyz => {
                let dz = a[2] - b[2];
                dx * dx + dy * dy + dz * dz
            }
        }
    }
}

/// A query hit. `index` is the position in the indexed cloud, `id` its
/// provenance id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub id: u32,
    pub dist_sq: T,
}

impl<T: Real> Neighbor<T> {
    pub fn distance(&self) -> T {
        self.dist_sq.sqrt()
    }

    #[inline]
    fn precedes(&self, other: &Self) -> bool {
        self.dist_sq < other.dist_sq || (self.dist_sq == other.dist_sq && self.id < other.id)
    }
}

fn order<T: Real>(a: &Neighbor<T>, b: &Neighbor<T>) -> Ordering {
    a.dist_sq
        .partial_cmp(&b.dist_sq)
        .unwrap_or(Ordering::Equal)
        .then(a.id.cmp(&b.id))
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        dim: u8,
        value: T,
        left: u32,
        right: u32,
    },
}

/// Immutable k-d tree over a point set.
#[derive(Debug, Clone)]
pub struct SpatialIndex<T: Real> {
    metric: Metric,
    /// Coordinates in tree (leaf) order.
    coords: Vec<[T; 3]>,
    /// Position in the source cloud, tree order.
    source: Vec<u32>,
    /// Provenance ids, tree order.
    ids: Vec<u32>,
    nodes: Vec<Node<T>>,
    root: u32,
}

impl<T: Real> SpatialIndex<T> {
    /// Index a cloud. Fails on an empty cloud.
    pub fn build(cloud: &PointCloud<T>, metric: Metric) -> Result<Self> {
        Self::from_points(cloud.points(), cloud.ids(), metric)
    }

    pub fn from_points(points: &[Point3<T>], ids: &[u32], metric: Metric) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if ids.len() != points.len() {
            return Err(Error::ShapeMismatch {
                expected: points.len(),
                actual: ids.len(),
            });
        }
        let raw: Vec<[T; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut perm: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        let root = build_node(&raw, ids, &mut perm, 0, metric.dims(), &mut nodes);
        Ok(Self {
            metric,
            coords: perm.iter().map(|&i| raw[i as usize]).collect(),
            ids: perm.iter().map(|&i| ids[i as usize]).collect(),
            source: perm,
            nodes,
            root,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Exact nearest neighbor of `q`.
    pub fn nearest(&self, q: &Point3<T>) -> Neighbor<T> {
        self.nearest_where(q, None, |_| true)
            .expect("non-empty index always has a nearest point")
    }

    /// Nearest point satisfying `accept` (called with the cloud position),
    /// optionally restricted to squared distance `<= max_dist_sq`.
    pub fn nearest_where<F>(&self, q: &Point3<T>, max_dist_sq: Option<T>, accept: F) -> Option<Neighbor<T>>
    where
        F: Fn(usize) -> bool,
    {
        let q = [q.x, q.y, q.z];
        let mut best = Neighbor {
            index: usize::MAX,
            id: u32::MAX,
            dist_sq: max_dist_sq.unwrap_or_else(T::infinity),
        };
        let mut found = false;
        self.search_nearest(self.root, &q, &accept, &mut best, &mut found);
        found.then_some(best)
    }

    fn search_nearest<F: Fn(usize) -> bool>(
        &self,
        node: u32,
        q: &[T; 3],
        accept: &F,
        best: &mut Neighbor<T>,
        found: &mut bool,
    ) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in *start as usize..*end as usize {
                    let d = self.metric.dist_sq(q, &self.coords[i]);
                    let cand = Neighbor {
                        index: self.source[i] as usize,
                        id: self.ids[i],
                        dist_sq: d,
                    };
                    let admissible = if *found {
                        cand.precedes(best)
                    } else {
                        d <= best.dist_sq
                    };
                    if admissible && accept(cand.index) {
                        *best = cand;
                        *found = true;
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[*dim as usize] - *value;
                let (near, far) = if diff < T::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search_nearest(near, q, accept, best, found);
                if diff * diff <= best.dist_sq {
                    self.search_nearest(far, q, accept, best, found);
                }
            }
        }
    }

    /// The `k` nearest points, ordered by (distance, id). Returns fewer than
    /// `k` when the index is smaller.
    pub fn knn(&self, q: &Point3<T>, k: usize) -> Vec<Neighbor<T>> {
        if k == 0 {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut heap: Vec<Neighbor<T>> = Vec::with_capacity(k + 1);
        self.search_knn(self.root, &q, k, &mut heap);
        heap
    }

    fn search_knn(&self, node: u32, q: &[T; 3], k: usize, out: &mut Vec<Neighbor<T>>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in *start as usize..*end as usize {
                    let cand = Neighbor {
                        index: self.source[i] as usize,
                        id: self.ids[i],
                        dist_sq: self.metric.dist_sq(q, &self.coords[i]),
                    };
                    if out.len() == k {
                        if !cand.precedes(out.last().unwrap()) {
                            continue;
                        }
                        out.pop();
                    }
                    let pos = out.partition_point(|n| n.precedes(&cand));
                    out.insert(pos, cand);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[*dim as usize] - *value;
                let (near, far) = if diff < T::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search_knn(near, q, k, out);
                if out.len() < k || diff * diff <= out.last().unwrap().dist_sq {
                    self.search_knn(far, q, k, out);
                }
            }
        }
    }

    /// All points within `radius` (inclusive), ordered by (distance, id).
    pub fn within_radius(&self, q: &Point3<T>, radius: T) -> Vec<Neighbor<T>> {
        let q = [q.x, q.y, q.z];
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.search_radius(self.root, &q, r2, &mut out);
        out.sort_by(order);
        out
    }

    /// Number of points within `radius` (inclusive) satisfying `accept`.
    pub fn count_within<F: Fn(usize) -> bool>(&self, q: &Point3<T>, radius: T, accept: F) -> usize {
        self.within_radius(q, radius)
            .iter()
            .filter(|n| accept(n.index))
            .count()
    }

    fn search_radius(&self, node: u32, q: &[T; 3], r2: T, out: &mut Vec<Neighbor<T>>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for i in *start as usize..*end as usize {
                    let d = self.metric.dist_sq(q, &self.coords[i]);
                    if d <= r2 {
                        out.push(Neighbor {
                            index: self.source[i] as usize,
                            id: self.ids[i],
                            dist_sq: d,
                        });
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[*dim as usize] - *value;
                let (near, far) = if diff < T::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search_radius(near, q, r2, out);
                if diff * diff <= r2 {
                    self.search_radius(far, q, r2, out);
                }
            }
        }
    }
}

fn build_node<T: Real>(
    raw: &[[T; 3]],
    ids: &[u32],
    perm: &mut [u32],
    offset: usize,
    dims: usize,
    nodes: &mut Vec<Node<T>>,
) -> u32 {
    if perm.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + perm.len()) as u32,
        });
        return (nodes.len() - 1) as u32;
    }

    let mut dim = 0;
    let mut widest = T::zero() - T::one();
    for d in 0..dims {
        let (lo, hi) = perm.iter().fold((T::infinity(), -T::infinity()), |(lo, hi), &i| {
            let v = raw[i as usize][d];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > widest {
            widest = hi - lo;
            dim = d;
        }
    }

    let mid = perm.len() / 2;
    perm.select_nth_unstable_by(mid, |&a, &b| {
        raw[a as usize][dim]
            .partial_cmp(&raw[b as usize][dim])
            .unwrap_or(Ordering::Equal)
            .then(ids[a as usize].cmp(&ids[b as usize]))
    });
    let value = raw[perm[mid] as usize][dim];

    let slot = nodes.len();
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = perm.split_at_mut(mid);
    let left = build_node(raw, ids, lo, offset, dims, nodes);
    let right = build_node(raw, ids, hi, offset + mid, dims, nodes);
    nodes[slot] = Node::Split {
        dim: dim as u8,
        value,
        left,
        right,
    };
    slot as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(xyz: &[[f64; 3]]) -> PointCloud<f64> {
        PointCloud::from_xyz(xyz)
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let err = SpatialIndex::build(&cloud(&[]), Metric::Xyz).unwrap_err();
        assert!(matches!(err, Error::EmptyCloud));
    }

    #[test]
    fn single_point() {
        let idx = SpatialIndex::build(&cloud(&[[0.0; 3]]), Metric::Xyz).unwrap();
        let n = idx.nearest(&Point3::new(5.0, 5.0, 5.0));
        assert_eq!(n.id, 0);
        assert_eq!(n.distance(), 75f64.sqrt());
    }

    #[test]
    fn two_points_xyz() {
        let idx = SpatialIndex::build(&cloud(&[[0.0; 3], [3.0, 0.0, 0.0]]), Metric::Xyz).unwrap();
        let n = idx.nearest(&Point3::new(1.0, 0.0, 0.0));
        assert_eq!((n.id, n.distance()), (0, 1.0));
    }

    #[test]
    fn xy_metric_ignores_z_and_breaks_ties_low() {
        let idx = SpatialIndex::build(&cloud(&[[0.0; 3], [0.0, 0.0, 9.0]]), Metric::Xy).unwrap();
        let n = idx.nearest(&Point3::new(0.1, 0.0, 9.0));
        assert_eq!(n.id, 0);
        assert!((n.distance() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn nearest_examples() {
        let idx = SpatialIndex::build(&cloud(&[[0.0; 3], [5.0, 0.0, 0.0]]), Metric::Xyz).unwrap();
        assert_eq!(idx.nearest(&Point3::new(0.0, 0.0, 0.0)).dist_sq, 0.0);
        let a = idx.nearest(&Point3::new(2.0, 0.0, 0.0));
        assert_eq!((a.id, a.distance()), (0, 2.0));
        let b = idx.nearest(&Point3::new(4.0, 0.0, 0.0));
        assert_eq!((b.id, b.distance()), (1, 1.0));
    }

    #[test]
    fn duplicates_resolve_to_lowest_id() {
        let pts: Vec<[f64; 3]> = (0..40).map(|_| [1.0, 2.0, 3.0]).collect();
        let c = cloud(&pts).with_ids((0..40).rev().collect()).unwrap();
        let idx = SpatialIndex::build(&c, Metric::Xyz).unwrap();
        let n = idx.nearest(&Point3::new(1.0, 2.0, 3.5));
        assert_eq!(n.id, 0);
        assert_eq!(n.index, 39);
        let k = idx.knn(&Point3::new(0.0, 0.0, 0.0), 3);
        assert_eq!(k.iter().map(|n| n.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn filtered_nearest_respects_bound() {
        let c = cloud(&[[0.0; 3], [1.0, 0.0, 0.0], [4.0, 0.0, 0.0]]);
        let idx = SpatialIndex::build(&c, Metric::Xyz).unwrap();
        let q = Point3::new(0.0, 0.0, 0.0);
        let n = idx.nearest_where(&q, None, |i| i != 0).unwrap();
        assert_eq!(n.index, 1);
        assert!(idx.nearest_where(&q, Some(9.0), |i| i == 2).is_none());
        assert_eq!(idx.nearest_where(&q, Some(16.0), |i| i == 2).unwrap().index, 2);
    }
}
