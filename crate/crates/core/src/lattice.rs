//! Integer-lattice geometry: points, boxes, Euclidean balls, nearest-neighbour
//! edges and the row-major index maps shared by every solver and sampler.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    coords: Vec<i64>,
}

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        Self { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![0; dim],
        }
    }

    /// `scale * e_axis`.
    pub fn axis(dim: usize, axis: usize, scale: i64) -> Self {
        let mut coords = vec![0; dim];
        coords[axis] = scale;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn sup_norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn norm2(&self) -> i64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn euclidean_norm(&self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn offset(&self, axis: usize, delta: i64) -> Self {
        let mut coords = self.coords.clone();
        coords[axis] += delta;
        Self { coords }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    /// The `2d` nearest neighbours, ordered by axis then by `-1, +1`.
    pub fn neighbors(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.dim()).flat_map(move |axis| [-1, 1].into_iter().map(move |s| self.offset(axis, s)))
    }

    pub fn is_adjacent(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| (a - b).abs())
                .sum::<i64>()
                == 1
    }
}

/// Common membership interface for boxes and balls.
pub trait Region {
    fn dim(&self) -> usize;
    fn contains(&self, p: &LatticePoint) -> bool;
    /// Smallest box that contains the region.
    fn bounding_box(&self) -> BoxRegion;
}

/// `x + [-N, N]^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxRegion {
    center: LatticePoint,
    radius: u32,
}

impl BoxRegion {
    pub fn new(center: LatticePoint, radius: u32) -> Result<Self> {
        if center.dim() < 3 {
            return Err(Error::InvalidParameter(format!(
                "lattice dimension must be at least 3, got {}",
                center.dim()
            )));
        }
        Ok(Self { center, radius })
    }

    /// `B(N)` centred at the origin.
    pub fn centered(dim: usize, radius: u32) -> Result<Self> {
        Self::new(LatticePoint::origin(dim), radius)
    }

    pub fn center(&self) -> &LatticePoint {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Side length `2N + 1`.
    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    /// `(2N + 1)^d`.
    pub fn volume(&self) -> usize {
        self.side().pow(self.dim() as u32)
    }

    /// Row-major strides: coordinate 0 is the slowest index, so index order is
    /// lexicographic order of points.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let side = self.side();
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * side;
        }
        strides
    }

    /// Row-major index of `p`; the lowest corner maps to 0.
    pub fn linear_index(&self, p: &LatticePoint) -> Result<usize> {
        if !self.contains(p) {
            return Err(Error::OutOfRegion(format!(
                "{:?} is not in {:?}",
                p.coords(),
                self
            )));
        }
        Ok(self.linear_index_unchecked(p))
    }

    pub(crate) fn linear_index_unchecked(&self, p: &LatticePoint) -> usize {
        let side = self.side() as i64;
        let r = self.radius as i64;
        p.coords
            .iter()
            .zip(&self.center.coords)
            .fold(0i64, |acc, (c, c0)| acc * side + (c - c0 + r)) as usize
    }

    pub fn point_at(&self, index: usize) -> Result<LatticePoint> {
        if index >= self.volume() {
            return Err(Error::OutOfRegion(format!(
                "index {index} outside a box of volume {}",
                self.volume()
            )));
        }
        Ok(self.point_at_unchecked(index))
    }

    pub(crate) fn point_at_unchecked(&self, mut index: usize) -> LatticePoint {
        let d = self.dim();
        let side = self.side();
        let r = self.radius as i64;
        let mut coords = vec![0i64; d];
        for j in (0..d).rev() {
            coords[j] = (index % side) as i64 - r + self.center.coords[j];
            index /= side;
        }
        LatticePoint { coords }
    }

    /// Sup-norm distance from the centre of the point at `index`.
    pub(crate) fn sup_radius_of(&self, mut index: usize) -> u32 {
        let side = self.side();
        let r = self.radius as i64;
        let mut m = 0i64;
        for _ in 0..self.dim() {
            m = m.max(((index % side) as i64 - r).abs());
            index /= side;
        }
        m as u32
    }

    pub fn center_index(&self) -> usize {
        (self.volume() - 1) / 2
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.volume()).map(move |i| self.point_at_unchecked(i))
    }

    /// Sub-box with the same centre.
    pub fn shrink_to(&self, radius: u32) -> Result<BoxRegion> {
        if radius > self.radius {
            return Err(Error::InvalidParameter(format!(
                "cannot shrink radius {} to {radius}",
                self.radius
            )));
        }
        Ok(BoxRegion {
            center: self.center.clone(),
            radius,
        })
    }

    /// In-box neighbour indices of `index`, visiting axes in order and `-1`
    /// before `+1`; `None` marks a neighbour outside the box.
    pub(crate) fn neighbor_indices(&self, index: usize, out: &mut Vec<Option<usize>>) {
        out.clear();
        let side = self.side();
        let strides = self.strides();
        for (j, &s) in strides.iter().enumerate() {
            let c = (index / s) % side;
            out.push(if c > 0 { Some(index - s) } else { None });
            out.push(if c + 1 < side { Some(index + s) } else { None });
            let _ = j;
        }
    }

    /// Canonical index of the edge between the vertex at `lo` and `lo + e_axis`.
    /// Increasing edge index matches the lexicographic order of [`EdgeId`]s.
    pub fn edge_index(&self, lo: usize, axis: usize) -> usize {
        let d = self.dim();
        lo * d + (d - 1 - axis)
    }

    /// Inverse of [`BoxRegion::edge_index`]: `(lo vertex, axis)`.
    pub fn edge_endpoints(&self, edge: usize) -> (usize, usize, usize) {
        let d = self.dim();
        let lo = edge / d;
        let axis = d - 1 - edge % d;
        (lo, axis, lo + self.strides()[axis])
    }

    /// Number of slots in the edge index space (some slots are unused at faces).
    pub fn edge_slots(&self) -> usize {
        self.volume() * self.dim()
    }

    /// Whether the slot `edge` names an edge with both endpoints in the box.
    pub fn edge_exists(&self, edge: usize) -> bool {
        let d = self.dim();
        let lo = edge / d;
        let axis = d - 1 - edge % d;
        lo < self.volume() && (lo / self.strides()[axis]) % self.side() + 1 < self.side()
    }
}

impl Region for BoxRegion {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim()
            && p.coords
                .iter()
                .zip(&self.center.coords)
                .all(|(c, c0)| (c - c0).abs() <= self.radius as i64)
    }

    fn bounding_box(&self) -> BoxRegion {
        self.clone()
    }
}

/// Euclidean ball `{p : |p - x| <= r}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRegion {
    center: LatticePoint,
    radius: f64,
}

impl BallRegion {
    pub fn new(center: LatticePoint, radius: f64) -> Result<Self> {
        if center.dim() < 3 {
            return Err(Error::InvalidParameter(format!(
                "lattice dimension must be at least 3, got {}",
                center.dim()
            )));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &LatticePoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl Region for BallRegion {
    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim() && (p.sub(&self.center).norm2() as f64) <= self.radius * self.radius
    }

    fn bounding_box(&self) -> BoxRegion {
        BoxRegion {
            center: self.center.clone(),
            radius: self.radius.floor() as u32,
        }
    }
}

/// Points of `region` with at least one neighbour outside it.
pub fn inner_boundary<R: Region>(region: &R) -> BTreeSet<LatticePoint> {
    region
        .bounding_box()
        .points()
        .filter(|p| region.contains(p) && p.neighbors().any(|q| !region.contains(&q)))
        .collect()
}

/// Points outside `region` with at least one neighbour inside it.
pub fn external_boundary<R: Region>(region: &R) -> BTreeSet<LatticePoint> {
    let bb = region.bounding_box();
    let grown = BoxRegion {
        center: bb.center.clone(),
        radius: bb.radius + 1,
    };
    grown
        .points()
        .filter(|p| !region.contains(p) && p.neighbors().any(|q| region.contains(&q)))
        .collect()
}

/// An undirected nearest-neighbour edge, stored with `lo < hi` lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    lo: LatticePoint,
    hi: LatticePoint,
}

impl EdgeId {
    pub fn new(a: LatticePoint, b: LatticePoint) -> Result<Self> {
        if !a.is_adjacent(&b) {
            return Err(Error::InvalidParameter(format!(
                "{:?} and {:?} are not nearest neighbours",
                a.coords(),
                b.coords()
            )));
        }
        Ok(if a < b {
            Self { lo: a, hi: b }
        } else {
            Self { lo: b, hi: a }
        })
    }

    pub fn lo(&self) -> &LatticePoint {
        &self.lo
    }

    pub fn hi(&self) -> &LatticePoint {
        &self.hi
    }

    pub fn axis(&self) -> usize {
        self.lo
            .coords
            .iter()
            .zip(&self.hi.coords)
            .position(|(a, b)| a != b)
            .unwrap_or(0)
    }
}

/// Every edge with both endpoints in `bx`, in canonical (lexicographic) order.
pub fn edges_of_box(bx: &BoxRegion) -> impl Iterator<Item = EdgeId> + '_ {
    (0..bx.edge_slots())
        .filter(move |&e| bx.edge_exists(e))
        .map(move |e| {
            let (lo, _, hi) = bx.edge_endpoints(e);
            EdgeId {
                lo: bx.point_at_unchecked(lo),
                hi: bx.point_at_unchecked(hi),
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_inner<R: Region>(region: &R, reach: i64) -> BTreeSet<LatticePoint> {
        let big = BoxRegion::new(region.bounding_box().center().clone(), reach as u32).unwrap();
        big.points()
            .filter(|p| region.contains(p))
            .filter(|p| {
                // any lattice point at distance 1 outside the region
                (0..p.dim()).any(|j| {
                    !region.contains(&p.offset(j, 1)) || !region.contains(&p.offset(j, -1))
                })
            })
            .collect()
    }

    #[test]
    fn box_one_inner_boundary_is_everything_but_center() {
        let b = BoxRegion::centered(3, 1).unwrap();
        let ib = inner_boundary(&b);
        assert_eq!(ib.len(), 26);
        assert!(!ib.contains(&LatticePoint::origin(3)));
    }

    #[test]
    fn box_zero_inner_boundary_is_origin() {
        let b = BoxRegion::centered(3, 0).unwrap();
        let ib = inner_boundary(&b);
        assert_eq!(
            ib.into_iter().collect::<Vec<_>>(),
            vec![LatticePoint::origin(3)]
        );
    }

    #[test]
    fn ball_inner_boundary_matches_scan_d4() {
        let ball = BallRegion::new(LatticePoint::origin(4), 2.0).unwrap();
        assert_eq!(inner_boundary(&ball), scan_inner(&ball, 4));
    }

    #[test]
    fn external_boundary_of_origin_is_unit_neighbours() {
        let b = BoxRegion::centered(3, 0).unwrap();
        let eb = external_boundary(&b);
        assert_eq!(eb.len(), 6);
        assert!(eb.iter().all(|p| p.sup_norm() == 1 && p.norm2() == 1));
    }

    #[test]
    fn external_boundary_of_box_one_matches_scan() {
        let b = BoxRegion::centered(3, 1).unwrap();
        let scan: BTreeSet<_> = BoxRegion::centered(3, 3)
            .unwrap()
            .points()
            .filter(|p| !b.contains(p) && p.neighbors().any(|q| b.contains(&q)))
            .collect();
        let eb = external_boundary(&b);
        assert_eq!(eb, scan);
        // faces of the side-5 cube without its edges and corners: 6 * 9
        assert_eq!(eb.len(), 54);
        assert!(eb.iter().all(|p| !b.contains(p)));
    }

    #[test]
    fn edges_of_box_counts_and_order() {
        let b0 = BoxRegion::centered(3, 0).unwrap();
        assert_eq!(edges_of_box(&b0).count(), 0);

        let b1 = BoxRegion::centered(3, 1).unwrap();
        let edges: Vec<_> = edges_of_box(&b1).collect();
        let pts: Vec<_> = b1.points().collect();
        let mut pairs = 0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                if p.is_adjacent(q) {
                    pairs += 1;
                }
            }
        }
        assert_eq!(edges.len(), pairs);
        assert_eq!(edges.len(), 54);
        assert!(
            edges.windows(2).all(|w| w[0] < w[1]),
            "canonical order and no duplicates"
        );
    }

    #[test]
    fn linear_index_examples() {
        for n in 0..4u32 {
            let b = BoxRegion::centered(3, n).unwrap();
            assert_eq!(
                b.linear_index(&LatticePoint::origin(3)).unwrap(),
                (b.volume() - 1) / 2
            );
        }
        let b = BoxRegion::centered(3, 2).unwrap();
        for i in 0..b.volume() {
            let p = b.point_at(i).unwrap();
            assert_eq!(b.linear_index(&p).unwrap(), i);
        }
        let b4 = BoxRegion::centered(4, 1).unwrap();
        assert_eq!(b4.volume() - 1, 80);
        assert_eq!(
            b4.linear_index(&LatticePoint::new(vec![1, 1, 1, 1]))
                .unwrap(),
            80
        );
        assert!(b4
            .linear_index(&LatticePoint::new(vec![2, 0, 0, 0]))
            .is_err());
    }

    #[test]
    fn sandwich_box_ball_box() {
        for d in 3..=7usize {
            for n in 1..=20u32 {
                let inner = BoxRegion::centered(d, ((n as f64) / (d as f64).sqrt()).floor() as u32)
                    .unwrap();
                let ball = BallRegion::new(LatticePoint::origin(d), n as f64).unwrap();
                let outer = BoxRegion::centered(d, n).unwrap();
                // corners of the inner box are its extreme points
                let corner = LatticePoint::new(vec![inner.radius() as i64; d]);
                assert!(ball.contains(&corner));
                // extreme ball points along the axes are inside the outer box
                assert!(outer.contains(&LatticePoint::axis(d, 0, n as i64)));
                if d == 3 && n <= 6 {
                    assert!(inner.points().all(|p| ball.contains(&p)));
                    assert!(ball
                        .bounding_box()
                        .points()
                        .filter(|p| ball.contains(p))
                        .all(|p| outer.contains(&p)));
                }
            }
        }
    }

    #[test]
    fn neighbor_indices_match_points() {
        let b = BoxRegion::centered(3, 2).unwrap();
        let mut nb = Vec::new();
        for i in 0..b.volume() {
            let p = b.point_at_unchecked(i);
            b.neighbor_indices(i, &mut nb);
            for (k, q) in p.neighbors().enumerate() {
                match nb[k] {
                    Some(j) => assert_eq!(b.point_at_unchecked(j), q),
                    None => assert!(!b.contains(&q)),
                }
            }
        }
    }
}
