//! Polygonal domains and their partitions into subdomains.
//!
//! Two domain families are supported: the unit square `(0,1)²` with the bottom
//! side as the accessible boundary portion `Σ`, and a regular polygon
//! approximating the unit disk that hosts the cube `[-1/2,1/2]²`, with the
//! whole boundary as `Σ`. In both cases the cells are the squares of a
//! uniform grid, ordered lexicographically by their integer grid coordinates.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

pub type Point = Point2<f64>;

const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, reorienting it counter-clockwise.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let poly = Polygon { vertices: vertices.clone() };
        let area = poly.signed_area();
        if !area.is_finite() || area.abs() <= GEOM_TOL {
            return Err(Error::Geometry("degenerate polygon with zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Polygon { vertices })
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    /// Regular `sides`-gon inscribed in the circle of the given radius, with a
    /// vertex at angle zero.
    pub fn regular(sides: usize, radius: f64) -> Result<Self> {
        let vertices = (0..sides)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
                Point::new(radius * t.cos(), radius * t.sin())
            })
            .collect();
        Self::new(vertices)
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a.x * b.y - b.x * a.y;
        }
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = a.x * b.y - b.x * a.y;
            cx += (a.x + b.x) * cross;
            cy += (a.y + b.y) * cross;
        }
        let a6 = 6.0 * self.signed_area();
        Point::new(cx / a6, cy / a6)
    }

    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, &a, &b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Point-in-polygon by ray crossing; points on the boundary count as inside.
    pub fn contains(&self, p: &Point) -> bool {
        if self.distance_to_boundary(p) <= GEOM_TOL {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Strict interior test with a margin.
    pub fn contains_strictly(&self, p: &Point, margin: f64) -> bool {
        self.contains(p) && self.distance_to_boundary(p) > margin
    }
}

pub fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Collinear overlap of two segments: `(length, midpoint)` or `None`.
fn collinear_overlap(a0: &Point, a1: &Point, b0: &Point, b1: &Point) -> Option<(f64, Point)> {
    let d = a1 - a0;
    let len = d.norm();
    if len == 0.0 {
        return None;
    }
    let u = d / len;
    let normal = Vector2::new(-u.y, u.x);
    let scale = len.max(1.0);
    if ((b0 - a0).dot(&normal)).abs() > GEOM_TOL * scale
        || ((b1 - a0).dot(&normal)).abs() > GEOM_TOL * scale
    {
        return None;
    }
    let (s0, s1) = ((b0 - a0).dot(&u), (b1 - a0).dot(&u));
    let lo = s0.min(s1).max(0.0);
    let hi = s0.max(s1).min(len);
    if hi - lo <= GEOM_TOL * scale {
        return None;
    }
    Some((hi - lo, a0 + u * (0.5 * (lo + hi))))
}

/// Longest common boundary portion of two polygons: `(length, midpoint)`.
pub fn shared_boundary(a: &Polygon, b: &Polygon) -> Option<(f64, Point)> {
    let mut best: Option<(f64, Point)> = None;
    for (p0, p1) in a.edges() {
        for (q0, q1) in b.edges() {
            if let Some((len, mid)) = collinear_overlap(&p0, &p1, &q0, &q1) {
                if best.map_or(true, |(l, _)| len > l) {
                    best = Some((len, mid));
                }
            }
        }
    }
    best
}

/// Outward unit normal of the polygon edge through `p`.
pub fn outward_normal(poly: &Polygon, p: &Point) -> Option<Vector2<f64>> {
    poly.edges().find(|(a, b)| segment_distance(p, a, b) <= GEOM_TOL).map(|(a, b)| {
        let d = (b - a).normalize();
        // counter-clockwise orientation: outward is the right-hand normal
        Vector2::new(d.y, -d.x)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `Ω = (0,1)²`, `Σ` = bottom side, extension cell below its midpoint.
    UnitSquare,
    /// Regular polygon approximating the unit disk, hosting `[-1/2,1/2]²`;
    /// `Σ` = whole boundary, `q = fill` outside the cube.
    Disk { sides: usize },
}

impl DomainSpec {
    pub fn disk() -> Self {
        DomainSpec::Disk { sides: 128 }
    }
}

/// Labels of the regions a triangle or point can belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Unknown-potential cell `D_{j+1}` (zero-based).
    Cell(usize),
    /// Known part of the domain outside the grid cells (disk geometry).
    Background,
    /// Exterior cell `D_0` attached outside `Σ`.
    Extension,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub r0: f64,
    pub lipschitz: f64,
    pub area_bound: f64,
}

impl GeometryParams {
    /// `r_1 = r_0 / 16`.
    pub fn r1(&self) -> f64 {
        self.r0 / 16.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub outer: Polygon,
    pub inner: Polygon,
}

impl Background {
    pub fn area(&self) -> f64 {
        self.outer.area() - self.inner.area()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub spec: DomainSpec,
    pub side_cells: usize,
    pub domain: Polygon,
    /// Cells in lexicographic order of `cell_grid`.
    pub cells: Vec<Polygon>,
    /// One-based grid coordinates `(j1', j2')` of every cell.
    pub cell_grid: Vec<[usize; 2]>,
    pub background: Option<Background>,
    /// Boundary segments forming `Σ`.
    pub sigma: Vec<[Point; 2]>,
    pub extension: Option<Polygon>,
    /// `P` on the shared boundary of cells `(j, k)`, `j < k`.
    pub interface_points: BTreeMap<(usize, usize), Point>,
    pub params: GeometryParams,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub indices: Vec<usize>,
    /// `crossing_points[i]` lies between cells `indices[i]` and `indices[i+1]`.
    pub crossing_points: Vec<Point>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn build_grid_partition(side_cells: usize, spec: DomainSpec) -> Result<Partition> {
    if side_cells == 0 {
        return Err(Error::InvalidInput("side_cells must be at least 1".into()));
    }
    let n = side_cells;
    let (domain, lo, width, sigma, extension, background, r0) = match spec {
        DomainSpec::UnitSquare => {
            let domain = Polygon::rectangle(0.0, 0.0, 1.0, 1.0)?;
            let sigma = vec![[Point::new(0.0, 0.0), Point::new(1.0, 0.0)]];
            let r0 = 0.25;
            let half = 2.0 * r0 / 3.0;
            let ext = Polygon::rectangle(0.5 - half, -2.0 * r0 / 3.0, 0.5 + half, 0.0)?;
            (domain, 0.0, 1.0, sigma, Some(ext), None, r0)
        }
        DomainSpec::Disk { sides } => {
            if sides < 3 {
                return Err(Error::InvalidInput(format!("disk polygon needs >= 3 sides, got {sides}")));
            }
            let inradius = (std::f64::consts::PI / sides as f64).cos();
            if inradius <= std::f64::consts::FRAC_1_SQRT_2 + GEOM_TOL {
                return Err(Error::Geometry(format!(
                    "a {sides}-gon inscribed in the unit circle cannot host the cube [-1/2,1/2]^2"
                )));
            }
            let domain = Polygon::regular(sides, 1.0)?;
            let sigma = domain.edges().map(|(a, b)| [a, b]).collect();
            let inner = Polygon::rectangle(-0.5, -0.5, 0.5, 0.5)?;
            let background = Background { outer: domain.clone(), inner };
            (domain, -0.5, 1.0, sigma, None, Some(background), 0.25)
        }
    };

    let step = width / n as f64;
    let mut cells = Vec::with_capacity(n * n);
    let mut cell_grid = Vec::with_capacity(n * n);
    for j1 in 1..=n {
        for j2 in 1..=n {
            let x0 = lo + (j1 - 1) as f64 * step;
            let y0 = lo + (j2 - 1) as f64 * step;
            let x1 = if j1 == n { lo + width } else { lo + j1 as f64 * step };
            let y1 = if j2 == n { lo + width } else { lo + j2 as f64 * step };
            cells.push(Polygon::rectangle(x0, y0, x1, y1)?);
            cell_grid.push([j1, j2]);
        }
    }

    let params = GeometryParams { r0, lipschitz: 1.0, area_bound: domain.area() };
    let mut partition = Partition {
        spec,
        side_cells: n,
        domain,
        cells,
        cell_grid,
        background,
        sigma,
        extension,
        interface_points: BTreeMap::new(),
        params,
        adjacency: Vec::new(),
    };
    partition.rebuild_topology();
    Ok(partition)
}

impl Partition {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    fn rebuild_topology(&mut self) {
        let n = self.cells.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut points = BTreeMap::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if let Some((_, mid)) = self.shared_boundary(a, b) {
                    adjacency[a].push(b);
                    adjacency[b].push(a);
                    points.insert((a, b), mid);
                }
            }
        }
        self.adjacency = adjacency;
        self.interface_points = points;
    }

    /// Longest shared edge portion of two cells: `(length, midpoint)`.
    pub fn shared_boundary(&self, a: usize, b: usize) -> Option<(f64, Point)> {
        shared_boundary(&self.cells[a], &self.cells[b])
    }

    /// Cells sharing a boundary portion of positive length with `cell`.
    pub fn neighbors(&self, cell: usize) -> &[usize] {
        &self.adjacency[cell]
    }

    pub fn sigma_length(&self) -> f64 {
        self.sigma.iter().map(|[a, b]| (b - a).norm()).sum()
    }

    pub fn touches_sigma(&self, cell: usize) -> bool {
        self.cells[cell].edges().any(|(p0, p1)| {
            self.sigma
                .iter()
                .any(|[s0, s1]| collinear_overlap(&p0, &p1, s0, s1).is_some())
        })
    }

    pub fn point_on_sigma(&self, p: &Point, tol: f64) -> bool {
        self.sigma.iter().any(|[a, b]| segment_distance(p, a, b) <= tol)
    }

    /// Region containing `p` (first match in cell order), or `None` if `p`
    /// lies outside `Ω₀`.
    pub fn locate(&self, p: &Point) -> Option<Region> {
        if let Some(j) = self.cells.iter().position(|c| c.contains(p)) {
            return Some(Region::Cell(j));
        }
        if let Some(ext) = &self.extension {
            if ext.contains(p) {
                return Some(Region::Extension);
            }
        }
        if self.background.is_some() && self.domain.contains(p) {
            return Some(Region::Background);
        }
        None
    }

    /// Sum of region areas minus the domain area, relative to the domain area.
    pub fn coverage_defect(&self) -> f64 {
        let cells: f64 = self.cells.iter().map(Polygon::area).sum();
        let bg = self.background.as_ref().map_or(0.0, Background::area);
        let dom = self.domain.area();
        ((cells + bg) - dom).abs() / dom
    }

    /// Replaces the user-facing geometry constants.
    pub fn with_params(mut self, params: GeometryParams) -> Self {
        self.params = params;
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&PartitionFile::from(self))
            .map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&PartitionFile::from(self)).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PartitionFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_partition()
    }
}

/// Shortest adjacency chain from the first cell to `target`, found by
/// breadth-first search visiting neighbours in increasing index order.
pub fn chain_to(partition: &Partition, target: usize) -> Result<Chain> {
    let n = partition.n_cells();
    if target >= n {
        return Err(Error::InvalidInput(format!("target cell {target} out of range 0..{n}")));
    }
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(c) = queue.pop_front() {
        if c == target {
            break;
        }
        for &nb in partition.neighbors(c) {
            if !seen[nb] {
                seen[nb] = true;
                parent[nb] = c;
                queue.push_back(nb);
            }
        }
    }
    if !seen[target] {
        return Err(Error::Unreachable { target });
    }
    let mut indices = vec![target];
    while *indices.last().unwrap() != 0 {
        let c = *indices.last().unwrap();
        indices.push(parent[c]);
    }
    indices.reverse();
    let crossing_points = indices
        .windows(2)
        .map(|w| {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            partition.interface_points[&key]
        })
        .collect();
    Ok(Chain { indices, crossing_points })
}

/// Complex potential `q = Σ q_j χ_{D_j}`, with `fill` on the background and
/// the extension cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub values: Vec<C64>,
    pub fill: C64,
    pub bound: f64,
}

impl Potential {
    /// Potential with `fill = 1` and the given sup-norm bound.
    pub fn new(values: Vec<C64>, bound: f64) -> Result<Self> {
        Self::with_fill(values, C64::new(1.0, 0.0), bound)
    }

    pub fn with_fill(values: Vec<C64>, fill: C64, bound: f64) -> Result<Self> {
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput("potential values must be finite".into()));
        }
        let sup = values.iter().map(|v| v.norm()).fold(fill.norm(), f64::max);
        if sup > bound * (1.0 + 1e-14) {
            return Err(Error::InvalidInput(format!(
                "potential sup norm {sup} exceeds the bound {bound}"
            )));
        }
        Ok(Potential { values, fill, bound })
    }

    /// Potential with the smallest admissible bound.
    pub fn from_values(values: Vec<C64>) -> Self {
        let fill = C64::new(1.0, 0.0);
        let bound = values.iter().map(|v| v.norm()).fold(fill.norm(), f64::max);
        Potential { values, fill, bound }
    }

    /// Same constant on every region.
    pub fn constant(n_cells: usize, c: C64) -> Self {
        Potential { values: vec![c; n_cells], fill: c, bound: c.norm() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, region: Region) -> C64 {
        match region {
            Region::Cell(j) => self.values[j],
            Region::Background | Region::Extension => self.fill,
        }
    }

    /// `max_j |q_j - p_j|`, the sup-norm distance of two potentials on one partition.
    pub fn sup_distance(&self, other: &Potential) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "potentials on different partitions");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.fill.im == 0.0 && self.values.iter().all(|v| v.im == 0.0)
    }
}

/// Indexed on-disk form of a partition.
#[derive(Serialize, Deserialize)]
struct PartitionFile {
    spec: DomainSpec,
    side_cells: usize,
    params: GeometryParams,
    vertices: Vec<[f64; 2]>,
    domain: Vec<usize>,
    cells: Vec<Vec<usize>>,
    cell_grid: Vec<[usize; 2]>,
    sigma_edges: Vec<[usize; 2]>,
    extension: Option<Vec<usize>>,
    background_inner: Option<Vec<usize>>,
}

struct VertexTable {
    vertices: Vec<[f64; 2]>,
    index: BTreeMap<(u64, u64), usize>,
}

impl VertexTable {
    fn id(&mut self, p: &Point) -> usize {
        // normalise -0.0 so equal coordinates share a key
        let (x, y) = (p.x + 0.0, p.y + 0.0);
        let key = (x.to_bits(), y.to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.vertices.push([x, y]);
        self.index.insert(key, self.vertices.len() - 1);
        self.vertices.len() - 1
    }

    fn polygon(&mut self, poly: &Polygon) -> Vec<usize> {
        poly.vertices.iter().map(|v| self.id(v)).collect()
    }
}

impl From<&Partition> for PartitionFile {
    fn from(p: &Partition) -> Self {
        let mut table = VertexTable { vertices: Vec::new(), index: BTreeMap::new() };
        let domain = table.polygon(&p.domain);
        let cells = p.cells.iter().map(|c| table.polygon(c)).collect();
        let sigma_edges = p.sigma.iter().map(|[a, b]| [table.id(a), table.id(b)]).collect();
        let extension = p.extension.as_ref().map(|e| table.polygon(e));
        let background_inner = p.background.as_ref().map(|b| table.polygon(&b.inner));
        PartitionFile {
            spec: p.spec,
            side_cells: p.side_cells,
            params: p.params,
            vertices: table.vertices,
            domain,
            cells,
            cell_grid: p.cell_grid.clone(),
            sigma_edges,
            extension,
            background_inner,
        }
    }
}

impl PartitionFile {
    fn into_partition(self) -> Result<Partition> {
        let pt = |i: usize| -> Result<Point> {
            self.vertices
                .get(i)
                .map(|v| Point::new(v[0], v[1]))
                .ok_or_else(|| Error::Parse(format!("vertex index {i} out of range")))
        };
        let poly = |ids: &[usize]| -> Result<Polygon> {
            Polygon::new(ids.iter().map(|&i| pt(i)).collect::<Result<Vec<_>>>()?)
        };
        if self.cells.len() != self.cell_grid.len() {
            return Err(Error::Parse("cells and cell_grid lengths differ".into()));
        }
        let domain = poly(&self.domain)?;
        let cells = self.cells.iter().map(|c| poly(c)).collect::<Result<Vec<_>>>()?;
        let sigma = self
            .sigma_edges
            .iter()
            .map(|&[a, b]| Ok([pt(a)?, pt(b)?]))
            .collect::<Result<Vec<_>>>()?;
        let extension = self.extension.as_deref().map(poly).transpose()?;
        let background = self
            .background_inner
            .as_deref()
            .map(|ids| -> Result<Background> { Ok(Background { outer: domain.clone(), inner: poly(ids)? }) })
            .transpose()?;
        let mut partition = Partition {
            spec: self.spec,
            side_cells: self.side_cells,
            domain,
            cells,
            cell_grid: self.cell_grid,
            background,
            sigma,
            extension,
            interface_points: BTreeMap::new(),
            params: self.params,
            adjacency: Vec::new(),
        };
        partition.rebuild_topology();
        Ok(partition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive shortest path length by iterative deepening over simple paths.
    fn brute_force_chain_len(p: &Partition, target: usize) -> usize {
        fn dfs(p: &Partition, cur: usize, target: usize, depth: usize, visited: &mut Vec<bool>) -> bool {
            if cur == target {
                return true;
            }
            if depth == 0 {
                return false;
            }
            for &nb in p.neighbors(cur) {
                if !visited[nb] {
                    visited[nb] = true;
                    if dfs(p, nb, target, depth - 1, visited) {
                        return true;
                    }
                    visited[nb] = false;
                }
            }
            false
        }
        for depth in 0..p.n_cells() {
            let mut visited = vec![false; p.n_cells()];
            visited[0] = true;
            if dfs(p, 0, target, depth, &mut visited) {
                return depth + 1;
            }
        }
        usize::MAX
    }

    #[test]
    fn single_cell_square() {
        let p = build_grid_partition(1, DomainSpec::UnitSquare).unwrap();
        assert_eq!(p.n_cells(), 1);
        assert_eq!(chain_to(&p, 0).unwrap().indices, vec![0]);
        assert!(p.touches_sigma(0));
    }

    #[test]
    fn rejects_zero_cells_and_small_disk() {
        assert!(build_grid_partition(0, DomainSpec::UnitSquare).is_err());
        assert!(matches!(
            build_grid_partition(2, DomainSpec::Disk { sides: 4 }),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn disk_cells_are_lexicographic() {
        let p = build_grid_partition(3, DomainSpec::disk()).unwrap();
        assert_eq!(p.n_cells(), 9);
        let expected: Vec<[usize; 2]> =
            (1..=3).flat_map(|a| (1..=3).map(move |b| [a, b])).collect();
        assert_eq!(p.cell_grid, expected);
        // D' ≺ D'' iff the first differing grid coordinate is smaller
        for w in p.cell_grid.windows(2) {
            assert!(w[0] < w[1]);
        }
        let c = p.cells[1].centroid();
        assert!((c.x + 1.0 / 3.0).abs() < 1e-14 && c.y.abs() < 1e-14);
    }

    #[test]
    fn coverage_is_exact() {
        for spec in [DomainSpec::UnitSquare, DomainSpec::disk()] {
            for n in 1..=4 {
                let p = build_grid_partition(n, spec).unwrap();
                assert!(p.coverage_defect() < 1e-12, "{spec:?} n={n}");
            }
        }
    }

    #[test]
    fn chains_match_breadth_first_oracle() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        for t in 0..4 {
            let chain = chain_to(&p, t).unwrap();
            assert!(chain.len() <= 3);
            assert_eq!(chain.len(), brute_force_chain_len(&p, t));
        }
        // diagonal cell: (2,2) is index 3, reached through a side neighbour
        let chain = chain_to(&p, 3).unwrap();
        assert_eq!(chain.len(), 3);
        assert!(chain.indices[1] == 1 || chain.indices[1] == 2);

        let p3 = build_grid_partition(3, DomainSpec::UnitSquare).unwrap();
        assert_eq!(chain_to(&p3, 8).unwrap().len(), 5);
        let p4 = build_grid_partition(4, DomainSpec::UnitSquare).unwrap();
        for t in 0..16 {
            assert_eq!(chain_to(&p4, t).unwrap().len(), brute_force_chain_len(&p4, t));
        }
    }

    #[test]
    fn crossing_points_lie_on_both_cells() {
        let p = build_grid_partition(3, DomainSpec::UnitSquare).unwrap();
        for (&(a, b), pt) in &p.interface_points {
            assert!(p.cells[a].distance_to_boundary(pt) < 1e-12);
            assert!(p.cells[b].distance_to_boundary(pt) < 1e-12);
        }
        let chain = chain_to(&p, 8).unwrap();
        let r = 3.0 * p.params.r0 / 16.0;
        for (w, pk) in chain.indices.windows(2).zip(&chain.crossing_points) {
            // interior disk of radius 3 r0/16 touching P inside the earlier cell
            let earlier = &p.cells[w[0]];
            let c = earlier.centroid();
            let dir = (c - pk).normalize();
            let center = pk + dir * r;
            assert!(earlier.contains(&center));
            assert!(earlier.distance_to_boundary(&center) >= r - 1e-12);
        }
    }

    #[test]
    fn diagonal_neighbours_are_not_adjacent() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        assert!(!p.neighbors(0).contains(&3));
        assert_eq!(p.neighbors(0), &[1, 2]);
    }

    #[test]
    fn extension_touches_sigma_from_outside() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        let ext = p.extension.as_ref().unwrap();
        let r0 = p.params.r0;
        assert!((ext.area() - (4.0 * r0 / 3.0) * (2.0 * r0 / 3.0)).abs() < 1e-15);
        let c = ext.centroid();
        assert!(!p.domain.contains_strictly(&c, 0.0) && c.y < 0.0);
        // top edge of D0 lies on Σ
        let top: Vec<_> = ext.vertices.iter().filter(|v| v.y == 0.0).collect();
        assert_eq!(top.len(), 2);
        assert!(top.iter().all(|v| p.point_on_sigma(v, 1e-14)));
    }

    #[test]
    fn json_round_trip_preserves_order() {
        let p = build_grid_partition(3, DomainSpec::disk()).unwrap();
        let q = Partition::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn potential_distance_and_bound() {
        let a = Potential::from_values(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.5)]);
        let b = Potential::from_values(vec![C64::new(1.5, 0.0), C64::new(0.5, 0.5)]);
        assert_eq!(a.sup_distance(&b), 0.5);
        assert!(Potential::new(vec![C64::new(3.0, 0.0)], 2.0).is_err());
    }
}
