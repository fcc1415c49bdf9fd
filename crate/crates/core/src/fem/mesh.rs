//! Partition-aligned triangulations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::geometry::{segment_distance, DomainSpec, Partition, Point, Region};
use crate::quadrature::{barycentric_coords, triangle_area, triangle_distance, Triangle};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeTag {
    Interior,
    /// Boundary node whose incident boundary edges all lie on `Σ`.
    Sigma,
    Boundary,
}

#[derive(Debug)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub tags: Vec<NodeTag>,
    pub sigma: Vec<[Point; 2]>,
    /// Maximum edge length.
    pub h: f64,
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            nodes: self.nodes.clone(),
            triangles: self.triangles.clone(),
            regions: self.regions.clone(),
            tags: self.tags.clone(),
            sigma: self.sigma.clone(),
            h: self.h,
            locator: OnceLock::new(),
        }
    }
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.triangles == other.triangles
            && self.regions == other.regions
            && self.tags == other.tags
            && self.sigma == other.sigma
    }
}

/// Refinement request: edges of triangles meeting the disk are bisected
/// until no longer than `h_target / 8`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineDisk {
    pub center: Point,
    pub radius: f64,
}

impl RefineDisk {
    pub fn new(center: Point, radius: f64) -> Self {
        RefineDisk { center, radius }
    }
}

pub fn make_mesh(partition: &Partition, h_target: f64, refine_near: &[RefineDisk]) -> Result<Mesh> {
    if !(h_target > 0.0) || !h_target.is_finite() {
        return Err(Error::InvalidInput(format!("h_target must be positive, got {h_target}")));
    }
    let mut builder = Builder::default();
    match partition.spec {
        DomainSpec::UnitSquare => square_grid(partition, h_target, &mut builder)?,
        DomainSpec::Disk { sides } => disk_grid(partition, sides, h_target, &mut builder)?,
    }
    let Builder { nodes, triangles, regions, .. } = builder;
    let (mut nodes, mut triangles, mut regions) = (nodes, triangles, regions);
    for (t, r) in triangles.iter().zip(&regions) {
        let tri = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
        if triangle_area(&tri) <= 1e-14 {
            return Err(Error::Mesh(format!("degenerate triangle in region {r:?}")));
        }
    }
    if !refine_near.is_empty() {
        let target = h_target / 8.0;
        refine(&mut nodes, &mut triangles, &mut regions, |tri: &Triangle| {
            refine_near.iter().any(|d| triangle_distance(tri, &d.center) < d.radius)
                && longest_edge_len(tri) > target
        });
    }
    Ok(Mesh::from_parts(nodes, triangles, regions, partition.sigma.clone()))
}

fn longest_edge_len(t: &Triangle) -> f64 {
    crate::quadrature::triangle_diameter(t)
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Point>,
    index: HashMap<(i64, i64), usize>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
}

impl Builder {
    fn node(&mut self, p: Point) -> usize {
        let key = ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.nodes.push(p);
        self.index.insert(key, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Quad `a b c d` (counter-clockwise) split along `a–c` or `b–d`.
    fn quad(&mut self, q: [Point; 4], diag_ac: bool, region: Region) {
        let ids = q.map(|p| self.node(p));
        let tris = if diag_ac {
            [[ids[0], ids[1], ids[2]], [ids[0], ids[2], ids[3]]]
        } else {
            [[ids[0], ids[1], ids[3]], [ids[1], ids[2], ids[3]]]
        };
        for t in tris {
            self.triangles.push(orient(&self.nodes, t));
            self.regions.push(region);
        }
    }
}

fn orient(nodes: &[Point], t: [usize; 3]) -> [usize; 3] {
    let (a, b, c) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    if (b - a).perp(&(c - a)) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn breakpoints(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

fn subdivide_axis(breaks: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let k = (((w[1] - w[0]) / h) - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=k {
            out.push(if i == k { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / k as f64 });
        }
    }
    out
}

fn bbox(points: &[Point]) -> [f64; 4] {
    points.iter().fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |b, p| {
        [b[0].min(p.x), b[1].min(p.y), b[2].max(p.x), b[3].max(p.y)]
    })
}

/// Tensor grid over `xs × ys`, diagonals mirrored about `(cx, cy)`; quads whose
/// centre lies outside every region are dropped.
fn tensor_block(b: &mut Builder, partition: &Partition, xs: &[f64], ys: &[f64], cx: f64, cy: f64) {
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[j], ys[j + 1]);
            let mid = Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
            let Some(region) = partition.locate(&mid) else { continue };
            let diag = (mid.x - cx) * (mid.y - cy) >= 0.0;
            b.quad(
                [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)],
                diag,
                region,
            );
        }
    }
}

fn square_grid(partition: &Partition, h: f64, b: &mut Builder) -> Result<()> {
    let mut xb = Vec::new();
    let mut yb = Vec::new();
    for c in &partition.cells {
        let bb = bbox(&c.vertices);
        xb.extend([bb[0], bb[2]]);
        yb.extend([bb[1], bb[3]]);
    }
    let ext_bb = partition.extension.as_ref().map(|e| bbox(&e.vertices));
    if let Some(eb) = ext_bb {
        xb.extend([eb[0], eb[2]]);
    }
    let dom = bbox(&partition.domain.vertices);
    let (cx, cy) = (0.5 * (dom[0] + dom[2]), 0.5 * (dom[1] + dom[3]));
    let xs = subdivide_axis(&breakpoints(xb), h);
    let ys = subdivide_axis(&breakpoints(yb), h);
    tensor_block(b, partition, &xs, &ys, cx, cy);
    if let Some(eb) = ext_bb {
        let xe: Vec<f64> = xs.iter().copied().filter(|&x| x >= eb[0] - 1e-12 && x <= eb[2] + 1e-12).collect();
        let ye = subdivide_axis(&[eb[1], eb[3]], h);
        tensor_block(b, partition, &xe, &ye, cx, cy);
    }
    Ok(())
}

/// Splits `m` segments among `n` cells, symmetric about the middle.
fn symmetric_counts(m: usize, n: usize) -> Vec<usize> {
    let mut counts = vec![m / n; n];
    let mut r = m % n;
    if r % 2 == 1 {
        counts[n / 2] += 1;
        r -= 1;
    }
    for i in 0..r / 2 {
        counts[i] += 1;
        counts[n - 1 - i] += 1;
    }
    counts
}

fn disk_grid(partition: &Partition, sides: usize, h: f64, b: &mut Builder) -> Result<()> {
    if sides % 8 != 0 {
        return Err(Error::Mesh(format!("disk meshing needs a multiple of 8 sides, got {sides}")));
    }
    let n = partition.side_cells;
    let q4 = sides / 4;
    let need = (1.0 / h).ceil().max(n as f64) as usize;
    let m = q4 * need.div_ceil(q4);
    let counts = symmetric_counts(m, n);
    let mut ts = vec![-0.5];
    for (c, &k) in counts.iter().enumerate() {
        let (a, e) = (-0.5 + c as f64 / n as f64, -0.5 + (c + 1) as f64 / n as f64);
        for i in 1..=k {
            ts.push(if i == k { e } else { a + (e - a) * i as f64 / k as f64 });
        }
    }
    tensor_block(b, partition, &ts, &ts, 0.0, 0.0);

    let per_edge = m / q4;
    let vertex = |k: i64| {
        let t = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
        Point::new(t.cos(), t.sin())
    };
    let outer: Vec<Point> = (0..=m)
        .map(|i| {
            let e = (i / per_edge) as i64;
            let f = (i % per_edge) as f64 / per_edge as f64;
            let k0 = -(q4 as i64) / 2 + e;
            if f == 0.0 {
                vertex(k0)
            } else {
                Point::from(vertex(k0).coords * (1.0 - f) + vertex(k0 + 1).coords * f)
            }
        })
        .collect();
    let layers = (0.5 / h - 1e-9).ceil().max(1.0) as usize;
    for quarter in 0..4 {
        let rot = |p: Point| -> Point {
            let mut p = p;
            for _ in 0..quarter {
                p = Point::new(-p.y, p.x);
            }
            p
        };
        let at = |i: usize, l: usize| -> Point {
            let inner = Point::new(0.5, ts[i]);
            let s = l as f64 / layers as f64;
            let p = if l == layers { outer[i] } else { Point::from(inner.coords * (1.0 - s) + outer[i].coords * s) };
            rot(p)
        };
        for i in 0..m {
            let diag = 0.5 * (ts[i] + ts[i + 1]) >= 0.0;
            for l in 0..layers {
                b.quad([at(i, l), at(i, l + 1), at(i + 1, l + 1), at(i + 1, l)], !diag, Region::Background);
            }
        }
    }
    Ok(())
}

/// Conforming longest-edge bisection of every triangle for which `mark` holds,
/// repeated until no triangle is marked.
fn refine<F: Fn(&Triangle) -> bool>(
    nodes: &mut Vec<Point>,
    triangles: &mut Vec<[usize; 3]>,
    regions: &mut Vec<Region>,
    mark: F,
) {
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let longest = |nodes: &[Point], t: &[usize; 3]| -> (usize, usize) {
        let mut best = (0usize, f64::NEG_INFINITY, (0, 0));
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let l = (nodes[a] - nodes[b]).norm_squared();
            let kk = key(a, b);
            if l > best.1 * (1.0 + 1e-12) || ((l - best.1).abs() <= best.1 * 1e-12 && kk < best.2) {
                best = (k, l, kk);
            }
        }
        best.2
    };
    loop {
        let mut split: BTreeSet<(usize, usize)> = BTreeSet::new();
        for t in triangles.iter() {
            let tri = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
            if mark(&tri) {
                split.insert(longest(nodes, t));
            }
        }
        if split.is_empty() {
            return;
        }
        loop {
            let mut added = false;
            for t in triangles.iter() {
                let has = (0..3).any(|k| split.contains(&key(t[k], t[(k + 1) % 3])));
                if has {
                    let l = longest(nodes, t);
                    if split.insert(l) {
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &(a, b) in &split {
            nodes.push(nalgebra::center(&nodes[a], &nodes[b]));
            mid.insert((a, b), nodes.len() - 1);
        }
        let mut new_t = Vec::with_capacity(triangles.len() * 2);
        let mut new_r = Vec::with_capacity(triangles.len() * 2);
        for (t, &r) in triangles.iter().zip(regions.iter()) {
            let (la, lb) = longest(nodes, t);
            let Some(&m) = mid.get(&(la, lb)) else {
                new_t.push(*t);
                new_r.push(r);
                continue;
            };
            // rotate so the longest edge is t[0]–t[1]
            let k = (0..3).find(|&k| key(t[k], t[(k + 1) % 3]) == (la, lb)).unwrap();
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            // children (a, m, c) and (m, b, c), each possibly split once more
            match mid.get(&key(a, c)) {
                Some(&mac) => {
                    new_t.extend([[a, m, mac], [mac, m, c]]);
                    new_r.extend([r, r]);
                }
                None => {
                    new_t.push([a, m, c]);
                    new_r.push(r);
                }
            }
            match mid.get(&key(b, c)) {
                Some(&mbc) => {
                    new_t.extend([[m, b, mbc], [m, mbc, c]]);
                    new_r.extend([r, r]);
                }
                None => {
                    new_t.push([m, b, c]);
                    new_r.push(r);
                }
            }
        }
        *triangles = new_t;
        *regions = new_r;
    }
}

impl Mesh {
    pub fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, regions: Vec<Region>, sigma: Vec<[Point; 2]>) -> Mesh {
        let triangles: Vec<[usize; 3]> = triangles.into_iter().map(|t| orient(&nodes, t)).collect();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        let mut h: f64 = 0.0;
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
                h = h.max((nodes[a] - nodes[b]).norm());
            }
        }
        let on_sigma = |p: &Point| sigma.iter().any(|[s0, s1]| segment_distance(p, s0, s1) <= 1e-10);
        // 0 = interior, 1 = only Σ boundary edges so far, 2 = touches other boundary
        let mut state = vec![0u8; nodes.len()];
        let mut boundary_edges: Vec<(usize, usize)> =
            edge_count.iter().filter(|(_, &c)| c == 1).map(|(&e, _)| e).collect();
        boundary_edges.sort_unstable();
        for (a, b) in boundary_edges {
            let sig = on_sigma(&nodes[a]) && on_sigma(&nodes[b]) && on_sigma(&nalgebra::center(&nodes[a], &nodes[b]));
            for v in [a, b] {
                state[v] = if sig { state[v].max(1) } else { 2 };
            }
        }
        let tags = state
            .into_iter()
            .map(|s| match s {
                0 => NodeTag::Interior,
                1 => NodeTag::Sigma,
                _ => NodeTag::Boundary,
            })
            .collect();
        Mesh { nodes, triangles, regions, tags, sigma, h, locator: OnceLock::new() }
    }

    /// Edges belonging to exactly one triangle, as sorted node pairs.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut edges: Vec<(usize, usize)> = count.into_iter().filter(|&(_, c)| c == 1).map(|(e, _)| e).collect();
        edges.sort_unstable();
        edges
    }

    /// Distance from `p` to the mesh boundary.
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        self.boundary_edges()
            .iter()
            .map(|&(a, b)| segment_distance(p, &self.nodes[a], &self.nodes[b]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary edges lying on `Σ`, as sorted node pairs.
    pub fn sigma_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let on_sigma = |p: &Point| self.sigma.iter().any(|[s0, s1]| segment_distance(p, s0, s1) <= 1e-10);
        let mut edges: Vec<(usize, usize)> = count
            .into_iter()
            .filter(|&((a, b), c)| {
                c == 1
                    && on_sigma(&self.nodes[a])
                    && on_sigma(&self.nodes[b])
                    && on_sigma(&nalgebra::center(&self.nodes[a], &self.nodes[b]))
            })
            .map(|(e, _)| e)
            .collect();
        edges.sort_unstable();
        edges
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, t: usize) -> Triangle {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.tags[node] != NodeTag::Interior
    }

    pub fn sigma_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.tags[i] == NodeTag::Sigma).collect()
    }

    pub fn has_extension(&self) -> bool {
        self.regions.contains(&Region::Extension)
    }

    /// The mesh restricted to `Ω` (extension triangles removed), with node
    /// numbering in the original relative order.
    pub fn domain_submesh(&self) -> Mesh {
        if !self.has_extension() {
            return self.clone();
        }
        self.restrict(|r| r != Region::Extension)
    }

    /// Submesh of the triangles whose region satisfies `keep`.
    pub fn restrict<F: Fn(Region) -> bool>(&self, keep: F) -> Mesh {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut used = vec![false; self.nodes.len()];
        let kept: Vec<usize> = (0..self.triangles.len()).filter(|&t| keep(self.regions[t])).collect();
        for &t in &kept {
            for &v in &self.triangles[t] {
                used[v] = true;
            }
        }
        let mut nodes = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                map[i] = nodes.len();
                nodes.push(self.nodes[i]);
            }
        }
        let triangles = kept.iter().map(|&t| self.triangles[t].map(|v| map[v])).collect();
        let regions = kept.iter().map(|&t| self.regions[t]).collect();
        Mesh::from_parts(nodes, triangles, regions, self.sigma.clone())
    }

    /// Node index of the point `p` if the mesh has a node there.
    pub fn find_node(&self, p: &Point, tol: f64) -> Option<usize> {
        self.nodes.iter().position(|n| (n - p).norm() <= tol)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| triangle_area(&self.triangle(t))).sum()
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: &Point) -> Option<(usize, [f64; 3])> {
        self.locator.get_or_init(|| Locator::new(self)).locate(self, p)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mesh v1");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (p, t) in self.nodes.iter().zip(&self.tags) {
            let tag = match t {
                NodeTag::Interior => "interior",
                NodeTag::Sigma => "sigma",
                NodeTag::Boundary => "boundary",
            };
            let _ = writeln!(s, "{:?} {:?} {tag}", p.x, p.y);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            let region = match r {
                Region::Cell(j) => format!("cell {j}"),
                Region::Background => "background".to_string(),
                Region::Extension => "extension".to_string(),
            };
            let _ = writeln!(s, "{} {} {} {region}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "sigma {}", self.sigma.len());
        for [a, b] in &self.sigma {
            let _ = writeln!(s, "{:?} {:?} {:?} {:?}", a.x, a.y, b.x, b.y);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let bad = |msg: &str| Error::Parse(format!("mesh text: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        if lines.next() != Some("mesh v1") {
            return Err(bad("missing header"));
        }
        let count = |name: &str, line: Option<&str>| -> Result<usize> {
            let line = line.ok_or_else(|| bad("unexpected end"))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(bad(&format!("expected section '{name}'")));
            }
            it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad count"))
        };
        let num = |s: Option<&str>| -> Result<f64> { s.and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad number")) };
        let int = |s: Option<&str>| -> Result<usize> { s.and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad index")) };

        let nn = count("nodes", lines.next())?;
        let mut nodes = Vec::with_capacity(nn);
        let mut tags = Vec::with_capacity(nn);
        for _ in 0..nn {
            let mut it = lines.next().ok_or_else(|| bad("truncated nodes"))?.split_whitespace();
            nodes.push(Point::new(num(it.next())?, num(it.next())?));
            tags.push(match it.next() {
                Some("interior") => NodeTag::Interior,
                Some("sigma") => NodeTag::Sigma,
                Some("boundary") => NodeTag::Boundary,
                _ => return Err(bad("bad node tag")),
            });
        }
        let nt = count("triangles", lines.next())?;
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let mut it = lines.next().ok_or_else(|| bad("truncated triangles"))?.split_whitespace();
            let t = [int(it.next())?, int(it.next())?, int(it.next())?];
            if t.iter().any(|&v| v >= nn) {
                return Err(bad("triangle references a missing node"));
            }
            triangles.push(t);
            regions.push(match it.next() {
                Some("cell") => Region::Cell(int(it.next())?),
                Some("background") => Region::Background,
                Some("extension") => Region::Extension,
                _ => return Err(bad("bad region")),
            });
        }
        let ns = count("sigma", lines.next())?;
        let mut sigma = Vec::with_capacity(ns);
        for _ in 0..ns {
            let mut it = lines.next().ok_or_else(|| bad("truncated sigma"))?.split_whitespace();
            let a = Point::new(num(it.next())?, num(it.next())?);
            let b = Point::new(num(it.next())?, num(it.next())?);
            sigma.push([a, b]);
        }
        let mut mesh = Mesh::from_parts(nodes, triangles, regions, sigma);
        mesh.tags = tags;
        Ok(mesh)
    }
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Debug)]
struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Locator {
        let bb = bbox(&mesh.nodes);
        let side = ((mesh.triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = ((bb[2] - bb[0]).max(bb[3] - bb[1]) / side as f64).max(1e-12);
        let nx = ((bb[2] - bb[0]) / cell).floor() as usize + 1;
        let ny = ((bb[3] - bb[1]) / cell).floor() as usize + 1;
        let origin = Point::new(bb[0], bb[1]);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let tb = bbox(&tri.map(|v| mesh.nodes[v]));
            let i0 = ((tb[0] - origin.x) / cell).floor().max(0.0) as usize;
            let i1 = (((tb[2] - origin.x) / cell).floor() as usize).min(nx - 1);
            let j0 = ((tb[1] - origin.y) / cell).floor().max(0.0) as usize;
            let j1 = (((tb[3] - origin.y) / cell).floor() as usize).min(ny - 1);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[i * ny + j].push(t);
                }
            }
        }
        Locator { origin, cell, nx, ny, buckets }
    }

    fn locate(&self, mesh: &Mesh, p: &Point) -> Option<(usize, [f64; 3])> {
        let fi = ((p.x - self.origin.x) / self.cell).floor();
        let fj = ((p.y - self.origin.y) / self.cell).floor();
        if fi < -1.0 || fj < -1.0 || fi > self.nx as f64 || fj > self.ny as f64 {
            return None;
        }
        let i = (fi.max(0.0) as usize).min(self.nx - 1);
        let j = (fj.max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[i * self.ny + j] {
            let l = barycentric_coords(&mesh.triangle(t), p);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((t, l));
            }
            if worst > -1e-10 && best.map_or(true, |b| worst > b.2) {
                best = Some((t, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid_partition;

    #[test]
    fn coarse_square_mesh() {
        let p = build_grid_partition(1, DomainSpec::UnitSquare).unwrap();
        let m = make_mesh(&p, 0.5, &[]).unwrap().domain_submesh();
        assert!(m.n_triangles() >= 8);
        assert!((m.area() - 1.0).abs() < 1e-14);
        assert!(m.regions.iter().all(|r| *r == Region::Cell(0)));
    }

    #[test]
    fn rejects_bad_h() {
        let p = build_grid_partition(1, DomainSpec::UnitSquare).unwrap();
        assert!(make_mesh(&p, 0.0, &[]).is_err());
        assert!(make_mesh(&p, f64::NAN, &[]).is_err());
    }

    #[test]
    fn alignment_and_areas() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        let m = make_mesh(&p, 0.1, &[]).unwrap();
        let mut area = [0.0; 4];
        let mut ext = 0.0;
        for t in 0..m.n_triangles() {
            let tri = m.triangle(t);
            let c = crate::quadrature::barycentric_point(&tri, &[1.0 / 3.0; 3]);
            let hits: Vec<usize> = (0..4).filter(|&j| p.cells[j].contains_strictly(&c, 0.0)).collect();
            match m.regions[t] {
                Region::Cell(j) => {
                    assert_eq!(hits, vec![j]);
                    area[j] += triangle_area(&tri);
                }
                Region::Extension => {
                    assert!(hits.is_empty());
                    ext += triangle_area(&tri);
                }
                Region::Background => panic!("no background on the square"),
            }
        }
        for a in area {
            assert!((a - 0.25).abs() < 1e-13);
        }
        assert!((ext - p.extension.as_ref().unwrap().area()).abs() < 1e-13);
    }

    #[test]
    fn sigma_tags_on_square() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        let m = make_mesh(&p, 0.1, &[]).unwrap().domain_submesh();
        let sig = m.sigma_nodes();
        let bottom = m.nodes.iter().filter(|x| x.y == 0.0).count();
        assert_eq!(sig.len(), bottom - 2);
        for &i in &sig {
            let x = m.nodes[i];
            assert!(x.y == 0.0 && x.x > 0.0 && x.x < 1.0);
        }
        let corner = m.find_node(&Point::new(0.0, 0.0), 1e-14).unwrap();
        assert_eq!(m.tags[corner], NodeTag::Boundary);
    }

    #[test]
    fn disk_mesh_is_conforming_and_covers() {
        let p = build_grid_partition(3, DomainSpec::disk()).unwrap();
        let m = make_mesh(&p, 0.05, &[]).unwrap();
        assert!((m.area() - p.domain.area()).abs() < 1e-12);
        // conforming: every interior edge shared by exactly two triangles,
        // boundary edges lie on the polygon
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &m.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for (&(a, b), &c) in &count {
            assert!(c <= 2);
            if c == 1 {
                let mid = nalgebra::center(&m.nodes[a], &m.nodes[b]);
                assert!(p.domain.distance_to_boundary(&mid) < 1e-12);
            }
        }
        let n_sigma = m.sigma_nodes().len();
        assert_eq!(n_sigma, m.tags.iter().filter(|t| **t != NodeTag::Interior).count());
        assert_eq!(n_sigma % 128, 0);
        for j in 0..9 {
            let a: f64 = (0..m.n_triangles()).filter(|&t| m.regions[t] == Region::Cell(j)).map(|t| triangle_area(&m.triangle(t))).sum();
            assert!((a - 1.0 / 9.0).abs() < 1e-13);
        }
    }

    #[test]
    fn local_refinement_reaches_target() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        let h = 0.1;
        let disk = RefineDisk::new(Point::new(0.5, 0.5), 0.05);
        let m = make_mesh(&p, h, &[disk]).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in m.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
                let (pa, pb) = (m.nodes[a], m.nodes[b]);
                if (pa - disk.center).norm() < disk.radius && (pb - disk.center).norm() < disk.radius {
                    assert!((pa - pb).norm() <= h / 8.0 + 1e-15, "edge of triangle {t} too long");
                }
            }
        }
        // no hanging nodes: boundary edges only on ∂Ω₀
        for (&(a, b), &c) in &count {
            if c == 1 {
                let mid = nalgebra::center(&m.nodes[a], &m.nodes[b]);
                let on_outer = p.domain.distance_to_boundary(&mid) < 1e-12
                    || p.extension.as_ref().unwrap().distance_to_boundary(&mid) < 1e-12;
                assert!(on_outer);
            }
        }
        let total = p.domain.area() + p.extension.as_ref().unwrap().area();
        assert!((m.area() - total).abs() < 1e-12);
    }

    #[test]
    fn locate_points() {
        let p = build_grid_partition(2, DomainSpec::disk()).unwrap();
        let m = make_mesh(&p, 0.1, &[]).unwrap();
        for q in [Point::new(0.1, 0.2), Point::new(-0.9, 0.0), Point::new(0.0, 0.0)] {
            let (t, l) = m.locate(&q).unwrap();
            let back = crate::quadrature::barycentric_point(&m.triangle(t), &l);
            assert!((back - q).norm() < 1e-12);
        }
        assert!(m.locate(&Point::new(2.0, 0.0)).is_none());
    }

    #[test]
    fn text_round_trip() {
        let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
        let m = make_mesh(&p, 0.25, &[]).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
        assert!(Mesh::from_text("mesh v1\nnodes 1\n0 0 sigma\ntriangles 1\n0 1 2 cell 0\nsigma 0\n").is_err());
    }

    #[test]
    fn symmetric_split() {
        assert_eq!(symmetric_counts(32, 3), vec![11, 10, 11]);
        assert_eq!(symmetric_counts(32, 5), vec![7, 6, 6, 6, 7]);
        assert_eq!(symmetric_counts(64, 2), vec![32, 32]);
        assert_eq!(symmetric_counts(33, 3), vec![11, 11, 11]);
    }
}
