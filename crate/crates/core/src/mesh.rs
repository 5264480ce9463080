//! Triangular channel meshes: generation, uniform refinement, connectivity
//! and the plain-text mesh file.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{wall_height, CaseSpec, Point, WallProfile, X_MAX, X_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Inflow,
    Outflow,
    WallLower,
    WallUpper,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Inflow => "inflow",
            BoundaryTag::Outflow => "outflow",
            BoundaryTag::WallLower => "wall_lower",
            BoundaryTag::WallUpper => "wall_upper",
        }
    }

    pub fn is_wall(self) -> bool {
        matches!(self, BoundaryTag::WallLower | BoundaryTag::WallUpper)
    }
}

impl FromStr for BoundaryTag {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inflow" => Ok(BoundaryTag::Inflow),
            "outflow" => Ok(BoundaryTag::Outflow),
            "wall_lower" => Ok(BoundaryTag::WallLower),
            "wall_upper" => Ok(BoundaryTag::WallUpper),
            other => Err(format!("unknown boundary tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Coarse,
    Finer,
    Finest,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Coarse, Level::Finer, Level::Finest];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Coarse => "coarse",
            Level::Finer => "finer",
            Level::Finest => "finest",
        }
    }

    fn next(self) -> Level {
        match self {
            Level::Coarse => Level::Finer,
            Level::Finer | Level::Finest => Level::Finest,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "coarse" => Ok(Level::Coarse),
            "finer" => Ok(Level::Finer),
            "finest" => Ok(Level::Finest),
            other => Err(format!("unknown mesh level `{other}`")),
        }
    }
}

/// What lies across one edge of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Interior(usize),
    Boundary(BoundaryTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Lower and upper wall curves the mesh was generated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWalls {
    pub lower: WallProfile,
    pub upper: WallProfile,
}

impl ChannelWalls {
    pub fn of(case: &CaseSpec) -> Self {
        ChannelWalls {
            lower: case.profile_lower,
            upper: case.profile_upper,
        }
    }
}

/// A conforming triangulation with counterclockwise cells.
///
/// Edge `k` of a cell joins its vertices `k` and `(k + 1) % 3`; `faces[c][k]`
/// records what lies across that edge.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub level: Level,
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub faces: Vec<[Face; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Cells sharing at least one vertex with each cell (the cell excluded).
    pub vertex_neighbors: Vec<Vec<usize>>,
    pub centroids: Vec<Point>,
    pub areas: Vec<f64>,
    pub local_size: Vec<f64>,
    pub walls: Option<ChannelWalls>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds connectivity and geometric quantities from raw arrays.
    ///
    /// Every edge must be shared by two cells or appear in `boundary_edges`.
    pub fn from_parts(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        level: Level,
        walls: Option<ChannelWalls>,
    ) -> Result<Mesh> {
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        let mut areas = Vec::with_capacity(cells.len());
        let mut centroids = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references a missing vertex"
                )));
            }
            let [a, b, d] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, d);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} has non-positive signed area {area:e}"
                )));
            }
            areas.push(area);
            centroids.push(Point::new((a.x + b.x + d.x) / 3.0, (a.y + b.y + d.y) / 3.0));
        }

        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> =
            HashMap::with_capacity(cells.len() * 2);
        let mut faces = vec![[Face::Boundary(BoundaryTag::Inflow); 3]; cells.len()];
        let mut open = vec![[true; 3]; cells.len()];
        for (c, tri) in cells.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                match edge_owner.remove(&key) {
                    Some((other, ok)) => {
                        faces[c][k] = Face::Interior(other);
                        faces[other][ok] = Face::Interior(c);
                        open[c][k] = false;
                        open[other][ok] = false;
                    }
                    None => {
                        edge_owner.insert(key, (c, k));
                    }
                }
            }
        }
        for e in &boundary_edges {
            match edge_owner.remove(&edge_key(e.a, e.b)) {
                Some((c, k)) => {
                    faces[c][k] = Face::Boundary(e.tag);
                    open[c][k] = false;
                }
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary edge ({}, {}) is not a free cell edge",
                        e.a, e.b
                    )))
                }
            }
        }
        if let Some((&(a, b), _)) = edge_owner.iter().next() {
            return Err(Error::InvalidMesh(format!(
                "edge ({a}, {b}) has one cell and no boundary tag"
            )));
        }

        let mut vertex_cells = vec![Vec::new(); vertices.len()];
        for (c, tri) in cells.iter().enumerate() {
            for &v in tri {
                vertex_cells[v].push(c);
            }
        }
        let vertex_neighbors: Vec<Vec<usize>> = cells
            .iter()
            .enumerate()
            .map(|(c, tri)| {
                let mut n: Vec<usize> = tri
                    .iter()
                    .flat_map(|&v| vertex_cells[v].iter().copied())
                    .filter(|&o| o != c)
                    .collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect();

        let local_size = (0..cells.len())
            .map(|c| {
                let sum: f64 = areas[c].sqrt()
                    + vertex_neighbors[c]
                        .iter()
                        .map(|&o| areas[o].sqrt())
                        .sum::<f64>();
                sum / (1 + vertex_neighbors[c].len()) as f64
            })
            .collect();

        Ok(Mesh {
            level,
            vertices,
            cells,
            faces,
            boundary_edges,
            vertex_neighbors,
            centroids,
            areas,
            local_size,
            walls,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Edge neighbours of `cell` in local edge order.
    pub fn edge_neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.faces[cell].iter().filter_map(|f| match f {
            Face::Interior(o) => Some(*o),
            Face::Boundary(_) => None,
        })
    }

    /// Endpoints of local edge `k` of `cell`, in counterclockwise order.
    pub fn edge(&self, cell: usize, k: usize) -> (Point, Point) {
        let tri = self.cells[cell];
        (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]])
    }

    /// Outward normal of local edge `k` scaled by the edge length.
    pub fn scaled_normal(&self, cell: usize, k: usize) -> Point {
        let (a, b) = self.edge(cell, k);
        Point::new(b.y - a.y, a.x - b.x)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn is_boundary_cell(&self, cell: usize) -> bool {
        self.faces[cell]
            .iter()
            .any(|f| matches!(f, Face::Boundary(_)))
    }

    /// Barycentric coordinates of `p` in `cell` (signed-area fractions).
    pub fn barycentric(&self, cell: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.cells[cell].map(|v| self.vertices[v]);
        let total = self.areas[cell];
        [
            signed_area(p, b, c) / total,
            signed_area(a, p, c) / total,
            signed_area(a, b, p) / total,
        ]
    }

    /// Bounding box `(min, max)` of all vertices.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Checks orientation, closure of each cell's normals and adjacency symmetry.
    pub fn check_invariants(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            if !(self.areas[c] > 0.0) {
                return Err(Error::InvalidMesh(format!("cell {c} is not CCW")));
            }
            let mut sum = Point::default();
            let mut scale = 0.0_f64;
            for k in 0..3 {
                let n = self.scaled_normal(c, k);
                sum = sum + n;
                scale = scale.max(n.norm());
            }
            if sum.norm() > 1e-12 * scale {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} normals do not close: residual {:e}",
                    sum.norm()
                )));
            }
            for o in self.edge_neighbors(c) {
                if !self.edge_neighbors(o).any(|x| x == c) {
                    return Err(Error::InvalidMesh(format!(
                        "adjacency {c} -> {o} is not symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.vertices.len(),
            self.cells.len(),
            self.level
        );
        for v in &self.vertices {
            let _ = writeln!(out, "{} {}", v.x, v.y);
        }
        for c in &self.cells {
            let _ = writeln!(out, "{} {} {}", c[0], c[1], c[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(out, "{} {} {}", e.a, e.b, e.tag.as_str());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    /// Parses the text produced by [`Mesh::to_text`].
    pub fn parse(text: &str) -> std::result::Result<Mesh, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty mesh file")?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(format!("malformed header `{header}`"));
        }
        let nv: usize = h[0].parse().map_err(|_| "bad vertex count")?;
        let nc: usize = h[1].parse().map_err(|_| "bad cell count")?;
        let level: Level = h[2].parse()?;

        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let line = lines.next().ok_or(format!("missing vertex {i}"))?;
            let v = parse_fields::<f64>(line, 2).map_err(|e| format!("vertex {i}: {e}"))?;
            vertices.push(Point::new(v[0], v[1]));
        }
        let mut cells = Vec::with_capacity(nc);
        for i in 0..nc {
            let line = lines.next().ok_or(format!("missing cell {i}"))?;
            let c = parse_fields::<usize>(line, 3).map_err(|e| format!("cell {i}: {e}"))?;
            cells.push([c[0], c[1], c[2]]);
        }
        let mut boundary_edges = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(format!("malformed boundary edge `{line}`"));
            }
            boundary_edges.push(BoundaryEdge {
                a: f[0].parse().map_err(|_| format!("bad vertex in `{line}`"))?,
                b: f[1].parse().map_err(|_| format!("bad vertex in `{line}`"))?,
                tag: f[2].parse()?,
            });
        }
        Mesh::from_parts(vertices, cells, boundary_edges, level, None).map_err(|e| e.to_string())
    }
}

fn parse_fields<T: FromStr>(line: &str, n: usize) -> std::result::Result<Vec<T>, String> {
    let out: Vec<T> = line
        .split_whitespace()
        .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse `{s}`")))
        .collect::<std::result::Result<_, _>>()?;
    if out.len() != n {
        return Err(format!("expected {n} fields, found {}", out.len()));
    }
    Ok(out)
}

/// Boundary-fitted lattice of `nx × ny` quads, each split along its
/// lower-left to upper-right diagonal; `2·nx·ny` cells.
pub fn generate_channel_mesh(case: &CaseSpec, nx: usize, ny: usize) -> Result<Mesh> {
    if nx < 2 || ny < 1 {
        return Err(Error::MeshGeneration(format!(
            "need nx >= 2 and ny >= 1, got nx = {nx}, ny = {ny}"
        )));
    }
    let walls = ChannelWalls::of(case);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut bottoms = Vec::with_capacity(nx + 1);
    let mut tops = Vec::with_capacity(nx + 1);
    for i in 0..=nx {
        let x = if i == nx {
            X_MAX
        } else {
            X_MIN + (X_MAX - X_MIN) * i as f64 / nx as f64
        };
        let lo = wall_height(&walls.lower, x)?;
        let hi = wall_height(&walls.upper, x)?;
        if !(hi > lo) {
            return Err(Error::MeshGeneration(format!(
                "walls cross at x = {x}: lower {lo}, upper {hi}"
            )));
        }
        bottoms.push(lo);
        tops.push(hi);
    }
    for j in 0..=ny {
        let t = j as f64 / ny as f64;
        for i in 0..=nx {
            let x = if i == nx {
                X_MAX
            } else {
                X_MIN + (X_MAX - X_MIN) * i as f64 / nx as f64
            };
            let y = if j == ny {
                tops[i]
            } else {
                bottoms[i] + (tops[i] - bottoms[i]) * t
            };
            vertices.push(Point::new(x, y));
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            a: id(i, 0),
            b: id(i + 1, 0),
            tag: BoundaryTag::WallLower,
        });
        boundary_edges.push(BoundaryEdge {
            a: id(i + 1, ny),
            b: id(i, ny),
            tag: BoundaryTag::WallUpper,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            a: id(0, j + 1),
            b: id(0, j),
            tag: BoundaryTag::Inflow,
        });
        boundary_edges.push(BoundaryEdge {
            a: id(nx, j),
            b: id(nx, j + 1),
            tag: BoundaryTag::Outflow,
        });
    }
    Mesh::from_parts(vertices, cells, boundary_edges, Level::Coarse, Some(walls)).map_err(|e| {
        Error::MeshGeneration(format!("degenerate lattice: {e}"))
    })
}

/// Splits every triangle into four through its edge midpoints.
///
/// Midpoints of wall edges are moved onto the wall curve when the mesh knows
/// its walls.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let mut vertices = mesh.vertices.clone();
    let wall_tags: HashMap<(usize, usize), BoundaryTag> = mesh
        .boundary_edges
        .iter()
        .map(|e| (edge_key(e.a, e.b), e.tag))
        .collect();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.n_cells() * 2);
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> Result<usize> {
        let key = edge_key(a, b);
        if let Some(&m) = midpoint_of.get(&key) {
            return Ok(m);
        }
        let mut p = vertices[a].midpoint(vertices[b]);
        if let (Some(walls), Some(tag)) = (&mesh.walls, wall_tags.get(&key)) {
            match tag {
                BoundaryTag::WallLower => p.y = wall_height(&walls.lower, p.x)?,
                BoundaryTag::WallUpper => p.y = wall_height(&walls.upper, p.x)?,
                _ => {}
            }
        }
        vertices.push(p);
        let m = vertices.len() - 1;
        midpoint_of.insert(key, m);
        Ok(m)
    };

    let mut cells = Vec::with_capacity(mesh.n_cells() * 4);
    for &[v0, v1, v2] in &mesh.cells {
        let m01 = midpoint(v0, v1, &mut vertices)?;
        let m12 = midpoint(v1, v2, &mut vertices)?;
        let m20 = midpoint(v2, v0, &mut vertices)?;
        cells.push([v0, m01, m20]);
        cells.push([m01, v1, m12]);
        cells.push([m20, m12, v2]);
        cells.push([m01, m12, m20]);
    }
    let mut boundary_edges = Vec::with_capacity(mesh.boundary_edges.len() * 2);
    for e in &mesh.boundary_edges {
        let m = midpoint(e.a, e.b, &mut vertices)?;
        boundary_edges.push(BoundaryEdge { a: e.a, b: m, tag: e.tag });
        boundary_edges.push(BoundaryEdge { a: m, b: e.b, tag: e.tag });
    }
    Mesh::from_parts(vertices, cells, boundary_edges, mesh.level.next(), mesh.walls)
}

/// Local cell size: mean of `sqrt(area)` over the cell and every cell sharing
/// an edge or vertex with it.
pub fn local_cell_size(mesh: &Mesh, cell: usize) -> f64 {
    mesh.local_size[cell]
}

/// Mesh resolution of one pipeline: the coarse lattice and how many uniform
/// refinements produce the finer and finest levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshResolution {
    pub nx: usize,
    pub ny: usize,
    /// Refinements from coarse to finer.
    pub finer_refinements: usize,
    /// Refinements from coarse to finest.
    pub finest_refinements: usize,
}

impl MeshResolution {
    /// 200 / 800 / 12800 cells.
    pub const FULL: MeshResolution = MeshResolution {
        nx: 20,
        ny: 5,
        finer_refinements: 1,
        finest_refinements: 3,
    };

    /// 200 / 800 / 3200 cells.
    pub const DESK: MeshResolution = MeshResolution {
        nx: 20,
        ny: 5,
        finer_refinements: 1,
        finest_refinements: 2,
    };

    pub fn refinements(&self, level: Level) -> usize {
        match level {
            Level::Coarse => 0,
            Level::Finer => self.finer_refinements,
            Level::Finest => self.finest_refinements,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2
            || self.ny < 1
            || self.finer_refinements == 0
            || self.finest_refinements <= self.finer_refinements
        {
            return Err(Error::Config(format!(
                "mesh resolution {self:?} must satisfy nx >= 2, ny >= 1, 0 < finer < finest refinements"
            )));
        }
        Ok(())
    }
}

/// The coarse, finer and finest meshes of one case.
#[derive(Debug, Clone)]
pub struct MeshLevels {
    pub coarse: Mesh,
    pub finer: Mesh,
    pub finest: Mesh,
}

impl MeshLevels {
    pub fn build(case: &CaseSpec, res: &MeshResolution) -> Result<MeshLevels> {
        res.validate()?;
        let coarse = generate_channel_mesh(case, res.nx, res.ny)?;
        let mut finer = refine_uniform(&coarse)?;
        for _ in 1..res.finer_refinements {
            finer = refine_uniform(&finer)?;
        }
        finer.level = Level::Finer;
        let mut finest = finer.clone();
        for _ in res.finer_refinements..res.finest_refinements {
            finest = refine_uniform(&finest)?;
        }
        finest.level = Level::Finest;
        Ok(MeshLevels {
            coarse,
            finer,
            finest,
        })
    }

    pub fn get(&self, level: Level) -> &Mesh {
        match level {
            Level::Coarse => &self.coarse,
            Level::Finer => &self.finer,
            Level::Finest => &self.finest,
        }
    }
}
