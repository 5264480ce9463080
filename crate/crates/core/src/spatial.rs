//! Point location through a binary tree of cell blocks.
//!
//! Internal nodes split their set of cell centroids at the median along
//! alternating axes. Every node also keeps the bounding box of the triangles
//! below it, so a query only visits blocks that can contain the point.

use crate::geometry::Point;
use crate::mesh::Mesh;

/// Barycentric slack accepted by the containment test.
pub const CONTAINMENT_TOL: f64 = 1e-12;
/// Largest barycentric defect accepted by the nearest-centroid fallback.
pub const FALLBACK_DEFECT: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
struct BBox {
    lo: Point,
    hi: Point,
}

impl BBox {
    fn empty() -> Self {
        BBox {
            lo: Point::new(f64::INFINITY, f64::INFINITY),
            hi: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: Point) {
        self.lo.x = self.lo.x.min(p.x);
        self.lo.y = self.lo.y.min(p.y);
        self.hi.x = self.hi.x.max(p.x);
        self.hi.y = self.hi.y.max(p.y);
    }

    fn inflate(&mut self, by: f64) {
        self.lo = self.lo - Point::new(by, by);
        self.hi = self.hi + Point::new(by, by);
    }

    fn contains(&self, p: Point) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        cells: Vec<usize>,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct CentroidTree {
    nodes: Vec<Node>,
    boxes: Vec<BBox>,
    capacity: usize,
    n_cells: usize,
    /// Bounding box of the whole mesh, used to reject exterior points early.
    domain: BBox,
}

fn coord(p: Point, axis: usize) -> f64 {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

impl CentroidTree {
    pub const DEFAULT_CAPACITY: usize = 8;

    pub fn build(mesh: &Mesh) -> Self {
        Self::with_capacity(mesh, Self::DEFAULT_CAPACITY)
    }

    pub fn with_capacity(mesh: &Mesh, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let (lo, hi) = mesh.bounds();
        let slack = 1e-9 * (hi - lo).norm().max(1.0);
        let mut domain = BBox { lo, hi };
        domain.inflate(slack);
        let mut tree = CentroidTree {
            nodes: Vec::new(),
            boxes: Vec::new(),
            capacity,
            n_cells: mesh.n_cells(),
            domain,
        };
        let mut ids: Vec<usize> = (0..mesh.n_cells()).collect();
        tree.build_node(mesh, &mut ids, 0, slack);
        tree
    }

    fn build_node(&mut self, mesh: &Mesh, ids: &mut [usize], depth: usize, slack: f64) -> usize {
        let mut bbox = BBox::empty();
        for &c in ids.iter() {
            for &v in &mesh.cells[c] {
                bbox.grow(mesh.vertices[v]);
            }
        }
        bbox.inflate(slack);
        let index = self.nodes.len();
        self.boxes.push(bbox);
        if ids.len() <= self.capacity {
            self.nodes.push(Node::Leaf {
                cells: ids.to_vec(),
            });
            return index;
        }
        self.nodes.push(Node::Leaf { cells: Vec::new() });
        let axis = depth % 2;
        let mid = ids.len() / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            coord(mesh.centroids[a], axis)
                .total_cmp(&coord(mesh.centroids[b], axis))
                .then(a.cmp(&b))
        });
        let value = coord(mesh.centroids[ids[mid]], axis);
        let (lhs, rhs) = ids.split_at_mut(mid);
        let left = self.build_node(mesh, lhs, depth + 1, slack);
        let right = self.build_node(mesh, rhs, depth + 1, slack);
        self.nodes[index] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        index
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Upper bound on [`CentroidTree::depth`] for this size and capacity.
    pub fn depth_bound(&self) -> usize {
        let ratio = self.n_cells as f64 / self.capacity as f64;
        let levels = if ratio <= 1.0 { 0 } else { ratio.log2().ceil() as usize };
        levels + 1
    }

    /// Cell ids of every leaf, in tree order.
    pub fn leaves(&self) -> Vec<&[usize]> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { cells } => Some(cells.as_slice()),
                Node::Split { .. } => None,
            })
            .collect()
    }

    /// Cell containing `p`, or `None` when `p` is outside the mesh.
    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<usize> {
        if !(p.x.is_finite() && p.y.is_finite()) || !self.domain.contains(p) {
            return None;
        }
        let mut stack = Vec::with_capacity(32);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            if !self.boxes[i].contains(p) {
                continue;
            }
            match &self.nodes[i] {
                Node::Leaf { cells } => {
                    for &c in cells {
                        let b = mesh.barycentric(c, p);
                        if b.iter().all(|&l| l >= -CONTAINMENT_TOL) {
                            return Some(c);
                        }
                    }
                }
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    // Near child on top of the stack.
                    if coord(p, *axis) < *value {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        let nearest = self.nearest_centroid(mesh, p)?;
        let defect = mesh
            .barycentric(nearest, p)
            .iter()
            .fold(0.0_f64, |d, &l| d.max(-l));
        (defect <= FALLBACK_DEFECT).then_some(nearest)
    }

    /// Cell whose centroid is closest to `p`.
    pub fn nearest_centroid(&self, mesh: &Mesh, p: Point) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        self.nearest_in(mesh, 0, p, &mut best);
        best.map(|(_, c)| c)
    }

    fn nearest_in(&self, mesh: &Mesh, i: usize, p: Point, best: &mut Option<(f64, usize)>) {
        match &self.nodes[i] {
            Node::Leaf { cells } => {
                for &c in cells {
                    let d = mesh.centroids[c] - p;
                    let d2 = d.dot(d);
                    let better = match best {
                        None => true,
                        Some((bd, bc)) => d2 < *bd || (d2 == *bd && c < *bc),
                    };
                    if better {
                        *best = Some((d2, c));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = coord(p, *axis) - value;
                let (near, far) = if diff < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.nearest_in(mesh, near, p, best);
                if best.is_none_or(|(bd, _)| diff * diff <= bd) {
                    self.nearest_in(mesh, far, p, best);
                }
            }
        }
    }
}

/// Cell containing `p`; `None` signals a point outside the domain.
pub fn locate_cell(mesh: &Mesh, tree: &CentroidTree, p: Point) -> Option<usize> {
    tree.locate(mesh, p)
}
