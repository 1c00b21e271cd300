//! Directed-link square lattice, turn structure and the medial lattice Γ.
//!
//! Conventions: node `(x, y)` is of type A when `x + y` is even and B otherwise.
//! Horizontal links point B→A, vertical links point A→B, so plaquettes with an
//! A node at their lower-left corner circulate clockwise and the others
//! counterclockwise. Links split into four classes:
//!
//! | class | links                         |
//! |-------|-------------------------------|
//! | 0     | horizontal, even row          |
//! | 1     | vertical, even column         |
//! | 2     | horizontal, odd row           |
//! | 3     | vertical, odd column          |
//!
//! and every turn advances the class by one.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type LinkId = usize;
pub type NodeId = usize;
pub type EdgeId = usize;
pub type CellId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    Torus,
    /// Periodic in x, open in y. Open edges carry dangling terminal links.
    CylinderX,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Orientation {
    pub fn vector(self) -> (i64, i64) {
        match self {
            Orientation::PlusX => (1, 0),
            Orientation::MinusX => (-1, 0),
            Orientation::PlusY => (0, 1),
            Orientation::MinusY => (0, -1),
        }
    }

    /// Direction after a left (counterclockwise) turn.
    pub fn left(self) -> Self {
        match self {
            Orientation::PlusX => Orientation::PlusY,
            Orientation::PlusY => Orientation::MinusX,
            Orientation::MinusX => Orientation::MinusY,
            Orientation::MinusY => Orientation::PlusX,
        }
    }

    pub fn right(self) -> Self {
        self.left().left().left()
    }

    pub fn reverse(self) -> Self {
        self.left().left()
    }

    pub fn is_horizontal(self) -> bool {
        matches!(self, Orientation::PlusX | Orientation::MinusX)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::PlusX => "+x",
            Orientation::MinusX => "-x",
            Orientation::PlusY => "+y",
            Orientation::MinusY => "-y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "+x" | "x" | "px" | "E" | "e" => Some(Orientation::PlusX),
            "-x" | "mx" | "W" | "w" => Some(Orientation::MinusX),
            "+y" | "y" | "py" | "N" | "n" => Some(Orientation::PlusY),
            "-y" | "my" | "S" | "s" => Some(Orientation::MinusY),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Interior,
    /// Enters from outside an open edge; no predecessor.
    Entrance,
    /// Leaves through an open edge; no successor.
    Exit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub id: LinkId,
    /// `None` for the outer end of a terminal link.
    pub tail: Option<NodeId>,
    pub head: Option<NodeId>,
    pub orientation: Orientation,
    pub class: u8,
    pub midpoint: (f64, f64),
    pub kind: LinkKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: usize,
    pub y: usize,
    pub sublattice: Sublattice,
    pub incoming: [LinkId; 2],
    pub outgoing: [LinkId; 2],
}

#[derive(Clone, Debug)]
pub struct NetworkGeometry {
    lx: usize,
    ly: usize,
    topology: Topology,
    links: Vec<LinkRecord>,
    nodes: Vec<NodeRecord>,
    /// (left, right) successor per link; `None` for exits.
    succ: Vec<Option<(LinkId, LinkId)>>,
}

pub fn sublattice(x: i64, y: i64) -> Sublattice {
    if (x + y).rem_euclid(2) == 0 {
        Sublattice::A
    } else {
        Sublattice::B
    }
}

impl NetworkGeometry {
    pub fn new(lx: usize, ly: usize, topology: Topology) -> Result<Self> {
        if lx < 4 || ly < 4 || !lx.is_multiple_of(2) || !ly.is_multiple_of(2) {
            return Err(Error::Dimension { lx, ly });
        }
        let n_nodes = lx * ly;
        let n_links = match topology {
            Topology::Torus => 2 * n_nodes,
            Topology::CylinderX => 2 * n_nodes + lx,
        };
        let mut geom = NetworkGeometry {
            lx,
            ly,
            topology,
            links: Vec::with_capacity(n_links),
            nodes: Vec::with_capacity(n_nodes),
            succ: vec![None; n_links],
        };
        for id in 0..n_links {
            geom.links.push(geom.make_link(id));
        }
        for y in 0..ly {
            for x in 0..lx {
                let sub = sublattice(x as i64, y as i64);
                let (incoming, outgoing) = match sub {
                    Sublattice::A => (
                        [
                            geom.incoming_link(x, y, Orientation::PlusX),
                            geom.incoming_link(x, y, Orientation::MinusX),
                        ],
                        [
                            geom.outgoing_link(x, y, Orientation::PlusY),
                            geom.outgoing_link(x, y, Orientation::MinusY),
                        ],
                    ),
                    Sublattice::B => (
                        [
                            geom.incoming_link(x, y, Orientation::PlusY),
                            geom.incoming_link(x, y, Orientation::MinusY),
                        ],
                        [
                            geom.outgoing_link(x, y, Orientation::PlusX),
                            geom.outgoing_link(x, y, Orientation::MinusX),
                        ],
                    ),
                };
                geom.nodes.push(NodeRecord {
                    id: y * lx + x,
                    x,
                    y,
                    sublattice: sub,
                    incoming,
                    outgoing,
                });
            }
        }
        for id in 0..n_links {
            let rec = &geom.links[id];
            if let Some(h) = rec.head {
                let node = &geom.nodes[h];
                let o = rec.orientation;
                let left = geom.outgoing_link(node.x, node.y, o.left());
                let right = geom.outgoing_link(node.x, node.y, o.right());
                geom.succ[id] = Some((left, right));
            }
        }
        Ok(geom)
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn links(&self) -> &[LinkRecord] {
        &self.links
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn link(&self, id: LinkId) -> &LinkRecord {
        &self.links[id]
    }

    pub fn node(&self, id: NodeId) -> &NodeRecord {
        &self.nodes[id]
    }

    pub fn node_id(&self, x: i64, y: i64) -> NodeId {
        let x = x.rem_euclid(self.lx as i64) as usize;
        let y = match self.topology {
            Topology::Torus => y.rem_euclid(self.ly as i64) as usize,
            Topology::CylinderX => {
                assert!(y >= 0 && (y as usize) < self.ly, "row {y} outside cylinder");
                y as usize
            }
        };
        y * self.lx + x
    }

    pub fn check_link(&self, id: LinkId) -> Result<()> {
        if id < self.links.len() {
            Ok(())
        } else {
            Err(Error::Index {
                what: "link",
                index: id,
                size: self.links.len(),
            })
        }
    }

    /// Left (`+`) and right (`-`) successors of `l`, or `None` for an exit link.
    pub fn successors(&self, l: LinkId) -> Option<(LinkId, LinkId)> {
        self.succ[l]
    }

    /// Horizontal link joining `(x, y)` and `(x + 1, y)`.
    pub fn horizontal_link(&self, x: i64, y: i64) -> LinkId {
        2 * self.node_id(x, y)
    }

    /// Vertical link joining `(x, y)` and `(x, y + 1)`. On a cylinder `y = -1`
    /// and `y = ly - 1` address the dangling terminal links.
    pub fn vertical_link(&self, x: i64, y: i64) -> LinkId {
        match self.topology {
            Topology::Torus => 2 * self.node_id(x, y) + 1,
            Topology::CylinderX => {
                let xm = x.rem_euclid(self.lx as i64) as usize;
                if y == -1 {
                    2 * self.lx * self.ly + xm
                } else {
                    2 * self.node_id(xm as i64, y) + 1
                }
            }
        }
    }

    /// The link leaving node `(x, y)` in direction `o` (must be an outgoing direction).
    pub fn outgoing_link(&self, x: usize, y: usize, o: Orientation) -> LinkId {
        let (x, y) = (x as i64, y as i64);
        match o {
            Orientation::PlusX => self.horizontal_link(x, y),
            Orientation::MinusX => self.horizontal_link(x - 1, y),
            Orientation::PlusY => self.vertical_link(x, y),
            Orientation::MinusY => self.vertical_link(x, y - 1),
        }
    }

    /// The link arriving at node `(x, y)` while moving in direction `o`.
    pub fn incoming_link(&self, x: usize, y: usize, o: Orientation) -> LinkId {
        self.outgoing_link(x, y, o.reverse())
    }

    /// The link with given tail node coordinates and orientation, if it exists.
    pub fn link_from(&self, x: i64, y: i64, o: Orientation) -> Result<LinkId> {
        if self.topology == Topology::CylinderX && (y < 0 || y >= self.ly as i64) {
            return Err(Error::Parameter(format!("node ({x},{y}) outside cylinder")));
        }
        let n = self.node(self.node_id(x, y));
        n.outgoing
            .iter()
            .copied()
            .find(|&l| self.links[l].orientation == o)
            .ok_or_else(|| {
                Error::Parameter(format!(
                    "no outgoing {} link at node ({x},{y})",
                    o.as_str()
                ))
            })
    }

    fn make_link(&self, id: LinkId) -> LinkRecord {
        let (lx, ly) = (self.lx, self.ly);
        let cyl = self.topology == Topology::CylinderX;
        if cyl && id >= 2 * lx * ly {
            // dangling link below row 0
            let x = id - 2 * lx * ly;
            let upper = sublattice(x as i64, 0);
            let (tail, head, orientation, kind) = match upper {
                Sublattice::A => (Some(x), None, Orientation::MinusY, LinkKind::Exit),
                Sublattice::B => (None, Some(x), Orientation::PlusY, LinkKind::Entrance),
            };
            return LinkRecord {
                id,
                tail,
                head,
                orientation,
                class: if x.is_multiple_of(2) { 1 } else { 3 },
                midpoint: (x as f64, -0.5),
                kind,
            };
        }
        let node = id / 2;
        let (x, y) = (node % lx, node / lx);
        let sub = sublattice(x as i64, y as i64);
        if id.is_multiple_of(2) {
            let other = y * lx + (x + 1) % lx;
            let (tail, head, orientation) = match sub {
                Sublattice::A => (other, node, Orientation::MinusX),
                Sublattice::B => (node, other, Orientation::PlusX),
            };
            LinkRecord {
                id,
                tail: Some(tail),
                head: Some(head),
                orientation,
                class: if y % 2 == 0 { 0 } else { 2 },
                midpoint: (x as f64 + 0.5, y as f64),
                kind: LinkKind::Interior,
            }
        } else {
            let class = if x % 2 == 0 { 1 } else { 3 };
            let midpoint = (x as f64, y as f64 + 0.5);
            let other = if y + 1 < ly {
                Some((y + 1) * lx + x)
            } else if cyl {
                None
            } else {
                Some(x)
            };
            let (tail, head, orientation) = match sub {
                Sublattice::A => (Some(node), other, Orientation::PlusY),
                Sublattice::B => (other, Some(node), Orientation::MinusY),
            };
            let kind = match (tail, head) {
                (None, _) => LinkKind::Entrance,
                (_, None) => LinkKind::Exit,
                _ => LinkKind::Interior,
            };
            LinkRecord {
                id,
                tail,
                head,
                orientation,
                class,
                midpoint,
                kind,
            }
        }
    }

    /// Links of class `l`, in increasing id order.
    pub fn class_links(&self, l: u8) -> Vec<LinkId> {
        self.links
            .iter()
            .filter(|r| r.class == l)
            .map(|r| r.id)
            .collect()
    }

    pub fn midpoint(&self, l: LinkId) -> Complex64 {
        let (x, y) = self.links[l].midpoint;
        Complex64::new(x, y)
    }

    /// Minimal-image complex separation `to - from`; only periodic directions wrap.
    pub fn displacement(&self, from: Complex64, to: Complex64) -> Complex64 {
        let wrap = |d: f64, l: f64| d - l * (d / l).round();
        let fold = |d: f64, l: f64| {
            let w = wrap(d, l);
            if w <= -l / 2.0 {
                w + l
            } else {
                w
            }
        };
        let dx = fold(to.re - from.re, self.lx as f64);
        let dy = match self.topology {
            Topology::Torus => fold(to.im - from.im, self.ly as f64),
            Topology::CylinderX => to.im - from.im,
        };
        Complex64::new(dx, dy)
    }

    pub fn distance(&self, a: Complex64, b: Complex64) -> f64 {
        self.displacement(a, b).norm()
    }

    /// Link permutation induced by a rotation by π/2 about the center of the
    /// clockwise plaquette with lower-left corner `(x0, y0)`; requires a square torus.
    pub fn rotation_permutation(&self, x0: i64, y0: i64) -> Result<Vec<LinkId>> {
        if self.topology != Topology::Torus || self.lx != self.ly {
            return Err(Error::Domain("rotation needs a square torus".into()));
        }
        if (x0 + y0).rem_euclid(2) != 0 {
            return Err(Error::Domain(format!(
                "plaquette ({x0},{y0}) does not circulate clockwise"
            )));
        }
        let rot = |x: i64, y: i64| (x0 + y0 + 1 - y, y0 - x0 + x);
        let mut perm = vec![0; self.links.len()];
        for rec in &self.links {
            let t = &self.nodes[rec.tail.unwrap()];
            let (rx, ry) = rot(t.x as i64, t.y as i64);
            let o = rec.orientation.left();
            perm[rec.id] = self.link_from(rx, ry, o)?;
        }
        Ok(perm)
    }
}

/// Free function form of [`NetworkGeometry::new`].
pub fn build_geometry(lx: usize, ly: usize, topology: Topology) -> Result<NetworkGeometry> {
    NetworkGeometry::new(lx, ly, topology)
}

/// The four links at a node partitioned by in/out and by side of a medial edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRoles {
    pub in_plus: LinkId,
    pub in_minus: LinkId,
    pub out_plus: LinkId,
    pub out_minus: LinkId,
}

impl LinkRoles {
    pub fn as_array(&self) -> [LinkId; 4] {
        [self.in_plus, self.in_minus, self.out_plus, self.out_minus]
    }
}

/// A 1-cell of Γ, one per primary node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedialEdge {
    pub id: EdgeId,
    pub node: NodeId,
    pub position: Complex64,
    /// Complex direction of traversal: `1+i` on A nodes, `1-i` on B nodes.
    pub direction: Complex64,
    pub tail: CellId,
    pub head: CellId,
    pub roles: LinkRoles,
    /// The dual edge `Re`, joining counterclockwise plaquettes.
    pub rotated_tail: CellId,
    pub rotated_head: CellId,
    pub rotated_roles: LinkRoles,
}

/// A plaquette of the primary lattice viewed as a cell of Γ or of its dual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plaquette {
    pub id: CellId,
    /// Lower-left corner node coordinates (row may be `-1` on a cylinder).
    pub corner: (i64, i64),
    pub center: Complex64,
    /// Signed medial edges of the boundary, counterclockwise; empty if the
    /// plaquette is cut by an open edge.
    pub boundary: Vec<(EdgeId, i32)>,
}

#[derive(Clone, Debug)]
pub struct MedialLattice {
    lx: usize,
    ly: usize,
    topology: Topology,
    row_offset: i64,
    /// 0-cells: clockwise plaquettes.
    pub zero_cells: Vec<Plaquette>,
    /// 2-cells: counterclockwise plaquettes.
    pub two_cells: Vec<Plaquette>,
    pub edges: Vec<MedialEdge>,
    /// Orientation of the Hodge rotation R; `+1` is counterclockwise.
    pub rotation: i8,
}

impl MedialLattice {
    pub fn new(geom: &NetworkGeometry) -> Self {
        let (lx, ly) = (geom.lx, geom.ly);
        let (row_offset, rows) = match geom.topology {
            Topology::Torus => (0i64, ly),
            Topology::CylinderX => (1i64, ly + 1),
        };
        let mut m = MedialLattice {
            lx,
            ly,
            topology: geom.topology,
            row_offset,
            zero_cells: Vec::new(),
            two_cells: Vec::new(),
            edges: Vec::with_capacity(geom.n_nodes()),
            rotation: 1,
        };
        for r in 0..rows {
            let y = r as i64 - row_offset;
            for x in 0..lx as i64 {
                let p = Plaquette {
                    id: 0,
                    corner: (x, y),
                    center: Complex64::new(x as f64 + 0.5, y as f64 + 0.5),
                    boundary: Vec::new(),
                };
                if sublattice(x, y) == Sublattice::A {
                    m.zero_cells.push(Plaquette {
                        id: m.zero_cells.len(),
                        ..p
                    });
                } else {
                    m.two_cells.push(Plaquette {
                        id: m.two_cells.len(),
                        ..p
                    });
                }
            }
        }
        for node in geom.nodes() {
            let (x, y) = (node.x as i64, node.y as i64);
            let left = geom.incoming_link(node.x, node.y, Orientation::PlusX);
            let right = geom.incoming_link(node.x, node.y, Orientation::MinusX);
            let up = geom.outgoing_link(node.x, node.y, Orientation::PlusY);
            let down = geom.outgoing_link(node.x, node.y, Orientation::MinusY);
            let from_above = geom.incoming_link(node.x, node.y, Orientation::MinusY);
            let from_below = geom.incoming_link(node.x, node.y, Orientation::PlusY);
            let to_right = geom.outgoing_link(node.x, node.y, Orientation::PlusX);
            let to_left = geom.outgoing_link(node.x, node.y, Orientation::MinusX);
            let edge = match node.sublattice {
                Sublattice::A => MedialEdge {
                    id: node.id,
                    node: node.id,
                    position: Complex64::new(x as f64, y as f64),
                    direction: Complex64::new(1.0, 1.0),
                    tail: m.cell_at(x - 1, y - 1),
                    head: m.cell_at(x, y),
                    roles: LinkRoles {
                        in_plus: left,
                        in_minus: right,
                        out_plus: up,
                        out_minus: down,
                    },
                    rotated_tail: m.cell_at(x, y - 1),
                    rotated_head: m.cell_at(x - 1, y),
                    rotated_roles: LinkRoles {
                        in_plus: left,
                        in_minus: right,
                        out_plus: down,
                        out_minus: up,
                    },
                },
                Sublattice::B => MedialEdge {
                    id: node.id,
                    node: node.id,
                    position: Complex64::new(x as f64, y as f64),
                    direction: Complex64::new(1.0, -1.0),
                    tail: m.cell_at(x - 1, y),
                    head: m.cell_at(x, y - 1),
                    roles: LinkRoles {
                        in_plus: from_above,
                        in_minus: from_below,
                        out_plus: to_right,
                        out_minus: to_left,
                    },
                    rotated_tail: m.cell_at(x - 1, y - 1),
                    rotated_head: m.cell_at(x, y),
                    rotated_roles: LinkRoles {
                        in_plus: from_above,
                        in_minus: from_below,
                        out_plus: to_left,
                        out_minus: to_right,
                    },
                },
            };
            m.edges.push(edge);
        }
        for c in 0..m.two_cells.len() {
            let (x, y) = m.two_cells[c].corner;
            let inside = |yy: i64| match m.topology {
                Topology::Torus => true,
                Topology::CylinderX => yy >= 0 && yy < ly as i64,
            };
            if inside(y) && inside(y + 1) {
                let e = |xx: i64, yy: i64| geom.node_id(xx, yy);
                m.two_cells[c].boundary = vec![
                    (e(x, y), 1),
                    (e(x + 1, y), 1),
                    (e(x + 1, y + 1), -1),
                    (e(x, y + 1), -1),
                ];
            }
        }
        for c in 0..m.zero_cells.len() {
            let (x, y) = m.zero_cells[c].corner;
            let inside = |yy: i64| match m.topology {
                Topology::Torus => true,
                Topology::CylinderX => yy >= 0 && yy < ly as i64,
            };
            if inside(y) && inside(y + 1) {
                // dual cell boundary, counterclockwise, in terms of rotated edges
                let e = |xx: i64, yy: i64| geom.node_id(xx, yy);
                m.zero_cells[c].boundary = vec![
                    (e(x, y), -1),
                    (e(x + 1, y), 1),
                    (e(x + 1, y + 1), 1),
                    (e(x, y + 1), -1),
                ];
            }
        }
        m
    }

    /// Index of the plaquette with lower-left corner `(x, y)` within its family.
    fn cell_at(&self, x: i64, y: i64) -> CellId {
        let lx = self.lx as i64;
        let xm = x.rem_euclid(lx);
        let r = match self.topology {
            Topology::Torus => y.rem_euclid(self.ly as i64),
            Topology::CylinderX => y + self.row_offset,
        };
        (r * lx + xm) as usize / 2
    }

    /// Clockwise-plaquette (0-cell) id from its lower-left corner.
    pub fn zero_cell_id(&self, x: i64, y: i64) -> Result<CellId> {
        if sublattice(x, y) != Sublattice::A {
            return Err(Error::Domain(format!("plaquette ({x},{y}) is not clockwise")));
        }
        Ok(self.cell_at(x, y))
    }

    /// Counterclockwise-plaquette (2-cell) id from its lower-left corner.
    pub fn two_cell_id(&self, x: i64, y: i64) -> Result<CellId> {
        if sublattice(x, y) != Sublattice::B {
            return Err(Error::Domain(format!(
                "plaquette ({x},{y}) is not counterclockwise"
            )));
        }
        Ok(self.cell_at(x, y))
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }
}

pub fn build_medial(geom: &NetworkGeometry) -> MedialLattice {
    MedialLattice::new(geom)
}

/// A 1-chain on Γ stored as signed edges in canonical (sorted) order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub edges: Vec<(EdgeId, i32)>,
}

impl Cycle {
    pub fn from_terms(terms: impl IntoIterator<Item = (EdgeId, i32)>) -> Self {
        let mut acc: BTreeMap<EdgeId, i32> = BTreeMap::new();
        for (e, s) in terms {
            *acc.entry(e).or_default() += s;
        }
        Cycle {
            edges: acc.into_iter().filter(|&(_, s)| s != 0).collect(),
        }
    }

    /// Net multiplicity of each 0-cell in the boundary of the chain.
    pub fn boundary(&self, medial: &MedialLattice) -> BTreeMap<CellId, i32> {
        let mut b: BTreeMap<CellId, i32> = BTreeMap::new();
        for &(e, s) in &self.edges {
            let edge = &medial.edges[e];
            *b.entry(edge.head).or_default() += s;
            *b.entry(edge.tail).or_default() -= s;
        }
        b.retain(|_, v| *v != 0);
        b
    }

    pub fn is_closed(&self, medial: &MedialLattice) -> bool {
        self.boundary(medial).is_empty()
    }

    /// The cycle through every node of row `y`, crossed upwards.
    pub fn row(geom: &NetworkGeometry, y: usize) -> Result<Self> {
        if y >= geom.ly() {
            return Err(Error::Index {
                what: "row",
                index: y,
                size: geom.ly(),
            });
        }
        Ok(Cycle::from_terms(
            (0..geom.lx()).map(|x| (geom.node_id(x as i64, y as i64), 1)),
        ))
    }

    /// Boundary of a set of 2-cells (counterclockwise plaquettes).
    pub fn boundary_of_cells(medial: &MedialLattice, cells: &[CellId]) -> Result<Self> {
        let mut terms = Vec::new();
        for &c in cells {
            let cell = medial.two_cells.get(c).ok_or(Error::Index {
                what: "2-cell",
                index: c,
                size: medial.two_cells.len(),
            })?;
            if cell.boundary.is_empty() {
                return Err(Error::Domain(format!("2-cell {c} is cut by an open edge")));
            }
            terms.extend(cell.boundary.iter().copied());
        }
        Ok(Cycle::from_terms(terms))
    }

    /// Square cycle: boundary of an `m x m` block of 2-cells whose corner cell
    /// has lower-left node `(x0, y0)`; the block extends along the diagonal
    /// directions `(1, 1)` and `(1, -1)`. Its length is `4m`.
    pub fn square(geom: &NetworkGeometry, medial: &MedialLattice, x0: i64, y0: i64, m: usize) -> Result<Self> {
        let mut cells = Vec::with_capacity(m * m);
        for a in 0..m as i64 {
            for b in 0..m as i64 {
                let x = x0 + a + b;
                let y = y0 + a - b;
                if geom.topology() == Topology::CylinderX && (y < 0 || y + 1 >= geom.ly() as i64) {
                    return Err(Error::Domain("square cycle leaves the cylinder".into()));
                }
                cells.push(medial.two_cell_id(x, y)?);
            }
        }
        Cycle::boundary_of_cells(medial, &cells)
    }

    /// This chain plus the boundary of one 2-cell (a homologous deformation).
    pub fn deformed(&self, medial: &MedialLattice, cell: CellId) -> Result<Self> {
        let extra = Cycle::boundary_of_cells(medial, &[cell])?;
        Ok(Cycle::from_terms(
            self.edges.iter().copied().chain(extra.edges),
        ))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}
