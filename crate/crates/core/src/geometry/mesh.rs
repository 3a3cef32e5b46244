use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::element::{self, HEX_FACES, QUAD_EDGES};

use super::shapes::CavernSpec;

pub const MESH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Dirichlet,
    PeriodicLo,
    PeriodicHi,
    Truncation,
}

impl BoundaryTag {
    fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::PeriodicLo => "periodic_lo",
            BoundaryTag::PeriodicHi => "periodic_hi",
            BoundaryTag::Truncation => "truncation",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dirichlet" => BoundaryTag::Dirichlet,
            "periodic_lo" => BoundaryTag::PeriodicLo,
            "periodic_hi" => BoundaryTag::PeriodicHi,
            "truncation" => BoundaryTag::Truncation,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Quad4,
    Hex8,
}

impl ElementKind {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementKind::Quad4 => 4,
            ElementKind::Hex8 => 8,
        }
    }

    pub fn nodes_per_facet(self) -> usize {
        match self {
            ElementKind::Quad4 => 2,
            ElementKind::Hex8 => 4,
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            ElementKind::Quad4 => 2,
            ElementKind::Hex8 => 3,
        }
    }
}

/// A conforming quadrilateral (2D) or hexahedral (3D) mesh with tagged
/// boundary facets. 2D meshes store `z = 0` in the third coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub kind: ElementKind,
    pub nodes: Vec<[f64; 3]>,
    connectivity: Vec<usize>,
    facet_nodes: Vec<usize>,
    facet_tags: Vec<BoundaryTag>,
    /// Involution pairing the nodes of the `z = -1/2` face with those of the
    /// `z = +1/2` face (cell meshes only).
    pub periodic_pairing: BTreeMap<usize, usize>,
    /// Node sitting exactly at the anchor point `O'` (cross-section meshes).
    pub anchor_node: Option<usize>,
    /// Cavern carried by the mesh and its center `O` in physical coordinates.
    pub cavern: Option<(CavernSpec, [f64; 3])>,
    /// Radius of the truncation hemisphere (half-space meshes).
    pub truncation_radius: Option<f64>,
    /// Nodes of the closed cavern region in a filled cell mesh, i.e. the
    /// nodes that become constrained when the cavern is carved out.
    pub cavern_closure_nodes: Vec<usize>,
}

impl Mesh {
    pub(crate) fn new(kind: ElementKind, nodes: Vec<[f64; 3]>, connectivity: Vec<usize>) -> Self {
        debug_assert_eq!(connectivity.len() % kind.nodes_per_element(), 0);
        Self {
            kind,
            nodes,
            connectivity,
            facet_nodes: Vec::new(),
            facet_tags: Vec::new(),
            periodic_pairing: BTreeMap::new(),
            anchor_node: None,
            cavern: None,
            truncation_radius: None,
            cavern_closure_nodes: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.connectivity.len() / self.kind.nodes_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.kind.nodes_per_element();
        &self.connectivity[e * k..(e + 1) * k]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.connectivity.chunks_exact(self.kind.nodes_per_element())
    }

    pub fn n_facets(&self) -> usize {
        self.facet_tags.len()
    }

    pub fn facet(&self, f: usize) -> (&[usize], BoundaryTag) {
        let k = self.kind.nodes_per_facet();
        (&self.facet_nodes[f * k..(f + 1) * k], self.facet_tags[f])
    }

    pub fn facets(&self) -> impl Iterator<Item = (&[usize], BoundaryTag)> + '_ {
        self.facet_nodes
            .chunks_exact(self.kind.nodes_per_facet())
            .zip(self.facet_tags.iter().copied())
    }

    pub fn count_facets(&self, tag: BoundaryTag) -> usize {
        self.facet_tags.iter().filter(|t| **t == tag).count()
    }

    pub fn quad_coords(&self, e: usize) -> [[f64; 2]; 4] {
        let el = self.element(e);
        std::array::from_fn(|a| [self.nodes[el[a]][0], self.nodes[el[a]][1]])
    }

    pub fn hex_coords(&self, e: usize) -> [[f64; 3]; 8] {
        let el = self.element(e);
        std::array::from_fn(|a| self.nodes[el[a]])
    }

    /// Flags for nodes lying on at least one facet with the given tag.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut flags = vec![false; self.n_nodes()];
        for (nodes, t) in self.facets() {
            if t == tag {
                for &n in nodes {
                    flags[n] = true;
                }
            }
        }
        flags
    }

    pub fn dirichlet_nodes(&self) -> Vec<bool> {
        self.nodes_with_tag(BoundaryTag::Dirichlet)
    }

    pub fn element_min_jacobian(&self, e: usize) -> f64 {
        match self.kind {
            ElementKind::Quad4 => element::quad_min_det(&self.quad_coords(e)),
            ElementKind::Hex8 => element::hex_min_det(&self.hex_coords(e)),
        }
    }

    /// Positive-Jacobian scan over all elements.
    pub fn check_jacobians(&self) -> Result<()> {
        for e in 0..self.n_elements() {
            let d = self.element_min_jacobian(e);
            if !(d > 0.0) {
                return Err(Error::GeometryViolation(format!(
                    "element {e} has non-positive Jacobian {d:e}"
                )));
            }
        }
        Ok(())
    }

    /// Sum of element measures (area or volume) by 2x2(x2) Gauss quadrature.
    pub fn measure(&self) -> f64 {
        let mut total = 0.0;
        for e in 0..self.n_elements() {
            total += match self.kind {
                ElementKind::Quad4 => {
                    let x = self.quad_coords(e);
                    let mut v = 0.0;
                    for gx in element::GAUSS2 {
                        for gy in element::GAUSS2 {
                            v += element::quad_det(&x, [gx, gy]);
                        }
                    }
                    v
                }
                ElementKind::Hex8 => {
                    let x = self.hex_coords(e);
                    let mut v = 0.0;
                    for gx in element::GAUSS2 {
                        for gy in element::GAUSS2 {
                            for gz in element::GAUSS2 {
                                v += element::hex_det(&x, [gx, gy, gz]);
                            }
                        }
                    }
                    v
                }
            };
        }
        total
    }

    /// The `(lo, hi)` node pairs of the periodic faces, ordered by `lo`.
    pub fn periodic_pairs(&self) -> Vec<(usize, usize)> {
        self.periodic_pairing
            .iter()
            .filter(|(a, _)| self.nodes[**a][2] < 0.0)
            .map(|(a, b)| (*a, *b))
            .collect()
    }

    /// Checks that the pairing is an involution between the two periodic
    /// faces and that partners differ by exactly one in `z`.
    pub fn check_periodic_pairing(&self) -> Result<()> {
        for (&a, &b) in &self.periodic_pairing {
            if self.periodic_pairing.get(&b) != Some(&a) {
                return Err(Error::GeometryViolation(format!(
                    "periodic pairing is not an involution at node {a}"
                )));
            }
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            if pa[0] != pb[0] || pa[1] != pb[1] || ((pa[2] - pb[2]).abs() - 1.0).abs() > 1e-12 {
                return Err(Error::GeometryViolation(format!(
                    "paired nodes {a} and {b} differ by more than the unit z shift"
                )));
            }
        }
        Ok(())
    }

    /// Recomputes the boundary facets (facets owned by exactly one element)
    /// and tags them with `classify`; facets for which it returns `None` are
    /// left untagged.
    pub(crate) fn tag_boundary(&mut self, classify: impl Fn(&[[f64; 3]]) -> Option<BoundaryTag>) {
        let facets = self.boundary_facets();
        self.facet_nodes.clear();
        self.facet_tags.clear();
        for f in facets {
            let pts: Vec<[f64; 3]> = f.iter().map(|&n| self.nodes[n]).collect();
            if let Some(tag) = classify(&pts) {
                self.facet_nodes.extend_from_slice(&f);
                self.facet_tags.push(tag);
            }
        }
    }

    /// Outward-oriented boundary facets in a deterministic order.
    pub(crate) fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let local: &[&[usize]] = match self.kind {
            ElementKind::Quad4 => &[&QUAD_EDGES[0], &QUAD_EDGES[1], &QUAD_EDGES[2], &QUAD_EDGES[3]],
            ElementKind::Hex8 => &[
                &HEX_FACES[0],
                &HEX_FACES[1],
                &HEX_FACES[2],
                &HEX_FACES[3],
                &HEX_FACES[4],
                &HEX_FACES[5],
            ],
        };
        let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
        let mut order = Vec::new();
        for el in self.elements() {
            for f in local {
                let nodes: Vec<usize> = f.iter().map(|&a| el[a]).collect();
                let mut key = nodes.clone();
                key.sort_unstable();
                let entry = count.entry(key.clone()).or_insert_with(|| {
                    order.push(key);
                    (0, nodes)
                });
                entry.0 += 1;
            }
        }
        order
            .into_iter()
            .filter_map(|k| {
                let (c, nodes) = count.remove(&k).unwrap();
                (c == 1).then_some(nodes)
            })
            .collect()
    }

    pub(crate) fn push_facet(&mut self, nodes: &[usize], tag: BoundaryTag) {
        debug_assert_eq!(nodes.len(), self.kind.nodes_per_facet());
        self.facet_nodes.extend_from_slice(nodes);
        self.facet_tags.push(tag);
    }

    /// Writes the mesh in the versioned plain-text debug format.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let kind = match self.kind {
            ElementKind::Quad4 => "quad4",
            ElementKind::Hex8 => "hex8",
        };
        writeln!(s, "waveguide-mesh {MESH_FORMAT_VERSION}").unwrap();
        writeln!(s, "kind {kind}").unwrap();
        writeln!(s, "nodes {}", self.n_nodes()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]).unwrap();
        }
        writeln!(s, "elements {}", self.n_elements()).unwrap();
        for el in self.elements() {
            let line: Vec<String> = el.iter().map(|n| n.to_string()).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        writeln!(s, "facets {}", self.n_facets()).unwrap();
        for (nodes, tag) in self.facets() {
            let line: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
            writeln!(s, "{} {}", tag.as_str(), line.join(" ")).unwrap();
        }
        let pairs = self.periodic_pairs();
        writeln!(s, "periodic {}", pairs.len()).unwrap();
        for (a, b) in pairs {
            writeln!(s, "{a} {b}").unwrap();
        }
        writeln!(s, "end").unwrap();
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads a mesh written by [`Mesh::write_text`]. Metadata beyond the
    /// node, element, facet and pairing tables is not stored in the format.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = || -> Result<(usize, String)> {
            match lines.next() {
                Some((i, Ok(l))) => Ok((i, l)),
                Some((i, Err(e))) => Err(Error::MeshFormat {
                    line: i,
                    message: e.to_string(),
                }),
                None => Err(Error::MeshFormat {
                    line: 0,
                    message: "unexpected end of input".into(),
                }),
            }
        };
        let bad = |line: usize, message: &str| Error::MeshFormat {
            line,
            message: message.to_string(),
        };
        let header = |l: &(usize, String), key: &str| -> Result<usize> {
            let mut it = l.1.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(l.0, &format!("expected `{key}`")));
            }
            it.next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(l.0, &format!("bad `{key}` count")))
        };

        let l = next()?;
        let version = header(&l, "waveguide-mesh")?;
        if version != MESH_FORMAT_VERSION as usize {
            return Err(bad(l.0, &format!("unsupported version {version}")));
        }
        let l = next()?;
        let kind = match l.1.trim() {
            "kind quad4" => ElementKind::Quad4,
            "kind hex8" => ElementKind::Hex8,
            _ => return Err(bad(l.0, "expected `kind quad4` or `kind hex8`")),
        };
        let n = header(&next()?, "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let (i, line) = next()?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(i, "bad coordinate")))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(bad(i, "expected three coordinates"));
            }
            nodes.push([v[0], v[1], v[2]]);
        }
        let parse_ids = |i: usize, toks: &[&str], want: usize| -> Result<Vec<usize>> {
            if toks.len() != want {
                return Err(bad(i, &format!("expected {want} node indices")));
            }
            toks.iter()
                .map(|t| {
                    t.parse::<usize>()
                        .ok()
                        .filter(|&v| v < n)
                        .ok_or_else(|| bad(i, "bad node index"))
                })
                .collect()
        };
        let ne = header(&next()?, "elements")?;
        let mut conn = Vec::with_capacity(ne * kind.nodes_per_element());
        for _ in 0..ne {
            let (i, line) = next()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            conn.extend(parse_ids(i, &toks, kind.nodes_per_element())?);
        }
        let mut mesh = Mesh::new(kind, nodes, conn);
        let nf = header(&next()?, "facets")?;
        for _ in 0..nf {
            let (i, line) = next()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let tag = toks
                .first()
                .and_then(|t| BoundaryTag::parse(t))
                .ok_or_else(|| bad(i, "bad facet tag"))?;
            let ids = parse_ids(i, &toks[1..], kind.nodes_per_facet())?;
            mesh.push_facet(&ids, tag);
        }
        let np = header(&next()?, "periodic")?;
        for _ in 0..np {
            let (i, line) = next()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let ids = parse_ids(i, &toks, 2)?;
            mesh.periodic_pairing.insert(ids[0], ids[1]);
            mesh.periodic_pairing.insert(ids[1], ids[0]);
        }
        let l = next()?;
        if l.1.trim() != "end" {
            return Err(bad(l.0, "expected `end`"));
        }
        Ok(mesh)
    }
}

/// Incremental hexahedral mesh construction with orientation repair.
#[derive(Debug, Default)]
pub(crate) struct HexBuilder {
    pub nodes: Vec<[f64; 3]>,
    pub hexes: Vec<[usize; 8]>,
}

impl HexBuilder {
    pub fn add_node(&mut self, p: [f64; 3]) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    /// Adds a hexahedron, reordering it if its Jacobian is negative.
    pub fn add_hex(&mut self, mut h: [usize; 8]) {
        let x: [[f64; 3]; 8] = std::array::from_fn(|a| self.nodes[h[a]]);
        if element::hex_det(&x, [0.0; 3]) < 0.0 {
            h.swap(1, 3);
            h.swap(5, 7);
        }
        self.hexes.push(h);
    }

    pub fn into_mesh(self) -> Mesh {
        let conn = self.hexes.iter().flatten().copied().collect();
        Mesh::new(ElementKind::Hex8, self.nodes, conn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_hex() -> Mesh {
        let mut b = HexBuilder::default();
        for q in element::HEX_REF {
            b.add_node([0.5 * (q[0] + 1.0), 0.5 * (q[1] + 1.0), 0.5 * (q[2] + 1.0) - 0.5]);
        }
        b.add_hex([0, 1, 2, 3, 4, 5, 6, 7]);
        b.into_mesh()
    }

    #[test]
    fn orientation_is_repaired() {
        let mut b = HexBuilder::default();
        for q in element::HEX_REF {
            b.add_node([q[0], q[1], q[2]]);
        }
        b.add_hex([0, 3, 2, 1, 4, 7, 6, 5]);
        let m = b.into_mesh();
        m.check_jacobians().unwrap();
        assert!((m.measure() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn single_hex_has_six_boundary_faces() {
        let mut m = unit_hex();
        m.tag_boundary(|p| {
            if p.iter().all(|q| q[2] == -0.5) {
                Some(BoundaryTag::PeriodicLo)
            } else if p.iter().all(|q| q[2] == 0.5) {
                Some(BoundaryTag::PeriodicHi)
            } else {
                Some(BoundaryTag::Dirichlet)
            }
        });
        assert_eq!(m.n_facets(), 6);
        assert_eq!(m.count_facets(BoundaryTag::Dirichlet), 4);
        assert_eq!(m.count_facets(BoundaryTag::PeriodicLo), 1);
    }

    #[test]
    fn text_roundtrip() {
        let mut m = unit_hex();
        m.tag_boundary(|_| Some(BoundaryTag::Dirichlet));
        for (a, b) in [(0, 4), (1, 5), (2, 6), (3, 7)] {
            m.periodic_pairing.insert(a, b);
            m.periodic_pairing.insert(b, a);
        }
        m.check_periodic_pairing().unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(&buf[..]).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.n_facets(), 6);
        assert_eq!(back.periodic_pairing, m.periodic_pairing);
        assert_eq!(back.element(0), m.element(0));
    }

    #[test]
    fn malformed_text_reports_line() {
        let text = "waveguide-mesh 1\nkind hex8\nnodes 1\n0 0 zero\n";
        match Mesh::read_text(text.as_bytes()) {
            Err(Error::MeshFormat { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
