//! Simplicial complexes over R^2 and R^3.
//!
//! A complex stores every simplex of every dimension exactly once, closed
//! under subsimplices. Simplex vertex lists are kept in strictly increasing
//! vertex-id order; that order fixes the canonical orientation of each
//! simplex and makes signs reproducible without per-instance flags.
//!
//! Ids are global across dimensions: first all vertices (id = vertex index),
//! then edges sorted lexicographically by vertex ids, and so on up to the
//! cells.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyform::SimplexChart;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("only ambient dimensions 2 and 3 are supported, got {0}")]
    UnsupportedDimension(usize),
    #[error("cell {cell} references vertex {vertex} out of range")]
    InvalidVertexRef { cell: usize, vertex: usize },
    #[error("cell {cell} has repeated vertices")]
    RepeatedVertex { cell: usize },
    #[error("cell {cell} is degenerate (volume {volume:.3e})")]
    DegenerateCell { cell: usize, volume: f64 },
    #[error("duplicate cell with vertices {0:?}")]
    DuplicateCell(Vec<usize>),
    #[error("facet {facet:?} is shared by {count} cells")]
    NonManifoldFacet { facet: Vec<usize>, count: usize },
    #[error("cells around simplex {simplex} are not face-connected")]
    NotFaceConnected { simplex: usize },
    #[error("simplex id {0} out of range")]
    InvalidSimplex(usize),
    #[error("simplex {0} is not a facet of cell {1}")]
    NotAFacet(usize, usize),
    #[error("subsimplex dimension {d} out of range for a {dim}-simplex")]
    SubdimOutOfRange { d: usize, dim: usize },
    #[error("no face-connection from cell {from} to cell {to} around simplex {around}")]
    NoFaceConnection { from: usize, to: usize, around: usize },
    #[error("boundary member {simplex} has no containing facet inside the boundary subcomplex")]
    BoundaryNotClosed { simplex: usize },
    #[error("mesh file: {0}")]
    Format(String),
}

#[derive(Debug, Clone)]
pub struct Simplex {
    pub id: usize,
    pub dim: usize,
    /// strictly increasing vertex indices
    pub vertex_ids: Vec<usize>,
}

/// Simplices of the boundary part, closed under subsimplices.
#[derive(Debug, Clone, Default)]
pub struct BoundarySubcomplex {
    pub member_ids: BTreeSet<usize>,
}

impl BoundarySubcomplex {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.member_ids.contains(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

/// Fixed facet/cell representatives per simplex: `S ⊆ F_S ⊆ T_S`, with
/// `F_S` inside the boundary subcomplex whenever `S` is.
#[derive(Debug, Clone)]
pub struct Representatives {
    /// indexed by simplex id; `None` for cells
    pub facet_and_cell: Vec<Option<(usize, usize)>>,
}

#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    ambient_dim: usize,
    vertices: Vec<DVector<f64>>,
    simplices: Vec<Simplex>,
    by_dim: Vec<Vec<usize>>,
    id_by_vertices: HashMap<Vec<usize>, usize>,
    /// per simplex: ids of the cells containing it, sorted
    cells_containing: Vec<Vec<usize>>,
}

/// JSON mesh file: `{ "dimension": n, "vertices": [[x,…]], "cells": [[v0,…,vn]] }`
#[derive(Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
}

impl SimplicialComplex {
    pub fn build(vertices: Vec<Vec<f64>>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        let n = vertices
            .first()
            .map(|v| v.len())
            .ok_or(MeshError::Format("no vertices".into()))?;
        if n != 2 && n != 3 {
            return Err(MeshError::UnsupportedDimension(n));
        }
        let vertices: Vec<DVector<f64>> = vertices
            .into_iter()
            .map(|v| DVector::from_vec(v))
            .collect();

        // canonicalize and validate cells
        let mut sorted_cells: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
        for (ci, cell) in cells.iter().enumerate() {
            if cell.len() != n + 1 {
                return Err(MeshError::Format(format!(
                    "cell {ci} has {} vertices, expected {}",
                    cell.len(),
                    n + 1
                )));
            }
            for &v in cell {
                if v >= vertices.len() {
                    return Err(MeshError::InvalidVertexRef { cell: ci, vertex: v });
                }
            }
            let mut c = cell.clone();
            c.sort_unstable();
            if c.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::RepeatedVertex { cell: ci });
            }
            sorted_cells.push(c);
        }
        {
            let mut seen = BTreeSet::new();
            for c in &sorted_cells {
                if !seen.insert(c.clone()) {
                    return Err(MeshError::DuplicateCell(c.clone()));
                }
            }
        }
        for (ci, c) in sorted_cells.iter().enumerate() {
            let coords: Vec<DVector<f64>> = c.iter().map(|&v| vertices[v].clone()).collect();
            let chart = SimplexChart::from_vertices(ci, &coords);
            let vol = chart.volume();
            let h = pairwise_diameter(&coords);
            if vol <= 1e-14 * h.powi(n as i32) {
                return Err(MeshError::DegenerateCell { cell: ci, volume: vol });
            }
        }

        // enumerate all subsimplices, dimension by dimension
        let mut sets_by_dim: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); n + 1];
        for c in &sorted_cells {
            for d in 0..=n {
                for subset in vertex_subsets(c, d + 1) {
                    sets_by_dim[d].insert(subset);
                }
            }
        }
        let mut simplices = Vec::new();
        let mut by_dim = vec![Vec::new(); n + 1];
        let mut id_by_vertices = HashMap::new();
        for (d, set) in sets_by_dim.iter().enumerate() {
            for verts in set {
                let id = simplices.len();
                simplices.push(Simplex {
                    id,
                    dim: d,
                    vertex_ids: verts.clone(),
                });
                by_dim[d].push(id);
                id_by_vertices.insert(verts.clone(), id);
            }
        }

        let cell_ids: Vec<usize> = sorted_cells
            .iter()
            .map(|c| id_by_vertices[c])
            .collect();
        let mut cells_containing = vec![Vec::new(); simplices.len()];
        for (&cid, c) in cell_ids.iter().zip(&sorted_cells) {
            for d in 0..=n {
                for subset in vertex_subsets(c, d + 1) {
                    cells_containing[id_by_vertices[&subset]].push(cid);
                }
            }
        }
        for list in &mut cells_containing {
            list.sort_unstable();
            list.dedup();
        }

        let complex = SimplicialComplex {
            ambient_dim: n,
            vertices,
            simplices,
            by_dim,
            id_by_vertices,
            cells_containing,
        };
        complex.validate()?;
        Ok(complex)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let n = self.ambient_dim;
        for &fid in &self.by_dim[n - 1] {
            let count = self.cells_containing[fid].len();
            if count == 0 || count > 2 {
                return Err(MeshError::NonManifoldFacet {
                    facet: self.simplices[fid].vertex_ids.clone(),
                    count,
                });
            }
        }
        // every star must be face-connected: the cells containing a simplex S
        // are linked through facets that contain S
        for s in &self.simplices {
            if s.dim == n {
                continue;
            }
            let star = &self.cells_containing[s.id];
            if star.len() <= 1 {
                continue;
            }
            let reached = self.walk_star(s.id, star[0]);
            if reached.len() != star.len() {
                return Err(MeshError::NotFaceConnected { simplex: s.id });
            }
        }
        Ok(())
    }

    /// Cells reachable from `start` by crossing facets containing `around`.
    fn walk_star(&self, around: usize, start: usize) -> BTreeSet<usize> {
        let mut reached = BTreeSet::new();
        reached.insert(start);
        let mut queue = VecDeque::new();
        queue.push_back(start);
        while let Some(t) = queue.pop_front() {
            for fid in self.subsimplices(t, self.ambient_dim - 1).unwrap() {
                if !self.is_subsimplex(around, fid) {
                    continue;
                }
                for &t2 in &self.cells_containing[fid] {
                    if reached.insert(t2) {
                        queue.push_back(t2);
                    }
                }
            }
        }
        reached
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn simplex(&self, id: usize) -> &Simplex {
        &self.simplices[id]
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.len()
    }

    pub fn simplices_of_dim(&self, d: usize) -> &[usize] {
        &self.by_dim[d]
    }

    pub fn cell_ids(&self) -> &[usize] {
        &self.by_dim[self.ambient_dim]
    }

    pub fn vertex(&self, v: usize) -> &DVector<f64> {
        &self.vertices[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn id_of(&self, sorted_vertex_ids: &[usize]) -> Option<usize> {
        self.id_by_vertices.get(sorted_vertex_ids).copied()
    }

    pub fn vertex_coords(&self, id: usize) -> Vec<DVector<f64>> {
        self.simplices[id]
            .vertex_ids
            .iter()
            .map(|&v| self.vertices[v].clone())
            .collect()
    }

    pub fn chart(&self, id: usize) -> SimplexChart {
        SimplexChart::from_vertices(id, &self.vertex_coords(id))
    }

    pub fn centroid(&self, id: usize) -> DVector<f64> {
        let coords = self.vertex_coords(id);
        let mut c = DVector::zeros(self.ambient_dim);
        for v in &coords {
            c += v;
        }
        c / coords.len() as f64
    }

    pub fn diameter(&self, id: usize) -> f64 {
        pairwise_diameter(&self.vertex_coords(id))
    }

    pub fn volume(&self, id: usize) -> f64 {
        if self.simplices[id].dim == 0 {
            return 0.0;
        }
        self.chart(id).volume()
    }

    /// Largest cell diameter.
    pub fn h_max(&self) -> f64 {
        self.cell_ids()
            .iter()
            .map(|&c| self.diameter(c))
            .fold(0.0, f64::max)
    }

    /// Minimal length of the edges meeting a vertex (a mesh-size diagnostic).
    pub fn vertex_diameter(&self, vertex_simplex: usize) -> f64 {
        let s = &self.simplices[vertex_simplex];
        assert_eq!(s.dim, 0);
        let v = s.vertex_ids[0];
        self.by_dim[1]
            .iter()
            .filter(|&&e| self.simplices[e].vertex_ids.contains(&v))
            .map(|&e| self.diameter(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// `Δ_d(S)`: all d-dimensional subsimplices of `S` in canonical order.
    pub fn subsimplices(&self, id: usize, d: usize) -> Result<Vec<usize>, MeshError> {
        let s = self
            .simplices
            .get(id)
            .ok_or(MeshError::InvalidSimplex(id))?;
        if d > s.dim {
            return Err(MeshError::SubdimOutOfRange { d, dim: s.dim });
        }
        Ok(vertex_subsets(&s.vertex_ids, d + 1)
            .into_iter()
            .map(|verts| self.id_by_vertices[&verts])
            .collect())
    }

    /// All subsimplices of `S`, every dimension, ordered by dimension.
    pub fn all_subsimplices(&self, id: usize) -> Vec<usize> {
        let dim = self.simplices[id].dim;
        (0..=dim)
            .flat_map(|d| self.subsimplices(id, d).unwrap())
            .collect()
    }

    pub fn is_subsimplex(&self, sub: usize, of: usize) -> bool {
        let a = &self.simplices[sub].vertex_ids;
        let b = &self.simplices[of].vertex_ids;
        a.iter().all(|v| b.binary_search(v).is_ok())
    }

    /// `∇_d(T, S)`: the d-simplices of the complex containing `S`.
    pub fn superstar(&self, id: usize, d: usize) -> Result<Vec<usize>, MeshError> {
        let s = self
            .simplices
            .get(id)
            .ok_or(MeshError::InvalidSimplex(id))?;
        if d == self.ambient_dim {
            return Ok(self.cells_containing[id].clone());
        }
        if d < s.dim {
            return Ok(Vec::new());
        }
        let mut out = BTreeSet::new();
        for &cell in &self.cells_containing[id] {
            for sup in self.subsimplices(cell, d)? {
                if self.is_subsimplex(id, sup) {
                    out.insert(sup);
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Cells containing the simplex (`∇_n`).
    pub fn cells_containing(&self, id: usize) -> &[usize] {
        &self.cells_containing[id]
    }

    /// Geometric orientation of a cell: sign of the chart determinant.
    pub fn cell_sign(&self, cell: usize) -> f64 {
        self.chart(cell).det().signum()
    }

    /// `o(F, T)`: +1 when the fixed orientation of facet `F` agrees with the
    /// orientation induced by the cell `T`, −1 otherwise. Computed as the
    /// parity of the omitted vertex position times the geometric orientation
    /// of the cell, so that the two cells of an interior facet always induce
    /// opposite signs.
    pub fn orientation_sign(&self, facet: usize, cell: usize) -> Result<f64, MeshError> {
        let f = &self.simplices[facet];
        let t = &self.simplices[cell];
        if f.dim + 1 != t.dim || !self.is_subsimplex(facet, cell) {
            return Err(MeshError::NotAFacet(facet, cell));
        }
        let omitted = t
            .vertex_ids
            .iter()
            .position(|v| f.vertex_ids.binary_search(v).is_err())
            .expect("facet omits one vertex");
        let parity = if omitted % 2 == 0 { 1.0 } else { -1.0 };
        Ok(parity * self.cell_sign(cell))
    }

    /// `μ(T)`: max over non-vertex simplices of `h^d / vol_d`.
    pub fn shape_measure(&self) -> f64 {
        let mut mu: f64 = 0.0;
        for s in &self.simplices {
            if s.dim == 0 {
                continue;
            }
            let h = self.diameter(s.id);
            let vol = self.volume(s.id);
            mu = mu.max(h.powi(s.dim as i32) / vol);
        }
        mu
    }

    /// Uniform refinement: red refinement in 2D, Freudenthal/Bey red
    /// subdivision into 8 children in 3D. Every edge gains a midpoint; new
    /// vertices are appended after the old ones, ordered by the parent edge.
    pub fn refine_uniform(&self) -> Result<SimplicialComplex, MeshError> {
        let n = self.ambient_dim;
        let mut vertices: Vec<Vec<f64>> = self
            .vertices
            .iter()
            .map(|v| v.iter().copied().collect())
            .collect();
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for &eid in &self.by_dim[1] {
            let vs = &self.simplices[eid].vertex_ids;
            let m = (self.vertices[vs[0]].clone() + &self.vertices[vs[1]]) / 2.0;
            midpoint.insert((vs[0], vs[1]), vertices.len());
            vertices.push(m.iter().copied().collect());
        }
        let mid = |a: usize, b: usize| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            midpoint[&key]
        };
        let mut cells = Vec::new();
        for &cid in self.cell_ids() {
            let v = &self.simplices[cid].vertex_ids;
            match n {
                2 => {
                    let (v0, v1, v2) = (v[0], v[1], v[2]);
                    let (m01, m02, m12) = (mid(v0, v1), mid(v0, v2), mid(v1, v2));
                    cells.push(vec![v0, m01, m02]);
                    cells.push(vec![v1, m01, m12]);
                    cells.push(vec![v2, m02, m12]);
                    cells.push(vec![m01, m02, m12]);
                }
                3 => {
                    let (v0, v1, v2, v3) = (v[0], v[1], v[2], v[3]);
                    let m01 = mid(v0, v1);
                    let m02 = mid(v0, v2);
                    let m03 = mid(v0, v3);
                    let m12 = mid(v1, v2);
                    let m13 = mid(v1, v3);
                    let m23 = mid(v2, v3);
                    // corner children
                    cells.push(vec![v0, m01, m02, m03]);
                    cells.push(vec![v1, m01, m12, m13]);
                    cells.push(vec![v2, m02, m12, m23]);
                    cells.push(vec![v3, m03, m13, m23]);
                    // octahedron split along the (m02, m13) diagonal; this
                    // choice keeps the family in finitely many similarity
                    // classes under repeated refinement
                    cells.push(vec![m01, m02, m03, m13]);
                    cells.push(vec![m01, m02, m12, m13]);
                    cells.push(vec![m02, m03, m13, m23]);
                    cells.push(vec![m02, m12, m13, m23]);
                }
                other => return Err(MeshError::UnsupportedDimension(other)),
            }
        }
        SimplicialComplex::build(vertices, cells)
    }

    /// Facets lying on the topological boundary (contained in one cell).
    pub fn boundary_facets(&self) -> Vec<usize> {
        self.by_dim[self.ambient_dim - 1]
            .iter()
            .copied()
            .filter(|&f| self.cells_containing[f].len() == 1)
            .collect()
    }

    /// Boundary subcomplex from a predicate over boundary facet centroids;
    /// the selection is closed under subsimplices.
    pub fn boundary_subcomplex<F>(&self, selector: F) -> BoundarySubcomplex
    where
        F: Fn(&[f64]) -> bool,
    {
        let mut members = BTreeSet::new();
        for f in self.boundary_facets() {
            let c = self.centroid(f);
            if selector(c.as_slice()) {
                for s in self.all_subsimplices(f) {
                    members.insert(s);
                }
            }
        }
        BoundarySubcomplex {
            member_ids: members,
        }
    }

    pub fn boundary_all(&self) -> BoundarySubcomplex {
        self.boundary_subcomplex(|_| true)
    }

    /// Chain of cells from `t0` to `t` all containing `around`, consecutive
    /// cells sharing a facet that contains `around`. The returned list
    /// excludes `t0` and ends with `t`; it is empty when `t0 == t`.
    pub fn face_connection(
        &self,
        t0: usize,
        t: usize,
        around: usize,
    ) -> Result<Vec<usize>, MeshError> {
        if t0 == t {
            return Ok(Vec::new());
        }
        let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        queue.push_back(t0);
        prev.insert(t0, t0);
        while let Some(cur) = queue.pop_front() {
            if cur == t {
                let mut path = vec![t];
                let mut c = t;
                while prev[&c] != c {
                    c = prev[&c];
                    path.push(c);
                }
                path.pop(); // drop t0
                path.reverse();
                return Ok(path);
            }
            for fid in self.subsimplices(cur, self.ambient_dim - 1)? {
                if !self.is_subsimplex(around, fid) {
                    continue;
                }
                for &t2 in &self.cells_containing[fid] {
                    if !prev.contains_key(&t2) {
                        prev.insert(t2, cur);
                        queue.push_back(t2);
                    }
                }
            }
        }
        Err(MeshError::NoFaceConnection {
            from: t0,
            to: t,
            around,
        })
    }

    /// Deterministic facet/cell representatives (lowest id wins). Simplices
    /// in the boundary subcomplex get a boundary facet.
    pub fn choose_representatives(
        &self,
        boundary: &BoundarySubcomplex,
    ) -> Result<Representatives, MeshError> {
        let n = self.ambient_dim;
        let mut out = vec![None; self.simplices.len()];
        for s in &self.simplices {
            if s.dim == n {
                continue;
            }
            let facets = self.superstar(s.id, n - 1)?;
            let candidate = if boundary.contains(s.id) {
                facets
                    .iter()
                    .copied()
                    .find(|&f| boundary.contains(f))
                    .ok_or(MeshError::BoundaryNotClosed { simplex: s.id })?
            } else {
                *facets.first().expect("every simplex lies under a facet")
            };
            let cell = *self.cells_containing[candidate]
                .first()
                .expect("facet belongs to a cell");
            out[s.id] = Some((candidate, cell));
        }
        Ok(Representatives {
            facet_and_cell: out,
        })
    }

    pub fn to_mesh_file(&self) -> MeshFile {
        MeshFile {
            dimension: self.ambient_dim,
            vertices: self
                .vertices
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
            cells: self
                .cell_ids()
                .iter()
                .map(|&c| self.simplices[c].vertex_ids.clone())
                .collect(),
        }
    }

    pub fn from_mesh_file(file: MeshFile) -> Result<Self, MeshError> {
        for v in &file.vertices {
            if v.len() != file.dimension {
                return Err(MeshError::Format(
                    "vertex length does not match dimension".into(),
                ));
            }
        }
        SimplicialComplex::build(file.vertices, file.cells)
    }

    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let file: MeshFile =
            serde_json::from_str(text).map_err(|e| MeshError::Format(e.to_string()))?;
        Self::from_mesh_file(file)
    }
}

fn pairwise_diameter(coords: &[DVector<f64>]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            h = h.max((&coords[i] - &coords[j]).norm());
        }
    }
    h
}

/// All size-`m` subsets of a sorted list, each sorted, lexicographic order.
fn vertex_subsets(sorted: &[usize], m: usize) -> Vec<Vec<usize>> {
    let d = sorted.len();
    crate::polyform::increasing_subsets(d, m)
        .into_iter()
        .map(|positions| positions.iter().map(|&p| sorted[p as usize]).collect())
        .collect()
}

/// Positions of the vertices of `sub` within the sorted vertex list of `sup`.
pub fn face_positions(complex: &SimplicialComplex, sub: usize, sup: usize) -> Vec<usize> {
    let a = &complex.simplex(sub).vertex_ids;
    let b = &complex.simplex(sup).vertex_ids;
    a.iter()
        .map(|v| b.binary_search(v).expect("sub is a subsimplex"))
        .collect()
}

/// The unit square split into two triangles along the diagonal.
pub fn unit_square_2() -> SimplicialComplex {
    SimplicialComplex::build(
        vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ],
        vec![vec![0, 1, 2], vec![0, 2, 3]],
    )
    .expect("valid built-in mesh")
}

/// The unit cube split into six tetrahedra sharing the main diagonal.
pub fn unit_cube_kuhn_6() -> SimplicialComplex {
    let vertices: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            vec![
                (i & 1) as f64,
                ((i >> 1) & 1) as f64,
                ((i >> 2) & 1) as f64,
            ]
        })
        .collect();
    // paths from 0 to 7 along the axes, one per permutation
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let cells = perms
        .iter()
        .map(|p| {
            let mut v = 0usize;
            let mut cell = vec![0usize];
            for &axis in p {
                v |= 1 << axis;
                cell.push(v);
            }
            cell
        })
        .collect();
    SimplicialComplex::build(vertices, cells).expect("valid built-in mesh")
}

/// Unit square with a square hole (the middle ninth removed), 16 triangles.
/// The triangulated domain is not simply connected.
pub fn square_hole_16() -> SimplicialComplex {
    let mut vertices = Vec::new();
    let mut index = HashMap::new();
    for j in 0..4 {
        for i in 0..4 {
            index.insert((i, j), vertices.len());
            vertices.push(vec![i as f64 / 3.0, j as f64 / 3.0]);
        }
    }
    let mut cells = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            if i == 1 && j == 1 {
                continue; // the hole
            }
            let v00 = index[&(i, j)];
            let v10 = index[&(i + 1, j)];
            let v01 = index[&(i, j + 1)];
            let v11 = index[&(i + 1, j + 1)];
            cells.push(vec![v00, v10, v11]);
            cells.push(vec![v00, v01, v11]);
        }
    }
    SimplicialComplex::build(vertices, cells).expect("valid built-in mesh")
}

pub const GENERATOR_NAMES: [&str; 3] = ["square_hole_16", "unit_cube_kuhn_6", "unit_square_2"];

pub fn generator(name: &str) -> Option<SimplicialComplex> {
    match name {
        "unit_square_2" => Some(unit_square_2()),
        "unit_cube_kuhn_6" => Some(unit_cube_kuhn_6()),
        "square_hole_16" => Some(square_hole_16()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_counts() {
        let c = unit_square_2();
        assert_eq!(c.simplices_of_dim(0).len(), 4);
        assert_eq!(c.simplices_of_dim(1).len(), 5);
        assert_eq!(c.simplices_of_dim(2).len(), 2);
    }

    #[test]
    fn single_tetrahedron_counts() {
        let c = SimplicialComplex::build(
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![vec![0, 1, 2, 3]],
        )
        .unwrap();
        assert_eq!(c.simplices_of_dim(0).len(), 4);
        assert_eq!(c.simplices_of_dim(1).len(), 6);
        assert_eq!(c.simplices_of_dim(2).len(), 4);
        assert_eq!(c.simplices_of_dim(3).len(), 1);
    }

    #[test]
    fn kuhn_cube_facet_census() {
        let c = unit_cube_kuhn_6();
        assert_eq!(c.num_vertices(), 8);
        assert_eq!(c.cell_ids().len(), 6);
        // brute-force facet census: count how many cells contain each facet
        let mut interior = 0;
        let mut boundary = 0;
        for &f in c.simplices_of_dim(2) {
            match c.cells_containing(f).len() {
                1 => boundary += 1,
                2 => interior += 1,
                other => panic!("facet in {other} cells"),
            }
        }
        assert_eq!(boundary, 12); // two triangles per cube face
        assert!(interior > 0);
        for &f in c.simplices_of_dim(2) {
            if c.cells_containing(f).len() == 2 {
                assert_eq!(c.superstar(f, 3).unwrap().len(), 2);
            }
        }
    }

    #[test]
    fn subsimplex_enumeration() {
        let c = unit_square_2();
        let tri = c.cell_ids()[0];
        assert_eq!(c.subsimplices(tri, 1).unwrap().len(), 3);
        assert_eq!(c.subsimplices(tri, 0).unwrap().len(), 3);
        assert!(c.subsimplices(tri, 3).is_err());
    }

    #[test]
    fn superstar_of_shared_vertex() {
        let c = unit_square_2();
        // vertices 0 and 2 are on the diagonal, shared by both triangles
        let v0 = c.id_of(&[0]).unwrap();
        assert_eq!(c.superstar(v0, 2).unwrap().len(), 2);
        let v1 = c.id_of(&[1]).unwrap();
        assert_eq!(c.superstar(v1, 2).unwrap().len(), 1);
    }

    #[test]
    fn orientation_parity_on_reference_triangle() {
        let c = SimplicialComplex::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let t = c.cell_ids()[0];
        let f12 = c.id_of(&[1, 2]).unwrap();
        let f02 = c.id_of(&[0, 2]).unwrap();
        let f01 = c.id_of(&[0, 1]).unwrap();
        assert_eq!(c.orientation_sign(f12, t).unwrap(), 1.0);
        assert_eq!(c.orientation_sign(f02, t).unwrap(), -1.0);
        assert_eq!(c.orientation_sign(f01, t).unwrap(), 1.0);
    }

    #[test]
    fn interior_facets_get_opposite_signs() {
        for c in [unit_square_2(), unit_cube_kuhn_6(), square_hole_16()] {
            let n = c.ambient_dim();
            for &f in c.simplices_of_dim(n - 1) {
                let cells = c.cells_containing(f);
                if cells.len() == 2 {
                    let s0 = c.orientation_sign(f, cells[0]).unwrap();
                    let s1 = c.orientation_sign(f, cells[1]).unwrap();
                    assert_eq!(s0 * s1, -1.0);
                }
            }
        }
    }

    #[test]
    fn shape_measure_examples() {
        // equilateral triangle: h = 1, area = sqrt(3)/4
        let c = SimplicialComplex::build(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.5, 3f64.sqrt() / 2.0],
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        // edges have shape measure h/h = 1; the triangle dominates
        assert_relative_eq!(
            c.shape_measure(),
            1.0 / (3f64.sqrt() / 4.0),
            epsilon = 1e-12
        );

        // right triangle with unit legs: h = sqrt(2), area = 1/2
        let c = SimplicialComplex::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        assert_relative_eq!(c.shape_measure(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn refinement_counts_and_diameter() {
        let c = unit_square_2();
        let r1 = c.refine_uniform().unwrap();
        assert_eq!(r1.cell_ids().len(), 8);
        let r2 = r1.refine_uniform().unwrap();
        assert_eq!(r2.cell_ids().len(), 32);
        assert_relative_eq!(r1.h_max(), c.h_max() / 2.0, epsilon = 1e-12);
        assert_relative_eq!(r2.h_max(), c.h_max() / 4.0, epsilon = 1e-12);
        // red refinement cannot worsen the triangle shape measure
        assert!(r2.shape_measure() <= c.shape_measure() + 1e-9);

        let k = unit_cube_kuhn_6();
        let k1 = k.refine_uniform().unwrap();
        assert_eq!(k1.cell_ids().len(), 48);
        assert!(k1.h_max() <= k.h_max() / 2.0 + 1e-12);
    }

    #[test]
    fn shape_measure_stays_bounded_under_refinement() {
        let mut c = unit_cube_kuhn_6();
        let mu0 = c.shape_measure();
        for _ in 0..3 {
            c = c.refine_uniform().unwrap();
            // Bey-style subdivision keeps finitely many similarity classes
            assert!(c.shape_measure() <= 4.0 * mu0);
        }
        let mut c = unit_square_2();
        let mu0 = c.shape_measure();
        for _ in 0..5 {
            c = c.refine_uniform().unwrap();
            assert!(c.shape_measure() <= mu0 + 1e-9);
        }
    }

    #[test]
    fn boundary_selection() {
        let c = unit_square_2();
        let all = c.boundary_all();
        // whole boundary: 4 edges + 4 vertices
        assert_eq!(all.member_ids.len(), 8);
        let none = c.boundary_subcomplex(|_| false);
        assert!(none.is_empty());
        let bottom = c.boundary_subcomplex(|x| x[1].abs() < 1e-12);
        // one edge and its two vertices
        assert_eq!(bottom.member_ids.len(), 3);
    }

    #[test]
    fn face_connection_paths() {
        let c = unit_square_2();
        let t0 = c.cell_ids()[0];
        let t1 = c.cell_ids()[1];
        let diag = c.id_of(&[0, 2]).unwrap();
        assert!(c.face_connection(t0, t0, diag).unwrap().is_empty());
        assert_eq!(c.face_connection(t0, t1, diag).unwrap(), vec![t1]);
    }

    #[test]
    fn face_connection_in_a_vertex_star() {
        // six triangles around a central vertex
        let mut vertices = vec![vec![0.0, 0.0]];
        for i in 0..6 {
            let a = std::f64::consts::PI / 3.0 * i as f64;
            vertices.push(vec![a.cos(), a.sin()]);
        }
        let cells = (0..6).map(|i| vec![0, 1 + i, 1 + (i + 1) % 6]).collect();
        let c = SimplicialComplex::build(vertices, cells).unwrap();
        let center = c.id_of(&[0]).unwrap();
        let star = c.superstar(center, 2).unwrap();
        assert_eq!(star.len(), 6);
        let path = c.face_connection(star[0], star[3], center).unwrap();
        assert!(path.len() <= 3, "path {path:?}");
        // a BFS over the full star graph can do no better
        assert!(!path.is_empty());
    }

    #[test]
    fn representatives_invariants() {
        let c = unit_square_2();
        let u = c.boundary_subcomplex(|x| x[1].abs() < 1e-12);
        let reps = c.choose_representatives(&u).unwrap();
        for s in 0..c.num_simplices() {
            let Some((f, t)) = reps.facet_and_cell[s] else {
                assert_eq!(c.simplex(s).dim, c.ambient_dim());
                continue;
            };
            assert!(c.is_subsimplex(s, f));
            assert!(c.is_subsimplex(f, t));
            if u.contains(s) {
                assert!(u.contains(f));
            }
            if c.simplex(s).dim == c.ambient_dim() - 1 {
                // a facet represents itself
                assert_eq!(f, s);
            }
        }
    }

    #[test]
    fn closure_property() {
        let c = unit_cube_kuhn_6();
        for s in 0..c.num_simplices() {
            for sub in c.all_subsimplices(s) {
                // ids exist for every subsimplex
                assert!(sub < c.num_simplices());
            }
        }
    }

    #[test]
    fn rejects_degenerate_and_nonmanifold_input() {
        let err = SimplicialComplex::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![vec![0, 1, 2]],
        );
        assert!(matches!(err, Err(MeshError::DegenerateCell { .. })));

        // three triangles sharing one edge
        let err = SimplicialComplex::build(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
                vec![-1.0, 0.5],
            ],
            vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]],
        );
        assert!(matches!(err, Err(MeshError::NonManifoldFacet { .. })));

        // bowtie: two triangles sharing only a vertex star that is not
        // face-connected
        let err = SimplicialComplex::build(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                vec![1.0, -1.0],
                vec![-1.0, 1.0],
                vec![-1.0, -1.0],
            ],
            vec![vec![0, 1, 2], vec![0, 3, 4]],
        );
        assert!(matches!(err, Err(MeshError::NotFaceConnected { .. })));
    }

    #[test]
    fn mesh_file_round_trip() {
        let c = unit_square_2();
        let text = serde_json::to_string(&c.to_mesh_file()).unwrap();
        let c2 = SimplicialComplex::from_json(&text).unwrap();
        assert_eq!(c2.cell_ids().len(), 2);
        assert_eq!(c2.num_vertices(), 4);
    }

    #[test]
    fn square_hole_is_not_simply_connected() {
        let c = square_hole_16();
        assert_eq!(c.cell_ids().len(), 16);
        // Euler characteristic of an annulus-like region is 0
        let euler = c.simplices_of_dim(0).len() as i64 - c.simplices_of_dim(1).len() as i64
            + c.simplices_of_dim(2).len() as i64;
        assert_eq!(euler, 0);
    }

    #[test]
    fn vertex_diameter_diagnostic() {
        let c = unit_square_2();
        let v0 = c.id_of(&[0]).unwrap();
        assert_relative_eq!(c.vertex_diameter(v0), 1.0, epsilon = 1e-12);
    }
}
