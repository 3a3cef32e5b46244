use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use faer::c64;
use faer::sparse::linalg::solvers::SymbolicLlt;

use crate::error::{Error, Result};
use crate::geometry::{ElementKind, Mesh};

use super::element;
use super::sparse::{Pattern, SparseMatrix};

/// Numbering of the free degrees of freedom of a mesh.
///
/// Constrained nodes get no unknown. On a cell mesh with quasi-periodic
/// identification, every node of the `z = +1/2` face shares the unknown of
/// its `z = -1/2` partner and carries the Bloch factor `e^{iη}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    node_dof: Vec<Option<usize>>,
    node_winding: Vec<i8>,
    n_free: usize,
    constrained: BTreeSet<usize>,
}

impl DofMap {
    /// Builds the numbering. `extra` lists nodes constrained on top of the
    /// Dirichlet-tagged ones.
    pub fn new(mesh: &Mesh, periodic: bool, extra: &[usize]) -> Result<Self> {
        let n = mesh.n_nodes();
        let mut fixed = mesh.dirichlet_nodes();
        for &i in extra {
            if i >= n {
                return Err(Error::Precondition(format!("constrained node {i} out of range")));
            }
            fixed[i] = true;
        }
        let mut partner = vec![None; n];
        if periodic {
            if mesh.periodic_pairing.is_empty() {
                return Err(Error::Config(
                    "a Floquet parameter needs a mesh with periodic pairing".into(),
                ));
            }
            for (lo, hi) in mesh.periodic_pairs() {
                partner[hi] = Some(lo);
                if fixed[lo] || fixed[hi] {
                    fixed[lo] = true;
                    fixed[hi] = true;
                }
            }
        }
        let mut node_dof = vec![None; n];
        let mut node_winding = vec![0i8; n];
        let mut n_free = 0;
        for i in 0..n {
            if fixed[i] || partner[i].is_some() {
                continue;
            }
            node_dof[i] = Some(n_free);
            n_free += 1;
        }
        for i in 0..n {
            if let Some(lo) = partner[i] {
                node_dof[i] = node_dof[lo];
                node_winding[i] = 1;
            }
        }
        let constrained = (0..n).filter(|&i| fixed[i]).collect();
        Ok(Self {
            node_dof,
            node_winding,
            n_free,
            constrained,
        })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    pub fn constrained(&self) -> &BTreeSet<usize> {
        &self.constrained
    }

    /// Expands a vector of free unknowns to nodal values, applying the Bloch
    /// factor on the `z = +1/2` face.
    pub fn expand(&self, u: &[c64], eta: f64) -> Vec<c64> {
        let phase = c64::new(eta.cos(), eta.sin());
        self.node_dof
            .iter()
            .zip(&self.node_winding)
            .map(|(d, w)| match d {
                Some(d) if *w == 1 => u[*d] * phase,
                Some(d) => u[*d],
                None => c64::new(0.0, 0.0),
            })
            .collect()
    }
}

/// The η-independent pieces of the cell forms.
///
/// The matrices of the quasi-periodic problem are
/// `A(η) = A₀ + e^{iη} A₊ + e^{-iη} A₋` with `A₋ = A₊ᵀ`, all on one
/// sparsity pattern, so a single symbolic factorization serves every η.
#[derive(Debug)]
pub struct BlochForms {
    dofs: DofMap,
    pattern: Pattern,
    stiffness: [Vec<f64>; 3],
    mass: [Vec<f64>; 3],
    periodic: bool,
    symbolic: Arc<OnceLock<SymbolicLlt<usize>>>,
}

impl BlochForms {
    /// Assembles the forms with Dirichlet nodes (plus `extra`) eliminated.
    pub fn new(mesh: &Mesh, periodic: bool, extra: &[usize]) -> Result<Self> {
        let dofs = DofMap::new(mesh, periodic, extra)?;
        let npe = mesh.kind.nodes_per_element();
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); dofs.n_free];
        let mut local = Vec::with_capacity(npe);
        for el in mesh.elements() {
            local.clear();
            local.extend(el.iter().filter_map(|&i| dofs.dof(i)));
            for &c in &local {
                cols[c].extend_from_slice(&local);
            }
        }
        let pattern = Pattern::from_columns(cols);
        let nnz = pattern.nnz();
        let mut stiffness = [vec![0.0; nnz], vec![0.0; nnz], vec![0.0; nnz]];
        let mut mass = [vec![0.0; nnz], vec![0.0; nnz], vec![0.0; nnz]];
        let mut add = |el: &[usize], k: &dyn Fn(usize, usize) -> f64, m: &dyn Fn(usize, usize) -> f64| {
            for (a, &na) in el.iter().enumerate() {
                let Some(r) = dofs.dof(na) else { continue };
                for (b, &nb) in el.iter().enumerate() {
                    let Some(c) = dofs.dof(nb) else { continue };
                    // entry (r, c) picks up conj(phase_a) * phase_b
                    let slot = match dofs.node_winding[nb] - dofs.node_winding[na] {
                        0 => 0,
                        1 => 1,
                        _ => 2,
                    };
                    let p = pattern.position(r, c);
                    stiffness[slot][p] += k(a, b);
                    mass[slot][p] += m(a, b);
                }
            }
        };
        for (e, el) in mesh.elements().enumerate() {
            match mesh.kind {
                ElementKind::Quad4 => {
                    let (k, m) = element::quad_matrices(&mesh.quad_coords(e));
                    add(el, &|a, b| k[a][b], &|a, b| m[a][b]);
                }
                ElementKind::Hex8 => {
                    let (k, m) = element::hex_matrices(&mesh.hex_coords(e));
                    add(el, &|a, b| k[a][b], &|a, b| m[a][b]);
                }
            }
        }
        Ok(Self {
            dofs,
            pattern,
            stiffness,
            mass,
            periodic,
            symbolic: Arc::new(OnceLock::new()),
        })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// The pencil at Floquet parameter `eta` (`None` for a non-periodic
    /// problem).
    pub fn pencil(&self, eta: Option<f64>) -> Result<HermitianPencil> {
        if eta.is_some() != self.periodic {
            return Err(Error::Config(if self.periodic {
                "periodic forms need a Floquet parameter".into()
            } else {
                "a Floquet parameter was given for a non-periodic problem".into()
            }));
        }
        let t = eta.unwrap_or(0.0);
        let (s, c) = t.sin_cos();
        let plus = c64::new(c, s);
        let minus = c64::new(c, -s);
        let combine = |parts: &[Vec<f64>; 3]| -> Vec<c64> {
            (0..self.pattern.nnz())
                .map(|k| c64::new(parts[0][k], 0.0) + plus * parts[1][k] + minus * parts[2][k])
                .collect()
        };
        Ok(HermitianPencil {
            eta,
            stiffness: self.pattern.with_values(combine(&self.stiffness)),
            mass: self.pattern.with_values(combine(&self.mass)),
            constrained_dofs: self.dofs.constrained.clone(),
            symbolic: Arc::clone(&self.symbolic),
        })
    }
}

/// Stiffness and mass of a generalized Hermitian eigenproblem restricted
/// to the free degrees of freedom.
#[derive(Debug, Clone)]
pub struct HermitianPencil {
    pub eta: Option<f64>,
    pub stiffness: SparseMatrix<c64>,
    pub mass: SparseMatrix<c64>,
    /// Mesh nodes eliminated by Dirichlet conditions.
    pub constrained_dofs: BTreeSet<usize>,
    pub(crate) symbolic: Arc<OnceLock<SymbolicLlt<usize>>>,
}

impl HermitianPencil {
    pub fn n_free(&self) -> usize {
        self.stiffness.n()
    }

    /// Pencil from explicit matrices on a common pattern.
    pub fn from_matrices(stiffness: SparseMatrix<c64>, mass: SparseMatrix<c64>) -> Result<Self> {
        if stiffness.n() != mass.n() || stiffness.pattern() != mass.pattern() {
            return Err(Error::Precondition(
                "stiffness and mass must share one sparsity pattern".into(),
            ));
        }
        Ok(Self {
            eta: None,
            stiffness,
            mass,
            constrained_dofs: BTreeSet::new(),
            symbolic: Arc::new(OnceLock::new()),
        })
    }

    /// Pencil of real symmetric dense matrices (small problems and tests).
    pub fn from_dense(stiffness: &[Vec<f64>], mass: &[Vec<f64>]) -> Result<Self> {
        let n = stiffness.len();
        let union: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        if stiffness[r][c] != 0.0 || mass[r][c] != 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let p = SparseMatrix::from_dense(&union).pattern();
        let slots: Vec<(usize, usize)> = (0..n)
            .flat_map(|c| {
                (p.col_ptr[c]..p.col_ptr[c + 1])
                    .map(|k| (p.row_idx[k], c))
                    .collect::<Vec<_>>()
            })
            .collect();
        let pick = |d: &[Vec<f64>]| -> SparseMatrix<c64> {
            p.with_values(slots.iter().map(|&(r, c)| c64::new(d[r][c], 0.0)).collect())
        };
        Self::from_matrices(pick(stiffness), pick(mass))
    }

    /// Largest entrywise deviation `max |A - A*|` over both matrices.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in [&self.stiffness, &self.mass] {
            for (r, c, v) in a.entries() {
                worst = worst.max((v - a.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Largest imaginary part of a stiffness entry.
    pub fn max_imaginary_stiffness(&self) -> f64 {
        self.stiffness.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}

/// Assembles the pencil of a mesh. With `eta` the mesh must be a cell mesh
/// and the quasi-periodic identification is applied.
pub fn assemble(mesh: &Mesh, eta: Option<f64>) -> Result<HermitianPencil> {
    if eta.is_some() && mesh.dimension() != 3 {
        return Err(Error::Config(
            "a Floquet parameter only applies to 3D cell meshes".into(),
        ));
    }
    BlochForms::new(mesh, eta.is_some(), &[])?.pencil(eta)
}

/// Real stiffness of the Laplacian with Dirichlet data `g` lifted to the
/// right-hand side: returns `(K_ff, -K_fc g_c, dofs)`. Nodes in `extra` are
/// constrained along with the Dirichlet-tagged ones.
pub fn laplace_system(mesh: &Mesh, g: &[f64], extra: &[usize]) -> Result<(SparseMatrix<f64>, Vec<f64>, DofMap)> {
    let forms = BlochForms::new(mesh, false, extra)?;
    let dofs = forms.dofs.clone();
    let k = forms.pattern.with_values(forms.stiffness[0].clone());
    let mut rhs = vec![0.0; dofs.n_free];
    for (e, el) in mesh.elements().enumerate() {
        let ke = match mesh.kind {
            ElementKind::Quad4 => {
                let (k, _) = element::quad_matrices(&mesh.quad_coords(e));
                k.iter().map(|r| r.to_vec()).collect::<Vec<_>>()
            }
            ElementKind::Hex8 => {
                let (k, _) = element::hex_matrices(&mesh.hex_coords(e));
                k.iter().map(|r| r.to_vec()).collect::<Vec<_>>()
            }
        };
        for (a, &na) in el.iter().enumerate() {
            let Some(r) = dofs.dof(na) else { continue };
            for (b, &nb) in el.iter().enumerate() {
                if dofs.dof(nb).is_none() && g[nb] != 0.0 {
                    rhs[r] -= ke[a][b] * g[nb];
                }
            }
        }
    }
    Ok((k, rhs, dofs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cell_mesh, build_cross_section_mesh, CrossSectionShape};

    #[test]
    fn real_at_zero_and_hermitian_everywhere() {
        let mesh = build_cell_mesh(&CrossSectionShape::unit_square(), None, 4, 0).unwrap();
        let forms = BlochForms::new(&mesh, true, &[]).unwrap();
        let p0 = forms.pencil(Some(0.0)).unwrap();
        assert_eq!(p0.max_imaginary_stiffness(), 0.0);
        for eta in [0.3, 1.0, std::f64::consts::PI, 5.9] {
            let p = forms.pencil(Some(eta)).unwrap();
            assert_eq!(p.hermitian_defect(), 0.0);
            assert!(p.max_imaginary_stiffness() > 0.0);
        }
    }

    #[test]
    fn eta_on_2d_mesh_is_config_error() {
        let mesh = build_cross_section_mesh(&CrossSectionShape::unit_square(), 4).unwrap();
        assert!(matches!(assemble(&mesh, Some(1.0)), Err(Error::Config(_))));
    }

    #[test]
    fn free_dofs_of_square() {
        let mesh = build_cross_section_mesh(&CrossSectionShape::unit_square(), 4).unwrap();
        let p = assemble(&mesh, None).unwrap();
        assert_eq!(p.n_free(), 9);
        assert_eq!(p.constrained_dofs.len(), 16);
        // the center node touches four quads of side 1/4
        assert!((p.mass.get(4, 4).re - 1.0 / 36.0).abs() < 1e-15);
        assert!((p.stiffness.get(4, 4).re - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn periodic_cell_unknowns() {
        let mesh = build_cell_mesh(&CrossSectionShape::unit_square(), None, 4, 0).unwrap();
        let p = assemble(&mesh, Some(1.0)).unwrap();
        // 3x3 interior nodes per layer, 4 distinct layers
        assert_eq!(p.n_free(), 36);
    }
}
