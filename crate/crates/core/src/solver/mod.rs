//! Piecewise-linear finite elements for `∇·(γ∇u) = 0` on slab meshes, Dirichlet
//! energies and the energy gap between the cavity-free and the cavity problem.

mod manufactured;
mod sparse;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use manufactured::{convergence_errors, harmonic_cubic, l2_error, solve_manufactured};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::geometry::{NestedMeshPair, TriMesh};
use crate::probe::{BoundaryData, GammaField};

/// `γ |T| ∇λ_i·∇λ_j` for the P1 hat functions of one triangle, `γ` taken at the centroid.
pub fn element_stiffness(mesh: &TriMesh, t: usize, gamma: &GammaField) -> [[f64; 3]; 3] {
    let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i]);
    let g = gamma.eval(mesh.centroid(t));
    element_stiffness_raw([a, b, c], g)
}

fn element_stiffness_raw(p: [[f64; 2]; 3], g: f64) -> [[f64; 3]; 3] {
    let e = [0, 1, 2].map(|i| {
        let (u, v) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        [v[0] - u[0], v[1] - u[1]]
    });
    let twice_area = e[2][0] * e[0][1] - e[2][1] * e[0][0];
    let scale = g / (2.0 * twice_area);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = scale * (e[i][0] * e[j][0] + e[i][1] * e[j][1]);
        }
    }
    k
}

/// Stiffness matrix over all mesh nodes, restricted to the listed triangles.
pub fn assemble_matrix(mesh: &TriMesh, gamma: &GammaField, triangles: &[usize], n_nodes: usize) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * triangles.len());
    for &t in triangles {
        let k = element_stiffness(mesh, t, gamma);
        let v = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((v[i], v[j], k[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n_nodes, n_nodes, &triplets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Interior(usize),
    Dirichlet(usize),
}

/// Assembled and factorized system for one `(mesh, γ)`.
///
/// Dirichlet nodes are the slab faces and the lateral truncation; cavity edges
/// carry the natural zero-flux condition.
pub struct StiffnessSystem {
    pub stiffness: CsrMatrix,
    pub dirichlet: Vec<usize>,
    pub interior: Vec<usize>,
    pub mesh_hash: u64,
    pub gamma_hash: u64,
    slots: Vec<Slot>,
    k_ii: CsrMatrix,
    llt: Option<Llt<usize, f64>>,
}

impl std::fmt::Debug for StiffnessSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StiffnessSystem")
            .field("n_nodes", &self.n_nodes())
            .field("n_dirichlet", &self.dirichlet.len())
            .field("n_interior", &self.interior.len())
            .field("nnz", &self.stiffness.nnz())
            .finish()
    }
}

impl StiffnessSystem {
    pub fn n_nodes(&self) -> usize {
        self.slots.len()
    }

    /// Solves the interior block in place, with one step of iterative refinement.
    fn solve_interior(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = self.interior.len();
        let Some(llt) = &self.llt else {
            return rhs.iter().map(|_| Vec::new()).collect();
        };
        let ncol = rhs.len();
        let mut x = Mat::<f64>::from_fn(m, ncol, |i, j| rhs[j][i]);
        llt.solve_in_place(x.as_mut());
        let cols: Vec<Vec<f64>> = (0..ncol).map(|j| (0..m).map(|i| x[(i, j)]).collect()).collect();
        let residuals: Vec<Vec<f64>> = cols
            .iter()
            .zip(rhs)
            .map(|(c, b)| {
                let kc = self.k_ii.matvec(c);
                b.iter().zip(kc).map(|(bi, ki)| bi - ki).collect()
            })
            .collect();
        let mut r = Mat::<f64>::from_fn(m, ncol, |i, j| residuals[j][i]);
        llt.solve_in_place(r.as_mut());
        cols.into_iter()
            .enumerate()
            .map(|(j, c)| c.into_iter().enumerate().map(|(i, v)| v + r[(i, j)]).collect())
            .collect()
    }

    fn check_data(&self, data: &BoundaryData) -> Result<()> {
        if data.nodes != self.dirichlet {
            return Err(Error::Invalid(format!(
                "boundary data covers {} nodes, system expects {} Dirichlet nodes",
                data.nodes.len(),
                self.dirichlet.len()
            )));
        }
        Ok(())
    }

    /// Solves for real Dirichlet data given per Dirichlet node, in `self.dirichlet` order.
    fn solve_real_columns(&self, cols: &[&[f64]]) -> Vec<Vec<f64>> {
        let rhs: Vec<Vec<f64>> = cols
            .iter()
            .map(|f| {
                self.interior
                    .iter()
                    .map(|&i| {
                        -self
                            .stiffness
                            .row(i)
                            .filter_map(|(j, v)| match self.slots[j] {
                                Slot::Dirichlet(k) => Some(v * f[k]),
                                Slot::Interior(_) => None,
                            })
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let sol = self.solve_interior(&rhs);
        cols.iter()
            .zip(sol)
            .map(|(f, xi)| {
                self.slots
                    .iter()
                    .map(|s| match *s {
                        Slot::Dirichlet(k) => f[k],
                        Slot::Interior(k) => xi[k],
                    })
                    .collect()
            })
            .collect()
    }

    /// Complex solution with the given Dirichlet data.
    pub fn solve_dirichlet(&self, data: &BoundaryData) -> Result<FieldSolution> {
        self.check_data(data)?;
        let re: Vec<f64> = data.values.iter().map(|z| z.re).collect();
        let im: Vec<f64> = data.values.iter().map(|z| z.im).collect();
        let mut out = self.solve_real_columns(&[&re, &im]).into_iter();
        Ok(FieldSolution { re: out.next().unwrap(), im: out.next().unwrap() })
    }

    /// Zero Dirichlet data and a nodal load `b` (only interior entries are used).
    fn solve_load(&self, b_re: &[f64], b_im: &[f64]) -> FieldSolution {
        let pick = |b: &[f64]| self.interior.iter().map(|&i| b[i]).collect::<Vec<f64>>();
        let mut sol = self.solve_interior(&[pick(b_re), pick(b_im)]).into_iter();
        let (xr, xi) = (sol.next().unwrap(), sol.next().unwrap());
        let expand = |x: &[f64]| {
            self.slots
                .iter()
                .map(|s| match *s {
                    Slot::Dirichlet(_) => 0.0,
                    Slot::Interior(k) => x[k],
                })
                .collect::<Vec<f64>>()
        };
        FieldSolution { re: expand(&xr), im: expand(&xi) }
    }

    /// `∫ γ |∇u_h|²`, the sum of the real and imaginary quadratic forms.
    pub fn dirichlet_energy(&self, field: &FieldSolution) -> Result<f64> {
        if field.len() != self.n_nodes() {
            return Err(Error::MeshMismatch { field: field.len(), mesh: self.n_nodes() });
        }
        Ok(self.stiffness.quadratic_form(&field.re) + self.stiffness.quadratic_form(&field.im))
    }

    /// Relative residual `‖K_II u_I + K_IΦ f‖ / ‖K_IΦ f‖` of a computed solution.
    pub fn relative_residual(&self, field: &FieldSolution) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for x in [&field.re, &field.im] {
            for &i in &self.interior {
                let mut r = 0.0;
                let mut b = 0.0;
                for (j, v) in self.stiffness.row(i) {
                    r += v * x[j];
                    if let Slot::Dirichlet(_) = self.slots[j] {
                        b += v * x[j];
                    }
                }
                num += r * r;
                den += b * b;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Weak DtN pairing `⟨Λ f, g⟩ = Σ_{j ∈ Φ} g_j (K u_f)_j` for real data on the Dirichlet nodes.
    pub fn dtn_pairing(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if f.len() != self.dirichlet.len() || g.len() != self.dirichlet.len() {
            return Err(Error::Invalid("DtN data must cover every Dirichlet node".into()));
        }
        let u = self.solve_real_columns(&[f]).pop().unwrap();
        let ku = self.stiffness.matvec(&u);
        Ok(self.dirichlet.iter().zip(g).map(|(&j, gj)| gj * ku[j]).sum())
    }
}

/// Assembles `K` and factorizes its interior block.
pub fn assemble(mesh: &TriMesh, gamma: &GammaField) -> Result<StiffnessSystem> {
    let n = mesh.vertices.len();
    let all: Vec<usize> = (0..mesh.triangles.len()).collect();
    let stiffness = assemble_matrix(mesh, gamma, &all, n);
    let dirichlet = mesh.dirichlet_nodes();
    let mut slots = vec![Slot::Interior(usize::MAX); n];
    for (k, &i) in dirichlet.iter().enumerate() {
        slots[i] = Slot::Dirichlet(k);
    }
    let mut interior = Vec::new();
    for (i, s) in slots.iter_mut().enumerate() {
        if let Slot::Interior(_) = s {
            *s = Slot::Interior(interior.len());
            interior.push(i);
        }
    }
    let scale = stiffness.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if stiffness.asymmetry() > 1e-12 * scale.max(1.0) {
        return Err(Error::NotSpd("assembled stiffness is not symmetric".into()));
    }
    let mut triplets = Vec::new();
    let mut k_trip = Vec::new();
    for (a, &i) in interior.iter().enumerate() {
        for (j, v) in stiffness.row(i) {
            if let Slot::Interior(b) = slots[j] {
                k_trip.push((a, b, v));
                triplets.push(Triplet::new(a, b, v));
            }
        }
    }
    let m = interior.len();
    let k_ii = CsrMatrix::from_triplets(m, m, &k_trip);
    let llt = if m == 0 {
        None
    } else {
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &triplets)
            .map_err(|e| Error::NotSpd(format!("{e:?}")))?;
        let sym = SymbolicLlt::try_new(a.symbolic(), Side::Lower).map_err(|e| Error::NotSpd(format!("{e:?}")))?;
        let llt = Llt::try_new_with_symbolic(sym, a.as_ref(), Side::Lower)
            .map_err(|e| Error::NotSpd(format!("Cholesky factorization failed: {e:?}")))?;
        Some(llt)
    };
    Ok(StiffnessSystem {
        stiffness,
        dirichlet,
        interior,
        mesh_hash: mesh.content_hash(),
        gamma_hash: gamma.content_hash(),
        slots,
        k_ii,
        llt,
    })
}

/// Complex nodal field stored as two real vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl FieldSolution {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn value(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    /// Writes `x,y,re,im` per node.
    pub fn write_csv(&self, mesh: &TriMesh, path: &Path) -> Result<()> {
        if self.len() != mesh.vertices.len() {
            return Err(Error::MeshMismatch { field: self.len(), mesh: mesh.vertices.len() });
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,y,re,im")?;
        for (i, x) in mesh.vertices.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", x[0], x[1], self.re[i], self.im[i])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Energy gap and its two domain integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGapResult {
    /// `⟨(Λ₀ - Λ_D) f̄, f⟩`, evaluated as a boundary flux pairing.
    pub e: f64,
    pub e_full: f64,
    pub e_holed: f64,
    /// `∫_D γ |∇v₀|²` over the hole triangles.
    pub term_d: f64,
    /// `∫_{Ω∖D} γ |∇(u - v₀)|²`.
    pub term_diff: f64,
    /// `|E - (term_D + term_diff)| / max(|E|, 1e-300)`.
    pub identity_residual: f64,
}

/// Factorized systems for a nested mesh pair plus the hole-triangle stiffness.
pub struct PairSystem {
    pub full: Arc<StiffnessSystem>,
    pub holed: Arc<StiffnessSystem>,
    hole: CsrMatrix,
    has_cavity: bool,
}

impl PairSystem {
    pub fn assemble(pair: &NestedMeshPair, gamma: &GammaField) -> Result<Self> {
        let full = Arc::new(assemble(&pair.full, gamma)?);
        let holed = if pair.has_cavity() { Arc::new(assemble(&pair.holed, gamma)?) } else { full.clone() };
        Self::from_parts(pair, gamma, full, holed)
    }

    /// Builds from already factorized systems, e.g. taken from a [`FactorCache`].
    pub fn from_parts(
        pair: &NestedMeshPair,
        gamma: &GammaField,
        full: Arc<StiffnessSystem>,
        holed: Arc<StiffnessSystem>,
    ) -> Result<Self> {
        pair.validate_nesting()?;
        if full.dirichlet != holed.dirichlet {
            return Err(Error::NotNested("Dirichlet node sets differ".into()));
        }
        let hole = assemble_matrix(&pair.full, gamma, &pair.hole_triangles, pair.full.vertices.len());
        Ok(Self { full, holed, hole, has_cavity: pair.has_cavity() })
    }

    pub fn energy_gap(&self, data: &BoundaryData) -> Result<EnergyGapResult> {
        Ok(self.energy_gap_fields(data)?.0)
    }

    /// Energy gap together with the cavity-free solution `v₀` and the cavity solution `u`.
    ///
    /// The scattered field `z = v₀ - u` on the holed mesh solves the holed problem
    /// with zero Dirichlet data and load `-K_D v₀`, so no large energies are subtracted.
    pub fn energy_gap_fields(&self, data: &BoundaryData) -> Result<(EnergyGapResult, FieldSolution, FieldSolution)> {
        let v0 = self.full.solve_dirichlet(data)?;
        let e_full = self.full.dirichlet_energy(&v0)?;
        if !self.has_cavity {
            let result = EnergyGapResult {
                e: 0.0,
                e_full,
                e_holed: e_full,
                term_d: 0.0,
                term_diff: 0.0,
                identity_residual: 0.0,
            };
            return Ok((result, v0.clone(), v0));
        }
        let nh = self.holed.n_nodes();
        let kd_re = self.hole.matvec(&v0.re);
        let kd_im = self.hole.matvec(&v0.im);
        let load_re: Vec<f64> = kd_re[..nh].iter().map(|v| -v).collect();
        let load_im: Vec<f64> = kd_im[..nh].iter().map(|v| -v).collect();
        let z = self.holed.solve_load(&load_re, &load_im);
        let u = FieldSolution {
            re: (0..nh).map(|i| v0.re[i] - z.re[i]).collect(),
            im: (0..nh).map(|i| v0.im[i] - z.im[i]).collect(),
        };
        let e_holed = self.holed.dirichlet_energy(&u)?;
        let term_d = self.hole.quadratic_form(&v0.re) + self.hole.quadratic_form(&v0.im);
        let term_diff = self.holed.dirichlet_energy(&z)?;
        let kz_re = self.holed.stiffness.matvec(&z.re);
        let kz_im = self.holed.stiffness.matvec(&z.im);
        let e: f64 = self
            .holed
            .dirichlet
            .iter()
            .zip(&data.values)
            .map(|(&j, f)| f.re * kz_re[j] + f.im * kz_im[j])
            .sum();
        let identity_residual = (e - (term_d + term_diff)).abs() / e.abs().max(1e-300);
        Ok((EnergyGapResult { e, e_full, e_holed, term_d, term_diff, identity_residual }, v0, u))
    }
}

/// One-shot energy gap: assembles both systems and evaluates the gap for `data`.
pub fn energy_gap(pair: &NestedMeshPair, gamma: &GammaField, data: &BoundaryData) -> Result<EnergyGapResult> {
    PairSystem::assemble(pair, gamma)?.energy_gap(data)
}

/// Factorizations keyed by `(mesh hash, γ hash)`.
#[derive(Default)]
pub struct FactorCache {
    entries: Mutex<HashMap<(u64, u64), Arc<StiffnessSystem>>>,
    hits: Mutex<usize>,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_assemble(&self, mesh: &TriMesh, gamma: &GammaField) -> Result<Arc<StiffnessSystem>> {
        let key = (mesh.content_hash(), gamma.content_hash());
        if let Some(sys) = self.entries.lock().expect("cache lock").get(&key) {
            *self.hits.lock().expect("cache lock") += 1;
            return Ok(sys.clone());
        }
        let sys = Arc::new(assemble(mesh, gamma)?);
        self.entries.lock().expect("cache lock").insert(key, sys.clone());
        Ok(sys)
    }

    pub fn pair(&self, pair: &NestedMeshPair, gamma: &GammaField) -> Result<PairSystem> {
        let full = self.get_or_assemble(&pair.full, gamma)?;
        let holed = self.get_or_assemble(&pair.holed, gamma)?;
        PairSystem::from_parts(pair, gamma, full, holed)
    }

    pub fn hits(&self) -> usize {
        *self.hits.lock().expect("cache lock")
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
