//! Finite-difference operators of the coupled system and its block generator.
//!
//! The state `U = (u, v, y, z)` lives on interior nodes. With `K` the Dirichlet
//! stiffness of `-Δ`, `K_b` the flux-form stiffness of `-div(b ∇·)` and `C` the
//! diagonal coupling, the Kelvin-Voigt generator reads
//!
//! ```text
//! A (u, v, y, z) = (v, -a K u - K_b v - C z, z, -K y + C v)
//! ```
//!
//! The energy inner product is the lumped one,
//! `⟨U, W⟩ = h^d (a uᵀK u' + v·v' + yᵀK y' + z·z')`, so that
//! `Re⟨A U, U⟩ = -h^d vᵀ K_b v`.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{CoefficientField, Grid};
use crate::linalg::{BandedMatrix, CsrMatrix};

/// Discrete `-Δ` with Dirichlet conditions: centered stencil scaled by `1/h²`.
pub fn laplacian_stiffness(grid: &Grid) -> CsrMatrix {
    let nodes = grid.num_nodes();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut t = Vec::with_capacity(nodes * (1 + 2 * grid.dim()));
    for p in 0..nodes {
        t.push((p, p, 2.0 * grid.dim() as f64 * inv_h2));
        for &axis in grid.axes() {
            for forward in [false, true] {
                if let Some(q) = grid.neighbor(p, axis, forward) {
                    t.push((p, q, -inv_h2));
                }
            }
        }
    }
    CsrMatrix::from_triplets(nodes, nodes, t)
}

/// Flux-form stiffness of `-div(b ∇·)`.
///
/// Each edge between adjacent nodes carries the mean of the two nodal values;
/// an edge to the boundary carries the value of its interior endpoint, so a
/// constant field reproduces `b · laplacian_stiffness` exactly.
pub fn weighted_stiffness(grid: &Grid, field: &CoefficientField) -> Result<CsrMatrix> {
    check_field(grid, field, "weighted stiffness field")?;
    if field.min() < 0.0 {
        return Err(Error::param("b", format!("field must be nonnegative, min is {}", field.min())));
    }
    let nodes = grid.num_nodes();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut t = Vec::with_capacity(nodes * (1 + 2 * grid.dim()));
    for p in 0..nodes {
        let bp = field.value(p);
        for &axis in grid.axes() {
            // each interior edge is visited once, from its backward endpoint
            match grid.neighbor(p, axis, true) {
                Some(q) => {
                    let w = 0.5 * (bp + field.value(q)) * inv_h2;
                    if w != 0.0 {
                        t.extend([(p, p, w), (q, q, w), (p, q, -w), (q, p, -w)]);
                    }
                }
                None => t.push((p, p, bp * inv_h2)),
            }
            if grid.neighbor(p, axis, false).is_none() {
                t.push((p, p, bp * inv_h2));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(nodes, nodes, t))
}

fn check_field(grid: &Grid, field: &CoefficientField, what: &'static str) -> Result<()> {
    if field.grid() != grid {
        return Err(Error::DimensionMismatch {
            what,
            expected: grid.num_nodes(),
            actual: field.values().len(),
        });
    }
    Ok(())
}

/// Which damped system a generator discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Kelvin-Voigt damping `div(b ∇u_t)` on the first wave, velocity coupling.
    KelvinVoigt,
    /// Viscous damping `d(x)` on both waves, velocity coupling.
    ViscousCoupled,
    /// One wave `φ_tt - Δφ + d(x) φ_t = 0`; the state is `(φ, η)`.
    ViscousSingle,
}

/// A state `(u, v, y, z)`; single-wave states leave `y` and `z` empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T = f64> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Copy + Default> SystemState<T> {
    pub fn zeros(nodes: usize, blocks: usize) -> Self {
        let second = if blocks == 4 { nodes } else { 0 };
        SystemState {
            u: vec![T::default(); nodes],
            v: vec![T::default(); nodes],
            y: vec![T::default(); second],
            z: vec![T::default(); second],
        }
    }

    pub fn blocks(&self) -> [&[T]; 4] {
        [&self.u, &self.v, &self.y, &self.z]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<T>; 4] {
        [&mut self.u, &mut self.v, &mut self.y, &mut self.z]
    }

    pub fn num_blocks(&self) -> usize {
        if self.y.is_empty() {
            2
        } else {
            4
        }
    }

    pub fn nodes(&self) -> usize {
        self.u.len()
    }

    pub fn len(&self) -> usize {
        self.nodes() * self.num_blocks()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Concatenation `[u, v, y, z]`.
    pub fn to_flat(&self) -> Vec<T> {
        self.blocks().concat()
    }

    pub fn from_flat(flat: &[T], blocks: usize) -> Self {
        let nodes = flat.len() / blocks;
        let mut s = Self::zeros(nodes, blocks);
        for (b, dst) in s.blocks_mut().into_iter().take(blocks).enumerate() {
            dst.copy_from_slice(&flat[b * nodes..(b + 1) * nodes]);
        }
        s
    }

    /// Node-major ordering `[u_0, v_0, y_0, z_0, u_1, ...]` used by the banded solvers.
    pub(crate) fn to_interleaved(&self) -> Vec<T> {
        let m = self.num_blocks();
        let mut out = vec![T::default(); self.len()];
        for (b, block) in self.blocks().into_iter().take(m).enumerate() {
            for (p, &x) in block.iter().enumerate() {
                out[p * m + b] = x;
            }
        }
        out
    }

    pub(crate) fn from_interleaved(data: &[T], blocks: usize) -> Self {
        let nodes = data.len() / blocks;
        let mut s = Self::zeros(nodes, blocks);
        for (b, dst) in s.blocks_mut().into_iter().take(blocks).enumerate() {
            for (p, x) in dst.iter_mut().enumerate() {
                *x = data[p * blocks + b];
            }
        }
        s
    }

    pub fn map<S: Copy + Default>(&self, f: impl Fn(T) -> S) -> SystemState<S> {
        SystemState {
            u: self.u.iter().map(|&x| f(x)).collect(),
            v: self.v.iter().map(|&x| f(x)).collect(),
            y: self.y.iter().map(|&x| f(x)).collect(),
            z: self.z.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let zip = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
        SystemState {
            u: zip(&self.u, &other.u),
            v: zip(&self.v, &other.v),
            y: zip(&self.y, &other.y),
            z: zip(&self.z, &other.z),
        }
    }
}

impl<T> SystemState<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b * alpha)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|x| x * alpha)
    }
}

impl SystemState<f64> {
    /// Uniform samples in `[-1, 1)` on every block.
    pub fn random<R: Rng>(nodes: usize, blocks: usize, rng: &mut R) -> Self {
        let mut s = Self::zeros(nodes, blocks);
        for block in s.blocks_mut().into_iter().take(blocks) {
            block.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks().iter().flat_map(|b| b.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// The assembled block operator `A_h` with its energy structure.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    grid: Grid,
    a: f64,
    model: Model,
    stiffness: CsrMatrix,
    damping: CsrMatrix,
    second_damping: Option<CsrMatrix>,
    coupling: Vec<f64>,
    damping_field: CoefficientField,
    coupling_field: CoefficientField,
}

/// Kelvin-Voigt generator for `b_field` damping and `c_field` coupling.
pub fn assemble_generator(
    grid: &Grid,
    a: f64,
    b_field: &CoefficientField,
    c_field: &CoefficientField,
) -> Result<DiscreteGenerator> {
    check_modulus(a)?;
    check_field(grid, b_field, "damping field")?;
    check_field(grid, c_field, "coupling field")?;
    Ok(DiscreteGenerator {
        grid: *grid,
        a,
        model: Model::KelvinVoigt,
        stiffness: laplacian_stiffness(grid),
        damping: weighted_stiffness(grid, b_field)?,
        second_damping: None,
        coupling: c_field.values().to_vec(),
        damping_field: b_field.clone(),
        coupling_field: c_field.clone(),
    })
}

/// Generator of the viscously damped systems.
///
/// With `single = false` both waves carry the damping `d(x) ∂_t` and are coupled
/// through `c(x)`. With `single = true` only the first wave is kept, with unit
/// modulus and no coupling; `a` and `c_field` are then ignored.
pub fn assemble_viscous_generator(
    grid: &Grid,
    a: f64,
    d_field: &CoefficientField,
    c_field: &CoefficientField,
    single: bool,
) -> Result<DiscreteGenerator> {
    check_field(grid, d_field, "damping field")?;
    check_field(grid, c_field, "coupling field")?;
    if d_field.min() < 0.0 {
        return Err(Error::param("d", "viscous damping must be nonnegative"));
    }
    let damping = CsrMatrix::diagonal(d_field.values());
    let (a, model, second, coupling, coupling_field) = if single {
        (1.0, Model::ViscousSingle, None, vec![0.0; grid.num_nodes()], CoefficientField::constant(grid, 0.0))
    } else {
        check_modulus(a)?;
        (a, Model::ViscousCoupled, Some(damping.clone()), c_field.values().to_vec(), c_field.clone())
    };
    Ok(DiscreteGenerator {
        grid: *grid,
        a,
        model,
        stiffness: laplacian_stiffness(grid),
        damping,
        second_damping: second,
        coupling,
        damping_field: d_field.clone(),
        coupling_field,
    })
}

fn check_modulus(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", format!("elastic modulus must be positive, got {a}")));
    }
    Ok(())
}

impl DiscreteGenerator {
    /// Builds a generator from already assembled 1D blocks. Used for the
    /// separated y-modes of strip configurations.
    pub(crate) fn from_parts(
        grid: Grid,
        a: f64,
        model: Model,
        stiffness: CsrMatrix,
        damping: CsrMatrix,
        coupling: Vec<f64>,
    ) -> Self {
        let second_damping = (model == Model::ViscousCoupled).then(|| damping.clone());
        let zero = CoefficientField::constant(&grid, 0.0);
        DiscreteGenerator {
            grid,
            a,
            model,
            stiffness,
            damping,
            second_damping,
            coupling,
            damping_field: zero.clone(),
            coupling_field: zero,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// `K_b` for Kelvin-Voigt, `D_d` for the viscous models.
    pub fn damping(&self) -> &CsrMatrix {
        &self.damping
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn damping_field(&self) -> &CoefficientField {
        &self.damping_field
    }

    pub fn coupling_field(&self) -> &CoefficientField {
        &self.coupling_field
    }

    pub fn nodes(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn num_blocks(&self) -> usize {
        match self.model {
            Model::ViscousSingle => 2,
            _ => 4,
        }
    }

    /// Total state dimension.
    pub fn state_dim(&self) -> usize {
        self.nodes() * self.num_blocks()
    }

    pub fn zero_state(&self) -> SystemState {
        SystemState::zeros(self.nodes(), self.num_blocks())
    }

    /// True when damping and coupling vanish identically.
    pub fn is_conservative(&self) -> bool {
        self.damping.max_abs() == 0.0
            && self.second_damping.as_ref().is_none_or(|d| d.max_abs() == 0.0)
            && self.coupling.iter().all(|&c| c == 0.0)
    }

    /// Calls `f(block_row, block_col, node_row, node_col, value)` for every
    /// nonzero of `A_h` in block form.
    pub(crate) fn for_each_entry(&self, mut f: impl FnMut(usize, usize, usize, usize, f64)) {
        let n = self.nodes();
        for p in 0..n {
            f(0, 1, p, p, 1.0);
        }
        for (r, c, v) in self.stiffness.triplets() {
            f(1, 0, r, c, -self.a * v);
        }
        for (r, c, v) in self.damping.triplets() {
            f(1, 1, r, c, -v);
        }
        if self.num_blocks() == 2 {
            return;
        }
        for (p, &c) in self.coupling.iter().enumerate() {
            if c != 0.0 {
                f(1, 3, p, p, -c);
                f(3, 1, p, p, c);
            }
        }
        for p in 0..n {
            f(2, 3, p, p, 1.0);
        }
        for (r, c, v) in self.stiffness.triplets() {
            f(3, 2, r, c, -v);
        }
        if let Some(d) = &self.second_damping {
            for (r, c, v) in d.triplets() {
                f(3, 3, r, c, -v);
            }
        }
    }

    fn check_state<T>(&self, state: &SystemState<T>) -> Result<()> {
        let n = self.nodes();
        let second = if self.num_blocks() == 4 { n } else { 0 };
        for (len, expected) in [
            (state.u.len(), n),
            (state.v.len(), n),
            (state.y.len(), second),
            (state.z.len(), second),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    what: "state block",
                    expected,
                    actual: len,
                });
            }
        }
        Ok(())
    }

    /// `A_h U`.
    pub fn apply(&self, state: &SystemState) -> Result<SystemState> {
        self.check_state(state)?;
        let mut out = self.zero_state();
        {
            let src = state.blocks();
            let mut dst = out.blocks_mut();
            self.for_each_entry(|br, bc, r, c, v| dst[br][r] += v * src[bc][c]);
        }
        Ok(out)
    }

    /// Energy inner product `⟨U, W⟩_h`.
    pub fn inner(&self, x: &SystemState, w: &SystemState) -> Result<f64> {
        self.check_state(x)?;
        self.check_state(w)?;
        let k = &self.stiffness;
        let ku = k.mul_vec(&w.u);
        let mut s = self.a * dot(&x.u, &ku) + dot(&x.v, &w.v);
        if self.num_blocks() == 4 {
            let ky = k.mul_vec(&w.y);
            s += dot(&x.y, &ky) + dot(&x.z, &w.z);
        }
        Ok(s * self.grid.cell_volume())
    }

    /// `E = ½ ⟨U, U⟩_h`.
    pub fn energy(&self, state: &SystemState) -> Result<f64> {
        Ok(0.5 * self.inner(state, state)?)
    }

    /// Instantaneous energy rate `-h^d (vᵀ B₁ v + zᵀ B₂ z)`; equals `Re⟨A_h U, U⟩_h`.
    pub fn dissipation(&self, state: &SystemState) -> Result<f64> {
        self.check_state(state)?;
        let mut q = self.damping.quad_form(&state.v);
        if let Some(d) = &self.second_damping {
            q += d.quad_form(&state.z);
        }
        Ok(-q * self.grid.cell_volume())
    }

    /// Dense `A_h` in block order `[u, v, y, z]`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.nodes();
        let mut m = DMatrix::zeros(self.state_dim(), self.state_dim());
        self.for_each_entry(|br, bc, r, c, v| m[(br * n + r, bc * n + c)] += v);
        m
    }

    /// Dense Gram matrix of the energy inner product, block order.
    pub fn gram_dense(&self) -> DMatrix<f64> {
        let n = self.nodes();
        let hd = self.grid.cell_volume();
        let k = self.stiffness.to_dense();
        let mut g = DMatrix::zeros(self.state_dim(), self.state_dim());
        let scales: &[f64] = if self.num_blocks() == 4 { &[self.a, 1.0] } else { &[self.a] };
        for (wave, &s) in scales.iter().enumerate() {
            let disp = 2 * wave * n;
            let vel = disp + n;
            g.view_mut((disp, disp), (n, n)).copy_from(&(&k * (s * hd)));
            for p in 0..n {
                g[(vel + p, vel + p)] = hd;
            }
        }
        g
    }

    /// Half-bandwidth of `A_h` in node-major ordering with `m` unknowns per node.
    pub(crate) fn interleaved_bandwidth(&self, per_node: usize) -> usize {
        let node_bw = self.stiffness.bandwidth().max(self.damping.bandwidth());
        (node_bw + 1) * per_node - 1
    }

    /// `shift · I + scale · A_h` as a banded matrix in node-major ordering.
    pub(crate) fn banded_shifted(&self, shift: f64, scale: f64) -> BandedMatrix {
        let m = self.num_blocks();
        let bw = self.interleaved_bandwidth(m);
        let mut b = BandedMatrix::zeros(self.state_dim(), bw, bw);
        for i in 0..self.state_dim() {
            b.add(i, i, shift);
        }
        self.for_each_entry(|br, bc, r, c, v| b.add(r * m + br, c * m + bc, scale * v));
        b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, indicator_field, preset_config, Domain, FieldRole, Preset, RegionSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn interval(n: usize, l: f64) -> Grid {
        build_grid(Domain::interval(l).unwrap(), n).unwrap()
    }

    fn square(n: usize) -> Grid {
        build_grid(Domain::square(1.0).unwrap(), n).unwrap()
    }

    fn sorted_eigs(m: &CsrMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = m.to_dense().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn laplacian_1d_closed_form() {
        let g = interval(3, 1.0);
        let k = laplacian_stiffness(&g);
        assert!(k.is_symmetric(0.0));
        let h = g.h();
        for (j, e) in sorted_eigs(&k).iter().enumerate() {
            let expect = 4.0 / (h * h) * ((j + 1) as f64 * PI / 8.0).sin().powi(2);
            assert_relative_eq!(*e, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn laplacian_2d_is_tensor_sum() {
        let k1 = sorted_eigs(&laplacian_stiffness(&interval(2, 1.0)));
        let k2 = sorted_eigs(&laplacian_stiffness(&square(2)));
        let mut sums: Vec<f64> = k1.iter().flat_map(|a| k1.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        for (a, b) in k2.iter().zip(&sums) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn smallest_eigenvalue_converges_to_one_on_pi_interval() {
        let mut errors = Vec::new();
        for n in [20, 40, 80, 160] {
            let g = interval(n, PI);
            let h = g.h();
            // closed form cross-checked against the assembled matrix at small n
            let lam = 4.0 / (h * h) * (h / 2.0).sin().powi(2);
            if n == 20 {
                assert_relative_eq!(sorted_eigs(&laplacian_stiffness(&g))[0], lam, max_relative = 1e-10);
            }
            errors.push((lam - 1.0).abs());
        }
        for w in errors.windows(2) {
            assert!(w[1] < w[0] / 3.5, "second-order convergence expected: {errors:?}");
        }
        assert!(errors[3] < 1e-4);
    }

    #[test]
    fn constant_weight_reduces_to_laplacian() {
        for g in [interval(7, 1.3), square(5)] {
            let k = laplacian_stiffness(&g);
            let kb = weighted_stiffness(&g, &CoefficientField::constant(&g, 2.5)).unwrap();
            for (r, c, v) in k.triplets() {
                assert_relative_eq!(kb.get(r, c), 2.5 * v, max_relative = 1e-14);
            }
            assert_eq!(kb.nnz(), k.nnz());
            let unit = weighted_stiffness(&g, &CoefficientField::constant(&g, 1.0)).unwrap();
            assert_eq!(unit, k);
            let zero = weighted_stiffness(&g, &CoefficientField::constant(&g, 0.0)).unwrap();
            assert_eq!(zero.max_abs(), 0.0);
        }
    }

    #[test]
    fn weighted_quadratic_form_matches_edge_sum() {
        let g = interval(9, 1.0);
        let b = indicator_field(&g, &RegionSpec::Interval1D { lo: 0.3, hi: 0.7 }, 1.0, FieldRole::Damping).unwrap();
        let kb = weighted_stiffness(&g, &b).unwrap();
        assert!(kb.is_symmetric(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h2 = g.h() * g.h();
        for _ in 0..1000 {
            let v: Vec<f64> = (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // oracle: sum over all edges including the two boundary edges
            let mut ext = vec![0.0];
            ext.extend(&v);
            ext.push(0.0);
            let mut bext = vec![b.value(0)];
            bext.extend(b.values());
            bext.push(b.value(8));
            let oracle: f64 = (0..10).map(|e| 0.5 * (bext[e] + bext[e + 1]) * (ext[e + 1] - ext[e]).powi(2) / h2).sum();
            let q = kb.quad_form(&v);
            assert_relative_eq!(q, oracle, max_relative = 1e-12, epsilon = 1e-14);
            assert!(q >= 0.0);
        }
    }

    #[test]
    fn negative_field_rejected() {
        let g = interval(4, 1.0);
        let f = CoefficientField::constant(&g, -1.0);
        assert!(weighted_stiffness(&g, &f).is_err());
    }

    #[test]
    fn decoupled_when_c_vanishes() {
        let g = interval(6, 1.0);
        let b = CoefficientField::constant(&g, 1.0);
        let c = CoefficientField::constant(&g, 0.0);
        let gen = assemble_generator(&g, 2.0, &b, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = SystemState::random(6, 4, &mut rng);
        s.u.iter_mut().for_each(|x| *x = 0.0);
        s.v.iter_mut().for_each(|x| *x = 0.0);
        let out = gen.apply(&s).unwrap();
        assert!(out.u.iter().chain(&out.v).all(|&x| x == 0.0));
        assert_eq!(out.y, s.z);
        let ky = gen.stiffness().mul_vec(&s.y);
        for (a, b) in out.z.iter().zip(&ky) {
            assert_relative_eq!(*a, -b, max_relative = 1e-14);
        }
    }

    #[test]
    fn conservative_limit_is_skew() {
        let g = square(5);
        let zero = CoefficientField::constant(&g, 0.0);
        let gen = assemble_generator(&g, 1.0, &zero, &zero).unwrap();
        assert!(gen.is_conservative());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = SystemState::random(25, 4, &mut rng);
            let re = gen.inner(&gen.apply(&s).unwrap(), &s).unwrap();
            assert!(re.abs() < 1e-12 * gen.inner(&s, &s).unwrap().max(1.0) * 1e3, "{re}");
        }
    }

    #[test]
    fn single_block_activation() {
        let g = interval(5, 1.0);
        let b = CoefficientField::constant(&g, 1.0);
        let c = CoefficientField::constant(&g, 1.0);
        let gen = assemble_generator(&g, 3.0, &b, &c).unwrap();
        let mut s = gen.zero_state();
        assert_eq!(gen.apply(&s).unwrap(), s);
        s.u = (0..5).map(|i| i as f64 + 1.0).collect();
        let out = gen.apply(&s).unwrap();
        let ku = gen.stiffness().mul_vec(&s.u);
        for (a, b) in out.v.iter().zip(&ku) {
            assert_relative_eq!(*a, -3.0 * b, max_relative = 1e-14);
        }
        assert!(out.u.iter().chain(&out.y).chain(&out.z).all(|&x| x == 0.0));
    }

    #[test]
    fn apply_is_linear() {
        let g = square(4);
        let (b, c) = preset_config(&g, &Preset::h4_default(1.0)).unwrap();
        let gen = assemble_generator(&g, 1.5, &b, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = SystemState::random(16, 4, &mut rng);
        let w = SystemState::random(16, 4, &mut rng);
        let lhs = gen.apply(&x.scale(0.7).axpy(-1.3, &w)).unwrap();
        let rhs = gen.apply(&x).unwrap().scale(0.7).axpy(-1.3, &gen.apply(&w).unwrap());
        let diff = lhs.axpy(-1.0, &rhs).max_abs();
        assert!(diff < 1e-10 * rhs.max_abs(), "{diff}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = interval(5, 1.0);
        let other = interval(6, 1.0);
        let f = CoefficientField::constant(&g, 1.0);
        let wrong = CoefficientField::constant(&other, 1.0);
        assert!(assemble_generator(&g, 1.0, &f, &wrong).is_err());
        assert!(assemble_generator(&g, 0.0, &f, &f).is_err());
        let gen = assemble_generator(&g, 1.0, &f, &f).unwrap();
        assert!(gen.apply(&SystemState::zeros(6, 4)).is_err());
        assert!(gen.apply(&SystemState::zeros(5, 2)).is_err());
    }

    #[test]
    fn energy_terms() {
        let g = interval(99, PI);
        let zero = CoefficientField::constant(&g, 0.0);
        let gen = assemble_generator(&g, 1.0, &zero, &zero).unwrap();
        assert_eq!(gen.energy(&gen.zero_state()).unwrap(), 0.0);
        let mut s = gen.zero_state();
        s.v = vec![2.0; 99];
        assert_relative_eq!(gen.energy(&s).unwrap(), 0.5 * g.h() * 4.0 * 99.0, max_relative = 1e-14);

        // first sine mode with unit discrete L² norm: E = ½ μ_{1,h}²
        let h = g.h();
        let raw: Vec<f64> = g.coordinates().map(|p| p[0].sin()).collect();
        let norm = (h * raw.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let mut s = gen.zero_state();
        s.u = raw.iter().map(|x| x / norm).collect();
        let mu2 = 4.0 / (h * h) * (h / 2.0).sin().powi(2);
        assert_relative_eq!(gen.energy(&s).unwrap(), 0.5 * mu2, max_relative = 1e-12);
    }

    #[test]
    fn dissipation_matches_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for g in [interval(30, 1.0), square(7)] {
            let preset = if g.dim() == 1 { Preset::one_d_default(1.0) } else { Preset::h5_default(1.0) };
            let (b, c) = preset_config(&g, &preset).unwrap();
            let gen = assemble_generator(&g, 0.8, &b, &c).unwrap();
            for _ in 0..50 {
                let s = SystemState::random(g.num_nodes(), 4, &mut rng);
                let re = gen.inner(&gen.apply(&s).unwrap(), &s).unwrap();
                let d = gen.dissipation(&s).unwrap();
                assert!(d <= 0.0);
                assert_relative_eq!(re, d, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn dissipation_zero_outside_damping() {
        let g = interval(20, 1.0);
        let b = indicator_field(&g, &RegionSpec::Interval1D { lo: 0.0, hi: 0.3 }, 1.0, FieldRole::Damping).unwrap();
        let c = CoefficientField::constant(&g, 1.0);
        let gen = assemble_generator(&g, 1.0, &b, &c).unwrap();
        let mut s = gen.zero_state();
        // support well away from ω_b: every edge touching it has zero weight
        for (p, x) in s.v.iter_mut().enumerate() {
            if g.coords(p)[0] > 0.5 {
                *x = 1.0;
            }
        }
        assert_eq!(gen.dissipation(&s).unwrap(), 0.0);
        let undamped = assemble_generator(&g, 1.0, &CoefficientField::constant(&g, 0.0), &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(undamped.dissipation(&SystemState::random(20, 4, &mut rng)).unwrap(), 0.0);
    }

    #[test]
    fn viscous_generators() {
        let g = square(6);
        let zero = CoefficientField::constant(&g, 0.0);
        let cons = assemble_viscous_generator(&g, 1.0, &zero, &zero, false).unwrap();
        assert!(cons.is_conservative());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = SystemState::random(36, 4, &mut rng);
        assert!(cons.inner(&cons.apply(&s).unwrap(), &s).unwrap().abs() < 1e-9);

        let (_, omega_c) = Preset::h5_default(1.0).regions(1.0);
        let d = indicator_field(&g, &omega_c, 1.0, FieldRole::Damping).unwrap();
        let single = assemble_viscous_generator(&g, 1.0, &d, &zero, true).unwrap();
        assert_eq!(single.num_blocks(), 2);
        let s1 = SystemState::random(36, 2, &mut rng);
        let expect: f64 = -d.values().iter().zip(&s1.v).map(|(w, x)| w * x * x).sum::<f64>() * g.cell_volume();
        let re = single.inner(&single.apply(&s1).unwrap(), &s1).unwrap();
        assert_relative_eq!(re, expect, max_relative = 1e-10);
        assert_relative_eq!(single.dissipation(&s1).unwrap(), expect, max_relative = 1e-12);

        let c = CoefficientField::constant(&g, 0.5);
        let coupled = assemble_viscous_generator(&g, 2.0, &d, &c, false).unwrap();
        let expect: f64 = -d.values().iter().zip(s.v.iter().zip(&s.z)).map(|(w, (x, y))| w * (x * x + y * y)).sum::<f64>()
            * g.cell_volume();
        let re = coupled.inner(&coupled.apply(&s).unwrap(), &s).unwrap();
        assert_relative_eq!(re, expect, max_relative = 1e-10);
    }

    #[test]
    fn dense_and_banded_agree_with_apply() {
        let g = square(4);
        let (b, c) = preset_config(&g, &Preset::h4_default(1.0)).unwrap();
        let gen = assemble_generator(&g, 1.0, &b, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = SystemState::random(16, 4, &mut rng);
        let ax = gen.apply(&s).unwrap();
        let dense = gen.to_dense() * nalgebra::DVector::from_vec(s.to_flat());
        for (a, b) in ax.to_flat().iter().zip(dense.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        let banded = gen.banded_shifted(0.0, 1.0).mul_vec(&s.to_interleaved());
        let banded = SystemState::from_interleaved(&banded, 4);
        assert!(banded.axpy(-1.0, &ax).max_abs() < 1e-12 * ax.max_abs());
        // Gram matrix reproduces the inner product
        let gram = gen.gram_dense();
        let flat = nalgebra::DVector::from_vec(s.to_flat());
        assert_relative_eq!((flat.transpose() * &gram * &flat)[0], gen.inner(&s, &s).unwrap(), max_relative = 1e-12);
    }
}
