//! P1 finite elements on a triangulated disk: the pair operators `d` and
//! `δ`, the Dirichlet solve for `δd`, and the potential/solenoidal
//! projections `P` and `S`.
//!
//! The discrete `δ` is defined as the negative transpose of the discrete `d`
//! under the weighted (lumped) pair inner products, so `d = −δ*` holds
//! exactly and the projectors are exact up to the CG tolerance; all
//! discretization error lives in `d` itself.

use std::sync::Arc;

use crate::geometry::{MagneticSystem, SymMat2, Vec2};
use crate::transform::{PotentialField, TensorPair};
use crate::{Error, Result, PAIR_BETA_WEIGHT};

/// Triangulated disk: concentric rings of vertices with a zipper strip
/// triangulation, boundary vertices exactly on the circle.
#[derive(Debug)]
pub struct DiskMesh {
    pub radius: f64,
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    pub is_boundary: Vec<bool>,
    // background grid for point location
    grid_n: usize,
    grid_cells: Vec<Vec<u32>>,
}

impl DiskMesh {
    /// Mesh with `rings` concentric rings (≈ `3·rings²` vertices).
    pub fn new(radius: f64, rings: usize) -> Arc<DiskMesh> {
        assert!(rings >= 2);
        let mut vertices = vec![Vec2::ZERO];
        let mut ring_start = vec![0usize; rings + 1];
        for k in 1..=rings {
            ring_start[k] = vertices.len();
            let n_k = 6 * k;
            let r = radius * k as f64 / rings as f64;
            for j in 0..n_k {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / n_k as f64;
                vertices.push(Vec2::from_angle(phi) * r);
            }
        }
        let mut triangles = Vec::new();
        // center fan
        for j in 0..6 {
            triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
        }
        // zipper strips between consecutive rings
        for k in 1..rings {
            let (ni, no) = (6 * k, 6 * (k + 1));
            let (si, so) = (ring_start[k], ring_start[k + 1]);
            let (mut i, mut j) = (0usize, 0usize);
            while i < ni || j < no {
                let fi = (i + 1) as f64 / ni as f64;
                let fj = (j + 1) as f64 / no as f64;
                if j < no && (i == ni || fj <= fi) {
                    triangles.push([si + i % ni, so + j % no, so + (j + 1) % no]);
                    j += 1;
                } else {
                    triangles.push([si + i % ni, so + j % no, si + (i + 1) % ni]);
                    i += 1;
                }
            }
        }
        // enforce positive orientation
        for t in &mut triangles {
            let [a, b, c] = *t;
            let u = vertices[b] - vertices[a];
            let v = vertices[c] - vertices[a];
            if u.x * v.y - u.y * v.x < 0.0 {
                t.swap(1, 2);
            }
        }
        let n = vertices.len();
        let mut is_boundary = vec![false; n];
        for v in ring_start[rings]..n {
            is_boundary[v] = true;
            // snap to the circle exactly
            let p = vertices[v];
            vertices[v] = p * (radius / p.norm());
        }

        // background locator grid
        let grid_n = (2 * rings).max(8);
        let mut grid_cells = vec![Vec::new(); grid_n * grid_n];
        let cell_of = |p: Vec2| -> (usize, usize) {
            let fx = ((p.x + radius) / (2.0 * radius) * grid_n as f64)
                .clamp(0.0, grid_n as f64 - 1.0);
            let fy = ((p.y + radius) / (2.0 * radius) * grid_n as f64)
                .clamp(0.0, grid_n as f64 - 1.0);
            (fx as usize, fy as usize)
        };
        for (ti, t) in triangles.iter().enumerate() {
            let (mut lo, mut hi) = (
                (usize::MAX, usize::MAX),
                (0usize, 0usize),
            );
            for &v in t {
                let (cx, cy) = cell_of(vertices[v]);
                lo = (lo.0.min(cx), lo.1.min(cy));
                hi = (hi.0.max(cx), hi.1.max(cy));
            }
            for cx in lo.0..=hi.0 {
                for cy in lo.1..=hi.1 {
                    grid_cells[cy * grid_n + cx].push(ti as u32);
                }
            }
        }

        Arc::new(DiskMesh {
            radius,
            vertices,
            triangles,
            is_boundary,
            grid_n,
            grid_cells,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    fn barycentric(&self, t: usize, p: Vec2) -> (f64, f64, f64) {
        let [a, b, c] = self.triangles[t];
        let (va, vb, vc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (vb - va).x * (vc - va).y - (vb - va).y * (vc - va).x;
        let l2 = ((p - va).x * (vc - va).y - (p - va).y * (vc - va).x) / det;
        let l3 = ((vb - va).x * (p - va).y - (vb - va).y * (p - va).x) / det;
        (1.0 - l2 - l3, l2, l3)
    }

    /// Containing triangle and barycentric weights, if `p` is in the mesh.
    pub fn locate(&self, p: Vec2) -> Option<(usize, [f64; 3])> {
        if p.norm() > self.radius + 1e-12 {
            return None;
        }
        let fx = ((p.x + self.radius) / (2.0 * self.radius) * self.grid_n as f64)
            .clamp(0.0, self.grid_n as f64 - 1.0) as isize;
        let fy = ((p.y + self.radius) / (2.0 * self.radius) * self.grid_n as f64)
            .clamp(0.0, self.grid_n as f64 - 1.0) as isize;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                let (cx, cy) = (fx + dx, fy + dy);
                if cx < 0 || cy < 0 || cx >= self.grid_n as isize || cy >= self.grid_n as isize {
                    continue;
                }
                for &ti in &self.grid_cells[cy as usize * self.grid_n + cx as usize] {
                    let (l1, l2, l3) = self.barycentric(ti as usize, p);
                    let min = l1.min(l2).min(l3);
                    if min >= -1e-10 {
                        return Some((ti as usize, [l1, l2, l3]));
                    }
                    if best.map_or(true, |(_, _, m)| min > m) {
                        best = Some((ti as usize, [l1, l2, l3], min));
                    }
                }
            }
        }
        // points in the sliver between a boundary chord and the circle arc
        // belong to no triangle; clamp them onto the nearest one
        best.and_then(|(ti, l, m)| {
            if m > -0.06 {
                let c: Vec<f64> = l.iter().map(|v| v.max(0.0)).collect();
                let s: f64 = c.iter().sum();
                Some((ti, [c[0] / s, c[1] / s, c[2] / s]))
            } else {
                None
            }
        })
    }

    /// Signed (positive) Euclidean area of a triangle.
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let u = self.vertices[b] - self.vertices[a];
        let v = self.vertices[c] - self.vertices[a];
        0.5 * (u.x * v.y - u.y * v.x)
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Constant P1 gradients `∇λ_a, ∇λ_b, ∇λ_c` on a triangle.
    pub fn grads(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        let (va, vb, vc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let inv2a = 1.0 / (2.0 * self.area(t));
        [
            (vc - vb).rot90() * inv2a,
            (va - vc).rot90() * inv2a,
            (vb - va).rot90() * inv2a,
        ]
    }
}

/// Mesh-sampled potential pair `w = [v, φ]`: per-vertex `(v_x, v_y, φ)`.
#[derive(Debug, Clone)]
pub struct PotentialPair {
    pub mesh: Arc<DiskMesh>,
    /// Vertex-major dof vector `[v_x, v_y, φ]` per vertex.
    pub values: Vec<f64>,
}

impl PotentialPair {
    pub fn zeros(mesh: &Arc<DiskMesh>) -> Self {
        PotentialPair {
            mesh: mesh.clone(),
            values: vec![0.0; 3 * mesh.n_vertices()],
        }
    }

    pub fn sample(mesh: &Arc<DiskMesh>, w: &PotentialField) -> Self {
        let mut values = Vec::with_capacity(3 * mesh.n_vertices());
        for &p in &mesh.vertices {
            let v = w.v.value(p);
            values.extend_from_slice(&[v.x, v.y, w.phi.value(p)]);
        }
        PotentialPair {
            mesh: mesh.clone(),
            values,
        }
    }
}

/// Mesh-sampled tensor pair `f = [h, β]`: per-vertex
/// `(h_xx, h_xy, h_yy, β_x, β_y)`.
#[derive(Debug, Clone)]
pub struct MeshPair {
    pub mesh: Arc<DiskMesh>,
    pub values: Vec<f64>,
}

impl MeshPair {
    pub fn zeros(mesh: &Arc<DiskMesh>) -> Self {
        MeshPair {
            mesh: mesh.clone(),
            values: vec![0.0; 5 * mesh.n_vertices()],
        }
    }

    pub fn sample(mesh: &Arc<DiskMesh>, f: &TensorPair) -> Self {
        let mut values = Vec::with_capacity(5 * mesh.n_vertices());
        for &p in &mesh.vertices {
            let h = f.h_at(p);
            let b = f.beta_at(p);
            values.extend_from_slice(&[h.xx, h.xy, h.yy, b.x, b.y]);
        }
        MeshPair {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn h_at_vertex(&self, v: usize) -> SymMat2 {
        SymMat2::new(
            self.values[5 * v],
            self.values[5 * v + 1],
            self.values[5 * v + 2],
        )
    }

    pub fn beta_at_vertex(&self, v: usize) -> Vec2 {
        Vec2::new(self.values[5 * v + 3], self.values[5 * v + 4])
    }

    /// P1-interpolating evaluator (zero outside the mesh), usable by the ray
    /// and normal transforms. Derivatives are the per-triangle constants.
    pub fn to_tensor_pair(&self) -> TensorPair {
        let me = self.clone();
        let h = crate::geometry::SymTensorField::custom(
            move |p| match me.mesh.locate(p) {
                Some((t, l)) => {
                    let [a, b, c] = me.mesh.triangles[t];
                    let mut out = SymMat2::ZERO;
                    for (v, w) in [(a, l[0]), (b, l[1]), (c, l[2])] {
                        out = out.add(me.h_at_vertex(v).scale(w));
                    }
                    out
                }
                None => SymMat2::ZERO,
            },
            |_| [SymMat2::ZERO, SymMat2::ZERO],
        );
        let me = self.clone();
        let beta = crate::geometry::CovectorField::custom(
            move |p| match me.mesh.locate(p) {
                Some((t, l)) => {
                    let [a, b, c] = me.mesh.triangles[t];
                    let mut out = Vec2::ZERO;
                    for (v, w) in [(a, l[0]), (b, l[1]), (c, l[2])] {
                        out += me.beta_at_vertex(v) * w;
                    }
                    out
                }
                None => Vec2::ZERO,
            },
            |_| crate::geometry::Mat2::default(),
        );
        TensorPair::new(h, beta).supported_in(self.mesh.radius)
    }
}

/// Sparse CSR matrix (f64).
#[derive(Debug, Clone)]
struct Csr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_triplets(rows: usize, cols: usize, triplets: &mut Vec<(u32, u32, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
        let mut row_counts = vec![0usize; rows];
        let mut col_idx: Vec<u32> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_counts[r as usize] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for r in 0..rows {
            row_ptr[r + 1] = row_ptr[r] + row_counts[r];
        }
        Csr {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            out[r] = acc;
        }
    }

    fn transpose(&self) -> Csr {
        let mut trip: Vec<(u32, u32, f64)> = Vec::with_capacity(self.vals.len());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                trip.push((self.col_idx[k], r as u32, self.vals[k]));
            }
        }
        Csr::from_triplets(self.cols, self.rows, &mut trip)
    }
}

/// Assembled FEM operators for one (system, mesh) pair.
pub struct FemContext {
    pub system: MagneticSystem,
    pub mesh: Arc<DiskMesh>,
    d_mat: Csr,
    d_t: Csr,
    /// 5×5 lumped M_f blocks per vertex (row-major).
    m_f: Vec<[f64; 25]>,
    /// 3×3 lumped M_w blocks per vertex.
    m_w: Vec<[f64; 9]>,
    m_w_inv: Vec<[f64; 9]>,
    pub interior: Vec<bool>,
    /// Approximate diagonal of A = Dᵀ M_f D for Jacobi preconditioning.
    a_diag: Vec<f64>,
}

fn block_apply<const N: usize>(b: &[f64], x: &[f64]) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        for j in 0..N {
            out[i] += b[i * N + j] * x[j];
        }
    }
    out
}

impl FemContext {
    pub fn new(system: &MagneticSystem, mesh: &Arc<DiskMesh>) -> Result<FemContext> {
        let n = mesh.n_vertices();
        // metric areas and vertex lumping weights
        let mut tri_area_g = vec![0.0; mesh.triangles.len()];
        let mut vert_weight = vec![0.0; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let c = mesh.centroid(t);
            let a = mesh.area(t) * system.metric.sqrt_det(c);
            tri_area_g[t] = a;
            for &v in tri {
                vert_weight[v] += a / 3.0;
            }
        }
        // averaging weights: Σ_T∋v area_g(T)
        let mut vert_avg = vec![0.0; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                vert_avg[v] += tri_area_g[t];
            }
        }

        // D: per-triangle symmetric covariant derivative, averaged to vertices
        let mut trip: Vec<(u32, u32, f64)> = Vec::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let c = mesh.centroid(t);
            let grads = mesh.grads(t);
            let gamma = system.metric.christoffel(c)?;
            let y = system.lorentz_matrix(c);
            for &out_v in tri {
                let scale = tri_area_g[t] / vert_avg[out_v];
                for (k, &in_v) in tri.iter().enumerate() {
                    let g = grads[k];
                    let row = |comp: usize| (5 * out_v + comp) as u32;
                    let col = |comp: usize| (3 * in_v + comp) as u32;
                    // h_xx = ∂_x v_x − Γ^k_xx v_k
                    trip.push((row(0), col(0), scale * (g.x - gamma[0].xx / 3.0)));
                    trip.push((row(0), col(1), scale * (-gamma[1].xx / 3.0)));
                    // h_xy = ½(∂_x v_y + ∂_y v_x) − Γ^k_xy v_k
                    trip.push((row(1), col(0), scale * (0.5 * g.y - gamma[0].xy / 3.0)));
                    trip.push((row(1), col(1), scale * (0.5 * g.x - gamma[1].xy / 3.0)));
                    // h_yy = ∂_y v_y − Γ^k_yy v_k
                    trip.push((row(2), col(0), scale * (-gamma[0].yy / 3.0)));
                    trip.push((row(2), col(1), scale * (g.y - gamma[1].yy / 3.0)));
                    // β = dφ − Y(v),  (Y v)_i = −Y^j_i v_j
                    trip.push((row(3), col(2), scale * g.x));
                    trip.push((row(3), col(0), scale * (y.a / 3.0)));
                    trip.push((row(3), col(1), scale * (y.c / 3.0)));
                    trip.push((row(4), col(2), scale * g.y));
                    trip.push((row(4), col(0), scale * (y.b / 3.0)));
                    trip.push((row(4), col(1), scale * (y.d / 3.0)));
                }
            }
        }
        let d_mat = Csr::from_triplets(5 * n, 3 * n, &mut trip);
        let d_t = d_mat.transpose();

        // lumped mass blocks
        let mut m_f = Vec::with_capacity(n);
        let mut m_w = Vec::with_capacity(n);
        let mut m_w_inv = Vec::with_capacity(n);
        for v in 0..n {
            let p = mesh.vertices[v];
            let gi = system.metric.inv_at(p);
            let w = vert_weight[v];
            let (a, b, c) = (gi.xx, gi.xy, gi.yy);
            // ⟨h, h'⟩_g as a quadratic form on (h_xx, h_xy, h_yy)
            let q = [
                a * a,
                2.0 * a * b,
                b * b,
                2.0 * a * b,
                2.0 * (b * b + a * c),
                2.0 * b * c,
                b * b,
                2.0 * b * c,
                c * c,
            ];
            let mut mf = [0.0; 25];
            for i in 0..3 {
                for j in 0..3 {
                    mf[i * 5 + j] = w * q[i * 3 + j];
                }
            }
            let wb = w * PAIR_BETA_WEIGHT;
            mf[3 * 5 + 3] = wb * a;
            mf[3 * 5 + 4] = wb * b;
            mf[4 * 5 + 3] = wb * b;
            mf[4 * 5 + 4] = wb * c;
            m_f.push(mf);

            let mut mw = [0.0; 9];
            mw[0] = w * a;
            mw[1] = w * b;
            mw[3] = w * b;
            mw[4] = w * c;
            mw[8] = w;
            m_w.push(mw);
            let det = mw[0] * mw[4] - mw[1] * mw[3];
            m_w_inv.push([
                mw[4] / det,
                -mw[1] / det,
                0.0,
                -mw[3] / det,
                mw[0] / det,
                0.0,
                0.0,
                0.0,
                1.0 / mw[8],
            ]);
        }

        let interior: Vec<bool> = mesh.is_boundary.iter().map(|b| !b).collect();

        // Jacobi preconditioner: diag(A) with M_f approximated by its diagonal
        let mut a_diag = vec![0.0; 3 * n];
        for r in 0..5 * n {
            let mdiag = m_f[r / 5][(r % 5) * 5 + (r % 5)];
            for k in d_mat.row_ptr[r]..d_mat.row_ptr[r + 1] {
                let c = d_mat.col_idx[k] as usize;
                a_diag[c] += mdiag * d_mat.vals[k] * d_mat.vals[k];
            }
        }
        for d in &mut a_diag {
            if *d <= 0.0 {
                *d = 1.0;
            }
        }

        Ok(FemContext {
            system: system.clone(),
            mesh: mesh.clone(),
            d_mat,
            d_t,
            m_f,
            m_w,
            m_w_inv,
            interior,
            a_diag,
        })
    }

    fn n(&self) -> usize {
        self.mesh.n_vertices()
    }

    /// Discrete `d`: potential pair dof → tensor pair dof.
    pub fn d_apply(&self, w: &PotentialPair) -> MeshPair {
        let mut out = vec![0.0; 5 * self.n()];
        self.d_mat.apply(&w.values, &mut out);
        MeshPair {
            mesh: self.mesh.clone(),
            values: out,
        }
    }

    /// Discrete `δ = −M_w⁻¹ Dᵀ M_f`: tensor pair dof → potential pair dof.
    pub fn delta_apply(&self, f: &MeshPair) -> PotentialPair {
        let n = self.n();
        let mut mf = vec![0.0; 5 * n];
        for v in 0..n {
            let x: [f64; 5] = std::array::from_fn(|i| f.values[5 * v + i]);
            let y = block_apply::<5>(&self.m_f[v], &x);
            mf[5 * v..5 * v + 5].copy_from_slice(&y);
        }
        let mut dt = vec![0.0; 3 * n];
        self.d_t.apply(&mf, &mut dt);
        let mut out = vec![0.0; 3 * n];
        for v in 0..n {
            let x: [f64; 3] = std::array::from_fn(|i| -dt[3 * v + i]);
            let y = block_apply::<3>(&self.m_w_inv[v], &x);
            out[3 * v..3 * v + 3].copy_from_slice(&y);
        }
        PotentialPair {
            mesh: self.mesh.clone(),
            values: out,
        }
    }

    /// Pair inner product `⟨f, f'⟩` under the lumped mass.
    pub fn pair_inner(&self, a: &MeshPair, b: &MeshPair) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for v in 0..n {
            let x: [f64; 5] = std::array::from_fn(|i| a.values[5 * v + i]);
            let y = block_apply::<5>(&self.m_f[v], &x);
            for i in 0..5 {
                acc += y[i] * b.values[5 * v + i];
            }
        }
        acc
    }

    pub fn pair_norm(&self, a: &MeshPair) -> f64 {
        self.pair_inner(a, a).max(0.0).sqrt()
    }

    /// Potential inner product `⟨w, w'⟩` under the lumped mass.
    pub fn pot_inner(&self, a: &PotentialPair, b: &PotentialPair) -> f64 {
        let n = self.n();
        let mut acc = 0.0;
        for v in 0..n {
            let x: [f64; 3] = std::array::from_fn(|i| a.values[3 * v + i]);
            let y = block_apply::<3>(&self.m_w[v], &x);
            for i in 0..3 {
                acc += y[i] * b.values[3 * v + i];
            }
        }
        acc
    }

    pub fn pot_norm(&self, a: &PotentialPair) -> f64 {
        self.pot_inner(a, a).max(0.0).sqrt()
    }

    /// Norm of `δf` restricted to interior dof (the distributional rows).
    pub fn interior_delta_norm(&self, f: &MeshPair) -> f64 {
        let d = self.delta_apply(f);
        let mut masked = d.clone();
        for v in 0..self.n() {
            if !self.interior[v] {
                for c in 0..3 {
                    masked.values[3 * v + c] = 0.0;
                }
            }
        }
        self.pot_norm(&masked)
    }

    /// `A w = Dᵀ M_f D w` with Dirichlet masking of boundary dof.
    fn a_apply(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n();
        let mut masked = w.to_vec();
        for v in 0..n {
            if !self.interior[v] {
                for c in 0..3 {
                    masked[3 * v + c] = 0.0;
                }
            }
        }
        let mut dw = vec![0.0; 5 * n];
        self.d_mat.apply(&masked, &mut dw);
        let mut mf = vec![0.0; 5 * n];
        for v in 0..n {
            let x: [f64; 5] = std::array::from_fn(|i| dw[5 * v + i]);
            let y = block_apply::<5>(&self.m_f[v], &x);
            mf[5 * v..5 * v + 5].copy_from_slice(&y);
        }
        self.d_t.apply(&mf, out);
        for v in 0..n {
            if !self.interior[v] {
                for c in 0..3 {
                    out[3 * v + c] = 0.0;
                }
            }
        }
    }

    /// Preconditioned CG on `A u = b` over interior dof.
    fn cg_solve(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n3 = 3 * self.n();
        let mut b = b.to_vec();
        for v in 0..self.n() {
            if !self.interior[v] {
                for c in 0..3 {
                    b[3 * v + c] = 0.0;
                }
            }
        }
        let mut x = vec![0.0; n3];
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&self.a_diag).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut ap = vec![0.0; n3];
        for it in 0..max_iter {
            self.a_apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n3 {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm <= rel_tol * b_norm {
                return Ok(x);
            }
            for i in 0..n3 {
                z[i] = r[i] / self.a_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n3 {
                p[i] = z[i] + beta * p[i];
            }
            let _ = it;
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm * 10.0 {
            Ok(x)
        } else {
            Err(Error::CgStagnation {
                iters: max_iter,
                residual: r_norm / b_norm,
                target: rel_tol,
            })
        }
    }

    /// Dirichlet solve `(−δd) w = rhs`, `w = 0` on boundary vertices.
    pub fn dirichlet_solve(&self, rhs: &PotentialPair, rel_tol: f64) -> Result<PotentialPair> {
        let n = self.n();
        // A w = M_w rhs on interior dof
        let mut b = vec![0.0; 3 * n];
        for v in 0..n {
            let x: [f64; 3] = std::array::from_fn(|i| rhs.values[3 * v + i]);
            let y = block_apply::<3>(&self.m_w[v], &x);
            b[3 * v..3 * v + 3].copy_from_slice(&y);
        }
        let x = self.cg_solve(&b, rel_tol, 10 * 3 * n)?;
        Ok(PotentialPair {
            mesh: self.mesh.clone(),
            values: x,
        })
    }

    /// Potential projection `P f = d (δd)_D⁻¹ δ f`, with its potential.
    pub fn project_potential(&self, f: &MeshPair, rel_tol: f64) -> Result<(MeshPair, PotentialPair)> {
        let n = self.n();
        // A u = Dᵀ M_f f on interior dof
        let mut mf = vec![0.0; 5 * n];
        for v in 0..n {
            let x: [f64; 5] = std::array::from_fn(|i| f.values[5 * v + i]);
            let y = block_apply::<5>(&self.m_f[v], &x);
            mf[5 * v..5 * v + 5].copy_from_slice(&y);
        }
        let mut b = vec![0.0; 3 * n];
        self.d_t.apply(&mf, &mut b);
        let u = self.cg_solve(&b, rel_tol, 10 * 3 * n)?;
        let w = PotentialPair {
            mesh: self.mesh.clone(),
            values: u,
        };
        Ok((self.d_apply(&w), w))
    }

    /// Solenoidal projection `S f = f − P f`.
    pub fn project_solenoidal(&self, f: &MeshPair, rel_tol: f64) -> Result<MeshPair> {
        let (pf, _) = self.project_potential(f, rel_tol)?;
        let values = f
            .values
            .iter()
            .zip(&pf.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(MeshPair {
            mesh: self.mesh.clone(),
            values,
        })
    }
}

/// Continuum transpose-consistent `δ` applied to an analytic pair by finite
/// differences with Christoffel corrections: `(δh − ((n−1)/2)·Y(β),
/// ((n−1)/2)·δβ)`. Used as the manufactured-solution oracle.
pub fn continuum_delta(system: &MagneticSystem, f: &TensorPair, p: Vec2) -> (Vec2, f64) {
    let step = 1e-5;
    let gamma = system.metric.christoffel(p).expect("degenerate metric");
    let gi = system.metric.inv_at(p);
    let ex = Vec2::new(step, 0.0);
    let ey = Vec2::new(0.0, step);
    let dh = [
        f.h_at(p + ex).sub(f.h_at(p - ex)).scale(0.5 / step),
        f.h_at(p + ey).sub(f.h_at(p - ey)).scale(0.5 / step),
    ];
    let h = f.h_at(p);
    let hc = |m: &SymMat2, a: usize, b: usize| match (a, b) {
        (0, 0) => m.xx,
        (1, 1) => m.yy,
        _ => m.xy,
    };
    let gam = |i: usize, a: usize, b: usize| hc(&gamma[i], a, b);
    let gic = |a: usize, b: usize| hc(&gi, a, b);
    // (δh)_j = g^{ik} ∇_i h_{kj}
    let mut delta_h = [0.0; 2];
    for j in 0..2 {
        for i in 0..2 {
            for k in 0..2 {
                let mut v = hc(&dh[i], k, j);
                for l in 0..2 {
                    v -= gam(l, i, k) * hc(&h, l, j) + gam(l, i, j) * hc(&h, k, l);
                }
                delta_h[j] += gic(i, k) * v;
            }
        }
    }
    let db = [
        (f.beta_at(p + ex) - f.beta_at(p - ex)) / (2.0 * step),
        (f.beta_at(p + ey) - f.beta_at(p - ey)) / (2.0 * step),
    ];
    let beta = f.beta_at(p);
    // δβ = g^{ij} ∇_i β_j
    let mut div_b = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut v = if j == 0 { db[i].x } else { db[i].y };
            for l in 0..2 {
                v -= gam(l, i, j) * (if l == 0 { beta.x } else { beta.y });
            }
            div_b += gic(i, j) * v;
        }
    }
    let y_beta = system.lorentz_covector(p, beta);
    (
        Vec2::new(delta_h[0], delta_h[1]) - y_beta * PAIR_BETA_WEIGHT,
        PAIR_BETA_WEIGHT * div_b,
    )
}
