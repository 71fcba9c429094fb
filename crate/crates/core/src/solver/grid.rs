//! Annular grids: graded radial node sets and masked Cartesian lattices with
//! ghost layers along ∂Ω and ∂B_R.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subsolution::ConvexDomain;

/// Node radii ρ₀ < ρ₁ < … < ρ_m of a radial grid; ρ₀ lies on ∂Ω and ρ_m = R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub n: usize,
    pub radii: Vec<f64>,
}

impl RadialGrid {
    pub fn from_radii(n: usize, radii: Vec<f64>) -> Result<Self> {
        if radii.len() < 4 {
            return Err(Error::Config("radial grid needs at least 4 nodes".into()));
        }
        if !(radii[0] > 0.0) {
            return Err(Error::Config("radial grid must start at a positive radius".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("radial nodes must be strictly increasing".into()));
        }
        Ok(Self { n, radii })
    }

    /// Geometrically graded grid with `intervals` intervals on [r_inner, r_outer].
    pub fn geometric(n: usize, r_inner: f64, r_outer: f64, intervals: usize) -> Result<Self> {
        if !(r_outer > r_inner && r_inner > 0.0) || intervals < 3 {
            return Err(Error::Config(format!(
                "invalid geometric grid [{r_inner}, {r_outer}] with {intervals} intervals"
            )));
        }
        let q = (r_outer / r_inner).ln() / intervals as f64;
        let mut radii: Vec<f64> = (0..=intervals).map(|j| r_inner * (q * j as f64).exp()).collect();
        radii[0] = r_inner;
        radii[intervals] = r_outer;
        Self::from_radii(n, radii)
    }

    /// Geometric grid with a fixed ratio `ρ_{j+1}/ρ_j = exp(step)`, extended
    /// until it reaches `r_outer` (last node clipped to `r_outer`). Grids with
    /// the same inner radius and step are nested: a shorter one is a prefix of
    /// a longer one up to the last node.
    pub fn geometric_step(n: usize, r_inner: f64, r_outer: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Config("geometric step must be positive".into()));
        }
        let intervals = ((r_outer / r_inner).ln() / step - 1e-9).ceil().max(3.0) as usize;
        let mut radii: Vec<f64> = (0..intervals).map(|j| r_inner * (step * j as f64).exp()).collect();
        radii.push(r_outer);
        Self::from_radii(n, radii)
    }

    pub fn inner(&self) -> f64 {
        self.radii[0]
    }

    pub fn outer(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// Classification of a Cartesian lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeKind {
    Unused = 0,
    /// Unknown of the discrete problem: outside Ω and inside B_R.
    Active = 1,
    /// Inside (or on) Ω, referenced by an active stencil.
    InnerGhost = 2,
    /// Outside (or on) B_R, referenced by an active stencil.
    OuterGhost = 3,
}

/// Polynomial extrapolation of a ghost value along a lattice direction from
/// the boundary crossing and the active nodes beyond it (three when
/// available, else two): u_ghost = w[0]·u_boundary + Σ w[j+1]·u(nodes[j]).
#[derive(Debug, Clone, PartialEq)]
pub struct GhostRule {
    pub node: usize,
    pub inner: bool,
    /// Boundary crossing point.
    pub point: [f64; 3],
    pub weights: Vec<f64>,
    pub nodes: Vec<usize>,
}

/// Masked Cartesian lattice with spacing h, nodes x_i = (i − half)·h.
#[derive(Debug, Clone)]
pub struct CartesianGrid {
    pub n: usize,
    pub h: f64,
    pub half: usize,
    pub dims: usize,
    pub outer_radius: f64,
    pub kinds: Vec<NodeKind>,
    /// Global indices of active nodes, in lattice order.
    pub active: Vec<usize>,
    /// For active nodes their position in `active`; for ghosts their rule index.
    pub slot: Vec<u32>,
    pub ghosts: Vec<GhostRule>,
    /// Lattice offsets of the full 3^n neighbourhood (without the center).
    pub offsets: Vec<[i32; 3]>,
}

/// Minimal distance (in lattice steps) between the boundary crossing and the
/// first extrapolation node.
const THETA_MIN: f64 = 0.5;

impl CartesianGrid {
    pub fn build(n: usize, h: f64, outer_radius: f64, domain: &ConvexDomain) -> Result<Self> {
        if !(n == 2 || n == 3) {
            return Err(Error::Config(format!("Cartesian grids support n = 2, 3 (got {n})")));
        }
        if domain.n != n {
            return Err(Error::Config("domain dimension does not match the grid".into()));
        }
        if !(h > 0.0) || !(outer_radius > domain.r_out + 4.0 * h) {
            return Err(Error::Config(format!(
                "need h > 0 and R > r_out + 4h (h={h}, R={outer_radius}, r_out={})",
                domain.r_out
            )));
        }
        let half = (outer_radius / h).ceil() as usize + 4;
        let dims = 2 * half + 1;
        let total = dims.pow(n as u32);
        if total > 60_000_000 {
            return Err(Error::Config(format!("lattice with {total} nodes is too large")));
        }
        let mut offsets = Vec::new();
        let range: Vec<i32> = vec![-1, 0, 1];
        for &a in &range {
            for &b in &range {
                if n == 2 {
                    if (a, b) != (0, 0) {
                        offsets.push([a, b, 0]);
                    }
                } else {
                    for &c in &range {
                        if (a, b, c) != (0, 0, 0) {
                            offsets.push([a, b, c]);
                        }
                    }
                }
            }
        }
        let mut grid = Self {
            n,
            h,
            half,
            dims,
            outer_radius,
            kinds: vec![NodeKind::Unused; total],
            active: Vec::new(),
            slot: vec![u32::MAX; total],
            ghosts: Vec::new(),
            offsets,
        };
        let r2 = outer_radius * outer_radius;
        let mut x = [0.0; 3];
        for g in 0..total {
            grid.coords_into(g, &mut x);
            let rr: f64 = x[..n].iter().map(|v| v * v).sum();
            if rr >= r2 || domain.contains(&x[..n]) {
                continue;
            }
            // Nodes exactly on ∂Ω carry Dirichlet data and become ghosts.
            let near = rr.sqrt() <= domain.r_out + h;
            if !near || domain.signed_distance(&x[..n])? > 0.0 {
                grid.kinds[g] = NodeKind::Active;
            }
        }
        grid.active = (0..total).filter(|&g| grid.kinds[g] == NodeKind::Active).collect();
        if grid.active.is_empty() {
            return Err(Error::Config("grid has no active nodes".into()));
        }
        for (i, &g) in grid.active.iter().enumerate() {
            grid.slot[g] = i as u32;
        }
        // Ghost layer: every non-active neighbour of an active node.
        let mut needed = Vec::new();
        for &g in &grid.active {
            for off in &grid.offsets {
                let q = grid.neighbor(g, off).ok_or(Error::Stencil {
                    node: g,
                    detail: "stencil leaves the lattice".into(),
                })?;
                if grid.kinds[q] != NodeKind::Active {
                    needed.push(q);
                }
            }
        }
        needed.sort_unstable();
        needed.dedup();
        for q in needed {
            grid.coords_into(q, &mut x);
            let rr: f64 = x[..n].iter().map(|v| v * v).sum();
            let inner = rr < r2;
            let rule = grid.ghost_rule(q, inner, domain)?;
            grid.kinds[q] = if inner { NodeKind::InnerGhost } else { NodeKind::OuterGhost };
            grid.slot[q] = grid.ghosts.len() as u32;
            grid.ghosts.push(rule);
        }
        Ok(grid)
    }

    pub fn total_nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn coords_into(&self, g: usize, x: &mut [f64; 3]) {
        let mut rem = g;
        for a in (0..self.n).rev() {
            let i = rem % self.dims;
            rem /= self.dims;
            x[a] = (i as f64 - self.half as f64) * self.h;
        }
        for v in x.iter_mut().skip(self.n) {
            *v = 0.0;
        }
    }

    pub fn coords(&self, g: usize) -> Vec<f64> {
        let mut x = [0.0; 3];
        self.coords_into(g, &mut x);
        x[..self.n].to_vec()
    }

    /// Lattice multi-index of node g.
    pub fn multi_index(&self, g: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = g;
        for a in (0..self.n).rev() {
            idx[a] = rem % self.dims;
            rem /= self.dims;
        }
        idx
    }

    pub fn index_of(&self, idx: &[usize; 3]) -> usize {
        let mut g = 0;
        for &i in idx.iter().take(self.n) {
            g = g * self.dims + i;
        }
        g
    }

    /// Node at `g + off`, if inside the lattice.
    #[inline]
    pub fn neighbor(&self, g: usize, off: &[i32; 3]) -> Option<usize> {
        let idx = self.multi_index(g);
        let mut out = [0usize; 3];
        for a in 0..self.n {
            let v = idx[a] as i64 + off[a] as i64;
            if v < 0 || v >= self.dims as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.index_of(&out))
    }

    /// Stride of axis a in the flattened index.
    pub fn stride(&self, a: usize) -> usize {
        self.dims.pow((self.n - 1 - a) as u32)
    }

    fn ghost_rule(&self, q: usize, inner: bool, domain: &ConvexDomain) -> Result<GhostRule> {
        let n = self.n;
        let xq = self.coords(q);
        let mut best: Option<(f64, GhostRule)> = None;
        let on_boundary = inner && domain.signed_distance(&xq)? >= 0.0;
        for off in &self.offsets {
            let dir: Vec<f64> = (0..n).map(|a| off[a] as f64 * self.h).collect();
            let s_b = if inner {
                if on_boundary {
                    0.0
                } else {
                    domain.ray_exit(&xq, &dir)?
                }
            } else {
                match sphere_entry(&xq, &dir, self.outer_radius) {
                    Some(s) => s,
                    None => continue,
                }
            };
            let m = ((s_b + THETA_MIN).ceil() as i32).max(1);
            let mut nodes = Vec::with_capacity(3);
            for j in 0..3 {
                match self.neighbor_scaled(q, off, m + j) {
                    Some(a) if self.kinds[a] == NodeKind::Active => nodes.push(a),
                    _ => break,
                }
            }
            if nodes.len() < 2 {
                continue;
            }
            let len = (s_b * dir.iter().map(|d| d * d).sum::<f64>().sqrt()).max(0.0);
            // Lagrange weights at s = 0 for the abscissae s_b, m, m+1(, m+2).
            let abscissae: Vec<f64> = std::iter::once(s_b)
                .chain((0..nodes.len()).map(|j| (m + j as i32) as f64))
                .collect();
            let weights: Vec<f64> = abscissae
                .iter()
                .enumerate()
                .map(|(i, si)| {
                    abscissae
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, sj)| sj / (sj - si))
                        .product()
                })
                .collect();
            let mut point = [0.0; 3];
            for a in 0..n {
                point[a] = xq[a] + s_b * dir[a];
            }
            let rule = GhostRule {
                node: q,
                inner,
                point,
                weights,
                nodes,
            };
            // Prefer cubic rules, then the nearest crossing.
            let better = match &best {
                None => true,
                Some((l, b)) => {
                    rule.nodes.len() > b.nodes.len() || (rule.nodes.len() == b.nodes.len() && len < *l - 1e-14)
                }
            };
            if better {
                best = Some((len, rule));
            }
        }
        best.map(|(_, r)| r).ok_or(Error::Stencil {
            node: q,
            detail: format!("no admissible extrapolation direction for ghost at {xq:?}"),
        })
    }

    fn neighbor_scaled(&self, g: usize, off: &[i32; 3], m: i32) -> Option<usize> {
        let o = [off[0] * m, off[1] * m, off[2] * m];
        self.neighbor(g, &o)
    }
}

/// Smallest s ≥ 0 with |x + s·d| = R for x outside or on the sphere, moving inward.
fn sphere_entry(x: &[f64], d: &[f64], radius: f64) -> Option<f64> {
    let a: f64 = d.iter().map(|v| v * v).sum();
    let b: f64 = x.iter().zip(d).map(|(p, q)| p * q).sum();
    let c: f64 = x.iter().map(|v| v * v).sum::<f64>() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - a * c;
    if b >= 0.0 || disc < 0.0 {
        return None;
    }
    // Smaller root of a s² + 2 b s + c, written without cancellation.
    Some(c / (-b + disc.sqrt()))
}

/// Either grid family.
#[derive(Debug, Clone)]
pub enum AnnularGrid {
    Radial(RadialGrid),
    Cartesian(CartesianGrid),
}

impl AnnularGrid {
    pub fn outer_radius(&self) -> f64 {
        match self {
            AnnularGrid::Radial(g) => g.outer(),
            AnnularGrid::Cartesian(g) => g.outer_radius,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnnularGrid::Radial(g) => g.n,
            AnnularGrid::Cartesian(g) => g.n,
        }
    }

    /// Number of unknowns.
    pub fn unknowns(&self) -> usize {
        match self {
            AnnularGrid::Radial(g) => g.len() - 2,
            AnnularGrid::Cartesian(g) => g.active.len(),
        }
    }
}
