//! Shifted-force Lennard–Jones fluid in a periodic orthorhombic box.

use serde::{Deserialize, Serialize};

use crate::dynamics::{LangevinStepper, NoiseStream, PeriodicBox, PhaseState, SystemSpec};
use crate::error::{Error, Result};

/// Pair distances below this are treated as overlapping particles.
pub const OVERLAP_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LjParams {
    pub sigma: f64,
    pub epsilon: f64,
    pub r_cut: f64,
}

impl Default for LjParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            epsilon: 1.0,
            r_cut: 2.5,
        }
    }
}

impl LjParams {
    /// Plain 12-6 potential `v(r)`.
    #[inline]
    pub fn v(&self, r: f64) -> f64 {
        let s6 = (self.sigma / r).powi(6);
        4.0 * self.epsilon * (s6 * s6 - s6)
    }

    /// `v'(r)`.
    #[inline]
    pub fn dv(&self, r: f64) -> f64 {
        let s6 = (self.sigma / r).powi(6);
        4.0 * self.epsilon * (-12.0 * s6 * s6 + 6.0 * s6) / r
    }

    /// Shifted-force potential; zero beyond the cutoff.
    pub fn v_sf(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(r));
        }
        if r > self.r_cut {
            return Ok(0.0);
        }
        let rc = self.r_cut;
        Ok(self.v(r) - self.v(rc) - (r - rc) * self.dv(rc))
    }

    /// `v_SF'(r) = v'(r) − v'(r_c)` inside the cutoff.
    pub fn dv_sf(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(r));
        }
        if r > self.r_cut {
            return Ok(0.0);
        }
        Ok(self.dv(r) - self.dv(self.r_cut))
    }

    pub fn validate(&self, cell: &PeriodicBox) -> Result<()> {
        if !(self.sigma > 0.0 && self.epsilon > 0.0 && self.r_cut > 0.0) {
            return Err(Error::invalid("lj", format!("parameters must be positive: {self:?}")));
        }
        if cell.dim() != 3 {
            return Err(Error::invalid("box", "the Lennard-Jones fluid is three-dimensional"));
        }
        if let Some(l) = cell.lengths().iter().find(|l| **l <= 2.0 * self.r_cut) {
            return Err(Error::invalid(
                "box",
                format!("side {l} must exceed twice the cutoff {}", self.r_cut),
            ));
        }
        Ok(())
    }
}

/// Free function form of [`LjParams::v_sf`].
pub fn v_sf(r: f64, params: &LjParams) -> Result<f64> {
    params.v_sf(r)
}

/// Precomputed pair-force constants for the inner loop.
#[derive(Clone, Copy)]
struct PairKernel {
    sigma2: f64,
    four_eps: f64,
    rc: f64,
    rc2: f64,
    v_rc: f64,
    dv_rc: f64,
}

impl PairKernel {
    fn new(params: &LjParams) -> Self {
        Self {
            sigma2: params.sigma * params.sigma,
            four_eps: 4.0 * params.epsilon,
            rc: params.r_cut,
            rc2: params.r_cut * params.r_cut,
            v_rc: params.v(params.r_cut),
            dv_rc: params.dv(params.r_cut),
        }
    }

    /// Returns `(v_SF(r), −v_SF'(r)/r)` for `r² < r_c²`.
    #[inline(always)]
    fn eval(&self, r2: f64) -> (f64, f64) {
        let inv_r2 = 1.0 / r2;
        let inv_r = inv_r2.sqrt();
        let s2 = self.sigma2 * inv_r2;
        let s6 = s2 * s2 * s2;
        let s12 = s6 * s6;
        let energy = self.four_eps * (s12 - s6) - self.v_rc - (r2 * inv_r - self.rc) * self.dv_rc;
        let f_over_r = self.four_eps * (12.0 * s12 - 6.0 * s6) * inv_r2 + self.dv_rc * inv_r;
        (energy, f_over_r)
    }
}

/// Linked cells of side at least `r_cut`, with particles sorted by cell.
///
/// Neighbor cells are the 27 periodic offsets, de-duplicated when an axis
/// has fewer than three cells, and each unordered cell pair is listed once.
#[derive(Clone, Debug)]
pub struct CellList {
    cells_per_axis: [usize; 3],
    cell_start: Vec<usize>,
    order: Vec<usize>,
    sorted: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl CellList {
    pub fn build(q: &[f64], cell: &PeriodicBox, r_cut: f64) -> Result<Self> {
        if cell.dim() != 3 || q.len() % 3 != 0 {
            return Err(Error::invalid("cell list", "expects three-dimensional particles"));
        }
        let n = q.len() / 3;
        let mut cells_per_axis = [1usize; 3];
        for (axis, c) in cells_per_axis.iter_mut().enumerate() {
            *c = ((cell.length(axis) / r_cut).floor() as usize).max(1);
        }
        let n_cells = cells_per_axis.iter().product::<usize>();

        let mut wrapped = vec![0.0; q.len()];
        let mut cell_of = vec![0usize; n];
        let mut counts = vec![0usize; n_cells + 1];
        for i in 0..n {
            let mut idx = 0;
            for axis in 0..3 {
                let x = cell.wrap(q[3 * i + axis], axis);
                wrapped[3 * i + axis] = x;
                let nc = cells_per_axis[axis];
                let c = ((x / cell.length(axis)) * nc as f64) as usize;
                idx = idx * nc + c.min(nc - 1);
            }
            cell_of[i] = idx;
            counts[idx + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let cell_start = counts.clone();
        let mut fill = counts;
        let mut order = vec![0usize; n];
        for i in 0..n {
            let c = cell_of[i];
            order[fill[c]] = i;
            fill[c] += 1;
        }
        let mut sorted = vec![0.0; q.len()];
        for (slot, &i) in order.iter().enumerate() {
            sorted[3 * slot..3 * slot + 3].copy_from_slice(&wrapped[3 * i..3 * i + 3]);
        }

        let [nx, ny, nz] = cells_per_axis;
        let mut pairs = Vec::with_capacity(n_cells * 14);
        let mut neighbors = Vec::with_capacity(27);
        for cx in 0..nx {
            for cy in 0..ny {
                for cz in 0..nz {
                    let c = (cx * ny + cy) * nz + cz;
                    neighbors.clear();
                    for dx in [nx - 1, 0, 1] {
                        for dy in [ny - 1, 0, 1] {
                            for dz in [nz - 1, 0, 1] {
                                let nb = (((cx + dx) % nx) * ny + (cy + dy) % ny) * nz + (cz + dz) % nz;
                                neighbors.push(nb);
                            }
                        }
                    }
                    neighbors.sort_unstable();
                    neighbors.dedup();
                    pairs.extend(neighbors.iter().filter(|&&nb| nb >= c).map(|&nb| (c, nb)));
                }
            }
        }
        Ok(Self {
            cells_per_axis,
            cell_start,
            order,
            sorted,
            pairs,
        })
    }

    pub fn cells_per_axis(&self) -> [usize; 3] {
        self.cells_per_axis
    }

    pub fn n_cells(&self) -> usize {
        self.cell_start.len() - 1
    }

    /// Original particle indices stored in cell `c`.
    pub fn particles_in(&self, c: usize) -> &[usize] {
        &self.order[self.cell_start[c]..self.cell_start[c + 1]]
    }

    /// Unordered neighboring cell pairs `(c, c')` with `c ≤ c'`.
    pub fn cell_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Branch-free minimum image for `|dx| < l` (wrapped coordinates).
#[inline(always)]
fn fold(dx: f64, l: f64, inv_l: f64) -> f64 {
    let s = dx * inv_l;
    dx - l * ((s + 0.5f64.copysign(s)) as i32 as f64)
}

/// Forces from a prebuilt cell list, written into `out`; returns the energy.
pub fn lj_forces(
    q: &[f64],
    cell: &PeriodicBox,
    params: &LjParams,
    cells: &CellList,
    out: &mut [f64],
) -> Result<f64> {
    params.validate(cell)?;
    if out.len() != q.len() || cells.order.len() * 3 != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: out.len(),
        });
    }
    let kernel = PairKernel::new(params);
    let l = [cell.length(0), cell.length(1), cell.length(2)];
    let inv_l = [1.0 / l[0], 1.0 / l[1], 1.0 / l[2]];
    let x: Vec<[f64; 3]> = cells.sorted.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let mut f = vec![[0.0f64; 3]; x.len()];
    let mut energy = 0.0;
    let min2 = OVERLAP_THRESHOLD * OVERLAP_THRESHOLD;
    let mut overlap: Option<(usize, usize, f64)> = None;

    let mut interact = |a: usize, b: usize, f: &mut [[f64; 3]]| {
        let (xa, xb) = (x[a], x[b]);
        let dx = fold(xa[0] - xb[0], l[0], inv_l[0]);
        let dy = fold(xa[1] - xb[1], l[1], inv_l[1]);
        let dz = fold(xa[2] - xb[2], l[2], inv_l[2]);
        let r2 = dx * dx + dy * dy + dz * dz;
        if r2 < kernel.rc2 {
            if r2 < min2 {
                overlap.get_or_insert((a, b, r2));
                return;
            }
            let (e, s) = kernel.eval(r2);
            energy += e;
            let fa = &mut f[a];
            fa[0] += s * dx;
            fa[1] += s * dy;
            fa[2] += s * dz;
            let fb = &mut f[b];
            fb[0] -= s * dx;
            fb[1] -= s * dy;
            fb[2] -= s * dz;
        }
    };

    for &(c1, c2) in &cells.pairs {
        let (s1, e1) = (cells.cell_start[c1], cells.cell_start[c1 + 1]);
        if c1 == c2 {
            for a in s1..e1 {
                for b in a + 1..e1 {
                    interact(a, b, &mut f);
                }
            }
        } else {
            let (s2, e2) = (cells.cell_start[c2], cells.cell_start[c2 + 1]);
            for a in s1..e1 {
                for b in s2..e2 {
                    interact(a, b, &mut f);
                }
            }
        }
    }
    if let Some((a, b, r2)) = overlap {
        return Err(Error::SingularConfiguration {
            i: cells.order[a].min(cells.order[b]),
            j: cells.order[a].max(cells.order[b]),
            distance: r2.sqrt(),
        });
    }
    for (slot, &i) in cells.order.iter().enumerate() {
        out[3 * i..3 * i + 3].copy_from_slice(&f[slot]);
    }
    Ok(energy)
}

/// Evaluates forces and returns the energy. Boxes with fewer than three
/// cells along some axis visit every pair anyway and take the all-pairs path.
pub fn lj_forces_auto(q: &[f64], cell: &PeriodicBox, params: &LjParams, out: &mut [f64]) -> Result<f64> {
    params.validate(cell)?;
    if cell.dim() == 3 && (0..3).any(|axis| cell.length(axis) < 3.0 * params.r_cut) {
        return lj_forces_all_pairs(q, cell, params, out);
    }
    let cells = CellList::build(q, cell, params.r_cut)?;
    lj_forces(q, cell, params, &cells, out)
}

const LANES: usize = 4;

/// All-pairs kernel over structure-of-arrays coordinates.
///
/// Each row `a` computes every displacement, compacts the pairs inside the
/// cutoff without branching, and evaluates the pair kernel only on those.
/// All three loops vectorize.
pub fn lj_forces_all_pairs(q: &[f64], cell: &PeriodicBox, params: &LjParams, out: &mut [f64]) -> Result<f64> {
    params.validate(cell)?;
    if cell.dim() != 3 || q.len() % 3 != 0 {
        return Err(Error::invalid("all-pairs kernel", "expects three-dimensional particles"));
    }
    if out.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: out.len(),
        });
    }
    let n = q.len() / 3;
    let kernel = PairKernel::new(params);
    let l = [cell.length(0), cell.length(1), cell.length(2)];
    let inv_l = [1.0 / l[0], 1.0 / l[1], 1.0 / l[2]];
    let mut pos = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        for axis in 0..3 {
            pos[axis][i] = cell.wrap(q[3 * i + axis], axis);
        }
    }
    let mut frc = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut disp = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    // compacted pairs: partner, displacement, r², then force factor and energy
    let mut partner = vec![0usize; n + 1];
    let mut near = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
    let (mut fac, mut en) = (vec![0.0; n], vec![0.0; n]);
    let min2 = OVERLAP_THRESHOLD * OVERLAP_THRESHOLD;
    let mut energy = 0.0;
    for a in 0..n.saturating_sub(1) {
        let m = n - a - 1;
        let (xa, ya, za) = (pos[0][a], pos[1][a], pos[2][a]);
        let (px, py, pz) = (&pos[0][a + 1..], &pos[1][a + 1..], &pos[2][a + 1..]);
        let [dx, dy, dz, r2] = &mut disp;
        let (dx, dy, dz, r2) = (&mut dx[..m], &mut dy[..m], &mut dz[..m], &mut r2[..m]);
        let mut closest = f64::INFINITY;
        for b in 0..m {
            let x = fold(xa - px[b], l[0], inv_l[0]);
            let y = fold(ya - py[b], l[1], inv_l[1]);
            let z = fold(za - pz[b], l[2], inv_l[2]);
            dx[b] = x;
            dy[b] = y;
            dz[b] = z;
            r2[b] = x * x + y * y + z * z;
            closest = closest.min(r2[b]);
        }
        if closest < min2 {
            let b = r2.iter().position(|&v| v < min2).unwrap_or(0);
            return Err(Error::SingularConfiguration {
                i: a,
                j: a + 1 + b,
                distance: r2[b].sqrt(),
            });
        }
        let mut cnt = 0;
        for b in 0..m {
            partner[cnt] = b;
            near[0][cnt] = dx[b];
            near[1][cnt] = dy[b];
            near[2][cnt] = dz[b];
            near[3][cnt] = r2[b];
            cnt += usize::from(r2[b] < kernel.rc2);
        }
        let [nx, ny, nz, nr2] = &near;
        let (nx, ny, nz, nr2) = (&nx[..cnt], &ny[..cnt], &nz[..cnt], &nr2[..cnt]);
        let (fac, en) = (&mut fac[..cnt], &mut en[..cnt]);
        for k in 0..cnt {
            let (e, s) = kernel.eval(nr2[k]);
            fac[k] = s;
            en[k] = e;
        }
        let mut acc = [[0.0f64; LANES]; 4];
        let full = cnt / LANES * LANES;
        for base in (0..full).step_by(LANES) {
            for j in 0..LANES {
                let k = base + j;
                acc[0][j] += fac[k] * nx[k];
                acc[1][j] += fac[k] * ny[k];
                acc[2][j] += fac[k] * nz[k];
                acc[3][j] += en[k];
            }
        }
        for k in full..cnt {
            acc[0][0] += fac[k] * nx[k];
            acc[1][0] += fac[k] * ny[k];
            acc[2][0] += fac[k] * nz[k];
            acc[3][0] += en[k];
        }
        let [fx, fy, fz] = &mut frc;
        let (rx, ry, rz) = (&mut fx[a + 1..], &mut fy[a + 1..], &mut fz[a + 1..]);
        for k in 0..cnt {
            let b = partner[k];
            rx[b] -= fac[k] * nx[k];
            ry[b] -= fac[k] * ny[k];
            rz[b] -= fac[k] * nz[k];
        }
        fx[a] += acc[0].iter().sum::<f64>();
        fy[a] += acc[1].iter().sum::<f64>();
        fz[a] += acc[2].iter().sum::<f64>();
        energy += acc[3].iter().sum::<f64>();
    }
    for i in 0..n {
        for axis in 0..3 {
            out[3 * i + axis] = frc[axis][i];
        }
    }
    Ok(energy)
}

/// O(N²) minimum-image double loop, used as the reference for [`lj_forces`].
pub fn lj_forces_brute(q: &[f64], cell: &PeriodicBox, params: &LjParams) -> Result<(Vec<f64>, f64)> {
    params.validate(cell)?;
    let n = q.len() / 3;
    let mut f = vec![0.0; q.len()];
    let mut energy = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let mut d = [0.0; 3];
            for axis in 0..3 {
                d[axis] = cell.minimum_image(q[3 * i + axis] - q[3 * j + axis], axis);
            }
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r < OVERLAP_THRESHOLD {
                return Err(Error::SingularConfiguration { i, j, distance: r });
            }
            if r <= params.r_cut {
                energy += params.v_sf(r)?;
                let mag = -params.dv_sf(r)?;
                for axis in 0..3 {
                    f[3 * i + axis] += mag * d[axis] / r;
                    f[3 * j + axis] -= mag * d[axis] / r;
                }
            }
        }
    }
    Ok((f, energy))
}

/// Side length of the cubic box holding `n` particles at `density`.
pub fn box_side(n: usize, density: f64) -> f64 {
    (n as f64 / density).cbrt()
}

/// Simple cubic lattice filled row-major (x slowest) in a cubic box of side
/// `(N/ϱ)^{1/3}`. When `N` is not a perfect cube the last layers are partial.
pub fn lattice_init(n: usize, density: f64) -> Result<(Vec<f64>, PeriodicBox)> {
    if n == 0 {
        return Err(Error::invalid("n_particles", "must be at least 1"));
    }
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::invalid("density", format!("must be positive, got {density}")));
    }
    let mut side = 1usize;
    while side * side * side < n {
        side += 1;
    }
    let l = box_side(n, density);
    let a = l / side as f64;
    let mut q = Vec::with_capacity(3 * n);
    'fill: for ix in 0..side {
        for iy in 0..side {
            for iz in 0..side {
                if q.len() == 3 * n {
                    break 'fill;
                }
                q.extend([(ix as f64 + 0.5) * a, (iy as f64 + 0.5) * a, (iz as f64 + 0.5) * a]);
            }
        }
    }
    Ok((q, PeriodicBox::cubic(l, 3)?))
}

/// Energies averaged over the final tenth of a thermalization run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalizationReport {
    pub steps: u64,
    pub mean_kinetic_energy: f64,
    pub mean_potential_energy: f64,
    /// `2⟨K⟩/d`, to be compared with `1/β`.
    pub kinetic_temperature: f64,
}

/// Evolves equilibrium BAOAB for `round(t_therm/Δt)` steps.
pub fn thermalize(
    mut state: PhaseState,
    system: &SystemSpec,
    t_therm: f64,
    noise: &mut NoiseStream,
) -> Result<(PhaseState, ThermalizationReport)> {
    if !(t_therm.is_finite() && t_therm >= 0.0) {
        return Err(Error::invalid("t_therm", format!("must be nonnegative, got {t_therm}")));
    }
    let mut stepper = LangevinStepper::new(system, None, &state)?;
    let steps = if t_therm == 0.0 {
        0
    } else {
        (t_therm / system.params.dt).round() as u64
    };
    let window = (steps / 10).max(1);
    let (mut kin, mut pot, mut count) = (0.0, 0.0, 0u64);
    if steps == 0 {
        kin = stepper.kinetic_energy(&state);
        pot = stepper.potential_energy();
        count = 1;
    }
    for step in 0..steps {
        stepper.step(&mut state, noise)?;
        if step + window >= steps {
            kin += stepper.kinetic_energy(&state);
            pot += stepper.potential_energy();
            count += 1;
        }
    }
    let mean_kinetic_energy = kin / count as f64;
    let report = ThermalizationReport {
        steps,
        mean_kinetic_energy,
        mean_potential_energy: pot / count as f64,
        kinetic_temperature: 2.0 * mean_kinetic_energy / state.dim() as f64,
    };
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_config(n: usize, l: f64, seed: u64) -> Vec<f64> {
        // rejection keeps particles at least 0.8 apart
        let mut noise = NoiseStream::new(seed, 0);
        let cell = PeriodicBox::cubic(l, 3).unwrap();
        let mut q: Vec<f64> = Vec::with_capacity(3 * n);
        while q.len() < 3 * n {
            let cand = [noise.uniform() * l, noise.uniform() * l, noise.uniform() * l];
            let ok = q.chunks(3).all(|p| {
                let d2: f64 = (0..3)
                    .map(|a| cell.minimum_image(p[a] - cand[a], a).powi(2))
                    .sum();
                d2 > 0.64
            });
            if ok {
                q.extend(cand);
            }
        }
        q
    }

    #[test]
    fn shifted_force_vanishes_at_cutoff() {
        let p = LjParams::default();
        assert_eq!(p.v_sf(2.5).unwrap(), 0.0);
        assert_eq!(p.dv_sf(2.5).unwrap(), 0.0);
        assert_eq!(p.v_sf(3.0).unwrap(), 0.0);
        assert!(p.v_sf(0.0).is_err());
        assert!(p.v_sf(-1.0).is_err());
    }

    #[test]
    fn shifted_force_values_against_numeric_derivative() {
        // oracle: v' by 4th-order central differences of the plain 12-6 form
        let p = LjParams::default();
        let v = |r: f64| 4.0 * (r.powi(-12) - r.powi(-6));
        let h = 1e-4;
        let dv_num = |r: f64| (-v(r + 2.0 * h) + 8.0 * v(r + h) - 8.0 * v(r - h) + v(r - 2.0 * h)) / (12.0 * h);
        let dv_rc = dv_num(2.5);
        assert!((dv_rc - 0.038_999_477_452_8).abs() < 1e-9);
        let rmin = 2f64.powf(1.0 / 6.0);
        let expected = v(rmin) - v(2.5) - (rmin - 2.5) * dv_rc;
        assert!((p.v_sf(rmin).unwrap() - expected).abs() < 1e-9);
        assert!((p.v_sf(rmin).unwrap() + 0.929_959_848_576_665).abs() < 1e-12);
        // pair force magnitude at r = 1 is |−24 − v'(r_c)|
        assert!((p.dv_sf(1.0).unwrap().abs() - (24.0 + dv_rc)).abs() < 1e-9);
    }

    #[test]
    fn pair_at_potential_minimum_feels_shift_force() {
        let l = 8.0;
        let cell = PeriodicBox::cubic(l, 3).unwrap();
        let r = 2f64.powf(1.0 / 6.0);
        // straddle the boundary to exercise the minimum image
        let q = vec![l - 0.5 * r, 1.0, 1.0, 0.5 * r, 1.0, 1.0];
        let mut f = vec![0.0; 6];
        lj_forces_auto(&q, &cell, &LjParams::default(), &mut f).unwrap();
        let dv_rc = LjParams::default().dv(2.5);
        // particle 0 sits at x = -r/2 relative to particle 1: pushed toward -x
        assert!((f[0] + dv_rc).abs() < 1e-12, "{f:?}");
        assert!((f[3] - dv_rc).abs() < 1e-12);
        assert!(f[1].abs() < 1e-15 && f[2].abs() < 1e-15);
    }

    #[test]
    fn single_particle_feels_nothing() {
        let cell = PeriodicBox::cubic(6.0, 3).unwrap();
        let mut f = vec![1.0; 3];
        let e = lj_forces_auto(&[1.0, 2.0, 3.0], &cell, &LjParams::default(), &mut f).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(f, vec![0.0; 3]);
    }

    #[test]
    fn overlapping_particles_are_singular() {
        let cell = PeriodicBox::cubic(6.0, 3).unwrap();
        let q = vec![1.0, 1.0, 1.0, 1.0 + 1e-8, 1.0, 1.0];
        let mut f = vec![0.0; 6];
        let err = lj_forces_auto(&q, &cell, &LjParams::default(), &mut f).unwrap_err();
        assert!(matches!(err, Error::SingularConfiguration { i: 0, j: 1, .. }));
        assert!(lj_forces_brute(&q, &cell, &LjParams::default()).is_err());
    }

    #[test]
    fn small_box_is_rejected() {
        let cell = PeriodicBox::cubic(4.9, 3).unwrap();
        let mut f = vec![0.0; 3];
        assert!(lj_forces_auto(&[0.0; 3], &cell, &LjParams::default(), &mut f).is_err());
    }

    #[test]
    fn cell_list_matches_brute_force() {
        let params = LjParams::default();
        for (n, l) in [(27, 5.5), (64, 7.6), (125, 9.0), (343, 11.0)] {
            let cell = PeriodicBox::cubic(l, 3).unwrap();
            let q = random_config(n, l, n as u64);
            let (fb, eb) = lj_forces_brute(&q, &cell, &params).unwrap();
            let cells = CellList::build(&q, &cell, params.r_cut).unwrap();
            let mut f = vec![0.0; q.len()];
            let mut g = vec![0.0; q.len()];
            let e = lj_forces(&q, &cell, &params, &cells, &mut f).unwrap();
            let eg = lj_forces_all_pairs(&q, &cell, &params, &mut g).unwrap();
            for (path, f, e) in [("cells", &f, e), ("all pairs", &g, eg)] {
                let worst = f.iter().zip(&fb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(worst < 1e-10, "{path} n={n}: {worst}");
                assert!((e - eb).abs() < 1e-10 * (1.0 + eb.abs()));
            }
        }
    }

    #[test]
    fn every_particle_in_exactly_one_cell() {
        let cell = PeriodicBox::cubic(11.0, 3).unwrap();
        let q = random_config(200, 11.0, 1);
        let cells = CellList::build(&q, &cell, 2.5).unwrap();
        assert_eq!(cells.cells_per_axis(), [4, 4, 4]);
        let mut seen = vec![0; 200];
        for c in 0..cells.n_cells() {
            for &i in cells.particles_in(c) {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
        // 64 cells, 27 neighbours each, each unordered pair once: 64·14
        assert_eq!(cells.cell_pairs().len(), 64 * 14);
    }

    #[test]
    fn forces_are_translation_invariant_and_sum_to_zero() {
        let l = 7.6;
        let cell = PeriodicBox::cubic(l, 3).unwrap();
        let params = LjParams::default();
        let q = random_config(64, l, 9);
        let mut f = vec![0.0; q.len()];
        lj_forces_auto(&q, &cell, &params, &mut f).unwrap();
        for axis in 0..3 {
            let total: f64 = f.iter().skip(axis).step_by(3).sum();
            assert!(total.abs() < 1e-10);
        }
        let shifted: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, x)| cell.wrap(x + [1.3, -0.7, 2.9][i % 3], i % 3))
            .collect();
        let mut g = vec![0.0; q.len()];
        lj_forces_auto(&shifted, &cell, &params, &mut g).unwrap();
        let worst = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        assert!(worst <= 1e-12 * scale, "{worst} vs force scale {scale}");
    }

    #[test]
    fn lattice_geometry() {
        let (q, cell) = lattice_init(8, 1.0).unwrap();
        assert_eq!(q.len(), 24);
        assert!((cell.length(0) - 2.0).abs() < 1e-15);
        let d: f64 = (0..3).map(|a| (q[a] - q[3 + a]).powi(2)).sum::<f64>().sqrt();
        assert!((d - 1.0).abs() < 1e-15);

        let (_, c7) = lattice_init(1000, 0.7).unwrap();
        assert!((c7.length(0) - 11.26247880443606).abs() < 1e-12);
        let (_, c6) = lattice_init(1000, 0.6).unwrap();
        assert!((c6.length(0) - 11.856311014966874).abs() < 1e-12);

        // partial fill keeps all pair distances at least one spacing
        let (q, cell) = lattice_init(10, 0.5).unwrap();
        let a = cell.length(0) / 3.0;
        for i in 0..10 {
            for j in i + 1..10 {
                let d2: f64 = (0..3)
                    .map(|ax| cell.minimum_image(q[3 * i + ax] - q[3 * j + ax], ax).powi(2))
                    .sum();
                assert!(d2.sqrt() >= a - 1e-12);
            }
        }
    }

    #[test]
    fn zero_thermalization_is_identity() {
        use crate::dynamics::{LangevinParams, Potential};
        let (q, cell) = lattice_init(27, 0.1).unwrap();
        let state = PhaseState::new(q, vec![0.1; 81], 3).unwrap();
        let system = SystemSpec::new(
            Potential::LennardJones(LjParams::default()),
            LangevinParams::new(1.0, 1.0, 1e-3).unwrap(),
            Some(cell),
        );
        let (out, report) = thermalize(state.clone(), &system, 0.0, &mut NoiseStream::new(0, 0)).unwrap();
        assert_eq!(out, state);
        assert_eq!(report.steps, 0);
    }
}
