//! Replacing a vector-valued map with sphere-valued boundary trace by a
//! sphere-valued one through radial projection from a well-chosen center.

use serde::{Deserialize, Serialize};

use crate::energy::{check_compatible, energy_of_values, total_energy, DensityProfile};
use crate::error::{Error, Result};
use crate::grid::{norm, GridField, Region, DEFAULT_CONSTRAINT_TOL};

/// Candidates closer than this to a value of the field are skipped.
const MIN_SEPARATION: f64 = 1e-6;
/// Fresh candidate batches tried before giving up.
const RESAMPLE_BUDGET: u64 = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// `energy(extension) / energy(v)`, with `0 / 0` reported as 1.
    pub ratio: f64,
    pub original_energy: f64,
    pub extended_energy: f64,
    /// Projection center that minimized the energy of the projected map.
    pub center: Vec<f64>,
    pub candidate_index: usize,
    pub candidates_tried: usize,
    pub resamples: u64,
    /// Whether the input was sphere-valued on the boundary layer, so that the
    /// extension has the same trace.
    pub boundary_sphere_valued: bool,
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let (mut inv, mut f) = (0.0, 1.0 / base as f64);
    while index > 0 {
        inv += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    inv
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `count` Halton points in the open ball of radius 1/2 about the origin,
/// starting at sequence position `offset` and rejecting points of the cube
/// outside the ball.
pub fn halton_ball_samples(dim: usize, count: usize, offset: u64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || dim > PRIMES.len() {
        return Err(Error::Shape(format!("Halton samples support 1..={} components", PRIMES.len())));
    }
    let mut out = Vec::with_capacity(count);
    let mut k = offset + 1;
    while out.len() < count {
        let p: Vec<f64> = PRIMES[..dim].iter().map(|&b| radical_inverse(k, b) - 0.5).collect();
        if norm(&p) < 0.5 {
            out.push(p);
        }
        k += 1;
    }
    Ok(out)
}

fn project_from(values: &[f64], comps: usize, nodes: &[usize], center: &[f64], out: &mut [f64]) {
    for &i in nodes {
        let r = i * comps..(i + 1) * comps;
        let d: Vec<f64> = values[r.clone()].iter().zip(center).map(|(v, a)| v - a).collect();
        let len = norm(&d);
        for (o, di) in out[r].iter_mut().zip(&d) {
            *o = di / len;
        }
    }
}

/// Builds a sphere-valued map from `v`: projects `v` radially from centers
/// `a` in the ball of radius 1/2 (the origin first, then Halton points),
/// keeps the projection of least energy and maps it back to the sphere with
/// the inverse of the projection from that center, `w -> a + lambda w`.
/// Where `v` already lies on the sphere the composition is the identity, so
/// the boundary trace is preserved.
pub fn projected_extension(
    density: &DensityProfile,
    v: &GridField,
    region: &Region,
    sample_count: usize,
    seed: u64,
) -> Result<(GridField, ExtensionReport)> {
    let comps = v.components();
    density.exponents().validate_target(comps)?;
    check_compatible(density, v, region)?;
    if sample_count == 0 {
        return Err(Error::Options("sample_count must be positive".into()));
    }
    if v.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("field has non-finite values".into()));
    }
    let grid = v.grid().clone();
    let touched = region.touched_nodes();
    let free = region.free_nodes();
    let nodes: Vec<usize> = (0..grid.node_count()).filter(|&i| touched[i]).collect();
    let on_sphere = |i: usize| (norm(v.node(i)) - 1.0).abs() <= DEFAULT_CONSTRAINT_TOL;
    let boundary_sphere_valued = nodes.iter().filter(|&&i| !free[i]).all(|&i| on_sphere(i));
    let separation = |a: &[f64]| {
        nodes
            .iter()
            .map(|&i| norm(&v.node(i).iter().zip(a).map(|(x, y)| x - y).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min)
    };

    let mu = 0.0;
    let mut scratch = v.values().to_vec();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut tried = 0usize;
    let mut resamples = 0u64;
    loop {
        let mut candidates = Vec::with_capacity(sample_count);
        if resamples == 0 {
            candidates.push(vec![0.0; comps]);
        }
        let offset = (seed.wrapping_add(resamples)).wrapping_mul(sample_count as u64);
        candidates.extend(halton_ball_samples(comps, sample_count - candidates.len(), offset)?);
        for a in &candidates {
            let index = tried;
            tried += 1;
            if separation(a) < MIN_SEPARATION {
                continue;
            }
            project_from(v.values(), comps, &nodes, a, &mut scratch);
            let e = energy_of_values(density, &grid, comps, &scratch, region, mu)?;
            if best.as_ref().is_none_or(|(be, _, _)| e < *be) {
                best = Some((e, index, a.clone()));
            }
        }
        if best.is_some() {
            break;
        }
        resamples += 1;
        if resamples > RESAMPLE_BUDGET {
            return Err(Error::Sampling(format!(
                "every one of {tried} projection centers came within {MIN_SEPARATION:e} of the field"
            )));
        }
    }
    let (_, candidate_index, center) = best.expect("loop exits with a candidate");

    project_from(v.values(), comps, &nodes, &center, &mut scratch);
    let aa: f64 = center.iter().map(|x| x * x).sum();
    for &i in &nodes {
        let r = i * comps..(i + 1) * comps;
        if on_sphere(i) && !free[i] {
            scratch[r.clone()].copy_from_slice(v.node(i));
            continue;
        }
        let w = &scratch[r.clone()];
        let aw: f64 = center.iter().zip(w).map(|(a, b)| a * b).sum();
        let lambda = -aw + (aw * aw + 1.0 - aa).sqrt();
        let mapped: Vec<f64> = center.iter().zip(w).map(|(a, b)| a + lambda * b).collect();
        let len = norm(&mapped);
        scratch[r].iter_mut().zip(&mapped).for_each(|(s, m)| *s = m / len);
    }
    let extended = GridField::new(grid, comps, scratch)?;
    let original_energy = total_energy(density, v, region)?;
    let extended_energy = total_energy(density, &extended, region)?;
    let ratio = if original_energy == 0.0 && extended_energy == 0.0 { 1.0 } else { extended_energy / original_energy };
    let report = ExtensionReport {
        ratio,
        original_energy,
        extended_energy,
        center,
        candidate_index,
        candidates_tried: tried,
        resamples,
        boundary_sphere_valued,
    };
    Ok((extended, report))
}
