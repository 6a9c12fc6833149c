//! Seeded point sampling used by the heuristic checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::polyalg::{Polynomial, SemialgebraicSet};
use crate::sdp;
use crate::Result;

pub const DEFAULT_SEED: u64 = 20_240_917;

pub type SampleBox = Vec<(f64, f64)>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_in_box<R: Rng>(rng: &mut R, bx: &[(f64, f64)]) -> Vec<f64> {
    bx.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
}

/// Cube `[c - r, c + r]^n` around `center`.
pub fn cube(center: &[f64], radius: f64) -> SampleBox {
    center.iter().map(|&c| (c - radius, c + radius)).collect()
}

/// The set's own bounding box, or the cube of radius 10 at the origin.
pub fn box_for(set: &SemialgebraicSet) -> SampleBox {
    set.bounding_box().unwrap_or_else(|| cube(&vec![0.0; set.nvars()], 10.0))
}

/// Up to `count` points of `set` by rejection from `bx`, giving up after
/// `max_tries` draws.
pub fn sample_set<R: Rng>(
    rng: &mut R,
    set: &SemialgebraicSet,
    bx: &[(f64, f64)],
    count: usize,
    max_tries: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..max_tries {
        if out.len() == count {
            break;
        }
        let x = uniform_in_box(rng, bx);
        if set.contains(&x, 0.0) {
            out.push(x);
        }
    }
    out
}

/// Smallest Hessian eigenvalue of `f` over `points`.
pub fn min_hessian_eigenvalue(f: &Polynomial, points: &[Vec<f64>]) -> Result<f64> {
    let h = f.hessian();
    let mut worst = f64::INFINITY;
    for x in points {
        worst = worst.min(sdp::min_eigenvalue(&h.eval(x)?)?);
    }
    Ok(worst)
}

/// Whether `f` looks convex on `points`, relative to its Hessian scale.
pub fn sampled_convex(f: &Polynomial, points: &[Vec<f64>]) -> Result<bool> {
    if f.degree() <= 1 {
        return Ok(true);
    }
    let h = f.hessian();
    for x in points {
        let m = h.eval(x)?;
        let scale = m.norm().max(1.0);
        if sdp::min_eigenvalue(&m)? < -1e-9 * scale {
            return Ok(false);
        }
    }
    Ok(true)
}
