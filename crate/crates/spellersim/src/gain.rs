//! Expected discrimination gain.
//!
//! Selecting the next flash group maximizes the expected Kullback-Leibler
//! divergence between the hypothetical next posterior and the current one,
//! marginalized over the next classifier score. Grouping flashed and
//! non-flashed characters collapses that expectation to a one-dimensional
//! function of the flashed probability mass P1, so the whole objective can
//! be precomputed once per likelihood pair and then answered by table
//! lookup.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::bayes::LikelihoodModel;
use crate::error::{Error, Result};

/// Default number of P1 samples in a precomputed curve.
pub const DEFAULT_CURVE_GRID: usize = 1001;

/// Absolute tolerance for the adaptive quadrature.
const QUAD_TOL: f64 = 1e-10;
const QUAD_MAX_DEPTH: u32 = 60;
/// Integration bounds extend this many sigmas beyond the two means; the
/// truncated tails carry less than 1e-14 of the mass.
const TAIL_SIGMAS: f64 = 8.0;

/// Kullback-Leibler divergence `KL(g || q)` of two discrete distributions,
/// natural log, with the `0 * log(0/q) = 0` convention.
pub fn kl_divergence(g: &[f64], q: &[f64]) -> Result<f64> {
    if g.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "distributions differ in length: {} vs {}",
            g.len(),
            q.len()
        )));
    }
    let mut acc = 0.0;
    for (&gi, &qi) in g.iter().zip(q) {
        if gi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::InvalidInput(
                    "KL divergence undefined: q has zero mass where g does not".into(),
                ));
            }
            acc += gi * (gi / qi).ln();
        }
    }
    Ok(acc)
}

/// Integrand of the expected discrimination gain at score `z` for flashed
/// mass `p1`:
///
/// `S = p1*l1*ln(l1/D) + (1-p1)*l0*ln(l0/D)` with `D = l0*(1-p1) + l1*p1`.
///
/// The `p1 = 0` and `p1 = 1` limits are exactly zero. Pointwise `S >= 0`
/// because it equals `D` times a KL divergence of two binary distributions.
pub fn gain_integrand(p1: f64, z: f64, model: &LikelihoodModel) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p1));
    if p1 <= 0.0 || p1 >= 1.0 {
        return 0.0;
    }
    let l0 = model.density(z, false);
    let l1 = model.density(z, true);
    if l0 == l1 {
        // Equal densities make both log ratios exactly zero; evaluating the
        // mixture here would only add rounding noise.
        return 0.0;
    }
    let mix = l0 * (1.0 - p1) + l1 * p1;
    if mix <= 0.0 {
        // Both densities underflowed; the true integrand is negligible here.
        return 0.0;
    }
    let mut s = 0.0;
    if l1 > 0.0 {
        s += p1 * l1 * (l1 / mix).ln();
    }
    if l0 > 0.0 {
        s += (1.0 - p1) * l0 * (l0 / mix).ln();
    }
    s
}

/// Expected discrimination gain for flashed mass `p1`, by adaptive Simpson
/// quadrature of [`gain_integrand`] over `[min(mu) - 8s, max(mu) + 8s]`.
pub fn expected_gain(p1: f64, model: &LikelihoodModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::InvalidInput(format!("p1 must lie in [0, 1], got {p1}")));
    }
    if p1 == 0.0 || p1 == 1.0 {
        return Ok(0.0);
    }
    let lo = model.mu0().min(model.mu1()) - TAIL_SIGMAS * model.sigma();
    let hi = model.mu0().max(model.mu1()) + TAIL_SIGMAS * model.sigma();
    adaptive_simpson(&|z| gain_integrand(p1, z, model), lo, hi, QUAD_TOL)
}

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= QUAD_MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] after {QUAD_MAX_DEPTH} refinements"
        )));
    }
    let half_tol = 0.5 * tol;
    let l = adaptive_step(f, a, m, fa, flm, fm, left, half_tol, depth + 1)?;
    let r = adaptive_step(f, m, b, fm, frm, fb, right, half_tol, depth + 1)?;
    Ok(l + r)
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`, assumed
/// unimodal there; returns the abscissa to within `xtol`.
fn golden_section_max(
    f: &dyn Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
) -> Result<f64> {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Precomputed expected-gain curve over a uniform P1 grid, with the maximizer
/// `p_opt` refined by golden-section search.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    model: LikelihoodModel,
    p1_grid: Vec<f64>,
    gain: Vec<f64>,
    p_opt: f64,
    gain_max: f64,
}

impl GainCurve {
    /// Evaluate the gain on `grid_size` uniform P1 samples (at least 101).
    pub fn build(model: &LikelihoodModel, grid_size: usize) -> Result<Self> {
        if grid_size < 101 {
            return Err(Error::InvalidInput(format!(
                "curve grid must have at least 101 samples, got {grid_size}"
            )));
        }
        let n = grid_size;
        let p1_grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let gain = p1_grid
            .iter()
            .map(|&p| expected_gain(p, model))
            .collect::<Result<Vec<f64>>>()?;

        let mut argmax = 0;
        let mut gain_max = gain[0];
        for (i, &g) in gain.iter().enumerate().skip(1) {
            if g > gain_max {
                argmax = i;
                gain_max = g;
            }
        }
        // A flat all-zero curve (d' = 0) carries no preference; 0.5 by
        // convention.
        let p_opt = if gain_max <= 0.0 {
            0.5
        } else {
            let lo = p1_grid[argmax.saturating_sub(1)];
            let hi = p1_grid[(argmax + 1).min(n - 1)];
            golden_section_max(&|p| expected_gain(p, model), lo, hi, 1e-6)?
        };
        Ok(Self { model: *model, p1_grid, gain, p_opt, gain_max })
    }

    pub fn model(&self) -> &LikelihoodModel {
        &self.model
    }

    pub fn dprime(&self) -> f64 {
        self.model.dprime()
    }

    pub fn grid_size(&self) -> usize {
        self.gain.len()
    }

    pub fn p1_grid(&self) -> &[f64] {
        &self.p1_grid
    }

    pub fn gain_values(&self) -> &[f64] {
        &self.gain
    }

    /// Flashed mass that maximizes the expected gain.
    pub fn p_opt(&self) -> f64 {
        self.p_opt
    }

    /// Largest gain sample on the grid.
    pub fn gain_max(&self) -> f64 {
        self.gain_max
    }

    /// Linear interpolation between the bracketing grid samples; exact on
    /// grid nodes. `p1` is clamped to `[0, 1]`.
    pub fn lookup(&self, p1: f64) -> f64 {
        let p = p1.clamp(0.0, 1.0);
        let n = self.gain.len();
        let x = p * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        let frac = x - i as f64;
        self.gain[i] + frac * (self.gain[i + 1] - self.gain[i])
    }

    /// Write the curve to `path`; the file round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(CURVE_MAGIC)?;
        out.write_all(&self.model.mu0().to_le_bytes())?;
        out.write_all(&self.model.mu1().to_le_bytes())?;
        out.write_all(&self.model.sigma().to_le_bytes())?;
        out.write_all(&(self.gain.len() as u64).to_le_bytes())?;
        out.write_all(&self.p_opt.to_le_bytes())?;
        out.write_all(&self.gain_max.to_le_bytes())?;
        for g in &self.gain {
            out.write_all(&g.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|_| truncated())?;
        if &magic != CURVE_MAGIC {
            return Err(Error::CurveFormat("unrecognized header".into()));
        }
        let mu0 = read_f64(&mut input)?;
        let mu1 = read_f64(&mut input)?;
        let sigma = read_f64(&mut input)?;
        let n = read_u64(&mut input)? as usize;
        if n < 101 {
            return Err(Error::CurveFormat(format!("implausible grid size {n}")));
        }
        let p_opt = read_f64(&mut input)?;
        let gain_max = read_f64(&mut input)?;
        let mut gain = Vec::with_capacity(n);
        for _ in 0..n {
            gain.push(read_f64(&mut input)?);
        }
        let model = LikelihoodModel::new(mu0, mu1, sigma)
            .map_err(|e| Error::CurveFormat(e.to_string()))?;
        let p1_grid = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Ok(Self { model, p1_grid, gain, p_opt, gain_max })
    }
}

const CURVE_MAGIC: &[u8; 8] = b"SPGC0001";

fn truncated() -> Error {
    Error::CurveFormat("file truncated".into())
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(|_| truncated())?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(|_| truncated())?;
    Ok(u64::from_le_bytes(buf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CurveKey {
    mu0: u64,
    mu1: u64,
    sigma: u64,
    grid_size: usize,
}

impl CurveKey {
    fn of(model: &LikelihoodModel, grid_size: usize) -> Self {
        Self {
            mu0: model.mu0().to_bits(),
            mu1: model.mu1().to_bits(),
            sigma: model.sigma().to_bits(),
            grid_size,
        }
    }
}

/// In-memory curve cache keyed by `(mu0, mu1, sigma, grid_size)`.
#[derive(Debug, Default)]
pub struct CurveCache {
    map: HashMap<CurveKey, Arc<GainCurve>>,
}

impl CurveCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(
        &mut self,
        model: &LikelihoodModel,
        grid_size: usize,
    ) -> Result<Arc<GainCurve>> {
        let key = CurveKey::of(model, grid_size);
        if let Some(curve) = self.map.get(&key) {
            return Ok(Arc::clone(curve));
        }
        let curve = Arc::new(GainCurve::build(model, grid_size)?);
        self.map.insert(key, Arc::clone(&curve));
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
