//! Offline least-squares design of an FIR approximate inverse of a polyphase
//! transfer matrix.
//!
//! Each output row of the inverse decouples into an independent linear
//! least-squares problem over the FIR taps of that row's entries; the system
//! matrix is shared across rows, so it is factored once and solved for the
//! `d^2` right-hand sides.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SrrError};
use crate::frame::{BoundaryRule, Frame};
use crate::imaging::DecimationSpec;
use crate::kernel::Kernel2D;
use crate::polyphase::{
    apply_polyphase, build_system_transfer, compose, Lambda1, PolyphaseMatrix,
};

/// Ridge added to the diagonal of infinite-weight systems before design,
/// keeping the least-squares problem well posed.
pub const DEFAULT_RIDGE_EPS: f64 = 1e-8;

/// Condition-number bound above which the normal equations are rejected.
const COND_LIMIT: f64 = 1e12;

/// Everything that determines a filterbank design.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    /// Each inverse entry is supported on `(2r+1) x (2r+1)` taps.
    pub tap_radius: usize,
    /// The set of projection weights to precompute designs for.
    pub lambda1_values: Vec<Lambda1>,
    /// Weight on the `S^T S` term of the system.
    pub alpha_t: f64,
    /// Blur kernel `h`.
    pub h: Kernel2D,
    /// High-pass (Laplacian) kernel `s`.
    pub s: Kernel2D,
    pub d: usize,
    /// Ridge applied to infinite-weight systems.
    pub ridge_eps: f64,
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tap_radius == 0 {
            return Err(SrrError::Config("tap_radius must be >= 1".into()));
        }
        if self.lambda1_values.is_empty() {
            return Err(SrrError::Config("lambda1_values must be non-empty".into()));
        }
        if self.alpha_t < 0.0 {
            return Err(SrrError::Config("alpha_t must be >= 0".into()));
        }
        Ok(())
    }

    /// Stable fingerprint of the full design configuration (FNV-1a).
    pub fn hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.u64(self.d as u64);
        h.u64(self.tap_radius as u64);
        h.f64(self.alpha_t);
        h.f64(self.ridge_eps);
        for l in &self.lambda1_values {
            h.f64(match l {
                Lambda1::Finite(v) => *v,
                Lambda1::Infinite => f64::INFINITY,
            });
        }
        for k in [&self.h, &self.s] {
            h.u64(k.rows() as u64);
            h.u64(k.cols() as u64);
            h.u64(k.origin().0 as u64);
            h.u64(k.origin().1 as u64);
            for &t in k.taps() {
                h.f64(t);
            }
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x1000_0000_01b3);
    }
    fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.byte(b);
        }
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// One precomputed inverse design.
#[derive(Debug, Clone)]
pub struct DesignRecord {
    pub lambda1: Lambda1,
    pub inverse: PolyphaseMatrix,
    /// Objective value at the minimizer (coefficient-domain residual of
    /// `U*T - I`).
    pub residual: f64,
}

/// Designed inverse filterbanks keyed by projection weight.
#[derive(Debug, Clone)]
pub struct InverseFilterbankCache {
    pub d: usize,
    pub tap_radius: usize,
    pub alpha_t: f64,
    pub ridge_eps: f64,
    pub spec_hash: u64,
    pub records: Vec<DesignRecord>,
}

impl InverseFilterbankCache {
    pub fn lookup(&self, lambda1: Lambda1) -> Option<&DesignRecord> {
        self.records.iter().find(|r| r.lambda1 == lambda1)
    }
}

/// Minimize `sum_{i,j} ||[U*T - I]_{(i,j)}||_F^2` over FIR entries of `U`
/// supported on `(2r+1) x (2r+1)` taps. Returns the minimizer and the
/// objective value.
pub fn design_inverse(t: &PolyphaseMatrix, tap_radius: usize) -> Result<(PolyphaseMatrix, f64)> {
    if tap_radius == 0 {
        return Err(SrrError::Config("tap_radius must be >= 1".into()));
    }
    let n = t.channels();
    let r = tap_radius as i32;
    let tr = t.support_radius();
    let out_r = r + tr;
    let u_side = (2 * r + 1) as usize;
    let out_side = (2 * out_r + 1) as usize;
    let unknowns = n * u_side * u_side;
    let equations = n * out_side * out_side;

    // G maps the taps of one output row of U to the coefficients of that
    // row of U*T; it is identical for every row.
    let mut g = DMatrix::<f64>::zeros(equations, unknowns);
    for j in 0..n {
        for m in 0..n {
            let tk = t.entry(m, j);
            for pr in -r..=r {
                for pc in -r..=r {
                    let col = col_index(m, pr, pc, r, u_side);
                    for (dr, dc, v) in tk.offsets() {
                        if v == 0.0 {
                            continue;
                        }
                        let or = pr + dr;
                        let oc = pc + dc;
                        let row = row_index(j, or, oc, out_r, out_side);
                        g[(row, col)] += v;
                    }
                }
            }
        }
    }

    // Normal equations, factored once (rank-revealing) for all rows.
    let gt = g.transpose();
    let normal = &gt * &g;
    let qr = normal.clone().col_piv_qr();
    let diag = qr.r().diagonal();
    let dmax = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dmin = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(SrrError::IllConditioned { cond });
    }

    let mut inverse = PolyphaseMatrix::zeros(t.d());
    let mut residual = 0.0;
    for i in 0..n {
        let mut b = DVector::<f64>::zeros(equations);
        b[row_index(i, 0, 0, out_r, out_side)] = 1.0;
        let rhs = &gt * &b;
        let u = qr
            .solve(&rhs)
            .ok_or(SrrError::IllConditioned { cond })?;
        residual += (&g * &u - &b).norm_squared();
        for m in 0..n {
            let mut taps = vec![0.0; u_side * u_side];
            for pr in -r..=r {
                for pc in -r..=r {
                    taps[(pr + r) as usize * u_side + (pc + r) as usize] =
                        u[col_index(m, pr, pc, r, u_side)];
                }
            }
            let k = Kernel2D::new(u_side, u_side, (r, r), taps)?;
            inverse.set_entry(i, m, k.trimmed());
        }
    }
    Ok((inverse, residual))
}

#[inline]
fn col_index(m: usize, pr: i32, pc: i32, r: i32, side: usize) -> usize {
    m * side * side + (pr + r) as usize * side + (pc + r) as usize
}

#[inline]
fn row_index(j: usize, or: i32, oc: i32, out_r: i32, side: usize) -> usize {
    j * side * side + (or + out_r) as usize * side + (oc + out_r) as usize
}

/// Reconstruction-quality report for a designed inverse.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// Coefficient-domain residual of `compose(U, T) - I`.
    pub coeff_residual: f64,
}

/// Measure how well `U` inverts `T` on random frames, plus the
/// coefficient-domain residual of the composition.
pub fn validate_inverse(
    u: &PolyphaseMatrix,
    t: &PolyphaseMatrix,
    trials: usize,
) -> Result<ValidationReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let side = 64usize.next_multiple_of(t.d());
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    for _ in 0..trials.max(1) {
        let x = Frame::new(
            side,
            side,
            (0..side * side).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )?;
        let tx = apply_polyphase(t, &x, BoundaryRule::Periodic)?;
        let utx = apply_polyphase(u, &tx, BoundaryRule::Periodic)?;
        let rel = utx.sub(&x).norm() / x.norm();
        max_rel = max_rel.max(rel);
        sum_rel += rel;
    }
    Ok(ValidationReport {
        max_rel_error: max_rel,
        mean_rel_error: sum_rel / trials.max(1) as f64,
        coeff_residual: compose(u, t)?.residual_from_identity(),
    })
}

/// Design an inverse for every weight in the spec and bundle the results.
pub fn build_cache(spec: &DesignSpec) -> Result<InverseFilterbankCache> {
    spec.validate()?;
    let dspec = DecimationSpec::new(spec.d)?;
    let mut records = Vec::with_capacity(spec.lambda1_values.len());
    for &lambda1 in &spec.lambda1_values {
        let t = build_system_transfer(lambda1, spec.alpha_t, &spec.h, &spec.s, dspec)?;
        let t = if lambda1.is_infinite() { t.with_ridge(spec.ridge_eps) } else { t };
        let (inverse, residual) = design_inverse(&t, spec.tap_radius)?;
        records.push(DesignRecord { lambda1, inverse, residual });
    }
    Ok(InverseFilterbankCache {
        d: spec.d,
        tap_radius: spec.tap_radius,
        alpha_t: spec.alpha_t,
        ridge_eps: spec.ridge_eps,
        spec_hash: spec.hash(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyphase::system_apply;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_of_scaled_identity() {
        let mut t = PolyphaseMatrix::identity(2);
        for i in 0..4 {
            t.set_entry(i, i, Kernel2D::delta().scaled(4.0));
        }
        let (u, residual) = design_inverse(&t, 2).unwrap();
        assert!(residual < 1e-20);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 0.25 } else { 0.0 };
                assert!((u.entry(i, j).tap_at_offset(0, 0) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_of_diagonal_shift() {
        let mut t = PolyphaseMatrix::zeros(2);
        for i in 0..4 {
            t.set_entry(i, i, Kernel2D::shifted_delta(1, 0));
        }
        let (u, residual) = design_inverse(&t, 2).unwrap();
        assert!(residual < 1e-20, "residual {residual}");
        for i in 0..4 {
            assert!((u.entry(i, i).tap_at_offset(-1, 0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn designed_inverse_reconstructs() {
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();
        let (u, _) = design_inverse(&t, 7).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let x = Frame::new(64, 64, (0..64 * 64).map(|_| rng.gen_range(0.0..255.0)).collect())
                .unwrap();
            let tx = system_apply(&x, Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();
            let utx = apply_polyphase(&u, &tx, BoundaryRule::Periodic).unwrap();
            let rel = utx.sub(&x).norm() / x.norm();
            assert!(rel <= 1e-2, "relative error {rel}");
        }
    }

    #[test]
    fn residual_monotone_in_radius() {
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();
        let (_, r3) = design_inverse(&t, 3).unwrap();
        let (_, r5) = design_inverse(&t, 5).unwrap();
        let (_, r7) = design_inverse(&t, 7).unwrap();
        assert!(r3 >= r5 && r5 >= r7, "residuals {r3} {r5} {r7}");
    }

    #[test]
    fn validation_report_directions() {
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();

        // Exact pair: identity against identity.
        let i = PolyphaseMatrix::identity(2);
        let rep = validate_inverse(&i, &i, 3).unwrap();
        assert!(rep.max_rel_error <= 1e-12);
        assert!(rep.coeff_residual <= 1e-24);

        // U = 0 -> relative error 1.
        let z = PolyphaseMatrix::zeros(2);
        let rep = validate_inverse(&z, &t, 3).unwrap();
        assert!((rep.max_rel_error - 1.0).abs() < 1e-12);

        // Larger radius -> smaller error.
        let mut errs = Vec::new();
        for radius in [3usize, 5, 7] {
            let (u, _) = design_inverse(&t, radius).unwrap();
            errs.push(validate_inverse(&u, &t, 3).unwrap().mean_rel_error);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors {errs:?}");
    }

    /// First-order optimality: perturbing any designed tap must not decrease
    /// the objective.
    #[test]
    fn perturbation_does_not_improve_objective() {
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();
        let (u, base) = design_inverse(&t, 3).unwrap();
        let objective = |m: &PolyphaseMatrix| compose(m, &t).unwrap().residual_from_identity();
        let base_obj = objective(&u);
        assert!((base_obj - base).abs() <= 1e-9 * base.max(1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let i = rng.gen_range(0..4);
            let j = rng.gen_range(0..4);
            let dr = rng.gen_range(-3..=3);
            let dc = rng.gen_range(-3..=3);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let mut pert = u.clone();
            let bump = Kernel2D::shifted_delta(dr, dc).scaled(sign * 1e-4);
            pert.set_entry(i, j, u.entry(i, j).add(&bump));
            assert!(
                objective(&pert) >= base_obj - 1e-12,
                "perturbation at ({i},{j},{dr},{dc}) improved the objective"
            );
        }
    }

    /// Brute-force oracle: assemble the normal equations directly from the
    /// coefficient-domain definition on a tiny case and compare solutions.
    #[test]
    fn matches_brute_force_normal_equations() {
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();
        assert!(t.support_radius() <= 1); // 3x3 entries
        let r = 2i32;
        let (u, _) = design_inverse(&t, r as usize).unwrap();

        let n = 4usize;
        let u_side = (2 * r + 1) as usize;
        let tr = t.support_radius();
        let out_r = r + tr;
        let out_side = (2 * out_r + 1) as usize;
        let unknowns = n * u_side * u_side;

        // Enumerate the least-squares matrix straight from the definition:
        // residual coefficient (j, or, oc) of row i is
        // sum_m sum_p u_{i,m}(p) T_{m,j}(o - p) - delta(i=j, o=0).
        let equations = n * out_side * out_side;
        let mut g = DMatrix::<f64>::zeros(equations, unknowns);
        for j in 0..n {
            for or in -out_r..=out_r {
                for oc in -out_r..=out_r {
                    let row = j * out_side * out_side
                        + (or + out_r) as usize * out_side
                        + (oc + out_r) as usize;
                    for m in 0..n {
                        for pr in -r..=r {
                            for pc in -r..=r {
                                let col = m * u_side * u_side
                                    + (pr + r) as usize * u_side
                                    + (pc + r) as usize;
                                g[(row, col)] = t.entry(m, j).tap_at_offset(or - pr, oc - pc);
                            }
                        }
                    }
                }
            }
        }
        let a = g.transpose() * &g;
        for i in 0..n {
            let mut target = DVector::<f64>::zeros(equations);
            target[i * out_side * out_side
                + out_r as usize * out_side
                + out_r as usize] = 1.0;
            let b = g.transpose() * target;
            let sol = a.clone().lu().solve(&b).unwrap();
            for m in 0..n {
                for pr in -r..=r {
                    for pc in -r..=r {
                        let idx =
                            m * u_side * u_side + (pr + r) as usize * u_side + (pc + r) as usize;
                        let got = u.entry(i, m).tap_at_offset(pr, pc);
                        assert!(
                            (sol[idx] - got).abs() < 1e-9,
                            "row {i}, entry ({m},{pr},{pc}): {} vs {}",
                            sol[idx],
                            got
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn build_cache_covers_all_weights() {
        let spec = DesignSpec {
            tap_radius: 3,
            lambda1_values: vec![Lambda1::Infinite, Lambda1::Finite(1.0)],
            alpha_t: 0.015,
            h: Kernel2D::uniform(3),
            s: Kernel2D::scaled_laplacian(),
            d: 2,
            ridge_eps: DEFAULT_RIDGE_EPS,
        };
        let cache = build_cache(&spec).unwrap();
        assert!(cache.lookup(Lambda1::Infinite).is_some());
        assert!(cache.lookup(Lambda1::Finite(1.0)).is_some());
        assert!(cache.lookup(Lambda1::Finite(2.0)).is_none());
        for r in &cache.records {
            assert!(r.residual >= 0.0);
        }
    }
}
