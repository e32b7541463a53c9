//! Polyphase algebra: coset decomposition of frames, polyphase transfer
//! matrices, and construction of the reconstruction system's transfer matrix
//! by impulse probing.
//!
//! Conventions (frozen, also used by the cache file format):
//! - Cosets are ordered row-major over `{0..d-1}^2`, so `k_1 = (0,0)`.
//! - Component `i` holds the samples `x(d*n - k_i)` with periodic wrap.
//! - Entry `(i, j)` of a polyphase matrix maps input coset `j` to output
//!   coset `i`.

use crate::error::{Result, SrrError};
use crate::frame::{BoundaryRule, Frame};
use crate::imaging::{adjoint_conv2d, conv2d, decimate, upsample_zero, DecimationSpec};
use crate::kernel::Kernel2D;

/// The ordered coset offsets of `diag(d, d)`, row-major over `{0..d-1}^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetSet {
    d: usize,
    cosets: Vec<(usize, usize)>,
}

impl CosetSet {
    pub fn new(d: usize) -> Self {
        let cosets = (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .collect();
        Self { d, cosets }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cosets.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cosets.is_empty()
    }

    #[inline]
    pub fn offset(&self, i: usize) -> (usize, usize) {
        self.cosets[i]
    }
}

/// A frame split into its `d^2` coset components.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseSignal {
    d: usize,
    components: Vec<Frame>,
}

impl PolyphaseSignal {
    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn components(&self) -> &[Frame] {
        &self.components
    }

    #[inline]
    pub fn component(&self, i: usize) -> &Frame {
        &self.components[i]
    }
}

/// A `d^2 x d^2` grid of FIR kernels acting between coset components.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseMatrix {
    d: usize,
    entries: Vec<Kernel2D>,
}

impl PolyphaseMatrix {
    pub fn new(d: usize, entries: Vec<Kernel2D>) -> Result<Self> {
        let n = d * d;
        if entries.len() != n * n {
            return Err(SrrError::Dimension(format!(
                "polyphase matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        Ok(Self { d, entries })
    }

    /// The identity system: delta kernels on the diagonal.
    pub fn identity(d: usize) -> Self {
        let n = d * d;
        let entries = (0..n * n)
            .map(|k| if k / n == k % n { Kernel2D::delta() } else { Kernel2D::zero() })
            .collect();
        Self { d, entries }
    }

    pub fn zeros(d: usize) -> Self {
        let n = d * d;
        Self { d, entries: vec![Kernel2D::zero(); n * n] }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of coset channels (`d^2`).
    #[inline]
    pub fn channels(&self) -> usize {
        self.d * self.d
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> &Kernel2D {
        &self.entries[i * self.channels() + j]
    }

    pub fn set_entry(&mut self, i: usize, j: usize, k: Kernel2D) {
        let n = self.channels();
        self.entries[i * n + j] = k;
    }

    /// Largest support radius over all entries.
    pub fn support_radius(&self) -> i32 {
        self.entries.iter().map(|k| k.support_radius()).max().unwrap_or(0)
    }

    /// Add `eps` times the identity (a delta on each diagonal entry).
    pub fn with_ridge(&self, eps: f64) -> PolyphaseMatrix {
        let mut out = self.clone();
        let n = self.channels();
        for i in 0..n {
            out.set_entry(i, i, self.entry(i, i).add(&Kernel2D::delta().scaled(eps)));
        }
        out
    }

    /// Sum of squared coefficients of `self - I`, in the coefficient domain.
    pub fn residual_from_identity(&self) -> f64 {
        let n = self.channels();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let diff = if i == j {
                    self.entry(i, j).add(&Kernel2D::delta().scaled(-1.0))
                } else {
                    self.entry(i, j).clone()
                };
                acc += diff.energy();
            }
        }
        acc
    }
}

/// Split a frame into its coset components.
pub fn polyphase_decompose(frame: &Frame, cosets: &CosetSet) -> Result<PolyphaseSignal> {
    let d = cosets.d();
    if frame.width() % d != 0 || frame.height() % d != 0 {
        return Err(SrrError::Dimension(format!(
            "frame {}x{} not divisible by d = {}",
            frame.width(),
            frame.height(),
            d
        )));
    }
    let (w, h) = (frame.width() / d, frame.height() / d);
    let mut components = Vec::with_capacity(cosets.len());
    for i in 0..cosets.len() {
        let (kr, kc) = cosets.offset(i);
        let mut comp = Frame::zeros(w, h);
        for r in 0..h {
            for c in 0..w {
                let pr = (r * d).wrapping_sub(kr).wrapping_add(frame.height()) % frame.height();
                let pc = (c * d).wrapping_sub(kc).wrapping_add(frame.width()) % frame.width();
                comp.set(r, c, frame.get(pr, pc));
            }
        }
        components.push(comp);
    }
    Ok(PolyphaseSignal { d, components })
}

/// Exact inverse of [`polyphase_decompose`].
pub fn polyphase_recompose(signal: &PolyphaseSignal, cosets: &CosetSet) -> Result<Frame> {
    if signal.components.is_empty() || signal.components.len() != cosets.len() {
        return Err(SrrError::Dimension(format!(
            "expected {} components, got {}",
            cosets.len(),
            signal.components.len()
        )));
    }
    let d = cosets.d();
    let (cw, ch) = (signal.components[0].width(), signal.components[0].height());
    for comp in &signal.components {
        if comp.width() != cw || comp.height() != ch {
            return Err(SrrError::Dimension("inconsistent component dimensions".into()));
        }
    }
    let (w, h) = (cw * d, ch * d);
    let mut out = Frame::zeros(w, h);
    for i in 0..cosets.len() {
        let (kr, kc) = cosets.offset(i);
        let comp = &signal.components[i];
        for r in 0..ch {
            for c in 0..cw {
                let pr = (r * d + h - kr) % h;
                let pc = (c * d + w - kc) % w;
                out.set(pr, pc, comp.get(r, c));
            }
        }
    }
    Ok(out)
}

/// Apply a polyphase matrix to a frame: decompose, run the per-coset
/// multichannel convolution, recompose.
pub fn apply_polyphase(
    matrix: &PolyphaseMatrix,
    frame: &Frame,
    boundary: BoundaryRule,
) -> Result<Frame> {
    let cosets = CosetSet::new(matrix.d());
    let sig = polyphase_decompose(frame, &cosets)?;
    let n = matrix.channels();
    let (cw, ch) = (sig.components[0].width(), sig.components[0].height());
    let mut out_components = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = Frame::zeros(cw, ch);
        for j in 0..n {
            let k = matrix.entry(i, j);
            if k.taps().iter().all(|&v| v == 0.0) {
                continue;
            }
            let term = conv2d(sig.component(j), k, boundary)?;
            acc = acc.add(&term);
        }
        out_components.push(acc);
    }
    polyphase_recompose(&PolyphaseSignal { d: matrix.d(), components: out_components }, &cosets)
}

/// Matrix product of two polyphase systems: entry `(i,j) = sum_m a(i,m) * b(m,j)`.
pub fn compose(a: &PolyphaseMatrix, b: &PolyphaseMatrix) -> Result<PolyphaseMatrix> {
    if a.d() != b.d() {
        return Err(SrrError::Dimension(format!(
            "polyphase d mismatch: {} vs {}",
            a.d(),
            b.d()
        )));
    }
    let n = a.channels();
    let mut out = PolyphaseMatrix::zeros(a.d());
    for i in 0..n {
        for j in 0..n {
            let mut acc = Kernel2D::zero();
            for m in 0..n {
                acc = acc.add(&a.entry(i, m).convolve(b.entry(m, j)));
            }
            out.set_entry(i, j, acc.trimmed());
        }
    }
    Ok(out)
}

/// Finite or infinite projection weight for the data-fidelity set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda1 {
    Finite(f64),
    Infinite,
}

impl Lambda1 {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Lambda1::Infinite)
    }
}

impl std::fmt::Display for Lambda1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lambda1::Finite(v) => write!(f, "{v}"),
            Lambda1::Infinite => write!(f, "inf"),
        }
    }
}

/// Apply the reconstruction system operator directly with the imaging ops:
/// `lambda1 * (H^T D^T D H + alpha_t S^T S) + I` for finite `lambda1`, or
/// `H^T D^T D H + alpha_t S^T S` for the infinite sentinel.
pub fn system_apply(
    x: &Frame,
    lambda1: Lambda1,
    alpha_t: f64,
    h: &Kernel2D,
    s: &Kernel2D,
    spec: DecimationSpec,
) -> Result<Frame> {
    let b = BoundaryRule::Periodic;
    let hx = conv2d(x, h, b)?;
    let dhx = decimate(&hx, spec)?;
    let data = adjoint_conv2d(&upsample_zero(&dhx, spec), h, b)?;
    let sx = conv2d(x, s, b)?;
    let reg = adjoint_conv2d(&sx, s, b)?;
    let core = data.add(&reg.scaled(alpha_t));
    Ok(match lambda1 {
        Lambda1::Infinite => core,
        Lambda1::Finite(l) => core.scaled(l).add(x),
    })
}

/// Build the polyphase transfer matrix of the reconstruction system by
/// probing it with a unit impulse on each input coset and reading the
/// response on each output coset.
///
/// The probe frame is sized so no tap wraps around under the periodic
/// boundary, making the extracted kernels exact.
pub fn build_system_transfer(
    lambda1: Lambda1,
    alpha_t: f64,
    h: &Kernel2D,
    s: &Kernel2D,
    spec: DecimationSpec,
) -> Result<PolyphaseMatrix> {
    if alpha_t < 0.0 {
        return Err(SrrError::Config("alpha_t must be >= 0".into()));
    }
    if let Lambda1::Finite(l) = lambda1 {
        if l <= 0.0 {
            return Err(SrrError::Config("lambda1 must be > 0 or infinite".into()));
        }
    }
    let d = spec.d();
    let cosets = CosetSet::new(d);
    let radius = 2 * h.support_radius() + 2 * s.support_radius() + 3;
    // Probe frame side: per-coset kernel support plus slack, d-aligned.
    let side = (2 * radius as usize + 1).next_multiple_of(d) * d.max(2);
    let side = side.next_multiple_of(d);
    let mut out = PolyphaseMatrix::zeros(d);
    for j in 0..cosets.len() {
        let (kr, kc) = cosets.offset(j);
        // decompose(probe) is a delta at sub-position 0 of coset j.
        let mut probe = Frame::zeros(side, side);
        probe.set((side - kr) % side, (side - kc) % side, 1.0);
        let resp = system_apply(&probe, lambda1, alpha_t, h, s, spec)?;
        let sig = polyphase_decompose(&resp, &cosets)?;
        for i in 0..cosets.len() {
            out.set_entry(i, j, component_to_kernel(sig.component(i)).trimmed());
        }
    }
    Ok(out)
}

/// Read an impulse response laid out on a periodic component grid back into
/// a centered kernel. Offsets beyond half the grid wrap to negative values.
fn component_to_kernel(comp: &Frame) -> Kernel2D {
    let h = comp.height();
    let w = comp.width();
    let or = (h / 2) as i32;
    let oc = (w / 2) as i32;
    let mut taps = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            // grid index -> signed offset in [-h/2, h/2)
            let dr = if r < h - h / 2 { r as i32 } else { r as i32 - h as i32 };
            let dc = if c < w - w / 2 { c as i32 } else { c as i32 - w as i32 };
            taps[(dr + or) as usize * w + (dc + oc) as usize] = comp.get(r, c);
        }
    }
    Kernel2D::new(h, w, (or, oc), taps).expect("component kernel dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Frame {
        Frame::new(w, h, (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn coset_order_is_row_major() {
        let cs = CosetSet::new(2);
        assert_eq!(
            (0..4).map(|i| cs.offset(i)).collect::<Vec<_>>(),
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        );
    }

    #[test]
    fn decompose_2x2_exhaustive() {
        let f = Frame::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cs = CosetSet::new(2);
        let sig = polyphase_decompose(&f, &cs).unwrap();
        let vals: Vec<f64> = sig.components().iter().map(|c| c.data()[0]).collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn decompose_d1_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_frame(4, 4, &mut rng);
        let cs = CosetSet::new(1);
        let sig = polyphase_decompose(&f, &cs).unwrap();
        assert_eq!(sig.components().len(), 1);
        assert_eq!(sig.component(0), &f);
    }

    #[test]
    fn round_trip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cs = CosetSet::new(2);
        for _ in 0..5 {
            let f = random_frame(16, 16, &mut rng);
            let back = polyphase_recompose(&polyphase_decompose(&f, &cs).unwrap(), &cs).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn recompose_delta_frame() {
        let mut f = Frame::zeros(4, 4);
        f.set(1, 3, 1.0);
        let cs = CosetSet::new(2);
        let back = polyphase_recompose(&polyphase_decompose(&f, &cs).unwrap(), &cs).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn identity_matrix_is_identity_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_frame(8, 8, &mut rng);
        let m = PolyphaseMatrix::identity(2);
        let g = apply_polyphase(&m, &f, BoundaryRule::Periodic).unwrap();
        assert_eq!(g, f);
    }

    #[test]
    fn transfer_d1_lambda1_is_twice_identity() {
        // h = delta, s = 0, d = 1, lambda1 = 1 -> A = I + I.
        let t = build_system_transfer(
            Lambda1::Finite(1.0),
            0.0,
            &Kernel2D::delta(),
            &Kernel2D::zero(),
            DecimationSpec::new(1).unwrap(),
        )
        .unwrap();
        assert_eq!(t.channels(), 1);
        let e = t.entry(0, 0);
        assert_eq!(e.tap_at_offset(0, 0), 2.0);
        assert_eq!(e.support_radius(), 0);
    }

    #[test]
    fn transfer_delta_blur_is_coset_projector() {
        // h = delta, s = 0, d = 2, lambda1 = inf: D^T D keeps coset (0,0) only.
        let t = build_system_transfer(
            Lambda1::Infinite,
            0.7,
            &Kernel2D::delta(),
            &Kernel2D::zero(),
            DecimationSpec::new(2).unwrap(),
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = t.entry(i, j);
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert_eq!(e.tap_at_offset(0, 0), want, "entry ({i},{j})");
                assert_eq!(e.energy(), want);
            }
        }
    }

    #[test]
    fn transfer_matches_direct_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Infinite, 0.015, &h, &s, spec).unwrap();
        for _ in 0..5 {
            let x = random_frame(16, 16, &mut rng);
            let via_poly = apply_polyphase(&t, &x, BoundaryRule::Periodic).unwrap();
            let direct = system_apply(&x, Lambda1::Infinite, 0.015, &h, &s, spec).unwrap();
            let err = via_poly.sub(&direct).data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-12, "max abs err {err}");
        }
    }

    #[test]
    fn transfer_operator_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Finite(1.0), 0.015, &h, &s, spec).unwrap();
        // Coefficient symmetry T_{i,j}(n) = T_{j,i}(-n).
        for i in 0..4 {
            for j in 0..4 {
                let a = t.entry(i, j);
                let b = t.entry(j, i).flipped();
                for (dr, dc, v) in a.offsets() {
                    assert!((v - b.tap_at_offset(dr, dc)).abs() < 1e-14);
                }
            }
        }
        // Operator symmetry <Tx, y> = <x, Ty>.
        let x = random_frame(16, 16, &mut rng);
        let y = random_frame(16, 16, &mut rng);
        let tx = apply_polyphase(&t, &x, BoundaryRule::Periodic).unwrap();
        let ty = apply_polyphase(&t, &y, BoundaryRule::Periodic).unwrap();
        assert!((tx.dot(&y) - x.dot(&ty)).abs() < 1e-12);
    }

    #[test]
    fn compose_identity_preserves() {
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Infinite, 0.015, &h, &s, spec).unwrap();
        let i = PolyphaseMatrix::identity(2);
        let it = compose(&i, &t).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let x = t.entry(a, b);
                let y = it.entry(a, b);
                for (dr, dc, v) in x.offsets() {
                    assert_eq!(v, y.tap_at_offset(dr, dc));
                }
            }
        }
    }

    #[test]
    fn compose_with_zero_is_zero() {
        let t = PolyphaseMatrix::identity(2);
        let z = PolyphaseMatrix::zeros(2);
        let zt = compose(&z, &t).unwrap();
        assert_eq!(zt.residual_from_identity(), 4.0); // -I has 4 unit deltas
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(zt.entry(i, j).energy(), 0.0);
            }
        }
    }

    #[test]
    fn compose_matches_cascaded_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = Kernel2D::uniform(3);
        let s = Kernel2D::scaled_laplacian();
        let spec = DecimationSpec::new(2).unwrap();
        let t = build_system_transfer(Lambda1::Infinite, 0.015, &h, &s, spec).unwrap();
        let u = build_system_transfer(Lambda1::Finite(2.0), 0.1, &h, &s, spec).unwrap();
        let ut = compose(&u, &t).unwrap();
        for _ in 0..3 {
            let x = random_frame(16, 16, &mut rng);
            let cascade =
                apply_polyphase(&u, &apply_polyphase(&t, &x, BoundaryRule::Periodic).unwrap(), BoundaryRule::Periodic)
                    .unwrap();
            let direct = apply_polyphase(&ut, &x, BoundaryRule::Periodic).unwrap();
            let err = cascade.sub(&direct).data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-12, "max abs err {err}");
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let spec = DecimationSpec::new(2).unwrap();
        assert!(build_system_transfer(
            Lambda1::Finite(-1.0),
            0.0,
            &Kernel2D::delta(),
            &Kernel2D::zero(),
            spec
        )
        .is_err());
        assert!(build_system_transfer(
            Lambda1::Infinite,
            -0.1,
            &Kernel2D::delta(),
            &Kernel2D::zero(),
            spec
        )
        .is_err());
    }
}
