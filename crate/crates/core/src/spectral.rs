//! Eigenvalues of dense real matrices and classification of pinned-Laplacian
//! spectra.
//!
//! The eigenvalue routine balances the matrix, reduces it to upper Hessenberg
//! form with Householder reflections and runs the Francis double-shift QR
//! iteration on the Hessenberg matrix. Each reported eigenvalue is then
//! certified by the smallest singular value of `M - λI`.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::PinnedSystem;

pub type C64 = Complex<f64>;

/// Default certification tolerance, relative to the Frobenius norm.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `|Im λ| <= REAL_THRESHOLD * max(1, |λ|)` counts as real.
pub const REAL_THRESHOLD: f64 = 1e-8;

const MAX_ITER_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of `m`, with multiplicity, sorted by real part; conjugate
/// pairs are adjacent with the negative imaginary part first.
///
/// Every value is checked to satisfy `min_{|v|=1} |Mv - λv| <= tol * |M|_F`.
pub fn eigenvalues(m: &DMatrix<f64>, tol: f64) -> Result<Vec<C64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Domain(format!("eigenvalues need a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let mut values = eigenvalues_unchecked(m)?;
    sort_spectrum(&mut values);

    let scale = m.norm().max(f64::MIN_POSITIVE);
    for &lambda in &values {
        let r = eigen_residual(m, lambda);
        if r > tol * scale {
            return Err(Error::EigenResidual { re: lambda.re, im: lambda.im, residual: r });
        }
    }
    Ok(values)
}

/// Smallest singular value of `M - λI`, i.e. the best achievable residual
/// `|Mv - λv|` over unit vectors `v`.
pub fn eigen_residual(m: &DMatrix<f64>, lambda: C64) -> f64 {
    let n = m.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let v = C64::new(m[(i, j)], 0.0);
        if i == j {
            v - lambda
        } else {
            v
        }
    });
    shifted
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn sort_spectrum(values: &mut [C64]) {
    values.sort_by(|a, b| {
        a.re.total_cmp(&b.re)
            .then(a.im.abs().total_cmp(&b.im.abs()))
            .then(a.im.total_cmp(&b.im))
    });
}

fn eigenvalues_unchecked(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let mut a = m.clone();
    balance(&mut a);
    to_hessenberg(&mut a);
    hessenberg_qr(a)
}

/// Diagonal similarity scaling by powers of two so rows and columns have
/// comparable norms.
fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Householder reduction to upper Hessenberg form (in place, similarity only).
fn to_hessenberg(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let alpha_norm: f64 = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -alpha_norm } else { alpha_norm };
        v.fill(0.0);
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = a[(i, k)];
        }
        let vnorm2: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- H A with H = I - 2 v v^T / (v^T v)
        for j in 0..n {
            let dot: f64 = (k + 1..n).map(|i| v[i] * a[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k + 1..n {
                a[(i, j)] -= f * v[i];
            }
        }
        // A <- A H
        for i in 0..n {
            let dot: f64 = (k + 1..n).map(|j| a[(i, j)] * v[j]).sum();
            let f = 2.0 * dot / vnorm2;
            for j in k + 1..n {
                a[(i, j)] -= f * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Eigenvalues only.
fn hessenberg_qr(mut a: DMatrix<f64>) -> Result<Vec<C64>> {
    let n = a.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // look for a single small subdiagonal element
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                out[nu] = C64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    out[nu - 1] = C64::new(x + z, 0.0);
                    out[nu] = if z != 0.0 { C64::new(x - w / z, 0.0) } else { C64::new(x + z, 0.0) };
                } else {
                    out[nu] = C64::new(x + p, -z);
                    out[nu - 1] = out[nu].conj();
                }
                nn -= 2;
                break;
            }

            if its == MAX_ITER_PER_EIGENVALUE {
                return Err(Error::EigenNonConvergence(MAX_ITER_PER_EIGENVALUE));
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // look for two consecutive small subdiagonal elements
            let (mut p, mut q, mut r);
            let mut m = nu - 2;
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }

            // double QR step on rows l..=nu and columns m..=nu
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}

/// Spectrum of a pinned Laplacian together with its extremal values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    #[serde(serialize_with = "serialize_complex_list")]
    pub eigenvalues: Vec<C64>,
    pub is_real_spectrum: bool,
    /// Smallest eigenvalue; only defined for a real spectrum.
    pub lambda_min: Option<f64>,
    /// Spectral radius of `K`, which is the largest eigenvalue for a real spectrum.
    pub lambda_max: f64,
    /// For a real spectrum, `lambda_min != lambda_max`; otherwise whether the
    /// eigenvalue magnitudes differ.
    pub extremal_distinct: bool,
}

fn serialize_complex_list<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl SpectralSummary {
    /// Classifies a list of eigenvalues (already sorted or not).
    pub fn from_eigenvalues(mut eigenvalues: Vec<C64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Domain("empty spectrum".into()));
        }
        sort_spectrum(&mut eigenvalues);
        let radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = 1e-10 * radius.max(1.0);
        if let Some(bad) = eigenvalues.iter().find(|z| z.re <= floor) {
            return Err(Error::NonPositiveSpectrum { re: bad.re, im: bad.im });
        }
        let is_real_spectrum =
            eigenvalues.iter().all(|z| z.im.abs() <= REAL_THRESHOLD * z.norm().max(1.0));
        let distinct = |lo: f64, hi: f64| (hi - lo).abs() > 1e-12 * hi.abs().max(1.0);
        if is_real_spectrum {
            for z in eigenvalues.iter_mut() {
                z.im = 0.0;
            }
            sort_spectrum(&mut eigenvalues);
            let lo = eigenvalues[0].re;
            let hi = eigenvalues[eigenvalues.len() - 1].re;
            Ok(Self {
                eigenvalues,
                is_real_spectrum,
                lambda_min: Some(lo),
                lambda_max: hi,
                extremal_distinct: distinct(lo, hi),
            })
        } else {
            let lo = eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
            Ok(Self {
                eigenvalues,
                is_real_spectrum,
                lambda_min: None,
                lambda_max: radius,
                extremal_distinct: distinct(lo, radius),
            })
        }
    }

    /// `(λ_min, λ_max)` for a real spectrum.
    pub fn real_range(&self) -> Result<(f64, f64)> {
        match self.lambda_min {
            Some(lo) if self.is_real_spectrum => Ok((lo, self.lambda_max)),
            _ => Err(Error::ComplexSpectrum("the operation needs real eigenvalues")),
        }
    }
}

/// Eigenvalues of `K` with classification.
pub fn summarize(p: &PinnedSystem) -> Result<SpectralSummary> {
    SpectralSummary::from_eigenvalues(eigenvalues(p.k(), DEFAULT_TOL)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{example_graph, perturbed_example, pin};

    #[test]
    fn example_spectrum() {
        let ev = eigenvalues(pin(&example_graph()).k(), DEFAULT_TOL).unwrap();
        let expected = [0.382, 1.0, 1.0, 2.618];
        for (z, e) in ev.iter().zip(expected) {
            assert!((z.re - e).abs() < 1e-3 && z.im.abs() < 1e-3, "{z} vs {e}");
        }
    }

    #[test]
    fn identity() {
        let ev = eigenvalues(&DMatrix::identity(3, 3), DEFAULT_TOL).unwrap();
        assert_eq!(ev, vec![C64::new(1.0, 0.0); 3]);
    }

    #[test]
    fn rotation_gives_conjugate_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let ev = eigenvalues(&m, DEFAULT_TOL).unwrap();
        assert!((ev[0] - C64::new(0.0, -2.0)).norm() < 1e-14);
        assert_eq!(ev[1], ev[0].conj());
    }

    #[test]
    fn rejects_non_square() {
        assert!(eigenvalues(&DMatrix::zeros(2, 3), DEFAULT_TOL).is_err());
        assert!(eigenvalues(&DMatrix::from_element(1, 1, f64::NAN), DEFAULT_TOL).is_err());
    }

    #[test]
    fn summary_of_example() {
        let s = summarize(&pin(&example_graph())).unwrap();
        assert!(s.is_real_spectrum);
        assert!((s.lambda_min.unwrap() - 0.381966).abs() < 1e-6);
        assert!((s.lambda_max - 2.618034).abs() < 1e-6);
        assert!(s.extremal_distinct);
    }

    #[test]
    fn single_agent_summary() {
        let p = PinnedSystem::new(DMatrix::from_element(1, 1, 2.0), nalgebra::DVector::from_element(1, 2.0)).unwrap();
        let s = summarize(&p).unwrap();
        assert_eq!(s.real_range().unwrap(), (2.0, 2.0));
        assert!(!s.extremal_distinct);
    }

    #[test]
    fn perturbation_breaks_real_spectrum() {
        let s = summarize(&perturbed_example(0.1).unwrap()).unwrap();
        assert!(!s.is_real_spectrum);
        assert!(s.lambda_min.is_none());
        assert!(s.real_range().is_err());
    }

    #[test]
    fn non_rooted_spectrum_rejected() {
        // agent 2 has no inbound link: zero row in K
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = PinnedSystem::new(k, nalgebra::DVector::from_row_slice(&[1.0, 0.0])).unwrap();
        assert!(matches!(summarize(&p), Err(Error::NonPositiveSpectrum { .. })));
    }
}
