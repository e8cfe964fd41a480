//! Numeric oracles written directly from the definitions, plus random inputs.
//!
//! Nothing here calls the library's curvature or covariant-derivative code.
//! Coefficients are read through `ScalarExpr::eval_at` and every derivative
//! is a central difference.

#![allow(dead_code, clippy::needless_range_loop)]

use bundlecalc::connection::{ClassicalConnection, FieldType, LinearConnection};
use bundlecalc::expr::BasePoint;
use bundlecalc::generate::{monomials, random_polynomial};
use bundlecalc::parse::parse;
use bundlecalc::tensor::TensorField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_connection(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    degree: u32,
) -> LinearConnection {
    let monos = monomials(m, degree);
    LinearConnection::from_fn(m, n, |_, _, _| {
        parse(&random_polynomial(rng, &monos), m).unwrap()
    })
}

/// Symmetric in the outer lower indices by construction.
pub fn random_classical(rng: &mut ChaCha8Rng, m: usize, degree: u32) -> ClassicalConnection {
    let monos = monomials(m, degree);
    let mut table = vec![String::new(); m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in a..m {
                let text = random_polynomial(rng, &monos);
                table[(a * m + b) * m + c] = text.clone();
                table[(c * m + b) * m + a] = text;
            }
        }
    }
    ClassicalConnection::from_fn(m, |a, b, c| parse(&table[(a * m + b) * m + c], m).unwrap())
        .unwrap()
}

pub fn random_field(
    rng: &mut ChaCha8Rng,
    t: FieldType,
    m: usize,
    n: usize,
    degree: u32,
) -> TensorField {
    let monos = monomials(m, degree);
    TensorField::from_fn(t.shape(m, n), |_| {
        parse(&random_polynomial(rng, &monos), m).unwrap()
    })
}

pub fn random_points(rng: &mut ChaCha8Rng, m: usize, count: usize) -> Vec<BasePoint> {
    (0..count)
        .map(|_| {
            BasePoint::from(
                (0..m)
                    .map(|_| rng.gen_range(-1.0..=1.0))
                    .collect::<Vec<f64>>(),
            )
        })
        .collect()
}

/// NaN-propagating running maximum of `|v|`.
pub fn track(worst: &mut f64, v: f64) {
    if v.is_nan() || worst.is_nan() {
        *worst = f64::NAN;
    } else {
        *worst = worst.max(v.abs());
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let mut worst = 0.0;
    for (x, y) in a.iter().zip(b) {
        track(&mut worst, x - y);
    }
    worst
}

/// `K_j^i_l(x)` at `[(i*n + j)*m + l]`.
pub fn connection_at(k: &LinearConnection, x: &[f64]) -> Vec<f64> {
    let (m, n) = (k.base_dim(), k.rank());
    let mut out = Vec::with_capacity(n * n * m);
    for i in 0..n {
        for j in 0..n {
            for l in 0..m {
                out.push(k.get(i, j, l).eval_at(x).unwrap());
            }
        }
    }
    out
}

/// `Γ_a^b_c(x)` at `[(a*m + b)*m + c]`.
pub fn classical_at(g: &ClassicalConnection, x: &[f64]) -> Vec<f64> {
    let m = g.base_dim();
    let mut out = Vec::with_capacity(m * m * m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                out.push(g.get(a, b, c).eval_at(x).unwrap());
            }
        }
    }
    out
}

/// `Γ` laid out as a connection on `TM`: entry `(b, a, c)` is `Γ_a^b_c`.
pub fn classical_as_connection_at(g: &ClassicalConnection, x: &[f64]) -> Vec<f64> {
    let m = g.base_dim();
    let gv = classical_at(g, x);
    let mut out = vec![0.0; m * m * m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                out[(b * m + a) * m + c] = gv[(a * m + b) * m + c];
            }
        }
    }
    out
}

/// Central difference of a vector-valued function along `axis`.
pub fn partial(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], axis: usize, h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[axis] += h;
    xm[axis] -= h;
    let (fp, fm) = (f(&xp), f(&xm));
    fp.iter()
        .zip(&fm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

/// Curvature in matrix form, `R_{lμ} = ∂_μ A_l − ∂_l A_μ + [A_l, A_μ]` with
/// `(A_l)^i_j = K_j^i_l`, at `[((i*n + j)*m + l)*m + μ]`.
pub fn fd_curvature(
    kf: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    m: usize,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let k = kf(x);
    let dk: Vec<Vec<f64>> = (0..m).map(|a| partial(kf, x, a, h)).collect();
    let at = |v: &[f64], i: usize, j: usize, l: usize| v[(i * n + j) * m + l];
    let mut r = vec![0.0; n * n * m * m];
    for i in 0..n {
        for j in 0..n {
            for l in 0..m {
                for mu in 0..m {
                    let mut v = at(&dk[mu], i, j, l) - at(&dk[l], i, j, mu);
                    for p in 0..n {
                        v +=
                            at(&k, i, p, l) * at(&k, p, j, mu) - at(&k, i, p, mu) * at(&k, p, j, l);
                    }
                    r[((i * n + j) * m + l) * m + mu] = v;
                }
            }
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Up,
    Down,
    BaseUp,
    BaseDown,
}

pub fn slots_of(t: FieldType) -> Vec<Slot> {
    let mut s = vec![Slot::Up; t.p];
    s.extend(vec![Slot::Down; t.q]);
    s.extend(vec![Slot::BaseUp; t.r]);
    s.extend(vec![Slot::BaseDown; t.s]);
    s
}

pub fn extents(slots: &[Slot], n: usize, m: usize) -> Vec<usize> {
    slots
        .iter()
        .map(|s| match s {
            Slot::Up | Slot::Down => n,
            Slot::BaseUp | Slot::BaseDown => m,
        })
        .collect()
}

/// Row-major position of a multi-index.
pub fn flat(idx: &[usize], ext: &[usize]) -> usize {
    idx.iter().zip(ext).fold(0, |acc, (i, e)| acc * e + i)
}

pub fn multi(mut k: usize, ext: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; ext.len()];
    for s in (0..ext.len()).rev() {
        idx[s] = k % ext[s];
        k /= ext[s];
    }
    idx
}

/// Numeric covariant differential of a field given as a function of `x`.
/// `kf` and `gf` return coefficients in the layouts of [`connection_at`] and
/// [`classical_at`]. The new `ν` slot is appended last.
#[allow(clippy::too_many_arguments)]
pub fn fd_nabla(
    kf: &dyn Fn(&[f64]) -> Vec<f64>,
    gf: &dyn Fn(&[f64]) -> Vec<f64>,
    slots: &[Slot],
    n: usize,
    m: usize,
    phi: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let ext = extents(slots, n, m);
    let size: usize = ext.iter().product();
    let (k, g, v) = (kf(x), gf(x), phi(x));
    let dphi: Vec<Vec<f64>> = (0..m).map(|a| partial(phi, x, a, h)).collect();
    let kk = |i: usize, j: usize, l: usize| k[(i * n + j) * m + l];
    let gg = |a: usize, b: usize, c: usize| g[(a * m + b) * m + c];
    let mut out = vec![0.0; size * m];
    for flat_i in 0..size {
        let idx = multi(flat_i, &ext);
        for nu in 0..m {
            let mut acc = dphi[nu][flat_i];
            for (slot, kind) in slots.iter().enumerate() {
                let a = idx[slot];
                let mut moved = idx.clone();
                for c in 0..ext[slot] {
                    moved[slot] = c;
                    let val = v[flat(&moved, &ext)];
                    acc += match kind {
                        Slot::Up => -kk(a, c, nu) * val,
                        Slot::Down => kk(c, a, nu) * val,
                        Slot::BaseUp => -gg(c, a, nu) * val,
                        Slot::BaseDown => gg(a, c, nu) * val,
                    };
                }
            }
            out[flat_i * m + nu] = acc;
        }
    }
    out
}

/// `½(T[.., a, b] − T[.., b, a])` over the last two slots (extent `m` each).
pub fn alt_last_two(t: &[f64], m: usize) -> Vec<f64> {
    let block = m * m;
    let mut out = vec![0.0; t.len()];
    for base in (0..t.len()).step_by(block) {
        for a in 0..m {
            for b in 0..m {
                out[base + a * m + b] = 0.5 * (t[base + a * m + b] - t[base + b * m + a]);
            }
        }
    }
    out
}

/// Evaluates a symbolic field entrywise, for use as an oracle input function.
pub fn field_at(phi: &TensorField, x: &[f64]) -> Vec<f64> {
    phi.data().iter().map(|e| e.eval_at(x).unwrap()).collect()
}
