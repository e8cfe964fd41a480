//! Seeded random scenarios with polynomial coefficients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connection::FieldType;
use crate::scenario::{
    BundleDef, CheckKind, CheckSpec, ClassicalDef, ConnectionDef, Entry, FieldDef, Scenario,
};

pub const MAX_GEN_DIM: usize = 4;
pub const MAX_GEN_DEGREE: u32 = 3;

/// Monomial terms per coefficient; keeps expression trees small enough for
/// second covariant differentials of the curvature.
pub const TERMS_PER_COEFFICIENT: usize = 3;

/// Field types exercised by the generated `ricci` checks.
pub const GENERATED_FIELD_TYPES: [FieldType; 7] = [
    FieldType::new(1, 0, 0, 0),
    FieldType::new(0, 1, 0, 0),
    FieldType::new(0, 0, 1, 0),
    FieldType::new(0, 0, 0, 1),
    FieldType::new(1, 1, 0, 0),
    FieldType::new(1, 1, 0, 2),
    FieldType::new(0, 0, 1, 1),
];

/// Exponent vectors of all monomials in `m` variables of total degree
/// `<= degree`, graded then lexicographic.
pub fn monomials(m: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(m: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == m {
            out.push(prefix.clone());
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(m, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut level = Vec::new();
        rec(m, d, &mut Vec::new(), &mut level);
        level.retain(|e| e.iter().sum::<u32>() == d);
        out.extend(level);
    }
    out
}

fn monomial_text(exps: &[u32]) -> String {
    exps.iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| {
            if e == 1 {
                format!("x{}", i + 1)
            } else {
                format!("x{}^{e}", i + 1)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// Uniform on `[−1, 1]`, rounded to four decimals and never zero.
fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let c = (rng.gen_range(-1.0f64..=1.0) * 1e4).round() / 1e4;
    if c == 0.0 {
        1e-4
    } else {
        c
    }
}

/// A random polynomial as source text.
pub fn random_polynomial(rng: &mut ChaCha8Rng, monos: &[Vec<u32>]) -> String {
    let count = TERMS_PER_COEFFICIENT.min(monos.len());
    let mut picks = sample(rng, monos.len(), count).into_vec();
    picks.sort_unstable();
    let mut out = String::new();
    for (k, &idx) in picks.iter().enumerate() {
        let c = coefficient(rng);
        let mono = monomial_text(&monos[idx]);
        let mag = c.abs();
        let term = if mono.is_empty() {
            format!("{mag}")
        } else {
            format!("{mag}*{mono}")
        };
        match (k, c < 0.0) {
            (0, false) => out.push_str(&term),
            (0, true) => out.push_str(&format!("-{term}")),
            (_, false) => out.push_str(&format!(" + {term}")),
            (_, true) => out.push_str(&format!(" - {term}")),
        }
    }
    out
}

fn field_name(t: FieldType) -> String {
    format!("Phi{}{}{}{}", t.p, t.q, t.r, t.s)
}

/// A scenario with connections `K` on `E` and `Kprime` on `Eprime` (both of
/// rank `n`), a symmetric `Gamma`, one field per entry of
/// [`GENERATED_FIELD_TYPES`] and every check enabled.
///
/// # Panics
///
/// If `m` or `n` is not in `1..=4` or `degree > 3`.
pub fn generate_random(seed: u64, m: usize, n: usize, degree: u32) -> Scenario {
    assert!(
        (1..=MAX_GEN_DIM).contains(&m) && (1..=MAX_GEN_DIM).contains(&n),
        "dimensions must be in 1..=4"
    );
    assert!(degree <= MAX_GEN_DEGREE, "degree must be at most 3");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let monos = monomials(m, degree);
    let mut s = Scenario::new(m);
    s.options.seed = seed;
    s.bundles = vec![
        BundleDef {
            name: "E".into(),
            rank: n,
        },
        BundleDef {
            name: "Eprime".into(),
            rank: n,
        },
    ];
    for (name, bundle) in [("K", "E"), ("Kprime", "Eprime")] {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..m {
                    entries.push(Entry {
                        index: vec![i, j, l],
                        expr: random_polynomial(&mut rng, &monos),
                    });
                }
            }
        }
        s.connections.push(ConnectionDef {
            name: name.into(),
            bundle: bundle.into(),
            entries,
        });
    }

    let mut gamma: Vec<Entry> = Vec::new();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let expr = if a <= c {
                    random_polynomial(&mut rng, &monos)
                } else {
                    gamma
                        .iter()
                        .find(|e| e.index == [c, b, a])
                        .expect("mirror generated first")
                        .expr
                        .clone()
                };
                gamma.push(Entry {
                    index: vec![a, b, c],
                    expr,
                });
            }
        }
    }
    s.classicals.push(ClassicalDef {
        name: "Gamma".into(),
        entries: gamma,
    });

    for t in GENERATED_FIELD_TYPES {
        let shape = t.shape(m, n);
        let entries = shape
            .indices()
            .map(|index| Entry {
                index,
                expr: random_polynomial(&mut rng, &monos),
            })
            .collect();
        let bundle = (t.p + t.q > 0).then(|| "E".to_string());
        s.fields.push(FieldDef {
            name: field_name(t),
            field_type: t,
            bundle,
            entries,
        });
    }

    s.checks = vec![
        CheckSpec::new(CheckKind::Curvature, &["K"]),
        CheckSpec::new(CheckKind::Curvature, &["Kprime"]),
        CheckSpec::new(CheckKind::DualCurvature, &["K"]),
        CheckSpec::new(CheckKind::TensorCurvature, &["K", "Kprime"]),
        CheckSpec::new(CheckKind::BilinearDecomposition, &["K", "Kprime"]),
        CheckSpec::new(CheckKind::BianchiLinear, &["K", "Gamma"]),
        CheckSpec::new(CheckKind::BianchiClassical, &["Gamma"]),
    ];
    for t in GENERATED_FIELD_TYPES {
        let name = field_name(t);
        s.checks
            .push(CheckSpec::new(CheckKind::Ricci, &[&name, "K", "Gamma"]));
    }
    s.checks
        .push(CheckSpec::new(CheckKind::RicciOnCurvature, &["K", "Gamma"]));
    s
}
