mod common;

use proptest::prelude::*;
use rclab::asymptotics::{chi_tilde_limit, chi_tilde_n, GEntry, GTable, LimitSchedule, Provenance};
use rclab::couplings::{normalize, PrefactorSpec};
use rclab::geometry::{canonical_dual, dual_vectors, surcharge_raw, NormSpec};
use rclab::saw::cone_spec;
use rclab::seqlab::{check_and_extract_b, extract_bound_a, Seq, SeqError, SeqHypA, SeqHypB};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// G(u) = w(u) e^{−a ρ(u)} on ρ(u) ≤ r, with w in [1/2, 1] from a seed.
fn table(norm: &NormSpec, r: i64, a: f64, seed: u64) -> GTable {
    let d = norm.dim();
    let mut entries = Vec::new();
    let mut state = seed | 1;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        0.5 + 0.5 * (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let span: Vec<i64> = (-r..=r).collect();
    let mut push = |x: Vec<i64>| {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let rho = norm.rho(&xf);
        if rho <= r as f64 {
            let w = if rho == 0.0 { 1.0 } else { next() };
            entries.push(GEntry { x, g: w * (-a * rho).exp(), err: 0.0 });
        }
    };
    match d {
        1 => span.iter().for_each(|&u| push(vec![u])),
        _ => span.iter().for_each(|&u| span.iter().for_each(|&v| push(vec![u, v]))),
    }
    GTable::new(d, entries, Provenance::Synthetic)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn direct_and_surcharge_forms_agree(
        family in 0usize..3,
        a in 3.0f64..5.0,
        n in 1i64..200,
        s1 in 0i64..3,
        seed in any::<u64>(),
        beta in 0.05f64..1.0,
        q in 1.0f64..3.0,
    ) {
        let (norm, s) = match family {
            0 => (NormSpec::l1(1), vec![1]),
            1 => (NormSpec::l1(2), vec![1, s1]),
            _ => (NormSpec::l2(2), vec![1, s1]),
        };
        let spec = normalize(norm.clone(), PrefactorSpec::polynomial(3.0, true), None).unwrap();
        let t = table(&norm, 6, a, seed);
        let chi = chi_tilde_n(&t, &spec, &s, n, beta, q).unwrap();
        prop_assert!((chi.direct - chi.surcharge).abs() <= 1e-10 * chi.surcharge,
            "direct {} surcharge {}", chi.direct, chi.surcharge);
    }

    #[test]
    fn c1_shortcut_within_schedule_and_truncation(
        a in 3.0f64..5.0,
        s1 in -2i64..3,
        seed in any::<u64>(),
        beta in 0.05f64..1.0,
    ) {
        let norm = NormSpec::l2(2);
        let spec = normalize(norm.clone(), PrefactorSpec::polynomial(3.0, true), None).unwrap();
        let t = table(&norm, 6, a, seed);
        let r = chi_tilde_limit(&t, &spec, &[1, s1], beta, 1.0, LimitSchedule::default()).unwrap();
        let gap = (r.limit - r.shortcut).abs();
        prop_assert!(gap <= r.schedule_bound + r.truncation + 1e-9 * r.shortcut,
            "limit {} shortcut {} bounds {} + {}", r.limit, r.shortcut, r.schedule_bound, r.truncation);
        // For ℓ2, 𝔰_s(ns − y) ≤ |y|²/(2(n − |y|)); here |y| ≤ 12 and n = 2^24.
        let g_max = 144.0 / (2.0 * ((1u64 << 24) as f64 - 12.0));
        prop_assert!(r.g_form <= r.shortcut * (1.0 + 1e-12));
        prop_assert!(r.shortcut - r.g_form <= r.shortcut * -(-g_max).exp_m1() + 1e-12 * r.shortcut);
    }

    #[test]
    fn dual_vectors_attain_the_norm(
        family in 0usize..3,
        d in 1usize..4,
        s in proptest::collection::vec(-5.0f64..5.0, 3),
        x in proptest::collection::vec(-20.0f64..20.0, 3),
    ) {
        prop_assume!(s[..d].iter().any(|v| v.abs() > 1e-3));
        let norm = match family {
            0 => NormSpec::l1(d),
            1 => NormSpec::l2(d),
            _ => NormSpec::linf(d),
        };
        for t in dual_vectors(&norm, &s[..d]).unwrap() {
            let ts: f64 = t.t.iter().zip(&t.s).map(|(a, b)| a * b).sum();
            prop_assert!((ts - norm.rho(&t.s)).abs() < 1e-9);
            let tx: f64 = t.t.iter().zip(&x[..d]).map(|(a, b)| a * b).sum();
            prop_assert!(tx <= norm.rho(&x[..d]) + 1e-9);
            prop_assert!(surcharge_raw(&norm, &t.t, &x[..d]) >= 0.0);
        }
    }

    #[test]
    fn cone_concatenations_are_self_avoiding(
        d in 1usize..3,
        dir in proptest::collection::vec(-3i64..4, 2),
        alpha in 0.5f64..3.0,
        idx in proptest::collection::vec(any::<proptest::sample::Index>(), 1..40),
    ) {
        prop_assume!(dir[..d].iter().any(|&v| v != 0));
        let norm = NormSpec::l1(d);
        let spec = normalize(norm.clone(), PrefactorSpec::polynomial(alpha, true), None).unwrap();
        let sf: Vec<f64> = dir[..d].iter().map(|&v| v as f64).collect();
        let t = canonical_dual(&norm, &sf).unwrap();
        let cone = cone_spec(&spec, &t.t, 6.0).unwrap();
        prop_assert!(cone.witness_margin > 0.0);
        let picks: Vec<usize> = idx.iter().map(|i| i.index(cone.steps.len())).collect();
        let w = cone.concatenate(&picks);
        prop_assert!(w.first_repeat().is_none());
        prop_assert!(cone.projection_increases(&w));
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn squaring_bound_holds_on_stretched_exponentials(
        m in 2usize..5,
        extra in 0.0f64..1.0,
        c in 0.5f64..2.0,
    ) {
        let nu = 2f64.ln() / (m as f64).ln();
        let gamma = nu + extra * (1.0 - nu);
        let a = Seq::from_log_fn(20_000, |n| -c * (n as f64).powf(gamma)).unwrap();
        let witnesses: Vec<usize> = (10..15).map(|k| 1 << k).collect();
        let hyp = SeqHypA { m, alpha: 1.0, c1_big: 1.0, c2_big: 1.0, c1: 1.0, eps: 0.2, witnesses };
        match extract_bound_a(&a, &hyp) {
            Ok(b) => {
                prop_assert!((b.nu - nu).abs() < 1e-12);
                for n in 1..=a.len() {
                    let bound = b.big_c.ln() - b.c * (n as f64).powf(b.nu);
                    prop_assert!(a.log_a(n) <= bound + 1e-9, "N = {n}");
                }
            }
            Err(e) => prop_assert_eq!(e, SeqError::NoAdmissibleN0),
        }
    }

    #[test]
    fn convolution_bound_holds_on_exponentials(c in 0.1f64..1.0, alpha in 0.0f64..2.0) {
        let a = Seq::from_log_fn(20_000, |n| -c * n as f64).unwrap();
        let hyp = SeqHypB { c1: c, alpha, eps: 0.5, n_tilde: 100 };
        match check_and_extract_b(&a, &hyp) {
            Ok(b) => {
                for n in 1..=a.len() {
                    prop_assert!(a.log_a(n) <= b.big_c.ln() - b.c * n as f64 + 1e-9, "N = {n}");
                }
            }
            Err(e) => prop_assert_eq!(e, SeqError::NoAdmissibleN0),
        }
    }
}
