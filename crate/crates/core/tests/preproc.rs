use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use proptest::prelude::*;
use pvsc_core::chain::{DepositRecord, DepositStatus, Ledger};
use pvsc_core::crypto::Block;
use pvsc_core::preproc::*;
use pvsc_core::transport::{PartyId, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[test]
fn bdoz_examples() {
    let mut r = rng(1);
    let zero = bdoz_authenticate(false, 3, &mut r);
    assert!(bdoz_check(&zero));
    assert!(!bdoz_open(&zero).unwrap());
    let one = bdoz_authenticate(true, 3, &mut r);
    assert!(bdoz_open(&one).unwrap());
    for s in [&zero, &one] {
        for b in &s.shares {
            for j in 0..3 {
                if let (Some(m), Some(k)) = (b.macs[j], b.keys[j]) {
                    let expect = if b.x { k ^ s.deltas[j] } else { k };
                    assert_eq!(m, expect);
                }
            }
        }
    }
}

#[test]
fn bdoz_tamper_detection() {
    let mut r = rng(2);
    let mut detected = 0;
    for t in 0..1000 {
        let n = r.gen_range(2..6);
        let mut s = bdoz_authenticate(r.gen(), n, &mut r);
        let i = r.gen_range(0..n);
        if t % 2 == 0 {
            s.shares[i].x ^= true;
        } else {
            let j = (i + r.gen_range(1..n)) % n;
            let bit = r.gen_range(0..128);
            let flip = Block(1u128 << bit);
            let m = s.shares[i].macs[j].unwrap();
            s.shares[i].macs[j] = Some(m ^ flip);
        }
        if !bdoz_check(&s) && bdoz_open(&s) == Err(PreprocError::MacFailure) {
            detected += 1;
        }
    }
    assert_eq!(detected, 1000);
}

#[test]
fn bdoz_linearity() {
    let mut r = rng(3);
    for _ in 0..1000 {
        let n = r.gen_range(2..5);
        let deltas = bdoz_deltas(n, &mut r);
        let (x, y): (bool, bool) = (r.gen(), r.gen());
        let a = bdoz_authenticate_with(x, &deltas, &mut r);
        let b = bdoz_authenticate_with(y, &deltas, &mut r);
        let c = bdoz_xor(&a, &b).unwrap();
        assert!(bdoz_check(&c));
        assert_eq!(bdoz_open(&c).unwrap(), x ^ y);
    }
    let a = bdoz_authenticate(true, 2, &mut r);
    let b = bdoz_authenticate(true, 2, &mut r);
    assert!(matches!(bdoz_xor(&a, &b), Err(PreprocError::Shape(_))));
}

#[test]
fn spdz_examples() {
    let mut r = rng(4);
    for n in 1..6 {
        let key = SpdzKey::random(n, &mut r);
        let z = spdz_share(Fp::ZERO, &key, &mut r);
        assert_eq!(spdz_open_check(&z, &key).unwrap(), Fp::ZERO);
        assert_eq!(z.macs.iter().copied().sum::<Fp>(), Fp::ZERO);
    }
    let key = SpdzKey::random(3, &mut r);
    let s = spdz_share(Fp::new(7), &key, &mut r);
    let summed = s.shares.iter().fold(0u128, |a, x| (a + x.value() as u128) % P61 as u128);
    assert_eq!(summed, 7);
    assert_eq!(spdz_open_check(&s, &key).unwrap(), Fp::new(7));
}

#[test]
fn spdz_tamper_detection() {
    let mut r = rng(5);
    let mut detected = 0;
    for _ in 0..10_000 {
        let n = r.gen_range(2..5);
        let key = SpdzKey::random(n, &mut r);
        let mut s = spdz_share(Fp::random(&mut r), &key, &mut r);
        let i = r.gen_range(0..n);
        s.shares[i] = s.shares[i] + Fp::ONE;
        if spdz_open_check(&s, &key) == Err(PreprocError::MacFailure) {
            detected += 1;
        }
    }
    assert_eq!(detected, 10_000);
}

#[test]
fn field_arithmetic_matches_bigint() {
    let mut r = rng(6);
    let p = P61 as u128;
    for _ in 0..10_000 {
        let (a, b) = (Fp::random(&mut r), Fp::random(&mut r));
        let (x, y) = (a.value() as u128, b.value() as u128);
        assert_eq!((a * b).value() as u128, x * y % p);
        assert_eq!((a + b).value() as u128, (x + y) % p);
        assert_eq!((a - b).value() as u128, (x + p - y) % p);
    }
    assert_eq!((Fp::new(P61 - 1) * Fp::new(P61 - 1)).value(), 1);
}

#[test]
fn spdz_bundle_round_trip() {
    let mut r = rng(7);
    let key = SpdzKey::random(4, &mut r);
    let s = spdz_share(Fp::new(99), &key, &mut r);
    let text = s.to_text();
    assert!(text.starts_with("modulus 1fffffffffffffff\nparties 4\n"));
    assert_eq!(SpdzShare::from_text(&text).unwrap(), s);
    assert!(SpdzShare::from_text("modulus 17\nparties 1\n0 0\n").is_err());
    assert!(SpdzShare::from_text(&text.replace("parties 4", "parties 5")).is_err());
}

#[test]
fn reshare_examples() {
    let mut r = rng(8);
    let o_key = SpdzKey::random(2, &mut r);
    let e_key = SpdzKey::random(4, &mut r);
    let cover = assign_cover(4, 2, 2, 9).unwrap();
    for v in [Fp::ZERO, Fp::random(&mut r)] {
        let s = spdz_share(v, &o_key, &mut r);
        let out = reshare(&s, &cover, &e_key, &mut r).unwrap();
        assert_eq!(spdz_open_check(&out, &e_key).unwrap(), v);
    }
    let mut holey = cover.clone();
    let missing = *holey.assignment[0].iter().next().unwrap();
    for set in &mut holey.assignment {
        set.remove(&missing);
    }
    let s = spdz_share(Fp::ONE, &o_key, &mut r);
    assert_eq!(reshare(&s, &holey, &e_key, &mut r), Err(PreprocError::IncompleteCover(missing)));
}

#[test]
fn reshare_preserves_value() {
    let mut r = rng(10);
    for t in 0..1000 {
        let n_e: usize = r.gen_range(1..9);
        let n_o = r.gen_range(1..5);
        let c = n_e.div_ceil(n_o);
        let l = r.gen_range(c..=n_e);
        let cover = assign_cover(n_e, n_o, l, t).unwrap();
        let o_key = SpdzKey::random(n_o, &mut r);
        let e_key = SpdzKey::random(n_e, &mut r);
        let v = Fp::random(&mut r);
        let s = spdz_share(v, &o_key, &mut r).scale(Fp::new(3)).add_const(Fp::new(5), &o_key);
        let out = reshare(&s, &cover, &e_key, &mut r).unwrap();
        assert_eq!(spdz_open_check(&out, &e_key).unwrap(), v * Fp::new(3) + Fp::new(5));
    }
}

#[test]
fn cover_examples() {
    let c = assign_cover(1, 1, 1, 0).unwrap();
    assert_eq!(c.assignment, vec![BTreeSet::from([0])]);
    for seed in 0..200 {
        let c = assign_cover(4, 2, 2, seed).unwrap();
        c.check().unwrap();
        assert!(c.assignment.iter().all(|s| s.len() == 2));
    }
    assert_eq!(assign_cover(7, 3, 2, 0).unwrap_err(), PreprocError::Infeasible("l = 2 below ceil(n_E/n_O) = 3".into()));
    assert!(assign_cover(3, 2, 4, 0).is_err());
    assert!(assign_cover(0, 2, 1, 0).is_err());
    assert_eq!(assign_cover(6, 3, 3, 42).unwrap(), assign_cover(6, 3, 3, 42).unwrap());
    let text = assign_cover(4, 2, 2, 1).unwrap().to_text();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("O1: E"));
}

#[test]
fn cover_marginals_uniform() {
    let trials = 10_000u64;
    let mut counts = [[0u64; 6]; 3];
    for seed in 0..trials {
        let c = assign_cover(6, 3, 3, seed).unwrap();
        for (o, set) in c.assignment.iter().enumerate() {
            for &e in set {
                counts[o][e] += 1;
            }
        }
    }
    let sd = (0.25 / trials as f64).sqrt();
    for row in counts {
        for n in row {
            assert!((n as f64 / trials as f64 - 0.5).abs() <= 3.0 * sd, "{n}");
        }
    }
}

#[test]
fn special_case_is_l_over_n() {
    let mut pairs = 0;
    for n_e in 2usize..=8 {
        for n_o in 1..=4 {
            for l in n_e.div_ceil(n_o)..=n_e {
                let p = cover_secure_probability(n_e, n_o, n_e - 1, n_o - 1, l).unwrap();
                assert_eq!(p.exact, BigRational::new(BigInt::from(l), BigInt::from(n_e)));
                assert_eq!(p.formula, CoverFormula::ClosedForm);
                pairs += 1;
            }
        }
    }
    assert!(pairs >= 20);
    assert_eq!(cover_secure_probability(4, 2, 3, 1, 2).unwrap().value, 0.5);
}

#[test]
fn honest_executors_always_secure() {
    for (n_e, n_o, t_o, l) in [(4, 2, 1, 2), (5, 3, 2, 3), (8, 4, 0, 2)] {
        assert_eq!(cover_secure_probability(n_e, n_o, 0, t_o, l).unwrap().value, 1.0);
        let mc = mc_cover_probability(n_e, n_o, 0, t_o, l, 1000, 1).unwrap();
        assert_eq!(mc.estimate, 1.0);
    }
    assert!(cover_secure_probability(4, 2, 4, 0, 2).is_err());
}

/// Brute force over every step-1 ordering, O-permutation, padding choice and
/// placement of corrupt E-parties; corrupt O-parties are the first `t_O`.
fn enumerate(n_e: usize, n_o: usize, t_e: usize, t_o: usize, l: usize) -> BigRational {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }
    fn choose(items: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if items.len() < k {
            return vec![];
        }
        let mut out: Vec<Vec<usize>> = choose(&items[1..], k - 1)
            .into_iter()
            .map(|mut v| {
                v.insert(0, items[0]);
                v
            })
            .collect();
        out.extend(choose(&items[1..], k));
        out
    }
    let c = n_e.div_ceil(n_o);
    let corrupt_sets = choose(&(0..n_e).collect::<Vec<_>>(), t_e);
    let (mut good, mut total) = (0u64, 0u64);
    for pi in perms(n_e) {
        for sigma in perms(n_o) {
            let mut base = vec![BTreeSet::new(); n_o];
            for k in 0..n_o {
                for i in 0..c {
                    base[sigma[k]].insert(pi[(k * c + i) % n_e]);
                }
            }
            let pads: Vec<Vec<Vec<usize>>> = base
                .iter()
                .map(|b| choose(&(0..n_e).filter(|e| !b.contains(e)).collect::<Vec<_>>(), l - c))
                .collect();
            let mut idx = vec![0usize; n_o];
            loop {
                let sets: Vec<BTreeSet<usize>> =
                    (0..n_o).map(|o| base[o].iter().chain(&pads[o][idx[o]]).copied().collect()).collect();
                for bad in &corrupt_sets {
                    total += 1;
                    let secure = (t_o..n_o).any(|o| sets[o].iter().any(|e| !bad.contains(e)));
                    good += secure as u64;
                }
                let mut d = 0;
                while d < n_o {
                    idx[d] += 1;
                    if idx[d] < pads[d].len() {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == n_o {
                    break;
                }
            }
        }
    }
    BigRational::new(BigInt::from(good), BigInt::from(total))
}

#[test]
fn exhaustive_oracle_small() {
    assert_eq!(enumerate(4, 2, 2, 0, 2), cover_secure_probability(4, 2, 2, 0, 2).unwrap().exact);
    assert_eq!(cover_secure_probability(4, 2, 2, 0, 2).unwrap().value, 1.0);
    let mut fallbacks = 0;
    for n_e in 1usize..=5 {
        for n_o in 1..=4 {
            for l in n_e.div_ceil(n_o)..=n_e {
                for t_e in 0..n_e {
                    for t_o in 0..n_o {
                        let p = cover_secure_probability(n_e, n_o, t_e, t_o, l).unwrap();
                        let brute = enumerate(n_e, n_o, t_e, t_o, l);
                        assert_eq!(p.exact, brute, "({n_e},{n_o},{t_e},{t_o},{l})");
                        if p.formula == CoverFormula::ExactFallback {
                            fallbacks += 1;
                            assert_eq!(cover_exact_probability(n_e, n_o, t_e, t_o, l).unwrap(), brute);
                        } else {
                            assert_eq!(cover_closed_form(n_e, n_o, t_e, t_o, l).unwrap(), brute);
                        }
                    }
                }
            }
        }
    }
    assert!(fallbacks > 0);
}

#[test]
fn monte_carlo_agrees() {
    let mut checked = 0;
    for n_e in [2usize, 4, 5, 7, 8] {
        for n_o in 1..=4 {
            let c = n_e.div_ceil(n_o);
            for l in [c, (c + n_e) / 2] {
                for (t_e, t_o) in [(n_e / 2, n_o / 2), (n_e - 1, 0), (n_e - 1, n_o - 1)] {
                    let p = cover_secure_probability(n_e, n_o, t_e, t_o, l).unwrap().value;
                    let seed = (n_e * 1000 + n_o * 100 + l * 10 + t_e) as u64;
                    let mc = mc_cover_probability(n_e, n_o, t_e, t_o, l, 20_000, seed).unwrap();
                    assert!(mc.within_sigmas(p, 3.0) || (mc.ci_low..=mc.ci_high).contains(&p), "{mc:?} vs {p}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn wilson_interval_brackets() {
    let (lo, hi) = wilson_interval(50, 100, 1.96);
    assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    let (lo, hi) = wilson_interval(100, 100, 1.96);
    assert!(hi > 1.0 - 1e-12 && lo > 0.96);
}

#[test]
fn deposits_settle() {
    let mut ledger = Ledger::new();
    let miners: Vec<PartyId> = (0..3).map(|i| PartyId { role: Role::Outsourcer, index: i }).collect();
    let deposits: Vec<DepositRecord> = miners.iter().map(|&p| DepositRecord::held(p, 1_000_000)).collect();
    let out = settle_deposits(&mut ledger, &deposits, &miners[1..2]).unwrap();
    let st: Vec<DepositStatus> = out.iter().map(|d| d.status).collect();
    assert_eq!(st, vec![DepositStatus::Returned, DepositStatus::Confiscated, DepositStatus::Returned]);
    assert!(settle_deposits(&mut ledger, &out, &[]).is_err());
}

proptest! {
    #[test]
    fn spdz_homomorphism(a in 0..P61, b in 0..P61, k in 0..P61, n in 1usize..6, seed: u64) {
        let mut r = rng(seed);
        let key = SpdzKey::random(n, &mut r);
        let (x, y, c) = (Fp::new(a), Fp::new(b), Fp::new(k));
        let sx = spdz_share(x, &key, &mut r);
        let sy = spdz_share(y, &key, &mut r);
        prop_assert_eq!(spdz_open_check(&sx.add(&sy), &key).unwrap(), x + y);
        prop_assert_eq!(spdz_open_check(&sx.scale(c), &key).unwrap(), x * c);
        prop_assert_eq!(spdz_open_check(&sx.add_const(c, &key), &key).unwrap(), x + c);
        prop_assert_eq!(spdz_open_check(&sx.add(&sy.scale(Fp::new(P61 - 1))), &key).unwrap(), x - y);
    }

    #[test]
    fn cover_invariants(n_e in 1usize..20, n_o in 1usize..8, extra in 0usize..20, seed: u64) {
        let c = n_e.div_ceil(n_o);
        let l = c + extra % (n_e - c + 1);
        let cover = assign_cover(n_e, n_o, l, seed).unwrap();
        prop_assert!(cover.check().is_ok());
        prop_assert!(cover.assignment.iter().all(|s| s.len() == l && s.iter().all(|&e| e < n_e)));
    }

    #[test]
    fn probability_in_unit_interval(n_e in 1usize..9, n_o in 1usize..5, te in 0usize..8, to in 0usize..4, extra in 0usize..8) {
        let (t_e, t_o) = (te % n_e, to % n_o);
        let c = n_e.div_ceil(n_o);
        let l = c + extra % (n_e - c + 1);
        let p = cover_secure_probability(n_e, n_o, t_e, t_o, l).unwrap();
        prop_assert!((0.0..=1.0).contains(&p.value));
        prop_assert!(p.exact <= BigRational::one());
        prop_assert!((p.value - p.exact.to_f64().unwrap()).abs() < 1e-12);
    }
}
