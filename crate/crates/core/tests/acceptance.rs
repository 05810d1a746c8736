//! Acceptance harness: one line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use pvsc_core::chain::{gas_cost, Ledger};
use pvsc_core::circuit::{pack_bits, testing::random_circuit, testing::random_bits};
use pvsc_core::contracts::finance::{self, OptionKind};
use pvsc_core::contracts::{self, annotated_source, boundary_inputs, relative_error, ContractSpec};
use pvsc_core::crypto::{Block, Digest};
use pvsc_core::garble;
use pvsc_core::mpcrun::{run_private_contract, transcript_contains, Clearance, Engine, EngineChoice, MpcError, RunConfig};
use pvsc_core::outsource::{Deployment, EncodedInput, NikeKind, PivotTable};
use pvsc_core::preproc::*;
use pvsc_core::transport::{PartyId, Role};
use pvsc_core::verify::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn seed(i: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&i.to_le_bytes());
    s
}

fn criterion_1() -> Check {
    let a = gas_cost(10_000_000, 5, 21.0, 380.0);
    let b = gas_cost(32_768, 2000, 21.0, 380.0);
    let ratio = a / 2.2e-8;
    ensure((a - 399.0).abs() <= 0.01, format!("gas_cost(1e7,5,21,380) = {a}"))?;
    ensure((b - 523.0).abs() <= 0.5, format!("gas_cost(32768,2000,21,380) = {b}"))?;
    ensure((ratio / 1.8136e10 - 1.0).abs() <= 1e-3, format!("expense ratio {ratio:e}"))?;
    Ok(format!("{a:.2} USD, {b:.2} USD, ratio {ratio:.4e}"))
}

fn criterion_2() -> Check {
    let g = estimate_pcc_times(1500).gen_seconds;
    let v = estimate_pcc_times(6000).verify_seconds;
    ensure((g - 2.5).abs() < 1e-12, format!("gen(1500) = {g}"))?;
    ensure((v - 1.25).abs() < 1e-12, format!("verify(6000) = {v}"))?;
    ensure(CERTIFICATE_OVERHEAD == 1.30, format!("overhead {CERTIFICATE_OVERHEAD}"))?;
    Ok(format!("gen(1500) = {g} s, verify(6000) = {v} s, overhead {CERTIFICATE_OVERHEAD}"))
}

/// Exhaustive probability over every ordering, block placement, padding and corrupt E-set.
fn enumerate_cover(n_e: usize, n_o: usize, t_e: usize, t_o: usize, l: usize) -> BigRational {
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
            let pads: Vec<Vec<Vec<usize>>> =
                base.iter().map(|b| choose(&(0..n_e).filter(|e| !b.contains(e)).collect::<Vec<_>>(), l - c)).collect();
            let mut idx = vec![0usize; n_o];
            loop {
                let sets: Vec<BTreeSet<usize>> =
                    (0..n_o).map(|o| base[o].iter().chain(&pads[o][idx[o]]).copied().collect()).collect();
                for bad in &corrupt_sets {
                    total += 1;
                    // By symmetry the corrupt O-parties are the first t_O.
                    good += (t_o..n_o).any(|o| sets[o].iter().any(|e| !bad.contains(e))) as u64;
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

fn sweep_points(max_e: usize, max_o: usize) -> Vec<(usize, usize, usize, usize, usize)> {
    let mut pts = Vec::new();
    for n_e in 1..=max_e {
        for n_o in 1..=max_o {
            for l in n_e.div_ceil(n_o)..=n_e {
                for t_e in 0..n_e {
                    for t_o in 0..n_o {
                        pts.push((n_e, n_o, t_e, t_o, l));
                    }
                }
            }
        }
    }
    pts
}

fn criterion_3() -> Check {
    let mut pairs = 0;
    for n_e in 2..=8usize {
        for l in 1..=n_e {
            if pairs == 20 {
                break;
            }
            let p = cover_secure_probability(n_e, n_e, n_e - 1, n_e - 1, l).map_err(|e| e.to_string())?;
            let want = BigRational::new(BigInt::from(l), BigInt::from(n_e));
            ensure(p.exact == want, format!("all-but-one-corrupt ({n_e}, {l}): {} != {want}", p.exact))?;
            pairs += 1;
        }
    }
    ensure(pairs == 20, "fewer than 20 pairs")?;

    let pts = sweep_points(8, 4);
    let mc_start = Instant::now();
    let results: Vec<Result<(f64, bool, bool, bool, bool), String>> = std::thread::scope(|s| {
        let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(16);
        let chunks: Vec<_> = pts.chunks(pts.len().div_ceil(workers)).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                s.spawn(move || {
                    chunk
                        .iter()
                        .map(|&(n_e, n_o, t_e, t_o, l)| {
                            let p = cover_secure_probability(n_e, n_o, t_e, t_o, l).map_err(|e| e.to_string())?;
                            let seed = (((n_e * 16 + n_o) * 16 + t_e) * 16 + t_o) as u64 * 16 + l as u64;
                            let mc = mc_cover_probability(n_e, n_o, t_e, t_o, l, 100_000, seed).map_err(|e| e.to_string())?;
                            let sd = (p.value * (1.0 - p.value) / mc.trials as f64).sqrt();
                            let z = if sd == 0.0 { if mc.estimate == p.value { 0.0 } else { f64::INFINITY } } else { (mc.estimate - p.value).abs() / sd };
                            Ok((z, mc.within_sigmas(p.value, 3.0), p.formula == CoverFormula::ClosedForm, mc.within_sigmas(p.closed_form, 3.0), sd > 0.0))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker")).collect()
    });
    let mut worst = 0.0f64;
    let mut outside = Vec::new();
    let (mut closed, mut raw_off, mut random) = (0, 0, 0);
    for (pt, r) in pts.iter().zip(results) {
        let (z, ok, is_closed, raw_ok, nondegenerate) = r?;
        random += nondegenerate as usize;
        worst = worst.max(z);
        closed += is_closed as usize;
        raw_off += (!is_closed && !raw_ok) as usize;
        if !ok {
            outside.push(format!("{pt:?} z={z:.2}"));
        }
    }

    let mc_time = mc_start.elapsed();
    let enum_start = Instant::now();
    let mut exhaustive = 0;
    for &(n_e, n_o, t_e, t_o, l) in sweep_points(5, 4).iter() {
        let p = cover_secure_probability(n_e, n_o, t_e, t_o, l).map_err(|e| e.to_string())?;
        let brute = enumerate_cover(n_e, n_o, t_e, t_o, l);
        ensure(p.exact == brute, format!("({n_e},{n_o},{t_e},{t_o},{l}) exact {} vs enumeration {brute}", p.exact))?;
        exhaustive += 1;
    }
    let summary = format!(
        "20 pairs = l/n_E; {} sweep points ({closed} closed form, {} exact fallback, raw closed form off at {raw_off} of those), max |z| = {worst:.2} over {random} non-degenerate points ({:.1} expected beyond 3 sigma by chance); {exhaustive} points equal enumeration (MC {mc_time:.1?}, enumeration {:.1?})",
        pts.len(),
        pts.len() - closed,
        random as f64 * 0.0027,
        enum_start.elapsed()
    );
    ensure(outside.is_empty(), format!("{summary}; outside 3 sigma: {}", outside.join(", ")))?;
    Ok(summary)
}

fn oracle_agreement(spec: &ContractSpec, n: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut cases = boundary_inputs(spec);
    cases.extend((0..n).map(|_| spec.sample_inputs(&mut rng)));
    let mut worst = 0.0f64;
    for inputs in &cases {
        let got = spec.eval(inputs).map_err(|e| e.to_string())?;
        let want = spec.oracle(inputs).map_err(|e| e.to_string())?;
        ensure(spec.outputs_agree(&got, &want), format!("{}: {inputs:?} gives {got:?}, oracle {want:?}", spec.name))?;
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max(relative_error(g.as_f64(), w.as_f64()));
        }
    }
    Ok(worst)
}

/// Contracts whose published counts are compared within a factor of four.
const BANDED: [&str; 4] = ["millionaire", "second_price_auction", "crowdfund", "dao_invest_fund"];

fn criterion_4() -> Check {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for name in contracts::TABLE1 {
        let spec = contracts::build(name).map_err(|e| e.to_string())?;
        let ours = spec.gate_counts().and_count;
        let paper = spec.paper_and_gates.ok_or(format!("{name}: no published count"))?;
        let ratio = ours as f64 / paper as f64;
        let worst = oracle_agreement(&spec, 1000, 4)?;
        rows.push(format!("{name} {ours}/{paper} ratio {ratio:.2} (worst rel err {worst:.1e})"));
        if BANDED.contains(&name) && !(0.25..=4.0).contains(&ratio) {
            failures.push(format!("{name} AND count {ours} not within 4x of {paper}"));
        }
    }
    let summary = rows.join("; ");
    ensure(failures.is_empty(), format!("{}; {summary}", failures.join("; ")))?;
    Ok(summary)
}

fn criterion_5() -> Check {
    let mut sessions = 0;
    for name in contracts::TABLE1 {
        let spec = contracts::build(name).map_err(|e| e.to_string())?;
        let engines = EngineChoice::unanimous(spec.num_parties(), Engine::YaoSemiHonest);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for i in 0..50u64 {
            // Resample constants and small integers, which collide with length fields.
            let (inputs, bits) = loop {
                let inputs = spec.sample_inputs(&mut rng);
                let bits = spec.encode_inputs(&inputs).map_err(|e| e.to_string())?;
                let needle = pack_bits(&bits[0]);
                if needle.iter().collect::<BTreeSet<_>>().len() > 1 && needle.iter().filter(|&&b| b != 0).count() >= 3 {
                    break (inputs, bits);
                }
            };
            let mut ledger = Ledger::new();
            let r = run_private_contract(&spec.circuit, &bits, &engines, &Clearance::waived(), &RunConfig::new(seed(i)), &mut ledger)
                .map_err(|e| format!("{name}: {e}"))?;
            let got = spec.decode_outputs(&r.output);
            let want = spec.oracle(&inputs).map_err(|e| e.to_string())?;
            ensure(spec.outputs_agree(&got, &want), format!("{name} session {i}: {got:?} vs oracle {want:?}"))?;
            ensure(r.results.iter().all(|x| x == &r.output), format!("{name}: parties disagree"))?;
            ensure(
                !transcript_contains(&r.transcript, PartyId::EVALUATOR, &pack_bits(&bits[0])),
                format!("{name} session {i}: garbler input reached the evaluator"),
            )?;
            sessions += 1;
        }
        let bits = spec.encode_inputs(&spec.sample_inputs(&mut rng)).map_err(|e| e.to_string())?;
        let mut declared = vec![Some(Engine::YaoSemiHonest); spec.num_parties()];
        declared[spec.num_parties() - 1] = None;
        let mut ledger = Ledger::new();
        let err = run_private_contract(&spec.circuit, &bits, &EngineChoice { declared }, &Clearance::waived(), &RunConfig::new(seed(99)), &mut ledger)
            .err()
            .ok_or(format!("{name}: engine disagreement was not detected"))?;
        ensure(matches!(err.error, MpcError::EngineDisagreement(_)), format!("{name}: {err}"))?;
        ensure(err.transcript.is_empty() && ledger.height() == 0, format!("{name}: messages sent despite disagreement"))?;
    }
    Ok(format!("{sessions} sessions match the oracle, no canary at the evaluator, disagreement sends 0 messages"))
}

fn criterion_6() -> Check {
    let specs: Vec<ContractSpec> = contracts::TABLE1.iter().map(|n| contracts::build(n)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for case in 0..100u64 {
        let spec = &specs[case as usize % specs.len()];
        let inputs = spec.sample_inputs(&mut rng);
        let bits = spec.encode_inputs(&inputs).map_err(|e| e.to_string())?;
        let kind = if case % 2 == 0 { NikeKind::Dealer } else { NikeKind::Group };
        let mut d = Deployment::new(kind, bits.len(), seed(1000 + case)).map_err(|e| e.to_string())?;
        for (j, b) in bits.iter().enumerate() {
            d.send_private_parameters(j + 1, b, case * 100 + j as u64).map_err(|e| e.to_string())?;
        }
        let r = d.seccomp(&spec.circuit, 1, case).map_err(|e| format!("{}: {e}", spec.name))?;
        let got = spec.decode_outputs(&r.output);
        let want = spec.oracle(&inputs).map_err(|e| e.to_string())?;
        ensure(spec.outputs_agree(&got, &want), format!("{} case {case}: {got:?} vs oracle {want:?}", spec.name))?;
        ensure(r.transcript.count_from_role(Role::ContractParty) == 0, format!("case {case}: a contract party sent during seccomp"))?;
    }

    // Reuse: two parties upload once and serve two different circuits.
    let cf = &specs[contracts::TABLE1.iter().position(|n| *n == "crowdfund").unwrap()];
    let mil = &specs[0];
    let mut d = Deployment::new(NikeKind::Group, 2, seed(7)).map_err(|e| e.to_string())?;
    let inputs = [vec![contracts::Value::Int(600)], vec![contracts::Value::Int(500)]];
    let cf2 = contracts::build_with_parties("crowdfund", Some(2)).map_err(|e| e.to_string())?;
    for (j, b) in cf2.encode_inputs(&inputs).map_err(|e| e.to_string())?.iter().enumerate() {
        d.send_private_parameters(j + 1, b, j as u64).map_err(|e| e.to_string())?;
    }
    let stored = d.store.clone();
    let a = d.seccomp(&cf2.circuit, 1, 10).map_err(|e| e.to_string())?;
    let b = d.seccomp(&mil.circuit, 2, 11).map_err(|e| e.to_string())?;
    ensure(cf2.decode_outputs(&a.output) == vec![contracts::Value::Int(1100)], "crowdfund over stored encodings")?;
    ensure(mil.decode_outputs(&b.output) == vec![contracts::Value::Int(0)], "millionaire over stored encodings")?;
    ensure(d.uploads() == 2 && d.store == stored, "second seccomp re-uploaded")?;
    ensure(b.transcript.count_from_role(Role::ContractParty) == 0, "contract party sent during the second seccomp")?;
    let _ = cf;

    let c = random_circuit(&mut rng, &[64, 64], 50, 4);
    let inputs = [random_bits(&mut rng, 64), random_bits(&mut rng, 64)];
    let mut wires = 0;
    while wires < 10_000 {
        let keys: BTreeMap<usize, [u8; 32]> = (1..=2).map(|j| (j, rng.gen())).collect();
        let nonces: Vec<[u8; 16]> = (0..2).map(|_| rng.gen()).collect();
        let (_, enc, _) = garble::garble(&c, &rng.gen());
        let segs: Vec<_> = (1..=2).map(|j| (j, nonces[j - 1], c.input_range(j - 1))).collect();
        let pivots = PivotTable::build(&keys, &segs, &enc, &mut rng).map_err(|e| e.to_string())?;
        for j in 1..=2usize {
            let rec = EncodedInput::new(&keys[&j], j, &inputs[j - 1], nonces[j - 1]);
            for (l, &x) in rec.encodings.iter().enumerate() {
                ensure(pivots.openable(j, l, x) == 1, format!("party {j} wire {l}: not exactly one entry opens"))?;
                let label = pivots.open(j, l, x).map_err(|e| e.to_string())?;
                ensure(label == enc.label(c.input_range(j - 1).start + l, inputs[j - 1][l]), "pivot opened the wrong label")?;
                wires += 1;
            }
        }
    }
    Ok(format!("100 seccomp cases match, 0 party messages, reuse without re-upload, {wires} wires open exactly one entry"))
}

fn criterion_7() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut bits = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..6);
        let s = bdoz_authenticate(rng.gen(), n, &mut rng);
        for b in &s.shares {
            for j in 0..n {
                if let (Some(m), Some(k)) = (b.macs[j], b.keys[j]) {
                    ensure(m == if b.x { k ^ s.deltas[j] } else { k }, "M != K xor x*Delta")?;
                }
            }
        }
        bits += 1;
    }
    let mut detected = 0;
    for t in 0..1000 {
        let n = rng.gen_range(2..6);
        let mut s = bdoz_authenticate(rng.gen(), n, &mut rng);
        let i = rng.gen_range(0..n);
        if t % 2 == 0 {
            s.shares[i].x ^= true;
        } else {
            let j = (i + rng.gen_range(1..n)) % n;
            let m = s.shares[i].macs[j].expect("mac");
            s.shares[i].macs[j] = Some(m ^ Block(1u128 << rng.gen_range(0..128)));
        }
        detected += (bdoz_open(&s) == Err(PreprocError::MacFailure)) as u32;
    }
    ensure(detected == 1000, format!("BDOZ tamper detected {detected}/1000"))?;

    let mut caught = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(2..5);
        let key = SpdzKey::random(n, &mut rng);
        let x = Fp::random(&mut rng);
        let mut s = spdz_share(x, &key, &mut rng);
        ensure(spdz_open_check(&s, &key) == Ok(x), "SPDZ open does not reconstruct")?;
        let i = rng.gen_range(0..n);
        s.shares[i] = s.shares[i] + Fp::ONE;
        caught += (spdz_open_check(&s, &key) == Err(PreprocError::MacFailure)) as u32;
    }
    ensure(caught == 10_000, format!("SPDZ +1 tamper detected {caught}/10000"))?;

    let mut preserved = 0;
    for t in 0..1000u64 {
        let n_e: usize = rng.gen_range(1..=8);
        let n_o: usize = rng.gen_range(1..=4);
        let l = rng.gen_range(n_e.div_ceil(n_o)..=n_e);
        let cover = assign_cover(n_e, n_o, l, t).map_err(|e| e.to_string())?;
        let (o_key, e_key) = (SpdzKey::random(n_o, &mut rng), SpdzKey::random(n_e, &mut rng));
        let x = Fp::random(&mut rng);
        let moved = reshare(&spdz_share(x, &o_key, &mut rng), &cover, &e_key, &mut rng).map_err(|e| e.to_string())?;
        preserved += (spdz_open_check(&moved, &e_key) == Ok(x)) as u32;
    }
    ensure(preserved == 1000, format!("reshare preserved {preserved}/1000"))?;
    Ok(format!("MAC identity on {bits} sharings, BDOZ 1000/1000, SPDZ 10000/10000 at p = 2^61-1, reshare 1000/1000"))
}

fn criterion_8() -> Check {
    let author = SigningIdentity::from_seed("author", 8);
    let account = parse_program(annotated_source("account").unwrap()).map_err(|e| e.to_string())?;
    let r = check_program_level2(&account, 1000, 8);
    ensure(r.pass, format!("Account level 2: {:?}", r.counterexample))?;
    ensure(r.samples.iter().all(|s| s.satisfied >= 1000), "fewer than 1000 samples satisfied a precondition")?;

    let study = ContractPackage::build(annotated_source("crowdfund_case_study").unwrap(), Digest::default(), 2, &author)
        .map_err(|e| e.to_string())?;
    let v = verify_standard(&study, &SecurityProfile::permissive());
    let cx = v.counterexample.clone().ok_or("crowdfund: no counterexample")?;
    ensure(!v.ok && cx.tag == "crowdfund:ensures", format!("crowdfund counterexample {cx}"))?;

    let pkg = ContractPackage::build(annotated_source("account").unwrap(), Digest::default(), 4, &author).map_err(|e| e.to_string())?;
    ensure(check_certificate(&pkg), "honest certificate rejected")?;
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..100 {
        let mut bytes = pkg.source.clone().into_bytes();
        let i = rng.gen_range(0..bytes.len());
        let old = bytes[i];
        while bytes[i] == old {
            bytes[i] = rng.gen_range(0x20u8..0x7f);
        }
        let mutated = ContractPackage { source: String::from_utf8(bytes).unwrap(), ..pkg.clone() };
        ensure(!check_certificate(&mutated), format!("certificate survived a mutation at byte {i}"))?;
    }

    let t1 = SigningIdentity::from_seed("T1", 81);
    let trust = TrustStore::default().with(&t1);
    let policy = SecurityProfile { mandatory_signers: ["T1".to_string()].into(), ..SecurityProfile::default() };
    let gyges = verify_extended(&pkg, &policy, &trust);
    ensure(!gyges.ok && gyges.has("missing-trusted-signature"), "package without T1 accepted")?;
    let mut signed = pkg.clone();
    signed.sign(&t1);
    ensure(verify_extended(&signed, &policy, &trust).ok, "package signed by T1 rejected")?;
    Ok(format!("Account level 2 passes, crowdfund counterexample {cx}, 100/100 mutations rejected, unsigned package rejected"))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let (mut parity, mut discount) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (s0, x) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let (r, rf, sigma, t) = (rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1), rng.gen_range(0.01..1.0), rng.gen_range(0.1..5.0));
        let c = finance::garman_kohlhagen(s0, x, r, rf, sigma, t, OptionKind::Call);
        let p = finance::garman_kohlhagen(s0, x, r, rf, sigma, t, OptionKind::Put);
        parity = parity.max((c - p - (s0 * (-rf * t).exp() - x * (-r * t).exp())).abs());
    }
    for _ in 0..100 {
        let (y, s, t) = (rng.gen_range(0.0..0.2), rng.gen_range(0.0..1.0), rng.gen_range(0.0..5.0));
        discount = discount.max((finance::secrecy_discount(y, s, t) - finance::margrabe(1.0, 1.0, y, y, s, 0.0, 0.0, t)).abs());
    }
    ensure(parity <= 1e-9, format!("put-call parity error {parity:e}"))?;
    ensure(discount <= 1e-9, format!("discount vs Margrabe error {discount:e}"))?;
    Ok(format!("parity max error {parity:.1e}, discount max error {discount:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Check); 9] = [
        ("gas arithmetic", Duration::from_millis(1), criterion_1),
        ("PCC estimators", Duration::from_millis(1), criterion_2),
        ("cover probability", Duration::from_secs(60), criterion_3),
        ("gate counts and oracles", Duration::from_secs(300), criterion_4),
        ("two-party protocol", Duration::from_secs(300), criterion_5),
        ("outsourced protocol", Duration::from_secs(300), criterion_6),
        ("share algebra", Duration::from_secs(60), criterion_7),
        ("verification pipeline", Duration::from_secs(60), criterion_8),
        ("financial identities", Duration::from_secs(1), criterion_9),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let result = result.and_then(|s| {
            if took <= *limit {
                Ok(s)
            } else {
                Err(format!("{s}; took {took:.2?}, limit {limit:?}"))
            }
        });
        match result {
            Ok(s) => println!("PASS {n} {name} ({took:.2?}): {s}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {n} {name} ({took:.2?}): {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
