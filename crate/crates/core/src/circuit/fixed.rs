//! Signed fixed-point values and their circuit gadgets.
//!
//! A value in format `Q{I}.{F}` is a `W = I + F` bit two's-complement integer
//! `raw` meaning `raw / 2^F`. Elementary functions reduce their argument, run a
//! degree-6 polynomial in an internal 30-fraction-bit format, and convert back.

use serde::{Deserialize, Serialize};

use super::builder::{Bit, CircuitBuilder, Word};
use super::words::{self, constant, sar_const, sign_extend, zero_extend};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedFormat {
    pub int_bits: u32,
    pub frac_bits: u32,
}

pub const Q16_16: FixedFormat = FixedFormat { int_bits: 16, frac_bits: 16 };

impl FixedFormat {
    pub const fn width(self) -> usize {
        (self.int_bits + self.frac_bits) as usize
    }

    pub fn max_raw(self) -> i64 {
        (1i64 << (self.width() - 1)) - 1
    }

    pub fn min_raw(self) -> i64 {
        -(1i64 << (self.width() - 1))
    }

    pub fn scale(self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// Smallest representable step.
    pub fn ulp(self) -> f64 {
        1.0 / self.scale()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 / self.scale()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub raw: i64,
    pub format: FixedFormat,
}

impl FixedPoint {
    /// Nearest representable value, saturating at the format's range.
    pub fn from_f64(x: f64, format: FixedFormat) -> Self {
        let r = (x * format.scale()).round();
        let raw = if r.is_nan() {
            0
        } else {
            r.clamp(format.min_raw() as f64, format.max_raw() as f64) as i64
        };
        FixedPoint { raw, format }
    }

    pub fn from_raw(raw: i64, format: FixedFormat) -> Self {
        FixedPoint { raw, format }
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / self.format.scale()
    }

    pub fn to_bits(self) -> Vec<bool> {
        super::int_to_bits(self.raw as i128, self.format.width())
    }

    pub fn from_bits(bits: &[bool], format: FixedFormat) -> Self {
        assert_eq!(bits.len(), format.width());
        FixedPoint { raw: super::bits_to_int(bits) as i64, format }
    }
}

/// Internal fraction bits for polynomial evaluation.
const IF: u32 = 30;

// Minimax fits (ascending powers) on t in [0, 1].
const EXP2_COEFFS: [f64; 7] = [
    1.0000000026442721,
    0.6931469245643946,
    0.24023055018754771,
    0.05548022099754252,
    0.009684976322032508,
    0.001238430349645892,
    0.00021889229029234056,
];
const LN1P_COEFFS: [f64; 7] = [
    1.2793325229874555e-06,
    0.9998615612144297,
    -0.49753486070448777,
    0.31643670157681053,
    -0.19168343414721434,
    0.08387235973426398,
    -0.017807705778902744,
];
// Abramowitz and Stegun 26.2.19.
const PHI_D: [f64; 6] = [0.0498673470, 0.0211410061, 0.0032776263, 0.0000380036, 0.0000488906, 0.0000053830];

fn q(x: f64, frac: u32) -> i128 {
    (x * (frac as f64).exp2()).round() as i128
}

/// Float model of the exp gadget's polynomial, used by tests.
pub fn exp2_poly(t: f64) -> f64 {
    EXP2_COEFFS.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

pub fn ln1p_poly(t: f64) -> f64 {
    LN1P_COEFFS.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Unsigned `x * y` into `x.len() + y.len()` bits, skipping constant-zero rows.
pub fn mul_uu(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    let n = x.len();
    let w = n + y.len();
    let mut acc = constant(0, w);
    for (i, &yi) in y.iter().enumerate() {
        if yi == Bit::ZERO {
            continue;
        }
        let pp: Word = x.iter().map(|&xj| b.and(xj, yi)).collect();
        let (sum, carry) = words::add_with_carry(b, &acc[i..i + n], &pp, Bit::ZERO);
        acc.splice(i..i + n, sum);
        // Bit i + n is still zero here: the partial sum is below 2^(i + n).
        if i + n < w {
            acc[i + n] = carry;
        }
    }
    acc
}

/// Signed `a` times unsigned `u`, `a.len() + u.len()` bits signed.
pub fn mul_su(b: &mut CircuitBuilder, a: &[Bit], u: &[Bit]) -> Word {
    let n = a.len();
    let mut p = mul_uu(b, a, u);
    let s = a[n - 1];
    let corr = words::and_bit(b, &zero_extend(u, p.len() - n), s);
    let hi = words::sub(b, &p[n..], &corr);
    p.splice(n.., hi);
    p
}

/// Signed full product, `x.len() + y.len()` bits.
pub fn mul_ss(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    let (n, m) = (x.len(), y.len());
    let mut p = mul_uu(b, x, y);
    let w = n + m;
    let sx = x[n - 1];
    let sy = y[m - 1];
    let c1 = words::and_bit(b, &zero_extend(y, w - n), sx);
    let hi = words::sub(b, &p[n..], &c1);
    p.splice(n.., hi);
    let c2 = words::and_bit(b, &zero_extend(x, w - m), sy);
    let hi = words::sub(b, &p[m..], &c2);
    p.splice(m.., hi);
    p
}

/// Clamps a signed word to `width` bits with saturation.
pub fn saturate(b: &mut CircuitBuilder, x: &[Bit], width: usize) -> Word {
    let n = x.len();
    if n <= width {
        return sign_extend(x, width);
    }
    let sign = x[n - 1];
    // Fits iff bits width-1 .. n-1 all equal the sign.
    let mut fits = Bit::ONE;
    for &xi in &x[width - 1..n - 1] {
        let d = b.xor(xi, sign);
        let e = b.not(d);
        fits = b.and(fits, e);
    }
    let max = constant(((1u128) << (width - 1)) - 1, width);
    let sat: Word = max.iter().map(|&m| b.xor(m, sign)).collect();
    words::mux(b, fits, &sat, &x[..width])
}

/// Saturating product, truncated toward negative infinity.
pub fn fixed_mul(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit], fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as usize;
    let p = mul_ss(b, x, y);
    saturate(b, &p[f..], w)
}

/// Product with a compile-time constant, saturating.
pub fn fixed_mul_const(b: &mut CircuitBuilder, x: &[Bit], c: f64, fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as usize;
    let craw = q(c, fmt.frac_bits);
    let cw = words::constant_signed(craw, w + 1);
    let p = mul_ss(b, x, &cw);
    saturate(b, &p[f..], w)
}

pub fn fixed_add(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    let n = x.len();
    let s = words::add(b, &sign_extend(x, n + 1), &sign_extend(y, n + 1));
    saturate(b, &s, n)
}

pub fn fixed_sub(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    let n = x.len();
    let s = words::sub(b, &sign_extend(x, n + 1), &sign_extend(y, n + 1));
    saturate(b, &s, n)
}

pub fn fixed_const(c: f64, fmt: FixedFormat) -> Word {
    let v = FixedPoint::from_f64(c, fmt);
    words::constant_signed(v.raw as i128, fmt.width())
}

/// Signed quotient, saturating on overflow and on division by zero.
pub fn fixed_div(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit], fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as usize;
    let (ax, sx) = words::abs_signed(b, x);
    let (ay, sy) = words::abs_signed(b, y);
    let mut num = constant(0, f);
    num.extend_from_slice(&ax);
    let (qt, _) = words::udiv(b, &num, &ay);
    let neg = b.xor(sx, sy);
    // Magnitude above 2^(w-1) - 1 saturates.
    let hi_zero = words::is_zero(b, &qt[w - 1..]);
    let max = constant((1u128 << (w - 1)) - 1, w);
    let mag = words::mux(b, hi_zero, &max, &qt[..w]);
    words::cond_neg(b, &mag, neg)
}

/// Square root; negative inputs give zero.
pub fn fixed_sqrt(b: &mut CircuitBuilder, x: &[Bit], fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as usize;
    let neg = x[w - 1];
    let mut v = constant(0, f);
    v.extend_from_slice(&x[..w - 1]);
    if v.len() % 2 == 1 {
        v.push(Bit::ZERO);
    }
    let r = words::isqrt(b, &v);
    let r = zero_extend(&r, w);
    let z = constant(0, w);
    words::mux(b, neg, &r, &z)
}

/// Horner evaluation with unsigned accumulator; `t` has `t_frac` fraction bits
/// and the accumulator `acc_frac`, width `acc_w`.
fn horner_unsigned(
    b: &mut CircuitBuilder,
    coeffs: &[f64],
    t: &[Bit],
    t_frac: usize,
    acc_w: usize,
    acc_frac: u32,
) -> Word {
    let top = coeffs.len() - 1;
    let mut acc = constant(q(coeffs[top], acc_frac) as u128, acc_w);
    for &c in coeffs[..top].iter().rev() {
        let p = mul_uu(b, &acc, t);
        let shifted = zero_extend(&p[t_frac..], acc_w);
        acc = words::add(b, &shifted, &constant(q(c, acc_frac) as u128, acc_w));
    }
    acc
}

fn horner_signed(
    b: &mut CircuitBuilder,
    coeffs: &[f64],
    t: &[Bit],
    t_frac: usize,
    acc_w: usize,
    acc_frac: u32,
) -> Word {
    let top = coeffs.len() - 1;
    let mut acc = words::constant_signed(q(coeffs[top], acc_frac), acc_w);
    for &c in coeffs[..top].iter().rev() {
        let p = mul_su(b, &acc, t);
        let shifted = sign_extend(&p[t_frac..], acc_w);
        acc = words::add(b, &shifted, &words::constant_signed(q(c, acc_frac), acc_w));
    }
    acc
}

/// `e^x` for widths up to 32. Saturates to the format maximum on overflow and
/// rounds down to zero on underflow.
pub fn fixed_exp(b: &mut CircuitBuilder, x: &[Bit], fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as usize;
    assert!(w <= 32 && f <= 30, "fixed_exp supports widths up to 32");
    let ifr = IF as usize;
    // y = x * log2(e) with f + 30 fraction bits; k = floor(y), frac = y - k.
    let l = constant(q(std::f64::consts::LOG2_E, IF) as u128, ifr + 1);
    let y = mul_su(b, x, &l);
    let frac = y[f..f + ifr].to_vec();
    let kw = y.len() - f - ifr + 2;
    let k = sign_extend(&y[f + ifr..], kw);
    let p = horner_unsigned(b, &EXP2_COEFFS, &frac, ifr, 32, IF);
    // raw = p * 2^(k + f - 30); p >= 1 so k >= w - 1 - f overflows.
    let lim = words::constant_signed((w - 1 - f) as i128, kw);
    let overflow = words::ge_signed(b, &k, &lim);
    let t = words::sub(b, &words::constant_signed((ifr - f) as i128, kw), &k);
    let in_range = words::is_zero(b, &t[5..]);
    let rs = words::shr_var(b, &p, &t[..5]);
    let zero = constant(0, w);
    let out = words::mux(b, in_range, &zero, &rs[..w]);
    let max = constant((1u128 << (w - 1)) - 1, w);
    words::mux(b, overflow, &out, &max)
}

/// Natural logarithm for positive inputs; non-positive inputs give the format minimum.
pub fn fixed_ln(b: &mut CircuitBuilder, x: &[Bit], fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as i128;
    let ifr = IF as usize;
    let np = w.next_power_of_two();
    let xe = zero_extend(x, np);
    let (n, z) = words::normalize(b, &xe);
    // x = (n / 2^(np-1)) * 2^(np-1-z-f); t = n / 2^(np-1) - 1.
    let mut t: Word = n[..np - 1].to_vec();
    // Align t to 30 fraction bits.
    if t.len() > ifr {
        t = t[t.len() - ifr..].to_vec();
    } else {
        let mut pad = constant(0, ifr - t.len());
        pad.extend_from_slice(&t);
        t = pad;
    }
    let acc_w = ifr + 2;
    let poly = horner_signed(b, &LN1P_COEFFS, &t, ifr, acc_w, IF);
    // e = (np - 1 - f) - z, small signed.
    let ew = 8;
    let e0 = words::constant_signed(np as i128 - 1 - f, ew);
    let e = words::sub(b, &e0, &zero_extend(&z, ew));
    let ln2 = constant(q(std::f64::consts::LN_2, IF) as u128, ifr + 1);
    let eln2 = mul_su(b, &e, &ln2);
    let sw = eln2.len() + 1;
    let total = words::add(b, &sign_extend(&eln2, sw), &sign_extend(&poly, sw));
    // Back to f fraction bits.
    let out = sar_const(&total, ifr - f as usize);
    let out = saturate(b, &out, w);
    let positive = {
        let nz = words::is_zero(b, x);
        let nn = b.not(x[w - 1]);
        let nzn = b.not(nz);
        b.and(nn, nzn)
    };
    let min = constant(1u128 << (w - 1), w);
    words::mux(b, positive, &min, &out)
}

/// Standard normal CDF. Arguments outside [-4, 4] clamp to 0 or 1.
pub fn fixed_phi(b: &mut CircuitBuilder, x: &[Bit], fmt: FixedFormat) -> Word {
    let w = fmt.width();
    let f = fmt.frac_bits as usize;
    assert!(f <= 28, "fixed_phi needs at most 28 fraction bits");
    let (ax, sx) = words::abs_signed(b, x);
    let four = constant(4u128 << f, w);
    let clamp = words::ge_unsigned(b, &ax, &four);
    // |x| in Q.28, 31 bits (|x| < 4 unless clamped).
    let mut a = constant(0, 28 - f);
    a.extend_from_slice(&ax[..f + 2]);
    let mut coeffs = vec![1.0];
    coeffs.extend_from_slice(&PHI_D);
    let p = horner_unsigned(b, &coeffs, &a, 28, 32, 28);
    // u = 1/P in Q.30; P in [1, 2) so the quotient fits 31 bits.
    let den = p[..29].to_vec();
    let rem0 = constant(1 << 27, 29);
    let num_low = constant(0, 31);
    let (u, _) = udiv_from(b, &rem0, &num_low, &den);
    let mut v = u;
    for _ in 0..4 {
        let sq = mul_uu(b, &v, &v);
        v = sq[30..61].to_vec();
    }
    // tail = u^16 / 2, in Q.30: shift by one.
    let tail = words::shr_const(&v, 1);
    let one = constant(1 << 30, 31);
    let upper = words::sub(b, &one, &tail);
    let z31 = constant(0, 31);
    let tail = words::mux(b, clamp, &tail, &z31);
    let upper = words::mux(b, clamp, &upper, &one);
    let r = words::mux(b, sx, &upper, &tail);
    let r = words::shr_const(&r, 30 - f);
    zero_extend(&r, w)
}

/// Restoring division continuing from a remainder `rem0 < den`.
fn udiv_from(b: &mut CircuitBuilder, rem0: &[Bit], num: &[Bit], den: &[Bit]) -> (Word, Word) {
    let m = den.len();
    let den_ext = zero_extend(den, m + 1);
    let mut rem = zero_extend(rem0, m + 1);
    let mut qt = vec![Bit::ZERO; num.len()];
    for i in (0..num.len()).rev() {
        let mut shifted = vec![num[i]];
        shifted.extend_from_slice(&rem[..m]);
        let (trial, borrow) = words::sub_with_borrow(b, &shifted, &den_ext);
        let ok = b.not(borrow);
        rem = words::mux(b, ok, &shifted, &trial);
        qt[i] = ok;
    }
    rem.truncate(m);
    (qt, rem)
}

/// Reference standard normal CDF in double precision.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_gadget, Circuit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fx(x: f64) -> FixedPoint {
        FixedPoint::from_f64(x, Q16_16)
    }

    /// Worst relative error of a unary gadget over `points`.
    fn worst_unary(c: &Circuit, points: &[f64], reference: impl Fn(f64) -> f64) -> (f64, f64) {
        let ins: Vec<Vec<bool>> = points.iter().map(|&x| fx(x).to_bits()).collect();
        let outs = c.eval_batch(&ins);
        let mut worst = (0.0, 0.0);
        for (&x, o) in points.iter().zip(&outs) {
            let xq = fx(x).to_f64();
            let got = FixedPoint::from_bits(o, Q16_16).to_f64();
            let want = reference(xq);
            let e = (got - want).abs() / want.abs().max(1.0);
            if e > worst.0 {
                worst = (e, xq);
            }
        }
        worst
    }

    fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    }

    #[test]
    fn encode_decode_identity() {
        for raw in [-(1i64 << 31), -1, 0, 1, 12345, (1 << 31) - 1] {
            let v = FixedPoint::from_raw(raw, Q16_16);
            assert_eq!(FixedPoint::from_f64(v.to_f64(), Q16_16), v);
            assert_eq!(FixedPoint::from_bits(&v.to_bits(), Q16_16), v);
        }
        assert_eq!(fx(1e9).raw, Q16_16.max_raw());
    }

    #[test]
    fn polynomials_fit() {
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            assert!((exp2_poly(t) - t.exp2()).abs() < 3e-9);
            assert!((ln1p_poly(t) - t.ln_1p()).abs() < 1.5e-6);
        }
    }

    #[test]
    fn elementary_functions_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases: [(&str, f64, f64, fn(f64) -> f64); 4] = [
            ("fixed_exp", -10.0, 10.0, f64::exp),
            ("fixed_ln", 0.001, 30000.0, f64::ln),
            ("fixed_sqrt", 0.0, 32767.0, f64::sqrt),
            ("fixed_phi", -6.0, 6.0, norm_cdf),
        ];
        for (name, lo, hi, f) in cases {
            let c = build_gadget(name, 32).unwrap();
            let pts = sample(&mut rng, lo, hi, 1000);
            let (e, at) = worst_unary(&c, &pts, f);
            eprintln!("{name}: worst relative error {e:.3e} at {at}");
            assert!(e <= 1e-2, "{name}: error {e} at {at}");
        }
    }

    #[test]
    fn phi_at_zero_is_half() {
        let c = build_gadget("fixed_phi", 32).unwrap();
        let out = c.eval_plaintext(&[fx(0.0).to_bits()]).unwrap();
        assert!((FixedPoint::from_bits(&out, Q16_16).to_f64() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn mul_and_div() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mul = build_gadget("fixed_mul", 32).unwrap();
        let div = build_gadget("fixed_div", 32).unwrap();
        let mut mi = Vec::new();
        let mut di = Vec::new();
        let mut pairs = Vec::new();
        for _ in 0..1000 {
            let a = fx(rng.gen_range(-150.0..150.0));
            let bm = fx(rng.gen_range(-150.0..150.0));
            let bd = fx(rng.gen_range(0.05..1000.0) * if rng.gen() { 1.0 } else { -1.0 });
            mi.push([a.to_bits(), bm.to_bits()].concat());
            di.push([a.to_bits(), bd.to_bits()].concat());
            pairs.push((a.to_f64(), bm.to_f64(), bd.to_f64()));
        }
        let mo = mul.eval_batch(&mi);
        let dout = div.eval_batch(&di);
        for (i, &(a, bm, bd)) in pairs.iter().enumerate() {
            let m = FixedPoint::from_bits(&mo[i], Q16_16).to_f64();
            assert!((m - a * bm).abs() <= 2.0 * Q16_16.ulp(), "{a}*{bm} = {m}");
            let d = FixedPoint::from_bits(&dout[i], Q16_16).to_f64();
            assert!((d - a / bd).abs() <= 2.0 * Q16_16.ulp(), "{a}/{bd} = {d}");
        }
        // Saturation.
        let big = mul.eval_plaintext(&[fx(300.0).to_bits(), fx(-300.0).to_bits()]).unwrap();
        assert_eq!(FixedPoint::from_bits(&big, Q16_16).raw, Q16_16.min_raw());
        let z = div.eval_plaintext(&[fx(3.0).to_bits(), fx(0.0).to_bits()]).unwrap();
        assert_eq!(FixedPoint::from_bits(&z, Q16_16).raw, Q16_16.max_raw());
    }

    #[test]
    fn exp_saturates_and_ln_rejects_nonpositive() {
        let e = build_gadget("fixed_exp", 32).unwrap();
        let out = e.eval_plaintext(&[fx(20.0).to_bits()]).unwrap();
        assert_eq!(FixedPoint::from_bits(&out, Q16_16).raw, Q16_16.max_raw());
        let out = e.eval_plaintext(&[fx(-30.0).to_bits()]).unwrap();
        assert_eq!(FixedPoint::from_bits(&out, Q16_16).raw, 0);
        let l = build_gadget("fixed_ln", 32).unwrap();
        for x in [0.0, -2.0] {
            let out = l.eval_plaintext(&[fx(x).to_bits()]).unwrap();
            assert_eq!(FixedPoint::from_bits(&out, Q16_16).raw, Q16_16.min_raw());
        }
    }

    #[test]
    fn gate_budget() {
        for name in ["fixed_exp", "fixed_ln", "fixed_sqrt", "fixed_phi", "fixed_mul", "fixed_div"] {
            let c = build_gadget(name, 32).unwrap();
            eprintln!("{name}: {} AND", c.gate_counts().and_count);
        }
    }
}
