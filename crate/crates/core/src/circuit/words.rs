//! Integer word gadgets over [`Word`]s (little-endian bit vectors).
//!
//! Arithmetic wraps modulo 2^width unless a function says otherwise.

use super::builder::{Bit, CircuitBuilder, Word};

pub fn constant(value: u128, width: usize) -> Word {
    (0..width).map(|i| Bit::Const(i < 128 && (value >> i) & 1 == 1)).collect()
}

pub fn constant_signed(value: i128, width: usize) -> Word {
    constant(value as u128, width)
}

pub fn zero_extend(a: &[Bit], width: usize) -> Word {
    let mut w = a.to_vec();
    w.resize(width, Bit::ZERO);
    w.truncate(width);
    w
}

pub fn sign_extend(a: &[Bit], width: usize) -> Word {
    let msb = *a.last().unwrap_or(&Bit::ZERO);
    let mut w = a.to_vec();
    w.resize(width, msb);
    w.truncate(width);
    w
}

/// Ripple-carry addition with carry in; returns the sum and carry out.
pub fn add_with_carry(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit], cin: Bit) -> (Word, Bit) {
    assert_eq!(x.len(), y.len());
    if cin == Bit::ZERO && y.iter().all(|&v| v == Bit::ZERO) {
        return (x.to_vec(), Bit::ZERO);
    }
    let mut c = cin;
    let mut out = Vec::with_capacity(x.len());
    for (&xi, &yi) in x.iter().zip(y) {
        let t = b.xor(xi, yi);
        out.push(b.xor(t, c));
        c = b.maj(xi, yi, c);
    }
    (out, c)
}

pub fn add(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    add_with_carry(b, x, y, Bit::ZERO).0
}

/// `x - y` and the borrow out (set iff x < y unsigned).
pub fn sub_with_borrow(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> (Word, Bit) {
    if y.iter().all(|&v| v == Bit::ZERO) {
        return (x.to_vec(), Bit::ZERO);
    }
    let ny: Word = y.iter().map(|&v| b.not(v)).collect();
    let (d, carry) = add_with_carry(b, x, &ny, Bit::ONE);
    let borrow = b.not(carry);
    (d, borrow)
}

pub fn sub(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    sub_with_borrow(b, x, y).0
}

pub fn neg(b: &mut CircuitBuilder, x: &[Bit]) -> Word {
    let z = constant(0, x.len());
    sub(b, &z, x)
}

/// Unsigned `x < y`, one AND per bit.
pub fn lt_unsigned(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    assert_eq!(x.len(), y.len());
    let mut borrow = Bit::ZERO;
    for (&xi, &yi) in x.iter().zip(y) {
        let nx = b.not(xi);
        borrow = b.maj(nx, yi, borrow);
    }
    borrow
}

pub fn gt_unsigned(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    lt_unsigned(b, y, x)
}

pub fn ge_unsigned(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    let lt = lt_unsigned(b, x, y);
    b.not(lt)
}

fn flip_msb(b: &mut CircuitBuilder, x: &[Bit]) -> Word {
    let mut w = x.to_vec();
    if let Some(m) = w.last_mut() {
        *m = b.not(*m);
    }
    w
}

pub fn lt_signed(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    let fx = flip_msb(b, x);
    let fy = flip_msb(b, y);
    lt_unsigned(b, &fx, &fy)
}

pub fn gt_signed(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    lt_signed(b, y, x)
}

pub fn ge_signed(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    let lt = lt_signed(b, x, y);
    b.not(lt)
}

pub fn eq(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Bit {
    assert_eq!(x.len(), y.len());
    let mut acc = Bit::ONE;
    for (&xi, &yi) in x.iter().zip(y) {
        let d = b.xor(xi, yi);
        let s = b.not(d);
        acc = b.and(acc, s);
    }
    acc
}

pub fn is_zero(b: &mut CircuitBuilder, x: &[Bit]) -> Bit {
    let z = constant(0, x.len());
    eq(b, x, &z)
}

/// `sel ? t : f` per bit.
pub fn mux(b: &mut CircuitBuilder, sel: Bit, f: &[Bit], t: &[Bit]) -> Word {
    assert_eq!(f.len(), t.len());
    f.iter().zip(t).map(|(&fi, &ti)| b.mux(sel, fi, ti)).collect()
}

pub fn and_bit(b: &mut CircuitBuilder, x: &[Bit], s: Bit) -> Word {
    x.iter().map(|&v| b.and(v, s)).collect()
}

/// Negates `x` when `s` is set (`(x ^ s) + s`).
pub fn cond_neg(b: &mut CircuitBuilder, x: &[Bit], s: Bit) -> Word {
    let flipped: Word = x.iter().map(|&v| b.xor(v, s)).collect();
    let z = constant(0, x.len());
    add_with_carry(b, &flipped, &z, s).0
}

/// Magnitude and sign of a two's-complement word. The magnitude is returned
/// unsigned at the same width, so the most negative value maps to 2^(w-1).
pub fn abs_signed(b: &mut CircuitBuilder, x: &[Bit]) -> (Word, Bit) {
    let s = *x.last().expect("non-empty word");
    (cond_neg(b, x, s), s)
}

/// Unsigned product truncated to `out_width` bits.
pub fn mul_unsigned(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit], out_width: usize) -> Word {
    let mut acc = constant(0, out_width);
    for (i, &yi) in y.iter().enumerate() {
        if i >= out_width {
            break;
        }
        let span = out_width - i;
        let pp: Word = (0..span).map(|j| if j < x.len() { b.and(x[j], yi) } else { Bit::ZERO }).collect();
        let hi = add(b, &acc[i..], &pp);
        acc.splice(i.., hi);
    }
    acc
}

/// Wrapping product at the operand width (identical for signed and unsigned).
pub fn mul(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    mul_unsigned(b, x, y, x.len())
}

/// Full-width signed product of two `w`-bit operands (`2w` bits).
pub fn mul_signed_wide(b: &mut CircuitBuilder, x: &[Bit], y: &[Bit]) -> Word {
    let w = x.len() + y.len();
    let xe = sign_extend(x, w);
    let ye = sign_extend(y, w);
    mul_unsigned(b, &xe, &ye, w)
}

pub fn shl_const(x: &[Bit], k: usize) -> Word {
    let n = x.len();
    (0..n).map(|i| if i >= k { x[i - k] } else { Bit::ZERO }).collect()
}

pub fn shr_const(x: &[Bit], k: usize) -> Word {
    let n = x.len();
    (0..n).map(|i| if i + k < n { x[i + k] } else { Bit::ZERO }).collect()
}

pub fn sar_const(x: &[Bit], k: usize) -> Word {
    let n = x.len();
    let msb = x[n - 1];
    (0..n).map(|i| if i + k < n { x[i + k] } else { msb }).collect()
}

/// Logical right shift by a variable amount (little-endian amount bits).
/// Amounts beyond the width yield zero.
pub fn shr_var(b: &mut CircuitBuilder, x: &[Bit], amount: &[Bit]) -> Word {
    let mut cur = x.to_vec();
    for (k, &s) in amount.iter().enumerate() {
        let shifted = if k < usize::BITS as usize - 1 && (1usize << k) < x.len() {
            shr_const(&cur, 1 << k)
        } else {
            constant(0, x.len())
        };
        cur = mux(b, s, &cur, &shifted);
    }
    cur
}

pub fn shl_var(b: &mut CircuitBuilder, x: &[Bit], amount: &[Bit]) -> Word {
    let mut cur = x.to_vec();
    for (k, &s) in amount.iter().enumerate() {
        let shifted = if k < usize::BITS as usize - 1 && (1usize << k) < x.len() {
            shl_const(&cur, 1 << k)
        } else {
            constant(0, x.len())
        };
        cur = mux(b, s, &cur, &shifted);
    }
    cur
}

/// Left-normalizes `x`: returns `(x << z, z)` where `z` is the count of
/// leading zeros. For `x = 0` the word stays zero and `z` is all ones in its
/// `ceil(log2(width))`-bit field. Width must be a power of two.
pub fn normalize(b: &mut CircuitBuilder, x: &[Bit]) -> (Word, Word) {
    let n = x.len();
    assert!(n.is_power_of_two(), "normalize needs a power-of-two width");
    let levels = n.trailing_zeros() as usize;
    let mut cur = x.to_vec();
    let mut z = vec![Bit::ZERO; levels];
    for k in (0..levels).rev() {
        let s = 1usize << k;
        let top_zero = is_zero(b, &cur[n - s..]);
        let shifted = shl_const(&cur, s);
        cur = mux(b, top_zero, &cur, &shifted);
        z[k] = top_zero;
    }
    (cur, z)
}

/// Restoring unsigned division. Returns the quotient (numerator width) and the
/// remainder (denominator width). Division by zero yields an all-ones quotient.
pub fn udiv(b: &mut CircuitBuilder, num: &[Bit], den: &[Bit]) -> (Word, Word) {
    let m = den.len();
    let den_ext = zero_extend(den, m + 1);
    let mut rem = constant(0, m + 1);
    let mut q = vec![Bit::ZERO; num.len()];
    for i in (0..num.len()).rev() {
        let mut shifted = vec![num[i]];
        shifted.extend_from_slice(&rem[..m]);
        let (trial, borrow) = sub_with_borrow(b, &shifted, &den_ext);
        let ok = b.not(borrow);
        rem = mux(b, ok, &shifted, &trial);
        q[i] = ok;
    }
    rem.truncate(m);
    (q, rem)
}

/// Floor square root of an unsigned `2k`-bit word, `k` bits out.
pub fn isqrt(b: &mut CircuitBuilder, x: &[Bit]) -> Word {
    assert!(x.len().is_multiple_of(2), "isqrt needs an even width");
    let k = x.len() / 2;
    // Remainder width k + 2 suffices for the digit-by-digit method.
    let rw = k + 2;
    let mut rem = constant(0, rw);
    let mut root: Word = Vec::new(); // most significant first while building
    for i in (0..k).rev() {
        // rem = (rem << 2) | next two bits
        let mut r = vec![x[2 * i], x[2 * i + 1]];
        r.extend_from_slice(&rem[..rw - 2]);
        // trial = (root << 2) | 1
        let mut trial = vec![Bit::ONE, Bit::ZERO];
        trial.extend(root.iter().rev().copied());
        let trial = zero_extend(&trial, rw);
        let (d, borrow) = sub_with_borrow(b, &r, &trial);
        let ok = b.not(borrow);
        rem = mux(b, ok, &r, &d);
        root.push(ok);
    }
    root.reverse();
    root
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{bits_to_int, bits_to_uint, int_to_bits, Circuit};

    fn binop(w: usize, f: impl Fn(&mut CircuitBuilder, &[Bit], &[Bit]) -> Word) -> Circuit {
        let mut b = CircuitBuilder::new();
        let x = b.input(w);
        let y = b.input(w);
        let r = f(&mut b, &x, &y);
        b.output(&r);
        b.finish()
    }

    fn run(c: &Circuit, xs: &[(i128, usize)]) -> Vec<bool> {
        let ins: Vec<Vec<bool>> = xs.iter().map(|&(v, w)| int_to_bits(v, w)).collect();
        c.eval_plaintext(&ins).unwrap()
    }

    #[test]
    fn exhaustive_6bit_ops() {
        let w = 6;
        let m = 1u128 << w;
        let add_c = binop(w, add);
        let sub_c = binop(w, sub);
        let mul_c = binop(w, mul);
        let lts = binop(w, |b, x, y| vec![lt_signed(b, x, y)]);
        let div_c = binop(w, |b, x, y| {
            let (q, r) = udiv(b, x, y);
            [q, r].concat()
        });
        for x in 0..m {
            for y in 0..m {
                let i = [(x as i128, w), (y as i128, w)];
                assert_eq!(bits_to_uint(&run(&add_c, &i)), (x + y) % m);
                assert_eq!(bits_to_uint(&run(&sub_c, &i)), (x + m - y) % m);
                assert_eq!(bits_to_uint(&run(&mul_c, &i)), (x * y) % m);
                let sx = bits_to_int(&int_to_bits(x as i128, w));
                let sy = bits_to_int(&int_to_bits(y as i128, w));
                assert_eq!(run(&lts, &i), vec![sx < sy]);
                if y != 0 {
                    let out = run(&div_c, &i);
                    assert_eq!(bits_to_uint(&out[..w]), x / y, "{x}/{y}");
                    assert_eq!(bits_to_uint(&out[w..]), x % y);
                }
            }
        }
    }

    #[test]
    fn isqrt_exhaustive_10bit() {
        let mut b = CircuitBuilder::new();
        let x = b.input(10);
        let r = isqrt(&mut b, &x);
        b.output(&r);
        let c = b.finish();
        for v in 0..1024u128 {
            let out = c.eval_plaintext(&[int_to_bits(v as i128, 10)]).unwrap();
            assert_eq!(bits_to_uint(&out), (v as f64).sqrt().floor() as u128);
        }
    }

    #[test]
    fn normalize_and_shifts() {
        let mut b = CircuitBuilder::new();
        let x = b.input(8);
        let s = b.input(3);
        let (n, z) = normalize(&mut b, &x);
        let r = shr_var(&mut b, &x, &s);
        let l = shl_var(&mut b, &x, &s);
        b.output(&n);
        b.output(&z);
        b.output(&r);
        b.output(&l);
        let c = b.finish();
        for v in 1..256u32 {
            for sh in 0..8u32 {
                let out = c.eval_plaintext(&[int_to_bits(v as i128, 8), int_to_bits(sh as i128, 3)]).unwrap();
                let lz = (v as u8).leading_zeros();
                assert_eq!(bits_to_uint(&out[..8]) as u32, (v << lz) & 0xff);
                assert_eq!(bits_to_uint(&out[8..11]) as u32, lz);
                assert_eq!(bits_to_uint(&out[11..19]) as u32, v >> sh);
                assert_eq!(bits_to_uint(&out[19..27]) as u32, (v << sh) & 0xff);
            }
        }
    }
}
