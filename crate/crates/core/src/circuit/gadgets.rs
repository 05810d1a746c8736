//! Named stand-alone gadget circuits.

use std::fmt;
use std::str::FromStr;

use super::builder::CircuitBuilder;
use super::fixed::{self, Q16_16};
use super::{words, Circuit, CircuitError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GadgetKind {
    Gt,
    Ge,
    Eq,
    Add,
    Sub,
    Mul,
    Mux,
    FixedMul,
    FixedDiv,
    FixedExp,
    FixedLn,
    FixedSqrt,
    FixedPhi,
}

impl GadgetKind {
    pub const ALL: [GadgetKind; 13] = [
        GadgetKind::Gt,
        GadgetKind::Ge,
        GadgetKind::Eq,
        GadgetKind::Add,
        GadgetKind::Sub,
        GadgetKind::Mul,
        GadgetKind::Mux,
        GadgetKind::FixedMul,
        GadgetKind::FixedDiv,
        GadgetKind::FixedExp,
        GadgetKind::FixedLn,
        GadgetKind::FixedSqrt,
        GadgetKind::FixedPhi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GadgetKind::Gt => "gt",
            GadgetKind::Ge => "ge",
            GadgetKind::Eq => "eq",
            GadgetKind::Add => "add",
            GadgetKind::Sub => "sub",
            GadgetKind::Mul => "mul",
            GadgetKind::Mux => "mux",
            GadgetKind::FixedMul => "fixed_mul",
            GadgetKind::FixedDiv => "fixed_div",
            GadgetKind::FixedExp => "fixed_exp",
            GadgetKind::FixedLn => "fixed_ln",
            GadgetKind::FixedSqrt => "fixed_sqrt",
            GadgetKind::FixedPhi => "fixed_phi",
        }
    }

    pub fn is_fixed(self) -> bool {
        matches!(
            self,
            GadgetKind::FixedMul
                | GadgetKind::FixedDiv
                | GadgetKind::FixedExp
                | GadgetKind::FixedLn
                | GadgetKind::FixedSqrt
                | GadgetKind::FixedPhi
        )
    }
}

impl fmt::Display for GadgetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GadgetKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GadgetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CircuitError::UnknownGadget(s.to_string()))
    }
}

/// Builds a gadget circuit by name.
///
/// Integer gadgets take two `width`-bit operands (one input segment each) and
/// treat them as unsigned; `mux` takes segments `[1, width, width]` and returns
/// the second operand when the selector is set. Fixed-point gadgets are Q16.16
/// and only accept width 32.
pub fn build_gadget(kind: &str, width: usize) -> Result<Circuit, CircuitError> {
    let kind: GadgetKind = kind.parse()?;
    let unsupported = || CircuitError::UnsupportedWidth { kind: kind.name().to_string(), width };
    if width == 0 || width > 64 {
        return Err(unsupported());
    }
    if kind.is_fixed() && width != Q16_16.width() {
        return Err(unsupported());
    }
    let mut b = CircuitBuilder::new();
    let out = match kind {
        GadgetKind::Mux => {
            let s = b.input(1);
            let x = b.input(width);
            let y = b.input(width);
            words::mux(&mut b, s[0], &x, &y)
        }
        GadgetKind::FixedExp | GadgetKind::FixedLn | GadgetKind::FixedSqrt | GadgetKind::FixedPhi => {
            let x = b.input(width);
            match kind {
                GadgetKind::FixedExp => fixed::fixed_exp(&mut b, &x, Q16_16),
                GadgetKind::FixedLn => fixed::fixed_ln(&mut b, &x, Q16_16),
                GadgetKind::FixedSqrt => fixed::fixed_sqrt(&mut b, &x, Q16_16),
                _ => fixed::fixed_phi(&mut b, &x, Q16_16),
            }
        }
        _ => {
            let x = b.input(width);
            let y = b.input(width);
            match kind {
                GadgetKind::Gt => vec![words::gt_unsigned(&mut b, &x, &y)],
                GadgetKind::Ge => vec![words::ge_unsigned(&mut b, &x, &y)],
                GadgetKind::Eq => vec![words::eq(&mut b, &x, &y)],
                GadgetKind::Add => words::add(&mut b, &x, &y),
                GadgetKind::Sub => words::sub(&mut b, &x, &y),
                GadgetKind::Mul => words::mul(&mut b, &x, &y),
                GadgetKind::FixedMul => fixed::fixed_mul(&mut b, &x, &y, Q16_16),
                GadgetKind::FixedDiv => fixed::fixed_div(&mut b, &x, &y, Q16_16),
                _ => unreachable!(),
            }
        }
    };
    b.output(&out);
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in GadgetKind::ALL {
            assert_eq!(k.name().parse::<GadgetKind>().unwrap(), k);
        }
        assert!(matches!(build_gadget("div", 8), Err(CircuitError::UnknownGadget(_))));
        assert!(matches!(build_gadget("fixed_exp", 16), Err(CircuitError::UnsupportedWidth { .. })));
        assert!(matches!(build_gadget("add", 0), Err(CircuitError::UnsupportedWidth { .. })));
    }

    #[test]
    fn gt1_is_a_and_not_b() {
        let c = build_gadget("gt", 1).unwrap();
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            assert_eq!(c.eval_plaintext(&[vec![a], vec![b]]).unwrap(), vec![a && !b]);
        }
        assert_eq!(c.gate_counts().and_count, 1);
    }
}
