//! Bristol-fashion text format.
//!
//! ```text
//! <ngates> <nwires>
//! <nparties> <width>...
//! <noutputs> <width>...
//!
//! 2 1 <a> <b> <out> AND|XOR
//! 1 1 <a> <out> INV
//! ```

use std::fmt::Write;

use super::{Circuit, CircuitError, Gate};

pub fn emit_circuit(c: &Circuit) -> String {
    let mut s = String::new();
    let list = |v: &[usize]| v.iter().map(|w| format!(" {w}")).collect::<String>();
    let _ = writeln!(s, "{} {}", c.gates().len(), c.num_wires());
    let _ = writeln!(s, "{}{}", c.input_widths().len(), list(c.input_widths()));
    let _ = writeln!(s, "{}{}", c.output_widths().len(), list(c.output_widths()));
    s.push('\n');
    for g in c.gates() {
        let _ = match *g {
            Gate::And { a, b, out } => writeln!(s, "2 1 {a} {b} {out} AND"),
            Gate::Xor { a, b, out } => writeln!(s, "2 1 {a} {b} {out} XOR"),
            Gate::Inv { a, out } => writeln!(s, "1 1 {a} {out} INV"),
        };
    }
    s
}

fn err(line: usize, msg: impl Into<String>) -> CircuitError {
    CircuitError::Parse { line, msg: msg.into() }
}

fn nums(line: usize, toks: &[&str]) -> Result<Vec<usize>, CircuitError> {
    toks.iter()
        .map(|t| t.parse::<usize>().map_err(|_| err(line, format!("expected a number, found `{t}`"))))
        .collect()
}

fn width_list(line: usize, text: &str) -> Result<Vec<usize>, CircuitError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let v = nums(line, &toks)?;
    let (&n, rest) = v.split_first().ok_or_else(|| err(line, "empty width list"))?;
    if rest.len() != n {
        return Err(err(line, format!("declared {n} widths, found {}", rest.len())));
    }
    Ok(rest.to_vec())
}

pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (l1, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
    let h = nums(l1, &header.split_whitespace().collect::<Vec<_>>())?;
    let [ngates, nwires] = h[..] else {
        return Err(err(l1, "header must be `<ngates> <nwires>`"));
    };
    let (l2, ins) = lines.next().ok_or_else(|| err(l1 + 1, "missing input widths"))?;
    let input_widths = width_list(l2, ins)?;
    let (l3, outs) = lines.next().ok_or_else(|| err(l2 + 1, "missing output widths"))?;
    let output_widths = width_list(l3, outs)?;
    let mut gates = Vec::with_capacity(ngates);
    let mut last = l3;
    for (ln, line) in lines {
        last = ln;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (op, body) = toks.split_last().ok_or_else(|| err(ln, "empty gate"))?;
        let v = nums(ln, body)?;
        let gate = match (*op, &v[..]) {
            ("AND", [2, 1, a, b, out]) => Gate::And { a: *a, b: *b, out: *out },
            ("XOR", [2, 1, a, b, out]) => Gate::Xor { a: *a, b: *b, out: *out },
            ("INV", [1, 1, a, out]) => Gate::Inv { a: *a, out: *out },
            ("AND" | "XOR" | "INV", _) => return Err(err(ln, format!("bad operand list for {op}"))),
            _ => return Err(err(ln, format!("unknown gate `{op}`"))),
        };
        if gate.out() >= nwires {
            return Err(err(ln, format!("wire {} out of range", gate.out())));
        }
        gates.push(gate);
    }
    if gates.len() != ngates {
        return Err(err(last, format!("header declares {ngates} gates, found {}", gates.len())));
    }
    Circuit::new(nwires, gates, input_widths, output_widths).map_err(|e| err(last, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_round_trip() {
        let c = Circuit::empty();
        let t = emit_circuit(&c);
        assert_eq!(t, "0 0\n0\n0\n\n");
        assert_eq!(parse_circuit(&t).unwrap(), c);
    }

    #[test]
    fn single_and_round_trip() {
        let c = Circuit::new(3, vec![Gate::And { a: 0, b: 1, out: 2 }], vec![1, 1], vec![1]).unwrap();
        let t = emit_circuit(&c);
        assert_eq!(t.lines().filter(|l| l.ends_with("AND")).count(), 1);
        assert_eq!(parse_circuit(&t).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "1 3\n2 1 1\n1 1\n\n2 1 0 1 2 NAND\n";
        assert_eq!(parse_circuit(bad), Err(CircuitError::Parse { line: 5, msg: "unknown gate `NAND`".into() }));
        let bad = "1 3\n2 1\n1 1\n";
        assert!(matches!(parse_circuit(bad), Err(CircuitError::Parse { line: 2, .. })));
        let bad = "1 3\n2 1 1\n1 1\n2 1 0 x 2 AND\n";
        assert!(matches!(parse_circuit(bad), Err(CircuitError::Parse { line: 4, .. })));
    }
}
