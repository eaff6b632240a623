//! OpenQASM 3 export and a reader for the subset the exporter emits.

use std::fmt::Write as _;

use super::{Control, Gate, LeveledCircuit, Polarity, Version};
use crate::error::{Error, Result};

/// Rewrites every negative control as an X-conjugated positive control.
pub fn lower_negative_controls(circuit: &LeveledCircuit) -> LeveledCircuit {
    let levels = circuit
        .levels()
        .iter()
        .map(|level| {
            let mut out = Vec::with_capacity(level.len());
            for gate in level {
                let negated: Vec<usize> = gate
                    .controls()
                    .iter()
                    .filter(|c| c.polarity == Polarity::Negative)
                    .map(|c| c.qubit)
                    .collect();
                if negated.is_empty() {
                    out.push(gate.clone());
                    continue;
                }
                out.extend(negated.iter().map(|&q| Gate::Not { target: q }));
                let controls = gate
                    .controls()
                    .iter()
                    .map(|c| Control::positive(c.qubit))
                    .collect();
                out.push(Gate::mcx(controls, gate.target()));
                out.extend(negated.iter().map(|&q| Gate::Not { target: q }));
            }
            out
        })
        .collect();
    LeveledCircuit::new(
        circuit.n_qubits(),
        circuit.power(),
        circuit.trnc_lv(),
        circuit.version(),
        levels,
    )
    .expect("lowering keeps qubit indices")
}

fn version_name(v: Version) -> &'static str {
    match v {
        Version::Concatenated => "concatenated",
        Version::PerPower => "per_power",
        Version::Truncated => "truncated",
    }
}

/// OpenQASM 3 text with negative controls lowered and one `barrier` between
/// consecutive levels.
pub fn to_qasm3(circuit: &LeveledCircuit) -> String {
    let lowered = lower_negative_controls(circuit);
    let mut out = String::new();
    out.push_str("OPENQASM 3.0;\n");
    out.push_str("include \"stdgates.inc\";\n");
    let _ = writeln!(
        out,
        "// power={} trnc_lv={} version={}",
        circuit.power(),
        circuit.trnc_lv(),
        version_name(circuit.version())
    );
    let _ = writeln!(out, "qubit[{}] q;", circuit.n_qubits());
    for (x, level) in lowered.levels().iter().enumerate() {
        if x > 0 {
            out.push_str("barrier q;\n");
        }
        for gate in level {
            let controls: Vec<String> =
                gate.controls().iter().map(|c| format!("q[{}]", c.qubit)).collect();
            let target = gate.target();
            match controls.len() {
                0 => {
                    let _ = writeln!(out, "x q[{target}];");
                }
                1 => {
                    let _ = writeln!(out, "cx {}, q[{target}];", controls[0]);
                }
                k => {
                    let _ = writeln!(out, "ctrl({k}) @ x {}, q[{target}];", controls.join(", "));
                }
            }
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::QasmParse {
        line,
        msg: msg.into(),
    }
}

fn parse_qubit(tok: &str, n_qubits: usize, line: usize) -> Result<usize> {
    let inner = tok
        .trim()
        .strip_prefix("q[")
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| parse_err(line, format!("expected q[<index>], got `{tok}`")))?;
    let q: usize = inner
        .parse()
        .map_err(|_| parse_err(line, format!("bad qubit index `{inner}`")))?;
    if q >= n_qubits {
        return Err(parse_err(line, format!("qubit {q} out of range")));
    }
    Ok(q)
}

fn parse_metadata(comment: &str) -> Option<(u64, usize, Version)> {
    let mut power = None;
    let mut trnc = None;
    let mut version = None;
    for field in comment.split_whitespace() {
        match field.split_once('=')? {
            ("power", v) => power = v.parse().ok(),
            ("trnc_lv", v) => trnc = v.parse().ok(),
            ("version", "concatenated") => version = Some(Version::Concatenated),
            ("version", "per_power") => version = Some(Version::PerPower),
            ("version", "truncated") => version = Some(Version::Truncated),
            _ => return None,
        }
    }
    Some((power?, trnc?, version?))
}

/// Reads the OpenQASM 3 subset produced by [`to_qasm3`]: `x`, `cx`, `ccx`,
/// `ctrl(k) @ x`, and `barrier q;` as the level delimiter. All controls in the
/// result are positive.
pub fn parse_qasm3(text: &str) -> Result<LeveledCircuit> {
    let mut n_qubits: Option<usize> = None;
    let mut header_seen = false;
    let mut meta = None;
    let mut levels: Vec<Vec<Gate>> = vec![Vec::new()];

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix("//") {
            if meta.is_none() {
                meta = parse_metadata(comment.trim());
            }
            continue;
        }
        let stmt = trimmed
            .strip_suffix(';')
            .ok_or_else(|| parse_err(line, "missing `;`"))?
            .trim();
        if !header_seen {
            match stmt {
                "OPENQASM 3.0" | "OPENQASM 3" => {
                    header_seen = true;
                    continue;
                }
                _ => return Err(parse_err(line, "expected `OPENQASM 3.0;` header")),
            }
        }
        if stmt == "include \"stdgates.inc\"" {
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("qubit[") {
            if n_qubits.is_some() {
                return Err(parse_err(line, "register declared twice"));
            }
            let (size, name) = rest
                .split_once(']')
                .ok_or_else(|| parse_err(line, "malformed qubit declaration"))?;
            if name.trim() != "q" {
                return Err(parse_err(line, "register must be named `q`"));
            }
            n_qubits = Some(
                size.parse()
                    .map_err(|_| parse_err(line, format!("bad register size `{size}`")))?,
            );
            continue;
        }
        let n = n_qubits.ok_or_else(|| parse_err(line, "gate before qubit declaration"))?;
        if stmt == "barrier q" {
            levels.push(Vec::new());
            continue;
        }
        let (expected_controls, operands) = if let Some(rest) = stmt.strip_prefix("x ") {
            (0, rest)
        } else if let Some(rest) = stmt.strip_prefix("cx ") {
            (1, rest)
        } else if let Some(rest) = stmt.strip_prefix("ccx ") {
            (2, rest)
        } else if let Some(rest) = stmt.strip_prefix("ctrl(") {
            let (k, tail) = rest
                .split_once(')')
                .ok_or_else(|| parse_err(line, "unterminated ctrl modifier"))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad control count `{k}`")))?;
            let operands = tail
                .trim_start()
                .strip_prefix("@")
                .map(str::trim_start)
                .and_then(|t| t.strip_prefix("x "))
                .ok_or_else(|| parse_err(line, "expected `@ x` after ctrl modifier"))?;
            (k, operands)
        } else {
            return Err(parse_err(line, format!("unsupported statement `{stmt}`")));
        };
        let qubits = operands
            .split(',')
            .map(|t| parse_qubit(t, n, line))
            .collect::<Result<Vec<_>>>()?;
        if qubits.len() != expected_controls + 1 {
            return Err(parse_err(
                line,
                format!("expected {} operands, got {}", expected_controls + 1, qubits.len()),
            ));
        }
        let (target, controls) = qubits.split_last().expect("nonempty");
        let gate = Gate::mcx(controls.iter().map(|&q| Control::positive(q)).collect(), *target);
        gate.validate(n).map_err(|e| parse_err(line, e.to_string()))?;
        levels.last_mut().expect("at least one level").push(gate);
    }

    let n = n_qubits.ok_or_else(|| parse_err(0, "no qubit register declared"))?;
    let (power, trnc_lv, version) = meta.unwrap_or((1, 0, Version::PerPower));
    LeveledCircuit::new(n, power, trnc_lv, version, levels)
}
