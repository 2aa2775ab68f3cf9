//! Gate-program parsing: inline command-line tokens and line-oriented
//! program files. One gate per line in files; `#` starts a comment.

use anyhow::{bail, Result};
use loopsim_core::gaussian::GateSpec;

/// A word plus where it came from, for error messages.
struct Word<'a> {
    text: &'a str,
    place: String,
}

fn arity(name: &str) -> Option<usize> {
    match name {
        "squeeze" | "qpg" | "phase" => Some(1),
        "displace" => Some(2),
        _ => None,
    }
}

fn build(name: &str, args: &[f64]) -> GateSpec {
    match name {
        "squeeze" => GateSpec::Squeeze { r: args[0] },
        "qpg" => GateSpec::QuadraticPhase { kappa: args[0] },
        "phase" => GateSpec::Phase { theta_deg: args[0] },
        "displace" => GateSpec::Displace {
            dx: args[0],
            dp: args[1],
        },
        _ => unreachable!("arity() gates the names"),
    }
}

fn parse_words(words: &[Word]) -> Result<Vec<GateSpec>> {
    let mut gates = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let head = &words[i];
        let Some(n_args) = arity(head.text) else {
            bail!(
                "{}: unknown gate '{}' (expected squeeze, qpg, phase or displace)",
                head.place,
                head.text
            );
        };
        let mut args = Vec::with_capacity(n_args);
        for k in 0..n_args {
            let Some(word) = words.get(i + 1 + k) else {
                bail!(
                    "{}: gate '{}' needs {} numeric argument{}",
                    head.place,
                    head.text,
                    n_args,
                    if n_args == 1 { "" } else { "s" }
                );
            };
            let value: f64 = word.text.parse().map_err(|_| {
                anyhow::anyhow!("{}: expected a number, got '{}'", word.place, word.text)
            })?;
            if !value.is_finite() {
                bail!("{}: argument must be finite", word.place);
            }
            args.push(value);
        }
        gates.push(build(head.text, &args));
        i += 1 + n_args;
    }
    Ok(gates)
}

/// Parses inline gate tokens, e.g. `["squeeze", "0.44", "qpg", "0.75"]`.
pub fn parse_tokens(tokens: &[String]) -> Result<Vec<GateSpec>> {
    let words: Vec<Word> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| Word {
            text: t.as_str(),
            place: format!("argument {}", i + 1),
        })
        .collect();
    parse_words(&words)
}

/// Parses a program file: one gate per line, blank lines and `#` comments
/// ignored. Errors carry the line and column of the offending word.
pub fn parse_program_text(text: &str) -> Result<Vec<GateSpec>> {
    let mut gates = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut words = Vec::new();
        let mut col = None;
        for (i, ch) in line.char_indices() {
            if ch.is_whitespace() {
                if let Some(start) = col.take() {
                    words.push((start, &line[start..i]));
                }
            } else if col.is_none() {
                col = Some(i);
            }
        }
        if let Some(start) = col {
            words.push((start, &line[start..]));
        }
        let words: Vec<Word> = words
            .into_iter()
            .map(|(start, text)| Word {
                text,
                place: format!("line {}, column {}", lineno + 1, start + 1),
            })
            .collect();
        let line_gates = parse_words(&words)?;
        if line_gates.len() != 1 {
            bail!(
                "line {}: expected one gate per line, got {}",
                lineno + 1,
                line_gates.len()
            );
        }
        gates.extend(line_gates);
    }
    Ok(gates)
}

/// Renders a gate back to its token form.
pub fn render(spec: &GateSpec) -> String {
    match spec {
        GateSpec::Squeeze { r } => format!("squeeze {r}"),
        GateSpec::QuadraticPhase { kappa } => format!("qpg {kappa}"),
        GateSpec::Phase { theta_deg } => format!("phase {theta_deg}"),
        GateSpec::Displace { dx, dp } => format!("displace {dx} {dp}"),
        GateSpec::BeamSplitter { reflectivity } => format!("bs {reflectivity}"),
    }
}
