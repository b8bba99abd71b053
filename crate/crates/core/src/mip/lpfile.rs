//! LP-format text export (big-M encoding) and a round-trip parser.
//!
//! The exporter writes a [`ShallowReluProblem`] as a mixed-integer program in
//! the standard LP text format so the subproblems can be handed to external
//! solvers. Per ReLU term j with pre-activation g_j and interval [L_j, U_j],
//! it introduces a continuous `y{j}` and a binary `z{j}` with
//!
//! ```text
//!   y_j >= 0
//!   y_j >= g_j
//!   y_j <= g_j - L_j (1 - z_j)
//!   y_j <= U_j z_j
//! ```
//!
//! and rewrites the objective over the `y` variables. Variable naming is
//! deterministic (`v0..`, `y0..`, `z0..`) and numerals carry 17 significant
//! digits so the file round-trips through [`parse_lp_text`] bit-faithfully.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{ConstraintOp, Sense, ShallowReluProblem};

#[derive(Debug, Error)]
pub enum LpFileError {
    #[error("lp parse error at token {index}: {message}")]
    Syntax { index: usize, message: String },
    #[error("lp parse error: {0}")]
    Structure(String),
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_term(out: &mut String, coeff: f64, name: &str, first: bool) {
    let sign = if coeff < 0.0 { "-" } else { "+" };
    if first && coeff >= 0.0 {
        let _ = write!(out, "{} {}", fmt_num(coeff.abs()), name);
    } else {
        let _ = write!(out, "{} {} {}", sign, fmt_num(coeff.abs()), name);
    }
    out.push(' ');
}

/// Render a shallow problem as LP-format text with big-M ReLU encoding.
pub fn export_lp_text(p: &ShallowReluProblem) -> String {
    let mut s = String::new();
    s.push_str(match p.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });

    s.push_str(" obj: ");
    let mut first = true;
    for (j, c) in p.linear_coeffs.iter().enumerate() {
        if *c != 0.0 {
            push_term(&mut s, *c, &format!("v{j}"), first);
            first = false;
        }
    }
    for (j, term) in p.relu_terms.iter().enumerate() {
        push_term(&mut s, term.weight, &format!("y{j}"), first);
        first = false;
    }
    if p.constant != 0.0 || first {
        let sign = if p.constant < 0.0 { "-" } else { "+" };
        if first {
            let _ = write!(s, "{}", fmt_num(p.constant));
        } else {
            let _ = write!(s, "{} {}", sign, fmt_num(p.constant.abs()));
        }
    }
    s.push('\n');

    if !p.relu_terms.is_empty() {
        s.push_str("Subject To\n");
        for (j, term) in p.relu_terms.iter().enumerate() {
            let (lo, hi) = term.interval(&p.box_lower, &p.box_upper);
            let y = format!("y{j}");
            let z = format!("z{j}");

            let _ = write!(s, " pos{j}: ");
            push_term(&mut s, 1.0, &y, true);
            let _ = writeln!(s, ">= {}", fmt_num(0.0));

            // y - g >= 0  <=>  y >= g
            let _ = write!(s, " arg{j}: ");
            let mut first = true;
            push_term(&mut s, 1.0, &y, first);
            first = false;
            for (k, a) in term.coeffs.iter().enumerate() {
                if *a != 0.0 {
                    push_term(&mut s, -a, &format!("v{k}"), first);
                }
            }
            let _ = writeln!(s, ">= {}", fmt_num(term.constant));

            // y - g - L z <= -L + b  <=>  y <= g - L (1 - z)
            let _ = write!(s, " big{j}: ");
            let mut first = true;
            push_term(&mut s, 1.0, &y, first);
            first = false;
            for (k, a) in term.coeffs.iter().enumerate() {
                if *a != 0.0 {
                    push_term(&mut s, -a, &format!("v{k}"), first);
                }
            }
            push_term(&mut s, -lo, &z, first);
            let _ = writeln!(s, "<= {}", fmt_num(term.constant - lo));

            // y - U z <= 0  <=>  y <= U z
            let _ = write!(s, " cap{j}: ");
            push_term(&mut s, 1.0, &y, true);
            push_term(&mut s, -hi.max(0.0), &z, false);
            let _ = writeln!(s, "<= {}", fmt_num(0.0));
        }
    }

    s.push_str("Bounds\n");
    for j in 0..p.dim() {
        let _ = writeln!(
            s,
            " {} <= v{j} <= {}",
            fmt_num(p.box_lower[j]),
            fmt_num(p.box_upper[j])
        );
    }

    if !p.relu_terms.is_empty() {
        s.push_str("Binary\n");
        for j in 0..p.relu_terms.len() {
            let _ = writeln!(s, " z{j}");
        }
    }
    s.push_str("End\n");
    s
}

/// A linear row parsed back from LP text.
#[derive(Debug, Clone)]
pub struct ParsedConstraint {
    pub name: Option<String>,
    pub terms: Vec<(f64, String)>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

/// A mixed-integer program reconstructed from LP-format text.
#[derive(Debug, Clone)]
pub struct ParsedLp {
    pub sense: Sense,
    pub objective: Vec<(f64, String)>,
    pub obj_constant: f64,
    pub constraints: Vec<ParsedConstraint>,
    /// Declared bounds; variables not listed default to [0, +inf).
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub binaries: Vec<String>,
}

impl ParsedLp {
    /// All variable names mentioned anywhere, in first-seen order.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = Vec::new();
        let mut push = |name: &String| {
            if !seen.contains(name) {
                seen.push(name.clone());
            }
        };
        for (_, v) in &self.objective {
            push(v);
        }
        for c in &self.constraints {
            for (_, v) in &c.terms {
                push(v);
            }
        }
        for v in self.bounds.keys() {
            push(v);
        }
        for v in &self.binaries {
            push(v);
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Le,
    Ge,
    Eq,
}

fn tokenize(text: &str) -> Result<Vec<Tok>, LpFileError> {
    let mut toks = Vec::new();
    // Comments run from a backslash to end of line.
    for line in text.lines() {
        let line = line.split('\\').next().unwrap_or("");
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_whitespace() {
                i += 1;
            } else if c == '+' {
                toks.push(Tok::Plus);
                i += 1;
            } else if c == '-' {
                toks.push(Tok::Minus);
                i += 1;
            } else if c == ':' {
                toks.push(Tok::Colon);
                i += 1;
            } else if c == '<' || c == '>' || c == '=' {
                let mut j = i + 1;
                if j < bytes.len() && bytes[j] as char == '=' {
                    j += 1;
                }
                toks.push(match c {
                    '<' => Tok::Le,
                    '>' => Tok::Ge,
                    _ => Tok::Eq,
                });
                i = j;
            } else if c.is_ascii_digit() || c == '.' {
                let mut j = i;
                while j < bytes.len() {
                    let d = bytes[j] as char;
                    if d.is_ascii_digit() || d == '.' {
                        j += 1;
                    } else if (d == 'e' || d == 'E')
                        && j + 1 < bytes.len()
                        && ((bytes[j + 1] as char).is_ascii_digit()
                            || bytes[j + 1] as char == '+'
                            || bytes[j + 1] as char == '-')
                    {
                        j += 2;
                        while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                            j += 1;
                        }
                        break;
                    } else {
                        break;
                    }
                }
                let lit = &line[i..j];
                let v: f64 = lit.parse().map_err(|_| LpFileError::Syntax {
                    index: toks.len(),
                    message: format!("bad number literal {lit:?}"),
                })?;
                toks.push(Tok::Num(v));
                i = j;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut j = i;
                while j < bytes.len() {
                    let d = bytes[j] as char;
                    if d.is_ascii_alphanumeric() || d == '_' || d == '.' {
                        j += 1;
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Word(line[i..j].to_string()));
                i = j;
            } else {
                return Err(LpFileError::Syntax {
                    index: toks.len(),
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
    }
    Ok(toks)
}

fn keyword(tok: &Tok) -> Option<&'static str> {
    let Tok::Word(w) = tok else { return None };
    match w.to_ascii_lowercase().as_str() {
        "minimize" | "minimum" | "min" => Some("minimize"),
        "maximize" | "maximum" | "max" => Some("maximize"),
        "subject" | "st" | "s.t." | "such" => Some("subject"),
        "bounds" | "bound" => Some("bounds"),
        "binary" | "binaries" | "bin" => Some("binary"),
        "general" | "generals" | "gen" => Some("general"),
        "end" => Some("end"),
        "free" => Some("free"),
        _ => None,
    }
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn at_section_keyword(&self) -> bool {
        self.peek().is_some_and(|t| {
            matches!(
                keyword(t),
                Some("subject" | "bounds" | "binary" | "general" | "end")
            )
        })
    }

    fn err(&self, message: impl Into<String>) -> LpFileError {
        LpFileError::Syntax {
            index: self.pos,
            message: message.into(),
        }
    }

    /// Parse a linear expression (signed coefficient/variable terms plus
    /// bare constants) up to a comparison operator or section keyword.
    fn linear_expr(&mut self) -> Result<(Vec<(f64, String)>, f64), LpFileError> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        loop {
            if self.at_section_keyword() {
                break;
            }
            let mut sign = 1.0;
            let mut signed = false;
            while let Some(tok) = self.peek() {
                match tok {
                    Tok::Plus => {
                        self.pos += 1;
                        signed = true;
                    }
                    Tok::Minus => {
                        sign = -sign;
                        self.pos += 1;
                        signed = true;
                    }
                    _ => break,
                }
            }
            match self.peek().cloned() {
                Some(Tok::Num(v)) => {
                    self.pos += 1;
                    match self.peek().cloned() {
                        Some(Tok::Word(name)) if keyword(&Tok::Word(name.clone())).is_none() => {
                            self.pos += 1;
                            terms.push((sign * v, name));
                        }
                        _ => constant += sign * v,
                    }
                }
                Some(Tok::Word(name)) if keyword(&Tok::Word(name.clone())).is_none() => {
                    self.pos += 1;
                    terms.push((sign, name));
                }
                _ => {
                    if signed {
                        return Err(self.err("dangling sign in expression"));
                    }
                    break;
                }
            }
        }
        Ok((terms, constant))
    }

    fn comparison(&mut self) -> Result<ConstraintOp, LpFileError> {
        let op = match self.peek() {
            Some(Tok::Le) => ConstraintOp::Le,
            Some(Tok::Ge) => ConstraintOp::Ge,
            Some(Tok::Eq) => ConstraintOp::Eq,
            _ => return Err(self.err("expected comparison operator")),
        };
        self.pos += 1;
        Ok(op)
    }

    fn signed_number(&mut self) -> Result<f64, LpFileError> {
        let mut sign = 1.0;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Plus => self.pos += 1,
                Tok::Minus => {
                    sign = -sign;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(sign * v)
            }
            _ => Err(self.err("expected number")),
        }
    }
}

/// Parse LP-format text back into a structured model. Serves as the format's
/// grammar checker for exported files.
pub fn parse_lp_text(text: &str) -> Result<ParsedLp, LpFileError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };

    let sense = match p.peek().and_then(keyword) {
        Some("minimize") => Sense::Minimize,
        Some("maximize") => Sense::Maximize,
        _ => return Err(p.err("expected Minimize or Maximize")),
    };
    p.pos += 1;

    // Objective, with optional label.
    if matches!(p.peek(), Some(Tok::Word(_))) && matches!(p.toks.get(p.pos + 1), Some(Tok::Colon)) {
        p.pos += 2;
    }
    let (objective, obj_constant) = p.linear_expr()?;

    let mut constraints = Vec::new();
    if p.peek().and_then(keyword) == Some("subject") {
        p.pos += 1;
        if p.peek() == Some(&Tok::Word("To".into()))
            || p.peek() == Some(&Tok::Word("to".into()))
            || p.peek() == Some(&Tok::Word("that".into()))
            || p.peek() == Some(&Tok::Word("That".into()))
        {
            p.pos += 1;
        }
        while !p.at_section_keyword() && p.peek().is_some() {
            let name = if matches!(p.peek(), Some(Tok::Word(_)))
                && matches!(p.toks.get(p.pos + 1), Some(Tok::Colon))
            {
                let Some(Tok::Word(w)) = p.peek().cloned() else {
                    unreachable!()
                };
                p.pos += 2;
                Some(w)
            } else {
                None
            };
            let (terms, lhs_const) = p.linear_expr()?;
            let op = p.comparison()?;
            let rhs = p.signed_number()?;
            constraints.push(ParsedConstraint {
                name,
                terms,
                op,
                rhs: rhs - lhs_const,
            });
        }
    }

    let mut bounds = BTreeMap::new();
    if p.peek().and_then(keyword) == Some("bounds") {
        p.pos += 1;
        while !p.at_section_keyword() && p.peek().is_some() {
            // Forms: "l <= x <= u", "x <= u", "x >= l", "x = v", "x free".
            match p.peek().cloned() {
                Some(Tok::Num(_)) | Some(Tok::Plus) | Some(Tok::Minus) => {
                    let lo = p.signed_number()?;
                    let op = p.comparison()?;
                    if op != ConstraintOp::Le {
                        return Err(p.err("expected <= in bound"));
                    }
                    let Some(Tok::Word(name)) = p.peek().cloned() else {
                        return Err(p.err("expected variable name in bound"));
                    };
                    p.pos += 1;
                    let mut hi = f64::INFINITY;
                    if matches!(p.peek(), Some(Tok::Le)) {
                        p.pos += 1;
                        hi = p.signed_number()?;
                    }
                    bounds.insert(name, (lo, hi));
                }
                Some(Tok::Word(name)) => {
                    p.pos += 1;
                    match p.peek() {
                        Some(Tok::Word(w)) if keyword(&Tok::Word(w.clone())) == Some("free") => {
                            p.pos += 1;
                            bounds.insert(name, (f64::NEG_INFINITY, f64::INFINITY));
                        }
                        Some(Tok::Le) => {
                            p.pos += 1;
                            let hi = p.signed_number()?;
                            bounds.insert(name, (0.0, hi));
                        }
                        Some(Tok::Ge) => {
                            p.pos += 1;
                            let lo = p.signed_number()?;
                            bounds.insert(name, (lo, f64::INFINITY));
                        }
                        Some(Tok::Eq) => {
                            p.pos += 1;
                            let v = p.signed_number()?;
                            bounds.insert(name, (v, v));
                        }
                        _ => return Err(p.err("malformed bound line")),
                    }
                }
                _ => return Err(p.err("malformed bound line")),
            }
        }
    }

    let mut binaries = Vec::new();
    if p.peek().and_then(keyword) == Some("binary") {
        p.pos += 1;
        while let Some(Tok::Word(w)) = p.peek().cloned() {
            if keyword(&Tok::Word(w.clone())).is_some() {
                break;
            }
            binaries.push(w);
            p.pos += 1;
        }
    }

    if p.peek().and_then(keyword) == Some("end") {
        p.pos += 1;
    } else {
        return Err(p.err("expected End"));
    }
    if p.peek().is_some() {
        return Err(p.err("trailing tokens after End"));
    }

    Ok(ParsedLp {
        sense,
        objective,
        obj_constant,
        constraints,
        bounds,
        binaries,
    })
}
