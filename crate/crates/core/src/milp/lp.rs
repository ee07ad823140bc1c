//! CPLEX LP text format: writer and a reader for the subset it produces
//! (plus the common spellings of section headers and bounds).

use super::{Constraint, MilpModel, Sense, VarKind, Variable};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

const WRAP: usize = 100;

/// Number with at most 12 significant digits, in shortest form.
fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn push_terms(out: &mut String, line: &mut String, model: &MilpModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        let filler = model.variables.first().map_or("", |v| v.name.as_str());
        line.push_str(&format!(" 0 {filler}"));
        return;
    }
    for (pos, &(var, coef)) in terms.iter().enumerate() {
        let name = &model.variables[var].name;
        let magnitude = coef.abs();
        let sign = if coef < 0.0 { "-" } else { "+" };
        let body = if magnitude == 1.0 {
            name.clone()
        } else {
            format!("{} {name}", fmt_num(magnitude))
        };
        let piece = match (pos, coef < 0.0) {
            (0, false) => format!(" {body}"),
            (0, true) => format!(" - {body}"),
            _ => format!(" {sign} {body}"),
        };
        if line.len() + piece.len() > WRAP {
            out.push_str(line);
            out.push('\n');
            line.clear();
            line.push_str("   ");
        }
        line.push_str(&piece);
    }
}

/// Renders `model` in CPLEX LP format. Terms appear in variable-name order
/// and rows in insertion order, so equal models give equal bytes.
pub fn emit_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n");
    let mut line = String::from(" obj:");
    push_terms(&mut out, &mut line, model, &model.objective);
    out.push_str(&line);
    out.push('\n');

    out.push_str("Subject To\n");
    for row in &model.constraints {
        let mut line = format!(" {}:", row.name);
        push_terms(&mut out, &mut line, model, &row.terms);
        let tail = format!(" {} {}", row.sense.symbol(), fmt_num(row.rhs));
        if line.len() + tail.len() > WRAP {
            out.push_str(&line);
            out.push('\n');
            line = String::from("  ");
        }
        line.push_str(&tail);
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
        if v.upper.is_infinite() {
            let _ = writeln!(out, " {} >= {}", v.name, fmt_num(v.lower));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
        }
    }
    out.push_str("Binaries\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("LP line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
}

fn section_header(line: &str) -> Option<Option<Section>> {
    let lower = line.trim().to_ascii_lowercase();
    let section = match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "generals" | "general" | "gen" => Section::Generals,
        "end" => return Some(None),
        _ => return None,
    };
    Some(Some(section))
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_.!\"#$%&()/,;?@'{}~[]|".contains(c)
}

fn tokenize(text: &str, line_no: usize, out: &mut Vec<(Tok, usize)>) -> Result<(), LpParseError> {
    let err = |message: String| LpParseError { line: line_no, message };
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == '+' {
            out.push((Tok::Plus, line_no));
            i += 1;
        } else if c == '-' {
            out.push((Tok::Minus, line_no));
            i += 1;
        } else if c == ':' {
            out.push((Tok::Colon, line_no));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut op = String::from(c);
            if i + 1 < chars.len() && "<>=".contains(chars[i + 1]) {
                op.push(chars[i + 1]);
            }
            i += op.len();
            let sense = match op.as_str() {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => return Err(err(format!("unknown operator {op}"))),
            };
            out.push((Tok::Cmp(sense), line_no));
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '+' || d == '-') && matches!(chars[i - 1], 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse().map_err(|_| err(format!("bad number {s}")))?;
            out.push((Tok::Num(v), line_no));
        } else if is_ident_char(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let lower = s.to_ascii_lowercase();
            if lower == "inf" || lower == "infinity" {
                out.push((Tok::Num(f64::INFINITY), line_no));
            } else {
                out.push((Tok::Ident(s), line_no));
            }
        } else {
            return Err(err(format!("unexpected character {c:?}")));
        }
    }
    Ok(())
}

struct Reader {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Reader {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or(self.toks.last())
            .map_or(0, |(_, l)| *l)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, LpParseError> {
        Err(LpParseError {
            line: self.line(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn label(&mut self) -> Option<String> {
        if let (Some(Tok::Ident(name)), Some(Tok::Colon)) = (self.peek(), self.peek2()) {
            let name = name.clone();
            self.pos += 2;
            Some(name)
        } else {
            None
        }
    }

    /// Linear expression up to a comparison or the end of the section.
    fn expression(&mut self) -> Result<Vec<(String, f64)>, LpParseError> {
        let mut terms = Vec::new();
        loop {
            let mut sign = 1.0;
            let mut seen_sign = false;
            while let Some(Tok::Plus | Tok::Minus) = self.peek() {
                if self.next() == Some(Tok::Minus) {
                    sign = -sign;
                }
                seen_sign = true;
            }
            let coef = match self.peek() {
                Some(Tok::Num(v)) => {
                    let v = *v;
                    self.pos += 1;
                    Some(v)
                }
                _ => None,
            };
            match self.peek() {
                Some(Tok::Ident(_)) => {
                    let Some(Tok::Ident(name)) = self.next() else { unreachable!() };
                    terms.push((name, sign * coef.unwrap_or(1.0)));
                }
                _ if coef.is_some() => {
                    if coef == Some(0.0) {
                        continue;
                    }
                    return self.err("constant terms are not supported");
                }
                _ if seen_sign => return self.err("dangling sign"),
                _ => return Ok(terms),
            }
        }
    }

    fn signed_number(&mut self) -> Result<f64, LpParseError> {
        let mut sign = 1.0;
        while let Some(Tok::Plus | Tok::Minus) = self.peek() {
            if self.next() == Some(Tok::Minus) {
                sign = -sign;
            }
        }
        match self.next() {
            Some(Tok::Num(v)) => Ok(sign * v),
            _ => {
                self.pos -= 1;
                self.err("expected a number")
            }
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

#[derive(Default)]
struct Vars {
    index: BTreeMap<String, usize>,
    list: Vec<Variable>,
}

impl Vars {
    fn get(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.list.push(Variable {
            name: name.to_string(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        self.index.insert(name.to_string(), self.list.len() - 1);
        self.list.len() - 1
    }
}

/// Reads an LP file written by [`emit_lp`] or a compatible tool. Only
/// minimisation of linear objectives with `<=`, `>=`, `=` rows, bounds and
/// binaries is supported.
pub fn parse_lp(text: &str) -> Result<MilpModel, LpParseError> {
    let mut sections: Vec<(Section, Vec<(Tok, usize)>)> = Vec::new();
    let mut ended = false;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        if raw.trim_start().starts_with('\\') || raw.trim().is_empty() {
            continue;
        }
        if ended {
            return Err(LpParseError { line: line_no, message: "content after End".into() });
        }
        if let Some(header) = section_header(raw) {
            match header {
                Some(s) => sections.push((s, Vec::new())),
                None => ended = true,
            }
            continue;
        }
        let lower = raw.trim().to_ascii_lowercase();
        if lower == "maximize" || lower == "maximise" || lower == "max" {
            return Err(LpParseError { line: line_no, message: "only minimisation is supported".into() });
        }
        let Some((_, toks)) = sections.last_mut() else {
            return Err(LpParseError { line: line_no, message: "text before the objective section".into() });
        };
        tokenize(raw, line_no, toks)?;
    }
    if !ended {
        return Err(LpParseError { line: text.lines().count(), message: "missing End".into() });
    }

    let mut vars = Vars::default();
    let mut objective = Vec::new();
    let mut constraints = Vec::new();
    let mut binaries = BTreeSet::new();
    let mut bounded: BTreeMap<usize, (f64, f64)> = BTreeMap::new();

    for (section, toks) in sections {
        let mut r = Reader { toks, pos: 0 };
        match section {
            Section::Objective => {
                r.label();
                for (name, c) in r.expression()? {
                    objective.push((vars.get(&name), c));
                }
                if !r.at_end() {
                    return r.err("unexpected token in objective");
                }
            }
            Section::Constraints => {
                while !r.at_end() {
                    let name = r
                        .label()
                        .unwrap_or_else(|| format!("R{}", constraints.len() + 1));
                    let terms = r.expression()?;
                    let Some(Tok::Cmp(sense)) = r.next() else {
                        r.pos -= 1;
                        return r.err(format!("row {name}: expected a comparison"));
                    };
                    let rhs = r.signed_number()?;
                    constraints.push(Constraint {
                        name,
                        terms: terms.into_iter().map(|(n, c)| (vars.get(&n), c)).collect(),
                        sense,
                        rhs,
                    });
                }
            }
            Section::Bounds => {
                while !r.at_end() {
                    parse_bound(&mut r, &mut vars, &mut bounded)?;
                }
            }
            Section::Binaries | Section::Generals => {
                while let Some(tok) = r.next() {
                    let Tok::Ident(name) = tok else {
                        r.pos -= 1;
                        return r.err("expected a variable name");
                    };
                    if section == Section::Generals {
                        return r.err(format!("general integer {name} is not supported"));
                    }
                    binaries.insert(vars.get(&name));
                }
            }
        }
    }

    for (i, v) in vars.list.iter_mut().enumerate() {
        if binaries.contains(&i) {
            v.kind = VarKind::Binary;
            v.lower = 0.0;
            v.upper = 1.0;
        }
        if let Some(&(lo, hi)) = bounded.get(&i) {
            v.lower = lo;
            v.upper = hi;
        }
    }
    Ok(MilpModel::from_parts(vars.list, constraints, objective))
}

fn parse_bound(
    r: &mut Reader,
    vars: &mut Vars,
    bounded: &mut BTreeMap<usize, (f64, f64)>,
) -> Result<(), LpParseError> {
    let current = |bounded: &BTreeMap<usize, (f64, f64)>, v| {
        bounded.get(&v).copied().unwrap_or((0.0, f64::INFINITY))
    };
    match r.peek() {
        Some(Tok::Ident(name)) => {
            let v = vars.get(&name.clone());
            r.pos += 1;
            if let Some(Tok::Ident(word)) = r.peek() {
                if word.eq_ignore_ascii_case("free") {
                    r.pos += 1;
                    bounded.insert(v, (f64::NEG_INFINITY, f64::INFINITY));
                    return Ok(());
                }
            }
            let Some(Tok::Cmp(sense)) = r.next() else {
                r.pos -= 1;
                return r.err("expected a comparison in bound");
            };
            let value = r.signed_number()?;
            let (lo, hi) = current(bounded, v);
            let b = match sense {
                Sense::Ge => (value, hi),
                Sense::Le => (lo, value),
                Sense::Eq => (value, value),
            };
            bounded.insert(v, b);
        }
        _ => {
            let lo = r.signed_number()?;
            let Some(Tok::Cmp(Sense::Le)) = r.next() else {
                r.pos -= 1;
                return r.err("expected <= after a lower bound");
            };
            let Some(Tok::Ident(name)) = r.next() else {
                r.pos -= 1;
                return r.err("expected a variable name");
            };
            let v = vars.get(&name);
            let (_, mut hi) = current(bounded, v);
            if let Some(Tok::Cmp(Sense::Le)) = r.peek() {
                r.pos += 1;
                hi = r.signed_number()?;
            }
            bounded.insert(v, (lo, hi));
        }
    }
    Ok(())
}
