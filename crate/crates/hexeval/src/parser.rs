//! Text syntax of HEX programs.
//!
//! ```text
//! swim(ind) | swim(outd).
//! need(inoutd,C) :- &rq[swim](C).
//! :- goto(X), goto(Y), X != Y.
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::syntax::{Atom, BuiltinAtom, BuiltinOp, ExternalAtom, Literal, Program, Rule, Term};
use crate::HexError;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    Var(String),
    Str(String),
    Num(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    If,
    Bar,
    Amp,
    Eq,
    Neq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Var(s) | Tok::Str(s) | Tok::Num(s) => write!(f, "'{s}'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBrack => f.write_str("'['"),
            Tok::RBrack => f.write_str("']'"),
            Tok::Comma => f.write_str("','"),
            Tok::Dot => f.write_str("'.'"),
            Tok::If => f.write_str("':-'"),
            Tok::Bar => f.write_str("'|'"),
            Tok::Amp => f.write_str("'&'"),
            Tok::Eq => f.write_str("'='"),
            Tok::Neq => f.write_str("'!='"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Spanned> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut k = 0;
        while k < chars.len() {
            let c = chars[k];
            let col = k + 1;
            let mut push = |tok: Tok| {
                out.push(Spanned {
                    tok,
                    line: li + 1,
                    col,
                })
            };
            match c {
                '%' => break,
                c if c.is_whitespace() => {
                    k += 1;
                    continue;
                }
                '(' => push(Tok::LParen),
                ')' => push(Tok::RParen),
                '[' => push(Tok::LBrack),
                ']' => push(Tok::RBrack),
                ',' => push(Tok::Comma),
                '.' => push(Tok::Dot),
                '|' => push(Tok::Bar),
                '&' => push(Tok::Amp),
                '=' => push(Tok::Eq),
                '!' if chars.get(k + 1) == Some(&'=') => {
                    push(Tok::Neq);
                    k += 1;
                }
                ':' if chars.get(k + 1) == Some(&'-') => {
                    push(Tok::If);
                    k += 1;
                }
                '"' => {
                    let start = k;
                    k += 1;
                    while k < chars.len() && chars[k] != '"' {
                        k += 1;
                    }
                    if k == chars.len() {
                        diags.push(Diagnostic {
                            line: li + 1,
                            column: col,
                            message: "unterminated string".into(),
                            severity: Severity::Error,
                        });
                        break;
                    }
                    push(Tok::Str(chars[start..=k].iter().collect()));
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let start = k;
                    while k + 1 < chars.len()
                        && (chars[k + 1].is_ascii_alphanumeric() || chars[k + 1] == '_')
                    {
                        k += 1;
                    }
                    let word: String = chars[start..=k].iter().collect();
                    let tok = if c.is_ascii_digit() {
                        if word.chars().all(|d| d.is_ascii_digit()) {
                            Tok::Num(word)
                        } else {
                            diags.push(Diagnostic {
                                line: li + 1,
                                column: col,
                                message: format!("malformed number '{word}'"),
                                severity: Severity::Error,
                            });
                            k += 1;
                            continue;
                        }
                    } else if c.is_ascii_uppercase() {
                        Tok::Var(word)
                    } else if c == '_' {
                        diags.push(Diagnostic {
                            line: li + 1,
                            column: col,
                            message: format!("identifier '{word}' must start with a letter"),
                            severity: Severity::Error,
                        });
                        k += 1;
                        continue;
                    } else {
                        Tok::Ident(word)
                    };
                    push(tok);
                }
                other => diags.push(Diagnostic {
                    line: li + 1,
                    column: col,
                    message: format!("unexpected character '{other}'"),
                    severity: Severity::Error,
                }),
            }
            k += 1;
        }
    }
    out
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    eof: (usize, usize),
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .unwrap_or(self.eof)
    }

    fn error_at(&self, (line, column): (usize, usize), message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn error(&self, message: impl Into<String>) -> Diagnostic {
        self.error_at(self.here(), message)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.peek().cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        match self.peek() {
            Some(x) if *x == t => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(self.error(format!("expected {t}, found {x}"))),
            None => Err(self.error(format!("expected {t}, found end of input"))),
        }
    }

    fn skip_statement(&mut self) {
        while let Some(t) = self.bump() {
            if t == Tok::Dot {
                break;
            }
        }
    }

    fn term(&mut self) -> PResult<Term> {
        match self.bump() {
            Some(Tok::Ident(s)) | Some(Tok::Str(s)) | Some(Tok::Num(s)) => Ok(Term::constant(&s)),
            Some(Tok::Var(s)) => Ok(Term::var(&s)),
            Some(t) => {
                self.pos -= 1;
                Err(self.error(format!("expected a term, found {t}")))
            }
            None => Err(self.error("expected a term, found end of input")),
        }
    }

    fn terms_until(&mut self, close: Tok) -> PResult<Vec<Term>> {
        let mut out = Vec::new();
        if self.peek() == Some(&close) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(t) if *t == close => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(t) => return Err(self.error(format!("expected ',' or {close}, found {t}"))),
                None => return Err(self.error(format!("expected {close}, found end of input"))),
            }
        }
    }

    fn ordinary_atom(&mut self) -> PResult<(Atom, (usize, usize))> {
        let at = self.here();
        match self.bump() {
            Some(Tok::Ident(p)) => {
                let args = if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    self.terms_until(Tok::RParen)?
                } else {
                    Vec::new()
                };
                Ok((Atom::new(&p, args), at))
            }
            Some(Tok::Var(v)) => Err(self.error_at(
                at,
                format!("predicate '{v}' starts with an uppercase letter; higher-order atoms are not supported"),
            )),
            Some(Tok::Amp) => Err(self.error_at(at, "external atoms may only occur in rule bodies")),
            Some(t) => Err(self.error_at(at, format!("expected an atom, found {t}"))),
            None => Err(self.error_at(at, "expected an atom, found end of input")),
        }
    }

    fn external_atom(&mut self) -> PResult<ExternalAtom> {
        self.expect(Tok::Amp)?;
        let name = match self.bump() {
            Some(Tok::Ident(n)) => n,
            Some(t) => {
                self.pos -= 1;
                return Err(self.error(format!("expected an external predicate name, found {t}")));
            }
            None => return Err(self.error("expected an external predicate name")),
        };
        let inputs = if self.peek() == Some(&Tok::LBrack) {
            self.pos += 1;
            self.terms_until(Tok::RBrack)?
        } else {
            Vec::new()
        };
        let outputs = if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            self.terms_until(Tok::RParen)?
        } else {
            Vec::new()
        };
        Ok(ExternalAtom::new(&name, inputs, outputs))
    }

    fn builtin_rest(&mut self, left: Term) -> PResult<BuiltinAtom> {
        let op = match self.bump() {
            Some(Tok::Eq) => BuiltinOp::Eq,
            Some(Tok::Neq) => BuiltinOp::Neq,
            Some(t) => {
                self.pos -= 1;
                return Err(self.error(format!("expected '=' or '!=', found {t}")));
            }
            None => return Err(self.error("expected '=' or '!='")),
        };
        let right = self.term()?;
        Ok(BuiltinAtom { op, left, right })
    }

    /// Returns the literal and whether it was negated.
    fn literal(&mut self, seen: &mut Vec<(Atom, (usize, usize))>) -> PResult<(Literal, bool)> {
        let at = self.here();
        let negated = matches!(self.peek(), Some(Tok::Ident(s)) if s == "not")
            && matches!(
                self.peek_at(1),
                Some(Tok::Ident(_))
                    | Some(Tok::Var(_))
                    | Some(Tok::Amp)
                    | Some(Tok::Str(_))
                    | Some(Tok::Num(_))
            );
        if negated {
            self.pos += 1;
        }
        let lit = match self.peek() {
            Some(Tok::Amp) => Literal::External(self.external_atom()?),
            Some(Tok::Ident(_)) if matches!(self.peek_at(1), Some(Tok::Eq) | Some(Tok::Neq)) => {
                let left = self.term()?;
                Literal::Builtin(self.builtin_rest(left)?)
            }
            Some(Tok::Ident(_)) => {
                let (a, at) = self.ordinary_atom()?;
                seen.push((a.clone(), at));
                Literal::Ordinary(a)
            }
            Some(Tok::Var(_)) | Some(Tok::Str(_)) | Some(Tok::Num(_)) => {
                if matches!(self.peek(), Some(Tok::Var(_))) && self.peek_at(1) == Some(&Tok::LParen)
                {
                    return Err(self.error("uppercase predicate names are not allowed; higher-order atoms are not supported"));
                }
                let left = self.term()?;
                Literal::Builtin(self.builtin_rest(left)?)
            }
            Some(t) => return Err(self.error(format!("expected a body literal, found {t}"))),
            None => return Err(self.error("expected a body literal, found end of input")),
        };
        if negated && matches!(lit, Literal::Builtin(_)) {
            return Err(self.error_at(at, "builtin atoms cannot be negated"));
        }
        Ok((lit, negated))
    }

    fn statement(&mut self, seen: &mut Vec<(Atom, (usize, usize))>) -> PResult<Rule> {
        let start = self.here();
        let mut rule = Rule::default();
        if self.peek() != Some(&Tok::If) {
            loop {
                let (a, at) = self.ordinary_atom()?;
                seen.push((a.clone(), at));
                rule.head.push(a);
                let disj_v = matches!(self.peek(), Some(Tok::Ident(s)) if s == "v")
                    && matches!(self.peek_at(1), Some(Tok::Ident(_)));
                if self.peek() == Some(&Tok::Bar) || disj_v {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        match self.peek() {
            Some(Tok::Dot) => {
                self.pos += 1;
                Ok(rule)
            }
            Some(Tok::If) => {
                self.pos += 1;
                loop {
                    let (lit, neg) = self.literal(seen)?;
                    if neg {
                        rule.neg.push(lit);
                    } else {
                        rule.pos.push(lit);
                    }
                    match self.peek() {
                        Some(Tok::Comma) => self.pos += 1,
                        Some(Tok::Dot) => {
                            self.pos += 1;
                            return Ok(rule);
                        }
                        Some(t) => {
                            return Err(self.error(format!("expected ',' or '.', found {t}")))
                        }
                        None => return Err(self.error_at(start, "unterminated rule: missing '.'")),
                    }
                }
            }
            Some(t) => Err(self.error(format!("expected ':-' or '.', found {t}"))),
            None => Err(self.error_at(start, "unterminated rule: missing '.'")),
        }
    }
}

/// Parses a program, returning it with any warnings, or every error found.
pub fn parse_with_diagnostics(text: &str) -> Result<(Program, Vec<Diagnostic>), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let toks = lex(text, &mut diags);
    let last_line = text.lines().count().max(1);
    let last_col = text
        .lines()
        .last()
        .map(|l| l.chars().count() + 1)
        .unwrap_or(1);
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        eof: (last_line, last_col),
    };
    let mut rules = Vec::new();
    let mut seen = Vec::new();
    while p.peek().is_some() {
        match p.statement(&mut seen) {
            Ok(r) => rules.push(r),
            Err(d) => {
                diags.push(d);
                p.skip_statement();
            }
        }
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(diags);
    }
    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    for (a, (line, column)) in &seen {
        let prev = *arities.entry(a.predicate.to_string()).or_insert(a.arity());
        if prev != a.arity() {
            diags.push(Diagnostic {
                line: *line,
                column: *column,
                message: format!(
                    "predicate '{}' used with arity {} and {}",
                    a.predicate,
                    prev,
                    a.arity()
                ),
                severity: Severity::Warning,
            });
        }
    }
    Ok((Program::new(rules), diags))
}

/// Parses a program; warnings are dropped.
pub fn parse_program(text: &str) -> Result<Program, HexError> {
    parse_with_diagnostics(text)
        .map(|(p, _)| p)
        .map_err(HexError::Parse)
}
