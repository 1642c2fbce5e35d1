//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := unary ("^" factor)?
//! unary  := "-" unary | atom
//! atom   := number | ident | call | "(" expr ")"
//! call   := ident "(" expr ("," expr)* ")"
//! ```
//!
//! `if(a <cmp> b, then, else)` is the only place comparisons may appear.

use super::ast::{BinOp, Builtin, CmpOp, Node, MAX_DEPTH};
use super::ParseError;

/// Upper bound on parser recursion, checked before the tree depth so that
/// pathological inputs cannot exhaust the stack.
const MAX_NESTING: usize = 4 * MAX_DEPTH;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Cmp(CmpOp),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = |tok| Token { tok, offset: start };
        match c {
            b'(' => out.push(single(Tok::LParen)),
            b')' => out.push(single(Tok::RParen)),
            b',' => out.push(single(Tok::Comma)),
            b'+' => out.push(single(Tok::Plus)),
            b'-' => out.push(single(Tok::Minus)),
            b'*' => out.push(single(Tok::Star)),
            b'/' => out.push(single(Tok::Slash)),
            b'^' => out.push(single(Tok::Caret)),
            b'<' | b'>' | b'=' => {
                let eq_next = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, eq_next) {
                    (b'<', true) => CmpOp::Le,
                    (b'<', false) => CmpOp::Lt,
                    (b'>', true) => CmpOp::Ge,
                    (b'>', false) => CmpOp::Gt,
                    (b'=', true) => CmpOp::Eq,
                    _ => {
                        return Err(ParseError::Syntax {
                            offset: start,
                            expected: vec!["==".into()],
                        })
                    }
                };
                if eq_next {
                    i += 1;
                }
                out.push(single(Tok::Cmp(op)));
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &src[i..j];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: vec!["number".into()],
                })?;
                if !value.is_finite() {
                    return Err(ParseError::NonFiniteConstant { offset: start });
                }
                out.push(single(Tok::Num(value)));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push(single(Tok::Ident(src[i..j].to_string())));
                i = j;
                continue;
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: vec!["token".into()],
                })
            }
        }
        i += 1;
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    vars: &'a [String],
    nesting: usize,
}

const ATOM_START: [&str; 4] = ["number", "identifier", "(", "-"];

fn expected(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: self.offset(),
                expected: vec![name.to_string()],
            })
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(ParseError::TooDeep {
                depth: self.nesting,
                limit: MAX_DEPTH,
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.nesting -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let base = self.unary()?;
        let node = if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.factor()?;
            Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp))
        } else {
            base
        };
        self.nesting -= 1;
        Ok(node)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if *self.peek() == Tok::Minus {
            self.enter()?;
            self.bump();
            let inner = self.unary()?;
            self.nesting -= 1;
            Ok(Node::Neg(Box::new(inner)))
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, ")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.call(name, offset)
                } else if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(i))
                } else if name == "if" || Builtin::from_name(&name).is_some() {
                    Err(ParseError::Syntax {
                        offset: self.offset(),
                        expected: expected(&["("]),
                    })
                } else {
                    Err(ParseError::UnknownIdentifier { name, offset })
                }
            }
            _ => Err(ParseError::Syntax {
                offset,
                expected: expected(&ATOM_START),
            }),
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        self.expect(Tok::LParen, "(")?;
        if name == "if" {
            let lhs = self.expr()?;
            let cmp = match self.peek() {
                Tok::Cmp(c) => *c,
                _ => {
                    return Err(ParseError::Syntax {
                        offset: self.offset(),
                        expected: expected(&["<", "<=", ">", ">=", "=="]),
                    })
                }
            };
            self.bump();
            let rhs = self.expr()?;
            self.expect(Tok::Comma, ",")?;
            let then = self.expr()?;
            self.expect(Tok::Comma, ",")?;
            let other = self.expr()?;
            if *self.peek() == Tok::Comma {
                return Err(ParseError::ArityMismatch {
                    name,
                    expected: "3".into(),
                    found: 4,
                    offset,
                });
            }
            self.expect(Tok::RParen, ")")?;
            return Ok(Node::If {
                lhs: Box::new(lhs),
                cmp,
                rhs: Box::new(rhs),
                then: Box::new(then),
                other: Box::new(other),
            });
        }
        let func = Builtin::from_name(&name).ok_or_else(|| ParseError::UnknownIdentifier {
            name: name.clone(),
            offset,
        })?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        if *self.peek() != Tok::RParen {
            return Err(ParseError::Syntax {
                offset: self.offset(),
                expected: expected(&[",", ")"]),
            });
        }
        self.bump();
        let (lo, hi) = func.arity();
        if args.len() < lo || args.len() > hi {
            let expected = if lo == hi {
                lo.to_string()
            } else {
                format!("at least {lo}")
            };
            return Err(ParseError::ArityMismatch {
                name,
                expected,
                found: args.len(),
                offset,
            });
        }
        Ok(Node::Call(func, args))
    }
}

pub(super) fn parse_node(src: &str, vars: &[String]) -> Result<Node, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vars,
        nesting: 0,
    };
    let node = p.expr()?;
    if *p.peek() != Tok::Eof {
        let mut exp = expected(&["+", "-", "*", "/", "^"]);
        exp.push("end of input".into());
        return Err(ParseError::Syntax {
            offset: p.offset(),
            expected: exp,
        });
    }
    Ok(node)
}
