use std::fmt;

use super::EvalError;

/// Maximum tree depth of an expression (a leaf has depth 1).
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Artanh,
    Acos,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Builtin {
    pub const ALL: [Builtin; 11] = [
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sin,
        Builtin::Cos,
        Builtin::Tanh,
        Builtin::Artanh,
        Builtin::Acos,
        Builtin::Sqrt,
        Builtin::Abs,
        Builtin::Min,
        Builtin::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Tanh => "tanh",
            Builtin::Artanh => "artanh",
            Builtin::Acos => "acos",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Min => "min",
            Builtin::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|b| b.name() == name)
    }

    /// `(min, max)` accepted argument counts.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Builtin::Min | Builtin::Max => (2, usize::MAX),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    /// Index into the expression's variable signature.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Builtin, Vec<Node>),
    If {
        lhs: Box<Node>,
        cmp: CmpOp,
        rhs: Box<Node>,
        then: Box<Node>,
        other: Box<Node>,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Num(_) | Node::Var(_) => 1,
            Node::Neg(a) => 1 + a.depth(),
            Node::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
            Node::Call(_, args) => 1 + args.iter().map(Node::depth).max().unwrap_or(0),
            Node::If {
                lhs,
                rhs,
                then,
                other,
                ..
            } => 1 + lhs.depth().max(rhs.depth()).max(then.depth()).max(other.depth()),
        }
    }

    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Node::Num(c) => *c,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars)?,
            Node::Bin(op, a, b) => {
                let x = a.eval(vars)?;
                let y = b.eval(vars)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::domain("division by zero", &[x, y]));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        if x == 0.0 && y < 0.0 {
                            return Err(EvalError::domain("zero to a negative power", &[x, y]));
                        }
                        if x < 0.0 && y.fract() != 0.0 {
                            return Err(EvalError::domain(
                                "negative base with non-integer exponent",
                                &[x, y],
                            ));
                        }
                        pow(x, y)
                    }
                }
            }
            Node::Call(f, args) => {
                let x = args[0].eval(vars)?;
                match f {
                    Builtin::Exp => x.exp(),
                    Builtin::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::domain("log of nonpositive value", &[x]));
                        }
                        x.ln()
                    }
                    Builtin::Sin => x.sin(),
                    Builtin::Cos => x.cos(),
                    Builtin::Tanh => x.tanh(),
                    Builtin::Artanh => {
                        if x.abs() >= 1.0 {
                            return Err(EvalError::domain("artanh outside (-1, 1)", &[x]));
                        }
                        x.atanh()
                    }
                    Builtin::Acos => {
                        // Rounding can push unit-sphere coordinates just past ±1.
                        if x.abs() > 1.0 + 1e-12 {
                            return Err(EvalError::domain("acos outside [-1, 1]", &[x]));
                        }
                        x.clamp(-1.0, 1.0).acos()
                    }
                    Builtin::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::domain("sqrt of negative value", &[x]));
                        }
                        x.sqrt()
                    }
                    Builtin::Abs => x.abs(),
                    Builtin::Min | Builtin::Max => {
                        let mut acc = x;
                        for a in &args[1..] {
                            let y = a.eval(vars)?;
                            acc = if *f == Builtin::Min { acc.min(y) } else { acc.max(y) };
                        }
                        acc
                    }
                }
            }
            Node::If {
                lhs,
                cmp,
                rhs,
                then,
                other,
            } => {
                let a = lhs.eval(vars)?;
                let b = rhs.eval(vars)?;
                if cmp.holds(a, b) {
                    then.eval(vars)?
                } else {
                    other.eval(vars)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::non_finite(v))
        }
    }

    /// Replaces every `Var(i)` with `subs[i]`.
    pub fn substitute(&self, subs: &[Node]) -> Node {
        match self {
            Node::Num(c) => Node::Num(*c),
            Node::Var(i) => subs[*i].clone(),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(subs))),
            Node::Bin(op, a, b) => {
                Node::Bin(*op, Box::new(a.substitute(subs)), Box::new(b.substitute(subs)))
            }
            Node::Call(f, args) => Node::Call(*f, args.iter().map(|a| a.substitute(subs)).collect()),
            Node::If {
                lhs,
                cmp,
                rhs,
                then,
                other,
            } => Node::If {
                lhs: Box::new(lhs.substitute(subs)),
                cmp: *cmp,
                rhs: Box::new(rhs.substitute(subs)),
                then: Box::new(then.substitute(subs)),
                other: Box::new(other.substitute(subs)),
            },
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Node::Num(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) => a.max_var(),
            Node::Bin(_, a, b) => a.max_var().max(b.max_var()),
            Node::Call(_, args) => args.iter().filter_map(Node::max_var).max(),
            Node::If {
                lhs,
                rhs,
                then,
                other,
                ..
            } => [lhs, rhs, then, other].iter().filter_map(|n| n.max_var()).max(),
        }
    }

    pub(crate) fn write(&self, f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
        match self {
            Node::Num(c) => write!(f, "{c}"),
            Node::Var(i) => f.write_str(&names[*i]),
            Node::Neg(a) => {
                f.write_str("-(")?;
                a.write(f, names)?;
                f.write_str(")")
            }
            Node::Bin(op, a, b) => {
                f.write_str("(")?;
                a.write(f, names)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f, names)?;
                f.write_str(")")
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(f, names)?;
                }
                f.write_str(")")
            }
            Node::If {
                lhs,
                cmp,
                rhs,
                then,
                other,
            } => {
                f.write_str("if(")?;
                lhs.write(f, names)?;
                write!(f, " {} ", cmp.symbol())?;
                rhs.write(f, names)?;
                f.write_str(", ")?;
                then.write(f, names)?;
                f.write_str(", ")?;
                other.write(f, names)?;
                f.write_str(")")
            }
        }
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}
