//! Function specs: a tiny expression language for test inputs.
//!
//! ```text
//! expr   := "1" | number
//!         | "Y" "(" int ["," axis] ")"
//!         | "mobius" "(" eta "," expr ")"
//!         | "scale" "(" number "," expr ")"
//!         | "sum" "(" expr {"," expr} ")"
//! axis, eta := number {"," number}      (d components)
//! ```

use std::fmt;
use std::sync::Arc;

use hwy_core::conformal::{act_on_ball_function, act_on_sphere_function, MobiusTransform};
use hwy_core::harmonics::zonal;
use hwy_core::quadrature::{Domain, GridFunction, QuadratureGrid};

use crate::error::{LabError, LabResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Harmonic { degree: usize, axis: Option<Vec<f64>> },
    Mobius { eta: Vec<f64>, inner: Box<Expr> },
    Scale { factor: f64, inner: Box<Expr> },
    Sum(Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, v: &[f64]| {
            v.iter().enumerate().try_for_each(|(i, x)| {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")
            })
        };
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Harmonic { degree, axis: None } => write!(f, "Y({degree})"),
            Expr::Harmonic { degree, axis: Some(a) } => {
                write!(f, "Y({degree},")?;
                list(f, a)?;
                write!(f, ")")
            }
            Expr::Mobius { eta, inner } => {
                write!(f, "mobius(")?;
                list(f, eta)?;
                write!(f, ",{inner})")
            }
            Expr::Scale { factor, inner } => write!(f, "scale({factor},{inner})"),
            Expr::Sum(terms) => {
                write!(f, "sum(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Open,
    Close,
    Comma,
}

fn lex(s: &str) -> LabResult<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Tok::Open);
                i += 1
            }
            ')' => {
                out.push(Tok::Close);
                i += 1
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1
            }
            _ if c.is_ascii_alphabetic() => {
                let st = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Tok::Ident(chars[st..i].iter().collect()));
            }
            _ if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let st = i;
                i += 1;
                while i < chars.len() {
                    let ch = chars[i];
                    let exp_sign = (ch == '-' || ch == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if ch.is_ascii_digit() || ch == '.' || ch == 'e' || ch == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let t: String = chars[st..i].iter().collect();
                let v = t.parse().map_err(|_| usage(format!("bad number {t:?}")))?;
                out.push(Tok::Num(v));
            }
            _ => return Err(usage(format!("unexpected character {c:?}"))),
        }
    }
    Ok(out)
}

fn usage(msg: String) -> LabError {
    LabError::Usage(format!("function spec: {msg}"))
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> LabResult<Tok> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| usage("unexpected end".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, t: Tok) -> LabResult<()> {
        let got = self.next()?;
        if got == t {
            Ok(())
        } else {
            Err(usage(format!("expected {t:?}, found {got:?}")))
        }
    }

    fn number(&mut self) -> LabResult<f64> {
        match self.next()? {
            Tok::Num(v) => Ok(v),
            t => Err(usage(format!("expected a number, found {t:?}"))),
        }
    }

    /// Numbers separated by commas, stopping before a non-number.
    fn numbers(&mut self) -> LabResult<Vec<f64>> {
        let mut v = vec![self.number()?];
        while self.peek() == Some(&Tok::Comma) && matches!(self.toks.get(self.pos + 1), Some(Tok::Num(_))) {
            self.pos += 1;
            v.push(self.number()?);
        }
        Ok(v)
    }

    fn expr(&mut self) -> LabResult<Expr> {
        match self.next()? {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Ident(name) => {
                self.expect(Tok::Open)?;
                let e = match name.as_str() {
                    "Y" => {
                        let l = self.number()?;
                        if l < 0.0 || l.fract() != 0.0 {
                            return Err(usage(format!("degree must be a nonnegative integer, got {l}")));
                        }
                        let axis = if self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            Some(self.numbers()?)
                        } else {
                            None
                        };
                        Expr::Harmonic {
                            degree: l as usize,
                            axis,
                        }
                    }
                    "mobius" => {
                        let mut eta = self.numbers()?;
                        // A numeric inner expression is swallowed by the list.
                        let inner = if self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            self.expr()?
                        } else if eta.len() >= 2 {
                            Expr::Const(eta.pop().unwrap())
                        } else {
                            return Err(usage("mobius needs a center and an expression".into()));
                        };
                        Expr::Mobius {
                            eta,
                            inner: Box::new(inner),
                        }
                    }
                    "scale" => {
                        let factor = self.number()?;
                        self.expect(Tok::Comma)?;
                        Expr::Scale {
                            factor,
                            inner: Box::new(self.expr()?),
                        }
                    }
                    "sum" => {
                        let mut terms = vec![self.expr()?];
                        while self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            terms.push(self.expr()?);
                        }
                        Expr::Sum(terms)
                    }
                    _ => return Err(usage(format!("unknown function {name:?}"))),
                };
                self.expect(Tok::Close)?;
                Ok(e)
            }
            t => Err(usage(format!("expected an expression, found {t:?}"))),
        }
    }
}

pub fn parse(s: &str) -> LabResult<Expr> {
    let mut p = Parser { toks: lex(s)?, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(usage(format!("trailing input after {e}")));
    }
    Ok(e)
}

impl Expr {
    /// Sample on a sphere grid (`Y(l)` is the spherical harmonic, `mobius`
    /// is `(·)_Ψ`) or a ball grid (`Y(l)` is the solid harmonic, `mobius`
    /// is `[·]_Φ`). Closed-form extensions are carried along.
    pub fn realize(&self, grid: &Arc<QuadratureGrid>) -> LabResult<GridFunction> {
        let dim = grid.dim();
        let d = dim.get();
        let check_len = |v: &[f64], what: &str| {
            if v.len() == d {
                Ok(())
            } else {
                Err(usage(format!("{what} needs {d} components, got {}", v.len())))
            }
        };
        match self {
            Expr::Const(c) => Ok(GridFunction::constant(grid, *c)),
            Expr::Harmonic { degree, axis } => {
                let mut a = vec![0.0; d];
                a[d - 1] = 1.0;
                if let Some(ax) = axis {
                    check_len(ax, "axis")?;
                    a.clone_from(ax);
                }
                let h = zonal(*degree, &a, dim)?;
                Ok(match grid.domain() {
                    Domain::Sphere => h.on_sphere(grid)?,
                    Domain::Ball => h.solid_on_ball(grid)?,
                })
            }
            Expr::Mobius { eta, inner } => {
                check_len(eta, "mobius center")?;
                let f = inner.realize(grid)?;
                let t = MobiusTransform::new(eta.clone(), grid.domain())?;
                Ok(match grid.domain() {
                    Domain::Sphere => act_on_sphere_function(&t, &f)?,
                    Domain::Ball => act_on_ball_function(&t, &f)?,
                })
            }
            Expr::Scale { factor, inner } => Ok(inner.realize(grid)?.scaled(*factor)),
            Expr::Sum(terms) => {
                let mut acc = terms[0].realize(grid)?;
                for t in &terms[1..] {
                    acc = acc.plus(&t.realize(grid)?)?;
                }
                Ok(acc)
            }
        }
    }
}
