use super::{Expr, Func};

/// Exact derivative of `e` with respect to the zero-based variable `i`.
///
/// Results are constant-folded (`0·e → 0`, `1·e → e`, literal arithmetic)
/// but otherwise left unsimplified.
pub fn diff(e: &Expr, i: usize) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(j) => Expr::Num(if *j == i { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff(a, i)),
        Expr::Add(a, b) => add(diff(a, i), diff(b, i)),
        Expr::Sub(a, b) => sub(diff(a, i), diff(b, i)),
        Expr::Mul(a, b) => add(mul(diff(a, i), (**b).clone()), mul((**a).clone(), diff(b, i))),
        Expr::Div(a, b) => {
            let da = diff(a, i);
            let db = diff(b, i);
            if is_zero(&db) {
                return div(da, (**b).clone());
            }
            div(
                sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                pow((**b).clone(), 2),
            )
        }
        Expr::Pow(a, k) => mul(mul(Expr::Num(f64::from(*k)), pow((**a).clone(), k - 1)), diff(a, i)),
        Expr::Call(f, a) => {
            let inner = diff(a, i);
            if is_zero(&inner) {
                return Expr::Num(0.0);
            }
            let arg = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, arg),
                Func::Cos => neg(call(Func::Sin, arg)),
                Func::Exp => call(Func::Exp, arg),
                Func::Tanh => sub(Expr::Num(1.0), pow(call(Func::Tanh, arg), 2)),
            };
            mul(outer, inner)
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(c) if *c == 1.0)
}

fn num(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(c) => Some(*c),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::Num(0.0);
    }
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        _ if is_one(&a) => b,
        _ if is_one(&b) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (num(&a), num(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Num(x / y),
        _ if is_zero(&a) => Expr::Num(0.0),
        _ if is_one(&b) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::Num(1.0),
        1 => a,
        _ => match num(&a) {
            Some(c) if c.powi(k).is_finite() => Expr::Num(c.powi(k)),
            _ => Expr::Pow(Box::new(a), k),
        },
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}
