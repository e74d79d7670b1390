//! Parse expressions over x1..xn, differentiate exactly, and compare with
//! finite differences.

use dissipacert::expr::{self, gradient, VectorField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let v = expr::parse("0.5*x1^2 + cos(x2)*x1 + exp(-x2^2)", 2)?;
    let g = gradient(&v, 2);
    let x = [0.3, -1.1];
    let exact = g.eval(&x)?;
    let h = 1e-6;
    for i in 0..2 {
        let mut up = x;
        let mut dn = x;
        up[i] += h;
        dn[i] -= h;
        let fd = (v.eval(&up)? - v.eval(&dn)?) / (2.0 * h);
        println!("∂V/∂x{} = {}  (exact {}, fd {fd})", i + 1, g.exprs[i], exact[i]);
    }

    let f = VectorField::parse(&["-x1 + x2", "-sin(x1) - x2"], 2)?;
    let jac = expr::jacobian(&f, 2);
    println!("jacobian at x: {}", jac.eval(&x)?);

    match expr::parse("x1 + * x2", 2) {
        Ok(_) => unreachable!(),
        Err(e) => println!("parse error at byte {}: {}", e.offset, e.kind),
    }
    Ok(())
}
