//! Dense symmetric eigenvalues, definiteness, Schur complements and the
//! Lyapunov equation.

use dissipacert::matcore::{
    definiteness, general_eigenvalues, lyapunov_residual, lyapunov_solve, psd_factor, schur_reduce, sym_eigen,
    SymMatrix,
};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = SymMatrix::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, -0.2], vec![0.5, -0.2, 1.0]])?;
    let eig = sym_eigen(&m)?;
    println!("eigenvalues {:?}", eig.values);
    println!(
        "trace {} vs sum {}",
        m.as_matrix().trace(),
        eig.values.iter().sum::<f64>()
    );
    println!("{:?}", definiteness(&m, 1e-9)?.verdict);

    let f = psd_factor(&m, 1e-12)?;
    println!("‖FᵀF − M‖ = {:e}", (f.transpose() * &f - m.as_matrix()).norm());

    // a negative definite block matrix and its Schur complement on the first block
    let n = SymMatrix::from_rows(&[vec![-2.0, 0.5, 0.3], vec![0.5, -1.0, 0.1], vec![0.3, 0.1, -0.5]])?;
    println!("schur {:?}", schur_reduce(&n, 2, 1e-9)?.to_rows());

    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
    let q = SymMatrix::identity(2);
    let p = lyapunov_solve(&a, &q)?;
    println!("P {:?}, residual {:e}", p.to_rows(), lyapunov_residual(&a, &p, &q));
    println!("spectrum of A {:?}", general_eigenvalues(&a)?);
    Ok(())
}
