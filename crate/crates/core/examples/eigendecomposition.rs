//! Diagonalize a random Hermitian matrix and take one unitary time step.

use adiacheck::linalg::{inner, norm, ComplexMatrix};
use adiacheck::{eigh, propagate_step};
use num_complex::Complex64;

fn main() -> adiacheck::Result<()> {
    let c = |re, im| Complex64::new(re, im);
    let h = ComplexMatrix::from_rows(&[
        &[c(1.0, 0.0), c(0.5, -0.2), c(0.0, 0.3)],
        &[c(0.5, 0.2), c(-0.4, 0.0), c(0.1, 0.0)],
        &[c(0.0, -0.3), c(0.1, 0.0), c(0.2, 0.0)],
    ])?;
    let eig = eigh(&h)?;
    println!("eigenvalues: {:?}", eig.values);
    println!("reconstruction residual: {:.2e}", eig.reconstruct().max_diff(&h));
    println!("smallest gap: {:.4}", eig.min_gap());

    let psi = eig.vectors[0].clone();
    let later = propagate_step(&h, 0.7, &psi)?;
    // An eigenvector only picks up the phase exp(-i e dt).
    let overlap = inner(&psi, &later);
    println!(
        "norm after step {:.15}, phase {:.6} (expected {:.6})",
        norm(&later),
        overlap.arg(),
        -0.7 * eig.values[0]
    );
    Ok(())
}
