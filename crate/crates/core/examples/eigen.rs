//! Smallest end-to-end use of the library: build a coupling family, truncate
//! the transfer operator at finite memory, and certify its leading eigenpair.
//!
//! Run with `cargo run -p dysonfk --example eigen`.

use dysonfk::couplings::CouplingFamily;
use dysonfk::transfer::TransferMatrix;

fn main() -> Result<(), dysonfk::Error> {
    let family = CouplingFamily::dyson(2.0, 0.3)?;
    let matrix = TransferMatrix::new(&family, 6)?;
    let pair = matrix.leading_eigenpair(1e-10, 10_000)?;
    assert!(pair.lambda > 2.0 && pair.converged);
    println!(
        "m = {}: lambda = {:.12} in [{:.12}, {:.12}] after {} iterations",
        pair.m, pair.lambda, pair.lambda_lower, pair.lambda_upper, pair.iterations
    );
    Ok(())
}
