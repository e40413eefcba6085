use kgs_core::electronic::{lowest_eigenpairs, ElectronicOperator};
use kgs_core::grid::make_grid;
use kgs_core::model::{sample_potential, PotentialSpec};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let grid = make_grid(n, 12.0).unwrap();
    let v = sample_potential(&PotentialSpec::Harmonic { omega0: 1.0 }, grid).unwrap();
    let op = ElectronicOperator::new(grid, v).unwrap();
    let t0 = std::time::Instant::now();
    match lowest_eigenpairs(&op, 5, 1e-8, 42) {
        Ok(eig) => println!(
            "values = {:?} residuals = {:?} in {:?}",
            eig.values, eig.residuals, t0.elapsed()
        ),
        Err(e) => println!("failed: {e} after {:?}", t0.elapsed()),
    }
}
