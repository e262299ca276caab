//! Unstable spectrum of the one-node excited state: eigenvalues, tail fits, hyperbolicity.

use critwave::error::Result;
use critwave::grid::RadialGrid;
use critwave::potential::{Potential, PotentialFamily};
use critwave::spectral::{default_window, hyperbolicity_check, linearize, meshkov_fit, negative_spectrum};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    let grid = RadialGrid::new(80.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    for state in states.iter().filter(|s| s.converged && s.center() > 0.0) {
        let op = linearize(&potential, state)?;
        let spectrum = negative_spectrum(&op)?;
        let report = hyperbolicity_check(&op, &spectrum);
        println!("{}: {} negative eigenvalue(s), hyperbolic = {}", state.label(), spectrum.count(), report.pass);
        for i in 0..spectrum.count() {
            let fit = meshkov_fit(&spectrum, i, default_window(&grid))?;
            println!(
                "  mode {i}: eigenvalue {:.8}, k = {:.7}, fitted k = {:.7}, c = {:.5}",
                spectrum.eigenvalues[i],
                spectrum.rate(i),
                fit.k_hat,
                fit.c_hat
            );
        }
    }
    Ok(())
}
