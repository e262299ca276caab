//! Lorentz norms of closed-form profiles under refinement and a small Strichartz ensemble.

use critwave::diagnostics::{lorentz_refinement, lpp_consistency, strichartz_ensemble, EnsembleConfig};
use critwave::error::Result;
use critwave::grid::RadialGrid;
use critwave::potential::{Potential, PotentialFamily};
use critwave::spectral::{linearize, negative_spectrum};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    for check in lorentz_refinement(&[1000, 4000, 16000], 1e-3)? {
        println!("{}: exact {:.8}, errors {:?}, pass {}", check.label, check.exact, check.relative_errors, check.pass);
    }
    println!("max |L^(p,p) - L^p| / L^p = {:.2e}", lpp_consistency(20, 3)?);

    let grid = RadialGrid::new(40.0, 2048)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    let excited = states.iter().find(|s| s.nodes == 1 && s.center() > 0.0).expect("excited state");
    let spectrum = negative_spectrum(&linearize(&potential, excited)?)?;
    let report = strichartz_ensemble(&potential, excited, &spectrum, &EnsembleConfig { draws: 10, ..EnsembleConfig::default() })?;
    println!("reversed Strichartz ratio over {} draws: max {:.4}, mean {:.4}", report.ratios.len(), report.max, report.mean);
    Ok(())
}
