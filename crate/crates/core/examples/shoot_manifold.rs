//! Solve the stability condition for a few unstable-mode amplitudes and compare with bisection.

use critwave::error::Result;
use critwave::grid::{RadialGrid, State};
use critwave::manifold::{bisection_oracle, lp_shoot, CsData, OracleConfig, ShootConfig};
use critwave::potential::{Potential, PotentialFamily};
use critwave::spectral::{linearize, negative_spectrum};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    let grid = RadialGrid::new(80.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    let excited = states.iter().find(|s| s.nodes == 1 && s.center() > 0.0).expect("excited state");
    let spectrum = negative_spectrum(&linearize(&potential, excited)?)?;
    let k = spectrum.rate(0);
    for lambda in [-2e-4, 1e-4, 3e-4] {
        let cs = CsData::new(&spectrum, vec![lambda], State::zeros(grid))?;
        let shot = lp_shoot(&cs, &potential, excited, &spectrum, &ShootConfig::default())?;
        let oracle = bisection_oracle(&cs, &potential, excited, &spectrum, &OracleConfig::default())?;
        println!(
            "lambda {lambda:+.1e}: shoot {:+.10e} ({} iterates, converged {}), oracle {:+.10e}, linear {:+.10e}",
            shot.lambda_dots[0],
            shot.history.len(),
            shot.converged,
            oracle,
            -k * lambda
        );
    }
    Ok(())
}
