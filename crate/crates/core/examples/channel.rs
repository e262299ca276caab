//! Exterior energy of the pure growing mode against its closed-form shell integral.

use critwave::channel::{channel_verify_linear, ChannelConfig};
use critwave::error::Result;
use critwave::grid::{RadialGrid, State};
use critwave::potential::{Potential, PotentialFamily};
use critwave::spectral::{linearize, negative_spectrum};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    let grid = RadialGrid::new(80.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    let excited = states.iter().find(|s| s.nodes == 1 && s.center() > 0.0).expect("excited state");
    let spectrum = negative_spectrum(&linearize(&potential, excited)?)?;
    let reports = channel_verify_linear(&potential, excited, &spectrum, &[1.0], &[0.0], &State::zeros(grid), &ChannelConfig::default())?;
    for r in &reports {
        println!(
            "R = {}: ratio {:.5e}, doubled window {:.5e}, closed form {:?}, error {:?}, {:?}",
            r.offset, r.ratio, r.ratio_doubled, r.closed_form, r.closed_form_error, r.verdict
        );
    }
    Ok(())
}
