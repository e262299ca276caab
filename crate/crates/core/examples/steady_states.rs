//! Find every radial steady state of an algebraic well and print a summary table.

use critwave::error::Result;
use critwave::grid::RadialGrid;
use critwave::potential::{Potential, PotentialFamily};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    let grid = RadialGrid::new(80.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    println!("{:>7} {:>12} {:>6} {:>14} {:>12} {:>10}", "state", "center", "nodes", "energy", "tail", "residual");
    for s in &states {
        println!(
            "{:>7} {:>12.6} {:>6} {:>14.8} {:>12.6} {:>10.2e}",
            s.label(),
            s.center(),
            s.nodes,
            s.energy,
            s.tail_coeff,
            s.residual
        );
    }
    Ok(())
}
