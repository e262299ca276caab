//! Nonlinear evolution of a bump on top of the ground state, with energy and mode diagnostics.

use critwave::error::Result;
use critwave::evolution::{evolve, EvolveConfig};
use critwave::grid::{RadialGrid, State};
use critwave::manifold::smooth_bump;
use critwave::potential::{Potential, PotentialFamily};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    let grid = RadialGrid::new(60.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    let ground = states.iter().find(|s| s.nodes == 0 && s.center() > 0.0).expect("ground state");
    let data = State::at_rest(ground.profile.axpy(0.2, &smooth_bump(grid, 3.0, 3.0)?)?);
    let cfg = EvolveConfig { t_end: 20.0, record_every: 400, exterior_radii: vec![10.0], ..EvolveConfig::default() };
    let traj = evolve(&data, &potential, Some(ground), None, &cfg)?;
    for r in traj.records.iter().step_by(800) {
        println!("t = {:6.2}  energy = {:.12}  distance = {:.4e}  exterior(10) = {:.4e}", r.t, r.energy, r.distance, r.exterior[0]);
    }
    println!("status {:?}, relative energy drift {:.2e}", traj.status, traj.energy_drift());
    Ok(())
}
