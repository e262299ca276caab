//! Push an on-manifold solution off the manifold and measure the extra exterior energy.

use critwave::channel::{one_pass_experiment, OnePassConfig};
use critwave::error::Result;
use critwave::grid::RadialGrid;
use critwave::manifold::{lp_shoot, CsData, ShootConfig};
use critwave::potential::{Potential, PotentialFamily};
use critwave::spectral::{linearize, negative_spectrum};
use critwave::steady::{find_steady_states, SteadySearch};

fn main() -> Result<()> {
    let grid = RadialGrid::new(80.0, 4096)?;
    let potential = Potential::from_family(PotentialFamily::Algebraic { v0: 20.0, s: 2.0 }, grid)?;
    let states = find_steady_states(&potential, &SteadySearch::default())?;
    let excited = states.iter().find(|s| s.nodes == 1 && s.center() > 0.0).expect("excited state").clone();
    let spectrum = negative_spectrum(&linearize(&potential, &excited)?)?;
    let cs = CsData::zero(&spectrum, grid);
    let base = lp_shoot(&cs, &potential, &excited, &spectrum, &ShootConfig::default())?;
    let report = one_pass_experiment(&excited, &potential, &spectrum, &states, &cs, &base, &[1e-5, 1e-6, 1e-7], &OnePassConfig::default())?;
    for run in &report.runs {
        println!(
            "delta {:.0e}: exit {:?}, rate {:?}, surplus {:?}, outcome {:?}",
            run.delta, run.exit_time, run.departure_rate, run.surplus, run.outcome
        );
    }
    println!("exit spacings {:?} (log(10)/k = {:.5})", report.exit_spacings, 10f64.ln() / spectrum.rate(0));
    println!("surplus spread {:?}", report.surplus_spread);
    Ok(())
}
