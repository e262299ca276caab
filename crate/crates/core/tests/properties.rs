use critwave::config::{with_prerequisites, ExperimentConfig, Stage};
use critwave::evolution::{evolve, EvolveConfig, FlowKind};
use critwave::grid::{Field, RadialGrid, State};
use critwave::norms::{lorentz_norm, lp_norm};
use critwave::potential::{Potential, PotentialFamily};
use proptest::prelude::*;

fn bump(grid: RadialGrid, amplitude: f64, center: f64, width: f64) -> Field {
    Field::from_fn(grid, |r| {
        let x = (r - center) / width;
        if x.abs() < 1.0 {
            amplitude * (1.0 - x * x).powi(4)
        } else {
            0.0
        }
    })
    .unwrap()
}

fn cell_volumes(grid: &RadialGrid) -> Vec<f64> {
    let half = 0.5 * grid.dr();
    (0..=grid.n())
        .map(|j| {
            let lo = (grid.r(j) - half).max(0.0);
            let hi = (grid.r(j) + half).min(grid.r_max());
            4.0 * std::f64::consts::PI / 3.0 * (hi.powi(3) - lo.powi(3))
        })
        .collect()
}

fn short_run(t_end: f64) -> EvolveConfig {
    EvolveConfig { t_end, record_every: 16, ..EvolveConfig::default() }
}

fn sample_field() -> impl Strategy<Value = Field> {
    prop::collection::vec(-2.0f64..2.0, 65).prop_map(|vals| {
        let grid = RadialGrid::new(8.0, 64).unwrap();
        Field::new(grid, vals).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nonlinear_energy_is_conserved(
        v0 in 0.0f64..25.0,
        amplitude in -0.8f64..0.8,
        center in 2.0f64..5.0,
        width in 1.0f64..2.5,
    ) {
        let grid = RadialGrid::new(16.0, 256).unwrap();
        let pot = Potential::from_family(PotentialFamily::Algebraic { v0, s: 2.0 }, grid).unwrap();
        let data = State::at_rest(bump(grid, amplitude, center, width));
        let traj = evolve(&data, &pot, None, None, &short_run(4.0)).unwrap();
        prop_assert!(traj.energy_drift() < 1e-9, "drift {}", traj.energy_drift());
    }

    #[test]
    fn nonlinear_flow_is_odd(
        amplitude in 0.05f64..1.0,
        center in 2.0f64..5.0,
    ) {
        let grid = RadialGrid::new(16.0, 256).unwrap();
        let pot = Potential::from_family(PotentialFamily::Bump { v0: 10.0, a: 3.0 }, grid).unwrap();
        let data = State::at_rest(bump(grid, amplitude, center, 1.5));
        let cfg = short_run(3.0);
        let plus = evolve(&data, &pot, None, None, &cfg).unwrap();
        let minus = evolve(&data.scaled(-1.0), &pot, None, None, &cfg).unwrap();
        for (a, b) in plus.positions.frames().iter().zip(minus.positions.frames()) {
            prop_assert!(a.add(b).unwrap().max_abs() <= 1e-13 * a.max_abs().max(1.0));
        }
    }

    #[test]
    fn free_flow_respects_finite_speed(center in 4.0f64..6.0, t_end in 0.5f64..2.0) {
        let grid = RadialGrid::new(16.0, 512).unwrap();
        let pot = Potential::zero(grid);
        let data = State::at_rest(bump(grid, 1.0, center, 1.0));
        let cfg = EvolveConfig { flow: FlowKind::Free, ..short_run(t_end) };
        let traj = evolve(&data, &pot, None, None, &cfg).unwrap();
        let last = traj.positions.frames().last().unwrap();
        // the leapfrog stencil moves one cell per step
        let reach = center + 1.0 + traj.final_time() / cfg.cfl + 2.0 * grid.dr();
        let outside = (0..=grid.n()).filter(|&j| grid.r(j) > reach).map(|j| last.values()[j].abs());
        prop_assert!(outside.fold(0.0, f64::max) == 0.0);
    }

    #[test]
    fn lorentz_diagonal_matches_cellwise_lebesgue(f in sample_field(), p in 1.0f64..8.0) {
        let lor = lorentz_norm(&f, p, p).unwrap();
        let vols = cell_volumes(f.grid());
        let leb = f.values().iter().zip(&vols).map(|(x, w)| x.abs().powf(p) * w).sum::<f64>().powf(1.0 / p);
        prop_assert!((lor - leb).abs() <= 1e-10 * leb.max(1e-300));
    }

    #[test]
    fn lorentz_is_homogeneous(f in sample_field(), s in -5.0f64..5.0, p in 1.5f64..6.0, q in 1.0f64..10.0) {
        let scaled = lorentz_norm(&f.scaled(s), p, q).unwrap();
        let base = lorentz_norm(&f, p, q).unwrap();
        prop_assert!((scaled - s.abs() * base).abs() <= 1e-10 * base.max(1e-300));
    }

    #[test]
    fn lorentz_of_indicator_is_closed_form(
        mask in prop::collection::vec(any::<bool>(), 65),
        level in 0.01f64..4.0,
        p in 1.0f64..8.0,
        q in prop_oneof![1.0f64..12.0, Just(f64::INFINITY)],
    ) {
        let grid = RadialGrid::new(8.0, 64).unwrap();
        let vals: Vec<f64> = mask.iter().map(|&on| if on { level } else { 0.0 }).collect();
        let f = Field::new(grid, vals).unwrap();
        let measure: f64 = cell_volumes(&grid).iter().zip(&mask).filter(|(_, on)| **on).map(|(w, _)| w).sum();
        let factor = if q.is_infinite() { 1.0 } else { (p / q).powf(1.0 / q) };
        let expected = factor * level * measure.powf(1.0 / p);
        let got = lorentz_norm(&f, p, q).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300), "{} vs {}", got, expected);
    }

    #[test]
    fn lebesgue_triangle_inequality(f in sample_field(), g in sample_field(), p in 1.0f64..8.0) {
        let lhs = lp_norm(&f.add(&g).unwrap(), p).unwrap();
        let rhs = lp_norm(&f, p).unwrap() + lp_norm(&g, p).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn reduced_profile_roundtrips(f in sample_field()) {
        let back = Field::from_reduced(*f.grid(), &f.reduced());
        for j in 1..=f.grid().n() {
            prop_assert!((back.values()[j] - f.values()[j]).abs() <= 1e-12 * f.values()[j].abs().max(1.0));
        }
    }

    #[test]
    fn interpolation_is_exact_at_nodes(f in sample_field(), j in 0usize..=64) {
        let r = f.grid().r(j);
        prop_assert_eq!(f.interpolate(r), f.values()[j]);
    }

    #[test]
    fn axpy_is_linear(f in sample_field(), g in sample_field(), s in -3.0f64..3.0) {
        let h = f.axpy(s, &g).unwrap();
        for j in 0..=f.grid().n() {
            prop_assert!((h.values()[j] - (f.values()[j] + s * g.values()[j])).abs() <= 1e-15 * 8.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prerequisites_are_closed(mask in 0u16..1024) {
        let picked: Vec<Stage> = Stage::ALL.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| *s).collect();
        let closed = with_prerequisites(&picked);
        for s in &picked {
            prop_assert!(closed.contains(s));
        }
        for s in &closed {
            for req in s.requires() {
                prop_assert!(closed.contains(req));
            }
        }
        prop_assert_eq!(with_prerequisites(&closed), closed);
    }

    #[test]
    fn valid_configs_roundtrip(
        seed in 0..i64::MAX as u64,
        n in 64usize..8192,
        r_max in 10.0f64..200.0,
        cfl in 0.05f64..0.9,
        v0 in 0.0f64..100.0,
    ) {
        let mut cfg = ExperimentConfig { seed, potential: PotentialFamily::Algebraic { v0, s: 2.0 }, ..ExperimentConfig::default() };
        cfg.grid.n = n;
        cfg.grid.r_max = r_max;
        cfg.evolve.cfl = cfl;
        prop_assert!(cfg.validate().is_ok());
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn seeds_beyond_toml_range_are_rejected(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
        prop_assert!(cfg.validate().unwrap_err().to_string().contains("seed"));
    }

    #[test]
    fn bad_cfl_is_named_in_diagnostics(cfl in prop_oneof![-1.0f64..=0.0, 1.0f64..5.0]) {
        let mut cfg = ExperimentConfig::default();
        cfg.evolve.cfl = cfl;
        let msg = cfg.validate().unwrap_err().to_string();
        prop_assert!(msg.contains("evolve.cfl"), "{}", msg);
    }
}
