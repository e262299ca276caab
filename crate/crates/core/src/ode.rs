//! Adaptive Dormand-Prince 5(4) integration of planar systems, sampled on a grid.

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Tolerances for the adaptive stepper.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-12, abs: 1e-14 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One trial step; returns the 5th-order solution and the error estimate.
fn trial(f: &impl Fn(f64, Vec2) -> Vec2, x: f64, y: Vec2, h: f64) -> (Vec2, Vec2) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut ys = y;
        for (p, kp) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][p] * kp[0];
            ys[1] += h * A[s][p] * kp[1];
        }
        k[s] = f(x + C[s] * h, ys);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for i in 0..2 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

/// Outcome of a grid-sampled integration.
#[derive(Debug, Clone)]
pub struct Sampled {
    /// States at the visited nodes, starting with the initial node.
    pub values: Vec<Vec2>,
    /// True when `stop` fired before the last node.
    pub stopped: bool,
}

/// Integrate `y' = f(x, y)` from `nodes[0]` through each later node.
///
/// Integration halts (with `stopped = true`) at the first accepted substep
/// where `stop(x, y)` holds; that state is recorded in place of the next node.
pub fn integrate_nodes(
    f: impl Fn(f64, Vec2) -> Vec2,
    nodes: &[f64],
    y0: Vec2,
    tol: Tolerance,
    stop: impl Fn(f64, Vec2) -> bool,
) -> Result<Sampled> {
    let mut values = Vec::with_capacity(nodes.len());
    values.push(y0);
    let mut y = y0;
    let mut h = nodes.get(1).map_or(1.0, |x1| x1 - nodes[0]);
    for w in nodes.windows(2) {
        let (mut x, x_end) = (w[0], w[1]);
        let mut guard = 0usize;
        while x < x_end {
            guard += 1;
            if guard > 100_000 {
                return Err(Error::Numerical(format!("step size collapse near x = {x}")));
            }
            let last = x + h >= x_end;
            let step = if last { x_end - x } else { h };
            let (y5, err) = trial(&f, x, y, step);
            if !(y5[0].is_finite() && y5[1].is_finite()) {
                if step < 1e-14 * x_end.abs().max(1.0) {
                    return Err(Error::Numerical(format!("non-finite solution at x = {x}")));
                }
                h = 0.25 * step;
                continue;
            }
            let scaled = err
                .iter()
                .zip(y.iter().zip(&y5))
                .map(|(e, (a, b))| (e / (tol.abs + tol.rel * a.abs().max(b.abs()))).powi(2))
                .sum::<f64>()
                .sqrt()
                / std::f64::consts::SQRT_2;
            if scaled <= 1.0 {
                x = if last { x_end } else { x + step };
                y = y5;
                if stop(x, y) {
                    values.push(y);
                    return Ok(Sampled { values, stopped: true });
                }
                let grow = if scaled == 0.0 { 5.0 } else { (0.9 * scaled.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || grow < 1.0 {
                    h = step * grow;
                }
            } else {
                h = step * (0.9 * scaled.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        values.push(y);
    }
    Ok(Sampled { values, stopped: false })
}
