//! Scattered-field FDTD for the 2D TM Maxwell system.
//!
//! Unknowns live on a Yee grid: `Ez` at nodes `(i, j)`, `Hx` at `(i, j+1/2)`,
//! `Hy` at `(i+1/2, j)`, with `E` at integer and `H` at half-integer steps.
//! Only the scattered field is stepped; the incident plane wave enters
//! analytically through the polarization source `-(eps-1) dEinc/dt` inside
//! dielectrics, and a first-order Mur condition absorbs the scattered field at
//! the outer boundary. Returned states are total fields co-located at the
//! nodes and at integer steps.

use super::{Component, FieldState, FullOrderSolver, IncidentWave, SolverConfig};
use crate::error::{Error, Result};

/// Uniform node grid covering `[-w, w]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Nodes per side.
    pub n: usize,
    pub dx: f64,
    pub origin: f64,
}

impl Grid {
    pub fn from_config(config: &SolverConfig) -> Self {
        let width = 2.0 * config.domain_half_width;
        let target = config.wavelength() / config.grid_points_per_wavelength as f64;
        let cells = (width / target).ceil().max(2.0) as usize;
        Self {
            n: cells + 1,
            dx: width / cells as f64,
            origin: -config.domain_half_width,
        }
    }

    pub fn dofs(&self) -> usize {
        self.n * self.n
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx
    }

    /// Flat node index, `x` fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Node nearest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let clamp = |v: f64| {
            (((v - self.origin) / self.dx).round().max(0.0) as usize).min(self.n - 1)
        };
        self.index(clamp(x), clamp(y))
    }

    /// Node indices along the row closest to `y`, ordered by `x`.
    pub fn row(&self, y: f64) -> Vec<usize> {
        let j = self.nearest(0.0, y) / self.n;
        (0..self.n).map(|i| self.index(i, j)).collect()
    }

    /// 2D Courant limit for c = 1.
    pub fn stable_dt(&self) -> f64 {
        self.dx / std::f64::consts::SQRT_2
    }
}

#[derive(Debug, Clone)]
pub struct FdtdSolver {
    config: SolverConfig,
    grid: Grid,
    dt: f64,
    steps_per_period: usize,
}

impl FdtdSolver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::from_config(&config);
        let dt_max = config.cfl_factor * grid.stable_dt();
        let steps_per_period = match config.steps_per_period {
            Some(spp) => spp,
            None => (config.period() / dt_max).ceil() as usize,
        };
        let dt = config.period() / steps_per_period as f64;
        if dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "CFL violation: dt = {dt:.6e} exceeds the stable step {dt_max:.6e} \
                 ({steps_per_period} steps per period)"
            )));
        }
        Ok(Self {
            config,
            grid,
            dt,
            steps_per_period,
        })
    }

    /// Smallest stable number of steps per period that is a multiple of `samples`.
    pub fn steps_per_period_for(config: &SolverConfig, samples: usize) -> usize {
        let grid = Grid::from_config(config);
        let min = (config.period() / (config.cfl_factor * grid.stable_dt())).ceil() as usize;
        let samples = samples.max(1);
        min.div_ceil(samples) * samples
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_per_period(&self) -> usize {
        self.steps_per_period
    }

    pub fn total_steps(&self) -> usize {
        self.config.num_periods * self.steps_per_period
    }

    /// Step index of `t`, or an error when `t` is off-grid or outside `[0, T_f]`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let total = self.total_steps();
        let exact = t / self.dt;
        let tol = 1e-9 * (total as f64).max(1.0);
        if !(exact >= -tol && exact <= total as f64 + tol) {
            return Err(Error::Validation(format!(
                "requested time {t} outside the simulated window [0, {}]",
                self.config.final_time()
            )));
        }
        let step = exact.round();
        if (exact - step).abs() > tol {
            return Err(Error::Validation(format!(
                "requested time {t} is not a multiple of the time step {}",
                self.dt
            )));
        }
        Ok(step as usize)
    }

    fn permittivity_map(&self, theta: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut eps = vec![1.0; g.dofs()];
        for j in 0..g.n {
            for i in 0..g.n {
                eps[g.index(i, j)] =
                    self.config
                        .geometry
                        .permittivity_at(g.coord(i), g.coord(j), theta);
            }
        }
        eps
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.config.geometry.layer_count() {
            return Err(Error::Validation(format!(
                "parameter vector has {} entries, geometry has {} layers",
                theta.len(),
                self.config.geometry.layer_count()
            )));
        }
        if theta.iter().any(|e| !(e.is_finite() && *e >= 1.0)) {
            return Err(Error::Validation(format!(
                "parameter vector {theta:?} must contain permittivities >= 1"
            )));
        }
        Ok(())
    }

    fn march(&self, theta: &[f64], times: &[f64]) -> Result<Vec<FieldState>> {
        let steps = times
            .iter()
            .map(|&t| self.step_of(t))
            .collect::<Result<Vec<_>>>()?;
        let Some(&last) = steps.iter().max() else {
            return Ok(Vec::new());
        };

        let g = &self.grid;
        let n = g.n;
        let dt = self.dt;
        let dx = g.dx;
        let c = dt / dx;
        let mur = (dt - dx) / (dt + dx);
        let wave = self.config.incident();

        let eps = self.permittivity_map(theta);
        let inv_eps: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
        // (node, x, (eps - 1) / eps) for every dielectric node
        let sources: Vec<(usize, f64, f64)> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter_map(|(i, j)| {
                let k = g.index(i, j);
                (eps[k] != 1.0).then(|| (k, g.coord(i), (eps[k] - 1.0) / eps[k]))
            })
            .collect();

        let mut ez = vec![0.0; n * n];
        let mut hx = vec![0.0; n * (n - 1)]; // (i, j+1/2) at j * n + i
        let mut hy = vec![0.0; (n - 1) * n]; // (i+1/2, j) at j * (n-1) + i
        let mut hx_prev = hx.clone();
        let mut hy_prev = hy.clone();
        let mut edge_old = vec![0.0; 8 * n];

        let mut recorded: Vec<Option<FieldState>> = vec![None; times.len()];
        let mut wanted: Vec<Vec<usize>> = vec![Vec::new(); last + 1];
        for (slot, &s) in steps.iter().enumerate() {
            wanted[s].push(slot);
        }

        for step in 0..=last {
            let sample = !wanted[step].is_empty();
            if sample {
                hx_prev.copy_from_slice(&hx);
                hy_prev.copy_from_slice(&hy);
            }

            // H^{n+1/2}
            for j in 0..n - 1 {
                for i in 0..n {
                    hx[j * n + i] -= c * (ez[(j + 1) * n + i] - ez[j * n + i]);
                }
            }
            for j in 0..n {
                for i in 0..n - 1 {
                    hy[j * (n - 1) + i] += c * (ez[j * n + i + 1] - ez[j * n + i]);
                }
            }

            if sample {
                let t = step as f64 * dt;
                let state = self.colocate(&wave, t, &ez, &hx_prev, &hx, &hy_prev, &hy);
                if !state.is_finite() {
                    return Err(Error::Instability {
                        step,
                        detail: "non-finite field in recorded snapshot".into(),
                    });
                }
                for &slot in &wanted[step] {
                    recorded[slot] = Some(state.clone());
                }
            }
            if step == last {
                break;
            }

            // Mur needs boundary and first interior ring at E^n.
            for i in 0..n {
                edge_old[i] = ez[i];
                edge_old[n + i] = ez[n + i];
                edge_old[2 * n + i] = ez[(n - 1) * n + i];
                edge_old[3 * n + i] = ez[(n - 2) * n + i];
                edge_old[4 * n + i] = ez[i * n];
                edge_old[5 * n + i] = ez[i * n + 1];
                edge_old[6 * n + i] = ez[i * n + n - 1];
                edge_old[7 * n + i] = ez[i * n + n - 2];
            }

            // E^{n+1} interior
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let k = j * n + i;
                    let curl = (hy[j * (n - 1) + i] - hy[j * (n - 1) + i - 1])
                        - (hx[j * n + i] - hx[(j - 1) * n + i]);
                    ez[k] += c * inv_eps[k] * curl;
                }
            }
            let t0 = step as f64 * dt;
            let t1 = t0 + dt;
            for &(k, x, weight) in &sources {
                ez[k] -= weight * (wave.ez(x, t1) - wave.ez(x, t0));
            }

            // Mur: bottom/top edges (interior i), then left/right edges (all j)
            for i in 1..n - 1 {
                ez[i] = edge_old[n + i] + mur * (ez[n + i] - edge_old[i]);
                ez[(n - 1) * n + i] =
                    edge_old[3 * n + i] + mur * (ez[(n - 2) * n + i] - edge_old[2 * n + i]);
            }
            for j in 0..n {
                ez[j * n] = edge_old[5 * n + j] + mur * (ez[j * n + 1] - edge_old[4 * n + j]);
                ez[j * n + n - 1] =
                    edge_old[7 * n + j] + mur * (ez[j * n + n - 2] - edge_old[6 * n + j]);
            }

            if step % 64 == 63 && !ez.iter().all(|v| v.is_finite()) {
                return Err(Error::Instability {
                    step: step + 1,
                    detail: "non-finite Ez".into(),
                });
            }
        }

        Ok(recorded
            .into_iter()
            .map(|s| s.expect("every requested time maps to a visited step"))
            .collect())
    }

    /// Total fields at the nodes: H averaged over the adjacent half steps and
    /// the adjacent staggered positions.
    #[allow(clippy::too_many_arguments)]
    fn colocate(
        &self,
        wave: &IncidentWave,
        t: f64,
        ez: &[f64],
        hx_prev: &[f64],
        hx: &[f64],
        hy_prev: &[f64],
        hy: &[f64],
    ) -> FieldState {
        let g = &self.grid;
        let n = g.n;
        let mut state = FieldState::zeros(g.dofs(), t);
        let hx_at = |i: usize, j: usize| 0.5 * (hx_prev[j * n + i] + hx[j * n + i]);
        let hy_at = |i: usize, j: usize| 0.5 * (hy_prev[j * (n - 1) + i] + hy[j * (n - 1) + i]);
        for j in 0..n {
            for i in 0..n {
                let k = g.index(i, j);
                let (hx_inc, hy_inc, ez_inc) = wave.field(g.coord(i), g.coord(j), t);
                state.ez[k] = ez[k] + ez_inc;
                let hx_s = match j {
                    0 => hx_at(i, 0),
                    _ if j == n - 1 => hx_at(i, n - 2),
                    _ => 0.5 * (hx_at(i, j - 1) + hx_at(i, j)),
                };
                let hy_s = match i {
                    0 => hy_at(0, j),
                    _ if i == n - 1 => hy_at(n - 2, j),
                    _ => 0.5 * (hy_at(i - 1, j) + hy_at(i, j)),
                };
                state.hx[k] = hx_s + hx_inc;
                state.hy[k] = hy_s + hy_inc;
            }
        }
        state
    }
}

impl FullOrderSolver for FdtdSolver {
    fn dofs(&self) -> usize {
        self.grid.dofs()
    }

    fn parameter_dim(&self) -> usize {
        self.config.geometry.layer_count()
    }

    fn final_time(&self) -> f64 {
        self.config.final_time()
    }

    fn run(&self, theta: &[f64], times: &[f64]) -> Result<Vec<FieldState>> {
        self.check_theta(theta)?;
        self.march(theta, times)
    }
}

/// Relative L2 distance between the total field and the analytic incident wave
/// over nodes at least `margin` away from the boundary.
pub fn incident_mismatch(
    solver: &FdtdSolver,
    state: &FieldState,
    component: Component,
    margin: f64,
) -> f64 {
    let g = solver.grid();
    let wave = solver.config().incident();
    let (mut diff, mut norm) = (0.0, 0.0);
    for j in 0..g.n {
        for i in 0..g.n {
            let (x, y) = (g.coord(i), g.coord(j));
            if x.abs() > -g.origin - margin || y.abs() > -g.origin - margin {
                continue;
            }
            let (hx, hy, ez) = wave.field(x, y, state.time);
            let exact = match component {
                Component::Ez => ez,
                Component::Hx => hx,
                Component::Hy => hy,
            };
            let v = state.component(component)[g.index(i, j)];
            diff += (v - exact).powi(2);
            norm += exact * exact;
        }
    }
    if norm == 0.0 {
        diff.sqrt()
    } else {
        (diff / norm).sqrt()
    }
}
