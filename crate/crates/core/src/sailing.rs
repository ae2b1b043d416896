//! Stochastic sailing gridworld.
//!
//! A state is a grid position plus one of eight wind directions. Actions are
//! the eight compass moves. Each step the boat moves by the action vector plus
//! Gaussian drift (mild noise always, an extra vortex component with small
//! probability), is rounded to the nearest cell and clamped to the grid; the
//! wind then turns according to a fixed kernel. The target cell is absorbing
//! and pays 1 per step; elsewhere the reward is `d · |angle(wind, action)| / 45`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::mdp::{ActionId, GenerativeModel, StateId, TabularMdp, TabularMdpBuilder, Transition};

pub const NUM_DIRECTIONS: usize = 8;

/// Compass moves indexed clockwise from north in 45° steps.
pub const DIRECTIONS: [(i64, i64); NUM_DIRECTIONS] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// Wind turn kernel as `(offset in 45° steps, probability)`.
pub const WIND_SHIFTS: [(i64, f64); NUM_DIRECTIONS] = [
    (0, 0.3),
    (1, 0.2),
    (-1, 0.2),
    (2, 0.1),
    (-2, 0.1),
    (3, 0.04),
    (-3, 0.04),
    (4, 0.02),
];

/// Largest state count accepted by [`sailing_tabularize`].
pub const TABULARIZE_MAX_STATES: usize = 20_000;

/// Largest number of stored transitions accepted by [`sailing_tabularize`].
pub const TABULARIZE_MAX_ENTRIES: usize = 60_000_000;

/// Per-axis cell masses below this are dropped before renormalizing.
const AXIS_MASS_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SailingError {
    #[error("invalid sailing configuration: {0}")]
    Config(String),
    #[error("state id {id} is out of range for {num_states} states")]
    StateOutOfRange { id: usize, num_states: usize },
    #[error("position ({x}, {y}) or wind {wind} is outside the grid")]
    InvalidState { x: usize, y: usize, wind: usize },
    #[error("tabularizing would need {needed} {what}, limit is {limit}")]
    TooLarge {
        what: &'static str,
        needed: usize,
        limit: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SailingConfig {
    /// Cells per axis.
    pub grid_size: usize,
    /// Reward scale for the wind-angle term.
    pub d: f64,
    /// Standard deviation of the mild drift.
    pub sigma1: f64,
    /// Extra standard deviation added when a vortex occurs.
    pub sigma2: f64,
    /// Probability of a vortex on a step.
    pub vortex_p: f64,
    pub target: (usize, usize),
}

impl SailingConfig {
    /// Grid of the given size with the target at the center and the default
    /// noise levels `σ1 = 0.5`, `σ2 = 2`, `p = 0.05`, `d = 0.05`.
    pub fn new(grid_size: usize) -> Self {
        Self {
            grid_size,
            d: 0.05,
            sigma1: 0.5,
            sigma2: 2.0,
            vortex_p: 0.05,
            target: (grid_size / 2, grid_size / 2),
        }
    }

    pub fn num_states(&self) -> usize {
        self.grid_size * self.grid_size * NUM_DIRECTIONS
    }

    pub fn validate(&self) -> Result<(), SailingError> {
        let bad = |m: String| Err(SailingError::Config(m));
        if self.grid_size < 2 {
            return bad(format!("grid_size {} must be at least 2", self.grid_size));
        }
        if !(self.d >= 0.0 && 4.0 * self.d <= 1.0) {
            return bad(format!("d {} must satisfy 0 <= 4d <= 1", self.d));
        }
        if !(self.sigma1 >= 0.0 && self.sigma1.is_finite()) {
            return bad(format!("sigma1 {} must be finite and >= 0", self.sigma1));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 {} must be finite and >= 0", self.sigma2));
        }
        if !(0.0..=1.0).contains(&self.vortex_p) {
            return bad(format!("vortex_p {} must lie in [0, 1]", self.vortex_p));
        }
        if self.target.0 >= self.grid_size || self.target.1 >= self.grid_size {
            return bad(format!("target {:?} is outside the grid", self.target));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SailingState {
    pub x: usize,
    pub y: usize,
    pub wind: usize,
}

/// `id = (x · grid_size + y) · 8 + wind`.
pub fn sailing_encode(state: SailingState, cfg: &SailingConfig) -> Result<StateId, SailingError> {
    if state.x >= cfg.grid_size || state.y >= cfg.grid_size || state.wind >= NUM_DIRECTIONS {
        return Err(SailingError::InvalidState {
            x: state.x,
            y: state.y,
            wind: state.wind,
        });
    }
    Ok(encode_unchecked(state, cfg.grid_size))
}

pub fn sailing_decode(id: StateId, cfg: &SailingConfig) -> Result<SailingState, SailingError> {
    if id.0 >= cfg.num_states() {
        return Err(SailingError::StateOutOfRange {
            id: id.0,
            num_states: cfg.num_states(),
        });
    }
    Ok(decode_unchecked(id, cfg.grid_size))
}

#[inline]
fn encode_unchecked(s: SailingState, grid: usize) -> StateId {
    StateId((s.x * grid + s.y) * NUM_DIRECTIONS + s.wind)
}

#[inline]
fn decode_unchecked(id: StateId, grid: usize) -> SailingState {
    let wind = id.0 % NUM_DIRECTIONS;
    let cell = id.0 / NUM_DIRECTIONS;
    SailingState {
        x: cell / grid,
        y: cell % grid,
        wind,
    }
}

/// Smallest number of 45° steps between two compass directions, in `0..=4`.
#[inline]
pub fn angle_steps(a: usize, b: usize) -> usize {
    let diff = (a as i64 - b as i64).rem_euclid(NUM_DIRECTIONS as i64) as usize;
    diff.min(NUM_DIRECTIONS - diff)
}

/// Reward for taking `action` under `wind`: 1 at the target, otherwise
/// `d · |angle| / 45` with the angle in degrees.
#[inline]
pub fn sailing_reward(wind: usize, action: usize, cfg: &SailingConfig, at_target: bool) -> f64 {
    if at_target {
        1.0
    } else {
        cfg.d * angle_steps(wind, action) as f64
    }
}

#[inline]
fn turn_wind<R: Rng + ?Sized>(wind: usize, rng: &mut R) -> usize {
    let mut u: f64 = rng.gen();
    let mut offset = 0;
    for &(o, p) in &WIND_SHIFTS {
        offset = o;
        if u < p {
            break;
        }
        u -= p;
    }
    (wind as i64 + offset).rem_euclid(NUM_DIRECTIONS as i64) as usize
}

#[inline]
fn drift(pos: usize, step: i64, std: f64, noise: f64, grid: usize) -> usize {
    let x = pos as f64 + step as f64 + std * noise;
    x.round().clamp(0.0, (grid - 1) as f64) as usize
}

/// One step of the sailing dynamics from `state` under `action`.
pub fn sailing_sample<R: Rng + ?Sized>(
    state: SailingState,
    action: usize,
    cfg: &SailingConfig,
    rng: &mut R,
) -> (SailingState, f64) {
    let at_target = (state.x, state.y) == cfg.target;
    let reward = sailing_reward(state.wind, action, cfg, at_target);
    let wind = turn_wind(state.wind, rng);
    if at_target {
        return (SailingState { wind, ..state }, reward);
    }
    let vortex = rng.gen::<f64>() < cfg.vortex_p;
    let std = if vortex {
        (cfg.sigma1 * cfg.sigma1 + cfg.sigma2 * cfg.sigma2).sqrt()
    } else {
        cfg.sigma1
    };
    let (dx, dy) = DIRECTIONS[action];
    let zx: f64 = rng.sample(StandardNormal);
    let zy: f64 = rng.sample(StandardNormal);
    let next = SailingState {
        x: drift(state.x, dx, std, zx, cfg.grid_size),
        y: drift(state.y, dy, std, zy, cfg.grid_size),
        wind,
    };
    (next, reward)
}

/// The sailing problem as a generative model over encoded states.
#[derive(Clone, Debug)]
pub struct Sailing {
    cfg: SailingConfig,
}

impl Sailing {
    pub fn new(cfg: SailingConfig) -> Result<Self, SailingError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &SailingConfig {
        &self.cfg
    }

    pub fn target_states(&self) -> impl Iterator<Item = StateId> + '_ {
        let (x, y) = self.cfg.target;
        (0..NUM_DIRECTIONS).map(move |wind| encode_unchecked(SailingState { x, y, wind }, self.cfg.grid_size))
    }
}

impl GenerativeModel for Sailing {
    fn num_states(&self) -> usize {
        self.cfg.num_states()
    }

    fn num_actions(&self) -> usize {
        NUM_DIRECTIONS
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, state: StateId, action: ActionId, rng: &mut R) -> Transition {
        let s = decode_unchecked(state, self.cfg.grid_size);
        let (next, reward) = sailing_sample(s, action.0, &self.cfg, rng);
        Transition {
            next: encode_unchecked(next, self.cfg.grid_size),
            reward,
        }
    }

    fn is_target(&self, state: StateId) -> bool {
        let s = decode_unchecked(state, self.cfg.grid_size);
        (s.x, s.y) == self.cfg.target
    }
}

/// Standard normal upper tail `P(Z > z)`.
#[inline]
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Mass of `N(0, σ²)`-perturbed position `mean` landing in each cell after
/// rounding and clamping, as `(cell, probability)` pairs.
fn axis_distribution(mean: i64, std: f64, grid: usize) -> Vec<(usize, f64)> {
    let last = grid as i64 - 1;
    if std == 0.0 {
        return vec![(mean.clamp(0, last) as usize, 1.0)];
    }
    let mut out = Vec::new();
    for k in 0..grid {
        let lo = if k == 0 {
            f64::NEG_INFINITY
        } else {
            (k as f64 - 0.5 - mean as f64) / std
        };
        let hi = if k as i64 == last {
            f64::INFINITY
        } else {
            (k as f64 + 0.5 - mean as f64) / std
        };
        // Take the difference on whichever tail keeps it well conditioned.
        let mass = if lo >= 0.0 {
            upper_tail(lo) - upper_tail(hi)
        } else {
            upper_tail(-hi) - upper_tail(-lo)
        };
        if mass >= AXIS_MASS_CUTOFF {
            out.push((k, mass));
        }
    }
    let total: f64 = out.iter().map(|e| e.1).sum();
    for e in &mut out {
        e.1 /= total;
    }
    out
}

/// Exact transition table of the sailing model with discount `gamma`.
///
/// Cell probabilities are Gaussian CDF differences over the rounding
/// intervals, with the boundary cells absorbing the clamped tails, mixed over
/// the vortex coin and multiplied by the wind kernel.
pub fn sailing_tabularize(cfg: &SailingConfig, gamma: f64) -> Result<TabularMdp, SailingError> {
    cfg.validate()?;
    let n = cfg.num_states();
    if n > TABULARIZE_MAX_STATES {
        return Err(SailingError::TooLarge {
            what: "states",
            needed: n,
            limit: TABULARIZE_MAX_STATES,
        });
    }
    let grid = cfg.grid_size;
    let wide = (cfg.sigma1 * cfg.sigma1 + cfg.sigma2 * cfg.sigma2).sqrt();
    let mut components = vec![(1.0 - cfg.vortex_p, cfg.sigma1)];
    if cfg.vortex_p > 0.0 {
        if wide == cfg.sigma1 {
            components[0].0 = 1.0;
        } else {
            components.push((cfg.vortex_p, wide));
        }
    }
    components.retain(|c| c.0 > 0.0);

    let mut builder = TabularMdpBuilder::new(n, NUM_DIRECTIONS, gamma);
    let mut cells = vec![0.0f64; grid * grid];
    let mut touched: Vec<usize> = Vec::new();
    let mut row: Vec<(usize, f64, f64)> = Vec::new();
    let mut entries = 0usize;
    for id in 0..n {
        let s = decode_unchecked(StateId(id), grid);
        let at_target = (s.x, s.y) == cfg.target;
        for action in 0..NUM_DIRECTIONS {
            let reward = sailing_reward(s.wind, action, cfg, at_target);
            if at_target {
                touched.push(s.x * grid + s.y);
                cells[s.x * grid + s.y] = 1.0;
            } else {
                let (dx, dy) = DIRECTIONS[action];
                for &(weight, std) in &components {
                    let px = axis_distribution(s.x as i64 + dx, std, grid);
                    let py = axis_distribution(s.y as i64 + dy, std, grid);
                    for &(x, mx) in &px {
                        for &(y, my) in &py {
                            let c = x * grid + y;
                            if cells[c] == 0.0 {
                                touched.push(c);
                            }
                            cells[c] += weight * mx * my;
                        }
                    }
                }
            }
            row.clear();
            for &c in &touched {
                let mass = cells[c];
                cells[c] = 0.0;
                let (x, y) = (c / grid, c % grid);
                for &(offset, pw) in &WIND_SHIFTS {
                    let wind = (s.wind as i64 + offset).rem_euclid(NUM_DIRECTIONS as i64) as usize;
                    row.push((encode_unchecked(SailingState { x, y, wind }, grid).0, mass * pw, reward));
                }
            }
            touched.clear();
            entries += row.len();
            if entries > TABULARIZE_MAX_ENTRIES {
                return Err(SailingError::TooLarge {
                    what: "transition entries",
                    needed: entries,
                    limit: TABULARIZE_MAX_ENTRIES,
                });
            }
            builder
                .push_row(&mut row)
                .expect("sailing rows are structurally valid");
        }
    }
    let mdp = builder.finish().expect("all rows pushed");
    let targets: Vec<StateId> = Sailing { cfg: cfg.clone() }.target_states().collect();
    Ok(mdp.with_targets(targets))
}
