//! Synthetic load scripts and a linear voltage-response model for generating
//! reproducible multichannel test streams.

use serde::{Deserialize, Serialize};

use crate::ensembles::{normal, rng_for};
use crate::error::{invalid, Error, Result};
use crate::linalg::{svd_values, DataMatrix};

/// Load profile of one node over one time interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { level: f64 },
    /// Jump to `level` at the start of the interval and hold it.
    Step { level: f64 },
    /// `slope·t + intercept`.
    Ramp { slope: f64, intercept: f64 },
    /// `level + rate·(t − t_start)²`, with all measurement noise scaled by `noise_gain`
    /// during the interval.
    Collapse { level: f64, rate: f64, noise_gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStage {
    pub t_start: f64,
    pub t_end: f64,
    /// Zero-based node index.
    pub node: usize,
    pub profile: Profile,
}

impl EventStage {
    fn value(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Constant { level } | Profile::Step { level } => level,
            Profile::Ramp { slope, intercept } => slope * t + intercept,
            Profile::Collapse { level, rate, .. } => level + rate * (t - self.t_start).powi(2),
        }
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub stages: Vec<EventStage>,
    /// Load of every node outside its scripted stages; also the reference for deviations.
    pub base_loads: Vec<f64>,
    pub gamma_acc: f64,
    pub gamma_mul: f64,
    /// Time of the first and last sample.
    pub span: (f64, f64),
}

impl EventScript {
    pub fn validate(&self) -> Result<()> {
        if self.base_loads.is_empty() {
            return Err(invalid("script has no nodes"));
        }
        if !(self.gamma_acc >= 0.0 && self.gamma_mul >= 0.0) {
            return Err(invalid("noise scales must be nonnegative"));
        }
        if !(self.span.0 <= self.span.1) {
            return Err(invalid("script span is reversed"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.node >= self.base_loads.len() {
                return Err(invalid(format!("stage {i} targets node {} of {}", s.node, self.base_loads.len())));
            }
            if !(s.t_start <= s.t_end) {
                return Err(invalid(format!("stage {i} ends before it starts")));
            }
            if let Profile::Collapse { noise_gain, .. } = s.profile {
                if !(noise_gain >= 0.0) {
                    return Err(invalid("noise gain must be nonnegative"));
                }
            }
        }
        for (i, a) in self.stages.iter().enumerate() {
            for b in &self.stages[i + 1..] {
                if a.node == b.node && a.t_start <= b.t_end && b.t_start <= a.t_end {
                    return Err(invalid(format!("overlapping stages on node {}", a.node)));
                }
                if a.node == b.node && b.t_start < a.t_start {
                    return Err(invalid(format!("stages on node {} are not time-ordered", a.node)));
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.base_loads.len()
    }

    /// Noiseless load of `node` at time `t`.
    pub fn load(&self, node: usize, t: f64) -> f64 {
        self.stages
            .iter()
            .find(|s| s.node == node && s.contains(t))
            .map_or(self.base_loads[node], |s| s.value(t))
    }

    fn noise_gain(&self, t: f64) -> f64 {
        self.stages
            .iter()
            .filter(|s| s.contains(t))
            .filter_map(|s| match s.profile {
                Profile::Collapse { noise_gain, .. } => Some(noise_gain),
                _ => None,
            })
            .fold(1.0, f64::max)
    }

    /// Integer sample times from `span.0` to `span.1` at `hz`.
    pub fn time_grid(&self, hz: f64) -> Vec<f64> {
        let n = ((self.span.1 - self.span.0) * hz).round() as usize + 1;
        (0..n).map(|k| self.span.0 + k as f64 / hz).collect()
    }
}

/// `ỹ = y·(1 + γ_mul·r₁) + γ_acc·r₂` for every node and time in `t_grid`.
pub fn noisy_loads(script: &EventScript, t_grid: &[f64], seed: u64) -> Result<DataMatrix> {
    script.validate()?;
    if t_grid.iter().any(|&t| t < script.span.0 || t > script.span.1) {
        return Err(invalid("time grid leaves the script span"));
    }
    let n = script.node_count();
    let mut rng = rng_for(seed, 0x4C4F_4144);
    let gains: Vec<f64> = t_grid.iter().map(|&t| script.noise_gain(t)).collect();
    let mut data = vec![0.0; n * t_grid.len()];
    // column-major draw order so the stream is identical for any node count prefix
    for (k, &t) in t_grid.iter().enumerate() {
        for i in 0..n {
            let y = script.load(i, t);
            let (r1, r2) = (normal(&mut rng), normal(&mut rng));
            let g = gains[k];
            data[i * t_grid.len() + k] = y * (1.0 + g * script.gamma_mul * r1) + g * script.gamma_acc * r2;
        }
    }
    DataMatrix::from_real(n, t_grid.len(), data)
}

/// Linear voltage response `ΔV = Ξ·ΔP`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseModel {
    pub xi: DataMatrix,
    pub spectral_radius: f64,
    pub condition_number: f64,
}

impl ResponseModel {
    pub fn new(xi: DataMatrix) -> Result<Self> {
        if !xi.is_square() || xi.is_complex() || !xi.is_finite() {
            return Err(invalid("response matrix must be real, square and finite"));
        }
        let sv = svd_values(&xi)?;
        let sv = sv.real()?;
        let (lo, hi) = (sv[0], sv[sv.len() - 1]);
        let eig = crate::linalg::eig_general(&xi)?;
        let rho = eig.complex().iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(Self { xi, spectral_radius: rho, condition_number: if lo > 0.0 { hi / lo } else { f64::INFINITY } })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DataMatrix::identity(n)?)
    }

    pub fn node_count(&self) -> usize {
        self.xi.rows()
    }
}

/// `Ξ = I + ρP` with `P` the orthogonal projector onto a random `⌊n/2⌋`-dimensional
/// subspace. Its singular values are `1` and `|1 + ρ|`; the default `ρ = −2` makes
/// `Ξ` a reflection, so white measurement noise stays white.
pub fn random_response_matrix(n: usize, rho: f64, max_condition: f64, seed: u64) -> Result<ResponseModel> {
    if n == 0 {
        return Err(invalid("response model needs at least one node"));
    }
    let k = n / 2;
    let mut rng = rng_for(seed, 0x5849);
    // orthonormal basis of a random k-dimensional subspace by Gram-Schmidt
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let xi = DataMatrix::from_fn_real(n, n, |i, j| {
        let p: f64 = basis.iter().map(|b| b[i] * b[j]).sum();
        (if i == j { 1.0 } else { 0.0 }) + rho * p
    })?;
    let model = ResponseModel::new(xi)?;
    if model.condition_number > max_condition {
        return Err(invalid(format!(
            "rho = {rho} gives condition number {:.3e} above the bound {max_condition}",
            model.condition_number
        )));
    }
    Ok(model)
}

pub const DEFAULT_RHO: f64 = -2.0;

/// `V = Ξ·(loads − base)` column by column.
pub fn simulate_voltage(model: &ResponseModel, loads: &DataMatrix, base: &[f64]) -> Result<DataMatrix> {
    let n = model.node_count();
    if loads.rows() != n || base.len() != n {
        return Err(Error::Shape(format!(
            "response model has {n} nodes, loads have {} rows and base has {} entries",
            loads.rows(),
            base.len()
        )));
    }
    let t = loads.cols();
    let l = loads.real_data_or_err()?;
    let dev = DataMatrix::from_fn_real(n, t, |i, k| l[i * t + k] - base[i])?;
    model.xi.matmul(&dev)
}

/// Node whose demand is scripted in the 118-node presets (bus 52).
pub const IEEE118_EVENT_NODE: usize = 51;

fn base_118(scripted: &[usize]) -> Vec<f64> {
    (0..118).map(|i| if scripted.contains(&i) { 0.0 } else { 1.0 }).collect()
}

/// 118 nodes over `t = 1..2500`: bus 52 demand 0, then 30 from 501, 120 from
/// 901, and `t/4 − 205` from 1301.
pub fn ieee118_default_script() -> EventScript {
    let node = IEEE118_EVENT_NODE;
    let stage = |a: f64, b: f64, profile| EventStage { t_start: a, t_end: b, node, profile };
    EventScript {
        stages: vec![
            stage(1.0, 500.0, Profile::Constant { level: 0.0 }),
            stage(501.0, 900.0, Profile::Step { level: 30.0 }),
            stage(901.0, 1300.0, Profile::Step { level: 120.0 }),
            stage(1301.0, 2500.0, Profile::Ramp { slope: 0.25, intercept: -205.0 }),
        ],
        base_loads: base_118(&[node]),
        gamma_acc: 0.1,
        gamma_mul: 0.001,
        span: (1.0, 2500.0),
    }
}

/// Sampling windows `(start, end)` of the six cross-sections of [`ieee118_fusion_script`].
pub const FUSION_WINDOWS: [(f64, f64); 6] =
    [(100.0, 217.0), (850.0, 967.0), (2200.0, 2317.0), (3300.0, 3417.0), (3900.0, 4017.0), (4400.0, 4517.0)];

/// 118 nodes over `t = 1..5500` with six regimes: quiet, a step on bus 52 at
/// 901, steady growth of bus 22 (1918-2600) and bus 52 (3118-3790), an emulated
/// voltage collapse (3908-4100) and a quiet tail.
pub fn ieee118_fusion_script() -> EventScript {
    let (b22, b52) = (21, IEEE118_EVENT_NODE);
    let st = |node, a: f64, b: f64, profile| EventStage { t_start: a, t_end: b, node, profile };
    EventScript {
        stages: vec![
            st(b22, 1918.0, 2600.0, Profile::Ramp { slope: 0.25, intercept: -0.25 * 1918.0 }),
            st(b22, 2601.0, 5500.0, Profile::Constant { level: 0.25 * 682.0 }),
            st(b52, 901.0, 3117.0, Profile::Step { level: 30.0 }),
            st(b52, 3118.0, 3790.0, Profile::Ramp { slope: 0.25, intercept: 30.0 - 0.25 * 3118.0 }),
            st(b52, 3791.0, 3907.0, Profile::Constant { level: 30.0 + 0.25 * 672.0 }),
            st(b52, 3908.0, 4100.0, Profile::Collapse { level: 30.0 + 0.25 * 672.0, rate: 0.01, noise_gain: 10.0 }),
            st(b52, 4101.0, 5500.0, Profile::Constant { level: 30.0 + 0.25 * 672.0 }),
        ],
        base_loads: base_118(&[b22, b52]),
        gamma_acc: 0.1,
        gamma_mul: 0.001,
        span: (1.0, 5500.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Ieee118,
    Ieee118Fusion,
}

impl Preset {
    pub fn script(self) -> EventScript {
        match self {
            Self::Ieee118 => ieee118_default_script(),
            Self::Ieee118Fusion => ieee118_fusion_script(),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ieee118" => Ok(Self::Ieee118),
            "ieee118-fusion" => Ok(Self::Ieee118Fusion),
            other => Err(invalid(format!("unknown preset '{other}' (expected ieee118 or ieee118-fusion)"))),
        }
    }
}

/// Loads, response model and voltages for a script, all from one seed.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub loads: DataMatrix,
    pub model: ResponseModel,
    pub voltages: DataMatrix,
}

/// Runs `script` at 1 Hz through a default random response model.
pub fn simulate(script: &EventScript, seed: u64) -> Result<Simulation> {
    let times = script.time_grid(1.0);
    let loads = noisy_loads(script, &times, seed)?;
    let model = random_response_matrix(script.node_count(), DEFAULT_RHO, 1.0 + 1e-9, seed)?;
    let voltages = simulate_voltage(&model, &loads, &script.base_loads)?;
    Ok(Simulation { times, loads, model, voltages })
}
