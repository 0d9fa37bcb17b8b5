//! Scenario configuration: the TOML schema the CLI consumes, the named
//! presets reproducing the Lorenz network experiments, and assembly of a
//! validated, runnable setup.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certification::greedy_pin_selection;
use crate::control::ControllerSpec;
use crate::dynamics::{
    sample_mismatches, LorenzModel, MismatchEnsemble, OscillatorModel, QuadBound, TimeVarying,
    UncertaintyBound,
};
use crate::graph::{GainDiagonal, UndirectedLaplacian};
use crate::sim::IntegrationConfig;
use crate::{Error, Result};

/// Graph selection: a named generator or an explicit row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Generator { generator: String, size: usize },
    Matrix { matrix: Vec<Vec<f64>> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<UndirectedLaplacian> {
        match self {
            GraphSpec::Generator { generator, size } => match generator.as_str() {
                "complete" => UndirectedLaplacian::complete(*size),
                "path" => UndirectedLaplacian::path(*size),
                "zero" => UndirectedLaplacian::zeros(*size),
                other => Err(Error::Scenario(format!(
                    "unknown graph generator '{other}' (expected complete|path|zero)"
                ))),
            },
            GraphSpec::Matrix { matrix } => {
                let n = matrix.len();
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::Scenario(format!(
                            "network.matrix row {i} has {} entries, expected {n}",
                            row.len()
                        )));
                    }
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                UndirectedLaplacian::new(DMatrix::from_row_slice(n, n, &flat))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(flatten)]
    pub graph: GraphSpec,
    /// Inner coupling matrix H: uniform scale h·I or explicit matrix.
    pub coupling_scale: Option<f64>,
    pub coupling_matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeVaryingSpec {
    pub kind: String,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchSpec {
    pub bounds: Vec<f64>,
    pub seed: u64,
    pub time_varying: Option<TimeVaryingSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionsSpec {
    /// Named preset for (F, Γ, γ_c); "lorenz-s4" ships the Lorenz
    /// network values.
    pub preset: Option<String>,
    pub f: Option<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<Vec<f64>>>,
    pub gamma_c: Option<Vec<f64>>,
}

/// Per-node gain specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainCfg {
    Uniform { uniform: f64 },
    Values { values: Vec<f64> },
    /// 1-based pin indices carrying `gain`, everything else zero.
    Pins { pins: Vec<usize>, gain: f64 },
    /// Greedy placement of `greedy` pins of strength `gain`.
    Greedy { greedy: usize, gain: f64 },
}

impl GainCfg {
    fn build(&self, n: usize, placement_graph: &UndirectedLaplacian) -> Result<GainDiagonal> {
        match self {
            GainCfg::Uniform { uniform } => GainDiagonal::uniform(n, *uniform),
            GainCfg::Values { values } => {
                if values.len() != n {
                    return Err(Error::Scenario(format!(
                        "gain list has {} entries for {n} nodes",
                        values.len()
                    )));
                }
                GainDiagonal::new(values.clone())
            }
            GainCfg::Pins { pins, gain } => {
                let mut zero_based = Vec::with_capacity(pins.len());
                for &p in pins {
                    if p == 0 || p > n {
                        return Err(Error::Scenario(format!(
                            "pin index {p} out of range 1..={n}"
                        )));
                    }
                    zero_based.push(p - 1);
                }
                GainDiagonal::with_pins(n, &zero_based, *gain)
            }
            GainCfg::Greedy { greedy, gain } => greedy_pin_selection(placement_graph, *greedy, *gain),
        }
    }

    fn positive_vector(&self, n: usize) -> Result<DVector<f64>> {
        let g = match self {
            GainCfg::Uniform { uniform } => DVector::from_element(n, *uniform),
            GainCfg::Values { values } => {
                if values.len() != n {
                    return Err(Error::Scenario(format!(
                        "gain list has {} entries for {n} nodes",
                        values.len()
                    )));
                }
                DVector::from_column_slice(values)
            }
            _ => {
                return Err(Error::Scenario(
                    "estimator gains k must be uniform or an explicit list".into(),
                ))
            }
        };
        if g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Scenario("estimator gains must be positive".into()));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerCfg {
    /// open_loop | decentralized | distributed
    pub regime: String,
    pub z: Option<GainCfg>,
    pub zprime: Option<GainCfg>,
    pub k: Option<GainCfg>,
    pub b: Option<GraphSpec>,
    pub c: Option<GraphSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Per-dimension `[lo, hi]`; one pair broadcasts.
    pub x0_box: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: String,
    pub stride: usize,
    pub per_node: bool,
}

/// The full scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub network: NetworkSpec,
    pub model: ModelSpec,
    pub mismatch: MismatchSpec,
    pub assumptions: AssumptionsSpec,
    pub controller: ControllerCfg,
    pub integration: IntegrationSpec,
    pub output: OutputSpec,
}

/// Fully validated, runnable form of a [`Scenario`].
pub struct BuiltScenario {
    pub model: Box<dyn OscillatorModel>,
    pub plant: UndirectedLaplacian,
    pub inner_coupling: DMatrix<f64>,
    pub mismatch: MismatchEnsemble,
    pub controller: ControllerSpec,
    pub integration: IntegrationConfig,
    pub quad_bound: QuadBound,
    pub uncertainty: UncertaintyBound,
    pub output: OutputSpec,
}

fn matrix_from(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Scenario(format!(
                "{what} row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(format!("parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Cross-validates every section and builds the runnable pieces.
    pub fn build(&self) -> Result<BuiltScenario> {
        let plant = self.network.graph.build()?;
        let n_nodes = plant.n();

        if self.model.name != "lorenz" {
            return Err(Error::Scenario(format!(
                "unknown model '{}' (only 'lorenz' is built in)",
                self.model.name
            )));
        }
        let defaults = LorenzModel::default();
        let model = LorenzModel {
            a: self.model.a.unwrap_or(defaults.a),
            b: self.model.b.unwrap_or(defaults.b),
            c: self.model.c.unwrap_or(defaults.c),
        };
        let n = model.state_dim();
        let m = model.mismatch_dim();

        let inner_coupling = match (&self.network.coupling_scale, &self.network.coupling_matrix) {
            (Some(scale), None) => DMatrix::identity(n, n) * *scale,
            (None, Some(rows)) => {
                let h = matrix_from(rows, "network.coupling_matrix")?;
                if h.nrows() != n {
                    return Err(Error::Scenario(format!(
                        "coupling matrix is {}x{}, state dimension is {n}",
                        h.nrows(),
                        h.ncols()
                    )));
                }
                h
            }
            _ => {
                return Err(Error::Scenario(
                    "network needs exactly one of coupling_scale or coupling_matrix".into(),
                ))
            }
        };

        if self.mismatch.bounds.len() != m {
            return Err(Error::Scenario(format!(
                "mismatch.bounds has {} entries, model mismatch dimension is {m}",
                self.mismatch.bounds.len()
            )));
        }
        let mut mismatch = sample_mismatches(n_nodes, &self.mismatch.bounds, self.mismatch.seed)?;
        if let Some(tv) = &self.mismatch.time_varying {
            match tv.kind.as_str() {
                "sinusoid" => {
                    mismatch = mismatch.with_time_varying(TimeVarying::Sinusoid {
                        frequency: tv.frequency,
                    });
                }
                other => {
                    return Err(Error::Scenario(format!(
                        "unknown time_varying kind '{other}' (expected 'sinusoid')"
                    )))
                }
            }
        }

        let (f, gamma, gamma_c) = self.assumptions_matrices(n, m)?;
        let quad_bound = QuadBound::new(f)?;
        let uncertainty = UncertaintyBound::new(gamma, gamma_c)?;

        let controller = self.build_controller(n_nodes, &plant)?;
        controller.validate(n_nodes)?;

        let integration = IntegrationConfig {
            dt: self.integration.dt,
            t_end: self.integration.t_end,
            seed: self.integration.seed,
            x0_box: self.integration.x0_box.iter().map(|p| (p[0], p[1])).collect(),
        };
        integration.validate(n)?;

        if self.output.stride == 0 {
            return Err(Error::Scenario("output.stride must be >= 1".into()));
        }

        Ok(BuiltScenario {
            model: Box::new(model),
            plant,
            inner_coupling,
            mismatch,
            controller,
            integration,
            quad_bound,
            uncertainty,
            output: self.output.clone(),
        })
    }

    fn assumptions_matrices(
        &self,
        n: usize,
        m: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        if let Some(preset) = &self.assumptions.preset {
            if preset != "lorenz-s4" {
                return Err(Error::Scenario(format!(
                    "unknown assumptions preset '{preset}' (expected 'lorenz-s4')"
                )));
            }
            let f = DMatrix::from_row_slice(3, 3, &[21., 10., 0., 28., 23., 0., 0., 0., 40.]);
            let gamma =
                DMatrix::from_diagonal(&DVector::from_vec(vec![213.0, 400.0, 2500.0]));
            let gamma_c = DVector::from_vec(vec![1.0, 2.8, 0.26667]);
            return Ok((f, gamma, gamma_c));
        }
        let f = matrix_from(
            self.assumptions
                .f
                .as_ref()
                .ok_or_else(|| Error::Scenario("assumptions.f missing".into()))?,
            "assumptions.f",
        )?;
        if f.nrows() != n {
            return Err(Error::Scenario(format!(
                "assumptions.f is {}x{}, state dimension is {n}",
                f.nrows(),
                f.ncols()
            )));
        }
        let gamma = matrix_from(
            self.assumptions
                .gamma
                .as_ref()
                .ok_or_else(|| Error::Scenario("assumptions.gamma missing".into()))?,
            "assumptions.gamma",
        )?;
        if gamma.nrows() != m {
            return Err(Error::Scenario(format!(
                "assumptions.gamma is {}x{}, mismatch dimension is {m}",
                gamma.nrows(),
                gamma.ncols()
            )));
        }
        let gamma_c = self
            .assumptions
            .gamma_c
            .as_ref()
            .ok_or_else(|| Error::Scenario("assumptions.gamma_c missing".into()))?;
        if gamma_c.len() != m {
            return Err(Error::Scenario(format!(
                "assumptions.gamma_c has {} entries, expected {m}",
                gamma_c.len()
            )));
        }
        Ok((f, gamma, DVector::from_column_slice(gamma_c)))
    }

    fn build_controller(
        &self,
        n_nodes: usize,
        plant: &UndirectedLaplacian,
    ) -> Result<ControllerSpec> {
        match self.controller.regime.as_str() {
            "open_loop" => Ok(ControllerSpec::OpenLoop),
            "decentralized" => {
                let z = self
                    .controller
                    .z
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.z missing".into()))?
                    .build(n_nodes, plant)?;
                let k = self
                    .controller
                    .k
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.k missing".into()))?
                    .positive_vector(n_nodes)?;
                Ok(ControllerSpec::Decentralized { z, k })
            }
            "distributed" => {
                let b = self
                    .controller
                    .b
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.b missing".into()))?
                    .build()?;
                let c = self
                    .controller
                    .c
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.c missing".into()))?
                    .build()?;
                // Greedy z pins use the controller-relevant matrix L+B;
                // greedy z' pins use the estimator graph C.
                let lb = plant.sum(&b)?;
                let z = self
                    .controller
                    .z
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.z missing".into()))?
                    .build(n_nodes, &lb)?;
                let zprime = self
                    .controller
                    .zprime
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.zprime missing".into()))?
                    .build(n_nodes, &c)?;
                let k = self
                    .controller
                    .k
                    .as_ref()
                    .ok_or_else(|| Error::Scenario("controller.k missing".into()))?
                    .positive_vector(n_nodes)?;
                Ok(ControllerSpec::Distributed { b, c, z, zprime, k })
            }
            other => Err(Error::Scenario(format!(
                "unknown regime '{other}' (expected open_loop|decentralized|distributed)"
            ))),
        }
    }
}

/// Names of the shipped presets.
pub const PRESET_NAMES: &[&str] = &["fig1", "fig2-3", "fig4-5"];

/// Named scenario presets pinning every value of the Lorenz network
/// experiments: N = 50 complete plant graph, H = 10·I₃, the published
/// (F, Γ) pair, and 10% parameter-mismatch caps.
pub fn preset(name: &str) -> Option<Scenario> {
    let base = |regime: &str, dir: &str, t_end: f64| Scenario {
        network: NetworkSpec {
            graph: GraphSpec::Generator {
                generator: "complete".into(),
                size: 50,
            },
            coupling_scale: Some(10.0),
            coupling_matrix: None,
        },
        model: ModelSpec {
            name: "lorenz".into(),
            a: Some(10.0),
            b: Some(28.0),
            c: Some(8.0 / 3.0),
        },
        mismatch: MismatchSpec {
            bounds: vec![1.0, 2.8, 0.26667],
            seed: 1,
            time_varying: None,
        },
        assumptions: AssumptionsSpec {
            preset: Some("lorenz-s4".into()),
            f: None,
            gamma: None,
            gamma_c: None,
        },
        controller: ControllerCfg {
            regime: regime.into(),
            z: None,
            zprime: None,
            k: None,
            b: None,
            c: None,
        },
        integration: IntegrationSpec {
            dt: 1e-3,
            t_end,
            seed: 1,
            x0_box: vec![[-10.0, 10.0]],
        },
        output: OutputSpec {
            dir: dir.into(),
            stride: 10,
            per_node: false,
        },
    };

    match name {
        "fig1" => Some(base("open_loop", "out/fig1", 20.0)),
        "fig2-3" => {
            let mut s = base("decentralized", "out/fig2-3", 20.0);
            s.controller.z = Some(GainCfg::Uniform { uniform: 10.0 });
            s.controller.k = Some(GainCfg::Uniform { uniform: 1.0 });
            Some(s)
        }
        "fig4-5" => {
            let mut s = base("distributed", "out/fig4-5", 40.0);
            s.controller.b = Some(GraphSpec::Generator {
                generator: "zero".into(),
                size: 50,
            });
            s.controller.c = Some(GraphSpec::Generator {
                generator: "path".into(),
                size: 50,
            });
            s.controller.z = Some(GainCfg::Pins {
                pins: vec![5, 16, 26, 35, 46],
                gain: 1.0,
            });
            s.controller.zprime = Some(GainCfg::Pins {
                pins: vec![5, 16, 26, 35, 46],
                gain: 1.0,
            });
            s.controller.k = Some(GainCfg::Uniform { uniform: 10.0 });
            Some(s)
        }
        _ => None,
    }
}
