//! Python bindings for the exchange-value toolkit. Thin wrappers: every
//! method delegates to the core crate and converts errors to ValueError.

use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use evkit_core::estimate::{
    clustered_ev, estimate_all, ev_cluster_search, ClusterAssignment, EvReport, ObservationSet,
    SearchConfig,
};
use evkit_core::game::{
    exchange_constrained_exact, exchange_exact, shapley_exact, CharacteristicGame,
};
use evkit_core::imitate::{
    evaluate_policy, fit_bc, fit_group_bc, select_agents, SelectionRule, TabularPolicy,
    ThresholdKind,
};
use evkit_core::toc::{self, generate_dataset, rescore, standard_pool, Discretizer, Dvf, GenMode, TocConfig};
use evkit_core::AgentId;

fn err(e: evkit_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ids(names: Vec<String>) -> PyResult<Vec<AgentId>> {
    names.into_iter().map(|n| AgentId::new(n).map_err(err)).collect()
}

fn parse_dvf(name: &str) -> PyResult<Dvf> {
    Dvf::from_str(name).map_err(err)
}

fn report_to_dict(report: &EvReport) -> HashMap<String, Option<f64>> {
    report
        .iter()
        .map(|(a, e)| (a.to_string(), e.map(|v| v.estimate)))
        .collect()
}

/// Characteristic game over named agents. `sizes` restricts which group
/// sizes carry values; omit it for a fully specified game.
#[pyclass]
struct Game {
    inner: CharacteristicGame,
    constrained: bool,
}

#[pymethods]
impl Game {
    #[new]
    #[pyo3(signature = (agents, sizes=None))]
    fn new(agents: Vec<String>, sizes: Option<Vec<usize>>) -> PyResult<Self> {
        let agents = ids(agents)?;
        match sizes {
            Some(s) => {
                let set: BTreeSet<usize> = s.into_iter().collect();
                Ok(Game {
                    inner: CharacteristicGame::constrained(agents, set).map_err(err)?,
                    constrained: true,
                })
            }
            None => Ok(Game {
                inner: CharacteristicGame::unconstrained(agents).map_err(err)?,
                constrained: false,
            }),
        }
    }

    fn set_value(&mut self, group: Vec<String>, value: f64) -> PyResult<()> {
        self.inner.set_value(&ids(group)?, value).map_err(err)
    }

    fn value(&self, group: Vec<String>) -> PyResult<Option<f64>> {
        self.inner.value(&ids(group)?).map_err(err)
    }

    fn agents(&self) -> Vec<String> {
        self.inner.agents().iter().map(|a| a.to_string()).collect()
    }

    /// Shapley values keyed by agent. Unconstrained games only.
    fn shapley(&self) -> PyResult<HashMap<String, f64>> {
        let sv = shapley_exact(&self.inner).map_err(err)?;
        Ok(self
            .inner
            .agents()
            .iter()
            .zip(sv.values())
            .map(|(a, &v)| (a.to_string(), v))
            .collect())
    }

    /// Exchange values keyed by agent; uses the size-constrained closed
    /// form when the game was built with `sizes`.
    fn exchange(&self) -> PyResult<HashMap<String, f64>> {
        let ev = if self.constrained {
            exchange_constrained_exact(&self.inner).map_err(err)?
        } else {
            exchange_exact(&self.inner).map_err(err)?
        };
        Ok(self
            .inner
            .agents()
            .iter()
            .zip(ev.values())
            .map(|(a, &v)| (a.to_string(), v))
            .collect())
    }
}

/// Scored group observations with a declared set of feasible group sizes.
#[pyclass]
struct Observations {
    inner: ObservationSet,
}

#[pymethods]
impl Observations {
    #[new]
    fn new(agents: Vec<String>, sizes: Vec<usize>) -> PyResult<Self> {
        let set: BTreeSet<usize> = sizes.into_iter().collect();
        Ok(Observations {
            inner: ObservationSet::with_sizes(ids(agents)?, set).map_err(err)?,
        })
    }

    fn push(&mut self, group: Vec<String>, score: f64) -> PyResult<()> {
        self.inner.push(&ids(group)?, score).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn agents(&self) -> Vec<String> {
        self.inner.agents().iter().map(|a| a.to_string()).collect()
    }

    /// Per-agent credit estimates; agents without both inclusion and
    /// exclusion samples in some stratum come back as None.
    fn estimate(&self) -> HashMap<String, Option<f64>> {
        report_to_dict(&estimate_all(&self.inner))
    }

    /// Hill-climb over k-partitions maximizing the variance of shared
    /// credits. Returns ({agent: cluster}, objective).
    #[pyo3(signature = (k, restarts=16, seed=0, penalty_weight=0.0))]
    fn cluster_search(
        &self,
        k: usize,
        restarts: usize,
        seed: u64,
        penalty_weight: f64,
    ) -> PyResult<(HashMap<String, usize>, f64)> {
        let outcome = ev_cluster_search(
            &self.inner,
            k,
            None,
            &SearchConfig {
                restarts,
                penalty_weight,
                seed,
                ..SearchConfig::default()
            },
        )
        .map_err(err)?;
        let map = outcome
            .assignment
            .agents()
            .iter()
            .zip(outcome.assignment.clusters())
            .map(|(a, &c)| (a.to_string(), c))
            .collect();
        Ok((map, outcome.objective))
    }

    /// Credit shared within the given clusters: every member of a cluster
    /// receives the cluster's exchange value.
    fn clustered(&self, assignment: HashMap<String, usize>) -> PyResult<HashMap<String, Option<f64>>> {
        let agents = self.inner.agents().to_vec();
        let clusters: Vec<usize> = agents
            .iter()
            .map(|a| {
                assignment
                    .get(a.as_str())
                    .copied()
                    .ok_or_else(|| PyValueError::new_err(format!("no cluster for agent {a}")))
            })
            .collect::<PyResult<_>>()?;
        let k = clusters.iter().max().map_or(0, |m| m + 1);
        let assignment = ClusterAssignment::new(agents, clusters, k).map_err(err)?;
        Ok(report_to_dict(&clustered_ev(&self.inner, &assignment).map_err(err)?))
    }
}

/// A commons rollout dataset: observations plus the episodes behind them.
#[pyclass]
struct Dataset {
    inner: toc::Dataset,
    cfg: TocConfig,
}

#[pymethods]
impl Dataset {
    fn observations(&self) -> Observations {
        Observations {
            inner: self.inner.observations.clone(),
        }
    }

    /// (one-time id, true id) pairs for anonymized datasets, else None.
    fn truth(&self) -> Option<Vec<(String, String)>> {
        self.inner
            .truth
            .as_ref()
            .map(|t| t.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect())
    }

    /// Rebuilds the observation scores under a different value function.
    fn rescore(&self, dvf: &str) -> PyResult<Observations> {
        Ok(Observations {
            inner: rescore(&self.inner, parse_dvf(dvf)?).map_err(err)?,
        })
    }

    /// Fits an imitation policy on this dataset. Methods: "bc" clones
    /// every seat, "group-bc" keeps episodes above the score percentile,
    /// "ev2bc" keeps seats of agents above the credit percentile.
    #[pyo3(signature = (method="ev2bc", dvf="v_final", percentile=90.0))]
    fn imitate(&self, method: &str, dvf: &str, percentile: f64) -> PyResult<Policy> {
        let dvf = parse_dvf(dvf)?;
        let disc = Discretizer::standard(&self.cfg);
        let obs = rescore(&self.inner, dvf).map_err(err)?;
        let policy = match method {
            "bc" => fit_bc(&obs, &self.inner.trajectories, &disc, None).map_err(err)?,
            "group-bc" => {
                fit_group_bc(&obs, &self.inner.trajectories, &disc, percentile).map_err(err)?
            }
            "ev2bc" => {
                let report = estimate_all(&obs);
                let rule = SelectionRule {
                    kind: ThresholdKind::Percentile,
                    value: percentile,
                };
                let chosen = select_agents(&report, &rule).map_err(err)?;
                fit_bc(&obs, &self.inner.trajectories, &disc, Some(&chosen)).map_err(err)?
            }
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown method {other:?} (expected bc, group-bc, or ev2bc)"
                )))
            }
        };
        Ok(Policy {
            inner: policy,
            cfg: self.cfg.clone(),
        })
    }
}

/// A fitted tabular policy tied to the environment it was trained in.
#[pyclass]
struct Policy {
    inner: TabularPolicy,
    cfg: TocConfig,
}

#[pymethods]
impl Policy {
    /// Rolls out one policy-controlled group and returns (mean, sd) of the
    /// episode scores under the named value function.
    #[pyo3(signature = (dvf="v_final", episodes=30, seed=0))]
    fn evaluate(&self, dvf: &str, episodes: usize, seed: u64) -> PyResult<(f64, f64)> {
        let disc = Discretizer::standard(&self.cfg);
        evaluate_policy(&self.inner, &disc, &self.cfg, parse_dvf(dvf)?, episodes, seed)
            .map_err(err)
    }
}

/// Generates a tragedy-of-the-commons dataset from the standard archetype
/// roster (`agents` must be a multiple of 12). `groups=None` enumerates
/// every group of `group_size`; a number samples that many at random.
#[pyfunction]
#[pyo3(signature = (
    agents=12, dvf="v_final", groups=None, anonymize=false, seed=0,
    growth=0.25, initial_pool=200.0, horizon=50, group_size=3,
))]
#[allow(clippy::too_many_arguments)]
fn commons_dataset(
    agents: usize,
    dvf: &str,
    groups: Option<usize>,
    anonymize: bool,
    seed: u64,
    growth: f64,
    initial_pool: f64,
    horizon: usize,
    group_size: usize,
) -> PyResult<Dataset> {
    if agents == 0 || agents % 12 != 0 {
        return Err(PyValueError::new_err(format!(
            "agents must be a positive multiple of 12, got {agents}"
        )));
    }
    let pool = standard_pool(agents / 12);
    let cfg = TocConfig {
        growth,
        initial_pool,
        horizon,
        group_size,
    };
    let mode = match groups {
        Some(n) => GenMode::Sample { num_groups: n },
        None => GenMode::Complete,
    };
    let dataset =
        generate_dataset(&pool, mode, &cfg, parse_dvf(dvf)?, anonymize, seed).map_err(err)?;
    Ok(Dataset { inner: dataset, cfg })
}

#[pymodule]
fn evkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_class::<Observations>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(commons_dataset, m)?)?;
    Ok(())
}
