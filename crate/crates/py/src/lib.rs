//! Python bindings: thin wrappers over the core types plus list-based
//! entry points for the simulator, calibration, and validation metrics.
//! Series cross the boundary as plain `list[float]`; everything is aligned
//! to one internal anchor date, so only lengths matter here.

use chrono::NaiveDate;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cbsim_core::behaviour::ModelParams as CoreParams;
use cbsim_core::calibrate::{self, ParamRange, PosteriorEnsemble, PriorSpec, Schedule};
use cbsim_core::data::{DailySeries, ExternalSignal};
use cbsim_core::engine::{self, ChannelBand, SummaryBands};
use cbsim_core::network::SocialNetwork as CoreNetwork;

fn anchor() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

fn err(e: cbsim_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn series(values: Vec<f64>, label: &str) -> PyResult<DailySeries> {
    DailySeries::new(anchor(), values, label).map_err(err)
}

fn signal_from(values: Vec<f64>) -> PyResult<ExternalSignal> {
    ExternalSignal::new(series(values, "signal")?).map_err(err)
}

/// The twelve model rates; construct with keywords, read back as a list in
/// the canonical parameter order.
#[pyclass(module = "cbsim")]
struct ModelParams {
    inner: CoreParams,
}

#[pymethods]
impl ModelParams {
    #[new]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (alpha_p, alpha_e, alpha_b, beta_p, beta_e, delta_b,
                        kappa_e=0.0, kappa_b=0.0, sigma=0.0,
                        init_p=0.01, init_e=0.01, init_b=0.01))]
    fn new(
        alpha_p: f64,
        alpha_e: f64,
        alpha_b: f64,
        beta_p: f64,
        beta_e: f64,
        delta_b: f64,
        kappa_e: f64,
        kappa_b: f64,
        sigma: f64,
        init_p: f64,
        init_e: f64,
        init_b: f64,
    ) -> PyResult<Self> {
        let inner = CoreParams {
            alpha_p,
            alpha_e,
            alpha_b,
            beta_p,
            beta_e,
            delta_b,
            kappa_e,
            kappa_b,
            sigma,
            init_p,
            init_e,
            init_b,
        };
        inner.validate().map_err(err)?;
        Ok(ModelParams { inner })
    }

    /// Values in canonical order (see `names()`).
    fn to_list(&self) -> Vec<f64> {
        self.inner.to_array().to_vec()
    }

    #[staticmethod]
    fn from_list(values: Vec<f64>) -> PyResult<Self> {
        let arr: [f64; 12] = values
            .try_into()
            .map_err(|v: Vec<f64>| PyValueError::new_err(format!("need 12 values, got {}", v.len())))?;
        let inner = CoreParams::from_array(arr);
        inner.validate().map_err(err)?;
        Ok(ModelParams { inner })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        cbsim_core::behaviour::PARAM_NAMES.to_vec()
    }

    fn __repr__(&self) -> String {
        let names = cbsim_core::behaviour::PARAM_NAMES;
        let values = self.inner.to_array();
        let body: Vec<String> = names
            .iter()
            .zip(values)
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        format!("ModelParams({})", body.join(", "))
    }
}

/// Undirected influence graph over the agents.
#[pyclass(module = "cbsim")]
struct SocialNetwork {
    inner: CoreNetwork,
}

#[pymethods]
impl SocialNetwork {
    #[staticmethod]
    fn complete(n: usize) -> PyResult<Self> {
        Ok(SocialNetwork {
            inner: CoreNetwork::complete(n).map_err(err)?,
        })
    }

    #[staticmethod]
    fn erdos_renyi(n: usize, p: f64, seed: u64) -> PyResult<Self> {
        Ok(SocialNetwork {
            inner: CoreNetwork::erdos_renyi(n, p, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn watts_strogatz(n: usize, k: usize, beta: f64, seed: u64) -> PyResult<Self> {
        Ok(SocialNetwork {
            inner: CoreNetwork::watts_strogatz(n, k, beta, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn barabasi_albert(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Ok(SocialNetwork {
            inner: CoreNetwork::barabasi_albert(n, m, seed).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn neighbours(&self, i: usize) -> PyResult<Vec<u32>> {
        if i >= self.inner.n() {
            return Err(PyValueError::new_err(format!(
                "node {i} out of range (n = {})",
                self.inner.n()
            )));
        }
        Ok(self.inner.neighbours(i).to_vec())
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.inner.edges().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "SocialNetwork(n={}, edges={})",
            self.inner.n(),
            self.inner.edge_count()
        )
    }
}

fn band_dict<'py>(py: Python<'py>, band: &ChannelBand) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("lo", band.lo.clone())?;
    d.set_item("median", band.median.clone())?;
    d.set_item("hi", band.hi.clone())?;
    Ok(d)
}

fn bands_dict<'py>(py: Python<'py>, bands: &SummaryBands) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("behaviour", band_dict(py, &bands.behaviour)?)?;
    d.set_item("emotion", band_dict(py, &bands.emotion)?)?;
    d.set_item("perception", band_dict(py, &bands.perception)?)?;
    d.set_item("behaviour_raw", band_dict(py, &bands.behaviour_raw)?)?;
    Ok(d)
}

/// Accepted parameter draws with their distances and importance weights.
#[pyclass(module = "cbsim")]
struct Posterior {
    inner: PosteriorEnsemble,
}

#[pymethods]
impl Posterior {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn draws(&self) -> Vec<Vec<f64>> {
        self.inner
            .draws
            .iter()
            .map(|d| d.params.to_array().to_vec())
            .collect()
    }

    fn distances(&self) -> Vec<f64> {
        self.inner.draws.iter().map(|d| d.distance).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.draws.iter().map(|d| d.weight).collect()
    }

    #[getter]
    fn epsilons(&self) -> Vec<f64> {
        self.inner.epsilons.clone()
    }

    #[getter]
    fn acceptance_rates(&self) -> Vec<f64> {
        self.inner.acceptance_rates.clone()
    }

    /// Posterior-predictive 95% bands (resampled by weight, fresh noise).
    fn predictive<'py>(
        &self,
        py: Python<'py>,
        net: &SocialNetwork,
        signal: Vec<f64>,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let signal = signal_from(signal)?;
        let bands =
            calibrate::posterior_predictive(&self.inner, &net.inner, &signal, seed).map_err(err)?;
        bands_dict(py, &bands)
    }

    fn __repr__(&self) -> String {
        format!(
            "Posterior(draws={}, final_epsilon={:?})",
            self.inner.len(),
            self.inner.epsilons.last()
        )
    }
}

/// One model run; returns the population-mean series per channel, raw
/// (`mean_*`) and in observable form (normalized, emotion square-rooted).
#[pyfunction]
fn simulate<'py>(
    py: Python<'py>,
    params: &ModelParams,
    net: &SocialNetwork,
    signal: Vec<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let signal = signal_from(signal)?;
    let traj = engine::run_simulation(&params.inner, &net.inner, &signal, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mean_p", traj.mean_p.clone())?;
    d.set_item("mean_e", traj.mean_e.clone())?;
    d.set_item("mean_b", traj.mean_b.clone())?;
    for channel in [
        engine::Channel::Behaviour,
        engine::Channel::Emotion,
        engine::Channel::Perception,
    ] {
        let obs = engine::observable_transform(&traj, channel);
        d.set_item(channel.name(), obs.values)?;
    }
    Ok(d)
}

/// Ensemble of runs (one per 12-value draw, seeded `seed + index`) reduced
/// to pointwise 2.5/50/97.5% bands per channel.
#[pyfunction]
fn run_ensemble<'py>(
    py: Python<'py>,
    draws: Vec<Vec<f64>>,
    net: &SocialNetwork,
    signal: Vec<f64>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let parsed: Vec<CoreParams> = draws
        .into_iter()
        .map(|v| Ok(ModelParams::from_list(v)?.inner))
        .collect::<PyResult<_>>()?;
    let signal = signal_from(signal)?;
    let bands = engine::run_ensemble(&parsed, &net.inner, &signal, seed).map_err(err)?;
    bands_dict(py, &bands)
}

fn prior_from(ranges: Option<Vec<(f64, f64)>>) -> PyResult<PriorSpec> {
    let Some(ranges) = ranges else {
        return Ok(PriorSpec::default());
    };
    if ranges.len() != 12 {
        return Err(PyValueError::new_err(format!(
            "prior needs 12 (lo, hi) pairs, got {}",
            ranges.len()
        )));
    }
    let mut spec = PriorSpec::default();
    for (i, (lo, hi)) in ranges.into_iter().enumerate() {
        spec.ranges[i] = if lo == hi {
            ParamRange::pinned(lo)
        } else {
            ParamRange::new(lo, hi)
        };
    }
    spec.validate().map_err(err)?;
    Ok(spec)
}

/// Sequential ABC against an observed series (same length as the signal,
/// already on the observable scale). `prior` is 12 (lo, hi) pairs, equal
/// values meaning pinned; omitted, the default prior is used.
#[pyfunction]
#[pyo3(signature = (observed, net, signal, seed, pop_size=200, stages=3, keep_quantile=0.3, prior=None))]
#[allow(clippy::too_many_arguments)]
fn abc_smc(
    observed: Vec<f64>,
    net: &SocialNetwork,
    signal: Vec<f64>,
    seed: u64,
    pop_size: usize,
    stages: usize,
    keep_quantile: f64,
    prior: Option<Vec<(f64, f64)>>,
) -> PyResult<Posterior> {
    let obs = series(observed, "observed")?;
    let signal = signal_from(signal)?;
    let prior = prior_from(prior)?;
    let schedule = Schedule::Adaptive {
        stages,
        keep_quantile,
    };
    let inner = calibrate::abc_smc(
        &prior,
        &obs,
        &net.inner,
        &signal,
        &schedule,
        pop_size,
        seed,
    )
    .map_err(err)?;
    Ok(Posterior { inner })
}

/// Pearson correlation between two equal-length series: (r, p_value).
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let xs = series(x, "x")?;
    let ys = series(y, "y")?;
    cbsim_core::metrics::pearson(&xs, &ys).map_err(err)
}

/// Fraction of points with lo[i] <= obs[i] <= hi[i], endpoints inclusive.
#[pyfunction]
fn coverage_fraction(observed: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<f64> {
    if lo.len() != observed.len() || hi.len() != observed.len() {
        return Err(PyValueError::new_err(format!(
            "lengths differ: observed {}, lo {}, hi {}",
            observed.len(),
            lo.len(),
            hi.len()
        )));
    }
    let n = observed.len();
    let obs = series(observed, "observed")?;
    let band = ChannelBand {
        start: anchor(),
        median: vec![0.0; n],
        lo,
        hi,
    };
    cbsim_core::metrics::coverage_fraction(&obs, &band).map_err(err)
}

/// Root-mean-square distance between two equal-length series.
#[pyfunction]
fn distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let sa = series(a, "a")?;
    let sb = series(b, "b")?;
    calibrate::distance(&sa, &sb).map_err(err)
}

/// Scale a series to [0,1] by min-max; constant input maps to all zeros.
#[pyfunction]
fn min_max_normalize(values: Vec<f64>) -> PyResult<Vec<f64>> {
    for v in &values {
        if !v.is_finite() {
            return Err(PyValueError::new_err(format!("non-finite value {v}")));
        }
    }
    Ok(cbsim_core::data::min_max_vec(&values))
}

#[pymodule]
fn cbsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelParams>()?;
    m.add_class::<SocialNetwork>()?;
    m.add_class::<Posterior>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(abc_smc, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(min_max_normalize, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
