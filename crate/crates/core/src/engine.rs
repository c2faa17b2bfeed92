//! Whole-window simulation, ensemble running, observable-channel transforms,
//! and pointwise median / 95% credibility bands.

use std::io::Write;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rayon::prelude::*;

use crate::behaviour::{init_population, population_noise_streams, step_population, ModelParams};
use crate::data::{min_max_vec, DailySeries, ExternalSignal};
use crate::error::{Error, Result};
use crate::network::SocialNetwork;

/// Daily population means of the three state fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: NaiveDate,
    pub mean_p: Vec<f64>,
    pub mean_e: Vec<f64>,
    pub mean_b: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.mean_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_b.is_empty()
    }
}

/// The population-mean channels compared against observed data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Behaviour,
    Emotion,
    Perception,
}

impl Channel {
    pub fn name(&self) -> &'static str {
        match self {
            Channel::Behaviour => "behaviour",
            Channel::Emotion => "emotion",
            Channel::Perception => "perception",
        }
    }
}

/// Pointwise (2.5%, 50%, 97.5%) band for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBand {
    pub start: NaiveDate,
    pub lo: Vec<f64>,
    pub median: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChannelBand {
    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    pub fn date(&self, k: usize) -> NaiveDate {
        self.start + Days::new(k as u64)
    }

    pub fn end(&self) -> Option<NaiveDate> {
        (!self.is_empty()).then(|| self.date(self.len() - 1))
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        if date < self.start {
            return None;
        }
        let k = (date - self.start).num_days() as usize;
        (k < self.len()).then_some(k)
    }

    /// The median as a plain daily series.
    pub fn median_series(&self, label: impl Into<String>) -> DailySeries {
        DailySeries {
            start: self.start,
            values: self.median.clone(),
            label: label.into(),
        }
    }
}

/// Bands for the three transformed channels plus the untransformed
/// mean-behaviour band (used for the reproduction-number correlation).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryBands {
    pub behaviour: ChannelBand,
    pub emotion: ChannelBand,
    pub perception: ChannelBand,
    pub behaviour_raw: ChannelBand,
}

/// Run the model over the whole signal window. Agents start at the
/// configured initial values; population means are recorded after each day.
pub fn run_simulation(
    params: &ModelParams,
    net: &SocialNetwork,
    signal: &ExternalSignal,
    seed: u64,
) -> Result<Trajectory> {
    if signal.is_empty() {
        return Err(Error::Data {
            path: signal.series.label.clone(),
            reason: "signal series is empty".into(),
        });
    }
    let n = net.n();
    let mut pop = init_population(params, n)?;
    let mut rngs = population_noise_streams(seed, n);
    let days = signal.len();
    let mut mean_p = Vec::with_capacity(days);
    let mut mean_e = Vec::with_capacity(days);
    let mut mean_b = Vec::with_capacity(days);
    let inv_n = 1.0 / n as f64;
    for &s_t in signal.values() {
        pop = step_population(&pop, net, s_t, params, &mut rngs)?;
        mean_p.push(pop.iter().map(|a| a.perception).sum::<f64>() * inv_n);
        mean_e.push(pop.iter().map(|a| a.emotion).sum::<f64>() * inv_n);
        mean_b.push(pop.iter().map(|a| a.behaviour).sum::<f64>() * inv_n);
    }
    Ok(Trajectory {
        start: signal.series.start,
        mean_p,
        mean_e,
        mean_b,
    })
}

/// Untransformed population-mean series for one channel.
pub fn raw_channel(traj: &Trajectory, channel: Channel) -> DailySeries {
    let values = match channel {
        Channel::Behaviour => traj.mean_b.clone(),
        Channel::Emotion => traj.mean_e.clone(),
        Channel::Perception => traj.mean_p.clone(),
    };
    DailySeries {
        start: traj.start,
        values,
        label: format!("mean_{}", channel.name()),
    }
}

/// Transform a channel for comparison with observed data: behaviour and
/// perception are min-max normalized; emotion is min-max normalized and then
/// square-rooted pointwise.
pub fn observable_transform(traj: &Trajectory, channel: Channel) -> DailySeries {
    let raw = raw_channel(traj, channel);
    let mut values = min_max_vec(&raw.values);
    if channel == Channel::Emotion {
        for v in &mut values {
            *v = v.sqrt();
        }
    }
    DailySeries {
        start: traj.start,
        values,
        label: channel.name().to_string(),
    }
}

/// Linear-interpolation quantile (the common "type 7" rule) on sorted data.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// One simulation per parameter draw, seeded `base_seed + draw index`, in
/// draw order. Members run in parallel; the indexed seeds make the result
/// independent of scheduling.
pub fn run_ensemble_trajectories(
    draws: &[ModelParams],
    net: &SocialNetwork,
    signal: &ExternalSignal,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..draws.len())
        .into_par_iter()
        .map(|i| run_simulation(&draws[i], net, signal, base_seed.wrapping_add(i as u64)))
        .collect()
}

fn band_over(series: &[Vec<f64>], days: usize, start: NaiveDate) -> ChannelBand {
    let mut lo = Vec::with_capacity(days);
    let mut median = Vec::with_capacity(days);
    let mut hi = Vec::with_capacity(days);
    let mut column = vec![0.0; series.len()];
    for day in 0..days {
        for (i, s) in series.iter().enumerate() {
            column[i] = s[day];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lo.push(quantile_type7(&column, 0.025));
        median.push(quantile_type7(&column, 0.5));
        hi.push(quantile_type7(&column, 0.975));
    }
    ChannelBand {
        start,
        lo,
        median,
        hi,
    }
}

/// Reduce an ensemble of trajectories to per-channel bands.
pub fn bands_from_trajectories(trajs: &[Trajectory]) -> Result<SummaryBands> {
    let first = trajs.first().ok_or_else(|| {
        Error::Misaligned("cannot build bands from an empty ensemble".into())
    })?;
    let days = first.len();
    let start = first.start;
    if trajs.iter().any(|t| t.len() != days || t.start != start) {
        return Err(Error::Misaligned(
            "ensemble trajectories cover different date ranges".into(),
        ));
    }
    let collect = |f: &dyn Fn(&Trajectory) -> Vec<f64>| -> Vec<Vec<f64>> {
        trajs.iter().map(f).collect()
    };
    let behaviour = collect(&|t| observable_transform(t, Channel::Behaviour).values);
    let emotion = collect(&|t| observable_transform(t, Channel::Emotion).values);
    let perception = collect(&|t| observable_transform(t, Channel::Perception).values);
    let behaviour_raw = collect(&|t| t.mean_b.clone());
    Ok(SummaryBands {
        behaviour: band_over(&behaviour, days, start),
        emotion: band_over(&emotion, days, start),
        perception: band_over(&perception, days, start),
        behaviour_raw: band_over(&behaviour_raw, days, start),
    })
}

/// Ensemble simulation reduced to pointwise 2.5/50/97.5% bands per channel.
pub fn run_ensemble(
    draws: &[ModelParams],
    net: &SocialNetwork,
    signal: &ExternalSignal,
    base_seed: u64,
) -> Result<SummaryBands> {
    if draws.len() < 2 {
        return Err(Error::InvalidParam {
            name: "draws",
            reason: format!("ensemble needs at least 2 draws, got {}", draws.len()),
        });
    }
    let trajs = run_ensemble_trajectories(draws, net, signal, base_seed)?;
    bands_from_trajectories(&trajs)
}

/// Write a band as `date,lo2.5,median,hi97.5` CSV.
pub fn write_band_csv(path: &Path, band: &ChannelBand) -> Result<()> {
    let mut out = String::from("date,lo2.5,median,hi97.5\n");
    for k in 0..band.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            band.date(k),
            band.lo[k],
            band.median[k],
            band.hi[k]
        ));
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Read a band CSV written by `write_band_csv`; dates must be consecutive.
pub fn read_band_csv(path: &Path) -> Result<ChannelBand> {
    let p = path.display().to_string();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(p.clone(), e))?;
    let mut start: Option<NaiveDate> = None;
    let mut lo = Vec::new();
    let mut median = Vec::new();
    let mut hi = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if row == 1 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("expected 4 columns, got {}", fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("bad date {:?}: {e}", fields[0]),
            }
        })?;
        match start {
            None => start = Some(date),
            Some(s) => {
                let expect = s + Days::new(lo.len() as u64);
                if date != expect {
                    return Err(Error::DataRow {
                        path: p.clone(),
                        row,
                        reason: format!("expected date {expect}, got {date}"),
                    });
                }
            }
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::DataRow {
                path: p.clone(),
                row,
                reason: format!("bad value {s:?}: {e}"),
            })
        };
        lo.push(parse(fields[1])?);
        median.push(parse(fields[2])?);
        hi.push(parse(fields[3])?);
    }
    let start = start.ok_or_else(|| Error::Data {
        path: p,
        reason: "band file has no data rows".into(),
    })?;
    Ok(ChannelBand {
        start,
        lo,
        median,
        hi,
    })
}

/// Write the raw population means as `date,mean_p,mean_e,mean_b` CSV.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("date,mean_p,mean_e,mean_b\n");
    for k in 0..traj.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            traj.start + Days::new(k as u64),
            traj.mean_p[k],
            traj.mean_e[k],
            traj.mean_b[k]
        ));
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}
