//! Gaussian kernel density estimates of cross-participant parameter
//! distributions, with plot-ready output for violin renderers.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FitReport;
use crate::model::{Channel, HybridModel};

/// Points on the automatic violin grid.
pub const VIOLIN_POINTS: usize = 512;
/// Half-width of the automatic grid beyond the sample range, in units of `h·σ`.
pub const GRID_SPAN: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth_factor: f64,
    pub sample_sd: f64,
    pub n_samples: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    h: f64,
    sigma: f64,
    n_p: usize,
    mean: f64,
    median: f64,
    sd_convention: &'a str,
    parameter: Option<&'a str>,
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,density\n");
        for (y, f) in self.grid.iter().zip(&self.density) {
            writeln!(out, "{y},{f}").unwrap();
        }
        out
    }

    pub fn sidecar_json(&self, parameter: Option<&str>) -> String {
        let side = Sidecar {
            h: self.bandwidth_factor,
            sigma: self.sample_sd,
            n_p: self.n_samples,
            mean: self.mean,
            median: self.median,
            sd_convention: "sample (n_p - 1)",
            parameter,
        };
        let mut s = serde_json::to_string_pretty(&side).expect("sidecar serializes");
        s.push('\n');
        s
    }
}

/// Silverman's Gaussian-reference factor `(4 / 3n)^(1/5)`.
pub fn silverman_factor(n: usize) -> f64 {
    (4.0 / (3.0 * n as f64)).powf(0.2)
}

pub fn sample_sd(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|y| (y - mean) * (y - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

pub fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Bandwidth {
    h: f64,
    sigma: f64,
}

fn bandwidth(samples: &[f64]) -> Result<Bandwidth> {
    if samples.len() < 2 {
        return Err(Error::InsufficientFits {
            needed: 2,
            found: samples.len(),
        });
    }
    if samples.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("kde sample"));
    }
    let sigma = sample_sd(samples);
    // Relative floor: jitter at rounding level is still a point mass.
    let scale = samples.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    if !(sigma > 1e-8 * scale) {
        return Err(Error::DegenerateDistribution);
    }
    Ok(Bandwidth {
        h: silverman_factor(samples.len()),
        sigma,
    })
}

/// Evaluates the estimate on the given grid.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<KdeCurve> {
    let bw = bandwidth(samples)?;
    if grid.iter().any(|y| !y.is_finite()) {
        return Err(Error::NonFinite("kde grid"));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput("kde grid must be strictly increasing".into()));
    }
    let n = samples.len() as f64;
    let width = bw.h * bw.sigma;
    let norm = 1.0 / (n * width * (2.0 * PI).sqrt());
    let density = grid
        .iter()
        .map(|&y| {
            norm * samples
                .iter()
                .map(|&yi| {
                    let z = (y - yi) / width;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve {
        grid: grid.to_vec(),
        density,
        bandwidth_factor: bw.h,
        sample_sd: bw.sigma,
        n_samples: samples.len(),
        mean: samples.iter().sum::<f64>() / n,
        median: median(samples),
    })
}

/// Evaluates the estimate on `points` evenly spaced values spanning the
/// samples plus `GRID_SPAN·h·σ` on each side.
pub fn kde_auto(samples: &[f64], points: usize) -> Result<KdeCurve> {
    let bw = bandwidth(samples)?;
    if points < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 points".into()));
    }
    let pad = GRID_SPAN * bw.h * bw.sigma;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - pad;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + i as f64 * step })
        .collect();
    kde(samples, &grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coefficient {
    A,
    B,
    C,
}

/// One of the nine continuous parameters, named `a_T` through `c_W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParameterName {
    pub coefficient: Coefficient,
    pub channel: Channel,
}

impl ParameterName {
    pub fn all() -> impl Iterator<Item = ParameterName> {
        [Coefficient::A, Coefficient::B, Coefficient::C]
            .into_iter()
            .flat_map(|coefficient| {
                Channel::ALL.into_iter().map(move |channel| ParameterName {
                    coefficient,
                    channel,
                })
            })
    }

    pub fn extract(&self, model: &HybridModel) -> f64 {
        let p = model.params(self.channel);
        match self.coefficient {
            Coefficient::A => p.a,
            Coefficient::B => p.b,
            Coefficient::C => p.c,
        }
    }
}

impl fmt::Display for ParameterName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.coefficient {
            Coefficient::A => 'a',
            Coefficient::B => 'b',
            Coefficient::C => 'c',
        };
        write!(f, "{c}_{}", self.channel.symbol())
    }
}

impl FromStr for ParameterName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown parameter `{s}` (expected a_T..c_W)"));
        let (c, ch) = s.split_once('_').ok_or_else(bad)?;
        let coefficient = match c {
            "a" => Coefficient::A,
            "b" => Coefficient::B,
            "c" => Coefficient::C,
            _ => return Err(bad()),
        };
        let channel = Channel::ALL
            .into_iter()
            .find(|x| x.symbol() == ch)
            .ok_or_else(bad)?;
        Ok(ParameterName {
            coefficient,
            channel,
        })
    }
}

/// Builds the violin curve for one parameter from the participants whose
/// continuous fit meets the RMSE bar on every channel.
pub fn violin_data(parameter: ParameterName, cohort: &[(HybridModel, FitReport)]) -> Result<KdeCurve> {
    let samples: Vec<f64> = cohort
        .iter()
        .filter(|(_, r)| r.rmse_all_within_bar())
        .map(|(m, _)| parameter.extract(m))
        .collect();
    if samples.len() < 2 {
        return Err(Error::InsufficientFits {
            needed: 2,
            found: samples.len(),
        });
    }
    kde_auto(&samples, VIOLIN_POINTS)
}
