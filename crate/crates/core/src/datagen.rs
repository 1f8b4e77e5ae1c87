//! Synthetic cause-effect pairs with additive (`Y = f(X) + E`) or
//! location-scale (`Y = f(X) + g(X) E`) mechanisms and skewed or Gaussian
//! noise. Mechanisms are random saturating sigmoids.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::distributions::{gno_sample, sn_sample, GnoParams, SkewNormalParams};
use crate::error::{Error, Result};
use crate::inference::Direction;
use crate::seed::{derive_seed, rng_from_seed};

/// Floor added to `|g|` to keep the scale function positive.
pub const SCALE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "AN")]
    An,
    #[serde(rename = "ANs")]
    Ans,
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "LSs")]
    Lss,
}

impl Setting {
    pub fn is_location_scale(self) -> bool {
        matches!(self, Setting::Ls | Setting::Lss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Noise {
    SkewNormal { lambda: f64 },
    Gno { k: f64 },
    Gaussian,
}

impl Noise {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            Noise::SkewNormal { lambda } => sn_sample(&SkewNormalParams::new(0.0, 1.0, lambda)?, n, rng),
            Noise::Gno { k } => gno_sample(&GnoParams::new(0.0, 1.0, k)?, n, rng),
            Noise::Gaussian => Ok((0..n).map(|_| rng.sample(StandardNormal)).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub setting: Setting,
    pub noise: Noise,
    pub n: usize,
    pub seed: u64,
}

/// `s(x) = a b (x + c) / (1 + |b (x + c)|)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sigmoid {
    pub fn eval(&self, x: f64) -> f64 {
        let u = self.b * (x + self.c);
        self.a * u / (1.0 + u.abs())
    }
}

fn signed_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random::<bool>() {
        m
    } else {
        -m
    }
}

/// `|a|, |b| ~ U(0.5, 2)` with independent random signs, `c ~ U(-2, 2)`.
pub fn sample_sigmoid<R: Rng + ?Sized>(rng: &mut R) -> Sigmoid {
    let a = signed_uniform(rng, 0.5, 2.0);
    let b = signed_uniform(rng, 0.5, 2.0);
    let c = rng.random_range(-2.0..2.0);
    Sigmoid { a, b, c }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Variance of the cause.
    pub sigma2: f64,
    pub f: Sigmoid,
    /// Scale sigmoid before the positivity transform; absent for additive settings.
    pub g: Option<Sigmoid>,
}

impl MechanismParams {
    pub fn location(&self, x: f64) -> f64 {
        self.f.eval(x)
    }

    /// `|g(x)| + 0.1`, or 1 for additive settings.
    pub fn scale(&self, x: f64) -> f64 {
        self.g.map_or(1.0, |g| g.eval(x).abs() + SCALE_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// The drawn noise; `(y - f(x)) / g(x)`.
    #[serde(skip)]
    pub noise: Vec<f64>,
    pub true_direction: Direction,
    pub spec: PairSpec,
    pub mechanism: MechanismParams,
}

pub fn generate_pair(spec: &PairSpec) -> Result<LabeledPair> {
    if spec.n == 0 {
        return Err(Error::Config("pair needs at least one observation".into()));
    }
    let mut rng = rng_from_seed(spec.seed);
    let sigma2 = rng.random_range(1.0..=2.0);
    let sd = f64::sqrt(sigma2);
    let x: Vec<f64> = (0..spec.n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let f = sample_sigmoid(&mut rng);
    let g = spec.setting.is_location_scale().then(|| sample_sigmoid(&mut rng));
    let mechanism = MechanismParams { sigma2, f, g };
    let noise = spec.noise.sample(spec.n, &mut rng).map_err(|e| Error::Config(format!("invalid noise law: {e}")))?;
    let y = x.iter().zip(&noise).map(|(&xi, &e)| mechanism.location(xi) + mechanism.scale(xi) * e).collect();
    Ok(LabeledPair { x, y, noise, true_direction: Direction::XtoY, spec: *spec, mechanism })
}

/// Named benchmark families. The `*_m455`, `*_985` and `*_1750` classes
/// carry skewed noise with skewness about -0.455, 0.985 and 1.750; the plain
/// names carry Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetName {
    #[serde(rename = "ANs_m455")]
    AnsM455,
    #[serde(rename = "ANs_985")]
    Ans985,
    #[serde(rename = "ANs_1750")]
    Ans1750,
    #[serde(rename = "LSs_m455")]
    LssM455,
    #[serde(rename = "LSs_985")]
    Lss985,
    #[serde(rename = "LSs_1750")]
    Lss1750,
    #[serde(rename = "AN")]
    An,
    #[serde(rename = "ANs")]
    Ans,
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "LSs")]
    Lss,
}

const DATASET_NAMES: [(&str, DatasetName); 10] = [
    ("ANs_m455", DatasetName::AnsM455),
    ("ANs_985", DatasetName::Ans985),
    ("ANs_1750", DatasetName::Ans1750),
    ("LSs_m455", DatasetName::LssM455),
    ("LSs_985", DatasetName::Lss985),
    ("LSs_1750", DatasetName::Lss1750),
    ("AN", DatasetName::An),
    ("ANs", DatasetName::Ans),
    ("LS", DatasetName::Ls),
    ("LSs", DatasetName::Lss),
];

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DATASET_NAMES
            .iter()
            .find(|(name, _)| *name == s)
            .map(|(_, d)| *d)
            .ok_or_else(|| Error::Config(format!("unknown dataset '{s}'")))
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = DATASET_NAMES.iter().find(|(_, d)| d == self).map(|(n, _)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl DatasetName {
    pub fn setting(self) -> Setting {
        use DatasetName::*;
        match self {
            AnsM455 | Ans985 | Ans1750 | Ans => Setting::Ans,
            An => Setting::An,
            LssM455 | Lss985 | Lss1750 | Lss => Setting::Lss,
            Ls => Setting::Ls,
        }
    }

    /// Noise laws in the order pairs alternate between them.
    pub fn noise_laws(self) -> Vec<Noise> {
        use DatasetName::*;
        match self {
            AnsM455 | LssM455 => vec![Noise::SkewNormal { lambda: -2.0 }, Noise::Gno { k: 0.15 }],
            Ans985 | Lss985 => vec![Noise::SkewNormal { lambda: 20.0 }, Noise::Gno { k: -0.31 }],
            Ans1750 | Lss1750 => vec![Noise::Gno { k: -0.5 }],
            An | Ans | Ls | Lss => vec![Noise::Gaussian],
        }
    }

    pub fn all() -> impl Iterator<Item = DatasetName> {
        DATASET_NAMES.iter().map(|(_, d)| *d)
    }
}

/// `pairs` pairs of size `n`; pair `i` uses noise law `i mod L` and seed
/// `derive_seed(master_seed, i)`.
pub fn generate_dataset(name: DatasetName, pairs: usize, n: usize, master_seed: u64) -> Result<Vec<LabeledPair>> {
    if pairs == 0 {
        return Err(Error::Config("dataset needs at least one pair".into()));
    }
    let laws = name.noise_laws();
    (0..pairs)
        .map(|i| {
            generate_pair(&PairSpec {
                setting: name.setting(),
                noise: laws[i % laws.len()],
                n,
                seed: derive_seed(master_seed, i as u64),
            })
        })
        .collect()
}
