//! Run configuration: a JSON document validated against
//! `schema/run_config.schema.json` before any computation.

use std::fs;
use std::path::{Path, PathBuf};

use prisens::model::BinomialGroup;
use prisens::sampler::synth_gp_data;
use prisens::sensitivity::EstimatorOptions;
use prisens::sweep::Channel;
use prisens::{fixtures, Bootstrap, DataSet, Estimator, McmcConfig, ModelKind, ModelSpec, NeighborSpec, PriorSpec, SweepGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub base_prior: Option<PriorSpec>,
    #[serde(default)]
    pub sampler: Option<McmcConfig>,
    #[serde(default)]
    pub alternatives: Vec<PriorSpec>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    #[serde(default)]
    pub estimator: Option<OneOrMany<Estimator>>,
    #[serde(default)]
    pub neighbors: Option<NeighborSpec>,
    /// `null` keeps the default (200 resamples); `resamples: 0` disables.
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub unstable_fraction: Option<f64>,
    /// Also sweep the reweighted posterior mean of this column.
    #[serde(default)]
    pub mean_shift_column: Option<String>,
    #[serde(default)]
    pub channels: Option<Vec<Channel>>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub data: DataConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureName {
    NormalSeven,
    RatTumor,
    SmallBinomial,
    Gp,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Fixture(FixtureName),
    /// CSV with header `x` (normal), `y,n` (binomial) or `x,y` (regression).
    File(PathBuf),
    Values(Vec<f64>),
    Groups(Vec<(u64, u64)>),
    Points(Vec<(f64, f64)>),
    SyntheticGp { n: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub formats: Option<Vec<Format>>,
}

/// A parsed config with relative paths resolved against its directory.
pub struct Loaded {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let config: RunConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base_dir })
}

fn read_table<R: std::io::Read>(rdr: R, label: &str, header: &[&str]) -> Result<Vec<Vec<String>>, CliError> {
    let mut rdr = csv::Reader::from_reader(rdr);
    let got: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{label}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if got != header {
        return Err(CliError::Config(format!(
            "{label}: expected header {:?}, found {:?}",
            header.join(","),
            got.join(",")
        )));
    }
    rdr.records()
        .map(|r| {
            r.map(|r| r.iter().map(|f| f.trim().to_string()).collect())
                .map_err(|e| CliError::Config(format!("{label}: {e}")))
        })
        .collect()
}

fn parse<T: std::str::FromStr>(s: &str, label: &str, row: usize) -> Result<T, CliError> {
    s.parse().map_err(|_| CliError::Config(format!("{label}: row {}: cannot parse {s:?}", row + 1)))
}

/// Reads a data file in the layout `kind` expects.
pub fn read_data_file(path: &Path, kind: ModelKind) -> Result<DataSet, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_data(file, &path.display().to_string(), kind)
}

/// Parses data CSV: header `x` (normal), `y,n` (binomial) or `x,y`
/// (regression).
pub fn parse_data<R: std::io::Read>(rdr: R, label: &str, kind: ModelKind) -> Result<DataSet, CliError> {
    match kind {
        ModelKind::ConjugateNormal => {
            let rows = read_table(rdr, label, &["x"])?;
            let xs = rows.iter().enumerate().map(|(i, r)| parse(&r[0], label, i)).collect::<Result<_, _>>()?;
            Ok(DataSet::Normal(xs))
        }
        ModelKind::BinomialBetaP1 | ModelKind::BinomialBetaP2 => {
            let rows = read_table(rdr, label, &["y", "n"])?;
            let gs = rows
                .iter()
                .enumerate()
                .map(|(i, r)| Ok(BinomialGroup { y: parse(&r[0], label, i)?, n: parse(&r[1], label, i)? }))
                .collect::<Result<_, CliError>>()?;
            Ok(DataSet::Binomial(gs))
        }
        ModelKind::GpRegression => {
            let rows = read_table(rdr, label, &["x", "y"])?;
            let pts = rows
                .iter()
                .enumerate()
                .map(|(i, r)| Ok((parse(&r[0], label, i)?, parse(&r[1], label, i)?)))
                .collect::<Result<_, CliError>>()?;
            Ok(DataSet::Regression(pts))
        }
    }
}

fn fixture_data(name: FixtureName) -> Result<DataSet, CliError> {
    Ok(match name {
        FixtureName::NormalSeven => DataSet::Normal(fixtures::NORMAL_SEVEN.to_vec()),
        FixtureName::RatTumor => DataSet::Binomial(fixtures::rat_tumor()),
        FixtureName::SmallBinomial => DataSet::Binomial(fixtures::small_binomial()),
        FixtureName::Gp => synth_gp_data(fixtures::GP_POINTS, fixtures::GP_SEED)?,
    })
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let kind = self.config.model.kind;
        let data = match &self.config.model.data {
            DataConfig::Fixture(name) => fixture_data(*name)?,
            DataConfig::File(p) => read_data_file(&self.resolve(p), kind)?,
            DataConfig::Values(v) => DataSet::Normal(v.clone()),
            DataConfig::Groups(g) => DataSet::Binomial(g.iter().map(|&(y, n)| BinomialGroup { y, n }).collect()),
            DataConfig::Points(p) => DataSet::Regression(p.clone()),
            DataConfig::SyntheticGp { n, seed } => synth_gp_data(*n, *seed)?,
        };
        let prior = self.config.base_prior.clone().unwrap_or_else(|| kind.default_prior());
        Ok(ModelSpec::new(kind, data, prior)?)
    }

    /// Flag, then top-level config, then sampler block, then 0.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.config.seed).or(self.config.sampler.map(|s| s.seed)).unwrap_or(0)
    }

    pub fn sampler(&self, seed: u64) -> McmcConfig {
        let kind = self.config.model.kind;
        let mut cfg = self.config.sampler.unwrap_or_else(|| McmcConfig::for_kind(kind, seed));
        cfg.seed = seed;
        cfg
    }

    pub fn estimator_options(&self, seed: u64, resamples: Option<usize>) -> Result<EstimatorOptions, CliError> {
        let mut opts = EstimatorOptions::default();
        if let Some(f) = self.config.unstable_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::Config(format!("unstable_fraction must lie in [0, 1], got {f}")));
            }
            opts.unstable_fraction = f;
        }
        let bs = self.config.bootstrap;
        let n = resamples.or(bs.map(|b| b.resamples)).unwrap_or(Bootstrap::default().resamples);
        let bs_seed = bs.and_then(|b| b.seed).unwrap_or(seed);
        opts.bootstrap = (n > 0).then_some(Bootstrap { resamples: n, seed: bs_seed });
        Ok(opts)
    }

    pub fn estimators(&self, flag: &[Estimator]) -> Vec<Estimator> {
        if !flag.is_empty() {
            return flag.to_vec();
        }
        match &self.config.estimator {
            Some(e) => e.to_vec(),
            None if self.config.model.kind == ModelKind::ConjugateNormal => vec![Estimator::Plain],
            None => vec![Estimator::Joint],
        }
    }

    pub fn neighbors(&self, knn: Option<usize>, epsilon: Option<f64>) -> NeighborSpec {
        let mut spec = self.config.neighbors.clone().unwrap_or_default();
        if let Some(k) = knn {
            spec.mode = prisens::sensitivity::NeighborMode::Knn(k);
        }
        if let Some(e) = epsilon {
            spec.mode = prisens::sensitivity::NeighborMode::EpsilonBall(e);
        }
        spec
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.config.output.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve(p),
            (None, None) => PathBuf::from("."),
        }
    }

    pub fn formats(&self, flag: &[Format]) -> Vec<Format> {
        if !flag.is_empty() {
            return flag.to_vec();
        }
        self.config.output.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Svg])
    }
}
