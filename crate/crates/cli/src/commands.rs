use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use prisens::sampler::fit as sample;
use prisens::sensitivity::{estimate_from_log_ratios, estimate_latent_marginal, log_ratio_vector};
use prisens::sweep::{mean_shift_to_csv, mean_shift_to_svg, run_mean_shift, run_sweep, surface_to_csv, surface_to_svg, Channel};
use prisens::{DrawMatrix, Estimator, SensitivityResult};

use crate::config::{self, Format, Loaded};
use crate::{CliError, Common, EstimatorArgs};

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn fit(common: &Common) -> Result<(), CliError> {
    let loaded = config::load(&common.config)?;
    let model = loaded.model()?;
    let seed = loaded.seed(common.seed);
    let cfg = loaded.sampler(seed);
    let out = sample(&model, &cfg)?;
    let dir = loaded.out_dir(common.out_dir.as_deref());
    ensure_dir(&dir)?;
    let path = dir.join("draws.csv");
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    out.draws.write_csv(&mut w).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    println!("wrote {}", path.display());

    println!(
        "model {}: {} draws, {} columns, seed {}",
        model.kind(),
        out.draws.n_draws(),
        out.draws.n_cols(),
        seed
    );
    match out.acceptance_rate {
        Some(a) => println!("acceptance rate {a:.4}"),
        None => println!("exact sampler"),
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn read_draws(loaded: &Loaded, path: &Path) -> Result<DrawMatrix, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(DrawMatrix::read_csv(std::io::BufReader::new(file), loaded.config.model.kind.tag())?)
}

fn require_latents(draws: &DrawMatrix, est: Estimator) -> Result<(), CliError> {
    if est == Estimator::LatentMarginal && draws.latent_names().is_empty() {
        return Err(CliError::Config(
            "estimator t3 needs latent columns (prefixed \"eta.\" or \"f.\") in the draws file".into(),
        ));
    }
    Ok(())
}

pub fn sensitivity(common: &Common, est: &EstimatorArgs) -> Result<(), CliError> {
    let loaded = config::load(&common.config)?;
    let model = loaded.model()?;
    let seed = loaded.seed(common.seed);
    let draws = read_draws(&loaded, &est.draws)?;
    let estimators = loaded.estimators(&est.estimator);
    let [estimator] = estimators[..] else {
        return Err(CliError::Config("sensitivity takes exactly one estimator".into()));
    };
    require_latents(&draws, estimator)?;
    if loaded.config.alternatives.is_empty() {
        return Err(CliError::Config("config lists no alternatives".into()));
    }
    let opts = loaded.estimator_options(seed, est.bootstrap)?;
    let spec = loaded.neighbors(est.knn, est.epsilon);
    let base = model.base_prior();
    let results = loaded
        .config
        .alternatives
        .iter()
        .map(|alt| match estimator {
            Estimator::LatentMarginal => estimate_latent_marginal(&draws, base, alt, &spec, &opts),
            _ => estimate_from_log_ratios(&log_ratio_vector(&draws, base, alt)?, &opts),
        })
        .collect::<Result<Vec<SensitivityResult>, _>>()?;
    let json = if results.len() == 1 {
        serde_json::to_string_pretty(&results[0])
    } else {
        serde_json::to_string_pretty(&results)
    }
    .expect("results serialize");
    println!("{json}");
    if let Some(dir) = &common.out_dir {
        ensure_dir(dir)?;
        fs::write(dir.join("sensitivity.json"), format!("{json}\n")).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

pub fn sweep(common: &Common, est: &EstimatorArgs, formats: &[Format]) -> Result<(), CliError> {
    let loaded = config::load(&common.config)?;
    let model = loaded.model()?;
    let seed = loaded.seed(common.seed);
    let draws = read_draws(&loaded, &est.draws)?;
    let grid = loaded.config.sweep.clone().ok_or_else(|| CliError::Config("config has no sweep grid".into()))?;
    let estimators = loaded.estimators(&est.estimator);
    for &e in &estimators {
        require_latents(&draws, e)?;
    }
    let formats = loaded.formats(formats);
    if formats.contains(&Format::Svg) && grid.axes().len() != 2 {
        return Err(CliError::Config("svg output needs a two-axis sweep; use csv for one axis".into()));
    }
    let channels = loaded.config.channels.clone().unwrap_or_else(|| vec![Channel::H2, Channel::Kl]);
    let opts = loaded.estimator_options(seed, est.bootstrap)?;
    let spec = loaded.neighbors(est.knn, est.epsilon);
    let dir = loaded.out_dir(common.out_dir.as_deref());
    ensure_dir(&dir)?;
    let base = model.base_prior();

    let out = |name: &str| -> PathBuf { dir.join(name) };
    for e in estimators {
        let surface = run_sweep(&draws, base, &grid, e, Some(&spec), &opts)?;
        let failed = surface.cells.iter().filter(|c| c.is_err()).count();
        let unstable = surface.cells.iter().filter(|c| c.as_ref().is_ok_and(|r| r.is_unstable())).count();
        let stem = format!("sweep_{}", e.tag());
        for f in &formats {
            match f {
                Format::Csv => write_file(&out(&format!("{stem}.csv")), surface_to_csv(&surface).as_bytes())?,
                Format::Json => write_file(
                    &out(&format!("{stem}.json")),
                    serde_json::to_string_pretty(&surface).expect("surface serializes").as_bytes(),
                )?,
                Format::Svg => {
                    for &ch in &channels {
                        let name = match ch {
                            Channel::H2 => "h2",
                            Channel::Kl => "kl",
                        };
                        write_file(&out(&format!("{stem}_{name}.svg")), surface_to_svg(&surface, ch)?.as_bytes())?;
                    }
                }
            }
        }
        println!("{}: {} cells, {failed} failed, {unstable} unstable", e.tag(), surface.cells.len());
    }
    if let Some(col) = &loaded.config.mean_shift_column {
        let ms = run_mean_shift(&draws, base, &grid, col, &opts)?;
        let stem = format!("mean_shift_{col}");
        for f in &formats {
            match f {
                Format::Csv => write_file(&out(&format!("{stem}.csv")), mean_shift_to_csv(&ms).as_bytes())?,
                Format::Json => write_file(
                    &out(&format!("{stem}.json")),
                    serde_json::to_string_pretty(&ms).expect("surface serializes").as_bytes(),
                )?,
                Format::Svg => write_file(&out(&format!("{stem}.svg")), mean_shift_to_svg(&ms)?.as_bytes())?,
            }
        }
    }
    Ok(())
}
