use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use iteforest_core::coplot::{coplot_export, CoplotBins};
use iteforest_core::estimators::{estimate, export_tau, read_tau_file, EstimatorConfig, HonestSpec, Method};
use iteforest_core::inference::{subsample_inference, InferenceConfig, Response};
use iteforest_core::ingest::{export_dataset, load_dataset, Schema};
use iteforest_core::simbench::{run_experiment, simulate, ExperimentConfig, ModelId, SimModel};
use iteforest_core::synthetic::SyntheticSpec;
use iteforest_core::{Dataset, Error, ForestSpec, Mtry, Result};

use crate::settings::Settings;

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn mtry(s: &Settings, key: &str) -> Result<Mtry> {
    match s.str(key) {
        "third" => Ok(Mtry::Third),
        v => v
            .parse()
            .ok()
            .filter(|&k: &usize| k > 0)
            .map(Mtry::Count)
            .ok_or_else(|| Error::Config(format!("invalid value '{v}' for '{key}'"))),
    }
}

pub fn estimator_config(method: Method, s: &Settings) -> Result<EstimatorConfig> {
    let seed = s.parse("seed")?;
    let trees = s.parse("trees")?;
    let m = mtry(s, "mtry")?;
    let forest = |nodesize: usize| ForestSpec::new(trees, m, nodesize, seed);
    Ok(match method {
        Method::Vt => EstimatorConfig::Vt(forest(s.parse("nodesize")?)),
        Method::VtInteraction => EstimatorConfig::VtInteraction(forest(s.parse("nodesize")?)),
        Method::Cf => EstimatorConfig::Cf(forest(s.parse("nodesize")?)),
        Method::SynCf => EstimatorConfig::SynCf(SyntheticSpec {
            nodesize_grid: s.list("nodesize_grid")?,
            mtry_grid: s.list("mtry_grid")?,
            base_n_trees: s.parse("base_trees")?,
            final_n_trees: s.parse("final_trees")?,
            final_mtry: m,
            final_nodesize: s.parse("final_nodesize")?,
            seed,
        }),
        Method::Bivariate => EstimatorConfig::Bivariate {
            forest: forest(s.parse("bivariate_nodesize")?),
            iterations: s.parse("iterations")?,
        },
        Method::Honest => EstimatorConfig::Honest(HonestSpec {
            forest: forest(s.parse("honest_nodesize")?),
            per_tree_split: s.bool("per_tree_split")?,
        }),
        Method::External => EstimatorConfig::External,
    })
}

fn load(s: &Settings) -> Result<Dataset> {
    let data = PathBuf::from(s.str("data"));
    let schema_path = match s.opt_str("schema") {
        Some(p) => PathBuf::from(p),
        None => with_suffix(&data, ".schema"),
    };
    let schema = Schema::from_file(&schema_path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read schema {}: {io}", schema_path.display())),
        other => other,
    })?;
    load_dataset(&data, &schema)
}

pub fn simulate_cmd(s: &Settings) -> Result<()> {
    let model = SimModel {
        model: s.parse::<ModelId>("model")?,
        sigma: s.parse("sigma")?,
        n: s.parse("n")?,
    };
    let seed: u64 = s.parse("seed")?;
    let replicate: u64 = s.parse("replicate")?;
    let sim = simulate(&model, seed.wrapping_add(replicate))?;
    let out = PathBuf::from(s.str("out"));
    let schema = export_dataset(&out, &sim.dataset, "t", "y")?;
    fs::write(with_suffix(&out, ".schema"), schema.to_text())?;
    let mut w = csv::Writer::from_writer(create(&with_suffix(&out, ".truth.csv"))?);
    w.write_record(["true_tau", "true_propensity"])?;
    for (tau, e) in sim.true_tau.iter().zip(&sim.true_propensity) {
        w.write_record([tau.to_string(), e.to_string()])?;
    }
    w.flush()?;
    s.write_manifest(&with_suffix(&out, ".manifest"))?;
    log::info!("wrote {} rows to {}", model.n, out.display());
    Ok(())
}

pub fn estimate_cmd(s: &Settings) -> Result<()> {
    let data = load(s)?;
    let method: Method = s.parse("method")?;
    let config = estimator_config(method, s)?;
    let result = estimate(&data, &config)?;
    let out = PathBuf::from(s.str("out"));
    export_tau(&out, &result.tau_hat)?;
    s.write_manifest(&with_suffix(&out, ".manifest"))?;
    log::info!("{method}: mean effect {:.4} over {} rows", result.mean_tau(), data.n());
    Ok(())
}

pub fn benchmark_cmd(s: &Settings) -> Result<()> {
    let estimators = s
        .list::<Method>("estimators")?
        .into_iter()
        .map(|m| estimator_config(m, s))
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        models: s.list("models")?,
        estimators,
        n: s.parse("n")?,
        replicates: s.parse("replicates")?,
        strata: s.parse("strata")?,
        sigma: s.parse("sigma")?,
        base_seed: s.parse("seed")?,
        external_dir: s.opt_str("external_dir").map(PathBuf::from),
    };
    let results = run_experiment(&config)?;
    let out = PathBuf::from(s.str("out"));
    fs::create_dir_all(&out)?;
    results.write_table(create(&out.join("results.csv"))?)?;
    results.write_summary(create(&out.join("summary.csv"))?)?;
    let mut w = csv::Writer::from_writer(create(&out.join("failures.csv"))?);
    w.write_record(["model", "estimator", "replicate", "message"])?;
    for f in &results.failures {
        w.write_record([f.model.to_string(), f.estimator.to_string(), f.replicate.to_string(), f.message.clone()])?;
    }
    w.flush()?;
    s.write_manifest(&out.join("manifest.txt"))?;
    log::info!("{} cells, {} failed replicates", results.cells.len(), results.failures.len());
    Ok(())
}

pub fn infer_cmd(s: &Settings) -> Result<()> {
    let data = load(s)?;
    let method: Method = s.parse("method")?;
    let regressors = match s.str("regressors") {
        "all" => None,
        _ => Some(
            s.list::<String>("regressors")?
                .iter()
                .map(|name| {
                    data.names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::Config(format!("unknown regressor '{name}'")))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let response = match s.str("response") {
        "all" => Response::All,
        "treated" => Response::Arm(1),
        "control" => Response::Arm(0),
        v => return Err(Error::Config(format!("invalid response '{v}'"))),
    };
    let config = InferenceConfig {
        subsample_fraction: s.parse("fraction")?,
        n_replicates: s.parse("replicates")?,
        estimator: estimator_config(method, s)?,
        response,
        regressors,
        rescale: s.bool("rescale")?,
        seed: s.parse("seed")?,
        ..Default::default()
    };
    let table = subsample_inference(&data, &config)?;
    let out = PathBuf::from(s.str("out"));
    table.write(create(&out)?)?;
    s.write_manifest(&with_suffix(&out, ".manifest"))?;
    log::info!(
        "{} replicates used, {} dropped",
        table.replicates_used,
        table.replicates_dropped
    );
    Ok(())
}

pub fn coplot_cmd(s: &Settings) -> Result<()> {
    let data = load(s)?;
    let tau = read_tau_file(Path::new(s.str("tau")))?;
    let bins = CoplotBins {
        vertical: s.parse("bins_vertical")?,
        horizontal: s.parse("bins_horizontal")?,
        overlap: s.parse("overlap")?,
    };
    let plot = coplot_export(
        &tau,
        &data,
        s.str("x"),
        s.opt_str("panel"),
        s.str("vertical"),
        s.str("horizontal"),
        bins,
    )?;
    let out = PathBuf::from(s.str("out"));
    plot.write(create(&out)?)?;
    s.write_manifest(&with_suffix(&out, ".manifest"))?;
    Ok(())
}
