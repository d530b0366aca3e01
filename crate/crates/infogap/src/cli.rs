//! Command-line front end.
//!
//! One thin binary over the library: `ingest`, `perturb`, `train`, `mi`,
//! `gap`, `bound`, `sweep`, `quantize-sweep`, and `oracle-verify`, sharing
//! the global `--seed`, `--config <json>`, and `--out <dir>` flags. Exit
//! codes: 0 on success, 2 on validation/format errors, 3 on numeric
//! failures. Single-shot evaluation commands reuse the sweep's seed
//! derivations, so `mi`/`gap`/`bound` on a model trained with `train`
//! reproduce the corresponding sweep record exactly.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bound::b_delta;
use crate::classifier::{gap_quantile, loss_rows};
use crate::data::{perturb, save_idx, LabeledDataset};
use crate::error::{Error, Result};
use crate::harness::{
    assemble_model_bound, emit_report, eval_seed, evaluation_split, lambda_sweep, load_eval_pool,
    load_train_pool, model_from_json, model_to_json, train_model, training_split,
    ExperimentConfig, Model, TestVariant,
};
use crate::mi::mi_bound;
use crate::oracle::run_suite;
use crate::quantizer::{best_report_index, sweep_k};

#[derive(Debug, Parser)]
#[command(
    name = "infogap",
    version,
    about = "Trains stochastic encoder-decoder classifiers and estimates every term of their high-probability testing-gap bound"
)]
pub struct Cli {
    /// Run seed; every random stream derives from it.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Experiment config document; omitted fields take desk-scale defaults.
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the config's out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Full-size setup: 5000 training samples, wide layers, 200 epochs.
    #[arg(long, global = true)]
    pub full_scale: bool,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_variant(s: &str) -> std::result::Result<TestVariant, String> {
    match s {
        "clean" => Ok(TestVariant::Clean),
        "perturbed" => Ok(TestVariant::Perturbed),
        other => Err(format!("unknown variant {other:?} (expected clean or perturbed)")),
    }
}

/// Flags shared by the single-model evaluation commands.
#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Saved model document; defaults to <out_dir>/model.json.
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,

    /// Evaluation distribution: clean or perturbed.
    #[arg(long, default_value = "clean", value_parser = parse_variant)]
    pub variant: TestVariant,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the configured IDX pairs; write a dataset summary.
    Ingest,
    /// Write a perturbed copy of the test pair (random rotation, then
    /// integer translation with zero padding).
    Perturb {
        /// Perturbation stream seed; defaults to one derived from --seed.
        #[arg(long)]
        perturb_seed: Option<u64>,
    },
    /// Train one encoder-decoder pair; save the model and its loss curve.
    Train {
        /// Regularization weight; defaults to the first grid value.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Variational mutual-information bound of a saved model.
    Mi(EvalArgs),
    /// Testing-gap quantile of a saved model over disjoint mini-tests.
    Gap(EvalArgs),
    /// Full assembled testing-gap bound of a saved model.
    Bound(EvalArgs),
    /// Train and evaluate the whole (lambda, seed, variant) grid; emit CSVs.
    Sweep,
    /// Cell-count tradeoff table (epsilon_hat, r_hat, objective) per K.
    QuantizeSweep(EvalArgs),
    /// Brute-force oracle suite on small discrete worlds.
    OracleVerify,
}

/// Dispatches a parsed command line. Errors bubble up with their exit code;
/// the binary prints them and exits.
pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if cli.full_scale {
        config.apply_full_scale();
    }
    config.validate()?;

    match &cli.command {
        Command::Ingest => cmd_ingest(&config),
        Command::Perturb { perturb_seed } => cmd_perturb(&config, cli.seed, *perturb_seed),
        Command::Train { lambda } => cmd_train(&config, cli.seed, *lambda),
        Command::Mi(args) => cmd_mi(&config, cli.seed, args),
        Command::Gap(args) => cmd_gap(&config, cli.seed, args),
        Command::Bound(args) => cmd_bound(&config, cli.seed, args),
        Command::Sweep => cmd_sweep(&config),
        Command::QuantizeSweep(args) => cmd_quantize_sweep(&config, cli.seed, args),
        Command::OracleVerify => cmd_oracle_verify(cli.seed),
    }
}

fn dataset_summary(ds: &LabeledDataset) -> serde_json::Value {
    let mut hist = vec![0u64; ds.num_classes];
    for &y in &ds.labels {
        hist[y as usize] += 1;
    }
    json!({
        "samples": ds.len(),
        "rows": ds.rows,
        "cols": ds.cols,
        "classes": ds.num_classes,
        "label_histogram": hist,
    })
}

fn write_json(config: &ExperimentConfig, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}

fn cmd_ingest(config: &ExperimentConfig) -> Result<()> {
    let train = load_train_pool(config)?;
    let test = load_eval_pool(config)?;
    let summary = json!({ "train": dataset_summary(&train), "test": dataset_summary(&test) });
    let path = write_json(config, "ingest-summary.json", &summary)?;
    println!(
        "train: {} samples of {}x{} in {} classes",
        train.len(),
        train.rows,
        train.cols,
        train.num_classes
    );
    println!(
        "test:  {} samples of {}x{} in {} classes",
        test.len(),
        test.rows,
        test.cols,
        test.num_classes
    );
    println!("summary written to {}", path.display());
    Ok(())
}

fn cmd_perturb(config: &ExperimentConfig, seed: u64, perturb_seed: Option<u64>) -> Result<()> {
    let test = load_eval_pool(config)?;
    let mut spec = config.perturb_spec(seed);
    if let Some(ps) = perturb_seed {
        spec.rng_seed = ps;
    }
    let shifted = perturb(&test, &spec)?;
    fs::create_dir_all(&config.out_dir)?;
    let images = config.out_dir.join("perturbed-images-idx3-ubyte.gz");
    let labels = config.out_dir.join("perturbed-labels-idx1-ubyte.gz");
    save_idx(&shifted, &images, &labels)?;
    println!(
        "perturbed {} samples (rotation up to {:.4} rad, translation up to {} px, stream {})",
        shifted.len(),
        spec.angle_range,
        spec.max_translation,
        spec.rng_seed
    );
    println!("images written to {}", images.display());
    println!("labels written to {}", labels.display());
    Ok(())
}

fn cmd_train(config: &ExperimentConfig, seed: u64, lambda: Option<f64>) -> Result<()> {
    let lambda = lambda.unwrap_or_else(|| config.effective_lambda_grid()[0]);
    let pool = load_train_pool(config)?;
    let (train_set, _) = training_split(config, &pool, seed)?;
    let trained = train_model(config, lambda, seed, &train_set)?;

    fs::create_dir_all(&config.out_dir)?;
    let model_path = config.out_dir.join("model.json");
    let model = Model { encoder: trained.encoder, decoder: trained.decoder };
    fs::write(&model_path, model_to_json(&model)?)?;
    let curve_path = config.out_dir.join("loss_curve.csv");
    let mut curve = String::from("epoch,objective\n");
    for (i, v) in trained.loss_curve.iter().enumerate() {
        curve.push_str(&format!("{i},{v}\n"));
    }
    fs::write(&curve_path, curve)?;

    println!(
        "trained {} encoder (lambda {}, seed {}) on {} samples",
        config.encoder_family,
        lambda,
        seed,
        train_set.len()
    );
    println!(
        "objective {} -> {}",
        trained.loss_curve.first().unwrap(),
        trained.loss_curve.last().unwrap()
    );
    println!("model written to {}", model_path.display());
    println!("loss curve written to {}", curve_path.display());
    Ok(())
}

fn load_model(config: &ExperimentConfig, path: &Option<PathBuf>) -> Result<Model> {
    let path = path.clone().unwrap_or_else(|| config.out_dir.join("model.json"));
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::config(format!("cannot read model {}: {e}", path.display())))?;
    model_from_json(&text)
}

/// (reference, mini-test pool) for a single-shot evaluation, matching the
/// sweep's carve for the same seed and variant.
fn reference_and_pool(
    config: &ExperimentConfig,
    seed: u64,
    variant: TestVariant,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let same_source = config.train_images == config.test_images
        && config.train_labels == config.test_labels;
    let eval_pool = if same_source {
        let pool = load_train_pool(config)?;
        training_split(config, &pool, seed)?.1
    } else {
        load_eval_pool(config)?
    };
    evaluation_split(config, &eval_pool, variant, seed)
}

fn cmd_mi(config: &ExperimentConfig, seed: u64, args: &EvalArgs) -> Result<()> {
    let model = load_model(config, &args.model)?;
    let (reference, _) = reference_and_pool(config, seed, args.variant)?;
    let mi = mi_bound(&model.encoder, &reference)?;
    let path = write_json(config, "mi.json", &serde_json::to_value(&mi)?)?;
    println!(
        "variant {}: total KL {} nats over {} units, sqrt bound {}",
        args.variant,
        mi.total_kl,
        mi.per_unit_kl.len(),
        mi.sqrt_bound
    );
    println!("estimate written to {}", path.display());
    Ok(())
}

fn cmd_gap(config: &ExperimentConfig, seed: u64, args: &EvalArgs) -> Result<()> {
    let model = load_model(config, &args.model)?;
    let (reference, pool) = reference_and_pool(config, seed, args.variant)?;
    let gap = gap_quantile(
        &model.encoder,
        &model.decoder,
        &reference,
        &pool,
        config.mini_test_size,
        config.quantile_level,
        config.mc_samples,
        eval_seed(seed),
    )?;
    let path = write_json(config, "gap.json", &serde_json::to_value(&gap)?)?;
    println!(
        "variant {}: {}-quantile of the gap is {} over {} mini-tests (reference risk {})",
        args.variant,
        gap.quantile_level,
        gap.quantile_value,
        gap.mini_test_gaps.len(),
        gap.reference_risk
    );
    println!("estimate written to {}", path.display());
    Ok(())
}

fn cmd_bound(config: &ExperimentConfig, seed: u64, args: &EvalArgs) -> Result<()> {
    let model = load_model(config, &args.model)?;
    let (reference, _) = reference_and_pool(config, seed, args.variant)?;
    let mi = mi_bound(&model.encoder, &reference)?;
    let report =
        assemble_model_bound(config, &model.encoder, &model.decoder, &reference, &mi, eval_seed(seed))?;
    let path = write_json(config, "bound.json", &serde_json::to_value(&report)?)?;
    println!(
        "variant {}: total {} at K = {} (quantization {} + information {} + smoothing {} + constants {}, {})",
        args.variant,
        report.total,
        report.chosen_k,
        report.quantization_term,
        report.mi_term,
        report.hellinger_term,
        report.constant_term,
        report.remainder_note
    );
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let artifact = lambda_sweep(config)?;
    let files = emit_report(&artifact, &config.out_dir)?;
    println!(
        "swept {} lambda values x {} seeds x {} variants: {} records, {} failures",
        config.effective_lambda_grid().len(),
        config.seeds.len(),
        config.test_variants.len(),
        artifact.records.len(),
        artifact.failures.len()
    );
    for f in &artifact.failures {
        let variant =
            f.variant.map(|v| format!(" [{v}]")).unwrap_or_default();
        println!("  failed at lambda {} seed {}{}: {} ({})", f.lambda, f.seed, variant, f.message, f.stage);
    }
    for path in files {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_quantize_sweep(config: &ExperimentConfig, seed: u64, args: &EvalArgs) -> Result<()> {
    let model = load_model(config, &args.model)?;
    let (reference, _) = reference_and_pool(config, seed, args.variant)?;
    let es = eval_seed(seed);
    let table = loss_rows(&model.encoder, &model.decoder, &reference, config.mc_samples, es)?;
    let mi = mi_bound(&model.encoder, &reference)?;
    let n = config.mini_test_size as f64;
    let rate = 2f64.sqrt() * b_delta(config.delta, reference.num_classes)? * mi.sqrt_bound * n.ln()
        / n.sqrt();
    let grid: Vec<usize> = config.k_grid.iter().copied().filter(|&k| k <= table.rows).collect();
    if grid.is_empty() {
        return Err(Error::config(format!(
            "no cell count in k_grid fits the {}-sample reference set",
            table.rows
        )));
    }
    let (reports, chosen) = sweep_k(&table, &grid, rate, 50, es)?;
    fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join("quantize_sweep.csv");
    let mut csv = String::from("k,epsilon_hat,r_hat,objective\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.k,
            r.epsilon_hat,
            r.r_hat,
            r.objective.unwrap_or(f64::INFINITY)
        ));
    }
    fs::write(&path, csv)?;
    let best = best_report_index(&reports).expect("nonempty grid");
    println!(
        "variant {}: chose K = {} (grid value {}) with objective {}",
        args.variant,
        chosen,
        grid[best],
        reports[best].objective.unwrap_or(f64::INFINITY)
    );
    println!("table written to {}", path.display());
    Ok(())
}

fn cmd_oracle_verify(seed: u64) -> Result<()> {
    let results = run_suite(seed)?;
    let mut failures = 0;
    for r in &results {
        if r.passed {
            println!("[pass] {} — {}", r.name, r.detail);
        } else {
            failures += 1;
            println!("[FAIL] {} — {}", r.name, r.detail);
        }
    }
    if failures > 0 {
        return Err(Error::numeric(format!("{failures} oracle properties failed")));
    }
    println!("all {} oracle properties hold", results.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommands_parse_with_global_flags() {
        let cli = Cli::parse_from(["infogap", "sweep", "--seed", "7", "--out", "/tmp/x"]);
        assert_eq!(cli.seed, 7);
        assert_eq!(cli.out.as_deref(), Some(std::path::Path::new("/tmp/x")));
        assert!(matches!(cli.command, Command::Sweep));

        let cli = Cli::parse_from(["infogap", "quantize-sweep", "--variant", "perturbed"]);
        match cli.command {
            Command::QuantizeSweep(args) => assert_eq!(args.variant, TestVariant::Perturbed),
            other => panic!("parsed {other:?}"),
        }

        let cli = Cli::parse_from(["infogap", "train", "--lambda", "0.5"]);
        match cli.command {
            Command::Train { lambda } => assert_eq!(lambda, Some(0.5)),
            other => panic!("parsed {other:?}"),
        }

        assert!(Cli::try_parse_from(["infogap", "gap", "--variant", "blurry"]).is_err());
        assert!(Cli::try_parse_from(["infogap", "no-such-command"]).is_err());
    }
}
