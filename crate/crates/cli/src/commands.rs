use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use ensimp::data::{load_csv, save_csv, save_mask_csv};
use ensimp::ensemble::build;
use ensimp::eval::export::{export_results, render_summary, report_from_dir, write_kappa_points};
use ensimp::eval::{accuracy, kappa_error_points, run_experiment};
use ensimp::impute::{impute_collapsed, multiple_impute};
use ensimp::missing::inject_mcar;
use ensimp::{
    Dataset, EmConfig, EnsembleConfig, EnsembleModel, Exec, ImputeConfig, ImputerKind, LabelColumn, MethodId,
    MissingnessSpec, Seed, TestImputation, TreeConfig,
};

use crate::config::{RawConfig, RunConfig, OUTPUT_ENV};
use crate::{ImputeArgs, ImputeTuning, InjectArgs, KappaArgs, PredictArgs, ReportArgs, RunArgs, TrainArgs};

pub const DEFAULT_SEED: u64 = 1;

/// Exit status class: validation problems are found before any work starts.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

pub struct Context {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn check(&self) -> Result<(), Failure> {
        if self.workers == Some(0) {
            return Err(Failure::Validation(anyhow!("--workers must be >= 1")));
        }
        Ok(())
    }

    /// Runs `f` under the requested worker count.
    fn exec<T: Send>(&self, f: impl FnOnce(Exec) -> T + Send) -> Result<T, Failure> {
        match self.workers {
            Some(1) => Ok(f(Exec::Sequential)),
            #[cfg(feature = "parallel")]
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().runtime()?;
                Ok(pool.install(|| f(Exec::Parallel)))
            }
            #[cfg(not(feature = "parallel"))]
            Some(_) => {
                log::warn!("built without the parallel feature; running sequentially");
                Ok(f(Exec::Sequential))
            }
            None => Ok(f(Exec::Parallel)),
        }
    }
}

fn label(s: &str) -> LabelColumn {
    s.parse().unwrap_or_else(|e| match e {})
}

fn load(path: &Path, column: &str) -> Result<Dataset, Failure> {
    load_csv(path, &label(column))
        .with_context(|| format!("loading {}", path.display()))
        .invalid()
}

fn output_env() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn impute_config(t: &ImputeTuning) -> ImputeConfig {
    ImputeConfig {
        em: EmConfig {
            tol: t.em_tol,
            max_iter: t.em_max_iter,
            ridge: t.em_ridge,
            ..EmConfig::default()
        },
        z_bound: t.z_bound,
    }
}

pub fn run(ctx: &Context, args: RunArgs) -> Result<(), Failure> {
    ctx.check()?;
    let mut raw = match &args.config {
        Some(p) => RawConfig::load(p).invalid()?,
        None => RawConfig::default(),
    };
    let flags: [(&str, Option<String>); 10] = [
        ("datasets", args.datasets),
        ("data_dir", args.data_dir.map(|p| p.display().to_string())),
        ("label", args.label),
        ("methods", args.methods),
        ("ratios", args.ratios),
        ("repetitions", args.reps.map(|v| v.to_string())),
        ("folds", args.folds.map(|v| v.to_string())),
        ("ensemble_size", args.ensemble_size.map(|v| v.to_string())),
        ("imputations", args.imputations.map(|v| v.to_string())),
        ("output_dir", args.output.map(|p| p.display().to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            raw.set(key, &v).invalid()?;
        }
    }
    for pair in &args.set {
        raw.set_pair(pair).invalid()?;
    }
    if let Some(s) = ctx.seed {
        raw.set("seed", &s.to_string()).invalid()?;
    }
    let cfg = RunConfig::from_raw(&raw, output_env()).invalid()?;

    let mut datasets = Vec::with_capacity(cfg.datasets.len());
    for src in &cfg.datasets {
        datasets.push(
            load_csv(&src.path, &src.label)
                .with_context(|| format!("config key 'datasets': loading {}", src.path.display()))
                .invalid()?,
        );
    }
    log::info!(
        "{} dataset(s), {} methods, {} ratios, T={}, {} folds, B={}, M={}, seed {}",
        datasets.len(),
        cfg.grid.methods.len(),
        cfg.grid.ratios.len(),
        cfg.grid.repetitions,
        cfg.grid.folds,
        cfg.grid.ensemble.ensemble_size,
        cfg.grid.ensemble.imputations,
        cfg.grid.master_seed
    );

    let output = ctx.exec(|exec| run_experiment(&cfg.grid, &datasets, exec))?.runtime()?;
    let files = export_results(&output, &cfg.output_dir).runtime()?;
    log::info!("wrote {} files under {}", files.len(), cfg.output_dir.display());
    let summary = cfg.output_dir.join("summary.txt");
    let text = std::fs::read_to_string(&summary)
        .with_context(|| format!("reading {}", summary.display()))
        .runtime()?;
    print!("{text}");
    if !output.failures.is_empty() {
        return Err(Failure::Runtime(anyhow!(
            "{} dataset(s) failed: {}",
            output.failures.len(),
            output
                .failures
                .iter()
                .map(|f| f.dataset.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    Ok(())
}

fn default_mask_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.mask.csv"))
}

pub fn inject(ctx: &Context, args: InjectArgs) -> Result<(), Failure> {
    ctx.check()?;
    let spec = MissingnessSpec::new(args.ratio, ctx.seed());
    spec.validate().context("--ratio").invalid()?;
    let data = load(&args.input, &args.label)?;
    if !data.is_complete() {
        return Err(Failure::Validation(anyhow!(
            "{} already has {} missing cells",
            args.input.display(),
            data.missing_count()
        )));
    }
    let out = inject_mcar(&data, &spec).invalid()?;
    save_csv(&out, &args.output).runtime()?;
    let mask = args.mask.unwrap_or_else(|| default_mask_path(&args.output));
    save_mask_csv(&out, &mask).runtime()?;
    log::info!(
        "removed {} of {} cells; wrote {} and {}",
        out.missing_count(),
        out.n_records() * out.n_features(),
        args.output.display(),
        mask.display()
    );
    Ok(())
}

fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.extension() {
        Some(ext) => path.with_file_name(format!("{stem}_{i}.{}", ext.to_string_lossy())),
        None => path.with_file_name(format!("{stem}_{i}")),
    }
}

pub fn impute(ctx: &Context, args: ImputeArgs) -> Result<(), Failure> {
    ctx.check()?;
    let kind: ImputerKind = args.method.parse().context("--method").invalid()?;
    let cfg = impute_config(&args.tuning);
    cfg.validate().invalid()?;
    if args.multiple == 0 {
        return Err(Failure::Validation(anyhow!("--multiple must be >= 1")));
    }
    if args.multiple > 1 && !kind.is_stochastic() {
        return Err(Failure::Validation(anyhow!("--multiple needs a stochastic imputer (grandi or em), got {kind}")));
    }
    let data = load(&args.input, &args.label)?;
    let seed = Seed::new(ctx.seed());

    if args.average || args.multiple == 1 {
        let (_, out) = ctx
            .exec(|exec| impute_collapsed(kind, &data, args.multiple, &cfg, seed, exec))?
            .runtime()?;
        save_csv(&out, &args.output).runtime()?;
        log::info!(
            "{kind}: filled {} cells{}; wrote {}",
            data.missing_count(),
            if args.multiple > 1 { format!(" (average of {})", args.multiple) } else { String::new() },
            args.output.display()
        );
    } else {
        let (_, copies) = ctx
            .exec(|exec| multiple_impute(kind, &data, args.multiple, &cfg, seed, exec))?
            .runtime()?;
        for (i, copy) in copies.iter().enumerate() {
            let p = numbered(&args.output, i + 1);
            save_csv(copy, &p).runtime()?;
            log::info!("wrote {}", p.display());
        }
    }
    Ok(())
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<(), Failure> {
    ctx.check()?;
    let method: MethodId = args.method.parse().context("--method").invalid()?;
    let test_imputation: TestImputation = args.test_imputation.parse().context("--test-imputation").invalid()?;
    let icfg = impute_config(&args.tuning);
    let config = EnsembleConfig {
        ensemble_size: args.ensemble_size,
        imputations: args.imputations,
        tree: TreeConfig {
            min_leaf_weight: args.min_leaf_weight,
            max_depth: args.max_depth,
            ..TreeConfig::default()
        },
        em: icfg.em,
        z_bound: icfg.z_bound,
        seed: ctx.seed(),
        test_imputation,
    };
    config.validate_for(method).invalid()?;
    let data = load(&args.input, &args.label)?;

    let model = ctx.exec(|exec| build(method, &data, &config, exec))?.runtime()?;
    model.save(&args.model).runtime()?;
    let leaves: usize = model.members.iter().map(|m| m.tree.n_leaves()).sum();
    log::info!(
        "{method}: {} member(s), {leaves} leaves in total; wrote {}",
        model.len(),
        args.model.display()
    );
    if args.dump_tree {
        for (i, member) in model.members.iter().enumerate() {
            println!("# member {i}");
            print!("{}", member.tree.dump(Some(&model.feature_names)));
        }
    }
    Ok(())
}

fn load_model(path: &Path, seed: Option<u64>) -> Result<EnsembleModel, Failure> {
    let mut model = EnsembleModel::load(path)
        .with_context(|| format!("loading model {}", path.display()))
        .invalid()?;
    if let Some(s) = seed {
        model.seed = s;
    }
    Ok(model)
}

fn load_test(path: &Path, column: &str, model: &EnsembleModel) -> Result<Dataset, Failure> {
    let data = load(path, column)?;
    if data.n_features() != model.n_features {
        return Err(Failure::Validation(anyhow!(
            "{} has {} attributes, the model expects {}",
            path.display(),
            data.n_features(),
            model.n_features
        )));
    }
    if data.meta().feature_names != model.feature_names {
        log::warn!("attribute names differ from the training data; matching by position");
    }
    data.align_classes(&model.class_names)
        .with_context(|| format!("labels of {}", path.display()))
        .invalid()
}

pub fn predict(ctx: &Context, args: PredictArgs) -> Result<(), Failure> {
    ctx.check()?;
    let model = load_model(&args.model, ctx.seed)?;
    let test = load_test(&args.input, &args.label, &model)?;
    let predicted = ctx.exec(|exec| model.predict(&test, exec))?.runtime()?;

    let sink: Box<dyn std::io::Write> = match &args.output {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .runtime()?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["record", "predicted", "actual"]).runtime()?;
    for (r, &p) in predicted.iter().enumerate() {
        w.write_record([
            r.to_string(),
            model.class_names[p].clone(),
            model.class_names[test.label(r)].clone(),
        ])
        .runtime()?;
    }
    w.flush().runtime()?;
    let acc = accuracy(&predicted, test.labels()).runtime()?;
    log::info!("{}: accuracy {acc:.4} on {} records", model.method, test.n_records());
    Ok(())
}

pub fn kappa(ctx: &Context, args: KappaArgs) -> Result<(), Failure> {
    ctx.check()?;
    let model = load_model(&args.ensemble, ctx.seed)?;
    if model.len() < 2 {
        return Err(Failure::Validation(anyhow!(
            "{} is a single-classifier model ({}); kappa-error needs an ensemble",
            args.ensemble.display(),
            model.method
        )));
    }
    let test = load_test(&args.test, &args.label, &model)?;
    let votes = ctx.exec(|exec| model.member_predictions(&test, exec))?.runtime()?;
    let points = kappa_error_points(&votes, test.labels(), model.n_classes).runtime()?;
    write_kappa_points(&points, &args.output).runtime()?;
    log::info!("{} member pairs; wrote {}", points.len(), args.output.display());
    Ok(())
}

pub fn report(ctx: &Context, args: ReportArgs) -> Result<(), Failure> {
    ctx.check()?;
    let dir = args
        .dir
        .or_else(output_env)
        .unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_OUTPUT));
    let (tables, ranks) = report_from_dir(&dir).invalid()?;
    print!("{}", render_summary(&tables, &ranks));
    Ok(())
}
