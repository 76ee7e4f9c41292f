use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use super::config::{pick, ExperimentConfig};
use super::manifest::{sidecar, Run};
use super::{
    AnchorArgs, CampaignBuildArgs, CampaignCommand, CampaignServeArgs, ClassifyArgs, CliError, Command, DegradeArgs,
    EmbedArgs, MetricsArgs, ReportArgs, ScreeningArgs,
};
use crate::audio::{degrade as degrade_clip, make_anchor, read_wav, write_wav, AnchorKind, WavFormat};
use crate::embeddings::{
    read_embeddings, read_embeddings_csv, write_embeddings, ClassLabel, EmbeddingDataset, LogMelConfig,
    LogMelExtractor,
};
use crate::metrics::{read_manifest, run_batch, LsdConfig};
use crate::mushra::{build_campaign, CampaignItem, ScreeningPolicy};
use crate::separability::{evaluate, evaluate_seeds, AccuracyTable, SplitSpec, DEFAULT_SHRINKAGE};
use crate::service::{export_results, serve, CampaignService, ServiceConfig};

type Result<T> = std::result::Result<T, CliError>;

pub(super) fn dispatch(command: Command, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    match command {
        Command::Degrade(a) => degrade(a, cfg, run),
        Command::Anchor(a) => anchor(a, cfg, run),
        Command::Embed(a) => embed(a, cfg, run),
        Command::Classify(a) => classify(a, cfg, run),
        Command::Metrics(a) => metrics(a, cfg, run),
        Command::Campaign(CampaignCommand::Build(a)) => campaign_build(a, cfg, run),
        Command::Campaign(CampaignCommand::Serve(a)) => campaign_serve(a, cfg, run),
        Command::Report(a) => report(a, cfg, run),
    }
}

fn worker_count(flag: Option<usize>, cfg: &ExperimentConfig) -> usize {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    pick(flag, cfg.workers, default).max(1)
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

/// WAV files under `root` (or `root` itself), sorted for stable ordering.
fn wav_files(root: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
                out.push(path);
            }
        }
        Ok(())
    }
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut out = Vec::new();
    walk(root, &mut out).map_err(|e| CliError::from_io(root, e))?;
    if out.is_empty() {
        return Err(CliError::Data(format!("{}: no WAV files found", root.display())));
    }
    out.sort();
    Ok(out)
}

fn relative<'a>(path: &'a Path, root: &Path) -> &'a Path {
    if root.is_file() {
        return Path::new(path.file_name().expect("file path"));
    }
    path.strip_prefix(root).unwrap_or(path)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::from_io(parent, e))?;
    }
    Ok(())
}

fn write_text(path: Option<&Path>, text: &str, run: &mut Run) -> Result<()> {
    match path {
        Some(p) => {
            create_parent(p)?;
            run.output(p);
            std::fs::write(p, text).map_err(|e| CliError::from_io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Internal(format!("stdout: {e}")))
        }
    }
}

fn degrade(args: DegradeArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let low = pick(args.low, cfg.rates.low, 16000);
    let high = pick(args.high, cfg.rates.high, 48000);
    if low == 0 || high == 0 || low >= high || !high.is_multiple_of(low) {
        return Err(CliError::Usage(format!(
            "--low {low} must be a positive divisor of --high {high} and smaller than it"
        )));
    }
    let format = pick(args.format, cfg.wav_format, WavFormat::Float32);
    let workers = worker_count(args.workers, cfg);
    let files = wav_files(&args.input)?;
    run.write_to(args.out.join("run-manifest.json"));
    run.config(json!({"low": low, "high": high, "format": format, "workers": workers}));
    for f in &files {
        run.input(f)?;
    }
    let (nb_dir, restored_dir) = (args.out.join("nb"), args.out.join("restored"));
    run.output(&nb_dir);
    run.output(&restored_dir);

    thread_pool(workers)?.install(|| {
        files.par_iter().try_for_each(|f| -> Result<()> {
            let clip = read_wav(f).map_err(|e| CliError::from(e).context(f))?;
            if clip.sample_rate() != high {
                return Err(CliError::Data(format!(
                    "{}: sample rate {} Hz, expected {high} Hz",
                    f.display(),
                    clip.sample_rate()
                )));
            }
            let (nb, restored) = degrade_clip(&clip, low).map_err(|e| CliError::from(e).context(f))?;
            let rel = relative(f, &args.input);
            for (dir, c) in [(&nb_dir, &nb), (&restored_dir, &restored)] {
                let dest = dir.join(rel);
                create_parent(&dest)?;
                write_wav(c, &dest, format)?;
            }
            Ok(())
        })
    })?;

    let pairs = args.out.join("pairs.csv");
    let mut w = csv::Writer::from_path(&pairs)?;
    w.write_record(["reference_path", "estimate_path"])?;
    for f in &files {
        let reference = std::fs::canonicalize(f).map_err(|e| CliError::from_io(f, e))?;
        let estimate = Path::new("restored").join(relative(f, &args.input));
        w.write_record([reference.display().to_string(), estimate.display().to_string()])?;
    }
    w.flush().map_err(|e| CliError::from_io(&pairs, e))?;
    run.output(&pairs);
    eprintln!("degraded {} files into {}", files.len(), args.out.display());
    Ok(())
}

fn anchor(args: AnchorArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let kinds = if args.kinds.is_empty() {
        AnchorKind::ALL.to_vec()
    } else {
        args.kinds.clone()
    };
    let format = pick(args.format, cfg.wav_format, WavFormat::Float32);
    let files = wav_files(&args.input)?;
    run.write_to(args.out.join("run-manifest.json"));
    run.config(json!({"kinds": kinds, "format": format}));
    for f in &files {
        run.input(f)?;
    }
    for kind in &kinds {
        run.output(&args.out.join(kind.name()));
    }
    for f in &files {
        let clip = read_wav(f).map_err(|e| CliError::from(e).context(f))?;
        for &kind in &kinds {
            let out = make_anchor(&clip, kind).map_err(|e| CliError::from(e).context(f))?;
            let dest = args.out.join(kind.name()).join(relative(f, &args.input));
            create_parent(&dest)?;
            write_wav(&out, &dest, format)?;
        }
    }
    Ok(())
}

fn load_embeddings(path: &Path) -> Result<EmbeddingDataset> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let loaded = if is_csv {
        read_embeddings_csv(path)
    } else {
        read_embeddings(path)
    };
    loaded.map_err(|e| CliError::from(e).context(path))
}

fn embed(args: EmbedArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    run.write_to(sidecar(&args.out));
    let dataset = if let Some(dir) = &args.audio {
        let label = args
            .label
            .ok_or_else(|| CliError::Usage("--label is required with --audio".into()))?;
        let defaults = LogMelConfig::default();
        let config = LogMelConfig {
            n_mels: pick(args.n_mels, cfg.logmel.n_mels, defaults.n_mels),
            fft_size: pick(args.fft_size, cfg.logmel.fft_size, defaults.fft_size),
            hop: pick(args.hop, cfg.logmel.hop, defaults.hop),
            t_out: pick(args.t_out, cfg.logmel.t_out, defaults.t_out),
        };
        if config.n_mels == 0 || config.hop == 0 || config.t_out == 0 {
            return Err(CliError::Usage("--n-mels, --hop and --t-out must be positive".into()));
        }
        let workers = worker_count(args.workers, cfg);
        run.config(json!({"label": label, "logmel": config, "workers": workers}));
        let files = wav_files(dir)?;
        for f in &files {
            run.input(f)?;
        }
        let first = read_wav(&files[0]).map_err(|e| CliError::from(e).context(&files[0]))?;
        let extractor = LogMelExtractor::new(config, first.sample_rate())?;
        let embeddings = thread_pool(workers)?.install(|| {
            files
                .par_iter()
                .map(|f| {
                    let clip = read_wav(f).map_err(|e| CliError::from(e).context(f))?;
                    if clip.sample_rate() != first.sample_rate() {
                        return Err(CliError::Data(format!(
                            "{}: sample rate {} Hz differs from {} Hz of the first file",
                            f.display(),
                            clip.sample_rate(),
                            first.sample_rate()
                        )));
                    }
                    extractor.embed(&clip).map_err(|e| CliError::from(e).context(f))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        EmbeddingDataset::from_embeddings(&embeddings, label)?
    } else {
        let path = args.import.as_ref().expect("clap enforces a source");
        run.config(json!({"import": path, "label": args.label}));
        run.input(path)?;
        let dataset = load_embeddings(path)?;
        match args.label {
            Some(l) => dataset.relabeled(l),
            None => dataset,
        }
    };
    create_parent(&args.out)?;
    run.output(&args.out);
    write_embeddings(&dataset, &args.out).map_err(|e| CliError::from(e).context(&args.out))?;
    let [real, fake] = dataset.class_counts();
    eprintln!(
        "wrote {} embeddings of dimension {} ({real} real, {fake} fake) to {}",
        dataset.len(),
        dataset.dim(),
        args.out.display()
    );
    Ok(())
}

fn labelled_pair(real: &Path, fake: &Path, run: &mut Run) -> Result<EmbeddingDataset> {
    run.input(real)?;
    run.input(fake)?;
    let r = load_embeddings(real)?.relabeled(ClassLabel::Real);
    let f = load_embeddings(fake)?.relabeled(ClassLabel::Fake);
    Ok(r.concat(&f)?)
}

fn classify(args: ClassifyArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let train_fraction = pick(args.train_fraction, cfg.split.train_fraction, 0.8);
    let lambda = pick(args.lambda, cfg.split.lambda, DEFAULT_SHRINKAGE);
    let seeds = match (&args.seeds, args.seed) {
        (Some(s), _) => s.clone(),
        (None, Some(s)) => vec![s],
        (None, None) => cfg.split.seeds.clone().unwrap_or_else(|| vec![cfg.split.seed.unwrap_or(0)]),
    };
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds must list at least one seed".into()));
    }
    SplitSpec::new(train_fraction, seeds[0]).map_err(|e| CliError::Usage(e.to_string()))?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CliError::Usage(format!("--lambda must be finite and non-negative, got {lambda}")));
    }
    if let Some(out) = &args.out {
        run.write_to(sidecar(out));
    }
    run.config(json!({"train_fraction": train_fraction, "lambda": lambda}));
    run.seeds(&seeds);

    if let Some(table_path) = &args.table {
        run.input(table_path)?;
        let base = table_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(table_path)
            .map_err(CliError::from)?;
        let mut table = AccuracyTable::default();
        for row in reader.deserialize::<BTreeMap<String, String>>() {
            let row = row?;
            let field = |k: &str| {
                row.get(k)
                    .cloned()
                    .ok_or_else(|| CliError::Data(format!("{}: missing `{k}` column", table_path.display())))
            };
            let (model, task) = (field("model")?, field("task")?);
            let dataset = labelled_pair(&resolve(&field("real")?), &resolve(&field("fake")?), run)?;
            let sweep = evaluate_seeds(&dataset, train_fraction, &seeds, lambda)?;
            table.insert(&model, &task, sweep.mean_accuracy);
        }
        let mut csv_out = Vec::new();
        table.write_csv(&mut csv_out)?;
        return write_text(args.out.as_deref(), &String::from_utf8(csv_out).expect("utf-8"), run);
    }

    let (real, fake) = (args.real.as_ref().expect("clap"), args.fake.as_ref().expect("clap"));
    let dataset = labelled_pair(real, fake, run)?;
    let (json_text, first) = if seeds.len() > 1 || args.seeds.is_some() {
        let sweep = evaluate_seeds(&dataset, train_fraction, &seeds, lambda)?;
        let text = serde_json::to_string_pretty(&sweep).expect("sweep serializes");
        (text, sweep.reports.into_iter().next().expect("non-empty"))
    } else {
        let report = evaluate(&dataset, &SplitSpec::new(train_fraction, seeds[0])?, lambda)?;
        (report.to_json(), report)
    };
    if first.degenerate {
        log::warn!("classifier fell back to a constant prediction");
    }
    write_text(args.out.as_deref(), &(json_text + "\n"), run)?;
    if let Some(p) = &args.projections {
        create_parent(p)?;
        run.output(p);
        let file = std::fs::File::create(p).map_err(|e| CliError::from_io(p, e))?;
        first.write_projections_csv(file)?;
    }
    Ok(())
}

fn metrics(args: MetricsArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let defaults = LsdConfig::default();
    let config = LsdConfig {
        fft_size: pick(args.fft_size, cfg.lsd.fft_size, defaults.fft_size),
        hop: pick(args.hop, cfg.lsd.hop, defaults.hop),
    };
    if config.fft_size < 2 || !config.fft_size.is_multiple_of(2) || config.hop == 0 {
        return Err(CliError::Usage("--fft-size must be even and at least 2; --hop positive".into()));
    }
    let workers = worker_count(args.workers, cfg);
    if let Some(out) = args.out.as_ref().or(args.json.as_ref()).or(args.table.as_ref()) {
        run.write_to(sidecar(out));
    }
    run.config(json!({"lsd": config, "workers": workers}));
    run.input(&args.manifest)?;
    let rows = read_manifest(&args.manifest).map_err(|e| CliError::from(e).context(&args.manifest))?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: manifest lists no pairs", args.manifest.display())));
    }
    let mut seen = HashSet::new();
    for r in &rows {
        for p in [&r.reference_path, &r.estimate_path] {
            if seen.insert(p.clone()) {
                run.input(p)?;
            }
        }
    }
    let result = run_batch(rows, &config, workers)?;
    let mut csv_out = Vec::new();
    result.write_csv(&mut csv_out)?;
    write_text(args.out.as_deref(), &String::from_utf8(csv_out).expect("utf-8"), run)?;
    if let Some(p) = &args.json {
        write_text(Some(p), &(result.to_json() + "\n"), run)?;
    }
    if let Some(p) = &args.table {
        let mut t = Vec::new();
        result.table().write_csv(&mut t)?;
        write_text(Some(p), &String::from_utf8(t).expect("utf-8"), run)?;
    }
    Ok(())
}

fn campaign_build(args: CampaignBuildArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let seed = pick(args.seed, cfg.campaign.seed, 0);
    let format = pick(args.format, cfg.wav_format, WavFormat::Pcm16);
    run.write_to(args.out.join("run-manifest.json"));
    run.config(json!({"format": format, "systems": args.systems}));
    run.seeds(&[seed]);
    let files = wav_files(&args.items)?;
    let mut ids = HashSet::new();
    let mut items = Vec::with_capacity(files.len());
    for f in &files {
        run.input(f)?;
        let id = f.file_stem().expect("file").to_string_lossy().into_owned();
        if !ids.insert(id.clone()) {
            return Err(CliError::Data(format!("duplicate item id `{id}` under {}", args.items.display())));
        }
        let reference = read_wav(f).map_err(|e| CliError::from(e).context(f))?;
        items.push(CampaignItem { id, reference });
    }
    let mut outputs = BTreeMap::new();
    for (name, dir) in &args.systems {
        if outputs.contains_key(name) {
            return Err(CliError::Usage(format!("system `{name}` given twice")));
        }
        let mut clips = Vec::with_capacity(files.len());
        for f in &files {
            let path = dir.join(relative(f, &args.items));
            if !path.is_file() {
                return Err(CliError::Data(format!(
                    "system `{name}` has no output for item {} (expected {})",
                    f.file_stem().expect("file").to_string_lossy(),
                    path.display()
                )));
            }
            run.input(&path)?;
            clips.push(read_wav(&path).map_err(|e| CliError::from(e).context(&path))?);
        }
        outputs.insert(name.clone(), clips);
    }
    let built = build_campaign(&items, &outputs, seed)?;
    run.output(&args.out);
    let manifest = built.write(&args.out, format)?;
    eprintln!(
        "wrote {} trials x {} conditions; manifest {}",
        built.campaign.trials.len(),
        built.campaign.trials[0].conditions.len(),
        manifest.display()
    );
    Ok(())
}

fn policy(args: &ScreeningArgs, cfg: &ExperimentConfig) -> Result<ScreeningPolicy> {
    let d = ScreeningPolicy::default();
    let p = ScreeningPolicy {
        ref_threshold: pick(args.ref_threshold, cfg.campaign.ref_threshold, d.ref_threshold),
        max_fail_fraction: pick(args.max_fail_fraction, cfg.campaign.max_fail_fraction, d.max_fail_fraction),
    };
    if !(0.0..=1.0).contains(&p.max_fail_fraction) {
        return Err(CliError::Usage(format!(
            "--max-fail-fraction must lie in [0, 1], got {}",
            p.max_fail_fraction
        )));
    }
    Ok(p)
}

fn campaign_serve(args: CampaignServeArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let bind = pick(args.bind.clone(), cfg.campaign.bind.clone(), "127.0.0.1:8080".to_string());
    let mut config = ServiceConfig::new(&args.campaign, &args.log);
    config.ui_dir = args.ui.clone().or_else(|| cfg.campaign.ui_dir.clone());
    config.policy = policy(&args.screening, cfg)?;
    run.write_to(sidecar(&args.log));
    run.config(json!({
        "bind": bind,
        "ui_dir": config.ui_dir,
        "policy": config.policy,
        "results_enabled": config.operator_token.is_some(),
    }));
    run.input(&args.campaign)?;
    if config.operator_token.is_none() {
        log::warn!("{} is unset; GET /api/results is disabled", crate::service::OPERATOR_TOKEN_ENV);
    }
    let service = Arc::new(CampaignService::open(config)?);
    run.output(&args.log);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        eprintln!("serving campaign on http://{addr} (Ctrl-C to stop)");
        serve(service, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Internal(format!("server: {e}")))
    })
}

fn report(args: ReportArgs, cfg: &ExperimentConfig, run: &mut Run) -> Result<()> {
    let policy = policy(&args.screening, cfg)?;
    if let Some(out) = args.out.as_ref().or(args.json.as_ref()).or(args.raw.as_ref()) {
        run.write_to(sidecar(out));
    }
    run.config(json!({"policy": policy}));
    run.input(&args.log)?;
    let export = export_results(&args.log, &policy).map_err(|e| CliError::from(e).context(&args.log))?;
    for w in &export.warnings {
        eprintln!("warning: {w}");
    }
    for e in &export.excluded {
        eprintln!(
            "excluded listener {}: hidden reference below {} on {}/{} trials",
            e.listener,
            policy.ref_threshold,
            e.failed_trials.len(),
            e.trials
        );
    }
    write_text(args.out.as_deref(), &export.stats_csv(), run)?;
    if let Some(p) = &args.raw {
        write_text(Some(p), &export.raw_csv(), run)?;
    }
    if let Some(p) = &args.json {
        let text = serde_json::to_string_pretty(&export).expect("export serializes");
        write_text(Some(p), &(text + "\n"), run)?;
    }
    Ok(())
}
