use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use ctd_core::channels::Protocol;
use ctd_core::metrics::{Corpus, MetricsReport};
use ctd_core::trainer::{results_csv, zero_shot_eval, Checkpoint, Experiment, ExperimentConfig, Regime, RunReport};
use ctd_core::worlds::{read_dataset, write_dataset, DatasetSplit, SplitMode, WorldKind};
use ctd_core::CtdError;

use crate::{ChannelArg, Common, DatasetArg, RegimeArg};

fn regime(r: RegimeArg) -> Regime {
    match r {
        RegimeArg::D => Regime::D,
        RegimeArg::Cd => Regime::CD,
        RegimeArg::Ctd => Regime::CTD,
        RegimeArg::Ctdzs => Regime::CTDZS,
    }
}

fn slug(r: Regime) -> &'static str {
    match r {
        Regime::D => "D",
        Regime::CD => "CD",
        Regime::CTD => "CTD",
        Regime::CTDZS => "CTDZS",
    }
}

/// One config per requested seed, flags applied over the config file.
pub fn resolve(c: &Common) -> Result<Vec<ExperimentConfig>> {
    let mut base = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(d) = c.dataset {
        base.dataset = match d {
            DatasetArg::Thing => WorldKind::Thing,
            DatasetArg::Qrc => WorldKind::Qrc,
        };
    }
    if let Some(ch) = c.channel {
        base.channel = match ch {
            ChannelArg::Cb => Protocol::Cb,
            ChannelArg::Gs => Protocol::Gs,
            ChannelArg::Qt => Protocol::Qt,
        };
    }
    if let Some(t) = c.targets {
        base.targets = t;
    }
    let seeds = if c.seed.is_empty() { vec![base.seed] } else { c.seed.clone() };
    seeds
        .into_iter()
        .map(|s| {
            let mut cfg = base.clone();
            cfg.seed = s;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

pub fn data_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join("data").join(format!("{}-seed{}", cfg.dataset.name(), cfg.seed))
}

fn data_file(root: &Path, cfg: &ExperimentConfig, decompose: bool) -> PathBuf {
    data_dir(root, cfg).join(if decompose { "decompose.jsonl" } else { "compose.jsonl" })
}

pub fn run_dir(root: &Path, cfg: &ExperimentConfig, r: Regime) -> PathBuf {
    root.join("runs").join(format!(
        "{}-{}-{}-seed{}",
        cfg.dataset.name(),
        cfg.channel.name().to_lowercase(),
        slug(r),
        cfg.seed
    ))
}

fn echo(cfg: &ExperimentConfig) -> Result<()> {
    println!("# config {}", cfg.hash());
    println!("{}", serde_json::to_string_pretty(cfg)?);
    Ok(())
}

/// Runs `f` over `items` on up to `jobs` threads, keeping the first error.
fn fan_out<T: Sync>(items: &[T], jobs: usize, f: impl Fn(&T) -> Result<()> + Sync) -> Result<()> {
    let next = Mutex::new(0usize);
    let first_err: Mutex<Option<anyhow::Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap();
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(item) = items.get(i) else { break };
                if let Err(e) = f(item) {
                    first_err.lock().unwrap().get_or_insert(e);
                }
            });
        }
    });
    match first_err.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn gen(c: &Common) -> Result<()> {
    let cfgs = resolve(c)?;
    if c.dry_run {
        return cfgs.iter().try_for_each(echo);
    }
    fan_out(&cfgs, c.jobs, |cfg| {
        let exp = Experiment::new(cfg.clone())?;
        let dir = data_dir(&c.out, cfg);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for decompose in [true, false] {
            let header = exp.header(decompose);
            let data = header.generate()?;
            let path = data_file(&c.out, cfg, decompose);
            write_dataset(&path, &header, &data).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
        }
        Ok(())
    })
}

fn load_data(exp: &Experiment, path: &Path, decompose: bool) -> Result<DatasetSplit> {
    if !path.exists() {
        bail!("dataset {} not found; run `ctd gen` with the same config first", path.display());
    }
    let (header, data) = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    if header != exp.header(decompose) {
        bail!("dataset {} was generated from a different config", path.display());
    }
    Ok(data)
}

fn write_run(dir: &Path, exp: &Experiment, report: &RunReport, corpus: &Corpus, ckpt: Option<&Checkpoint>, dataset_hash: &str, phase: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.json"), serde_json::to_vec_pretty(&exp.cfg)?)?;
    report.save(&dir.join("report.json"))?;
    corpus.save_jsonl(&dir.join("corpus.jsonl"))?;
    if let Some(ck) = ckpt {
        ck.save(&dir.join("checkpoint.ctd"))?;
        if let Some(cb) = ck.codebook_export(dataset_hash, phase, exp.cfg.seed) {
            cb.save(&dir.join("codebook.json"))?;
        }
    }
    Ok(())
}

fn print_row(report: &RunReport) -> Result<()> {
    let csv = results_csv(std::slice::from_ref(report), false)?;
    print!("{}", csv.lines().nth(1).map(|l| format!("{l}\n")).unwrap_or_default());
    Ok(())
}

fn train_one(c: &Common, cfg: &ExperimentConfig, r: Regime, init: Option<&Path>) -> Result<()> {
    let exp = Experiment::new(cfg.clone())?;
    let decompose = r == Regime::D;
    let data_path = data_file(&c.out, cfg, decompose);
    let data = load_data(&exp, &data_path, decompose)?;
    let dataset_hash = exp.header(decompose).schema_hash.clone() + "-" + &cfg.seed.to_string();
    let l = if decompose { 1 } else { cfg.compose_length };
    let ckpt_in = || -> Result<Checkpoint> {
        let path = init.map(Path::to_path_buf).unwrap_or_else(|| run_dir(&c.out, cfg, Regime::D).join("checkpoint.ctd"));
        if !path.exists() {
            return Err(CtdError::MissingCheckpoint).with_context(|| format!("looked for {}", path.display()));
        }
        Ok(exp.load_checkpoint(&path)?)
    };
    let (report, ckpt) = match r {
        Regime::D => {
            let res = exp.decompose(&data)?;
            (res.report, res.checkpoint)
        }
        Regime::CD => {
            let res = exp.compose(&data, None)?;
            (res.report, res.checkpoint)
        }
        Regime::CTD => {
            let d = ckpt_in()?;
            let res = exp.compose(&data, Some(&d))?;
            (res.report, res.checkpoint)
        }
        Regime::CTDZS => {
            let d = ckpt_in()?;
            let rep = exp.zero_shot(&d, &data)?;
            (rep, d)
        }
    };
    let mut agents = ckpt.agents.clone();
    agents.channel.length = l;
    let (_, corpus) = exp.test_metrics(&agents, &data.test, l)?;
    let save = if r == Regime::CTDZS { None } else { Some(&ckpt) };
    let phase = if decompose { "decompose" } else { "compose" };
    write_run(&run_dir(&c.out, cfg, r), &exp, &report, &corpus, save, &dataset_hash, phase)?;
    print_row(&report)
}

pub fn train(c: &Common, regimes: &[RegimeArg], init: Option<&Path>) -> Result<()> {
    let cfgs = resolve(c)?;
    if c.dry_run {
        for cfg in &cfgs {
            echo(cfg)?;
            let names: Vec<_> = regimes.iter().map(|&r| regime(r).tag()).collect();
            println!("# regimes {}", names.join(" "));
        }
        return Ok(());
    }
    // regimes of one seed run in the given order so CTD can follow D
    fan_out(&cfgs, c.jobs, |cfg| {
        regimes.iter().try_for_each(|&r| train_one(c, cfg, regime(r), init))
    })
}

pub fn eval(c: &Common, checkpoint: &Path, data: &Path, zero_shot: bool) -> Result<()> {
    let cfg = resolve(c)?.remove(0);
    if c.dry_run {
        return echo(&cfg);
    }
    let exp = Experiment::new(cfg)?;
    let (header, split) = read_dataset(data).with_context(|| format!("reading {}", data.display()))?;
    if header.world != exp.cfg.dataset {
        bail!("dataset {} is {}, config says {}", data.display(), header.world.name(), exp.cfg.dataset.name());
    }
    let ckpt = exp.load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let decompose = header.mode == SplitMode::Single;
    let l = header.phrase_length;
    let (r, metrics) = if zero_shot {
        if decompose {
            bail!("zero-shot evaluation needs Compose data");
        }
        (Regime::CTDZS, zero_shot_eval(&exp, &ckpt, &split.test)?)
    } else {
        let mut agents = ckpt.agents.clone();
        agents.channel.length = l;
        let r = if decompose { Regime::D } else { Regime::CTD };
        (r, exp.test_metrics(&agents, &split.test, l)?.0)
    };
    let report = exp.report(r, &split.test, l, metrics, Vec::new());
    std::fs::create_dir_all(&c.out)?;
    report.save(&c.out.join("eval.json"))?;
    print_row(&report)
}

pub fn eval_corpus(c: &Common, corpus: &Path, acc: Option<f64>) -> Result<()> {
    let cfg = resolve(c)?.remove(0);
    let corpus = Corpus::load_jsonl(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let m = MetricsReport::compute(&corpus, acc.unwrap_or(f64::NAN), cfg.n_concepts())?;
    println!("{}", serde_json::to_string(&m)?);
    Ok(())
}

fn collect_reports(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if p.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(p)?.collect::<std::io::Result<Vec<_>>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let path = e.path();
            if path.is_dir() {
                collect_reports(&path, out)?;
            } else if path.file_name().is_some_and(|n| n == "report.json") {
                out.push(path);
            }
        }
        Ok(())
    } else if p.exists() {
        out.push(p.to_path_buf());
        Ok(())
    } else {
        bail!("{} does not exist", p.display())
    }
}

pub fn report(inputs: &[PathBuf], aggregate: bool, output: Option<&Path>) -> Result<()> {
    let mut files = Vec::new();
    for p in inputs {
        collect_reports(p, &mut files)?;
    }
    let reports = files
        .iter()
        .map(|f| RunReport::load(f).with_context(|| format!("reading {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let csv = results_csv(&reports, aggregate)?;
    match output {
        Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
