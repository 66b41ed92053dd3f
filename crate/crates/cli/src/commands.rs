// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lens_core::attribution::{edges_to_dot, edges_to_jsonl, Attributor, Edge};
use lens_core::circuitlens::{
    AnalysisMode, CircuitLens, ClusterParams, ClusterReport, HeadScope, SamplingParams,
};
use lens_core::corpus::{self, ActivationStore, CorpusConfig};
use lens_core::explainer::{Explainer, ExplainerConfig};
use lens_core::fixtures;
use lens_core::stats::OutlierParams;
use lens_core::tensor_io::manifest_path_for;
use lens_core::weightlens::{self, WeightLensParams, WeightLensRecord};
use lens_core::{FeatureId, ForwardMode, Model, TokenId, TranscoderSet};
use serde_json::Value;

use crate::args::*;
use crate::error::CliError;
use crate::manifest::{input_key, merge, require, require_path, RunManifest};

type Result<T> = std::result::Result<T, CliError>;

/// Writes to `out`, or stdout when absent.
fn emit(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(p, body).map_err(|e| CliError::io(p, e))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn manifest_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, manifest: &RunManifest) -> Result<()> {
    let p = manifest_sidecar(path);
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    fs::write(&p, body).map_err(|e| CliError::io(&p, e))
}

fn parse_features(list: &Option<Vec<String>>) -> Result<Option<Vec<FeatureId>>> {
    list.as_ref()
        .map(|v| {
            v.iter()
                .map(|s| {
                    s.trim()
                        .parse::<FeatureId>()
                        .map_err(|e| CliError::Config(format!("bad feature `{s}`: {e}")))
                })
                .collect()
        })
        .transpose()
}

fn outliers(z: f64) -> Result<OutlierParams> {
    OutlierParams::new(z).map_err(|e| CliError::Config(e.to_string()))
}

struct Loaded {
    model: Model,
    transcoders: TranscoderSet,
}

/// Loads model and transcoders and records their files in the manifest.
fn load_model(opts: &ModelOpts, manifest: &mut RunManifest) -> Result<Loaded> {
    let model_path = require_path(&opts.model, "model")?;
    let model = Model::load(&model_path)?;
    let tc_stem = opts.transcoders.clone().unwrap_or_else(|| model_path.clone());
    let transcoders = TranscoderSet::load(&tc_stem, model.n_layers())?;

    let model_manifest = manifest_path_for(&model_path);
    hash_tensor_files(&model_manifest, "model", manifest)?;
    let base = manifest_path_for(&tc_stem);
    let base = base.to_string_lossy();
    let stem = base.trim_end_matches(".manifest.json");
    for l in 0..model.n_layers() {
        let p = PathBuf::from(format!("{stem}.tc.{l}.manifest.json"));
        hash_tensor_files(&p, "transcoder", manifest)?;
    }
    Ok(Loaded { model, transcoders })
}

/// Hashes a tensor manifest, its binary and (for models) its vocabulary.
fn hash_tensor_files(path: &Path, kind: &str, manifest: &mut RunManifest) -> Result<()> {
    manifest.hash_input(input_key(kind, path), path)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for key in ["binary", "vocab"] {
        if let Some(name) = v.get(key).and_then(Value::as_str) {
            let p = dir.join(name);
            manifest.hash_input(input_key(kind, &p), &p)?;
        }
    }
    Ok(())
}

fn build_explainer(opts: &ExplainerOpts) -> Result<Option<Explainer>> {
    if opts.no_llm == Some(true) {
        return Ok(None);
    }
    if opts.stub_explainer == Some(true) {
        return Ok(Some(Explainer::stub()));
    }
    let Some(url) = &opts.explainer_url else {
        return Ok(None);
    };
    let model = require(&opts.explainer_model, "explainer-model")?;
    let mut cfg = ExplainerConfig::live(
        url.clone(),
        model,
        opts.api_key_env.clone().unwrap_or_else(|| "OPENAI_API_KEY".into()),
    );
    if let Some(t) = opts.explainer_timeout {
        cfg.timeout_secs = t;
    }
    Ok(Some(Explainer::new(cfg).map_err(lens_core::Error::from)?))
}

fn params_value<T: serde::Serialize>(opts: &T) -> Value {
    serde_json::to_value(opts).expect("options serialize")
}

pub fn weightlens(cli: &WeightlensOpts, config: Option<&Value>) -> Result<()> {
    let mut o: WeightlensOpts = merge(cli, config)?;
    o.vocab_z.get_or_insert(4.0);
    o.feature_z.get_or_insert(3.0);
    o.model.bos.get_or_insert(false);
    o.seed.get_or_insert(0);
    let params = WeightLensParams {
        vocab_outliers: outliers(o.vocab_z.unwrap_or_default())?,
        feature_outliers: outliers(o.feature_z.unwrap_or_default())?,
        use_bos: o.model.bos == Some(true),
    };
    let selected = parse_features(&o.features)?;
    let explainer = build_explainer(&o.explainer)?;
    let mut manifest = RunManifest::new("weightlens", params_value(&o));
    let m = load_model(&o.model, &mut manifest)?;
    if let Some(sel) = &selected {
        for f in sel {
            m.transcoders.check_feature(*f)?;
        }
    }

    let all = weightlens::describe_feature_layerwise(&m.model, &m.transcoders, &params)?;
    let descs: Vec<_> = match &selected {
        Some(sel) => sel.iter().map(|f| all[f].clone()).collect(),
        None => all.into_values().collect(),
    };
    let summaries: Vec<Option<String>> = match &explainer {
        Some(ex) => lens_core::par::try_map(&descs, |d| {
            if d.important_tokens().is_empty() {
                return Ok(None);
            }
            weightlens::refine_with_llm(d, ex).map(Some)
        })?,
        None => vec![None; descs.len()],
    };
    let mut body = manifest.jsonl_header();
    body.push('\n');
    for (d, summary) in descs.into_iter().zip(summaries) {
        let rec = WeightLensRecord {
            description: d,
            params,
            summary,
        };
        body.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        body.push('\n');
    }
    emit(cli.out.as_deref(), body.as_bytes())
}

/// Activating tokens per feature from a weightlens JSONL file.
fn read_important_tokens(path: &Path) -> Result<BTreeMap<FeatureId, Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if v.get("manifest").is_some() {
            continue;
        }
        let rec: WeightLensRecord = serde_json::from_value(v)
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.insert(rec.description.feature, rec.description.important_tokens());
    }
    Ok(out)
}

fn load_documents(model: &Model, sentences: &Path, bos: bool, manifest: &mut RunManifest) -> Result<Vec<Vec<TokenId>>> {
    let lines = corpus::read_sentences(sentences)?;
    manifest.hash_input(input_key("sentences", sentences), sentences)?;
    Ok(corpus::tokenize_documents(model, &lines, bos))
}

pub fn circuitlens(cli: &CircuitOpts, config: Option<&Value>) -> Result<()> {
    let mut o: CircuitOpts = merge(cli, config)?;
    let defaults = ClusterParams::default();
    o.model.bos.get_or_insert(false);
    o.mode.get_or_insert(ModeArg::Input);
    o.bins.get_or_insert(defaults.sampling.bins);
    o.alpha.get_or_insert(defaults.sampling.alpha);
    o.sample_size.get_or_insert(defaults.sampling.sample_size);
    o.rho.get_or_insert(defaults.rho);
    o.eps.get_or_insert(defaults.eps);
    o.min_samples.get_or_insert(defaults.min_samples);
    o.z.get_or_insert(defaults.contributor_outliers.z_threshold);
    o.n_generate.get_or_insert(defaults.n_generate);
    o.head_scope.get_or_insert(HeadScopeArg::Pullback);
    o.seed.get_or_insert(0);

    let z = outliers(o.z.unwrap_or_default())?;
    let params = ClusterParams {
        sampling: SamplingParams {
            bins: o.bins.unwrap_or_default(),
            alpha: o.alpha.unwrap_or_default(),
            sample_size: o.sample_size.unwrap_or_default(),
            seed: o.seed.unwrap_or_default(),
        },
        contributor_outliers: z,
        pattern_outliers: z,
        influence_outliers: z,
        rho: o.rho.unwrap_or_default(),
        eps: o.eps.unwrap_or_default(),
        min_samples: o.min_samples.unwrap_or_default(),
        mode: match o.mode {
            Some(ModeArg::Full) => AnalysisMode::Full,
            _ => AnalysisMode::Input,
        },
        n_generate: o.n_generate.unwrap_or_default(),
        head_scope: match o.head_scope {
            Some(HeadScopeArg::SameLayer) => HeadScope::SameLayer,
            _ => HeadScope::Pullback,
        },
    };
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let selected = parse_features(&o.features)?;
    let explainer = build_explainer(&o.explainer)?;
    let sentences = require_path(&o.sentences, "sentences")?;
    let store_path = require_path(&o.store, "store")?;

    let mut manifest = RunManifest::new("circuitlens", params_value(&o));
    let important = match &o.important_tokens {
        Some(p) => {
            manifest.hash_input(input_key("important_tokens", p), p)?;
            Some(read_important_tokens(p)?)
        }
        None => None,
    };
    let m = load_model(&o.model, &mut manifest)?;
    let docs = load_documents(&m.model, &sentences, o.model.bos == Some(true), &mut manifest)?;
    manifest.hash_input(input_key("store", &store_path), &store_path)?;
    let store = ActivationStore::read(&store_path)?;
    if store.n_documents() as usize > docs.len() {
        return Err(CliError::Config(format!(
            "store covers {} documents but the sentence file has {}",
            store.n_documents(),
            docs.len()
        )));
    }
    let features = match selected {
        Some(sel) => {
            for f in &sel {
                m.transcoders.check_feature(*f)?;
            }
            sel
        }
        None => store.features(),
    };

    let lens = CircuitLens::new(&m.model, &m.transcoders, &docs);
    let reports = lens_core::par::try_map(&features, |&f| {
        let records = store.activation_records(f);
        let fc = lens.cluster_feature(f, &records, &params)?;
        let mut report = ClusterReport::new(&fc, &params);
        if let Some(ex) = &explainer {
            let tokens = important.as_ref().map(|m| m.get(&f).cloned().unwrap_or_default());
            report.describe(ex, tokens.as_deref())?;
        }
        log::info!("{f}: {} clusters", report.clusters.len());
        Ok(report)
    })?;
    let doc = serde_json::json!({ "manifest": manifest, "reports": reports });
    let body = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
    emit(cli.out.as_deref(), body.as_bytes())
}

pub fn attribute(cli: &AttributeOpts, config: Option<&Value>) -> Result<()> {
    let mut o: AttributeOpts = merge(cli, config)?;
    o.model.bos.get_or_insert(false);
    o.format.get_or_insert(EdgeFormat::Jsonl);
    o.seed.get_or_insert(0);
    let prompt = require(&o.prompt, "prompt")?;
    let feature: FeatureId = require(&o.feature, "feature")?
        .parse()
        .map_err(|e| CliError::Config(format!("bad --feature: {e}")))?;
    let mut manifest = RunManifest::new("attribute", params_value(&o));
    let m = load_model(&o.model, &mut manifest)?;
    m.transcoders.check_feature(feature)?;
    let tokens = m.model.encode(&prompt, o.model.bos == Some(true));
    if tokens.is_empty() {
        return Err(CliError::Config("prompt tokenizes to nothing".into()));
    }
    let t = o.token.unwrap_or(tokens.len() - 1);
    if t >= tokens.len() {
        return Err(CliError::Config(format!(
            "--token {t} outside prompt of {} tokens",
            tokens.len()
        )));
    }
    let run = m.model.forward(&tokens, ForwardMode::Transcoder, Some(&m.transcoders))?;
    let attr = Attributor::new(&m.model, &m.transcoders, &run)?;
    let mut edges: Vec<Edge> = Vec::new();
    edges.extend(
        attr.upstream_feature_edges(feature, t)?
            .into_iter()
            .filter(|e| e.activation != 0.0)
            .map(Edge::Feature),
    );
    edges.extend(attr.head_edges(feature, t)?.into_iter().map(Edge::Head));
    // realized next token at each later position, the prediction at the end
    let targets: Vec<(usize, TokenId)> = (t..tokens.len())
        .map(|p| {
            let y = match tokens.get(p + 1) {
                Some(&y) => y,
                None => lens_core::model::argmax_lowest(run.logits.row(p)) as TokenId,
            };
            (p, y)
        })
        .collect();
    edges.extend(attr.logit_edges(feature, t, &targets)?.into_iter().map(Edge::Logit));

    let body = match o.format {
        Some(EdgeFormat::Dot) => {
            let header = serde_json::to_string(&manifest).expect("manifest serializes");
            let labels: Vec<String> = tokens.iter().map(|&id| m.model.vocab.display(id)).collect();
            format!("// manifest: {header}\n{}", edges_to_dot(&edges, |p| labels[p].clone()))
        }
        _ => format!("{}\n{}", manifest.jsonl_header(), edges_to_jsonl(&edges)),
    };
    emit(cli.out.as_deref(), body.as_bytes())
}

pub fn ingest(cli: &IngestOpts, config: Option<&Value>) -> Result<()> {
    let mut o: IngestOpts = merge(cli, config)?;
    o.percentile_cut.get_or_insert(0.05);
    o.no_dedup.get_or_insert(false);
    o.seed.get_or_insert(0);
    let inputs = require(&o.inputs, "input")?;
    let cfg = CorpusConfig {
        inputs: inputs.clone(),
        percentile_cut: o.percentile_cut.unwrap_or_default(),
        dedup: o.no_dedup != Some(true),
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut manifest = RunManifest::new("ingest", params_value(&o));
    for p in &inputs {
        manifest.hash_input(input_key("input", p), p)?;
    }
    let sentences = corpus::ingest(&cfg)?;
    log::info!("{} sentences", sentences.len());
    match &cli.out {
        Some(p) => {
            corpus::write_sentences(p, &sentences)?;
            write_sidecar(p, &manifest)
        }
        None => {
            let mut body = sentences.join("\n");
            if !body.is_empty() {
                body.push('\n');
            }
            emit(None, body.as_bytes())
        }
    }
}

pub fn scan(cli: &ScanOpts, config: Option<&Value>) -> Result<()> {
    let mut o: ScanOpts = merge(cli, config)?;
    o.model.bos.get_or_insert(false);
    o.min_activation.get_or_insert(0.0);
    o.resume.get_or_insert(false);
    o.chunk.get_or_insert(256);
    o.seed.get_or_insert(0);
    let out = require_path(&cli.out, "out")?;
    let sentences = require_path(&o.sentences, "sentences")?;
    let chunk = o.chunk.unwrap_or(256).max(1);
    let mut manifest = RunManifest::new("scan", params_value(&o));
    let m = load_model(&o.model, &mut manifest)?;
    let docs = load_documents(&m.model, &sentences, o.model.bos == Some(true), &mut manifest)?;

    let mut store = if o.resume == Some(true) && out.exists() {
        let s = ActivationStore::read(&out)?;
        log::info!("resuming after {} documents", s.n_documents());
        s
    } else {
        ActivationStore::default()
    };
    let min = o.min_activation.unwrap_or_default();
    let mut start = store.n_documents() as usize;
    while start < docs.len() {
        let end = (start + chunk).min(docs.len());
        let part = corpus::scan_range(&m.model, &m.transcoders, &docs, start, end, min)?;
        store = ActivationStore::merge(vec![store, part])?;
        store.write(&out)?;
        log::info!("scanned {end}/{} documents", docs.len());
        start = end;
    }
    if docs.is_empty() || !out.exists() {
        store.write(&out)?;
    }
    write_sidecar(&out, &manifest)
}

pub fn fixture(cli: &FixtureOpts, config: Option<&Value>) -> Result<()> {
    let mut o: FixtureOpts = merge(cli, config)?;
    o.kind.get_or_insert(FixtureKind::Toy);
    o.layers.get_or_insert(2);
    o.corpus_sentences.get_or_insert(300);
    o.seed.get_or_insert(0);
    let seed = o.seed.unwrap_or_default();
    let layers = o.layers.unwrap_or(2);
    let dir = require_path(&cli.out, "out")?;
    let (fx, default_stem) = match o.kind {
        Some(FixtureKind::Wired) => (fixtures::wired(seed)?.fixture, "wired_2L".to_string()),
        Some(FixtureKind::ToyIdentity) => (fixtures::toy_identity(layers, seed)?, format!("toy_identity_{layers}L")),
        _ => (fixtures::toy(layers, seed)?, format!("toy_{layers}L")),
    };
    let stem = o.stem.clone().unwrap_or(default_stem);
    let path = fx.save(&dir, &stem)?;
    if o.kind != Some(FixtureKind::Wired) {
        let corpus = dir.join("corpus.txt");
        let text = fixtures::corpus_text(seed, o.corpus_sentences.unwrap_or(300));
        fs::write(&corpus, text).map_err(|e| CliError::io(&corpus, e))?;
    }
    emit(None, format!("{}\n", path.display()).as_bytes())
}
