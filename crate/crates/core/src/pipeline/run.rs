use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::baseline::{baseline_random, BaselineSummary};
use super::config::{EmbeddingSource, FitnessMode, PipelineConfig, DEFAULT_CHUNK_SIZE};
use super::manifest::{file_sha256, Artifact, RunManifest, StageRecord};
use super::plot::{fitness_chart, mutation_chart};
use super::PipelineError;
use crate::corpus::{
    load_examples, sample_chunks, save_examples, split_dataset, CorpusDocument, Example,
    LabelSchema,
};
use crate::evalx::{
    evaluate_prompt, evaluate_zero_shot, save_predictions, EvalError, LlmFitness, SurrogateFitness,
};
use crate::evolve::{evolve, EvolveError, Fitness, GaConfig, Gene, Genome, RunTrace};
use crate::generate::{generate_pool, plan_batches, GenerateError};
use crate::llm::{Embedder, EmbeddingCache, HashingEmbedder, LlmClient};
use crate::reduce::{
    build_pool, cluster, filter_noise, projection, read_assignment, write_assignment,
    ClusteredPool, ProjectionMethod,
};
use crate::seed;

const POOL: &str = "pool.jsonl";
const GENERATION_REPORT: &str = "generation_report.json";
const CANDIDATES: &str = "candidates.jsonl";
const VALIDATION: &str = "validation.jsonl";
const PROJECTION: &str = "projection.txt";
const CLUSTERS: &str = "clusters.tsv";
const CLUSTER_SUMMARY: &str = "cluster_summary.json";
const EMBEDDING_CACHE: &str = "embedding_cache.jsonl";

/// Groups of stages a subcommand can ask for. Prerequisites run first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Group {
    Generate,
    Reduce,
    Select,
    Evaluate,
    Baseline,
}

impl Group {
    pub const ALL: [Group; 5] = [
        Group::Generate,
        Group::Reduce,
        Group::Select,
        Group::Evaluate,
        Group::Baseline,
    ];

    fn prerequisites(self) -> &'static [Group] {
        match self {
            Group::Generate => &[],
            Group::Reduce => &[Group::Generate],
            Group::Select => &[Group::Generate, Group::Reduce],
            Group::Evaluate => &[Group::Generate, Group::Reduce, Group::Select],
            Group::Baseline => &[Group::Generate, Group::Reduce],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Generate,
    Split,
    Project,
    Cluster,
    Pools,
    Select(usize),
    Evaluate(usize),
    Baseline(usize),
    ZeroShot,
}

struct Stage {
    name: String,
    group: Group,
    kind: Kind,
}

fn stage_list(cfg: &PipelineConfig) -> Vec<Stage> {
    let s = |name: String, group, kind| Stage { name, group, kind };
    let mut v = vec![
        s("generate".into(), Group::Generate, Kind::Generate),
        s("split".into(), Group::Reduce, Kind::Split),
        s("project".into(), Group::Reduce, Kind::Project),
        s("cluster".into(), Group::Reduce, Kind::Cluster),
        s("pools".into(), Group::Reduce, Kind::Pools),
    ];
    for &k in &cfg.pool_sizes {
        v.push(s(format!("select_k{k}"), Group::Select, Kind::Select(k)));
    }
    if cfg.fitness == FitnessMode::Llm && cfg.data.test.is_some() {
        for &k in &cfg.pool_sizes {
            v.push(s(
                format!("evaluate_k{k}"),
                Group::Evaluate,
                Kind::Evaluate(k),
            ));
        }
    }
    for &k in &cfg.pool_sizes {
        v.push(s(
            format!("baseline_k{k}"),
            Group::Baseline,
            Kind::Baseline(k),
        ));
    }
    if cfg.fitness == FitnessMode::Llm {
        v.push(s(
            "baseline_zeroshot".into(),
            Group::Baseline,
            Kind::ZeroShot,
        ));
    }
    v
}

/// Runs the requested stage groups and their prerequisites, skipping
/// stages the manifest already records as complete with intact artifacts.
/// Once any stage runs, every later stage runs too.
pub fn run_pipeline(cfg: &PipelineConfig, groups: &[Group]) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    std::fs::create_dir_all(out)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", out.display())))?;
    let hash = cfg.snapshot_hash()?;
    let mut manifest = match RunManifest::load(out) {
        Some(m) if m.config_hash == hash => m,
        Some(_) => {
            log::info!("config changed since the last run; starting over");
            RunManifest::new(hash)
        }
        None => RunManifest::new(hash),
    };

    let mut wanted: Vec<Group> = groups
        .iter()
        .flat_map(|g| g.prerequisites().iter().copied().chain([*g]))
        .collect();
    wanted.sort();
    wanted.dedup();

    let ctx = Ctx {
        cfg,
        out,
        client: OnceLock::new(),
    };
    let stages = stage_list(cfg);
    let mut dirty = false;
    for (idx, stage) in stages.iter().enumerate() {
        if !wanted.contains(&stage.group) {
            continue;
        }
        if !dirty && manifest.is_valid(&stage.name, out) {
            log::info!("stage {}: up to date", stage.name);
            continue;
        }
        dirty = true;
        for later in &stages[idx..] {
            manifest.remove(&later.name);
        }
        log::info!("stage {}: running", stage.name);
        let started = Instant::now();
        let result = ctx.run(stage);
        let seconds = started.elapsed().as_secs_f64();
        match result {
            Ok(paths) => {
                let artifacts = paths
                    .into_iter()
                    .map(|p| {
                        let sha256 = file_sha256(&out.join(&p))
                            .map_err(|e| PipelineError::stage(&stage.name, e))?;
                        Ok(Artifact { path: p, sha256 })
                    })
                    .collect::<Result<Vec<_>, PipelineError>>()?;
                manifest.upsert(StageRecord {
                    name: stage.name.clone(),
                    complete: true,
                    artifacts,
                    seconds,
                    completed_at_unix: SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map(|d| d.as_secs())
                        .unwrap_or(0),
                });
                save_manifest(&manifest, out, &stage.name)?;
                log::info!("stage {}: done in {seconds:.2}s", stage.name);
            }
            Err(e) => {
                manifest.upsert(StageRecord {
                    name: stage.name.clone(),
                    complete: false,
                    artifacts: Vec::new(),
                    seconds,
                    completed_at_unix: 0,
                });
                save_manifest(&manifest, out, &stage.name)?;
                return Err(e);
            }
        }
    }
    Ok(manifest)
}

fn save_manifest(m: &RunManifest, out: &Path, stage: &str) -> Result<(), PipelineError> {
    m.save(out)
        .map_err(|e| PipelineError::stage(stage, format!("writing manifest: {e}")))
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    out: &'a Path,
    client: OnceLock<LlmClient>,
}

type StageResult = Result<Vec<PathBuf>, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestGene {
    pub cluster: usize,
    pub example: usize,
    pub id: String,
}

/// The selected demonstrations for one pool size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestGenomeFile {
    pub k: usize,
    pub fitness: f64,
    pub generations: usize,
    pub genes: Vec<BestGene>,
}

#[derive(Serialize)]
struct ClusterSummary {
    points: usize,
    clusters: usize,
    noise: usize,
    sizes: Vec<usize>,
}

/// Reads a `pool_k*.tsv` table back into a clustered pool.
pub fn read_pool_file(path: &Path, candidates: &[Example]) -> Result<ClusteredPool, String> {
    let by_id: HashMap<&str, &Example> = candidates.iter().map(|e| (e.id.as_str(), e)).collect();
    let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut examples = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let (id, c) = line
            .rsplit_once('\t')
            .ok_or_else(|| format!("line {}: expected two columns", i + 1))?;
        let c: usize = c.parse().map_err(|e| format!("line {}: {e}", i + 1))?;
        let ex = by_id
            .get(id)
            .ok_or_else(|| format!("line {}: unknown id {id:?}", i + 1))?;
        examples.push((*ex).clone());
        labels.push(c);
    }
    Ok(ClusteredPool::from_labels(examples, &labels))
}

fn write_pool_file(path: &Path, pool: &ClusteredPool) -> std::io::Result<()> {
    let mut text = String::from("id\tcluster\n");
    for (i, e) in pool.examples().iter().enumerate() {
        let _ = writeln!(text, "{}\t{}", e.id, pool.cluster_of(i));
    }
    std::fs::write(path, text)
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    std::fs::write(path, text)
}

fn unwrap_eval_error<'a>(e: &'a (dyn std::error::Error + 'static)) -> Option<&'a EvalError> {
    e.downcast_ref::<EvalError>()
}

impl Ctx<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn stage_seed(&self, name: &str) -> u64 {
        seed::derive(self.cfg.seed, name)
    }

    fn client(&self, stage: &str) -> Result<&LlmClient, PipelineError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let cache = EmbeddingCache::open(self.path(EMBEDDING_CACHE))
            .map_err(|e| PipelineError::stage(stage, e))?;
        let client = LlmClient::from_config(self.cfg.client.clone())
            .map_err(|e| PipelineError::client(stage, e))?
            .with_cache(cache);
        Ok(self.client.get_or_init(|| client))
    }

    fn load(&self, stage: &str, rel: &str) -> Result<Vec<Example>, PipelineError> {
        load_examples(&self.path(rel)).map_err(|e| PipelineError::stage(stage, e))
    }

    fn labels(&self, examples: &[Example]) -> Vec<String> {
        match &self.cfg.data.labels {
            Some(l) => l.clone(),
            None => LabelSchema::from_examples(examples)
                .map(|s| s.labels().to_vec())
                .unwrap_or_default(),
        }
    }

    fn pool_for(
        &self,
        stage: &str,
        k: usize,
    ) -> Result<(Vec<Example>, ClusteredPool), PipelineError> {
        let candidates = self.load(stage, CANDIDATES)?;
        let pool = read_pool_file(&self.path(&format!("pool_k{k}.tsv")), &candidates)
            .map_err(|e| PipelineError::stage(stage, e))?;
        Ok((candidates, pool))
    }

    fn run(&self, stage: &Stage) -> StageResult {
        let name = stage.name.as_str();
        match stage.kind {
            Kind::Generate => self.generate(name),
            Kind::Split => self.split(name),
            Kind::Project => self.project(name),
            Kind::Cluster => self.cluster(name),
            Kind::Pools => self.pools(name),
            Kind::Select(k) => self.select(name, k),
            Kind::Evaluate(k) => self.evaluate(name, k),
            Kind::Baseline(k) => self.baseline(name, k),
            Kind::ZeroShot => self.zero_shot(name),
        }
    }

    fn generate(&self, name: &str) -> StageResult {
        let cfg = self.cfg;
        if let Some(path) = &cfg.data.examples {
            let examples = load_examples(path).map_err(|e| PipelineError::stage(name, e))?;
            save_examples(&self.path(POOL), &examples)
                .map_err(|e| PipelineError::stage(name, e))?;
            return Ok(vec![POOL.into()]);
        }
        let corpus = cfg
            .data
            .corpus
            .as_ref()
            .expect("validated: corpus or examples");
        let labels = cfg
            .data
            .labels
            .clone()
            .expect("validated: labels for generation");
        let doc =
            CorpusDocument::from_file(corpus, cfg.data.chunk_size.unwrap_or(DEFAULT_CHUNK_SIZE))
                .map_err(|e| PipelineError::stage(name, e))?;
        let n_batches = plan_batches(&cfg.generation).len();
        let chunks = sample_chunks(&doc, n_batches, self.stage_seed("chunks"));
        let client = self.client(name)?;
        let (examples, report) = generate_pool(
            &cfg.generation,
            &chunks,
            &labels,
            client,
            self.stage_seed(name),
        )
        .map_err(|e| match e {
            GenerateError::NoSuccessfulBatches { .. } => PipelineError::client(name, e),
            GenerateError::Config(m) => PipelineError::Config(m),
            other => PipelineError::stage(name, other),
        })?;
        log::info!(
            "generated {} examples ({} rejected)",
            report.parsed_ok,
            report.rejected
        );
        save_examples(&self.path(POOL), &examples).map_err(|e| PipelineError::stage(name, e))?;
        write_json(&self.path(GENERATION_REPORT), &report)
            .map_err(|e| PipelineError::stage(name, e))?;
        Ok(vec![POOL.into(), GENERATION_REPORT.into()])
    }

    fn split(&self, name: &str) -> StageResult {
        let pool = self.load(name, POOL)?;
        let split = split_dataset(pool, self.cfg.n_validation, self.stage_seed(name))
            .map_err(|e| PipelineError::stage(name, e))?;
        save_examples(&self.path(CANDIDATES), &split.candidates)
            .map_err(|e| PipelineError::stage(name, e))?;
        save_examples(&self.path(VALIDATION), &split.validation)
            .map_err(|e| PipelineError::stage(name, e))?;
        Ok(vec![CANDIDATES.into(), VALIDATION.into()])
    }

    /// One projected row per pool record, in pool order.
    fn project(&self, name: &str) -> StageResult {
        let cfg = self.cfg;
        let pool = self.load(name, POOL)?;
        let points = match &cfg.projection.method {
            ProjectionMethod::PrecomputedImport { path } => {
                projection::import_projection(path, pool.len(), cfg.projection.target_dimension)
                    .map_err(|e| PipelineError::stage(name, e))?
            }
            ProjectionMethod::InRepoLinear => {
                let texts: Vec<String> = pool.iter().map(|e| e.text.clone()).collect();
                let vectors = match cfg.embedding.source {
                    EmbeddingSource::Hashing => {
                        HashingEmbedder::new(cfg.embedding.dimension).embed(&texts)
                    }
                    EmbeddingSource::Service => self.client(name)?.embed_batch(&texts),
                }
                .map_err(|e| PipelineError::client(name, e))?;
                let vectors: Vec<Vec<f64>> = vectors.iter().map(|v| v.to_f64()).collect();
                projection::project(&vectors, &cfg.projection)
                    .map_err(|e| PipelineError::stage(name, e))?
            }
        };
        projection::write_projection(&self.path(PROJECTION), &points)
            .map_err(|e| PipelineError::stage(name, e))?;
        Ok(vec![PROJECTION.into()])
    }

    /// Clusters the candidate rows of the projection.
    fn cluster(&self, name: &str) -> StageResult {
        let pool = self.load(name, POOL)?;
        let candidates = self.load(name, CANDIDATES)?;
        let points = projection::import_projection(
            &self.path(PROJECTION),
            pool.len(),
            self.cfg.projection.target_dimension,
        )
        .map_err(|e| PipelineError::stage(name, e))?;
        let row: HashMap<&str, usize> = pool
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect();
        let selected: Vec<Vec<f64>> = candidates
            .iter()
            .map(|e| points[row[e.id.as_str()]].clone())
            .collect();
        let assignment =
            cluster(&selected, &self.cfg.clustering).map_err(|e| PipelineError::stage(name, e))?;
        write_assignment(&self.path(CLUSTERS), &candidates, &assignment.labels)
            .map_err(|e| PipelineError::stage(name, e))?;
        let mut sizes = vec![0; assignment.n_clusters];
        for c in assignment.labels.iter().flatten() {
            sizes[*c] += 1;
        }
        let summary = ClusterSummary {
            points: candidates.len(),
            clusters: assignment.n_clusters,
            noise: assignment.noise_count(),
            sizes,
        };
        log::info!(
            "{} clusters, {} noise points of {}",
            summary.clusters,
            summary.noise,
            summary.points
        );
        write_json(&self.path(CLUSTER_SUMMARY), &summary)
            .map_err(|e| PipelineError::stage(name, e))?;
        Ok(vec![CLUSTERS.into(), CLUSTER_SUMMARY.into()])
    }

    fn pools(&self, name: &str) -> StageResult {
        let candidates = self.load(name, CANDIDATES)?;
        let labels = read_assignment(&self.path(CLUSTERS), &candidates)
            .map_err(|e| PipelineError::stage(name, e))?;
        let reduced = filter_noise(candidates, &labels);
        if reduced.len() < self.cfg.ga.shots {
            return Err(PipelineError::stage(
                name,
                format!(
                    "only {} non-noise examples remain; a genome needs {}",
                    reduced.len(),
                    self.cfg.ga.shots
                ),
            ));
        }
        let mut out = Vec::new();
        for &k in &self.cfg.pool_sizes {
            if k > reduced.len() {
                log::warn!(
                    "k={k} exceeds the {} non-noise examples; using all of them",
                    reduced.len()
                );
            }
            let pool = build_pool(&reduced, k).materialize(&reduced);
            let rel = format!("pool_k{k}.tsv");
            write_pool_file(&self.path(&rel), &pool).map_err(|e| PipelineError::stage(name, e))?;
            out.push(rel.into());
        }
        Ok(out)
    }

    fn surrogate(&self) -> SurrogateFitness {
        SurrogateFitness::new(self.stage_seed("surrogate"))
    }

    fn select(&self, name: &str, k: usize) -> StageResult {
        let cfg = self.cfg;
        let (_, pool) = self.pool_for(name, k)?;
        let ga = GaConfig {
            seed: self.stage_seed(name),
            ..cfg.ga.clone()
        };
        let trace_rel = format!("trace_k{k}.tsv");
        let validation;
        let labels;
        let template;
        let surrogate;
        let llm;
        let fitness: &dyn Fitness = match cfg.fitness {
            FitnessMode::Surrogate => {
                surrogate = self.surrogate();
                labels = self.labels(pool.examples());
                &surrogate
            }
            FitnessMode::Llm => {
                validation = self.load(name, VALIDATION)?;
                labels = self.labels(&validation);
                template = cfg.template()?;
                llm = LlmFitness {
                    client: self.client(name)?,
                    template: &template,
                    validation: &validation,
                    labels: &labels,
                };
                &llm
            }
        };
        let outcome = match evolve(&pool, fitness, &ga) {
            Ok(o) => o,
            Err(EvolveError::Fitness { source, trace }) => {
                let _ = trace.write_tsv(&self.path(&trace_rel));
                return Err(match unwrap_eval_error(source.as_ref()) {
                    Some(EvalError::Client { .. }) => PipelineError::client(name, source),
                    _ => PipelineError::stage(name, source),
                });
            }
            Err(e) => return Err(PipelineError::stage(name, e)),
        };
        let best_rel = format!("best_k{k}.json");
        let prompt_rel = format!("prompt_k{k}.txt");
        let best = BestGenomeFile {
            k,
            fitness: outcome.best_fitness,
            generations: outcome.trace.len(),
            genes: outcome
                .best
                .genes()
                .iter()
                .map(|g| BestGene {
                    cluster: g.cluster,
                    example: g.example,
                    id: pool.example_at(g.cluster, g.example).id.clone(),
                })
                .collect(),
        };
        let prompt = cfg
            .template()?
            .render(&labels, &outcome.best.examples(&pool));
        let io = |e| PipelineError::stage(name, e);
        outcome
            .trace
            .write_tsv(&self.path(&trace_rel))
            .map_err(io)?;
        write_json(&self.path(&best_rel), &best).map_err(io)?;
        std::fs::write(self.path(&prompt_rel), prompt + "\n").map_err(io)?;
        log::info!(
            "k={k}: best fitness {} after {} generations",
            outcome.best_fitness,
            outcome.trace.len()
        );
        Ok(vec![trace_rel.into(), best_rel.into(), prompt_rel.into()])
    }

    fn evaluate(&self, name: &str, k: usize) -> StageResult {
        let cfg = self.cfg;
        let test = load_examples(
            cfg.data
                .test
                .as_ref()
                .expect("evaluate stages need a test set"),
        )
        .map_err(|e| PipelineError::stage(name, e))?;
        let (_, pool) = self.pool_for(name, k)?;
        let best: BestGenomeFile = serde_json::from_str(
            &std::fs::read_to_string(self.path(&format!("best_k{k}.json")))
                .map_err(|e| PipelineError::stage(name, e))?,
        )
        .map_err(|e| PipelineError::stage(name, e))?;
        let genome = Genome::new(
            best.genes
                .iter()
                .map(|g| Gene::new(g.cluster, g.example))
                .collect(),
        );
        if !genome.is_valid(&pool) {
            return Err(PipelineError::stage(
                name,
                "best genome does not match its pool",
            ));
        }
        let labels = self.labels(&test);
        let system = cfg.template()?.render(&labels, &genome.examples(&pool));
        let client = self.client(name)?;
        let outcome = evaluate_prompt(
            client,
            &system,
            &test,
            &labels,
            client.config().max_in_flight,
        )
        .map_err(|e| PipelineError::client(name, e))?;
        let report_rel = format!("report_k{k}.json");
        let table_rel = format!("report_k{k}_labels.tsv");
        let pred_rel = format!("predictions_k{k}.jsonl");
        let io = |e| PipelineError::stage(name, e);
        write_json(&self.path(&report_rel), &outcome.report).map_err(io)?;
        std::fs::write(self.path(&table_rel), outcome.report.per_label_tsv()).map_err(io)?;
        save_predictions(&self.path(&pred_rel), &outcome.predictions).map_err(io)?;
        log::info!("k={k}: test micro-F1 {:.4}", outcome.report.micro_f1);
        Ok(vec![report_rel.into(), table_rel.into(), pred_rel.into()])
    }

    fn baseline(&self, name: &str, k: usize) -> StageResult {
        let cfg = self.cfg;
        let (_, pool) = self.pool_for(name, k)?;
        let seed = self.stage_seed(name);
        let draws = cfg.evaluation.baseline_draws;
        let summary: BaselineSummary = match cfg.fitness {
            FitnessMode::Surrogate => {
                baseline_random(&pool, cfg.ga.shots, draws, &self.surrogate(), seed)
            }
            FitnessMode::Llm => {
                let validation = self.load(name, VALIDATION)?;
                let labels = self.labels(&validation);
                let template = cfg.template()?;
                let llm = LlmFitness {
                    client: self.client(name)?,
                    template: &template,
                    validation: &validation,
                    labels: &labels,
                };
                baseline_random(&pool, cfg.ga.shots, draws, &llm, seed)
            }
        }
        .map_err(|e| PipelineError::stage(name, e))?;
        let rel = format!("baseline_k{k}.json");
        write_json(&self.path(&rel), &summary).map_err(|e| PipelineError::stage(name, e))?;
        log::info!(
            "k={k}: random baseline {:.4} ± {:.4}",
            summary.mean,
            summary.std
        );
        Ok(vec![rel.into()])
    }

    fn zero_shot(&self, name: &str) -> StageResult {
        let validation = self.load(name, VALIDATION)?;
        let labels = self.labels(&validation);
        let outcome = evaluate_zero_shot(
            self.client(name)?,
            &self.cfg.template()?,
            &validation,
            &labels,
        )
        .map_err(|e| PipelineError::client(name, e))?;
        let rel = "baseline_zeroshot.json";
        write_json(&self.path(rel), &outcome.report).map_err(|e| PipelineError::stage(name, e))?;
        Ok(vec![rel.into()])
    }
}

/// Writes `fitness_k{k}.svg` and `p_inter_k{k}.svg` for every trace present
/// in the output directory. Returns the files written.
pub fn plot_traces(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let mut written = Vec::new();
    for &k in &cfg.pool_sizes {
        let trace_path = cfg.output_dir.join(format!("trace_k{k}.tsv"));
        let Ok(text) = std::fs::read_to_string(&trace_path) else {
            continue;
        };
        let trace = RunTrace::from_tsv(&text).map_err(|e| PipelineError::stage("plot", e))?;
        for (file, svg) in [
            (
                format!("fitness_k{k}.svg"),
                fitness_chart(&trace, &format!("Fitness over generations (k={k})")),
            ),
            (
                format!("p_inter_k{k}.svg"),
                mutation_chart(
                    &trace,
                    &format!("Inter-cluster mutation probability (k={k})"),
                ),
            ),
        ] {
            let path = cfg.output_dir.join(file);
            std::fs::write(&path, svg).map_err(|e| PipelineError::stage("plot", e))?;
            written.push(path);
        }
    }
    if written.is_empty() {
        return Err(PipelineError::stage(
            "plot",
            "no trace files found; run select first",
        ));
    }
    Ok(written)
}
