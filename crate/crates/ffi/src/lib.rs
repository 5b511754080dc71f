//! C ABI over the `grasp` library.
//!
//! Every fallible call returns a [`GraspStatus`]; on failure the message is
//! available from [`grasp_last_error`] on the same thread. Objects are handed
//! out as opaque pointers and released with their matching `*_free` call.
//! Strings returned as `char *` are owned by the caller and released with
//! [`grasp_string_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use grasp::corpus::{load_examples, Example};
use grasp::evalx::{aggregate, load_predictions, score_example, Prediction, SurrogateFitness};
use grasp::evolve::{
    evolve, inter_probability, EvolveOutcome, Fitness, FitnessError, GaConfig, Gene, Genome,
};
use grasp::pipeline::{run_pipeline, Group, PipelineConfig, PipelineError};
use grasp::reduce::{
    build_pool, cluster, filter_noise, read_assignment, ClusteredPool, ClusteringParams,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Config = 4,
    Stage = 5,
    Client = 6,
    Callback = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(GraspStatus, String);

impl Failure {
    fn new(status: GraspStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GraspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GraspStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            GraspStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(
            GraspStatus::NullPointer,
            format!("{name} is null"),
        ))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    non_null(p, name)?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(GraspStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map(CString::into_raw)
        .unwrap_or(std::ptr::null_mut())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn grasp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn grasp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn grasp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Inter-cluster mutation probability for diversity `d`.
#[no_mangle]
pub extern "C" fn grasp_inter_probability(d: f64, p_min: f64, p_max: f64) -> f64 {
    let cfg = GaConfig {
        p_min,
        p_max,
        ..GaConfig::default()
    };
    inter_probability(d, &cfg)
}

/// Clusters `n` row-major points of width `dim`. Writes one label per point
/// into `out_labels` (-1 for noise) and the cluster count into
/// `out_n_clusters`.
///
/// # Safety
/// `points` must hold `n * dim` values and `out_labels` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn grasp_cluster(
    points: *const f64,
    n: usize,
    dim: usize,
    min_cluster_size: usize,
    min_samples: usize,
    cluster_selection_epsilon: f64,
    out_labels: *mut i64,
    out_n_clusters: *mut usize,
) -> GraspStatus {
    guard(|| {
        non_null(out_labels, "out_labels")?;
        non_null(out_n_clusters, "out_n_clusters")?;
        if n > 0 {
            non_null(points, "points")?;
        }
        if dim == 0 {
            return Err(Failure::new(
                GraspStatus::InvalidArgument,
                "dim must be at least 1",
            ));
        }
        let flat = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(points, n * dim)
        };
        let rows: Vec<Vec<f64>> = flat.chunks(dim).map(<[f64]>::to_vec).collect();
        let params = ClusteringParams {
            min_cluster_size,
            min_samples,
            cluster_selection_epsilon,
        };
        let a =
            cluster(&rows, &params).map_err(|e| Failure::new(GraspStatus::InvalidArgument, e))?;
        let out = std::slice::from_raw_parts_mut(out_labels, n);
        for (slot, label) in out.iter_mut().zip(&a.labels) {
            *slot = label.map_or(-1, |c| c as i64);
        }
        *out_n_clusters = a.n_clusters;
        Ok(())
    })
}

/// A clustered example pool.
pub struct GraspPool(ClusteredPool);

/// Builds a pool of placeholder examples (ids `x0`, `x1`, ...) with the given
/// cluster labels. Labels need not be dense.
///
/// # Safety
/// `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_from_labels(
    labels: *const usize,
    n: usize,
    out: *mut *mut GraspPool,
) -> GraspStatus {
    guard(|| {
        non_null(out, "out")?;
        if n > 0 {
            non_null(labels, "labels")?;
        }
        let labels = if n == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(labels, n)
        };
        let examples = (0..n)
            .map(|i| {
                Example::new(
                    format!("x{i}"),
                    format!("example {i}"),
                    Default::default(),
                    Default::default(),
                )
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::new(GraspStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(GraspPool(ClusteredPool::from_labels(
            examples, labels,
        ))));
        Ok(())
    })
}

/// Loads examples (JSON lines) and a cluster assignment table (`id<TAB>cluster`,
/// -1 for noise). Noise examples are dropped.
///
/// # Safety
/// Paths must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_load(
    examples_path: *const c_char,
    assignment_path: *const c_char,
    out: *mut *mut GraspPool,
) -> GraspStatus {
    guard(|| {
        non_null(out, "out")?;
        let examples_path = path_arg(examples_path, "examples_path")?;
        let assignment_path = path_arg(assignment_path, "assignment_path")?;
        let examples =
            load_examples(&examples_path).map_err(|e| Failure::new(GraspStatus::Io, e))?;
        let labels = read_assignment(&assignment_path, &examples)
            .map_err(|e| Failure::new(GraspStatus::Io, e))?;
        *out = Box::into_raw(Box::new(GraspPool(filter_noise(examples, &labels))));
        Ok(())
    })
}

/// Draws a pool of `k` examples round-robin over the clusters of `pool`.
///
/// # Safety
/// `pool` must be a live pool handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_round_robin(
    pool: *const GraspPool,
    k: usize,
    out: *mut *mut GraspPool,
) -> GraspStatus {
    guard(|| {
        non_null(pool, "pool")?;
        non_null(out, "out")?;
        let source = &(*pool).0;
        *out = Box::into_raw(Box::new(GraspPool(
            build_pool(source, k).materialize(source),
        )));
        Ok(())
    })
}

/// Number of examples; 0 for null.
///
/// # Safety
/// `pool` must be null or a live pool handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_len(pool: *const GraspPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.len())
}

/// Number of clusters; 0 for null.
///
/// # Safety
/// `pool` must be null or a live pool handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_n_clusters(pool: *const GraspPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.n_clusters())
}

/// Size of cluster `c`; 0 for null or out of range.
///
/// # Safety
/// `pool` must be null or a live pool handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_cluster_size(pool: *const GraspPool, c: usize) -> usize {
    match pool.as_ref() {
        Some(p) if c < p.0.n_clusters() => p.0.cluster(c).len(),
        _ => 0,
    }
}

/// Identifier of the example a gene points at, or null when out of range.
/// The caller frees the string.
///
/// # Safety
/// `pool` must be null or a live pool handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_example_id(
    pool: *const GraspPool,
    gene: GraspGene,
) -> *mut c_char {
    match pool.as_ref() {
        Some(p)
            if gene.cluster < p.0.n_clusters()
                && gene.example < p.0.cluster(gene.cluster).len() =>
        {
            owned_string(p.0.example_at(gene.cluster, gene.example).id.clone())
        }
        _ => std::ptr::null_mut(),
    }
}

/// # Safety
/// `pool` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn grasp_pool_free(pool: *mut GraspPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraspGene {
    pub cluster: usize,
    pub example: usize,
}

impl From<Gene> for GraspGene {
    fn from(g: Gene) -> Self {
        GraspGene {
            cluster: g.cluster,
            example: g.example,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspGaConfig {
    pub mu: usize,
    pub lambda: usize,
    pub max_generations: usize,
    pub p_cx: f64,
    pub p_mut: f64,
    pub tournament_size: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub warmup: usize,
    pub patience: usize,
    pub min_relative_improvement: f64,
    pub seed: u64,
    pub shots: usize,
    /// Upper bound on concurrent fitness calls.
    pub eval_workers: usize,
}

impl From<GaConfig> for GraspGaConfig {
    fn from(c: GaConfig) -> Self {
        GraspGaConfig {
            mu: c.mu,
            lambda: c.lambda,
            max_generations: c.max_generations,
            p_cx: c.p_cx,
            p_mut: c.p_mut,
            tournament_size: c.tournament_size,
            p_min: c.p_min,
            p_max: c.p_max,
            warmup: c.warmup,
            patience: c.patience,
            min_relative_improvement: c.min_relative_improvement,
            seed: c.seed,
            shots: c.shots,
            eval_workers: c.eval_workers,
        }
    }
}

impl From<GraspGaConfig> for GaConfig {
    fn from(c: GraspGaConfig) -> Self {
        GaConfig {
            mu: c.mu,
            lambda: c.lambda,
            max_generations: c.max_generations,
            p_cx: c.p_cx,
            p_mut: c.p_mut,
            tournament_size: c.tournament_size,
            p_min: c.p_min,
            p_max: c.p_max,
            warmup: c.warmup,
            patience: c.patience,
            min_relative_improvement: c.min_relative_improvement,
            seed: c.seed,
            shots: c.shots,
            eval_workers: c.eval_workers,
        }
    }
}

/// The library defaults.
#[no_mangle]
pub extern "C" fn grasp_ga_config_default() -> GraspGaConfig {
    GaConfig::default().into()
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspGenerationRecord {
    pub generation: usize,
    pub mean_fitness: f64,
    pub best_fitness: f64,
    pub diversity: f64,
    pub p_inter: f64,
    pub evaluations: usize,
}

/// Scores a genome. Writes the fitness to `out_fitness` and returns 0, or
/// returns non-zero to abort the run. May be called from several threads at
/// once unless `eval_workers` is 1.
pub type GraspFitnessCallback = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        genes: *const GraspGene,
        n_genes: usize,
        out_fitness: *mut f64,
    ) -> c_int,
>;

/// A finished GA run.
pub struct GraspRun(EvolveOutcome);

struct UserData(*mut c_void);
// The caller promises the callback is safe to call concurrently.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

struct CallbackFitness {
    callback: unsafe extern "C" fn(*mut c_void, *const GraspGene, usize, *mut f64) -> c_int,
    user_data: UserData,
}

impl Fitness for CallbackFitness {
    fn evaluate(&self, genome: &Genome, _: &ClusteredPool) -> Result<f64, FitnessError> {
        let genes: Vec<GraspGene> = genome.genes().iter().map(|&g| g.into()).collect();
        let mut value = f64::NAN;
        let code =
            unsafe { (self.callback)(self.user_data.0, genes.as_ptr(), genes.len(), &mut value) };
        if code != 0 {
            return Err(format!("fitness callback returned {code}").into());
        }
        Ok(value)
    }
}

fn finish_run(
    result: Result<EvolveOutcome, grasp::evolve::EvolveError>,
    out: *mut *mut GraspRun,
) -> Result<(), Failure> {
    use grasp::evolve::EvolveError;
    let outcome = result.map_err(|e| match e {
        EvolveError::Fitness { .. } => Failure::new(GraspStatus::Callback, e),
        other => Failure::new(GraspStatus::InvalidArgument, other),
    })?;
    unsafe { *out = Box::into_raw(Box::new(GraspRun(outcome))) };
    Ok(())
}

/// Runs the GA with the offline surrogate fitness seeded by `surrogate_seed`.
///
/// # Safety
/// `pool` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_evolve_surrogate(
    pool: *const GraspPool,
    config: *const GraspGaConfig,
    surrogate_seed: u64,
    out: *mut *mut GraspRun,
) -> GraspStatus {
    guard(|| {
        non_null(pool, "pool")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        let cfg: GaConfig = (*config).into();
        finish_run(
            evolve(&(*pool).0, &SurrogateFitness::new(surrogate_seed), &cfg),
            out,
        )
    })
}

/// Runs the GA with a caller-supplied fitness function.
///
/// # Safety
/// `pool` and `config` must be valid, `out` writable, and `callback` safe to
/// call with `user_data` for the whole run.
#[no_mangle]
pub unsafe extern "C" fn grasp_evolve(
    pool: *const GraspPool,
    config: *const GraspGaConfig,
    callback: GraspFitnessCallback,
    user_data: *mut c_void,
    out: *mut *mut GraspRun,
) -> GraspStatus {
    guard(|| {
        non_null(pool, "pool")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        let callback =
            callback.ok_or_else(|| Failure::new(GraspStatus::NullPointer, "callback is null"))?;
        let cfg: GaConfig = (*config).into();
        let fitness = CallbackFitness {
            callback,
            user_data: UserData(user_data),
        };
        finish_run(evolve(&(*pool).0, &fitness, &cfg), out)
    })
}

/// Best fitness found; NaN for null.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_best_fitness(run: *const GraspRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.0.best_fitness)
}

/// Number of trace records (generation 0 included); 0 for null.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_generations(run: *const GraspRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.trace.len())
}

/// Copies trace record `i` into `out`.
///
/// # Safety
/// `run` must be a live run handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_record(
    run: *const GraspRun,
    i: usize,
    out: *mut GraspGenerationRecord,
) -> GraspStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        let run = &*run;
        let r = run.0.trace.records.get(i).ok_or_else(|| {
            Failure::new(
                GraspStatus::InvalidArgument,
                format!("record {i} out of range"),
            )
        })?;
        *out = GraspGenerationRecord {
            generation: r.generation,
            mean_fitness: r.mean_fitness,
            best_fitness: r.best_fitness,
            diversity: r.diversity,
            p_inter: r.p_inter,
            evaluations: r.evaluations,
        };
        Ok(())
    })
}

/// Copies up to `capacity` genes of the best genome into `out` and writes
/// the genome length to `out_len`. Pass `capacity` 0 to query the length.
///
/// # Safety
/// `run` must be a live run handle, `out` must hold `capacity` genes and
/// `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_best_genes(
    run: *const GraspRun,
    out: *mut GraspGene,
    capacity: usize,
    out_len: *mut usize,
) -> GraspStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out_len, "out_len")?;
        let genes = (*run).0.best.genes();
        *out_len = genes.len();
        if capacity > 0 {
            non_null(out, "out")?;
            let dst = std::slice::from_raw_parts_mut(out, capacity);
            for (d, g) in dst.iter_mut().zip(genes) {
                *d = (*g).into();
            }
        }
        Ok(())
    })
}

/// The trace as tab-separated text with a header row. The caller frees the
/// string; null for a null run.
///
/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_trace_tsv(run: *const GraspRun) -> *mut c_char {
    run.as_ref()
        .map_or(std::ptr::null_mut(), |r| owned_string(r.0.trace.to_tsv()))
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_free(run: *mut GraspRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GraspMetrics {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// Scores predictions (`{"id", "entities"}` lines) against gold examples.
/// Gold examples without a prediction count as empty predictions; predictions
/// for unknown ids are an error.
///
/// # Safety
/// Paths must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grasp_score_jsonl(
    gold_path: *const c_char,
    predictions_path: *const c_char,
    out: *mut GraspMetrics,
) -> GraspStatus {
    guard(|| {
        non_null(out, "out")?;
        let gold = load_examples(&path_arg(gold_path, "gold_path")?)
            .map_err(|e| Failure::new(GraspStatus::Io, e))?;
        let preds = load_predictions(&path_arg(predictions_path, "predictions_path")?)
            .map_err(|e| Failure::new(GraspStatus::Io, e))?;
        let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
        for p in &preds {
            if !gold.iter().any(|g| g.id == p.example_id) {
                return Err(Failure::new(
                    GraspStatus::InvalidArgument,
                    format!("prediction for unknown id {}", p.example_id),
                ));
            }
            by_id.insert(p.example_id.as_str(), p);
        }
        let counts = gold
            .iter()
            .map(|g| {
                let empty = Prediction::empty(&g.id);
                score_example(g, by_id.get(g.id.as_str()).copied().unwrap_or(&empty))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::new(GraspStatus::InvalidArgument, e))?;
        let r = aggregate(&counts);
        *out = GraspMetrics {
            micro_precision: r.micro_precision,
            micro_recall: r.micro_recall,
            micro_f1: r.micro_f1,
            macro_f1: r.macro_f1,
        };
        Ok(())
    })
}

/// Runs every stage of the pipeline described by a TOML config, resuming
/// completed stages. `output_dir` overrides the configured one when non-null.
///
/// # Safety
/// `config_path` must be NUL-terminated; `output_dir` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn grasp_run_pipeline(
    config_path: *const c_char,
    output_dir: *const c_char,
) -> GraspStatus {
    guard(|| {
        let mut cfg = PipelineConfig::load(&path_arg(config_path, "config_path")?)
            .map_err(pipeline_failure)?;
        if !output_dir.is_null() {
            cfg.output_dir = std::path::absolute(path_arg(output_dir, "output_dir")?)
                .map_err(|e| Failure::new(GraspStatus::InvalidArgument, e))?;
        }
        run_pipeline(&cfg, &Group::ALL).map_err(pipeline_failure)?;
        Ok(())
    })
}

fn pipeline_failure(e: PipelineError) -> Failure {
    let status = match e {
        PipelineError::Config(_) => GraspStatus::Config,
        PipelineError::Stage { .. } => GraspStatus::Stage,
        PipelineError::Client { .. } => GraspStatus::Client,
    };
    Failure::new(status, e)
}
