//! The checked-in header must list every exported symbol, and a C program
//! written against it must compile, link and run.

use std::path::{Path, PathBuf};
use std::process::Command;

const SYMBOLS: &[&str] = &[
    "grasp_last_error",
    "grasp_version",
    "grasp_string_free",
    "grasp_inter_probability",
    "grasp_cluster",
    "grasp_pool_from_labels",
    "grasp_pool_load",
    "grasp_pool_round_robin",
    "grasp_pool_len",
    "grasp_pool_n_clusters",
    "grasp_pool_cluster_size",
    "grasp_pool_example_id",
    "grasp_pool_free",
    "grasp_ga_config_default",
    "grasp_evolve_surrogate",
    "grasp_evolve",
    "grasp_run_best_fitness",
    "grasp_run_generations",
    "grasp_run_record",
    "grasp_run_best_genes",
    "grasp_run_trace_tsv",
    "grasp_run_free",
    "grasp_score_jsonl",
    "grasp_run_pipeline",
];

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/grasp.h")
}

#[test]
fn header_declares_every_symbol() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for s in SYMBOLS {
        assert!(header.contains(&format!("{s}(")), "{s} missing from header");
    }
    assert!(header.contains("typedef struct GraspPool GraspPool;"));
    assert!(header.contains("typedef struct GraspRun GraspRun;"));
    assert!(header.contains("GRASP_STATUS_OK = 0"));
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "grasp.h"

static int clusters(void *ud, const GraspGene *g, size_t n, double *out) {
    (void)ud;
    int seen[64] = {0};
    int d = 0;
    for (size_t i = 0; i < n; i++) {
        if (!seen[g[i].cluster]) { seen[g[i].cluster] = 1; d++; }
    }
    *out = d;
    return 0;
}

int main(void) {
    if (fabs(grasp_inter_probability(0.4, 0.05, 0.70) - 0.31) > 1e-12) return 1;
    size_t labels[48];
    for (size_t i = 0; i < 48; i++) labels[i] = i % 8;
    GraspPool *pool = NULL;
    if (grasp_pool_from_labels(labels, 48, &pool) != GRASP_STATUS_OK) return 2;
    GraspGaConfig cfg = grasp_ga_config_default();
    cfg.mu = 10; cfg.lambda = 20; cfg.max_generations = 10; cfg.eval_workers = 1;
    GraspRun *run = NULL;
    if (grasp_evolve(pool, &cfg, clusters, NULL, &run) != GRASP_STATUS_OK) {
        fprintf(stderr, "%s\n", grasp_last_error());
        return 3;
    }
    if (grasp_run_best_fitness(run) != 5.0) return 4;
    char *tsv = grasp_run_trace_tsv(run);
    if (!tsv) return 5;
    grasp_string_free(tsv);
    grasp_run_free(run);
    grasp_pool_free(pool);
    if (grasp_evolve(NULL, &cfg, clusters, NULL, &run) != GRASP_STATUS_NULL_POINTER) return 6;
    printf("ok %s\n", grasp_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_library() {
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib_dir = deps.parent().unwrap().to_path_buf();
    let staticlib = lib_dir.join("libgrasp_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !staticlib.exists() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            staticlib.display()
        );
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status,
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
