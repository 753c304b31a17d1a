//! Compiles a small C program against the header and static library.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "handmorph.h"

int main(int argc, char **argv) {
    HmGrammar *g = NULL;
    HmGraph *graph = NULL;
    FILE *f = fopen(argv[1], "rb");
    static char buf[1 << 16];
    size_t n = fread(buf, 1, sizeof buf - 1, f);
    fclose(f);
    buf[n] = 0;
    if (hm_grammar_parse(buf, &g) != HM_STATUS_OK) return 10;
    if (hm_grammar_expand(g, &graph) != HM_STATUS_OK) return 11;
    printf("%zu %zu %zu\n", hm_graph_count_kind(graph, HM_NODE_KIND_PALM),
           hm_graph_count_kind(graph, HM_NODE_KIND_JOINT), hm_graph_count_kind(graph, HM_NODE_KIND_LINK));
    hm_graph_free(graph);
    hm_grammar_free(g);
    if (hm_grammar_parse("{", &g) != HM_STATUS_PARSE || hm_last_error() == NULL) return 12;
    return argc == 2 ? 0 : 13;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libhandmorph_ffi.a");
    assert!(lib.is_file(), "static library not built at {}", lib.display());
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler `{cc}`");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let grammar = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/grammars/symmetric_three_finger.json");
    let run = Command::new(&exe).arg(&grammar).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "1 9 6");
}
