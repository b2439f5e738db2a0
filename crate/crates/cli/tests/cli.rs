use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mxplus")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, rows: usize, cols: usize, seed: u64) -> PathBuf {
    let path = p(dir, name);
    let (r, c, sd) = (rows.to_string(), cols.to_string(), seed.to_string());
    ok(&["gen", "--rows", &r, "--cols", &c, "--seed", &sd, "--out", s(&path)]);
    path
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.mxtn", 8, 96, 11);
    let b = gen(&dir, "b.mxtn", 8, 96, 11);
    let c = gen(&dir, "c.mxtn", 8, 96, 12);
    let read = |x: &Path| std::fs::read(x).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(read(&a).len(), 8 + 2 * 4 + 8 * 96 * 4);
}

#[test]
fn quantize_mxfp4_plus_uses_18_byte_blocks() {
    let dir = TempDir::new().unwrap();
    let t = gen(&dir, "t.mxtn", 4, 256, 1);
    let (plain, plus, report) = (p(&dir, "p.mxbk"), p(&dir, "q.mxbk"), p(&dir, "r.json"));
    ok(&["quantize", "--format", "mxfp4", "--in", s(&t), "--out", s(&plain)]);
    ok(&["quantize", "--format", "mxfp4+", "--in", s(&t), "--out", s(&plus), "--report", s(&report)]);
    let header = 4 + 2 + 3 + 1 + 2 * 4;
    let blocks = 4 * 256 / 32;
    let len = |x: &Path| std::fs::metadata(x).unwrap().len() as usize;
    assert_eq!(len(&plain), header + blocks * 17 + 1);
    assert_eq!(len(&plus), header + blocks * 18 + 1);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["format"], "mxfp4+");
    assert_eq!(r["per_block_sse"].as_array().unwrap().len(), blocks);
}

#[test]
fn dequantize_round_trips_through_quantize() {
    let dir = TempDir::new().unwrap();
    let t = gen(&dir, "t.mxtn", 3, 70, 5);
    let (q1, d1, q2) = (p(&dir, "q1.mxbk"), p(&dir, "d1.mxtn"), p(&dir, "q2.mxbk"));
    for f in ["mxfp6+", "mxint8", "nvfp4", "msfp12", "smx4"] {
        ok(&["quantize", "--format", f, "--in", s(&t), "--out", s(&q1)]);
        ok(&["dequantize", "--in", s(&q1), "--out", s(&d1)]);
        ok(&["quantize", "--format", f, "--in", s(&d1), "--out", s(&q2)]);
        assert_eq!(std::fs::read(&q1).unwrap(), std::fs::read(&q2).unwrap(), "{f}");
    }
}

#[test]
fn unknown_format_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let t = gen(&dir, "t.mxtn", 1, 32, 0);
    let out = run(&["quantize", "--format", "mxfp5", "--in", s(&t), "--out", s(&p(&dir, "x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!p(&dir, "x").exists());
    assert_eq!(run(&["analyze", "--in", s(&t), "--formats", "mxfp4,bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

fn write_raw(path: &Path, shape: &[u32], data: &[f32]) {
    let mut bytes = b"MXTN\x01\x00\x00".to_vec();
    bytes.push(shape.len() as u8);
    for d in shape {
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn nan_input_reports_machine_code() {
    let dir = TempDir::new().unwrap();
    let t = p(&dir, "nan.mxtn");
    let mut data = vec![1.0f32; 32];
    data[3] = f32::NAN;
    write_raw(&t, &[1, 32], &data);
    let out = run(&["quantize", "--format", "mxfp4", "--in", s(&t), "--out", s(&p(&dir, "o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[non-finite-input]"));
}

#[test]
fn corrupt_files_report_distinct_codes() {
    let dir = TempDir::new().unwrap();
    let bad = p(&dir, "bad.mxtn");
    std::fs::write(&bad, b"NOPE\x01\x00\x00\x01\x01\x00\x00\x00").unwrap();
    let stderr = |args: &[&str]| {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1));
        String::from_utf8_lossy(&out.stderr).into_owned()
    };
    assert!(stderr(&["dequantize", "--in", s(&bad), "--out", s(&p(&dir, "o"))]).contains("error[bad-magic]"));
    write_raw(&bad, &[1, 4], &[1.0, 2.0]);
    let o = p(&dir, "o");
    let cmd = ["quantize", "--format", "mxfp4", "--in", s(&bad), "--out", s(&o)];
    assert!(stderr(&cmd).contains("error[truncated]"));
    assert!(stderr(&["dequantize", "--in", s(&p(&dir, "missing")), "--out", "x"]).contains("error[io]"));
}

#[test]
fn matmul_paths_agree() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.mxtn", 9, 160, 21);
    let b = gen(&dir, "b.mxtn", 7, 160, 22);
    let (qa, qb, c) = (p(&dir, "a.mxbk"), p(&dir, "b.mxbk"), p(&dir, "c.mxtn"));
    ok(&["quantize", "--format", "mxfp4+", "--in", s(&a), "--out", s(&qa)]);
    ok(&["quantize", "--format", "mxfp4", "--in", s(&b), "--out", s(&qb)]);
    let out = ok(&["matmul", "--a", s(&qa), "--b", s(&qb), "--path", "decomposed", "--check", "--out", s(&c)]);
    let r = json(&out);
    assert_eq!((r["rows"].as_u64(), r["cols"].as_u64()), (Some(9), Some(7)));
    assert_eq!(r["checked"], true);
    assert_eq!(std::fs::metadata(&c).unwrap().len(), 16 + 9 * 7 * 4);

    let out = ok(&[
        "matmul",
        "--a",
        s(&a),
        "--a-format",
        "mxfp4++",
        "--b",
        s(&b),
        "--b-format",
        "mxfp4+",
        "--path",
        "reference,bcu",
        "--check",
    ]);
    assert_eq!(json(&out)["paths"], serde_json::json!(["reference", "bcu"]));
}

#[test]
fn matmul_rejects_incompatible_operands() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.mxtn", 2, 64, 1);
    let b = gen(&dir, "b.mxtn", 2, 32, 2);
    let out =
        run(&["matmul", "--a", s(&a), "--a-format", "mxfp4", "--b", s(&a), "--b-format", "mxfp4", "--path", "bcu"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[variant-mismatch]"));
    let out = run(&["matmul", "--a", s(&a), "--a-format", "mxfp4", "--b", s(&b), "--b-format", "mxfp4"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[shape-mismatch]"));
    let out = run(&["matmul", "--a", s(&a), "--b", s(&b)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--a-format"));
}

#[test]
fn analyze_shows_non_increasing_mse() {
    let dir = TempDir::new().unwrap();
    let t = gen(&dir, "t.mxtn", 32, 512, 8);
    let out = ok(&["analyze", "--in", s(&t), "--formats", "mxfp4,mxfp4+,mxfp4++", "--topk"]);
    let r = json(&out);
    let mse: Vec<f64> = r["formats"].as_array().unwrap().iter().map(|f| f["total_mse"].as_f64().unwrap()).collect();
    assert_eq!(mse.len(), 3);
    assert!(mse[0] >= mse[1] && mse[1] >= mse[2], "{mse:?}");
    assert_eq!(r["topk"].as_array().unwrap().len(), 33);
    assert_eq!(r["topk"][0]["total_mse"].as_f64().unwrap(), mse[0]);
    assert!(r["outliers"]["total_outliers"].as_u64().unwrap() > 0);
}

#[test]
fn reorder_spreads_adjacent_outliers() {
    let dir = TempDir::new().unwrap();
    let t = p(&dir, "t.mxtn");
    let args = ["gen", "--rows", "64", "--cols", "256", "--outlier-frac", "0.03", "--adjacent", "--seed", "3"];
    ok(&[&args[..], &["--out", s(&t)]].concat());
    let out_t = p(&dir, "r.mxtn");
    let out = ok(&["reorder", "--stats-from", s(&t), "--apply", s(&t), "--out", s(&out_t)]);
    let r = json(&out);
    let before = r["before"]["pct_blocks_with_multiple_outliers"].as_f64().unwrap();
    let after = r["after"]["pct_blocks_with_multiple_outliers"].as_f64().unwrap();
    assert!(after < before, "{before} -> {after}");
    assert_eq!(r["permutation"]["forward"].as_array().unwrap().len(), 256);
    assert_eq!(std::fs::metadata(&out_t).unwrap().len(), std::fs::metadata(&t).unwrap().len());
    let again = ok(&["reorder", "--stats-from", &format!("{},{}", s(&t), s(&t))]);
    assert_eq!(json(&again)["permutation"], r["permutation"]);
    assert!(json(&again).get("before").is_none());
}
