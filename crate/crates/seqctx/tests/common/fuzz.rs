//! Random and mutated inputs for the document parser.

use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use seqctx::io::{self, DocumentEnvelope, IoError};

fn golden_texts() -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden");
    let mut names: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    names.into_iter().map(|p| fs::read_to_string(p).unwrap()).collect()
}

const ALPHABET: &[u8] = b"{}[],:\"0123456789.-+eE truefalsnl\\\n";

fn byte_mutation(r: &mut ChaCha8Rng, text: &str) -> String {
    let mut bytes = text.as_bytes().to_vec();
    for _ in 0..r.gen_range(1..=4) {
        if bytes.is_empty() {
            break;
        }
        let i = r.gen_range(0..bytes.len());
        match r.gen_range(0..4) {
            0 => bytes[i] = *ALPHABET.choose(r).unwrap(),
            1 => {
                let j = r.gen_range(i..=bytes.len().min(i + 16));
                bytes.drain(i..j);
            }
            2 => {
                let j = r.gen_range(i..=bytes.len().min(i + 16));
                let chunk = bytes[i..j].to_vec();
                bytes.splice(i..i, chunk);
            }
            _ => bytes.truncate(i),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn random_leaf(r: &mut ChaCha8Rng) -> Value {
    let pool = [
        "null", "true", "-1", "0", "1", "2", "3", "0.5", "-0.0", "1e308", "-1e-308", "18446744073709551615",
        "\"\"", "\"A0\"", "\"x\"", "[]", "{}", "[0.5, 0.5]", "[[1.0, 0.0]]", "[{\"index\": 0, \"instrument\": \"A0\"}]",
    ];
    serde_json::from_str(pool.choose(r).unwrap()).unwrap()
}

fn node_count(v: &Value) -> usize {
    1 + match v {
        Value::Array(a) => a.iter().map(node_count).sum(),
        Value::Object(o) => o.values().map(node_count).sum(),
        _ => 0,
    }
}

/// Applies `f` to the `k`-th node in pre-order.
fn with_node(v: &mut Value, k: &mut usize, f: &mut dyn FnMut(&mut Value)) -> bool {
    if *k == 0 {
        f(v);
        return true;
    }
    *k -= 1;
    match v {
        Value::Array(a) => a.iter_mut().any(|x| with_node(x, k, f)),
        Value::Object(o) => o.values_mut().any(|x| with_node(x, k, f)),
        _ => false,
    }
}

fn mutate(node: &mut Value, op: u32, extra: usize, leaf: &Value) {
    match node {
        Value::Object(o) if op == 0 && !o.is_empty() => {
            let key = o.keys().nth(extra % o.len()).unwrap().clone();
            o.remove(&key);
        }
        Value::Object(o) if op == 1 => {
            o.insert(format!("k{extra}"), leaf.clone());
        }
        Value::Array(a) if op == 2 && !a.is_empty() => {
            a.remove(extra % a.len());
        }
        Value::Array(a) if op == 3 && !a.is_empty() => {
            let x = a[extra % a.len()].clone();
            a.push(x);
        }
        Value::Number(x) if op == 4 => {
            let f = x.as_f64().unwrap_or(0.0);
            *node = serde_json::Number::from_f64(f * -1.5 + 1e-3).map(Value::Number).unwrap_or(Value::Null);
        }
        _ => *node = leaf.clone(),
    }
}

fn structural_mutation(r: &mut ChaCha8Rng, text: &str) -> String {
    let mut v: Value = serde_json::from_str(text).unwrap();
    for _ in 0..r.gen_range(1..=3) {
        let n = node_count(&v);
        let mut k = r.gen_range(0..n);
        let op = r.gen_range(0..5);
        let leaf = random_leaf(r);
        let extra = r.gen_range(0..1000usize);
        with_node(&mut v, &mut k, &mut |node| mutate(node, op, extra, &leaf));
    }
    io::canonical_text(&v)
}

fn check_outcome(text: &str, result: Result<DocumentEnvelope, IoError>) {
    match result {
        Ok(env) => assert_eq!(io::parse(&io::serialize(&env)).unwrap(), env, "accepted input:\n{text}"),
        Err(IoError::Syntax { line, .. }) => assert!(line >= 1 || text.is_empty()),
        Err(e) => assert!(!e.path().unwrap_or_default().is_empty(), "error without a path: {e}"),
    }
}

pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Parses `n` generated inputs: a quarter random bytes, a quarter byte-level
/// mutations of golden files and half structural JSON mutations. Panics if
/// the parser panics, an error lacks its location, or an accepted document
/// fails to round-trip.
pub fn run(n: usize, seed: u64) -> Stats {
    let goldens = golden_texts();
    let small: Vec<&String> = goldens.iter().filter(|t| t.len() < 8_000).collect();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0usize;
    for i in 0..n {
        let text = match i % 4 {
            0 => {
                let len = r.gen_range(0..120);
                let bytes: Vec<u8> = (0..len)
                    .map(|_| if r.gen_bool(0.7) { *ALPHABET.choose(&mut r).unwrap() } else { r.gen() })
                    .collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            1 => {
                let base = small[r.gen_range(0..small.len())];
                byte_mutation(&mut r, base)
            }
            _ => {
                let base = small[r.gen_range(0..small.len())];
                structural_mutation(&mut r, base)
            }
        };
        let result = io::parse(&text);
        accepted += result.is_ok() as usize;
        check_outcome(&text, result);
    }
    Stats {
        accepted,
        rejected: n - accepted,
    }
}
