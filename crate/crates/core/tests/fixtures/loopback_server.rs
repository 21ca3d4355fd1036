//! Reference model server for the JSON-lines logit protocol, used by the bridge tests.
//!
//! It answers each step with a score of 1 for the next token of a fixed target and 0
//! elsewhere; past the end of the target it favours `[EOS]`.
//!
//! ```text
//! rxnseq-loopback --tokens FILE        targets from a token file; the init image's file
//!                                      stem selects the line by image id, and a file with
//!                                      a single line serves every image
//! rxnseq-loopback --target "1 2 3"     one literal target
//!   --short-logits N                   answer with N scores instead of vocab_size
//!   --silent                           never answer the handshake
//!   --exit-after N                     exit after answering N steps
//! ```

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::process::ExitCode;

use serde_json::{json, Value};

struct Options {
    targets: HashMap<String, Vec<u64>>,
    single: Option<Vec<u64>>,
    short_logits: Option<usize>,
    silent: bool,
    exit_after: Option<usize>,
}

fn parse_tokens(s: &str) -> Result<Vec<u64>, String> {
    s.split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad token {t:?}")))
        .collect()
}

fn parse_args() -> Result<Options, String> {
    let mut o = Options {
        targets: HashMap::new(),
        single: None,
        short_logits: None,
        silent: false,
        exit_after: None,
    };
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut value = || args.next().ok_or(format!("{a} needs a value"));
        match a.as_str() {
            "--tokens" => {
                let path = value()?;
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
                let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
                for line in &lines {
                    let fields: Vec<&str> = line.split('\t').collect();
                    if fields.len() != 4 {
                        return Err(format!("bad token line {line:?}"));
                    }
                    o.targets
                        .insert(fields[0].to_owned(), parse_tokens(fields[3])?);
                }
                if lines.len() == 1 {
                    o.single = o.targets.values().next().cloned();
                }
            }
            "--target" => o.single = Some(parse_tokens(&value()?)?),
            "--short-logits" => {
                o.short_logits = Some(value()?.parse().map_err(|_| "bad --short-logits")?)
            }
            "--exit-after" => {
                o.exit_after = Some(value()?.parse().map_err(|_| "bad --exit-after")?)
            }
            "--silent" => o.silent = true,
            other => return Err(format!("unknown argument {other}")),
        }
    }
    Ok(o)
}

fn reply(out: &mut impl Write, v: &Value) -> io::Result<()> {
    writeln!(out, "{v}")?;
    out.flush()
}

fn run(o: Options) -> Result<(), String> {
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut lines = stdin.lock().lines();
    let io_err = |e: io::Error| e.to_string();

    let Some(init) = lines.next() else {
        return Ok(());
    };
    let init: Value = serde_json::from_str(&init.map_err(io_err)?).map_err(|e| e.to_string())?;
    if init["type"] != "init" {
        return Err(format!("expected init, got {init}"));
    }
    let n_bins = init["n_bins"].as_u64().ok_or("init without n_bins")? as usize;
    let vocab_size = init["vocab_size"]
        .as_u64()
        .ok_or("init without vocab_size")? as usize;
    let image = init["image"].as_str().ok_or("init without image")?;
    let stem = Path::new(image)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let target = match o.targets.get(&stem).or(o.single.as_ref()) {
        Some(t) => t.clone(),
        None => {
            reply(
                &mut out,
                &json!({"type": "error", "message": format!("no target for {image}")}),
            )
            .map_err(io_err)?;
            return Ok(());
        }
    };
    if o.silent {
        // hold the pipe open without answering
        for _ in lines.by_ref() {}
        return Ok(());
    }
    reply(&mut out, &json!({"type": "ready"})).map_err(io_err)?;

    let eos = n_bins + 7;
    let mut answered = 0;
    for line in lines {
        let msg: Value = serde_json::from_str(&line.map_err(io_err)?).map_err(|e| e.to_string())?;
        if msg["type"] != "step" {
            return Err(format!("expected step, got {msg}"));
        }
        let prefix_len = msg["prefix"].as_array().ok_or("step without prefix")?.len();
        let mut values = vec![0.0f64; o.short_logits.unwrap_or(vocab_size)];
        let next = target.get(prefix_len).map(|t| *t as usize).unwrap_or(eos);
        if let Some(v) = values.get_mut(next) {
            *v = 1.0;
        }
        reply(&mut out, &json!({"type": "logits", "values": values})).map_err(io_err)?;
        answered += 1;
        if o.exit_after == Some(answered) {
            return Ok(());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match parse_args().and_then(run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rxnseq-loopback: {e}");
            ExitCode::FAILURE
        }
    }
}
