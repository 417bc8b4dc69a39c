//! Minimal oracle speaking the JSON-lines prediction protocol, for tests and demos.
//!
//! ```text
//! fairsub-oracle-stub [--constant L] [--threshold IDX VALUE] [--contains TERM]
//!                     [--labels NO YES] [--reorder N] [--exit-after N] [--sleep-ms MS]
//!                     [--garbage] [--wrong-id]
//! ```
//!
//! `--threshold` (numeric feature IDX at least VALUE) and `--contains` (token
//! present) answer YES or NO, "1" and "0" unless `--labels` renames them.
//! Otherwise every answer is the `--constant` label ("0" by default).
//! `--reorder N` holds answers back and releases every N of them in reverse.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Default)]
struct Options {
    constant: Option<String>,
    threshold: Option<(usize, f64)>,
    contains: Option<String>,
    labels: Option<(String, String)>,
    reorder: usize,
    exit_after: Option<usize>,
    sleep: Option<Duration>,
    garbage: bool,
    wrong_id: bool,
}

fn parse_args() -> Result<Options, String> {
    let mut opts = Options::default();
    let mut args = std::env::args().skip(1);
    let value = |args: &mut dyn Iterator<Item = String>, flag: &str| {
        args.next().ok_or_else(|| format!("{flag} needs a value"))
    };
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--constant" => opts.constant = Some(value(&mut args, &arg)?),
            "--threshold" => {
                let idx = value(&mut args, &arg)?
                    .parse()
                    .map_err(|e| format!("{arg}: {e}"))?;
                let v = value(&mut args, &arg)?
                    .parse()
                    .map_err(|e| format!("{arg}: {e}"))?;
                opts.threshold = Some((idx, v));
            }
            "--contains" => opts.contains = Some(value(&mut args, &arg)?),
            "--labels" => opts.labels = Some((value(&mut args, &arg)?, value(&mut args, &arg)?)),
            "--reorder" => {
                opts.reorder = value(&mut args, &arg)?
                    .parse()
                    .map_err(|e| format!("{arg}: {e}"))?
            }
            "--exit-after" => {
                opts.exit_after = Some(
                    value(&mut args, &arg)?
                        .parse()
                        .map_err(|e| format!("{arg}: {e}"))?,
                )
            }
            "--sleep-ms" => {
                let ms = value(&mut args, &arg)?
                    .parse()
                    .map_err(|e| format!("{arg}: {e}"))?;
                opts.sleep = Some(Duration::from_millis(ms));
            }
            "--garbage" => opts.garbage = true,
            "--wrong-id" => opts.wrong_id = true,
            other => return Err(format!("unknown argument `{other}`")),
        }
    }
    Ok(opts)
}

fn label(opts: &Options, request: &Value) -> Result<String, String> {
    let answer = |yes: bool| match (&opts.labels, yes) {
        (Some((_, y)), true) => y.clone(),
        (Some((n, _)), false) => n.clone(),
        (None, yes) => if yes { "1" } else { "0" }.to_string(),
    };
    if let Some((idx, min)) = opts.threshold {
        let x = request["features"]
            .get(idx)
            .and_then(Value::as_f64)
            .ok_or_else(|| format!("feature {idx} is missing or not numeric"))?;
        return Ok(answer(x >= min));
    }
    if let Some(term) = &opts.contains {
        let tokens = request["tokens"].as_array().ok_or("request has no tokens")?;
        let hit = tokens.iter().any(|t| t.as_str() == Some(term));
        return Ok(answer(hit));
    }
    Ok(opts.constant.clone().unwrap_or_else(|| "0".to_string()))
}

fn main() -> ExitCode {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("fairsub-oracle-stub: {e}");
            return ExitCode::from(2);
        }
    };
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut held: Vec<String> = Vec::new();
    let mut answered = 0usize;

    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if opts.exit_after.is_some_and(|n| answered >= n) {
            return ExitCode::from(3);
        }
        let request: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("fairsub-oracle-stub: bad request: {e}");
                continue;
            }
        };
        let Some(id) = request["id"].as_u64() else {
            eprintln!("fairsub-oracle-stub: request without id");
            continue;
        };
        let response = if opts.garbage {
            "this is not json".to_string()
        } else {
            match label(&opts, &request) {
                Ok(l) => {
                    let id = if opts.wrong_id { id + 1_000_000 } else { id };
                    json!({ "id": id, "label": l }).to_string()
                }
                Err(e) => {
                    eprintln!("fairsub-oracle-stub: request {id}: {e}");
                    continue;
                }
            }
        };
        if let Some(d) = opts.sleep {
            std::thread::sleep(d);
        }
        answered += 1;
        held.push(response);
        if held.len() >= opts.reorder.max(1) {
            for r in held.drain(..).rev() {
                if writeln!(out, "{r}").is_err() {
                    return ExitCode::FAILURE;
                }
            }
            if out.flush().is_err() {
                return ExitCode::FAILURE;
            }
        }
    }
    ExitCode::SUCCESS
}
