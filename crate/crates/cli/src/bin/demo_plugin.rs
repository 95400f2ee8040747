//! Reference extension plugin for `netext`.
//!
//! Usage: `netext-demo-plugin [natural|identity|zero|garbage|short]`
//!
//! Reads one JSON request per line on stdin and answers with
//! `{"result": [...]}`. The last two modes violate the protocol on purpose.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use netext::mazur::mazur_scalar;
use serde_json::{json, Value};

fn answer(mode: &str, request: &Value) -> Result<Value, String> {
    let p_list: Vec<u32> = request
        .get("p_list")
        .and_then(Value::as_array)
        .ok_or("missing p_list")?
        .iter()
        .map(|v| {
            v.as_u64()
                .and_then(|p| u32::try_from(p).ok())
                .filter(|&p| p >= 2)
                .ok_or("p_list entries must be integers >= 2")
        })
        .collect::<Result<_, _>>()?;
    let dim = request
        .get("component_dim")
        .and_then(Value::as_u64)
        .ok_or("missing component_dim")? as usize;
    let point: Vec<f64> = request
        .get("point")
        .and_then(Value::as_array)
        .ok_or("missing point")?
        .iter()
        .map(|v| v.as_f64().ok_or("point entries must be numbers"))
        .collect::<Result<_, _>>()?;
    if point.len() != p_list.len() * dim {
        return Err(format!(
            "point has {} entries, expected {}",
            point.len(),
            p_list.len() * dim
        ));
    }
    let result: Vec<f64> = match mode {
        "zero" => vec![0.0; point.len()],
        "identity" => point,
        "short" => point.into_iter().skip(1).collect(),
        _ => point
            .chunks(dim.max(1))
            .zip(&p_list)
            .flat_map(|(block, &p)| block.iter().map(move |&x| mazur_scalar(x, p)))
            .collect(),
    };
    Ok(json!({ "result": result }))
}

fn main() -> ExitCode {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "natural".into());
    if !["natural", "identity", "zero", "garbage", "short"].contains(&mode.as_str()) {
        eprintln!("netext-demo-plugin: unknown mode `{mode}`");
        return ExitCode::from(2);
    }
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let reply = if mode == "garbage" {
            "not json".to_string()
        } else {
            let request: Value = match serde_json::from_str(&line) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("netext-demo-plugin: bad request: {e}");
                    return ExitCode::FAILURE;
                }
            };
            match answer(&mode, &request) {
                Ok(v) => v.to_string(),
                Err(e) => {
                    eprintln!("netext-demo-plugin: {e}");
                    return ExitCode::FAILURE;
                }
            }
        };
        if writeln!(stdout, "{reply}")
            .and_then(|_| stdout.flush())
            .is_err()
        {
            break;
        }
    }
    ExitCode::SUCCESS
}
