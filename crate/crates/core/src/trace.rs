//! `.trace.json` reading and writing.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::model::{Location, RhaModel, Valuation};
use crate::parser::{CALL_LABEL, RETURN_LABEL};
use crate::rational::Rational;
use crate::semantics::{step, Configuration, Frame, Run, Step, StepKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
}

fn malformed(path: &str, message: impl Into<String>) -> TraceError {
    TraceError::Malformed {
        path: path.to_string(),
        message: message.into(),
    }
}

fn val_json(model: &RhaModel, v: &Valuation) -> Value {
    let mut m = Map::new();
    for (name, q) in model.vars.iter().zip(v.iter()) {
        m.insert(name.clone(), Value::String(q.to_fraction_string()));
    }
    Value::Object(m)
}

pub fn config_json(model: &RhaModel, c: &Configuration) -> Value {
    let context: Vec<Value> = c
        .context
        .iter()
        .map(|f| json!({"box": model.box_decl(f.box_id).name, "saved": val_json(model, &f.saved)}))
        .collect();
    json!({
        "context": context,
        "loc": model.qualified_loc_name(c.loc),
        "val": val_json(model, &c.val),
    })
}

pub fn run_json(model: &RhaModel, run: &Run) -> Value {
    let steps: Vec<Value> = run
        .steps
        .iter()
        .map(|s| {
            json!({
                "t": s.delay.to_fraction_string(),
                "action": s.action(model),
                "to": config_json(model, &s.to),
            })
        })
        .collect();
    json!({"init": config_json(model, &run.init), "steps": steps})
}

/// Pretty-printed JSON document with a trailing newline.
pub fn write_trace(model: &RhaModel, run: &Run) -> String {
    let mut s = serde_json::to_string_pretty(&run_json(model, run)).expect("serializable");
    s.push('\n');
    s
}

fn parse_rational(v: &Value, path: &str) -> Result<Rational, TraceError> {
    let s = v.as_str().ok_or_else(|| malformed(path, "expected a \"p/q\" string"))?;
    s.parse().map_err(|_| malformed(path, format!("malformed rational `{s}`")))
}

fn parse_val(model: &RhaModel, v: &Value, path: &str) -> Result<Valuation, TraceError> {
    let obj = v.as_object().ok_or_else(|| malformed(path, "expected an object"))?;
    let mut out = Valuation::zero(model.nvars());
    for (i, name) in model.vars.iter().enumerate() {
        let q = obj
            .get(name)
            .ok_or_else(|| malformed(path, format!("missing variable `{name}`")))?;
        out.0[i] = parse_rational(q, &format!("{path}.{name}"))?;
    }
    if let Some(extra) = obj.keys().find(|k| model.var(k).is_none()) {
        return Err(malformed(path, format!("unknown variable `{extra}`")));
    }
    Ok(out)
}

fn parse_config(model: &RhaModel, v: &Value, path: &str) -> Result<Configuration, TraceError> {
    let loc_s = v
        .get("loc")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed(path, "missing `loc`"))?;
    let loc = model
        .resolve_location(loc_s)
        .ok_or_else(|| malformed(path, format!("unknown location `{loc_s}`")))?;
    let val = parse_val(model, v.get("val").unwrap_or(&Value::Null), &format!("{path}.val"))?;
    let ctx = v
        .get("context")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(path, "missing `context` list"))?;
    let mut context = Vec::with_capacity(ctx.len());
    for (i, f) in ctx.iter().enumerate() {
        let fp = format!("{path}.context[{i}]");
        let b = f
            .get("box")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(&fp, "malformed frame: missing `box`"))?;
        let box_id = model
            .box_by_name(b)
            .ok_or_else(|| malformed(&fp, format!("unknown box `{b}`")))?;
        let saved = f
            .get("saved")
            .ok_or_else(|| malformed(&fp, "malformed frame: missing saved valuation"))?;
        let saved = parse_val(model, saved, &format!("{fp}.saved"))
            .map_err(|e| malformed(&fp, format!("malformed frame: {e}")))?;
        context.push(Frame { box_id, saved });
    }
    Ok(Configuration { context, loc, val })
}

/// Picks the edge matching `action` and the recorded target; ties are broken
/// by replaying the step.
fn resolve_kind(model: &RhaModel, from: &Configuration, action: &str, delay: &Rational, to: &Configuration) -> Option<StepKind> {
    match from.loc {
        Location::Call(..) if action == CALL_LABEL => return Some(StepKind::Call),
        Location::Node(n) if model.is_exit(n) && action == RETURN_LABEL => return Some(StepKind::Return),
        _ => {}
    }
    let cands: Vec<_> = model
        .outgoing(from.loc)
        .into_iter()
        .filter(|e| model.edge(*e).label() == action && model.edge(*e).dst == to.loc)
        .collect();
    cands
        .iter()
        .copied()
        .find(|e| step(model, from, delay, StepKind::Edge(*e)).map(|c| c == *to).unwrap_or(false))
        .or_else(|| cands.first().copied())
        .map(StepKind::Edge)
}

pub fn read_trace(model: &RhaModel, text: &str) -> Result<Run, TraceError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| TraceError::Json(e.to_string()))?;
    let init = parse_config(model, doc.get("init").ok_or_else(|| malformed("$", "missing `init`"))?, "init")?;
    let steps_v = doc
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("$", "missing `steps` list"))?;
    let mut run = Run::new(init);
    for (i, s) in steps_v.iter().enumerate() {
        let path = format!("steps[{i}]");
        let delay = parse_rational(s.get("t").unwrap_or(&Value::Null), &format!("{path}.t"))?;
        let action = s
            .get("action")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed(&path, "missing `action`"))?;
        let to = parse_config(model, s.get("to").unwrap_or(&Value::Null), &format!("{path}.to"))?;
        let kind = resolve_kind(model, run.last(), action, &delay, &to)
            .ok_or_else(|| malformed(&path, format!("no transition labelled `{action}` leads to the recorded location")))?;
        run.steps.push(Step { delay, kind, to });
    }
    Ok(run)
}
