//! Builtin operation behaviors.
//!
//! Behaviors are declarative: a behavior key plus static configuration, never
//! arbitrary code. That keeps feature injection a pure data operation and
//! makes every node response reproducible.

use std::path::Path;

use crate::descriptor::{OperationSignature, ParamSpec, ParamType};
use crate::value::{NamedValue, Value};

use super::NodeError;

/// One row of a catalog fixture (`name|delivery_days|price|in_stock`).
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRow {
    pub name: String,
    pub delivery_days: i64,
    pub price: f64,
    pub in_stock: bool,
}

/// Loads a catalog fixture: one `|`-separated row per line.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<CatalogRow>, NodeError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| NodeError::BadCatalog { path: display.clone(), msg: e.to_string() })?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| NodeError::BadCatalog {
            path: display.clone(),
            msg: format!("line {}: {msg}", idx + 1),
        };
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let delivery_days = fields[1]
            .trim()
            .parse::<i64>()
            .map_err(|e| bad(format!("delivery_days: {e}")))?;
        let price = fields[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("price: {e}")))?;
        let in_stock = match fields[3].trim() {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("in_stock must be true/false, found `{other}`"))),
        };
        rows.push(CatalogRow { name: fields[0].to_string(), delivery_days, price, in_stock });
    }
    Ok(rows)
}

/// Behavior backing one operation.
#[derive(Debug, Clone)]
pub enum Behavior {
    /// Looks up the single text input in a catalog table. Declares outputs
    /// `value: flag, date: integer, price: real`; a miss yields
    /// `false / 0 / 0.0`.
    Table { rows: Vec<CatalogRow> },
    /// Emits its configured values verbatim; inputs are accepted and ignored.
    Const { values: Vec<NamedValue> },
    /// Derives each output from the inputs of the matching type: flags are
    /// AND-ed (empty = true), integers summed, reals summed, dates maxed
    /// (empty = 0), texts joined with `,` in input order.
    Combine,
}

fn table_outputs() -> Vec<ParamSpec> {
    vec![
        ParamSpec::new("value", ParamType::Flag),
        ParamSpec::new("date", ParamType::Integer),
        ParamSpec::new("price", ParamType::Real),
    ]
}

impl Behavior {
    pub fn key(&self) -> &'static str {
        match self {
            Behavior::Table { .. } => "table",
            Behavior::Const { .. } => "const",
            Behavior::Combine => "combine",
        }
    }

    /// Output fields this behavior produces for `sig`. `Combine` adapts to
    /// the signature; the others declare fixed fields.
    fn declared_outputs(&self, sig: &OperationSignature) -> Vec<ParamSpec> {
        match self {
            Behavior::Table { .. } => table_outputs(),
            Behavior::Const { values } => values
                .iter()
                .map(|nv| ParamSpec::new(nv.name.clone(), nv.value.param_type()))
                .collect(),
            Behavior::Combine => sig.outputs.clone(),
        }
    }

    /// Checks that the behavior's declared output fields equal the signature's
    /// outputs exactly, plus behavior-specific input constraints.
    pub fn validate_against(&self, sig: &OperationSignature) -> Result<(), String> {
        if let Behavior::Table { .. } = self {
            let text_inputs: Vec<&ParamSpec> =
                sig.inputs.iter().filter(|p| p.ptype == ParamType::Text).collect();
            if sig.inputs.len() != 1 || text_inputs.len() != 1 {
                return Err(format!(
                    "behavior `{}` requires exactly one text input, signature declares {}",
                    self.key(),
                    sig.inputs.len()
                ));
            }
        }
        let declared = self.declared_outputs(sig);
        if declared != sig.outputs {
            return Err(format!(
                "behavior `{}` declares outputs [{}] but the signature declares [{}]",
                self.key(),
                join_specs(&declared),
                join_specs(&sig.outputs),
            ));
        }
        Ok(())
    }

    /// Computes the outputs. `args` have already been type-checked against
    /// `sig`.
    pub fn run(&self, sig: &OperationSignature, args: &[NamedValue]) -> Vec<NamedValue> {
        match self {
            Behavior::Table { rows } => {
                let key = args
                    .iter()
                    .find_map(|a| match &a.value {
                        Value::Text(t) => Some(t.as_str()),
                        _ => None,
                    })
                    .unwrap_or("");
                let row = rows.iter().find(|r| r.name == key);
                vec![
                    NamedValue::new("value", Value::Flag(row.is_some_and(|r| r.in_stock))),
                    NamedValue::new("date", Value::Integer(row.map_or(0, |r| r.delivery_days))),
                    NamedValue::new("price", Value::Real(row.map_or(0.0, |r| r.price))),
                ]
            }
            Behavior::Const { values } => values.clone(),
            Behavior::Combine => sig
                .outputs
                .iter()
                .map(|out| NamedValue::new(out.name.clone(), combine_fold(out.ptype, args)))
                .collect(),
        }
    }
}

fn combine_fold(ptype: ParamType, args: &[NamedValue]) -> Value {
    match ptype {
        ParamType::Flag => Value::Flag(
            args.iter()
                .filter_map(|a| match a.value {
                    Value::Flag(b) => Some(b),
                    _ => None,
                })
                .all(|b| b),
        ),
        ParamType::Integer => Value::Integer(
            args.iter()
                .filter_map(|a| match a.value {
                    Value::Integer(n) => Some(n),
                    _ => None,
                })
                .fold(0i64, i64::wrapping_add),
        ),
        ParamType::Real => Value::Real(
            args.iter()
                .filter_map(|a| match a.value {
                    Value::Real(x) => Some(x),
                    _ => None,
                })
                .sum(),
        ),
        ParamType::Date => Value::Date(
            args.iter()
                .filter_map(|a| match a.value {
                    Value::Date(d) => Some(d),
                    _ => None,
                })
                .max()
                .unwrap_or(0),
        ),
        ParamType::Text => Value::Text(
            args.iter()
                .filter_map(|a| match &a.value {
                    Value::Text(t) => Some(t.as_str()),
                    _ => None,
                })
                .collect::<Vec<_>>()
                .join(","),
        ),
    }
}

fn join_specs(specs: &[ParamSpec]) -> String {
    specs
        .iter()
        .map(|p| format!("{}: {}", p.name, p.ptype))
        .collect::<Vec<_>>()
        .join(", ")
}
