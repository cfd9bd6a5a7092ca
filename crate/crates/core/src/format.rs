//! The JSON model format.
//!
//! ```json
//! {
//!   "nb_inputs": 1, "nb_outputs": 1, "post_process": "none",
//!   "trees": [ {"feature": 0, "threshold": 0.0,
//!               "left": {"value": [1.0]}, "right": {"value": [2.0]}} ]
//! }
//! ```
//!
//! Numbers are rounded straight from their decimal text to the nearest `f32`
//! (never through `f64`), and written back in the shortest decimal form that
//! round-trips, so `load(save(e)) == e` bit for bit.

use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::error::{DocPath, Error, Result};
use crate::model::{Ensemble, Node, NodeId, PostProcess, Tree};

/// Parses a model document.
pub fn load_model(bytes: &[u8]) -> Result<Ensemble> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::Json(e.to_string()))?;
    let root = DocPath::default();
    let obj = doc
        .as_object()
        .ok_or_else(|| root.schema("document must be an object"))?;

    let n_inputs = usize_field(obj, &root, "nb_inputs")?;
    let n_outputs = usize_field(obj, &root, "nb_outputs")?;
    if n_inputs == 0 {
        return Err(root.key("nb_inputs").schema("must be positive"));
    }
    if n_outputs == 0 {
        return Err(root.key("nb_outputs").schema("must be positive"));
    }

    let post_path = root.key("post_process");
    let post = match obj.get("post_process") {
        None => PostProcess::Identity,
        Some(Value::String(tag)) => {
            PostProcess::from_tag(tag).ok_or_else(|| Error::UnknownPostProcess {
                path: post_path.to_string(),
                tag: tag.clone(),
            })?
        }
        Some(_) => return Err(post_path.schema("must be a string")),
    };

    let trees_path = root.key("trees");
    let trees_json = obj
        .get("trees")
        .ok_or_else(|| trees_path.schema("missing field"))?
        .as_array()
        .ok_or_else(|| trees_path.schema("must be an array"))?;
    if trees_json.is_empty() {
        return Err(trees_path.schema("ensemble needs at least one tree"));
    }

    let ctx = Ctx {
        n_inputs,
        n_outputs,
    };
    let trees = trees_json
        .iter()
        .enumerate()
        .map(|(b, t)| {
            let mut nodes = Vec::new();
            ctx.read_node(t, &trees_path.index(b), &mut nodes)?;
            Tree::from_nodes(nodes)
        })
        .collect::<Result<Vec<_>>>()?;

    Ensemble::new(trees, n_inputs, n_outputs, post)
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<Ensemble> {
    load_model(&std::fs::read(path)?)
}

struct Ctx {
    n_inputs: usize,
    n_outputs: usize,
}

impl Ctx {
    /// Appends the subtree rooted at `v` to `nodes` in pre-order and returns
    /// the index of its root.
    fn read_node(&self, v: &Value, path: &DocPath, nodes: &mut Vec<Node>) -> Result<NodeId> {
        let obj = v
            .as_object()
            .ok_or_else(|| path.schema("node must be an object"))?;
        let id = nodes.len() as NodeId;
        if let Some(value) = obj.get("value") {
            if obj.contains_key("feature") || obj.contains_key("left") {
                return Err(path.schema("node is both a leaf and a split"));
            }
            let vpath = path.key("value");
            let arr = value
                .as_array()
                .ok_or_else(|| vpath.schema("must be an array"))?;
            if arr.len() != self.n_outputs {
                return Err(Error::Arity {
                    path: vpath.to_string(),
                    expected: self.n_outputs,
                    found: arr.len(),
                });
            }
            let value = arr
                .iter()
                .enumerate()
                .map(|(i, x)| f32_value(x, &vpath.index(i)))
                .collect::<Result<Vec<_>>>()?;
            nodes.push(Node::Leaf {
                value: value.into_boxed_slice(),
            });
            return Ok(id);
        }

        let feature = usize_field(obj, path, "feature")?;
        if feature >= self.n_inputs {
            return Err(Error::Arity {
                path: path.key("feature").to_string(),
                expected: self.n_inputs,
                found: feature + 1,
            });
        }
        let tpath = path.key("threshold");
        let threshold = f32_value(
            obj.get("threshold")
                .ok_or_else(|| tpath.schema("missing field"))?,
            &tpath,
        )?;
        let child = |key: &'static str| {
            obj.get(key)
                .ok_or_else(|| path.key(key).schema("missing field"))
        };
        let (left_json, right_json) = (child("left")?, child("right")?);

        nodes.push(Node::Split {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = self.read_node(left_json, &path.key("left"), nodes)?;
        let right = self.read_node(right_json, &path.key("right"), nodes)?;
        if let Node::Split {
            left: l, right: r, ..
        } = &mut nodes[id as usize]
        {
            *l = left;
            *r = right;
        }
        Ok(id)
    }
}

fn usize_field(obj: &Map<String, Value>, path: &DocPath, key: &'static str) -> Result<usize> {
    let p = path.key(key);
    let v = obj.get(key).ok_or_else(|| p.schema("missing field"))?;
    v.as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| p.schema("must be a non-negative integer"))
}

fn f32_value(v: &Value, path: &DocPath) -> Result<f32> {
    let n = v.as_number().ok_or_else(|| path.schema("must be a number"))?;
    // With arbitrary_precision the number keeps its source text.
    let x: f32 = n
        .as_str()
        .parse()
        .map_err(|_| path.schema(format!("{n} is not a number")))?;
    if !x.is_finite() {
        return Err(path.schema(format!("{n} does not fit a finite 32-bit float")));
    }
    Ok(x)
}

/// Serializes an ensemble into the JSON model format.
pub fn save_model(e: &Ensemble) -> String {
    let trees = e
        .trees()
        .iter()
        .map(|t| node_json(t, t.root()))
        .collect::<Vec<_>>();
    let mut obj = Map::new();
    obj.insert("nb_inputs".into(), Value::from(e.n_inputs()));
    obj.insert("nb_outputs".into(), Value::from(e.n_outputs()));
    obj.insert(
        "post_process".into(),
        Value::from(e.post_process().tag()),
    );
    obj.insert("trees".into(), Value::Array(trees));
    Value::Object(obj).to_string()
}

fn node_json(t: &Tree, id: NodeId) -> Value {
    let mut obj = Map::new();
    match t.node(id) {
        Node::Leaf { value } => {
            obj.insert(
                "value".into(),
                Value::Array(value.iter().map(|&v| f32_json(v)).collect()),
            );
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            obj.insert("feature".into(), Value::from(*feature));
            obj.insert("threshold".into(), f32_json(*threshold));
            obj.insert("left".into(), node_json(t, *left));
            obj.insert("right".into(), node_json(t, *right));
        }
    }
    Value::Object(obj)
}

fn f32_json(x: f32) -> Value {
    // Shortest round-trip decimal for f32, e.g. 0.1f32 -> "0.1".
    let text = format!("{x:?}");
    Value::Number(text.parse::<Number>().expect("finite f32 formats as a JSON number"))
}
