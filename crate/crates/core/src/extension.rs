//! Candidate extensions `F = (F_p)_p : X -> Y` of the net map `f`.
//!
//! Built-in candidates act block-diagonally. External candidates run as a
//! child process speaking a JSON-lines protocol on stdin/stdout:
//!
//! ```text
//! request:  {"component_dim": n, "p_list": [p0, ..., P], "point": [flat X coordinates]}
//! response: {"result": [flat Y coordinates]}
//! ```
//!
//! `point` lists the components in the order of `p_list`, `n` coordinates
//! each. Per-component evaluation sends a single-entry `p_list`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::maps::{ProductMap, VectorMap};
use crate::mazur::mazur_in_place;
use crate::modulus::{GammaEstimate, ModulusTable};
use crate::net::NetHandle;
use crate::space::{ProductPoint, RealVector};

/// Default per-call plugin timeout.
pub const DEFAULT_PLUGIN_TIMEOUT: Duration = Duration::from_secs(10);

/// Level of `omega_hat` at the smallest scale above which a claim of
/// uniform continuity is flagged: `1/(2e)`.
pub fn continuity_flag_level() -> f64 {
    0.5 / std::f64::consts::E
}

/// Properties a candidate declares about itself, cross-checked against
/// measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub extends_f: bool,
    pub uniformly_continuous: bool,
}

type ComponentFn = dyn Fn(u32, &[f64]) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Natural,
    NearestPoint(Arc<NetHandle>),
    Zero,
    Plugin(Arc<Plugin>),
    Custom(Arc<ComponentFn>),
}

/// A candidate `F`, evaluated per component or on whole product points.
#[derive(Clone)]
pub struct ExtensionCandidate {
    name: String,
    claims: Claims,
    kind: Kind,
}

impl fmt::Debug for ExtensionCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtensionCandidate")
            .field("name", &self.name)
            .field("claims", &self.claims)
            .finish_non_exhaustive()
    }
}

/// `F_p = M_p`.
pub fn natural_extension() -> ExtensionCandidate {
    ExtensionCandidate {
        name: "natural".into(),
        claims: Claims {
            extends_f: true,
            uniformly_continuous: false,
        },
        kind: Kind::Natural,
    }
}

/// `F_p(x) = M_p(nearest net point to x)`; piecewise constant.
pub fn nearest_point_extension(net: Arc<NetHandle>) -> ExtensionCandidate {
    ExtensionCandidate {
        name: "nearest".into(),
        claims: Claims {
            extends_f: true,
            uniformly_continuous: false,
        },
        kind: Kind::NearestPoint(net),
    }
}

/// `F = 0`.
pub fn zero_extension() -> ExtensionCandidate {
    ExtensionCandidate {
        name: "zero".into(),
        claims: Claims {
            extends_f: false,
            uniformly_continuous: true,
        },
        kind: Kind::Zero,
    }
}

/// Wrap a closure `(p, x_p) -> F_p(x_p)` as a candidate.
pub fn custom_extension<F>(name: impl Into<String>, claims: Claims, f: F) -> ExtensionCandidate
where
    F: Fn(u32, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
{
    ExtensionCandidate {
        name: name.into(),
        claims,
        kind: Kind::Custom(Arc::new(f)),
    }
}

/// Start an external program and wrap it as a candidate.
pub fn load_plugin_extension(spec: &PluginSpec) -> Result<ExtensionCandidate> {
    let plugin = Plugin::spawn(spec)?;
    Ok(ExtensionCandidate {
        name: plugin.name.clone(),
        claims: spec.claims,
        kind: Kind::Plugin(Arc::new(plugin)),
    })
}

impl ExtensionCandidate {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn claims(&self) -> Claims {
        self.claims
    }

    pub fn with_claims(mut self, claims: Claims) -> Self {
        self.claims = claims;
        self
    }

    pub fn is_plugin(&self) -> bool {
        matches!(self.kind, Kind::Plugin(_))
    }

    /// `F_p(x)` for a single component.
    pub fn apply_component(&self, p: u32, x: &[f64]) -> Result<Vec<f64>> {
        if p < 2 {
            return Err(Error::invalid(format!(
                "component exponent must be >= 2, got {p}"
            )));
        }
        match &self.kind {
            Kind::Natural => {
                let mut out = x.to_vec();
                mazur_in_place(&mut out, p);
                Ok(out)
            }
            Kind::NearestPoint(net) => {
                if x.len() != net.dim() {
                    return Err(Error::invalid(format!(
                        "nearest-point extension over a net of dimension {} applied in dimension {}",
                        net.dim(),
                        x.len()
                    )));
                }
                let (id, _) = net.nearest_raw(x);
                let mut out = net.point(id)?.into_inner();
                mazur_in_place(&mut out, p);
                Ok(out)
            }
            Kind::Zero => Ok(vec![0.0; x.len()]),
            Kind::Plugin(plugin) => plugin.call(&[p], x.len(), x),
            Kind::Custom(f) => f(p, x),
        }
    }

    /// The component `F_p` as a [`VectorMap`].
    pub fn component(&self, p: u32) -> ComponentMap<'_> {
        ComponentMap { candidate: self, p }
    }
}

impl ProductMap for ExtensionCandidate {
    fn apply_product(&self, x: &ProductPoint) -> Result<ProductPoint> {
        let shape = x.shape();
        if let Kind::Plugin(plugin) = &self.kind {
            let p_list: Vec<u32> = shape.exponents().collect();
            let flat = plugin.call(&p_list, shape.component_dim, &x.to_flat())?;
            return ProductPoint::from_flat(shape, &flat).map_err(|e| plugin.error(e.to_string()));
        }
        let comps = x
            .iter()
            .map(|(p, v)| RealVector::new(self.apply_component(p, v.as_slice())?))
            .collect::<Result<Vec<_>>>()?;
        ProductPoint::new(shape, comps)
    }
}

/// Borrowed view of one component `F_p`.
#[derive(Clone, Copy)]
pub struct ComponentMap<'a> {
    candidate: &'a ExtensionCandidate,
    p: u32,
}

impl VectorMap for ComponentMap<'_> {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.candidate.apply_component(self.p, x)
    }
}

/// A claim contradicted by a measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimFlag {
    pub claim: String,
    pub message: String,
    pub measured: f64,
    pub threshold: f64,
}

/// Compare declared claims with measurements: `extends_f` needs `gamma = 0`,
/// `uniformly_continuous` needs `omega_hat` at the smallest scale to stay
/// below `1/(2e)`.
pub fn cross_check_claims(
    candidate: &ExtensionCandidate,
    omega: Option<&ModulusTable>,
    gamma: Option<&GammaEstimate>,
) -> Vec<ClaimFlag> {
    let mut flags = Vec::new();
    let claims = candidate.claims();
    if let (true, Some(g)) = (claims.extends_f, gamma) {
        if g.value != 0.0 {
            flags.push(ClaimFlag {
                claim: "extends_f".into(),
                message: format!(
                    "`{}` claims to extend f but gamma = {}",
                    candidate.name(),
                    g.value
                ),
                measured: g.value,
                threshold: 0.0,
            });
        }
    }
    if let (true, Some(t)) = (claims.uniformly_continuous, omega) {
        let level = continuity_flag_level();
        let smallest = t.estimates[0];
        if smallest > level {
            flags.push(ClaimFlag {
                claim: "uniformly_continuous".into(),
                message: format!(
                    "`{}` claims uniform continuity but omega_hat({}) = {smallest} exceeds {level}",
                    candidate.name(),
                    t.scales[0]
                ),
                measured: smallest,
                threshold: level,
            });
        }
    }
    flags
}

/// How to start a plugin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginSpec {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub claims: Claims,
    #[serde(with = "duration_secs", default = "default_timeout")]
    pub timeout: Duration,
}

fn default_timeout() -> Duration {
    DEFAULT_PLUGIN_TIMEOUT
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl PluginSpec {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        PluginSpec {
            program: program.into(),
            args: Vec::new(),
            claims: Claims::default(),
            timeout: DEFAULT_PLUGIN_TIMEOUT,
        }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }

    pub fn claims(mut self, claims: Claims) -> Self {
        self.claims = claims;
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

struct PluginIo {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    broken: Option<String>,
}

/// A running plugin process. Calls are serialized.
struct Plugin {
    name: String,
    timeout: Duration,
    io: Mutex<PluginIo>,
}

/// Longest request or response echoed back in an error message.
const EXCHANGE_ECHO: usize = 400;

fn clip(s: &str) -> String {
    if s.len() <= EXCHANGE_ECHO {
        return s.to_string();
    }
    let mut end = EXCHANGE_ECHO;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &s[..end])
}

impl Plugin {
    fn spawn(spec: &PluginSpec) -> Result<Self> {
        let name = spec.program.display().to_string();
        let mut child = Command::new(&spec.program)
            .args(&spec.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Plugin {
                plugin: name.clone(),
                message: format!("failed to start: {e}"),
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Plugin {
            name,
            timeout: spec.timeout,
            io: Mutex::new(PluginIo {
                child,
                stdin,
                lines: rx,
                broken: None,
            }),
        })
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Plugin {
            plugin: self.name.clone(),
            message: message.into(),
        }
    }

    fn call(&self, p_list: &[u32], component_dim: usize, point: &[f64]) -> Result<Vec<f64>> {
        let request = json!({
            "component_dim": component_dim,
            "p_list": p_list,
            "point": point,
        })
        .to_string();
        let mut io = self.io.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(reason) = &io.broken {
            return Err(self.error(format!("unusable after an earlier failure: {reason}")));
        }
        let outcome = self.exchange(&mut io, &request, point.len());
        if let Err(Error::Plugin { message, .. }) = &outcome {
            if io.broken.is_none() && message.contains("timed out") {
                io.broken = Some(message.clone());
                let _ = io.child.kill();
            }
        }
        outcome
    }

    fn exchange(&self, io: &mut PluginIo, request: &str, expected: usize) -> Result<Vec<f64>> {
        let stdin = io
            .stdin
            .as_mut()
            .ok_or_else(|| self.error("stdin is closed"))?;
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| self.error(format!("write failed ({e}); request: {}", clip(request))))?;
        let line = match io.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                return Err(self.error(format!("read failed ({e}); request: {}", clip(request))))
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(self.error(format!(
                    "timed out after {:?}; request: {}",
                    self.timeout,
                    clip(request)
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.error(format!(
                    "exited without answering; request: {}",
                    clip(request)
                )))
            }
        };
        let violation = |why: &str| {
            self.error(format!(
                "{why}; request: {}; response: {}",
                clip(request),
                clip(&line)
            ))
        };
        let value: Value =
            serde_json::from_str(&line).map_err(|e| violation(&format!("malformed JSON ({e})")))?;
        let result = value
            .get("result")
            .or_else(|| value.get("point"))
            .and_then(Value::as_array)
            .ok_or_else(|| violation("response lacks a \"result\" array"))?;
        let out = result
            .iter()
            .map(Value::as_f64)
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| violation("non-numeric entry in \"result\""))?;
        if out.len() != expected {
            return Err(violation(&format!(
                "expected {expected} coordinates, got {}",
                out.len()
            )));
        }
        if out.iter().any(|c| !c.is_finite()) {
            return Err(violation("non-finite coordinate"));
        }
        Ok(out)
    }
}

impl Drop for Plugin {
    fn drop(&mut self) {
        let io = self.io.get_mut().unwrap_or_else(|e| e.into_inner());
        io.stdin.take();
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}

/// Built-in candidate by name: `natural`, `nearest` (needs a net) or `zero`.
pub fn builtin_extension(name: &str, net: Option<Arc<NetHandle>>) -> Result<ExtensionCandidate> {
    match name {
        "natural" => Ok(natural_extension()),
        "zero" => Ok(zero_extension()),
        "nearest" => net
            .map(nearest_point_extension)
            .ok_or_else(|| Error::invalid("the nearest-point extension needs a component net")),
        other => Err(Error::invalid(format!(
            "unknown extension `{other}` (expected natural, nearest, zero or a plugin path)"
        ))),
    }
}

/// Names of the built-in candidates.
pub const BUILTIN_EXTENSIONS: [&str; 3] = ["natural", "nearest", "zero"];

/// Summary of a candidate for reports.
pub fn describe(candidate: &ExtensionCandidate) -> BTreeMap<&'static str, Value> {
    BTreeMap::from([
        ("name", json!(candidate.name())),
        ("extends_f", json!(candidate.claims().extends_f)),
        (
            "uniformly_continuous",
            json!(candidate.claims().uniformly_continuous),
        ),
        ("plugin", json!(candidate.is_plugin())),
    ])
}
