//! Scenario files: a line-oriented text format with bracketed sections.
//!
//! ```text
//! [space] base_dim = 2
//! [bundle E] rank = 2
//! [connection K on E]
//! K[1,2,1] = x2
//! [classical Gamma]
//! [field Phi type (1,0,0,0) on E]
//! Phi[2] = 1
//! [checks]
//! bianchi_linear K Gamma
//! ricci Phi K Gamma tol = 1e-10
//! [options] tol = 1e-8  points = 5  seed = 42
//! ```
//!
//! Indices are 1-based in the file and 0-based in memory. Sections are read in
//! one pass, so `[space]` comes first and names are declared before use.
//! Expressions keep their source text, which makes save/load an exact round
//! trip.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::connection::{ClassicalConnection, ConnectionError, FieldType, LinearConnection};
use crate::curvature::CurvaturePerturbation;
use crate::expr::ScalarExpr;
use crate::parse::{parse, ParseError};
use crate::tensor::TensorField;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_POINTS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {kind}")]
    At {
        line: usize,
        kind: ScenarioErrorKind,
    },
    #[error("{0}")]
    Invalid(ScenarioErrorKind),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    pub fn kind(&self) -> Option<&ScenarioErrorKind> {
        match self {
            ScenarioError::At { kind, .. } | ScenarioError::Invalid(kind) => Some(kind),
            ScenarioError::Io { .. } => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::At { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("{0} must be declared before this line")]
    Missing(&'static str),
    #[error("index {index:?} is out of range for {name} (extents {extents:?})")]
    IndexOutOfRange {
        name: String,
        index: Vec<usize>,
        extents: Vec<usize>,
    },
    #[error("{name} expects {expected} indices, got {got}")]
    IndexCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("entry {0} is given twice")]
    DuplicateEntry(String),
    #[error("name {0} is already declared")]
    DuplicateName(String),
    #[error("undefined {what} {name}")]
    Undefined { what: &'static str, name: String },
    #[error("unknown check {0}")]
    UnknownCheck(String),
    #[error("check {check} expects {expected} arguments, got {got}")]
    CheckArity {
        check: String,
        expected: usize,
        got: usize,
    },
    #[error("bad value for option {key}: {value}")]
    BadOption { key: String, value: String },
    #[error("unknown option {0}")]
    UnknownOption(String),
    #[error("expression error at column {}: {}", .0.offset + 1, .0.kind)]
    Expression(ParseError),
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error(transparent)]
    Connection(ConnectionError),
}

fn at(line: usize, kind: ScenarioErrorKind) -> ScenarioError {
    ScenarioError::At { line, kind }
}

fn syntax(line: usize, msg: impl Into<String>) -> ScenarioError {
    at(line, ScenarioErrorKind::Syntax(msg.into()))
}

/// One explicitly given coefficient; omitted ones are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// 0-based.
    pub index: Vec<usize>,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleDef {
    pub name: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionDef {
    pub name: String,
    pub bundle: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDef {
    pub name: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDef {
    pub name: String,
    pub field_type: FieldType,
    /// Needed only when the type has fiber slots.
    pub bundle: Option<String>,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    Curvature,
    DualCurvature,
    TensorCurvature,
    BilinearDecomposition,
    BianchiLinear,
    BianchiClassical,
    Ricci,
    RicciOnCurvature,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::Curvature,
        CheckKind::DualCurvature,
        CheckKind::TensorCurvature,
        CheckKind::BilinearDecomposition,
        CheckKind::BianchiLinear,
        CheckKind::BianchiClassical,
        CheckKind::Ricci,
        CheckKind::RicciOnCurvature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Curvature => "curvature",
            CheckKind::DualCurvature => "dual_curvature",
            CheckKind::TensorCurvature => "tensor_curvature",
            CheckKind::BilinearDecomposition => "bilinear_decomposition",
            CheckKind::BianchiLinear => "bianchi_linear",
            CheckKind::BianchiClassical => "bianchi_classical",
            CheckKind::Ricci => "ricci",
            CheckKind::RicciOnCurvature => "ricci_on_curvature",
        }
    }

    /// Kinds of the named arguments, in order.
    pub fn arguments(self) -> &'static [ArgKind] {
        use ArgKind::*;
        match self {
            CheckKind::Curvature | CheckKind::DualCurvature => &[Connection],
            CheckKind::TensorCurvature | CheckKind::BilinearDecomposition => {
                &[Connection, Connection]
            }
            CheckKind::BianchiLinear | CheckKind::RicciOnCurvature => &[Connection, Classical],
            CheckKind::BianchiClassical => &[Classical],
            CheckKind::Ricci => &[Field, Connection, Classical],
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = ScenarioErrorKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ScenarioErrorKind::UnknownCheck(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Connection,
    Classical,
    Field,
}

impl ArgKind {
    fn describe(self) -> &'static str {
        match self {
            ArgKind::Connection => "connection",
            ArgKind::Classical => "classical connection",
            ArgKind::Field => "field",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSpec {
    pub kind: CheckKind,
    pub args: Vec<String>,
    pub tol: Option<f64>,
    pub points: Option<usize>,
}

impl CheckSpec {
    pub fn new(kind: CheckKind, args: &[&str]) -> Self {
        CheckSpec {
            kind,
            args: args.iter().map(|s| s.to_string()).collect(),
            tol: None,
            points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub tol: f64,
    /// Random points per check, in addition to the origin.
    pub points: usize,
    pub seed: u64,
    /// Negative control: added to one entry of every `R[K]` the checks use.
    pub perturb: Option<CurvaturePerturbation>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: DEFAULT_TOL,
            points: DEFAULT_POINTS,
            seed: DEFAULT_SEED,
            perturb: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub base_dim: usize,
    pub bundles: Vec<BundleDef>,
    pub connections: Vec<ConnectionDef>,
    pub classicals: Vec<ClassicalDef>,
    pub fields: Vec<FieldDef>,
    pub checks: Vec<CheckSpec>,
    pub options: Options,
}

/// Built objects of a scenario, keyed by name.
#[derive(Debug, Clone)]
pub struct Model {
    pub base_dim: usize,
    pub connections: BTreeMap<String, LinearConnection>,
    pub classicals: BTreeMap<String, ClassicalConnection>,
    pub fields: BTreeMap<String, (FieldType, TensorField)>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_text(&text)
}

impl Scenario {
    pub fn new(base_dim: usize) -> Self {
        Scenario {
            base_dim,
            bundles: Vec::new(),
            connections: Vec::new(),
            classicals: Vec::new(),
            fields: Vec::new(),
            checks: Vec::new(),
            options: Options::default(),
        }
    }

    pub fn from_text(text: &str) -> Result<Scenario, ScenarioError> {
        Loader::default().run(text)
    }

    pub fn bundle_rank(&self, name: &str) -> Option<usize> {
        self.bundles.iter().find(|b| b.name == name).map(|b| b.rank)
    }

    fn connection_rank(&self, name: &str) -> Option<usize> {
        let c = self.connections.iter().find(|c| c.name == name)?;
        self.bundle_rank(&c.bundle)
    }

    fn field_rank(&self, f: &FieldDef) -> usize {
        f.bundle
            .as_deref()
            .and_then(|b| self.bundle_rank(b))
            .unwrap_or(0)
    }

    /// Parses every expression and builds the connections and fields.
    pub fn model(&self) -> Result<Model, ScenarioError> {
        let m = self.base_dim;
        let invalid = ScenarioError::Invalid;
        let mut model = Model {
            base_dim: m,
            connections: BTreeMap::new(),
            classicals: BTreeMap::new(),
            fields: BTreeMap::new(),
        };
        for c in &self.connections {
            let n = self.bundle_rank(&c.bundle).ok_or_else(|| {
                invalid(ScenarioErrorKind::Undefined {
                    what: "bundle",
                    name: c.bundle.clone(),
                })
            })?;
            let k = build_connection(m, n, &c.entries).map_err(invalid)?;
            model.connections.insert(c.name.clone(), k);
        }
        for g in &self.classicals {
            let g2 = build_classical(m, &g.entries).map_err(invalid)?;
            model.classicals.insert(g.name.clone(), g2);
        }
        for f in &self.fields {
            let phi =
                build_field(m, self.field_rank(f), f.field_type, &f.entries).map_err(invalid)?;
            model.fields.insert(f.name.clone(), (f.field_type, phi));
        }
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[space] base_dim = {}", self.base_dim);
        for b in &self.bundles {
            let _ = writeln!(out, "[bundle {}] rank = {}", b.name, b.rank);
        }
        for c in &self.connections {
            let _ = writeln!(out, "[connection {} on {}]", c.name, c.bundle);
            write_entries(&mut out, &c.name, &c.entries);
        }
        for g in &self.classicals {
            let _ = writeln!(out, "[classical {}]", g.name);
            write_entries(&mut out, &g.name, &g.entries);
        }
        for f in &self.fields {
            let _ = write!(out, "[field {} type {}", f.name, f.field_type);
            if let Some(b) = &f.bundle {
                let _ = write!(out, " on {b}");
            }
            out.push_str("]\n");
            write_entries(&mut out, &f.name, &f.entries);
        }
        out.push_str("[checks]\n");
        for c in &self.checks {
            out.push_str(c.kind.name());
            for a in &c.args {
                out.push(' ');
                out.push_str(a);
            }
            if let Some(t) = c.tol {
                let _ = write!(out, " tol = {t:e}");
            }
            if let Some(p) = c.points {
                let _ = write!(out, " points = {p}");
            }
            out.push('\n');
        }
        let o = &self.options;
        let _ = write!(
            out,
            "[options] tol = {:e}  points = {}  seed = {}",
            o.tol, o.points, o.seed
        );
        if let Some(p) = &o.perturb {
            let [i, j, l, mu] = p.index.map(|x| x + 1);
            let _ = write!(out, "  perturb = {i},{j},{l},{mu}:{:e}", p.delta);
        }
        out.push('\n');
        out
    }
}

fn write_entries(out: &mut String, name: &str, entries: &[Entry]) {
    for e in entries {
        if e.index.is_empty() {
            let _ = writeln!(out, "{name} = {}", e.expr);
        } else {
            let idx: Vec<String> = e.index.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(out, "{name}[{}] = {}", idx.join(","), e.expr);
        }
    }
}

fn parse_expr(text: &str, m: usize) -> Result<ScalarExpr, ScenarioErrorKind> {
    parse(text, m).map_err(ScenarioErrorKind::Expression)
}

fn build_connection(
    m: usize,
    n: usize,
    entries: &[Entry],
) -> Result<LinearConnection, ScenarioErrorKind> {
    let items = entries
        .iter()
        .map(|e| {
            Ok((
                (e.index[0], e.index[1], e.index[2]),
                parse_expr(&e.expr, m)?,
            ))
        })
        .collect::<Result<Vec<_>, ScenarioErrorKind>>()?;
    LinearConnection::from_entries(m, n, items).map_err(ScenarioErrorKind::Connection)
}

fn build_classical(m: usize, entries: &[Entry]) -> Result<ClassicalConnection, ScenarioErrorKind> {
    let items = entries
        .iter()
        .map(|e| {
            Ok((
                (e.index[0], e.index[1], e.index[2]),
                parse_expr(&e.expr, m)?,
            ))
        })
        .collect::<Result<Vec<_>, ScenarioErrorKind>>()?;
    ClassicalConnection::from_entries(m, items).map_err(ScenarioErrorKind::Connection)
}

fn build_field(
    m: usize,
    n: usize,
    t: FieldType,
    entries: &[Entry],
) -> Result<TensorField, ScenarioErrorKind> {
    let mut phi = TensorField::zeros(t.shape(m, n));
    for e in entries {
        phi.set(&e.index, parse_expr(&e.expr, m)?);
    }
    Ok(phi)
}

/// Splits `key = value key2=value2 …` into pairs.
fn key_values(text: &str) -> Option<Vec<(String, String)>> {
    let joined = text.split('=').map(str::trim).collect::<Vec<_>>().join("=");
    joined
        .split_whitespace()
        .map(|tok| {
            let (k, v) = tok.split_once('=')?;
            (!k.is_empty() && !v.is_empty()).then(|| (k.to_string(), v.to_string()))
        })
        .collect()
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ScenarioError> {
    value.parse().map_err(|_| {
        at(
            line,
            ScenarioErrorKind::BadOption {
                key: key.to_string(),
                value: value.to_string(),
            },
        )
    })
}

/// `i,j,l,m:delta`, 1-based.
fn parse_perturbation(s: &str) -> Option<CurvaturePerturbation> {
    let (idx, delta) = s.split_once(':')?;
    let parts: Vec<usize> = idx
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    let index: [usize; 4] = parts.try_into().ok()?;
    if index.contains(&0) {
        return None;
    }
    Some(CurvaturePerturbation {
        index: index.map(|i| i - 1),
        delta: delta.trim().parse().ok()?,
    })
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_field_type(s: &str) -> Option<FieldType> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    let v: Vec<usize> = inner
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    match v.as_slice() {
        &[p, q, r, s] => Some(FieldType::new(p, q, r, s)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Space,
    Bundle(usize),
    Connection(usize),
    Classical(usize),
    Field(usize),
    Checks,
    Options,
}

#[derive(Default)]
struct Loader {
    base_dim: Option<usize>,
    scenario: Option<Scenario>,
    /// Header line of the open classical section, for its symmetry check.
    classical_line: usize,
}

impl Loader {
    fn run(mut self, text: &str) -> Result<Scenario, ScenarioError> {
        let mut section = Section::None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let body = if let Some(rest) = content.strip_prefix('[') {
                let (header, body) = rest
                    .split_once(']')
                    .ok_or_else(|| syntax(line, "unterminated section header"))?;
                self.close(section)?;
                section = self.open(line, header.trim())?;
                body.trim()
            } else {
                content
            };
            if !body.is_empty() {
                self.body_line(line, section, body)?;
            }
        }
        self.close(section)?;
        self.scenario
            .ok_or(ScenarioError::Invalid(ScenarioErrorKind::Missing(
                "[space] base_dim",
            )))
    }

    fn sc(&mut self, line: usize) -> Result<&mut Scenario, ScenarioError> {
        self.scenario
            .as_mut()
            .ok_or_else(|| at(line, ScenarioErrorKind::Missing("[space] base_dim")))
    }

    fn declare(&mut self, line: usize, name: &str) -> Result<(), ScenarioError> {
        if !is_name(name) {
            return Err(syntax(line, format!("invalid name {name:?}")));
        }
        let sc = self.sc(line)?;
        let taken = sc.bundles.iter().any(|b| b.name == name)
            || sc.connections.iter().any(|c| c.name == name)
            || sc.classicals.iter().any(|c| c.name == name)
            || sc.fields.iter().any(|f| f.name == name);
        if taken {
            return Err(at(line, ScenarioErrorKind::DuplicateName(name.to_string())));
        }
        Ok(())
    }

    fn open(&mut self, line: usize, header: &str) -> Result<Section, ScenarioError> {
        let words: Vec<&str> = header.split_whitespace().collect();
        let section = match words.as_slice() {
            ["space"] => Section::Space,
            ["bundle", name] => {
                self.declare(line, name)?;
                let sc = self.sc(line)?;
                sc.bundles.push(BundleDef {
                    name: name.to_string(),
                    rank: 0,
                });
                Section::Bundle(sc.bundles.len() - 1)
            }
            ["connection", name, "on", bundle] => {
                self.declare(line, name)?;
                let sc = self.sc(line)?;
                if sc.bundle_rank(bundle).is_none() {
                    return Err(at(
                        line,
                        ScenarioErrorKind::Undefined {
                            what: "bundle",
                            name: bundle.to_string(),
                        },
                    ));
                }
                sc.connections.push(ConnectionDef {
                    name: name.to_string(),
                    bundle: bundle.to_string(),
                    entries: Vec::new(),
                });
                Section::Connection(sc.connections.len() - 1)
            }
            ["classical", name] => {
                self.declare(line, name)?;
                self.classical_line = line;
                let sc = self.sc(line)?;
                sc.classicals.push(ClassicalDef {
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                Section::Classical(sc.classicals.len() - 1)
            }
            ["field", rest @ ..] => self.open_field(line, rest)?,
            ["checks"] => {
                self.sc(line)?;
                Section::Checks
            }
            ["options"] => {
                self.sc(line)?;
                Section::Options
            }
            _ => {
                return Err(at(
                    line,
                    ScenarioErrorKind::UnknownSection(header.to_string()),
                ))
            }
        };
        Ok(section)
    }

    /// `NAME type (p,q,r,s) [on BUNDLE]`; the type tuple may contain spaces.
    fn open_field(&mut self, line: usize, words: &[&str]) -> Result<Section, ScenarioError> {
        let bad = || syntax(line, "expected [field NAME type (p,q,r,s) on BUNDLE]");
        let (name, rest) = words.split_first().ok_or_else(bad)?;
        let rest = rest.join(" ");
        let rest = rest.strip_prefix("type").ok_or_else(bad)?.trim_start();
        let close = rest.find(')').ok_or_else(bad)?;
        let t = parse_field_type(&rest[..=close]).ok_or_else(bad)?;
        let tail: Vec<&str> = rest[close + 1..].split_whitespace().collect();
        let bundle = match tail.as_slice() {
            [] => None,
            ["on", b] => Some(b.to_string()),
            _ => return Err(bad()),
        };
        self.declare(line, name)?;
        let sc = self.sc(line)?;
        match &bundle {
            Some(b) if sc.bundle_rank(b).is_none() => {
                return Err(at(
                    line,
                    ScenarioErrorKind::Undefined {
                        what: "bundle",
                        name: b.clone(),
                    },
                ));
            }
            None if t.p + t.q > 0 => {
                return Err(at(
                    line,
                    ScenarioErrorKind::Missing("the bundle of a field with fiber slots"),
                ))
            }
            _ => {}
        }
        sc.fields.push(FieldDef {
            name: name.to_string(),
            field_type: t,
            bundle,
            entries: Vec::new(),
        });
        Ok(Section::Field(sc.fields.len() - 1))
    }

    /// Validates a finished section where that needs the whole section.
    fn close(&mut self, section: Section) -> Result<(), ScenarioError> {
        if let Section::Classical(k) = section {
            let line = self.classical_line;
            let sc = self.sc(line)?;
            build_classical(sc.base_dim, &sc.classicals[k].entries).map_err(|e| at(line, e))?;
        }
        Ok(())
    }

    fn body_line(
        &mut self,
        line: usize,
        section: Section,
        body: &str,
    ) -> Result<(), ScenarioError> {
        match section {
            Section::None => Err(syntax(line, "content outside of any section")),
            Section::Space => {
                let kv = key_values(body).ok_or_else(|| syntax(line, "expected base_dim = N"))?;
                for (k, v) in kv {
                    if k != "base_dim" {
                        return Err(at(line, ScenarioErrorKind::UnknownOption(k)));
                    }
                    let m: usize = parse_value(line, &k, &v)?;
                    if m == 0 || self.base_dim.is_some() {
                        return Err(at(line, ScenarioErrorKind::BadOption { key: k, value: v }));
                    }
                    self.base_dim = Some(m);
                    self.scenario = Some(Scenario::new(m));
                }
                Ok(())
            }
            Section::Bundle(b) => {
                let kv = key_values(body).ok_or_else(|| syntax(line, "expected rank = N"))?;
                for (k, v) in kv {
                    if k != "rank" {
                        return Err(at(line, ScenarioErrorKind::UnknownOption(k)));
                    }
                    let n: usize = parse_value(line, &k, &v)?;
                    if n == 0 {
                        return Err(at(line, ScenarioErrorKind::BadOption { key: k, value: v }));
                    }
                    self.sc(line)?.bundles[b].rank = n;
                }
                Ok(())
            }
            Section::Connection(c) => {
                let sc = self.sc(line)?;
                let def = &sc.connections[c];
                let n = sc.bundle_rank(&def.bundle).unwrap_or(0);
                let extents = vec![n, n, sc.base_dim];
                let name = def.name.clone();
                let entry = entry_line(line, &name, &extents, sc.base_dim, body)?;
                push_entry(line, &mut sc.connections[c].entries, entry)
            }
            Section::Classical(c) => {
                let sc = self.sc(line)?;
                let m = sc.base_dim;
                let name = sc.classicals[c].name.clone();
                let entry = entry_line(line, &name, &[m, m, m], m, body)?;
                push_entry(line, &mut sc.classicals[c].entries, entry)
            }
            Section::Field(f) => {
                let sc = self.sc(line)?;
                let def = &sc.fields[f];
                let extents = def
                    .field_type
                    .shape(sc.base_dim, sc.field_rank(def))
                    .extents();
                let name = def.name.clone();
                let entry = entry_line(line, &name, &extents, sc.base_dim, body)?;
                push_entry(line, &mut sc.fields[f].entries, entry)
            }
            Section::Checks => {
                let spec = self.check_line(line, body)?;
                self.sc(line)?.checks.push(spec);
                Ok(())
            }
            Section::Options => {
                let kv =
                    key_values(body).ok_or_else(|| syntax(line, "expected key = value pairs"))?;
                let o = &mut self.sc(line)?.options;
                for (k, v) in kv {
                    match k.as_str() {
                        "tol" => o.tol = parse_value(line, &k, &v)?,
                        "points" => o.points = parse_value(line, &k, &v)?,
                        "seed" => o.seed = parse_value(line, &k, &v)?,
                        "perturb" => {
                            o.perturb = Some(parse_perturbation(&v).ok_or_else(|| {
                                at(
                                    line,
                                    ScenarioErrorKind::BadOption {
                                        key: k.clone(),
                                        value: v.clone(),
                                    },
                                )
                            })?)
                        }
                        _ => return Err(at(line, ScenarioErrorKind::UnknownOption(k))),
                    }
                }
                Ok(())
            }
        }
    }

    /// `kind arg… [tol = T] [points = N]`.
    fn check_line(&mut self, line: usize, body: &str) -> Result<CheckSpec, ScenarioError> {
        let (head, opts) = match body.find('=') {
            Some(eq) => {
                // the option list starts at the word before the first '='
                let before = body[..eq].trim_end();
                let start = before.rfind(char::is_whitespace).map_or(0, |i| i + 1);
                (&body[..start], &body[start..])
            }
            None => (body, ""),
        };
        let words: Vec<&str> = head.split_whitespace().collect();
        let (kind, args) = words
            .split_first()
            .ok_or_else(|| syntax(line, "empty check"))?;
        let kind: CheckKind = kind.parse().map_err(|e| at(line, e))?;
        let expected = kind.arguments();
        if args.len() != expected.len() {
            return Err(at(
                line,
                ScenarioErrorKind::CheckArity {
                    check: kind.name().to_string(),
                    expected: expected.len(),
                    got: args.len(),
                },
            ));
        }
        let sc = self.sc(line)?;
        for (name, want) in args.iter().zip(expected) {
            let found = match want {
                ArgKind::Connection => sc.connections.iter().any(|c| c.name == *name),
                ArgKind::Classical => sc.classicals.iter().any(|c| c.name == *name),
                ArgKind::Field => sc.fields.iter().any(|f| f.name == *name),
            };
            if !found {
                return Err(at(
                    line,
                    ScenarioErrorKind::Undefined {
                        what: want.describe(),
                        name: name.to_string(),
                    },
                ));
            }
        }
        if kind == CheckKind::Ricci {
            let f = sc
                .fields
                .iter()
                .find(|f| f.name == args[0])
                .expect("checked above");
            let t = f.field_type;
            if t.p + t.q > 0 && Some(sc.field_rank(f)) != sc.connection_rank(args[1]) {
                return Err(at(
                    line,
                    ScenarioErrorKind::RankMismatch(format!(
                        "field {} and connection {} live on bundles of different rank",
                        args[0], args[1]
                    )),
                ));
            }
        }
        let mut spec = CheckSpec::new(kind, args);
        if !opts.is_empty() {
            let kv = key_values(opts).ok_or_else(|| {
                syntax(line, "expected key = value pairs after the check arguments")
            })?;
            for (k, v) in kv {
                match k.as_str() {
                    "tol" => spec.tol = Some(parse_value(line, &k, &v)?),
                    "points" => spec.points = Some(parse_value(line, &k, &v)?),
                    _ => return Err(at(line, ScenarioErrorKind::UnknownOption(k))),
                }
            }
        }
        Ok(spec)
    }
}

fn push_entry(line: usize, entries: &mut Vec<Entry>, entry: Entry) -> Result<(), ScenarioError> {
    if entries.iter().any(|e| e.index == entry.index) {
        let idx: Vec<String> = entry.index.iter().map(|i| (i + 1).to_string()).collect();
        return Err(at(
            line,
            ScenarioErrorKind::DuplicateEntry(format!("[{}]", idx.join(","))),
        ));
    }
    entries.push(entry);
    Ok(())
}

/// `NAME[i,j,…] = expr` or `NAME = expr` for a scalar.
fn entry_line(
    line: usize,
    name: &str,
    extents: &[usize],
    m: usize,
    body: &str,
) -> Result<Entry, ScenarioError> {
    let (lhs, rhs) = body
        .split_once('=')
        .ok_or_else(|| syntax(line, format!("expected {name}[...] = expression")))?;
    let lhs = lhs.trim();
    let rest = lhs
        .strip_prefix(name)
        .ok_or_else(|| {
            syntax(
                line,
                format!("entries in this section must belong to {name}"),
            )
        })?
        .trim();
    let one_based: Vec<usize> = if rest.is_empty() {
        Vec::new()
    } else {
        let inner = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| syntax(line, format!("expected {name}[...]")))?;
        inner
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| syntax(line, format!("bad index {:?}", p.trim())))
            })
            .collect::<Result<_, _>>()?
    };
    if one_based.len() != extents.len() {
        return Err(at(
            line,
            ScenarioErrorKind::IndexCount {
                name: name.to_string(),
                expected: extents.len(),
                got: one_based.len(),
            },
        ));
    }
    if one_based
        .iter()
        .zip(extents)
        .any(|(&i, &e)| i == 0 || i > e)
    {
        return Err(at(
            line,
            ScenarioErrorKind::IndexOutOfRange {
                name: name.to_string(),
                index: one_based,
                extents: extents.to_vec(),
            },
        ));
    }
    let expr = rhs.trim().to_string();
    parse_expr(&expr, m).map_err(|e| at(line, e))?;
    Ok(Entry {
        index: one_based.iter().map(|i| i - 1).collect(),
        expr,
    })
}
