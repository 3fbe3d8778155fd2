//! File formats: instance and run files (JSON), curves (CSV), plots (SVG).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, StateDistribution, TransitionMatrix};
use crate::environment::{EnvError, ProblemInstance, RewardKernel, SamplingMode};
use crate::harness::{AggregateCurve, HarnessError, Horizon, PolicySpec, RunTrace};
use crate::instances::{self, GeneratorSpec, InstanceError};

pub const INSTANCE_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid instance file: {0}")]
    Schema(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let wrap = |source| IoError::File { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, contents).map_err(wrap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmFile {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub kernels: Vec<RewardKernel>,
}

/// On-disk instance. Floats are written in shortest round-trip form, so
/// `load(save(x))` reproduces every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: String,
    pub m: usize,
    pub states: usize,
    pub gamma: f64,
    pub beta1: Vec<f64>,
    pub arms: Vec<ArmFile>,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProblemInstance) -> Self {
        Self {
            version: INSTANCE_VERSION.to_string(),
            m: inst.m(),
            states: inst.states(),
            gamma: inst.gamma(),
            beta1: inst.beta1().probs().to_vec(),
            arms: (0..inst.m())
                .map(|j| ArmFile { p: inst.transition(j).rows(), kernels: inst.kernels(j).to_vec() })
                .collect(),
        }
    }

    /// Checks the schema and re-validates every chain.
    pub fn to_instance(&self) -> Result<ProblemInstance> {
        if self.version != INSTANCE_VERSION {
            return Err(IoError::Schema(format!("unsupported version '{}'", self.version)));
        }
        if self.arms.len() != self.m {
            return Err(IoError::Schema(format!("m = {} but {} arms given", self.m, self.arms.len())));
        }
        if self.beta1.len() != self.states {
            return Err(IoError::Schema(format!("states = {} but beta1 has {} entries", self.states, self.beta1.len())));
        }
        let mut transitions = Vec::with_capacity(self.m);
        for (j, arm) in self.arms.iter().enumerate() {
            if arm.p.len() != self.states {
                return Err(IoError::Schema(format!("arm {j}: P has {} rows, expected {}", arm.p.len(), self.states)));
            }
            let p = TransitionMatrix::new(arm.p.clone()).map_err(|source| EnvError::Chain { arm: j, source })?;
            transitions.push(p);
            for (s, k) in arm.kernels.iter().enumerate() {
                k.validate().map_err(|e| IoError::Schema(format!("arm {j}, state {s}: {e}")))?;
            }
        }
        let kernels = self.arms.iter().map(|a| a.kernels.clone()).collect();
        Ok(ProblemInstance::new(transitions, kernels, StateDistribution::new(self.beta1.clone())?, self.gamma)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
    }
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    InstanceFile::from_json(&read(path)?, path)?.to_instance()
}

pub fn save_instance(path: &Path, inst: &ProblemInstance) -> Result<()> {
    write_file(path, InstanceFile::from_instance(inst).to_json().as_bytes())
}

/// Canned instances by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Example1,
    Penalty,
}

impl Builtin {
    pub fn build(self, epsilon: f64) -> Result<ProblemInstance> {
        Ok(match self {
            Builtin::Example1 => instances::example1(epsilon)?,
            Builtin::Penalty => instances::penalty_example(epsilon)?,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Example1 => "example1",
            Builtin::Penalty => "penalty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinRef {
    pub builtin: Builtin,
    pub epsilon: f64,
}

/// Where a run file gets its instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceRef {
    Path(PathBuf),
    Builtin(BuiltinRef),
    Generator(GeneratorSpec),
}

impl InstanceRef {
    /// Resolves relative paths against `base`.
    pub fn load(&self, base: &Path) -> Result<(String, ProblemInstance)> {
        match self {
            InstanceRef::Path(p) => {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                let id = full.file_stem().map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned());
                Ok((id, load_instance(&full)?))
            }
            InstanceRef::Builtin(b) => Ok((format!("{}_eps{}", b.builtin.name(), b.epsilon), b.builtin.build(b.epsilon)?)),
            InstanceRef::Generator(g) => Ok((format!("gen_m{}_s{}_seed{}", g.m, g.states, g.seed), instances::generate(g)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub id: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub csv_dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
    /// Keep every `trace_stride`-th decision (and the last) in trace CSVs.
    #[serde(default)]
    pub trace_stride: Option<u64>,
}

/// A simulation described on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub instance: InstanceRef,
    pub policies: Vec<PolicyEntry>,
    pub horizon: Horizon,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read(path)?).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
    }

    pub fn policy_specs(&self) -> Result<Vec<PolicySpec>> {
        self.policies
            .iter()
            .map(|p| PolicySpec::from_id(&p.id, &p.params).map_err(IoError::from))
            .collect()
    }
}

pub const TRACE_HEADER: &str = "policy,instance_id,seed,k_or_t,arm,reward,cum_regret";
pub const AGGREGATE_HEADER: &str = "x,mean,stderr";
pub const BOUND_HEADER: &str = "k,value,kind,arm";

/// Trace rows for every replication, keeping every `stride`-th decision and the last.
pub fn write_traces<W: Write>(w: &mut W, traces: &[RunTrace], stride: u64) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    let stride = stride.max(1);
    for t in traces {
        let mut cum = 0.0;
        let last = t.records.len();
        for (i, r) in t.records.iter().enumerate() {
            cum += r.regret_increment;
            if r.k % stride == 0 || i + 1 == last {
                writeln!(w, "{},{},{},{},{},{},{}", t.policy, t.instance_id, t.seed, r.k, r.arm, r.smoothed_reward, cum)?;
            }
        }
    }
    Ok(())
}

pub fn write_aggregate<W: Write>(w: &mut W, curve: &AggregateCurve) -> std::io::Result<()> {
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for i in 0..curve.len() {
        writeln!(w, "{},{},{}", curve.x[i], curve.mean[i], curve.stderr[i])?;
    }
    Ok(())
}

pub fn write_bound_curves<W: Write>(w: &mut W, curves: &[crate::bounds::BoundCurve]) -> std::io::Result<()> {
    writeln!(w, "{BOUND_HEADER}")?;
    for c in curves {
        c.write_csv_rows(w)?;
    }
    Ok(())
}

/// One line of a plot, with an optional `± err` band.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub err: Option<Vec<f64>>,
}

impl Series {
    pub fn from_curve(label: impl Into<String>, c: &AggregateCurve) -> Self {
        Self { label: label.into(), x: c.x.clone(), y: c.mean.clone(), err: Some(c.stderr.clone()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 170.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG line plot; with `log_x`, nonpositive abscissae are dropped.
pub fn render_svg(spec: &PlotSpec, series: &[Series]) -> String {
    let tx = |x: f64| if spec.log_x { x.log10() } else { x };
    let keep = |x: f64| !spec.log_x || x > 0.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (i, (&x, &y)) in s.x.iter().zip(&s.y).enumerate() {
            if !keep(x) || !y.is_finite() {
                continue;
            }
            let e = s.err.as_ref().map_or(0.0, |e| e[i]);
            x0 = x0.min(tx(x));
            x1 = x1.max(tx(x));
            y0 = y0.min(y - e);
            y1 = y1.max(y + e);
        }
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = W - ML - MR;
    let ph = H - MT - MB;
    let px = |x: f64| ML + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| MT + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, ML + pw / 2.0, escape(&spec.title));
    let _ = writeln!(out, r##"<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);

    let xticks: Vec<f64> = if spec.log_x {
        (x0.ceil() as i32..=x1.floor() as i32).map(|e| 10f64.powi(e)).collect()
    } else {
        nice_ticks(x0, x1)
    };
    for t in xticks {
        let x = px(t);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#ccc"/>"##, MT, MT + ph);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, MT + ph + 16.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(out, r##"<line x1="{ML}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ccc"/>"##, ML + pw);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, ML - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ML + pw / 2.0, H - 10.0, escape(&spec.x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MT + ph / 2.0,
        MT + ph / 2.0,
        escape(&spec.y_label)
    );

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let idx: Vec<usize> = (0..s.x.len()).filter(|&i| keep(s.x[i]) && s.y[i].is_finite()).collect();
        if let Some(err) = &s.err {
            let mut pts = String::new();
            for &i in &idx {
                let _ = write!(pts, "{:.2},{:.2} ", px(s.x[i]), py(s.y[i] + err[i]));
            }
            for &i in idx.iter().rev() {
                let _ = write!(pts, "{:.2},{:.2} ", px(s.x[i]), py(s.y[i] - err[i]));
            }
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, pts.trim_end());
        }
        let mut pts = String::new();
        for &i in &idx {
            let _ = write!(pts, "{:.2},{:.2} ", px(s.x[i]), py(s.y[i]));
        }
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#, pts.trim_end());
        let ly = MT + 14.0 + 18.0 * si as f64;
        let lx = ML + pw + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}
