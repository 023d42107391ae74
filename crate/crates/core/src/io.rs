//! Diagnostics CSV, frame dumps and binary checkpoints.
//!
//! `records.csv` has the fixed header
//! `step,bending,twisting,penalty,tp,total,twist,uniformity,vy,vb,violation,wall_ms`
//! and writes floats in shortest round-trip form, so reading a file back gives
//! bit-identical values. Frame dumps are tab separated with 17 significant
//! digits. Checkpoints are little-endian binary with a SHA-256 trailer.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Result, RodError};
use crate::flow::DiagnosticsRecord;
use crate::mesh::{DirectorField, HermiteCurve, Mesh1D, MetricWeights};
use crate::rod::{BcKind, BoundaryCondition, EnergyBreakdown, FlowConfig, RodState};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub const RECORD_HEADER: [&str; 12] = [
    "step",
    "bending",
    "twisting",
    "penalty",
    "tp",
    "total",
    "twist",
    "uniformity",
    "vy",
    "vb",
    "violation",
    "wall_ms",
];

fn csv_error(path: &Path, e: csv::Error) -> RodError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => RodError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        RodError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    }
}

/// Shortest round-trip text; exponent form outside `[1e-5, 1e16)`.
fn short_float(v: f64) -> String {
    let a = v.abs();
    if v.is_finite() && a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn record_fields<T: Real>(r: &DiagnosticsRecord<T>) -> [String; 12] {
    let f = |v: T| short_float(v.as_f64());
    [
        r.step.to_string(),
        f(r.energy.bending),
        f(r.energy.twisting),
        f(r.energy.penalty),
        f(r.energy.tangent_point),
        f(r.energy.total),
        f(r.total_twist),
        f(r.uniformity),
        f(r.vy),
        f(r.vb),
        f(r.violation),
        r.wall_ms.to_string(),
    ]
}

/// Incremental writer for `records.csv`.
pub struct RecordWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl RecordWriter {
    /// Creates (truncates) the file and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| RodError::io(&path, e))?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(RECORD_HEADER).map_err(|e| csv_error(&path, e))?;
        Ok(RecordWriter { path, inner })
    }

    /// Appends to an existing file, writing the header only if it is empty.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| RodError::io(&path, e))?;
        let empty = file.metadata().map_err(|e| RodError::io(&path, e))?.len() == 0;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if empty {
            inner.write_record(RECORD_HEADER).map_err(|e| csv_error(&path, e))?;
        }
        Ok(RecordWriter { path, inner })
    }

    pub fn write<T: Real>(&mut self, r: &DiagnosticsRecord<T>) -> Result<()> {
        self.inner
            .write_record(record_fields(r))
            .map_err(|e| csv_error(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| RodError::io(&self.path, e))
    }
}

/// Writes a whole record stream (header only if empty).
pub fn write_records<T: Real>(path: impl AsRef<Path>, records: &[DiagnosticsRecord<T>]) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.flush()
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<DiagnosticsRecord<f64>>> {
    let path = path.as_ref();
    let fmt = |reason: String| RodError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| RodError::io(path, e))?;
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = rd.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(fmt(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        if row.len() != RECORD_HEADER.len() {
            return Err(fmt(format!("row {} has {} columns", line + 2, row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                fmt(format!(
                    "row {}: bad number `{}` in column {}",
                    line + 2,
                    &row[i],
                    RECORD_HEADER[i]
                ))
            })
        };
        let step = row[0]
            .parse::<usize>()
            .map_err(|_| fmt(format!("row {}: bad step `{}`", line + 2, &row[0])))?;
        out.push(DiagnosticsRecord {
            step,
            energy: EnergyBreakdown {
                bending: num(1)?,
                twisting: num(2)?,
                penalty: num(3)?,
                tangent_point: num(4)?,
                total: num(5)?,
            },
            total_twist: num(6)?,
            uniformity: num(7)?,
            vy: num(8)?,
            vb: num(9)?,
            violation: num(10)?,
            wall_ms: num(11)?,
        });
    }
    Ok(out)
}

/// Geometry of one state as stored in a frame dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameDump<T> {
    pub step: usize,
    pub kappa: T,
    pub state: RodState<T>,
}

const FRAME_COLUMNS: &str = "node\ts\tpx\tpy\tpz\tdx\tdy\tdz\tbx\tby\tbz";

/// Writes one row per mesh node: parameter, position, derivative, director.
/// On closed curves the last row repeats the curve data of node 0.
pub fn write_frame<T: Real>(path: impl AsRef<Path>, step: usize, kappa: T, state: &RodState<T>) -> Result<()> {
    let path = path.as_ref();
    let mesh = &state.mesh;
    let mut s = String::with_capacity(mesh.num_director_nodes() * 200);
    s.push_str(&format!(
        "# step={step} length={:.16e} elements={} periodic={} kappa={:.16e}\n",
        mesh.length().as_f64(),
        mesh.num_elements(),
        mesh.periodic(),
        kappa.as_f64()
    ));
    s.push_str("# ");
    s.push_str(FRAME_COLUMNS);
    s.push('\n');
    for (i, &z) in mesh.nodes().iter().enumerate() {
        let c = mesh.curve_node(i);
        s.push_str(&i.to_string());
        let vals = [z]
            .into_iter()
            .chain(state.curve.pos[c].0)
            .chain(state.curve.der[c].0)
            .chain(state.director.dir[i].0);
        for v in vals {
            s.push_str(&format!("\t{:.16e}", v.as_f64()));
        }
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<FrameDump<f64>> {
    let path = path.as_ref();
    let fmt = |reason: String| RodError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| RodError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<Option<String>> { lines.next().transpose().map_err(|e| RodError::io(path, e)) };
    let head = next()?.ok_or_else(|| fmt("empty file".into()))?;
    let head = head
        .strip_prefix("# ")
        .ok_or_else(|| fmt("missing header line".into()))?;
    let mut step = None;
    let mut elements = None;
    let mut periodic = None;
    let mut kappa = None;
    for kv in head.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| fmt(format!("bad header field `{kv}`")))?;
        let bad = || fmt(format!("bad value for `{k}`"));
        match k {
            "step" => step = Some(v.parse::<usize>().map_err(|_| bad())?),
            "elements" => elements = Some(v.parse::<usize>().map_err(|_| bad())?),
            "periodic" => periodic = Some(v.parse::<bool>().map_err(|_| bad())?),
            "kappa" => kappa = Some(v.parse::<f64>().map_err(|_| bad())?),
            "length" => {}
            _ => return Err(fmt(format!("unknown header field `{k}`"))),
        }
    }
    let (step, elements, periodic, kappa) = match (step, elements, periodic, kappa) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(fmt("incomplete header".into())),
    };
    let cols = next()?.ok_or_else(|| fmt("missing column line".into()))?;
    if cols.trim_start_matches("# ") != FRAME_COLUMNS {
        return Err(fmt("unexpected columns".into()));
    }
    let mut nodes = Vec::with_capacity(elements + 1);
    let mut pos = Vec::with_capacity(elements + 1);
    let mut der = Vec::with_capacity(elements + 1);
    let mut dir = Vec::with_capacity(elements + 1);
    while let Some(line) = next()? {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 11 {
            return Err(fmt(format!("row {} has {} columns", nodes.len(), f.len())));
        }
        let v: Vec<f64> = f[1..]
            .iter()
            .map(|x| x.parse::<f64>().map_err(|_| fmt(format!("bad number `{x}`"))))
            .collect::<Result<_>>()?;
        nodes.push(v[0]);
        pos.push(Vec3::new(v[1], v[2], v[3]));
        der.push(Vec3::new(v[4], v[5], v[6]));
        dir.push(Vec3::new(v[7], v[8], v[9]));
    }
    if nodes.len() != elements + 1 {
        return Err(fmt(format!("expected {} rows, found {}", elements + 1, nodes.len())));
    }
    let mesh = Mesh1D::from_nodes(nodes, periodic)?;
    let nc = mesh.num_curve_nodes();
    pos.truncate(nc);
    der.truncate(nc);
    let state = RodState::new(Arc::new(mesh), HermiteCurve::new(pos, der), DirectorField::new(dir));
    Ok(FrameDump { step, kappa, state })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(|e| RodError::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(bytes).map_err(|e| RodError::io(&tmp, e))?;
        w.flush().map_err(|e| RodError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| RodError::io(path, e))
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RODFLOW\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub step: usize,
    /// Free-form label, normally the scenario name.
    pub label: String,
    pub state: RodState<T>,
    pub config: FlowConfig<T>,
    pub bc: BoundaryCondition<T>,
}

struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f<T: Real>(&mut self, v: T) {
        self.0.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fn v3<T: Real>(&mut self, v: &Vec3<T>) {
        for c in v.0 {
            self.f(c);
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Dec<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| RodError::Checkpoint("truncated payload".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, cap: usize) -> Result<usize> {
        let n = self.u64()?;
        if n > cap as u64 {
            return Err(RodError::Checkpoint(format!("implausible length {n}")));
        }
        Ok(n as usize)
    }
    fn f<T: Real>(&mut self) -> Result<T> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        T::from_f64(v).ok_or_else(|| RodError::Checkpoint("value not representable".into()))
    }
    fn v3<T: Real>(&mut self) -> Result<Vec3<T>> {
        Ok(Vec3::new(self.f()?, self.f()?, self.f()?))
    }
}

fn bc_code(kind: BcKind) -> u8 {
    match kind {
        BcKind::Periodic => 0,
        BcKind::ClampedBoth => 1,
        BcKind::ClampedDirectorOnly => 2,
    }
}

pub fn encode_checkpoint<T: Real>(cp: &Checkpoint<T>) -> Vec<u8> {
    let mut e = Enc(Vec::new());
    e.u64(cp.step as u64);
    e.u64(cp.label.len() as u64);
    e.0.extend_from_slice(cp.label.as_bytes());
    let mesh = &cp.state.mesh;
    e.u8(mesh.periodic() as u8);
    e.u64(mesh.nodes().len() as u64);
    for &z in mesh.nodes() {
        e.f(z);
    }
    for (p, d) in cp.state.curve.pos.iter().zip(&cp.state.curve.der) {
        e.v3(p);
        e.v3(d);
    }
    for b in &cp.state.director.dir {
        e.v3(b);
    }
    let c = &cp.config;
    for v in [c.kappa, c.epsilon, c.tau, c.rho, c.q, c.eps_stop] {
        e.f(v);
    }
    e.u64(c.max_steps as u64);
    for &w in c.metric.star.iter().chain(&c.metric.dagger) {
        e.f(w);
    }
    e.u8(bc_code(cp.bc.kind));
    for (p, d) in &cp.bc.curve_ends {
        e.v3(p);
        e.v3(d);
    }
    for b in &cp.bc.director_ends {
        e.v3(b);
    }
    let payload = e.0;
    let mut out = Vec::with_capacity(payload.len() + 52);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(Sha256::digest(&payload).as_slice());
    out
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let bad = |m: &str| RodError::Checkpoint(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(RodError::Checkpoint(format!(
            "unsupported version {version} (this build reads version {CHECKPOINT_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if bytes.len() as u64 != 20 + len + 32 {
        return Err(bad("length mismatch (truncated or trailing data)"));
    }
    let payload = &bytes[20..20 + len as usize];
    if Sha256::digest(payload).as_slice() != &bytes[20 + len as usize..] {
        return Err(bad("checksum mismatch"));
    }
    let mut d = Dec { buf: payload, at: 0 };
    let cap = payload.len();
    let step = d.u64()? as usize;
    let llen = d.len(cap)?;
    let label = String::from_utf8(d.take(llen)?.to_vec()).map_err(|_| bad("label is not UTF-8"))?;
    let periodic = match d.u8()? {
        0 => false,
        1 => true,
        _ => return Err(bad("bad periodic flag")),
    };
    let nn = d.len(cap / 8)?;
    let nodes = (0..nn).map(|_| d.f()).collect::<Result<Vec<T>>>()?;
    let mesh = Mesh1D::from_nodes(nodes, periodic)?;
    let nc = mesh.num_curve_nodes();
    let mut pos = Vec::with_capacity(nc);
    let mut der = Vec::with_capacity(nc);
    for _ in 0..nc {
        pos.push(d.v3()?);
        der.push(d.v3()?);
    }
    let dir = (0..mesh.num_director_nodes())
        .map(|_| d.v3())
        .collect::<Result<Vec<_>>>()?;
    let state = RodState::new(Arc::new(mesh), HermiteCurve::new(pos, der), DirectorField::new(dir));
    let mut cfg = [T::zero(); 6];
    for v in &mut cfg {
        *v = d.f()?;
    }
    let max_steps = d.u64()? as usize;
    let mut metric = MetricWeights::<T>::default();
    for w in metric.star.iter_mut().chain(metric.dagger.iter_mut()) {
        *w = d.f()?;
    }
    let config = FlowConfig {
        kappa: cfg[0],
        epsilon: cfg[1],
        tau: cfg[2],
        rho: cfg[3],
        q: cfg[4],
        eps_stop: cfg[5],
        max_steps,
        metric,
    };
    let kind = match d.u8()? {
        0 => BcKind::Periodic,
        1 => BcKind::ClampedBoth,
        2 => BcKind::ClampedDirectorOnly,
        _ => return Err(bad("bad boundary kind")),
    };
    let mut curve_ends = [(Vec3::zero(), Vec3::zero()); 2];
    for ce in &mut curve_ends {
        *ce = (d.v3()?, d.v3()?);
    }
    let director_ends = [d.v3()?, d.v3()?];
    if d.at != payload.len() {
        return Err(bad("trailing bytes in payload"));
    }
    Ok(Checkpoint {
        step,
        label,
        state,
        config,
        bc: BoundaryCondition {
            kind,
            curve_ends,
            director_ends,
        },
    })
}

pub fn write_checkpoint<T: Real>(path: impl AsRef<Path>, cp: &Checkpoint<T>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_checkpoint(cp))
}

pub fn read_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| RodError::io(path, e))?;
    decode_checkpoint(&bytes)
}
