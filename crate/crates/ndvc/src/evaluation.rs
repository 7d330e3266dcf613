//! BD-rate, asset building, and the strategy cost report.
//!
//! `build_all` produces every artifact the six adaptation strategies need
//! (the high-quality representation, the simulcast ladder, plain and
//! deflated control streams) plus the delivered stream each strategy would
//! hand a client per ladder point, with wall times and PSNRs recorded in a
//! tab-separated manifest. `compare` is a pure function of that manifest:
//! it sums Interface-T storage, quality-normalizes Interface-U cost with
//! BD-rate, and renders the comparison table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use crate::container::{
    encode_representation, write_cs, write_representation, ControlStream, Representation,
};
use crate::deflation::{deflate, inflate};
use crate::error::{Error, Result};
use crate::guided::{assign_cs_groups, cs_qp_for_point, generate_control_stream, guided_encode, full_transcode, LadderSpec};
use crate::media_io::{psnr, Sequence};

/// One point of a rate-quality curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateQualityPoint {
    /// Bits per second.
    pub bitrate: f64,
    /// Quality in dB.
    pub psnr: f64,
}

fn validate_curve(points: &[RateQualityPoint], label: &str) -> Result<()> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "{label} curve has {} points, BD-rate needs at least 4",
            points.len()
        )));
    }
    for p in points {
        if !(p.bitrate > 0.0) || !p.bitrate.is_finite() || !p.psnr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "{label} curve contains a degenerate point ({}, {})",
                p.bitrate, p.psnr
            )));
        }
    }
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.bitrate == b.bitrate {
                return Err(Error::InvalidArgument(format!(
                    "{label} curve has duplicate bitrate {}",
                    a.bitrate
                )));
            }
        }
    }
    Ok(())
}

/// Least-squares cubic fit of `log10(bitrate)` as a function of PSNR,
/// with x centered on the curve's mean PSNR for conditioning.
/// Returns (coefficients c0..c3, x offset).
fn cubic_fit(points: &[RateQualityPoint]) -> ([f64; 4], f64) {
    let x0 = points.iter().map(|p| p.psnr).sum::<f64>() / points.len() as f64;
    let mut s = [0.0f64; 7]; // sums of x^k
    let mut t = [0.0f64; 4]; // sums of x^k * y
    for p in points {
        let x = p.psnr - x0;
        let y = p.bitrate.log10();
        let mut xk = 1.0;
        for k in 0..7 {
            s[k] += xk;
            if k < 4 {
                t[k] += xk * y;
            }
            xk *= x;
        }
    }
    // Normal equations: m[i][j] = s[i + j].
    let mut m = [[0.0f64; 5]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = s[i + j];
        }
        m[i][4] = t[i];
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut c = [0.0f64; 4];
    for i in (0..4).rev() {
        let mut acc = m[i][4];
        for j in i + 1..4 {
            acc -= m[i][j] * c[j];
        }
        c[i] = acc / m[i][i];
    }
    (c, x0)
}

fn integrate_cubic(c: &[f64; 4], a: f64, b: f64) -> f64 {
    let eval = |x: f64| {
        let x2 = x * x;
        c[0] * x + c[1] * x2 / 2.0 + c[2] * x2 * x / 3.0 + c[3] * x2 * x2 / 4.0
    };
    eval(b) - eval(a)
}

/// Bjøntegaard delta rate: the average bitrate difference of `test`
/// against `anchor` at equal quality, in percent. Positive means `test`
/// needs more rate for the same PSNR.
pub fn bd_rate(anchor: &[RateQualityPoint], test: &[RateQualityPoint]) -> Result<f64> {
    validate_curve(anchor, "anchor")?;
    validate_curve(test, "test")?;
    let bounds = |pts: &[RateQualityPoint]| {
        let lo = pts.iter().map(|p| p.psnr).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.psnr).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (a_lo, a_hi) = bounds(anchor);
    let (t_lo, t_hi) = bounds(test);
    let lo = a_lo.max(t_lo);
    let hi = a_hi.min(t_hi);
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "curves do not overlap in PSNR ({lo} vs {hi})"
        )));
    }
    let (ca, xa) = cubic_fit(anchor);
    let (ct, xt) = cubic_fit(test);
    let mean_a = integrate_cubic(&ca, lo - xa, hi - xa) / (hi - lo);
    let mean_t = integrate_cubic(&ct, lo - xt, hi - xt) / (hi - lo);
    Ok((10f64.powf(mean_t - mean_a) - 1.0) * 100.0)
}

/// `100 * (a - b) / b`, rounded to one decimal, halves away from zero.
pub fn percent(a: f64, b: f64) -> f64 {
    round_1dp(100.0 * (a - b) / b)
}

pub(crate) fn round_1dp(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// The six adaptation strategies the report compares, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Simulcast,
    Deflation,
    Ndvc1Rcs,
    Ndvc2Rcs,
    Ndvc4Rcs,
    FullTranscode,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Simulcast,
        Strategy::Deflation,
        Strategy::Ndvc1Rcs,
        Strategy::Ndvc2Rcs,
        Strategy::Ndvc4Rcs,
        Strategy::FullTranscode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Simulcast => "simulcast",
            Strategy::Deflation => "deflation",
            Strategy::Ndvc1Rcs => "ndvc_1rcs",
            Strategy::Ndvc2Rcs => "ndvc_2rcs",
            Strategy::Ndvc4Rcs => "ndvc_4rcs",
            Strategy::FullTranscode => "full_transcode",
        }
    }

    pub fn parse(s: &str) -> Result<Strategy> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }

    /// Representations per control stream, for the guided variants.
    pub fn reps_per_cs(self) -> Option<usize> {
        match self {
            Strategy::Ndvc1Rcs => Some(1),
            Strategy::Ndvc2Rcs => Some(2),
            Strategy::Ndvc4Rcs => Some(4),
            _ => None,
        }
    }

    fn column_label(self) -> &'static str {
        match self {
            Strategy::Simulcast => "Simulcast",
            Strategy::Deflation => "Deflation",
            Strategy::Ndvc1Rcs => "1 R/CS",
            Strategy::Ndvc2Rcs => "2 R/CS",
            Strategy::Ndvc4Rcs => "4 R/CS",
            Strategy::FullTranscode => "Transcode",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Stored at Interface T by at least one strategy.
    Storage,
    /// The stream a strategy delivers for one ladder point, with its
    /// System-B production time.
    Delivery,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Storage => "storage",
            Role::Delivery => "delivery",
        }
    }
}

/// One cataloged artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub role: Role,
    /// storage: r0 | simulcast | cs | deflated_cs;
    /// delivery: simulcast | transcode | guided | inflated.
    pub kind: String,
    pub strategy: Option<Strategy>,
    pub qp: Option<u8>,
    /// Path relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub millis: f64,
    pub psnr_db: Option<f64>,
}

/// The asset catalog `build_all` writes and `compare`/the simulator read.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub video: String,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub frame_rate: f64,
    pub gop_len: u8,
    pub r0_qp: u8,
    pub ladder_qps: Vec<u8>,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

impl Manifest {
    pub fn ladder(&self, reps_per_cs: usize) -> Result<LadderSpec> {
        LadderSpec::new(self.ladder_qps.clone(), self.r0_qp, reps_per_cs)
    }

    pub fn storage_entry(&self, kind: &str, qp: Option<u8>) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.role == Role::Storage && e.kind == kind && e.qp == qp)
            .ok_or_else(|| {
                Error::MissingArtifact(format!("storage {kind} qp {qp:?} for video {}", self.video))
            })
    }

    pub fn delivery_entry(&self, strategy: Strategy, qp: u8) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.role == Role::Delivery && e.strategy == Some(strategy) && e.qp == Some(qp))
            .ok_or_else(|| {
                Error::MissingArtifact(format!(
                    "delivery for strategy {strategy} at qp {qp} (video {})",
                    self.video
                ))
            })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "#meta video={} width={} height={} frames={} fps={} gop={} r0_qp={} ladder={}\n",
            self.video,
            self.width,
            self.height,
            self.frame_count,
            self.frame_rate,
            self.gop_len,
            self.r0_qp,
            self.ladder_qps
                .iter()
                .map(u8::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ));
        out.push_str("role\tkind\tstrategy\tqp\tpath\tbytes\tmillis\tpsnr\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{}\n",
                e.role.name(),
                e.kind,
                e.strategy.map(|s| s.name().to_string()).unwrap_or_else(|| "-".into()),
                e.qp.map(|q| q.to_string()).unwrap_or_else(|| "-".into()),
                e.path,
                e.bytes,
                e.millis,
                e.psnr_db.map(|p| format!("{p:.6}")).unwrap_or_else(|| "-".into()),
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Manifest> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Format("empty manifest".into()))?;
        let meta = meta
            .strip_prefix("#meta ")
            .ok_or_else(|| Error::Format("manifest must open with a #meta line".into()))?;
        let mut fields = BTreeMap::new();
        for pair in meta.split_ascii_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad meta token {pair:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Format(format!("manifest meta is missing {k}")))
        };
        let parse_err = |k: &str| Error::Format(format!("bad manifest meta value for {k}"));
        let video = get("video")?;
        let width: usize = get("width")?.parse().map_err(|_| parse_err("width"))?;
        let height: usize = get("height")?.parse().map_err(|_| parse_err("height"))?;
        let frame_count: usize = get("frames")?.parse().map_err(|_| parse_err("frames"))?;
        let frame_rate: f64 = get("fps")?.parse().map_err(|_| parse_err("fps"))?;
        let gop_len: u8 = get("gop")?.parse().map_err(|_| parse_err("gop"))?;
        let r0_qp: u8 = get("r0_qp")?.parse().map_err(|_| parse_err("r0_qp"))?;
        let ladder_qps: Vec<u8> = get("ladder")?
            .split(',')
            .map(|s| s.parse().map_err(|_| parse_err("ladder")))
            .collect::<Result<_>>()?;

        let header = lines
            .next()
            .ok_or_else(|| Error::Format("manifest missing column header".into()))?;
        if header != "role\tkind\tstrategy\tqp\tpath\tbytes\tmillis\tpsnr" {
            return Err(Error::Format("unexpected manifest column header".into()));
        }
        let mut entries = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 8 {
                return Err(Error::Format(format!(
                    "manifest line {} has {} columns, expected 8",
                    n + 3,
                    cols.len()
                )));
            }
            let role = match cols[0] {
                "storage" => Role::Storage,
                "delivery" => Role::Delivery,
                other => return Err(Error::Format(format!("unknown role {other:?}"))),
            };
            let strategy = match cols[2] {
                "-" => None,
                s => Some(Strategy::parse(s)?),
            };
            let qp = match cols[3] {
                "-" => None,
                s => Some(s.parse().map_err(|_| parse_err("qp"))?),
            };
            let psnr_db = match cols[7] {
                "-" => None,
                s => Some(s.parse().map_err(|_| parse_err("psnr"))?),
            };
            entries.push(ManifestEntry {
                role,
                kind: cols[1].to_string(),
                strategy,
                qp,
                path: cols[4].to_string(),
                bytes: cols[5].parse().map_err(|_| parse_err("bytes"))?,
                millis: cols[6].parse().map_err(|_| parse_err("millis"))?,
                psnr_db,
            });
        }
        Ok(Manifest {
            video,
            width,
            height,
            frame_count,
            frame_rate,
            gop_len,
            r0_qp,
            ladder_qps,
            entries,
        })
    }

    pub fn save(&self, workdir: &Path) -> Result<()> {
        std::fs::write(workdir.join(MANIFEST_FILE), self.to_tsv())?;
        Ok(())
    }

    pub fn load(workdir: &Path) -> Result<Manifest> {
        let path = workdir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_tsv(&text)
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn write_artifact(workdir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::write(workdir.join(name), bytes).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", workdir.join(name).display()),
        ))
    })
}

/// Builds and catalogs every strategy's artifacts under `workdir`:
/// the high-quality representation, the simulcast ladder, one plain
/// control stream per ladder point (shared by the grouping policies), one
/// deflated control stream per point, and each strategy's delivered stream
/// per point with its System-B wall time and PSNR. Writes `manifest.tsv`.
pub fn build_all(
    source: &Sequence,
    name: &str,
    ladder: &LadderSpec,
    gop_len: u8,
    workdir: &Path,
) -> Result<Manifest> {
    std::fs::create_dir_all(workdir)?;
    let mut entries = Vec::new();
    let fps = source.frame_rate();

    let t = Instant::now();
    let r0 = encode_representation(source, ladder.r0_qp(), gop_len)?;
    let r0_ms = ms_since(t);
    let r0_bytes = write_representation(&r0);
    write_artifact(workdir, "r0.ndv", &r0_bytes)?;
    entries.push(ManifestEntry {
        role: Role::Storage,
        kind: "r0".into(),
        strategy: None,
        qp: Some(ladder.r0_qp()),
        path: "r0.ndv".into(),
        bytes: r0_bytes.len() as u64,
        millis: r0_ms,
        psnr_db: None,
    });
    let r0_decoded = r0.decode()?;

    // Simulcast ladder: encoded from the source, also the files simulcast
    // delivers (System B only selects and serves, so delivery time is 0).
    for &qp in ladder.qps() {
        let t = Instant::now();
        let rep = encode_representation(source, qp, gop_len)?;
        let millis = ms_since(t);
        let bytes = write_representation(&rep);
        let path = format!("sim_qp{qp}.ndv");
        write_artifact(workdir, &path, &bytes)?;
        let quality = psnr(source, &rep.decode()?)?;
        entries.push(ManifestEntry {
            role: Role::Storage,
            kind: "simulcast".into(),
            strategy: None,
            qp: Some(qp),
            path: path.clone(),
            bytes: bytes.len() as u64,
            millis,
            psnr_db: None,
        });
        entries.push(ManifestEntry {
            role: Role::Delivery,
            kind: "simulcast".into(),
            strategy: Some(Strategy::Simulcast),
            qp: Some(qp),
            path,
            bytes: bytes.len() as u64,
            millis: 0.0,
            psnr_db: Some(quality),
        });
    }

    // Plain control streams: one per ladder point. The grouping policies
    // pick subsets of these, so the files are shared across 1/2/4 R/CS.
    let mut cs_by_qp: BTreeMap<u8, ControlStream> = BTreeMap::new();
    for &qp in ladder.qps() {
        let t = Instant::now();
        let cs = generate_control_stream(&r0_decoded, qp, gop_len)?;
        let millis = ms_since(t);
        let bytes = write_cs(&cs);
        let path = format!("cs_qp{qp}.ndc");
        write_artifact(workdir, &path, &bytes)?;
        entries.push(ManifestEntry {
            role: Role::Storage,
            kind: "cs".into(),
            strategy: None,
            qp: Some(qp),
            path,
            bytes: bytes.len() as u64,
            millis,
            psnr_db: None,
        });
        cs_by_qp.insert(qp, cs);
    }

    // Deflated control streams: one per ladder point.
    let mut defl_by_qp: BTreeMap<u8, ControlStream> = BTreeMap::new();
    for &qp in ladder.qps() {
        let t = Instant::now();
        let (cs, _simulcast) = deflate(source, &r0_decoded, qp, gop_len)?;
        let millis = ms_since(t);
        let bytes = write_cs(&cs);
        let path = format!("defl_qp{qp}.ndc");
        write_artifact(workdir, &path, &bytes)?;
        entries.push(ManifestEntry {
            role: Role::Storage,
            kind: "deflated_cs".into(),
            strategy: None,
            qp: Some(qp),
            path,
            bytes: bytes.len() as u64,
            millis,
            psnr_db: None,
        });
        defl_by_qp.insert(qp, cs);
    }

    // System-B delivery runs. Every timed region includes decoding the
    // stored representation, which is part of the node's work.
    for &qp in ladder.qps() {
        let t = Instant::now();
        let rep = full_transcode(&r0, qp)?;
        let millis = ms_since(t);
        let bytes = write_representation(&rep);
        let path = format!("u_transcode_qp{qp}.ndv");
        write_artifact(workdir, &path, &bytes)?;
        let quality = psnr(source, &rep.decode()?)?;
        entries.push(ManifestEntry {
            role: Role::Delivery,
            kind: "transcode".into(),
            strategy: Some(Strategy::FullTranscode),
            qp: Some(qp),
            path,
            bytes: bytes.len() as u64,
            millis,
            psnr_db: Some(quality),
        });
    }
    for strategy in [Strategy::Ndvc1Rcs, Strategy::Ndvc2Rcs, Strategy::Ndvc4Rcs] {
        let rp = strategy.reps_per_cs().unwrap();
        let grouped = ladder.with_reps_per_cs(rp)?;
        for &qp in ladder.qps() {
            let cs_qp = cs_qp_for_point(&grouped, qp)?;
            let cs = &cs_by_qp[&cs_qp];
            let t = Instant::now();
            let decoded = r0.decode()?;
            let rep = guided_encode(&decoded, cs, qp)?;
            let millis = ms_since(t);
            let bytes = write_representation(&rep);
            let path = format!("u_ndvc{rp}_qp{qp}.ndv");
            write_artifact(workdir, &path, &bytes)?;
            let quality = psnr(source, &rep.decode()?)?;
            entries.push(ManifestEntry {
                role: Role::Delivery,
                kind: "guided".into(),
                strategy: Some(strategy),
                qp: Some(qp),
                path,
                bytes: bytes.len() as u64,
                millis,
                psnr_db: Some(quality),
            });
        }
    }
    for &qp in ladder.qps() {
        let cs = &defl_by_qp[&qp];
        let t = Instant::now();
        let decoded = r0.decode()?;
        let rep = inflate(&decoded, cs)?;
        let millis = ms_since(t);
        let bytes = write_representation(&rep);
        let path = format!("u_inflated_qp{qp}.ndv");
        write_artifact(workdir, &path, &bytes)?;
        let quality = psnr(source, &rep.decode()?)?;
        entries.push(ManifestEntry {
            role: Role::Delivery,
            kind: "inflated".into(),
            strategy: Some(Strategy::Deflation),
            qp: Some(qp),
            path,
            bytes: bytes.len() as u64,
            millis,
            psnr_db: Some(quality),
        });
    }

    let manifest = Manifest {
        video: name.to_string(),
        width: source.width(),
        height: source.height(),
        frame_count: source.len(),
        frame_rate: fps,
        gop_len,
        r0_qp: ladder.r0_qp(),
        ladder_qps: ladder.qps().to_vec(),
        entries,
    };
    manifest.save(workdir)?;
    Ok(manifest)
}

/// Cost of one delivered ladder point under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCost {
    pub qp: u8,
    pub u_bytes: u64,
    pub psnr_db: f64,
    pub bitrate: f64,
}

/// Full cost picture of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyCost {
    pub strategy: Strategy,
    /// Bytes this strategy keeps at Interface T.
    pub t_bytes: u64,
    pub points: Vec<PointCost>,
    /// Quality-normalized Interface-U overhead, percent (NaN when fewer
    /// than four points were requested).
    pub bd_rate_vs_simulcast: f64,
    pub bd_rate_vs_transcode: f64,
    pub system_b_seconds: f64,
}

/// The comparison table across all six strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub video: String,
    pub points: Vec<u8>,
    pub strategies: Vec<StrategyCost>,
}

/// Interface-T bytes a strategy stores, per the manifest.
fn t_bytes_of(manifest: &Manifest, strategy: Strategy) -> Result<u64> {
    let sum_kind = |kind: &str, qps: &[u8]| -> Result<u64> {
        qps.iter()
            .map(|&qp| Ok(manifest.storage_entry(kind, Some(qp))?.bytes))
            .sum()
    };
    let r0 = manifest.storage_entry("r0", Some(manifest.r0_qp))?.bytes;
    match strategy {
        Strategy::Simulcast => sum_kind("simulcast", &manifest.ladder_qps),
        Strategy::FullTranscode => Ok(r0),
        Strategy::Deflation => Ok(r0 + sum_kind("deflated_cs", &manifest.ladder_qps)?),
        Strategy::Ndvc1Rcs | Strategy::Ndvc2Rcs | Strategy::Ndvc4Rcs => {
            let ladder = manifest.ladder(strategy.reps_per_cs().unwrap())?;
            let cs_qps: Vec<u8> = assign_cs_groups(&ladder).iter().map(|g| g.cs_qp).collect();
            Ok(r0 + sum_kind("cs", &cs_qps)?)
        }
    }
}

/// Builds the Table-shaped cost report from a manifest. Pure: every number
/// (sizes, times, PSNRs) comes from the manifest, nothing is re-measured.
pub fn compare(manifest: &Manifest, requested_points: &[u8]) -> Result<CostReport> {
    let points: Vec<u8> = if requested_points.is_empty() {
        manifest.ladder_qps.clone()
    } else {
        requested_points.to_vec()
    };
    for qp in &points {
        if !manifest.ladder_qps.contains(qp) {
            return Err(Error::InvalidArgument(format!(
                "qp {qp} is not a ladder point of video {}",
                manifest.video
            )));
        }
    }

    let curve = |strategy: Strategy| -> Result<Vec<PointCost>> {
        points
            .iter()
            .map(|&qp| {
                let e = manifest.delivery_entry(strategy, qp)?;
                let psnr_db = e.psnr_db.ok_or_else(|| {
                    Error::MissingArtifact(format!("psnr for {strategy} at qp {qp}"))
                })?;
                Ok(PointCost {
                    qp,
                    u_bytes: e.bytes,
                    psnr_db,
                    bitrate: e.bytes as f64 * 8.0 * manifest.frame_rate
                        / manifest.frame_count as f64,
                })
            })
            .collect()
    };

    let rq = |points: &[PointCost]| -> Vec<RateQualityPoint> {
        points
            .iter()
            .map(|p| RateQualityPoint {
                bitrate: p.bitrate,
                psnr: p.psnr_db,
            })
            .collect()
    };

    let sim_points = curve(Strategy::Simulcast)?;
    let transcode_points = curve(Strategy::FullTranscode)?;
    let sim_curve = rq(&sim_points);
    let transcode_curve = rq(&transcode_points);

    let mut strategies = Vec::new();
    for strategy in Strategy::ALL {
        let pts = curve(strategy)?;
        let this_curve = rq(&pts);
        let (bd_sim, bd_tr) = if pts.len() >= 4 {
            (
                bd_rate(&sim_curve, &this_curve)?,
                bd_rate(&transcode_curve, &this_curve)?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        let b_seconds: f64 = points
            .iter()
            .map(|&qp| {
                Ok(manifest.delivery_entry(strategy, qp)?.millis / 1e3)
            })
            .sum::<Result<f64>>()?;
        strategies.push(StrategyCost {
            strategy,
            t_bytes: t_bytes_of(manifest, strategy)?,
            points: pts,
            bd_rate_vs_simulcast: bd_sim,
            bd_rate_vs_transcode: bd_tr,
            system_b_seconds: b_seconds,
        });
    }
    Ok(CostReport {
        video: manifest.video.clone(),
        points,
        strategies,
    })
}

/// Published reference percentages for the same table shape, measured on
/// HM 16.15 over the standardization test set. Documentation only; none of
/// these are asserted anywhere.
pub const REFERENCE_HM1615: [(&str, [f64; 6]); 5] = [
    ("Cost (%) vs simulcast (T)", [0.0, -27.1, -50.5, -64.8, -68.0, -74.6]),
    ("Cost (%) vs simulcast (U)", [0.0, 0.0, 8.5, 13.9, 18.5, 8.5]),
    ("Cost (%) vs full transcoding (T)", [297.1, 189.5, 96.7, 39.6, 26.4, 0.0]),
    ("Cost (%) vs full transcoding (U)", [-6.4, -6.4, 0.0, 6.2, 10.8, 0.0]),
    ("Time (%) vs full transcoding (B)", [-100.0, -99.7, -98.6, -98.3, -98.1, 0.0]),
];

impl CostReport {
    fn strategy(&self, s: Strategy) -> &StrategyCost {
        self.strategies.iter().find(|c| c.strategy == s).unwrap()
    }

    /// Derived percent rows in table order, rounded to one decimal.
    pub fn percent_rows(&self) -> Vec<(String, Vec<f64>)> {
        let sim = self.strategy(Strategy::Simulcast);
        let tr = self.strategy(Strategy::FullTranscode);
        let mut rows = Vec::new();
        let t_vs = |base: &StrategyCost| {
            self.strategies
                .iter()
                .map(|c| percent(c.t_bytes as f64, base.t_bytes as f64))
                .collect::<Vec<_>>()
        };
        rows.push(("Cost (%) vs simulcast (T)".to_string(), t_vs(sim)));
        rows.push((
            "Cost (%) vs simulcast (U)".to_string(),
            self.strategies
                .iter()
                .map(|c| round_1dp(c.bd_rate_vs_simulcast))
                .collect(),
        ));
        rows.push(("Cost (%) vs full transcoding (T)".to_string(), t_vs(tr)));
        rows.push((
            "Cost (%) vs full transcoding (U)".to_string(),
            self.strategies
                .iter()
                .map(|c| round_1dp(c.bd_rate_vs_transcode))
                .collect(),
        ));
        rows.push((
            "Time (%) vs full transcoding (B)".to_string(),
            self.strategies
                .iter()
                .map(|c| percent(c.system_b_seconds, tr.system_b_seconds))
                .collect(),
        ));
        rows
    }

    /// Human-readable aligned table with the published reference block as
    /// a footer.
    pub fn render(&self) -> String {
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        rows.push((
            "Interface T bytes".to_string(),
            self.strategies.iter().map(|c| c.t_bytes.to_string()).collect(),
        ));
        for (i, qp) in self.points.iter().enumerate() {
            rows.push((
                format!("Interface U bytes (qp {qp})"),
                self.strategies
                    .iter()
                    .map(|c| c.points[i].u_bytes.to_string())
                    .collect(),
            ));
            rows.push((
                format!("PSNR dB (qp {qp})"),
                self.strategies
                    .iter()
                    .map(|c| format!("{:.3}", c.points[i].psnr_db))
                    .collect(),
            ));
        }
        rows.push((
            "System B seconds".to_string(),
            self.strategies
                .iter()
                .map(|c| format!("{:.3}", c.system_b_seconds))
                .collect(),
        ));
        for (label, values) in self.percent_rows() {
            rows.push((
                label,
                values
                    .iter()
                    .map(|v| if v.is_nan() { "-".to_string() } else { format!("{v:.1}") })
                    .collect(),
            ));
        }

        let label_w = rows
            .iter()
            .map(|(l, _)| l.len())
            .max()
            .unwrap_or(0)
            .max("Cost report".len());
        let col_w = 11usize;
        let mut out = String::new();
        out.push_str(&format!(
            "Cost report: {} (ladder qp {}, {} points requested)\n\n",
            self.video,
            self.points
                .iter()
                .map(u8::to_string)
                .collect::<Vec<_>>()
                .join(","),
            self.points.len()
        ));
        out.push_str(&format!("{:label_w$}", ""));
        for s in Strategy::ALL {
            out.push_str(&format!("{:>col_w$}", s.column_label()));
        }
        out.push('\n');
        for (label, cells) in &rows {
            out.push_str(&format!("{label:label_w$}"));
            for cell in cells {
                out.push_str(&format!("{cell:>col_w$}"));
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str("Published reference (HM 16.15), for orientation only:\n");
        for (label, values) in REFERENCE_HM1615 {
            out.push_str(&format!("{label:label_w$}"));
            for v in values {
                out.push_str(&format!("{v:>col_w$.1}"));
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable mirror of the table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("metric");
        for s in Strategy::ALL {
            out.push('\t');
            out.push_str(s.name());
        }
        out.push('\n');
        let mut push_row = |label: &str, cells: Vec<String>| {
            out.push_str(label);
            for c in cells {
                out.push('\t');
                out.push_str(&c);
            }
            out.push('\n');
        };
        push_row(
            "interface_t_bytes",
            self.strategies.iter().map(|c| c.t_bytes.to_string()).collect(),
        );
        for (i, qp) in self.points.iter().enumerate() {
            push_row(
                &format!("interface_u_bytes_qp{qp}"),
                self.strategies
                    .iter()
                    .map(|c| c.points[i].u_bytes.to_string())
                    .collect(),
            );
            push_row(
                &format!("psnr_db_qp{qp}"),
                self.strategies
                    .iter()
                    .map(|c| format!("{:.6}", c.points[i].psnr_db))
                    .collect(),
            );
        }
        push_row(
            "system_b_seconds",
            self.strategies
                .iter()
                .map(|c| format!("{:.6}", c.system_b_seconds))
                .collect(),
        );
        for (label, values) in self.percent_rows() {
            let key = label
                .to_lowercase()
                .replace(['(', ')', '%'], "")
                .split_whitespace()
                .collect::<Vec<_>>()
                .join("_");
            push_row(
                &key,
                values
                    .iter()
                    .map(|v| if v.is_nan() { "-".into() } else { format!("{v:.1}") })
                    .collect(),
            );
        }
        out
    }
}
