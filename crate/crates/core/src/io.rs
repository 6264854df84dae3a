//! File formats: datasets, key-value configs, draw files, reports and run manifests.
//!
//! Every CSV carries a header and floats are written with 12 significant digits.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::construct::WeightSummary;
use crate::error::{Error, Result};
use crate::sampler::{ChainOutput, SamplerConfig};
use crate::sim::{Distribution, MissingnessSpec, Stage, StudyResult, TruthSpec};
use crate::structure::{CorrelationParams, Dataset, MomentParams, StructureSpec, Subject};

/// 12 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "NA".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------- datasets

/// Reads `subject,time,<outcomes...>` rows; empty or `NA` cells are missing.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Data("dataset is empty".into()));
    }
    if header.len() < 4 || &header[0] != "subject" || &header[1] != "time" {
        return Err(Error::Data(
            "header must be 'subject,time,<outcome>,<outcome>,...' with at least 2 outcomes".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let l = names.len();

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(usize, Vec<Option<f64>>)>> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let subject = rec[0].to_string();
        if subject.is_empty() {
            return Err(Error::Data(format!("line {line}: empty subject id")));
        }
        let time: usize = rec[1]
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| {
                Error::Data(format!("line {line}, column 'time': '{}' is not a positive integer", &rec[1]))
            })?;
        let mut values = Vec::with_capacity(l);
        for (c, name) in names.iter().enumerate() {
            let raw = &rec[c + 2];
            let v = if raw.is_empty() || raw == "NA" {
                None
            } else {
                let x: f64 = raw.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                    Error::Data(format!("line {line}, column '{name}': '{raw}' is not numeric"))
                })?;
                Some(x)
            };
            values.push(v);
        }
        let entry = rows.entry(subject.clone()).or_insert_with(|| {
            order.push(subject.clone());
            Vec::new()
        });
        if entry.iter().any(|(t, _)| *t == time) {
            return Err(Error::Data(format!(
                "line {line}: duplicate row for subject '{subject}' at time {time}"
            )));
        }
        entry.push((time, values));
    }
    if order.is_empty() {
        return Err(Error::Data("dataset has no rows".into()));
    }
    let subjects = order
        .into_iter()
        .map(|id| {
            let list = &rows[&id];
            let n_times = list.iter().map(|(t, _)| *t).max().unwrap_or(0);
            let mut cells = vec![None; n_times * l];
            for (t, vals) in list {
                cells[(t - 1) * l..t * l].copy_from_slice(vals);
            }
            Subject::new(id.clone(), l, cells)
                .map_err(|e| Error::Data(format!("subject '{id}': {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(names, subjects)
}

pub fn parse_dataset(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::Data(format!("{} is empty", path.display())));
    }
    read_dataset(bytes.as_slice())
}

/// Writes one row per subject and time, including fully missing rows.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["subject".to_string(), "time".to_string()];
    header.extend(data.outcome_names.iter().cloned());
    w.write_record(&header)?;
    for s in &data.subjects {
        for j in 0..s.n_times() {
            let mut rec = vec![s.id.clone(), (j + 1).to_string()];
            rec.extend((0..s.outcomes()).map(|o| match s.get(j, o) {
                Some(v) => format!("{v:?}"),
                None => "NA".into(),
            }));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<dataset>", e))?;
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_dataset(data, create(path)?)
}

// ---------------------------------------------------------------- key-value text

/// Parses a JSON object or `key = value` lines (`#` starts a comment).
///
/// Values of `key = value` lines are read as JSON when possible, else as strings.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        return match serde_json::from_str::<Value>(trimmed)? {
            Value::Object(m) => Ok(m),
            _ => Err(Error::InvalidArgument("expected a JSON object".into())),
        };
    }
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| Error::InvalidArgument(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim().trim_matches('"'), v.trim().trim_end_matches(','));
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        if map.insert(k.to_string(), value).is_some() {
            return Err(Error::InvalidArgument(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(map)
}

pub fn parse_config(text: &str) -> Result<SamplerConfig> {
    let map = parse_key_values(text)?;
    let cfg: SamplerConfig = serde_json::from_value(Value::Object(map))
        .map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SamplerConfig> {
    parse_config(&read_text(path)?)
}

fn as_f64(map: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(Value::String(s)) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("'{key}' = '{s}' is not a number"))),
        Some(v) => Err(Error::InvalidArgument(format!("'{key}' = {v} is not a number"))),
    }
}

fn as_usize(map: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match as_f64(map, key)? {
        None => Ok(None),
        Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(Some(x as usize)),
        Some(x) => Err(Error::InvalidArgument(format!("'{key}' = {x} is not a count"))),
    }
}

fn as_list(map: &Map<String, Value>, key: &str) -> Result<Option<Vec<f64>>> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::InvalidArgument(format!("'{key}' has a non-number"))))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(Value::String(s)) => s
            .split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| Error::InvalidArgument(format!("'{key}': '{t}' is not a number"))))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Some(v) => Err(Error::InvalidArgument(format!("'{key}' = {v} is not a list"))),
    }
}

/// Structure and correlations from `L`, `J`, `eta.a.b`, `rho.l` and `gamma` keys.
///
/// Absent correlations are zero; unknown keys are rejected unless listed in `extra`.
fn correlations_from_map(
    map: &Map<String, Value>,
    extra: &[&str],
) -> Result<(StructureSpec, CorrelationParams)> {
    let l = as_usize(map, "L")?.ok_or_else(|| Error::InvalidArgument("missing key 'L'".into()))?;
    let j = as_usize(map, "J")?.ok_or_else(|| Error::InvalidArgument("missing key 'J'".into()))?;
    let spec = StructureSpec::new(l, j)?;
    let mut params = CorrelationParams::zeros(&spec);
    for (k, _) in map.iter() {
        if k == "L" || k == "J" || extra.iter().any(|e| k == e || k.starts_with(&format!("{e}."))) {
            continue;
        }
        let p = spec.parse_param(k)?;
        let v = as_f64(map, k)?.expect("key exists");
        if !(v.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("{k} = {v} is not inside (-1, 1)")));
        }
        params.set(&spec, p, v);
    }
    Ok((spec, params))
}

pub fn parse_params(text: &str) -> Result<(StructureSpec, CorrelationParams)> {
    correlations_from_map(&parse_key_values(text)?, &[])
}

pub fn load_params(path: &Path) -> Result<(StructureSpec, CorrelationParams)> {
    parse_params(&read_text(path)?)
}

/// Truth from a stage name or from key-value text with `mu.l`, `sd.l` and correlations.
///
/// Optional keys: `N`, `outcomes` (comma-separated names). `subjects` and `times`
/// override the file or preset values.
pub fn parse_truth(
    source: &str,
    distribution: Distribution,
    subjects: Option<usize>,
    times: Option<usize>,
) -> Result<TruthSpec> {
    if let Ok(stage) = source.parse::<Stage>() {
        return TruthSpec::preset(stage, distribution, subjects.unwrap_or(100), times.unwrap_or(4));
    }
    let mut map = parse_key_values(source)?;
    if let Some(j) = times {
        map.insert("J".into(), Value::from(j));
    }
    let (spec, correlations) = correlations_from_map(&map, &["N", "outcomes", "mu", "sd"])?;
    let l = spec.outcomes();
    let get = |prefix: &str| -> Result<Vec<f64>> {
        (1..=l)
            .map(|o| {
                as_f64(&map, &format!("{prefix}.{o}"))?
                    .ok_or_else(|| Error::InvalidArgument(format!("missing key '{prefix}.{o}'")))
            })
            .collect()
    };
    let moments = MomentParams::new(get("mu")?, get("sd")?)?;
    let outcome_names = match map.get("outcomes") {
        Some(Value::String(s)) => s.split(',').map(|t| t.trim().to_string()).collect(),
        Some(Value::Array(a)) => a.iter().map(|v| v.as_str().unwrap_or("").to_string()).collect(),
        _ => (1..=l).map(|o| format!("y{o}")).collect(),
    };
    let truth = TruthSpec {
        outcome_names,
        moments,
        correlations,
        distribution,
        n_subjects: subjects.or(as_usize(&map, "N")?).unwrap_or(100),
        times: spec.times(),
    };
    truth.validate()?;
    Ok(truth)
}

pub fn load_truth(
    arg: &str,
    distribution: Distribution,
    subjects: Option<usize>,
    times: Option<usize>,
) -> Result<TruthSpec> {
    if arg.parse::<Stage>().is_ok() {
        return parse_truth(arg, distribution, subjects, times);
    }
    parse_truth(&read_text(Path::new(arg))?, distribution, subjects, times)
}

/// `column_probs` and `row_dist` as lists.
pub fn parse_missingness(text: &str) -> Result<MissingnessSpec> {
    let map = parse_key_values(text)?;
    if let Some(k) = map.keys().find(|k| *k != "column_probs" && *k != "row_dist") {
        return Err(Error::InvalidArgument(format!("unknown missingness key '{k}'")));
    }
    let need = |k: &str| {
        as_list(&map, k)?.ok_or_else(|| Error::InvalidArgument(format!("missing key '{k}'")))
    };
    MissingnessSpec::new(need("column_probs")?, need("row_dist")?)
}

/// `none`, `default` or a path.
pub fn load_missingness(arg: &str) -> Result<Option<MissingnessSpec>> {
    match arg {
        "none" => Ok(None),
        "default" => Ok(Some(MissingnessSpec::default_four())),
        path => parse_missingness(&read_text(Path::new(path))?).map(Some),
    }
}

// ---------------------------------------------------------------- draws

pub fn draws_file_name(chain: usize) -> String {
    format!("draws_chain{}.csv", chain + 1)
}

/// Header `iteration,<names>`; iterations count from the first kept draw.
pub fn write_draws<W: Write>(out: &ChainOutput, burn_in: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["iteration".to_string()];
    header.extend(out.names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in out.draws.iter().enumerate() {
        let mut rec = vec![(burn_in + i + 1).to_string()];
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<draws>", e))?;
    Ok(())
}

pub fn write_diagnostics<W: Write>(outputs: &[ChainOutput], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["chain", "parameter", "acceptance_rate", "pd_rate", "final_kappa"])?;
    for out in outputs {
        let chain = (out.chain + 1).to_string();
        let l = out.spec.outcomes();
        for o in 0..l {
            w.write_record([
                chain.clone(),
                out.names[l + o].clone(),
                fmt_f64(out.sd_acceptance[o]),
                "NA".into(),
                "NA".into(),
            ])?;
        }
        for k in 0..out.corr_acceptance.len() {
            w.write_record([
                chain.clone(),
                out.names[2 * l + k].clone(),
                fmt_f64(out.corr_acceptance[k]),
                fmt_f64(out.corr_pd_rate[k]),
                fmt_f64(out.final_kappa[k]),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<diagnostics>", e))?;
    Ok(())
}

/// Reads every `draws_chain*.csv` in `dir`, using the manifest there for outcome names.
pub fn read_draws_dir(dir: &Path) -> Result<Vec<ChainOutput>> {
    let mut files: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let n: usize = name.strip_prefix("draws_chain")?.strip_suffix(".csv")?.parse().ok()?;
            Some((n, p))
        })
        .collect();
    if files.is_empty() {
        return Err(Error::Data(format!("no draws_chain*.csv files in {}", dir.display())));
    }
    files.sort();
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE)).ok();
    files
        .into_iter()
        .map(|(n, p)| read_draws(&p, n.saturating_sub(1), manifest.as_ref()))
        .collect()
}

fn read_draws(path: &Path, chain: usize, manifest: Option<&RunManifest>) -> Result<ChainOutput> {
    let bytes = read_file(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("iteration") {
        return Err(Error::Data(format!("{}: first column must be 'iteration'", path.display())));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let l = names.iter().filter(|n| n.starts_with("mu.")).count();
    let has_rho = names.iter().any(|n| n.starts_with("rho."));
    let times = manifest
        .and_then(|m| m.times)
        .unwrap_or(if has_rho { 2 } else { 1 });
    let spec = StructureSpec::new(l, times)?;
    let expected = 2 * l + spec.n_params();
    if names.len() != expected {
        return Err(Error::Data(format!(
            "{}: expected {expected} parameter columns, found {}",
            path.display(),
            names.len()
        )));
    }
    let mut draws = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{}: line {}, column '{}': '{v}' is not numeric",
                        path.display(),
                        i + 2,
                        names[c]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        draws.push(row);
    }
    let outcome_names = manifest
        .and_then(|m| m.outcome_names.clone())
        .filter(|n| n.len() == l)
        .unwrap_or_else(|| (1..=l).map(|o| o.to_string()).collect());
    let q = spec.n_params();
    Ok(ChainOutput {
        chain,
        spec,
        outcome_names,
        names,
        draws,
        sd_acceptance: vec![f64::NAN; l],
        corr_acceptance: vec![f64::NAN; q],
        corr_pd_rate: vec![f64::NAN; q],
        final_kappa: vec![f64::NAN; q],
    })
}

// ---------------------------------------------------------------- reports

pub fn write_weights<W: Write>(s: &WeightSummary, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["quantity", "estimate", "lower", "upper"])?;
    for (k, name) in s.outcome_names.iter().enumerate() {
        w.write_record([
            format!("w.{name}"),
            fmt_f64(s.point.as_slice()[k]),
            fmt_f64(s.lower[k]),
            fmt_f64(s.upper[k]),
        ])?;
    }
    for (k, name) in s.outcome_names.iter().enumerate() {
        w.write_record([format!("SRM.{name}"), fmt_f64(s.srm_individual[k]), "NA".into(), "NA".into()])?;
    }
    w.write_record([
        "SRM_opt".into(),
        fmt_f64(s.srm_opt),
        fmt_f64(s.srm_opt_interval.0),
        fmt_f64(s.srm_opt_interval.1),
    ])?;
    w.write_record([
        "SRM_equal".into(),
        fmt_f64(s.srm_equal),
        fmt_f64(s.srm_equal_interval.0),
        fmt_f64(s.srm_equal_interval.1),
    ])?;
    w.flush().map_err(|e| Error::io("<weights>", e))?;
    Ok(())
}

pub fn write_barycentric<W: Write>(points: &[[f64; 3]], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "z"])?;
    for p in points {
        w.write_record(p.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush().map_err(|e| Error::io("<barycentric>", e))?;
    Ok(())
}

pub fn write_opchar<W: Write>(study: &StudyResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["quantity", "truth", "coverage", "bias", "rmse"])?;
    for r in &study.report.rows {
        w.write_record([
            r.quantity.clone(),
            fmt_f64(r.truth),
            fmt_f64(r.coverage),
            fmt_f64(r.bias),
            fmt_f64(r.rmse),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<opchar>", e))?;
    Ok(())
}

pub fn write_study_diagnostics<W: Write>(study: &StudyResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["parameter", "acceptance_rate", "pd_rate"])?;
    for r in &study.rates {
        w.write_record([r.parameter.clone(), fmt_f64(r.acceptance), fmt_opt(r.pd_rate)])?;
    }
    w.flush().map_err(|e| Error::io("<diagnostics>", e))?;
    Ok(())
}

pub fn write_replicates<W: Write>(study: &StudyResult, names: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["replicate".to_string(), "seed".to_string()];
    for n in names {
        header.extend([format!("w.{n}"), format!("w.{n}.lower"), format!("w.{n}.upper")]);
    }
    header.extend(["SRM".into(), "SRM.lower".into(), "SRM.upper".into()]);
    w.write_record(&header)?;
    for r in &study.replicates {
        let mut rec = vec![(r.index + 1).to_string(), r.seed.to_string()];
        for k in 0..names.len() {
            rec.extend([fmt_f64(r.weights[k]), fmt_f64(r.lower[k]), fmt_f64(r.upper[k])]);
        }
        rec.extend([fmt_f64(r.srm), fmt_f64(r.srm_interval.0), fmt_f64(r.srm_interval.1)]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<replicates>", e))?;
    Ok(())
}

/// Writes `contents` through `f` into `path`.
pub fn write_to<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(fs::File) -> Result<()>,
{
    f(create(path)?)
}

// ---------------------------------------------------------------- manifests

pub const MANIFEST_FILE: &str = "manifest.json";

/// What was run, on which inputs, with which settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: SamplerConfig,
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub data_sha256: Option<String>,
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
    #[serde(default)]
    pub outcome_names: Option<Vec<String>>,
    #[serde(default)]
    pub times: Option<usize>,
    /// Command-specific settings such as the simulation truth.
    #[serde(default)]
    pub extra: Map<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &SamplerConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            data_path: None,
            data_sha256: None,
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds: 0.0,
            outcome_names: None,
            times: None,
            extra: Map::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_with_one_missing_cell() {
        let text = "subject,time,a,b\n1,1,0.5,NA\n1,2,1.5,2.0\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(d.subjects.len(), 1);
        assert_eq!(d.max_times(), 2);
        assert_eq!(d.subjects[0].get(0, 1), None);
        assert_eq!(d.subjects[0].get(1, 1), Some(2.0));
    }

    #[test]
    fn non_contiguous_rows_and_gaps() {
        let text = "subject,time,a,b\nx,3,1,2\ny,1,3,\nx,1,5,6\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        assert_eq!(d.subjects[0].id, "x");
        assert_eq!(d.subjects[0].n_times(), 3);
        assert_eq!(d.subjects[0].get(1, 0), None);
        assert_eq!(d.subjects[0].get(2, 1), Some(2.0));
        assert_eq!(d.subjects[1].get(0, 1), None);
    }

    #[test]
    fn dataset_errors() {
        assert!(read_dataset("".as_bytes()).is_err());
        assert!(read_dataset("subject,time,a\n1,1,2\n".as_bytes()).is_err());
        let dup = read_dataset("subject,time,a,b\n1,1,2,3\n1,1,4,5\n".as_bytes());
        assert!(matches!(dup, Err(Error::Data(m)) if m.contains("duplicate")));
        let bad = read_dataset("subject,time,a,b\n1,1,2,x\n".as_bytes());
        assert!(matches!(bad, Err(Error::Data(m)) if m.contains("line 2") && m.contains("'b'")));
        let time = read_dataset("subject,time,a,b\n1,0,2,3\n".as_bytes());
        assert!(matches!(time, Err(Error::Data(m)) if m.contains("time")));
    }

    #[test]
    fn dataset_round_trip() {
        let text = "subject,time,a,b\nx,1,0.1,NA\nx,2,NA,NA\nx,3,1e-3,-2.5\ny,1,3,4\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn key_values_in_both_syntaxes() {
        let a = parse_key_values("iterations = 100\n# note\ncandidate_kind = UNIF_FULL\ntune=false").unwrap();
        let b = parse_key_values(r#"{"iterations": 100, "candidate_kind": "UNIF_FULL", "tune": false}"#).unwrap();
        assert_eq!(a, b);
        let cfg = parse_config("iterations = 100\nburn_in = 10").unwrap();
        assert_eq!((cfg.iterations, cfg.burn_in), (100, 10));
        assert!(parse_config("iterations = 10\nburn_in = 10").is_err());
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_key_values("a = 1\na = 2").is_err());
    }

    #[test]
    fn params_file() {
        let (spec, p) = parse_params("L = 2\nJ = 2\neta.1.2 = 0.5\nrho.1 = 0.5").unwrap();
        assert_eq!((spec.outcomes(), spec.times()), (2, 2));
        assert_eq!(p.eta, vec![0.5]);
        assert_eq!(p.rho, vec![0.5, 0.0]);
        assert!(parse_params("L = 2\nJ = 1\nrho.1 = 0.5").is_err());
        assert!(parse_params("L = 2\nJ = 2\neta.1.2 = 1.5").is_err());
    }

    #[test]
    fn truth_and_missingness() {
        let t = parse_truth("early", Distribution::Normal, Some(50), Some(3)).unwrap();
        assert_eq!((t.n_subjects, t.times), (50, 3));
        let text = "L = 2\nJ = 2\nN = 30\nmu.1 = 1\nmu.2 = 2\nsd.1 = 1\nsd.2 = 0.5\neta.1.2 = 0.3\noutcomes = a,b";
        let t = parse_truth(text, Distribution::T3, None, None).unwrap();
        assert_eq!(t.n_subjects, 30);
        assert_eq!(t.outcome_names, vec!["a", "b"]);
        assert!(parse_truth("L = 2\nJ = 2\nmu.1 = 1", Distribution::Normal, None, None).is_err());
        let m = parse_missingness("column_probs = 0.1, 0.2\nrow_dist = [0.5, 0.5]").unwrap();
        assert_eq!(m.row_dist, vec![0.5, 0.5]);
        assert!(parse_missingness("column_probs = 0.1\nrow_dist = 1\nextra = 2").is_err());
    }

    #[test]
    fn floats_have_twelve_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.00000000000e-1");
        assert_eq!(fmt_f64(-1234.5), "-1.23450000000e3");
        assert_eq!(fmt_f64(f64::NAN), "NA");
    }
}
