//! CSV and JSON artifact writers, plus parsers for reading our own CSVs
//! back (the SVG renderers work from the CSV text, never from live state).
//!
//! Every artifact starts with comment lines carrying the schema version,
//! generator name, seed and the fully resolved config, so a run can be
//! reproduced from any single output file.

use crate::limits::{LimitReport, RatioVerdict, SimulatedOrbit};
use crate::mlp::DenomTrace;
use crate::optim::TrajectoryRecord;
use crate::rate::RateReport;
use crate::rng::GENERATOR_NAME;
use crate::series::HarmonicCheck;
use crate::sweep::CellVerdict;
use crate::{Error, Result, SCHEMA_VERSION};

pub fn csv_preamble(command: &str, seed: u64, config_json: &str) -> String {
    format!(
        "# schema_version: {SCHEMA_VERSION}\n# command: {command}\n# generator: {GENERATOR_NAME}\n# seed: {seed}\n# config: {config_json}\n"
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(cells: &[CellVerdict], seed: u64, config_json: &str) -> String {
    let mut out = csv_preamble("sweep", seed, config_json);
    out.push_str("variant,P,beta2,beta1,best_lr,tail_error,verdict\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.variant,
            c.p,
            c.beta2,
            c.beta1,
            opt(c.best_lr),
            c.tail_error,
            c.verdict
        ));
    }
    out
}

pub fn trajectory_csv(rec: &TrajectoryRecord, seed: u64, config_json: &str) -> Result<String> {
    let mut out = csv_preamble("trajectory", seed, config_json);
    out.push_str("t,x,g,denominator,lr\n");
    for p in &rec.points {
        if p.x.len() != 1 {
            return Err(Error::InvalidParameter(
                "trajectory CSV is defined for scalar problems".into(),
            ));
        }
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.t,
            p.x[0],
            p.g[0],
            opt(p.denominator),
            p.lr
        ));
    }
    Ok(out)
}

/// One row of limits.csv; problem-1 rows leave the v/boundary columns empty.
#[derive(Debug, Clone)]
pub struct LimitsRow {
    pub problem: &'static str,
    pub p: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub m_limit: f64,
    pub s_limit: f64,
    pub v_limit: Option<f64>,
    pub s_plus: Option<f64>,
    pub s_minus: Option<f64>,
    pub v_plus: Option<f64>,
    pub v_minus: Option<f64>,
    pub ratio_s: Option<f64>,
    pub ratio_v: Option<f64>,
    pub s_ok: Option<bool>,
    pub v_ok: Option<bool>,
    pub m_sim: f64,
    pub s_sim: f64,
    pub v_sim: Option<f64>,
    pub periods: u64,
}

impl LimitsRow {
    pub fn problem1(p: u32, beta1: f64, beta2: f64, m: f64, s: f64, orbit: &SimulatedOrbit) -> Self {
        Self {
            problem: "periodic1",
            p,
            beta1,
            beta2,
            m_limit: m,
            s_limit: s,
            v_limit: None,
            s_plus: None,
            s_minus: None,
            v_plus: None,
            v_minus: None,
            ratio_s: None,
            ratio_v: None,
            s_ok: None,
            v_ok: None,
            m_sim: orbit.m[0],
            s_sim: orbit.s[0],
            v_sim: None,
            periods: orbit.periods_run,
        }
    }

    pub fn problem2(rep: &LimitReport, verdict: &RatioVerdict, orbit: &SimulatedOrbit) -> Self {
        Self {
            problem: "sparse2",
            p: rep.p,
            beta1: rep.beta1,
            beta2: rep.beta2,
            m_limit: rep.m_inf,
            s_limit: rep.s_inf,
            v_limit: Some(rep.v_inf),
            s_plus: Some(rep.s_plus),
            s_minus: Some(rep.s_minus),
            v_plus: Some(rep.v_plus),
            v_minus: Some(rep.v_minus),
            ratio_s: Some(verdict.ratio_s),
            ratio_v: Some(verdict.ratio_v),
            s_ok: Some(verdict.s_ok),
            v_ok: Some(verdict.v_ok),
            m_sim: orbit.m[0],
            s_sim: orbit.s[0],
            v_sim: Some(orbit.v[0]),
            periods: orbit.periods_run,
        }
    }
}

pub fn limits_csv(rows: &[LimitsRow], seed: u64, config_json: &str) -> String {
    let mut out = csv_preamble("limits", seed, config_json);
    out.push_str(
        "problem,P,beta1,beta2,m_limit,s_limit,v_limit,s_plus,s_minus,v_plus,v_minus,ratio_s,ratio_v,s_ok,v_ok,m_sim,s_sim,v_sim,m_abs_err,s_abs_err,periods\n",
    );
    for r in rows {
        let flag = |b: Option<bool>| b.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.problem,
            r.p,
            r.beta1,
            r.beta2,
            r.m_limit,
            r.s_limit,
            opt(r.v_limit),
            opt(r.s_plus),
            opt(r.s_minus),
            opt(r.v_plus),
            opt(r.v_minus),
            opt(r.ratio_s),
            opt(r.ratio_v),
            flag(r.s_ok),
            flag(r.v_ok),
            r.m_sim,
            r.s_sim,
            opt(r.v_sim),
            (r.m_limit - r.m_sim).abs(),
            (r.s_limit - r.s_sim).abs(),
            r.periods
        ));
    }
    out
}

pub fn rate_csv(report: &RateReport, seed: u64, config_json: &str) -> String {
    let mut out = csv_preamble("rate", seed, config_json);
    out.push_str("T,mean_grad_sq\n");
    for (t, y) in report.t_values.iter().zip(&report.mean_grad_sq) {
        out.push_str(&format!("{t},{y}\n"));
    }
    out
}

pub fn denom_csv(traces: &[DenomTrace], seed: u64, config_json: &str) -> String {
    let mut out = csv_preamble("mlp", seed, config_json);
    out.push_str("step,mean_second,loss,variant\n");
    for trace in traces {
        for p in &trace.points {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.step, p.mean_second, p.loss, trace.variant
            ));
        }
    }
    out
}

pub fn harmonic_csv(checks: &[HarmonicCheck], seed: u64, config_json: &str) -> String {
    let mut out = csv_preamble("harmonic", seed, config_json);
    out.push_str("N,eta,exact,approx,abs_err,rel_err\n");
    for c in checks {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.n,
            c.eta,
            c.exact,
            c.approx,
            c.abs_err,
            c.rel_err()
        ));
    }
    out
}

pub fn run_meta_json(
    command: &str,
    seed: u64,
    config: &serde_json::Value,
    wall_secs: f64,
    outputs: &[&str],
) -> String {
    let meta = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "generator": GENERATOR_NAME,
        "seed": seed,
        "config": config,
        "wall_time_secs": wall_secs,
        "outputs": outputs,
    });
    serde_json::to_string_pretty(&meta).expect("meta serialization")
}

/// Parsed CSV: comment lines (leading '#'), header names, string cells.
#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub comments: Vec<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Malformed(format!("missing column '{name}'")))
    }

    pub fn f64_cell(&self, row: &[String], col: usize) -> Result<f64> {
        row.get(col)
            .ok_or_else(|| Error::Malformed("short row".into()))?
            .parse::<f64>()
            .map_err(|e| Error::Malformed(format!("bad number: {e}")))
    }

    /// The `# config: ...` comment payload, if present.
    pub fn config_comment(&self) -> Option<&str> {
        self.comments
            .iter()
            .find_map(|c| c.strip_prefix("# config: "))
    }
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut comments = Vec::new();
    let mut headers = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        if let Some(stripped) = line.strip_prefix('#') {
            let _ = stripped;
            comments.push(line.to_string());
        } else if headers.is_empty() {
            headers = line.split(',').map(str::to_string).collect();
        } else {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    if headers.is_empty() {
        return Err(Error::Malformed("CSV has no header row".into()));
    }
    Ok(ParsedCsv {
        comments,
        headers,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Variant;
    use crate::sweep::Verdict;

    fn cell() -> CellVerdict {
        CellVerdict {
            variant: Variant::AcProp,
            p: 3,
            beta2: 0.5,
            beta1: 0.9,
            best_lr: Some(0.1),
            tail_error: 0.001,
            verdict: Verdict::Converge,
        }
    }

    #[test]
    fn sweep_csv_round_trips_through_parser() {
        let text = sweep_csv(&[cell()], 42, "{\"k\":1}");
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.rows.len(), 1);
        let p = parsed.column("P").unwrap();
        assert_eq!(parsed.rows[0][p], "3");
        assert_eq!(parsed.config_comment(), Some("{\"k\":1}"));
        assert!(text.contains("# generator: chacha8"));
        assert!(text.contains("# schema_version: 1"));
    }

    #[test]
    fn empty_optional_cells_stay_empty() {
        let mut c = cell();
        c.best_lr = None;
        let text = sweep_csv(&[c], 0, "{}");
        let parsed = parse_csv(&text).unwrap();
        let col = parsed.column("best_lr").unwrap();
        assert_eq!(parsed.rows[0][col], "");
    }

    #[test]
    fn meta_json_is_valid_json() {
        let meta = run_meta_json("sweep", 7, &serde_json::json!({"a": 1}), 0.5, &["sweep.csv"]);
        let v: serde_json::Value = serde_json::from_str(&meta).unwrap();
        assert_eq!(v["seed"], 7);
        assert_eq!(v["schema_version"], 1);
    }
}
