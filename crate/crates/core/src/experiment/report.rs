//! Result tables and their files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ensemble::rank_by_average;
use crate::error::{Error, Result};
use crate::stats::{wilcoxon_signed_rank, Wilcoxon};

/// Fused-ensemble outcome on one test fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldResult {
    pub dataset: String,
    pub method: String,
    pub fold: usize,
    pub correct: usize,
    pub total: usize,
}

/// Outcome of one ensemble member on its test fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberResult {
    pub dataset: String,
    pub method: String,
    pub fold: usize,
    pub member: usize,
    pub seed: u64,
    /// Slot activations joined by `/`.
    pub architecture: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub seed: u64,
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub folds: Vec<FoldResult>,
    pub members: Vec<MemberResult>,
    /// Configuration text the run was started from, if known.
    pub config_text: Option<String>,
}

pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const PVALUES_FILE: &str = "pvalues.csv";
pub const PVALUES_ONE_SIDED_FILE: &str = "pvalues_one_sided.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RAW_FILE: &str = "raw.csv";
pub const MEMBERS_FILE: &str = "members.csv";

const CONFIG_MARKER: &str = "--- config ---";

impl ExperimentReport {
    pub fn new(
        seed: u64,
        datasets: Vec<String>,
        methods: Vec<String>,
        folds: Vec<FoldResult>,
        members: Vec<MemberResult>,
    ) -> Self {
        Self {
            seed,
            datasets,
            methods,
            folds,
            members,
            config_text: None,
        }
    }

    /// Accuracy of `method` on `dataset` in percent, averaged over test folds.
    pub fn accuracy(&self, method: &str, dataset: &str) -> Option<f64> {
        let accs: Vec<f64> = self
            .folds
            .iter()
            .filter(|f| f.method == method && f.dataset == dataset)
            .map(|f| 100.0 * f.correct as f64 / f.total as f64)
            .collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    /// `[method][dataset]` accuracies in percent.
    pub fn accuracy_matrix(&self) -> Result<Vec<Vec<f64>>> {
        self.methods
            .iter()
            .map(|m| {
                self.datasets
                    .iter()
                    .map(|d| {
                        self.accuracy(m, d)
                            .ok_or_else(|| Error::contract(format!("no results for method {m} on dataset {d}")))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn averages(&self) -> Result<Vec<f64>> {
        Ok(self
            .accuracy_matrix()?
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect())
    }

    pub fn ranks(&self) -> Result<Vec<usize>> {
        Ok(rank_by_average(&self.averages()?))
    }

    /// Signed-rank test of every row method against every column method over
    /// the per-dataset accuracies; `None` where the test is not applicable.
    pub fn pairwise_tests(&self) -> Result<Vec<Vec<Option<Wilcoxon>>>> {
        let acc = self.accuracy_matrix()?;
        Ok((0..acc.len())
            .map(|i| {
                (0..acc.len())
                    .map(|j| (i != j).then(|| wilcoxon_signed_rank(&acc[i], &acc[j]).ok()).flatten())
                    .collect()
            })
            .collect())
    }

    fn accuracy_csv(&self) -> Result<String> {
        let acc = self.accuracy_matrix()?;
        let avg = self.averages()?;
        let rank = self.ranks()?;
        let mut s = format!("method,{},Avg,Rank\n", self.datasets.join(","));
        for (i, m) in self.methods.iter().enumerate() {
            s.push_str(m);
            for a in &acc[i] {
                let _ = write!(s, ",{a:.2}");
            }
            let _ = writeln!(s, ",{:.2},{}", avg[i], rank[i]);
        }
        Ok(s)
    }

    fn pvalue_csv(&self, one_sided: bool) -> Result<String> {
        let tests = self.pairwise_tests()?;
        let mut s = format!("method,{}\n", self.methods.join(","));
        for (i, m) in self.methods.iter().enumerate() {
            s.push_str(m);
            for (j, t) in tests[i].iter().enumerate() {
                s.push(',');
                match t {
                    Some(w) => {
                        let _ = write!(s, "{:.6}", if one_sided { w.p_greater } else { w.p_two_sided });
                    }
                    None if i != j => s.push_str("NA"),
                    None => {}
                }
            }
            s.push('\n');
        }
        Ok(s)
    }

    fn report_text(&self) -> Result<String> {
        let acc = self.accuracy_matrix()?;
        let avg = self.averages()?;
        let rank = self.ranks()?;
        let mut header = vec!["Method".to_string()];
        header.extend(self.datasets.iter().cloned());
        header.extend(["Avg".to_string(), "Rank".to_string()]);
        let mut rows = vec![header];
        for (i, m) in self.methods.iter().enumerate() {
            let mut row = vec![m.clone()];
            row.extend(acc[i].iter().map(|a| format!("{a:.2}")));
            row.push(format!("{:.2}", avg[i]));
            row.push(rank[i].to_string());
            rows.push(row);
        }
        let mut s = format!("Accuracy (%), master seed {}\n\n", self.seed);
        s.push_str(&aligned(&rows));

        let tests = self.pairwise_tests()?;
        s.push_str("\nWilcoxon signed-rank p-values over datasets (two-sided; row vs column)\n\n");
        let mut prow = vec![std::iter::once("Method".to_string()).chain(self.methods.iter().cloned()).collect()];
        for (i, m) in self.methods.iter().enumerate() {
            let mut row = vec![m.clone()];
            row.extend(tests[i].iter().enumerate().map(|(j, t)| match t {
                Some(w) => format!("{:.4}", w.p_two_sided),
                None if i == j => "-".into(),
                None => "NA".into(),
            }));
            prow.push(row);
        }
        s.push_str(&aligned(&prow));
        if tests.iter().flatten().all(Option::is_none) && self.methods.len() > 1 {
            s.push_str("\nNA: fewer than 5 datasets with differing accuracy.\n");
        }
        Ok(s)
    }

    fn manifest_text(&self) -> String {
        let mut s = format!("stochact {}\n", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "model format version {}", crate::model::MODEL_VERSION);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "datasets = {}", self.datasets.join(" "));
        let _ = writeln!(s, "methods = {}", self.methods.join(" "));
        let _ = writeln!(s, "members = {} (seeds and architectures in {MEMBERS_FILE})", self.members.len());
        if let Some(cfg) = &self.config_text {
            s.push_str(CONFIG_MARKER);
            s.push('\n');
            s.push_str(cfg);
            if !cfg.ends_with('\n') {
                s.push('\n');
            }
        }
        s
    }

    fn raw_csv(&self) -> String {
        let mut s = String::from("dataset,method,fold,correct,total\n");
        for f in &self.folds {
            let _ = writeln!(s, "{},{},{},{},{}", f.dataset, f.method, f.fold, f.correct, f.total);
        }
        s
    }

    fn members_csv(&self) -> String {
        let mut s = String::from("dataset,method,fold,member,seed,architecture,correct,total\n");
        for m in &self.members {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                m.dataset, m.method, m.fold, m.member, m.seed, m.architecture, m.correct, m.total
            );
        }
        s
    }
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
    }
    s
}

/// Writes the accuracy table, both p-value tables, the text report, the
/// manifest and the raw per-fold and per-member results into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(ACCURACY_FILE), report.accuracy_csv()?)?;
    fs::write(dir.join(PVALUES_FILE), report.pvalue_csv(false)?)?;
    fs::write(dir.join(PVALUES_ONE_SIDED_FILE), report.pvalue_csv(true)?)?;
    fs::write(dir.join(REPORT_FILE), report.report_text()?)?;
    fs::write(dir.join(MANIFEST_FILE), report.manifest_text())?;
    fs::write(dir.join(RAW_FILE), report.raw_csv())?;
    fs::write(dir.join(MEMBERS_FILE), report.members_csv())?;
    Ok(())
}

/// Rebuilds a report from the raw files [`emit_report`] wrote into `dir`.
pub fn read_report(dir: &Path) -> Result<ExperimentReport> {
    let raw_path = dir.join(RAW_FILE);
    let raw = fs::read_to_string(&raw_path).map_err(|e| Error::ingest(&raw_path, e.to_string()))?;
    let bad = |line: usize, msg: &str| Error::ingest(&raw_path, format!("line {}: {msg}", line + 1));
    let mut lines = raw.lines().enumerate();
    if lines.next().map(|(_, h)| h) != Some("dataset,method,fold,correct,total") {
        return Err(bad(0, "unexpected header"));
    }
    let (mut datasets, mut methods, mut folds) = (Vec::<String>::new(), Vec::<String>::new(), Vec::new());
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(i, "expected 5 fields"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(i, "bad count"));
        let r = FoldResult {
            dataset: f[0].to_string(),
            method: f[1].to_string(),
            fold: num(f[2])?,
            correct: num(f[3])?,
            total: num(f[4])?,
        };
        if r.total == 0 || r.correct > r.total {
            return Err(bad(i, "inconsistent counts"));
        }
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        folds.push(r);
    }

    let mut members = Vec::new();
    let members_path = dir.join(MEMBERS_FILE);
    if let Ok(text) = fs::read_to_string(&members_path) {
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::ingest(&members_path, format!("line {}: malformed row", i + 1));
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
            members.push(MemberResult {
                dataset: f[0].to_string(),
                method: f[1].to_string(),
                fold: num(f[2])?,
                member: num(f[3])?,
                seed: f[4].parse().map_err(|_| bad())?,
                architecture: f[5].to_string(),
                correct: num(f[6])?,
                total: num(f[7])?,
            });
        }
    }

    let (mut seed, mut config_text) = (0, None);
    if let Ok(text) = fs::read_to_string(dir.join(MANIFEST_FILE)) {
        let (head, cfg) = match text.split_once(&format!("{CONFIG_MARKER}\n")) {
            Some((h, c)) => (h, Some(c.to_string())),
            None => (text.as_str(), None),
        };
        config_text = cfg;
        if let Some(v) = head.lines().find_map(|l| l.strip_prefix("seed = ")) {
            seed = v.trim().parse().map_err(|_| Error::ingest(dir.join(MANIFEST_FILE), "bad seed line"))?;
        }
    }
    let mut report = ExperimentReport::new(seed, datasets, methods, folds, members);
    report.config_text = config_text;
    report.accuracy_matrix()?;
    Ok(report)
}
