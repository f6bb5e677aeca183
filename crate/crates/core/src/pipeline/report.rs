//! Report emission: CSV tables, `audit.json`, `summary.txt`, `timings.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::GroupReport;
use crate::popularity::{Basis, Tier, UserGroup};
use crate::recommenders::ModelSpec;

use super::{AlgorithmOutcome, AuditReport, Correlation, Outcome};

/// Version of the `audit.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

fn num(x: f64) -> String {
    (x + 0.0).to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        let mut t = Self {
            path: dir.join(name),
            writer: csv::Writer::from_writer(Vec::new()),
        };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<()> {
        self.writer
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .map_err(|e| Error::io(&self.path, e.into()))
    }

    fn finish(self, written: &mut Vec<PathBuf>) -> Result<()> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| Error::io(&self.path, std::io::Error::other(e.to_string())))?;
        write_file(&self.path, &bytes)?;
        written.push(self.path);
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn tier(t: Tier) -> String {
    t.as_str().to_string()
}

fn group(g: UserGroup) -> String {
    g.as_str().to_string()
}

fn group_rows(t: &mut Table, basis: Basis, groups: &[GroupReport]) -> Result<()> {
    for g in groups {
        t.row([
            basis.to_string(),
            group(g.group),
            g.members.to_string(),
            num(g.app),
            num(g.arp),
            num(g.pl),
            num(g.mean_user_pl),
            num(g.upd),
        ])?;
    }
    Ok(())
}

fn correlation_row(label: &str, c: &Correlation) -> Vec<String> {
    vec![
        label.to_string(),
        c.method.as_str().to_string(),
        c.result.x.clone(),
        c.result.y.clone(),
        c.result.n.to_string(),
        opt(c.result.rho),
        c.result.null_reason.clone().unwrap_or_default(),
    ]
}

fn spec_fields(s: &ModelSpec) -> Vec<String> {
    let p = &s.params;
    vec![
        p.k.to_string(),
        serde_plain(&p.similarity),
        serde_plain(&p.scoring),
        p.factors.to_string(),
        num(p.learn_rate),
        num(p.reg),
        p.epochs.to_string(),
    ]
}

fn serde_plain<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

const SPEC_COLUMNS: [&str; 7] = ["k", "similarity", "scoring", "factors", "learn_rate", "reg", "epochs"];

/// Write every CSV table derivable from `report`. Recommendation lists are
/// only available on a report fresh from the pipeline.
fn write_tables(report: &AuditReport, dir: &Path, with_lists: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();

    let mut t = Table::new(dir, "dataset_stats.csv", &["split", "users", "items", "interactions", "density"])?;
    for (name, s) in [
        ("all", &report.stats.dataset),
        ("train", &report.stats.train),
        ("test", &report.stats.test),
    ] {
        t.row([
            name.to_string(),
            s.users.to_string(),
            s.items.to_string(),
            s.interactions.to_string(),
            num(s.density),
        ])?;
    }
    t.finish(&mut out)?;

    let mut t = Table::new(dir, "item_partition.csv", &["item", "rank", "count", "pop", "group"])?;
    for r in &report.items {
        t.row([r.item.clone(), r.rank.to_string(), r.count.to_string(), num(r.pop), tier(r.tier)])?;
    }
    t.finish(&mut out)?;

    let mut t = Table::new(dir, "genre_partition.csv", &["genre", "rank", "mass", "share", "group"])?;
    for r in &report.genres {
        t.row([r.genre.clone(), r.rank.to_string(), num(r.mass), num(r.share), tier(r.tier)])?;
    }
    t.finish(&mut out)?;

    let mut t = Table::new(
        dir,
        "user_groups.csv",
        &[
            "user", "basis", "group", "p_H", "p_M", "p_T", "PI", "diversity", "APP", "genre_APP", "profile_size",
        ],
    )?;
    for u in &report.users {
        for (basis, g, r) in [
            (Basis::Item, u.item_group, u.item_ratios),
            (Basis::Genre, u.genre_group, u.genre_ratios),
        ] {
            t.row([
                u.user.clone(),
                basis.to_string(),
                group(g),
                num(r.0[0]),
                num(r.0[1]),
                num(r.0[2]),
                num(u.inconsistency),
                num(u.diversity),
                num(u.app),
                num(u.genre_app),
                u.profile_size.to_string(),
            ])?;
        }
    }
    t.finish(&mut out)?;

    let mut t = Table::new(dir, "overlap_matrix.csv", &["item_group", "genre_group", "overlap_pct"])?;
    for a in UserGroup::ALL {
        for b in UserGroup::ALL {
            t.row([group(a), group(b), num(report.overlap.get(a, b))])?;
        }
    }
    t.finish(&mut out)?;

    let mut t = Table::new(dir, "profile_popularity.csv", &["user", "item_group", "profile_size", "APP"])?;
    for u in &report.users {
        t.row([u.user.clone(), group(u.item_group), u.profile_size.to_string(), num(u.app)])?;
    }
    t.finish(&mut out)?;

    let mut t = Table::new(
        dir,
        "profile_groups.csv",
        &["basis", "group", "members", "mean_profile_size", "mean_APP"],
    )?;
    for p in &report.profile_groups {
        t.row([
            p.basis.to_string(),
            group(p.group),
            p.members.to_string(),
            num(p.mean_profile_size),
            num(p.mean_app),
        ])?;
    }
    t.finish(&mut out)?;

    let corr_header = ["algorithm", "method", "x", "y", "n", "rho", "null_reason"];
    let mut t = Table::new(dir, "profile_correlations.csv", &corr_header)?;
    for c in &report.profile_correlations {
        t.row(correlation_row("all", c))?;
    }
    t.finish(&mut out)?;

    if report.algorithms.is_empty() {
        return Ok(out);
    }

    let mut header = vec!["algorithm", "status"];
    header.extend(SPEC_COLUMNS);
    header.extend(["seed", "error"]);
    let mut models = Table::new(dir, "models.csv", &header)?;
    let mut acc = Table::new(
        dir,
        "accuracy.csv",
        &[
            "algorithm",
            "precision",
            "recall",
            "ndcg",
            "evaluated_users",
            "excluded_users",
        ],
    )?;
    let mut sweep = Table::new(dir, "alpha_sweep.csv", &["algorithm", "alpha", "users", "mean_PL", "mean_UPD"])?;
    let mut corr = Table::new(dir, "correlations.csv", &corr_header)?;
    for o in &report.algorithms {
        let name = o.algorithm.as_str();
        let (status, error) = match &o.outcome {
            Outcome::Completed(_) => ("completed", String::new()),
            Outcome::Failed { error } => ("failed", error.clone()),
        };
        let mut fields = vec![name.to_string(), status.to_string()];
        fields.extend(spec_fields(&o.spec));
        fields.extend([o.spec.seed.to_string(), error]);
        models.row(fields)?;
        if let Some(g) = &o.grid {
            write_grid(dir, o, g, &mut out)?;
        }
        let Some(a) = o.audit() else { continue };
        acc.row([
            name.to_string(),
            num(a.accuracy.precision),
            num(a.accuracy.recall),
            num(a.accuracy.ndcg),
            a.accuracy.evaluated_users.to_string(),
            a.accuracy.excluded_users.to_string(),
        ])?;
        for r in &a.alpha_sweep {
            sweep.row([name.to_string(), num(r.alpha), r.users.to_string(), opt(r.mean_pl), opt(r.mean_upd)])?;
        }
        for c in &a.correlations {
            corr.row(correlation_row(name, c))?;
        }

        let mut t = Table::new(
            dir,
            &format!("user_metrics_{name}.csv"),
            &[
                "user",
                "item_group",
                "genre_group",
                "APP",
                "ARP",
                "PL",
                "UPD",
                "q_H",
                "q_M",
                "q_T",
                "PI",
                "diversity",
                "profile_size",
                "precision",
                "recall",
                "ndcg",
            ],
        )?;
        for u in &a.users {
            t.row([
                u.user.clone(),
                group(u.item_group),
                group(u.genre_group),
                num(u.app),
                num(u.arp),
                num(u.pl),
                num(u.upd),
                num(u.recs_ratios.0[0]),
                num(u.recs_ratios.0[1]),
                num(u.recs_ratios.0[2]),
                num(u.inconsistency),
                num(u.diversity),
                u.profile_size.to_string(),
                opt(u.precision),
                opt(u.recall),
                opt(u.ndcg),
            ])?;
        }
        t.finish(&mut out)?;

        let mut t = Table::new(
            dir,
            &format!("group_metrics_{name}.csv"),
            &["basis", "group", "members", "APP", "ARP", "PL", "mean_user_PL", "UPD"],
        )?;
        group_rows(&mut t, Basis::Item, &a.item_groups)?;
        group_rows(&mut t, Basis::Genre, &a.genre_groups)?;
        t.finish(&mut out)?;

        if with_lists {
            let mut t = Table::new(dir, &format!("recs_{name}.csv"), &["user", "rank", "item", "score"])?;
            for l in &a.lists {
                for (rank, (item, score)) in l.items.iter().zip(&l.scores).enumerate() {
                    t.row([l.user.clone(), (rank + 1).to_string(), item.clone(), num(*score)])?;
                }
            }
            t.finish(&mut out)?;
        }
    }
    for t in [models, acc, sweep, corr] {
        t.finish(&mut out)?;
    }
    Ok(out)
}

fn write_grid(
    dir: &Path,
    o: &AlgorithmOutcome,
    g: &crate::recommenders::GridSearchResult,
    out: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut header: Vec<&str> = SPEC_COLUMNS.to_vec();
    header.extend(["precision", "recall", "ndcg", "selected", "error"]);
    let mut t = Table::new(dir, &format!("grid_{}.csv", o.algorithm.as_str()), &header)?;
    for p in &g.points {
        let mut f = spec_fields(&p.spec);
        match &p.accuracy {
            Some(a) => f.extend([num(a.precision), num(a.recall), num(a.ndcg)]),
            None => f.extend([String::new(), String::new(), String::new()]),
        }
        f.push((p.spec == g.best).to_string());
        f.push(p.error.clone().unwrap_or_default());
        t.row(f)?;
    }
    t.finish(out)
}

fn summary(report: &AuditReport) -> String {
    let mut s = String::new();
    let st = &report.stats;
    let _ = writeln!(s, "popularity audit (schema {})", report.manifest.schema_version);
    let _ = writeln!(s, "dataset: {}", st.dataset);
    let _ = writeln!(s, "train:   {}", st.train);
    let _ = writeln!(s, "test:    {}", st.test);
    let _ = writeln!(
        s,
        "seed {}; dropped {} items without genres and {} users with too few ratings",
        report.manifest.config.seed, report.manifest.dropped_items, report.manifest.dropped_users
    );
    let count = |t: Tier| report.items.iter().filter(|r| r.tier == t).count();
    let _ = writeln!(
        s,
        "item tiers H/M/T: {}/{}/{}; genres: {}",
        count(Tier::Head),
        count(Tier::Mid),
        count(Tier::Tail),
        report.genres.len()
    );
    let _ = writeln!(s, "\nprofile groups:");
    for p in &report.profile_groups {
        let _ = writeln!(
            s,
            "  {:5} {:11} n={:5} mean size {:8.2} mean APP {:.6}",
            p.basis.as_str(),
            p.group.as_str(),
            p.members,
            p.mean_profile_size,
            p.mean_app
        );
    }
    let _ = writeln!(s, "\noverlap item group -> genre group (%):");
    for a in UserGroup::ALL {
        let cells: Vec<String> = UserGroup::ALL
            .iter()
            .map(|&b| format!("{:6.2}", report.overlap.get(a, b)))
            .collect();
        let _ = writeln!(s, "  {:11} {}", a.as_str(), cells.join(" "));
    }
    if report.algorithms.is_empty() {
        return s;
    }
    let _ = writeln!(s, "\naccuracy@{}:", report.manifest.config.list_size);
    for o in &report.algorithms {
        match &o.outcome {
            Outcome::Completed(a) => {
                let _ = writeln!(
                    s,
                    "  {:9} P {:.4}  R {:.4}  nDCG {:.4}",
                    o.algorithm.as_str(),
                    a.accuracy.precision,
                    a.accuracy.recall,
                    a.accuracy.ndcg
                );
            }
            Outcome::Failed { error } => {
                let _ = writeln!(s, "  {:9} FAILED: {error}", o.algorithm.as_str());
            }
        }
    }
    for basis in [Basis::Item, Basis::Genre] {
        let _ = writeln!(s, "\ngroup PL / UPD ({basis} basis), Blockbuster Diverse Niche:");
        for o in &report.algorithms {
            let Some(a) = o.audit() else { continue };
            let g = a.groups(basis);
            let _ = writeln!(
                s,
                "  {:9} PL {:8.4} {:8.4} {:8.4}   UPD {:.4} {:.4} {:.4}",
                o.algorithm.as_str(),
                g[0].pl,
                g[1].pl,
                g[2].pl,
                g[0].upd,
                g[1].upd,
                g[2].upd
            );
        }
    }
    let _ = writeln!(s, "\ncorrelations with diversity (pearson / spearman):");
    for o in &report.algorithms {
        let Some(a) = o.audit() else { continue };
        let f = |c: Option<&crate::metrics::CorrelationResult>| {
            c.and_then(|c| c.rho).map_or("null".to_string(), |r| format!("{r:.4}"))
        };
        use super::CorrelationMethod::{Pearson, Spearman};
        let _ = writeln!(
            s,
            "  {:9} PL {} / {}   UPD {} / {}",
            o.algorithm.as_str(),
            f(a.correlation(Pearson, "pl")),
            f(a.correlation(Spearman, "pl")),
            f(a.correlation(Pearson, "upd")),
            f(a.correlation(Spearman, "upd"))
        );
    }
    s
}

/// Write all reports into `dir`. Returns the written paths.
pub fn emit_reports(report: &AuditReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = write_tables(report, dir, true)?;
    let json = dir.join("audit.json");
    write_file(&json, serde_json::to_string_pretty(report)?.as_bytes())?;
    out.push(json);
    let text = dir.join("summary.txt");
    write_file(&text, summary(report).as_bytes())?;
    out.push(text);
    let timings = dir.join("timings.json");
    let map: serde_json::Map<String, serde_json::Value> = report
        .timings
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::Value::from(*v)))
        .collect();
    write_file(&timings, serde_json::to_string_pretty(&map)?.as_bytes())?;
    out.push(timings);
    Ok(out)
}

/// Re-emit the CSV tables (all but the recommendation lists) from a report
/// read back from `audit.json`.
pub fn emit_plot_data(report: &AuditReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    write_tables(report, dir.as_ref(), false)
}

pub fn read_audit_json(path: impl AsRef<Path>) -> Result<AuditReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .pointer("/manifest/schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no schema version", path.display())))?;
    if version != u64::from(SCHEMA_VERSION) {
        return Err(Error::InvalidArgument(format!(
            "{} has schema version {version}, expected {SCHEMA_VERSION}",
            path.display()
        )));
    }
    Ok(serde_json::from_value(value)?)
}
