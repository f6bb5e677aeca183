//! Acceptance report. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! MovieLens data is read from `$POPAUDIT_DATA_DIR` (default `<workspace>/data`)
//! with `ml-1m/` and `ml-100k/` subdirectories; fetch them with
//! `python3 scripts/fetch_movielens.py`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use popaudit::metrics::{self, jsd, ndcg_at_k, spearman};
use popaudit::pipeline::{self, AuditConfig, AuditReport, CorrelationMethod, DatasetConfig};
use popaudit::popularity::{entropy_bits, partition_items, Basis, GroupRatios, ItemPopularityTable, TierCuts};
use popaudit::recommenders::{Algorithm, BprTriple, MfSample};
use popaudit::{Dataset, Tier, UserGroup};

const ML1M_USERS: usize = 6040;
const ML1M_ITEMS: usize = 3706;
const HEAD_ITEMS: usize = 44;
const HEAD_MASS_MIN: f64 = 0.10;
const COMEDY_DRAMA_MIN: f64 = 0.40;
const ORDER_SEEDS: [u64; 3] = [1, 2, 3];
const PRIMARY_SEED: u64 = 1;
const OVERLAP_NICHE_NICHE: (f64, f64) = (23.0, 8.0);
const OVERLAP_NICHE_BLOCKBUSTER: (f64, f64) = (25.0, 8.0);
const SWEEP_SPEARMAN_MIN: f64 = 0.8;
const RANDOM_PRECISION_MAX: f64 = 0.02;
const PERSONALIZED_OVER_RANDOM: f64 = 10.0;
const ML100K_BUDGET_S: f64 = 180.0;
const ML1M_BUDGET_S: f64 = 1800.0;
const PROPERTY_BUDGET_S: f64 = 60.0;

const PERSONALIZED: [Algorithm; 4] = [Algorithm::BPR, Algorithm::BiasedMF, Algorithm::UserKNN, Algorithm::ItemKNN];

struct Check {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: &'static str, name: &'static str, pass: bool, detail: String) -> Check {
    Check { id, name, pass, detail }
}

fn data_dir() -> PathBuf {
    std::env::var_os("POPAUDIT_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn missing(dir: &Path) -> String {
    format!(
        "no MovieLens files in {}; run `python3 scripts/fetch_movielens.py` or set POPAUDIT_DATA_DIR",
        dir.display()
    )
}

struct Audited {
    report: AuditReport,
    seconds: f64,
}

fn audit(dataset: &DatasetConfig, data: &Dataset, seed: u64) -> Result<Audited, String> {
    let mut cfg = AuditConfig::new(dataset.clone());
    cfg.seed = seed;
    let start = Instant::now();
    let report = pipeline::audit_dataset(&cfg, data).map_err(|e| e.to_string())?;
    Ok(Audited {
        report,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn model(report: &AuditReport, a: Algorithm) -> Result<&pipeline::ModelAudit, String> {
    let o = report.algorithm(a).ok_or_else(|| format!("{a} missing"))?;
    o.audit().ok_or_else(|| match &o.outcome {
        pipeline::Outcome::Failed { error } => format!("{a} failed: {error}"),
        pipeline::Outcome::Completed(_) => unreachable!(),
    })
}

fn fmt3(v: [f64; 3]) -> String {
    format!("{:.4}/{:.4}/{:.4}", v[0], v[1], v[2])
}

fn rises_toward_niche(v: [f64; 3]) -> bool {
    v[2] > v[1] && v[1] > v[0]
}

fn group_values(m: &pipeline::ModelAudit, basis: Basis, f: fn(&metrics::GroupReport) -> f64) -> [f64; 3] {
    UserGroup::ALL.map(|g| f(m.group(basis, g)))
}

fn within(v: f64, (center, tol): (f64, f64)) -> bool {
    (v - center).abs() <= tol
}

fn ml1m_checks(runs: &[(u64, Audited)], data: &Dataset, checks: &mut Vec<Check>) {
    let stats = data.stats();
    checks.push(check(
        "A01",
        "dataset facts",
        stats.users == ML1M_USERS && stats.items == ML1M_ITEMS,
        format!("users={} items={} interactions={} (count reported only)", stats.users, stats.items, stats.interactions),
    ));

    let primary = &runs.iter().find(|(s, _)| *s == PRIMARY_SEED).unwrap().1.report;
    let head = primary.head_mass(HEAD_ITEMS);
    checks.push(check(
        "A02",
        "long-tail head mass",
        head > HEAD_MASS_MIN,
        format!("top {HEAD_ITEMS} items carry {:.2}% of train interactions", 100.0 * head),
    ));

    let cd = primary.genre_share("Comedy").unwrap_or(0.0) + primary.genre_share("Drama").unwrap_or(0.0);
    checks.push(check(
        "A03",
        "genre concentration",
        cd > COMEDY_DRAMA_MIN,
        format!("Comedy+Drama carry {:.2}% of fractional genre mass", 100.0 * cd),
    ));

    let mut pl_ok = true;
    let mut upd_ok = true;
    let mut pl_detail = Vec::new();
    let mut upd_detail = Vec::new();
    for (seed, run) in runs {
        for a in PERSONALIZED.iter().copied().chain([Algorithm::Popular]) {
            match model(&run.report, a) {
                Ok(m) => {
                    let pl = group_values(m, Basis::Item, |g| g.pl);
                    if !rises_toward_niche(pl) {
                        pl_ok = false;
                        pl_detail.push(format!("seed {seed} {a} B/D/N={}", fmt3(pl)));
                    }
                    if a.is_personalized() {
                        let upd = group_values(m, Basis::Item, |g| g.upd);
                        if !rises_toward_niche(upd) {
                            upd_ok = false;
                            upd_detail.push(format!("seed {seed} {a} B/D/N={}", fmt3(upd)));
                        }
                    }
                }
                Err(e) => {
                    pl_ok = false;
                    upd_ok = false;
                    pl_detail.push(format!("seed {seed}: {e}"));
                }
            }
        }
    }
    let seeds = format!("{ORDER_SEEDS:?}");
    let pl_summary = model(primary, Algorithm::BPR)
        .map(|m| format!("BPR B/D/N={}", fmt3(group_values(m, Basis::Item, |g| g.pl))))
        .unwrap_or_default();
    checks.push(check(
        "A04",
        "PL ordering Niche > Diverse > Blockbuster",
        pl_ok,
        if pl_ok {
            format!("5 models x seeds {seeds}; seed {PRIMARY_SEED} {pl_summary}")
        } else {
            pl_detail.join("; ")
        },
    ));
    let upd_summary = model(primary, Algorithm::BPR)
        .map(|m| format!("BPR B/D/N={}", fmt3(group_values(m, Basis::Item, |g| g.upd))))
        .unwrap_or_default();
    checks.push(check(
        "A05",
        "UPD ordering Niche > Diverse > Blockbuster",
        upd_ok,
        if upd_ok {
            format!("4 personalized models x seeds {seeds}; seed {PRIMARY_SEED} {upd_summary}")
        } else {
            upd_detail.join("; ")
        },
    ));

    let spread = |v: [f64; 3]| v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min);
    let mut att_ok = true;
    let mut att = Vec::new();
    for a in PERSONALIZED {
        match model(primary, a) {
            Ok(m) => {
                let item = spread(group_values(m, Basis::Item, |g| g.pl));
                let genre = spread(group_values(m, Basis::Genre, |g| g.pl));
                att_ok &= genre < item;
                att.push(format!("{a} {genre:.3}<{item:.3}"));
            }
            Err(e) => {
                att_ok = false;
                att.push(e);
            }
        }
    }
    checks.push(check("A06", "genre-basis PL attenuation", att_ok, format!("PL spread genre<item: {}", att.join(", "))));

    let nn = primary.overlap.get(UserGroup::Niche, UserGroup::Niche);
    let nb = primary.overlap.get(UserGroup::Niche, UserGroup::Blockbuster);
    checks.push(check(
        "A07",
        "item/genre group overlap",
        within(nn, OVERLAP_NICHE_NICHE) && within(nb, OVERLAP_NICHE_BLOCKBUSTER),
        format!(
            "Niche^I&Niche^G={nn:.2}% (23+-8), Niche^I&Blockbuster^G={nb:.2}% (25+-8)"
        ),
    ));

    let mut sweep_ok = true;
    let mut sweep = Vec::new();
    for a in Algorithm::ALL.into_iter().filter(|&a| a != Algorithm::Random) {
        match model(primary, a) {
            Ok(m) => {
                let (xs, ys): (Vec<f64>, Vec<f64>) =
                    m.alpha_sweep.iter().filter_map(|r| r.mean_upd.map(|u| (r.alpha, u))).unzip();
                let rho = spearman("alpha", &xs, "mean_upd", &ys).rho;
                sweep_ok &= rho.is_some_and(|r| r >= SWEEP_SPEARMAN_MIN);
                sweep.push(format!("{a} {}", rho.map_or("null".into(), |r| format!("{r:.2}"))));
            }
            Err(e) => {
                sweep_ok = false;
                sweep.push(e);
            }
        }
    }
    let buckets = model(primary, Algorithm::Popular).map_or_else(
        |e| e,
        |m| m.alpha_sweep.iter().map(|r| format!("{}:{}", r.alpha, r.users)).collect::<Vec<_>>().join(" "),
    );
    checks.push(check(
        "A08",
        "alpha-sweep UPD trend",
        sweep_ok,
        format!("spearman(alpha, UPD): {}; Niche users per alpha {buckets}", sweep.join(", ")),
    ));

    let mut corr_ok = true;
    let mut corr = Vec::new();
    for a in [Algorithm::BPR, Algorithm::BiasedMF, Algorithm::UserKNN, Algorithm::Popular] {
        match model(primary, a) {
            Ok(m) => {
                let pl = m.correlation(CorrelationMethod::Pearson, "pl").and_then(|c| c.rho);
                let upd = m.correlation(CorrelationMethod::Pearson, "upd").and_then(|c| c.rho);
                corr_ok &= pl.is_some_and(|r| r > 0.0) && upd.is_some_and(|r| r > 0.0);
                let show = |r: Option<f64>| r.map_or("null".into(), |r| format!("{r:.3}"));
                corr.push(format!("{a} PL {} UPD {}", show(pl), show(upd)));
            }
            Err(e) => {
                corr_ok = false;
                corr.push(e);
            }
        }
    }
    checks.push(check("A09", "diversity correlations", corr_ok, format!("pearson: {}", corr.join(", "))));

    let size = |g| primary.profile_group(Basis::Item, g).map_or(f64::NAN, |p| p.mean_profile_size);
    let (b, n) = (size(UserGroup::Blockbuster), size(UserGroup::Niche));
    checks.push(check(
        "A10",
        "profile size Blockbuster < Niche",
        b < n,
        format!("mean train profile: Blockbuster {b:.1}, Niche {n:.1}"),
    ));

    let mut acc_ok = true;
    let mut acc = Vec::new();
    match model(primary, Algorithm::Random) {
        Ok(random) => {
            let rp = random.accuracy.precision;
            acc_ok &= rp < RANDOM_PRECISION_MAX;
            acc.push(format!("Random {rp:.4}"));
            let mut best = (Algorithm::Random, rp);
            for a in PERSONALIZED.iter().copied().chain([Algorithm::Popular]) {
                match model(primary, a) {
                    Ok(m) => {
                        let p = m.accuracy.precision;
                        if p > best.1 {
                            best = (a, p);
                        }
                        if a.is_personalized() {
                            acc_ok &= p >= PERSONALIZED_OVER_RANDOM * rp;
                        }
                        acc.push(format!("{a} {p:.4}"));
                    }
                    Err(e) => {
                        acc_ok = false;
                        acc.push(e);
                    }
                }
            }
            acc_ok &= best.0 == Algorithm::ItemKNN;
            acc.push(format!("top={}", best.0));
        }
        Err(e) => {
            acc_ok = false;
            acc.push(e);
        }
    }
    checks.push(check("A11", "accuracy sanity P@10", acc_ok, acc.join(", ")));
}

fn random_simplex(rng: &mut impl Rng) -> GroupRatios {
    loop {
        let w = [rng.gen_range(0..50) as f64, rng.gen_range(0..50) as f64, rng.gen_range(0..50) as f64];
        if let Some(r) = GroupRatios::from_weights(w) {
            return r;
        }
    }
}

fn property_suite() -> Result<String, String> {
    let mut rng = popaudit::seed::rng(0x5eed);

    for _ in 0..10_000 {
        let (p, q) = (random_simplex(&mut rng), random_simplex(&mut rng));
        let d = jsd(&p, &q).map_err(|e| e.to_string())?;
        let back = jsd(&q, &p).map_err(|e| e.to_string())?;
        let same = jsd(&p, &p).map_err(|e| e.to_string())?;
        let equal = p.0.iter().zip(&q.0).all(|(a, b)| (a - b).abs() < 1e-12);
        if (d - back).abs() > 1e-12 || !(0.0..=1.0).contains(&d) || same.abs() > 1e-12 || (d == 0.0) != equal {
            return Err(format!("JSD property violated for {:?} {:?}", p.0, q.0));
        }
    }

    for _ in 0..2_000 {
        let k = rng.gen_range(1..6);
        let counts: Vec<f64> = (0..k).map(|_| rng.gen_range(0..5) as f64).collect();
        let h = entropy_bits(&counts);
        let nonzero = counts.iter().filter(|&&c| c > 0.0).count();
        if h < 0.0 || h > (k as f64).log2() + 1e-12 || (h == 0.0) != (nonzero <= 1) {
            return Err(format!("entropy property violated for {counts:?}"));
        }
    }

    for round in 0..200 {
        let n_users = rng.gen_range(3..30);
        let records: Vec<(String, String, f64, i64)> = (0..rng.gen_range(20..300))
            .map(|t| {
                (format!("u{}", rng.gen_range(0..n_users)), format!("i{}", rng.gen_range(0..60)), 3.0, t)
            })
            .collect();
        let data = Dataset::from_records(records).map_err(|e| e.to_string())?;
        let table = ItemPopularityTable::new(&data).map_err(|e| e.to_string())?;
        let n = table.ranking().len();
        if n < 5 {
            continue;
        }
        let p = partition_items(&table, TierCuts::default()).map_err(|e| e.to_string())?;
        let (h, t) = TierCuts::default().sizes(n);
        let mut seen = HashSet::new();
        let covered = Tier::ALL.iter().flat_map(|&t| p.members(t).iter()).all(|&i| seen.insert(i));
        if !covered || seen.len() != n || p.members(Tier::Head).len() != h || p.members(Tier::Tail).len() != t {
            return Err(format!("partition invariant violated in round {round}"));
        }
    }

    for _ in 0..1_000 {
        let k = rng.gen_range(1..15);
        let mut list: Vec<u32> = (0..60).collect();
        for i in (1..list.len()).rev() {
            list.swap(i, rng.gen_range(0..=i));
        }
        list.truncate(rng.gen_range(0..25));
        let relevant: HashSet<u32> = (0..rng.gen_range(0..20)).map(|_| rng.gen_range(0..60)).collect();
        let dcg: f64 = (0..list.len().min(k)).filter(|&r| relevant.contains(&list[r])).map(|r| 1.0 / (r as f64 + 2.0).log2()).sum();
        let idcg: f64 = (0..relevant.len().min(k)).map(|r| 1.0 / (r as f64 + 2.0).log2()).sum();
        let oracle = if idcg == 0.0 { 0.0 } else { dcg / idcg };
        if (ndcg_at_k(&list, &relevant, k) - oracle).abs() > 1e-12 {
            return Err("nDCG differs from the brute-force oracle".into());
        }
    }

    const H: f64 = 1e-6;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let f = rng.gen_range(1..8);
        let mut v = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let s = MfSample { mu: 3.5, b_u: v(1)[0], b_i: v(1)[0], p_u: v(f), q_i: v(f), rating: 4.0 };
        let t = BprTriple { p_u: v(f), q_i: v(f), q_j: v(f), b_i: v(1)[0], b_j: v(1)[0] };
        let reg = 0.05;
        let g = s.gradient(reg);
        let gb = t.gradient(reg);
        for j in 0..f {
            let mut hi = s.clone();
            let mut lo = s.clone();
            hi.p_u[j] += H;
            lo.p_u[j] -= H;
            worst = worst.max(rel(g.p_u[j], (hi.loss(reg) - lo.loss(reg)) / (2.0 * H)));
            let mut hi = t.clone();
            let mut lo = t.clone();
            hi.q_j[j] += H;
            lo.q_j[j] -= H;
            worst = worst.max(rel(gb.q_j[j], (hi.objective(reg) - lo.objective(reg)) / (2.0 * H)));
        }
        let (mut hi, mut lo) = (s.clone(), s.clone());
        hi.b_i += H;
        lo.b_i -= H;
        worst = worst.max(rel(g.b_i, (hi.loss(reg) - lo.loss(reg)) / (2.0 * H)));
        let (mut hi, mut lo) = (t.clone(), t.clone());
        hi.b_i += H;
        lo.b_i -= H;
        worst = worst.max(rel(gb.b_i, (hi.objective(reg) - lo.objective(reg)) / (2.0 * H)));
    }
    if worst > 1e-4 {
        return Err(format!("finite-difference gradient error {worst:.2e} exceeds 1e-4"));
    }

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini/config.json");
    let cfg = AuditConfig::from_file(&fixture).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let report = pipeline::run_audit(&cfg).map_err(|e| e.to_string())?;
        pipeline::emit_reports(&report, dir.path()).map_err(|e| e.to_string())?;
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().is_some_and(|n| n != "timings.json"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        outputs.push(files);
    }
    if outputs[0] != outputs[1] {
        return Err("two identical runs produced different bytes".into());
    }
    Ok(format!(
        "JSD 10000 pairs, entropy 2000, partitions 200, nDCG 1000, FD gradients worst rel {worst:.1e}, {} files byte-identical",
        outputs[0].len()
    ))
}

fn main() -> ExitCode {
    let dir = data_dir();
    let ml1m = DatasetConfig::ml1m(dir.join("ml-1m"));
    let ml100k = DatasetConfig::ml100k(dir.join("ml-100k"));
    let mut checks = Vec::new();

    let ml1m_loaded = pipeline::load_dataset(&ml1m).map(|(d, _)| d);
    let mut ml1m_seconds = None;
    match &ml1m_loaded {
        Ok(data) => {
            let mut runs = Vec::new();
            let mut failure = None;
            for seed in ORDER_SEEDS {
                eprintln!("auditing ML-1M with seed {seed}");
                match audit(&ml1m, data, seed) {
                    Ok(run) => runs.push((seed, run)),
                    Err(e) => failure = Some(format!("seed {seed}: {e}")),
                }
            }
            match failure {
                None => {
                    ml1m_seconds = runs.iter().find(|(s, _)| *s == PRIMARY_SEED).map(|(_, r)| r.seconds);
                    ml1m_checks(&runs, data, &mut checks);
                }
                Some(e) => {
                    for (id, name) in ML1M_CRITERIA {
                        checks.push(check(id, name, false, format!("ML-1M audit failed: {e}")));
                    }
                }
            }
        }
        Err(e) => {
            for (id, name) in ML1M_CRITERIA {
                checks.push(check(id, name, false, format!("{} ({e})", missing(&dir))));
            }
        }
    }

    let start = Instant::now();
    let props = property_suite();
    let prop_seconds = start.elapsed().as_secs_f64();
    checks.push(match props {
        Ok(detail) => check("A12", "property suites", true, detail),
        Err(e) => check("A12", "property suites", false, e),
    });

    let ml100k_seconds = match pipeline::load_dataset(&ml100k) {
        Ok((data, _)) => {
            eprintln!("auditing ML-100K");
            let start = Instant::now();
            audit(&ml100k, &data, PRIMARY_SEED).map(|_| start.elapsed().as_secs_f64())
        }
        Err(e) => Err(format!("{} ({e})", missing(&dir))),
    };
    let threads = rayon::current_num_threads();
    let runtime = match (&ml100k_seconds, ml1m_seconds) {
        (Ok(small), Some(large)) => check(
            "A13",
            "runtime budget",
            *small < ML100K_BUDGET_S && large < ML1M_BUDGET_S && prop_seconds < PROPERTY_BUDGET_S,
            format!(
                "ML-100K {small:.0}s (<{ML100K_BUDGET_S:.0}), ML-1M {large:.0}s (<{ML1M_BUDGET_S:.0}), properties {prop_seconds:.1}s (<{PROPERTY_BUDGET_S:.0}) on {threads} threads"
            ),
        ),
        (Err(e), _) => check("A13", "runtime budget", false, e.clone()),
        (_, None) => check("A13", "runtime budget", false, "ML-1M audit unavailable".into()),
    };
    checks.push(runtime);

    let failed = checks.iter().filter(|c| !c.pass).count();
    for c in &checks {
        println!("{} {} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

const ML1M_CRITERIA: [(&str, &str); 11] = [
    ("A01", "dataset facts"),
    ("A02", "long-tail head mass"),
    ("A03", "genre concentration"),
    ("A04", "PL ordering Niche > Diverse > Blockbuster"),
    ("A05", "UPD ordering Niche > Diverse > Blockbuster"),
    ("A06", "genre-basis PL attenuation"),
    ("A07", "item/genre group overlap"),
    ("A08", "alpha-sweep UPD trend"),
    ("A09", "diversity correlations"),
    ("A10", "profile size Blockbuster < Niche"),
    ("A11", "accuracy sanity P@10"),
];
