//! One function per subcommand; each returns a report and an exit code.

use anyhow::{bail, Context, Result};
use lightcone_core::blaschke::{self, DarbouxResult, PAIR_ORDER};
use lightcone_core::conformal_frame::{frame_at_order, INTEGRABILITY_NAMES, NORMALIZATION_NAMES, STRUCTURE_NAMES};
use lightcone_core::detectors::{self, willmore_residual};
use lightcone_core::surface_catalog::CATALOG_NAMES;
use lightcone_core::thomsen::{thomsen_pipeline, ThomsenOptions, ThomsenOutcome, FD_STEP};
use lightcone_core::{catalog_chart, classify, Error, Grid, PairData, PairLabel, PseudoVector};

use crate::config::RunConfig;
use crate::json::{format_float, Json};

/// Frame order used when `--order` is not given.
pub const FRAME_ORDER: usize = 6;
/// Minimum order for the Willmore and integrability commands.
pub const MIN_ORDER: usize = 6;

/// The Ricci line with its sign reversed is reported but not gated on.
const UNGATED: [&str; 1] = ["ricci_reversed"];

/// One row per grid point.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|x| if x.is_finite() { format_float(*x) } else { String::new() })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Json,
    pub csv: Csv,
    pub code: u8,
}

/// Per-point residual summary: `(u, v, residual)`, non-finite entries skipped.
fn summary(points: &[(f64, f64, f64)]) -> Json {
    let finite: Vec<_> = points.iter().filter(|p| p.2.is_finite()).collect();
    if finite.is_empty() {
        return Json::obj()
            .with("max", Json::Null)
            .with("mean", Json::Null)
            .with("argmax_point", Json::Null);
    }
    let mut best = finite[0];
    for p in &finite {
        if p.2 > best.2 {
            best = p;
        }
    }
    let mean = finite.iter().map(|p| p.2).sum::<f64>() / finite.len() as f64;
    Json::obj()
        .with("max", best.2)
        .with("mean", mean)
        .with("argmax_point", vec![best.0, best.1])
}

fn report(cfg: &RunConfig, command: &str, results: Json, points: &[(f64, f64, f64)], status: &str) -> Json {
    Json::obj()
        .with("command", command)
        .with("config_echo", cfg.echo())
        .with("grid", cfg.grid_json())
        .with("results", results)
        .with("residual_summary", summary(points))
        .with("status", status)
}

fn status(pass: bool) -> (&'static str, u8) {
    if pass {
        ("pass", 0)
    } else {
        ("fail", 2)
    }
}

fn require_order(cfg: &RunConfig) -> Result<()> {
    if cfg.order < MIN_ORDER {
        bail!("jet order {} too low: this command needs J >= {MIN_ORDER}", cfg.order);
    }
    Ok(())
}

fn sup_by_name(names: &[&str], per_point: &[Vec<f64>]) -> (Json, Vec<f64>) {
    let mut sup = vec![0.0f64; names.len()];
    for row in per_point {
        for (s, x) in sup.iter_mut().zip(row) {
            *s = s.max(*x);
        }
    }
    let mut j = Json::obj();
    for (n, s) in names.iter().zip(&sup) {
        j.push(n, *s);
    }
    (j, sup)
}

/// Run `command` against `cfg`, turning failed preconditions into exit 2.
pub fn run(command: &str, cfg: &RunConfig) -> Result<Outcome> {
    let result = match command {
        "invariants" => invariants(cfg),
        "verify" => verify(cfg),
        "detect" => detect(cfg),
        "pair-classify" => pair_classify(cfg),
        "pair-dual" => pair_dual(cfg),
        "pair-darboux" => pair_darboux(cfg),
        "pair-trivial" => pair_trivial(cfg),
        "thomsen" => thomsen(cfg),
        other => bail!("unknown command `{other}`"),
    };
    match result {
        Err(e) => match e.downcast_ref::<Error>() {
            Some(core @ Error::Precondition(_)) => {
                let message = core.to_string();
                Ok(Outcome {
                    report: report(cfg, command, Json::obj().with("error", message.as_str()), &[], &message),
                    csv: Csv::default(),
                    code: 2,
                })
            }
            _ => Err(e),
        },
        ok => ok,
    }
}

/// Catalog listing, or one entry rendered as a config file.
pub fn catalog(name: Option<&str>) -> Result<String> {
    match name {
        None => Ok(CATALOG_NAMES.iter().map(|n| format!("{n}\n")).collect()),
        Some(n) => Ok(catalog_chart(n)?.to_config_text()),
    }
}

fn invariants(cfg: &RunConfig) -> Result<Outcome> {
    let chart = &cfg.chart;
    let frames = cfg.grid.try_map(|u, v| frame_at_order(chart, u, v, cfg.order))?;
    let mut csv = Csv::new(&[
        "u",
        "v",
        "s1",
        "s2",
        "k1",
        "k2",
        "kappa_inner",
        "kappa1_norm",
        "kappa2_norm",
        "lambda",
        "normalization",
    ]);
    let mut points = Vec::new();
    let mut list = Vec::new();
    for f in &frames {
        let norm = f.normalization_residuals().max();
        // scalar Hopf differentials only make sense for a rank-one normal bundle
        let (k1, k2) = if f.rank() == 1 {
            (f.k1().value(), f.k2().value())
        } else {
            (f64::NAN, f64::NAN)
        };
        let row = vec![
            f.u,
            f.v,
            f.s1.value(),
            f.s2.value(),
            k1,
            k2,
            f.kappa_inner().value(),
            f.plus_norm(&f.kappa1),
            f.plus_norm(&f.kappa2),
            f.lambda.value(),
            norm,
        ];
        let mut j = Json::obj();
        for (h, x) in csv.header.iter().zip(&row) {
            j.push(h, if x.is_nan() { Json::Null } else { Json::Num(*x) });
        }
        list.push(j);
        points.push((f.u, f.v, norm));
        csv.rows.push(row);
    }
    let worst = points.iter().fold(0.0f64, |m, p| m.max(p.2));
    let (st, code) = status(worst <= cfg.tol.get("normalization"));
    let results = Json::obj()
        .with("normal_rank", chart.normal_rank())
        .with("v_flipped", chart.v_flipped())
        .with("points", Json::Arr(list));
    Ok(Outcome {
        report: report(cfg, "invariants", results, &points, st),
        csv,
        code,
    })
}

fn verify(cfg: &RunConfig) -> Result<Outcome> {
    require_order(cfg)?;
    let chart = &cfg.chart;
    let rows = cfg.grid.try_map(|u, v| {
        let f = frame_at_order(chart, u, v, cfg.order)?;
        Ok((
            f.normalization_residuals().values,
            f.structure_residuals().values,
            f.integrability_residuals().values,
        ))
    })?;
    let norm: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let structure: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
    let integ: Vec<Vec<f64>> = rows.iter().map(|r| r.2.clone()).collect();
    let (norm_j, norm_sup) = sup_by_name(&NORMALIZATION_NAMES, &norm);
    let (struct_j, struct_sup) = sup_by_name(&STRUCTURE_NAMES, &structure);
    let (integ_j, integ_sup) = sup_by_name(&INTEGRABILITY_NAMES, &integ);
    let gated = |names: &[&str], values: &[f64]| {
        names
            .iter()
            .zip(values)
            .filter(|(n, _)| !UNGATED.contains(n))
            .fold(0.0f64, |m, (_, x)| m.max(*x))
    };
    let max_norm = gated(&NORMALIZATION_NAMES, &norm_sup);
    let max_struct = gated(&STRUCTURE_NAMES, &struct_sup);
    let max_integ = gated(&INTEGRABILITY_NAMES, &integ_sup);
    let pass_norm = max_norm <= cfg.tol.get("normalization");
    let pass_struct = max_struct <= cfg.tol.get("structure");
    let pass_integ = max_integ <= cfg.tol.get("integrability");

    let mut header = vec!["u", "v"];
    header.extend(NORMALIZATION_NAMES);
    header.extend(STRUCTURE_NAMES);
    header.extend(INTEGRABILITY_NAMES);
    let mut csv = Csv::new(&header);
    let mut points = Vec::new();
    for (k, (n, s, i)) in rows.iter().enumerate() {
        let (u, v) = cfg.grid.point(k);
        let mut row = vec![u, v];
        row.extend(n);
        row.extend(s);
        row.extend(i);
        let worst = gated(&NORMALIZATION_NAMES, n)
            .max(gated(&STRUCTURE_NAMES, s))
            .max(gated(&INTEGRABILITY_NAMES, i));
        points.push((u, v, worst));
        csv.rows.push(row);
    }
    let results = Json::obj()
        .with("normalization", norm_j)
        .with("structure", struct_j)
        .with("integrability", integ_j)
        .with(
            "max",
            Json::obj()
                .with("normalization", max_norm)
                .with("structure", max_struct)
                .with("integrability", max_integ),
        )
        .with(
            "within_tolerance",
            Json::obj()
                .with("normalization", pass_norm)
                .with("structure", pass_struct)
                .with("integrability", pass_integ),
        );
    let (st, code) = status(pass_norm && pass_struct && pass_integ);
    Ok(Outcome {
        report: report(cfg, "verify", results, &points, st),
        csv,
        code,
    })
}

fn odd(n: usize) -> usize {
    n | 1
}

fn detect(cfg: &RunConfig) -> Result<Outcome> {
    require_order(cfg)?;
    // Simpson's rule needs an odd number of points per direction.
    let g = cfg.grid;
    let mut cfg = cfg.clone();
    cfg.grid = Grid::new(odd(g.nu), odd(g.nv), g.rect)?;
    let cfg = &cfg;
    let chart = &cfg.chart;
    let th = cfg.tol.detector();
    let rep = detectors::detect(chart, &cfg.grid, th)?;
    let w = cfg.grid.try_map(|u, v| willmore_residual(chart, u, v))?;

    let sw = &rep.swillmore;
    let swillmore = Json::obj()
        .with("is_swillmore", sw.is_swillmore)
        .with("parallelism_residual", sw.parallelism_residual)
        .with("willmore_sup", sw.willmore_sup)
        .with("umbilic_points", sw.umbilic_points.len());
    let (isothermic, ratio) = match &rep.isothermic {
        Ok(iso) => {
            let sign = iso.sign.map(|s| if s > 0 { "+" } else { "-" });
            let j = Json::obj()
                .with("sign", sign)
                .with("parallel_residual", iso.parallel_residual)
                .with("separability_residual", iso.separability_residual)
                .with("mixed_sign", iso.mixed_sign)
                .with("umbilic_points", iso.umbilic_points.len());
            (j, iso.ratio.clone())
        }
        Err(e) => (
            Json::obj().with("sign", Json::Null).with("error", e.to_string()),
            vec![None; cfg.grid.len()],
        ),
    };
    let energy = match &rep.energy {
        Ok(e) => Json::Num(*e),
        Err(e) => Json::obj().with("error", e.to_string()),
    };
    let results = Json::obj()
        .with(
            "willmore",
            Json::obj()
                .with("is_willmore", rep.is_willmore)
                .with("sup", rep.willmore_sup)
                .with("mean", rep.willmore_mean),
        )
        .with("swillmore", swillmore)
        .with("isothermic", isothermic)
        .with("energy", energy);

    let mut csv = Csv::new(&["u", "v", "willmore1", "willmore2", "ratio", "mu1", "mu2"]);
    let mut points = Vec::new();
    for (k, (w1, w2)) in w.iter().enumerate() {
        let (u, v) = cfg.grid.point(k);
        let nan = f64::NAN;
        csv.rows.push(vec![
            u,
            v,
            *w1,
            *w2,
            ratio[k].unwrap_or(nan),
            sw.mu1[k].unwrap_or(nan),
            sw.mu2[k].unwrap_or(nan),
        ]);
        points.push((u, v, w1.max(*w2)));
    }
    Ok(Outcome {
        report: report(cfg, "detect", results, &points, "pass"),
        csv,
        code: 0,
    })
}

fn pair_outcome(cfg: &RunConfig, command: &str, data: &PairData, extra: Vec<(&str, Json)>, extra_pass: bool) -> Outcome {
    let c = classify(data);
    let mut residuals = Json::obj();
    for (n, x) in &c.residuals {
        residuals.push(n, *x);
    }
    let mut witness = Json::obj();
    for (n, x) in &c.witness {
        witness.push(n, *x);
    }
    let mut results = Json::obj()
        .with("label", c.label.as_str())
        .with("retained", data.retained())
        .with("skipped", data.points.len() - data.retained())
        .with("residuals", residuals)
        .with("witness", witness);
    for (k, v) in extra {
        results.push(k, v);
    }

    let rank = cfg.chart.normal_rank();
    let mut header: Vec<String> = ["u", "v", "a", "b"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=rank).map(|i| format!("zeta{i}")));
    for h in ["rho1", "rho2", "theta1", "theta2", "eta1", "eta2", "expansion"] {
        header.push(h.to_string());
    }
    let mut csv = Csv {
        header,
        rows: Vec::new(),
    };
    let mut points = Vec::new();
    for (k, p) in data.points.iter().enumerate() {
        let (u, v) = data.grid.point(k);
        match p {
            Some(p) => {
                let mut row = vec![u, v, p.a, p.b];
                row.extend(&p.zeta);
                row.extend([p.rho1, p.rho2, p.theta1, p.theta2, p.eta1, p.eta2, p.expansion]);
                csv.rows.push(row);
                points.push((u, v, p.eta1.max(p.eta2)));
            }
            None => {
                let mut row = vec![u, v];
                row.resize(csv.header.len(), f64::NAN);
                csv.rows.push(row);
            }
        }
    }
    let positive = !matches!(c.label, PairLabel::NotEnvelope | PairLabel::Indeterminate);
    let (st, code) = match (positive, extra_pass) {
        (true, true) => ("pass", 0),
        (false, _) => ("negative", 2),
        (true, false) => ("fail", 2),
    };
    Outcome {
        report: report(cfg, command, results, &points, st),
        csv,
        code,
    }
}

fn pair_order(cfg: &RunConfig) -> usize {
    cfg.order.max(PAIR_ORDER)
}

fn pair_classify(cfg: &RunConfig) -> Result<Outcome> {
    if let Some(fields) = &cfg.pair.fields {
        let exprs = fields.compile(&cfg.chart)?;
        let data = blaschke::build_pair_order(&cfg.chart, &exprs, &cfg.grid, cfg.tol.pair(), pair_order(cfg))?;
        let text = Json::obj()
            .with("a", fields.a.as_str())
            .with("b", fields.b.as_str())
            .with("xi", fields.xi.iter().map(String::as_str).collect::<Vec<_>>());
        return Ok(pair_outcome(cfg, "pair-classify", &data, vec![("fields", text)], true));
    }
    match cfg.pair.pair.mode.as_deref() {
        Some("dual") => pair_dual(cfg),
        Some("darboux") => pair_darboux(cfg),
        Some("trivial_point") => pair_trivial(cfg),
        Some(other) => bail!("unknown pair mode `{other}` (dual, darboux, trivial_point)"),
        None => bail!("pair-classify needs a [fields] table or [pair] mode in the config"),
    }
}

fn pair_dual(cfg: &RunConfig) -> Result<Outcome> {
    let data = blaschke::dual_pair_order(&cfg.chart, &cfg.grid, cfg.tol.pair(), pair_order(cfg))?;
    Ok(pair_outcome(cfg, "pair-dual", &data, Vec::new(), true))
}

fn pair_darboux(cfg: &RunConfig) -> Result<Outcome> {
    let section = &cfg.pair.pair;
    let theta = cfg
        .flags
        .theta
        .or(section.theta)
        .context("pair-darboux needs --theta or [pair] theta")?;
    let rank = cfg.chart.normal_rank();
    let init = cfg
        .flags
        .init
        .clone()
        .or_else(|| section.init.clone())
        .unwrap_or_else(|| vec![0.0; 2 + rank]);
    let mut warnings = Vec::new();
    let sign = match cfg.flags.sign.or(section.sign) {
        Some(s) if s == 1 || s == -1 => s,
        Some(s) => bail!("isothermic sign must be 1 or -1, got {s}"),
        None => match detectors::isothermic_test(&cfg.chart, &cfg.grid, cfg.tol.detector()).map(|r| r.sign) {
            Ok(Some(s)) => s,
            _ => {
                warnings.push("isothermic sign undetermined; using +1".to_string());
                1
            }
        },
    };
    let DarbouxResult {
        pair,
        compatibility,
        blown_up,
        ..
    } = blaschke::darboux_integrate(&cfg.chart, theta, sign, &init, &cfg.grid, cfg.tol.pair())?;
    let compatible = compatibility <= cfg.tol.get("compatibility");
    let extra = vec![
        ("theta", Json::Num(theta)),
        ("sign", Json::Int(sign as i64)),
        ("init", Json::from(init.as_slice())),
        ("compatibility", Json::Num(compatibility)),
        ("compatible", Json::Bool(compatible)),
        ("blown_up", Json::from(blown_up)),
        ("warnings", Json::from(warnings)),
    ];
    Ok(pair_outcome(cfg, "pair-darboux", &pair, extra, compatible))
}

fn pair_trivial(cfg: &RunConfig) -> Result<Outcome> {
    let coords = cfg
        .flags
        .point
        .clone()
        .or_else(|| cfg.pair.pair.point.clone())
        .context("pair-trivial needs --P or [pair] P")?;
    let p = PseudoVector::from_slice(&coords, cfg.chart.ambient())?;
    let data = blaschke::trivial_from_point(&cfg.chart, &p, &cfg.grid, cfg.tol.pair())?;
    Ok(pair_outcome(cfg, "pair-trivial", &data, vec![("P", Json::from(coords.as_slice()))], true))
}

fn thomsen(cfg: &RunConfig) -> Result<Outcome> {
    let opts = ThomsenOptions {
        thresholds: cfg.tol.detector(),
        eps_causal: cfg.tol.get("causal"),
        fd_step: FD_STEP,
    };
    let r = match thomsen_pipeline(&cfg.chart, &cfg.grid, opts)? {
        ThomsenOutcome::ContainedInSphere => {
            let results = Json::obj().with("contained_in_sphere", true);
            return Ok(Outcome {
                report: report(cfg, "thomsen", results, &[], "contained in some S²₁"),
                csv: Csv::default(),
                code: 0,
            });
        }
        ThomsenOutcome::Completed(r) => r,
    };
    let dim = cfg.chart.component_signature().dim();
    let mut header = vec!["u".to_string(), "v".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.push("H".to_string());
    let mut csv = Csv {
        header,
        rows: Vec::new(),
    };
    let mut points = Vec::new();
    for (k, p) in r.recovered.points.iter().enumerate() {
        let (u, v) = cfg.grid.point(k);
        match p {
            Some(p) => {
                let mut row = vec![u, v];
                row.extend(&p.x);
                row.push(p.h);
                csv.rows.push(row);
                points.push((u, v, p.h.abs()));
            }
            None => {
                let mut row = vec![u, v];
                row.resize(csv.header.len(), f64::NAN);
                csv.rows.push(row);
            }
        }
    }
    let rho_sup = r.rho.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let results = Json::obj()
        .with("causal", r.causal.as_str())
        .with("branch", r.branch.name())
        .with("rho_sup", rho_sup)
        .with("rho_consistency", r.rho_consistency)
        .with("rho_propagation", r.rho_propagation)
        .with("y0", r.y0.coords())
        .with("y0_direction_residual", r.y0_direction_residual)
        .with("h_residual", r.h_residual)
        .with("constraint_residual", r.recovered.constraint_residual)
        .with("excluded", r.recovered.excluded.len())
        .with("warnings", r.warnings.clone());
    let (st, code) = status(r.h_residual <= cfg.tol.get("h"));
    Ok(Outcome {
        report: report(cfg, "thomsen", results, &points, st),
        csv,
        code,
    })
}
