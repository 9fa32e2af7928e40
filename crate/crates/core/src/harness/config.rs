use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::coefficients::{CoefficientModel1D, DriftNd, Field1D, HalfSpaceModel, Matrix};
use crate::error::{Error, Result};
use crate::euler1d::kappa_to_p;
use crate::euler_nd::{kappa_to_p_nd, ReflectionRule};
use crate::parallel::DEFAULT_SEED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    Sim1d,
    SimNd,
    Fpe,
    Blcheck,
    Convergence,
}

impl Engine {
    pub const ALL: [Engine; 6] = [
        Engine::Analytic,
        Engine::Sim1d,
        Engine::SimNd,
        Engine::Fpe,
        Engine::Blcheck,
        Engine::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Sim1d => "sim1d",
            Engine::SimNd => "simnd",
            Engine::Fpe => "fpe",
            Engine::Blcheck => "blcheck",
            Engine::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Option<Engine> {
        Engine::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Line(CoefficientModel1D),
    Plane(HalfSpaceModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Line(_) => 1,
            Model::Plane(m) => m.dim(),
        }
    }
}

/// The boundary parameter as written in the file; the other one is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Absorbing {
    Kappa(f64),
    P(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Analytic,
    Fpe,
    Value(f64),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub engine: Engine,
    pub model: Model,
    pub absorbing: Absorbing,
    pub kappa: f64,
    pub p: f64,
    pub reflection: ReflectionRule,
    pub x0: Vec<f64>,
    pub horizon: f64,
    /// Strictly decreasing.
    pub dt: Vec<f64>,
    pub n: Option<u64>,
    pub seed: u64,
    pub bins: Option<usize>,
    pub dx: Option<f64>,
    pub pde_dt: Option<f64>,
    pub domain: Option<Vec<f64>>,
    pub reference: Option<Reference>,
    pub out: Option<PathBuf>,
}

const KEYS: [&str; 19] = [
    "experiment",
    "engine",
    "drift",
    "sigma",
    "sigma_matrix",
    "x0",
    "kappa",
    "P",
    "reflection",
    "T",
    "dt",
    "n",
    "seed",
    "bins",
    "dx",
    "pde_dt",
    "domain",
    "reference",
    "out",
];

struct Entries(BTreeMap<&'static str, (usize, String)>);

impl Entries {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((line, v)) = self.get(key) else {
            return Ok(None);
        };
        numbers(line, key, v).map(Some)
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        let Some((line, v)) = self.get(key) else {
            return Ok(None);
        };
        match numbers(line, key, v)?.as_slice() {
            [x] => Ok(Some(*x)),
            _ => Err(at(line, format!("`{key}` takes a single number"))),
        }
    }

    fn integer(&self, key: &str) -> Result<Option<u64>> {
        let Some((line, v)) = self.get(key) else {
            return Ok(None);
        };
        parse_integer(v).map(Some).ok_or_else(|| {
            at(
                line,
                format!("`{key}` must be a nonnegative integer, got `{v}`"),
            )
        })
    }
}

fn at(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::config(format!("line {line}: {msg}"))
}

fn parse_integer(v: &str) -> Option<u64> {
    if let Some(hex) = v.strip_prefix("0x") {
        return u64::from_str_radix(hex, 16).ok();
    }
    if let Ok(n) = v.parse::<u64>() {
        return Some(n);
    }
    // allow 1e6 style counts
    let f: f64 = v.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f < 2f64.powi(63)).then_some(f as u64)
}

fn numbers(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace()
        .map(|w| {
            w.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| at(line, format!("`{key}`: `{w}` is not a number")))
        })
        .collect()
}

fn family(line: usize, key: &str, v: &str) -> Result<(String, Vec<f64>)> {
    let mut words = v.split_whitespace();
    let tag = words
        .next()
        .ok_or_else(|| at(line, format!("`{key}` is empty")))?;
    let rest: Vec<&str> = words.collect();
    Ok((tag.to_string(), numbers(line, key, &rest.join(" "))?))
}

/// Parses a `key = value` document. `#` starts a comment; blank lines are
/// ignored. Exactly one of `kappa` and `P` must be given.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| at(line, format!("expected `key = value`, got `{content}`")))?;
        let k = k.trim();
        let key = KEYS
            .into_iter()
            .find(|known| *known == k)
            .ok_or_else(|| at(line, format!("unknown key `{k}`")))?;
        if let Some((first, _)) = map.insert(key, (line, v.trim().to_string())) {
            return Err(at(line, format!("`{key}` already set on line {first}")));
        }
    }
    let e = Entries(map);

    let mut missing: Vec<&str> = ["experiment", "engine", "drift", "x0", "T"]
        .into_iter()
        .filter(|k| e.get(k).is_none())
        .collect();
    if e.get("sigma").is_none() && e.get("sigma_matrix").is_none() {
        missing.push("sigma | sigma_matrix");
    }
    if e.get("kappa").is_none() && e.get("P").is_none() {
        missing.push("kappa | P");
    }
    if let Some((line, name)) = e.get("engine") {
        let engine =
            Engine::parse(name).ok_or_else(|| at(line, format!("unknown engine `{name}`")))?;
        let needs: &[&str] = match engine {
            Engine::Sim1d | Engine::SimNd | Engine::Convergence => &["dt", "n"],
            Engine::Blcheck => &["dt"],
            Engine::Analytic | Engine::Fpe => &[],
        };
        missing.extend(needs.iter().copied().filter(|k| e.get(k).is_none()));
    }
    if !missing.is_empty() {
        return Err(Error::config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    if let (Some((lk, _)), Some((lp, _))) = (e.get("kappa"), e.get("P")) {
        return Err(at(
            lk.max(lp),
            format!("kappa (line {lk}) and P (line {lp}) are mutually exclusive"),
        ));
    }
    if let (Some((l1, _)), Some((l2, _))) = (e.get("sigma"), e.get("sigma_matrix")) {
        return Err(at(
            l1.max(l2),
            "sigma and sigma_matrix are mutually exclusive",
        ));
    }

    let (_, engine_name) = e.get("engine").expect("checked");
    let engine = Engine::parse(engine_name).expect("checked");
    let (drift_line, drift_text) = e.get("drift").expect("checked");
    let (drift_tag, drift_params) = family(drift_line, "drift", drift_text)?;

    let model = if let Some((line, text)) = e.get("sigma_matrix") {
        let rows = text
            .split(';')
            .map(|r| numbers(line, "sigma_matrix", r))
            .collect::<Result<Vec<_>>>()?;
        let sigma = Matrix::from_rows(&rows).map_err(|err| at(line, err))?;
        if !sigma.is_symmetric(1e-12) {
            return Err(at(line, "sigma_matrix must be symmetric"));
        }
        let d = sigma.dim();
        let drift = match (drift_tag.as_str(), drift_params.len()) {
            ("zero", 0) => vec![0.0; d],
            ("constant", k) if k == d => drift_params,
            _ => {
                return Err(at(
                    drift_line,
                    format!("drift must be `zero` or `constant` with {d} components"),
                ))
            }
        };
        Model::Plane(
            HalfSpaceModel::new(DriftNd::Constant(drift), sigma).map_err(|err| at(line, err))?,
        )
    } else {
        let (line, text) = e.get("sigma").expect("checked");
        let (tag, params) = family(line, "sigma", text)?;
        let sigma = Field1D::from_tag(&tag, &params).map_err(|err| at(line, err))?;
        let drift =
            Field1D::from_tag(&drift_tag, &drift_params).map_err(|err| at(drift_line, err))?;
        let floor = match sigma {
            Field1D::Linear { c0, .. } => c0,
            ref f => f.eval(0.0, 0.0),
        };
        Model::Line(CoefficientModel1D::new(drift, sigma, floor).map_err(|err| at(line, err))?)
    };
    let d = model.dim();

    let absorbing = match (e.number("kappa")?, e.number("P")?) {
        (Some(k), None) => Absorbing::Kappa(k),
        (None, Some(p)) => Absorbing::P(p),
        _ => unreachable!("exclusivity checked"),
    };
    let sigma_n = match &model {
        Model::Line(m) => m.sigma(0.0, 0.0),
        Model::Plane(m) => m.sigma_n(),
    };
    let (kappa, p) = match absorbing {
        Absorbing::Kappa(k) => (
            k,
            if d == 1 {
                kappa_to_p(k, sigma_n)
            } else {
                kappa_to_p_nd(k, sigma_n)
            },
        ),
        Absorbing::P(p) => (p * sigma_n.sqrt() / std::f64::consts::PI.sqrt(), p),
    };
    if !(kappa >= 0.0) {
        let line = e.get("kappa").or(e.get("P")).map(|v| v.0).unwrap_or(0);
        return Err(at(line, "the absorption parameter must be nonnegative"));
    }

    let reflection = match e.get("reflection") {
        None => ReflectionRule::CoNormal,
        Some((line, text)) => {
            let (tag, params) = family(line, "reflection", text)?;
            match (tag.as_str(), params.is_empty()) {
                ("conormal", true) => ReflectionRule::CoNormal,
                ("normal", true) => ReflectionRule::Normal,
                ("custom", false) => ReflectionRule::Custom(params),
                _ => return Err(at(line, format!("unknown reflection `{text}`"))),
            }
        }
    };
    if let Model::Plane(m) = &model {
        let line = e.get("reflection").map(|v| v.0).unwrap_or(0);
        reflection
            .direction(m.sigma())
            .map_err(|err| at(line, err))?;
    }

    let (x0_line, _) = e.get("x0").expect("checked");
    let x0 = e.numbers("x0")?.expect("checked");
    if x0.len() != d || !(x0[0] > 0.0) {
        return Err(at(
            x0_line,
            format!("x0 needs {d} component(s) with a positive first one"),
        ));
    }
    let horizon = e.number("T")?.expect("checked");
    if !(horizon > 0.0) {
        return Err(at(e.get("T").expect("checked").0, "T must be positive"));
    }
    let dt = e.numbers("dt")?.unwrap_or_default();
    if let Some((line, _)) = e.get("dt") {
        if dt.is_empty() || dt.iter().any(|v| !(*v > 0.0)) || dt.windows(2).any(|w| w[1] >= w[0]) {
            return Err(at(
                line,
                "dt must be a nonempty, positive, strictly decreasing list",
            ));
        }
    }
    let reference = match e.get("reference") {
        None => None,
        Some((line, text)) => {
            let (tag, params) = family(line, "reference", text)?;
            Some(match (tag.as_str(), params.as_slice()) {
                ("analytic", []) => Reference::Analytic,
                ("fpe", []) => Reference::Fpe,
                ("value", [v]) => Reference::Value(*v),
                _ => return Err(at(line, format!("unknown reference `{text}`"))),
            })
        }
    };
    let positive = |key: &str| -> Result<Option<f64>> {
        match e.number(key)? {
            Some(v) if !(v > 0.0) => Err(at(
                e.get(key).expect("present").0,
                format!("`{key}` must be positive"),
            )),
            v => Ok(v),
        }
    };
    let bins = match e.integer("bins")? {
        Some(0) => {
            return Err(at(
                e.get("bins").expect("present").0,
                "`bins` must be positive",
            ))
        }
        b => b.map(|b| b as usize),
    };

    Ok(ExperimentConfig {
        experiment: e.get("experiment").expect("checked").1.to_string(),
        engine,
        model,
        absorbing,
        kappa,
        p,
        reflection,
        x0,
        horizon,
        dt,
        n: e.integer("n")?,
        seed: e.integer("seed")?.unwrap_or(DEFAULT_SEED),
        bins,
        dx: positive("dx")?,
        pde_dt: positive("pde_dt")?,
        domain: e.numbers("domain")?,
        reference,
        out: e.get("out").map(|(_, v)| PathBuf::from(v)),
    })
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical text form; `parse_config(emit_config(c))` reproduces `c`.
pub fn emit_config(c: &ExperimentConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("experiment", c.experiment.clone());
    kv("engine", c.engine.name().to_string());
    match &c.model {
        Model::Line(m) => {
            let field = |f: &Field1D| match f.tag() {
                Some((tag, params)) => format!("{tag} {}", join(&params)),
                None => "custom".to_string(),
            };
            kv("drift", field(m.drift_field()));
            kv("sigma", field(m.sigma_field()));
        }
        Model::Plane(m) => {
            kv(
                "drift",
                format!("constant {}", join(m.constant_drift().unwrap_or(&[]))),
            );
            let rows: Vec<String> = m.sigma().rows().iter().map(|r| join(r)).collect();
            kv("sigma_matrix", rows.join("; "));
            let refl = match &c.reflection {
                ReflectionRule::CoNormal => "conormal".to_string(),
                ReflectionRule::Normal => "normal".to_string(),
                ReflectionRule::Custom(v) => format!("custom {}", join(v)),
            };
            kv("reflection", refl);
        }
    }
    kv("x0", join(&c.x0));
    match c.absorbing {
        Absorbing::Kappa(k) => kv("kappa", k.to_string()),
        Absorbing::P(p) => kv("P", p.to_string()),
    }
    kv("T", c.horizon.to_string());
    if !c.dt.is_empty() {
        kv("dt", join(&c.dt));
    }
    if let Some(n) = c.n {
        kv("n", n.to_string());
    }
    kv("seed", c.seed.to_string());
    if let Some(b) = c.bins {
        kv("bins", b.to_string());
    }
    if let Some(v) = c.dx {
        kv("dx", v.to_string());
    }
    if let Some(v) = c.pde_dt {
        kv("pde_dt", v.to_string());
    }
    if let Some(v) = &c.domain {
        kv("domain", join(v));
    }
    if let Some(r) = c.reference {
        kv(
            "reference",
            match r {
                Reference::Analytic => "analytic".to_string(),
                Reference::Fpe => "fpe".to_string(),
                Reference::Value(v) => format!("value {v}"),
            },
        );
    }
    if let Some(o) = &c.out {
        kv("out", o.display().to_string());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXP1: &str = "
        # unit coefficients, no drift
        experiment = exp1
        engine = sim1d
        drift = zero
        sigma = constant 1
        x0 = 1
        kappa = 1
        T = 1
        dt = 0.1 0.01 0.001
        n = 1e6
    ";

    #[test]
    fn derives_p() {
        let c = parse_config(EXP1).unwrap();
        assert!((c.p - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(c.n, Some(1_000_000));
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.dt, vec![0.1, 0.01, 0.001]);
    }

    #[test]
    fn p_given_derives_kappa() {
        let c = parse_config(&EXP1.replace("kappa = 1", "P = 1.7724538509055159")).unwrap();
        assert!((c.kappa - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_lists_all_missing() {
        let Err(Error::Config(msg)) = parse_config("") else {
            panic!()
        };
        for k in [
            "experiment",
            "engine",
            "drift",
            "x0",
            "T",
            "sigma | sigma_matrix",
            "kappa | P",
        ] {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn kappa_and_p_exclusive() {
        let Err(Error::Config(msg)) = parse_config(&format!("{EXP1}\nP = 2\n")) else {
            panic!()
        };
        assert!(
            msg.contains("line 13") && msg.contains("mutually exclusive"),
            "{msg}"
        );
    }

    #[test]
    fn line_numbers_in_errors() {
        let Err(Error::Config(msg)) = parse_config("experiment = a\nfoo = 1\n") else {
            panic!()
        };
        assert!(msg.starts_with("line 2: unknown key"), "{msg}");
        let Err(Error::Config(msg)) = parse_config(&EXP1.replace("dt = 0.1 0.01", "dt = 0.01 0.1"))
        else {
            panic!()
        };
        assert!(
            msg.contains("line 10") && msg.contains("decreasing"),
            "{msg}"
        );
        let Err(Error::Config(msg)) =
            parse_config(&EXP1.replace("sigma = constant 1", "sigma = cubic 1"))
        else {
            panic!()
        };
        assert!(
            msg.contains("line 6") && msg.contains("unknown coefficient family"),
            "{msg}"
        );
    }

    #[test]
    fn engine_specific_requirements() {
        let Err(Error::Config(msg)) = parse_config(&EXP1.replace("n = 1e6", "")) else {
            panic!()
        };
        assert_eq!(msg, "missing required keys: n");
        let c = parse_config(&EXP1.replace("n = 1e6", "").replace("sim1d", "analytic")).unwrap();
        assert_eq!(c.engine, Engine::Analytic);
    }

    #[test]
    fn round_trip_is_fixed_point() {
        let plane = "
            experiment = exp3
            engine = convergence
            drift = constant -1 0
            sigma_matrix = 0.25 0.4; 0.4 1
            reflection = normal
            x0 = 0.3 0
            kappa = 1
            T = 0.5
            dt = 0.01 0.001
            n = 100000
            seed = 0x2A
            dx = 0.02
            domain = 4 6
            reference = value 0.3722893
            out = runs/exp3
        ";
        for text in [
            EXP1,
            plane,
            &EXP1.replace("sigma = constant 1", "sigma = linear 1 0.5"),
        ] {
            let once = emit_config(&parse_config(text).unwrap());
            let twice = emit_config(&parse_config(&once).unwrap());
            assert_eq!(once, twice);
        }
        let c = parse_config(plane).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.reflection, ReflectionRule::Normal);
        assert!((c.p - std::f64::consts::PI.sqrt() / 0.5).abs() < 1e-14);
    }

    #[test]
    fn plane_validation() {
        let bad = EXP1
            .replace("sigma = constant 1", "sigma_matrix = 1 2; 2 1")
            .replace("x0 = 1", "x0 = 1 0");
        assert!(matches!(
            parse_config(&bad),
            Err(Error::Config(_)) | Err(Error::Domain(_))
        ));
        let wrong_dim = EXP1.replace("sigma = constant 1", "sigma_matrix = 1 0; 0 1");
        assert!(parse_config(&wrong_dim).is_err());
    }
}
