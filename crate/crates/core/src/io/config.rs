//! Run configuration: a TOML document read as flat dotted keys.
//!
//! ```toml
//! preset = "gurson2d"
//!
//! [microstructure]
//! generator = "disc"      # or "spheres", or file = "rve.sdv"
//! cells = [64, 64, 1]
//! fraction = 0.1
//!
//! [load]
//! t_end = 0.1
//! dt = 0.001
//! E11.rate = 1.0
//! S22.rate = 0.0
//!
//! [phase.0]
//! ell = 0.05
//!
//! [output]
//! dir = "out"
//! snapshot_every = 10
//! ```
//!
//! Every key must be consumed; unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::Value;

use super::generate::{generate_rve_2d, generate_rve_3d_spheres};
use super::microstructure::{load_microstructure, PhaseGrid};
use super::{file_err, IoError};
use crate::driver::{LoadHistory, PhaseSpec, StaggeredConfig};
use crate::grid::{GridSpec, Scheme};
use crate::materials::{
    ElasticModuli, Gurson, GursonParams, Lemaitre, LemaitreParams, Material, ModelKind,
};
use crate::mechanics::Control;
use crate::presets::{Preset, ELL_INCLUSION, ELL_MATRIX};
use crate::tensor::COMPONENT_NAMES;

#[derive(Clone, Debug, PartialEq)]
pub enum MicroSource {
    File(PathBuf),
    Disc { cells: [usize; 3], lengths: [f64; 3], fraction: f64 },
    Spheres { cells: [usize; 3], lengths: [f64; 3], count: usize, fraction: f64, seed: u64 },
}

impl MicroSource {
    /// Loads or generates the phase grid.
    pub fn build(&self) -> Result<PhaseGrid, IoError> {
        match self {
            MicroSource::File(path) => load_microstructure(path),
            MicroSource::Disc { cells, lengths, fraction } => {
                let grid = GridSpec::new(*cells, *lengths).map_err(|e| err(e.to_string()))?;
                Ok(generate_rve_2d(&grid, *fraction))
            }
            MicroSource::Spheres { cells, lengths, count, fraction, seed } => {
                let grid = GridSpec::new(*cells, *lengths).map_err(|e| err(e.to_string()))?;
                generate_rve_3d_spheres(&grid, *count, *fraction, *seed)
            }
        }
    }

    pub fn is_2d(&self) -> Option<bool> {
        match self {
            MicroSource::File(_) => None,
            MicroSource::Disc { cells, .. } | MicroSource::Spheres { cells, .. } => Some(cells[2] == 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot every this many increments; 0 writes only the final state.
    pub snapshot_every: usize,
    pub history: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub microstructure: MicroSource,
    pub scheme: Scheme,
    pub load: LoadHistory,
    pub solver: StaggeredConfig,
    pub phases: Vec<PhaseSpec>,
    pub output: OutputConfig,
    pub threads: Option<usize>,
}

/// Flattened key/value view that tracks which keys were used.
struct Keys {
    map: BTreeMap<String, Value>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn err(msg: impl Into<String>) -> IoError {
    IoError::Config(msg.into())
}

impl Keys {
    fn parse(text: &str) -> Result<Self, IoError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        Ok(Keys { map })
    }

    fn prefixed(&self, prefix: &str) -> Vec<String> {
        self.map.keys().filter(|k| k.starts_with(prefix)).cloned().collect()
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, IoError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(x)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(err(format!("{key}: expected a number, found {v}"))),
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, IoError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(v) => Err(err(format!("{key}: expected a non-negative integer, found {v}"))),
        }
    }

    fn str(&mut self, key: &str) -> Result<Option<String>, IoError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(err(format!("{key}: expected a string, found {v}"))),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>, IoError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(v) => Err(err(format!("{key}: expected a boolean, found {v}"))),
        }
    }

    fn f64_array(&mut self, key: &str) -> Result<Option<Vec<f64>>, IoError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(err(format!("{key}: expected numbers"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(err(format!("{key}: expected an array, found {v}"))),
        }
    }

    fn finish(self) -> Result<(), IoError> {
        if self.map.is_empty() {
            Ok(())
        } else {
            let names: Vec<&str> = self.map.keys().map(String::as_str).collect();
            Err(err(format!("unknown keys: {}", names.join(", "))))
        }
    }
}

fn triple_usize(v: Vec<f64>, key: &str) -> Result<[usize; 3], IoError> {
    let ok = v.iter().all(|x| *x >= 1.0 && x.fract() == 0.0);
    match v.len() {
        2 if ok => Ok([v[0] as usize, v[1] as usize, 1]),
        3 if ok => Ok([v[0] as usize, v[1] as usize, v[2] as usize]),
        _ => Err(err(format!("{key}: expected two or three positive integers"))),
    }
}

fn parse_micro(keys: &mut Keys, base: &Path) -> Result<MicroSource, IoError> {
    if let Some(file) = keys.str("microstructure.file")? {
        return Ok(MicroSource::File(base.join(file)));
    }
    let generator = keys
        .str("microstructure.generator")?
        .ok_or_else(|| err("need microstructure.file or microstructure.generator"))?;
    let cells = triple_usize(
        keys.f64_array("microstructure.cells")?.ok_or_else(|| err("missing microstructure.cells"))?,
        "microstructure.cells",
    )?;
    let lengths = match keys.f64_array("microstructure.lengths")? {
        Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
        Some(v) if v.len() == 2 => [v[0], v[1], 1.0],
        Some(_) => return Err(err("microstructure.lengths: expected two or three numbers")),
        None => [1.0; 3],
    };
    let fraction = keys.f64("microstructure.fraction")?.ok_or_else(|| err("missing microstructure.fraction"))?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(err("microstructure.fraction must lie in [0, 1)"));
    }
    match generator.as_str() {
        "disc" => Ok(MicroSource::Disc { cells, lengths, fraction }),
        "spheres" => Ok(MicroSource::Spheres {
            cells,
            lengths,
            count: keys.usize("microstructure.spheres")?.unwrap_or(30),
            fraction,
            seed: keys.usize("microstructure.seed")?.unwrap_or(0) as u64,
        }),
        other => Err(err(format!("unknown generator '{other}'"))),
    }
}

const GURSON_KEYS: [&str; 12] =
    ["q1", "q2", "q3", "f0", "f_c", "f_f", "f_n", "eps_n", "s_n", "sigma_y", "n", "f_star_max"];
const LEMAITRE_KEYS: [&str; 5] = ["sigma_y", "hardening", "eps_c", "eps_r", "d_max"];

/// Parameters of a material as named values.
pub fn material_params(m: &Material) -> BTreeMap<&'static str, f64> {
    let el = m.moduli();
    let mut out = BTreeMap::from([("young", el.young), ("poisson", el.poisson)]);
    match m {
        Material::Elastic(_) => {}
        Material::Gurson(g) => {
            let p = &g.params;
            let vals = [p.q1, p.q2, p.q3, p.f0, p.f_c, p.f_f, p.f_n, p.eps_n, p.s_n, p.sigma_y, p.exponent, p.f_star_max];
            out.extend(GURSON_KEYS.iter().copied().zip(vals));
        }
        Material::Lemaitre(l) => {
            let p = &l.params;
            out.extend(LEMAITRE_KEYS.iter().copied().zip([p.sigma_y, p.hardening, p.eps_c, p.eps_r, p.d_max]));
        }
    }
    out
}

/// Builds a material from named values. `f0`, `f_star_max` and `d_max`
/// default to zero, 90% of the ultimate porosity and 0.99.
pub fn material_from_params(kind: ModelKind, v: &BTreeMap<&'static str, f64>, phase: usize) -> Result<Material, IoError> {
    let get = |k: &str| {
        v.get(k).copied().ok_or_else(|| err(format!("phase.{phase}.{k} is required for model {}", kind.name())))
    };
    let elastic = ElasticModuli::new(get("young")?, get("poisson")?);
    let m = match kind {
        ModelKind::Elastic => Material::Elastic(elastic),
        ModelKind::Gurson => {
            let mut p = GursonParams {
                q1: get("q1")?,
                q2: get("q2")?,
                q3: get("q3")?,
                f0: v.get("f0").copied().unwrap_or(0.0),
                f_c: get("f_c")?,
                f_f: get("f_f")?,
                f_n: get("f_n")?,
                eps_n: get("eps_n")?,
                s_n: get("s_n")?,
                sigma_y: get("sigma_y")?,
                exponent: get("n")?,
                f_star_max: 0.0,
            };
            p.f_star_max = v.get("f_star_max").copied().unwrap_or(0.9 * p.f_ultimate());
            Material::Gurson(Gurson::new(elastic, p))
        }
        ModelKind::Lemaitre => Material::Lemaitre(Lemaitre::new(
            elastic,
            LemaitreParams {
                sigma_y: get("sigma_y")?,
                hardening: get("hardening")?,
                eps_c: get("eps_c")?,
                eps_r: get("eps_r")?,
                d_max: v.get("d_max").copied().unwrap_or(0.99),
            },
        )),
    };
    m.validate().map_err(|e| err(format!("phase.{phase}: {e}")))?;
    Ok(m)
}

fn parse_phases(keys: &mut Keys, preset: Option<Preset>) -> Result<Vec<PhaseSpec>, IoError> {
    let base: Vec<PhaseSpec> = preset.map(|p| p.phases(ELL_MATRIX, ELL_INCLUSION)).unwrap_or_default();
    let mut max_index = base.len();
    for k in keys.prefixed("phase.") {
        let idx = k["phase.".len()..].split('.').next().unwrap_or_default();
        let idx: usize = idx.parse().map_err(|_| err(format!("{k}: phase index must be an integer")))?;
        if idx > u8::MAX as usize {
            return Err(err(format!("{k}: at most 256 phases")));
        }
        max_index = max_index.max(idx + 1);
    }
    let mut out = Vec::with_capacity(max_index);
    for q in 0..max_index {
        let pre = format!("phase.{q}.");
        let given = base.get(q).cloned();
        let model = keys.str(&format!("{pre}model"))?;
        let kind = match (&model, &given) {
            (Some(m), _) => ModelKind::parse(m).ok_or_else(|| err(format!("{pre}model: unknown model '{m}'")))?,
            (None, Some(g)) => g.material.kind(),
            (None, None) => return Err(err(format!("{pre}model is required"))),
        };
        let mut params = match &given {
            Some(g) if g.material.kind() == kind => material_params(&g.material),
            _ => BTreeMap::new(),
        };
        let names: Vec<&'static str> = ["young", "poisson"]
            .into_iter()
            .chain(match kind {
                ModelKind::Elastic => &[][..],
                ModelKind::Gurson => &GURSON_KEYS[..],
                ModelKind::Lemaitre => &LEMAITRE_KEYS[..],
            }
            .iter()
            .copied())
            .collect();
        for name in names {
            if let Some(v) = keys.f64(&format!("{pre}{name}"))? {
                params.insert(name, v);
            }
        }
        let length = match keys.f64(&format!("{pre}ell"))? {
            Some(l) => l,
            None => given.as_ref().map(|g| g.length).ok_or_else(|| err(format!("{pre}ell is required")))?,
        };
        out.push(PhaseSpec { material: material_from_params(kind, &params, q)?, length });
    }
    Ok(out)
}

fn parse_load(keys: &mut Keys, preset: Option<Preset>, two_d: Option<bool>) -> Result<LoadHistory, IoError> {
    let t_end = keys.f64("load.t_end")?;
    let times = keys.f64_array("load.times")?;
    let dt = keys.f64("load.dt")?.ok_or_else(|| err("missing load.dt"))?;
    let dt_max = keys.f64("load.dt_max")?.unwrap_or(dt);
    let times = match (times, t_end) {
        (Some(t), None) => t,
        (None, Some(te)) => vec![0.0, te],
        (Some(_), Some(_)) => return Err(err("give either load.times or load.t_end, not both")),
        (None, None) => return Err(err("missing load.t_end")),
    };
    let default_control = match preset {
        Some(p) => p.load(1.0, 1.0).control,
        None => {
            use Control::*;
            if two_d == Some(true) {
                [Stress, Stress, Strain, Strain, Strain, Stress]
            } else {
                [Stress; 6]
            }
        }
    };
    let mut control = default_control;
    let mut series: [Vec<f64>; 6] = Default::default();
    let mut any = false;
    for (c, name) in COMPONENT_NAMES.iter().enumerate() {
        let mut found = None;
        for (prefix, ctl) in [("E", Control::Strain), ("S", Control::Stress)] {
            let rate = keys.f64(&format!("load.{prefix}{name}.rate"))?;
            let values = keys.f64_array(&format!("load.{prefix}{name}.values"))?;
            let vals = match (rate, values) {
                (None, None) => continue,
                (Some(r), None) => times.iter().map(|t| r * t).collect(),
                (None, Some(v)) if v.len() == times.len() => v,
                (None, Some(_)) => {
                    return Err(err(format!("load.{prefix}{name}.values must match load.times in length")))
                }
                (Some(_), Some(_)) => return Err(err(format!("load.{prefix}{name}: give rate or values"))),
            };
            if found.is_some() {
                return Err(err(format!("component {name} is both strain and stress controlled")));
            }
            found = Some((ctl, vals));
        }
        match found {
            Some((ctl, vals)) => {
                control[c] = ctl;
                series[c] = vals;
                any = true;
            }
            None => series[c] = vec![0.0; times.len()],
        }
    }
    if !any && preset.is_some() {
        // Preset default: unit-rate E11 ramp.
        series[0] = times.clone();
    }
    let knots = times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, [0, 1, 2, 3, 4, 5].map(|c| series[c][i])))
        .collect();
    let load = LoadHistory { control, knots, dt_initial: dt, dt_max };
    load.validate().map_err(|e| err(e.to_string()))?;
    Ok(load)
}

fn parse_solver(keys: &mut Keys) -> Result<(Scheme, StaggeredConfig), IoError> {
    let scheme = match keys.str("solver.scheme")? {
        Some(s) => Scheme::parse(&s).ok_or_else(|| err(format!("unknown scheme '{s}'")))?,
        None => Scheme::default(),
    };
    if scheme == Scheme::Forward {
        return Err(err("the forward scheme applies to the regularization only (solver.helmholtz_scheme)"));
    }
    let mut c = StaggeredConfig::default();
    if let Some(s) = keys.str("solver.helmholtz_scheme")? {
        c.helmholtz_scheme = Scheme::parse(&s).ok_or_else(|| err(format!("unknown scheme '{s}'")))?;
    }
    macro_rules! set {
        ($key:literal, $field:expr, f64) => {
            if let Some(v) = keys.f64($key)? {
                $field = v;
            }
        };
        ($key:literal, $field:expr, usize) => {
            if let Some(v) = keys.usize($key)? {
                $field = v;
            }
        };
    }
    set!("solver.staggered_tol", c.tolerance, f64);
    set!("solver.staggered_max_iter", c.max_iter, usize);
    set!("solver.newton_tol", c.newton.tolerance, f64);
    set!("solver.newton_max_iter", c.newton.max_iter, usize);
    set!("solver.cg_tol", c.newton.cg_tolerance, f64);
    set!("solver.cg_max_iter", c.newton.cg_max_iter, usize);
    set!("solver.cg_floor", c.newton.cg_floor, f64);
    set!("solver.helmholtz_tol", c.helmholtz.tolerance, f64);
    set!("solver.helmholtz_max_iter", c.helmholtz.max_iter, usize);
    set!("solver.cutback", c.cutback, f64);
    set!("solver.growth", c.growth, f64);
    set!("solver.growth_streak", c.growth_streak, usize);
    set!("solver.min_strain_increment", c.delta_e_min, f64);
    set!("solver.max_increments", c.max_increments, usize);
    if let Some(f) = keys.f64("solver.stop_stress_fraction")? {
        c.stop_stress_fraction = Some(f);
    }
    if let Some(b) = keys.bool("solver.extrapolate")? {
        c.extrapolate = b;
    }
    c.validate().map_err(|e| err(e.to_string()))?;
    Ok((scheme, c))
}

impl RunConfig {
    /// Parses a document; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, IoError> {
        let mut keys = Keys::parse(text)?;
        let preset = match keys.str("preset")? {
            Some(p) => Some(Preset::parse(&p).ok_or_else(|| err(format!("unknown preset '{p}'")))?),
            None => None,
        };
        let threads = keys.usize("threads")?;
        let microstructure = parse_micro(&mut keys, base)?;
        let two_d = microstructure.is_2d().or(preset.map(|p| !p.is_3d()));
        let (scheme, solver) = parse_solver(&mut keys)?;
        let load = parse_load(&mut keys, preset, two_d)?;
        let phases = parse_phases(&mut keys, preset)?;
        let output = OutputConfig {
            dir: base.join(keys.str("output.dir")?.unwrap_or_else(|| "output".into())),
            snapshot_every: keys.usize("output.snapshot_every")?.unwrap_or(0),
            history: keys.str("output.history")?.unwrap_or_else(|| "history.csv".into()),
        };
        keys.finish()?;
        if phases.is_empty() {
            return Err(err("no phases defined"));
        }
        Ok(RunConfig { microstructure, scheme, load, solver, phases, output, threads })
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(file_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        if let MicroSource::File(f) = &cfg.microstructure {
            if !f.exists() {
                return Err(err(format!("microstructure file {} does not exist", f.display())));
            }
        }
        Ok(cfg)
    }
}
