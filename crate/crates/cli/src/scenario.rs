//! Runs a scenario against the library and shapes the result into a report.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use serde_json::{json, Value};
use translab::dimension::{
    box_count, cantor_sample, measure_zero_probe, sigma_dimension_report, write_points_csv, write_scales_csv,
};
use translab::domain::BoxDomain;
use translab::expr::ExprMap;
use translab::linalg::TolPolicy;
use translab::multipoint::{estimate_df, injectivity_check, normal_crossings_check, CrossingVerdict, InjectivityVerdict};
use translab::pareto::{
    build_pareto_atlas, perturbation_study, simpliciality_check, strong_convexity_estimate, MultiObjective,
    PerturbationStudyOptions, SimplicialityOptions, SimplicialityVerdict,
};
use translab::perturb::LinearPerturbation;
use translab::strata::{immersion_check, morse_check, whitney_umbrella_check, ImmersionVerdict, MorseVerdict};
use translab::transversality::{
    classify_family_point, defect_at_with, defect_family_sup, delta_star, genericity_threshold, sample_sigma,
    FamilyProblem, LevelSetSubmanifold, SigmaOptions, Smoothness, ThresholdQuery, WitnessSearch,
};

use crate::config::{Command, Format, ScenarioConfig, SCHEMA_VERSION};
use crate::registry::{CloudSpec, ProblemSpec, TargetSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub problem: Option<String>,
    pub seed: Option<u64>,
    /// A non-generic instance or failed verdict was detected.
    pub flagged: bool,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    /// Tabular companion in CSV form, for commands that have one.
    pub csv: Option<Vec<u8>>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.flagged {
            2
        } else {
            0
        }
    }
}

fn domain(intervals: &[[f64; 2]]) -> anyhow::Result<BoxDomain> {
    Ok(BoxDomain::from_intervals(intervals)?)
}

fn rank_policy(cfg: &ScenarioConfig) -> TolPolicy {
    cfg.tol.map_or_else(TolPolicy::default, TolPolicy::Relative)
}

fn family(cfg: &ScenarioConfig, spec: &ProblemSpec) -> anyhow::Result<(FamilyProblem, Smoothness)> {
    let ProblemSpec::Family {
        map,
        arity_x,
        arity_a,
        target,
        x_box,
        a_box,
        smoothness,
    } = spec
    else {
        bail!("command `{}` needs a family problem", cfg.command.name());
    };
    let f = ExprMap::parse(map, *arity_x, *arity_a)?;
    let mut z = match target {
        TargetSpec::Point { point } => LevelSetSubmanifold::point(point)?,
        TargetSpec::LevelSet { map, ambient_dim } => LevelSetSubmanifold::new(ExprMap::parse(map, *ambient_dim, 0)?)?,
    };
    if let Some(tol) = cfg.membership_tol {
        z = z.with_membership_tol(tol);
    }
    let xb = domain(cfg.x_box.as_deref().unwrap_or(x_box))?;
    let ab = domain(cfg.a_box.as_deref().unwrap_or(a_box))?;
    let p = FamilyProblem::new(f, z, xb, ab)?.with_rank_policy(rank_policy(cfg));
    Ok((p, cfg.smoothness.unwrap_or(*smoothness)))
}

fn perturbation(cfg: &ScenarioConfig, outputs: usize, inputs: usize) -> anyhow::Result<Option<LinearPerturbation>> {
    cfg.perturbation
        .as_ref()
        .map(|e| LinearPerturbation::from_rows(outputs, inputs, e).context("perturbation has the wrong size"))
        .transpose()
}

fn plain_map(cfg: &ScenarioConfig, spec: &ProblemSpec) -> anyhow::Result<(ExprMap, BoxDomain)> {
    let ProblemSpec::Map { map, arity_x, domain: d } = spec else {
        bail!("command `{}` needs a map problem", cfg.command.name());
    };
    let mut f = ExprMap::parse(map, *arity_x, 0)?;
    if let Some(pi) = perturbation(cfg, f.output_dim(), *arity_x)? {
        f = f.add_linear(&pi.matrix)?;
    }
    Ok((f, domain(cfg.domain.as_deref().unwrap_or(d))?))
}

fn multi(cfg: &ScenarioConfig, spec: &ProblemSpec) -> anyhow::Result<MultiObjective> {
    let ProblemSpec::MultiObjective { map, arity_x, domain: d } = spec else {
        bail!("command `{}` needs a multiobjective problem", cfg.command.name());
    };
    let f = MultiObjective::parse(map, *arity_x, domain(cfg.domain.as_deref().unwrap_or(d))?)?;
    let f = match perturbation(cfg, f.objectives(), f.dim())? {
        Some(pi) => f.perturbed(&pi)?,
        None => f,
    };
    Ok(f.with_convexity_estimate(1024)?)
}

/// Builds the family problem a scenario refers to, with its smoothness.
pub fn load_family(cfg: &ScenarioConfig) -> anyhow::Result<(FamilyProblem, Smoothness)> {
    let (spec, _) = cfg.resolve()?;
    family(cfg, &spec)
}

/// Builds the (possibly perturbed) plain map a scenario refers to.
pub fn load_map(cfg: &ScenarioConfig) -> anyhow::Result<(ExprMap, BoxDomain)> {
    let (spec, _) = cfg.resolve()?;
    plain_map(cfg, &spec)
}

pub fn load_multi_objective(cfg: &ScenarioConfig) -> anyhow::Result<MultiObjective> {
    let (spec, _) = cfg.resolve()?;
    multi(cfg, &spec)
}

fn point_arg<'a>(v: &'a Option<Vec<f64>>, what: &str) -> anyhow::Result<&'a [f64]> {
    v.as_deref().ok_or_else(|| anyhow!("missing `{what}`"))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> anyhow::Result<Option<Vec<u8>>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Some(buf))
}

fn to_value<T: Serialize>(v: &T) -> anyhow::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// Executes the scenario's command. The CSV companion is always produced
/// when the command has one; [`emit_report`] decides whether to write it.
pub fn run_scenario(cfg: &ScenarioConfig) -> anyhow::Result<Outcome> {
    cfg.validate()?;
    let resolved = match cfg.problem {
        Some(_) => Some(cfg.resolve()?.0),
        None => None,
    };
    let spec = || resolved.as_ref().ok_or_else(|| anyhow!("no problem given"));
    let seed = cfg.seed.unwrap_or(0);
    let search = cfg.search.unwrap_or(WitnessSearch::Auto);
    let mut flagged = false;
    let mut csv = None;
    let result = match cfg.command {
        Command::Defect => {
            let (p, _) = family(cfg, spec()?)?;
            let (x, a) = (point_arg(&cfg.x, "x")?, point_arg(&cfg.a, "a")?);
            let delta = defect_at_with(&p.map, &p.target, x, a, p.rank_policy)?;
            json!({ "x": x, "a": a, "delta": delta })
        }
        Command::Classify => {
            let (p, _) = family(cfg, spec()?)?;
            let (x, a) = (point_arg(&cfg.x, "x")?, point_arg(&cfg.a, "a")?);
            to_value(&classify_family_point(&p, x, a)?)?
        }
        Command::SigmaSample => {
            let (p, _) = family(cfg, spec()?)?;
            let mut opts = SigmaOptions::new(cfg.budget.unwrap_or(2000), seed);
            opts.capture_radius = cfg.capture_radius;
            opts.search = search;
            let cloud = sample_sigma(&p, &opts)?;
            csv = csv_bytes(|b| write_points_csv("a", p.param_dim(), &cloud.points, b))?;
            json!({
                "count": cloud.points.len(),
                "budget": cloud.budget,
                "capture_radius": cloud.capture_radius,
                "points": cloud.points,
                "witnesses": cloud.witnesses,
            })
        }
        Command::SigmaDim => {
            let (p, r) = family(cfg, spec()?)?;
            let mut opts = SigmaOptions::new(cfg.budget.unwrap_or(2000), seed);
            opts.capture_radius = cfg.capture_radius;
            opts.search = search;
            let rep = sigma_dimension_report(&p, &opts, 4096, &cfg.scales.unwrap_or_default(), r)?;
            if let Some(est) = &rep.estimate {
                csv = csv_bytes(|b| write_scales_csv(est, b))?;
            }
            to_value(&rep)?
        }
        Command::Threshold => {
            let query = match (cfg.threshold, &resolved) {
                (Some(q), _) => q,
                (None, Some(spec)) => {
                    let (p, r) = family(cfg, spec)?;
                    let sup = defect_family_sup(&p, cfg.budget.unwrap_or(4096))?;
                    ThresholdQuery::Main1 {
                        dim_a: p.param_dim() as u32,
                        delta_star: delta_star(&p, sup.value),
                        r,
                    }
                }
                (None, None) => bail!("threshold needs a query or a family problem"),
            };
            let bound = genericity_threshold(query)?;
            json!({ "query": query, "s_bound": bound, "display": bound.to_string() })
        }
        Command::Morse => {
            let (f, d) = plain_map(cfg, spec()?)?;
            let rep = morse_check(&f, &d, cfg.budget)?;
            flagged = rep.verdict == MorseVerdict::NotMorse;
            to_value(&rep)?
        }
        Command::Immersion => {
            let (f, d) = plain_map(cfg, spec()?)?;
            let rep = immersion_check(&f, &d, cfg.budget.unwrap_or(2000))?;
            flagged = rep.verdict == ImmersionVerdict::NotImmersion;
            to_value(&rep)?
        }
        Command::Umbrella => {
            let (f, _) = plain_map(cfg, spec()?)?;
            let origin = vec![0.0; f.arity_x()];
            let x = cfg.x.as_deref().unwrap_or(&origin);
            let umbrella = whitney_umbrella_check(&f, x)?;
            flagged = !umbrella;
            json!({ "x": x, "whitney_umbrella": umbrella })
        }
        Command::NormalCrossings => {
            let (f, d) = plain_map(cfg, spec()?)?;
            let rep = normal_crossings_check(&f, &d, cfg.d_max.unwrap_or(3), cfg.budget.unwrap_or(4096))?;
            flagged = rep.verdict == CrossingVerdict::NotNormalCrossings;
            to_value(&rep)?
        }
        Command::Injectivity => {
            let (f, d) = plain_map(cfg, spec()?)?;
            let rep = injectivity_check(&f, &d, cfg.budget.unwrap_or(4096))?;
            flagged = rep.verdict == InjectivityVerdict::NotInjective;
            to_value(&rep)?
        }
        Command::DfEstimate => {
            let (f, d) = plain_map(cfg, spec()?)?;
            to_value(&estimate_df(&f, &d, cfg.budget.unwrap_or(10_000), seed)?)?
        }
        Command::Boxdim => {
            let points = match spec()? {
                ProblemSpec::Cloud {
                    generator: CloudSpec::Cantor { depth },
                } => cantor_sample(*depth),
                _ => bail!("boxdim needs a point-cloud problem"),
            };
            let est = box_count(&points, &cfg.scales.unwrap_or_default())?;
            csv = csv_bytes(|b| write_scales_csv(&est, b))?;
            to_value(&est)?
        }
        Command::ParetoAtlas => {
            let f = multi(cfg, spec()?)?;
            let atlas = build_pareto_atlas(&f, cfg.resolution.unwrap_or(10))?;
            csv = csv_bytes(|b| atlas.write_csv(b))?;
            json!({ "alpha_hat": f.alpha_hat, "atlas": atlas })
        }
        Command::Simpliciality => {
            let f = multi(cfg, spec()?)?;
            let atlas = build_pareto_atlas(&f, cfg.resolution.unwrap_or(10))?;
            let opts = SimplicialityOptions {
                probe_budget: cfg.probe_budget.unwrap_or(64),
                rank_policy: rank_policy(cfg),
            };
            let rep = simpliciality_check(&f, &atlas, &opts)?;
            flagged = matches!(rep.verdict, SimplicialityVerdict::Failed { .. });
            csv = csv_bytes(|b| atlas.write_csv(b))?;
            to_value(&rep)?
        }
        Command::PerturbStudy => {
            let f = multi(cfg, spec()?)?;
            let mut opts = PerturbationStudyOptions::new(cfg.scale.unwrap_or(1.0), cfg.trials.unwrap_or(100), seed);
            if let Some(b) = cfg.budget {
                opts.survey_budget = b;
            }
            if let Some(r) = cfg.resolution {
                opts.atlas_resolution = r;
            }
            if let Some(p) = cfg.probe_budget {
                opts.probe_budget = p;
            }
            let convexity = strong_convexity_estimate(&f, 1024)?;
            let study = perturbation_study(&f, &opts)?;
            flagged = !study.bad_samples.is_empty();
            let pis: Vec<Vec<f64>> = study.bad_samples.iter().map(|b| b.pi.clone()).collect();
            csv = csv_bytes(|b| write_points_csv("pi", f.objectives() * f.dim(), &pis, b))?;
            json!({ "convexity": convexity, "study": study })
        }
        Command::MeasureZeroProbe => {
            let (p, _) = family(cfg, spec()?)?;
            let rep = measure_zero_probe(&p, cfg.trials.unwrap_or(1000), seed, search)?;
            flagged = rep.hit_count > 0;
            csv = csv_bytes(|b| write_points_csv("a", p.param_dim(), &rep.hits, b))?;
            to_value(&rep)?
        }
    };
    Ok(Outcome {
        report: Report {
            schema_version: SCHEMA_VERSION,
            command: cfg.command.name(),
            problem: cfg.problem_label(),
            seed: cfg.seed,
            flagged,
            result,
        },
        csv,
    })
}

pub fn report_json(report: &Report) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Writes `<command>.json` (always) and `<command>.csv` (for the CSV format,
/// when the command has a table) into `dir`. Returns the written paths.
pub fn emit_report(outcome: &Outcome, dir: &Path, format: Format) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = outcome.report.command;
    let json_path = dir.join(format!("{stem}.json"));
    std::fs::write(&json_path, report_json(&outcome.report)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    let mut written = vec![json_path];
    if format == Format::Csv {
        let Some(csv) = &outcome.csv else {
            bail!("command `{stem}` has no CSV output");
        };
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
        written.push(csv_path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn morse_threshold_scenario() {
        let mut cfg = ScenarioConfig::new(Command::Threshold);
        cfg.threshold = Some(ThresholdQuery::Morse { m: 1, r: Smoothness::Finite(2) });
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.report.result["s_bound"]["bound"], "1");
        assert_eq!(out.report.result["s_bound"]["strict"], false);
    }

    #[test]
    fn classify_origin_of_quadratic_family() {
        let mut cfg = ScenarioConfig::new(Command::Classify).with_problem("ex-2-2");
        cfg.x = Some(vec![0.0]);
        cfg.a = Some(vec![0.0, 0.0]);
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.report.result["classification"], "IN_W");
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn family_threshold_from_sampled_defect() {
        let cfg = ScenarioConfig::new(Command::Threshold).with_problem("ex-2-3");
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.report.result["display"], "s > 1");
    }

    #[test]
    fn wrong_problem_kind() {
        let cfg = ScenarioConfig::new(Command::Morse).with_problem("ex-2-2");
        assert!(run_scenario(&cfg).is_err());
    }

    #[test]
    fn csv_only_when_available() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig::new(Command::Umbrella).with_problem("whitney-degenerate");
        cfg.x = Some(vec![0.0, 0.0]);
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.exit_code(), 2);
        assert_eq!(emit_report(&out, dir.path(), Format::Json).unwrap().len(), 1);
        assert!(emit_report(&out, dir.path(), Format::Csv).is_err());
    }
}
